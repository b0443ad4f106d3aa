use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ceda_core::evalkit::{
    ablation_suite, export_trajectory_svg, run_episode, run_episodes, stress_grid, summarize, write_ablation_csv,
    write_episodes_csv, write_stress_csv, EpisodeRecord, Policy, Scenario,
};
use ceda_core::learner::train::CONFIG_FILE;
use ceda_core::learner::{load_checkpoint, train};
use ceda_core::schedulers::Baseline;
use ceda_core::{AblationMask, Error, Result, RunConfig};
use clap::{Args, Parser, Subcommand};
use log::info;

/// Two-drone triage delivery: training, evaluation and baselines.
#[derive(Parser, Debug)]
#[command(name = "ceda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file (`section.key = value` lines). Evaluation commands fall back
    /// to the `config.txt` written next to the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `section.key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct Parallel {
    /// Worker threads for independent episodes; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the shared Q-network and write checkpoint, log and config echo.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint on a scenario.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        par: Parallel,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "baseline")]
        scenario: String,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Comma-separated feature groups to zero: lowsig, wind, battery, weights, timers.
        #[arg(long)]
        mask: Option<String>,
    },
    /// Run a heuristic scheduler (no checkpoint needed).
    Baseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        par: Parallel,
        #[arg(long)]
        policy: Baseline,
        #[arg(long, default_value = "baseline")]
        scenario: String,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// 3x3 grid of application stress against low-signal failure probability.
    Stress {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        par: Parallel,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Input-ablation sweep over six conditions.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        par: Parallel,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Render one greedy episode as an SVG trajectory plot.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "baseline")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        svg: PathBuf,
    },
}

fn init_logging() {
    let level = match std::env::var("CEDA_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Error,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).init();
}

fn load_config(common: &Common, checkpoint: Option<&Path>) -> Result<RunConfig> {
    let sibling = checkpoint.and_then(Path::parent).map(|d| d.join(CONFIG_FILE)).filter(|p| p.exists());
    let mut cfg = match (&common.config, sibling) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(p)) => {
            info!("using {} from the checkpoint directory", p.display());
            RunConfig::load(p)?
        }
        (None, None) => RunConfig::default(),
    };
    for o in &common.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Argument(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(|m| Error::Argument(format!("--set {o}: {m}")))?;
    }
    cfg.validate()?;
    for line in cfg.echo().lines() {
        info!("config {line}");
    }
    Ok(cfg)
}

fn network_policy(path: &Path) -> Result<Policy> {
    Ok(Policy::network(load_checkpoint(path)?))
}

fn report(label: &str, records: &[EpisodeRecord]) {
    let s = summarize(records);
    println!(
        "{label}: episodes {} eta {:.4} U {:.4} both_landed {:.3} deliveries {:.2} expiries {:.2} w3_expiries {:.2} end_battery {:.2} reward {:.1}",
        s.episodes,
        s.mean_eta,
        s.mean_u,
        s.both_landed_rate,
        s.mean_deliveries,
        s.mean_expiries,
        s.mean_w3_expiries,
        s.mean_end_battery,
        s.mean_reward
    );
}

fn evaluate(
    policy: &Policy,
    cfg: &RunConfig,
    scenario: &str,
    episodes: Option<usize>,
    seed: u64,
    workers: usize,
    csv: Option<&Path>,
) -> Result<()> {
    let cfg = Scenario::by_name(scenario)?.apply(cfg)?;
    let n = episodes.unwrap_or(cfg.eval.episodes);
    let records = run_episodes(policy, &cfg, n, seed, workers)?;
    report(&format!("{} on {scenario}", policy.label()), &records);
    if let Some(path) = csv {
        write_episodes_csv(&records, path)?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, seed, out } => {
            let cfg = load_config(&common, None)?;
            let outcome = train(&cfg, seed, Some(&out))?;
            let ma = outcome.log.moving_average(100);
            println!(
                "trained {} episodes; final reward ma100 {:.2}; checkpoint {}",
                outcome.log.len(),
                ma.last().copied().unwrap_or(0.0),
                outcome.checkpoint.as_deref().unwrap_or(&out).display()
            );
        }
        Command::Eval { common, par, checkpoint, scenario, episodes, seed, csv, mask } => {
            let cfg = load_config(&common, Some(&checkpoint))?;
            let mut policy = network_policy(&checkpoint)?;
            if let Some(m) = mask {
                policy = policy.with_mask(AblationMask::parse(&m).map_err(Error::Argument)?)?;
            }
            evaluate(&policy, &cfg, &scenario, episodes, seed, par.workers, csv.as_deref())?;
        }
        Command::Baseline { common, par, policy, scenario, episodes, seed, csv } => {
            let cfg = load_config(&common, None)?;
            evaluate(&Policy::Baseline(policy), &cfg, &scenario, episodes, seed, par.workers, csv.as_deref())?;
        }
        Command::Stress { common, par, checkpoint, episodes, seed, csv } => {
            let cfg = load_config(&common, Some(&checkpoint))?;
            let policy = network_policy(&checkpoint)?;
            let grid = stress_grid(&policy, &cfg, episodes.unwrap_or(cfg.eval.episodes), seed, par.workers)?;
            for c in &grid.cells {
                println!(
                    "{:<8} p_fail {:.1}: eta {:.4} both_landed {:.3} w3_expiries {:.2}",
                    c.stress, c.p_fail, c.eta, c.both_landed, c.w3_expiries
                );
            }
            write_stress_csv(&grid, &csv)?;
        }
        Command::Ablate { common, par, checkpoint, episodes, seed, csv } => {
            let cfg = load_config(&common, Some(&checkpoint))?;
            let policy = network_policy(&checkpoint)?;
            let table = ablation_suite(&policy, &cfg, episodes.unwrap_or(cfg.eval.episodes), seed, par.workers)?;
            for r in &table.rows {
                println!(
                    "{:<18} eta {:.4} both_landed {:.3} deliveries {:.2} end_battery {:.2} w3_expiries {:.2}",
                    r.condition, r.eta, r.both_landed, r.deliveries, r.end_battery, r.w3_expiries
                );
            }
            write_ablation_csv(&table, &csv)?;
        }
        Command::Trace { common, checkpoint, scenario, seed, svg } => {
            let cfg = load_config(&common, Some(&checkpoint))?;
            let cfg = Scenario::by_name(&scenario)?.apply(&cfg)?;
            let record = run_episode(&network_policy(&checkpoint)?, &cfg, seed, true)?;
            export_trajectory_svg(&record, &svg)?;
            report("trace", std::slice::from_ref(&record));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
