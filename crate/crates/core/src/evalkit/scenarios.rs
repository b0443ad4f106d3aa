use super::metrics::summarize;
use super::runner::{run_episodes, Policy};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sensing::AblationMask;

/// One adjustment applied on top of a base configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Override {
    /// A literal `section.key = value` assignment.
    Set(&'static str, &'static str),
    /// Multiplies every decay-rate (`a`) range.
    ScaleDecay(f64),
    /// Multiplies the spawn interval (rounded, at least 1).
    ScaleSpawnInterval(f64),
    /// Multiplies the initial patient count (rounded, at least 1).
    ScaleInitial(f64),
    /// Multiplies the patient cap (rounded, at least `n_init`).
    ScaleMaxPatients(f64),
    /// Multiplies both hazard zone counts (rounded).
    ScaleZones(f64),
}

impl Override {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let t = &mut cfg.sim.triage;
        let scale = |v: usize, f: f64| ((v as f64 * f).round() as usize).max(1);
        match *self {
            Override::Set(k, v) => cfg.set(k, v).map_err(|m| Error::Config(format!("{k}: {m}")))?,
            Override::ScaleDecay(f) => t.scale_decay(f),
            Override::ScaleSpawnInterval(f) => t.spawn_interval = ((t.spawn_interval as f64 * f).round() as u32).max(1),
            Override::ScaleInitial(f) => t.n_init = scale(t.n_init, f).min(t.max_patients),
            Override::ScaleMaxPatients(f) => t.max_patients = scale(t.max_patients, f).max(t.n_init),
            Override::ScaleZones(f) => {
                let h = &mut cfg.sim.hazards;
                h.wind_zones = (h.wind_zones as f64 * f).round() as usize;
                h.lowsig_zones = (h.lowsig_zones as f64 * f).round() as usize;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub overrides: Vec<Override>,
}

pub const SCENARIO_NAMES: [&str; 6] =
    ["baseline", "high-network-stress", "fast-decay", "sparse-patients", "dense-patients", "low-disruption"];

impl Scenario {
    pub fn by_name(name: &str) -> Result<Scenario> {
        use Override::*;
        let overrides = match name {
            "baseline" => vec![],
            "high-network-stress" => vec![Set("hazards.lowsig_fail_prob", "0.6")],
            "fast-decay" => vec![ScaleDecay(2.0)],
            "sparse-patients" => vec![ScaleInitial(0.5), ScaleSpawnInterval(2.0)],
            "dense-patients" => vec![ScaleMaxPatients(1.5), ScaleSpawnInterval(0.5)],
            "low-disruption" => {
                vec![ScaleZones(0.5), Set("hazards.wind_fail_prob", "0.1"), Set("hazards.lowsig_fail_prob", "0.1")]
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown scenario `{name}` (expected one of {})",
                    SCENARIO_NAMES.join(", ")
                )))
            }
        };
        let name = SCENARIO_NAMES.into_iter().find(|n| *n == name).expect("matched above");
        Ok(Scenario { name, overrides })
    }

    pub fn all() -> Vec<Scenario> {
        SCENARIO_NAMES.iter().map(|n| Scenario::by_name(n).expect("built-in name")).collect()
    }

    /// Whether the scenario keeps the patient cap (and so the network input width).
    pub fn preserves_observation(&self) -> bool {
        !self.overrides.iter().any(|o| matches!(o, Override::ScaleMaxPatients(_)))
    }

    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut cfg = base.clone();
        for o in &self.overrides {
            o.apply(&mut cfg)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const STRESS_P_FAIL: [f64; 3] = [0.0, 0.3, 0.6];
pub const STRESS_ROWS: [&str; 3] = ["light", "baseline", "heavy"];

#[derive(Debug, Clone, PartialEq)]
pub struct StressCell {
    pub stress: &'static str,
    pub p_fail: f64,
    pub eta: f64,
    pub both_landed: f64,
    pub w3_expiries: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressGrid {
    pub cells: Vec<StressCell>,
}

impl StressGrid {
    pub fn cell(&self, stress: &str, p_fail: f64) -> Option<&StressCell> {
        self.cells.iter().find(|c| c.stress == stress && c.p_fail == p_fail)
    }
}

fn stress_config(base: &RunConfig, row: &str, p_fail: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    let t = &mut cfg.sim.triage;
    match row {
        "light" => {
            t.scale_decay(0.5);
            t.spawn_interval *= 2;
        }
        "heavy" => {
            t.scale_decay(2.0);
            t.spawn_interval = (t.spawn_interval / 2).max(1);
        }
        _ => {}
    }
    cfg.sim.hazards.lowsig_fail_prob = p_fail;
    cfg.validate()?;
    Ok(cfg)
}

/// Application stress (rows) crossed with low-signal failure probability (columns).
pub fn stress_grid(policy: &Policy, base: &RunConfig, n: usize, seed: u64, workers: usize) -> Result<StressGrid> {
    if n == 0 {
        return Err(Error::Argument("stress grid needs at least one episode per cell".into()));
    }
    let mut cells = Vec::with_capacity(9);
    for row in STRESS_ROWS {
        for p in STRESS_P_FAIL {
            let cfg = stress_config(base, row, p)?;
            let s = summarize(&run_episodes(policy, &cfg, n, seed, workers)?);
            cells.push(StressCell {
                stress: row,
                p_fail: p,
                eta: s.mean_eta,
                both_landed: s.both_landed_rate,
                w3_expiries: s.mean_w3_expiries,
            });
        }
    }
    Ok(StressGrid { cells })
}

pub const ABLATIONS: [&str; 6] =
    ["full", "no-network", "no-wind-physical", "no-battery", "no-triage-weights", "no-patient-timers"];

pub fn ablation_mask(condition: &str) -> Result<AblationMask> {
    let mut m = AblationMask::NONE;
    match condition {
        "full" => {}
        "no-network" => m.zero_lowsig_view = true,
        "no-wind-physical" => m.zero_wind_view = true,
        "no-battery" => m.zero_battery = true,
        "no-triage-weights" => m.zero_weights = true,
        "no-patient-timers" => m.zero_timers = true,
        _ => return Err(Error::Argument(format!("unknown ablation `{condition}`"))),
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub condition: &'static str,
    pub eta: f64,
    pub both_landed: f64,
    pub deliveries: f64,
    pub end_battery: f64,
    pub w3_expiries: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, condition: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }
}

/// Evaluates the network under each input mask on identical seeds.
pub fn ablation_suite(policy: &Policy, base: &RunConfig, n: usize, seed: u64, workers: usize) -> Result<AblationTable> {
    if n == 0 {
        return Err(Error::Argument("ablation needs at least one episode per condition".into()));
    }
    let mut rows = Vec::with_capacity(ABLATIONS.len());
    for condition in ABLATIONS {
        let p = policy.with_mask(ablation_mask(condition)?)?;
        let s = summarize(&run_episodes(&p, base, n, seed, workers)?);
        rows.push(AblationRow {
            condition,
            eta: s.mean_eta,
            both_landed: s.both_landed_rate,
            deliveries: s.mean_deliveries,
            end_battery: s.mean_end_battery,
            w3_expiries: s.mean_w3_expiries,
        });
    }
    Ok(AblationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::QNetwork;
    use crate::schedulers::Baseline;
    use crate::sensing::joint_len;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.sim.world.grid = crate::config::GridSize { width: 10, height: 10 };
        cfg.sim.world.obstacles = 6;
        cfg.sim.world.max_steps = 60;
        cfg.sim.triage.max_patients = 4;
        cfg.sim.triage.n_init = 2;
        cfg.sim.triage.spawn_interval = 20;
        cfg.sim.triage.t_max = 50;
        cfg
    }

    #[test]
    fn all_scenarios_apply_cleanly() {
        let base = small();
        for s in Scenario::all() {
            let cfg = s.apply(&base).unwrap();
            assert_eq!(s.preserves_observation(), cfg.sim.triage.max_patients == 4, "{}", s.name);
        }
        assert!(Scenario::by_name("nope").is_err());
        let stress = Scenario::by_name("high-network-stress").unwrap().apply(&base).unwrap();
        assert_eq!(stress.sim.hazards.lowsig_fail_prob, 0.6);
        let sparse = Scenario::by_name("sparse-patients").unwrap().apply(&base).unwrap();
        assert_eq!((sparse.sim.triage.n_init, sparse.sim.triage.spawn_interval), (1, 40));
    }

    #[test]
    fn unknown_override_key_rejected() {
        let mut cfg = small();
        assert!(Override::Set("hazards.nonsense", "1").apply(&mut cfg).is_err());
    }

    #[test]
    fn stress_grid_shape() {
        let g = stress_grid(&Policy::Baseline(Baseline::SmartEdf), &small(), 2, 1, 1).unwrap();
        assert_eq!(g.cells.len(), 9);
        for row in STRESS_ROWS {
            for p in STRESS_P_FAIL {
                assert!(g.cell(row, p).is_some());
            }
        }
        assert!(stress_grid(&Policy::Baseline(Baseline::SmartEdf), &small(), 0, 1, 1).is_err());
    }

    #[test]
    fn ablation_shape_and_identity_row() {
        let net = QNetwork::zeros(&[joint_len(4), 3, 5]).unwrap();
        let t = ablation_suite(&Policy::network(net), &small(), 2, 1, 1).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert!(ablation_mask("full").unwrap().is_identity());
        assert!(ablation_suite(&Policy::Baseline(Baseline::NaiveNnpw), &small(), 2, 1, 1).is_err());
    }
}
