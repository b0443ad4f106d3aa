//! The CTDE training loop: one shared Q-network, queried once per agent with
//! the agent's own observation block first.

use std::path::{Path, PathBuf};

use log::{debug, info};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::checkpoint::save_checkpoint;
use super::dqn::{select_action, sync_target, td_update};
use super::network::QNetwork;
use super::replay::{ReplayBuffer, Transition};
use super::schedule::EpsilonSchedule;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::incentives::{score, PreStep};
use crate::seed::{derive_seed, stream_rng};
use crate::sensing::{joint_len, observe};
use crate::world::{Action, Event, World};

const EPISODE_STREAM: u64 = 10;
const EXPLORE_STREAM: u64 = 11;
const INIT_STREAM: u64 = 12;

pub const CHECKPOINT_FILE: &str = "policy.ckpt";
pub const LOG_FILE: &str = "training_log.csv";
pub const CONFIG_FILE: &str = "config.txt";

/// One training episode's summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub steps: u32,
    pub reward0: f64,
    pub reward1: f64,
    /// Sum over both agents.
    pub reward_total: f64,
    /// Mean over both agents.
    pub reward_mean: f64,
    pub spawned: usize,
    pub delivered: usize,
    pub expired: usize,
    pub landed0: bool,
    pub landed1: bool,
    pub collisions: usize,
    pub battery0: f64,
    pub battery1: f64,
    pub d_w1: usize,
    pub d_w2: usize,
    pub d_w3: usize,
    pub u_w1: usize,
    pub u_w2: usize,
    pub u_w3: usize,
    pub updates: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<EpisodeLog>,
}

impl TrainingLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Trailing `window`-episode moving average of the summed reward.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let r: Vec<f64> = self.rows.iter().map(|e| e.reward_total).collect();
        (0..r.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(window);
                r[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let rows = r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| Error::csv(path, e))?;
        Ok(TrainingLog { rows })
    }
}

pub struct TrainOutcome {
    pub network: QNetwork,
    pub log: TrainingLog,
    pub checkpoint: Option<PathBuf>,
}

/// Owns all mutable training state so episodes can be driven one at a time.
pub struct Trainer {
    cfg: RunConfig,
    seed: u64,
    policy: QNetwork,
    target: QNetwork,
    opt: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    schedule: EpsilonSchedule,
    episode: usize,
    updates: usize,
}

impl Trainer {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.sim.triage.max_patients;
        let mut dims = vec![joint_len(m)];
        dims.extend(&cfg.learner.hidden);
        dims.push(Action::COUNT);
        let policy = QNetwork::new(&dims, &mut stream_rng(seed, INIT_STREAM))?;
        let target = policy.clone();
        let l = &cfg.learner;
        Ok(Trainer {
            opt: Adam::new(&policy, l.lr),
            buffer: ReplayBuffer::new(l.buffer_capacity, cfg.sim.observation_len()),
            rng: stream_rng(seed, EXPLORE_STREAM),
            schedule: EpsilonSchedule::new(l.epsilon_start, l.epsilon_min, l.epsilon_decay_fraction, l.episodes),
            policy,
            target,
            cfg: cfg.clone(),
            seed,
            episode: 0,
            updates: 0,
        })
    }

    pub fn policy(&self) -> &QNetwork {
        &self.policy
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// World seed for training episode `e`.
    pub fn episode_seed(seed: u64, e: usize) -> u64 {
        derive_seed(seed, EPISODE_STREAM, e as u64)
    }

    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let e = self.episode;
        let ep_seed = Self::episode_seed(self.seed, e);
        let epsilon = self.schedule.value(e);
        let l = &self.cfg.learner;
        let (batch_size, gamma, train_every) = (l.batch_size, l.gamma, l.train_every.max(1));
        let mut world = World::new(&self.cfg.sim, ep_seed)?;
        let mut log = EpisodeLog {
            episode: e,
            seed: ep_seed,
            epsilon,
            steps: 0,
            reward0: 0.0,
            reward1: 0.0,
            reward_total: 0.0,
            reward_mean: 0.0,
            spawned: 0,
            delivered: 0,
            expired: 0,
            landed0: false,
            landed1: false,
            collisions: 0,
            battery0: 0.0,
            battery1: 0.0,
            d_w1: 0,
            d_w2: 0,
            d_w3: 0,
            u_w1: 0,
            u_w2: 0,
            u_w3: 0,
            updates: 0,
            mean_loss: 0.0,
        };
        let mut loss_sum = 0.0;
        let mut obs = [observe(&world, 0), observe(&world, 1)];
        let mut input = Vec::with_capacity(2 * obs[0].len());

        while !world.is_terminal() {
            let mut actions = [0usize; 2];
            for (i, a) in actions.iter_mut().enumerate() {
                input.clear();
                input.extend_from_slice(&obs[i]);
                input.extend_from_slice(&obs[1 - i]);
                *a = select_action(&self.policy, &input, epsilon, &mut self.rng)?;
            }
            let pre = PreStep::capture(&world);
            let outcome = world.step(actions.map(|a| Action::ALL[a]))?;
            let rewards = score(&self.cfg.reward, &pre, &world, &outcome);
            let next = [observe(&world, 0), observe(&world, 1)];

            for ev in &outcome.events {
                match *ev {
                    Event::Delivered { weight, .. } => {
                        log.delivered += 1;
                        *class_slot(&mut log, true, weight) += 1;
                    }
                    Event::PatientExpired { weight, .. } => {
                        log.expired += 1;
                        *class_slot(&mut log, false, weight) += 1;
                    }
                    Event::ObstacleCollision { .. } | Event::AgentCollision => log.collisions += 1,
                    _ => {}
                }
            }
            log.reward0 += rewards.total[0];
            log.reward1 += rewards.total[1];
            log.steps += 1;

            // truncation at the step cap is bootstrapped, not terminal
            self.buffer.push(&Transition {
                obs,
                actions,
                rewards: rewards.total,
                next_obs: next.clone(),
                terminal: outcome.is_true_terminal(),
            });
            obs = next;

            if self.buffer.len() >= batch_size && (log.steps as usize).is_multiple_of(train_every) {
                let batch = self.buffer.sample(batch_size, &mut self.rng);
                loss_sum += td_update(&mut self.policy, &self.target, &batch, gamma, &mut self.opt)?;
                log.updates += 1;
            }
        }

        log.spawned = world.patients().len();
        log.landed0 = world.drone(0).landed;
        log.landed1 = world.drone(1).landed;
        log.battery0 = world.drone(0).battery();
        log.battery1 = world.drone(1).battery();
        log.reward_total = log.reward0 + log.reward1;
        log.reward_mean = log.reward_total / 2.0;
        if log.updates > 0 {
            log.mean_loss = loss_sum / log.updates as f64;
        }
        self.updates += log.updates;
        self.episode += 1;
        if self.episode.is_multiple_of(self.cfg.learner.target_update) {
            sync_target(&self.policy, &mut self.target);
        }
        Ok(log)
    }
}

fn class_slot(log: &mut EpisodeLog, delivered: bool, weight: u8) -> &mut usize {
    match (delivered, weight) {
        (true, 1) => &mut log.d_w1,
        (true, 2) => &mut log.d_w2,
        (true, _) => &mut log.d_w3,
        (false, 1) => &mut log.u_w1,
        (false, 2) => &mut log.u_w2,
        (false, _) => &mut log.u_w3,
    }
}

/// Runs the configured number of episodes. With `out_dir`, writes the
/// effective config, periodic and final checkpoints, and the training log.
pub fn train(cfg: &RunConfig, seed: u64, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg, seed)?;
    let ckpt = out_dir.map(|d| d.join(CHECKPOINT_FILE));
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let cfg_path = dir.join(CONFIG_FILE);
        std::fs::write(&cfg_path, format!("# seed = {seed}\n{}", cfg.echo())).map_err(|e| Error::io(&cfg_path, e))?;
    }
    let total = cfg.learner.episodes;
    let report_every = (total / 20).max(1);
    let mut log = TrainingLog { rows: Vec::with_capacity(total) };
    for e in 0..total {
        let row = trainer.run_episode()?;
        debug!("episode {e}: reward {:.2} delivered {} steps {}", row.reward_total, row.delivered, row.steps);
        log.rows.push(row);
        if (e + 1) % report_every == 0 {
            let ma = log.moving_average(100);
            info!(
                "episode {}/{total}: eps {:.3}, reward ma100 {:.2}, updates {}",
                e + 1,
                trainer.schedule.value(e),
                ma[e],
                trainer.updates()
            );
        }
        if let Some(path) = &ckpt {
            if cfg.learner.checkpoint_interval > 0 && (e + 1) % cfg.learner.checkpoint_interval == 0 {
                save_checkpoint(trainer.policy(), path)?;
            }
        }
    }
    if let (Some(dir), Some(path)) = (out_dir, &ckpt) {
        save_checkpoint(trainer.policy(), path)?;
        log.write_csv(dir.join(LOG_FILE))?;
    }
    Ok(TrainOutcome { network: trainer.policy, log, checkpoint: ckpt })
}
