use std::sync::Arc;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::incentives::{score, PreStep};
use crate::learner::{argmax, QNetwork};
use crate::schedulers::{Baseline, BaselineController, LandingRule};
use crate::seed::derive_seed;
use crate::sensing::{apply_mask_joint, joint_len, joint_state, AblationMask};
use crate::world::{Action, Cell, Event, TerminalCause, World};

const EVAL_STREAM: u64 = 20;

/// Anything that can fly both drones: a greedy network or a heuristic baseline.
#[derive(Debug, Clone)]
pub enum Policy {
    Network { net: Arc<QNetwork>, mask: AblationMask },
    Baseline(Baseline),
}

impl Policy {
    pub fn network(net: QNetwork) -> Self {
        Policy::Network { net: Arc::new(net), mask: AblationMask::NONE }
    }

    pub fn with_mask(&self, mask: AblationMask) -> Result<Self> {
        match self {
            Policy::Network { net, .. } => Ok(Policy::Network { net: Arc::clone(net), mask }),
            Policy::Baseline(_) => Err(Error::Argument("ablation masks apply only to network policies".into())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Policy::Network { .. } => "ceda".into(),
            Policy::Baseline(b) => b.name().into(),
        }
    }

    /// Rejects a network whose input width does not match the scenario's patient slots.
    pub fn check_compatible(&self, cfg: &RunConfig) -> Result<()> {
        if let Policy::Network { net, .. } = self {
            let want = joint_len(cfg.sim.triage.max_patients);
            if net.input_dim() != want {
                return Err(Error::Config(format!(
                    "network expects {} inputs but triage.max_patients = {} gives {want}",
                    net.input_dim(),
                    cfg.sim.triage.max_patients
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatientFate {
    Delivered,
    Expired,
    /// Still waiting when the episode ended.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub id: usize,
    pub spawn_weight: u8,
    /// Weight at delivery, expiry, or the final step.
    pub terminal_weight: u8,
    pub fate: PatientFate,
    pub spawn_clock: u32,
    pub end_clock: u32,
    pub loc: Cell,
}

/// Per-step positions and hazard exposure for trajectory plots.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub width: usize,
    pub height: usize,
    pub obstacles: Vec<Cell>,
    /// Row-major count of steps each cell spent inside a wind zone.
    pub wind_steps: Vec<u32>,
    pub lowsig_steps: Vec<u32>,
    pub positions: Vec<[Cell; 2]>,
    pub landing_zones: [Cell; 2],
    pub deliveries: Vec<(Cell, usize, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub steps: u32,
    pub terminal: TerminalCause,
    pub landed: [bool; 2],
    pub battery: [f64; 2],
    pub collisions: [usize; 2],
    pub rewards: [f64; 2],
    pub patients: Vec<PatientRecord>,
    /// Raw `(clock, event)` log; initial patients appear as spawns at clock 0.
    pub events: Vec<(u32, Event)>,
    pub trace: Option<Trace>,
}

impl EpisodeRecord {
    pub fn both_landed(&self) -> bool {
        self.landed[0] && self.landed[1]
    }

    pub fn delivered(&self) -> usize {
        self.patients.iter().filter(|p| p.fate == PatientFate::Delivered).count()
    }

    pub fn expired(&self) -> usize {
        self.patients.iter().filter(|p| p.fate == PatientFate::Expired).count()
    }

    pub fn mean_battery(&self) -> f64 {
        (self.battery[0] + self.battery[1]) / 2.0
    }

    /// Count of patients with the given fate whose terminal weight is `w`.
    pub fn count(&self, fate: PatientFate, w: u8) -> usize {
        self.patients.iter().filter(|p| p.fate == fate && p.terminal_weight == w).count()
    }
}

/// Evaluation world seed for episode `k` under base `seed`.
pub fn episode_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, EVAL_STREAM, k as u64)
}

/// Simulates one episode to its terminal step.
pub fn run_episode(policy: &Policy, cfg: &RunConfig, seed: u64, record_trace: bool) -> Result<EpisodeRecord> {
    policy.check_compatible(cfg)?;
    let mut world = World::new(&cfg.sim, seed)?;
    let mut controller = match policy {
        Policy::Baseline(b) => Some(BaselineController::new(*b, LandingRule::from_config(cfg))),
        Policy::Network { .. } => None,
    };

    let mut events: Vec<(u32, Event)> =
        world.patients().iter().map(|p| (0, Event::PatientSpawned { patient: p.id, level: p.spawn_level })).collect();
    let mut trace = record_trace.then(|| Trace {
        width: world.grid().width(),
        height: world.grid().height(),
        obstacles: world.grid().obstacles().collect(),
        wind_steps: vec![0; world.grid().cell_count()],
        lowsig_steps: vec![0; world.grid().cell_count()],
        positions: vec![[world.drone(0).pos, world.drone(1).pos]],
        landing_zones: [world.drone(0).landing_zone, world.drone(1).landing_zone],
        deliveries: Vec::new(),
    });
    let mut collisions = [0usize; 2];
    let mut rewards = [0.0f64; 2];
    let m = cfg.sim.triage.max_patients;

    while !world.is_terminal() {
        if let Some(t) = trace.as_mut() {
            accumulate_hazards(t, &world);
        }
        let actions = match (policy, controller.as_mut()) {
            (_, Some(c)) => c.actions(&world),
            (Policy::Network { net, mask }, None) => {
                let mut a = [Action::Land; 2];
                for (i, slot) in a.iter_mut().enumerate() {
                    let mut x = joint_state(&world, i);
                    apply_mask_joint(&mut x, mask, m);
                    *slot = Action::ALL[argmax(&net.forward(&x)?)];
                }
                a
            }
            (Policy::Baseline(_), None) => unreachable!("baseline policies always carry a controller"),
        };
        let pre = PreStep::capture(&world);
        let clock = world.clock();
        let outcome = world.step(actions)?;
        let r = score(&cfg.reward, &pre, &world, &outcome);
        rewards[0] += r.total[0];
        rewards[1] += r.total[1];
        for ev in &outcome.events {
            match *ev {
                Event::ObstacleCollision { agent } => collisions[agent] += 1,
                Event::AgentCollision => {
                    collisions[0] += 1;
                    collisions[1] += 1;
                }
                Event::Delivered { patient, agent, .. } => {
                    if let Some(t) = trace.as_mut() {
                        t.deliveries.push((world.patients()[patient].loc, agent, clock));
                    }
                }
                _ => {}
            }
            // deliveries and collisions happen before the clock advances; the rest after
            let at = match ev {
                Event::Delivered { .. }
                | Event::ObstacleCollision { .. }
                | Event::AgentCollision
                | Event::Landed { .. }
                | Event::InvalidLand { .. }
                | Event::ActionFailed { .. }
                | Event::BatteryDepleted { .. } => clock,
                _ => world.clock(),
            };
            events.push((at, *ev));
        }
        if let Some(t) = trace.as_mut() {
            t.positions.push([world.drone(0).pos, world.drone(1).pos]);
        }
    }

    let patients = ledger(&world, &events)?;
    Ok(EpisodeRecord {
        seed,
        steps: world.clock(),
        terminal: world.terminal().expect("loop exits only on terminal"),
        landed: [world.drone(0).landed, world.drone(1).landed],
        battery: [world.drone(0).battery(), world.drone(1).battery()],
        collisions,
        rewards,
        patients,
        events,
        trace,
    })
}

fn accumulate_hazards(t: &mut Trace, world: &World) {
    let g = world.grid();
    for c in g.wind_cells() {
        t.wind_steps[c.y as usize * t.width + c.x as usize] += 1;
    }
    for c in g.lowsig_cells() {
        t.lowsig_steps[c.y as usize * t.width + c.x as usize] += 1;
    }
}

fn ledger(world: &World, events: &[(u32, Event)]) -> Result<Vec<PatientRecord>> {
    let mut out: Vec<Option<PatientRecord>> = vec![None; world.patients().len()];
    for &(clock, ev) in events {
        let (id, fate, w) = match ev {
            Event::Delivered { patient, weight, .. } => (patient, PatientFate::Delivered, weight),
            Event::PatientExpired { patient, weight } => (patient, PatientFate::Expired, weight),
            Event::Unresolved { patient, weight } => (patient, PatientFate::Unresolved, weight),
            _ => continue,
        };
        let p = &world.patients()[id];
        if out[id].is_some() {
            return Err(Error::State(format!("patient {id} resolved twice")));
        }
        out[id] = Some(PatientRecord {
            id,
            spawn_weight: p.spawn_level.weight(),
            terminal_weight: w,
            fate,
            spawn_clock: p.spawn_time,
            end_clock: clock,
            loc: p.loc,
        });
    }
    out.into_iter()
        .enumerate()
        .map(|(id, r)| r.ok_or_else(|| Error::State(format!("patient {id} has no terminal event"))))
        .collect()
}

/// Runs `n` seeded episodes on up to `workers` threads; output is in seed order
/// and independent of the worker count.
pub fn run_episodes(
    policy: &Policy,
    cfg: &RunConfig,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<EpisodeRecord>> {
    policy.check_compatible(cfg)?;
    let run = |k: usize| run_episode(policy, cfg, episode_seed(seed, k), false);
    if workers <= 1 {
        return (0..n).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(run).collect())
}
