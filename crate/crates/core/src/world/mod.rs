//! Grid world: obstacles, dynamic hazards, drone kinematics, battery and episode lifecycle.

mod grid;
mod hazards;

pub use grid::{astar_path, astar_path_avoiding, Action, Cell, GridMap};

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::seed::stream_rng;
use crate::triage::{self, Patient, SpawnSchedule, TriageLevel};

const STREAM_MAP: u64 = 1;
const STREAM_SPAWN: u64 = 2;
const STREAM_HAZARD: u64 = 3;
const STREAM_FAILURE: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Drone {
    pub id: usize,
    pub pos: Cell,
    pub landed: bool,
    pub landing_zone: Cell,
    capacity: f64,
    drain_base: f64,
    drain_wind: f64,
    base_steps: u32,
    wind_steps: u32,
}

impl Drone {
    /// Remaining charge, recomputed from step counts so it stays exact.
    pub fn battery(&self) -> f64 {
        self.capacity - self.base_steps as f64 * self.drain_base - self.wind_steps as f64 * self.drain_wind
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn is_active(&self) -> bool {
        !self.landed
    }

    /// Removes `amount` of charge without moving (test fixtures only).
    #[cfg(test)]
    pub(crate) fn drain_for_test(&mut self, amount: f64) {
        self.capacity -= amount;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    PatientSpawned {
        patient: usize,
        level: TriageLevel,
    },
    Delivered {
        patient: usize,
        agent: usize,
        timer_remaining: u32,
        weight: u8,
    },
    ObstacleCollision {
        agent: usize,
    },
    AgentCollision,
    BatteryDepleted {
        agent: usize,
    },
    Landed {
        agent: usize,
    },
    PatientExpired {
        patient: usize,
        weight: u8,
    },
    InvalidLand {
        agent: usize,
    },
    ActionFailed {
        agent: usize,
    },
    /// Patient still active when the episode ended; carries its last weight.
    Unresolved {
        patient: usize,
        weight: u8,
    },
}

impl Event {
    /// Whether this is a collision that involves `agent`.
    pub fn is_collision_for(&self, agent: usize) -> bool {
        match *self {
            Event::ObstacleCollision { agent: a } => a == agent,
            Event::AgentCollision => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalCause {
    BothLanded,
    BatteryDepleted,
    /// Step cap reached; a horizon artifact rather than a true terminal.
    StepCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub events: Vec<Event>,
    pub terminal: Option<TerminalCause>,
    /// Which agents were still flying when the step began.
    pub active_before: [bool; 2],
}

impl StepOutcome {
    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    /// True environment terminal (not step-cap truncation).
    pub fn is_true_terminal(&self) -> bool {
        matches!(self.terminal, Some(TerminalCause::BothLanded | TerminalCause::BatteryDepleted))
    }
}

#[derive(Debug, Clone)]
pub struct World {
    cfg: SimConfig,
    grid: GridMap,
    drones: [Drone; 2],
    patients: Vec<Patient>,
    clock: u32,
    terminal: Option<TerminalCause>,
    schedule: SpawnSchedule,
    spawn_rng: ChaCha8Rng,
    hazard_rng: ChaCha8Rng,
    failure_rng: ChaCha8Rng,
}

impl World {
    /// Builds a fresh episode. The obstacle layout comes from `world.map_seed`
    /// when configured, otherwise from `seed`.
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<World> {
        let map_seed = cfg.world.map_seed.unwrap_or(seed);
        World::with_map_seed(cfg, map_seed, seed)
    }

    pub fn with_map_seed(cfg: &SimConfig, map_seed: u64, seed: u64) -> Result<World> {
        cfg.validate()?;
        let wc = &cfg.world;
        let mut grid = GridMap::new(wc.grid.width, wc.grid.height);
        let starts = wc.start_cells();
        let zones = wc.landing_zones();
        let reserved = [starts[0], starts[1], zones[0], zones[1]];

        let candidates: Vec<Cell> = grid.free_cells().filter(|c| !reserved.contains(c)).collect();
        if wc.obstacles >= candidates.len() {
            return Err(Error::Config(format!(
                "{} obstacles do not fit in {} placeable cells",
                wc.obstacles,
                candidates.len()
            )));
        }
        let mut map_rng = stream_rng(map_seed, STREAM_MAP);
        for i in index::sample(&mut map_rng, candidates.len(), wc.obstacles) {
            grid.set_obstacle(candidates[i]);
        }

        let drone = |id: usize| Drone {
            id,
            pos: starts[id],
            landed: false,
            landing_zone: zones[id],
            capacity: wc.battery_capacity,
            drain_base: wc.drain_base,
            drain_wind: wc.drain_wind,
            base_steps: 0,
            wind_steps: 0,
        };
        let mut world = World {
            cfg: cfg.clone(),
            grid,
            drones: [drone(0), drone(1)],
            patients: Vec::with_capacity(cfg.triage.max_patients),
            clock: 0,
            terminal: None,
            schedule: SpawnSchedule::from_config(&cfg.triage),
            spawn_rng: stream_rng(seed, STREAM_SPAWN),
            hazard_rng: stream_rng(seed, STREAM_HAZARD),
            failure_rng: stream_rng(seed, STREAM_FAILURE),
        };
        for _ in 0..cfg.triage.n_init {
            world.spawn_one();
        }
        world.refresh_hazards();
        Ok(world)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridMap {
        &self.grid
    }

    pub fn drones(&self) -> &[Drone; 2] {
        &self.drones
    }

    pub fn drone(&self, agent: usize) -> &Drone {
        &self.drones[agent]
    }

    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn active_patients(&self) -> impl Iterator<Item = &Patient> + '_ {
        self.patients.iter().filter(|p| p.is_active())
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn terminal(&self) -> Option<TerminalCause> {
        self.terminal
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    /// No active patients and no spawns left to come.
    pub fn all_patients_resolved(&self) -> bool {
        self.active_patients().next().is_none() && !self.schedule.pending(self.patients.len())
    }

    fn free_spawn_cells(&self) -> Vec<Cell> {
        let zones = [self.drones[0].landing_zone, self.drones[1].landing_zone];
        let drones = [self.drones[0].pos, self.drones[1].pos];
        self.grid
            .free_cells()
            .filter(|c| !zones.contains(c) && !drones.contains(c))
            .filter(|c| !self.patients.iter().any(|p| p.is_active() && p.loc == *c))
            .collect()
    }

    fn spawn_one(&mut self) -> Option<usize> {
        let free = self.free_spawn_cells();
        let id = self.patients.len();
        let p = triage::spawn_patient(&mut self.spawn_rng, &self.cfg.triage, &free, self.clock, id)?;
        self.patients.push(p);
        Some(id)
    }

    /// Resamples wind and low-signal zones along paths between active patients.
    pub fn refresh_hazards(&mut self) {
        let patient_cells: Vec<Cell> = self.active_patients().map(|p| p.loc).collect();
        let drone_cells = [self.drones[0].pos, self.drones[1].pos];
        let mut protected = patient_cells.clone();
        protected.extend(drone_cells);
        protected.extend([self.drones[0].landing_zone, self.drones[1].landing_zone]);
        hazards::refresh(
            &mut self.grid,
            &self.cfg.hazards,
            &mut self.hazard_rng,
            &patient_cells,
            drone_cells,
            &protected,
        );
    }

    /// Advances the world by one step with both agents' actions.
    pub fn step(&mut self, actions: [Action; 2]) -> Result<StepOutcome> {
        if self.terminal.is_some() {
            return Err(Error::State("step called on a terminal world".into()));
        }
        let mut events = Vec::new();
        let start = [self.drones[0].pos, self.drones[1].pos];
        let active_before = [!self.drones[0].landed, !self.drones[1].landed];
        let mut target = start;
        let mut landing = [false; 2];

        for i in 0..2 {
            if !active_before[i] {
                continue;
            }
            let pos = start[i];
            match actions[i] {
                Action::Land if pos == self.drones[i].landing_zone => landing[i] = true,
                Action::Land => events.push(Event::InvalidLand { agent: i }),
                mv => {
                    let next = pos.step(mv);
                    let other = &self.drones[1 - i];
                    if self.grid.is_obstacle(next) || (other.landed && other.pos == next) {
                        events.push(Event::ObstacleCollision { agent: i });
                    } else {
                        let mut failed = false;
                        if self.grid.is_wind(pos) {
                            failed |= self.failure_rng.gen::<f64>() < self.cfg.hazards.wind_fail_prob;
                        }
                        if self.grid.is_lowsig(pos) {
                            failed |= self.failure_rng.gen::<f64>() < self.cfg.hazards.lowsig_fail_prob;
                        }
                        if failed {
                            events.push(Event::ActionFailed { agent: i });
                        } else {
                            target[i] = next;
                        }
                    }
                }
            }
        }

        // Agent 0 keeps priority: agent 1 yields first, then agent 0 if still blocked.
        let mut agent_collision = false;
        if target[0] == target[1] {
            target[1] = start[1];
            agent_collision = true;
        }
        if target[0] == target[1] {
            target[0] = start[0];
            agent_collision = true;
        }
        if target[0] == start[1] && target[1] == start[0] && target[0] != start[0] {
            target = start;
            agent_collision = true;
        }
        if agent_collision {
            events.push(Event::AgentCollision);
        }

        for i in 0..2 {
            if !active_before[i] {
                continue;
            }
            let d = &mut self.drones[i];
            if landing[i] {
                d.landed = true;
                events.push(Event::Landed { agent: i });
                continue;
            }
            if self.grid.is_wind(start[i]) {
                d.wind_steps += 1;
            } else {
                d.base_steps += 1;
            }
            d.pos = target[i];
        }

        for i in 0..2 {
            if self.drones[i].landed {
                continue;
            }
            let pos = self.drones[i].pos;
            if let Some(p) = self.patients.iter_mut().find(|p| p.is_active() && p.loc == pos) {
                p.delivered = true;
                events.push(Event::Delivered {
                    patient: p.id,
                    agent: i,
                    timer_remaining: p.timer_remaining,
                    weight: p.weight_at(self.clock),
                });
            }
        }

        let mut depleted = false;
        for (i, d) in self.drones.iter().enumerate() {
            if active_before[i] && !d.landed && d.battery() <= 0.0 {
                events.push(Event::BatteryDepleted { agent: i });
                depleted = true;
            }
        }

        self.clock += 1;
        for e in triage::tick_all(&mut self.patients, self.clock) {
            events.push(Event::PatientExpired { patient: e.patient, weight: e.weight });
        }
        if self.schedule.due(self.clock, self.patients.len()) {
            if let Some(id) = self.spawn_one() {
                events.push(Event::PatientSpawned { patient: id, level: self.patients[id].spawn_level });
            }
        }
        if self.clock.is_multiple_of(self.cfg.hazards.refresh_interval) {
            self.refresh_hazards();
        }

        let terminal = if self.drones[0].landed && self.drones[1].landed {
            Some(TerminalCause::BothLanded)
        } else if depleted {
            Some(TerminalCause::BatteryDepleted)
        } else if self.clock >= self.cfg.world.max_steps {
            Some(TerminalCause::StepCap)
        } else {
            None
        };
        if terminal.is_some() {
            self.terminal = terminal;
            for p in self.patients.iter().filter(|p| p.is_active()) {
                events.push(Event::Unresolved { patient: p.id, weight: p.weight_at(self.clock) });
            }
        }
        Ok(StepOutcome { events, terminal, active_before })
    }

    #[cfg(test)]
    pub(crate) fn grid_mut(&mut self) -> &mut GridMap {
        &mut self.grid
    }

    #[cfg(test)]
    pub(crate) fn drones_mut(&mut self) -> &mut [Drone; 2] {
        &mut self.drones
    }

    #[cfg(test)]
    pub(crate) fn patients_mut(&mut self) -> &mut Vec<Patient> {
        &mut self.patients
    }
}
