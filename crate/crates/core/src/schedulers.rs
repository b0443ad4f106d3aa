//! Heuristic baselines that drive the same two-drone action interface as the
//! learned policy.
//!
//! Naive NNPW chases the best weight-over-deadline patient with a greedy
//! Manhattan step and no coordination. The Smart variants add a claim map so
//! the drones never chase the same patient, A* movement, and a battery
//! reserve rule that sends a drone home before it runs dry.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::config::RunConfig;
use crate::triage::Patient;
use crate::world::{astar_path, Action, Cell, World};

/// Keeps the NNPW score finite when a timer reaches zero.
pub const EPS_NUM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    NaiveNnpw,
    SmartEdf,
    SmartNnpw,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::NaiveNnpw, Baseline::SmartEdf, Baseline::SmartNnpw];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::NaiveNnpw => "naive-nnpw",
            Baseline::SmartEdf => "smart-edf",
            Baseline::SmartNnpw => "smart-nnpw",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected naive-nnpw, smart-edf or smart-nnpw)"))
    }
}

/// Battery reserve rule for the Smart variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandingRule {
    pub reserve_factor: f64,
    pub safety_margin: f64,
}

impl LandingRule {
    pub fn from_config(cfg: &RunConfig) -> Self {
        LandingRule { reserve_factor: cfg.eval.reserve_factor.max(1.0), safety_margin: cfg.safety_margin() }
    }
}

/// Per-episode claim map shared by both Smart agents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoordinationState {
    targets: [Option<usize>; 2],
    claims: BTreeMap<usize, usize>,
}

impl CoordinationState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn target(&self, agent: usize) -> Option<usize> {
        self.targets[agent]
    }

    pub fn claimant(&self, patient: usize) -> Option<usize> {
        self.claims.get(&patient).copied()
    }

    pub fn claims(&self) -> &BTreeMap<usize, usize> {
        &self.claims
    }

    pub fn claim(&mut self, agent: usize, patient: usize) {
        self.release(agent);
        debug_assert!(self.claims.get(&patient).is_none_or(|&a| a == agent));
        self.claims.insert(patient, agent);
        self.targets[agent] = Some(patient);
    }

    pub fn release(&mut self, agent: usize) {
        if let Some(p) = self.targets[agent].take() {
            self.claims.remove(&p);
        }
    }

    /// Drops claims on patients that were delivered or expired.
    pub fn prune(&mut self, world: &World) {
        let active = |id: usize| world.patients().get(id).is_some_and(Patient::is_active);
        self.claims.retain(|&p, _| active(p));
        for t in &mut self.targets {
            if t.is_some_and(|p| !active(p)) {
                *t = None;
            }
        }
    }
}

/// `w / (timer + EPS_NUM)`.
pub fn nnpw_score(weight: u8, timer_remaining: u32) -> f64 {
    weight as f64 / (timer_remaining as f64 + EPS_NUM)
}

/// NNPW score discounted by `1 + Manhattan distance`.
pub fn proximity_score(weight: u8, timer_remaining: u32, distance: u32) -> f64 {
    nnpw_score(weight, timer_remaining) / (1.0 + distance as f64)
}

pub fn landing_rule_fires(world: &World, agent: usize, rule: &LandingRule) -> bool {
    if world.all_patients_resolved() {
        return true;
    }
    let d = world.drone(agent);
    let dist = d.pos.manhattan(d.landing_zone) as f64;
    d.battery() <= rule.reserve_factor * world.config().world.drain_base * dist + rule.safety_margin
}

/// One greedy Manhattan step from `from` toward `to` along the axis with the
/// larger gap (horizontal on ties). Obstacles are not considered: a blocked
/// move is emitted as is and the world registers the collision.
pub fn greedy_step(from: Cell, to: Cell) -> Option<Action> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let horiz = match dx.signum() {
        1 => Some(Action::Right),
        -1 => Some(Action::Left),
        _ => None,
    };
    let vert = match dy.signum() {
        1 => Some(Action::Down),
        -1 => Some(Action::Up),
        _ => None,
    };
    let (first, second) = if dx.abs() >= dy.abs() { (horiz, vert) } else { (vert, horiz) };
    first.or(second)
}

/// Any unblocked move, used to idle near a landing zone.
fn idle_move(world: &World, from: Cell) -> Action {
    let other = world.drone(0).pos;
    let other = if other == from { world.drone(1).pos } else { other };
    Action::MOVES
        .into_iter()
        .find(|&a| {
            let c = from.step(a);
            !world.grid().is_obstacle(c) && c != other
        })
        .unwrap_or(Action::Up)
}

fn head_home(world: &World, agent: usize, may_land: bool, use_astar: bool) -> Action {
    let d = world.drone(agent);
    if d.pos == d.landing_zone {
        return if may_land { Action::Land } else { idle_move(world, d.pos) };
    }
    step_toward(world, d.pos, d.landing_zone, use_astar)
}

fn step_toward(world: &World, from: Cell, to: Cell, use_astar: bool) -> Action {
    if use_astar {
        if let Ok(Some(path)) = astar_path(world.grid(), from, to) {
            if let Some(&next) = path.get(1) {
                return direction(from, next);
            }
        }
    }
    greedy_step(from, to).unwrap_or(Action::Up)
}

fn direction(from: Cell, to: Cell) -> Action {
    Action::MOVES.into_iter().find(|&a| from.step(a) == to).expect("path cells are 4-adjacent")
}

pub fn naive_nnpw_action(world: &World, agent: usize) -> Action {
    let d = world.drone(agent);
    if !d.is_active() {
        return Action::Land;
    }
    let clock = world.clock();
    let best = world.active_patients().map(|p| (nnpw_score(p.weight_at(clock), p.timer_remaining), p)).fold(
        None::<(f64, &Patient)>,
        |acc, (s, p)| match acc {
            Some((bs, _)) if bs >= s => acc,
            _ => Some((s, p)),
        },
    );
    match best {
        Some((_, p)) => step_toward(world, d.pos, p.loc, false),
        None => head_home(world, agent, world.all_patients_resolved(), false),
    }
}

#[derive(Clone, Copy)]
enum Criterion {
    Edf,
    Nnpw,
}

fn smart_action(
    world: &World,
    agent: usize,
    coord: &mut CoordinationState,
    rule: &LandingRule,
    c: Criterion,
) -> Action {
    coord.prune(world);
    let d = world.drone(agent);
    if !d.is_active() {
        coord.release(agent);
        return Action::Land;
    }
    if landing_rule_fires(world, agent, rule) {
        coord.release(agent);
        return head_home(world, agent, true, true);
    }
    let clock = world.clock();
    let pick = |coord: &CoordinationState, allow_claimed: bool| {
        let candidates =
            world.active_patients().filter(|p| allow_claimed || coord.claimant(p.id).is_none_or(|a| a == agent));
        match c {
            Criterion::Edf => {
                candidates.min_by_key(|p| (p.timer_remaining, p.loc.manhattan(d.pos), p.id)).map(|p| p.id)
            }
            Criterion::Nnpw => candidates
                .map(|p| (proximity_score(p.weight_at(clock), p.timer_remaining, p.loc.manhattan(d.pos)), p.id))
                .fold(None::<(f64, usize)>, |acc, (s, id)| match acc {
                    Some((bs, _)) if bs >= s => acc,
                    _ => Some((s, id)),
                })
                .map(|(_, id)| id),
        }
    };
    let target = match pick(coord, false) {
        Some(id) => {
            coord.claim(agent, id);
            Some(id)
        }
        None => {
            // everything active is claimed by the partner: shadow its best pick unclaimed
            coord.release(agent);
            pick(coord, true)
        }
    };
    match target {
        Some(id) => step_toward(world, d.pos, world.patients()[id].loc, true),
        None => head_home(world, agent, false, true),
    }
}

pub fn smart_edf_action(world: &World, agent: usize, coord: &mut CoordinationState, rule: &LandingRule) -> Action {
    smart_action(world, agent, coord, rule, Criterion::Edf)
}

pub fn smart_nnpw_action(world: &World, agent: usize, coord: &mut CoordinationState, rule: &LandingRule) -> Action {
    smart_action(world, agent, coord, rule, Criterion::Nnpw)
}

/// Stateful two-agent controller; agent 0 decides (and claims) first.
#[derive(Debug, Clone)]
pub struct BaselineController {
    pub kind: Baseline,
    pub rule: LandingRule,
    coord: CoordinationState,
}

impl BaselineController {
    pub fn new(kind: Baseline, rule: LandingRule) -> Self {
        BaselineController { kind, rule, coord: CoordinationState::new() }
    }

    pub fn reset(&mut self) {
        self.coord = CoordinationState::new();
    }

    pub fn coordination(&self) -> &CoordinationState {
        &self.coord
    }

    pub fn actions(&mut self, world: &World) -> [Action; 2] {
        let mut out = [Action::Land; 2];
        for (agent, a) in out.iter_mut().enumerate() {
            *a = match self.kind {
                Baseline::NaiveNnpw => naive_nnpw_action(world, agent),
                Baseline::SmartEdf => smart_edf_action(world, agent, &mut self.coord, &self.rule),
                Baseline::SmartNnpw => smart_nnpw_action(world, agent, &mut self.coord, &self.rule),
            };
        }
        out
    }
}
