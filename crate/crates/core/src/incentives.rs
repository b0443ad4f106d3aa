//! Shaped per-step reward, event milestones and the clipped total.

use crate::config::RewardConfig;
use crate::world::{Event, StepOutcome, World};

/// Manhattan distance from `agent` to its nearest active patient (lowest id on
/// ties), or to its landing zone when no patient is active.
pub fn target_distance(world: &World, agent: usize) -> u32 {
    let pos = world.drone(agent).pos;
    world
        .active_patients()
        .map(|p| p.loc.manhattan(pos))
        .min()
        .unwrap_or_else(|| pos.manhattan(world.drone(agent).landing_zone))
}

/// Potential-based shaping term `lambda * (D_before - D_after)`.
pub fn shaping(d_before: u32, d_after: u32, lambda: f64) -> f64 {
    lambda * (d_before as f64 - d_after as f64)
}

/// Unclipped per-step reward for an agent that was flying this step.
pub fn step_reward(cfg: &RewardConfig, world: &World, agent: usize, outcome: &StepOutcome, phi: f64) -> f64 {
    let me = world.drone(agent);
    let other = world.drone(1 - agent);
    let grid = world.grid();
    let wind = grid.is_wind(me.pos);
    let lowsig = grid.is_lowsig(me.pos);
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    let invalid_land = outcome.events.contains(&Event::InvalidLand { agent });

    -cfg.delta + indicator(!wind && !lowsig) * cfg.beta + phi
        - indicator(wind) * cfg.gamma_w
        - indicator(lowsig) * cfg.gamma_s
        - indicator(me.battery() < world.config().world.battery_low) * cfg.gamma_b
        - indicator(me.pos.manhattan(other.pos) < cfg.r_close) * cfg.closeness
        - indicator(invalid_land) * cfg.invalid_land_penalty
}

/// Event reward for `agent`; never clipped.
pub fn milestone_reward(cfg: &RewardConfig, outcome: &StepOutcome, agent: usize, t_max: u32) -> f64 {
    let mut r = 0.0;
    let mut collided = false;
    for e in &outcome.events {
        match *e {
            Event::Delivered { agent: a, timer_remaining, weight, .. } if a == agent => {
                r += delivery_reward(cfg, timer_remaining, t_max, weight);
            }
            Event::BatteryDepleted { agent: a } if a == agent => r -= cfg.r_bat,
            Event::Landed { agent: a } if a == agent => r += cfg.r_land,
            Event::PatientExpired { .. } => r -= cfg.p_death / 2.0,
            ref e if e.is_collision_for(agent) => collided = true,
            _ => {}
        }
    }
    if collided {
        r -= cfg.r_crash;
    }
    r
}

/// `R_goal * (timer / T_max) * weight`.
pub fn delivery_reward(cfg: &RewardConfig, timer_remaining: u32, t_max: u32, weight: u8) -> f64 {
    cfg.r_goal * (timer_remaining as f64 / t_max as f64) * weight as f64
}

pub fn total_reward(step_r: f64, milestone_r: f64, delta_max: f64) -> f64 {
    step_r.clamp(-delta_max, delta_max) + milestone_r
}

/// Shaping potentials captured before a step.
#[derive(Debug, Clone, Copy)]
pub struct PreStep {
    distance: [u32; 2],
}

impl PreStep {
    pub fn capture(world: &World) -> Self {
        PreStep { distance: [target_distance(world, 0), target_distance(world, 1)] }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepRewards {
    pub step_raw: [f64; 2],
    pub step_clipped: [f64; 2],
    pub milestone: [f64; 2],
    pub total: [f64; 2],
}

/// Scores one world transition for both agents.
pub fn score(cfg: &RewardConfig, pre: &PreStep, after: &World, outcome: &StepOutcome) -> StepRewards {
    let t_max = after.config().triage.t_max;
    let mut out = StepRewards::default();
    for agent in 0..2 {
        if outcome.active_before[agent] {
            let phi = shaping(pre.distance[agent], target_distance(after, agent), cfg.lambda);
            out.step_raw[agent] = step_reward(cfg, after, agent, outcome, phi);
        }
        out.step_clipped[agent] = out.step_raw[agent].clamp(-cfg.delta_max, cfg.delta_max);
        out.milestone[agent] = milestone_reward(cfg, outcome, agent, t_max);
        out.total[agent] = out.step_clipped[agent] + out.milestone[agent];
    }
    out
}
