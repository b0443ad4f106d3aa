//! Per-agent observations, joint states and evaluation-time ablation masks.
//!
//! Layout of one observation (frozen; checkpoints depend on it):
//!
//! | range                    | content                                                 |
//! |--------------------------|---------------------------------------------------------|
//! | `0..9`                   | x, y, battery, landed, other dx, other dy, zone dir x/y, clock |
//! | `9 + 7p .. 9 + 7p + 7`   | patient slot `p`: x, y, dir x/y, timer, delivered, weight |
//! | `9 + 7M .. + 25`         | 5x5 obstacle view, row-major                           |
//! | `9 + 7M + 25 .. + 25`    | 5x5 wind view                                          |
//! | `9 + 7M + 50 .. + 25`    | 5x5 low-signal view                                    |

use crate::triage::MAX_WEIGHT;
use crate::world::{Cell, World};

pub const AGENT_FEATURES: usize = 9;
pub const PATIENT_FEATURES: usize = 7;
pub const VIEW_RADIUS: i32 = 2;
pub const VIEW_CELLS: usize = 25;
pub const LOCAL_FEATURES: usize = 3 * VIEW_CELLS;

pub const BATTERY_INDEX: usize = 2;
const SLOT_TIMER: usize = 4;
const SLOT_WEIGHT: usize = 6;

pub fn observation_len(max_patients: usize) -> usize {
    AGENT_FEATURES + PATIENT_FEATURES * max_patients + LOCAL_FEATURES
}

pub fn joint_len(max_patients: usize) -> usize {
    2 * observation_len(max_patients)
}

pub fn patient_slot(slot: usize) -> usize {
    AGENT_FEATURES + PATIENT_FEATURES * slot
}

pub fn timer_index(slot: usize) -> usize {
    patient_slot(slot) + SLOT_TIMER
}

pub fn weight_index(slot: usize) -> usize {
    patient_slot(slot) + SLOT_WEIGHT
}

pub fn obstacle_view(max_patients: usize) -> std::ops::Range<usize> {
    let s = patient_slot(max_patients);
    s..s + VIEW_CELLS
}

pub fn wind_view(max_patients: usize) -> std::ops::Range<usize> {
    let s = patient_slot(max_patients) + VIEW_CELLS;
    s..s + VIEW_CELLS
}

pub fn lowsig_view(max_patients: usize) -> std::ops::Range<usize> {
    let s = patient_slot(max_patients) + 2 * VIEW_CELLS;
    s..s + VIEW_CELLS
}

fn sign(v: i32) -> f64 {
    v.signum() as f64
}

fn norm(v: i32, extent: usize) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        v as f64 / (extent - 1) as f64
    }
}

/// Builds agent `agent`'s observation of the current world.
pub fn observe(world: &World, agent: usize) -> Vec<f64> {
    let mut obs = Vec::with_capacity(world.config().observation_len());
    observe_into(world, agent, &mut obs);
    obs
}

/// Appends the observation to `out`.
pub fn observe_into(world: &World, agent: usize, out: &mut Vec<f64>) {
    let cfg = world.config();
    let (w, h) = (cfg.world.grid.width, cfg.world.grid.height);
    let me = world.drone(agent);
    let other = world.drone(1 - agent);
    let pos = me.pos;

    out.extend_from_slice(&[
        norm(pos.x, w),
        norm(pos.y, h),
        (me.battery() / me.capacity()).clamp(0.0, 1.0),
        if me.landed { 1.0 } else { 0.0 },
        norm(other.pos.x - pos.x, w),
        norm(other.pos.y - pos.y, h),
        sign(me.landing_zone.x - pos.x),
        sign(me.landing_zone.y - pos.y),
        (world.clock() as f64 / cfg.world.max_steps as f64).min(1.0),
    ]);

    let t_max = cfg.triage.t_max as f64;
    let patients = world.patients();
    for slot in 0..cfg.triage.max_patients {
        match patients.get(slot) {
            Some(p) if !p.expired => {
                let live = !p.delivered;
                out.extend_from_slice(&[
                    norm(p.loc.x, w),
                    norm(p.loc.y, h),
                    if live { sign(p.loc.x - pos.x) } else { 0.0 },
                    if live { sign(p.loc.y - pos.y) } else { 0.0 },
                    p.timer_remaining as f64 / t_max,
                    if p.delivered { 1.0 } else { 0.0 },
                    p.weight_at(world.clock()) as f64 / MAX_WEIGHT as f64,
                ]);
            }
            _ => out.extend_from_slice(&[0.0; PATIENT_FEATURES]),
        }
    }

    let grid = world.grid();
    for layer in 0..3 {
        for dy in -VIEW_RADIUS..=VIEW_RADIUS {
            for dx in -VIEW_RADIUS..=VIEW_RADIUS {
                let c = Cell::new(pos.x + dx, pos.y + dy);
                let on = match layer {
                    0 => grid.is_obstacle(c),
                    1 => grid.is_wind(c),
                    _ => grid.is_lowsig(c),
                };
                out.push(if on { 1.0 } else { 0.0 });
            }
        }
    }
}

/// `[o(agent), o(1 - agent)]`, the input the shared Q-network sees for `agent`.
pub fn joint_state(world: &World, agent: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * world.config().observation_len());
    observe_into(world, agent, &mut v);
    observe_into(world, 1 - agent, &mut v);
    v
}

/// Feature groups withheld at evaluation time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AblationMask {
    pub zero_lowsig_view: bool,
    pub zero_wind_view: bool,
    pub zero_battery: bool,
    pub zero_weights: bool,
    pub zero_timers: bool,
}

impl AblationMask {
    pub const NONE: AblationMask = AblationMask {
        zero_lowsig_view: false,
        zero_wind_view: false,
        zero_battery: false,
        zero_weights: false,
        zero_timers: false,
    };

    pub fn is_identity(&self) -> bool {
        *self == AblationMask::NONE
    }

    /// Parses a comma list of `lowsig`, `wind`, `battery`, `weights`, `timers`
    /// (or `none`).
    pub fn parse(s: &str) -> Result<AblationMask, String> {
        let mut m = AblationMask::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "none" => {}
                "lowsig" | "network" => m.zero_lowsig_view = true,
                "wind" => m.zero_wind_view = true,
                "battery" => m.zero_battery = true,
                "weights" => m.zero_weights = true,
                "timers" => m.zero_timers = true,
                other => return Err(format!("unknown mask group `{other}`")),
            }
        }
        Ok(m)
    }
}

/// Zeroes masked feature groups of a single observation in place.
pub fn apply_mask(obs: &mut [f64], mask: &AblationMask, max_patients: usize) {
    if mask.zero_lowsig_view {
        obs[lowsig_view(max_patients)].fill(0.0);
    }
    if mask.zero_wind_view {
        obs[wind_view(max_patients)].fill(0.0);
    }
    if mask.zero_battery {
        obs[BATTERY_INDEX] = 0.0;
    }
    for slot in 0..max_patients {
        if mask.zero_weights {
            obs[weight_index(slot)] = 0.0;
        }
        if mask.zero_timers {
            obs[timer_index(slot)] = 0.0;
        }
    }
}

/// Applies the mask to both halves of a joint state.
pub fn apply_mask_joint(joint: &mut [f64], mask: &AblationMask, max_patients: usize) {
    let n = observation_len(max_patients);
    let (a, b) = joint.split_at_mut(n);
    apply_mask(a, mask, max_patients);
    apply_mask(b, mask, max_patients);
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::config::{GridSize, SimConfig};
    use crate::world::Action;

    fn world(seed: u64) -> World {
        World::new(&SimConfig::default(), seed).unwrap()
    }

    #[test]
    fn lengths_at_full_scale() {
        assert_eq!(observation_len(8), 140);
        assert_eq!(joint_len(8), 280);
        let w = world(1);
        assert_eq!(observe(&w, 0).len(), 140);
        assert_eq!(joint_state(&w, 1).len(), 280);
    }

    #[test]
    fn frozen_index_map() {
        assert_eq!(patient_slot(0), 9);
        assert_eq!(timer_index(0), 13);
        assert_eq!(weight_index(0), 15);
        assert_eq!(weight_index(7), 64);
        assert_eq!(obstacle_view(8), 65..90);
        assert_eq!(wind_view(8), 90..115);
        assert_eq!(lowsig_view(8), 115..140);
    }

    #[test]
    fn unspawned_slots_are_zero() {
        let w = world(2);
        let o = observe(&w, 0);
        assert_eq!(w.patients().len(), 4);
        assert!(o[patient_slot(4)..patient_slot(8)].iter().all(|&v| v == 0.0));
        assert!(o[patient_slot(0)..patient_slot(4)].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn corner_view_pads_with_obstacles() {
        let mut cfg = SimConfig::default();
        cfg.world.grid = GridSize { width: 10, height: 10 };
        cfg.world.obstacles = 0;
        cfg.hazards.wind_zones = 0;
        cfg.hazards.lowsig_zones = 0;
        let w = World::new(&cfg, 0).unwrap();
        let o = observe(&w, 0);
        let view = &o[obstacle_view(8)];
        for (i, &v) in view.iter().enumerate() {
            let (dx, dy) = (i as i32 % 5 - 2, i as i32 / 5 - 2);
            let expect = if dx < 0 || dy < 0 { 1.0 } else { 0.0 };
            assert_eq!(v, expect, "cell {dx},{dy}");
        }
    }

    #[test]
    fn joint_state_block_order() {
        let w = world(3);
        let j0 = joint_state(&w, 0);
        let j1 = joint_state(&w, 1);
        assert_eq!(&j0[..140], observe(&w, 0).as_slice());
        assert_eq!(&j0[..140], &j1[140..]);
        assert_eq!(&j0[140..], &j1[..140]);
    }

    #[test]
    fn mask_counts() {
        let w = world(4);
        let o = observe(&w, 0);
        let mut m = o.clone();
        apply_mask(&mut m, &AblationMask { zero_battery: true, ..AblationMask::NONE }, 8);
        assert_eq!(o.iter().zip(&m).filter(|(a, b)| a != b).count(), 1);

        let mut m = vec![1.0; 140];
        apply_mask(&mut m, &AblationMask { zero_weights: true, ..AblationMask::NONE }, 8);
        assert_eq!(m.iter().filter(|&&v| v == 0.0).count(), 8);

        let mut m = o.clone();
        apply_mask(&mut m, &AblationMask::NONE, 8);
        assert_eq!(m, o);
    }

    #[test]
    fn mask_parse() {
        let m = AblationMask::parse("battery,timers").unwrap();
        assert!(m.zero_battery && m.zero_timers && !m.zero_weights);
        assert!(AblationMask::parse("none").unwrap().is_identity());
        assert!(AblationMask::parse("gps").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn observations_bounded_pure_and_mask_idempotent(seed in any::<u64>(), steps in 0usize..120,
                                                       bits in 0u8..32) {
            let mut w = world(seed);
            for k in 0..steps {
                if w.is_terminal() { break; }
                w.step([Action::ALL[k % 4], Action::ALL[(k / 3) % 4]]).unwrap();
            }
            for agent in 0..2 {
                let o = observe(&w, agent);
                prop_assert_eq!(&o, &observe(&w, agent));
                prop_assert!(o.iter().all(|v| (-1.0..=1.0).contains(v)));
                let mask = AblationMask {
                    zero_lowsig_view: bits & 1 != 0,
                    zero_wind_view: bits & 2 != 0,
                    zero_battery: bits & 4 != 0,
                    zero_weights: bits & 8 != 0,
                    zero_timers: bits & 16 != 0,
                };
                let mut once = o.clone();
                apply_mask(&mut once, &mask, 8);
                let mut twice = once.clone();
                apply_mask(&mut twice, &mask, 8);
                prop_assert_eq!(once.len(), o.len());
                prop_assert_eq!(once, twice);
            }
        }
    }
}
