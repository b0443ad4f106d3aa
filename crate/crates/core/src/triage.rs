//! Patient pool: spawning, logistic survival profiles, weight escalation and timers.

use rand::Rng;

use crate::config::{TriageConfig, UniformRange};
use crate::world::Cell;

/// Clinical urgency class; the discriminant doubles as the priority weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TriageLevel {
    Stable = 1,
    Urgent = 2,
    Critical = 3,
}

impl TriageLevel {
    pub const ALL: [TriageLevel; 3] = [TriageLevel::Stable, TriageLevel::Urgent, TriageLevel::Critical];

    pub fn weight(self) -> u8 {
        self as u8
    }

    pub fn from_weight(w: u8) -> Option<TriageLevel> {
        match w {
            1 => Some(TriageLevel::Stable),
            2 => Some(TriageLevel::Urgent),
            3 => Some(TriageLevel::Critical),
            _ => None,
        }
    }
}

/// Highest weight in use; observations divide by it.
pub const MAX_WEIGHT: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Active,
    Delivered,
    Expired,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patient {
    pub id: usize,
    pub loc: Cell,
    pub spawn_level: TriageLevel,
    pub a: f64,
    pub b: f64,
    pub theta_serious: f64,
    pub theta_critical: f64,
    pub spawn_time: u32,
    pub timer_remaining: u32,
    pub delivered: bool,
    pub expired: bool,
}

impl Patient {
    pub fn is_active(&self) -> bool {
        !self.delivered && !self.expired
    }

    pub fn fate(&self) -> Fate {
        match (self.delivered, self.expired) {
            (true, _) => Fate::Delivered,
            (_, true) => Fate::Expired,
            _ => Fate::Active,
        }
    }

    pub fn elapsed(&self, clock: u32) -> u32 {
        clock.saturating_sub(self.spawn_time)
    }

    pub fn survival_at(&self, clock: u32) -> f64 {
        survival(self.a, self.b, self.elapsed(clock) as f64)
    }

    pub fn weight_at(&self, clock: u32) -> u8 {
        current_weight(self, self.elapsed(clock))
    }
}

/// Logistic survival probability `1 / (1 + exp(a*t - b))`.
pub fn survival(a: f64, b: f64, t_elapsed: f64) -> f64 {
    1.0 / (1.0 + (a * t_elapsed - b).exp())
}

/// Threshold mapping from survival probability to weight, without any floor.
pub fn escalation_weight(survival: f64, theta_serious: f64, theta_critical: f64) -> u8 {
    if survival < theta_critical {
        3
    } else if survival < theta_serious {
        2
    } else {
        1
    }
}

/// Escalated weight, floored at the spawn level so it never drops below it.
pub fn current_weight(patient: &Patient, t_elapsed: u32) -> u8 {
    let s = survival(patient.a, patient.b, t_elapsed as f64);
    escalation_weight(s, patient.theta_serious, patient.theta_critical).max(patient.spawn_level.weight())
}

fn sample(rng: &mut impl Rng, r: UniformRange) -> f64 {
    if r.lo == r.hi {
        r.lo
    } else {
        rng.gen_range(r.lo..=r.hi)
    }
}

/// Samples a new patient on one of `free_cells`; `None` when there is nowhere to put it.
pub fn spawn_patient(
    rng: &mut impl Rng,
    cfg: &TriageConfig,
    free_cells: &[Cell],
    clock: u32,
    id: usize,
) -> Option<Patient> {
    if free_cells.is_empty() {
        log::debug!("spawn skipped at clock {clock}: no free cell");
        return None;
    }
    let loc = free_cells[rng.gen_range(0..free_cells.len())];
    let level = TriageLevel::ALL[rng.gen_range(0..3)];
    let (ar, br) = match level {
        TriageLevel::Stable => (cfg.stable_a, cfg.stable_b),
        TriageLevel::Urgent => (cfg.urgent_a, cfg.urgent_b),
        TriageLevel::Critical => (cfg.critical_a, cfg.critical_b),
    };
    let a = sample(rng, ar);
    let b = sample(rng, br);
    let (theta_serious, theta_critical) = loop {
        let s = sample(rng, cfg.theta_serious);
        let c = sample(rng, cfg.theta_critical);
        if c < s - cfg.theta_margin {
            break (s, c);
        }
    };
    Some(Patient {
        id,
        loc,
        spawn_level: level,
        a,
        b,
        theta_serious,
        theta_critical,
        spawn_time: clock,
        timer_remaining: cfg.t_max,
        delivered: false,
        expired: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expiry {
    pub patient: usize,
    pub weight: u8,
}

/// Advances every active timer by one step. `clock` is the time after the tick.
pub fn tick_all(pool: &mut [Patient], clock: u32) -> Vec<Expiry> {
    let mut out = Vec::new();
    for p in pool.iter_mut().filter(|p| p.is_active()) {
        p.timer_remaining = p.timer_remaining.saturating_sub(1);
        if p.timer_remaining == 0 {
            p.expired = true;
            out.push(Expiry { patient: p.id, weight: p.weight_at(clock) });
        }
    }
    out
}

/// Initial patient count plus one spawn every `interval` steps until `max_patients`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpawnSchedule {
    pub n_init: usize,
    pub interval: u32,
    pub max_patients: usize,
}

impl SpawnSchedule {
    pub fn from_config(cfg: &TriageConfig) -> Self {
        SpawnSchedule { n_init: cfg.n_init, interval: cfg.spawn_interval, max_patients: cfg.max_patients }
    }

    /// Whether a new patient is due at `clock` given `spawned` so far.
    pub fn due(&self, clock: u32, spawned: usize) -> bool {
        clock > 0 && clock.is_multiple_of(self.interval) && spawned < self.max_patients
    }

    /// Whether any further spawn can still happen after `clock`.
    pub fn pending(&self, spawned: usize) -> bool {
        spawned < self.max_patients
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn patient(level: TriageLevel, a: f64, b: f64, ts: f64, tc: f64) -> Patient {
        Patient {
            id: 0,
            loc: Cell::new(0, 0),
            spawn_level: level,
            a,
            b,
            theta_serious: ts,
            theta_critical: tc,
            spawn_time: 0,
            timer_remaining: 250,
            delivered: false,
            expired: false,
        }
    }

    #[test]
    fn survival_values() {
        assert_eq!(survival(0.1, 2.0, 20.0), 0.5);
        // 1/(1+e^-3) and 1/(1+e^5) evaluated independently.
        assert!((survival(0.1, 3.0, 0.0) - 0.952_574_126_822_433_4).abs() < 1e-12);
        assert!((survival(0.2, 1.0, 30.0) - 0.006_692_850_924_284_856).abs() < 1e-12);
    }

    #[test]
    fn escalation_cases() {
        assert_eq!(escalation_weight(0.80, 0.50, 0.20), 1);
        assert_eq!(escalation_weight(0.35, 0.50, 0.20), 2);
        assert_eq!(escalation_weight(0.10, 0.50, 0.20), 3);
        assert_eq!(escalation_weight(0.20, 0.50, 0.20), 2);
        assert_eq!(escalation_weight(0.50, 0.50, 0.20), 1);
    }

    #[test]
    fn weight_floor_is_spawn_level() {
        let p = patient(TriageLevel::Critical, 0.1, 2.5, 0.5, 0.2);
        assert!(p.survival_at(0) > 0.5);
        assert_eq!(p.weight_at(0), 3);
        let p = patient(TriageLevel::Stable, 0.1, 2.5, 0.5, 0.2);
        assert_eq!(p.weight_at(0), 1);
        assert_eq!(p.weight_at(100), 3);
    }

    #[test]
    fn critical_draw_uses_critical_range() {
        let cfg = TriageConfig::default();
        let cells = [Cell::new(1, 1), Cell::new(2, 2)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = 0;
        for id in 0..300 {
            let p = spawn_patient(&mut rng, &cfg, &cells, 0, id).unwrap();
            if p.spawn_level == TriageLevel::Critical {
                seen += 1;
                assert!((0.10..=0.20).contains(&p.a));
                assert!((1.0..=2.5).contains(&p.b));
            }
            assert!(p.theta_critical < p.theta_serious - 0.05);
            assert_eq!(p.timer_remaining, 250);
        }
        assert!(seen > 50);
    }

    #[test]
    fn spawn_is_deterministic() {
        let cfg = TriageConfig::default();
        let cells: Vec<Cell> = (0..10).map(|i| Cell::new(i, 0)).collect();
        let a = spawn_patient(&mut ChaCha8Rng::seed_from_u64(9), &cfg, &cells, 5, 1);
        let b = spawn_patient(&mut ChaCha8Rng::seed_from_u64(9), &cfg, &cells, 5, 1);
        assert_eq!(a, b);
        assert!(spawn_patient(&mut ChaCha8Rng::seed_from_u64(9), &cfg, &[], 5, 1).is_none());
    }

    #[test]
    fn tick_boundaries() {
        let mut pool = vec![patient(TriageLevel::Urgent, 0.05, 2.0, 0.5, 0.2)];
        pool[0].timer_remaining = 1;
        let ev = tick_all(&mut pool, 1);
        assert_eq!(ev.len(), 1);
        assert!(pool[0].expired);

        let mut pool = vec![patient(TriageLevel::Urgent, 0.05, 2.0, 0.5, 0.2)];
        pool[0].delivered = true;
        pool[0].timer_remaining = 17;
        assert!(tick_all(&mut pool, 1).is_empty());
        assert_eq!(pool[0].timer_remaining, 17);
    }

    #[test]
    fn expires_exactly_at_t_max() {
        let mut pool = vec![patient(TriageLevel::Stable, 0.02, 4.0, 0.5, 0.2)];
        for clock in 1..250 {
            assert!(tick_all(&mut pool, clock).is_empty(), "early expiry at {clock}");
        }
        let ev = tick_all(&mut pool, 250);
        assert_eq!(ev.len(), 1);
        assert_eq!(pool[0].fate(), Fate::Expired);
    }

    #[test]
    fn spawn_schedule_arithmetic() {
        let s = SpawnSchedule { n_init: 4, interval: 75, max_patients: 8 };
        let mut spawned = 4;
        let mut at = Vec::new();
        for clock in 1..=800 {
            if s.due(clock, spawned) {
                at.push(clock);
                spawned += 1;
            }
        }
        assert_eq!(at, vec![75, 150, 225, 300]);
    }

    proptest! {
        #[test]
        fn survival_strictly_decreasing(a in 0.01f64..0.4, b in 0.5f64..5.0, t in 0u32..799) {
            let s1 = survival(a, b, t as f64);
            let s2 = survival(a, b, (t + 1) as f64);
            prop_assert!(s1 > s2);
            prop_assert!(s1 > 0.0 && s1 < 1.0);
        }

        #[test]
        fn weight_never_decreases(seed in any::<u64>()) {
            let cfg = TriageConfig::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = spawn_patient(&mut rng, &cfg, &[Cell::new(0, 0)], 0, 0).unwrap();
            let mut prev = 0;
            for t in 0..=cfg.t_max {
                let w = current_weight(&p, t);
                prop_assert!(w >= prev);
                prop_assert!(w >= p.spawn_level.weight());
                prev = w;
            }
        }
    }
}
