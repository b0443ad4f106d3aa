use super::runner::{EpisodeRecord, PatientFate};
use crate::world::Event;

/// Delivered over spawned; `None` when nothing spawned.
pub fn utilization(r: &EpisodeRecord) -> Option<f64> {
    let n = r.patients.len();
    (n > 0).then(|| r.delivered() as f64 / n as f64)
}

/// Terminal-weight mass delivered over terminal-weight mass spawned.
pub fn triage_efficiency(r: &EpisodeRecord) -> Option<f64> {
    let total: u32 = r.patients.iter().map(|p| p.terminal_weight as u32).sum();
    let delivered: u32 =
        r.patients.iter().filter(|p| p.fate == PatientFate::Delivered).map(|p| p.terminal_weight as u32).sum();
    (!r.patients.is_empty() && total > 0).then(|| delivered as f64 / total as f64)
}

/// `(U, eta)` recomputed from the raw event log alone.
pub fn oracle_from_events(events: &[(u32, Event)]) -> (Option<f64>, Option<f64>) {
    let mut spawned = 0usize;
    let mut delivered = 0usize;
    let mut w_delivered = 0u32;
    let mut w_total = 0u32;
    for (_, e) in events {
        match *e {
            Event::PatientSpawned { .. } => spawned += 1,
            Event::Delivered { weight, .. } => {
                delivered += 1;
                w_delivered += weight as u32;
                w_total += weight as u32;
            }
            Event::PatientExpired { weight, .. } | Event::Unresolved { weight, .. } => w_total += weight as u32,
            _ => {}
        }
    }
    if spawned == 0 {
        return (None, None);
    }
    (Some(delivered as f64 / spawned as f64), (w_total > 0).then(|| w_delivered as f64 / w_total as f64))
}

/// `(sum x)^2 / (n * sum x^2)`; `None` for an empty or all-zero input.
pub fn jain_index(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    let s: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|x| x * x).sum();
    (!values.is_empty() && sq > 0.0).then(|| s * s / (n * sq))
}

/// Per-class means over episodes. Index 0 is Stable (weight 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub episodes: usize,
    pub delivered: [f64; 3],
    pub expired: [f64; 3],
    pub unresolved: [f64; 3],
    pub spawned: [f64; 3],
    /// Deliveries at terminal class over spawns at that class; can exceed 1
    /// because escalation moves patients up between spawn and delivery.
    pub delivery_rate: [Option<f64>; 3],
    /// Expiries at terminal class over spawns at that class.
    pub unserved_rate: [Option<f64>; 3],
}

pub fn per_class_stats(records: &[EpisodeRecord]) -> ClassStats {
    let mut d = [0usize; 3];
    let mut x = [0usize; 3];
    let mut u = [0usize; 3];
    let mut s = [0usize; 3];
    for r in records {
        for p in &r.patients {
            s[p.spawn_weight as usize - 1] += 1;
            let c = p.terminal_weight as usize - 1;
            match p.fate {
                PatientFate::Delivered => d[c] += 1,
                PatientFate::Expired => x[c] += 1,
                PatientFate::Unresolved => u[c] += 1,
            }
        }
    }
    let n = records.len().max(1) as f64;
    let mean = |a: [usize; 3]| a.map(|v| v as f64 / n);
    let rate = |a: [usize; 3]| std::array::from_fn(|c| (s[c] > 0).then(|| a[c] as f64 / s[c] as f64));
    ClassStats {
        episodes: records.len(),
        delivered: mean(d),
        expired: mean(x),
        unresolved: mean(u),
        spawned: mean(s),
        delivery_rate: rate(d),
        unserved_rate: rate(x),
    }
}

/// Descriptive summary of a batch of episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub episodes: usize,
    pub mean_u: f64,
    pub mean_eta: f64,
    pub both_landed_rate: f64,
    pub mean_deliveries: f64,
    pub mean_expiries: f64,
    pub mean_end_battery: f64,
    pub mean_w3_expiries: f64,
    pub mean_reward: f64,
    pub mean_collisions: f64,
    /// Jain index over per-class delivery rates.
    pub class_fairness: Option<f64>,
}

fn mean_of(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn summarize(records: &[EpisodeRecord]) -> Summary {
    let classes = per_class_stats(records);
    let rates: Vec<f64> = classes.delivery_rate.iter().flatten().copied().collect();
    Summary {
        episodes: records.len(),
        mean_u: mean_of(records.iter().filter_map(utilization)),
        mean_eta: mean_of(records.iter().filter_map(triage_efficiency)),
        both_landed_rate: mean_of(records.iter().map(|r| r.both_landed() as u8 as f64)),
        mean_deliveries: mean_of(records.iter().map(|r| r.delivered() as f64)),
        mean_expiries: mean_of(records.iter().map(|r| r.expired() as f64)),
        mean_end_battery: mean_of(records.iter().map(EpisodeRecord::mean_battery)),
        mean_w3_expiries: mean_of(records.iter().map(|r| r.count(PatientFate::Expired, 3) as f64)),
        mean_reward: mean_of(records.iter().map(|r| r.rewards[0] + r.rewards[1])),
        mean_collisions: mean_of(records.iter().map(|r| (r.collisions[0] + r.collisions[1]) as f64)),
        class_fairness: jain_index(&rates),
    }
}
