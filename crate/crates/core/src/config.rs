//! Run configuration: a line-oriented `section.key = value` format.
//!
//! Every tunable of the simulator, reward model, learner and evaluator has a
//! key. Unspecified keys keep their defaults; unknown keys are rejected. The
//! echo produced by [`RunConfig::echo`] parses back to an identical config.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::world::Cell;

/// Closed interval used for uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        UniformRange { lo, hi }
    }

    pub fn scaled(self, factor: f64) -> Self {
        UniformRange::new(self.lo * factor, self.hi * factor)
    }

    pub fn contains(self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub grid: GridSize,
    pub obstacles: usize,
    /// When set, the obstacle layout comes from this seed instead of the episode seed.
    pub map_seed: Option<u64>,
    pub start0: Option<Cell>,
    pub start1: Option<Cell>,
    pub landing0: Option<Cell>,
    pub landing1: Option<Cell>,
    pub max_steps: u32,
    pub battery_capacity: f64,
    pub drain_base: f64,
    pub drain_wind: f64,
    pub battery_low: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            grid: GridSize { width: 50, height: 50 },
            obstacles: 200,
            map_seed: None,
            start0: None,
            start1: None,
            landing0: None,
            landing1: None,
            max_steps: 800,
            battery_capacity: 100.0,
            drain_base: 0.1,
            drain_wind: 0.3,
            battery_low: 20.0,
        }
    }
}

impl WorldConfig {
    pub fn start_cells(&self) -> [Cell; 2] {
        let (w, h) = (self.grid.width as i32, self.grid.height as i32);
        [self.start0.unwrap_or(Cell::new(0, 0)), self.start1.unwrap_or(Cell::new(w - 1, h - 1))]
    }

    /// Landing zones default to the start cells.
    pub fn landing_zones(&self) -> [Cell; 2] {
        let s = self.start_cells();
        [self.landing0.unwrap_or(s[0]), self.landing1.unwrap_or(s[1])]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardConfig {
    pub wind_zones: usize,
    pub lowsig_zones: usize,
    pub zone_length: usize,
    pub refresh_interval: u32,
    pub wind_fail_prob: f64,
    pub lowsig_fail_prob: f64,
}

impl Default for HazardConfig {
    fn default() -> Self {
        HazardConfig {
            wind_zones: 2,
            lowsig_zones: 2,
            zone_length: 6,
            refresh_interval: 30,
            wind_fail_prob: 0.3,
            lowsig_fail_prob: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriageConfig {
    pub max_patients: usize,
    pub n_init: usize,
    pub spawn_interval: u32,
    pub t_max: u32,
    pub stable_a: UniformRange,
    pub stable_b: UniformRange,
    pub urgent_a: UniformRange,
    pub urgent_b: UniformRange,
    pub critical_a: UniformRange,
    pub critical_b: UniformRange,
    pub theta_serious: UniformRange,
    pub theta_critical: UniformRange,
    pub theta_margin: f64,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            max_patients: 8,
            n_init: 4,
            spawn_interval: 75,
            t_max: 250,
            stable_a: UniformRange::new(0.02, 0.05),
            stable_b: UniformRange::new(3.0, 5.0),
            urgent_a: UniformRange::new(0.05, 0.10),
            urgent_b: UniformRange::new(2.0, 3.5),
            critical_a: UniformRange::new(0.10, 0.20),
            critical_b: UniformRange::new(1.0, 2.5),
            theta_serious: UniformRange::new(0.40, 0.70),
            theta_critical: UniformRange::new(0.10, 0.30),
            theta_margin: 0.05,
        }
    }
}

impl TriageConfig {
    /// Multiplies every decay-steepness range.
    pub fn scale_decay(&mut self, factor: f64) {
        self.stable_a = self.stable_a.scaled(factor);
        self.urgent_a = self.urgent_a.scaled(factor);
        self.critical_a = self.critical_a.scaled(factor);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub delta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub gamma_w: f64,
    pub gamma_s: f64,
    pub gamma_b: f64,
    pub closeness: f64,
    pub r_close: u32,
    pub delta_max: f64,
    pub r_goal: f64,
    pub r_crash: f64,
    pub r_bat: f64,
    pub r_land: f64,
    pub p_death: f64,
    pub invalid_land_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            delta: 0.1,
            beta: 0.05,
            lambda: 0.5,
            gamma_w: 0.5,
            gamma_s: 0.5,
            gamma_b: 0.3,
            closeness: 0.5,
            r_close: 4,
            delta_max: 2.0,
            r_goal: 100.0,
            r_crash: 50.0,
            r_bat: 50.0,
            r_land: 50.0,
            p_death: 100.0,
            invalid_land_penalty: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub lr: f64,
    pub target_update: usize,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay_fraction: f64,
    pub checkpoint_interval: usize,
    /// Environment steps between gradient updates once the buffer is warm.
    pub train_every: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            episodes: 12_000,
            hidden: vec![256, 256, 128],
            buffer_capacity: 50_000,
            batch_size: 128,
            gamma: 0.99,
            lr: 1e-4,
            target_update: 10,
            epsilon_start: 1.0,
            epsilon_min: 0.05,
            epsilon_decay_fraction: 0.95,
            checkpoint_interval: 1_000,
            train_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub reserve_factor: f64,
    /// `None` means two base drain steps.
    pub safety_margin: Option<f64>,
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { episodes: 200, alpha: 0.5, reserve_factor: 1.5, safety_margin: None, workers: 1 }
    }
}

/// Everything the simulator itself needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub hazards: HazardConfig,
    pub triage: TriageConfig,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub reward: RewardConfig,
    pub learner: LearnerConfig,
    pub eval: EvalConfig,
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse::<$t>().map_err(|e| format!("expected {}: {e}", stringify!($t)))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(usize, u32, u64, f64);

impl ConfigValue for UniformRange {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
        let lo = f64::parse_value(lo.trim())?;
        let hi = f64::parse_value(hi.trim())?;
        Ok(UniformRange::new(lo, hi))
    }
    fn render(&self) -> String {
        format!("{},{}", self.lo, self.hi)
    }
}

impl ConfigValue for GridSize {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let (w, h) = s.split_once('x').ok_or("expected `WIDTHxHEIGHT`")?;
        Ok(GridSize { width: usize::parse_value(w.trim())?, height: usize::parse_value(h.trim())? })
    }
    fn render(&self) -> String {
        format!("{}x{}", self.width, self.height)
    }
}

impl ConfigValue for Option<Cell> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(None);
        }
        let (x, y) = s.split_once(',').ok_or("expected `x,y` or `auto`")?;
        let x = x.trim().parse::<i32>().map_err(|e| format!("bad x: {e}"))?;
        let y = y.trim().parse::<i32>().map_err(|e| format!("bad y: {e}"))?;
        Ok(Some(Cell::new(x, y)))
    }
    fn render(&self) -> String {
        match self {
            Some(c) => c.to_string(),
            None => "auto".into(),
        }
    }
}

impl ConfigValue for Option<u64> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s == "none" {
            Ok(None)
        } else {
            u64::parse_value(s).map(Some)
        }
    }
    fn render(&self) -> String {
        self.map_or_else(|| "none".into(), |v| v.to_string())
    }
}

impl ConfigValue for Option<f64> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            Ok(None)
        } else {
            f64::parse_value(s).map(Some)
        }
    }
    fn render(&self) -> String {
        self.map_or_else(|| "auto".into(), |v| v.to_string())
    }
}

impl ConfigValue for Vec<usize> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.split(',').map(|p| usize::parse_value(p.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

macro_rules! section_keys {
    (set $target:expr, $key:expr, $value:expr, $($field:ident),*) => {
        match $key {
            $(stringify!($field) => Some(ConfigValue::parse_value($value).map(|v| $target.$field = v)),)*
            _ => None,
        }
    };
    (entries $out:expr, $section:literal, $target:expr, $($field:ident),*) => {
        $(
            $out.push((
                concat!($section, ".", stringify!($field)).to_string(),
                ConfigValue::render(&$target.$field),
            ));
        )*
    };
}

macro_rules! config_keys {
    ($( $section:literal => $($path:ident).+ { $($key:ident),* $(,)? } )*) => {
        impl RunConfig {
            /// Sets one `section.key` entry from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
                $(
                    if let Some(field) = key.strip_prefix(concat!($section, ".")) {
                        if let Some(r) = section_keys!(set self.$($path).+, field, value, $($key),*) {
                            return r;
                        }
                    }
                )*
                Err(format!("unknown key `{key}`"))
            }

            /// All keys with their current values, in canonical order.
            #[allow(clippy::vec_init_then_push)]
            pub fn entries(&self) -> Vec<(String, String)> {
                let mut out = Vec::new();
                $(
                    section_keys!(entries out, $section, self.$($path).+, $($key),*);
                )*
                out
            }
        }
    };
}

config_keys! {
    "world" => sim.world {
        grid, obstacles, map_seed, start0, start1, landing0, landing1, max_steps,
        battery_capacity, drain_base, drain_wind, battery_low,
    }
    "hazards" => sim.hazards {
        wind_zones, lowsig_zones, zone_length, refresh_interval, wind_fail_prob, lowsig_fail_prob,
    }
    "triage" => sim.triage {
        max_patients, n_init, spawn_interval, t_max, stable_a, stable_b, urgent_a, urgent_b,
        critical_a, critical_b, theta_serious, theta_critical, theta_margin,
    }
    "reward" => reward {
        delta, beta, lambda, gamma_w, gamma_s, gamma_b, closeness, r_close, delta_max,
        r_goal, r_crash, r_bat, r_land, p_death, invalid_land_penalty,
    }
    "learner" => learner {
        episodes, hidden, buffer_capacity, batch_size, gamma, lr, target_update,
        epsilon_start, epsilon_min, epsilon_decay_fraction, checkpoint_interval, train_every,
    }
    "eval" => eval {
        episodes, alpha, reserve_factor, safety_margin, workers,
    }
}

impl RunConfig {
    /// Strict parse; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::ConfigLine { line: i + 1, msg };
            let (key, value) =
                line.split_once('=').ok_or_else(|| err(format!("expected `section.key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim()).map_err(|m| err(format!("{}: {m}", key.trim())))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::ConfigLine { line, msg } => Error::Config(format!("{}:{line}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn safety_margin(&self) -> f64 {
        self.eval.safety_margin.unwrap_or(2.0 * self.sim.world.drain_base)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let r = &self.reward;
        let nonneg = [
            ("reward.delta", r.delta),
            ("reward.beta", r.beta),
            ("reward.lambda", r.lambda),
            ("reward.gamma_w", r.gamma_w),
            ("reward.gamma_s", r.gamma_s),
            ("reward.gamma_b", r.gamma_b),
            ("reward.closeness", r.closeness),
            ("reward.r_goal", r.r_goal),
            ("reward.r_crash", r.r_crash),
            ("reward.r_bat", r.r_bat),
            ("reward.r_land", r.r_land),
            ("reward.p_death", r.p_death),
            ("reward.invalid_land_penalty", r.invalid_land_penalty),
        ];
        for (k, v) in nonneg {
            check(v >= 0.0 && v.is_finite(), || format!("{k} must be a finite value >= 0"))?;
        }
        check(r.delta_max > 0.0, || "reward.delta_max must be > 0".into())?;

        let l = &self.learner;
        check((0.0..=1.0).contains(&l.gamma), || "learner.gamma must lie in [0,1]".into())?;
        check(l.lr > 0.0, || "learner.lr must be > 0".into())?;
        check(!l.hidden.is_empty() && l.hidden.iter().all(|&h| h > 0), || {
            "learner.hidden needs at least one positive width".into()
        })?;
        check(l.batch_size > 0, || "learner.batch_size must be > 0".into())?;
        check(l.buffer_capacity >= l.batch_size, || "learner.buffer_capacity must be >= learner.batch_size".into())?;
        check(l.target_update > 0, || "learner.target_update must be > 0".into())?;
        check(l.train_every > 0, || "learner.train_every must be > 0".into())?;
        check(l.checkpoint_interval > 0, || "learner.checkpoint_interval must be > 0".into())?;
        check(
            (0.0..=1.0).contains(&l.epsilon_min) && (0.0..=1.0).contains(&l.epsilon_start) && l.epsilon_min > 0.0,
            || "learner.epsilon_start/epsilon_min must lie in (0,1]".into(),
        )?;
        check(l.epsilon_min <= l.epsilon_start, || "learner.epsilon_min exceeds epsilon_start".into())?;
        check(l.epsilon_decay_fraction > 0.0 && l.epsilon_decay_fraction <= 1.0, || {
            "learner.epsilon_decay_fraction must lie in (0,1]".into()
        })?;

        let e = &self.eval;
        check((0.0..=1.0).contains(&e.alpha), || "eval.alpha must lie in [0,1]".into())?;
        check(e.reserve_factor >= 1.0, || "eval.reserve_factor must be >= 1".into())?;
        check(e.safety_margin.is_none_or(|m| m >= 0.0), || "eval.safety_margin must be >= 0".into())?;
        check(e.workers > 0, || "eval.workers must be > 0".into())?;
        Ok(())
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        check(w.grid.width > 0 && w.grid.height > 0, || "world.grid must be non-empty".into())?;
        let in_bounds =
            |c: Cell| c.x >= 0 && c.y >= 0 && (c.x as usize) < w.grid.width && (c.y as usize) < w.grid.height;
        let starts = w.start_cells();
        let zones = w.landing_zones();
        for c in starts.iter().chain(zones.iter()) {
            check(in_bounds(*c), || format!("cell ({c}) lies outside the grid"))?;
        }
        check(starts[0] != starts[1], || "drone start cells must differ".into())?;
        check(zones[0] != zones[1], || "landing zones must differ".into())?;
        check(w.max_steps > 0, || "world.max_steps must be > 0".into())?;
        check(w.battery_capacity > 0.0, || "world.battery_capacity must be > 0".into())?;
        check(w.drain_base >= 0.0 && w.drain_wind >= 0.0, || "drain rates must be >= 0".into())?;

        let h = &self.hazards;
        for (k, p) in [("hazards.wind_fail_prob", h.wind_fail_prob), ("hazards.lowsig_fail_prob", h.lowsig_fail_prob)] {
            check((0.0..=1.0).contains(&p), || format!("{k} must lie in [0,1]"))?;
        }
        check(h.refresh_interval >= 1, || "hazards.refresh_interval must be >= 1".into())?;

        let t = &self.triage;
        check(t.max_patients >= 1, || "triage.max_patients must be >= 1".into())?;
        check(t.n_init <= t.max_patients, || "triage.n_init exceeds triage.max_patients".into())?;
        check(t.spawn_interval >= 1, || "triage.spawn_interval must be >= 1".into())?;
        check(t.t_max >= 1, || "triage.t_max must be >= 1".into())?;
        for (k, r) in [
            ("stable_a", t.stable_a),
            ("urgent_a", t.urgent_a),
            ("critical_a", t.critical_a),
            ("stable_b", t.stable_b),
            ("urgent_b", t.urgent_b),
            ("critical_b", t.critical_b),
        ] {
            check(r.lo > 0.0 && r.lo <= r.hi, || format!("triage.{k} must satisfy 0 < lo <= hi"))?;
        }
        for (k, r) in [("theta_serious", t.theta_serious), ("theta_critical", t.theta_critical)] {
            check(r.lo > 0.0 && r.lo <= r.hi && r.hi < 1.0, || format!("triage.{k} must lie in (0,1)"))?;
        }
        check(t.theta_critical.lo < t.theta_serious.hi - t.theta_margin, || {
            "threshold ranges leave no feasible (serious, critical) pair".into()
        })?;
        Ok(())
    }

    /// Length of one agent's observation vector.
    pub fn observation_len(&self) -> usize {
        crate::sensing::observation_len(self.triage.max_patients)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.learner.gamma, 0.99);
        assert_eq!(cfg.learner.episodes, 12_000);
        assert_eq!(cfg.learner.buffer_capacity, 50_000);
        assert_eq!(cfg.learner.batch_size, 128);
        assert_eq!(cfg.learner.lr, 1e-4);
        assert_eq!(cfg.learner.target_update, 10);
        assert_eq!(cfg.sim.world.max_steps, 800);
        assert_eq!(cfg.sim.triage.t_max, 250);
        assert_eq!(cfg.sim.triage.spawn_interval, 75);
        assert_eq!(cfg.reward.r_close, 4);
        assert_eq!(cfg.eval.alpha, 0.5);
    }

    #[test]
    fn gamma_out_of_range_is_rejected() {
        let err = RunConfig::parse("learner.gamma = 1.5").unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn unknown_key_names_line() {
        let err = RunConfig::parse("# c\nworld.grid = 10x10\nworld.bogus = 3\n").unwrap_err();
        match err {
            Error::ConfigLine { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("bogus"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn type_mismatch_is_rejected() {
        assert!(RunConfig::parse("world.obstacles = many").is_err());
        assert!(RunConfig::parse("world.grid = 50by50").is_err());
        assert!(RunConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn grid_round_trips_through_echo() {
        let cfg = RunConfig::parse("world.grid = 50x50\nworld.start0 = 2,3\nlearner.hidden = 64,32").unwrap();
        let echo = cfg.echo();
        assert!(echo.contains("world.grid = 50x50"));
        let again = RunConfig::parse(&echo).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.echo(), echo);
    }

    #[test]
    fn echo_round_trips_awkward_floats() {
        let mut cfg = RunConfig::default();
        cfg.learner.lr = 0.1 + 0.2;
        cfg.reward.lambda = 1.0 / 3.0;
        let again = RunConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn infeasible_spawn_counts_rejected() {
        assert!(RunConfig::parse("triage.max_patients = 2\ntriage.n_init = 3").is_err());
        assert!(RunConfig::parse("hazards.refresh_interval = 0").is_err());
        assert!(RunConfig::parse("hazards.wind_fail_prob = 1.2").is_err());
    }
}
