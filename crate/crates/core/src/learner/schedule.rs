/// Multiplicative epsilon decay from `start` to `min` over the first
/// `fraction` of episodes, flat at `min` afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub min: f64,
    decay_episodes: usize,
}

impl EpsilonSchedule {
    pub fn new(start: f64, min: f64, fraction: f64, episodes: usize) -> Self {
        let decay_episodes = ((fraction * episodes as f64).floor() as usize).max(1);
        EpsilonSchedule { start, min, decay_episodes }
    }

    pub fn decay_episodes(&self) -> usize {
        self.decay_episodes
    }

    pub fn value(&self, episode: usize) -> f64 {
        if episode >= self.decay_episodes || self.start <= self.min {
            return self.min;
        }
        if self.min <= 0.0 {
            // geometric decay cannot reach zero; fall back to linear
            let f = episode as f64 / self.decay_episodes as f64;
            return self.start * (1.0 - f);
        }
        let f = episode as f64 / self.decay_episodes as f64;
        (self.start * (self.min / self.start).powf(f)).max(self.min)
    }
}
