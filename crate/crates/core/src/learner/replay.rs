use rand::Rng;

/// One joint transition, both agents' observations in agent order.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: [Vec<f64>; 2],
    pub actions: [usize; 2],
    pub rewards: [f64; 2],
    pub next_obs: [Vec<f64>; 2],
    pub terminal: bool,
}

/// Fixed-capacity FIFO ring of joint transitions stored in one flat array.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_len: usize,
    len: usize,
    head: usize,
    obs: Vec<f64>,
    actions: Vec<[usize; 2]>,
    rewards: Vec<[f64; 2]>,
    terminal: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_len: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            obs_len,
            len: 0,
            head: 0,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminal: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    pub fn push(&mut self, t: &Transition) {
        let l = self.obs_len;
        for o in t.obs.iter().chain(&t.next_obs) {
            assert_eq!(o.len(), l, "observation length mismatch");
        }
        let slot = 4 * l;
        if self.len < self.capacity {
            for o in t.obs.iter().chain(&t.next_obs) {
                self.obs.extend_from_slice(o);
            }
            self.actions.push(t.actions);
            self.rewards.push(t.rewards);
            self.terminal.push(t.terminal);
            self.len += 1;
        } else {
            let base = self.head * slot;
            for (k, o) in t.obs.iter().chain(&t.next_obs).enumerate() {
                self.obs[base + k * l..base + (k + 1) * l].copy_from_slice(o);
            }
            self.actions[self.head] = t.actions;
            self.rewards[self.head] = t.rewards;
            self.terminal[self.head] = t.terminal;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    /// Transition at storage index `i` (not insertion order once wrapped).
    pub fn get(&self, i: usize) -> Transition {
        assert!(i < self.len);
        let l = self.obs_len;
        let block = |k: usize| self.obs[i * 4 * l + k * l..i * 4 * l + (k + 1) * l].to_vec();
        Transition {
            obs: [block(0), block(1)],
            actions: self.actions[i],
            rewards: self.rewards[i],
            next_obs: [block(2), block(3)],
            terminal: self.terminal[i],
        }
    }

    /// Oldest-first view, for tests and inspection.
    pub fn iter_fifo(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.len < self.capacity { 0 } else { self.head };
        (0..self.len).map(move |k| self.get((start + k) % self.capacity))
    }

    /// Uniform indices with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        assert!(self.len > 0, "sampling from an empty buffer");
        (0..batch).map(|_| rng.gen_range(0..self.len)).collect()
    }

    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Batch {
        let idx = self.sample_indices(batch, rng);
        self.gather(&idx)
    }

    /// Builds network-ready rows: for each transition, agent 0 queries
    /// `[o0, o1]` and agent 1 queries `[o1, o0]`.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let l = self.obs_len;
        let mut b = Batch::with_capacity(indices.len(), l);
        for &i in indices {
            let block = |k: usize| &self.obs[i * 4 * l + k * l..i * 4 * l + (k + 1) * l];
            b.push_raw([block(0), block(1)], self.actions[i], self.rewards[i], [block(2), block(3)], self.terminal[i]);
        }
        b
    }
}

/// A minibatch laid out as `2 * size` joint-state rows (agent 0 then agent 1 per transition).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs_len: usize,
    pub states: Vec<f64>,
    pub next_states: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl Batch {
    pub fn with_capacity(size: usize, obs_len: usize) -> Self {
        Batch {
            size: 0,
            obs_len,
            states: Vec::with_capacity(size * 4 * obs_len),
            next_states: Vec::with_capacity(size * 4 * obs_len),
            actions: Vec::with_capacity(2 * size),
            rewards: Vec::with_capacity(2 * size),
            terminal: Vec::with_capacity(size),
        }
    }

    pub fn from_transitions(ts: &[Transition]) -> Self {
        let l = ts.first().map_or(0, |t| t.obs[0].len());
        let mut b = Batch::with_capacity(ts.len(), l);
        for t in ts {
            b.push_raw([&t.obs[0], &t.obs[1]], t.actions, t.rewards, [&t.next_obs[0], &t.next_obs[1]], t.terminal);
        }
        b
    }

    fn push_raw(
        &mut self,
        obs: [&[f64]; 2],
        actions: [usize; 2],
        rewards: [f64; 2],
        next: [&[f64]; 2],
        terminal: bool,
    ) {
        for (o, n) in [(obs, next), ([obs[1], obs[0]], [next[1], next[0]])] {
            self.states.extend_from_slice(o[0]);
            self.states.extend_from_slice(o[1]);
            self.next_states.extend_from_slice(n[0]);
            self.next_states.extend_from_slice(n[1]);
        }
        self.actions.extend_from_slice(&actions);
        self.rewards.extend_from_slice(&rewards);
        self.terminal.push(terminal);
        self.size += 1;
    }

    pub fn rows(&self) -> usize {
        2 * self.size
    }
}
