use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// One entry per objective.
    pub reward: Vec<f64>,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// A minibatch laid out row-per-transition.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array2<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

/// Fixed-capacity FIFO ring of transitions with vector rewards.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    reward_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<f64>,
    cursor: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize, reward_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            reward_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
            len: 0,
        })
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

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn reward_dim(&self) -> usize {
        self.reward_dim
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        check_len(self.state_dim, t.state.len())?;
        check_len(self.state_dim, t.next_state.len())?;
        check_len(self.action_dim, t.action.len())?;
        check_len(self.reward_dim, t.reward.len())?;
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.extend_from_slice(&t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.dones.push(if t.done { 1.0 } else { 0.0 });
            self.len += 1;
        } else {
            let i = self.cursor;
            write_row(&mut self.states, i, &t.state);
            write_row(&mut self.actions, i, &t.action);
            write_row(&mut self.rewards, i, &t.reward);
            write_row(&mut self.next_states, i, &t.next_state);
            self.dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    pub fn extend<'a, I: IntoIterator<Item = &'a Transition>>(&mut self, transitions: I) -> Result<()> {
        transitions.into_iter().try_for_each(|t| self.push(t))
    }

    /// The `i`-th stored transition, oldest first.
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len {
            return None;
        }
        let p = if self.len < self.capacity { i } else { (self.cursor + i) % self.capacity };
        Some(Transition {
            state: row(&self.states, p, self.state_dim).to_vec(),
            action: row(&self.actions, p, self.action_dim).to_vec(),
            reward: row(&self.rewards, p, self.reward_dim).to_vec(),
            next_state: row(&self.next_states, p, self.state_dim).to_vec(),
            done: self.dones[p] != 0.0,
        })
    }

    /// Physical slot indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 || self.len < batch {
            return Err(Error::InsufficientData {
                needed: batch.max(1),
                available: self.len,
            });
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(batch, rng)?;
        let gather = |src: &[f64], dim: usize| {
            Array2::from_shape_fn((batch, dim), |(r, c)| src[idx[r] * dim + c])
        };
        Ok(Batch {
            states: gather(&self.states, self.state_dim),
            actions: gather(&self.actions, self.action_dim),
            rewards: gather(&self.rewards, self.reward_dim),
            next_states: gather(&self.next_states, self.state_dim),
            dones: idx.iter().map(|&i| self.dones[i]).collect(),
        })
    }
}

fn row(v: &[f64], i: usize, dim: usize) -> &[f64] {
    &v[i * dim..(i + 1) * dim]
}

fn write_row(v: &mut [f64], i: usize, data: &[f64]) {
    let dim = data.len();
    v[i * dim..(i + 1) * dim].copy_from_slice(data);
}
