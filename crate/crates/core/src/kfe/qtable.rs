use rand::Rng;

use super::QConfig;

/// Dense tabular value function over `(state, action)`.
///
/// States are frame indices `1..=num_states`; actions are segment lengths
/// `min_action..=max_action`. Unvisited entries read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    min_action: u32,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(num_states: usize, min_action: u32, max_action: u32) -> Self {
        assert!(min_action >= 1 && max_action >= min_action);
        let num_actions = (max_action - min_action + 1) as usize;
        Self {
            num_states,
            min_action,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn min_action(&self) -> u32 {
        self.min_action
    }

    pub fn max_action(&self) -> u32 {
        self.min_action + self.num_actions as u32 - 1
    }

    fn index(&self, state: u32, action: u32) -> Option<usize> {
        if state == 0 || state as usize > self.num_states {
            return None;
        }
        let a = action.checked_sub(self.min_action)? as usize;
        (a < self.num_actions).then(|| (state as usize - 1) * self.num_actions + a)
    }

    pub fn get(&self, state: u32, action: u32) -> f64 {
        self.index(state, action).map_or(0.0, |i| self.values[i])
    }

    pub fn set(&mut self, state: u32, action: u32, value: f64) {
        let i = self
            .index(state, action)
            .unwrap_or_else(|| panic!("({state},{action}) outside the table"));
        self.values[i] = value;
    }

    /// Values of all actions in `state`; zeros for states outside the table
    /// (terminal states).
    pub fn row(&self, state: u32) -> Vec<f64> {
        match self.index(state, self.min_action) {
            Some(i) => self.values[i..i + self.num_actions].to_vec(),
            None => vec![0.0; self.num_actions],
        }
    }

    /// Greedy action of `state` and its value, ties to the smallest action.
    pub fn best(&self, state: u32) -> (u32, f64) {
        let row = self.row(state);
        let (k, v) = argmax(&row);
        (self.min_action + k as u32, v)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// First and last-frame value tables.
#[derive(Debug, Clone, PartialEq)]
pub struct QTablePair {
    pub first: QTable,
    pub last: QTable,
}

impl QTablePair {
    pub fn new(num_states: usize, min_action: u32, max_action: u32) -> Self {
        Self {
            first: QTable::new(num_states, min_action, max_action),
            last: QTable::new(num_states, min_action, max_action),
        }
    }

    /// Elementwise sum of both tables' rows: the value of placing a cut,
    /// which fixes the next first frame and the current last frame together.
    pub fn joint_row(&self, state: u32) -> Vec<f64> {
        self.first
            .row(state)
            .into_iter()
            .zip(self.last.row(state))
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Record of one temporal-difference update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QUpdateTrace {
    pub state: u32,
    pub action: u32,
    pub reward: f64,
    pub next_state: u32,
    /// Greedy action of the next state used for bootstrapping.
    pub next_best: u32,
    /// `reward + discount * Q[next, next_best] - Q[state, action]`.
    pub td_term: f64,
}

/// Index and value of the maximum entry; ties resolve to the first index.
pub(crate) fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (k, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = k;
        }
    }
    (best, row.get(best).copied().unwrap_or(0.0))
}

/// ε-greedy choice over one row of action values.
///
/// Explores (uniform over `[min_action, min_action + row.len())`) with
/// probability `epsilon`, otherwise exploits with ties broken towards the
/// smallest action. Exactly one uniform draw is consumed per call, plus one
/// more when exploring.
pub fn select_action<R: Rng + ?Sized>(row: &[f64], min_action: u32, cfg: &QConfig, rng: &mut R) -> u32 {
    let eta: f64 = rng.random();
    if eta < cfg.epsilon {
        min_action + rng.random_range(0..row.len() as u32)
    } else {
        min_action + argmax(row).0 as u32
    }
}

/// One Q-learning step on `table`: bootstrap from the greedy value of
/// `next_state` and move `Q[state, action]` by `learn_rate * td_term`.
pub fn update_q(
    table: &mut QTable,
    state: u32,
    action: u32,
    reward: f64,
    next_state: u32,
    cfg: &QConfig,
) -> QUpdateTrace {
    let (next_best, next_value) = table.best(next_state);
    let current = table.get(state, action);
    let td_term = reward + cfg.discount * next_value - current;
    table.set(state, action, td_term * cfg.learn_rate + current);
    QUpdateTrace {
        state,
        action,
        reward,
        next_state,
        next_best,
        td_term,
    }
}
