use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::stable_sum;

/// Joint distribution over (threat state, duration-in-state) for one entity.
///
/// `joint[i * cap + (d - 1)] = P(X = x_i, duration = d)` for `d` in `1..=cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBelief {
    num_states: usize,
    duration_cap: usize,
    joint: Vec<f64>,
    pub tick: u64,
}

impl StateBelief {
    /// Places the marginal `pi` on duration 1 (every state freshly entered).
    pub fn from_marginal(pi: &[f64], duration_cap: usize) -> Result<Self> {
        if pi.len() < 2 || duration_cap == 0 {
            return Err(Error::InvalidArgument("belief needs >= 2 states and a positive cap".into()));
        }
        if pi.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidArgument("state probabilities must be non-negative".into()));
        }
        let total = stable_sum(pi.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidArgument("state probabilities sum to zero".into()));
        }
        let mut joint = vec![0.0; pi.len() * duration_cap];
        for (i, p) in pi.iter().enumerate() {
            joint[i * duration_cap] = p / total;
        }
        Ok(Self { num_states: pi.len(), duration_cap, joint, tick: 0 })
    }

    /// All mass at `(state, duration)`.
    pub fn point(num_states: usize, duration_cap: usize, state: usize, duration: usize) -> Result<Self> {
        if state >= num_states || duration == 0 || duration > duration_cap {
            return Err(Error::InvalidArgument(format!(
                "point ({state}, {duration}) outside {num_states}x{duration_cap}"
            )));
        }
        let mut joint = vec![0.0; num_states * duration_cap];
        joint[state * duration_cap + duration - 1] = 1.0;
        Ok(Self { num_states, duration_cap, joint, tick: 0 })
    }

    pub(crate) fn from_joint(num_states: usize, duration_cap: usize, joint: Vec<f64>, tick: u64) -> Self {
        debug_assert_eq!(joint.len(), num_states * duration_cap);
        Self { num_states, duration_cap, joint, tick }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn duration_cap(&self) -> usize {
        self.duration_cap
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn get(&self, state: usize, duration: usize) -> f64 {
        self.joint[state * self.duration_cap + duration - 1]
    }

    pub fn total(&self) -> f64 {
        stable_sum(self.joint.iter().copied())
    }

    /// State marginal `pi_i = sum_d b[i][d]`.
    pub fn marginal(&self) -> Vec<f64> {
        self.joint
            .chunks(self.duration_cap)
            .map(|row| stable_sum(row.iter().copied()))
            .collect()
    }

    /// Distribution of duration-in-current-state, summed over states.
    pub fn duration_marginal(&self) -> Vec<f64> {
        (0..self.duration_cap)
            .map(|d| stable_sum((0..self.num_states).map(|i| self.joint[i * self.duration_cap + d])))
            .collect()
    }

    pub fn marginal_threat(&self, threat_set: &BTreeSet<usize>) -> f64 {
        let pi = self.marginal();
        let v = stable_sum(threat_set.iter().filter_map(|&i| pi.get(i).copied()));
        v.clamp(0.0, 1.0)
    }

    pub(crate) fn normalize(&mut self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            self.joint.iter_mut().for_each(|x| *x /= total);
        }
        total
    }

    pub fn argmax_state(&self) -> usize {
        let pi = self.marginal();
        let mut best = 0;
        for (i, p) in pi.iter().enumerate() {
            if *p > pi[best] {
                best = i;
            }
        }
        best
    }
}
