use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};

use super::space::ThreatStateSpace;
use crate::error::{Error, Result};
use crate::numeric::{beta_pdf, tanh_sinh};

/// Density of a filtered signal `z` in `[0, 1]` given one task indicator value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Emission {
    /// Beta(alpha, beta); both parameters must be >= 1 so the density is bounded.
    Beta { alpha: f64, beta: f64 },
    /// Piecewise-constant density on equal-width bins of `[0, 1]`.
    Histogram { densities: Vec<f64> },
}

impl Emission {
    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            Emission::Beta { alpha, beta } => beta_pdf(*alpha, *beta, z),
            Emission::Histogram { densities } => {
                if !(0.0..=1.0).contains(&z) {
                    return 0.0;
                }
                let n = densities.len();
                let k = ((z * n as f64).floor() as usize).min(n - 1);
                densities[k]
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Emission::Beta { alpha, beta } => {
                BetaDist::new(*alpha, *beta).expect("validated beta parameters").sample(rng)
            }
            Emission::Histogram { densities } => {
                let n = densities.len() as f64;
                let total: f64 = densities.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut bin = densities.len() - 1;
                for (k, w) in densities.iter().enumerate() {
                    if u < *w {
                        bin = k;
                        break;
                    }
                    u -= w;
                }
                (bin as f64 + rng.random::<f64>()) / n
            }
        }
    }

    fn validate(&self, task: usize) -> Result<()> {
        match self {
            Emission::Beta { alpha, beta } => {
                if !(*alpha >= 1.0 && *beta >= 1.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "task {task}: beta emission parameters must be >= 1 (got {alpha}, {beta})"
                    )));
                }
            }
            Emission::Histogram { densities } => {
                if densities.is_empty() || densities.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                    return Err(Error::InvalidModel(format!(
                        "task {task}: histogram densities must be non-empty and non-negative"
                    )));
                }
            }
        }
        let mass = match self {
            Emission::Histogram { densities } => densities.iter().sum::<f64>() / densities.len() as f64,
            _ => tanh_sinh(|z| self.pdf(z), 0.0, 1.0),
        };
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidModel(format!(
                "task {task}: emission density integrates to {mass}, not 1"
            )));
        }
        Ok(())
    }
}

/// Signal densities for one task under `theta = 0` and `theta = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEmission {
    pub off: Emission,
    pub on: Emission,
}

/// Maps a tick's raw activity records for one task to a signal in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalExtractor {
    /// Largest record, clamped to `[0, 1]`.
    #[default]
    Max,
    /// Mean record, clamped to `[0, 1]`.
    Mean,
    /// `1 - exp(-sum / scale)`.
    Saturating { scale: f64 },
    /// 1 if any record reaches `threshold`, else 0.
    Indicator { threshold: f64 },
}

impl SignalExtractor {
    pub fn extract(&self, records: &[f64]) -> Option<f64> {
        if records.is_empty() {
            return None;
        }
        let z = match self {
            SignalExtractor::Max => records.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            SignalExtractor::Mean => records.iter().sum::<f64>() / records.len() as f64,
            SignalExtractor::Saturating { scale } => 1.0 - (-records.iter().sum::<f64>() / scale).exp(),
            SignalExtractor::Indicator { threshold } => {
                if records.iter().any(|r| r >= threshold) {
                    1.0
                } else {
                    0.0
                }
            }
        };
        Some(z.clamp(0.0, 1.0))
    }
}

/// Intermediate task layer linking threat states to observable signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskModel {
    pub task_names: Vec<String>,
    /// Per state, the indices of the tasks relevant to it.
    pub index_sets: Vec<BTreeSet<usize>>,
    /// Per state, `P(theta_j = 1 | X = x_i)` for each `j` in that state's index set.
    pub task_probs: Vec<BTreeMap<usize, f64>>,
    pub emissions: Vec<TaskEmission>,
    #[serde(default)]
    pub extractors: Vec<SignalExtractor>,
}

impl TaskModel {
    pub fn num_tasks(&self) -> usize {
        self.task_names.len()
    }

    pub fn validate(&self, space: &ThreatStateSpace) -> Result<()> {
        let r = self.num_tasks();
        let m = space.len();
        if r == 0 {
            return Err(Error::InvalidModel("task model has no tasks".into()));
        }
        if self.emissions.len() != r {
            return Err(Error::InvalidModel(format!("expected {r} task emissions")));
        }
        if !self.extractors.is_empty() && self.extractors.len() != r {
            return Err(Error::InvalidModel(format!("expected {r} signal extractors")));
        }
        if self.index_sets.len() != m || self.task_probs.len() != m {
            return Err(Error::InvalidModel(format!("index sets and task probabilities need {m} rows")));
        }
        for i in 0..m {
            let set = &self.index_sets[i];
            if set.is_empty() && !space.is_absorbing(i) {
                return Err(Error::InvalidModel(format!("state {i} has an empty task index set")));
            }
            if let Some(j) = set.iter().find(|&&j| j >= r) {
                return Err(Error::InvalidModel(format!("state {i} references unknown task {j}")));
            }
            for j in set {
                let p = self.task_probs[i].get(j).ok_or_else(|| {
                    Error::InvalidModel(format!("missing task probability for state {i}, task {j}"))
                })?;
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidModel(format!("task probability {p} outside [0, 1]")));
                }
            }
            if let Some(j) = self.task_probs[i].keys().find(|j| !set.contains(j)) {
                return Err(Error::InvalidModel(format!(
                    "state {i} has a probability for task {j} outside its index set"
                )));
            }
        }
        for (j, e) in self.emissions.iter().enumerate() {
            e.off.validate(j)?;
            e.on.validate(j)?;
        }
        Ok(())
    }

    /// `P(theta_j = 1 | X = x_i)`; tasks outside the state's index set are a fair coin.
    pub fn task_prob(&self, state: usize, task: usize) -> f64 {
        self.task_probs[state].get(&task).copied().unwrap_or(0.5)
    }

    pub fn extractor(&self, task: usize) -> SignalExtractor {
        self.extractors.get(task).copied().unwrap_or_default()
    }

    /// Turns per-task raw activity records into a signal vector.
    pub fn extract(&self, records: &BTreeMap<usize, Vec<f64>>, tick: u64) -> SignalVector {
        let values = (0..self.num_tasks())
            .map(|j| records.get(&j).and_then(|r| self.extractor(j).extract(r)))
            .collect();
        SignalVector { values, tick }
    }
}

/// One tick's filtered signals; `None` marks a missing task signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalVector {
    pub values: Vec<Option<f64>>,
    pub tick: u64,
}

impl SignalVector {
    pub fn missing(num_tasks: usize, tick: u64) -> Self {
        Self { values: vec![None; num_tasks], tick }
    }

    pub fn is_vacuous(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }

    /// Per-task maximum over members; missing only where every input is missing.
    pub fn fuse_max<'a>(signals: impl IntoIterator<Item = &'a SignalVector>, num_tasks: usize, tick: u64) -> Self {
        let mut values: Vec<Option<f64>> = vec![None; num_tasks];
        for s in signals {
            for (slot, v) in values.iter_mut().zip(&s.values) {
                if let Some(v) = v {
                    *slot = Some(slot.map_or(*v, |cur: f64| cur.max(*v)));
                }
            }
        }
        Self { values, tick }
    }
}
