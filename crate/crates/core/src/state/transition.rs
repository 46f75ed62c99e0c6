use serde::{Deserialize, Serialize};

use super::holding::HoldingTime;
use super::space::ThreatStateSpace;
use crate::error::{Error, Result};

pub const DEFAULT_DURATION_CAP: usize = 52;

/// Plain serialized form of a [`TransitionModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub space: ThreatStateSpace,
    pub embedded: Vec<Vec<f64>>,
    /// `holding[i][j]` is required wherever `embedded[i][j] > 0` and `i` is not absorbing.
    pub holding: Vec<Vec<Option<HoldingTime>>>,
    #[serde(default = "default_cap")]
    pub duration_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DURATION_CAP
}

/// Per-duration exit hazards for one state.
#[derive(Debug, Clone, PartialEq)]
struct StateHazards {
    /// `exits[d - 1][j]`; `None` where the survival mass is zero.
    exits: Vec<Option<Vec<f64>>>,
    retention: Vec<f64>,
}

/// Semi-Markov dynamics: embedded jump chain plus per-transition holding times,
/// compiled into duration-dependent hazards on a grid truncated at `duration_cap`.
///
/// The cap bucket stands for "duration >= cap" and keeps the hazard of the
/// final grid point, which is exact for geometric holding times and for tables
/// whose support fits under the cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionSpec", into = "TransitionSpec")]
pub struct TransitionModel {
    spec: TransitionSpec,
    hazards: Vec<StateHazards>,
}

impl TryFrom<TransitionSpec> for TransitionModel {
    type Error = Error;

    fn try_from(spec: TransitionSpec) -> Result<Self> {
        TransitionModel::new(spec)
    }
}

impl From<TransitionModel> for TransitionSpec {
    fn from(m: TransitionModel) -> Self {
        m.spec
    }
}

impl TransitionModel {
    pub fn new(mut spec: TransitionSpec) -> Result<Self> {
        let m = spec.space.len();
        let cap = spec.duration_cap;
        if cap == 0 {
            return Err(Error::InvalidModel("duration_cap must be positive".into()));
        }
        if spec.embedded.len() != m || spec.embedded.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel(format!("embedded matrix must be {m}x{m}")));
        }
        if spec.holding.is_empty() {
            spec.holding = vec![vec![None; m]; m];
        }
        if spec.holding.len() != m || spec.holding.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel(format!("holding matrix must be {m}x{m}")));
        }
        for (i, row) in spec.embedded.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
                return Err(Error::InvalidModel(format!("row {i} has an entry outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("row {i} sums to {total}, not 1")));
            }
            if spec.space.is_absorbing(i) {
                if row[i] != 1.0 {
                    return Err(Error::InvalidModel(format!(
                        "absorbing state {i} must map to itself with probability 1"
                    )));
                }
            } else if row[i] != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "non-absorbing state {i} has a self-transition; dwell belongs in the holding time"
                )));
            }
        }
        for i in 0..m {
            if spec.space.is_absorbing(i) {
                continue;
            }
            for j in 0..m {
                if spec.embedded[i][j] > 0.0 {
                    let q = spec.holding[i][j].as_ref().ok_or_else(|| {
                        Error::InvalidModel(format!("missing holding time for transition {i} -> {j}"))
                    })?;
                    q.validate()?;
                    spec.holding[i][j] = Some(q.truncated(cap));
                }
            }
        }
        let hazards = (0..m).map(|i| compile_state(&spec, i)).collect();
        Ok(Self { spec, hazards })
    }

    pub fn space(&self) -> &ThreatStateSpace {
        &self.spec.space
    }

    pub fn num_states(&self) -> usize {
        self.spec.space.len()
    }

    pub fn duration_cap(&self) -> usize {
        self.spec.duration_cap
    }

    pub fn embedded(&self) -> &[Vec<f64>] {
        &self.spec.embedded
    }

    pub fn holding(&self, from: usize, to: usize) -> Option<&HoldingTime> {
        self.spec.holding.get(from)?.get(to)?.as_ref()
    }

    pub fn spec(&self) -> &TransitionSpec {
        &self.spec
    }

    /// Exit hazard `h_ij(d)` for duration `d` in `1..=cap`; `None` when the
    /// survival mass at `(i, d)` is zero.
    pub fn hazard(&self, from: usize, to: usize, d: usize) -> Option<f64> {
        if self.spec.space.is_absorbing(from) {
            return Some(0.0);
        }
        let exits = self.hazards[from].exits.get(d.checked_sub(1)?)?.as_ref()?;
        Some(exits[to])
    }

    /// Probability of remaining in `from` after a tick spent at duration `d`.
    pub fn retention(&self, from: usize, d: usize) -> f64 {
        if self.spec.space.is_absorbing(from) {
            return 1.0;
        }
        self.hazards[from].retention[d - 1]
    }

    /// One application of the duration-augmented transition operator to a flat
    /// `m x cap` joint mass (row-major by state).
    pub fn apply(&self, joint: &[f64]) -> Result<Vec<f64>> {
        let m = self.num_states();
        let cap = self.duration_cap();
        let mut out = vec![0.0; m * cap];
        for i in 0..m {
            let absorbing = self.spec.space.is_absorbing(i);
            for d in 1..=cap {
                let mass = joint[i * cap + d - 1];
                if mass == 0.0 {
                    continue;
                }
                let next_d = (d + 1).min(cap);
                if absorbing {
                    out[i * cap + next_d - 1] += mass;
                    continue;
                }
                let h = &self.hazards[i];
                let exits = h.exits[d - 1]
                    .as_ref()
                    .ok_or(Error::DegenerateHolding { state: i, duration: d })?;
                for (j, hz) in exits.iter().enumerate() {
                    if *hz > 0.0 {
                        out[j * cap] += mass * hz;
                    }
                }
                out[i * cap + next_d - 1] += mass * h.retention[d - 1];
            }
        }
        Ok(out)
    }
}

fn compile_state(spec: &TransitionSpec, i: usize) -> StateHazards {
    let m = spec.space.len();
    let cap = spec.duration_cap;
    if spec.space.is_absorbing(i) {
        return StateHazards { exits: vec![Some(vec![0.0; m]); cap], retention: vec![1.0; cap] };
    }
    let mut exits = Vec::with_capacity(cap);
    let mut retention = Vec::with_capacity(cap);
    for d in 1..=cap {
        let mut survival = 0.0;
        let mut leaving = vec![0.0; m];
        for j in 0..m {
            let p = spec.embedded[i][j];
            if p > 0.0 {
                let q = spec.holding[i][j].as_ref().expect("validated");
                survival += p * q.survival(d);
                leaving[j] = p * q.pmf(d);
            }
        }
        if survival <= 0.0 {
            exits.push(None);
            retention.push(0.0);
            continue;
        }
        leaving.iter_mut().for_each(|x| *x /= survival);
        let out: f64 = leaving.iter().sum();
        retention.push((1.0 - out).max(0.0));
        exits.push(Some(leaving));
    }
    StateHazards { exits, retention }
}
