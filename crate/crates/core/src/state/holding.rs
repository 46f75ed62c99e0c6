use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete dwell-time distribution over ticks `1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HoldingTime {
    /// `P(H = d) = rho (1 - rho)^(d - 1)`.
    Geometric { rho: f64 },
    /// Weibull(shape, scale) discretized so that `P(H >= d) = exp(-((d - 1) / scale)^shape)`.
    Weibull { shape: f64, scale: f64 },
    /// Explicit masses for `d = 1, 2, ...`.
    Table { probs: Vec<f64> },
}

impl Default for HoldingTime {
    fn default() -> Self {
        HoldingTime::Geometric { rho: 0.5 }
    }
}

impl HoldingTime {
    pub fn validate(&self) -> Result<()> {
        match self {
            HoldingTime::Geometric { rho } => {
                if !(*rho > 0.0 && *rho <= 1.0) {
                    return Err(Error::InvalidModel(format!("geometric rho {rho} not in (0, 1]")));
                }
            }
            HoldingTime::Weibull { shape, scale } => {
                if !(*shape > 0.0 && *scale > 0.0 && shape.is_finite() && scale.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "weibull parameters must be positive (shape {shape}, scale {scale})"
                    )));
                }
            }
            HoldingTime::Table { probs } => {
                if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                    return Err(Error::InvalidModel("holding table has a negative entry".into()));
                }
                if probs.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidModel("holding table has no mass".into()));
                }
            }
        }
        Ok(())
    }

    /// Truncates tables to `cap` entries and renormalizes them; parametric families are unchanged.
    pub fn truncated(&self, cap: usize) -> HoldingTime {
        match self {
            HoldingTime::Table { probs } => {
                let mut probs: Vec<f64> = probs.iter().take(cap).copied().collect();
                let total: f64 = probs.iter().sum();
                if total > 0.0 {
                    probs.iter_mut().for_each(|p| *p /= total);
                }
                HoldingTime::Table { probs }
            }
            other => other.clone(),
        }
    }

    pub fn pmf(&self, d: usize) -> f64 {
        if d == 0 {
            return 0.0;
        }
        match self {
            HoldingTime::Geometric { rho } => rho * (1.0 - rho).powi(d as i32 - 1),
            HoldingTime::Weibull { .. } => self.survival(d) - self.survival(d + 1),
            HoldingTime::Table { probs } => probs.get(d - 1).copied().unwrap_or(0.0),
        }
    }

    /// `P(H >= d)`.
    pub fn survival(&self, d: usize) -> f64 {
        if d <= 1 {
            return 1.0;
        }
        match self {
            HoldingTime::Geometric { rho } => (1.0 - rho).powi(d as i32 - 1),
            HoldingTime::Weibull { shape, scale } => (-((d - 1) as f64 / scale).powf(*shape)).exp(),
            HoldingTime::Table { probs } => probs.iter().skip(d - 1).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            HoldingTime::Geometric { rho } => {
                if *rho >= 1.0 {
                    return 1;
                }
                let u: f64 = 1.0 - rng.random::<f64>();
                1 + (u.ln() / (1.0 - rho).ln()).floor() as usize
            }
            HoldingTime::Weibull { shape, scale } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let t = scale * (-u.ln()).powf(1.0 / shape);
                1 + t.floor() as usize
            }
            HoldingTime::Table { probs } => {
                let total: f64 = probs.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (k, p) in probs.iter().enumerate() {
                    if u < *p {
                        return k + 1;
                    }
                    u -= p;
                }
                probs.iter().rposition(|p| *p > 0.0).map_or(1, |k| k + 1)
            }
        }
    }
}
