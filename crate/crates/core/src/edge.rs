//! Gamma-Poisson filtering of latent pairwise communication rates.
//!
//! Each edge carries a Gamma(alpha, beta) belief over its rate. Between ticks
//! the belief is discounted (mean kept, variance inflated); within a tick every
//! monitored channel adds its scaled count to `alpha` and its efficiency to
//! `beta`. Nothing here approximates: every belief stays exactly Gamma.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::Pair;
use crate::numeric::{gamma_ln_pdf, gamma_q, ln_gamma};

pub type ChannelId = u32;

/// How raw records inside one tick collapse to a single raw value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    #[default]
    Sum,
    Count,
    /// Last reading minus first reading, for cumulative counters.
    FirstDifference,
}

impl SummaryKind {
    pub fn summarize(&self, records: &[f64]) -> f64 {
        match self {
            SummaryKind::Sum => records.iter().sum(),
            SummaryKind::Count => records.len() as f64,
            SummaryKind::FirstDifference => match (records.first(), records.last()) {
                (Some(a), Some(b)) => (b - a).max(0.0),
                _ => 0.0,
            },
        }
    }
}

fn default_scale_target() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: ChannelId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Fraction of the latent rate that this channel observes.
    pub efficiency: f64,
    /// Largest raw value expected; maps to `scale_target`.
    pub r_max: f64,
    #[serde(default = "default_scale_target")]
    pub scale_target: f64,
    #[serde(default)]
    pub clamp: bool,
    #[serde(default)]
    pub summary: SummaryKind,
}

impl ChannelSpec {
    pub fn new(id: ChannelId, efficiency: f64, r_max: f64) -> Self {
        Self {
            id,
            name: None,
            efficiency,
            r_max,
            scale_target: default_scale_target(),
            clamp: false,
            summary: SummaryKind::Sum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "channel {}: efficiency {} outside (0, 1]",
                self.id, self.efficiency
            )));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidModel(format!("channel {}: r_max must be positive", self.id)));
        }
        if !(self.scale_target > 0.0 && self.scale_target.is_finite()) {
            return Err(Error::InvalidModel(format!("channel {}: scale_target must be positive", self.id)));
        }
        Ok(())
    }
}

pub fn find_channel(channels: &[ChannelSpec], id: ChannelId) -> Result<&ChannelSpec> {
    channels.iter().find(|c| c.id == id).ok_or(Error::UnknownChannel(id))
}

/// Maps a raw tick summary onto the common `[0, scale_target]` scale.
pub fn scale_raw(raw: f64, channel: &ChannelSpec) -> Result<f64> {
    if !(raw >= 0.0 && raw.is_finite()) {
        return Err(Error::InvalidArgument(format!("raw value {raw} on channel {} must be >= 0", channel.id)));
    }
    let s = raw / channel.r_max * channel.scale_target;
    Ok(if channel.clamp { s.min(channel.scale_target) } else { s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DiscountMode {
    Fixed { delta: f64 },
    /// Discount relaxes towards 1 after quiet ticks and towards the baseline after busy ones.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeBelief {
    pub pair: Pair,
    pub alpha: f64,
    pub beta: f64,
    pub baseline_discount: f64,
    pub discount_mode: DiscountMode,
    /// Sum over channels of scaled count times efficiency at the previous tick.
    #[serde(default)]
    pub last_observed_effort: f64,
}

impl EdgeBelief {
    pub fn new(pair: Pair, alpha: f64, beta: f64, baseline_discount: f64, discount_mode: DiscountMode) -> Result<Self> {
        let b = Self { pair, alpha, beta, baseline_discount, discount_mode, last_observed_effort: 0.0 };
        b.validate()?;
        Ok(b)
    }

    pub fn fixed(pair: Pair, alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        Self::new(pair, alpha, beta, delta, DiscountMode::Fixed { delta })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::ImproperBelief { alpha: self.alpha, beta: self.beta });
        }
        let in_unit = |d: f64| d > 0.0 && d <= 1.0;
        if !in_unit(self.baseline_discount) {
            return Err(Error::InvalidModel(format!("baseline discount {} outside (0, 1]", self.baseline_discount)));
        }
        if let DiscountMode::Fixed { delta } = self.discount_mode {
            if !in_unit(delta) {
                return Err(Error::InvalidModel(format!("discount {delta} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_proper(&self) -> bool {
        self.alpha > 0.0 && self.beta > 0.0
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }

    /// Discount factor to apply when moving this belief to the next tick.
    pub fn discount_factor(&self) -> f64 {
        match self.discount_mode {
            DiscountMode::Fixed { delta } => delta,
            DiscountMode::Adaptive => adaptive_discount(self.baseline_discount, self.last_observed_effort),
        }
    }

    fn require_proper(&self) -> Result<()> {
        if self.is_proper() {
            Ok(())
        } else {
            Err(Error::ImproperBelief { alpha: self.alpha, beta: self.beta })
        }
    }
}

/// Posterior at `t - 1` to prior at `t`: both parameters scaled by `delta`.
pub fn evolve_prior(belief: &EdgeBelief, delta: f64) -> Result<EdgeBelief> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("discount {delta} outside (0, 1]")));
    }
    let mut out = belief.clone();
    out.alpha *= delta;
    out.beta *= delta;
    Ok(out)
}

pub fn adaptive_discount(baseline: f64, prev_effort: f64) -> f64 {
    baseline + (1.0 - baseline) * (-prev_effort).exp()
}

/// One pair's scaled channel values for one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector {
    pub pair: Pair,
    pub tick: u64,
    #[serde(default)]
    pub values: BTreeMap<ChannelId, f64>,
    pub monitored: bool,
}

impl ObservationVector {
    pub fn monitored(pair: Pair, tick: u64, values: impl IntoIterator<Item = (ChannelId, f64)>) -> Self {
        Self { pair, tick, values: values.into_iter().collect(), monitored: true }
    }

    pub fn unmonitored(pair: Pair, tick: u64) -> Self {
        Self { pair, tick, values: BTreeMap::new(), monitored: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.monitored && !self.values.is_empty() {
            return Err(Error::InvalidArgument(format!("unmonitored observation for {} carries values", self.pair)));
        }
        if let Some((k, v)) = self.values.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("channel {k} value {v} for {} must be >= 0", self.pair)));
        }
        Ok(())
    }

    pub fn has_activity(&self) -> bool {
        self.values.values().any(|v| *v > 0.0)
    }

    /// `sum_k s_k * xi_k`, the quantity driving the adaptive discount.
    pub fn effort(&self, channels: &[ChannelSpec]) -> Result<f64> {
        let mut e = 0.0;
        for (k, s) in &self.values {
            e += s * find_channel(channels, *k)?.efficiency;
        }
        Ok(e)
    }
}

/// Adds the monitored channels' counts to `alpha` and their efficiencies to `beta`.
pub fn posterior_update(belief: &EdgeBelief, obs: &ObservationVector, channels: &[ChannelSpec]) -> Result<EdgeBelief> {
    if !obs.monitored {
        return Err(Error::UnmonitoredTick(obs.pair.to_string()));
    }
    obs.validate()?;
    let mut ds = 0.0;
    let mut dx = 0.0;
    for (k, s) in &obs.values {
        ds += s;
        dx += find_channel(channels, *k)?.efficiency;
    }
    let mut out = belief.clone();
    out.alpha += ds;
    out.beta += dx;
    out.last_observed_effort = obs.effort(channels)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveTerm {
    pub channel: ChannelId,
    pub scaled: f64,
    /// Integer count the mass was evaluated at.
    pub rounded: u64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Predictive {
    pub log_likelihood: f64,
    pub terms: Vec<PredictiveTerm>,
}

/// Log of the Gamma-Poisson (negative binomial) mass at count `n`.
pub fn negative_binomial_ln_pmf(alpha: f64, beta: f64, efficiency: f64, n: u64) -> f64 {
    let nf = n as f64;
    let ratio = efficiency / beta;
    let mut lp = -alpha * ratio.ln_1p();
    if n > 0 {
        lp += ln_gamma(alpha + nf) - ln_gamma(alpha) - ln_gamma(nf + 1.0) + nf * (ratio / (1.0 + ratio)).ln();
    }
    lp
}

/// One-step-ahead log predictive of a tick's observation vector.
///
/// Channels share the rate, so the joint mass is built as a chain: each
/// channel's term is conditioned on the channels before it. The total does
/// not depend on channel order. Scaled values are rounded to the nearest
/// integer; each term records the count it used.
pub fn predictive_log_likelihood(
    belief: &EdgeBelief,
    obs: &ObservationVector,
    channels: &[ChannelSpec],
) -> Result<Predictive> {
    belief.require_proper()?;
    obs.validate()?;
    let mut out = Predictive::default();
    let (mut alpha, mut beta) = (belief.alpha, belief.beta);
    for (k, s) in &obs.values {
        let xi = find_channel(channels, *k)?.efficiency;
        let n = s.round() as u64;
        let ll = negative_binomial_ln_pmf(alpha, beta, xi, n);
        alpha += n as f64;
        beta += xi;
        out.log_likelihood += ll;
        out.terms.push(PredictiveTerm { channel: *k, scaled: *s, rounded: n, log_likelihood: ll });
    }
    Ok(out)
}

/// `P(rate > threshold)` under the belief.
pub fn tail_probability(belief: &EdgeBelief, threshold: f64) -> Result<f64> {
    belief.require_proper()?;
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must be >= 0")));
    }
    Ok(gamma_q(belief.alpha, belief.beta * threshold).clamp(0.0, 1.0))
}

pub fn posterior_density_curve(belief: &EdgeBelief, grid: &[f64]) -> Result<Vec<f64>> {
    belief.require_proper()?;
    Ok(grid.iter().map(|&x| gamma_ln_pdf(belief.alpha, belief.beta, x).exp()).collect())
}

/// Evenly spaced grid covering the bulk of the belief, for plotting.
pub fn default_density_grid(belief: &EdgeBelief, points: usize) -> Vec<f64> {
    let upper = if belief.is_proper() {
        belief.mean() + 6.0 * belief.variance().sqrt()
    } else {
        1.0
    };
    let n = points.max(2);
    (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect()
}
