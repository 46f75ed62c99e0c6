use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::edge::{find_channel, scale_raw, ChannelId, ChannelSpec, ObservationVector, SummaryKind};
use crate::error::{Error, Result};
use crate::graph::{OriginClass, PopulationDelta};
use crate::ids::{EntityId, Pair};
use crate::scenario::PriorSpec;

fn yes() -> bool {
    true
}

/// One raw communication record, before per-tick summarizing and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommRecord {
    pub entity_a: EntityId,
    pub entity_b: EntityId,
    pub channel: ChannelId,
    #[serde(default)]
    pub raw: f64,
    #[serde(default = "yes")]
    pub monitored: bool,
}

/// Explicit edge creation, e.g. from a newly established social link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEvent {
    pub pair: Pair,
    pub origin: OriginClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
}

/// Everything observed during one tick.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickBatch {
    pub tick: u64,
    #[serde(default, skip_serializing_if = "PopulationDelta::is_empty")]
    pub population: PopulationDelta,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeEvent>,
    /// Already-scaled pair observations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observations: Vec<ObservationVector>,
    /// Raw records, summarized per channel and scaled on commit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub communications: Vec<CommRecord>,
    /// Filtered signals per entity, one slot per task.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub signals: BTreeMap<EntityId, Vec<Option<f64>>>,
    /// Raw activity records per entity and task index, turned into signals by the task extractors.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub activity: BTreeMap<EntityId, BTreeMap<usize, Vec<f64>>>,
}

impl TickBatch {
    pub fn empty(tick: u64) -> Self {
        Self { tick, ..Default::default() }
    }

    /// Merges scaled and raw pair data into one observation per pair.
    pub fn resolve_observations(&self, channels: &[ChannelSpec]) -> Result<BTreeMap<Pair, ObservationVector>> {
        let mut out: BTreeMap<Pair, ObservationVector> = BTreeMap::new();
        for obs in &self.observations {
            if obs.tick != self.tick {
                return Err(Error::TickMismatch { expected: self.tick, got: obs.tick });
            }
            obs.validate()?;
            for k in obs.values.keys() {
                find_channel(channels, *k)?;
            }
            if out.insert(obs.pair.clone(), obs.clone()).is_some() {
                return Err(Error::InvalidArgument(format!("pair {} observed twice in tick {}", obs.pair, self.tick)));
            }
        }
        let mut raw: BTreeMap<Pair, (Vec<bool>, BTreeMap<ChannelId, Vec<f64>>)> = BTreeMap::new();
        for r in &self.communications {
            let pair = Pair::new(r.entity_a.clone(), r.entity_b.clone())?;
            find_channel(channels, r.channel)?;
            if !(r.raw >= 0.0 && r.raw.is_finite()) {
                return Err(Error::InvalidArgument(format!("raw value {} for {pair} must be >= 0", r.raw)));
            }
            let slot = raw.entry(pair).or_default();
            slot.0.push(r.monitored);
            if r.monitored {
                slot.1.entry(r.channel).or_default().push(r.raw);
            }
        }
        for (pair, (flags, per_channel)) in raw {
            if out.contains_key(&pair) {
                return Err(Error::InvalidArgument(format!("pair {pair} observed twice in tick {}", self.tick)));
            }
            let obs = if flags.iter().all(|m| !m) {
                ObservationVector::unmonitored(pair, self.tick)
            } else if flags.iter().any(|m| !m) {
                return Err(Error::InvalidArgument(format!(
                    "pair {pair} is both monitored and unmonitored in tick {}",
                    self.tick
                )));
            } else {
                let mut values = BTreeMap::new();
                for (k, mut records) in per_channel {
                    let ch = find_channel(channels, k)?;
                    if ch.summary != SummaryKind::FirstDifference {
                        records.sort_by(f64::total_cmp);
                    }
                    values.insert(k, scale_raw(ch.summary.summarize(&records), ch)?);
                }
                ObservationVector { pair: pair.clone(), tick: self.tick, values, monitored: true }
            };
            out.insert(obs.pair.clone(), obs);
        }
        Ok(out)
    }
}
