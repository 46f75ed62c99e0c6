//! Observation streams: CSV communication tables and JSONL event records.
//!
//! CSV columns are `tick,entity_a,entity_b,channel_id,raw_value,monitored`.
//! JSONL lines carry a `kind` tag; see [`DataRecord`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize};

use crate::edge::ChannelId;
use crate::error::{Error, Result};
use crate::graph::OriginClass;
use crate::ids::{EntityId, Pair};
use crate::orchestrator::{CommRecord, EdgeEvent, TickBatch};
use crate::scenario::PriorSpec;

fn yes() -> bool {
    true
}

fn flexible_bool<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bool(bool),
        Int(u8),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Bool(b) => Ok(b),
        Raw::Int(0) => Ok(false),
        Raw::Int(1) => Ok(true),
        Raw::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(serde::de::Error::custom(format!("not a boolean: {other:?}"))),
        },
        Raw::Int(n) => Err(serde::de::Error::custom(format!("not a boolean: {n}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommRow {
    pub tick: u64,
    pub entity_a: EntityId,
    pub entity_b: EntityId,
    pub channel_id: ChannelId,
    #[serde(default)]
    pub raw_value: f64,
    #[serde(default = "yes", deserialize_with = "flexible_bool")]
    pub monitored: bool,
}

/// One line of a JSONL data stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataRecord {
    Comm(CommRow),
    /// Filtered signals for every task of one entity.
    Signal { tick: u64, entity: EntityId, values: Vec<Option<f64>> },
    /// One raw activity record for one task.
    Activity { tick: u64, entity: EntityId, task: usize, value: f64 },
    Join { tick: u64, entity: EntityId },
    Leave { tick: u64, entity: EntityId },
    Edge {
        tick: u64,
        entity_a: EntityId,
        entity_b: EntityId,
        origin: OriginClass,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior: Option<PriorSpec>,
    },
}

impl DataRecord {
    pub fn tick(&self) -> u64 {
        match self {
            DataRecord::Comm(r) => r.tick,
            DataRecord::Signal { tick, .. }
            | DataRecord::Activity { tick, .. }
            | DataRecord::Join { tick, .. }
            | DataRecord::Leave { tick, .. }
            | DataRecord::Edge { tick, .. } => *tick,
        }
    }
}

pub fn read_csv<R: std::io::Read>(input: R, source: &str) -> Result<Vec<DataRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<CommRow>().enumerate() {
        let row = row.map_err(|e| Error::schema(format!("{source}:{}", i + 2), e.to_string()))?;
        out.push(DataRecord::Comm(row));
    }
    Ok(out)
}

pub fn read_jsonl<R: BufRead>(input: R, source: &str) -> Result<Vec<DataRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::schema(format!("{source}:{}", i + 1), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads a data file, choosing the format from the extension (`.csv` or JSONL otherwise).
pub fn read_path(path: &std::path::Path) -> Result<Vec<DataRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let name = path.display().to_string();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(file, &name)
    } else {
        read_jsonl(std::io::BufReader::new(file), &name)
    }
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[DataRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Groups records into one batch per tick from `start_tick + 1` through the
/// last tick with data (or `last_tick` when given); ticks without data get empty batches.
pub fn assemble_batches(records: &[DataRecord], start_tick: u64, last_tick: Option<u64>) -> Result<Vec<TickBatch>> {
    let max_tick = records.iter().map(DataRecord::tick).max().unwrap_or(start_tick);
    let end = last_tick.unwrap_or(max_tick).max(start_tick);
    if let Some(r) = records.iter().find(|r| r.tick() <= start_tick || r.tick() > end) {
        return Err(Error::InvalidArgument(format!(
            "record at tick {} outside the replay window {}..={end}",
            r.tick(),
            start_tick + 1
        )));
    }
    let mut batches: BTreeMap<u64, TickBatch> = (start_tick + 1..=end).map(|t| (t, TickBatch::empty(t))).collect();
    for r in records {
        let b = batches.get_mut(&r.tick()).expect("tick checked above");
        match r {
            DataRecord::Comm(row) => b.communications.push(CommRecord {
                entity_a: row.entity_a.clone(),
                entity_b: row.entity_b.clone(),
                channel: row.channel_id,
                raw: row.raw_value,
                monitored: row.monitored,
            }),
            DataRecord::Signal { entity, values, .. } => {
                if b.signals.insert(entity.clone(), values.clone()).is_some() {
                    return Err(Error::InvalidArgument(format!("two signal records for {entity} at tick {}", b.tick)));
                }
            }
            DataRecord::Activity { entity, task, value, .. } => {
                b.activity.entry(entity.clone()).or_default().entry(*task).or_default().push(*value);
            }
            DataRecord::Join { entity, .. } => {
                b.population.additions.insert(entity.clone());
            }
            DataRecord::Leave { entity, .. } => {
                b.population.removals.insert(entity.clone());
            }
            DataRecord::Edge { entity_a, entity_b, origin, prior, .. } => b.edges.push(EdgeEvent {
                pair: Pair::new(entity_a.clone(), entity_b.clone())?,
                origin: *origin,
                prior: *prior,
            }),
        }
    }
    Ok(batches.into_values().collect())
}
