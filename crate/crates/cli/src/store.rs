//! On-disk layout of a scenario directory.
//!
//! `scenario.json` holds the configuration, `events.jsonl` one tick report per
//! line, and `snapshot.json` the latest state. The event log is authoritative:
//! a missing or stale snapshot is rebuilt by replaying it.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cellwatch_core::orchestrator::{replay, ScenarioState, TickReport};
use cellwatch_core::scenario::ScenarioConfig;

pub const SCENARIO_FILE: &str = "scenario.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Latest state: the snapshot if it is current, otherwise a replay of the event log.
    pub fn load(&self) -> Result<Option<ScenarioState>> {
        let scenario = self.path(SCENARIO_FILE);
        if !scenario.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
        let config = ScenarioConfig::from_json(&text).with_context(|| scenario.display().to_string())?;
        let events = self.read_events()?;
        let snapshot = self.path(SNAPSHOT_FILE);
        if snapshot.exists() {
            let state = ScenarioState::from_snapshot_json(&fs::read_to_string(&snapshot)?)
                .with_context(|| snapshot.display().to_string())?;
            if state.event_log.len() == events.len() {
                return Ok(Some(state));
            }
        }
        let state = replay(config, events.into_iter().map(|r| r.batch))?;
        Ok(Some(state))
    }

    pub fn read_events(&self) -> Result<Vec<TickReport>> {
        let path = self.path(EVENTS_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
        }
        Ok(out)
    }

    /// Starts a fresh directory for `state`, replacing any earlier contents.
    pub fn initialize(&self, state: &ScenarioState) -> Result<()> {
        write_atomic(&self.path(SCENARIO_FILE), state.config.to_json().as_bytes())?;
        self.write_events(state)?;
        self.write_snapshot(state)
    }

    pub fn write_events(&self, state: &ScenarioState) -> Result<()> {
        let mut buf = Vec::new();
        for r in &state.event_log {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        write_atomic(&self.path(EVENTS_FILE), &buf)
    }

    pub fn write_snapshot(&self, state: &ScenarioState) -> Result<()> {
        write_atomic(&self.path(SNAPSHOT_FILE), state.to_snapshot_json().as_bytes())
    }

    /// Appends the newest tick report and refreshes the snapshot.
    pub fn record_commit(&self, state: &ScenarioState) -> Result<()> {
        let report = state.event_log.last().context("no committed tick to record")?;
        let mut line = serde_json::to_vec(report)?;
        line.push(b'\n');
        let path = self.path(EVENTS_FILE);
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        f.write_all(&line)?;
        f.sync_data()?;
        self.write_snapshot(state)
    }
}
