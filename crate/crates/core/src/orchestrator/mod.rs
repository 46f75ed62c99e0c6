//! Tick commits across every filter of a scenario.
//!
//! A commit runs in fixed phases: population additions and edge creation,
//! edge discount/predict/update, per-entity filters, per-cell filters,
//! indicators, removals, and finally the event-log entry. All work happens on
//! a copy of the state, which replaces the original only when every phase
//! succeeds.

mod batch;
mod whatif;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use batch::{CommRecord, EdgeEvent, TickBatch};
pub use whatif::{what_if, Intervention, WhatIfReport};

use crate::edge::{evolve_prior, posterior_update, predictive_log_likelihood, ObservationVector, PredictiveTerm};
use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, OriginClass, PopulationGraph};
use crate::ids::{EntityId, Pair};
use crate::indicators::{cell_report, IndicatorReport};
use crate::model::CompiledModel;
use crate::scenario::{PriorSpec, ScenarioConfig};
use crate::state::{filter_tick, SignalVector, StateBelief};

pub const SNAPSHOT_VERSION: u32 = 1;

/// What happened to one edge during a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTick {
    pub pair: Pair,
    /// Belief after discounting, before this tick's data.
    pub prior: (f64, f64),
    pub posterior: (f64, f64),
    /// Discount applied at the start of the tick; absent on the creation tick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    pub monitored: bool,
    pub created: bool,
    /// Predictive log likelihood of this tick's data; absent when unobserved or the prior is improper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<PredictiveTerm>,
}

/// Event-log entry for one committed tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub tick: u64,
    pub batch: TickBatch,
    /// Network log marginal likelihood contributed by this tick.
    pub log_likelihood: f64,
    pub edges: Vec<EdgeTick>,
    pub auto_created: Vec<Pair>,
    pub archived: Vec<Pair>,
    pub entity_log_evidence: BTreeMap<EntityId, f64>,
    pub entity_marginals: BTreeMap<EntityId, Vec<f64>>,
    pub cell_marginals: BTreeMap<String, Vec<f64>>,
    pub indicators: Vec<IndicatorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioState {
    pub config: ScenarioConfig,
    pub graph: PopulationGraph,
    pub entity_beliefs: BTreeMap<EntityId, StateBelief>,
    /// Model name per live entity.
    pub entity_models: BTreeMap<EntityId, String>,
    pub cell_beliefs: BTreeMap<String, StateBelief>,
    pub tick: u64,
    /// Running network log marginal likelihood.
    pub log_likelihood: f64,
    pub event_log: Vec<TickReport>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    state: ScenarioState,
}

impl ScenarioState {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let t0 = config.start_tick;
        let mut graph = PopulationGraph::new(t0);
        graph.add_entities(config.entities.iter().map(|e| &e.id), t0)?;
        let mut entity_beliefs = BTreeMap::new();
        let mut entity_models = BTreeMap::new();
        for e in &config.entities {
            let name = config.entity_model_name(&e.id);
            entity_beliefs.insert(e.id.clone(), config.model(Some(&name), "entities")?.initial_belief(t0));
            entity_models.insert(e.id.clone(), name);
        }
        for e in &config.edges {
            let prior = e.prior.unwrap_or_else(|| config.edge_priors.for_origin(e.origin));
            graph.add_edge(e.origin, t0 + 1, config.discount.belief(e.pair.clone(), prior)?)?;
        }
        let mut cell_beliefs = BTreeMap::new();
        for (i, c) in config.cells.iter().enumerate() {
            let cell = config.cell(c, &format!("cells[{i}]"))?;
            graph.add_cell(cell, c.require_connected)?;
            cell_beliefs.insert(c.id.clone(), config.cell_model(c)?.initial_belief(t0));
        }
        Ok(Self {
            config,
            graph,
            entity_beliefs,
            entity_models,
            cell_beliefs,
            tick: t0,
            log_likelihood: 0.0,
            event_log: Vec::new(),
        })
    }

    pub fn entity_model(&self, id: &EntityId) -> Result<&CompiledModel> {
        let name = self.entity_models.get(id).ok_or_else(|| Error::UnknownEntity(id.to_string()))?;
        self.config.model(Some(name), "entities")
    }

    pub fn cell_model(&self, id: &str) -> Result<&CompiledModel> {
        let spec = self.config.cells.iter().find(|c| c.id == id).ok_or_else(|| Error::UnknownCell(id.to_owned()))?;
        self.config.cell_model(spec)
    }

    /// Commits `batch` in place; on error the state is left untouched.
    pub fn commit(&mut self, batch: TickBatch) -> Result<&TickReport> {
        let next = commit_tick(self, batch)?;
        *self = next;
        Ok(self.event_log.last().expect("commit appends a report"))
    }

    /// Latest indicator report per cell.
    pub fn latest_indicators(&self) -> Vec<IndicatorReport> {
        self.event_log.last().map(|r| r.indicators.clone()).unwrap_or_default()
    }

    /// Indicator reports for one cell over all committed ticks.
    pub fn indicator_series(&self, cell: &str) -> Vec<&IndicatorReport> {
        self.event_log.iter().flat_map(|r| r.indicators.iter().filter(|i| i.cell == cell)).collect()
    }

    /// Indicators for the current state without committing anything.
    pub fn current_indicators(&self) -> Result<Vec<IndicatorReport>> {
        self.graph
            .cells()
            .map(|cell| cell_report(&self.graph, cell, &self.cell_beliefs[&cell.id], &self.entity_beliefs, self.tick))
            .collect()
    }

    pub fn to_snapshot_json(&self) -> String {
        serde_json::to_string(&Snapshot { version: SNAPSHOT_VERSION, state: self.clone() }).expect("state serializes")
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == SNAPSHOT_VERSION as u64 => {}
            other => return Err(Error::schema("version", format!("unsupported snapshot version {other:?}"))),
        }
        let snap: Snapshot = serde_json::from_value(value).map_err(|e| Error::schema("state", e.to_string()))?;
        Ok(snap.state)
    }
}

fn signal_for(state: &ScenarioState, batch: &TickBatch, id: &EntityId) -> Result<SignalVector> {
    let tasks = state.entity_model(id)?.tasks();
    let r = tasks.num_tasks();
    let explicit = batch.signals.get(id);
    let activity = batch.activity.get(id);
    match (explicit, activity) {
        (Some(_), Some(_)) => Err(Error::InvalidArgument(format!("entity {id} has both signals and activity records"))),
        (Some(values), None) => {
            if values.len() != r {
                return Err(Error::InvalidArgument(format!("entity {id}: expected {r} signal slots, got {}", values.len())));
            }
            Ok(SignalVector { values: values.clone(), tick: batch.tick })
        }
        (None, Some(records)) => {
            if let Some(j) = records.keys().find(|j| **j >= r) {
                return Err(Error::InvalidArgument(format!("entity {id}: unknown task {j}")));
            }
            Ok(tasks.extract(records, batch.tick))
        }
        (None, None) => Ok(SignalVector::missing(r, batch.tick)),
    }
}

fn step_edge(record: &EdgeRecord, obs: Option<&ObservationVector>, tick: u64, state: &ScenarioState) -> Result<EdgeTick> {
    let created = record.created == tick;
    let (prior, discount) = if created {
        (record.belief.clone(), None)
    } else {
        let d = record.belief.discount_factor();
        (evolve_prior(&record.belief, d)?, Some(d))
    };
    let channels = &state.config.channels;
    let mut out = EdgeTick {
        pair: record.pair().clone(),
        prior: (prior.alpha, prior.beta),
        posterior: (prior.alpha, prior.beta),
        discount,
        monitored: false,
        created,
        log_likelihood: None,
        terms: Vec::new(),
    };
    if let Some(obs) = obs.filter(|o| o.monitored) {
        if prior.is_proper() {
            let p = predictive_log_likelihood(&prior, obs, channels)?;
            out.log_likelihood = Some(p.log_likelihood);
            out.terms = p.terms;
        }
        let post = posterior_update(&prior, obs, channels)?;
        out.posterior = (post.alpha, post.beta);
        out.monitored = true;
    }
    Ok(out)
}

/// Applies one tick to a copy of `state` and returns the new state.
pub fn commit_tick(state: &ScenarioState, batch: TickBatch) -> Result<ScenarioState> {
    let tick = state.tick + 1;
    if batch.tick != tick {
        return Err(Error::TickMismatch { expected: tick, got: batch.tick });
    }
    let mut next = state.clone();
    let cfg = &state.config;

    // Phase 1: additions and edge creation.
    next.graph.add_entities(&batch.population.additions, tick)?;
    for id in &batch.population.additions {
        let name = cfg.entity_model_name(id);
        next.entity_beliefs.insert(id.clone(), cfg.model(Some(&name), "entities")?.initial_belief(state.tick));
        next.entity_models.insert(id.clone(), name);
    }
    if let Some(id) = batch.population.removals.iter().find(|id| !next.graph.contains(id)) {
        return Err(Error::UnknownEntity(id.to_string()));
    }
    let mut events: Vec<&EdgeEvent> = batch.edges.iter().collect();
    events.sort_by(|a, b| a.pair.cmp(&b.pair));
    for ev in events {
        let prior = ev.prior.unwrap_or_else(|| cfg.edge_priors.for_origin(ev.origin));
        next.graph.add_edge(ev.origin, tick, cfg.discount.belief(ev.pair.clone(), prior)?)?;
    }
    let observations = batch.resolve_observations(&cfg.channels)?;
    let mut auto_created = Vec::new();
    for (pair, obs) in &observations {
        if next.graph.has_edge(pair) || !(obs.monitored && obs.has_activity()) {
            continue;
        }
        let prior: PriorSpec = cfg.edge_priors.for_auto();
        next.graph.add_edge(OriginClass::ObservedCommunication, tick, cfg.discount.belief(pair.clone(), prior)?)?;
        auto_created.push(pair.clone());
    }

    // Phase 2: edges, independently of one another.
    let live: Vec<&EdgeRecord> = next.graph.edges().collect();
    let edge_ticks: Vec<EdgeTick> = live
        .par_iter()
        .map(|rec| step_edge(rec, observations.get(rec.pair()), tick, &next))
        .collect::<Result<_>>()?;
    let mut log_likelihood = 0.0;
    for et in &edge_ticks {
        let rec = next.graph.edge_mut(&et.pair).expect("edge listed above");
        rec.belief.alpha = et.posterior.0;
        rec.belief.beta = et.posterior.1;
        rec.belief.last_observed_effort = match observations.get(&et.pair).filter(|o| o.monitored) {
            Some(o) => o.effort(&cfg.channels)?,
            None => 0.0,
        };
        if let Some(ll) = et.log_likelihood {
            log_likelihood += ll;
        }
    }

    // Phase 3: entity filters.
    if let Some(id) = batch.signals.keys().chain(batch.activity.keys()).find(|id| !next.graph.contains(id)) {
        return Err(Error::UnknownEntity(id.to_string()));
    }
    let ids: Vec<&EntityId> = next.graph.entity_ids().collect();
    let signals: BTreeMap<EntityId, SignalVector> =
        ids.iter().map(|id| Ok(((*id).clone(), signal_for(&next, &batch, id)?))).collect::<Result<_>>()?;
    let entity_updates: Vec<(EntityId, StateBelief, f64)> = ids
        .par_iter()
        .map(|id| {
            let model = next.entity_model(id)?;
            let (b, ev) = filter_tick(&next.entity_beliefs[*id], model.transition(), model.tasks(), &signals[*id])?;
            Ok(((*id).clone(), b, ev))
        })
        .collect::<Result<_>>()?;
    let mut entity_log_evidence = BTreeMap::new();
    for (id, b, ev) in entity_updates {
        next.entity_beliefs.insert(id.clone(), b);
        entity_log_evidence.insert(id, ev);
    }

    // Phase 4: cell filters on the fused member signals.
    let cells: Vec<(String, BTreeSet<EntityId>)> = next.graph.cells().map(|c| (c.id.clone(), c.members.clone())).collect();
    let cell_updates: Vec<(String, StateBelief)> = cells
        .par_iter()
        .map(|(id, members)| {
            let model = next.cell_model(id)?;
            let z = SignalVector::fuse_max(members.iter().filter_map(|m| signals.get(m)), model.num_tasks(), tick);
            let (b, _) = filter_tick(&next.cell_beliefs[id], model.transition(), model.tasks(), &z)?;
            Ok((id.clone(), b))
        })
        .collect::<Result<_>>()?;
    for (id, b) in cell_updates {
        next.cell_beliefs.insert(id, b);
    }

    // Phase 5: indicators.
    next.graph.tick = tick;
    next.tick = tick;
    let cell_refs: Vec<_> = next.graph.cells().collect();
    let indicators: Vec<IndicatorReport> = cell_refs
        .par_iter()
        .map(|cell| cell_report(&next.graph, cell, &next.cell_beliefs[&cell.id], &next.entity_beliefs, tick))
        .collect::<Result<_>>()?;

    // Phase 6: removals at the end of the tick.
    let before: BTreeSet<Pair> = next.graph.edges().map(|e| e.pair().clone()).collect();
    next.graph.remove_entities(&batch.population.removals, tick)?;
    for id in &batch.population.removals {
        next.entity_beliefs.remove(id);
        next.entity_models.remove(id);
    }
    let archived: Vec<Pair> = before.into_iter().filter(|p| !next.graph.has_edge(p)).collect();

    // Phase 7: event log.
    next.log_likelihood += log_likelihood;
    let report = TickReport {
        tick,
        entity_marginals: next.entity_beliefs.iter().map(|(id, b)| (id.clone(), b.marginal())).collect(),
        cell_marginals: next.cell_beliefs.iter().map(|(id, b)| (id.clone(), b.marginal())).collect(),
        batch,
        log_likelihood,
        edges: edge_ticks,
        auto_created,
        archived,
        entity_log_evidence,
        indicators,
    };
    next.event_log.push(report);
    Ok(next)
}

/// Network log marginal likelihood over all committed ticks, summed from the event log.
pub fn joint_log_marginal_likelihood(state: &ScenarioState) -> f64 {
    state.event_log.iter().map(|r| r.log_likelihood).sum()
}

/// Builds a scenario and commits every batch in order.
pub fn replay(config: ScenarioConfig, batches: impl IntoIterator<Item = TickBatch>) -> Result<ScenarioState> {
    let mut state = ScenarioState::new(config)?;
    for b in batches {
        state.commit(b)?;
    }
    Ok(state)
}
