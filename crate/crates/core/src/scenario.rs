//! Scenario documents: models, channels, priors, initial population and cells.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::edge::{ChannelSpec, DiscountMode, EdgeBelief};
use crate::error::{Error, Result};
use crate::graph::{Cell, OriginClass};
use crate::ids::{EntityId, Pair};
use crate::model::CompiledModel;

pub const SCENARIO_VERSION: u32 = 1;
pub const INDIVIDUAL_MODEL: &str = "individual";
pub const CELL_MODEL: &str = "cell";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKeyword {
    /// Start from an improper Gamma(0, 0) so the first posterior is the first tick's data.
    Empirical,
}

/// Starting belief for a new edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Keyword(PriorKeyword),
    Gamma { alpha: f64, beta: f64 },
}

impl PriorSpec {
    pub const EMPIRICAL: PriorSpec = PriorSpec::Keyword(PriorKeyword::Empirical);

    pub fn params(&self) -> (f64, f64) {
        match *self {
            PriorSpec::Keyword(PriorKeyword::Empirical) => (0.0, 0.0),
            PriorSpec::Gamma { alpha, beta } => (alpha, beta),
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let (a, b) = self.params();
        if let PriorSpec::Gamma { .. } = self {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::schema(path, format!("gamma prior needs alpha, beta > 0 (got {a}, {b})")));
            }
        }
        Ok(())
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Gamma { alpha: 0.70, beta: 1.41 }
    }
}

/// Priors by edge origin. `auto` covers edges created by a first observed communication.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgePriors {
    #[serde(default)]
    pub default: PriorSpec,
    #[serde(default)]
    pub by_origin: BTreeMap<OriginClass, PriorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto: Option<PriorSpec>,
}

impl EdgePriors {
    pub fn for_origin(&self, origin: OriginClass) -> PriorSpec {
        self.by_origin.get(&origin).copied().unwrap_or(self.default)
    }

    pub fn for_auto(&self) -> PriorSpec {
        self.auto.unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountConfig {
    Fixed { delta: f64 },
    Adaptive { baseline: f64 },
}

impl Default for DiscountConfig {
    fn default() -> Self {
        DiscountConfig::Fixed { delta: 0.7 }
    }
}

impl DiscountConfig {
    pub fn baseline(&self) -> f64 {
        match *self {
            DiscountConfig::Fixed { delta } => delta,
            DiscountConfig::Adaptive { baseline } => baseline,
        }
    }

    pub fn mode(&self) -> DiscountMode {
        match *self {
            DiscountConfig::Fixed { delta } => DiscountMode::Fixed { delta },
            DiscountConfig::Adaptive { .. } => DiscountMode::Adaptive,
        }
    }

    pub fn belief(&self, pair: Pair, prior: PriorSpec) -> Result<EdgeBelief> {
        let (alpha, beta) = prior.params();
        EdgeBelief::new(pair, alpha, beta, self.baseline(), self.mode())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub id: EntityId,
    /// Name of the entry in `models`; defaults to the individual model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub pair: Pair,
    pub origin: OriginClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub id: String,
    pub members: BTreeSet<EntityId>,
    pub ideal_size: f64,
    pub threshold: f64,
    pub member_threat_states: Vec<String>,
    pub cell_threat_states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Reject the cell when its members are not yet connected.
    #[serde(default = "yes")]
    pub require_connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Tick of the initial state; the first batch is `start_tick + 1`.
    #[serde(default)]
    pub start_tick: u64,
    pub models: BTreeMap<String, CompiledModel>,
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub discount: DiscountConfig,
    #[serde(default)]
    pub edge_priors: EdgePriors,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
    /// Edges known before the first tick; they hold their prior through the first tick.
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub cells: Vec<CellSpec>,
}

impl ScenarioConfig {
    /// Parses and validates a scenario document, naming the offending path on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("version").ok_or_else(|| Error::schema("version", "missing field"))?;
        if version.as_u64() != Some(SCENARIO_VERSION as u64) {
            return Err(Error::schema("version", format!("unsupported scenario version {version}")));
        }
        if let Some(models) = value.get("models").and_then(|m| m.as_object()) {
            for (name, spec) in models {
                let spec: crate::model::ModelSpec = serde_json::from_value(spec.clone())
                    .map_err(|e| Error::schema(format!("models.{name}"), e.to_string()))?;
                CompiledModel::compile(spec, &format!("models.{name}"))?;
            }
        }
        let cfg: ScenarioConfig = serde_json::from_value(value).map_err(|e| Error::schema("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::schema("version", format!("unsupported scenario version {}", self.version)));
        }
        let individual = self.model(None, "models")?;
        let mut seen = BTreeSet::new();
        for (i, c) in self.channels.iter().enumerate() {
            c.validate().map_err(|e| Error::schema(format!("channels[{i}]"), e.to_string()))?;
            if !seen.insert(c.id) {
                return Err(Error::schema(format!("channels[{i}].id"), format!("duplicate channel {}", c.id)));
            }
        }
        let d = self.discount.baseline();
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::schema("discount", format!("discount {d} outside (0, 1]")));
        }
        self.edge_priors.default.validate("edge_priors.default")?;
        for (o, p) in &self.edge_priors.by_origin {
            p.validate(&format!("edge_priors.by_origin.{o:?}"))?;
        }
        if let Some(p) = &self.edge_priors.auto {
            p.validate("edge_priors.auto")?;
        }
        let mut ids = BTreeSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            if !ids.insert(&e.id) {
                return Err(Error::schema(format!("entities[{i}].id"), format!("duplicate entity {}", e.id)));
            }
            let m = self.model(e.model.as_deref(), &format!("entities[{i}].model"))?;
            if m.num_tasks() != individual.num_tasks() {
                return Err(Error::schema(
                    format!("entities[{i}].model"),
                    "every entity model needs the same task list as the individual model",
                ));
            }
        }
        let mut pairs = BTreeSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            for end in [e.pair.low(), e.pair.high()] {
                if !ids.contains(end) {
                    return Err(Error::schema(format!("edges[{i}].pair"), format!("unknown entity {end}")));
                }
            }
            if !pairs.insert(&e.pair) {
                return Err(Error::schema(format!("edges[{i}].pair"), format!("duplicate edge {}", e.pair)));
            }
            if let Some(p) = &e.prior {
                p.validate(&format!("edges[{i}].prior"))?;
            }
        }
        for (i, c) in self.cells.iter().enumerate() {
            let path = format!("cells[{i}]");
            if let Some(m) = c.members.iter().find(|m| !ids.contains(m)) {
                return Err(Error::schema(format!("{path}.members"), format!("unknown entity {m}")));
            }
            let cm = self.cell_model(c)?;
            if cm.num_tasks() != individual.num_tasks() {
                return Err(Error::schema(
                    format!("{path}.model"),
                    "the cell model needs the same task list as the individual model",
                ));
            }
            self.cell(c, &path)?.validate().map_err(|e| Error::schema(&path, e.to_string()))?;
        }
        Ok(())
    }

    /// Looks up a model by name; `None` selects the individual model.
    pub fn model(&self, name: Option<&str>, path: &str) -> Result<&CompiledModel> {
        let name = name.unwrap_or(INDIVIDUAL_MODEL);
        self.models.get(name).ok_or_else(|| Error::schema(path, format!("no model named {name:?}")))
    }

    pub fn cell_model(&self, c: &CellSpec) -> Result<&CompiledModel> {
        match &c.model {
            Some(name) => self.model(Some(name), "cells.model"),
            None if self.models.contains_key(CELL_MODEL) => self.model(Some(CELL_MODEL), "cells.model"),
            None => self.model(None, "cells.model"),
        }
    }

    pub fn entity_model_name(&self, id: &EntityId) -> String {
        self.entities
            .iter()
            .find(|e| &e.id == id)
            .and_then(|e| e.model.clone())
            .unwrap_or_else(|| INDIVIDUAL_MODEL.to_owned())
    }

    /// Resolves a cell spec against its model and the individual model.
    pub fn cell(&self, c: &CellSpec, path: &str) -> Result<Cell> {
        let individual = self.model(None, path)?;
        let cm = self.cell_model(c)?;
        Ok(Cell {
            id: c.id.clone(),
            members: c.members.clone(),
            ideal_size: c.ideal_size,
            threshold: c.threshold,
            member_threat_set: individual.resolve_states(&c.member_threat_states, &format!("{path}.member_threat_states"))?,
            cell_threat_set: cm.resolve_states(&c.cell_threat_states, &format!("{path}.cell_threat_states"))?,
            connected: false,
        })
    }
}
