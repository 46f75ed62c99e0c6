//! JSON model documents for the threat-state filters.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{HoldingTime, StateBelief, TaskModel, ThreatStateSpace, TransitionModel, TransitionSpec};

pub const MODEL_VERSION: u32 = 1;

fn default_cap() -> usize {
    crate::state::DEFAULT_DURATION_CAP
}

/// Serialized threat-state model. States are referred to by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub version: u32,
    pub states: Vec<String>,
    #[serde(default)]
    pub absorbing: Vec<String>,
    pub embedded: Vec<Vec<f64>>,
    #[serde(default)]
    pub holding: Vec<Vec<Option<HoldingTime>>>,
    #[serde(default = "default_cap")]
    pub duration_cap: usize,
    pub tasks: TaskModel,
    /// Marginal over states at the time an entity enters monitoring.
    pub initial: Vec<f64>,
}

/// A validated model ready for filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct CompiledModel {
    spec: ModelSpec,
    transition: TransitionModel,
}

impl TryFrom<ModelSpec> for CompiledModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        CompiledModel::compile(spec, "model")
    }
}

impl From<CompiledModel> for ModelSpec {
    fn from(m: CompiledModel) -> Self {
        m.spec
    }
}

impl CompiledModel {
    /// Validates `spec`; errors name the offending field under `path`.
    pub fn compile(spec: ModelSpec, path: &str) -> Result<Self> {
        if spec.version != MODEL_VERSION {
            return Err(Error::schema(
                format!("{path}.version"),
                format!("unsupported model version {} (expected {MODEL_VERSION})", spec.version),
            ));
        }
        let at = |field: &'static str| move |e: Error| Error::schema(format!("{path}.{field}"), e.to_string());
        let names: Vec<&str> = spec.states.iter().map(String::as_str).collect();
        let absorbing = ThreatStateSpace::new(names.iter().copied(), [])
            .and_then(|s| s.resolve(spec.absorbing.iter().map(String::as_str)))
            .map_err(at("absorbing"))?;
        let space = ThreatStateSpace::new(names, absorbing).map_err(at("states"))?;
        let transition = TransitionModel::new(TransitionSpec {
            space: space.clone(),
            embedded: spec.embedded.clone(),
            holding: spec.holding.clone(),
            duration_cap: spec.duration_cap,
        })
        .map_err(at("embedded"))?;
        spec.tasks.validate(&space).map_err(at("tasks"))?;
        StateBelief::from_marginal(&spec.initial, spec.duration_cap).map_err(at("initial"))?;
        if spec.initial.len() != space.len() {
            return Err(Error::schema(format!("{path}.initial"), format!("expected {} entries", space.len())));
        }
        Ok(Self { spec, transition })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn transition(&self) -> &TransitionModel {
        &self.transition
    }

    pub fn tasks(&self) -> &TaskModel {
        &self.spec.tasks
    }

    pub fn space(&self) -> &ThreatStateSpace {
        self.transition.space()
    }

    pub fn num_states(&self) -> usize {
        self.transition.num_states()
    }

    pub fn num_tasks(&self) -> usize {
        self.spec.tasks.num_tasks()
    }

    pub fn duration_cap(&self) -> usize {
        self.transition.duration_cap()
    }

    /// Belief for an entity entering monitoring, stamped with `tick`.
    pub fn initial_belief(&self, tick: u64) -> StateBelief {
        let mut b = StateBelief::from_marginal(&self.spec.initial, self.duration_cap()).expect("validated at compile");
        b.tick = tick;
        b
    }

    pub fn resolve_states(&self, names: &[String], path: &str) -> Result<BTreeSet<usize>> {
        self.space().resolve(names.iter().map(String::as_str)).map_err(|e| Error::schema(path, e.to_string()))
    }
}
