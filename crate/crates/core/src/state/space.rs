use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of threat states; indices are positions in `states`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatStateSpace {
    states: Vec<String>,
    absorbing: BTreeSet<usize>,
}

impl ThreatStateSpace {
    pub fn new<S: Into<String>>(
        states: impl IntoIterator<Item = S>,
        absorbing: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        let absorbing: BTreeSet<usize> = absorbing.into_iter().collect();
        if states.len() < 2 {
            return Err(Error::InvalidModel(format!(
                "a state space needs at least 2 states, got {}",
                states.len()
            )));
        }
        let unique: BTreeSet<&str> = states.iter().map(String::as_str).collect();
        if unique.len() != states.len() {
            return Err(Error::InvalidModel("state names must be unique".into()));
        }
        if let Some(&bad) = absorbing.iter().find(|&&i| i >= states.len()) {
            return Err(Error::InvalidModel(format!("absorbing index {bad} out of range")));
        }
        Ok(Self { states, absorbing })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.states
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.states.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn is_absorbing(&self, index: usize) -> bool {
        self.absorbing.contains(&index)
    }

    pub fn absorbing(&self) -> &BTreeSet<usize> {
        &self.absorbing
    }

    /// Resolves state names to a sorted index set.
    pub fn resolve<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<BTreeSet<usize>> {
        names
            .into_iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown state '{n}'")))
            })
            .collect()
    }
}
