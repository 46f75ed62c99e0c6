use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque entity identifier; only equality and ordering carry meaning.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

/// Unordered entity pair stored canonically with `low < high`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(EntityId, EntityId)", into = "(EntityId, EntityId)")]
pub struct Pair {
    low: EntityId,
    high: EntityId,
}

impl Pair {
    pub fn new(a: impl Into<EntityId>, b: impl Into<EntityId>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Pair { low: a, high: b }),
            std::cmp::Ordering::Greater => Ok(Pair { low: b, high: a }),
            std::cmp::Ordering::Equal => Err(Error::SelfLoop(a.0)),
        }
    }

    pub fn low(&self) -> &EntityId {
        &self.low
    }

    pub fn high(&self) -> &EntityId {
        &self.high
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        &self.low == id || &self.high == id
    }

    pub fn other(&self, id: &EntityId) -> Option<&EntityId> {
        if &self.low == id {
            Some(&self.high)
        } else if &self.high == id {
            Some(&self.low)
        } else {
            None
        }
    }
}

impl TryFrom<(EntityId, EntityId)> for Pair {
    type Error = Error;

    fn try_from((a, b): (EntityId, EntityId)) -> Result<Self> {
        Pair::new(a, b)
    }
}

impl From<Pair> for (EntityId, EntityId) {
    fn from(p: Pair) -> Self {
        (p.low, p.high)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.low, self.high)
    }
}

/// Serializes pair-keyed maps as `[[pair, value], ...]`, since JSON keys must be strings.
pub mod pair_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Pair;

    pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<Pair, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Pair, V>, D::Error> {
        Ok(Vec::<(Pair, V)>::deserialize(d)?.into_iter().collect())
    }
}
