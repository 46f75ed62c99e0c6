//! Open population of monitored entities, their enduring ties, and cells.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::edge::EdgeBelief;
use crate::error::{Error, Result};
use crate::ids::{EntityId, Pair};

/// Why an edge exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginClass {
    Kinship,
    Affiliation,
    PriorCrime,
    ObservedCommunication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entered: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exited: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub created: u64,
    pub origin: OriginClass,
    pub belief: EdgeBelief,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archived: Option<u64>,
}

impl EdgeRecord {
    pub fn pair(&self) -> &Pair {
        &self.belief.pair
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub members: BTreeSet<EntityId>,
    /// Size the authorities expect for this kind of attack.
    pub ideal_size: f64,
    /// Communication rate each pair is expected to exceed.
    pub threshold: f64,
    /// Threat states for members' individual filters.
    pub member_threat_set: BTreeSet<usize>,
    /// Threat states for the cell's own filter.
    pub cell_threat_set: BTreeSet<usize>,
    /// False when the members no longer induce a connected subgraph.
    pub connected: bool,
}

impl Cell {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidModel(format!("cell {} has no members", self.id)));
        }
        if !(self.ideal_size > 0.0 && self.ideal_size.is_finite()) {
            return Err(Error::InvalidModel(format!("cell {}: ideal size must be positive", self.id)));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidModel(format!("cell {}: threshold must be >= 0", self.id)));
        }
        Ok(())
    }
}

/// One tick's entries and exits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationDelta {
    #[serde(default)]
    pub additions: BTreeSet<EntityId>,
    #[serde(default)]
    pub removals: BTreeSet<EntityId>,
}

impl PopulationDelta {
    pub fn is_empty(&self) -> bool {
        self.additions.is_empty() && self.removals.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationGraph {
    pub tick: u64,
    entities: BTreeMap<EntityId, EntityRecord>,
    /// Earlier stays of entities that left, in exit order.
    #[serde(default)]
    departed: Vec<(EntityId, EntityRecord)>,
    #[serde(with = "crate::ids::pair_map")]
    edges: BTreeMap<Pair, EdgeRecord>,
    #[serde(default)]
    archived: Vec<EdgeRecord>,
    #[serde(default)]
    cells: BTreeMap<String, Cell>,
}

impl PopulationGraph {
    pub fn new(tick: u64) -> Self {
        Self { tick, ..Default::default() }
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = (&EntityId, &EntityRecord)> {
        self.entities.iter()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.keys()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn departed(&self) -> &[(EntityId, EntityRecord)] {
        &self.departed
    }

    pub fn edges(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.edges.values()
    }

    pub fn edge(&self, pair: &Pair) -> Option<&EdgeRecord> {
        self.edges.get(pair)
    }

    pub fn edge_mut(&mut self, pair: &Pair) -> Option<&mut EdgeRecord> {
        self.edges.get_mut(pair)
    }

    pub fn has_edge(&self, pair: &Pair) -> bool {
        self.edges.contains_key(pair)
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn archived_edges(&self) -> &[EdgeRecord] {
        &self.archived
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn cell(&self, id: &str) -> Result<&Cell> {
        self.cells.get(id).ok_or_else(|| Error::UnknownCell(id.to_owned()))
    }

    pub fn cell_mut(&mut self, id: &str) -> Result<&mut Cell> {
        self.cells.get_mut(id).ok_or_else(|| Error::UnknownCell(id.to_owned()))
    }

    pub fn add_entities<'a>(&mut self, additions: impl IntoIterator<Item = &'a EntityId>, tick: u64) -> Result<()> {
        for id in additions {
            if self.entities.contains_key(id) {
                return Err(Error::DuplicateEntity(id.to_string()));
            }
            self.entities.insert(id.clone(), EntityRecord { entered: tick, exited: None });
        }
        Ok(())
    }

    /// Drops entities, archives their incident edges, and re-checks affected cells.
    pub fn remove_entities<'a>(&mut self, removals: impl IntoIterator<Item = &'a EntityId>, tick: u64) -> Result<()> {
        let removals: BTreeSet<&EntityId> = removals.into_iter().collect();
        if let Some(id) = removals.iter().find(|id| !self.entities.contains_key(**id)) {
            return Err(Error::UnknownEntity(id.to_string()));
        }
        for id in &removals {
            let mut rec = self.entities.remove(*id).expect("checked above");
            rec.exited = Some(tick);
            self.departed.push(((*id).clone(), rec));
        }
        let gone: Vec<Pair> = self
            .edges
            .keys()
            .filter(|p| removals.contains(p.low()) || removals.contains(p.high()))
            .cloned()
            .collect();
        for pair in gone {
            let mut rec = self.edges.remove(&pair).expect("listed above");
            rec.archived = Some(tick);
            self.archived.push(rec);
        }
        let touched: Vec<String> = self
            .cells
            .values()
            .filter(|c| c.members.iter().any(|m| removals.contains(m)))
            .map(|c| c.id.clone())
            .collect();
        for id in touched {
            let mut members = self.cells[&id].members.clone();
            members.retain(|m| !removals.contains(m));
            let ok = !members.is_empty() && self.connected(&members);
            let cell = self.cells.get_mut(&id).expect("listed above");
            cell.members = members;
            cell.connected = ok;
        }
        Ok(())
    }

    pub fn add_edge(&mut self, origin: OriginClass, tick: u64, belief: EdgeBelief) -> Result<()> {
        let pair = belief.pair.clone();
        for end in [pair.low(), pair.high()] {
            if !self.contains(end) {
                return Err(Error::UnknownEntity(end.to_string()));
            }
        }
        if self.edges.contains_key(&pair) {
            return Err(Error::DuplicateEdge(pair.to_string()));
        }
        self.edges.insert(pair, EdgeRecord { created: tick, origin, belief, archived: None });
        Ok(())
    }

    /// Archives one edge without removing its endpoints.
    pub fn sever_edge(&mut self, pair: &Pair, tick: u64) -> Result<()> {
        let mut rec = self.edges.remove(pair).ok_or_else(|| Error::UnknownEdge(pair.to_string()))?;
        rec.archived = Some(tick);
        self.archived.push(rec);
        for id in self.cells.keys().cloned().collect::<Vec<_>>() {
            let ok = self.connected(&self.cells[&id].members);
            self.cells.get_mut(&id).expect("present").connected = ok;
        }
        Ok(())
    }

    /// Registers a cell; `require_connected` rejects members that do not induce a connected subgraph.
    pub fn add_cell(&mut self, mut cell: Cell, require_connected: bool) -> Result<()> {
        cell.validate()?;
        if self.cells.contains_key(&cell.id) {
            return Err(Error::InvalidModel(format!("duplicate cell {}", cell.id)));
        }
        if let Some(m) = cell.members.iter().find(|m| !self.contains(m)) {
            return Err(Error::UnknownEntity(m.to_string()));
        }
        cell.connected = self.connected(&cell.members);
        if require_connected && !cell.connected {
            return Err(Error::DisconnectedCell { cell: cell.id });
        }
        self.cells.insert(cell.id.clone(), cell);
        Ok(())
    }

    pub fn set_cell_members(&mut self, id: &str, members: BTreeSet<EntityId>) -> Result<()> {
        if let Some(m) = members.iter().find(|m| !self.contains(m)) {
            return Err(Error::UnknownEntity(m.to_string()));
        }
        if members.is_empty() || !self.connected(&members) {
            return Err(Error::DisconnectedCell { cell: id.to_owned() });
        }
        let cell = self.cell_mut(id)?;
        cell.members = members;
        cell.connected = true;
        Ok(())
    }

    /// Refreshes every cell's connectivity flag against the live edges.
    pub fn refresh_connectivity(&mut self) {
        let flags: Vec<(String, bool)> =
            self.cells.values().map(|c| (c.id.clone(), !c.members.is_empty() && self.connected(&c.members))).collect();
        for (id, ok) in flags {
            self.cells.get_mut(&id).expect("present").connected = ok;
        }
    }

    /// Live edges with both endpoints in `members`.
    pub fn induced_edges<'a>(&'a self, members: &'a BTreeSet<EntityId>) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        self.edges.values().filter(move |e| members.contains(e.pair().low()) && members.contains(e.pair().high()))
    }

    /// Breadth-first connectivity of the subgraph induced by `members`.
    pub fn connected(&self, members: &BTreeSet<EntityId>) -> bool {
        let Some(start) = members.iter().next() else {
            return false;
        };
        let mut adj: BTreeMap<&EntityId, Vec<&EntityId>> = BTreeMap::new();
        for e in self.induced_edges(members) {
            adj.entry(e.pair().low()).or_default().push(e.pair().high());
            adj.entry(e.pair().high()).or_default().push(e.pair().low());
        }
        let mut seen: BTreeSet<&EntityId> = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for w in adj.get(v).into_iter().flatten() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == members.len()
    }

    /// Fraction of possible member pairs joined by a live edge.
    pub fn cell_density(&self, members: &BTreeSet<EntityId>) -> Result<f64> {
        let n = members.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("density needs at least two members, got {n}")));
        }
        let k = self.induced_edges(members).count();
        Ok(k as f64 / (n * (n - 1) / 2) as f64)
    }
}

/// Additions take effect at the start of the tick, removals at its end.
pub fn apply_population_delta(graph: &PopulationGraph, delta: &PopulationDelta, tick: u64) -> Result<PopulationGraph> {
    let mut g = graph.clone();
    g.add_entities(&delta.additions, tick)?;
    g.remove_entities(&delta.removals, tick)?;
    g.tick = tick;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> BTreeSet<EntityId> {
        names.iter().map(|n| EntityId::from(*n)).collect()
    }

    fn link(g: &mut PopulationGraph, a: &str, b: &str) {
        let belief = EdgeBelief::fixed(Pair::new(a, b).unwrap(), 0.7, 1.41, 0.7).unwrap();
        g.add_edge(OriginClass::ObservedCommunication, g.tick, belief).unwrap();
    }

    fn five_people() -> PopulationGraph {
        let mut g = PopulationGraph::new(1);
        g.add_entities(&ids(&["p1", "p2", "p3", "p4", "p5"]), 1).unwrap();
        for (a, b) in [("p1", "p2"), ("p2", "p3"), ("p4", "p5"), ("p1", "p5")] {
            link(&mut g, a, b);
        }
        g
    }

    #[test]
    fn removing_an_entity_archives_its_edges() {
        let g = five_people();
        let delta = PopulationDelta { removals: ids(&["p5"]), ..Default::default() };
        let h = apply_population_delta(&g, &delta, 2).unwrap();
        assert_eq!(h.num_entities(), 4);
        assert_eq!(h.num_edges(), 2);
        let archived: BTreeSet<String> = h.archived_edges().iter().map(|e| e.pair().to_string()).collect();
        assert_eq!(archived, BTreeSet::from(["p1-p5".to_string(), "p4-p5".to_string()]));
        assert!(h.archived_edges().iter().all(|e| e.archived == Some(2)));
        assert_eq!(h.num_edges() + h.archived_edges().len(), 4);
    }

    #[test]
    fn empty_delta_is_identity() {
        let g = five_people();
        let h = apply_population_delta(&g, &PopulationDelta::default(), 1).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn add_then_remove_keeps_history() {
        let mut g = five_people();
        let six = ids(&["p6"]);
        g = apply_population_delta(&g, &PopulationDelta { additions: six.clone(), ..Default::default() }, 2).unwrap();
        assert!(g.contains(&"p6".into()));
        g = apply_population_delta(&g, &PopulationDelta { removals: six, ..Default::default() }, 3).unwrap();
        assert!(!g.contains(&"p6".into()));
        let (id, rec) = &g.departed()[0];
        assert_eq!((id.as_str(), rec.entered, rec.exited), ("p6", 2, Some(3)));
        let bad = PopulationDelta { removals: ids(&["p6"]), ..Default::default() };
        assert!(matches!(apply_population_delta(&g, &bad, 4), Err(Error::UnknownEntity(_))));
    }

    #[test]
    fn edge_rules() {
        let mut g = five_people();
        let dup = EdgeBelief::fixed(Pair::new("p2", "p1").unwrap(), 0.7, 1.41, 0.7).unwrap();
        assert!(matches!(g.add_edge(OriginClass::Kinship, 1, dup), Err(Error::DuplicateEdge(_))));
        let ghost = EdgeBelief::fixed(Pair::new("p1", "p9").unwrap(), 0.7, 1.41, 0.7).unwrap();
        assert!(matches!(g.add_edge(OriginClass::Kinship, 1, ghost), Err(Error::UnknownEntity(_))));
        let explicit = EdgeBelief::fixed(Pair::new("p1", "p4").unwrap(), 2.0, 1.0, 0.7).unwrap();
        g.add_edge(OriginClass::Affiliation, 3, explicit).unwrap();
        let e = g.edge(&Pair::new("p1", "p4").unwrap()).unwrap();
        assert_eq!((e.belief.alpha, e.belief.beta, e.created), (2.0, 1.0, 3));
    }

    #[test]
    fn density_and_connectivity() {
        let mut g = PopulationGraph::new(0);
        g.add_entities(&ids(&["a", "b", "c", "d"]), 0).unwrap();
        let all = ids(&["a", "b", "c", "d"]);
        assert_eq!(g.cell_density(&all).unwrap(), 0.0);
        assert!(!g.connected(&ids(&["a", "b"])));
        assert!(g.connected(&ids(&["a"])));
        for (a, b) in [("a", "b"), ("b", "c"), ("c", "d")] {
            link(&mut g, a, b);
        }
        assert!(g.connected(&all));
        link(&mut g, "a", "d");
        assert!((g.cell_density(&all).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        link(&mut g, "a", "c");
        link(&mut g, "b", "d");
        assert_eq!(g.cell_density(&all).unwrap(), 1.0);
        assert!(g.cell_density(&ids(&["a"])).is_err());
    }

    #[test]
    fn cells_track_connectivity() {
        let mut g = PopulationGraph::new(0);
        g.add_entities(&ids(&["a", "b", "c", "d"]), 0).unwrap();
        for (a, b) in [("a", "b"), ("b", "c"), ("c", "d")] {
            link(&mut g, a, b);
        }
        let cell = Cell {
            id: "c1".into(),
            members: ids(&["a", "b", "c", "d"]),
            ideal_size: 4.0,
            threshold: 1.0,
            member_threat_set: BTreeSet::new(),
            cell_threat_set: BTreeSet::new(),
            connected: false,
        };
        g.add_cell(cell.clone(), true).unwrap();
        assert!(g.cell("c1").unwrap().connected);
        g.remove_entities(&ids(&["b"]), 1).unwrap();
        let c = g.cell("c1").unwrap();
        assert!(!c.connected);
        assert_eq!(c.members, ids(&["a", "c", "d"]));

        let mut h = PopulationGraph::new(0);
        h.add_entities(&ids(&["a", "b", "c", "d"]), 0).unwrap();
        assert!(matches!(h.add_cell(cell.clone(), true), Err(Error::DisconnectedCell { .. })));
        h.add_cell(cell, false).unwrap();
        assert!(!h.cell("c1").unwrap().connected);
    }
}
