//! Threat measures for a cell and the ordered attack indicators built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::edge::{tail_probability, EdgeBelief};
use crate::error::{Error, Result};
use crate::graph::{Cell, PopulationGraph};
use crate::ids::{EntityId, Pair};
use crate::numeric::sech;
use crate::state::StateBelief;

/// Probability mass the cell filter puts on the cell threat states.
pub fn collective_progress(cell_belief: &StateBelief, cell_threat_set: &BTreeSet<usize>) -> f64 {
    cell_belief.marginal_threat(cell_threat_set)
}

/// Product over members of each member's threat-state mass.
pub fn individual_threat<'a>(
    member_beliefs: impl IntoIterator<Item = &'a StateBelief>,
    threat_set: &BTreeSet<usize>,
) -> f64 {
    member_beliefs.into_iter().map(|b| b.marginal_threat(threat_set)).product()
}

/// Tail mass above `threshold`, with the degenerate limits of an improper belief.
fn cohesion(belief: &EdgeBelief, threshold: f64) -> Result<f64> {
    if belief.alpha == 0.0 {
        return Ok(if threshold == 0.0 { 1.0 } else { 0.0 });
    }
    if belief.beta == 0.0 {
        return Ok(1.0);
    }
    tail_probability(belief, threshold)
}

/// Per-pair `P(rate > threshold)` and their product.
pub fn pairwise_cohesion<'a>(
    edge_beliefs: impl IntoIterator<Item = &'a EdgeBelief>,
    threshold: f64,
) -> Result<(Vec<(Pair, f64)>, f64)> {
    let mut per_pair = Vec::new();
    let mut product = 1.0;
    for b in edge_beliefs {
        let p = cohesion(b, threshold)?;
        product *= p;
        per_pair.push((b.pair.clone(), p));
    }
    Ok((per_pair, product))
}

/// Hyperbolic secant of the relative deviation from the ideal size.
pub fn cell_size_integrity(n: usize, ideal_size: f64) -> f64 {
    sech((n as f64 - ideal_size) / ideal_size)
}

/// Sorts the measures in descending order (ties by input position) and returns
/// the partial products: entry `i` multiplies the `5 - i` largest measures.
pub fn attack_indicators(m: &[f64; 5]) -> Result<[f64; 5]> {
    if let Some(v) = m.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("measure {v} outside [0, 1]")));
    }
    let mut order = [0usize, 1, 2, 3, 4];
    order.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
    let mut prefix = [0.0; 5];
    let mut acc = 1.0;
    for (slot, &idx) in prefix.iter_mut().zip(&order) {
        acc *= m[idx];
        *slot = acc;
    }
    Ok([prefix[4], prefix[3], prefix[2], prefix[1], prefix[0]])
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Everything a report was computed from, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorInputs {
    pub cell_marginal: Vec<f64>,
    pub member_marginals: BTreeMap<EntityId, Vec<f64>>,
    pub edges: Vec<EdgeSummary>,
    pub n: usize,
    pub k: usize,
    pub ideal_size: f64,
    pub threshold: f64,
    pub member_threat_set: BTreeSet<usize>,
    pub cell_threat_set: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub pair: Pair,
    pub alpha: f64,
    pub beta: f64,
    pub cohesion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub cell: String,
    pub tick: u64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub phi: [f64; 5],
    /// Set when a measure fell back to an empty product or the cell has fewer than two members.
    pub degenerate: bool,
    pub connected: bool,
    pub inputs: IndicatorInputs,
}

impl IndicatorReport {
    pub fn measures(&self) -> [f64; 5] {
        [self.m1, self.m2, self.m3, self.m4, self.m5]
    }
}

/// Computes all measures and indicators for one cell.
pub fn cell_report(
    graph: &PopulationGraph,
    cell: &Cell,
    cell_belief: &StateBelief,
    member_beliefs: &BTreeMap<EntityId, StateBelief>,
    tick: u64,
) -> Result<IndicatorReport> {
    let mut members = Vec::with_capacity(cell.members.len());
    for id in &cell.members {
        members.push((id, member_beliefs.get(id).ok_or_else(|| Error::UnknownEntity(id.to_string()))?));
    }
    let m1 = collective_progress(cell_belief, &cell.cell_threat_set);
    let m2 = individual_threat(members.iter().map(|(_, b)| *b), &cell.member_threat_set);
    let edges: Vec<&EdgeBelief> = graph.induced_edges(&cell.members).map(|e| &e.belief).collect();
    let (per_pair, m3) = pairwise_cohesion(edges.iter().copied(), cell.threshold)?;
    let n = cell.members.len();
    let k = edges.len();
    let m4 = if n >= 2 { graph.cell_density(&cell.members)? } else { 1.0 };
    let m5 = cell_size_integrity(n, cell.ideal_size);
    let m = [m1, m2, m3, m4, m5].map(|v| v.clamp(0.0, 1.0));
    let phi = attack_indicators(&m)?;
    let edges = edges
        .iter()
        .zip(per_pair)
        .map(|(b, (pair, cohesion))| EdgeSummary { pair, alpha: b.alpha, beta: b.beta, cohesion })
        .collect();
    Ok(IndicatorReport {
        cell: cell.id.clone(),
        tick,
        m1: m[0],
        m2: m[1],
        m3: m[2],
        m4: m[3],
        m5: m[4],
        phi,
        degenerate: k == 0 || n < 2,
        connected: cell.connected,
        inputs: IndicatorInputs {
            cell_marginal: cell_belief.marginal(),
            member_marginals: members.iter().map(|(id, b)| ((*id).clone(), b.marginal())).collect(),
            edges,
            n,
            k,
            ideal_size: cell.ideal_size,
            threshold: cell.threshold,
            member_threat_set: cell.member_threat_set.clone(),
            cell_threat_set: cell.cell_threat_set.clone(),
        },
    })
}

/// Cell ids by descending indicator `key`, ties by id.
pub fn rank_cells(reports: &[IndicatorReport], key: usize) -> Result<Vec<String>> {
    if key > 4 {
        return Err(Error::InvalidArgument(format!("indicator index {key} outside 0..=4")));
    }
    let mut sorted: Vec<&IndicatorReport> = reports.iter().collect();
    sorted.sort_by(|a, b| b.phi[key].total_cmp(&a.phi[key]).then_with(|| a.cell.cmp(&b.cell)));
    Ok(sorted.into_iter().map(|r| r.cell.clone()).collect())
}

/// Flat time series: `tick,cell,m1..m5,phi0..phi4`.
pub fn write_indicator_csv<W: Write>(out: W, reports: &[IndicatorReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = ["tick", "cell", "m1", "m2", "m3", "m4", "m5", "phi0", "phi1", "phi2", "phi3", "phi4"];
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in reports {
        let mut row = vec![r.tick.to_string(), r.cell.clone()];
        row.extend(r.measures().iter().chain(&r.phi).map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
