use serde::{Deserialize, Serialize};

use super::ScenarioState;
use crate::error::{Error, Result};
use crate::ids::{EntityId, Pair};
use crate::indicators::IndicatorReport;

/// A hypothetical change to the current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intervention {
    RemoveMember { cell: String, entity: EntityId },
    SeverEdge { pair: Pair },
    SeverAllEdges,
    SetEdgeBelief { pair: Pair, alpha: f64, beta: f64 },
    SetThreatStates {
        cell: String,
        #[serde(default)]
        member_threat_states: Option<Vec<String>>,
        #[serde(default)]
        cell_threat_states: Option<Vec<String>>,
    },
    SetCellParameters {
        cell: String,
        #[serde(default)]
        threshold: Option<f64>,
        #[serde(default)]
        ideal_size: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfReport {
    pub tick: u64,
    pub before: Vec<IndicatorReport>,
    pub after: Vec<IndicatorReport>,
}

fn apply(state: &mut ScenarioState, iv: &Intervention) -> Result<()> {
    let tick = state.tick;
    match iv {
        Intervention::RemoveMember { cell, entity } => {
            let graph = &mut state.graph;
            let mut members = graph.cell(cell)?.members.clone();
            if !members.remove(entity) {
                return Err(Error::UnknownEntity(format!("{entity} is not a member of {cell}")));
            }
            let c = graph.cell_mut(cell)?;
            c.members = members;
            graph.refresh_connectivity();
        }
        Intervention::SeverEdge { pair } => state.graph.sever_edge(pair, tick)?,
        Intervention::SeverAllEdges => {
            let pairs: Vec<Pair> = state.graph.edges().map(|e| e.pair().clone()).collect();
            for p in pairs {
                state.graph.sever_edge(&p, tick)?;
            }
        }
        Intervention::SetEdgeBelief { pair, alpha, beta } => {
            let rec = state.graph.edge_mut(pair).ok_or_else(|| Error::UnknownEdge(pair.to_string()))?;
            let mut b = rec.belief.clone();
            b.alpha = *alpha;
            b.beta = *beta;
            b.validate()?;
            rec.belief = b;
        }
        Intervention::SetThreatStates { cell, member_threat_states, cell_threat_states } => {
            let member = match member_threat_states {
                Some(names) => Some(state.config.model(None, "member_threat_states")?.resolve_states(names, "member_threat_states")?),
                None => None,
            };
            let own = match cell_threat_states {
                Some(names) => Some(state.cell_model(cell)?.resolve_states(names, "cell_threat_states")?),
                None => None,
            };
            let c = state.graph.cell_mut(cell)?;
            if let Some(s) = member {
                c.member_threat_set = s;
            }
            if let Some(s) = own {
                c.cell_threat_set = s;
            }
        }
        Intervention::SetCellParameters { cell, threshold, ideal_size } => {
            let c = state.graph.cell_mut(cell)?;
            if let Some(l) = threshold {
                c.threshold = *l;
            }
            if let Some(p) = ideal_size {
                c.ideal_size = *p;
            }
            c.validate()?;
        }
    }
    Ok(())
}

/// Indicators before and after `interventions`, computed on a copy of the state.
pub fn what_if(state: &ScenarioState, interventions: &[Intervention]) -> Result<WhatIfReport> {
    let before = state.current_indicators()?;
    let mut copy = state.clone();
    for iv in interventions {
        apply(&mut copy, iv)?;
    }
    let after = copy.current_indicators()?;
    Ok(WhatIfReport { tick: state.tick, before, after })
}
