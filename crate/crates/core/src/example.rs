//! Bundled scenarios: the four-suspect ten-week example and the three-tick
//! multi-channel example.
//!
//! Phone-call hours, priors, discount and edge-creation schedule are the
//! published ones. The threat-state model and the activity signals are
//! authored for demonstration; they are synthetic and not reference data.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::{CommRow, DataRecord};
use crate::edge::{ChannelId, ChannelSpec};
use crate::graph::OriginClass;
use crate::ids::{EntityId, Pair};
use crate::model::{CompiledModel, ModelSpec, MODEL_VERSION};
use crate::scenario::{
    CellSpec, DiscountConfig, EdgePriors, EdgeSpec, EntitySpec, PriorSpec, ScenarioConfig, CELL_MODEL, INDIVIDUAL_MODEL,
    SCENARIO_VERSION,
};
use crate::state::{Emission, HoldingTime, SignalExtractor, TaskEmission, TaskModel};

pub const STATES: [&str; 5] = ["Active", "Training", "Preparing", "Mobilised", "Neutral"];
pub const TASKS: [&str; 5] = ["express_intent", "acquire_skills", "acquire_resources", "reconnaissance", "coordinate"];
pub const SUSPECTS: [&str; 4] = ["p1", "p2", "p3", "p4"];

/// Pair order of the weekly phone table.
pub const CALL_PAIRS: [(&str, &str); 6] = [("p1", "p2"), ("p1", "p3"), ("p1", "p4"), ("p2", "p3"), ("p2", "p4"), ("p3", "p4")];

/// Weekly hours of phone calls per pair, weeks 1 to 10.
pub const WEEKLY_CALL_HOURS: [[f64; 6]; 10] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [5.0, 0.0, 2.0, 0.0, 0.0, 0.0],
    [5.0, 0.0, 5.0, 0.0, 0.0, 0.0],
    [5.0, 2.0, 5.0, 0.0, 1.0, 0.0],
    [5.0, 6.0, 6.0, 5.0, 6.0, 1.0],
    [7.0, 6.0, 7.0, 6.0, 7.0, 7.0],
    [6.0, 6.0, 8.0, 4.0, 8.0, 8.0],
    [7.0, 7.0, 9.0, 7.0, 9.0, 9.0],
    [7.0, 8.0, 11.0, 8.0, 10.0, 10.0],
];

/// Edges added during the ten weeks: (week, pair).
pub const EDGE_SCHEDULE: [(u64, (&str, &str)); 4] =
    [(3, ("p1", "p4")), (5, ("p1", "p3")), (5, ("p2", "p4")), (6, ("p3", "p4"))];

pub const PHONE_CHANNEL: ChannelId = 0;

fn geometric(rho: f64) -> Option<HoldingTime> {
    Some(HoldingTime::Geometric { rho })
}

fn task_model() -> TaskModel {
    let set = |js: &[usize]| js.iter().copied().collect::<BTreeSet<usize>>();
    let probs = |ps: &[(usize, f64)]| ps.iter().copied().collect::<BTreeMap<usize, f64>>();
    let emission = TaskEmission {
        off: Emission::Beta { alpha: 1.0, beta: 4.0 },
        on: Emission::Beta { alpha: 4.0, beta: 1.5 },
    };
    TaskModel {
        task_names: TASKS.iter().map(|s| s.to_string()).collect(),
        index_sets: vec![set(&[0]), set(&[0, 1]), set(&[1, 2, 3]), set(&[2, 3, 4]), set(&[])],
        task_probs: vec![
            probs(&[(0, 0.9)]),
            probs(&[(0, 0.7), (1, 0.9)]),
            probs(&[(1, 0.5), (2, 0.8), (3, 0.5)]),
            probs(&[(2, 0.9), (3, 0.6), (4, 0.9)]),
            probs(&[]),
        ],
        emissions: vec![emission; TASKS.len()],
        extractors: vec![SignalExtractor::Max; TASKS.len()],
    }
}

/// Authored five-state threat model with geometric holding times.
pub fn threat_model(initial: [f64; 5]) -> ModelSpec {
    let none = None;
    ModelSpec {
        version: MODEL_VERSION,
        states: STATES.iter().map(|s| s.to_string()).collect(),
        absorbing: vec!["Neutral".into()],
        embedded: vec![
            vec![0.0, 0.5, 0.3, 0.0, 0.2],
            vec![0.1, 0.0, 0.7, 0.0, 0.2],
            vec![0.0, 0.1, 0.0, 0.8, 0.1],
            vec![0.0, 0.0, 0.5, 0.0, 0.5],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ],
        holding: vec![
            vec![none.clone(), geometric(0.25), geometric(0.25), none.clone(), geometric(0.25)],
            vec![geometric(0.3), none.clone(), geometric(0.3), none.clone(), geometric(0.3)],
            vec![none.clone(), geometric(0.3), none.clone(), geometric(0.3), geometric(0.3)],
            vec![none.clone(), none.clone(), geometric(0.05), none.clone(), geometric(0.05)],
            vec![none.clone(), none.clone(), none.clone(), none.clone(), none],
        ],
        duration_cap: crate::state::DEFAULT_DURATION_CAP,
        tasks: task_model(),
        initial: initial.to_vec(),
    }
}

const ACTIVE_PRIOR: [f64; 5] = [0.6, 0.15, 0.1, 0.05, 0.1];
const TRAINED_PRIOR: [f64; 5] = [0.2, 0.5, 0.15, 0.05, 0.1];

/// Week from which each suspect shows each task; `None` means never.
const TASK_ONSETS: [[Option<u64>; 5]; 4] = [
    [Some(1), None, Some(4), Some(7), Some(6)],
    [Some(1), Some(3), Some(6), None, Some(6)],
    [Some(1), Some(5), Some(6), Some(7), Some(6)],
    [Some(1), Some(1), Some(5), Some(3), Some(6)],
];

/// Synthetic filtered signal for a task: low before onset, then rising.
fn authored_signal(onset: Option<u64>, week: u64) -> f64 {
    match onset {
        Some(w) if week >= w => (0.6 + 0.05 * (week - w) as f64).min(0.95),
        _ => 0.1,
    }
}

fn discount_for(delta: f64) -> DiscountConfig {
    DiscountConfig::Fixed { delta }
}

/// The ten-week, four-suspect scenario with discount `delta` (0.7 in the published example).
pub fn worked_example_scenario(delta: f64) -> ScenarioConfig {
    let mut models = BTreeMap::new();
    let compile = |spec: ModelSpec| CompiledModel::compile(spec, "models").expect("bundled model is valid");
    models.insert(INDIVIDUAL_MODEL.to_owned(), compile(threat_model(ACTIVE_PRIOR)));
    models.insert("trained".to_owned(), compile(threat_model(TRAINED_PRIOR)));
    models.insert(CELL_MODEL.to_owned(), compile(threat_model(TRAINED_PRIOR)));
    let pair = |a: &str, b: &str| Pair::new(a, b).expect("distinct");
    ScenarioConfig {
        version: SCENARIO_VERSION,
        name: "four-suspect ten-week example".into(),
        seed: 0,
        start_tick: 0,
        models,
        channels: vec![ChannelSpec { name: Some("phone_hours".into()), ..ChannelSpec::new(PHONE_CHANNEL, 1.0, 10.0) }],
        discount: discount_for(delta),
        edge_priors: EdgePriors {
            default: PriorSpec::Gamma { alpha: 0.70, beta: 1.41 },
            by_origin: BTreeMap::new(),
            auto: Some(PriorSpec::EMPIRICAL),
        },
        entities: SUSPECTS
            .iter()
            .map(|id| EntitySpec { id: (*id).into(), model: (*id == "p4").then(|| "trained".to_owned()) })
            .collect(),
        edges: vec![
            EdgeSpec { pair: pair("p1", "p2"), origin: OriginClass::Affiliation, prior: None },
            EdgeSpec { pair: pair("p2", "p3"), origin: OriginClass::Affiliation, prior: None },
        ],
        cells: vec![CellSpec {
            id: "cell-1".into(),
            members: SUSPECTS.iter().map(|s| EntityId::from(*s)).collect(),
            ideal_size: 3.0,
            threshold: 0.5,
            member_threat_states: vec!["Preparing".into(), "Mobilised".into()],
            cell_threat_states: vec!["Preparing".into(), "Mobilised".into()],
            model: None,
            require_connected: false,
        }],
    }
}

/// Phone records for every pair and week, edge events, and authored signals.
pub fn worked_example_records() -> Vec<DataRecord> {
    let mut out = Vec::new();
    for (w, row) in WEEKLY_CALL_HOURS.iter().enumerate() {
        let tick = w as u64 + 1;
        for ((a, b), hours) in CALL_PAIRS.iter().zip(row) {
            out.push(DataRecord::Comm(CommRow {
                tick,
                entity_a: (*a).into(),
                entity_b: (*b).into(),
                channel_id: PHONE_CHANNEL,
                raw_value: *hours,
                monitored: true,
            }));
        }
        for (week, (a, b)) in EDGE_SCHEDULE {
            if week == tick {
                out.push(DataRecord::Edge {
                    tick,
                    entity_a: a.into(),
                    entity_b: b.into(),
                    origin: OriginClass::ObservedCommunication,
                    prior: Some(PriorSpec::EMPIRICAL),
                });
            }
        }
        for (person, onsets) in SUSPECTS.iter().zip(TASK_ONSETS) {
            out.push(DataRecord::Signal {
                tick,
                entity: (*person).into(),
                values: onsets.iter().map(|o| Some(authored_signal(*o, tick))).collect(),
            });
        }
    }
    out
}

/// Raw values per tick for the multi-channel example: (pair, [(channel, raw)]).
pub const MULTICHANNEL_RAW: [[((&str, &str), &[(ChannelId, f64)]); 2]; 3] = [
    [(("p1", "p2"), &[(1, 3.0), (2, 50.0)]), (("p2", "p3"), &[(1, 8.0), (2, 15.0), (3, 500.0)])],
    [(("p1", "p2"), &[(1, 2.0), (2, 250.0)]), (("p2", "p3"), &[(1, 12.0), (2, 20.0), (3, 100.0)])],
    [(("p1", "p2"), &[(1, 4.0), (2, 175.0)]), (("p2", "p3"), &[(1, 15.0), (2, 20.0), (3, 2800.0)])],
];

/// Three channels with different efficiencies, two pairs, three ticks.
pub fn multichannel_scenario() -> ScenarioConfig {
    let mut cfg = worked_example_scenario(0.7);
    cfg.name = "multi-channel example".into();
    cfg.channels = vec![
        ChannelSpec { name: Some("calls".into()), ..ChannelSpec::new(1, 0.8, 35.0) },
        ChannelSpec { name: Some("messages".into()), ..ChannelSpec::new(2, 0.8, 1400.0) },
        ChannelSpec { name: Some("transfers".into()), ..ChannelSpec::new(3, 1.0, 70_000.0) },
    ];
    cfg.entities.truncate(3);
    cfg.cells.clear();
    cfg.edge_priors.auto = None;
    cfg
}

pub fn multichannel_records() -> Vec<DataRecord> {
    let mut out = Vec::new();
    for (i, tick_rows) in MULTICHANNEL_RAW.iter().enumerate() {
        for ((a, b), values) in tick_rows {
            for (k, raw) in values.iter() {
                out.push(DataRecord::Comm(CommRow {
                    tick: i as u64 + 1,
                    entity_a: (*a).into(),
                    entity_b: (*b).into(),
                    channel_id: *k,
                    raw_value: *raw,
                    monitored: true,
                }));
            }
        }
    }
    out
}
