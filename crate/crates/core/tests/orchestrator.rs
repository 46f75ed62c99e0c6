use cellwatch_core::data::{assemble_batches, read_csv, read_jsonl, write_jsonl, DataRecord};
use cellwatch_core::edge::ObservationVector;
use cellwatch_core::example::{worked_example_records, worked_example_scenario};
use cellwatch_core::graph::OriginClass;
use cellwatch_core::orchestrator::{
    commit_tick, joint_log_marginal_likelihood, replay, what_if, CommRecord, Intervention, ScenarioState, TickBatch,
};
use cellwatch_core::scenario::{CellSpec, EdgeSpec, PriorSpec};
use cellwatch_core::{EntityId, Error, Pair};

fn pair(a: &str, b: &str) -> Pair {
    Pair::new(a, b).unwrap()
}

fn worked_batches() -> Vec<TickBatch> {
    assemble_batches(&worked_example_records(), 0, None).unwrap()
}

fn worked_state(ticks: usize) -> ScenarioState {
    replay(worked_example_scenario(0.7), worked_batches().into_iter().take(ticks)).unwrap()
}

#[test]
fn empty_batch_only_evolves_beliefs() {
    let state = worked_state(4);
    let next = commit_tick(&state, TickBatch::empty(5)).unwrap();
    let report = next.event_log.last().unwrap();
    assert_eq!(next.tick, 5);
    assert_eq!(report.log_likelihood, 0.0);
    assert!(report.auto_created.is_empty());
    for et in &report.edges {
        assert!(!et.monitored);
        assert_eq!(et.prior, et.posterior);
        let before = state.graph.edge(&et.pair).unwrap();
        assert!((et.prior.0 - 0.7 * before.belief.alpha).abs() < 1e-12);
        assert!((et.prior.1 - 0.7 * before.belief.beta).abs() < 1e-12);
    }
    assert_eq!(next.graph.num_edges(), state.graph.num_edges());
    for b in next.entity_beliefs.values() {
        assert!((b.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn wrong_tick_is_rejected() {
    let state = worked_state(2);
    match commit_tick(&state, TickBatch::empty(5)) {
        Err(Error::TickMismatch { expected: 3, got: 5 }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn failed_commit_leaves_state_untouched() {
    let mut state = worked_state(3);
    let before = state.to_snapshot_json();
    let mut batch = worked_batches()[3].clone();
    batch.signals.insert("ghost".into(), vec![Some(0.5); 5]);
    assert!(state.commit(batch).is_err());
    assert_eq!(state.to_snapshot_json(), before);

    let mut batch = worked_batches()[3].clone();
    batch.signals.insert("p1".into(), vec![Some(1.5), None, None, None, None]);
    assert!(state.commit(batch).is_err());
    assert_eq!(state.to_snapshot_json(), before);
}

#[test]
fn record_order_within_a_tick_is_irrelevant() {
    let forward = replay(worked_example_scenario(0.7), worked_batches()).unwrap();
    let reversed: Vec<TickBatch> = worked_batches()
        .into_iter()
        .map(|mut b| {
            b.communications.reverse();
            b.edges.reverse();
            b
        })
        .collect();
    let backward = replay(worked_example_scenario(0.7), reversed).unwrap();
    assert_eq!(forward.graph, backward.graph);
    assert_eq!(forward.entity_beliefs, backward.entity_beliefs);
    assert_eq!(forward.log_likelihood.to_bits(), backward.log_likelihood.to_bits());
}

#[test]
fn likelihood_is_the_sum_of_tick_terms() {
    let state = worked_state(10);
    let from_terms: f64 = state
        .event_log
        .iter()
        .flat_map(|r| r.edges.iter().flat_map(|e| e.terms.iter().map(|t| t.log_likelihood)))
        .sum();
    assert!((joint_log_marginal_likelihood(&state) - state.log_likelihood).abs() < 1e-12);
    assert!((from_terms - state.log_likelihood).abs() < 1e-9);
    assert!(state.log_likelihood < 0.0);
    // Improper edges at their creation tick contribute nothing.
    let created = state.event_log[2].edges.iter().find(|e| e.pair == pair("p1", "p4")).unwrap();
    assert!(created.created && created.log_likelihood.is_none());
}

#[test]
fn unmonitored_ticks_skip_the_update_but_still_discount() {
    let state = worked_state(2);
    let mut batch = TickBatch::empty(3);
    batch.observations.push(ObservationVector::unmonitored(pair("p1", "p2"), 3));
    let next = commit_tick(&state, batch).unwrap();
    let et = next.event_log[2].edges.iter().find(|e| e.pair == pair("p1", "p2")).unwrap();
    assert!(!et.monitored);
    assert_eq!(et.prior, et.posterior);
    assert_eq!(et.discount, Some(0.7));
}

#[test]
fn zeros_between_strangers_do_not_create_edges() {
    let mut cfg = worked_example_scenario(0.7);
    cfg.edges.clear();
    let state = ScenarioState::new(cfg).unwrap();
    let mut batch = TickBatch::empty(1);
    let call = |a: &str, b: &str, raw: f64| CommRecord { entity_a: a.into(), entity_b: b.into(), channel: 0, raw, monitored: true };
    batch.communications = vec![call("p1", "p2", 0.0), call("p3", "p4", 2.0)];
    let next = commit_tick(&state, batch).unwrap();
    assert_eq!(next.event_log[0].auto_created, vec![pair("p3", "p4")]);
    let rec = next.graph.edge(&pair("p3", "p4")).unwrap();
    assert_eq!(rec.origin, OriginClass::ObservedCommunication);
    assert_eq!((rec.belief.alpha, rec.belief.beta), (2.0, 1.0));
    assert!(!next.graph.has_edge(&pair("p1", "p2")));
}

#[test]
fn departures_archive_edges_and_shrink_cells() {
    let state = worked_state(6);
    let mut batch = worked_batches()[6].clone();
    batch.population.removals.insert("p4".into());
    let next = commit_tick(&state, batch).unwrap();
    let report = next.event_log.last().unwrap();
    assert_eq!(report.archived, vec![pair("p1", "p4"), pair("p2", "p4"), pair("p3", "p4")]);
    assert!(!next.graph.contains(&"p4".into()));
    assert_eq!(next.graph.archived_edges().len(), 3);
    assert!(!next.graph.cell("cell-1").unwrap().members.contains(&EntityId::from("p4")));
    // Indicators for the departure tick were computed before the removal.
    assert_eq!(report.indicators[0].inputs.n, 4);
    assert_eq!(next.current_indicators().unwrap()[0].inputs.n, 3);
}

#[test]
fn snapshot_round_trip_is_byte_identical() {
    let state = worked_state(7);
    let text = state.to_snapshot_json();
    let restored = ScenarioState::from_snapshot_json(&text).unwrap();
    assert_eq!(restored.to_snapshot_json(), text);
    let rest: Vec<TickBatch> = worked_batches().into_iter().skip(7).collect();
    let mut a = state;
    let mut b = restored;
    for batch in rest {
        a.commit(batch.clone()).unwrap();
        b.commit(batch).unwrap();
    }
    assert_eq!(a.to_snapshot_json(), b.to_snapshot_json());
    assert!(ScenarioState::from_snapshot_json(&text.replacen("\"version\":1", "\"version\":9", 1)).is_err());
}

#[test]
fn event_log_replays_to_the_same_state() {
    let state = worked_state(10);
    let batches: Vec<TickBatch> = state.event_log.iter().map(|r| r.batch.clone()).collect();
    let again = replay(state.config.clone(), batches).unwrap();
    assert_eq!(again.to_snapshot_json(), state.to_snapshot_json());
}

#[test]
fn what_if_without_changes_is_a_no_op() {
    let state = worked_state(10);
    let report = what_if(&state, &[]).unwrap();
    assert_eq!(report.before, report.after);
    assert_eq!(report.tick, 10);
}

#[test]
fn removing_a_member_recomputes_individual_threat() {
    let state = worked_state(10);
    let report = what_if(&state, &[Intervention::RemoveMember { cell: "cell-1".into(), entity: "p4".into() }]).unwrap();
    let (before, after) = (&report.before[0], &report.after[0]);
    let threat = |id: &str| before.inputs.member_marginals[&EntityId::from(id)][2..4].iter().sum::<f64>();
    let expected = threat("p1") * threat("p2") * threat("p3");
    assert!((after.m2 - expected).abs() < 1e-12);
    assert_eq!(after.inputs.n, 3);
    assert_eq!(after.inputs.k, 3);
    assert!((after.m5 - 1.0).abs() < 1e-12);
    assert!((before.m5 - cellwatch_core::numeric::sech(1.0 / 3.0)).abs() < 1e-12);
    // The live state is unchanged.
    assert_eq!(state.current_indicators().unwrap()[0].inputs.n, 4);
}

#[test]
fn removing_an_articulation_point_flags_the_cell() {
    let mut cfg = worked_example_scenario(0.7);
    cfg.edges = [("p1", "p2"), ("p2", "p3"), ("p3", "p4")]
        .iter()
        .map(|(a, b)| EdgeSpec { pair: pair(a, b), origin: OriginClass::Kinship, prior: Some(PriorSpec::Gamma { alpha: 2.0, beta: 1.0 }) })
        .collect();
    cfg.cells = vec![CellSpec { require_connected: true, ..cfg.cells[0].clone() }];
    let state = ScenarioState::new(cfg).unwrap();
    let report = what_if(&state, &[Intervention::RemoveMember { cell: "cell-1".into(), entity: "p2".into() }]).unwrap();
    assert!(report.before[0].connected);
    assert!(!report.after[0].connected);
    let leaf = what_if(&state, &[Intervention::RemoveMember { cell: "cell-1".into(), entity: "p4".into() }]).unwrap();
    assert!(leaf.after[0].connected);
}

#[test]
fn severing_edges_and_overriding_beliefs() {
    let state = worked_state(10);
    let all = what_if(&state, &[Intervention::SeverAllEdges]).unwrap();
    assert_eq!(all.after[0].m3, 1.0);
    assert_eq!(all.after[0].m4, 0.0);
    assert!(all.after[0].degenerate);
    let weak = what_if(&state, &[Intervention::SetEdgeBelief { pair: pair("p1", "p2"), alpha: 0.1, beta: 10.0 }]).unwrap();
    assert!(weak.after[0].m3 < weak.before[0].m3);
    let strict = what_if(&state, &[Intervention::SetCellParameters { cell: "cell-1".into(), threshold: Some(20.0), ideal_size: Some(4.0) }])
        .unwrap();
    assert!(strict.after[0].m3 < strict.before[0].m3);
    assert_eq!(strict.after[0].m5, 1.0);
    assert!(what_if(&state, &[Intervention::SeverEdge { pair: pair("p1", "p9") }]).is_err());
}

#[test]
fn csv_and_jsonl_feeds_agree() {
    let records = worked_example_records();
    let mut csv = String::from("tick,entity_a,entity_b,channel_id,raw_value,monitored\n");
    for r in &records {
        if let DataRecord::Comm(c) = r {
            csv.push_str(&format!("{},{},{},{},{},{}\n", c.tick, c.entity_a, c.entity_b, c.channel_id, c.raw_value, c.monitored));
        }
    }
    let mut from_csv = read_csv(csv.as_bytes(), "calls.csv").unwrap();
    from_csv.extend(records.iter().filter(|r| !matches!(r, DataRecord::Comm(_))).cloned());
    let mut jsonl = Vec::new();
    write_jsonl(&mut jsonl, &records).unwrap();
    let from_jsonl = read_jsonl(jsonl.as_slice(), "data.jsonl").unwrap();
    let a = replay(worked_example_scenario(0.7), assemble_batches(&from_csv, 0, None).unwrap()).unwrap();
    let b = replay(worked_example_scenario(0.7), assemble_batches(&from_jsonl, 0, None).unwrap()).unwrap();
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.latest_indicators(), b.latest_indicators());
}

#[test]
fn indicator_series_tracks_every_tick() {
    let state = worked_state(10);
    let series = state.indicator_series("cell-1");
    assert_eq!(series.iter().map(|r| r.tick).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
    assert!(series.iter().all(|r| r.phi.windows(2).all(|w| w[0] <= w[1])));
    assert!(state.indicator_series("nope").is_empty());
}
