//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cellwatch_core::data::assemble_batches;
use cellwatch_core::edge::{adaptive_discount, evolve_prior, ChannelSpec, EdgeBelief, ObservationVector};
use cellwatch_core::example::{
    multichannel_records, multichannel_scenario, threat_model, worked_example_records, worked_example_scenario,
    CALL_PAIRS,
};
use cellwatch_core::graph::OriginClass;
use cellwatch_core::indicators::{attack_indicators, round2};
use cellwatch_core::model::{CompiledModel, ModelSpec, MODEL_VERSION};
use cellwatch_core::numeric::{gamma_ln_pdf, ln_gamma, tanh_sinh};
use cellwatch_core::orchestrator::{commit_tick, replay, ScenarioState, TickBatch};
use cellwatch_core::scenario::{DiscountConfig, EdgeSpec, PriorSpec, ScenarioConfig};
use cellwatch_core::sim::{simulate_entity, simulate_entity_path, simulate_network_data, stream, NetworkSimSpec, PairSim, RateTrajectory};
use cellwatch_core::state::{
    filter_tick, likelihood_vector, predict_step, update_step, Emission, HoldingTime, SignalExtractor, SignalVector,
    StateBelief, TaskEmission, TaskModel, DEFAULT_DURATION_CAP,
};
use cellwatch_core::{EntityId, Pair};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("worked-example network replay", network_replay, Duration::from_secs(1)),
        ("multi-channel replay", multichannel_replay, Duration::from_secs(1)),
        ("indicator composition", indicator_composition, Duration::from_secs(1)),
        ("likelihood decomposition oracle", likelihood_oracle, Duration::from_secs(10)),
        ("semi-Markov filter oracle", filter_oracle, Duration::from_secs(60)),
        ("property suites", property_suites, Duration::MAX),
        ("cell trajectory check", cell_trajectory, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > *limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} [{name}] ({elapsed:.2?}) {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}

fn pair(a: &str, b: &str) -> Pair {
    Pair::new(a, b).unwrap()
}

/// Published edge parameters: tick, prior/post, then (alpha, beta) for the
/// pairs 1-2, 1-3, 1-4, 2-3, 2-4, 3-4; `-` marks an edge that does not exist yet.
const EDGE_TABLE: &str = "
1 prior 0.70 1.41 - - - - 0.70 1.41 - - - -
1 post 0.70 2.41 - - - - 0.70 2.41 - - - -
2 prior 0.50 1.70 - - - - 0.50 1.70 - - - -
2 post 3.50 2.70 - - - - 1.50 2.70 - - - -
3 prior 2.46 1.90 - - - - 1.05 1.90 - - - -
3 post 7.46 2.90 - - 2 1 1.05 2.90 - - - -
4 prior 5.26 2.04 - - 1.41 0.70 0.74 2.04 - - - -
4 post 10.26 3.04 - - 6.41 1.70 0.74 3.04 - - - -
5 prior 7.23 2.15 - - 4.52 1.20 0.52 2.15 - - - -
5 post 12.23 3.15 2 1 9.52 2.20 0.52 3.15 1 1 - -
6 prior 8.62 2.22 1.41 0.70 6.71 1.55 0.37 2.22 0.70 0.70 - -
6 post 13.62 3.22 7.41 1.70 12.71 2.55 5.37 3.22 6.70 1.70 1 1
7 prior 9.60 2.27 5.22 1.20 8.95 1.80 3.78 2.27 4.72 1.20 0.70 0.70
7 post 16.60 3.27 11.22 2.20 15.95 2.80 9.78 3.27 11.72 2.20 7.70 1.70
8 prior 11.70 2.30 7.91 1.55 11.24 1.97 6.89 2.30 8.26 1.55 5.43 1.20
8 post 17.70 3.30 13.91 2.55 19.24 2.97 10.89 3.30 16.26 2.55 13.43 2.20
9 prior 12.47 2.33 9.80 1.80 13.56 2.09 7.68 2.33 11.46 1.80 9.46 1.55
9 post 19.47 3.33 16.80 2.80 22.56 3.09 14.68 3.33 20.46 2.80 18.46 2.55
10 prior 13.72 2.34 11.84 1.97 15.90 2.18 10.34 2.34 14.42 1.97 13.01 1.80
10 post 20.72 3.34 19.84 2.97 26.90 3.18 18.34 3.34 24.42 2.97 23.01 2.80
";

struct TableFit {
    compared: usize,
    misses: usize,
    max_dev: f64,
}

fn fit_edge_table(delta: f64) -> TableFit {
    let cfg = worked_example_scenario(delta);
    let batches = assemble_batches(&worked_example_records(), cfg.start_tick, None).unwrap();
    let state = replay(cfg, batches).unwrap();
    let mut fit = TableFit { compared: 0, misses: 0, max_dev: 0.0 };
    for line in EDGE_TABLE.lines().filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let tick: u64 = cols[0].parse().unwrap();
        let report = &state.event_log[tick as usize - 1];
        for (j, (a, b)) in CALL_PAIRS.iter().enumerate() {
            let (ta, tb) = (cols[2 + 2 * j], cols[3 + 2 * j]);
            if ta == "-" {
                continue;
            }
            let et = report.edges.iter().find(|e| e.pair == pair(a, b)).expect("edge present in the report");
            let got = if cols[1] == "prior" { et.prior } else { et.posterior };
            for (want, have) in [(ta, got.0), (tb, got.1)] {
                let dev = (want.parse::<f64>().unwrap() - have).abs();
                fit.compared += 1;
                fit.max_dev = fit.max_dev.max(dev);
                if dev > 0.01 + 1e-9 {
                    fit.misses += 1;
                }
            }
        }
    }
    fit
}

fn network_replay() -> Outcome {
    let fit = fit_edge_table(0.7);
    let alt = fit_edge_table(0.7048);
    let detail = format!(
        "discount 0.7: {} of {} values off by > 0.01 (max {:.4}); discount 0.7048: {} misses (max {:.4})",
        fit.misses, fit.compared, fit.max_dev, alt.misses, alt.max_dev
    );
    if fit.misses == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn multichannel_replay() -> Outcome {
    // (tick, prior?, p1-p2 alpha, beta, p2-p3 alpha, beta)
    let rows: [(u64, bool, [f64; 4]); 6] = [
        (1, true, [0.70, 1.41, 0.70, 1.41]),
        (1, false, [1.914, 3.01, 3.164, 4.01]),
        (2, true, [1.3398, 2.107, 2.2148, 2.807]),
        (2, false, [3.6968, 3.707, 5.8007, 5.407]),
        (3, true, [2.5878, 2.5949, 4.0605, 3.7849]),
        (3, false, [4.9808, 4.1949, 8.8894, 6.3849]),
    ];
    let cfg = multichannel_scenario();
    let state = replay(cfg, assemble_batches(&multichannel_records(), 0, None).unwrap()).unwrap();
    let mut max_dev: f64 = 0.0;
    for (tick, is_prior, want) in rows {
        let report = &state.event_log[tick as usize - 1];
        for (k, p) in [pair("p1", "p2"), pair("p2", "p3")].iter().enumerate() {
            let et = report.edges.iter().find(|e| &e.pair == p).unwrap();
            let got = if is_prior { et.prior } else { et.posterior };
            max_dev = max_dev.max((got.0 - want[2 * k]).abs()).max((got.1 - want[2 * k + 1]).abs());
        }
    }
    let detail = format!("24 values, max deviation {max_dev:.2e}");
    if max_dev <= 0.001 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn indicator_composition() -> Outcome {
    let m: [[f64; 11]; 5] = [
        [0.15, 0.21, 0.26, 0.32, 0.45, 0.71, 0.96, 0.99, 1.00, 1.00, 1.00],
        [0.00, 0.00, 0.01, 0.01, 0.04, 0.09, 0.22, 0.31, 0.32, 0.31, 0.36],
        [0.14, 0.05, 0.14, 0.04, 0.03, 0.00, 0.30, 1.00, 1.00, 1.00, 1.00],
        [0.67; 11],
        [0.83, 0.83, 0.83, 0.89, 0.89, 0.89, 0.89, 0.89, 0.89, 0.89, 0.89],
    ];
    let phi: [[f64; 11]; 5] = [
        [0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.04, 0.18, 0.19, 0.19, 0.21],
        [0.01, 0.01, 0.02, 0.01, 0.01, 0.04, 0.17, 0.58, 0.59, 0.59, 0.59],
        [0.08, 0.12, 0.14, 0.19, 0.27, 0.42, 0.57, 0.88, 0.88, 0.89, 0.89],
        [0.55, 0.55, 0.55, 0.59, 0.59, 0.63, 0.86, 0.99, 1.00, 1.00, 1.00],
        [0.83, 0.83, 0.83, 0.89, 0.89, 0.89, 0.96, 1.00, 1.00, 1.00, 1.00],
    ];
    let mut max_dev: f64 = 0.0;
    for col in 0..11 {
        let measures = [m[0][col], m[1][col], m[2][col], m[3][col], m[4][col]];
        let got = attack_indicators(&measures).map_err(|e| e.to_string())?;
        for r in 0..5 {
            max_dev = max_dev.max((round2(got[r]) - phi[r][col]).abs());
        }
    }
    let detail = format!("55 values, max deviation {max_dev:.2}");
    if max_dev <= 0.01 + 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synthetic_network() -> (ScenarioConfig, Vec<TickBatch>) {
    let mut cfg = multichannel_scenario();
    cfg.channels = vec![ChannelSpec::new(1, 0.8, 10.0), ChannelSpec::new(2, 0.35, 10.0)];
    cfg.discount = DiscountConfig::Fixed { delta: 0.8 };
    let priors = [(0.7, 1.41), (2.5, 0.9), (0.3, 0.2)];
    let pairs = [pair("p1", "p2"), pair("p1", "p3"), pair("p2", "p3")];
    cfg.edges = pairs
        .iter()
        .zip(priors)
        .map(|(p, (alpha, beta))| EdgeSpec {
            pair: p.clone(),
            origin: OriginClass::Kinship,
            prior: Some(PriorSpec::Gamma { alpha, beta }),
        })
        .collect();
    let rates = [
        RateTrajectory::Constant { rate: 2.0 },
        RateTrajectory::GammaWalk { alpha: 6.0, beta: 1.0, delta: 0.8 },
        RateTrajectory::Piecewise { steps: vec![(1, 0.4), (3, 7.0)] },
    ];
    let sim = simulate_network_data(
        &NetworkSimSpec {
            first_tick: 1,
            ticks: 5,
            channels: cfg.channels.clone(),
            pairs: pairs.iter().zip(rates).map(|(p, rate)| PairSim { pair: p.clone(), rate }).collect(),
        },
        2024,
    )
    .unwrap();
    let batches = sim
        .observations
        .into_iter()
        .enumerate()
        .map(|(i, observations)| TickBatch { observations, ..TickBatch::empty(i as u64 + 1) })
        .collect();
    (cfg, batches)
}

/// Per-pair joint likelihood by quadrature, with moment-matched posteriors
/// carried between ticks through the discount.
fn quadrature_log_likelihood(cfg: &ScenarioConfig, batches: &[TickBatch]) -> f64 {
    let DiscountConfig::Fixed { delta } = cfg.discount else { unreachable!() };
    let mut total = 0.0;
    for spec in &cfg.edges {
        let Some(PriorSpec::Gamma { mut alpha, mut beta }) = spec.prior else { unreachable!() };
        for (t, batch) in batches.iter().enumerate() {
            if t > 0 {
                alpha *= delta;
                beta *= delta;
            }
            let obs = batch.observations.iter().find(|o| o.pair == spec.pair).unwrap();
            let terms: Vec<(f64, f64)> =
                obs.values.iter().map(|(k, s)| (cfg.channels.iter().find(|c| c.id == *k).unwrap().efficiency, *s)).collect();
            let (a, b) = (alpha, beta);
            let ln_f = move |x: f64| {
                terms.iter().map(|(xi, n)| n * (xi * x).ln() - xi * x - ln_gamma(n + 1.0)).sum::<f64>() + gamma_ln_pdf(a, b, x)
            };
            let counts: f64 = obs.values.values().sum();
            let rate: f64 = obs.values.keys().map(|k| cfg.channels.iter().find(|c| c.id == *k).unwrap().efficiency).sum();
            let upper = (a + counts + 1.0) / (b + rate) * 2.0 + 80.0 * (a + counts + 1.0).sqrt() / (b + rate);
            let f = |x: f64| if x > 0.0 { ln_f(x).exp() } else { 0.0 };
            let evidence = tanh_sinh(f, 0.0, upper);
            let mean = tanh_sinh(|x| x * f(x), 0.0, upper) / evidence;
            let var = tanh_sinh(|x| (x - mean).powi(2) * f(x), 0.0, upper) / evidence;
            total += evidence.ln();
            alpha = mean * mean / var;
            beta = mean / var;
        }
    }
    total
}

fn relabel(cfg: &ScenarioConfig, batches: &[TickBatch]) -> (ScenarioConfig, Vec<TickBatch>) {
    let swap_entity = |id: &EntityId| -> EntityId {
        match id.as_str() {
            "p1" => "p3".into(),
            "p3" => "p1".into(),
            _ => id.clone(),
        }
    };
    let swap_pair = |p: &Pair| Pair::new(swap_entity(p.low()), swap_entity(p.high())).unwrap();
    let swap_channel = |k: u32| if k == 1 { 2 } else { 1 };
    let mut c = cfg.clone();
    for e in &mut c.edges {
        e.pair = swap_pair(&e.pair);
    }
    for ch in &mut c.channels {
        ch.id = swap_channel(ch.id);
    }
    let b = batches
        .iter()
        .map(|batch| {
            let mut observations: Vec<ObservationVector> = batch
                .observations
                .iter()
                .map(|o| ObservationVector {
                    pair: swap_pair(&o.pair),
                    values: o.values.iter().map(|(k, v)| (swap_channel(*k), *v)).collect(),
                    ..o.clone()
                })
                .collect();
            observations.reverse();
            TickBatch { observations, ..batch.clone() }
        })
        .collect();
    (c, b)
}

fn likelihood_oracle() -> Outcome {
    let (cfg, batches) = synthetic_network();
    let state = replay(cfg.clone(), batches.clone()).map_err(|e| e.to_string())?;
    let closed = state.log_likelihood;
    let oracle = quadrature_log_likelihood(&cfg, &batches);
    let rel = ((closed - oracle) / oracle).abs();
    let (pc, pb) = relabel(&cfg, &batches);
    let permuted = replay(pc, pb).map_err(|e| e.to_string())?.log_likelihood;
    let perm_dev = (permuted - closed).abs();
    let detail = format!("closed form {closed:.9}, quadrature {oracle:.9}, relative gap {rel:.1e}, permutation gap {perm_dev:.1e}");
    if rel <= 1e-6 && perm_dev <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn three_state_model() -> CompiledModel {
    let table = |p: &[f64]| Some(HoldingTime::Table { probs: p.to_vec() });
    let spec = ModelSpec {
        version: MODEL_VERSION,
        states: vec!["quiet".into(), "alert".into(), "active".into()],
        absorbing: vec![],
        embedded: vec![vec![0.0, 0.7, 0.3], vec![0.4, 0.0, 0.6], vec![0.5, 0.5, 0.0]],
        holding: vec![
            vec![None, table(&[0.2, 0.5, 0.3]), table(&[0.6, 0.4])],
            vec![table(&[0.7, 0.3]), None, table(&[0.1, 0.2, 0.3, 0.4])],
            vec![table(&[0.25, 0.25, 0.5]), table(&[1.0]), None],
        ],
        duration_cap: DEFAULT_DURATION_CAP,
        tasks: TaskModel {
            task_names: vec!["activity".into()],
            index_sets: vec![BTreeSet::from([0]), BTreeSet::from([0]), BTreeSet::from([0])],
            task_probs: vec![BTreeMap::from([(0, 0.1)]), BTreeMap::from([(0, 0.5)]), BTreeMap::from([(0, 0.9)])],
            emissions: vec![TaskEmission {
                off: Emission::Histogram { densities: vec![1.6, 0.4] },
                on: Emission::Histogram { densities: vec![0.3, 1.7] },
            }],
            extractors: vec![SignalExtractor::Max],
        },
        initial: vec![0.6, 0.3, 0.1],
    };
    CompiledModel::compile(spec, "model").unwrap()
}

fn bin(z: f64) -> usize {
    ((z * 2.0).floor() as usize).min(1)
}

fn filter_oracle() -> Outcome {
    const TICKS: usize = 10;
    const CHUNKS: usize = 50;
    const PER_CHUNK: usize = 10_000;
    let model = three_state_model();
    let observed = simulate_entity(&model, 7, "observed", TICKS as u64);
    let bins: Vec<usize> = observed.signals.iter().map(|s| bin(s.values[0].unwrap())).collect();

    let mut belief = model.initial_belief(0);
    let mut filtered = Vec::new();
    for z in &observed.signals {
        belief = filter_tick(&belief, model.transition(), model.tasks(), z).map_err(|e| e.to_string())?.0;
        filtered.push(belief.marginal());
    }

    let tallies: Vec<[[u64; 4]; TICKS]> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(99, &format!("oracle/{c}"));
            let mut tally = [[0u64; 4]; TICKS];
            for _ in 0..PER_CHUNK {
                let path = simulate_entity_path(&model, TICKS as u64, &mut rng);
                for t in 0..TICKS {
                    if bin(path.signals[t].values[0].unwrap()) != bins[t] {
                        break;
                    }
                    tally[t][path.states[t + 1]] += 1;
                    tally[t][3] += 1;
                }
            }
            tally
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut min_accepted = u64::MAX;
    for t in 0..TICKS {
        let accepted: u64 = tallies.iter().map(|x| x[t][3]).sum();
        min_accepted = min_accepted.min(accepted);
        for s in 0..3 {
            let hits: u64 = tallies.iter().map(|x| x[t][s]).sum();
            let p_hat = hits as f64 / accepted as f64;
            let p = filtered[t][s];
            let se = (p * (1.0 - p) / accepted as f64).sqrt();
            worst = worst.max((p_hat - p).abs() / se);
        }
    }
    let detail = format!(
        "{} paths, at least {min_accepted} accepted per tick, worst deviation {worst:.2} standard errors",
        CHUNKS * PER_CHUNK
    );
    if worst <= 3.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn property_suites() -> Outcome {
    let model = CompiledModel::compile(threat_model([0.2, 0.2, 0.2, 0.2, 0.2]), "m").unwrap();
    let tasks_n = model.num_tasks();
    runner(500)
        .run(
            &(prop::collection::vec(0.001f64..1.0, 5), prop::collection::vec(prop::option::of(0.0f64..=1.0), tasks_n)),
            |(weights, values)| {
                let total: f64 = weights.iter().sum();
                let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
                let b = StateBelief::from_marginal(&pi, model.duration_cap()).unwrap();
                prop_assert!((b.total() - 1.0).abs() <= 1e-12);
                let p = predict_step(&b, model.transition(), 1).unwrap();
                prop_assert!((p.total() - 1.0).abs() <= 1e-12);
                let z = SignalVector { values, tick: 1 };
                let lik = likelihood_vector(model.tasks(), &z, 5).unwrap();
                let u = update_step(&p, &lik).unwrap();
                prop_assert!((u.total() - 1.0).abs() <= 1e-12);
                Ok(())
            },
        )
        .map_err(|e| format!("belief normalization: {e}"))?;

    runner(2000)
        .run(&(0.01f64..100.0, 0.01f64..100.0, 0.05f64..=1.0), |(a, b, d)| {
            let before = EdgeBelief::fixed(pair("a", "b"), a, b, d).unwrap();
            let after = evolve_prior(&before, d).unwrap();
            prop_assert!((after.mean() - before.mean()).abs() <= 1e-12 * before.mean().max(1.0));
            prop_assert!((after.variance() / before.variance() - 1.0 / d).abs() <= 1e-9);
            Ok(())
        })
        .map_err(|e| format!("discount moments: {e}"))?;

    runner(10_000)
        .run(&prop::array::uniform5(0.0f64..=1.0), |m| {
            let phi = attack_indicators(&m).unwrap();
            for r in 0..5 {
                prop_assert!((0.0..=1.0).contains(&phi[r]));
                if r > 0 {
                    prop_assert!(phi[r - 1] <= phi[r]);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("indicator chain: {e}"))?;

    for d in [0.05, 0.3, 0.7, 0.99] {
        if adaptive_discount(d, 0.0) != 1.0 || (adaptive_discount(d, 50.0) - d).abs() > 1e-9 {
            return Err(format!("adaptive discount endpoints at baseline {d}"));
        }
    }

    decoupling_isolation()?;
    thread_determinism()?;
    Ok("normalization, discount moments, 10000 indicator chains, adaptive endpoints, decoupling, thread determinism".into())
}

fn worked_state_at(tick: u64) -> (ScenarioState, Vec<TickBatch>) {
    let cfg = worked_example_scenario(0.7);
    let batches = assemble_batches(&worked_example_records(), 0, None).unwrap();
    let state = replay(cfg, batches[..tick as usize].to_vec()).unwrap();
    (state, batches)
}

fn decoupling_isolation() -> Result<(), String> {
    let (state, batches) = worked_state_at(6);
    let base_batch = batches[6].clone();
    let base = commit_tick(&state, base_batch.clone()).map_err(|e| e.to_string())?;

    // Changing one pair's calls touches only that edge.
    let mut calls = base_batch.clone();
    let target = pair("p1", "p2");
    for c in &mut calls.communications {
        if Pair::new(c.entity_a.clone(), c.entity_b.clone()).unwrap() == target {
            c.raw += 4.0;
        }
    }
    let changed = commit_tick(&state, calls).map_err(|e| e.to_string())?;
    for e in base.graph.edges() {
        let other = changed.graph.edge(e.pair()).unwrap();
        let same = e.belief.alpha.to_bits() == other.belief.alpha.to_bits()
            && e.belief.beta.to_bits() == other.belief.beta.to_bits();
        if (e.pair() == &target) == same {
            return Err(format!("edge {} isolation broken", e.pair()));
        }
    }
    if base.entity_beliefs != changed.entity_beliefs {
        return Err("call data leaked into entity beliefs".into());
    }

    // Changing one entity's signals touches only that entity's filter.
    let mut signals = base_batch;
    let who = EntityId::from("p2");
    signals.signals.insert(who.clone(), vec![Some(0.99); 5]);
    let changed = commit_tick(&state, signals).map_err(|e| e.to_string())?;
    for (id, b) in &base.entity_beliefs {
        if (id == &who) == (b == &changed.entity_beliefs[id]) {
            return Err(format!("entity {id} isolation broken"));
        }
    }
    if base.graph.edges().ne(changed.graph.edges()) {
        return Err("signals leaked into edge beliefs".into());
    }
    Ok(())
}

fn thread_determinism() -> Result<(), String> {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let cfg = worked_example_scenario(0.7);
            let batches = assemble_batches(&worked_example_records(), 0, None).unwrap();
            replay(cfg, batches).unwrap().to_snapshot_json()
        })
    };
    if run(1) == run(8) {
        Ok(())
    } else {
        Err("replay differs between 1 and 8 worker threads".into())
    }
}

fn cell_trajectory() -> Outcome {
    let (state, _) = worked_state_at(10);
    let model = state.cell_model("cell-1").map_err(|e| e.to_string())?;
    let mobilised = model.transition().space().index_of("Mobilised").unwrap();
    let series: Vec<f64> = state.event_log.iter().map(|r| r.cell_marginals["cell-1"][mobilised]).collect();
    let tail = &series[series.len() - 3..];
    let detail = format!("Mobilised over the last three ticks: {:.3}, {:.3}, {:.3}", tail[0], tail[1], tail[2]);
    if tail.windows(2).all(|w| w[1] > w[0]) {
        Ok(detail)
    } else {
        Err(detail)
    }
}
