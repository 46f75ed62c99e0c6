//! Seeded generators for synthetic networks and threat-state paths.
//!
//! Every stream is a ChaCha20 generator keyed by the master seed, with the
//! stream number taken from an FNV-1a hash of a stable label (pair or entity
//! id). Output therefore depends only on the seed and the labels, never on
//! thread scheduling or platform.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CommRow, DataRecord};
use crate::edge::{ChannelSpec, ObservationVector};
use crate::error::{Error, Result};
use crate::ids::{EntityId, Pair};
use crate::model::CompiledModel;
use crate::scenario::ScenarioConfig;
use crate::state::SignalVector;

pub const GENERATOR: &str = "chacha20/fnv1a-stream/v1";

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent generator for the stream named `label`.
pub fn stream(seed: u64, label: &str) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}

/// Latent communication rate over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateTrajectory {
    Constant { rate: f64 },
    /// `(first_tick, rate)` steps; ticks before the first step have rate 0.
    Piecewise { steps: Vec<(u64, f64)> },
    /// Starts from Gamma(alpha, beta) and takes mean-preserving multiplicative
    /// steps `eta / delta`, `eta ~ Beta(delta * alpha, (1 - delta) * alpha)`.
    GammaWalk { alpha: f64, beta: f64, delta: f64 },
}

impl RateTrajectory {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            RateTrajectory::Constant { rate } if !(*rate >= 0.0) => bad(format!("rate {rate} must be >= 0")),
            RateTrajectory::Piecewise { steps } if steps.iter().any(|(_, r)| !(*r >= 0.0)) => {
                bad("piecewise rates must be >= 0".into())
            }
            RateTrajectory::GammaWalk { alpha, beta, delta }
                if !(*alpha > 0.0 && *beta > 0.0 && *delta > 0.0 && *delta <= 1.0) =>
            {
                bad("gamma walk needs alpha, beta > 0 and delta in (0, 1]".into())
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, ticks: &[u64], rng: &mut R) -> Vec<f64> {
        match self {
            RateTrajectory::Constant { rate } => vec![*rate; ticks.len()],
            RateTrajectory::Piecewise { steps } => ticks
                .iter()
                .map(|t| steps.iter().filter(|(from, _)| from <= t).max_by_key(|(from, _)| *from).map_or(0.0, |s| s.1))
                .collect(),
            RateTrajectory::GammaWalk { alpha, beta, delta } => {
                let mut phi = Gamma::new(*alpha, 1.0 / beta).expect("validated").sample(rng);
                let step = (*delta < 1.0).then(|| Beta::new(delta * alpha, (1.0 - delta) * alpha).expect("validated"));
                let mut out = Vec::with_capacity(ticks.len());
                for i in 0..ticks.len() {
                    if i > 0 {
                        if let Some(b) = &step {
                            phi *= b.sample(rng) / delta;
                        }
                    }
                    out.push(phi);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSim {
    pub pair: Pair,
    pub rate: RateTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSimSpec {
    pub first_tick: u64,
    pub ticks: u64,
    pub channels: Vec<ChannelSpec>,
    pub pairs: Vec<PairSim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSim {
    /// Per tick, one observation per simulated pair; values are integer counts.
    pub observations: Vec<Vec<ObservationVector>>,
    #[serde(with = "crate::ids::pair_map")]
    pub latent: BTreeMap<Pair, Vec<f64>>,
}

/// Samples `Poisson(efficiency * rate)` counts per channel, pair and tick.
pub fn simulate_network_data(spec: &NetworkSimSpec, seed: u64) -> Result<NetworkSim> {
    for c in &spec.channels {
        c.validate()?;
    }
    for p in &spec.pairs {
        p.rate.validate()?;
    }
    let ticks: Vec<u64> = (spec.first_tick..spec.first_tick + spec.ticks).collect();
    let per_pair: Vec<(Pair, Vec<f64>, Vec<ObservationVector>)> = spec
        .pairs
        .par_iter()
        .map(|p| {
            let mut rng = stream(seed, &format!("pair/{}", p.pair));
            let rates = p.rate.sample(&ticks, &mut rng);
            let obs = ticks
                .iter()
                .zip(&rates)
                .map(|(t, phi)| {
                    let values = spec.channels.iter().map(|c| {
                        let mean = c.efficiency * phi;
                        let n = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(&mut rng) } else { 0.0 };
                        (c.id, n)
                    });
                    ObservationVector::monitored(p.pair.clone(), *t, values.collect::<Vec<_>>())
                })
                .collect();
            (p.pair.clone(), rates, obs)
        })
        .collect();
    let mut observations = vec![Vec::with_capacity(spec.pairs.len()); ticks.len()];
    let mut latent = BTreeMap::new();
    for (pair, rates, obs) in per_pair {
        for (slot, o) in observations.iter_mut().zip(obs) {
            slot.push(o);
        }
        latent.insert(pair, rates);
    }
    Ok(NetworkSim { observations, latent })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPath {
    /// State and duration at ticks `0..=n_ticks`; index 0 is the initial draw.
    pub states: Vec<usize>,
    pub durations: Vec<usize>,
    /// Task indicators and signals for ticks `1..=n_ticks`.
    pub tasks: Vec<Vec<bool>>,
    pub signals: Vec<SignalVector>,
}

fn categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        last = i;
        if u < *w {
            return i;
        }
        u -= w;
    }
    last
}

/// One latent path through `model` with its task draws and emitted signals.
pub fn simulate_entity_path<R: Rng>(model: &CompiledModel, n_ticks: u64, rng: &mut R) -> EntityPath {
    let tr = model.transition();
    let tasks = model.tasks();
    let cap = tr.duration_cap();
    let draw_exit = |state: usize, rng: &mut R| -> (usize, usize) {
        let next = categorical(&tr.embedded()[state], rng);
        let hold = tr.holding(state, next).map_or(usize::MAX, |h| h.sample(rng));
        (next, hold)
    };
    let mut state = categorical(&model.spec().initial, rng);
    let mut duration = 1usize;
    let mut exit = if tr.space().is_absorbing(state) { None } else { Some(draw_exit(state, rng)) };
    let mut path = EntityPath {
        states: vec![state],
        durations: vec![1],
        tasks: Vec::with_capacity(n_ticks as usize),
        signals: Vec::with_capacity(n_ticks as usize),
    };
    for t in 1..=n_ticks {
        match exit {
            Some((next, hold)) if duration >= hold => {
                state = next;
                duration = 1;
                exit = if tr.space().is_absorbing(state) { None } else { Some(draw_exit(state, rng)) };
            }
            _ => duration += 1,
        }
        let theta: Vec<bool> = (0..tasks.num_tasks()).map(|j| rng.random::<f64>() < tasks.task_prob(state, j)).collect();
        let values = theta
            .iter()
            .zip(&tasks.emissions)
            .map(|(on, e)| Some(if *on { e.on.sample(rng) } else { e.off.sample(rng) }))
            .collect();
        path.states.push(state);
        path.durations.push(duration.min(cap));
        path.tasks.push(theta);
        path.signals.push(SignalVector { values, tick: t });
    }
    path
}

/// Seeded variant of [`simulate_entity_path`] on the stream for `label`.
pub fn simulate_entity(model: &CompiledModel, seed: u64, label: &str, n_ticks: u64) -> EntityPath {
    simulate_entity_path(model, n_ticks, &mut stream(seed, &format!("entity/{label}")))
}

/// Input for generating a full data stream for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub scenario: ScenarioConfig,
    pub ticks: u64,
    #[serde(default)]
    pub pairs: Vec<PairSim>,
    /// Emit signals sampled from each entity's model.
    #[serde(default = "yes")]
    pub signals: bool,
}

fn yes() -> bool {
    true
}

/// Generates a JSONL-ready record stream for `spec.scenario`.
///
/// Raw channel values are counts multiplied back by `r_max / scale_target`
/// so that ingestion scales them to the sampled counts.
pub fn simulate_records(spec: &SimulationSpec, seed: u64) -> Result<Vec<DataRecord>> {
    let cfg = &spec.scenario;
    let first = cfg.start_tick + 1;
    let net = simulate_network_data(
        &NetworkSimSpec { first_tick: first, ticks: spec.ticks, channels: cfg.channels.clone(), pairs: spec.pairs.clone() },
        seed,
    )?;
    let mut records = Vec::new();
    let signals: Vec<(EntityId, EntityPath)> = if spec.signals {
        cfg.entities
            .iter()
            .map(|e| {
                let model = cfg.model(e.model.as_deref(), "entities")?;
                Ok((e.id.clone(), simulate_entity(model, seed, e.id.as_str(), spec.ticks)))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    for (i, tick_obs) in net.observations.iter().enumerate() {
        let tick = first + i as u64;
        for obs in tick_obs {
            for (k, n) in &obs.values {
                let ch = crate::edge::find_channel(&cfg.channels, *k)?;
                records.push(DataRecord::Comm(CommRow {
                    tick,
                    entity_a: obs.pair.low().clone(),
                    entity_b: obs.pair.high().clone(),
                    channel_id: *k,
                    raw_value: n * ch.r_max / ch.scale_target,
                    monitored: true,
                }));
            }
        }
        for (id, path) in &signals {
            records.push(DataRecord::Signal { tick, entity: id.clone(), values: path.signals[i].values.clone() });
        }
    }
    Ok(records)
}
