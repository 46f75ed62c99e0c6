use std::collections::BTreeSet;

use super::belief::StateBelief;
use super::tasks::{SignalVector, TaskModel};
use super::transition::TransitionModel;
use crate::error::{Error, Result};
use crate::numeric::stable_sum;

/// Advances `belief` by `n_ticks` applications of the semi-Markov operator.
pub fn predict_step(belief: &StateBelief, model: &TransitionModel, n_ticks: u32) -> Result<StateBelief> {
    if n_ticks == 0 {
        return Err(Error::InvalidArgument("n_ticks must be at least 1".into()));
    }
    check_shape(belief, model)?;
    let mut joint = belief.joint().to_vec();
    for _ in 0..n_ticks {
        joint = model.apply(&joint)?;
    }
    let mut out = StateBelief::from_joint(
        belief.num_states(),
        belief.duration_cap(),
        joint,
        belief.tick + u64::from(n_ticks),
    );
    out.normalize();
    Ok(out)
}

fn check_shape(belief: &StateBelief, model: &TransitionModel) -> Result<()> {
    if belief.num_states() != model.num_states() || belief.duration_cap() != model.duration_cap() {
        return Err(Error::InvalidArgument(format!(
            "belief shape {}x{} does not match model {}x{}",
            belief.num_states(),
            belief.duration_cap(),
            model.num_states(),
            model.duration_cap()
        )));
    }
    Ok(())
}

/// `P(z | X = x_i)` under independent per-task indicators.
///
/// Tasks in the state's index set mix their two emission densities with the
/// state's task probability; all other tasks mix them 50/50. Missing signals
/// contribute a factor of 1.
pub fn signal_likelihood(tasks: &TaskModel, z: &SignalVector, state: usize) -> Result<f64> {
    let mut lik = 1.0;
    for (j, value) in z.values.iter().enumerate().take(tasks.num_tasks()) {
        let Some(v) = *value else { continue };
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::SignalOutOfRange { task: j, value: v });
        }
        let p = tasks.task_prob(state, j);
        let e = &tasks.emissions[j];
        lik *= p * e.on.pdf(v) + (1.0 - p) * e.off.pdf(v);
    }
    Ok(lik)
}

pub fn likelihood_vector(tasks: &TaskModel, z: &SignalVector, num_states: usize) -> Result<Vec<f64>> {
    if z.values.len() != tasks.num_tasks() {
        return Err(Error::InvalidArgument(format!(
            "signal vector has {} entries, task model has {}",
            z.values.len(),
            tasks.num_tasks()
        )));
    }
    (0..num_states).map(|i| signal_likelihood(tasks, z, i)).collect()
}

/// Bayes update of the joint belief by a per-state likelihood vector.
pub fn update_step(belief: &StateBelief, likelihoods: &[f64]) -> Result<StateBelief> {
    update_with_evidence(belief, likelihoods).map(|(b, _)| b)
}

fn update_with_evidence(belief: &StateBelief, likelihoods: &[f64]) -> Result<(StateBelief, f64)> {
    if likelihoods.len() != belief.num_states() {
        return Err(Error::InvalidLikelihood(format!(
            "expected {} entries, got {}",
            belief.num_states(),
            likelihoods.len()
        )));
    }
    if likelihoods.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidLikelihood("entries must be finite and non-negative".into()));
    }
    let cap = belief.duration_cap();
    let joint: Vec<f64> = belief
        .joint()
        .iter()
        .enumerate()
        .map(|(k, b)| b * likelihoods[k / cap])
        .collect();
    let evidence = stable_sum(joint.iter().copied());
    if evidence <= 0.0 {
        return Err(Error::TotalEvidenceZero);
    }
    let mut out = StateBelief::from_joint(belief.num_states(), cap, joint, belief.tick);
    out.normalize();
    Ok((out, evidence))
}

/// One predict + update cycle; returns the posterior and `log P(z_t | past)`.
pub fn filter_tick(
    belief: &StateBelief,
    model: &TransitionModel,
    tasks: &TaskModel,
    z: &SignalVector,
) -> Result<(StateBelief, f64)> {
    let predicted = predict_step(belief, model, 1)?;
    if z.is_vacuous() {
        return Ok((predicted, 0.0));
    }
    let lik = likelihood_vector(tasks, z, model.num_states())?;
    let (post, evidence) = update_with_evidence(&predicted, &lik)?;
    Ok((post, evidence.ln()))
}

pub fn marginal_threat(belief: &StateBelief, threat_set: &BTreeSet<usize>) -> f64 {
    belief.marginal_threat(threat_set)
}
