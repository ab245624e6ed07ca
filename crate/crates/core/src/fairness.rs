//! Group fairness metrics and the scalar fitness driving the search.
//!
//! * maximin fairness: the smallest per-group influenced fraction;
//! * diversity constraint violation: mean relative shortfall of each group
//!   against what greedy achieves inside that group with its proportional
//!   share of the seed budget;
//! * price of fairness: unconstrained spread over fair spread.

use serde::{Deserialize, Serialize};

use crate::diffusion::InfluenceEstimate;
use crate::error::{FimError, Result};

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub mf: f64,
    pub dcv: f64,
    pub f_value: f64,
    pub pof: Option<f64>,
    pub per_group_fraction: Vec<f64>,
    pub per_group_violation: Vec<f64>,
}

fn check_groups(estimate: &InfluenceEstimate, group_sizes: &[usize]) -> Result<()> {
    if estimate.per_group.len() != group_sizes.len() || group_sizes.is_empty() {
        return Err(FimError::Contract(format!(
            "estimate covers {} groups, expected {}",
            estimate.per_group.len(),
            group_sizes.len()
        )));
    }
    if group_sizes.contains(&0) {
        return Err(FimError::Contract("empty group".into()));
    }
    Ok(())
}

pub fn group_fractions(estimate: &InfluenceEstimate, group_sizes: &[usize]) -> Result<Vec<f64>> {
    check_groups(estimate, group_sizes)?;
    Ok(estimate
        .per_group
        .iter()
        .zip(group_sizes)
        .map(|(&reached, &size)| reached / size as f64)
        .collect())
}

pub fn maximin_fairness(estimate: &InfluenceEstimate, group_sizes: &[usize]) -> Result<f64> {
    Ok(group_fractions(estimate, group_sizes)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// `max((b_i - I_i) / b_i, 0)` for each group.
pub fn group_violations(estimate: &InfluenceEstimate, baselines: &[f64]) -> Result<Vec<f64>> {
    if estimate.per_group.len() != baselines.len() || baselines.is_empty() {
        return Err(FimError::Contract(format!(
            "{} baselines for {} groups",
            baselines.len(),
            estimate.per_group.len()
        )));
    }
    if let Some(b) = baselines.iter().find(|&&b| !(b > 0.0)) {
        return Err(FimError::Contract(format!("nonpositive group baseline {b}")));
    }
    Ok(estimate
        .per_group
        .iter()
        .zip(baselines)
        .map(|(&reached, &b)| ((b - reached) / b).max(0.0))
        .collect())
}

pub fn diversity_constraint_violation(estimate: &InfluenceEstimate, baselines: &[f64]) -> Result<f64> {
    let v = group_violations(estimate, baselines)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// `λ·mf − (1−λ)·dcv`.
pub fn evaluate_fitness(mf: f64, dcv: f64, lambda: f64) -> f64 {
    lambda * mf - (1.0 - lambda) * dcv
}

pub fn price_of_fairness(opt_influence: f64, fair_influence: f64) -> Result<f64> {
    if !(fair_influence > 0.0) {
        return Err(FimError::Contract(format!(
            "fair influence must be positive, got {fair_influence}"
        )));
    }
    Ok(opt_influence / fair_influence)
}

pub fn validate_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(FimError::Validation(format!("lambda {lambda} outside [0, 1]")))
    }
}

/// All metrics for one estimate. `pof` is filled by the caller when a
/// reference spread is available.
pub fn fairness_report(
    estimate: &InfluenceEstimate,
    group_sizes: &[usize],
    baselines: &[f64],
    lambda: f64,
) -> Result<FairnessReport> {
    let per_group_fraction = group_fractions(estimate, group_sizes)?;
    let per_group_violation = group_violations(estimate, baselines)?;
    let mf = per_group_fraction.iter().copied().fold(f64::INFINITY, f64::min);
    let dcv = per_group_violation.iter().sum::<f64>() / per_group_violation.len() as f64;
    Ok(FairnessReport {
        mf,
        dcv,
        f_value: evaluate_fitness(mf, dcv, lambda),
        pof: None,
        per_group_fraction,
        per_group_violation,
    })
}
