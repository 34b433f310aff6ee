//! Turns constraint measurements and multipliers into the primal
//! Lagrangian term (what the primal player descends on) and the dual
//! signal (what the dual player ascends on).
//!
//! Supported formulations:
//!
//! * Lagrangian: `<lambda, g>`; dual signal `g`.
//! * Augmented Lagrangian (Powell-Hestenes-Rockafellar form):
//!   inequality `sum (c/2) [max(0, g + lambda/c)^2 - (lambda/c)^2]`,
//!   equality `<mu, h> + sum (c/2) h^2`; dual signal `c * g`, so a unit
//!   dual learning rate gives the classical `lambda <- [lambda + c g]_+`.
//! * Quadratic penalty: `sum (c/2) max(0, g)^2` or `sum (c/2) h^2`; no
//!   dual variables.
//!
//! When a group reports a strict violation, it replaces the differentiable
//! violation in the dual signal only.

use std::collections::BTreeMap;

use crate::cmp::{ConstraintGroup, ConstraintState, ConstraintType, Formulation};
use crate::error::{Error, Result};
use crate::multipliers::{gather, Multiplier};

/// Strictly positive penalty strength, either a scalar broadcast over the
/// group or one value per constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyCoefficient {
    values: Vec<f64>,
}

impl PenaltyCoefficient {
    pub fn scalar(value: f64) -> Result<Self> {
        Self::vector(vec![value])
    }

    pub fn vector(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("penalty coefficient is empty".into()));
        }
        if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositivePenalty(bad));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    /// Coefficients matching the `n` entries of a measurement observed at
    /// `indices`.
    fn for_entries(&self, n: usize, indices: Option<&[usize]>) -> Result<Vec<f64>> {
        if self.is_scalar() {
            return Ok(vec![self.values[0]; n]);
        }
        let out = gather(&self.values, indices)?;
        if out.len() != n {
            return Err(Error::dims("penalty coefficient", n, out.len()));
        }
        Ok(out)
    }
}

/// Multiplicative penalty growth: when the violation did not shrink by at
/// least `required_decrease_ratio`, multiply by `growth_factor`, capped at
/// `max_value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyScheduler {
    growth_factor: f64,
    required_decrease_ratio: f64,
    max_value: f64,
}

impl Default for PenaltyScheduler {
    fn default() -> Self {
        Self {
            growth_factor: 10.0,
            required_decrease_ratio: 0.25,
            max_value: 1e8,
        }
    }
}

impl PenaltyScheduler {
    pub fn new(growth_factor: f64, required_decrease_ratio: f64, max_value: f64) -> Result<Self> {
        if !(growth_factor.is_finite() && growth_factor > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "penalty growth factor must be > 1, got {growth_factor}"
            )));
        }
        if !(required_decrease_ratio > 0.0 && required_decrease_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "required decrease ratio must lie in (0, 1), got {required_decrease_ratio}"
            )));
        }
        if !(max_value.is_finite() && max_value > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "penalty cap must be positive, got {max_value}"
            )));
        }
        Ok(Self {
            growth_factor,
            required_decrease_ratio,
            max_value,
        })
    }

    pub fn growth_factor(&self) -> f64 {
        self.growth_factor
    }

    pub fn required_decrease_ratio(&self) -> f64 {
        self.required_decrease_ratio
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn schedule(
        &self,
        penalty: &PenaltyCoefficient,
        violation_norm_now: f64,
        violation_norm_prev: f64,
    ) -> PenaltyCoefficient {
        if !(violation_norm_now > self.required_decrease_ratio * violation_norm_prev) {
            return penalty.clone();
        }
        let values = penalty
            .values
            .iter()
            .map(|&c| {
                if c >= self.max_value {
                    c
                } else {
                    (self.growth_factor * c).min(self.max_value)
                }
            })
            .collect();
        PenaltyCoefficient { values }
    }
}

pub fn schedule_penalty(
    penalty: &PenaltyCoefficient,
    scheduler: &PenaltyScheduler,
    violation_norm_now: f64,
    violation_norm_prev: f64,
) -> PenaltyCoefficient {
    scheduler.schedule(penalty, violation_norm_now, violation_norm_prev)
}

/// Infinity norm of the infeasible part of a measurement.
pub fn violation_norm(constraint_type: ConstraintType, violation: &[f64]) -> f64 {
    violation.iter().fold(0.0, |acc: f64, &v| match constraint_type {
        ConstraintType::Inequality => acc.max(v.max(0.0)),
        ConstraintType::Equality => acc.max(v.abs()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionPair {
    /// Added to the primal Lagrangian; multipliers are constants here.
    pub primal_term: f64,
    /// Per-constraint quantity the dual optimizer ascends on. Empty for
    /// formulations without dual variables.
    pub dual_signal: Vec<f64>,
}

fn check_lengths(group: &ConstraintGroup, state: &ConstraintState, lambda: &[f64]) -> Result<()> {
    if lambda.len() != state.violation.len() {
        return Err(Error::evaluation(
            Some(group.id()),
            format!(
                "{} multiplier entries for {} violation entries",
                lambda.len(),
                state.violation.len()
            ),
        ));
    }
    Ok(())
}

pub fn lagrangian_contribution(
    group: &ConstraintGroup,
    state: &ConstraintState,
    multiplier: &Multiplier,
) -> Result<ContributionPair> {
    let lambda = multiplier.values_for(state)?;
    check_lengths(group, state, &lambda)?;
    let primal_term = lambda
        .iter()
        .zip(&state.violation)
        .fold(0.0, |acc, (l, g)| acc + l * g);
    Ok(ContributionPair {
        primal_term,
        dual_signal: state.dual_measurement().to_vec(),
    })
}

pub fn augmented_lagrangian_contribution(
    group: &ConstraintGroup,
    state: &ConstraintState,
    multiplier: &Multiplier,
    penalty: &PenaltyCoefficient,
) -> Result<ContributionPair> {
    let lambda = multiplier.values_for(state)?;
    check_lengths(group, state, &lambda)?;
    let n = state.violation.len();
    let c = penalty.for_entries(n, state.observed_indices.as_deref())?;

    let mut primal_term = 0.0;
    for i in 0..n {
        let g = state.violation[i];
        primal_term += match group.constraint_type() {
            ConstraintType::Inequality => {
                let shift = lambda[i] / c[i];
                let active = (g + shift).max(0.0);
                0.5 * c[i] * (active * active - shift * shift)
            }
            ConstraintType::Equality => lambda[i] * g + 0.5 * c[i] * g * g,
        };
    }
    let dual_signal = state
        .dual_measurement()
        .iter()
        .zip(&c)
        .map(|(s, ci)| ci * s)
        .collect();
    Ok(ContributionPair {
        primal_term,
        dual_signal,
    })
}

pub fn quadratic_penalty_contribution(
    group: &ConstraintGroup,
    state: &ConstraintState,
    penalty: &PenaltyCoefficient,
) -> Result<ContributionPair> {
    if group.multiplier().is_some() {
        return Err(Error::InvalidGroup {
            group: group.id().to_owned(),
            reason: "quadratic penalty groups cannot hold a multiplier".into(),
        });
    }
    let n = state.violation.len();
    let c = penalty.for_entries(n, state.observed_indices.as_deref())?;
    let primal_term = state
        .violation
        .iter()
        .zip(&c)
        .fold(0.0, |acc, (&g, &ci)| {
            let v = match group.constraint_type() {
                ConstraintType::Inequality => g.max(0.0),
                ConstraintType::Equality => g,
            };
            acc + 0.5 * ci * v * v
        });
    Ok(ContributionPair {
        primal_term,
        dual_signal: Vec::new(),
    })
}

fn missing(group: &ConstraintGroup, what: &str) -> Error {
    Error::InvalidGroup {
        group: group.id().to_owned(),
        reason: format!("{} group has no {what}", group.formulation()),
    }
}

/// Dispatches on the group's formulation.
pub fn group_contribution(group: &ConstraintGroup, state: &ConstraintState) -> Result<ContributionPair> {
    match group.formulation() {
        Formulation::Lagrangian => {
            let m = group.multiplier().ok_or_else(|| missing(group, "multiplier"))?;
            lagrangian_contribution(group, state, m)
        }
        Formulation::AugmentedLagrangian => {
            let m = group.multiplier().ok_or_else(|| missing(group, "multiplier"))?;
            let p = group.penalty().ok_or_else(|| missing(group, "penalty"))?;
            augmented_lagrangian_contribution(group, state, m, p)
        }
        Formulation::QuadraticPenalty => {
            let p = group.penalty().ok_or_else(|| missing(group, "penalty"))?;
            quadratic_penalty_contribution(group, state, p)
        }
    }
}

/// Derivative of the group's primal term with respect to each violation
/// entry. Multiplying by the constraint gradients and summing gives the
/// group's share of the primal Lagrangian gradient.
///
/// At the kink of `max(0, .)` the weight is 0.
pub fn primal_weights(group: &ConstraintGroup, state: &ConstraintState) -> Result<Vec<f64>> {
    let n = state.violation.len();
    let ty = group.constraint_type();
    match group.formulation() {
        Formulation::Lagrangian => {
            let m = group.multiplier().ok_or_else(|| missing(group, "multiplier"))?;
            let lambda = m.values_for(state)?;
            check_lengths(group, state, &lambda)?;
            Ok(lambda)
        }
        Formulation::AugmentedLagrangian => {
            let m = group.multiplier().ok_or_else(|| missing(group, "multiplier"))?;
            let p = group.penalty().ok_or_else(|| missing(group, "penalty"))?;
            let lambda = m.values_for(state)?;
            check_lengths(group, state, &lambda)?;
            let c = p.for_entries(n, state.observed_indices.as_deref())?;
            Ok((0..n)
                .map(|i| {
                    let w = c[i] * state.violation[i] + lambda[i];
                    match ty {
                        ConstraintType::Inequality => w.max(0.0),
                        ConstraintType::Equality => w,
                    }
                })
                .collect())
        }
        Formulation::QuadraticPenalty => {
            let p = group.penalty().ok_or_else(|| missing(group, "penalty"))?;
            let c = p.for_entries(n, state.observed_indices.as_deref())?;
            Ok((0..n)
                .map(|i| {
                    let g = state.violation[i];
                    match ty {
                        ConstraintType::Inequality => c[i] * g.max(0.0),
                        ConstraintType::Equality => c[i] * g,
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledLagrangian {
    pub primal_lagrangian: f64,
    pub dual_signals: BTreeMap<String, Vec<f64>>,
}

/// `loss + sum of primal terms`, plus the per-group dual signals.
/// Contributions are summed in the order given.
pub fn assemble_lagrangian<'a, I>(loss: f64, contributions: I) -> AssembledLagrangian
where
    I: IntoIterator<Item = (&'a str, &'a ContributionPair)>,
{
    let mut primal_lagrangian = loss;
    let mut dual_signals = BTreeMap::new();
    for (id, pair) in contributions {
        primal_lagrangian += pair.primal_term;
        dual_signals.insert(id.to_owned(), pair.dual_signal.clone());
    }
    AssembledLagrangian {
        primal_lagrangian,
        dual_signals,
    }
}
