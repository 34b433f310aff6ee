//! Primal and dual optimizers and the update schemes that order them.
//!
//! A [`ConstrainedOptimizer`] owns one primal optimizer, one dual optimizer
//! configuration and per-group dual buffers. [`ConstrainedOptimizer::roll`]
//! performs one full step: evaluate, assemble the Lagrangian, compute
//! gradients and update primal and dual variables in the order given by
//! the [`Scheme`]. Gradients are recomputed from scratch at every
//! evaluation, so nothing accumulates across rolls.
//!
//! A roll either commits completely or not at all: on error the problem,
//! the multipliers and every optimizer buffer are left as they were.

mod dual;
mod primal;

use std::collections::BTreeMap;

pub use dual::{dual_step, DualBuffers, DualKind, DualOptimizer};
pub use primal::{primal_step, PrimalBuffers, PrimalKind, PrimalOptimizer};

use crate::cmp::{CmpState, ConstrainedProblem, Oracle};
use crate::error::{Error, Result};
use crate::formulations::{assemble_lagrangian, group_contribution};
use crate::gradients::lagrangian_gradient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Primal and dual steps both use the evaluation at `(x_t, lambda_t)`.
    Simultaneous,
    /// Primal step first; the dual step uses the constraints at `x_{t+1}`.
    AlternatingPrimalDual,
    /// Dual step first; the primal step uses `lambda_{t+1}` at the same
    /// evaluation of `x_t`.
    AlternatingDualPrimal,
    /// Extrapolate with a simultaneous step, then update from `(x_t,
    /// lambda_t)` using gradients at the extrapolated point.
    Extragradient,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Simultaneous,
        Scheme::AlternatingPrimalDual,
        Scheme::AlternatingDualPrimal,
        Scheme::Extragradient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Simultaneous => "simultaneous",
            Scheme::AlternatingPrimalDual => "alt-pd",
            Scheme::AlternatingDualPrimal => "alt-dp",
            Scheme::Extragradient => "extragradient",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Summary of one roll.
#[derive(Debug, Clone, PartialEq)]
pub struct RollOut {
    pub loss: f64,
    /// Lagrangian whose gradient drove the primal step.
    pub primal_lagrangian: f64,
    /// `sum <lambda, dual_signal>` over the groups the dual step touched,
    /// with the multipliers the dual step started from.
    pub dual_lagrangian: f64,
    /// The evaluation used for the committed primal update. For
    /// extragradient this is the extrapolated point.
    pub cmp_state: CmpState,
    /// Alternating primal-dual only: the constraint evaluation at
    /// `x_{t+1}` that fed the dual step.
    pub post_primal_state: Option<CmpState>,
}

struct LagrangianParts {
    primal: f64,
    dual: f64,
    signals: BTreeMap<String, Vec<f64>>,
}

fn lagrangian_parts(problem: &ConstrainedProblem, state: &CmpState) -> Result<LagrangianParts> {
    let mut pairs = Vec::new();
    let mut dual = 0.0;
    for group in problem.groups() {
        let Some(cs) = state.observed_constraints.get(group.id()) else {
            continue;
        };
        let pair = group_contribution(group, cs)?;
        if let Some(m) = group.multiplier() {
            let lambda = m.values_for(cs)?;
            dual += lambda
                .iter()
                .zip(&pair.dual_signal)
                .fold(0.0, |acc, (l, s)| acc + l * s);
        }
        pairs.push((group.id(), pair));
    }
    let assembled = assemble_lagrangian(state.loss, pairs.iter().map(|(id, p)| (*id, p)));
    if !assembled.primal_lagrangian.is_finite() || !dual.is_finite() {
        return Err(Error::non_finite_evaluation(None, "non-finite Lagrangian"));
    }
    Ok(LagrangianParts {
        primal: assembled.primal_lagrangian,
        dual,
        signals: assembled.dual_signals,
    })
}

/// Lagrangian values at an evaluated state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianValues {
    /// Loss plus every group's primal term.
    pub primal: f64,
    /// `sum <lambda, dual_signal>` over groups with a multiplier.
    pub dual: f64,
}

/// Evaluates both Lagrangians at `state` with the multipliers and
/// penalties currently stored in `problem`.
pub fn lagrangian_values(problem: &ConstrainedProblem, state: &CmpState) -> Result<LagrangianValues> {
    let parts = lagrangian_parts(problem, state)?;
    Ok(LagrangianValues {
        primal: parts.primal,
        dual: parts.dual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedOptimizer {
    scheme: Scheme,
    reuse_violations: bool,
    primal: PrimalOptimizer,
    dual: DualOptimizer,
    dual_buffers: BTreeMap<String, DualBuffers>,
}

impl ConstrainedOptimizer {
    pub fn new(scheme: Scheme, primal: PrimalOptimizer, dual: DualOptimizer) -> Self {
        Self {
            scheme,
            reuse_violations: false,
            primal,
            dual,
            dual_buffers: BTreeMap::new(),
        }
    }

    pub fn simultaneous(primal: PrimalOptimizer, dual: DualOptimizer) -> Self {
        Self::new(Scheme::Simultaneous, primal, dual)
    }

    /// Alternating primal-dual only: feed the dual step the constraints
    /// measured at `x_t` instead of re-evaluating at `x_{t+1}`. Saves one
    /// evaluation per roll at the cost of a one-step lag in the dual signal.
    pub fn with_reused_violations(mut self, reuse: bool) -> Self {
        self.reuse_violations = reuse;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn reuses_violations(&self) -> bool {
        self.reuse_violations
    }

    pub fn primal(&self) -> &PrimalOptimizer {
        &self.primal
    }

    pub fn primal_mut(&mut self) -> &mut PrimalOptimizer {
        &mut self.primal
    }

    pub fn dual(&self) -> &DualOptimizer {
        &self.dual
    }

    pub fn dual_mut(&mut self) -> &mut DualOptimizer {
        &mut self.dual
    }

    pub fn dual_buffers(&self) -> &BTreeMap<String, DualBuffers> {
        &self.dual_buffers
    }

    pub(crate) fn restore_dual_buffers(&mut self, buffers: BTreeMap<String, DualBuffers>) {
        self.dual_buffers = buffers;
    }

    /// One step of the configured scheme. State is only committed if the
    /// whole step succeeds.
    pub fn roll(&mut self, problem: &mut ConstrainedProblem, oracle: &dyn Oracle) -> Result<RollOut> {
        let mut staged_problem = problem.clone();
        let mut staged = self.clone();
        let out = match self.scheme {
            Scheme::Simultaneous => staged.simultaneous_step(&mut staged_problem, oracle),
            Scheme::AlternatingPrimalDual => staged.primal_dual_step(&mut staged_problem, oracle),
            Scheme::AlternatingDualPrimal => staged.dual_primal_step(&mut staged_problem, oracle),
            Scheme::Extragradient => staged.extragradient_step(&mut staged_problem, oracle),
        }?;
        staged_problem.seal();
        *problem = staged_problem;
        *self = staged;
        Ok(out)
    }

    /// Dual step on every observed group that has a multiplier. With
    /// `commit == false` the buffers are left alone (used for previews).
    fn dual_update(
        &mut self,
        problem: &mut ConstrainedProblem,
        state: &CmpState,
        signals: &BTreeMap<String, Vec<f64>>,
        commit: bool,
    ) -> Result<()> {
        for group in problem.groups_mut() {
            let Some(cs) = state.observed_constraints.get(group.id()) else {
                continue;
            };
            let id = group.id().to_owned();
            let Some(multiplier) = group.multiplier_mut() else {
                continue;
            };
            let signal = signals
                .get(&id)
                .ok_or_else(|| Error::evaluation(Some(&id), "missing dual signal"))?;
            let empty = DualBuffers::default();
            let buffers = self.dual_buffers.get(&id).unwrap_or(&empty);
            let (updated, new_buffers) =
                self.dual
                    .propose(buffers, multiplier, signal, cs.observed_indices.as_deref())?;
            *multiplier = updated;
            if commit && new_buffers != DualBuffers::default() {
                self.dual_buffers.insert(id, new_buffers);
            }
        }
        Ok(())
    }

    fn evaluate_with_gradients(
        problem: &ConstrainedProblem,
        oracle: &dyn Oracle,
        x: &[f64],
    ) -> Result<(CmpState, Vec<f64>, LagrangianParts)> {
        let state = problem.compute_cmp_state(oracle, x)?;
        let grads = problem.compute_gradients(oracle, x, &state)?;
        let parts = lagrangian_parts(problem, &state)?;
        let grad = lagrangian_gradient(problem, &state, &grads)?;
        Ok((state, grad, parts))
    }

    fn simultaneous_step(&mut self, p: &mut ConstrainedProblem, oracle: &dyn Oracle) -> Result<RollOut> {
        let x = p.x().to_vec();
        let (state, grad, parts) = Self::evaluate_with_gradients(p, oracle, &x)?;
        let next = self.primal.step(&x, &grad)?;
        self.dual_update(p, &state, &parts.signals, true)?;
        p.set_x(next)?;
        Ok(RollOut {
            loss: state.loss,
            primal_lagrangian: parts.primal,
            dual_lagrangian: parts.dual,
            cmp_state: state,
            post_primal_state: None,
        })
    }

    fn primal_dual_step(&mut self, p: &mut ConstrainedProblem, oracle: &dyn Oracle) -> Result<RollOut> {
        let x = p.x().to_vec();
        let (state, grad, parts) = Self::evaluate_with_gradients(p, oracle, &x)?;
        let next = self.primal.step(&x, &grad)?;
        let (post_state, dual_parts) = if self.reuse_violations {
            (None, None)
        } else {
            let s = p.compute_cmp_state(oracle, &next)?;
            let parts = lagrangian_parts(p, &s)?;
            (Some(s), Some(parts))
        };
        let (dual_state, signals, dual_value) = match (&post_state, &dual_parts) {
            (Some(s), Some(dp)) => (s, &dp.signals, dp.dual),
            _ => (&state, &parts.signals, parts.dual),
        };
        self.dual_update(p, dual_state, signals, true)?;
        p.set_x(next)?;
        Ok(RollOut {
            loss: state.loss,
            primal_lagrangian: parts.primal,
            dual_lagrangian: dual_value,
            cmp_state: state,
            post_primal_state: post_state,
        })
    }

    fn dual_primal_step(&mut self, p: &mut ConstrainedProblem, oracle: &dyn Oracle) -> Result<RollOut> {
        let x = p.x().to_vec();
        let state = p.compute_cmp_state(oracle, &x)?;
        let grads = p.compute_gradients(oracle, &x, &state)?;
        let before = lagrangian_parts(p, &state)?;
        self.dual_update(p, &state, &before.signals, true)?;
        let after = lagrangian_parts(p, &state)?;
        let grad = lagrangian_gradient(p, &state, &grads)?;
        let next = self.primal.step(&x, &grad)?;
        p.set_x(next)?;
        Ok(RollOut {
            loss: state.loss,
            primal_lagrangian: after.primal,
            dual_lagrangian: before.dual,
            cmp_state: state,
            post_primal_state: None,
        })
    }

    fn extragradient_step(&mut self, p: &mut ConstrainedProblem, oracle: &dyn Oracle) -> Result<RollOut> {
        let x = p.x().to_vec();
        let (state, grad, parts) = Self::evaluate_with_gradients(p, oracle, &x)?;

        // extrapolation: stateless preview of a simultaneous step
        let x_hat = self.primal.preview(&x, &grad)?;
        let mut p_hat = p.clone();
        self.dual_update(&mut p_hat, &state, &parts.signals, false)?;
        p_hat.set_x(x_hat.clone())?;

        let (state_hat, grad_hat, parts_hat) = Self::evaluate_with_gradients(&p_hat, oracle, &x_hat)?;

        // commit from (x_t, lambda_t) using the extrapolated gradients
        let next = self.primal.step(&x, &grad_hat)?;
        self.dual_update(p, &state_hat, &parts_hat.signals, true)?;
        p.set_x(next)?;
        Ok(RollOut {
            loss: state_hat.loss,
            primal_lagrangian: parts_hat.primal,
            dual_lagrangian: parts_hat.dual,
            cmp_state: state_hat,
            post_primal_state: None,
        })
    }
}
