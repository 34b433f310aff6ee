//! Gradient oracles, composition of the primal Lagrangian gradient, and
//! central finite-difference verification.

use std::collections::BTreeMap;

use crate::cmp::{CmpState, ConstrainedProblem, Gradients, Oracle, OracleError};
use crate::error::{Error, Result};
use crate::formulations::{assemble_lagrangian, group_contribution, primal_weights};

/// A vector-valued function with analytic gradient rows.
pub trait DifferentiableFunction {
    fn output_size(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Vec<f64>;

    /// Gradient of output `i` with respect to `x`; same length as `x`.
    fn grad_row(&self, x: &[f64], i: usize) -> Vec<f64>;
}

/// `grad_f + sum_i weight_i * grad_i`, accumulated in the given order.
pub fn compose_primal_gradient(grad_f: &[f64], terms: &[(f64, &[f64])]) -> Result<Vec<f64>> {
    let mut out = grad_f.to_vec();
    for (weight, grad) in terms {
        if grad.len() != out.len() {
            return Err(Error::dims("constraint gradient", out.len(), grad.len()));
        }
        if !weight.is_finite() {
            return Err(Error::NonFinite("gradient weight".into()));
        }
        for (o, g) in out.iter_mut().zip(grad.iter()) {
            *o += weight * g;
        }
    }
    Ok(out)
}

/// Gradient of the primal Lagrangian at the evaluated point, using the
/// multipliers and penalties currently stored in `problem`. Groups are
/// visited in registration order.
pub fn lagrangian_gradient(
    problem: &ConstrainedProblem,
    state: &CmpState,
    grads: &Gradients,
) -> Result<Vec<f64>> {
    let mut weights = Vec::new();
    for group in problem.groups() {
        let Some(cs) = state.observed_constraints.get(group.id()) else {
            continue;
        };
        let rows = grads
            .constraints
            .get(group.id())
            .ok_or_else(|| Error::evaluation(Some(group.id()), "missing constraint gradient"))?;
        let w = primal_weights(group, cs)?;
        weights.extend(w.into_iter().zip(rows.iter().map(Vec::as_slice)));
    }
    compose_primal_gradient(&grads.loss, &weights)
}

fn fd_step(xk: f64) -> f64 {
    6e-6 * xk.abs().max(1.0)
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` of output
/// `output_index`, with `h_k = 6e-6 * max(1, |x_k|)`.
pub fn finite_difference_gradient(
    fun: &dyn DifferentiableFunction,
    x: &[f64],
    output_index: usize,
) -> Result<Vec<f64>> {
    if output_index >= fun.output_size() {
        return Err(Error::IndexOutOfRange {
            index: output_index,
            len: fun.output_size(),
        });
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = fd_step(x[k]);
        probe[k] = x[k] + h;
        let plus = fun.eval(&probe).get(output_index).copied().unwrap_or(f64::NAN);
        probe[k] = x[k] - h;
        let minus = fun.eval(&probe).get(output_index).copied().unwrap_or(f64::NAN);
        probe[k] = x[k];
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::NonFinite(format!(
                "function evaluation near x along coordinate {k}"
            )));
        }
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCheck {
    pub name: String,
    /// Largest `|analytic - fd|` over all outputs and coordinates.
    pub max_deviation: f64,
    /// (output, coordinate) of the worst tolerance breach, if any.
    pub worst: Option<(usize, usize)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub functions: Vec<FunctionCheck>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.functions.iter().all(|f| f.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FunctionCheck> {
        self.functions.iter().filter(|f| !f.passed)
    }
}

/// Compares analytic gradient rows against central differences. An entry
/// passes when `|analytic - fd| <= abs_tol + rel_tol * |fd|`.
pub fn check_gradients(
    functions: &[(&str, &dyn DifferentiableFunction)],
    x: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<GradientReport> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("gradient check needs dim(x) >= 1".into()));
    }
    if !(rel_tol > 0.0 && abs_tol > 0.0) {
        return Err(Error::InvalidArgument("gradient check tolerances must be positive".into()));
    }
    let mut report = GradientReport { functions: Vec::new() };
    for (name, fun) in functions {
        let mut check = FunctionCheck {
            name: (*name).to_owned(),
            max_deviation: 0.0,
            worst: None,
            passed: true,
        };
        let mut worst_excess = 0.0;
        for i in 0..fun.output_size() {
            let analytic = fun.grad_row(x, i);
            let fd = match finite_difference_gradient(*fun, x, i) {
                Ok(fd) => fd,
                Err(_) => {
                    check.passed = false;
                    check.max_deviation = f64::INFINITY;
                    check.worst = Some((i, 0));
                    continue;
                }
            };
            if analytic.len() != fd.len() {
                check.passed = false;
                check.max_deviation = f64::INFINITY;
                check.worst = Some((i, 0));
                continue;
            }
            for (k, (a, f)) in analytic.iter().zip(&fd).enumerate() {
                let dev = (a - f).abs();
                let dev = if dev.is_nan() { f64::INFINITY } else { dev };
                check.max_deviation = check.max_deviation.max(dev);
                let excess = dev - (abs_tol + rel_tol * f.abs());
                if excess > 0.0 {
                    check.passed = false;
                    if excess > worst_excess || check.worst.is_none() {
                        worst_excess = excess;
                        check.worst = Some((i, k));
                    }
                }
            }
        }
        report.functions.push(check);
    }
    Ok(report)
}

/// The scalar primal Lagrangian `x -> f(x) + sum of formulation terms`,
/// with multipliers and penalties frozen at their current values in
/// `problem`. Its analytic gradient is the composed Lagrangian gradient.
pub struct LagrangianFunction<'a> {
    problem: &'a ConstrainedProblem,
    oracle: &'a dyn Oracle,
}

impl<'a> LagrangianFunction<'a> {
    pub fn new(problem: &'a ConstrainedProblem, oracle: &'a dyn Oracle) -> Self {
        Self { problem, oracle }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let state = self.problem.compute_cmp_state(self.oracle, x)?;
        let mut pairs = Vec::new();
        for group in self.problem.groups() {
            if let Some(cs) = state.observed_constraints.get(group.id()) {
                pairs.push((group.id(), group_contribution(group, cs)?));
            }
        }
        Ok(assemble_lagrangian(state.loss, pairs.iter().map(|(id, p)| (*id, p))).primal_lagrangian)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let state = self.problem.compute_cmp_state(self.oracle, x)?;
        let grads = self.problem.compute_gradients(self.oracle, x, &state)?;
        lagrangian_gradient(self.problem, &state, &grads)
    }
}

impl DifferentiableFunction for LagrangianFunction<'_> {
    fn output_size(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        vec![self.value(x).unwrap_or(f64::NAN)]
    }

    fn grad_row(&self, x: &[f64], _i: usize) -> Vec<f64> {
        self.gradient(x)
            .unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }
}

/// Opt-in fallback that supplies gradients by central differences of the
/// wrapped oracle's measurements. Costs `2 * dim` evaluations per call.
///
/// The observed constraint set must not change between `x` and the
/// perturbed points.
pub struct FiniteDifferenceOracle<O> {
    inner: O,
}

impl<O: Oracle> FiniteDifferenceOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner }
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for FiniteDifferenceOracle<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError> {
        self.inner.evaluate(x)
    }

    fn gradients(&self, x: &[f64], state: &CmpState) -> Result<Gradients, OracleError> {
        let n = x.len();
        let mut loss = vec![0.0; n];
        let mut constraints: BTreeMap<String, Vec<Vec<f64>>> = state
            .observed_constraints
            .iter()
            .map(|(id, cs)| (id.clone(), vec![vec![0.0; n]; cs.violation.len()]))
            .collect();
        let mut probe = x.to_vec();
        for k in 0..n {
            let h = fd_step(x[k]);
            probe[k] = x[k] + h;
            let plus = self.inner.evaluate(&probe)?;
            probe[k] = x[k] - h;
            let minus = self.inner.evaluate(&probe)?;
            probe[k] = x[k];
            loss[k] = (plus.loss - minus.loss) / (2.0 * h);
            for (id, rows) in constraints.iter_mut() {
                let (Some(p), Some(m)) = (
                    plus.observed_constraints.get(id),
                    minus.observed_constraints.get(id),
                ) else {
                    return Err(OracleError(format!(
                        "group `{id}` not observed at perturbed point"
                    )));
                };
                let reference = &state.observed_constraints[id];
                if p.observed_indices != reference.observed_indices
                    || m.observed_indices != reference.observed_indices
                    || p.violation.len() != rows.len()
                    || m.violation.len() != rows.len()
                {
                    return Err(OracleError(format!(
                        "observed entries of group `{id}` change near x"
                    )));
                }
                for (j, row) in rows.iter_mut().enumerate() {
                    row[k] = (p.violation[j] - m.violation[j]) / (2.0 * h);
                }
            }
        }
        Ok(Gradients { loss, constraints })
    }
}
