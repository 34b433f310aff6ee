//! The constrained minimization problem: constraint groups, their
//! measurements, and the evaluation state consumed by the optimizers.
//!
//! Inequality constraints follow the convention `g(x) <= 0` and equality
//! constraints `h(x) = 0`. Violations are reported raw (signed); any
//! clamping happens inside the formulations.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::formulations::{violation_norm, PenaltyCoefficient, PenaltyScheduler};
use crate::multipliers::{validate_indices, Multiplier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintType {
    Inequality,
    Equality,
}

impl ConstraintType {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintType::Inequality => "inequality",
            ConstraintType::Equality => "equality",
        }
    }
}

impl fmt::Display for ConstraintType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    Lagrangian,
    AugmentedLagrangian,
    QuadraticPenalty,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [
        Formulation::Lagrangian,
        Formulation::AugmentedLagrangian,
        Formulation::QuadraticPenalty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Lagrangian => "lagrangian",
            Formulation::AugmentedLagrangian => "augmented_lagrangian",
            Formulation::QuadraticPenalty => "quadratic_penalty",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }

    pub fn has_multiplier(self) -> bool {
        self != Formulation::QuadraticPenalty
    }

    pub fn has_penalty(self) -> bool {
        self != Formulation::Lagrangian
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One measurement of a constraint group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintState {
    /// Differentiable constraint values `g(x)` or `h(x)`.
    pub violation: Vec<f64>,
    /// Optional strict (possibly non-differentiable) measurement. When
    /// present it replaces `violation` in the dual update only.
    pub strict_violation: Option<Vec<f64>>,
    /// Which constraints of the group were measured. `None` means all of
    /// them, in order.
    pub observed_indices: Option<Vec<usize>>,
}

impl ConstraintState {
    pub fn new(violation: Vec<f64>) -> Self {
        Self {
            violation,
            strict_violation: None,
            observed_indices: None,
        }
    }

    pub fn with_strict(mut self, strict_violation: Vec<f64>) -> Self {
        self.strict_violation = Some(strict_violation);
        self
    }

    pub fn with_indices(mut self, indices: Vec<usize>) -> Self {
        self.observed_indices = Some(indices);
        self
    }

    /// The measurement that drives dual updates.
    pub fn dual_measurement(&self) -> &[f64] {
        self.strict_violation.as_deref().unwrap_or(&self.violation)
    }
}

/// Result of evaluating the problem at a point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CmpState {
    pub loss: f64,
    pub observed_constraints: BTreeMap<String, ConstraintState>,
    /// Free-form metadata; never interpreted by the library.
    pub misc: BTreeMap<String, f64>,
}

impl CmpState {
    pub fn new(loss: f64) -> Self {
        Self {
            loss,
            ..Default::default()
        }
    }

    pub fn with_constraint(mut self, group: impl Into<String>, state: ConstraintState) -> Self {
        self.observed_constraints.insert(group.into(), state);
        self
    }
}

/// Gradients of the loss and of each observed constraint at a point.
///
/// `constraints[group]` holds one row per entry of that group's
/// `violation`, in the same order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    pub loss: Vec<f64>,
    pub constraints: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleError(pub String);

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for OracleError {}

/// User-supplied evaluation of the objective and constraints.
///
/// Both methods must be pure: the same `x` yields the same result.
pub trait Oracle {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError>;

    /// Gradients at `x`. `state` is the result of `evaluate(x)` and tells
    /// which constraint entries were observed.
    fn gradients(&self, x: &[f64], state: &CmpState) -> Result<Gradients, OracleError>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError> {
        (**self).evaluate(x)
    }
    fn gradients(&self, x: &[f64], state: &CmpState) -> Result<Gradients, OracleError> {
        (**self).gradients(x, state)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError> {
        (**self).evaluate(x)
    }
    fn gradients(&self, x: &[f64], state: &CmpState) -> Result<Gradients, OracleError> {
        (**self).gradients(x, state)
    }
}

/// A named block of constraints sharing a type, a formulation and a
/// multiplier vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGroup {
    id: String,
    constraint_type: ConstraintType,
    size: usize,
    formulation: Formulation,
    multiplier: Option<Multiplier>,
    penalty: Option<PenaltyCoefficient>,
    scheduler: Option<PenaltyScheduler>,
    /// Violation norm seen at the last scheduler invocation.
    penalty_reference: Option<f64>,
}

impl ConstraintGroup {
    /// A group with a zero-initialized dense multiplier when the
    /// formulation uses one. Penalized formulations still need
    /// [`with_penalty`](Self::with_penalty) before registration.
    pub fn new(
        id: impl Into<String>,
        constraint_type: ConstraintType,
        size: usize,
        formulation: Formulation,
    ) -> Self {
        let multiplier = formulation
            .has_multiplier()
            .then(|| Multiplier::dense(size, constraint_type));
        Self {
            id: id.into(),
            constraint_type,
            size,
            formulation,
            multiplier,
            penalty: None,
            scheduler: None,
            penalty_reference: None,
        }
    }

    pub fn lagrangian(id: impl Into<String>, constraint_type: ConstraintType, size: usize) -> Self {
        Self::new(id, constraint_type, size, Formulation::Lagrangian)
    }

    pub fn augmented_lagrangian(
        id: impl Into<String>,
        constraint_type: ConstraintType,
        size: usize,
        penalty: PenaltyCoefficient,
    ) -> Self {
        Self::new(id, constraint_type, size, Formulation::AugmentedLagrangian).with_penalty(penalty)
    }

    pub fn quadratic_penalty(
        id: impl Into<String>,
        constraint_type: ConstraintType,
        size: usize,
        penalty: PenaltyCoefficient,
    ) -> Self {
        Self::new(id, constraint_type, size, Formulation::QuadraticPenalty).with_penalty(penalty)
    }

    pub fn with_multiplier(mut self, multiplier: impl Into<Multiplier>) -> Self {
        self.multiplier = Some(multiplier.into());
        self
    }

    /// Replaces the dense multiplier by an indexed one with the same values.
    pub fn indexed(mut self) -> Self {
        if let Some(m) = self.multiplier.take() {
            let values = m.values().to_vec();
            self.multiplier = Some(
                crate::multipliers::IndexedMultiplier::with_values(values, m.constraint_type())
                    .map(Multiplier::from)
                    .unwrap_or(m),
            );
        }
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltyCoefficient) -> Self {
        self.penalty = Some(penalty);
        self
    }

    pub fn with_scheduler(mut self, scheduler: PenaltyScheduler) -> Self {
        self.scheduler = Some(scheduler);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn constraint_type(&self) -> ConstraintType {
        self.constraint_type
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn multiplier(&self) -> Option<&Multiplier> {
        self.multiplier.as_ref()
    }

    pub fn multiplier_mut(&mut self) -> Option<&mut Multiplier> {
        self.multiplier.as_mut()
    }

    pub fn penalty(&self) -> Option<&PenaltyCoefficient> {
        self.penalty.as_ref()
    }

    pub fn scheduler(&self) -> Option<&PenaltyScheduler> {
        self.scheduler.as_ref()
    }

    pub fn penalty_reference(&self) -> Option<f64> {
        self.penalty_reference
    }

    pub(crate) fn set_penalty(&mut self, penalty: PenaltyCoefficient) {
        self.penalty = Some(penalty);
    }

    pub(crate) fn set_penalty_reference(&mut self, reference: Option<f64>) {
        self.penalty_reference = reference;
    }

    fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidGroup {
            group: self.id.clone(),
            reason,
        };
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(invalid(
                "ids must be non-empty and use only ASCII letters, digits, '_' or '-'".into(),
            ));
        }
        if self.size == 0 {
            return Err(invalid("size must be positive".into()));
        }
        match (self.formulation.has_multiplier(), &self.multiplier) {
            (true, None) => {
                return Err(invalid(format!("{} requires a multiplier", self.formulation)))
            }
            (false, Some(_)) => {
                return Err(invalid(format!(
                    "{} groups cannot hold a multiplier",
                    self.formulation
                )))
            }
            (true, Some(m)) => {
                if m.len() != self.size {
                    return Err(invalid(format!(
                        "multiplier has {} entries, group has {}",
                        m.len(),
                        self.size
                    )));
                }
                if m.constraint_type() != self.constraint_type {
                    return Err(invalid("multiplier constraint type differs from group".into()));
                }
            }
            (false, None) => {}
        }
        match (self.formulation.has_penalty(), &self.penalty) {
            (true, None) => {
                return Err(invalid(format!("{} requires a penalty coefficient", self.formulation)))
            }
            (false, Some(_)) => {
                return Err(invalid("lagrangian groups cannot hold a penalty".into()))
            }
            (true, Some(p)) => {
                if p.len() != 1 && p.len() != self.size {
                    return Err(invalid(format!(
                        "penalty must be scalar or have {} entries, got {}",
                        self.size,
                        p.len()
                    )));
                }
            }
            (false, None) => {}
        }
        if self.scheduler.is_some() && self.penalty.is_none() {
            return Err(invalid("a penalty scheduler needs a penalty coefficient".into()));
        }
        Ok(())
    }
}

/// A constrained minimization problem: the registered constraint groups
/// (with their multipliers and penalties) and the current primal point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProblem {
    groups: Vec<ConstraintGroup>,
    x: Vec<f64>,
    sealed: bool,
}

impl ConstrainedProblem {
    pub fn new(x0: Vec<f64>) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::InvalidArgument("primal point must have dimension >= 1".into()));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial primal point".into()));
        }
        Ok(Self {
            groups: Vec::new(),
            x: x0,
            sealed: false,
        })
    }

    pub fn register_group(&mut self, group: ConstraintGroup) -> Result<String> {
        if self.sealed {
            return Err(Error::ProblemSealed);
        }
        if self.group(&group.id).is_some() {
            return Err(Error::DuplicateGroup(group.id));
        }
        group.validate()?;
        let id = group.id.clone();
        self.groups.push(group);
        Ok(id)
    }

    /// Groups in registration order.
    pub fn groups(&self) -> &[ConstraintGroup] {
        &self.groups
    }

    pub fn group(&self, id: &str) -> Option<&ConstraintGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn group_mut(&mut self, id: &str) -> Option<&mut ConstraintGroup> {
        self.groups.iter_mut().find(|g| g.id == id)
    }

    pub(crate) fn groups_mut(&mut self) -> &mut [ConstraintGroup] {
        &mut self.groups
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn set_x(&mut self, x: Vec<f64>) -> Result<()> {
        if x.len() != self.x.len() {
            return Err(Error::dims("primal point", self.x.len(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("primal point".into()));
        }
        self.x = x;
        Ok(())
    }

    pub(crate) fn seal(&mut self) {
        self.sealed = true;
    }

    /// Current multiplier values keyed by group id (groups without a
    /// multiplier are omitted).
    pub fn multipliers(&self) -> BTreeMap<String, Vec<f64>> {
        self.groups
            .iter()
            .filter_map(|g| g.multiplier.as_ref().map(|m| (g.id.clone(), m.values().to_vec())))
            .collect()
    }

    /// A stable description of the group layout, used to match checkpoints.
    pub fn signature(&self) -> String {
        let mut out = format!("dim={}", self.dim());
        for g in &self.groups {
            let mult = match &g.multiplier {
                None => "none",
                Some(Multiplier::Dense(_)) => "dense",
                Some(Multiplier::Indexed(_)) => "indexed",
            };
            out.push_str(&format!(
                ";{}:{}:{}:{}:{}",
                g.id, g.constraint_type, g.size, g.formulation, mult
            ));
        }
        out
    }

    /// Evaluates `oracle` at `x` and validates the result against the
    /// registered groups.
    pub fn compute_cmp_state(&self, oracle: &dyn Oracle, x: &[f64]) -> Result<CmpState> {
        self.check_point(oracle, x)?;
        let state = oracle
            .evaluate(x)
            .map_err(|e| Error::evaluation(None, e.0))?;
        self.validate_state(&state)?;
        Ok(state)
    }

    pub(crate) fn compute_gradients(
        &self,
        oracle: &dyn Oracle,
        x: &[f64],
        state: &CmpState,
    ) -> Result<Gradients> {
        let grads = oracle
            .gradients(x, state)
            .map_err(|e| Error::evaluation(None, e.0))?;
        let dim = self.dim();
        if grads.loss.len() != dim {
            return Err(Error::evaluation(
                None,
                format!("loss gradient has length {}, expected {dim}", grads.loss.len()),
            ));
        }
        if grads.loss.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite_evaluation(None, "non-finite loss gradient"));
        }
        for (id, cs) in &state.observed_constraints {
            let rows = grads.constraints.get(id).ok_or_else(|| {
                Error::evaluation(Some(id), "missing constraint gradient")
            })?;
            if rows.len() != cs.violation.len() {
                return Err(Error::evaluation(
                    Some(id),
                    format!(
                        "{} gradient rows for {} violation entries",
                        rows.len(),
                        cs.violation.len()
                    ),
                ));
            }
            for row in rows {
                if row.len() != dim {
                    return Err(Error::evaluation(
                        Some(id),
                        format!("gradient row has length {}, expected {dim}", row.len()),
                    ));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::non_finite_evaluation(
                        Some(id),
                        "non-finite constraint gradient",
                    ));
                }
            }
        }
        Ok(grads)
    }

    fn check_point(&self, oracle: &dyn Oracle, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dims("primal point", self.dim(), x.len()));
        }
        if oracle.dim() != self.dim() {
            return Err(Error::dims("oracle dimension", self.dim(), oracle.dim()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("primal point".into()));
        }
        Ok(())
    }

    /// Checks every [`CmpState`] invariant against the registered groups.
    pub fn validate_state(&self, state: &CmpState) -> Result<()> {
        if !state.loss.is_finite() {
            return Err(Error::non_finite_evaluation(None, "non-finite loss"));
        }
        for (id, cs) in &state.observed_constraints {
            let group = self.group(id).ok_or_else(|| Error::UnknownGroup(id.clone()))?;
            let n = cs.violation.len();
            match &cs.observed_indices {
                None => {
                    if n != group.size {
                        return Err(Error::evaluation(
                            Some(id),
                            format!("violation has {n} entries, group has {}", group.size),
                        ));
                    }
                }
                Some(idx) => {
                    if idx.len() != n {
                        return Err(Error::evaluation(
                            Some(id),
                            format!("{} observed indices for {n} violation entries", idx.len()),
                        ));
                    }
                    validate_indices(idx, group.size)
                        .map_err(|e| Error::evaluation(Some(id), e.to_string()))?;
                }
            }
            if let Some(strict) = &cs.strict_violation {
                if strict.len() != n {
                    return Err(Error::evaluation(
                        Some(id),
                        format!("strict violation has {} entries, expected {n}", strict.len()),
                    ));
                }
                if strict.iter().any(|v| !v.is_finite()) {
                    return Err(Error::non_finite_evaluation(Some(id), "non-finite strict violation"));
                }
            }
            if cs.violation.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite_evaluation(Some(id), "non-finite violation"));
            }
        }
        Ok(())
    }

    /// True iff every inequality measurement is `<= tol` and every equality
    /// measurement is within `tol` of zero. The strict measurement is used
    /// when a group reports one.
    pub fn is_feasible(&self, state: &CmpState, tol: f64) -> bool {
        state.observed_constraints.iter().all(|(id, cs)| {
            let ty = self
                .group(id)
                .map(|g| g.constraint_type)
                .unwrap_or(ConstraintType::Equality);
            cs.dual_measurement().iter().all(|&v| match ty {
                ConstraintType::Inequality => v <= tol,
                ConstraintType::Equality => v.abs() <= tol,
            })
        })
    }

    /// Runs each group's penalty scheduler against the violation in
    /// `state`. The first call for a group only records a reference norm.
    /// Groups absent from `state` are left alone.
    pub fn update_penalties(&mut self, state: &CmpState) {
        for group in &mut self.groups {
            let (Some(scheduler), Some(penalty)) = (&group.scheduler, &group.penalty) else {
                continue;
            };
            let Some(cs) = state.observed_constraints.get(&group.id) else {
                continue;
            };
            let now = violation_norm(group.constraint_type, &cs.violation);
            if let Some(prev) = group.penalty_reference {
                group.penalty = Some(scheduler.schedule(penalty, now, prev));
            }
            group.penalty_reference = Some(now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct NormBall {
        threshold: f64,
    }

    impl Oracle for NormBall {
        fn dim(&self) -> usize {
            2
        }
        fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError> {
            let sq: f64 = x.iter().map(|v| v * v).sum();
            Ok(CmpState::new(0.0).with_constraint("norm", ConstraintState::new(vec![sq - self.threshold])))
        }
        fn gradients(&self, x: &[f64], _: &CmpState) -> Result<Gradients, OracleError> {
            let mut g = Gradients {
                loss: vec![0.0; 2],
                ..Default::default()
            };
            g.constraints
                .insert("norm".into(), vec![x.iter().map(|v| 2.0 * v).collect()]);
            Ok(g)
        }
    }

    fn norm_problem() -> ConstrainedProblem {
        let mut p = ConstrainedProblem::new(vec![0.0, 0.0]).unwrap();
        p.register_group(ConstraintGroup::lagrangian("norm", ConstraintType::Inequality, 1))
            .unwrap();
        p
    }

    #[test]
    fn registration_allocates_zero_multiplier() {
        let p = norm_problem();
        assert_eq!(p.group("norm").unwrap().multiplier().unwrap().values(), &[0.0]);
    }

    #[test]
    fn quadratic_penalty_with_multiplier_is_rejected() {
        let mut p = ConstrainedProblem::new(vec![0.0]).unwrap();
        let g = ConstraintGroup::quadratic_penalty(
            "qp",
            ConstraintType::Inequality,
            1,
            PenaltyCoefficient::scalar(1.0).unwrap(),
        )
        .with_multiplier(Multiplier::dense(1, ConstraintType::Inequality));
        assert!(matches!(p.register_group(g), Err(Error::InvalidGroup { .. })));
    }

    #[test]
    fn registration_errors() {
        let mut p = norm_problem();
        assert!(matches!(
            p.register_group(ConstraintGroup::lagrangian("norm", ConstraintType::Equality, 1)),
            Err(Error::DuplicateGroup(_))
        ));
        assert!(p
            .register_group(ConstraintGroup::lagrangian("empty", ConstraintType::Equality, 0))
            .is_err());
        assert!(p
            .register_group(ConstraintGroup::lagrangian("bad id", ConstraintType::Equality, 1))
            .is_err());
        // lagrangian + penalty
        assert!(p
            .register_group(
                ConstraintGroup::lagrangian("lp", ConstraintType::Equality, 1)
                    .with_penalty(PenaltyCoefficient::scalar(1.0).unwrap())
            )
            .is_err());
        // augmented lagrangian without penalty
        assert!(p
            .register_group(ConstraintGroup::new(
                "al",
                ConstraintType::Equality,
                1,
                Formulation::AugmentedLagrangian
            ))
            .is_err());
        // penalty of the wrong length
        assert!(p
            .register_group(ConstraintGroup::augmented_lagrangian(
                "al",
                ConstraintType::Equality,
                3,
                PenaltyCoefficient::vector(vec![1.0, 2.0]).unwrap()
            ))
            .is_err());
    }

    #[test]
    fn two_groups_are_distinct() {
        let mut p = norm_problem();
        let id = p
            .register_group(ConstraintGroup::lagrangian("fair", ConstraintType::Inequality, 3))
            .unwrap();
        assert_eq!(id, "fair");
        assert_eq!(p.groups().len(), 2);
        assert_eq!(p.group("fair").unwrap().size(), 3);
        assert_eq!(p.group("norm").unwrap().size(), 1);
    }

    #[test]
    fn norm_violation_sign_convention() {
        let p = norm_problem();
        let oracle = NormBall { threshold: 1.0 };
        let s = p.compute_cmp_state(&oracle, &[0.0, 0.0]).unwrap();
        assert_eq!(s.observed_constraints["norm"].violation, vec![-1.0]);
        assert!(p.is_feasible(&s, 0.0));

        // ||x||^2 = 2
        let s = p.compute_cmp_state(&oracle, &[1.0, 1.0]).unwrap();
        assert_eq!(s.observed_constraints["norm"].violation, vec![1.0]);
        assert!(!p.is_feasible(&s, 0.0));
    }

    #[test]
    fn compute_state_is_pure() {
        let p = norm_problem();
        let oracle = NormBall { threshold: 1.0 };
        let a = p.compute_cmp_state(&oracle, &[0.3, -0.7]).unwrap();
        let b = p.compute_cmp_state(&oracle, &[0.3, -0.7]).unwrap();
        assert_eq!(
            a.observed_constraints["norm"].violation[0].to_bits(),
            b.observed_constraints["norm"].violation[0].to_bits()
        );
    }

    #[test]
    fn wrong_dimension_is_an_error() {
        let p = norm_problem();
        let oracle = NormBall { threshold: 1.0 };
        assert!(matches!(
            p.compute_cmp_state(&oracle, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_violation_names_group() {
        let p = norm_problem();
        let oracle = NormBall { threshold: f64::INFINITY };
        match p.compute_cmp_state(&oracle, &[0.0, 0.0]) {
            Err(e @ Error::Evaluation { .. }) => {
                assert!(e.is_numerical());
                assert!(e.to_string().contains("`norm`"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unregistered_group_is_rejected() {
        let p = norm_problem();
        let s = CmpState::new(0.0).with_constraint("other", ConstraintState::new(vec![0.0]));
        assert!(matches!(p.validate_state(&s), Err(Error::UnknownGroup(_))));
    }

    #[test]
    fn feasibility_tolerance() {
        let mut p = norm_problem();
        p.register_group(ConstraintGroup::lagrangian("eq", ConstraintType::Equality, 1))
            .unwrap();
        let ineq = |v: f64| CmpState::new(0.0).with_constraint("norm", ConstraintState::new(vec![v]));
        assert!(p.is_feasible(&ineq(-0.5), 0.0));
        assert!(!p.is_feasible(&ineq(1e-5), 1e-6));
        let eq = CmpState::new(0.0).with_constraint("eq", ConstraintState::new(vec![-1e-7]));
        assert!(p.is_feasible(&eq, 1e-6));
    }

    #[test]
    fn equality_root_has_zero_violation() {
        // h(x) = A x - c with A = [1 1; 1 -1], c = (2, 0) has root (1, 1)
        struct Linear;
        impl Oracle for Linear {
            fn dim(&self) -> usize {
                2
            }
            fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError> {
                Ok(CmpState::new(0.0).with_constraint(
                    "lin",
                    ConstraintState::new(vec![x[0] + x[1] - 2.0, x[0] - x[1]]),
                ))
            }
            fn gradients(&self, _: &[f64], _: &CmpState) -> Result<Gradients, OracleError> {
                unreachable!()
            }
        }
        let mut p = ConstrainedProblem::new(vec![1.0, 1.0]).unwrap();
        p.register_group(ConstraintGroup::lagrangian("lin", ConstraintType::Equality, 2))
            .unwrap();
        let s = p.compute_cmp_state(&Linear, &[1.0, 1.0]).unwrap();
        assert_eq!(s.observed_constraints["lin"].violation, vec![0.0, 0.0]);
    }

    #[test]
    fn observed_indices_are_validated() {
        let mut p = ConstrainedProblem::new(vec![0.0]).unwrap();
        p.register_group(ConstraintGroup::lagrangian("many", ConstraintType::Inequality, 4).indexed())
            .unwrap();
        let ok = CmpState::new(0.0)
            .with_constraint("many", ConstraintState::new(vec![1.0, 2.0]).with_indices(vec![3, 1]));
        assert!(p.validate_state(&ok).is_ok());
        let dup = CmpState::new(0.0)
            .with_constraint("many", ConstraintState::new(vec![1.0, 2.0]).with_indices(vec![1, 1]));
        assert!(p.validate_state(&dup).is_err());
        let short = CmpState::new(0.0)
            .with_constraint("many", ConstraintState::new(vec![1.0, 2.0]).with_indices(vec![1]));
        assert!(p.validate_state(&short).is_err());
        let unindexed = CmpState::new(0.0).with_constraint("many", ConstraintState::new(vec![1.0]));
        assert!(p.validate_state(&unindexed).is_err());
    }
}
