//! Benchmark problems with independently certified solutions.
//!
//! Each benchmark bundles an objective, named constraint functions, a
//! start point and (when one is known in closed form or by a direct
//! linear solve) a KKT certificate. Certificates are checked against
//! [`kkt_residual`] at construction.

pub mod functions;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cmp::{
    CmpState, ConstrainedProblem, ConstraintGroup, ConstraintState, ConstraintType, Formulation, Gradients,
    Oracle, OracleError,
};
use crate::error::{Error, Result};
use crate::formulations::{PenaltyCoefficient, PenaltyScheduler};
use crate::gradients::DifferentiableFunction;
use crate::multipliers::DenseMultiplier;

use functions::{Affine, Identity, LogisticLoss, Quadratic, SquaredDistance, SquaredNormBound, Zero};

pub type BoxedFunction = Box<dyn DifferentiableFunction + Send + Sync>;

/// Benchmark names, as accepted by the command line.
pub const PROBLEM_NAMES: [&str; 4] = ["projection_ball", "equality_qp", "norm_logreg", "bilinear"];

pub const LOGREG_POINTS: usize = 200;
pub const LOGREG_FEATURES: usize = 5;

const CERTIFICATE_TOL: f64 = 1e-10;

pub struct BenchmarkConstraint {
    pub id: String,
    pub constraint_type: ConstraintType,
    pub function: BoxedFunction,
}

/// A primal-dual point satisfying the KKT conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub x: Vec<f64>,
    pub multipliers: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// `||grad f + sum lambda grad g + sum mu grad h||_inf`
    pub stationarity: f64,
    /// Largest positive inequality value or absolute equality value.
    pub feasibility: f64,
    /// `max |lambda_i g_i|` over inequality entries.
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.complementarity)
    }
}

/// How each constraint group of a benchmark is formulated when building
/// a [`ConstrainedProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSetup {
    pub formulation: Formulation,
    /// Initial penalty coefficient; defaults to 1 for penalized
    /// formulations.
    pub penalty: Option<f64>,
    pub scheduler: Option<PenaltyScheduler>,
    pub indexed: bool,
}

impl GroupSetup {
    pub fn new(formulation: Formulation) -> Self {
        Self {
            formulation,
            penalty: None,
            scheduler: None,
            indexed: false,
        }
    }

    pub fn with_penalty(mut self, penalty: f64) -> Self {
        self.penalty = Some(penalty);
        self
    }

    pub fn with_scheduler(mut self, scheduler: PenaltyScheduler) -> Self {
        self.scheduler = Some(scheduler);
        self
    }

    pub fn indexed(mut self, indexed: bool) -> Self {
        self.indexed = indexed;
        self
    }
}

impl Default for GroupSetup {
    fn default() -> Self {
        Self::new(Formulation::Lagrangian)
    }
}

pub struct BenchmarkProblem {
    name: String,
    dim: usize,
    objective: BoxedFunction,
    constraints: Vec<BenchmarkConstraint>,
    certificate: Option<Certificate>,
    start: Vec<f64>,
    initial_multipliers: BTreeMap<String, Vec<f64>>,
}

impl std::fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("constraints", &self.constraints.iter().map(|c| &c.id).collect::<Vec<_>>())
            .field("certificate", &self.certificate)
            .field("start", &self.start)
            .finish()
    }
}

fn finite(context: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.into()))
    }
}

impl BenchmarkProblem {
    /// Assembles a benchmark from parts. The certificate, if given, must
    /// pass [`kkt_residual`] within `1e-10`.
    pub fn new(
        name: impl Into<String>,
        objective: BoxedFunction,
        constraints: Vec<BenchmarkConstraint>,
        start: Vec<f64>,
        certificate: Option<Certificate>,
    ) -> Result<Self> {
        Self::assemble(name, objective, constraints, start, certificate)?.certify(1.0)
    }

    fn assemble(
        name: impl Into<String>,
        objective: BoxedFunction,
        constraints: Vec<BenchmarkConstraint>,
        start: Vec<f64>,
        certificate: Option<Certificate>,
    ) -> Result<Self> {
        let dim = start.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("benchmark dimension must be >= 1".into()));
        }
        finite("start point", &start)?;
        let bench = Self {
            name: name.into(),
            dim,
            objective,
            constraints,
            certificate,
            start,
            initial_multipliers: BTreeMap::new(),
        };
        Ok(bench)
    }

    /// Checks the certificate with the tolerance scaled by the problem data
    /// magnitude when that exceeds one.
    fn certify(self, scale: f64) -> Result<Self> {
        if let Some(cert) = &self.certificate {
            let r = kkt_residual(&self, &cert.x, &cert.multipliers)?;
            let negative = cert
                .multipliers
                .iter()
                .filter(|(id, _)| {
                    self.constraint(id)
                        .is_some_and(|c| c.constraint_type == ConstraintType::Inequality)
                })
                .any(|(_, v)| v.iter().any(|l| *l < 0.0));
            if negative || r.max() > CERTIFICATE_TOL * scale.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "certificate for `{}` fails the KKT check: {r:?}",
                    self.name
                )));
            }
        }
        Ok(self)
    }

    /// `min ||x - a||^2  s.t.  ||x||^2 <= 1`, started at the origin.
    /// Certificate: `x* = a / max(1, ||a||)`, `lambda* = max(0, ||a|| - 1)`.
    pub fn projection_ball(a: &[f64]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("projection_ball needs dim >= 1".into()));
        }
        finite("ball target", a)?;
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x_star: Vec<f64> = a.iter().map(|v| v / norm.max(1.0)).collect();
        let lambda = (norm - 1.0).max(0.0);
        let certificate = Certificate {
            x: x_star,
            multipliers: BTreeMap::from([("ball".to_owned(), vec![lambda])]),
        };
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self::assemble(
            "projection_ball",
            Box::new(SquaredDistance { target: a.to_vec() }),
            vec![BenchmarkConstraint {
                id: "ball".into(),
                constraint_type: ConstraintType::Inequality,
                function: Box::new(SquaredNormBound { radius_sq: 1.0 }),
            }],
            vec![0.0; a.len()],
            Some(certificate),
        )?
        .certify(scale)
    }

    /// `min 0.5 x^T Q x - b^T x  s.t.  A x = c`, started at the origin.
    /// `Q` is given row-major as `n x n`, `A` as `m x n`. The certificate
    /// solves `[[Q, A^T], [A, 0]] [x; mu] = [b; c]` with a dense LU
    /// factorization.
    pub fn equality_qp(q: &[Vec<f64>], b: &[f64], a: &[Vec<f64>], c: &[f64]) -> Result<Self> {
        let n = b.len();
        let m = c.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("equality_qp needs n >= 1 and m >= 1".into()));
        }
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(Error::dims("Q", n, q.len()));
        }
        if a.len() != m || a.iter().any(|r| r.len() != n) {
            return Err(Error::dims("A", m, a.len()));
        }
        let qm = DMatrix::from_row_iterator(n, n, q.iter().flatten().copied());
        let am = DMatrix::from_row_iterator(m, n, a.iter().flatten().copied());
        let bv = DVector::from_column_slice(b);
        let cv = DVector::from_column_slice(c);
        finite("Q", qm.as_slice())?;
        finite("A", am.as_slice())?;
        finite("b", b)?;
        finite("c", c)?;
        let scale = [qm.amax(), am.amax(), bv.amax(), cv.amax()]
            .into_iter()
            .fold(0.0f64, f64::max);

        if (&qm - qm.transpose()).amax() > 1e-12 * scale.max(1.0) {
            return Err(Error::InvalidArgument("Q must be symmetric".into()));
        }
        if qm.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument("Q must be positive definite".into()));
        }
        if m > n || (&am * am.transpose()).cholesky().is_none() {
            return Err(Error::SingularKkt);
        }

        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qm);
        kkt.view_mut((0, n), (n, m)).copy_from(&am.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&am);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&bv);
        rhs.rows_mut(n, m).copy_from(&cv);
        let sol = kkt.lu().solve(&rhs).ok_or(Error::SingularKkt)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularKkt);
        }
        let certificate = Certificate {
            x: sol.rows(0, n).iter().copied().collect(),
            multipliers: BTreeMap::from([("linear".to_owned(), sol.rows(n, m).iter().copied().collect())]),
        };
        let sol_scale = sol.amax();
        Self::assemble(
            "equality_qp",
            Box::new(Quadratic { q: qm, b: bv }),
            vec![BenchmarkConstraint {
                id: "linear".into(),
                constraint_type: ConstraintType::Equality,
                function: Box::new(Affine { a: am, c: cv }),
            }],
            vec![0.0; n],
            Some(certificate),
        )?
        .certify(scale * sol_scale.max(1.0))
    }

    /// Logistic regression on a seeded two-Gaussian dataset
    /// ([`LOGREG_POINTS`] points, [`LOGREG_FEATURES`] features, means
    /// `+-1/sqrt(d)` per coordinate, unit covariance, labels alternating
    /// `+1, -1`) with `||w||^2 + b^2 - threshold <= 0`. Parameters are
    /// `(w, b)`; start at zero. No certificate.
    pub fn norm_logreg(seed: u64, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::InvalidArgument(format!("threshold must be > 0, got {threshold}")));
        }
        let (features, labels) = logreg_dataset(seed);
        Self::new(
            "norm_logreg",
            Box::new(LogisticLoss { features, labels }),
            vec![BenchmarkConstraint {
                id: "norm".into(),
                constraint_type: ConstraintType::Inequality,
                function: Box::new(SquaredNormBound { radius_sq: threshold }),
            }],
            vec![0.0; LOGREG_FEATURES + 1],
            None,
        )
    }

    /// `f(x) = 0`, `h(x) = x` in one dimension: the Lagrangian `mu x` has
    /// its saddle at the origin. Starts at `(x, mu) = (1, 1)`.
    pub fn bilinear() -> Result<Self> {
        let certificate = Certificate {
            x: vec![0.0],
            multipliers: BTreeMap::from([("h".to_owned(), vec![0.0])]),
        };
        let mut bench = Self::assemble(
            "bilinear",
            Box::new(Zero),
            vec![BenchmarkConstraint {
                id: "h".into(),
                constraint_type: ConstraintType::Equality,
                function: Box::new(Identity { dim: 1 }),
            }],
            vec![1.0],
            Some(certificate),
        )?
        .certify(1.0)?;
        bench.initial_multipliers.insert("h".into(), vec![1.0]);
        Ok(bench)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objective(&self) -> &dyn DifferentiableFunction {
        self.objective.as_ref()
    }

    pub fn constraints(&self) -> &[BenchmarkConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: &str) -> Option<&BenchmarkConstraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn initial_multipliers(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.initial_multipliers
    }

    /// Objective followed by each constraint function, for gradient
    /// checking.
    pub fn functions(&self) -> Vec<(&str, &dyn DifferentiableFunction)> {
        let mut out: Vec<(&str, &dyn DifferentiableFunction)> = vec![("objective", self.objective.as_ref())];
        for c in &self.constraints {
            out.push((c.id.as_str(), c.function.as_ref()));
        }
        out
    }

    /// Builds a problem at the start point with every group configured by
    /// `setup`.
    pub fn constrained_problem(&self, setup: &GroupSetup) -> Result<ConstrainedProblem> {
        self.constrained_problem_with(|_| setup.clone())
    }

    /// Like [`Self::constrained_problem`] with a per-group setup.
    pub fn constrained_problem_with(&self, setup: impl Fn(&str) -> GroupSetup) -> Result<ConstrainedProblem> {
        let mut problem = ConstrainedProblem::new(self.start.clone())?;
        for c in &self.constraints {
            let s = setup(&c.id);
            let size = c.function.output_size();
            let mut group = ConstraintGroup::new(c.id.clone(), c.constraint_type, size, s.formulation);
            if s.formulation.has_penalty() {
                group = group.with_penalty(PenaltyCoefficient::scalar(s.penalty.unwrap_or(1.0))?);
                if let Some(sch) = s.scheduler {
                    group = group.with_scheduler(sch);
                }
            }
            if s.formulation.has_multiplier() {
                if let Some(init) = self.initial_multipliers.get(&c.id) {
                    group = group.with_multiplier(DenseMultiplier::with_values(init.clone(), c.constraint_type)?);
                }
                if s.indexed {
                    group = group.indexed();
                }
            }
            problem.register_group(group)?;
        }
        Ok(problem)
    }
}

impl Oracle for BenchmarkProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> std::result::Result<CmpState, OracleError> {
        let mut state = CmpState::new(self.objective.eval(x)[0]);
        for c in &self.constraints {
            state
                .observed_constraints
                .insert(c.id.clone(), ConstraintState::new(c.function.eval(x)));
        }
        Ok(state)
    }

    fn gradients(&self, x: &[f64], _: &CmpState) -> std::result::Result<Gradients, OracleError> {
        let mut grads = Gradients {
            loss: self.objective.grad_row(x, 0),
            ..Default::default()
        };
        for c in &self.constraints {
            let rows = (0..c.function.output_size()).map(|i| c.function.grad_row(x, i)).collect();
            grads.constraints.insert(c.id.clone(), rows);
        }
        Ok(grads)
    }
}

/// KKT residuals of `(x, multipliers)` for `bench`. Groups missing from
/// `multipliers` are treated as having zero multipliers.
pub fn kkt_residual(
    bench: &BenchmarkProblem,
    x: &[f64],
    multipliers: &BTreeMap<String, Vec<f64>>,
) -> Result<KktResidual> {
    if x.len() != bench.dim {
        return Err(Error::dims("primal point", bench.dim, x.len()));
    }
    let mut grad = bench.objective.grad_row(x, 0);
    let mut feasibility = 0.0f64;
    let mut complementarity = 0.0f64;
    for c in &bench.constraints {
        let values = c.function.eval(x);
        let zeros = vec![0.0; values.len()];
        let lambda = multipliers.get(&c.id).unwrap_or(&zeros);
        if lambda.len() != values.len() {
            return Err(Error::dims(format!("multipliers of `{}`", c.id), values.len(), lambda.len()));
        }
        for (i, (&v, &l)) in values.iter().zip(lambda).enumerate() {
            match c.constraint_type {
                ConstraintType::Inequality => {
                    if l < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "negative inequality multiplier in `{}`",
                            c.id
                        )));
                    }
                    feasibility = feasibility.max(v.max(0.0));
                    complementarity = complementarity.max((l * v).abs());
                }
                ConstraintType::Equality => feasibility = feasibility.max(v.abs()),
            }
            if l != 0.0 {
                for (g, d) in grad.iter_mut().zip(c.function.grad_row(x, i)) {
                    *g += l * d;
                }
            }
        }
    }
    let stationarity = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(KktResidual {
        stationarity,
        feasibility,
        complementarity,
    })
}

/// The logistic-regression dataset for `seed`: features are drawn from a
/// ChaCha8 stream through a standard normal sampler, row by row.
pub fn logreg_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = 1.0 / (LOGREG_FEATURES as f64).sqrt();
    let mut features = Vec::with_capacity(LOGREG_POINTS);
    let mut labels = Vec::with_capacity(LOGREG_POINTS);
    for i in 0..LOGREG_POINTS {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let row = (0..LOGREG_FEATURES)
            .map(|_| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                y * shift + noise
            })
            .collect();
        features.push(row);
        labels.push(y);
    }
    (features, labels)
}
