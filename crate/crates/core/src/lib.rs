//! Lagrangian-based constrained optimization for continuous problems.
//!
//! A [`ConstrainedProblem`] holds the primal point and one
//! [`ConstraintGroup`] per block of constraints. User code implements
//! [`Oracle`] to evaluate the loss, the constraint violations (`g(x) <= 0`,
//! `h(x) = 0`) and their gradients; a [`ConstrainedOptimizer`] then runs
//! gradient descent-ascent style updates on the Lagrangian
//! `f + lambda^T g + mu^T h` or one of its penalized variants.
//!
//! ```
//! use lagrangekit::{
//!     CmpState, ConstrainedOptimizer, ConstrainedProblem, ConstraintGroup, ConstraintState,
//!     ConstraintType, DualOptimizer, Gradients, Oracle, OracleError, PrimalOptimizer,
//! };
//!
//! // min (x - 2)^2  s.t.  x - 1 <= 0
//! struct Shifted;
//!
//! impl Oracle for Shifted {
//!     fn dim(&self) -> usize { 1 }
//!     fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError> {
//!         Ok(CmpState::new((x[0] - 2.0).powi(2))
//!             .with_constraint("cap", ConstraintState::new(vec![x[0] - 1.0])))
//!     }
//!     fn gradients(&self, x: &[f64], _: &CmpState) -> Result<Gradients, OracleError> {
//!         let mut g = Gradients { loss: vec![2.0 * (x[0] - 2.0)], ..Default::default() };
//!         g.constraints.insert("cap".into(), vec![vec![1.0]]);
//!         Ok(g)
//!     }
//! }
//!
//! let mut problem = ConstrainedProblem::new(vec![0.0]).unwrap();
//! problem.register_group(ConstraintGroup::lagrangian("cap", ConstraintType::Inequality, 1)).unwrap();
//! let mut opt = ConstrainedOptimizer::simultaneous(
//!     PrimalOptimizer::gd(0.05).unwrap(),
//!     DualOptimizer::gradient_ascent(0.05).unwrap(),
//! );
//! for _ in 0..3000 {
//!     opt.roll(&mut problem, &Shifted).unwrap();
//! }
//! assert!((problem.x()[0] - 1.0).abs() < 1e-6);
//! assert!((problem.multipliers()["cap"][0] - 2.0).abs() < 1e-6);
//! ```

pub mod checkpoint;
pub mod cli;
pub mod cmp;
pub mod error;
pub mod formulations;
pub mod gradients;
pub mod hexfloat;
pub mod multipliers;
pub mod optim;
pub mod problems;
pub mod session;
pub mod trace;

pub use cmp::{
    CmpState, ConstrainedProblem, ConstraintGroup, ConstraintState, ConstraintType, Formulation, Gradients,
    Oracle, OracleError,
};
pub use error::{Error, Result};
pub use formulations::{PenaltyCoefficient, PenaltyScheduler};
pub use multipliers::{DenseMultiplier, IndexedMultiplier, Multiplier};
pub use problems::{kkt_residual, BenchmarkProblem, GroupSetup, KktResidual};
pub use optim::{
    ConstrainedOptimizer, DualKind, DualOptimizer, PrimalKind, PrimalOptimizer, RollOut, Scheme,
};
