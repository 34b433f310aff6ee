//! A benchmark run: problem, optimizer, step counter and periodic penalty
//! scheduling, with trace rows and checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use crate::checkpoint;
use crate::cmp::{ConstrainedProblem, ConstraintType};
use crate::error::{Error, Result};
use crate::formulations::primal_weights;
use crate::optim::{lagrangian_values, ConstrainedOptimizer};
use crate::problems::{kkt_residual, BenchmarkProblem, KktResidual};
use crate::trace::TraceRow;

pub struct Session {
    bench: BenchmarkProblem,
    problem: ConstrainedProblem,
    optimizer: ConstrainedOptimizer,
    step: u64,
    penalty_every: Option<u64>,
}

/// Post-step measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub row: TraceRow,
    /// Effective multipliers: the weights each group applies to its
    /// constraint gradients. Equal to the stored multipliers for the plain
    /// Lagrangian; implied by the penalty for penalized formulations.
    pub effective_multipliers: BTreeMap<String, Vec<f64>>,
    pub kkt: KktResidual,
}

impl Session {
    pub fn new(bench: BenchmarkProblem, problem: ConstrainedProblem, optimizer: ConstrainedOptimizer) -> Self {
        Self {
            bench,
            problem,
            optimizer,
            step: 0,
            penalty_every: None,
        }
    }

    /// Run the penalty schedulers after every `n` steps.
    pub fn with_penalty_every(mut self, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("penalty interval must be >= 1".into()));
        }
        self.penalty_every = Some(n);
        Ok(self)
    }

    pub fn bench(&self) -> &BenchmarkProblem {
        &self.bench
    }

    pub fn problem(&self) -> &ConstrainedProblem {
        &self.problem
    }

    pub fn optimizer(&self) -> &ConstrainedOptimizer {
        &self.optimizer
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One roll, followed by penalty scheduling when due.
    pub fn roll(&mut self) -> Result<()> {
        self.optimizer.roll(&mut self.problem, &self.bench)?;
        self.step += 1;
        if let Some(n) = self.penalty_every {
            if self.step % n == 0 {
                let state = self.problem.compute_cmp_state(&self.bench, self.problem.x())?;
                self.problem.update_penalties(&state);
            }
        }
        Ok(())
    }

    /// Measures the current state.
    pub fn observe(&self) -> Result<Observation> {
        let state = self.problem.compute_cmp_state(&self.bench, self.problem.x())?;
        let values = lagrangian_values(&self.problem, &state)?;
        let mut effective = BTreeMap::new();
        let (mut ineq, mut eq) = (0.0f64, 0.0f64);
        for group in self.problem.groups() {
            let Some(cs) = state.observed_constraints.get(group.id()) else {
                continue;
            };
            for &v in &cs.violation {
                match group.constraint_type() {
                    ConstraintType::Inequality => ineq = ineq.max(v),
                    ConstraintType::Equality => eq = eq.max(v.abs()),
                }
            }
            effective.insert(group.id().to_owned(), primal_weights(group, cs)?);
        }
        let kkt = kkt_residual(&self.bench, self.problem.x(), &effective)?;
        let multiplier_linf = effective
            .values()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let row = TraceRow {
            step: self.step,
            loss: state.loss,
            primal_lagrangian: values.primal,
            dual_lagrangian: values.dual,
            max_ineq_violation: ineq,
            max_eq_violation: eq,
            multiplier_linf,
            kkt_stationarity: kkt.stationarity,
            kkt_complementarity: kkt.complementarity,
        };
        if [row.loss, row.primal_lagrangian, row.dual_lagrangian, multiplier_linf, kkt.max()]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::non_finite_evaluation(None, "non-finite trace values"));
        }
        Ok(Observation {
            row,
            effective_multipliers: effective,
            kkt,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(&self.problem, &self.optimizer, self.step, path)
    }

    /// Restores problem, optimizer and step counter from a checkpoint.
    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.step = checkpoint::load(path, &mut self.problem, &mut self.optimizer)?;
        Ok(())
    }
}
