use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimalKind {
    /// Plain gradient descent.
    Gd,
    /// Heavy-ball momentum: `v <- beta v + grad`, `x <- x - lr v`.
    Momentum { beta: f64 },
    /// Bias-corrected first/second moment step.
    AdamLike { beta1: f64, beta2: f64, eps: f64 },
}

impl PrimalKind {
    pub fn name(&self) -> &'static str {
        match self {
            PrimalKind::Gd => "gd",
            PrimalKind::Momentum { .. } => "momentum",
            PrimalKind::AdamLike { .. } => "adam",
        }
    }
}

/// Lazily created optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimalBuffers {
    Momentum { velocity: Vec<f64> },
    AdamLike { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalOptimizer {
    kind: PrimalKind,
    lr: f64,
    buffers: Option<PrimalBuffers>,
}

fn check_rate(name: &str, lr: f64) -> Result<()> {
    if lr.is_finite() && lr >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} learning rate must be finite and non-negative, got {lr}"
        )))
    }
}

fn check_unit(name: &str, beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {beta}")))
    }
}

impl PrimalOptimizer {
    pub fn new(kind: PrimalKind, lr: f64) -> Result<Self> {
        check_rate("primal", lr)?;
        match kind {
            PrimalKind::Gd => {}
            PrimalKind::Momentum { beta } => check_unit("momentum", beta)?,
            PrimalKind::AdamLike { beta1, beta2, eps } => {
                check_unit("beta1", beta1)?;
                check_unit("beta2", beta2)?;
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
                }
            }
        }
        Ok(Self {
            kind,
            lr,
            buffers: None,
        })
    }

    pub fn gd(lr: f64) -> Result<Self> {
        Self::new(PrimalKind::Gd, lr)
    }

    pub fn momentum(lr: f64, beta: f64) -> Result<Self> {
        Self::new(PrimalKind::Momentum { beta }, lr)
    }

    /// Adam-like optimizer with the usual defaults (0.9, 0.999, 1e-8).
    pub fn adam(lr: f64) -> Result<Self> {
        Self::new(
            PrimalKind::AdamLike {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            lr,
        )
    }

    pub fn kind(&self) -> PrimalKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        check_rate("primal", lr)?;
        self.lr = lr;
        Ok(())
    }

    pub fn buffers(&self) -> Option<&PrimalBuffers> {
        self.buffers.as_ref()
    }

    pub(crate) fn restore_buffers(&mut self, buffers: Option<PrimalBuffers>) {
        self.buffers = buffers;
    }

    /// Computes the next iterate and the buffers it would leave behind,
    /// without mutating anything.
    fn propose(&self, x: &[f64], grad: &[f64]) -> Result<(Vec<f64>, Option<PrimalBuffers>)> {
        if grad.len() != x.len() {
            return Err(Error::dims("primal gradient", x.len(), grad.len()));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("primal gradient".into()));
        }
        let n = x.len();
        let (next, buffers) = match self.kind {
            PrimalKind::Gd => (
                x.iter().zip(grad).map(|(x, g)| x - self.lr * g).collect(),
                None,
            ),
            PrimalKind::Momentum { beta } => {
                let mut velocity = match &self.buffers {
                    Some(PrimalBuffers::Momentum { velocity }) if velocity.len() == n => velocity.clone(),
                    Some(_) => return Err(Error::dims("momentum buffer", n, 0)),
                    None => vec![0.0; n],
                };
                for (v, g) in velocity.iter_mut().zip(grad) {
                    *v = beta * *v + g;
                }
                let next = x.iter().zip(&velocity).map(|(x, v)| x - self.lr * v).collect();
                (next, Some(PrimalBuffers::Momentum { velocity }))
            }
            PrimalKind::AdamLike { beta1, beta2, eps } => {
                let (mut m, mut v, t) = match &self.buffers {
                    Some(PrimalBuffers::AdamLike { m, v, t }) if m.len() == n && v.len() == n => {
                        (m.clone(), v.clone(), *t)
                    }
                    Some(_) => return Err(Error::dims("moment buffers", n, 0)),
                    None => (vec![0.0; n], vec![0.0; n], 0),
                };
                let t = t + 1;
                let exponent = i32::try_from(t).unwrap_or(i32::MAX);
                let bias1 = 1.0 - beta1.powi(exponent);
                let bias2 = 1.0 - beta2.powi(exponent);
                let mut next = Vec::with_capacity(n);
                for i in 0..n {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    next.push(x[i] - self.lr * m_hat / (v_hat.sqrt() + eps));
                }
                (next, Some(PrimalBuffers::AdamLike { m, v, t }))
            }
        };
        if next.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::NonFinite("primal iterate".into()));
        }
        Ok((next, buffers))
    }

    /// One descent step; advances the buffers.
    pub fn step(&mut self, x: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
        let (next, buffers) = self.propose(x, grad)?;
        self.buffers = buffers;
        Ok(next)
    }

    /// The step `step` would take, leaving the buffers untouched.
    pub fn preview(&self, x: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
        self.propose(x, grad).map(|(next, _)| next)
    }
}

/// Free-function form of [`PrimalOptimizer::step`].
pub fn primal_step(state: &mut PrimalOptimizer, x: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    state.step(x, grad)
}
