use crate::error::{Error, Result};
use crate::multipliers::Multiplier;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualKind {
    /// Projected gradient ascent: `lambda <- [lambda + lr * signal]_+`.
    GradientAscent,
    /// nuPI: ascent on the error plus a proportional term on the change of
    /// its exponential moving average.
    ///
    /// ```text
    /// ema_t  = nu * ema_{t-1} + (1 - nu) * e_t
    /// delta  = lr * (e_t + kp * (ema_t - ema_{t-1}))
    /// ```
    ///
    /// `ema_{-1}` is the first observed error, so the first step equals
    /// plain gradient ascent.
    NuPi { kp: f64, nu: f64 },
}

impl DualKind {
    pub fn name(&self) -> &'static str {
        match self {
            DualKind::GradientAscent => "ga",
            DualKind::NuPi { .. } => "nupi",
        }
    }
}

/// Per-group dual optimizer state. Only nuPI keeps anything.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualBuffers {
    /// Error moving average, one entry per multiplier entry; created at
    /// the first nuPI step.
    pub ema: Option<Vec<f64>>,
    /// Whether each entry has seen its first observation.
    pub seen: Vec<bool>,
}

/// Dual optimizers always ascend: the multipliers solve a maximization
/// problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptimizer {
    kind: DualKind,
    lr: f64,
}

impl DualOptimizer {
    pub fn new(kind: DualKind, lr: f64) -> Result<Self> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dual learning rate must be finite and non-negative, got {lr}"
            )));
        }
        if let DualKind::NuPi { kp, nu } = kind {
            if !(kp.is_finite() && kp >= 0.0) {
                return Err(Error::InvalidArgument(format!("kp must be >= 0, got {kp}")));
            }
            if !(0.0..1.0).contains(&nu) {
                return Err(Error::InvalidArgument(format!("nu must lie in [0, 1), got {nu}")));
            }
        }
        Ok(Self { kind, lr })
    }

    pub fn gradient_ascent(lr: f64) -> Result<Self> {
        Self::new(DualKind::GradientAscent, lr)
    }

    pub fn nupi(lr: f64, kp: f64, nu: f64) -> Result<Self> {
        Self::new(DualKind::NuPi { kp, nu }, lr)
    }

    pub fn kind(&self) -> DualKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        *self = Self::new(self.kind, lr)?;
        Ok(())
    }

    /// Returns the updated multiplier and buffers without mutating inputs.
    pub fn propose(
        &self,
        buffers: &DualBuffers,
        multiplier: &Multiplier,
        signal: &[f64],
        indices: Option<&[usize]>,
    ) -> Result<(Multiplier, DualBuffers)> {
        if signal.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("dual signal".into()));
        }
        let expected = indices.map_or(multiplier.len(), <[usize]>::len);
        if signal.len() != expected {
            return Err(Error::dims("dual signal", expected, signal.len()));
        }
        let mut buffers = buffers.clone();
        let delta: Vec<f64> = match self.kind {
            DualKind::GradientAscent => signal.iter().map(|e| self.lr * e).collect(),
            DualKind::NuPi { kp, nu } => {
                let n = multiplier.len();
                let ema = buffers.ema.get_or_insert_with(|| vec![0.0; n]);
                if buffers.seen.len() != n {
                    buffers.seen = vec![false; n];
                }
                if ema.len() != n {
                    return Err(Error::dims("nuPI buffer", n, ema.len()));
                }
                let mut delta = Vec::with_capacity(signal.len());
                for (k, &e) in signal.iter().enumerate() {
                    let i = indices.map_or(k, |idx| idx[k]);
                    if i >= n {
                        return Err(Error::IndexOutOfRange { index: i, len: n });
                    }
                    let prev = if buffers.seen[i] { ema[i] } else { e };
                    let next = nu * prev + (1.0 - nu) * e;
                    let p = if kp == 0.0 { e } else { e + kp * (next - prev) };
                    ema[i] = next;
                    buffers.seen[i] = true;
                    delta.push(self.lr * p);
                }
                delta
            }
        };
        let mut updated = multiplier.clone();
        updated.apply_dual_delta(&delta, indices)?;
        Ok((updated, buffers))
    }
}

/// Applies one dual step in place.
pub fn dual_step(
    optimizer: &DualOptimizer,
    buffers: &mut DualBuffers,
    multiplier: &mut Multiplier,
    signal: &[f64],
    indices: Option<&[usize]>,
) -> Result<()> {
    let (m, b) = optimizer.propose(buffers, multiplier, signal, indices)?;
    *multiplier = m;
    *buffers = b;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmp::ConstraintType;
    use crate::multipliers::DenseMultiplier;
    use proptest::prelude::*;

    fn ineq(v: &[f64]) -> Multiplier {
        DenseMultiplier::with_values(v.to_vec(), ConstraintType::Inequality)
            .unwrap()
            .into()
    }

    #[test]
    fn ascent_examples() {
        let opt = DualOptimizer::gradient_ascent(0.1).unwrap();
        let mut m = ineq(&[1.0]);
        let mut b = DualBuffers::default();
        dual_step(&opt, &mut b, &mut m, &[0.5], None).unwrap();
        assert_eq!(m.values(), &[1.0 + 0.1 * 0.5]);

        let opt = DualOptimizer::gradient_ascent(1.0).unwrap();
        let mut m = ineq(&[0.0]);
        dual_step(&opt, &mut b, &mut m, &[-4.0], None).unwrap();
        assert_eq!(m.values(), &[0.0]);
    }

    #[test]
    fn nupi_proportional_kick() {
        // kp = 1, nu = 0: ema tracks the error, delta = lr (e_t + e_t - e_{t-1})
        let opt = DualOptimizer::nupi(1.0, 1.0, 0.0).unwrap();
        let mut m = Multiplier::dense(1, ConstraintType::Equality);
        let mut b = DualBuffers::default();
        dual_step(&opt, &mut b, &mut m, &[2.0], None).unwrap();
        assert_eq!(m.values(), &[2.0]);
        dual_step(&opt, &mut b, &mut m, &[3.0], None).unwrap();
        assert_eq!(m.values(), &[2.0 + 3.0 + 1.0]);
    }

    #[test]
    fn nupi_buffers_follow_indices() {
        let opt = DualOptimizer::nupi(0.5, 2.0, 0.5).unwrap();
        let mut m = Multiplier::indexed(3, ConstraintType::Inequality);
        let mut b = DualBuffers::default();
        dual_step(&opt, &mut b, &mut m, &[1.0], Some(&[1])).unwrap();
        assert_eq!(b.seen, vec![false, true, false]);
        assert_eq!(b.ema.as_ref().unwrap()[0], 0.0);
        assert_eq!(m.values()[0], 0.0);
        assert_eq!(m.values()[2], 0.0);
    }

    #[test]
    fn rejects_non_finite_signal() {
        let opt = DualOptimizer::gradient_ascent(0.1).unwrap();
        let mut m = ineq(&[1.0]);
        let mut b = DualBuffers::default();
        assert!(dual_step(&opt, &mut b, &mut m, &[f64::INFINITY], None).is_err());
        assert_eq!(m.values(), &[1.0]);
        assert!(DualOptimizer::nupi(0.1, -1.0, 0.5).is_err());
        assert!(DualOptimizer::nupi(0.1, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn nupi_without_proportional_gain_is_ascent(
            nu in 0.0f64..0.99,
            lr in 1e-3f64..1.0,
            signals in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..40),
        ) {
            let ga = DualOptimizer::gradient_ascent(lr).unwrap();
            let pi = DualOptimizer::nupi(lr, 0.0, nu).unwrap();
            let (mut a, mut b) = (Multiplier::dense(3, ConstraintType::Inequality), Multiplier::dense(3, ConstraintType::Inequality));
            let (mut ba, mut bb) = (DualBuffers::default(), DualBuffers::default());
            for s in &signals {
                dual_step(&ga, &mut ba, &mut a, s, None).unwrap();
                dual_step(&pi, &mut bb, &mut b, s, None).unwrap();
                let bits_a: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
        }
    }
}
