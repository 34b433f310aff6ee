//! Differentiable building blocks for the benchmark problems.

use nalgebra::{DMatrix, DVector};

use crate::gradients::DifferentiableFunction;

/// `||x - a||^2`.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub target: Vec<f64>,
}

impl DifferentiableFunction for SquaredDistance {
    fn output_size(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        vec![x.iter().zip(&self.target).map(|(x, a)| (x - a) * (x - a)).sum()]
    }

    fn grad_row(&self, x: &[f64], _: usize) -> Vec<f64> {
        x.iter().zip(&self.target).map(|(x, a)| 2.0 * (x - a)).collect()
    }
}

/// `||x||^2 - radius_sq`.
#[derive(Debug, Clone)]
pub struct SquaredNormBound {
    pub radius_sq: f64,
}

impl DifferentiableFunction for SquaredNormBound {
    fn output_size(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        vec![x.iter().map(|v| v * v).sum::<f64>() - self.radius_sq]
    }

    fn grad_row(&self, x: &[f64], _: usize) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }
}

/// `0.5 x^T Q x - b^T x`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DifferentiableFunction for Quadratic {
    fn output_size(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        vec![0.5 * x.dot(&(&self.q * &x)) - self.b.dot(&x)]
    }

    fn grad_row(&self, x: &[f64], _: usize) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.q * x - &self.b).iter().copied().collect()
    }
}

/// `A x - c`, one output per row.
#[derive(Debug, Clone)]
pub struct Affine {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl DifferentiableFunction for Affine {
    fn output_size(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.a * x - &self.c).iter().copied().collect()
    }

    fn grad_row(&self, _: &[f64], i: usize) -> Vec<f64> {
        self.a.row(i).iter().copied().collect()
    }
}

/// The zero function on any input.
#[derive(Debug, Clone, Copy)]
pub struct Zero;

impl DifferentiableFunction for Zero {
    fn output_size(&self) -> usize {
        1
    }

    fn eval(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0]
    }

    fn grad_row(&self, x: &[f64], _: usize) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// `x` itself, one output per coordinate.
#[derive(Debug, Clone, Copy)]
pub struct Identity {
    pub dim: usize,
}

impl DifferentiableFunction for Identity {
    fn output_size(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn grad_row(&self, x: &[f64], i: usize) -> Vec<f64> {
        let mut row = vec![0.0; x.len()];
        row[i] = 1.0;
        row
    }
}

/// `log(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1 / (1 + e^-t)` without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of a linear classifier with labels in
/// `{-1, +1}`. The parameter vector is `(w, b)`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl LogisticLoss {
    fn score(&self, x: &[f64], i: usize) -> f64 {
        let d = x.len() - 1;
        self.features[i].iter().zip(&x[..d]).map(|(z, w)| z * w).sum::<f64>() + x[d]
    }
}

impl DifferentiableFunction for LogisticLoss {
    fn output_size(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.labels.len() as f64;
        let total: f64 = (0..self.labels.len())
            .map(|i| softplus(-self.labels[i] * self.score(x, i)))
            .sum();
        vec![total / n]
    }

    fn grad_row(&self, x: &[f64], _: usize) -> Vec<f64> {
        let n = self.labels.len() as f64;
        let d = x.len() - 1;
        let mut grad = vec![0.0; x.len()];
        for (i, (z, y)) in self.features.iter().zip(&self.labels).enumerate() {
            let weight = -y * sigmoid(-y * self.score(x, i));
            for (g, zk) in grad[..d].iter_mut().zip(z) {
                *g += weight * zk;
            }
            grad[d] += weight;
        }
        grad.iter_mut().for_each(|g| *g /= n);
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_scalar_helpers() {
        assert_eq!(softplus(0.0), std::f64::consts::LN_2);
        assert_eq!(softplus(800.0), 800.0);
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn affine_rows() {
        let f = Affine {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            c: DVector::from_column_slice(&[1.0, 0.0]),
        };
        assert_eq!(f.eval(&[1.0, 1.0]), vec![2.0, 7.0]);
        assert_eq!(f.grad_row(&[0.0, 0.0], 1), vec![3.0, 4.0]);
    }
}
