//! Dual variables attached to constraint groups.
//!
//! Inequality multipliers live in the non-negative orthant and are projected
//! back onto it after every update. Equality multipliers are unconstrained.
//! [`IndexedMultiplier`] additionally counts how often each entry has been
//! touched, for problems where only a subset of the constraints is measured
//! at every step.

use crate::cmp::{ConstraintState, ConstraintType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMultiplier {
    values: Vec<f64>,
    constraint_type: ConstraintType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedMultiplier {
    values: Vec<f64>,
    constraint_type: ConstraintType,
    update_count: Vec<u64>,
}

/// A multiplier handle owned by a constraint group.
#[derive(Debug, Clone, PartialEq)]
pub enum Multiplier {
    Dense(DenseMultiplier),
    Indexed(IndexedMultiplier),
}

fn project_in_place(values: &mut [f64], constraint_type: ConstraintType) {
    if constraint_type == ConstraintType::Inequality {
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

fn checked_initial_values(values: Vec<f64>, constraint_type: ConstraintType) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "multiplier must have at least one entry".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("multiplier initial values".into()));
    }
    let mut values = values;
    project_in_place(&mut values, constraint_type);
    Ok(values)
}

/// Checks that `indices` are in range and pairwise distinct.
pub(crate) fn validate_indices(indices: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    for &i in indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if seen[i] {
            return Err(Error::DuplicateIndex(i));
        }
        seen[i] = true;
    }
    Ok(())
}

impl DenseMultiplier {
    /// Zero-initialized multiplier with `size` entries.
    pub fn zeros(size: usize, constraint_type: ConstraintType) -> Self {
        Self {
            values: vec![0.0; size],
            constraint_type,
        }
    }

    /// Multiplier with user-provided initial values. Inequality values are
    /// projected onto the non-negative orthant.
    pub fn with_values(values: Vec<f64>, constraint_type: ConstraintType) -> Result<Self> {
        Ok(Self {
            values: checked_initial_values(values, constraint_type)?,
            constraint_type,
        })
    }
}

impl IndexedMultiplier {
    pub fn zeros(size: usize, constraint_type: ConstraintType) -> Self {
        Self {
            values: vec![0.0; size],
            constraint_type,
            update_count: vec![0; size],
        }
    }

    pub fn with_values(values: Vec<f64>, constraint_type: ConstraintType) -> Result<Self> {
        let values = checked_initial_values(values, constraint_type)?;
        let update_count = vec![0; values.len()];
        Ok(Self {
            values,
            constraint_type,
            update_count,
        })
    }

    /// Number of dual updates each entry has received.
    pub fn update_count(&self) -> &[u64] {
        &self.update_count
    }
}

impl From<DenseMultiplier> for Multiplier {
    fn from(m: DenseMultiplier) -> Self {
        Multiplier::Dense(m)
    }
}

impl From<IndexedMultiplier> for Multiplier {
    fn from(m: IndexedMultiplier) -> Self {
        Multiplier::Indexed(m)
    }
}

impl Multiplier {
    pub fn dense(size: usize, constraint_type: ConstraintType) -> Self {
        DenseMultiplier::zeros(size, constraint_type).into()
    }

    pub fn indexed(size: usize, constraint_type: ConstraintType) -> Self {
        IndexedMultiplier::zeros(size, constraint_type).into()
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Multiplier::Dense(m) => &m.values,
            Multiplier::Indexed(m) => &m.values,
        }
    }

    pub fn constraint_type(&self) -> ConstraintType {
        match self {
            Multiplier::Dense(m) => m.constraint_type,
            Multiplier::Indexed(m) => m.constraint_type,
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    pub fn is_indexed(&self) -> bool {
        matches!(self, Multiplier::Indexed(_))
    }

    /// Per-entry update counters; `None` for dense multipliers.
    pub fn update_count(&self) -> Option<&[u64]> {
        match self {
            Multiplier::Dense(_) => None,
            Multiplier::Indexed(m) => Some(&m.update_count),
        }
    }

    fn values_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Multiplier::Dense(m) => &mut m.values,
            Multiplier::Indexed(m) => &mut m.values,
        }
    }

    /// Element-wise projection onto the feasible dual set: `max(value, 0)`
    /// for inequality multipliers, identity for equality multipliers.
    pub fn project(&mut self) {
        let ty = self.constraint_type();
        project_in_place(self.values_mut(), ty);
    }

    /// Adds `delta` at the addressed positions (all positions when `indices`
    /// is `None`) and projects. Nothing is modified if validation fails.
    pub fn apply_dual_delta(&mut self, delta: &[f64], indices: Option<&[usize]>) -> Result<()> {
        let len = self.len();
        match indices {
            None => {
                if delta.len() != len {
                    return Err(Error::dims("dual delta", len, delta.len()));
                }
            }
            Some(idx) => {
                if delta.len() != idx.len() {
                    return Err(Error::dims("dual delta", idx.len(), delta.len()));
                }
                validate_indices(idx, len)?;
            }
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("dual delta".into()));
        }

        let ty = self.constraint_type();
        let (values, counts) = match self {
            Multiplier::Dense(m) => (&mut m.values, None),
            Multiplier::Indexed(m) => (&mut m.values, Some(&mut m.update_count)),
        };
        match indices {
            None => {
                for (v, d) in values.iter_mut().zip(delta) {
                    *v += d;
                }
                project_in_place(values, ty);
                if let Some(counts) = counts {
                    counts.iter_mut().for_each(|c| *c += 1);
                }
            }
            Some(idx) => {
                for (&i, d) in idx.iter().zip(delta) {
                    let v = values[i] + d;
                    values[i] = if ty == ConstraintType::Inequality && v < 0.0 {
                        0.0
                    } else {
                        v
                    };
                }
                if let Some(counts) = counts {
                    for &i in idx {
                        counts[i] += 1;
                    }
                }
            }
        }
        Ok(())
    }

    /// The multiplier entries matching `state`'s violation entries, in order.
    pub fn values_for(&self, state: &ConstraintState) -> Result<Vec<f64>> {
        gather(self.values(), state.observed_indices.as_deref())
    }

    /// Overwrites values and counters wholesale. Used when restoring
    /// checkpoints; callers validate sizes beforehand.
    pub(crate) fn restore(&mut self, values: Vec<f64>, counts: Option<Vec<u64>>) {
        match self {
            Multiplier::Dense(m) => m.values = values,
            Multiplier::Indexed(m) => {
                m.values = values;
                if let Some(c) = counts {
                    m.update_count = c;
                }
            }
        }
    }
}

/// Free-function form of [`Multiplier::values_for`].
pub fn multiplier_values_for(state: &ConstraintState, multiplier: &Multiplier) -> Result<Vec<f64>> {
    multiplier.values_for(state)
}

/// Gathers `values[indices]`, or copies everything when `indices` is `None`.
pub(crate) fn gather(values: &[f64], indices: Option<&[usize]>) -> Result<Vec<f64>> {
    match indices {
        None => Ok(values.to_vec()),
        Some(idx) => idx
            .iter()
            .map(|&i| {
                values.get(i).copied().ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: values.len(),
                })
            })
            .collect(),
    }
}
