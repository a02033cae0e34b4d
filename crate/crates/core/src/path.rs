//! Step-function spaces `V_N` inside `L^2([0,1], so(d))`.
//!
//! A [`StepPath`] takes the value `values[i]` on `[i/N, (i+1)/N)`. The map
//! sending `f` to the coordinates of `sqrt(1/N) f_i` in the orthonormal
//! algebra basis, concatenated over `i`, is a linear isometry onto Euclidean
//! space of dimension `algebra_dim(d) * N`; sampling and Jacobians work there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{algebra_dim, hs_inner, AlgebraVector};

#[derive(Clone, Debug, PartialEq)]
pub struct StepPath {
    dim: usize,
    values: Vec<AlgebraVector>,
}

impl StepPath {
    pub fn new(values: Vec<AlgebraVector>) -> Result<Self> {
        let first = values.first().ok_or(Error::EmptyPartition)?;
        let dim = first.dim();
        if let Some(bad) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            });
        }
        Ok(Self { dim, values })
    }

    pub fn zero(dim: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPartition);
        }
        Self::new(vec![AlgebraVector::zero(dim); n])
    }

    pub fn constant(x: AlgebraVector, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPartition);
        }
        Self::new(vec![x; n])
    }

    /// Inverse of [`StepPath::coords`].
    pub fn from_coords(dim: usize, n: usize, coords: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPartition);
        }
        let k = algebra_dim(dim);
        if coords.len() != k * n {
            return Err(Error::CoordinateCount {
                expected: k * n,
                got: coords.len(),
            });
        }
        let scale = (n as f64).sqrt();
        let values = coords
            .chunks(k)
            .map(|c| {
                let scaled: Vec<f64> = c.iter().map(|v| v * scale).collect();
                AlgebraVector::from_coords(dim, &scaled)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    /// Isometric Euclidean coordinates: basis coordinates of `sqrt(1/N) f_i`.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.coord_len());
        for v in &self.values {
            v.write_coords(&mut out);
        }
        let scale = 1.0 / (self.n() as f64).sqrt();
        out.iter_mut().for_each(|c| *c *= scale);
        out
    }

    pub fn coord_len(&self) -> usize {
        algebra_dim(self.dim) * self.n()
    }

    /// Matrix size d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Partition count N.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[AlgebraVector] {
        &self.values
    }

    /// Index of the interval containing `t`, with `[i/N, (i+1)/N)` and `t = 1`
    /// assigned to the last interval.
    pub fn interval_index(&self, t: f64) -> Result<usize> {
        interval_index(self.n(), t)
    }

    /// Pointwise value `f(t)`.
    pub fn value_at(&self, t: f64) -> Result<&AlgebraVector> {
        Ok(&self.values[self.interval_index(t)?])
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(|v| v.scale(s)).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &Self,
        op: impl Fn(&AlgebraVector, &AlgebraVector) -> Result<AlgebraVector>,
    ) -> Result<Self> {
        check_compatible(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| op(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: self.dim,
            values,
        })
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self.values.iter().map(|v| v.hs_norm().powi(2)).sum();
        (sq / self.n() as f64).sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&StepPathRecord::from(self)).expect("record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: StepPathRecord =
            serde_json::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        rec.try_into()
    }
}

pub(crate) fn interval_index(n: usize, t: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    Ok(((t * n as f64).floor() as usize).min(n - 1))
}

pub(crate) fn check_compatible(f: &StepPath, g: &StepPath) -> Result<()> {
    if f.dim != g.dim {
        return Err(Error::DimensionMismatch {
            left: f.dim,
            right: g.dim,
        });
    }
    if f.n() != g.n() {
        return Err(Error::PartitionMismatch {
            left: f.n(),
            right: g.n(),
        });
    }
    Ok(())
}

/// JSON form `{dim, N, coords}` with `coords` the isometric coordinates in basis order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepPathRecord {
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub coords: Vec<f64>,
}

impl From<&StepPath> for StepPathRecord {
    fn from(f: &StepPath) -> Self {
        Self {
            dim: f.dim,
            n: f.n(),
            coords: f.coords(),
        }
    }
}

impl TryFrom<StepPathRecord> for StepPath {
    type Error = Error;
    fn try_from(rec: StepPathRecord) -> Result<Self> {
        StepPath::from_coords(rec.dim, rec.n, &rec.coords)
    }
}

/// `(1/N) sum_i <f_i, g_i>`.
pub fn l2_inner(f: &StepPath, g: &StepPath) -> Result<f64> {
    check_compatible(f, g)?;
    let mut acc = 0.0;
    for (a, b) in f.values.iter().zip(&g.values) {
        acc += hs_inner(a, b)?;
    }
    Ok(acc / f.n() as f64)
}

/// Embeds `V_N` into `V_{mN}` by repeating each value `m` times.
pub fn refine(f: &StepPath, m: usize) -> Result<StepPath> {
    if m == 0 {
        return Err(Error::ZeroRefinement);
    }
    let values = f
        .values
        .iter()
        .flat_map(|v| std::iter::repeat_n(v.clone(), m))
        .collect();
    Ok(StepPath { dim: f.dim, values })
}

/// `min(|f - g|_2, 1)`.
pub fn truncated_distance(f: &StepPath, g: &StepPath) -> Result<f64> {
    Ok(f.sub(g)?.l2_norm().min(1.0))
}

/// `max_i |g_i|_HS`.
pub fn sup_norm(g: &StepPath) -> f64 {
    g.values
        .iter()
        .map(AlgebraVector::hs_norm)
        .fold(0.0, f64::max)
}
