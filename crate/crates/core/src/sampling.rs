//! Reproducible sampling from the uniform probability measure on `R * B_N`.
//!
//! Every sample owns an independent random stream keyed by `(seed, index)`,
//! so a batch is a pure function of the spec and can be generated on any
//! number of workers with bit-identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::algebra_dim;
use crate::path::StepPath;

/// Parameters of the uniform measure on the radius-`radius` ball of `V_N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub radius: f64,
    pub dim: usize,
    pub seed: u64,
}

impl MeasureSpec {
    pub fn new(n: usize, radius: f64, dim: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            n,
            radius,
            dim,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyPartition);
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidRadius(self.radius));
        }
        if self.dim < 2 {
            return Err(Error::MatrixSizeTooSmall(self.dim));
        }
        Ok(())
    }

    /// Euclidean dimension `algebra_dim(d) * N` of `V_N`.
    pub fn euclidean_dim(&self) -> usize {
        algebra_dim(self.dim) * self.n
    }
}

/// `R_N = scale * N^exponent` with `exponent` in `(1/2, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    exponent: f64,
    scale: f64,
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        Self {
            exponent: 0.75,
            scale: 1.0,
        }
    }
}

impl RadiusSchedule {
    pub fn new(exponent: f64, scale: f64) -> Result<Self> {
        if !(exponent > 0.5 && exponent < 1.0) {
            return Err(Error::InvalidExponent(exponent));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidRadius(scale));
        }
        Ok(Self { exponent, scale })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

pub fn radius_for(schedule: &RadiusSchedule, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptyPartition);
    }
    Ok(schedule.scale * (n as f64).powf(schedule.exponent))
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `seed`: `splitmix64(seed ^ splitmix64(index))`.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Independent generator for stream `index`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, index))
}

/// Uniform point of the Euclidean ball of radius `radius` in dimension
/// `dim`: a Gaussian direction scaled by `radius * u^(1/dim)`.
pub fn uniform_ball_point<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.gen();
        let r = radius * u.powf(1.0 / dim as f64);
        v.iter_mut().for_each(|x| *x *= r / norm);
        return v;
    }
}

/// Sample `index` of the stream defined by `spec`.
pub fn sample_one(spec: &MeasureSpec, index: u64) -> StepPath {
    let mut rng = stream_rng(spec.seed, index);
    let coords = uniform_ball_point(&mut rng, spec.euclidean_dim(), spec.radius);
    StepPath::from_coords(spec.dim, spec.n, &coords).expect("coordinate count matches spec")
}

/// `count` i.i.d. samples of the uniform measure on `spec.radius * B_N`,
/// generated on the current rayon pool.
pub fn sample_ball(spec: &MeasureSpec, count: usize) -> Result<Vec<StepPath>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| sample_one(spec, i))
        .collect())
}

/// Kolmogorov–Smirnov distance between `(|f|_2 / radius)^dim` over `samples`
/// and Uniform(0, 1); under the uniform ball law the statistic is uniform.
pub fn radial_ks_statistic(samples: &[StepPath], radius: f64) -> f64 {
    let Some(first) = samples.first() else {
        return f64::NAN;
    };
    let dim = first.coord_len() as f64;
    let mut u: Vec<f64> = samples
        .iter()
        .map(|f| (f.l2_norm() / radius).powf(dim))
        .collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max)
}
