//! Monge-Kantorovich estimators under the truncated cost `min(|f - g|_2, 1)`,
//! plus the angle, escape and volume statistics used to study asymptotic
//! invariance of ball measures.

pub mod assignment;
pub mod sinkhorn;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{partial_products, rho_adjoint, star_phi_with};
use crate::lie::algebra_dim;
use crate::path::{check_compatible, l2_inner, refine, StepPath};
use crate::sampling::{sample_ball, stream_rng, MeasureSpec};

/// Largest sample size accepted by [`mk_exact`].
pub const EXACT_CAP: usize = 1024;

/// Uniformly weighted samples sharing one partition and one matrix size.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    samples: Vec<StepPath>,
    coords: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<StepPath>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyMeasure)?;
        for s in &samples[1..] {
            check_compatible(first, s)?;
        }
        let coords = samples.par_iter().map(StepPath::coords).collect();
        Ok(Self { samples, coords })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[StepPath] {
        &self.samples
    }

    /// Isometric coordinates of each sample.
    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    /// Partition count shared by the samples.
    pub fn n(&self) -> usize {
        self.samples[0].n()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    /// Every sample refined by `m`.
    pub fn refined(&self, m: usize) -> Result<Self> {
        Self::new(
            self.samples
                .iter()
                .map(|s| refine(s, m))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    fn check_against(&self, other: &Self) -> Result<()> {
        check_compatible(&self.samples[0], &other.samples[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportMethod {
    ExactAssignment,
    Entropic,
    WitnessLowerBound,
}

/// Output of one Monge-Kantorovich estimation. `value` lies in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub method: TransportMethod,
    pub value: f64,
    pub sample_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularization: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// L1 marginal violation of the Sinkhorn plan before rounding.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TransportReport {
    fn new(method: TransportMethod, value: f64, sample_size: usize) -> Self {
        Self {
            method,
            value: value.clamp(0.0, 1.0),
            sample_size,
            regularization: None,
            witness_count: None,
            iterations: None,
            marginal_violation: None,
            seed: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Truncated cost between coordinate vectors.
pub fn truncated_cost(a: &[f64], b: &[f64]) -> f64 {
    euclidean(a, b).min(1.0)
}

/// `cost[i][j] = min(|a_i - b_j|_2, 1)`.
pub fn cost_matrix(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<Vec<Vec<f64>>> {
    a.check_against(b)?;
    Ok(a.coords
        .par_iter()
        .map(|x| b.coords.iter().map(|y| truncated_cost(x, y)).collect())
        .collect())
}

fn check_sizes(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Exact W1 between equal-size empirical measures via optimal assignment.
pub fn mk_exact(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<TransportReport> {
    check_sizes(a, b)?;
    if a.len() > EXACT_CAP {
        return Err(Error::ExactSolverCap {
            n: a.len(),
            cap: EXACT_CAP,
        });
    }
    let cost = cost_matrix(a, b)?;
    let plan = assignment::solve(&cost);
    let total: f64 = plan.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(TransportReport::new(
        TransportMethod::ExactAssignment,
        total / a.len() as f64,
        a.len(),
    ))
}

/// Entropic transport cost `<P, C>` of the Sinkhorn plan at regularization `reg`.
pub fn mk_entropic(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    reg: f64,
    iters: usize,
) -> Result<TransportReport> {
    check_sizes(a, b)?;
    let cost = cost_matrix(a, b)?;
    let sol = sinkhorn::solve(&cost, reg, iters)?;
    let mut report = TransportReport::new(TransportMethod::Entropic, sol.cost, a.len());
    report.regularization = Some(reg);
    report.iterations = Some(sol.iterations);
    report.marginal_violation = Some(sol.raw_violation);
    Ok(report)
}

/// A bounded functional on `V_N`, evaluated on isometric coordinates.
/// Witnesses must be 1-Lipschitz for the truncated cost.
pub trait Witness: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, coords: &[f64]) -> f64;
}

/// `f -> min(|f - c|_2, 1)`.
#[derive(Clone, Debug)]
pub struct AnchorWitness {
    anchor: Vec<f64>,
}

impl AnchorWitness {
    pub fn new(anchor: &StepPath) -> Self {
        Self {
            anchor: anchor.coords(),
        }
    }
}

impl Witness for AnchorWitness {
    fn name(&self) -> String {
        format!(
            "anchor(|c|={:.4})",
            euclidean(&self.anchor, &vec![0.0; self.anchor.len()])
        )
    }

    fn eval(&self, coords: &[f64]) -> f64 {
        truncated_cost(coords, &self.anchor)
    }
}

/// `f -> clamp(|f|_2 - offset, 0, 1)`; sensitive to mass crossing the sphere of radius `offset`.
#[derive(Clone, Debug)]
pub struct RadialWitness {
    offset: f64,
}

impl RadialWitness {
    pub fn new(offset: f64) -> Self {
        Self { offset }
    }
}

impl Witness for RadialWitness {
    fn name(&self) -> String {
        format!("radial(offset={:.4})", self.offset)
    }

    fn eval(&self, coords: &[f64]) -> f64 {
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm - self.offset).clamp(0.0, 1.0)
    }
}

/// Number of random pairs used to validate each witness.
pub const WITNESS_CHECK_PAIRS: usize = 1000;

/// Dual lower bound `max_F |mean_A F - mean_B F|` on the truncated-cost W1.
///
/// Each witness is first checked for `|F| <= 1` and `|F(x) - F(y)| <= cost(x, y)`
/// on [`WITNESS_CHECK_PAIRS`] random pairs drawn from both sample sets.
pub fn witness_gap(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    witnesses: &[&dyn Witness],
    seed: u64,
) -> Result<TransportReport> {
    a.check_against(b)?;
    let pool: Vec<&[f64]> = a
        .coords
        .iter()
        .chain(&b.coords)
        .map(Vec::as_slice)
        .collect();
    let mut rng = stream_rng(seed, u64::MAX);
    let pairs: Vec<(usize, usize)> = (0..WITNESS_CHECK_PAIRS)
        .map(|_| (rng.gen_range(0..pool.len()), rng.gen_range(0..pool.len())))
        .collect();
    let mut best = 0.0f64;
    for w in witnesses {
        let mut excess = 0.0f64;
        for &(i, j) in &pairs {
            let (fx, fy) = (w.eval(pool[i]), w.eval(pool[j]));
            excess = excess
                .max(fx.abs() - 1.0)
                .max((fx - fy).abs() - truncated_cost(pool[i], pool[j]));
        }
        if excess > 1e-12 {
            return Err(Error::WitnessViolation {
                name: w.name(),
                excess,
            });
        }
        let mean =
            |m: &EmpiricalMeasure| m.coords.iter().map(|c| w.eval(c)).sum::<f64>() / m.len() as f64;
        best = best.max((mean(a) - mean(b)).abs());
    }
    let mut report = TransportReport::new(
        TransportMethod::WitnessLowerBound,
        best,
        a.len().max(b.len()),
    );
    report.witness_count = Some(witnesses.len());
    report.seed = Some(seed);
    Ok(report)
}

/// Angle in `[0, pi]` between `f` and `Ad_{rho_N^f} g`.
pub fn angle_statistic(f: &StepPath, g: &StepPath) -> Result<f64> {
    let h = rho_adjoint(f, g)?;
    let (nf, nh) = (f.l2_norm(), h.l2_norm());
    if nf == 0.0 || nh == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let cos = l2_inner(f, &h)? / (nf * nh);
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// `|phi(f)|_2` for `count` samples `f` of `spec`, with `phi(f) = f + Ad_{rho_N^f} g`.
pub fn phi_norms(spec: &MeasureSpec, g: &StepPath, count: usize) -> Result<Vec<f64>> {
    if g.n() != spec.n || g.dim() != spec.dim {
        return Err(Error::InvalidParameter(format!(
            "g must live in V_{} over so({}), got N={} d={}",
            spec.n,
            spec.dim,
            g.n(),
            g.dim()
        )));
    }
    let samples = sample_ball(spec, count)?;
    samples
        .par_iter()
        .map(|f| {
            let table = partial_products(f);
            Ok(star_phi_with(f, &table, g)?.l2_norm())
        })
        .collect()
}

/// Fraction of samples `f ~ nu_{N,R}` whose image `phi(f)` leaves the ball of radius `R`.
pub fn escape_fraction(spec: &MeasureSpec, g: &StepPath, count: usize) -> Result<f64> {
    let norms = phi_norms(spec, g, count)?;
    let escaped = norms.iter().filter(|&&r| r > spec.radius).count();
    Ok(escaped as f64 / count as f64)
}

/// Volume ratio `(1 + c * eps / R)^(algebra_dim(d) * N)` of concentric balls
/// of radii `R + c * eps` and `R` in `V_N`.
pub fn volume_ratio(n: usize, dim: usize, radius: f64, eps: f64, c: f64) -> Result<f64> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidRadius(radius));
    }
    if eps.is_nan() || c.is_nan() || eps < 0.0 || c < 0.0 {
        return Err(Error::InvalidParameter(
            "eps and C must be nonnegative".into(),
        ));
    }
    let exponent = (algebra_dim(dim) * n) as f64;
    Ok((exponent * (c * eps / radius).ln_1p()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::inverse;
    use crate::lie::AlgebraVector;
    use crate::path::truncated_distance;
    use crate::sampling::sample_one;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn measure(spec: &MeasureSpec, count: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(sample_ball(spec, count).unwrap()).unwrap()
    }

    fn brute_force(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
        let n = a.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |p| {
            let c: f64 = p
                .iter()
                .enumerate()
                .map(|(i, &j)| truncated_distance(&a.samples()[i], &b.samples()[j]).unwrap())
                .sum();
            best = best.min(c / n as f64);
        });
        best
    }

    fn permute(v: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            visit(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, visit);
            v.swap(k, i);
        }
    }

    #[test]
    fn mk_exact_examples() {
        let spec = MeasureSpec::new(2, 0.8, 3, 1).unwrap();
        let a = measure(&spec, 16);
        assert_eq!(mk_exact(&a, &a).unwrap().value, 0.0);

        let f = EmpiricalMeasure::new(vec![sample_one(&spec, 0)]).unwrap();
        let g = EmpiricalMeasure::new(vec![sample_one(&spec, 1)]).unwrap();
        let expect = truncated_distance(&f.samples()[0], &g.samples()[0]).unwrap();
        assert_eq!(mk_exact(&f, &g).unwrap().value, expect);

        for seed in 0..10 {
            let a = measure(&MeasureSpec::new(2, 0.6, 3, seed).unwrap(), 4);
            let b = measure(&MeasureSpec::new(2, 0.6, 3, seed + 100).unwrap(), 4);
            let exact = mk_exact(&a, &b).unwrap().value;
            assert!((exact - brute_force(&a, &b)).abs() <= 1e-12);
            assert!((exact - mk_exact(&b, &a).unwrap().value).abs() <= 1e-12);
        }
    }

    #[test]
    fn mk_exact_errors() {
        let spec = MeasureSpec::new(2, 1.0, 3, 1).unwrap();
        let a = measure(&spec, 4);
        let b = measure(&spec, 5);
        assert!(matches!(mk_exact(&a, &b), Err(Error::SizeMismatch { .. })));
        let big = EmpiricalMeasure::new(vec![sample_one(&spec, 0); 1025]).unwrap();
        assert!(matches!(
            mk_exact(&big, &big),
            Err(Error::ExactSolverCap { .. })
        ));
        let other = measure(&MeasureSpec::new(4, 1.0, 3, 1).unwrap(), 4);
        assert!(mk_exact(&a, &other).is_err());
    }

    #[test]
    fn mk_exact_is_a_metric_on_random_triples() {
        for seed in 0..5 {
            let m = |s| measure(&MeasureSpec::new(1, 0.7, 3, s).unwrap(), 24);
            let (a, b, c) = (m(seed), m(seed + 10), m(seed + 20));
            let ab = mk_exact(&a, &b).unwrap().value;
            let bc = mk_exact(&b, &c).unwrap().value;
            let ac = mk_exact(&a, &c).unwrap().value;
            assert!((ab - mk_exact(&b, &a).unwrap().value).abs() <= 1e-9);
            assert!(ac <= ab + bc + 1e-9);
        }
    }

    #[test]
    fn mk_entropic_examples() {
        let spec = MeasureSpec::new(1, 0.7, 3, 3).unwrap();
        let a = measure(&spec, 64);
        let self_cost = mk_entropic(&a, &a, 1e-3, 200_000).unwrap();
        assert!(self_cost.value <= 1e-3 * (64f64).ln() + 1e-6);
        assert_eq!(self_cost.regularization, Some(1e-3));

        let b = measure(&MeasureSpec::new(1, 0.7, 3, 4).unwrap(), 64);
        let exact = mk_exact(&a, &b).unwrap().value;
        let fine = mk_entropic(&a, &b, 1e-3, 200_000).unwrap().value;
        assert!((fine - exact).abs() <= 5e-3, "{fine} vs {exact}");
        let coarse = mk_entropic(&a, &b, 1e-2, 200_000).unwrap().value;
        assert!(coarse >= fine - 1e-6);
    }

    #[test]
    fn witness_gap_examples() {
        let spec = MeasureSpec::new(2, 0.8, 3, 5).unwrap();
        let a = measure(&spec, 64);
        let b = measure(&MeasureSpec { seed: 6, ..spec }, 64);
        let anchors: Vec<AnchorWitness> = (0..8)
            .map(|i| AnchorWitness::new(&sample_one(&MeasureSpec { seed: 77, ..spec }, i)))
            .collect();
        let refs: Vec<&dyn Witness> = anchors.iter().map(|w| w as &dyn Witness).collect();
        assert_eq!(witness_gap(&a, &a, &refs, 1).unwrap().value, 0.0);
        let gap = witness_gap(&a, &b, &refs, 1).unwrap();
        assert!(gap.value <= mk_exact(&a, &b).unwrap().value + 1e-9);
        assert_eq!(gap.witness_count, Some(8));

        // translation by a fixed v of norm 0.5, detected by an anchor along v
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dir: Vec<f64> = crate::sampling::uniform_ball_point(&mut rng, 6, 1.0);
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = StepPath::from_coords(
            3,
            2,
            &dir.iter().map(|x| 0.5 * x / norm).collect::<Vec<_>>(),
        )
        .unwrap();
        let shifted =
            EmpiricalMeasure::new(a.samples().iter().map(|f| f.add(&v).unwrap()).collect())
                .unwrap();
        let anchor = AnchorWitness::new(&v.scale(-1.0));
        let gap = witness_gap(&a, &shifted, &[&anchor], 2).unwrap();
        assert!(gap.value >= 0.1, "{}", gap.value);
    }

    struct Steep;
    impl Witness for Steep {
        fn name(&self) -> String {
            "steep".into()
        }
        fn eval(&self, coords: &[f64]) -> f64 {
            (3.0 * coords[0]).clamp(-1.0, 1.0)
        }
    }

    #[test]
    fn witness_check_rejects_non_lipschitz() {
        let spec = MeasureSpec::new(2, 0.8, 3, 5).unwrap();
        let a = measure(&spec, 32);
        assert!(matches!(
            witness_gap(&a, &a, &[&Steep], 0),
            Err(Error::WitnessViolation { .. })
        ));
    }

    #[test]
    fn angle_examples() {
        let e = |k: usize| {
            let mut c = vec![0.0; 1];
            c[0] = 1.0 + k as f64;
            AlgebraVector::from_coords(2, &c).unwrap()
        };
        let f = StepPath::new(vec![e(0), e(0).scale(-1.0)]).unwrap();
        let g = StepPath::new(vec![e(1), e(1)]).unwrap();
        assert_eq!(angle_statistic(&f, &g).unwrap(), FRAC_PI_2);

        let spec = MeasureSpec::new(1, 2.0, 3, 8).unwrap();
        let f1 = sample_one(&spec, 0);
        assert!(angle_statistic(&f1, &f1.scale(0.3)).unwrap() < 1e-7);

        let zero = StepPath::zero(3, 1).unwrap();
        assert_eq!(angle_statistic(&zero, &f1), Err(Error::ZeroNorm));
        assert_eq!(angle_statistic(&f1, &zero), Err(Error::ZeroNorm));

        let spec = MeasureSpec::new(8, 5.0, 3, 9).unwrap();
        for i in 0..50 {
            let f = sample_one(&spec, i);
            let g = sample_one(&MeasureSpec { seed: 10, ..spec }, i);
            let h = rho_adjoint(&f, &g).unwrap();
            let lhs = l2_inner(&f, &h).unwrap();
            let rhs = -l2_inner(&inverse(&f), &g).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10);
            let angle = angle_statistic(&f, &g).unwrap();
            assert!((0.0..=std::f64::consts::PI).contains(&angle));
        }
    }

    fn unit_g(dim: usize, n: usize) -> StepPath {
        let g = sample_one(&MeasureSpec::new(n, 1.0, dim, 4242).unwrap(), 0);
        g.scale(1.0 / g.l2_norm())
    }

    #[test]
    fn escape_fraction_examples() {
        let spec = MeasureSpec::new(16, 8.0, 3, 11).unwrap();
        assert_eq!(
            escape_fraction(&spec, &StepPath::zero(3, 16).unwrap(), 200).unwrap(),
            0.0
        );

        let g = unit_g(3, 16);
        for r in phi_norms(&spec, &g, 500).unwrap() {
            assert!(r <= spec.radius + g.l2_norm() + 1e-12);
        }

        let coarse = unit_g(3, 4);
        let small = MeasureSpec::new(16, 8.0, 3, 11).unwrap();
        let large = MeasureSpec::new(256, 64.0, 3, 11).unwrap();
        let f16 = escape_fraction(&small, &refine(&coarse, 4).unwrap(), 2000).unwrap();
        let f256 = escape_fraction(&large, &refine(&coarse, 64).unwrap(), 2000).unwrap();
        assert!(f256 < f16, "{f256} !< {f16}");
        assert!(escape_fraction(&spec, &unit_g(3, 8), 10).is_err());
    }

    #[test]
    fn volume_ratio_examples() {
        assert_eq!(volume_ratio(10, 3, 2.0, 0.0, 1.0).unwrap(), 1.0);
        assert!((volume_ratio(1, 2, 1.0, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let eps = |n: f64| n.powf(-3.0 / 8.0);
        let r = |n: f64| n.powf(0.75);
        let v256 = volume_ratio(256, 3, r(256.0), eps(256.0), 1.0).unwrap();
        let v4096 = volume_ratio(4096, 3, r(4096.0), eps(4096.0), 1.0).unwrap();
        assert!(v4096 < v256 && v4096 >= 1.0);
        assert!(volume_ratio(1, 3, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn report_json_shape() {
        let r = TransportReport::new(TransportMethod::ExactAssignment, 0.25, 8);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["method"], "exact-assignment");
        assert_eq!(v["value"], 0.25);
        assert!(v.get("regularization").is_none());
    }
}
