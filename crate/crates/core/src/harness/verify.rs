//! Property checks of the path group, each reporting the largest deviation
//! observed against its threshold.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::jacobian::{jacobian_reports, JACOBIAN_STEP};
use super::report::{col, num, Provenance, Table};
use crate::error::Result;
use crate::group::{
    correction_norm, inverse, log_derivative_numeric, partial_products, product_integral,
    star_discretized, star_pointwise, PathElement, PreparedPath, StarResultEvaluator,
};
use crate::lie::{adjoint_unchecked, algebra_dim, exp_matrix, uniform_norm, AlgebraVector};
use crate::path::{sup_norm, StepPath};
use crate::sampling::{
    radial_ks_statistic, sample_ball, stream_rng, stream_seed, uniform_ball_point, MeasureSpec,
};

/// Fault injection for exercising the checks themselves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyHooks {
    /// The Lipschitz check evaluates `exp(s X)` instead of `exp(X)`.
    pub exp_argument_scale: f64,
}

impl Default for VerifyHooks {
    fn default() -> Self {
        Self {
            exp_argument_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_deviation: f64,
    pub threshold: f64,
    pub trials: usize,
}

impl CheckResult {
    fn at_most(name: &'static str, max_deviation: f64, threshold: f64, trials: usize) -> Self {
        Self {
            name,
            passed: max_deviation <= threshold,
            max_deviation,
            threshold,
            trials,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_table(&self, provenance: Provenance, seed: u64) -> Table {
        let mut t = Table::new(
            "verify",
            provenance,
            vec![
                col("check", "name"),
                col("passed", "bool"),
                col("max_deviation", "1"),
                col("threshold", "1"),
                col("trials", "count"),
                col("seed", "u64"),
            ],
        );
        for c in &self.checks {
            t.push(vec![
                json!(c.name),
                json!(c.passed),
                num(c.max_deviation),
                num(c.threshold),
                json!(c.trials),
                json!(seed),
            ]);
        }
        t
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

fn grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|k| k as f64 / 100.0)
}

fn paths(
    cfg: &ExperimentConfig,
    n: usize,
    radius: f64,
    stream: u64,
    count: usize,
) -> Result<Vec<StepPath>> {
    let spec = MeasureSpec::new(n, radius, cfg.dim, stream_seed(cfg.seed, stream))?;
    sample_ball(&spec, count)
}

/// `|exp(sX) - exp(sY)|_u <= |X - Y|_u`. Half the pairs are independent
/// points of the radius-5 ball; the rest are close pairs, including
/// commuting ones, where the Lipschitz constant 1 is attained.
fn check_lipschitz(cfg: &ExperimentConfig, hooks: VerifyHooks) -> CheckResult {
    let k = algebra_dim(cfg.dim);
    let pairs = 100 * cfg.samples;
    let s = hooks.exp_argument_scale;
    let dev = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(stream_seed(cfg.seed, 1), i);
            let xc = uniform_ball_point(&mut rng, k, 5.0);
            let x = AlgebraVector::from_coords(cfg.dim, &xc).expect("coordinate count");
            let y = match i % 4 {
                0 | 1 => AlgebraVector::from_coords(cfg.dim, &uniform_ball_point(&mut rng, k, 5.0)),
                2 => AlgebraVector::from_coords(cfg.dim, &uniform_ball_point(&mut rng, k, 1e-3))
                    .map(|d| x.add(&d).expect("same dimension")),
                _ => Ok(x.scale(1.0 + rng.gen_range(-1e-3..1e-3))),
            }
            .expect("coordinate count");
            let lhs = uniform_norm(
                &(exp_matrix(&x.scale(s)).matrix() - exp_matrix(&y.scale(s)).matrix()),
            );
            let rhs = uniform_norm(&(x.matrix() - y.matrix()));
            lhs - rhs
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    CheckResult::at_most("exp_lipschitz", dev.max(0.0), 1e-12, pairs)
}

/// `Ad_{(Pi exp f(t))^-1} f(t) = Ad_{(rho_N^f(t))^-1} f(t)` on a grid.
fn check_frozen_adjoint(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<CheckResult> {
    let fs = paths(cfg, n, radius, 2, cfg.samples)?;
    let devs: Vec<f64> = fs
        .par_iter()
        .map(|f| {
            let table = partial_products(f);
            let mut worst = 0.0f64;
            for t in grid() {
                let v = f.value_at(t)?;
                let exact = adjoint_unchecked(&product_integral(f, t)?.inverse(), v);
                let frozen = adjoint_unchecked(&table.rho_at(t)?.inverse(), v);
                worst = worst.max((exact.matrix() - frozen.matrix()).norm());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(CheckResult::at_most(
        "frozen_adjoint_identity",
        max_of(devs),
        1e-10,
        fs.len(),
    ))
}

/// Associativity, two-sided identity and inverse, pointwise on a grid.
fn check_group_axioms(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<Vec<CheckResult>> {
    let count = cfg.samples;
    let fs = paths(cfg, n, radius, 3, count)?;
    let gs = paths(cfg, n, radius, 4, count)?;
    let hs = paths(cfg, n, radius, 5, count)?;
    let zero = PreparedPath::new(StepPath::zero(cfg.dim, n)?);
    let devs: Vec<[f64; 3]> = (0..count)
        .into_par_iter()
        .map(|i| {
            let f = PreparedPath::new(fs[i].clone());
            let g = PreparedPath::new(gs[i].clone());
            let h = PreparedPath::new(hs[i].clone());
            let finv = PreparedPath::new(inverse(&fs[i]));
            let left = StarResultEvaluator::new(StarResultEvaluator::new(&f, &g)?, &h)?;
            let right = StarResultEvaluator::new(&f, StarResultEvaluator::new(&g, &h)?)?;
            let f_zero = StarResultEvaluator::new(&f, &zero)?;
            let zero_g = StarResultEvaluator::new(&zero, &g)?;
            let f_finv = StarResultEvaluator::new(&f, &finv)?;
            let mut worst = [0.0f64; 3];
            for t in grid() {
                let assoc = left.value(t)?.sub(&right.value(t)?)?.hs_norm();
                let ident = f_zero
                    .value(t)?
                    .sub(&f.value(t)?)?
                    .hs_norm()
                    .max(zero_g.value(t)?.sub(&g.value(t)?)?.hs_norm());
                let inv = f_finv.value(t)?.hs_norm();
                worst[0] = worst[0].max(assoc);
                worst[1] = worst[1].max(ident);
                worst[2] = worst[2].max(inv);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        CheckResult::at_most(
            "associativity",
            max_of(devs.iter().map(|d| d[0])),
            1e-9,
            count,
        ),
        CheckResult::at_most("identity", max_of(devs.iter().map(|d| d[1])), 0.0, count),
        CheckResult::at_most("inverse", max_of(devs.iter().map(|d| d[2])), 1e-9, count),
    ])
}

fn check_norm_preservation(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<CheckResult> {
    let fs = paths(cfg, n, radius, 6, 10 * cfg.samples)?;
    let dev = max_of(
        fs.par_iter()
            .map(|f| (inverse(f).l2_norm() - f.l2_norm()).abs())
            .collect::<Vec<_>>(),
    );
    Ok(CheckResult::at_most(
        "inverse_norm_preservation",
        dev,
        1e-12,
        fs.len(),
    ))
}

/// The right log-derivative of `t -> Pi exp f(t) Pi exp g(t)` is `(f * g)(t)`.
fn check_cocycle(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<CheckResult> {
    let count = cfg.samples.min(20);
    let fs = paths(cfg, n, radius, 7, count)?;
    let gs = paths(cfg, n, radius, 8, count)?;
    let devs: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| {
            let f = PreparedPath::new(fs[i].clone());
            let g = PreparedPath::new(gs[i].clone());
            let product = |t: f64| f.product_integral_at(t)?.mul(&g.product_integral_at(t)?);
            let mut worst = 0.0f64;
            for k in 0..n {
                let t = (k as f64 + 0.37) / n as f64;
                let est = log_derivative_numeric(product, t, 1e-5)?;
                let exact = star_pointwise(f.path(), g.path(), t)?;
                worst = worst.max(est.sub(&exact)?.hs_norm());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(CheckResult::at_most(
        "cocycle_log_derivative",
        max_of(devs),
        1e-5,
        count,
    ))
}

/// `Pi exp(star_discretized(f, g, M))(1) -> Pi exp f(1) Pi exp g(1)`: the
/// error at `M = 512` is below `1e-3` and shrinks at every doubling from 64.
fn check_homomorphism(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<Vec<CheckResult>> {
    let count = cfg.samples.min(20);
    let fs = paths(cfg, n, radius, 9, count)?;
    let gs = paths(cfg, n, radius, 10, count)?;
    let errs: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let target = product_integral(&fs[i], 1.0)?.mul(&product_integral(&gs[i], 1.0)?)?;
            [64, 128, 256, 512]
                .iter()
                .map(|&m| {
                    let p = product_integral(&star_discretized(&fs[i], &gs[i], m)?, 1.0)?;
                    Ok((p.matrix() - target.matrix()).norm())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let at_512 = max_of(errs.iter().map(|e| e[3]));
    // worst ratio err(2M) / err(M); below 1 means decreasing
    let ratio = max_of(
        errs.iter()
            .flat_map(|e| e.windows(2).map(|w| w[1] / w[0]).collect::<Vec<_>>()),
    );
    Ok(vec![
        CheckResult::at_most("homomorphism_m512", at_512, 1e-3, count),
        CheckResult {
            name: "homomorphism_decreasing",
            passed: ratio < 1.0,
            max_deviation: ratio,
            threshold: 1.0,
            trials: count,
        },
    ])
}

/// `correction_norm(f, g) <= 2 |g|_inf |f|_2 / N`; deviation is the largest excess.
fn check_correction_bound(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<CheckResult> {
    let g = cfg.g_on(n)?;
    let gsup = sup_norm(&g);
    let fs = paths(cfg, n, radius, 11, cfg.samples)?;
    let excess: Vec<f64> = fs
        .par_iter()
        .map(|f| Ok(correction_norm(f, &g, cfg.quad_points)? - 2.0 * gsup * f.l2_norm() / n as f64))
        .collect::<Result<_>>()?;
    Ok(CheckResult::at_most(
        "correction_bound",
        max_of(excess.into_iter().map(|e| e.max(0.0))),
        1e-8,
        fs.len(),
    ))
}

fn check_jacobians(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<Vec<CheckResult>> {
    let count = cfg.samples.min(5);
    let points = paths(cfg, n, radius, 12, count)?;
    let g = cfg.g_on(n)?;
    let reports = jacobian_reports(&points, &g, JACOBIAN_STEP)?;
    let dev = |name| {
        max_of(
            reports
                .iter()
                .filter(|r| r.map.as_str() == name)
                .map(|r| r.deviation),
        )
    };
    Ok(vec![
        CheckResult::at_most("jacobian_inverse", dev("inverse"), 1e-4, count),
        CheckResult::at_most("jacobian_phi", dev("phi"), 1e-4, count),
    ])
}

fn check_sampler(cfg: &ExperimentConfig, n: usize, radius: f64) -> Result<CheckResult> {
    let spec = MeasureSpec::new(n, radius, cfg.dim, stream_seed(cfg.seed, 13))?;
    let samples = sample_ball(&spec, 10_000)?;
    Ok(CheckResult::at_most(
        "sampler_radial_ks",
        radial_ks_statistic(&samples, radius),
        0.02,
        samples.len(),
    ))
}

/// Runs every check at the first `N` of the config, on samples of the ball of
/// `radius` (or `R_N` from the schedule when unset).
pub fn run_verify(cfg: &ExperimentConfig, hooks: VerifyHooks) -> Result<VerifyReport> {
    cfg.validate()?;
    let n = cfg.n_list[0];
    let radius = match cfg.radius {
        Some(r) => r,
        None => crate::sampling::radius_for(&cfg.schedule, n)?,
    };
    let mut checks = vec![
        check_lipschitz(cfg, hooks),
        check_frozen_adjoint(cfg, n, radius)?,
    ];
    checks.extend(check_group_axioms(cfg, n, radius)?);
    checks.push(check_norm_preservation(cfg, n, radius)?);
    checks.push(check_cocycle(cfg, n, radius)?);
    checks.extend(check_homomorphism(cfg, n, radius)?);
    checks.push(check_correction_bound(cfg, n, radius)?);
    checks.extend(check_jacobians(cfg, n, radius)?);
    checks.push(check_sampler(cfg, n, radius)?);
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentKind;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Verify);
        cfg.samples = 10;
        cfg
    }

    #[test]
    fn default_checks_pass() {
        let report = run_verify(&small(), VerifyHooks::default()).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(report.passed());
        assert_eq!(report.check("identity").unwrap().max_deviation, 0.0);
    }

    #[test]
    fn scaled_exp_breaks_lipschitz() {
        let hooks = VerifyHooks {
            exp_argument_scale: 1.01,
        };
        let c = check_lipschitz(&small(), hooks);
        assert!(!c.passed);
        assert!(c.max_deviation > 1e-6);
    }
}
