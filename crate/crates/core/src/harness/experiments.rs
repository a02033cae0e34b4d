//! Invariance, concentration and Jacobian experiments. Every experiment is a
//! pure function of its config: per-`N` seeds are derived from the config
//! seed, and parallel work is collected in index order.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::jacobian::{jacobian_reports, JacobianReport, JACOBIAN_STEP};
use super::report::{col, num, Provenance, Table};
use crate::error::Result;
use crate::group::{inverse, rho_adjoint, star_discretized};
use crate::path::{l2_inner, refine, sup_norm};
use crate::sampling::{radius_for, sample_ball, stream_seed, MeasureSpec};
use crate::transport::{
    angle_statistic, escape_fraction, mk_exact, volume_ratio, witness_gap, AnchorWitness,
    EmpiricalMeasure, RadialWitness, Witness,
};

/// Seed used for partition count `n` under the config seed.
pub fn seed_for(cfg: &ExperimentConfig, n: usize) -> u64 {
    stream_seed(cfg.seed, n as u64)
}

fn radius(cfg: &ExperimentConfig, n: usize) -> Result<f64> {
    radius_for(&cfg.schedule, n)
}

/// Geometric mean of `R_N / N` and `N^{-1/2}`, a sequence that is
/// `o(R_N / N)` and `omega(N^{-1/2})` whenever the radius exponent lies in `(1/2, 1)`.
pub fn eps_schedule(cfg: &ExperimentConfig, n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok((radius(cfg, n)? / nf * nf.powf(-0.5)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceRow {
    pub n: usize,
    pub radius: f64,
    pub seed: u64,
    pub samples: usize,
    /// Exact truncated-cost W1 between samples and their pushforwards.
    pub mk_exact: f64,
    /// Exact W1 between two independent sample sets of the same measure.
    pub mk_baseline: f64,
    pub witness_gap: f64,
    /// `2 |g|_inf R_N / N`.
    pub correction_bound: f64,
    pub escape_fraction: f64,
    /// Worst-case L2 error of the midpoint projection, `|g|_inf R_N / (sqrt(3) M N)`.
    pub projection_bound: f64,
    pub eps: f64,
    pub volume_ratio: f64,
}

/// Right-invariance experiment: for each `N`, samples `f ~ nu_{N,R_N}` are
/// compared with `star_discretized(f, g, M)` (both on `V_{MN}`).
pub fn run_invariance(cfg: &ExperimentConfig) -> Result<Vec<InvarianceRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let r = radius(cfg, n)?;
        let seed = seed_for(cfg, n);
        let g = cfg.g_on(n)?;
        let gsup = sup_norm(&g);
        let m = cfg.refine;

        let spec = MeasureSpec::new(n, r, cfg.dim, seed)?;
        let samples = sample_ball(&spec, cfg.samples)?;
        let pushed = samples
            .par_iter()
            .map(|f| star_discretized(f, &g, m))
            .collect::<Result<Vec<_>>>()?;
        let a = EmpiricalMeasure::new(samples)?.refined(m)?;
        let b = EmpiricalMeasure::new(pushed)?;
        let mk = mk_exact(&a, &b)?.value;

        let other = MeasureSpec::new(n, r, cfg.dim, stream_seed(seed, 1))?;
        let baseline_b = EmpiricalMeasure::new(sample_ball(&other, cfg.samples)?)?.refined(m)?;
        let baseline = mk_exact(&a, &baseline_b)?.value;

        let radial: Vec<RadialWitness> = [-1.0, -0.75, -0.5, -0.25, 0.0]
            .iter()
            .map(|d| RadialWitness::new(r + d))
            .collect();
        let g_fine = refine(&g, m)?;
        let g_norm = g_fine.l2_norm();
        let anchor = (g_norm > 0.0).then(|| AnchorWitness::new(&g_fine.scale(r / g_norm)));
        let mut witnesses: Vec<&dyn Witness> = radial.iter().map(|w| w as &dyn Witness).collect();
        if let Some(w) = &anchor {
            witnesses.push(w);
        }
        let gap = witness_gap(&a, &b, &witnesses, stream_seed(seed, 2))?.value;

        let escape = escape_fraction(&spec, &g, cfg.samples)?;
        let eps = eps_schedule(cfg, n)?;
        rows.push(InvarianceRow {
            n,
            radius: r,
            seed,
            samples: cfg.samples,
            mk_exact: mk,
            mk_baseline: baseline,
            witness_gap: gap,
            correction_bound: 2.0 * gsup * r / n as f64,
            escape_fraction: escape,
            projection_bound: gsup * r / (3f64.sqrt() * (m * n) as f64),
            eps,
            volume_ratio: volume_ratio(n, cfg.dim, r, eps, 1.0)?,
        });
    }
    Ok(rows)
}

pub fn invariance_table(rows: &[InvarianceRow], provenance: Provenance) -> Table {
    let mut t = Table::new(
        "invariance",
        provenance,
        vec![
            col("N", "count"),
            col("R_N", "L2 norm"),
            col("seed", "u64"),
            col("samples", "count"),
            col("mk_exact", "truncated W1"),
            col("mk_baseline", "truncated W1"),
            col("witness_gap", "truncated W1 lower bound"),
            col("correction_bound", "L2 norm"),
            col("escape_fraction", "fraction"),
            col("projection_bound", "L2 norm"),
            col("eps_N", "L2 norm"),
            col("volume_ratio", "ratio"),
        ],
    );
    for r in rows {
        t.push(vec![
            json!(r.n),
            num(r.radius),
            json!(r.seed),
            json!(r.samples),
            num(r.mk_exact),
            num(r.mk_baseline),
            num(r.witness_gap),
            num(r.correction_bound),
            num(r.escape_fraction),
            num(r.projection_bound),
            num(r.eps),
            num(r.volume_ratio),
        ]);
    }
    t
}

/// Tail thresholds for `|angle - pi/2|`.
pub const TAIL_EPS: [f64; 3] = [0.1, 0.15, 0.2];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub radius: f64,
    pub seed: u64,
    pub samples: usize,
    /// Fractions with `|angle - pi/2| > eps` for each of [`TAIL_EPS`].
    pub tails: [f64; 3],
    pub median_angle: f64,
    /// `max |<f, Ad_rho g> + <inverse(f), g>|` over samples.
    pub identity_max_dev: f64,
    /// Rate `c` of a least-squares fit `tail(0.15) ~ exp(-c N)` across all
    /// rows; `None` when fewer than two tails are positive.
    pub decay_rate: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn fit_decay_rate(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Angle concentration: for each `N`, the angle between `f` and
/// `Ad_{rho_N^f} g` over samples of `nu_{N,R_N}`.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<Vec<ConcentrationRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let r = radius(cfg, n)?;
        let seed = seed_for(cfg, n);
        let g = cfg.g_on(n)?;
        let samples = sample_ball(&MeasureSpec::new(n, r, cfg.dim, seed)?, cfg.samples)?;
        let per_sample: Vec<(f64, f64)> = samples
            .par_iter()
            .map(|f| {
                let angle = angle_statistic(f, &g)?;
                let h = rho_adjoint(f, &g)?;
                let dev = (l2_inner(f, &h)? + l2_inner(&inverse(f), &g)?).abs();
                Ok((angle, dev))
            })
            .collect::<Result<_>>()?;
        let count = per_sample.len() as f64;
        let tails = TAIL_EPS.map(|eps| {
            per_sample
                .iter()
                .filter(|(a, _)| (a - FRAC_PI_2).abs() > eps)
                .count() as f64
                / count
        });
        rows.push(ConcentrationRow {
            n,
            radius: r,
            seed,
            samples: cfg.samples,
            tails,
            median_angle: median(per_sample.iter().map(|p| p.0).collect()),
            identity_max_dev: per_sample.iter().map(|p| p.1).fold(0.0, f64::max),
            decay_rate: None,
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.tails[1])).collect();
    let rate = fit_decay_rate(&points);
    rows.iter_mut().for_each(|r| r.decay_rate = rate);
    Ok(rows)
}

pub fn concentration_table(rows: &[ConcentrationRow], provenance: Provenance) -> Table {
    let mut t = Table::new(
        "concentration",
        provenance,
        vec![
            col("N", "count"),
            col("R_N", "L2 norm"),
            col("seed", "u64"),
            col("samples", "count"),
            col("tail_0.1", "fraction"),
            col("tail_0.15", "fraction"),
            col("tail_0.2", "fraction"),
            col("median_angle", "rad"),
            col("identity_max_dev", "1"),
            col("decay_rate", "1/N"),
        ],
    );
    for r in rows {
        t.push(vec![
            json!(r.n),
            num(r.radius),
            json!(r.seed),
            json!(r.samples),
            num(r.tails[0]),
            num(r.tails[1]),
            num(r.tails[2]),
            num(r.median_angle),
            num(r.identity_max_dev),
            r.decay_rate.map_or(serde_json::Value::Null, num),
        ]);
    }
    t
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobianRow {
    pub n: usize,
    pub seed: u64,
    pub point: usize,
    pub report: JacobianReport,
}

/// Jacobian determinants of the inverse map and of `phi` at `samples` base
/// points of the ball of radius `radius` (or `R_N`) in each `V_N`.
pub fn run_jacobian(cfg: &ExperimentConfig) -> Result<Vec<JacobianRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let r = match cfg.radius {
            Some(r) => r,
            None => radius(cfg, n)?,
        };
        let seed = seed_for(cfg, n);
        let points = sample_ball(&MeasureSpec::new(n, r, cfg.dim, seed)?, cfg.samples)?;
        let g = cfg.g_on(n)?;
        let reports = jacobian_reports(&points, &g, JACOBIAN_STEP)?;
        rows.extend(
            reports
                .into_iter()
                .enumerate()
                .map(|(i, report)| JacobianRow {
                    n,
                    seed,
                    point: i / 2,
                    report,
                }),
        );
    }
    Ok(rows)
}

pub fn jacobian_table(rows: &[JacobianRow], provenance: Provenance) -> Table {
    let mut t = Table::new(
        "jacobian",
        provenance,
        vec![
            col("N", "count"),
            col("seed", "u64"),
            col("point", "index"),
            col("map", "name"),
            col("h", "L2 norm"),
            col("det", "1"),
            col("deviation", "1"),
            col("base_point", "isometric coordinates"),
        ],
    );
    for r in rows {
        t.push(vec![
            json!(r.n),
            json!(r.seed),
            json!(r.point),
            json!(r.report.map.as_str()),
            num(r.report.h),
            num(r.report.det),
            num(r.report.deviation),
            json!(r.report.base_point),
        ]);
    }
    t
}
