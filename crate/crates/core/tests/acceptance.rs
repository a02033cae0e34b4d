//! Acceptance suite: ten quantitative properties of the path group, each
//! printed as one PASS/FAIL line. Exits nonzero if any fails.

use std::f64::consts::FRAC_PI_2;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use pathgroup::group::{
    correction_norm, inverse, partial_products, product_integral, rho_adjoint, star_discretized,
    star_phi, star_pointwise, PathElement, PreparedPath, StarResultEvaluator,
};
use pathgroup::harness::{
    numerical_jacobian_det, run_concentration, run_invariance, ExperimentConfig, ExperimentKind,
};
use pathgroup::lie::{algebra_dim, exp_matrix, AlgebraVector};
use pathgroup::path::{l2_inner, sup_norm, StepPath};
use pathgroup::sampling::{
    radius_for, sample_ball, stream_rng, uniform_ball_point, MeasureSpec, RadiusSchedule,
};

type Criterion = (&'static str, fn() -> Outcome, u64);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ball(n: usize, radius: f64, seed: u64, count: usize) -> Vec<StepPath> {
    sample_ball(&MeasureSpec::new(n, radius, 3, seed).unwrap(), count).unwrap()
}

fn grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|k| k as f64 / 100.0)
}

// Oracles independent of the library's exponential and products.

fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// `exp(f_{N-1}/N) ... exp(f_0/N)` with nalgebra's matrix exponential.
fn oracle_endpoint(f: &StepPath) -> DMatrix<f64> {
    let n = f.n() as f64;
    f.values()
        .iter()
        .fold(DMatrix::identity(f.dim(), f.dim()), |acc, v| {
            (v.matrix() / n).exp() * acc
        })
}

/// Product integral at `t`, and the frozen partial product `rho_N^f(t)`.
fn oracle_products(f: &StepPath, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = f.n();
    let j = ((t * n as f64).floor() as usize).min(n - 1);
    let rho = f.values()[..j]
        .iter()
        .fold(DMatrix::identity(f.dim(), f.dim()), |acc, v| {
            (v.matrix() / n as f64).exp() * acc
        });
    let head = (f.values()[j].matrix() * (t - j as f64 / n as f64)).exp();
    (head * &rho, rho)
}

fn ad_inv(u: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    u.transpose() * x * u
}

fn criterion_1() -> Outcome {
    let fs = ball(8, 5.0, 101, 100);
    let gs = ball(8, 5.0, 102, 100);
    let hs = ball(8, 5.0, 103, 100);
    let zero = StepPath::zero(3, 8).unwrap();
    let (mut assoc, mut inv) = (0.0f64, 0.0f64);
    let mut identity_exact = true;
    for ((f, g), h) in fs.iter().zip(&gs).zip(&hs) {
        let (pf, pg, ph) = (
            PreparedPath::new(f.clone()),
            PreparedPath::new(g.clone()),
            PreparedPath::new(h.clone()),
        );
        let left =
            StarResultEvaluator::new(StarResultEvaluator::new(&pf, &pg).unwrap(), &ph).unwrap();
        let right =
            StarResultEvaluator::new(&pf, StarResultEvaluator::new(&pg, &ph).unwrap()).unwrap();
        let finv = inverse(f);
        for t in grid() {
            let d = left.value(t).unwrap().matrix() - right.value(t).unwrap().matrix();
            assoc = assoc.max(d.norm());
            identity_exact &= star_pointwise(f, &zero, t).unwrap() == *f.value_at(t).unwrap();
            identity_exact &= star_pointwise(&zero, g, t).unwrap() == *g.value_at(t).unwrap();
            inv = inv.max(star_pointwise(f, &finv, t).unwrap().hs_norm());
        }
    }
    outcome(
        assoc <= 1e-9 && identity_exact && inv <= 1e-9,
        format!(
            "assoc {assoc:.2e} <= 1e-9, identity exact {identity_exact}, f*f^-1 {inv:.2e} <= 1e-9"
        ),
    )
}

fn criterion_2() -> Outcome {
    let fs = ball(8, 5.0, 201, 20);
    let gs = ball(8, 5.0, 202, 20);
    let (mut worst512, mut worst_ratio) = (0.0f64, 0.0f64);
    for (f, g) in fs.iter().zip(&gs) {
        let target = oracle_endpoint(f) * oracle_endpoint(g);
        let err = |m| (oracle_endpoint(&star_discretized(f, g, m).unwrap()) - &target).norm();
        let (e256, e512) = (err(256), err(512));
        worst512 = worst512.max(e512);
        worst_ratio = worst_ratio.max(e512 / e256);
    }
    outcome(
        worst512 <= 1e-3 && worst_ratio < 1.0,
        format!(
            "max err(M=512) {worst512:.2e} <= 1e-3, max err(512)/err(256) {worst_ratio:.3} < 1"
        ),
    )
}

fn criterion_3() -> Outcome {
    let fs = ball(8, 5.0, 301, 1000);
    let (mut dev, mut oracle_gap) = (0.0f64, 0.0f64);
    for f in &fs {
        let table = partial_products(f);
        for t in grid() {
            let v = f.value_at(t).unwrap().matrix();
            let pi = product_integral(f, t).unwrap();
            let rho = table.rho_at(t).unwrap();
            dev = dev.max((ad_inv(pi.matrix(), v) - ad_inv(rho.matrix(), v)).norm());
            let (opi, orho) = oracle_products(f, t);
            oracle_gap = oracle_gap
                .max((pi.matrix() - opi).norm())
                .max((rho.matrix() - orho).norm());
        }
    }
    outcome(
        dev <= 1e-10 && oracle_gap <= 1e-10,
        format!(
            "max deviation {dev:.2e} <= 1e-10 (products agree with oracle to {oracle_gap:.2e})"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = stream_rng(401, 0);
    let k = algebra_dim(3);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let x = AlgebraVector::from_coords(3, &uniform_ball_point(&mut rng, k, 5.0)).unwrap();
        let y = AlgebraVector::from_coords(3, &uniform_ball_point(&mut rng, k, 5.0)).unwrap();
        let lhs = largest_singular_value(&(exp_matrix(&x).matrix() - exp_matrix(&y).matrix()));
        let rhs = largest_singular_value(&(x.matrix() - y.matrix()));
        worst = worst.max(lhs - rhs);
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 10^4 pairs, max |expX-expY|_u - |X-Y|_u = {worst:.3e}"),
    )
}

fn criterion_5() -> Outcome {
    let cfg = ExperimentConfig::default_for(ExperimentKind::Invariance);
    let schedule = RadiusSchedule::new(0.75, 1.0).unwrap();
    let mut violations = 0;
    let mut details = Vec::new();
    for n in [8, 32, 128] {
        let g = cfg.g_on(n).unwrap();
        assert!((sup_norm(&g) - 1.0).abs() < 1e-12);
        let r = radius_for(&schedule, n).unwrap();
        let mut worst_ratio = 0.0f64;
        for f in ball(n, r, 500 + n as u64, 200) {
            let bound = 2.0 * f.l2_norm() / n as f64;
            let c = correction_norm(&f, &g, 32).unwrap();
            worst_ratio = worst_ratio.max(c / bound);
            if c > bound + 1e-8 {
                violations += 1;
            }
        }
        details.push(format!("N={n}: max ratio {worst_ratio:.3}"));
    }
    outcome(
        violations == 0,
        format!("{violations} violations; {}", details.join(", ")),
    )
}

fn criterion_6() -> Outcome {
    let points = ball(4, 5.0, 601, 20);
    let g = ball(4, 1.0, 602, 1).remove(0);
    let (mut inv_dev, mut phi_dev) = (0.0f64, 0.0f64);
    for p in &points {
        assert_eq!(p.coord_len(), 12);
        let det_inv = numerical_jacobian_det(|f| Ok(inverse(f)), p, 1e-5).unwrap();
        let det_phi = numerical_jacobian_det(|f| star_phi(f, &g), p, 1e-5).unwrap();
        inv_dev = inv_dev.max((det_inv.abs() - 1.0).abs());
        phi_dev = phi_dev.max((det_phi - 1.0).abs());
    }
    outcome(
        inv_dev <= 1e-4 && phi_dev <= 1e-4,
        format!("max ||det inverse| - 1| {inv_dev:.2e}, max |det phi - 1| {phi_dev:.2e} (<= 1e-4)"),
    )
}

fn criterion_7() -> Outcome {
    let dev = ball(8, 5.0, 701, 1000)
        .iter()
        .map(|f| (inverse(f).l2_norm() - f.l2_norm()).abs())
        .fold(0.0, f64::max);
    outcome(
        dev <= 1e-12,
        format!("max | |f^-1|_2 - |f|_2 | = {dev:.2e} <= 1e-12"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig::default_for(ExperimentKind::Concentration);
    assert_eq!(cfg.n_list, vec![16, 64, 256]);
    assert_eq!(cfg.samples, 2000);
    let rows = run_concentration(&cfg).unwrap();
    let tails: Vec<f64> = rows.iter().map(|r| r.tails[1]).collect();
    let decreasing = tails.windows(2).all(|w| w[1] < w[0]);
    let identity = rows.iter().map(|r| r.identity_max_dev).fold(0.0, f64::max);

    // recompute the identity and one tail independently of the experiment driver
    let n = 64;
    let g = cfg.g_on(n).unwrap();
    let spec = MeasureSpec::new(n, radius_for(&cfg.schedule, n).unwrap(), 3, rows[1].seed).unwrap();
    let samples = sample_ball(&spec, cfg.samples).unwrap();
    let mut tail = 0usize;
    let mut identity_direct = 0.0f64;
    for f in &samples {
        let h = rho_adjoint(f, &g).unwrap();
        let ip = l2_inner(f, &h).unwrap();
        identity_direct = identity_direct.max((ip + l2_inner(&inverse(f), &g).unwrap()).abs());
        let angle = (ip / (f.l2_norm() * h.l2_norm())).clamp(-1.0, 1.0).acos();
        tail += usize::from((angle - FRAC_PI_2).abs() > 0.15);
    }
    let consistent = (tail as f64 / samples.len() as f64 - tails[1]).abs() < 1e-12;
    outcome(
        decreasing && identity <= 1e-10 && identity_direct <= 1e-10 && consistent,
        format!(
            "tail(0.15) at N=16,64,256: {tails:?} strictly decreasing {decreasing}; identity max {:.2e} <= 1e-10",
            identity.max(identity_direct)
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = ExperimentConfig::default_for(ExperimentKind::Invariance);
    assert_eq!(cfg.n_list, vec![8, 32, 128]);
    assert_eq!(cfg.samples, 256);
    assert_eq!(cfg.schedule.exponent(), 0.75);
    let g = cfg.coarse_g().unwrap();
    assert!((g.l2_norm() - 1.0).abs() < 1e-12);
    let rows = run_invariance(&cfg).unwrap();
    let mk: Vec<f64> = rows.iter().map(|r| r.mk_exact).collect();
    let gap: Vec<f64> = rows.iter().map(|r| r.witness_gap).collect();
    let mk_decreasing = mk.windows(2).all(|w| w[1] < w[0]);
    let gap_decreasing = gap.windows(2).all(|w| w[1] < w[0]);
    let bound_ok = rows
        .iter()
        .all(|r| (r.correction_bound - 2.0 * r.radius / r.n as f64).abs() < 1e-12);

    let mut probe = cfg.clone();
    probe.n_list = vec![16, 256];
    probe.samples = 2;
    let probe_rows = run_invariance(&probe).unwrap();
    let formula_ok = (probe_rows[0].correction_bound - 1.0).abs() < 1e-12
        && (probe_rows[1].correction_bound - 0.5).abs() < 1e-12;
    let bounds: Vec<f64> = rows.iter().map(|r| r.correction_bound).collect();

    // Why the truncated cost saturates: each f sits at L2 distance |g|_2 = 1
    // from its own image, and every other image is farther away still.
    let mut geometry = Vec::new();
    for r in &rows {
        let samples = ball(r.n, r.radius, r.seed, cfg.samples);
        let g = cfg.g_on(r.n).unwrap();
        let a: Vec<Vec<f64>> = samples
            .iter()
            .map(|f| pathgroup::path::refine(f, cfg.refine).unwrap().coords())
            .collect();
        let b: Vec<Vec<f64>> = samples
            .iter()
            .map(|f| star_discretized(f, &g, cfg.refine).unwrap().coords())
            .collect();
        let dist = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        };
        let own = (0..a.len())
            .map(|i| dist(&a[i], &b[i]))
            .fold(f64::INFINITY, f64::min);
        let cross = (0..a.len())
            .flat_map(|i| (0..b.len()).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| dist(&a[i], &b[j]))
            .fold(f64::INFINITY, f64::min);
        geometry.push(format!("N={}: min own {own:.6}, min cross {cross:.3}", r.n));
    }
    outcome(
        mk_decreasing && gap_decreasing && bound_ok && formula_ok,
        format!(
            "mk_exact {mk:?} strictly decreasing {mk_decreasing}; witness_gap {gap:.4?} decreasing {gap_decreasing}; \
             correction bound {bounds:.4?} (N=16 -> {:.3}, N=256 -> {:.3}); untruncated costs [{}]",
            probe_rows[0].correction_bound,
            probe_rows[1].correction_bound,
            geometry.join("; ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let spec = MeasureSpec::new(8, 2.0, 3, 2024).unwrap();
    let dim = spec.euclidean_dim() as f64;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_ball(&spec, 10_000).unwrap())
    };
    let one = run(1);
    let mut u: Vec<f64> = one.iter().map(|f| (f.l2_norm() / 2.0).powf(dim)).collect();
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let count = u.len() as f64;
    let ks = u
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / count).max((i + 1) as f64 / count - v))
        .fold(0.0, f64::max);
    let bits = |s: &[StepPath]| -> Vec<u64> {
        s.iter()
            .flat_map(|f| f.coords())
            .map(f64::to_bits)
            .collect()
    };
    let reference = bits(&one);
    let identical = [4, 8].iter().all(|&t| bits(&run(t)) == reference);
    outcome(
        ks <= 0.02 && identical,
        format!("KS {ks:.4} <= 0.02; bit-identical at 1/4/8 workers {identical}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("group axioms", criterion_1, 10),
        ("homomorphism and cocycle", criterion_2, 30),
        (
            "product integral vs frozen products under Ad",
            criterion_3,
            10,
        ),
        ("exp is 1-Lipschitz", criterion_4, 5),
        ("correction bound", criterion_5, 60),
        ("measure preservation", criterion_6, 30),
        ("inverse preserves norm", criterion_7, 5),
        ("angle concentration", criterion_8, 60),
        ("asymptotic right-invariance", criterion_9, 600),
        ("sampler correctness", criterion_10, 10),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*limit);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {name} [{:.2}s / {limit}s] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
