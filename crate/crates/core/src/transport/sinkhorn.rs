//! Log-domain Sinkhorn iterations for uniform marginals with epsilon
//! scaling, finished by projecting the plan onto the exact marginals.

use crate::error::{Error, Result};

/// Outcome of a converged run.
#[derive(Clone, Debug)]
pub struct SinkhornSolution {
    /// `<P, C>` for the rounded entropic plan `P`.
    pub cost: f64,
    pub iterations: usize,
    /// L1 marginal violation of the Sinkhorn plan before rounding.
    pub raw_violation: f64,
    /// L1 violation of row and column marginals of the returned plan.
    pub violation: f64,
}

/// Marginal tolerance of the returned plan.
pub const MARGINAL_TOL: f64 = 1e-8;

/// L1 row-marginal violation at which Sinkhorn hands over to rounding. The
/// rounding step moves the cost by at most `max C * SINKHORN_TOL`.
pub const SINKHORN_TOL: f64 = 1e-6;

fn logsumexp(values: impl Iterator<Item = f64>, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(values);
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + buf.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport between uniform measures of equal size `n`
/// under the square cost matrix `cost`. Regularization is annealed from
/// `max(reg, max cost)` down to `reg`, halving per stage and warm-starting
/// the dual potentials.
pub fn solve(cost: &[Vec<f64>], reg: f64, max_iters: usize) -> Result<SinkhornSolution> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularization must be positive, got {reg}"
        )));
    }
    let mass = 1.0 / n as f64;
    let log_mass = mass.ln();
    let cmax = cost
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0, f64::max);
    let mut eps = reg.max(cmax);
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut buf = Vec::with_capacity(n);
    let mut iterations = 0;

    loop {
        let last_stage = eps <= reg;
        let stage_tol = if last_stage { SINKHORN_TOL } else { 1e-4 };
        let mut violation = f64::INFINITY;
        while iterations < max_iters {
            iterations += 1;
            for i in 0..n {
                let row = &cost[i];
                let lse = logsumexp((0..n).map(|j| (g[j] - row[j]) / eps), &mut buf);
                f[i] = eps * (log_mass - lse);
            }
            for j in 0..n {
                let lse = logsumexp((0..n).map(|i| (f[i] - cost[i][j]) / eps), &mut buf);
                g[j] = eps * (log_mass - lse);
            }
            // columns are exact after the g sweep; check rows every few sweeps
            if iterations % 5 == 0 || iterations == max_iters {
                violation = (0..n)
                    .map(|i| {
                        let row_mass: f64 = (0..n)
                            .map(|j| ((f[i] + g[j] - cost[i][j]) / eps).exp())
                            .sum();
                        (row_mass - mass).abs()
                    })
                    .sum();
                if violation <= stage_tol {
                    break;
                }
            }
        }
        if violation > stage_tol {
            return Err(Error::NotConverged {
                iters: iterations,
                violation,
            });
        }
        if last_stage {
            let mut plan: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| ((f[i] + g[j] - cost[i][j]) / eps).exp())
                        .collect()
                })
                .collect();
            round_to_marginals(&mut plan, mass);
            let final_violation = marginal_violation(&plan, mass);
            if final_violation > MARGINAL_TOL {
                return Err(Error::NotConverged {
                    iters: iterations,
                    violation: final_violation,
                });
            }
            let cost_value = plan
                .iter()
                .zip(cost)
                .map(|(p, c)| p.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
                .sum();
            return Ok(SinkhornSolution {
                cost: cost_value,
                iterations,
                raw_violation: violation,
                violation: final_violation,
            });
        }
        eps = (eps * 0.5).max(reg);
    }
}

fn marginal_violation(plan: &[Vec<f64>], mass: f64) -> f64 {
    let n = plan.len();
    let rows: f64 = plan
        .iter()
        .map(|r| (r.iter().sum::<f64>() - mass).abs())
        .sum();
    let cols: f64 = (0..n)
        .map(|j| (plan.iter().map(|r| r[j]).sum::<f64>() - mass).abs())
        .sum();
    rows + cols
}

/// Projects a nonnegative plan onto the uniform transport polytope: scale
/// down overfull rows, then overfull columns, then add the rank-one
/// correction `err_r err_c^T / |err_r|_1` (Altschuler, Weed and Rigollet 2017).
fn round_to_marginals(plan: &mut [Vec<f64>], mass: f64) {
    let n = plan.len();
    for row in plan.iter_mut() {
        let s: f64 = row.iter().sum();
        if s > mass {
            let k = mass / s;
            row.iter_mut().for_each(|v| *v *= k);
        }
    }
    for j in 0..n {
        let s: f64 = plan.iter().map(|r| r[j]).sum();
        if s > mass {
            let k = mass / s;
            plan.iter_mut().for_each(|r| r[j] *= k);
        }
    }
    let err_r: Vec<f64> = plan
        .iter()
        .map(|r| (mass - r.iter().sum::<f64>()).max(0.0))
        .collect();
    let err_c: Vec<f64> = (0..n)
        .map(|j| (mass - plan.iter().map(|r| r[j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for (row, er) in plan.iter_mut().zip(&err_r) {
            for (v, ec) in row.iter_mut().zip(&err_c) {
                *v += er * ec / total;
            }
        }
    }
}
