//! Finite-difference Jacobian determinants of maps `V_N -> V_N`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{inverse, partial_products, star_phi_with};
use crate::path::StepPath;

/// Largest coordinate count for which a dense Jacobian is built.
pub const JACOBIAN_CAP: usize = 64;

/// Default central-difference step.
pub const JACOBIAN_STEP: f64 = 1e-5;

/// Determinant of the central-difference Jacobian of `map` at `point`, in
/// isometric coordinates.
pub fn numerical_jacobian_det<F>(map: F, point: &StepPath, h: f64) -> Result<f64>
where
    F: Fn(&StepPath) -> Result<StepPath>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step h must be positive, got {h}"
        )));
    }
    let n = point.coord_len();
    if n > JACOBIAN_CAP {
        return Err(Error::DimensionCap {
            n,
            cap: JACOBIAN_CAP,
        });
    }
    let (dim, parts) = (point.dim(), point.n());
    let base = point.coords();
    let eval = |x: &[f64]| -> Result<Vec<f64>> {
        let image = map(&StepPath::from_coords(dim, parts, x)?)?;
        if image.coord_len() != n {
            return Err(Error::CoordinateCount {
                expected: n,
                got: image.coord_len(),
            });
        }
        Ok(image.coords())
    };
    let mut jac = DMatrix::zeros(n, n);
    let mut x = base.clone();
    for k in 0..n {
        x[k] = base[k] + h;
        let plus = eval(&x)?;
        x[k] = base[k] - h;
        let minus = eval(&x)?;
        x[k] = base[k];
        for (r, (p, m)) in plus.iter().zip(&minus).enumerate() {
            jac[(r, k)] = (p - m) / (2.0 * h);
        }
    }
    Ok(jac.lu().determinant())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianMap {
    Inverse,
    Phi,
}

impl JacobianMap {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Inverse => "inverse",
            Self::Phi => "phi",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobianReport {
    pub map: JacobianMap,
    pub base_point: Vec<f64>,
    pub h: f64,
    pub det: f64,
    /// `||det| - 1|` for the inverse map, whose determinant may be `-1`;
    /// `|det - 1|` for `phi`.
    pub deviation: f64,
}

/// Jacobian reports for the inverse map and for `phi = f + Ad_{rho_N^f} g`
/// at every base point, in input order.
pub fn jacobian_reports(points: &[StepPath], g: &StepPath, h: f64) -> Result<Vec<JacobianReport>> {
    let per_point: Vec<Result<[JacobianReport; 2]>> = points
        .par_iter()
        .map(|p| {
            let det_inv = numerical_jacobian_det(|f| Ok(inverse(f)), p, h)?;
            let det_phi = numerical_jacobian_det(
                |f| {
                    let table = partial_products(f);
                    star_phi_with(f, &table, g)
                },
                p,
                h,
            )?;
            let base_point = p.coords();
            Ok([
                JacobianReport {
                    map: JacobianMap::Inverse,
                    base_point: base_point.clone(),
                    h,
                    det: det_inv,
                    deviation: (det_inv.abs() - 1.0).abs(),
                },
                JacobianReport {
                    map: JacobianMap::Phi,
                    base_point,
                    h,
                    det: det_phi,
                    deviation: (det_phi - 1.0).abs(),
                },
            ])
        })
        .collect();
    let mut out = Vec::with_capacity(2 * points.len());
    for r in per_point {
        out.extend(r?);
    }
    Ok(out)
}
