//! Matrix kernel for K = SO(d) and its Lie algebra so(d).
//!
//! Algebra elements are skew-symmetric matrices, group elements are rotation
//! matrices. The algebra carries the Frobenius pairing `tr(X^T Y)`, which is
//! invariant under conjugation by orthogonal matrices, and the orthonormal
//! basis `(E_ij - E_ji) / sqrt(2)` for `i < j` in lexicographic order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Entrywise tolerance for skew-symmetry of user-supplied matrices.
pub const SKEW_TOL: f64 = 1e-12;
/// Tolerance for `|U^T U - I|_HS` and `|det U - 1|`.
pub const ROTATION_TOL: f64 = 1e-10;

/// Dimension of so(d), i.e. d(d-1)/2.
pub fn algebra_dim(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// An element of so(d).
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraVector(Matrix);

impl AlgebraVector {
    /// Validates that `m` is square, at least 2x2 and skew-symmetric within [`SKEW_TOL`].
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        if m.nrows() < 2 {
            return Err(Error::MatrixSizeTooSmall(m.nrows()));
        }
        let defect = (&m + m.transpose()).amax();
        if defect > SKEW_TOL {
            return Err(Error::NotSkewSymmetric(defect));
        }
        Ok(Self(m))
    }

    /// Skew part `(A - A^T) / 2` of an arbitrary square matrix.
    pub fn skew_part(m: &Matrix) -> Self {
        Self((m - m.transpose()) * 0.5)
    }

    pub fn zero(d: usize) -> Self {
        Self(Matrix::zeros(d, d))
    }

    /// Element with coordinates `coords` in the orthonormal basis.
    pub fn from_coords(d: usize, coords: &[f64]) -> Result<Self> {
        let expected = algebra_dim(d);
        if d < 2 {
            return Err(Error::MatrixSizeTooSmall(d));
        }
        if coords.len() != expected {
            return Err(Error::CoordinateCount {
                expected,
                got: coords.len(),
            });
        }
        let mut m = Matrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = coords[k] * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = v;
                m[(j, i)] = -v;
                k += 1;
            }
        }
        Ok(Self(m))
    }

    /// Coordinates in the orthonormal basis: `c_k = <X, B_k> = sqrt(2) X_ij`.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(algebra_dim(self.dim()));
        self.write_coords(&mut out);
        out
    }

    pub(crate) fn write_coords(&self, out: &mut Vec<f64>) {
        let d = self.dim();
        for i in 0..d {
            for j in (i + 1)..d {
                out.push(self.0[(i, j)] * std::f64::consts::SQRT_2);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 - &other.0))
    }
}

impl std::ops::Neg for &AlgebraVector {
    type Output = AlgebraVector;
    fn neg(self) -> AlgebraVector {
        AlgebraVector(-&self.0)
    }
}

/// An element of SO(d).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupMatrix(Matrix);

impl GroupMatrix {
    /// Validates orthogonality and unit determinant within [`ROTATION_TOL`].
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let d = m.nrows();
        let orthogonality = (m.transpose() * &m - Matrix::identity(d, d)).norm();
        let det = m.determinant();
        if orthogonality > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Self {
        Self(m)
    }

    pub fn identity(d: usize) -> Self {
        Self(Matrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// The group inverse, which is the transpose.
    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 * &other.0))
    }
}

/// Orthonormal basis of so(d) under the Frobenius pairing.
#[derive(Clone, Debug)]
pub struct AlgebraBasis {
    dim: usize,
    elements: Vec<AlgebraVector>,
}

impl AlgebraBasis {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::MatrixSizeTooSmall(d));
        }
        let n = algebra_dim(d);
        let elements = (0..n)
            .map(|k| {
                let mut c = vec![0.0; n];
                c[k] = 1.0;
                AlgebraVector::from_coords(d, &c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: d, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn algebra_dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[AlgebraVector] {
        &self.elements
    }
}

fn check_dim(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Frobenius pairing `tr(X^T Y)`.
pub fn hs_inner(x: &AlgebraVector, y: &AlgebraVector) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(x.0.dot(&y.0))
}

/// Operator 2-norm (largest singular value).
pub fn uniform_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// `Ad_u X = u X u^T`.
pub fn adjoint(u: &GroupMatrix, x: &AlgebraVector) -> Result<AlgebraVector> {
    check_dim(u.dim(), x.dim())?;
    Ok(adjoint_unchecked(u, x))
}

pub(crate) fn adjoint_unchecked(u: &GroupMatrix, x: &AlgebraVector) -> AlgebraVector {
    // SO(2) is abelian, so Ad is the identity there.
    if x.dim() == 2 {
        return x.clone();
    }
    let m = &u.0 * &x.0 * u.0.transpose();
    AlgebraVector::skew_part(&m)
}

/// Exponential so(d) -> SO(d). Uses the Rodrigues closed form for d = 3 and
/// scaling-and-squaring with a diagonal Pade approximant otherwise.
pub fn exp_matrix(x: &AlgebraVector) -> GroupMatrix {
    if x.dim() == 3 {
        exp_rodrigues(x)
    } else {
        GroupMatrix(expm_pade(&x.0))
    }
}

/// Rodrigues formula `I + sin(t)/t X + (1 - cos t)/t^2 X^2`, `t = |X|_HS / sqrt(2)`.
///
/// Panics if `x` is not 3x3.
pub fn exp_rodrigues(x: &AlgebraVector) -> GroupMatrix {
    assert_eq!(x.dim(), 3, "Rodrigues formula needs a 3x3 generator");
    let m = &x.0;
    let theta = x.hs_norm() * std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
        )
    } else {
        let half = (0.5 * theta).sin();
        (theta.sin() / theta, 2.0 * half * half / (theta * theta))
    };
    let m2 = m * m;
    GroupMatrix(Matrix::identity(3, 3) + m * a + m2 * b)
}

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm thresholds for degrees 3, 5, 7, 9, 13 (Higham 2005).
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.53939833006323e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

fn one_norm(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// General matrix exponential by scaling and squaring with a [m/m] Pade approximant.
pub fn expm_pade(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let norm = one_norm(a);
    if norm == 0.0 {
        return id;
    }
    let low: [&[f64]; 4] = [&PADE_3, &PADE_5, &PADE_7, &PADE_9];
    for (coeffs, theta) in low.iter().zip(THETA.iter()) {
        if norm <= *theta {
            return pade_low(a, coeffs);
        }
    }
    let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
    let scaled = a * 2f64.powi(-s);
    let mut r = pade_13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_low(a: &Matrix, b: &[f64]) -> Matrix {
    let n = a.nrows();
    let a2 = a * a;
    let mut odd = Matrix::identity(n, n) * b[1];
    let mut even = Matrix::identity(n, n) * b[0];
    let mut pow = Matrix::identity(n, n);
    for k in 1..b.len() / 2 {
        pow = &pow * &a2;
        odd += &pow * b[2 * k + 1];
        even += &pow * b[2 * k];
    }
    let u = a * odd;
    solve_pade(&u, &even)
}

fn pade_13(a: &Matrix) -> Matrix {
    let b = &PADE_13;
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    solve_pade(&u, &v)
}

fn solve_pade(u: &Matrix, v: &Matrix) -> Matrix {
    let denom = v - u;
    let numer = v + u;
    denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is nonsingular within its norm threshold")
}
