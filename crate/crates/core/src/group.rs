//! The group law on `L^2([0,1], so(d))`.
//!
//! Based finite-energy paths are identified with their right logarithmic
//! derivatives; the product becomes `f * g = f + Ad_{Pi exp f} g` and the
//! inverse `f^{-1} = -Ad_{(Pi exp f)^{-1}} f`. For step functions the
//! product integral has the closed form
//! `exp((t - t_j) f_j) exp(f_{j-1}/N) ... exp(f_0/N)` on `[t_j, t_{j+1})`.
//!
//! Step functions are not closed under `*`, so products are exposed as lazy
//! pointwise evaluators ([`StarResultEvaluator`]) and projected back to a
//! step space only on request ([`star_discretized`]).

use crate::error::{Error, Result};
use crate::lie::{adjoint_unchecked, exp_matrix, AlgebraVector, GroupMatrix};
use crate::path::{check_compatible, interval_index, StepPath};

/// Partial product integrals `products[i] = Pi_0^{i/N} exp f`, `i = 0..=N`.
///
/// The step function `rho_N^f` takes the value `products[i]` on `[i/N, (i+1)/N)`.
#[derive(Clone, Debug)]
pub struct PartialProductTable {
    products: Vec<GroupMatrix>,
}

impl PartialProductTable {
    /// Partition count N.
    pub fn n(&self) -> usize {
        self.products.len() - 1
    }

    pub fn products(&self) -> &[GroupMatrix] {
        &self.products
    }

    /// `rho_N^f(t)`. The last interval is extended to `t = 1`.
    pub fn rho_at(&self, t: f64) -> Result<&GroupMatrix> {
        Ok(&self.products[interval_index(self.n(), t)?])
    }
}

/// Builds the table with one exponential per interval.
pub fn partial_products(f: &StepPath) -> PartialProductTable {
    let n = f.n();
    let step = 1.0 / n as f64;
    let mut products = Vec::with_capacity(n + 1);
    products.push(GroupMatrix::identity(f.dim()));
    for v in f.values() {
        let prev = products.last().expect("table starts with the identity");
        let next = exp_matrix(&v.scale(step)).matrix() * prev.matrix();
        products.push(GroupMatrix::from_matrix_unchecked(next));
    }
    PartialProductTable { products }
}

/// Product integral of a step function up to time `t`, multiplying the
/// closed-form factors directly.
pub fn product_integral(f: &StepPath, t: f64) -> Result<GroupMatrix> {
    let j = f.interval_index(t)?;
    let n = f.n() as f64;
    let mut acc = GroupMatrix::identity(f.dim()).matrix().clone();
    for v in &f.values()[..j] {
        acc = exp_matrix(&v.scale(1.0 / n)).matrix() * acc;
    }
    let tail = exp_matrix(&f.values()[j].scale(t - j as f64 / n));
    Ok(GroupMatrix::from_matrix_unchecked(tail.matrix() * acc))
}

/// An element of `L^2([0,1], so(d))` known through pointwise evaluation,
/// together with its product integral `t -> Pi_0^t exp`.
pub trait PathElement {
    fn dim(&self) -> usize;

    fn value(&self, t: f64) -> Result<AlgebraVector>;

    fn product_integral(&self, t: f64) -> Result<GroupMatrix>;
}

/// A step path with its partial-product table cached.
#[derive(Clone, Debug)]
pub struct PreparedPath {
    path: StepPath,
    table: PartialProductTable,
}

impl PreparedPath {
    pub fn new(path: StepPath) -> Self {
        let table = partial_products(&path);
        Self { path, table }
    }

    pub fn path(&self) -> &StepPath {
        &self.path
    }

    pub fn table(&self) -> &PartialProductTable {
        &self.table
    }

    /// `Pi_0^t exp f` from the cached table: `exp((t - j/N) f_j) products[j]`.
    pub fn product_integral_at(&self, t: f64) -> Result<GroupMatrix> {
        let j = self.path.interval_index(t)?;
        let offset = t - j as f64 / self.path.n() as f64;
        let tail = exp_matrix(&self.path.values()[j].scale(offset));
        Ok(GroupMatrix::from_matrix_unchecked(
            tail.matrix() * self.table.products[j].matrix(),
        ))
    }
}

impl PathElement for PreparedPath {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn value(&self, t: f64) -> Result<AlgebraVector> {
        self.path.value_at(t).cloned()
    }

    fn product_integral(&self, t: f64) -> Result<GroupMatrix> {
        self.product_integral_at(t)
    }
}

impl<P: PathElement + ?Sized> PathElement for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, t: f64) -> Result<AlgebraVector> {
        (**self).value(t)
    }

    fn product_integral(&self, t: f64) -> Result<GroupMatrix> {
        (**self).product_integral(t)
    }
}

/// Lazy `left * right`.
///
/// The value at `t` is `left(t) + Ad_{Pi exp left(t)} right(t)`. The product
/// integral is `Pi exp left(t) . Pi exp right(t)`, which is the cocycle
/// identity integrated; [`star_discretized`] and [`log_derivative_numeric`]
/// check it independently.
#[derive(Clone, Debug)]
pub struct StarResultEvaluator<A, B> {
    left: A,
    right: B,
}

impl<A: PathElement, B: PathElement> StarResultEvaluator<A, B> {
    pub fn new(left: A, right: B) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::DimensionMismatch {
                left: left.dim(),
                right: right.dim(),
            });
        }
        Ok(Self { left, right })
    }
}

impl<A: PathElement, B: PathElement> PathElement for StarResultEvaluator<A, B> {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn value(&self, t: f64) -> Result<AlgebraVector> {
        let u = self.left.product_integral(t)?;
        let moved = adjoint_unchecked(&u, &self.right.value(t)?);
        self.left.value(t)?.add(&moved)
    }

    fn product_integral(&self, t: f64) -> Result<GroupMatrix> {
        self.left
            .product_integral(t)?
            .mul(&self.right.product_integral(t)?)
    }
}

/// `(f * g)(t) = f(t) + Ad_{Pi exp f(t)} g(t)`.
pub fn star_pointwise(f: &StepPath, g: &StepPath, t: f64) -> Result<AlgebraVector> {
    check_compatible(f, g)?;
    let u = product_integral(f, t)?;
    let moved = adjoint_unchecked(&u, g.value_at(t)?);
    f.value_at(t)?.add(&moved)
}

/// `phi(f) = f + Ad_{rho_N^f} g`, which stays in `V_N`.
pub fn star_phi(f: &StepPath, g: &StepPath) -> Result<StepPath> {
    check_compatible(f, g)?;
    let table = partial_products(f);
    star_phi_with(f, &table, g)
}

pub(crate) fn star_phi_with(
    f: &StepPath,
    table: &PartialProductTable,
    g: &StepPath,
) -> Result<StepPath> {
    StepPath::new(
        f.values()
            .iter()
            .zip(g.values())
            .zip(&table.products)
            .map(|((fi, gi), p)| fi.add(&adjoint_unchecked(p, gi)))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// The step path with values `Ad_{products[i]} g_i`, i.e. `Ad_{rho_N^f} g`.
pub fn rho_adjoint(f: &StepPath, g: &StepPath) -> Result<StepPath> {
    check_compatible(f, g)?;
    let table = partial_products(f);
    StepPath::new(
        g.values()
            .iter()
            .zip(&table.products)
            .map(|(gi, p)| adjoint_unchecked(p, gi))
            .collect(),
    )
}

/// `|Ad_{Pi exp f} g - Ad_{rho_N^f} g|_2`, integrated per interval with the
/// composite midpoint rule on `quad_points` nodes. The integrand is smooth on
/// each interval, so the rule converges at second order.
pub fn correction_norm(f: &StepPath, g: &StepPath, quad_points: usize) -> Result<f64> {
    check_compatible(f, g)?;
    if quad_points == 0 {
        return Err(Error::InvalidParameter(
            "quad_points must be at least 1".into(),
        ));
    }
    let n = f.n() as f64;
    let q = quad_points as f64;
    let table = partial_products(f);
    let mut total = 0.0;
    for ((fi, gi), p) in f.values().iter().zip(g.values()).zip(&table.products) {
        let frozen = adjoint_unchecked(p, gi);
        let mut acc = 0.0;
        for k in 0..quad_points {
            let offset = (k as f64 + 0.5) / (q * n);
            let r = exp_matrix(&fi.scale(offset)).matrix() * p.matrix();
            let moving = adjoint_unchecked(&GroupMatrix::from_matrix_unchecked(r), gi);
            acc += (moving.matrix() - frozen.matrix()).norm_squared();
        }
        total += acc / (q * n);
    }
    Ok(total.sqrt())
}

/// `f^{-1}` for a step path: values `-Ad_{products[i]^T} f_i`.
pub fn inverse(f: &StepPath) -> StepPath {
    let table = partial_products(f);
    let values = f
        .values()
        .iter()
        .zip(&table.products)
        .map(|(fi, p)| -&adjoint_unchecked(&p.inverse(), fi))
        .collect();
    StepPath::new(values).expect("inverse keeps the partition")
}

/// Projection of `f * g` onto `V_{MN}` by sampling at the midpoint of each
/// refined interval.
pub fn star_discretized(f: &StepPath, g: &StepPath, m: usize) -> Result<StepPath> {
    check_compatible(f, g)?;
    if m == 0 {
        return Err(Error::ZeroRefinement);
    }
    let n = f.n() as f64;
    let fine = (f.n() * m) as f64;
    let table = partial_products(f);
    let mut values = Vec::with_capacity(f.n() * m);
    for (i, ((fi, gi), p)) in f
        .values()
        .iter()
        .zip(g.values())
        .zip(&table.products)
        .enumerate()
    {
        for k in 0..m {
            let t = ((i * m + k) as f64 + 0.5) / fine;
            let offset = t - i as f64 / n;
            let r = exp_matrix(&fi.scale(offset)).matrix() * p.matrix();
            let moved = adjoint_unchecked(&GroupMatrix::from_matrix_unchecked(r), gi);
            values.push(fi.add(&moved)?);
        }
    }
    StepPath::new(values)
}

/// Central-difference estimate of the right logarithmic derivative
/// `p'(t) p(t)^{-1}`, projected onto the skew-symmetric matrices.
pub fn log_derivative_numeric<F>(path: F, t: f64, h: f64) -> Result<AlgebraVector>
where
    F: Fn(f64) -> Result<GroupMatrix>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidParameter("step h must be positive".into()));
    }
    let (lo, hi) = (t - h, t + h);
    if lo <= 0.0 || hi >= 1.0 {
        return Err(Error::StencilOutOfRange { lo, hi });
    }
    let forward = path(hi)?;
    let backward = path(lo)?;
    let here = path(t)?;
    let derivative = (forward.matrix() - backward.matrix()) / (2.0 * h);
    Ok(AlgebraVector::skew_part(
        &(derivative * here.matrix().transpose()),
    ))
}
