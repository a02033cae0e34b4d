//! Finite-energy based path groups over SO(d), realized as `L^2([0,1], so(d))`
//! with the twisted group law `f * g = f + Ad_{Pi exp f} g`, together with the
//! Monte Carlo instruments used to study asymptotically invariant uniform ball
//! measures on step-function subspaces.

pub mod error;
pub mod group;
pub mod harness;
pub mod lie;
pub mod path;
pub mod sampling;
pub mod transport;

pub use error::{Error, Result};
pub use group::{
    correction_norm, inverse, log_derivative_numeric, partial_products, product_integral,
    rho_adjoint, star_discretized, star_phi, star_pointwise, PartialProductTable, PathElement,
    PreparedPath, StarResultEvaluator,
};
pub use lie::{
    adjoint, algebra_dim, exp_matrix, hs_inner, uniform_norm, AlgebraBasis, AlgebraVector,
    GroupMatrix,
};
pub use path::{l2_inner, refine, sup_norm, truncated_distance, StepPath};
pub use sampling::{radius_for, sample_ball, MeasureSpec, RadiusSchedule};
