//! Exact moment identities for exchangeable vectors on the unit sphere.
//!
//! `beta_{2k_1,..,2k_r} = E[Z_1^{2k_1} ... Z_r^{2k_r}]` for exchangeable
//! `Z_1, .., Z_n`. Every evaluator is generic over [`Scalar`], so the same code
//! path runs in `f64` for production and in exact rationals for certification
//! against the brute-force [`oracle`].

mod fourth;
pub mod mc;
pub mod oracle;
mod quadratic;
mod scalar;
mod table;

pub use fourth::{
    fourth_moment_centered, fourth_moment_centered_closed, fourth_moment_raw, fourth_moment_sphere,
    k_coefficients, second_moment, third_moment_raw, KCoefficients, PowerSums, WeightVector,
};
pub use mc::{mc_moment_table, McMomentTable};
pub use oracle::permutation_oracle;
pub use quadratic::{quadratic_form_moments, QuadraticFormMoments, SquareMatrix};
pub use scalar::{Rational, Scalar};
pub use table::{complete_table, sphere_residuals, MomentKey, MomentTable, SphereResidual};
