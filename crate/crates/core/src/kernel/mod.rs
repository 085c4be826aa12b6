//! Special functions, quadrature rules and samplers shared by every module.

pub mod quadrature;
pub mod sampling;
pub mod special;
pub mod theta;

pub use quadrature::{gauss_jacobi, gauss_legendre, jacobi_rule, tanh_sinh, GaussRule, JacobiRule, Quadrature};
pub use sampling::{rng_stream, sample_radial, sample_sphere, RadialKind, RadialLaw, RngStream};
pub use special::{gaussian_abs_moment, gaussian_abs_moment_minus_one, theta_abs_moment, theta_density};
pub use theta::{sphere_shift_moment, theta_power_mean, theta_power_means};
