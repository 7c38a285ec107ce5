//! Wasserstein projections onto convex-order sets and discrete martingale
//! optimal transport.
//!
//! Empirical approximations `μ_I`, `ν_J` of two measures in convex order
//! `μ ≤cx ν` are in general no longer ordered, so the discrete martingale
//! transport problem between them is infeasible. This crate restores the
//! order by projecting one marginal in Wasserstein distance:
//!
//! * [`project1d`] gives the explicit one-dimensional projections, built from
//!   convex hulls ([`hull`]) of integrated quantile differences;
//! * [`qp_project`] computes the projection onto `{η : η ≤cx ν}` in any
//!   dimension as a quadratic program over the transportation polytope;
//! * [`chain`] propagates projections along a sequence of marginals;
//! * [`mot`] solves the resulting martingale transport problems exactly
//!   ([`lp`]) or with entropic regularization;
//! * [`experiments`] reproduces the numerical studies end to end.
//!
//! Code that only needs ordered field arithmetic is generic over
//! [`Scalar`], so the one-dimensional machinery also runs on exact
//! rationals. Solvers that need square roots and exponentials work in `f64`.
//!
//! ```
//! use cxot::{project1d::project_down, Measure};
//!
//! let mu = Measure::uniform_1d(vec![-2.0, 2.0]).unwrap();
//! let nu = Measure::uniform_1d(vec![-1.0, 1.0]).unwrap();
//! let proj = project_down(&mu, &nu).unwrap();
//! assert_eq!(proj.projected, nu);
//! assert_eq!(proj.distance_for(2.0), 1.0);
//! ```

pub mod chain;
pub mod error;
pub mod experiments;
pub mod hull;
pub mod lp;
pub mod measures;
pub mod mot;
pub mod project1d;
pub mod qp_project;
pub mod scalar;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, QuantileFn, Seed};
pub use scalar::{Real, Scalar};

/// Measures with `f64` coordinates.
pub type Measure = DiscreteMeasure<f64>;
/// Measures with exact rational coordinates and weights.
pub type ExactMeasure = DiscreteMeasure<num_rational::BigRational>;
/// Piecewise-linear functions with `f64` values.
pub type Pwl = hull::PiecewiseLinear<f64>;
