//! Adaptive estimation of time-varying spectral densities.
//!
//! A locally stationary series is turned into a raw time-frequency plane by
//! the modified pre-periodogram ([`raw`]). That plane is smoothed with kernels
//! ([`kernels`], [`smoother`]) whose shapes are grown iteratively and cut off
//! where neighbouring estimates disagree ([`adaptive`]). [`sim`] generates the
//! benchmark processes with closed-form truth, and [`eval`] scores estimates
//! against it.
//!
//! All numerical code is generic over the scalar type through [`Real`]; the
//! `*64` aliases at the crate root fix it to `f64`, which is what the CLI and
//! the acceptance suite use.

pub mod adaptive;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod raw;
pub mod sim;
pub mod smoother;

mod scalar;

pub use error::{Error, Result};
pub use grid::{EstGrid, Plane, RawGrid, RawPlane};
pub use scalar::Real;

pub type TimeSeries64 = sim::TimeSeries<f64>;
pub type RawPlane64 = RawPlane<f64>;
pub type Plane64 = Plane<f64>;
pub type AdaptiveState64 = adaptive::AdaptiveState<f64>;
pub type RunResult64 = adaptive::RunResult<f64>;
pub type KernelMap64 = adaptive::KernelMap<f64>;
pub type ErrorReport64 = eval::ErrorReport<f64>;

pub type TimeSeries32 = sim::TimeSeries<f32>;
pub type RawPlane32 = RawPlane<f32>;
pub type Plane32 = Plane<f32>;

/// Version of the binary plane container written by [`io`].
pub const CONTAINER_VERSION: &str = "TVSPEC01";
