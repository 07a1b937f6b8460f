//! Propagation of probe and signal fields through a resonant double-Λ
//! four-wave-mixing medium with spatially modulated control fields.
//!
//! Units: rates and Rabi frequencies in Γ, z in units of the medium
//! length L (z ∈ [0, 1]), time in 1/Γ.
//!
//! Every solver is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`.
//!
//! ```
//! use lambdamix::{integrate_steady, ControlProfile, PhysParams};
//! use num_complex::Complex64;
//!
//! let params = PhysParams::new(240.0, 1.25, 1.25, 0.0).unwrap();
//! let sol = integrate_steady(&ControlProfile::Sincos { omega_0: 0.5 }, &params, Complex64::new(1.0, 0.0)).unwrap();
//! assert!((sol.conversion_efficiency - 0.960).abs() < 1e-3);
//! ```

pub mod analytic;
pub mod bloch;
pub mod config;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod num;
pub mod params;
pub mod profile;
pub mod pulse;
pub mod steady;

pub use analytic::{analytic_sincos, uniform_ce};
pub use bloch::{from_normal_modes, steady_coherences, to_normal_modes};
pub use config::{validate_config, Config};
pub use error::{Error, ErrorClass, Result};
pub use fit::{fit_params, od_from_delay};
pub use geometry::{profile_gaussian_pair, profile_sincos, sweep_ds, transverse_average};
pub use num::{Cplx, Real};
pub use params::build_grid;
pub use profile::ProfileKind;
pub use pulse::{pulse_metrics, simulate_pulse};
pub use steady::{integrate_steady, sweep_od};

pub type PhysParams = params::PhysParams<f64>;
pub type ControlProfile = profile::ControlProfile<f64>;
pub type FieldState = params::FieldState<f64>;
pub type CoherenceState = params::CoherenceState<f64>;
pub type Grids = params::Grids<f64>;
pub type NormalModes = bloch::NormalModes<f64>;
pub type SteadySolver = steady::SteadySolver<f64>;
pub type SteadySolution = steady::SteadySolution<f64>;
pub type PulseSpec = pulse::PulseSpec<f64>;
pub type PulseResult = pulse::PulseResult<f64>;
pub type PulseMetrics = pulse::PulseMetrics<f64>;
pub type BeamGeometry = geometry::BeamGeometry<f64>;
pub type RunKind = geometry::RunKind<f64>;
pub type FitProblem = fit::FitProblem<f64>;
pub type FitReport = fit::FitReport<f64>;
