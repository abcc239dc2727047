//! Certificate engine for functional inequalities of Gibbs measures
//! `μ = Z⁻¹e^{−V}dx`: Lyapunov witnesses, envelope profiles, super-Poincaré
//! rate functions, conversions to F-Sobolev form, and a 1-D spectral oracle
//! that checks certified rates against explicit test functions.
//!
//! Everything is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod baseline;
pub mod certificates;
pub mod conversions;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lyapunov;
pub mod potential;
pub mod radial;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Potential = potential::PotentialSpec<f64>;
pub type Witness = lyapunov::LyapunovWitness<f64>;
pub type Profile = geometry::GeometryProfile<f64>;
pub type Baseline = baseline::BaselineBeta<f64>;
pub type Rate = certificates::RateFunction<f64>;
pub type Certificate = certificates::Certificate<f64>;
pub type Model = verify::DiscreteModel<f64>;
pub type Report = verify::SoundnessReport<f64>;
