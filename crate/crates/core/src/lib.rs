//! Simulation library for cyclic drives through a quantum critical point.
//!
//! The effective critical oscillator is covered by [`oscillator`] (closed
//! dynamics), [`open_gaussian`] (zero-temperature damping) and [`battery`]
//! (work statistics and ergotropy). The finite-size Lipkin–Meshkov–Glick
//! model lives in [`lmg`], with entanglement witnesses in [`metrology`] and
//! spin Wigner functions in [`spin_wigner`].
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases
//! at the crate root fix it to `f64`.

pub mod battery;
pub mod error;
pub mod export;
pub mod lmg;
pub mod metrology;
pub mod ode;
pub mod open_gaussian;
pub mod optimize;
pub mod oscillator;
pub mod protocols;
pub mod quadrature;
pub mod scalar;
pub mod spin_wigner;

pub use error::{Error, Result};
pub use protocols::{Interference, ProtocolFamily};
pub use scalar::{Complex, Real};

/// Double-precision drive protocol.
pub type ProtocolSpec = protocols::ProtocolSpec<f64>;
/// Double-precision squeeze amplitude sample.
pub type SqueezeAmplitude = oscillator::SqueezeAmplitude<f64>;
pub type OscillatorTrajectory = oscillator::OscillatorTrajectory<f64>;
pub type ErmakovState = oscillator::ErmakovState<f64>;
pub type GaussianCovariance = open_gaussian::GaussianCovariance<f64>;
pub type WorkDistribution = battery::WorkDistribution<f64>;
pub type TruncatedFockState = battery::TruncatedFockState<f64>;
pub type CollectiveOps = lmg::CollectiveOps<f64>;
pub type SpinState = lmg::SpinState<f64>;
pub type SpinDensityMatrix = lmg::SpinDensityMatrix<f64>;
pub use lmg::SqueezeFit;
pub type WitnessResult = metrology::WitnessResult<f64>;
pub type MultipoleBasis = spin_wigner::MultipoleBasis<f64>;
pub type WignerGrid = spin_wigner::WignerGrid<f64>;
/// Double-precision complex number.
pub type C64 = Complex<f64>;
