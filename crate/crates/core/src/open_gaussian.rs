//! Damped critical oscillator at zero temperature.
//!
//! With the vacuum as initial state the Gaussian characteristic function
//! keeps zero mean, so the dynamics closes on the half-trace `sigma` of its
//! covariance and the off-diagonal element `sigma_10`:
//!
//! ```text
//! d sigma    / dt = kappa (1/2 - sigma) + i g^2 omega (sigma_01 - sigma_10) / 2
//! d sigma_10 / dt = (2 i omega - i g^2 omega - kappa) sigma_10 + i g^2 omega sigma
//! ```
//!
//! with `sigma_01 = conj(sigma_10)`.

use nalgebra::ComplexField;

use crate::error::{domain, integrity, Result};
use crate::ode::{self, Tolerance};
use crate::protocols::ProtocolSpec;
use crate::scalar::{cplx, Complex, Real};

/// Second moments of the zero-mean Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCovariance<T> {
    pub t: T,
    /// `<a^dag a> + 1/2`; never below the vacuum value 1/2.
    pub sigma: T,
    /// Off-diagonal element `sigma_01 = conj(sigma_10)`.
    pub sigma01: Complex<T>,
}

impl<T: Real> GaussianCovariance<T> {
    pub fn vacuum(t: T) -> Self {
        Self { t, sigma: T::half(), sigma01: cplx(T::zero(), T::zero()) }
    }

    /// Mean excitation number `sigma - 1/2`.
    pub fn excitations(&self) -> T {
        self.sigma - T::half()
    }

    /// Symplectic eigenvalue `sqrt(sigma^2 - |sigma_01|^2)`: 1/2 for pure
    /// states, larger for mixed ones.
    pub fn symplectic_eigenvalue(&self) -> T {
        (self.sigma * self.sigma - self.sigma01.norm_sqr()).max(T::zero()).sqrt()
    }

    /// Purity `Tr rho^2 = 1 / (2 nu)`.
    pub fn purity(&self) -> T {
        T::one() / (T::two() * self.symplectic_eigenvalue())
    }
}

/// Effective squeezing `arsinh(2|sigma_01|) / 2`. Exact for pure states;
/// for damped states it is a proxy read from the quadrature asymmetry.
pub fn squeezing_from_covariance<T: Real>(c: &GaussianCovariance<T>) -> T {
    (T::two() * c.sigma01.modulus()).asinh() * T::half()
}

/// Stored work `omega (sigma - 1/2)`.
pub fn work_from_covariance<T: Real>(c: &GaussianCovariance<T>, omega: T) -> T {
    omega * c.excitations().max(T::zero())
}

/// Covariance samples plus the state at every cycle boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTrajectory<T> {
    pub samples: Vec<GaussianCovariance<T>>,
    pub cycle_marks: Vec<GaussianCovariance<T>>,
}

impl<T: Real> CovarianceTrajectory<T> {
    pub fn last(&self) -> GaussianCovariance<T> {
        *self.samples.last().expect("trajectory holds the initial state")
    }
}

/// Integrates the covariance equations across all cycles of `spec` with
/// decay rate `kappa` from the vacuum.
pub fn integrate_lindblad<T: Real>(spec: &ProtocolSpec<T>, kappa: T, tol: Tolerance<T>) -> Result<CovarianceTrajectory<T>> {
    integrate_lindblad_from(spec, kappa, tol, GaussianCovariance::vacuum(T::zero()))
}

/// As [`integrate_lindblad`] but from an arbitrary valid covariance.
pub fn integrate_lindblad_from<T: Real>(
    spec: &ProtocolSpec<T>,
    kappa: T,
    tol: Tolerance<T>,
    initial: GaussianCovariance<T>,
) -> Result<CovarianceTrajectory<T>> {
    spec.validate()?;
    if !(kappa >= T::zero() && kappa.is_finite()) {
        return domain(format!("kappa must be non-negative, got {}", kappa));
    }
    if initial.sigma < T::half() || initial.symplectic_eigenvalue() < T::half() * (T::one() - T::lit(1e-12)) {
        return domain("initial covariance violates the uncertainty bound");
    }
    let w = spec.omega;
    // State (sigma, Re sigma_10, Im sigma_10).
    let f = move |t: T, y: &[T; 3]| {
        let g2 = {
            let g = spec.coupling(t);
            g * g
        };
        let (s, x, im) = (y[0], y[1], y[2]);
        let detune = (T::two() - g2) * w;
        [
            kappa * (T::half() - s) + g2 * w * im,
            -kappa * x - detune * im,
            -kappa * im + detune * x + g2 * w * s,
        ]
    };
    let floor = T::half() - T::lit(10.0) * tol.rel.max(tol.abs);
    let mut samples = vec![initial];
    let mut marks = Vec::with_capacity(spec.cycles);
    let to_cov = |t: T, y: &[T; 3]| GaussianCovariance { t, sigma: y[0], sigma01: cplx(y[1], -y[2]) };
    let mut observe = |t: T, y: &[T; 3]| {
        if !(y[0] >= floor) {
            return integrity(format!("sigma = {} fell below the vacuum floor at t = {}", y[0], t));
        }
        samples.push(to_cov(t, y));
        Ok(())
    };
    let breakpoints: Vec<T> = spec.breakpoints().into_iter().map(|b| b + initial.t).collect();
    let mut at_bp = |i: usize, y: &[T; 3]| {
        if i % 2 == 0 {
            marks.push(to_cov(breakpoints[i], y));
        }
        Ok(())
    };
    // The drive is evaluated relative to the start time.
    let t0 = initial.t;
    let shifted = move |t: T, y: &[T; 3]| f(t - t0, y);
    let y0 = [initial.sigma, initial.sigma01.re, -initial.sigma01.im];
    ode::integrate_piecewise(&shifted, &breakpoints, y0, tol, &mut observe, &mut at_bp)?;
    Ok(CovarianceTrajectory { samples, cycle_marks: marks })
}
