//! Closed dynamics of the effective critical oscillator
//! `H(t) = omega a^dag a - g(t)^2 omega (a + a^dag)^2 / 4` started in the vacuum.
//!
//! The state stays a squeezed vacuum `exp(b a^dag^2)|0>` up to normalisation;
//! [`integrate_b`] follows the complex amplitude `b(t)`. [`ermakov_oracle`]
//! solves the same dynamics through the Ermakov equation for the Gaussian
//! width and serves as an independent check.

use nalgebra::ComplexField;

use crate::error::{domain, integrity, Result};
use crate::ode::{self, Tolerance};
use crate::protocols::ProtocolSpec;
use crate::scalar::{cplx, wrap_two_pi, Complex, Real};

/// Complex squeeze amplitude `b` at time `t`. Physical states have `|b| < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeAmplitude<T> {
    pub t: T,
    pub b: Complex<T>,
}

/// Squeeze parameter `s = |s| e^{i theta}` of `S(s)|0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squeezing<T> {
    pub magnitude: T,
    /// In `[0, 2 pi)`; 0 when the magnitude vanishes.
    pub phase: T,
}

/// `|s| = artanh(2|b|)`, `theta = arg b`.
pub fn squeezing_from_b<T: Real>(b: Complex<T>) -> Result<Squeezing<T>> {
    let m = b.modulus();
    if !(m < T::half()) {
        return domain(format!("|b| = {} is not below 1/2", m));
    }
    if m == T::zero() {
        return Ok(Squeezing { magnitude: T::zero(), phase: T::zero() });
    }
    Ok(Squeezing { magnitude: (T::two() * m).atanh(), phase: wrap_two_pi(b.im.atan2(b.re)) })
}

/// Mean excitation number `sinh^2|s| = 4|b|^2 / (1 - 4|b|^2)` of the squeezed vacuum.
pub fn excitations_from_b<T: Real>(b: Complex<T>) -> T {
    let q = T::lit(4.0) * b.norm_sqr();
    q / (T::one() - q)
}

impl<T: Real> SqueezeAmplitude<T> {
    pub fn squeezing(&self) -> Result<Squeezing<T>> {
        squeezing_from_b(self.b)
    }

    pub fn excitations(&self) -> T {
        excitations_from_b(self.b)
    }
}

/// `pi / (2 + 2 z_nu r)`, the angle all the universal one-cycle results are
/// expressed in.
pub fn universal_angle<T: Real>(r: T, z_nu: T) -> T {
    T::pi() / (T::two() + T::two() * z_nu * r)
}

/// Universal one-cycle squeezing `arcosh(csc(pi / (2 + 2 z_nu r)))` reached
/// for slow cycles.
pub fn predicted_squeezing<T: Real>(r: T, z_nu: T) -> T {
    (T::one() / universal_angle(r, z_nu).sin()).acosh()
}

/// Vacuum survival probability `sin(pi / (2 + 2 z_nu r))` after one slow cycle.
pub fn predicted_overlap<T: Real>(r: T, z_nu: T) -> T {
    universal_angle(r, z_nu).sin()
}

/// Samples of `b(t)` at every accepted integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorTrajectory<T> {
    /// Strictly increasing in time; the first sample is `(0, 0)`.
    pub samples: Vec<SqueezeAmplitude<T>>,
    /// `b` at `t = 2 m tau`, `m = 1..=M`.
    pub cycle_marks: Vec<SqueezeAmplitude<T>>,
}

impl<T: Real> OscillatorTrajectory<T> {
    pub fn last(&self) -> SqueezeAmplitude<T> {
        *self.samples.last().expect("trajectory always holds the initial sample")
    }
}

/// Right-hand side of `db/dt = -i omega (2b - g^2 (1 + 2b)^2 / 4)` in
/// real components.
fn b_rhs<T: Real>(spec: &ProtocolSpec<T>) -> impl Fn(T, &[T; 2]) -> [T; 2] + '_ {
    move |t, y| {
        let b = cplx(y[0], y[1]);
        let g = spec.coupling(t);
        let one_plus = cplx(T::one() + T::two() * y[0], T::two() * y[1]);
        let inner = b * T::two() - one_plus * one_plus * (g * g / T::lit(4.0));
        // -i * omega * inner
        [spec.omega * inner.im, -spec.omega * inner.re]
    }
}

fn check_tol<T: Real>(tol: Tolerance<T>) -> Result<()> {
    if !(tol.rel > T::zero() && tol.abs > T::zero()) {
        return domain("tolerances must be positive");
    }
    Ok(())
}

/// Integrates the squeeze amplitude across all `M` cycles of `spec`,
/// starting from the vacuum.
pub fn integrate_b<T: Real>(spec: &ProtocolSpec<T>, tol: Tolerance<T>) -> Result<OscillatorTrajectory<T>> {
    spec.validate()?;
    check_tol(tol)?;
    let f = b_rhs(spec);
    let limit = T::half() - T::lit(10.0) * tol.rel;
    let mut samples = vec![SqueezeAmplitude { t: T::zero(), b: Complex::new(T::zero(), T::zero()) }];
    let mut marks = Vec::with_capacity(spec.cycles);
    let mut observe = |t: T, y: &[T; 2]| {
        let b = cplx(y[0], y[1]);
        if !(b.modulus() < limit) {
            return integrity(format!("|b| = {} reached the physical bound at t = {}", b.modulus(), t));
        }
        samples.push(SqueezeAmplitude { t, b });
        Ok(())
    };
    let breakpoints = spec.breakpoints();
    let mut at_bp = |i: usize, y: &[T; 2]| {
        if i % 2 == 0 {
            marks.push(SqueezeAmplitude { t: breakpoints[i], b: cplx(y[0], y[1]) });
        }
        Ok(())
    };
    ode::integrate_piecewise(&f, &breakpoints, [T::zero(); 2], tol, &mut observe, &mut at_bp)?;
    Ok(OscillatorTrajectory { samples, cycle_marks: marks })
}

/// Squeezing after each completed cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSqueezing<T> {
    /// 1-based cycle index.
    pub cycle: usize,
    pub magnitude: T,
    pub phase: T,
    pub b: Complex<T>,
}

/// Runs all `M` cycles in a single integration and reports `(|s|_m, theta_m)`.
pub fn multi_cycle<T: Real>(spec: &ProtocolSpec<T>, tol: Tolerance<T>) -> Result<Vec<CycleSqueezing<T>>> {
    let traj = integrate_b(spec, tol)?;
    traj.cycle_marks
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let s = m.squeezing()?;
            Ok(CycleSqueezing { cycle: i + 1, magnitude: s.magnitude, phase: s.phase, b: m.b })
        })
        .collect()
}

/// Ermakov amplitude `xi` and its velocity; the Gaussian second moments
/// follow from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmakovState<T> {
    pub t: T,
    pub xi: T,
    pub xi_dot: T,
}

impl<T: Real> ErmakovState<T> {
    /// `<x^2> = xi^2`
    pub fn x2(&self) -> T {
        self.xi * self.xi
    }

    /// `<p^2> = xi_dot^2 + 1 / (4 xi^2)`
    pub fn p2(&self) -> T {
        self.xi_dot * self.xi_dot + T::one() / (T::lit(4.0) * self.xi * self.xi)
    }

    /// `<xp + px> / 2 = xi xi_dot`
    pub fn xp_sym(&self) -> T {
        self.xi * self.xi_dot
    }

    /// `<x^2><p^2> - <xp+px>^2/4 - 1/4`, zero for a pure Gaussian state.
    pub fn purity_defect(&self) -> T {
        self.x2() * self.p2() - self.xp_sym() * self.xp_sym() - T::lit(0.25)
    }

    /// `<a^dag a>` in the Fock basis of the undriven oscillator.
    pub fn excitations(&self, omega: T) -> T {
        (omega * self.x2() + self.p2() / omega) * T::half() - T::half()
    }

    /// `|<0|psi>|^2 = 1 / sqrt(det(V + V_0))` with `V_0` the vacuum covariance.
    pub fn vacuum_fidelity(&self, omega: T) -> T {
        let a = self.x2() + T::one() / (T::two() * omega);
        let d = self.p2() + omega * T::half();
        let c = self.xp_sym();
        T::one() / (a * d - c * c).sqrt()
    }
}

/// Ermakov trajectory with the state at every cycle boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmakovTrajectory<T> {
    pub samples: Vec<ErmakovState<T>>,
    pub cycle_marks: Vec<ErmakovState<T>>,
}

/// Solves `xi'' = 1/(4 xi^3) - omega^2 (1 - g^2) xi` from the ground state
/// `xi = (2 omega)^{-1/2}`, `xi' = 0`.
pub fn ermakov_oracle<T: Real>(spec: &ProtocolSpec<T>, tol: Tolerance<T>) -> Result<ErmakovTrajectory<T>> {
    spec.validate()?;
    check_tol(tol)?;
    let w2 = spec.omega * spec.omega;
    let f = move |t: T, y: &[T; 2]| {
        let g = spec.coupling(t);
        let xi = y[0];
        [y[1], T::one() / (T::lit(4.0) * xi * xi * xi) - w2 * (T::one() - g * g) * xi]
    };
    let xi0 = (T::two() * spec.omega).sqrt().recip();
    let mut samples = vec![ErmakovState { t: T::zero(), xi: xi0, xi_dot: T::zero() }];
    let mut marks = Vec::with_capacity(spec.cycles);
    let mut observe = |t: T, y: &[T; 2]| {
        if !(y[0] > T::zero()) {
            return integrity(format!("Ermakov amplitude left the positive axis at t = {}", t));
        }
        samples.push(ErmakovState { t, xi: y[0], xi_dot: y[1] });
        Ok(())
    };
    let breakpoints = spec.breakpoints();
    let mut at_bp = |i: usize, y: &[T; 2]| {
        if i % 2 == 0 {
            marks.push(ErmakovState { t: breakpoints[i], xi: y[0], xi_dot: y[1] });
        }
        Ok(())
    };
    ode::integrate_piecewise(&f, &breakpoints, [xi0, T::zero()], tol, &mut observe, &mut at_bp)?;
    Ok(ErmakovTrajectory { samples, cycle_marks: marks })
}
