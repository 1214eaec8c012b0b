//! Cyclic drive protocols `g(t)` that reach the critical coupling at the
//! middle of every cycle.
//!
//! A cycle lasts `2 tau`; the drive starts and ends at zero and touches
//! `g_c` at `t = tau`. Cycles repeat with period `2 tau`.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::quadrature;
use crate::scalar::{wrap_two_pi, Real};

/// Shape of the approach to the critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolFamily {
    /// `g_c (1 - |t - tau|^r / tau^r)`.
    PowerLaw,
    /// `g_c sin^p(pi t / 2 tau)` on the way in, `g_c cos^p(...)` on the way out.
    Trigonometric,
}

impl ProtocolFamily {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolFamily::PowerLaw => "power_law",
            ProtocolFamily::Trigonometric => "trigonometric",
        }
    }
}

impl fmt::Display for ProtocolFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProtocolFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power_law" => Ok(ProtocolFamily::PowerLaw),
            "trigonometric" => Ok(ProtocolFamily::Trigonometric),
            other => domain(format!("unknown protocol family `{other}`")),
        }
    }
}

/// Full description of a cyclic drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec<T> {
    pub family: ProtocolFamily,
    /// `r` for the power law, `p` for the trigonometric family.
    pub exponent: T,
    /// Peak coupling. 1 for every physical protocol; 0 only for the idle
    /// reference drive.
    pub g_c: T,
    /// Half-cycle duration, in units of `1/omega`.
    pub tau: T,
    pub omega: T,
    pub cycles: usize,
    /// Product of critical exponents `z nu` of the gap closing.
    pub z_nu: T,
}

/// Phase-interference class of the squeeze phase at a cycle boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interference {
    /// Phase near an odd multiple of `pi/2`: the next cycle amplifies.
    Constructive,
    /// Phase near a multiple of `2 pi`: the next cycle undoes the squeezing.
    Destructive,
    Intermediate,
}

impl fmt::Display for Interference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interference::Constructive => "constructive",
            Interference::Destructive => "destructive",
            Interference::Intermediate => "intermediate",
        })
    }
}

/// Default angular band for [`classify_phase`]: 5 degrees.
pub fn default_phase_tolerance<T: Real>() -> T {
    T::pi() / T::lit(36.0)
}

/// Classifies a squeeze phase (any real angle) by distance to the
/// constructive (`(2n+1) pi/2`) and destructive (`2 n pi`) points.
pub fn classify_phase<T: Real>(theta: T, tolerance: T) -> Interference {
    let th = wrap_two_pi(theta);
    let dist = |target: T| {
        let d = (th - target).abs();
        d.min(T::two_pi() - d)
    };
    let constructive = dist(T::frac_pi_2()).min(dist(T::lit(3.0) * T::frac_pi_2()));
    let destructive = dist(T::zero());
    if constructive <= tolerance {
        Interference::Constructive
    } else if destructive <= tolerance {
        Interference::Destructive
    } else {
        Interference::Intermediate
    }
}

impl<T: Real> ProtocolSpec<T> {
    /// Power-law protocol with `omega = 1`, one cycle and `z nu = 1/2`.
    pub fn power_law(r: T, tau: T) -> Result<Self> {
        Self::new(ProtocolFamily::PowerLaw, r, tau)
    }

    /// Trigonometric protocol with `omega = 1`, one cycle and `z nu = 1/2`.
    pub fn trigonometric(p: T, tau: T) -> Result<Self> {
        Self::new(ProtocolFamily::Trigonometric, p, tau)
    }

    pub fn new(family: ProtocolFamily, exponent: T, tau: T) -> Result<Self> {
        let spec = Self { family, exponent, g_c: T::one(), tau, omega: T::one(), cycles: 1, z_nu: T::half() };
        spec.validate()?;
        Ok(spec)
    }

    /// Drive that stays at `g = 0`: the stationary reference for tests.
    pub fn idle(tau: T) -> Result<Self> {
        let spec = Self {
            family: ProtocolFamily::PowerLaw,
            exponent: T::one(),
            g_c: T::zero(),
            tau,
            omega: T::one(),
            cycles: 1,
            z_nu: T::half(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_cycles(mut self, cycles: usize) -> Result<Self> {
        self.cycles = cycles;
        self.validate()?;
        Ok(self)
    }

    pub fn with_omega(mut self, omega: T) -> Result<Self> {
        self.omega = omega;
        self.validate()?;
        Ok(self)
    }

    pub fn with_z_nu(mut self, z_nu: T) -> Result<Self> {
        self.z_nu = z_nu;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: T| x.is_finite();
        if !(finite(self.exponent) && self.exponent > T::zero()) {
            return domain(format!("exponent must be positive, got {}", self.exponent));
        }
        if !(finite(self.tau) && self.tau > T::zero()) {
            return domain(format!("tau must be positive, got {}", self.tau));
        }
        if !(finite(self.omega) && self.omega > T::zero()) {
            return domain(format!("omega must be positive, got {}", self.omega));
        }
        if !(finite(self.z_nu) && self.z_nu > T::zero()) {
            return domain(format!("z_nu must be positive, got {}", self.z_nu));
        }
        if self.cycles == 0 {
            return domain("cycle count must be at least 1");
        }
        if !(self.g_c >= T::zero() && self.g_c <= T::one()) {
            return domain(format!("g_c must lie in [0, 1], got {}", self.g_c));
        }
        Ok(())
    }

    /// `2 M tau`.
    pub fn duration(&self) -> T {
        T::two() * T::from_usize_lossy(self.cycles) * self.tau
    }

    /// Times `k tau`, `k = 0..=2M`, where the drive derivative may jump.
    /// Integrators must not step across these.
    pub fn breakpoints(&self) -> Vec<T> {
        (0..=2 * self.cycles).map(|k| T::from_usize_lossy(k) * self.tau).collect()
    }

    fn check_time(&self, t: T) -> Result<T> {
        let end = self.duration();
        let slack = end * T::epsilon() * T::lit(64.0);
        if !(t >= -slack && t <= end + slack) {
            return domain(format!("t = {} outside [0, {}]", t, end));
        }
        Ok(t.max(T::zero()).min(end))
    }

    /// Position within the current cycle, in `[0, 2 tau]`.
    fn phase_time(&self, t: T) -> T {
        let period = T::two() * self.tau;
        let u = t % period;
        if u < T::zero() {
            u + period
        } else {
            u
        }
    }

    /// `g(t)` without the domain check; `t` is reduced modulo `2 tau`.
    #[inline]
    pub fn coupling(&self, t: T) -> T {
        let u = self.phase_time(t);
        let tau = self.tau;
        let v = match self.family {
            ProtocolFamily::PowerLaw => {
                let d = ((u - tau).abs() / tau).min(T::one());
                T::one() - d.powf(self.exponent)
            }
            ProtocolFamily::Trigonometric => {
                if u <= tau {
                    (T::frac_pi_2() * u / tau).sin().max(T::zero()).powf(self.exponent)
                } else {
                    (T::frac_pi_2() * (u - tau) / tau).cos().max(T::zero()).powf(self.exponent)
                }
            }
        };
        self.g_c * v
    }

    /// `1 - g(t)/g_c`, evaluated without cancellation near the critical point.
    fn distance_to_peak(&self, t: T) -> T {
        let u = self.phase_time(t);
        let tau = self.tau;
        match self.family {
            ProtocolFamily::PowerLaw => ((u - tau).abs() / tau).min(T::one()).powf(self.exponent),
            ProtocolFamily::Trigonometric => T::one() - self.coupling(t) / self.g_c.max(T::epsilon()),
        }
    }

    /// Drive value `g(t)` for `0 <= t <= 2 M tau`.
    pub fn eval_g(&self, t: T) -> Result<T> {
        let t = self.check_time(t)?;
        Ok(self.coupling(t))
    }

    /// Drive speed `|dg/dt|`.
    ///
    /// Fails with [`Error::InfiniteRate`] where the derivative diverges
    /// (the peak for a power law with `r < 1`, the cycle boundaries for the
    /// trigonometric family with `p < 1`).
    pub fn eval_rate(&self, t: T) -> Result<T> {
        let t = self.check_time(t)?;
        let u = self.phase_time(t);
        let tau = self.tau;
        let e = self.exponent;
        let infinite = || Err(Error::InfiniteRate { t: t.to_f64_lossy() });
        let rate = match self.family {
            ProtocolFamily::PowerLaw => {
                let d = (u - tau).abs();
                if d == T::zero() && e < T::one() {
                    return infinite();
                }
                self.g_c * e * d.powf(e - T::one()) / tau.powf(e)
            }
            ProtocolFamily::Trigonometric => {
                let w = T::frac_pi_2() / tau;
                let (lead, other) = if u <= tau {
                    let x = w * u;
                    (x.sin(), x.cos())
                } else {
                    let x = w * (u - tau);
                    (x.cos(), x.sin())
                };
                if lead <= T::zero() && e < T::one() {
                    return infinite();
                }
                self.g_c * e * lead.max(T::zero()).powf(e - T::one()) * other.abs() * w
            }
        };
        if rate.is_finite() {
            Ok(rate)
        } else {
            infinite()
        }
    }

    /// Exponent of `g_c - g(t) ~ |t - tau|^r` at the critical point.
    /// The trigonometric family is quadratic there for every `p`.
    pub fn local_expansion_exponent(&self) -> T {
        match self.family {
            ProtocolFamily::PowerLaw => self.exponent,
            ProtocolFamily::Trigonometric => T::two(),
        }
    }

    /// Instantaneous gap `omega sqrt(1 - g(t)^2)` of the effective oscillator.
    pub fn gap(&self, t: T) -> T {
        let g = self.coupling(t);
        let one_minus = if self.g_c == T::one() { self.distance_to_peak(t) } else { T::one() - g };
        self.omega * (one_minus * (T::one() + g)).max(T::zero()).sqrt()
    }

    /// Dynamical phase `Theta = int_0^{2 tau} eps(g(t)) dt` accumulated over
    /// one cycle, by adaptive quadrature on both half-cycles.
    pub fn accumulated_phase(&self) -> Result<T> {
        let rel = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
        let f = |t: T| self.gap(t);
        let first = quadrature::integrate(f, T::zero(), self.tau, rel, T::zero())?;
        let second = quadrature::integrate(f, self.tau, T::two() * self.tau, rel, T::zero())?;
        Ok(first + second)
    }

    /// Predicted squeeze phase after one cycle, `mod(-Theta - pi/2, 2 pi)`.
    pub fn predicted_arg_b(&self) -> Result<T> {
        Ok(wrap_two_pi(-self.accumulated_phase()? - T::frac_pi_2()))
    }

    /// [`predicted_arg_b`](Self::predicted_arg_b) together with its class.
    pub fn predicted_interference(&self, tolerance: T) -> Result<(T, Interference)> {
        let theta = self.predicted_arg_b()?;
        Ok((theta, classify_phase(theta, tolerance)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    type ProtocolSpec = super::ProtocolSpec<f64>;

    #[test]
    fn boundary_values() {
        for &r in &[0.5, 1.0, 2.0, 4.0] {
            let p = ProtocolSpec::power_law(r, 3.0).unwrap();
            assert_eq!(p.eval_g(0.0).unwrap(), 0.0);
            assert_relative_eq!(p.eval_g(3.0).unwrap(), 1.0);
            assert!(p.eval_g(6.0).unwrap().abs() < 1e-15);
        }
        let lin = ProtocolSpec::power_law(1.0, 1.0).unwrap();
        assert_relative_eq!(lin.eval_g(0.5).unwrap(), 0.5, epsilon = 1e-15);
        let trig = ProtocolSpec::trigonometric(3.0, 2.0).unwrap();
        assert_relative_eq!(trig.eval_g(2.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn outside_domain_is_rejected() {
        let p = ProtocolSpec::power_law(2.0, 1.0).unwrap().with_cycles(2).unwrap();
        assert!(p.eval_g(4.0).is_ok());
        assert!(matches!(p.eval_g(4.1), Err(Error::Domain(_))));
        assert!(matches!(p.eval_g(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_specs() {
        assert!(ProtocolSpec::power_law(0.0, 1.0).is_err());
        assert!(ProtocolSpec::power_law(1.0, -1.0).is_err());
        assert!(ProtocolSpec::power_law(1.0, 1.0).unwrap().with_cycles(0).is_err());
        assert!(ProtocolSpec::power_law(1.0, 1.0).unwrap().with_z_nu(0.0).is_err());
    }

    #[test]
    fn rates() {
        let lin = ProtocolSpec::power_law(1.0, 4.0).unwrap();
        for &t in &[0.3, 1.0, 2.5, 3.9] {
            assert_relative_eq!(lin.eval_rate(t).unwrap(), 0.25, epsilon = 1e-14);
        }
        let quad = ProtocolSpec::power_law(2.0, 4.0).unwrap();
        assert_eq!(quad.eval_rate(4.0).unwrap(), 0.0);
        let sqrt = ProtocolSpec::power_law(0.5, 4.0).unwrap();
        assert!(matches!(sqrt.eval_rate(4.0), Err(Error::InfiniteRate { .. })));
        assert!(sqrt.eval_rate(3.0).unwrap().is_finite());
    }

    #[test]
    fn rate_matches_finite_difference() {
        let specs = [
            ProtocolSpec::power_law(2.5, 3.0).unwrap(),
            ProtocolSpec::power_law(0.7, 3.0).unwrap(),
            ProtocolSpec::trigonometric(0.5, 3.0).unwrap(),
            ProtocolSpec::trigonometric(3.0, 3.0).unwrap(),
        ];
        let h = 1e-6;
        for p in &specs {
            for &t in &[0.4, 1.7, 2.6, 3.5, 4.8] {
                let fd = (p.coupling(t + h) - p.coupling(t - h)) / (2.0 * h);
                assert_relative_eq!(p.eval_rate(t).unwrap(), fd.abs(), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn trigonometric_rate_diverges_at_start_for_small_p() {
        let p = ProtocolSpec::trigonometric(0.5, 1.0).unwrap();
        assert!(matches!(p.eval_rate(0.0), Err(Error::InfiniteRate { .. })));
    }

    #[test]
    fn expansion_exponent() {
        assert_eq!(ProtocolSpec::power_law(4.0, 1.0).unwrap().local_expansion_exponent(), 4.0);
        assert_eq!(ProtocolSpec::trigonometric(0.5, 1.0).unwrap().local_expansion_exponent(), 2.0);
        assert_eq!(ProtocolSpec::trigonometric(3.0, 1.0).unwrap().local_expansion_exponent(), 2.0);
    }

    #[test]
    fn fitted_expansion_exponent_is_two_for_trigonometric() {
        // Slope of log(g_c - g) against log|t - tau| close to the peak.
        for &p in &[0.5, 1.0, 3.0] {
            let spec = ProtocolSpec::trigonometric(p, 1.0).unwrap();
            let (d1, d2) = (1e-3, 2e-3);
            let y1 = (1.0 - spec.coupling(1.0 - d1)).ln();
            let y2 = (1.0 - spec.coupling(1.0 - d2)).ln();
            let slope = (y2 - y1) / (d2 / d1 as f64).ln();
            assert!((slope - 2.0).abs() < 1e-3, "p = {p}: slope {slope}");
        }
    }

    #[test]
    fn accumulated_phase_closed_forms() {
        for &tau in &[1.0, 10.0, 37.5] {
            let lin = ProtocolSpec::power_law(1.0, tau).unwrap();
            assert_relative_eq!(lin.accumulated_phase().unwrap(), PI * tau / 2.0, max_relative = 1e-10);
            let quad = ProtocolSpec::power_law(2.0, tau).unwrap();
            let expected = 2.0 * (2.0 * 2f64.sqrt() - 1.0) * tau / 3.0;
            assert_relative_eq!(quad.accumulated_phase().unwrap(), expected, max_relative = 1e-10);
        }
        let lin = ProtocolSpec::power_law(1.0, 10.0).unwrap();
        assert!((lin.accumulated_phase().unwrap() - 5.0 * PI).abs() < 1e-9);
        let idle = ProtocolSpec::idle(3.0).unwrap();
        assert_relative_eq!(idle.accumulated_phase().unwrap(), 6.0, max_relative = 1e-12);
    }

    #[test]
    fn accumulated_phase_scales_linearly_in_tau() {
        for &r in &[0.5, 3.0] {
            let a = ProtocolSpec::power_law(r, 2.0).unwrap().accumulated_phase().unwrap();
            let b = ProtocolSpec::power_law(r, 7.0).unwrap().accumulated_phase().unwrap();
            assert_relative_eq!(b / a, 3.5, max_relative = 1e-10);
        }
    }

    #[test]
    fn predicted_phases() {
        let tol = default_phase_tolerance::<f64>();
        let (th, c) = ProtocolSpec::power_law(1.0, 10.0).unwrap().predicted_interference(tol).unwrap();
        assert!((th - PI / 2.0).abs() < 1e-9);
        assert_eq!(c, Interference::Constructive);
        let (th, c) = ProtocolSpec::power_law(1.0, 11.0).unwrap().predicted_interference(tol).unwrap();
        assert!(th.min(2.0 * PI - th) < 1e-9);
        assert_eq!(c, Interference::Destructive);
        let (th, c) = ProtocolSpec::power_law(1.0, 12.0).unwrap().predicted_interference(tol).unwrap();
        assert!((th - 1.5 * PI).abs() < 1e-9);
        assert_eq!(c, Interference::Constructive);
        assert_eq!(classify_phase(1.0, tol), Interference::Intermediate);
    }

    #[test]
    fn single_precision() {
        let p = super::ProtocolSpec::<f32>::power_law(1.0, 1.0).unwrap();
        assert!((p.eval_g(0.5).unwrap() - 0.5).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn shape_invariants(r in 0.1f64..8.0, tau in 0.1f64..50.0, trig in any::<bool>(), m in 1usize..4, x in 0.0f64..1.0) {
            let fam = if trig { ProtocolFamily::Trigonometric } else { ProtocolFamily::PowerLaw };
            let p = ProtocolSpec::new(fam, r, tau).unwrap().with_cycles(m).unwrap();
            let u = x * tau;
            // Mirror symmetry about the peak.
            prop_assert!((p.coupling(tau - u) - p.coupling(tau + u)).abs() < 1e-12);
            // Bounded by g_c.
            let g = p.eval_g(x * p.duration()).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            // Periodic from cycle to cycle.
            let k = (m - 1) as f64;
            prop_assert!((p.coupling(u) - p.coupling(2.0 * k * tau + u)).abs() < 1e-9);
            prop_assert!((p.coupling(tau) - 1.0).abs() < 1e-12);
        }
    }
}
