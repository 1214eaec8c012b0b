//! Adaptive Dormand–Prince 5(4) integration for small real ODE systems.
//!
//! Right-hand sides with kinks (the drive protocols are only piecewise
//! smooth) are integrated segment by segment: [`integrate_piecewise`] never
//! steps across a breakpoint.

use crate::error::{integrity, Result};
use crate::scalar::Real;

/// Mixed relative/absolute local error tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub rel: T,
    pub abs: T,
}

impl<T: Real> Tolerance<T> {
    pub fn new(rel: T, abs: T) -> Self {
        Self { rel, abs }
    }

    /// `rel` with an absolute floor one hundred times tighter.
    pub fn relative(rel: T) -> Self {
        Self { rel, abs: rel * T::lit(1e-2) }
    }
}

impl Default for Tolerance<f64> {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12 }
    }
}

/// Step statistics accumulated over an integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl StepStats {
    fn merge(&mut self, other: StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
    }
}

const MAX_STEPS: usize = 5_000_000;

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<T: Real, const D: usize>(y: &[T; D], terms: &[(T, &[T; D])]) -> [T; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += *c * k[i];
        }
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` (with `t1 > t0`).
///
/// `observe` runs after every accepted step with the new time and state; an
/// error from it aborts the integration.
pub fn integrate<T, F, O, const D: usize>(
    f: &F,
    t0: T,
    t1: T,
    y0: [T; D],
    tol: Tolerance<T>,
    observe: &mut O,
) -> Result<([T; D], StepStats)>
where
    T: Real,
    F: Fn(T, &[T; D]) -> [T; D],
    O: FnMut(T, &[T; D]) -> Result<()>,
{
    let mut stats = StepStats::default();
    let span = t1 - t0;
    if span <= T::zero() {
        return Ok((y0, stats));
    }
    let lit = T::lit;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;

    let scale = |a: &[T; D], b: &[T; D], i: usize| tol.abs + tol.rel * a[i].abs().max(b[i].abs());
    let rms = |v: &[T; D], w: &[T; D], y: &[T; D]| {
        let mut s = T::zero();
        for i in 0..D {
            let r = v[i] / scale(y, w, i);
            s += r * r;
        }
        (s / T::from_usize_lossy(D)).sqrt()
    };

    // Hairer's starting step heuristic.
    let mut h = {
        let d0 = rms(&y, &y, &y);
        let d1 = rms(&k1, &y, &y);
        let h0 = if d0 < lit(1e-5) || d1 < lit(1e-5) { lit(1e-6) } else { lit(0.01) * d0 / d1 };
        let h0 = h0.min(span);
        let y1 = axpy(&y, &[(h0, &k1)]);
        let k = f(t + h0, &y1);
        stats.evaluations += 1;
        let mut diff = [T::zero(); D];
        for i in 0..D {
            diff[i] = k[i] - k1[i];
        }
        let d2 = rms(&diff, &y, &y) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= lit(1e-15) {
            (h0 * lit(1e-3)).max(lit(1e-6))
        } else {
            (lit(0.01) / dm).powf(lit(0.2))
        };
        (lit(100.0) * h0).min(h1).min(span)
    };
    let h_floor = span * T::epsilon() * lit(16.0);

    let mut steps = 0usize;
    loop {
        if t >= t1 {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return integrity("adaptive integrator exceeded the step budget");
        }
        let last = t + h >= t1 || (t1 - (t + h)) < h_floor;
        let h_eff = if last { t1 - t } else { h };

        let k2 = f(t + lit(C2) * h_eff, &axpy(&y, &[(h_eff * lit(A21), &k1)]));
        let k3 = f(t + lit(C3) * h_eff, &axpy(&y, &[(h_eff * lit(A31), &k1), (h_eff * lit(A32), &k2)]));
        let k4 = f(
            t + lit(C4) * h_eff,
            &axpy(&y, &[(h_eff * lit(A41), &k1), (h_eff * lit(A42), &k2), (h_eff * lit(A43), &k3)]),
        );
        let k5 = f(
            t + lit(C5) * h_eff,
            &axpy(
                &y,
                &[(h_eff * lit(A51), &k1), (h_eff * lit(A52), &k2), (h_eff * lit(A53), &k3), (h_eff * lit(A54), &k4)],
            ),
        );
        let k6 = f(
            t + h_eff,
            &axpy(
                &y,
                &[
                    (h_eff * lit(A61), &k1),
                    (h_eff * lit(A62), &k2),
                    (h_eff * lit(A63), &k3),
                    (h_eff * lit(A64), &k4),
                    (h_eff * lit(A65), &k5),
                ],
            ),
        );
        let y_new = axpy(
            &y,
            &[(h_eff * lit(B1), &k1), (h_eff * lit(B3), &k3), (h_eff * lit(B4), &k4), (h_eff * lit(B5), &k5), (h_eff * lit(B6), &k6)],
        );
        let t_new = if last { t1 } else { t + h_eff };
        let k7 = f(t_new, &y_new);
        stats.evaluations += 6;

        let mut err = [T::zero(); D];
        for i in 0..D {
            err[i] = h_eff
                * (lit(E1) * k1[i] + lit(E3) * k3[i] + lit(E4) * k4[i] + lit(E5) * k5[i] + lit(E6) * k6[i] + lit(E7) * k7[i]);
        }
        let e = rms(&err, &y_new, &y);
        if !e.is_finite() {
            return integrity(format!("non-finite error estimate at t = {}", t.to_f64_lossy()));
        }

        if e <= T::one() {
            t = t_new;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            observe(t, &y)?;
            let fac = if e == T::zero() { lit(5.0) } else { (lit(0.9) * e.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2)) };
            h = h_eff * fac;
        } else {
            stats.rejected += 1;
            h = h_eff * (lit(0.9) * e.powf(lit(-0.2))).max(lit(0.1));
            if h < h_floor {
                return integrity(format!("step size underflow at t = {}", t.to_f64_lossy()));
            }
        }
    }
    Ok((y, stats))
}

/// Integrates across consecutive segments `[b_i, b_{i+1}]` of a sorted
/// breakpoint list, restarting the step controller at every breakpoint.
///
/// `at_breakpoint` is called with the index of every breakpoint reached
/// after the first one.
pub fn integrate_piecewise<T, F, O, B, const D: usize>(
    f: &F,
    breakpoints: &[T],
    y0: [T; D],
    tol: Tolerance<T>,
    observe: &mut O,
    at_breakpoint: &mut B,
) -> Result<([T; D], StepStats)>
where
    T: Real,
    F: Fn(T, &[T; D]) -> [T; D],
    O: FnMut(T, &[T; D]) -> Result<()>,
    B: FnMut(usize, &[T; D]) -> Result<()>,
{
    let mut y = y0;
    let mut stats = StepStats::default();
    for (i, w) in breakpoints.windows(2).enumerate() {
        let (y_end, s) = integrate(f, w[0], w[1], y, tol, observe)?;
        y = y_end;
        stats.merge(s);
        at_breakpoint(i + 1, &y)?;
    }
    Ok((y, stats))
}

/// Classic fixed-step fourth-order Runge–Kutta step for vector states,
/// used by the large spin-space propagators.
pub fn rk4_step<S, F>(f: &F, t: S::Time, h: S::Time, y: &mut S, work: &mut Rk4Work<S>)
where
    S: VectorState,
    F: Fn(S::Time, &S, &mut S),
{
    let half = h * S::Time::half();
    let sixth = h / S::Time::lit(6.0);
    let Rk4Work { k1, k2, k3, k4, tmp } = work;
    f(t, y, k1);
    tmp.assign_axpy(y, half, k1);
    f(t + half, tmp, k2);
    tmp.assign_axpy(y, half, k2);
    f(t + half, tmp, k3);
    tmp.assign_axpy(y, h, k3);
    f(t + h, tmp, k4);
    y.add_scaled(sixth, k1);
    y.add_scaled(sixth * S::Time::two(), k2);
    y.add_scaled(sixth * S::Time::two(), k3);
    y.add_scaled(sixth, k4);
}

/// Linear-space operations needed by [`rk4_step`].
pub trait VectorState: Clone {
    type Time: Real;
    /// `self <- base + c * k`
    fn assign_axpy(&mut self, base: &Self, c: Self::Time, k: &Self);
    /// `self <- self + c * k`
    fn add_scaled(&mut self, c: Self::Time, k: &Self);
}

/// Scratch buffers reused across [`rk4_step`] calls.
pub struct Rk4Work<S> {
    k1: S,
    k2: S,
    k3: S,
    k4: S,
    tmp: S,
}

impl<S: Clone> Rk4Work<S> {
    pub fn like(template: &S) -> Self {
        Self { k1: template.clone(), k2: template.clone(), k3: template.clone(), k4: template.clone(), tmp: template.clone() }
    }
}
