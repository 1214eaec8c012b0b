//! Finite-size Lipkin–Meshkov–Glick model in the maximal pseudo-spin sector.
//!
//! Basis states are ordered `m = J, J-1, ..., -J`, so index `i` carries
//! `m = J - i` and counts excitations above the `g = 0` ground state.
//! `J+` moves amplitude from index `i` to `i - 1`.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};

use crate::error::{domain, integrity, Error, Result};
use crate::ode::{rk4_step, Rk4Work, VectorState};
use crate::optimize::{argmax, coordinate_refine, linspace, periodic_grid};
use crate::protocols::ProtocolSpec;
use crate::scalar::{cplx, expi, wrap_two_pi, CompensatedSum, Complex, Real};

/// Largest `N` accepted for pure-state work.
pub const PURE_STATE_CEILING: usize = 20_000;
/// Largest `N` accepted for density-matrix evolution.
pub const DENSITY_MATRIX_CEILING: usize = 400;

const NORM_DRIFT_LIMIT: f64 = 1e-6;
const TRACE_LIMIT: f64 = 1e-8;
const POSITIVITY_LIMIT: f64 = 1e-8;
/// `h |lambda|` stays below this inside the RK4 stability region.
const RK4_STABILITY: f64 = 2.5;

/// Collective spin operators for `N` spins-1/2, stored as their nonzero bands.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOps<T> {
    pub n: usize,
    pub j: T,
    /// `m[i] = J - i`.
    pub m: Vec<T>,
    /// `c[i] = <i-1| J+ |i> = sqrt(i (N + 1 - i))`, with `c[0] = 0`.
    pub c: Vec<T>,
}

pub fn build_collective_ops<T: Real>(n: usize) -> Result<CollectiveOps<T>> {
    if n < 2 {
        return domain(format!("need at least 2 spins, got {n}"));
    }
    if n > PURE_STATE_CEILING {
        return Err(Error::Capacity { what: "spin count", requested: n, ceiling: PURE_STATE_CEILING });
    }
    let j = T::from_usize_lossy(n) * T::half();
    let m = (0..=n).map(|i| j - T::from_usize_lossy(i)).collect();
    let c = (0..=n).map(|i| (T::from_usize_lossy(i) * T::from_usize_lossy(n + 1 - i)).sqrt()).collect();
    Ok(CollectiveOps { n, j, m, c })
}

impl<T: Real> CollectiveOps<T> {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn apply_jz(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        for i in 0..x.len() {
            y[i] = x[i] * self.m[i];
        }
    }

    pub fn apply_jplus(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let d = x.len();
        for i in 1..d {
            y[i - 1] = x[i] * self.c[i];
        }
        y[d - 1] = Complex::new(T::zero(), T::zero());
    }

    pub fn apply_jminus(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        y[0] = Complex::new(T::zero(), T::zero());
        for i in 1..x.len() {
            y[i] = x[i - 1] * self.c[i];
        }
    }

    /// `Jx x` and `Jy x` in one pass.
    pub fn apply_jx_jy(&self, x: &[Complex<T>], jx: &mut [Complex<T>], jy: &mut [Complex<T>]) {
        let d = x.len();
        let zero = Complex::new(T::zero(), T::zero());
        let half_i = cplx(T::zero(), -T::half());
        for i in 0..d {
            let up = if i + 1 < d { x[i + 1] * self.c[i + 1] } else { zero };
            let down = if i > 0 { x[i - 1] * self.c[i] } else { zero };
            jx[i] = (up + down) * T::half();
            jy[i] = (up - down) * half_i;
        }
    }

    pub fn jz(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, k| if i == k { cplx(self.m[i], T::zero()) } else { zero() })
    }

    pub fn jplus(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, k| if k == i + 1 { cplx(self.c[k], T::zero()) } else { zero() })
    }

    pub fn jminus(&self) -> DMatrix<Complex<T>> {
        self.jplus().adjoint()
    }

    pub fn jx(&self) -> DMatrix<Complex<T>> {
        (self.jplus() + self.jminus()) * cplx(T::half(), T::zero())
    }

    pub fn jy(&self) -> DMatrix<Complex<T>> {
        (self.jplus() - self.jminus()) * cplx(T::zero(), -T::half())
    }
}

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Real symmetric matrix with nonzero entries only on the diagonal and the
/// second off-diagonals, the structure of every LMG Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetric<T> {
    pub diag: Vec<T>,
    /// `off2[i] = H[i, i + 2]`.
    pub off2: Vec<T>,
}

impl<T: Real> BandedSymmetric<T> {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = x[i] * self.diag[i];
            if i + 2 < d {
                acc += x[i + 2] * self.off2[i];
            }
            if i >= 2 {
                acc += x[i - 2] * self.off2[i - 2];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let d = self.dim();
        let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.diag.clone()));
        for (i, &o) in self.off2.iter().enumerate() {
            h[(i, i + 2)] = o;
            h[(i + 2, i)] = o;
        }
        debug_assert_eq!(h.nrows(), d);
        h
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> T {
        let d = self.dim();
        (0..d)
            .map(|i| {
                let mut r = self.diag[i].abs();
                if i + 2 < d {
                    r += self.off2[i].abs();
                }
                if i >= 2 {
                    r += self.off2[i - 2].abs();
                }
                r
            })
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Sorted eigenvalues of the even-index and odd-index blocks, which the
    /// band structure decouples (spin-flip parity).
    pub fn eigenvalues_by_parity(&self) -> (Vec<T>, Vec<T>) {
        let block = |start: usize| -> Vec<T> {
            let idx: Vec<usize> = (start..self.dim()).step_by(2).collect();
            let k = idx.len();
            if k == 0 {
                return Vec::new();
            }
            let m = DMatrix::from_fn(k, k, |a, b| {
                if a == b {
                    self.diag[idx[a]]
                } else if a + 1 == b {
                    self.off2[idx[a]]
                } else if b + 1 == a {
                    self.off2[idx[b]]
                } else {
                    T::zero()
                }
            });
            let mut ev: Vec<T> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            ev
        };
        (block(0), block(1))
    }
}

/// `H = -omega Jz - (g^2 omega / N) Jx^2`.
pub fn lmg_hamiltonian<T: Real>(ops: &CollectiveOps<T>, g: T, omega: T) -> Result<BandedSymmetric<T>> {
    if !(g.abs() <= T::one()) {
        return domain(format!("coupling must satisfy |g| <= 1, got {}", g));
    }
    let (a, b) = split_hamiltonian(ops, omega);
    let shift = omega * ops.j;
    let g2 = g * g;
    Ok(BandedSymmetric {
        diag: a.diag.iter().zip(&b.diag).map(|(&x, &y)| x - shift + g2 * y).collect(),
        off2: b.off2.iter().map(|&y| g2 * y).collect(),
    })
}

/// `(A, B)` with `H(g) + omega J = A + g^2 B`; `A = omega (J - Jz)` is
/// diagonal and `B = -(omega / N) Jx^2`.
fn split_hamiltonian<T: Real>(ops: &CollectiveOps<T>, omega: T) -> (BandedSymmetric<T>, BandedSymmetric<T>) {
    let d = ops.dim();
    let c = &ops.c;
    let scale = omega / T::from_usize_lossy(ops.n) / T::lit(4.0);
    let cc = |i: usize| if i < d { c[i] } else { T::zero() };
    let a = BandedSymmetric { diag: (0..d).map(|i| omega * T::from_usize_lossy(i)).collect(), off2: vec![T::zero(); d.saturating_sub(2)] };
    let b = BandedSymmetric {
        diag: (0..d).map(|i| -scale * (c[i] * c[i] + cc(i + 1) * cc(i + 1))).collect(),
        off2: (0..d.saturating_sub(2)).map(|i| -scale * c[i + 1] * c[i + 2]).collect(),
    };
    (a, b)
}

/// Lowest levels of the LMG spectrum at fixed coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSpectrum<T> {
    pub ground: T,
    /// Lowest level of the odd-parity block.
    pub first_odd: T,
    /// Second level of the even-parity block (ground state is even).
    pub second_even: T,
}

impl<T: Real> LowSpectrum<T> {
    /// `E1 - E0` over both parities.
    pub fn gap(&self) -> T {
        self.first_odd.min(self.second_even) - self.ground
    }

    /// Gap reachable by the parity-conserving drive, `E2 - E0`.
    pub fn even_gap(&self) -> T {
        self.second_even - self.ground
    }
}

pub fn low_spectrum<T: Real>(ops: &CollectiveOps<T>, g: T, omega: T) -> Result<LowSpectrum<T>> {
    let h = lmg_hamiltonian(ops, g, omega)?;
    let (even, odd) = h.eigenvalues_by_parity();
    if even.len() < 2 || odd.is_empty() {
        return domain("spectrum too small for a gap");
    }
    Ok(LowSpectrum { ground: even[0], first_odd: odd[0], second_even: even[1] })
}

/// Least-squares slope of `ln gap` against `ln N`, returned as the positive
/// exponent `z` in `gap ∝ N^{-z}`.
pub fn gap_exponent<T: Real>(sizes: &[usize], gaps: &[T]) -> Result<T> {
    if sizes.len() != gaps.len() || sizes.len() < 2 {
        return domain("need at least two (N, gap) pairs");
    }
    let xs: Vec<T> = sizes.iter().map(|&n| T::from_usize_lossy(n).ln()).collect();
    let ys: Vec<T> = gaps.iter().map(|g| g.ln()).collect();
    let k = T::from_usize_lossy(xs.len());
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / k;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / k;
    let sxy = xs.iter().zip(&ys).fold(T::zero(), |a, (&x, &y)| a + (x - mx) * (y - my));
    let sxx = xs.iter().fold(T::zero(), |a, &x| a + (x - mx) * (x - mx));
    Ok(-sxy / sxx)
}

/// Pure state of the collective spin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState<T> {
    pub n: usize,
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Real> SpinState<T> {
    /// `|J, J>`, the `g = 0` ground state.
    pub fn top(n: usize) -> Self {
        let mut amplitudes = vec![zero(); n + 1];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Self { n, amplitudes }
    }

    pub fn new(n: usize, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != n + 1 {
            return domain(format!("expected {} amplitudes, got {}", n + 1, amplitudes.len()));
        }
        let s = Self { n, amplitudes };
        if (s.norm_sqr() - T::one()).abs() > T::lit(1e-10) {
            return domain(format!("state norm {} differs from 1", s.norm_sqr().sqrt()));
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> T {
        let acc: CompensatedSum<T> = self.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        acc.value()
    }

    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amplitudes.iter().zip(&other.amplitudes).fold(zero(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// `J - <Jz> = sum_i i |psi_i|^2`.
    pub fn excitations(&self) -> T {
        let acc: CompensatedSum<T> =
            self.amplitudes.iter().enumerate().map(|(i, a)| T::from_usize_lossy(i) * a.norm_sqr()).collect();
        acc.value()
    }

    /// Applies `exp(-i alpha Jz)`.
    pub fn rotate_z(&self, alpha: T) -> Self {
        let j = T::from_usize_lossy(self.n) * T::half();
        let amplitudes =
            self.amplitudes.iter().enumerate().map(|(i, &a)| a * expi(-alpha * (j - T::from_usize_lossy(i)))).collect();
        Self { n: self.n, amplitudes }
    }

    pub fn to_density(&self) -> SpinDensityMatrix<T> {
        let d = self.amplitudes.len();
        let rho = DMatrix::from_fn(d, d, |i, k| self.amplitudes[i] * self.amplitudes[k].conj());
        SpinDensityMatrix { n: self.n, rho }
    }
}

/// Mixed state of the collective spin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinDensityMatrix<T: Real> {
    pub n: usize,
    pub rho: DMatrix<Complex<T>>,
}

impl<T: Real> SpinDensityMatrix<T> {
    pub fn new(n: usize, rho: DMatrix<Complex<T>>) -> Result<Self> {
        if rho.nrows() != n + 1 || rho.ncols() != n + 1 {
            return domain(format!("density matrix must be {0}x{0}", n + 1));
        }
        let s = Self { n, rho };
        if (s.trace() - T::one()).abs() > T::lit(1e-10) {
            return domain(format!("trace {} differs from 1", s.trace()));
        }
        let herm = (&s.rho - s.rho.adjoint()).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
        if herm > T::lit(1e-10) {
            return domain("density matrix is not Hermitian");
        }
        if s.min_eigenvalue() < -T::lit(1e-10) {
            return domain("density matrix is not positive semidefinite");
        }
        Ok(s)
    }

    pub fn trace(&self) -> T {
        let acc: CompensatedSum<T> = (0..self.rho.nrows()).map(|i| self.rho[(i, i)].re).collect();
        acc.value()
    }

    pub fn purity(&self) -> T {
        let acc: CompensatedSum<T> = self.rho.iter().map(|z| z.norm_sqr()).collect();
        acc.value()
    }

    pub fn min_eigenvalue(&self) -> T {
        let h = (&self.rho + self.rho.adjoint()) * cplx(T::half(), T::zero());
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(T::one(), |a, b| a.min(b))
    }

    /// `<u| rho |u>`.
    pub fn expectation(&self, u: &[Complex<T>]) -> T {
        let d = u.len();
        let mut acc = CompensatedSum::<T>::default();
        for k in 0..d {
            let mut col: Complex<T> = zero();
            for i in 0..d {
                col += u[i].conj() * self.rho[(i, k)];
            }
            acc.add((col * u[k]).re);
        }
        acc.value()
    }

    pub fn excitations(&self) -> T {
        let acc: CompensatedSum<T> = (0..self.rho.nrows()).map(|i| T::from_usize_lossy(i) * self.rho[(i, i)].re).collect();
        acc.value()
    }
}

impl<T: Real> VectorState for Vec<Complex<T>> {
    type Time = T;

    fn assign_axpy(&mut self, base: &Self, c: T, k: &Self) {
        for ((y, b), k) in self.iter_mut().zip(base).zip(k) {
            *y = *b + *k * c;
        }
    }

    fn add_scaled(&mut self, c: T, k: &Self) {
        for (y, k) in self.iter_mut().zip(k) {
            *y += *k * c;
        }
    }
}

impl<T: Real> VectorState for DMatrix<Complex<T>> {
    type Time = T;

    fn assign_axpy(&mut self, base: &Self, c: T, k: &Self) {
        for ((y, b), k) in self.iter_mut().zip(base.iter()).zip(k.iter()) {
            *y = *b + *k * c;
        }
    }

    fn add_scaled(&mut self, c: T, k: &Self) {
        for (y, k) in self.iter_mut().zip(k.iter()) {
            *y += *k * c;
        }
    }
}

/// Step size for the fixed-step propagators: accuracy target from `tol`,
/// capped by the RK4 stability bound for the fastest mode.
fn step_size<T: Real>(tol: T, rate_bound: T) -> T {
    let accuracy = T::lit(0.06) * tol.max(T::lit(1e-14)).powf(T::lit(0.25));
    accuracy.min(T::lit(RK4_STABILITY) / rate_bound.max(T::lit(1e-300)))
}

/// Walks every half cycle with equal steps of at most `h_max`, calling
/// `at_cycle` after each full cycle.
fn march<T, S, F, C>(spec: &ProtocolSpec<T>, h_max: T, y: &mut S, f: &F, mut at_cycle: C) -> Result<()>
where
    T: Real,
    S: VectorState<Time = T>,
    F: Fn(T, &S, &mut S),
    C: FnMut(usize, &S) -> Result<()>,
{
    let mut work = Rk4Work::like(y);
    let steps = (spec.tau / h_max).ceil().to_f64_lossy().max(1.0) as usize;
    let h = spec.tau / T::from_usize_lossy(steps);
    for half in 0..2 * spec.cycles {
        let t0 = spec.tau * T::from_usize_lossy(half);
        for s in 0..steps {
            rk4_step(f, t0 + h * T::from_usize_lossy(s), h, y, &mut work);
        }
        if half % 2 == 1 {
            at_cycle(half / 2 + 1, y)?;
        }
    }
    Ok(())
}

/// Schrödinger evolution of `|J, J>` through every cycle of `spec`;
/// returns the state at each cycle end `t = 2 m tau`.
pub fn evolve_pure_cycles<T: Real>(n: usize, spec: &ProtocolSpec<T>, tol: T) -> Result<Vec<SpinState<T>>> {
    spec.validate()?;
    let ops = build_collective_ops::<T>(n)?;
    let (a, b) = split_hamiltonian(&ops, spec.omega);
    let gmax2 = spec.g_c * spec.g_c;
    let full = BandedSymmetric {
        diag: a.diag.iter().zip(&b.diag).map(|(&x, &y)| x + gmax2 * y).collect(),
        off2: b.off2.iter().map(|&y| gmax2 * y).collect(),
    };
    let h_max = step_size(tol, full.norm_bound().max(a.norm_bound()));
    let d = ops.dim();
    let f = |t: T, x: &Vec<Complex<T>>, y: &mut Vec<Complex<T>>| {
        let g = spec.coupling(t);
        let g2 = g * g;
        let minus_i = cplx(T::zero(), -T::one());
        for i in 0..d {
            let mut acc = x[i] * (a.diag[i] + g2 * b.diag[i]);
            if i + 2 < d {
                acc += x[i + 2] * (g2 * b.off2[i]);
            }
            if i >= 2 {
                acc += x[i - 2] * (g2 * b.off2[i - 2]);
            }
            y[i] = acc * minus_i;
        }
    };
    let mut psi = SpinState::<T>::top(n).amplitudes;
    let mut out = Vec::with_capacity(spec.cycles);
    march(spec, h_max, &mut psi, &f, |m, y| {
        let state = SpinState { n, amplitudes: y.clone() };
        let drift = (state.norm_sqr().sqrt() - T::one()).abs();
        if drift > T::lit(NORM_DRIFT_LIMIT) {
            return integrity(format!("norm drift {} after cycle {m}", drift));
        }
        out.push(state);
        Ok(())
    })?;
    Ok(out)
}

/// Final state of [`evolve_pure_cycles`].
pub fn evolve_pure<T: Real>(n: usize, spec: &ProtocolSpec<T>, tol: T) -> Result<SpinState<T>> {
    evolve_pure_cycles(n, spec, tol)?.pop().ok_or_else(|| Error::Integrity("no cycles evolved".into()))
}

/// Master-equation evolution with collapse operator `J+`:
/// `rho' = -i[H, rho] + kappa (J+ rho J- - {J- J+, rho} / 2)`.
/// Returns the state at each cycle end.
pub fn evolve_lindblad_cycles<T: Real>(
    n: usize,
    spec: &ProtocolSpec<T>,
    kappa: T,
    tol: T,
) -> Result<Vec<SpinDensityMatrix<T>>> {
    spec.validate()?;
    if !(kappa >= T::zero() && kappa.is_finite()) {
        return domain(format!("damping rate must be non-negative, got {}", kappa));
    }
    if n > DENSITY_MATRIX_CEILING {
        return Err(Error::Capacity { what: "spin count (density matrix)", requested: n, ceiling: DENSITY_MATRIX_CEILING });
    }
    let ops = build_collective_ops::<T>(n)?;
    let (a, b) = split_hamiltonian(&ops, spec.omega);
    let d = ops.dim();
    let c = ops.c.clone();
    let loss: Vec<T> = c.iter().map(|&x| x * x).collect();
    let gmax2 = spec.g_c * spec.g_c;
    let full = BandedSymmetric {
        diag: a.diag.iter().zip(&b.diag).map(|(&x, &y)| x + gmax2 * y).collect(),
        off2: b.off2.iter().map(|&y| gmax2 * y).collect(),
    };
    let max_loss = loss.iter().copied().fold(T::zero(), |x, y| x.max(y));
    let h_max = step_size(tol, T::two() * full.norm_bound().max(a.norm_bound()) + kappa * max_loss);

    let f = |t: T, rho: &DMatrix<Complex<T>>, out: &mut DMatrix<Complex<T>>| {
        let g = spec.coupling(t);
        let g2 = g * g;
        let minus_i = cplx(T::zero(), -T::one());
        // K = H rho; the commutator is K - K^dag for Hermitian rho.
        let mut k = DMatrix::from_element(d, d, zero::<T>());
        for col in 0..d {
            for i in 0..d {
                let mut acc = rho[(i, col)] * (a.diag[i] + g2 * b.diag[i]);
                if i + 2 < d {
                    acc += rho[(i + 2, col)] * (g2 * b.off2[i]);
                }
                if i >= 2 {
                    acc += rho[(i - 2, col)] * (g2 * b.off2[i - 2]);
                }
                k[(i, col)] = acc;
            }
        }
        for col in 0..d {
            for i in 0..d {
                let comm = k[(i, col)] - k[(col, i)].conj();
                let mut v = comm * minus_i;
                if kappa > T::zero() {
                    let sandwich = if i + 1 < d && col + 1 < d { rho[(i + 1, col + 1)] * (c[i + 1] * c[col + 1]) } else { zero() };
                    v += (sandwich - rho[(i, col)] * ((loss[i] + loss[col]) * T::half())) * kappa;
                }
                out[(i, col)] = v;
            }
        }
    };

    let mut rho = SpinState::<T>::top(n).to_density().rho;
    let mut out = Vec::with_capacity(spec.cycles);
    march(spec, h_max, &mut rho, &f, |m, r| {
        let state = SpinDensityMatrix { n, rho: (r + r.adjoint()) * cplx(T::half(), T::zero()) };
        let tr = state.trace();
        if (tr - T::one()).abs() > T::lit(TRACE_LIMIT) {
            return integrity(format!("trace drift {} after cycle {m}", tr - T::one()));
        }
        let min = state.min_eigenvalue();
        if min < -T::lit(POSITIVITY_LIMIT) {
            return integrity(format!("negative eigenvalue {} after cycle {m}", min));
        }
        out.push(state);
        Ok(())
    })?;
    Ok(out)
}

pub fn evolve_lindblad<T: Real>(n: usize, spec: &ProtocolSpec<T>, kappa: T, tol: T) -> Result<SpinDensityMatrix<T>> {
    evolve_lindblad_cycles(n, spec, kappa, tol)?.pop().ok_or_else(|| Error::Integrity("no cycles evolved".into()))
}

/// `v <- exp(a G) v` for the real antisymmetric `G = (J+^2 - J-^2) / 2`,
/// by Taylor series on sub-steps with `|a| ||G|| / k <= 1`.
fn squeeze_real(ops: &CollectiveOps<f64>, v: &mut [f64], a: f64) {
    let d = v.len();
    let c = &ops.c;
    let cc = |i: usize| if i < d { c[i] } else { 0.0 };
    // <i| J+^2 |i+2> = c[i+1] c[i+2].
    let up: Vec<f64> = (0..d).map(|i| 0.5 * cc(i + 1) * cc(i + 2)).collect();
    let bound = up.iter().fold(0.0f64, |m, &x| m.max(2.0 * x));
    let subs = ((a.abs() * bound).ceil() as usize).max(1);
    let h = a / subs as f64;
    let mut term = vec![0.0; d];
    let mut next = vec![0.0; d];
    for _ in 0..subs {
        term.copy_from_slice(v);
        for k in 1..80 {
            for i in 0..d {
                let plus = if i + 2 < d { up[i] * term[i + 2] } else { 0.0 };
                let minus = if i >= 2 { up[i - 2] * term[i - 2] } else { 0.0 };
                next[i] = (plus - minus) * h / k as f64;
            }
            let mut size = 0.0f64;
            for i in 0..d {
                v[i] += next[i];
                size = size.max(next[i].abs());
            }
            std::mem::swap(&mut term, &mut next);
            if size < 1e-18 {
                break;
            }
        }
    }
}

/// `exp((xi^* J+^2 - xi J-^2) / 2) |J, J>`.
///
/// With `xi = |xi| e^{i beta}` the generator is a z-rotation by `beta / 2`
/// of the real one, so the amplitude at index `i` is `v_i e^{i beta i / 2}`
/// with `v = exp(|xi| (J+^2 - J-^2) / 2) |J, J>` real.
pub fn spin_squeeze_state(n: usize, xi: Complex<f64>) -> Result<SpinState<f64>> {
    let ops = build_collective_ops::<f64>(n)?;
    let mut v = vec![0.0; n + 1];
    v[0] = 1.0;
    let mag = xi.modulus();
    squeeze_real(&ops, &mut v, mag);
    let beta = if mag > 0.0 { xi.im.atan2(xi.re) } else { 0.0 };
    Ok(SpinState { n, amplitudes: phase_vector(&v, beta) })
}

fn phase_vector(v: &[f64], beta: f64) -> Vec<Complex<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().enumerate().map(|(i, &x)| expi(beta * i as f64 * 0.5) * (x / norm)).collect()
}

/// States whose overlap with a trial pure state can be evaluated.
pub trait FidelityTarget {
    fn spin_count(&self) -> usize;
    /// `<u| rho |u>` for normalized `u`.
    fn overlap(&self, u: &[Complex<f64>]) -> f64;
}

impl FidelityTarget for SpinState<f64> {
    fn spin_count(&self) -> usize {
        self.n
    }

    fn overlap(&self, u: &[Complex<f64>]) -> f64 {
        u.iter().zip(&self.amplitudes).fold(zero::<f64>(), |acc, (a, b)| acc + a.conj() * b).norm_sqr()
    }
}

impl FidelityTarget for SpinDensityMatrix<f64> {
    fn spin_count(&self) -> usize {
        self.n
    }

    fn overlap(&self, u: &[Complex<f64>]) -> f64 {
        self.expectation(u)
    }
}

/// Best spin-squeezed approximation `|xi>` of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeFit {
    pub n: usize,
    pub xi_magnitude: f64,
    /// `beta = arg xi` in `[0, 2 pi)`.
    pub xi_phase: f64,
    pub fidelity: f64,
}

impl SqueezeFit {
    /// `|xi| N`, comparable with the oscillator `|s|`.
    pub fn scaled_magnitude(&self) -> f64 {
        self.xi_magnitude * self.n as f64
    }
}

const FIT_GRID: usize = 48;
const FIT_MAX_SCALED: f64 = 3.0;

/// Maximizes `F = <xi| rho |xi>` over `(|xi| N, beta)`: a 48 x 48 grid on
/// `[0, 3] x [0, 2 pi)` followed by alternating golden-section refinement.
pub fn fit_spin_squeezing<S: FidelityTarget + ?Sized>(state: &S) -> Result<SqueezeFit> {
    let n = state.spin_count();
    let ops = build_collective_ops::<f64>(n)?;
    let nf = n as f64;
    let mags = linspace(0.0, FIT_MAX_SCALED, FIT_GRID);
    let betas = periodic_grid(0.0, std::f64::consts::TAU, FIT_GRID);

    let mut v = vec![0.0; n + 1];
    v[0] = 1.0;
    let mut vectors = Vec::with_capacity(FIT_GRID);
    let mut last = 0.0;
    for &x in &mags {
        squeeze_real(&ops, &mut v, (x - last) / nf);
        last = x;
        vectors.push(v.clone());
    }
    let mut scores = Vec::with_capacity(FIT_GRID * FIT_GRID);
    for vec in &vectors {
        for &beta in &betas {
            scores.push(state.overlap(&phase_vector(vec, beta)));
        }
    }
    let best = argmax(&scores).ok_or_else(|| Error::Integrity("fidelity grid produced no finite value".into()))?;
    let (ix, ib) = (best / FIT_GRID, best % FIT_GRID);
    let anchor = vectors[ix].clone();
    let anchor_x = mags[ix];
    let eval = |x: f64, beta: f64| {
        let mut w = anchor.clone();
        squeeze_real(&ops, &mut w, (x - anchor_x) / nf);
        state.overlap(&phase_vector(&w, beta))
    };
    let dx = mags[1] - mags[0];
    let db = betas[1] - betas[0];
    let r = coordinate_refine(eval, (anchor_x, betas[ib]), (dx, db), (0.0, FIT_MAX_SCALED + dx), 40, 1e-10);
    let fidelity = r.value.clamp(0.0, 1.0);
    let (mag, beta) = if r.x <= 0.0 { (0.0, 0.0) } else { (r.x / nf, wrap_two_pi(r.y)) };
    Ok(SqueezeFit { n, xi_magnitude: mag, xi_phase: beta, fidelity })
}

/// `F0 = |<J, J|psi>|^2`.
pub fn ground_state_fidelity<T: Real>(state: &SpinState<T>) -> T {
    state.amplitudes[0].norm_sqr()
}

/// `F0 = <J, J| rho |J, J>`.
pub fn ground_state_fidelity_mixed<T: Real>(state: &SpinDensityMatrix<T>) -> T {
    state.rho[(0, 0)].re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::{integrate_b, predicted_squeezing};
    use crate::ode::Tolerance;
    use approx::assert_relative_eq;

    fn max_abs(m: &DMatrix<Complex<f64>>) -> f64 {
        m.iter().fold(0.0, |a, z| a.max(z.modulus()))
    }

    #[test]
    fn spin_one_matrices() {
        let ops = build_collective_ops::<f64>(2).unwrap();
        let jz = ops.jz();
        for (i, &m) in [1.0, 0.0, -1.0].iter().enumerate() {
            assert_eq!(jz[(i, i)].re, m);
        }
        assert!(build_collective_ops::<f64>(1).is_err());
        assert!(matches!(build_collective_ops::<f64>(PURE_STATE_CEILING + 1), Err(Error::Capacity { .. })));
    }

    #[test]
    fn commutators_and_casimir() {
        for &n in &[2usize, 5, 12, 31] {
            let ops = build_collective_ops::<f64>(n).unwrap();
            let (jx, jy, jz) = (ops.jx(), ops.jy(), ops.jz());
            let i = cplx(0.0, 1.0);
            let nf = n as f64;
            assert!(max_abs(&(&jx * &jy - &jy * &jx - &jz * i)) <= 1e-12 * nf);
            assert!(max_abs(&(&jy * &jz - &jz * &jy - &jx * i)) <= 1e-12 * nf);
            assert!(max_abs(&(&jz * &jx - &jx * &jz - &jy * i)) <= 1e-12 * nf);
            let j = ops.j;
            let cas = &jx * &jx + &jy * &jy + &jz * &jz - DMatrix::identity(n + 1, n + 1) * cplx(j * (j + 1.0), 0.0);
            assert!(max_abs(&cas) <= 1e-10 * nf * nf);
            let mut top = vec![zero::<f64>(); n + 1];
            top[0] = cplx(1.0, 0.0);
            let mut y = top.clone();
            ops.apply_jz(&top, &mut y);
            assert_eq!(y[0].re, j);
        }
    }

    #[test]
    fn matrix_free_operators_match_dense() {
        let ops = build_collective_ops::<f64>(9).unwrap();
        let x: Vec<Complex<f64>> = (0..10).map(|k| cplx((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        let xv = nalgebra::DVector::from_vec(x.clone());
        let (mut a, mut b) = (vec![zero(); 10], vec![zero(); 10]);
        ops.apply_jx_jy(&x, &mut a, &mut b);
        let ex = ops.jx() * &xv;
        let ey = ops.jy() * &xv;
        for k in 0..10 {
            assert!((a[k] - ex[k]).modulus() < 1e-13 && (b[k] - ey[k]).modulus() < 1e-13);
        }
        ops.apply_jplus(&x, &mut a);
        ops.apply_jminus(&x, &mut b);
        let ep = ops.jplus() * &xv;
        let em = ops.jminus() * &xv;
        for k in 0..10 {
            assert!((a[k] - ep[k]).modulus() < 1e-13 && (b[k] - em[k]).modulus() < 1e-13);
        }
    }

    #[test]
    fn hamiltonian_matches_dense_definition() {
        let ops = build_collective_ops::<f64>(8).unwrap();
        let h = lmg_hamiltonian(&ops, 0.7, 1.3).unwrap().to_dense().map(|x| cplx(x, 0.0));
        let jx = ops.jx();
        let dense = ops.jz() * cplx(-1.3, 0.0) - &jx * &jx * cplx(0.49 * 1.3 / 8.0, 0.0);
        assert!(max_abs(&(h - dense)) < 1e-13);
        assert!(lmg_hamiltonian(&ops, 1.2, 1.0).is_err());
    }

    #[test]
    fn free_ground_state() {
        let ops = build_collective_ops::<f64>(20).unwrap();
        let s = low_spectrum(&ops, 0.0, 1.0).unwrap();
        assert_relative_eq!(s.ground, -10.0, epsilon = 1e-12);
        assert_relative_eq!(s.gap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn holstein_primakoff_spacing() {
        let ops = build_collective_ops::<f64>(1000).unwrap();
        let s = low_spectrum(&ops, 0.5, 1.0).unwrap();
        let target = (1.0f64 - 0.25).sqrt();
        assert!((s.gap() / target - 1.0).abs() < 0.02, "{}", s.gap());
    }

    #[test]
    fn critical_gap_closes_as_cube_root() {
        let sizes = [50usize, 100, 200, 400];
        let gaps: Vec<f64> =
            sizes.iter().map(|&n| low_spectrum(&build_collective_ops(n).unwrap(), 1.0, 1.0).unwrap().even_gap()).collect();
        let z = gap_exponent(&sizes, &gaps).unwrap();
        assert!((z - 1.0 / 3.0).abs() < 0.05, "{z}");
    }

    #[test]
    fn squeeze_state_basics() {
        let s = spin_squeeze_state(30, cplx(0.0, 0.0)).unwrap();
        assert_eq!(s, SpinState::top(30));
        for &(n, x) in &[(10usize, 0.2), (200, 0.01), (1000, 0.002)] {
            let s = spin_squeeze_state(n, expi(1.1) * x).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn squeeze_state_matches_dense_exponential() {
        let n = 12;
        let ops = build_collective_ops::<f64>(n).unwrap();
        let xi = cplx(0.05, -0.08);
        let jp = ops.jplus();
        let jm = ops.jminus();
        let g = (&jp * &jp * xi.conj() - &jm * &jm * xi) * cplx(0.5, 0.0);
        // Dense exponential by scaling and squaring of a Taylor series.
        let mut e = DMatrix::identity(n + 1, n + 1);
        let small = &g * cplx(1.0 / 1024.0, 0.0);
        let mut term = DMatrix::identity(n + 1, n + 1);
        for k in 1..30 {
            term = &term * &small * cplx(1.0 / k as f64, 0.0);
            e += &term;
        }
        for _ in 0..10 {
            e = &e * &e;
        }
        let s = spin_squeeze_state(n, xi).unwrap();
        for i in 0..=n {
            assert!((s.amplitudes[i] - e[(i, 0)]).modulus() < 1e-12, "{i}");
        }
    }

    #[test]
    fn holstein_primakoff_overlap() {
        let n = 1000;
        let beta = 0.7;
        let xi = expi(beta) * (0.8814 / n as f64);
        let spin = spin_squeeze_state(n, xi).unwrap();
        // S(s)|0> with s = -N xi.
        let s = -xi * n as f64;
        let r = s.modulus();
        let step = s / r * r.tanh();
        let mut boson = vec![zero::<f64>(); n + 1];
        let mut a = cplx(1.0 / r.cosh().sqrt(), 0.0);
        for k in 0..=n / 2 {
            boson[2 * k] = a;
            a = a * step * ((2 * k + 1) as f64 / (2 * k + 2) as f64).sqrt();
        }
        let ov = boson.iter().zip(&spin.amplitudes).fold(zero::<f64>(), |acc, (b, s)| acc + b.conj() * s).norm_sqr();
        assert!(ov > 0.999, "{ov}");
    }

    #[test]
    fn self_fit_recovers_parameters() {
        for &(n, x, beta) in &[(60usize, 0.9, 2.0), (200, 1.7, 5.5), (100, 0.4, 0.1)] {
            let state = spin_squeeze_state(n, expi(beta) * (x / n as f64)).unwrap();
            let fit = fit_spin_squeezing(&state).unwrap();
            assert!((fit.scaled_magnitude() - x).abs() <= 1e-4, "{fit:?}");
            assert!(fit.fidelity >= 1.0 - 1e-8, "{fit:?}");
            let dphase = (fit.xi_phase - beta).rem_euclid(std::f64::consts::TAU);
            assert!(dphase.min(std::f64::consts::TAU - dphase) < 1e-3, "{fit:?}");
        }
    }

    #[test]
    fn sudden_cycle_leaves_state_unchanged() {
        let spec = ProtocolSpec::power_law(2.0, 1e-7).unwrap();
        let psi = evolve_pure(50, &spec, 1e-8).unwrap();
        assert!(ground_state_fidelity(&psi) > 1.0 - 1e-6);
        let rho = evolve_lindblad(10, &spec, 0.5, 1e-8).unwrap();
        assert!(ground_state_fidelity_mixed(&rho) > 1.0 - 1e-6);
    }

    #[test]
    fn pure_evolution_is_step_converged() {
        let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap();
        let a = evolve_pure(100, &spec, 1e-8).unwrap();
        let b = evolve_pure(100, &spec, 1e-11).unwrap();
        assert!((a.norm_sqr() - 1.0).abs() < 1e-8);
        assert!(1.0 - a.fidelity(&b) < 1e-8);
    }

    #[test]
    fn norm_drift_within_target() {
        let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap().with_cycles(3).unwrap();
        for s in evolve_pure_cycles(1000, &spec, 1e-8).unwrap() {
            assert!((s.norm_sqr().sqrt() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn lindblad_without_damping_matches_pure() {
        let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap().with_cycles(2).unwrap();
        let pure = evolve_pure_cycles(16, &spec, 1e-10).unwrap();
        let mixed = evolve_lindblad_cycles(16, &spec, 0.0, 1e-10).unwrap();
        for (p, m) in pure.iter().zip(&mixed) {
            let f = m.expectation(&p.amplitudes);
            assert!((f - 1.0).abs() <= 1e-6, "{f}");
        }
    }

    #[test]
    fn dark_state_is_stationary() {
        let spec = ProtocolSpec::idle(1.5).unwrap();
        for &kappa in &[0.0, 0.3, 2.0] {
            let rho = evolve_lindblad(12, &spec, kappa, 1e-9).unwrap();
            assert!((ground_state_fidelity_mixed(&rho) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn damping_degrades_squeezing() {
        let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap();
        let fits: Vec<SqueezeFit> = [0.0, 0.01, 0.05, 0.2]
            .iter()
            .map(|&k| fit_spin_squeezing(&evolve_lindblad(20, &spec, k, 1e-8).unwrap()).unwrap())
            .collect();
        assert!(fits.windows(2).all(|w| w[1].xi_magnitude < w[0].xi_magnitude), "{fits:?}");
        assert!(evolve_lindblad(10, &spec, -0.1, 1e-8).is_err());
        assert!(matches!(evolve_lindblad(DENSITY_MATRIX_CEILING + 2, &spec, 0.0, 1e-8), Err(Error::Capacity { .. })));
    }

    #[test]
    fn excitations_approach_oscillator() {
        let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap();
        let osc = integrate_b(&spec, Tolerance::default()).unwrap().last().excitations();
        let dev: Vec<f64> = [100usize, 400]
            .iter()
            .map(|&n| (evolve_pure(n, &spec, 1e-8).unwrap().excitations() - osc).abs())
            .collect();
        assert!(dev[1] < dev[0], "{dev:?}");
        assert!(dev[1] < 0.05 * osc, "{dev:?} {osc}");
        let _ = predicted_squeezing(2.0, 0.5);
    }

    #[test]
    fn fit_near_oscillator_prediction() {
        let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap();
        let fit = fit_spin_squeezing(&evolve_pure(100, &spec, 1e-8).unwrap()).unwrap();
        assert!((fit.scaled_magnitude() / 0.8814 - 1.0).abs() < 0.15, "{fit:?}");
    }
}
