//! Quantum-battery observables of the squeezed vacuum left behind by a
//! critical cycle: work statistics, ergotropy and multi-cycle gain.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};

use crate::error::{domain, Result};
use crate::open_gaussian::GaussianCovariance;
use crate::oscillator::universal_angle;
use crate::scalar::{cplx, expi, CompensatedSum, Complex, Real};

/// Work distribution `P(W = 2 n omega)` of a squeezed vacuum measured in the
/// undriven Fock basis. Odd levels carry no weight and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution<T> {
    pub omega: T,
    /// `probs[n] = P(W = 2 n omega)` for `n = 0..=n_max`.
    pub probs: Vec<T>,
    pub n_max: usize,
    /// Probability beyond `n_max`.
    pub tail_mass: T,
}

impl<T: Real> WorkDistribution<T> {
    /// `(n, W / omega, P)` rows.
    pub fn levels(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.probs.iter().enumerate().map(|(n, &p)| (n, 2 * n, p))
    }

    fn moment(&self, k: i32) -> T {
        let acc: CompensatedSum<T> =
            self.levels().map(|(_, w, p)| p * (T::from_usize_lossy(w) * self.omega).powi(k)).collect();
        acc.value()
    }

    pub fn mean(&self) -> T {
        self.moment(1)
    }

    pub fn variance(&self) -> T {
        let m = self.mean();
        self.moment(2) - m * m
    }

    /// `Delta W / <W>`.
    pub fn fluctuation_ratio(&self) -> T {
        self.variance().sqrt() / self.mean()
    }

    pub fn total_probability(&self) -> T {
        let acc: CompensatedSum<T> = self.probs.iter().copied().collect();
        acc.value()
    }
}

/// Even-level populations of `S(s)|0>` from the ratio recurrence
/// `P_{n+1} / P_n = tanh^2 s (2n+1) / (2n+2)`, `P_0 = 1 / cosh s`.
///
/// Truncation stops once the geometric tail bound `P_n t^2 / (1 - t^2)`
/// drops below `tail_bound`.
pub fn work_distribution<T: Real>(s: T, omega: T, tail_bound: T) -> Result<WorkDistribution<T>> {
    if !(s >= T::zero() && s.is_finite()) {
        return domain(format!("squeeze magnitude must be non-negative, got {}", s));
    }
    if !(tail_bound > T::zero() && tail_bound <= T::lit(1e-10)) {
        return domain(format!("tail bound must lie in (0, 1e-10], got {}", tail_bound));
    }
    let t2 = {
        let t = s.tanh();
        t * t
    };
    let mut probs = vec![T::one() / s.cosh()];
    let tail_factor = if t2 < T::one() { t2 / (T::one() - t2) } else { T::zero() };
    loop {
        let n = probs.len() - 1;
        let p = probs[n];
        if p * tail_factor < tail_bound || t2 == T::zero() {
            break;
        }
        let ratio = t2 * T::from_usize_lossy(2 * n + 1) / T::from_usize_lossy(2 * n + 2);
        probs.push(p * ratio);
    }
    let n_max = probs.len() - 1;
    let sum: CompensatedSum<T> = probs.iter().copied().collect();
    let tail_mass = (T::one() - sum.value()).max(T::zero());
    Ok(WorkDistribution { omega, probs, n_max, tail_mass })
}

/// `<W> = omega sinh^2 s`.
pub fn mean_work<T: Real>(s: T, omega: T) -> T {
    let sh = s.sinh();
    omega * sh * sh
}

/// `Delta^2 W = 2 omega^2 sinh^2 s cosh^2 s`.
pub fn variance_work<T: Real>(s: T, omega: T) -> T {
    let x = s.sinh() * s.cosh() * omega;
    T::two() * x * x
}

/// `<W> = omega tan^{-2}(pi / (2 + 2 z_nu r))` for the universal one-cycle state.
pub fn mean_work_universal<T: Real>(r: T, z_nu: T, omega: T) -> T {
    let t = universal_angle(r, z_nu).tan();
    omega / (t * t)
}

/// `Delta^2 W = 2 omega^2 cos^2(x) / sin^4(x)`, `x = pi / (2 + 2 z_nu r)`.
pub fn variance_work_universal<T: Real>(r: T, z_nu: T, omega: T) -> T {
    let x = universal_angle(r, z_nu);
    let (s, c) = (x.sin(), x.cos());
    T::two() * omega * omega * c * c / (s * s * s * s)
}

/// `Delta W / <W> = sqrt(2) / cos(pi / (2 + 2 z_nu r))`.
pub fn work_fluctuations<T: Real>(r: T, z_nu: T) -> T {
    T::two().sqrt() / universal_angle(r, z_nu).cos()
}

/// Small-`z_nu r` asymptote `2^{3/2} / (pi z_nu r)` of [`work_fluctuations`].
pub fn work_fluctuations_small<T: Real>(r: T, z_nu: T) -> T {
    T::two() * T::two().sqrt() / (T::pi() * z_nu * r)
}

/// Large-`z_nu r` plateau `sqrt(2)` of [`work_fluctuations`].
pub fn work_fluctuations_large<T: Real>() -> T {
    T::two().sqrt()
}

/// Ergotropy of a pure squeezed vacuum; all stored energy is extractable.
pub fn ergotropy_squeezed_vacuum<T: Real>(s: T, omega: T) -> T {
    mean_work(s, omega)
}

/// Ergotropy `omega (sigma - nu)` of a zero-mean Gaussian state: total energy
/// minus that of the thermal state with the same symplectic eigenvalue.
pub fn gaussian_ergotropy<T: Real>(c: &GaussianCovariance<T>, omega: T) -> T {
    omega * (c.sigma - c.symplectic_eigenvalue()).max(T::zero())
}

/// Work gain after `M` cycles relative to one cycle, for `|s|_M = M |s|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiCycleGain<T> {
    /// `(e^{2Ms} + e^{-2Ms} - 2) / (e^{2s} + e^{-2s} - 2)`.
    pub exact: T,
    /// Leading exponential `e^{(2M - 2) s}`.
    pub asymptote: T,
}

pub fn multi_cycle_gain<T: Real>(cycles: usize, s: T) -> Result<MultiCycleGain<T>> {
    if cycles == 0 {
        return domain("cycle count must be at least 1");
    }
    if !(s > T::zero()) {
        return domain(format!("squeeze magnitude must be positive, got {}", s));
    }
    let m = T::from_usize_lossy(cycles);
    let ratio = (m * s).sinh() / s.sinh();
    Ok(MultiCycleGain { exact: ratio * ratio, asymptote: ((T::two() * m - T::two()) * s).exp() })
}

/// Density matrix on Fock levels `0..=n_max` of a single mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFockState<T: Real> {
    pub rho: DMatrix<Complex<T>>,
    pub omega: T,
    /// Population discarded by the truncation.
    pub tail_mass: T,
}

const HERMITICITY_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

impl<T: Real> TruncatedFockState<T> {
    pub fn new(rho: DMatrix<Complex<T>>, omega: T, tail_mass: T) -> Result<Self> {
        let state = Self { rho, omega, tail_mass };
        state.check_structure()?;
        Ok(state)
    }

    /// Projector onto a (possibly truncated) pure state.
    pub fn from_pure(amplitudes: &[Complex<T>], omega: T) -> Result<Self> {
        let n = amplitudes.len();
        let norm: CompensatedSum<T> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let rho = DMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Self::new(rho, omega, (T::one() - norm.value()).max(T::zero()))
    }

    /// Diagonal state with the given level populations.
    pub fn diagonal(populations: &[T], omega: T) -> Result<Self> {
        let n = populations.len();
        let total: CompensatedSum<T> = populations.iter().copied().collect();
        let rho = DMatrix::from_fn(n, n, |i, j| if i == j { cplx(populations[i], T::zero()) } else { Complex::new(T::zero(), T::zero()) });
        Self::new(rho, omega, (T::one() - total.value()).max(T::zero()))
    }

    /// `S(s)|0>` with `s = magnitude e^{i phase}`, truncated once the
    /// remaining population is below `tail_bound`.
    pub fn squeezed_vacuum(magnitude: T, phase: T, omega: T, tail_bound: T) -> Result<Self> {
        let dist = work_distribution(magnitude, omega, tail_bound)?;
        let step = expi(phase) * magnitude.tanh();
        let dim = 2 * dist.n_max + 1;
        let mut amps = vec![Complex::new(T::zero(), T::zero()); dim];
        let mut a = cplx(magnitude.cosh().sqrt().recip(), T::zero());
        for n in 0..=dist.n_max {
            amps[2 * n] = a;
            let k = T::from_usize_lossy(2 * n + 1) / T::from_usize_lossy(2 * n + 2);
            a = a * step * k.sqrt();
        }
        Self::from_pure(&amps, omega)
    }

    /// Fock-space image of a zero-mean Gaussian state `S(zeta) rho_th S(zeta)^dag`.
    ///
    /// The squeeze is applied in an enlarged space of `dim + pad` levels and
    /// the result truncated to `dim` levels.
    pub fn from_covariance(c: &GaussianCovariance<T>, omega: T, dim: usize, pad: usize) -> Result<Self> {
        let nu = c.symplectic_eigenvalue();
        if nu < T::half() * (T::one() - T::lit(1e-10)) {
            return domain("covariance violates the uncertainty bound");
        }
        let nu = nu.max(T::half());
        let nbar = nu - T::half();
        let two_r = (c.sigma / nu).max(T::one()).acosh();
        let r = two_r * T::half();
        // <a^2> = -sigma_01 fixes the squeeze direction.
        let phase = if c.sigma01.norm_sqr() > T::zero() { (-c.sigma01.im).atan2(-c.sigma01.re) } else { T::zero() };
        let big = dim + pad;
        let squeeze = squeeze_operator(r, phase, big);
        // Thermal populations n̄^k / (n̄+1)^{k+1}.
        let q = nbar / (nbar + T::one());
        let mut rho = DMatrix::from_element(big, big, Complex::new(T::zero(), T::zero()));
        let mut p = T::one() / (nbar + T::one());
        for k in 0..big {
            if p < T::lit(1e-18) && k > 0 {
                break;
            }
            let col = squeeze.column(k);
            rho += (&col * col.adjoint()) * cplx(p, T::zero());
            p *= q;
        }
        let rho = rho.view((0, 0), (dim, dim)).into_owned();
        let trace: CompensatedSum<T> = (0..dim).map(|i| rho[(i, i)].re).collect();
        Self::new(rho, omega, (T::one() - trace.value()).max(T::zero()))
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Mean energy `sum_n n omega rho_nn`.
    pub fn energy(&self) -> T {
        let acc: CompensatedSum<T> =
            (0..self.dim()).map(|n| T::from_usize_lossy(n) * self.omega * self.rho[(n, n)].re).collect();
        acc.value()
    }

    fn check_structure(&self) -> Result<()> {
        let n = self.rho.nrows();
        if n == 0 || self.rho.ncols() != n {
            return domain("density matrix must be square and non-empty");
        }
        let tol = T::lit(HERMITICITY_TOL);
        for i in 0..n {
            for j in i..n {
                if (self.rho[(i, j)] - self.rho[(j, i)].conj()).modulus() > tol {
                    return domain(format!("density matrix not Hermitian at ({i}, {j})"));
                }
            }
        }
        let trace: CompensatedSum<T> = (0..n).map(|i| self.rho[(i, i)].re).collect();
        if (trace.value() + self.tail_mass - T::one()).abs() > T::lit(1e-8) {
            return domain(format!("trace {} inconsistent with tail mass {}", trace.value(), self.tail_mass));
        }
        Ok(())
    }
}

/// Matrix of `exp((s a^dag^2 - s^* a^2) / 2)` on `dim` Fock levels, from the
/// eigendecomposition of the Hermitian generator.
fn squeeze_operator<T: Real>(r: T, phase: T, dim: usize) -> DMatrix<Complex<T>> {
    let s = expi(phase) * r;
    // Generator G = (s a†² - s* a²)/2 is anti-Hermitian; H = i G is Hermitian.
    let mut h = DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero()));
    let i = cplx(T::zero(), T::one());
    for n in 0..dim.saturating_sub(2) {
        // <n+2| a†² |n> = sqrt((n+1)(n+2))
        let amp = (T::from_usize_lossy(n + 1) * T::from_usize_lossy(n + 2)).sqrt() * T::half();
        h[(n + 2, n)] = i * s * amp;
        h[(n, n + 2)] = (i * s * amp).conj();
    }
    let eig = SymmetricEigen::new(h);
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| expi(-l)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Maximal work extractable by a cyclic unitary:
/// `sum_n eps_n (rho_nn - r_n)` with `eps_n = n omega` ascending and `r_n` the
/// eigenvalues of `rho` in descending order.
pub fn ergotropy_general<T: Real>(state: &TruncatedFockState<T>) -> Result<T> {
    state.check_structure()?;
    if !(state.tail_mass < T::lit(1e-8)) {
        return domain(format!("truncation tail {} too large for a reliable ergotropy", state.tail_mass));
    }
    let eig = SymmetricEigen::new(state.rho.clone());
    let mut r: Vec<T> = eig.eigenvalues.iter().copied().collect();
    let min = r.iter().copied().fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b));
    if min < -T::lit(POSITIVITY_TOL) {
        return domain(format!("density matrix not positive semidefinite (eigenvalue {})", min));
    }
    r.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let passive: CompensatedSum<T> = r.iter().enumerate().map(|(n, &p)| T::from_usize_lossy(n) * state.omega * p).collect();
    Ok((state.energy() - passive.value()).max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::predicted_squeezing;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn vacuum_distribution() {
        let d = work_distribution(0.0, 1.0, 1e-12).unwrap();
        assert_eq!(d.probs, vec![1.0]);
        assert_eq!(d.n_max, 0);
        assert_eq!(d.tail_mass, 0.0);
    }

    #[test]
    fn moments_match_closed_forms() {
        for &s in &[0.1f64, 0.5493, 0.8814, 1.317, 2.5] {
            let d = work_distribution(s, 1.3, 1e-12).unwrap();
            assert!((d.total_probability() + d.tail_mass - 1.0).abs() < 1e-12);
            assert!((d.mean() - mean_work(s, 1.3)).abs() <= 1e-10 * mean_work(s, 1.3).max(1.0));
            assert!((d.variance() - variance_work(s, 1.3)).abs() <= 1e-8 * variance_work(s, 1.3));
        }
    }

    #[test]
    fn r4_distribution_is_monotone_and_heavy_tailed() {
        let s = predicted_squeezing(4.0, 0.5);
        assert!((s - 1.3170).abs() < 1e-4);
        let d = work_distribution(s, 1.0, 1e-12).unwrap();
        assert!(d.probs.windows(2).all(|w| w[1] < w[0]));
        // Non-Gaussian: strongly skewed, with a mode at W = 0.
        let mean = d.mean();
        let sd = d.variance().sqrt();
        let third: f64 = d.levels().map(|(_, w, p)| p * ((w as f64) - mean).powi(3)).sum();
        assert!(third / sd.powi(3) > 1.0);
    }

    #[test]
    fn bad_arguments() {
        assert!(work_distribution(-0.1, 1.0, 1e-12).is_err());
        assert!(work_distribution(0.5, 1.0, 1e-6).is_err());
        assert!(multi_cycle_gain(0, 0.5).is_err());
        assert!(multi_cycle_gain(2, 0.0).is_err());
    }

    #[test]
    fn universal_work_values() {
        assert_eq!(mean_work(0.0, 1.0), 0.0);
        assert_eq!(variance_work(0.0, 1.0), 0.0);
        assert_relative_eq!(mean_work_universal(1.0, 0.5, 1.0), 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(mean_work_universal(2.0, 0.5, 1.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(variance_work_universal(2.0, 0.5, 1.0), 4.0, epsilon = 1e-13);
        for &r in &[0.3, 1.0, 2.0, 5.0] {
            let s = predicted_squeezing(r, 0.5);
            assert_relative_eq!(mean_work(s, 2.0), mean_work_universal(r, 0.5, 2.0), max_relative = 1e-12);
            assert_relative_eq!(variance_work(s, 2.0), variance_work_universal(r, 0.5, 2.0), max_relative = 1e-12);
            assert_relative_eq!(variance_work(s, 1.0).sqrt() / mean_work(s, 1.0), work_fluctuations(r, 0.5), max_relative = 1e-12);
        }
    }

    #[test]
    fn fluctuation_ratio_values() {
        assert!((work_fluctuations(200.0, 0.5) - 1.4143).abs() < 1e-3);
        assert_relative_eq!(work_fluctuations(1.0, 0.5), 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        let small = work_fluctuations(0.02, 0.5);
        assert!((small / work_fluctuations_small(0.02, 0.5) - 1.0).abs() < 0.02);
    }

    #[test]
    fn fluctuation_ratio_decreases() {
        let xs: Vec<f64> = (1..200).map(|k| work_fluctuations(0.05 * k as f64, 1.0)).collect();
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gain() {
        let g = multi_cycle_gain(1, 0.7).unwrap();
        assert_relative_eq!(g.exact, 1.0, epsilon = 1e-14);
        assert_relative_eq!(g.asymptote, 1.0);
        let s: f64 = 0.5493;
        let g = multi_cycle_gain(5, s).unwrap();
        let direct = ((10.0 * s).exp() + (-10.0 * s).exp() - 2.0) / ((2.0 * s).exp() + (-2.0 * s).exp() - 2.0);
        assert_relative_eq!(g.exact, direct, max_relative = 1e-12);
        // The exponential is the growth law, not the prefactor: successive
        // gains approach the ratio e^{2s}.
        let g4 = multi_cycle_gain(4, s).unwrap();
        let g8 = multi_cycle_gain(8, s).unwrap();
        let g9 = multi_cycle_gain(9, s).unwrap();
        assert!(((g.exact / g4.exact) / (2.0 * s).exp() - 1.0).abs() < 3e-2);
        assert!(((g9.exact / g8.exact) / (2.0 * s).exp() - 1.0).abs() < 1e-3);
        assert_relative_eq!(g.exact / g.asymptote, g9.exact / g9.asymptote, max_relative = 3e-2);
    }

    #[test]
    fn ergotropy_of_passive_and_fock_states() {
        let passive = TruncatedFockState::diagonal(&[0.5, 0.3, 0.15, 0.05], 1.0).unwrap();
        assert!(ergotropy_general(&passive).unwrap().abs() < 1e-14);
        let fock2 = TruncatedFockState::diagonal(&[0.0, 0.0, 1.0], 1.7).unwrap();
        assert_relative_eq!(ergotropy_general(&fock2).unwrap(), 3.4, epsilon = 1e-12);
    }

    #[test]
    fn ergotropy_rejects_non_positive_input() {
        let bad = TruncatedFockState::diagonal(&[1.2, -0.2], 1.0).unwrap();
        assert!(matches!(ergotropy_general(&bad), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn squeezed_vacuum_ergotropy_matches_stored_work() {
        let s = 0.549_306_144_334_054_8;
        let st = TruncatedFockState::squeezed_vacuum(s, 0.4, 1.0, 1e-12).unwrap();
        let e = ergotropy_general(&st).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-6);
        assert_relative_eq!(ergotropy_squeezed_vacuum(s, 1.0), mean_work(s, 1.0));
    }

    #[test]
    fn mixed_gaussian_ergotropy_two_routes() {
        let cov = GaussianCovariance { t: 0.0, sigma: 1.1, sigma01: Complex::new(0.5, -0.6) };
        let closed = gaussian_ergotropy(&cov, 1.0);
        let st = TruncatedFockState::from_covariance(&cov, 1.0, 90, 60).unwrap();
        assert!(st.tail_mass < 1e-9, "{}", st.tail_mass);
        assert!((st.energy() - (cov.sigma - 0.5)).abs() < 1e-7);
        let general = ergotropy_general(&st).unwrap();
        assert!((general - closed).abs() < 1e-6, "{general} vs {closed}");
    }

    proptest! {
        #[test]
        fn ergotropy_invariant_under_relabelling(pops in proptest::collection::vec(0.0f64..1.0, 2..7), seed in any::<u64>()) {
            let total: f64 = pops.iter().sum();
            prop_assume!(total > 1e-3);
            let pops: Vec<f64> = pops.iter().map(|p| p / total).collect();
            let mut shuffled = pops.clone();
            let n = shuffled.len();
            let mut x = seed;
            for i in (1..n).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (x >> 33) as usize % (i + 1));
            }
            let a = TruncatedFockState::<f64>::diagonal(&pops, 1.0).unwrap();
            let b = TruncatedFockState::diagonal(&shuffled, 1.0).unwrap();
            let ea = ergotropy_general(&a).unwrap();
            let eb = ergotropy_general(&b).unwrap();
            prop_assert!(ea >= 0.0 && eb >= 0.0);
            // Same spectrum, so identical passive energy.
            prop_assert!(((a.energy() - ea) - (b.energy() - eb)).abs() < 1e-12);
        }
    }
}
