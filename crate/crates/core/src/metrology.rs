//! Entanglement witness `chi^2 = N / (4 (Delta R_n)^2)` minimized over
//! measurement directions, with `R_n` solving `{R_n, rho} = i [J_n, rho]`.
//!
//! Because `R_n` is linear in `n`, `4 (Delta R_n)^2` is a quadratic form
//! `n^T Q n` in the direction; [`FisherForm`] stores `Q` so the angular
//! search never touches the state again.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};

use crate::error::{domain, Result};
use crate::lmg::{build_collective_ops, CollectiveOps, SpinDensityMatrix, SpinState};
use crate::optimize::{argmax, coordinate_refine, linspace, periodic_grid};
use crate::scalar::{cplx, wrap_two_pi, CompensatedSum, Complex, Real};

/// Pairs of populations below this sum are outside the support of `rho`.
pub const POPULATION_THRESHOLD: f64 = 1e-12;
/// Shot-noise states land on `chi^2 = 1` only up to rounding.
pub const ENTANGLEMENT_MARGIN: f64 = 1e-9;

/// `Jx sin(theta) cos(phi) + Jy sin(theta) sin(phi) + Jz cos(theta)`.
pub fn direction_operator<T: Real>(ops: &CollectiveOps<T>, theta: T, phi: T) -> DMatrix<Complex<T>> {
    let n = unit(theta, phi);
    ops.jx() * cplx(n[0], T::zero()) + ops.jy() * cplx(n[1], T::zero()) + ops.jz() * cplx(n[2], T::zero())
}

fn unit<T: Real>(theta: T, phi: T) -> Vector3<T> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// `R_ij = i (J_n)_ij (p_j - p_i) / (p_i + p_j)` in the eigenbasis of `rho`,
/// rotated back to the spin basis.
pub fn solve_r_operator<T: Real>(rho: &DMatrix<Complex<T>>, jn: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let eig = SymmetricEigen::new(hermitian_part(rho));
    let u = &eig.eigenvectors;
    let jt = u.adjoint() * jn * u;
    let rt = r_in_eigenbasis(&eig.eigenvalues.iter().copied().collect::<Vec<_>>(), &jt);
    u * rt * u.adjoint()
}

fn hermitian_part<T: Real>(m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    (m + m.adjoint()) * cplx(T::half(), T::zero())
}

fn r_in_eigenbasis<T: Real>(p: &[T], jt: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let d = p.len();
    let thr = T::lit(POPULATION_THRESHOLD);
    DMatrix::from_fn(d, d, |i, j| {
        let s = p[i] + p[j];
        if s < thr {
            Complex::new(T::zero(), T::zero())
        } else {
            jt[(i, j)] * cplx(T::zero(), (p[j] - p[i]) / s)
        }
    })
}

/// `<R^2> - <R>^2` in the state `rho`.
pub fn operator_variance<T: Real>(rho: &DMatrix<Complex<T>>, r: &DMatrix<Complex<T>>) -> T {
    let mean = (rho * r).trace().re;
    let second = (rho * r * r).trace().re;
    second - mean * mean
}

/// Quadratic form of the quantum Fisher information over directions.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherForm<T: Real> {
    pub n: usize,
    /// `4 (Delta R_n)^2 = n^T q n`.
    pub q: Matrix3<T>,
}

impl<T: Real> FisherForm<T> {
    pub fn qfi(&self, theta: T, phi: T) -> T {
        let n = unit(theta, phi);
        (n.transpose() * self.q * n)[(0, 0)]
    }

    /// Largest eigenvalue of `q`, the exact optimum of the direction search.
    pub fn max_qfi(&self) -> T {
        SymmetricEigen::new(self.q).eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }
}

/// For a pure state `4 (Delta R_n)^2 = 4 (Delta J_n)^2`.
pub fn fisher_form_pure<T: Real>(state: &SpinState<T>) -> Result<FisherForm<T>> {
    let ops = build_collective_ops::<T>(state.n)?;
    let d = state.amplitudes.len();
    let psi = &state.amplitudes;
    let zero = Complex::new(T::zero(), T::zero());
    let mut jx = vec![zero; d];
    let mut jy = vec![zero; d];
    let mut jz = vec![zero; d];
    ops.apply_jx_jy(psi, &mut jx, &mut jy);
    ops.apply_jz(psi, &mut jz);
    let images = [jx, jy, jz];
    let dot = |a: &[Complex<T>], b: &[Complex<T>]| -> Complex<T> {
        let mut re = CompensatedSum::<T>::default();
        let mut im = CompensatedSum::<T>::default();
        for (x, y) in a.iter().zip(b) {
            let z = x.conj() * y;
            re.add(z.re);
            im.add(z.im);
        }
        cplx(re.value(), im.value())
    };
    let means: Vec<T> = images.iter().map(|img| dot(psi, img).re).collect();
    let q = Matrix3::from_fn(|a, b| T::lit(4.0) * (dot(&images[a], &images[b]).re - means[a] * means[b]));
    Ok(FisherForm { n: state.n, q })
}

/// Mixed-state form from the R-operator in the eigenbasis of `rho`.
pub fn fisher_form_mixed<T: Real>(state: &SpinDensityMatrix<T>) -> Result<FisherForm<T>> {
    let ops = build_collective_ops::<T>(state.n)?;
    let eig = SymmetricEigen::new(hermitian_part(&state.rho));
    let p: Vec<T> = eig.eigenvalues.iter().map(|&x| x.max(T::zero())).collect();
    let u = &eig.eigenvectors;
    let rs: Vec<DMatrix<Complex<T>>> =
        [ops.jx(), ops.jy(), ops.jz()].iter().map(|j| r_in_eigenbasis(&p, &(u.adjoint() * j * u))).collect();
    let d = p.len();
    let mean = |r: &DMatrix<Complex<T>>| -> T { (0..d).fold(T::zero(), |acc, i| acc + p[i] * r[(i, i)].re) };
    let means: Vec<T> = rs.iter().map(mean).collect();
    let q = Matrix3::from_fn(|a, b| {
        let mut acc = CompensatedSum::<T>::default();
        for i in 0..d {
            if p[i] == T::zero() {
                continue;
            }
            for j in 0..d {
                acc.add(p[i] * (rs[a][(i, j)] * rs[b][(j, i)]).re);
            }
        }
        T::lit(4.0) * (acc.value() - means[a] * means[b])
    });
    Ok(FisherForm { n: state.n, q })
}

/// Outcome of the direction search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessResult<T> {
    pub chi2_min: T,
    pub theta_opt: T,
    pub phi_opt: T,
    /// `4 (Delta R)^2` at the optimum.
    pub qfi: T,
    /// `chi2_min < 1` by more than rounding ([`ENTANGLEMENT_MARGIN`]).
    pub entangled: bool,
}

const THETA_GRID: usize = 64;
const PHI_GRID: usize = 128;
const REFINE_ROUNDS: usize = 3;

/// Minimizes `N / qfi(theta, phi)`: 64 x 128 grid, then three rounds of
/// alternating golden-section refinement.
pub fn chi_squared_min<T: Real>(form: &FisherForm<T>) -> Result<WitnessResult<T>> {
    let thetas = linspace(T::zero(), T::pi(), THETA_GRID);
    let phis = periodic_grid(T::zero(), T::two_pi(), PHI_GRID);
    let mut values = Vec::with_capacity(THETA_GRID * PHI_GRID);
    for &th in &thetas {
        for &ph in &phis {
            values.push(form.qfi(th, ph));
        }
    }
    let best = match argmax(&values) {
        Some(i) => i,
        None => return domain("Fisher information is not finite"),
    };
    let scale = T::from_usize_lossy(form.n.max(1));
    if !(values[best] > T::lit(1e-12) * scale) {
        return domain("state has no variance along any direction");
    }
    let (it, ip) = (best / PHI_GRID, best % PHI_GRID);
    let dt = thetas[1] - thetas[0];
    let dp = phis[1] - phis[0];
    let r = coordinate_refine(|th, ph| form.qfi(th, ph), (thetas[it], phis[ip]), (dt, dp), (T::zero(), T::pi()), REFINE_ROUNDS, T::lit(1e-12));
    let chi2 = T::from_usize_lossy(form.n) / r.value;
    Ok(WitnessResult { chi2_min: chi2, theta_opt: r.x, phi_opt: wrap_two_pi(r.y), qfi: r.value, entangled: chi2 < T::one() - T::lit(ENTANGLEMENT_MARGIN) })
}

pub fn chi_squared_min_pure<T: Real>(state: &SpinState<T>) -> Result<WitnessResult<T>> {
    chi_squared_min(&fisher_form_pure(state)?)
}

pub fn chi_squared_min_mixed<T: Real>(state: &SpinDensityMatrix<T>) -> Result<WitnessResult<T>> {
    chi_squared_min(&fisher_form_mixed(state)?)
}
