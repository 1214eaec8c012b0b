//! Spin Wigner function `W(theta, phi) = sum_kq Y_kq(theta, phi) rho_kq`
//! built from the multipole operators
//! `T_kq = sum (-1)^{J-m} sqrt(2k+1) (J k J; -m q m') |J,m><J,m'|`.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{domain, Error, Result};
use crate::scalar::{cplx, expi, CompensatedSum, Complex, Real};

/// Largest `N` for which the dense multipole basis is built.
pub const MULTIPOLE_CEILING: usize = 60;

/// Wigner 3j symbols from the Racah sum evaluated with log-factorials.
#[derive(Debug, Clone)]
pub struct ThreeJ<T> {
    ln_fact: Vec<T>,
}

impl<T: Real> ThreeJ<T> {
    /// Cache of `ln k!` for `k <= max_factorial`.
    pub fn new(max_factorial: usize) -> Self {
        let mut ln_fact = Vec::with_capacity(max_factorial + 1);
        let mut acc = CompensatedSum::<T>::default();
        ln_fact.push(T::zero());
        for k in 1..=max_factorial {
            acc.add(T::from_usize_lossy(k).ln());
            ln_fact.push(acc.value());
        }
        Self { ln_fact }
    }

    fn lf(&self, k: i64) -> T {
        self.ln_fact[k as usize]
    }

    /// Symbol with every argument doubled (`tj = 2 j`), so half-integers
    /// are exact. Selection-rule violations give exactly zero.
    pub fn eval_doubled(&self, tj1: i64, tj2: i64, tj3: i64, tm1: i64, tm2: i64, tm3: i64) -> T {
        if tm1 + tm2 + tm3 != 0 {
            return T::zero();
        }
        if tj1 < 0 || tj2 < 0 || tj3 < 0 || tm1.abs() > tj1 || tm2.abs() > tj2 || tm3.abs() > tj3 {
            return T::zero();
        }
        if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj3 + tm3) % 2 != 0 || (tj1 + tj2 + tj3) % 2 != 0 {
            return T::zero();
        }
        if tj3 > tj1 + tj2 || tj3 < (tj1 - tj2).abs() {
            return T::zero();
        }
        let need = ((tj1 + tj2 + tj3) / 2 + 1) as usize;
        assert!(need < self.ln_fact.len(), "factorial cache too small: need {need}");
        let a = (tj1 + tj2 - tj3) / 2;
        let b = (tj1 - tj2 + tj3) / 2;
        let c = (-tj1 + tj2 + tj3) / 2;
        let big = (tj1 + tj2 + tj3) / 2 + 1;
        let (j1pm, j1mm) = ((tj1 + tm1) / 2, (tj1 - tm1) / 2);
        let (j2pm, j2mm) = ((tj2 + tm2) / 2, (tj2 - tm2) / 2);
        let (j3pm, j3mm) = ((tj3 + tm3) / 2, (tj3 - tm3) / 2);
        let pref = (self.lf(a) + self.lf(b) + self.lf(c) - self.lf(big)
            + self.lf(j1pm)
            + self.lf(j1mm)
            + self.lf(j2pm)
            + self.lf(j2mm)
            + self.lf(j3pm)
            + self.lf(j3mm))
            * T::half();
        // Denominator arguments: k, j3-j2+k+m1, j3-j1+k-m2, j1+j2-j3-k, j1-k-m1, j2-k+m2.
        let s1 = (tj3 - tj2 + tm1) / 2;
        let s2 = (tj3 - tj1 - tm2) / 2;
        let kmin = 0.max(-s1).max(-s2);
        let kmax = a.min(j1mm).min(j2pm);
        let mut sum = CompensatedSum::<T>::default();
        for k in kmin..=kmax {
            let den = self.lf(k) + self.lf(s1 + k) + self.lf(s2 + k) + self.lf(a - k) + self.lf(j1mm - k) + self.lf(j2pm - k);
            let term = (pref - den).exp();
            sum.add(if k % 2 == 0 { term } else { -term });
        }
        let phase = (tj1 - tj2 - tm3) / 2;
        if phase.rem_euclid(2) == 0 {
            sum.value()
        } else {
            -sum.value()
        }
    }
}

fn doubled<T: Real>(x: T) -> Option<i64> {
    let d = (x * T::two()).round();
    if (d - x * T::two()).abs() > T::lit(1e-9) {
        return None;
    }
    d.to_i64()
}

/// `(j1 j2 j3; m1 m2 m3)` for integer or half-integer arguments.
pub fn wigner_3j<T: Real>(j1: T, j2: T, j3: T, m1: T, m2: T, m3: T) -> T {
    let args: Option<Vec<i64>> = [j1, j2, j3, m1, m2, m3].iter().map(|&x| doubled(x)).collect();
    match args {
        Some(a) => {
            let size = ((a[0].abs() + a[1].abs() + a[2].abs()) / 2 + 2) as usize;
            ThreeJ::<T>::new(size).eval_doubled(a[0], a[1], a[2], a[3], a[4], a[5])
        }
        None => T::zero(),
    }
}

/// All `T_kq` for `k = 0..=2J`, stored as the single band each occupies:
/// entry `(i, i')` with `i = i' - q`.
#[derive(Debug, Clone)]
pub struct MultipoleBasis<T> {
    pub n: usize,
    /// `bands[k][q + k][i']`; zero where the row falls outside the basis.
    bands: Vec<Vec<Vec<T>>>,
}

pub fn build_multipoles<T: Real>(n: usize) -> Result<MultipoleBasis<T>> {
    if n > MULTIPOLE_CEILING {
        return Err(Error::Capacity { what: "spin count (multipoles)", requested: n, ceiling: MULTIPOLE_CEILING });
    }
    if n == 0 {
        return domain("need at least one spin");
    }
    let tj = n as i64;
    let d = n + 1;
    let three_j = ThreeJ::<T>::new(4 * n + 1);
    let mut bands = Vec::with_capacity(d);
    for k in 0..=n {
        let norm = T::from_usize_lossy(2 * k + 1).sqrt();
        let mut per_q = Vec::with_capacity(2 * k + 1);
        for q in -(k as i64)..=(k as i64) {
            let band = (0..d)
                .map(|ip| {
                    let i = ip as i64 - q;
                    if i < 0 || i >= d as i64 {
                        return T::zero();
                    }
                    // m = J - i, m' = J - i'.
                    let tm = tj - 2 * i;
                    let tmp = tj - 2 * ip as i64;
                    let v = three_j.eval_doubled(tj, 2 * k as i64, tj, -tm, 2 * q, tmp) * norm;
                    if i % 2 == 0 {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            per_q.push(band);
        }
        bands.push(per_q);
    }
    Ok(MultipoleBasis { n, bands })
}

impl<T: Real> MultipoleBasis<T> {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    fn band(&self, k: usize, q: i64) -> &[T] {
        &self.bands[k][(q + k as i64) as usize]
    }

    /// Dense `T_kq`.
    pub fn operator(&self, k: usize, q: i64) -> DMatrix<Complex<T>> {
        let d = self.dim();
        let mut m = DMatrix::from_element(d, d, Complex::new(T::zero(), T::zero()));
        for (ip, &v) in self.band(k, q).iter().enumerate() {
            let i = ip as i64 - q;
            if i >= 0 && (i as usize) < d {
                m[(i as usize, ip)] = cplx(v, T::zero());
            }
        }
        m
    }

    /// `rho_kq = Tr[rho T_kq^dag]`, indexed `[k][q + k]`.
    pub fn coefficients(&self, rho: &DMatrix<Complex<T>>) -> Vec<Vec<Complex<T>>> {
        let d = self.dim();
        (0..=self.n)
            .map(|k| {
                (-(k as i64)..=(k as i64))
                    .map(|q| {
                        let mut re = CompensatedSum::<T>::default();
                        let mut im = CompensatedSum::<T>::default();
                        for (ip, &v) in self.band(k, q).iter().enumerate() {
                            let i = ip as i64 - q;
                            if i >= 0 && (i as usize) < d {
                                let z = rho[(i as usize, ip)] * v;
                                re.add(z.re);
                                im.add(z.im);
                            }
                        }
                        cplx(re.value(), im.value())
                    })
                    .collect()
            })
            .collect()
    }

    /// `max |Tr[T_kq^dag T_k'q'] - delta|` over all pairs. Different `q`
    /// occupy disjoint bands, so only equal-`q` pairs are summed.
    pub fn orthonormality_error(&self) -> T {
        let mut worst = T::zero();
        for q in -(self.n as i64)..=(self.n as i64) {
            let ks: Vec<usize> = (q.unsigned_abs() as usize..=self.n).collect();
            for &k in &ks {
                for &kp in &ks {
                    let acc: CompensatedSum<T> = self.band(k, q).iter().zip(self.band(kp, q)).map(|(&a, &b)| a * b).collect();
                    let target = if k == kp { T::one() } else { T::zero() };
                    worst = worst.max((acc.value() - target).abs());
                }
            }
        }
        worst
    }

    /// `max |T_{k,-q} - (-1)^q T_kq^dag|`.
    pub fn conjugation_error(&self) -> T {
        let mut worst = T::zero();
        for k in 0..=self.n {
            for q in 0..=(k as i64) {
                let a = self.operator(k, -q);
                let b = self.operator(k, q).adjoint() * cplx(if q % 2 == 0 { T::one() } else { -T::one() }, T::zero());
                worst = worst.max((a - b).iter().fold(T::zero(), |m, z| m.max(z.modulus())));
            }
        }
        worst
    }
}

/// Normalized associated Legendre values `Pbar_k^q(cos theta)` for
/// `0 <= q <= k <= kmax`, such that `Y_kq = Pbar_k^q e^{i q phi}` carries the
/// Condon–Shortley phase and unit norm on the sphere. Indexed `[k][q]`.
pub fn legendre_table<T: Real>(kmax: usize, theta: T) -> Vec<Vec<T>> {
    let (x, s) = (theta.cos(), theta.sin());
    let mut p: Vec<Vec<T>> = (0..=kmax).map(|k| vec![T::zero(); k + 1]).collect();
    p[0][0] = T::one() / (T::lit(4.0) * T::pi()).sqrt();
    for q in 1..=kmax {
        let f = T::from_usize_lossy(2 * q + 1) / T::from_usize_lossy(2 * q);
        p[q][q] = -f.sqrt() * s * p[q - 1][q - 1];
    }
    for q in 0..kmax {
        p[q + 1][q] = T::from_usize_lossy(2 * q + 3).sqrt() * x * p[q][q];
        for k in q + 2..=kmax {
            let (kf, qf) = (T::from_usize_lossy(k), T::from_usize_lossy(q));
            let a = ((T::lit(4.0) * kf * kf - T::one()) / (kf * kf - qf * qf)).sqrt();
            let km = kf - T::one();
            let b = ((km * km - qf * qf) / (T::lit(4.0) * km * km - T::one())).sqrt();
            p[k][q] = a * (x * p[k - 1][q] - b * p[k - 2][q]);
        }
    }
    p
}

/// Spherical harmonic `Y_kq(theta, phi)`.
pub fn spherical_harmonic<T: Real>(k: usize, q: i64, theta: T, phi: T) -> Result<Complex<T>> {
    if q.unsigned_abs() as usize > k {
        return domain(format!("|q| = {} exceeds k = {k}", q.abs()));
    }
    let table = legendre_table(k, theta);
    let aq = q.unsigned_abs() as usize;
    let y = expi(phi * T::from_i64(aq as i64).unwrap_or_else(T::zero)) * table[k][aq];
    Ok(if q >= 0 {
        y
    } else if aq % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    })
}

/// `W` sampled on a uniform `(theta, phi)` grid including both poles and
/// both ends of the azimuth.
#[derive(Debug, Clone)]
pub struct WignerGrid<T: Real> {
    pub thetas: Vec<T>,
    pub phis: Vec<T>,
    /// Rows are `theta`, columns `phi`.
    pub values: DMatrix<T>,
    /// Largest `|Im W|` seen before discarding the imaginary part.
    pub max_imag: T,
    /// `int dOmega W` with Clenshaw–Curtis weights in `cos theta`.
    pub integral: T,
    /// Same integral by the trapezoid rule with `sin theta` weight.
    pub integral_trapezoid: T,
}

pub const DEFAULT_THETA_POINTS: usize = 181;
pub const DEFAULT_PHI_POINTS: usize = 361;

/// Evaluates the multipole expansion of `rho` on the grid.
pub fn wigner_function<T: Real>(
    basis: &MultipoleBasis<T>,
    rho: &DMatrix<Complex<T>>,
    n_theta: usize,
    n_phi: usize,
) -> Result<WignerGrid<T>> {
    if n_theta < 3 || n_phi < 3 {
        return domain("grid needs at least 3 points per axis");
    }
    if rho.nrows() != basis.dim() || rho.ncols() != basis.dim() {
        return domain("density matrix does not match the multipole basis");
    }
    let kmax = basis.n;
    let coeffs = basis.coefficients(rho);
    let thetas: Vec<T> = (0..n_theta).map(|i| T::pi() * T::from_usize_lossy(i) / T::from_usize_lossy(n_theta - 1)).collect();
    let phis: Vec<T> = (0..n_phi).map(|i| T::two_pi() * T::from_usize_lossy(i) / T::from_usize_lossy(n_phi - 1)).collect();
    let mut values = DMatrix::from_element(n_theta, n_phi, T::zero());
    let mut max_imag = T::zero();
    let qs: Vec<i64> = (-(kmax as i64)..=(kmax as i64)).collect();
    for (it, &th) in thetas.iter().enumerate() {
        let table = legendre_table(kmax, th);
        // A_q(theta) = sum_k c_q Pbar_k^{|q|} rho_kq.
        let amps: Vec<Complex<T>> = qs
            .iter()
            .map(|&q| {
                let aq = q.unsigned_abs() as usize;
                let sign = if q < 0 && aq % 2 == 1 { -T::one() } else { T::one() };
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in aq..=kmax {
                    acc += coeffs[k][(q + k as i64) as usize] * (table[k][aq] * sign);
                }
                acc
            })
            .collect();
        for (ip, &ph) in phis.iter().enumerate() {
            let mut re = CompensatedSum::<T>::default();
            let mut im = CompensatedSum::<T>::default();
            for (&q, a) in qs.iter().zip(&amps) {
                let z = *a * expi(ph * T::from_i64(q).unwrap_or_else(T::zero));
                re.add(z.re);
                im.add(z.im);
            }
            values[(it, ip)] = re.value();
            max_imag = max_imag.max(im.value().abs());
        }
    }
    let phi_w = trapezoid_weights(n_phi, T::two_pi());
    let row_integrals: Vec<T> =
        (0..n_theta).map(|it| (0..n_phi).fold(T::zero(), |a, ip| a + phi_w[ip] * values[(it, ip)])).collect();
    let cc = clenshaw_curtis_weights::<T>(n_theta - 1);
    let integral = row_integrals.iter().zip(&cc).fold(T::zero(), |a, (&r, &w)| a + r * w);
    let th_w = trapezoid_weights(n_theta, T::pi());
    let integral_trapezoid =
        row_integrals.iter().zip(&th_w).zip(&thetas).fold(T::zero(), |a, ((&r, &w), &th)| a + r * w * th.sin());
    Ok(WignerGrid { thetas, phis, values, max_imag, integral, integral_trapezoid })
}

/// Trapezoid weights for `n` equispaced points spanning `length`.
fn trapezoid_weights<T: Real>(n: usize, length: T) -> Vec<T> {
    let h = length / T::from_usize_lossy(n - 1);
    (0..n).map(|i| if i == 0 || i == n - 1 { h * T::half() } else { h }).collect()
}

/// Clenshaw–Curtis weights on `x_j = cos(j pi / n)`, `j = 0..=n`, exact for
/// polynomials of degree `n` on `[-1, 1]`.
pub fn clenshaw_curtis_weights<T: Real>(n: usize) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    (0..=n)
        .map(|j| {
            let th = T::pi() * T::from_usize_lossy(j) / nf;
            let mut v = T::one();
            for k in 1..=n / 2 {
                let b = if 2 * k == n { T::one() } else { T::two() };
                let kk = T::from_usize_lossy(k);
                v -= b * (T::two() * kk * th).cos() / (T::lit(4.0) * kk * kk - T::one());
            }
            let c = if j == 0 || j == n { T::one() } else { T::two() };
            c * v / nf
        })
        .collect()
}

/// `((4J + 1) / 4 pi)^{-1/2}`.
pub fn reference_normalization<T: Real>(n: usize) -> T {
    (T::lit(4.0) * T::pi() / T::from_usize_lossy(2 * n + 1)).sqrt()
}

/// `int dOmega W` implied by the multipole expansion itself: only `Y_00`
/// survives the angular integral, leaving `sqrt(4 pi) rho_00` with
/// `rho_00 = 1 / sqrt(2J + 1)`.
pub fn multipole_normalization<T: Real>(n: usize) -> T {
    (T::lit(4.0) * T::pi() / T::from_usize_lossy(n + 1)).sqrt()
}
