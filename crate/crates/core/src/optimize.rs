//! Derivative-free maximization on small parameter spaces: uniform grids
//! followed by golden-section line searches.

use crate::scalar::Real;

/// Maximizes `f` on `[a, b]` by golden-section search until the bracket is
/// narrower than `tol`. Returns `(x, f(x))` for the best point visited.
pub fn golden_section_max<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::half();
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    let mut guard = 0;
    while hi - lo > tol && guard < 200 {
        guard += 1;
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    best
}

/// Index of the largest finite entry, first one on ties.
pub fn argmax<T: Real>(values: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Result of a two-parameter refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined2<T> {
    pub x: T,
    pub y: T,
    pub value: T,
}

/// Alternating golden-section refinement of `f(x, y)` around `start`.
///
/// Each round searches `x` within `half_width.0` of the incumbent (clipped
/// to `x_bounds`) and then `y` within `half_width.1`. Stops after `rounds`
/// rounds or when neither coordinate moves by more than `tol`.
pub fn coordinate_refine<T: Real, F: FnMut(T, T) -> T>(
    mut f: F,
    start: (T, T),
    half_width: (T, T),
    x_bounds: (T, T),
    rounds: usize,
    tol: T,
) -> Refined2<T> {
    let (mut x, mut y) = start;
    let mut value = f(x, y);
    for _ in 0..rounds {
        let lo = (x - half_width.0).max(x_bounds.0);
        let hi = (x + half_width.0).min(x_bounds.1);
        let (nx, vx) = golden_section_max(|s| f(s, y), lo, hi, tol);
        let dx = if vx > value {
            let d = (nx - x).abs();
            x = nx;
            value = vx;
            d
        } else {
            T::zero()
        };
        let (ny, vy) = golden_section_max(|s| f(x, s), y - half_width.1, y + half_width.1, tol);
        let dy = if vy > value {
            let d = (ny - y).abs();
            y = ny;
            value = vy;
            d
        } else {
            T::zero()
        };
        if dx <= tol && dy <= tol {
            break;
        }
    }
    Refined2 { x, y, value }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / T::from_usize_lossy(n - 1);
            (0..n).map(|k| if k == n - 1 { b } else { a + step * T::from_usize_lossy(k) }).collect()
        }
    }
}

/// `n` points `a + k (b - a) / n`, `k = 0..n`, excluding `b` (periodic axes).
pub fn periodic_grid<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    let step = (b - a) / T::from_usize_lossy(n.max(1));
    (0..n).map(|k| a + step * T::from_usize_lossy(k)).collect()
}
