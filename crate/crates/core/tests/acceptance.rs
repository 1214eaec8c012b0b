//! Acceptance checks, one PASS/FAIL line each. Exits non-zero if any fail.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use crit_cycle_core::battery::{
    ergotropy_general, mean_work, multi_cycle_gain, variance_work, work_distribution, work_fluctuations,
    work_fluctuations_large, work_fluctuations_small, TruncatedFockState,
};
use crit_cycle_core::lmg::{
    build_collective_ops, evolve_pure, evolve_pure_cycles, fit_spin_squeezing, gap_exponent, ground_state_fidelity,
    low_spectrum, SpinState,
};
use crit_cycle_core::metrology::{chi_squared_min_pure, direction_operator, solve_r_operator};
use crit_cycle_core::ode::Tolerance;
use crit_cycle_core::open_gaussian::integrate_lindblad;
use crit_cycle_core::oscillator::{integrate_b, multi_cycle, predicted_squeezing};
use crit_cycle_core::spin_wigner::{build_multipoles, multipole_normalization, reference_normalization, wigner_function};
use crit_cycle_core::{Complex, ProtocolSpec, C64};
use nalgebra::{ComplexField, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tol() -> Tolerance<f64> {
    Tolerance::default()
}

fn one_cycle(spec: &ProtocolSpec) -> f64 {
    integrate_b(spec, tol()).unwrap().last().squeezing().unwrap().magnitude
}

fn universal_squeezing() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &r in &[0.5, 1.0, 2.0, 4.0] {
        let start = Instant::now();
        let s = one_cycle(&ProtocolSpec::power_law(r, 100.0).unwrap());
        let elapsed = start.elapsed();
        let target = predicted_squeezing(r, 0.5);
        let ok = (s - target).abs() <= 1e-2 && elapsed < Duration::from_secs(1);
        pass &= ok;
        parts.push(format!("r={r}: {s:.5} vs {target:.5} ({:.0} ms)", elapsed.as_secs_f64() * 1e3));
    }
    outcome(pass, parts.join("; "))
}

fn protocol_universality() -> Outcome {
    let reference = one_cycle(&ProtocolSpec::power_law(2.0, 100.0).unwrap());
    let mut pass = true;
    let mut parts = vec![format!("r=2: {reference:.5}")];
    for &p in &[0.5, 3.0] {
        let s = one_cycle(&ProtocolSpec::trigonometric(p, 100.0).unwrap());
        let rel = (s / reference - 1.0).abs();
        pass &= rel <= 0.01;
        parts.push(format!("p={p}: {s:.5} ({:.2}%)", rel * 100.0));
    }
    outcome(pass, parts.join("; "))
}

fn work_statistics() -> Outcome {
    let (z_nu, omega) = (0.5, 1.0);
    let points: Vec<f64> = (0..40).map(|k| 0.1 * (500.0f64).powf(k as f64 / 39.0)).collect();
    let mut formula_err = 0.0f64;
    let mut moment_err = 0.0f64;
    for &x in &points {
        let r = x / z_nu;
        let s = predicted_squeezing(r, z_nu);
        let direct = variance_work(s, omega).sqrt() / mean_work(s, omega);
        formula_err = formula_err.max((direct / work_fluctuations(r, z_nu) - 1.0).abs());
        let d = work_distribution(s, omega, 1e-12).unwrap();
        moment_err = moment_err.max((d.mean() / mean_work(s, omega) - 1.0).abs());
        moment_err = moment_err.max((d.variance() / variance_work(s, omega) - 1.0).abs());
    }
    let (lo, hi) = (points[0] / z_nu, points[points.len() - 1] / z_nu);
    let small = (work_fluctuations(lo, z_nu) / work_fluctuations_small(lo, z_nu) - 1.0).abs();
    let large = (work_fluctuations(hi, z_nu) / work_fluctuations_large::<f64>() - 1.0).abs();
    let pass = formula_err <= 1e-10 && moment_err <= 1e-8 && small <= 0.02 && large <= 0.02;
    outcome(
        pass,
        format!(
            "formula {formula_err:.1e}, moments {moment_err:.1e}, small-end asymptote {:.2}%, large-end {:.3}%",
            small * 100.0,
            large * 100.0
        ),
    )
}

fn ergotropy_identity() -> Outcome {
    let mut worst = 0.0f64;
    for &s in &[0.25, 0.5493, 0.8814, 1.3170] {
        let st = TruncatedFockState::squeezed_vacuum(s, 0.3, 1.0, 1e-12).unwrap();
        let e = ergotropy_general(&st).unwrap();
        worst = worst.max((e - s.sinh().powi(2)).abs());
    }
    outcome(worst <= 1e-6, format!("max deviation {worst:.2e}"))
}

fn multi_cycle_amplification() -> Outcome {
    let start = Instant::now();
    let spec = ProtocolSpec::power_law(1.0, 10.0).unwrap().with_cycles(5).unwrap();
    let cycles = multi_cycle(&spec, tol()).unwrap();
    let s1 = cycles[0].magnitude;
    let mut per_cycle = 0.0f64;
    let mut gain = 0.0f64;
    for c in &cycles {
        let m = c.cycle as f64;
        per_cycle = per_cycle.max((c.magnitude / (m * 0.5493) - 1.0).abs());
        let tracked = c.magnitude.sinh().powi(2) / s1.sinh().powi(2);
        let exact = multi_cycle_gain(c.cycle, s1).unwrap().exact;
        gain = gain.max((tracked / exact - 1.0).abs());
    }
    let spec11 = ProtocolSpec::power_law(1.0, 11.0).unwrap().with_cycles(2).unwrap();
    let s2 = multi_cycle(&spec11, tol()).unwrap()[1].magnitude;
    let elapsed = start.elapsed();
    let pass = per_cycle <= 0.05 && gain <= 0.10 && s2 <= 0.05 && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "per-cycle {:.2}%, gain {:.2}%, |s|_2(ωτ=11) = {s2:.4}, {:.2} s",
            per_cycle * 100.0,
            gain * 100.0,
            elapsed.as_secs_f64()
        ),
    )
}

fn dissipative_limit() -> Outcome {
    let spec = ProtocolSpec::power_law(1.0, 10.0).unwrap().with_cycles(5).unwrap();
    // Absolute 1e-6 on <n> ~ 45 needs a tighter relative tolerance.
    let tight = Tolerance::new(1e-12, 1e-14);
    let closed = integrate_b(&spec, tight).unwrap();
    let open = integrate_lindblad(&spec, 0.0, tight).unwrap();
    let mut dn = 0.0f64;
    for (a, b) in closed.cycle_marks.iter().zip(&open.cycle_marks) {
        dn = dn.max((a.excitations() - b.excitations()).abs());
    }
    let kappa = 1e-2 / (2.0 * spec.tau);
    let noisy = integrate_lindblad(&spec, kappa, tol()).unwrap();
    let work: Vec<f64> = noisy.cycle_marks.iter().map(|c| c.sigma - 0.5).collect();
    let grows = work.windows(2).all(|w| w[1] > w[0]);
    outcome(
        dn <= 1e-6 && grows,
        format!("κ=0 Δ⟨n⟩ {dn:.1e}; 2τκ=1e-2 work per cycle {:?}", work.iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>()),
    )
}

fn lmg_convergence() -> Outcome {
    let start = Instant::now();
    let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap();
    let mut scaled = Vec::new();
    let mut last_fid = 0.0;
    for &n in &[50usize, 100, 200, 400, 1000] {
        let fit = fit_spin_squeezing(&evolve_pure(n, &spec, 1e-8).unwrap()).unwrap();
        scaled.push(fit.scaled_magnitude());
        last_fid = fit.fidelity;
    }
    let monotone = scaled.windows(2).all(|w| w[1] > w[0]);
    let toward = scaled.iter().all(|&x| x < 0.8814);
    let elapsed = start.elapsed();
    let pass = monotone && toward && last_fid >= 0.999 && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "|ξ|N = {:?}, F_ξ(N=1000) = {last_fid:.5}, {:.1} s",
            scaled.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn gap_scaling() -> Outcome {
    let sizes = [50usize, 100, 200, 400];
    let gaps: Vec<f64> =
        sizes.iter().map(|&n| low_spectrum(&build_collective_ops(n).unwrap(), 1.0, 1.0).unwrap().even_gap()).collect();
    let z = gap_exponent(&sizes, &gaps).unwrap();
    outcome((z - 1.0 / 3.0).abs() <= 0.05, format!("z = {z:.4}"))
}

fn metrological_witness() -> Outcome {
    let coherent = chi_squared_min_pure(&SpinState::<f64>::top(1000)).unwrap().chi2_min;
    let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap().with_cycles(3).unwrap();
    let states = evolve_pure_cycles(1000, &spec, 1e-8).unwrap();
    let chi: Vec<f64> = states.iter().map(|s| chi_squared_min_pure(s).unwrap().chi2_min).collect();
    let decreasing = chi.windows(2).all(|w| w[1] < w[0]);
    let pass = (coherent - 1.0).abs() <= 1e-6 && (0.03..=0.07).contains(&chi[2]) && decreasing;
    outcome(
        pass,
        format!("coherent {coherent:.8}; N=1000 χ²_min(M=1,2,3) = {:?}", chi.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>()),
    )
}

fn r_operator_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for &n in &[3usize, 7] {
        let d = n + 1;
        let ops = build_collective_ops::<f64>(n).unwrap();
        for _ in 0..10 {
            let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let m = &a * a.adjoint();
            let rho = &m / m.trace();
            let jn = direction_operator(&ops, rng.gen::<f64>() * PI, rng.gen::<f64>() * 2.0 * PI);
            let r = solve_r_operator(&rho, &jn);
            let id = DMatrix::<C64>::identity(d, d);
            let lhs = id.kronecker(&rho) + rho.transpose().kronecker(&id);
            let rhs = (&jn * &rho - &rho * &jn) * C64::new(0.0, 1.0);
            let sol = lhs.lu().solve(&DVector::from_column_slice(rhs.as_slice())).unwrap();
            let oracle = DMatrix::from_column_slice(d, d, sol.as_slice());
            worst = worst.max((&r - &oracle).iter().fold(0.0f64, |x, z: &Complex<f64>| x.max(z.modulus())));
        }
    }
    outcome(worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

fn wigner_normalization() -> Outcome {
    let n = 14;
    let basis = build_multipoles::<f64>(n).unwrap();
    let ortho = basis.orthonormality_error();
    let target = reference_normalization::<f64>(n);
    let spec = ProtocolSpec::power_law(2.0, 2.0).unwrap().with_cycles(3).unwrap();
    let states = evolve_pure_cycles(n, &spec, 1e-8).unwrap();
    let mut worst = 0.0f64;
    let mut integrals = Vec::new();
    for s in &states {
        let w = wigner_function(&basis, &s.to_density().rho, 181, 361).unwrap();
        worst = worst.max((w.integral - target).abs());
        integrals.push(format!("{:.6}", w.integral));
    }
    outcome(
        worst <= 1e-4 && ortho <= 1e-10,
        format!(
            "∫W (M=1,2,3) = {integrals:?} vs target {target:.6} (expansion gives {:.6}); orthonormality {ortho:.1e}",
            multipole_normalization::<f64>(n)
        ),
    )
}

fn quasiadiabatic_window() -> Outcome {
    let fast = evolve_pure(100, &ProtocolSpec::power_law(2.0, 2.0).unwrap(), 1e-8).unwrap();
    let slow = evolve_pure(100, &ProtocolSpec::power_law(2.0, 16.0).unwrap(), 1e-8).unwrap();
    let xf = fit_spin_squeezing(&fast).unwrap().scaled_magnitude();
    let xs = fit_spin_squeezing(&slow).unwrap().scaled_magnitude();
    let f0 = ground_state_fidelity(&slow);
    outcome(xf >= 3.0 * xs && f0 > 0.95, format!("|ξ|N: ωτ=2 {xf:.4}, ωτ=16 {xs:.4} (ratio {:.2}); F₀(ωτ=16) = {f0:.4}", xf / xs))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("universal squeezing", universal_squeezing),
        ("protocol universality", protocol_universality),
        ("work statistics", work_statistics),
        ("ergotropy identity", ergotropy_identity),
        ("multi-cycle amplification", multi_cycle_amplification),
        ("dissipative limit", dissipative_limit),
        ("LMG convergence", lmg_convergence),
        ("gap scaling", gap_scaling),
        ("metrological witness", metrological_witness),
        ("R-operator oracle", r_operator_oracle),
        ("Wigner normalization", wigner_normalization),
        ("quasiadiabatic window", quasiadiabatic_window),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !result.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, i + 1, result.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
