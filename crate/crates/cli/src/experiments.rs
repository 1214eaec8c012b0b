//! One runner per experiment kind. Each turns a sweep point into summary
//! rows, a JSON record and optional per-point files.

use std::f64::consts::{PI, TAU};

use crit_cycle_core::battery::{self, TruncatedFockState};
use crit_cycle_core::export::{self, Cell};
use crit_cycle_core::lmg::{self, SpinDensityMatrix};
use crit_cycle_core::ode::Tolerance;
use crit_cycle_core::protocols::classify_phase;
use crit_cycle_core::{metrology, open_gaussian, oscillator, spin_wigner};
use crit_cycle_core::{Error, ProtocolSpec};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, SweepPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct PointOutput {
    /// Rows of the kind's `summary.csv`, without the leading point index.
    pub rows: Vec<Vec<Cell>>,
    pub record: Value,
    /// `(file name, contents)` relative to the output directory.
    pub files: Vec<(String, String)>,
}

/// Column names of `summary.csv` after the `point` column.
pub fn summary_header(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Cycle => &[
            "r",
            "tau",
            "cycles",
            "abs_s",
            "theta_integrated",
            "theta_predicted",
            "phase_offset",
            "accumulated_phase",
            "class_integrated",
            "class_predicted",
            "abs_s_final",
            "n_excitations_final",
            "abs_s_slow_limit",
        ],
        ExperimentKind::Battery => &[
            "r",
            "tau",
            "cycle",
            "abs_s",
            "mean_work",
            "variance",
            "fluctuation_ratio",
            "fluctuation_ratio_predicted",
            "ergotropy",
            "ergotropy_method",
            "gain",
            "gain_exact",
            "gain_asymptote",
        ],
        ExperimentKind::NoisyBattery => &[
            "r",
            "tau",
            "kappa",
            "cycle",
            "sigma",
            "n_excitations",
            "work",
            "abs_s_effective",
            "symplectic_nu",
            "purity",
            "ergotropy",
        ],
        ExperimentKind::MultiCycle => &[
            "r",
            "tau",
            "cycle",
            "abs_s",
            "theta",
            "interference",
            "work_ratio",
            "gain_exact",
            "gain_asymptote",
        ],
        ExperimentKind::LmgSqueeze => &[
            "n",
            "r",
            "tau",
            "cycle",
            "xi_scaled",
            "beta",
            "fit_fidelity",
            "ground_fidelity",
            "n_excitations",
            "oscillator_abs_s",
            "oscillator_theta",
        ],
        ExperimentKind::LmgNoise => &[
            "n",
            "r",
            "tau",
            "kappa",
            "cycle",
            "tau_kappa_sqrt_n",
            "within_loose_bound",
            "within_strict_bound",
            "xi_scaled",
            "beta",
            "fit_fidelity",
            "ground_fidelity",
            "purity",
            "n_excitations",
        ],
        ExperimentKind::Chi2 => {
            &["n", "r", "tau", "kappa", "cycle", "chi2_min", "theta_opt", "phi_opt", "qfi", "entangled"]
        }
        ExperimentKind::Wigner => &[
            "n",
            "r",
            "tau",
            "kappa",
            "cycles",
            "integral",
            "integral_trapezoid",
            "multipole_normalization",
            "reference_normalization",
            "max_imag",
            "w_min",
            "w_max",
        ],
        ExperimentKind::ProtocolScan => &[
            "family",
            "r",
            "tau",
            "accumulated_phase",
            "theta_predicted",
            "class_predicted",
            "theta_integrated",
            "class_integrated",
            "phase_offset",
            "local_exponent",
        ],
    }
}

pub fn run_point(cfg: &ExperimentConfig, point: &SweepPoint) -> Result<PointOutput, String> {
    let spec = cfg.spec(point).map_err(|e| e.to_string())?;
    let ctx = Ctx { cfg, point, spec };
    let out = match cfg.experiment {
        ExperimentKind::Cycle => ctx.cycle(),
        ExperimentKind::Battery => ctx.battery(),
        ExperimentKind::NoisyBattery => ctx.noisy_battery(),
        ExperimentKind::MultiCycle => ctx.multi_cycle(),
        ExperimentKind::LmgSqueeze => ctx.lmg_squeeze(),
        ExperimentKind::LmgNoise => ctx.lmg_noise(),
        ExperimentKind::Chi2 => ctx.chi2(),
        ExperimentKind::Wigner => ctx.wigner(),
        ExperimentKind::ProtocolScan => ctx.protocol_scan(),
    };
    out.map_err(|e| e.to_string())
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    point: &'a SweepPoint,
    spec: ProtocolSpec,
}

type Res = crit_cycle_core::Result<PointOutput>;

/// Signed difference folded into `(-pi, pi]`.
fn phase_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Interference class of an integrated `arg b`. Integration lands a half
/// turn away from the phase formula, whose convention the classes use.
fn classify_integrated(theta: f64, tolerance: f64) -> crit_cycle_core::Interference {
    classify_phase(theta - PI, tolerance)
}

impl Ctx<'_> {
    fn tol(&self) -> Tolerance<f64> {
        Tolerance::new(self.cfg.numerics.rel_tol, self.cfg.numerics.abs_tol)
    }

    fn phase_tol(&self) -> f64 {
        self.cfg.numerics.phase_tolerance_deg.to_radians()
    }

    fn file(&self, stem: &str, ext: &str) -> String {
        format!("{}_{:04}.{ext}", stem, self.point.index)
    }

    fn n(&self) -> crit_cycle_core::Result<usize> {
        self.point.n.ok_or_else(|| Error::Domain("spin count missing".into()))
    }

    fn one_cycle(&self) -> crit_cycle_core::Result<ProtocolSpec> {
        self.spec.with_cycles(1)
    }

    fn cycle(&self) -> Res {
        let p = self.point;
        let traj = oscillator::integrate_b(&self.spec, self.tol())?;
        let first = traj.cycle_marks[0].squeezing()?;
        let last = traj.last();
        let last_sq = last.squeezing()?;
        let theta_pred = self.spec.predicted_arg_b()?;
        let phase = self.spec.accumulated_phase()?;
        let offset = phase_difference(first.phase, theta_pred);
        let class_int = classify_integrated(first.phase, self.phase_tol());
        let class_pred = classify_phase(theta_pred, self.phase_tol());
        let slow = oscillator::predicted_squeezing(self.spec.local_expansion_exponent(), self.spec.z_nu);
        let row = vec![
            p.r.into(),
            p.tau.into(),
            p.cycles.into(),
            first.magnitude.into(),
            first.phase.into(),
            theta_pred.into(),
            offset.into(),
            phase.into(),
            class_int.to_string().into(),
            class_pred.to_string().into(),
            last_sq.magnitude.into(),
            last.excitations().into(),
            slow.into(),
        ];
        let record = json!({
            "abs_s": first.magnitude,
            "theta_integrated": first.phase,
            "theta_predicted": theta_pred,
            "phase_offset": offset,
            "accumulated_phase": phase,
            "class_integrated": class_int.to_string(),
            "class_predicted": class_pred.to_string(),
            "abs_s_final": last_sq.magnitude,
            "n_excitations_final": last.excitations(),
        });
        let mut files = Vec::new();
        if self.cfg.output.trajectories {
            files.push((self.file("cycle", "csv"), export::oscillator_table(&traj)?.render()));
        }
        Ok(PointOutput { rows: vec![row], record, files })
    }

    /// Ergotropy of `S(s)|0>`: exact diagonalization while the Fock image
    /// fits under the ceiling, closed form beyond.
    fn squeezed_ergotropy(&self, s: f64, phase: f64) -> crit_cycle_core::Result<(f64, &'static str)> {
        let omega = self.spec.omega;
        let tail = self.cfg.numerics.tail_bound;
        let dist = battery::work_distribution(s, omega, tail)?;
        if 2 * dist.n_max < self.cfg.numerics.fock_ceiling {
            let state = TruncatedFockState::squeezed_vacuum(s, phase, omega, tail)?;
            Ok((battery::ergotropy_general(&state)?, "diagonalization"))
        } else {
            Ok((battery::ergotropy_squeezed_vacuum(s, omega), "closed_form"))
        }
    }

    fn battery(&self) -> Res {
        let p = self.point;
        let omega = self.spec.omega;
        let cycles = oscillator::multi_cycle(&self.spec, self.tol())?;
        let s1 = cycles[0].magnitude;
        let w1 = battery::mean_work(s1, omega);
        let predicted_ratio = battery::work_fluctuations(self.spec.local_expansion_exponent(), self.spec.z_nu);
        let mut rows = Vec::new();
        let mut gains = Vec::new();
        let mut per_cycle = Vec::new();
        let mut last_dist = None;
        for c in &cycles {
            let dist = battery::work_distribution(c.magnitude, omega, self.cfg.numerics.tail_bound)?;
            let (ergotropy, method) = self.squeezed_ergotropy(c.magnitude, c.phase)?;
            let gain = dist.mean() / w1;
            let law = battery::multi_cycle_gain(c.cycle, s1)?;
            gains.push(gain);
            rows.push(vec![
                p.r.into(),
                p.tau.into(),
                c.cycle.into(),
                c.magnitude.into(),
                dist.mean().into(),
                dist.variance().into(),
                dist.fluctuation_ratio().into(),
                predicted_ratio.into(),
                ergotropy.into(),
                method.into(),
                gain.into(),
                law.exact.into(),
                law.asymptote.into(),
            ]);
            per_cycle.push(json!({
                "cycle": c.cycle,
                "abs_s": c.magnitude,
                "mean_work": dist.mean(),
                "variance": dist.variance(),
                "fluctuation_ratio": dist.fluctuation_ratio(),
                "ergotropy": ergotropy,
            }));
            last_dist = Some((dist, ergotropy));
        }
        let (dist, ergotropy) = last_dist.expect("at least one cycle");
        let record = json!({
            "mean_work": dist.mean(),
            "variance": dist.variance(),
            "fluctuation_ratio": dist.fluctuation_ratio(),
            "ergotropy": ergotropy,
            "M_gain": gains,
            "fluctuation_ratio_predicted": predicted_ratio,
            "cycles": per_cycle,
        });
        let mut files = Vec::new();
        if self.cfg.output.trajectories {
            files.push((self.file("distribution", "csv"), export::distribution_table(&dist).render()));
        }
        Ok(PointOutput { rows, record, files })
    }

    fn noisy_battery(&self) -> Res {
        let p = self.point;
        let omega = self.spec.omega;
        let traj = open_gaussian::integrate_lindblad(&self.spec, p.kappa, self.tol())?;
        let mut rows = Vec::new();
        let mut per_cycle = Vec::new();
        for (i, c) in traj.cycle_marks.iter().enumerate() {
            let work = open_gaussian::work_from_covariance(c, omega);
            let s_eff = open_gaussian::squeezing_from_covariance(c);
            let ergotropy = battery::gaussian_ergotropy(c, omega);
            rows.push(vec![
                p.r.into(),
                p.tau.into(),
                p.kappa.into(),
                (i + 1).into(),
                c.sigma.into(),
                c.excitations().into(),
                work.into(),
                s_eff.into(),
                c.symplectic_eigenvalue().into(),
                c.purity().into(),
                ergotropy.into(),
            ]);
            per_cycle.push(json!({
                "cycle": i + 1,
                "work": work,
                "abs_s_effective": s_eff,
                "purity": c.purity(),
                "ergotropy": ergotropy,
            }));
        }
        let mut files = Vec::new();
        if self.cfg.output.trajectories {
            files.push((self.file("covariance", "csv"), export::covariance_table(&traj).render()));
        }
        Ok(PointOutput { rows, record: json!({ "cycles": per_cycle }), files })
    }

    fn multi_cycle(&self) -> Res {
        let p = self.point;
        let cycles = oscillator::multi_cycle(&self.spec, self.tol())?;
        let s1 = cycles[0].magnitude;
        let w1 = s1.sinh().powi(2);
        let mut rows = Vec::new();
        let mut per_cycle = Vec::new();
        for c in &cycles {
            let class = classify_integrated(c.phase, self.phase_tol());
            let law = battery::multi_cycle_gain(c.cycle, s1)?;
            let ratio = c.magnitude.sinh().powi(2) / w1;
            rows.push(vec![
                p.r.into(),
                p.tau.into(),
                c.cycle.into(),
                c.magnitude.into(),
                c.phase.into(),
                class.to_string().into(),
                ratio.into(),
                law.exact.into(),
                law.asymptote.into(),
            ]);
            per_cycle.push(json!({
                "cycle": c.cycle,
                "abs_s": c.magnitude,
                "theta": c.phase,
                "interference": class.to_string(),
            }));
        }
        let (theta_pred, class_pred) = self.spec.predicted_interference(self.phase_tol())?;
        let record = json!({
            "theta_predicted": theta_pred,
            "class_predicted": class_pred.to_string(),
            "cycles": per_cycle,
        });
        Ok(PointOutput { rows, record, files: Vec::new() })
    }

    fn lmg_squeeze(&self) -> Res {
        let p = self.point;
        let n = self.n()?;
        let states = lmg::evolve_pure_cycles(n, &self.spec, self.cfg.numerics.lmg_tol)?;
        let osc = oscillator::multi_cycle(&self.spec, self.tol())?;
        let mut rows = Vec::new();
        let mut per_cycle = Vec::new();
        for (i, state) in states.iter().enumerate() {
            let fit = lmg::fit_spin_squeezing(state)?;
            let f0 = lmg::ground_state_fidelity(state);
            rows.push(vec![
                n.into(),
                p.r.into(),
                p.tau.into(),
                (i + 1).into(),
                fit.scaled_magnitude().into(),
                fit.xi_phase.into(),
                fit.fidelity.into(),
                f0.into(),
                state.excitations().into(),
                osc[i].magnitude.into(),
                osc[i].phase.into(),
            ]);
            per_cycle.push(fit_record(i + 1, &fit, f0));
        }
        let mut files = Vec::new();
        if self.cfg.output.trajectories {
            let last = states.last().expect("at least one cycle");
            files.push((self.file("state", "csv"), export::spin_state_table(last).render()));
        }
        Ok(PointOutput { rows, record: json!({ "cycles": per_cycle }), files })
    }

    fn lmg_noise(&self) -> Res {
        let p = self.point;
        let n = self.n()?;
        let states = lmg::evolve_lindblad_cycles(n, &self.spec, p.kappa, self.cfg.numerics.lmg_tol)?;
        let tkn = p.tau * p.kappa * (n as f64).sqrt();
        let mut rows = Vec::new();
        let mut per_cycle = Vec::new();
        for (i, state) in states.iter().enumerate() {
            let fit = lmg::fit_spin_squeezing(state)?;
            let f0 = lmg::ground_state_fidelity_mixed(state);
            rows.push(vec![
                n.into(),
                p.r.into(),
                p.tau.into(),
                p.kappa.into(),
                (i + 1).into(),
                tkn.into(),
                flag(tkn <= 1.0),
                flag(tkn <= 1e-2),
                fit.scaled_magnitude().into(),
                fit.xi_phase.into(),
                fit.fidelity.into(),
                f0.into(),
                state.purity().into(),
                state.excitations().into(),
            ]);
            let mut rec = fit_record(i + 1, &fit, f0);
            rec["purity"] = json!(state.purity());
            per_cycle.push(rec);
        }
        let record = json!({
            "tau_kappa_sqrt_n": tkn,
            "within_loose_bound": tkn <= 1.0,
            "within_strict_bound": tkn <= 1e-2,
            "cycles": per_cycle,
        });
        let mut files = Vec::new();
        if self.cfg.output.trajectories && n <= 40 {
            let last = states.last().expect("at least one cycle");
            files.push((self.file("density", "json"), density_json(last)));
        }
        Ok(PointOutput { rows, record, files })
    }

    fn chi2(&self) -> Res {
        let p = self.point;
        let n = self.n()?;
        let tol = self.cfg.numerics.lmg_tol;
        let results = if p.kappa > 0.0 {
            lmg::evolve_lindblad_cycles(n, &self.spec, p.kappa, tol)?
                .iter()
                .map(metrology::chi_squared_min_mixed)
                .collect::<crit_cycle_core::Result<Vec<_>>>()?
        } else {
            lmg::evolve_pure_cycles(n, &self.spec, tol)?
                .iter()
                .map(metrology::chi_squared_min_pure)
                .collect::<crit_cycle_core::Result<Vec<_>>>()?
        };
        let mut rows = Vec::new();
        let mut per_cycle = Vec::new();
        for (i, w) in results.iter().enumerate() {
            rows.push(vec![
                n.into(),
                p.r.into(),
                p.tau.into(),
                p.kappa.into(),
                (i + 1).into(),
                w.chi2_min.into(),
                w.theta_opt.into(),
                w.phi_opt.into(),
                w.qfi.into(),
                flag(w.entangled),
            ]);
            per_cycle.push(json!({
                "cycle": i + 1,
                "chi2_min": w.chi2_min,
                "theta_opt": w.theta_opt,
                "phi_opt": w.phi_opt,
                "qfi": w.qfi,
                "entangled": w.entangled,
            }));
        }
        Ok(PointOutput { rows, record: json!({ "cycles": per_cycle }), files: Vec::new() })
    }

    fn wigner(&self) -> Res {
        let p = self.point;
        let n = self.n()?;
        let tol = self.cfg.numerics.lmg_tol;
        let rho = if p.kappa > 0.0 {
            lmg::evolve_lindblad(n, &self.spec, p.kappa, tol)?
        } else {
            lmg::evolve_pure(n, &self.spec, tol)?.to_density()
        };
        let basis = spin_wigner::build_multipoles::<f64>(n)?;
        let nm = &self.cfg.numerics;
        let grid = spin_wigner::wigner_function(&basis, &rho.rho, nm.wigner_theta, nm.wigner_phi)?;
        let w_min = grid.values.min();
        let w_max = grid.values.max();
        let mult = spin_wigner::multipole_normalization::<f64>(n);
        let reference = spin_wigner::reference_normalization::<f64>(n);
        let row = vec![
            n.into(),
            p.r.into(),
            p.tau.into(),
            p.kappa.into(),
            p.cycles.into(),
            grid.integral.into(),
            grid.integral_trapezoid.into(),
            mult.into(),
            reference.into(),
            grid.max_imag.into(),
            w_min.into(),
            w_max.into(),
        ];
        let record = json!({
            "integral": grid.integral,
            "integral_trapezoid": grid.integral_trapezoid,
            "multipole_normalization": mult,
            "reference_normalization": reference,
            "max_imag": grid.max_imag,
            "w_min": w_min,
            "w_max": w_max,
        });
        let mut files = Vec::new();
        if self.cfg.output.trajectories {
            files.push((self.file("wigner", "csv"), export::wigner_table(&grid).render()));
            files.push((self.file("wigner", "dat"), export::wigner_matrix(&grid)));
        }
        Ok(PointOutput { rows: vec![row], record, files })
    }

    fn protocol_scan(&self) -> Res {
        let p = self.point;
        let one = self.one_cycle()?;
        let phase = one.accumulated_phase()?;
        let (theta_pred, class_pred) = one.predicted_interference(self.phase_tol())?;
        let traj = oscillator::integrate_b(&one, self.tol())?;
        let theta_int = traj.cycle_marks[0].squeezing()?.phase;
        let class_int = classify_integrated(theta_int, self.phase_tol());
        let offset = phase_difference(theta_int, theta_pred);
        let row = vec![
            one.family.name().into(),
            p.r.into(),
            p.tau.into(),
            phase.into(),
            theta_pred.into(),
            class_pred.to_string().into(),
            theta_int.into(),
            class_int.to_string().into(),
            offset.into(),
            one.local_expansion_exponent().into(),
        ];
        let record = json!({
            "accumulated_phase": phase,
            "theta_predicted": theta_pred,
            "class_predicted": class_pred.to_string(),
            "theta_integrated": theta_int,
            "class_integrated": class_int.to_string(),
            "phase_offset": offset,
        });
        let mut files = Vec::new();
        if self.cfg.output.trajectories {
            let mut table = export::CsvTable::new(&["t", "g", "rate", "gap"]);
            let samples = self.cfg.numerics.scan_samples;
            let end = one.duration();
            for k in 0..samples {
                let t = end * k as f64 / (samples - 1) as f64;
                let rate = match one.eval_rate(t) {
                    Ok(v) => v,
                    Err(Error::InfiniteRate { .. }) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                table.push(vec![t.into(), one.eval_g(t)?.into(), rate.into(), one.gap(t).into()]);
            }
            files.push((self.file("scan", "csv"), table.render()));
        }
        Ok(PointOutput { rows: vec![row], record, files })
    }
}

fn flag(b: bool) -> Cell {
    Cell::Int(b as i64)
}

fn fit_record(cycle: usize, fit: &lmg::SqueezeFit, f0: f64) -> Value {
    json!({
        "cycle": cycle,
        "xi_scaled": fit.scaled_magnitude(),
        "beta": fit.xi_phase,
        "fit_fidelity": fit.fidelity,
        "ground_fidelity": f0,
    })
}

fn density_json(state: &SpinDensityMatrix<f64>) -> String {
    let dim = state.rho.nrows();
    let part = |f: fn(&crit_cycle_core::C64) -> f64| -> Vec<Vec<f64>> {
        (0..dim).map(|i| (0..dim).map(|j| f(&state.rho[(i, j)])).collect()).collect()
    };
    let value = json!({
        "n": state.n,
        "basis": "m = J - i, i = 0..N",
        "re": part(|z| z.re),
        "im": part(|z| z.im),
    });
    serde_json::to_string_pretty(&value).expect("finite matrix serializes") + "\n"
}
