//! Experiment configuration: JSON schema, sweep expansion and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use crit_cycle_core::lmg::{DENSITY_MATRIX_CEILING, PURE_STATE_CEILING};
use crit_cycle_core::protocols::ProtocolFamily;
use crit_cycle_core::spin_wigner::MULTIPOLE_CEILING;
use crit_cycle_core::ProtocolSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Cycle,
    Battery,
    NoisyBattery,
    MultiCycle,
    LmgSqueeze,
    LmgNoise,
    Chi2,
    Wigner,
    ProtocolScan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Cycle,
        ExperimentKind::Battery,
        ExperimentKind::NoisyBattery,
        ExperimentKind::MultiCycle,
        ExperimentKind::LmgSqueeze,
        ExperimentKind::LmgNoise,
        ExperimentKind::Chi2,
        ExperimentKind::Wigner,
        ExperimentKind::ProtocolScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Cycle => "cycle",
            ExperimentKind::Battery => "battery",
            ExperimentKind::NoisyBattery => "noisy_battery",
            ExperimentKind::MultiCycle => "multi_cycle",
            ExperimentKind::LmgSqueeze => "lmg_squeeze",
            ExperimentKind::LmgNoise => "lmg_noise",
            ExperimentKind::Chi2 => "chi2",
            ExperimentKind::Wigner => "wigner",
            ExperimentKind::ProtocolScan => "protocol_scan",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Cycle => "oscillator squeeze amplitude b(t) over the drive; predicted vs integrated arg b",
            ExperimentKind::Battery => "work distribution, moments, fluctuation ratio and ergotropy per cycle",
            ExperimentKind::NoisyBattery => "damped covariance evolution; work, purity and Gaussian ergotropy per cycle",
            ExperimentKind::MultiCycle => "squeezing and interference class after each of M cycles",
            ExperimentKind::LmgSqueeze => "finite-N LMG pure evolution fitted to spin-squeezed states",
            ExperimentKind::LmgNoise => "finite-N LMG with collective decay; fit quality against tau kappa sqrt(N)",
            ExperimentKind::Chi2 => "entanglement witness chi^2 = N / F_Q minimized over directions",
            ExperimentKind::Wigner => "spin Wigner function on a (theta, phi) grid",
            ExperimentKind::ProtocolScan => "g(t), rate, accumulated phase and interference class of the drive",
        }
    }

    /// Kinds that evolve the finite-N spin model and need an `n` axis.
    pub fn is_lmg(self) -> bool {
        matches!(self, ExperimentKind::LmgSqueeze | ExperimentKind::LmgNoise | ExperimentKind::Chi2 | ExperimentKind::Wigner)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub family: String,
    pub exponent: f64,
    pub tau: f64,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one_usize")]
    pub cycles: usize,
    #[serde(default = "half")]
    pub z_nu: f64,
}

/// Each present axis overrides the matching protocol field. Points are the
/// Cartesian product in the order r, tau, n, kappa, cycles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "abs_tol")]
    pub abs_tol: f64,
    /// Neglected probability in work distributions and Fock truncations.
    #[serde(default = "tail_bound")]
    pub tail_bound: f64,
    /// Local error target of the spin-model propagators.
    #[serde(default = "lmg_tol")]
    pub lmg_tol: f64,
    /// Angular band (degrees) of the interference classifier.
    #[serde(default = "phase_tolerance_deg")]
    pub phase_tolerance_deg: f64,
    #[serde(default = "wigner_theta")]
    pub wigner_theta: usize,
    #[serde(default = "wigner_phi")]
    pub wigner_phi: usize,
    /// Samples of g(t) per cycle in protocol_scan.
    #[serde(default = "scan_samples")]
    pub scan_samples: usize,
    /// Largest Fock dimension for the exact ergotropy diagonalization.
    #[serde(default = "fock_ceiling")]
    pub fock_ceiling: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            rel_tol: rel_tol(),
            abs_tol: abs_tol(),
            tail_bound: tail_bound(),
            lmg_tol: lmg_tol(),
            phase_tolerance_deg: phase_tolerance_deg(),
            wigner_theta: wigner_theta(),
            wigner_phi: wigner_phi(),
            scan_samples: scan_samples(),
            fock_ceiling: fock_ceiling(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write per-point trajectory / state files besides the summaries.
    #[serde(default = "yes")]
    pub trajectories: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: default_dir(), trajectories: true }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn rel_tol() -> f64 {
    1e-10
}
fn abs_tol() -> f64 {
    1e-12
}
fn tail_bound() -> f64 {
    1e-12
}
fn lmg_tol() -> f64 {
    1e-8
}
fn phase_tolerance_deg() -> f64 {
    5.0
}
fn wigner_theta() -> usize {
    crit_cycle_core::spin_wigner::DEFAULT_THETA_POINTS
}
fn wigner_phi() -> usize {
    crit_cycle_core::spin_wigner::DEFAULT_PHI_POINTS
}
fn scan_samples() -> usize {
    201
}
fn fock_ceiling() -> usize {
    1200
}
fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub protocol: ProtocolBlock,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputBlock,
}

/// One concrete parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub r: f64,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub kappa: f64,
    pub cycles: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }
}

/// Parses a config. Failures come back as diagnostics so that `validate`
/// can list every problem it can see.
pub fn parse(text: &str) -> Result<ExperimentConfig, Diagnostics> {
    let mut diag = Diagnostics::default();
    let value: serde_json::Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            diag.error(format!("config is not valid JSON: {e}"));
            return Err(diag);
        }
    };
    match value.get("schema_version") {
        None => diag.error("schema_version: missing"),
        Some(v) => match v.as_u64() {
            Some(s) if s == SCHEMA_VERSION as u64 => {}
            _ => diag.error(format!("schema_version: expected {SCHEMA_VERSION}, got {v}")),
        },
    }
    if let Some(kind) = value.get("experiment") {
        let known = ExperimentKind::ALL.iter().any(|k| Some(k.name()) == kind.as_str());
        if !known {
            diag.error(format!(
                "experiment: unknown kind {kind}; expected one of {}",
                ExperimentKind::ALL.map(|k| k.name()).join(", ")
            ));
        }
    }
    if !diag.is_ok() {
        return Err(diag);
    }
    serde_json::from_value(value).map_err(|e| {
        diag.error(format!("config: {e}"));
        diag
    })
}

pub fn load(path: &Path) -> Result<ExperimentConfig, Diagnostics> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse(&text),
        Err(e) => Err(Diagnostics { errors: vec![format!("cannot read {}: {e}", path.display())], warnings: vec![] }),
    }
}

impl ExperimentConfig {
    /// SHA-256 of the canonical re-serialization, so formatting and key
    /// order of the input file do not matter.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config always serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn family(&self) -> Option<ProtocolFamily> {
        self.protocol.family.parse().ok()
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let p = &self.protocol;
        let rs = self.sweep.r.clone().unwrap_or_else(|| vec![p.exponent]);
        let taus = self.sweep.tau.clone().unwrap_or_else(|| vec![p.tau]);
        let ns: Vec<Option<usize>> = match &self.sweep.n {
            Some(v) => v.iter().map(|&n| Some(n)).collect(),
            None => vec![None],
        };
        let kappas = self.sweep.kappa.clone().unwrap_or_else(|| vec![0.0]);
        let cycles = self.sweep.cycles.clone().unwrap_or_else(|| vec![p.cycles]);
        let mut out = Vec::new();
        for &r in &rs {
            for &tau in &taus {
                for &n in &ns {
                    for &kappa in &kappas {
                        for &m in &cycles {
                            out.push(SweepPoint { index: out.len(), r, tau, n, kappa, cycles: m });
                        }
                    }
                }
            }
        }
        out
    }

    /// Protocol for one sweep point.
    pub fn spec(&self, point: &SweepPoint) -> crit_cycle_core::Result<ProtocolSpec> {
        let family = self.protocol.family.parse()?;
        ProtocolSpec::new(family, point.r, point.tau)?
            .with_cycles(point.cycles)?
            .with_omega(self.protocol.omega)?
            .with_z_nu(self.protocol.z_nu)
    }

    pub fn validate(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        let p = &self.protocol;
        let kind = self.experiment;
        if self.family().is_none() {
            d.error(format!("protocol.family: unknown family `{}` (power_law, trigonometric)", p.family));
        }
        check_positive(&mut d, "protocol.exponent", p.exponent);
        check_positive(&mut d, "protocol.tau", p.tau);
        check_positive(&mut d, "protocol.omega", p.omega);
        check_positive(&mut d, "protocol.z_nu", p.z_nu);
        if p.cycles == 0 {
            d.error("protocol.cycles: must be at least 1");
        }

        let s = &self.sweep;
        check_list(&mut d, "sweep.r", s.r.as_deref(), |d, name, x| check_positive(d, name, x));
        check_list(&mut d, "sweep.tau", s.tau.as_deref(), |d, name, x| check_positive(d, name, x));
        check_list(&mut d, "sweep.kappa", s.kappa.as_deref(), |d, name, x| {
            if !(x.is_finite() && x >= 0.0) {
                d.error(format!("{name}: damping rate must be a non-negative number, got {x}"));
            }
        });
        check_list(&mut d, "sweep.cycles", s.cycles.as_deref(), |d, name, m| {
            if m == 0 {
                d.error(format!("{name}: must be at least 1"));
            }
        });
        check_list(&mut d, "sweep.n", s.n.as_deref(), |d, name, n| {
            if n < 2 {
                d.error(format!("{name}: spin count must be at least 2, got {n}"));
            }
            let (ceiling, what) = match kind {
                ExperimentKind::Wigner => (MULTIPOLE_CEILING, "multipole basis"),
                ExperimentKind::LmgNoise => (DENSITY_MATRIX_CEILING, "density matrix"),
                _ => (PURE_STATE_CEILING, "pure state"),
            };
            if n > ceiling {
                d.error(format!("{name}: {n} exceeds the {what} ceiling {ceiling}"));
            }
        });

        if kind.is_lmg() && s.n.is_none() {
            d.error("sweep.n: required for experiment kind ".to_string() + kind.name());
        }
        if !kind.is_lmg() && s.n.is_some() {
            d.warn(format!("sweep.n: ignored by experiment kind {kind}"));
        }
        let uses_kappa = matches!(
            kind,
            ExperimentKind::NoisyBattery | ExperimentKind::LmgNoise | ExperimentKind::Chi2 | ExperimentKind::Wigner
        );
        if !uses_kappa && s.kappa.is_some() {
            d.warn(format!("sweep.kappa: ignored by experiment kind {kind}"));
        }
        if matches!(kind, ExperimentKind::Chi2 | ExperimentKind::Wigner) {
            if let (Some(ks), Some(ns)) = (&s.kappa, &s.n) {
                let damped = ks.iter().any(|&k| k > 0.0);
                if let Some(&big) = ns.iter().filter(|&&n| n > DENSITY_MATRIX_CEILING).max() {
                    if damped {
                        d.error(format!(
                            "sweep.n: {big} exceeds the density matrix ceiling {DENSITY_MATRIX_CEILING} needed for kappa > 0"
                        ));
                    }
                }
            }
        }

        if kind.is_lmg() {
            let taus = s.tau.clone().unwrap_or_else(|| vec![p.tau]);
            let ns = s.n.clone().unwrap_or_default();
            for &n in &ns {
                for &tau in &taus {
                    let wt = p.omega * tau;
                    let window = (n as f64).cbrt();
                    if wt > window {
                        d.warn(format!(
                            "omega tau = {wt} at N = {n} is outside quasiadiabatic window: needs 1 <~ omega tau <~ N^(1/3) = {window:.3}"
                        ));
                    } else if wt < 1.0 {
                        d.warn(format!(
                            "omega tau = {wt} at N = {n} is outside quasiadiabatic window: drive faster than the gap (omega tau < 1)"
                        ));
                    }
                }
            }
        }

        let n = &self.numerics;
        check_positive(&mut d, "numerics.rel_tol", n.rel_tol);
        check_positive(&mut d, "numerics.abs_tol", n.abs_tol);
        check_positive(&mut d, "numerics.lmg_tol", n.lmg_tol);
        check_positive(&mut d, "numerics.phase_tolerance_deg", n.phase_tolerance_deg);
        if !(n.tail_bound > 0.0 && n.tail_bound <= 1e-10) {
            d.error(format!("numerics.tail_bound: must lie in (0, 1e-10], got {}", n.tail_bound));
        }
        if n.wigner_theta < 3 || n.wigner_phi < 3 {
            d.error("numerics.wigner_theta / wigner_phi: need at least 3 points each");
        }
        if n.scan_samples < 2 {
            d.error("numerics.scan_samples: need at least 2");
        }
        if self.output.dir.as_os_str().is_empty() {
            d.error("output.dir: empty path");
        }
        d
    }
}

fn check_positive(d: &mut Diagnostics, name: &str, x: f64) {
    if !(x.is_finite() && x > 0.0) {
        d.error(format!("{name}: must be a positive finite number, got {x}"));
    }
}

fn check_list<X: Copy>(d: &mut Diagnostics, name: &str, list: Option<&[X]>, mut each: impl FnMut(&mut Diagnostics, &str, X)) {
    let Some(list) = list else { return };
    if list.is_empty() {
        d.error(format!("{name}: sweep list is empty"));
    }
    for (i, &x) in list.iter().enumerate() {
        each(d, &format!("{name}[{i}]"), x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "schema_version": 1,
        "experiment": "lmg_squeeze",
        "protocol": {"family": "power_law", "exponent": 2.0, "tau": 2.0},
        "sweep": {"n": [100, 200]}
    }"#;

    fn with(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn base_config_is_clean() {
        let c = parse(BASE).unwrap();
        let d = c.validate();
        assert!(d.errors.is_empty() && d.warnings.is_empty(), "{d:?}");
        assert_eq!(c.points().len(), 2);
    }

    #[test]
    fn float_as_string_is_rejected() {
        let text = with(|v| v["protocol"]["tau"] = "2.0".into());
        assert!(parse(&text).is_err());
    }

    #[test]
    fn wrong_schema_and_kind() {
        let err = parse(&with(|v| v["schema_version"] = 7.into())).unwrap_err();
        assert!(err.errors[0].contains("schema_version"));
        let err = parse(&with(|v| v["experiment"] = "teleport".into())).unwrap_err();
        assert!(err.errors[0].contains("unknown kind"));
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(parse(&with(|v| v["protocol"]["gamma"] = 1.0.into())).is_err());
    }

    #[test]
    fn quasiadiabatic_warning() {
        let text = with(|v| {
            v["protocol"]["tau"] = 16.0.into();
            v["sweep"]["n"] = serde_json::json!([100]);
        });
        let d = parse(&text).unwrap().validate();
        assert!(d.is_ok());
        assert_eq!(d.warnings.len(), 1);
        assert!(d.warnings[0].contains("outside quasiadiabatic window"));
    }

    #[test]
    fn hard_errors() {
        let neg = with(|v| {
            v["experiment"] = "lmg_noise".into();
            v["sweep"]["kappa"] = serde_json::json!([0.0, -0.1]);
        });
        let d = parse(&neg).unwrap().validate();
        assert!(d.errors.iter().any(|e| e.starts_with("sweep.kappa[1]")), "{d:?}");
        let zero = with(|v| v["protocol"]["cycles"] = 0.into());
        let d = parse(&zero).unwrap().validate();
        assert!(d.errors.iter().any(|e| e.starts_with("protocol.cycles")));
        let empty = with(|v| v["sweep"]["n"] = serde_json::json!([]));
        assert!(!parse(&empty).unwrap().validate().is_ok());
    }

    #[test]
    fn sweep_order_is_fixed() {
        let text = with(|v| {
            v["sweep"]["r"] = serde_json::json!([1.0, 2.0]);
            v["sweep"]["cycles"] = serde_json::json!([1, 2, 3]);
        });
        let pts = parse(&text).unwrap().points();
        assert_eq!(pts.len(), 12);
        assert_eq!((pts[0].r, pts[0].n, pts[0].cycles), (1.0, Some(100), 1));
        assert_eq!((pts[1].r, pts[1].n, pts[1].cycles), (1.0, Some(100), 2));
        assert_eq!((pts[3].r, pts[3].n, pts[3].cycles), (1.0, Some(200), 1));
        assert_eq!(pts[6].r, 2.0);
        assert!(pts.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = parse(BASE).unwrap();
        let b = parse(&serde_json::to_string(&serde_json::from_str::<serde_json::Value>(BASE).unwrap()).unwrap()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse(&with(|v| v["protocol"]["tau"] = 2.5.into())).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
