//! Run configuration read from TOML, with a content hash over every
//! semantic field and declarative output checks.

use crate::degeneration::{FamilyConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::geometry::{self, GluedSurface, Profile};
use crate::heattrace::FitBasis;
use crate::parametrix::ParametrixConfig;
use crate::renorm::{RenormConfig, RenormZetaConfig};
use crate::spectrum::Surface;
use crate::zetadet::MellinConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Omega0,
    Z,
    Glued,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: SurfaceKind,
    pub gamma: f64,
    pub omega0_cap: String,
    pub omega0_params: Vec<f64>,
    pub z_cap: String,
    pub z_params: Vec<f64>,
    /// Gluing scale for `kind = "glued"`.
    pub epsilon: f64,
    /// Dirichlet truncation radius; required for `kind = "z"`.
    pub truncate: Option<f64>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            kind: SurfaceKind::Omega0,
            gamma: 0.7,
            omega0_cap: "polyblend".into(),
            omega0_params: vec![],
            z_cap: "polyblend".into(),
            z_params: vec![],
            epsilon: 0.125,
            truncate: None,
        }
    }
}

impl SurfaceConfig {
    pub fn omega0(&self) -> Result<Profile> {
        geometry::build_omega0(self.gamma, &self.omega0_cap, &self.omega0_params)
    }

    pub fn z(&self) -> Result<Profile> {
        geometry::build_z(self.gamma, &self.z_cap, &self.z_params)
    }

    pub fn glued(&self) -> Result<GluedSurface> {
        geometry::glue(&self.omega0()?, &self.z()?, self.epsilon)
    }

    pub fn profile(&self) -> Result<Profile> {
        match self.kind {
            SurfaceKind::Omega0 => self.omega0(),
            SurfaceKind::Z => self.z(),
            SurfaceKind::Glued => Ok(self.glued()?.profile),
        }
    }

    pub fn surface(&self) -> Result<Surface> {
        let p = self.profile()?;
        match (self.kind, self.truncate) {
            (SurfaceKind::Z, Some(r)) => Ok(Surface::truncated(p, r)),
            (SurfaceKind::Z, None) => Err(Error::Config("surface.kind = \"z\" needs surface.truncate".into())),
            (_, Some(_)) => Err(Error::Config("surface.truncate applies to kind = \"z\" only".into())),
            (_, None) => Ok(Surface::closed(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub lambda_max: f64,
    pub points_per_wavelength: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { lambda_max: 400.0, points_per_wavelength: 12.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatTraceConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub basis: FitBasis,
}

impl Default for HeatTraceConfig {
    fn default() -> Self {
        HeatTraceConfig {
            t_min: 0.01,
            t_max: 0.5,
            samples: 40,
            basis: FitBasis { n: 2, k_max: 8, include_odd: false, allow_log: false },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetConfig {
    /// `"spectral"` or `"conformal"`.
    pub route: String,
    pub mellin: MellinConfig,
}

impl Default for DetConfig {
    fn default() -> Self {
        DetConfig { route: "spectral".into(), mellin: MellinConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeKernelConfig {
    pub gamma: f64,
    pub t: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for ConeKernelConfig {
    fn default() -> Self {
        ConeKernelConfig { gamma: 0.7, t: 1.0, r_min: 0.05, r_max: 5.0, points: 100 }
    }
}

/// A check on the JSON summary of a run: the value at the dotted `path`
/// must satisfy every bound given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub path: String,
    pub equals: Option<f64>,
    #[serde(default)]
    pub tol: f64,
    pub at_most: Option<f64>,
    pub at_least: Option<f64>,
    pub is_true: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub path: String,
    pub value: Option<serde_json::Value>,
    pub pass: bool,
    pub message: String,
}

impl Check {
    pub fn evaluate(&self, doc: &serde_json::Value) -> CheckOutcome {
        let value = lookup(doc, &self.path);
        let fail = |msg: String| CheckOutcome { path: self.path.clone(), value: value.cloned(), pass: false, message: msg };
        let Some(v) = value else {
            return fail("missing".into());
        };
        if let Some(want) = self.is_true {
            return match v.as_bool() {
                Some(b) if b == want => CheckOutcome { path: self.path.clone(), value: Some(v.clone()), pass: true, message: "ok".into() },
                _ => fail(format!("expected {want}")),
            };
        }
        let Some(x) = v.as_f64() else {
            return fail("not a number".into());
        };
        if let Some(e) = self.equals {
            if !((x - e).abs() <= self.tol) {
                return fail(format!("|{x} − {e}| > {}", self.tol));
            }
        }
        if let Some(m) = self.at_most {
            if !(x <= m) {
                return fail(format!("{x} > {m}"));
            }
        }
        if let Some(m) = self.at_least {
            if !(x >= m) {
                return fail(format!("{x} < {m}"));
            }
        }
        CheckOutcome { path: self.path.clone(), value: Some(v.clone()), pass: true, message: "ok".into() }
    }
}

/// `a.b.0.c` into objects and arrays.
pub fn lookup<'a>(doc: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    path.split('.').try_fold(doc, |v, key| match v {
        serde_json::Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => v.get(key),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub spectrum: SpectrumConfig,
    pub heattrace: HeatTraceConfig,
    pub det: DetConfig,
    pub renorm: RenormConfig,
    pub renorm_zeta: RenormZetaConfig,
    pub parametrix: ParametrixConfig,
    pub sweep: SweepConfig,
    pub family: FamilyConfig,
    pub conekernel: ConeKernelConfig,
    pub checks: Vec<Check>,
    /// Not hashed.
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Every tolerance, budget and scale must be positive.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spectrum.lambda_max", self.spectrum.lambda_max),
            ("spectrum.points_per_wavelength", self.spectrum.points_per_wavelength),
            ("heattrace.t_min", self.heattrace.t_min),
            ("det.mellin.tail_tol", self.det.mellin.tail_tol),
            ("det.mellin.b", self.det.mellin.b),
            ("parametrix.neumann_tol", self.parametrix.neumann_tol),
            ("sweep.row_budget", self.sweep.row_budget),
            ("sweep.rel_tol", self.sweep.rel_tol),
            ("sweep.omega0_lambda", self.sweep.omega0_lambda),
            ("family.lambda_max", self.family.lambda_max),
            ("family.gap_factor", self.family.gap_factor),
            ("conekernel.t", self.conekernel.t),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.heattrace.t_max <= self.heattrace.t_min {
            return Err(Error::Config("heattrace.t_max must exceed t_min".into()));
        }
        if let Some(c) = self.checks.iter().find(|c| c.tol < 0.0) {
            return Err(Error::Config(format!("check {} has a negative tolerance", c.path)));
        }
        if !matches!(self.det.route.as_str(), "spectral" | "conformal") {
            return Err(Error::Config(format!("det.route must be spectral or conformal, got {:?}", self.det.route)));
        }
        if self.output.workers == Some(0) {
            return Err(Error::Config("output.workers must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of every field except `output`.
    pub fn hash(&self) -> String {
        let semantic = RunConfig { output: OutputConfig::default(), ..self.clone() };
        let text = serde_json::to_string(&semantic).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn partial_sections_fill_in() {
        let c = RunConfig::from_toml("[surface]\ngamma = 1.0\nomega0_cap = \"sphere\"\n[det.mellin]\nb = 0.5\n").unwrap();
        assert_eq!(c.surface.gamma, 1.0);
        assert_eq!(c.det.mellin.b, 0.5);
        assert_eq!(c.det.mellin.t_ref, MellinConfig::default().t_ref);
        assert!(c.surface.surface().is_ok());
    }

    #[test]
    fn unknown_keys_and_bad_tolerances_are_rejected() {
        assert!(matches!(RunConfig::from_toml("[surface]\ngama = 1.0\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[sweep]\nrel_tol = -1.0\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[det]\nroute = \"magic\"\n"), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        b.output.workers = Some(3);
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.sweep.epsilons.pop();
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.checks.push(Check { path: "x".into(), equals: Some(1.0), tol: 0.1, at_most: None, at_least: None, is_true: None });
        assert_ne!(a.hash(), d.hash());
    }

    #[test]
    fn toml_round_trip_keeps_hash() {
        let mut a = RunConfig::default();
        a.checks.push(Check { path: "zeta0".into(), equals: Some(-2.0 / 3.0), tol: 1e-4, at_most: None, at_least: None, is_true: None });
        let b = RunConfig::from_toml(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn checks_on_json() {
        let doc = json!({"zeta0": -0.66667, "rows": [{"ok": true}], "s": "x"});
        let eq = Check { path: "zeta0".into(), equals: Some(-2.0 / 3.0), tol: 1e-4, at_most: None, at_least: None, is_true: None };
        assert!(eq.evaluate(&doc).pass);
        let tight = Check { tol: 1e-8, ..eq.clone() };
        assert!(!tight.evaluate(&doc).pass);
        let b = Check { path: "rows.0.ok".into(), equals: None, tol: 0.0, at_most: None, at_least: None, is_true: Some(true) };
        assert!(b.evaluate(&doc).pass);
        let missing = Check { path: "nope".into(), ..eq.clone() };
        assert_eq!(missing.evaluate(&doc).message, "missing");
        let s = Check { path: "s".into(), ..eq };
        assert!(!s.evaluate(&doc).pass);
    }

    #[test]
    fn z_needs_truncation() {
        let c = SurfaceConfig { kind: SurfaceKind::Z, ..Default::default() };
        assert!(c.surface().is_err());
        let c = SurfaceConfig { kind: SurfaceKind::Z, truncate: Some(4.0), ..Default::default() };
        assert!(c.surface().unwrap().dirichlet());
    }
}
