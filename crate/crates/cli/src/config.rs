//! Problem configuration: TOML with a `[problem]` section, one `[[patch]]`
//! table per boundary tag, and optional `[solver]`, `[output]`, `[check]`
//! and `[mms]` sections.
//!
//! ```toml
//! [problem]
//! mesh = "channel.mesh"        # relative to the config file
//! equation = "stokes"          # stokes | navier-stokes-static | navier-stokes-total
//! nu = 0.1
//! force = ["0", "-1"]          # numbers or expressions in x, y
//!
//! [[patch]]
//! tag = 1
//! kind = 1                     # 1..=11 or the kind name
//! velocity = ["y*(1-y)", 0]
//!
//! [[patch]]
//! tag = 8
//! kind = "tresca-slip"
//! g = 0.05
//!
//! [solver]
//! scheme = "oseen"             # oseen | picard | regularized-path
//! tol = 1e-10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use viflow_core::mesh::{BoundaryPatch, Mesh, PatchKind, ScalarField, VectorField};
use viflow_core::mms::MmsCase;
use viflow_core::problem::{Equation, ProblemSpec};
use viflow_core::vi::{Scheme, SolveOptions};

use crate::expr::Expr;
use crate::CliError;

/// Number or expression text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl Value {
    fn expr(&self, what: &str) -> Result<Expr, CliError> {
        match self {
            Value::Number(v) => Ok(Expr::Num(*v)),
            Value::Text(s) => Expr::parse(s).map_err(|e| CliError::Config(format!("{what}: '{s}' {e}"))),
        }
    }

    fn scalar(&self, what: &str) -> Result<ScalarField, CliError> {
        let e = self.expr(what)?;
        if let Some(c) = e.constant() {
            return Ok(ScalarField::constant(c));
        }
        let src = e.to_string();
        Ok(ScalarField::new(move |p| e.eval(p[0], p[1])).with_source(src))
    }
}

fn vector(v: &[Value; 2], what: &str) -> Result<VectorField, CliError> {
    Ok(VectorField::new(v[0].scalar(what)?, v[1].scalar(what)?))
}

/// Patch kind by number or name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KindValue {
    Number(i64),
    Name(String),
}

impl KindValue {
    pub fn resolve(&self) -> Result<PatchKind, CliError> {
        match self {
            KindValue::Number(k) => u32::try_from(*k)
                .ok()
                .and_then(PatchKind::from_number)
                .ok_or_else(|| CliError::Config(format!("unknown patch kind {k} (expected 1..=11)"))),
            KindValue::Name(s) => PatchKind::ALL
                .into_iter()
                .find(|k| k.name() == s)
                .ok_or_else(|| CliError::Config(format!("unknown patch kind '{s}'"))),
        }
    }
}

fn zero_force() -> [Value; 2] {
    [Value::Number(0.0), Value::Number(0.0)]
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub mesh: String,
    pub equation: String,
    pub nu: f64,
    #[serde(default = "zero_force")]
    pub force: [Value; 2],
    #[serde(default, skip_serializing_if = "is_false")]
    pub override_admissibility: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSection {
    pub tag: u8,
    pub kind: KindValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[Value; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_normal: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<[Value; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[Value; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Value>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub convex: bool,
}

impl PatchSection {
    fn build(&self) -> Result<BoundaryPatch, CliError> {
        let kind = self.kind.resolve()?;
        let what = |f: &str| format!("patch {} {f}", self.tag);
        let mut p = BoundaryPatch::new(self.tag, kind);
        if let Some(v) = &self.velocity {
            p = p.with_velocity(vector(v, &what("velocity"))?);
        }
        if let Some(v) = &self.h {
            p = p.with_h(v.scalar(&what("h"))?);
        }
        if let Some(v) = &self.phi_normal {
            p = p.with_phi_normal(v.scalar(&what("phi_normal"))?);
        }
        if let Some(v) = &self.phi {
            p = p.with_phi(vector(v, &what("phi"))?);
        }
        if let Some(a) = &self.alpha {
            let s = |i: usize| a[i].scalar(&what("alpha"));
            p = p.with_alpha([s(0)?, s(1)?, s(2)?, s(3)?]);
        }
        if let Some(v) = &self.g {
            p = p.with_threshold(v.scalar(&what("g"))?);
        }
        if self.convex {
            p = p.declared_convex();
        }
        Ok(p)
    }
}

fn default_scheme() -> String {
    "oseen".into()
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_outer() -> usize {
    100
}
fn default_one() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_scheme")]
    pub scheme: String,
    /// Outer increment tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Inner VI residual tolerance.
    #[serde(default = "default_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_one")]
    pub relaxation: f64,
    /// Decreasing regularization scales of the path scheme; empty uses
    /// `1e-2·2^{-k}`, `k < 12`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    /// Estimate the coercivity and continuity constants.
    #[serde(default = "default_true")]
    pub estimate: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            tol: default_tol(),
            inner_tol: default_tol(),
            max_outer: default_max_outer(),
            relaxation: 1.0,
            eps: Vec::new(),
            estimate: true,
        }
    }
}

fn default_directory() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["vtk".into(), "csv".into()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_sweep() -> Vec<f64> {
    vec![1.0, 10.0, 100.0]
}
fn default_load_factor() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// Threshold multipliers of the sweep.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<f64>,
    /// Body-force factor of the data-Lipschitz check.
    #[serde(default = "default_load_factor")]
    pub load_factor: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            sweep: default_sweep(),
            load_factor: default_load_factor(),
        }
    }
}

fn default_levels() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsSection {
    pub case: String,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

/// Only `[mms]` is required for the `mms` verb; every other verb needs
/// `[problem]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSection>,
    #[serde(default, rename = "patch", skip_serializing_if = "Vec::is_empty")]
    pub patches: Vec<PatchSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mms: Option<MmsSection>,
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return Err(CliError::Usage("empty config".into()));
        }
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn problem(&self) -> Result<&ProblemSection, CliError> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [problem] section".into()))
    }

    pub fn equation(&self) -> Result<Equation, CliError> {
        self.problem()?.equation.parse().map_err(CliError::from)
    }

    pub fn scheme(&self) -> Result<Scheme, CliError> {
        self.solver.scheme.parse().map_err(CliError::from)
    }

    pub fn mms_case(&self) -> Result<Option<MmsCase>, CliError> {
        self.mms
            .as_ref()
            .map(|m| m.case.parse::<MmsCase>().map_err(CliError::from))
            .transpose()
    }

    /// Static checks that need neither the mesh nor a solve.
    pub fn validate(&self) -> Result<(), CliError> {
        self.mms_case()?;
        if self.problem.is_none() {
            if self.mms.is_none() {
                return Err(CliError::Config("missing [problem] section".into()));
            }
            return Ok(());
        }
        self.equation()?;
        let scheme = self.scheme()?;
        let p = self.problem()?;
        if !(p.nu > 0.0) {
            return Err(CliError::Config(format!("viscosity must be positive, got {}", p.nu)));
        }
        for v in &p.force {
            v.expr("force")?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for patch in &self.patches {
            if !(1..=11).contains(&patch.tag) {
                return Err(CliError::Config(format!("patch tag {} outside 1..=11", patch.tag)));
            }
            if !seen.insert(patch.tag) {
                return Err(CliError::Config(format!("patch tag {} defined twice", patch.tag)));
            }
            let kind = patch.kind.resolve()?;
            if scheme == Scheme::RegularizedPath && matches!(kind, PatchKind::OutflowLeak | PatchKind::InflowLeak) {
                return Err(CliError::Config("scheme excludes one-sided constraints".into()));
            }
            patch.build()?;
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.inner_tol > 0.0) || s.max_outer == 0 || !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
            return Err(CliError::Config(
                "solver needs positive tolerances, max_outer >= 1 and relaxation in (0, 1]".into(),
            ));
        }
        if s.eps.windows(2).any(|w| w[1] >= w[0]) || s.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(CliError::Config("eps must be positive and decreasing".into()));
        }
        for f in &self.output.formats {
            if f != "vtk" && f != "csv" {
                return Err(CliError::Config(format!("unknown output format '{f}'")));
            }
        }
        if self.check.sweep.iter().any(|s| !(*s > 0.0)) || !(self.check.load_factor > 0.0) {
            return Err(CliError::Config("check factors must be positive".into()));
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solver;
        let mut o = SolveOptions {
            tol: s.tol,
            max_outer: s.max_outer,
            relaxation: s.relaxation,
            ..Default::default()
        };
        o.inner.tol = s.inner_tol;
        if !s.eps.is_empty() {
            o.eps_list = s.eps.clone();
        }
        o
    }
}

/// A parsed config together with its location and loaded mesh.
pub struct Loaded {
    pub config: ProblemConfig,
    pub path: PathBuf,
    pub mesh_text: Option<String>,
    pub hash: String,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = ProblemConfig::parse(&text)?;
        let mesh_text = match &config.problem {
            Some(p) => {
                let mp = resolve(path, &p.mesh);
                Some(
                    std::fs::read_to_string(&mp)
                        .map_err(|e| CliError::Config(format!("cannot read mesh {}: {e}", mp.display())))?,
                )
            }
            None => None,
        };
        let hash = config_hash(&config, mesh_text.as_deref());
        Ok(Self {
            config,
            path: path.to_path_buf(),
            mesh_text,
            hash,
        })
    }

    pub fn mesh(&self) -> Result<Mesh, CliError> {
        let text = self
            .mesh_text
            .as_deref()
            .ok_or_else(|| CliError::Config("missing [problem] section".into()))?;
        Mesh::parse(text).map_err(|e| CliError::Config(format!("mesh: {e}")))
    }

    pub fn spec(&self, override_admissibility: bool) -> Result<ProblemSpec, CliError> {
        let c = &self.config;
        let p = c.problem()?;
        let patches = c
            .patches
            .iter()
            .map(PatchSection::build)
            .collect::<Result<Vec<_>, _>>()?;
        let mut spec =
            ProblemSpec::new(self.mesh()?, patches, p.nu, c.equation()?).with_force(vector(&p.force, "force")?);
        spec.override_admissibility = p.override_admissibility || override_admissibility;
        Ok(spec)
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .unwrap_or_else(|| resolve(&self.path, &self.config.output.directory))
    }
}

fn resolve(config: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// SHA-256 of the canonical config text and the mesh text.
pub fn config_hash(config: &ProblemConfig, mesh: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(config.to_text().as_bytes());
    if let Some(m) = mesh {
        h.update(b"\0");
        h.update(m.as_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[problem]
mesh = "m.mesh"
equation = "navier-stokes-static"
nu = 0.1
force = ["sin(pi*x)", 0]

[[patch]]
tag = 1
kind = 1
velocity = ["y*(1-y)", 0.0]

[[patch]]
tag = 8
kind = "tresca-slip"
g = 0.05
h = "0"

[solver]
scheme = "picard"
eps = [0.1, 0.01]
"#;

    #[test]
    fn parse_serialize_parse_is_identity() {
        let a = ProblemConfig::parse(SAMPLE).unwrap();
        let b = ProblemConfig::parse(&a.to_text()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let bad = SAMPLE.replace("kind = 1\n", "kind = 12\n");
        let e = ProblemConfig::parse(&bad).unwrap_err();
        assert!(
            matches!(e, CliError::Config(ref m) if m.contains("unknown patch kind 12")),
            "{e}"
        );
    }

    #[test]
    fn path_scheme_rejects_cones() {
        let bad = SAMPLE
            .replace("scheme = \"picard\"", "scheme = \"regularized-path\"")
            .replace("kind = \"tresca-slip\"", "kind = 10");
        let e = ProblemConfig::parse(&bad).unwrap_err();
        assert_eq!(e.to_string(), "config error: scheme excludes one-sided constraints");
    }

    #[test]
    fn empty_config_is_a_usage_error() {
        assert!(matches!(ProblemConfig::parse("  \n"), Err(CliError::Usage(_))));
    }

    #[test]
    fn bad_expression_is_reported() {
        let bad = SAMPLE.replace("sin(pi*x)", "sin(pi*z)");
        let e = ProblemConfig::parse(&bad).unwrap_err();
        assert!(e.to_string().contains("unknown name 'z'"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ProblemConfig::parse(&SAMPLE.replace("nu = 0.1", "nu = 0.1\nmu = 2")).is_err());
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ProblemConfig::parse(SAMPLE).unwrap();
        let b = ProblemConfig::parse(&SAMPLE.replace("0.05", "0.06")).unwrap();
        assert_ne!(config_hash(&a, Some("m")), config_hash(&b, Some("m")));
        assert_ne!(config_hash(&a, Some("m")), config_hash(&a, Some("n")));
        assert_eq!(config_hash(&a, None).len(), 64);
    }
}
