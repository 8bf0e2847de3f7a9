//! Boundary patch kinds, their data and the admissibility diagnostics.

use std::fmt;
use std::sync::Arc;

use super::{compute_boundary_frames, Mesh, Point};
use crate::error::{Error, Result};

/// The eleven boundary condition kinds.
///
/// | kind | essential part        | natural part                          |
/// |------|-----------------------|---------------------------------------|
/// | 1    | v = h                 |                                       |
/// | 2    | v_τ = 0               | −p = φ                                |
/// | 3    | v_n = 0               | rot v × n = φ/ν                       |
/// | 4    | v_τ = h               | −p + 2ν ε_nn = φ                      |
/// | 5    | v_n = h               | 2(ν ε_nτ + α v_τ) = φ                 |
/// | 6    |                       | −p n + 2ν ε_n = φ                     |
/// | 7    | v_τ = 0               | −p + ν ∂_n v · n = φ                  |
/// | 8    | v_n = h               | Tresca slip, threshold g              |
/// | 9    | v_τ = h               | leak, threshold g                     |
/// | 10   | v_τ = 0, v_n ≥ 0      | one-sided outflow leak, threshold g   |
/// | 11   | v_τ = 0, v_n ≤ 0      | one-sided inflow leak, threshold g    |
///
/// For the total-pressure equation `p` reads `p + ½|v|²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatchKind {
    Velocity,
    Pressure,
    Vorticity,
    NormalStress,
    RobinSlip,
    Traction,
    PressureNormalDerivative,
    TrescaSlip,
    Leak,
    OutflowLeak,
    InflowLeak,
}

impl PatchKind {
    pub const ALL: [PatchKind; 11] = [
        PatchKind::Velocity,
        PatchKind::Pressure,
        PatchKind::Vorticity,
        PatchKind::NormalStress,
        PatchKind::RobinSlip,
        PatchKind::Traction,
        PatchKind::PressureNormalDerivative,
        PatchKind::TrescaSlip,
        PatchKind::Leak,
        PatchKind::OutflowLeak,
        PatchKind::InflowLeak,
    ];

    pub fn from_number(k: u32) -> Option<Self> {
        (1..=11).contains(&k).then(|| Self::ALL[k as usize - 1])
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            PatchKind::Velocity => "velocity",
            PatchKind::Pressure => "pressure",
            PatchKind::Vorticity => "vorticity",
            PatchKind::NormalStress => "normal-stress",
            PatchKind::RobinSlip => "robin-slip",
            PatchKind::Traction => "traction",
            PatchKind::PressureNormalDerivative => "pressure-normal-derivative",
            PatchKind::TrescaSlip => "tresca-slip",
            PatchKind::Leak => "leak",
            PatchKind::OutflowLeak => "outflow-leak",
            PatchKind::InflowLeak => "inflow-leak",
        }
    }

    pub fn is_friction(self) -> bool {
        matches!(
            self,
            PatchKind::TrescaSlip | PatchKind::Leak | PatchKind::OutflowLeak | PatchKind::InflowLeak
        )
    }

    /// Kinds that leave the normal velocity free and fix the pressure level.
    pub fn fixes_pressure(self) -> bool {
        matches!(
            self,
            PatchKind::Pressure
                | PatchKind::NormalStress
                | PatchKind::Traction
                | PatchKind::PressureNormalDerivative
                | PatchKind::Leak
                | PatchKind::OutflowLeak
                | PatchKind::InflowLeak
        )
    }

    fn accepts(self, field: &str) -> bool {
        use PatchKind::*;
        match field {
            "velocity" => self == Velocity,
            "h" => matches!(self, NormalStress | RobinSlip | TrescaSlip | Leak),
            "phi_normal" => matches!(self, Pressure | NormalStress | PressureNormalDerivative),
            "phi" => matches!(self, Vorticity | RobinSlip | Traction),
            "alpha" => self == RobinSlip,
            "threshold" => self.is_friction(),
            _ => false,
        }
    }
}

impl fmt::Display for PatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.number(), self.name())
    }
}

/// Scalar data field over the plane, optionally carrying its source text.
#[derive(Clone)]
pub struct ScalarField {
    f: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    constant: Option<f64>,
    source: Option<String>,
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        Self {
            f: Arc::new(move |_| c),
            constant: Some(c),
            source: None,
        }
    }

    pub fn new(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            constant: None,
            source: None,
        }
    }

    pub fn with_source(mut self, s: impl Into<String>) -> Self {
        self.source = Some(s.into());
        self
    }

    pub fn eval(&self, p: Point) -> f64 {
        (self.f)(p)
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    /// Pointwise product with a constant.
    pub fn scaled(&self, s: f64) -> Self {
        let f = self.f.clone();
        Self {
            f: Arc::new(move |p| s * f(p)),
            constant: self.constant.map(|c| s * c),
            source: None,
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.source, self.constant) {
            (Some(s), _) => write!(f, "ScalarField({s})"),
            (None, Some(c)) => write!(f, "ScalarField({c})"),
            _ => write!(f, "ScalarField(<fn>)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn constant(v: [f64; 2]) -> Self {
        Self {
            x: ScalarField::constant(v[0]),
            y: ScalarField::constant(v[1]),
        }
    }

    pub fn new(x: ScalarField, y: ScalarField) -> Self {
        Self { x, y }
    }

    pub fn eval(&self, p: Point) -> [f64; 2] {
        [self.x.eval(p), self.y.eval(p)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            x: self.x.scaled(s),
            y: self.y.scaled(s),
        }
    }
}

/// Per-patch data. Unused entries must stay `None`; missing optional
/// entries mean zero, except the threshold which friction kinds require.
#[derive(Clone, Debug, Default)]
pub struct PatchData {
    /// h on kind 1.
    pub velocity: Option<VectorField>,
    /// Scalar trace datum: tangential on kinds 4 and 9, normal on 5 and 8.
    pub h: Option<ScalarField>,
    /// Scalar φ on kinds 2, 4, 7 (paired with u_n).
    pub phi_normal: Option<ScalarField>,
    /// Vector φ on kinds 3, 5, 6 (paired with u).
    pub phi: Option<VectorField>,
    /// Row-major α matrix on kind 5.
    pub alpha: Option<[ScalarField; 4]>,
    /// g on kinds 8 to 11.
    pub threshold: Option<ScalarField>,
}

#[derive(Clone, Debug)]
pub struct BoundaryPatch {
    pub tag: u8,
    pub kind: PatchKind,
    pub data: PatchData,
    /// Declares the patch convex; checked against the discrete curvature.
    pub convex: bool,
}

impl BoundaryPatch {
    pub fn new(tag: u8, kind: PatchKind) -> Self {
        Self {
            tag,
            kind,
            data: PatchData::default(),
            convex: false,
        }
    }

    pub fn with_velocity(mut self, v: VectorField) -> Self {
        self.data.velocity = Some(v);
        self
    }

    pub fn with_h(mut self, h: ScalarField) -> Self {
        self.data.h = Some(h);
        self
    }

    pub fn with_phi_normal(mut self, phi: ScalarField) -> Self {
        self.data.phi_normal = Some(phi);
        self
    }

    pub fn with_phi(mut self, phi: VectorField) -> Self {
        self.data.phi = Some(phi);
        self
    }

    pub fn with_alpha(mut self, alpha: [ScalarField; 4]) -> Self {
        self.data.alpha = Some(alpha);
        self
    }

    pub fn with_threshold(mut self, g: ScalarField) -> Self {
        self.data.threshold = Some(g);
        self
    }

    pub fn declared_convex(mut self) -> Self {
        self.convex = true;
        self
    }

    /// Threshold field; zero when absent.
    pub fn threshold(&self) -> ScalarField {
        self.data
            .threshold
            .clone()
            .unwrap_or_else(|| ScalarField::constant(0.0))
    }

    fn present_fields(&self) -> Vec<&'static str> {
        let d = &self.data;
        [
            ("velocity", d.velocity.is_some()),
            ("h", d.h.is_some()),
            ("phi_normal", d.phi_normal.is_some()),
            ("phi", d.phi.is_some()),
            ("alpha", d.alpha.is_some()),
            ("threshold", d.threshold.is_some()),
        ]
        .into_iter()
        .filter_map(|(n, p)| p.then_some(n))
        .collect()
    }

    /// Checks that the data matches the kind and is finite at `points`.
    pub fn validate(&self, points: &[Point]) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPatch(format!("patch {}: {m}", self.tag)));
        if !(1..=11).contains(&self.tag) {
            return bad(format!("tag {} outside 1..=11", self.tag));
        }
        for field in self.present_fields() {
            if !self.kind.accepts(field) {
                return bad(format!("kind {} takes no '{field}' data", self.kind));
            }
        }
        if self.kind.is_friction() && self.data.threshold.is_none() {
            return bad(format!("kind {} needs a threshold", self.kind));
        }
        for &p in points {
            let mut vals = Vec::new();
            let d = &self.data;
            if let Some(v) = &d.velocity {
                vals.extend(v.eval(p));
            }
            if let Some(v) = &d.phi {
                vals.extend(v.eval(p));
            }
            for s in [&d.h, &d.phi_normal, &d.threshold].into_iter().flatten() {
                vals.push(s.eval(p));
            }
            if let Some(a) = &d.alpha {
                vals.extend(a.iter().map(|s| s.eval(p)));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return bad(format!("non-finite data at ({}, {})", p[0], p[1]));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Note,
    Warning,
    Error,
}

#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct AdmissibilityReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl AdmissibilityReport {
    fn push(&mut self, severity: Severity, code: &'static str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity,
            code,
            message: message.into(),
        });
    }

    pub fn has(&self, code: &str) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }

    pub fn worst(&self) -> Option<Severity> {
        self.diagnostics.iter().map(|d| d.severity).max()
    }

    /// Admissible when nothing above a note was raised.
    pub fn is_clean(&self) -> bool {
        self.worst().is_none_or(|s| s == Severity::Note)
    }
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            let s = match d.severity {
                Severity::Note => "note",
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            writeln!(f, "{s}[{}]: {}", d.code, d.message)?;
        }
        Ok(())
    }
}

/// Structural diagnostics for a mesh and its patch list. Never fails; the
/// solver refuses warnings unless explicitly overridden.
pub fn check_admissibility(mesh: &Mesh, patches: &[BoundaryPatch]) -> AdmissibilityReport {
    let mut r = AdmissibilityReport::default();
    let tags = mesh.tags();
    let kind_of = |tag: u8| patches.iter().find(|p| p.tag == tag).map(|p| p.kind);

    for &t in &tags {
        let defs = patches.iter().filter(|p| p.tag == t).count();
        if defs == 0 {
            r.push(
                Severity::Error,
                "missing-patch",
                format!("boundary tag {t} has no patch definition"),
            );
        } else if defs > 1 {
            r.push(
                Severity::Error,
                "duplicate-patch",
                format!("boundary tag {t} is defined {defs} times"),
            );
        }
    }
    for p in patches {
        if !tags.contains(&p.tag) {
            r.push(
                Severity::Warning,
                "absent-patch",
                format!("patch {} is defined but no boundary edge carries it", p.tag),
            );
        }
    }
    let present: Vec<PatchKind> = tags.iter().filter_map(|&t| kind_of(t)).collect();
    let has = |k: PatchKind| present.contains(&k);

    if present.iter().all(|&k| k == PatchKind::Velocity) && !present.is_empty() {
        r.push(
            Severity::Note,
            "no-friction",
            "no friction patches: problem is pure Dirichlet",
        );
    } else if !present.iter().any(|k| k.is_friction()) {
        r.push(
            Severity::Note,
            "no-friction",
            "no friction patches: the inequality is an equation",
        );
    }
    if !has(PatchKind::Velocity) {
        r.push(
            Severity::Warning,
            "coercivity",
            "coercivity not guaranteed: no velocity (kind 1) patch",
        );
    }
    for one_sided in [PatchKind::OutflowLeak, PatchKind::InflowLeak] {
        if !has(one_sided) {
            continue;
        }
        let companion = [
            PatchKind::Pressure,
            PatchKind::NormalStress,
            PatchKind::PressureNormalDerivative,
            PatchKind::Leak,
            PatchKind::OutflowLeak,
            PatchKind::InflowLeak,
        ]
        .into_iter()
        .filter(|&k| k != one_sided)
        .any(has);
        if !companion {
            r.push(
                Severity::Warning,
                "one-sided-companion",
                format!(
                    "one-sided leak patch of kind {one_sided} without a companion patch of kind 2, 4, 7, 9, 10 or 11"
                ),
            );
        }
    }

    let geom = compute_boundary_frames(mesh).ok();
    for p in patches {
        let mut pts = Vec::new();
        for e in mesh.boundary_edges().iter().filter(|e| e.tag == p.tag) {
            let (a, b) = (mesh.nodes()[e.nodes[0]], mesh.nodes()[e.nodes[1]]);
            pts.extend([a, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], b]);
        }
        if let Err(e) = p.validate(&pts) {
            r.push(Severity::Error, "patch-data", e.to_string());
            continue;
        }
        if p.kind.is_friction() {
            let g = p.threshold();
            if let Some(q) = pts.iter().find(|&&q| g.eval(q) <= 0.0) {
                r.push(
                    Severity::Warning,
                    "threshold",
                    format!("patch {}: threshold is not positive at ({}, {})", p.tag, q[0], q[1]),
                );
            }
        }
        if let Some(a) = &p.data.alpha {
            let indefinite = pts.iter().find(|&&q| {
                let m = [a[0].eval(q), a[1].eval(q), a[2].eval(q), a[3].eval(q)];
                let off = 0.5 * (m[1] + m[2]);
                let tr = m[0] + m[3];
                let det = m[0] * m[3] - off * off;
                tr < -1e-12 || det < -1e-12 * (1.0 + tr * tr)
            });
            if let Some(q) = indefinite {
                r.push(
                    Severity::Warning,
                    "alpha",
                    format!(
                        "patch {}: alpha is not positive semidefinite at ({}, {})",
                        p.tag, q[0], q[1]
                    ),
                );
            }
        }
        if p.convex {
            if let Some(k) = geom.as_ref().and_then(|g| g.min_kappa_on(mesh, p.tag)) {
                if k < -1e-8 {
                    r.push(
                        Severity::Warning,
                        "convexity",
                        format!("patch {} is declared convex but has curvature {k:e}", p.tag),
                    );
                }
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square, RectSide};

    #[test]
    fn pure_dirichlet_note() {
        let m = unit_square(2, 2, |_, _| 1).unwrap();
        let r = check_admissibility(&m, &[BoundaryPatch::new(1, PatchKind::Velocity)]);
        assert!(r.has("no-friction"));
        assert!(r.diagnostics[0].message.contains("pure Dirichlet"));
        assert!(r.is_clean());
    }

    #[test]
    fn lonely_one_sided_patch_is_flagged() {
        let m = unit_square(2, 2, |s, _| if s == RectSide::Top { 10 } else { 1 }).unwrap();
        let patches = [
            BoundaryPatch::new(1, PatchKind::Velocity),
            BoundaryPatch::new(10, PatchKind::OutflowLeak).with_threshold(ScalarField::constant(1.0)),
        ];
        let r = check_admissibility(&m, &patches);
        assert!(r.has("one-sided-companion"));
        assert!(!r.has("coercivity"));
    }

    #[test]
    fn missing_velocity_patch_warns() {
        let m = unit_square(2, 2, |_, _| 3).unwrap();
        let r = check_admissibility(&m, &[BoundaryPatch::new(3, PatchKind::Vorticity)]);
        let d = r.diagnostics.iter().find(|d| d.code == "coercivity").unwrap();
        assert!(d.message.contains("coercivity not guaranteed"));
        assert_eq!(d.severity, Severity::Warning);
    }

    #[test]
    fn nonpositive_threshold_and_bad_alpha() {
        let m = unit_square(2, 2, |s, _| match s {
            RectSide::Bottom => 8,
            RectSide::Top => 5,
            _ => 1,
        })
        .unwrap();
        let c = ScalarField::constant;
        let patches = [
            BoundaryPatch::new(1, PatchKind::Velocity),
            BoundaryPatch::new(8, PatchKind::TrescaSlip).with_threshold(ScalarField::new(|p| p[0] - 0.5)),
            BoundaryPatch::new(5, PatchKind::RobinSlip).with_alpha([c(-1.0), c(0.0), c(0.0), c(-1.0)]),
        ];
        let r = check_admissibility(&m, &patches);
        assert!(r.has("threshold"));
        assert!(r.has("alpha"));
    }

    #[test]
    fn wrong_data_for_kind_is_rejected() {
        let p = BoundaryPatch::new(2, PatchKind::Pressure).with_threshold(ScalarField::constant(1.0));
        assert!(matches!(p.validate(&[]), Err(Error::InvalidPatch(_))));
        let q = BoundaryPatch::new(8, PatchKind::TrescaSlip);
        assert!(q.validate(&[]).is_err());
    }

    #[test]
    fn kind_numbers_round_trip() {
        for k in PatchKind::ALL {
            assert_eq!(PatchKind::from_number(k.number() as u32), Some(k));
        }
        assert_eq!(PatchKind::from_number(12), None);
        assert_eq!(PatchKind::from_number(0), None);
    }
}
