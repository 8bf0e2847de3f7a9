//! From mesh and patches to a [`DiscreteVI`]: frames, dof map, lifting,
//! forms per equation kind, loads, and the reverse maps to physical fields.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{boundary_form_matrix, boundary_phi_load, ConvectionForm, FeSpace, Slot};
use crate::dofmap::{build_dofmap, patch_table, DofMap};
use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::linalg::{norm_inf, sub, CsrMatrix, SaddleSolver};
use crate::mesh::{
    check_admissibility, compute_boundary_frames, AdmissibilityReport, BoundaryGeometry, BoundaryPatch, Mesh, Severity,
    VectorField,
};
use crate::vi::{Convection, ConvectionKind, DiscreteVI, NoConvection};

/// Which system is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    /// Linear Stokes (`a03`, `F3`).
    Stokes,
    /// Navier–Stokes with static pressure (`a01`, `a11`, `F1`).
    NavierStokesStatic,
    /// Navier–Stokes with total (Bernoulli) pressure (`a02`, `a12`, `F2`).
    NavierStokesTotal,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Stokes => "stokes",
            Self::NavierStokesStatic => "navier-stokes-static",
            Self::NavierStokesTotal => "navier-stokes-total",
        }
    }

    pub fn form(&self) -> Option<ConvectionForm> {
        match self {
            Self::Stokes => None,
            Self::NavierStokesStatic => Some(ConvectionForm::Advective),
            Self::NavierStokesTotal => Some(ConvectionForm::Rotational),
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Equation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stokes" => Ok(Self::Stokes),
            "navier-stokes-static" => Ok(Self::NavierStokesStatic),
            "navier-stokes-total" => Ok(Self::NavierStokesTotal),
            _ => Err(Error::Config(format!("unknown equation '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub mesh: Mesh,
    pub patches: Vec<BoundaryPatch>,
    pub nu: f64,
    pub force: VectorField,
    pub equation: Equation,
    /// Proceed despite admissibility warnings.
    pub override_admissibility: bool,
}

impl ProblemSpec {
    pub fn new(mesh: Mesh, patches: Vec<BoundaryPatch>, nu: f64, equation: Equation) -> Self {
        Self {
            mesh,
            patches,
            nu,
            force: VectorField::constant([0.0, 0.0]),
            equation,
            override_admissibility: false,
        }
    }

    pub fn with_force(mut self, f: VectorField) -> Self {
        self.force = f;
        self
    }

    pub fn overriding_admissibility(mut self) -> Self {
        self.override_admissibility = true;
        self
    }
}

/// Convection form on the free dofs of an assembled system.
#[derive(Debug)]
pub struct FeConvection {
    space: Arc<FeSpace>,
    rotation: CsrMatrix,
    free: Vec<usize>,
    form: ConvectionForm,
}

impl FeConvection {
    fn cartesian(&self, w: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.rotation.nrows()];
        for (s, &i) in self.free.iter().enumerate() {
            full[i] = w[s];
        }
        self.rotation.mul_vec(&full)
    }

    fn local_free(&self, g: &[f64]) -> Vec<f64> {
        let l = self.rotation.tr_mul_vec(g);
        self.free.iter().map(|&i| l[i]).collect()
    }

    fn matrix(&self, slot: Slot, w: &[f64]) -> CsrMatrix {
        let c = self.space.convection_matrix(self.form, slot, &self.cartesian(w));
        c.congruence(&self.rotation).select(&self.free, &self.free)
    }
}

impl Convection for FeConvection {
    fn kind(&self) -> ConvectionKind {
        match self.form {
            ConvectionForm::Advective => ConvectionKind::Advective,
            ConvectionForm::Rotational => ConvectionKind::Rotational,
        }
    }

    fn dim(&self) -> usize {
        self.free.len()
    }

    fn oseen(&self, w: &[f64]) -> CsrMatrix {
        self.matrix(Slot::First, w)
    }

    fn transport(&self, w: &[f64]) -> CsrMatrix {
        self.matrix(Slot::Second, w)
    }

    fn grad_first(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let g = self
            .space
            .convection_grad_first(self.form, &self.cartesian(u), &self.cartesian(v));
        self.local_free(&g)
    }

    fn quartic(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (q, g) = self.space.l4_power(&self.cartesian(u));
        Some((q, self.local_free(&g)))
    }
}

/// Assembled system with everything needed to map back to fields.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub spec: ProblemSpec,
    pub geometry: BoundaryGeometry,
    pub dofmap: DofMap,
    pub space: Arc<FeSpace>,
    /// Local (rotated) components to Cartesian, full velocity space.
    pub rotation: CsrMatrix,
    /// Lifting `U`, full local vector.
    pub lifting: Vec<f64>,
    /// Pressure dof removed to fix the constant, if any.
    pub gauge: Option<usize>,
    pub admissibility: AdmissibilityReport,
    pub vi: DiscreteVI,
}

/// Rows of `b` kept after the optional gauge and whether one was needed,
/// decided numerically from `1ᵀB` on the unconstrained columns.
fn gauge_rows(b: &CsrMatrix, constrained: &[bool]) -> (Vec<usize>, Option<usize>) {
    let ones = vec![1.0; b.nrows()];
    let col = b.tr_mul_vec(&ones);
    let free_max = col
        .iter()
        .zip(constrained)
        .filter(|(_, &c)| !c)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    let rows: Vec<usize> = (0..b.nrows()).collect();
    if free_max <= 1e-10 * b.max_abs() {
        (rows[1..].to_vec(), Some(0))
    } else {
        (rows, None)
    }
}

pub fn assemble(spec: &ProblemSpec) -> Result<AssembledSystem> {
    if !(spec.nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "viscosity must be positive, got {}",
            spec.nu
        )));
    }
    let mesh = &spec.mesh;
    let admissibility = check_admissibility(mesh, &spec.patches);
    match admissibility.worst() {
        Some(Severity::Error) => {
            return Err(Error::InvalidPatch(format!(
                "inadmissible configuration:\n{admissibility}"
            )))
        }
        Some(Severity::Warning) if !spec.override_admissibility => {
            return Err(Error::InvalidPatch(format!(
                "admissibility warnings (override to proceed):\n{admissibility}"
            )))
        }
        _ => {}
    }
    let tags = mesh.tags();
    for p in &spec.patches {
        if !tags.contains(&p.tag) && (p.data.phi.is_some() || p.data.phi_normal.is_some()) {
            return Err(Error::InvalidPatch(format!("φ supplied for absent patch {}", p.tag)));
        }
    }
    let geometry = compute_boundary_frames(mesh)?;
    let table = patch_table(mesh, &spec.patches)?;
    let dofmap = build_dofmap(mesh, &geometry, &spec.patches)?;
    let space = Arc::new(FeSpace::new(mesh, dofmap.nodes.clone()));
    let rotation = dofmap.rotation();
    let nv = dofmap.n_velocity();

    let k_cart =
        space
            .strain_matrix(spec.nu)
            .add(&boundary_form_matrix(mesh, &geometry, &space.nodes, &table, spec.nu));
    let k_loc = k_cart.congruence(&rotation);
    let b_loc = space.divergence_matrix().matmul(&rotation);
    let h_loc = space.h1_matrix().congruence(&rotation);

    let lifting = compute_lifting(&dofmap, &k_loc, &b_loc)?;
    let u_cart = rotation.mul_vec(&lifting);
    let lifted = lifting.iter().any(|&x| x != 0.0);

    let mut a_loc = k_loc.clone();
    let mut f_cart = space.body_load(&|x| spec.force.eval(x));
    let phi = boundary_phi_load(mesh, &geometry, &space.nodes, &table);
    f_cart.iter_mut().zip(&phi).for_each(|(a, b)| *a += b);
    let mut f_loc = sub(&rotation.tr_mul_vec(&f_cart), &k_loc.mul_vec(&lifting));
    if let (Some(form), true) = (spec.equation.form(), lifted) {
        let c1 = space.convection_matrix(form, Slot::First, &u_cart);
        let c2 = space.convection_matrix(form, Slot::Second, &u_cart);
        a_loc = a_loc.add(&c1.add(&c2).congruence(&rotation));
        let uu = rotation.tr_mul_vec(&c1.mul_vec(&u_cart));
        f_loc = sub(&f_loc, &uu);
    }

    let free = dofmap.free_dofs().to_vec();
    let (rows, gauge) = gauge_rows(&b_loc, &dofmap.fixed);
    let a0 = a_loc.select(&free, &free);
    let b = b_loc.select(&rows, &free);
    let h = h_loc.select(&free, &free);
    let f: Vec<f64> = free.iter().map(|&i| f_loc[i]).collect();

    let convection: Arc<dyn Convection> = match spec.equation.form() {
        None => Arc::new(NoConvection(free.len())),
        Some(form) => Arc::new(FeConvection {
            space: space.clone(),
            rotation: rotation.clone(),
            free: free.clone(),
            form,
        }),
    };
    let functional = FunctionalSpec::from_dofmap(&dofmap)?;
    let vi = DiscreteVI::new(a0, b, f, h, convection, functional)?;
    debug_assert_eq!(lifting.len(), nv);
    Ok(AssembledSystem {
        spec: spec.clone(),
        geometry,
        dofmap,
        space,
        rotation,
        lifting,
        gauge,
        admissibility,
        vi,
    })
}

/// Strain-form Stokes extension of the essential data. Friction traces of
/// the lifting are pinned to zero so that `J` acts on `w` alone.
fn compute_lifting(dm: &DofMap, k_loc: &CsrMatrix, b_loc: &CsrMatrix) -> Result<Vec<f64>> {
    let nv = dm.n_velocity();
    let values: Vec<f64> = (0..nv)
        .map(|i| if dm.lifting_fixed[i] { dm.lifting_values[i] } else { 0.0 })
        .collect();
    if values.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; nv]);
    }
    let mut pinned = dm.lifting_fixed.clone();
    for t in &dm.friction {
        pinned[t.dof] = true;
    }
    let (rows, gauge) = gauge_rows(b_loc, &pinned);
    if gauge.is_some() {
        let ones = vec![1.0; b_loc.nrows()];
        let col = b_loc.tr_mul_vec(&ones);
        let flux: f64 = (0..nv).map(|i| col[i] * values[i]).sum();
        let scale = col.iter().map(|c| c.abs()).sum::<f64>() * norm_inf(&values);
        if flux.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            // B = −∫q div, so the outward flux is −flux
            return Err(Error::IncompatibleFlux { flux: -flux });
        }
    }
    let b = b_loc.select(&rows, &(0..nv).collect::<Vec<_>>());
    let mut solver = SaddleSolver::new(nv, b.nrows());
    let (u, _) = solver.solve(k_loc, &b, Some(&pinned), &values, &vec![0.0; b.nrows()])?;
    let worst = (0..nv)
        .filter(|&i| dm.lifting_fixed[i])
        .map(|i| (u[i] - values[i]).abs())
        .fold(0.0, f64::max);
    if worst > 1e-10 * norm_inf(&values).max(1.0) {
        return Err(Error::Solver(format!("lifting misses its trace data by {worst:e}")));
    }
    Ok(u)
}

impl AssembledSystem {
    /// `U + w` as a full local vector.
    pub fn velocity_local(&self, w: &[f64]) -> Vec<f64> {
        let mut v = self.dofmap.expand(w);
        v.iter_mut().zip(&self.lifting).for_each(|(a, b)| *a += b);
        v
    }

    /// Cartesian velocity of `U + w` at every P2 node, interleaved.
    pub fn velocity_cartesian(&self, w: &[f64]) -> Vec<f64> {
        self.rotation.mul_vec(&self.velocity_local(w))
    }

    /// Pressure at every mesh vertex (the gauge dof is zero).
    pub fn pressure_full(&self, p: &[f64]) -> Vec<f64> {
        match self.gauge {
            None => p.to_vec(),
            Some(g) => {
                let mut out = Vec::with_capacity(p.len() + 1);
                out.extend_from_slice(&p[..g]);
                out.push(0.0);
                out.extend_from_slice(&p[g..]);
                out
            }
        }
    }

    pub fn n_free(&self) -> usize {
        self.dofmap.n_free()
    }
}
