//! Discrete variational inequalities and their solvers.
//!
//! Unknowns are the free velocity dofs `w` (the lifting is folded into the
//! load and into `A0`). The problem is: find `w ∈ K` with
//! `a0(w, u − w) + a1(w, w, u − w) + J(u) − J(w) ≥ ⟨F, u − w⟩` for all
//! `u ∈ K`, the divergence constraint `B w = 0` carried by a pressure.

mod estimates;
mod inner;
mod outer;
mod residual;

use std::fmt;
use std::sync::Arc;

pub use estimates::{estimate_constants, CoercivityEstimate, EstimateOptions, RieszMap};
pub use inner::{solve_convex_vi, InnerOptions, InnerSolution};
pub use outer::{
    contraction_radius, frozen_convection_picard, galerkin_regularized_path, oseen_fixed_point, solve, EnergyCheck,
    PathStep, RadiusInfo, Scheme, SolveOptions, SolveReport, VISolution,
};
pub use residual::{fit_pressure, residual_free_pressure, residual_with_pressure, trace_zero_tol};

use crate::error::{Error, Result};
use crate::functional::{ConeSpec, FunctionalSpec, ScalarTerm};
use crate::linalg::{norm_inf, CsrMatrix};

/// Which trilinear form drives the convection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvectionKind {
    None,
    /// `⟨(w·∇)u, v⟩`
    Advective,
    /// `⟨rot w × u, v⟩`
    Rotational,
}

impl fmt::Display for ConvectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Advective => "advective",
            Self::Rotational => "rotational",
        })
    }
}

/// Trilinear convection form `a1(w, u, v)` on free dofs.
pub trait Convection: Send + Sync + fmt::Debug {
    fn kind(&self) -> ConvectionKind;
    fn dim(&self) -> usize;
    /// Matrix of `u ↦ a1(w, u, ·)`.
    fn oseen(&self, w: &[f64]) -> CsrMatrix;
    /// Matrix of `u ↦ a1(u, w, ·)`.
    fn transport(&self, w: &[f64]) -> CsrMatrix;
    /// Gradient of `w ↦ a1(w, u, v)`.
    fn grad_first(&self, u: &[f64], v: &[f64]) -> Vec<f64>;
    /// `∫|u|⁴` and its gradient, where an L⁴ norm is meaningful.
    fn quartic(&self, _u: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }
    /// `a1(w, w, ·)` as a vector.
    fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.oseen(w).mul_vec(w)
    }
}

/// The zero form (Stokes).
#[derive(Clone, Debug)]
pub struct NoConvection(pub usize);

impl Convection for NoConvection {
    fn kind(&self) -> ConvectionKind {
        ConvectionKind::None
    }
    fn dim(&self) -> usize {
        self.0
    }
    fn oseen(&self, _: &[f64]) -> CsrMatrix {
        CsrMatrix::zeros(self.0, self.0)
    }
    fn transport(&self, _: &[f64]) -> CsrMatrix {
        CsrMatrix::zeros(self.0, self.0)
    }
    fn grad_first(&self, _: &[f64], _: &[f64]) -> Vec<f64> {
        vec![0.0; self.0]
    }
    fn apply(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.0]
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteVI {
    pub a0: CsrMatrix,
    pub b: CsrMatrix,
    pub f: Vec<f64>,
    /// H¹ inner product on free dofs.
    pub h: CsrMatrix,
    pub convection: Arc<dyn Convection>,
    pub functional: FunctionalSpec,
    pub cone: ConeSpec,
    pub constants: Option<CoercivityEstimate>,
}

impl DiscreteVI {
    pub fn new(
        a0: CsrMatrix,
        b: CsrMatrix,
        f: Vec<f64>,
        h: CsrMatrix,
        convection: Arc<dyn Convection>,
        functional: FunctionalSpec,
    ) -> Result<Self> {
        let n = a0.nrows();
        let ok = a0.ncols() == n
            && b.ncols() == n
            && f.len() == n
            && h.nrows() == n
            && h.ncols() == n
            && convection.dim() == n
            && functional.dim() == n;
        if !ok {
            return Err(Error::InvalidArgument("inconsistent VI dimensions".into()));
        }
        let cone = functional.cone()?;
        Ok(Self {
            a0,
            b,
            f,
            h,
            convection,
            functional,
            cone,
            constants: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    /// Computes and stores the constants; fails when `alpha ≤ 0` unless
    /// `allow_noncoercive`.
    pub fn estimate(&mut self, opts: &EstimateOptions, allow_noncoercive: bool) -> Result<&CoercivityEstimate> {
        let c = estimate_constants(self, opts)?;
        if !(c.alpha > 0.0) && !allow_noncoercive {
            return Err(Error::NotCoercive { alpha: c.alpha });
        }
        self.constants = Some(c);
        Ok(self.constants.as_ref().unwrap())
    }

    pub fn with_load(&self, f: Vec<f64>) -> Result<Self> {
        if f.len() != self.dim() {
            return Err(Error::InvalidArgument("load has wrong length".into()));
        }
        let mut out = self.clone();
        out.f = f;
        if let Some(c) = out.constants.as_mut() {
            c.dual_norm_f = RieszMap::new(&out.h, &out.b)?.dual_norm(&out.f);
        }
        Ok(out)
    }

    pub fn with_functional(&self, functional: FunctionalSpec) -> Result<Self> {
        let mut out = Self::new(
            self.a0.clone(),
            self.b.clone(),
            self.f.clone(),
            self.h.clone(),
            self.convection.clone(),
            functional,
        )?;
        out.constants = self.constants.clone();
        Ok(out)
    }

    pub fn scalar_terms(&self) -> Vec<ScalarTerm> {
        self.functional.scalar_terms(&self.cone)
    }

    /// `A0 + N(w)`.
    pub fn linearized(&self, w: &[f64]) -> CsrMatrix {
        match self.convection.kind() {
            ConvectionKind::None => self.a0.clone(),
            _ => self.a0.add(&self.convection.oseen(w)),
        }
    }

    /// Scale for absolute tolerances: largest load entry or friction
    /// coefficient.
    pub fn scale(&self) -> f64 {
        let j = self
            .scalar_terms()
            .iter()
            .map(|t| t.a.abs().max(t.b.abs()))
            .fold(0.0, f64::max);
        norm_inf(&self.f).max(j).max(f64::MIN_POSITIVE)
    }

    /// VI residual of the full (nonlinear) problem at `w`.
    pub fn residual(&self, w: &[f64], p: Option<&[f64]>) -> f64 {
        let a = self.linearized(w);
        let terms = self.scalar_terms();
        match p {
            Some(p) => residual_with_pressure(&a, &self.b, &self.f, &terms, w, p),
            None => residual_free_pressure(&a, &self.b, &self.f, &terms, w),
        }
    }

    pub fn h1_norm(&self, w: &[f64]) -> f64 {
        self.h.bilinear(w, w).max(0.0).sqrt()
    }

    /// Energy bound and uniqueness verdicts for a computed `w`.
    pub fn check_estimates(&self, w: &[f64]) -> Result<EstimateCheck> {
        let c = self
            .constants
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("constants not estimated".into()))?;
        let norm = self.h1_norm(w);
        let bound = c.dual_norm_f / c.alpha;
        let uniqueness = c.uniqueness_value();
        Ok(EstimateCheck {
            energy: EnergyCheck {
                norm,
                bound,
                holds: norm <= bound * (1.0 + 1e-8),
            },
            uniqueness_value: uniqueness,
            uniqueness_guaranteed: self.convection.kind() == ConvectionKind::None || uniqueness < 1.0,
        })
    }
}

/// Result of [`DiscreteVI::check_estimates`]. The energy bound depends on
/// the load and `alpha` only, never on the thresholds.
#[derive(Clone, Debug)]
pub struct EstimateCheck {
    pub energy: EnergyCheck,
    pub uniqueness_value: f64,
    pub uniqueness_guaranteed: bool,
}

#[cfg(test)]
mod tests;
