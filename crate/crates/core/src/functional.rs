//! Lumped boundary friction functional, its Huber regularization and the
//! one-sided cone.
//!
//! Each term contributes `weight·g·ψ(sign·u[dof])` with `ψ = |·|` on Tresca
//! and leak patches and `ψ = ±id` on the one-sided patches, where `dof`
//! indexes the free unknowns.

use std::collections::BTreeMap;

use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::mesh::PatchKind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalTerm {
    pub dof: usize,
    pub sign: f64,
    pub weight: f64,
    pub g: f64,
    pub kind: PatchKind,
    /// Mesh boundary edge and P2 node the term was lumped from.
    pub edge: usize,
    pub node: usize,
}

impl FunctionalTerm {
    /// Coefficient of `|u|` (absolute-value terms) or of `u` (one-sided).
    fn coefficient(&self) -> f64 {
        self.weight * self.g
    }

    fn is_absolute(&self) -> bool {
        matches!(self.kind, PatchKind::TrescaSlip | PatchKind::Leak)
    }
}

/// Threshold samples grouped by friction kind, in term order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThresholdData {
    pub tangential: Vec<f64>,
    pub normal: Vec<f64>,
    pub outflow: Vec<f64>,
    pub inflow: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct FunctionalSpec {
    pub terms: Vec<FunctionalTerm>,
    n: usize,
}

/// `sign·u[dof] ≥ 0` for each entry; at most one entry per dof.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConeSpec {
    pub entries: Vec<(usize, f64)>,
}

/// Per-dof aggregate `a|x| + b·x` on `lo ≤ x ≤ hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarTerm {
    pub dof: usize,
    pub a: f64,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ScalarTerm {
    /// One-sided derivative of `a|x| + b·x` in direction `d = ±1`, treating
    /// `|x| ≤ zero_tol` as the kink. `None` if the direction leaves the box.
    pub fn directional(&self, x: f64, d: f64, zero_tol: f64) -> Option<f64> {
        if x.abs() <= zero_tol {
            if (d > 0.0 && self.hi <= 0.0) || (d < 0.0 && self.lo >= 0.0) {
                return None;
            }
            Some(self.a + self.b * d)
        } else {
            Some(d * (self.a * x.signum() + self.b))
        }
    }
}

/// Huber function: `|η| − ε/2` for `|η| ≥ ε`, `η²/(2ε)` inside.
pub fn rho_eps(eta: f64, eps: f64) -> f64 {
    if eta.abs() >= eps {
        eta.abs() - 0.5 * eps
    } else {
        eta * eta / (2.0 * eps)
    }
}

pub fn rho_eps_prime(eta: f64, eps: f64) -> f64 {
    if eta.abs() >= eps {
        eta.signum()
    } else {
        eta / eps
    }
}

pub fn rho_eps_second(eta: f64, eps: f64) -> f64 {
    if eta.abs() >= eps {
        0.0
    } else {
        1.0 / eps
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "regularization scale must be positive, got {eps}"
        )))
    }
}

impl FunctionalSpec {
    pub fn new(n: usize, terms: Vec<FunctionalTerm>) -> Result<Self> {
        for t in &terms {
            if t.dof >= n {
                return Err(Error::InvalidArgument(format!("term dof {} out of range", t.dof)));
            }
            if !t.kind.is_friction() {
                return Err(Error::InvalidArgument(format!("{} is not a friction kind", t.kind)));
            }
            if !(t.g >= 0.0 && t.weight >= 0.0) || t.sign.abs() != 1.0 {
                return Err(Error::InvalidArgument(
                    "terms need g ≥ 0, weight ≥ 0 and sign ±1".into(),
                ));
            }
        }
        Ok(Self { terms, n })
    }

    /// Terms of a dof map, re-indexed to free dofs.
    pub fn from_dofmap(dm: &DofMap) -> Result<Self> {
        let terms = dm
            .friction
            .iter()
            .map(|t| {
                let dof = dm
                    .free_slot(t.dof)
                    .ok_or_else(|| Error::InvalidArgument(format!("friction on fixed dof {}", t.dof)))?;
                Ok(FunctionalTerm {
                    dof,
                    sign: t.sign,
                    weight: t.weight,
                    g: t.g,
                    kind: t.kind,
                    edge: t.edge,
                    node: t.node,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dm.n_free(), terms)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn thresholds(&self) -> ThresholdData {
        let mut d = ThresholdData::default();
        for t in &self.terms {
            match t.kind {
                PatchKind::TrescaSlip => d.tangential.push(t.g),
                PatchKind::Leak => d.normal.push(t.g),
                PatchKind::OutflowLeak => d.outflow.push(t.g),
                _ => d.inflow.push(t.g),
            }
        }
        d
    }

    /// Copy with thresholds replaced kind by kind (same order as
    /// [`Self::thresholds`]).
    pub fn with_thresholds(&self, data: &ThresholdData) -> Result<Self> {
        let mut iters = [
            data.tangential.iter(),
            data.normal.iter(),
            data.outflow.iter(),
            data.inflow.iter(),
        ];
        let mut terms = self.terms.clone();
        for t in &mut terms {
            let k = match t.kind {
                PatchKind::TrescaSlip => 0,
                PatchKind::Leak => 1,
                PatchKind::OutflowLeak => 2,
                _ => 3,
            };
            t.g = *iters[k]
                .next()
                .ok_or_else(|| Error::InvalidArgument("threshold data too short".into()))?;
        }
        if iters.iter_mut().any(|i| i.next().is_some()) {
            return Err(Error::InvalidArgument("threshold data too long".into()));
        }
        Self::new(self.n, terms)
    }

    /// All thresholds multiplied by `s ≥ 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.g *= s;
        }
        out
    }

    /// Lumped `∫ g` over all friction patches.
    pub fn total_threshold(&self) -> f64 {
        self.terms.iter().map(FunctionalTerm::coefficient).sum()
    }

    /// Sum of lumped weights per dof (trace mass).
    pub fn trace_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for t in &self.terms {
            w[t.dof] += t.weight;
        }
        w
    }

    pub fn cone(&self) -> Result<ConeSpec> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &self.terms {
            let s = match t.kind {
                PatchKind::OutflowLeak => t.sign,
                PatchKind::InflowLeak => -t.sign,
                _ => continue,
            };
            if let Some(&prev) = map.get(&t.dof) {
                if prev != s {
                    return Err(Error::InvalidPatch(format!(
                        "dof {} is constrained to both signs by one-sided patches",
                        t.dof
                    )));
                }
            }
            map.insert(t.dof, s);
        }
        Ok(ConeSpec {
            entries: map.into_iter().collect(),
        })
    }

    /// Aggregated per-dof terms including cone bounds, sorted by dof.
    pub fn scalar_terms(&self, cone: &ConeSpec) -> Vec<ScalarTerm> {
        let mut map: BTreeMap<usize, ScalarTerm> = BTreeMap::new();
        let blank = |dof| ScalarTerm {
            dof,
            a: 0.0,
            b: 0.0,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
        for t in &self.terms {
            let e = map.entry(t.dof).or_insert_with(|| blank(t.dof));
            let c = t.coefficient();
            match t.kind {
                PatchKind::TrescaSlip | PatchKind::Leak => e.a += c,
                PatchKind::OutflowLeak => e.b += c * t.sign,
                _ => e.b -= c * t.sign,
            }
        }
        for &(dof, s) in &cone.entries {
            let e = map.entry(dof).or_insert_with(|| blank(dof));
            if s > 0.0 {
                e.lo = 0.0;
            } else {
                e.hi = 0.0;
            }
        }
        map.into_values().collect()
    }

    fn term_value(t: &FunctionalTerm, u: &[f64], eps: f64) -> f64 {
        let x = t.sign * u[t.dof];
        let c = t.coefficient();
        match t.kind {
            PatchKind::TrescaSlip | PatchKind::Leak if eps > 0.0 => c * rho_eps(x, eps),
            PatchKind::TrescaSlip | PatchKind::Leak => c * x.abs(),
            PatchKind::OutflowLeak => c * x,
            _ => -c * x,
        }
    }

    /// `J(u)`, `+∞` outside the cone.
    pub fn eval(&self, u: &[f64], cone: &ConeSpec) -> f64 {
        if !cone.contains(u, 0.0) {
            return f64::INFINITY;
        }
        self.terms.iter().map(|t| Self::term_value(t, u, 0.0)).sum()
    }

    /// `J_ε(u)`: Huber-regularized absolute-value terms; one-sided terms
    /// stay linear and the cone is not enforced.
    pub fn eval_eps(&self, u: &[f64], eps: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.terms.iter().map(|t| Self::term_value(t, u, eps)).sum())
    }

    pub fn grad_eps(&self, u: &[f64], eps: f64) -> Result<Vec<f64>> {
        check_eps(eps)?;
        let mut g = vec![0.0; self.n];
        for t in &self.terms {
            let c = t.coefficient();
            g[t.dof] += match t.kind {
                PatchKind::TrescaSlip | PatchKind::Leak => c * t.sign * rho_eps_prime(t.sign * u[t.dof], eps),
                PatchKind::OutflowLeak => c * t.sign,
                _ => -c * t.sign,
            };
        }
        Ok(g)
    }

    /// Diagonal of the Hessian of `J_ε` (zero outside the Huber zone).
    pub fn hessian_diag_eps(&self, u: &[f64], eps: f64) -> Vec<f64> {
        let mut h = vec![0.0; self.n];
        for t in self.terms.iter().filter(|t| t.is_absolute()) {
            h[t.dof] += t.coefficient() * rho_eps_second(t.sign * u[t.dof], eps);
        }
        h
    }
}

impl ConeSpec {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.entries.iter().all(|&(d, s)| s * u[d] >= -tol)
    }

    /// Componentwise projection onto the cone.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let mut v = u.to_vec();
        for &(d, s) in &self.entries {
            if s * v[d] < 0.0 {
                v[d] = 0.0;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(dof: usize, kind: PatchKind, weight: f64, g: f64) -> FunctionalTerm {
        FunctionalTerm {
            dof,
            sign: 1.0,
            weight,
            g,
            kind,
            edge: 0,
            node: 0,
        }
    }

    /// One edge of length L with its start, end and midpoint dofs.
    fn single_edge(kind: PatchKind, l: f64, g: f64) -> FunctionalSpec {
        let w = crate::fem::SIMPSON;
        FunctionalSpec::new(3, (0..3).map(|i| term(i, kind, w[i] * l, g)).collect()).unwrap()
    }

    #[test]
    fn constant_slip_on_one_edge() {
        let s = single_edge(PatchKind::TrescaSlip, 0.4, 2.5);
        let cone = s.cone().unwrap();
        assert!(cone.is_empty());
        for t in [-1.5, 0.0, 0.7] {
            let j = s.eval(&[t; 3], &cone);
            assert!((j - 2.5 * t.abs() * 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn outflow_cone_and_linear_value() {
        let s = single_edge(PatchKind::OutflowLeak, 1.0, 3.0);
        let cone = s.cone().unwrap();
        assert_eq!(cone.entries.len(), 3);
        assert!((s.eval(&[0.2; 3], &cone) - 0.6).abs() < 1e-15);
        assert_eq!(s.eval(&[0.2, -0.1, 0.2], &cone), f64::INFINITY);
        assert_eq!(cone.project(&[0.2, -0.1, 0.3]), vec![0.2, 0.0, 0.3]);
    }

    #[test]
    fn inflow_cone_sign() {
        let s = single_edge(PatchKind::InflowLeak, 1.0, 2.0);
        let cone = s.cone().unwrap();
        assert!(cone.entries.iter().all(|e| e.1 == -1.0));
        assert!((s.eval(&[-0.5; 3], &cone) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn opposite_one_sided_terms_conflict() {
        let s = FunctionalSpec::new(
            1,
            vec![
                term(0, PatchKind::OutflowLeak, 1.0, 1.0),
                term(0, PatchKind::InflowLeak, 1.0, 1.0),
            ],
        )
        .unwrap();
        assert!(matches!(s.cone(), Err(Error::InvalidPatch(_))));
    }

    #[test]
    fn scalar_terms_aggregate() {
        let s = FunctionalSpec::new(
            2,
            vec![
                term(0, PatchKind::TrescaSlip, 0.5, 2.0),
                term(0, PatchKind::TrescaSlip, 0.25, 2.0),
                term(1, PatchKind::InflowLeak, 1.0, 3.0),
            ],
        )
        .unwrap();
        let st = s.scalar_terms(&s.cone().unwrap());
        assert_eq!(st.len(), 2);
        assert_eq!((st[0].a, st[0].b), (1.5, 0.0));
        assert_eq!((st[1].a, st[1].b, st[1].hi), (0.0, -3.0, 0.0));
        assert_eq!(st[1].directional(0.0, 1.0, 0.0), None);
        assert_eq!(st[1].directional(0.0, -1.0, 0.0), Some(3.0));
    }

    #[test]
    fn threshold_round_trip() {
        let s = single_edge(PatchKind::Leak, 1.0, 1.0);
        let mut d = s.thresholds();
        assert_eq!(d.normal.len(), 3);
        d.normal = vec![1.0, 2.0, 3.0];
        let s2 = s.with_thresholds(&d).unwrap();
        assert_eq!(s2.thresholds().normal, vec![1.0, 2.0, 3.0]);
        d.normal.push(4.0);
        assert!(s.with_thresholds(&d).is_err());
    }
}
