//! Friction and leak multipliers from a converged velocity, and the
//! complementarity check.
//!
//! With `r = F − A0 w − N(w)w − Bᵀp` on the free dofs, the multiplier of a
//! friction term at dof `i` is `σ = −r_i·sign / Σ m`, the sum running over
//! the lumped weights of all terms at that dof. The equation
//! `r + Σ m·sign·σ e_i = 0` then holds exactly on friction dofs; elsewhere it
//! reduces to the momentum residual.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::mesh::PatchKind;
use crate::vi::{fit_pressure, DiscreteVI};

/// Multiplier at one friction dof for one patch kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierEntry {
    pub kind: PatchKind,
    /// Free-dof index.
    pub dof: usize,
    /// P2 node.
    pub node: usize,
    /// Physical trace is `sign·w[dof]`.
    pub sign: f64,
    /// Summed lumped weight of the terms merged into this entry.
    pub weight: f64,
    /// Threshold at the node.
    pub g: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Multipliers {
    pub sigma_tau: Vec<MultiplierEntry>,
    pub sigma_n: Vec<MultiplierEntry>,
    pub sigma_plus: Vec<MultiplierEntry>,
    pub sigma_minus: Vec<MultiplierEntry>,
    /// Pressure used in the residual.
    pub pressure: Vec<f64>,
    /// `max |r + Σ m·sign·σ e_i|` over free dofs.
    pub equation_residual: f64,
}

impl Multipliers {
    pub fn entries(&self) -> impl Iterator<Item = &MultiplierEntry> {
        self.sigma_tau
            .iter()
            .chain(&self.sigma_n)
            .chain(&self.sigma_plus)
            .chain(&self.sigma_minus)
    }

    fn group_mut(&mut self, kind: PatchKind) -> &mut Vec<MultiplierEntry> {
        match kind {
            PatchKind::TrescaSlip => &mut self.sigma_tau,
            PatchKind::Leak => &mut self.sigma_n,
            PatchKind::OutflowLeak => &mut self.sigma_plus,
            _ => &mut self.sigma_minus,
        }
    }

    pub fn group(&self, kind: PatchKind) -> &[MultiplierEntry] {
        match kind {
            PatchKind::TrescaSlip => &self.sigma_tau,
            PatchKind::Leak => &self.sigma_n,
            PatchKind::OutflowLeak => &self.sigma_plus,
            _ => &self.sigma_minus,
        }
    }

    /// Lumped `(Σ m σ²)^{1/2}` of one group.
    pub fn lumped_l2(&self, kind: PatchKind) -> f64 {
        self.group(kind)
            .iter()
            .map(|e| e.weight * e.sigma * e.sigma)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest threshold over all entries.
    pub fn threshold_scale(&self) -> f64 {
        self.entries().map(|e| e.g.abs()).fold(0.0, f64::max)
    }
}

/// Recovers the multipliers at `(w, p)`. When `p` is `None`, or when the
/// fitted pressure gives a smaller VI residual, the least-squares pressure is
/// used. Fails unless the VI residual is at most `tol`.
pub fn recover_multipliers(vi: &DiscreteVI, w: &[f64], p: Option<&[f64]>, tol: f64) -> Result<Multipliers> {
    if w.len() != vi.dim() {
        return Err(Error::InvalidArgument("velocity has wrong length".into()));
    }
    let a = vi.linearized(w);
    let terms = vi.scalar_terms();
    let fitted = fit_pressure(&a, &vi.b, &vi.f, &terms, w);
    let res_fit = vi.residual(w, Some(&fitted));
    let (pressure, res) = match p {
        Some(p) if p.len() == vi.b.nrows() => {
            let r = vi.residual(w, Some(p));
            if r <= res_fit {
                (p.to_vec(), r)
            } else {
                (fitted, res_fit)
            }
        }
        Some(_) => return Err(Error::InvalidArgument("pressure has wrong length".into())),
        None => (fitted, res_fit),
    };
    if !(res <= tol) {
        return Err(Error::Precondition(format!(
            "velocity not converged: VI residual {res:e} exceeds {tol:e}"
        )));
    }

    let aw = a.mul_vec(w);
    let btp = vi.b.tr_mul_vec(&pressure);
    let r: Vec<f64> = (0..w.len()).map(|i| vi.f[i] - aw[i] - btp[i]).collect();

    // merge terms per (dof, kind); the weight per dof covers all kinds
    let mut merged: BTreeMap<(usize, PatchKind), MultiplierEntry> = BTreeMap::new();
    let mut dof_weight = vec![0.0; w.len()];
    for t in &vi.functional.terms {
        dof_weight[t.dof] += t.weight;
        let e = merged.entry((t.dof, t.kind)).or_insert(MultiplierEntry {
            kind: t.kind,
            dof: t.dof,
            node: t.node,
            sign: t.sign,
            weight: 0.0,
            g: 0.0,
            sigma: 0.0,
        });
        if e.sign != t.sign {
            return Err(Error::InvalidPatch(format!(
                "friction terms at dof {} disagree on the trace sign",
                t.dof
            )));
        }
        // weighted mean of the threshold
        e.g = (e.g * e.weight + t.g * t.weight) / (e.weight + t.weight);
        e.weight += t.weight;
    }

    let mut out = Multipliers {
        pressure,
        ..Default::default()
    };
    let mut eq = r.clone();
    for mut e in merged.into_values() {
        let m = dof_weight[e.dof];
        if !(m > 0.0) {
            return Err(Error::InvalidPatch(format!(
                "friction dof {} has zero boundary weight",
                e.dof
            )));
        }
        e.sigma = -r[e.dof] * e.sign / m;
        eq[e.dof] += e.weight * e.sign * e.sigma;
        out.group_mut(e.kind).push(e);
    }
    out.equation_residual = norm_inf(&eq);
    Ok(out)
}

/// The checked conditions, one per row of the complementarity system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// `|σ_τ| ≤ g_τ`
    TangentialBound,
    /// `σ_τ v_τ + g_τ|v_τ| = 0`
    TangentialProduct,
    /// `|σ_n| ≤ g_n`
    NormalBound,
    /// `σ_n v_n + g_n|v_n| = 0`
    NormalProduct,
    /// `σ₊ₙ + g₊ₙ ≥ 0`
    OutflowBound,
    /// `(σ₊ₙ + g₊ₙ) v_n = 0`
    OutflowProduct,
    /// `σ₋ₙ − g₋ₙ ≤ 0`
    InflowBound,
    /// `(σ₋ₙ − g₋ₙ) v_n = 0`
    InflowProduct,
    /// `v_n ≥ 0` on outflow-leak patches
    OutflowSign,
    /// `v_n ≤ 0` on inflow-leak patches
    InflowSign,
}

impl Condition {
    pub const ALL: [Condition; 10] = [
        Condition::TangentialBound,
        Condition::TangentialProduct,
        Condition::NormalBound,
        Condition::NormalProduct,
        Condition::OutflowBound,
        Condition::OutflowProduct,
        Condition::InflowBound,
        Condition::InflowProduct,
        Condition::OutflowSign,
        Condition::InflowSign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::TangentialBound => "|sigma_tau| <= g_tau",
            Condition::TangentialProduct => "sigma_tau v_tau + g_tau |v_tau| = 0",
            Condition::NormalBound => "|sigma_n| <= g_n",
            Condition::NormalProduct => "sigma_n v_n + g_n |v_n| = 0",
            Condition::OutflowBound => "sigma_+n + g_+n >= 0",
            Condition::OutflowProduct => "(sigma_+n + g_+n) v_n = 0",
            Condition::InflowBound => "sigma_-n - g_-n <= 0",
            Condition::InflowProduct => "(sigma_-n - g_-n) v_n = 0",
            Condition::OutflowSign => "v_n >= 0 on outflow leak",
            Condition::InflowSign => "v_n <= 0 on inflow leak",
        }
    }
}

/// Worst violation of one condition and the P2 node where it occurs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    /// Nonnegative.
    pub max: f64,
    pub node: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ComplementarityReport {
    pub violations: Vec<Violation>,
    pub tol: f64,
    pub pass: bool,
}

impl ComplementarityReport {
    pub fn get(&self, c: Condition) -> &Violation {
        self.violations
            .iter()
            .find(|v| v.condition == c)
            .expect("all conditions are reported")
    }

    pub fn worst(&self) -> f64 {
        self.violations.iter().map(|v| v.max).fold(0.0, f64::max)
    }
}

impl fmt::Display for ComplementarityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            let at = v.node.map(|n| format!(" at node {n}")).unwrap_or_default();
            writeln!(f, "  {:<40} {:.3e}{at}", v.condition.name(), v.max)?;
        }
        write!(
            f,
            "  complementarity {} (tol {:.3e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.tol
        )
    }
}

/// Default tolerance `1e-6·max g` (or `1e-6` without thresholds).
pub fn default_complementarity_tol(m: &Multipliers) -> f64 {
    let g = m.threshold_scale();
    1e-6 * if g > 0.0 { g } else { 1.0 }
}

/// Evaluates every condition at every entry. Products are divided by
/// `max(1, |v|)` so that they share the units of the bounds.
pub fn check_complementarity(m: &Multipliers, w: &[f64], tol: Option<f64>) -> ComplementarityReport {
    let tol = tol.unwrap_or_else(|| default_complementarity_tol(m));
    let mut worst: BTreeMap<Condition, (f64, Option<usize>)> =
        Condition::ALL.iter().map(|&c| (c, (0.0, None))).collect();
    let mut record = |c: Condition, val: f64, node: usize| {
        let slot = worst.get_mut(&c).expect("known condition");
        let val = val.max(0.0);
        if val > slot.0 || (slot.1.is_none() && val > 0.0) {
            *slot = (val, Some(node));
        }
    };
    for e in m.entries() {
        let x = e.sign * w[e.dof];
        let (s, g) = (e.sigma, e.g);
        let scale = x.abs().max(1.0);
        match e.kind {
            PatchKind::TrescaSlip => {
                record(Condition::TangentialBound, s.abs() - g, e.node);
                record(
                    Condition::TangentialProduct,
                    (s * x + g * x.abs()).abs() / scale,
                    e.node,
                );
            }
            PatchKind::Leak => {
                record(Condition::NormalBound, s.abs() - g, e.node);
                record(Condition::NormalProduct, (s * x + g * x.abs()).abs() / scale, e.node);
            }
            PatchKind::OutflowLeak => {
                record(Condition::OutflowBound, -(s + g), e.node);
                record(Condition::OutflowProduct, ((s + g) * x).abs() / scale, e.node);
                record(Condition::OutflowSign, -x, e.node);
            }
            _ => {
                record(Condition::InflowBound, s - g, e.node);
                record(Condition::InflowProduct, ((s - g) * x).abs() / scale, e.node);
                record(Condition::InflowSign, x, e.node);
            }
        }
    }
    let violations: Vec<Violation> = worst
        .into_iter()
        .map(|(condition, (max, node))| Violation { condition, max, node })
        .collect();
    let pass = violations.iter().all(|v| v.max <= tol);
    ComplementarityReport { violations, tol, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{FunctionalSpec, FunctionalTerm};
    use crate::linalg::CsrMatrix;
    use crate::vi::{oseen_fixed_point, NoConvection, SolveOptions};
    use std::sync::Arc;

    fn term(dof: usize, kind: PatchKind, g: f64) -> FunctionalTerm {
        FunctionalTerm {
            dof,
            sign: 1.0,
            weight: 0.5,
            g,
            kind,
            edge: 0,
            node: dof,
        }
    }

    /// Diagonal VI: `u_i = f_i` without friction.
    fn diag_vi(f: Vec<f64>, terms: Vec<FunctionalTerm>) -> DiscreteVI {
        let n = f.len();
        let eye = CsrMatrix::identity(n);
        DiscreteVI::new(
            eye.clone(),
            CsrMatrix::zeros(0, n),
            f,
            eye,
            Arc::new(NoConvection(n)),
            FunctionalSpec::new(n, terms).unwrap(),
        )
        .unwrap()
    }

    fn solve(vi: &DiscreteVI) -> (Vec<f64>, Vec<f64>) {
        let s = oseen_fixed_point(vi, &SolveOptions::default()).unwrap();
        assert!(s.report.converged);
        (s.w, s.p)
    }

    #[test]
    fn slip_stick_and_one_sided_values() {
        // coefficients weight·g: 1.0 at dof 0 and 1, 0.5 at dof 2 and 3
        let vi = diag_vi(
            vec![3.0, 0.5, 2.0, -1.0],
            vec![
                term(0, PatchKind::TrescaSlip, 2.0),
                term(1, PatchKind::TrescaSlip, 2.0),
                term(2, PatchKind::OutflowLeak, 1.0),
                term(3, PatchKind::InflowLeak, 1.0),
            ],
        );
        let (w, p) = solve(&vi);
        let m = recover_multipliers(&vi, &w, Some(&p), 1e-9).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12 && w[1].abs() < 1e-12);
        // slip: σ = −g sign(v)
        assert!((m.sigma_tau[0].sigma + 2.0).abs() < 1e-10);
        // stick: |σ| ≤ g
        assert!(m.sigma_tau[1].sigma.abs() <= 2.0);
        assert!((m.sigma_plus[0].sigma + 1.0).abs() < 1e-10);
        assert!((m.sigma_minus[0].sigma - 1.0).abs() < 1e-10);
        assert!(m.equation_residual < 1e-12);
        let rep = check_complementarity(&m, &w, None);
        assert!(rep.pass, "{rep}");
        assert!(rep.worst() <= 1e-8);
    }

    #[test]
    fn perturbation_is_located() {
        let vi = diag_vi(
            vec![3.0, 0.5, 0.2],
            vec![
                term(0, PatchKind::TrescaSlip, 2.0),
                term(1, PatchKind::TrescaSlip, 2.0),
                term(2, PatchKind::TrescaSlip, 2.0),
            ],
        );
        let (w, p) = solve(&vi);
        let mut m = recover_multipliers(&vi, &w, Some(&p), 1e-9).unwrap();
        m.sigma_tau[1].sigma += 4.0;
        let rep = check_complementarity(&m, &w, None);
        assert!(!rep.pass);
        let v = rep.get(Condition::TangentialBound);
        assert_eq!(v.node, Some(1));
        assert!((v.max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_state_is_complementary() {
        let m = Multipliers::default();
        let rep = check_complementarity(&m, &[], None);
        assert!(rep.pass);
        assert_eq!(rep.worst(), 0.0);
        let vi = diag_vi(
            vec![0.0; 2],
            vec![term(0, PatchKind::Leak, 1.0), term(1, PatchKind::OutflowLeak, 1.0)],
        );
        let m = recover_multipliers(&vi, &[0.0, 0.0], None, 1e-12).unwrap();
        assert!(m.entries().all(|e| e.sigma == 0.0));
        assert!(check_complementarity(&m, &[0.0, 0.0], None).pass);
    }

    #[test]
    fn unconverged_velocity_is_rejected() {
        let vi = diag_vi(vec![1.0], vec![term(0, PatchKind::Leak, 0.5)]);
        match recover_multipliers(&vi, &[0.0], None, 1e-10) {
            Err(Error::Precondition(_)) => {}
            other => panic!("expected precondition failure, got {other:?}"),
        }
    }

    #[test]
    fn shared_dof_attribution_is_by_weight() {
        let mut t0 = term(0, PatchKind::Leak, 1.0);
        let mut t1 = term(0, PatchKind::Leak, 1.0);
        t0.weight = 0.2;
        t1.weight = 0.6;
        t1.edge = 1;
        let vi = diag_vi(vec![0.4], vec![t0, t1]);
        let m = recover_multipliers(&vi, &[0.0], None, 1e-12).unwrap();
        assert_eq!(m.sigma_n.len(), 1);
        assert!((m.sigma_n[0].weight - 0.8).abs() < 1e-15);
        assert!((m.sigma_n[0].sigma + 0.5).abs() < 1e-14);
    }
}
