use nalgebra::{DMatrix, DVector};

use crate::instance::{DofLaw, SmallInstance};
use crate::{OracleError, Result};

pub const MAX_CONSTRAINED: usize = 12;

/// State of one constrained coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum State {
    /// `u = 0` (stick, closed contact).
    Zero,
    /// `u > 0`.
    Pos,
    /// `u < 0`.
    Neg,
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub u: DVector<f64>,
    /// States of the constrained coordinates, in index order.
    pub states: Vec<State>,
    /// Number of consistent assignments found.
    pub consistent: usize,
    pub tried: usize,
}

fn allowed(law: DofLaw) -> &'static [State] {
    match law {
        DofLaw::Free => &[],
        DofLaw::Abs(_) => &[State::Zero, State::Pos, State::Neg],
        DofLaw::Outflow(_) => &[State::Zero, State::Pos],
        DofLaw::Inflow(_) => &[State::Zero, State::Neg],
    }
}

/// Tries every admissible assignment, solving the linear system of each and
/// keeping those whose signs and multiplier bounds are consistent.
pub fn active_set_enumeration(inst: &SmallInstance) -> Result<Enumeration> {
    let n = inst.n();
    let c = inst.constrained();
    if c.len() > MAX_CONSTRAINED {
        return Err(OracleError::TooLarge(c.len(), MAX_CONSTRAINED));
    }
    let scale = inst.f.amax().max(1.0);
    let tol = 1e-10 * scale;

    let options: Vec<&[State]> = c.iter().map(|&i| allowed(inst.laws[i])).collect();
    let mut digits = vec![0usize; c.len()];
    let mut found: Vec<(DVector<f64>, Vec<State>)> = Vec::new();
    let mut tried = 0;
    loop {
        let states: Vec<State> = digits.iter().zip(&options).map(|(&d, o)| o[d]).collect();
        tried += 1;
        if let Some(u) = solve_assignment(inst, &c, &states) {
            if consistent(inst, &c, &states, &u, tol) {
                found.push((u, states));
            }
        }
        // odometer increment
        let mut k = 0;
        while k < digits.len() {
            digits[k] += 1;
            if digits[k] < options[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
        if k == digits.len() {
            break;
        }
    }
    let (u, states) = found.first().cloned().ok_or(OracleError::NoConsistentAssignment)?;
    let spread = found.iter().map(|(v, _)| (v - &u).amax()).fold(0.0, f64::max);
    if spread > 1e-8 * scale {
        return Err(OracleError::NotUnique(spread));
    }
    debug_assert_eq!(u.len(), n);
    Ok(Enumeration {
        u,
        states,
        consistent: found.len(),
        tried,
    })
}

fn solve_assignment(inst: &SmallInstance, c: &[usize], states: &[State]) -> Option<DVector<f64>> {
    let n = inst.n();
    let mut pinned = vec![false; n];
    let mut rhs = inst.f.clone();
    for (&i, &s) in c.iter().zip(states) {
        let (a, b, _, _) = inst.laws[i].coefficients();
        match s {
            State::Zero => pinned[i] = true,
            State::Pos => rhs[i] -= b + a,
            State::Neg => rhs[i] -= b - a,
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
    let mut u = DVector::zeros(n);
    if free.is_empty() {
        return Some(u);
    }
    let m = DMatrix::from_fn(free.len(), free.len(), |r, s| inst.a[(free[r], free[s])]);
    let r = DVector::from_fn(free.len(), |k, _| rhs[free[k]]);
    let x = m.lu().solve(&r)?;
    for (k, &i) in free.iter().enumerate() {
        u[i] = x[k];
    }
    Some(u)
}

fn consistent(inst: &SmallInstance, c: &[usize], states: &[State], u: &DVector<f64>, tol: f64) -> bool {
    let s = &inst.f - &inst.a * u;
    c.iter().zip(states).all(|(&i, &st)| {
        let (a, b, _, _) = inst.laws[i].coefficients();
        let r = s[i] - b;
        match st {
            State::Pos => u[i] >= -tol,
            State::Neg => u[i] <= tol,
            State::Zero => match inst.laws[i] {
                DofLaw::Outflow(_) => r <= a + tol,
                DofLaw::Inflow(_) => r >= -a - tol,
                _ => r.abs() <= a + tol,
            },
        }
    })
}
