use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{OracleError, Result};

/// Friction law on one coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DofLaw {
    Free,
    /// `g|u|` (Tresca slip or bilateral leak).
    Abs(f64),
    /// `g·u` on `u ≥ 0`.
    Outflow(f64),
    /// `−g·u` on `u ≤ 0`.
    Inflow(f64),
}

impl DofLaw {
    pub fn is_constrained(self) -> bool {
        !matches!(self, DofLaw::Free)
    }

    pub fn threshold(self) -> f64 {
        match self {
            DofLaw::Free => 0.0,
            DofLaw::Abs(g) | DofLaw::Outflow(g) | DofLaw::Inflow(g) => g,
        }
    }

    /// `(a, b, lo, hi)` of `a|u| + b·u` on `[lo, hi]`.
    pub fn coefficients(self) -> (f64, f64, f64, f64) {
        let inf = f64::INFINITY;
        match self {
            DofLaw::Free => (0.0, 0.0, -inf, inf),
            DofLaw::Abs(g) => (g, 0.0, -inf, inf),
            DofLaw::Outflow(g) => (0.0, g, 0.0, inf),
            DofLaw::Inflow(g) => (0.0, -g, -inf, 0.0),
        }
    }

    /// `J` on this coordinate, `+∞` off the half-line.
    pub fn value(self, u: f64) -> f64 {
        let (a, b, lo, hi) = self.coefficients();
        if u < lo || u > hi {
            f64::INFINITY
        } else {
            a * u.abs() + b * u
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallInstance {
    pub a: DMatrix<f64>,
    pub f: DVector<f64>,
    pub laws: Vec<DofLaw>,
}

impl SmallInstance {
    pub fn new(a: DMatrix<f64>, f: DVector<f64>, laws: Vec<DofLaw>) -> Result<Self> {
        let n = f.len();
        if a.nrows() != n || a.ncols() != n || laws.len() != n {
            return Err(OracleError::Malformed("dimension mismatch".into()));
        }
        if laws.iter().any(|l| !(l.threshold() >= 0.0)) {
            return Err(OracleError::Malformed("thresholds must be nonnegative".into()));
        }
        let sym = (&a + a.transpose()) * 0.5;
        if sym.cholesky().is_none() {
            return Err(OracleError::Malformed("symmetric part is not positive definite".into()));
        }
        Ok(Self { a, f, laws })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self.a.amax().max(1.0);
        (&self.a - self.a.transpose()).amax() <= 1e-14 * scale
    }

    pub fn constrained(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.laws[i].is_constrained()).collect()
    }

    pub fn functional(&self, u: &DVector<f64>) -> f64 {
        self.laws.iter().zip(u.iter()).map(|(l, &x)| l.value(x)).sum()
    }

    /// `½uᵀAu − fᵀu + J(u)`; the VI is its optimality condition when `A` is
    /// symmetric.
    pub fn energy(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.a * u)) - self.f.dot(u) + self.functional(u)
    }

    /// `‖u − v‖` in the norm of `sym(A)`.
    pub fn energy_distance(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let d = u - v;
        d.dot(&(&self.a * &d)).max(0.0).sqrt()
    }

    /// Worst violation of the optimality system at `u`, componentwise.
    pub fn kkt_residual(&self, u: &DVector<f64>) -> f64 {
        let s = &self.f - &self.a * u;
        let scale = u.amax().max(1.0);
        let zero = 1e-12 * scale;
        let mut worst = 0.0f64;
        for (i, law) in self.laws.iter().enumerate() {
            let (a, b, lo, hi) = law.coefficients();
            let x = u[i];
            worst = worst.max(lo - x).max(x - hi);
            let r = s[i] - b;
            let v = if x > zero {
                (r - a).abs()
            } else if x < -zero {
                (r + a).abs()
            } else {
                // r ∈ [−a, a], widened to a half-line on a one-sided dof
                let low = if lo >= 0.0 { f64::NEG_INFINITY } else { -a };
                let high = if hi <= 0.0 { f64::INFINITY } else { a };
                (low - r).max(r - high).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }
}

/// Shape of a random instance.
#[derive(Clone, Copy, Debug)]
pub struct InstanceParams {
    pub n: usize,
    /// Number of coordinates carrying a friction law.
    pub constrained: usize,
    pub symmetric: bool,
    /// Relative size of the skew part when not symmetric.
    pub skew: f64,
}

/// Seeded random instance with `A = MᵀM/n + I` (plus a skew part), loads in
/// `[−3, 3]` and thresholds in `[0, 2]`.
pub fn random_instance(seed: u64, p: InstanceParams) -> SmallInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.n.max(1);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut a = m.transpose() * &m / n as f64 + DMatrix::identity(n, n);
    if !p.symmetric {
        let k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a += (&k - k.transpose()) * (0.5 * p.skew);
    }
    let f = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let mut laws = vec![DofLaw::Free; n];
    for &i in idx.iter().take(p.constrained.min(n)) {
        let g = rng.random_range(0.0..2.0);
        laws[i] = match rng.random_range(0..4) {
            0 | 1 => DofLaw::Abs(g),
            2 => DofLaw::Outflow(g),
            _ => DofLaw::Inflow(g),
        };
    }
    SmallInstance::new(a, f, laws).expect("generator produces valid instances")
}
