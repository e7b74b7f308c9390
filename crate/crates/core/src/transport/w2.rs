//! Quadratic Wasserstein distance on the unit circle.
//!
//! Every measure is stored through its quantile function on `[0, 1]`, a
//! sequence of linear pieces (histogram cells) or constant pieces (atoms),
//! lifted to the real line by `Q(t + 1) = Q(t) + 1`. The optimal circle
//! coupling is a quantile coupling with a rotated argument, so
//! `W2^2 = min_theta int_0^1 |Q_mu(t) - Q_nu(t + theta)|^2 dt`; the cost is
//! convex in `theta`, piecewise quadratic between breakpoints, and evaluated
//! exactly with Simpson's rule on every piece.

use crate::error::{invalid, MfgError, Result};
use crate::real::Real;

/// Quantile piece: on `[t0, t1]`, `Q` runs linearly from `q0` to `q1`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Piece<S> {
    t0: S,
    t1: S,
    q0: S,
    q1: S,
}

impl<S: Real> Piece<S> {
    fn at(&self, t: S) -> S {
        let len = self.t1 - self.t0;
        if len <= S::zero() {
            return self.q0;
        }
        self.q0 + (self.q1 - self.q0) * ((t - self.t0) / len)
    }
}

/// A probability measure on the circle `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleMeasure<S> {
    pieces: Vec<Piece<S>>,
}

fn check_mass<S: Real>(mass: S) -> Result<()> {
    if !((mass - S::one()).abs() <= S::tol(1e-8)) {
        return Err(MfgError::Domain(format!("measure must have unit mass, got {mass}")));
    }
    Ok(())
}

impl<S: Real> CircleMeasure<S> {
    /// Histogram measure: `values[i]` is the density on the cell of width
    /// `1/n` centred at `i/n`.
    pub fn from_density(values: &[S]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(invalid("empty density"));
        }
        let h = S::one() / S::c(n as f64);
        if let Some(v) = values.iter().find(|v| !(**v >= S::zero())) {
            return Err(MfgError::Domain(format!("density must be nonnegative, found {v}")));
        }
        let mass = values.iter().fold(S::zero(), |s, &v| s + v) * h;
        check_mass(mass)?;
        let mut pieces = Vec::with_capacity(n);
        let mut acc = S::zero();
        for (i, &v) in values.iter().enumerate() {
            if v == S::zero() {
                continue;
            }
            let t0 = acc / mass;
            acc = acc + v * h;
            let x = S::c(i as f64) * h - h * S::c(0.5);
            pieces.push(Piece { t0, t1: acc / mass, q0: x, q1: x + h });
        }
        if let Some(last) = pieces.last_mut() {
            last.t1 = S::one();
        }
        Ok(CircleMeasure { pieces })
    }

    /// Discrete measure with atoms at `positions` (wrapped to `[0, 1)`).
    pub fn from_atoms(positions: &[S], weights: &[S]) -> Result<Self> {
        if positions.len() != weights.len() || positions.is_empty() {
            return Err(invalid("atoms need one weight per position"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= S::zero())) {
            return Err(MfgError::Domain(format!("weights must be nonnegative, found {w}")));
        }
        let mass = weights.iter().fold(S::zero(), |s, &w| s + w);
        check_mass(mass)?;
        let mut atoms: Vec<(S, S)> = positions
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > S::zero())
            .map(|(&x, &w)| (x - x.floor(), w))
            .collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite positions"));
        let mut pieces = Vec::with_capacity(atoms.len());
        let mut acc = S::zero();
        for (x, w) in atoms {
            let t0 = acc / mass;
            acc = acc + w;
            pieces.push(Piece { t0, t1: acc / mass, q0: x, q1: x });
        }
        if let Some(last) = pieces.last_mut() {
            last.t1 = S::one();
        }
        Ok(CircleMeasure { pieces })
    }

    /// Index of the piece containing `r` in `[0, 1)`.
    fn locate(&self, r: S) -> usize {
        let idx = self.pieces.partition_point(|p| p.t1 <= r);
        idx.min(self.pieces.len() - 1)
    }

    /// `int_0^1 |Q_self(t) - Q_other(t + theta)|^2 dt`, exactly: one merged
    /// walk over both breakpoint sequences, Simpson's rule on every piece
    /// where both quantiles are linear.
    fn cost(&self, other: &Self, theta: S) -> S {
        let half = S::c(0.5);
        let sixth = S::one() / S::c(6.0);
        let four = S::c(4.0);
        let mut lift = theta.floor();
        let mut j = other.locate(theta - lift);
        let mut i = 0;
        let mut a = S::zero();
        let mut total = S::zero();
        let (ni, nj) = (self.pieces.len(), other.pieces.len());
        let mut guard = 0;
        while a < S::one() && guard <= 2 * (ni + nj) + 4 {
            guard += 1;
            let p = &self.pieces[i];
            let q = &other.pieces[j];
            let end_p = if i + 1 == ni { S::one() } else { p.t1 };
            let end_q = q.t1 + lift - theta;
            let b = end_p.min(end_q).min(S::one());
            if b > a {
                let m = (a + b) * half;
                let diff = |t: S| p.at(t) - (q.at(t + theta - lift) + lift);
                let (da, dm, db) = (diff(a), diff(m), diff(b));
                total = total + (b - a) * sixth * (da * da + four * dm * dm + db * db);
                a = b;
            }
            if end_p <= b && i + 1 < ni {
                i += 1;
            }
            if end_q <= b {
                j += 1;
                if j == nj {
                    j = 0;
                    lift = lift + S::one();
                }
            }
        }
        total
    }
}

/// Circle `W2` between two measures.
pub fn w2_circle_measures<S: Real>(mu: &CircleMeasure<S>, nu: &CircleMeasure<S>) -> S {
    if mu == nu {
        return S::zero();
    }
    let n = mu.pieces.len().max(nu.pieces.len()).max(1);
    let step = S::one() / S::c(4.0 * n as f64);
    let range = S::c(1.5);
    let count = (S::c(2.0) * range / step).ceil().to_usize().unwrap_or(0);
    let mut best_theta = -range;
    let mut best = S::infinity();
    for i in 0..=count {
        let theta = -range + step * S::c(i as f64);
        let c = mu.cost(nu, theta);
        if c < best {
            best = c;
            best_theta = theta;
        }
    }
    let (mut lo, mut hi) = (best_theta - step, best_theta + step);
    for _ in 0..100 {
        let a = lo + (hi - lo) / S::c(3.0);
        let b = hi - (hi - lo) / S::c(3.0);
        if mu.cost(nu, a) <= mu.cost(nu, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let refined = mu.cost(nu, (lo + hi) * S::c(0.5));
    best.min(refined).max(S::zero()).sqrt()
}

/// Circle `W2` between two histogram densities on the same 1-D grid.
pub fn w2_circle<S: Real>(mu: &[S], nu: &[S]) -> Result<S> {
    if mu.len() != nu.len() {
        return Err(crate::error::shape("densities on different grids"));
    }
    Ok(w2_circle_measures(&CircleMeasure::from_density(mu)?, &CircleMeasure::from_density(nu)?))
}
