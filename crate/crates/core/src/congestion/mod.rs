//! Congestion costs `G` and everything derived from them.
//!
//! Densities are constrained to `m >= 0` (`G = +inf` below zero), so the
//! conjugates carry positive parts and `J*(p) := J((G*)'(p))`.

mod audit;
mod prox;

pub use audit::{certify_c0, hpol_margin, run_model_suite, C0Box, ModelSuiteReport, SuiteCheck};
pub use prox::{prox_hamiltonian, prox_objective, Prox};

use crate::error::{invalid, MfgError, Result};
use crate::real::Real;

/// Cost family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind<S> {
    /// `G(m) = m^2 / 2`.
    Quadratic,
    /// `G(m) = m^q / q`, `q > 1`.
    Power(S),
    /// `G(m) = m log m - m`.
    Entropy,
}

/// A congestion cost together with the constant `c` of the lower bound
/// `G(m) + G*(p) >= mp + c |J(m) - J*(p)|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CongestionModel<S> {
    kind: ModelKind<S>,
    c: S,
}

impl<S: Real> CongestionModel<S> {
    pub fn quadratic() -> Self {
        CongestionModel { kind: ModelKind::Quadratic, c: S::c(0.5) }
    }

    pub fn power(q: S) -> Result<Self> {
        if !(q > S::one()) || !q.is_finite() {
            return Err(invalid(format!("q > 1 required, got {q}")));
        }
        let qp = q / (q - S::one());
        Ok(CongestionModel { kind: ModelKind::Power(q), c: S::one() / (S::c(2.0) * q.max(qp)) })
    }

    /// Entropy model with `c0` certified on the default sampling box.
    pub fn entropy() -> Result<Self> {
        let c0 = certify_c0(&C0Box::default(), 400)?;
        Ok(CongestionModel { kind: ModelKind::Entropy, c: c0 })
    }

    /// Entropy model with an externally certified constant.
    pub fn entropy_with_c0(c0: S) -> Result<Self> {
        if !(c0 > S::zero()) {
            return Err(invalid(format!("c0 > 0 required, got {c0}")));
        }
        Ok(CongestionModel { kind: ModelKind::Entropy, c: c0 })
    }

    /// Parses `quadratic`, `power` (needs `q`) or `entropy`.
    pub fn from_name(name: &str, q: Option<S>) -> Result<Self> {
        match name {
            "quadratic" => Ok(Self::quadratic()),
            "power" => Self::power(q.ok_or_else(|| invalid("model = \"power\" requires key q"))?),
            "entropy" => Self::entropy(),
            other => Err(invalid(format!("model must be quadratic, power or entropy, got {other:?}"))),
        }
    }

    pub fn kind(&self) -> ModelKind<S> {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Quadratic => "quadratic",
            ModelKind::Power(_) => "power",
            ModelKind::Entropy => "entropy",
        }
    }

    /// Constant `c` of the quadratic lower bound (`c0` for the entropy).
    pub fn c(&self) -> S {
        self.c
    }

    /// Conjugate exponent `q' = q/(q-1)` (2 for the quadratic cost).
    pub fn conjugate_exponent(&self) -> Option<S> {
        match self.kind {
            ModelKind::Quadratic => Some(S::c(2.0)),
            ModelKind::Power(q) => Some(q / (q - S::one())),
            ModelKind::Entropy => None,
        }
    }

    fn check_density(m: S) -> Result<()> {
        if m < S::zero() || m.is_nan() {
            return Err(MfgError::Domain(format!("density must be >= 0, got {m}")));
        }
        Ok(())
    }

    /// `G(m)`; `+inf` for negative densities.
    pub fn cost(&self, m: S) -> S {
        if m < S::zero() {
            return S::infinity();
        }
        match self.kind {
            ModelKind::Quadratic => S::c(0.5) * m * m,
            ModelKind::Power(q) => m.powf(q) / q,
            ModelKind::Entropy => {
                if m == S::zero() {
                    S::zero()
                } else {
                    m * m.ln() - m
                }
            }
        }
    }

    /// `g(m) = G'(m)`; the entropy gives `-inf` at zero.
    pub fn g(&self, m: S) -> Result<S> {
        Self::check_density(m)?;
        Ok(match self.kind {
            ModelKind::Quadratic => m,
            ModelKind::Power(q) => m.powf(q - S::one()),
            ModelKind::Entropy => m.ln(),
        })
    }

    /// `G*(p) = sup_{m >= 0} (pm - G(m))`.
    pub fn conj(&self, p: S) -> S {
        let pp = p.max(S::zero());
        match self.kind {
            ModelKind::Quadratic => S::c(0.5) * pp * pp,
            ModelKind::Power(q) => {
                let qp = q / (q - S::one());
                pp.powf(qp) / qp
            }
            ModelKind::Entropy => p.exp(),
        }
    }

    /// `(G*)'(p)`, the density that prices at `p`.
    pub fn conj_deriv(&self, p: S) -> S {
        let pp = p.max(S::zero());
        match self.kind {
            ModelKind::Quadratic => pp,
            ModelKind::Power(q) => pp.powf(S::one() / (q - S::one())),
            ModelKind::Entropy => p.exp(),
        }
    }

    /// `(G*)''(p)` where it exists (one-sided at the kink, `+inf` allowed).
    pub fn conj_second(&self, p: S) -> S {
        match self.kind {
            ModelKind::Quadratic => {
                if p > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            ModelKind::Power(q) => {
                if p > S::zero() {
                    let e = S::one() / (q - S::one());
                    e * p.powf(e - S::one())
                } else {
                    S::zero()
                }
            }
            ModelKind::Entropy => p.exp(),
        }
    }

    /// `J(m)`: `m`, `m^{q/2}` or `sqrt(m)`.
    pub fn j(&self, m: S) -> S {
        let m = m.max(S::zero());
        match self.kind {
            ModelKind::Quadratic => m,
            ModelKind::Power(q) => m.powf(q / S::c(2.0)),
            ModelKind::Entropy => m.sqrt(),
        }
    }

    /// `J*(p) = J((G*)'(p))`.
    pub fn j_star(&self, p: S) -> S {
        self.j(self.conj_deriv(p))
    }

    /// `G(m) + G*(p) - mp`.
    pub fn fenchel_gap(&self, m: S, p: S) -> Result<S> {
        Self::check_density(m)?;
        Ok(self.cost(m) + self.conj(p) - m * p)
    }

    /// `G(m) + G*(p) - mp - c |J(m) - J*(p)|^2`.
    pub fn qp_gap(&self, m: S, p: S) -> Result<S> {
        let fy = self.fenchel_gap(m, p)?;
        let dj = self.j(m) - self.j_star(p);
        Ok(fy - self.c * dj * dj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pointwise_values() {
        let quad = CongestionModel::<f64>::quadratic();
        let pow3 = CongestionModel::<f64>::power(3.0).unwrap();
        let ent = CongestionModel::<f64>::entropy_with_c0(0.9).unwrap();
        assert_eq!(quad.g(1.0).unwrap(), 1.0);
        assert!(close(pow3.g(2.0).unwrap(), 4.0, 1e-14));
        assert_eq!(ent.g(1.0).unwrap(), 0.0);
        assert!(quad.g(-1.0).is_err());
        assert_eq!(ent.conj(0.0), 1.0);
        assert!(close(pow3.conj(1.0), 2.0 / 3.0, 1e-14));
        assert_eq!(quad.conj(-1.0), 0.0);
    }

    #[test]
    fn lower_bound_examples() {
        let quad = CongestionModel::<f64>::quadratic();
        let pow3 = CongestionModel::<f64>::power(3.0).unwrap();
        let ent = CongestionModel::<f64>::entropy_with_c0(0.9).unwrap();
        assert!(close(quad.qp_gap(1.0, 1.0).unwrap(), 0.0, 1e-15));
        assert!(close(pow3.qp_gap(2.0, 0.0).unwrap(), 4.0 / 3.0, 1e-13));
        assert!(close(ent.qp_gap(1.0, 0.0).unwrap(), 0.0, 1e-15));
        // without positive parts this point would violate the bound
        assert!(quad.qp_gap(0.0, -1.0).unwrap() >= 0.0);
    }

    #[test]
    fn power_two_is_quadratic() {
        let pow2 = CongestionModel::<f64>::power(2.0).unwrap();
        let quad = CongestionModel::<f64>::quadratic();
        assert_eq!(pow2.c(), 0.25);
        for &(m, p) in &[(0.3, 1.2), (2.0, -0.5), (0.0, 0.7)] {
            assert!(close(pow2.cost(m), quad.cost(m), 1e-15));
            assert!(close(pow2.conj(p), quad.conj(p), 1e-15));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CongestionModel::<f64>::power(1.0).is_err());
        assert!(CongestionModel::<f64>::from_name("power", None).is_err());
        assert!(CongestionModel::<f64>::from_name("cubic", None).is_err());
        assert_eq!(CongestionModel::<f64>::from_name("quadratic", None).unwrap().c(), 0.5);
    }

    #[test]
    fn single_precision() {
        let m = CongestionModel::<f32>::power(1.5).unwrap();
        assert!((m.c() - 1.0 / 6.0).abs() < 1e-6);
        assert!(m.qp_gap(0.7, 0.2).unwrap() >= -1e-5);
    }
}
