//! Machine-estimated constants and the randomized property suite behind
//! `mfglab check-models`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{prox_hamiltonian, prox_objective, CongestionModel, ModelKind};
use crate::error::{invalid, MfgError, Result};
use crate::real::Real;

/// Sampling box for [`certify_c0`]: `m` in `[m_min, m_max]` (geometric
/// spacing), `p` in `[p_min, p_max]` (uniform spacing).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C0Box {
    pub m_min: f64,
    pub m_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for C0Box {
    fn default() -> Self {
        C0Box { m_min: 1e-6, m_max: 10.0, p_min: -5.0, p_max: 5.0 }
    }
}

/// Lower bound constant of the entropy model: 0.9 times the infimum of
/// `(G(m) + G*(p) - mp) / |sqrt(m) - e^{p/2}|^2` over an `n x n` sample grid,
/// skipping points whose denominator is below `1e-12`.
pub fn certify_c0<S: Real>(bx: &C0Box, n: usize) -> Result<S> {
    let finite = [bx.m_min, bx.m_max, bx.p_min, bx.p_max].iter().all(|x| x.is_finite());
    if !finite || !(bx.m_min > 0.0) || bx.m_min > bx.m_max || bx.p_min > bx.p_max || n < 1 {
        return Err(invalid(format!("degenerate c0 box {bx:?} with {n} samples")));
    }
    let model = CongestionModel::<f64>::entropy_with_c0(1.0)?;
    let at = |lo: f64, hi: f64, i: usize| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let (lm0, lm1) = (bx.m_min.ln(), bx.m_max.ln());
    let mut inf = f64::INFINITY;
    for i in 0..n {
        let m = at(lm0, lm1, i).exp();
        for k in 0..n {
            let p = at(bx.p_min, bx.p_max, k);
            let den = (m.sqrt() - (0.5 * p).exp()).powi(2);
            if den < 1e-12 {
                continue;
            }
            inf = inf.min(model.fenchel_gap(m, p)? / den);
        }
    }
    if !inf.is_finite() {
        return Err(MfgError::AllPointsExcluded(format!("every sample of {bx:?} lies on the equality locus m = e^p")));
    }
    Ok(S::c(0.9 * inf))
}

/// Smallest `C >= 0` with `G((1+a)m) <= (1+Ca) G(m) + C` for every sampled
/// `m` and every `a` on a 64-point grid of `(0, a0]`.
pub fn hpol_margin<S: Real>(model: &CongestionModel<S>, a0: S, samples: &[S]) -> Result<S> {
    if !(a0 > S::zero() && a0 < S::one()) {
        return Err(invalid(format!("a0 must lie in (0, 1), got {a0}")));
    }
    let mut c = S::zero();
    for &m in samples {
        if !(m > S::zero()) {
            return Err(invalid(format!("samples must be positive, got {m}")));
        }
        let gm = model.cost(m);
        for i in 1..=64 {
            let a = a0 * S::c(i as f64 / 64.0);
            let need = (model.cost((S::one() + a) * m) - gm) / (a * gm + S::one());
            c = c.max(need);
        }
    }
    Ok(c)
}

/// One named property of the suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSuiteReport {
    pub model: String,
    pub q: Option<f64>,
    pub c: f64,
    pub c0: Option<f64>,
    pub hpol_c: f64,
    pub checks: Vec<SuiteCheck>,
}

impl ModelSuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&SuiteCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, passed: bool, worst: f64, detail: String) -> SuiteCheck {
    SuiteCheck { name: name.into(), passed, worst, detail }
}

/// Minimizes a convex function of one variable on `[lo, hi]`: a 33-point
/// scan brackets the minimizer, golden-section search refines it.
fn minimize_1d(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const N: usize = 33;
    if hi <= lo {
        return (lo, f(lo));
    }
    let step = (hi - lo) / (N - 1) as f64;
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..N {
        let v = f(lo + step * i as f64);
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = lo + step * (best + 1).min(N - 1) as f64;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    let (x, v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if best_v < v {
        (lo + step * best as f64, best_v)
    } else {
        (x, v)
    }
}

/// Brute-force minimum of the one-dimensional proximal objective over the
/// box that must contain the minimizer, by nested scan-and-refine searches.
pub(crate) fn brute_force_prox(model: &CongestionModel<f64>, tau: f64, a0: f64, b0: f64) -> f64 {
    let s0 = -a0 + 0.5 * b0 * b0;
    let top = model.conj_deriv(s0);
    let (alo, ahi) = (a0, a0 + tau * top);
    let (blo, bhi) = (b0.min(0.0), b0.max(0.0));
    let inner = |a: f64| minimize_1d(blo, bhi, |b| prox_objective(model, tau, a0, [b0, 0.0], a, [b, 0.0])).1;
    minimize_1d(alo, ahi, inner).1
}

/// Runs every pointwise property of `model` with `samples` random draws from
/// a `seed`-ed generator. Tolerances do not depend on the seed.
pub fn run_model_suite(model: &CongestionModel<f64>, seed: u64, samples: usize, prox_samples: usize) -> Result<ModelSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let draw_m = |rng: &mut ChaCha8Rng| -> f64 {
        if rng.gen_bool(0.5) {
            rng.gen_range(0.0..10.0)
        } else {
            10f64.powf(rng.gen_range(-6.0..1.0))
        }
    };

    let mut fy_min = f64::INFINITY;
    let mut qp_min = f64::INFINITY;
    let mut quad_exact = 0.0f64;
    for _ in 0..samples {
        let m = draw_m(&mut rng);
        let p = rng.gen_range(-5.0..5.0);
        fy_min = fy_min.min(model.fenchel_gap(m, p)?);
        let q = model.qp_gap(m, p)?;
        qp_min = qp_min.min(q);
        if model.kind() == ModelKind::Quadratic && p >= 0.0 {
            quad_exact = quad_exact.max(q.abs());
        }
    }
    checks.push(check("fenchel_young", fy_min >= -1e-10, fy_min, format!("min G(m)+G*(p)-mp over {samples} samples")));
    checks.push(check("qp_lower_bound", qp_min >= -1e-10, qp_min, format!("min qp_gap with c = {}", model.c())));
    if model.kind() == ModelKind::Quadratic {
        checks.push(check("qp_quadratic_identity", quad_exact <= 1e-12, quad_exact, "max |qp_gap| for p >= 0".into()));
    }

    // equality exactly on the graph of g, strict gap away from it
    let mut eq_worst = 0.0f64;
    let mut off_min = f64::INFINITY;
    for _ in 0..samples / 10 {
        let m = rng.gen_range(0.1..10.0);
        let p = model.g(m)?;
        eq_worst = eq_worst.max(model.fenchel_gap(m, p)?.abs());
        let dp = rng.gen_range(1e-3..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        off_min = off_min.min(model.fenchel_gap(m, p + dp)?);
    }
    checks.push(check("fenchel_equality_on_graph", eq_worst <= 1e-10, eq_worst, "max gap at p = g(m)".into()));
    checks.push(check("fenchel_strict_off_graph", off_min > 1e-10, off_min, "min gap for |p - g(m)| >= 1e-3".into()));

    let mut ps: Vec<f64> = (0..1000).map(|_| rng.gen_range(-8.0..8.0)).collect();
    ps.sort_by(f64::total_cmp);
    let mono = ps.windows(2).all(|w| model.conj_deriv(w[0]) <= model.conj_deriv(w[1]));
    checks.push(check("conj_deriv_nondecreasing", mono, 0.0, "(G*)' on 1000 sorted prices".into()));

    let mut ss: Vec<f64> = (0..1000).map(|_| 10f64.powf(rng.gen_range(-4.0..1.5))).collect();
    ss.sort_by(f64::total_cmp);
    let ratio_mono = ss.windows(2).all(|w| model.cost(w[0]) / w[0] <= model.cost(w[1]) / w[1]);
    checks.push(check("cost_ratio_increasing", ratio_mono, 0.0, "G(s)/s on 1000 sorted samples".into()));

    let mut prox_worst = 0.0f64;
    let mut lambda_min = f64::INFINITY;
    for _ in 0..prox_samples {
        let tau = rng.gen_range(0.05..2.0);
        let a0 = rng.gen_range(-2.0..2.0);
        let b0 = rng.gen_range(-2.0..2.0);
        let out = prox_hamiltonian(model, tau, a0, [b0, 0.0])?;
        lambda_min = lambda_min.min(out.lambda);
        let obj = prox_objective(model, tau, a0, [b0, 0.0], out.a, out.b);
        let brute = brute_force_prox(model, tau, a0, b0);
        prox_worst = prox_worst.max((obj - brute).abs());
    }
    checks.push(check(
        "prox_brute_force",
        prox_worst <= 1e-8,
        prox_worst,
        format!("max |objective(prox) - brute-force minimum| over {prox_samples} draws"),
    ));
    checks.push(check("prox_density_nonnegative", lambda_min >= 0.0, lambda_min, "min recovered density".into()));

    let hpol_samples: Vec<f64> = (1..=200).map(|i| 10.0 * i as f64 / 200.0).collect();
    let hpol_c = hpol_margin(model, 0.1, &hpol_samples)?;
    checks.push(check("hpol_finite", hpol_c.is_finite(), hpol_c, "C for a0 = 0.1, m <= 10".into()));

    let c0 = match model.kind() {
        ModelKind::Entropy => {
            let c0 = certify_c0::<f64>(&C0Box::default(), 500)?;
            checks.push(check("c0_positive", c0 > 0.0 && c0 <= 1.0, c0, "certified on (1e-6..10) x (-5..5), 500^2 samples".into()));
            Some(c0)
        }
        _ => None,
    };
    let q = match model.kind() {
        ModelKind::Power(q) => Some(q),
        _ => None,
    };
    Ok(ModelSuiteReport { model: model.name().into(), q, c: model.c(), c0, hpol_c, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c0_default_box() {
        let c0: f64 = certify_c0(&C0Box::default(), 200).unwrap();
        assert!(c0 > 0.0 && c0 <= 1.0, "{c0}");
    }

    #[test]
    fn c0_equality_locus_is_excluded() {
        let bx = C0Box { m_min: 1.0, m_max: 1.0, p_min: 0.0, p_max: 0.0 };
        let err = certify_c0::<f64>(&bx, 5).unwrap_err();
        assert!(err.to_string().contains("all points excluded"));
        let bad = C0Box { m_min: 2.0, m_max: 1.0, p_min: 0.0, p_max: 1.0 };
        assert!(certify_c0::<f64>(&bad, 5).is_err());
    }

    #[test]
    fn c0_smaller_box_is_not_smaller() {
        let big: f64 = certify_c0(&C0Box::default(), 100).unwrap();
        let small: f64 = certify_c0(&C0Box { m_min: 1e-3, m_max: 5.0, p_min: -2.0, p_max: 2.0 }, 100).unwrap();
        assert!(small >= big);
    }

    #[test]
    fn hpol_examples() {
        let ms: Vec<f64> = (1..=100).map(|i| i as f64 / 10.0).collect();
        let quad = CongestionModel::quadratic();
        let c = hpol_margin(&quad, 0.1, &ms).unwrap();
        assert!(c.is_finite() && c > 0.0);
        let pow2 = CongestionModel::power(2.0).unwrap();
        assert_eq!(hpol_margin(&pow2, 0.1, &ms).unwrap(), c);
        let ent = CongestionModel::entropy_with_c0(0.9).unwrap();
        assert!(hpol_margin(&ent, 0.1, &ms).unwrap().is_finite());
        assert!(hpol_margin(&quad, 1.5, &ms).is_err());
    }

    #[test]
    fn brute_force_matches_hand_example() {
        let quad = CongestionModel::quadratic();
        // a = -0.5, b = 0: objective 1/8 + 1/8
        let v = brute_force_prox(&quad, 1.0, -1.0, 0.0);
        assert!((v - 0.25).abs() < 1e-12);
    }
}
