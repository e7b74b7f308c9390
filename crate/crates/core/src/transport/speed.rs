//! Metric speed `|m'|(t)` of a discrete density curve, one value per
//! time interval.

use super::{w2_circle, PrimalState, VELOCITY_FLOOR};
use crate::error::{invalid, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeedMethod {
    /// `W2(m_k, m_{k+1}) / ht` between histogram densities (d = 1 only).
    Wasserstein,
    /// Kinetic proxy `sqrt(sum hx^d |w|^2 / m_bar)`, an upper bound in the
    /// continuum.
    Kinetic,
    /// Action of the explicit path that interpolates the two histograms
    /// linearly in time and moves mass with the piecewise linear flux whose
    /// face values are the averages of `w` at neighbouring nodes. The centred
    /// divergence of `w` is exactly the face-flux difference, so this path
    /// connects `m_k` to `m_{k+1}` and its action bounds `W2` from above
    /// without any discretization slack.
    FluxPath,
}

impl SpeedMethod {
    pub fn name(self) -> &'static str {
        match self {
            SpeedMethod::Wasserstein => "w2",
            SpeedMethod::Kinetic => "kinetic",
            SpeedMethod::FluxPath => "flux_path",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "w2" => Some(SpeedMethod::Wasserstein),
            "kinetic" => Some(SpeedMethod::Kinetic),
            "flux_path" => Some(SpeedMethod::FluxPath),
            _ => None,
        }
    }
}

/// `int_0^1 ds / ((1-s) a + s b)`.
fn inverse_mean<S: Real>(a: S, b: S) -> S {
    if a <= S::zero() || b <= S::zero() {
        return S::infinity();
    }
    let d = b - a;
    if d.abs() <= S::tol(1e-9) * a.max(b) {
        // second order expansion around the midpoint
        let mid = (a + b) * S::c(0.5);
        let r = d / mid;
        return (S::one() + r * r / S::c(12.0)) / mid;
    }
    (b.ln() - a.ln()) / d
}

pub fn metric_speed<S: Real>(state: &PrimalState<S>, method: SpeedMethod) -> Result<Vec<S>> {
    let grid = *state.m.grid();
    let n = grid.points();
    let nt = grid.nt();
    let ht = grid.ht();
    let vol = grid.cell_volume();
    match method {
        SpeedMethod::Wasserstein => {
            if grid.dim() != 1 {
                return Err(invalid("the W2 speed is only available for d = 1; use the kinetic bound"));
            }
            let clean = |k: usize| -> Vec<S> { state.m.slice(k).iter().map(|&x| x.max(S::zero())).collect() };
            let mut out = Vec::with_capacity(nt);
            let mut prev = clean(0);
            for k in 0..nt {
                let next = clean(k + 1);
                out.push(w2_circle(&prev, &next)? / ht);
                prev = next;
            }
            Ok(out)
        }
        SpeedMethod::Kinetic => {
            let mbar = state.interval_density();
            let floor = S::c(VELOCITY_FLOOR);
            Ok((0..nt)
                .map(|k| {
                    let dens = mbar.slice(k);
                    let e = (0..n).fold(S::zero(), |s, i| {
                        if dens[i] > floor {
                            s + state.w.norm_sq_at(k, i) / dens[i]
                        } else {
                            s
                        }
                    });
                    (e * vol).sqrt()
                })
                .collect())
        }
        SpeedMethod::FluxPath => {
            let third = S::one() / S::c(3.0);
            let half = S::c(0.5);
            Ok((0..nt)
                .map(|k| {
                    let (a, b) = (state.m.slice(k), state.m.slice(k + 1));
                    let w = state.w.slice(k);
                    let mut action = S::zero();
                    for i in 0..n {
                        let mut flux2 = S::zero();
                        for axis in 0..grid.dim() {
                            let comp = &w[axis * n..(axis + 1) * n];
                            let lo = (comp[grid.neighbor(i, axis, -1)] + comp[i]) * half;
                            let hi = (comp[i] + comp[grid.neighbor(i, axis, 1)]) * half;
                            flux2 = flux2 + (lo * lo + lo * hi + hi * hi) * third;
                        }
                        if flux2 > S::zero() {
                            action = action + flux2 * inverse_mean(a[i].max(S::zero()), b[i].max(S::zero()));
                        }
                    }
                    (action * vol).sqrt()
                })
                .collect())
        }
    }
}
