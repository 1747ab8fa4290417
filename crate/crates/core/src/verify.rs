//! Residuals of the evolution laws of the scalar invariants along integrated
//! trajectories.  Derivatives come from a fourth-order central difference of
//! the dense output, so the check is independent of the closed-form rates.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrate::{integrate, IntegratorConfig};
use crate::model::{diagnostics, invariant_k, invariant_q, q_rate, Coefficients, Radial, State3};

/// Largest difference step for the time derivatives; it shrinks to a tenth
/// of the local integrator step where the flow is fast.
pub const FD_STEP: f64 = 1e-3;

/// `f = (Q - 64 beta) / K` is only checked where `|K|` exceeds this.  Below
/// it the integration error in `K`, divided by `K`, dominates the check.
pub const F_K_FLOOR: f64 = 1e-2;

/// Largest residual of each law, scaled by `1 + |rate|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainResiduals {
    /// `K' + 4 x K`
    pub k: f64,
    /// `Q' + kappa K`
    pub q: f64,
    /// `F_C' - 2 y G_C`
    pub f_c: f64,
    /// `G_C' - (2/3) K`
    pub g_c: f64,
    /// `f' - 4 x f + kappa`
    pub f: f64,
    pub samples: usize,
    pub f_samples: usize,
    pub t_end: f64,
}

impl ChainResiduals {
    pub fn max(&self) -> f64 {
        [self.k, self.q, self.f_c, self.g_c, self.f].into_iter().fold(0.0, f64::max)
    }

    pub fn merge(&mut self, o: &Self) {
        self.k = self.k.max(o.k);
        self.q = self.q.max(o.q);
        self.f_c = self.f_c.max(o.f_c);
        self.g_c = self.g_c.max(o.g_c);
        self.f = self.f.max(o.f);
        self.samples += o.samples;
        self.f_samples += o.f_samples;
        self.t_end = self.t_end.max(o.t_end);
    }
}

/// Integrates from `x0` up to `t_end` (or an earlier blowup) and samples the
/// five laws at every accepted step with `C = cc` in `F_C`, `G_C`.
pub fn chain_residuals(
    c: &Coefficients,
    x0: State3,
    cc: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<ChainResiduals> {
    let radial = Radial::new(*c);
    let f = move |_t: f64, y: &[f64; 3]| radial.eval(y);
    let tr = integrate(&f, 0.0, x0.to_array(), t_end, cfg, &[])?;
    let kappa = q_rate(c);
    let scalars = |t: f64| -> Option<[f64; 5]> {
        let s = State3::from_array(tr.eval(t)?);
        let d = diagnostics(c, s, cc);
        Some([invariant_k(c, s), invariant_q(c, s), d.f_c, d.g_c, d.f.unwrap_or(f64::NAN)])
    };
    let mut out = ChainResiduals { t_end: tr.t_end(), ..Default::default() };
    let n = tr.times.len();
    for i in 1..n.saturating_sub(1) {
        let (t, y) = (tr.times[i], &tr.states[i]);
        let local = (t - tr.times[i - 1]).min(tr.times[i + 1] - t);
        let h = FD_STEP.min(0.1 * local);
        if t - 2.0 * h < tr.t_start() || t + 2.0 * h > tr.t_end() {
            continue;
        }
        let (Some(m2), Some(m1), Some(p1), Some(p2)) =
            (scalars(t - 2.0 * h), scalars(t - h), scalars(t + h), scalars(t + 2.0 * h))
        else {
            continue;
        };
        let d = |i: usize| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
        let s = State3::from_array(*y);
        let k = invariant_k(c, s);
        let dg = diagnostics(c, s, cc);
        let rel = |res: f64, rate: f64| res.abs() / (1.0 + rate.abs());
        out.k = out.k.max(rel(d(0) + 4.0 * s.x * k, 4.0 * s.x * k));
        out.q = out.q.max(rel(d(1) + kappa * k, kappa * k));
        out.f_c = out.f_c.max(rel(d(2) - 2.0 * s.y * dg.g_c, 2.0 * s.y * dg.g_c));
        out.g_c = out.g_c.max(rel(d(3) - 2.0 / 3.0 * k, 2.0 / 3.0 * k));
        out.samples += 1;
        let window_defined = [m2, m1, p1, p2].iter().all(|v| v[4].is_finite());
        if let (Some(fv), true) = (dg.f, window_defined && k.abs() > F_K_FLOOR) {
            let rate = 4.0 * s.x * fv - kappa;
            out.f = out.f.max(rel(d(4) - rate, rate));
            out.f_samples += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trajectory_ladder() {
        let c = Coefficients::paneitz();
        let r = chain_residuals(&c, State3::new(0.0, 1.0, 0.0), 27.0, 8.0, &IntegratorConfig::default())
            .unwrap();
        assert!(r.samples > 10);
        assert!(r.max() < 1e-6, "{r:?}");
    }
}
