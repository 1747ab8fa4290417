//! Bubble profiles `w = -a/2 eta(r) log(eps^2 + r^2)` on a flat ball and the
//! log-determinant functionals evaluated on them.
//!
//! Everything is radial, so each integral reduces to `int_0^rho f(r) w3 r^3 dr`
//! with `w3 = 2 pi^2`.  The integrands live on the scale `eps` near the origin
//! and on the scale `rho` in the cutoff annulus, so the radial axis is split
//! into geometrically graded panels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::roots;

/// Volume of the unit round three-sphere.
pub const OMEGA3: f64 = 2.0 * PI * PI;

/// Default grid of bubble scales.
pub const EPS_GRID: [f64; 7] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5];

/// Degree-5 smoothstep cutoff: 1 on `r <= rho/2`, 0 on `r >= rho`, `C^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub rho: f64,
}

impl Cutoff {
    /// `(eta, eta', eta'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let a = 0.5 * self.rho;
        if r <= a {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.rho {
            return (0.0, 0.0, 0.0);
        }
        let s = (r - a) / a;
        // 1 - (10 s^3 - 15 s^4 + 6 s^5)
        let p = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let dp = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        let ddp = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        (1.0 - p, -dp / a, -ddp / (a * a))
    }

    pub fn describe(&self) -> String {
        format!(
            "eta(r) = 1 - (10 s^3 - 15 s^4 + 6 s^5), s = clamp((r - {h}) / {h}, 0, 1)",
            h = 0.5 * self.rho
        )
    }
}

/// `w = -amplitude/2 * eta(r) * log(eps^2 + r^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub eps: f64,
    pub amplitude: f64,
    pub cutoff: Cutoff,
}

impl Bubble {
    pub fn new(eps: f64, rho: f64) -> Result<Self> {
        let max = rho / 10.0;
        if !(eps > 0.0 && eps < max) {
            return Err(Error::EpsilonTooLarge { eps, max });
        }
        Ok(Self { eps, amplitude: 1.0, cutoff: Cutoff { rho } })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// `(w, w', Delta w)` at radius `r > 0`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let (e, de, dde) = self.cutoff.eval(r);
        let d = self.eps * self.eps + r * r;
        let l = d.ln();
        let dl = 2.0 * r / d;
        let ddl = 2.0 * (self.eps * self.eps - r * r) / (d * d);
        let k = -0.5 * self.amplitude;
        let w = k * e * l;
        let w1 = k * (de * l + e * dl);
        let w2 = k * (dde * l + 2.0 * de * dl + e * ddl);
        let lap = if r > 0.0 { w2 + 3.0 * w1 / r } else { 4.0 * w2 };
        (w, w1, lap)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BubbleIntegrals {
    /// `int (Delta w)^2`
    pub lap2: f64,
    /// `int Delta w |grad w|^2`
    pub cross: f64,
    /// `int |grad w|^4`
    pub grad4: f64,
    /// `int |grad w|^2`
    pub grad2: f64,
    /// `int |Delta w| + |grad w|^2`
    pub lower: f64,
    /// `log avg_B e^{4 (w - avg_B w)}`
    pub exp: f64,
}

impl BubbleIntegrals {
    fn max_rel_diff(&self, o: &Self) -> f64 {
        let a = [self.lap2, self.cross, self.grad4, self.grad2, self.lower, self.exp];
        let b = [o.lap2, o.cross, o.grad4, o.grad2, o.lower, o.exp];
        a.iter()
            .zip(&b)
            .map(|(x, y)| {
                let scale = x.abs().max(y.abs());
                if scale < 1e-12 {
                    0.0
                } else {
                    (x - y).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Weights `(a, b, c, d, e)` of
/// `int [a (Delta w)^2 + b |grad w|^2 Delta w + c |grad w|^4 + d |grad w|^2]
///  + e log avg e^{4 (w - avg w)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalWeights {
    pub lap2: i64,
    pub cross: i64,
    pub grad4: i64,
    pub grad2: i64,
    /// Coefficient of the log term in units of `pi^2`.
    pub exp_pi2: i64,
}

impl FunctionalWeights {
    pub const PANEITZ: Self = Self { lap2: 18, cross: 64, grad4: 32, grad2: -60, exp_pi2: 112 };
    pub const HALF_TORSION: Self =
        Self { lap2: 216, cross: 928, grad4: 464, grad2: -2352, exp_pi2: 1984 };
    pub const CONFORMAL_LAPLACIAN: Self =
        Self { lap2: -12, cross: -16, grad4: -8, grad2: 24, exp_pi2: 32 };

    pub fn evaluate(&self, i: &BubbleIntegrals) -> f64 {
        self.lap2 as f64 * i.lap2
            + self.cross as f64 * i.cross
            + self.grad4 as f64 * i.grad4
            + self.grad2 as f64 * i.grad2
            + self.exp_pi2 as f64 * PI * PI * i.exp
    }

    /// Coefficient of `w3 log(1/eps)` predicted from the leading behaviour
    /// `4, -2 a, a^2` (times `a^2`) of the three quartic integrals, for
    /// amplitude `a = +-1`.
    pub fn leading_slope(&self, amplitude_sign: i64) -> i64 {
        4 * self.lap2 - 2 * amplitude_sign * self.cross + self.grad4
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleRun {
    pub eps: f64,
    pub rho: f64,
    pub amplitude: f64,
    pub integrals: BubbleIntegrals,
    pub f_p: f64,
    pub f_tau: f64,
    pub f_l: f64,
    /// Largest relative change of any integral under node doubling.
    pub refinement: f64,
}

/// Relative accuracy targeted by the node doubling in [`bubble_integrals`].
pub const QUAD_TOL: f64 = 1e-8;

pub fn bubble_integrals(eps: f64, rho: f64) -> Result<BubbleRun> {
    bubble_run(Bubble::new(eps, rho)?)
}

pub fn bubble_run(b: Bubble) -> Result<BubbleRun> {
    let mut n = 8;
    let mut prev = integrals_with_nodes(&b, n);
    loop {
        n *= 2;
        let cur = integrals_with_nodes(&b, n);
        let change = cur.max_rel_diff(&prev);
        if change <= QUAD_TOL || n >= 128 {
            if change > QUAD_TOL {
                return Err(Error::Quadrature(format!("bubble integrals changed by {change:e}")));
            }
            return Ok(BubbleRun {
                eps: b.eps,
                rho: b.cutoff.rho,
                amplitude: b.amplitude,
                integrals: cur,
                f_p: FunctionalWeights::PANEITZ.evaluate(&cur),
                f_tau: FunctionalWeights::HALF_TORSION.evaluate(&cur),
                f_l: FunctionalWeights::CONFORMAL_LAPLACIAN.evaluate(&cur),
                refinement: change,
            });
        }
        prev = cur;
    }
}

/// Panel breakpoints: geometric from `eps/1024` to `rho/2` with ratio 2,
/// then eight equal panels across the cutoff annulus, further split where
/// `Delta w` changes sign so that `|Delta w|` is smooth on every panel.
fn panels(b: &Bubble) -> Vec<f64> {
    let half = 0.5 * b.cutoff.rho;
    let mut pts = vec![0.0];
    let mut r = b.eps / 1024.0;
    while r < half {
        pts.push(r);
        r *= 2.0;
    }
    let lap = |r: f64| b.eval(r).2;
    let m = 64;
    for k in 0..8 {
        let (lo, hi) = (half * (1.0 + k as f64 / 8.0), half * (1.0 + (k + 1) as f64 / 8.0));
        pts.push(lo);
        for j in 0..m {
            let a = lo + (hi - lo) * j as f64 / m as f64;
            let c = lo + (hi - lo) * (j + 1) as f64 / m as f64;
            if lap(a) * lap(c) < 0.0 {
                if let Ok(z) = roots::bracketed(a, c, 1e-15, lap) {
                    pts.push(z);
                }
            }
        }
    }
    pts.push(b.cutoff.rho);
    pts
}

pub fn integrals_with_nodes(b: &Bubble, n: usize) -> BubbleIntegrals {
    let g = GaussLegendre::cached(n);
    let pts = panels(b);
    let mut s = BubbleIntegrals::default();
    let mut w_sum = 0.0;
    for p in pts.windows(2) {
        let (lo, hi) = (p[0], p[1]);
        let f = |k: usize| {
            g.integrate(lo, hi, |r| {
                let (w, w1, lap) = b.eval(r);
                let g2 = w1 * w1;
                let v = match k {
                    0 => lap * lap,
                    1 => lap * g2,
                    2 => g2 * g2,
                    3 => g2,
                    4 => lap.abs() + g2,
                    _ => w,
                };
                v * OMEGA3 * r * r * r
            })
        };
        s.lap2 += f(0);
        s.cross += f(1);
        s.grad4 += f(2);
        s.grad2 += f(3);
        s.lower += f(4);
        w_sum += f(5);
    }
    let vol = OMEGA3 * b.cutoff.rho.powi(4) / 4.0;
    let w_bar = w_sum / vol;
    let mut e_sum = 0.0;
    for p in pts.windows(2) {
        e_sum += g.integrate(p[0], p[1], |r| {
            let (w, _, _) = b.eval(r);
            (4.0 * (w - w_bar)).exp_m1() * OMEGA3 * r * r * r
        });
    }
    s.exp = (e_sum / vol).ln_1p();
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    /// Coefficient of `log(1/eps)`.
    pub slope: f64,
    /// Coefficient of the second regressor, when there is one.
    pub second: Option<f64>,
    pub intercept: f64,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFits {
    /// `F = s L + k I_exp + c` with `L = log(1/eps)` and `I_exp` the computed
    /// log-average term; `k` should come out as the functional's own weight.
    pub separated: LineFit,
    /// `F = s L + k log L + c`.
    pub loglog: LineFit,
    /// `F = s L + c`, biased by the sublinear log-average term.
    pub naive: LineFit,
    /// Leading slope predicted from the weights, in units of `w3`.
    pub predicted: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub eps: Vec<f64>,
    pub amplitude: f64,
    pub p: SlopeFits,
    pub tau: SlopeFits,
    pub l: SlopeFits,
}

pub fn slope_fit(runs: &[BubbleRun]) -> Result<SlopeReport> {
    let mut eps: Vec<f64> = runs.iter().map(|r| r.eps).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 3 || (eps[eps.len() - 1] / eps[0]).log10() < 2.0 - 1e-12 {
        return Err(Error::OutOfRange(
            "slope fit needs three distinct eps spanning two decades".into(),
        ));
    }
    let amplitude = runs[0].amplitude;
    let sign = if amplitude >= 0.0 { 1 } else { -1 };
    let ls: Vec<f64> = runs.iter().map(|r| (1.0 / r.eps).ln()).collect();
    let lls: Vec<f64> = ls.iter().map(|l| l.ln()).collect();
    let ie: Vec<f64> = runs.iter().map(|r| r.integrals.exp).collect();
    let fits = |f: fn(&BubbleRun) -> f64, w: FunctionalWeights| -> Result<SlopeFits> {
        let y: Vec<f64> = runs.iter().map(f).collect();
        Ok(SlopeFits {
            separated: fit(&ls, Some(&ie), &y)?,
            loglog: fit(&ls, Some(&lls), &y)?,
            naive: fit(&ls, None, &y)?,
            predicted: w.leading_slope(sign),
        })
    };
    Ok(SlopeReport {
        eps,
        amplitude,
        p: fits(|r| r.f_p, FunctionalWeights::PANEITZ)?,
        tau: fits(|r| r.f_tau, FunctionalWeights::HALF_TORSION)?,
        l: fits(|r| r.f_l, FunctionalWeights::CONFORMAL_LAPLACIAN)?,
    })
}

fn fit(ls: &[f64], second: Option<&[f64]>, f: &[f64]) -> Result<LineFit> {
    let k = if second.is_some() { 3 } else { 2 };
    let x = nalgebra::DMatrix::from_fn(ls.len(), k, |i, j| match (j, second) {
        (0, _) => ls[i],
        (1, Some(s)) => s[i],
        _ => 1.0,
    });
    let y = nalgebra::DVector::from_column_slice(f);
    let sol = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::OutOfRange(format!("least squares failed: {e}")))?;
    let res = &x * &sol - &y;
    Ok(LineFit {
        slope: sol[0],
        second: second.map(|_| sol[1]),
        intercept: sol[k - 1],
        max_residual: res.amax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        let c = Cutoff { rho: 1.0 };
        assert_eq!(c.eval(0.3), (1.0, 0.0, 0.0));
        assert_eq!(c.eval(1.2), (0.0, 0.0, 0.0));
        let (e, _, _) = c.eval(0.75);
        assert!((e - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cutoff_derivative_matches_difference() {
        let c = Cutoff { rho: 2.0 };
        let h = 1e-6;
        for r in [1.1, 1.4, 1.9] {
            let fd = (c.eval(r + h).0 - c.eval(r - h).0) / (2.0 * h);
            assert!((fd - c.eval(r).1).abs() < 1e-8);
        }
    }

    #[test]
    fn eps_too_large() {
        assert!(matches!(Bubble::new(0.2, 1.0), Err(Error::EpsilonTooLarge { .. })));
    }

    #[test]
    fn leading_identities() {
        assert_eq!(FunctionalWeights::PANEITZ.leading_slope(1), -24);
        assert_eq!(FunctionalWeights::HALF_TORSION.leading_slope(1), -528);
    }
}
