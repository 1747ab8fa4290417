//! The invariant disc of `K = 0` orbits that approach the saddle `(1, 0, 0)`.
//!
//! On `{F_C = G_C = 0}` the third-order system collapses to the Newton
//! problem for `V_C` at the disc energy, lifted back by `z = -V_C'(x)`.  The
//! disc is swept by these periodic orbits for `C` between the value where the
//! orbit shrinks to the centre `(x_in, 0, 0)` and the value where it becomes
//! the homoclinic loop through `(1, 0, 0)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{self, critical_points, CriticalKind};
use crate::integrate::{integrate, IntegratorConfig};
use crate::model::{invariant_k, invariant_q, Coefficients, PotentialSpec, Radial, State3};
use crate::roots;

/// Samples per disc orbit.
pub const DISC_SAMPLES: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscRange {
    /// Centre end: the orbit is the equilibrium `(x_in, 0, 0)`.
    pub c_lo: f64,
    /// Homoclinic end: the orbit passes through `(1, 0, 0)`.
    pub c_hi: f64,
    pub x_inner: f64,
    /// `Q` along the disc orbits ranges over `[q_of(c_hi), q_of(c_lo)]`.
    pub q_min: f64,
    pub q_max: f64,
    /// Largest deviation of the solved endpoints from their closed forms.
    pub closed_form_gap: f64,
}

/// Value of `Q` on the disc orbit with parameter `C`.
pub fn disc_q(c: &Coefficients, cc: f64) -> f64 {
    -16.0 * (1.0 + c.beta) * cc / 9.0
}

/// Inverse of [`disc_q`].
pub fn disc_c(c: &Coefficients, q: f64) -> f64 {
    -9.0 * q / (16.0 * (1.0 + c.beta))
}

pub fn disc_range(c: &Coefficients) -> Result<DiscRange> {
    let b = c.beta;
    if !(b > -1.0 && b < -0.25) {
        return Err(Error::NoDisc(format!("beta = {b} is outside (-1, -1/4)")));
    }
    let energy = c.disc_energy();
    let top = hamiltonian::case_threshold(b) * (1.0 - 1e-6);
    let extremum = |cc: f64, kind: CriticalKind| {
        let p = PotentialSpec::with_coeffs(cc, c);
        critical_points(&p)
            .into_iter()
            .filter(|cp| cp.kind == kind && cp.v > -1e-9)
            .map(|cp| cp.value - energy)
            .next()
            .unwrap_or(f64::NAN)
    };
    let g_in = |cc: f64| extremum(cc, CriticalKind::Min);
    let g_out = |cc: f64| extremum(cc, CriticalKind::Max);
    if !(g_in(0.0) > 0.0 && g_out(0.0) > 0.0 && g_in(top) < 0.0 && g_out(top) < 0.0) {
        return Err(Error::NoDisc(format!("no sign change of the well levels for beta = {b}")));
    }
    let c_lo = roots::bracketed(0.0, top, 1e-13, g_in)?;
    let c_hi = roots::bracketed(0.0, top, 1e-13, g_out)?;
    if c_lo >= c_hi {
        return Err(Error::NoDisc(format!("empty range [{c_lo}, {c_hi}]")));
    }
    let x_inner = (-(4.0 * b + 1.0) / 3.0).sqrt();
    let lo_closed = 6.0 * x_inner * (4.0 - 2.0 * b) / (1.0 + b);
    let hi_closed = -36.0 * b / (1.0 + b);
    Ok(DiscRange {
        c_lo,
        c_hi,
        x_inner,
        q_min: disc_q(c, c_hi),
        q_max: disc_q(c, c_lo),
        closed_form_gap: (c_lo - lo_closed).abs().max((c_hi - hi_closed).abs()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscOrbitKind {
    Center,
    Periodic,
    Homoclinic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscResiduals {
    pub k: f64,
    pub q: f64,
    pub energy: f64,
    /// `|dz/dt - z'(x, y, z)|` with `dz/dt = -V_C''(x) y` along the lift.
    pub third_order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscOrbit {
    pub c: f64,
    pub kind: DiscOrbitKind,
    /// Infinite for the homoclinic loop.
    pub period: f64,
    pub times: Vec<f64>,
    pub states: Vec<State3>,
    pub residuals: DiscResiduals,
}

pub fn disc_orbit(c: &Coefficients, cc: f64) -> Result<DiscOrbit> {
    let range = disc_range(c)?;
    let tol = 1e-9 * range.c_hi;
    if cc < range.c_lo - tol || cc > range.c_hi + tol {
        return Err(Error::OutOfRange(format!(
            "C = {cc} outside [{}, {}]",
            range.c_lo, range.c_hi
        )));
    }
    let p = PotentialSpec::with_coeffs(cc, c);
    let energy = c.disc_energy();
    let lift = |x: f64, y: f64| State3::new(x, y, -p.d1(x));

    let (kind, period, times, states) = if (cc - range.c_lo).abs() <= tol {
        let x = range.x_inner;
        let period = 2.0 * PI / p.d2(x).sqrt();
        let times = (0..DISC_SAMPLES).map(|k| period * k as f64 / DISC_SAMPLES as f64).collect();
        (DiscOrbitKind::Center, period, times, vec![State3::new(x, 0.0, 0.0); DISC_SAMPLES])
    } else if (cc - range.c_hi).abs() <= tol {
        let p_hi = PotentialSpec::with_coeffs(range.c_hi, c);
        let half = hamiltonian::homoclinic_half(&p_hi)?;
        let n = DISC_SAMPLES;
        let mut times = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for k in 0..n {
            let s = -half.t_turn + 2.0 * half.t_turn * k as f64 / (n - 1) as f64;
            let y = half.at(s);
            times.push(s);
            states.push(lift(y[0], y[1]));
        }
        (DiscOrbitKind::Homoclinic, f64::INFINITY, times, states)
    } else {
        let (v_lo, _) = hamiltonian::turning_points(&p, energy)?;
        let period = hamiltonian::orbit_period(&p, energy)?;
        let f = move |_t: f64, s: &[f64; 2]| p.newton_rhs(s);
        let cfg = IntegratorConfig::tight().with_max_step(0.02);
        let tr = integrate(&f, 0.0, [v_lo, 0.0], period, &cfg, &[])?;
        let times: Vec<f64> =
            (0..DISC_SAMPLES).map(|k| period * k as f64 / DISC_SAMPLES as f64).collect();
        let states = times
            .iter()
            .map(|&t| {
                let y = tr.eval(t).expect("sample inside the period");
                lift(y[0], y[1])
            })
            .collect();
        (DiscOrbitKind::Periodic, period, times, states)
    };

    let radial = Radial::new(*c);
    let q_disc = disc_q(c, cc);
    let mut r = DiscResiduals::default();
    for s in &states {
        r.k = r.k.max(invariant_k(c, *s).abs());
        r.q = r.q.max((invariant_q(c, *s) - q_disc).abs());
        r.energy = r.energy.max((p.energy(s.x, s.y) - energy).abs());
        let dz = -p.d2(s.x) * s.y;
        r.third_order = r.third_order.max((dz - radial.z_dot(s.x, s.y, s.z)).abs());
    }
    Ok(DiscOrbit { c: cc, kind, period, times, states, residuals: r })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscChart {
    pub range: DiscRange,
    pub orbits: Vec<DiscOrbit>,
    /// Every orbit's `(x, y)` projection lies inside the next one's.
    pub nested: bool,
}

/// `n` orbits for `C` evenly spaced over the closed range.
pub fn disc_chart(c: &Coefficients, n: usize) -> Result<DiscChart> {
    if n < 2 {
        return Err(Error::OutOfRange("a chart needs at least two orbits".into()));
    }
    let range = disc_range(c)?;
    let orbits = (0..n)
        .map(|i| {
            let cc = range.c_lo + (range.c_hi - range.c_lo) * i as f64 / (n - 1) as f64;
            disc_orbit(c, cc)
        })
        .collect::<Result<Vec<_>>>()?;
    let nested = orbits.windows(2).all(|w| {
        let outer: Vec<[f64; 2]> = w[1].states.iter().map(|s| [s.x, s.y]).collect();
        w[0].states.iter().all(|s| inside(&outer, [s.x, s.y]))
    });
    Ok(DiscChart { range, orbits, nested })
}

/// Even-odd rule for a closed polygon.
fn inside(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut c = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
            if p[0] < x {
                c = !c;
            }
        }
        j = i;
    }
    c
}

/// Parameter `C` of the disc orbit through `s`, if `s` lies on the disc to
/// within `tol` in `K`.
pub fn disc_membership(c: &Coefficients, s: State3, tol: f64) -> Result<Option<f64>> {
    let range = disc_range(c)?;
    if invariant_k(c, s).abs() > tol || !(0.0..=1.0 + tol).contains(&s.x) {
        return Ok(None);
    }
    let q = invariant_q(c, s);
    let slack = 1e-6;
    if q < range.q_min - slack || q > range.q_max + slack {
        return Ok(None);
    }
    Ok(Some(disc_c(c, q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_has_no_disc() {
        assert!(matches!(disc_range(&Coefficients::conformal_laplacian()), Err(Error::NoDisc(_))));
    }

    #[test]
    fn polygon_test() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(inside(&sq, [0.5, 0.5]));
        assert!(!inside(&sq, [1.5, 0.5]));
    }
}
