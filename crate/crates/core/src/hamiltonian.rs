//! The one-degree-of-freedom Newton problem `v'' = -V_{C,beta}'(v)`.
//!
//! Its first integral `v'^2 / 2 + V(v) = H` carries the whole radial theory
//! in the round and Delaunay cases: bounded orbits are oscillations in the
//! well of the quartic, separatrices end at its local maxima.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{integrate, Action, Direction, EventSpec, IntegratorConfig, Termination, Trajectory};
use crate::model::{Coefficients, PotentialSpec};
use crate::quad::{self, GaussLegendre};
use crate::roots;

const TURNING_TOL: f64 = 1e-14;
const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    Max,
    Min,
    Inflection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub v: f64,
    pub kind: CriticalKind,
    pub value: f64,
}

/// Real roots of `V'`, ascending.  A double root is reported once, as an
/// inflection.
pub fn critical_points(p: &PotentialSpec) -> Vec<CriticalPoint> {
    // V'(v) = -(2/(1+b)) (v^3 - (1-2b) v + (1+b) C / 18)
    let ob = 1.0 + p.beta;
    let roots = roots::depressed_cubic(-(1.0 - 2.0 * p.beta), ob * p.c / 18.0);
    let mut out: Vec<CriticalPoint> = Vec::new();
    let curvature_scale = 2.0 * ((1.0 - 2.0 * p.beta) / ob).abs().max(1.0 / ob.abs());
    for v in roots {
        if out.iter().any(|c| (c.v - v).abs() < 1e-6) {
            if let Some(c) = out.iter_mut().find(|c| (c.v - v).abs() < 1e-6) {
                c.kind = CriticalKind::Inflection;
            }
            continue;
        }
        let d2 = p.d2(v);
        let kind = if d2.abs() <= 1e-9 * curvature_scale {
            CriticalKind::Inflection
        } else if d2 < 0.0 {
            CriticalKind::Max
        } else {
            CriticalKind::Min
        };
        out.push(CriticalPoint { v, kind, value: p.value(v) });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialCase {
    /// `C = 0`: symmetric double-hump, Delaunay family.
    Symmetric,
    /// `0 < |C| < threshold`: two maxima of different height around a well.
    Asymmetric,
    /// `|C| >= threshold` (or `beta >= 1/2`): no well, only constants.
    ConstantsOnly,
    /// `beta < -1`: the quartic is bounded below.
    Coercive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: PotentialCase,
    /// `|C|` at which the well disappears; `10 sqrt 10` for Paneitz.
    pub threshold: f64,
    /// True when `C < 0` and the report was derived from `v -> -v`.
    pub reflected: bool,
    pub critical_points: Vec<CriticalPoint>,
}

/// Boundary `|C_beta|` between the asymmetric and constants-only regimes.
pub fn case_threshold(beta: f64) -> f64 {
    let a = 1.0 - 2.0 * beta;
    if a <= 0.0 {
        return 0.0;
    }
    12.0 * a / (1.0 + beta) * (a / 3.0).sqrt()
}

pub fn case_classify(p: &PotentialSpec) -> CaseReport {
    let threshold = case_threshold(p.beta);
    let crit = critical_points(p);
    let case = if p.beta < -1.0 {
        PotentialCase::Coercive
    } else if p.beta >= 0.5 {
        PotentialCase::ConstantsOnly
    } else if p.c == 0.0 {
        PotentialCase::Symmetric
    } else if p.c.abs() < threshold
        && crit.iter().any(|c| c.kind == CriticalKind::Min)
    {
        PotentialCase::Asymmetric
    } else {
        PotentialCase::ConstantsOnly
    };
    CaseReport { case, threshold, reflected: p.c < 0.0, critical_points: crit }
}

/// The well bottom used when no anchor is given: the unique local minimum
/// for `beta > -1`, the deepest one (rightmost on ties) when coercive.
fn default_anchor(p: &PotentialSpec) -> Result<f64> {
    let mins: Vec<CriticalPoint> =
        critical_points(p).into_iter().filter(|c| c.kind == CriticalKind::Min).collect();
    mins.iter()
        .copied()
        .reduce(|a, b| if b.value <= a.value + 1e-15 { b } else { a })
        .map(|c| c.v)
        .ok_or_else(|| Error::NoBoundedOrbit(format!("V has no well for C = {}", p.c)))
}

/// Turning points of the bounded oscillation at energy `h` in the default
/// well.
pub fn turning_points(p: &PotentialSpec, h: f64) -> Result<(f64, f64)> {
    turning_points_from(p, h, default_anchor(p)?)
}

/// Turning points of the connected component of `{V <= h}` that contains
/// `anchor`.
pub fn turning_points_from(p: &PotentialSpec, h: f64, anchor: f64) -> Result<(f64, f64)> {
    if !h.is_finite() {
        return Err(Error::NoBoundedOrbit("non-finite energy".into()));
    }
    let va = p.value(anchor);
    if va > h + 1e-15 * h.abs().max(1.0) {
        return Err(Error::NoBoundedOrbit(format!("energy {h} below the well bottom {va}")));
    }
    if (va - h).abs() <= 1e-15 * h.abs().max(1.0) && p.d1(anchor).abs() < 1e-12 {
        return Ok((anchor, anchor));
    }
    let crit: Vec<f64> = critical_points(p).iter().map(|c| c.v).collect();
    let g = |v: f64| p.value(v) - h;
    let coercive = p.beta < -1.0;

    let mut hi_side = None;
    let mut prev = anchor;
    for &c in crit.iter().filter(|&&c| c > anchor + 1e-12) {
        if g(c) > 0.0 {
            hi_side = Some(roots::bracketed(prev, c, TURNING_TOL, g)?);
            break;
        }
        prev = c;
    }
    let v_hi = match hi_side {
        Some(v) => v,
        None if coercive => {
            let mut r = prev.abs().max(1.0) + prev;
            while g(r) <= 0.0 {
                r = 2.0 * r.abs() + 1.0;
            }
            roots::bracketed(prev, r, TURNING_TOL, g)?
        }
        None => {
            return Err(Error::NoBoundedOrbit(format!(
                "energy {h} is at or above the right barrier"
            )))
        }
    };

    let mut lo_side = None;
    let mut prev = anchor;
    for &c in crit.iter().rev().filter(|&&c| c < anchor - 1e-12) {
        if g(c) > 0.0 {
            lo_side = Some(roots::bracketed(c, prev, TURNING_TOL, g)?);
            break;
        }
        prev = c;
    }
    let v_lo = match lo_side {
        Some(v) => v,
        None if coercive => {
            let mut l = prev - prev.abs().max(1.0);
            while g(l) <= 0.0 {
                l = -2.0 * l.abs() - 1.0;
            }
            roots::bracketed(l, prev, TURNING_TOL, g)?
        }
        None => {
            return Err(Error::NoBoundedOrbit(format!(
                "energy {h} is at or above the left barrier"
            )))
        }
    };
    if p.c == 0.0 && p.beta > -1.0 {
        // Even potential: make the pair exactly symmetric.
        let a = 0.5 * (v_hi - v_lo);
        return Ok((-a, a));
    }
    Ok((v_lo, v_hi))
}

/// `H - V(v) = (v - v_lo)(v_hi - v) P(v)` with `P` quadratic and positive
/// between the turning points; returns `P` without cancellation.
fn reduced_quadratic(p: &PotentialSpec, v_lo: f64, v_hi: f64) -> impl Fn(f64) -> f64 {
    let m = p.monomials();
    // q(v) = H - V(v) = sum a_k v^k
    let a4 = -m[4];
    let a2 = -m[2];
    let s = v_lo + v_hi;
    let pp = v_lo * v_hi;
    let b1 = s * a4;
    let b0 = a2 + s * b1 - pp * a4;
    move |v: f64| -(a4 * v * v + b1 * v + b0)
}

/// `int_{-pi/2}^{pi/2} w(v(theta)) / sqrt(2 P(v(theta))) dtheta` with
/// `v = m + a sin theta`; smooth in `theta` because the square-root
/// singularities at the turning points are absorbed by the substitution.
fn well_integral(
    p: &PotentialSpec,
    h: f64,
    (v_lo, v_hi): (f64, f64),
    w: impl Fn(f64) -> f64,
) -> Result<f64> {
    let m = 0.5 * (v_lo + v_hi);
    let a = 0.5 * (v_hi - v_lo);
    let red = reduced_quadratic(p, v_lo, v_hi);
    let f = |th: f64| {
        let v = m + a * th.sin();
        let r = red(v);
        w(v) / (2.0 * r.max(0.0)).sqrt()
    };
    let (val, ok) = quad::doubling(-FRAC_PI_2, FRAC_PI_2, 64, 1024, QUAD_TOL, f);
    if ok && val.is_finite() {
        return Ok(val);
    }
    // Near a separatrix the integrand peaks at an end; refine by panels.
    let g = GaussLegendre::cached(64);
    let mut prev = val;
    let mut panels = 2usize;
    while panels <= 1 << 14 {
        let width = PI / panels as f64;
        let cur: f64 = (0..panels)
            .map(|k| {
                let a0 = -FRAC_PI_2 + k as f64 * width;
                g.integrate(a0, a0 + width, f)
            })
            .sum();
        if (cur - prev).abs() <= QUAD_TOL * cur.abs().max(1.0) && cur.is_finite() {
            return Ok(cur);
        }
        prev = cur;
        panels *= 2;
    }
    Err(Error::Quadrature(format!("well integral at H = {h} did not settle")))
}

/// Period of the bounded orbit at energy `h`.  At the bottom of the well it
/// is the harmonic limit `2 pi / sqrt(V'')`.
pub fn orbit_period(p: &PotentialSpec, h: f64) -> Result<f64> {
    let tp = turning_points(p, h)?;
    period_between(p, h, tp)
}

fn period_between(p: &PotentialSpec, h: f64, tp: (f64, f64)) -> Result<f64> {
    if tp.0 == tp.1 {
        return Ok(2.0 * PI / p.d2(tp.0).sqrt());
    }
    Ok(2.0 * well_integral(p, h, tp, |_| 1.0)?)
}

/// Time average of `v` over the orbit at energy `h`: the slope of `u` per
/// unit cylinder length.
pub fn average_slope(p: &PotentialSpec, h: f64) -> Result<f64> {
    let tp = turning_points(p, h)?;
    slope_between(p, h, tp)
}

fn slope_between(p: &PotentialSpec, h: f64, tp: (f64, f64)) -> Result<f64> {
    if tp.0 == tp.1 {
        return Ok(tp.0);
    }
    let num = well_integral(p, h, tp, |v| v)?;
    let den = well_integral(p, h, tp, |_| 1.0)?;
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitKind {
    Constant,
    Periodic,
    Heteroclinic,
    Homoclinic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub c: f64,
    pub beta: f64,
    pub h: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub period: f64,
    pub average_slope: f64,
    pub kind: OrbitKind,
}

pub fn orbit_summary(p: &PotentialSpec, h: f64) -> Result<OrbitSummary> {
    let tp = turning_points(p, h)?;
    let kind = if tp.0 == tp.1 { OrbitKind::Constant } else { OrbitKind::Periodic };
    Ok(OrbitSummary {
        c: p.c,
        beta: p.beta,
        h,
        v_lo: tp.0,
        v_hi: tp.1,
        period: period_between(p, h, tp)?,
        average_slope: slope_between(p, h, tp)?,
        kind,
    })
}

/// Energy at the top of the barriers for `C = 0`.
pub fn separatrix_energy(beta: f64) -> f64 {
    let a = 1.0 - 2.0 * beta;
    a * a / (2.0 * (1.0 + beta)) + 2.0 / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaunayOrbit {
    pub alpha: f64,
    pub h: f64,
    pub amplitude: f64,
    pub period: f64,
    pub kind: OrbitKind,
    /// `C_alpha` with `C^{-1} <= e^{2u} |x|^2 <= C`.
    pub bound_constant: f64,
}

/// Member of the `C = 0` family at normalised energy
/// `alpha = (H - V(0)) / (H_sep - V(0))`; `alpha = 1` is the heteroclinic.
pub fn delaunay_family(coeffs: &Coefficients, alpha: f64) -> Result<DelaunayOrbit> {
    let beta = coeffs.beta;
    if !(beta > -1.0 && beta < 0.5) {
        return Err(Error::OutOfRange(format!("no Delaunay family for beta = {beta}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} outside [0, 1]")));
    }
    let p = PotentialSpec::with_coeffs(0.0, coeffs);
    let h0 = 2.0 / 3.0;
    let hs = separatrix_energy(beta);
    let h = h0 + alpha * (hs - h0);
    if alpha == 1.0 {
        return Ok(DelaunayOrbit {
            alpha,
            h,
            amplitude: (1.0 - 2.0 * beta).sqrt(),
            period: f64::INFINITY,
            kind: OrbitKind::Heteroclinic,
            bound_constant: f64::INFINITY,
        });
    }
    if alpha == 0.0 {
        return Ok(DelaunayOrbit {
            alpha,
            h,
            amplitude: 0.0,
            period: 2.0 * PI / p.d2(0.0).sqrt(),
            kind: OrbitKind::Constant,
            bound_constant: 1.0,
        });
    }
    let (v_lo, v_hi) = turning_points(&p, h)?;
    let period = period_between(&p, h, (v_lo, v_hi))?;
    // Oscillation range of u = int v: twice the area under the positive lobe.
    let a = v_hi;
    let red = reduced_quadratic(&p, v_lo, v_hi);
    let (lobe, _) = quad::doubling(0.0, FRAC_PI_2, 64, 1024, QUAD_TOL, |th| {
        let v = a * th.sin();
        v / (2.0 * red(v).max(0.0)).sqrt()
    });
    let range = 2.0 * lobe;
    Ok(DelaunayOrbit {
        alpha,
        h,
        amplitude: v_hi,
        period,
        kind: OrbitKind::Periodic,
        bound_constant: range.exp(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialOrbit {
    pub kind: OrbitKind,
    pub c: f64,
    pub beta: f64,
    pub h: f64,
    /// Limits of `v` as `t -> -inf` and `t -> +inf`.
    pub v_minus: f64,
    pub v_plus: f64,
    /// Rate at which `v` approaches its limits, `|v - v_inf| ~ e^{-rate |t|}`.
    pub rate: f64,
    /// `(t, v, v')` samples.
    pub samples: Vec<[f64; 3]>,
    /// Largest `|v'' + V'(v)|` over the samples.
    pub residual: f64,
    /// Largest `|v'^2 / 2 + V(v) - h|` over the samples.
    pub energy_error: f64,
    /// Exponents `(-2(1 + v+), 2(v+ - 1))` of the metric `r^e |dx|^2` near
    /// zero and near infinity, for the heteroclinic.
    pub metric_exponents: Option<(f64, f64)>,
    /// `A^2` of the asymptotic cone `dr^2 + A^2 r^2 g_{S^3}`.
    pub cone_factor: Option<f64>,
}

/// Closed-form heteroclinic of the `C = 0` problem,
/// `v = A tanh(kappa t)` with `A = sqrt(1 - 2 beta)`,
/// `kappa = A / sqrt(1 + beta)`.
pub fn heteroclinic(beta: f64) -> Result<(f64, f64)> {
    if !(beta > -1.0 && beta < 0.5) {
        return Err(Error::WrongLevel(format!("no heteroclinic for beta = {beta}")));
    }
    let a = (1.0 - 2.0 * beta).sqrt();
    Ok((a, a / (1.0 + beta).sqrt()))
}

/// `u(t) = A t + (A / kappa) log(1 + e^{-2 kappa t})`, the primitive of the
/// heteroclinic `v = A tanh(kappa t)`.
pub fn heteroclinic_u(beta: f64, t: f64) -> Result<f64> {
    let (a, kappa) = heteroclinic(beta)?;
    Ok(a * t + a / kappa * (-2.0 * kappa * t).exp().ln_1p())
}

/// The separatrix orbit of `p`: heteroclinic for `C = 0`, homoclinic to the
/// lower barrier for `0 < |C| < threshold`.
pub fn special_orbit(p: &PotentialSpec) -> Result<SpecialOrbit> {
    let report = case_classify(p);
    match report.case {
        PotentialCase::Symmetric => {
            let (a, kappa) = heteroclinic(p.beta)?;
            let mut residual: f64 = 0.0;
            let mut energy_error: f64 = 0.0;
            let h = p.value(a);
            let samples: Vec<[f64; 3]> = (0..=2000)
                .map(|i| {
                    let t = -10.0 + 0.01 * i as f64;
                    let th = (kappa * t).tanh();
                    let sech2 = 1.0 - th * th;
                    let v = a * th;
                    let v1 = a * kappa * sech2;
                    let v2 = -2.0 * a * kappa * kappa * th * sech2;
                    residual = residual.max((v2 + p.d1(v)).abs());
                    energy_error = energy_error.max((p.energy(v, v1) - h).abs());
                    [t, v, v1]
                })
                .collect();
            Ok(SpecialOrbit {
                kind: OrbitKind::Heteroclinic,
                c: p.c,
                beta: p.beta,
                h,
                v_minus: -a,
                v_plus: a,
                rate: 2.0 * kappa,
                samples,
                residual,
                energy_error,
                metric_exponents: Some((-2.0 * (1.0 + a), 2.0 * (a - 1.0))),
                cone_factor: Some(a * a),
            })
        }
        PotentialCase::Asymmetric if p.c < 0.0 => {
            let mut o = special_orbit(&p.reflected())?;
            o.c = p.c;
            o.v_minus = -o.v_minus;
            o.v_plus = -o.v_plus;
            for s in o.samples.iter_mut() {
                s[1] = -s[1];
                s[2] = -s[2];
            }
            Ok(o)
        }
        PotentialCase::Asymmetric => homoclinic(p),
        _ => Err(Error::WrongLevel(format!("no separatrix loop for C = {}", p.c))),
    }
}

/// Offset from the saddle along its unstable direction used to launch the
/// homoclinic loop.
pub const HOMOCLINIC_OFFSET: f64 = 1e-12;

/// Outgoing half of a homoclinic loop, from the saddle to the turning point.
pub struct HomoclinicHalf {
    pub saddle: CriticalPoint,
    pub lambda: f64,
    pub t_turn: f64,
    trajectory: Trajectory<2>,
}

impl HomoclinicHalf {
    /// `(v, v')` at time `s` measured from the turning point, for
    /// `|s| <= t_turn`; the loop is reversible about `s = 0`.
    pub fn at(&self, s: f64) -> [f64; 2] {
        let tt = (self.t_turn - s.abs()).clamp(0.0, self.t_turn);
        let y = self.trajectory.eval(tt).unwrap_or(self.trajectory.states[0]);
        if s < 0.0 {
            y
        } else {
            [y[0], -y[1]]
        }
    }
}

/// Launches from the lower barrier of `p` along its unstable direction and
/// stops at the turning point.
pub fn homoclinic_half(p: &PotentialSpec) -> Result<HomoclinicHalf> {
    let report = case_classify(p);
    if report.case != PotentialCase::Asymmetric || p.c < 0.0 {
        return Err(Error::WrongLevel(format!("no homoclinic launch for C = {}", p.c)));
    }
    let saddle = *report
        .critical_points
        .iter()
        .filter(|c| c.kind == CriticalKind::Max)
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::WrongLevel("no maximum".into()))?;
    let vs = saddle.v;
    let lambda = (-p.d2(vs)).sqrt();
    let anchor = default_anchor(p)?;
    let toward = (anchor - vs).signum();
    let y0 = [vs + toward * HOMOCLINIC_OFFSET, toward * lambda * HOMOCLINIC_OFFSET];
    let pp = *p;
    let f = move |_t: f64, s: &[f64; 2]| pp.newton_rhs(s);
    let turn = EventSpec::threshold("turn", 1, 0.0, Direction::Either, Action::Stop);
    let cfg = IntegratorConfig::tight().with_max_step(0.05).with_blowup_norm(1e6);
    let trajectory = integrate(&f, 0.0, y0, 200.0, &cfg, &[turn])?;
    let t_turn = match trajectory.termination {
        Termination::Event { t, .. } => t,
        _ => return Err(Error::Integration("homoclinic launch never turned".into())),
    };
    Ok(HomoclinicHalf { saddle, lambda, t_turn, trajectory })
}

fn homoclinic(p: &PotentialSpec) -> Result<SpecialOrbit> {
    let half = homoclinic_half(p)?;
    let t_turn = half.t_turn;
    let n = 2001;
    let fd = 1e-3;
    let mut residual: f64 = 0.0;
    let mut energy_error: f64 = 0.0;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let s = -t_turn + 2.0 * t_turn * i as f64 / (n - 1) as f64;
        let y = half.at(s);
        if s.abs() + fd < t_turn {
            let acc = (half.at(s + fd)[0] - 2.0 * y[0] + half.at(s - fd)[0]) / (fd * fd);
            residual = residual.max((acc + p.d1(y[0])).abs());
        }
        energy_error = energy_error.max((p.energy(y[0], y[1]) - half.saddle.value).abs());
        samples.push([s, y[0], y[1]]);
    }
    Ok(SpecialOrbit {
        kind: OrbitKind::Homoclinic,
        c: p.c,
        beta: p.beta,
        h: half.saddle.value,
        v_minus: half.saddle.v,
        v_plus: half.saddle.v,
        rate: half.lambda,
        samples,
        residual,
        energy_error,
        metric_exponents: None,
        cone_factor: None,
    })
}

/// Integrates the first-order reduction on the separatrix level through the
/// saddle `v_s`: `v' = -sigma d sqrt(R(d))`, `d = v - v_s`, where
/// `2(V(v_s) - V(v)) = d^2 R(d)`.  With `sigma = 1` the flow is attracted to
/// the saddle, so errors decay instead of growing along the orbit.
pub fn separatrix_flow(
    p: &PotentialSpec,
    v_s: f64,
    v0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<crate::integrate::Trajectory<1>> {
    if p.d1(v_s).abs() > 1e-10 {
        return Err(Error::WrongLevel(format!("v = {v_s} is not a critical point")));
    }
    let (d2, d3, d4) = (p.d2(v_s), p.d3(v_s), p.d4());
    let f = move |_t: f64, y: &[f64; 1]| {
        let d = y[0] - v_s;
        let r = -(d2 + d3 * d / 3.0 + d4 * d * d / 12.0);
        [-d * r.max(0.0).sqrt()]
    };
    integrate(&f, 0.0, [v0], t_end, cfg, &[])
}

/// `(v, V(v))` on `n` evenly spaced points of `[lo, hi]`.
pub fn potential_graph(p: &PotentialSpec, lo: f64, hi: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            [v, p.value(v)]
        })
        .collect()
}
