//! Shooting from the pole in the one-parameter family `u''(0) = -(1 - eps)`.
//!
//! Each `eps` gives a trajectory of the third-order system starting at
//! `(0, 1 - eps, 0)`.  Along it `K(t) = K(0) exp(-4 int x)` and
//! `Q' = -(32/3)(1 + beta) K`, so `Q` is monotone whenever `K > 0` and a
//! trajectory that stays bounded settles on the invariant disc with a limit
//! value `Lambda` of `Q`.  The supremum `eps_bar` of the initial interval of
//! such `eps` is where the limiting disc orbit degenerates to the saddle
//! `(1, 0, 0)`, which is the second radial critical metric.

use serde::{Deserialize, Serialize};

use crate::disc::{disc_c, disc_range};
use crate::error::{Error, Result};
use crate::integrate::{
    integrate, Action, Direction, EventSpec, IntegratorConfig, Termination, Trajectory,
};
use crate::linear::{eigen3, integrate_phi, jacobian_at, linearized_phi};
use crate::model::{euler_rhs_u, invariant_k, invariant_q, Coefficients, CylState, Radial, State3};
use crate::quad::GaussLegendre;

pub const SADDLE: State3 = State3::new(1.0, 0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub integrator: IntegratorConfig,
    pub t_max: f64,
    /// How many times `t_max` may be doubled before a run is undecided.
    pub max_doublings: u32,
    pub k_tol: f64,
    pub q_tol: f64,
    /// Trailing fraction of the run over which `Q` must have settled.
    pub window: f64,
    /// `x` above this is a blowup.
    pub x_blowup: f64,
    /// Runs that come this close to the saddle with `|K| < k_tol` have
    /// converged to it.
    pub capture_radius: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            t_max: 200.0,
            max_doublings: 4,
            k_tol: 1e-6,
            q_tol: 1e-5,
            window: 0.2,
            x_blowup: 3.0,
            capture_radius: 1e-5,
        }
    }
}

/// Initial point `(0, 1 - eps, 0)` and the `u(0)` forced by the first
/// integral.
pub fn initial_state(c: &Coefficients, eps: f64) -> Result<(State3, f64)> {
    let b = c.beta;
    let y0 = 1.0 - eps;
    let arg = ((2.0 * b + 0.5) - 0.5 * (1.0 + b) * y0 * y0) / (1.5 * b);
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::NoRealU0(eps));
    }
    Ok((State3::new(0.0, y0, 0.0), 0.25 * arg.ln()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Limit {
    /// A disc orbit with this parameter `C`.
    Disc { c: f64 },
    /// The saddle `(1, 0, 0)` itself.
    Saddle,
    /// Settled, but not on the disc.
    OffDisc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Convergent { lambda: f64, decay_rate: Option<f64>, limit: Limit },
    Blowup { t: f64, reason: String },
    Undecided { t_max: f64 },
}

impl Verdict {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            Verdict::Convergent { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }
}

/// Slack on the disc's `Q` range when deciding membership.
pub const MEMBER_MARGIN: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootOutcome {
    pub eps: f64,
    pub u0: f64,
    pub verdict: Verdict,
    pub k_final: f64,
    pub q_final: f64,
    pub sup_norm: f64,
    pub t_end: f64,
    pub t_max: f64,
    /// Closest approach to the saddle, as `(t, distance)`.
    pub closest_saddle: (f64, f64),
    /// `4 <x>` over the range used for `decay_rate`.
    pub predicted_rate: Option<f64>,
}

impl ShootOutcome {
    /// Whether `eps` belongs to the set of parameters whose trajectory
    /// settles on the disc, saddle included.
    pub fn is_member(&self, c: &Coefficients) -> bool {
        match &self.verdict {
            Verdict::Convergent { lambda, limit, .. } => {
                let Ok(range) = disc_range(c) else {
                    return !matches!(limit, Limit::OffDisc);
                };
                *lambda >= range.q_min - MEMBER_MARGIN && *lambda <= range.q_max + MEMBER_MARGIN
            }
            _ => false,
        }
    }
}

fn shooting_events(c: &Coefficients, cfg: &ShootConfig) -> Vec<EventSpec<3>> {
    let cc = *c;
    let (r, k_tol) = (cfg.capture_radius, cfg.k_tol);
    vec![
        EventSpec::threshold("x-blowup", 0, cfg.x_blowup, Direction::Rising, Action::Blowup),
        EventSpec::new("saddle", Direction::Falling, Action::Stop, move |_, y| {
            let s = State3::from_array(*y);
            (s.dist(SADDLE) - r).max(invariant_k(&cc, s).abs() - k_tol)
        }),
    ]
}

/// Integrates the shooting trajectory for `eps` up to `t_end`.
pub fn shoot(c: &Coefficients, eps: f64, t_end: f64, cfg: &ShootConfig) -> Result<Trajectory<3>> {
    let (x0, _) = initial_state(c, eps)?;
    let radial = Radial::new(*c);
    let f = move |_t: f64, y: &[f64; 3]| radial.eval(y);
    let mut tr = integrate(&f, 0.0, x0.to_array(), t_end, &cfg.integrator, &shooting_events(c, cfg))?;
    let cc = *c;
    tr.attach_invariants(&["K", "Q"], move |_, y| {
        let s = State3::from_array(*y);
        vec![invariant_k(&cc, s), invariant_q(&cc, s)]
    });
    Ok(tr)
}

pub fn classify_trajectory(c: &Coefficients, eps: f64, cfg: &ShootConfig) -> Result<ShootOutcome> {
    let (_, u0) = initial_state(c, eps)?;
    let mut t_max = cfg.t_max;
    for attempt in 0..=cfg.max_doublings {
        let tr = shoot(c, eps, t_max, cfg)?;
        let inv = tr.invariants.as_ref().expect("attached by shoot");
        let (k_final, q_final) = {
            let r = inv.rows.last().expect("nonempty");
            (r[0], r[1])
        };
        let sup_norm = tr.states.iter().map(|y| State3::from_array(*y).norm()).fold(0.0, f64::max);
        let closest = tr
            .times
            .iter()
            .zip(&tr.states)
            .map(|(t, y)| (*t, State3::from_array(*y).dist(SADDLE)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let (decay_rate, predicted_rate) = decay_fit(&tr, inv.rows.as_slice());
        let base = |verdict| ShootOutcome {
            eps,
            u0,
            verdict,
            k_final,
            q_final,
            sup_norm,
            t_end: tr.t_end(),
            t_max,
            closest_saddle: closest,
            predicted_rate,
        };
        match &tr.termination {
            Termination::Blowup { t, reason } => {
                return Ok(base(Verdict::Blowup { t: *t, reason: reason.clone() }))
            }
            Termination::StepFailure { t, .. } => {
                return Ok(base(Verdict::Blowup { t: *t, reason: "step size collapse".into() }))
            }
            Termination::Event { name, .. } if name == "saddle" => {
                return Ok(base(Verdict::Convergent {
                    lambda: q_final,
                    decay_rate,
                    limit: Limit::Saddle,
                }))
            }
            _ => {}
        }
        let t0 = tr.t_end() * (1.0 - cfg.window);
        let (qmin, qmax, qsum, n) = tr
            .times
            .iter()
            .zip(&inv.rows)
            .filter(|(t, _)| **t >= t0)
            .fold((f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize), |(lo, hi, s, n), (_, r)| {
                (lo.min(r[1]), hi.max(r[1]), s + r[1], n + 1)
            });
        if k_final.abs() < cfg.k_tol && qmax - qmin < cfg.q_tol && n > 0 {
            let lambda = qsum / n as f64;
            let limit = match disc_range(c) {
                Ok(range)
                    if lambda >= range.q_min - MEMBER_MARGIN
                        && lambda <= range.q_max + MEMBER_MARGIN =>
                {
                    Limit::Disc { c: disc_c(c, lambda) }
                }
                _ => Limit::OffDisc,
            };
            return Ok(base(Verdict::Convergent { lambda, decay_rate, limit }));
        }
        if attempt == cfg.max_doublings {
            return Ok(base(Verdict::Undecided { t_max }));
        }
        t_max *= 2.0;
    }
    unreachable!("loop returns on its last attempt")
}

/// Least-squares slope of `-log|K|` against `t` where `|K|` is well above
/// rounding, with the matching `4 <x>`.
fn decay_fit(tr: &Trajectory<3>, rows: &[Vec<f64>]) -> (Option<f64>, Option<f64>) {
    let pts: Vec<(f64, f64, f64)> = tr
        .times
        .iter()
        .zip(rows)
        .zip(&tr.states)
        .filter(|((_, r), _)| r[0].abs() > 1e-8 && r[0].abs() < 1e-2)
        .map(|((t, r), y)| (*t, r[0].abs().ln(), y[0]))
        .collect();
    if pts.len() < 3 {
        return (None, None);
    }
    let n = pts.len() as f64;
    let (st, sl) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mt, ml) = (st / n, sl / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mt) * (p.1 - ml), b + (p.0 - mt).powi(2)));
    if den == 0.0 {
        return (None, None);
    }
    // Trapezoidal mean of x over the same span.
    let mut area = 0.0;
    for w in pts.windows(2) {
        area += 0.5 * (w[0].2 + w[1].2) * (w[1].0 - w[0].0);
    }
    let span = pts.last().expect("nonempty").0 - pts[0].0;
    (Some(-num / den), (span > 0.0).then(|| 4.0 * area / span))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub eps: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsBarReport {
    pub eps_bar: f64,
    /// Last member and first non-member.
    pub bracket: (f64, f64),
    pub tol: f64,
    pub evaluations: usize,
    pub undecided: usize,
    /// `(eps, Lambda)` for every convergent evaluation, sorted by `eps`.
    pub lambda_trace: Vec<LambdaPoint>,
}

/// Number of coarse steps used to find the first non-member before
/// bisecting.
pub const SCAN_STEPS: usize = 100;

/// Locates `eps_bar` in `(lo, hi)`: a coarse scan finds the first
/// non-member, then bisection narrows the gap to `tol`.
pub fn find_eps_bar(
    c: &Coefficients,
    (lo, hi): (f64, f64),
    tol: f64,
    cfg: &ShootConfig,
) -> Result<EpsBarReport> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::BracketInvalid(format!("({lo}, {hi}) with tol {tol}")));
    }
    let mut trace = Vec::new();
    let mut evaluations = 0usize;
    let mut undecided = 0usize;
    let mut member = |eps: f64| -> Result<bool> {
        let o = classify_trajectory(c, eps, cfg)?;
        evaluations += 1;
        if matches!(o.verdict, Verdict::Undecided { .. }) {
            undecided += 1;
        }
        if let Some(lambda) = o.verdict.lambda() {
            trace.push(LambdaPoint { eps, lambda });
        }
        Ok(o.is_member(c))
    };
    if !member(lo)? {
        return Err(Error::BracketInvalid(format!("lower end {lo} is not in the set")));
    }
    if member(hi)? {
        return Err(Error::BracketInvalid(format!("upper end {hi} is in the set")));
    }
    let step = (hi - lo) / SCAN_STEPS as f64;
    let mut a = lo;
    let mut b = hi;
    for k in 1..SCAN_STEPS {
        let e = lo + step * k as f64;
        if member(e)? {
            a = e;
        } else {
            b = e;
            break;
        }
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if member(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    trace.sort_by(|p, q| p.eps.total_cmp(&q.eps));
    Ok(EpsBarReport {
        eps_bar: 0.5 * (a + b),
        bracket: (a, b),
        tol,
        evaluations,
        undecided,
        lambda_trace: trace,
    })
}

/// Samples of a shooting run with the conformal factor reconstructed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub eps: f64,
    pub u0: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// `int_0^t e^{4u}`.
    pub volume: Vec<f64>,
    pub tail: Option<StableTail>,
}

/// Linear completion along the stable directions of the saddle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableTail {
    pub t_link: f64,
    pub dist_link: f64,
    /// Size of the discarded unstable component at the link.
    pub dropped: f64,
    /// Coefficients on the eigenvectors with eigenvalues `-2` and `-4`.
    pub a2: f64,
    pub a3: f64,
}

const GL_NODES: usize = 8;

impl Profile {
    /// Reconstructs `u = u0 - int x` and `int e^{4u}` step by step by
    /// Gauss–Legendre quadrature of the dense output.
    pub fn from_trajectory(eps: f64, u0: f64, tr: &Trajectory<3>) -> Self {
        Self::from_segment(eps, u0, tr, tr.t_end())
    }

    fn from_segment(eps: f64, u0: f64, tr: &Trajectory<3>, t_stop: f64) -> Self {
        let g = GaussLegendre::cached(GL_NODES);
        let mut p = Profile {
            eps,
            u0,
            t: vec![tr.times[0]],
            x: vec![tr.states[0][0]],
            y: vec![tr.states[0][1]],
            z: vec![tr.states[0][2]],
            u: vec![u0],
            volume: vec![0.0],
            tail: None,
        };
        let mut u = u0;
        let mut vol = 0.0;
        for seg in &tr.segments {
            let a = seg.t0;
            if a >= t_stop {
                break;
            }
            let b = seg.t1().min(t_stop);
            let x_int = |lo: f64, hi: f64| g.integrate(lo, hi, |s| seg.eval(s)[0]);
            vol += g.integrate(a, b, |s| (4.0 * (u - x_int(a, s))).exp());
            u -= x_int(a, b);
            let y = seg.eval(b);
            p.t.push(b);
            p.x.push(y[0]);
            p.y.push(y[1]);
            p.z.push(y[2]);
            p.u.push(u);
            p.volume.push(vol);
        }
        p
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("nonempty")
    }

    pub fn total_volume(&self) -> f64 {
        *self.volume.last().expect("nonempty")
    }
}

/// Radius of the ball around the saddle inside which the completion is
/// attached.
pub const LINK_RADIUS: f64 = 0.05;

/// Profile for `eps`: the trajectory up to its first closest approach to the
/// saddle inside [`LINK_RADIUS`], continued on `(t_link, t_max]` by the
/// linearised flow restricted to the stable subspace.  Without such an
/// approach the raw trajectory is returned.
pub fn admissible_profile(c: &Coefficients, eps: f64, cfg: &ShootConfig) -> Result<Profile> {
    let (_, u0) = initial_state(c, eps)?;
    let tr = shoot(c, eps, cfg.t_max, cfg)?;
    let dist = |y: &[f64; 3]| State3::from_array(*y).dist(SADDLE);
    let first_in = tr.states.iter().position(|y| dist(y) < LINK_RADIUS);
    let Some(mut i) = first_in else {
        return Ok(Profile::from_trajectory(eps, u0, &tr));
    };
    while i + 1 < tr.states.len() && dist(&tr.states[i + 1]) < dist(&tr.states[i]) {
        i += 1;
    }
    // Refine the minimum on the dense output around the step.
    let lo = tr.times[i.saturating_sub(1)];
    let hi = tr.times[(i + 1).min(tr.times.len() - 1)];
    let d = |t: f64| dist(&tr.eval(t).expect("inside the run"));
    let t_link = golden_min(lo, hi, d);
    let x_link = State3::from_array(tr.eval(t_link).expect("inside the run"));

    let j = jacobian_at(c, SADDLE)?;
    let eig = eigen3(&j);
    let vecs: Vec<[f64; 3]> = eig
        .vectors
        .iter()
        .map(|v| v.ok_or_else(|| Error::Integration("saddle has complex eigenvalues".into())))
        .collect::<Result<_>>()?;
    let lams: Vec<f64> = eig.values.iter().map(|v| v.re).collect();
    let basis = nalgebra::Matrix3::from_fn(|r, k| vecs[k][r]);
    let delta = nalgebra::Vector3::new(x_link.x - 1.0, x_link.y, x_link.z);
    let coef = basis
        .lu()
        .solve(&delta)
        .ok_or_else(|| Error::Integration("singular eigenbasis".into()))?;
    // Eigenvalues are sorted descending: index 0 is the unstable one.
    let (a1, a2, a3) = (coef[0], coef[1], coef[2]);
    let v1n = (vecs[0][0].powi(2) + vecs[0][1].powi(2) + vecs[0][2].powi(2)).sqrt();

    let mut p = Profile::from_segment(eps, u0, &tr, t_link);
    let g = GaussLegendre::cached(GL_NODES);
    let u_link = *p.u.last().expect("nonempty");
    let mut vol = p.total_volume();
    let (l2, l3) = (lams[1], lams[2]);
    let (v2, v3) = (vecs[1], vecs[2]);
    let state = |tau: f64| {
        let e2 = a2 * (l2 * tau).exp();
        let e3 = a3 * (l3 * tau).exp();
        [1.0 + e2 * v2[0] + e3 * v3[0], e2 * v2[1] + e3 * v3[1], e2 * v2[2] + e3 * v3[2]]
    };
    let u_at = |tau: f64| {
        u_link - tau
            - a2 * v2[0] * ((l2 * tau).exp() - 1.0) / l2
            - a3 * v3[0] * ((l3 * tau).exp() - 1.0) / l3
    };
    let dt = cfg.integrator.max_step;
    let n = ((cfg.t_max - t_link) / dt).ceil().max(1.0) as usize;
    let mut prev = 0.0;
    for k in 1..=n {
        let tau = (cfg.t_max - t_link) * k as f64 / n as f64;
        vol += g.integrate(prev, tau, |s| (4.0 * u_at(s)).exp());
        prev = tau;
        let y = state(tau);
        p.t.push(t_link + tau);
        p.x.push(y[0]);
        p.y.push(y[1]);
        p.z.push(y[2]);
        p.u.push(u_at(tau));
        p.volume.push(vol);
    }
    p.tail = Some(StableTail {
        t_link,
        dist_link: x_link.dist(SADDLE),
        dropped: a1.abs() * v1n,
        a2,
        a3,
    });
    Ok(p)
}

fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 * b.abs().max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub t_end: f64,
    /// `max |x - 1|` over the trailing window.
    pub x_dev: f64,
    /// `max |y|` over the trailing window.
    pub y_dev: f64,
    /// Range of `x` over the trailing window.
    pub x_range: (f64, f64),
    pub volume: f64,
    pub tol: f64,
    /// `x -> 1` over the trailing window.
    pub x_limit_ok: bool,
    /// `y = -u'' -> 0` over the trailing window.
    pub u2_limit_ok: bool,
    pub volume_ok: bool,
    pub admissible: bool,
}

/// Trailing fraction checked for the limits `x -> 1`, `y -> 0`.
pub const ADMISSIBLE_WINDOW: f64 = 0.25;

pub fn admissibility_check(p: &Profile, tol: f64) -> AdmissibilityReport {
    let t0 = p.t_end() * (1.0 - ADMISSIBLE_WINDOW);
    let mut x_dev: f64 = 0.0;
    let mut y_dev: f64 = 0.0;
    let mut x_range = (f64::INFINITY, f64::NEG_INFINITY);
    for k in (0..p.t.len()).filter(|&k| p.t[k] >= t0) {
        x_dev = x_dev.max((p.x[k] - 1.0).abs());
        y_dev = y_dev.max(p.y[k].abs());
        x_range = (x_range.0.min(p.x[k]), x_range.1.max(p.x[k]));
    }
    let volume = p.total_volume();
    let x_limit_ok = x_dev <= tol;
    let u2_limit_ok = y_dev <= tol;
    let volume_ok = (volume - 2.0 / 3.0).abs() <= tol;
    AdmissibilityReport {
        t_end: p.t_end(),
        x_dev,
        y_dev,
        x_range,
        volume,
        tol,
        x_limit_ok,
        u2_limit_ok,
        volume_ok,
        admissible: x_limit_ok && u2_limit_ok && volume_ok,
    }
}

/// The profile pulled back to the sphere: `w = u + log cosh t` as a function
/// of the height `x5 = tanh t`, extended evenly to the southern hemisphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereProfile {
    pub x5: Vec<f64>,
    pub w: Vec<f64>,
    pub volume: f64,
}

pub fn sphere_lift(p: &Profile) -> SphereProfile {
    let lc = |t: f64| {
        let a = t.abs();
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    };
    let north: Vec<(f64, f64)> = p.t.iter().zip(&p.u).map(|(t, u)| (t.tanh(), u + lc(*t))).collect();
    let mut x5 = Vec::with_capacity(2 * north.len());
    let mut w = Vec::with_capacity(2 * north.len());
    for (h, v) in north.iter().rev() {
        x5.push(-h);
        w.push(*v);
    }
    for (h, v) in north.iter().skip(1) {
        x5.push(*h);
        w.push(*v);
    }
    SphereProfile { x5, w, volume: p.total_volume() }
}

/// Pointwise check of the linearised asymptotics near the round metric on
/// `[-log delta, log delta - log(eps)/2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub eps: f64,
    pub delta: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    /// Largest `|x - 1 + 2(e^{-2t} + eps A e^{2t})| / (delta eps A e^{2t})`
    /// and the analogues for `y`, `z`.  With `eps = 0`, the largest
    /// `|X - X_round_asymptotic| e^{4t}` instead.
    pub ratios: [f64; 3],
    pub holds: bool,
    /// Same ratios with the exact round solution `(tanh t, sech^2 t,
    /// -2 sech^2 t tanh t)` in place of its leading asymptotics, so that only
    /// the perturbation is measured.
    pub ratios_vs_round: [f64; 3],
    pub holds_vs_round: bool,
}

pub fn gronwall_check(c: &Coefficients, eps: f64, delta: f64) -> Result<GronwallReport> {
    if !(delta > 0.0 && delta < 1.0) || eps < 0.0 {
        return Err(Error::OutOfRange(format!("eps = {eps}, delta = {delta}")));
    }
    let amp = linearized_phi(c)?.amplitude;
    let t0 = -delta.ln();
    let t1 = if eps > 0.0 { delta.ln() - 0.5 * eps.ln() } else { 8.0 };
    if !(t1 > t0) {
        return Err(Error::OutOfRange(format!("empty window [{t0}, {t1}]")));
    }
    let mut cfg = ShootConfig::default();
    cfg.integrator = IntegratorConfig::tight().with_max_step(0.05);
    let tr = shoot(c, eps, t1, &cfg)?;
    let n = 400;
    let mut ratios = [0.0f64; 3];
    let mut ratios_vs_round = [0.0f64; 3];
    for k in 0..=n {
        let t = t0 + (t1 - t0) * k as f64 / n as f64;
        let Some(y) = tr.eval(t) else { break };
        let em = (-2.0 * t).exp();
        let ep = eps * amp * (2.0 * t).exp();
        let dev = [y[0] - 1.0 + 2.0 * (em + ep), y[1] - 4.0 * (em - ep), y[2] + 8.0 * (em + ep)];
        let scale = if eps > 0.0 { 1.0 / (delta * ep) } else { (4.0 * t).exp() };
        let (th, s2) = (t.tanh(), 1.0 / t.cosh().powi(2));
        let dev0 = [y[0] - th + 2.0 * ep, y[1] - s2 + 4.0 * ep, y[2] + 2.0 * s2 * th + 8.0 * ep];
        for i in 0..3 {
            ratios[i] = ratios[i].max(dev[i].abs() * scale);
            ratios_vs_round[i] = ratios_vs_round[i].max(dev0[i].abs() * scale);
        }
    }
    Ok(GronwallReport {
        eps,
        delta,
        amplitude: amp,
        window: (t0, t1),
        ratios,
        holds: eps > 0.0 && ratios.iter().all(|r| *r <= 1.0),
        ratios_vs_round,
        holds_vs_round: eps > 0.0 && ratios_vs_round.iter().all(|r| *r <= 1.0),
    })
}

/// Entry into and persistence inside
/// `Omega = {0 <= K <= (Q - 64 beta - eta) / B}` along a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub eta: f64,
    pub b: f64,
    pub entry: Option<f64>,
    /// Samples after the entry that fall outside the region.
    pub exits: usize,
}

/// Rounding floor of `K`, a difference of terms of order ten near the
/// saddle.
pub const K_ROUNDING: f64 = 1e-10;

pub fn omega_report(c: &Coefficients, tr: &Trajectory<3>, eta: f64, b: f64) -> OmegaReport {
    let inside = |y: &[f64; 3]| {
        let s = State3::from_array(*y);
        let k = invariant_k(c, s);
        let q = invariant_q(c, s);
        k >= -K_ROUNDING && k <= (q - c.q_saddle() - eta) / b + K_ROUNDING
    };
    let entry = tr.states.iter().position(inside);
    let exits = entry.map_or(0, |i| tr.states[i..].iter().filter(|y| !inside(y)).count());
    OmegaReport { eta, b, entry: entry.map(|i| tr.times[i]), exits }
}

/// Largest difference on `[0, t_end]` between `u` reconstructed from the
/// third-order run and `u` integrated directly from the fourth-order
/// equation.
pub fn cross_check_fourth_order(
    c: &Coefficients,
    eps: f64,
    t_end: f64,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let (x0, u0) = initial_state(c, eps)?;
    let mut cfg = ShootConfig::default();
    cfg.integrator = integrator.clone();
    let tr = shoot(c, eps, t_end, &cfg)?;
    let prof = Profile::from_trajectory(eps, u0, &tr);
    let cc = *c;
    let f = move |t: f64, y: &[f64; 4]| {
        let s = CylState { t, u: y[0], u1: y[1], u2: y[2], u3: y[3] };
        [y[1], y[2], y[3], euler_rhs_u(&cc, &s).unwrap_or(f64::NAN)]
    };
    let mut icfg = integrator.clone();
    icfg.blowup_norm = f64::INFINITY;
    let direct = integrate(&f, 0.0, [u0, -x0.x, -x0.y, -x0.z], prof.t_end(), &icfg, &[])?;
    let mut worst: f64 = 0.0;
    for (t, u) in prof.t.iter().zip(&prof.u) {
        if let Some(d) = direct.eval(*t) {
            worst = worst.max((d[0] - u).abs());
        }
    }
    Ok(worst)
}

/// `phi` from the linearised equation, exposed for reports.
pub fn phi_samples(c: &Coefficients, t_end: f64, n: usize) -> Result<Vec<[f64; 2]>> {
    let tr = integrate_phi(c, t_end, &IntegratorConfig::tight().with_max_step(0.05))?;
    Ok(tr.resample(n).into_iter().map(|(t, y)| [t, y[0]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_u0_round() {
        let (s, u0) = initial_state(&Coefficients::paneitz(), 0.0).unwrap();
        assert_eq!(s, State3::new(0.0, 1.0, 0.0));
        assert!(u0.abs() < 1e-15);
    }

    #[test]
    fn no_real_u0() {
        let c = Coefficients::conformal_laplacian();
        assert!(matches!(initial_state(&c, 3.0), Err(Error::NoRealU0(_))));
    }

    #[test]
    fn golden_section() {
        let t = golden_min(0.0, 3.0, |x| (x - 1.25).powi(2));
        assert!((t - 1.25).abs() < 1e-6);
    }
}
