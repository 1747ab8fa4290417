//! Adaptive explicit integration with dense output and event location.
//!
//! The stepper is the Dormand–Prince 8(5,3) pair with a PI step-size
//! controller.  The state update is accumulated with compensated summation so
//! that long runs near machine tolerance do not drift by rounding alone.  Every
//! accepted step keeps its seventh-order interpolant, which is what events,
//! resampling and quadrature along the trajectory are evaluated on.

mod dop853;
mod tableau;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use dop853::DenseSegment;

use crate::error::{Error, Result};

/// Right-hand side `y' = f(t, y)`.
pub trait VectorField<const N: usize> {
    fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<F, const N: usize> VectorField<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Initial step; chosen automatically when absent.
    pub h_init: Option<f64>,
    /// Termination as blowup once the Euclidean norm exceeds this.
    pub blowup_norm: f64,
    /// Steps below this size are a failure.
    pub min_step: f64,
    pub max_steps: usize,
    pub safety: f64,
    /// Exponent of the previous error in the PI controller.
    pub pi_beta: f64,
    /// Largest factor by which the step may shrink in one go.
    pub max_shrink: f64,
    pub max_grow: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            h_init: None,
            blowup_norm: 1e3,
            min_step: 1e-14,
            max_steps: 2_000_000,
            safety: 0.9,
            pi_beta: 0.04,
            max_shrink: 3.0,
            max_grow: 6.0,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_blowup_norm(mut self, norm: f64) -> Self {
        self.blowup_norm = norm;
        self
    }

    /// Tightest setting that is still meaningful in double precision.
    pub fn tight() -> Self {
        Self::default().with_tol(1e-13, 1e-15)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

/// What happens when an event is located.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Record,
    Stop,
    /// Stop and report the run as a blowup.
    Blowup,
}

type EventFn<const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + Send + Sync>;

/// Sign change of a scalar function of the state.
pub struct EventSpec<const N: usize> {
    pub name: String,
    pub direction: Direction,
    pub action: Action,
    g: EventFn<N>,
}

impl<const N: usize> EventSpec<N> {
    pub fn new(
        name: impl Into<String>,
        direction: Direction,
        action: Action,
        g: impl Fn(f64, &[f64; N]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), direction, action, g: Box::new(g) }
    }

    /// Component `i` crossing `level`.
    pub fn threshold(
        name: impl Into<String>,
        i: usize,
        level: f64,
        direction: Direction,
        action: Action,
    ) -> Self {
        Self::new(name, direction, action, move |_, y| y[i] - level)
    }

    pub fn zero_crossing(name: impl Into<String>, i: usize, direction: Direction) -> Self {
        Self::threshold(name, i, 0.0, direction, Action::Record)
    }

    /// Entry into the set where every function is non-positive.
    pub fn window(
        name: impl Into<String>,
        action: Action,
        parts: Vec<Box<dyn Fn(&[f64; N]) -> f64 + Send + Sync>>,
    ) -> Self {
        Self::new(name, Direction::Falling, action, move |_, y| {
            parts.iter().map(|p| p(y)).fold(f64::NEG_INFINITY, f64::max)
        })
    }

    pub fn value(&self, t: f64, y: &[f64; N]) -> f64 {
        (self.g)(t, y)
    }

    fn fires(&self, g0: f64, g1: f64) -> bool {
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Either => rising || falling,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub name: String,
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    Blowup { t: f64, reason: String },
    Event { t: f64, name: String },
    StepFailure { t: f64, h: f64 },
    MaxSteps { t: f64 },
}

impl Termination {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Termination::Blowup { .. })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// Named scalar quantities sampled at accepted steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub segments: Vec<DenseSegment<N>>,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    pub stats: Stats,
    pub invariants: Option<InvariantTable>,
}

impl<const N: usize> Trajectory<N> {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least its initial point")
    }

    pub fn last(&self) -> [f64; N] {
        *self.states.last().expect("trajectory holds at least its initial point")
    }

    /// Dense-output value at `t`, or `None` outside the integrated range.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if self.segments.is_empty() {
            return (t == self.times[0]).then_some(self.states[0]);
        }
        let forward = self.segments[0].h > 0.0;
        let idx = self.segments.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        let seg = self.segments.get(idx)?;
        seg.contains(t).then(|| seg.eval(t))
    }

    /// Values at `n` evenly spaced times spanning the trajectory.
    pub fn resample(&self, n: usize) -> Vec<(f64, [f64; N])> {
        let (a, b) = (self.t_start(), self.t_end());
        (0..n)
            .map(|i| {
                let t = if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
                let t = if i + 1 == n { b } else { t };
                (t, self.eval(t).unwrap_or_else(|| self.last()))
            })
            .collect()
    }

    pub fn events_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.events.iter().filter(move |e| e.name == name)
    }

    /// Attaches invariant samples computed at every stored point.
    pub fn attach_invariants<F>(&mut self, names: &[&str], f: F)
    where
        F: Fn(f64, &[f64; N]) -> Vec<f64>,
    {
        let rows = self.times.iter().zip(&self.states).map(|(t, y)| f(*t, y)).collect();
        self.invariants =
            Some(InvariantTable { names: names.iter().map(|s| s.to_string()).collect(), rows });
    }

    /// Writes `t`, the state components and any invariants as CSV with
    /// seventeen significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, state_names: &[&str]) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        for i in 0..N {
            header.push(state_names.get(i).map_or_else(|| format!("y{i}"), |s| s.to_string()));
        }
        if let Some(inv) = &self.invariants {
            header.extend(inv.names.iter().cloned());
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, (t, y)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![fmt17(*t)];
            row.extend(y.iter().map(|v| fmt17(*v)));
            if let Some(inv) = &self.invariants {
                row.extend(inv.rows[k].iter().map(|v| fmt17(*v)));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            t_start: self.t_start(),
            t_end: self.t_end(),
            points: self.times.len(),
            termination: self.termination.clone(),
            stats: self.stats,
            events: self.events.clone(),
        }
    }
}

/// Serializable description of a run without the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    pub termination: Termination,
    pub stats: Stats,
    pub events: Vec<EventRecord>,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn norm<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn initial_step<F: VectorField<N>, const N: usize>(
    f: &F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * (dny / dnf).sqrt() };
    h = h.min(cfg.max_step);
    let mut y1 = *y;
    for i in 0..N {
        y1[i] += dir * h * f0[i];
    }
    let f1 = f.eval(t + dir * h, &y1);
    let mut der2 = 0.0;
    for i in 0..N {
        let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 || !der12.is_finite() {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    (100.0 * h).min(h1).min(cfg.max_step)
}

fn locate<const N: usize>(ev: &EventSpec<N>, seg: &DenseSegment<N>, g0: f64, g1: f64) -> f64 {
    let (mut a, mut b) = (seg.t0, seg.t1());
    let (mut ga, mut gb) = (g0, g1);
    let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut side = 0i32;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        // Illinois false position, falling back to bisection when stalled.
        let mut m = if ga != gb { (a * gb - b * ga) / (gb - ga) } else { 0.5 * (a + b) };
        let lo = a.min(b);
        let hi = a.max(b);
        if !(m > lo && m < hi) {
            m = 0.5 * (a + b);
        }
        let gm = ev.value(m, &seg.eval(m));
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (gb > 0.0) {
            b = m;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = m;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    // The crossing lies in [a, b]; report the end that is past it.
    b
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` to `t_end`.
///
/// Events are checked on every accepted step and located on the dense output
/// to `1e-12 max(1, |t|)`.  Nonfinite stage values cause a step rejection,
/// and a step size below `cfg.min_step` ends the run with
/// [`Termination::StepFailure`].
pub fn integrate<F: VectorField<N>, const N: usize>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    events: &[EventSpec<N>],
) -> Result<Trajectory<N>> {
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol >= 0.0 && cfg.max_step > 0.0) {
        return Err(Error::Integration("tolerances and max_step must be positive".into()));
    }
    if !all_finite(&y0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Integration("non-finite initial data".into()));
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0],
        segments: Vec::new(),
        events: Vec::new(),
        termination: Termination::Completed,
        stats: Stats::default(),
        invariants: None,
    };
    if t_end == t0 {
        return Ok(traj);
    }

    let mut t = t0;
    let mut y = y0;
    let mut comp = [0.0; N];
    let mut k1 = f.eval(t, &y);
    traj.stats.evals += 1;
    if !all_finite(&k1) {
        return Err(Error::Integration("field is not finite at the initial point".into()));
    }
    let mut h = match cfg.h_init {
        Some(h) => h.abs().min(cfg.max_step),
        None => {
            traj.stats.evals += 1;
            initial_step(f, t, &y, &k1, dir, cfg)
        }
    };
    let mut g_prev: Vec<f64> = events.iter().map(|e| e.value(t, &y)).collect();
    let expo1 = 1.0 / 8.0 - cfg.pi_beta * 0.2;
    let mut facold = 1e-4_f64;
    let mut last_rejected = false;
    let tiny = f64::EPSILON * 8.0;

    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= tiny * t.abs().max(1.0) {
            break;
        }
        if traj.stats.accepted + traj.stats.rejected >= cfg.max_steps {
            traj.termination = Termination::MaxSteps { t };
            break;
        }
        h = h.min(cfg.max_step);
        let mut hs = h;
        let last = hs >= remaining;
        if last {
            hs = remaining;
        } else if hs < cfg.min_step.max(tiny * t.abs()) {
            traj.termination = Termination::StepFailure { t, h: hs };
            break;
        }
        let hd = dir * hs;
        let att = dop853::attempt(f, t, &y, &k1, hd, cfg.rel_tol, cfg.abs_tol);
        traj.stats.evals += 11;

        if !att.err.is_finite() || !all_finite(&att.y_new) {
            traj.stats.rejected += 1;
            last_rejected = true;
            h = hs * 0.25;
            continue;
        }

        let fac11 = att.err.powf(expo1);
        let fac = fac11 / facold.powf(cfg.pi_beta);
        let fac = (1.0 / cfg.max_grow).max(cfg.max_shrink.min(fac / cfg.safety));
        let mut h_new = hs / fac;

        if att.err > 1.0 {
            traj.stats.rejected += 1;
            last_rejected = true;
            h = hs / cfg.max_shrink.min(fac11 / cfg.safety);
            continue;
        }

        facold = att.err.max(1e-4);
        let t_new = if last { t_end } else { t + hd };
        let mut y_new = y;
        for i in 0..N {
            let adj = att.increment[i] + comp[i];
            let s = y_new[i] + adj;
            comp[i] = adj - (s - y_new[i]);
            y_new[i] = s;
        }
        let k13 = f.eval(t_new, &y_new);
        traj.stats.evals += 1;
        if !all_finite(&k13) {
            traj.stats.rejected += 1;
            last_rejected = true;
            h = hs * 0.25;
            continue;
        }
        let seg = dop853::dense(f, t, &y, hd, &att, &k13);
        traj.stats.evals += 3;
        traj.stats.accepted += 1;
        if last_rejected {
            h_new = h_new.min(hs);
        }
        last_rejected = false;

        // Events inside the step, earliest first.
        let g_new: Vec<f64> = events.iter().map(|e| e.value(t_new, &y_new)).collect();
        let mut fired: Vec<(f64, usize)> = Vec::new();
        for (j, ev) in events.iter().enumerate() {
            if ev.fires(g_prev[j], g_new[j]) {
                fired.push((locate(ev, &seg, g_prev[j], g_new[j]), j));
            }
        }
        fired.sort_by(|a, b| ((a.0 - t) * dir).total_cmp(&((b.0 - t) * dir)));
        let mut stop: Option<(f64, usize)> = None;
        for &(te, j) in &fired {
            let state = seg.eval(te);
            traj.events.push(EventRecord { name: events[j].name.clone(), t: te, state: state.to_vec() });
            if events[j].action != Action::Record {
                stop = Some((te, j));
                break;
            }
        }

        traj.segments.push(seg);
        if let Some((te, j)) = stop {
            let ye = traj.segments.last().expect("segment just pushed").eval(te);
            traj.times.push(te);
            traj.states.push(ye);
            traj.termination = match events[j].action {
                Action::Blowup => Termination::Blowup { t: te, reason: events[j].name.clone() },
                _ => Termination::Event { t: te, name: events[j].name.clone() },
            };
            // Truncate the last interpolant so that `eval` stops at the event.
            traj.segments.last_mut().expect("segment just pushed").set_end(te);
            return Ok(traj);
        }

        traj.times.push(t_new);
        traj.states.push(y_new);
        t = t_new;
        y = y_new;
        k1 = k13;
        g_prev = g_new;
        h = h_new;

        if norm(&y) > cfg.blowup_norm {
            traj.termination = Termination::Blowup { t, reason: "norm".into() };
            break;
        }
        if last {
            break;
        }
    }
    Ok(traj)
}
