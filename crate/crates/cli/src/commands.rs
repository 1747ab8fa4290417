//! One function per subcommand.  Each writes its files through `Ctx::out`
//! and records every resolved setting in `Ctx::params`.

use critdet_core::bubble::{bubble_run, slope_fit, Bubble, EPS_GRID};
use critdet_core::disc::{disc_chart, disc_range};
use critdet_core::hamiltonian::{
    case_classify, delaunay_family, orbit_summary, potential_graph, special_orbit, OrbitKind,
};
use critdet_core::integrate::{integrate, IntegratorConfig, Trajectory};
use critdet_core::linear::{integrate_phi, linearized_phi_with, spectral_report, stationary_points};
use critdet_core::model::{invariant_k, invariant_q, Coefficients, PotentialSpec, State3};
use critdet_core::shooting::{
    admissibility_check, admissible_profile, classify_trajectory, find_eps_bar, gronwall_check,
    omega_report, shoot, sphere_lift, Profile, ShootConfig, Verdict,
};
use critdet_core::verify::{chain_residuals, ChainResiduals};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::failure::{bad_args, Failure};
use crate::output::OutputDir;
use crate::settings::{integrator, parse_list, parse_pair, Settings};

pub struct Ctx<'a> {
    pub global: &'a Global,
    pub settings: &'a Settings,
    pub coeffs: Coefficients,
    pub out: OutputDir,
    pub params: Map<String, Value>,
}

pub struct Outcome {
    pub summary: String,
    /// Set when a verification step did not pass.
    pub failed: Option<String>,
}

impl Outcome {
    fn ok(summary: impl Into<String>) -> Self {
        Self { summary: summary.into(), failed: None }
    }
}

type Res = Result<Outcome, Failure>;

impl Ctx<'_> {
    fn record<T: Serialize>(&mut self, key: &str, v: &T) {
        self.params.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn pick<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, Failure>
    where
        T: std::str::FromStr + Serialize,
        T::Err: std::fmt::Display,
    {
        let v = self.settings.pick(key, flag, default)?;
        self.record(key, &v);
        Ok(v)
    }

    fn flag(&mut self, key: &str, flag: bool) -> Result<bool, Failure> {
        let v = self.settings.flag(key, flag)?;
        self.record(key, &v);
        Ok(v)
    }

    fn integrator(&mut self, base: IntegratorConfig) -> Result<IntegratorConfig, Failure> {
        let cfg = integrator(self.global, self.settings, base)?;
        self.record("integrator", &cfg);
        Ok(cfg)
    }

    fn shoot_config(&mut self, t_max: Option<f64>) -> Result<ShootConfig, Failure> {
        let mut cfg = ShootConfig::default();
        cfg.integrator = integrator(self.global, self.settings, cfg.integrator)?;
        let s = self.settings;
        cfg.t_max = s.pick("t-max", t_max, cfg.t_max)?;
        cfg.max_doublings = s.pick("max-doublings", None, cfg.max_doublings)?;
        cfg.k_tol = s.pick("k-tol", None, cfg.k_tol)?;
        cfg.q_tol = s.pick("q-tol", None, cfg.q_tol)?;
        cfg.window = s.pick("window", None, cfg.window)?;
        cfg.x_blowup = s.pick("x-blowup", None, cfg.x_blowup)?;
        cfg.capture_radius = s.pick("capture-radius", None, cfg.capture_radius)?;
        if !(cfg.t_max > 0.0) {
            return Err(bad_args("t-max must be positive"));
        }
        self.record("shoot", &cfg);
        Ok(cfg)
    }
}

pub fn run(ctx: &mut Ctx, cmd: &Command) -> Res {
    match cmd {
        Command::Delaunay(a) => delaunay(ctx, a),
        Command::Orbit(a) => orbit(ctx, a),
        Command::ClassifyPotential(a) => classify(ctx, a),
        Command::Disc(a) => disc(ctx, a),
        Command::Stationary => stationary(ctx),
        Command::Linearize(a) => linearize(ctx, a),
        Command::Shoot(a) => shoot_cmd(ctx, a),
        Command::EpsBar(a) => eps_bar(ctx, a),
        Command::Bubble(a) => bubble(ctx, a),
        Command::VerifyInvariants(a) => verify(ctx, a),
        Command::ExploreBeta(a) => explore(ctx, a),
        Command::Replay(_) => unreachable!("replay is dispatched by main"),
    }
}

fn newton_orbit(
    p: &PotentialSpec,
    v0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<2>, Failure> {
    let pp = *p;
    let f = move |_t: f64, s: &[f64; 2]| pp.newton_rhs(s);
    let mut tr = integrate(&f, 0.0, [v0, 0.0], t_end, cfg, &[])?;
    tr.attach_invariants(&["energy"], |_, s| vec![pp.energy(s[0], s[1])]);
    Ok(tr)
}

fn csv_of<const N: usize>(tr: &Trajectory<N>, names: &[&str]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    tr.write_csv(&mut buf, names)?;
    Ok(buf)
}

fn with_k_q(c: &Coefficients, tr: &mut Trajectory<3>) {
    let cc = *c;
    tr.attach_invariants(&["K", "Q"], |_, y| {
        let s = State3::from_array(*y);
        vec![invariant_k(&cc, s), invariant_q(&cc, s)]
    });
}

fn delaunay(ctx: &mut Ctx, a: &DelaunayArgs) -> Res {
    let alphas = match ctx.settings.pick_opt::<String>("alphas", a.alphas.clone())? {
        Some(list) => parse_list(&list, "alphas")?,
        None => {
            let n = ctx.pick("n", a.n, 10usize)?;
            (0..n).map(|k| k as f64 / n as f64).collect()
        }
    };
    ctx.record("alphas", &alphas);
    let orbits = ctx.flag("orbits", a.orbits)?;
    let cfg = ctx.integrator(IntegratorConfig::default())?;
    let mut family = Vec::new();
    for &alpha in &alphas {
        family.push(delaunay_family(&ctx.coeffs, alpha)?);
    }
    let rows: Vec<[f64; 5]> =
        family.iter().map(|o| [o.alpha, o.h, o.amplitude, o.period, o.bound_constant]).collect();
    ctx.out.csv("family.csv", &["alpha", "h", "amplitude", "period", "bound_constant"], &rows)?;
    ctx.out.json("family.json", &family)?;
    if orbits {
        let p = PotentialSpec::with_coeffs(0.0, &ctx.coeffs);
        for (i, o) in family.iter().enumerate() {
            if o.kind != OrbitKind::Periodic {
                continue;
            }
            let tr = newton_orbit(&p, o.amplitude, o.period, &cfg)?;
            ctx.out.write(&format!("orbit_{i:03}.csv"), &csv_of(&tr, &["v", "w"])?)?;
        }
    }
    Ok(Outcome::ok(format!("{} family members", family.len())))
}

/// `C` values whose potentials are plotted: the symmetric case, one
/// asymmetric well, the threshold, and the disc range when it exists.
fn figure_panels(c: &Coefficients) -> Vec<f64> {
    let thr = critdet_core::hamiltonian::case_threshold(c.beta);
    let mut out = vec![0.0];
    if thr.is_finite() && thr > 0.0 {
        out.extend([0.5 * thr, thr]);
    }
    if let Ok(r) = disc_range(c) {
        out.extend([r.c_lo, 0.5 * (r.c_lo + r.c_hi), r.c_hi]);
    }
    out
}

fn orbit(ctx: &mut Ctx, a: &OrbitArgs) -> Res {
    let c = ctx.pick("c", a.c, 0.0)?;
    let h = ctx.settings.pick_opt("h", a.h)?;
    ctx.record("h", &h);
    let special = ctx.flag("special", a.special)?;
    let figure = ctx.flag("figure", a.figure)?;
    let samples = ctx.pick("samples", a.samples, 401usize)?;
    let cfg = ctx.integrator(IntegratorConfig::default())?;
    let p = PotentialSpec::with_coeffs(c, &ctx.coeffs);
    let mut notes = Vec::new();

    if let Some(h) = h {
        let s = orbit_summary(&p, h)?;
        ctx.out.json("summary.json", &s)?;
        if s.kind == OrbitKind::Periodic {
            let tr = newton_orbit(&p, s.v_lo, s.period, &cfg)?;
            ctx.out.write("orbit.csv", &csv_of(&tr, &["v", "w"])?)?;
        }
        notes.push(format!("{:?} orbit, period {:.12}", s.kind, s.period));
    }
    if special {
        let mut s = special_orbit(&p)?;
        ctx.out.csv("special.csv", &["t", "v", "w"], &s.samples)?;
        s.samples.clear();
        ctx.out.json("special.json", &s)?;
        notes.push(format!("{:?} orbit {} -> {}", s.kind, s.v_minus, s.v_plus));
    }
    if figure {
        let mut rows = Vec::new();
        for (k, cc) in figure_panels(&ctx.coeffs).into_iter().enumerate() {
            let q = PotentialSpec::with_coeffs(cc, &ctx.coeffs);
            for [v, val] in potential_graph(&q, -2.5, 2.5, samples) {
                rows.push([k as f64, cc, v, val]);
            }
        }
        ctx.out.csv("potential.csv", &["panel", "c", "v", "value"], &rows)?;
        notes.push("potential graphs".into());
    }
    if notes.is_empty() {
        return Err(bad_args("orbit: give --h, --special or --figure"));
    }
    Ok(Outcome::ok(notes.join("; ")))
}

fn classify(ctx: &mut Ctx, a: &ClassifyArgs) -> Res {
    let list = ctx.pick("c", a.c.clone(), "0".to_string())?;
    let mut reports = Vec::new();
    for c in parse_list(&list, "c")? {
        let r = case_classify(&PotentialSpec::with_coeffs(c, &ctx.coeffs));
        reports.push(json!({ "c": c, "report": r }));
    }
    ctx.out.json("cases.json", &reports)?;
    let cases: Vec<String> = reports.iter().map(|r| r["report"]["case"].to_string()).collect();
    Ok(Outcome::ok(cases.join(", ")))
}

fn disc(ctx: &mut Ctx, a: &DiscArgs) -> Res {
    let n = ctx.pick("grid", a.grid, 9usize)?;
    let chart = disc_chart(&ctx.coeffs, n)?;
    let mut poly = Vec::new();
    let mut meta = Vec::new();
    for (i, o) in chart.orbits.iter().enumerate() {
        let rows: Vec<[f64; 6]> = o
            .times
            .iter()
            .zip(&o.states)
            .map(|(t, s)| [*t, s.x, s.y, s.z, invariant_k(&ctx.coeffs, *s), invariant_q(&ctx.coeffs, *s)])
            .collect();
        ctx.out.csv(&format!("orbit_{i:03}.csv"), &["t", "x", "y", "z", "K", "Q"], &rows)?;
        poly.extend(rows.iter().map(|r| [i as f64, r[1], r[2], r[3]]));
        meta.push(json!({
            "file": format!("orbit_{i:03}.csv"),
            "c": o.c,
            "kind": o.kind,
            "period": o.period,
            "residuals": o.residuals,
        }));
    }
    ctx.out.csv("polyline.csv", &["orbit", "x", "y", "z"], &poly)?;
    ctx.out.json("chart.json", &json!({ "range": chart.range, "nested": chart.nested, "orbits": meta }))?;
    Ok(Outcome::ok(format!(
        "{} orbits, C in [{:.12}, {:.12}], nested = {}",
        chart.orbits.len(),
        chart.range.c_lo,
        chart.range.c_hi,
        chart.nested
    )))
}

fn stationary(ctx: &mut Ctx) -> Res {
    let mut reports = Vec::new();
    for p in stationary_points(&ctx.coeffs) {
        reports.push(spectral_report(&ctx.coeffs, p)?);
    }
    ctx.out.json("stationary.json", &reports)?;
    let kinds: Vec<String> =
        reports.iter().map(|r| format!("({:.6}, 0, 0) {:?}", r.point.x, r.eigen.kind)).collect();
    Ok(Outcome::ok(kinds.join("; ")))
}

fn linearize(ctx: &mut Ctx, a: &LinearizeArgs) -> Res {
    let t_end = ctx.pick("t-end", a.t_end, 15.0)?;
    let n = ctx.pick("samples", a.samples, 301usize)?;
    let cfg = ctx.integrator(IntegratorConfig::tight().with_max_step(0.05))?;
    let rep = linearized_phi_with(&ctx.coeffs, &cfg)?;
    ctx.out.json("phi.json", &rep)?;
    if !(t_end > 0.0) || n < 2 {
        return Err(bad_args("linearize: need t-end > 0 and at least two samples"));
    }
    let tr = integrate_phi(&ctx.coeffs, t_end, &cfg)?;
    if tr.t_end() < t_end {
        return Err(Failure::from(critdet_core::Error::Integration(format!(
            "phi run stopped at t = {}",
            tr.t_end()
        ))));
    }
    let rows = tr.resample(n).into_iter().map(|(t, y)| [t, y[0]]);
    ctx.out.csv("phi.csv", &["t", "phi"], rows)?;
    Ok(Outcome::ok(format!("A = {:.12}, phi(0) = {:.12}", rep.amplitude, rep.phi0)))
}

fn write_profile(ctx: &mut Ctx, name: &str, p: &Profile) -> Result<(), Failure> {
    let rows = (0..p.t.len()).map(|k| [p.t[k], p.x[k], p.y[k], p.z[k], p.u[k], p.volume[k]]);
    ctx.out.csv(name, &["t", "x", "y", "z", "u", "volume"], rows)
}

fn shoot_cmd(ctx: &mut Ctx, a: &ShootArgs) -> Res {
    let eps = ctx.pick("eps", a.eps, 0.01)?;
    let cfg = ctx.shoot_config(a.t_max)?;
    let omega = ctx.flag("omega", a.omega)?;
    let delta = ctx.settings.pick_opt("gronwall-delta", a.gronwall_delta)?;
    ctx.record("gronwall-delta", &delta);

    let outcome = classify_trajectory(&ctx.coeffs, eps, &cfg)?;
    let member = outcome.is_member(&ctx.coeffs);
    ctx.out.json("outcome.json", &json!({ "outcome": outcome, "member": member }))?;
    let mut tr = shoot(&ctx.coeffs, eps, outcome.t_end, &cfg)?;
    with_k_q(&ctx.coeffs, &mut tr);
    ctx.out.write("trajectory.csv", &csv_of(&tr, &["x", "y", "z"])?)?;
    if let Verdict::Convergent { .. } = outcome.verdict {
        let mut pcfg = cfg.clone();
        pcfg.t_max = outcome.t_max;
        let prof = admissible_profile(&ctx.coeffs, eps, &pcfg)?;
        write_profile(ctx, "profile.csv", &prof)?;
        ctx.out.json("admissibility.json", &admissibility_check(&prof, 1e-3))?;
    }
    if omega {
        ctx.out.json("omega.json", &omega_report(&ctx.coeffs, &tr, 0.1, 100.0))?;
    }
    if let Some(d) = delta {
        ctx.out.json("gronwall.json", &gronwall_check(&ctx.coeffs, eps, d)?)?;
    }
    let verdict = match &outcome.verdict {
        Verdict::Convergent { lambda, .. } => format!("convergent, Lambda = {lambda:.10}"),
        Verdict::Blowup { t, reason } => format!("blowup at t = {t:.6} ({reason})"),
        Verdict::Undecided { t_max } => format!("undecided at t = {t_max}"),
    };
    Ok(Outcome::ok(format!("eps = {eps}: {verdict}; member = {member}")))
}

fn eps_bar_run(ctx: &mut Ctx, bracket: (f64, f64), tol: f64, cfg: &ShootConfig) -> Result<String, Failure> {
    let rep = find_eps_bar(&ctx.coeffs, bracket, tol, cfg)?;
    let trace: Vec<[f64; 2]> = rep.lambda_trace.iter().map(|p| [p.eps, p.lambda]).collect();
    ctx.out.csv("lambda_trace.csv", &["eps", "lambda"], &trace)?;
    let mut head = rep.clone();
    head.lambda_trace.clear();
    ctx.out.json("eps_bar.json", &head)?;

    let eps = rep.bracket.0;
    let prof = admissible_profile(&ctx.coeffs, eps, cfg)?;
    let adm = admissibility_check(&prof, 1e-3);
    write_profile(ctx, "profile.csv", &prof)?;
    let sphere = sphere_lift(&prof);
    ctx.out.csv("sphere.csv", &["x5", "w"], sphere.x5.iter().zip(&sphere.w).map(|(a, b)| [*a, *b]))?;
    ctx.out.json("admissibility.json", &json!({ "eps": eps, "tail": prof.tail, "report": adm }))?;
    Ok(format!(
        "eps_bar = {:.12} ({} runs); profile at {:.12} admissible = {}",
        rep.eps_bar, rep.evaluations, eps, adm.admissible
    ))
}

fn eps_bar(ctx: &mut Ctx, a: &EpsBarArgs) -> Res {
    let bracket = parse_pair(&ctx.pick("bracket", a.bracket.clone(), "0,10".into())?, "bracket")?;
    let tol = ctx.pick("tol", a.tol, 1e-6)?;
    let cfg = ctx.shoot_config(a.t_max)?;
    Ok(Outcome::ok(eps_bar_run(ctx, bracket, tol, &cfg)?))
}

fn explore(ctx: &mut Ctx, a: &ExploreArgs) -> Res {
    let bracket = parse_pair(&ctx.pick("bracket", a.bracket.clone(), "0,2".into())?, "bracket")?;
    let tol = ctx.pick("tol", a.tol, 1e-4)?;
    let cfg = ctx.shoot_config(None)?;
    let stationary: Vec<_> = stationary_points(&ctx.coeffs)
        .into_iter()
        .map(|p| spectral_report(&ctx.coeffs, p))
        .collect::<Result<_, _>>()?;
    ctx.out.json("stationary.json", &stationary)?;
    let line = eps_bar_run(ctx, bracket, tol, &cfg)?;
    Ok(Outcome::ok(format!("beta = {}: {line}", ctx.coeffs.beta)))
}

fn bubble(ctx: &mut Ctx, a: &BubbleArgs) -> Res {
    let grid = ctx.pick("eps-grid", a.eps_grid.clone(), "default".into())?;
    let eps: Vec<f64> =
        if grid == "default" { EPS_GRID.to_vec() } else { parse_list(&grid, "eps-grid")? };
    ctx.record("eps", &eps);
    let rho = ctx.pick("rho", a.rho, 1.0)?;
    let amp = ctx.pick("amplitude", a.amplitude, 1.0)?;
    let mut runs = Vec::new();
    let mut cutoff = String::new();
    for &e in &eps {
        let b = Bubble::new(e, rho)?.with_amplitude(amp);
        cutoff = b.cutoff.describe();
        runs.push(bubble_run(b)?);
    }
    ctx.record("cutoff", &cutoff);
    let rows = runs.iter().map(|r| {
        let i = &r.integrals;
        [r.eps, i.lap2, i.cross, i.grad4, i.grad2, i.lower, i.exp, r.f_p, r.f_tau, r.f_l, r.refinement]
    });
    let header = [
        "eps", "lap2", "cross", "grad4", "grad2", "lower", "exp", "f_p", "f_tau", "f_l", "refinement",
    ];
    ctx.out.csv("runs.csv", &header, rows)?;
    let fit = slope_fit(&runs)?;
    ctx.out.json("fit.json", &json!({ "cutoff": cutoff, "fit": fit }))?;
    Ok(Outcome::ok(format!(
        "slopes vs log(1/eps): F_P {:.6e}, F_tau {:.6e}, F_L {:.6e}",
        fit.p.separated.slope, fit.tau.separated.slope, fit.l.separated.slope
    )))
}

fn verify(ctx: &mut Ctx, a: &VerifyArgs) -> Res {
    let n = ctx.pick("samples", a.samples, 50usize)?;
    let seed = ctx.pick("seed", a.seed, 1u64)?;
    let t_end = ctx.pick("t-end", a.t_end, 20.0)?;
    let tol = ctx.pick("tol", a.tol, 1e-6)?;
    let cfg = ctx.integrator(IntegratorConfig::tight().with_blowup_norm(50.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = ChainResiduals::default();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x0 = State3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let cc = rng.gen_range(0.0..30.0);
        let r = chain_residuals(&ctx.coeffs, x0, cc, t_end, &cfg)?;
        rows.push([x0.x, x0.y, x0.z, cc, r.t_end, r.k, r.q, r.f_c, r.g_c, r.f]);
        total.merge(&r);
    }
    let header = ["x0", "y0", "z0", "c", "t_end", "k", "q", "f_c", "g_c", "f"];
    ctx.out.csv("residuals.csv", &header, &rows)?;
    let pass = total.max() <= tol;
    ctx.out.json("residuals.json", &json!({ "max": total, "tol": tol, "pass": pass }))?;
    let line = format!("max residual {:.3e} over {} samples (tol {tol:e})", total.max(), total.samples);
    Ok(Outcome { failed: (!pass).then(|| line.clone()), summary: line })
}
