//! Equilibria of the third-order system, their linearisation, and the growth
//! constant of the linearised fourth-order operator around the round metric.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig, Trajectory};
use crate::model::{Coefficients, Radial, State3};
use crate::roots;

/// Equilibria `(x, 0, 0)`: `x = +-1`, and `x^2 = -(4 beta + 1)/3` when
/// `beta < -1/4`.  Sorted by `x`.
pub fn stationary_points(c: &Coefficients) -> Vec<State3> {
    let mut xs = vec![-1.0, 1.0];
    if c.beta < -0.25 {
        let r = (-(4.0 * c.beta + 1.0) / 3.0).sqrt();
        if (r - 1.0).abs() > 1e-12 {
            xs.extend([-r, r]);
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.into_iter().map(|x| State3::new(x, 0.0, 0.0)).collect()
}

pub fn jacobian_at(c: &Coefficients, p: State3) -> Result<Matrix3<f64>> {
    let r = Radial::new(*c);
    let f = r.eval(&p.to_array());
    let scale = 1.0 + p.norm().powi(4);
    if f.iter().any(|v| v.abs() > 1e-9 * scale) {
        return Err(Error::NotStationary(format!("field {f:?} at {p:?}")));
    }
    let j = r.jacobian(p);
    Ok(Matrix3::from_fn(|i, k| j[i][k]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    Saddle,
    CenterLike,
    Sink,
    Source,
    Nonhyperbolic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigen3 {
    /// Eigenvalues in descending order of real part.
    pub values: Vec<Complex64>,
    /// Eigenvectors of the real eigenvalues, in the same order, scaled to a
    /// unit first component when it is nonzero.
    pub vectors: Vec<Option<[f64; 3]>>,
    pub kind: FixedPointKind,
}

/// Eigen-decomposition from the characteristic cubic in closed form.
pub fn eigen3(m: &Matrix3<f64>) -> Eigen3 {
    let a = -m.trace();
    let b = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let c = -m.determinant();
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let poly = |l: f64| ((l + a) * l + b) * l + c;
    let dpoly = |l: f64| (3.0 * l + 2.0 * a) * l + b;
    let polish = |mut l: f64| {
        for _ in 0..4 {
            let d = dpoly(l);
            if d.abs() < 1e-12 {
                break;
            }
            let step = poly(l) / d;
            l -= step;
        }
        l
    };

    let real: Vec<f64> = roots::depressed_cubic(p, q).into_iter().map(|mu| polish(mu + shift)).collect();
    let mut values: Vec<Complex64> = if real.len() == 3 {
        real.iter().map(|&l| Complex64::new(l, 0.0)).collect()
    } else {
        let r = real[0];
        // Deflate: quadratic l^2 + (a + r) l + (b + r (a + r)).
        let qb = a + r;
        let qc = b + r * qb;
        let disc = qb * qb - 4.0 * qc;
        let re = -qb / 2.0;
        let im = (-disc).max(0.0).sqrt() / 2.0;
        vec![Complex64::new(r, 0.0), Complex64::new(re, im), Complex64::new(re, -im)]
    };
    values.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));

    let vectors = values
        .iter()
        .map(|l| (l.im == 0.0).then(|| real_eigenvector(m, l.re)))
        .collect();

    let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let kind = if values.iter().any(|v| v.re.abs() <= tol) {
        if values.iter().any(|v| v.re.abs() <= tol && v.im.abs() > tol) {
            FixedPointKind::CenterLike
        } else {
            FixedPointKind::Nonhyperbolic
        }
    } else if values.iter().all(|v| v.re < 0.0) {
        FixedPointKind::Sink
    } else if values.iter().all(|v| v.re > 0.0) {
        FixedPointKind::Source
    } else {
        FixedPointKind::Saddle
    };
    Eigen3 { values, vectors, kind }
}

fn real_eigenvector(m: &Matrix3<f64>, l: f64) -> [f64; 3] {
    let s = m - Matrix3::identity() * l;
    let rows: Vec<Vector3<f64>> = (0..3).map(|i| s.row(i).transpose()).collect();
    let mut best = Vector3::zeros();
    for (i, k) in [(0, 1), (0, 2), (1, 2)] {
        let v = rows[i].cross(&rows[k]);
        if v.norm() > best.norm() {
            best = v;
        }
    }
    if best.norm() == 0.0 {
        // A multiple of the identity block: any vector will do.
        best = Vector3::new(1.0, 0.0, 0.0);
    }
    let v = if best[0].abs() > 1e-12 * best.norm() { best / best[0] } else { best.normalize() };
    [v[0], v[1], v[2]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub point: State3,
    pub jacobian: [[f64; 3]; 3],
    pub eigen: Eigen3,
    /// Largest `|det(J - l I)|` over the eigenvalues.
    pub char_residual: f64,
    /// Largest `|J v - l v|` over the real eigenpairs.
    pub vector_residual: f64,
    /// `|sum l - tr J|` and `|prod l - det J|`.
    pub trace_gap: f64,
    pub det_gap: f64,
}

pub fn spectral_report(c: &Coefficients, p: State3) -> Result<SpectralReport> {
    let j = jacobian_at(c, p)?;
    let eigen = eigen3(&j);
    let jc = j.map(|v| Complex64::new(v, 0.0));
    let char_residual = eigen
        .values
        .iter()
        .map(|&l| (jc - Matrix3::identity() * l).determinant().norm())
        .fold(0.0, f64::max);
    let vector_residual = eigen
        .values
        .iter()
        .zip(&eigen.vectors)
        .filter_map(|(l, v)| v.map(|v| (l.re, Vector3::from(v))))
        .map(|(l, v)| (j * v - v * l).norm())
        .fold(0.0, f64::max);
    let sum: Complex64 = eigen.values.iter().sum();
    let prod: Complex64 = eigen.values.iter().product();
    Ok(SpectralReport {
        point: p,
        jacobian: [0, 1, 2].map(|r| [0, 1, 2].map(|k| j[(r, k)])),
        char_residual,
        vector_residual,
        trace_gap: (sum - j.trace()).norm(),
        det_gap: (prod - j.determinant()).norm(),
        eigen,
    })
}

/// Linearisation of the fourth-order equation at the round solution
/// `u0 = -log cosh t`, as a first-order system in `(phi, phi', phi'', phi''')`.
#[derive(Clone, Copy, Debug)]
pub struct RoundLinearization {
    beta: f64,
}

impl RoundLinearization {
    pub fn new(c: &Coefficients) -> Self {
        Self { beta: c.beta }
    }

    pub fn eval(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let b = self.beta;
        let th = t.tanh();
        let sech2 = 1.0 - th * th;
        let d4 = -((2.0 - 4.0 * b - 6.0 * th * th) * y[2]
            - 12.0 * sech2 * th * y[1]
            - 24.0 * b * sech2 * sech2 * y[0])
            / (1.0 + b);
        [y[1], y[2], y[3], d4]
    }

    /// Initial data from linearising `u'(0) = u'''(0) = 0` and the
    /// first-integral constraint, normalised by `phi''(0) = 1`.
    pub fn initial(&self) -> Result<[f64; 4]> {
        if self.beta.abs() < 1e-14 {
            return Err(Error::OutOfRange("beta = 0 leaves phi(0) undetermined".into()));
        }
        Ok([(1.0 + self.beta) / (6.0 * self.beta), 0.0, 1.0, 0.0])
    }
}

pub fn integrate_phi(c: &Coefficients, t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory<4>> {
    let lin = RoundLinearization::new(c);
    let f = move |t: f64, y: &[f64; 4]| lin.eval(t, y);
    let mut cfg = cfg.clone();
    cfg.blowup_norm = f64::INFINITY;
    integrate(&f, 0.0, lin.initial()?, t_end, &cfg, &[])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    /// Growth constant `A` in `phi ~ A e^{2t}`.
    pub amplitude: f64,
    /// `(max - min) / |mean|` of `phi e^{-2t}` over the plateau window.
    pub plateau_spread: f64,
    pub window: (f64, f64),
    /// `phi'/phi`, `phi''/phi`, `phi'''/phi` at the start of the window.
    pub ratios: [f64; 3],
    pub phi0: f64,
}

pub const PHI_WINDOW: (f64, f64) = (12.0, 15.0);

/// Largest relative spread of `phi e^{-2t}` over [`PHI_WINDOW`] accepted as
/// a plateau.
pub const PLATEAU_TOL: f64 = 1e-6;

pub fn linearized_phi(c: &Coefficients) -> Result<PhiReport> {
    linearized_phi_with(c, &IntegratorConfig::tight().with_max_step(0.05))
}

pub fn linearized_phi_with(c: &Coefficients, cfg: &IntegratorConfig) -> Result<PhiReport> {
    let (t0, t1) = PHI_WINDOW;
    let tr = integrate_phi(c, t1, cfg)?;
    if tr.t_end() < t1 {
        return Err(Error::Integration(format!("phi run stopped at t = {}: {:?}", tr.t_end(), tr.termination)));
    }
    let n = 301;
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
            tr.eval(t).expect("window inside the run")[0] * (-2.0 * t).exp()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let y = tr.eval(t0).expect("window inside the run");
    let spread = (hi - lo) / mean.abs();
    if !(spread <= PLATEAU_TOL) {
        return Err(Error::PlateauNotFound(spread));
    }
    Ok(PhiReport {
        amplitude: *vals.last().expect("nonempty"),
        plateau_spread: spread,
        window: PHI_WINDOW,
        ratios: [y[1] / y[0], y[2] / y[0], y[3] / y[0]],
        phi0: tr.states[0][0],
    })
}
