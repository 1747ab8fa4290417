//! Coefficients, phase-space states and the radial Euler–Lagrange equations.
//!
//! A radial conformal factor on the round four-sphere is written on the
//! cylinder as `u(t)` with `t = log r`.  The fourth-order equation for `u`
//! reduces, through `x = -u'`, `y = x'`, `z = y'`, to an autonomous
//! third-order system in `(x, y, z)` that depends on the coefficients only
//! through `beta = gamma2 / (12 gamma3)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this value of `|4u|` the exponential is treated as an overflow.
pub const EXP_GUARD: f64 = 700.0;

/// Coefficients `(gamma1, gamma2, gamma3)` of the functional together with
/// the derived ratio `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub beta: f64,
}

impl Coefficients {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        if !(gamma1.is_finite() && gamma2.is_finite() && gamma3.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite coefficient".into()));
        }
        if gamma3 == 0.0 {
            return Err(Error::InvalidCoefficients("gamma3 must be nonzero".into()));
        }
        Self::checked(gamma1, gamma2, gamma3, gamma2 / (12.0 * gamma3))
    }

    /// Coefficients `(0, 12 beta, 1)`, convenient for sweeps in `beta`.
    pub fn from_beta(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidCoefficients("non-finite beta".into()));
        }
        Self::checked(0.0, 12.0 * beta, 1.0, beta)
    }

    fn checked(gamma1: f64, gamma2: f64, gamma3: f64, beta: f64) -> Result<Self> {
        if (1.0 + beta).abs() < 1e-12 {
            return Err(Error::InvalidCoefficients(
                "beta = -1 makes the leading coefficient vanish".into(),
            ));
        }
        Ok(Self { gamma1, gamma2, gamma3, beta })
    }

    pub fn paneitz() -> Self {
        Preset::Paneitz.coefficients()
    }

    pub fn half_torsion() -> Self {
        Preset::HalfTorsion.coefficients()
    }

    pub fn conformal_laplacian() -> Self {
        Preset::ConformalLaplacian.coefficients()
    }

    pub fn one_plus_beta(&self) -> f64 {
        1.0 + self.beta
    }

    /// Value `64 beta` taken by `Q` at the saddle `(1, 0, 0)`.
    pub fn q_saddle(&self) -> f64 {
        64.0 * self.beta
    }

    /// Newton energy of the invariant disc.  On `{F = G = 0}` the invariant
    /// `K` vanishes only at this level; it is zero for the Paneitz ratio.
    pub fn disc_energy(&self) -> f64 {
        (7.0 + 16.0 * self.beta) / (6.0 * (1.0 + self.beta))
    }

    pub fn is_paneitz(&self) -> bool {
        (self.beta + 7.0 / 16.0).abs() < 1e-12
    }
}

/// The three named operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    Paneitz,
    HalfTorsion,
    ConformalLaplacian,
}

impl Preset {
    pub fn coefficients(self) -> Coefficients {
        let (g1, g2, g3) = match self {
            Preset::Paneitz => (-0.25, -14.0, 8.0 / 3.0),
            Preset::HalfTorsion => (-13.0, -248.0, 116.0 / 3.0),
            Preset::ConformalLaplacian => (1.0, -4.0, -2.0 / 3.0),
        };
        Coefficients::new(g1, g2, g3).expect("preset coefficients are valid")
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Paneitz => "paneitz",
            Preset::HalfTorsion => "half-torsion",
            Preset::ConformalLaplacian => "conformal-laplacian",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paneitz" | "p" => Ok(Preset::Paneitz),
            "half-torsion" | "half_torsion" | "torsion" | "tau" => Ok(Preset::HalfTorsion),
            "conformal-laplacian" | "conformal_laplacian" | "laplacian" | "l" => {
                Ok(Preset::ConformalLaplacian)
            }
            other => Err(Error::InvalidCoefficients(format!("unknown preset `{other}`"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(t, u, u', u'', u''')` on the cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylState {
    pub t: f64,
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

/// Phase-space point `(x, y, z) = (-u', -u'', -u''')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(self, other: State3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl From<CylState> for State3 {
    fn from(s: CylState) -> Self {
        Self { x: -s.u1, y: -s.u2, z: -s.u3 }
    }
}

/// Fourth derivative of `u` from the radial Euler–Lagrange equation.
pub fn euler_rhs_u(c: &Coefficients, s: &CylState) -> Result<f64> {
    let four_u = 4.0 * s.u;
    if four_u > EXP_GUARD || four_u.is_nan() {
        return Err(Error::Overflow(four_u));
    }
    let b = c.beta;
    let num = 6.0 * b * four_u.exp() + 6.0 * s.u2 * s.u1 * s.u1 - (2.0 - 4.0 * b) * s.u2;
    Ok(num / (1.0 + b))
}

/// Residual of the first integral of the fourth-order equation under the
/// initial conditions `u'(0) = u'''(0) = 0`.  Normalised so that for the
/// Paneitz ratio it reads
/// `9u'''u' - 9/2 u''^2 - 24u'^4 + 30u'^2 + 21/2 e^{4u} - 6`.
pub fn nt_residual(c: &Coefficients, s: &CylState) -> f64 {
    let b = c.beta;
    let ob = 1.0 + b;
    let (u1, u2, u3) = (s.u1, s.u2, s.u3);
    let n = ob * u3 * u1 - 0.5 * ob * u2 * u2 - 1.5 * u1.powi(4) + (1.0 - 2.0 * b) * u1 * u1
        - 1.5 * b * (4.0 * s.u).exp()
        + (2.0 * b + 0.5);
    16.0 * n
}

/// Vector field of the third-order system, with the `beta`-dependent
/// constants folded once.
#[derive(Clone, Copy, Debug)]
pub struct Radial {
    pub coeffs: Coefficients,
    k_x2y: f64,
    k_y: f64,
    k_x4: f64,
    k_x2: f64,
    k_0: f64,
}

impl Radial {
    pub fn new(coeffs: Coefficients) -> Self {
        let b = coeffs.beta;
        let ob = 1.0 + b;
        Self {
            coeffs,
            k_x2y: 6.0 / ob,
            k_y: 2.0 * (2.0 * b - 1.0) / ob,
            k_x4: 6.0 / ob,
            k_x2: 4.0 * (2.0 * b - 1.0) / ob,
            k_0: -2.0 * (4.0 * b + 1.0) / ob,
        }
    }

    #[inline]
    pub fn z_dot(&self, x: f64, y: f64, z: f64) -> f64 {
        let x2 = x * x;
        -4.0 * x * z + self.k_x2y * x2 * y + 2.0 * y * y + self.k_y * y
            + self.k_x4 * x2 * x2
            + self.k_x2 * x2
            + self.k_0
    }

    #[inline]
    pub fn eval(&self, s: &[f64; 3]) -> [f64; 3] {
        [s[1], s[2], self.z_dot(s[0], s[1], s[2])]
    }

    /// Jacobian of the field at `s`, row-major.
    pub fn jacobian(&self, s: State3) -> [[f64; 3]; 3] {
        let (x, y, z) = (s.x, s.y, s.z);
        let ob = self.coeffs.one_plus_beta();
        let b = self.coeffs.beta;
        let dzx = -4.0 * z + 12.0 * x * y / ob + 24.0 * x.powi(3) / ob
            + 8.0 * (2.0 * b - 1.0) * x / ob;
        let dzy = 6.0 * x * x / ob + 4.0 * y + 2.0 * (2.0 * b - 1.0) / ob;
        let dzz = -4.0 * x;
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [dzx, dzy, dzz]]
    }
}

pub fn system_rhs(c: &Coefficients, s: State3) -> State3 {
    State3::from_array(Radial::new(*c).eval(&s.to_array()))
}

/// First invariant `K`, which obeys `K' = -4xK`.
pub fn invariant_k(c: &Coefficients, s: State3) -> f64 {
    let b = c.beta;
    let ob = 1.0 + b;
    let x2 = s.x * s.x;
    -6.0 * s.x * s.z + 3.0 * s.y * s.y + 9.0 * x2 * x2 / ob - 6.0 * x2 * (1.0 - 2.0 * b) / ob
        - 3.0 * (1.0 + 4.0 * b) / ob
}

/// Second invariant `Q`, which obeys `Q' = -(32/3)(1 + beta) K`.
pub fn invariant_q(c: &Coefficients, s: State3) -> f64 {
    let b = c.beta;
    -16.0 * (1.0 + b) * s.z + 32.0 * s.x.powi(3) + 32.0 * (2.0 * b - 1.0) * s.x
}

/// Rate constant in `Q' = -kappa K`.
pub fn q_rate(c: &Coefficients) -> f64 {
    32.0 / 3.0 * (1.0 + c.beta)
}

/// Quartic potential `V_{C,beta}` of the Newton reduction `v'' = -V'(v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub c: f64,
    pub beta: f64,
}

impl PotentialSpec {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        if !c.is_finite() || !beta.is_finite() || (1.0 + beta).abs() < 1e-12 {
            return Err(Error::InvalidCoefficients(format!("potential C = {c}, beta = {beta}")));
        }
        Ok(Self { c, beta })
    }

    pub fn with_coeffs(c: f64, coeffs: &Coefficients) -> Self {
        Self { c, beta: coeffs.beta }
    }

    fn ob(&self) -> f64 {
        1.0 + self.beta
    }

    fn quad(&self) -> f64 {
        (1.0 - 2.0 * self.beta) / self.ob()
    }

    pub fn value(&self, v: f64) -> f64 {
        let v2 = v * v;
        -v2 * v2 / (2.0 * self.ob()) + v2 * self.quad() - self.c * v / 9.0 + 2.0 / 3.0
    }

    pub fn d1(&self, v: f64) -> f64 {
        -2.0 * v.powi(3) / self.ob() + 2.0 * v * self.quad() - self.c / 9.0
    }

    pub fn d2(&self, v: f64) -> f64 {
        -6.0 * v * v / self.ob() + 2.0 * self.quad()
    }

    pub fn d3(&self, v: f64) -> f64 {
        -12.0 * v / self.ob()
    }

    pub fn d4(&self) -> f64 {
        -12.0 / self.ob()
    }

    /// Coefficients `[a0, a1, a2, a3, a4]` of `V(v) = sum a_k v^k`.
    pub fn monomials(&self) -> [f64; 5] {
        [2.0 / 3.0, -self.c / 9.0, self.quad(), 0.0, -1.0 / (2.0 * self.ob())]
    }

    pub fn energy(&self, v: f64, w: f64) -> f64 {
        0.5 * w * w + self.value(v)
    }

    pub fn newton_rhs(&self, s: &[f64; 2]) -> [f64; 2] {
        [s[1], -self.d1(s[0])]
    }

    /// Reflection `v -> -v` maps `C` to `-C`.
    pub fn reflected(&self) -> Self {
        Self { c: -self.c, beta: self.beta }
    }
}

/// Lyapunov and chain-identity quantities at a phase-space point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `y^2 + 2(V_C(x) - E_disc)`, with `F_C' = 2 y G_C`.
    pub f_c: f64,
    /// `z + V_C'(x)`, with `G_C' = (2/3) K`.
    pub g_c: f64,
    /// `z`-free combination `K - (3 / (8(1+beta))) x (Q - 64 beta)`.
    pub w: f64,
    /// `(Q - 64 beta) / K`, absent where `|K|` is below `1e-13`.
    pub f: Option<f64>,
    /// `y + 2x^2`.
    pub g_script: f64,
    /// `z + 4xy`, the time derivative of `g_script`.
    pub g_script_dot: f64,
    /// Energy whose derivative is `g' (g'' - c g^2 - a g - b)`.
    pub f_script: f64,
}

pub fn diagnostics(c: &Coefficients, s: State3, cc: f64) -> Diagnostics {
    let b = c.beta;
    let ob = 1.0 + b;
    let p = PotentialSpec { c: cc, beta: b };
    let k = invariant_k(c, s);
    let q = invariant_q(c, s);
    let (x, y, z) = (s.x, s.y, s.z);
    let x2 = x * x;
    let w = 3.0 * y * y - 3.0 * x2 * x2 / ob + 6.0 * (1.0 - 2.0 * b) * x2 / ob + 24.0 * b * x / ob
        - 3.0 * (1.0 + 4.0 * b) / ob;
    let g = y + 2.0 * x2;
    let gd = z + 4.0 * x * y;
    let (cq, aq, bq) = g_script_bound(c);
    let f_script = 0.5 * gd * gd - cq / 3.0 * g.powi(3) - 0.5 * aq * g * g - bq * g;
    Diagnostics {
        f_c: y * y + 2.0 * (p.value(x) - c.disc_energy()),
        g_c: z + p.d1(x),
        w,
        f: if k.abs() < 1e-13 { None } else { Some((q - c.q_saddle()) / k) },
        g_script: g,
        g_script_dot: gd,
        f_script,
    }
}

/// Constants `(c, a, b)` of the lower bound `g'' >= c g^2 + a g + b`, valid
/// whenever `c <= 6`.  For the Paneitz ratio they are `(8/3, -20/3, 8/3)`.
pub fn g_script_bound(c: &Coefficients) -> (f64, f64, f64) {
    let b = c.beta;
    let ob = 1.0 + b;
    (1.5 / ob, 2.0 * (2.0 * b - 1.0) / ob, -2.0 * (4.0 * b + 1.0) / ob)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_of_presets() {
        assert!((Coefficients::paneitz().beta + 7.0 / 16.0).abs() < 1e-15);
        assert!((Coefficients::half_torsion().beta + 31.0 / 58.0).abs() < 1e-15);
        assert!((Coefficients::conformal_laplacian().beta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_coefficients() {
        assert!(Coefficients::new(1.0, 1.0, 0.0).is_err());
        assert!(Coefficients::new(0.0, -12.0, 1.0).is_err());
        assert!(Coefficients::from_beta(-1.0).is_err());
    }

    #[test]
    fn fourth_derivative_sample() {
        let c = Coefficients::paneitz();
        let s = CylState { t: 0.0, u: 0.0, u1: 1.0, u2: 1.0, u3: 0.0 };
        let r = euler_rhs_u(&c, &s).unwrap();
        assert!((r + 2.0 / 3.0).abs() < 1e-14, "{r}");
    }

    #[test]
    fn overflow_is_reported() {
        let c = Coefficients::paneitz();
        let s = CylState { t: 0.0, u: 200.0, u1: 0.0, u2: 0.0, u3: 0.0 };
        assert!(matches!(euler_rhs_u(&c, &s), Err(Error::Overflow(_))));
    }

    #[test]
    fn field_at_origin() {
        let c = Coefficients::paneitz();
        let f = system_rhs(&c, State3::new(0.0, 0.0, 0.0));
        assert_eq!((f.x, f.y), (0.0, 0.0));
        assert!((f.z - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn potential_at_separatrix_turning_point() {
        let p = PotentialSpec::new(0.0, -7.0 / 16.0).unwrap();
        let v = 30f64.sqrt() / 4.0;
        assert!((p.value(v) - 91.0 / 24.0).abs() < 1e-13);
    }

    #[test]
    fn invariants_at_saddle() {
        for c in [Coefficients::paneitz(), Coefficients::half_torsion()] {
            let p1 = State3::new(1.0, 0.0, 0.0);
            assert!(invariant_k(&c, p1).abs() < 1e-13);
            assert!((invariant_q(&c, p1) - c.q_saddle()).abs() < 1e-12);
            assert!(diagnostics(&c, p1, 0.0).w.abs() < 1e-13);
        }
    }

    #[test]
    fn nt_residual_samples() {
        let c = Coefficients::paneitz();
        let s = CylState { t: 0.0, u: 0.0, u1: 0.0, u2: 1.0, u3: 0.0 };
        assert!(nt_residual(&c, &s).abs() < 1e-13);
        let s = CylState { t: 0.0, u: 0.0, u1: 1.0, u2: 0.0, u3: 0.0 };
        assert!((nt_residual(&c, &s) - 10.5).abs() < 1e-13);
    }
}
