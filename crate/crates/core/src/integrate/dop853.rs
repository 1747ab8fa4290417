//! One Dormand–Prince 8(5,3) step with its dense-output polynomial.

use super::tableau::*;
use super::VectorField;

/// Septic interpolant on `[t0, t0 + h]`.
#[derive(Clone, Debug)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    end: f64,
    c: [[f64; N]; 8],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.end
    }

    /// Shortens the validity range without changing the polynomial.
    pub(super) fn set_end(&mut self, end: f64) {
        self.end = end;
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.h >= 0.0 { (self.t0, self.t1()) } else { (self.t1(), self.t0) };
        t >= a && t <= b
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.c;
        let mut out = [0.0; N];
        for i in 0..N {
            let conpar = c[4][i] + s * (c[5][i] + s1 * (c[6][i] + s * c[7][i]));
            out[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * conpar)));
        }
        out
    }
}

pub(super) struct Attempt<const N: usize> {
    pub increment: [f64; N],
    pub y_new: [f64; N],
    pub err: f64,
    k: [[f64; N]; 12],
}

#[inline]
fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] += h * acc;
    }
    out
}

pub(super) fn attempt<F: VectorField<N>, const N: usize>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Attempt<N> {
    let k2 = f.eval(t + C2 * h, &combo(y, h, &[(A21, k1)]));
    let k3 = f.eval(t + C3 * h, &combo(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f.eval(t + C4 * h, &combo(y, h, &[(A41, k1), (A43, &k3)]));
    let k5 = f.eval(t + C5 * h, &combo(y, h, &[(A51, k1), (A53, &k3), (A54, &k4)]));
    let k6 = f.eval(t + C6 * h, &combo(y, h, &[(A61, k1), (A64, &k4), (A65, &k5)]));
    let k7 = f.eval(t + C7 * h, &combo(y, h, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]));
    let k8 = f.eval(
        t + C8 * h,
        &combo(y, h, &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
    );
    let k9 = f.eval(
        t + C9 * h,
        &combo(y, h, &[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]),
    );
    let k10 = f.eval(
        t + C10 * h,
        &combo(
            y,
            h,
            &[(A101, k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)],
        ),
    );
    let k11 = f.eval(
        t + C11 * h,
        &combo(
            y,
            h,
            &[
                (A111, k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ),
    );
    let k12 = f.eval(
        t + h,
        &combo(
            y,
            h,
            &[
                (A121, k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ),
    );

    let mut increment = [0.0; N];
    let mut y_new = [0.0; N];
    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..N {
        let slope = B1 * k1[i] + B6 * k6[i] + B7 * k7[i] + B8 * k8[i] + B9 * k9[i] + B10 * k10[i]
            + B11 * k11[i]
            + B12 * k12[i];
        increment[i] = h * slope;
        y_new[i] = y[i] + increment[i];
        let sk = atol + rtol * y[i].abs().max(y_new[i].abs());
        let e3 = slope - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        err2 += (e3 / sk).powi(2);
        let e5 = ER1 * k1[i] + ER6 * k6[i] + ER7 * k7[i] + ER8 * k8[i] + ER9 * k9[i]
            + ER10 * k10[i]
            + ER11 * k11[i]
            + ER12 * k12[i];
        err += (e5 / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err * (1.0 / (deno * N as f64)).sqrt();

    Attempt {
        increment,
        y_new,
        err,
        k: [*k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12],
    }
}

/// Builds the interpolant of an accepted step; `k13` is the field at the
/// new point.  Costs three extra field evaluations.
pub(super) fn dense<F: VectorField<N>, const N: usize>(
    f: &F,
    t: f64,
    y: &[f64; N],
    h: f64,
    a: &Attempt<N>,
    k13: &[f64; N],
) -> DenseSegment<N> {
    let [k1, _k2, _k3, _k4, _k5, k6, k7, k8, k9, k10, k11, k12] = &a.k;
    let k14 = f.eval(
        t + C14 * h,
        &combo(
            y,
            h,
            &[
                (A141, k1),
                (A147, k7),
                (A148, k8),
                (A149, k9),
                (A1410, k10),
                (A1411, k11),
                (A1412, k12),
                (A1413, k13),
            ],
        ),
    );
    let k15 = f.eval(
        t + C15 * h,
        &combo(
            y,
            h,
            &[
                (A151, k1),
                (A156, k6),
                (A157, k7),
                (A158, k8),
                (A1511, k11),
                (A1512, k12),
                (A1513, k13),
                (A1514, &k14),
            ],
        ),
    );
    let k16 = f.eval(
        t + C16 * h,
        &combo(
            y,
            h,
            &[
                (A161, k1),
                (A166, k6),
                (A167, k7),
                (A168, k8),
                (A169, k9),
                (A1613, k13),
                (A1614, &k14),
                (A1615, &k15),
            ],
        ),
    );

    let mut c = [[0.0; N]; 8];
    for i in 0..N {
        let ydiff = a.increment[i];
        let bspl = h * k1[i] - ydiff;
        c[0][i] = y[i];
        c[1][i] = ydiff;
        c[2][i] = bspl;
        c[3][i] = ydiff - h * k13[i] - bspl;
        let row = |d: [f64; 12]| {
            d[0] * k1[i]
                + d[1] * k6[i]
                + d[2] * k7[i]
                + d[3] * k8[i]
                + d[4] * k9[i]
                + d[5] * k10[i]
                + d[6] * k11[i]
                + d[7] * k12[i]
                + d[8] * k13[i]
                + d[9] * k14[i]
                + d[10] * k15[i]
                + d[11] * k16[i]
        };
        c[4][i] = h * row([D41, D46, D47, D48, D49, D410, D411, D412, D413, D414, D415, D416]);
        c[5][i] = h * row([D51, D56, D57, D58, D59, D510, D511, D512, D513, D514, D515, D516]);
        c[6][i] = h * row([D61, D66, D67, D68, D69, D610, D611, D612, D613, D614, D615, D616]);
        c[7][i] = h * row([D71, D76, D77, D78, D79, D710, D711, D712, D713, D714, D715, D716]);
    }
    DenseSegment { t0: t, h, end: t + h, c }
}
