//! Scalar root finding and real cubic roots.

use crate::error::{Error, Result};

/// Bracketed root of `f` on `[a, b]` to absolute width `tol`, by bisection
/// safeguarded secant steps.
pub fn bracketed(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketInvalid(format!(
            "no sign change on [{a}, {b}]: f = {fa:e}, {fb:e}"
        )));
    }
    for k in 0..400 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut m = if k % 3 == 2 { 0.5 * (a + b) } else { b - fb * (b - a) / (fb - fa) };
        let (lo, hi) = (a.min(b), a.max(b));
        if !(m > lo && m < hi) || !m.is_finite() {
            m = 0.5 * (a + b);
        }
        // Keep the bracket shrinking geometrically even when secant stalls.
        let w = hi - lo;
        if m - lo < 0.01 * w {
            m = lo + 0.01 * w;
        } else if hi - m < 0.01 * w {
            m = hi - 0.01 * w;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Real roots of `x^3 + p x + q = 0` in ascending order.  A double root is
/// reported once per multiplicity.
pub fn depressed_cubic(p: f64, q: f64) -> Vec<f64> {
    let scale = p.abs().powf(1.5).max(q.abs()).max(f64::MIN_POSITIVE);
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let mut roots = if disc.abs() <= 1e-12 * scale * scale {
        if p == 0.0 {
            vec![0.0, 0.0, 0.0]
        } else {
            let simple = 3.0 * q / p;
            let double = -1.5 * q / p;
            vec![simple, double, double]
        }
    } else if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    };
    for r in roots.iter_mut() {
        // Newton polish; harmless at double roots where f' vanishes.
        for _ in 0..3 {
            let f = r.powi(3) + p * *r + q;
            let d = 3.0 * *r * *r + p;
            if d.abs() > 1e-8 * scale.cbrt().powi(2) {
                *r -= f / d;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracketed_sqrt2() {
        let r = bracketed(0.0, 2.0, 1e-15, |x| x * x - 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!(bracketed(2.0, 3.0, 1e-12, |x| x * x - 2.0).is_err());
    }

    #[test]
    fn cubic_three_real() {
        let r = depressed_cubic(-7.0, 6.0);
        let want = [-3.0, 1.0, 2.0];
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn cubic_one_real() {
        let r = depressed_cubic(1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_double_root() {
        // (x - 1)^2 (x + 2) = x^3 - 3x + 2
        let r = depressed_cubic(-3.0, 2.0);
        assert_eq!(r.len(), 3);
        assert!((r[0] + 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-7);
    }
}
