//! Special functions used by the Lax analysis.
//!
//! Parameter convention throughout is `m = k²`. Negative parameters are mapped
//! onto `0 < μ < 1` with the imaginary-modulus transformation
//!
//! ```text
//! K(m)     = K(μ) / √(1 − m)
//! sn(u|m)  = sd(u√(1 − m) | μ) / √(1 − m),      μ = −m / (1 − m)
//! ```
//!
//! so no complex elliptic machinery is needed.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

const AGM_MAX_ITER: usize = 40;
const AGM_TOL: f64 = 1e-16;

/// Arithmetic-geometric mean of two positive numbers.
fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_ITER {
        let a_next = 0.5 * (a + b);
        let b_next = (a * b).sqrt();
        a = a_next;
        b = b_next;
        if (a - b).abs() <= AGM_TOL * a {
            break;
        }
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind, `K(m) = ∫₀^{π/2} dθ / √(1 − m sin²θ)`.
///
/// Defined for every `m < 1`; `m ≥ 1` is a domain error.
pub fn elliptic_k(m: f64) -> Result<f64> {
    if !(m < 1.0) {
        return Err(Error::domain("elliptic_k", format!("parameter m = {m} must be < 1")));
    }
    if m == 0.0 {
        return Ok(FRAC_PI_2);
    }
    if m < 0.0 {
        let mu = -m / (1.0 - m);
        return Ok(k_unit_interval(mu) / (1.0 - m).sqrt());
    }
    Ok(k_unit_interval(m))
}

fn k_unit_interval(m: f64) -> f64 {
    FRAC_PI_2 / agm(1.0, (1.0 - m).sqrt())
}

/// `(sn, cn, dn)` for `0 ≤ m ≤ 1` by the descending Landen (AGM) scheme.
fn sncndn_unit_interval(u: f64, m: f64) -> (f64, f64, f64) {
    if m == 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    if m == 1.0 {
        let sech = 1.0 / u.cosh();
        return (u.tanh(), sech, sech);
    }

    // Reduce modulo the real period 4K; the backward recursion loses accuracy
    // for large |u| otherwise.
    let quarter = k_unit_interval(m);
    let period = 4.0 * quarter;
    let u = u - period * (u / period).round();

    let mut a = [0.0f64; AGM_MAX_ITER + 1];
    let mut c = [0.0f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    let mut b = (1.0 - m).sqrt();
    c[0] = m.sqrt();
    let mut n = 0;
    while n < AGM_MAX_ITER && c[n].abs() > f64::EPSILON * a[n] {
        let an = a[n];
        a[n + 1] = 0.5 * (an + b);
        c[n + 1] = 0.5 * (an - b);
        b = (an * b).sqrt();
        n += 1;
    }

    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for k in (1..=n).rev() {
        let arg = (c[k] / a[k] * phi.sin()).clamp(-1.0, 1.0);
        phi = 0.5 * (phi + arg.asin());
    }
    let (sn, cn) = phi.sin_cos();
    // dn > 0 for m < 1; the cn/cos(φ₁ − φ₀) form is 0/0 at the quarter period
    let dn = (1.0 - m * sn * sn).sqrt();
    (sn, cn, dn)
}

/// Jacobi elliptic function `sn(u | m)` for real `u` and any real `m ≤ 1`.
pub fn jacobi_sn(u: f64, m: f64) -> Result<f64> {
    if !(m <= 1.0) {
        return Err(Error::domain("jacobi_sn", format!("parameter m = {m} must be <= 1")));
    }
    if m >= 0.0 {
        return Ok(sncndn_unit_interval(u, m).0);
    }
    let scale = (1.0 - m).sqrt();
    let mu = -m / (1.0 - m);
    let (sn, _, dn) = sncndn_unit_interval(u * scale, mu);
    Ok(sn / dn / scale)
}

/// `ln(1 + z)` with full relative accuracy for small `|z|`. Principal branch.
fn ln_1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.re * z.re + z.im * z.im).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

/// Principal complex inverse hyperbolic tangent.
///
/// Branch cuts lie on the real axis with `|Re z| ≥ 1`; the poles `z = ±1` are
/// a domain error.
pub fn complex_atanh(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re.abs() == 1.0 {
        return Err(Error::domain("complex_atanh", format!("pole at z = {z}")));
    }
    Ok(0.5 * (ln_1p(z) - ln_1p(-z)))
}

/// `atanh(z) / z`, continuous through `z = 0`.
pub(crate) fn atanh_over_z(z: Complex64) -> Result<Complex64> {
    if z.norm_sqr() < 1e-10 {
        let z2 = z * z;
        // 1 + z²/3 + z⁴/5 + z⁶/7; truncation error below 1e-40 here.
        return Ok(1.0 + z2 * (1.0 / 3.0 + z2 * (0.2 + z2 / 7.0)));
    }
    Ok(complex_atanh(z)? / z)
}
