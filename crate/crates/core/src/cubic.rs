//! Closed-form roots of monic real cubics `x^3 + b1 x^2 + b2 x + b3`.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Relative discriminant magnitude below which roots are treated as repeated.
pub const REPEATED_ROOT_TOL: f64 = 1e-14;

/// Evaluates the monic cubic at a complex point (Horner).
pub fn eval(coeffs: [f64; 3], x: Complex64) -> Complex64 {
    let [b1, b2, b3] = coeffs;
    ((x + b1) * x + b2) * x + b3
}

fn eval_derivative(coeffs: [f64; 3], x: Complex64) -> Complex64 {
    let [b1, b2, _] = coeffs;
    (x * 3.0 + 2.0 * b1) * x + b2
}

/// Roots of `x^3 + b1 x^2 + b2 x + b3`, sorted by real part descending and
/// then by imaginary part descending.
///
/// Three distinct real roots use the trigonometric form; otherwise the real
/// root comes from Cardano's formula and the remaining pair from deflation.
/// Each root gets a couple of Newton corrections on the original polynomial.
pub fn roots(coeffs: [f64; 3]) -> [Complex64; 3] {
    let [b1, b2, b3] = coeffs;
    let shift = -b1 / 3.0;
    let p = b2 - b1 * b1 / 3.0;
    let q = 2.0 * b1 * b1 * b1 / 27.0 - b1 * b2 / 3.0 + b3;

    let scale = 4.0 * p.abs().powi(3) + 27.0 * q * q;
    let disc = -(4.0 * p * p * p + 27.0 * q * q);

    let mut out = if scale == 0.0 {
        [Complex64::new(shift, 0.0); 3]
    } else if disc.abs() <= REPEATED_ROOT_TOL * scale {
        if p == 0.0 {
            [Complex64::new(shift, 0.0); 3]
        } else {
            let single = 3.0 * q / p;
            let double = -1.5 * q / p;
            [single, double, double].map(|t| Complex64::new(t + shift, 0.0))
        }
    } else if disc > 0.0 {
        // p < 0 here
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (1.5 * q / p * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        [0.0, 1.0, 2.0].map(|j| Complex64::new(m * (theta - 2.0 * PI * j / 3.0).cos() + shift, 0.0))
    } else {
        let sq = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        // Pick the sign that avoids cancellation.
        let u = (-q / 2.0 - q.signum() * sq).cbrt();
        let t = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
        let r = polish_real(coeffs, t + shift);
        let c1 = b1 + r;
        let c0 = if r != 0.0 { -b3 / r } else { b2 };
        let re = -c1 / 2.0;
        let im2 = c0 - c1 * c1 / 4.0;
        if im2 >= 0.0 {
            let im = im2.sqrt();
            [Complex64::new(r, 0.0), Complex64::new(re, im), Complex64::new(re, -im)]
        } else {
            let d = (-im2).sqrt();
            [r, re + d, re - d].map(|x| Complex64::new(x, 0.0))
        }
    };

    for root in out.iter_mut() {
        *root = polish(coeffs, *root);
    }
    // Keep conjugate pairs exactly symmetric after polishing.
    if out.iter().filter(|z| z.im != 0.0).count() == 2 {
        let (i, j) = pair_indices(&out);
        let re = 0.5 * (out[i].re + out[j].re);
        let im = 0.5 * (out[i].im.abs() + out[j].im.abs());
        out[i] = Complex64::new(re, im);
        out[j] = Complex64::new(re, -im);
    }
    sort_roots(&mut out);
    out
}

fn pair_indices(z: &[Complex64; 3]) -> (usize, usize) {
    let mut idx = (0..3).filter(|&i| z[i].im != 0.0);
    (idx.next().unwrap(), idx.next().unwrap())
}

fn polish_real(coeffs: [f64; 3], x: f64) -> f64 {
    polish(coeffs, Complex64::new(x, 0.0)).re
}

fn polish(coeffs: [f64; 3], mut x: Complex64) -> Complex64 {
    let mut fx = eval(coeffs, x).norm();
    for _ in 0..3 {
        let d = eval_derivative(coeffs, x);
        if d.norm() == 0.0 || fx == 0.0 {
            break;
        }
        let next = x - eval(coeffs, x) / d;
        let fnext = eval(coeffs, next).norm();
        if fnext.is_finite() && fnext < fx {
            x = next;
            fx = fnext;
        } else {
            break;
        }
    }
    x
}

pub(crate) fn sort_roots(z: &mut [Complex64; 3]) {
    z.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}
