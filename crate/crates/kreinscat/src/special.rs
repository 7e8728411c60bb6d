//! Gauss-Legendre rules, Legendre polynomials and spherical Bessel functions.

use num_complex::Complex64 as c64;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], nodes increasing.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|t| m + h * t).collect(), w.iter().map(|wi| h * wi).collect())
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * t * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (t * p1 - p0) / (t * t - 1.0))
}

/// P_0(t), ..., P_lmax(t).
pub fn legendre_all(lmax: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    p[0] = 1.0;
    if lmax >= 1 {
        p[1] = t;
    }
    for k in 1..lmax {
        p[k + 1] = ((2 * k + 1) as f64 * t * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p
}

pub fn legendre(l: usize, t: f64) -> f64 {
    legendre_all(l, t)[l]
}

/// Spherical Bessel j_0..j_lmax at real x > 0 (Miller's downward recurrence).
pub fn sph_j(lmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0);
    let start = lmax + 20 + x.ceil() as usize + (x.sqrt() * 6.0) as usize;
    let mut f = vec![0.0; start + 2];
    f[start] = 1.0;
    for l in (1..=start).rev() {
        f[l - 1] = (2 * l + 1) as f64 / x * f[l] - f[l + 1];
        if f[l - 1].abs() > 1e200 {
            for v in f[l - 1..].iter_mut() {
                *v *= 1e-200;
            }
        }
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if j0.abs() >= j1.abs() { j0 / f[0] } else { j1 / f[1] };
    f.truncate(lmax + 1);
    f.iter().map(|v| v * scale).collect()
}

/// Spherical Bessel y_0..y_lmax at real x > 0 (upward recurrence).
pub fn sph_y(lmax: usize, x: f64) -> Vec<f64> {
    let mut y = vec![0.0; lmax + 1];
    y[0] = -x.cos() / x;
    if lmax >= 1 {
        y[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for l in 1..lmax {
        y[l + 1] = (2 * l + 1) as f64 / x * y[l] - y[l - 1];
    }
    y
}

/// Riccati-Bessel x j_l(x) and its x-derivative.
pub fn riccati_j(l: usize, x: f64) -> (f64, f64) {
    let j = sph_j(l + 1, x);
    let jm1 = if l == 0 { x.cos() / x } else { j[l - 1] };
    (x * j[l], x * jm1 - l as f64 * j[l])
}

/// Riccati-Bessel x y_l(x) and its x-derivative.
pub fn riccati_y(l: usize, x: f64) -> (f64, f64) {
    let y = sph_y(l + 1, x);
    let ym1 = if l == 0 { x.sin() / x } else { y[l - 1] };
    (x * y[l], x * ym1 - l as f64 * y[l])
}

/// Modified spherical Bessel i_0..i_lmax at complex x != 0, i_0 = sinh(x)/x.
pub fn sph_i(lmax: usize, x: c64) -> Vec<c64> {
    assert!(x.norm() > 0.0);
    let start = lmax + 20 + x.norm().ceil() as usize + (x.norm().sqrt() * 6.0) as usize;
    let mut f = vec![c64::new(0.0, 0.0); start + 2];
    f[start] = c64::new(1.0, 0.0);
    for l in (1..=start).rev() {
        f[l - 1] = f[l] * ((2 * l + 1) as f64) / x + f[l + 1];
        // Kept below 1e150 so the complex normalization below cannot overflow.
        if f[l - 1].norm() > 1e100 {
            for v in f[l - 1..].iter_mut() {
                *v *= 1e-100;
            }
        }
    }
    let i0 = if x.norm() < 1e-3 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    };
    let i1 = if x.norm() < 1e-2 {
        let x2 = x * x;
        x / 3.0 * (1.0 + x2 / 10.0 + x2 * x2 / 280.0)
    } else {
        (x * x.cosh() - x.sinh()) / (x * x)
    };
    let scale = if i0.norm() >= i1.norm() { i0 / f[0] } else { i1 / f[1] };
    f.truncate(lmax + 1);
    f.iter().map(|v| v * scale).collect()
}

/// Modified spherical Bessel k_0..k_lmax at complex x != 0, normalized as
/// k_0 = e^{-x}/x, so that e^{-s|x-y|}/|x-y| = s sum (2l+1) i_l k_l P_l.
pub fn sph_k(lmax: usize, x: c64) -> Vec<c64> {
    let mut k = vec![c64::new(0.0, 0.0); lmax + 1];
    let e = (-x).exp() / x;
    k[0] = e;
    if lmax >= 1 {
        k[1] = e * (1.0 + 1.0 / x);
    }
    for l in 1..lmax {
        k[l + 1] = k[l - 1] + k[l] * ((2 * l + 1) as f64) / x;
    }
    k
}

/// Derivatives i_l'(x), l = 0..lmax.
pub fn sph_i_derivative(lmax: usize, x: c64) -> Vec<c64> {
    let i = sph_i(lmax + 1, x);
    (0..=lmax)
        .map(|l| if l == 0 { i[1] } else { i[l - 1] - i[l] * ((l + 1) as f64) / x })
        .collect()
}

/// Derivatives k_l'(x), l = 0..lmax.
pub fn sph_k_derivative(lmax: usize, x: c64) -> Vec<c64> {
    let k = sph_k(lmax + 1, x);
    (0..=lmax)
        .map(|l| if l == 0 { -k[1] } else { -k[l - 1] - k[l] * ((l + 1) as f64) / x })
        .collect()
}
