//! Reference solutions on a sphere centered at the origin: layer-operator
//! eigenvalues, partial-wave S_l for every interface model with a radial
//! potential, and the first Born kernel.
//!
//! All S_l follow the crate's kernel convention: S_l = e^{-2i delta_l}, where
//! delta_l is the usual phase shift (u ~ sin(kr - l pi/2 + delta_l)).

use num_complex::Complex64 as c64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::interface_models::{InterfaceModel, Strength};
use crate::layer_ops::{LimitSide, SpectralParam};
use crate::potential_ops::PotentialSpec;
use crate::special::{gauss_legendre, gauss_legendre_on, legendre_all, riccati_j, riccati_y, sph_i, sph_i_derivative, sph_j, sph_k, sph_k_derivative};

/// Single-layer and hypersingular eigenvalues on the degree-l harmonics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerEigenvalues {
    pub s: c64,
    pub d: c64,
}

/// S_l = s a^2 i_l(sa) k_l(sa) and D_l = s^3 a^2 i_l'(sa) k_l'(sa), s = sqrt z.
/// The closed forms are checked against radial quadrature of the kernel.
pub fn sphere_layer_eigenvalues(a: f64, z: SpectralParam, ell_max: usize) -> Result<Vec<LayerEigenvalues>> {
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("sphere radius must be positive, got {a}")));
    }
    let closed = layer_closed_form(a, z.sqrt(), ell_max);
    let quad = layer_by_quadrature(a, z, ell_max);
    for (l, (c, q)) in closed.iter().zip(&quad).enumerate() {
        let scale = c.s.norm().max(1e-300);
        if (c.s - q.s).norm() > 1e-8 * scale || (c.d - q.d).norm() > 1e-7 * c.d.norm().max(scale) {
            return Err(Error::NumericalFailure(format!("layer eigenvalue check failed at l = {l}: {c:?} vs {q:?}")));
        }
    }
    Ok(closed)
}

fn layer_closed_form(a: f64, s: c64, ell_max: usize) -> Vec<LayerEigenvalues> {
    let x = s * a;
    let i = sph_i(ell_max, x);
    let k = sph_k(ell_max, x);
    let di = sph_i_derivative(ell_max, x);
    let dk = sph_k_derivative(ell_max, x);
    (0..=ell_max).map(|l| LayerEigenvalues { s: s * a * a * i[l] * k[l], d: s * s * s * a * a * di[l] * dk[l] }).collect()
}

/// S_l = a int_0^1 e^{-2 s a u} P_l(1 - 2u^2) du (Funk-Hecke with t = 1 - 2u^2),
/// and D_l from the Maue identity
/// D_l = -l(l+1)/a^2 S_l - z ((l+1) S_{l+1} + l S_{l-1}) / (2l+1).
pub fn layer_by_quadrature(a: f64, z: SpectralParam, ell_max: usize) -> Vec<LayerEigenvalues> {
    let s = z.sqrt();
    let zv = z.value();
    let panels = 8 + (s.norm() * a) as usize;
    let mut sl = vec![c64::new(0.0, 0.0); ell_max + 2];
    for p in 0..panels {
        let (u0, u1) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        let (x, w) = gauss_legendre_on(24 + ell_max, u0, u1);
        for (u, wu) in x.iter().zip(&w) {
            let e = (-s * (2.0 * a * u)).exp() * (a * wu);
            let pl = legendre_all(ell_max + 1, 1.0 - 2.0 * u * u);
            for l in 0..=ell_max + 1 {
                sl[l] += e * pl[l];
            }
        }
    }
    (0..=ell_max)
        .map(|l| {
            let lf = l as f64;
            let lower = if l == 0 { c64::new(0.0, 0.0) } else { sl[l - 1] * lf };
            let d = -(lf * (lf + 1.0)) / (a * a) * sl[l] - zv * ((lf + 1.0) * sl[l + 1] + lower) / (2.0 * lf + 1.0);
            LayerEigenvalues { s: sl[l], d }
        })
        .collect()
}

/// S_l for v = 0 built from the layer eigenvalues at lambda + i0:
/// S_l = 1 - 2ik a^2 j_l(ka)^2 Λ̂_l (P0 models) or
/// S_l = 1 - 2ik a^2 k^2 j_l'(ka)^2 Λ̂_l (P1 models).
pub fn closed_form_free(a: f64, model: &InterfaceModel, lambda: f64, ell_max: usize) -> Result<Vec<c64>> {
    let z = SpectralParam::boundary(lambda, LimitSide::Plus)?;
    let k = (-lambda).sqrt();
    let eig = sphere_layer_eigenvalues(a, z, ell_max)?;
    let j = sph_j(ell_max + 1, k * a);
    let one = c64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(ell_max + 1);
    for l in 0..=ell_max {
        let jl = j[l];
        let djl = if l == 0 { -j[1] } else { j[l - 1] - (l as f64 + 1.0) / (k * a) * jl };
        let (lam_hat, overlap) = match model {
            InterfaceModel::NoInterface => (c64::new(0.0, 0.0), 0.0),
            InterfaceModel::Delta(s) => {
                let al = constant_strength(s)?;
                (al / (one - al * eig[l].s), jl * jl)
            }
            InterfaceModel::Dirichlet => (-one / eig[l].s, jl * jl),
            InterfaceModel::Neumann => (-one / eig[l].d, k * k * djl * djl),
            InterfaceModel::DeltaPrime(s) => {
                let th = constant_strength(s)?;
                (one / (th - eig[l].d), k * k * djl * djl)
            }
        };
        out.push(one - c64::new(0.0, 2.0 * k * a * a * overlap) * lam_hat);
    }
    Ok(out)
}

fn constant_strength(s: &Strength) -> Result<f64> {
    match s {
        Strength::Constant(a) => Ok(*a),
        Strength::PerVertex(_) => Err(Error::InvalidInput("the oracle needs a constant interface strength".into())),
    }
}

/// Radial solution data for one l.
#[derive(Clone, Debug)]
pub struct RadialSolution {
    pub ell: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// u'/u just inside and just outside r = a (None where not defined).
    pub log_derivative_in: Option<f64>,
    pub log_derivative_out: f64,
    pub delta: f64,
    pub s: c64,
}

struct Radial<'a> {
    ell: usize,
    k2: f64,
    v: Option<&'a PotentialSpec>,
}

impl Radial<'_> {
    fn f(&self, r: f64) -> f64 {
        let l = self.ell as f64;
        let v = self.v.map_or(0.0, |p| p.radial(r));
        l * (l + 1.0) / (r * r) - self.k2 - v
    }

    /// RK4 for u'' = f(r) u on [r0, r1], recording samples.
    fn integrate(&self, r0: f64, r1: f64, mut y: [f64; 2], h_max: f64, out: &mut (Vec<f64>, Vec<f64>)) -> Result<[f64; 2]> {
        let mut r = r0;
        let rhs = |r: f64, y: [f64; 2]| [y[1], self.f(r) * y[0]];
        while r < r1 {
            let h = h_max.min(0.02 * r).min(r1 - r);
            let h = if r1 - (r + h) < 1e-12 * r1 { r1 - r } else { h };
            let k1 = rhs(r, y);
            let k2 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            r += h;
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::StiffIntegration { ell: self.ell, r });
            }
            let m = y[0].abs().max(y[1].abs());
            if m > 1e100 {
                y = [y[0] / m, y[1] / m];
                for s in out.1.iter_mut() {
                    *s /= m;
                }
            }
            out.0.push(r);
            out.1.push(y[0]);
        }
        Ok(y)
    }
}

/// Regular solution on [0, a] normalized by r0^{l+1}; returns (u, u') at a.
fn interior(rad: &Radial, a: f64, k: f64, h_r: f64, r_v: f64, out: &mut (Vec<f64>, Vec<f64>)) -> Result<[f64; 2]> {
    if r_v <= 0.0 {
        let (u, du) = riccati_j(rad.ell, k * a);
        out.0.push(a);
        out.1.push(u);
        return Ok([u, k * du]);
    }
    let l = rad.ell as f64;
    let v0 = rad.v.map_or(0.0, |p| p.radial(0.0));
    let r0 = 1e-4 * a.min(r_v);
    let c = -(rad.k2 + v0) / (2.0 * (2.0 * l + 3.0));
    let y0 = [1.0 + c * r0 * r0, (l + 1.0) / r0 + (l + 3.0) * c * r0];
    out.0.push(r0);
    out.1.push(y0[0]);
    let rv = r_v.min(a);
    let y = rad.integrate(r0, rv, y0, h_r, out)?;
    if rv < a {
        // Free continuation: u = A j^ + B y^ matched at r_v.
        let (p, q) = free_coefficients(rad.ell, k, rv, y);
        let (j, dj) = riccati_j(rad.ell, k * a);
        let (n, dn) = riccati_y(rad.ell, k * a);
        return Ok([p * j + q * n, k * (p * dj + q * dn)]);
    }
    let _ = k;
    Ok(y)
}

/// (p, q) with u = p j^(kr) + q y^(kr) through the data y at r.
fn free_coefficients(ell: usize, k: f64, r: f64, y: [f64; 2]) -> (f64, f64) {
    let (j, dj) = riccati_j(ell, k * r);
    let (n, dn) = riccati_y(ell, k * r);
    // Wronskian j^ y^' - j^' y^ = 1.
    let p = (y[0] * k * dn - y[1] * n) / k;
    let q = (y[1] * j - y[0] * k * dj) / k;
    (p, q)
}

/// Partial-wave S_l for a sphere of radius `a` centered at the origin, the
/// interface `model` (constant strength) and a radial potential centered at
/// the origin. The exterior trace data at r = a+ follow from
/// Dirichlet u = 0; Neumann R' = 0; δ u'(a+) - u'(a-) = -α u(a);
/// δ' R' continuous with R'(a) = θ (R(a+) - R(a-)).
pub fn partial_wave_model(a: f64, model: &InterfaceModel, v: Option<&PotentialSpec>, lambda: f64, ell_max: usize) -> Result<Vec<c64>> {
    Ok(partial_wave_solutions(a, model, v, lambda, ell_max)?.into_iter().map(|s| s.s).collect())
}

pub fn partial_wave_solutions(a: f64, model: &InterfaceModel, v: Option<&PotentialSpec>, lambda: f64, ell_max: usize) -> Result<Vec<RadialSolution>> {
    if !(lambda < 0.0) || !(a > 0.0) {
        return Err(Error::InvalidInput(format!("need lambda < 0 and a > 0, got lambda = {lambda}, a = {a}")));
    }
    if let Some(p) = v {
        if p.center != [0.0; 3] {
            return Err(Error::InvalidInput("the partial-wave oracle needs a potential centered at the sphere center".into()));
        }
    }
    let k = (-lambda).sqrt();
    let r_v = v.map_or(0.0, |p| p.support_radius);
    let h_r = if r_v > 0.0 { (1.0 / (20.0 * k)).min(r_v / 200.0) } else { 1.0 / (20.0 * k) };
    let mut out = Vec::with_capacity(ell_max + 1);
    for ell in 0..=ell_max {
        let rad = Radial { ell, k2: k * k, v };
        let mut samples = (Vec::new(), Vec::new());
        let (ext, log_in) = match model {
            InterfaceModel::Dirichlet => ([0.0, 1.0], None),
            InterfaceModel::Neumann => ([1.0, 1.0 / a], None),
            _ => {
                let y = interior(&rad, a, k, h_r, r_v, &mut samples)?;
                let li = Some(y[1] / y[0]);
                let e = match model {
                    InterfaceModel::NoInterface => y,
                    InterfaceModel::Delta(s) => {
                        let al = constant_strength(s)?;
                        [y[0], y[1] - al * y[0]]
                    }
                    InterfaceModel::DeltaPrime(s) => {
                        let th = constant_strength(s)?;
                        // P = a R'(a); scaled by θ to stay finite at θ = 0.
                        let p = y[1] - y[0] / a;
                        let up = th * y[0] + p;
                        [up, th * p + up / a]
                    }
                    _ => unreachable!(),
                };
                (e, li)
            }
        };
        let y = if r_v > a { rad.integrate(a, r_v, ext, h_r, &mut samples)? } else { ext };
        let r_m = r_v.max(a);
        let (p, q) = free_coefficients(ell, k, r_m, y);
        // u = p j^ + q y^ = A (j^ cos δ - y^ sin δ).
        let delta = (-q).atan2(p);
        let s = c64::new(0.0, -2.0 * delta).exp();
        out.push(RadialSolution { ell, r: samples.0, u: samples.1, log_derivative_in: log_in, log_derivative_out: ext[1] / ext[0], delta, s });
    }
    Ok(out)
}

/// First Born kernel in the S-matrix convention of `smatrix`:
/// K_B(θ) = -(ik / 2π) int_0^R v(r) r^2 sinc(q r) dr, q = 2k sin(θ/2).
pub fn born_amplitude(v: &PotentialSpec, lambda: f64, theta_sc: f64) -> Result<c64> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidInput(format!("need lambda < 0, got {lambda}")));
    }
    let k = (-lambda).sqrt();
    let q = 2.0 * k * (0.5 * theta_sc).sin();
    let rmax = v.support_radius;
    let panels = 64;
    let (x, w) = gauss_legendre(16);
    let mut acc = 0.0;
    for p in 0..panels {
        let (r0, r1) = (rmax * p as f64 / panels as f64, rmax * (p + 1) as f64 / panels as f64);
        let (m, h) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
        for (t, wt) in x.iter().zip(&w) {
            let r = m + h * t;
            let qr = q * r;
            let sinc = if qr.abs() < 1e-8 { 1.0 } else { qr.sin() / qr };
            acc += wt * h * v.radial(r) * r * r * sinc;
        }
    }
    Ok(c64::new(0.0, -k / (2.0 * PI)) * acc)
}
