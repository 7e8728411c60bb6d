//! Triangle quadrature for smooth and nearly singular integrands.
//!
//! Near-field integrals are computed in polar coordinates about the
//! projection p of the target onto the triangle plane. The triangle is split
//! into the three (signed) sub-triangles (p, A, B). Along each edge the angle
//! is replaced by w = asinh(tau / d_e), which removes the 1/cos blow-up of the
//! ray length, and the radial variable is rho = |h| sinh t when the target is
//! off the plane, which absorbs the 1/r and h/r^3 behaviour.

use num_complex::Complex64 as c64;

use crate::mesh::v3::*;
use crate::mesh::{Point, TriGeom, TRI_RULE};
use crate::special::gauss_legendre;

/// Barycentric rule obtained by splitting the triangle `levels` times into four.
pub fn subdivided_rule(levels: usize) -> Vec<([f64; 3], f64)> {
    let mut tris: Vec<[[f64; 3]; 3]> = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(4 * tris.len());
        for t in &tris {
            let m = |a: [f64; 3], b: [f64; 3]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
            let (ab, bc, ca) = (m(t[0], t[1]), m(t[1], t[2]), m(t[2], t[0]));
            next.push([t[0], ab, ca]);
            next.push([ab, t[1], bc]);
            next.push([ca, bc, t[2]]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    let scale = 1.0 / tris.len() as f64;
    let mut out = Vec::with_capacity(7 * tris.len());
    for t in &tris {
        for (b, w) in TRI_RULE.iter() {
            let p = [
                b[0] * t[0][0] + b[1] * t[1][0] + b[2] * t[2][0],
                b[0] * t[0][1] + b[1] * t[1][1] + b[2] * t[2][1],
                b[0] * t[0][2] + b[1] * t[1][2] + b[2] * t[2][2],
            ];
            out.push((p, w * scale));
        }
    }
    out
}

/// Integrate `f` over a triangle with a barycentric rule (weights relative to area).
#[inline]
pub fn integrate_rule<const K: usize>(t: &TriGeom, rule: &[([f64; 3], f64)], mut f: impl FnMut(Point, [f64; 3]) -> [c64; K]) -> [c64; K] {
    let mut acc = [c64::new(0.0, 0.0); K];
    for (b, w) in rule {
        let v = f(t.point(*b), *b);
        let wa = w * t.area;
        for k in 0..K {
            acc[k] += v[k] * wa;
        }
    }
    acc
}

/// Gauss orders for the polar near-field integrator.
#[derive(Clone, Debug)]
pub struct NearRule {
    w: (Vec<f64>, Vec<f64>),
    r: (Vec<f64>, Vec<f64>),
}

impl NearRule {
    pub fn new(n_angle: usize, n_radial: usize) -> Self {
        NearRule { w: gauss_legendre(n_angle), r: gauss_legendre(n_radial) }
    }
}

impl Default for NearRule {
    fn default() -> Self {
        NearRule::new(10, 8)
    }
}

/// Integrate `f(y, bary(y))` over the triangle for an integrand that may be
/// singular like 1/r, h/r^3 or 1/r^2 at the target `x`.
pub fn integrate_near<const K: usize>(t: &TriGeom, x: Point, rule: &NearRule, mut f: impl FnMut(Point, [f64; 3]) -> [c64; K]) -> [c64; K] {
    let n = t.normal;
    let h = dot(sub(x, t.v[0]), n);
    let p = sub(x, scale(n, h));
    let ah = h.abs();
    let tiny = 1e-12 * t.diam;
    let mut acc = [c64::new(0.0, 0.0); K];
    for e in 0..3 {
        let a = t.v[e];
        let b = t.v[(e + 1) % 3];
        let orient = dot(cross(sub(a, p), sub(b, p)), n);
        if orient.abs() < tiny * t.diam {
            continue;
        }
        let sign = orient.signum();
        let ed = sub(b, a);
        let elen = norm(ed);
        let ut = scale(ed, 1.0 / elen);
        let foot = add(a, scale(ut, dot(sub(p, a), ut)));
        let to_foot = sub(foot, p);
        let de = norm(to_foot);
        if de < tiny {
            continue;
        }
        let un = scale(to_foot, 1.0 / de);
        let ta = dot(sub(a, foot), ut);
        let tb = dot(sub(b, foot), ut);
        let (wa, wb) = ((ta / de).asinh(), (tb / de).asinh());
        for (w0, w1) in panels(wa, wb, 2.5) {
            let (wm, wh) = (0.5 * (w0 + w1), 0.5 * (w1 - w0));
            for (xw, ww) in self_zip(&rule.w) {
                let w = wm + wh * xw;
                let (sh, ch) = (w.sinh(), w.cosh());
                let dir = scale(add(un, scale(ut, sh)), 1.0 / ch);
                let rmax = de * ch;
                // d(theta) = dw / cosh(w)
                let wang = sign * ww * wh / ch;
                if ah <= tiny {
                    let half = 0.5 * rmax;
                    for (xr, wr) in self_zip(&rule.r) {
                        let rho = half * (1.0 + xr);
                        let y = add(p, scale(dir, rho));
                        let v = f(y, t.barycentric(y));
                        let jw = wang * wr * half * rho;
                        for k in 0..K {
                            acc[k] += v[k] * jw;
                        }
                    }
                } else {
                    let tmax = (rmax / ah).asinh();
                    for (t0, t1) in radial_panels(tmax) {
                        let (tm, th) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
                        for (xr, wr) in self_zip(&rule.r) {
                            let tt = tm + th * xr;
                            let (st, ct) = (tt.sinh(), tt.cosh());
                            let rho = ah * st;
                            let y = add(p, scale(dir, rho));
                            let v = f(y, t.barycentric(y));
                            // rho d(rho) = h^2 sinh t cosh t dt
                            let jw = wang * wr * th * ah * ah * st * ct;
                            for k in 0..K {
                                acc[k] += v[k] * jw;
                            }
                        }
                    }
                }
            }
        }
    }
    acc
}

/// Equal panels of length at most `max_len` covering [a, b].
fn panels(a: f64, b: f64, max_len: f64) -> impl Iterator<Item = (f64, f64)> {
    let n = (((b - a) / max_len).ceil() as usize).max(1);
    let h = (b - a) / n as f64;
    (0..n).map(move |i| (a + i as f64 * h, if i + 1 == n { b } else { a + (i + 1) as f64 * h }))
}

/// Panels on [0, tmax] in the sinh variable: short near 0, then length 2.5.
fn radial_panels(tmax: f64) -> impl Iterator<Item = (f64, f64)> {
    let first = tmax.min(1.0);
    std::iter::once((0.0, first)).chain(panels(first, tmax, 2.5).filter(move |_| tmax > first))
}

#[inline]
fn self_zip(r: &(Vec<f64>, Vec<f64>)) -> impl Iterator<Item = (f64, f64)> + '_ {
    r.0.iter().copied().zip(r.1.iter().copied())
}
