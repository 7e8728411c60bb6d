//! Triangulated closed surfaces and direction quadrature on the unit sphere.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::special::gauss_legendre;

pub type Point = [f64; 3];

pub(crate) mod v3 {
    use super::Point;

    #[inline]
    pub fn sub(a: Point, b: Point) -> Point {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
    #[inline]
    pub fn add(a: Point, b: Point) -> Point {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }
    #[inline]
    pub fn scale(a: Point, s: f64) -> Point {
        [a[0] * s, a[1] * s, a[2] * s]
    }
    #[inline]
    pub fn dot(a: Point, b: Point) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }
    #[inline]
    pub fn cross(a: Point, b: Point) -> Point {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }
    #[inline]
    pub fn norm(a: Point) -> f64 {
        dot(a, a).sqrt()
    }
    #[inline]
    pub fn dist(a: Point, b: Point) -> f64 {
        norm(sub(a, b))
    }
    #[inline]
    pub fn unit(a: Point) -> Point {
        scale(a, 1.0 / norm(a))
    }
    /// a + s (b - a)
    #[inline]
    pub fn lerp(a: Point, b: Point, s: f64) -> Point {
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
    }
}

use v3::*;

pub const MAX_LEVEL: usize = 7;

/// Symmetric 7-point degree-5 rule: barycentric coordinates and weights
/// relative to the triangle area.
pub const TRI_RULE: [([f64; 3], f64); 7] = {
    // (6 -+ sqrt 15)/21 and (9 +- 2 sqrt 15)/21, weights (155 -+ sqrt 15)/1200.
    const A1: f64 = 0.101_286_507_323_456_34;
    const B1: f64 = 0.797_426_985_353_087_3;
    const A2: f64 = 0.470_142_064_105_115_1;
    const B2: f64 = 0.059_715_871_789_769_82;
    const W1: f64 = 0.125_939_180_544_827_15;
    const W2: f64 = 0.132_394_152_788_506_2;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([B1, A1, A1], W1),
        ([A1, B1, A1], W1),
        ([A1, A1, B1], W1),
        ([B2, A2, A2], W2),
        ([A2, B2, A2], W2),
        ([A2, A2, B2], W2),
    ]
};

/// Flat triangle geometry used by the quadrature routines.
#[derive(Clone, Copy, Debug)]
pub struct TriGeom {
    pub v: [Point; 3],
    pub normal: Point,
    pub area: f64,
    pub centroid: Point,
    /// Longest edge.
    pub diam: f64,
}

impl TriGeom {
    pub fn new(v: [Point; 3]) -> Self {
        let c = cross(sub(v[1], v[0]), sub(v[2], v[0]));
        let twice = norm(c);
        let centroid = scale(add(add(v[0], v[1]), v[2]), 1.0 / 3.0);
        let diam = dist(v[0], v[1]).max(dist(v[1], v[2])).max(dist(v[2], v[0]));
        TriGeom { v, normal: scale(c, 1.0 / twice), area: 0.5 * twice, centroid, diam }
    }

    #[inline]
    pub fn point(&self, b: [f64; 3]) -> Point {
        let v = &self.v;
        [
            b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
            b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
            b[0] * v[0][2] + b[1] * v[1][2] + b[2] * v[2][2],
        ]
    }

    /// Barycentric coordinates of the projection of `y` onto the plane.
    #[inline]
    pub fn barycentric(&self, y: Point) -> [f64; 3] {
        let e1 = sub(self.v[1], self.v[0]);
        let e2 = sub(self.v[2], self.v[0]);
        let d = sub(y, self.v[0]);
        let (a11, a12, a22) = (dot(e1, e1), dot(e1, e2), dot(e2, e2));
        let (r1, r2) = (dot(d, e1), dot(d, e2));
        let det = a11 * a22 - a12 * a12;
        let l1 = (a22 * r1 - a12 * r2) / det;
        let l2 = (a11 * r2 - a12 * r1) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Surface gradients of the three barycentric functions.
    pub fn barycentric_gradients(&self) -> [Point; 3] {
        let n = self.normal;
        let inv = 1.0 / (2.0 * self.area);
        let mut g = [[0.0; 3]; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let (a, b) = (self.v[(i + 1) % 3], self.v[(i + 2) % 3]);
            *gi = scale(cross(n, sub(b, a)), inv);
        }
        g
    }

    /// Euclidean distance from `x` to the closed triangle.
    pub fn distance(&self, x: Point) -> f64 {
        dist(x, closest_point(self, x))
    }
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
fn closest_point(t: &TriGeom, p: Point) -> Point {
    let [a, b, c] = t.v;
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return lerp(a, b, d1 / (d1 - d3));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return lerp(a, c, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return lerp(b, c, (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    add(a, add(scale(ab, vb * denom), scale(ac, vc * denom)))
}

/// Closed, consistently oriented triangulated surface.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    geoms: Vec<TriGeom>,
    /// Quadrature points (7 per triangle, row-major by triangle).
    quad_points: Vec<Point>,
    quad_weights: Vec<f64>,
    /// Triangles incident to each vertex.
    vertex_triangles: Vec<Vec<usize>>,
}

impl SurfaceMesh {
    /// Build from raw data, checking closedness and outward orientation.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &triangles {
            if t.iter().any(|&i| i >= nv) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidInput(format!("bad triangle {t:?}")));
            }
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                // +1 for a->b, -1 for b->a, keyed on the sorted pair.
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += if a < b { 1 } else { -1 };
            }
        }
        let mut uses: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if uses.values().any(|&u| u != 2) || edges.values().any(|&s| s != 0) {
            return Err(Error::InvalidInput("surface is not closed and consistently oriented".into()));
        }
        let geoms: Vec<TriGeom> = triangles.iter().map(|t| TriGeom::new([vertices[t[0]], vertices[t[1]], vertices[t[2]]])).collect();
        if geoms.iter().any(|g| !(g.area > 0.0)) {
            return Err(Error::InvalidInput("degenerate triangle".into()));
        }
        let mut quad_points = Vec::with_capacity(7 * geoms.len());
        let mut quad_weights = Vec::with_capacity(7 * geoms.len());
        for g in &geoms {
            for (b, w) in TRI_RULE.iter() {
                quad_points.push(g.point(*b));
                quad_weights.push(w * g.area);
            }
        }
        let mut vertex_triangles = vec![Vec::new(); nv];
        for (ti, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_triangles[v].push(ti);
            }
        }
        let mesh = SurfaceMesh { vertices, triangles, geoms, quad_points, quad_weights, vertex_triangles };
        if mesh.signed_volume() <= 0.0 {
            return Err(Error::InvalidInput("triangles are oriented inward".into()));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn geom(&self, t: usize) -> &TriGeom {
        &self.geoms[t]
    }

    pub fn geoms(&self) -> &[TriGeom] {
        &self.geoms
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// P0 dof count (one per triangle).
    pub fn p0_dofs(&self) -> usize {
        self.triangles.len()
    }

    /// P1 dof count (one per vertex).
    pub fn p1_dofs(&self) -> usize {
        self.vertices.len()
    }

    pub fn quad_points(&self, t: usize) -> &[Point] {
        &self.quad_points[7 * t..7 * t + 7]
    }

    pub fn quad_weights(&self, t: usize) -> &[f64] {
        &self.quad_weights[7 * t..7 * t + 7]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    pub fn edge_count(&self) -> usize {
        3 * self.triangles.len() / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    pub fn total_area(&self) -> f64 {
        self.geoms.iter().map(|g| g.area).sum()
    }

    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| dot(self.vertices[t[0]], cross(self.vertices[t[1]], self.vertices[t[2]])) / 6.0)
            .sum()
    }

    pub fn max_edge(&self) -> f64 {
        self.geoms.iter().map(|g| g.diam).fold(0.0, f64::max)
    }

    /// Distance from `x` to the surface and the nearest triangle.
    pub fn distance(&self, x: Point) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, g) in self.geoms.iter().enumerate() {
            // Bounding-sphere rejection before the exact test.
            let lower = dist(x, g.centroid) - g.diam;
            if lower > best.0 {
                continue;
            }
            let d = g.distance(x);
            if d < best.0 {
                best = (d, i);
            }
        }
        best
    }

    /// Area-weighted vertex normals (unit).
    pub fn vertex_normals(&self) -> Vec<Point> {
        let mut n = vec![[0.0; 3]; self.vertices.len()];
        for (t, g) in self.triangles.iter().zip(&self.geoms) {
            for &v in t {
                n[v] = add(n[v], scale(g.normal, g.area));
            }
        }
        n.into_iter().map(unit).collect()
    }

    /// Diagonal P0 mass matrix (triangle areas).
    pub fn p0_mass(&self) -> Vec<f64> {
        self.geoms.iter().map(|g| g.area).collect()
    }

    /// P1 mass matrix entries as (row, col, value) triples, weighted by a
    /// P1 function `w` (pass `None` for the plain mass matrix).
    pub fn p1_mass_weighted(&self, w: Option<&[f64]>) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(9 * self.triangles.len());
        for (t, g) in self.triangles.iter().zip(&self.geoms) {
            let wl = match w {
                Some(w) => [w[t[0]], w[t[1]], w[t[2]]],
                None => [1.0; 3],
            };
            for i in 0..3 {
                for j in 0..3 {
                    // Exact integral of l_i l_j l_k over the triangle: area * 2 a!b!c!/(a+b+c+2)!.
                    let mut s = 0.0;
                    for (k, wk) in wl.iter().enumerate() {
                        let mut pw = [0usize; 3];
                        pw[i] += 1;
                        pw[j] += 1;
                        pw[k] += 1;
                        let num: f64 = pw.iter().map(|&p| factorial(p)).product();
                        s += wk * 2.0 * num / factorial(5);
                    }
                    out.push((t[i], t[j], g.area * s));
                }
            }
        }
        out
    }

    /// Copy with every vertex mapped through `f`; normals and quadrature are recomputed.
    pub fn mapped(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        SurfaceMesh::from_parts(self.vertices.iter().map(|&p| f(p)).collect(), self.triangles.clone())
    }

    /// ASCII OFF export.
    pub fn to_off(&self) -> String {
        let mut s = String::new();
        writeln!(s, "OFF").unwrap();
        writeln!(s, "{} {} {}", self.vertices.len(), self.triangles.len(), self.edge_count()).unwrap();
        for p in &self.vertices {
            writeln!(s, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]).unwrap();
        }
        for t in &self.triangles {
            writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        s
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn icosahedron() -> (Vec<Point>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<Point> = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
    .into_iter()
    .map(unit)
    .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Icosphere of the given radius with 20 * 4^level triangles.
pub fn make_sphere(radius: f64, level: usize) -> Result<SurfaceMesh> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    if level > MAX_LEVEL {
        return Err(Error::InvalidInput(format!("level {level} exceeds the cap {MAX_LEVEL}")));
    }
    let (mut v, mut f) = icosahedron();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nf = Vec::with_capacity(4 * f.len());
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Point>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(unit(scale(add(v[a], v[b]), 0.5)));
                v.len() - 1
            })
        };
        for t in &f {
            let ab = midpoint(t[0], t[1], &mut v);
            let bc = midpoint(t[1], t[2], &mut v);
            let ca = midpoint(t[2], t[0], &mut v);
            nf.push([t[0], ab, ca]);
            nf.push([t[1], bc, ab]);
            nf.push([t[2], ca, bc]);
            nf.push([ab, bc, ca]);
        }
        f = nf;
    }
    let v = v.into_iter().map(|p| scale(p, radius)).collect();
    SurfaceMesh::from_parts(v, f)
}

/// Ellipsoid with the given semi-axes, by anisotropic scaling of the icosphere.
pub fn make_ellipsoid(semi_axes: [f64; 3], level: usize) -> Result<SurfaceMesh> {
    if semi_axes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidInput(format!("semi-axes must be positive, got {semi_axes:?}")));
    }
    make_sphere(1.0, level)?.mapped(|p| [p[0] * semi_axes[0], p[1] * semi_axes[1], p[2] * semi_axes[2]])
}

/// Directions on the unit sphere with positive weights summing to 4 pi.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    pub directions: Vec<Point>,
    pub weights: Vec<f64>,
    /// Index of -xi for each xi, when the set is centrally symmetric.
    antipodes: Option<Vec<usize>>,
}

impl DirectionSet {
    /// Arbitrary directions (normalized) with the given weights.
    pub fn new(directions: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if directions.len() != weights.len() || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("direction/weight mismatch or nonpositive weight".into()));
        }
        let directions: Vec<Point> = directions.into_iter().map(unit).collect();
        let antipodes = (0..directions.len())
            .map(|i| {
                let m = scale(directions[i], -1.0);
                directions.iter().position(|d| dist(*d, m) < 1e-12)
            })
            .collect::<Option<Vec<_>>>();
        Ok(DirectionSet { directions, weights, antipodes })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn antipode(&self, i: usize) -> Option<usize> {
        self.antipodes.as_ref().map(|a| a[i])
    }
}

/// Gauss-Legendre in cos(polar angle) times 2 n_polar uniform azimuths.
pub fn direction_quadrature(n_polar: usize) -> Result<DirectionSet> {
    if n_polar < 2 {
        return Err(Error::InvalidInput(format!("n_polar must be >= 2, got {n_polar}")));
    }
    let (t, w) = gauss_legendre(n_polar);
    let n_az = 2 * n_polar;
    let mut dirs = Vec::with_capacity(n_polar * n_az);
    let mut wts = Vec::with_capacity(n_polar * n_az);
    for (ct, wt) in t.iter().zip(&w) {
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        for j in 0..n_az {
            // Half-step offset keeps the grid free of the poles' azimuth ambiguity.
            let phi = 2.0 * PI * (j as f64 + 0.5) / n_az as f64;
            dirs.push([st * phi.cos(), st * phi.sin(), *ct]);
            wts.push(wt * 2.0 * PI / n_az as f64);
        }
    }
    DirectionSet::new(dirs, wts)
}
