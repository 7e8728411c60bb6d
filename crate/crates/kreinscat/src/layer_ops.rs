//! Free single- and double-layer operators for -Δ + z on a triangulated surface.

use faer::Mat;
use num_complex::Complex64 as c64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::mesh::v3::*;
use crate::mesh::{Point, SurfaceMesh, TriGeom, TRI_RULE};
use crate::quadrature::{integrate_near, integrate_rule, subdivided_rule, NearRule};

/// Side of the cut (-inf, 0) from which a boundary value is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitSide {
    Plus,
    Minus,
}

/// Spectral parameter: either a point of the resolvent set or a boundary
/// value lambda +- i0 on the continuous spectrum (-inf, 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralParam {
    Interior(c64),
    Boundary { lambda: f64, side: LimitSide },
}

impl SpectralParam {
    pub fn interior(z: c64) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) || (z.im == 0.0 && z.re <= 0.0) {
            return Err(Error::InvalidInput(format!("z = {z} lies on the cut (-inf, 0]")));
        }
        Ok(SpectralParam::Interior(z))
    }

    pub fn real(z: f64) -> Result<Self> {
        Self::interior(c64::new(z, 0.0))
    }

    pub fn boundary(lambda: f64, side: LimitSide) -> Result<Self> {
        if !(lambda < 0.0) {
            return Err(Error::InvalidInput(format!("boundary value needs lambda < 0, got {lambda}")));
        }
        Ok(SpectralParam::Boundary { lambda, side })
    }

    pub fn value(&self) -> c64 {
        match *self {
            SpectralParam::Interior(z) => z,
            SpectralParam::Boundary { lambda, .. } => c64::new(lambda, 0.0),
        }
    }

    /// Principal square root, continued to the cut: sqrt(lambda +- i0) = +-i k.
    pub fn sqrt(&self) -> c64 {
        match *self {
            SpectralParam::Interior(z) => z.sqrt(),
            SpectralParam::Boundary { lambda, side } => {
                let k = (-lambda).sqrt();
                match side {
                    LimitSide::Plus => c64::new(0.0, k),
                    LimitSide::Minus => c64::new(0.0, -k),
                }
            }
        }
    }

    pub fn conj(&self) -> Self {
        match *self {
            SpectralParam::Interior(z) => SpectralParam::Interior(z.conj()),
            SpectralParam::Boundary { lambda, side } => SpectralParam::Boundary {
                lambda,
                side: if side == LimitSide::Plus { LimitSide::Minus } else { LimitSide::Plus },
            },
        }
    }

    /// Wavenumber |lambda|^{1/2} for boundary values.
    pub fn k(&self) -> Option<f64> {
        match *self {
            SpectralParam::Boundary { lambda, .. } => Some((-lambda).sqrt()),
            SpectralParam::Interior(_) => None,
        }
    }

    pub fn kernel(&self) -> Kernel {
        Kernel { s: self.sqrt() }
    }
}

/// Radial kernel e^{-s r}/(4 pi r) and the radial factors of its derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Kernel {
    pub s: c64,
}

impl Kernel {
    #[inline]
    pub fn g(&self, r: f64) -> c64 {
        (-self.s * r).exp() / (4.0 * PI * r)
    }

    /// (g, G1, G2) with grad_x g = -G1 (x - y) and grad_x G1 = -G2 (x - y).
    #[inline]
    pub fn g012(&self, r: f64) -> (c64, c64, c64) {
        let e = (-self.s * r).exp() / (4.0 * PI);
        let sr = self.s * r;
        let ir = 1.0 / r;
        let ir2 = ir * ir;
        let g = e * ir;
        let g1 = e * (1.0 + sr) * ir2 * ir;
        let g2 = e * (3.0 + 3.0 * sr + sr * sr) * ir2 * ir2 * ir;
        (g, g1, g2)
    }
}

/// e^{-sqrt(z)|x-y|}/(4 pi |x-y|), principal branch.
pub fn green_kernel(z: &SpectralParam, x: Point, y: Point) -> Result<c64> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(z.kernel().g(r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    P0,
    P1,
}

impl Space {
    pub fn dim(&self, mesh: &SurfaceMesh) -> usize {
        match self {
            Space::P0 => mesh.p0_dofs(),
            Space::P1 => mesh.p1_dofs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    S,
    D,
    Sv,
    Dv,
    LambdaHat,
    Coupling,
}

/// Dense Galerkin matrix over boundary degrees of freedom.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub matrix: CMat,
    pub row_space: Space,
    pub col_space: Space,
    pub z: SpectralParam,
    pub kind: OperatorKind,
}

impl BoundaryOperator {
    /// max |A - A^T| / max |A|.
    pub fn symmetry_defect(&self) -> f64 {
        let a = &self.matrix;
        let mut d: f64 = 0.0;
        let mut m: f64 = 0.0;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                d = d.max((a[(i, j)] - a[(j, i)]).norm());
                m = m.max(a[(i, j)].norm());
            }
        }
        d / m.max(f64::MIN_POSITIVE)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    SL,
    DL,
}

/// Targets closer than this many triangle diameters use the polar rule.
pub(crate) const NEAR_FACTOR: f64 = 2.0;

/// Pairs of triangles that share at least one vertex (including self pairs).
fn touching_pairs(mesh: &SurfaceMesh) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); mesh.num_triangles()];
    for (a, t) in mesh.triangles().iter().enumerate() {
        for &v in t {
            for &b in mesh.vertex_triangles(v) {
                if !out[a].contains(&b) {
                    out[a].push(b);
                }
            }
        }
    }
    out
}

/// I_ij = int_Ta int_Tb g(x, y) l_i(x) l_j(y) for the barycentric functions.
fn pair_moments(k: &Kernel, ta: &TriGeom, tb: &TriGeom, touching: bool, outer_fine: &[([f64; 3], f64)], inner_fine: &[([f64; 3], f64)], near: &NearRule) -> [[c64; 3]; 3] {
    let centroid_gap = dist(ta.centroid, tb.centroid);
    let is_near = centroid_gap < NEAR_FACTOR * ta.diam.max(tb.diam);
    let outer: &[([f64; 3], f64)] = if touching { outer_fine } else { &TRI_RULE };
    let mut m = [[c64::new(0.0, 0.0); 3]; 3];
    for (bx, wx) in outer {
        let x = ta.point(*bx);
        let inner = if touching {
            integrate_near(tb, x, near, |y, by| {
                let g = k.g(dist(x, y));
                [g * by[0], g * by[1], g * by[2]]
            })
        } else {
            let rule: &[([f64; 3], f64)] = if is_near { inner_fine } else { &TRI_RULE };
            integrate_rule(tb, rule, |y, by| {
                let g = k.g(dist(x, y));
                [g * by[0], g * by[1], g * by[2]]
            })
        };
        let w = wx * ta.area;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += inner[j] * (w * bx[i]);
            }
        }
    }
    m
}

/// Galerkin S (P0 x P0) and D (P1 x P1, Maue form) in one sweep over pairs.
pub fn assemble_s_and_d(mesh: &SurfaceMesh, z: SpectralParam) -> (BoundaryOperator, BoundaryOperator) {
    let k = z.kernel();
    let zv = z.value();
    let nt = mesh.num_triangles();
    let nv = mesh.num_vertices();
    let touching = touching_pairs(mesh);
    let outer_fine = subdivided_rule(1);
    let inner_fine = subdivided_rule(1);
    let near = NearRule::default();
    let curls: Vec<[Point; 3]> = mesh
        .geoms()
        .iter()
        .map(|g| {
            let gr = g.barycentric_gradients();
            [cross(g.normal, gr[0]), cross(g.normal, gr[1]), cross(g.normal, gr[2])]
        })
        .collect();
    let mut s = Mat::<c64>::zeros(nt, nt);
    let mut d = Mat::<c64>::zeros(nv, nv);
    let tris = mesh.triangles();
    for a in 0..nt {
        let ta = mesh.geom(a);
        for b in a..nt {
            let tb = mesh.geom(b);
            let is_touching = touching[a].contains(&b);
            let mut m = pair_moments(&k, ta, tb, is_touching, &outer_fine, &inner_fine, &near);
            if a == b {
                for i in 0..3 {
                    for j in 0..i {
                        let avg = 0.5 * (m[i][j] + m[j][i]);
                        m[i][j] = avg;
                        m[j][i] = avg;
                    }
                }
            }
            let i0: c64 = m.iter().flatten().sum();
            s[(a, b)] = i0;
            s[(b, a)] = i0;
            let nn = dot(ta.normal, tb.normal);
            let mut block = [[c64::new(0.0, 0.0); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let cc = dot(curls[a][i], curls[b][j]);
                    block[i][j] = -(i0 * cc + zv * nn * m[i][j]);
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let (vi, vj) = (tris[a][i], tris[b][j]);
                    d[(vi, vj)] += block[i][j];
                    if a != b {
                        d[(vj, vi)] += block[i][j];
                    }
                }
            }
        }
    }
    let sop = BoundaryOperator { matrix: s, row_space: Space::P0, col_space: Space::P0, z, kind: OperatorKind::S };
    let dop = BoundaryOperator { matrix: d, row_space: Space::P1, col_space: Space::P1, z, kind: OperatorKind::D };
    (sop, dop)
}

/// Galerkin matrix <psi_i, S_z psi_j> on piecewise constants.
pub fn assemble_s(mesh: &SurfaceMesh, z: SpectralParam) -> BoundaryOperator {
    assemble_s_and_d(mesh, z).0
}

/// Galerkin matrix of D_z = gamma_1 DL_z on continuous piecewise linears.
pub fn assemble_d(mesh: &SurfaceMesh, z: SpectralParam) -> BoundaryOperator {
    assemble_s_and_d(mesh, z).1
}

/// Per-vertex integrals over one triangle of the SL or DL kernel seen from
/// `x`: entry i holds [value, d/dx, d/dy, d/dz] against the barycentric l_i.
pub(crate) fn triangle_layer_integrals(k: &Kernel, x: Point, t: &TriGeom, kind: LayerKind, gradient: bool, near: &NearRule) -> [[c64; 4]; 3] {
    let n = t.normal;
    let f = |y: Point, b: [f64; 3]| -> [c64; 12] {
        let d = sub(x, y);
        let r = norm(d);
        let zero = c64::new(0.0, 0.0);
        let (val, grad) = match kind {
            LayerKind::SL => {
                if gradient {
                    let (g, g1, _) = k.g012(r);
                    (g, [-g1 * d[0], -g1 * d[1], -g1 * d[2]])
                } else {
                    (k.g(r), [zero; 3])
                }
            }
            LayerKind::DL => {
                let (_, g1, g2) = k.g012(r);
                let dn = dot(d, n);
                let v = g1 * dn;
                if gradient {
                    let c = g2 * dn;
                    (v, [g1 * n[0] - c * d[0], g1 * n[1] - c * d[1], g1 * n[2] - c * d[2]])
                } else {
                    (v, [zero; 3])
                }
            }
        };
        let mut out = [zero; 12];
        for i in 0..3 {
            out[4 * i] = val * b[i];
            out[4 * i + 1] = grad[0] * b[i];
            out[4 * i + 2] = grad[1] * b[i];
            out[4 * i + 3] = grad[2] * b[i];
        }
        out
    };
    let acc = if dist(x, t.centroid) < NEAR_FACTOR * t.diam { integrate_near(t, x, near, f) } else { integrate_rule(t, &TRI_RULE, f) };
    let mut out = [[c64::new(0.0, 0.0); 4]; 3];
    for i in 0..3 {
        for c in 0..4 {
            out[i][c] = acc[4 * i + c];
        }
    }
    out
}

/// Potential value and gradient at a point.
#[derive(Clone, Copy, Debug)]
pub struct LayerField {
    pub value: c64,
    pub grad: [c64; 3],
}

impl LayerField {
    pub fn normal_derivative(&self, n: Point) -> c64 {
        self.grad[0] * n[0] + self.grad[1] * n[1] + self.grad[2] * n[2]
    }
}

fn check_points(mesh: &SurfaceMesh, points: &[Point]) -> Result<()> {
    for &x in points {
        let (d, t) = mesh.distance(x);
        let h = mesh.geom(t).diam;
        if d <= 0.5 * h {
            return Err(Error::PointTooClose { distance: d, h });
        }
    }
    Ok(())
}

fn check_density(mesh: &SurfaceMesh, kind: LayerKind, density: &[c64]) -> Result<()> {
    let want = match kind {
        LayerKind::SL => mesh.p0_dofs(),
        LayerKind::DL => mesh.p1_dofs(),
    };
    if density.len() != want {
        return Err(Error::InvalidInput(format!("density has {} entries, expected {want}", density.len())));
    }
    Ok(())
}

/// Layer potential and gradient at off-surface points. SL densities are P0,
/// DL densities are P1.
pub fn evaluate_layer_field(mesh: &SurfaceMesh, z: SpectralParam, density: &[c64], kind: LayerKind, points: &[Point]) -> Result<Vec<LayerField>> {
    check_density(mesh, kind, density)?;
    check_points(mesh, points)?;
    Ok(layer_field_unchecked(mesh, z, density, kind, points, true))
}

pub(crate) fn layer_field_unchecked(mesh: &SurfaceMesh, z: SpectralParam, density: &[c64], kind: LayerKind, points: &[Point], gradient: bool) -> Vec<LayerField> {
    let k = z.kernel();
    let near = NearRule::default();
    let tris = mesh.triangles();
    points
        .iter()
        .map(|&x| {
            let mut acc = [c64::new(0.0, 0.0); 4];
            for (ti, t) in mesh.geoms().iter().enumerate() {
                let local = triangle_layer_integrals(&k, x, t, kind, gradient, &near);
                for i in 0..3 {
                    let coef = match kind {
                        LayerKind::SL => density[ti],
                        LayerKind::DL => density[tris[ti][i]],
                    };
                    if coef == c64::new(0.0, 0.0) {
                        continue;
                    }
                    for c in 0..4 {
                        acc[c] += local[i][c] * coef;
                    }
                }
            }
            LayerField { value: acc[0], grad: [acc[1], acc[2], acc[3]] }
        })
        .collect()
}

/// Values u(x) = int kernel(x, y) density(y) (SL) or int d_nu(y) kernel density (DL).
pub fn evaluate_layer(mesh: &SurfaceMesh, z: SpectralParam, density: &[c64], kind: LayerKind, points: &[Point]) -> Result<Vec<c64>> {
    check_density(mesh, kind, density)?;
    check_points(mesh, points)?;
    Ok(layer_field_unchecked(mesh, z, density, kind, points, false).into_iter().map(|f| f.value).collect())
}

/// Probe points along the normal at each triangle centroid, at distances
/// d and 2d on both sides, d = PROBE_FRACTION * (longest edge).
#[derive(Clone, Debug)]
pub struct TraceProbe {
    pub points: Vec<Point>,
    normals: Vec<Point>,
}

/// One-sided traces at triangle centroids, by two-point linear extrapolation.
#[derive(Clone, Debug)]
pub struct SideTraces {
    pub gamma0_ex: Vec<c64>,
    pub gamma0_in: Vec<c64>,
    pub gamma1_ex: Vec<c64>,
    pub gamma1_in: Vec<c64>,
}

impl SideTraces {
    /// [gamma_0] = gamma_0^ex - gamma_0^in.
    pub fn jump0(&self) -> Vec<c64> {
        self.gamma0_ex.iter().zip(&self.gamma0_in).map(|(e, i)| e - i).collect()
    }

    /// [gamma_1] = gamma_1^ex - gamma_1^in, normal pointing into the exterior.
    pub fn jump1(&self) -> Vec<c64> {
        self.gamma1_ex.iter().zip(&self.gamma1_in).map(|(e, i)| e - i).collect()
    }
}

pub const PROBE_FRACTION: f64 = 0.25;

impl TraceProbe {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        Self::with_fraction(mesh, PROBE_FRACTION)
    }

    pub fn with_fraction(mesh: &SurfaceMesh, fraction: f64) -> Self {
        let mut points = Vec::with_capacity(4 * mesh.num_triangles());
        let mut normals = Vec::with_capacity(mesh.num_triangles());
        for g in mesh.geoms() {
            let h = fraction * g.diam;
            for s in [1.0, 2.0, -1.0, -2.0] {
                points.push(add(g.centroid, scale(g.normal, s * h)));
            }
            normals.push(g.normal);
        }
        TraceProbe { points, normals }
    }

    /// One-sided traces of a layer potential. Probe points sit inside the
    /// PointTooClose band, so they bypass that check.
    pub fn layer_traces(&self, mesh: &SurfaceMesh, z: SpectralParam, density: &[c64], kind: LayerKind) -> Result<SideTraces> {
        check_density(mesh, kind, density)?;
        Ok(self.traces(&layer_field_unchecked(mesh, z, density, kind, &self.points, true)))
    }

    /// Extrapolate fields sampled at `self.points` to both faces.
    pub fn traces(&self, fields: &[LayerField]) -> SideTraces {
        let n = self.normals.len();
        let mut tr = SideTraces { gamma0_ex: Vec::with_capacity(n), gamma0_in: Vec::with_capacity(n), gamma1_ex: Vec::with_capacity(n), gamma1_in: Vec::with_capacity(n) };
        for (t, nrm) in self.normals.iter().enumerate() {
            let f = &fields[4 * t..4 * t + 4];
            tr.gamma0_ex.push(2.0 * f[0].value - f[1].value);
            tr.gamma0_in.push(2.0 * f[2].value - f[3].value);
            tr.gamma1_ex.push(2.0 * f[0].normal_derivative(*nrm) - f[1].normal_derivative(*nrm));
            tr.gamma1_in.push(2.0 * f[2].normal_derivative(*nrm) - f[3].normal_derivative(*nrm));
        }
        tr
    }
}

/// L2(Gamma) norm of a centroid-sampled trace.
pub fn trace_norm(mesh: &SurfaceMesh, a: &[c64]) -> f64 {
    mesh.geoms().iter().zip(a).map(|(g, v)| g.area * v.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative L2(Gamma) norm of `a - b` against `b`.
pub fn relative_trace_defect(mesh: &SurfaceMesh, a: &[c64], b: &[c64]) -> f64 {
    let diff: Vec<c64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    trace_norm(mesh, &diff) / trace_norm(mesh, b).max(f64::MIN_POSITIVE)
}

/// Plane-wave pairing row: entries int psi_m e^{i k xi.y} (SL, P0) or
/// int phi_v i k (xi.nu) e^{i k xi.y} (DL, P1).
pub fn far_field_row(mesh: &SurfaceMesh, lambda: f64, xi: Point, kind: LayerKind) -> Result<Vec<c64>> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidInput(format!("far-field row needs lambda < 0, got {lambda}")));
    }
    let k = (-lambda).sqrt();
    let xi = unit(xi);
    let mut row = vec![c64::new(0.0, 0.0); match kind {
        LayerKind::SL => mesh.p0_dofs(),
        LayerKind::DL => mesh.p1_dofs(),
    }];
    for (t, g) in mesh.geoms().iter().enumerate() {
        let m = integrate_rule(g, &TRI_RULE, |y, b| {
            let e = c64::new(0.0, k * dot(xi, y)).exp();
            [e * b[0], e * b[1], e * b[2]]
        });
        match kind {
            LayerKind::SL => row[t] += m[0] + m[1] + m[2],
            LayerKind::DL => {
                let f = c64::new(0.0, k * dot(xi, g.normal));
                for i in 0..3 {
                    row[mesh.triangles()[t][i]] += f * m[i];
                }
            }
        }
    }
    Ok(row)
}
