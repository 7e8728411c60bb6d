//! Compactly supported potentials on a Cartesian cell grid, the
//! Lippmann-Schwinger operator Λ^v_z = v(1 - R_z v)^{-1}, and the dressed
//! layer operators obtained by coupling the grid to the surface.

use faer::Mat;
use num_complex::Complex64 as c64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::layer_ops::{assemble_s_and_d, layer_field_unchecked, BoundaryOperator, Kernel, LayerField, LayerKind, OperatorKind, SpectralParam, NEAR_FACTOR};
use crate::linalg::{CMat, Factorization, COND_LIMIT};
use crate::mesh::v3::*;
use crate::mesh::{Point, SurfaceMesh, TRI_RULE};
use crate::quadrature::{integrate_near, integrate_rule, NearRule};

/// Default cap on the number of grid cells.
pub const DEFAULT_MAX_CELLS: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialForm {
    /// depth * exp(-r^2 / sigma^2).
    Gaussian { depth: f64, sigma: f64 },
    /// Samples (r_i, v_i), r increasing, linearly interpolated.
    Table { r: Vec<f64>, v: Vec<f64> },
}

/// Radial potential about `center`, identically zero beyond `support_radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub form: PotentialForm,
    pub support_radius: f64,
    pub center: Point,
}

impl PotentialSpec {
    pub fn gaussian(depth: f64, sigma: f64, support_radius: f64, center: Point) -> Result<Self> {
        if !(sigma > 0.0) || !(support_radius > 0.0) || !depth.is_finite() {
            return Err(Error::InvalidInput(format!("bad Gaussian potential: depth {depth}, sigma {sigma}, support {support_radius}")));
        }
        Ok(PotentialSpec { form: PotentialForm::Gaussian { depth, sigma }, support_radius, center })
    }

    /// Table potential; the support ends at the last sample radius.
    pub fn table(r: Vec<f64>, v: Vec<f64>, center: Point) -> Result<Self> {
        if r.len() != v.len() || r.len() < 2 {
            return Err(Error::InvalidInput("potential table needs at least two (r, v) rows".into()));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("potential table radii must be nonnegative and increasing".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("potential table values must be finite".into()));
        }
        let support_radius = *r.last().unwrap();
        Ok(PotentialSpec { form: PotentialForm::Table { r, v }, support_radius, center })
    }

    /// Parse two whitespace-separated columns; `#` starts a comment.
    pub fn parse_table(text: &str, center: Point) -> Result<Self> {
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::InvalidInput(format!("potential table line {}: expected 2 columns", ln + 1)));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("potential table line {}: {e}", ln + 1)));
            r.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::table(r, v, center)
    }

    pub fn radial(&self, r: f64) -> f64 {
        if r > self.support_radius {
            return 0.0;
        }
        match &self.form {
            PotentialForm::Gaussian { depth, sigma } => depth * (-(r * r) / (sigma * sigma)).exp(),
            PotentialForm::Table { r: rs, v } => {
                if r <= rs[0] {
                    return v[0];
                }
                let i = rs.partition_point(|&x| x <= r).min(rs.len() - 1);
                let (r0, r1) = (rs[i - 1], rs[i]);
                let t = (r - r0) / (r1 - r0);
                v[i - 1] + t * (v[i] - v[i - 1])
            }
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        self.radial(dist(x, self.center))
    }
}

/// Cells of a uniform lattice through the potential's center whose centers
/// lie in the support and carry a nonzero sample.
#[derive(Clone, Debug)]
pub struct VolumeGrid {
    centers: Vec<Point>,
    v: Vec<f64>,
    h: f64,
}

impl VolumeGrid {
    pub fn new(spec: &PotentialSpec, h_vol: f64, max_cells: usize) -> Result<Self> {
        if !(h_vol > 0.0) {
            return Err(Error::InvalidInput(format!("h_vol must be positive, got {h_vol}")));
        }
        let n = (spec.support_radius / h_vol).floor() as i64;
        let mut centers = Vec::new();
        let mut v = Vec::new();
        for i in -n..=n {
            for j in -n..=n {
                for k in -n..=n {
                    let off = [i as f64 * h_vol, j as f64 * h_vol, k as f64 * h_vol];
                    if norm(off) > spec.support_radius {
                        continue;
                    }
                    let x = add(spec.center, off);
                    let val = spec.value(x);
                    if val != 0.0 {
                        if centers.len() == max_cells {
                            return Err(Error::InvalidInput(format!("volume grid exceeds {max_cells} cells; increase h_vol")));
                        }
                        centers.push(x);
                        v.push(val);
                    }
                }
            }
        }
        Ok(VolumeGrid { centers, v, h: h_vol })
    }

    /// Grid with no cells (v = 0).
    pub fn empty(h_vol: f64) -> Self {
        VolumeGrid { centers: Vec::new(), v: Vec::new(), h: h_vol }
    }

    pub fn from_cells(centers: Vec<Point>, v: Vec<f64>, h_vol: f64) -> Result<Self> {
        if centers.len() != v.len() || !(h_vol > 0.0) {
            return Err(Error::InvalidInput("cell centers and samples must match and h_vol > 0".into()));
        }
        Ok(VolumeGrid { centers, v, h: h_vol })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Radius of the ball with the cell's volume.
    pub fn ball_radius(&self) -> f64 {
        (3.0 * self.cell_volume() / (4.0 * PI)).cbrt()
    }
}

/// 3 (x cosh x - sinh x) / x^3, the ball average of e^{-s r} seen from outside.
fn ball_factor(x: c64) -> c64 {
    if x.norm() < 1e-2 {
        let x2 = x * x;
        1.0 + x2 / 10.0 + x2 * x2 / 280.0
    } else {
        3.0 * (x * x.cosh() - x.sinh()) / (x * x * x)
    }
}

fn sinhc(x: c64) -> c64 {
    if x.norm() < 1e-3 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// Kernel of R_z from a point to a cell: the cell volume times the mean of
/// g(x, .) over the equal-volume ball about the center. Returns the value and
/// its gradient in x.
pub(crate) fn cell_kernel(k: &Kernel, z: c64, rho: f64, vol: f64, d: Point) -> (c64, [c64; 3]) {
    let r = norm(d);
    let s = k.s;
    if r >= rho {
        let phi = ball_factor(s * rho) * vol;
        let (g, g1, _) = k.g012(r);
        let gr = -g1 * phi;
        (g * phi, [gr * d[0], gr * d[1], gr * d[2]])
    } else {
        let sr = s * rho;
        let c = (1.0 + sr) * (-sr).exp();
        let val = (1.0 - c * sinhc(s * r)) / z;
        // d/dr sinhc(s r) = s^2 r q(s r) with q = ball_factor / 3.
        let gr = -c * ball_factor(s * r) / 3.0;
        (val, [gr * d[0], gr * d[1], gr * d[2]])
    }
}

/// Nystrom matrix of R_z over cells: g vol off the diagonal, the ball
/// integral (1 - (1 + s rho) e^{-s rho}) / z on it.
pub fn assemble_volume_resolvent(grid: &VolumeGrid, z: SpectralParam) -> CMat {
    let k = z.kernel();
    let zv = z.value();
    let vol = grid.cell_volume();
    let rho = grid.ball_radius();
    let sr = k.s * rho;
    let diag = (1.0 - (1.0 + sr) * (-sr).exp()) / zv;
    let c = grid.centers();
    let n = c.len();
    let mut r = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = diag;
        for i in j + 1..n {
            let val = k.g(dist(c[i], c[j])) * vol;
            r[(i, j)] = val;
            r[(j, i)] = val;
        }
    }
    r
}

/// R_z on the grid with the factorization of 1 - R_z v, for one z.
pub struct VolumeOperator {
    pub z: SpectralParam,
    r: CMat,
    lu: Factorization,
    v: Vec<f64>,
    vol: f64,
    rho: f64,
    centers: Vec<Point>,
}

impl VolumeOperator {
    pub fn new(grid: &VolumeGrid, z: SpectralParam) -> Result<Self> {
        let r = assemble_volume_resolvent(grid, z);
        let n = grid.len();
        let v = grid.v();
        let a = Mat::<c64>::from_fn(n, n, |i, j| if i == j { 1.0 - r[(i, j)] * v[j] } else { -r[(i, j)] * v[j] });
        let lu = Factorization::checked(a.as_ref(), COND_LIMIT, |cond| Error::SingularLS { cond })?;
        Ok(VolumeOperator { z, r, lu, v: v.to_vec(), vol: grid.cell_volume(), rho: grid.ball_radius(), centers: grid.centers().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn cond(&self) -> f64 {
        self.lu.cond()
    }

    pub fn cell_volume(&self) -> f64 {
        self.vol
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn resolvent_matrix(&self) -> &CMat {
        &self.r
    }

    /// Λ^v u = v (1 - R v)^{-1} u, column by column.
    pub fn lambda_v(&self, u: &CMat) -> CMat {
        let mut w = self.lu.solve(u.as_ref());
        for j in 0..w.ncols() {
            for i in 0..w.nrows() {
                w[(i, j)] *= self.v[i];
            }
        }
        w
    }

    pub fn lambda_v_vec(&self, u: &[c64]) -> Vec<c64> {
        self.lu.solve_vec(u).iter().zip(&self.v).map(|(w, v)| w * *v).collect()
    }

    pub fn r_apply(&self, u: &[c64]) -> Vec<c64> {
        let n = self.len();
        let mut out = vec![c64::new(0.0, 0.0); n];
        for j in 0..n {
            let uj = u[j];
            if uj == c64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                out[i] += self.r[(i, j)] * uj;
            }
        }
        out
    }

    /// (R_z q)(x) and its gradient at an arbitrary point, cells seen as balls.
    pub fn cell_field(&self, q: &[c64], x: Point) -> LayerField {
        let k = self.z.kernel();
        let zv = self.z.value();
        let mut value = c64::new(0.0, 0.0);
        let mut grad = [c64::new(0.0, 0.0); 3];
        for (c, qc) in self.centers.iter().zip(q) {
            if *qc == c64::new(0.0, 0.0) {
                continue;
            }
            let (val, gr) = cell_kernel(&k, zv, self.rho, self.vol, sub(x, *c));
            value += val * qc;
            for a in 0..3 {
                grad[a] += gr[a] * qc;
            }
        }
        LayerField { value, grad }
    }

    /// R_z delta_x on the cells: the mean of g(., x) over each cell ball.
    pub fn point_column(&self, x: Point) -> Vec<c64> {
        let k = self.z.kernel();
        let zv = self.z.value();
        self.centers.iter().map(|c| cell_kernel(&k, zv, self.rho, self.vol, sub(*c, x)).0 / self.vol).collect()
    }
}

/// Λ^v_z u through the right factorization v (1 - R v)^{-1}.
pub fn lambda_v_apply(grid: &VolumeGrid, z: SpectralParam, u: &[c64]) -> Result<Vec<c64>> {
    Ok(VolumeOperator::new(grid, z)?.lambda_v_vec(u))
}

/// Λ^v_z u through the left factorization (1 - v R)^{-1} v.
pub fn lambda_v_apply_left(grid: &VolumeGrid, z: SpectralParam, u: &[c64]) -> Result<Vec<c64>> {
    let r = assemble_volume_resolvent(grid, z);
    let v = grid.v();
    let n = grid.len();
    let a = Mat::<c64>::from_fn(n, n, |i, j| if i == j { 1.0 - v[i] * r[(i, j)] } else { -v[i] * r[(i, j)] });
    let lu = Factorization::checked(a.as_ref(), COND_LIMIT, |cond| Error::SingularLS { cond })?;
    let vu: Vec<c64> = u.iter().zip(v).map(|(x, w)| x * *w).collect();
    Ok(lu.solve_vec(&vu))
}

/// Source for R^v_z: cell values (density on the grid) plus point sources.
#[derive(Clone, Debug, Default)]
pub struct Source {
    pub cells: Vec<c64>,
    pub points: Vec<(Point, c64)>,
}

impl Source {
    pub fn point(x: Point, amplitude: c64) -> Self {
        Source { cells: Vec::new(), points: vec![(x, amplitude)] }
    }
}

/// R^v_z f written as sum_p a_p g(., x_p) + R_z q with q on cells.
#[derive(Clone, Debug)]
pub struct VolumeField {
    pub points: Vec<(Point, c64)>,
    pub q: Vec<c64>,
}

impl VolumeField {
    pub fn eval(&self, op: &VolumeOperator, x: Point) -> Result<LayerField> {
        let k = op.z.kernel();
        let mut f = if op.is_empty() { LayerField { value: c64::new(0.0, 0.0), grad: [c64::new(0.0, 0.0); 3] } } else { op.cell_field(&self.q, x) };
        for (p, a) in &self.points {
            let d = sub(x, *p);
            let r = norm(d);
            if r == 0.0 {
                return Err(Error::CoincidentPoints);
            }
            let (g, g1, _) = k.g012(r);
            f.value += g * a;
            for c in 0..3 {
                f.grad[c] -= g1 * d[c] * a;
            }
        }
        Ok(f)
    }
}

/// Decompose R^v_z f = R_z f + R_z Λ^v_z R_z f.
pub fn schrodinger_resolvent(op: &VolumeOperator, f: &Source) -> Result<VolumeField> {
    let n = op.len();
    let mut q = if f.cells.is_empty() { vec![c64::new(0.0, 0.0); n] } else { f.cells.clone() };
    if q.len() != n {
        return Err(Error::InvalidInput(format!("cell source has {} entries, grid has {n}", q.len())));
    }
    if n > 0 {
        let mut rf = op.r_apply(&q);
        for (p, a) in &f.points {
            for (x, col) in rf.iter_mut().zip(op.point_column(*p)) {
                *x += col * a;
            }
        }
        for (qi, w) in q.iter_mut().zip(op.lambda_v_vec(&rf)) {
            *qi += w;
        }
    }
    Ok(VolumeField { points: f.points.clone(), q })
}

/// R^v_z f at cell centers (for cell sources) and at the given points.
pub fn schrodinger_resolvent_apply(op: &VolumeOperator, f: &Source, targets: &[Point]) -> Result<(Vec<c64>, Vec<c64>)> {
    let field = schrodinger_resolvent(op, f)?;
    let mut on_cells = op.r_apply(&field.q);
    for (p, a) in &field.points {
        for (x, col) in on_cells.iter_mut().zip(op.point_column(*p)) {
            *x += col * a;
        }
    }
    let at = targets.iter().map(|x| field.eval(op, *x).map(|f| f.value)).collect::<Result<Vec<_>>>()?;
    Ok((on_cells, at))
}

/// C0[c, m] = int_{T_m} g(x_c, y) dy and C1[c, v] = int d_nu(y) g(x_c, y) phi_v(y) dy.
pub struct Coupling {
    pub c0: CMat,
    pub c1: CMat,
}

pub fn coupling(mesh: &SurfaceMesh, centers: &[Point], z: SpectralParam) -> Coupling {
    let k = z.kernel();
    let near = NearRule::default();
    let nc = centers.len();
    let mut c0 = Mat::<c64>::zeros(nc, mesh.p0_dofs());
    let mut c1 = Mat::<c64>::zeros(nc, mesh.p1_dofs());
    let tris = mesh.triangles();
    for (ci, &x) in centers.iter().enumerate() {
        for (t, g) in mesh.geoms().iter().enumerate() {
            let n = g.normal;
            let f = |y: Point, b: [f64; 3]| -> [c64; 4] {
                let d = sub(x, y);
                let (gv, g1, _) = k.g012(norm(d));
                let dl = g1 * dot(d, n);
                [gv, dl * b[0], dl * b[1], dl * b[2]]
            };
            let m = if dist(x, g.centroid) < NEAR_FACTOR * g.diam { integrate_near(g, x, &near, f) } else { integrate_rule(g, &TRI_RULE, f) };
            c0[(ci, t)] = m[0];
            for i in 0..3 {
                c1[(ci, tris[t][i])] += m[1 + i];
            }
        }
    }
    Coupling { c0, c1 }
}

/// S^v = S + vol C0^T Λ^v C0 and D^v = D + vol C1^T Λ^v C1.
pub struct DressedOperators {
    pub sv: BoundaryOperator,
    pub dv: BoundaryOperator,
    pub coupling: Coupling,
}

pub fn dressed_boundary_operators(mesh: &SurfaceMesh, op: &VolumeOperator) -> DressedOperators {
    let (s, d) = assemble_s_and_d(mesh, op.z);
    dress(mesh, op, s, d)
}

pub(crate) fn dress(mesh: &SurfaceMesh, op: &VolumeOperator, mut s: BoundaryOperator, mut d: BoundaryOperator) -> DressedOperators {
    let cpl = coupling(mesh, op.centers(), op.z);
    if !op.is_empty() {
        let vol = c64::new(op.cell_volume(), 0.0);
        let l0 = op.lambda_v(&cpl.c0);
        let add0 = cpl.c0.transpose() * &l0;
        s.matrix = &s.matrix + &crate::linalg::scale(add0.as_ref(), vol);
        let l1 = op.lambda_v(&cpl.c1);
        let add1 = cpl.c1.transpose() * &l1;
        d.matrix = &d.matrix + &crate::linalg::scale(add1.as_ref(), vol);
        symmetrize(&mut s.matrix);
        symmetrize(&mut d.matrix);
    }
    s.kind = OperatorKind::Sv;
    d.kind = OperatorKind::Dv;
    DressedOperators { sv: s, dv: d, coupling: cpl }
}

/// The dressed matrices are complex symmetric; remove round-off asymmetry.
fn symmetrize(a: &mut CMat) {
    for j in 0..a.ncols() {
        for i in j + 1..a.nrows() {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// SL^v phi = SL phi + R Λ^v SL phi (P0 densities) or DL^v phi (P1), with
/// value and gradient at points off the surface.
pub fn dressed_layer_field(mesh: &SurfaceMesh, op: &VolumeOperator, cpl: &Coupling, density: &[c64], kind: LayerKind, points: &[Point]) -> Vec<LayerField> {
    let mut out = layer_field_unchecked(mesh, op.z, density, kind, points, true);
    if op.is_empty() {
        return out;
    }
    let c = match kind {
        LayerKind::SL => &cpl.c0,
        LayerKind::DL => &cpl.c1,
    };
    let mut on_cells = vec![c64::new(0.0, 0.0); c.nrows()];
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            on_cells[i] += c[(i, j)] * density[j];
        }
    }
    let q = op.lambda_v_vec(&on_cells);
    for (f, x) in out.iter_mut().zip(points) {
        let extra = op.cell_field(&q, *x);
        f.value += extra.value;
        for a in 0..3 {
            f.grad[a] += extra.grad[a];
        }
    }
    out
}

/// Values of the dressed layer potential; points must clear the surface by h/2.
pub fn dressed_layer_potentials(mesh: &SurfaceMesh, op: &VolumeOperator, density: &[c64], kind: LayerKind, points: &[Point]) -> Result<Vec<c64>> {
    let want = match kind {
        LayerKind::SL => mesh.p0_dofs(),
        LayerKind::DL => mesh.p1_dofs(),
    };
    if density.len() != want {
        return Err(Error::InvalidInput(format!("density has {} entries, expected {want}", density.len())));
    }
    for &x in points {
        let (d, t) = mesh.distance(x);
        let h = mesh.geom(t).diam;
        if d <= 0.5 * h {
            return Err(Error::PointTooClose { distance: d, h });
        }
    }
    let cpl = coupling(mesh, op.centers(), op.z);
    Ok(dressed_layer_field(mesh, op, &cpl, density, kind, points).into_iter().map(|f| f.value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer_ops::{relative_trace_defect, trace_norm, TraceProbe};
    use crate::linalg::{frob, hermitian_min_eigenvalue, rel_diff};
    use crate::mesh::make_sphere;

    fn gauss_grid(depth: f64, h: f64) -> VolumeGrid {
        let spec = PotentialSpec::gaussian(depth, 0.5, 1.5, [0.0; 3]).unwrap();
        VolumeGrid::new(&spec, h, DEFAULT_MAX_CELLS).unwrap()
    }

    #[test]
    fn diagonal_spot_value() {
        // s = 10, rho = 0.1: (1 - 2 e^{-1}) / 100.
        let vol = 4.0 * PI * 1e-3 / 3.0;
        let grid = VolumeGrid::from_cells(vec![[0.0; 3]], vec![1.0], vol.cbrt()).unwrap();
        let r = assemble_volume_resolvent(&grid, SpectralParam::real(100.0).unwrap());
        assert!((r[(0, 0)].re - 0.002_642_4).abs() < 1e-7, "{}", r[(0, 0)]);
        assert!((r[(0, 0)].re - (1.0 - 2.0 * (-1f64).exp()) / 100.0).abs() < 1e-15);
    }

    #[test]
    fn cell_kernel_is_continuous_at_ball_surface() {
        let k = Kernel { s: c64::new(0.7, 1.3) };
        let z = k.s * k.s;
        let (rho, vol) = (0.1, 4.0 * PI * 1e-3 / 3.0);
        let d_in = [0.0, 0.0, rho * (1.0 - 1e-9)];
        let d_out = [0.0, 0.0, rho * (1.0 + 1e-9)];
        let (a, ga) = cell_kernel(&k, z, rho, vol, d_in);
        let (b, gb) = cell_kernel(&k, z, rho, vol, d_out);
        assert!((a - b).norm() < 1e-7 * a.norm(), "{a} vs {b}");
        assert!((ga[2] - gb[2]).norm() < 1e-7 * ga[2].norm(), "{} vs {}", ga[2], gb[2]);
        // Gradient against a central difference inside the ball.
        let e = 1e-6;
        let x = [0.02, -0.03, 0.04];
        let (_, g) = cell_kernel(&k, z, rho, vol, x);
        let fd = (cell_kernel(&k, z, rho, vol, [0.02 + e, -0.03, 0.04]).0 - cell_kernel(&k, z, rho, vol, [0.02 - e, -0.03, 0.04]).0) / (2.0 * e);
        assert!((fd - g[0]).norm() < 1e-6 * g[0].norm().max(1e-3));
    }

    #[test]
    fn potential_table_interpolates_and_truncates() {
        let p = PotentialSpec::parse_table("# r v\n0 2\n1 1\n2 0.5\n", [0.0; 3]).unwrap();
        assert_eq!(p.radial(0.5), 1.5);
        assert_eq!(p.radial(1.5), 0.75);
        assert_eq!(p.radial(2.5), 0.0);
        assert!(PotentialSpec::parse_table("0 1\n0 2\n", [0.0; 3]).is_err());
        assert!(PotentialSpec::parse_table("0 1 3\n", [0.0; 3]).is_err());
        let g = PotentialSpec::gaussian(1.0, 0.5, 1.5, [0.0; 3]).unwrap();
        assert_eq!(g.radial(1.6), 0.0);
        assert!((g.radial(0.5) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn grid_covers_support_and_respects_cap() {
        let grid = gauss_grid(1.0, 0.3);
        assert!(grid.centers().iter().all(|c| norm(*c) <= 1.5 + 1e-12));
        assert!(grid.len() > 400 && grid.len() < 600, "{}", grid.len());
        let spec = PotentialSpec::gaussian(1.0, 0.5, 1.5, [0.0; 3]).unwrap();
        assert!(VolumeGrid::new(&spec, 0.3, 10).is_err());
    }

    #[test]
    fn zero_potential_gives_zero_lambda() {
        let grid = VolumeGrid::from_cells(vec![[0.0; 3]], vec![0.0], 0.2).unwrap();
        let out = lambda_v_apply(&grid, SpectralParam::real(1.0).unwrap(), &[c64::new(3.0, 1.0)]).unwrap();
        assert_eq!(out[0], c64::new(0.0, 0.0));
    }

    #[test]
    fn left_and_right_factorizations_agree() {
        let grid = gauss_grid(1.0, 0.3);
        let z = SpectralParam::interior(c64::new(0.5, 0.8)).unwrap();
        let u: Vec<c64> = grid.centers().iter().map(|c| c64::new(1.0 + c[0], c[1] * c[2])).collect();
        let a = lambda_v_apply(&grid, z, &u).unwrap();
        let b = lambda_v_apply_left(&grid, z, &u).unwrap();
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let n: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(d < 1e-10 * n);
    }

    #[test]
    fn born_series_matches_direct_solve() {
        let z = SpectralParam::real(1.0).unwrap();
        let u0: Vec<c64> = vec![c64::new(1.0, 0.0); gauss_grid(1.0, 0.3).len()];
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05] {
            let grid = gauss_grid(eps, 0.3);
            let op = VolumeOperator::new(&grid, z).unwrap();
            let direct = op.lambda_v_vec(&u0);
            // v u + v R v u
            let vu: Vec<c64> = u0.iter().zip(grid.v()).map(|(x, v)| x * *v).collect();
            let rvu = op.r_apply(&vu);
            let two: Vec<c64> = vu.iter().zip(&rvu).zip(grid.v()).map(|((a, b), v)| a + b * *v).collect();
            let res: f64 = direct.iter().zip(&two).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            if prev.is_finite() {
                // Cubic remainder: halving v divides it by 8.
                assert!((prev / res - 8.0).abs() < 0.5, "ratio {}", prev / res);
            }
            prev = res;
            // Full Neumann summation agrees with the direct solve.
            let mut term = vu.clone();
            let mut sum = vu.clone();
            for _ in 0..200 {
                let rt = op.r_apply(&term);
                term = rt.iter().zip(grid.v()).map(|(x, v)| x * *v).collect();
                for (s, t) in sum.iter_mut().zip(&term) {
                    *s += t;
                }
            }
            let d: f64 = sum.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let n: f64 = direct.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(d < 1e-8 * n);
        }
    }

    #[test]
    fn resolvent_symmetry_and_large_z() {
        let grid = gauss_grid(1.0, 0.3);
        let z = SpectralParam::interior(c64::new(0.4, 1.1)).unwrap();
        let op = VolumeOperator::new(&grid, z).unwrap();
        let op_bar = VolumeOperator::new(&grid, z.conj()).unwrap();
        let n = grid.len();
        let f: Vec<c64> = (0..n).map(|i| c64::new((i as f64 * 0.37).sin(), 0.1)).collect();
        let g: Vec<c64> = (0..n).map(|i| c64::new((i as f64 * 0.11).cos(), -0.3)).collect();
        let src = |v: &Vec<c64>| Source { cells: v.clone(), points: vec![] };
        let rf = schrodinger_resolvent_apply(&op, &src(&f), &[]).unwrap().0;
        let rg = schrodinger_resolvent_apply(&op_bar, &src(&g), &[]).unwrap().0;
        // <g, R^v_z f> = <R^v_zbar g, f> in the cell inner product.
        let lhs: c64 = g.iter().zip(&rf).map(|(a, b)| a.conj() * b).sum();
        let rhs: c64 = rg.iter().zip(&f).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
        // One-cell source at large real z is dominated by the diagonal.
        let zl = SpectralParam::real(400.0).unwrap();
        let opl = VolumeOperator::new(&grid, zl).unwrap();
        let mut e = vec![c64::new(0.0, 0.0); n];
        e[n / 2] = c64::new(1.0, 0.0);
        let out = schrodinger_resolvent_apply(&opl, &src(&e), &[]).unwrap().0;
        let rii = opl.resolvent_matrix()[(n / 2, n / 2)];
        assert!((out[n / 2] / rii - 1.0).norm() < 0.05);
        // Point sources: <delta_y, R^v delta_x> is symmetric in (x, y).
        let x = [0.2, 0.1, -0.3];
        let y = [-0.4, 0.5, 0.6];
        let a = schrodinger_resolvent_apply(&op, &Source::point(x, c64::new(1.0, 0.0)), &[y]).unwrap().1[0];
        let b = schrodinger_resolvent_apply(&op, &Source::point(y, c64::new(1.0, 0.0)), &[x]).unwrap().1[0];
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn point_source_first_born_term() {
        // R^v delta_x (y) - g(y, x) = sum_c g(y, c) v_c g(c, x) vol + O(v^2).
        let z = SpectralParam::real(1.0).unwrap();
        let x = [2.5, 0.0, 0.3];
        let y = [-0.2, 2.4, -0.5];
        let k = z.kernel();
        for eps in [1e-3, 1e-4] {
            let grid = gauss_grid(eps, 0.3);
            let op = VolumeOperator::new(&grid, z).unwrap();
            let u = schrodinger_resolvent_apply(&op, &Source::point(x, c64::new(1.0, 0.0)), &[y]).unwrap().1[0];
            // Cells act as balls at both ends.
            let phi = ball_factor(k.s * grid.ball_radius());
            let born: c64 = grid.centers().iter().zip(grid.v()).map(|(c, v)| k.g(dist(y, *c)) * k.g(dist(*c, x)) * (*v * grid.cell_volume())).sum::<c64>() * phi * phi;
            let scat = u - k.g(dist(x, y));
            assert!((scat / born - 1.0).norm() < 20.0 * eps, "eps {eps}: {scat} vs {born}");
        }
    }

    #[test]
    fn dressed_operators_reduce_and_stay_coercive() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let z = SpectralParam::real(1.0).unwrap();
        let empty = VolumeOperator::new(&VolumeGrid::empty(0.3), z).unwrap();
        let d0 = dressed_boundary_operators(&mesh, &empty);
        let (s, d) = assemble_s_and_d(&mesh, z);
        assert_eq!(rel_diff(d0.sv.matrix.as_ref(), s.matrix.as_ref(), 1e-300), 0.0);
        assert_eq!(rel_diff(d0.dv.matrix.as_ref(), d.matrix.as_ref(), 1e-300), 0.0);
        let grid = gauss_grid(1.0, 0.3);
        let zl = SpectralParam::real(25.0).unwrap();
        let op = VolumeOperator::new(&grid, zl).unwrap();
        let dr = dressed_boundary_operators(&mesh, &op);
        assert!(hermitian_min_eigenvalue(dr.sv.matrix.as_ref()) > 0.0);
        let neg = crate::linalg::scale(dr.dv.matrix.as_ref(), c64::new(-1.0, 0.0));
        assert!(hermitian_min_eigenvalue(neg.as_ref()) > 0.0);
        // Conjugation for real v.
        let zc = SpectralParam::interior(c64::new(1.0, 0.5)).unwrap();
        let a = dressed_boundary_operators(&mesh, &VolumeOperator::new(&grid, zc).unwrap());
        let b = dressed_boundary_operators(&mesh, &VolumeOperator::new(&grid, zc.conj()).unwrap());
        let conj = Mat::<c64>::from_fn(a.sv.matrix.nrows(), a.sv.matrix.ncols(), |i, j| a.sv.matrix[(i, j)].conj());
        assert!(rel_diff(conj.as_ref(), b.sv.matrix.as_ref(), 1e-300) < 1e-12);
        assert!(frob(a.sv.matrix.as_ref()) > 0.0);
    }

    #[test]
    fn dressed_jump_relations() {
        let mesh = make_sphere(1.0, 2).unwrap();
        let grid = gauss_grid(1.0, 0.3);
        let z = SpectralParam::real(1.0).unwrap();
        let op = VolumeOperator::new(&grid, z).unwrap();
        let cpl = coupling(&mesh, op.centers(), z);
        let probe = TraceProbe::new(&mesh);
        let one0 = vec![c64::new(1.0, 0.0); mesh.p0_dofs()];
        let one1 = vec![c64::new(1.0, 0.0); mesh.p1_dofs()];
        let sl = probe.traces(&dressed_layer_field(&mesh, &op, &cpl, &one0, LayerKind::SL, &probe.points));
        let dl = probe.traces(&dressed_layer_field(&mesh, &op, &cpl, &one1, LayerKind::DL, &probe.points));
        let minus: Vec<c64> = one0.iter().map(|v| -v).collect();
        let unit = trace_norm(&mesh, &one0);
        assert!(relative_trace_defect(&mesh, &sl.jump1(), &minus) < 0.05);
        assert!(relative_trace_defect(&mesh, &dl.jump0(), &one0) < 0.02);
        assert!(trace_norm(&mesh, &sl.jump0()) / unit < 0.02);
        assert!(trace_norm(&mesh, &dl.jump1()) / unit < 0.03);
        // The dressing changes the field.
        let bare = probe.layer_traces(&mesh, z, &one0, LayerKind::SL).unwrap();
        assert!(relative_trace_defect(&mesh, &sl.gamma0_ex, &bare.gamma0_ex) > 0.01);
    }
}
