//! Interface models on Γ: δ(α), δ'(θ), Dirichlet and Neumann, coupled to the
//! volume potential through the dressed boundary operators.

use faer::Mat;
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::layer_ops::{trace_norm, triangle_layer_integrals, BoundaryOperator, LayerField, LayerKind, OperatorKind, SideTraces, Space, SpectralParam, TraceProbe};
use crate::linalg::{norm1, CMat, Factorization, COND_LIMIT};
use crate::mesh::SurfaceMesh;
use crate::potential_ops::{dressed_boundary_operators, dressed_layer_field, schrodinger_resolvent, DressedOperators, Source, VolumeField, VolumeGrid, VolumeOperator};
use crate::quadrature::NearRule;

/// Interface strength: one value or per-vertex samples (P1).
#[derive(Clone, Debug, PartialEq)]
pub enum Strength {
    Constant(f64),
    PerVertex(Vec<f64>),
}

impl Strength {
    pub fn vertex_values(&self, mesh: &SurfaceMesh) -> Result<Vec<f64>> {
        match self {
            Strength::Constant(a) => Ok(vec![*a; mesh.num_vertices()]),
            Strength::PerVertex(v) if v.len() == mesh.num_vertices() => Ok(v.clone()),
            Strength::PerVertex(v) => Err(Error::InvalidInput(format!("{} strength samples for {} vertices", v.len(), mesh.num_vertices()))),
        }
    }

    /// Triangle means of the P1 interpolant.
    pub fn triangle_means(&self, mesh: &SurfaceMesh) -> Result<Vec<f64>> {
        let v = self.vertex_values(mesh)?;
        Ok(mesh.triangles().iter().map(|t| (v[t[0]] + v[t[1]] + v[t[2]]) / 3.0).collect())
    }

    fn is_finite(&self) -> bool {
        match self {
            Strength::Constant(a) => a.is_finite(),
            Strength::PerVertex(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InterfaceModel {
    Delta(Strength),
    DeltaPrime(Strength),
    Dirichlet,
    Neumann,
    NoInterface,
}

impl InterfaceModel {
    /// Space of the interface density (None without an interface).
    pub fn trace_space(&self) -> Option<Space> {
        match self {
            InterfaceModel::Delta(_) | InterfaceModel::Dirichlet => Some(Space::P0),
            InterfaceModel::DeltaPrime(_) | InterfaceModel::Neumann => Some(Space::P1),
            InterfaceModel::NoInterface => None,
        }
    }

    pub fn layer_kind(&self) -> Option<LayerKind> {
        self.trace_space().map(|s| if s == Space::P0 { LayerKind::SL } else { LayerKind::DL })
    }

    pub fn name(&self) -> &'static str {
        match self {
            InterfaceModel::Delta(_) => "delta",
            InterfaceModel::DeltaPrime(_) => "delta-prime",
            InterfaceModel::Dirichlet => "dirichlet",
            InterfaceModel::Neumann => "neumann",
            InterfaceModel::NoInterface => "none",
        }
    }
}

/// K with Λ̂ = sign K^{-1} diag(weight).
struct InterfaceSolve {
    lu: Factorization,
    weight: Option<Vec<f64>>,
    sign: f64,
}

impl InterfaceSolve {
    fn apply(&self, b: &[c64]) -> Vec<c64> {
        let rhs: Vec<c64> = match &self.weight {
            Some(w) => b.iter().zip(w).map(|(x, a)| x * *a).collect(),
            None => b.to_vec(),
        };
        self.lu.solve_vec(&rhs).into_iter().map(|x| x * self.sign).collect()
    }

    fn apply_mat(&self, b: &CMat) -> CMat {
        let mut rhs = b.clone();
        if let Some(w) = &self.weight {
            for j in 0..rhs.ncols() {
                for i in 0..rhs.nrows() {
                    rhs[(i, j)] *= w[i];
                }
            }
        }
        self.lu.solve_in_place(rhs.as_mut());
        if self.sign != 1.0 {
            for j in 0..rhs.ncols() {
                for i in 0..rhs.nrows() {
                    rhs[(i, j)] *= self.sign;
                }
            }
        }
        rhs
    }
}

/// Everything needed to apply the perturbed resolvent at one z.
pub struct ModelSystem {
    pub mesh: SurfaceMesh,
    pub model: InterfaceModel,
    pub z: SpectralParam,
    pub volume: VolumeOperator,
    pub dressed: Option<DressedOperators>,
    solve: Option<InterfaceSolve>,
}

fn dense_p1_mass(mesh: &SurfaceMesh, w: Option<&[f64]>) -> CMat {
    let n = mesh.p1_dofs();
    let mut m = Mat::<c64>::zeros(n, n);
    for (i, j, v) in mesh.p1_mass_weighted(w) {
        m[(i, j)] += c64::new(v, 0.0);
    }
    m
}

impl ModelSystem {
    pub fn new(mesh: &SurfaceMesh, grid: &VolumeGrid, model: InterfaceModel, z: SpectralParam) -> Result<Self> {
        let volume = VolumeOperator::new(grid, z)?;
        Self::with_volume(mesh, volume, model)
    }

    pub fn with_volume(mesh: &SurfaceMesh, volume: VolumeOperator, model: InterfaceModel) -> Result<Self> {
        let z = volume.z;
        if let InterfaceModel::Delta(s) | InterfaceModel::DeltaPrime(s) = &model {
            if !s.is_finite() {
                return Err(Error::InvalidInput("interface strength must be finite and real".into()));
            }
        }
        if model == InterfaceModel::NoInterface {
            return Ok(ModelSystem { mesh: mesh.clone(), model, z, volume, dressed: None, solve: None });
        }
        let dressed = dressed_boundary_operators(mesh, &volume);
        let solve = match &model {
            InterfaceModel::Delta(alpha) => {
                let abar = alpha.triangle_means(mesh)?;
                let sv = &dressed.sv.matrix;
                let k = Mat::<c64>::from_fn(sv.nrows(), sv.ncols(), |i, j| {
                    let m = if i == j { mesh.geom(i).area } else { 0.0 };
                    c64::new(m, 0.0) - sv[(i, j)] * abar[i]
                });
                let scale = mesh.geoms().iter().map(|g| g.area).fold(0.0, f64::max) + norm1(sv.as_ref()) * abar.iter().fold(0.0f64, |m, a| m.max(a.abs()));
                let lu = Factorization::checked_scaled(k.as_ref(), scale, COND_LIMIT, |cond| Error::SingularInterfaceOperator { factor: "1 - alpha S^v", cond })?;
                InterfaceSolve { lu, weight: Some(abar), sign: 1.0 }
            }
            InterfaceModel::Dirichlet => {
                let lu = Factorization::checked(dressed.sv.matrix.as_ref(), COND_LIMIT, |cond| Error::SingularInterfaceOperator { factor: "S^v", cond })?;
                InterfaceSolve { lu, weight: None, sign: -1.0 }
            }
            InterfaceModel::Neumann | InterfaceModel::DeltaPrime(_) => {
                let theta = match &model {
                    InterfaceModel::DeltaPrime(t) => t.vertex_values(mesh)?,
                    _ => vec![0.0; mesh.num_vertices()],
                };
                let mt = dense_p1_mass(mesh, Some(&theta));
                let k = &mt - &dressed.dv.matrix;
                let factor = if matches!(model, InterfaceModel::Neumann) { "D^v" } else { "theta - D^v" };
                let scale = norm1(mt.as_ref()) + norm1(dressed.dv.matrix.as_ref());
                let lu = Factorization::checked_scaled(k.as_ref(), scale, COND_LIMIT, |cond| Error::SingularInterfaceOperator { factor, cond })?;
                InterfaceSolve { lu, weight: None, sign: 1.0 }
            }
            InterfaceModel::NoInterface => unreachable!(),
        };
        Ok(ModelSystem { mesh: mesh.clone(), model, z, volume, dressed: Some(dressed), solve: Some(solve) })
    }

    pub fn trace_space(&self) -> Option<Space> {
        self.model.trace_space()
    }

    /// Condition estimates of the volume and interface factorizations.
    pub fn conditions(&self) -> (f64, Option<f64>) {
        (self.volume.cond(), self.solve.as_ref().map(|s| s.lu.cond()))
    }

    /// Λ̂ applied to a load vector on the trace space.
    pub fn lambda_hat_apply(&self, b: &[c64]) -> Vec<c64> {
        match &self.solve {
            Some(s) => s.apply(b),
            None => Vec::new(),
        }
    }

    pub fn lambda_hat_apply_mat(&self, b: &CMat) -> CMat {
        match &self.solve {
            Some(s) => s.apply_mat(b),
            None => Mat::zeros(0, b.ncols()),
        }
    }

    /// Load vector of the model's trace of R^v f: int psi_m gamma_0 t (P0)
    /// or int phi_v gamma_1 t (P1).
    pub fn boundary_load(&self, t: &VolumeField) -> Vec<c64> {
        let (kind, n) = match self.model.layer_kind() {
            Some(LayerKind::SL) => (LayerKind::SL, self.mesh.p0_dofs()),
            Some(LayerKind::DL) => (LayerKind::DL, self.mesh.p1_dofs()),
            None => return Vec::new(),
        };
        let mut b = vec![c64::new(0.0, 0.0); n];
        let k = self.z.kernel();
        let near = NearRule::default();
        let tris = self.mesh.triangles();
        for (p, a) in &t.points {
            for (ti, g) in self.mesh.geoms().iter().enumerate() {
                let m = triangle_layer_integrals(&k, *p, g, kind, false, &near);
                match kind {
                    LayerKind::SL => b[ti] += (m[0][0] + m[1][0] + m[2][0]) * a,
                    LayerKind::DL => {
                        for i in 0..3 {
                            b[tris[ti][i]] += m[i][0] * a;
                        }
                    }
                }
            }
        }
        if !self.volume.is_empty() {
            let cpl = &self.dressed.as_ref().expect("interface models carry dressed operators").coupling;
            let c = if kind == LayerKind::SL { &cpl.c0 } else { &cpl.c1 };
            let vol = self.volume.cell_volume();
            for j in 0..c.ncols() {
                let mut acc = c64::new(0.0, 0.0);
                for i in 0..c.nrows() {
                    acc += c[(i, j)] * t.q[i];
                }
                b[j] += acc * vol;
            }
        }
        b
    }
}

/// Dense Λ̂ on the model's trace space.
pub fn assemble_lambda_hat(mesh: &SurfaceMesh, grid: &VolumeGrid, model: InterfaceModel, z: SpectralParam) -> Result<BoundaryOperator> {
    let space = model.trace_space().ok_or_else(|| Error::InvalidInput("no interface: Λ̂ is not defined".into()))?;
    let msys = ModelSystem::new(mesh, grid, model, z)?;
    let n = space.dim(mesh);
    let eye = Mat::<c64>::identity(n, n);
    Ok(BoundaryOperator { matrix: msys.lambda_hat_apply_mat(&eye), row_space: space, col_space: space, z, kind: OperatorKind::LambdaHat })
}

/// u = R^{v,model}_z f: the volume part t = R^v f and the interface density.
pub struct PerturbedField {
    pub volume: VolumeField,
    pub density: Vec<c64>,
}

impl PerturbedField {
    /// Value and gradient at points off Γ.
    pub fn fields(&self, msys: &ModelSystem, points: &[crate::mesh::Point]) -> Result<Vec<LayerField>> {
        let mut out = points.iter().map(|x| self.volume.eval(&msys.volume, *x)).collect::<Result<Vec<_>>>()?;
        if let (Some(kind), Some(d)) = (msys.model.layer_kind(), msys.dressed.as_ref()) {
            let layer = dressed_layer_field(&msys.mesh, &msys.volume, &d.coupling, &self.density, kind, points);
            for (o, l) in out.iter_mut().zip(layer) {
                o.value += l.value;
                for a in 0..3 {
                    o.grad[a] += l.grad[a];
                }
            }
        }
        Ok(out)
    }
}

pub fn perturbed_resolvent(msys: &ModelSystem, f: &Source) -> Result<PerturbedField> {
    let volume = schrodinger_resolvent(&msys.volume, f)?;
    let density = if msys.solve.is_some() { msys.lambda_hat_apply(&msys.boundary_load(&volume)) } else { Vec::new() };
    Ok(PerturbedField { volume, density })
}

/// u = R^{v,model}_z f at points off Γ.
pub fn perturbed_resolvent_apply(msys: &ModelSystem, f: &Source, points: &[crate::mesh::Point]) -> Result<Vec<c64>> {
    let u = perturbed_resolvent(msys, f)?;
    Ok(u.fields(msys, points)?.into_iter().map(|l| l.value).collect())
}

/// One-sided traces at triangle centroids of u and of its volume part t = R^v f.
pub fn side_traces(msys: &ModelSystem, f: &Source) -> Result<(SideTraces, SideTraces)> {
    let u = perturbed_resolvent(msys, f)?;
    let probe = TraceProbe::new(&msys.mesh);
    let t = probe.points.iter().map(|x| u.volume.eval(&msys.volume, *x)).collect::<Result<Vec<_>>>()?;
    Ok((probe.traces(&u.fields(msys, &probe.points)?), probe.traces(&t)))
}

fn combine(a: &[c64], b: &[c64], wa: f64, wb: f64) -> Vec<c64> {
    a.iter().zip(b).map(|(x, y)| x * wa + y * wb).collect()
}

/// Relative residual of the model's interface condition at the centroids:
/// Dirichlet ||γ0 u||/||γ0 t||, Neumann ||γ1 u||/||γ1 t||, δ
/// ||αγ0u + [γ1]u|| / (||αγ0u|| + ||[γ1]u||), δ' the larger of
/// ||[γ1]u||/||γ1u|| and ||γ1u - θ[γ0]u|| / (||γ1u|| + ||θ[γ0]u||), and
/// without interface the larger of the two relative jumps.
pub fn boundary_condition_residual(msys: &ModelSystem, f: &Source) -> Result<f64> {
    let mesh = &msys.mesh;
    let (tr, t) = side_traces(msys, f)?;
    let n = |a: &[c64]| trace_norm(mesh, a);
    let tiny = f64::MIN_POSITIVE;
    let g0 = combine(&tr.gamma0_ex, &tr.gamma0_in, 0.5, 0.5);
    let g1 = combine(&tr.gamma1_ex, &tr.gamma1_in, 0.5, 0.5);
    let j0 = tr.jump0();
    let j1 = tr.jump1();
    let res = match &msys.model {
        InterfaceModel::Dirichlet | InterfaceModel::Neumann => {
            if msys.model == InterfaceModel::Dirichlet {
                n(&g0) / n(&combine(&t.gamma0_ex, &t.gamma0_in, 0.5, 0.5)).max(tiny)
            } else {
                n(&g1) / n(&combine(&t.gamma1_ex, &t.gamma1_in, 0.5, 0.5)).max(tiny)
            }
        }
        InterfaceModel::Delta(alpha) => {
            let a = alpha.triangle_means(mesh)?;
            let ag0: Vec<c64> = g0.iter().zip(&a).map(|(u, a)| u * *a).collect();
            let r = combine(&ag0, &j1, 1.0, 1.0);
            n(&r) / (n(&ag0) + n(&j1)).max(tiny)
        }
        InterfaceModel::DeltaPrime(theta) => {
            let t = theta.triangle_means(mesh)?;
            let tj0: Vec<c64> = j0.iter().zip(&t).map(|(u, a)| u * *a).collect();
            let r = combine(&g1, &tj0, 1.0, -1.0);
            let cond = n(&r) / (n(&g1) + n(&tj0)).max(tiny);
            let cont = n(&j1) / n(&g1).max(tiny);
            cond.max(cont)
        }
        InterfaceModel::NoInterface => (n(&j0) / n(&g0).max(tiny)).max(n(&j1) / n(&g1).max(tiny)),
    };
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, rel_diff};
    use crate::mesh::make_sphere;
    use crate::potential_ops::{PotentialSpec, DEFAULT_MAX_CELLS};

    fn gauss_grid(h: f64) -> VolumeGrid {
        let spec = PotentialSpec::gaussian(1.0, 0.5, 1.5, [0.0; 3]).unwrap();
        VolumeGrid::new(&spec, h, DEFAULT_MAX_CELLS).unwrap()
    }

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn delta_with_zero_strength_is_potential_only() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let grid = gauss_grid(0.4);
        let z = SpectralParam::real(1.0).unwrap();
        let lh = assemble_lambda_hat(&mesh, &grid, InterfaceModel::Delta(Strength::Constant(0.0)), z).unwrap();
        assert!(lh.matrix.norm_max() == 0.0);
        let f = Source::point([0.1, 0.2, 2.0], c(1.0, 0.0));
        let pts = [[0.0, 0.0, 0.3], [1.8, 0.0, 0.1]];
        let a = perturbed_resolvent_apply(&ModelSystem::new(&mesh, &grid, InterfaceModel::Delta(Strength::Constant(0.0)), z).unwrap(), &f, &pts).unwrap();
        let b = perturbed_resolvent_apply(&ModelSystem::new(&mesh, &grid, InterfaceModel::NoInterface, z).unwrap(), &f, &pts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dirichlet_lambda_hat_negative_definite() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let lh = assemble_lambda_hat(&mesh, &VolumeGrid::empty(0.3), InterfaceModel::Dirichlet, SpectralParam::real(25.0).unwrap()).unwrap();
        let sym = Mat::<c64>::from_fn(lh.matrix.nrows(), lh.matrix.ncols(), |i, j| 0.5 * (lh.matrix[(i, j)] + lh.matrix[(j, i)].conj()));
        assert!(hermitian_eigenvalues(sym.as_ref()).iter().all(|&e| e < 0.0));
    }

    #[test]
    fn neumann_equals_delta_prime_at_zero_theta() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let grid = gauss_grid(0.4);
        let z = SpectralParam::interior(c(1.0, 0.5)).unwrap();
        let a = assemble_lambda_hat(&mesh, &grid, InterfaceModel::Neumann, z).unwrap();
        let b = assemble_lambda_hat(&mesh, &grid, InterfaceModel::DeltaPrime(Strength::Constant(0.0)), z).unwrap();
        assert_eq!(rel_diff(a.matrix.as_ref(), b.matrix.as_ref(), 1e-300), 0.0);
    }

    #[test]
    fn lambda_hat_conjugation() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let grid = gauss_grid(0.4);
        let z = SpectralParam::interior(c(0.7, 1.2)).unwrap();
        for model in [InterfaceModel::Delta(Strength::Constant(1.5)), InterfaceModel::DeltaPrime(Strength::Constant(0.8))] {
            let a = assemble_lambda_hat(&mesh, &grid, model.clone(), z).unwrap();
            let b = assemble_lambda_hat(&mesh, &grid, model, z.conj()).unwrap();
            // Λ̂(zbar) = Λ̂(z)^* (the matrices are complex symmetric).
            let adj = a.matrix.adjoint().to_owned();
            assert!(rel_diff(adj.as_ref(), b.matrix.as_ref(), 1e-300) < 1e-10);
        }
    }

    #[test]
    fn point_source_hermiticity() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let grid = gauss_grid(0.4);
        let z = SpectralParam::interior(c(0.6, 0.9)).unwrap();
        let x = [0.2, -0.1, 1.9];
        let y = [-1.7, 0.4, 0.3];
        for model in [InterfaceModel::Delta(Strength::Constant(2.0)), InterfaceModel::Dirichlet, InterfaceModel::Neumann, InterfaceModel::DeltaPrime(Strength::Constant(0.5))] {
            let m = ModelSystem::new(&mesh, &grid, model.clone(), z).unwrap();
            let mb = ModelSystem::new(&mesh, &grid, model.clone(), z.conj()).unwrap();
            let uxy = perturbed_resolvent_apply(&m, &Source::point(x, c(1.0, 0.0)), &[y]).unwrap()[0];
            let uyx = perturbed_resolvent_apply(&mb, &Source::point(y, c(1.0, 0.0)), &[x]).unwrap()[0];
            assert!((uxy - uyx.conj()).norm() < 1e-8 * uxy.norm(), "{}: {uxy} vs {uyx}", model.name());
            // Real z, real data: the resolvent is real.
            let mr = ModelSystem::new(&mesh, &grid, model.clone(), SpectralParam::real(2.0).unwrap()).unwrap();
            let ur = perturbed_resolvent_apply(&mr, &Source::point(x, c(1.0, 0.0)), &[y]).unwrap()[0];
            assert!(ur.im.abs() < 1e-12 * ur.norm());
        }
    }

    #[test]
    fn block_system_matches_schur_form() {
        // Full 2x2 block solve for the δ model against the dressed form.
        let mesh = make_sphere(1.0, 1).unwrap();
        let grid = gauss_grid(0.4);
        let z = SpectralParam::interior(c(0.8, 0.4)).unwrap();
        let alpha = 1.7;
        let msys = ModelSystem::new(&mesh, &grid, InterfaceModel::Delta(Strength::Constant(alpha)), z).unwrap();
        let cpl = &msys.dressed.as_ref().unwrap().coupling;
        let r = msys.volume.resolvent_matrix();
        let (nc, nt) = (grid.len(), mesh.p0_dofs());
        let vol = grid.cell_volume();
        let (s, _) = crate::layer_ops::assemble_s_and_d(&mesh, z);
        let v = grid.v();
        let big = Mat::<c64>::from_fn(nc + nt, nc + nt, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            match (i < nc, j < nc) {
                (true, true) => c(id, 0.0) - r[(i, j)] * v[i],
                (true, false) => -cpl.c0[(i, j - nc)] * v[i],
                (false, true) => -cpl.c0[(j, i - nc)] * (alpha * vol),
                (false, false) => c(id * mesh.geom(i - nc).area, 0.0) - s.matrix[(i - nc, j - nc)] * alpha,
            }
        });
        let a: Vec<c64> = grid.centers().iter().map(|p| c(p[0] + 0.5, p[1])).collect();
        let b: Vec<c64> = mesh.geoms().iter().map(|g| c(g.centroid[2], 1.0) * g.area).collect();
        let mut rhs = Mat::<c64>::zeros(nc + nt, 1);
        for i in 0..nc {
            rhs[(i, 0)] = a[i] * v[i];
        }
        for i in 0..nt {
            rhs[(nc + i, 0)] = b[i] * alpha;
        }
        let sol = Factorization::new(big.as_ref()).solve(rhs.as_ref());
        // Schur form.
        let la = msys.volume.lambda_v_vec(&a);
        let mut load = b.clone();
        for j in 0..nt {
            for i in 0..nc {
                load[j] += cpl.c0[(i, j)] * la[i] * vol;
            }
        }
        let phi = msys.lambda_hat_apply(&load);
        let mut arg = a.clone();
        for i in 0..nc {
            for j in 0..nt {
                arg[i] += cpl.c0[(i, j)] * phi[j];
            }
        }
        let w = msys.volume.lambda_v_vec(&arg);
        let err: f64 = (0..nc).map(|i| (sol[(i, 0)] - w[i]).norm_sqr()).chain((0..nt).map(|i| (sol[(nc + i, 0)] - phi[i]).norm_sqr())).sum::<f64>().sqrt();
        let nrm: f64 = (0..nc + nt).map(|i| sol[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-8 * nrm, "{err} vs {nrm}");
    }

    #[test]
    fn boundary_conditions_hold_on_level_two_sphere() {
        let mesh = make_sphere(1.0, 2).unwrap();
        let grid = gauss_grid(0.3);
        let z = SpectralParam::real(1.0).unwrap();
        let f = Source::point([0.3, -0.2, 2.2], c(1.0, 0.0));
        for (model, tol) in [
            (InterfaceModel::Dirichlet, 0.05),
            (InterfaceModel::Neumann, 0.08),
            (InterfaceModel::Delta(Strength::Constant(2.0)), 0.08),
            (InterfaceModel::DeltaPrime(Strength::Constant(1.0)), 0.08),
            (InterfaceModel::NoInterface, 0.02),
        ] {
            let m = ModelSystem::new(&mesh, &grid, model.clone(), z).unwrap();
            let res = boundary_condition_residual(&m, &f).unwrap();
            assert!(res < tol, "{}: residual {res}", model.name());
        }
    }
}
