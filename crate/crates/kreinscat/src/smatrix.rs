//! On-shell scattering matrix over a direction quadrature.
//!
//! The discrete operator is S = 1 + K W with W = diag(weights) and
//! K_ij = -π i k (2π)^{-3} [ ∫ e^{-ikξ_i·x} (volume output)_j dx
//!                         + <trace of e^{ikξ_i·x}, (boundary output)_j> ],
//! where the outputs come from the block operator Λ^{B,+} applied to the
//! incident pair (plane wave on the cells, its trace on Γ). With the kernel
//! branch s = +ik at λ + i0 this S is the complex conjugate of the physics
//! S-matrix; on degree-l harmonics it acts as e^{-2iδ_l}.

use faer::Mat;
use num_complex::Complex64 as c64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::interface_models::{InterfaceModel, ModelSystem};
use crate::layer_ops::{far_field_row, LayerKind, LimitSide, SpectralParam};
use crate::linalg::{frob, CMat};
use crate::mesh::v3::dot;
use crate::mesh::{DirectionSet, Point, SurfaceMesh};
use crate::potential_ops::{VolumeGrid, VolumeOperator};
use crate::special::legendre_all;

/// Label written next to every exported S-matrix.
pub const CONVENTION: &str = "S = 1 + K W, kernel branch e^{-ikr}/(4 pi r) at lambda + i0; S_l = exp(-2 i delta_l) (complex conjugate of the physics S-matrix)";

/// Relative Legendre reconstruction defect above which a kernel is not radial.
pub const RADIAL_TOL: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct ScatteringMatrix {
    pub lambda: f64,
    pub k: f64,
    pub directions: DirectionSet,
    /// K_ij = kernel(ξ_i, ξ_j).
    pub kernel: CMat,
}

/// Outputs of Λ^{B,+} for a batch of incident directions, one column each.
pub struct PairOutput {
    pub volume: CMat,
    pub boundary: CMat,
}

/// Plane waves e^{ikξ_j·x} on the cells and their model traces on Γ.
pub fn incident_pair(msys: &ModelSystem, lambda: f64, dirs: &[Point]) -> Result<(CMat, CMat)> {
    let k = (-lambda).sqrt();
    let centers = msys.volume.centers();
    let e = Mat::<c64>::from_fn(centers.len(), dirs.len(), |c, j| c64::new(0.0, k * dot(dirs[j], centers[c])).exp());
    let bt = match msys.model.layer_kind() {
        Some(kind) => {
            let rows = dirs.iter().map(|xi| far_field_row(&msys.mesh, lambda, *xi, kind)).collect::<Result<Vec<_>>>()?;
            let n = rows.first().map_or(0, |r| r.len());
            Mat::<c64>::from_fn(n, dirs.len(), |i, j| rows[j][i])
        }
        None => Mat::zeros(0, dirs.len()),
    };
    Ok((e, bt))
}

/// Λ^{B,+} on incident pairs (columns of `e` and `bt`):
/// boundary = Λ̂ (bt + vol Cᵀ Λ^v e), volume = Λ^v (e + C boundary),
/// with C the cell/trace coupling of the model's trace space.
pub fn lambda_plus_pair_apply_batch(msys: &ModelSystem, e: &CMat, bt: &CMat) -> PairOutput {
    let vol = msys.volume.cell_volume();
    let le = if msys.volume.is_empty() { Mat::zeros(0, e.ncols()) } else { msys.volume.lambda_v(e) };
    let Some(kind) = msys.model.layer_kind() else {
        return PairOutput { volume: le, boundary: Mat::zeros(0, e.ncols()) };
    };
    if msys.volume.is_empty() {
        return PairOutput { volume: le, boundary: msys.lambda_hat_apply_mat(bt) };
    }
    let cpl = &msys.dressed.as_ref().expect("interface models carry dressed operators").coupling;
    let c = if kind == LayerKind::SL { &cpl.c0 } else { &cpl.c1 };
    let mut w = c.transpose() * &le;
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            w[(i, j)] = w[(i, j)] * vol + bt[(i, j)];
        }
    }
    let boundary = msys.lambda_hat_apply_mat(&w);
    let cb = c * &boundary;
    let volume = &le + &msys.volume.lambda_v(&cb);
    PairOutput { volume, boundary }
}

/// Single incident direction.
pub fn lambda_plus_pair_apply(msys: &ModelSystem, lambda: f64, xi: Point) -> Result<(Vec<c64>, Vec<c64>)> {
    let (e, bt) = incident_pair(msys, lambda, &[xi])?;
    let out = lambda_plus_pair_apply_batch(msys, &e, &bt);
    let col = |m: &CMat| (0..m.nrows()).map(|i| m[(i, 0)]).collect();
    Ok((col(&out.volume), col(&out.boundary)))
}

/// The boundary-value system at λ + i0.
pub fn scattering_system(lambda: f64, model: InterfaceModel, mesh: &SurfaceMesh, grid: &VolumeGrid) -> Result<ModelSystem> {
    let z = SpectralParam::boundary(lambda, LimitSide::Plus)?;
    let volume = VolumeOperator::new(grid, z)?;
    ModelSystem::with_volume(mesh, volume, model)
}

pub fn smatrix_assemble(lambda: f64, model: InterfaceModel, mesh: &SurfaceMesh, grid: &VolumeGrid, directions: &DirectionSet) -> Result<ScatteringMatrix> {
    let msys = scattering_system(lambda, model, mesh, grid)?;
    smatrix_from_system(&msys, lambda, directions)
}

/// S-matrix kernel between `out` and `directions` (incident) using an
/// assembled system; `out` defaults to the incident set.
pub fn smatrix_kernel(msys: &ModelSystem, lambda: f64, incident: &[Point], out: &[Point]) -> Result<CMat> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidInput(format!("scattering energy must be negative, got {lambda}")));
    }
    match msys.z {
        SpectralParam::Boundary { lambda: l, side: LimitSide::Plus } if l == lambda => {}
        _ => return Err(Error::InvalidInput("the system must be assembled at lambda + i0".into())),
    }
    let k = (-lambda).sqrt();
    let (e, bt) = incident_pair(msys, lambda, incident)?;
    let res = lambda_plus_pair_apply_batch(msys, &e, &bt);
    let (eo, bo) = incident_pair(msys, lambda, out)?;
    let vol = msys.volume.cell_volume();
    let mut kmat = Mat::<c64>::zeros(out.len(), incident.len());
    if res.volume.nrows() > 0 {
        kmat = eo.adjoint() * &res.volume;
        for j in 0..kmat.ncols() {
            for i in 0..kmat.nrows() {
                kmat[(i, j)] *= vol;
            }
        }
    }
    if res.boundary.nrows() > 0 {
        kmat = &kmat + &(bo.adjoint() * &res.boundary);
    }
    let pref = c64::new(0.0, -PI * k) / (2.0 * PI).powi(3);
    for j in 0..kmat.ncols() {
        for i in 0..kmat.nrows() {
            kmat[(i, j)] *= pref;
        }
    }
    Ok(kmat)
}

pub fn smatrix_from_system(msys: &ModelSystem, lambda: f64, directions: &DirectionSet) -> Result<ScatteringMatrix> {
    let kernel = smatrix_kernel(msys, lambda, &directions.directions, &directions.directions)?;
    Ok(ScatteringMatrix { lambda, k: (-lambda).sqrt(), directions: directions.clone(), kernel })
}

/// Default partial-wave cutoff ceil(2ka) + 4.
pub fn default_ell_max(k: f64, a: f64) -> usize {
    (2.0 * k * a).ceil() as usize + 4
}

impl ScatteringMatrix {
    pub fn identity(lambda: f64, directions: &DirectionSet) -> Self {
        let n = directions.len();
        ScatteringMatrix { lambda, k: (-lambda).sqrt(), directions: directions.clone(), kernel: Mat::zeros(n, n) }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Discrete operator 1 + K W.
    pub fn operator(&self) -> CMat {
        let w = &self.directions.weights;
        Mat::from_fn(self.len(), self.len(), |i, j| self.kernel[(i, j)] * w[j] + if i == j { 1.0 } else { 0.0 })
    }

    /// ||S* W S - W||_F / ||W||_F.
    pub fn unitarity_defect(&self) -> f64 {
        let s = self.operator();
        let w = &self.directions.weights;
        let n = self.len();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let mut v = c64::new(0.0, 0.0);
                for l in 0..n {
                    v += s[(l, i)].conj() * w[l] * s[(l, j)];
                }
                if i == j {
                    v -= w[i];
                }
                acc += v.norm_sqr();
            }
        }
        acc.sqrt() / w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// ||K(ξ_i, ξ_j) - K(-ξ_j, -ξ_i)||_F / ||K||_F; None without antipodes.
    pub fn reciprocity_defect(&self) -> Option<f64> {
        let n = self.len();
        let anti: Vec<usize> = (0..n).map(|i| self.directions.antipode(i)).collect::<Option<_>>()?;
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += (self.kernel[(i, j)] - self.kernel[(anti[j], anti[i])]).norm_sqr();
            }
        }
        let nk = frob(self.kernel.as_ref());
        Some(if nk == 0.0 { 0.0 } else { acc.sqrt() / nk })
    }

    /// κ_l = (1/4π) Σ w_i w_j K_ij P_l(ξ_i·ξ_j), l = 0..=ell_max.
    fn legendre_moments(&self, ell_max: usize) -> Vec<c64> {
        let d = &self.directions.directions;
        let w = &self.directions.weights;
        let mut kappa = vec![c64::new(0.0, 0.0); ell_max + 1];
        for j in 0..self.len() {
            for i in 0..self.len() {
                let p = legendre_all(ell_max, dot(d[i], d[j]).clamp(-1.0, 1.0));
                let kij = self.kernel[(i, j)] * (w[i] * w[j]);
                for (l, pl) in p.iter().enumerate() {
                    kappa[l] += kij * *pl;
                }
            }
        }
        kappa.iter().map(|x| x / (4.0 * PI)).collect()
    }

    /// Degree up to which the direction rule integrates P_l P_l' reliably.
    fn resolvable_degree(&self) -> usize {
        (((self.len() as f64) / 2.0).sqrt().floor() as usize).saturating_sub(1)
    }

    /// Relative defect of the Legendre reconstruction
    /// K_ij ≈ Σ_l κ_l (2l+1)/(4π) P_l(ξ_i·ξ_j).
    pub fn rotational_defect(&self) -> f64 {
        let lr = self.resolvable_degree();
        let kappa = self.legendre_moments(lr);
        let d = &self.directions.directions;
        let mut acc = 0.0;
        for j in 0..self.len() {
            for i in 0..self.len() {
                let p = legendre_all(lr, dot(d[i], d[j]).clamp(-1.0, 1.0));
                let rec: c64 = (0..=lr).map(|l| kappa[l] * ((2 * l + 1) as f64 / (4.0 * PI) * p[l])).sum();
                acc += (self.kernel[(i, j)] - rec).norm_sqr();
            }
        }
        let nk = frob(self.kernel.as_ref());
        if nk == 0.0 {
            0.0
        } else {
            acc.sqrt() / nk
        }
    }

    /// Far-field amplitude f(ξ_i; ξ_j) = -2πi conj(K_ij) / k (physics convention).
    pub fn amplitude(&self) -> CMat {
        let f = c64::new(0.0, -2.0 * PI / self.k);
        Mat::from_fn(self.len(), self.len(), |i, j| f * self.kernel[(i, j)].conj())
    }
}

/// S_l on the degree-l harmonics by Legendre projection of the kernel.
pub fn phase_shifts(s: &ScatteringMatrix, ell_max: usize) -> Result<Vec<c64>> {
    let defect = s.rotational_defect();
    if defect > RADIAL_TOL {
        return Err(Error::NotRadial { defect });
    }
    Ok(s.legendre_moments(ell_max).into_iter().map(|k| k + 1.0).collect())
}

/// Far-field amplitudes and cross sections per incident direction.
#[derive(Clone, Debug)]
pub struct AmplitudeTable {
    /// f(ξ_out = i; ξ_in = j).
    pub amplitude: CMat,
    /// |f|², same layout.
    pub differential: Vec<Vec<f64>>,
    /// Σ_i w_i |f_ij|² for each incident j.
    pub sigma_angular: Vec<f64>,
    /// (4π/k) Im f_jj for each incident j.
    pub sigma_optical: Vec<f64>,
    pub sigma_total_angular: f64,
    pub sigma_total_optical: f64,
}

pub fn cross_sections(s: &ScatteringMatrix) -> AmplitudeTable {
    let f = s.amplitude();
    let n = s.len();
    let w = &s.directions.weights;
    let differential: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f[(i, j)].norm_sqr()).collect()).collect();
    let sigma_angular: Vec<f64> = (0..n).map(|j| (0..n).map(|i| w[i] * differential[i][j]).sum()).collect();
    let sigma_optical: Vec<f64> = (0..n).map(|j| 4.0 * PI / s.k * f[(j, j)].im).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    AmplitudeTable {
        sigma_total_angular: mean(&sigma_angular),
        sigma_total_optical: mean(&sigma_optical),
        amplitude: f,
        differential,
        sigma_angular,
        sigma_optical,
    }
}

/// Partial-wave total cross section (4π/k²) Σ (2l+1) sin² δ_l = (π/k²) Σ (2l+1)|1 - S_l|².
pub fn partial_wave_cross_section(k: f64, s_ell: &[c64]) -> f64 {
    PI / (k * k) * s_ell.iter().enumerate().map(|(l, s)| (2 * l + 1) as f64 * (s - 1.0).norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface_models::Strength;
    use crate::mesh::{direction_quadrature, make_sphere};
    use crate::oracle::{born_amplitude, partial_wave_model};
    use crate::potential_ops::PotentialSpec;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn free_problem_is_identity() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let dirs = direction_quadrature(4).unwrap();
        let s = smatrix_assemble(-1.0, InterfaceModel::NoInterface, &mesh, &VolumeGrid::empty(0.2), &dirs).unwrap();
        assert_eq!(frob(s.kernel.as_ref()), 0.0);
        assert_eq!(s.unitarity_defect(), 0.0);
        for v in phase_shifts(&s, 4).unwrap() {
            assert_eq!(v, c(1.0, 0.0));
        }
        let t = cross_sections(&s);
        assert_eq!(t.sigma_total_angular, 0.0);
        assert_eq!(t.sigma_total_optical, 0.0);
        let id = ScatteringMatrix::identity(-1.0, &dirs);
        assert_eq!(phase_shifts(&id, 2).unwrap(), vec![c(1.0, 0.0); 3]);
    }

    #[test]
    fn pair_apply_block_structure() {
        let mesh = make_sphere(1.0, 1).unwrap();
        let z = SpectralParam::boundary(-1.0, LimitSide::Plus).unwrap();
        // v = 0, δ: volume slot empty, boundary slot = Λ̂ (trace of plane wave).
        let msys = ModelSystem::new(&mesh, &VolumeGrid::empty(0.2), InterfaceModel::Delta(Strength::Constant(1.0)), z).unwrap();
        let xi = [0.0, 0.6, 0.8];
        let (vol, bnd) = lambda_plus_pair_apply(&msys, -1.0, xi).unwrap();
        assert!(vol.is_empty());
        let direct = msys.lambda_hat_apply(&far_field_row(&mesh, -1.0, xi, LayerKind::SL).unwrap());
        for (a, b) in bnd.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-14);
        }
        // Weak v without interface: volume slot = v e^{ikξ·x} + O(v²).
        let eps = 1e-4;
        let pot = PotentialSpec::gaussian(eps, 0.5, 1.0, [0.0; 3]).unwrap();
        let grid = VolumeGrid::new(&pot, 0.25, 10_000).unwrap();
        let msys = ModelSystem::new(&mesh, &grid, InterfaceModel::NoInterface, z).unwrap();
        let (vol, bnd) = lambda_plus_pair_apply(&msys, -1.0, xi).unwrap();
        assert!(bnd.is_empty());
        let mut num = 0.0;
        let mut den = 0.0;
        for ((x, v), out) in grid.centers().iter().zip(grid.v()).zip(&vol) {
            let born = c(0.0, dot(xi, *x)).exp() * *v;
            num += (out - born).norm_sqr();
            den += born.norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-3, "{}", (num / den).sqrt());
    }

    #[test]
    fn weak_potential_kernel_matches_born() {
        let pot = PotentialSpec::gaussian(1e-3, 0.5, 1.5, [0.0; 3]).unwrap();
        let grid = VolumeGrid::new(&pot, 0.2, 10_000).unwrap();
        let mesh = make_sphere(1.0, 0).unwrap();
        let msys = scattering_system(-1.0, InterfaceModel::NoInterface, &mesh, &grid).unwrap();
        let inc = [[0.0, 0.0, 1.0]];
        let angles = [0.0, 0.5, 1.2, 2.0, 3.0];
        let out: Vec<Point> = angles.iter().map(|t: &f64| [t.sin(), 0.0, t.cos()]).collect();
        let k = smatrix_kernel(&msys, -1.0, &inc, &out).unwrap();
        for (i, t) in angles.iter().enumerate() {
            let b = born_amplitude(&pot, -1.0, *t).unwrap();
            assert!((k[(i, 0)] - b).norm() < 5e-3 * b.norm(), "θ = {t}: {} vs {b}", k[(i, 0)]);
        }
        // Attractive potential: forward kernel has negative imaginary part.
        assert!(k[(0, 0)].im < 0.0);
    }

    #[test]
    fn hard_sphere_level_one_is_close_to_oracle() {
        let mesh = make_sphere(1.0, 2).unwrap();
        let dirs = direction_quadrature(6).unwrap();
        let s = smatrix_assemble(-1.0, InterfaceModel::Dirichlet, &mesh, &VolumeGrid::empty(0.2), &dirs).unwrap();
        let sl = phase_shifts(&s, 3).unwrap();
        let oracle = partial_wave_model(1.0, &InterfaceModel::Dirichlet, None, -1.0, 3).unwrap();
        for l in 0..3 {
            assert!((sl[l] - oracle[l]).norm() < 0.05, "l {l}: {} vs {}", sl[l], oracle[l]);
        }
        assert!(s.unitarity_defect() < 0.1, "{}", s.unitarity_defect());
        assert!(s.reciprocity_defect().unwrap() < 0.05);
        let t = cross_sections(&s);
        assert!((t.sigma_total_angular / t.sigma_total_optical - 1.0).abs() < 0.1);
        let exact = partial_wave_cross_section(1.0, &partial_wave_model(1.0, &InterfaceModel::Dirichlet, None, -1.0, 10).unwrap());
        assert!((t.sigma_total_optical / exact - 1.0).abs() < 0.1, "{} vs {exact}", t.sigma_total_optical);
    }

    #[test]
    fn non_radial_configuration_is_rejected() {
        let mesh = make_sphere(1.0, 1).unwrap().mapped(|p| [p[0] + 0.6 * p[2] * p[2], p[1], p[2]]).unwrap();
        let dirs = direction_quadrature(4).unwrap();
        let s = smatrix_assemble(-4.0, InterfaceModel::Dirichlet, &mesh, &VolumeGrid::empty(0.2), &dirs).unwrap();
        assert!(matches!(phase_shifts(&s, 3), Err(Error::NotRadial { .. })));
    }

    #[test]
    fn rejects_interior_spectral_parameter() {
        let mesh = make_sphere(1.0, 0).unwrap();
        let msys = ModelSystem::new(&mesh, &VolumeGrid::empty(0.2), InterfaceModel::Dirichlet, SpectralParam::real(1.0).unwrap()).unwrap();
        assert!(smatrix_kernel(&msys, -1.0, &[[0.0, 0.0, 1.0]], &[[0.0, 0.0, 1.0]]).is_err());
        assert!(default_ell_max(1.0, 1.0) == 6);
    }
}
