//! Matrix-scale Krein resolvent construction.
//!
//! H = C^n, h = C^{m1} (+) C^{m2}, tau = tau1 (+) tau2 stacked row-wise.
//! Conventions: R_z = (-A + z)^{-1}, G_z = R_z tau^*, G_{zbar}^* = tau R_z,
//! M_z = (1 (+) B0) - (B1 (+) B2) tau G_z, Lambda_z = M_z^{-1} (B1 (+) B2).

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, block_diag, identity, CMat, Factorization, COND_LIMIT};

#[derive(Clone, Debug)]
pub struct KreinSystem {
    a: CMat,
    tau1: CMat,
    tau2: CMat,
    b0: CMat,
    b1: CMat,
    b2: CMat,
}

/// Relative tolerance for the structural invariants checked at construction.
const INVARIANT_TOL: f64 = 1e-10;

impl KreinSystem {
    pub fn new(a: CMat, tau1: CMat, tau2: CMat, b0: CMat, b1: CMat, b2: CMat) -> Result<Self> {
        let n = a.nrows();
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if a.ncols() != n || n == 0 {
            return bad(format!("A must be square and nonempty, got {}x{}", a.nrows(), a.ncols()));
        }
        if tau1.ncols() != n || tau2.ncols() != n {
            return bad("tau1 and tau2 must have n columns".into());
        }
        let (m1, m2) = (tau1.nrows(), tau2.nrows());
        if b1.nrows() != m1 || b1.ncols() != m1 {
            return bad(format!("B1 must be {m1}x{m1}"));
        }
        // M must be square, so the image space of (B0, B2) has dimension m2.
        if b0.nrows() != m2 || b0.ncols() != m2 || b2.nrows() != m2 || b2.ncols() != m2 {
            return bad(format!("B0 and B2 must be {m2}x{m2}"));
        }
        let herm_defect = |x: MatRef<'_, c64>| linalg::rel_diff(x, adjoint(x).as_ref(), 1e-300);
        if herm_defect(a.as_ref()) > INVARIANT_TOL {
            return bad("A is not Hermitian".into());
        }
        if m1 > 0 && herm_defect(b1.as_ref()) > INVARIANT_TOL {
            return bad("B1 is not Hermitian".into());
        }
        if m2 > 0 {
            let lhs = &b0 * b2.adjoint();
            let rhs = &b2 * b0.adjoint();
            let scale = b0.norm_l2() * b2.norm_l2();
            if (&lhs - &rhs).norm_l2() > INVARIANT_TOL * scale.max(1e-300) {
                return bad("B0 B2^* != B2 B0^*".into());
            }
        }
        Ok(KreinSystem { a, tau1, tau2, b0, b1, b2 })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m1(&self) -> usize {
        self.tau1.nrows()
    }
    pub fn m2(&self) -> usize {
        self.tau2.nrows()
    }
    pub fn a(&self) -> MatRef<'_, c64> {
        self.a.as_ref()
    }
    pub fn tau1(&self) -> MatRef<'_, c64> {
        self.tau1.as_ref()
    }
    pub fn tau2(&self) -> MatRef<'_, c64> {
        self.tau2.as_ref()
    }
    pub fn b0(&self) -> MatRef<'_, c64> {
        self.b0.as_ref()
    }
    pub fn b1(&self) -> MatRef<'_, c64> {
        self.b1.as_ref()
    }
    pub fn b2(&self) -> MatRef<'_, c64> {
        self.b2.as_ref()
    }

    /// tau = [tau1; tau2].
    pub fn tau(&self) -> CMat {
        linalg::vstack(self.tau1.as_ref(), self.tau2.as_ref())
    }

    /// B1 (+) B2.
    pub fn b12(&self) -> CMat {
        block_diag(self.b1.as_ref(), self.b2.as_ref())
    }

    /// 1 (+) B0.
    pub fn one_b0(&self) -> CMat {
        block_diag(identity(self.m1()).as_ref(), self.b0.as_ref())
    }

    /// Random admissible system: A from the Gaussian Hermitian ensemble,
    /// B1 = (X + X^*)/2, and B0 = P U diag(c) U^*, B2 = P U diag(d) U^*
    /// with real c, d, so that B0 B2^* = P U diag(cd) U^* P^* is Hermitian.
    /// With `b0_invertible` the entries of c stay away from zero.
    pub fn random<R: Rng>(rng: &mut R, n: usize, m1: usize, m2: usize, b0_invertible: bool) -> Self {
        let mut gauss = |r: usize, c: usize, s: f64| -> CMat {
            Mat::from_fn(r, c, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                c64::new(re, im) * s
            })
        };
        let x = gauss(n, n, 1.0 / (2.0 * n as f64).sqrt());
        let a = Mat::from_fn(n, n, |i, j| (x[(i, j)] + x[(j, i)].conj()) * 0.5);
        let tau1 = gauss(m1, n, 1.0 / (n as f64).sqrt());
        let tau2 = gauss(m2, n, 1.0 / (n as f64).sqrt());
        let y = gauss(m1, m1, 1.0);
        let b1 = Mat::from_fn(m1, m1, |i, j| (y[(i, j)] + y[(j, i)].conj()) * 0.5);
        let p = &identity(m2) + &gauss(m2, m2, 0.3);
        let q = gauss(m2, m2, 1.0);
        let u = if m2 > 0 { q.qr().compute_Q() } else { Mat::zeros(0, 0) };
        let mut diag_c = Vec::with_capacity(m2);
        let mut diag_d = Vec::with_capacity(m2);
        for _ in 0..m2 {
            let c: f64 = rng.sample(StandardNormal);
            let d: f64 = rng.sample(StandardNormal);
            let c = if b0_invertible { c.signum() * (0.5 + c.abs()) } else { c };
            diag_c.push(c);
            diag_d.push(d);
        }
        let dc = Mat::from_fn(m2, m2, |i, j| if i == j { c64::new(diag_c[i], 0.0) } else { c64::new(0.0, 0.0) });
        let dd = Mat::from_fn(m2, m2, |i, j| if i == j { c64::new(diag_d[i], 0.0) } else { c64::new(0.0, 0.0) });
        let pu = &p * &u;
        let b0 = &(&pu * &dc) * u.adjoint();
        let b2 = &(&pu * &dd) * u.adjoint();
        KreinSystem::new(a, tau1, tau2, b0, b1, b2).expect("random construction is admissible")
    }
}

/// R_z and G_z for one spectral parameter.
pub struct ResolventFamily {
    pub z: c64,
    pub r: CMat,
    pub g: CMat,
    pub m1: usize,
}

impl ResolventFamily {
    pub fn new(sys: &KreinSystem, z: c64) -> Result<Self> {
        let n = sys.n();
        let shifted = Mat::from_fn(n, n, |i, j| {
            let d = if i == j { z } else { c64::new(0.0, 0.0) };
            d - sys.a[(i, j)]
        });
        let scale = linalg::norm1(sys.a.as_ref()) + z.norm();
        let f = Factorization::checked_scaled(shifted.as_ref(), scale, COND_LIMIT, |cond| Error::SingularResolvent { cond })?;
        let r = f.inverse();
        let g = &r * sys.tau().adjoint();
        Ok(ResolventFamily { z, r, g, m1: sys.m1() })
    }

    pub fn g1(&self) -> MatRef<'_, c64> {
        self.g.as_ref().submatrix(0, 0, self.g.nrows(), self.m1)
    }

    pub fn g2(&self) -> MatRef<'_, c64> {
        let m = self.g.ncols();
        self.g.as_ref().submatrix(0, self.m1, self.g.nrows(), m - self.m1)
    }
}

/// M^B_z assembled directly.
pub fn m_matrix(sys: &KreinSystem, fam: &ResolventFamily) -> CMat {
    m_matrix_scaled(sys, fam).0
}

/// M^B_z together with the 1-norm scale of its two summands.
fn m_matrix_scaled(sys: &KreinSystem, fam: &ResolventFamily) -> (CMat, f64) {
    let one_b0 = sys.one_b0();
    let coupling = &sys.b12() * &(&sys.tau() * &fam.g);
    let scale = linalg::norm1(one_b0.as_ref()) + linalg::norm1(coupling.as_ref());
    (&one_b0 - &coupling, scale)
}

fn checked_m(sys: &KreinSystem, fam: &ResolventFamily) -> Result<Factorization> {
    let (m, scale) = m_matrix_scaled(sys, fam);
    Factorization::checked_scaled(m.as_ref(), scale, COND_LIMIT, |cond| Error::SingularM { cond })
}

/// Lambda^B_z = M^{-1}(B1 (+) B2), checking invertibility of M at z and zbar.
pub fn lambda(sys: &KreinSystem, z: c64) -> Result<CMat> {
    let fam = ResolventFamily::new(sys, z)?;
    lambda_from(sys, &fam, true)
}

fn lambda_from(sys: &KreinSystem, fam: &ResolventFamily, check_conj: bool) -> Result<CMat> {
    let f = checked_m(sys, fam)?;
    if check_conj {
        let fam_bar = ResolventFamily::new(sys, fam.z.conj())?;
        checked_m(sys, &fam_bar)?;
    }
    Ok(f.solve(sys.b12().as_ref()))
}

/// R^B_z = R_z + G_z Lambda_z G_{zbar}^*.
pub fn krein_resolvent(sys: &KreinSystem, z: c64) -> Result<CMat> {
    let fam = ResolventFamily::new(sys, z)?;
    let lam = lambda_from(sys, &fam, true)?;
    let g_bar_adj = &sys.tau() * &fam.r;
    Ok(&fam.r + &(&(&fam.g * &lam) * &g_bar_adj))
}

/// A_B = z - (R^B_z)^{-1}, rejecting non-injective R^B_z.
pub fn recovered_operator(sys: &KreinSystem, z: c64) -> Result<CMat> {
    let rb = krein_resolvent(sys, z)?;
    let f = Factorization::checked(rb.as_ref(), COND_LIMIT, |cond| {
        Error::NumericalFailure(format!("R^B_z is not injective (cond ~ {cond:.3e})"))
    })?;
    let inv = f.inverse();
    let n = sys.n();
    Ok(Mat::from_fn(n, n, |i, j| if i == j { z - inv[(i, j)] } else { -inv[(i, j)] }))
}

#[derive(Clone, Debug)]
pub struct LambdaBlocks {
    pub m: CMat,
    pub lambda: CMat,
    pub lambda_b1: CMat,
    pub lambda_b0b2: CMat,
    pub sigma: CMat,
    pub lambda_hat: CMat,
    pub c: CMat,
}

struct SchurParts {
    lambda_b1: CMat,
    lambda_b0b2: CMat,
    sigma: CMat,
    lambda_hat: CMat,
    c: CMat,
    t1g2: CMat,
    t2g1: CMat,
}

fn schur_parts(sys: &KreinSystem, fam: &ResolventFamily) -> Result<SchurParts> {
    let (m1, m2) = (sys.m1(), sys.m2());
    let t1g1 = sys.tau1() * fam.g1();
    let t1g2 = sys.tau1() * fam.g2();
    let t2g1 = sys.tau2() * fam.g1();
    let t2g2 = sys.tau2() * fam.g2();

    let b1t1g1 = sys.b1() * &t1g1;
    let m_b1 = &identity(m1) - &b1t1g1;
    let scale = 1.0 + linalg::norm1(b1t1g1.as_ref());
    let f_b1 = Factorization::checked_scaled(m_b1.as_ref(), scale, COND_LIMIT, |cond| Error::SingularMB1 { cond })?;
    let lambda_b1 = f_b1.solve(sys.b1());

    let b2t2g2 = sys.b2() * &t2g2;
    let m_b0b2 = &sys.b0().to_owned() - &b2t2g2;
    let scale = linalg::norm1(sys.b0()) + linalg::norm1(b2t2g2.as_ref());
    let f_b0b2 = Factorization::checked_scaled(m_b0b2.as_ref(), scale, COND_LIMIT, |cond| Error::SingularMB0B2 { cond })?;
    let lambda_b0b2 = f_b0b2.solve(sys.b2());

    let coupling = &(&(&lambda_b0b2 * &t2g1) * &lambda_b1) * &t1g2;
    let sigma_inv = &identity(m2) - &coupling;
    let scale = 1.0 + linalg::norm1(coupling.as_ref());
    let f_sigma = Factorization::checked_scaled(sigma_inv.as_ref(), scale, COND_LIMIT, |cond| Error::SingularSigma { cond })?;
    let sigma = f_sigma.inverse();
    let lambda_hat = &sigma * &lambda_b0b2;
    let c = &m_b0b2 - &(&(&(sys.b2() * &t2g1) * &lambda_b1) * &t1g2);
    Ok(SchurParts { lambda_b1, lambda_b0b2, sigma, lambda_hat, c, t1g2, t2g1 })
}

/// Block solve of M^B_z through the Schur complement of M^{B1}_z.
pub fn schur_blocks(sys: &KreinSystem, z: c64) -> Result<LambdaBlocks> {
    let fam = ResolventFamily::new(sys, z)?;
    let fam_bar = ResolventFamily::new(sys, z.conj())?;
    schur_parts(sys, &fam_bar)?;
    let p = schur_parts(sys, &fam)?;
    let (m1, m2) = (sys.m1(), sys.m2());
    let l1 = &p.lambda_b1;
    let lh = &p.lambda_hat;
    let l1_t1g2 = l1 * &p.t1g2;
    let t2g1_l1 = &p.t2g1 * l1;
    let mut lambda = Mat::<c64>::zeros(m1 + m2, m1 + m2);
    let top_left = l1 + &(&(&l1_t1g2 * lh) * &t2g1_l1);
    let top_right = &l1_t1g2 * lh;
    let bottom_left = lh * &t2g1_l1;
    lambda.as_mut().submatrix_mut(0, 0, m1, m1).copy_from(&top_left);
    lambda.as_mut().submatrix_mut(0, m1, m1, m2).copy_from(&top_right);
    lambda.as_mut().submatrix_mut(m1, 0, m2, m1).copy_from(&bottom_left);
    lambda.as_mut().submatrix_mut(m1, m1, m2, m2).copy_from(lh);
    Ok(LambdaBlocks {
        m: m_matrix(sys, &fam),
        lambda,
        lambda_b1: p.lambda_b1,
        lambda_b0b2: p.lambda_b0b2,
        sigma: p.sigma,
        lambda_hat: p.lambda_hat,
        c: p.c,
    })
}

/// R^{B1}_z and G^{B1}_z.
fn b1_pieces(sys: &KreinSystem, fam: &ResolventFamily, lambda_b1: &CMat) -> (CMat, CMat) {
    let r_b1 = &fam.r + &(&(fam.g1() * lambda_b1) * &(sys.tau1() * &fam.r));
    let g_b1 = fam.g2() + &(&(fam.g1() * lambda_b1) * &(sys.tau1() * fam.g2()));
    (r_b1, g_b1)
}

/// R^B_z = R^{B1}_z + G^{B1}_z LambdaHat_z (G^{B1}_{zbar})^*.
pub fn alt_resolvent(sys: &KreinSystem, z: c64) -> Result<CMat> {
    let fam = ResolventFamily::new(sys, z)?;
    let fam_bar = ResolventFamily::new(sys, z.conj())?;
    let p_bar = schur_parts(sys, &fam_bar)?;
    let p = schur_parts(sys, &fam)?;
    let (r_b1, g_b1) = b1_pieces(sys, &fam, &p.lambda_b1);
    let (_, g_b1_bar) = b1_pieces(sys, &fam_bar, &p_bar.lambda_b1);
    Ok(&r_b1 + &(&(&g_b1 * &p.lambda_hat) * g_b1_bar.adjoint()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryResiduals {
    /// Green identity <u, A_B v> - <Au, v> - <tau u, rho_B v> over the standard basis u = e_i.
    pub green: f64,
    /// (pi1 B1 (+) B2) tau v - (1 (+) B0) rho_B v.
    pub boundary: f64,
    /// A_B v - (A + tau1^* B1 tau1 + tau2^* B0^{-1} B2 tau2) v; `None` when not requested.
    pub additive: Option<f64>,
}

/// Residuals of the Green identity, the abstract boundary condition and the
/// additive representation, evaluated on v = f.
pub fn rho_and_boundary_check(sys: &KreinSystem, z: c64, f: &[c64], additive: bool) -> Result<BoundaryResiduals> {
    let n = sys.n();
    let (m1, m2) = (sys.m1(), sys.m2());
    if f.len() != n {
        return Err(Error::InvalidInput(format!("f has length {}, expected {n}", f.len())));
    }
    let b0_factor = if additive {
        Some(Factorization::checked(sys.b0(), COND_LIMIT, |cond| Error::SingularB0 { cond })?)
    } else {
        None
    };
    let fam = ResolventFamily::new(sys, z)?;
    let lam = lambda_from(sys, &fam, true)?;
    let a_b = recovered_operator(sys, z)?;
    let rb = krein_resolvent(sys, z)?;
    let rb_inv = Factorization::new(rb.as_ref()).inverse();
    let pi1 = linalg::range_projector(sys.tau1(), 1e-12);
    let proj = block_diag(pi1.as_ref(), identity(m2).as_ref());
    // rho_B(R^B_z w) = (pi1 (+) 1) Lambda_z tau R_z w, and w = (R^B_z)^{-1} v.
    let rho = &(&(&(&proj * &lam) * &sys.tau()) * &fam.r) * &rb_inv;

    let v = linalg::col_from_slice(f);
    let fnorm = v.norm_l2().max(1e-300);
    let scale = (sys.a.norm_l2() + a_b.norm_l2() + 1.0) * fnorm;

    let tau = sys.tau();
    let rho_v = &rho * &v;
    let a_b_v = &a_b * &v;
    let a_v = &sys.a * &v;
    // <e_i, A_B v> - <A e_i, v> - <tau e_i, rho v>, i.e. the i-th entry of A_B v - A v - tau^* rho v.
    let green_vec = &(&a_b_v - &a_v) - &(tau.adjoint() * &rho_v);
    let green = green_vec.norm_l2() / scale;

    let lhs = &block_diag((&pi1 * sys.b1()).as_ref(), sys.b2()) * &(&tau * &v);
    let rhs = &sys.one_b0() * &rho_v;
    let boundary = (&lhs - &rhs).norm_l2() / scale;

    let additive = if let Some(fb0) = b0_factor {
        let b0inv_b2 = fb0.solve(sys.b2());
        let mut op = sys.a.clone();
        if m1 > 0 {
            op = &op + &(&(sys.tau1().adjoint() * sys.b1()) * sys.tau1());
        }
        if m2 > 0 {
            op = &op + &(&(sys.tau2().adjoint() * &b0inv_b2) * sys.tau2());
        }
        Some((&a_b_v - &(&op * &v)).norm_l2() / scale)
    } else {
        None
    };
    Ok(BoundaryResiduals { green, boundary, additive })
}

/// Summary of the abstract identities for one system at three spectral points.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityReport {
    pub ps1: f64,
    pub ps2: f64,
    pub pseudo_resolvent: f64,
    pub resolvent_symmetry: f64,
    pub hermiticity: f64,
    pub z_independence: f64,
    pub block_equivalence: f64,
    pub schur_lambda: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        [
            self.ps1,
            self.ps2,
            self.pseudo_resolvent,
            self.resolvent_symmetry,
            self.hermiticity,
            self.z_independence,
            self.block_equivalence,
            self.schur_lambda,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Relative residuals of every abstract identity at the points `zs`.
pub fn identity_report(sys: &KreinSystem, zs: [c64; 3]) -> Result<IdentityReport> {
    let mut rep = IdentityReport::default();
    let fams: Vec<ResolventFamily> = zs.iter().map(|&z| ResolventFamily::new(sys, z)).collect::<Result<_>>()?;
    let lams: Vec<CMat> = fams.iter().map(|f| lambda_from(sys, f, true)).collect::<Result<_>>()?;
    let rbs: Vec<CMat> = zs.iter().map(|&z| krein_resolvent(sys, z)).collect::<Result<_>>()?;
    let tau = sys.tau();
    for (k, &z) in zs.iter().enumerate() {
        let lam_bar = lambda(sys, z.conj())?;
        rep.ps1 = rep.ps1.max(linalg::rel_diff(lam_bar.as_ref(), adj(&lams[k]).as_ref(), 1e-300));
        let rb_bar = krein_resolvent(sys, z.conj())?;
        rep.resolvent_symmetry = rep.resolvent_symmetry.max(linalg::rel_diff(rb_bar.as_ref(), adj(&rbs[k]).as_ref(), 1e-300));
        let alt = alt_resolvent(sys, z)?;
        rep.block_equivalence = rep.block_equivalence.max(linalg::rel_diff(alt.as_ref(), rbs[k].as_ref(), 1e-300));
        let blocks = schur_blocks(sys, z)?;
        rep.schur_lambda = rep.schur_lambda.max(linalg::rel_diff(blocks.lambda.as_ref(), lams[k].as_ref(), 1e-300));
        let a_b = recovered_operator(sys, z)?;
        rep.hermiticity = rep.hermiticity.max(linalg::rel_diff(a_b.as_ref(), adj(&a_b).as_ref(), 1e-300));
    }
    let a_b0 = recovered_operator(sys, zs[0])?;
    for k in 0..3 {
        let (i, j) = (k, (k + 1) % 3);
        let (z, w) = (zs[i], zs[j]);
        // Lambda_w - Lambda_z = (z - w) Lambda_w G_{wbar}^* G_z Lambda_z.
        let lhs = &lams[j] - &lams[i];
        let g_wbar_adj = &tau * &fams[j].r;
        let rhs = linalg::scale((&(&(&lams[j] * &g_wbar_adj) * &fams[i].g) * &lams[i]).as_ref(), z - w);
        let denom = lams[i].norm_l2() + lams[j].norm_l2();
        rep.ps2 = rep.ps2.max((&lhs - &rhs).norm_l2() / denom.max(1e-300));
        // R^B_z - R^B_w = (w - z) R^B_z R^B_w.
        let lhs = &rbs[i] - &rbs[j];
        let rhs = linalg::scale((&rbs[i] * &rbs[j]).as_ref(), w - z);
        let denom = rbs[i].norm_l2() + rbs[j].norm_l2();
        rep.pseudo_resolvent = rep.pseudo_resolvent.max((&lhs - &rhs).norm_l2() / denom);
        let a_b = recovered_operator(sys, zs[j])?;
        rep.z_independence = rep.z_independence.max(linalg::rel_diff(a_b.as_ref(), a_b0.as_ref(), 1.0));
    }
    Ok(rep)
}

/// Finite-dimensional stand-in for the spectral representation: the
/// eigenvectors of A at the eigenvalue `lambda` play the role of the fiber
/// over lambda, and L = (mu - lambda) E^* R_mu tau^*. The boundary value
/// Lambda^+ is replaced by Lambda at lambda + i eta.
pub struct SpectralSandbox {
    pub fiber: CMat,
    pub lambda: f64,
    pub eta: f64,
}

impl SpectralSandbox {
    /// `fiber` has orthonormal columns spanning the eigenspace of A at `lambda`.
    pub fn from_eigendecomposition(sys: &KreinSystem, lambda: f64, tol: f64, eta: f64) -> Result<Self> {
        let evd = sys
            .a
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::NumericalFailure(format!("eigendecomposition failed: {e:?}")))?;
        let vals = evd.S().column_vector();
        let vecs = evd.U();
        let idx: Vec<usize> = (0..vals.nrows()).filter(|&k| (vals[k].re - lambda).abs() < tol).collect();
        if idx.is_empty() {
            return Err(Error::InvalidInput(format!("{lambda} is not an eigenvalue of A")));
        }
        let fiber = Mat::from_fn(sys.n(), idx.len(), |i, j| vecs[(i, idx[j])]);
        Ok(SpectralSandbox { fiber, lambda, eta })
    }

    /// L_lambda through the auxiliary point mu.
    pub fn l_operator(&self, sys: &KreinSystem, mu: c64) -> Result<CMat> {
        let fam = ResolventFamily::new(sys, mu)?;
        let l = &(self.fiber.adjoint() * &fam.r) * sys.tau().adjoint();
        Ok(linalg::scale(l.as_ref(), mu - self.lambda))
    }

    /// S = 1 - 2 pi i L Lambda L^*.
    pub fn s_matrix(&self, sys: &KreinSystem, mu: c64) -> Result<CMat> {
        let l = self.l_operator(sys, mu)?;
        let lam = lambda(sys, c64::new(self.lambda, self.eta))?;
        let core = &(&l * &lam) * l.adjoint();
        let d = self.fiber.ncols();
        Ok(&identity(d) - &linalg::scale(core.as_ref(), c64::new(0.0, 2.0 * std::f64::consts::PI)))
    }
}

/// Hermitian matrix with a prescribed eigenvalue of multiplicity `mult`
/// (the rest drawn from the Gaussian ensemble) in a random unitary basis.
pub fn matrix_with_eigenvalue<R: Rng>(rng: &mut R, n: usize, lambda: f64, mult: usize) -> CMat {
    let g = Mat::<c64>::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(re, im)
    });
    let q = g.qr().compute_Q();
    let mut d = Mat::<c64>::zeros(n, n);
    for k in 0..n {
        let v = if k < mult {
            lambda
        } else {
            let x: f64 = rng.sample(StandardNormal);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            lambda + sign * (0.5 + x.abs())
        };
        d[(k, k)] = c64::new(v, 0.0);
    }
    let a = &(&q * &d) * q.adjoint();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Convenience: Hermitian adjoint as an owned matrix.
pub fn adj(a: &CMat) -> CMat {
    adjoint(a.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn scalar(x: f64) -> CMat {
        Mat::from_fn(1, 1, |_, _| c(x, 0.0))
    }

    fn rank_one(b: f64) -> KreinSystem {
        KreinSystem::new(scalar(0.0), scalar(1.0), Mat::zeros(0, 1), Mat::zeros(0, 0), scalar(b), Mat::zeros(0, 0)).unwrap()
    }

    #[test]
    fn zero_perturbation_gives_free_resolvent() {
        // B1 = B2 = 0 with B0 = 1; B0 = 0 as well would make M = 1 (+) 0 singular.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = KreinSystem::random(&mut rng, 6, 2, 2, true);
        let sys = KreinSystem::new(
            base.a.clone(),
            base.tau1.clone(),
            base.tau2.clone(),
            identity(2),
            Mat::zeros(2, 2),
            Mat::zeros(2, 2),
        )
        .unwrap();
        let z = c(0.4, 1.3);
        let rb = krein_resolvent(&sys, z).unwrap();
        let r = ResolventFamily::new(&sys, z).unwrap().r;
        assert!(linalg::rel_diff(rb.as_ref(), r.as_ref(), 1e-300) < 1e-14);
    }

    #[test]
    fn rank_one_resolvent_is_explicit() {
        let b = 0.7;
        let sys = rank_one(b);
        for z in [c(1.0, 1.0), c(-2.0, 0.5), c(0.3, -4.0)] {
            let rb = krein_resolvent(&sys, z).unwrap();
            let expected = c64::new(1.0, 0.0) / (z - b);
            assert!((rb[(0, 0)] - expected).norm() < 1e-14);
            // Hand algebra: Lambda = b z / (z - b).
            let lam = lambda(&sys, z).unwrap();
            assert!((lam[(0, 0)] - z * b / (z - b)).norm() < 1e-13);
        }
        let ab = recovered_operator(&sys, c(0.2, 0.9)).unwrap();
        assert!((ab[(0, 0)] - b).norm() < 1e-12);
    }

    #[test]
    fn singular_m_is_reported() {
        // Lambda = b z / (z - b): M = 1 - b/z vanishes at z = b.
        let sys = rank_one(0.7);
        match lambda(&sys, c(0.7, 0.0)) {
            Err(Error::SingularM { .. }) => {}
            other => panic!("expected SingularM, got {other:?}"),
        }
        match krein_resolvent(&sys, c(0.0, 0.0)) {
            Err(Error::SingularResolvent { .. }) => {}
            other => panic!("expected SingularResolvent, got {other:?}"),
        }
    }

    #[test]
    fn pseudo_resolvent_on_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sys = KreinSystem::random(&mut rng, 8, 3, 2, false);
        let (z, w) = (c(0.3, 0.8), c(-0.6, -1.1));
        let rz = krein_resolvent(&sys, z).unwrap();
        let rw = krein_resolvent(&sys, w).unwrap();
        let lhs = &rz - &rw;
        let rhs = linalg::scale((&rz * &rw).as_ref(), w - z);
        assert!((&lhs - &rhs).norm_l2() < 1e-9 * rz.norm_l2());
    }

    #[test]
    fn b1_zero_reduces_schur_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = KreinSystem::random(&mut rng, 7, 2, 3, true);
        let sys = KreinSystem::new(
            base.a.clone(),
            base.tau1.clone(),
            base.tau2.clone(),
            base.b0.clone(),
            Mat::zeros(2, 2),
            base.b2.clone(),
        )
        .unwrap();
        let blocks = schur_blocks(&sys, c(0.5, 1.0)).unwrap();
        assert!(blocks.lambda_b1.norm_l2() == 0.0);
        assert!(linalg::rel_diff(blocks.sigma.as_ref(), identity(3).as_ref(), 1.0) < 1e-15);
        assert!(linalg::rel_diff(blocks.lambda_hat.as_ref(), blocks.lambda_b0b2.as_ref(), 1e-300) < 1e-15);
    }

    #[test]
    fn b2_zero_gives_b1_only_resolvent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = KreinSystem::random(&mut rng, 7, 3, 2, true);
        let sys = KreinSystem::new(
            base.a.clone(),
            base.tau1.clone(),
            base.tau2.clone(),
            identity(2),
            base.b1.clone(),
            Mat::zeros(2, 2),
        )
        .unwrap();
        let z = c(-0.2, 0.7);
        let blocks = schur_blocks(&sys, z).unwrap();
        assert!(blocks.lambda_hat.norm_l2() == 0.0);
        let b1_only = KreinSystem::new(
            base.a.clone(),
            base.tau1.clone(),
            Mat::zeros(0, 7),
            Mat::zeros(0, 0),
            base.b1.clone(),
            Mat::zeros(0, 0),
        )
        .unwrap();
        let r_full = krein_resolvent(&sys, z).unwrap();
        let r_b1 = krein_resolvent(&b1_only, z).unwrap();
        let r_alt = alt_resolvent(&sys, z).unwrap();
        assert!(linalg::rel_diff(r_full.as_ref(), r_b1.as_ref(), 1e-300) < 1e-11);
        assert!(linalg::rel_diff(r_alt.as_ref(), r_b1.as_ref(), 1e-300) < 1e-11);
    }

    #[test]
    fn schur_blocks_match_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sys = KreinSystem::random(&mut rng, 10, 3, 4, false);
        let z = c(0.1, 0.6);
        let direct = lambda(&sys, z).unwrap();
        let blocks = schur_blocks(&sys, z).unwrap();
        assert!(linalg::rel_diff(blocks.lambda.as_ref(), direct.as_ref(), 1e-300) < 1e-10);
        // LambdaHat = C^{-1} B2.
        let c_inv_b2 = Factorization::new(blocks.c.as_ref()).solve(sys.b2());
        assert!(linalg::rel_diff(c_inv_b2.as_ref(), blocks.lambda_hat.as_ref(), 1e-300) < 1e-10);
    }

    #[test]
    fn potential_shift_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 6;
        let base = KreinSystem::random(&mut rng, n, 1, 1, true);
        let v: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64) - 0.5).collect();
        let dv = Mat::from_fn(n, n, |i, j| if i == j { c(v[i], 0.0) } else { c(0.0, 0.0) });
        let sys = KreinSystem::new(
            base.a.clone(),
            identity(n),
            Mat::zeros(1, n),
            identity(1),
            dv.clone(),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let z = c(0.25, 0.9);
        let alt = alt_resolvent(&sys, z).unwrap();
        let shifted = Mat::from_fn(n, n, |i, j| if i == j { z } else { c(0.0, 0.0) } - base.a[(i, j)] - dv[(i, j)]);
        let direct = Factorization::new(shifted.as_ref()).inverse();
        assert!(linalg::rel_diff(alt.as_ref(), direct.as_ref(), 1e-300) < 1e-11);
    }

    #[test]
    fn boundary_residuals_vanish() {
        let sys = KreinSystem::new(
            scalar(0.0),
            scalar(1.0),
            Mat::zeros(0, 1),
            Mat::zeros(0, 0),
            scalar(0.0),
            Mat::zeros(0, 0),
        )
        .unwrap();
        let r = rho_and_boundary_check(&sys, c(0.5, 1.0), &[c(1.0, 0.0)], false).unwrap();
        assert!(r.green < 1e-15 && r.boundary < 1e-15);

        let sys = rank_one(0.7);
        let r = rho_and_boundary_check(&sys, c(0.5, 1.0), &[c(1.0, -2.0)], true).unwrap();
        assert!(r.additive.unwrap() < 1e-14, "{r:?}");

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sys = KreinSystem::random(&mut rng, 9, 3, 3, true);
        let f: Vec<c64> = (0..9).map(|i| c(1.0 / (1.0 + i as f64), 0.3 * i as f64)).collect();
        let r = rho_and_boundary_check(&sys, c(0.3, 0.7), &f, true).unwrap();
        assert!(r.green < 1e-9 && r.boundary < 1e-9 && r.additive.unwrap() < 1e-9, "{r:?}");
    }

    #[test]
    fn rank_deficient_tau1_uses_exact_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // m1 = 5 > n = 3, so ran(tau1) is a proper subspace of C^5.
        let base = KreinSystem::random(&mut rng, 3, 5, 1, true);
        let r = rho_and_boundary_check(&base, c(0.2, 0.8), &[c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5)], true).unwrap();
        assert!(r.green < 1e-9 && r.boundary < 1e-9, "{r:?}");
    }

    #[test]
    fn singular_b0_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = KreinSystem::random(&mut rng, 5, 1, 2, true);
        let sys = KreinSystem::new(
            base.a.clone(),
            base.tau1.clone(),
            base.tau2.clone(),
            Mat::zeros(2, 2),
            base.b1.clone(),
            identity(2),
        )
        .unwrap();
        match rho_and_boundary_check(&sys, c(0.1, 1.0), &[c(1.0, 0.0); 5], true) {
            Err(Error::SingularB0 { .. }) => {}
            other => panic!("expected SingularB0, got {other:?}"),
        }
    }

    #[test]
    fn inadmissible_triples_are_rejected() {
        let a = scalar(0.0);
        let res = KreinSystem::new(a.clone(), scalar(1.0), Mat::zeros(0, 1), Mat::zeros(0, 0), Mat::from_fn(1, 1, |_, _| c(0.0, 1.0)), Mat::zeros(0, 0));
        assert!(matches!(res, Err(Error::InvalidInput(_))));
        let b0 = Mat::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, 0.0));
        let b2 = Mat::from_fn(2, 2, |i, j| c(1.0 + (i * j) as f64, 0.5));
        let res = KreinSystem::new(Mat::zeros(2, 2), Mat::zeros(0, 2), identity(2), b0, Mat::zeros(0, 0), b2);
        assert!(matches!(res, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn l_operator_is_mu_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let n = 8;
        let a = matrix_with_eigenvalue(&mut rng, n, -0.4, 3);
        let base = KreinSystem::random(&mut rng, n, 2, 2, true);
        let sys = KreinSystem::new(a, base.tau1.clone(), base.tau2.clone(), base.b0.clone(), base.b1.clone(), base.b2.clone()).unwrap();
        let sb = SpectralSandbox::from_eigendecomposition(&sys, -0.4, 1e-8, 0.05).unwrap();
        assert_eq!(sb.fiber.ncols(), 3);
        let l1 = sb.l_operator(&sys, c(1.5, 0.7)).unwrap();
        let l2 = sb.l_operator(&sys, c(-3.0, 2.0)).unwrap();
        assert!(linalg::rel_diff(l1.as_ref(), l2.as_ref(), 1e-300) < 1e-12);
    }
}
