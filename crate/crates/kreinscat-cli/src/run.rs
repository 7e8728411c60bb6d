//! Run modes and their artifacts.

use std::fs;
use std::path::Path;
use std::time::Instant;

use kreinscat::interface_models::{boundary_condition_residual, InterfaceModel, ModelSystem};
use kreinscat::layer_ops::{relative_trace_defect, trace_norm, LayerKind, SpectralParam, TraceProbe};
use kreinscat::mesh::{direction_quadrature, DirectionSet, SurfaceMesh};
use kreinscat::operator_core::{identity_report, IdentityReport, KreinSystem};
use kreinscat::oracle::partial_wave_model;
use kreinscat::potential_ops::{Source, VolumeGrid};
use kreinscat::smatrix::{cross_sections, phase_shifts, scattering_system, smatrix_from_system, ScatteringMatrix, CONVENTION, RADIAL_TOL};
use kreinscat::{c64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};
use crate::CliError;

/// Version of the CSV column sets and JSON keys written by this crate.
pub const FORMAT_VERSION: u32 = 1;

/// Spectral points of the abstract identity suite.
const ABSTRACT_POINTS: [c64; 3] = [c64::new(0.7, 1.3), c64::new(-1.1, 0.4), c64::new(2.0, -0.9)];

/// Outcome of a run: the summary written to disk and whether its checks passed.
#[derive(Debug)]
pub struct Report {
    pub summary: Value,
    pub passed: bool,
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    fs::create_dir_all(&cfg.output).map_err(|e| CliError::Io(cfg.output.display().to_string(), e))?;
    let start = Instant::now();
    let (results, passed) = match cfg.mode {
        Mode::AbstractCheck => abstract_check(cfg)?,
        Mode::Smatrix => scattering(cfg, false)?,
        Mode::CrossSection => scattering(cfg, true)?,
        Mode::OracleCompare => oracle_compare(cfg)?,
        Mode::Convergence => convergence(cfg)?,
    };
    let summary = json!({
        "format_version": FORMAT_VERSION,
        "mode": cfg.mode.name(),
        "seed": cfg.seed,
        "convention": CONVENTION,
        "config": cfg.entries,
        "passed": passed,
        "results": results,
    });
    write(&cfg.output.join("summary.json"), &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?;
    // Kept apart so summary.json stays reproducible.
    let timing = json!({ "format_version": FORMAT_VERSION, "wall_clock_seconds": start.elapsed().as_secs_f64() });
    write(&cfg.output.join("timing.json"), &(serde_json::to_string_pretty(&timing).expect("json") + "\n"))?;
    Ok(Report { summary, passed })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Csv(path.display().to_string(), e))
}

fn csv_row<I, T>(w: &mut csv::Writer<fs::File>, path: &Path, row: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| CliError::Csv(path.display().to_string(), e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn report_row(r: &IdentityReport) -> [f64; 8] {
    [r.ps1, r.ps2, r.pseudo_resolvent, r.resolvent_symmetry, r.hermiticity, r.z_independence, r.block_equivalence, r.schur_lambda]
}

const REPORT_COLUMNS: [&str; 8] = ["ps1", "ps2", "pseudo_resolvent", "resolvent_symmetry", "hermiticity", "z_independence", "block_equivalence", "schur_lambda"];

fn abstract_check(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let path = cfg.output.join("residuals.csv");
    let mut w = csv_writer(&path)?;
    csv_row(&mut w, &path, ["index", "n", "m1", "m2"].into_iter().chain(REPORT_COLUMNS))?;
    let mut worst = [0.0f64; 8];
    for idx in 0..cfg.abstract_count {
        let n = rng.random_range(3..=cfg.abstract_max_dim.max(3));
        let m1 = rng.random_range(1..=3.min(n));
        let m2 = rng.random_range(1..=3.min(n));
        let sys = KreinSystem::random(&mut rng, n, m1, m2, true);
        let row = report_row(&identity_report(&sys, ABSTRACT_POINTS)?);
        for (w, r) in worst.iter_mut().zip(row) {
            *w = w.max(r);
        }
        let fields = [idx.to_string(), n.to_string(), m1.to_string(), m2.to_string()].into_iter().chain(row.iter().map(|r| format!("{r:e}")));
        csv_row(&mut w, &path, fields)?;
    }
    finish(w, &path)?;
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let passed = max <= cfg.abstract_tol;
    let per: serde_json::Map<String, Value> = REPORT_COLUMNS.iter().zip(worst).map(|(k, v)| (k.to_string(), json!(v))).collect();
    println!("abstract-check: {} systems, max residual {max:.3e} (tol {:.1e})", cfg.abstract_count, cfg.abstract_tol);
    for (k, v) in REPORT_COLUMNS.iter().zip(worst) {
        println!("  {k:<20} {v:.3e}");
    }
    Ok((json!({ "systems": cfg.abstract_count, "max_residual": max, "tolerance": cfg.abstract_tol, "max_by_identity": per }), passed))
}

fn factor_name(model: &InterfaceModel) -> &'static str {
    match model {
        InterfaceModel::Delta(_) => "1 - alpha S^v",
        InterfaceModel::Dirichlet => "S^v",
        InterfaceModel::Neumann => "D^v",
        InterfaceModel::DeltaPrime(_) => "theta - D^v",
        InterfaceModel::NoInterface => "none",
    }
}

/// Boundary-value system at λ + i0 with the configured condition limit.
fn system(cfg: &RunConfig, lambda: f64, mesh: &SurfaceMesh, grid: &VolumeGrid) -> Result<ModelSystem, CliError> {
    let msys = scattering_system(lambda, cfg.model.clone(), mesh, grid)?;
    check_conditions(cfg, &msys)?;
    Ok(msys)
}

fn check_conditions(cfg: &RunConfig, msys: &ModelSystem) -> Result<(), CliError> {
    let (cv, ci) = msys.conditions();
    if cv > cfg.cond_limit {
        return Err(Error::SingularLS { cond: cv }.into());
    }
    if let Some(ci) = ci.filter(|c| *c > cfg.cond_limit) {
        return Err(Error::SingularInterfaceOperator { factor: factor_name(&msys.model), cond: ci }.into());
    }
    Ok(())
}

fn write_directions(cfg: &RunConfig, dirs: &DirectionSet) -> Result<(), CliError> {
    let path = cfg.output.join("directions.csv");
    let mut w = csv_writer(&path)?;
    csv_row(&mut w, &path, ["index", "x", "y", "z", "weight"])?;
    for (i, (d, wt)) in dirs.directions.iter().zip(&dirs.weights).enumerate() {
        csv_row(&mut w, &path, [i.to_string(), format!("{:e}", d[0]), format!("{:e}", d[1]), format!("{:e}", d[2]), format!("{wt:e}")])?;
    }
    finish(w, &path)
}

fn energy_file(cfg: &RunConfig, stem: &str, idx: usize) -> std::path::PathBuf {
    if cfg.energies.len() == 1 {
        cfg.output.join(format!("{stem}.csv"))
    } else {
        cfg.output.join(format!("{stem}_{idx}.csv"))
    }
}

fn write_smatrix(path: &Path, s: &ScatteringMatrix) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, ["i", "j", "re", "im"])?;
    for j in 0..s.len() {
        for i in 0..s.len() {
            let v = s.kernel[(i, j)];
            csv_row(&mut w, path, [i.to_string(), j.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
        }
    }
    finish(w, path)
}

fn complex_list(v: &[c64]) -> Value {
    Value::Array(v.iter().enumerate().map(|(l, s)| json!({ "l": l, "re": s.re, "im": s.im })).collect())
}

fn scattering(cfg: &RunConfig, amplitudes: bool) -> Result<(Value, bool), CliError> {
    let mesh = cfg.mesh(cfg.level)?;
    let grid = cfg.grid()?;
    let dirs = direction_quadrature(cfg.n_polar)?;
    write_directions(cfg, &dirs)?;
    let mut per_energy = Vec::new();
    for (idx, &lambda) in cfg.energies.iter().enumerate() {
        let msys = system(cfg, lambda, &mesh, &grid)?;
        let (cv, ci) = msys.conditions();
        let s = smatrix_from_system(&msys, lambda, &dirs)?;
        write_smatrix(&energy_file(cfg, "smatrix", idx), &s)?;
        let unitarity = s.unitarity_defect();
        let reciprocity = s.reciprocity_defect();
        let rotational = s.rotational_defect();
        let ell_max = cfg.ell_max_for(lambda);
        let shifts = if rotational <= RADIAL_TOL { Some(phase_shifts(&s, ell_max)?) } else { None };
        let mut entry = json!({
            "lambda": lambda,
            "k": s.k,
            "directions": s.len(),
            "volume_cells": grid.len(),
            "trace_dofs": msys.trace_space().map_or(0, |sp| sp.dim(&mesh)),
            "cond_volume": cv,
            "cond_interface": ci,
            "unitarity_defect": unitarity,
            "reciprocity_defect": reciprocity,
            "rotational_defect": rotational,
            "phase_shifts": shifts.as_deref().map(complex_list),
        });
        println!("lambda {lambda}: unitarity {unitarity:.3e}, reciprocity {}", reciprocity.map_or("n/a".into(), |r| format!("{r:.3e}")));
        if amplitudes {
            let t = cross_sections(&s);
            let path = energy_file(cfg, "cross_section", idx);
            let mut w = csv_writer(&path)?;
            csv_row(&mut w, &path, ["out", "in", "cos_angle", "re_f", "im_f", "dsigma"])?;
            for j in 0..s.len() {
                for i in 0..s.len() {
                    let (a, b) = (dirs.directions[i], dirs.directions[j]);
                    let cosang = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                    let f = t.amplitude[(i, j)];
                    csv_row(&mut w, &path, [i.to_string(), j.to_string(), format!("{cosang:e}"), format!("{:e}", f.re), format!("{:e}", f.im), format!("{:e}", t.differential[i][j])])?;
                }
            }
            finish(w, &path)?;
            let gap = if t.sigma_total_optical != 0.0 { (t.sigma_total_angular / t.sigma_total_optical - 1.0).abs() } else { 0.0 };
            entry["sigma_total_angular"] = json!(t.sigma_total_angular);
            entry["sigma_total_optical"] = json!(t.sigma_total_optical);
            entry["optical_theorem_gap"] = json!(gap);
            println!("  sigma_tot {:.6e} (angular) {:.6e} (optical)", t.sigma_total_angular, t.sigma_total_optical);
        }
        per_energy.push(entry);
    }
    Ok((json!({ "energies": per_energy }), true))
}

fn oracle_compare(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let a = cfg.radial_sphere().ok_or_else(|| Error::config("geometry.shape", "oracle comparison needs a sphere and a potential centered at the origin"))?;
    let mesh = cfg.mesh(cfg.level)?;
    let grid = cfg.grid()?;
    let dirs = direction_quadrature(cfg.n_polar)?;
    let path = cfg.output.join("oracle_compare.csv");
    let mut w = csv_writer(&path)?;
    csv_row(&mut w, &path, ["lambda", "l", "re_bem", "im_bem", "re_oracle", "im_oracle", "abs_error"])?;
    let mut per_energy = Vec::new();
    for &lambda in &cfg.energies {
        let ell_max = cfg.ell_max_for(lambda);
        let msys = system(cfg, lambda, &mesh, &grid)?;
        let s = smatrix_from_system(&msys, lambda, &dirs)?;
        let bem = phase_shifts(&s, ell_max)?;
        let oracle = partial_wave_model(a, &cfg.model, cfg.potential.as_ref(), lambda, ell_max)?;
        let mut worst = 0.0f64;
        for l in 0..=ell_max {
            let err = (bem[l] - oracle[l]).norm();
            worst = worst.max(err);
            csv_row(&mut w, &path, [format!("{lambda:e}"), l.to_string(), format!("{:e}", bem[l].re), format!("{:e}", bem[l].im), format!("{:e}", oracle[l].re), format!("{:e}", oracle[l].im), format!("{err:e}")])?;
        }
        println!("lambda {lambda}: max |S_l(bem) - S_l(oracle)| = {worst:.3e} for l <= {ell_max}");
        per_energy.push(json!({
            "lambda": lambda,
            "ell_max": ell_max,
            "max_abs_error": worst,
            "unitarity_defect": s.unitarity_defect(),
            "bem": complex_list(&bem),
            "oracle": complex_list(&oracle),
        }));
    }
    finish(w, &path)?;
    Ok((json!({ "energies": per_energy }), true))
}

/// Slope of the least-squares line through (log h, log e); None if fewer
/// than two usable points.
pub fn observed_order(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h.iter().zip(e).filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite()).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

const JUMP_COLUMNS: [&str; 4] = ["jump1_sl", "jump0_dl", "jump0_sl", "jump1_dl"];

/// Free-layer jump defects for a smooth density at real z.
fn jump_defects(mesh: &SurfaceMesh, z: SpectralParam) -> Result<[f64; 4], CliError> {
    let probe = TraceProbe::new(mesh);
    let f = |p: [f64; 3]| c64::new(1.0 + 0.5 * p[0] + p[1] * p[2], 0.0);
    let d0: Vec<c64> = mesh.geoms().iter().map(|g| f(g.centroid)).collect();
    let d1: Vec<c64> = mesh.vertices().iter().map(|p| f(*p)).collect();
    let d1c: Vec<c64> = mesh.triangles().iter().map(|t| (d1[t[0]] + d1[t[1]] + d1[t[2]]) / 3.0).collect();
    let minus: Vec<c64> = d0.iter().map(|v| -v).collect();
    let sl = probe.layer_traces(mesh, z, &d0, LayerKind::SL)?;
    let dl = probe.layer_traces(mesh, z, &d1, LayerKind::DL)?;
    Ok([
        relative_trace_defect(mesh, &sl.jump1(), &minus),
        relative_trace_defect(mesh, &dl.jump0(), &d1c),
        trace_norm(mesh, &sl.jump0()) / trace_norm(mesh, &sl.gamma0_ex),
        trace_norm(mesh, &dl.jump1()) / trace_norm(mesh, &dl.gamma1_ex),
    ])
}

fn convergence(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() != cfg.levels.len() {
        return Err(Error::config("geometry.levels", "levels must be distinct").into());
    }
    if levels.len() < 3 {
        return Err(Error::config("geometry.levels", "at least 3 refinement levels are needed").into());
    }
    let z = SpectralParam::real(cfg.z)?;
    let grid = cfg.grid()?;
    let lambda = cfg.energies[0];
    let radial = cfg.radial_sphere();
    let scale = cfg.scattering_radius().max(1e-3);
    let source = Source::point([0.3 * scale, -0.2 * scale, 2.2 * scale], c64::new(1.0, 0.0));
    let path = cfg.output.join("convergence.csv");
    let mut w = csv_writer(&path)?;
    csv_row(&mut w, &path, ["level", "h"].into_iter().chain(JUMP_COLUMNS).chain(["bc_residual", "s_error"]))?;
    let mut hs = Vec::new();
    let mut jumps: Vec<[f64; 4]> = Vec::new();
    let mut bc = Vec::new();
    let mut serr = Vec::new();
    for &level in &levels {
        let mesh = cfg.mesh(level)?;
        let h = mesh.max_edge();
        let j = jump_defects(&mesh, z)?;
        let bc_res = if cfg.model == InterfaceModel::NoInterface {
            None
        } else {
            let msys = ModelSystem::new(&mesh, &grid, cfg.model.clone(), z)?;
            check_conditions(cfg, &msys)?;
            Some(boundary_condition_residual(&msys, &source)?)
        };
        let s_error = match radial {
            Some(a) => {
                let ell_max = cfg.ell_max_for(lambda).min(3);
                let s = smatrix_from_system(&system(cfg, lambda, &mesh, &grid)?, lambda, &direction_quadrature(cfg.n_polar)?)?;
                let bem = phase_shifts(&s, ell_max)?;
                let oracle = partial_wave_model(a, &cfg.model, cfg.potential.as_ref(), lambda, ell_max)?;
                Some(bem.iter().zip(&oracle).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
            }
            None => None,
        };
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        csv_row(&mut w, &path, [level.to_string(), format!("{h:e}")].into_iter().chain(j.iter().map(|x| format!("{x:e}"))).chain([opt(bc_res), opt(s_error)]))?;
        println!("level {level}: h {h:.4}, jumps {:?}, bc {bc_res:?}, S error {s_error:?}", j.map(|x| (x * 1e4).round() / 1e4));
        hs.push(h);
        jumps.push(j);
        bc.push(bc_res);
        serr.push(s_error);
    }
    finish(w, &path)?;
    let mut rates = serde_json::Map::new();
    for (c, name) in JUMP_COLUMNS.iter().enumerate() {
        let e: Vec<f64> = jumps.iter().map(|j| j[c]).collect();
        rates.insert(name.to_string(), json!(observed_order(&hs, &e)));
    }
    let col = |v: &[Option<f64>]| -> Option<f64> {
        let e: Option<Vec<f64>> = v.iter().cloned().collect();
        e.and_then(|e| observed_order(&hs, &e))
    };
    rates.insert("bc_residual".into(), json!(col(&bc)));
    rates.insert("s_error".into(), json!(col(&serr)));
    for (k, v) in &rates {
        println!("  order {k:<12} {v}");
    }
    Ok((json!({ "levels": levels, "h": hs, "orders": rates }), true))
}
