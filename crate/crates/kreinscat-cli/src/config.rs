//! Flat `key = value` run configuration with dotted section names.
//!
//! Blank lines and `#` comments are ignored. Unknown keys and malformed
//! values are errors carrying the offending key. See [`SCHEMA`] for every
//! key and its default.

use std::collections::BTreeMap;
use std::path::PathBuf;

use kreinscat::interface_models::{InterfaceModel, Strength};
use kreinscat::mesh::{make_ellipsoid, make_sphere, SurfaceMesh, MAX_LEVEL};
use kreinscat::potential_ops::{PotentialSpec, VolumeGrid};
use kreinscat::{Error, Result};

/// (key, default, description) for every accepted key.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("mode", "abstract-check", "abstract-check | smatrix | cross-section | oracle-compare | convergence"),
    ("geometry.shape", "sphere", "sphere | ellipsoid"),
    ("geometry.radius", "1.0", "sphere radius"),
    ("geometry.semi_axes", "1.0,1.0,1.0", "ellipsoid semi-axes"),
    ("geometry.level", "3", "icosphere refinement level (0..=7)"),
    ("geometry.levels", "1,2,3", "refinement levels for convergence mode (at least 3, distinct)"),
    ("potential.kind", "none", "none | gaussian | table"),
    ("potential.depth", "1.0", "Gaussian depth (v > 0 attracts)"),
    ("potential.sigma", "0.5", "Gaussian width"),
    ("potential.support", "1.5", "support radius R_v"),
    ("potential.center", "0,0,0", "potential center"),
    ("potential.table", "", "path of a two-column `r v(r)` table"),
    ("model.kind", "none", "none | delta | delta-prime | dirichlet | neumann"),
    ("model.strength", "1.0", "constant alpha (delta) or theta (delta-prime)"),
    ("energy.lambda", "-1.0", "scattering energy lambda < 0, or a comma-separated list"),
    ("directions.n_polar", "8", "polar Gauss nodes of the direction rule (2 n_polar azimuths)"),
    ("numerics.h_vol", "0.2", "volume cell spacing"),
    ("numerics.max_cells", "20000", "cap on the number of volume cells"),
    ("numerics.cond_limit", "1e12", "largest accepted condition estimate of any factorization"),
    ("numerics.seed", "7", "seed of the random generator (abstract-check)"),
    ("numerics.ell_max", "", "partial-wave cutoff; default ceil(2 k a) + 4"),
    ("numerics.z", "1.0", "real spectral point for jump and boundary-condition residuals"),
    ("abstract.count", "100", "number of random systems in abstract-check"),
    ("abstract.max_dim", "12", "largest state dimension of a random system"),
    ("abstract.tol", "1e-8", "residual bound for abstract-check"),
    ("output.dir", "out", "output directory"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    AbstractCheck,
    Smatrix,
    CrossSection,
    OracleCompare,
    Convergence,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "abstract-check" => Mode::AbstractCheck,
            "smatrix" => Mode::Smatrix,
            "cross-section" => Mode::CrossSection,
            "oracle-compare" => Mode::OracleCompare,
            "convergence" => Mode::Convergence,
            _ => return Err(Error::config("mode", format!("unknown mode `{s}`"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::AbstractCheck => "abstract-check",
            Mode::Smatrix => "smatrix",
            Mode::CrossSection => "cross-section",
            Mode::OracleCompare => "oracle-compare",
            Mode::Convergence => "convergence",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Sphere(f64),
    Ellipsoid([f64; 3]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub shape: Shape,
    pub level: usize,
    pub levels: Vec<usize>,
    pub potential: Option<PotentialSpec>,
    pub model: InterfaceModel,
    pub energies: Vec<f64>,
    pub n_polar: usize,
    pub h_vol: f64,
    pub max_cells: usize,
    pub cond_limit: f64,
    pub seed: u64,
    pub ell_max: Option<usize>,
    pub z: f64,
    pub abstract_count: usize,
    pub abstract_max_dim: usize,
    pub abstract_tol: f64,
    pub output: PathBuf,
    /// Resolved key/value pairs, defaults included.
    pub entries: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("").expect("defaults parse")
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| num(key, s)).collect()
}

fn point(key: &str, v: &str) -> Result<[f64; 3]> {
    let p: Vec<f64> = list(key, v)?;
    <[f64; 3]>::try_from(p).map_err(|_| Error::config(key, "expected three comma-separated numbers"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = SCHEMA.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::config(format!("line {}", no + 1), "expected `key = value`"))?;
            let k = k.trim();
            if !entries.contains_key(k) {
                return Err(Error::config(k, "unknown key"));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Self::from_entries(entries)
    }

    /// Replace one key and re-validate.
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        if !self.entries.contains_key(key) {
            return Err(Error::config(key, "unknown key"));
        }
        let mut e = self.entries.clone();
        e.insert(key.to_string(), value.to_string());
        Self::from_entries(e)
    }

    fn from_entries(e: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| e[k].as_str();
        let mode = Mode::parse(get("mode"))?;
        let shape = match get("geometry.shape") {
            "sphere" => {
                let r: f64 = num("geometry.radius", get("geometry.radius"))?;
                if !(r > 0.0) {
                    return Err(Error::config("geometry.radius", "must be positive"));
                }
                Shape::Sphere(r)
            }
            "ellipsoid" => {
                let a = point("geometry.semi_axes", get("geometry.semi_axes"))?;
                if a.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::config("geometry.semi_axes", "must be positive"));
                }
                Shape::Ellipsoid(a)
            }
            s => return Err(Error::config("geometry.shape", format!("unknown shape `{s}`"))),
        };
        let level: usize = num("geometry.level", get("geometry.level"))?;
        if level > MAX_LEVEL {
            return Err(Error::config("geometry.level", format!("must be <= {MAX_LEVEL}")));
        }
        let levels: Vec<usize> = list("geometry.levels", get("geometry.levels"))?;
        if levels.iter().any(|l| *l > MAX_LEVEL) {
            return Err(Error::config("geometry.levels", format!("levels must be <= {MAX_LEVEL}")));
        }
        let center = point("potential.center", get("potential.center"))?;
        let support: f64 = num("potential.support", get("potential.support"))?;
        let potential = match get("potential.kind") {
            "none" => None,
            "gaussian" => Some(
                PotentialSpec::gaussian(num("potential.depth", get("potential.depth"))?, num("potential.sigma", get("potential.sigma"))?, support, center)
                    .map_err(|err| Error::config("potential", err.to_string()))?,
            ),
            "table" => {
                let path = get("potential.table");
                if path.is_empty() {
                    return Err(Error::config("potential.table", "a table path is required"));
                }
                let text = std::fs::read_to_string(path).map_err(|err| Error::config("potential.table", format!("{path}: {err}")))?;
                Some(PotentialSpec::parse_table(&text, center).map_err(|err| Error::config("potential.table", err.to_string()))?)
            }
            s => return Err(Error::config("potential.kind", format!("unknown potential `{s}`"))),
        };
        let strength: f64 = num("model.strength", get("model.strength"))?;
        if !strength.is_finite() {
            return Err(Error::config("model.strength", "must be finite"));
        }
        let model = match get("model.kind") {
            "none" => InterfaceModel::NoInterface,
            "delta" => InterfaceModel::Delta(Strength::Constant(strength)),
            "delta-prime" => InterfaceModel::DeltaPrime(Strength::Constant(strength)),
            "dirichlet" => InterfaceModel::Dirichlet,
            "neumann" => InterfaceModel::Neumann,
            s => return Err(Error::config("model.kind", format!("unknown model `{s}`"))),
        };
        let energies: Vec<f64> = list("energy.lambda", get("energy.lambda"))?;
        if energies.iter().any(|l| !(*l < 0.0)) {
            return Err(Error::config("energy.lambda", "scattering energies must be negative"));
        }
        let n_polar: usize = num("directions.n_polar", get("directions.n_polar"))?;
        if n_polar < 2 {
            return Err(Error::config("directions.n_polar", "must be >= 2"));
        }
        let h_vol: f64 = num("numerics.h_vol", get("numerics.h_vol"))?;
        if !(h_vol > 0.0) {
            return Err(Error::config("numerics.h_vol", "must be positive"));
        }
        let cond_limit: f64 = num("numerics.cond_limit", get("numerics.cond_limit"))?;
        if !(cond_limit > 1.0) {
            return Err(Error::config("numerics.cond_limit", "must exceed 1"));
        }
        let ell_max = match get("numerics.ell_max") {
            "" => None,
            v => Some(num("numerics.ell_max", v)?),
        };
        let abstract_max_dim: usize = num("abstract.max_dim", get("abstract.max_dim"))?;
        if abstract_max_dim < 2 {
            return Err(Error::config("abstract.max_dim", "must be >= 2"));
        }
        Ok(RunConfig {
            mode,
            shape,
            level,
            levels,
            potential,
            model,
            energies,
            n_polar,
            h_vol,
            max_cells: num("numerics.max_cells", get("numerics.max_cells"))?,
            cond_limit,
            seed: num("numerics.seed", get("numerics.seed"))?,
            ell_max,
            z: num("numerics.z", get("numerics.z"))?,
            abstract_count: num("abstract.count", get("abstract.count"))?,
            abstract_max_dim,
            abstract_tol: num("abstract.tol", get("abstract.tol"))?,
            output: PathBuf::from(get("output.dir")),
            entries: e,
        })
    }

    pub fn mesh(&self, level: usize) -> Result<SurfaceMesh> {
        match self.shape {
            Shape::Sphere(r) => make_sphere(r, level),
            Shape::Ellipsoid(a) => make_ellipsoid(a, level),
        }
    }

    pub fn grid(&self) -> Result<VolumeGrid> {
        match &self.potential {
            Some(p) => VolumeGrid::new(p, self.h_vol, self.max_cells),
            None => Ok(VolumeGrid::empty(self.h_vol)),
        }
    }

    /// Radius of the sphere when the configuration is rotationally symmetric
    /// about the origin.
    pub fn radial_sphere(&self) -> Option<f64> {
        match self.shape {
            Shape::Sphere(r) if self.potential.as_ref().is_none_or(|p| p.center == [0.0; 3]) => Some(r),
            _ => None,
        }
    }

    /// Largest radius that scatters: sphere radius or potential support.
    pub fn scattering_radius(&self) -> f64 {
        let body = match self.shape {
            Shape::Sphere(r) => r,
            Shape::Ellipsoid(a) => a.iter().cloned().fold(0.0, f64::max),
        };
        let pot = self.potential.as_ref().map_or(0.0, |p| p.support_radius + p.center.iter().map(|c| c * c).sum::<f64>().sqrt());
        if self.model == InterfaceModel::NoInterface {
            pot
        } else {
            body.max(pot)
        }
    }

    pub fn ell_max_for(&self, lambda: f64) -> usize {
        self.ell_max.unwrap_or_else(|| kreinscat::smatrix::default_ell_max((-lambda).sqrt(), self.scattering_radius()))
    }
}
