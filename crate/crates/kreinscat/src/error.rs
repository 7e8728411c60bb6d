use thiserror::Error;

/// Failures raised by the solvers. Every singular-factor variant carries the
/// estimated condition number that tripped the limit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("M^B_z is singular (cond ~ {cond:.3e}); z is outside Z_B")]
    SingularM { cond: f64 },
    #[error("-A + z is singular (cond ~ {cond:.3e}); z is an eigenvalue of A")]
    SingularResolvent { cond: f64 },
    #[error("M^B1_z = 1 - B1 tau1 G1 is singular (cond ~ {cond:.3e})")]
    SingularMB1 { cond: f64 },
    #[error("M^(B0,B2)_z = B0 - B2 tau2 G2 is singular (cond ~ {cond:.3e})")]
    SingularMB0B2 { cond: f64 },
    #[error("Sigma factor is singular (cond ~ {cond:.3e})")]
    SingularSigma { cond: f64 },
    #[error("B0 is not invertible (cond ~ {cond:.3e})")]
    SingularB0 { cond: f64 },
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
    #[error("evaluation point at distance {distance:.3e} from the surface, local mesh size {h:.3e}")]
    PointTooClose { distance: f64, h: f64 },
    #[error("Lippmann-Schwinger operator 1 - R_z v is singular (cond ~ {cond:.3e})")]
    SingularLS { cond: f64 },
    #[error("interface operator {factor} is singular (cond ~ {cond:.3e})")]
    SingularInterfaceOperator { factor: &'static str, cond: f64 },
    #[error("scattering kernel is not rotationally symmetric (defect {defect:.3e})")]
    NotRadial { defect: f64 },
    #[error("radial integration failed for l = {ell} at r = {r:.4}")]
    StiffIntegration { ell: usize, r: f64 },
    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }
}
