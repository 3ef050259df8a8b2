use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("response grid covers [0, {available}] but {needed} is required")]
    Coverage { needed: f64, available: f64 },

    #[error("solver instability: |G({tau})| = {abs_g} exceeds 1; refine the time grid")]
    SolverInstability { tau: f64, abs_g: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("initial state is not aligned with the optimal quadrature (offset {offset} rad); use the general form")]
    Alignment { offset: f64 },

    #[error("energy {0} is below the vacuum energy 1/2")]
    EnergyBelowVacuum(f64),

    #[error("displacement coefficient vanishes; the force cannot be estimated")]
    EstimationImpossible,

    #[error("bath injects no noise (N = 0); no finite optimal interval exists")]
    NoiselessBath,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
