//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 16")]
    InvalidGridSize(usize),

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("spectral coefficients are not conjugate-symmetric (residual {residual:.3e} > {tol:.3e})")]
    AsymmetricSpectrum { residual: f64, tol: f64 },

    #[error("{name} = {value} outside the admissible range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("operation requires a mean-zero field (|zero mode| = {zero_mode:.3e}, tolerance {tol:.3e})")]
    NotMeanZero { zero_mode: f64, tol: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("dyadic depth {depth} too fine for an n = {n} grid")]
    DepthTooFine { depth: usize, n: usize },

    #[error("field support touches the boundary of the centered fundamental domain")]
    SupportTouchesBoundary,

    #[error("kernel BMO norm {0:.3e} exceeds 1; normalize before pairing")]
    KernelNotNormalized(f64),

    #[error("domain is empty")]
    EmptyDomain,

    #[error("domain touches the raster border; distance to the boundary is ill-defined")]
    DomainTouchesBorder,

    #[error("no cube of the minimum side fits inside the domain")]
    NoCubeFits,

    #[error("assignment is missing an entry for exterior cube at level {level}, anchor ({ax}, {ay})")]
    IncompleteAssignment { level: u32, ax: i64, ay: i64 },

    #[error("time step rejected: dt could not be reduced to satisfy stability (needed <= {needed:.3e}, floor {floor:.3e})")]
    CflFailure { needed: f64, floor: f64 },

    #[error("velocity law is not divergence-free (residual {0:.3e})")]
    NotDivergenceFree(f64),

    #[error("dissipative H^-1 bound is limited to linear diffusion")]
    RequiresLinearDiffusion,

    #[error("q = {q} is below the critical value {critical} = d/(2*gamma)")]
    SubcriticalExponent { q: f64, critical: f64 },

    #[error("norm for q = {0} was not recorded during the twin run; add it to the q_list")]
    NormNotRecorded(f64),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("diagnostics too coarse to estimate a derivative")]
    Inconclusive,

    #[error("snapshot header malformed: {0}")]
    MalformedHeader(String),

    #[error("multiplier table: {0}")]
    MalformedTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
