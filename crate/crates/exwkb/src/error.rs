use num_complex::Complex64;
use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed rational input: {0}")]
    NonRationalInput(String),

    #[error("polynomial root finder did not converge (relative residual {residual:e})")]
    RootFindingFailed { residual: f64 },

    #[error("branch of sqrt(q) is ambiguous near {at}")]
    BranchAmbiguous { at: Complex64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("branch of sqrt(q) does not return to its start value around the loop")]
    BranchNotClosed,

    #[error("loop contour is invalid: {0}")]
    InvalidLoop(String),

    #[error("non-generic Stokes graph: {0}")]
    NonGenericGraph(String),

    #[error("Stokes line tracing stalled near {at}")]
    TracingStalled { at: Complex64 },

    #[error("no canonical path from sector {from} to sector {to}")]
    CanonicalPathNotFound { from: String, to: String },

    #[error("evaluation at a singular point {at}")]
    EvaluationAtSingularity { at: Complex64 },

    #[error("integrator step size collapsed near {at}")]
    StiffnessFailure { at: Complex64 },

    #[error("path is not canonical (relative monotonicity violation {violation:e})")]
    NonCanonicalPath { violation: f64 },

    #[error("no root found in window [{lo}, {hi}]")]
    NoRootInWindow { lo: f64, hi: f64 },

    #[error("degenerate Stokes graph: {0}")]
    GraphDegenerate(String),

    #[error("resonant denominator (|D| = {magnitude:e}); use the resonance solver")]
    ResonantDenominator { magnitude: f64 },

    #[error("no resonance found in window [{lo}, {hi}]")]
    NoResonanceInWindow { lo: f64, hi: f64 },

    #[error("complex secant diverged from seed {seed}")]
    SeedDivergence { seed: Complex64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("potential does not decay fast enough at infinity")]
    NonDecayingPotential,

    #[error("no transmission peak found in window [{lo}, {hi}]")]
    NoPeakFound { lo: f64, hi: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Variant name, stable across messages; used for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            NonRationalInput(_) => "NonRationalInput",
            RootFindingFailed { .. } => "RootFindingFailed",
            BranchAmbiguous { .. } => "BranchAmbiguous",
            QuadratureNotConverged(_) => "QuadratureNotConverged",
            BranchNotClosed => "BranchNotClosed",
            InvalidLoop(_) => "InvalidLoop",
            NonGenericGraph(_) => "NonGenericGraph",
            TracingStalled { .. } => "TracingStalled",
            CanonicalPathNotFound { .. } => "CanonicalPathNotFound",
            EvaluationAtSingularity { .. } => "EvaluationAtSingularity",
            StiffnessFailure { .. } => "StiffnessFailure",
            NonCanonicalPath { .. } => "NonCanonicalPath",
            NoRootInWindow { .. } => "NoRootInWindow",
            GraphDegenerate(_) => "GraphDegenerate",
            ResonantDenominator { .. } => "ResonantDenominator",
            NoResonanceInWindow { .. } => "NoResonanceInWindow",
            SeedDivergence { .. } => "SeedDivergence",
            GridTooCoarse(_) => "GridTooCoarse",
            NonDecayingPotential => "NonDecayingPotential",
            NoPeakFound { .. } => "NoPeakFound",
            Unsupported(_) => "Unsupported",
        }
    }
}
