pub mod chi;
pub mod connection;
pub mod contour;
pub mod error;
pub mod oracle;
pub mod potential;
pub mod stokes;

pub use chi::{chi_factor, ChiFactor, ChiMethod, ChiOptions, ChiValue};
pub use connection::{
    alpha, barrier_amplitudes, bound_states, coulomb_levels, coulomb_phase, resonances, ConnectionCoefficient, CoulombPhase,
    Mode, Regime, ResonanceMethod, ResonanceResult, ScatteringAmplitudes, Solver, SolverOptions, SpectralMethod,
    SpectralResult,
};
pub use contour::{action_integral, loop_integral, track_branch, ContourPath, EndpointKind, LoopContour, PathSample};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use potential::{build_effective_q, EffectiveQ, Poly, RationalPotential, Singularity, SingularityList, TurningPoint};
pub use stokes::{
    plan_canonical_path, trace_graph, trace_graph_with, CanonicalPath, GraphOptions, RoutePreference, Sector, SectorLabel,
    StokesGraph,
};
