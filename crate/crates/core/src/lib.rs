//! Coarse-grid Lax-Friedrichs solving with batched cubic Hermite
//! densification of trajectories.
//!
//! The pieces, bottom up:
//!
//! - [`lf`]: the three-point-average Lax-Friedrichs scheme for linear advection
//!   and inviscid Burgers on uniform 1D grids, with a CFL gate.
//! - [`hermite`]: the Hermite basis matrix, the block-diagonal product `G p`
//!   that yields coefficients for many trajectories at once, and the batch
//!   evaluation `C R`.
//! - [`streamline`]: pathline tracing, segment packing and densification.
//! - [`bounds`]: coarse-versus-fine comparison runs and the a-priori error
//!   bounds they are checked against.
//! - [`cost`] and [`perf`]: flop/memory models and the timing harness.
//! - [`io`]: CSV/JSON output formats.

pub mod bounds;
pub mod cost;
pub mod error;
pub mod hermite;
pub mod io;
pub mod lf;
pub mod perf;
pub mod streamline;

pub use bounds::{
    corollary_bound, initial_roughness, interpolate_coarse_to_fine, run_comparison, theorem_bound,
    BoundConstants, BoundParams, CflGate, ComparisonSetup, ErrorReport, ErrorSummary,
};
pub use cost::{flops_estimate, memory_estimate, spline_flops_estimate, CostModel, SplineMode};
pub use error::{Error, GridRole, Result};
pub use hermite::{
    basis_matrix_t, batch_coefficients, build_global_basis, evaluate_batch,
    evaluate_batch_partitioned, evaluation_matrix, hermite_coefficients, BlockDiagonalBasis,
    EvaluationGrid, HermiteBatch, HermiteCubic, SegmentData, Table,
};
pub use lf::{
    cfl_max_dt, lf_step_advection, lf_step_burgers, restrict, run, Boundary, Equation, GridSpec1D,
    ScalarField1D, SolutionHistory, StabilityNorm, TimeSpec,
};
pub use perf::{
    bench_product, race_two_methods, BenchResult, ProductBench, ProductKind, RaceScenario,
};
pub use streamline::{
    densify, eulerian_snapshot, pack_segment, trace_pathlines, DenseTrajectorySet, Densifier,
    StreamlineSet, TangentMode,
};
