//! Operator inference: regression assembly, the streaming pipelines,
//! preprocessing, regularization selection and parametric interpolation.

mod assemble;
mod finite_diff;
mod grid_search;
mod interpolate;
mod model;
mod paradigm;
mod preprocess;

pub use assemble::{
    build_projected, build_reformulated, data_matrix, projected_row, reformulated_data,
};
pub use finite_diff::{FdRow, FdSample, FdScheme, FdWindow, FiniteDiffOp};
pub use grid_search::{channel_flow_grids, grid_search, log_grid, GridChoice};
pub use interpolate::{interpolate_operators, spline_weights};
pub use model::{assemble_row, Layout, Quadratic, ReducedModel};
pub use paradigm::{
    default_checkpoints, fit_projected, fit_reformulated, no_progress, solve_paradigm,
    stream_basis, BasisPass, Checkpoint, Paradigm, Progress, RlsMethod, SolveOutput, SolverConfig,
    SvdMethod, Terms,
};
pub use preprocess::{Preprocessor, PreprocessorFit};
