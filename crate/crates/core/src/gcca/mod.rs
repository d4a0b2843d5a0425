//! Multi-view solvers: two-view CCA, MAX-VAR GCCA with missing rows, the
//! inverse-sum (ISSM) variant and its memory-light approximation.

mod cca;
mod model;
mod solver;
mod view;

pub use cca::{fit_cca, CcaModel};
pub use model::{reconstruct, FitDiagnostics, GccaModel, Variant};
pub use solver::{
    exact_memory_bytes, fast_memory_bytes, fast_weight, fit, fit_fast_gcca_issm, fit_gcca, projection,
    sum_of_projections, FastConfig, GccaOptions, IssmProjection,
};
pub use view::{selection_counts, ViewMatrix};
