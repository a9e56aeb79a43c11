//! k-nearest-neighbor classification with a ridge-regression map applied to
//! the labeled objects only, together with hubness diagnostics and a
//! Monte-Carlo check of the spatial-centrality bias that motivates it.
//!
//! The usual pipeline: [`datamodel::split`] a [`datamodel::Dataset`], pick
//! same-class [`targets`] for every training object, fit W in closed form
//! with [`transform::fit_move_labeled`], then classify queries against the
//! mapped training set with [`knn::KnnModel`]. [`experiment::run_experiment`]
//! runs the whole protocol over several random splits.

// `!(a > b)` comparisons also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datamodel;
pub mod error;
pub mod experiment;
pub mod hubness;
pub mod knn;
pub mod modelselect;
pub mod synthetic;
pub mod targets;
pub mod theory;
pub mod transform;

pub use datamodel::{DataFormat, Dataset, PcaModel, Split};
pub use error::{Error, Result};
pub use knn::{Dissimilarity, DissimilarityKind, KnnModel, Neighbor};
pub use targets::{IndicatorMatrix, TargetAssignment};
pub use transform::{Direction, SolverMode, TransformModel};
