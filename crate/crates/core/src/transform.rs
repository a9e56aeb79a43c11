//! Closed-form ridge regression for the linear map W.
//!
//! With training objects as rows of `points` and pairs `(i, j)` taken from an
//! indicator matrix J, the two learning directions are
//!
//! * move-labeled: minimize `sum ||x_i - W x_j||^2 + lambda ||W||_F^2`
//!   (targets are mapped toward the objects that chose them);
//! * move-query: minimize `sum ||W x_i - x_j||^2 + lambda ||W||_F^2`.
//!
//! Both reduce to `W G = B` for a symmetric positive (semi)definite `G`,
//! solved by Cholesky factorization.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datamodel::row_major;
use crate::error::{Error, Result};
use crate::targets::IndicatorMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    MoveLabeled,
    MoveQuery,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::MoveLabeled => "move-labeled",
            Direction::MoveQuery => "move-query",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "move-labeled" => Ok(Direction::MoveLabeled),
            "move-query" => Ok(Direction::MoveQuery),
            other => Err(Error::InvalidArgument(format!("unknown direction `{other}`"))),
        }
    }
}

/// How the move-labeled Gram matrix is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SolverMode {
    /// `W = X J X^T (X X^T + lambda I)^-1`: every training object enters the
    /// Gram matrix once, whether or not it serves as a target.
    #[default]
    #[serde(rename = "paper")]
    PaperClosedForm,
    /// The true minimizer: `X diag(c) X^T` replaces `X X^T`, with `c_j` the
    /// number of objects that chose `j` as a target.
    #[serde(rename = "exact")]
    ExactMinimizer,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::PaperClosedForm => "paper",
            SolverMode::ExactMinimizer => "exact",
        })
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SolverMode::PaperClosedForm),
            "exact" => Ok(SolverMode::ExactMinimizer),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }
}

/// A learned d x d map. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformDoc", into = "TransformDoc")]
pub struct TransformModel {
    w: DMatrix<f64>,
    direction: Direction,
    lambda: f64,
    solver: SolverMode,
}

impl TransformModel {
    pub fn new(w: DMatrix<f64>, direction: Direction, lambda: f64, solver: SolverMode) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidArgument(format!("W must be square, got {:?}", w.shape())));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("W has non-finite entries".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")));
        }
        Ok(TransformModel { w, direction, lambda, solver })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn solver(&self) -> SolverMode {
        self.solver
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The λ-independent parts of the normal equations `W (G + lambda I) = B`.
/// Build once, then [`RidgeSystem::solve`] for each λ on a grid.
#[derive(Debug, Clone)]
pub struct RidgeSystem {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    direction: Direction,
    solver: SolverMode,
}

impl RidgeSystem {
    pub fn new(points: &DMatrix<f64>, j: &IndicatorMatrix, direction: Direction, solver: SolverMode) -> Result<Self> {
        let n = points.nrows();
        if j.size() != n {
            return Err(Error::DimensionMismatch { expected: n, got: j.size() });
        }
        // move-query is the move-labeled problem on J^T, and always exact
        let (pairs, solver) = match direction {
            Direction::MoveLabeled => (j.clone(), solver),
            Direction::MoveQuery => (j.transpose(), SolverMode::ExactMinimizer),
        };
        // rows of `summed` hold sum_{j in row i} x_j
        let d = points.ncols();
        let flat = row_major(points);
        let mut summed = vec![0.0; n * d];
        for i in 0..n {
            let out = &mut summed[i * d..(i + 1) * d];
            for &t in pairs.row(i) {
                for (o, v) in out.iter_mut().zip(&flat[t * d..(t + 1) * d]) {
                    *o += v;
                }
            }
        }
        let summed = DMatrix::from_row_slice(n, d, &summed);
        let cross = points.tr_mul(&summed);

        let gram = match solver {
            SolverMode::PaperClosedForm => points.tr_mul(points),
            SolverMode::ExactMinimizer => {
                let weights = DVector::from_iterator(n, pairs.column_sums().into_iter().map(|c| c as f64));
                let mut weighted = points.clone();
                for (mut row, &c) in weighted.row_iter_mut().zip(weights.iter()) {
                    row *= c;
                }
                points.tr_mul(&weighted)
            }
        };
        let gram = (&gram + gram.transpose()) * 0.5;
        Ok(RidgeSystem { gram, cross, direction, solver })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn solver(&self) -> SolverMode {
        self.solver
    }

    pub fn solve(&self, lambda: f64) -> Result<TransformModel> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be finite and >= 0")));
        }
        let d = self.gram.nrows();
        let mut g = self.gram.clone();
        for i in 0..d {
            g[(i, i)] += lambda;
        }
        let chol = g.cholesky().ok_or(Error::SingularSystem)?;
        let pivots = chol.l_dirty().diagonal();
        let (lo, hi) = pivots
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        if d > 0 && !(lo * lo > 1e-13 * hi * hi) {
            return Err(Error::SingularSystem);
        }
        // G symmetric: W G = B  <=>  G W^T = B^T
        let w = chol.solve(&self.cross.transpose()).transpose();
        TransformModel::new(w, self.direction, lambda, self.solver)
    }
}

pub fn fit_move_labeled(
    points: &DMatrix<f64>,
    j: &IndicatorMatrix,
    lambda: f64,
    solver: SolverMode,
) -> Result<TransformModel> {
    RidgeSystem::new(points, j, Direction::MoveLabeled, solver)?.solve(lambda)
}

/// Exact minimizer of the move-query objective.
pub fn fit_move_query(points: &DMatrix<f64>, j: &IndicatorMatrix, lambda: f64) -> Result<TransformModel> {
    RidgeSystem::new(points, j, Direction::MoveQuery, SolverMode::ExactMinimizer)?.solve(lambda)
}

/// Maps every row through W (`y = W x`).
pub fn transform_points(model: &TransformModel, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if points.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: points.ncols(),
        });
    }
    Ok(points * model.w.transpose())
}

/// Regression objective of `direction` at `w`, summed over the pairs of `j`.
pub fn objective(points: &DMatrix<f64>, j: &IndicatorMatrix, w: &DMatrix<f64>, lambda: f64, direction: Direction) -> f64 {
    let mapped = points * w.transpose();
    let mut total = 0.0;
    for i in 0..j.size() {
        for &t in j.row(i) {
            let r = match direction {
                Direction::MoveLabeled => points.row(i) - mapped.row(t),
                Direction::MoveQuery => mapped.row(i) - points.row(t),
            };
            total += r.norm_squared();
        }
    }
    total + lambda * w.norm_squared()
}

/// `||W (G + lambda I) - B||_F / ||B||_F` for a fitted model.
pub fn normal_equation_residual(system: &RidgeSystem, model: &TransformModel) -> f64 {
    let d = system.gram.nrows();
    let g = &system.gram + DMatrix::identity(d, d) * model.lambda;
    (model.w() * g - &system.cross).norm() / system.cross.norm()
}

#[derive(Serialize, Deserialize)]
struct TransformDoc {
    version: u32,
    direction: Direction,
    lambda: f64,
    solver: SolverMode,
    d: usize,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
}

impl From<TransformModel> for TransformDoc {
    fn from(m: TransformModel) -> Self {
        let d = m.dim();
        TransformDoc {
            version: 1,
            direction: m.direction,
            lambda: m.lambda,
            solver: m.solver,
            d,
            w: row_major(&m.w).chunks(d.max(1)).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<TransformDoc> for TransformModel {
    type Error = Error;

    fn try_from(doc: TransformDoc) -> Result<Self> {
        if doc.version != 1 {
            return Err(Error::Version(doc.version));
        }
        if doc.w.len() != doc.d || doc.w.iter().any(|r| r.len() != doc.d) {
            return Err(Error::InvalidArgument(format!("W must be {0}x{0}", doc.d)));
        }
        let flat: Vec<f64> = doc.w.into_iter().flatten().collect();
        TransformModel::new(DMatrix::from_row_slice(doc.d, doc.d, &flat), doc.direction, doc.lambda, doc.solver)
    }
}
