//! The composite reconstruction objective `f(y) = D_phi(Ay, b) + lambda * J(y)`.
//!
//! `D_phi` is the Kullback-Leibler divergence between the forward projection
//! `Ay` and the measured data `b`; `J` is an isotropic smoothed total
//! variation with parameter `rho`. Both terms are smooth on the open box, so
//! the solver only ever needs values and Euclidean gradients.

use crate::manifold::BoxPoint;
use crate::sparse::CsrMatrix;
use crate::tomography::{self, ScanGeometry, TomographyError};
use crate::transfer::GridHierarchy;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("data entry {index} is {value}, but measurements must be positive and finite")]
    NonpositiveData { index: usize, value: f64 },
    #[error("matrix entry ({row}, {col}) is {value}, but the forward map must be nonnegative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("matrix row {row} has no positive entry, so its projection would vanish identically")]
    EmptyRow { row: usize },
    #[error("image shape {rows}x{cols} does not cover the {ncols} matrix columns")]
    ShapeMismatch { rows: usize, cols: usize, ncols: usize },
    #[error("matrix has {nrows} rows but the data vector has length {len}")]
    DataLength { nrows: usize, len: usize },
    #[error("{name} must be {constraint}, got {value}")]
    InvalidParam {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },
    #[error("divergence arguments must be positive, got {value} at index {index}")]
    NonpositiveComponent { index: usize, value: f64 },
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("problem carries no scan angles, so no coarse-grid matrix can be built")]
    NoScanAngles,
    #[error("problem image is {problem_rows}x{problem_cols} but the hierarchy is built for {grid_rows}x{grid_cols}")]
    GridMismatch {
        problem_rows: usize,
        problem_cols: usize,
        grid_rows: usize,
        grid_cols: usize,
    },
    #[error(transparent)]
    Tomography(#[from] TomographyError),
}

/// Value and Euclidean gradient of the objective at one point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub eucl_grad: Vec<f64>,
}

// The TV formula itself is defined for any real image, not just box points;
// the coarse models need it on unconstrained vectors.
pub(crate) fn tv_value(shape: (usize, usize), rho: f64, v: &[f64]) -> f64 {
    let (rows, cols) = shape;
    let rho2 = rho * rho;
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            let gh = if c + 1 < cols { v[idx + 1] - v[idx] } else { 0.0 };
            let gv = if r + 1 < rows {
                v[idx + cols] - v[idx]
            } else {
                0.0
            };
            total += (gh * gh + gv * gv + rho2).sqrt() - rho;
        }
    }
    total
}

pub(crate) fn tv_grad(shape: (usize, usize), rho: f64, v: &[f64]) -> Vec<f64> {
    let (rows, cols) = shape;
    let rho2 = rho * rho;
    let mut grad = vec![0.0; v.len()];
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            let gh = if c + 1 < cols { v[idx + 1] - v[idx] } else { 0.0 };
            let gv = if r + 1 < rows {
                v[idx + cols] - v[idx]
            } else {
                0.0
            };
            let s = (gh * gh + gv * gv + rho2).sqrt();
            let wh = gh / s;
            let wv = gv / s;
            grad[idx] -= wh + wv;
            if c + 1 < cols {
                grad[idx + 1] += wh;
            }
            if r + 1 < rows {
                grad[idx + cols] += wv;
            }
        }
    }
    grad
}

/// Kullback-Leibler divergence `sum_i u_i ln(u_i/w_i) + w_i - u_i` of two
/// positive vectors. Nonnegative, and exactly zero when `u == w`.
pub fn kl_div(u: &[f64], w: &[f64]) -> Result<f64, ObjectiveError> {
    if u.len() != w.len() {
        return Err(ObjectiveError::LengthMismatch {
            left: u.len(),
            right: w.len(),
        });
    }
    for (i, &v) in u.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ObjectiveError::NonpositiveComponent { index: i, value: v });
        }
    }
    for (i, &v) in w.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ObjectiveError::NonpositiveComponent { index: i, value: v });
        }
    }
    let mut total = 0.0;
    for (&ui, &wi) in u.iter().zip(w.iter()) {
        total += ui * (ui / wi).ln() + wi - ui;
    }
    Ok(total)
}

/// One reconstruction instance: forward map, measurements, and the two
/// regularization parameters, together with the image layout.
///
/// Construction enforces the standing assumptions: positive data, a
/// nonnegative matrix, and at least one positive entry per row. Everything
/// downstream relies on `Ay > 0` for interior `y`, which is exactly what
/// those checks guarantee.
#[derive(Debug, Clone)]
pub struct Problem {
    matrix: CsrMatrix,
    data: Vec<f64>,
    lambda: f64,
    rho: f64,
    image_shape: (usize, usize),
    scan_angles: Vec<f64>,
}

impl Problem {
    pub fn new(
        matrix: CsrMatrix,
        data: Vec<f64>,
        lambda: f64,
        rho: f64,
        image_shape: (usize, usize),
    ) -> Result<Self, ObjectiveError> {
        let (rows, cols) = image_shape;
        if rows * cols != matrix.ncols() {
            return Err(ObjectiveError::ShapeMismatch {
                rows,
                cols,
                ncols: matrix.ncols(),
            });
        }
        if data.len() != matrix.nrows() {
            return Err(ObjectiveError::DataLength {
                nrows: matrix.nrows(),
                len: data.len(),
            });
        }
        for (i, &v) in data.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ObjectiveError::NonpositiveData { index: i, value: v });
            }
        }
        for row in 0..matrix.nrows() {
            let (cols_i, vals_i) = matrix.row(row);
            let mut has_positive = false;
            for (&c, &v) in cols_i.iter().zip(vals_i.iter()) {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ObjectiveError::NegativeEntry {
                        row,
                        col: c,
                        value: v,
                    });
                }
                has_positive |= v > 0.0;
            }
            if !has_positive {
                return Err(ObjectiveError::EmptyRow { row });
            }
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ObjectiveError::InvalidParam {
                name: "lambda",
                constraint: "nonnegative and finite",
                value: lambda,
            });
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(ObjectiveError::InvalidParam {
                name: "rho",
                constraint: "positive and finite",
                value: rho,
            });
        }
        Ok(Problem {
            matrix,
            data,
            lambda,
            rho,
            image_shape,
            scan_angles: Vec::new(),
        })
    }

    /// Records the projection angles the matrix was built from, so the same
    /// scan can be regenerated on a coarser grid.
    pub fn with_scan_angles(mut self, angles: &[f64]) -> Self {
        self.scan_angles = angles.to_vec();
        self
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn image_shape(&self) -> (usize, usize) {
        self.image_shape
    }

    pub fn scan_angles(&self) -> &[f64] {
        &self.scan_angles
    }

    /// Number of unknowns (pixels).
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// `D_phi(Ay, b)`.
    pub fn data_term(&self, y: &BoxPoint) -> f64 {
        let ay = self.matrix.mul_vec(y.values());
        kl_div(&ay, &self.data).expect("Ay stays positive for interior y")
    }

    /// `A^T ln(Ay / b)`.
    pub fn data_grad(&self, y: &BoxPoint) -> Vec<f64> {
        let ay = self.matrix.mul_vec(y.values());
        let residual: Vec<f64> = ay
            .iter()
            .zip(self.data.iter())
            .map(|(&u, &w)| (u / w).ln())
            .collect();
        self.matrix.mul_transpose_vec(&residual)
    }

    /// Smoothed isotropic total variation:
    /// `sum_pixels sqrt(gh^2 + gv^2 + rho^2) - rho` with forward differences,
    /// taking the image as zero-padded past its right and bottom borders.
    pub fn smoothed_tv(&self, y: &BoxPoint) -> f64 {
        tv_value(self.image_shape, self.rho, y.values())
    }

    /// Gradient of `smoothed_tv` via the adjoint difference stencils.
    pub fn smoothed_tv_grad(&self, y: &BoxPoint) -> Vec<f64> {
        tv_grad(self.image_shape, self.rho, y.values())
    }

    /// Full objective value and Euclidean gradient in one pass. The forward
    /// projection and the per-pixel TV stencils are each computed once and
    /// shared between value and gradient.
    pub fn objective(&self, y: &BoxPoint) -> ObjectiveEval {
        let ay = self.matrix.mul_vec(y.values());
        let mut value = 0.0;
        let mut residual = vec![0.0; ay.len()];
        for (i, (&u, &w)) in ay.iter().zip(self.data.iter()).enumerate() {
            let log_ratio = (u / w).ln();
            value += u * log_ratio + w - u;
            residual[i] = log_ratio;
        }
        let mut eucl_grad = self.matrix.mul_transpose_vec(&residual);

        let (rows, cols) = self.image_shape;
        let v = y.values();
        let rho2 = self.rho * self.rho;
        for r in 0..rows {
            for c in 0..cols {
                let idx = r * cols + c;
                let gh = if c + 1 < cols { v[idx + 1] - v[idx] } else { 0.0 };
                let gv = if r + 1 < rows {
                    v[idx + cols] - v[idx]
                } else {
                    0.0
                };
                let s = (gh * gh + gv * gv + rho2).sqrt();
                value += self.lambda * (s - self.rho);
                let wh = self.lambda * gh / s;
                let wv = self.lambda * gv / s;
                eucl_grad[idx] -= wh + wv;
                if c + 1 < cols {
                    eucl_grad[idx + 1] += wh;
                }
                if r + 1 < rows {
                    eucl_grad[idx + cols] += wv;
                }
            }
        }
        ObjectiveEval { value, eucl_grad }
    }

    /// Bregman divergence of the objective between two points, anchored at
    /// `anchor`: `D_phi(Ax, Ax0) + lambda * (J(x) - J(x0) - <dJ(x0), x - x0>)`.
    ///
    /// The measured data cancels out of this quantity, which is what lets the
    /// coarse model get away with a placeholder `b`.
    pub fn bregman(&self, x: &BoxPoint, anchor: &BoxPoint) -> f64 {
        let ax = self.matrix.mul_vec(x.values());
        let ax0 = self.matrix.mul_vec(anchor.values());
        let mut total = 0.0;
        for (&u, &w) in ax.iter().zip(ax0.iter()) {
            total += u * (u / w).ln() + w - u;
        }
        let j_x = self.smoothed_tv(x);
        let j_x0 = self.smoothed_tv(anchor);
        let dj_x0 = self.smoothed_tv_grad(anchor);
        let mut linear = 0.0;
        for ((&g, &xi), &x0i) in dj_x0.iter().zip(x.values()).zip(anchor.values()) {
            linear += g * (xi - x0i);
        }
        total + self.lambda * (j_x - j_x0 - linear)
    }

    /// Rebuilds the problem on the coarse grid of `h`: the forward map is
    /// regenerated from the stored scan angles with the detector array sized
    /// to the coarse grid, while `lambda` and `rho` carry over. The coarse
    /// data vector is a placeholder (all ones); nothing that consumes a
    /// coarse problem ever reads it.
    pub fn coarsen(&self, h: &GridHierarchy) -> Result<Problem, ObjectiveError> {
        if self.scan_angles.is_empty() {
            return Err(ObjectiveError::NoScanAngles);
        }
        if h.fine_shape() != self.image_shape {
            return Err(ObjectiveError::GridMismatch {
                problem_rows: self.image_shape.0,
                problem_cols: self.image_shape.1,
                grid_rows: h.fine_shape().0,
                grid_cols: h.fine_shape().1,
            });
        }
        let coarse_shape = h.coarse_shape();
        let geom = ScanGeometry::with_angles(coarse_shape, self.scan_angles.clone())?;
        let matrix = tomography::build_matrix(&geom);
        let placeholder = vec![1.0; matrix.nrows()];
        Ok(
            Problem::new(matrix, placeholder, self.lambda, self.rho, coarse_shape)?
                .with_scan_angles(&self.scan_angles),
        )
    }
}
