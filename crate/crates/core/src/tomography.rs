//! Synthetic parallel-beam tomography.
//!
//! The forward map is assembled ray by ray: entry `(i, j)` of the matrix is
//! the exact length of the segment where projection ray `i` crosses pixel
//! `j`. Rays that miss the image entirely are dropped so that every row of
//! the matrix has support, which the objective module requires.

use crate::manifold::BoxPoint;
use crate::objective::{ObjectiveError, Problem};
use crate::phantom::Phantom;
use crate::sparse::CsrMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("grid {rows}x{cols} has an empty side")]
    InvalidGrid { rows: usize, cols: usize },
    #[error("a scan needs at least one projection angle")]
    NoAngles,
    #[error("angle {value} is not finite")]
    NonFiniteAngle { value: f64 },
    #[error("undersampling fraction must lie in (0, 1], got {value}")]
    InvalidUndersampling { value: f64 },
    #[error("every ray missed the image, no data to synthesize")]
    EmptyScan,
    #[error(transparent)]
    Objective(Box<ObjectiveError>),
}

impl From<ObjectiveError> for TomographyError {
    fn from(e: ObjectiveError) -> Self {
        TomographyError::Objective(Box::new(e))
    }
}

/// Parallel-beam acquisition layout: a set of angles in `[0, pi)` and a
/// centered detector array whose width matches the grid side, one detector
/// per pixel unit.
#[derive(Debug, Clone)]
pub struct ScanGeometry {
    grid: (usize, usize),
    angles: Vec<f64>,
    detector_count: usize,
    detector_spacing: f64,
}

impl ScanGeometry {
    /// Equidistant angles `k * pi / num_angles` for `k = 0..num_angles`.
    pub fn new(grid: (usize, usize), num_angles: usize) -> Result<Self, TomographyError> {
        if num_angles == 0 {
            return Err(TomographyError::NoAngles);
        }
        let step = std::f64::consts::PI / num_angles as f64;
        let angles = (0..num_angles).map(|k| k as f64 * step).collect();
        Self::with_angles(grid, angles)
    }

    /// Geometry with an explicit angle list.
    pub fn with_angles(grid: (usize, usize), angles: Vec<f64>) -> Result<Self, TomographyError> {
        let (rows, cols) = grid;
        if rows == 0 || cols == 0 {
            return Err(TomographyError::InvalidGrid { rows, cols });
        }
        if angles.is_empty() {
            return Err(TomographyError::NoAngles);
        }
        if let Some(&bad) = angles.iter().find(|a| !a.is_finite()) {
            return Err(TomographyError::NonFiniteAngle { value: bad });
        }
        Ok(ScanGeometry {
            grid,
            angles,
            detector_count: rows.max(cols),
            detector_spacing: 1.0,
        })
    }

    /// Geometry whose angle count follows the undersampling convention
    /// `angles = max(1, round(fraction * grid_side))`.
    pub fn for_undersampling(
        grid: (usize, usize),
        fraction: f64,
    ) -> Result<Self, TomographyError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(TomographyError::InvalidUndersampling { value: fraction });
        }
        let side = grid.0.max(grid.1) as f64;
        let num_angles = ((fraction * side).round() as usize).max(1);
        Self::new(grid, num_angles)
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn detector_count(&self) -> usize {
        self.detector_count
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }
}

// Direction components smaller than this are treated as axis-parallel when
// clipping against the pixel slabs.
const DIR_EPS: f64 = 1e-12;
// Segments shorter than this are corner grazes and carry no weight.
const LEN_EPS: f64 = 1e-12;

/// Traces one ray through the grid and appends `(pixel, length)` pairs.
///
/// The ray is `p(s) = origin + s * dir` with unit `dir`. Crossing parameters
/// with every horizontal and vertical pixel boundary inside the clip range
/// are merged, and each resulting segment is attributed to the pixel
/// containing its midpoint.
fn trace_ray(
    grid: (usize, usize),
    origin: (f64, f64),
    dir: (f64, f64),
    out: &mut Vec<(usize, f64)>,
) {
    let (rows, cols) = grid;
    let (x0, y0) = origin;
    let (dx, dy) = dir;
    let (width, height) = (cols as f64, rows as f64);

    let mut s_min = f64::NEG_INFINITY;
    let mut s_max = f64::INFINITY;
    for (pos, d, hi) in [(x0, dx, width), (y0, dy, height)] {
        if d.abs() > DIR_EPS {
            let a = (0.0 - pos) / d;
            let b = (hi - pos) / d;
            s_min = s_min.max(a.min(b));
            s_max = s_max.min(a.max(b));
        } else if !(0.0..hi).contains(&pos) {
            return;
        }
    }
    if !(s_min.is_finite() && s_max.is_finite()) || s_max - s_min <= LEN_EPS {
        return;
    }

    let mut params = vec![s_min, s_max];
    if dx.abs() > DIR_EPS {
        for k in 0..=cols {
            let s = (k as f64 - x0) / dx;
            if s > s_min && s < s_max {
                params.push(s);
            }
        }
    }
    if dy.abs() > DIR_EPS {
        for k in 0..=rows {
            let s = (k as f64 - y0) / dy;
            if s > s_min && s < s_max {
                params.push(s);
            }
        }
    }
    params.sort_by(|a, b| a.partial_cmp(b).expect("finite crossing parameters"));

    for pair in params.windows(2) {
        let len = pair[1] - pair[0];
        if len <= LEN_EPS {
            continue;
        }
        let mid = 0.5 * (pair[0] + pair[1]);
        let c = (x0 + mid * dx).floor();
        let r = (y0 + mid * dy).floor();
        if c >= 0.0 && c < width && r >= 0.0 && r < height {
            out.push((r as usize * cols + c as usize, len));
        }
    }
}

/// Assembles the projection matrix for `geom`, one row per ray that touches
/// the image, ordered angle-major then detector-minor.
pub fn build_matrix(geom: &ScanGeometry) -> CsrMatrix {
    let (rows, cols) = geom.grid();
    let center = (cols as f64 / 2.0, rows as f64 / 2.0);
    let half_span = (geom.detector_count() as f64 - 1.0) / 2.0;

    let mut matrix_rows = Vec::with_capacity(geom.num_angles() * geom.detector_count());
    let mut entries = Vec::new();
    for &theta in geom.angles() {
        let dir = (theta.cos(), theta.sin());
        let normal = (-theta.sin(), theta.cos());
        for k in 0..geom.detector_count() {
            let t = (k as f64 - half_span) * geom.detector_spacing();
            let origin = (center.0 + t * normal.0, center.1 + t * normal.1);
            entries.clear();
            trace_ray((rows, cols), origin, dir, &mut entries);
            if !entries.is_empty() {
                matrix_rows.push(entries.clone());
            }
        }
    }
    CsrMatrix::from_rows(rows * cols, matrix_rows)
}

/// Builds a full reconstruction problem from a phantom: scan geometry from
/// the undersampling fraction, exact projections of the phantom as data, and
/// the given regularization weights. The returned problem remembers its
/// angles so it can be re-projected on coarser grids.
pub fn synthesize(
    phantom: &Phantom,
    undersampling: f64,
    lambda: f64,
    rho: f64,
) -> Result<Problem, TomographyError> {
    let shape = phantom.shape();
    let geom = ScanGeometry::for_undersampling(shape, undersampling)?;
    let matrix = build_matrix(&geom);
    if matrix.nrows() == 0 {
        return Err(TomographyError::EmptyScan);
    }
    let truth = BoxPoint::new(phantom.values().to_vec()).expect("phantom values are valid");
    let data = matrix.mul_vec(truth.values());
    debug_assert!(data.iter().all(|&v| v > 0.0));
    let pb = Problem::new(matrix, data, lambda, rho, shape)?;
    Ok(pb.with_scan_angles(geom.angles()))
}
