//! Grid transfer between a fine 2-D pixel grid and its 2x coarsening.
//!
//! Coarse points sit at even (row, col) fine coordinates. The prolongation
//! keeps coarse components and fills fine-only points with weighted
//! geometric means over their coarse neighbors (edge midpoints average two
//! points, cell centers four, boundaries renormalize). Restriction of
//! points is plain injection. Restriction of tangents is the adjoint of
//! the prolongation differential with respect to the box metric on both
//! levels, so `<u, restrict_tangent(y, v)>_x = <dprolong(x, u), v>_y` with
//! `x = restrict(y)`.

use crate::manifold::{self, BoxPoint, Tangent, WeightSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TransferError {
    #[error("grid {rows}x{cols} must have even dimensions")]
    OddDimension { rows: usize, cols: usize },
    #[error("grid {rows}x{cols} is too small to coarsen")]
    TooSmall { rows: usize, cols: usize },
}

#[derive(Debug, Clone)]
enum FineNode {
    /// Fine point coinciding with the coarse point of this index.
    Coarse(usize),
    /// Fine-only point interpolated from coarse neighbors.
    Interp(WeightSet),
}

/// One fine grid, its 2x coarsening, and the interpolation pattern
/// connecting them.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    fine_shape: (usize, usize),
    coarse_shape: (usize, usize),
    nodes: Vec<FineNode>,
    coarse_to_fine: Vec<usize>,
}

impl GridHierarchy {
    /// Builds the standard bilinear stencil with uniform neighbor weights.
    pub fn bilinear(fine_shape: (usize, usize)) -> Result<Self, TransferError> {
        let (rows, cols) = fine_shape;
        if rows < 2 || cols < 2 {
            return Err(TransferError::TooSmall { rows, cols });
        }
        if rows % 2 != 0 || cols % 2 != 0 {
            return Err(TransferError::OddDimension { rows, cols });
        }
        let (crows, ccols) = (rows / 2, cols / 2);
        let coarse_index = |r: usize, c: usize| (r / 2) * ccols + c / 2;

        let mut nodes = Vec::with_capacity(rows * cols);
        let mut coarse_to_fine = vec![0; crows * ccols];
        for r in 0..rows {
            for c in 0..cols {
                let node = match (r % 2, c % 2) {
                    (0, 0) => {
                        coarse_to_fine[coarse_index(r, c)] = r * cols + c;
                        FineNode::Coarse(coarse_index(r, c))
                    }
                    (0, 1) => Self::stencil(&[
                        Some(coarse_index(r, c - 1)),
                        (c + 1 < cols).then(|| coarse_index(r, c + 1)),
                    ]),
                    (1, 0) => Self::stencil(&[
                        Some(coarse_index(r - 1, c)),
                        (r + 1 < rows).then(|| coarse_index(r + 1, c)),
                    ]),
                    _ => Self::stencil(&[
                        Some(coarse_index(r - 1, c - 1)),
                        (c + 1 < cols).then(|| coarse_index(r - 1, c + 1)),
                        (r + 1 < rows).then(|| coarse_index(r + 1, c - 1)),
                        (r + 1 < rows && c + 1 < cols).then(|| coarse_index(r + 1, c + 1)),
                    ]),
                };
                nodes.push(node);
            }
        }
        Ok(Self {
            fine_shape,
            coarse_shape: (crows, ccols),
            nodes,
            coarse_to_fine,
        })
    }

    fn stencil(candidates: &[Option<usize>]) -> FineNode {
        let indices: Vec<usize> = candidates.iter().flatten().copied().collect();
        // In-range neighbors share the weight uniformly; at the right and
        // bottom borders this renormalizes the usual 1/2 and 1/4 stencils.
        let w = 1.0 / indices.len() as f64;
        let weights = vec![w; indices.len()];
        FineNode::Interp(WeightSet::new(indices, weights).expect("uniform stencil weights"))
    }

    pub fn fine_shape(&self) -> (usize, usize) {
        self.fine_shape
    }

    pub fn coarse_shape(&self) -> (usize, usize) {
        self.coarse_shape
    }

    pub fn fine_len(&self) -> usize {
        self.fine_shape.0 * self.fine_shape.1
    }

    pub fn coarse_len(&self) -> usize {
        self.coarse_shape.0 * self.coarse_shape.1
    }

    /// Neighborhood weights of a fine-only point, or `None` where the fine
    /// point coincides with a coarse one.
    pub fn neighborhood(&self, fine_index: usize) -> Option<&WeightSet> {
        match &self.nodes[fine_index] {
            FineNode::Coarse(_) => None,
            FineNode::Interp(ws) => Some(ws),
        }
    }

    /// Prolongs a coarse point to the fine grid: coarse components pass
    /// through, fine-only components take the weighted geometric mean of
    /// their neighbors.
    pub fn prolong(&self, x: &BoxPoint) -> BoxPoint {
        assert_eq!(x.len(), self.coarse_len(), "coarse point has wrong length");
        let xv = x.values();
        let mut out = Vec::with_capacity(self.fine_len());
        let mut vals = [0.0f64; 4];
        for node in &self.nodes {
            out.push(match node {
                FineNode::Coarse(i) => xv[*i],
                FineNode::Interp(ws) => {
                    let k = ws.len();
                    for (slot, &i) in vals.iter_mut().zip(ws.indices()) {
                        *slot = xv[i];
                    }
                    manifold::weighted_mean_unchecked(&vals[..k], ws.weights())
                }
            });
        }
        BoxPoint::from_clipped(out)
    }

    /// Differential of [`Self::prolong`] at `x`, applied to a coarse
    /// tangent: pass-through on coarse components, and
    /// `m(1-m) * sum_i w_i u_i / (x_i(1-x_i))` with `m` the neighborhood
    /// mean on fine-only components.
    pub fn dprolong(&self, x: &BoxPoint, u: &Tangent) -> Tangent {
        assert_eq!(x.len(), self.coarse_len(), "coarse point has wrong length");
        assert_eq!(u.len(), self.coarse_len(), "coarse tangent has wrong length");
        let xv = x.values();
        let uv = u.values();
        let mut out = Vec::with_capacity(self.fine_len());
        let mut vals = [0.0f64; 4];
        for node in &self.nodes {
            out.push(match node {
                FineNode::Coarse(i) => uv[*i],
                FineNode::Interp(ws) => {
                    let k = ws.len();
                    for (slot, &i) in vals.iter_mut().zip(ws.indices()) {
                        *slot = xv[i];
                    }
                    let m = manifold::weighted_mean_unchecked(&vals[..k], ws.weights());
                    let s: f64 = ws
                        .indices()
                        .iter()
                        .zip(ws.weights())
                        .map(|(&i, &w)| w * (uv[i] / (xv[i] * (1.0 - xv[i]))))
                        .sum();
                    m * (1.0 - m) * s
                }
            });
        }
        Tangent::new(out)
    }

    /// Restriction of points: injection at the coarse positions. Values are
    /// taken over unchanged, so `restrict(prolong(x)) == x` bit-exactly.
    pub fn restrict(&self, y: &BoxPoint) -> BoxPoint {
        assert_eq!(y.len(), self.fine_len(), "fine point has wrong length");
        let yv = y.values();
        BoxPoint::from_clipped(self.coarse_to_fine.iter().map(|&j| yv[j]).collect())
    }

    /// Restriction of tangents: the adjoint of [`Self::dprolong`] under the
    /// box metrics at `restrict(y)` and `y`. Coarse components of `v` pass
    /// through; each fine-only component is scattered to its neighbors with
    /// weight `w_ij * m_j(1-m_j) / (y_j(1-y_j))`.
    pub fn restrict_tangent(&self, y: &BoxPoint, v: &Tangent) -> Tangent {
        assert_eq!(y.len(), self.fine_len(), "fine point has wrong length");
        assert_eq!(v.len(), self.fine_len(), "fine tangent has wrong length");
        let yv = y.values();
        let vv = v.values();
        let mut out = vec![0.0f64; self.coarse_len()];
        let mut vals = [0.0f64; 4];
        for (j, node) in self.nodes.iter().enumerate() {
            match node {
                FineNode::Coarse(i) => out[*i] += vv[j],
                FineNode::Interp(ws) => {
                    let k = ws.len();
                    for (slot, &i) in vals.iter_mut().zip(ws.indices()) {
                        *slot = yv[self.coarse_to_fine[i]];
                    }
                    let m = manifold::weighted_mean_unchecked(&vals[..k], ws.weights());
                    let factor = m * (1.0 - m) / (yv[j] * (1.0 - yv[j]));
                    for (&i, &w) in ws.indices().iter().zip(ws.weights()) {
                        out[i] += w * factor * vv[j];
                    }
                }
            }
        }
        Tangent::new(out)
    }

    /// Plain linear interpolation with the same stencil: pass-through on
    /// coarse positions, weighted arithmetic mean elsewhere. The geometric
    /// prolongation is this map conjugated by logit/logistic.
    pub fn interp_apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.coarse_len(), "coarse vector has wrong length");
        self.nodes
            .iter()
            .map(|node| match node {
                FineNode::Coarse(i) => w[*i],
                FineNode::Interp(ws) => ws
                    .indices()
                    .iter()
                    .zip(ws.weights())
                    .map(|(&i, &wt)| wt * w[i])
                    .sum(),
            })
            .collect()
    }

    /// Transpose of [`Self::interp_apply`].
    pub fn interp_transpose(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.fine_len(), "fine vector has wrong length");
        let mut out = vec![0.0f64; self.coarse_len()];
        for (j, node) in self.nodes.iter().enumerate() {
            match node {
                FineNode::Coarse(i) => out[*i] += w[j],
                FineNode::Interp(ws) => {
                    for (&i, &wt) in ws.indices().iter().zip(ws.weights()) {
                        out[i] += wt * w[j];
                    }
                }
            }
        }
        out
    }
}
