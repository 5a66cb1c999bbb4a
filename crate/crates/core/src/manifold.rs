//! Riemannian geometry of the open unit box.
//!
//! A point is a vector with components in `(0,1)`, carrying the Bernoulli
//! Fisher-Rao metric `G(y) = Diag(1/(y_i (1-y_i)))`. The exponential map of
//! the e-connection has a closed form that is evaluated in log-odds
//! coordinates, so huge tangent inputs saturate monotonically instead of
//! overflowing. Its differential doubles as the vector transport, and
//! weighted geometric means (averages in odds space) underpin the grid
//! transfer operators.

use thiserror::Error;

/// Margin by which all stored points stay away from 0 and 1.
pub const EPS_CLIP: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ManifoldError {
    #[error("point must have at least one component")]
    Empty,
    #[error("component {index} is not finite")]
    NotFinite { index: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("weight {index} is {value}, weights must be positive")]
    NonpositiveWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
}

/// Log-odds coordinate of `eta` in `(0,1)`.
#[inline]
pub fn logit(eta: f64) -> f64 {
    (eta / (1.0 - eta)).ln()
}

/// Inverse of [`logit`], evaluated without overflow for any `theta`.
#[inline]
pub fn logistic(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(EPS_CLIP, 1.0 - EPS_CLIP)
}

/// Point of the clipped open box `[EPS_CLIP, 1-EPS_CLIP]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPoint {
    values: Vec<f64>,
}

impl BoxPoint {
    /// Clips the components into the box. Empty or non-finite input is
    /// rejected rather than clipped.
    pub fn new(values: Vec<f64>) -> Result<Self, ManifoldError> {
        if values.is_empty() {
            return Err(ManifoldError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ManifoldError::NotFinite { index });
        }
        Ok(Self {
            values: values.into_iter().map(clip).collect(),
        })
    }

    pub fn constant(n: usize, value: f64) -> Result<Self, ManifoldError> {
        Self::new(vec![value; n])
    }

    /// Wraps values that are already inside the box.
    pub(crate) fn from_clipped(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|&v| (EPS_CLIP..=1.0 - EPS_CLIP).contains(&v)));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Plain Euclidean distance between the coordinate vectors.
    pub fn euclidean_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "point dimensions differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Tangent vector; an unconstrained coefficient vector tied to a base point
/// only through the operations that consume it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    values: Vec<f64>,
}

impl Tangent {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }
}

/// Positive weights over a set of indices, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl WeightSet {
    pub fn new(indices: Vec<usize>, weights: Vec<f64>) -> Result<Self, ManifoldError> {
        if indices.is_empty() {
            return Err(ManifoldError::Empty);
        }
        if indices.len() != weights.len() {
            return Err(ManifoldError::DimensionMismatch {
                left: indices.len(),
                right: weights.len(),
            });
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, &w)| !(w > 0.0)) {
            return Err(ManifoldError::NonpositiveWeight { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ManifoldError::WeightSum { sum });
        }
        Ok(Self { indices, weights })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Diagonal of the metric tensor at `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDiag {
    weights: Vec<f64>,
}

impl MetricDiag {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Metric diagonal `1/(y_i (1-y_i))`; every entry is at least 4.
pub fn metric(y: &BoxPoint) -> MetricDiag {
    MetricDiag {
        weights: y.values().iter().map(|&v| 1.0 / (v * (1.0 - v))).collect(),
    }
}

/// Metric inner product of two tangents at `y`.
pub fn inner(y: &BoxPoint, v: &Tangent, w: &Tangent) -> f64 {
    assert_eq!(y.len(), v.len(), "tangent dimension differs from point");
    assert_eq!(y.len(), w.len(), "tangent dimension differs from point");
    y.values()
        .iter()
        .zip(v.values().iter().zip(w.values()))
        .map(|(&e, (&a, &b))| a * b / (e * (1.0 - e)))
        .sum()
}

/// Riemannian gradient: the Euclidean gradient rescaled by the inverse
/// metric, `y_i (1-y_i) g_i`.
pub fn riem_grad(y: &BoxPoint, eucl_grad: &[f64]) -> Tangent {
    assert_eq!(y.len(), eucl_grad.len(), "gradient dimension differs from point");
    Tangent::new(
        y.values()
            .iter()
            .zip(eucl_grad)
            .map(|(&e, &g)| e * (1.0 - e) * g)
            .collect(),
    )
}

/// Exponential map of the e-connection, the solver's retraction.
///
/// Componentwise in log-odds coordinates: `theta' = logit(eta) +
/// v/(eta(1-eta))`, then back through [`logistic`] and the clip. A zero
/// component returns the base component bit-exactly, so `exp_map(y, 0) = y`.
pub fn exp_map(y: &BoxPoint, v: &Tangent) -> BoxPoint {
    assert_eq!(y.len(), v.len(), "tangent dimension differs from point");
    BoxPoint::from_clipped(
        y.values()
            .iter()
            .zip(v.values())
            .map(|(&eta, &vi)| {
                if vi == 0.0 {
                    eta
                } else {
                    clip(logistic(logit(eta) + vi / (eta * (1.0 - eta))))
                }
            })
            .collect(),
    )
}

/// Inverse of [`exp_map`]: the tangent at `y` that reaches `target`.
pub fn exp_inv(y: &BoxPoint, target: &BoxPoint) -> Tangent {
    assert_eq!(y.len(), target.len(), "point dimensions differ");
    Tangent::new(
        y.values()
            .iter()
            .zip(target.values())
            .map(|(&eta, &etap)| {
                if eta == etap {
                    0.0
                } else {
                    eta * (1.0 - eta) * (logit(etap) - logit(eta))
                }
            })
            .collect(),
    )
}

/// Differential of the exponential map at `y` in base direction `u`,
/// applied to `v`: scales by `eta'(1-eta')/(eta(1-eta))` with
/// `eta' = exp_map(y, u)`.
pub fn dexp(y: &BoxPoint, u: &Tangent, v: &Tangent) -> Tangent {
    assert_eq!(y.len(), v.len(), "tangent dimension differs from point");
    let moved = exp_map(y, u);
    Tangent::new(
        y.values()
            .iter()
            .zip(moved.values().iter().zip(v.values()))
            // Grouped so the ratio is 1.0 exactly when u does not move y.
            .map(|(&eta, (&etap, &vi))| vi * ((etap * (1.0 - etap)) / (eta * (1.0 - eta))))
            .collect(),
    )
}

/// Differential of the inverse map: the exact inverse scaling of [`dexp`].
pub fn dexp_inv(y: &BoxPoint, target: &BoxPoint, v: &Tangent) -> Tangent {
    assert_eq!(y.len(), target.len(), "point dimensions differ");
    assert_eq!(y.len(), v.len(), "tangent dimension differs from point");
    Tangent::new(
        y.values()
            .iter()
            .zip(target.values().iter().zip(v.values()))
            .map(|(&eta, (&etap, &vi))| vi * ((eta * (1.0 - eta)) / (etap * (1.0 - etap))))
            .collect(),
    )
}

/// Vector transport along the retraction; identical to [`dexp`] by
/// definition.
pub fn transport(y: &BoxPoint, u: &Tangent, v: &Tangent) -> Tangent {
    dexp(y, u, v)
}

/// Weighted geometric mean: the point whose odds are the weighted geometric
/// mean of the input odds. Computed as a logit average. Equal inputs are
/// returned unchanged so constant fields survive averaging bit-exactly.
pub fn geometric_mean(etas: &[f64], weights: &[f64]) -> Result<f64, ManifoldError> {
    if etas.is_empty() {
        return Err(ManifoldError::Empty);
    }
    if etas.len() != weights.len() {
        return Err(ManifoldError::DimensionMismatch {
            left: etas.len(),
            right: weights.len(),
        });
    }
    Ok(weighted_mean_unchecked(etas, weights))
}

pub(crate) fn weighted_mean_unchecked(etas: &[f64], weights: &[f64]) -> f64 {
    let first = etas[0];
    if etas.iter().all(|&e| e == first) {
        return first;
    }
    let s: f64 = etas.iter().zip(weights).map(|(&e, &w)| w * logit(e)).sum();
    clip(logistic(s))
}
