//! Distance kernels and the coordinate types the rest of the crate builds on.
//!
//! Three kernels are provided: great-circle (haversine) for geocoded
//! latitude/longitude data, plain Euclidean for planar instances, and squared
//! Euclidean for the k-means-style objective. Squared Euclidean does not
//! satisfy the triangle inequality; callers that depend on it must check
//! [`MetricKind::is_metric`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earth radius in statute miles, the unit the disparity tables report.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("coordinate is NaN")]
    NanCoordinate,
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sphere radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

/// A geocoded point in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if lat.is_nan() || lon.is_nan() {
            return Err(GeoError::NanCoordinate);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::LongitudeOutOfRange(lon));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.lat, self.lon]
    }
}

/// Which distance kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MetricKind {
    /// Great-circle distance on a sphere of the given radius.
    Haversine { radius: f64 },
    /// Euclidean distance in `dim` dimensions.
    Euclidean { dim: usize },
    /// Squared Euclidean distance; not a metric (no triangle inequality).
    SquaredEuclidean { dim: usize },
}

impl MetricKind {
    /// Haversine with the default Earth radius in miles.
    pub fn haversine_miles() -> Self {
        MetricKind::Haversine {
            radius: EARTH_RADIUS_MILES,
        }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        match *self {
            MetricKind::Haversine { radius } => {
                if !(radius > 0.0) {
                    return Err(GeoError::NonPositiveRadius(radius));
                }
            }
            MetricKind::Euclidean { dim } | MetricKind::SquaredEuclidean { dim } => {
                if dim == 0 {
                    return Err(GeoError::ZeroDimension);
                }
            }
        }
        Ok(())
    }

    /// Whether the triangle inequality may be assumed.
    pub fn is_metric(&self) -> bool {
        !matches!(self, MetricKind::SquaredEuclidean { .. })
    }

    /// Number of coordinates a point must carry for this kernel.
    pub fn dim(&self) -> usize {
        match *self {
            MetricKind::Haversine { .. } => 2,
            MetricKind::Euclidean { dim } | MetricKind::SquaredEuclidean { dim } => dim,
        }
    }
}

/// Distance between two coordinate slices under the given kernel.
pub fn distance(a: &[f64], b: &[f64], metric: &MetricKind) -> Result<f64, GeoError> {
    let dim = metric.dim();
    if a.len() != dim {
        return Err(GeoError::DimensionMismatch {
            expected: dim,
            got: a.len(),
        });
    }
    if b.len() != dim {
        return Err(GeoError::DimensionMismatch {
            expected: dim,
            got: b.len(),
        });
    }
    Ok(distance_unchecked(a, b, metric))
}

/// Same as [`distance`] but skips the dimension check. Hot loops use this
/// after validating inputs once.
#[inline]
pub fn distance_unchecked(a: &[f64], b: &[f64], metric: &MetricKind) -> f64 {
    match *metric {
        MetricKind::Haversine { radius } => haversine(a[0], a[1], b[0], b[1], radius),
        MetricKind::Euclidean { .. } => sq_euclidean(a, b).sqrt(),
        MetricKind::SquaredEuclidean { .. } => sq_euclidean(a, b),
    }
}

#[inline]
fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Standard haversine formula. The argument of the final arcsin is clamped to
/// [0, 1]: antipodal pairs can push it past 1 by a few ulps.
#[inline]
fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64, radius: f64) -> f64 {
    let (la1, lo1, la2, lo2) = (
        lat1.to_radians(),
        lon1.to_radians(),
        lat2.to_radians(),
        lon2.to_radians(),
    );
    let sin_dlat = ((la2 - la1) / 2.0).sin();
    let sin_dlon = ((lo2 - lo1) / 2.0).sin();
    let h = sin_dlat * sin_dlat + la1.cos() * la2.cos() * sin_dlon * sin_dlon;
    let h = h.clamp(0.0, 1.0);
    2.0 * radius * h.sqrt().asin()
}

/// Full distance matrix: entry `(i, j)` is `distance(points[i], centers[j])`.
///
/// Rows are computed in parallel; the output layout is row-major and
/// independent of thread count.
pub fn pairwise_cost(
    points: &[Vec<f64>],
    centers: &[Vec<f64>],
    metric: &MetricKind,
) -> Result<Vec<Vec<f64>>, GeoError> {
    if points.is_empty() {
        return Err(GeoError::EmptyInput("points"));
    }
    if centers.is_empty() {
        return Err(GeoError::EmptyInput("centers"));
    }
    metric.validate()?;
    let dim = metric.dim();
    for p in points.iter().chain(centers.iter()) {
        if p.len() != dim {
            return Err(GeoError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    Ok(points
        .par_iter()
        .map(|p| {
            centers
                .iter()
                .map(|c| distance_unchecked(p, c, metric))
                .collect()
        })
        .collect())
}
