//! Table-plane segmentation and the object's principal axis and length from
//! a point cloud in meters.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::GeometryConfig;
use crate::data::PointCloud;
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("best plane holds only {0:.1}% of the points")]
    DegenerateCloud(f64),
    #[error("no points above the table plane")]
    NoObjectPoints,
    #[error("projected object points do not span a direction")]
    DegenerateProjection,
    #[error("inlier threshold must be positive")]
    BadThreshold,
}

/// Minimum share of points the table plane must hold.
pub const MIN_INLIER_RATIO: f64 = 0.3;

/// `normal . p + offset = 0`, with `|normal| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.offset
    }

    fn flipped(self) -> Plane {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    /// Orthonormal in-plane basis `(origin, e1, e2)`. `e1` is the world x
    /// axis projected into the plane (world y when x is nearly normal), and
    /// `origin` is the projection of the world origin.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        let e2 = n.cross(&e1);
        (-self.offset * n, e1, e2)
    }

    /// In-plane coordinates of `p` after orthogonal projection.
    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        let (o, e1, e2) = self.basis();
        let d = p - o;
        Vector2::new(d.dot(&e1), d.dot(&e2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Indices into the input cloud, ascending.
    pub inliers: Vec<usize>,
}

fn plane_through(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Option<Plane> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if !(len > 1e-12) {
        return None;
    }
    let normal = n / len;
    Some(Plane {
        normal,
        offset: -normal.dot(a),
    })
}

fn inliers_of(points: &[Vector3<f64>], plane: &Plane, threshold: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| plane.signed_distance(&points[i]).abs() <= threshold)
        .collect()
}

/// Total-least-squares plane through the selected points.
fn refit(points: &[Vector3<f64>], idx: &[usize]) -> Option<Plane> {
    let n = idx.len() as f64;
    let centroid: Vector3<f64> = idx.iter().map(|&i| points[i]).sum::<Vector3<f64>>() / n;
    let scatter: Matrix3<f64> = idx
        .iter()
        .map(|&i| {
            let d = points[i] - centroid;
            d * d.transpose()
        })
        .sum();
    let eig = SymmetricEigen::new(scatter);
    let k = eig.eigenvalues.imin();
    let normal: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
    let len = normal.norm();
    if !(len > 0.0) {
        return None;
    }
    let normal = normal / len;
    Some(Plane {
        normal,
        offset: -normal.dot(&centroid),
    })
}

/// Orients the normal toward the side holding most off-plane points, or
/// toward +z when the sides balance.
fn orient(plane: Plane, points: &[Vector3<f64>], threshold: f64) -> Plane {
    let side: i64 = points
        .iter()
        .map(|p| plane.signed_distance(p))
        .filter(|d| d.abs() > threshold)
        .map(|d| if d > 0.0 { 1 } else { -1 })
        .sum();
    let flip = match side.cmp(&0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => plane.normal.z < 0.0,
    };
    if flip {
        plane.flipped()
    } else {
        plane
    }
}

/// Three-point RANSAC with a least-squares refit on the consensus set.
/// Deterministic for a fixed seed.
pub fn segment_plane(
    cloud: &PointCloud,
    iterations: usize,
    threshold: f64,
    seed: u64,
) -> Result<PlaneFit, GeometryError> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(GeometryError::TooFewPoints(pts.len()));
    }
    if !(threshold > 0.0) {
        return Err(GeometryError::BadThreshold);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Plane, usize)> = None;
    for _ in 0..iterations.max(1) {
        let s = index::sample(&mut rng, pts.len(), 3);
        let Some(plane) = plane_through(&pts[s.index(0)], &pts[s.index(1)], &pts[s.index(2)]) else {
            continue;
        };
        let count = pts
            .iter()
            .filter(|p| plane.signed_distance(p).abs() <= threshold)
            .count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((plane, count));
        }
    }
    let Some((coarse, _)) = best else {
        return Err(GeometryError::DegenerateCloud(0.0));
    };
    let coarse_inliers = inliers_of(pts, &coarse, threshold);
    let plane = refit(pts, &coarse_inliers).unwrap_or(coarse);
    let mut inliers = inliers_of(pts, &plane, threshold);
    let plane = if inliers.len() < coarse_inliers.len() {
        inliers = coarse_inliers;
        coarse
    } else {
        plane
    };
    let ratio = inliers.len() as f64 / pts.len() as f64;
    if ratio < MIN_INLIER_RATIO {
        return Err(GeometryError::DegenerateCloud(100.0 * ratio));
    }
    Ok(PlaneFit {
        plane: orient(plane, pts, threshold),
        inliers,
    })
}

/// Points strictly above the plane by more than `threshold`.
pub fn object_points(cloud: &PointCloud, plane: &Plane, threshold: f64) -> PointCloud {
    PointCloud::new(
        cloud
            .points
            .iter()
            .copied()
            .filter(|p| plane.signed_distance(p) > threshold)
            .collect(),
    )
}

/// Dominant direction and mean of the object's footprint in the plane.
/// The axis sign is canonical: positive first coordinate, or positive
/// second coordinate when the first is zero.
pub fn principal_axis(points: &PointCloud, plane: &Plane) -> Result<(Vector2<f64>, Vector2<f64>), GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::NoObjectPoints);
    }
    let uv: Vec<Vector2<f64>> = points.points.iter().map(|p| plane.project(p)).collect();
    let center = uv.iter().sum::<Vector2<f64>>() / uv.len() as f64;
    let scatter: Matrix2<f64> = uv
        .iter()
        .map(|q| {
            let d = q - center;
            d * d.transpose()
        })
        .sum();
    let eig = SymmetricEigen::new(scatter);
    let k = eig.eigenvalues.imax();
    if !(eig.eigenvalues[k] > 0.0) {
        return Err(GeometryError::DegenerateProjection);
    }
    let mut axis: Vector2<f64> = eig.eigenvectors.column(k).into_owned().normalize();
    if axis.x < 0.0 || (axis.x == 0.0 && axis.y < 0.0) {
        axis = -axis;
    }
    Ok((axis, center))
}

/// `2 x` the `length_percentile` of the center distances along the axis,
/// or of the full in-plane distances in Euclidean mode.
pub fn object_length(
    points: &PointCloud,
    plane: &Plane,
    axis: &Vector2<f64>,
    center: &Vector2<f64>,
    config: &GeometryConfig,
) -> f64 {
    let dist: Vec<f64> = points
        .points
        .iter()
        .map(|p| {
            let d = plane.project(p) - center;
            if config.euclidean_length {
                d.norm()
            } else {
                d.dot(axis).abs()
            }
        })
        .collect();
    2.0 * stats::percentile(&dist, config.length_percentile).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectGeometry {
    pub plane: Plane,
    pub object_points: PointCloud,
    pub axis_2d: Vector2<f64>,
    pub center_2d: Vector2<f64>,
    pub length: f64,
}

pub fn estimate_geometry(cloud: &PointCloud, config: &GeometryConfig, seed: u64) -> Result<ObjectGeometry, GeometryError> {
    let fit = segment_plane(cloud, config.ransac_iterations, config.ransac_threshold_m, seed)?;
    let object = object_points(cloud, &fit.plane, config.ransac_threshold_m);
    let (axis_2d, center_2d) = principal_axis(&object, &fit.plane)?;
    let length = object_length(&object, &fit.plane, &axis_2d, &center_2d, config);
    Ok(ObjectGeometry {
        plane: fit.plane,
        object_points: object,
        axis_2d,
        center_2d,
        length,
    })
}
