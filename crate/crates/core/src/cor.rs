//! Center-of-rotation fit, rotation angle, orientation vote and the
//! stability verdict.
//!
//! A marker moving from `m0` to `mt` under a rotation about `c` is
//! equidistant from `c` in both positions, so `c` lies on the perpendicular
//! bisector of the motion: `(c - xm) . (m0 - mt) = 0` with `xm` the motion
//! midpoint. Stacking one such row per marker gives an over-determined
//! linear system in `c`, solved here in the least-squares sense.

use nalgebra::{DMatrix, DVector, Vector2};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::motion::{angle_between_deg, MarkerMotion, MotionVectorSet};
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorError {
    #[error("need at least 2 markers moving beyond the noise floor, found {0}")]
    TooFewMarkers(usize),
    #[error("marker motions are (nearly) parallel; condition number {0:.3e}")]
    DegenerateMotion(f64),
    #[error("every marker lies too close to the center of rotation")]
    NoUsableMarkers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Cw,
    Ccw,
    Ambiguous,
}

impl Orientation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Orientation::Cw => "CW",
            Orientation::Ccw => "CCW",
            Orientation::Ambiguous => "ambiguous",
        }
    }

    pub fn parse(s: &str) -> Option<Orientation> {
        match s {
            "CW" | "cw" => Some(Orientation::Cw),
            "CCW" | "ccw" => Some(Orientation::Ccw),
            "ambiguous" | "none" | "-" => Some(Orientation::Ambiguous),
            _ => None,
        }
    }

    /// `+1` for clockwise, `-1` for counter-clockwise, `0` otherwise.
    pub fn sign(&self) -> f64 {
        match self {
            Orientation::Cw => 1.0,
            Orientation::Ccw => -1.0,
            Orientation::Ambiguous => 0.0,
        }
    }

    pub fn from_signed_angle(angle_deg: f64) -> Orientation {
        if angle_deg > 0.0 {
            Orientation::Cw
        } else if angle_deg < 0.0 {
            Orientation::Ccw
        } else {
            Orientation::Ambiguous
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorFit {
    pub cor: Vector2<f64>,
    /// RMS distance (px) from the solution to the bisector lines.
    pub residual: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationEstimate {
    pub cor: Vector2<f64>,
    /// Unsigned magnitude in `[0, 180)`.
    pub angle_deg: f64,
    pub orientation: Orientation,
    /// `+angle_deg` for clockwise, `-angle_deg` for counter-clockwise, 0 when
    /// the vote is ambiguous.
    pub signed_angle_deg: f64,
    pub votes_cw: usize,
    pub votes_ccw: usize,
    pub residual: f64,
    pub n_markers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    StableGrasp,
    RotationalFailure,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::StableGrasp => "stable",
            Stability::RotationalFailure => "rotational",
        }
    }

    pub fn parse(s: &str) -> Option<Stability> {
        match s {
            "stable" => Some(Stability::StableGrasp),
            "rotational" => Some(Stability::RotationalFailure),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub stability: Stability,
    pub measured_angle_deg: f64,
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn moving_rows<'a>(
    vectors: &'a MotionVectorSet,
    config: &'a PipelineConfig,
) -> impl Iterator<Item = &'a MarkerMotion> + 'a {
    vectors
        .markers
        .iter()
        .filter(|m| (m.m0 - m.mt).norm() > config.noise_floor_px)
}

/// Condition number of a symmetric positive semi-definite 2x2 matrix.
fn condition_2x2(a: f64, b: f64, d: f64) -> f64 {
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (hi, lo) = (mid + rad, mid - rad);
    if lo <= hi * f64::EPSILON {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Least-squares center of rotation of the motions `m0 -> mt`.
///
/// Each row is `[dx, dy] . c = [dx, dy] . xm` with `(dx, dy) = m0 - mt`;
/// with `weight_by_motion` off the rows are scaled to unit length, which
/// turns the objective into squared distances to the bisector lines.
pub fn estimate_cor(vectors: &MotionVectorSet, config: &PipelineConfig) -> Result<CorFit, CorError> {
    let rows: Vec<(Vector2<f64>, Vector2<f64>)> = moving_rows(vectors, config)
        .map(|m| {
            let delta = m.m0 - m.mt;
            let mid = 0.5 * (m.m0 + m.mt);
            (delta, mid)
        })
        .collect();
    if rows.len() < 2 {
        return Err(CorError::TooFewMarkers(rows.len()));
    }
    let n = rows.len();
    let mut a = DMatrix::<f64>::zeros(n, 2);
    let mut b = DVector::<f64>::zeros(n);
    for (i, (delta, mid)) in rows.iter().enumerate() {
        let w = if config.weight_by_motion {
            1.0
        } else {
            1.0 / delta.norm()
        };
        a[(i, 0)] = w * delta.x;
        a[(i, 1)] = w * delta.y;
        b[i] = w * delta.dot(mid);
    }
    let ata = a.transpose() * &a;
    let cond = condition_2x2(ata[(0, 0)], ata[(0, 1)], ata[(1, 1)]);
    if !(cond <= config.max_condition_number) {
        return Err(CorError::DegenerateMotion(cond));
    }
    // Orthogonal factorization: A = QR, then R c = Q^T b.
    let qr = a.qr();
    let rhs = qr.q().transpose() * &b;
    let r = qr.r();
    let y = rhs[1] / r[(1, 1)];
    let x = (rhs[0] - r[(0, 1)] * y) / r[(0, 0)];
    let cor = Vector2::new(x, y);
    let sq: f64 = rows
        .iter()
        .map(|(delta, mid)| {
            let d = (cor - mid).dot(delta) / delta.norm();
            d * d
        })
        .sum();
    Ok(CorFit {
        cor,
        residual: (sq / n as f64).sqrt(),
        rows: n,
    })
}

/// Weighted perpendicularity residual `sum [(c - xm) . (m0 - mt)]^2` over the
/// rows used by [`estimate_cor`]; exposed for independent checks.
pub fn perpendicularity_cost(vectors: &MotionVectorSet, cor: &Vector2<f64>, config: &PipelineConfig) -> f64 {
    moving_rows(vectors, config)
        .map(|m| {
            let delta = m.m0 - m.mt;
            let mid = 0.5 * (m.m0 + m.mt);
            let w = if config.weight_by_motion { 1.0 } else { 1.0 / delta.norm() };
            let r = w * (cor - mid).dot(&delta);
            r * r
        })
        .sum()
}

/// Median over markers of the angle between `cor -> m0` and `cor -> mt`.
pub fn rotation_angle(
    vectors: &MotionVectorSet,
    cor: &Vector2<f64>,
    config: &PipelineConfig,
) -> Result<f64, CorError> {
    let angles: Vec<f64> = vectors
        .markers
        .iter()
        .filter(|m| {
            (m.m0 - cor).norm() >= config.min_cor_distance_px
                && (m.mt - cor).norm() >= config.min_cor_distance_px
        })
        .map(|m| angle_between_deg(&(m.m0 - cor), &(m.mt - cor)))
        .collect();
    stats::median(&angles).ok_or(CorError::NoUsableMarkers)
}

/// Minimum share of markers that must cast a vote for a decision.
const VOTE_QUORUM: f64 = 0.5;

/// Majority vote over the moment `(m0 - c) x (mt - m0)` of each marker.
/// With `y` pointing down a positive moment is a clockwise turn on screen.
/// Markers whose motion around `c` stays under the noise floor abstain.
/// Returns `(orientation, votes_cw, votes_ccw)`.
pub fn orientation_vote(
    vectors: &MotionVectorSet,
    cor: &Vector2<f64>,
    config: &PipelineConfig,
) -> (Orientation, usize, usize) {
    let (mut cw, mut ccw) = (0usize, 0usize);
    for m in &vectors.markers {
        let arm = m.m0 - cor;
        let r = arm.norm();
        if r < config.min_cor_distance_px {
            continue;
        }
        let moment = cross(&arm, &(m.mt - m.m0));
        if moment.abs() / r < config.noise_floor_px {
            continue;
        }
        if moment > 0.0 {
            cw += 1;
        } else {
            ccw += 1;
        }
    }
    let (hi, lo) = (cw.max(ccw) as f64, cw.min(ccw) as f64);
    let quorum = (cw + ccw) as f64 >= VOTE_QUORUM * vectors.len() as f64;
    let decisive = quorum && hi > 0.0 && hi >= config.vote_dominance_ratio * lo;
    let orientation = if !decisive {
        Orientation::Ambiguous
    } else if cw > ccw {
        Orientation::Cw
    } else {
        Orientation::Ccw
    };
    (orientation, cw, ccw)
}

/// Full per-frame estimate: COR, angle and orientation.
pub fn estimate_rotation(vectors: &MotionVectorSet, config: &PipelineConfig) -> Result<RotationEstimate, CorError> {
    let fit = estimate_cor(vectors, config)?;
    let angle_deg = rotation_angle(vectors, &fit.cor, config)?;
    let (orientation, votes_cw, votes_ccw) = orientation_vote(vectors, &fit.cor, config);
    Ok(RotationEstimate {
        cor: fit.cor,
        angle_deg,
        orientation,
        signed_angle_deg: orientation.sign() * angle_deg,
        votes_cw,
        votes_ccw,
        residual: fit.residual,
        n_markers: vectors.len(),
    })
}

/// Rotational failure needs a decisive orientation and an angle above the
/// stability threshold; an ambiguous vote vetoes the angle.
pub fn assess_stability(estimate: &RotationEstimate, config: &PipelineConfig) -> StabilityVerdict {
    verdict_for(estimate.orientation, estimate.angle_deg, config)
}

pub fn verdict_for(orientation: Orientation, angle_deg: f64, config: &PipelineConfig) -> StabilityVerdict {
    let failed = orientation != Orientation::Ambiguous && angle_deg > config.stability_angle_deg;
    StabilityVerdict {
        stability: if failed {
            Stability::RotationalFailure
        } else {
            Stability::StableGrasp
        },
        measured_angle_deg: angle_deg,
    }
}
