//! Rotation-onset detection and translation screening from contact-marker
//! motion.
//!
//! For each contact marker three positions are kept: `m0` in the first
//! frame, `mc` at the stable-contact frame and `mt` in the current frame.
//! `d1 = mc - m0` is the motion caused by closing the grasp, `d2 = mt - m0`
//! the motion so far and `d_rel = mt - mc` the motion since contact settled.

use std::collections::BTreeSet;

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::data::MarkerFrame;
use crate::stats;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MotionError {
    #[error("no usable contact markers")]
    NoUsableMarkers,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerMotion {
    pub id: u32,
    pub m0: Vector2<f64>,
    pub mc: Vector2<f64>,
    pub mt: Vector2<f64>,
}

impl MarkerMotion {
    pub fn d1(&self) -> Vector2<f64> {
        self.mc - self.m0
    }

    pub fn d2(&self) -> Vector2<f64> {
        self.mt - self.m0
    }

    pub fn d_rel(&self) -> Vector2<f64> {
        self.mt - self.mc
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionVectorSet {
    pub markers: Vec<MarkerMotion>,
}

impl MotionVectorSet {
    /// Collects the markers in `ids` that are visible in all three frames.
    pub fn from_frames(
        first: &MarkerFrame,
        stable: &MarkerFrame,
        current: &MarkerFrame,
        ids: &BTreeSet<u32>,
    ) -> Self {
        let markers = ids
            .iter()
            .filter_map(|&id| {
                let a = first.marker(id).filter(|m| m.visible)?;
                let b = stable.marker(id).filter(|m| m.visible)?;
                let c = current.marker(id).filter(|m| m.visible)?;
                Some(MarkerMotion {
                    id,
                    m0: a.pos(),
                    mc: b.pos(),
                    mt: c.pos(),
                })
            })
            .collect();
        MotionVectorSet { markers }
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionClass {
    Stable,
    Translation,
    RotationOnset,
    SmallAreaRotation,
}

impl MotionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionClass::Stable => "stable",
            MotionClass::Translation => "translation",
            MotionClass::RotationOnset => "rotation",
            MotionClass::SmallAreaRotation => "small_area",
        }
    }
}

/// Unsigned angle between two vectors, in degrees.
pub fn angle_between_deg(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let cross = a.x * b.y - a.y * b.x;
    cross.abs().atan2(a.dot(b)).to_degrees()
}

/// Median angle between `d1` and `d2` over markers whose closing motion is
/// long enough to define a direction, and median `|d_rel|` over all markers.
pub fn onset_statistics(
    vectors: &MotionVectorSet,
    config: &PipelineConfig,
) -> Result<(Option<f64>, f64), MotionError> {
    if vectors.is_empty() {
        return Err(MotionError::NoUsableMarkers);
    }
    let angles: Vec<f64> = vectors
        .markers
        .iter()
        .filter(|m| m.d1().norm() >= config.noise_floor_px && m.d2().norm() > 0.0)
        .map(|m| angle_between_deg(&m.d1(), &m.d2()))
        .collect();
    let mags: Vec<f64> = vectors.markers.iter().map(|m| m.d_rel().norm()).collect();
    Ok((stats::median(&angles), stats::median(&mags).unwrap_or(0.0)))
}

/// True when the median direction change or the median motion since contact
/// exceeds its threshold.
pub fn detect_onset(vectors: &MotionVectorSet, config: &PipelineConfig) -> Result<bool, MotionError> {
    let (angle, magnitude) = onset_statistics(vectors, config)?;
    Ok(angle.is_some_and(|a| a > config.onset_angle_threshold_deg)
        || magnitude > config.onset_motion_threshold_px)
}

/// Singular values (descending) of the `n x 2` matrix whose rows are the
/// given vectors.
pub fn singular_values(rows: &[Vector2<f64>]) -> (f64, f64) {
    let gram: Matrix2<f64> = rows.iter().map(|r| r * r.transpose()).sum();
    // closed form for a symmetric 2x2
    let (a, b, d) = (gram[(0, 0)], gram[(0, 1)], gram[(1, 1)]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let l1 = mid + rad;
    let l2 = (mid - rad).max(0.0);
    (l1.sqrt(), l2.sqrt())
}

/// Dominance of the largest singular value of the motions since contact;
/// `+inf` when the motions are exactly collinear, `None` when fewer than two
/// markers moved beyond the noise floor.
pub fn translation_ratio(vectors: &MotionVectorSet, config: &PipelineConfig) -> Option<f64> {
    let rows: Vec<Vector2<f64>> = vectors
        .markers
        .iter()
        .map(|m| m.d_rel())
        .filter(|d| d.norm() > config.noise_floor_px)
        .collect();
    if rows.len() < 2 {
        return None;
    }
    let (s1, s2) = singular_values(&rows);
    Some(if s2 <= s1 * 1e-12 { f64::INFINITY } else { s1 / s2 })
}

/// One dominant motion direction means the object slides instead of
/// turning.
pub fn classify_translation(vectors: &MotionVectorSet, config: &PipelineConfig) -> bool {
    translation_ratio(vectors, config).is_some_and(|r| r > config.svd_translation_ratio)
}

/// Per-frame class. Translation is checked first, then rotation onset; a
/// small contact area hands any motion above the noise floor to the contour
/// tracker.
pub fn classify_frame(vectors: &MotionVectorSet, config: &PipelineConfig, small_area: bool) -> MotionClass {
    if small_area {
        let mags: Vec<f64> = vectors.markers.iter().map(|m| m.d_rel().norm()).collect();
        return match stats::median(&mags) {
            Some(m) if m > config.noise_floor_px => MotionClass::SmallAreaRotation,
            _ => MotionClass::Stable,
        };
    }
    if classify_translation(vectors, config) {
        return MotionClass::Translation;
    }
    match detect_onset(vectors, config) {
        Ok(true) => MotionClass::RotationOnset,
        _ => MotionClass::Stable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    /// 5x5 grid about the origin, closing motion pushes markers outward.
    fn field(relative: impl Fn(Vector2<f64>) -> Vector2<f64>) -> MotionVectorSet {
        let mut markers = Vec::new();
        for j in -2..=2 {
            for i in -2..=2 {
                let m0 = v(30.0 * i as f64, 30.0 * j as f64);
                let mc = m0 * 1.05;
                markers.push(MarkerMotion {
                    id: markers.len() as u32,
                    m0,
                    mc,
                    mt: mc + relative(mc),
                });
            }
        }
        MotionVectorSet { markers }
    }

    #[test]
    fn no_motion_since_contact_is_not_onset() {
        let cfg = PipelineConfig::default();
        let f = field(|_| v(0.0, 0.0));
        assert_eq!(detect_onset(&f, &cfg), Ok(false));
        assert_eq!(classify_frame(&f, &cfg, false), MotionClass::Stable);
    }

    #[test]
    fn rotated_d2_triggers_onset() {
        let cfg = PipelineConfig::default();
        let rot = Rotation2::new(25f64.to_radians());
        let markers = (0..10)
            .map(|i| {
                let d1 = v(1.0 + i as f64, 0.5 * i as f64);
                let m0 = v(10.0 * i as f64, 5.0);
                MarkerMotion {
                    id: i,
                    m0,
                    mc: m0 + d1,
                    mt: m0 + rot * d1,
                }
            })
            .collect();
        let f = MotionVectorSet { markers };
        let (angle, _) = onset_statistics(&f, &cfg).unwrap();
        assert!((angle.unwrap() - 25.0).abs() < 1e-9);
        assert_eq!(detect_onset(&f, &cfg), Ok(true));
    }

    #[test]
    fn empty_set_signals_handoff() {
        let cfg = PipelineConfig::default();
        assert_eq!(
            detect_onset(&MotionVectorSet::default(), &cfg),
            Err(MotionError::NoUsableMarkers)
        );
    }

    #[test]
    fn uniform_motion_is_translation() {
        let cfg = PipelineConfig::default();
        let f = field(|_| v(2.0, 0.0));
        assert_eq!(translation_ratio(&f, &cfg), Some(f64::INFINITY));
        assert!(classify_translation(&f, &cfg));
    }

    #[test]
    fn rotation_about_centroid_is_not_translation() {
        let cfg = PipelineConfig::default();
        let rot = Rotation2::new(3f64.to_radians());
        let f = field(|p| rot * p - p);
        let r = translation_ratio(&f, &cfg).unwrap();
        assert!((r - 1.0).abs() < 1e-9, "ratio {r}");
        assert!(!classify_translation(&f, &cfg));
    }

    #[test]
    fn translation_wins_over_onset() {
        let cfg = PipelineConfig::default();
        // 4 px of coherent sliding trips the onset magnitude test as well
        let f = field(|_| v(4.0, 1.0));
        assert_eq!(detect_onset(&f, &cfg), Ok(true));
        assert_eq!(classify_frame(&f, &cfg, false), MotionClass::Translation);
    }

    #[test]
    fn small_area_hands_off_any_motion() {
        let cfg = PipelineConfig::default();
        let rot = Rotation2::new(10f64.to_radians());
        let f = field(|p| rot * p - p);
        assert_eq!(classify_frame(&f, &cfg, true), MotionClass::SmallAreaRotation);
        assert_eq!(classify_frame(&field(|_| v(0.0, 0.0)), &cfg, true), MotionClass::Stable);
        assert_eq!(classify_frame(&MotionVectorSet::default(), &cfg, true), MotionClass::Stable);
    }

    #[test]
    fn noisy_translation_monte_carlo() {
        // Frozen from a seeded run: 1.5, 0.5 px/frame sliding with 0.2 px
        // position noise is flagged at ratio threshold 4.
        let cfg = PipelineConfig::default();
        let noise = Normal::new(0.0, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for _ in 0..1000 {
            let mut markers = Vec::new();
            for j in 0..6 {
                for i in 0..8 {
                    let m0 = v(180.0 + 40.0 * i as f64, 140.0 + 40.0 * j as f64);
                    let mut jitter = || v(noise.sample(&mut rng), noise.sample(&mut rng));
                    let mc = m0 + jitter();
                    let mt = m0 + v(1.5, 0.5) + jitter();
                    markers.push(MarkerMotion { id: markers.len() as u32, m0, mc, mt });
                }
            }
            if classify_translation(&MotionVectorSet { markers }, &cfg) {
                hits += 1;
            }
        }
        assert!(hits >= 950, "{hits} / 1000");
    }
}
