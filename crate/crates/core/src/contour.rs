//! Rotation of small contact patches from the principal axis of the contact
//! contour.

use nalgebra::Vector2;
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::data::IntensityFrame;
use crate::image::{self, Mask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("frame sizes differ")]
    DimensionMismatch,
    #[error("no contact component above the minimum area")]
    NoContact,
    #[error("contour is too round to define an axis (eccentricity {0:.3})")]
    AxisUndefined(f64),
    #[error("need at least 2 frames with a defined axis, found {0}")]
    InsufficientFrames(usize),
    #[error("axis undefined on {undefined} of {total} frames")]
    TrackingLost { undefined: usize, total: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactContour {
    pub pixels: Mask,
    pub area: usize,
    pub centroid: Vector2<f64>,
    /// Principal-axis direction in `[0, 180)`, clockwise-positive on screen;
    /// `None` when the contour is too round.
    pub axis_angle_deg: Option<f64>,
    /// Ratio of the principal standard deviations, `>= 1`.
    pub eccentricity: f64,
}

impl ContactContour {
    pub fn axis_deg(&self) -> Result<f64, ContourError> {
        self.axis_angle_deg
            .ok_or(ContourError::AxisUndefined(self.eccentricity))
    }
}

/// Centroid, axis angle in `[0, 180)` and eccentricity of a pixel set, from
/// its second-order central moments.
pub fn mask_moments(mask: &Mask) -> Option<(Vector2<f64>, f64, f64)> {
    let mut n = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in mask.pixels() {
        n += 1.0;
        sx += x as f64;
        sy += y as f64;
    }
    if n == 0.0 {
        return None;
    }
    let (cx, cy) = (sx / n, sy / n);
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for (x, y) in mask.pixels() {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        mu20 += dx * dx;
        mu02 += dy * dy;
        mu11 += dx * dy;
    }
    let axis = (0.5 * (2.0 * mu11).atan2(mu20 - mu02)).to_degrees().rem_euclid(180.0);
    let mid = 0.5 * (mu20 + mu02);
    let rad = (0.25 * (mu20 - mu02).powi(2) + mu11 * mu11).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    let ecc = if l2 <= 0.0 { f64::INFINITY } else { (l1 / l2).sqrt() };
    Some((Vector2::new(cx, cy), axis, ecc))
}

/// Contour of the main contact blob: the HSV value channel of `frame` is
/// differenced against the pre-contact `reference`, smoothed with a 5x5 box
/// filter, thresholded, and reduced to its largest connected component.
pub fn extract_contour(
    frame: &IntensityFrame,
    reference: &IntensityFrame,
    config: &PipelineConfig,
) -> Result<ContactContour, ContourError> {
    if frame.width() != reference.width() || frame.height() != reference.height() {
        return Err(ContourError::DimensionMismatch);
    }
    let (w, h) = (frame.width(), frame.height());
    let diff: Vec<u8> = frame
        .value_channel()
        .iter()
        .zip(reference.value_channel())
        .map(|(&a, b)| a.abs_diff(b))
        .collect();
    let raw = image::box_threshold(&diff, w, h, 2, config.contour_intensity_threshold);
    let blob = image::largest_component(&raw);
    contour_from_mask(blob, config)
}

pub fn contour_from_mask(pixels: Mask, config: &PipelineConfig) -> Result<ContactContour, ContourError> {
    let area = pixels.count();
    if area < config.contour_min_area_px {
        return Err(ContourError::NoContact);
    }
    let (centroid, axis, eccentricity) = mask_moments(&pixels).ok_or(ContourError::NoContact)?;
    Ok(ContactContour {
        pixels,
        area,
        centroid,
        axis_angle_deg: (eccentricity >= config.min_eccentricity).then_some(axis),
        eccentricity,
    })
}

/// Wraps an axis difference into `(-90, 90]`.
fn wrap_axis_step(step: f64) -> f64 {
    let s = step.rem_euclid(180.0);
    if s > 90.0 {
        s - 180.0
    } else {
        s
    }
}

/// Incremental axis unwrapping relative to the first defined axis.
#[derive(Debug, Clone, Default)]
pub struct AxisTracker {
    last_axis: Option<f64>,
    accumulated: f64,
}

impl AxisTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one frame's axis; returns the signed rotation since the first
    /// defined axis, or `None` for frames without an axis.
    pub fn push(&mut self, axis_deg: Option<f64>) -> Option<f64> {
        let axis = axis_deg?;
        if let Some(last) = self.last_axis {
            self.accumulated += wrap_axis_step(axis - last);
        }
        self.last_axis = Some(axis);
        Some(self.accumulated)
    }

    pub fn started(&self) -> bool {
        self.last_axis.is_some()
    }
}

/// Signed rotation per frame relative to the first frame's axis. The 180°
/// ambiguity of an axis is resolved by taking the smallest step between
/// consecutive defined axes, which assumes less than 90° of turn per frame.
pub fn contour_rotation(axes: &[Option<f64>]) -> Result<Vec<Option<f64>>, ContourError> {
    let defined = axes.iter().filter(|a| a.is_some()).count();
    let undefined = axes.len() - defined;
    if 2 * undefined > axes.len() {
        return Err(ContourError::TrackingLost {
            undefined,
            total: axes.len(),
        });
    }
    if defined < 2 {
        return Err(ContourError::InsufficientFrames(defined));
    }
    let mut tracker = AxisTracker::new();
    Ok(axes.iter().map(|&a| tracker.push(a)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn ellipse_mask(w: usize, h: usize, c: (f64, f64), a: f64, b: f64, deg: f64) -> Mask {
        let (s, co) = deg.to_radians().sin_cos();
        Mask::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 - c.0, y as f64 - c.1);
            let u = dx * co + dy * s;
            let v = -dx * s + dy * co;
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        })
    }

    fn render(mask: &Mask, base: u8, lift: u8) -> IntensityFrame {
        let mut f = IntensityFrame::filled(mask.width(), mask.height(), [base, base / 2, base / 3]);
        for (x, y) in mask.pixels() {
            let i = y * mask.width() + x;
            f.plane_mut(0)[i] = base + lift;
        }
        f
    }

    #[test]
    fn ellipse_axis_at_thirty_degrees() {
        let cfg = PipelineConfig::default();
        let m = ellipse_mask(200, 160, (100.3, 80.6), 45.0, 15.0, 30.0);
        let reference = render(&Mask::empty(200, 160), 90, 0);
        let frame = render(&m, 90, 60);
        let c = extract_contour(&frame, &reference, &cfg).unwrap();
        assert_abs_diff_eq!(c.axis_deg().unwrap(), 30.0, epsilon = 0.5);
        assert_abs_diff_eq!(c.centroid.x, 100.3, epsilon = 0.5);
        assert!(c.eccentricity > 2.5);
    }

    #[test]
    fn circle_has_no_axis() {
        let cfg = PipelineConfig::default();
        let m = ellipse_mask(120, 120, (60.0, 60.0), 25.0, 25.0, 0.0);
        let c = extract_contour(&render(&m, 90, 60), &render(&Mask::empty(120, 120), 90, 0), &cfg).unwrap();
        assert!(matches!(c.axis_deg(), Err(ContourError::AxisUndefined(_))));
    }

    #[test]
    fn identical_frames_have_no_contact() {
        let cfg = PipelineConfig::default();
        let f = render(&Mask::empty(64, 64), 90, 0);
        assert_eq!(extract_contour(&f, &f, &cfg), Err(ContourError::NoContact));
    }

    #[test]
    fn brightness_offset_does_not_move_the_axis() {
        let cfg = PipelineConfig::default();
        let m = ellipse_mask(160, 120, (80.0, 60.0), 40.0, 12.0, 112.0);
        let a = extract_contour(&render(&m, 90, 60), &render(&Mask::empty(160, 120), 90, 0), &cfg).unwrap();
        let b = extract_contour(&render(&m, 120, 60), &render(&Mask::empty(160, 120), 120, 0), &cfg).unwrap();
        assert_eq!(a.axis_angle_deg, b.axis_angle_deg);
    }

    #[test]
    fn direct_differences() {
        let out = contour_rotation(&[Some(30.0), Some(35.0), Some(41.0)]).unwrap();
        let out: Vec<f64> = out.into_iter().map(Option::unwrap).collect();
        assert_abs_diff_eq!(out[0], 0.0);
        assert_abs_diff_eq!(out[1], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2], 11.0, epsilon = 1e-12);
    }

    #[test]
    fn wraps_through_180() {
        let out = contour_rotation(&[Some(178.0), Some(2.0)]).unwrap();
        assert_abs_diff_eq!(out[1].unwrap(), 4.0, epsilon = 1e-12);
        let out = contour_rotation(&[Some(2.0), Some(178.0)]).unwrap();
        assert_abs_diff_eq!(out[1].unwrap(), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn tracking_lost_when_mostly_undefined() {
        assert_eq!(
            contour_rotation(&[Some(10.0), None, None]),
            Err(ContourError::TrackingLost {
                undefined: 2,
                total: 3
            })
        );
        assert_eq!(contour_rotation(&[Some(10.0)]), Err(ContourError::InsufficientFrames(1)));
        let out = contour_rotation(&[Some(10.0), None, Some(14.0)]).unwrap();
        assert_eq!(out[1], None);
        assert_abs_diff_eq!(out[2].unwrap(), 4.0, epsilon = 1e-12);
    }
}
