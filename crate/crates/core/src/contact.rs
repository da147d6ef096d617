//! Stable-contact detection and the contact / non-contact marker split.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::data::{IntensityFrame, MarkerFrame};
use crate::image::{self, Mask};
use crate::stats;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContactError {
    #[error("frame sizes differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactKind {
    None,
    SoftStable,
    HardStable,
}

/// Kind of stable contact and the sequence position where it was declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StableContact {
    pub kind: ContactKind,
    /// Position in the frame sequence (0-based), `None` while unsettled.
    pub position: Option<usize>,
}

impl StableContact {
    pub const NONE: StableContact = StableContact {
        kind: ContactKind::None,
        position: None,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactState {
    pub kind: ContactKind,
    pub stable_frame_index: u64,
    /// `None` when contact markers came from the marker-only fallback.
    pub contact_mask: Option<Mask>,
    pub contact_marker_ids: BTreeSet<u32>,
    pub non_contact_ids: BTreeSet<u32>,
    /// Too few contact markers to fit a rotation; hand over to the contour
    /// tracker.
    pub small_area: bool,
}

impl ContactState {
    pub fn none() -> Self {
        ContactState {
            kind: ContactKind::None,
            stable_frame_index: 0,
            contact_mask: None,
            contact_marker_ids: BTreeSet::new(),
            non_contact_ids: BTreeSet::new(),
            small_area: false,
        }
    }
}

fn mean_sq_motion(a: &MarkerFrame, b: &MarkerFrame, keep: &[u32]) -> f64 {
    let d: Vec<f64> = keep
        .iter()
        .filter_map(|&id| Some((a.marker(id)?.pos() - b.marker(id)?.pos()).norm_squared()))
        .collect();
    stats::mean(&d).unwrap_or(0.0)
}

/// Residual marker speed (px/frame) at position `f`, from markers visible
/// in frames `f-2..=f`. With `a = p_f - p_{f-2}` and `b = p_f - p_{f-1}`,
/// independent tracking noise adds the same variance to `|a|^2` and `|b|^2`
/// while steady motion of `v` px/frame gives `4v^2` and `v^2`, so
/// `sqrt((mean|a|^2 - mean|b|^2) / 3)` estimates the RMS speed without a
/// noise bias.
pub fn settling_statistic(frames: &[MarkerFrame], f: usize) -> Option<f64> {
    if f < 2 || f >= frames.len() {
        return None;
    }
    let (cur, prev, prev2) = (&frames[f], &frames[f - 1], &frames[f - 2]);
    let keep: Vec<u32> = cur
        .visible()
        .filter(|m| {
            prev.marker(m.id).is_some_and(|p| p.visible)
                && prev2.marker(m.id).is_some_and(|p| p.visible)
        })
        .map(|m| m.id)
        .collect();
    if keep.is_empty() {
        return None;
    }
    let excess = mean_sq_motion(cur, prev2, &keep) - mean_sq_motion(cur, prev, &keep);
    Some((excess.max(0.0) / 3.0).sqrt())
}

/// Finds the first settled frame. Soft stability needs
/// `soft_stable_window` frames of history; at `hard_stable_frame` the
/// contact is declared stable regardless. Shorter prefixes return `None`,
/// and a longer prefix never changes an earlier answer.
pub fn detect_stable_contact(frames: &[MarkerFrame], config: &PipelineConfig) -> StableContact {
    let start = config.soft_stable_window.max(2);
    let last = config.hard_stable_frame.min(frames.len().saturating_sub(1));
    for f in start..=last {
        if f >= frames.len() {
            break;
        }
        if let Some(s) = settling_statistic(frames, f) {
            if s < config.soft_stable_threshold_px {
                return StableContact {
                    kind: ContactKind::SoftStable,
                    position: Some(f),
                };
            }
        }
    }
    if frames.len() > config.hard_stable_frame {
        StableContact {
            kind: ContactKind::HardStable,
            position: Some(config.hard_stable_frame),
        }
    } else {
        StableContact::NONE
    }
}

/// Contact region from the illumination change between a pre-contact frame
/// and the stable-contact frame: max-over-channels absolute difference,
/// threshold, 3x3 open/close, largest connected component.
pub fn contact_region(
    before: &IntensityFrame,
    at_stable: &IntensityFrame,
    config: &PipelineConfig,
) -> Result<Mask, ContactError> {
    if before.width() != at_stable.width() || before.height() != at_stable.height() {
        return Err(ContactError::DimensionMismatch(
            before.width(),
            before.height(),
            at_stable.width(),
            at_stable.height(),
        ));
    }
    let (w, h) = (before.width(), before.height());
    let diff = image::max_channel_difference(before, at_stable);
    let raw = image::threshold(&diff, w, h, config.contact_intensity_threshold);
    Ok(image::largest_component(&image::open_close(&raw)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerPartition {
    pub contact: BTreeSet<u32>,
    pub non_contact: BTreeSet<u32>,
    pub small_area: bool,
}

/// Splits markers by whether their stable-frame position lies in the mask.
/// Invisible markers are never contact markers.
pub fn partition_markers(stable: &MarkerFrame, mask: &Mask, config: &PipelineConfig) -> MarkerPartition {
    let (contact, non_contact) = stable
        .markers
        .iter()
        .partition::<Vec<&crate::data::Marker>, _>(|m| m.visible && mask.contains_point(m.x, m.y));
    let contact: BTreeSet<u32> = contact.iter().map(|m| m.id).collect();
    MarkerPartition {
        small_area: mask.is_empty() || contact.len() < config.min_contact_markers,
        non_contact: non_contact.iter().map(|m| m.id).collect(),
        contact,
    }
}

/// Marker-only fallback: markers whose displacement from the first frame to
/// the stable frame exceeds the configured percentile are contact markers.
pub fn partition_by_displacement(
    first: &MarkerFrame,
    stable: &MarkerFrame,
    config: &PipelineConfig,
) -> MarkerPartition {
    let disp: Vec<(u32, f64)> = stable
        .visible()
        .filter_map(|m| {
            let m0 = first.marker(m.id).filter(|m0| m0.visible)?;
            Some((m.id, (m.pos() - m0.pos()).norm()))
        })
        .collect();
    let values: Vec<f64> = disp.iter().map(|d| d.1).collect();
    let cut = stats::percentile(&values, config.fallback_displacement_percentile).unwrap_or(0.0);
    let contact: BTreeSet<u32> = disp.iter().filter(|d| d.1 > cut).map(|d| d.0).collect();
    let non_contact = stable
        .markers
        .iter()
        .map(|m| m.id)
        .filter(|id| !contact.contains(id))
        .collect();
    MarkerPartition {
        small_area: contact.len() < config.min_contact_markers,
        contact,
        non_contact,
    }
}

/// Assembles the full contact state for a settled sequence prefix.
/// `images` supplies the pre-contact and stable-frame images when available.
pub fn establish_contact(
    frames: &[MarkerFrame],
    stable: StableContact,
    images: Option<(&IntensityFrame, &IntensityFrame)>,
    config: &PipelineConfig,
) -> Result<ContactState, ContactError> {
    let Some(pos) = stable.position else {
        return Ok(ContactState::none());
    };
    let stable_frame = &frames[pos];
    let (mask, partition) = match images {
        Some((before, at_stable)) => {
            let mask = contact_region(before, at_stable, config)?;
            let p = partition_markers(stable_frame, &mask, config);
            (Some(mask), p)
        }
        None => (None, partition_by_displacement(&frames[0], stable_frame, config)),
    };
    Ok(ContactState {
        kind: stable.kind,
        stable_frame_index: stable_frame.frame_index,
        contact_mask: mask,
        contact_marker_ids: partition.contact,
        non_contact_ids: partition.non_contact,
        small_area: partition.small_area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Marker;

    fn grid_frame(index: u64, offset: impl Fn(u32, f64, f64) -> (f64, f64)) -> MarkerFrame {
        let mut markers = Vec::new();
        for j in 0..6 {
            for i in 0..8 {
                let id = j * 8 + i;
                let (x, y) = (20.0 + 40.0 * i as f64, 20.0 + 40.0 * j as f64);
                let (dx, dy) = offset(id, x, y);
                markers.push(Marker::new(id, x + dx, y + dy));
            }
        }
        MarkerFrame {
            frame_index: index,
            time_s: index as f64 / 30.0,
            markers,
        }
    }

    #[test]
    fn frozen_markers_settle_at_the_window() {
        let frames: Vec<_> = (0..40).map(|f| grid_frame(f, |_, _, _| (0.0, 0.0))).collect();
        let cfg = PipelineConfig::default();
        let s = detect_stable_contact(&frames, &cfg);
        assert_eq!(s.kind, ContactKind::SoftStable);
        assert_eq!(s.position, Some(10));
        assert_eq!(detect_stable_contact(&frames[..10], &cfg), StableContact::NONE);
    }

    #[test]
    fn growing_displacement_falls_back_to_hard_stable() {
        let frames: Vec<_> = (0..45)
            .map(|f| {
                let d = 0.02 * (f * f) as f64;
                grid_frame(f, move |_, _, _| (d, 0.5 * d))
            })
            .collect();
        let cfg = PipelineConfig::default();
        let s = detect_stable_contact(&frames, &cfg);
        assert_eq!(s.kind, ContactKind::HardStable);
        assert_eq!(s.position, Some(30));
        // not enough frames for either criterion
        assert_eq!(detect_stable_contact(&frames[..30], &cfg), StableContact::NONE);
    }

    #[test]
    fn constant_speed_closure_is_not_settled() {
        // Markers moving at a steady 0.3 px/frame until frame 18, then still.
        let frames: Vec<_> = (0..40)
            .map(|f| {
                let d = 0.3 * (f.min(18)) as f64;
                grid_frame(f, move |_, _, _| (d, 0.0))
            })
            .collect();
        let s = detect_stable_contact(&frames, &PipelineConfig::default());
        assert_eq!(s.kind, ContactKind::SoftStable);
        assert_eq!(s.position, Some(20));
    }

    #[test]
    fn slow_closure_under_noise_is_not_settled() {
        // 0.15 px/frame, comparable to the 0.1 px tracking noise
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let noise = Normal::new(0.0, 0.1).unwrap();
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<_> = (0..40)
                .map(|f| {
                    let d = 0.15 * (f.min(18)) as f64;
                    let jitter: Vec<(f64, f64)> =
                        (0..48).map(|_| (noise.sample(&mut rng), noise.sample(&mut rng))).collect();
                    grid_frame(f, move |id, _, _| {
                        let (nx, ny) = jitter[id as usize];
                        (d + nx, ny)
                    })
                })
                .collect();
            let s = detect_stable_contact(&frames, &PipelineConfig::default());
            let pos = s.position.unwrap();
            assert!((18..=22).contains(&pos), "seed {seed}: settled at {pos}");
        }
    }

    #[test]
    fn prefix_monotone() {
        let frames: Vec<_> = (0..40)
            .map(|f| {
                let d = 0.3 * (f.min(14)) as f64;
                grid_frame(f, move |_, _, _| (d, 0.0))
            })
            .collect();
        let cfg = PipelineConfig::default();
        let full = detect_stable_contact(&frames, &cfg);
        let settled = full.position.unwrap();
        for n in settled + 1..=frames.len() {
            assert_eq!(detect_stable_contact(&frames[..n], &cfg), full);
        }
        for n in 0..=settled {
            assert_eq!(detect_stable_contact(&frames[..n], &cfg), StableContact::NONE);
        }
    }

    #[test]
    fn identical_frames_have_no_contact_region() {
        let f = IntensityFrame::filled(32, 24, [90, 100, 110]);
        let m = contact_region(&f, &f, &PipelineConfig::default()).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = IntensityFrame::filled(32, 24, [0; 3]);
        let b = IntensityFrame::filled(24, 32, [0; 3]);
        assert!(matches!(
            contact_region(&a, &b, &PipelineConfig::default()),
            Err(ContactError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn disk_of_brightening_is_recovered() {
        let (w, h) = (120usize, 100usize);
        let (cx, cy, r) = (60.5, 48.5, 20.0);
        let before = IntensityFrame::filled(w, h, [80, 90, 100]);
        let mut after = before.clone();
        let inside = |x: usize, y: usize| {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            dx * dx + dy * dy <= r * r
        };
        for y in 0..h {
            for x in 0..w {
                if inside(x, y) {
                    after.plane_mut(1)[y * w + x] += 60;
                }
            }
        }
        let mask = contact_region(&before, &after, &PipelineConfig::default()).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let d = (dx * dx + dy * dy).sqrt();
                if d < r - 1.0 {
                    assert!(mask.get(x, y), "interior pixel ({x},{y}) missing");
                } else if d > r + 1.0 {
                    assert!(!mask.get(x, y), "exterior pixel ({x},{y}) set");
                }
            }
        }
    }

    #[test]
    fn weak_difference_gives_empty_mask_and_small_area() {
        let cfg = PipelineConfig::default();
        let before = IntensityFrame::filled(64, 48, [80, 80, 80]);
        let after = IntensityFrame::filled(64, 48, [80 + cfg.contact_intensity_threshold - 1, 80, 80]);
        let mask = contact_region(&before, &after, &cfg).unwrap();
        assert!(mask.is_empty());
        let p = partition_markers(&grid_frame(0, |_, _, _| (0.0, 0.0)), &mask, &cfg);
        assert!(p.small_area && p.contact.is_empty());
        assert_eq!(p.non_contact.len(), 48);
    }

    #[test]
    fn partition_by_mask_geometry() {
        let cfg = PipelineConfig::default();
        let frame = grid_frame(0, |_, _, _| (0.0, 0.0));
        let all = Mask::from_fn(340, 260, |_, _| true);
        let p = partition_markers(&frame, &all, &cfg);
        assert_eq!(p.contact.len(), 48);
        assert!(p.non_contact.is_empty() && !p.small_area);

        let lower = Mask::from_fn(340, 260, |_, y| y >= 120);
        let p = partition_markers(&frame, &lower, &cfg);
        let expected: BTreeSet<u32> = frame.markers.iter().filter(|m| m.y >= 120.0).map(|m| m.id).collect();
        assert_eq!(p.contact, expected);
        assert_eq!(p.contact.len(), 24);
        assert!(p.contact.is_disjoint(&p.non_contact));
        assert_eq!(p.contact.len() + p.non_contact.len(), 48);
    }

    #[test]
    fn invisible_markers_are_non_contact() {
        let cfg = PipelineConfig::default();
        let mut frame = grid_frame(0, |_, _, _| (0.0, 0.0));
        frame.markers[3].visible = false;
        let all = Mask::from_fn(340, 260, |_, _| true);
        let p = partition_markers(&frame, &all, &cfg);
        assert!(p.non_contact.contains(&3) && !p.contact.contains(&3));
    }

    #[test]
    fn displacement_fallback_picks_the_moving_markers() {
        let cfg = PipelineConfig::default();
        let first = grid_frame(0, |_, _, _| (0.0, 0.0));
        // the left quarter of the grid moved, everything else stayed
        let stable = grid_frame(20, |id, _, _| if id % 8 < 2 { (3.0, 0.0) } else { (0.0, 0.0) });
        let p = partition_by_displacement(&first, &stable, &cfg);
        let expected: BTreeSet<u32> = (0..48).filter(|id| id % 8 < 2).collect();
        assert_eq!(p.contact, expected);
        assert!(!p.small_area);
    }
}
