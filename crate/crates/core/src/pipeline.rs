//! Frame-by-frame tracker that composes contact detection, motion
//! classification and the two rotation estimators.

use std::path::PathBuf;

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::contact::{self, ContactError, ContactState, StableContact};
use crate::contour::{self, AxisTracker};
use crate::cor::{self, Orientation, RotationEstimate, StabilityVerdict};
use crate::data::{self, DataError, IntensityFrame, MarkerFrame};
use crate::motion::{self, MotionClass, MotionVectorSet};

/// Supplies intensity images on demand. `pos` is the position in the
/// sequence, `frame_index` the recorded index.
pub trait ImageSource {
    fn image(&self, pos: usize, frame_index: u64) -> Result<Option<IntensityFrame>, DataError>;
}

/// Marker-only input.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoImages;

impl ImageSource for NoImages {
    fn image(&self, _pos: usize, _frame_index: u64) -> Result<Option<IntensityFrame>, DataError> {
        Ok(None)
    }
}

/// Images held in memory, one per sequence position.
#[derive(Debug, Clone, Default)]
pub struct FrameImages(pub Vec<IntensityFrame>);

impl ImageSource for FrameImages {
    fn image(&self, pos: usize, _frame_index: u64) -> Result<Option<IntensityFrame>, DataError> {
        Ok(self.0.get(pos).cloned())
    }
}

/// `frame_%06d.ppm` files in one directory; missing files yield `None`.
#[derive(Debug, Clone)]
pub struct PpmDirectory {
    pub dir: PathBuf,
}

impl ImageSource for PpmDirectory {
    fn image(&self, _pos: usize, frame_index: u64) -> Result<Option<IntensityFrame>, DataError> {
        let path = self.dir.join(data::ppm_file_name(frame_index));
        if !path.exists() {
            return Ok(None);
        }
        data::read_ppm(&path).map(Some)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Contact(#[from] ContactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClass {
    /// Before stable contact.
    Settling,
    Motion(MotionClass),
    /// Rotation measured from the contact contour.
    Contour,
}

impl FrameClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameClass::Settling => "settling",
            FrameClass::Motion(m) => m.as_str(),
            FrameClass::Contour => "contour",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub frame_index: u64,
    pub time_s: f64,
    pub class: FrameClass,
    /// Latest marker-mode estimate; carried over when this frame's fit
    /// failed.
    pub estimate: Option<RotationEstimate>,
    pub angle_deg: f64,
    /// Clockwise-positive; 0 while no decisive rotation is measured.
    pub signed_angle_deg: f64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone)]
struct ContourState {
    reference: IntensityFrame,
    axes: AxisTracker,
    angle: Option<f64>,
    defined: usize,
    undefined: usize,
}

/// Online tracker; feed frames in order with [`Tracker::push`].
#[derive(Debug, Clone)]
pub struct Tracker {
    config: PipelineConfig,
    frames: Vec<MarkerFrame>,
    first_image: Option<IntensityFrame>,
    stable: StableContact,
    contact: Option<ContactState>,
    contour: Option<ContourState>,
    onset: Option<usize>,
    last_estimate: Option<RotationEstimate>,
    peak_angle: f64,
    peak_orientation: Orientation,
}

impl Tracker {
    pub fn new(config: PipelineConfig) -> Self {
        Tracker {
            config,
            frames: Vec::new(),
            first_image: None,
            stable: StableContact::NONE,
            contact: None,
            contour: None,
            onset: None,
            last_estimate: None,
            peak_angle: 0.0,
            peak_orientation: Orientation::Ambiguous,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn stable_contact(&self) -> StableContact {
        self.stable
    }

    pub fn contact(&self) -> Option<&ContactState> {
        self.contact.as_ref()
    }

    /// Sequence position of the detected rotation onset.
    pub fn onset_position(&self) -> Option<usize> {
        self.onset
    }

    /// Verdict from the largest decisive rotation seen so far.
    pub fn verdict(&self) -> StabilityVerdict {
        cor::verdict_for(self.peak_orientation, self.peak_angle, &self.config)
    }

    pub fn peak_orientation(&self) -> Orientation {
        self.peak_orientation
    }

    /// Whether rotation is read from the contour instead of markers.
    pub fn contour_mode(&self) -> bool {
        self.contour.is_some()
    }

    pub fn push(&mut self, frame: MarkerFrame, images: &dyn ImageSource) -> Result<FrameReport, PipelineError> {
        let pos = self.frames.len();
        if pos == 0 {
            self.first_image = images.image(0, frame.frame_index)?;
        }
        let (frame_index, time_s) = (frame.frame_index, frame.time_s);
        self.frames.push(frame);
        let mut report = FrameReport {
            frame_index,
            time_s,
            class: FrameClass::Settling,
            estimate: None,
            angle_deg: 0.0,
            signed_angle_deg: 0.0,
            orientation: Orientation::Ambiguous,
        };
        if self.contact.is_none() {
            let stable = contact::detect_stable_contact(&self.frames, &self.config);
            if stable.position.is_none() {
                return Ok(report);
            }
            self.establish(stable, images)?;
        }
        let state = self.contact.as_ref().expect("contact established");
        let stable_pos = self.stable.position.expect("stable position");
        let vectors = MotionVectorSet::from_frames(
            &self.frames[0],
            &self.frames[stable_pos],
            &self.frames[pos],
            &state.contact_marker_ids,
        );
        let class = motion::classify_frame(&vectors, &self.config, state.small_area);
        report.class = FrameClass::Motion(class);
        if self.contour.is_some() {
            self.push_contour(pos, frame_index, class, images, &mut report)?;
            return Ok(report);
        }
        if self.onset.is_none() && class == MotionClass::RotationOnset {
            self.onset = Some(pos);
        }
        if self.onset.is_some() && class != MotionClass::Translation {
            if let Ok(est) = cor::estimate_rotation(&vectors, &self.config) {
                self.last_estimate = Some(est);
            }
        }
        if let Some(est) = self.last_estimate {
            report.estimate = Some(est);
            report.angle_deg = est.angle_deg;
            report.signed_angle_deg = est.signed_angle_deg;
            report.orientation = est.orientation;
            self.record_peak(est.orientation, est.angle_deg);
        }
        Ok(report)
    }

    fn record_peak(&mut self, orientation: Orientation, angle: f64) {
        if orientation != Orientation::Ambiguous && angle > self.peak_angle {
            self.peak_angle = angle;
            self.peak_orientation = orientation;
        }
    }

    fn establish(&mut self, stable: StableContact, images: &dyn ImageSource) -> Result<(), PipelineError> {
        let pos = stable.position.expect("stable position");
        self.stable = stable;
        let at_stable = match &self.first_image {
            Some(_) => images.image(pos, self.frames[pos].frame_index)?,
            None => None,
        };
        let pair = match (&self.first_image, &at_stable) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        let state = contact::establish_contact(&self.frames, stable, pair, &self.config)?;
        if state.small_area {
            if let (Some(reference), Some(img)) = (&self.first_image, &at_stable) {
                let mut axes = AxisTracker::new();
                let axis = contour::extract_contour(img, reference, &self.config)
                    .ok()
                    .and_then(|c| c.axis_angle_deg);
                axes.push(axis);
                self.contour = Some(ContourState {
                    reference: reference.clone(),
                    axes,
                    angle: axis.map(|_| 0.0),
                    defined: 0,
                    undefined: 0,
                });
            }
        }
        self.contact = Some(state);
        Ok(())
    }

    fn push_contour(
        &mut self,
        pos: usize,
        frame_index: u64,
        class: MotionClass,
        images: &dyn ImageSource,
        report: &mut FrameReport,
    ) -> Result<(), PipelineError> {
        let onset_deg = self.config.contour_onset_deg;
        let cs = self.contour.as_mut().expect("contour mode");
        let axis = match images.image(pos, frame_index)? {
            Some(img) => contour::extract_contour(&img, &cs.reference, &self.config)
                .ok()
                .and_then(|c| c.axis_angle_deg),
            None => None,
        };
        if axis.is_some() {
            cs.defined += 1;
        } else {
            cs.undefined += 1;
        }
        if let Some(a) = cs.axes.push(axis) {
            cs.angle = Some(a);
        }
        let angle = cs.angle.unwrap_or(0.0);
        // tracking is lost once most frames since contact lack an axis
        let lost = 2 * cs.undefined > cs.defined + cs.undefined;
        if self.onset.is_none() && (class == MotionClass::SmallAreaRotation || angle.abs() >= onset_deg) {
            self.onset = Some(pos);
        }
        if lost || self.onset.is_none() {
            return Ok(());
        }
        report.class = FrameClass::Contour;
        report.angle_deg = angle.abs();
        report.signed_angle_deg = angle;
        report.orientation = Orientation::from_signed_angle(angle);
        self.record_peak(report.orientation, angle.abs());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub reports: Vec<FrameReport>,
    pub stable: StableContact,
    pub contact: Option<ContactState>,
    pub onset_position: Option<usize>,
    pub verdict: StabilityVerdict,
    pub orientation: Orientation,
    pub contour_mode: bool,
}

/// Runs the tracker over a whole sequence.
pub fn run_sequence(
    frames: &[MarkerFrame],
    images: &dyn ImageSource,
    config: &PipelineConfig,
) -> Result<SequenceResult, PipelineError> {
    let mut tracker = Tracker::new(config.clone());
    let mut reports = Vec::with_capacity(frames.len());
    for f in frames {
        reports.push(tracker.push(f.clone(), images)?);
    }
    Ok(SequenceResult {
        reports,
        stable: tracker.stable,
        contact: tracker.contact.clone(),
        onset_position: tracker.onset,
        verdict: tracker.verdict(),
        orientation: tracker.peak_orientation,
        contour_mode: tracker.contour_mode(),
    })
}

pub const ESTIMATE_CSV_HEADER: &str =
    "frame,t,angle_deg,signed_angle_deg,cor_x,cor_y,orientation,votes_cw,votes_ccw,residual,class";

/// One CSV row per frame; COR, votes and residual are empty without a
/// marker-mode estimate.
pub fn format_estimates(reports: &[FrameReport]) -> String {
    let mut out = String::from(ESTIMATE_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let (cx, cy, cw, ccw, res) = match (&r.estimate, r.class) {
            (Some(e), FrameClass::Motion(_)) => (
                format!("{:.4}", e.cor.x),
                format!("{:.4}", e.cor.y),
                e.votes_cw.to_string(),
                e.votes_ccw.to_string(),
                format!("{:.6}", e.residual),
            ),
            _ => Default::default(),
        };
        out.push_str(&format!(
            "{},{:.6},{:.4},{:.4},{},{},{},{},{},{},{}\n",
            r.frame_index,
            r.time_s,
            r.angle_deg,
            r.signed_angle_deg,
            cx,
            cy,
            r.orientation.as_str(),
            cw,
            ccw,
            res,
            r.class.as_str()
        ));
    }
    out
}
