//! Quasi-static grasp-and-lift simulator producing marker sequences,
//! intensity images and ground-truth rotation.
//!
//! The object hangs from a grasp at `offset` along its axis; gravity acting
//! at `cog_offset` applies a torque `m g |offset - cog|` about the grip
//! center. The gel twists elastically up to the slip torque
//! `m g stability_radius`; any excess makes the contact slip at a rate
//! proportional to the excess until `max_angle_deg`.

mod plant;
mod render;

pub use plant::{oracle_outcome, OraclePlant, PipelinePlant};
pub use render::SimRenderer;

use nalgebra::{Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::{GroundTruthFrame, Marker, MarkerFrame};

pub const GRAVITY: f64 = 9.81;
pub const SENSOR_WIDTH: usize = 640;
pub const SENSOR_HEIGHT: usize = 480;
/// Elastic twist at the slip torque must stay below this many degrees.
pub const MAX_ELASTIC_DEG: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("grasp offset {offset} m lies outside the object (half length {half})")]
    OffsetOutsideObject { offset: f64, half: f64 },
    #[error("invalid simulator parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    /// Axis-aligned rectangle of contact, in pixels.
    Flat { width_px: f64, height_px: f64 },
    /// Ellipse of `n_px` pixels with major/minor ratio `eccentricity`, its
    /// major axis at `axis_deg` (clockwise-positive) before rotation.
    SmallBlob { n_px: f64, eccentricity: f64, axis_deg: f64 },
}

impl Footprint {
    /// Whether a point, given relative to the grip center in the object's
    /// rest pose, lies in the contact.
    pub fn contains(&self, rel: Vector2<f64>) -> bool {
        match *self {
            Footprint::Flat { width_px, height_px } => {
                rel.x.abs() <= 0.5 * width_px && rel.y.abs() <= 0.5 * height_px
            }
            Footprint::SmallBlob { .. } => {
                let (a, b, deg) = self.ellipse().expect("blob");
                let (s, c) = deg.to_radians().sin_cos();
                let u = rel.x * c + rel.y * s;
                let v = -rel.x * s + rel.y * c;
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }
        }
    }

    /// Semi-axes and axis angle of a blob footprint.
    pub fn ellipse(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Footprint::SmallBlob {
                n_px,
                eccentricity,
                axis_deg,
            } => {
                let b = (n_px / (std::f64::consts::PI * eccentricity)).sqrt();
                Some((eccentricity * b, b, axis_deg))
            }
            Footprint::Flat { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimObject {
    pub name: String,
    pub length: f64,
    pub mass: f64,
    /// From the geometric center along the axis, meters.
    pub cog_offset: f64,
    /// Grasps within this distance of the center of gravity stay below the
    /// elastic limit.
    pub stability_radius: f64,
    pub footprint: Footprint,
}

impl SimObject {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.length > 0.0 && self.mass > 0.0 && self.stability_radius > 0.0) {
            return Err(SimError::InvalidParams(
                "length, mass and stability radius must be positive".into(),
            ));
        }
        if self.cog_offset.abs() > 0.5 * self.length {
            return Err(SimError::InvalidParams("center of gravity lies outside the object".into()));
        }
        Ok(())
    }

    pub fn with_cog(&self, cog_offset: f64) -> SimObject {
        SimObject {
            cog_offset,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub fps: f64,
    /// Frames over which the gripper closes; positions settle after this.
    pub closure_frames: usize,
    pub lift_start_frame: usize,
    /// Frames over which the object's weight transfers to the grasp.
    pub load_frames: usize,
    /// Elastic twist, degrees per N m.
    pub gel_shear_compliance: f64,
    /// Slip, degrees per frame per N m of torque above the slip torque.
    pub slip_rate: f64,
    pub max_angle_deg: f64,
    pub marker_noise_px: f64,
    /// Largest lag of the markers behind the object, reached at 20°.
    pub adhesion_lag_deg: f64,
    /// Standard deviation of the per-marker radial creep over the sequence.
    pub creep_px: f64,
    /// Radial stretch of the contact markers once the gripper has closed.
    pub closure_dilation: f64,
    /// Share of contact motion seen by markers outside the contact.
    pub non_contact_attenuation: f64,
    /// Rigid sliding of the contact per lift frame, pixels.
    pub slide_px_per_frame: (f64, f64),
    /// From this frame on the contact markers are lost.
    pub detach_frame: Option<usize>,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub grid_spacing_px: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            fps: 30.0,
            closure_frames: 18,
            lift_start_frame: 30,
            load_frames: 6,
            gel_shear_compliance: 25.0,
            slip_rate: 40.0,
            max_angle_deg: 30.0,
            marker_noise_px: 0.1,
            adhesion_lag_deg: 3.0,
            creep_px: 0.3,
            closure_dilation: 0.04,
            non_contact_attenuation: 0.2,
            slide_px_per_frame: (0.0, 0.0),
            detach_frame: None,
            grid_cols: 16,
            grid_rows: 12,
            grid_spacing_px: 40.0,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let nonneg = [
            self.gel_shear_compliance,
            self.slip_rate,
            self.max_angle_deg,
            self.marker_noise_px,
            self.adhesion_lag_deg,
            self.creep_px,
            self.closure_dilation,
            self.non_contact_attenuation,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(SimError::InvalidParams("rates and noise levels must be non-negative".into()));
        }
        if !(self.fps > 0.0) {
            return Err(SimError::InvalidParams("fps must be positive".into()));
        }
        if self.closure_frames == 0 || self.load_frames == 0 {
            return Err(SimError::InvalidParams("closure and load frames must be positive".into()));
        }
        if self.grid_cols == 0 || self.grid_rows == 0 || !(self.grid_spacing_px > 0.0) {
            return Err(SimError::InvalidParams("marker grid must be non-empty".into()));
        }
        Ok(())
    }

    pub fn grip_center(&self) -> Vector2<f64> {
        Vector2::new(0.5 * SENSOR_WIDTH as f64, 0.5 * SENSOR_HEIGHT as f64)
    }

    /// Rest positions of the marker grid, row-major from the top left.
    pub fn grid(&self) -> Vec<Vector2<f64>> {
        let s = self.grid_spacing_px;
        let x0 = 0.5 * (SENSOR_WIDTH as f64 - s * (self.grid_cols - 1) as f64);
        let y0 = 0.5 * (SENSOR_HEIGHT as f64 - s * (self.grid_rows - 1) as f64);
        let mut out = Vec::with_capacity(self.grid_cols * self.grid_rows);
        for j in 0..self.grid_rows {
            for i in 0..self.grid_cols {
                out.push(Vector2::new(x0 + s * i as f64, y0 + s * j as f64));
            }
        }
        out
    }
}

/// Torque of the hanging weight and the torque at which the contact slips.
pub fn torques(object: &SimObject, offset: f64) -> (f64, f64) {
    let w = object.mass * GRAVITY;
    (w * (offset - object.cog_offset).abs(), w * object.stability_radius)
}

/// Clockwise when the center of gravity lies on the positive side of the
/// grasp, `0` at the center of gravity.
pub fn rotation_sign(object: &SimObject, offset: f64) -> f64 {
    let d = object.cog_offset - offset;
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check(object: &SimObject, params: &SimParams, offset: f64) -> Result<(), SimError> {
    object.validate()?;
    params.validate()?;
    let half = 0.5 * object.length;
    if !(offset.abs() <= half) {
        return Err(SimError::OffsetOutsideObject { offset, half });
    }
    let (_, slip) = torques(object, 0.0);
    if params.gel_shear_compliance * slip >= MAX_ELASTIC_DEG {
        return Err(SimError::InvalidParams(format!(
            "elastic twist at the slip torque is {:.2}°, must stay below {MAX_ELASTIC_DEG}°",
            params.gel_shear_compliance * slip
        )));
    }
    Ok(())
}

/// Signed ground-truth angle per frame.
pub fn angle_schedule(object: &SimObject, params: &SimParams, offset: f64, n_frames: usize) -> Vec<f64> {
    let (torque, slip_torque) = torques(object, offset);
    let sign = rotation_sign(object, offset);
    let mut slip = 0.0;
    (0..n_frames)
        .map(|f| {
            if f < params.lift_start_frame || sign == 0.0 {
                return 0.0;
            }
            let load = ((f - params.lift_start_frame + 1) as f64 / params.load_frames as f64).min(1.0);
            let applied = torque * load;
            let elastic = params.gel_shear_compliance * applied.min(slip_torque);
            slip += params.slip_rate * (applied - slip_torque).max(0.0);
            sign * (elastic + slip).min(params.max_angle_deg)
        })
        .collect()
}

/// Angle the settled contact reaches: the elastic twist inside the
/// stability radius, the slip limit outside it.
pub fn equilibrium_angle(object: &SimObject, params: &SimParams, offset: f64) -> f64 {
    let (torque, slip_torque) = torques(object, offset);
    let mag = if torque <= slip_torque {
        params.gel_shear_compliance * torque
    } else {
        params.max_angle_deg
    };
    rotation_sign(object, offset) * mag.min(params.max_angle_deg)
}

/// Rotation seen by the contact markers: the object angle less the adhesion
/// lag, which ramps in between 10° and 20°.
pub fn marker_angle(gt_deg: f64, params: &SimParams) -> f64 {
    let lag = params.adhesion_lag_deg * ((gt_deg.abs() - 10.0) / 10.0).clamp(0.0, 1.0);
    gt_deg - gt_deg.signum() * lag.min(gt_deg.abs())
}

#[derive(Debug, Clone)]
pub struct SimulatedGrasp {
    pub frames: Vec<MarkerFrame>,
    pub ground_truth: Vec<GroundTruthFrame>,
    /// Last frame in which the gripper is still closing.
    pub closure_complete_frame: usize,
    /// Markers whose rest position lies in the contact footprint.
    pub contact_ids: Vec<u32>,
    pub renderer: SimRenderer,
}

impl SimulatedGrasp {
    /// Largest absolute ground-truth angle.
    pub fn peak_angle(&self) -> f64 {
        self.ground_truth.iter().map(|g| g.angle_deg.abs()).fold(0.0, f64::max)
    }

    pub fn true_onset(&self) -> Option<usize> {
        self.ground_truth.iter().position(|g| g.rotating)
    }
}

/// Generates one grasp-and-lift trial. Deterministic for a fixed seed.
pub fn simulate_grasp(
    object: &SimObject,
    params: &SimParams,
    offset: f64,
    n_frames: usize,
) -> Result<SimulatedGrasp, SimError> {
    check(object, params, offset)?;
    let gt = angle_schedule(object, params, offset, n_frames);
    let center = params.grip_center();
    let grid = params.grid();
    let in_contact: Vec<bool> = grid.iter().map(|p| object.footprint.contains(p - center)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.marker_noise_px).expect("finite noise");
    let creep_dist = Normal::new(0.0, params.creep_px).expect("finite creep");
    let creep: Vec<f64> = grid.iter().map(|_| creep_dist.sample(&mut rng)).collect();
    let mut frames = Vec::with_capacity(n_frames);
    for (f, &angle) in gt.iter().enumerate() {
        let closing = (f.min(params.closure_frames) as f64) / params.closure_frames as f64;
        let k = params.closure_dilation * closing;
        let theta = marker_angle(angle, params).to_radians();
        let lift = f.saturating_sub(params.lift_start_frame.saturating_sub(1)) as f64;
        let lifted = f >= params.lift_start_frame;
        let slide = if lifted {
            Vector2::new(params.slide_px_per_frame.0, params.slide_px_per_frame.1) * lift
        } else {
            Vector2::zeros()
        };
        let ramp = f as f64 / n_frames.max(1) as f64;
        let detached = params.detach_frame.is_some_and(|d| f >= d);
        let markers = grid
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let rel = p - center;
                let s = if in_contact[i] { 1.0 } else { params.non_contact_attenuation };
                let rot = Rotation2::new(s * theta);
                let radial = if rel.norm() > 0.0 { rel.normalize() } else { Vector2::zeros() };
                let q = center
                    + (1.0 + s * k) * (rot * rel)
                    + s * slide
                    + creep[i] * ramp * radial
                    + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng));
                Marker {
                    id: i as u32,
                    x: q.x,
                    y: q.y,
                    visible: !(detached && in_contact[i]),
                }
            })
            .collect();
        frames.push(MarkerFrame {
            frame_index: f as u64,
            time_s: f as f64 / params.fps,
            markers,
        });
    }
    let ground_truth = gt
        .iter()
        .enumerate()
        .map(|(f, &a)| GroundTruthFrame {
            frame_index: f as u64,
            angle_deg: a,
            rotating: a != 0.0,
        })
        .collect();
    let contact_ids = (0..grid.len() as u32).filter(|&i| in_contact[i as usize]).collect();
    let renderer = SimRenderer::new(object.footprint, params, gt, rng.gen());
    Ok(SimulatedGrasp {
        frames,
        ground_truth,
        closure_complete_frame: params.closure_frames,
        contact_ids,
        renderer,
    })
}

/// Default contact of the catalogue objects: 8 x 6 markers.
pub const DEFAULT_FLAT: Footprint = Footprint::Flat {
    width_px: 316.0,
    height_px: 236.0,
};

fn flat(w: f64, h: f64) -> Footprint {
    Footprint::Flat {
        width_px: w,
        height_px: h,
    }
}

/// Catalogue of household-like objects; the center of gravity is set per
/// trial with [`SimObject::with_cog`].
pub fn object_menu() -> Vec<SimObject> {
    let o = |name: &str, length: f64, mass: f64, radius: f64, footprint: Footprint| SimObject {
        name: name.to_string(),
        length,
        mass,
        cog_offset: 0.0,
        stability_radius: radius,
        footprint,
    };
    vec![
        o("pill_box", 0.20, 0.25, 0.014, DEFAULT_FLAT),
        o("rod", 0.30, 0.20, 0.020, DEFAULT_FLAT),
        o("hammer", 0.32, 0.45, 0.012, flat(276.0, 236.0)),
        o("screwdriver", 0.22, 0.12, 0.016, flat(276.0, 196.0)),
        o("spatula", 0.28, 0.10, 0.022, DEFAULT_FLAT),
        o("ruler", 0.30, 0.08, 0.030, flat(356.0, 156.0)),
        o("brush", 0.24, 0.15, 0.018, DEFAULT_FLAT),
        o("bottle", 0.25, 0.40, 0.012, flat(356.0, 276.0)),
        o("marker_pen", 0.14, 0.03, 0.012, flat(236.0, 156.0)),
        o("tape_roll_box", 0.18, 0.30, 0.012, DEFAULT_FLAT),
        o("ladle", 0.30, 0.18, 0.015, flat(276.0, 196.0)),
        o("cereal_box", 0.30, 0.50, 0.020, flat(356.0, 276.0)),
        o("toothbrush", 0.19, 0.02, 0.015, flat(196.0, 116.0)),
        o("tongs", 0.26, 0.14, 0.018, DEFAULT_FLAT),
    ]
}

/// An elongated small contact such as the jaw of a wrench.
pub fn wrench() -> SimObject {
    SimObject {
        name: "wrench".into(),
        length: 0.20,
        mass: 0.15,
        cog_offset: 0.0,
        stability_radius: 0.010,
        footprint: Footprint::SmallBlob {
            n_px: 2400.0,
            eccentricity: 3.0,
            axis_deg: 20.0,
        },
    }
}
