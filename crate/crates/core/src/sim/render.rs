use nalgebra::{Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Footprint, SimParams, SENSOR_HEIGHT, SENSOR_WIDTH};
use crate::data::{DataError, IntensityFrame};
use crate::pipeline::ImageSource;

/// Brightening of a flat contact on the green channel.
const FLAT_CONTRAST: f64 = 40.0;
/// Brightening of a small blob on all channels.
const BLOB_CONTRAST: f64 = 60.0;
const SENSOR_NOISE: i32 = 2;

/// Renders the tactile image of any frame on demand.
#[derive(Debug, Clone)]
pub struct SimRenderer {
    footprint: Footprint,
    center: Vector2<f64>,
    angles: Vec<f64>,
    closure_frames: usize,
    seed: u64,
}

fn background(x: usize, y: usize) -> [f64; 3] {
    // smooth shading plus a fixed texture
    let t = ((x.wrapping_mul(73_856_093) ^ y.wrapping_mul(19_349_663)) % 7) as f64;
    [
        90.0 + 30.0 * x as f64 / SENSOR_WIDTH as f64 + t,
        70.0 + 20.0 * y as f64 / SENSOR_HEIGHT as f64 + t,
        100.0 + t,
    ]
}

impl SimRenderer {
    pub(super) fn new(footprint: Footprint, params: &SimParams, angles: Vec<f64>, seed: u64) -> Self {
        SimRenderer {
            footprint,
            center: params.grip_center(),
            angles,
            closure_frames: params.closure_frames,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Image at sequence position `pos`: the contact fades in while the
    /// gripper closes and turns with the ground-truth angle.
    pub fn render(&self, pos: usize) -> IntensityFrame {
        let (w, h) = (SENSOR_WIDTH, SENSOR_HEIGHT);
        let mut planes = [vec![0u8; w * h], vec![0u8; w * h], vec![0u8; w * h]];
        let strength = (pos.min(self.closure_frames) as f64) / self.closure_frames as f64;
        let angle = self.angles.get(pos).copied().unwrap_or(0.0);
        let back = Rotation2::new(-angle.to_radians());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (pos as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for y in 0..h {
            for x in 0..w {
                let mut px = background(x, y);
                if strength > 0.0 {
                    let rel = back * (Vector2::new(x as f64 + 0.5, y as f64 + 0.5) - self.center);
                    if self.footprint.contains(rel) {
                        match self.footprint {
                            Footprint::Flat { .. } => px[1] += FLAT_CONTRAST * strength,
                            Footprint::SmallBlob { .. } => {
                                for c in &mut px {
                                    *c += BLOB_CONTRAST * strength;
                                }
                            }
                        }
                    }
                }
                let i = y * w + x;
                for (c, plane) in planes.iter_mut().enumerate() {
                    let n = rng.gen_range(-SENSOR_NOISE..=SENSOR_NOISE) as f64;
                    plane[i] = (px[c] + n).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        IntensityFrame::new(w, h, planes).expect("planes sized to the sensor")
    }
}

impl ImageSource for SimRenderer {
    fn image(&self, pos: usize, _frame_index: u64) -> Result<Option<IntensityFrame>, DataError> {
        Ok((pos < self.angles.len()).then(|| self.render(pos)))
    }
}
