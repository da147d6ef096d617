use std::cell::Cell;

use thiserror::Error;

use super::{equilibrium_angle, rotation_sign, simulate_grasp, SimError, SimObject, SimParams};
use crate::config::PipelineConfig;
use crate::control::{GraspCommand, PlantOutcome};
use crate::cor::{verdict_for, Orientation};
use crate::pipeline::{run_sequence, PipelineError};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Ground-truth outcome of a grasp at `offset` once the contact has
/// settled.
pub fn oracle_outcome(object: &SimObject, params: &SimParams, offset: f64, config: &PipelineConfig) -> PlantOutcome {
    let angle = equilibrium_angle(object, params, offset);
    let orientation = Orientation::from_signed_angle(rotation_sign(object, offset));
    PlantOutcome {
        verdict: verdict_for(orientation, angle.abs(), config),
        orientation,
    }
}

/// Answers every grasp with the ground truth.
#[derive(Debug, Clone)]
pub struct OraclePlant {
    pub object: SimObject,
    pub params: SimParams,
    pub config: PipelineConfig,
}

impl OraclePlant {
    pub fn grasp(&self, cmd: &GraspCommand) -> Result<PlantOutcome, PlantError> {
        let half = 0.5 * self.object.length;
        if !(cmd.offset.abs() <= half) {
            return Err(SimError::OffsetOutsideObject { offset: cmd.offset, half }.into());
        }
        Ok(oracle_outcome(&self.object, &self.params, cmd.offset, &self.config))
    }
}

/// Simulates each grasp and answers with the pipeline's verdict. Every
/// grasp draws a fresh seed derived from `params.seed` and the grasp count.
#[derive(Debug, Clone)]
pub struct PipelinePlant {
    pub object: SimObject,
    pub params: SimParams,
    pub config: PipelineConfig,
    pub n_frames: usize,
    grasps: Cell<u64>,
    last_truth_peak: Cell<f64>,
}

impl PipelinePlant {
    pub fn new(object: SimObject, params: SimParams, config: PipelineConfig, n_frames: usize) -> Self {
        PipelinePlant {
            object,
            params,
            config,
            n_frames,
            grasps: Cell::new(0),
            last_truth_peak: Cell::new(0.0),
        }
    }

    /// Largest ground-truth angle of the most recent grasp.
    pub fn last_truth_peak(&self) -> f64 {
        self.last_truth_peak.get()
    }

    pub fn grasp(&self, cmd: &GraspCommand) -> Result<PlantOutcome, PlantError> {
        let k = self.grasps.get();
        self.grasps.set(k + 1);
        let params = SimParams {
            seed: self
                .params
                .seed
                .wrapping_add(k.wrapping_add(1).wrapping_mul(0x2545_F491_4F6C_DD1D)),
            ..self.params.clone()
        };
        let sim = simulate_grasp(&self.object, &params, cmd.offset, self.n_frames)?;
        self.last_truth_peak.set(sim.peak_angle());
        let out = run_sequence(&sim.frames, &sim.renderer, &self.config)?;
        Ok(PlantOutcome {
            verdict: out.verdict,
            orientation: out.orientation,
        })
    }
}
