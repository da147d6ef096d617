//! Coarse-to-fine regrasp policy along the object's principal axis.
//!
//! The controller is a pure transition function over immutable state
//! snapshots. A rotational failure moves the grasp toward the side the
//! rotation points at; an orientation flip means the center of gravity was
//! passed, so the last two offsets bracket it and the step shrinks.

use std::fmt;

use thiserror::Error;

use crate::config::ControllerConfig;
use crate::cor::{Orientation, Stability, StabilityVerdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("object length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("controller already finished")]
    AlreadyDone,
    #[error("orientation still ambiguous after a retry at offset {0:.4} m")]
    PersistentAmbiguity(f64),
    #[error("exceeded {0} regrasps")]
    MaxRegrasps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Initial,
    Coarse,
    Fine,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspCommand {
    pub offset: f64,
    pub lift_height_m: f64,
    pub hold_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub object_length: f64,
    /// Along the principal axis, 0 at the geometric center.
    pub grasp_offset: f64,
    pub step_size: f64,
    /// `+1` or `-1` once the first failure has been seen.
    pub direction: Option<f64>,
    pub last_orientation: Option<Orientation>,
    /// Offset at which `last_orientation` was observed.
    pub last_offset: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub regrasp_count: usize,
    pub flips: usize,
    pub phase: Phase,
    retried: bool,
}

impl ControllerState {
    fn limit(&self, config: &ControllerConfig) -> f64 {
        0.5 * self.object_length * (1.0 - config.clamp_epsilon)
    }

    fn command(&self, config: &ControllerConfig) -> GraspCommand {
        GraspCommand {
            offset: self.grasp_offset,
            lift_height_m: config.lift_height_m,
            hold_time_s: config.hold_time_s,
        }
    }

    /// Command for the current offset, used for the first grasp.
    pub fn current_command(&self, config: &ControllerConfig) -> GraspCommand {
        self.command(config)
    }
}

pub fn init_controller(length: f64, config: &ControllerConfig) -> Result<ControllerState, ControlError> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(ControlError::NonPositiveLength(length));
    }
    Ok(ControllerState {
        object_length: length,
        grasp_offset: 0.0,
        step_size: config.initial_step_fraction * length,
        direction: None,
        last_orientation: None,
        last_offset: None,
        bracket: None,
        regrasp_count: 0,
        flips: 0,
        phase: Phase::Initial,
        retried: false,
    })
}

/// `+1` moves toward the positive end of the object axis.
pub fn direction_for(orientation: Orientation, config: &ControllerConfig) -> Option<f64> {
    let d = match orientation {
        Orientation::Cw => 1.0,
        Orientation::Ccw => -1.0,
        Orientation::Ambiguous => return None,
    };
    Some(if config.flip_direction { -d } else { d })
}

/// Moves from `from` by `delta`, clamped to the object. Inside a bracket a
/// target on or past an edge is replaced by the midpoint between `from` and
/// that edge, so known-bad offsets are never revisited.
fn target(from: f64, delta: f64, limit: f64, bracket: Option<(f64, f64)>) -> f64 {
    let mut to = (from + delta).clamp(-limit, limit);
    if let Some((lo, hi)) = bracket {
        if to <= lo {
            to = 0.5 * (from + lo);
        } else if to >= hi {
            to = 0.5 * (from + hi);
        }
    }
    to
}

/// One controller transition. `orientation` is the rotation sense measured
/// on the grasp that produced `verdict`.
pub fn next_grasp(
    state: &ControllerState,
    verdict: &StabilityVerdict,
    orientation: Orientation,
    config: &ControllerConfig,
) -> Result<(ControllerState, Option<GraspCommand>), ControlError> {
    if state.phase == Phase::Done {
        return Err(ControlError::AlreadyDone);
    }
    let mut next = state.clone();
    if verdict.stability == Stability::StableGrasp {
        next.phase = Phase::Done;
        return Ok((next, None));
    }
    if next.regrasp_count >= config.max_regrasps {
        return Err(ControlError::MaxRegrasps(config.max_regrasps));
    }
    let Some(dir) = direction_for(orientation, config) else {
        if state.retried {
            return Err(ControlError::PersistentAmbiguity(state.grasp_offset));
        }
        next.retried = true;
        next.regrasp_count += 1;
        let cmd = next.command(config);
        return Ok((next, Some(cmd)));
    };
    next.retried = false;
    let limit = state.limit(config);
    let here = state.grasp_offset;
    match (state.last_orientation, state.last_offset) {
        (Some(prev), Some(prev_offset)) if prev != orientation => {
            let (lo, hi) = if prev_offset < here {
                (prev_offset, here)
            } else {
                (here, prev_offset)
            };
            next.bracket = Some((lo, hi));
            next.step_size = config.flip_step_factor * state.step_size.min(hi - lo);
            next.flips += 1;
            next.phase = Phase::Fine;
        }
        (Some(_), _) => {}
        _ => next.phase = Phase::Coarse,
    }
    let step = next.step_size;
    next.grasp_offset = target(here, dir * step, limit, next.bracket);
    if state.last_orientation.is_none() {
        next.step_size = config.later_step_fraction * state.object_length;
    }
    next.direction = Some(dir);
    next.last_orientation = Some(orientation);
    next.last_offset = Some(here);
    next.regrasp_count += 1;
    let cmd = next.command(config);
    Ok((next, Some(cmd)))
}

/// What a plant reports back for one grasp and lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOutcome {
    pub verdict: StabilityVerdict,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStep {
    pub step: usize,
    pub offset: f64,
    pub stability: Stability,
    pub orientation: Orientation,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<EpisodeStep>,
    pub final_state: ControllerState,
}

impl Episode {
    pub fn regrasps(&self) -> usize {
        self.final_state.regrasp_count
    }

    pub fn converged(&self) -> bool {
        self.final_state.phase == Phase::Done
    }

    pub fn final_offset(&self) -> f64 {
        self.final_state.grasp_offset
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError<E: std::error::Error + 'static> {
    /// The controller gave up; the partial episode is kept for reporting.
    #[error("{error}")]
    Control { error: ControlError, partial: Episode },
    #[error("plant failed at step {step}: {source}")]
    Plant { step: usize, source: E },
}

/// Runs grasps until the controller finishes or fails.
pub fn run_episode<E, P>(
    length: f64,
    config: &ControllerConfig,
    mut plant: P,
) -> Result<Episode, EpisodeError<E>>
where
    E: std::error::Error + 'static,
    P: FnMut(&GraspCommand) -> Result<PlantOutcome, E>,
{
    let mut state = init_controller(length, config).map_err(|error| EpisodeError::Control {
        error,
        partial: Episode {
            steps: Vec::new(),
            final_state: ControllerState {
                object_length: length,
                grasp_offset: 0.0,
                step_size: 0.0,
                direction: None,
                last_orientation: None,
                last_offset: None,
                bracket: None,
                regrasp_count: 0,
                flips: 0,
                phase: Phase::Initial,
                retried: false,
            },
        },
    })?;
    let mut steps = Vec::new();
    let mut cmd = state.current_command(config);
    loop {
        let outcome = plant(&cmd).map_err(|source| EpisodeError::Plant {
            step: steps.len(),
            source,
        })?;
        steps.push(EpisodeStep {
            step: steps.len(),
            offset: cmd.offset,
            stability: outcome.verdict.stability,
            orientation: outcome.orientation,
            angle_deg: outcome.verdict.measured_angle_deg,
        });
        match next_grasp(&state, &outcome.verdict, outcome.orientation, config) {
            Ok((s, Some(c))) => {
                state = s;
                cmd = c;
            }
            Ok((s, None)) => {
                return Ok(Episode {
                    steps,
                    final_state: s,
                })
            }
            Err(error) => {
                return Err(EpisodeError::Control {
                    error,
                    partial: Episode {
                        steps,
                        final_state: state,
                    },
                })
            }
        }
    }
}

/// Replays a fixed list of outcomes, one per grasp.
#[derive(Debug, Clone)]
pub struct ScriptedPlant {
    script: Vec<PlantOutcome>,
    next: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("script exhausted after {0} grasps")]
pub struct ScriptExhausted(pub usize);

impl ScriptedPlant {
    pub fn new(script: Vec<PlantOutcome>) -> Self {
        ScriptedPlant { script, next: 0 }
    }

    pub fn from_episode(steps: &[EpisodeStep]) -> Self {
        Self::new(
            steps
                .iter()
                .map(|s| PlantOutcome {
                    verdict: StabilityVerdict {
                        stability: s.stability,
                        measured_angle_deg: s.angle_deg,
                    },
                    orientation: s.orientation,
                })
                .collect(),
        )
    }

    pub fn grasp(&mut self, _cmd: &GraspCommand) -> Result<PlantOutcome, ScriptExhausted> {
        let out = self.script.get(self.next).copied().ok_or(ScriptExhausted(self.next))?;
        self.next += 1;
        Ok(out)
    }
}

impl fmt::Display for EpisodeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.6} {} {} {:.4}",
            self.step,
            self.offset,
            self.stability.as_str(),
            self.orientation.as_str(),
            self.angle_deg
        )
    }
}

/// One `step offset_m verdict orientation angle_deg` line per grasp.
pub fn format_episode(steps: &[EpisodeStep]) -> String {
    steps.iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct EpisodeParseError {
    pub line: usize,
    pub msg: String,
}

pub fn parse_episode(text: &str) -> Result<Vec<EpisodeStep>, EpisodeParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| EpisodeParseError {
            line: i + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err("expected 5 fields"));
        }
        out.push(EpisodeStep {
            step: f[0].parse().map_err(|_| err("bad step"))?,
            offset: f[1].parse().map_err(|_| err("bad offset"))?,
            stability: Stability::parse(f[2]).ok_or_else(|| err("bad verdict"))?,
            orientation: Orientation::parse(f[3]).ok_or_else(|| err("bad orientation"))?,
            angle_deg: f[4].parse().map_err(|_| err("bad angle"))?,
        });
    }
    Ok(out)
}
