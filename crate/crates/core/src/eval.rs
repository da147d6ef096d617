//! Evaluation metrics over sequences with ground truth, synthetic corpora
//! and closed-loop regrasp runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{PipelineConfig, Settings};
use crate::control::{self, EpisodeError, EpisodeStep, GraspCommand};
use crate::cor::Stability;
use crate::data::{self, DataError, GroundTruthFrame, MarkerFrame};
use crate::pipeline::{ImageSource, NoImages, PipelineError, PpmDirectory, SequenceResult, Tracker};
use crate::sim::{self, OraclePlant, PipelinePlant, SimError, SimObject, SimParams, SimulatedGrasp};
use crate::stats;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sequence {0} has no ground truth")]
    MissingGroundTruth(String),
    #[error("no sequences found in {0}")]
    EmptyCorpus(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("episode {episode}: {msg}")]
    Plant { episode: usize, msg: String },
}

/// `[start, end)` of the frames between the true onset and detachment.
/// Detachment is the first frame after onset where more than
/// `detach_invisible_fraction` of `contact_ids` are invisible.
pub fn lifting_window(
    frames: &[MarkerFrame],
    truth: &[GroundTruthFrame],
    contact_ids: &[u32],
    config: &PipelineConfig,
) -> Option<(usize, usize)> {
    let start = truth.iter().position(|g| g.rotating)?;
    let detached = |f: &MarkerFrame| {
        if contact_ids.is_empty() {
            return false;
        }
        let lost = contact_ids
            .iter()
            .filter(|&&id| !f.marker(id).is_some_and(|m| m.visible))
            .count();
        lost as f64 > config.detach_invisible_fraction * contact_ids.len() as f64
    };
    let end = frames
        .iter()
        .enumerate()
        .skip(start)
        .find(|(_, f)| detached(f))
        .map_or(frames.len().min(truth.len()), |(i, _)| i);
    (end > start).then_some((start, end))
}

/// Mean `|measured - truth|` over the window, and over the window frames
/// whose truth is below 10° in magnitude.
pub fn angle_errors(measured: &[f64], truth: &[f64], window: (usize, usize)) -> (Option<f64>, Option<f64>) {
    let (a, b) = window;
    let all: Vec<f64> = (a..b).map(|i| (measured[i] - truth[i]).abs()).collect();
    let small: Vec<f64> = (a..b)
        .filter(|&i| truth[i].abs() < 10.0)
        .map(|i| (measured[i] - truth[i]).abs())
        .collect();
    (stats::mean(&all), stats::mean(&small))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMetrics {
    pub name: String,
    pub n_frames: usize,
    pub lifting_frames: usize,
    pub mean_abs_angle_error_deg: Option<f64>,
    pub mean_abs_angle_error_under10_deg: Option<f64>,
    pub true_onset: Option<usize>,
    pub detected_onset: Option<usize>,
    pub onset_delay_frames: Option<usize>,
    pub true_class: Stability,
    pub predicted_class: Stability,
    pub peak_truth_deg: f64,
    pub peak_measured_deg: f64,
    pub contour_mode: bool,
    /// Mean wall time of one tracker step, milliseconds.
    pub latency_ms: f64,
}

/// Runs the pipeline over one sequence and scores it against the truth.
pub fn evaluate_sequence(
    name: &str,
    frames: &[MarkerFrame],
    truth: &[GroundTruthFrame],
    images: &dyn ImageSource,
    config: &PipelineConfig,
) -> Result<(SequenceMetrics, SequenceResult), EvalError> {
    if truth.len() != frames.len() {
        return Err(EvalError::MissingGroundTruth(name.to_string()));
    }
    let mut tracker = Tracker::new(config.clone());
    let mut reports = Vec::with_capacity(frames.len());
    let started = Instant::now();
    for f in frames {
        reports.push(tracker.push(f.clone(), images)?);
    }
    let latency_ms = 1e3 * started.elapsed().as_secs_f64() / frames.len().max(1) as f64;
    let result = SequenceResult {
        reports,
        stable: tracker.stable_contact(),
        contact: tracker.contact().cloned(),
        onset_position: tracker.onset_position(),
        verdict: tracker.verdict(),
        orientation: tracker.peak_orientation(),
        contour_mode: tracker.contour_mode(),
    };
    let measured: Vec<f64> = result.reports.iter().map(|r| r.signed_angle_deg).collect();
    let gt: Vec<f64> = truth.iter().map(|g| g.angle_deg).collect();
    let contact_ids: Vec<u32> = result
        .contact
        .as_ref()
        .map(|c| c.contact_marker_ids.iter().copied().collect())
        .unwrap_or_default();
    let window = lifting_window(frames, truth, &contact_ids, config);
    let (err, err10) = window.map_or((None, None), |w| angle_errors(&measured, &gt, w));
    let true_onset = truth.iter().position(|g| g.rotating);
    let peak_truth = gt.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let metrics = SequenceMetrics {
        name: name.to_string(),
        n_frames: frames.len(),
        lifting_frames: window.map_or(0, |(a, b)| b - a),
        mean_abs_angle_error_deg: err,
        mean_abs_angle_error_under10_deg: err10,
        true_onset,
        detected_onset: result.onset_position,
        onset_delay_frames: match (true_onset, result.onset_position) {
            (Some(t), Some(d)) => Some(t.abs_diff(d)),
            _ => None,
        },
        true_class: if peak_truth > config.stability_angle_deg {
            Stability::RotationalFailure
        } else {
            Stability::StableGrasp
        },
        predicted_class: result.verdict.stability,
        peak_truth_deg: peak_truth,
        peak_measured_deg: result.verdict.measured_angle_deg,
        contour_mode: result.contour_mode,
        latency_ms,
    };
    Ok((metrics, result))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub n_sequences: usize,
    pub mean_abs_angle_error_deg: Option<f64>,
    pub mean_abs_angle_error_under10_deg: Option<f64>,
    pub mean_onset_delay_frames: Option<f64>,
    /// Share of truly rotational sequences with onset found within 5 frames.
    pub onset_within_5_rate: Option<f64>,
    /// `[true][predicted]` with index 0 stable and 1 rotational.
    pub confusion: [[usize; 2]; 2],
    pub success_rate: f64,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
}

fn class_index(s: Stability) -> usize {
    match s {
        Stability::StableGrasp => 0,
        Stability::RotationalFailure => 1,
    }
}

/// Aggregates per-sequence rows; the result does not depend on row order
/// beyond floating-point summation order.
pub fn summarize(rows: &[SequenceMetrics]) -> CorpusSummary {
    let collect = |f: &dyn Fn(&SequenceMetrics) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(f).collect() };
    let err = collect(&|r| r.mean_abs_angle_error_deg);
    let err10 = collect(&|r| r.mean_abs_angle_error_under10_deg);
    let delays = collect(&|r| r.onset_delay_frames.map(|d| d as f64));
    let rotational: Vec<&SequenceMetrics> = rows
        .iter()
        .filter(|r| r.true_class == Stability::RotationalFailure)
        .collect();
    let within = rotational
        .iter()
        .filter(|r| r.onset_delay_frames.is_some_and(|d| d <= 5))
        .count();
    let mut confusion = [[0usize; 2]; 2];
    for r in rows {
        confusion[class_index(r.true_class)][class_index(r.predicted_class)] += 1;
    }
    let correct = confusion[0][0] + confusion[1][1];
    let lat: Vec<f64> = rows.iter().map(|r| r.latency_ms).collect();
    CorpusSummary {
        n_sequences: rows.len(),
        mean_abs_angle_error_deg: stats::mean(&err),
        mean_abs_angle_error_under10_deg: stats::mean(&err10),
        mean_onset_delay_frames: stats::mean(&delays),
        onset_within_5_rate: (!rotational.is_empty()).then(|| within as f64 / rotational.len() as f64),
        confusion,
        success_rate: if rows.is_empty() {
            0.0
        } else {
            correct as f64 / rows.len() as f64
        },
        mean_latency_ms: stats::mean(&lat).unwrap_or(0.0),
        max_latency_ms: lat.iter().copied().fold(0.0, f64::max),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const REPORT_CSV_HEADER: &str = "sequence,frames,lifting_frames,mean_abs_angle_error_deg,mean_abs_angle_error_under10_deg,true_onset,detected_onset,onset_delay_frames,true_class,predicted_class,peak_truth_deg,peak_measured_deg,mode";

pub fn format_report_csv(rows: &[SequenceMetrics]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{:.4},{:.4},{}\n",
            r.name,
            r.n_frames,
            r.lifting_frames,
            opt(r.mean_abs_angle_error_deg),
            opt(r.mean_abs_angle_error_under10_deg),
            opt_usize(r.true_onset),
            opt_usize(r.detected_onset),
            opt_usize(r.onset_delay_frames),
            r.true_class.as_str(),
            r.predicted_class.as_str(),
            r.peak_truth_deg,
            r.peak_measured_deg,
            if r.contour_mode { "contour" } else { "markers" }
        ));
    }
    out
}

/// `metric,value` rows. Wall-clock latency only appears with
/// `include_timing`, since it differs between runs.
pub fn format_summary_csv(s: &CorpusSummary, include_timing: bool) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("sequences", s.n_sequences.to_string()),
        ("mean_abs_angle_error_deg", opt(s.mean_abs_angle_error_deg)),
        ("mean_abs_angle_error_under10_deg", opt(s.mean_abs_angle_error_under10_deg)),
        ("mean_onset_delay_frames", opt(s.mean_onset_delay_frames)),
        ("onset_within_5_rate", opt(s.onset_within_5_rate)),
        ("true_stable_pred_stable", s.confusion[0][0].to_string()),
        ("true_stable_pred_rotational", s.confusion[0][1].to_string()),
        ("true_rotational_pred_stable", s.confusion[1][0].to_string()),
        ("true_rotational_pred_rotational", s.confusion[1][1].to_string()),
        ("classification_success_rate", format!("{:.4}", s.success_rate)),
    ];
    if include_timing {
        rows.push(("mean_latency_ms_per_frame", format!("{:.4}", s.mean_latency_ms)));
        rows.push(("max_latency_ms_per_frame", format!("{:.4}", s.max_latency_ms)));
    }
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

/// Sequence files (`*.seq`) of a directory, sorted by file name.
pub fn list_sequences(dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let entries = fs::read_dir(dir).map_err(|e| DataError::io(dir, e))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "seq"))
        .collect();
    out.sort();
    Ok(out)
}

/// Evaluates every sequence of a directory in file-name order. Images are
/// read from `<name>_frames/` when present.
pub fn evaluate_corpus(dir: &Path, config: &PipelineConfig) -> Result<(Vec<SequenceMetrics>, CorpusSummary), EvalError> {
    let paths = list_sequences(dir)?;
    if paths.is_empty() {
        return Err(EvalError::EmptyCorpus(dir.display().to_string()));
    }
    let mut rows = Vec::with_capacity(paths.len());
    for p in &paths {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let (frames, gt) = data::read_sequence(p)?;
        let gt = gt.ok_or_else(|| EvalError::MissingGroundTruth(name.clone()))?;
        let images_dir = data::frames_dir(p);
        let (row, _) = if images_dir.is_dir() {
            evaluate_sequence(&name, &frames, &gt, &PpmDirectory { dir: images_dir }, config)?
        } else {
            evaluate_sequence(&name, &frames, &gt, &NoImages, config)?
        };
        rows.push(row);
    }
    let summary = summarize(&rows);
    Ok((rows, summary))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub n_rotational: usize,
    pub n_stable: usize,
    pub n_frames: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_rotational: 98,
            n_stable: 44,
            n_frames: 90,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub object: SimObject,
    pub offset: f64,
    pub sim: SimulatedGrasp,
}

fn entry_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((i as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Draws objects from `menu`, centers of gravity and grasp offsets until
/// both class quotas are met; the true class follows from the ground-truth
/// peak angle.
pub fn generate_corpus(
    spec: &CorpusSpec,
    menu: &[SimObject],
    params: &SimParams,
    stability_angle_deg: f64,
) -> Result<Vec<CorpusEntry>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut rot, mut stable) = (0, 0);
    let mut out = Vec::with_capacity(spec.n_rotational + spec.n_stable);
    while rot < spec.n_rotational || stable < spec.n_stable {
        let base = &menu[rng.gen_range(0..menu.len())];
        let half = 0.5 * base.length;
        let cog = rng.gen_range(-0.3..=0.3) * base.length;
        // half of the draws land near the center of gravity
        let offset = if rng.gen_bool(0.5) {
            (cog + rng.gen_range(-1.5..=1.5) * base.stability_radius).clamp(-0.95 * half, 0.95 * half)
        } else {
            rng.gen_range(-0.45..=0.45) * base.length
        };
        let object = base.with_cog(cog);
        let peak = sim::angle_schedule(&object, params, offset, spec.n_frames)
            .iter()
            .fold(0.0f64, |m, a| m.max(a.abs()));
        let rotational = peak > stability_angle_deg;
        if (rotational && rot >= spec.n_rotational) || (!rotational && stable >= spec.n_stable) {
            continue;
        }
        let i = out.len();
        let p = SimParams {
            seed: entry_seed(spec.seed, i),
            ..params.clone()
        };
        let sim = sim::simulate_grasp(&object, &p, offset, spec.n_frames)?;
        if rotational {
            rot += 1;
        } else {
            stable += 1;
        }
        out.push(CorpusEntry {
            name: format!("seq_{i:03}_{}", object.name),
            object,
            offset,
            sim,
        });
    }
    Ok(out)
}

/// Evaluates generated entries with rendered images.
pub fn evaluate_entries(entries: &[CorpusEntry], config: &PipelineConfig) -> Result<Vec<SequenceMetrics>, EvalError> {
    entries
        .iter()
        .map(|e| {
            evaluate_sequence(&e.name, &e.sim.frames, &e.sim.ground_truth, &e.sim.renderer, config).map(|(m, _)| m)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    Oracle,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub cog_offset: f64,
    pub steps: Vec<EpisodeStep>,
    pub regrasps: usize,
    pub converged: bool,
    /// Converged on a grasp that is stable in truth.
    pub success: bool,
    pub final_offset: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSpec {
    pub object: SimObject,
    pub plant: PlantKind,
    pub n_episodes: usize,
    /// Fixed center of gravity; drawn uniformly over `±0.45 L` when `None`.
    pub cog_offset: Option<f64>,
    pub n_frames: usize,
    pub seed: u64,
}

/// Runs independent regrasp episodes with randomized centers of gravity.
pub fn run_closed_loop(spec: &ClosedLoopSpec, params: &SimParams, settings: &Settings) -> Result<Vec<EpisodeRecord>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = spec.object.length;
    let mut out = Vec::with_capacity(spec.n_episodes);
    for ep in 0..spec.n_episodes {
        let cog = spec
            .cog_offset
            .unwrap_or_else(|| rng.gen_range(-0.45..=0.45) * l);
        let object = spec.object.with_cog(cog);
        let p = SimParams {
            seed: entry_seed(spec.seed, ep),
            ..params.clone()
        };
        let threshold = settings.pipeline.stability_angle_deg;
        let (result, truly_stable) = match spec.plant {
            PlantKind::Oracle => {
                let plant = OraclePlant {
                    object: object.clone(),
                    params: p.clone(),
                    config: settings.pipeline.clone(),
                };
                let r = control::run_episode(l, &settings.controller, |c: &GraspCommand| plant.grasp(c));
                let last = match &r {
                    Ok(e) => e.final_offset(),
                    Err(_) => f64::NAN,
                };
                (r, sim::equilibrium_angle(&object, &p, last).abs() <= threshold)
            }
            PlantKind::Pipeline => {
                let plant = PipelinePlant::new(object.clone(), p.clone(), settings.pipeline.clone(), spec.n_frames);
                let r = control::run_episode(l, &settings.controller, |c: &GraspCommand| plant.grasp(c));
                (r, plant.last_truth_peak() <= threshold)
            }
        };
        let record = match result {
            Ok(e) => EpisodeRecord {
                episode: ep,
                cog_offset: cog,
                regrasps: e.regrasps(),
                converged: true,
                success: truly_stable,
                final_offset: e.final_offset(),
                steps: e.steps,
                failure: None,
            },
            Err(EpisodeError::Control { error, partial }) => EpisodeRecord {
                episode: ep,
                cog_offset: cog,
                regrasps: partial.regrasps(),
                converged: false,
                success: false,
                final_offset: partial.final_offset(),
                steps: partial.steps,
                failure: Some(error.to_string()),
            },
            Err(EpisodeError::Plant { step, source }) => {
                return Err(EvalError::Plant {
                    episode: ep,
                    msg: format!("step {step}: {source}"),
                })
            }
        };
        out.push(record);
    }
    Ok(out)
}

pub const EPISODE_CSV_HEADER: &str = "episode,cog_offset_m,regrasps,converged,success,final_offset_m,failure";

pub fn format_episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut out = format!("{EPISODE_CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{:.6},{},{},{},{:.6},{}\n",
            r.episode,
            r.cog_offset,
            r.regrasps,
            r.converged,
            r.success,
            r.final_offset,
            r.failure.as_deref().unwrap_or("")
        ));
    }
    out
}

/// Per-episode grasp traces, each preceded by a `# episode` comment line.
pub fn format_episode_traces(records: &[EpisodeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("# episode {} cog {:.6}\n", r.episode, r.cog_offset));
        out.push_str(&control::format_episode(&r.steps));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_regrasps: f64,
    pub max_regrasps: usize,
}

pub fn summarize_closed_loop(records: &[EpisodeRecord]) -> ClosedLoopSummary {
    let n = records.len();
    let regrasps: Vec<f64> = records.iter().map(|r| r.regrasps as f64).collect();
    ClosedLoopSummary {
        episodes: n,
        success_rate: if n == 0 {
            0.0
        } else {
            records.iter().filter(|r| r.success).count() as f64 / n as f64
        },
        mean_regrasps: stats::mean(&regrasps).unwrap_or(0.0),
        max_regrasps: records.iter().map(|r| r.regrasps).max().unwrap_or(0),
    }
}

pub fn format_closed_loop_summary(s: &ClosedLoopSummary) -> String {
    format!(
        "metric,value\nepisodes,{}\nsuccess_rate,{:.4}\nmean_regrasps,{:.4}\nmax_regrasps,{}\n",
        s.episodes, s.success_rate, s.mean_regrasps, s.max_regrasps
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Marker;

    fn truth(angles: &[f64]) -> Vec<GroundTruthFrame> {
        angles
            .iter()
            .enumerate()
            .map(|(i, &a)| GroundTruthFrame {
                frame_index: i as u64,
                angle_deg: a,
                rotating: a != 0.0,
            })
            .collect()
    }

    fn frames(n: usize) -> Vec<MarkerFrame> {
        (0..n)
            .map(|i| MarkerFrame {
                frame_index: i as u64,
                time_s: i as f64,
                markers: vec![Marker::new(0, 1.0, 1.0), Marker::new(1, 5.0, 1.0)],
            })
            .collect()
    }

    #[test]
    fn window_starts_at_true_onset() {
        let cfg = PipelineConfig::default();
        let gt = truth(&[0.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(lifting_window(&frames(5), &gt, &[0, 1], &cfg), Some((2, 5)));
        assert_eq!(lifting_window(&frames(5), &truth(&[0.0; 5]), &[0, 1], &cfg), None);
    }

    #[test]
    fn window_stops_at_detachment() {
        let cfg = PipelineConfig::default();
        let mut f = frames(6);
        for fr in &mut f[4..] {
            for m in &mut fr.markers {
                m.visible = false;
            }
        }
        let gt = truth(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(lifting_window(&f, &gt, &[0, 1], &cfg), Some((1, 4)));
    }

    #[test]
    fn perfect_and_offset_errors() {
        let t = [0.0, 3.0, 6.0, 12.0];
        assert_eq!(angle_errors(&t, &t, (1, 4)), (Some(0.0), Some(0.0)));
        let m: Vec<f64> = t.iter().map(|a| a + 2.0).collect();
        let (all, small) = angle_errors(&m, &t, (1, 4));
        assert!((all.unwrap() - 2.0).abs() < 1e-12);
        assert!((small.unwrap() - 2.0).abs() < 1e-12);
    }

    fn row(err: f64, t: Stability, p: Stability) -> SequenceMetrics {
        SequenceMetrics {
            name: "s".into(),
            n_frames: 10,
            lifting_frames: 5,
            mean_abs_angle_error_deg: Some(err),
            mean_abs_angle_error_under10_deg: Some(err),
            true_onset: Some(3),
            detected_onset: Some(4),
            onset_delay_frames: Some(1),
            true_class: t,
            predicted_class: p,
            peak_truth_deg: 8.0,
            peak_measured_deg: 8.0,
            contour_mode: false,
            latency_ms: 0.1,
        }
    }

    #[test]
    fn corpus_means_and_confusion() {
        use Stability::*;
        let s = summarize(&[row(2.0, RotationalFailure, RotationalFailure), row(4.0, StableGrasp, RotationalFailure)]);
        assert!((s.mean_abs_angle_error_deg.unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(s.confusion, [[0, 1], [0, 1]]);
        assert!((s.success_rate - 0.5).abs() < 1e-12);
        assert_eq!(s.onset_within_5_rate, Some(1.0));
        let one = summarize(&[row(2.0, RotationalFailure, RotationalFailure)]);
        assert_eq!(one.mean_abs_angle_error_deg, Some(2.0));
        assert_eq!(one.n_sequences, 1);
    }

    #[test]
    fn summary_hides_timing_by_default() {
        let s = summarize(&[row(1.0, Stability::StableGrasp, Stability::StableGrasp)]);
        assert!(!format_summary_csv(&s, false).contains("latency"));
        assert!(format_summary_csv(&s, true).contains("mean_latency_ms_per_frame"));
    }
}
