//! `rotgrasp`: simulate grasps, estimate contact rotation, score corpora,
//! run regrasp episodes and measure object length from point clouds.
//!
//! Exit status is 0 on success, 1 when an input or argument is invalid and
//! 2 on any other failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rotgrasp_core::config::Settings;
use rotgrasp_core::data::{self, PointCloud};
use rotgrasp_core::eval::{self, ClosedLoopSpec, CorpusSpec, PlantKind};
use rotgrasp_core::geometry;
use rotgrasp_core::pipeline::{self, ImageSource, NoImages, PpmDirectory};
use rotgrasp_core::sim::{self, Footprint, SimObject, SimParams};

#[derive(Parser, Debug)]
#[command(name = "rotgrasp", version, about = "Tactile rotation measurement and regrasp control")]
struct Cli {
    /// Settings file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one grasp, or a labeled corpus with `--corpus`.
    Simulate(SimulateArgs),
    /// Run the pipeline over a sequence and write per-frame estimates.
    Estimate(EstimateArgs),
    /// Score every sequence with ground truth in a directory.
    Evaluate(EvaluateArgs),
    /// Run closed-loop regrasp episodes against a simulated plant.
    Regrasp(RegraspArgs),
    /// Object axis and length from a point-cloud CSV.
    Length(LengthArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FootprintKind {
    Flat,
    Blob,
}

#[derive(Args, Debug, Clone)]
struct ObjectArgs {
    /// Catalogue object (see `--list-objects`), or `wrench`.
    #[arg(long, default_value = "rod")]
    object: String,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    /// Center of gravity from the geometric center, meters.
    #[arg(long, allow_negative_numbers = true)]
    cog: Option<f64>,
    #[arg(long)]
    stability_radius: Option<f64>,
    #[arg(long, value_enum)]
    footprint: Option<FootprintKind>,
    #[arg(long)]
    footprint_width: Option<f64>,
    #[arg(long)]
    footprint_height: Option<f64>,
    #[arg(long)]
    blob_px: Option<f64>,
    #[arg(long)]
    blob_eccentricity: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    blob_axis_deg: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SimParamArgs {
    #[arg(long, default_value_t = SimParams::default().fps)]
    fps: f64,
    #[arg(long, default_value_t = SimParams::default().closure_frames)]
    closure_frames: usize,
    #[arg(long, default_value_t = SimParams::default().lift_start_frame)]
    lift_start_frame: usize,
    #[arg(long, default_value_t = SimParams::default().load_frames)]
    load_frames: usize,
    #[arg(long, default_value_t = SimParams::default().gel_shear_compliance)]
    gel_shear_compliance: f64,
    #[arg(long, default_value_t = SimParams::default().slip_rate)]
    slip_rate: f64,
    #[arg(long, default_value_t = SimParams::default().max_angle_deg)]
    max_angle_deg: f64,
    #[arg(long, default_value_t = SimParams::default().marker_noise_px)]
    marker_noise_px: f64,
    #[arg(long, default_value_t = SimParams::default().adhesion_lag_deg)]
    adhesion_lag_deg: f64,
    #[arg(long, default_value_t = SimParams::default().creep_px)]
    creep_px: f64,
    #[arg(long, default_value_t = SimParams::default().closure_dilation)]
    closure_dilation: f64,
    #[arg(long, default_value_t = SimParams::default().non_contact_attenuation)]
    non_contact_attenuation: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    slide_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    slide_y: f64,
    #[arg(long)]
    detach_frame: Option<usize>,
    #[arg(long, default_value_t = SimParams::default().grid_cols)]
    grid_cols: usize,
    #[arg(long, default_value_t = SimParams::default().grid_rows)]
    grid_rows: usize,
    #[arg(long, default_value_t = SimParams::default().grid_spacing_px)]
    grid_spacing_px: f64,
    #[arg(long, default_value_t = 90)]
    frames: usize,
}

impl SimParamArgs {
    fn params(&self, seed: u64) -> SimParams {
        SimParams {
            fps: self.fps,
            closure_frames: self.closure_frames,
            lift_start_frame: self.lift_start_frame,
            load_frames: self.load_frames,
            gel_shear_compliance: self.gel_shear_compliance,
            slip_rate: self.slip_rate,
            max_angle_deg: self.max_angle_deg,
            marker_noise_px: self.marker_noise_px,
            adhesion_lag_deg: self.adhesion_lag_deg,
            creep_px: self.creep_px,
            closure_dilation: self.closure_dilation,
            non_contact_attenuation: self.non_contact_attenuation,
            slide_px_per_frame: (self.slide_x, self.slide_y),
            detach_frame: self.detach_frame,
            grid_cols: self.grid_cols,
            grid_rows: self.grid_rows,
            grid_spacing_px: self.grid_spacing_px,
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    object: ObjectArgs,
    #[command(flatten)]
    sim: SimParamArgs,
    /// Grasp offset along the object axis, meters.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    offset: f64,
    /// Base name of the written files.
    #[arg(long, default_value = "grasp")]
    name: String,
    /// Also write one PPM image per frame.
    #[arg(long)]
    images: bool,
    /// Generate the labeled corpus instead of a single grasp.
    #[arg(long)]
    corpus: bool,
    #[arg(long, default_value_t = CorpusSpec::default().n_rotational)]
    rotational: usize,
    #[arg(long, default_value_t = CorpusSpec::default().n_stable)]
    stable: usize,
    /// Print the object catalogue and exit.
    #[arg(long)]
    list_objects: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    sequence: PathBuf,
    /// Directory of `frame_%06d.ppm` images; defaults to `<name>_frames`
    /// next to the sequence when it exists.
    #[arg(long)]
    images_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    dir: PathBuf,
    /// Add wall-clock latency to `summary.csv`.
    #[arg(long)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PlantArg {
    Oracle,
    Pipeline,
}

#[derive(Args, Debug)]
struct RegraspArgs {
    #[command(flatten)]
    object: ObjectArgs,
    #[command(flatten)]
    sim: SimParamArgs,
    #[arg(long, value_enum, default_value_t = PlantArg::Pipeline)]
    plant: PlantArg,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Keep the center of gravity fixed at `--cog` instead of drawing it.
    #[arg(long)]
    fixed_cog: bool,
}

#[derive(Args, Debug)]
struct LengthArgs {
    cloud: PathBuf,
}

/// Failure split by exit status.
enum Failure {
    Validation(anyhow::Error),
    Internal(anyhow::Error),
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Validation(e.into()))
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn build_object(a: &ObjectArgs) -> Result<SimObject, Failure> {
    let base = if a.object == "wrench" {
        sim::wrench()
    } else {
        sim::object_menu()
            .into_iter()
            .find(|o| o.name == a.object)
            .ok_or_else(|| Failure::Validation(anyhow!("unknown object `{}`", a.object)))?
    };
    let mut o = base;
    o.length = a.length.unwrap_or(o.length);
    o.mass = a.mass.unwrap_or(o.mass);
    o.cog_offset = a.cog.unwrap_or(o.cog_offset);
    o.stability_radius = a.stability_radius.unwrap_or(o.stability_radius);
    let kind = a.footprint.unwrap_or(match o.footprint {
        Footprint::Flat { .. } => FootprintKind::Flat,
        Footprint::SmallBlob { .. } => FootprintKind::Blob,
    });
    o.footprint = match (kind, o.footprint) {
        (FootprintKind::Flat, Footprint::Flat { width_px, height_px }) => Footprint::Flat {
            width_px: a.footprint_width.unwrap_or(width_px),
            height_px: a.footprint_height.unwrap_or(height_px),
        },
        (FootprintKind::Flat, _) => Footprint::Flat {
            width_px: a.footprint_width.unwrap_or(316.0),
            height_px: a.footprint_height.unwrap_or(236.0),
        },
        (FootprintKind::Blob, Footprint::SmallBlob { n_px, eccentricity, axis_deg }) => Footprint::SmallBlob {
            n_px: a.blob_px.unwrap_or(n_px),
            eccentricity: a.blob_eccentricity.unwrap_or(eccentricity),
            axis_deg: a.blob_axis_deg.unwrap_or(axis_deg),
        },
        (FootprintKind::Blob, _) => Footprint::SmallBlob {
            n_px: a.blob_px.unwrap_or(2400.0),
            eccentricity: a.blob_eccentricity.unwrap_or(3.0),
            axis_deg: a.blob_axis_deg.unwrap_or(20.0),
        },
    };
    o.validate().invalid()?;
    Ok(o)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .internal()
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .internal()
}

fn write_images(dir: &Path, source: &dyn ImageSource, n: usize) -> Result<(), Failure> {
    ensure_dir(dir)?;
    for pos in 0..n {
        if let Some(img) = source.image(pos, pos as u64).internal()? {
            data::write_ppm(&dir.join(data::ppm_file_name(pos as u64)), &img).internal()?;
        }
    }
    Ok(())
}

fn simulate(cli: &Cli, args: &SimulateArgs, settings: &Settings) -> Result<(), Failure> {
    if args.list_objects {
        println!("name,length_m,mass_kg,stability_radius_m");
        for o in sim::object_menu().into_iter().chain([sim::wrench()]) {
            println!("{},{},{},{}", o.name, o.length, o.mass, o.stability_radius);
        }
        return Ok(());
    }
    ensure_dir(&cli.out)?;
    let params = args.sim.params(cli.seed);
    params.validate().invalid()?;
    if args.corpus {
        let spec = CorpusSpec {
            n_rotational: args.rotational,
            n_stable: args.stable,
            n_frames: args.sim.frames,
            seed: cli.seed,
        };
        let entries = eval::generate_corpus(&spec, &sim::object_menu(), &params, settings.pipeline.stability_angle_deg)
            .invalid()?;
        let mut index = String::from("sequence,object,cog_offset_m,grasp_offset_m,peak_truth_deg\n");
        for e in &entries {
            let path = cli.out.join(format!("{}.seq", e.name));
            data::write_sequence(&path, &e.sim.frames, Some(&e.sim.ground_truth)).internal()?;
            if args.images {
                write_images(&data::frames_dir(&path), &e.sim.renderer, e.sim.frames.len())?;
            }
            index.push_str(&format!(
                "{},{},{:.6},{:.6},{:.4}\n",
                e.name,
                e.object.name,
                e.object.cog_offset,
                e.offset,
                e.sim.peak_angle()
            ));
        }
        write_text(&cli.out.join("corpus.csv"), &index)?;
        println!("wrote {} sequences to {}", entries.len(), cli.out.display());
        return Ok(());
    }
    let object = build_object(&args.object)?;
    let g = sim::simulate_grasp(&object, &params, args.offset, args.sim.frames).invalid()?;
    let path = cli.out.join(format!("{}.seq", args.name));
    data::write_sequence(&path, &g.frames, Some(&g.ground_truth)).internal()?;
    if args.images {
        write_images(&data::frames_dir(&path), &g.renderer, g.frames.len())?;
    }
    println!(
        "wrote {} frames to {} (peak ground truth {:.3} deg)",
        g.frames.len(),
        path.display(),
        g.peak_angle()
    );
    Ok(())
}

fn estimate(cli: &Cli, args: &EstimateArgs, settings: &Settings) -> Result<(), Failure> {
    let (frames, _) = data::read_sequence(&args.sequence).invalid()?;
    let dir = args
        .images_dir
        .clone()
        .or_else(|| Some(data::frames_dir(&args.sequence)).filter(|d| d.is_dir()));
    let out = match dir {
        Some(dir) => pipeline::run_sequence(&frames, &PpmDirectory { dir }, &settings.pipeline),
        None => pipeline::run_sequence(&frames, &NoImages, &settings.pipeline),
    }
    .invalid()?;
    ensure_dir(&cli.out)?;
    let stem = args
        .sequence
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    let path = cli.out.join(format!("{stem}_estimates.csv"));
    write_text(&path, &pipeline::format_estimates(&out.reports))?;
    println!(
        "verdict {} orientation {} peak_angle_deg {:.3} onset_frame {}",
        out.verdict.stability.as_str(),
        out.orientation.as_str(),
        out.verdict.measured_angle_deg,
        out.onset_position
            .map(|p| frames[p].frame_index.to_string())
            .unwrap_or_else(|| "-".into())
    );
    Ok(())
}

fn evaluate(cli: &Cli, args: &EvaluateArgs, settings: &Settings) -> Result<(), Failure> {
    let (rows, summary) = eval::evaluate_corpus(&args.dir, &settings.pipeline).invalid()?;
    ensure_dir(&cli.out)?;
    write_text(&cli.out.join("report.csv"), &eval::format_report_csv(&rows))?;
    let text = eval::format_summary_csv(&summary, args.timing);
    write_text(&cli.out.join("summary.csv"), &text)?;
    print!("{text}");
    Ok(())
}

fn regrasp(cli: &Cli, args: &RegraspArgs, settings: &Settings) -> Result<(), Failure> {
    let object = build_object(&args.object)?;
    let params = args.sim.params(cli.seed);
    params.validate().invalid()?;
    let spec = ClosedLoopSpec {
        cog_offset: args.fixed_cog.then_some(object.cog_offset),
        object,
        plant: match args.plant {
            PlantArg::Oracle => PlantKind::Oracle,
            PlantArg::Pipeline => PlantKind::Pipeline,
        },
        n_episodes: args.episodes,
        n_frames: args.sim.frames,
        seed: cli.seed,
    };
    let records = eval::run_closed_loop(&spec, &params, settings).internal()?;
    ensure_dir(&cli.out)?;
    write_text(&cli.out.join("episodes.csv"), &eval::format_episodes_csv(&records))?;
    write_text(&cli.out.join("episodes.txt"), &eval::format_episode_traces(&records))?;
    let text = eval::format_closed_loop_summary(&eval::summarize_closed_loop(&records));
    write_text(&cli.out.join("regrasp_summary.csv"), &text)?;
    print!("{text}");
    Ok(())
}

fn length(cli: &Cli, args: &LengthArgs, settings: &Settings) -> Result<(), Failure> {
    let cloud: PointCloud = data::read_point_cloud(&args.cloud).invalid()?;
    let g = geometry::estimate_geometry(&cloud, &settings.geometry, cli.seed).invalid()?;
    let text = format!(
        "length_m,axis_x,axis_y,center_x,center_y,plane_nx,plane_ny,plane_nz,plane_d\n\
         {:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        g.length,
        g.axis_2d.x,
        g.axis_2d.y,
        g.center_2d.x,
        g.center_2d.y,
        g.plane.normal.x,
        g.plane.normal.y,
        g.plane.normal.z,
        g.plane.offset
    );
    ensure_dir(&cli.out)?;
    write_text(&cli.out.join("length.csv"), &text)?;
    print!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let settings = match &cli.config {
        Some(p) => Settings::read(p).invalid()?,
        None => Settings::default(),
    };
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a, &settings),
        Command::Estimate(a) => estimate(cli, a, &settings),
        Command::Evaluate(a) => evaluate(cli, a, &settings),
        Command::Regrasp(a) => regrasp(cli, a, &settings),
        Command::Length(a) => length(cli, a, &settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
