//! `dentmesh`: batch front end for the dentmesh toolkit.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
//! Failures print one JSON line `{"error": {"kind", "message"}}` on stderr.

mod commands;
mod error;
mod files;
mod options;
mod pipeline;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult, EXIT_USAGE};
use crate::options::{AugmentArgs, RigArgs, SimplifyArgs};

#[derive(Parser, Debug)]
#[command(name = "dentmesh", version, about = "Boundary-preserving geometry processing for labeled dental scan meshes")]
struct Cli {
    /// Worker threads; 0 uses one per core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// More log output on stderr (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic labeled crown-on-slab mesh.
    Demo(DemoArgs),
    /// Simplify a mesh with QEM or curvature-weighted selective collapse.
    Simplify(SimplifyCmd),
    /// Mean curvature per vertex, exported as a colored PLY.
    Curvature(CurvatureArgs),
    /// Detect label-boundary points and report their density.
    Boundary(BoundaryArgs),
    /// Render a mesh from an upper-hemisphere camera rig.
    Render(RenderCmd),
    /// Project mesh vertices into rendered views (JSON lines per view).
    Project(ProjectArgs),
    /// Fuse per-view class scores onto points and vote labels.
    Fuse(FuseArgs),
    /// Per-class IoU, mIoU and boundary IoU of predicted labels.
    Evaluate(EvaluateArgs),
    /// Seeded random translation and rotation.
    Augment(AugmentCmd),
    /// Run every stage end to end from a TOML config.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// Output mesh (.ply or .obj).
    pub output: PathBuf,
    /// About 3k vertices instead of 50k.
    #[arg(long)]
    pub small: bool,
    /// Graft a non-manifold fin and bowtie vertex onto the model.
    #[arg(long)]
    pub bowtie: bool,
    /// Seed of the grid and label jitter.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write ASCII instead of binary PLY.
    #[arg(long)]
    pub ascii: bool,
}

#[derive(Args, Debug)]
pub struct SimplifyCmd {
    /// Input mesh (.ply or .obj).
    pub input: PathBuf,
    /// Output mesh (.ply or .obj).
    pub output: PathBuf,
    #[command(flatten)]
    pub params: SimplifyArgs,
    /// TOML file with simplification keys; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Statistics JSON [default: <output stem>.stats.json].
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Split non-manifold vertices before simplifying.
    #[arg(long)]
    pub repair: bool,
}

#[derive(Args, Debug)]
pub struct CurvatureArgs {
    /// Input mesh (.ply or .obj).
    pub input: PathBuf,
    /// Colored PLY output.
    pub output: PathBuf,
    /// Also write the raw per-vertex values as JSON.
    #[arg(long)]
    pub values: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundaryArgs {
    /// Labeled input mesh (.ply or .obj).
    pub input: PathBuf,
    /// Neighbours examined per point.
    #[arg(long, default_value_t = dentmesh::boundary::DEFAULT_K)]
    pub k: usize,
    /// Boundary neighbours averaged by the density metric.
    #[arg(long, default_value_t = dentmesh::boundary::DEFAULT_M)]
    pub m: usize,
    /// Colored PLY marking boundary points.
    #[arg(long)]
    pub colored: Option<PathBuf>,
    /// Write the density report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RenderCmd {
    /// Input mesh (.ply or .obj).
    pub input: PathBuf,
    /// Output directory for views, rig.json and the rendered scene mesh.
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub rig: RigArgs,
    /// Render the mesh as given instead of in its principal frame.
    #[arg(long)]
    pub no_align: bool,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Directory written by `render`.
    pub views: PathBuf,
    /// Mesh whose vertices are projected [default: <views>/scene.ply].
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Output JSON lines [default: stdout].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Visibility depth tolerance [default: 1e-3 of each view's depth range].
    #[arg(long)]
    pub depth_epsilon: Option<f64>,
    /// Decide visibility by depth alone.
    #[arg(long)]
    pub no_id_match: bool,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    /// Directory written by `render`.
    pub views: PathBuf,
    /// Output directory for features.bin and predicted_labels.json.
    pub out_dir: PathBuf,
    /// Paint one-hot score maps from the mesh labels.
    #[arg(long, conflicts_with = "scores", required_unless_present = "scores")]
    pub oracle: bool,
    /// Directory of view_NNN.scores or view_NNN.labels.png files.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Mesh whose vertices receive scores [default: <views>/scene.ply].
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Softmax each pixel's scores before averaging.
    #[arg(long)]
    pub softmax: bool,
    /// Visibility depth tolerance [default: 1e-3 of each view's depth range].
    #[arg(long)]
    pub depth_epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Mesh giving point positions (and ground truth unless --gt).
    pub mesh: PathBuf,
    /// Predicted labels: JSON array, {"labels": [...]} or labeled mesh.
    pub pred: PathBuf,
    /// Ground-truth labels in the same forms [default: the mesh labels].
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Neighbours for boundary detection.
    #[arg(long, default_value_t = dentmesh::boundary::DEFAULT_K)]
    pub k: usize,
    /// Write the report here as well as to stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AugmentCmd {
    /// Input mesh (.ply or .obj).
    pub input: PathBuf,
    /// Output mesh; metadata goes to <stem>.augment.json beside it.
    pub output: PathBuf,
    #[command(flatten)]
    pub params: AugmentArgs,
    /// TOML file with augmentation keys; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Pipeline TOML config.
    pub config: PathBuf,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::runtime("threads", e.to_string()))?;
    }
    match cli.command {
        Command::Demo(a) => commands::demo(a),
        Command::Simplify(a) => commands::simplify(a),
        Command::Curvature(a) => commands::curvature(a),
        Command::Boundary(a) => commands::boundary(a),
        Command::Render(a) => commands::render(a),
        Command::Project(a) => commands::project(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Augment(a) => commands::augment(a),
        Command::Pipeline(a) => pipeline::run(&a.config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let message: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let message = message.join(" ");
            let message = message.strip_prefix("error: ").unwrap_or(&message);
            eprintln!("{}", CliError::usage("usage", message).to_json_line());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.code)
        }
    }
}
