//! `surfseg`: segmentation and restoration of images on triangulated surfaces.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "surfseg", version, about = "Segment and restore images painted on triangulated surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve curves to segment a face image.
    Segment(SegmentArgs),
    /// Denoise an image region by region, with regions given by a curve network.
    Restore(RestoreArgs),
    /// Write a generated surface mesh.
    MakeSurface(MakeSurfaceArgs),
    /// Paint a synthetic face image onto a mesh.
    Paint(PaintArgs),
    /// Unforced curvature-flow runs against analytic radius laws.
    FlowTest(FlowTestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    ThreeDiscs,
    TorusStripes,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SegmentArgs {
    /// Mesh with per-face or per-vertex colors (OFF or PLY).
    #[arg(long, required_unless_present = "scenario")]
    mesh: Option<PathBuf>,
    /// Initial curve network (JSON).
    #[arg(long, conflicts_with_all = ["init_circle", "scenario"])]
    curves: Option<PathBuf>,
    /// Initial circle `cx,cy,cz,radius[,nodes]` around the surface point nearest the center.
    #[arg(long, value_delimiter = ',', num_args = 1, conflicts_with = "scenario")]
    init_circle: Option<Vec<f64>>,
    /// Built-in mesh, image and initial curves instead of input files.
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Accept meshes with boundary edges (flat test domains).
    #[arg(long)]
    allow_open: bool,
    /// Snapshot interval in steps (0: initial and final only).
    #[arg(long)]
    output_every: Option<usize>,
    /// Restoration weights applied to the final segmentation.
    #[arg(long, value_delimiter = ',')]
    restore_lambda: Option<Vec<f64>>,
    /// Check every module invariant after each step.
    #[arg(long)]
    check_invariants: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct RestoreArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Curve network defining the regions; the whole mesh is one region if omitted.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Comma-separated weights; one output file per weight.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    allow_open: bool,
    #[arg(long, default_value_t = 4)]
    n0: u32,
    #[arg(long, default_value = "direct")]
    solver: surfseg_core::SolveMethod,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SurfaceKind {
    Sphere,
    Torus,
    /// Open grid in the plane z = 0; load it with `--allow-open`.
    Plane,
    /// Closed thin slab whose top face is a plane grid.
    Slab,
}

#[derive(Debug, Args)]
struct MakeSurfaceArgs {
    #[arg(value_enum)]
    kind: SurfaceKind,
    #[arg(long)]
    out: PathBuf,
    /// Icosphere subdivision rounds.
    #[arg(long, default_value_t = 3)]
    subdiv: u32,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 2.0)]
    major: f64,
    #[arg(long, default_value_t = 1.0)]
    minor: f64,
    #[arg(long, default_value_t = 64)]
    nu: usize,
    #[arg(long, default_value_t = 32)]
    nv: usize,
    /// Grid cells per side for plane and slab.
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Half width of the plane grid.
    #[arg(long, default_value_t = 1.0)]
    half: f64,
    #[arg(long, default_value_t = 0.05)]
    thickness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pattern {
    Discs,
    Stripes,
    Hemispheres,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Euclidean,
    Spherical,
}

#[derive(Debug, Args)]
struct PaintArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, value_enum)]
    pattern: Pattern,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    allow_open: bool,
    /// Disc centers as `x,y,z` separated by `;`.
    #[arg(long)]
    centers: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_enum, default_value = "spherical")]
    metric: Metric,
    /// Color inside discs, comma-separated channels.
    #[arg(long, default_value = "0.1")]
    inside: String,
    #[arg(long, default_value = "0.9")]
    outside: String,
    /// Stripe colors separated by `;`, each comma-separated.
    #[arg(long, default_value = "1,0,0;0,1,0;0,0,1")]
    values: String,
    #[arg(long, default_value = "0.2")]
    north: String,
    #[arg(long, default_value = "0.8")]
    south: String,
    /// Standard deviation of the Gaussian noise added to the mesh's own colors.
    #[arg(long, default_value_t = 0.1)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FlowKind {
    Plane,
    Sphere,
    Equator,
    /// Node doubling and step halving on the plane plus both sphere checks.
    Study,
}

#[derive(Debug, Args)]
struct FlowTestArgs {
    #[arg(value_enum)]
    kind: FlowKind,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    nodes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.0005,0.00025")]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    tau: f64,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    r_stop: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long, default_value_t = 5)]
    subdiv: u32,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let _ = e.print();
            eprintln!("{}", serde_json::json!({ "error": { "kind": "usage", "step": null, "message": msg } }));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Segment(a) => commands::segment(a),
        Command::Restore(a) => commands::restore(a),
        Command::MakeSurface(a) => commands::make_surface(a),
        Command::Paint(a) => commands::paint(a),
        Command::FlowTest(a) => commands::flow_test(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", commands::error_line(&e));
            ExitCode::FAILURE
        }
    }
}
