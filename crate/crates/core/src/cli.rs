//! The `mpifuse` command line.
//!
//! Subcommands: `plan`, `synth`, `build`, `render`, `eval`, `slice` and
//! `export-web`. Exit status is 0 on success, 1 on usage errors and 2 on
//! data errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::build::{
    build_mpi_groundtruth, build_mpi_photoconsistency, build_mpi_visible, build_psv, grid_cameras,
    heldout_cameras, load_scene, nearest_views, render_layered_scene, save_scene, synthesize_scene,
    PhotoParams, PosedImage, SynthParams, PSV_VIEWS,
};
use crate::bundle::{export_mpi_dir, import_mpi_dir, MpiMeta};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_render, epipolar_slice, lfi_render, mean_scene_disparity, Ablation, MetricReport,
};
use crate::fusion::{BlendMode, IrregularParams};
use crate::geometry::{format_pose_file, read_pose_file, Camera, Intrinsics};
use crate::image::{load_png_rgb, save_png, Image};
use crate::mpi::Mpi;
use crate::path::ViewPath;
use crate::sampling::{
    capture_plan, CapturePlanRequest, PlanTarget, DEFAULT_MAX_EMPIRICAL_DISPARITY,
};
use crate::util::write_atomic;
use crate::webexport::export_web;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mpifuse",
    version,
    about = "Novel view synthesis by blending multiplane images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capture plan for a square view plane.
    Plan(PlanArgs),
    /// Generate a layered test scene with input views and held-out targets.
    Synth(SynthArgs),
    /// Build one MPI bundle per input view.
    Build(BuildArgs),
    /// Render PNG frames along a camera path.
    Render(RenderArgs),
    /// Compare rendered frames against ground truth.
    Eval(EvalArgs),
    /// Epipolar slice of an ordered frame sequence.
    Slice(SliceArgs),
    /// Write a static viewer bundle.
    ExportWeb(ExportWebArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Horizontal field of view, degrees.
    #[arg(long)]
    pub theta_deg: f64,
    /// Side of the square view plane, meters.
    #[arg(long = "s")]
    pub side: f64,
    #[arg(long)]
    pub zmin: f64,
    /// Desired image width in pixels.
    #[arg(long, conflicts_with = "views", required_unless_present = "views")]
    pub width: Option<usize>,
    /// Desired number of views.
    #[arg(long)]
    pub views: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_MAX_EMPIRICAL_DISPARITY)]
    pub max_disparity: f64,
    /// Largest grid the user accepts.
    #[arg(long)]
    pub max_views: Option<u64>,
    /// Write `plan.txt` and `positions.csv` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 1.0)]
    pub zmin: f64,
    #[arg(long, default_value_t = 4.0)]
    pub zmax: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 48)]
    pub height: usize,
    #[arg(long, default_value_t = 60.0)]
    pub fov_deg: f64,
    /// Views per side of the capture grid.
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    /// Disparity of the nearest layer between adjacent views, pixels.
    #[arg(long, default_value_t = 32.0)]
    pub dmax: f64,
    /// Held-out target views.
    #[arg(long, default_value_t = 16)]
    pub targets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builder {
    /// Photoconsistency over a five-view plane sweep.
    Photo,
    /// Exact slices from a synthetic scene (`--scene`).
    GroundTruth,
    /// Exact slices restricted to what the reference view sees.
    Visible,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub poses: PathBuf,
    /// Directory of input PNGs, one per pose in name order.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub planes: usize,
    #[arg(long)]
    pub zmin: f64,
    #[arg(long)]
    pub zmax: f64,
    #[arg(long, value_enum, default_value_t = Builder::Photo)]
    pub builder: Builder,
    /// Shorthand for `--builder ground-truth`.
    #[arg(long)]
    pub ground_truth: bool,
    /// Scene directory written by `synth`.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = crate::build::DEFAULT_TEMPERATURE)]
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlendArg {
    Irregular,
    Grid,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    #[arg(long, value_enum, default_value_t = BlendArg::Irregular)]
    pub blend: BlendArg,
    /// Neighbors blended in irregular mode.
    #[arg(long, default_value_t = crate::fusion::DEFAULT_IRREGULAR_NEIGHBORS)]
    pub neighbors: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Directory of MPI bundles written by `build`.
    #[arg(long)]
    pub mpis: PathBuf,
    /// Pose file of path keyframes.
    #[arg(long)]
    pub path: PathBuf,
    /// Frames per path segment.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub blend: BlendArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Full,
    Single,
    Average,
    Lfi,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// MPI bundles; also supply depth bounds and blend inputs for `lfi`.
    #[arg(long)]
    pub mpis: Option<PathBuf>,
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Ground-truth frames `frame_0000.png`, ...
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Full)]
    pub mode: EvalMode,
    /// Source images for `lfi`.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Source poses for `lfi`.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Depth bounds for `lfi` without `--mpis`.
    #[arg(long)]
    pub zmin: Option<f64>,
    #[arg(long)]
    pub zmax: Option<f64>,
    /// Plane count for the irregular falloff without `--mpis`.
    #[arg(long, default_value_t = 32)]
    pub planes: usize,
    /// Metric CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write rendered frames here.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[command(flatten)]
    pub blend: BlendArgs,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    /// Directory of ordered frames.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub row: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportWebArgs {
    #[arg(long)]
    pub mpis: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub blend: BlendArgs,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Parses `args` (program name first), runs the command, returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Plan(a) => plan(a),
        Command::Synth(a) => synth(a),
        Command::Build(a) => build(a),
        Command::Render(a) => render(a),
        Command::Eval(a) => eval(a),
        Command::Slice(a) => slice(a),
        Command::ExportWeb(a) => export(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:04}.png")
}

fn mpi_dir_name(index: usize) -> String {
    format!("mpi_{index:04}")
}

fn view_name(index: usize) -> String {
    format!("view_{index:04}.png")
}

/// Files in `dir` with extension `ext`, sorted by name.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn load_mpis(dir: &Path) -> Result<(Vec<Mpi>, Vec<MpiMeta>)> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .is_some_and(|n| n.to_string_lossy().starts_with("mpi_"))
        })
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::invalid(format!(
            "no mpi_* bundles in {}",
            dir.display()
        )));
    }
    let loaded = subdirs
        .iter()
        .map(import_mpi_dir)
        .collect::<Result<Vec<_>>>()?;
    Ok(loaded.into_iter().unzip())
}

fn blend_mode(args: &BlendArgs, focal_px: f64, planes: usize, z_min: f64) -> BlendMode {
    match args.blend {
        BlendArg::Grid => BlendMode::GridBilinear,
        BlendArg::Irregular => {
            let mut p = IrregularParams::new(focal_px, planes, z_min);
            p.neighbors = args.neighbors;
            BlendMode::IrregularExponential(p)
        }
    }
}

fn mpi_blend_mode(args: &BlendArgs, mpis: &[Mpi], metas: &[MpiMeta]) -> BlendMode {
    let m = &mpis[0];
    blend_mode(
        args,
        m.camera().intrinsics.focal_px,
        m.plane_count(),
        metas[0].z_min,
    )
}

fn load_posed_images(poses: &Path, images: &Path) -> Result<Vec<PosedImage>> {
    let cams = read_pose_file(poses)?;
    let files = list_files(images, "png")?;
    if files.len() != cams.len() {
        return Err(Error::invalid(format!(
            "{} poses but {} PNG files in {}",
            cams.len(),
            files.len(),
            images.display()
        )));
    }
    files
        .iter()
        .zip(cams)
        .map(|(f, c)| PosedImage::new(load_png_rgb(f)?, c))
        .collect()
}

fn path_cameras(path: &Path, samples: usize) -> CliResult<Vec<Camera>> {
    if samples == 0 {
        return usage("--samples must be at least 1");
    }
    let keys = read_pose_file(path)?;
    Ok(ViewPath::new(keys, samples)?.cameras()?)
}

fn plan(a: &PlanArgs) -> CliResult<()> {
    let target = match (a.width, a.views) {
        (Some(w), None) => PlanTarget::Width(w),
        (None, Some(n)) => PlanTarget::Views(n),
        _ => return usage("give exactly one of --width and --views"),
    };
    let mut req = CapturePlanRequest::new(a.theta_deg.to_radians(), a.side, a.zmin, target);
    req.max_disparity = a.max_disparity;
    req.max_views = a.max_views;
    let plan = capture_plan(&req)?;
    let text = plan.to_key_values();
    print!("{text}");
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_atomic(&dir.join("plan.txt"), text.as_bytes())?;
        write_atomic(&dir.join("positions.csv"), plan.positions_csv().as_bytes())?;
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    if a.grid < 2 {
        return usage("--grid must be at least 2");
    }
    if !(a.dmax > 0.0) {
        return usage("--dmax must be positive");
    }
    let intr = Intrinsics::from_fov(a.fov_deg.to_radians(), a.width, a.height)?;
    let spacing = a.dmax * a.zmin / intr.focal_px;
    let cams = grid_cameras(intr, a.grid, spacing)?;
    let targets = heldout_cameras(intr, a.grid, spacing, a.targets, a.seed)?;
    let params = SynthParams {
        layers: a.layers,
        z_min: a.zmin,
        z_max: a.zmax,
        seed: a.seed,
        ..SynthParams::default()
    };
    let mut framed = cams.clone();
    framed.extend_from_slice(&targets);
    let scene = synthesize_scene(&params, &framed)?;

    create_dir(&a.out)?;
    save_scene(&scene, a.out.join("scene"))?;
    write_atomic(&a.out.join("poses.txt"), format_pose_file(&cams).as_bytes())?;
    write_atomic(
        &a.out.join("targets.txt"),
        format_pose_file(&targets).as_bytes(),
    )?;
    for (dir, set, name) in [
        ("images", &cams, view_name as fn(usize) -> String),
        ("truth", &targets, frame_name),
    ] {
        let dir = a.out.join(dir);
        create_dir(&dir)?;
        set.par_iter()
            .enumerate()
            .map(|(i, c)| save_png(&render_layered_scene(&scene, c), dir.join(name(i))))
            .collect::<Result<()>>()?;
    }
    let meta = format!(
        "z_min={}\nz_max={}\nspacing={}\nfocal_px={}\ngrid={}\n",
        a.zmin, a.zmax, spacing, intr.focal_px, a.grid
    );
    write_atomic(&a.out.join("synth.txt"), meta.as_bytes())?;
    Ok(())
}

fn build(a: &BuildArgs) -> CliResult<()> {
    let builder = if a.ground_truth {
        Builder::GroundTruth
    } else {
        a.builder
    };
    let cams = read_pose_file(&a.poses)?;
    if cams.is_empty() {
        return Err(Error::invalid("pose file lists no cameras").into());
    }
    create_dir(&a.out)?;
    let source;
    let mpis: Vec<Mpi> = match builder {
        Builder::GroundTruth | Builder::Visible => {
            let Some(scene_dir) = &a.scene else {
                return usage("ground-truth builders need --scene");
            };
            let scene = load_scene(scene_dir)?;
            source = if builder == Builder::Visible {
                "visible"
            } else {
                "ground-truth"
            };
            cams.par_iter()
                .map(|c| {
                    if builder == Builder::Visible {
                        build_mpi_visible(&scene, c, a.planes, a.zmin, a.zmax)
                    } else {
                        build_mpi_groundtruth(&scene, c, a.planes, a.zmin, a.zmax)
                    }
                })
                .collect::<Result<_>>()?
        }
        Builder::Photo => {
            let Some(images) = &a.images else {
                return usage("the photo builder needs --images");
            };
            let views = load_posed_images(&a.poses, images)?;
            if views.len() < 2 {
                return Err(Error::invalid("the photo builder needs at least two views").into());
            }
            source = "photo";
            let params = PhotoParams {
                temperature: a.temperature,
            };
            (0..cams.len())
                .map(|r| {
                    let idx = nearest_views(&cams, r, PSV_VIEWS);
                    let sources: Vec<PosedImage> = idx.iter().map(|&i| views[i].clone()).collect();
                    let psv = build_psv(
                        &cams[r],
                        &sources,
                        a.planes,
                        a.zmin,
                        a.zmax,
                        sources.len() < PSV_VIEWS,
                    )?;
                    build_mpi_photoconsistency(&psv, &params)
                })
                .collect::<Result<_>>()?
        }
    };
    for (i, mpi) in mpis.iter().enumerate() {
        let mut meta = MpiMeta::for_mpi(mpi, source);
        meta.z_min = a.zmin;
        meta.z_max = a.zmax;
        let dir = a.out.join(mpi_dir_name(i));
        create_dir(&dir)?;
        export_mpi_dir(mpi, &meta, &dir)?;
    }
    log::info!("built {} MPIs with {} planes", mpis.len(), a.planes);
    Ok(())
}

fn write_frames(dir: &Path, frames: &[Image<f64>]) -> Result<()> {
    create_dir(dir)?;
    frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| save_png(f, dir.join(frame_name(i))))
        .collect()
}

fn render(a: &RenderArgs) -> CliResult<()> {
    let (mpis, metas) = load_mpis(&a.mpis)?;
    let mode = mpi_blend_mode(&a.blend, &mpis, &metas);
    let cams = path_cameras(&a.path, a.samples)?;
    let frames = cams
        .par_iter()
        .map(|c| Ok(crate::fusion::render_novel_view(&mpis, c, &mode)?.rgb))
        .collect::<Result<Vec<_>>>()?;
    write_frames(&a.out, &frames)?;
    Ok(())
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let cams = path_cameras(&a.path, a.samples)?;
    let loaded = a.mpis.as_deref().map(load_mpis).transpose()?;
    let frames: Vec<Image<f64>> = match a.mode {
        EvalMode::Lfi => {
            let (Some(images), Some(poses)) = (&a.images, &a.poses) else {
                return usage("--mode lfi needs --images and --poses");
            };
            let sources = load_posed_images(poses, images)?;
            let (z_min, z_max, planes) = match (&loaded, a.zmin, a.zmax) {
                (_, Some(lo), Some(hi)) => (lo, hi, a.planes),
                (Some((m, meta)), _, _) => (meta[0].z_min, meta[0].z_max, m[0].plane_count()),
                _ => return usage("--mode lfi needs --zmin/--zmax or --mpis"),
            };
            let mode = blend_mode(
                &a.blend,
                sources[0].camera.intrinsics.focal_px,
                planes,
                z_min,
            );
            let disp = mean_scene_disparity(z_min, z_max);
            cams.par_iter()
                .map(|c| lfi_render(&sources, c, disp, &mode))
                .collect::<Result<_>>()?
        }
        mode => {
            let Some((mpis, metas)) = &loaded else {
                return usage("this mode needs --mpis");
            };
            let blend = mpi_blend_mode(&a.blend, mpis, metas);
            let ablation = match mode {
                EvalMode::Single => Ablation::Single,
                EvalMode::Average => Ablation::Average,
                _ => Ablation::Full,
            };
            cams.par_iter()
                .map(|c| ablation_render(mpis, c, ablation, &blend))
                .collect::<Result<_>>()?
        }
    };
    if let Some(dir) = &a.frames {
        write_frames(dir, &frames)?;
    }
    let mut report = MetricReport::default();
    for (i, f) in frames.iter().enumerate() {
        let truth = load_png_rgb(a.truth.join(frame_name(i)))?;
        report.push(i, f, &truth)?;
    }
    let csv = report.to_csv();
    match &a.out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    eprintln!(
        "mean psnr={:.4} ssim={:.4}",
        report.mean_psnr(),
        report.mean_ssim()
    );
    Ok(())
}

fn slice(a: &SliceArgs) -> CliResult<()> {
    let files = list_files(&a.frames, "png")?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no PNG frames in {}", a.frames.display())).into());
    }
    let frames = files.iter().map(load_png_rgb).collect::<Result<Vec<_>>>()?;
    save_png(&epipolar_slice(&frames, a.row)?, &a.out)?;
    Ok(())
}

fn export(a: &ExportWebArgs) -> CliResult<()> {
    let (mpis, metas) = load_mpis(&a.mpis)?;
    let mode = mpi_blend_mode(&a.blend, &mpis, &metas);
    create_dir(&a.out)?;
    export_web(&mpis, &mode, &a.out)?;
    Ok(())
}
