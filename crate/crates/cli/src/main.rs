mod commands;
mod config;
mod failure;
mod manifest;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crown_dieback::merger::{DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_IOS_THRESHOLD};
use crown_dieback::tiler::DEFAULT_TILE_SIZE;

/// Tree-crown dieback analytics: tiling, merging, crown–trunk matching,
/// vegetation indices, mAP evaluation and regression.
///
/// Set DIEBACK_WORKERS to cap the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "dieback", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut an orthomosaic into overlapping tiles (and optionally clip labels to them).
    Tile(TileArgs),
    /// Filter by confidence and merge overlapping predictions into world-space crowns.
    Merge(MergeArgs),
    /// Pair crowns with surveyed trunks by greedy nearest centroid.
    Match(MatchArgs),
    /// Compute vegetation indices over crown footprints.
    Index(IndexArgs),
    /// Score predictions against ground truth (mAP, mAP50, mAP75).
    Eval(EvalArgs),
    /// Regress a crown index on field defoliation.
    Regress(RegressArgs),
    /// Compare two index tables paired by tree (R², RMSE, p).
    Agree(AgreeArgs),
    /// Generate a synthetic scene in the pipeline's input formats.
    Synth(SynthArgs),
    /// Run merge → match → index → regress for every area of a project file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct Thresholds {
    /// Drop predictions with confidence below this value.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    confidence: f64,
    /// Merge two crowns when intersection-over-smaller reaches this value.
    #[arg(long, default_value_t = DEFAULT_IOS_THRESHOLD)]
    ios: f64,
}

#[derive(Debug, Args)]
struct TileArgs {
    /// 8-bit RGB PNG orthomosaic.
    #[arg(long)]
    raster: PathBuf,
    /// World file for the raster.
    #[arg(long)]
    world: PathBuf,
    /// Mosaic-frame COCO ground truth to clip into tile-local labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Tile side in pixels.
    #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
    tile_size: u32,
    /// Fraction of a tile shared with its neighbour [default: 0.2, or 0 with --training].
    #[arg(long)]
    overlap: Option<f64>,
    /// Tiles for training: no overlap unless --overlap is given.
    #[arg(long)]
    training: bool,
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// COCO results file (predictions).
    #[arg(long)]
    predictions: PathBuf,
    /// COCO file of tile images with origin_x/origin_y; predictions on these
    /// images are lifted into the mosaic frame first.
    #[arg(long)]
    tiles: Option<PathBuf>,
    /// World file of the mosaic.
    #[arg(long)]
    world: PathBuf,
    /// Output GeoJSON of merged crowns (world coordinates).
    #[arg(long)]
    out: PathBuf,
    /// Also write merged crowns as a mosaic-frame COCO results file.
    #[arg(long)]
    pixel_out: Option<PathBuf>,
    #[command(flatten)]
    thresholds: Thresholds,
}

#[derive(Debug, Args)]
struct MatchArgs {
    /// GeoJSON crowns (world coordinates).
    #[arg(long)]
    crowns: PathBuf,
    /// Trunk survey CSV: tree_id,x,y,defoliation.
    #[arg(long)]
    trunks: PathBuf,
    /// Defoliation column is in percent rather than a fraction.
    #[arg(long)]
    percent: bool,
    /// Output CSV: tree_id,crown_id,distance,discarded.
    #[arg(long)]
    out_csv: PathBuf,
    /// Output GeoJSON of matched crowns with tree ids.
    #[arg(long)]
    out_geojson: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IndexChoice {
    Gcc,
    Exg,
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// GeoJSON crowns (world coordinates).
    #[arg(long)]
    crowns: PathBuf,
    #[arg(long)]
    raster: PathBuf,
    #[arg(long)]
    world: PathBuf,
    /// Index column(s) to fill; repeat for both.
    #[arg(long, value_enum, default_values_t = [IndexChoice::Gcc])]
    index: Vec<IndexChoice>,
    /// Output CSV: crown_id,tree_id,gcc,exg,pixel_count.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageChoice {
    Tiled,
    Orthomosaic,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Project file; evaluates every area that has ground truth.
    #[arg(long, conflicts_with_all = ["ground_truth", "predictions"])]
    config: Option<PathBuf>,
    /// COCO ground truth (single-area mode).
    #[arg(long, requires = "predictions")]
    ground_truth: Option<PathBuf>,
    /// COCO results (single-area mode).
    #[arg(long, requires = "ground_truth")]
    predictions: Option<PathBuf>,
    /// Area id reported in single-area mode.
    #[arg(long, default_value_t = 1)]
    area: u8,
    /// tiled: mean of per-tile scores; orthomosaic: merged crowns per area.
    #[arg(long, value_enum, default_value_t = StageChoice::Orthomosaic)]
    stage: StageChoice,
    /// Output CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[command(flatten)]
    thresholds: Thresholds,
}

#[derive(Debug, Args)]
struct RegressArgs {
    /// Index CSV from `index` (rows with a tree_id are used).
    #[arg(long)]
    index: PathBuf,
    /// Trunk survey CSV.
    #[arg(long)]
    trunks: PathBuf,
    #[arg(long)]
    percent: bool,
    /// Match CSV from `match`, for the residual–distance table.
    #[arg(long)]
    matches: Option<PathBuf>,
    /// Which index column is the response.
    #[arg(long, value_enum, default_value_t = IndexChoice::Gcc)]
    response: IndexChoice,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Output plot-ready CSV: tree_id,x,y,fitted,residual,distance.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AgreeArgs {
    /// Reference index CSV (x axis).
    #[arg(long)]
    a: PathBuf,
    /// Compared index CSV (y axis).
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum, default_value_t = IndexChoice::Gcc)]
    index: IndexChoice,
    /// Output JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory; also receives project.toml.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_crowns: usize,
    /// Scene side, metres.
    #[arg(long, default_value_t = 60.0)]
    extent: f64,
    /// Metres per pixel.
    #[arg(long, default_value_t = 0.03)]
    gsd: f64,
    #[arg(long, default_value_t = 1.5)]
    radius_min: f64,
    #[arg(long, default_value_t = 2.5)]
    radius_max: f64,
    #[arg(long, default_value_t = 0.0)]
    dieback_min: f64,
    #[arg(long, default_value_t = 1.0)]
    dieback_max: f64,
    /// Maximum trunk offset from the crown centroid, metres.
    #[arg(long, default_value_t = 0.5)]
    trunk_jitter: f64,
    /// Largest intersection-over-smaller between planted crowns.
    #[arg(long, default_value_t = 0.1)]
    overlap: f64,
    /// Share of crowns with a nested duplicate prediction.
    #[arg(long, default_value_t = 0.2)]
    duplicates: f64,
    #[arg(long, default_value_t = 5)]
    false_positives: usize,
    /// File name stem.
    #[arg(long, default_value = "scene")]
    stem: String,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Project file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run directory for all outputs and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Override the project's confidence threshold [project default: 0.3].
    #[arg(long)]
    confidence: Option<f64>,
    /// Override the project's IOS merge threshold [project default: 0.5].
    #[arg(long)]
    ios: Option<f64>,
}

fn init_workers() -> Result<(), failure::Failure> {
    let Ok(v) = std::env::var("DIEBACK_WORKERS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        failure::Failure::Validation(format!("DIEBACK_WORKERS={v:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| failure::Failure::Processing(format!("worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_workers().and_then(|()| match cli.command {
        Command::Tile(a) => commands::tile(a),
        Command::Merge(a) => commands::merge(a),
        Command::Match(a) => commands::match_cmd(a),
        Command::Index(a) => commands::index(a),
        Command::Eval(a) => commands::eval(a),
        Command::Regress(a) => commands::regress(a),
        Command::Agree(a) => commands::agree(a),
        Command::Synth(a) => commands::synth(a),
        Command::Pipeline(a) => commands::pipeline(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
