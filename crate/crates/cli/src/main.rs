use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use lidar_sr::config::{ConfigError, RunConfig};
use lidar_sr::eval::{self, EvalError, MetricReport, Scope};
use lidar_sr::io::{self, IoError};
use lidar_sr::pipeline::{self, DirectorySink, DropPolicy, NodeGraph, PipelineError, SourceSpec, StreamSink};
use lidar_sr::rangeview::{pixel_of, project, unproject, PointCloud, ProjectionConfig, RangeImage};
use lidar_sr::sampling::{adjoint, apply};
use lidar_sr::segment::{ClassMap, GeometricSegmenter, LabelImage, SegmentError, Segmenter, SegmenterConfig};
use lidar_sr::solver::{self, DenoiserPrior, Init, SolverConfig, SolverError};

#[derive(Parser)]
#[command(name = "lidar-sr", version, about = "Range-view LiDAR super-resolution and segmentation")]
struct Cli {
    /// TOML run configuration; explicit flags override its values [default: built-in defaults]
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a point cloud (.bin/.pcd) to a range image (.png) or its gridded cloud (.bin/.pcd)
    Project {
        /// Point cloud (.bin/.pcd)
        input: PathBuf,
        /// Range image (.png) or gridded cloud (.bin/.pcd)
        output: PathBuf,
        /// Grid to project onto
        #[arg(long, value_enum, default_value_t = Grid::Low)]
        grid: Grid,
        /// Write PCD output as ASCII instead of binary [default: off]
        #[arg(long, default_value_t = false)]
        ascii: bool,
    },
    /// Keep the observed rows of a high-resolution scan (.png/.bin/.pcd)
    Downsample {
        /// High-resolution range image or cloud (.png/.bin/.pcd)
        input: PathBuf,
        /// Low-resolution range image (.png) or the observed points (.bin/.pcd)
        output: PathBuf,
        /// Write PCD output as ASCII instead of binary [default: off]
        #[arg(long, default_value_t = false)]
        ascii: bool,
    },
    /// Super-resolve a low-resolution scan (.png/.bin/.pcd) to the high-resolution grid
    Sr {
        /// Low-resolution range image or cloud (.png/.bin/.pcd)
        input: PathBuf,
        /// High-resolution range image (.png) or cloud (.bin/.pcd)
        output: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write PCD output as ASCII instead of binary [default: off]
        #[arg(long, default_value_t = false)]
        ascii: bool,
    },
    /// Label a high-resolution scan (.png/.bin/.pcd) and write SemanticKITTI labels
    Segment {
        /// High-resolution range image or cloud (.png/.bin/.pcd)
        input: PathBuf,
        /// Output .label file; one entry per input point, or per valid pixel (row-major) for .png input
        output: PathBuf,
        #[command(flatten)]
        segmenter: SegmenterArgs,
    },
    /// Compare a prediction with ground truth and write a JSON metric report
    Eval {
        /// Predicted range image or cloud (.png/.bin/.pcd)
        pred: PathBuf,
        /// Ground-truth range image or cloud (.png/.bin/.pcd)
        gt: PathBuf,
        /// Report path [default: stdout]
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Pixels averaged by the range metrics
        #[arg(long, value_enum, default_value_t = EvalScope::All)]
        scope: EvalScope,
        /// Predicted per-point labels (.label) for IoU [default: none]
        #[arg(long, requires = "gt_labels")]
        pred_labels: Option<PathBuf>,
        /// Ground-truth per-point labels (.label) for IoU [default: none]
        #[arg(long, requires = "pred_labels")]
        gt_labels: Option<PathBuf>,
    },
    /// Run the full streaming pipeline and write a JSON run report
    Run {
        /// Directory of .bin scans
        #[arg(required_unless_present = "synthetic", conflicts_with = "synthetic")]
        scan_dir: Option<PathBuf>,
        /// Generate this many synthetic scans instead of reading a directory [default: none]
        #[arg(long, value_name = "SCANS")]
        synthetic: Option<usize>,
        /// Seed of the first synthetic scene
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Range noise of synthetic scenes, meters
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.02)]
        noise_sigma: f64,
        /// Source rate in Hz [default: max speed, or the config file's rate]
        #[arg(long, allow_negative_numbers = true)]
        rate: Option<f64>,
        /// Stream labeled clouds as JSON lines on this localhost TCP port [default: off]
        #[arg(long)]
        serve_port: Option<u16>,
        /// Write <seq>.bin and <seq>.label per processed scan here [default: off]
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Run report path [default: stdout]
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        segmenter: SegmenterArgs,
    },
    /// Time the full processing chain on synthetic scans
    Bench {
        /// Number of scans
        #[arg(long, default_value_t = 20)]
        scans: usize,
        /// Report path [default: stdout]
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        segmenter: SegmenterArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Low,
    High,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalScope {
    All,
    /// Rows not observed by the row selection
    Unobserved,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PriorKind {
    Identity,
    Median,
    TvProx,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    InterpolateRows,
    ReplicateRows,
    AdjointZeroFill,
}

fn default_tv() -> (f64, usize) {
    match DenoiserPrior::default() {
        DenoiserPrior::TvProx { weight, inner_iters } => (weight, inner_iters),
        _ => (0.02, 10),
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Penalty weight of the splitting
    #[arg(long, allow_negative_numbers = true, default_value_t = SolverConfig::default().b)]
    b: f64,
    /// Unrolled iterations
    #[arg(long, default_value_t = SolverConfig::default().iterations)]
    iters: usize,
    /// Denoiser used as the prior step
    #[arg(long, value_enum, default_value_t = PriorKind::TvProx)]
    prior: PriorKind,
    /// Multiplier of the prior's strength; 0 disables it
    #[arg(long, allow_negative_numbers = true, default_value_t = SolverConfig::default().prior_strength)]
    prior_strength: f64,
    /// TV weight in meters (tv-prox prior)
    #[arg(long, allow_negative_numbers = true, default_value_t = default_tv().0)]
    tv_weight: f64,
    /// Dual iterations per prior step (tv-prox prior)
    #[arg(long, default_value_t = default_tv().1)]
    tv_iters: usize,
    /// Odd window size (median prior)
    #[arg(long, default_value_t = 3)]
    median_window: usize,
    /// Blend toward the median in [0, 1] (median prior)
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    median_strength: f64,
    /// Starting estimate
    #[arg(long, value_enum, default_value_t = InitKind::InterpolateRows)]
    init: InitKind,
}

#[derive(Args)]
struct SegmenterArgs {
    /// Max inclination in degrees between consecutive ground returns
    #[arg(long, default_value_t = SegmenterConfig::default().ground_angle_max)]
    ground_angle: f64,
    /// Min separation angle in degrees for neighbours to join a cluster
    #[arg(long, default_value_t = SegmenterConfig::default().cluster_angle_min)]
    cluster_angle: f64,
    /// Clusters with fewer pixels get no instance id
    #[arg(long, default_value_t = SegmenterConfig::default().min_cluster_size)]
    min_cluster_size: usize,
}

#[derive(Args)]
struct PipelineArgs {
    /// Messages buffered per edge
    #[arg(long, default_value_t = 2)]
    queue_capacity: usize,
    /// Full-queue behaviour [default: drop-oldest with --rate, block otherwise]
    #[arg(long, value_parser = parse_policy)]
    drop_policy: Option<DropPolicy>,
}

fn parse_policy(s: &str) -> Result<DropPolicy, String> {
    s.parse()
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Config(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Config(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Config(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SegmentError> for CliError {
    fn from(e: SegmentError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::PortInUse(_) | PipelineError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return report(&CliError::Usage(first));
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return report(&CliError::Usage(e.to_string())),
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    match run(cli, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    let msg = serde_json::to_string(e.message()).unwrap_or_else(|_| "\"\"".into());
    eprintln!("error: kind={} message={msg}", e.kind());
    ExitCode::from(e.code())
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn apply_solver_args(cfg: &mut SolverConfig, a: &SolverArgs, m: &ArgMatches) -> Result<(), CliError> {
    if explicit(m, "b") {
        cfg.b = a.b;
    }
    if explicit(m, "iters") {
        cfg.iterations = a.iters;
    }
    if explicit(m, "prior_strength") {
        cfg.prior_strength = a.prior_strength;
    }
    if explicit(m, "init") {
        cfg.init = match a.init {
            InitKind::InterpolateRows => Init::InterpolateRows,
            InitKind::ReplicateRows => Init::ReplicateRows,
            InitKind::AdjointZeroFill => Init::AdjointZeroFill,
        };
    }
    if explicit(m, "prior") {
        cfg.prior = match a.prior {
            PriorKind::Identity => DenoiserPrior::Identity,
            PriorKind::Median => DenoiserPrior::Median {
                window: a.median_window,
                strength: a.median_strength,
            },
            PriorKind::TvProx => DenoiserPrior::TvProx {
                weight: a.tv_weight,
                inner_iters: a.tv_iters,
            },
        };
    }
    let current = cfg.prior.name();
    let mismatch = |flag: &str, kind: &str| {
        CliError::Usage(format!("--{flag} applies to the {kind} prior, but the prior is {current}"))
    };
    let tv_flags = explicit(m, "tv_weight") || explicit(m, "tv_iters");
    let median_flags = explicit(m, "median_window") || explicit(m, "median_strength");
    match &mut cfg.prior {
        DenoiserPrior::TvProx { weight, inner_iters } => {
            if median_flags {
                return Err(mismatch("median-*", "median"));
            }
            if explicit(m, "tv_weight") {
                *weight = a.tv_weight;
            }
            if explicit(m, "tv_iters") {
                *inner_iters = a.tv_iters;
            }
        }
        DenoiserPrior::Median { window, strength } => {
            if tv_flags {
                return Err(mismatch("tv-*", "tv-prox"));
            }
            if explicit(m, "median_window") {
                *window = a.median_window;
            }
            if explicit(m, "median_strength") {
                *strength = a.median_strength;
            }
        }
        DenoiserPrior::Identity => {
            if tv_flags {
                return Err(mismatch("tv-*", "tv-prox"));
            }
            if median_flags {
                return Err(mismatch("median-*", "median"));
            }
        }
    }
    Ok(())
}

fn apply_segmenter_args(cfg: &mut SegmenterConfig, a: &SegmenterArgs, m: &ArgMatches) {
    if explicit(m, "ground_angle") {
        cfg.ground_angle_max = a.ground_angle;
    }
    if explicit(m, "cluster_angle") {
        cfg.cluster_angle_min = a.cluster_angle;
    }
    if explicit(m, "min_cluster_size") {
        cfg.min_cluster_size = a.min_cluster_size;
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Png,
    Bin,
    Pcd,
    Label,
}

fn format_of(path: &Path) -> Result<Format, CliError> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => Ok(Format::Png),
        Some("bin") => Ok(Format::Bin),
        Some("pcd") => Ok(Format::Pcd),
        Some("label") => Ok(Format::Label),
        _ => Err(CliError::Usage(format!(
            "{}: unrecognized extension (expected .png, .bin, .pcd or .label)",
            path.display()
        ))),
    }
}

fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    match format_of(path)? {
        Format::Bin => Ok(io::read_kitti_bin(path)?),
        Format::Pcd => Ok(io::read_pcd(path)?),
        _ => Err(CliError::Usage(format!("{}: expected a .bin or .pcd point cloud", path.display()))),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// A PNG range image on `cfg`'s field of view, with the PNG's own size.
fn read_png(path: &Path, cfg: &ProjectionConfig) -> Result<RangeImage, CliError> {
    let bytes = read_file(path)?;
    let (h, w) = io::range_png_size(&bytes)?;
    let cfg = ProjectionConfig { height: h, width: w, ..*cfg };
    cfg.validate().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(io::decode_range_png(&bytes, &cfg)?)
}

/// Range image from a PNG, or by projecting a cloud onto `cfg`.
fn read_image(path: &Path, cfg: &ProjectionConfig) -> Result<RangeImage, CliError> {
    match format_of(path)? {
        Format::Png => {
            let img = read_png(path, cfg)?;
            if img.height() != cfg.height || img.width() != cfg.width {
                return Err(CliError::Config(format!(
                    "{}: image is {}x{}, expected {}x{}",
                    path.display(),
                    img.height(),
                    img.width(),
                    cfg.height,
                    cfg.width
                )));
            }
            Ok(img)
        }
        _ => Ok(project(&read_cloud(path)?, cfg)),
    }
}

fn write_image(img: &RangeImage, path: &Path, ascii: bool) -> Result<(), CliError> {
    match format_of(path)? {
        Format::Png => io::export_range_png(img, path)?,
        Format::Bin => io::write_kitti_bin(&unproject(img), path)?,
        Format::Pcd => io::write_pcd(&unproject(img), path, ascii)?,
        Format::Label => {
            return Err(CliError::Usage(format!(
                "{}: range output must be .png, .bin or .pcd",
                path.display()
            )))
        }
    }
    Ok(())
}

fn write_text(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli, m: &ArgMatches) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Project {
            input,
            output,
            grid,
            ascii,
        } => {
            cfg.validate()?;
            let pc = match grid {
                Grid::Low => cfg.low_config(),
                Grid::High => cfg.high_config(),
            };
            let img = project(&read_cloud(&input)?, &pc);
            write_image(&img, &output, ascii)
        }
        Command::Downsample { input, output, ascii } => {
            cfg.validate()?;
            let sel = cfg.selection()?;
            let hi = read_image(&input, &cfg.high_config())?;
            let lo = apply(&hi, &sel).map_err(SolverError::from)?;
            match format_of(&output)? {
                Format::Png => write_image(&lo, &output, ascii),
                // back on the high grid so each point keeps its exact elevation
                _ => write_image(&adjoint(&lo, &sel).map_err(SolverError::from)?, &output, ascii),
            }
        }
        Command::Sr {
            input,
            output,
            solver,
            ascii,
        } => {
            apply_solver_args(&mut cfg.solver, &solver, m)?;
            cfg.validate()?;
            let sel = cfg.selection()?;
            let s = read_image(&input, &cfg.low_config())?;
            let (t, _) = solver::superresolve(&s, &sel, &cfg.solver)?;
            write_image(&t, &output, ascii)
        }
        Command::Segment {
            input,
            output,
            segmenter,
        } => {
            apply_segmenter_args(&mut cfg.segmenter, &segmenter, m);
            cfg.validate()?;
            if format_of(&output)? != Format::Label {
                return Err(CliError::Usage(format!("{}: labels must be written to .label", output.display())));
            }
            let hi = cfg.high_config();
            let seg = GeometricSegmenter::new(cfg.segmenter)?;
            let classes = ClassMap::default();
            let ids = match format_of(&input)? {
                Format::Png => {
                    let img = read_image(&input, &hi)?;
                    let labels = seg.segment(&img)?;
                    lidar_sr::segment::labels_to_cloud(&img, &labels)?.kitti_labels(&classes)
                }
                _ => {
                    let cloud = read_cloud(&input)?;
                    let img = project(&cloud, &hi);
                    let labels = seg.segment(&img)?;
                    point_labels(&cloud, &labels, &hi, &classes)
                }
            };
            io::write_labels(&ids, &output)?;
            Ok(())
        }
        Command::Eval {
            pred,
            gt,
            output,
            scope,
            pred_labels,
            gt_labels,
        } => {
            cfg.validate()?;
            let report = evaluate(&cfg, &pred, &gt, scope, pred_labels.as_deref(), gt_labels.as_deref())?;
            write_text(&report.to_json(), output.as_deref())
        }
        Command::Run {
            scan_dir,
            synthetic,
            seed,
            noise_sigma,
            rate,
            serve_port,
            out_dir,
            report,
            pipeline: p,
            solver,
            segmenter,
        } => {
            apply_solver_args(&mut cfg.solver, &solver, m)?;
            apply_segmenter_args(&mut cfg.segmenter, &segmenter, m);
            if rate.is_some() {
                cfg.pipeline.rate_hz = rate;
            }
            if explicit(m, "queue_capacity") {
                cfg.pipeline.queue_capacity = p.queue_capacity;
            }
            if p.drop_policy.is_some() {
                cfg.pipeline.drop_policy = p.drop_policy;
            }
            if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
                return Err(CliError::Config(format!("--noise-sigma must be >= 0, got {noise_sigma}")));
            }
            cfg.validate()?;
            let source = match (scan_dir, synthetic) {
                (Some(dir), None) => SourceSpec::Directory(dir),
                (None, Some(scans)) => SourceSpec::Synthetic { scans, seed, noise_sigma },
                _ => return Err(CliError::Usage("give either a scan directory or --synthetic".into())),
            };
            let policy = cfg.pipeline.effective_drop_policy();
            let mut graph = NodeGraph::new(policy);
            graph.queue_capacity = cfg.pipeline.queue_capacity;
            graph.projection = cfg.low_config();
            graph.selection = cfg.selection()?;
            if let Some(dir) = out_dir {
                graph = graph.with_sink(DirectorySink::new(dir)?);
            }
            let server = match serve_port {
                Some(port) => {
                    let s = Arc::new(pipeline::serve_stream(port, policy, cfg.pipeline.queue_capacity)?);
                    eprintln!("streaming on {}", s.local_addr());
                    graph = graph.with_sink(StreamSink::new(s.clone()));
                    Some(s)
                }
                None => None,
            };
            let result = pipeline::run_pipeline(source, graph, &cfg.solver, &cfg.segmenter, cfg.pipeline.rate());
            drop(server);
            let run_report = result?;
            write_text(&run_report.to_json(), report.as_deref())?;
            if run_report.errors.is_empty() {
                Ok(())
            } else {
                Err(CliError::Io(format!(
                    "{} scan(s) failed; first: {}",
                    run_report.errors.len(),
                    run_report.errors[0]
                )))
            }
        }
        Command::Bench {
            scans,
            output,
            solver,
            segmenter,
        } => {
            apply_solver_args(&mut cfg.solver, &solver, m)?;
            apply_segmenter_args(&mut cfg.segmenter, &segmenter, m);
            cfg.validate()?;
            let r = eval::bench_throughput(scans, &cfg.solver, &cfg.segmenter)?;
            let text = serde_json::to_string_pretty(&r).expect("bench report serializes");
            write_text(&text, output.as_deref())
        }
    }
}

/// Label of the pixel each point falls in; points at the origin stay
/// unlabeled.
fn point_labels(cloud: &PointCloud, labels: &LabelImage, cfg: &ProjectionConfig, classes: &ClassMap) -> Vec<u32> {
    cloud
        .points
        .iter()
        .map(|p| match pixel_of(p, cfg) {
            Ok((row, col)) => {
                let u = row * cfg.width + col;
                let inst = labels.instance.as_ref().map_or(0, |v| v[u]);
                io::pack_label(classes.to_kitti(labels.labels[u]), inst)
            }
            Err(_) => 0,
        })
        .collect()
}

fn evaluate(
    cfg: &RunConfig,
    pred: &Path,
    gt: &Path,
    scope: EvalScope,
    pred_labels: Option<&Path>,
    gt_labels: Option<&Path>,
) -> Result<MetricReport, CliError> {
    let hi = cfg.high_config();
    let load = |p: &Path| match format_of(p)? {
        Format::Png => read_png(p, &hi),
        _ => Ok(project(&read_cloud(p)?, &hi)),
    };
    let (p_img, g_img) = (load(pred)?, load(gt)?);
    let sel;
    let scope = match scope {
        EvalScope::All => Scope::All,
        EvalScope::Unobserved => {
            sel = cfg.selection()?;
            Scope::UnobservedRows(&sel)
        }
    };
    let mut report = MetricReport {
        mae: Some(eval::mae(&p_img, &g_img, scope)?),
        rmse: Some(eval::rmse(&p_img, &g_img, scope)?),
        ..Default::default()
    };
    if let (Some(pl), Some(gl)) = (pred_labels, gt_labels) {
        let classes = ClassMap::default();
        let to_image = |ids: Vec<u32>| {
            let n = ids.len();
            LabelImage {
                config: ProjectionConfig { height: 1, width: n, ..hi },
                labels: ids.into_iter().map(|v| classes.from_kitti(io::label_class(v))).collect(),
                instance: None,
            }
        };
        let (a, b) = (io::read_labels(pl)?, io::read_labels(gl)?);
        if a.len() != b.len() {
            return Err(CliError::Config(format!(
                "label files hold {} and {} entries",
                a.len(),
                b.len()
            )));
        }
        let iou = eval::iou(&to_image(a), &to_image(b))?;
        report = report.with_iou(&iou, &classes);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver_from(args: &[&str], base: SolverConfig) -> Result<SolverConfig, CliError> {
        let argv = ["lidar-sr", "sr", "in.png", "out.png"].iter().chain(args);
        let matches = Cli::command().try_get_matches_from(argv).unwrap();
        let cli = Cli::from_arg_matches(&matches).unwrap();
        let Command::Sr { solver, .. } = cli.command else { unreachable!() };
        let mut cfg = base;
        apply_solver_args(&mut cfg, &solver, matches.subcommand().unwrap().1)?;
        Ok(cfg)
    }

    #[test]
    fn extensions_pick_formats() {
        assert!(format_of(Path::new("a/scan.BIN")).unwrap() == Format::Bin);
        assert!(format_of(Path::new("x.png")).unwrap() == Format::Png);
        assert!(format_of(Path::new("x.label")).unwrap() == Format::Label);
        assert!(matches!(format_of(Path::new("x.las")), Err(CliError::Usage(_))));
        assert!(matches!(format_of(Path::new("noext")), Err(CliError::Usage(_))));
    }

    #[test]
    fn defaults_leave_the_config_alone() {
        let base = SolverConfig {
            b: 2.0,
            iterations: 9,
            ..Default::default()
        };
        assert_eq!(solver_from(&[], base).unwrap(), base);
    }

    #[test]
    fn explicit_flags_override() {
        let cfg = solver_from(&["--b", "0.25", "--tv-weight", "0.1", "--init", "replicate-rows"], SolverConfig::default()).unwrap();
        assert_eq!(cfg.b, 0.25);
        assert_eq!(cfg.init, Init::ReplicateRows);
        assert_eq!(cfg.prior, DenoiserPrior::TvProx { weight: 0.1, inner_iters: 10 });
        let cfg = solver_from(&["--prior", "median", "--median-window", "5"], SolverConfig::default()).unwrap();
        assert_eq!(cfg.prior, DenoiserPrior::Median { window: 5, strength: 1.0 });
    }

    #[test]
    fn prior_parameters_must_match_the_prior() {
        let r = solver_from(&["--prior", "identity", "--tv-iters", "3"], SolverConfig::default());
        assert!(matches!(r, Err(CliError::Usage(_))));
        let r = solver_from(&["--median-strength", "0.5"], SolverConfig::default());
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(CliError::Usage(String::new()).code(), 1);
        assert_eq!(CliError::Io(String::new()).code(), 2);
        assert_eq!(CliError::Config(String::new()).code(), 3);
        let e: CliError = SolverError::Config("b".into()).into();
        assert_eq!(e.kind(), "config");
    }
}
