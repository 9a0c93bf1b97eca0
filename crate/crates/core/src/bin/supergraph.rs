use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use supergraph::cdgc::SubsetNorm;
use supergraph::pipeline::{self, FeatureKind, Faults, GridSize, PipelineConfig};
use supergraph::Error;

#[derive(Parser)]
#[command(name = "supergraph", version, about = "Multiscale superpixel graphs, center-difference graph convolution and tree fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Soft superpixel clustering: labels.pgm, segment.json, losses.csv
    Segment(ConfigArgs),
    /// Region graph and Boruvka coarsening: hierarchy.json, scale_K.ppm
    Hierarchy(ConfigArgs),
    /// Per-scale graph convolution and tree fusion: embeddings.csv, weights.bin, fusion.json
    Embed(ConfigArgs),
    /// All stages with every artifact
    Pipeline(ConfigArgs),
    /// Run the invariant suites on built-in fixtures
    Verify(VerifyArgs),
    /// Primitive counts and timings per stage: bench.csv
    Bench(BenchArgs),
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON config; flags given alongside override its fields
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Input image (binary PPM or PGM)
    #[arg(long, short, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Superpixel grid, e.g. 32x32
    #[arg(long)]
    grid: Option<GridSize>,
    /// Clustering iterations
    #[arg(long)]
    iterations: Option<usize>,
    /// Softmax temperature of the association update
    #[arg(long)]
    temperature: Option<f64>,
    /// Weight of pixel position against appearance; derived from the grid when absent
    #[arg(long)]
    pos_scale: Option<f64>,
    /// Weight of the compactness loss
    #[arg(long)]
    lambda_compact: Option<f64>,
    /// Region counts of the coarser scales, strictly decreasing; empty for none
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    targets: Option<Vec<usize>>,
    /// Share of the center-difference term, in [0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Convolution layers per scale
    #[arg(long)]
    gamma: Option<usize>,
    /// Node feature width after the first layer
    #[arg(long)]
    hidden: Option<usize>,
    /// Separate weights per neighbor subset
    #[arg(long)]
    untied: bool,
    /// Normalization of the neighbor subsets
    #[arg(long, value_enum)]
    subset_norm: Option<NormArg>,
    /// Per-pixel appearance features
    #[arg(long, value_enum)]
    features: Option<FeatureKind>,
    /// Seed for every weight initialization
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Adjacency,
    Cardinality,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only run suites whose name contains this text
    #[arg(long)]
    filter: Option<String>,
    /// Also check the artifacts in this directory against their layouts
    #[arg(long, value_name = "DIR")]
    outputs: Option<PathBuf>,
    #[arg(long, hide = true, value_enum)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    AlphaSign,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Grids to measure; defaults to the configured grid
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<GridSize>>,
}

enum Failure {
    Verification(String),
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Format(_) => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn resolve(args: &ConfigArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            if !path.exists() {
                return Err(Failure::Usage(format!("config file not found: {}", path.display())));
            }
            PipelineConfig::load(path)?
        }
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(grid, iterations, temperature, lambda_compact, targets, alpha, gamma, hidden, features, seed, out);
    if let Some(p) = &args.input {
        cfg.input = Some(p.clone());
    }
    if let Some(s) = args.pos_scale {
        cfg.pos_scale = Some(s);
    }
    if args.untied {
        cfg.tied = false;
    }
    if let Some(n) = args.subset_norm {
        cfg.subset_norm = match n {
            NormArg::Adjacency => SubsetNorm::Adjacency,
            NormArg::Cardinality => SubsetNorm::Cardinality,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(cfg: &PipelineConfig) -> Result<(supergraph::imageio::Image, supergraph::imageio::PixelFeatureMap), Failure> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Failure::Usage("no input image given (use --input FILE)".into()))?;
    if !path.exists() {
        return Err(Failure::Usage(format!("input file not found: {}", path.display())));
    }
    let img = pipeline::load_input(cfg)?;
    let fm = pipeline::features(&img, cfg)?;
    Ok((img, fm))
}

fn timed<T>(stage: &str, f: impl FnOnce() -> supergraph::Result<T>) -> Result<T, Failure> {
    let t = Instant::now();
    let out = f()?;
    info!("{stage}: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);
    Ok(out)
}

fn self_check(dir: &Path) -> Outcome {
    let checked = pipeline::validate_outputs(dir).map_err(|e| Failure::Verification(format!("output self-check: {e}")))?;
    info!("self-check passed: {}", checked.join(", "));
    Ok(())
}

fn run_stages(cfg: &PipelineConfig, upto: Stage) -> Outcome {
    let (_, fm) = load(cfg)?;
    let out = cfg.out.as_path();
    let seg = timed("segment", || pipeline::segment(&fm, cfg))?;
    println!(
        "segment: {} regions from a {}x{} grid over {}x{} pixels",
        seg.map.n_superpixels,
        cfg.grid.w,
        cfg.grid.h,
        fm.width(),
        fm.height()
    );
    if matches!(upto, Stage::Segment | Stage::All) {
        pipeline::write_segment(out, &fm, &seg, cfg)?;
    }
    if upto == Stage::Segment {
        return self_check(out);
    }
    let hier = timed("hierarchy", || pipeline::hierarchy(&seg, cfg))?;
    let counts: Vec<String> = hier.hierarchy.scales.iter().map(|s| s.n().to_string()).collect();
    println!("hierarchy: scales {}", counts.join(" -> "));
    if matches!(upto, Stage::Hierarchy | Stage::All) {
        pipeline::write_hierarchy(out, &seg, &hier, cfg)?;
    }
    if upto == Stage::Hierarchy {
        return self_check(out);
    }
    let emb = timed("embed", || pipeline::embed(&fm, &hier, cfg))?;
    pipeline::write_embedding(out, &emb)?;
    println!("embed: {} scales, {} features per node", emb.per_scale.len(), cfg.hidden);
    match timed("fuse", || pipeline::fuse(&hier, &emb, cfg)) {
        Ok(f) => {
            pipeline::write_fusion(out, &f)?;
            println!("fuse: {} leaves, {} branches", f.tree.n_leaves(), f.tree.n_branches());
        }
        Err(Failure::Usage(msg)) if upto == Stage::Embed => {
            eprintln!("fusion skipped: {msg}");
        }
        Err(e) => return Err(e),
    }
    if upto == Stage::All {
        let mut run = serde_json::to_value(cfg).map_err(Error::from)?;
        if let Some(obj) = run.as_object_mut() {
            obj.remove("out");
        }
        let text = serde_json::to_string_pretty(&run).map_err(Error::from)?;
        let path = out.join("run.json");
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    }
    self_check(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stage {
    Segment,
    Hierarchy,
    Embed,
    All,
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let faults = Faults {
        alpha_sign: matches!(args.inject_fault, Some(FaultArg::AlphaSign)),
    };
    let results = pipeline::run_suites(&faults, args.filter.as_deref());
    print!("{}", pipeline::report(&results));
    if let Some(dir) = &args.outputs {
        if !dir.is_dir() {
            return Err(Failure::Usage(format!("output directory not found: {}", dir.display())));
        }
        self_check(dir)?;
        println!("outputs in {}: layouts ok", dir.display());
    }
    if results.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Verification("some suites failed".into()))
    }
}

fn cmd_bench(args: &BenchArgs) -> Outcome {
    let cfg = resolve(&args.config)?;
    let (img, _) = load(&cfg)?;
    let grids = args.grids.clone().unwrap_or_else(|| vec![cfg.grid]);
    let rows = pipeline::bench(&img, &cfg, &grids)?;
    let csv = pipeline::bench_csv(&rows);
    pipeline::ensure_dir(&cfg.out)?;
    let path = cfg.out.join("bench.csv");
    std::fs::write(&path, &csv).map_err(|e| Error::Io { path, source: e })?;
    print!("{csv}");
    if let (Some(p), Some(last)) = (rows.first(), rows.iter().rfind(|r| r.stage.starts_with("grid:"))) {
        println!("reduction: {} pixels -> {} nodes ({:.1}x)", p.nodes, last.nodes, p.nodes as f64 / last.nodes as f64);
    }
    Ok(())
}

fn init_threads() -> Outcome {
    if let Ok(v) = std::env::var("SUPERGRAPH_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Usage(format!("SUPERGRAPH_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Segment(a) => resolve(a).and_then(|c| run_stages(&c, Stage::Segment)),
        Command::Hierarchy(a) => resolve(a).and_then(|c| run_stages(&c, Stage::Hierarchy)),
        Command::Embed(a) => resolve(a).and_then(|c| run_stages(&c, Stage::Embed)),
        Command::Pipeline(a) => resolve(a).and_then(|c| run_stages(&c, Stage::All)),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
