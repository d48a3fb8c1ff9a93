//! Command-line front end: edge extraction, circle detection, synthetic
//! scene generation, and suite benchmarking.
//!
//! Exit codes: 0 success, 1 I/O or configuration failure, 2 no circles
//! (too few edge points, no feasible candidates, or an empty result),
//! 3 benchmark assertion unmet.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use circdet::{
    detect_edge_map, detect_edges, detect_image, realize_scene, render_overlay, run_benchmark,
    BenchSuite, CircleStyle, DetectionResult, DetectorConfig, EdgeConfig, EdgeMap, GrayImage,
    SceneSpec, TruthCircle,
};

#[derive(Parser)]
#[command(name = "circdet", version, about = "Circle detection on noisy images")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract a binary edge map from a grayscale image
    Edges(EdgesArgs),
    /// Detect circles in an image or a .pbm edge map
    Detect(DetectArgs),
    /// Draw a synthetic scene with known circle parameters
    Synth(SynthArgs),
    /// Run a benchmark suite of seeded detection trials
    Bench(BenchArgs),
}

#[derive(Args)]
struct EdgeFlags {
    /// Gaussian blur sigma
    #[arg(long)]
    blur_sigma: Option<f64>,
    /// Weak-edge threshold, fraction of the gradient peak
    #[arg(long)]
    low_thresh: Option<f64>,
    /// Strong-edge threshold, fraction of the gradient peak
    #[arg(long)]
    high_thresh: Option<f64>,
}

#[derive(Args)]
struct DetectFlags {
    #[command(flatten)]
    edge: EdgeFlags,
    /// Fraction of edge points sampled for triplet candidates
    #[arg(long)]
    fraction: Option<f64>,
    /// Smallest admissible radius, pixels
    #[arg(long)]
    r_min: Option<f64>,
    /// Largest admissible radius, pixels
    #[arg(long)]
    r_max: Option<f64>,
    /// Distinctiveness sensitivity: threshold = (r_max - r_min) / s
    #[arg(long)]
    sensitivity: Option<f64>,
    /// Learning rate
    #[arg(long)]
    theta: Option<f64>,
    /// Absolute cap on learning iterations
    #[arg(long)]
    k_cap: Option<usize>,
    /// Stop once the top action probability reaches this value
    #[arg(long)]
    p_stop: Option<f64>,
    /// Acceptance cutoff divisor: keep actions with p >= p_top / divisor
    #[arg(long)]
    pr_divisor: Option<f64>,
    /// Cap on the candidate set size
    #[arg(long)]
    action_cap: Option<usize>,
    /// Largest out-of-bounds perimeter fraction a candidate may have
    #[arg(long)]
    max_clip_fraction: Option<f64>,
    /// Discard accepted circles whose support is below this value
    #[arg(long)]
    beta_accept: Option<f64>,
    /// Stop learning once a selected action reaches this support
    #[arg(long)]
    beta_min_solution: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file with flag-named keys; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Config-file counterpart of the flags; keys match flag spelling.
#[derive(Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    blur_sigma: Option<f64>,
    low_thresh: Option<f64>,
    high_thresh: Option<f64>,
    fraction: Option<f64>,
    r_min: Option<f64>,
    r_max: Option<f64>,
    sensitivity: Option<f64>,
    theta: Option<f64>,
    k_cap: Option<usize>,
    p_stop: Option<f64>,
    pr_divisor: Option<f64>,
    action_cap: Option<usize>,
    max_clip_fraction: Option<f64>,
    beta_accept: Option<f64>,
    beta_min_solution: Option<f64>,
    seed: Option<u64>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn merge_edge(flags: &EdgeFlags, file: &FileConfig) -> EdgeConfig {
    let mut cfg = EdgeConfig::default();
    if let Some(v) = flags.blur_sigma.or(file.blur_sigma) {
        cfg.blur_sigma = v;
    }
    if let Some(v) = flags.low_thresh.or(file.low_thresh) {
        cfg.low_thresh = v;
    }
    if let Some(v) = flags.high_thresh.or(file.high_thresh) {
        cfg.high_thresh = v;
    }
    cfg
}

fn merge_detector(flags: &DetectFlags, file: &FileConfig) -> DetectorConfig {
    let mut cfg = DetectorConfig {
        edge: merge_edge(&flags.edge, file),
        ..DetectorConfig::default()
    };
    if let Some(v) = flags.fraction.or(file.fraction) {
        cfg.fraction = v;
    }
    if let Some(v) = flags.r_min.or(file.r_min) {
        cfg.r_min = v;
    }
    if let Some(v) = flags.r_max.or(file.r_max) {
        cfg.r_max = v;
    }
    if let Some(v) = flags.sensitivity.or(file.sensitivity) {
        cfg.sensitivity = v;
    }
    if let Some(v) = flags.theta.or(file.theta) {
        cfg.theta = v;
    }
    if let Some(v) = flags.k_cap.or(file.k_cap) {
        cfg.k_cap = v;
    }
    if let Some(v) = flags.p_stop.or(file.p_stop) {
        cfg.p_stop = v;
    }
    if let Some(v) = flags.pr_divisor.or(file.pr_divisor) {
        cfg.pr_divisor = v;
    }
    if let Some(v) = flags.action_cap.or(file.action_cap) {
        cfg.action_cap = v;
    }
    if let Some(v) = flags.max_clip_fraction.or(file.max_clip_fraction) {
        cfg.max_clip_fraction = v;
    }
    if let Some(v) = flags.beta_accept.or(file.beta_accept) {
        cfg.beta_accept = v;
    }
    if let Some(v) = flags.beta_min_solution.or(file.beta_min_solution) {
        cfg.beta_min_solution = Some(v);
    }
    cfg
}

#[derive(Args)]
struct EdgesArgs {
    /// Input image (PGM or PNG)
    input: PathBuf,
    /// Output edge map (.pbm); a JSON sidecar lands next to it
    output: PathBuf,
    #[command(flatten)]
    edge: EdgeFlags,
    /// JSON config file with flag-named keys; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Input image (PGM/PNG) or edge map (PBM)
    input: PathBuf,
    #[command(flatten)]
    flags: DetectFlags,
    /// Write the result JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an annotated copy of the input with detected circles drawn
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Include wall-clock timing in the JSON (off keeps output byte-stable)
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output image path (PGM or PNG)
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON path (default: <out>.truth.json)
    #[arg(long)]
    truth_out: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, default_value_t = 3)]
    circles: usize,
    /// Smallest drawn radius
    #[arg(long, default_value_t = 20)]
    r_lo: u32,
    /// Largest drawn radius
    #[arg(long, default_value_t = 80)]
    r_hi: u32,
    /// Minimum pairwise center distance
    #[arg(long, default_value_t = 0.0)]
    min_sep: f64,
    /// Fraction of circles clipped by the image border
    #[arg(long, default_value_t = 0.0)]
    partial: f64,
    #[arg(long, value_enum, default_value_t = StyleArg::Filled)]
    style: StyleArg,
    /// Ring stroke width (with --style ring)
    #[arg(long, default_value_t = 3)]
    thickness: u32,
    /// Salt & pepper level in [0, 1]
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Filled,
    Ring,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite description (JSON)
    suite: PathBuf,
    #[arg(long, default_value_t = 35)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Write the report JSON here (the table always goes to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep wall-clock statistics in the outputs
    #[arg(long)]
    timings: bool,
    /// Fail (exit 3) if any input's success rate drops below this
    #[arg(long)]
    assert_sr: Option<f64>,
    /// Fail (exit 3) if any input's mean multiple error exceeds this
    #[arg(long)]
    assert_me: Option<f64>,
}

fn main() -> ExitCode {
    // Die quietly when the read end of a pipe closes (`circdet ... | head`)
    // instead of panicking mid-print; Rust ignores SIGPIPE by default.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let run = match cli.cmd {
        Cmd::Edges(a) => cmd_edges(a),
        Cmd::Detect(a) => cmd_detect(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Detection dead ends get their own exit code so scripts can tell
/// "nothing found" from broken input.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<circdet::Error>() {
        Some(circdet::Error::TooFewEdgePoints { .. })
        | Some(circdet::Error::NoFeasibleActions) => 2,
        _ => 1,
    }
}

fn cmd_edges(args: EdgesArgs) -> Result<u8> {
    let file = FileConfig::load(args.config.as_deref())?;
    let cfg = merge_edge(&args.edge, &file);
    cfg.validate()?;
    let img = GrayImage::load(&args.input)?;
    let edges = detect_edges(&img, &cfg)?;
    edges.save(&args.output)?;
    println!("{}", edges.count());
    Ok(0)
}

fn cmd_detect(args: DetectArgs) -> Result<u8> {
    let file = FileConfig::load(args.flags.config.as_deref())?;
    let cfg = merge_detector(&args.flags, &file);
    cfg.validate()?;
    let seed = args.flags.seed.or(file.seed).unwrap_or(0);

    let magic = fs::read(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let (result, base): (DetectionResult, GrayImage) = if magic.starts_with(b"P4") {
        let edges = EdgeMap::load(&args.input)?;
        let res = detect_edge_map(&edges, &cfg, seed)?;
        (res, edges.to_gray(255, 0))
    } else {
        let img = GrayImage::load(&args.input)?;
        let res = detect_image(&img, &cfg, seed)?;
        (res, img)
    };

    let result = if args.timings {
        result
    } else {
        result.without_timing()
    };
    let json = result.to_json_pretty();
    match &args.out {
        Some(path) => fs::write(path, &json)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{json}"),
    }
    if let Some(path) = &args.overlay {
        render_overlay(&base, &result.circles).save(path)?;
    }
    if result.circles.is_empty() {
        eprintln!("no circles accepted");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_synth(args: SynthArgs) -> Result<u8> {
    let spec = SceneSpec {
        width: args.width,
        height: args.height,
        n_circles: args.circles,
        r_lo: args.r_lo,
        r_hi: args.r_hi,
        min_separation: args.min_sep,
        partial_fraction: args.partial,
        style: match args.style {
            StyleArg::Filled => CircleStyle::Filled,
            StyleArg::Ring => CircleStyle::Ring {
                thickness: args.thickness,
            },
        },
        noise: args.noise,
        ..SceneSpec::default()
    };
    let scene = realize_scene(&spec, args.seed)?;
    scene.image.save(&args.out)?;

    let truth_path = args
        .truth_out
        .clone()
        .unwrap_or_else(|| sibling_with_suffix(&args.out, ".truth.json"));
    let circles: Vec<TruthCircle> = scene
        .circles
        .iter()
        .map(|&(x, y, r)| TruthCircle { x, y, r })
        .collect();
    let truth = serde_json::json!({ "circles": circles, "noise": scene.noise_level });
    let mut text = serde_json::to_string_pretty(&truth)?;
    text.push('\n');
    fs::write(&truth_path, text)
        .with_context(|| format!("writing {}", truth_path.display()))?;
    println!("{} circles -> {}", scene.circles.len(), truth_path.display());
    Ok(0)
}

fn sibling_with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.suite)
        .with_context(|| format!("reading suite {}", args.suite.display()))?;
    let suite: BenchSuite = serde_json::from_str(&text)
        .with_context(|| format!("parsing suite {}", args.suite.display()))?;
    let report = run_benchmark(&suite, args.trials, args.base_seed)?;
    let report = if args.timings {
        report
    } else {
        report.strip_timings()
    };

    print!("{}", report.to_table());
    if let Some(path) = &args.out {
        fs::write(path, report.to_json_pretty())
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let mut violations = Vec::new();
    for e in &report.entries {
        if let Some(min_sr) = args.assert_sr {
            if e.sr < min_sr {
                violations.push(format!("{}: SR {} < {}", e.name, e.sr, min_sr));
            }
        }
        if let Some(max_me) = args.assert_me {
            if e.me_mean > max_me {
                violations.push(format!("{}: mean ME {:.4} > {}", e.name, e.me_mean, max_me));
            }
        }
    }
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("assertion failed: {v}");
        }
        return Ok(3);
    }
    Ok(0)
}
