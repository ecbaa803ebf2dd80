//! `coca` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or format error, 2 configuration or shape
//! error (including bad arguments), 3 numeric error or empty scored region.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coca::pnm::read_ppm;
use coca::run::{evaluate_dir, heatmap_to_file, segment_to_dir, write_scene, EvalMode};
use coca::sbc::AnchorMode;
use coca::scaling::{run_scaling, DEFAULT_WINDOW};
use coca::scene::{Background, SceneSpec, DEFAULT_BACKGROUND, DEFAULT_SECOND_BACKGROUND};
use coca::util::with_threads;
use coca::{generate_scene, CocaError, Result, RunConfig};
use serde_json::json;

const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.cfg");

#[derive(Parser)]
#[command(name = "coca", version, about = "Compactness-guided hierarchical image segmentation")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "COCA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration; the built-in default is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `anchor.mode`.
    #[arg(long, value_parser = ["compact", "random"])]
    anchor: Option<String>,
    /// Overrides `anchor.seed`; only used by random anchors.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a PPM image into slot masks and a hard label map.
    Segment {
        image: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Output directory; falls back to `output.dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a segmentation directory against a ground-truth label file.
    Eval {
        run_dir: PathBuf,
        gt: PathBuf,
        #[arg(long, default_value = "fg", value_parser = ["fg", "bg"])]
        mode: String,
    },
    /// Write the per-pixel compactness map of a fresh run as a PGM.
    Heatmap {
        image: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time full runs over square test images and fit the scaling exponent.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Window side in nodes.
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic scenes as `scene_NNN.ppm` plus `scene_NNN.lbl`.
    Scene {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 3)]
        min_objects: usize,
        #[arg(long, default_value_t = 6)]
        max_objects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Split the background into two colored halves.
        #[arg(long)]
        two_tone: bool,
    },
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::parse(DEFAULT_CONFIG)?,
    };
    let config_seed = match cfg.anchor {
        AnchorMode::Random { seed } => seed,
        AnchorMode::Compact => 0,
    };
    let seed = args.seed.unwrap_or(config_seed);
    let anchor = match (args.anchor.as_deref(), cfg.anchor) {
        (Some("compact"), _) => AnchorMode::Compact,
        (Some(_), _) | (None, AnchorMode::Random { .. }) => AnchorMode::Random { seed },
        (None, AnchorMode::Compact) => AnchorMode::Compact,
    };
    cfg = cfg.with_anchor(anchor);
    Ok(cfg)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CocaError::Numeric(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| CocaError::Io { path: path.to_path_buf(), source })
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Segment { image, run, out } => {
            let cfg = load_config(&run)?;
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| CocaError::Config("no output directory: pass --out or set output.dir".into()))?;
            let img = read_ppm(&image)?;
            let report = segment_to_dir(&img, &cfg, &out)?;
            let o = &report.output;
            println!(
                "{}: {} slots ({} anchored, {} labeled) -> {}",
                image.display(),
                o.slots(),
                o.anchored_slots(),
                o.hard_labels.iter().collect::<std::collections::BTreeSet<_>>().len(),
                out.display()
            );
        }
        Command::Eval { run_dir, gt, mode } => {
            let mode: EvalMode = mode.parse()?;
            let r = evaluate_dir(&run_dir, &gt, mode)?;
            println!("mode={} ari={:.6} msc={:.6}", mode.name(), r.ari, r.msc);
        }
        Command::Heatmap { image, run, out } => {
            let cfg = load_config(&run)?;
            let img = read_ppm(&image)?;
            let heat = heatmap_to_file(&img, &cfg, &out)?;
            let (lo, hi) = heat.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            println!("{}: compactness in [{lo:.4}, {hi:.4}] -> {}", image.display(), out.display());
        }
        Command::Bench { sizes, reps, window, out } => {
            let report = run_scaling(&sizes, reps, window)?;
            for p in &report.points {
                println!("N={:<5} median={:.6}s", p.n, p.median_secs);
            }
            match report.slope {
                Some(s) => println!("log-log slope: {s:.3}"),
                None => println!("log-log slope: n/a (needs two sizes)"),
            }
            if let Some(path) = out {
                let points: Vec<_> = report
                    .points
                    .iter()
                    .map(|p| json!({ "n": p.n, "median_secs": p.median_secs, "samples": p.samples }))
                    .collect();
                write_json(&path, &json!({ "window": report.window, "points": points, "slope": report.slope }))?;
            }
        }
        Command::Scene { out, count, size, min_objects, max_objects, seed, two_tone } => {
            let mut spec = SceneSpec::new(size, size, (min_objects, max_objects), seed);
            if two_tone {
                spec.background = Background::TwoTone(DEFAULT_BACKGROUND, DEFAULT_SECOND_BACKGROUND);
            }
            spec.validate()?;
            for i in 0..count {
                let scene = generate_scene(&spec, i)?;
                let (img, gt) = write_scene(&scene, &out, &format!("scene_{i:03}"))?;
                println!("{} {} objects={}", img.display(), gt.display(), scene.n_objects);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = with_threads(threads, move || execute(cli.command)).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
