mod dataset;
mod plots;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rppg_core::eval::{format_table, metrics, run_ablation};
use rppg_core::fusion::Periodicity;
use rppg_core::pipeline::{estimate, PipelineConfig, Variant};
use rppg_core::rppg::Method;
use rppg_core::synth::{generate, preset_set, Preset, SynthConfig};
use rppg_core::trace_io::{
    read_ground_truth, read_json, read_trace, write_ground_truth, write_pretty_json, write_report, write_trace,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rppg", version, about = "Heart rate from face traces with angle-guided ROIs and graph smoothing")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the heart rate of one trace.
    Estimate {
        trace: PathBuf,
        /// Ground truth for error reporting.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write SVG plots (spectrum, motion signal, objective trace) into this directory.
        #[arg(long)]
        plots: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run every NAME.trace.json with its NAME.gt.json in a directory.
    Evaluate {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Compare SROI+BP, AGROI+BP and AGROI+BGSD for POS, PBV and OMIT.
    Ablate {
        dir: PathBuf,
        /// Write the table as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Generate synthetic traces with ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Default)]
struct PipelineArgs {
    /// JSON pipeline configuration; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = Method::from_str)]
    method: Option<Method>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Skip weight learning, e.g. `1,0,0`; normalized to sum to one.
    #[arg(long, value_parser = parse_weights)]
    fixed_weights: Option<[f64; 3]>,
    #[arg(long, value_parser = Periodicity::from_str)]
    periodicity: Option<Periodicity>,
    /// Median of 10 s window readouts instead of one whole-clip readout.
    #[arg(long)]
    windowed: bool,
    /// Angular speed threshold for motion, deg/s.
    #[arg(long)]
    vel_threshold: Option<f64>,
    /// Facing angle above which an ROI is replaced during motion, degrees.
    #[arg(long)]
    quality_threshold: Option<f64>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig = match &self.config {
            Some(p) => read_json(p).with_context(|| format!("reading config {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.max_iter {
            cfg.optimizer.max_iter = v;
        }
        if let Some(v) = self.grad_tol {
            cfg.optimizer.grad_tol = v;
        }
        if let Some(w) = self.fixed_weights {
            cfg.fixed_weights = Some(w);
        }
        if let Some(p) = self.periodicity {
            cfg.periodicity = p;
        }
        if self.windowed {
            cfg.windowed = true;
        }
        if let Some(v) = self.vel_threshold {
            cfg.vel_threshold = v;
        }
        if let Some(v) = self.quality_threshold {
            cfg.quality_threshold = v;
        }
        Ok(cfg)
    }
}

fn parse_weights(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated weights, got {}", parts.len()));
    }
    let mut w = [0.0; 3];
    for (slot, p) in w.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|e| format!("'{p}': {e}"))?;
    }
    Ok(w)
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Clean,
    Motion,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Clean => Preset::Clean,
            PresetArg::Motion => Preset::Motion,
        }
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["out", "dir"]))]
struct SynthArgs {
    /// JSON synth configuration for a single clip.
    #[arg(long, conflicts_with_all = ["dir", "preset", "hr"])]
    config: Option<PathBuf>,
    /// Trace path for a single clip.
    #[arg(long, requires = "gt")]
    out: Option<PathBuf>,
    /// Ground-truth path for a single clip.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Write a set of clips as NAME.trace.json / NAME.gt.json here.
    #[arg(long, conflicts_with = "gt")]
    dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Heart rate of a single preset clip.
    #[arg(long)]
    hr: Option<f64>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50.0)]
    hr_min: f64,
    #[arg(long, default_value_t = 140.0)]
    hr_max: f64,
}

fn run_estimate(
    trace: &Path,
    gt: Option<&Path>,
    out: Option<&Path>,
    plot_dir: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<()> {
    let t = read_trace(trace).with_context(|| format!("reading trace {}", trace.display()))?;
    let reference = match gt {
        Some(p) => Some(
            read_ground_truth(p)
                .and_then(|g| g.reference_bpm(&cfg.band))
                .with_context(|| format!("reading ground truth {}", p.display()))?,
        ),
        None => None,
    };
    let output = estimate(&t, cfg).with_context(|| format!("estimating {}", trace.display()))?;
    let report = output.report(t.fps, cfg, reference);

    print!("{:.2} BPM", report.hr_bpm_estimate);
    if let Some(r) = reference {
        print!(" (reference {r:.2}, error {:.2})", report.mae.unwrap_or_default());
    }
    println!(
        ", weights [{:.3}, {:.3}, {:.3}], {} motion segments, kept {:.0}%",
        report.weights[0],
        report.weights[1],
        report.weights[2],
        report.motion_segments.len(),
        100.0 * report.kept_fraction
    );
    if report.low_confidence {
        println!("warning: low spectral confidence ({:.2})", report.confidence);
    }
    if let Some(p) = out {
        write_report(&report, p)?;
    }
    if let Some(dir) = plot_dir {
        plots::write_all(dir, &output, t.fps, &cfg.band)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ClipResult {
    name: String,
    reference_bpm: f64,
    hr_bpm_estimate: Option<f64>,
    abs_error: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Evaluation {
    mae: Option<f64>,
    mape: Option<f64>,
    clips: Vec<ClipResult>,
}

fn run_evaluate(dir: &Path, out: Option<&Path>, cfg: &PipelineConfig) -> Result<()> {
    let set = dataset::load(dir, &cfg.band)?;
    let clips: Vec<ClipResult> = set
        .par_iter()
        .map(|c| match estimate(&c.trace, cfg) {
            Ok(o) => ClipResult {
                name: c.name.clone(),
                reference_bpm: c.reference_bpm,
                hr_bpm_estimate: Some(o.hr.hr_bpm),
                abs_error: Some((o.hr.hr_bpm - c.reference_bpm).abs()),
                error: None,
            },
            Err(e) => ClipResult {
                name: c.name.clone(),
                reference_bpm: c.reference_bpm,
                hr_bpm_estimate: None,
                abs_error: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    for c in &clips {
        match (&c.hr_bpm_estimate, &c.error) {
            (Some(e), _) => println!("{:<24} {:>8.2} {:>8.2} {:>7.2}", c.name, e, c.reference_bpm, (e - c.reference_bpm).abs()),
            (None, Some(err)) => println!("{:<24} failed: {err}", c.name),
            _ => {}
        }
    }
    let (est, refs): (Vec<f64>, Vec<f64>) =
        clips.iter().filter_map(|c| c.hr_bpm_estimate.map(|e| (e, c.reference_bpm))).unzip();
    let (mae, mape) = if est.is_empty() { (None, None) } else {
        let (a, b) = metrics(&est, &refs)?;
        (Some(a), Some(b))
    };
    let failed = clips.len() - est.len();
    match (mae, mape) {
        (Some(a), Some(b)) => println!("MAE {a:.3} BPM, MAPE {b:.2}% over {} clips, {failed} failed", est.len()),
        _ => println!("no clip produced an estimate"),
    }
    if let Some(p) = out {
        write_pretty_json(&Evaluation { mae, mape, clips }, p)?;
    }
    if est.is_empty() {
        bail!("every clip failed");
    }
    Ok(())
}

fn run_ablate(dir: &Path, out: Option<&Path>, cfg: &PipelineConfig) -> Result<()> {
    let set = dataset::load(dir, &cfg.band)?;
    let (traces, truths): (Vec<_>, Vec<_>) = set.into_iter().map(|c| (c.trace, c.truth)).unzip();
    let rows = run_ablation(&traces, &truths, &Method::REFLECTION, &Variant::ALL, cfg)?;
    print!("{}", format_table(&rows));
    if let Some(p) = out {
        write_pretty_json(&rows, p)?;
    }
    Ok(())
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let preset = a.preset.map(Preset::from).unwrap_or(Preset::Clean);
    if let Some(dir) = &a.dir {
        if !(a.hr_min <= a.hr_max) {
            bail!("--hr-min must not exceed --hr-max");
        }
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let cfgs = preset_set(preset, a.count, a.seed, (a.hr_min, a.hr_max));
        cfgs.par_iter().enumerate().try_for_each(|(k, c)| -> Result<()> {
            let (trace, gt) = generate(c)?;
            write_trace(&trace, dir.join(format!("clip{k:03}.trace.json")))?;
            write_ground_truth(&gt, dir.join(format!("clip{k:03}.gt.json")))?;
            Ok(())
        })?;
        println!("wrote {} clips to {}", cfgs.len(), dir.display());
        return Ok(());
    }
    let cfg = match &a.config {
        Some(p) => read_json::<SynthConfig>(p).with_context(|| format!("reading synth config {}", p.display()))?,
        None => SynthConfig::preset(preset, a.hr.unwrap_or(72.0), a.seed),
    };
    let (trace, gt) = generate(&cfg)?;
    let (out, gt_path) = (a.out.as_ref().expect("clap group"), a.gt.as_ref().expect("clap requires"));
    write_trace(&trace, out)?;
    write_ground_truth(&gt, gt_path)?;
    println!("wrote {} frames at {} fps, {} BPM", trace.frame_count(), trace.fps, cfg.hr_bpm);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Estimate {
            trace,
            gt,
            out,
            plots,
            pipeline,
        } => run_estimate(trace, gt.as_deref(), out.as_deref(), plots.as_deref(), &pipeline.resolve()?),
        Command::Evaluate { dir, out, pipeline } => run_evaluate(dir, out.as_deref(), &pipeline.resolve()?),
        Command::Ablate { dir, out, pipeline } => run_ablate(dir, out.as_deref(), &pipeline.resolve()?),
        Command::Synth(a) => run_synth(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
