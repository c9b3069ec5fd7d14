//! End-to-end heart-rate estimation over a trace, plus the reduced
//! configurations used in ablations.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{bandpass, pca_first, zscore, BandSpec};
use crate::error::{Error, Result, StageExt};
use crate::fusion::{estimate_hr, final_bvp, regional_fusion, HrEstimate, Periodicity, RegionalSignals};
use crate::geometry::{angular_signals, global_motion, GlobalMotion, MotionParams, Region, RoiAngleMatrix};
use crate::graph::{node_quality, optimize_weights, GraphMetrics, GraphModel, NodeQuality, OptimizerParams, WeightFit};
use crate::roi_optimize::{optimize_rgb, RgbTrace, DEFAULT_QUALITY_THRESHOLD};
use crate::rppg::{extract_bvp, extract_row, BvpMatrix, BvpStage, Method, RppgParams};
use crate::trace_io::{ReportSegment, ResultReport, TraceFile};

/// Every tunable of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: Method,
    pub band: BandSpec,
    pub lambda: f64,
    /// Angular speed above which the head counts as moving, deg/s.
    pub vel_threshold: f64,
    /// Shortest motion run reported as a segment, seconds.
    pub min_duration: f64,
    /// Spike-removal window on the motion signal, seconds.
    pub smooth_window: f64,
    /// ROIs at or above this facing angle are replaced during motion, degrees.
    pub quality_threshold: f64,
    pub periodicity: Periodicity,
    /// Skip weight learning and use these (normalized) weights.
    pub fixed_weights: Option<[f64; 3]>,
    pub optimizer: OptimizerParams,
    /// Median of 10 s window readouts instead of one whole-clip readout.
    pub windowed: bool,
    pub rppg: RppgParams,
    /// Recorded for reproducibility; the pipeline itself is deterministic.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let motion = MotionParams::default();
        PipelineConfig {
            method: Method::Pos,
            band: BandSpec::default(),
            lambda: crate::graph::DEFAULT_LAMBDA,
            vel_threshold: motion.vel_threshold,
            min_duration: motion.min_duration,
            smooth_window: motion.smooth_window,
            quality_threshold: DEFAULT_QUALITY_THRESHOLD,
            periodicity: Periodicity::default(),
            fixed_weights: None,
            optimizer: OptimizerParams::default(),
            windowed: false,
            rppg: RppgParams::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn motion_params(&self) -> MotionParams {
        MotionParams {
            vel_threshold: self.vel_threshold,
            min_duration: self.min_duration,
            smooth_window: self.smooth_window,
        }
    }

    pub fn validate(&self, fps: f64) -> Result<()> {
        self.band.validate(fps)?;
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        for (name, v) in [
            ("vel_threshold", self.vel_threshold),
            ("min_duration", self.min_duration),
            ("smooth_window", self.smooth_window),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.quality_threshold > 0.0 && self.quality_threshold <= 90.0) {
            return Err(Error::Config(format!(
                "quality_threshold must be in (0, 90], got {}",
                self.quality_threshold
            )));
        }
        if let Some(w) = self.fixed_weights {
            normalize_weights(w)?;
        }
        self.optimizer.validate()
    }
}

/// Scales non-negative weights to sum to 1.
pub fn normalize_weights(w: [f64; 3]) -> Result<[f64; 3]> {
    let s: f64 = w.iter().sum();
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) || s <= 0.0 {
        return Err(Error::Config(format!(
            "fixed weights must be non-negative with a positive sum, got {w:?}"
        )));
    }
    Ok(w.map(|v| v / s))
}

/// Which stages an ablation run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Mean colour of all ROIs as one region, band-pass, readout.
    #[serde(rename = "SROI+BP")]
    SroiBp,
    /// Angle-guided ROIs, per-ROI band-pass, PCA over all ROIs, readout.
    #[serde(rename = "AGROI+BP")]
    AgroiBp,
    /// The full pipeline with graph smoothing and regional fusion.
    #[serde(rename = "AGROI+BGSD")]
    AgroiBgsd,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SroiBp, Variant::AgroiBp, Variant::AgroiBgsd];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SroiBp => "SROI+BP",
            Variant::AgroiBp => "AGROI+BP",
            Variant::AgroiBgsd => "AGROI+BGSD",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SROI+BP" | "SROI" => Ok(Variant::SroiBp),
            "AGROI+BP" | "AGROI" => Ok(Variant::AgroiBp),
            "AGROI+BGSD" | "BGSD" | "FULL" => Ok(Variant::AgroiBgsd),
            other => Err(Error::Config(format!("unknown configuration `{other}`"))),
        }
    }
}

/// Geometry and ROI substitution results shared by the angle-guided variants.
#[derive(Debug, Clone)]
pub struct GuidedRois {
    pub angles: RoiAngleMatrix,
    pub motion: GlobalMotion,
    pub rgb: RgbTrace,
    pub regions: Vec<Region>,
}

pub fn guided_rois(trace: &TraceFile, cfg: &PipelineConfig) -> Result<GuidedRois> {
    let frames = trace.landmark_frames();
    let angles = angular_signals(&frames, &trace.roi_specs).stage("geometry")?;
    let motion = global_motion(&angles, trace.fps, &cfg.motion_params()).stage("geometry")?;
    let rgb = optimize_rgb(
        &RgbTrace::new(trace.roi_series()),
        &angles,
        &motion,
        &trace.roi_centers(),
        cfg.quality_threshold,
    )
    .stage("roi-optimize")?;
    Ok(GuidedRois {
        angles,
        motion,
        rgb,
        regions: trace.roi_specs.iter().map(|s| s.region).collect(),
    })
}

/// Band-passes and standardizes every row.
pub fn filter_rows(raw: BvpMatrix, fps: f64, band: &BandSpec) -> Result<BvpMatrix> {
    let values: Vec<Vec<f64>> = raw
        .values
        .par_iter()
        .map(|r| bandpass(r, fps, band).map(|f| zscore(&f)))
        .collect::<Result<_>>()?;
    raw.advance(BvpStage::Filtered, values)
}

/// Everything a full run produces, for reports and plots.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub hr: HrEstimate,
    pub weights: [f64; 3],
    pub weight_fit: Option<WeightFit>,
    pub motion: GlobalMotion,
    pub quality: Vec<NodeQuality>,
    pub regional: RegionalSignals,
    pub final_bvp: Vec<f64>,
    pub substitutions: usize,
    pub unrecoverable_frames: Vec<usize>,
}

impl PipelineOutput {
    pub fn report(&self, fps: f64, cfg: &PipelineConfig, reference_bpm: Option<f64>) -> ResultReport {
        let (mae, mape) = match reference_bpm {
            Some(r) => {
                let e = (self.hr.hr_bpm - r).abs();
                (Some(e), Some(100.0 * e / r))
            }
            None => (None, None),
        };
        ResultReport {
            hr_bpm_estimate: self.hr.hr_bpm,
            mae,
            mape,
            motion_segments: self.motion.segments.iter().map(|s| ReportSegment::from_segment(s, fps)).collect(),
            weights: self.weights,
            reference_bpm,
            confidence: self.hr.confidence,
            low_confidence: self.hr.low_confidence,
            kept_fraction: self.hr.kept_fraction,
            objective_trace: self.weight_fit.as_ref().map(|f| f.objective_trace.clone()).unwrap_or_default(),
            unrecoverable_frames: self.unrecoverable_frames.clone(),
            config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        }
    }
}

/// Full pipeline: geometry, ROI substitution, extraction, filtering, graph
/// smoothing with learned weights, regional fusion, excision, readout.
pub fn estimate(trace: &TraceFile, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let trace = trace.canonical();
    let fps = trace.fps;
    cfg.validate(fps).stage("config")?;
    let guided = guided_rois(&trace, cfg)?;

    let raw = extract_bvp(cfg.method, &guided.rgb.rgb, &guided.regions, fps, &cfg.rppg).stage("rppg")?;
    let filtered = filter_rows(raw, fps, &cfg.band).stage("dsp")?;

    let quality = node_quality(&filtered.values, &guided.regions, fps, &cfg.band);
    let metrics = GraphMetrics::compute(&filtered.values, &quality, &guided.regions, fps).stage("graph")?;
    let (weights, weight_fit) = match cfg.fixed_weights {
        Some(w) => (normalize_weights(w).stage("graph")?, None),
        None => {
            let fit = optimize_weights(&filtered.values, &metrics, cfg.lambda, fps, &cfg.band, &cfg.optimizer)
                .stage("graph")?;
            (fit.weights, Some(fit))
        }
    };
    let graph = GraphModel::build(&metrics, weights, cfg.lambda).stage("graph")?;
    let smoothed = graph.denoise(&filtered.values).stage("graph")?;
    let denoised = filtered.advance(BvpStage::Denoised, smoothed).stage("graph")?;

    let regional = regional_fusion(&denoised.values, &guided.regions, &quality, fps, &cfg.band, cfg.periodicity)
        .stage("fusion")?;
    let bvp = final_bvp(&regional, &guided.motion, fps).stage("fusion")?;
    let hr = estimate_hr(&bvp.signal, fps, &cfg.band, cfg.windowed, &bvp.breaks, bvp.kept_fraction).stage("fusion")?;

    Ok(PipelineOutput {
        hr,
        weights,
        weight_fit,
        motion: guided.motion,
        quality,
        regional,
        final_bvp: bvp.signal,
        substitutions: guided.rgb.substitution_count(),
        unrecoverable_frames: guided.rgb.unrecoverable,
    })
}

fn readout(signal: &[f64], fps: f64, cfg: &PipelineConfig) -> Result<HrEstimate> {
    estimate_hr(signal, fps, &cfg.band, cfg.windowed, &[], 1.0)
}

/// Heart rate from one ablation variant.
pub fn estimate_variant(trace: &TraceFile, cfg: &PipelineConfig, variant: Variant) -> Result<HrEstimate> {
    match variant {
        Variant::AgroiBgsd => estimate(trace, cfg).map(|o| o.hr),
        Variant::SroiBp => {
            let fps = trace.fps;
            cfg.validate(fps).stage("config")?;
            let k = trace.roi_specs.len() as f64;
            let mean_rgb: Vec<[f64; 3]> = trace
                .frames
                .iter()
                .map(|f| {
                    let s = f.roi_rgb.iter().fold([0.0; 3], |a, c| [a[0] + c[0], a[1] + c[1], a[2] + c[2]]);
                    s.map(|v| v / k)
                })
                .collect();
            let (row, _) = extract_row(cfg.method, &mean_rgb, fps, &cfg.rppg).stage("rppg")?;
            let filtered = bandpass(&row, fps, &cfg.band).stage("dsp")?;
            readout(&filtered, fps, cfg).stage("fusion")
        }
        Variant::AgroiBp => {
            let trace = trace.canonical();
            let fps = trace.fps;
            cfg.validate(fps).stage("config")?;
            let guided = guided_rois(&trace, cfg)?;
            let raw = extract_bvp(cfg.method, &guided.rgb.rgb, &guided.regions, fps, &cfg.rppg).stage("rppg")?;
            let filtered = filter_rows(raw, fps, &cfg.band).stage("dsp")?;
            let pc = pca_first(&filtered.values).stage("fusion")?;
            readout(&pc.scores, fps, cfg).stage("fusion")
        }
    }
}
