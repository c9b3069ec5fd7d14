//! Error metrics and ablation tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{estimate_variant, PipelineConfig, Variant};
use crate::rppg::Method;
use crate::trace_io::{GroundTruth, TraceFile};

/// `(mae, mape)`; MAPE is in percent.
pub fn metrics(estimates: &[f64], references: &[f64]) -> Result<(f64, f64)> {
    if estimates.len() != references.len() {
        return Err(Error::validation(
            "metrics",
            format!("{} estimates for {} references", estimates.len(), references.len()),
        ));
    }
    if estimates.is_empty() {
        return Err(Error::validation("metrics", "no clips"));
    }
    if let Some(r) = references.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::validation("metrics", format!("references must be > 0, got {r}")));
    }
    let n = estimates.len() as f64;
    let mae = estimates.iter().zip(references).map(|(e, r)| (e - r).abs()).sum::<f64>() / n;
    let mape = estimates.iter().zip(references).map(|(e, r)| (e - r).abs() / r).sum::<f64>() / n * 100.0;
    Ok((mae, mape))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: Method,
    pub config: Variant,
    pub mae: f64,
    pub mape: f64,
    pub clips: usize,
    /// Clips whose run failed (for example too little signal left after excision).
    pub excluded: usize,
    pub estimates: Vec<Option<f64>>,
}

/// One row per `(method, variant)`, each evaluated on every clip.
pub fn run_ablation(
    traces: &[TraceFile],
    truths: &[GroundTruth],
    methods: &[Method],
    variants: &[Variant],
    base: &PipelineConfig,
) -> Result<Vec<AblationRow>> {
    if traces.len() != truths.len() {
        return Err(Error::validation(
            "run_ablation",
            format!("{} traces for {} ground truths", traces.len(), truths.len()),
        ));
    }
    if traces.is_empty() {
        return Ok(Vec::new());
    }
    let references: Vec<f64> = truths.iter().map(|g| g.reference_bpm(&base.band)).collect::<Result<_>>()?;

    let jobs: Vec<(Method, Variant)> = methods
        .iter()
        .flat_map(|&m| variants.iter().map(move |&v| (m, v)))
        .collect();
    let estimates: Vec<Vec<Option<f64>>> = jobs
        .iter()
        .map(|&(method, variant)| {
            let cfg = PipelineConfig { method, ..base.clone() };
            traces
                .par_iter()
                .map(|t| estimate_variant(t, &cfg, variant).ok().map(|h| h.hr_bpm))
                .collect()
        })
        .collect();

    jobs.iter()
        .zip(estimates)
        .map(|(&(method, config), est)| {
            let (e, r): (Vec<f64>, Vec<f64>) = est
                .iter()
                .zip(&references)
                .filter_map(|(e, r)| e.map(|e| (e, *r)))
                .unzip();
            let (mae, mape) = if e.is_empty() { (f64::NAN, f64::NAN) } else { metrics(&e, &r)? };
            Ok(AblationRow {
                method,
                config,
                mae,
                mape,
                clips: e.len(),
                excluded: est.len() - e.len(),
                estimates: est,
            })
        })
        .collect()
}

/// Plain-text table: one line per row, grouped by method.
pub fn format_table(rows: &[AblationRow]) -> String {
    let mut out = format!(
        "{:<8} {:<12} {:>9} {:>9} {:>6} {:>9}\n",
        "method", "config", "MAE", "MAPE(%)", "clips", "excluded"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:<12} {:>9.3} {:>9.3} {:>6} {:>9}\n",
            r.method.as_str().to_uppercase(),
            r.config.as_str(),
            r.mae,
            r.mape,
            r.clips,
            r.excluded
        ));
    }
    out
}
