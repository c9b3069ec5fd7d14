use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use rppg_core::dsp::BandSpec;
use rppg_core::trace_io::{read_ground_truth, read_trace, GroundTruth, TraceFile};

pub struct Clip {
    pub name: String,
    pub trace: TraceFile,
    pub truth: GroundTruth,
    pub reference_bpm: f64,
}

/// Every `NAME.trace.json` in `dir` with its `NAME.gt.json`, sorted by name.
pub fn load(dir: &Path, band: &BandSpec) -> Result<Vec<Clip>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".trace.json")).map(String::from))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no *.trace.json files in {}", dir.display());
    }
    names
        .par_iter()
        .map(|name| {
            let tp = dir.join(format!("{name}.trace.json"));
            let gp = dir.join(format!("{name}.gt.json"));
            let trace = read_trace(&tp).with_context(|| format!("reading {}", tp.display()))?;
            let truth = read_ground_truth(&gp).with_context(|| format!("reading {}", gp.display()))?;
            let reference_bpm = truth.reference_bpm(band)?;
            Ok(Clip {
                name: name.clone(),
                trace,
                truth,
                reference_bpm,
            })
        })
        .collect()
}
