//! Trace, ground-truth and result-report files.
//!
//! All three are JSON documents. Traces carry a `version` key so other tools
//! can check what they are reading.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dsp::{dominant_hr_bpm, BandSpec};
use crate::error::{Error, Result};
use crate::geometry::{validate_roi_specs, Landmark, RoiSpec, Segment, LANDMARK_COUNT, ROI_COUNT};

pub const TRACE_VERSION: u32 = 1;

/// Accepted range for a scalar reference heart rate.
pub const GT_HR_RANGE: (f64, f64) = (45.0, 150.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// `[x, y, z]` in pixels, depth in the same scale as x.
    pub landmarks: Vec<Landmark>,
    /// Mean `[r, g, b]` per ROI, ordered like the trace's `roi_specs`.
    pub roi_rgb: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub version: u32,
    pub fps: f64,
    /// Written for readers; checked against `frames` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<usize>,
    pub roi_specs: Vec<RoiSpec>,
    pub frames: Vec<FrameRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl TraceFile {
    pub fn new(fps: f64, roi_specs: Vec<RoiSpec>, frames: Vec<FrameRecord>) -> Self {
        TraceFile {
            version: TRACE_VERSION,
            fps,
            frame_count: Some(frames.len()),
            roi_specs,
            frames,
            metadata: BTreeMap::new(),
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != TRACE_VERSION {
            return Err(Error::validation(
                "version",
                format!("unsupported version {}, expected {TRACE_VERSION}", self.version),
            ));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", format!("must be > 0, got {}", self.fps)));
        }
        validate_roi_specs(&self.roi_specs)?;
        if self.frames.is_empty() {
            return Err(Error::validation("frames", "expected at least 1 frame"));
        }
        if let Some(n) = self.frame_count {
            if n != self.frames.len() {
                return Err(Error::validation(
                    "frame_count",
                    format!("declared {n}, found {} frames", self.frames.len()),
                ));
            }
        }
        for (t, fr) in self.frames.iter().enumerate() {
            if fr.landmarks.len() != LANDMARK_COUNT {
                return Err(Error::validation(
                    format!("frames[{t}].landmarks"),
                    format!("expected {LANDMARK_COUNT}, found {}", fr.landmarks.len()),
                ));
            }
            if fr.roi_rgb.len() != ROI_COUNT {
                return Err(Error::validation(
                    format!("frames[{t}].roi_rgb"),
                    format!("expected {ROI_COUNT}, found {}", fr.roi_rgb.len()),
                ));
            }
            if let Some(k) = fr.landmarks.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
                return Err(Error::validation(format!("frames[{t}].landmarks[{k}]"), "non-finite coordinate"));
            }
            if let Some(k) = fr
                .roi_rgb
                .iter()
                .position(|c| c.iter().any(|v| !v.is_finite() || !(0.0..=255.0).contains(v)))
            {
                return Err(Error::validation(
                    format!("frames[{t}].roi_rgb[{k}]"),
                    format!("values must be finite and within [0, 255], got {:?}", fr.roi_rgb[k]),
                ));
            }
        }
        Ok(())
    }

    pub fn landmark_frames(&self) -> Vec<&[Landmark]> {
        self.frames.iter().map(|f| f.landmarks.as_slice()).collect()
    }

    /// RGB series per ROI: `[roi][frame]`.
    pub fn roi_series(&self) -> Vec<Vec<[f64; 3]>> {
        (0..self.roi_specs.len())
            .map(|i| self.frames.iter().map(|f| f.roi_rgb[i]).collect())
            .collect()
    }

    /// 2D anchor position per ROI: `[frame][roi]`.
    pub fn roi_centers(&self) -> Vec<Vec<[f64; 2]>> {
        self.frames
            .iter()
            .map(|f| {
                self.roi_specs
                    .iter()
                    .map(|s| {
                        let p = f.landmarks[s.landmark_index];
                        [p[0], p[1]]
                    })
                    .collect()
            })
            .collect()
    }

    /// Same trace with ROIs ordered by `roi_id`.
    pub fn canonical(&self) -> TraceFile {
        let mut order: Vec<usize> = (0..self.roi_specs.len()).collect();
        order.sort_by_key(|&i| self.roi_specs[i].roi_id);
        let mut out = self.clone();
        out.roi_specs = order.iter().map(|&i| self.roi_specs[i]).collect();
        for (dst, src) in out.frames.iter_mut().zip(&self.frames) {
            dst.roi_rgb = order.iter().map(|&i| src.roi_rgb[i]).collect();
        }
        out
    }
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::Parse {
            field: if field == "." || field == "?" { "<root>".into() } else { field },
            message: e.into_inner().to_string(),
        }
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path, pretty: bool) -> Result<()> {
    let mut text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .map_err(|e| Error::Parse {
        field: "<root>".into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_trace(text: &str) -> Result<TraceFile> {
    let t: TraceFile = parse_json(text)?;
    t.validate()?;
    Ok(t)
}

pub fn trace_to_string(t: &TraceFile) -> Result<String> {
    t.validate()?;
    let mut t = t.clone();
    t.frame_count = Some(t.frames.len());
    let mut s = serde_json::to_string(&t).map_err(|e| Error::Parse {
        field: "<root>".into(),
        message: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceFile> {
    parse_trace(&read_text(path.as_ref())?)
}

/// Validates, then writes compact JSON. The written file always carries `frame_count`.
pub fn write_trace(t: &TraceFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = trace_to_string(t)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundTruth {
    Scalar { hr_bpm: f64 },
    Waveform { ppg: Vec<f64>, ppg_fps: f64 },
}

impl GroundTruth {
    pub fn validate(&self, band: &BandSpec) -> Result<()> {
        match self {
            GroundTruth::Scalar { hr_bpm } => {
                let (lo, hi) = GT_HR_RANGE;
                if !(hr_bpm.is_finite() && (lo..=hi).contains(hr_bpm)) {
                    return Err(Error::validation("hr_bpm", format!("must be within [{lo}, {hi}], got {hr_bpm}")));
                }
            }
            GroundTruth::Waveform { ppg, ppg_fps } => {
                if !(ppg_fps.is_finite() && *ppg_fps > 2.0 * band.high) {
                    return Err(Error::validation(
                        "ppg_fps",
                        format!("must exceed {} Hz, got {ppg_fps}", 2.0 * band.high),
                    ));
                }
                if let Some(k) = ppg.iter().position(|v| !v.is_finite()) {
                    return Err(Error::validation(format!("ppg[{k}]"), "non-finite sample"));
                }
                if ppg.len() < 4 {
                    return Err(Error::validation("ppg", format!("expected at least 4 samples, found {}", ppg.len())));
                }
            }
        }
        Ok(())
    }

    /// Scalar reference HR; waveforms go through the same estimator as predictions.
    pub fn reference_bpm(&self, band: &BandSpec) -> Result<f64> {
        self.validate(band)?;
        match self {
            GroundTruth::Scalar { hr_bpm } => Ok(*hr_bpm),
            GroundTruth::Waveform { ppg, ppg_fps } => Ok(dominant_hr_bpm(ppg, *ppg_fps, band)?.bpm),
        }
    }
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let gt: GroundTruth = parse_json(&read_text(path.as_ref())?)?;
    gt.validate(&BandSpec::default())?;
    Ok(gt)
}

pub fn write_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    write_json(gt, path.as_ref(), false)
}

/// A motion segment in frames and seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSegment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl ReportSegment {
    pub fn from_segment(s: &Segment, fps: f64) -> Self {
        ReportSegment {
            start_frame: s.start,
            end_frame: s.end,
            start_s: s.start as f64 / fps,
            end_s: s.end as f64 / fps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultReport {
    pub hr_bpm_estimate: f64,
    /// Absolute error in BPM, when a reference is available.
    pub mae: Option<f64>,
    /// Absolute percentage error, when a reference is available.
    pub mape: Option<f64>,
    pub motion_segments: Vec<ReportSegment>,
    pub weights: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_bpm: Option<f64>,
    #[serde(default)]
    pub confidence: f64,
    #[serde(default)]
    pub low_confidence: bool,
    /// Share of frames kept after motion excision.
    #[serde(default = "one")]
    pub kept_fraction: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unrecoverable_frames: Vec<usize>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

fn one() -> f64 {
    1.0
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ResultReport> {
    parse_json(&read_text(path.as_ref())?)
}

pub fn write_report(r: &ResultReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(r, path.as_ref(), true)
}

/// Reads any JSON document (configs, tables) with field-path parse errors.
pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    parse_json(&read_text(path.as_ref())?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_pretty_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    write_json(value, path.as_ref(), true)
}
