//! Regional fusion of the smoothed ROI pulses, motion excision, and the
//! final heart-rate readout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{band_power_ratio, dominant_hr_bpm, dominant_hr_bpm_windowed, pca_first, BandSpec};
use crate::error::{Error, Result};
use crate::geometry::{GlobalMotion, Region};
use crate::graph::NodeQuality;

/// Shortest signal, in seconds, that may remain after motion excision.
pub const MIN_KEPT_SECONDS: f64 = 5.0;

/// How the periodicity factor of a fusion weight is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Periodicity {
    /// In-band share of spectral power.
    #[default]
    Bandpower,
    /// Highest normalized autocorrelation at lags inside the heart-rate band.
    Autocorr,
}

impl Periodicity {
    pub fn as_str(self) -> &'static str {
        match self {
            Periodicity::Bandpower => "bandpower",
            Periodicity::Autocorr => "autocorr",
        }
    }

    pub fn score(self, signal: &[f64], fps: f64, band: &BandSpec) -> f64 {
        match self {
            Periodicity::Bandpower => band_power_ratio(signal, fps, band),
            Periodicity::Autocorr => autocorr_peak(signal, fps, band),
        }
    }
}

impl fmt::Display for Periodicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Periodicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bandpower" => Ok(Periodicity::Bandpower),
            "autocorr" => Ok(Periodicity::Autocorr),
            other => Err(Error::Config(format!(
                "unknown periodicity `{other}` (expected bandpower or autocorr)"
            ))),
        }
    }
}

/// Largest `r(lag) / r(0)` over lags matching periods inside the band, floored at 0.
pub fn autocorr_peak(signal: &[f64], fps: f64, band: &BandSpec) -> f64 {
    let n = signal.len();
    let mu = signal.iter().sum::<f64>() / n.max(1) as f64;
    let x: Vec<f64> = signal.iter().map(|v| v - mu).collect();
    let r0: f64 = x.iter().map(|v| v * v).sum();
    if r0 <= 0.0 {
        return 0.0;
    }
    let lo = ((fps / band.high).round() as usize).max(1);
    let hi = ((fps / band.low).round() as usize).min(n.saturating_sub(1));
    (lo..=hi)
        .map(|lag| x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / r0)
        .fold(0.0, f64::max)
}

/// One fused pulse series per region, in `Region::ALL` order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionalSignals {
    pub series: [Vec<f64>; 4],
    /// Fusion weight of every ROI; the weights of one region sum to 1.
    pub weights: Vec<f64>,
    /// Regions whose members all carried zero weight; their series is zero.
    pub empty: [bool; 4],
}

pub fn regional_fusion(
    rows: &[Vec<f64>],
    regions: &[Region],
    quality: &[NodeQuality],
    fps: f64,
    band: &BandSpec,
    periodicity: Periodicity,
) -> Result<RegionalSignals> {
    let n = rows.len();
    if regions.len() != n || quality.len() != n {
        return Err(Error::validation(
            "regional_fusion",
            format!("{n} rows but {} regions and {} quality labels", regions.len(), quality.len()),
        ));
    }
    let f = rows.first().map_or(0, Vec::len);
    let raw: Vec<f64> = rows
        .iter()
        .zip(quality)
        .map(|(r, q)| periodicity.score(r, fps, band).max(0.0) * q.weight())
        .collect();

    let mut weights = vec![0.0; n];
    let mut series: [Vec<f64>; 4] = Default::default();
    let mut empty = [false; 4];
    for (k, region) in Region::ALL.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| regions[i] == *region).collect();
        let total: f64 = members.iter().map(|&i| raw[i]).sum();
        let mut s = vec![0.0; f];
        if total > 0.0 {
            for &i in &members {
                weights[i] = raw[i] / total;
                for (acc, v) in s.iter_mut().zip(&rows[i]) {
                    *acc += weights[i] * v;
                }
            }
        } else {
            empty[k] = true;
        }
        series[k] = s;
    }
    Ok(RegionalSignals { series, weights, empty })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalBvp {
    pub signal: Vec<f64>,
    /// Original frame index of every kept sample.
    pub kept_frames: Vec<usize>,
    /// Positions in `signal` where excised frames were spliced out.
    pub breaks: Vec<usize>,
    pub kept_fraction: f64,
}

/// Removes motion frames, splices the rest in order, and fuses the regions by PCA.
pub fn final_bvp(regional: &RegionalSignals, motion: &GlobalMotion, fps: f64) -> Result<FinalBvp> {
    let f = regional.series[0].len();
    let mask = motion.mask(f);
    let kept_frames: Vec<usize> = (0..f).filter(|&t| !mask[t]).collect();
    let kept_fraction = if f == 0 { 0.0 } else { kept_frames.len() as f64 / f as f64 };
    if (kept_frames.len() as f64) < MIN_KEPT_SECONDS * fps {
        return Err(Error::Unrecoverable {
            reason: format!(
                "{} frames ({:.2} s) left after motion excision, need {MIN_KEPT_SECONDS} s",
                kept_frames.len(),
                kept_frames.len() as f64 / fps
            ),
            kept_fraction,
        });
    }
    let breaks: Vec<usize> = kept_frames
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] != w[0] + 1)
        .map(|(k, _)| k + 1)
        .collect();
    let stacked: Vec<Vec<f64>> = regional
        .series
        .iter()
        .map(|s| kept_frames.iter().map(|&t| s[t]).collect())
        .collect();
    let pc = pca_first(&stacked)?;
    Ok(FinalBvp {
        signal: pc.scores,
        kept_frames,
        breaks,
        kept_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrEstimate {
    pub hr_bpm: f64,
    pub confidence: f64,
    pub low_confidence: bool,
    pub kept_fraction: f64,
}

/// Spectral readout of the final pulse; `breaks` matters only in windowed mode.
pub fn estimate_hr(
    bvp: &[f64],
    fps: f64,
    band: &BandSpec,
    windowed: bool,
    breaks: &[usize],
    kept_fraction: f64,
) -> Result<HrEstimate> {
    if (bvp.len() as f64) < MIN_KEPT_SECONDS * fps {
        return Err(Error::TooShort(format!(
            "heart-rate readout needs {MIN_KEPT_SECONDS} s, got {:.2} s",
            bvp.len() as f64 / fps
        )));
    }
    let r = if windowed {
        dominant_hr_bpm_windowed(bvp, fps, band, breaks)?
    } else {
        dominant_hr_bpm(bvp, fps, band)?
    };
    Ok(HrEstimate {
        hr_bpm: r.bpm,
        confidence: r.confidence,
        low_confidence: r.low_confidence,
        kept_fraction,
    })
}
