//! Substitution of poorly facing ROIs during head motion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GlobalMotion, RoiAngleMatrix};

/// ROIs facing the camera at less than this angle count as high quality.
pub const DEFAULT_QUALITY_THRESHOLD: f64 = 60.0;

/// Per-ROI mean colour series.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbTrace {
    /// `[roi][frame]`.
    pub rgb: Vec<Vec<[f64; 3]>>,
    /// `[roi][frame]`, set where the colour was copied from another ROI.
    pub substituted: Vec<Vec<bool>>,
    /// Motion frames with no high-quality ROI, left untouched.
    pub unrecoverable: Vec<usize>,
}

impl RgbTrace {
    pub fn new(rgb: Vec<Vec<[f64; 3]>>) -> Self {
        let substituted = rgb.iter().map(|r| vec![false; r.len()]).collect();
        RgbTrace {
            rgb,
            substituted,
            unrecoverable: Vec::new(),
        }
    }

    pub fn rois(&self) -> usize {
        self.rgb.len()
    }

    pub fn frames(&self) -> usize {
        self.rgb.first().map_or(0, |r| r.len())
    }

    pub fn substitution_count(&self) -> usize {
        self.substituted.iter().flatten().filter(|&&b| b).count()
    }
}

/// Lowest-id ROI whose angle is below `threshold` and whose centre is
/// closest to ROI `i` in frame `t`.
fn nearest_good(i: usize, t: usize, angles: &RoiAngleMatrix, centers: &[[f64; 2]], threshold: f64) -> Option<usize> {
    let ci = centers[i];
    let mut best: Option<(usize, f64)> = None;
    for (j, cj) in centers.iter().enumerate() {
        if j == i || angles.angles[j][t] >= threshold {
            continue;
        }
        let d = (cj[0] - ci[0]).powi(2) + (cj[1] - ci[1]).powi(2);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| j)
}

/// Inside motion segments, copies the colour of the nearest high-quality ROI
/// into every ROI at or above `threshold` degrees. `centers` is `[frame][roi]`.
pub fn optimize_rgb(
    trace: &RgbTrace,
    angles: &RoiAngleMatrix,
    motion: &GlobalMotion,
    centers: &[Vec<[f64; 2]>],
    threshold: f64,
) -> Result<RgbTrace> {
    let (n, f) = (trace.rois(), trace.frames());
    if angles.rois() != n || angles.frames() != f {
        return Err(Error::validation(
            "angles",
            format!("expected {n}x{f}, found {}x{}", angles.rois(), angles.frames()),
        ));
    }
    if centers.len() != f || centers.iter().any(|c| c.len() != n) {
        return Err(Error::validation("centers", format!("expected {f} frames of {n} centres")));
    }
    if motion.motion_signal.len() != f {
        return Err(Error::validation(
            "motion",
            format!("expected {f} frames, found {}", motion.motion_signal.len()),
        ));
    }

    let mut out = RgbTrace::new(trace.rgb.clone());
    let mask = motion.mask(f);
    // per frame: the (roi, source) replacements, or None when unrecoverable
    let plans: Vec<(usize, Option<Vec<(usize, usize)>>)> = (0..f)
        .into_par_iter()
        .filter(|&t| mask[t])
        .map(|t| {
            let bad: Vec<usize> = (0..n).filter(|&i| angles.angles[i][t] >= threshold).collect();
            if bad.is_empty() {
                return (t, Some(Vec::new()));
            }
            if bad.len() == n {
                return (t, None);
            }
            let moves = bad
                .into_iter()
                .filter_map(|i| nearest_good(i, t, angles, &centers[t], threshold).map(|j| (i, j)))
                .collect();
            (t, Some(moves))
        })
        .collect();

    for (t, plan) in plans {
        match plan {
            None => out.unrecoverable.push(t),
            Some(moves) => {
                for (i, j) in moves {
                    out.rgb[i][t] = trace.rgb[j][t];
                    out.substituted[i][t] = true;
                }
            }
        }
    }
    Ok(out)
}
