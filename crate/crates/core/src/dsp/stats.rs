use crate::error::{Error, Result};

/// Denominator guard of the inter-frame stability score.
pub const STABILITY_GUARD: f64 = 1e-8;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mu = mean(x);
    (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Zero-mean, unit-variance copy; constant input becomes all zeros.
pub fn zscore(x: &[f64]) -> Vec<f64> {
    let mu = mean(x);
    let sd = std_dev(x);
    if sd <= f64::EPSILON * mu.abs().max(1.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mu) / sd).collect()
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let denom = (saa * sbb).sqrt();
    if denom <= f64::MIN_POSITIVE || saa <= 1e-24 || sbb <= 1e-24 {
        0.0
    } else {
        (sab / denom).clamp(-1.0, 1.0)
    }
}

/// `mean(|dx|) / (std(|dx|) + 1e-8)` over adjacent-frame differences.
/// Lower values are preferred by the node-quality ranking.
pub fn stability(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let diffs: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    mean(&diffs) / (std_dev(&diffs) + STABILITY_GUARD)
}

/// Mean Pearson correlation over full sliding windows.
///
/// Window and step lengths are given in seconds and rounded to whole frames.
pub fn sliding_pearson(a: &[f64], b: &[f64], fps: f64, window_s: f64, step_s: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(
            "sliding_pearson",
            format!("length mismatch {} vs {}", a.len(), b.len()),
        ));
    }
    let win = ((window_s * fps).round() as usize).max(2);
    let step = ((step_s * fps).round() as usize).max(1);
    if a.len() < win {
        return Err(Error::TooShort(format!(
            "sliding correlation needs {win} samples, got {}",
            a.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start + win <= a.len() {
        sum += pearson(&a[start..start + win], &b[start..start + win]);
        count += 1;
        start += step;
    }
    Ok(sum / count as f64)
}
