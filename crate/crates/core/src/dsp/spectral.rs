use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::BandSpec;
use crate::error::{Error, Result};

/// Readouts whose in-band power ratio falls below this are flagged.
pub const LOW_CONFIDENCE_RATIO: f64 = 0.3;

const RATIO_GUARD: f64 = 1e-8;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft(signal: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(len)
        .collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len).process(&mut buf));
    buf
}

/// `|FFT(x)[k]|^2` for every bin `k` of the full (two-sided) transform.
pub fn power_spectrum(signal: &[f64]) -> Vec<f64> {
    if signal.is_empty() {
        return Vec::new();
    }
    fft(signal, signal.len())
        .into_iter()
        .map(|c| c.norm_sqr())
        .collect()
}

/// Share of non-negative-frequency power that lies inside the band.
///
/// Uses the one-sided bins `0..=F/2` and the `1e-8` denominator guard, so a
/// zero signal maps to 0 and a constant one (all power at DC) to ~0.
pub fn band_power_ratio(signal: &[f64], fps: f64, band: &BandSpec) -> f64 {
    let n = signal.len();
    if n == 0 {
        return 0.0;
    }
    let spectrum = fft(signal, n);
    let df = fps / n as f64;
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, c) in spectrum.iter().enumerate().take(n / 2 + 1) {
        let p = c.norm_sqr();
        let f = k as f64 * df;
        total += p;
        if f >= band.low && f <= band.high {
            inside += p;
        }
    }
    inside / (total + RATIO_GUARD)
}

/// Spectral heart-rate readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrReadout {
    pub bpm: f64,
    /// In-band power ratio of the analysed signal.
    pub confidence: f64,
    pub low_confidence: bool,
}

/// Periodogram peak inside the band, refined by parabolic interpolation.
///
/// The mean is removed and the record zero-padded to at least four times its
/// length before the transform.
pub fn dominant_hr_bpm(signal: &[f64], fps: f64, band: &BandSpec) -> Result<HrReadout> {
    let n = signal.len();
    if n < 4 {
        return Err(Error::TooShort(format!(
            "heart-rate readout needs at least 4 samples, got {n}"
        )));
    }
    let high = band.high.min(fps / 2.0);
    if band.low >= high {
        return Err(Error::EmptyBand(format!(
            "[{}, {}] Hz above Nyquist {} Hz",
            band.low,
            band.high,
            fps / 2.0
        )));
    }
    let mu = signal.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = signal.iter().map(|v| v - mu).collect();
    let n_fft = (4 * n).next_power_of_two();
    let power: Vec<f64> = fft(&centred, n_fft)
        .iter()
        .take(n_fft / 2 + 1)
        .map(|c| c.norm_sqr())
        .collect();
    let df = fps / n_fft as f64;
    let first = (band.low / df).ceil() as usize;
    let last = ((high / df).floor() as usize).min(power.len() - 1);
    if first > last {
        return Err(Error::EmptyBand(format!(
            "no bins between {} and {high} Hz at resolution {df} Hz",
            band.low
        )));
    }
    let mut peak = first;
    for k in first..=last {
        if power[k] > power[peak] {
            peak = k;
        }
    }
    let mut offset = 0.0;
    if peak > 0 && peak + 1 < power.len() {
        let (a, b, c) = (power[peak - 1], power[peak], power[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    let freq = ((peak as f64 + offset) * df).clamp(band.low, high);
    let confidence = band_power_ratio(signal, fps, band);
    Ok(HrReadout {
        bpm: freq * 60.0,
        confidence,
        low_confidence: confidence < LOW_CONFIDENCE_RATIO,
    })
}

/// Median of per-window readouts (10 s windows, 1 s hop).
///
/// `breaks` lists sample indices where the series was spliced; windows that
/// straddle a break are skipped. Falls back to the whole-record readout when no
/// window fits.
pub fn dominant_hr_bpm_windowed(
    signal: &[f64],
    fps: f64,
    band: &BandSpec,
    breaks: &[usize],
) -> Result<HrReadout> {
    let win = (10.0 * fps).round() as usize;
    let hop = fps.round().max(1.0) as usize;
    let mut bpms = Vec::new();
    let mut start = 0;
    while start + win <= signal.len() {
        let end = start + win;
        if !breaks.iter().any(|&b| b > start && b < end) {
            bpms.push(dominant_hr_bpm(&signal[start..end], fps, band)?.bpm);
        }
        start += hop;
    }
    let whole = dominant_hr_bpm(signal, fps, band)?;
    if bpms.is_empty() {
        return Ok(whole);
    }
    bpms.sort_by(f64::total_cmp);
    let mid = bpms.len() / 2;
    let bpm = if bpms.len() % 2 == 0 {
        0.5 * (bpms[mid - 1] + bpms[mid])
    } else {
        bpms[mid]
    };
    Ok(HrReadout { bpm, ..whole })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn tone(freq: f64, amp: f64, fps: f64, secs: f64) -> Vec<f64> {
        (0..(fps * secs) as usize)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fps).sin())
            .collect()
    }

    // direct O(n^2) DFT used as an independent reference
    fn naive_power(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ph = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn spectrum_matches_naive_dft() {
        let x: Vec<f64> = (0..97).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let fast = power_spectrum(&x);
        for (a, b) in fast.iter().zip(naive_power(&x)) {
            assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn in_band_tone_ratio() {
        let x = tone(1.5, 1.0, 30.0, 30.0);
        assert!(band_power_ratio(&x, 30.0, &BandSpec::default()) >= 0.95);
    }

    #[test]
    fn dc_and_zero_ratio() {
        let band = BandSpec::default();
        assert!(band_power_ratio(&[2.0; 900], 30.0, &band) < 1e-12);
        assert_eq!(band_power_ratio(&[0.0; 900], 30.0, &band), 0.0);
    }

    #[test]
    fn pure_tone_readout() {
        let r = dominant_hr_bpm(&tone(1.2, 1.0, 30.0, 30.0), 30.0, &BandSpec::default()).unwrap();
        assert!((r.bpm - 72.0).abs() <= 0.5, "{}", r.bpm);
        assert!(!r.low_confidence);
    }

    #[test]
    fn stronger_tone_wins() {
        let a = tone(1.2, 1.0, 30.0, 30.0);
        let b = tone(2.0, 0.3, 30.0, 30.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + v).collect();
        // periodogram oracle: the 1.2 Hz bin carries 1/0.09 times the power of the 2 Hz bin
        let p = naive_power(&x);
        assert!(p[36] > 10.0 * p[60]);
        let r = dominant_hr_bpm(&x, 30.0, &BandSpec::default()).unwrap();
        assert!((r.bpm - 72.0).abs() < 0.5, "{}", r.bpm);
    }

    #[test]
    fn off_bin_tones_within_resolution() {
        for f in [0.81, 1.037, 1.333, 1.9, 2.41] {
            let r = dominant_hr_bpm(&tone(f, 1.0, 30.0, 30.0), 30.0, &BandSpec::default()).unwrap();
            // bin width of a 30 s record is 2 BPM
            assert!((r.bpm - 60.0 * f).abs() < 2.0, "{f}: {}", r.bpm);
        }
    }

    #[test]
    fn band_edge_tone() {
        let r = dominant_hr_bpm(&tone(2.5, 1.0, 30.0, 30.0), 30.0, &BandSpec::default()).unwrap();
        assert!((r.bpm - 150.0).abs() < 0.5);
        assert!(r.bpm <= 150.0);
    }

    #[test]
    fn flat_signal_is_low_confidence() {
        let r = dominant_hr_bpm(&[1.0; 300], 30.0, &BandSpec::default()).unwrap();
        assert!(r.low_confidence);
        assert!(r.confidence < 1e-12);
    }

    #[test]
    fn empty_band_after_nyquist() {
        let band = BandSpec {
            low: 3.0,
            high: 4.0,
            order: 4,
        };
        assert!(matches!(
            dominant_hr_bpm(&[0.0; 100], 5.0, &band),
            Err(Error::EmptyBand(_))
        ));
    }

    #[test]
    fn windowed_median_skips_breaks() {
        let x = tone(1.1, 1.0, 30.0, 30.0);
        let r = dominant_hr_bpm_windowed(&x, 30.0, &BandSpec::default(), &[450]).unwrap();
        assert!((r.bpm - 66.0).abs() < 1.0);
    }
}
