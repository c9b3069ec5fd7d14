//! Reflection-model pulse extractors applied independently to each ROI.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{mean, std_dev};
use crate::error::{Error, Result};
use crate::geometry::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pos,
    Pbv,
    Omit,
    /// Mean-removed green channel; a plumbing reference, not a real extractor.
    Green,
}

impl Method {
    /// The three reflection-model extractors compared in ablations.
    pub const REFLECTION: [Method; 3] = [Method::Pbv, Method::Pos, Method::Omit];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pos => "pos",
            Method::Pbv => "pbv",
            Method::Omit => "omit",
            Method::Green => "green",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pos" => Ok(Method::Pos),
            "pbv" => Ok(Method::Pbv),
            "omit" => Ok(Method::Omit),
            "green" => Ok(Method::Green),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected pos, pbv, omit or green)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RppgParams {
    /// POS overlap-add window, seconds.
    pub pos_window_s: f64,
    /// PBV blood-volume signature in normalized RGB.
    pub pbv_signature: [f64; 3],
}

impl Default for RppgParams {
    fn default() -> Self {
        RppgParams {
            pos_window_s: 1.6,
            pbv_signature: [0.33, 0.78, 0.53],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BvpStage {
    Raw,
    Filtered,
    Denoised,
}

/// One pulse row per ROI at a given pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpMatrix {
    pub values: Vec<Vec<f64>>,
    pub stage: BvpStage,
    pub regions: Vec<Region>,
    /// Rows whose input had no usable variation; their values are all zero.
    pub degenerate: Vec<bool>,
}

impl BvpMatrix {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn frames(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Moves to `next`; stages only advance raw -> filtered -> denoised.
    pub fn advance(self, next: BvpStage, values: Vec<Vec<f64>>) -> Result<Self> {
        let ok = matches!(
            (self.stage, next),
            (BvpStage::Raw, BvpStage::Filtered) | (BvpStage::Filtered, BvpStage::Denoised)
        );
        if !ok {
            return Err(Error::Config(format!(
                "illegal BVP stage transition {:?} -> {next:?}",
                self.stage
            )));
        }
        Ok(BvpMatrix {
            values,
            stage: next,
            ..self
        })
    }
}

fn channel(rgb: &[[f64; 3]], c: usize) -> Vec<f64> {
    rgb.iter().map(|p| p[c]).collect()
}

fn flat(x: &[f64]) -> bool {
    std_dev(x) <= 1e-12 * mean(x).abs().max(1.0)
}

fn remove_mean(mut x: Vec<f64>) -> Vec<f64> {
    let mu = mean(&x);
    x.iter_mut().for_each(|v| *v -= mu);
    x
}

/// Plane-orthogonal-to-skin projection with overlap-add over short windows.
fn pos(rgb: &[[f64; 3]], fps: f64, window_s: f64) -> Option<Vec<f64>> {
    let n = rgb.len();
    let l = ((window_s * fps).ceil() as usize).clamp(2, n);
    let mut out = vec![0.0; n];
    let mut any = false;
    for m in 0..=(n - l) {
        let win = &rgb[m..m + l];
        let mu = [0, 1, 2].map(|c| win.iter().map(|p| p[c]).sum::<f64>() / l as f64);
        if mu.iter().any(|&v| v <= 0.0) {
            continue;
        }
        let s0: Vec<f64> = win.iter().map(|p| p[1] / mu[1] - p[2] / mu[2]).collect();
        let s1: Vec<f64> = win
            .iter()
            .map(|p| -2.0 * p[0] / mu[0] + p[1] / mu[1] + p[2] / mu[2])
            .collect();
        let (sd0, sd1) = (std_dev(&s0), std_dev(&s1));
        let alpha = if sd1 > 1e-15 { sd0 / sd1 } else { 0.0 };
        let h: Vec<f64> = s0.iter().zip(&s1).map(|(a, b)| a + alpha * b).collect();
        let hm = mean(&h);
        for (o, v) in out[m..m + l].iter_mut().zip(&h) {
            *o += v - hm;
        }
        any |= sd0 > 1e-15 || sd1 > 1e-15;
    }
    any.then_some(out)
}

/// Blood-volume-signature projection solved once per clip.
fn pbv(rgb: &[[f64; 3]], signature: [f64; 3]) -> Option<Vec<f64>> {
    let chans = [channel(rgb, 0), channel(rgb, 1), channel(rgb, 2)];
    let mu = [mean(&chans[0]), mean(&chans[1]), mean(&chans[2])];
    if mu.iter().any(|&v| v <= 0.0) || chans.iter().any(|c| flat(c)) {
        return None;
    }
    let norm: Vec<[f64; 3]> = rgb
        .iter()
        .map(|p| [p[0] / mu[0] - 1.0, p[1] / mu[1] - 1.0, p[2] / mu[2] - 1.0])
        .collect();
    let mut q = Matrix3::<f64>::zeros();
    for p in &norm {
        let v = Vector3::from(*p);
        q += v * v.transpose();
    }
    let ridge = 1e-12 * q.trace();
    q += Matrix3::identity() * ridge;
    let sig = Vector3::from(signature);
    let w = q.cholesky()?.solve(&sig);
    let gain = sig.dot(&w);
    if !(gain.abs() > 0.0) {
        return None;
    }
    Some(
        norm.iter()
            .map(|p| Vector3::from(*p).dot(&w) / gain)
            .collect(),
    )
}

/// Projection onto the orthogonal complement of the mean skin-colour vector.
fn omit(rgb: &[[f64; 3]]) -> Option<Vec<f64>> {
    let mu = Vector3::new(
        mean(&channel(rgb, 0)),
        mean(&channel(rgb, 1)),
        mean(&channel(rgb, 2)),
    );
    let len = mu.norm();
    if len <= 0.0 {
        return None;
    }
    let s = mu / len;
    let p = Matrix3::identity() - s * s.transpose();
    let g_row = p.row(1);
    let out: Vec<f64> = rgb
        .iter()
        .map(|c| g_row.dot(&Vector3::from(*c).transpose()))
        .collect();
    if flat(&out) {
        None
    } else {
        Some(out)
    }
}

fn green(rgb: &[[f64; 3]]) -> Option<Vec<f64>> {
    let g = channel(rgb, 1);
    if flat(&g) {
        None
    } else {
        Some(g)
    }
}

/// Extracts one zero-mean pulse series from an RGB trace.
///
/// Returns the series and whether it is degenerate (constant input, all zeros).
pub fn extract_row(
    method: Method,
    rgb: &[[f64; 3]],
    fps: f64,
    params: &RppgParams,
) -> Result<(Vec<f64>, bool)> {
    let min = (2.0 * fps).ceil() as usize;
    if rgb.len() < min {
        return Err(Error::TooShort(format!(
            "pulse extraction needs at least 2 s ({min} frames), got {}",
            rgb.len()
        )));
    }
    if let Some((t, _)) = rgb
        .iter()
        .enumerate()
        .find(|(_, p)| p.iter().any(|v| !v.is_finite() || *v < 0.0))
    {
        return Err(Error::validation(
            format!("rgb[{t}]"),
            "values must be finite and non-negative",
        ));
    }
    let out = match method {
        Method::Pos => pos(rgb, fps, params.pos_window_s),
        Method::Pbv => pbv(rgb, params.pbv_signature),
        Method::Omit => omit(rgb),
        Method::Green => green(rgb),
    };
    Ok(match out {
        Some(v) => (remove_mean(v), false),
        None => (vec![0.0; rgb.len()], true),
    })
}

/// Pulse rows for every ROI of `rgb` (indexed `[roi][frame]`).
pub fn extract_bvp(
    method: Method,
    rgb: &[Vec<[f64; 3]>],
    regions: &[Region],
    fps: f64,
    params: &RppgParams,
) -> Result<BvpMatrix> {
    if rgb.len() != regions.len() {
        return Err(Error::validation(
            "regions",
            format!("expected {} labels, found {}", rgb.len(), regions.len()),
        ));
    }
    let rows: Vec<(Vec<f64>, bool)> = rgb
        .par_iter()
        .map(|r| extract_row(method, r, fps, params))
        .collect::<Result<_>>()?;
    let (values, degenerate) = rows.into_iter().unzip();
    Ok(BvpMatrix {
        values,
        stage: BvpStage::Raw,
        regions: regions.to_vec(),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::dsp::{bandpass, pearson, BandSpec};

    const FPS: f64 = 30.0;

    fn pulse(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / FPS;
                (2.0 * PI * 1.25 * t).sin() + 0.3 * (4.0 * PI * 1.25 * t + 0.4).sin()
            })
            .collect()
    }

    /// Skin colour modulated along the blood-volume signature with slow
    /// intensity drift and sensor noise.
    fn skin_trace(n: usize, seed: u64) -> (Vec<[f64; 3]>, Vec<f64>) {
        let p = pulse(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let skin = [180.0, 125.0, 100.0];
        let sig = [0.33, 0.78, 0.53];
        let rgb = (0..n)
            .map(|i| {
                let drift = 1.0 + 0.05 * (2.0 * PI * 0.1 * i as f64 / FPS).sin();
                [0, 1, 2].map(|c| {
                    drift * skin[c] * (1.0 + 0.01 * sig[c] * p[i]) + noise.sample(&mut rng)
                })
            })
            .collect();
        (rgb, p)
    }

    #[test]
    fn constant_input_gives_zero_rows() {
        let rgb = vec![[120.0, 90.0, 70.0]; 300];
        for m in [Method::Pos, Method::Pbv, Method::Omit, Method::Green] {
            let (row, degenerate) = extract_row(m, &rgb, FPS, &RppgParams::default()).unwrap();
            assert!(row.iter().all(|&v| v == 0.0), "{m}");
            assert!(degenerate, "{m}");
        }
    }

    #[test]
    fn reflection_models_recover_pulse() {
        let (rgb, p) = skin_trace(900, 1);
        let band = BandSpec::default();
        let ref_p = bandpass(&p, FPS, &band).unwrap();
        for m in Method::REFLECTION {
            let (row, _) = extract_row(m, &rgb, FPS, &RppgParams::default()).unwrap();
            let r = pearson(&bandpass(&row, FPS, &band).unwrap(), &ref_p);
            assert!(r > 0.9, "{m}: r = {r}");
        }
    }

    #[test]
    fn green_is_mean_removed_green() {
        let p = pulse(300);
        let rgb: Vec<[f64; 3]> = p.iter().map(|v| [100.0, 80.0 + v, 60.0]).collect();
        let (row, degenerate) = extract_row(Method::Green, &rgb, FPS, &RppgParams::default()).unwrap();
        assert!(!degenerate);
        let mu = p.iter().sum::<f64>() / p.len() as f64;
        for (a, b) in row.iter().zip(&p) {
            assert!((a - (b - mu)).abs() < 1e-9);
        }
    }

    #[test]
    fn scale_invariance_of_pos_and_omit() {
        let (rgb, _) = skin_trace(600, 2);
        let scaled: Vec<[f64; 3]> = rgb.iter().map(|p| p.map(|v| v * 1.7)).collect();
        for m in [Method::Pos, Method::Omit, Method::Pbv] {
            let (a, _) = extract_row(m, &rgb, FPS, &RppgParams::default()).unwrap();
            let (b, _) = extract_row(m, &scaled, FPS, &RppgParams::default()).unwrap();
            assert!((pearson(&a, &b) - 1.0).abs() < 1e-9, "{m}");
        }
    }

    #[test]
    fn rows_are_zero_mean() {
        let (rgb, _) = skin_trace(600, 3);
        for m in [Method::Pos, Method::Pbv, Method::Omit, Method::Green] {
            let (row, _) = extract_row(m, &rgb, FPS, &RppgParams::default()).unwrap();
            assert!(mean(&row).abs() < 1e-9, "{m}");
        }
    }

    #[test]
    fn matrix_shape_and_stage() {
        let (rgb, _) = skin_trace(120, 4);
        let rows = vec![rgb; 60];
        let regions = vec![Region::Forehead; 60];
        let bvp = extract_bvp(Method::Pos, &rows, &regions, FPS, &RppgParams::default()).unwrap();
        assert_eq!((bvp.rows(), bvp.frames()), (60, 120));
        assert_eq!(bvp.stage, BvpStage::Raw);
        let vals = bvp.values.clone();
        let filtered = bvp.advance(BvpStage::Filtered, vals.clone()).unwrap();
        assert!(filtered.clone().advance(BvpStage::Raw, vals.clone()).is_err());
        assert!(filtered.advance(BvpStage::Denoised, vals).is_ok());
    }

    #[test]
    fn too_short_and_negative_inputs() {
        let p = RppgParams::default();
        assert!(matches!(
            extract_row(Method::Pos, &[[1.0; 3]; 40], FPS, &p),
            Err(Error::TooShort(_))
        ));
        let mut rgb = vec![[1.0; 3]; 90];
        rgb[5][2] = -1.0;
        assert!(extract_row(Method::Pos, &rgb, FPS, &p).is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("POS".parse::<Method>().unwrap(), Method::Pos);
        assert!("chrom".parse::<Method>().is_err());
    }
}
