//! Synthetic traces with known heart rate.
//!
//! A rigid ellipsoidal face carries the 60 ROI anchors. Each ROI owns four
//! extra landmarks that sit on its tangent plane exactly under the box
//! corners, so the angle measured from the landmarks equals the analytic
//! facing angle of the rotated plane. The rest of the 468 landmarks are
//! spread over the face. Colours follow a diffuse-plus-specular skin model
//! with a pulse along a fixed chromatic direction, sensor noise, optional
//! per-ROI artifacts, and background bleed at grazing angles.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{default_roi_specs, Landmark, Region, RoiSpec, LANDMARK_COUNT, ROI_COUNT};
use crate::trace_io::{FrameRecord, GroundTruth, TraceFile, GT_HR_RANGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// About the vertical image axis (head turn).
    Yaw,
    /// About the horizontal image axis (nod).
    Pitch,
    /// About the camera axis.
    Roll,
}

/// Constant-rate rotation over `[start_s, start_s + duration_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionEvent {
    pub start_s: f64,
    pub duration_s: f64,
    pub axis: Axis,
    pub deg_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalNoise {
    pub roi_id: usize,
    /// RMS of the artifact in RGB units.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub hr_bpm: f64,
    pub fps: f64,
    pub duration_s: f64,
    pub motion_events: Vec<MotionEvent>,
    pub local_noise_rois: Vec<LocalNoise>,
    /// Relative modulation depth of the pulse in normalized colour.
    pub pulse_amplitude: f64,
    pub seed: u64,
    /// Per-channel Gaussian noise on every ROI mean, RGB units.
    pub sensor_noise: f64,
    /// Share of local-artifact power common to all noisy ROIs.
    pub shared_noise_fraction: f64,
    /// Peak specular highlight, RGB units.
    pub specular: f64,
    /// Facing angle where ROI boxes start to pick up background, degrees.
    pub bleed_start_deg: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            hr_bpm: 72.0,
            fps: 30.0,
            duration_s: 30.0,
            motion_events: Vec::new(),
            local_noise_rois: Vec::new(),
            pulse_amplitude: 0.005,
            seed: 0,
            sensor_noise: 0.3,
            shared_noise_fraction: 0.7,
            specular: 12.0,
            bleed_start_deg: 55.0,
        }
    }
}

/// Clip families used by tests and the `synth` set mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Still head, sensor noise only.
    Clean,
    /// Two 45 deg/s head rotations and strong artifacts on 15 lower-face ROIs.
    Motion,
}

/// Standard deviation of the per-ROI artifacts in the motion preset.
pub const MOTION_PRESET_NOISE: f64 = 20.0;

impl SynthConfig {
    pub fn frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = GT_HR_RANGE;
        if !(self.hr_bpm.is_finite() && (lo..=hi).contains(&self.hr_bpm)) {
            return Err(Error::validation("hr_bpm", format!("must be within [{lo}, {hi}], got {}", self.hr_bpm)));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", format!("must be > 0, got {}", self.fps)));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) || self.frames() < 2 {
            return Err(Error::validation("duration_s", "clip must span at least 2 frames"));
        }
        for (k, e) in self.motion_events.iter().enumerate() {
            let ok = e.start_s >= 0.0
                && e.duration_s > 0.0
                && e.start_s + e.duration_s <= self.duration_s + 1e-9
                && e.deg_per_s.is_finite();
            if !ok {
                return Err(Error::validation(
                    format!("motion_events[{k}]"),
                    format!("must lie within the {} s clip", self.duration_s),
                ));
            }
        }
        let mut seen = [false; ROI_COUNT];
        for (k, n) in self.local_noise_rois.iter().enumerate() {
            if n.roi_id >= ROI_COUNT || seen[n.roi_id] {
                return Err(Error::validation(
                    format!("local_noise_rois[{k}].roi_id"),
                    format!("must be a unique id in 0..{ROI_COUNT}, got {}", n.roi_id),
                ));
            }
            seen[n.roi_id] = true;
            if !(n.amplitude.is_finite() && n.amplitude >= 0.0) {
                return Err(Error::validation(format!("local_noise_rois[{k}].amplitude"), "must be >= 0"));
            }
        }
        for (name, v) in [
            ("pulse_amplitude", self.pulse_amplitude),
            ("sensor_noise", self.sensor_noise),
            ("specular", self.specular),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.shared_noise_fraction) {
            return Err(Error::validation("shared_noise_fraction", "must be within [0, 1]"));
        }
        Ok(())
    }

    pub fn preset(preset: Preset, hr_bpm: f64, seed: u64) -> Self {
        let mut cfg = SynthConfig {
            hr_bpm,
            seed,
            ..Default::default()
        };
        if preset == Preset::Motion {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_7469_6f6e);
            let start = rng.random_range(4.0..18.0);
            let hold = rng.random_range(1.0..3.0);
            let axis = if rng.random_bool(0.5) { Axis::Yaw } else { Axis::Pitch };
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            cfg.motion_events = vec![
                MotionEvent {
                    start_s: start,
                    duration_s: 1.0,
                    axis,
                    deg_per_s: 45.0 * sign,
                },
                MotionEvent {
                    start_s: start + 1.0 + hold,
                    duration_s: 1.0,
                    axis,
                    deg_per_s: -45.0 * sign,
                },
            ];
            cfg.local_noise_rois = lower_face_rois(15)
                .into_iter()
                .map(|roi_id| LocalNoise {
                    roi_id,
                    amplitude: MOTION_PRESET_NOISE,
                })
                .collect();
        }
        cfg
    }

    /// Head pose `(yaw, pitch, roll)` in degrees at time `t`.
    pub fn pose_at(&self, t: f64) -> [f64; 3] {
        let mut pose = [0.0; 3];
        for e in &self.motion_events {
            let dt = (t - e.start_s).clamp(0.0, e.duration_s);
            let k = match e.axis {
                Axis::Yaw => 0,
                Axis::Pitch => 1,
                Axis::Roll => 2,
            };
            pose[k] += e.deg_per_s * dt;
        }
        pose
    }
}

/// `count` clips with heart rates drawn uniformly from `hr_range`.
pub fn preset_set(preset: Preset, count: usize, seed: u64, hr_range: (f64, f64)) -> Vec<SynthConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let hr = rng.random_range(hr_range.0..=hr_range.1);
            SynthConfig::preset(preset, hr, seed.wrapping_mul(1000).wrapping_add(k as u64))
        })
        .collect()
}

const FACE_CENTRE: [f64; 3] = [320.0, 240.0, 0.0];
/// Semi-axes of the face ellipsoid (x, y, depth), pixels.
const FACE_RADII: [f64; 3] = [85.0, 120.0, 70.0];
/// Upper bound on the depth slope of a tangent plane, to keep grazing planes finite.
const MAX_SLOPE: f64 = 1.0e3;

fn region_layout(region: Region) -> Vec<[f64; 2]> {
    let grid = |us: &[f64], vs: &[f64]| -> Vec<[f64; 2]> { vs.iter().flat_map(|&v| us.iter().map(move |&u| [u, v])).collect() };
    match region {
        Region::Forehead => {
            let mut g = grid(&[-0.36, -0.12, 0.12, 0.36], &[-0.80]);
            g.extend(grid(&[-0.48, -0.24, 0.0, 0.24, 0.48], &[-0.66, -0.52, -0.38]));
            g
        }
        Region::LeftCheek => grid(&[0.30, 0.48, 0.66], &[-0.02, 0.12, 0.26, 0.40, 0.54, 0.68]),
        Region::RightCheek => grid(&[-0.30, -0.48, -0.66], &[-0.02, 0.12, 0.26, 0.40, 0.54, 0.68]),
        Region::Chin => {
            let mut g = grid(&[-0.2, 0.0, 0.2], &[0.78]);
            g.extend(grid(&[-0.1, 0.1], &[0.88]));
            g
        }
    }
}

fn surface_point(u: f64, v: f64) -> [f64; 3] {
    let w = (1.0 - u * u - v * v).max(0.0).sqrt();
    [
        FACE_CENTRE[0] + FACE_RADII[0] * u,
        FACE_CENTRE[1] + FACE_RADII[1] * v,
        FACE_CENTRE[2] - FACE_RADII[2] * w,
    ]
}

fn surface_normal(p: [f64; 3]) -> Vector3<f64> {
    Vector3::new(
        (p[0] - FACE_CENTRE[0]) / FACE_RADII[0].powi(2),
        (p[1] - FACE_CENTRE[1]) / FACE_RADII[1].powi(2),
        (p[2] - FACE_CENTRE[2]) / FACE_RADII[2].powi(2),
    )
    .normalize()
}

/// Canonical position in normalized face coordinates `(u, v)` of every ROI anchor.
pub fn anchor_layout(specs: &[RoiSpec]) -> Vec<[f64; 2]> {
    let mut next = [0usize; 4];
    specs
        .iter()
        .map(|s| {
            let k = Region::ALL.iter().position(|r| *r == s.region).unwrap_or(0);
            let layout = region_layout(s.region);
            let uv = layout[next[k] % layout.len()];
            next[k] += 1;
            uv
        })
        .collect()
}

/// ROI ids ordered from the lowest point of the face upwards, first `count`.
pub fn lower_face_rois(count: usize) -> Vec<usize> {
    let specs = default_roi_specs();
    let uv = anchor_layout(&specs);
    let mut ids: Vec<usize> = (0..specs.len()).collect();
    ids.sort_by(|&a, &b| uv[b][1].total_cmp(&uv[a][1]).then(a.cmp(&b)));
    ids.truncate(count);
    ids.sort_unstable();
    ids.into_iter().map(|i| specs[i].roi_id).collect()
}

/// Rigid face mesh with per-ROI corner landmarks.
#[derive(Debug, Clone)]
pub struct FaceModel {
    pub specs: Vec<RoiSpec>,
    anchors: Vec<[f64; 3]>,
    normals: Vec<Vector3<f64>>,
    /// Landmark slot of each ROI's four corner points (TL, TR, BR, BL).
    corner_slots: Vec<[usize; 4]>,
    fillers: Vec<(usize, [f64; 3])>,
}

impl FaceModel {
    pub fn new(specs: Vec<RoiSpec>) -> Self {
        let uv = anchor_layout(&specs);
        let anchors: Vec<[f64; 3]> = uv.iter().map(|p| surface_point(p[0], p[1])).collect();
        let normals = anchors.iter().map(|&p| surface_normal(p)).collect();
        let mut used = vec![false; LANDMARK_COUNT];
        for s in &specs {
            used[s.landmark_index] = true;
        }
        let mut free = (0..LANDMARK_COUNT).filter(|&k| !used[k]);
        let corner_slots: Vec<[usize; 4]> = specs
            .iter()
            .map(|_| [0; 4].map(|_| free.next().expect("enough landmark slots")))
            .collect();
        let rest: Vec<usize> = free.collect();
        // sunflower spiral over the frontal face
        let golden = PI * (3.0 - 5f64.sqrt());
        let fillers = rest
            .iter()
            .enumerate()
            .map(|(k, &slot)| {
                let r = 0.93 * ((k as f64 + 0.5) / rest.len() as f64).sqrt();
                let a = k as f64 * golden;
                (slot, surface_point(r * a.cos(), r * a.sin()))
            })
            .collect();
        FaceModel {
            specs,
            anchors,
            normals,
            corner_slots,
            fillers,
        }
    }

    fn rotation(pose: [f64; 3]) -> Rotation3<f64> {
        let [yaw, pitch, roll] = pose.map(f64::to_radians);
        Rotation3::from_axis_angle(&Vector3::z_axis(), roll)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
    }

    fn place(rot: &Rotation3<f64>, p: [f64; 3]) -> [f64; 3] {
        let c = Vector3::from(FACE_CENTRE);
        let q = rot * (Vector3::from(p) - c) + c;
        [q.x, q.y, q.z]
    }

    /// Facing angle of every ROI plane, degrees.
    pub fn roi_angles(&self, pose: [f64; 3]) -> Vec<f64> {
        let rot = Self::rotation(pose);
        self.normals.iter().map(|n| (rot * n).z.abs().clamp(0.0, 1.0).acos().to_degrees()).collect()
    }

    pub fn landmarks(&self, pose: [f64; 3]) -> Vec<Landmark> {
        let rot = Self::rotation(pose);
        let mut out = vec![[0.0; 3]; LANDMARK_COUNT];
        for &(slot, p) in &self.fillers {
            out[slot] = Self::place(&rot, p);
        }
        for (i, s) in self.specs.iter().enumerate() {
            let p = Self::place(&rot, self.anchors[i]);
            out[s.landmark_index] = p;
            let m = rot * self.normals[i];
            let mz = if m.z.abs() < 1.0 / MAX_SLOPE {
                (1.0 / MAX_SLOPE).copysign(m.z)
            } else {
                m.z
            };
            let h = s.half_size;
            let corners = [
                [p[0] - h, p[1] - h],
                [p[0] + h, p[1] - h],
                [p[0] + h, p[1] + h],
                [p[0] - h, p[1] + h],
            ];
            for (slot, c) in self.corner_slots[i].iter().zip(corners) {
                let z = p[2] - (m.x * (c[0] - p[0]) + m.y * (c[1] - p[1])) / mz;
                out[*slot] = [c[0], c[1], z];
            }
        }
        out
    }
}

/// Pulse waveform: fundamental at the heart rate plus a 0.3 second harmonic.
pub fn pulse_waveform(hr_bpm: f64, fps: f64, frames: usize, phase: f64) -> Vec<f64> {
    let f = hr_bpm / 60.0;
    (0..frames)
        .map(|t| {
            let x = 2.0 * PI * f * t as f64 / fps + phase;
            x.sin() + 0.3 * (2.0 * x).sin()
        })
        .collect()
}

/// Unit-RMS noise from random sinusoids between 0.5 and 4 Hz.
fn band_noise(rng: &mut ChaCha8Rng, fps: f64, frames: usize) -> Vec<f64> {
    const TONES: usize = 24;
    let parts: Vec<(f64, f64)> = (0..TONES)
        .map(|_| (rng.random_range(0.5..4.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let scale = (2.0 / TONES as f64).sqrt();
    (0..frames)
        .map(|t| {
            let time = t as f64 / fps;
            scale * parts.iter().map(|(f, ph)| (2.0 * PI * f * time + ph).sin()).sum::<f64>()
        })
        .collect()
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / n)
}

const SKIN: [f64; 3] = [205.0, 150.0, 120.0];
const BACKGROUND: [f64; 3] = [70.0, 80.0, 95.0];
const PULSE_DIRECTION: [f64; 3] = [0.33, 0.78, 0.53];

/// Facing angle of every ROI at every frame, `[roi][frame]`.
pub fn analytic_roi_angles(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let face = FaceModel::new(default_roi_specs());
    let per_frame: Vec<Vec<f64>> = (0..cfg.frames())
        .map(|t| face.roi_angles(cfg.pose_at(t as f64 / cfg.fps)))
        .collect();
    (0..ROI_COUNT).map(|i| per_frame.iter().map(|f| f[i]).collect()).collect()
}

/// Renders a clip and its scalar ground truth.
pub fn generate(cfg: &SynthConfig) -> Result<(TraceFile, GroundTruth)> {
    cfg.validate()?;
    let specs = default_roi_specs();
    let face = FaceModel::new(specs.clone());
    let n = cfg.frames();
    let fps = cfg.fps;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");

    let phase = rng.random_range(0.0..2.0 * PI);
    let pulse = pulse_waveform(cfg.hr_bpm, fps, n, phase);
    let pulse_dir = unit(PULSE_DIRECTION);
    let tint: Vec<[f64; 3]> = (0..ROI_COUNT)
        .map(|_| SKIN.map(|c| c * (1.0 + 0.04 * normal.sample(&mut rng))))
        .collect();

    // per-ROI additive artifacts: shared plus private band-limited noise
    let shared = band_noise(&mut rng, fps, n);
    let mut artifacts: Vec<Option<(Vec<f64>, [f64; 3])>> = vec![None; ROI_COUNT];
    for ln in &cfg.local_noise_rois {
        let own = band_noise(&mut rng, fps, n);
        let dir = unit([0, 1, 2].map(|_| normal.sample(&mut rng)));
        let (a, b) = (cfg.shared_noise_fraction.sqrt(), (1.0 - cfg.shared_noise_fraction).sqrt());
        let series = shared.iter().zip(&own).map(|(s, o)| ln.amplitude * (a * s + b * o)).collect();
        if let Some(i) = specs.iter().position(|s| s.roi_id == ln.roi_id) {
            artifacts[i] = Some((series, dir));
        }
    }
    let sensor: Vec<f64> = (0..n * ROI_COUNT * 3).map(|_| normal.sample(&mut rng)).collect();
    let clutter: Vec<f64> = (0..n * ROI_COUNT * 3).map(|_| normal.sample(&mut rng)).collect();

    let frames: Vec<FrameRecord> = (0..n)
        .into_par_iter()
        .map(|t| {
            let pose = cfg.pose_at(t as f64 / fps);
            let landmarks = face.landmarks(pose);
            let angles = face.roi_angles(pose);
            let roi_rgb = (0..ROI_COUNT)
                .map(|i| {
                    let cos = angles[i].to_radians().cos();
                    let shade = 0.35 + 0.65 * cos;
                    let spec = cfg.specular * cos.powi(20);
                    let bleed = ((angles[i] - cfg.bleed_start_deg) / 20.0).clamp(0.0, 1.0);
                    let bleed = bleed * bleed * (3.0 - 2.0 * bleed);
                    let base = (t * ROI_COUNT + i) * 3;
                    let mut px = [0.0; 3];
                    for c in 0..3 {
                        let skin = shade * tint[i][c] * (1.0 + cfg.pulse_amplitude * pulse[t] * pulse_dir[c]) + spec;
                        let back = BACKGROUND[c] + 12.0 * clutter[base + c];
                        let mut v = (1.0 - bleed) * skin + bleed * back + cfg.sensor_noise * sensor[base + c];
                        if let Some((series, dir)) = &artifacts[i] {
                            v += series[t] * dir[c];
                        }
                        px[c] = v.clamp(0.0, 255.0);
                    }
                    px
                })
                .collect();
            FrameRecord { landmarks, roi_rgb }
        })
        .collect();

    let mut trace = TraceFile::new(fps, specs, frames);
    trace.metadata.insert("source".into(), "synth".into());
    trace.metadata.insert("seed".into(), cfg.seed.into());
    Ok((trace, GroundTruth::Scalar { hr_bpm: cfg.hr_bpm }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{band_power_ratio, BandSpec};
    use crate::geometry::{angular_signals, validate_roi_specs};
    use crate::trace_io::trace_to_string;

    #[test]
    fn layout_fills_every_region() {
        for r in Region::ALL {
            assert_eq!(region_layout(r).len(), r.expected_count());
        }
        validate_roi_specs(&FaceModel::new(default_roi_specs()).specs).unwrap();
    }

    #[test]
    fn measured_angles_match_analytic() {
        let face = FaceModel::new(default_roi_specs());
        for pose in [[0.0, 0.0, 0.0], [30.0, 0.0, 0.0], [-20.0, 15.0, 5.0], [0.0, -40.0, 0.0]] {
            let lm = face.landmarks(pose);
            let m = angular_signals(&[lm.clone(), lm], &face.specs).unwrap();
            let want = face.roi_angles(pose);
            for i in 0..ROI_COUNT {
                if want[i] < 80.0 {
                    assert!((m.angles[i][0] - want[i]).abs() < 1e-6, "pose {pose:?} roi {i}");
                }
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig {
            duration_s: 4.0,
            ..SynthConfig::preset(Preset::Motion, 80.0, 3)
        };
        let mut cfg = cfg;
        cfg.motion_events.clear();
        let a = trace_to_string(&generate(&cfg).unwrap().0).unwrap();
        let b = trace_to_string(&generate(&cfg).unwrap().0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pulse_in_band_for_low_rates() {
        for hr in [50.0, 60.0, 72.0, 75.0] {
            let p = pulse_waveform(hr, 30.0, 900, 0.3);
            assert!(band_power_ratio(&p, 30.0, &BandSpec::default()) >= 0.99, "{hr}");
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SynthConfig {
                hr_bpm: 30.0,
                ..Default::default()
            },
            SynthConfig {
                motion_events: vec![MotionEvent {
                    start_s: 29.5,
                    duration_s: 1.0,
                    axis: Axis::Yaw,
                    deg_per_s: 10.0,
                }],
                ..Default::default()
            },
            SynthConfig {
                local_noise_rois: vec![LocalNoise { roi_id: 60, amplitude: 1.0 }],
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(generate(&cfg).is_err());
        }
    }

    #[test]
    fn lower_face_picks_chin_first() {
        let ids = lower_face_rois(15);
        assert_eq!(ids.len(), 15);
        let specs = default_roi_specs();
        let chin = ids.iter().filter(|&&i| specs[i].region == Region::Chin).count();
        assert_eq!(chin, 5);
    }
}
