//! ROI-camera angular features and global head-motion detection.
//!
//! Each ROI is a square box around an anchor landmark. Box corners are only
//! known in 2D, so each corner borrows the depth of its nearest landmark; the
//! box edge whose corners borrowed with the least total 2D error spans, with
//! the anchor, the triangle whose normal gives the ROI orientation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::pca_first;
use crate::error::{Error, Result};

pub const LANDMARK_COUNT: usize = 468;
pub const ROI_COUNT: usize = 60;
pub const DEFAULT_HALF_SIZE: f64 = 10.0;

/// One face-mesh point: image x and y in pixels, depth in the same pixel scale.
pub type Landmark = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Forehead,
    LeftCheek,
    RightCheek,
    Chin,
}

impl Region {
    pub const ALL: [Region; 4] = [
        Region::Forehead,
        Region::LeftCheek,
        Region::RightCheek,
        Region::Chin,
    ];

    /// Number of ROIs each region contributes to the 60-ROI layout.
    pub fn expected_count(self) -> usize {
        match self {
            Region::Forehead => 19,
            Region::LeftCheek | Region::RightCheek => 18,
            Region::Chin => 5,
        }
    }

    pub fn is_cheek(self) -> bool {
        matches!(self, Region::LeftCheek | Region::RightCheek)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Forehead => "forehead",
            Region::LeftCheek => "left_cheek",
            Region::RightCheek => "right_cheek",
            Region::Chin => "chin",
        }
    }
}

fn default_half_size() -> f64 {
    DEFAULT_HALF_SIZE
}

fn is_default_half_size(v: &f64) -> bool {
    *v == DEFAULT_HALF_SIZE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub roi_id: usize,
    /// Anchor landmark at the box centre.
    pub landmark_index: usize,
    pub region: Region,
    /// Half the box side in pixels; 10 gives a 20x20 box.
    #[serde(
        default = "default_half_size",
        skip_serializing_if = "is_default_half_size"
    )]
    pub half_size: f64,
}

/// Default anchors on the canonical 468-point face mesh, indexed by `roi_id`.
///
/// Forehead points sit above the brow line, cheek points lie between the
/// lower eyelid and the nasolabial fold, chin points stay below the lower lip,
/// so eyes, brows and mouth are never sampled. `left_cheek` is the subject's
/// left (the mesh's 300-range indices).
pub const DEFAULT_ROI_TABLE: [(usize, Region); ROI_COUNT] = {
    use Region::*;
    [
        (10, Forehead),
        (151, Forehead),
        (9, Forehead),
        (108, Forehead),
        (337, Forehead),
        (109, Forehead),
        (338, Forehead),
        (67, Forehead),
        (297, Forehead),
        (69, Forehead),
        (299, Forehead),
        (104, Forehead),
        (333, Forehead),
        (103, Forehead),
        (332, Forehead),
        (68, Forehead),
        (298, Forehead),
        (71, Forehead),
        (301, Forehead),
        (280, LeftCheek),
        (330, LeftCheek),
        (347, LeftCheek),
        (346, LeftCheek),
        (352, LeftCheek),
        (376, LeftCheek),
        (411, LeftCheek),
        (425, LeftCheek),
        (266, LeftCheek),
        (426, LeftCheek),
        (427, LeftCheek),
        (436, LeftCheek),
        (416, LeftCheek),
        (433, LeftCheek),
        (345, LeftCheek),
        (340, LeftCheek),
        (329, LeftCheek),
        (348, LeftCheek),
        (50, RightCheek),
        (101, RightCheek),
        (118, RightCheek),
        (117, RightCheek),
        (123, RightCheek),
        (147, RightCheek),
        (187, RightCheek),
        (205, RightCheek),
        (36, RightCheek),
        (206, RightCheek),
        (207, RightCheek),
        (216, RightCheek),
        (192, RightCheek),
        (213, RightCheek),
        (116, RightCheek),
        (111, RightCheek),
        (100, RightCheek),
        (119, RightCheek),
        (175, Chin),
        (199, Chin),
        (152, Chin),
        (148, Chin),
        (377, Chin),
    ]
};

/// The default 60 ROI specs with 20x20 boxes.
pub fn default_roi_specs() -> Vec<RoiSpec> {
    DEFAULT_ROI_TABLE
        .iter()
        .enumerate()
        .map(|(roi_id, &(landmark_index, region))| RoiSpec {
            roi_id,
            landmark_index,
            region,
            half_size: DEFAULT_HALF_SIZE,
        })
        .collect()
}

/// Checks count, id coverage, index range/uniqueness and the 19/18/18/5 split.
pub fn validate_roi_specs(specs: &[RoiSpec]) -> Result<()> {
    if specs.len() != ROI_COUNT {
        return Err(Error::validation(
            "roi_specs",
            format!("expected {ROI_COUNT}, found {}", specs.len()),
        ));
    }
    let mut seen_id = [false; ROI_COUNT];
    let mut seen_landmark = [false; LANDMARK_COUNT];
    for (i, s) in specs.iter().enumerate() {
        let field = format!("roi_specs[{i}]");
        if s.roi_id >= ROI_COUNT || seen_id[s.roi_id] {
            return Err(Error::validation(
                format!("{field}.roi_id"),
                format!("must be a unique id in 0..{ROI_COUNT}, got {}", s.roi_id),
            ));
        }
        seen_id[s.roi_id] = true;
        if s.landmark_index >= LANDMARK_COUNT || seen_landmark[s.landmark_index] {
            return Err(Error::validation(
                format!("{field}.landmark_index"),
                format!(
                    "must be a unique index in 0..{LANDMARK_COUNT}, got {}",
                    s.landmark_index
                ),
            ));
        }
        seen_landmark[s.landmark_index] = true;
        if !(s.half_size > 0.0 && s.half_size.is_finite()) {
            return Err(Error::validation(
                format!("{field}.half_size"),
                format!("must be positive, got {}", s.half_size),
            ));
        }
    }
    for region in Region::ALL {
        let n = specs.iter().filter(|s| s.region == region).count();
        if n != region.expected_count() {
            return Err(Error::validation(
                "roi_specs",
                format!(
                    "region {} has {n} ROIs, expected {}",
                    region.as_str(),
                    region.expected_count()
                ),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerAssociation {
    pub corner: [f64; 2],
    /// Nearest landmark in 2D (lowest index on ties).
    pub landmark: usize,
    /// 2D distance to that landmark, in pixels.
    pub error: f64,
    /// Borrowed depth.
    pub depth: f64,
}

/// Corners in the order top-left, top-right, bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiCornerAssociation {
    pub corners: [CornerAssociation; 4],
}

/// Box edges as corner index pairs: top, right, bottom, left.
const EDGES: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];

fn nearest_landmark(landmarks: &[Landmark], p: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, l) in landmarks.iter().enumerate() {
        let d2 = (l[0] - p[0]).powi(2) + (l[1] - p[1]).powi(2);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    (best.0, best.1.sqrt())
}

pub fn corner_association(landmarks: &[Landmark], spec: &RoiSpec) -> RoiCornerAssociation {
    let c = landmarks[spec.landmark_index];
    let h = spec.half_size;
    let pts = [
        [c[0] - h, c[1] - h],
        [c[0] + h, c[1] - h],
        [c[0] + h, c[1] + h],
        [c[0] - h, c[1] + h],
    ];
    let corners = pts.map(|p| {
        let (idx, err) = nearest_landmark(landmarks, p);
        CornerAssociation {
            corner: p,
            landmark: idx,
            error: err,
            depth: landmarks[idx][2],
        }
    });
    RoiCornerAssociation { corners }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiAngle {
    /// Angle between the ROI normal and the camera axis, in [0, 90].
    pub degrees: f64,
    /// Set when the triangle collapsed; `degrees` is then 90.
    pub degenerate: bool,
    /// Index into the top/right/bottom/left edge list.
    pub edge: usize,
}

/// Unsigned facing angle of the triangle `a, b, c` against the camera axis
/// `(0, 0, -1)`; `None` when the points are collinear.
pub fn facing_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Option<f64> {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let scale = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
        * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !(norm > 1e-12 * scale) || scale == 0.0 {
        return None;
    }
    // flipping toward the camera makes the dot product |n_z| / |n|
    let cos = (n[2].abs() / norm).clamp(0.0, 1.0);
    Some(cos.acos().to_degrees())
}

pub fn roi_angle(landmarks: &[Landmark], spec: &RoiSpec) -> RoiAngle {
    let assoc = corner_association(landmarks, spec);
    let edge = (0..EDGES.len())
        .min_by(|&a, &b| {
            let ea = assoc.corners[EDGES[a].0].error + assoc.corners[EDGES[a].1].error;
            let eb = assoc.corners[EDGES[b].0].error + assoc.corners[EDGES[b].1].error;
            ea.total_cmp(&eb)
        })
        .unwrap_or(0);
    let (i, j) = EDGES[edge];
    let lift = |c: &CornerAssociation| [c.corner[0], c.corner[1], c.depth];
    let centre = landmarks[spec.landmark_index];
    match facing_angle(centre, lift(&assoc.corners[i]), lift(&assoc.corners[j])) {
        Some(degrees) => RoiAngle {
            degrees,
            degenerate: false,
            edge,
        },
        None => RoiAngle {
            degrees: 90.0,
            degenerate: true,
            edge,
        },
    }
}

/// Per-ROI angle series, rows indexed like `specs`, columns by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiAngleMatrix {
    pub angles: Vec<Vec<f64>>,
    pub degenerate: Vec<Vec<bool>>,
}

impl RoiAngleMatrix {
    pub fn rois(&self) -> usize {
        self.angles.len()
    }

    pub fn frames(&self) -> usize {
        self.angles.first().map_or(0, Vec::len)
    }
}

pub fn angular_signals<F>(frames: &[F], specs: &[RoiSpec]) -> Result<RoiAngleMatrix>
where
    F: AsRef<[Landmark]> + Sync,
{
    if frames.len() < 2 {
        return Err(Error::TooShort(format!(
            "angular signals need at least 2 frames, got {}",
            frames.len()
        )));
    }
    let per_frame: Vec<Vec<RoiAngle>> = frames
        .par_iter()
        .map(|f| specs.iter().map(|s| roi_angle(f.as_ref(), s)).collect())
        .collect();
    let angles = (0..specs.len())
        .map(|i| per_frame.iter().map(|f| f[i].degrees).collect())
        .collect();
    let degenerate = (0..specs.len())
        .map(|i| per_frame.iter().map(|f| f[i].degenerate).collect())
        .collect();
    Ok(RoiAngleMatrix { angles, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Angular-velocity threshold in degrees per second.
    pub vel_threshold: f64,
    /// Minimum duration of a motion run, seconds (strictly exceeded).
    pub min_duration: f64,
    /// Sliding-mean window for spike removal, seconds.
    pub smooth_window: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            vel_threshold: 30.0,
            min_duration: 0.5,
            smooth_window: 0.5,
        }
    }
}

/// Half-open frame interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, frame: usize) -> bool {
        frame >= self.start && frame < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMotion {
    /// First principal component of the angle rows, in degrees-equivalent.
    pub global_angle: Vec<f64>,
    /// Smoothed angular velocity, degrees per second.
    pub motion_signal: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl GlobalMotion {
    /// A motion record with no segments, for clips analysed without geometry.
    pub fn still(frames: usize) -> Self {
        GlobalMotion {
            global_angle: vec![0.0; frames],
            motion_signal: vec![0.0; frames],
            segments: Vec::new(),
        }
    }

    pub fn in_motion(&self, frame: usize) -> bool {
        self.segments.iter().any(|s| s.contains(frame))
    }

    /// Per-frame motion mask.
    pub fn mask(&self, frames: usize) -> Vec<bool> {
        let mut m = vec![false; frames];
        for s in &self.segments {
            for v in &mut m[s.start.min(frames)..s.end.min(frames)] {
                *v = true;
            }
        }
        m
    }
}

/// Centred moving average; the window shrinks at the edges.
pub fn sliding_mean(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

pub fn global_motion(angles: &RoiAngleMatrix, fps: f64, params: &MotionParams) -> Result<GlobalMotion> {
    let frames = angles.frames();
    if (frames as f64) < fps {
        return Err(Error::TooShort(format!(
            "global motion needs at least 1 s ({fps} frames), got {frames}"
        )));
    }
    let pc = pca_first(&angles.angles)?;
    // the unit-norm score is not in degrees; scaling by the largest loading
    // gives the rank-1 reconstruction of the most responsive ROI's angle
    let scale = pc.loading.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let global_angle: Vec<f64> = pc.scores.iter().map(|v| v * scale).collect();

    let mut velocity: Vec<f64> = global_angle.windows(2).map(|w| (w[1] - w[0]) * fps).collect();
    velocity.push(*velocity.last().unwrap_or(&0.0));
    let mut window = ((params.smooth_window * fps).round() as usize).max(1);
    if window % 2 == 0 {
        window += 1;
    }
    let motion_signal = sliding_mean(&velocity, window);

    let mut segments = Vec::new();
    let mut run_start = None;
    for t in 0..=frames {
        let fast = t < frames && motion_signal[t].abs() > params.vel_threshold;
        match (fast, run_start) {
            (true, None) => run_start = Some(t),
            (false, Some(s)) => {
                if (t - s) as f64 / fps > params.min_duration {
                    segments.push(Segment { start: s, end: t });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(GlobalMotion {
        global_angle,
        motion_signal,
        segments,
    })
}
