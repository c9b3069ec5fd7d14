use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{band_power_ratio, sliding_pearson, stability, BandSpec};
use crate::error::Result;
use crate::geometry::Region;

/// Pair weight when both nodes are high quality and share a region.
pub const Q_SAME_REGION_HIGH: f64 = 1.4;
/// Pair weight when both nodes are high quality in different regions.
pub const Q_CROSS_REGION_HIGH: f64 = 1.1;
/// Pair weight when either node is low quality.
pub const Q_ANY_LOW: f64 = 1.0;

/// Per-node multiplier applied to consistencies and fusion weights.
pub const HIGH_QUALITY_WEIGHT: f64 = 1.0;
pub const LOW_QUALITY_WEIGHT: f64 = 0.6;

/// Sliding-correlation window and step, seconds.
pub const CONSISTENCY_WINDOW_S: f64 = 0.8;
pub const CONSISTENCY_STEP_S: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeQuality {
    /// In-band share of spectral power (higher is better).
    pub q_ratio: f64,
    /// Inter-frame stability score (lower is better).
    pub q_stability: f64,
    pub ratio_rank: usize,
    pub stability_rank: usize,
    /// Mean of the two ranks; 0 is best.
    pub combined_rank: f64,
    pub high: bool,
}

impl NodeQuality {
    pub fn weight(&self) -> f64 {
        quality_weight(self.high)
    }
}

pub fn quality_weight(high: bool) -> f64 {
    if high {
        HIGH_QUALITY_WEIGHT
    } else {
        LOW_QUALITY_WEIGHT
    }
}

fn ranks_by(values: &[f64], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        let c = if descending { c.reverse() } else { c };
        c.then(a.cmp(&b))
    });
    let mut ranks = vec![0; values.len()];
    for (pos, &node) in order.iter().enumerate() {
        ranks[node] = pos;
    }
    ranks
}

/// Ranks every node on both metrics over the full node set, averages the
/// ranks, then labels the best half (rounded up) of each region as high.
/// Ties go to the lower node index.
pub fn node_quality(rows: &[Vec<f64>], regions: &[Region], fps: f64, band: &BandSpec) -> Vec<NodeQuality> {
    let ratios: Vec<f64> = rows.par_iter().map(|r| band_power_ratio(r, fps, band)).collect();
    let stabilities: Vec<f64> = rows.par_iter().map(|r| stability(r)).collect();
    let ratio_rank = ranks_by(&ratios, true);
    let stability_rank = ranks_by(&stabilities, false);

    let mut out: Vec<NodeQuality> = (0..rows.len())
        .map(|i| NodeQuality {
            q_ratio: ratios[i],
            q_stability: stabilities[i],
            ratio_rank: ratio_rank[i],
            stability_rank: stability_rank[i],
            combined_rank: 0.5 * (ratio_rank[i] + stability_rank[i]) as f64,
            high: false,
        })
        .collect();

    for region in Region::ALL {
        let mut members: Vec<usize> = (0..rows.len()).filter(|&i| regions[i] == region).collect();
        members.sort_by(|&a, &b| out[a].combined_rank.total_cmp(&out[b].combined_rank).then(a.cmp(&b)));
        let keep = members.len().div_ceil(2);
        for &i in &members[..keep] {
            out[i].high = true;
        }
    }
    out
}

pub fn q_metric(high: &[bool], regions: &[Region]) -> DMatrix<f64> {
    let n = high.len();
    DMatrix::from_fn(n, n, |i, j| match (high[i] && high[j], regions[i] == regions[j]) {
        (true, true) => Q_SAME_REGION_HIGH,
        (true, false) => Q_CROSS_REGION_HIGH,
        (false, _) => Q_ANY_LOW,
    })
}

/// Baseline anatomical connectivity between two regions; the two cheeks count
/// as one region.
pub fn regional_correlation(a: Region, b: Region) -> f64 {
    use Region::*;
    if a == b || (a.is_cheek() && b.is_cheek()) {
        return 1.0;
    }
    match (a, b) {
        (Forehead, Chin) | (Chin, Forehead) => 0.2,
        (Forehead, _) | (_, Forehead) => 0.6,
        _ => 0.4,
    }
}

pub fn r_metric(regions: &[Region]) -> DMatrix<f64> {
    let n = regions.len();
    DMatrix::from_fn(n, n, |i, j| regional_correlation(regions[i], regions[j]))
}

/// Mean sliding-window Pearson correlation scaled by both nodes' quality weights.
pub fn d_metric(rows: &[Vec<f64>], high: &[bool], fps: f64) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    let r = sliding_pearson(&rows[i], &rows[j], fps, CONSISTENCY_WINDOW_S, CONSISTENCY_STEP_S)?;
                    Ok(r * quality_weight(high[i]) * quality_weight(high[j]))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for (off, &v) in upper[i].iter().enumerate() {
            let j = i + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// The three pairwise metric matrices feeding the adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMetrics {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl GraphMetrics {
    pub fn compute(rows: &[Vec<f64>], quality: &[NodeQuality], regions: &[Region], fps: f64) -> Result<Self> {
        let high: Vec<bool> = quality.iter().map(|q| q.high).collect();
        Ok(GraphMetrics {
            q: q_metric(&high, regions),
            r: r_metric(regions),
            d: d_metric(rows, &high, fps)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::dsp::zscore;
    use crate::geometry::default_roi_specs;

    fn regions() -> Vec<Region> {
        default_roi_specs().iter().map(|s| s.region).collect()
    }

    fn sine(n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * 1.2 * i as f64 / 30.0).sin()).collect()
    }

    #[test]
    fn half_of_each_region_is_high() {
        let rows = vec![sine(900); 60];
        let q = node_quality(&rows, &regions(), 30.0, &BandSpec::default());
        let regs = regions();
        let count = |r: Region| (0..60).filter(|&i| regs[i] == r && q[i].high).count();
        assert_eq!(count(Region::Forehead), 10);
        assert_eq!(count(Region::LeftCheek), 9);
        assert_eq!(count(Region::RightCheek), 9);
        assert_eq!(count(Region::Chin), 3);
        // identical rows tie everywhere, so lower ids win
        assert!(q[0].high && !q[18].high);
    }

    #[test]
    fn noise_node_ranks_below_clean_nodes() {
        let mut rows = vec![sine(900); 60];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        rows[7] = zscore(&(0..900).map(|_| normal.sample(&mut rng)).collect::<Vec<_>>());
        let q = node_quality(&rows, &regions(), 30.0, &BandSpec::default());
        assert_eq!(q[7].ratio_rank, 59);
        // white noise has the smoother |diff| profile, so it wins on stability
        assert_eq!(q[7].stability_rank, 0);
        assert!(!q[7].high);
    }

    #[test]
    fn pair_rules() {
        let regs = [Region::Forehead, Region::Forehead, Region::Chin, Region::LeftCheek];
        let q = q_metric(&[true, true, true, false], &regs);
        assert_eq!(q[(0, 1)], 1.4);
        assert_eq!(q[(0, 2)], 1.1);
        assert_eq!(q[(0, 3)], 1.0);
        assert_eq!(q[(3, 3)], 1.0);

        assert_eq!(regional_correlation(Region::LeftCheek, Region::RightCheek), 1.0);
        assert_eq!(regional_correlation(Region::RightCheek, Region::Forehead), 0.6);
        assert_eq!(regional_correlation(Region::Chin, Region::LeftCheek), 0.4);
        assert_eq!(regional_correlation(Region::Forehead, Region::Chin), 0.2);
        assert_eq!(regional_correlation(Region::Chin, Region::Chin), 1.0);
    }

    #[test]
    fn consistency_weights() {
        let s = sine(300);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let d = d_metric(&[s.clone(), s.clone(), neg], &[true, false, true], 30.0).unwrap();
        assert!((d[(0, 1)] - 0.6).abs() < 1e-12);
        assert!((d[(0, 2)] + 1.0).abs() < 1e-12);
        assert!((d[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(d, d.transpose());
    }
}
