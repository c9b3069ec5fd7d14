use nalgebra::{DMatrix, SymmetricEigen};

use super::stats::pearson;
use crate::error::{Error, Result};

/// Leading principal component of a set of row series.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaComponent {
    /// Projection of the centred rows onto `loading`, one value per column.
    pub scores: Vec<f64>,
    /// Unit-norm weights, one per input row.
    pub loading: Vec<f64>,
    /// Variance along the component (covariance eigenvalue, `F - 1` normalization).
    pub variance: f64,
    /// Share of the total variance explained by the component.
    pub explained_ratio: f64,
}

/// First principal component of a `K x F` matrix given as rows.
///
/// Rows are centred in time. The sign is fixed so that the scores correlate
/// positively with the mean of the centred rows, which also makes the result
/// invariant to row order.
pub fn pca_first(rows: &[Vec<f64>]) -> Result<PcaComponent> {
    let k = rows.len();
    if k < 2 {
        return Err(Error::TooShort(format!("PCA needs at least 2 rows, got {k}")));
    }
    let f = rows[0].len();
    if f < 2 {
        return Err(Error::TooShort(format!("PCA needs at least 2 columns, got {f}")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != f) {
        return Err(Error::validation(
            format!("rows[{i}]"),
            format!("expected {f} columns, found {}", r.len()),
        ));
    }

    let x = DMatrix::from_fn(k, f, |i, j| rows[i][j]);
    let means = x.column_mean();
    let centred = DMatrix::from_fn(k, f, |i, j| x[(i, j)] - means[i]);
    let cov = (&centred * centred.transpose()) / (f - 1) as f64;
    let total: f64 = cov.diagonal().iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Ok(PcaComponent {
            scores: vec![0.0; f],
            loading: vec![0.0; k],
            variance: 0.0,
            explained_ratio: 0.0,
        });
    }

    let eig = SymmetricEigen::new(cov);
    let (top, variance) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let mut loading: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let mut scores: Vec<f64> = (0..f)
        .map(|j| (0..k).map(|i| loading[i] * centred[(i, j)]).sum())
        .collect();

    let row_mean: Vec<f64> = (0..f).map(|j| centred.column(j).sum() / k as f64).collect();
    let r = pearson(&scores, &row_mean);
    let flip = if r.abs() > 1e-12 {
        r < 0.0
    } else {
        loading.iter().sum::<f64>() < 0.0
    };
    if flip {
        loading.iter_mut().for_each(|v| *v = -*v);
        scores.iter_mut().for_each(|v| *v = -*v);
    }

    Ok(PcaComponent {
        scores,
        loading,
        variance: variance.max(0.0),
        explained_ratio: (variance / total).clamp(0.0, 1.0),
    })
}
