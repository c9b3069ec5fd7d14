use nalgebra::{Cholesky, DMatrix, DVector};

use super::metrics::GraphMetrics;
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// `w1 * Q + w2 * R + w3 * D` off the diagonal, clamped at zero.
///
/// Negative consistencies would make the Laplacian indefinite, so they are
/// dropped rather than kept as repulsive edges.
pub fn build_adjacency(metrics: &GraphMetrics, weights: [f64; 3]) -> DMatrix<f64> {
    let n = metrics.q.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let v = weights[0] * metrics.q[(i, j)] + weights[1] * metrics.r[(i, j)] + weights[2] * metrics.d[(i, j)];
            v.max(0.0)
        }
    })
}

pub fn laplacian(adjacency: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let degree: DVector<f64> = DVector::from_iterator(adjacency.nrows(), adjacency.row_iter().map(|r| r.sum()));
    let l = DMatrix::from_diagonal(&degree) - adjacency;
    (degree, l)
}

/// Weighted node graph ready for smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphModel {
    pub adjacency: DMatrix<f64>,
    pub degree: DVector<f64>,
    pub laplacian: DMatrix<f64>,
    pub weights: [f64; 3],
    pub lambda: f64,
}

impl GraphModel {
    pub fn build(metrics: &GraphMetrics, weights: [f64; 3], lambda: f64) -> Result<Self> {
        check_weights(&weights)?;
        check_lambda(lambda)?;
        let adjacency = build_adjacency(metrics, weights);
        let (degree, laplacian) = laplacian(&adjacency);
        Ok(GraphModel {
            adjacency,
            degree,
            laplacian,
            weights,
            lambda,
        })
    }

    pub fn denoise(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        map_denoise(rows, &self.laplacian, self.lambda)
    }
}

pub(crate) fn check_weights(w: &[f64; 3]) -> Result<()> {
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::validation("weights", format!("must be finite and non-negative, got {w:?}")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::validation("weights", format!("must sum to 1, got {s}")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::validation("lambda", format!("must be finite and > 0, got {lambda}")));
    }
    Ok(())
}

/// Solves `(I + lambda * L) S_hat = S` for every frame column at once.
pub fn map_denoise(rows: &[Vec<f64>], laplacian: &DMatrix<f64>, lambda: f64) -> Result<Vec<Vec<f64>>> {
    check_lambda(lambda)?;
    let n = rows.len();
    if laplacian.nrows() != n || laplacian.ncols() != n {
        return Err(Error::validation(
            "laplacian",
            format!("expected {n}x{n}, found {}x{}", laplacian.nrows(), laplacian.ncols()),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let f = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != f) {
        return Err(Error::validation(format!("rows[{i}]"), format!("expected {f} frames, found {}", r.len())));
    }

    let system = DMatrix::identity(n, n) + laplacian * lambda;
    let chol = Cholesky::new(system)
        .ok_or_else(|| Error::Solver("I + lambda * L is not positive definite".into()))?;
    let rhs = DMatrix::from_fn(n, f, |i, j| rows[i][j]);
    let x = chol.solve(&rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite smoothing solution".into()));
    }
    Ok((0..n).map(|i| x.row(i).iter().copied().collect()).collect())
}

/// `||S - S_hat||_F^2 + lambda * tr(S_hat^T L S_hat)`.
pub fn map_energy(observed: &[Vec<f64>], estimate: &[Vec<f64>], laplacian: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = observed.len();
    let f = observed.first().map_or(0, |r| r.len());
    let fidelity: f64 = observed
        .iter()
        .zip(estimate)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
        .sum();
    let s = DMatrix::from_fn(n, f, |i, j| estimate[i][j]);
    let smooth = (s.transpose() * laplacian).component_mul(&s.transpose()).sum();
    fidelity + lambda * smooth
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_laplacian(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(0.0..2.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        laplacian(&a).1
    }

    #[test]
    fn two_node_closed_form() {
        // L = [[1,-1],[-1,1]], lambda = 1: (I + L)^-1 = [[2,1],[1,2]] / 3
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let out = map_denoise(&[vec![3.0, 0.0], vec![0.0, 3.0]], &l, 1.0).unwrap();
        assert!((out[0][0] - 2.0).abs() < 1e-12 && (out[1][0] - 1.0).abs() < 1e-12);
        assert!((out[0][1] - 1.0).abs() < 1e-12 && (out[1][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_lambda_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = random_laplacian(6, &mut rng);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..20).map(|_| rng.random()).collect()).collect();
        let out = map_denoise(&rows, &l, 1e-12).unwrap();
        for (a, b) in rows.iter().zip(&out) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn solution_minimizes_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = random_laplacian(8, &mut rng);
        let rows: Vec<Vec<f64>> = (0..8).map(|_| (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let best = map_denoise(&rows, &l, 0.7).unwrap();
        let e0 = map_energy(&rows, &best, &l, 0.7);
        for _ in 0..50 {
            let pert: Vec<Vec<f64>> = best
                .iter()
                .map(|r| r.iter().map(|v| v + rng.random_range(-0.01..0.01)).collect())
                .collect();
            assert!(map_energy(&rows, &pert, &l, 0.7) >= e0);
        }
    }

    #[test]
    fn adjacency_is_symmetric_nonnegative_with_zero_diagonal() {
        let q = DMatrix::from_element(3, 3, 1.0);
        let r = DMatrix::from_element(3, 3, 0.4);
        let mut d = DMatrix::from_element(3, 3, 0.5);
        d[(0, 1)] = -5.0;
        d[(1, 0)] = -5.0;
        let g = GraphModel::build(&GraphMetrics { q, r, d }, [0.2, 0.3, 0.5], 1.0).unwrap();
        assert_eq!(g.adjacency[(0, 1)], 0.0);
        assert!((g.adjacency[(0, 2)] - (0.2 + 0.12 + 0.25)).abs() < 1e-12);
        assert_eq!(g.adjacency, g.adjacency.transpose());
        assert!((0..3).all(|i| g.adjacency[(i, i)] == 0.0));
        for i in 0..3 {
            assert!(g.laplacian.row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        let l = DMatrix::zeros(2, 2);
        assert!(map_denoise(&[vec![1.0], vec![1.0]], &l, -1.0).is_err());
        assert!(map_denoise(&[vec![1.0]], &l, 1.0).is_err());
        assert!(check_weights(&[0.5, 0.6, 0.0]).is_err());
        assert!(check_weights(&[-0.1, 0.6, 0.5]).is_err());
    }
}
