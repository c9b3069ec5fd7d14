use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::denoise::GraphModel;
use super::metrics::GraphMetrics;
use crate::dsp::{band_power_ratio, BandSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerParams {
    pub eta: f64,
    /// Finite-difference step in logit space.
    pub epsilon: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            eta: 0.01,
            epsilon: 1e-5,
            max_iter: 30,
            grad_tol: 1e-6,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol >= 0.0) {
            return Err(Error::Config(format!("grad_tol must be >= 0, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

pub fn softmax(z: [f64; 3]) -> [f64; 3] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Mean in-band power ratio of the smoothed rows for a given weight vector.
pub fn map_objective(
    weights: [f64; 3],
    rows: &[Vec<f64>],
    metrics: &GraphMetrics,
    lambda: f64,
    fps: f64,
    band: &BandSpec,
) -> Result<f64> {
    let graph = GraphModel::build(metrics, weights, lambda)?;
    let smoothed = graph.denoise(rows)?;
    let total: f64 = smoothed.par_iter().map(|r| band_power_ratio(r, fps, band)).sum();
    Ok(total / smoothed.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFit {
    pub weights: [f64; 3],
    pub logits: [f64; 3],
    /// Objective at every iterate, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub weight_trace: Vec<[f64; 3]>,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient ascent on softmax logits with forward-difference gradients,
/// starting from uniform weights.
pub fn optimize_weights(
    rows: &[Vec<f64>],
    metrics: &GraphMetrics,
    lambda: f64,
    fps: f64,
    band: &BandSpec,
    params: &OptimizerParams,
) -> Result<WeightFit> {
    params.validate()?;
    let eval = |z: [f64; 3], iteration: usize| -> Result<f64> {
        let v = map_objective(softmax(z), rows, metrics, lambda, fps, band)?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                detail: format!("objective {v} at weights {:?}", softmax(z)),
            });
        }
        Ok(v)
    };

    let mut z = [0.0; 3];
    let mut f0 = eval(z, 0)?;
    let mut objective_trace = vec![f0];
    let mut weight_trace = vec![softmax(z)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        let probes: Vec<f64> = (0..3)
            .into_par_iter()
            .map(|k| {
                let mut zk = z;
                zk[k] += params.epsilon;
                eval(zk, iterations)
            })
            .collect::<Result<_>>()?;
        let grad = [0, 1, 2].map(|k| (probes[k] - f0) / params.epsilon);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                iteration: iterations,
                detail: format!("gradient {grad:?}"),
            });
        }
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < params.grad_tol {
            converged = true;
            break;
        }
        for k in 0..3 {
            z[k] += params.eta * grad[k];
        }
        iterations += 1;
        f0 = eval(z, iterations)?;
        objective_trace.push(f0);
        weight_trace.push(softmax(z));
    }

    Ok(WeightFit {
        weights: softmax(z),
        logits: z,
        objective_trace,
        weight_trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;

    #[test]
    fn softmax_on_simplex() {
        let w = softmax([0.0; 3]);
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let w = softmax([800.0, -3.0, 1.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12 && w.iter().all(|v| v.is_finite()));
    }

    fn toy() -> (Vec<Vec<f64>>, GraphMetrics) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                (0..300)
                    .map(|i| (2.0 * PI * 1.3 * i as f64 / 30.0).sin() + normal.sample(&mut rng))
                    .collect()
            })
            .collect();
        let q = DMatrix::from_element(6, 6, 1.0);
        let r = DMatrix::from_fn(6, 6, |i, j| if i / 3 == j / 3 { 1.0 } else { 0.2 });
        let d = DMatrix::from_element(6, 6, 0.1);
        (rows, GraphMetrics { q, r, d })
    }

    #[test]
    fn ascent_keeps_weights_on_simplex() {
        let (rows, metrics) = toy();
        let fit = optimize_weights(&rows, &metrics, 1.0, 30.0, &BandSpec::default(), &OptimizerParams::default()).unwrap();
        assert!(fit.iterations <= 30);
        assert_eq!(fit.objective_trace.len(), fit.iterations + 1);
        assert!(fit.objective_trace.iter().all(|v| v.is_finite()));
        for w in &fit.weight_trace {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| *v > 0.0));
        }
        assert!(fit.objective_trace.last().unwrap() >= &fit.objective_trace[0]);
    }

    #[test]
    fn loose_tolerance_stops_immediately() {
        let (rows, metrics) = toy();
        let params = OptimizerParams {
            grad_tol: 1e9,
            ..Default::default()
        };
        let fit = optimize_weights(&rows, &metrics, 1.0, 30.0, &BandSpec::default(), &params).unwrap();
        assert_eq!(fit.iterations, 0);
        assert!(fit.converged);
        assert_eq!(fit.weights, softmax([0.0; 3]));
    }

    #[test]
    fn rejects_bad_params() {
        let p = OptimizerParams {
            eta: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
