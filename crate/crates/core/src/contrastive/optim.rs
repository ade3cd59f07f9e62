//! First-order optimizers over flat parameter tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    AdamW,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::AdamW,
            learning_rate: 3e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            weight_decay: 0.0,
            ..Default::default()
        }
    }

    pub fn adamw(learning_rate: f64, weight_decay: f64) -> Self {
        OptimizerConfig {
            learning_rate,
            weight_decay,
            ..Default::default()
        }
    }
}

/// Optimizer state for a fixed list of tensors.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    steps: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            steps: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. `params[i]` and `grads[i]` must have equal lengths
    /// and keep the same order across calls. Non-finite gradients abort the
    /// step before any parameter changes.
    ///
    /// AdamW uses decoupled weight decay, `p <- p - lr * wd * p`, followed by
    /// the bias-corrected Adam step. SGD applies `p <- p - lr * (g + wd * p)`.
    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter tensors vs {} gradient tensors",
                params.len(),
                grads.len()
            )));
        }
        for (t, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {t}: {} parameters vs {} gradients",
                    p.len(),
                    g.len()
                )));
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient tensor {t} entry {i}")));
            }
        }
        let c = self.config;
        self.steps += 1;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(&grads) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= c.learning_rate * (gv + c.weight_decay * *pv);
                    }
                }
            }
            OptimizerKind::AdamW => {
                if self.first_moment.is_empty() {
                    self.first_moment = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                }
                if self.first_moment.len() != grads.len()
                    || self.first_moment.iter().zip(&grads).any(|(m, g)| m.len() != g.len())
                {
                    return Err(Error::ShapeMismatch("tensor layout changed between steps".into()));
                }
                let t = i32::try_from(self.steps).unwrap_or(i32::MAX);
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(&grads)
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        p[i] -= c.learning_rate * c.weight_decay * p[i];
                        p[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut p = vec![1.0];
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1));
        opt.step(vec![&mut p], vec![&[0.5]]).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn adamw_first_step() {
        // m_hat = 0.5, v_hat = 0.25 -> step = lr * 0.5 / (0.5 + 1e-8).
        let mut p = vec![1.0];
        let mut opt = Optimizer::new(OptimizerConfig::adamw(1e-3, 0.0));
        opt.step(vec![&mut p], vec![&[0.5]]).unwrap();
        let delta = p[0] - 1.0;
        assert!((delta + 1e-3 * 0.5 / (0.5 + 1e-8)).abs() < 1e-15);
        assert!((delta + 9.999e-4).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        for cfg in [OptimizerConfig::adamw(1e-2, 0.0), OptimizerConfig::sgd(0.3)] {
            let mut p = vec![0.25, -3.0];
            let mut opt = Optimizer::new(cfg);
            for _ in 0..3 {
                opt.step(vec![&mut p], vec![&[0.0, 0.0]]).unwrap();
            }
            assert_eq!(p, [0.25, -3.0]);
        }
    }

    #[test]
    fn decoupled_weight_decay_shrinks_params() {
        let mut p = vec![2.0];
        let mut opt = Optimizer::new(OptimizerConfig::adamw(0.1, 0.5));
        opt.step(vec![&mut p], vec![&[0.0]]).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_is_rejected_without_update() {
        let mut p = vec![1.0, 2.0];
        let mut opt = Optimizer::new(OptimizerConfig::adamw(0.1, 0.0));
        let err = opt.step(vec![&mut p], vec![&[0.1, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(opt.steps(), 0);
    }
}
