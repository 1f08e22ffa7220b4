use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::params::ParamStore;
use crate::numeric::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamWConfig {
    /// Plain Adam: no decoupled decay.
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            weight_decay: 0.0,
            ..Self::default()
        }
    }
}

/// Adam with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub step: u64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, store: &ParamStore) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                config.learning_rate
            )));
        }
        let zeros: Vec<Tensor> = store.iter().map(|p| Tensor::zeros_like(&p.value)).collect();
        Ok(Self {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    /// One update from the accumulated gradients, then zeroes them.
    ///
    /// Fails without touching any parameter if a gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.first_moment.len() {
            return Err(Error::dim("optimizer state does not match parameter store"));
        }
        if let Some(p) = store.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::Optimizer {
                param: p.name.clone(),
            });
        }
        self.step += 1;
        let AdamWConfig {
            learning_rate: lr,
            weight_decay: wd,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        for (i, p) in store.iter_mut().enumerate() {
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            let value = p.value.data_mut();
            for (j, &g) in p.grad.data().iter().enumerate() {
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                value[j] -= lr * wd * value[j];
                value[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        store.zero_grads();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: u32,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            factor: 0.5,
            patience: 3,
        }
    }
}

/// Halves (by `factor`) the learning rate once the monitored loss has failed
/// to improve for more than `patience` consecutive observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub config: PlateauConfig,
    pub best: Option<f64>,
    pub bad_epochs: u32,
}

impl PlateauScheduler {
    pub fn new(config: PlateauConfig) -> Result<Self> {
        if !(config.factor > 0.0 && config.factor < 1.0) {
            return Err(Error::Parameter(format!(
                "plateau factor must lie in (0, 1), got {}",
                config.factor
            )));
        }
        Ok(Self {
            config,
            best: None,
            bad_epochs: 0,
        })
    }

    /// Records a validation loss; returns the new learning rate if it was reduced.
    pub fn observe(&mut self, metric: f64, optimizer: &mut AdamW) -> Result<Option<f64>> {
        if !metric.is_finite() {
            return Err(Error::NonFinite("plateau metric".into()));
        }
        match self.best {
            Some(best) if metric >= best => {
                self.bad_epochs += 1;
                if self.bad_epochs > self.config.patience {
                    let lr = optimizer.learning_rate() * self.config.factor;
                    optimizer.set_learning_rate(lr);
                    self.bad_epochs = 0;
                    return Ok(Some(lr));
                }
            }
            _ => {
                self.best = Some(metric);
                self.bad_epochs = 0;
            }
        }
        Ok(None)
    }
}
