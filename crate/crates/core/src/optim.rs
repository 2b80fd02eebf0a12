//! SGD and Adam over flat parameter vectors.

use crate::error::{check_dim, Error, Result};

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Numeric(format!(
            "{what}[{i}] = {} is not finite",
            v[i]
        ))),
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("learning rate must be positive, got {lr}")))
    }
}

/// `theta - lr * grad`.
pub fn sgd_step(theta: &[f64], grad: &[f64], lr: f64) -> Result<Vec<f64>> {
    let mut out = theta.to_vec();
    sgd_step_in_place(&mut out, grad, lr)?;
    Ok(out)
}

pub fn sgd_step_in_place(theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    check_dim(theta.len(), grad.len())?;
    check_lr(lr)?;
    check_finite("grad", grad)?;
    for (p, g) in theta.iter_mut().zip(grad) {
        *p -= lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPSILON: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        Self::with_hyper(dim, Self::BETA1, Self::BETA2, Self::EPSILON)
            .expect("default Adam hyperparameters are valid")
    }

    pub fn with_hyper(dim: usize, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            beta1,
            beta2,
            epsilon,
        })
    }

    /// One bias-corrected Adam update of `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        check_dim(self.m.len(), theta.len())?;
        check_dim(theta.len(), grad.len())?;
        check_lr(lr)?;
        check_finite("grad", grad)?;
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    theta: &[f64],
    grad: &[f64],
    lr: f64,
) -> Result<(AdamState, Vec<f64>)> {
    let mut state = state.clone();
    let mut theta = theta.to_vec();
    state.step(&mut theta, grad, lr)?;
    Ok((state, theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, dim: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(dim)),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Sgd => OptimizerKind::Sgd,
            Optimizer::Adam(_) => OptimizerKind::Adam,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        match self {
            Optimizer::Sgd => sgd_step_in_place(theta, grad, lr),
            Optimizer::Adam(state) => state.step(theta, grad, lr),
        }
    }

    /// Restart hook. Parameters live with the caller and are untouched;
    /// Adam moments and step count are kept as they are. The new LR is
    /// supplied by the schedule on the next call to [`Optimizer::step`].
    pub fn apply_restart(self) -> Self {
        self
    }
}
