//! Differentiable objectives: the quadratic strict saddle, Gaussian
//! multi-basin surfaces, and a two-layer MLP classifier on synthetic data.

mod basin;
mod dataset;
mod mlp;
mod saddle;

pub use basin::MultiBasin;
pub use dataset::{generate_dataset, DatasetSpec, Split, SyntheticDataset};
pub use mlp::{MlpBatch, MlpObjective, MlpShape};
pub use saddle::QuadraticSaddle;

use crate::error::Result;

/// An objective with an analytic gradient.
pub trait Landscape {
    fn dim(&self) -> usize;

    /// Value and gradient at `theta`.
    fn eval(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.eval(theta).map(|(v, _)| v)
    }
}

/// Central-difference gradient, one coordinate at a time.
pub fn fd_gradient<L: Landscape + ?Sized>(landscape: &L, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    crate::error::check_dim(landscape.dim(), theta.len())?;
    if !(h > 0.0) {
        return Err(crate::Error::Domain(format!("fd step must be positive, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = landscape.value(&probe)?;
        probe[i] = orig - h;
        let down = landscape.value(&probe)?;
        probe[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `max|a - b| / max(max|a|, max|b|)`, with a tiny denominator floor so two
/// zero vectors compare equal.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / inf(a).max(inf(b)).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat;

    impl Landscape for Flat {
        fn dim(&self) -> usize {
            3
        }
        fn eval(&self, _theta: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((4.2, vec![0.0; 3]))
        }
    }

    #[test]
    fn fd_of_constant_is_zero() {
        assert_eq!(fd_gradient(&Flat, &[1.0, 2.0, 3.0], 1e-5).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn fd_rejects_bad_step() {
        assert!(fd_gradient(&Flat, &[1.0, 2.0, 3.0], 0.0).is_err());
        assert!(fd_gradient(&Flat, &[1.0], 1e-5).is_err());
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(max_relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((max_relative_error(&[1.0, 2.0], &[1.0, 2.2]) - 0.2 / 2.2).abs() < 1e-15);
    }
}
