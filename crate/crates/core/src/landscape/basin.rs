use super::Landscape;
use crate::error::{check_dim, Error, Result};

/// Sum of inverted Gaussian wells:
/// `f(x) = sum_i -d_i * exp(-|x - c_i|^2 / (2 w_i^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBasin {
    centers: Vec<Vec<f64>>,
    depths: Vec<f64>,
    widths: Vec<f64>,
}

impl MultiBasin {
    pub fn new(centers: Vec<Vec<f64>>, depths: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Config("multi-basin needs at least one well".into()));
        }
        let dim = centers[0].len();
        if !(dim == 1 || dim == 2) {
            return Err(Error::Config(format!(
                "multi-basin supports 1 or 2 dimensions, got {dim}"
            )));
        }
        for c in &centers {
            check_dim(dim, c.len())?;
        }
        check_dim(centers.len(), depths.len())?;
        check_dim(centers.len(), widths.len())?;
        if widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("well widths must be positive".into()));
        }
        Ok(Self {
            centers,
            depths,
            widths,
        })
    }

    /// A narrow shallow well at the origin next to a wide, deep one.
    pub fn default_2d() -> Self {
        Self::new(
            vec![vec![0.0, 0.0], vec![2.5, 1.5], vec![-2.0, 2.0]],
            vec![1.0, 2.0, 1.5],
            vec![0.3, 1.0, 0.6],
        )
        .expect("default wells are valid")
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }
}

impl Landscape for MultiBasin {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn eval(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), theta.len())?;
        let mut value = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for ((c, &d), &w) in self.centers.iter().zip(&self.depths).zip(&self.widths) {
            let w2 = w * w;
            let r2: f64 = theta.iter().zip(c).map(|(x, ci)| (x - ci).powi(2)).sum();
            let e = (-r2 / (2.0 * w2)).exp();
            value -= d * e;
            for (g, (x, ci)) in grad.iter_mut().zip(theta.iter().zip(c)) {
                *g += d * e * (x - ci) / w2;
            }
        }
        Ok((value, grad))
    }
}
