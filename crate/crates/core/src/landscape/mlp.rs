use rand::Rng;

use super::{Landscape, Split, SyntheticDataset};
use crate::error::{check_dim, Error, Result};

/// Layer sizes of a one-hidden-layer tanh network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl MlpShape {
    /// Packed layout: `W1 (hidden x inputs)`, `b1`, `W2 (classes x hidden)`, `b2`.
    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.classes * self.hidden + self.classes
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        [w1, b1, w2, b2]
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut theta = vec![0.0; self.param_count()];
        let [w1, b1, w2, b2] = self.offsets();
        let a1 = (6.0 / (self.inputs + self.hidden) as f64).sqrt();
        for p in &mut theta[w1..b1] {
            *p = rng.random_range(-a1..a1);
        }
        let a2 = (6.0 / (self.hidden + self.classes) as f64).sqrt();
        for p in &mut theta[w2..b2] {
            *p = rng.random_range(-a2..a2);
        }
        theta
    }
}

/// Mean softmax cross-entropy of the MLP over subsets of a dataset.
#[derive(Debug, Clone)]
pub struct MlpObjective {
    shape: MlpShape,
    data: SyntheticDataset,
}

struct Forward {
    hidden: Vec<f64>,
    probs: Vec<f64>,
    loss: f64,
}

impl MlpObjective {
    pub fn new(hidden: usize, data: SyntheticDataset) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("hidden layer must have at least one unit".into()));
        }
        let shape = MlpShape {
            inputs: data.features(),
            hidden,
            classes: data.classes(),
        };
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> MlpShape {
        self.shape
    }

    pub fn data(&self) -> &SyntheticDataset {
        &self.data
    }

    pub fn param_count(&self) -> usize {
        self.shape.param_count()
    }

    fn forward(&self, theta: &[f64], sample: usize) -> Forward {
        let MlpShape {
            inputs,
            hidden,
            classes,
        } = self.shape;
        let [w1, b1, w2, b2] = self.shape.offsets();
        let x = self.data.sample(sample);
        let h: Vec<f64> = (0..hidden)
            .map(|j| {
                let row = &theta[w1 + j * inputs..w1 + (j + 1) * inputs];
                let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + theta[b1 + j];
                z.tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..classes)
            .map(|c| {
                let row = &theta[w2 + c * hidden..w2 + (c + 1) * hidden];
                row.iter().zip(&h).map(|(w, a)| w * a).sum::<f64>() + theta[b2 + c]
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let log_norm = max + sum_exp.ln();
        let probs = logits.iter().map(|z| (z - log_norm).exp()).collect();
        let loss = log_norm - logits[self.data.label(sample)];
        Forward {
            hidden: h,
            probs,
            loss,
        }
    }

    /// Mean loss and its gradient over `indices`.
    pub fn loss_grad(&self, theta: &[f64], indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.param_count(), theta.len())?;
        if indices.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let MlpShape {
            inputs,
            hidden,
            classes,
        } = self.shape;
        let [w1, b1, w2, b2] = self.shape.offsets();
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        let mut delta_h = vec![0.0; hidden];
        for &i in indices {
            let fw = self.forward(theta, i);
            loss += fw.loss;
            let x = self.data.sample(i);
            let y = self.data.label(i);
            delta_h.iter_mut().for_each(|d| *d = 0.0);
            for c in 0..classes {
                let dz = fw.probs[c] - if c == y { 1.0 } else { 0.0 };
                grad[b2 + c] += dz;
                for j in 0..hidden {
                    grad[w2 + c * hidden + j] += dz * fw.hidden[j];
                    delta_h[j] += dz * theta[w2 + c * hidden + j];
                }
            }
            for j in 0..hidden {
                let dz = delta_h[j] * (1.0 - fw.hidden[j] * fw.hidden[j]);
                grad[b1 + j] += dz;
                for (k, xk) in x.iter().enumerate() {
                    grad[w1 + j * inputs + k] += dz * xk;
                }
            }
        }
        let n = indices.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    pub fn loss(&self, theta: &[f64], indices: &[usize]) -> Result<f64> {
        self.evaluate(theta, indices).map(|(l, _)| l)
    }

    /// Mean loss and accuracy over `indices`.
    pub fn evaluate(&self, theta: &[f64], indices: &[usize]) -> Result<(f64, f64)> {
        check_dim(self.param_count(), theta.len())?;
        if indices.is_empty() {
            return Err(Error::Data("empty evaluation set".into()));
        }
        let mut loss = 0.0;
        let mut correct = 0usize;
        for &i in indices {
            let fw = self.forward(theta, i);
            loss += fw.loss;
            let pred = fw
                .probs
                .iter()
                .enumerate()
                .fold(0, |best, (c, &p)| if p > fw.probs[best] { c } else { best });
            if pred == self.data.label(i) {
                correct += 1;
            }
        }
        let n = indices.len() as f64;
        Ok((loss / n, correct as f64 / n))
    }

    pub fn evaluate_split(&self, theta: &[f64], split: Split) -> Result<(f64, f64)> {
        self.evaluate(theta, self.data.indices(split))
    }

    /// Restricts the objective to a fixed batch.
    pub fn batch<'a>(&'a self, indices: &'a [usize]) -> MlpBatch<'a> {
        MlpBatch {
            objective: self,
            indices,
        }
    }
}

/// Full-batch loss over the train split.
impl Landscape for MlpObjective {
    fn dim(&self) -> usize {
        self.param_count()
    }

    fn eval(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.loss_grad(theta, self.data.indices(Split::Train))
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.loss(theta, self.data.indices(Split::Train))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MlpBatch<'a> {
    objective: &'a MlpObjective,
    indices: &'a [usize],
}

impl Landscape for MlpBatch<'_> {
    fn dim(&self) -> usize {
        self.objective.param_count()
    }

    fn eval(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.objective.loss_grad(theta, self.indices)
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.objective.loss(theta, self.indices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{fd_gradient, generate_dataset, max_relative_error, DatasetSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn objective(classes: usize) -> MlpObjective {
        let spec = DatasetSpec {
            samples: 60,
            classes,
            ..DatasetSpec::default()
        };
        MlpObjective::new(5, generate_dataset(&spec, 2).unwrap()).unwrap()
    }

    #[test]
    fn zero_weights_give_log_c() {
        for c in [2, 3, 5] {
            let obj = objective(c);
            let theta = vec![0.0; obj.param_count()];
            let all: Vec<usize> = (0..obj.data().len()).collect();
            let (loss, _) = obj.evaluate(&theta, &all).unwrap();
            assert_relative_eq!(loss, (c as f64).ln(), max_relative = 1e-14);
        }
    }

    #[test]
    fn gradient_matches_fd() {
        let obj = objective(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta = obj.shape().init_params(&mut rng);
        let batch: Vec<usize> = (0..12).collect();
        let b = obj.batch(&batch);
        let g = b.eval(&theta).unwrap().1;
        let fd = fd_gradient(&b, &theta, 1e-5).unwrap();
        assert!(max_relative_error(&g, &fd) <= 1e-6);
    }

    #[test]
    fn confident_correct_prediction_has_tiny_loss() {
        // one input, two classes, logit bias makes the right class certain
        let spec = DatasetSpec {
            samples: 2,
            features: 1,
            classes: 2,
            spread: 0.0,
            separation: 1.0,
            fractions: [1.0, 0.0, 0.0],
        };
        let data = generate_dataset(&spec, 0).unwrap();
        let obj = MlpObjective::new(1, data).unwrap();
        // hidden = tanh(50 x), x in {0, 1}; class 1 logit = 100 * h - 50
        let theta = vec![50.0, 0.0, 0.0, 100.0, 0.0, -50.0];
        let all = [0usize, 1];
        let (loss, acc) = obj.evaluate(&theta, &all).unwrap();
        assert!(loss < 1e-20, "{loss}");
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn dimension_and_empty_batch_errors() {
        let obj = objective(3);
        assert!(obj.loss_grad(&[0.0; 3], &[0]).is_err());
        let theta = vec![0.0; obj.param_count()];
        assert!(obj.loss_grad(&theta, &[]).is_err());
    }
}
