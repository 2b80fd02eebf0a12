use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split {other:?}"))),
        }
    }
}

/// Isotropic Gaussian blobs, one per class, with centers spaced evenly on
/// a circle of radius `separation` in the first two feature dimensions
/// (on a line when `features == 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub separation: f64,
    pub spread: f64,
    /// train / val / test
    pub fractions: [f64; 3],
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            samples: 600,
            features: 2,
            classes: 3,
            separation: 1.5,
            spread: 1.0,
            fractions: [0.7, 0.15, 0.15],
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.features == 0 {
            return Err(Error::Config("need at least one feature".into()));
        }
        if self.samples < self.classes {
            return Err(Error::Config(format!(
                "{} samples cannot cover {} classes",
                self.samples, self.classes
            )));
        }
        if self.fractions.iter().any(|f| !(*f >= 0.0)) {
            return Err(Error::Config("split fractions must be non-negative".into()));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        if !(self.spread >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Config("spread must be non-negative, separation finite".into()));
        }
        let sizes = self.split_sizes();
        if sizes[0] == 0 {
            return Err(Error::Config("train split is empty".into()));
        }
        Ok(())
    }

    /// Split sizes: train and val rounded, test takes the remainder.
    pub fn split_sizes(&self) -> [usize; 3] {
        let n = self.samples as f64;
        let train = (self.fractions[0] * n).round() as usize;
        let val = ((self.fractions[1] * n).round() as usize).min(self.samples - train.min(self.samples));
        let train = train.min(self.samples);
        [train, val, self.samples - train - val]
    }

    fn center(&self, class: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.features];
        if self.features == 1 {
            c[0] = self.separation * class as f64;
        } else {
            let angle = 2.0 * std::f64::consts::PI * class as f64 / self.classes as f64;
            c[0] = self.separation * angle.cos();
            c[1] = self.separation * angle.sin();
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    features: usize,
    classes: usize,
    /// Row-major, `len() == samples * features`.
    x: Vec<f64>,
    labels: Vec<usize>,
    splits: Vec<Split>,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

/// Deterministic dataset for a fixed seed.
pub fn generate_dataset(spec: &DatasetSpec, seed: u64) -> Result<SyntheticDataset> {
    SyntheticDataset::generate(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

impl SyntheticDataset {
    pub fn generate<R: Rng + ?Sized>(spec: &DatasetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let centers: Vec<Vec<f64>> = (0..spec.classes).map(|c| spec.center(c)).collect();
        let mut x = Vec::with_capacity(spec.samples * spec.features);
        let mut labels = Vec::with_capacity(spec.samples);
        for i in 0..spec.samples {
            let label = i % spec.classes;
            for c in &centers[label] {
                let z: f64 = rng.sample(StandardNormal);
                x.push(c + spec.spread * z);
            }
            labels.push(label);
        }
        let mut order: Vec<usize> = (0..spec.samples).collect();
        order.shuffle(rng);
        let [n_train, n_val, _] = spec.split_sizes();
        let mut splits = vec![Split::Test; spec.samples];
        for (rank, &i) in order.iter().enumerate() {
            splits[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        Self::from_parts(spec.features, spec.classes, x, labels, splits)
    }

    fn from_parts(
        features: usize,
        classes: usize,
        x: Vec<f64>,
        labels: Vec<usize>,
        splits: Vec<Split>,
    ) -> Result<Self> {
        if x.len() != labels.len() * features || labels.len() != splits.len() {
            return Err(Error::Data("inconsistent dataset arrays".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
        }
        let pick = |s: Split| -> Vec<usize> {
            splits
                .iter()
                .enumerate()
                .filter(|(_, &t)| t == s)
                .map(|(i, _)| i)
                .collect()
        };
        Ok(Self {
            features,
            classes,
            train: pick(Split::Train),
            val: pick(Split::Val),
            test: pick(Split::Test),
            x,
            labels,
            splits,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split_of(&self, i: usize) -> Split {
        self.splits[i]
    }

    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Writes `x0,..,x{d-1},label,split` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header: Vec<String> = (0..self.features).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        header.push("split".into());
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.sample(i).iter().map(|v| v.to_string()).collect();
            row.push(self.labels[i].to_string());
            row.push(self.splits[i].to_string());
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, classes: usize) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
        let width = header.len();
        if width < 3 || &header[width - 2] != "label" || &header[width - 1] != "split" {
            return Err(Error::Data(format!(
                "{}: header must end with label,split",
                path.display()
            )));
        }
        let features = width - 2;
        let (mut x, mut labels, mut splits) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            for j in 0..features {
                x.push(parse_field::<f64>(&rec[j], path)?);
            }
            labels.push(parse_field::<usize>(&rec[features], path)?);
            splits.push(rec[features + 1].parse::<Split>()?);
        }
        Self::from_parts(features, classes, x, labels, splits)
    }
}

fn parse_field<T: FromStr>(s: &str, path: &Path) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Data(format!("{}: cannot parse {s:?}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let spec = DatasetSpec {
            samples: 300,
            classes: 3,
            ..DatasetSpec::default()
        };
        let a = generate_dataset(&spec, 7).unwrap();
        let b = generate_dataset(&spec, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_sizes_and_balance() {
        let spec = DatasetSpec {
            samples: 200,
            ..DatasetSpec::default()
        };
        assert_eq!(spec.split_sizes(), [140, 30, 30]);
        let d = generate_dataset(&spec, 1).unwrap();
        assert_eq!(d.indices(Split::Train).len(), 140);
        assert_eq!(d.indices(Split::Val).len(), 30);
        assert_eq!(d.indices(Split::Test).len(), 30);

        let mut seen = vec![false; d.len()];
        for s in [Split::Train, Split::Val, Split::Test] {
            for &i in d.indices(s) {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));

        let mut counts = vec![0usize; d.classes()];
        for &l in d.labels() {
            counts[l] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1);
    }

    #[test]
    fn infeasible_specs() {
        let few = DatasetSpec {
            samples: 2,
            classes: 3,
            ..DatasetSpec::default()
        };
        assert!(matches!(generate_dataset(&few, 0), Err(Error::Config(_))));
        let bad = DatasetSpec {
            fractions: [0.5, 0.2, 0.2],
            ..DatasetSpec::default()
        };
        assert!(matches!(generate_dataset(&bad, 0), Err(Error::Config(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let d = generate_dataset(&DatasetSpec::default(), 5).unwrap();
        d.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x0,x1,label,split\n"));
        let back = SyntheticDataset::read_csv(&path, 3).unwrap();
        assert_eq!(back, d);
    }
}
