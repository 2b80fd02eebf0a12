//! Multi-seed aggregation across scheduler variants.

use std::path::Path;

use super::config::{RunConfig, Variant};
use super::run::{train_run, RunRecord, RunSummary};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: [&str; 5] = ["scheduler", "metric", "mean", "std", "n_seeds"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TrainLoss,
    ValLoss,
    TestLoss,
    TestAcc,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::TrainLoss, Metric::ValLoss, Metric::TestLoss, Metric::TestAcc];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::TrainLoss => "best_train_loss",
            Metric::ValLoss => "best_val_loss",
            Metric::TestLoss => "best_test_loss",
            Metric::TestAcc => "best_test_acc",
        }
    }

    pub fn of(&self, s: &RunSummary) -> f64 {
        match self {
            Metric::TrainLoss => s.best_train_loss,
            Metric::ValLoss => s.best_val_loss,
            Metric::TestLoss => s.best_test_loss,
            Metric::TestAcc => s.best_test_acc,
        }
    }
}

/// Mean and sample standard deviation (n - 1 denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantReport {
    pub variant: Variant,
    pub records: Vec<RunRecord>,
    /// Set when any seed diverged or errored.
    pub failure: Option<String>,
}

impl VariantReport {
    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.records.iter().map(|r| metric.of(&r.summary())).collect()
    }

    /// `None` for failed variants.
    pub fn aggregate(&self, metric: Metric) -> Option<(f64, f64)> {
        if self.is_failed() {
            None
        } else {
            Some(mean_std(&self.values(metric)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantReport>,
}

impl ComparisonReport {
    pub fn get(&self, variant: Variant) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.variant == variant)
    }

    /// Variant with the lowest mean of `metric` among non-failed ones
    /// (highest for accuracy).
    pub fn best(&self, metric: Metric) -> Option<Variant> {
        let sign = if metric == Metric::TestAcc { -1.0 } else { 1.0 };
        self.variants
            .iter()
            .filter_map(|v| v.aggregate(metric).map(|(m, _)| (v.variant, sign * m)))
            .filter(|(_, m)| !m.is_nan())
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(v, _)| v)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let n = self.seeds.len().to_string();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut inner = || -> csv::Result<()> {
            w.write_record(SUMMARY_HEADER)?;
            for v in &self.variants {
                if v.is_failed() {
                    w.write_record([v.variant.name(), "failed", "NaN", "NaN", &n])?;
                    continue;
                }
                for m in Metric::ALL {
                    let (mean, std) = mean_std(&v.values(m));
                    w.write_record([v.variant.name(), m.name(), &mean.to_string(), &std.to_string(), &n])?;
                }
            }
            w.flush()?;
            Ok(())
        };
        inner().map_err(|e| Error::csv("<memory>", e))?;
        w.into_inner()
            .map_err(|e| Error::Data(format!("csv buffer: {e}")))
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn run_variant(base: &RunConfig, variant: Variant, seeds: &[u64]) -> VariantReport {
    let cfg = base.for_variant(variant);
    let mut records = Vec::with_capacity(seeds.len());
    let mut failure = None;
    for &seed in seeds {
        match train_run(&cfg, seed) {
            Ok(rec) => {
                if rec.is_failed() && failure.is_none() {
                    failure = Some(format!("seed {seed}: {}", rec.stop));
                }
                records.push(rec);
            }
            Err(e) => {
                failure.get_or_insert_with(|| format!("seed {seed}: {e}"));
            }
        }
    }
    VariantReport {
        variant,
        records,
        failure,
    }
}

/// Trains every variant on every seed, one thread per variant.
pub fn compare(base: &RunConfig, variants: &[Variant], seeds: &[u64]) -> Result<ComparisonReport> {
    if variants.is_empty() {
        return Err(Error::Config("no scheduler variants to compare".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    base.validate()?;
    let reports = std::thread::scope(|s| {
        let handles: Vec<_> = variants
            .iter()
            .map(|&v| s.spawn(move || run_variant(base, v, seeds)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("variant worker panicked"))
            .collect()
    });
    Ok(ComparisonReport {
        seeds: seeds.to_vec(),
        variants: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert_relative_eq!(s, (32.0f64 / 7.0).sqrt(), max_relative = 1e-15);
        assert_eq!(mean_std(&[3.5]), (3.5, 0.0));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let cfg = RunConfig::default();
        assert!(compare(&cfg, &[], &[1]).is_err());
        assert!(compare(&cfg, &[Variant::SgdExp], &[]).is_err());
    }
}
