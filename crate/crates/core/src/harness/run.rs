//! One training run: the epoch loop that wires schedule, plateau detector,
//! optimizer and landscape together.
//!
//! Row `e` of a record describes the parameters after `e` training epochs:
//! their train/val/test metrics, then the LR used for the following epoch.
//! Validation loss is fed to the plateau detector before that LR is chosen,
//! so a restart triggered by row `e`'s loss shows up in the same row with
//! the escalated rate.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{LandscapeSpec, RunConfig, Variant};
use crate::convergence::{PlateauDetector, PlateauSignal, RestartController, RestartDecision, StopReason};
use crate::error::{Error, Result};
use crate::landscape::{Landscape, MlpObjective, Split, SyntheticDataset};
use crate::optim::Optimizer;
use crate::schedule::{ScheduleEvent, ScheduleKind, ScheduleState};

pub const RECORD_HEADER: [&str; 8] = [
    "epoch",
    "lr",
    "train_loss",
    "val_loss",
    "test_loss",
    "test_acc",
    "restart",
    "k",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRow {
    pub epoch: u32,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub test_loss: f64,
    /// NaN for landscapes without a notion of accuracy.
    pub test_acc: f64,
    pub restart: bool,
    pub k: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStop {
    BudgetExhausted,
    NoImprovementAfterRestart,
    Diverged(String),
}

impl From<StopReason> for RunStop {
    fn from(r: StopReason) -> Self {
        match r {
            StopReason::BudgetExhausted => RunStop::BudgetExhausted,
            StopReason::NoImprovementAfterRestart => RunStop::NoImprovementAfterRestart,
        }
    }
}

impl fmt::Display for RunStop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStop::BudgetExhausted => f.write_str("budget exhausted"),
            RunStop::NoImprovementAfterRestart => f.write_str("no improvement after restart"),
            RunStop::Diverged(why) => write!(f, "diverged: {why}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub best_train_loss: f64,
    pub best_val_loss: f64,
    pub best_test_loss: f64,
    pub best_test_acc: f64,
    pub epochs: usize,
    pub restarts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub variant: Variant,
    pub seed: u64,
    pub eta0: f64,
    pub rows: Vec<RunRow>,
    pub stop: RunStop,
}

fn nan_min(v: impl Iterator<Item = f64>) -> f64 {
    v.filter(|x| !x.is_nan()).fold(f64::NAN, f64::min)
}

fn nan_max(v: impl Iterator<Item = f64>) -> f64 {
    v.filter(|x| !x.is_nan()).fold(f64::NAN, f64::max)
}

impl RunRecord {
    pub fn label(&self) -> String {
        format!("{}_seed{}", self.variant, self.seed)
    }

    /// Best-over-epochs metrics. NaN rows are ignored.
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            best_train_loss: nan_min(self.rows.iter().map(|r| r.train_loss)),
            best_val_loss: nan_min(self.rows.iter().map(|r| r.val_loss)),
            best_test_loss: nan_min(self.rows.iter().map(|r| r.test_loss)),
            best_test_acc: nan_max(self.rows.iter().map(|r| r.test_acc)),
            epochs: self.rows.len(),
            restarts: self.rows.last().map_or(0, |r| r.k),
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self.stop, RunStop::Diverged(_))
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        write_rows(&mut w, &self.rows).map_err(|e| Error::csv("<memory>", e))?;
        w.into_inner()
            .map_err(|e| Error::Data(format!("csv buffer: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn write_rows<W: std::io::Write>(w: &mut csv::Writer<W>, rows: &[RunRow]) -> csv::Result<()> {
    w.write_record(RECORD_HEADER)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.lr.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.test_loss.to_string(),
            r.test_acc.to_string(),
            u8::from(r.restart).to_string(),
            r.k.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the rows of a record CSV.
pub fn read_record_csv(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().ne(RECORD_HEADER) {
        return Err(Error::Data(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header
        )));
    }
    fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
        rec[i].parse().map_err(|_| {
            Error::Data(format!("{}: bad {} value {:?}", path.display(), RECORD_HEADER[i], &rec[i]))
        })
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            Ok(RunRow {
                epoch: field(&rec, 0, path)?,
                lr: field(&rec, 1, path)?,
                train_loss: field(&rec, 2, path)?,
                val_loss: field(&rec, 3, path)?,
                test_loss: field(&rec, 4, path)?,
                test_acc: field(&rec, 5, path)?,
                restart: field::<u8>(&rec, 6, path)? == 1,
                k: field(&rec, 7, path)?,
            })
        })
        .collect()
}

/// Per-run RNG streams split off one master seed, so every variant run
/// with the same seed sees the same data and initial parameters.
struct Streams {
    data: ChaCha8Rng,
    init: ChaCha8Rng,
    noise: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let master = ChaCha8Rng::seed_from_u64(seed);
        let stream = |id: u64| {
            let mut rng = master.clone();
            rng.set_stream(id);
            rng
        };
        Self {
            data: stream(1),
            init: stream(2),
            noise: stream(3),
        }
    }
}

struct Metrics {
    train: f64,
    val: f64,
    test: f64,
    acc: f64,
}

impl Metrics {
    fn all_finite(&self) -> bool {
        self.train.is_finite() && self.val.is_finite() && self.test.is_finite()
    }
}

enum Problem {
    Mlp {
        objective: MlpObjective,
        batch_size: Option<usize>,
    },
    Analytic {
        landscape: Box<dyn Landscape>,
        grad_noise: f64,
    },
}

impl Problem {
    fn build(cfg: &RunConfig, streams: &mut Streams) -> Result<(Self, Vec<f64>)> {
        match &cfg.landscape {
            LandscapeSpec::Mlp { data, hidden } => {
                let dataset = SyntheticDataset::generate(data, &mut streams.data)?;
                let objective = MlpObjective::new(*hidden, dataset)?;
                let theta = objective.shape().init_params(&mut streams.init);
                Ok((
                    Problem::Mlp {
                        objective,
                        batch_size: cfg.batch_size,
                    },
                    theta,
                ))
            }
            LandscapeSpec::MultiBasin {
                basin,
                start,
                start_jitter,
                grad_noise,
            } => {
                let theta = start
                    .iter()
                    .map(|s| {
                        let z: f64 = streams.init.sample(StandardNormal);
                        s + start_jitter * z
                    })
                    .collect();
                Ok((
                    Problem::Analytic {
                        landscape: Box::new(basin.clone()),
                        grad_noise: *grad_noise,
                    },
                    theta,
                ))
            }
            LandscapeSpec::Saddle { .. } => Err(Error::Config(
                "the saddle landscape is unbounded below; use the saddle sweep instead".into(),
            )),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Problem::Mlp { objective, .. } => objective.param_count(),
            Problem::Analytic { landscape, .. } => landscape.dim(),
        }
    }

    fn metrics(&self, theta: &[f64]) -> Result<Metrics> {
        match self {
            Problem::Mlp { objective, .. } => {
                let (train, _) = objective.evaluate_split(theta, Split::Train)?;
                let (val, _) = objective.evaluate_split(theta, Split::Val)?;
                let (test, acc) = match objective.data().indices(Split::Test) {
                    [] => (f64::NAN, f64::NAN),
                    idx => objective.evaluate(theta, idx)?,
                };
                Ok(Metrics {
                    train,
                    val,
                    test,
                    acc,
                })
            }
            Problem::Analytic { landscape, .. } => {
                let v = landscape.value(theta)?;
                Ok(Metrics {
                    train: v,
                    val: v,
                    test: v,
                    acc: f64::NAN,
                })
            }
        }
    }

    fn train_epoch(
        &self,
        theta: &mut [f64],
        optimizer: &mut Optimizer,
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        match self {
            Problem::Mlp {
                objective,
                batch_size,
            } => {
                let mut order = objective.data().indices(Split::Train).to_vec();
                let size = batch_size.unwrap_or(order.len()).max(1);
                if size < order.len() {
                    order.shuffle(rng);
                }
                for batch in order.chunks(size) {
                    let (_, grad) = objective.loss_grad(theta, batch)?;
                    optimizer.step(theta, &grad, lr)?;
                }
                Ok(())
            }
            Problem::Analytic {
                landscape,
                grad_noise,
            } => {
                let (_, mut grad) = landscape.eval(theta)?;
                if *grad_noise > 0.0 {
                    for g in &mut grad {
                        let z: f64 = rng.sample(StandardNormal);
                        *g += grad_noise * z;
                    }
                }
                optimizer.step(theta, &grad, lr)
            }
        }
    }
}

/// Trains `cfg.variant` for one seed. Deterministic in `(cfg, seed)`.
pub fn train_run(cfg: &RunConfig, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    let mut streams = Streams::new(seed);
    let (problem, mut theta) = Problem::build(cfg, &mut streams)?;
    let eta0 = cfg.base_lr();
    let mut schedule = ScheduleState::new(cfg.schedule_kind()?, eta0)?;
    let mut optimizer = Optimizer::new(cfg.variant.optimizer(), problem.dim());
    // plateau detection drives only the escalating variants
    let mut control = if cfg.variant.is_escalating() {
        Some((
            RestartController::new(eta0, cfg.budget)?,
            PlateauDetector::new(cfg.patience, cfg.min_delta)?,
        ))
    } else {
        None
    };

    let mut rows = Vec::with_capacity(cfg.budget as usize);
    let mut stop = RunStop::BudgetExhausted;
    for epoch in 0..cfg.budget {
        let m = problem.metrics(&theta)?;
        let mut row = RunRow {
            epoch,
            lr: schedule.lr(),
            train_loss: m.train,
            val_loss: m.val,
            test_loss: m.test,
            test_acc: m.acc,
            restart: false,
            k: schedule.restart_count(),
        };
        if !m.all_finite() {
            rows.push(row);
            stop = RunStop::Diverged(format!("non-finite loss at epoch {epoch}"));
            break;
        }
        if let Some((controller, detector)) = control.as_mut() {
            controller.record_epoch(m.val)?;
            if detector.observe(m.val)? == PlateauSignal::PlateauDetected {
                match controller.on_plateau(detector) {
                    RestartDecision::Restart { .. } => {
                        schedule = schedule.advance(ScheduleEvent::RestartTriggered)?;
                        optimizer = optimizer.apply_restart();
                        row.restart = true;
                        row.lr = schedule.lr();
                        row.k = schedule.restart_count();
                    }
                    RestartDecision::Stop(reason) => {
                        rows.push(row);
                        stop = reason.into();
                        break;
                    }
                }
            }
        }
        rows.push(row);
        match problem.train_epoch(&mut theta, &mut optimizer, row.lr, &mut streams.noise) {
            Ok(()) => {}
            Err(Error::Numeric(why)) => {
                stop = RunStop::Diverged(why);
                break;
            }
            Err(e) => return Err(e),
        }
        schedule = schedule.advance(ScheduleEvent::EpochEnd)?;
    }
    Ok(RunRecord {
        variant: cfg.variant,
        seed,
        eta0,
        rows,
        stop,
    })
}

/// Recomputes the LR column from the schedule alone, given the recorded
/// restart flags.
pub fn replay_lrs(kind: ScheduleKind, eta0: f64, rows: &[RunRow]) -> Result<Vec<f64>> {
    let mut state = ScheduleState::new(kind, eta0)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.restart {
            state = state.advance(ScheduleEvent::RestartTriggered)?;
        }
        out.push(state.lr());
        state = state.advance(ScheduleEvent::EpochEnd)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::DatasetSpec;

    fn small(variant: Variant) -> RunConfig {
        RunConfig {
            landscape: LandscapeSpec::Mlp {
                data: DatasetSpec {
                    samples: 90,
                    ..DatasetSpec::default()
                },
                hidden: 4,
            },
            budget: 40,
            patience: 5,
            batch_size: Some(16),
            ..RunConfig::default()
        }
        .for_variant(variant)
    }

    #[test]
    fn baseline_runs_full_budget() {
        let rec = train_run(&small(Variant::SgdExp), 1).unwrap();
        assert_eq!(rec.rows.len(), 40);
        assert_eq!(rec.stop, RunStop::BudgetExhausted);
        assert!(rec.rows.iter().enumerate().all(|(i, r)| r.epoch == i as u32 && !r.restart));
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = small(Variant::OursExp);
        let a = train_run(&cfg, 4).unwrap().to_csv_bytes().unwrap();
        let b = train_run(&cfg, 4).unwrap().to_csv_bytes().unwrap();
        assert_eq!(a, b);
        let c = train_run(&cfg, 5).unwrap().to_csv_bytes().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn same_seed_same_start_across_variants() {
        let a = train_run(&small(Variant::SgdExp), 2).unwrap();
        let b = train_run(&small(Variant::Clr), 2).unwrap();
        assert_eq!(a.rows[0].val_loss, b.rows[0].val_loss);
        assert_eq!(a.rows[0].test_acc, b.rows[0].test_acc);
    }

    #[test]
    fn lr_column_replays() {
        for v in Variant::ALL {
            let cfg = small(v);
            let rec = train_run(&cfg, 3).unwrap();
            let replay = replay_lrs(cfg.schedule_kind().unwrap(), cfg.base_lr(), &rec.rows).unwrap();
            let lrs: Vec<f64> = rec.rows.iter().map(|r| r.lr).collect();
            assert_eq!(lrs, replay, "{v}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let rec = train_run(&small(Variant::OursLin), 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        rec.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,lr,train_loss,val_loss,test_loss,test_acc,restart,k\n"));
        assert_eq!(read_record_csv(&path).unwrap(), rec.rows);
    }

    #[test]
    fn saddle_landscape_is_rejected_for_training() {
        let cfg = RunConfig {
            landscape: LandscapeSpec::Saddle {
                eigenvalues: vec![1.0, -1.0],
                rotation: 0.0,
                x0: 1e-3,
                delta: 1.0,
            },
            ..RunConfig::default()
        };
        assert!(matches!(train_run(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn huge_rate_diverges_with_partial_record() {
        let cfg = RunConfig {
            eta0: f64::MAX,
            ..small(Variant::SgdExp)
        };
        let rec = train_run(&cfg, 0).unwrap();
        assert!(matches!(rec.stop, RunStop::Diverged(_)), "{:?}", rec.stop);
        assert!(!rec.rows.is_empty() && rec.rows.len() < 40);
        assert!(rec.is_failed());
    }
}
