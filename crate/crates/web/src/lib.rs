//! Browser bindings: schedule previews, a small training run and the
//! saddle escape sweep, each returning plain numeric series for the page
//! to draw.

use wasm_bindgen::prelude::*;

use sgd_er::escape::{sweep_full, EscapeConfig};
use sgd_er::harness::{train_run, RunConfig, Variant};
use sgd_er::landscape::QuadraticSaddle;
use sgd_er::schedule::{ScheduleEvent, ScheduleState};

fn js(e: sgd_er::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn preview(scheduler: &str, eta0: f64, budget: u32, restart_every: u32) -> sgd_er::Result<Vec<f64>> {
    let variant: Variant = scheduler.parse()?;
    let cfg = RunConfig {
        eta0,
        adam_eta0: eta0,
        budget,
        ..RunConfig::default()
    }
    .for_variant(variant);
    cfg.validate()?;
    let mut state = ScheduleState::new(cfg.schedule_kind()?, eta0)?;
    let mut out = Vec::with_capacity(budget as usize);
    for epoch in 0..budget {
        if state.kind().is_restarting() && restart_every > 0 && epoch > 0 && epoch % restart_every == 0 {
            state = state.advance(ScheduleEvent::RestartTriggered)?;
        }
        out.push(state.lr());
        state = state.advance(ScheduleEvent::EpochEnd)?;
    }
    Ok(out)
}

/// Learning rate per epoch for `scheduler`. Escalating schedulers restart
/// every `restart_every` epochs (0 disables restarts).
#[wasm_bindgen]
pub fn lr_schedule(scheduler: &str, eta0: f64, budget: u32, restart_every: u32) -> Result<Vec<f64>, JsError> {
    preview(scheduler, eta0, budget, restart_every).map_err(js)
}

#[wasm_bindgen]
pub struct TrainSeries {
    lr: Vec<f64>,
    val_loss: Vec<f64>,
    test_acc: Vec<f64>,
    restarts: Vec<u32>,
    stop: String,
}

#[wasm_bindgen]
impl TrainSeries {
    #[wasm_bindgen(getter)]
    pub fn lr(&self) -> Vec<f64> {
        self.lr.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn val_loss(&self) -> Vec<f64> {
        self.val_loss.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn test_acc(&self) -> Vec<f64> {
        self.test_acc.clone()
    }

    /// Epochs at which a restart was issued.
    #[wasm_bindgen(getter)]
    pub fn restarts(&self) -> Vec<u32> {
        self.restarts.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn stop(&self) -> String {
        self.stop.clone()
    }
}

fn train_benchmark(
    scheduler: &str,
    seed: u32,
    budget: u32,
    patience: u32,
    min_delta: f64,
) -> sgd_er::Result<TrainSeries> {
    let cfg = RunConfig {
        budget,
        patience,
        min_delta,
        ..RunConfig::benchmark()
    }
    .for_variant(scheduler.parse()?);
    let rec = train_run(&cfg, u64::from(seed))?;
    Ok(TrainSeries {
        lr: rec.rows.iter().map(|r| r.lr).collect(),
        val_loss: rec.rows.iter().map(|r| r.val_loss).collect(),
        test_acc: rec.rows.iter().map(|r| r.test_acc).collect(),
        restarts: rec.rows.iter().filter(|r| r.restart).map(|r| r.epoch).collect(),
        stop: rec.stop.to_string(),
    })
}

/// Trains the blob-classification MLP with `scheduler`.
#[wasm_bindgen]
pub fn train(scheduler: &str, seed: u32, budget: u32, patience: u32, min_delta: f64) -> Result<TrainSeries, JsError> {
    train_benchmark(scheduler, seed, budget, patience, min_delta).map_err(js)
}

#[wasm_bindgen]
pub struct SaddleSweep {
    bound: Vec<f64>,
    steps: Vec<f64>,
}

#[wasm_bindgen]
impl SaddleSweep {
    #[wasm_bindgen(getter)]
    pub fn bound(&self) -> Vec<f64> {
        self.bound.clone()
    }

    /// Escape iteration per k, NaN where the cap was hit.
    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> Vec<f64> {
        self.steps.clone()
    }
}

fn sweep(eta0: f64, gamma: f64, x0: f64, delta: f64, k_max: u32) -> sgd_er::Result<SaddleSweep> {
    let saddle = QuadraticSaddle::diagonal(vec![1.0, -gamma])?;
    let cfg = EscapeConfig {
        gamma,
        eta0,
        x0,
        delta,
        k_min: 0,
        k_max,
        t_max: 1_000_000,
    };
    let results = sweep_full(&saddle, &cfg)?;
    Ok(SaddleSweep {
        bound: results.iter().map(|r| r.bound).collect(),
        steps: results
            .iter()
            .map(|r| r.t_empirical().map_or(f64::NAN, |t| t as f64))
            .collect(),
    })
}

/// Escape times from the saddle `diag(1, -gamma)` for restarts `0..=k_max`.
#[wasm_bindgen]
pub fn saddle_sweep(eta0: f64, gamma: f64, x0: f64, delta: f64, k_max: u32) -> Result<SaddleSweep, JsError> {
    sweep(eta0, gamma, x0, delta, k_max).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preview_restarts_escalate() {
        let lr = preview("ours_exp", 0.01, 90, 30).unwrap();
        assert_eq!(lr.len(), 90);
        assert_eq!(lr[0], 0.01);
        assert_eq!(lr[30], 0.02);
        assert_eq!(lr[60], 0.03);
        assert!(lr[29] < lr[0]);

        let cos = preview("cosa", 0.01, 90, 30).unwrap();
        assert_eq!(cos[0], 0.01);
        assert!(preview("nope", 0.01, 10, 0).is_err());
    }

    #[test]
    fn training_series_line_up() {
        let s = train_benchmark("ours_exp", 1, 80, 10, 1e-3).unwrap();
        assert!(s.lr.len() <= 80);
        assert_eq!(s.lr.len(), s.val_loss.len());
        assert_eq!(s.lr.len(), s.test_acc.len());
        for &e in &s.restarts {
            assert!(s.lr[e as usize] > s.lr[e as usize - 1]);
        }
    }

    #[test]
    fn saddle_sweep_anchor() {
        let s = sweep(0.05, 1.0, 1e-3, 1.0, 9).unwrap();
        assert_eq!(s.steps.len(), 10);
        assert_eq!(s.steps[1], 73.0);
        assert!(sweep(0.05, 1.0, 2.0, 1.0, 3).is_err());
    }
}
