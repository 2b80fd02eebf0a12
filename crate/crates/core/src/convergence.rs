//! Plateau detection and the restart/stop decisions of escalating restarts.

use crate::error::{Error, Result};
use crate::schedule::escalated_lr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauSignal {
    Continue,
    PlateauDetected,
}

/// Patience-window bookkeeping over a validation-loss stream.
///
/// `best_loss` is the running minimum of every observed loss. The
/// patience counter only resets when a loss beats the previous best by
/// more than `min_delta`, so a slow drift of sub-threshold decreases still
/// counts as stagnation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauDetector {
    patience: u32,
    min_delta: f64,
    best_loss: f64,
    epochs_since_improve: u32,
}

impl PlateauDetector {
    pub fn new(patience: u32, min_delta: f64) -> Result<Self> {
        if patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !(min_delta >= 0.0 && min_delta.is_finite()) {
            return Err(Error::Config(format!(
                "min_delta must be finite and non-negative, got {min_delta}"
            )));
        }
        Ok(Self {
            patience,
            min_delta,
            best_loss: f64::INFINITY,
            epochs_since_improve: 0,
        })
    }

    pub fn patience(&self) -> u32 {
        self.patience
    }

    pub fn min_delta(&self) -> f64 {
        self.min_delta
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn epochs_since_improve(&self) -> u32 {
        self.epochs_since_improve
    }

    pub fn observe(&mut self, val_loss: f64) -> Result<PlateauSignal> {
        if val_loss.is_nan() {
            return Err(Error::Data("validation loss is NaN".into()));
        }
        if val_loss < self.best_loss - self.min_delta {
            self.epochs_since_improve = 0;
        } else {
            self.epochs_since_improve += 1;
        }
        self.best_loss = self.best_loss.min(val_loss);
        if self.epochs_since_improve >= self.patience {
            Ok(PlateauSignal::PlateauDetected)
        } else {
            Ok(PlateauSignal::Continue)
        }
    }

    /// Called when a restart is issued. The best loss survives.
    pub fn reset_counter(&mut self) {
        self.epochs_since_improve = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// A post-restart segment failed to beat the best of earlier segments.
    NoImprovementAfterRestart,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestartDecision {
    Restart { new_k: u32, new_lr: f64 },
    Stop(StopReason),
}

/// Restart history and the two termination rules.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartController {
    eta0: f64,
    restart_count: u32,
    segment_bests: Vec<f64>,
    max_epochs: u32,
    epochs_elapsed: u32,
    stopped: Option<StopReason>,
}

impl RestartController {
    pub fn new(eta0: f64, max_epochs: u32) -> Result<Self> {
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::Domain(format!("eta0 must be positive, got {eta0}")));
        }
        if max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        Ok(Self {
            eta0,
            restart_count: 0,
            segment_bests: Vec::new(),
            max_epochs,
            epochs_elapsed: 0,
            stopped: None,
        })
    }

    /// Builds a controller from explicit per-segment bests, mainly for
    /// checking the stopping rules against hand-traced cases.
    pub fn from_history(
        eta0: f64,
        max_epochs: u32,
        segment_bests: Vec<f64>,
        epochs_elapsed: u32,
    ) -> Result<Self> {
        let mut c = Self::new(eta0, max_epochs)?;
        if segment_bests.is_empty() {
            return Err(Error::Logic("history needs at least one segment".into()));
        }
        if epochs_elapsed > max_epochs {
            return Err(Error::Logic("epochs_elapsed exceeds max_epochs".into()));
        }
        c.restart_count = (segment_bests.len() - 1) as u32;
        c.segment_bests = segment_bests;
        c.epochs_elapsed = epochs_elapsed;
        Ok(c)
    }

    pub fn restart_count(&self) -> u32 {
        self.restart_count
    }

    pub fn segment_bests(&self) -> &[f64] {
        &self.segment_bests
    }

    pub fn epochs_elapsed(&self) -> u32 {
        self.epochs_elapsed
    }

    pub fn max_epochs(&self) -> u32 {
        self.max_epochs
    }

    pub fn global_best(&self) -> f64 {
        self.segment_bests
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stopped
    }

    /// Accounts one epoch's validation loss to the current segment.
    pub fn record_epoch(&mut self, val_loss: f64) -> Result<()> {
        if val_loss.is_nan() {
            return Err(Error::Data("validation loss is NaN".into()));
        }
        if self.stopped.is_some() {
            return Err(Error::Logic("epoch recorded after stop".into()));
        }
        if self.epochs_elapsed >= self.max_epochs {
            self.stopped = Some(StopReason::BudgetExhausted);
            return Err(Error::Logic("epoch budget already exhausted".into()));
        }
        self.epochs_elapsed += 1;
        let k = self.restart_count as usize;
        if self.segment_bests.len() == k {
            self.segment_bests.push(val_loss);
        } else {
            let best = &mut self.segment_bests[k];
            *best = best.min(val_loss);
        }
        Ok(())
    }

    fn rule_fires(&self) -> Option<StopReason> {
        let k = self.restart_count as usize;
        if k >= 1 && self.segment_bests.len() == k + 1 {
            let prev = self.segment_bests[..k]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if self.segment_bests[k] >= prev {
                return Some(StopReason::NoImprovementAfterRestart);
            }
        }
        if self.epochs_elapsed >= self.max_epochs {
            return Some(StopReason::BudgetExhausted);
        }
        None
    }

    /// Whether either termination rule holds. Latches once a stop verdict
    /// has been issued.
    pub fn should_stop(&self) -> bool {
        self.stopped.is_some() || self.rule_fires().is_some()
    }

    /// Decision after the detector reported a plateau: stop, or escalate
    /// to the next restart and reset the detector's patience counter.
    /// Model parameters are not touched here; they carry over unchanged.
    pub fn on_plateau(&mut self, detector: &mut PlateauDetector) -> RestartDecision {
        if let Some(reason) = self.stopped.or_else(|| self.rule_fires()) {
            self.stopped = Some(reason);
            return RestartDecision::Stop(reason);
        }
        self.restart_count += 1;
        detector.reset_counter();
        let new_lr = escalated_lr(self.restart_count, self.eta0)
            .expect("eta0 validated at construction");
        RestartDecision::Restart {
            new_k: self.restart_count,
            new_lr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PlateauSignal::*;

    fn feed(det: &mut PlateauDetector, losses: &[f64]) -> Vec<PlateauSignal> {
        losses.iter().map(|&l| det.observe(l).unwrap()).collect()
    }

    #[test]
    fn strict_improvement_never_plateaus() {
        let mut d = PlateauDetector::new(3, 0.0).unwrap();
        assert_eq!(feed(&mut d, &[1.0, 0.9, 0.8]), vec![Continue; 3]);
    }

    #[test]
    fn flat_losses_fire_after_patience() {
        let mut d = PlateauDetector::new(3, 0.0).unwrap();
        assert_eq!(
            feed(&mut d, &[1.0, 1.0, 1.0, 1.0]),
            vec![Continue, Continue, Continue, PlateauDetected]
        );
    }

    #[test]
    fn sub_threshold_improvements_count_as_stagnation() {
        let mut d = PlateauDetector::new(2, 0.05).unwrap();
        assert_eq!(
            feed(&mut d, &[1.0, 0.97, 0.94]),
            vec![Continue, Continue, PlateauDetected]
        );
        assert_eq!(d.best_loss(), 0.94);
    }

    #[test]
    fn nan_is_a_data_error() {
        let mut d = PlateauDetector::new(2, 0.0).unwrap();
        assert!(matches!(d.observe(f64::NAN), Err(Error::Data(_))));
    }

    #[test]
    fn reset_keeps_best() {
        let mut d = PlateauDetector::new(1, 0.0).unwrap();
        feed(&mut d, &[0.5, 0.6]);
        d.reset_counter();
        assert_eq!(d.best_loss(), 0.5);
        assert_eq!(d.epochs_since_improve(), 0);
        assert_eq!(d.observe(0.55).unwrap(), PlateauDetected);
    }

    #[test]
    fn on_plateau_escalates() {
        let mut c = RestartController::new(0.01, 500).unwrap();
        let mut d = PlateauDetector::new(2, 0.0).unwrap();
        for l in [0.7, 0.5, 0.5, 0.5] {
            c.record_epoch(l).unwrap();
            d.observe(l).unwrap();
        }
        assert_eq!(c.segment_bests(), &[0.5]);
        assert_eq!(
            c.on_plateau(&mut d),
            RestartDecision::Restart {
                new_k: 1,
                new_lr: 0.02
            }
        );
        assert_eq!(d.epochs_since_improve(), 0);
    }

    #[test]
    fn on_plateau_stops_when_segment_fails() {
        let mut c = RestartController::from_history(0.01, 500, vec![0.5, 0.4, 0.45], 90).unwrap();
        let mut d = PlateauDetector::new(2, 0.0).unwrap();
        assert_eq!(
            c.on_plateau(&mut d),
            RestartDecision::Stop(StopReason::NoImprovementAfterRestart)
        );
        assert!(c.should_stop());
    }

    #[test]
    fn on_plateau_stops_at_budget() {
        let mut c = RestartController::from_history(0.01, 100, vec![0.5], 100).unwrap();
        let mut d = PlateauDetector::new(2, 0.0).unwrap();
        assert_eq!(
            c.on_plateau(&mut d),
            RestartDecision::Stop(StopReason::BudgetExhausted)
        );
    }

    #[test]
    fn should_stop_examples() {
        let c = RestartController::from_history(0.01, 100, vec![0.5], 10).unwrap();
        assert!(!c.should_stop());
        let c = RestartController::from_history(0.01, 100, vec![0.5, 0.45], 10).unwrap();
        assert!(!c.should_stop());
        let c = RestartController::from_history(0.01, 100, vec![0.5, 0.45, 0.47], 10).unwrap();
        assert!(c.should_stop());
    }

    #[test]
    fn stop_latches() {
        let mut c = RestartController::new(0.01, 3).unwrap();
        for l in [1.0, 0.9, 0.8] {
            c.record_epoch(l).unwrap();
        }
        assert!(c.should_stop());
        assert!(c.record_epoch(0.1).is_err());
        assert!(c.should_stop());
        assert_eq!(c.epochs_elapsed(), 3);
    }

    #[test]
    fn restart_lrs_follow_arithmetic_sequence() {
        let mut c = RestartController::new(0.01, 10_000).unwrap();
        let mut d = PlateauDetector::new(1, 0.0).unwrap();
        let mut loss = 1.0;
        for k in 1..=6u32 {
            // each segment improves a little, so restarts keep coming
            loss -= 0.01;
            c.record_epoch(loss).unwrap();
            match c.on_plateau(&mut d) {
                RestartDecision::Restart { new_k, new_lr } => {
                    assert_eq!(new_k, k);
                    assert_eq!(new_lr, f64::from(k + 1) * 0.01);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
