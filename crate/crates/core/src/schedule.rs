//! Per-epoch learning-rate schedules.
//!
//! Every schedule is a pure function of its parameters and a handful of
//! counters. [`ScheduleState`] bundles those counters and is advanced by
//! [`ScheduleEvent`]s; replaying the same event sequence always yields the
//! same LR series, bit for bit.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Lower bound applied to every emitted learning rate.
pub const LR_FLOOR: f64 = 1e-8;

/// How the escalating-restart schedule decays inside one restart segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayMode {
    /// `peak * factor^t` where `t` counts epochs since the last restart.
    Exp { factor: f64 },
    /// Linear from the peak down to `eta_min` over `intra_budget` epochs.
    Lin { intra_budget: u32, eta_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// Fixed LR. Used for the Adam baseline.
    Constant,
    ExpDecay {
        decay_factor: f64,
    },
    LinDecay {
        budget: u32,
        eta_min: f64,
    },
    /// SGDR: cosine from `eta_max` to `eta_min`, cycle `i` lasting
    /// `t0 * t_mult^i` epochs.
    CosineWarmRestarts {
        eta_min: f64,
        eta_max: f64,
        t0: u32,
        t_mult: u32,
    },
    /// Triangular cyclical LR with period `2 * step_size`.
    Cyclical {
        eta_base: f64,
        eta_max: f64,
        step_size: u32,
    },
    /// Warmup-stable-decay, simplified: linear ramp, plateau, then
    /// exponential decay.
    WsdSimplified {
        warmup: u32,
        stable_lr: f64,
        decay_start: u32,
        decay_factor: f64,
    },
    /// Plateau-triggered restarts with `eta_k = (k + 1) * eta0`.
    EscalatingRestarts(DecayMode),
}

impl ScheduleKind {
    pub fn is_restarting(&self) -> bool {
        matches!(self, ScheduleKind::EscalatingRestarts(_))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScheduleKind::Constant => Ok(()),
            ScheduleKind::ExpDecay { decay_factor } => check_factor(decay_factor),
            ScheduleKind::LinDecay { budget, eta_min } => {
                if budget == 0 {
                    return Err(Error::Domain("linear decay budget must be >= 1".into()));
                }
                check_positive("eta_min", eta_min)
            }
            ScheduleKind::CosineWarmRestarts {
                eta_min,
                eta_max,
                t0,
                t_mult,
            } => check_cosine(eta_min, eta_max, t0, t_mult),
            ScheduleKind::Cyclical {
                eta_base,
                eta_max,
                step_size,
            } => check_cyclical(eta_base, eta_max, step_size),
            ScheduleKind::WsdSimplified {
                warmup,
                stable_lr,
                decay_start,
                decay_factor,
            } => check_wsds(warmup, stable_lr, decay_start, decay_factor),
            ScheduleKind::EscalatingRestarts(mode) => match mode {
                DecayMode::Exp { factor } => {
                    // factor == 1 is allowed: no decay inside a segment
                    if factor > 0.0 && factor <= 1.0 {
                        Ok(())
                    } else {
                        Err(Error::Domain(format!(
                            "intra-restart decay factor must lie in (0, 1], got {factor}"
                        )))
                    }
                }
                DecayMode::Lin {
                    intra_budget,
                    eta_min,
                } => {
                    if intra_budget == 0 {
                        return Err(Error::Domain("intra-restart budget must be >= 1".into()));
                    }
                    check_positive("eta_min", eta_min)
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleEvent {
    EpochEnd,
    RestartTriggered,
}

/// Counters plus parameters for one schedule instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    kind: ScheduleKind,
    eta0: f64,
    epoch: u32,
    restart_count: u32,
    epoch_in_cycle: u32,
}

impl ScheduleState {
    pub fn new(kind: ScheduleKind, eta0: f64) -> Result<Self> {
        check_positive("eta0", eta0)?;
        kind.validate()?;
        Ok(Self {
            kind,
            eta0,
            epoch: 0,
            restart_count: 0,
            epoch_in_cycle: 0,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn restart_count(&self) -> u32 {
        self.restart_count
    }

    /// Epochs since the last restart (escalating restarts) or since the last
    /// cycle boundary (cosine, cyclical).
    pub fn epoch_in_cycle(&self) -> u32 {
        self.epoch_in_cycle
    }

    /// LR for the epoch the state currently points at.
    pub fn lr(&self) -> f64 {
        let t = self.epoch;
        // Parameters were validated in `new`, so none of these can fail.
        let lr = match self.kind {
            ScheduleKind::Constant => Ok(self.eta0.max(LR_FLOOR)),
            ScheduleKind::ExpDecay { decay_factor } => exp_decay_lr(self.eta0, decay_factor, t),
            ScheduleKind::LinDecay { budget, eta_min } => {
                lin_decay_lr(self.eta0, budget, eta_min, t)
            }
            ScheduleKind::CosineWarmRestarts {
                eta_min,
                eta_max,
                t0,
                t_mult,
            } => cosine_warm_restart_lr(eta_min, eta_max, t0, t_mult, t),
            ScheduleKind::Cyclical {
                eta_base,
                eta_max,
                step_size,
            } => cyclical_lr(eta_base, eta_max, step_size, t),
            ScheduleKind::WsdSimplified {
                warmup,
                stable_lr,
                decay_start,
                decay_factor,
            } => wsds_lr(warmup, stable_lr, decay_start, decay_factor, t),
            ScheduleKind::EscalatingRestarts(mode) => {
                sgd_er_lr(self.eta0, self.restart_count, mode, self.epoch_in_cycle)
            }
        };
        lr.expect("schedule parameters validated at construction")
    }

    /// Applies one event and returns the successor state.
    pub fn advance(&self, event: ScheduleEvent) -> Result<Self> {
        let mut next = *self;
        match event {
            ScheduleEvent::EpochEnd => {
                next.epoch += 1;
                next.epoch_in_cycle = match self.kind {
                    ScheduleKind::CosineWarmRestarts { t0, t_mult, .. } => {
                        cosine_cycle_position(t0, t_mult, next.epoch).0
                    }
                    ScheduleKind::Cyclical { step_size, .. } => {
                        next.epoch % (2 * step_size)
                    }
                    _ => self.epoch_in_cycle + 1,
                };
            }
            ScheduleEvent::RestartTriggered => {
                if !self.kind.is_restarting() {
                    return Err(Error::Logic(format!(
                        "restart requested on non-restarting schedule {:?}",
                        self.kind
                    )));
                }
                next.restart_count += 1;
                next.epoch_in_cycle = 0;
            }
        }
        Ok(next)
    }
}

/// `eta_k = (k + 1) * eta0`.
pub fn escalated_lr(k: u32, eta0: f64) -> Result<f64> {
    check_positive("eta0", eta0)?;
    Ok(f64::from(k + 1) * eta0)
}

pub fn exp_decay_lr(eta0: f64, decay_factor: f64, t: u32) -> Result<f64> {
    check_positive("eta0", eta0)?;
    check_factor(decay_factor)?;
    Ok((eta0 * powi(decay_factor, t)).max(LR_FLOOR))
}

pub fn lin_decay_lr(eta0: f64, budget: u32, eta_min: f64, t: u32) -> Result<f64> {
    check_positive("eta0", eta0)?;
    if budget == 0 {
        return Err(Error::Domain("linear decay budget must be >= 1".into()));
    }
    check_positive("eta_min", eta_min)?;
    let frac = 1.0 - f64::from(t) / f64::from(budget);
    Ok((eta0 * frac).max(eta_min).max(LR_FLOOR))
}

/// Position inside the current SGDR cycle: `(epochs into cycle, cycle length)`.
pub fn cosine_cycle_position(t0: u32, t_mult: u32, t: u32) -> (u32, u32) {
    let mut len = u64::from(t0.max(1));
    let mut start = 0u64;
    let t = u64::from(t);
    while t >= start + len {
        start += len;
        len *= u64::from(t_mult.max(1));
    }
    let len = u32::try_from(len).unwrap_or(u32::MAX);
    ((t - start) as u32, len)
}

pub fn cosine_warm_restart_lr(
    eta_min: f64,
    eta_max: f64,
    t0: u32,
    t_mult: u32,
    t: u32,
) -> Result<f64> {
    check_cosine(eta_min, eta_max, t0, t_mult)?;
    let (pos, len) = cosine_cycle_position(t0, t_mult, t);
    let phase = PI * f64::from(pos) / f64::from(len);
    let lr = eta_min + 0.5 * (eta_max - eta_min) * (1.0 + phase.cos());
    Ok(lr.max(LR_FLOOR))
}

pub fn cyclical_lr(eta_base: f64, eta_max: f64, step_size: u32, t: u32) -> Result<f64> {
    check_cyclical(eta_base, eta_max, step_size)?;
    let step = f64::from(step_size);
    let cycle = (1.0 + f64::from(t) / (2.0 * step)).floor();
    let x = (f64::from(t) / step - 2.0 * cycle + 1.0).abs();
    let lr = eta_base + (eta_max - eta_base) * (1.0 - x).max(0.0);
    Ok(lr.max(LR_FLOOR))
}

pub fn wsds_lr(
    warmup: u32,
    stable_lr: f64,
    decay_start: u32,
    decay_factor: f64,
    t: u32,
) -> Result<f64> {
    check_wsds(warmup, stable_lr, decay_start, decay_factor)?;
    let lr = if t < warmup {
        stable_lr * f64::from(t) / f64::from(warmup)
    } else if t <= decay_start {
        stable_lr
    } else {
        stable_lr * powi(decay_factor, t - decay_start)
    };
    Ok(lr.max(LR_FLOOR))
}

/// LR of the escalating-restart schedule after `k` restarts and
/// `t_since_restart` epochs into the current segment.
pub fn sgd_er_lr(eta0: f64, k: u32, mode: DecayMode, t_since_restart: u32) -> Result<f64> {
    let peak = escalated_lr(k, eta0)?;
    let lr = match mode {
        DecayMode::Exp { factor } => peak * powi(factor, t_since_restart),
        DecayMode::Lin {
            intra_budget,
            eta_min,
        } => {
            let frac = 1.0 - f64::from(t_since_restart) / f64::from(intra_budget.max(1));
            (peak * frac).max(eta_min)
        }
    };
    Ok(lr.max(LR_FLOOR))
}

fn powi(base: f64, exp: u32) -> f64 {
    base.powi(i32::try_from(exp).unwrap_or(i32::MAX))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_factor(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("decay factor must lie in (0, 1), got {f}")))
    }
}

fn check_cosine(eta_min: f64, eta_max: f64, t0: u32, t_mult: u32) -> Result<()> {
    // eta_min == 0 is accepted; the floor keeps the emitted LR positive
    if !(eta_min >= 0.0 && eta_max >= eta_min && eta_max > 0.0) {
        return Err(Error::Domain(format!(
            "cosine bounds need 0 <= eta_min <= eta_max, got [{eta_min}, {eta_max}]"
        )));
    }
    if t0 == 0 || t_mult == 0 {
        return Err(Error::Domain("cosine T_0 and T_mult must be >= 1".into()));
    }
    Ok(())
}

fn check_cyclical(eta_base: f64, eta_max: f64, step_size: u32) -> Result<()> {
    check_positive("eta_base", eta_base)?;
    if eta_max < eta_base {
        return Err(Error::Domain(format!(
            "cyclical bounds need eta_base <= eta_max, got [{eta_base}, {eta_max}]"
        )));
    }
    if step_size == 0 {
        return Err(Error::Domain("cyclical step_size must be >= 1".into()));
    }
    Ok(())
}

fn check_wsds(warmup: u32, stable_lr: f64, decay_start: u32, decay_factor: f64) -> Result<()> {
    check_positive("stable_lr", stable_lr)?;
    check_factor(decay_factor)?;
    if decay_start < warmup {
        return Err(Error::Config(format!(
            "WSD decay_start ({decay_start}) precedes end of warmup ({warmup})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn er_exp(factor: f64) -> ScheduleKind {
        ScheduleKind::EscalatingRestarts(DecayMode::Exp { factor })
    }

    #[test]
    fn escalated_lr_examples() {
        assert_eq!(escalated_lr(0, 0.01).unwrap(), 0.01);
        assert_relative_eq!(escalated_lr(3, 0.01).unwrap(), 0.04, max_relative = 1e-15);
        assert_relative_eq!(escalated_lr(9, 0.001).unwrap(), 0.01, max_relative = 1e-15);
        assert!(escalated_lr(1, 0.0).is_err());
        assert!(escalated_lr(1, -0.1).is_err());
    }

    #[test]
    fn exp_decay_examples() {
        assert_eq!(exp_decay_lr(0.01, 0.99, 0).unwrap(), 0.01);
        assert_relative_eq!(exp_decay_lr(0.01, 0.5, 2).unwrap(), 0.0025);
        // 0.99^100 by repeated multiplication
        let mut expected = 0.01;
        for _ in 0..100 {
            expected *= 0.99;
        }
        assert_relative_eq!(exp_decay_lr(0.01, 0.99, 100).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 3.660e-3, max_relative = 1e-3);
        assert!(exp_decay_lr(0.01, 1.0, 3).is_err());
        assert!(exp_decay_lr(0.01, 0.0, 3).is_err());
    }

    #[test]
    fn lin_decay_examples() {
        assert_eq!(lin_decay_lr(0.01, 100, 1e-6, 0).unwrap(), 0.01);
        assert_relative_eq!(lin_decay_lr(0.01, 100, 1e-6, 50).unwrap(), 0.005);
        assert_eq!(lin_decay_lr(0.01, 100, 1e-6, 200).unwrap(), 1e-6);
        assert!(lin_decay_lr(0.01, 0, 1e-6, 1).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_warm_restart_lr(0.0, 0.01, 100, 1, 0).unwrap(), 0.01);
        assert_relative_eq!(
            cosine_warm_restart_lr(0.0, 0.01, 100, 1, 50).unwrap(),
            0.005,
            max_relative = 1e-12
        );
        assert_eq!(cosine_warm_restart_lr(0.0, 0.01, 100, 2, 100).unwrap(), 0.01);
        assert_eq!(cosine_cycle_position(100, 2, 100), (0, 200));
        assert_eq!(cosine_cycle_position(100, 2, 299), (199, 200));
        assert_eq!(cosine_cycle_position(100, 2, 300), (0, 400));
    }

    #[test]
    fn cosine_is_symmetric_and_approaches_min() {
        let (lo, hi) = (1e-4, 0.01);
        for pos in 1..50 {
            let a = cosine_warm_restart_lr(lo, hi, 100, 1, 50 - pos).unwrap();
            let b = cosine_warm_restart_lr(lo, hi, 100, 1, 50 + pos).unwrap();
            assert_relative_eq!(a - lo, hi - b, max_relative = 1e-9);
        }
        let last = cosine_warm_restart_lr(lo, hi, 100, 1, 99).unwrap();
        assert!(last - lo < 1e-3 * (hi - lo));
    }

    #[test]
    fn cyclical_examples() {
        assert_relative_eq!(cyclical_lr(0.001, 0.01, 50, 0).unwrap(), 0.001);
        assert_relative_eq!(cyclical_lr(0.001, 0.01, 50, 50).unwrap(), 0.01);
        assert_relative_eq!(cyclical_lr(0.001, 0.01, 50, 75).unwrap(), 0.0055, max_relative = 1e-12);
        assert_relative_eq!(cyclical_lr(0.001, 0.01, 50, 100).unwrap(), 0.001);
    }

    #[test]
    fn cyclical_period_and_range() {
        for t in 0..400 {
            let a = cyclical_lr(0.001, 0.01, 20, t).unwrap();
            let b = cyclical_lr(0.001, 0.01, 20, t + 40).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
            assert!((0.001 - 1e-15..=0.01 + 1e-15).contains(&a));
        }
    }

    #[test]
    fn wsds_examples() {
        assert_eq!(wsds_lr(10, 0.01, 500, 0.95, 10).unwrap(), 0.01);
        assert_eq!(wsds_lr(10, 0.01, 500, 0.95, 250).unwrap(), 0.01);
        let mut expected = 0.01;
        for _ in 0..10 {
            expected *= 0.95;
        }
        assert_relative_eq!(wsds_lr(10, 0.01, 500, 0.95, 510).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 5.987e-3, max_relative = 1e-3);
        assert_relative_eq!(wsds_lr(10, 0.01, 500, 0.95, 5).unwrap(), 0.005);
        assert!(matches!(wsds_lr(10, 0.01, 5, 0.95, 0), Err(Error::Config(_))));
    }

    #[test]
    fn sgd_er_examples() {
        let mode = DecayMode::Exp { factor: 0.99 };
        assert_eq!(sgd_er_lr(0.01, 0, mode, 0).unwrap(), 0.01);
        assert_eq!(sgd_er_lr(0.01, 1, mode, 0).unwrap(), 0.02);
        let mut expected = 0.02;
        for _ in 0..10 {
            expected *= 0.99;
        }
        assert_relative_eq!(sgd_er_lr(0.01, 1, mode, 10).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 1.809e-2, max_relative = 1e-3);

        let lin = DecayMode::Lin {
            intra_budget: 100,
            eta_min: 1e-5,
        };
        assert_relative_eq!(sgd_er_lr(0.01, 1, lin, 50).unwrap(), 0.01);
        assert_eq!(sgd_er_lr(0.01, 1, lin, 500).unwrap(), 1e-5);
    }

    #[test]
    fn advance_examples() {
        let mut s = ScheduleState::new(er_exp(0.99), 0.01).unwrap();
        for _ in 0..5 {
            s = s.advance(ScheduleEvent::EpochEnd).unwrap();
        }
        assert_eq!((s.restart_count(), s.epoch()), (0, 5));
        let s = s.advance(ScheduleEvent::EpochEnd).unwrap();
        assert_eq!((s.restart_count(), s.epoch()), (0, 6));

        let mut s = ScheduleState::new(er_exp(0.99), 0.01).unwrap();
        for _ in 0..120 {
            s = s.advance(ScheduleEvent::EpochEnd).unwrap();
        }
        assert_eq!(s.epoch_in_cycle(), 120);
        let s = s.advance(ScheduleEvent::RestartTriggered).unwrap();
        assert_eq!((s.restart_count(), s.epoch_in_cycle()), (1, 0));
        assert_eq!(s.lr(), 0.02);

        let clr = ScheduleKind::Cyclical {
            eta_base: 0.001,
            eta_max: 0.01,
            step_size: 50,
        };
        let s = ScheduleState::new(clr, 0.01).unwrap();
        assert!(matches!(
            s.advance(ScheduleEvent::RestartTriggered),
            Err(Error::Logic(_))
        ));
    }

    #[test]
    fn state_rejects_bad_params() {
        assert!(ScheduleState::new(ScheduleKind::Constant, 0.0).is_err());
        assert!(ScheduleState::new(
            ScheduleKind::Cyclical {
                eta_base: 0.01,
                eta_max: 0.001,
                step_size: 5
            },
            0.01
        )
        .is_err());
        assert!(ScheduleState::new(
            ScheduleKind::CosineWarmRestarts {
                eta_min: 0.0,
                eta_max: 0.01,
                t0: 0,
                t_mult: 1
            },
            0.01
        )
        .is_err());
    }

    #[test]
    fn floor_holds_under_long_decay() {
        let mut s = ScheduleState::new(ScheduleKind::ExpDecay { decay_factor: 0.5 }, 0.01).unwrap();
        for _ in 0..2000 {
            assert!(s.lr() >= LR_FLOOR);
            s = s.advance(ScheduleEvent::EpochEnd).unwrap();
        }
        assert_eq!(s.lr(), LR_FLOOR);
    }
}
