//! Escape of gradient descent from a strict saddle under escalating
//! learning rates.
//!
//! Along the unstable eigenvector the displacement obeys
//! `x_{t+1} = (1 + eta_k * gamma) x_t`, so leaving a radius-`delta`
//! neighbourhood takes at least `ln(delta / |x0|) / ln(1 + eta_k * gamma)`
//! iterations. For a quadratic the recurrence is exact, which lets the
//! simulations here check the bound without any Taylor remainder.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::landscape::{Landscape, QuadraticSaddle};
use crate::schedule::escalated_lr;

/// Magnitude at which the simulations give up with a numeric error.
pub const OVERFLOW_GUARD: f64 = 1e300;

/// Relative tolerance for the full simulation's projected coordinate
/// against the closed form.
pub const PROJECTION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeConfig {
    pub gamma: f64,
    pub eta0: f64,
    pub x0: f64,
    pub delta: f64,
    /// Inclusive restart range.
    pub k_min: u32,
    pub k_max: u32,
    pub t_max: u64,
}

impl EscapeConfig {
    pub fn validate(&self) -> Result<()> {
        check_escape_args(self.delta, self.x0, self.eta0, self.gamma)?;
        if self.k_min > self.k_max {
            return Err(Error::Config(format!(
                "empty restart range {}..={}",
                self.k_min, self.k_max
            )));
        }
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Escape {
    /// First iteration outside the neighbourhood.
    Escaped(u64),
    DidNotEscape { reached: u64 },
}

impl Escape {
    pub fn steps(&self) -> Option<u64> {
        match *self {
            Escape::Escaped(t) => Some(t),
            Escape::DidNotEscape { .. } => None,
        }
    }
}

impl fmt::Display for Escape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Escape::Escaped(t) => write!(f, "{t}"),
            Escape::DidNotEscape { .. } => f.write_str("DNF"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeResult {
    pub k: u32,
    pub eta_k: f64,
    pub alpha_k: f64,
    pub bound: f64,
    pub escape: Escape,
}

impl EscapeResult {
    pub fn t_empirical(&self) -> Option<u64> {
        self.escape.steps()
    }

    /// The bound sits on an integer, so rounding decides whether the
    /// escape step lands exactly on the radius.
    pub fn is_boundary_tie(&self) -> bool {
        (self.bound - self.bound.round()).abs() <= 1e-9 * self.bound.abs().max(1.0)
    }
}

fn check_escape_args(delta: f64, x0: f64, eta: f64, gamma: f64) -> Result<()> {
    if !(x0 != 0.0 && x0.is_finite()) {
        return Err(Error::Domain(format!("x0 must be non-zero and finite, got {x0}")));
    }
    if !(delta > x0.abs() && delta.is_finite()) {
        return Err(Error::Domain(format!("delta ({delta}) must exceed |x0| ({})", x0.abs())));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("learning rate must be positive, got {eta}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Lower bound on the number of iterations needed to leave the
/// `delta`-neighbourhood.
pub fn escape_bound(delta: f64, x0: f64, eta_k: f64, gamma: f64) -> Result<f64> {
    check_escape_args(delta, x0, eta_k, gamma)?;
    Ok((delta / x0.abs()).ln() / (eta_k * gamma).ln_1p())
}

/// Iterates the scalar recurrence until `|x_t| >= delta`.
pub fn simulate_projected(x0: f64, eta_k: f64, gamma: f64, delta: f64, t_max: u64) -> Result<Escape> {
    check_escape_args(delta, x0, eta_k, gamma)?;
    let alpha = 1.0 + eta_k * gamma;
    let mut x = x0;
    for t in 1..=t_max {
        x *= alpha;
        if x.abs() >= delta {
            return Ok(Escape::Escaped(t));
        }
        if x.abs() > OVERFLOW_GUARD {
            return Err(Error::Numeric(format!("overflow at iteration {t}")));
        }
    }
    Ok(Escape::DidNotEscape { reached: t_max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullEscape {
    pub escape: Escape,
    /// `x_t` for `t = 0..=T`.
    pub projected: Vec<f64>,
    /// Worst relative deviation of `projected` from `alpha^t x0`.
    pub max_projection_error: f64,
}

/// Full-vector gradient descent on the quadratic saddle. Escape is the
/// first `t` with `|theta_t - center| > delta`.
pub fn simulate_full(
    saddle: &QuadraticSaddle,
    theta0: &[f64],
    eta_k: f64,
    delta: f64,
    t_max: u64,
) -> Result<FullEscape> {
    let x0 = saddle.project_unstable(theta0)?;
    if x0 == 0.0 {
        return Err(Error::Domain(
            "non-escaping start: theta0 lies on the stable manifold (x0 = 0)".into(),
        ));
    }
    let dist = |theta: &[f64]| -> f64 {
        theta
            .iter()
            .zip(saddle.center())
            .map(|(t, c)| (t - c).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    if dist(theta0) > delta {
        return Err(Error::Domain(format!(
            "theta0 is already outside the {delta}-neighbourhood"
        )));
    }
    let gamma = saddle.gamma();
    check_escape_args(delta, x0, eta_k, gamma)?;
    let alpha = 1.0 + eta_k * gamma;

    let mut theta = theta0.to_vec();
    let mut projected = vec![x0];
    let mut max_err = 0.0f64;
    let mut escape = Escape::DidNotEscape { reached: t_max };
    for t in 1..=t_max {
        let (_, grad) = saddle.eval(&theta)?;
        for (p, g) in theta.iter_mut().zip(&grad) {
            *p -= eta_k * g;
        }
        let x = saddle.project_unstable(&theta)?;
        let closed = x0 * alpha.powi(i32::try_from(t).unwrap_or(i32::MAX));
        max_err = max_err.max(((x - closed) / closed).abs());
        projected.push(x);
        let r = dist(&theta);
        if !r.is_finite() || r > OVERFLOW_GUARD {
            return Err(Error::Numeric(format!("overflow at iteration {t}")));
        }
        if r > delta {
            escape = Escape::Escaped(t);
            break;
        }
    }
    if max_err > PROJECTION_TOLERANCE {
        return Err(Error::Numeric(format!(
            "projected dynamics deviate from the closed form by {max_err:e}"
        )));
    }
    Ok(FullEscape {
        escape,
        projected,
        max_projection_error: max_err,
    })
}

fn result_for(k: u32, cfg: &EscapeConfig, escape: Escape) -> Result<EscapeResult> {
    let eta_k = escalated_lr(k, cfg.eta0)?;
    Ok(EscapeResult {
        k,
        eta_k,
        alpha_k: 1.0 + eta_k * cfg.gamma,
        bound: escape_bound(cfg.delta, cfg.x0, eta_k, cfg.gamma)?,
        escape,
    })
}

/// Projected escape for every restart index in the configured range.
pub fn sweep_restarts(cfg: &EscapeConfig) -> Result<Vec<EscapeResult>> {
    cfg.validate()?;
    (cfg.k_min..=cfg.k_max)
        .map(|k| {
            let eta_k = escalated_lr(k, cfg.eta0)?;
            let escape = simulate_projected(cfg.x0, eta_k, cfg.gamma, cfg.delta, cfg.t_max)?;
            result_for(k, cfg, escape)
        })
        .collect()
}

/// Full-vector sweep starting from `center + x0 * v_minus`. `cfg.gamma` is
/// taken from the saddle.
pub fn sweep_full(saddle: &QuadraticSaddle, cfg: &EscapeConfig) -> Result<Vec<EscapeResult>> {
    let cfg = EscapeConfig {
        gamma: saddle.gamma(),
        ..cfg.clone()
    };
    cfg.validate()?;
    let theta0: Vec<f64> = saddle
        .center()
        .iter()
        .zip(saddle.unstable_direction())
        .map(|(c, v)| c + cfg.x0 * v)
        .collect();
    (cfg.k_min..=cfg.k_max)
        .map(|k| {
            let eta_k = escalated_lr(k, cfg.eta0)?;
            let run = simulate_full(saddle, &theta0, eta_k, cfg.delta, cfg.t_max)?;
            result_for(k, &cfg, run.escape)
        })
        .collect()
}

/// Smallest `k >= cfg.k_min` whose projected escape takes one iteration,
/// searched up to `k_limit`.
pub fn first_unit_escape(cfg: &EscapeConfig, k_limit: u32) -> Result<Option<EscapeResult>> {
    cfg.validate()?;
    for k in cfg.k_min..=k_limit {
        let eta_k = escalated_lr(k, cfg.eta0)?;
        let escape = simulate_projected(cfg.x0, eta_k, cfg.gamma, cfg.delta, cfg.t_max)?;
        if escape == Escape::Escaped(1) {
            return result_for(k, cfg, escape).map(Some);
        }
    }
    Ok(None)
}

/// `k,eta_k,alpha_k,bound,T_empirical`; non-escaping runs are written as
/// `DNF`.
pub fn write_sweep_csv(results: &[EscapeResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["k", "eta_k", "alpha_k", "bound", "T_empirical"])
        .map_err(|e| Error::csv(path, e))?;
    for r in results {
        w.write_record([
            r.k.to_string(),
            r.eta_k.to_string(),
            r.alpha_k.to_string(),
            r.bound.to_string(),
            r.escape.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
