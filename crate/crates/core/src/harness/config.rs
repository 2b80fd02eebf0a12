//! Run configuration and its `key = value` file format.
//!
//! ```text
//! [run]
//! budget = 300
//! patience = 30
//! seeds = 1,2,3
//!
//! [landscape]
//! kind = mlp
//! hidden = 16
//!
//! [scheduler]
//! kind = ours_exp
//! er_decay_factor = 0.99
//! ```
//!
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::{Error, Result};
use crate::escape::EscapeConfig;
use crate::landscape::{DatasetSpec, MultiBasin, QuadraticSaddle};
use crate::optim::OptimizerKind;
use crate::schedule::{DecayMode, ScheduleKind, LR_FLOOR};

/// The eight scheduler/optimizer pairings compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    SgdExp,
    SgdLin,
    Adam,
    CosA,
    Clr,
    Wsds,
    OursExp,
    OursLin,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::SgdExp,
        Variant::SgdLin,
        Variant::Adam,
        Variant::CosA,
        Variant::Clr,
        Variant::Wsds,
        Variant::OursExp,
        Variant::OursLin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::SgdExp => "sgd_exp",
            Variant::SgdLin => "sgd_lin",
            Variant::Adam => "adam",
            Variant::CosA => "cosa",
            Variant::Clr => "clr",
            Variant::Wsds => "wsds",
            Variant::OursExp => "ours_exp",
            Variant::OursLin => "ours_lin",
        }
    }

    pub fn optimizer(&self) -> OptimizerKind {
        match self {
            Variant::Adam => OptimizerKind::Adam,
            _ => OptimizerKind::Sgd,
        }
    }

    pub fn is_escalating(&self) -> bool {
        matches!(self, Variant::OursExp | Variant::OursLin)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!(
                    "unknown scheduler {s:?} (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// Schedule constants. `None` fields are derived from the budget and base
/// learning rate when the schedule is built.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub exp_decay: f64,
    pub lin_eta_min: f64,
    pub cos_eta_min: f64,
    pub cos_t0: Option<u32>,
    pub cos_t_mult: u32,
    pub clr_base: Option<f64>,
    pub clr_max: Option<f64>,
    pub clr_step: Option<u32>,
    pub wsd_warmup: Option<u32>,
    pub wsd_decay_start: Option<u32>,
    pub wsd_decay_factor: f64,
    pub er_decay_factor: f64,
    pub er_intra_budget: Option<u32>,
    pub er_eta_min: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            exp_decay: 0.99,
            lin_eta_min: 1e-6,
            cos_eta_min: 0.0,
            cos_t0: None,
            cos_t_mult: 2,
            clr_base: None,
            clr_max: None,
            clr_step: None,
            wsd_warmup: None,
            wsd_decay_start: None,
            wsd_decay_factor: 0.95,
            er_decay_factor: 0.99,
            er_intra_budget: None,
            er_eta_min: 1e-6,
        }
    }
}

impl ScheduleParams {
    /// Resolves the schedule for `variant` under a given budget and base LR.
    ///
    /// Derived defaults: cosine `T_0 = budget / 7` with `T_mult = 2` (three
    /// cycles fill the budget), CLR between `eta0 / 10` and `eta0` with
    /// `step = budget / 10`, WSD warmup over the first 5% and decay over the
    /// last 20%. The escalating variants decay within a segment exactly like
    /// their non-restarting counterparts (linear decay spans the budget).
    pub fn schedule_kind(&self, variant: Variant, eta0: f64, budget: u32) -> Result<ScheduleKind> {
        let at_least_one = |v: u32| v.max(1);
        let kind = match variant {
            Variant::SgdExp => ScheduleKind::ExpDecay {
                decay_factor: self.exp_decay,
            },
            Variant::SgdLin => ScheduleKind::LinDecay {
                budget: at_least_one(budget),
                eta_min: self.lin_eta_min,
            },
            Variant::Adam => ScheduleKind::Constant,
            Variant::CosA => ScheduleKind::CosineWarmRestarts {
                eta_min: self.cos_eta_min,
                eta_max: eta0,
                t0: self.cos_t0.unwrap_or(at_least_one(budget / 7)),
                t_mult: self.cos_t_mult,
            },
            Variant::Clr => ScheduleKind::Cyclical {
                eta_base: self.clr_base.unwrap_or(eta0 / 10.0),
                eta_max: self.clr_max.unwrap_or(eta0),
                step_size: self.clr_step.unwrap_or(at_least_one(budget / 10)),
            },
            Variant::Wsds => {
                let warmup = self.wsd_warmup.unwrap_or(budget / 20);
                ScheduleKind::WsdSimplified {
                    warmup,
                    stable_lr: eta0,
                    decay_start: self
                        .wsd_decay_start
                        .unwrap_or((budget - budget / 5).max(warmup)),
                    decay_factor: self.wsd_decay_factor,
                }
            }
            Variant::OursExp => ScheduleKind::EscalatingRestarts(DecayMode::Exp {
                factor: self.er_decay_factor,
            }),
            Variant::OursLin => ScheduleKind::EscalatingRestarts(DecayMode::Lin {
                intra_budget: self.er_intra_budget.unwrap_or(at_least_one(budget)),
                eta_min: self.er_eta_min,
            }),
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LandscapeSpec {
    Mlp {
        data: DatasetSpec,
        hidden: usize,
    },
    MultiBasin {
        basin: MultiBasin,
        start: Vec<f64>,
        /// Std of the Gaussian perturbation applied to `start` per seed.
        start_jitter: f64,
        /// Std of additive Gaussian gradient noise.
        grad_noise: f64,
    },
    Saddle {
        eigenvalues: Vec<f64>,
        /// Rotation of the eigenbasis, 2-D only.
        rotation: f64,
        x0: f64,
        delta: f64,
    },
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        LandscapeSpec::Mlp {
            data: DatasetSpec::default(),
            hidden: 16,
        }
    }
}

impl LandscapeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LandscapeSpec::Mlp { .. } => "mlp",
            LandscapeSpec::MultiBasin { .. } => "multibasin",
            LandscapeSpec::Saddle { .. } => "saddle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub landscape: LandscapeSpec,
    pub variant: Variant,
    pub params: ScheduleParams,
    /// Initial LR for the SGD variants.
    pub eta0: f64,
    /// Initial LR for Adam.
    pub adam_eta0: f64,
    pub patience: u32,
    pub min_delta: f64,
    pub budget: u32,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Restart range and iteration cap of the saddle sweep.
    pub k_min: u32,
    pub k_max: u32,
    pub t_max: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            landscape: LandscapeSpec::default(),
            variant: Variant::OursExp,
            params: ScheduleParams::default(),
            eta0: 0.01,
            adam_eta0: 0.001,
            patience: 50,
            min_delta: 0.0,
            budget: 500,
            seeds: vec![0],
            out_dir: PathBuf::from("results"),
            batch_size: None,
            k_min: 0,
            k_max: 9,
            t_max: 100_000,
        }
    }
}

impl RunConfig {
    /// The desk-scale benchmark: 3-class blobs, n = 600, d = 2, hidden 16,
    /// 300 epochs, patience 30, mini-batches of 32, seeds 1..=3. A plateau
    /// counts any validation gain below 1e-3 as no gain.
    pub fn benchmark() -> Self {
        Self {
            budget: 300,
            patience: 30,
            min_delta: 1e-3,
            seeds: vec![1, 2, 3],
            batch_size: Some(32),
            ..Self::default()
        }
    }

    pub fn for_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    /// Base LR of the configured variant.
    pub fn base_lr(&self) -> f64 {
        match self.variant.optimizer() {
            OptimizerKind::Adam => self.adam_eta0,
            OptimizerKind::Sgd => self.eta0,
        }
    }

    pub fn schedule_kind(&self) -> Result<ScheduleKind> {
        self.params
            .schedule_kind(self.variant, self.base_lr(), self.budget)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        for (name, v) in [("eta0", self.eta0), ("adam_eta0", self.adam_eta0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Config("min_delta must be non-negative".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        match &self.landscape {
            LandscapeSpec::Mlp { data, hidden } => {
                data.validate()?;
                if *hidden == 0 {
                    return Err(Error::Config("hidden must be >= 1".into()));
                }
                if data.split_sizes()[1] == 0 {
                    return Err(Error::Config("validation split is empty".into()));
                }
            }
            LandscapeSpec::MultiBasin { basin, start, .. } => {
                if start.len() != basin.centers()[0].len() {
                    return Err(Error::Config("start point has the wrong dimension".into()));
                }
            }
            LandscapeSpec::Saddle { .. } => {
                self.saddle()?;
                self.escape_config()?.validate()?;
            }
        }
        for v in Variant::ALL {
            self.params.schedule_kind(v, self.eta0, self.budget)?;
        }
        Ok(())
    }

    /// The quadratic saddle described by a `saddle` landscape.
    pub fn saddle(&self) -> Result<QuadraticSaddle> {
        match &self.landscape {
            LandscapeSpec::Saddle {
                eigenvalues,
                rotation,
                ..
            } => {
                if *rotation != 0.0 {
                    if eigenvalues.len() != 2 {
                        return Err(Error::Config("rotation needs exactly two eigenvalues".into()));
                    }
                    QuadraticSaddle::rotated_2d(eigenvalues[0], eigenvalues[1], *rotation)
                } else {
                    QuadraticSaddle::diagonal(eigenvalues.clone())
                }
                .map_err(|e| Error::Config(e.to_string()))
            }
            other => Err(Error::Config(format!(
                "landscape {} is not a saddle",
                other.name()
            ))),
        }
    }

    pub fn escape_config(&self) -> Result<EscapeConfig> {
        let LandscapeSpec::Saddle { x0, delta, .. } = &self.landscape else {
            return Err(Error::Config("escape sweep needs a saddle landscape".into()));
        };
        let saddle = self.saddle()?;
        Ok(EscapeConfig {
            gamma: saddle.gamma(),
            eta0: self.eta0,
            x0: *x0,
            delta: *delta,
            k_min: self.k_min,
            k_max: self.k_max,
            t_max: self.t_max,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text)
            .map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        for (name, props) in &ini {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key {k:?} outside of any section")));
                }
                continue;
            };
            if !matches!(name, "run" | "landscape" | "scheduler") {
                return Err(Error::Config(format!("unknown section [{name}]")));
            }
            let sec = sections
                .entry(name.to_string())
                .or_insert_with(|| Section::new(name));
            for (k, v) in props.iter() {
                sec.insert(k, v)?;
            }
        }

        let mut cfg = RunConfig::default();
        if let Some(mut run) = sections.remove("run") {
            if let Some(v) = run.take::<f64>("eta0")? {
                cfg.eta0 = v;
            }
            if let Some(v) = run.take::<f64>("adam_eta0")? {
                cfg.adam_eta0 = v;
            }
            if let Some(v) = run.take::<u32>("patience")? {
                cfg.patience = v;
            }
            if let Some(v) = run.take::<f64>("min_delta")? {
                cfg.min_delta = v;
            }
            if let Some(v) = run.take::<u32>("budget")? {
                cfg.budget = v;
            }
            if let Some(v) = run.take_list::<u64>("seeds")? {
                cfg.seeds = v;
            }
            if let Some(v) = run.take_raw("out") {
                cfg.out_dir = PathBuf::from(v);
            }
            if let Some(v) = run.take_raw("batch_size") {
                cfg.batch_size = match v.as_str() {
                    "full" => None,
                    s => Some(parse_value("batch_size", s)?),
                };
            }
            if let Some(v) = run.take::<u32>("k_min")? {
                cfg.k_min = v;
            }
            if let Some(v) = run.take::<u32>("k_max")? {
                cfg.k_max = v;
            }
            if let Some(v) = run.take::<u64>("t_max")? {
                cfg.t_max = v;
            }
            run.finish()?;
        }
        if let Some(mut sec) = sections.remove("landscape") {
            cfg.landscape = parse_landscape(&mut sec)?;
            sec.finish()?;
        }
        if let Some(mut sec) = sections.remove("scheduler") {
            if let Some(v) = sec.take_raw("kind") {
                cfg.variant = v.parse()?;
            }
            parse_schedule_params(&mut sec, &mut cfg.params)?;
            sec.finish()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_landscape(sec: &mut Section) -> Result<LandscapeSpec> {
    let kind = sec.take_raw("kind").unwrap_or_else(|| "mlp".to_string());
    match kind.as_str() {
        "mlp" => {
            let mut data = DatasetSpec::default();
            let mut hidden = 16;
            if let Some(v) = sec.take("samples")? {
                data.samples = v;
            }
            if let Some(v) = sec.take("features")? {
                data.features = v;
            }
            if let Some(v) = sec.take("classes")? {
                data.classes = v;
            }
            if let Some(v) = sec.take("separation")? {
                data.separation = v;
            }
            if let Some(v) = sec.take("spread")? {
                data.spread = v;
            }
            if let Some(v) = sec.take_list::<f64>("split")? {
                data.fractions = v
                    .try_into()
                    .map_err(|_| Error::Config("split needs three fractions".into()))?;
            }
            if let Some(v) = sec.take("hidden")? {
                hidden = v;
            }
            Ok(LandscapeSpec::Mlp { data, hidden })
        }
        "multibasin" => {
            let centers = sec.take_raw("centers");
            let depths: Option<Vec<f64>> = sec.take_list("depths")?;
            let widths: Option<Vec<f64>> = sec.take_list("widths")?;
            let basin = match (centers, depths, widths) {
                (None, None, None) => MultiBasin::default_2d(),
                (centers, depths, widths) => {
                    let centers = match centers {
                        Some(s) => s
                            .split(';')
                            .map(|p| parse_list::<f64>("centers", p))
                            .collect::<Result<Vec<_>>>()?,
                        None => MultiBasin::default_2d().centers().to_vec(),
                    };
                    let n = centers.len();
                    MultiBasin::new(
                        centers,
                        depths.unwrap_or_else(|| vec![1.0; n]),
                        widths.unwrap_or_else(|| vec![0.5; n]),
                    )
                    .map_err(|e| Error::Config(e.to_string()))?
                }
            };
            let dim = basin.centers()[0].len();
            let start = sec.take_list("start")?.unwrap_or_else(|| vec![0.05; dim]);
            let start_jitter = sec.take("start_jitter")?.unwrap_or(0.05);
            let grad_noise = sec.take("grad_noise")?.unwrap_or(0.0);
            Ok(LandscapeSpec::MultiBasin {
                basin,
                start,
                start_jitter,
                grad_noise,
            })
        }
        "saddle" => Ok(LandscapeSpec::Saddle {
            eigenvalues: sec.take_list("eigenvalues")?.unwrap_or_else(|| vec![1.0, -1.0]),
            rotation: sec.take("rotation")?.unwrap_or(0.0),
            x0: sec.take("x0")?.unwrap_or(1e-3),
            delta: sec.take("delta")?.unwrap_or(1.0),
        }),
        other => Err(Error::Config(format!(
            "unknown landscape kind {other:?} (expected mlp, multibasin or saddle)"
        ))),
    }
}

fn parse_schedule_params(sec: &mut Section, p: &mut ScheduleParams) -> Result<()> {
    macro_rules! set {
        ($key:literal => $field:ident) => {
            if let Some(v) = sec.take($key)? {
                p.$field = v;
            }
        };
        ($key:literal => Some $field:ident) => {
            if let Some(v) = sec.take($key)? {
                p.$field = Some(v);
            }
        };
    }
    set!("exp_decay" => exp_decay);
    set!("lin_eta_min" => lin_eta_min);
    set!("cos_eta_min" => cos_eta_min);
    set!("cos_t0" => Some cos_t0);
    set!("cos_t_mult" => cos_t_mult);
    set!("clr_base" => Some clr_base);
    set!("clr_max" => Some clr_max);
    set!("clr_step" => Some clr_step);
    set!("wsd_warmup" => Some wsd_warmup);
    set!("wsd_decay_start" => Some wsd_decay_start);
    set!("wsd_decay_factor" => wsd_decay_factor);
    set!("er_decay_factor" => er_decay_factor);
    set!("er_intra_budget" => Some er_intra_budget);
    set!("er_eta_min" => er_eta_min);
    if p.lin_eta_min < LR_FLOOR || p.er_eta_min < LR_FLOOR {
        return Err(Error::Config(format!("eta_min values must be >= {LR_FLOOR}")));
    }
    Ok(())
}

struct Section {
    name: String,
    entries: BTreeMap<String, String>,
}

impl Section {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            entries: BTreeMap::new(),
        }
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<()> {
        if self
            .entries
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(Error::Config(format!(
                "duplicate key {key:?} in [{}]",
                self.name
            )));
        }
        Ok(())
    }

    fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.take_raw(key).map(|v| parse_value(key, &v)).transpose()
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        self.take_raw(key).map(|v| parse_list(key, &v)).transpose()
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!(
                "unknown key {k:?} in [{}]",
                self.name
            ))),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {s:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse_value(key, p))
        .collect()
}

/// Parses `1,2,3` seed lists as given on the command line.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let seeds = parse_list("seed", s)?;
    if seeds.is_empty() {
        return Err(Error::Config("empty seed list".into()));
    }
    Ok(seeds)
}
