//! Coverage and interval-length studies over replicated block samples.
//!
//! Two designs are supported. Scheme 1 fixes `n = 1000` observations, uses
//! `m = floor(1000 / k)` per block and targets `p = 1/1000`. Scheme 2 grows
//! the blocks with `k`: `m = floor(c k^v)` (`c = 50` by default) and
//! `p = 1 / (k m)`, with `v` chosen per model.
//!
//! Every replicate draws from its own ChaCha stream keyed by the master seed
//! and selected by `(k, replicate)`, so results do not depend on how the
//! replicates are scheduled across threads.

mod config;
mod report;

pub use config::{parse_real, parse_study_config, ConfigError};
pub use report::{ReportRow, SimulationReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::block_data::BlockData;
use crate::distributions::{sample_top_block, HeavyTailModel};
use crate::likelihood::{chi2_critical, Method, Profile, DEFAULT_A_N};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("no default v for {0} under scheme 2; set v explicitly")]
    UnknownV(HeavyTailModel),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum Scheme {
    /// `n = 1000`, `m = floor(1000 / k)`, `p = 1/1000`.
    Scheme1,
    /// `m = floor(c k^v)`, `p = 1 / (k m)`.
    Scheme2 { v: Option<f64>, c: f64 },
}

impl Scheme {
    pub const SCHEME1_N: usize = 1000;

    pub fn scheme2() -> Self {
        Scheme::Scheme2 { v: None, c: 50.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Scheme1 => "scheme1",
            Scheme::Scheme2 { .. } => "scheme2",
        }
    }
}

pub const DEFAULT_MASTER_SEED: u64 = 0x5eed_b10c_da7a;

/// Default growth exponent `v` for the three studied models.
pub fn default_v(model: &HeavyTailModel) -> Option<f64> {
    match *model {
        HeavyTailModel::Frechet { a } if a == 1.0 => Some(0.5),
        HeavyTailModel::Burr { a, b } if a == 0.5 && b == 1.0 => Some(0.5),
        HeavyTailModel::Burr { a, b } if a == 1.0 && b == 0.5 => Some(0.25),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellParams {
    pub m: usize,
    pub p: f64,
    pub v_used: Option<f64>,
}

/// Block size and tail probability for `k` blocks under `scheme`.
pub fn scheme_params(scheme: &Scheme, model: &HeavyTailModel, k: usize) -> Result<CellParams, SimulationError> {
    if k < 2 {
        return Err(SimulationError::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    match *scheme {
        Scheme::Scheme1 => Ok(CellParams {
            m: Scheme::SCHEME1_N / k,
            p: 1.0 / Scheme::SCHEME1_N as f64,
            v_used: None,
        }),
        Scheme::Scheme2 { v, c } => {
            let v = v
                .or_else(|| default_v(model))
                .ok_or(SimulationError::UnknownV(*model))?;
            // guard against k^v landing a hair below an integer
            let m = (c * (k as f64).powf(v) + 1e-9).floor() as usize;
            Ok(CellParams {
                m,
                p: 1.0 / (k * m) as f64,
                v_used: Some(v),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub model: HeavyTailModel,
    pub k_grid: Vec<usize>,
    pub r: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub a_n: f64,
    pub master_seed: u64,
    /// Build EL/AEL intervals to record lengths. Coverage never needs them.
    pub lengths: bool,
}

impl SimConfig {
    pub fn new(scheme: Scheme, model: HeavyTailModel) -> Self {
        SimConfig {
            scheme,
            model,
            k_grid: (10..=100).step_by(5).collect(),
            r: 1,
            replicates: 5000,
            alpha: 0.05,
            methods: vec![Method::Ael, Method::Normal],
            a_n: DEFAULT_A_N,
            master_seed: DEFAULT_MASTER_SEED,
            lengths: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidConfig(m));
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if self.r == 0 {
            return bad("r must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.a_n > 0.0 && self.a_n.is_finite()) {
            return bad(format!("a_n must be positive, got {}", self.a_n));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.k_grid.is_empty() {
            return bad("k_grid is empty".into());
        }
        if self.k_grid.iter().any(|&k| k > u32::MAX as usize) || self.replicates > u32::MAX as usize {
            return bad("k and replicates must fit in 32 bits".into());
        }
        for &k in &self.k_grid {
            let cell = scheme_params(&self.scheme, &self.model, k)?;
            if cell.m <= self.r {
                return bad(format!("k = {k} gives block size m = {} <= r = {}", cell.m, self.r));
            }
        }
        Ok(())
    }
}

/// The three models of the published study.
pub fn study_models() -> [HeavyTailModel; 3] {
    [
        HeavyTailModel::Frechet { a: 1.0 },
        HeavyTailModel::Burr { a: 0.5, b: 1.0 },
        HeavyTailModel::Burr { a: 1.0, b: 0.5 },
    ]
}

/// Both schemes for each study model with AEL and normal intervals,
/// `k = 10, 15, ..., 100` and 5000 replicates.
pub fn builtin_studies(master_seed: u64) -> Vec<SimConfig> {
    [Scheme::Scheme1, Scheme::scheme2()]
        .into_iter()
        .flat_map(|scheme| {
            study_models().into_iter().map(move |model| SimConfig {
                master_seed,
                ..SimConfig::new(scheme, model)
            })
        })
        .collect()
}

/// Independent stream for replicate `replicate` of the `k` cell.
pub fn replicate_rng(master_seed: u64, k: usize, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((k as u64) << 32) | replicate as u64);
    rng
}

/// Draws `k` homogeneous blocks of size `m` keeping the top `r + 1`.
pub fn simulate_blocks<R: rand::Rng + ?Sized>(
    model: &HeavyTailModel,
    k: usize,
    m: usize,
    r: usize,
    rng: &mut R,
) -> BlockData {
    let blocks = (0..k)
        .map(|_| sample_top_block(model, m, r, rng).into_block(m))
        .collect();
    BlockData::new(blocks).expect("sampled blocks are valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub covered: bool,
    /// Statistic at the true value; squared z-score for the normal method.
    pub statistic: f64,
    pub length: Option<f64>,
    pub hull_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub k: usize,
    pub replicate: usize,
    pub y0: f64,
    /// `Err` holds the reason a degenerate replicate was abandoned.
    pub outcomes: Result<Vec<MethodOutcome>, String>,
}

/// Runs one replicate of the `k` cell. The configuration must be valid.
pub fn run_cell(config: &SimConfig, k: usize, replicate: usize) -> Result<ReplicateRecord, SimulationError> {
    let cell = scheme_params(&config.scheme, &config.model, k)?;
    let y0 = config
        .model
        .true_log_quantile(cell.p)
        .map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
    let c = chi2_critical(config.alpha).map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
    let mut rng = replicate_rng(config.master_seed, k, replicate);
    let data = simulate_blocks(&config.model, k, cell.m, config.r, &mut rng);

    let outcomes = evaluate(config, &data, cell.p, y0, c).map_err(|e| e.to_string());
    Ok(ReplicateRecord {
        k,
        replicate,
        y0,
        outcomes,
    })
}

fn evaluate(
    config: &SimConfig,
    data: &BlockData,
    p: f64,
    y0: f64,
    c: f64,
) -> Result<Vec<MethodOutcome>, crate::likelihood::LikelihoodError> {
    let profile = Profile::new(data, p)?;
    let mut out = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let statistic = profile.statistic(method, y0, config.a_n);
        let outcome = match method {
            Method::Normal => {
                let ci = profile.interval(method, config.alpha, config.a_n)?;
                MethodOutcome {
                    method,
                    covered: ci.lower < y0 && y0 < ci.upper,
                    statistic,
                    length: Some(ci.length()),
                    hull_failure: false,
                }
            }
            Method::El | Method::Ael => {
                let length = if config.lengths {
                    Some(profile.interval(method, config.alpha, config.a_n)?.length())
                } else {
                    None
                };
                MethodOutcome {
                    method,
                    covered: statistic < c,
                    statistic,
                    length,
                    hull_failure: statistic.is_infinite(),
                }
            }
        };
        out.push(outcome);
    }
    Ok(out)
}

/// Runs every replicate of every `k` on a pool of `workers` threads and
/// aggregates in replicate order.
pub fn run_study(config: &SimConfig, workers: usize) -> Result<SimulationReport, SimulationError> {
    run_study_with_progress(config, workers, |_| {})
}

/// As [`run_study`], calling `on_cell(k)` after each `k` cell finishes.
pub fn run_study_with_progress<F: FnMut(usize)>(
    config: &SimConfig,
    workers: usize,
    mut on_cell: F,
) -> Result<SimulationReport, SimulationError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
    let mut rows = Vec::new();
    for &k in &config.k_grid {
        let records = pool.install(|| run_replicates(config, k))?;
        rows.extend(report::aggregate(config, k, &records)?);
        on_cell(k);
    }
    Ok(SimulationReport {
        config: config.clone(),
        rows,
    })
}

/// All replicates of one cell, in replicate order.
pub fn run_replicates(config: &SimConfig, k: usize) -> Result<Vec<ReplicateRecord>, SimulationError> {
    use rayon::prelude::*;
    (0..config.replicates)
        .into_par_iter()
        .map(|i| run_cell(config, k, i))
        .collect()
}

/// Number of worker threads to use when none is given.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
