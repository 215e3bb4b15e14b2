//! Point estimators for the extreme value index and for `log x_p`.
//!
//! With `r` log-gaps per block the index estimate is the average excess of
//! the top `r` logs over the `(r+1)`-th:
//!
//! ```text
//! gamma_hat = 1/(k r) sum_i sum_{j<=r} (log X_{m,j}^(i) - log X_{m,r+1}^(i))
//! ```
//!
//! and the quantile estimate extrapolates from the mean threshold log,
//! `log x_p_hat = mean_i log X_{m,r+1}^(i) - a(m, r, p) gamma_hat`, with
//! `a(m, r, p) = sum_{j=r+1}^m 1/j + log p`. Blocks of unequal `(m_i, r_i)`
//! use the rank-weighted versions ([`gamma_hat_star`], [`quantile_hat_star`]).

use std::collections::HashMap;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::block_data::BlockData;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("operation requires homogeneous blocks (equal m and r)")]
    HeterogeneousData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileEstimate {
    pub gamma_hat: f64,
    pub log_xp_hat: f64,
    /// `a(m, r, p)` for homogeneous data, `a_n(p)` otherwise.
    pub a_coeff: f64,
    pub total_ranks: usize,
    /// `|a_coeff| gamma_hat / sqrt(total_ranks)`.
    pub se_log_xp: f64,
    pub p: f64,
    pub heterogeneous: bool,
}

impl QuantileEstimate {
    /// The requested quantile is not in the tail relative to the block size;
    /// the estimate is still defined but intervals are refused.
    pub fn non_negative_a_coeff(&self) -> bool {
        self.a_coeff >= 0.0
    }

    pub fn xp_hat(&self) -> f64 {
        self.log_xp_hat.exp()
    }
}

fn check_ranks(m: usize, r: usize) -> Result<(), EstimateError> {
    if r >= 1 && r < m {
        Ok(())
    } else {
        Err(EstimateError::Domain(format!("need 1 <= r < m, got m = {m}, r = {r}")))
    }
}

fn check_p(p: f64) -> Result<(), EstimateError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(EstimateError::Domain(format!("p must lie in (0, 1), got {p}")))
    }
}

/// `sum_{j=r+1}^m 1/j`, summed from the smallest term up.
pub fn harmonic_tail(m: usize, r: usize) -> Result<f64, EstimateError> {
    check_ranks(m, r)?;
    Ok((r + 1..=m).rev().map(|j| 1.0 / j as f64).sum())
}

/// `a(m, r, p) = sum_{j=r+1}^m 1/j + log p`.
pub fn a_coeff(m: usize, r: usize, p: f64) -> Result<f64, EstimateError> {
    check_p(p)?;
    Ok(harmonic_tail(m, r)? + p.ln())
}

/// Rank-weighted coefficient `a_n(p) = sum_i r_i a(m_i, r_i, p) / sum_i r_i`.
pub fn rank_weighted_a_coeff(data: &BlockData, p: f64) -> Result<f64, EstimateError> {
    check_p(p)?;
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut acc = 0.0;
    for b in data.blocks() {
        let key = (b.m(), b.r());
        let a = match cache.get(&key) {
            Some(&a) => a,
            None => {
                let a = a_coeff(key.0, key.1, p)?;
                cache.insert(key, a);
                a
            }
        };
        acc += b.r() as f64 * a;
    }
    Ok(acc / data.total_ranks() as f64)
}

fn total_excess(data: &BlockData) -> f64 {
    data.blocks().iter().map(|b| b.excess_sum()).sum()
}

/// Index estimate for homogeneous blocks.
pub fn gamma_hat(data: &BlockData) -> Result<f64, EstimateError> {
    if !data.is_homogeneous() {
        return Err(EstimateError::HeterogeneousData);
    }
    Ok(total_excess(data) / data.total_ranks() as f64)
}

/// Rank-weighted index estimate; any block shapes. Equal to [`gamma_hat`]
/// on homogeneous data.
pub fn gamma_hat_star(data: &BlockData) -> f64 {
    total_excess(data) / data.total_ranks() as f64
}

/// Quantile estimate for homogeneous blocks.
pub fn quantile_hat(data: &BlockData, p: f64) -> Result<QuantileEstimate, EstimateError> {
    let (m, r) = data.common_shape().ok_or(EstimateError::HeterogeneousData)?;
    let a = a_coeff(m, r, p)?;
    let gamma = gamma_hat(data)?;
    let k = data.k();
    let threshold_mean = data.blocks().iter().map(|b| b.threshold_log()).sum::<f64>() / k as f64;
    Ok(build(gamma, threshold_mean, a, r * k, p, false))
}

/// Rank-weighted quantile estimate. On homogeneous data the weights are all
/// equal and this is exactly [`quantile_hat`].
pub fn quantile_hat_star(data: &BlockData, p: f64) -> Result<QuantileEstimate, EstimateError> {
    if data.is_homogeneous() {
        return quantile_hat(data, p);
    }
    let a_n = rank_weighted_a_coeff(data, p)?;
    let gamma = gamma_hat_star(data);
    let total = data.total_ranks();
    let threshold_mean = data
        .blocks()
        .iter()
        .map(|b| b.r() as f64 * b.threshold_log())
        .sum::<f64>()
        / total as f64;
    Ok(build(gamma, threshold_mean, a_n, total, p, true))
}

/// Picks [`quantile_hat`] or [`quantile_hat_star`] by block shape.
pub fn estimate(data: &BlockData, p: f64) -> Result<QuantileEstimate, EstimateError> {
    quantile_hat_star(data, p)
}

fn build(gamma: f64, threshold_mean: f64, a: f64, total: usize, p: f64, heterogeneous: bool) -> QuantileEstimate {
    QuantileEstimate {
        gamma_hat: gamma,
        log_xp_hat: threshold_mean - a * gamma,
        a_coeff: a,
        total_ranks: total,
        se_log_xp: a.abs() * gamma / (total as f64).sqrt(),
        p,
        heterogeneous,
    }
}

/// Asymptotic bias constant
/// `b_r = (sum_{j=1}^r Gamma(j - rho)/(j-1)! - Gamma(r + 1 - rho)/(r-1)!) / (r rho)`.
///
/// Terms are evaluated as `exp(ln Gamma(j - rho) - ln Gamma(j))`; every
/// argument exceeds 1 since `rho < 0`, so all terms are positive.
pub fn bias_constant_br(r: usize, rho: f64) -> Result<f64, EstimateError> {
    if r < 1 {
        return Err(EstimateError::Domain("r must be >= 1".into()));
    }
    if !(rho < 0.0) {
        return Err(EstimateError::Domain(format!("rho must be negative, got {rho}")));
    }
    let term = |x: f64, fact_arg: f64| (ln_gamma(x) - ln_gamma(fact_arg)).exp();
    let sum: f64 = (1..=r).map(|j| term(j as f64 - rho, j as f64)).sum();
    let last = term(r as f64 + 1.0 - rho, r as f64);
    Ok((sum - last) / (r as f64 * rho))
}
