//! Empirical likelihood (EL) and adjusted empirical likelihood (AEL) for
//! `log x_p`, and the three interval constructions.
//!
//! For homogeneous blocks and a candidate value `y` of `log x_p` define, for
//! `j = 1..=r` and each block `i`,
//!
//! ```text
//! z_j^(i)(y) = j (log X_{m,j}^(i) - log X_{m,j+1}^(i)) - (log X_{m,r+1}^(i) - y) / a(m, r, p)
//! ```
//!
//! These have approximately mean zero at the true `y`. The EL ratio statistic
//! is `2 sum log(1 + lambda z)` where `lambda` solves
//! `sum z / (1 + lambda z) = 0`; it is infinite when zero is not strictly
//! inside the range of the `z` values. AEL appends the pseudo point
//! `-a_n mean(z)` before applying EL, which keeps the statistic finite.
//!
//! Every `z_j^(i)(y)` is affine in `y` with the same slope `1 / a`, so one
//! [`Profile`] per dataset serves every evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::block_data::BlockData;
use crate::estimators::{self, EstimateError, QuantileEstimate};

/// Default pseudo-point weight `a_n = 19/12`.
pub const DEFAULT_A_N: f64 = 19.0 / 12.0;

/// Absolute tolerance on interval endpoints.
pub const ENDPOINT_TOL: f64 = 1e-6;

const MAX_EXPANSIONS: usize = 50;
const DIP_SCAN_POINTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("zero is not inside the convex hull of the estimating-equation values")]
    ZeroNotInHull,
    #[error("a(m, r, p) is zero; the estimating equation is undefined")]
    ZeroACoeff,
    #[error("a(m, r, p) = {0} is not negative: p is not in the tail for this block size")]
    NonNegativeACoeff(f64),
    #[error("degenerate estimate: gamma_hat is zero")]
    DegenerateEstimate,
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Normal,
    El,
    Ael,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Normal, Method::El, Method::Ael];

    /// Column label used in the text tables.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Normal => "NORM",
            Method::El => "ELM",
            Method::Ael => "AELM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Normal => "normal",
            Method::El => "el",
            Method::Ael => "ael",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "norm" => Ok(Method::Normal),
            "el" | "elm" => Ok(Method::El),
            "ael" | "aelm" => Ok(Method::Ael),
            other => Err(format!("unknown method `{other}` (expected normal, el or ael)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// An expansion step for EL left the region where the statistic is
    /// finite; that endpoint sits against the hull boundary.
    pub hull_failure_at_endpoints: bool,
    /// The statistic dips back below the critical value beyond a reported
    /// endpoint: the sub-level set may not be connected.
    pub bracket_expanded: bool,
    /// No crossing was found within the expansion budget.
    pub bracket_failure: bool,
    pub negative_lower_bound: bool,
    /// `a_n` exceeds `k^(2/3)`.
    pub a_n_exceeds_rate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub method: Method,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
    pub diagnostics: Diagnostics,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Standard normal upper `alpha/2` point.
pub fn normal_critical(alpha: f64) -> Result<f64, LikelihoodError> {
    check_alpha(alpha)?;
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - alpha / 2.0))
}

/// Upper `alpha` point of chi-square with one degree of freedom, computed as
/// the square of the normal upper `alpha/2` point.
pub fn chi2_critical(alpha: f64) -> Result<f64, LikelihoodError> {
    Ok(normal_critical(alpha)?.powi(2))
}

fn check_alpha(alpha: f64) -> Result<(), LikelihoodError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(LikelihoodError::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZSample {
    pub values: Vec<f64>,
    pub pseudo: Option<f64>,
}

impl ZSample {
    /// Values followed by the pseudo point, if any.
    pub fn points(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.extend(self.pseudo);
        v
    }
}

fn pseudo_point(values: &[f64], a_n: f64) -> f64 {
    -a_n * values.iter().sum::<f64>() / values.len() as f64
}

/// Per-dataset precomputation: `z_j^(i)(y) = base_j^(i) + y / a`.
#[derive(Debug, Clone)]
pub struct Profile {
    base: Vec<f64>,
    a: f64,
    k: usize,
    estimate: QuantileEstimate,
}

impl Profile {
    pub fn new(data: &BlockData, p: f64) -> Result<Self, LikelihoodError> {
        let estimate = estimators::quantile_hat(data, p)?;
        let a = estimate.a_coeff;
        if a == 0.0 {
            return Err(LikelihoodError::ZeroACoeff);
        }
        let mut base = Vec::with_capacity(estimate.total_ranks);
        for b in data.blocks() {
            let t = b.top_log();
            let shift = b.threshold_log() / a;
            for j in 1..=b.r() {
                base.push(j as f64 * (t[j - 1] - t[j]) - shift);
            }
        }
        Ok(Profile {
            base,
            a,
            k: data.k(),
            estimate,
        })
    }

    pub fn estimate(&self) -> &QuantileEstimate {
        &self.estimate
    }

    pub fn z_sample(&self, y: f64, pseudo_weight: Option<f64>) -> ZSample {
        let mut values = self.points(y, None);
        let pseudo = pseudo_weight.map(|a_n| pseudo_point(&values, a_n));
        values.shrink_to_fit();
        ZSample { values, pseudo }
    }

    /// `z` values at `y`, with the pseudo point appended when `pseudo_weight`
    /// is given.
    fn points(&self, y: f64, pseudo_weight: Option<f64>) -> Vec<f64> {
        let slope = y / self.a;
        let mut values = Vec::with_capacity(self.base.len() + 1);
        values.extend(self.base.iter().map(|b| b + slope));
        if let Some(a_n) = pseudo_weight {
            let z = pseudo_point(&values, a_n);
            values.push(z);
        }
        values
    }

    /// EL statistic at `y`; `+inf` on hull failure.
    pub fn el(&self, y: f64) -> f64 {
        el_log_ratio(&self.points(y, None))
    }

    /// AEL statistic at `y`.
    pub fn ael(&self, y: f64, a_n: f64) -> f64 {
        el_log_ratio(&self.points(y, Some(a_n)))
    }

    /// Statistic of `method` at `y`. For [`Method::Normal`] this is the
    /// squared standardized distance, so the same `< c(alpha)` rule applies.
    pub fn statistic(&self, method: Method, y: f64, a_n: f64) -> f64 {
        match method {
            Method::Normal => {
                let d = (y - self.estimate.log_xp_hat) / self.estimate.se_log_xp;
                d * d
            }
            Method::El => self.el(y),
            Method::Ael => self.ael(y, a_n),
        }
    }

    pub fn interval(&self, method: Method, alpha: f64, a_n: f64) -> Result<ConfidenceInterval, LikelihoodError> {
        match method {
            Method::Normal => normal_ci(&self.estimate, alpha),
            Method::El | Method::Ael => self.likelihood_interval(method, alpha, a_n),
        }
    }

    fn likelihood_interval(&self, method: Method, alpha: f64, a_n: f64) -> Result<ConfidenceInterval, LikelihoodError> {
        check_alpha(alpha)?;
        if self.a >= 0.0 {
            return Err(LikelihoodError::NonNegativeACoeff(self.a));
        }
        if method == Method::Ael && !(a_n > 0.0 && a_n.is_finite()) {
            return Err(LikelihoodError::Domain(format!("a_n must be positive, got {a_n}")));
        }
        let c = chi2_critical(alpha)?;
        let point = self.estimate.log_xp_hat;
        let z = normal_critical(alpha)?;
        let mut step = z * self.estimate.se_log_xp;
        if !(step > 0.0 && step.is_finite()) {
            step = 1e-3 * (1.0 + point.abs());
        }
        let f = |y: f64| self.statistic(method, y, a_n);
        if !(f(point) < c) {
            return Err(LikelihoodError::Domain(
                "statistic at the point estimate exceeds the critical value".into(),
            ));
        }
        let (lower, dl) = endpoint(&f, point, -step, c);
        let (upper, du) = endpoint(&f, point, step, c);
        let diagnostics = Diagnostics {
            hull_failure_at_endpoints: dl.hull || du.hull,
            bracket_expanded: dl.dip || du.dip,
            bracket_failure: dl.failed || du.failed,
            negative_lower_bound: lower < 0.0,
            a_n_exceeds_rate: method == Method::Ael && a_n > (self.k as f64).powf(2.0 / 3.0),
        };
        Ok(ConfidenceInterval {
            method,
            level: 1.0 - alpha,
            lower,
            upper,
            point,
            diagnostics,
        })
    }
}

#[derive(Default)]
struct EndpointFlags {
    hull: bool,
    dip: bool,
    failed: bool,
}

/// Walks from `point` in direction `step` with doubling steps until
/// `f >= c` (or `f` is infinite), then bisects the last bracket.
fn endpoint<F: Fn(f64) -> f64>(f: &F, point: f64, step: f64, c: f64) -> (f64, EndpointFlags) {
    let mut flags = EndpointFlags::default();
    let mut inner = point;
    let mut outer = None;
    let mut scale = 1.0;
    for _ in 0..MAX_EXPANSIONS {
        let y = point + step * scale;
        let v = f(y);
        if !(v < c) {
            flags.hull = v.is_infinite();
            outer = Some(y);
            break;
        }
        inner = y;
        scale *= 2.0;
    }
    let Some(edge) = outer else {
        flags.failed = true;
        return (inner, flags);
    };
    let (mut lo, mut hi) = (inner, edge);
    while (hi - lo).abs() > ENDPOINT_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bound = 0.5 * (lo + hi);
    for i in 1..=DIP_SCAN_POINTS {
        let y = hi + (edge - hi) * i as f64 / (DIP_SCAN_POINTS + 1) as f64;
        if f(y) < c {
            flags.dip = true;
            break;
        }
    }
    (bound, flags)
}

/// Computes the `z` values at `y`, optionally with the AEL pseudo point.
pub fn z_sample(data: &BlockData, p: f64, y: f64, with_pseudo: bool, a_n: f64) -> Result<ZSample, LikelihoodError> {
    let profile = Profile::new(data, p)?;
    Ok(profile.z_sample(y, with_pseudo.then_some(a_n)))
}

/// Solves `sum z / (1 + lambda z) = 0` for the Lagrange multiplier.
///
/// The left side is strictly decreasing on `(-1/max z, -1/min z)`; the root is
/// found by Newton steps safeguarded by bisection on that interval (shrunk by
/// `1e-12` of its width at each end).
pub fn el_lambda(z: &[f64]) -> Result<f64, LikelihoodError> {
    let (zmin, zmax) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(zmin < 0.0 && zmax > 0.0) {
        return Err(LikelihoodError::ZeroNotInHull);
    }
    let (left, right) = (-1.0 / zmax, -1.0 / zmin);
    let shrink = 1e-12 * (right - left);
    let (mut lo, mut hi) = (left + shrink, right - shrink);

    let eval = |lambda: f64| {
        let mut g = 0.0;
        let mut dg = 0.0;
        for &v in z {
            let q = v / (1.0 + lambda * v);
            g += q;
            dg -= q * q;
        }
        (g, dg)
    };

    let mut x = 0.0;
    for _ in 0..200 {
        let (g, dg) = eval(x);
        if g == 0.0 {
            return Ok(x);
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / dg;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done =
            (next - x).abs() <= 1e-12 * next.abs().max(1e-300) || next == x || hi - lo <= 1e-15 * (hi.abs() + lo.abs());
        x = next;
        if done {
            break;
        }
    }
    Ok(x)
}

/// `2 sum log(1 + lambda z)`; zero when all values are zero, `+inf` when zero
/// is not strictly inside their range.
pub fn el_log_ratio(z: &[f64]) -> f64 {
    if z.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    match el_lambda(z) {
        Ok(lambda) => 2.0 * z.iter().map(|&v| (lambda * v).ln_1p()).sum::<f64>(),
        Err(_) => f64::INFINITY,
    }
}

/// EL statistic for `log x_p = y`; `+inf` on hull failure.
pub fn el_statistic(data: &BlockData, p: f64, y: f64) -> Result<f64, LikelihoodError> {
    Ok(Profile::new(data, p)?.el(y))
}

/// AEL statistic for `log x_p = y` with pseudo-point weight `a_n`.
pub fn ael_statistic(data: &BlockData, p: f64, y: f64, a_n: f64) -> Result<f64, LikelihoodError> {
    if !(a_n > 0.0 && a_n.is_finite()) {
        return Err(LikelihoodError::Domain(format!("a_n must be positive, got {a_n}")));
    }
    Ok(Profile::new(data, p)?.ael(y, a_n))
}

/// `log x_p_hat +/- z_{alpha/2} se`.
pub fn normal_ci(est: &QuantileEstimate, alpha: f64) -> Result<ConfidenceInterval, LikelihoodError> {
    let z = normal_critical(alpha)?;
    if est.a_coeff >= 0.0 {
        return Err(LikelihoodError::NonNegativeACoeff(est.a_coeff));
    }
    if est.gamma_hat == 0.0 {
        return Err(LikelihoodError::DegenerateEstimate);
    }
    let half = z * est.se_log_xp;
    let lower = est.log_xp_hat - half;
    let diagnostics = Diagnostics {
        negative_lower_bound: lower < 0.0,
        ..Default::default()
    };
    Ok(ConfidenceInterval {
        method: Method::Normal,
        level: 1.0 - alpha,
        lower,
        upper: est.log_xp_hat + half,
        point: est.log_xp_hat,
        diagnostics,
    })
}

/// EL or AEL interval: the connected component of
/// `{y : statistic(y) < c(alpha)}` containing `log x_p_hat`.
pub fn likelihood_ci(
    data: &BlockData,
    p: f64,
    alpha: f64,
    method: Method,
    a_n: f64,
) -> Result<ConfidenceInterval, LikelihoodError> {
    if method == Method::Normal {
        return Err(LikelihoodError::Domain("use normal_ci for the normal interval".into()));
    }
    Profile::new(data, p)?.likelihood_interval(method, alpha, a_n)
}
