//! Heavy-tailed parametric models and samplers for top-of-block order
//! statistics.
//!
//! Each model is described through its tail quantile function
//! `U(t) = F^{-1}(1 - 1/t)`, `t > 1`:
//!
//! | family        | `U(t)`                         | `gamma`    | `rho`   |
//! |---------------|--------------------------------|------------|---------|
//! | Fréchet(a)    | `(-log(1 - 1/t))^(-1/a)`       | `1/a`      | `-1`    |
//! | Burr(a, b)    | `(t^(1/b) - 1)^(1/a)`          | `1/(a b)`  | `-1/b`  |
//!
//! # Second-order function
//!
//! Both families admit a two-term tail expansion
//! `1 - F(x) = c x^(-1/gamma) + d x^(-beta) + o(x^(-beta))`, which gives
//! `A(t) = -gamma (beta gamma - 1) d c^(-beta gamma) t^(1 - beta gamma)` and
//! `rho = 1 - beta gamma`. The constants are:
//!
//! * Fréchet(a): `1 - exp(-x^-a) = x^-a - x^(-2a)/2 + ...`, so `c = 1`,
//!   `d = -1/2`, `beta = 2a`, hence `rho = -1` and `A(t) = 1 / (2 a t)`.
//! * Burr(a, b): `(1 + x^a)^(-b) = x^(-ab) - b x^(-ab-a) + ...`, so `c = 1`,
//!   `d = -b`, `beta = a(b + 1)`, hence `rho = -1/b` and
//!   `A(t) = t^(-1/b) / (a b)`.
//!
//! Both are positive, matching the direct expansion of `log U(tx) - log U(t)`.
//!
//! # Sampling
//!
//! An iid sample can be written `X = U(e^E)` with `E` unit exponential, so the
//! top `r + 1` order statistics of a block of size `m` are `U(e^{E_{m,j}})`
//! where `E_{m,1} >= ... >= E_{m,r+1}` are exponential order statistics. By
//! the Rényi representation the scaled spacings `j (E_{m,j} - E_{m,j+1})` are
//! iid unit exponentials, and `E_{m,r+1} = sum_{j=r+1}^m I_j / j`. Since
//! `exp(-E_{m,r+1})` is the `(r+1)`-th smallest of `m` uniforms, it is
//! `Beta(r + 1, m - r)`, which gives an `O(r)` sampler independent of `m`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block_data::Block;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid model `{0}`: expected `frechet:a=<a>` or `burr:a=<a>,b=<b>` with positive parameters")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum HeavyTailModel {
    Frechet { a: f64 },
    Burr { a: f64, b: f64 },
}

impl HeavyTailModel {
    pub fn frechet(a: f64) -> Result<Self, DistributionError> {
        if a > 0.0 && a.is_finite() {
            Ok(HeavyTailModel::Frechet { a })
        } else {
            Err(DistributionError::InvalidModel(format!("frechet:a={a}")))
        }
    }

    pub fn burr(a: f64, b: f64) -> Result<Self, DistributionError> {
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            Ok(HeavyTailModel::Burr { a, b })
        } else {
            Err(DistributionError::InvalidModel(format!("burr:a={a},b={b}")))
        }
    }

    /// Human-readable name, e.g. `Frechet(1)` or `Burr(0.5,1)`.
    pub fn label(&self) -> String {
        match self {
            HeavyTailModel::Frechet { a } => format!("Frechet({a})"),
            HeavyTailModel::Burr { a, b } => format!("Burr({a},{b})"),
        }
    }

    /// Extreme value index.
    pub fn gamma(&self) -> f64 {
        match *self {
            HeavyTailModel::Frechet { a } => 1.0 / a,
            HeavyTailModel::Burr { a, b } => 1.0 / (a * b),
        }
    }

    /// Second-order index.
    pub fn rho(&self) -> f64 {
        match *self {
            HeavyTailModel::Frechet { .. } => -1.0,
            HeavyTailModel::Burr { b, .. } => -1.0 / b,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.sf(x)
    }

    /// Survival function `1 - F(x)`, computed without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match *self {
            HeavyTailModel::Frechet { a } => -(-x.powf(-a)).exp_m1(),
            HeavyTailModel::Burr { a, b } => (-b * x.powf(a).ln_1p()).exp(),
        }
    }

    /// Tail quantile function `U(t) = F^{-1}(1 - 1/t)`.
    pub fn quantile_u(&self, t: f64) -> Result<f64, DistributionError> {
        if !(t > 1.0) {
            return Err(DistributionError::Domain(format!("U(t) requires t > 1, got {t}")));
        }
        Ok(match *self {
            HeavyTailModel::Frechet { a } => (-(-1.0 / t).ln_1p()).powf(-1.0 / a),
            HeavyTailModel::Burr { a, b } => (t.powf(1.0 / b) - 1.0).powf(1.0 / a),
        })
    }

    /// `log U(e^s)` for `s > 0`, stable for large `s`. Not clamped.
    pub fn log_u_of_log(&self, s: f64) -> f64 {
        match *self {
            HeavyTailModel::Frechet { a } => {
                // -log(1 - e^-s)
                let w = if s > std::f64::consts::LN_2 {
                    -(-(-s).exp()).ln_1p()
                } else {
                    -(-(-s).exp_m1()).ln()
                };
                -w.ln() / a
            }
            HeavyTailModel::Burr { a, b } => {
                let u = s / b;
                let l = if u > 30.0 {
                    u + (-(-u).exp()).ln_1p()
                } else {
                    u.exp_m1().ln()
                };
                l / a
            }
        }
    }

    /// `log x_p = log U(1/p)`.
    pub fn true_log_quantile(&self, p: f64) -> Result<f64, DistributionError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistributionError::Domain(format!("p must lie in (0, 1), got {p}")));
        }
        Ok(self.log_u_of_log(-p.ln()))
    }

    /// Second-order function `A(t)`; see the module docs for the constants.
    pub fn second_order_a(&self, t: f64) -> Result<f64, DistributionError> {
        if !(t > 1.0) {
            return Err(DistributionError::Domain(format!("A(t) requires t > 1, got {t}")));
        }
        Ok(match *self {
            HeavyTailModel::Frechet { a } => 1.0 / (2.0 * a * t),
            HeavyTailModel::Burr { a, b } => t.powf(-1.0 / b) / (a * b),
        })
    }

    /// Observation log for an exponential variate, clamped at `log 1 = 0`.
    fn clamped_log(&self, e: f64) -> f64 {
        if e > 0.0 {
            self.log_u_of_log(e).max(0.0)
        } else {
            0.0
        }
    }
}

impl fmt::Display for HeavyTailModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeavyTailModel::Frechet { a } => write!(f, "frechet:a={a}"),
            HeavyTailModel::Burr { a, b } => write!(f, "burr:a={a},b={b}"),
        }
    }
}

impl FromStr for HeavyTailModel {
    type Err = DistributionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DistributionError::InvalidModel(s.to_string());
        let (family, params) = s.trim().split_once(':').ok_or_else(bad)?;
        let mut a = None;
        let mut b = None;
        for kv in params.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "a" if a.is_none() => a = Some(v),
                "b" if b.is_none() => b = Some(v),
                _ => return Err(bad()),
            }
        }
        match (family.trim().to_ascii_lowercase().as_str(), a, b) {
            ("frechet", Some(a), None) => HeavyTailModel::frechet(a).map_err(|_| bad()),
            ("burr", Some(a), Some(b)) => HeavyTailModel::burr(a, b).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Top `r + 1` exponential order statistics of a block and the
/// corresponding observation logs, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TopOrderSample {
    pub e_values: Vec<f64>,
    pub log_values: Vec<f64>,
}

impl TopOrderSample {
    fn from_e(model: &HeavyTailModel, e_values: Vec<f64>) -> Self {
        let log_values = e_values.iter().map(|&e| model.clamped_log(e)).collect();
        TopOrderSample { e_values, log_values }
    }

    pub fn into_block(self, m: usize) -> Block {
        Block::new(m, self.log_values)
    }
}

/// How `E_{m,r+1}` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdDraw {
    /// `-log B`, `B ~ Beta(r + 1, m - r)`; O(1).
    #[default]
    Beta,
    /// `sum_{j=r+1}^m I_j / j`; O(m).
    HarmonicSum,
}

/// Fast sampler of the top `r + 1` order statistics of a block of `m` iid
/// draws from `model`. Panics unless `1 <= r < m`.
pub fn sample_top_block<R: Rng + ?Sized>(model: &HeavyTailModel, m: usize, r: usize, rng: &mut R) -> TopOrderSample {
    sample_top_block_with(ThresholdDraw::Beta, model, m, r, rng)
}

pub fn sample_top_block_with<R: Rng + ?Sized>(
    draw: ThresholdDraw,
    model: &HeavyTailModel,
    m: usize,
    r: usize,
    rng: &mut R,
) -> TopOrderSample {
    assert!(r >= 1 && r < m, "need 1 <= r < m, got r = {r}, m = {m}");
    let threshold = match draw {
        ThresholdDraw::Beta => {
            let beta = Beta::new((r + 1) as f64, (m - r) as f64).expect("positive shape parameters");
            let b: f64 = beta.sample(rng);
            -b.ln()
        }
        ThresholdDraw::HarmonicSum => (r + 1..=m)
            .rev()
            .map(|j| {
                let i: f64 = Exp1.sample(rng);
                i / j as f64
            })
            .sum(),
    };
    let mut e = vec![0.0; r + 1];
    e[r] = threshold;
    for j in (1..=r).rev() {
        let i: f64 = Exp1.sample(rng);
        e[j - 1] = e[j] + i / j as f64;
    }
    TopOrderSample::from_e(model, e)
}

/// Reference sampler: draws all `m` variates by inversion and sorts.
pub fn sample_top_block_naive<R: Rng + ?Sized>(
    model: &HeavyTailModel,
    m: usize,
    r: usize,
    rng: &mut R,
) -> TopOrderSample {
    assert!(r >= 1 && r < m, "need 1 <= r < m, got r = {r}, m = {m}");
    let mut e: Vec<f64> = (0..m)
        .map(|_| {
            let u: f64 = rng.random();
            // E = -log(1 - u) maps to X = F^{-1}(u)
            -(-u).ln_1p()
        })
        .collect();
    e.sort_unstable_by(|a, b| b.total_cmp(a));
    e.truncate(r + 1);
    TopOrderSample::from_e(model, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gof;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn models() -> Vec<HeavyTailModel> {
        vec![
            HeavyTailModel::frechet(1.0).unwrap(),
            HeavyTailModel::frechet(2.5).unwrap(),
            HeavyTailModel::burr(0.5, 1.0).unwrap(),
            HeavyTailModel::burr(1.0, 0.5).unwrap(),
            HeavyTailModel::burr(2.0, 3.0).unwrap(),
        ]
    }

    #[test]
    fn quantile_examples() {
        let burr11 = HeavyTailModel::burr(1.0, 1.0).unwrap();
        assert_eq!(burr11.quantile_u(2.0).unwrap(), 1.0);
        let burr = HeavyTailModel::burr(0.5, 1.0).unwrap();
        let u = burr.quantile_u(101.0).unwrap();
        assert!((u - 10000.0).abs() < 1e-9, "{u}");
        let fr = HeavyTailModel::frechet(1.0).unwrap();
        let t = 1e6;
        assert!((fr.quantile_u(t).unwrap() / t - 1.0).abs() < 1e-5);
        assert!(fr.quantile_u(1.0).is_err());
        assert!(fr.quantile_u(0.5).is_err());
    }

    #[test]
    fn true_quantile_examples() {
        let fr = HeavyTailModel::frechet(1.0).unwrap();
        let p = (-1.0f64).exp();
        let expected = (1.0 / -(1.0 - (-1.0f64).exp()).ln()).ln();
        assert!((fr.true_log_quantile(p).unwrap() - expected).abs() < 1e-14);

        let burr = HeavyTailModel::burr(1.0, 0.5).unwrap();
        let got = burr.true_log_quantile(1e-4).unwrap();
        assert!((got - (1e8f64 - 1.0).ln()).abs() < 1e-12, "{got}");

        for m in models() {
            let mut prev = f64::NEG_INFINITY;
            for e in 1..12 {
                let q = m.true_log_quantile(10f64.powi(-e)).unwrap();
                assert!(q > prev);
                prev = q;
            }
            assert!(m.true_log_quantile(0.0).is_err());
            assert!(m.true_log_quantile(1.0).is_err());
        }
    }

    #[test]
    fn inverse_identity() {
        for m in models() {
            for i in 0..100 {
                let t = 10f64.powf(0.01 + 0.12 * i as f64);
                let x = m.quantile_u(t).unwrap();
                let sf = m.sf(x);
                assert!((sf * t - 1.0).abs() < 1e-9, "{m} t={t} sf={sf}");
                let via_log = m.log_u_of_log(t.ln());
                assert!((via_log - x.ln()).abs() < 1e-9 * (1.0 + x.ln().abs()), "{m} t={t}");
            }
        }
    }

    #[test]
    fn quantile_nonnegative_in_tail() {
        for m in models() {
            assert!(m.true_log_quantile(1e-3).unwrap() >= 0.0);
        }
    }

    #[test]
    fn second_order_ratio() {
        for m in models() {
            let t = 1e3;
            let ratio = m.second_order_a(2.0 * t).unwrap() / m.second_order_a(t).unwrap();
            let target = 2f64.powf(m.rho());
            assert!((ratio / target - 1.0).abs() < 0.05);
            assert!(m.second_order_a(1e12).unwrap().abs() < 1e-3);
        }
        let b = HeavyTailModel::burr(1.0, 0.5).unwrap();
        let ratio = b.second_order_a(1e4).unwrap() / b.second_order_a(1e3).unwrap();
        assert!((ratio - 1e-2).abs() < 1e-12);
        assert!(b.second_order_a(1.0).is_err());
    }

    #[test]
    fn second_order_matches_expansion() {
        // (log U(tx) - log U(t) - gamma log x) / A(t) -> (x^rho - 1) / rho
        for m in models() {
            let t = 1e5f64;
            for &x in &[0.5, 2.0, 10.0] {
                let lhs = (m.log_u_of_log((t * x).ln()) - m.log_u_of_log(t.ln()) - m.gamma() * x.ln())
                    / m.second_order_a(t).unwrap();
                let rhs = (x.powf(m.rho()) - 1.0) / m.rho();
                assert!(
                    (lhs - rhs).abs() < 2e-2 * rhs.abs().max(1.0),
                    "{m} x={x}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn parse_models() {
        assert_eq!(
            "frechet:a=1".parse::<HeavyTailModel>().unwrap(),
            HeavyTailModel::Frechet { a: 1.0 }
        );
        assert_eq!(
            "burr:a=0.5,b=1".parse::<HeavyTailModel>().unwrap(),
            HeavyTailModel::Burr { a: 0.5, b: 1.0 }
        );
        for bad in [
            "pareto:a=1",
            "frechet",
            "frechet:a=-1",
            "burr:a=1",
            "burr:a=1,b=1,a=2",
            "frechet:a=x",
        ] {
            assert!(bad.parse::<HeavyTailModel>().is_err(), "{bad}");
        }
        for m in models() {
            assert_eq!(m.to_string().parse::<HeavyTailModel>().unwrap(), m);
        }
    }

    #[test]
    fn sampler_shapes() {
        let model = HeavyTailModel::frechet(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s = sample_top_block(&model, 10, 3, &mut rng);
            assert_eq!(s.e_values.len(), 4);
            assert!(s.e_values.windows(2).all(|w| w[0] > w[1]));
            assert!(s.e_values.iter().all(|&e| e > 0.0));
            assert!(s.log_values.windows(2).all(|w| w[0] >= w[1]));
            let n = sample_top_block_naive(&model, 10, 3, &mut rng);
            assert!(n.e_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn threshold_mean_matches_harmonic_tail() {
        let model = HeavyTailModel::frechet(1.0).unwrap();
        let (m, r) = (20, 1);
        let expected: f64 = (r + 1..=m).map(|j| 1.0 / j as f64).sum();
        let var: f64 = (r + 1..=m).map(|j| 1.0 / (j * j) as f64).sum();
        let n = 100_000;
        for draw in [ThresholdDraw::Beta, ThresholdDraw::HarmonicSum] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mean = (0..n)
                .map(|_| sample_top_block_with(draw, &model, m, r, &mut rng).e_values[r])
                .sum::<f64>()
                / n as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - expected).abs() < 3.0 * se, "{draw:?}: {mean} vs {expected}");
        }
    }

    #[test]
    fn m2_r1_threshold_mean() {
        let model = HeavyTailModel::frechet(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_top_block(&model, 2, 1, &mut rng).e_values[1])
            .sum::<f64>()
            / n as f64;
        // Var(I/2) = 1/4
        assert!((mean - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn spacings_are_unit_exponential() {
        let model = HeavyTailModel::burr(1.0, 0.5).unwrap();
        let (m, r) = (30, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut gaps = Vec::with_capacity(n * r);
        for _ in 0..n {
            let s = sample_top_block(&model, m, r, &mut rng);
            for j in 1..=r {
                gaps.push(j as f64 * (s.e_values[j - 1] - s.e_values[j]));
            }
        }
        let len = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / len;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (len - 1.0);
        // Exp(1): Var = 1, Var of sample variance ~ (mu4 - 1)/n = 8/n
        assert!((mean - 1.0).abs() < 3.0 / len.sqrt(), "{mean}");
        assert!((var - 1.0).abs() < 3.0 * (8.0 / len).sqrt(), "{var}");
    }

    #[test]
    fn fast_and_naive_agree_small_m() {
        let model = HeavyTailModel::frechet(1.0).unwrap();
        let (m, r) = (50, 1);
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let fast: Vec<f64> = (0..n)
            .map(|_| sample_top_block(&model, m, r, &mut rng).log_values[1])
            .collect();
        let naive: Vec<f64> = (0..n)
            .map(|_| sample_top_block_naive(&model, m, r, &mut rng).log_values[1])
            .collect();
        let ks = gof::ks_two_sample(&fast, &naive);
        assert!(ks.p_value > 1e-3, "{ks:?}");
    }

    #[test]
    fn larger_blocks_have_larger_maxima() {
        let model = HeavyTailModel::frechet(1.0).unwrap();
        let n = 20_000;
        let mean_top = |m: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..n)
                .map(|_| sample_top_block(&model, m, 1, &mut rng).e_values[0])
                .sum::<f64>()
                / n as f64
        };
        let mut prev = 0.0;
        for m in [5, 20, 80, 320] {
            let v = mean_top(m);
            assert!(v > prev);
            prev = v;
        }
    }
}
