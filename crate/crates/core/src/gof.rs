//! Goodness-of-fit helpers used by the test and acceptance suites:
//! Kolmogorov–Smirnov (one- and two-sample) and Pearson chi-square.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function
/// `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample KS test of `sample` against a continuous `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> TestResult {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    TestResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    TestResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    }
}

/// Pearson chi-square test of observed counts against cell probabilities
/// (which should sum to one). Degrees of freedom: `cells - 1`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> TestResult {
    assert_eq!(observed.len(), probs.len());
    assert!(observed.len() >= 2);
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).expect("positive degrees of freedom");
    TestResult {
        statistic: stat,
        p_value: dist.sf(stat),
    }
}
