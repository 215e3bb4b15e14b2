//! Study configuration files.
//!
//! Plain `key = value` lines; `#` starts a comment. Recognised keys:
//!
//! ```text
//! scheme      = scheme1 | scheme2
//! model       = frechet:a=1          # may be repeated: one study per model
//! k_grid      = 10:100:5             # or a list: 10,20,50,100
//! r           = 1
//! replicates  = 5000
//! alpha       = 0.05
//! methods     = ael,normal           # or `all`
//! a_n         = 19/12
//! master_seed = 12345
//! v           = 0.5                  # scheme 2 exponent override
//! c           = 50                   # scheme 2 multiplier
//! lengths     = true
//! ```

use thiserror::Error;

use super::{Scheme, SimConfig};
use crate::distributions::HeavyTailModel;
use crate::likelihood::Method;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Parses a real number or a fraction such as `19/12`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((n, d)) => n.trim().parse::<f64>().ok()? / d.trim().parse::<f64>().ok()?,
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

fn parse_k_grid(s: &str) -> Option<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step): (usize, usize, usize) =
                (start.parse().ok()?, end.parse().ok()?, step.parse().ok()?);
            (step > 0 && start <= end).then(|| (start..=end).step_by(step).collect())
        }
        [list] => list.split(',').map(|x| x.trim().parse().ok()).collect(),
        _ => None,
    }
}

fn parse_methods(s: &str) -> Result<Vec<Method>, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Parses a configuration file into one [`SimConfig`] per `model` line.
/// Every study is validated.
pub fn parse_study_config(text: &str) -> Result<Vec<SimConfig>, ConfigError> {
    let mut scheme_name: Option<String> = None;
    let mut models: Vec<(usize, HeavyTailModel)> = Vec::new();
    let defaults = SimConfig::new(Scheme::Scheme1, HeavyTailModel::Frechet { a: 1.0 });
    let mut template = defaults.clone();
    let mut v: Option<f64> = None;
    let mut c = 50.0;
    let mut seen: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(line, format!("expected `key = value`, got `{content}`"));
        };
        let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
        if key != "model" {
            if seen.contains(&key) {
                return err(line, format!("duplicate key `{key}`"));
            }
            seen.push(key.clone());
        }
        let real = || parse_real(value).map_or_else(|| err(line, format!("`{key}` must be a number")), Ok);
        let int = || {
            value
                .parse::<usize>()
                .map_or_else(|_| err(line, format!("`{key}` must be a non-negative integer")), Ok)
        };
        match key.as_str() {
            "scheme" => scheme_name = Some(value.to_ascii_lowercase()),
            "model" => match value.parse::<HeavyTailModel>() {
                Ok(m) => models.push((line, m)),
                Err(e) => return err(line, e.to_string()),
            },
            "k_grid" => match parse_k_grid(value) {
                Some(g) if !g.is_empty() => template.k_grid = g,
                _ => return err(line, "k_grid must be `start:end:step` or a comma-separated list"),
            },
            "r" => template.r = int()?,
            "replicates" => template.replicates = int()?,
            "alpha" => template.alpha = real()?,
            "methods" => template.methods = parse_methods(value).or_else(|e| err(line, e))?,
            "a_n" | "an" => template.a_n = real()?,
            "master_seed" | "seed" => {
                template.master_seed = value
                    .parse()
                    .or_else(|_| err(line, "master_seed must be an unsigned 64-bit integer"))?
            }
            "v" => v = Some(real()?),
            "c" => c = real()?,
            "lengths" => {
                template.lengths = match value.to_ascii_lowercase().as_str() {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return err(line, "lengths must be true or false"),
                }
            }
            other => return err(line, format!("unknown key `{other}`")),
        }
    }

    let scheme = match scheme_name.as_deref() {
        Some("scheme1") | Some("1") => {
            if v.is_some() {
                return err(0, "`v` only applies to scheme2");
            }
            Scheme::Scheme1
        }
        Some("scheme2") | Some("2") => Scheme::Scheme2 { v, c },
        Some(other) => return err(0, format!("unknown scheme `{other}`")),
        None => return err(0, "missing `scheme`"),
    };
    if models.is_empty() {
        return err(0, "missing `model`");
    }
    models
        .into_iter()
        .map(|(line, model)| {
            let cfg = SimConfig {
                scheme,
                model,
                ..template.clone()
            };
            cfg.validate().map_err(|e| ConfigError {
                line,
                message: e.to_string(),
            })?;
            Ok(cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "\
# scheme 2 study
scheme = scheme2
model = frechet:a=1
model = burr:a=0.5,b=1   # second study
k_grid = 10:30:10
replicates = 20
methods = all
a_n = 19/12
master_seed = 42
";
        let cfgs = parse_study_config(text).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[0].k_grid, vec![10, 20, 30]);
        assert_eq!(cfgs[0].methods, Method::ALL.to_vec());
        assert_eq!(cfgs[1].model, HeavyTailModel::Burr { a: 0.5, b: 1.0 });
        assert!((cfgs[0].a_n - 19.0 / 12.0).abs() < 1e-15);
        assert_eq!(cfgs[0].scheme, Scheme::Scheme2 { v: None, c: 50.0 });
        assert_eq!(cfgs[0].master_seed, 42);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_study_config("scheme = scheme1\n").is_err());
        assert!(parse_study_config("model = frechet:a=1\n").is_err());
        let e = parse_study_config("scheme = scheme1\nmodel = weibull:a=1\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_study_config("scheme = scheme1\nmodel = frechet:a=1\nfoo = 1\n").is_err());
        assert!(parse_study_config("scheme = scheme1\nmodel = frechet:a=1\nr = 1\nr = 2\n").is_err());
        // scheme 2 without a known default exponent
        assert!(parse_study_config("scheme = scheme2\nmodel = burr:a=3,b=3\n").is_err());
        assert!(parse_study_config("scheme = scheme2\nmodel = burr:a=3,b=3\nv = 0.5\n").is_ok());
    }

    #[test]
    fn fractions_and_grids() {
        assert_eq!(parse_real("19/12"), Some(19.0 / 12.0));
        assert_eq!(parse_real("1/0"), None);
        assert_eq!(parse_k_grid("10, 20,50"), Some(vec![10, 20, 50]));
        assert_eq!(parse_k_grid("10:100:5").map(|g| g.len()), Some(19));
        assert_eq!(parse_k_grid("10:5:5"), None);
    }
}
