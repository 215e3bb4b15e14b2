use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{scheme_params, ReplicateRecord, SimConfig, SimulationError};
use crate::likelihood::Method;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub k: usize,
    pub m: usize,
    pub p: f64,
    pub method: Method,
    pub coverage: f64,
    /// `None` when lengths were not requested.
    pub mean_length: Option<f64>,
    pub mc_se_coverage: f64,
    pub hull_failures: usize,
    /// Replicates that produced a result.
    pub replicates: usize,
    /// Replicates abandoned as degenerate.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimConfig,
    pub rows: Vec<ReportRow>,
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(super) fn aggregate(
    config: &SimConfig,
    k: usize,
    records: &[ReplicateRecord],
) -> Result<Vec<ReportRow>, SimulationError> {
    let cell = scheme_params(&config.scheme, &config.model, k)?;
    let failures = records.iter().filter(|r| r.outcomes.is_err()).count();
    let ok: Vec<_> = records.iter().filter_map(|r| r.outcomes.as_ref().ok()).collect();
    let n = ok.len();
    let rows = config
        .methods
        .iter()
        .enumerate()
        .map(|(idx, &method)| {
            let mut covered = 0usize;
            let mut hull = 0usize;
            let mut len = CompensatedSum::default();
            let mut have_len = true;
            for outcomes in &ok {
                let o = &outcomes[idx];
                covered += o.covered as usize;
                hull += o.hull_failure as usize;
                match o.length {
                    Some(l) => len.add(l),
                    None => have_len = false,
                }
            }
            let coverage = if n > 0 { covered as f64 / n as f64 } else { f64::NAN };
            ReportRow {
                k,
                m: cell.m,
                p: cell.p,
                method,
                coverage,
                mean_length: (have_len && n > 0).then(|| len.total() / n as f64),
                mc_se_coverage: (coverage * (1.0 - coverage) / n as f64).sqrt(),
                hull_failures: hull,
                replicates: n,
                failures,
            }
        })
        .collect();
    Ok(rows)
}

impl SimulationReport {
    pub fn row(&self, k: usize, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.k == k && r.method == method)
    }

    /// `k,m,p,method,coverage,mean_length,mc_se,hull_failures`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,m,p,method,coverage,mean_length,mc_se,hull_failures")?;
        for r in &self.rows {
            let len = r.mean_length.map(|l| format!("{l:?}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{:?},{},{:?},{},{:?},{}",
                r.k, r.m, r.p, r.method, r.coverage, len, r.mc_se_coverage, r.hull_failures
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Coverage and mean-length tables, one column per method; coverage to
    /// four decimals and lengths to three.
    pub fn to_text_table(&self) -> String {
        let cfg = &self.config;
        let mut s = String::new();
        let scheme = match cfg.scheme {
            super::Scheme::Scheme1 => "Scheme 1: m = [1000/k], p = 1/1000".to_string(),
            super::Scheme::Scheme2 { v, c } => {
                let v = v.or_else(|| super::default_v(&cfg.model)).unwrap_or(f64::NAN);
                format!("Scheme 2: m = [{c} k^{v}], p = 1/(k m)")
            }
        };
        let _ = writeln!(
            s,
            "{} | {} | r = {} | {} replicates | level {}",
            cfg.model.label(),
            scheme,
            cfg.r,
            cfg.replicates,
            1.0 - cfg.alpha
        );
        for (title, lengths) in [("Coverage probability", false), ("Average length", true)] {
            if lengths && self.rows.iter().all(|r| r.mean_length.is_none()) {
                continue;
            }
            let _ = writeln!(s, "\n{title}");
            let _ = write!(s, "{:>5} {:>6}", "k", "m");
            for m in &cfg.methods {
                let _ = write!(s, " {:>8}", m.label());
            }
            let _ = writeln!(s);
            for &k in &cfg.k_grid {
                let m = self.rows.iter().find(|r| r.k == k).map(|r| r.m).unwrap_or(0);
                let _ = write!(s, "{k:>5} {m:>6}");
                for &method in &cfg.methods {
                    let cell = self.row(k, method).map(|r| {
                        if lengths {
                            r.mean_length.map(|l| format!("{l:.3}")).unwrap_or_else(|| "-".into())
                        } else {
                            format!("{:.4}", r.coverage)
                        }
                    });
                    let _ = write!(s, " {:>8}", cell.unwrap_or_else(|| "-".into()));
                }
                let _ = writeln!(s);
            }
        }
        s
    }
}
