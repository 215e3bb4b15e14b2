//! Block data: per block, the block size `m` and the logs of the `r + 1`
//! largest observations.
//!
//! Observations are assumed to be at least 1, so every stored log value is
//! non-negative. [`BlockData::blockify`] applies `max(x, 1)` before taking
//! logs; [`BlockData::new`] validates data that was prepared elsewhere and
//! never clamps.
//!
//! Two file formats are supported:
//!
//! * block CSV with header `block_id,m,rank,log_value`, one row per order
//!   statistic, ranks `1..=r+1` for every block;
//! * raw samples, one real per line.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockDataError {
    #[error("block {block}: order statistics are not non-increasing")]
    NonMonotoneBlock { block: usize },
    #[error("block {block}: r + 1 = {ranks} order statistics exceed block size m = {m}")]
    RanksExceedBlockSize { block: usize, ranks: usize, m: usize },
    #[error("block {block}: need at least two order statistics (r >= 1), got {ranks}")]
    TooFewRanks { block: usize, ranks: usize },
    #[error("need at least 2 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error("block {block}: negative log value {value}")]
    NegativeLogValue { block: usize, value: f64 },
    #[error("block {block}: non-finite log value")]
    NonFiniteValue { block: usize },
    #[error("insufficient data: k(r+1) = {needed} exceeds sample size {n}")]
    InsufficientData { needed: usize, n: usize },
    #[error("invalid blocking parameters: k = {k}, r = {r} (need k >= 2, r >= 1)")]
    InvalidBlocking { k: usize, r: usize },
    #[error("sample value {index} is not a finite number")]
    InvalidSample { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BlockDataError {
    fn from(e: std::io::Error) -> Self {
        BlockDataError::Io(e.to_string())
    }
}

/// One block: its size and the logs of its top `r + 1` order statistics,
/// largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    m: usize,
    top_log: Vec<f64>,
}

impl Block {
    /// Unvalidated constructor; validation happens in [`BlockData::new`].
    pub fn new(m: usize, top_log: Vec<f64>) -> Self {
        Block { m, top_log }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of log-gaps used by the estimators, `len(top_log) - 1`.
    pub fn r(&self) -> usize {
        self.top_log.len().saturating_sub(1)
    }

    pub fn top_log(&self) -> &[f64] {
        &self.top_log
    }

    /// `log X_{m,r+1}`, the smallest retained order statistic.
    pub fn threshold_log(&self) -> f64 {
        self.top_log[self.r()]
    }

    /// Sum over `j = 1..=r` of `log X_{m,j} - log X_{m,r+1}`.
    pub fn excess_sum(&self) -> f64 {
        let t = self.threshold_log();
        self.top_log[..self.r()].iter().map(|x| x - t).sum()
    }

    fn check(&self, block: usize) -> Result<(), BlockDataError> {
        let ranks = self.top_log.len();
        if ranks < 2 {
            return Err(BlockDataError::TooFewRanks { block, ranks });
        }
        if ranks > self.m {
            return Err(BlockDataError::RanksExceedBlockSize {
                block,
                ranks,
                m: self.m,
            });
        }
        for &v in &self.top_log {
            if !v.is_finite() {
                return Err(BlockDataError::NonFiniteValue { block });
            }
            if v < 0.0 {
                return Err(BlockDataError::NegativeLogValue { block, value: v });
            }
        }
        if self.top_log.windows(2).any(|w| w[0] < w[1]) {
            return Err(BlockDataError::NonMonotoneBlock { block });
        }
        Ok(())
    }
}

/// Validated, immutable collection of at least two blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockData {
    blocks: Vec<Block>,
    homogeneous: bool,
}

impl BlockData {
    /// Validates candidate blocks. Nothing is clamped or reordered.
    pub fn new(blocks: Vec<Block>) -> Result<Self, BlockDataError> {
        if blocks.len() < 2 {
            return Err(BlockDataError::TooFewBlocks(blocks.len()));
        }
        for (i, b) in blocks.iter().enumerate() {
            b.check(i)?;
        }
        let (m0, r0) = (blocks[0].m, blocks[0].r());
        let homogeneous = blocks.iter().all(|b| b.m == m0 && b.r() == r0);
        Ok(BlockData { blocks, homogeneous })
    }

    /// Splits `sample` into `k` consecutive blocks of `m = floor(n / k)`
    /// values and keeps the logs of the top `r + 1` of each. The trailing
    /// `n - k m` values are discarded. Values below 1 are raised to 1.
    pub fn blockify(sample: &[f64], k: usize, r: usize) -> Result<Self, BlockDataError> {
        if k < 2 || r < 1 {
            return Err(BlockDataError::InvalidBlocking { k, r });
        }
        let n = sample.len();
        let needed = k * (r + 1);
        if needed > n {
            return Err(BlockDataError::InsufficientData { needed, n });
        }
        if let Some(index) = sample.iter().position(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(BlockDataError::InvalidSample { index });
        }
        let m = n / k;
        let blocks = sample[..k * m]
            .chunks_exact(m)
            .map(|chunk| {
                let mut v: Vec<f64> = chunk.iter().map(|x| x.max(1.0)).collect();
                v.sort_unstable_by(|a, b| b.total_cmp(a));
                v.truncate(r + 1);
                Block::new(m, v.into_iter().map(f64::ln).collect())
            })
            .collect();
        BlockData::new(blocks)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    /// True when every block shares the same `(m, r)`.
    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    /// Common `(m, r)` for homogeneous data.
    pub fn common_shape(&self) -> Option<(usize, usize)> {
        self.homogeneous.then(|| (self.blocks[0].m, self.blocks[0].r()))
    }

    /// `sum_i r_i`.
    pub fn total_ranks(&self) -> usize {
        self.blocks.iter().map(Block::r).sum()
    }

    /// Adds `shift` to every stored log value (rescaling every raw
    /// observation by `exp(shift)`).
    pub fn shifted(&self, shift: f64) -> Result<Self, BlockDataError> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block::new(b.m, b.top_log.iter().map(|x| x + shift).collect()))
            .collect();
        BlockData::new(blocks)
    }

    /// Reads the block CSV format. Blocks appear in order of first
    /// appearance of their `block_id`; rows within a block may be in any
    /// rank order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, BlockDataError> {
        #[derive(Deserialize)]
        struct Row {
            block_id: String,
            m: usize,
            rank: usize,
            log_value: f64,
        }

        struct Pending {
            m: usize,
            first_line: usize,
            values: Vec<Option<f64>>,
        }

        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(1, e))?.clone();
        let expected = ["block_id", "m", "rank", "log_value"];
        if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(BlockDataError::Parse {
                line: 1,
                message: format!("expected header `{}`", expected.join(",")),
            });
        }

        let mut order: Vec<String> = Vec::new();
        let mut pending: HashMap<String, Pending> = HashMap::new();
        for (idx, rec) in rdr.deserialize::<Row>().enumerate() {
            let line = idx + 2;
            let row = rec.map_err(|e| csv_error(line, e))?;
            if row.rank == 0 {
                return Err(BlockDataError::Parse {
                    line,
                    message: "rank must be >= 1".into(),
                });
            }
            let entry = pending.entry(row.block_id.clone()).or_insert_with(|| {
                order.push(row.block_id.clone());
                Pending {
                    m: row.m,
                    first_line: line,
                    values: Vec::new(),
                }
            });
            if entry.m != row.m {
                return Err(BlockDataError::Parse {
                    line,
                    message: format!("block `{}` has inconsistent m ({} vs {})", row.block_id, entry.m, row.m),
                });
            }
            if entry.values.len() < row.rank {
                entry.values.resize(row.rank, None);
            }
            let slot = &mut entry.values[row.rank - 1];
            if slot.is_some() {
                return Err(BlockDataError::Parse {
                    line,
                    message: format!("duplicate rank {} for block `{}`", row.rank, row.block_id),
                });
            }
            *slot = Some(row.log_value);
        }

        let mut blocks = Vec::with_capacity(order.len());
        for id in &order {
            let p = pending.remove(id).expect("block recorded in order");
            let mut top = Vec::with_capacity(p.values.len());
            for (j, v) in p.values.into_iter().enumerate() {
                match v {
                    Some(v) => top.push(v),
                    None => {
                        return Err(BlockDataError::Parse {
                            line: p.first_line,
                            message: format!("block `{id}` is missing rank {}", j + 1),
                        })
                    }
                }
            }
            blocks.push(Block::new(p.m, top));
        }
        BlockData::new(blocks)
    }

    /// Writes the block CSV format. Block ids are 1-based positions. Values
    /// use the shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BlockDataError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| BlockDataError::Io(e.to_string());
        w.write_record(["block_id", "m", "rank", "log_value"]).map_err(err)?;
        for (i, b) in self.blocks.iter().enumerate() {
            for (j, v) in b.top_log.iter().enumerate() {
                w.write_record([
                    (i + 1).to_string(),
                    b.m.to_string(),
                    (j + 1).to_string(),
                    format!("{v:?}"),
                ])
                .map_err(err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(line: usize, e: csv::Error) -> BlockDataError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(line);
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(f) => format!("column {}: {}", f + 1, err.kind()),
            None => err.kind().to_string(),
        },
        _ => e.to_string(),
    };
    BlockDataError::Parse { line, message }
}

/// Reads a raw sample: one real per line, blank lines and `#` comments
/// skipped.
pub fn read_raw_sample<R: BufRead>(reader: R) -> Result<Vec<f64>, BlockDataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| BlockDataError::Parse {
            line: i + 1,
            message: format!("`{t}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(BlockDataError::Parse {
                line: i + 1,
                message: "value is not finite".into(),
            });
        }
        out.push(v);
    }
    Ok(out)
}
