//! Confidence intervals for high quantiles of heavy-tailed data observed
//! as the top order statistics of blocks.
//!
//! ```
//! use blocktail::block_data::BlockData;
//! use blocktail::estimators::quantile_hat;
//! use blocktail::likelihood::{likelihood_ci, Method, DEFAULT_A_N};
//!
//! let sample: Vec<f64> = (1..=400).map(|i| 400.0 / i as f64).collect();
//! let data = BlockData::blockify(&sample, 20, 2).unwrap();
//! let est = quantile_hat(&data, 1e-3).unwrap();
//! let ci = likelihood_ci(&data, 1e-3, 0.05, Method::Ael, DEFAULT_A_N).unwrap();
//! assert!(ci.lower < est.log_xp_hat && est.log_xp_hat < ci.upper);
//! ```

pub mod block_data;
pub mod distributions;
pub mod estimators;
pub mod gof;
pub mod likelihood;
pub mod montecarlo;

pub use block_data::{Block, BlockData, BlockDataError};
pub use distributions::{HeavyTailModel, ThresholdDraw};
pub use estimators::{quantile_hat, quantile_hat_star, QuantileEstimate};
pub use likelihood::{likelihood_ci, normal_ci, ConfidenceInterval, Method};
pub use montecarlo::{run_study, Scheme, SimConfig, SimulationReport};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/block-data.md")]
    mod block_data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/likelihood.md")]
    mod likelihood {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
