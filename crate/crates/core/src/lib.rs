//! Difficulty-weighted evaluation and leaderboard re-ranking.

pub mod difficulty;
pub mod error;
pub mod ingest;
pub mod leaderboard;
pub mod learners;
pub mod model;
pub mod plotdata;
pub mod scoring;
pub mod session;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/difficulty.md")]
    pub struct Difficulty;
    #[doc = include_str!("../../../book/src/splits.md")]
    pub struct Splits;
    #[doc = include_str!("../../../book/src/weighting.md")]
    pub struct Weighting;
    #[doc = include_str!("../../../book/src/leaderboard.md")]
    pub struct Leaderboard;
    #[doc = include_str!("../../../book/src/charts.md")]
    pub struct Charts;
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    pub struct Reproducibility;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
    #[doc = include_str!("../../../book/src/api.md")]
    pub struct Api;
}
