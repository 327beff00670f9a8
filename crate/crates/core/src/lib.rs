//! Treatment-effect heterogeneity workflow for randomized trials.

pub mod benchgen;
pub mod cate;
pub mod displays;
pub mod error;
pub mod hettest;
pub mod importance;
pub mod ida;
pub mod learners;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;
pub mod tabular;

pub use error::{Result, WatchError};
