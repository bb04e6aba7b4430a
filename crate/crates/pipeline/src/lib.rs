//! Input bundles, the rolling daily forecasting pipeline and its outputs.

pub mod bundle;
pub mod config;
pub mod dataset;
pub mod fixture;
pub mod report;
pub mod run;
pub mod stages;
pub mod store;
