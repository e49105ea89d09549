//! Measuring calibrated group disparities in access to assigned facilities
//! and re-planning facility locations with fair k-median / k-center
//! algorithms: LP relaxation and rounding, per-group coresets, and
//! capacity-balanced variants.

pub mod balance;
pub mod baseline;
pub mod coreset;
pub mod dataset;
pub mod exhaustive;
pub mod fairlp;
mod flow;
pub mod geo;
pub mod measure;
pub mod pipeline;
pub mod rounding;
