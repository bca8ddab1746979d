//! Simulation lab for Join-the-Idle-Queue load balancing in large server farms.

pub mod acceptance;
pub mod config;
pub mod curve;
pub mod dist;
pub mod engine;
pub mod fluid;
pub mod ledger;
pub mod measure;
pub mod output;
pub mod policy;
pub mod quad;
pub mod rng;
pub mod sweep;
pub mod trace;
