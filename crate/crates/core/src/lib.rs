pub mod association;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod placement;
pub mod power;
pub mod rates;
pub mod rng;
pub mod scenario;
