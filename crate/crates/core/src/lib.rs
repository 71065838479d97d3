pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod convex;
pub mod rates;
pub mod scheduling;
pub mod sop;
pub mod scenario;
pub mod solution;
pub mod mmsr;
pub mod mssr;
pub mod oma;
pub mod experiment;
