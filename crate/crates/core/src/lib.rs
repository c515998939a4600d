//! Identification of push-recovery control laws from centre-of-mass
//! trajectories.

pub mod fitlaw;
pub mod segment;
pub mod signal;
pub mod simulate;
pub mod stats;
pub mod trialdata;
