//! Extension calculi, each with a validator, a lowering to the core, and the
//! lift and embed maps between resolutions.

pub mod concurrent;
pub mod conflicts;
pub mod features;
pub mod formulae;
pub mod peer;
pub mod provides;
