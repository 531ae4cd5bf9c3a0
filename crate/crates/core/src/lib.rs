//! Stable object placement planning driven by static robustness maps.

pub mod geometry;
pub mod io;
pub mod qp;
pub mod statics;
pub mod assembly;
pub mod contact;
pub mod robustness;
pub mod sampling;
pub mod matching;
pub mod pose;
pub mod planner;
