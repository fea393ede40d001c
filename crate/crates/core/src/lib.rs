//! Numerical laboratory for entire graphical self-shrinkers of mean
//! curvature flow.

pub mod flow;
pub mod geometry;
pub mod grid;
pub mod newton;
pub mod profile;
pub mod shooting;
pub mod sparse;
pub mod verify;
pub mod weighted;
