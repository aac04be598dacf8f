//! Communication-aware motion planning for mobile robots.

pub mod comm;
pub mod dynamics;
pub mod geometry;
pub mod planner;
pub mod qp;
pub mod radio;
pub mod scenarios;
pub mod sim;
