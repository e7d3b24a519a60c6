//! Deterministic urban-microclimate simulation: STL geometry and EPW weather
//! in, coupled wind / radiation / comfort / energy fields and audit-ready
//! reports out.

pub mod comfort_energy;
pub mod fixtures;
pub mod geometry;
pub mod orchestrator;
pub mod outputs;
pub mod params;
pub mod radiation;
pub mod weather;
pub mod windflow;
