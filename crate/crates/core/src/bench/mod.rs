//! Replication studies: grids, configuration, the study driver and its
//! outputs.

pub mod config;
pub mod grid;
pub mod io;
pub mod report;
pub mod study;
