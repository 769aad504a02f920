//! Front ends for the glove simulator: scripted runs, cohort experiments,
//! table statistics and a live session service.

pub mod experiment;
pub mod script;
pub mod server;
pub mod stats;
