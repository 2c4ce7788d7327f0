//! Command implementations behind the `optprofiler` binary, exposed as a
//! library so integration tests can drive them directly.

pub mod calibrate;
pub mod config;
pub mod meta;
pub mod plot;
pub mod runner;
pub mod scorer;
pub mod util;
