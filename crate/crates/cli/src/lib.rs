//! Pipeline internals behind the `primespan` binary: scan configuration,
//! the CSV row schema, the scan/simulate engines and the fit/report
//! commands. Exposed as a library so integration tests can drive the
//! pipeline in-process.

pub mod config;
pub mod fitcmd;
pub mod report;
pub mod rows;
pub mod scan;
