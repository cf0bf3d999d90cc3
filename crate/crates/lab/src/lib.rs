//! Scenario runner and reporting for the CV-QKD link simulator: plain-text
//! configuration, seeded end-to-end runs, CSV/JSON artifact emission, and
//! the acceptance suite behind `cvqkd-lab selftest`.

pub mod accept;
pub mod config;
pub mod oracle;
pub mod report;
pub mod scenarios;
