//! Batch front end: configuration, subcommands and on-disk artifacts.
//!
//! ```text
//! sdmqkd simulate|analyze|tomography|compare --config <path> --out <dir> [--seed <u64>] [--format json|csv]
//! ```
//!
//! | exit | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | configuration error (parse, unknown key, range) |
//! | 3 | I/O error, including unreadable or malformed pulse logs |
//! | 4 | analysis failure (vanishing single-photon yield, too few counts) |
//!
//! Failures are reported on stderr as one JSON object
//! `{"format_version":1,"error":{"kind":..,"exit_code":..,"message":..}}`.

mod config;
mod report;
mod run;

pub use config::{
    derive_pair_seeds, parse_config, parse_config_with_seed, AnalysisSettings, AnalyzeSettings, CompareSettings,
    ConfigError, OutputFormat, OutputSettings, PairSettings, RunConfig, SessionSettings, TomographySettings,
    CONFIG_FORMAT_VERSION,
};
pub use report::{
    ClassRates, CompareDocument, KeyRateDocument, Manifest, PairReport, TomographyDocument, FIDELITY_CSV_HEADER,
    KEY_RATE_CSV_HEADER, REPORT_FORMAT_VERSION, STATISTICS_CSV_HEADER, TIMESERIES_CSV_HEADER, TOMOGRAPHY_CSV_HEADER,
};
pub use run::{run, CliError, Command, Invocation, RunSummary};
