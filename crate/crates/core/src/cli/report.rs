//! Serialized artifact layouts.

use serde::{Deserialize, Serialize};

use crate::analysis::{decoy_bounds, secret_key_rate, DecoyBounds, DecoyObservables, KeyRateReport, TomographyResult};
use crate::channel::{analytic_gain, analytic_qber, total_transmittance};
use crate::cli::config::{PairSettings, RunConfig};
use crate::multiplex::RateRow;
use crate::protocol::{DecoyStatistics, IntensityClass};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Per-class gain and QBER; `None` where the class has no counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub gain_u: Option<f64>,
    pub qber_u: Option<f64>,
    pub gain_v: Option<f64>,
    pub qber_v: Option<f64>,
    pub y0: Option<f64>,
}

impl ClassRates {
    pub fn measured(stats: &DecoyStatistics) -> Self {
        ClassRates {
            gain_u: stats.signal.gain(),
            qber_u: stats.signal.qber(),
            gain_v: stats.decoy.gain(),
            qber_v: stats.decoy.qber(),
            y0: stats.vacuum_yield(),
        }
    }

    /// Closed-form values from the channel parameters alone.
    pub fn expected(pair: &PairSettings) -> Self {
        let ch = &pair.channel;
        ClassRates {
            gain_u: Some(analytic_gain(pair.schedule.u, ch)),
            qber_u: analytic_qber(pair.schedule.u, ch).ok(),
            gain_v: Some(analytic_gain(pair.schedule.v, ch)),
            qber_v: analytic_qber(pair.schedule.v, ch).ok(),
            y0: Some(ch.vacuum_yield()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub core_pair: usize,
    pub transmittance: f64,
    pub statistics: DecoyStatistics,
    pub measured: ClassRates,
    pub expected: ClassRates,
    pub bounds: Option<DecoyBounds>,
    pub key_rate: Option<KeyRateReport>,
    pub analysis_error: Option<String>,
}

impl PairReport {
    pub fn build(core_pair: usize, pair: &PairSettings, stats: &DecoyStatistics, config: &RunConfig) -> Self {
        let analysis = DecoyObservables::from_statistics(stats).and_then(|obs| {
            let bounds = decoy_bounds(&obs, &pair.schedule)?;
            let rate = secret_key_rate(&obs, &pair.schedule, &bounds, config.analysis.f_ec, config.session.rep_rate_hz)?;
            Ok((bounds, rate))
        });
        let (bounds, key_rate, analysis_error) = match analysis {
            Ok((b, r)) => (Some(b), Some(r), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        PairReport {
            core_pair,
            transmittance: total_transmittance(&pair.channel),
            statistics: *stats,
            measured: ClassRates::measured(stats),
            expected: ClassRates::expected(pair),
            bounds,
            key_rate,
            analysis_error,
        }
    }

    /// True when no usable key-rate figure could be produced.
    pub fn analysis_failed(&self) -> bool {
        self.analysis_error.is_some() || self.bounds.is_some_and(|b| b.yield_vanishes())
    }
}

/// `report.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateDocument {
    pub format_version: u32,
    pub kind: String,
    /// `simulate` or `analyze`.
    pub source: String,
    pub config: RunConfig,
    pub pairs: Vec<PairReport>,
}

/// `tomography.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyDocument {
    pub format_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub pairs: Vec<TomographyResult>,
}

/// `compare.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareDocument {
    pub format_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub rows: Vec<RateRow>,
}

/// `manifest.json`, written next to CSV artifacts so they stay
/// self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: String,
    pub command: String,
    pub files: Vec<String>,
    pub config: RunConfig,
}

pub const STATISTICS_CSV_HEADER: [&str; 9] =
    ["pair", "class", "mu", "sent", "clicked", "sifted", "errors", "gain", "qber"];

pub const KEY_RATE_CSV_HEADER: [&str; 12] = [
    "pair",
    "gain",
    "qber",
    "y1_lower",
    "e1_upper",
    "q1_lower",
    "rate_per_pulse",
    "rate_per_second",
    "ab_information_rate_per_second",
    "attack_limit_ok",
    "no_key",
    "analysis_error",
];

pub const TIMESERIES_CSV_HEADER: [&str; 8] =
    ["pair", "block", "start_pulse", "start_s", "gain_u", "qber_u", "gain_v", "qber_v"];

pub const TOMOGRAPHY_CSV_HEADER: [&str; 10] = [
    "pair",
    "prepared",
    "p_A",
    "p_B",
    "p_A+B",
    "p_A-B",
    "n_A",
    "n_B",
    "n_A+B",
    "n_A-B",
];

pub const FIDELITY_CSV_HEADER: [&str; 4] = ["pair", "fidelity", "cross_basis_fidelity", "full_fidelity"];

pub(crate) fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn statistics_rows(p: &PairReport, pair: &PairSettings) -> Vec<Vec<String>> {
    [IntensityClass::Signal, IntensityClass::Decoy, IntensityClass::Vacuum]
        .iter()
        .map(|&class| {
            let c = p.statistics.class(class);
            vec![
                p.core_pair.to_string(),
                class.label().to_string(),
                pair.schedule.mean_photon_number(class).to_string(),
                c.sent.to_string(),
                c.clicked.to_string(),
                c.sifted.to_string(),
                c.errors.to_string(),
                opt(c.gain()),
                opt(c.qber()),
            ]
        })
        .collect()
}

pub(crate) fn key_rate_row(p: &PairReport) -> Vec<String> {
    let mut row = vec![p.core_pair.to_string()];
    match &p.key_rate {
        Some(k) => row.extend([
            k.gain.to_string(),
            k.qber.to_string(),
            k.y1_lower.to_string(),
            k.e1_upper.to_string(),
            k.q1_lower.to_string(),
            k.rate_per_pulse.to_string(),
            k.rate_per_second.to_string(),
            k.ab_information_rate_per_second.to_string(),
            k.attack_limit_ok.to_string(),
            k.no_key.to_string(),
            String::new(),
        ]),
        None => {
            row.extend(std::iter::repeat_n(String::new(), 10));
            row.push(p.analysis_error.clone().unwrap_or_default());
        }
    }
    row
}
