//! Configuration file parsing.
//!
//! The file is TOML with one table per module. Unknown keys are rejected,
//! physical parameters are range-checked, and every key that was not given
//! explicitly is listed in `defaults_applied` of the resolved [`RunConfig`].
//!
//! ```toml
//! seed = 7
//!
//! [session]
//! n_pulses = 1000000
//!
//! [schedule]
//! mu = 0.5
//!
//! [[pair]]          # optional per-pair overrides
//! e_det = 0.059
//! target_gain = 3.32e-2
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{TomographyConfig, DEFAULT_F_EC, MIN_CELL_COUNTS};
use crate::channel::{calibrate_det_efficiency, ChannelParams};
use crate::error::Error;
use crate::multiplex::{LinkParams, NoiseMode, Scheme, SchemeParams, SweepAxis};
use crate::protocol::{IntensitySchedule, PairSetup, SessionConfig};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    /// Offending key, dotted (`channel.dark_count_prob`, `pair[1].e_det`).
    pub key: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl ConfigError {
    fn key(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            message: message.into(),
            key: Some(key.into()),
            line: None,
            column: None,
        }
    }

    fn from_error(prefix: &str, e: Error) -> Self {
        match e {
            Error::OutOfRange { name, value, expected } => {
                let key = format!("{prefix}{name}");
                ConfigError::key(key.clone(), format!("`{key}` = {value} is out of range ({expected})"))
            }
            other => ConfigError {
                message: other.to_string(),
                key: None,
                line: None,
                column: None,
            },
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

// ---- raw file layout ------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    session: Option<RawSession>,
    schedule: Option<RawSchedule>,
    channel: Option<RawChannel>,
    analysis: Option<RawAnalysis>,
    output: Option<RawOutput>,
    tomography: Option<RawTomography>,
    analyze: Option<RawAnalyze>,
    compare: Option<RawCompare>,
    #[serde(default)]
    pair: Vec<RawPair>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSession {
    n_pulses: Option<u64>,
    rep_rate_hz: Option<f64>,
    basis_prob_x: Option<f64>,
    bob_basis_prob_x: Option<f64>,
    n_core_pairs: Option<usize>,
    block_pulses: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    mu: Option<f64>,
    v: Option<f64>,
    p_u: Option<f64>,
    p_v: Option<f64>,
    p_vac: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    alice_loss_db: Option<f64>,
    fiber_alpha_db_per_km: Option<f64>,
    fiber_length_km: Option<f64>,
    bob_loss_db: Option<f64>,
    crosstalk_db: Option<f64>,
    det_efficiency: Option<f64>,
    dark_count_prob: Option<f64>,
    e_det: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    f_ec: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    format: Option<OutputFormat>,
    pulse_log: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTomography {
    pulses_per_cell: Option<u64>,
    min_counts: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalyze {
    pulse_log: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    schemes: Option<Vec<Scheme>>,
    n_values: Option<Vec<u32>>,
    lengths_km: Option<Vec<f64>>,
    n: Option<u32>,
    alpha_db_per_km: Option<f64>,
    length_km: Option<f64>,
    receiver_loss_db: Option<f64>,
    det_efficiency: Option<f64>,
    dark_count_prob: Option<f64>,
    cdma_weight: Option<f64>,
    cdma_code_length: Option<u32>,
    noise_floor: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    mu: Option<f64>,
    v: Option<f64>,
    e_det: Option<f64>,
    det_efficiency: Option<f64>,
    crosstalk_db: Option<f64>,
    target_gain: Option<f64>,
    prbs_seed: Option<u32>,
    rng_seed: Option<u64>,
}

// ---- resolved configuration ------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub n_pulses: u64,
    pub rep_rate_hz: f64,
    pub basis_prob_x: f64,
    pub bob_basis_prob_x: f64,
    pub block_pulses: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub f_ec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSettings {
    pub prbs_seed: u32,
    pub rng_seed: u64,
    pub schedule: IntensitySchedule,
    pub channel: ChannelParams,
    /// Gain the detector efficiency was solved for, if any.
    pub target_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub format: Option<OutputFormat>,
    pub pulse_log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographySettings {
    pub pulses_per_cell: u64,
    pub min_counts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSettings {
    pub pulse_log: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSettings {
    pub schemes: Vec<Scheme>,
    pub sweep: SweepAxis,
    /// `N` used when sweeping over length.
    pub n: u32,
    pub link: LinkParams,
    pub cdma_weight: f64,
    pub cdma_code_length: u32,
    pub noise_mode: NoiseMode,
}

impl CompareSettings {
    pub fn scheme_params(&self) -> Vec<SchemeParams> {
        self.schemes
            .iter()
            .map(|&scheme| {
                let mut p = SchemeParams::new(scheme, self.n, self.link);
                if scheme == Scheme::Cdma {
                    p.cdma_weight = Some(self.cdma_weight);
                    p.cdma_code_length = Some(self.cdma_code_length);
                }
                p
            })
            .collect()
    }
}

/// Fully resolved configuration, echoed into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub seed: u64,
    pub session: SessionSettings,
    pub analysis: AnalysisSettings,
    pub pairs: Vec<PairSettings>,
    pub output: OutputSettings,
    pub tomography: TomographySettings,
    pub analyze: AnalyzeSettings,
    pub compare: CompareSettings,
    pub defaults_applied: Vec<String>,
}

impl RunConfig {
    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            n_pulses: self.session.n_pulses,
            rep_rate_hz: self.session.rep_rate_hz,
            basis_prob_x: self.session.basis_prob_x,
            bob_basis_prob_x: self.session.bob_basis_prob_x,
            pairs: self.pair_setups(),
            block_pulses: self.session.block_pulses,
        }
    }

    pub fn pair_setups(&self) -> Vec<PairSetup> {
        self.pairs
            .iter()
            .map(|p| PairSetup {
                prbs_seed: p.prbs_seed,
                rng_seed: p.rng_seed,
                schedule: p.schedule,
            })
            .collect()
    }

    pub fn channels(&self) -> Vec<ChannelParams> {
        self.pairs.iter().map(|p| p.channel.clone()).collect()
    }

    pub fn tomography_config(&self) -> TomographyConfig {
        TomographyConfig {
            pulses_per_cell: self.tomography.pulses_per_cell,
            min_counts: self.tomography.min_counts,
            pairs: self.pair_setups(),
        }
    }
}

/// Derives `(prbs_seed, rng_seed)` of core pair `index` from the master seed.
pub fn derive_pair_seeds(master: u64, index: usize) -> (u32, u64) {
    let h1 = splitmix(master ^ (2 * index as u64 + 1).wrapping_mul(0xA24B_AED4_963E_E407));
    let h2 = splitmix(master ^ (2 * index as u64 + 2).wrapping_mul(0x9FB2_1C65_1E98_DF25));
    let prbs = (h1 as u32) & 0x7FFF_FFFF;
    (if prbs == 0 { 1 } else { prbs }, h2)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

struct Defaults(Vec<String>);

impl Defaults {
    fn take<T>(&mut self, key: &str, value: Option<T>, default: T) -> T {
        value.unwrap_or_else(|| {
            self.0.push(key.to_string());
            default
        })
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_seed(text, None)
}

/// Parses `text`; `seed_override` replaces the file's master seed.
pub fn parse_config_with_seed(text: &str, seed_override: Option<u64>) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = line_col(text, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        ConfigError {
            message: e.message().trim().to_string(),
            key: None,
            line,
            column,
        }
    })?;
    resolve(raw, seed_override)
}

fn resolve(raw: RawConfig, seed_override: Option<u64>) -> Result<RunConfig, ConfigError> {
    let mut d = Defaults(Vec::new());
    let seed = match seed_override {
        Some(s) => s,
        None => d.take("seed", raw.seed, 0),
    };

    let rs = raw.session.unwrap_or_default();
    let basis_prob_x = d.take("session.basis_prob_x", rs.basis_prob_x, 0.5);
    let session = SessionSettings {
        n_pulses: d.take("session.n_pulses", rs.n_pulses, 100_000),
        rep_rate_hz: d.take("session.rep_rate_hz", rs.rep_rate_hz, 5000.0),
        basis_prob_x,
        bob_basis_prob_x: d.take("session.bob_basis_prob_x", rs.bob_basis_prob_x, basis_prob_x),
        block_pulses: rs.block_pulses,
    };
    check(&session.rep_rate_hz, |x| *x > 0.0 && x.is_finite(), "session.rep_rate_hz", "> 0")?;
    check(&session.basis_prob_x, |x| *x > 0.0 && *x < 1.0, "session.basis_prob_x", "(0, 1)")?;
    check(&session.bob_basis_prob_x, |x| *x > 0.0 && *x < 1.0, "session.bob_basis_prob_x", "(0, 1)")?;
    if session.block_pulses == Some(0) {
        return Err(ConfigError::key("session.block_pulses", "`session.block_pulses` must be positive"));
    }

    let n_pairs = match (rs.n_core_pairs, raw.pair.len()) {
        (Some(n), k) if k > 0 && n != k => {
            return Err(ConfigError::key(
                "session.n_core_pairs",
                format!("`session.n_core_pairs` = {n} but {k} [[pair]] tables are given"),
            ))
        }
        (Some(0), _) => {
            return Err(ConfigError::key("session.n_core_pairs", "`session.n_core_pairs` must be at least 1"))
        }
        (Some(n), _) => n,
        (None, 0) => d.take("session.n_core_pairs", None, 1),
        (None, k) => k,
    };

    let sched = raw.schedule.unwrap_or_default();
    let mu = d.take("schedule.mu", sched.mu, 0.5);
    let v_shared = sched.v;
    let p_u = d.take("schedule.p_u", sched.p_u, 0.7);
    let p_v = d.take("schedule.p_v", sched.p_v, 0.2);
    let p_vac = d.take("schedule.p_vac", sched.p_vac, 0.1);

    let rc = raw.channel.unwrap_or_default();
    let base = ChannelParams::default();
    let shared = ChannelParams {
        alice_loss_db: d.take("channel.alice_loss_db", rc.alice_loss_db, base.alice_loss_db),
        fiber_alpha_db_per_km: d.take("channel.fiber_alpha_db_per_km", rc.fiber_alpha_db_per_km, base.fiber_alpha_db_per_km),
        fiber_length_km: d.take("channel.fiber_length_km", rc.fiber_length_km, base.fiber_length_km),
        bob_loss_db: d.take("channel.bob_loss_db", rc.bob_loss_db, base.bob_loss_db),
        crosstalk_db: match rc.crosstalk_db {
            Some(x) if x == f64::NEG_INFINITY => None,
            Some(x) => Some(x),
            None => {
                d.0.push("channel.crosstalk_db".into());
                base.crosstalk_db
            }
        },
        det_efficiency: d.take("channel.det_efficiency", rc.det_efficiency, base.det_efficiency),
        dark_count_prob: d.take("channel.dark_count_prob", rc.dark_count_prob, base.dark_count_prob),
        e_det: d.take("channel.e_det", rc.e_det, base.e_det),
    };
    shared.validate().map_err(|e| ConfigError::from_error("channel.", e))?;

    let empty = RawPair::default();
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let rp = raw.pair.get(i).unwrap_or(&empty);
        let prefix = format!("pair[{i}].");
        let src_v = rp.v.is_some() || v_shared.is_some();
        let u = rp.mu.unwrap_or(mu);
        let v = rp.v.or(v_shared).unwrap_or(u / 2.0);
        if !src_v {
            d.0.push(if raw.pair.is_empty() { "schedule.v".to_string() } else { format!("{prefix}v") });
        }
        let schedule = IntensitySchedule { u, v, p_u, p_v, p_vac };
        schedule.validate().map_err(|e| {
            let prefix = match e {
                Error::OutOfRange { ref name, .. } if name == "u" || name == "v" => prefix.clone(),
                _ => "schedule.".to_string(),
            };
            ConfigError::from_error(&prefix, e)
        })?;

        let mut channel = shared.clone();
        if let Some(x) = rp.e_det {
            channel.e_det = x;
        }
        if let Some(x) = rp.det_efficiency {
            channel.det_efficiency = x;
        }
        if let Some(x) = rp.crosstalk_db {
            channel.crosstalk_db = (x != f64::NEG_INFINITY).then_some(x);
        }
        channel.validate().map_err(|e| ConfigError::from_error(&prefix, e))?;
        if let Some(target) = rp.target_gain {
            if rp.det_efficiency.is_some() {
                return Err(ConfigError::key(
                    format!("{prefix}target_gain"),
                    format!("`{prefix}target_gain` and `{prefix}det_efficiency` are mutually exclusive"),
                ));
            }
            channel = calibrate_det_efficiency(&channel, u, target).map_err(|e| {
                ConfigError::key(
                    format!("{prefix}target_gain"),
                    format!("cannot calibrate `{prefix}target_gain` = {target}: {e}"),
                )
            })?;
        }

        let (prbs_derived, rng_derived) = derive_pair_seeds(seed, i);
        let prbs_seed = rp.prbs_seed.unwrap_or(prbs_derived);
        if prbs_seed & 0x7FFF_FFFF == 0 {
            return Err(ConfigError::key(format!("{prefix}prbs_seed"), "PRBS seed must be nonzero in its low 31 bits"));
        }
        pairs.push(PairSettings {
            prbs_seed,
            rng_seed: rp.rng_seed.unwrap_or(rng_derived),
            schedule,
            channel,
            target_gain: rp.target_gain,
        });
    }
    for i in 0..pairs.len() {
        for j in 0..i {
            if pairs[i].prbs_seed & 0x7FFF_FFFF == pairs[j].prbs_seed & 0x7FFF_FFFF {
                return Err(ConfigError::key(
                    format!("pair[{i}].prbs_seed"),
                    format!("core pairs {j} and {i} share a PRBS seed"),
                ));
            }
        }
    }

    let ra = raw.analysis.unwrap_or_default();
    let analysis = AnalysisSettings {
        f_ec: d.take("analysis.f_ec", ra.f_ec, DEFAULT_F_EC),
    };
    check(&analysis.f_ec, |x| *x >= 1.0 && x.is_finite(), "analysis.f_ec", ">= 1")?;

    let ro = raw.output.unwrap_or_default();
    let output = OutputSettings {
        format: ro.format,
        pulse_log: d.take("output.pulse_log", ro.pulse_log, false),
    };

    let rt = raw.tomography.unwrap_or_default();
    let tomography = TomographySettings {
        pulses_per_cell: d.take("tomography.pulses_per_cell", rt.pulses_per_cell, 100_000),
        min_counts: d.take("tomography.min_counts", rt.min_counts, MIN_CELL_COUNTS),
    };

    let analyze = AnalyzeSettings {
        pulse_log: raw.analyze.unwrap_or_default().pulse_log,
    };

    let compare = resolve_compare(raw.compare.unwrap_or_default(), &mut d)?;

    Ok(RunConfig {
        format_version: CONFIG_FORMAT_VERSION,
        seed,
        session,
        analysis,
        pairs,
        output,
        tomography,
        analyze,
        compare,
        defaults_applied: d.0,
    })
}

fn resolve_compare(rc: RawCompare, d: &mut Defaults) -> Result<CompareSettings, ConfigError> {
    let base = LinkParams::default();
    let link = LinkParams {
        alpha_db_per_km: d.take("compare.alpha_db_per_km", rc.alpha_db_per_km, base.alpha_db_per_km),
        length_km: d.take("compare.length_km", rc.length_km, base.length_km),
        receiver_loss_db: d.take("compare.receiver_loss_db", rc.receiver_loss_db, base.receiver_loss_db),
        det_efficiency: d.take("compare.det_efficiency", rc.det_efficiency, base.det_efficiency),
        dark_count_prob: d.take("compare.dark_count_prob", rc.dark_count_prob, base.dark_count_prob),
    };
    check(&link.alpha_db_per_km, |x| *x >= 0.0, "compare.alpha_db_per_km", ">= 0")?;
    check(&link.length_km, |x| *x >= 0.0, "compare.length_km", ">= 0")?;
    check(&link.receiver_loss_db, |x| *x >= 0.0, "compare.receiver_loss_db", ">= 0")?;
    check(&link.det_efficiency, |x| *x > 0.0 && *x <= 1.0, "compare.det_efficiency", "(0, 1]")?;
    check(&link.dark_count_prob, |x| (0.0..1.0).contains(x), "compare.dark_count_prob", "[0, 1)")?;

    let sweep = match (rc.n_values, rc.lengths_km) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::key(
                "compare.lengths_km",
                "`compare.n_values` and `compare.lengths_km` are mutually exclusive",
            ))
        }
        (Some(ns), None) => SweepAxis::Channels(ns),
        (None, Some(ls)) => SweepAxis::Length(ls),
        (None, None) => {
            d.0.push("compare.n_values".into());
            SweepAxis::Channels((1..=8).map(|k| 2 * k).collect())
        }
    };
    match &sweep {
        SweepAxis::Channels(ns) if ns.is_empty() => {
            return Err(ConfigError::key("compare.n_values", "`compare.n_values` is empty"))
        }
        SweepAxis::Length(ls) if ls.is_empty() || ls.iter().any(|l| l.is_nan() || *l < 0.0) => {
            return Err(ConfigError::key("compare.lengths_km", "`compare.lengths_km` must be nonempty and >= 0"))
        }
        _ => {}
    }
    let schemes = d.take("compare.schemes", rc.schemes, Scheme::ALL.to_vec());
    if schemes.is_empty() {
        return Err(ConfigError::key("compare.schemes", "`compare.schemes` is empty"));
    }
    let max_n = match &sweep {
        SweepAxis::Channels(ns) => ns.iter().copied().max().unwrap_or(2),
        SweepAxis::Length(_) => rc.n.unwrap_or(4),
    };
    let cdma_weight = d.take("compare.cdma_weight", rc.cdma_weight, 0.1);
    check(&cdma_weight, |w| *w > 0.0 && *w <= 1.0, "compare.cdma_weight", "(0, 1]")?;
    Ok(CompareSettings {
        schemes,
        n: d.take("compare.n", rc.n, 4),
        link,
        cdma_weight,
        cdma_code_length: d.take("compare.cdma_code_length", rc.cdma_code_length, max_n),
        noise_mode: if d.take("compare.noise_floor", rc.noise_floor, false) {
            NoiseMode::NoiseFloor
        } else {
            NoiseMode::Ideal
        },
        sweep,
    })
}

fn check(value: &f64, ok: impl Fn(&f64) -> bool, key: &str, expected: &str) -> Result<(), ConfigError> {
    if !value.is_nan() && ok(value) {
        Ok(())
    } else {
        Err(ConfigError::key(key, format!("`{key}` = {value} is out of range ({expected})")))
    }
}
