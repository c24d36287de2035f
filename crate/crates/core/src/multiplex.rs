//! Closed-form rate comparison of ways to share one link between several
//! keys.
//!
//! | scheme | rate                                     |
//! |--------|------------------------------------------|
//! | HD     | `log₂N · (1 − e^{−η})`                   |
//! | SDM    | `N/2 · (1 − e^{−η})`                     |
//! | WDM    | `N · (1 − e^{−η})`                       |
//! | TDM    | `N · (1 − e^{−η/N})`                     |
//! | CDMA   | `[(1 − w²)/N_c]^{N−1} · (1 − e^{−η/N})`  |
//!
//! `η` is the fiber transmittance `10^{−αl/10}` multiplied by the receiver
//! loss and the detector efficiency.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::binary_entropy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "SDM")]
    Sdm,
    #[serde(rename = "HD")]
    Hd,
    #[serde(rename = "WDM")]
    Wdm,
    #[serde(rename = "TDM")]
    Tdm,
    #[serde(rename = "CDMA")]
    Cdma,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Sdm, Scheme::Hd, Scheme::Wdm, Scheme::Tdm, Scheme::Cdma];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Sdm => "SDM",
            Scheme::Hd => "HD",
            Scheme::Wdm => "WDM",
            Scheme::Tdm => "TDM",
            Scheme::Cdma => "CDMA",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Link figures used by the closed-form rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub alpha_db_per_km: f64,
    pub length_km: f64,
    pub receiver_loss_db: f64,
    pub det_efficiency: f64,
    /// Only used by [`NoiseMode::NoiseFloor`].
    pub dark_count_prob: f64,
}

impl Default for LinkParams {
    /// 50 km at 0.37 dB/km, 8 dB receiver loss, `η_d = 0.1`, `p_d = 2e-8`.
    fn default() -> Self {
        LinkParams {
            alpha_db_per_km: 0.37,
            length_km: 50.0,
            receiver_loss_db: 8.0,
            det_efficiency: 0.1,
            dark_count_prob: 2e-8,
        }
    }
}

impl LinkParams {
    pub fn transmittance(&self) -> f64 {
        eta_from_distance(self.alpha_db_per_km, self.length_km)
            * 10f64.powf(-self.receiver_loss_db / 10.0)
            * self.det_efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub scheme: Scheme,
    /// Cores, dimensions, wavelengths or users.
    pub n: u32,
    pub cdma_weight: Option<f64>,
    pub cdma_code_length: Option<u32>,
    pub link: LinkParams,
}

impl SchemeParams {
    pub fn new(scheme: Scheme, n: u32, link: LinkParams) -> Self {
        SchemeParams {
            scheme,
            n,
            cdma_weight: None,
            cdma_code_length: None,
            link,
        }
    }

    pub fn cdma(n: u32, weight: f64, code_length: u32, link: LinkParams) -> Self {
        SchemeParams {
            scheme: Scheme::Cdma,
            n,
            cdma_weight: Some(weight),
            cdma_code_length: Some(code_length),
            link,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidScheme(format!("{}: N = {} < 2", self.scheme, self.n)));
        }
        if self.scheme == Scheme::Sdm && !self.n.is_multiple_of(2) {
            return Err(Error::InvalidScheme(format!("SDM needs an even core count, got {}", self.n)));
        }
        if self.scheme == Scheme::Cdma {
            let w = self.cdma_weight.ok_or(Error::MissingCdmaParameter("cdma_weight"))?;
            let nc = self
                .cdma_code_length
                .ok_or(Error::MissingCdmaParameter("cdma_code_length"))?;
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidScheme(format!("CDMA weight {w} outside (0, 1]")));
            }
            if nc < self.n {
                return Err(Error::InvalidScheme(format!(
                    "CDMA code length {nc} shorter than user count {}",
                    self.n
                )));
            }
        }
        let l = &self.link;
        if !(l.alpha_db_per_km >= 0.0 && l.length_km >= 0.0 && l.receiver_loss_db >= 0.0) {
            return Err(Error::InvalidScheme("link losses must be nonnegative".into()));
        }
        if !(l.det_efficiency > 0.0 && l.det_efficiency <= 1.0) {
            return Err(Error::InvalidScheme("det_efficiency outside (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&l.dark_count_prob) {
            return Err(Error::InvalidScheme("dark_count_prob outside [0, 1)".into()));
        }
        Ok(())
    }
}

/// How dark counts enter the closed-form rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Bare formulas.
    #[default]
    Ideal,
    /// Approximate intrinsic-noise curves: each channel's click probability
    /// `g` is reduced by `Q·h₂(E)`, with `Q = Y₀ + (1 − Y₀)g`,
    /// `E = Y₀/(2Q)` and `Y₀ = 1 − (1 − p_d)²`.
    NoiseFloor,
}

/// `10^{−α·l/10}`
pub fn eta_from_distance(alpha_db_per_km: f64, length_km: f64) -> f64 {
    10f64.powf(-alpha_db_per_km * length_km / 10.0)
}

pub fn scheme_rate(p: &SchemeParams) -> Result<f64> {
    scheme_rate_with(p, NoiseMode::Ideal)
}

pub fn scheme_rate_with(p: &SchemeParams, mode: NoiseMode) -> Result<f64> {
    p.validate()?;
    let eta = p.link.transmittance();
    let n = p.n as f64;
    let (multiplier, per_channel_eta) = match p.scheme {
        Scheme::Hd => (n.log2(), eta),
        Scheme::Sdm => (n / 2.0, eta),
        Scheme::Wdm => (n, eta),
        Scheme::Tdm => (n, eta / n),
        Scheme::Cdma => {
            let w = p.cdma_weight.expect("validated");
            let nc = p.cdma_code_length.expect("validated") as f64;
            (((1.0 - w * w) / nc).powf(n - 1.0), eta / n)
        }
    };
    let g = -(-per_channel_eta).exp_m1();
    let per_channel = match mode {
        NoiseMode::Ideal => g,
        NoiseMode::NoiseFloor => {
            let y0 = 1.0 - (1.0 - p.link.dark_count_prob).powi(2);
            let q = y0 + (1.0 - y0) * g;
            if q > 0.0 {
                (g - q * binary_entropy(y0 / (2.0 * q))?).max(0.0)
            } else {
                0.0
            }
        }
    };
    Ok(multiplier * per_channel)
}

/// What a comparison sweeps over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Replace `n` of every scheme with each value.
    Channels(Vec<u32>),
    /// Replace the link length with each value (km).
    Length(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub scheme: Scheme,
    pub n: u32,
    pub length_km: f64,
    pub eta: f64,
    pub mode: NoiseMode,
    /// `None` when the parameters were invalid for this row.
    pub rate: Option<f64>,
    pub error: Option<String>,
}

impl RateRow {
    /// Value of the CSV `scheme` column; noise-floor rows carry a `+noise`
    /// suffix so the mode survives the fixed header.
    pub fn scheme_label(&self) -> String {
        match self.mode {
            NoiseMode::Ideal => self.scheme.label().to_string(),
            NoiseMode::NoiseFloor => format!("{}+noise", self.scheme.label()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

pub const RATE_TABLE_HEADER: [&str; 5] = ["scheme", "N", "length_km", "eta", "rate"];

impl RateTable {
    pub fn rows_for(&self, scheme: Scheme) -> impl Iterator<Item = &RateRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    /// CSV with header `scheme,N,length_km,eta,rate`; rows whose parameters
    /// were invalid have an empty `rate`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RATE_TABLE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scheme_label(),
                r.n.to_string(),
                r.length_km.to_string(),
                r.eta.to_string(),
                r.rate.map(|x| x.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates every scheme at every sweep point, in scheme-major order.
/// Invalid rows are kept with their error instead of aborting the sweep.
pub fn compare_sweep(schemes: &[SchemeParams], sweep: &SweepAxis, mode: NoiseMode) -> Result<RateTable> {
    if schemes.is_empty() {
        return Err(Error::InvalidScheme("no schemes to compare".into()));
    }
    let points: Vec<SchemeParams> = match sweep {
        SweepAxis::Channels(ns) if !ns.is_empty() => schemes
            .iter()
            .flat_map(|s| ns.iter().map(move |&n| SchemeParams { n, ..*s }))
            .collect(),
        SweepAxis::Length(ls) if !ls.is_empty() => schemes
            .iter()
            .flat_map(|s| {
                ls.iter().map(move |&l| SchemeParams {
                    link: LinkParams { length_km: l, ..s.link },
                    ..*s
                })
            })
            .collect(),
        _ => return Err(Error::InvalidScheme("empty sweep".into())),
    };
    let rows = points
        .into_iter()
        .map(|p| {
            let (rate, error) = match scheme_rate_with(&p, mode) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            RateRow {
                scheme: p.scheme,
                n: p.n,
                length_km: p.link.length_km,
                eta: p.link.transmittance(),
                mode,
                rate,
                error,
            }
        })
        .collect();
    Ok(RateTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_link() -> LinkParams {
        LinkParams {
            alpha_db_per_km: 0.0,
            length_km: 0.0,
            receiver_loss_db: 0.0,
            det_efficiency: 1.0,
            dark_count_prob: 0.0,
        }
    }

    fn link_with_eta(eta: f64) -> LinkParams {
        LinkParams {
            det_efficiency: eta,
            ..unit_link()
        }
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_from_distance(0.37, 0.0), 1.0);
        assert!((eta_from_distance(0.37, 50.0) - 1.413e-2).abs() / 1.413e-2 < 1e-3);
        assert!((eta_from_distance(0.2, 100.0) - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn single_sdm_key_on_unit_link() {
        let r = scheme_rate(&SchemeParams::new(Scheme::Sdm, 2, unit_link())).unwrap();
        assert!((r - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((r - 0.632).abs() < 1e-3);
    }

    #[test]
    fn sdm_and_hd_coincide_at_four() {
        for eta in [1e-4, 0.01, 0.3, 1.0] {
            let sdm = scheme_rate(&SchemeParams::new(Scheme::Sdm, 4, link_with_eta(eta))).unwrap();
            let hd = scheme_rate(&SchemeParams::new(Scheme::Hd, 4, link_with_eta(eta))).unwrap();
            assert!((sdm / hd - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tdm_below_wdm_on_grid() {
        for n in 2..=32 {
            for k in 1..100 {
                let link = link_with_eta(k as f64 / 100.0);
                let tdm = scheme_rate(&SchemeParams::new(Scheme::Tdm, n, link)).unwrap();
                let wdm = scheme_rate(&SchemeParams::new(Scheme::Wdm, n, link)).unwrap();
                assert!(tdm < wdm);
            }
        }
    }

    #[test]
    fn ordering_and_linearity() {
        for k in 1..50 {
            let link = link_with_eta(k as f64 / 50.0);
            for n in (4..=32).step_by(2) {
                let rate = |s| scheme_rate(&SchemeParams::new(s, n, link)).unwrap();
                let (wdm, sdm, hd) = (rate(Scheme::Wdm), rate(Scheme::Sdm), rate(Scheme::Hd));
                assert!(wdm >= sdm && sdm >= hd - 1e-15);
                let doubled = scheme_rate(&SchemeParams::new(Scheme::Sdm, 2 * n, link)).unwrap();
                assert!((doubled - 2.0 * sdm).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rates_vanish_with_distance() {
        for s in Scheme::ALL {
            let mut p = SchemeParams::cdma(4, 0.1, 8, LinkParams::default());
            p.scheme = s;
            let mut last = f64::INFINITY;
            for l in [0.0, 50.0, 200.0, 1000.0, 5000.0] {
                p.link.length_km = l;
                let r = scheme_rate(&p).unwrap();
                assert!(r >= 0.0 && r <= last);
                last = r;
            }
            assert!(last < 1e-100);
        }
    }

    #[test]
    fn cdma_requires_parameters_and_vanishes_at_full_weight() {
        let missing = SchemeParams::new(Scheme::Cdma, 4, unit_link());
        assert_eq!(scheme_rate(&missing), Err(Error::MissingCdmaParameter("cdma_weight")));
        let mut last = f64::INFINITY;
        for w in [0.5, 0.9, 0.99, 0.999, 0.999_999] {
            let r = scheme_rate(&SchemeParams::cdma(4, w, 4, unit_link())).unwrap();
            assert!(r < last);
            last = r;
        }
        assert!(last < 1e-18);
        assert_eq!(scheme_rate(&SchemeParams::cdma(4, 1.0, 4, unit_link())).unwrap(), 0.0);
        assert!(scheme_rate(&SchemeParams::cdma(4, 1.01, 4, unit_link())).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(scheme_rate(&SchemeParams::new(Scheme::Sdm, 3, unit_link())).is_err());
        assert!(scheme_rate(&SchemeParams::new(Scheme::Hd, 1, unit_link())).is_err());
        assert!(scheme_rate(&SchemeParams::cdma(8, 0.5, 4, unit_link())).is_err());
    }

    #[test]
    fn noise_floor_lowers_rates() {
        let link = LinkParams {
            dark_count_prob: 1e-5,
            ..LinkParams::default()
        };
        for s in [Scheme::Sdm, Scheme::Hd, Scheme::Wdm, Scheme::Tdm] {
            let p = SchemeParams::new(s, 4, link);
            let ideal = scheme_rate_with(&p, NoiseMode::Ideal).unwrap();
            let noisy = scheme_rate_with(&p, NoiseMode::NoiseFloor).unwrap();
            assert!(noisy < ideal && noisy >= 0.0);
        }
        // zero dark counts: the penalty disappears
        let p = SchemeParams::new(Scheme::Sdm, 4, LinkParams { dark_count_prob: 0.0, ..link });
        assert_eq!(
            scheme_rate_with(&p, NoiseMode::Ideal).unwrap(),
            scheme_rate_with(&p, NoiseMode::NoiseFloor).unwrap()
        );
    }

    #[test]
    fn sweep_keeps_invalid_rows() {
        let schemes = [SchemeParams::new(Scheme::Sdm, 2, unit_link())];
        let table = compare_sweep(&schemes, &SweepAxis::Channels(vec![2, 3, 4]), NoiseMode::Ideal).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows[1].rate.is_none() && table.rows[1].error.is_some());
        assert!(table.rows[2].rate.is_some());

        let one = compare_sweep(&schemes, &SweepAxis::Channels(vec![2]), NoiseMode::Ideal).unwrap();
        assert_eq!(one.rows[0].rate.unwrap(), scheme_rate(&schemes[0]).unwrap());

        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scheme,N,length_km,eta,rate\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(compare_sweep(&[], &SweepAxis::Channels(vec![2]), NoiseMode::Ideal).is_err());
    }
}
