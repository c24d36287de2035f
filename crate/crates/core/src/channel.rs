//! Photon-level link model.
//!
//! A weak coherent pulse of mean photon number `μ` carries `n ~ Poisson(μ)`
//! photons. Each photon independently survives the transmitter chip, the
//! fiber, the receiver chip and the detector with probability
//! [`total_transmittance`]. A surviving photon leaks into the neighbouring core
//! pair with the crosstalk probability; otherwise it is routed to detector 0
//! or 1 according to the Born rule of the (possibly misaligned) state. Each
//! detector also fires on its own with the dark-count probability.
//!
//! Misalignment (`e_det`) is applied per pulse: with probability `e_det` the
//! mode reaching Bob is orthogonalised, so every photon of that pulse lands on
//! the opposing detector. This keeps the Monte Carlo model identical to the
//! analytic [`analytic_gain`]/[`analytic_qber`] pair.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qstate::{measurement_probabilities, BasisId, CorePairState};

/// Error rate of vacuum-induced clicks; dark counts are uncorrelated with the
/// transmitted bit.
pub const VACUUM_ERROR_RATE: f64 = 0.5;

/// Loss, noise and detector figures of one core-pair link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Transmitter chip insertion and coupling loss, dB.
    pub alice_loss_db: f64,
    /// Fiber attenuation, dB/km.
    pub fiber_alpha_db_per_km: f64,
    pub fiber_length_km: f64,
    /// Receiver chip insertion loss, dB.
    pub bob_loss_db: f64,
    /// Power coupled into the neighbouring core pair, dB (≤ 0). `None`
    /// disables crosstalk.
    pub crosstalk_db: Option<f64>,
    /// Detector efficiency `η_d`.
    pub det_efficiency: f64,
    /// Dark-count probability per detector and gate.
    pub dark_count_prob: f64,
    /// Intrinsic optical misalignment error.
    pub e_det: f64,
}

impl Default for ChannelParams {
    /// The chip-to-chip link: 15 dB transmitter loss, 8 dB receiver loss,
    /// −30 dB crosstalk, 0.37 dB/km fiber, `η_d = 0.1`, `p_d = 2e-8`.
    fn default() -> Self {
        ChannelParams {
            alice_loss_db: 15.0,
            fiber_alpha_db_per_km: 0.37,
            fiber_length_km: 0.0,
            bob_loss_db: 8.0,
            crosstalk_db: Some(-30.0),
            det_efficiency: 0.1,
            dark_count_prob: 2e-8,
            e_det: 0.0,
        }
    }
}

impl ChannelParams {
    /// Unit transmittance, no noise, no crosstalk.
    pub fn lossless() -> Self {
        ChannelParams {
            alice_loss_db: 0.0,
            fiber_alpha_db_per_km: 0.0,
            fiber_length_km: 0.0,
            bob_loss_db: 0.0,
            crosstalk_db: None,
            det_efficiency: 1.0,
            dark_count_prob: 0.0,
            e_det: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| check_range(name, v, v >= 0.0 && v.is_finite(), ">= 0");
        nonneg("alice_loss_db", self.alice_loss_db)?;
        nonneg("fiber_alpha_db_per_km", self.fiber_alpha_db_per_km)?;
        nonneg("fiber_length_km", self.fiber_length_km)?;
        nonneg("bob_loss_db", self.bob_loss_db)?;
        if let Some(x) = self.crosstalk_db {
            check_range("crosstalk_db", x, x <= 0.0, "<= 0 dB, or -inf to disable")?;
        }
        let eff = self.det_efficiency;
        check_range("det_efficiency", eff, eff > 0.0 && eff <= 1.0, "(0, 1]")?;
        let pd = self.dark_count_prob;
        check_range("dark_count_prob", pd, (0.0..1.0).contains(&pd), "[0, 1)")?;
        check_range("e_det", self.e_det, (0.0..=0.5).contains(&self.e_det), "[0, 0.5]")?;
        Ok(())
    }

    /// Per-photon leakage probability into the neighbouring core pair.
    pub fn crosstalk_probability(&self) -> f64 {
        match self.crosstalk_db {
            Some(db) if db.is_finite() => 10f64.powf(db / 10.0),
            _ => 0.0,
        }
    }

    /// `Y₀`: probability that at least one of the two detectors dark-fires.
    pub fn vacuum_yield(&self) -> f64 {
        1.0 - (1.0 - self.dark_count_prob).powi(2)
    }
}

/// End-to-end single-photon detection probability.
pub fn total_transmittance(params: &ChannelParams) -> f64 {
    let loss_db = params.alice_loss_db
        + params.fiber_alpha_db_per_km * params.fiber_length_km
        + params.bob_loss_db;
    10f64.powf(-loss_db / 10.0) * params.det_efficiency
}

/// Expected gain `Q_μ` of pulses with mean photon number `mu`.
pub fn analytic_gain(mu: f64, params: &ChannelParams) -> f64 {
    let y0 = params.vacuum_yield();
    let signal = 1.0 - (-total_transmittance(params) * mu).exp();
    y0 + signal - y0 * signal
}

/// Expected QBER `E_μ` of pulses with mean photon number `mu`.
pub fn analytic_qber(mu: f64, params: &ChannelParams) -> Result<f64> {
    let q = analytic_gain(mu, params);
    if q <= 0.0 {
        return Err(Error::ZeroGain);
    }
    let signal = 1.0 - (-total_transmittance(params) * mu).exp();
    Ok((VACUUM_ERROR_RATE * params.vacuum_yield() + params.e_det * signal) / q)
}

/// Returns `params` with `det_efficiency` solved so that
/// `analytic_gain(mu) == target_gain`.
pub fn calibrate_det_efficiency(
    params: &ChannelParams,
    mu: f64,
    target_gain: f64,
) -> Result<ChannelParams> {
    check_range("mu", mu, mu > 0.0 && mu.is_finite(), "> 0")?;
    let y0 = params.vacuum_yield();
    check_range(
        "target_gain",
        target_gain,
        target_gain > y0 && target_gain < 1.0,
        "(Y0, 1)",
    )?;
    // 1 - Q = (1 - Y0) exp(-η μ)
    let eta_total = -((1.0 - target_gain) / (1.0 - y0)).ln() / mu;
    let mut out = params.clone();
    out.det_efficiency = 1.0;
    out.det_efficiency = eta_total / total_transmittance(&out);
    out.validate()?;
    Ok(out)
}

/// Receiver outcome of one pulse on one core pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub clicked_0: bool,
    pub clicked_1: bool,
    pub basis: BasisId,
    pub pulse_index: u64,
}

impl DetectionRecord {
    pub fn any_click(&self) -> bool {
        self.clicked_0 || self.clicked_1
    }

    pub fn double_click(&self) -> bool {
        self.clicked_0 && self.clicked_1
    }
}

/// Result of [`transmit_pulse`]: the local detections plus the number of
/// photons that leaked toward another core pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub record: DetectionRecord,
    pub leaked_photons: u32,
}

/// Precomputed per-photon probabilities for a [`ChannelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    transmittance: f64,
    crosstalk: f64,
    dark_count: f64,
    e_det: f64,
}

impl Link {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        Ok(Link {
            transmittance: total_transmittance(params),
            crosstalk: params.crosstalk_probability(),
            dark_count: params.dark_count_prob,
            e_det: params.e_det,
        })
    }

    pub fn transmittance(&self) -> f64 {
        self.transmittance
    }

    pub fn transmit<R: Rng + ?Sized>(
        &self,
        state: &CorePairState,
        basis: BasisId,
        mu: f64,
        pulse_index: u64,
        rng: &mut R,
    ) -> Result<Transmission> {
        check_range("mu", mu, mu >= 0.0 && mu.is_finite(), ">= 0")?;
        let (mut p0, _) = measurement_probabilities(state, basis)?;
        let photons = if mu > 0.0 {
            let dist = Poisson::new(mu).map_err(|_| Error::OutOfRange {
                name: "mu".into(),
                value: mu,
                expected: "valid Poisson mean",
            })?;
            dist.sample(rng) as u64
        } else {
            0
        };

        let mut record = DetectionRecord {
            clicked_0: false,
            clicked_1: false,
            basis,
            pulse_index,
        };
        let mut leaked = 0u32;
        let mut flip_drawn = false;
        for _ in 0..photons {
            if rng.random::<f64>() >= self.transmittance {
                continue;
            }
            if self.crosstalk > 0.0 && rng.random::<f64>() < self.crosstalk {
                leaked += 1;
                continue;
            }
            if !flip_drawn {
                flip_drawn = true;
                if self.e_det > 0.0 && rng.random::<f64>() < self.e_det {
                    p0 = 1.0 - p0;
                }
            }
            if rng.random::<f64>() < p0 {
                record.clicked_0 = true;
            } else {
                record.clicked_1 = true;
            }
        }
        if self.dark_count > 0.0 {
            if rng.random::<f64>() < self.dark_count {
                record.clicked_0 = true;
            }
            if rng.random::<f64>() < self.dark_count {
                record.clicked_1 = true;
            }
        }
        Ok(Transmission {
            record,
            leaked_photons: leaked,
        })
    }
}

/// Sends one weak coherent pulse prepared in `state` through the link and
/// measures it in `basis`.
pub fn transmit_pulse<R: Rng + ?Sized>(
    state: &CorePairState,
    basis: BasisId,
    mu: f64,
    params: &ChannelParams,
    pulse_index: u64,
    rng: &mut R,
) -> Result<Transmission> {
    Link::new(params)?.transmit(state, basis, mu, pulse_index, rng)
}

/// Registers a leaked photon on a uniformly chosen detector of `record`.
pub fn deliver_leaked_photon<R: Rng + ?Sized>(record: &mut DetectionRecord, rng: &mut R) {
    if rng.random::<bool>() {
        record.clicked_1 = true;
    } else {
        record.clicked_0 = true;
    }
}
