//! Vacuum + weak-decoy single-photon bounds and the decoy-state key rate.

use serde::{Deserialize, Serialize};

use crate::analysis::{binary_entropy, bsc_joint, mutual_information};
use crate::channel::VACUUM_ERROR_RATE;
use crate::error::{check_range, Error, Result};
use crate::protocol::{DecoyStatistics, IntensitySchedule};

/// Error-correction inefficiency `f(E)` used when none is configured.
pub const DEFAULT_F_EC: f64 = 1.22;

/// QBER ceiling for one-way post-processing under coherent attacks.
pub const COHERENT_ATTACK_LIMIT: f64 = 0.11;

/// Measured quantities entering the decoy bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyObservables {
    pub q_u: f64,
    pub e_u: f64,
    pub q_v: f64,
    pub e_v: f64,
    pub y0: f64,
}

impl DecoyObservables {
    pub fn from_statistics(stats: &DecoyStatistics) -> Result<Self> {
        stats.validate()?;
        Ok(DecoyObservables {
            q_u: stats.signal.gain().ok_or(Error::MissingStatistic("no signal pulses sent"))?,
            e_u: stats.signal.qber().ok_or(Error::MissingStatistic("no sifted signal pulses"))?,
            q_v: stats.decoy.gain().ok_or(Error::MissingStatistic("no decoy pulses sent"))?,
            e_v: stats.decoy.qber().ok_or(Error::MissingStatistic("no sifted decoy pulses"))?,
            y0: stats.vacuum_yield().ok_or(Error::MissingStatistic("no vacuum pulses sent"))?,
        })
    }
}

/// Lower bound on the single-photon yield and upper bound on its error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y1_lower: f64,
    pub e1_upper: f64,
    /// Unclamped yield bound.
    pub y1_raw: f64,
    pub y1_clamped: bool,
    pub e1_clamped: bool,
}

impl DecoyBounds {
    /// The yield bound carries no information (raw value ≤ 0).
    pub fn yield_vanishes(&self) -> bool {
        self.y1_lower <= 0.0
    }
}

/// Vacuum + weak-decoy bounds:
///
/// ```text
/// Y₁ ≥ u/(uv − v²) · (Q_v e^v − Q_u e^u v²/u² − (u² − v²)/u² · Y₀)
/// e₁ ≤ (E_v Q_v e^v − e₀ Y₀) / (Y₁ v)
/// ```
///
/// Out-of-range values are clamped (`Y₁ ∈ [0, 1]`, `e₁ ∈ [0, 0.5]`) and
/// flagged rather than rejected.
pub fn decoy_bounds(obs: &DecoyObservables, schedule: &IntensitySchedule) -> Result<DecoyBounds> {
    let (u, v) = (schedule.u, schedule.v);
    if !(v > 0.0 && u > v && (u - v) > 1e-9 * u) {
        return Err(Error::DegenerateSchedule { u, v });
    }
    for (name, x) in [("Q_u", obs.q_u), ("Q_v", obs.q_v), ("Y0", obs.y0)] {
        check_range(name, x, (0.0..=1.0).contains(&x), "[0, 1]")?;
    }
    for (name, x) in [("E_u", obs.e_u), ("E_v", obs.e_v)] {
        check_range(name, x, (0.0..=1.0).contains(&x), "[0, 1]")?;
    }

    let decoy_term = obs.q_v * v.exp();
    let numerator = decoy_term
        - obs.q_u * u.exp() * (v * v) / (u * u)
        - (u * u - v * v) / (u * u) * obs.y0;
    let y1_raw = u / (u * v - v * v) * numerator;

    // cancellation residue counts as zero
    if numerator <= 1e-12 * decoy_term.max(f64::MIN_POSITIVE) {
        return Ok(DecoyBounds {
            y1_lower: 0.0,
            e1_upper: 0.5,
            y1_raw,
            y1_clamped: true,
            e1_clamped: true,
        });
    }
    let (y1_lower, y1_clamped) = if y1_raw > 1.0 { (1.0, true) } else { (y1_raw, false) };

    let e1_raw = (obs.e_v * decoy_term - VACUUM_ERROR_RATE * obs.y0) / (y1_lower * v);
    let (e1_upper, e1_clamped) = if e1_raw < 0.0 {
        (0.0, true)
    } else if e1_raw > 0.5 {
        (0.5, true)
    } else {
        (e1_raw, false)
    };
    Ok(DecoyBounds {
        y1_lower,
        e1_upper,
        y1_raw,
        y1_clamped,
        e1_clamped,
    })
}

/// Key-rate summary of one core pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    /// `Q_u`
    pub gain: f64,
    /// `E_u`
    pub qber: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
    /// `Q₁ = Y₁ u e^{-u}`
    pub q1_lower: f64,
    /// `R_sk` per pulse, possibly negative.
    pub rate_per_pulse: f64,
    /// `R_sk · rep_rate`, possibly negative.
    pub raw_rate_per_second: f64,
    /// Extractable key rate: `max(R_sk, 0) · rep_rate`.
    pub rate_per_second: f64,
    /// Set when `R_sk ≤ 0`.
    pub no_key: bool,
    /// `E_u < 0.11`
    pub attack_limit_ok: bool,
    pub y1_clamped: bool,
    pub e1_clamped: bool,
    pub q1_clamped: bool,
    pub f_ec: f64,
    pub rep_rate_hz: f64,
    /// Diagnostic `Q_u · I(A;B) · rep_rate` with `I(A;B) = 1 - h₂(E_u)`,
    /// i.e. the Alice–Bob information rate before any eavesdropper term.
    pub ab_information_rate_per_second: f64,
}

/// `R_sk ≥ ½ { −Q_u f(E_u) h₂(E_u) + Q₁ [1 − h₂(e₁)] }`
pub fn secret_key_rate(
    obs: &DecoyObservables,
    schedule: &IntensitySchedule,
    bounds: &DecoyBounds,
    f_ec: f64,
    rep_rate_hz: f64,
) -> Result<KeyRateReport> {
    check_range("f_ec", f_ec, f_ec >= 1.0 && f_ec.is_finite(), ">= 1")?;
    check_range("rep_rate_hz", rep_rate_hz, rep_rate_hz > 0.0 && rep_rate_hz.is_finite(), "> 0")?;
    let u = schedule.u;
    let q1_raw = bounds.y1_lower * u * (-u).exp();
    let (q1_lower, q1_clamped) = if q1_raw > obs.q_u { (obs.q_u, true) } else { (q1_raw, false) };

    let h_eu = binary_entropy(obs.e_u)?;
    let rate = 0.5 * (-obs.q_u * f_ec * h_eu + q1_lower * (1.0 - binary_entropy(bounds.e1_upper)?));
    let info = mutual_information(&bsc_joint(obs.e_u))?;

    Ok(KeyRateReport {
        gain: obs.q_u,
        qber: obs.e_u,
        y1_lower: bounds.y1_lower,
        e1_upper: bounds.e1_upper,
        q1_lower,
        rate_per_pulse: rate,
        raw_rate_per_second: rate * rep_rate_hz,
        rate_per_second: rate.max(0.0) * rep_rate_hz,
        no_key: rate <= 0.0,
        attack_limit_ok: obs.e_u < COHERENT_ATTACK_LIMIT,
        y1_clamped: bounds.y1_clamped,
        e1_clamped: bounds.e1_clamped,
        q1_clamped,
        f_ec,
        rep_rate_hz,
        ab_information_rate_per_second: obs.q_u * info * rep_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{analytic_gain, analytic_qber, ChannelParams};

    /// Exact observables of the standard yield model, `Y_n = 1 − (1 − Y₀)(1 − η)ⁿ`.
    fn synthetic(eta: f64, u: f64, v: f64, pd: f64, e_det: f64) -> (DecoyObservables, f64, f64) {
        let ch = ChannelParams {
            det_efficiency: eta,
            dark_count_prob: pd,
            e_det,
            ..ChannelParams::lossless()
        };
        let y0 = ch.vacuum_yield();
        let obs = DecoyObservables {
            q_u: analytic_gain(u, &ch),
            e_u: analytic_qber(u, &ch).unwrap(),
            q_v: analytic_gain(v, &ch),
            e_v: analytic_qber(v, &ch).unwrap(),
            y0,
        };
        let y1 = y0 + eta - y0 * eta;
        let e1 = (VACUUM_ERROR_RATE * y0 + e_det * eta) / y1;
        (obs, y1, e1)
    }

    fn schedule(u: f64, v: f64) -> IntensitySchedule {
        IntensitySchedule {
            u,
            v,
            ..IntensitySchedule::with_signal(u)
        }
    }

    #[test]
    fn yield_model_reproduces_analytic_gain() {
        // Σ Y_n Poisson(n; μ) summed directly
        let (eta, mu, pd): (f64, f64, f64) = (0.07, 0.6, 1e-4);
        let ch = ChannelParams {
            det_efficiency: eta,
            dark_count_prob: pd,
            ..ChannelParams::lossless()
        };
        let y0 = ch.vacuum_yield();
        let mut q = 0.0;
        let mut pn = (-mu).exp();
        for n in 0..60 {
            q += (1.0 - (1.0 - y0) * (1.0 - eta).powi(n)) * pn;
            pn *= mu / (n + 1) as f64;
        }
        assert!((q - analytic_gain(mu, &ch)).abs() < 1e-14);
    }

    #[test]
    fn single_photon_bound_is_tight_for_weak_decoy() {
        for eta in [1e-3, 1e-2, 5e-2, 0.1] {
            let (obs, y1, _) = synthetic(eta, 0.5, 0.1, 0.0, 0.01);
            let b = decoy_bounds(&obs, &schedule(0.5, 0.1)).unwrap();
            assert!(b.y1_lower <= y1);
            assert!((y1 - b.y1_lower) / y1 < 0.05, "eta {eta}: {} vs {y1}", b.y1_lower);
        }
    }

    #[test]
    fn zero_numerator_clamps_to_zero_yield() {
        let (u, v) = (0.5, 0.25);
        let (mut obs, _, _) = synthetic(0.05, u, v, 0.0, 0.02);
        obs.y0 = (obs.q_v * f64::exp(v) - obs.q_u * f64::exp(u) * v * v / (u * u)) * u * u / (u * u - v * v);
        let b = decoy_bounds(&obs, &schedule(u, v)).unwrap();
        assert_eq!(b.y1_lower, 0.0);
        assert!(b.y1_clamped && b.yield_vanishes());
    }

    #[test]
    fn published_gains_give_positive_yield() {
        let obs = DecoyObservables {
            q_u: 3.32e-2,
            e_u: 0.059,
            q_v: 1.8e-2,
            e_v: 0.059,
            y0: 4e-8,
        };
        let b = decoy_bounds(&obs, &schedule(0.5, 0.25)).unwrap();
        assert!(b.y1_lower.is_finite() && b.y1_lower > 0.0);
        assert!(!b.y1_clamped);
    }

    #[test]
    fn degenerate_schedules_are_rejected() {
        let (obs, _, _) = synthetic(0.05, 0.5, 0.25, 0.0, 0.0);
        assert!(matches!(
            decoy_bounds(&obs, &schedule(0.5, 0.5)),
            Err(Error::DegenerateSchedule { .. })
        ));
        assert!(decoy_bounds(&obs, &schedule(0.5, 0.0)).is_err());
    }

    #[test]
    fn noiseless_rate_is_half_the_gain() {
        let obs = DecoyObservables {
            q_u: 0.04,
            e_u: 0.0,
            q_v: 0.02,
            e_v: 0.0,
            y0: 0.0,
        };
        let s = schedule(0.5, 0.25);
        let bounds = DecoyBounds {
            y1_lower: obs.q_u / (0.5 * f64::exp(-0.5)),
            e1_upper: 0.0,
            y1_raw: 0.0,
            y1_clamped: false,
            e1_clamped: false,
        };
        let r = secret_key_rate(&obs, &s, &bounds, DEFAULT_F_EC, 5000.0).unwrap();
        assert!((r.q1_lower - obs.q_u).abs() < 1e-15);
        assert!((r.rate_per_pulse - obs.q_u / 2.0).abs() < 1e-15);
        assert!((r.rate_per_second - 100.0).abs() < 1e-9);
        assert!(!r.no_key && r.attack_limit_ok);
    }

    #[test]
    fn maximal_single_photon_error_yields_no_key() {
        let obs = DecoyObservables {
            q_u: 0.03,
            e_u: 0.05,
            q_v: 0.015,
            e_v: 0.05,
            y0: 0.0,
        };
        let bounds = DecoyBounds {
            y1_lower: 0.05,
            e1_upper: 0.5,
            y1_raw: 0.05,
            y1_clamped: false,
            e1_clamped: false,
        };
        let r = secret_key_rate(&obs, &schedule(0.5, 0.25), &bounds, DEFAULT_F_EC, 5000.0).unwrap();
        assert!(r.rate_per_pulse < 0.0);
        assert!(r.no_key);
        assert_eq!(r.rate_per_second, 0.0);
        assert!(r.raw_rate_per_second < 0.0);
        assert!(secret_key_rate(&obs, &schedule(0.5, 0.25), &bounds, 0.9, 5000.0).is_err());
    }

    #[test]
    fn attack_limit_predicate() {
        let s = schedule(0.5, 0.25);
        for (e, ok) in [(0.10999, true), (0.11, false), (0.2, false), (0.0, true)] {
            let obs = DecoyObservables {
                q_u: 0.03,
                e_u: e,
                q_v: 0.015,
                e_v: e,
                y0: 1e-6,
            };
            let b = decoy_bounds(&obs, &s).unwrap();
            assert_eq!(secret_key_rate(&obs, &s, &b, DEFAULT_F_EC, 1.0).unwrap().attack_limit_ok, ok);
        }
    }

    #[test]
    fn rate_is_non_increasing_in_error_rates() {
        let (obs, _, _) = synthetic(0.1, 0.5, 0.1, 1e-6, 0.01);
        let s = schedule(0.5, 0.1);
        let base = decoy_bounds(&obs, &s).unwrap();
        let rate = |e_u: f64, e1: f64| {
            let o = DecoyObservables { e_u, ..obs };
            let b = DecoyBounds { e1_upper: e1, ..base };
            secret_key_rate(&o, &s, &b, DEFAULT_F_EC, 1.0).unwrap().rate_per_pulse
        };
        for i in 0..50 {
            let e = i as f64 / 100.0;
            let e_next = (i + 1) as f64 / 100.0;
            assert!(rate(e_next, 0.05) <= rate(e, 0.05));
            assert!(rate(0.05, e_next) <= rate(0.05, e));
        }
    }

    #[test]
    fn missing_classes_are_reported() {
        let stats = DecoyStatistics::default();
        assert!(matches!(
            DecoyObservables::from_statistics(&stats),
            Err(Error::MissingStatistic(_))
        ));
    }
}
