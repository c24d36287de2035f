//! Decoy-state BB84 over parallel core pairs.
//!
//! Each core pair carries an independent key. Alice's bit, basis and
//! intensity choices come from a per-pair PRBS; Bob's basis choice and all
//! channel randomness come from a per-pair seeded RNG stream.

mod log;
mod prbs;
mod session;
mod sift;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qstate::BasisId;

pub use log::{read_pulse_log, PulseLog, PulseLogWriter, PULSE_LOG_FORMAT_VERSION, PULSE_LOG_KIND};
pub use prbs::{prbs31_next, prbs_next, Prbs};
pub use session::{run_session, run_session_with, PairOutcome, PairSetup, PulseEngine, SessionConfig};
pub use sift::{sift, sift_one, SiftedByClass, TieBreak};

/// Intensity class of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntensityClass {
    #[serde(rename = "u")]
    Signal,
    #[serde(rename = "v")]
    Decoy,
    #[serde(rename = "vac")]
    Vacuum,
}

impl IntensityClass {
    pub const ALL: [IntensityClass; 3] = [
        IntensityClass::Signal,
        IntensityClass::Decoy,
        IntensityClass::Vacuum,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IntensityClass::Signal => "u",
            IntensityClass::Decoy => "v",
            IntensityClass::Vacuum => "vac",
        }
    }
}

impl fmt::Display for IntensityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Two-user intensity pattern, one row per key, as listed for the
/// two-decoy-level example.
pub const TWO_KEY_PATTERN: [[IntensityClass; 9]; 2] = {
    use IntensityClass::{Decoy as V, Signal as U, Vacuum as O};
    [[U, U, O, V, U, O, O, V, V], [U, O, U, U, V, O, V, O, V]]
};

/// Mean photon numbers and selection probabilities of the three classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitySchedule {
    pub u: f64,
    pub v: f64,
    pub p_u: f64,
    pub p_v: f64,
    pub p_vac: f64,
}

impl IntensitySchedule {
    /// Default probabilities `(0.7, 0.2, 0.1)` and `v = u/2`.
    pub fn with_signal(u: f64) -> Self {
        IntensitySchedule {
            u,
            v: u / 2.0,
            p_u: 0.7,
            p_v: 0.2,
            p_vac: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("u", self.u, self.u > 0.0 && self.u.is_finite(), "> 0")?;
        check_range("v", self.v, self.v >= 0.0 && self.v < self.u, "[0, u)")?;
        for (name, p) in [("p_u", self.p_u), ("p_v", self.p_v), ("p_vac", self.p_vac)] {
            check_range(name, p, (0.0..=1.0).contains(&p), "[0, 1]")?;
        }
        let total = self.p_u + self.p_v + self.p_vac;
        check_range("p_u + p_v + p_vac", total, (total - 1.0).abs() <= 1e-12, "sum to 1")
    }

    pub fn mean_photon_number(&self, class: IntensityClass) -> f64 {
        match class {
            IntensityClass::Signal => self.u,
            IntensityClass::Decoy => self.v,
            IntensityClass::Vacuum => 0.0,
        }
    }

    /// Maps a uniform draw in `[0, 1)` onto a class.
    pub fn class_for(&self, x: f64) -> IntensityClass {
        if x < self.p_u {
            IntensityClass::Signal
        } else if x < self.p_u + self.p_v {
            IntensityClass::Decoy
        } else {
            IntensityClass::Vacuum
        }
    }
}

/// Transmitter-side record of one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub pulse_index: u64,
    pub core_pair: usize,
    pub bit: bool,
    pub basis: BasisId,
    pub class: IntensityClass,
}

/// Counters for one intensity class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub sent: u64,
    pub clicked: u64,
    pub sifted: u64,
    pub errors: u64,
}

impl ClassCounts {
    pub fn gain(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.clicked as f64 / self.sent as f64)
    }

    pub fn qber(&self) -> Option<f64> {
        (self.sifted > 0).then(|| self.errors as f64 / self.sifted as f64)
    }

    pub fn merge(&mut self, other: &ClassCounts) {
        self.sent += other.sent;
        self.clicked += other.clicked;
        self.sifted += other.sifted;
        self.errors += other.errors;
    }
}

/// Per-intensity gains and error counts of one core pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyStatistics {
    pub signal: ClassCounts,
    pub decoy: ClassCounts,
    pub vacuum: ClassCounts,
}

impl DecoyStatistics {
    pub fn class(&self, class: IntensityClass) -> &ClassCounts {
        match class {
            IntensityClass::Signal => &self.signal,
            IntensityClass::Decoy => &self.decoy,
            IntensityClass::Vacuum => &self.vacuum,
        }
    }

    pub fn class_mut(&mut self, class: IntensityClass) -> &mut ClassCounts {
        match class {
            IntensityClass::Signal => &mut self.signal,
            IntensityClass::Decoy => &mut self.decoy,
            IntensityClass::Vacuum => &mut self.vacuum,
        }
    }

    /// Accounts one pulse. `sifted` holds Alice's and Bob's bits when the
    /// pulse survived sifting.
    pub fn record(&mut self, alice: &PulseRecord, clicked: bool, sifted: Option<(bool, bool)>) {
        let c = self.class_mut(alice.class);
        c.sent += 1;
        if clicked {
            c.clicked += 1;
        }
        if let Some((a, b)) = sifted {
            c.sifted += 1;
            if a != b {
                c.errors += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &DecoyStatistics) {
        self.signal.merge(&other.signal);
        self.decoy.merge(&other.decoy);
        self.vacuum.merge(&other.vacuum);
    }

    pub fn total_sent(&self) -> u64 {
        self.signal.sent + self.decoy.sent + self.vacuum.sent
    }

    /// `Y₀`, estimated from the vacuum-class gain.
    pub fn vacuum_yield(&self) -> Option<f64> {
        self.vacuum.gain()
    }

    pub fn validate(&self) -> Result<()> {
        for class in IntensityClass::ALL {
            let c = self.class(class);
            if !(c.errors <= c.sifted && c.sifted <= c.clicked && c.clicked <= c.sent) {
                return Err(Error::Statistics(format!(
                    "class {class}: need errors <= sifted <= clicked <= sent, got {c:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Sifted bits of one core pair and one intensity class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedBatch {
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    pub pulse_indices: Vec<u64>,
}

impl SiftedBatch {
    pub fn push(&mut self, pulse_index: u64, alice: bool, bob: bool) {
        self.alice_bits.push(alice);
        self.bob_bits.push(bob);
        self.pulse_indices.push(pulse_index);
    }

    pub fn len(&self) -> usize {
        self.alice_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice_bits.is_empty()
    }

    pub fn errors(&self) -> usize {
        self.alice_bits
            .iter()
            .zip(&self.bob_bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Fraction of mismatched bits in a sifted batch.
pub fn estimate_qber(batch: &SiftedBatch) -> Result<f64> {
    if batch.alice_bits.len() != batch.bob_bits.len() {
        return Err(Error::LengthMismatch {
            alice: batch.alice_bits.len(),
            bob: batch.bob_bits.len(),
        });
    }
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(batch.errors() as f64 / batch.len() as f64)
}

/// Pearson correlation of two bit strings mapped to ±1, over their common
/// prefix. Returns 0 for empty or constant input.
pub fn cross_correlation(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let sign = |x: bool| if x { 1.0 } else { -1.0 };
    let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a[..n].iter().zip(&b[..n]) {
        let (x, y) = (sign(x), sign(y));
        sa += x;
        sb += y;
        sab += x * y;
    }
    let nf = n as f64;
    let (ma, mb) = (sa / nf, sb / nf);
    let cov = sab / nf - ma * mb;
    let var = (1.0 - ma * ma) * (1.0 - mb * mb);
    if var <= 0.0 {
        0.0
    } else {
        cov / var.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_defaults_and_validation() {
        let s = IntensitySchedule::with_signal(0.5);
        assert_eq!(s.v, 0.25);
        s.validate().unwrap();
        assert!(IntensitySchedule { v: 0.5, ..s }.validate().is_err());
        assert!(IntensitySchedule { p_u: 0.8, ..s }.validate().is_err());
        assert_eq!(s.class_for(0.0), IntensityClass::Signal);
        assert_eq!(s.class_for(0.75), IntensityClass::Decoy);
        assert_eq!(s.class_for(0.95), IntensityClass::Vacuum);
    }

    #[test]
    fn two_key_pattern_uses_all_classes_per_key() {
        for row in TWO_KEY_PATTERN {
            for class in IntensityClass::ALL {
                assert!(row.contains(&class));
            }
        }
        // every combination of the two keys' classes appears exactly once
        let mut combos: Vec<_> = (0..9).map(|i| (TWO_KEY_PATTERN[0][i], TWO_KEY_PATTERN[1][i])).collect();
        combos.sort();
        combos.dedup();
        assert_eq!(combos.len(), 9);
    }

    #[test]
    fn qber_of_identical_and_complementary_batches() {
        let mut same = SiftedBatch::default();
        let mut flipped = SiftedBatch::default();
        for i in 0..100u64 {
            let bit = i % 3 == 0;
            same.push(i, bit, bit);
            flipped.push(i, bit, !bit);
        }
        assert_eq!(estimate_qber(&same).unwrap(), 0.0);
        assert_eq!(estimate_qber(&flipped).unwrap(), 1.0);
        assert_eq!(estimate_qber(&SiftedBatch::default()), Err(Error::EmptyBatch));
    }

    #[test]
    fn statistics_invariants_are_checked() {
        let mut s = DecoyStatistics::default();
        s.signal = ClassCounts {
            sent: 10,
            clicked: 5,
            sifted: 3,
            errors: 1,
        };
        s.validate().unwrap();
        s.decoy.errors = 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn correlation_extremes() {
        let a: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let not_a: Vec<bool> = a.iter().map(|b| !b).collect();
        assert!((cross_correlation(&a, &a) - 1.0).abs() < 1e-12);
        assert!((cross_correlation(&a, &not_a) + 1.0).abs() < 1e-12);
        assert_eq!(cross_correlation(&[], &a), 0.0);
    }
}
