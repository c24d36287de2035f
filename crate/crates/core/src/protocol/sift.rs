use serde::{Deserialize, Serialize};

use crate::channel::DetectionRecord;
use crate::error::{Error, Result};
use crate::protocol::{IntensityClass, PulseRecord, SiftedBatch};

/// Keyed hash that resolves double clicks to a uniformly random bit.
///
/// The bit depends only on the key and the pulse index, so re-sifting a
/// logged session reproduces the original assignment exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieBreak {
    pub key: u64,
}

impl TieBreak {
    pub fn new(key: u64) -> Self {
        TieBreak { key }
    }

    pub fn bit(&self, pulse_index: u64) -> bool {
        splitmix64(self.key ^ pulse_index.wrapping_mul(0x9E37_79B9_7F4A_7C15)) >> 63 == 1
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sifts a single pulse. Returns `(alice_bit, bob_bit)` when bases match and
/// at least one detector fired.
pub fn sift_one(alice: &PulseRecord, bob: &DetectionRecord, tie: &TieBreak) -> Option<(bool, bool)> {
    if alice.basis != bob.basis || !bob.any_click() {
        return None;
    }
    let bob_bit = match (bob.clicked_0, bob.clicked_1) {
        (true, false) => false,
        (false, true) => true,
        _ => tie.bit(bob.pulse_index),
    };
    Some((alice.bit, bob_bit))
}

/// Sifted material of one core pair, split by intensity class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedByClass {
    pub signal: SiftedBatch,
    pub decoy: SiftedBatch,
    pub vacuum: SiftedBatch,
}

impl SiftedByClass {
    pub fn class(&self, class: IntensityClass) -> &SiftedBatch {
        match class {
            IntensityClass::Signal => &self.signal,
            IntensityClass::Decoy => &self.decoy,
            IntensityClass::Vacuum => &self.vacuum,
        }
    }

    pub fn class_mut(&mut self, class: IntensityClass) -> &mut SiftedBatch {
        match class {
            IntensityClass::Signal => &mut self.signal,
            IntensityClass::Decoy => &mut self.decoy,
            IntensityClass::Vacuum => &mut self.vacuum,
        }
    }

    pub fn total_len(&self) -> usize {
        self.signal.len() + self.decoy.len() + self.vacuum.len()
    }
}

/// Discards basis-mismatched and click-less pulses and partitions the rest
/// by intensity class.
pub fn sift(alice: &[PulseRecord], bob: &[DetectionRecord], tie: &TieBreak) -> Result<SiftedByClass> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch {
            alice: alice.len(),
            bob: bob.len(),
        });
    }
    let mut out = SiftedByClass::default();
    for (a, b) in alice.iter().zip(bob) {
        if a.pulse_index != b.pulse_index {
            return Err(Error::InvalidSession(format!(
                "records not index-aligned: transmitter pulse {} vs receiver pulse {}",
                a.pulse_index, b.pulse_index
            )));
        }
        if let Some((x, y)) = sift_one(a, b, tie) {
            out.class_mut(a.class).push(a.pulse_index, x, y);
        }
    }
    Ok(out)
}
