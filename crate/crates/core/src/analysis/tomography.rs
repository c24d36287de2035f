//! Prepare-and-measure tomography of the two mutually unbiased bases.
//!
//! Rows are the four prepared states `|A>, |B>, |A+B>, |A−B>`; columns are
//! the projectors in the same order. Each row holds two blocks, one per
//! measurement basis, and each block is normalized over its two outcomes.

use serde::{Deserialize, Serialize};

use crate::analysis::classical_fidelity;
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::protocol::{PairSetup, PulseEngine};
use crate::qstate::{measurement_probabilities, prepare_state, BasisId};

/// Prepared states in row/column order.
pub const TOMOGRAPHY_STATES: [(bool, BasisId); 4] = [
    (false, BasisId::X),
    (true, BasisId::X),
    (false, BasisId::Z),
    (true, BasisId::Z),
];

const STATE_LABELS: [&str; 4] = ["A", "B", "A+B", "A-B"];

/// Fewest detections accepted per (prepared state, measurement basis) cell.
pub const MIN_CELL_COUNTS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    /// Pulses sent for every (prepared state, measurement basis) cell.
    pub pulses_per_cell: u64,
    pub min_counts: u64,
    /// Seeds and signal intensity per core pair; `schedule.u` is used.
    pub pairs: Vec<PairSetup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyMatrix {
    pub entries: [[f64; 4]; 4],
    pub counts: [[u64; 4]; 4],
}

impl TomographyMatrix {
    /// Noiseless expectation: identity within a basis, 1/2 across bases.
    pub fn ideal() -> Self {
        let mut entries = [[0.0; 4]; 4];
        for (r, (bit, basis)) in TOMOGRAPHY_STATES.iter().enumerate() {
            let state = prepare_state(*bit, *basis);
            for b in 0..2 {
                let (p0, p1) = measurement_probabilities(&state, BasisId::ALL[b])
                    .expect("prepared states are normalized");
                entries[r][2 * b] = p0;
                entries[r][2 * b + 1] = p1;
            }
        }
        TomographyMatrix {
            entries,
            counts: [[0; 4]; 4],
        }
    }

    fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        let mut entries = [[0.0; 4]; 4];
        for r in 0..4 {
            for b in 0..2 {
                let total = counts[r][2 * b] + counts[r][2 * b + 1];
                if total > 0 {
                    entries[r][2 * b] = counts[r][2 * b] as f64 / total as f64;
                    entries[r][2 * b + 1] = counts[r][2 * b + 1] as f64 / total as f64;
                }
            }
        }
        TomographyMatrix { entries, counts }
    }

    fn block(&self, row: usize, basis: usize) -> [f64; 2] {
        [self.entries[row][2 * basis], self.entries[row][2 * basis + 1]]
    }

    fn block_fidelity(&self, row: usize, basis: usize) -> Result<f64> {
        classical_fidelity(&self.block(row, basis), &Self::ideal().block(row, basis))
    }

    fn mean_fidelity(&self, same_basis: bool) -> Result<f64> {
        let mut sum = 0.0;
        for (r, (_, prep)) in TOMOGRAPHY_STATES.iter().enumerate() {
            for (b, meas) in BasisId::ALL.iter().enumerate() {
                if (meas == prep) == same_basis {
                    sum += self.block_fidelity(r, b)?;
                }
            }
        }
        Ok(sum / 4.0)
    }

    /// Mean classical fidelity of the in-basis blocks against the ideal
    /// identity blocks.
    pub fn fidelity(&self) -> Result<f64> {
        self.mean_fidelity(true)
    }

    /// Mean classical fidelity of the cross-basis blocks against 1/2.
    pub fn cross_basis_fidelity(&self) -> Result<f64> {
        self.mean_fidelity(false)
    }

    /// Mean over all eight blocks.
    pub fn full_fidelity(&self) -> Result<f64> {
        Ok((self.fidelity()? + self.cross_basis_fidelity()?) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub core_pair: usize,
    pub matrix: TomographyMatrix,
    pub fidelity: f64,
    pub cross_basis_fidelity: f64,
    pub full_fidelity: f64,
}

/// Runs one dedicated session per (prepared state, measurement basis) cell,
/// with all core pairs firing the same state so inter-core crosstalk is
/// present, and bins the conditional outcome frequencies.
pub fn tomography(config: &TomographyConfig, channels: &[ChannelParams]) -> Result<Vec<TomographyResult>> {
    if config.pairs.is_empty() {
        return Err(Error::InvalidSession("at least one core pair is required".into()));
    }
    for p in &config.pairs {
        p.schedule.validate()?;
    }
    let seeds: Vec<u64> = config.pairs.iter().map(|p| p.rng_seed).collect();
    let mut engine = PulseEngine::new(channels, &seeds)?;
    let ties: Vec<_> = config.pairs.iter().map(PairSetup::tie_break).collect();
    let n_pairs = config.pairs.len();
    let mut counts = vec![[[0u64; 4]; 4]; n_pairs];
    let mut detections = Vec::with_capacity(n_pairs);
    let mut pulse_index = 0u64;

    for (r, (bit, prep)) in TOMOGRAPHY_STATES.iter().enumerate() {
        let state = prepare_state(*bit, *prep);
        for (b, meas) in BasisId::ALL.iter().enumerate() {
            let inputs: Vec<_> = config
                .pairs
                .iter()
                .map(|p| (state, *meas, p.schedule.u))
                .collect();
            for _ in 0..config.pulses_per_cell {
                engine.fire(&inputs, pulse_index, &mut detections)?;
                for (p, rec) in detections.iter().enumerate() {
                    let outcome = match (rec.clicked_0, rec.clicked_1) {
                        (false, false) => continue,
                        (true, false) => 0,
                        (false, true) => 1,
                        (true, true) => ties[p].bit(pulse_index) as usize,
                    };
                    counts[p][r][2 * b + outcome] += 1;
                }
                pulse_index += 1;
            }
        }
    }

    counts
        .into_iter()
        .enumerate()
        .map(|(p, c)| {
            for r in 0..4 {
                for (b, meas) in BasisId::ALL.iter().enumerate() {
                    let total = c[r][2 * b] + c[r][2 * b + 1];
                    if total < config.min_counts {
                        return Err(Error::InsufficientCounts {
                            cell: format!("pair {p}, state |{}>, basis {meas}", STATE_LABELS[r]),
                            count: total,
                            required: config.min_counts,
                        });
                    }
                }
            }
            let matrix = TomographyMatrix::from_counts(c);
            Ok(TomographyResult {
                core_pair: p,
                fidelity: matrix.fidelity()?,
                cross_basis_fidelity: matrix.cross_basis_fidelity()?,
                full_fidelity: matrix.full_fidelity()?,
                matrix,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::IntensitySchedule;

    fn config(pulses: u64, n_pairs: usize) -> TomographyConfig {
        TomographyConfig {
            pulses_per_cell: pulses,
            min_counts: MIN_CELL_COUNTS,
            pairs: (0..n_pairs)
                .map(|p| PairSetup {
                    prbs_seed: 1 + p as u32,
                    rng_seed: 40 + p as u64,
                    schedule: IntensitySchedule::with_signal(0.5),
                })
                .collect(),
        }
    }

    #[test]
    fn ideal_matrix_layout() {
        let m = TomographyMatrix::ideal();
        assert_eq!(m.entries[0], [1.0, 0.0, 0.5, 0.5]);
        assert_eq!(m.entries[1], [0.0, 1.0, 0.5, 0.5]);
        for r in 2..4 {
            assert!((m.entries[r][0] - 0.5).abs() < 1e-15 && (m.entries[r][1] - 0.5).abs() < 1e-15);
        }
        assert!((m.entries[2][2] - 1.0).abs() < 1e-15 && m.entries[2][3].abs() < 1e-15);
        assert!((m.fidelity().unwrap() - 1.0).abs() < 1e-12);
        assert!((m.full_fidelity().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_tomography_is_perfect_in_basis() {
        let out = tomography(&config(2_000, 2), &[ChannelParams::lossless(), ChannelParams::lossless()]).unwrap();
        for r in &out {
            assert!((r.fidelity - 1.0).abs() < 1e-12);
            assert!(r.cross_basis_fidelity > 0.99);
        }
    }

    #[test]
    fn fully_misaligned_channel_matches_closed_form() {
        // in-basis blocks become (1/2, 1/2): F = √(1/2 · 1) + √(1/2 · 0)
        let ch = ChannelParams {
            e_det: 0.5,
            ..ChannelParams::lossless()
        };
        let out = tomography(&config(20_000, 1), &[ch]).unwrap();
        let expected = (0.5f64).sqrt();
        assert!((out[0].fidelity - expected).abs() < 0.01, "{}", out[0].fidelity);
        assert!((out[0].full_fidelity - (expected + 1.0) / 2.0).abs() < 0.01);
    }

    #[test]
    fn sparse_cells_are_rejected() {
        let ch = ChannelParams::default();
        let err = tomography(&config(100, 1), &[ch]).unwrap_err();
        assert!(matches!(err, Error::InsufficientCounts { .. }));
    }
}
