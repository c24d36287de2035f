//! Information-theoretic post-processing.

mod decoy;
mod tomography;

use crate::error::{check_range, Error, Result};

pub use decoy::{
    decoy_bounds, secret_key_rate, DecoyBounds, DecoyObservables, KeyRateReport,
    COHERENT_ATTACK_LIMIT, DEFAULT_F_EC,
};
pub use tomography::{
    tomography, TomographyConfig, TomographyMatrix, TomographyResult, MIN_CELL_COUNTS,
    TOMOGRAPHY_STATES,
};

const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// `h₂(p) = -p log₂ p - (1-p) log₂(1-p)`, with `h₂(0) = h₂(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_range("p", p, (0.0..=1.0).contains(&p), "[0, 1]")?;
    Ok(entropy_term(p) + entropy_term(1.0 - p))
}

fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of a normalized distribution.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs.iter().copied().map(entropy_term).sum()
}

/// `I(X;Y) = H(X) - H(X|Y)` in bits for a 2×2 joint table `joint[x][y]`.
pub fn mutual_information(joint: &[[f64; 2]; 2]) -> Result<f64> {
    let flat = [joint[0][0], joint[0][1], joint[1][0], joint[1][1]];
    if flat.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(Error::OutOfRange {
            name: "joint".into(),
            value: flat.iter().copied().fold(f64::INFINITY, f64::min),
            expected: "nonnegative entries",
        });
    }
    let total: f64 = flat.iter().sum();
    check_range(
        "joint",
        total,
        (total - 1.0).abs() <= PROBABILITY_TOLERANCE,
        "entries sum to 1",
    )?;
    let px = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let py = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    // H(X|Y) = H(X,Y) - H(Y)
    let h_x_given_y = shannon_entropy(&flat) - shannon_entropy(&py);
    Ok((shannon_entropy(&px) - h_x_given_y).max(0.0))
}

/// Joint table of uniform bits sent through a binary symmetric channel.
pub fn bsc_joint(flip: f64) -> [[f64; 2]; 2] {
    [
        [(1.0 - flip) / 2.0, flip / 2.0],
        [flip / 2.0, (1.0 - flip) / 2.0],
    ]
}

/// Classical (Bhattacharyya) fidelity `Σ √(pᵢ qᵢ)`.
pub fn classical_fidelity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            alice: p.len(),
            bob: q.len(),
        });
    }
    for (name, v) in [("p", p), ("q", q)] {
        let total: f64 = v.iter().sum();
        let ok = v.iter().all(|x| *x >= 0.0) && (total - 1.0).abs() <= PROBABILITY_TOLERANCE;
        check_range(name, total, ok, "nonnegative entries summing to 1")?;
    }
    let f: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(f.min(1.0))
}
