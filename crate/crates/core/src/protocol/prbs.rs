//! Maximal-length LFSR pseudorandom binary sequences.
//!
//! The register shifts left; the feedback bit is the XOR of the two tap
//! positions and is also the output bit. Taps are 1-indexed from the least
//! significant end, i.e. `x³¹ + x²⁸ + 1` reads bits 31 and 28.

use crate::error::{Error, Result};

/// Fibonacci LFSR with a two-tap trinomial feedback polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Prbs {
    state: u32,
    degree: u32,
    tap: u32,
}

impl Prbs {
    /// PRBS-31, `x³¹ + x²⁸ + 1`.
    pub fn prbs31(seed: u32) -> Result<Self> {
        Self::with_polynomial(31, 28, seed)
    }

    /// PRBS-7, `x⁷ + x⁶ + 1`.
    pub fn prbs7(seed: u32) -> Result<Self> {
        Self::with_polynomial(7, 6, seed)
    }

    /// Trinomial `x^degree + x^tap + 1`; `seed` is masked to `degree` bits and
    /// must stay nonzero.
    pub fn with_polynomial(degree: u32, tap: u32, seed: u32) -> Result<Self> {
        assert!(
            (2..=32).contains(&degree) && (1..degree).contains(&tap),
            "unsupported polynomial x^{degree} + x^{tap} + 1"
        );
        let state = seed & mask(degree);
        if state == 0 {
            return Err(Error::ZeroLfsrState);
        }
        Ok(Prbs { state, degree, tap })
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    pub fn next_bit(&mut self) -> bool {
        let (bit, next) = prbs_next(self.state, self.degree, self.tap);
        self.state = next;
        bit
    }

    /// Next `n ≤ 32` bits packed MSB-first.
    pub fn next_bits(&mut self, n: u32) -> u32 {
        debug_assert!(n <= 32);
        (0..n).fold(0u32, |acc, _| (acc << 1) | self.next_bit() as u32)
    }

    /// Uniform value in `[0, 1)` built from the next 24 bits.
    pub fn next_unit(&mut self) -> f64 {
        self.next_bits(24) as f64 / (1u32 << 24) as f64
    }
}

impl Iterator for Prbs {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        Some(self.next_bit())
    }
}

fn mask(degree: u32) -> u32 {
    if degree == 32 {
        u32::MAX
    } else {
        (1u32 << degree) - 1
    }
}

/// One register step: returns the output bit and the successor state.
///
/// `state` must be nonzero; the all-zero register is a fixed point.
pub fn prbs_next(state: u32, degree: u32, tap: u32) -> (bool, u32) {
    let fb = ((state >> (degree - 1)) ^ (state >> (tap - 1))) & 1;
    (fb == 1, ((state << 1) | fb) & mask(degree))
}

/// Checked variant of [`prbs_next`] for PRBS-31.
pub fn prbs31_next(state: u32) -> Result<(bool, u32)> {
    if state & mask(31) == 0 {
        return Err(Error::ZeroLfsrState);
    }
    Ok(prbs_next(state & mask(31), 31, 28))
}
