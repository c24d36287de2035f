//! Spatial qubits on a pair of fiber cores.
//!
//! A single photon shared between cores `A` and `B` of one core pair lives in
//! a two-mode space. The core basis `X = {|A>, |B>}` and the superposition
//! basis `Z = {(|A>+|B>)/√2, (|A>-|B>)/√2}` are mutually unbiased. Both chips
//! manipulate these states with Mach-Zehnder interferometers acting as tunable
//! beam splitters.
//!
//! Global phase is unobservable, so comparisons between states should go
//! through [`measurement_probabilities`] or [`mub_overlap`] rather than raw
//! amplitudes.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Largest tolerated deviation of `|a|² + |b|²` from one before an operation
/// rejects a state as unnormalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Phase factor carried by the cross-coupled arm of the beam splitter.
///
/// With splitting angle `θ` the bar path transmits `cos(θ/2)` and the cross
/// path `CROSS_COUPLING_PHASE · sin(θ/2)`:
///
/// ```text
/// B(θ) = [ cos θ/2        i·sin θ/2 ]
///        [ i·sin θ/2      cos θ/2   ]
/// ```
///
/// The relative phase shifter then multiplies the `A` output by `e^{iφ}`.
pub const CROSS_COUPLING_PHASE: Complex64 = Complex64::new(0.0, 1.0);

/// Measurement / preparation basis of a core pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisId {
    /// Core basis `{|A>, |B>}`.
    X,
    /// Superposition basis `{|A+B>, |A-B>}`.
    Z,
}

impl BasisId {
    pub const ALL: [BasisId; 2] = [BasisId::X, BasisId::Z];

    pub fn other(self) -> BasisId {
        match self {
            BasisId::X => BasisId::Z,
            BasisId::Z => BasisId::X,
        }
    }
}

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisId::X => f.write_str("X"),
            BasisId::Z => f.write_str("Z"),
        }
    }
}

/// Amplitude vector of one photon over cores `A` and `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorePairState {
    amp_a: Complex64,
    amp_b: Complex64,
}

impl CorePairState {
    /// `|A>`
    pub const CORE_A: CorePairState = CorePairState {
        amp_a: Complex64::new(1.0, 0.0),
        amp_b: Complex64::new(0.0, 0.0),
    };
    /// `|B>`
    pub const CORE_B: CorePairState = CorePairState {
        amp_a: Complex64::new(0.0, 0.0),
        amp_b: Complex64::new(1.0, 0.0),
    };
    /// `(|A>+|B>)/√2`
    pub const PLUS: CorePairState = CorePairState {
        amp_a: Complex64::new(FRAC_1_SQRT_2, 0.0),
        amp_b: Complex64::new(FRAC_1_SQRT_2, 0.0),
    };
    /// `(|A>-|B>)/√2`
    pub const MINUS: CorePairState = CorePairState {
        amp_a: Complex64::new(FRAC_1_SQRT_2, 0.0),
        amp_b: Complex64::new(-FRAC_1_SQRT_2, 0.0),
    };

    /// Builds a state from amplitudes that must already be normalized.
    pub fn new(amp_a: Complex64, amp_b: Complex64) -> Result<Self> {
        let state = Self::from_raw(amp_a, amp_b);
        state.check_normalized()?;
        Ok(state)
    }

    /// Rescales arbitrary amplitudes onto the unit sphere.
    pub fn normalized(amp_a: Complex64, amp_b: Complex64) -> Result<Self> {
        let norm = (amp_a.norm_sqr() + amp_b.norm_sqr()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized(norm * norm));
        }
        Ok(Self::from_raw(amp_a / norm, amp_b / norm))
    }

    /// Wraps amplitudes without checking normalization. Operations that
    /// require a normalized state verify it themselves.
    pub const fn from_raw(amp_a: Complex64, amp_b: Complex64) -> Self {
        CorePairState { amp_a, amp_b }
    }

    pub fn amp_a(&self) -> Complex64 {
        self.amp_a
    }

    pub fn amp_b(&self) -> Complex64 {
        self.amp_b
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_a.norm_sqr() + self.amp_b.norm_sqr()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &CorePairState) -> Complex64 {
        self.amp_a.conj() * other.amp_a + self.amp_b.conj() * other.amp_b
    }

    fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() <= NORM_TOLERANCE {
            Ok(())
        } else {
            Err(Error::NotNormalized(n))
        }
    }
}

/// Operating point of one MZI.
///
/// The three calibrated drive voltages of the chip map onto `theta` as
/// `0 V → 0` (bar), `V_π/2 → π/2` (50/50) and `V_π → π` (cross).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziSetting {
    theta: f64,
    phi: f64,
}

impl MziSetting {
    /// 0 V: light stays in its input arm.
    pub const BAR: MziSetting = MziSetting { theta: 0.0, phi: 0.0 };
    /// V_π/2: balanced splitting.
    pub const BALANCED: MziSetting = MziSetting {
        theta: PI / 2.0,
        phi: 0.0,
    };
    /// V_π: light swaps arms.
    pub const CROSS: MziSetting = MziSetting { theta: PI, phi: 0.0 };

    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        check_range("theta", theta, (0.0..=PI).contains(&theta), "[0, π]")?;
        check_range("phi", phi, (0.0..TAU).contains(&phi), "[0, 2π)")?;
        Ok(MziSetting { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `U(θ, φ) = diag(e^{iφ}, 1) · B(θ)` as a row-major 2×2 matrix.
    pub fn unitary(&self) -> [[Complex64; 2]; 2] {
        let c = Complex64::new((self.theta / 2.0).cos(), 0.0);
        let s = CROSS_COUPLING_PHASE * (self.theta / 2.0).sin();
        let phase = Complex64::from_polar(1.0, self.phi);
        [[phase * c, phase * s], [s, c]]
    }
}

/// Encodes `bit` in `basis`: `X` gives `|A>`/`|B>`, `Z` gives `|A±B>`.
pub fn prepare_state(bit: bool, basis: BasisId) -> CorePairState {
    match (basis, bit) {
        (BasisId::X, false) => CorePairState::CORE_A,
        (BasisId::X, true) => CorePairState::CORE_B,
        (BasisId::Z, false) => CorePairState::PLUS,
        (BasisId::Z, true) => CorePairState::MINUS,
    }
}

/// Propagates `state` through an MZI.
pub fn mzi_transfer(setting: &MziSetting, state: &CorePairState) -> CorePairState {
    let u = setting.unitary();
    CorePairState::from_raw(
        u[0][0] * state.amp_a + u[0][1] * state.amp_b,
        u[1][0] * state.amp_a + u[1][1] * state.amp_b,
    )
}

/// Born-rule probabilities of outcomes 0 and 1 when `state` is projected onto
/// `basis`.
pub fn measurement_probabilities(state: &CorePairState, basis: BasisId) -> Result<(f64, f64)> {
    state.check_normalized()?;
    let n = state.norm_sqr();
    let (p0, p1) = match basis {
        BasisId::X => (state.amp_a.norm_sqr(), state.amp_b.norm_sqr()),
        BasisId::Z => (
            (state.amp_a + state.amp_b).norm_sqr() / 2.0,
            (state.amp_a - state.amp_b).norm_sqr() / 2.0,
        ),
    };
    Ok((p0 / n, p1 / n))
}

/// `|<s1|s2>|²`
pub fn mub_overlap(s1: &CorePairState, s2: &CorePairState) -> Result<f64> {
    s1.check_normalized()?;
    s2.check_normalized()?;
    Ok(s1.inner(s2).norm_sqr())
}
