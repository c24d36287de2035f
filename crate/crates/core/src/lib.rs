//! Simulation and analysis of parallel, independent decoy-state BB84 keys
//! carried on core pairs of a multicore fiber.
//!
//! The crate is organised bottom-up:
//!
//! * [`qstate`]: spatial qubits on a core pair, MZI unitaries, mutually
//!   unbiased bases and Born-rule probabilities.
//! * [`channel`]: photon-level link model (Poissonian pulses, losses,
//!   crosstalk, detector efficiency, dark counts) and its analytic gain/QBER.
//! * [`protocol`]: PRBS-driven transmitter, multi-pair sessions, sifting and
//!   per-intensity statistics, plus the pulse-log format.
//! * [`analysis`]: entropies, decoy-state single-photon bounds, secret key
//!   rate, classical fidelity and MUB tomography.
//! * [`multiplex`]: closed-form rate comparison between SDM, HD, WDM, TDM and
//!   CDMA sharing schemes.
//! * [`cli`]: configuration parsing and the batch subcommands behind the
//!   `sdmqkd` binary.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod error;
pub mod multiplex;
pub mod protocol;
pub mod qstate;

pub use error::{Error, Result};
