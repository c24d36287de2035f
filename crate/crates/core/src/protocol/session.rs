use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{deliver_leaked_photon, ChannelParams, DetectionRecord, Link};
use crate::error::{check_range, Error, Result};
use crate::protocol::sift::splitmix64;
use crate::protocol::{
    sift_one, DecoyStatistics, IntensitySchedule, Prbs, PulseRecord, SiftedByClass, TieBreak,
};
use crate::qstate::{prepare_state, BasisId, CorePairState};

/// Randomness sources and schedule of one core pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSetup {
    /// PRBS-31 seed for Alice's choices.
    pub prbs_seed: u32,
    /// Seed of the channel / receiver RNG stream.
    pub rng_seed: u64,
    pub schedule: IntensitySchedule,
}

impl PairSetup {
    /// Key of the double-click resolution hash, derived from the RNG seed.
    pub fn tie_break(&self) -> TieBreak {
        TieBreak::new(splitmix64(self.rng_seed ^ 0xD0B1_E0C1_1C4B_0000))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub n_pulses: u64,
    pub rep_rate_hz: f64,
    /// Alice's probability of preparing in basis X.
    pub basis_prob_x: f64,
    /// Bob's probability of measuring in basis X.
    pub bob_basis_prob_x: f64,
    pub pairs: Vec<PairSetup>,
    /// Emit per-block statistics every this many pulses.
    #[serde(default)]
    pub block_pulses: Option<u64>,
}

impl SessionConfig {
    pub fn n_core_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::InvalidSession("at least one core pair is required".into()));
        }
        check_range(
            "rep_rate_hz",
            self.rep_rate_hz,
            self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite(),
            "> 0",
        )?;
        for (name, p) in [
            ("basis_prob_x", self.basis_prob_x),
            ("bob_basis_prob_x", self.bob_basis_prob_x),
        ] {
            check_range(name, p, p > 0.0 && p < 1.0, "(0, 1)")?;
        }
        if self.block_pulses == Some(0) {
            return Err(Error::InvalidSession("block_pulses must be positive".into()));
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            pair.schedule.validate()?;
            Prbs::prbs31(pair.prbs_seed)?;
            if self.pairs[..i]
                .iter()
                .any(|p| p.prbs_seed & 0x7FFF_FFFF == pair.prbs_seed & 0x7FFF_FFFF)
            {
                return Err(Error::InvalidSession(format!(
                    "core pair {i} reuses PRBS seed {}",
                    pair.prbs_seed
                )));
            }
        }
        Ok(())
    }
}

/// Everything a session produced for one core pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairOutcome {
    pub statistics: DecoyStatistics,
    pub sifted: SiftedByClass,
    /// Per-block statistics when `block_pulses` is set.
    pub blocks: Vec<DecoyStatistics>,
}

/// Multi-pair pulse engine: one [`Link`] and RNG stream per core pair, with
/// crosstalk routed between pairs fired in the same time slot.
pub struct PulseEngine {
    links: Vec<Link>,
    rngs: Vec<ChaCha8Rng>,
}

impl PulseEngine {
    pub fn new(channels: &[ChannelParams], rng_seeds: &[u64]) -> Result<Self> {
        if channels.len() != rng_seeds.len() {
            return Err(Error::InvalidSession(format!(
                "{} channel parameter sets for {} core pairs",
                channels.len(),
                rng_seeds.len()
            )));
        }
        Ok(PulseEngine {
            links: channels.iter().map(Link::new).collect::<Result<_>>()?,
            rngs: rng_seeds.iter().map(|s| ChaCha8Rng::seed_from_u64(*s)).collect(),
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.links.len()
    }

    pub fn rng(&mut self, pair: usize) -> &mut ChaCha8Rng {
        &mut self.rngs[pair]
    }

    /// Fires one time slot. `inputs[p]` is the state, measurement basis and
    /// mean photon number of core pair `p`.
    pub fn fire(
        &mut self,
        inputs: &[(CorePairState, BasisId, f64)],
        pulse_index: u64,
        out: &mut Vec<DetectionRecord>,
    ) -> Result<()> {
        debug_assert_eq!(inputs.len(), self.links.len());
        out.clear();
        let mut leaks = Vec::new();
        for (p, (state, basis, mu)) in inputs.iter().enumerate() {
            let t = self.links[p].transmit(state, *basis, *mu, pulse_index, &mut self.rngs[p])?;
            out.push(t.record);
            if t.leaked_photons > 0 {
                leaks.push((p, t.leaked_photons));
            }
        }
        let n = self.links.len();
        if n > 1 {
            for (source, count) in leaks {
                let rng = &mut self.rngs[source];
                for _ in 0..count {
                    // uniformly random other core pair
                    let mut dest = rng.random_range(0..n - 1);
                    if dest >= source {
                        dest += 1;
                    }
                    deliver_leaked_photon(&mut out[dest], rng);
                }
            }
        }
        Ok(())
    }
}

/// Runs a session without observing individual pulses.
pub fn run_session(config: &SessionConfig, channels: &[ChannelParams]) -> Result<Vec<PairOutcome>> {
    run_session_with(config, channels, |_, _| Ok(()))
}

/// Runs a session, handing every `(transmitter, receiver)` record pair to
/// `observe` in pulse order, core pair by core pair.
pub fn run_session_with<F>(
    config: &SessionConfig,
    channels: &[ChannelParams],
    mut observe: F,
) -> Result<Vec<PairOutcome>>
where
    F: FnMut(&PulseRecord, &DetectionRecord) -> Result<()>,
{
    config.validate()?;
    let n_pairs = config.n_core_pairs();
    let seeds: Vec<u64> = config.pairs.iter().map(|p| p.rng_seed).collect();
    let mut engine = PulseEngine::new(channels, &seeds)?;
    let mut prbs: Vec<Prbs> = config
        .pairs
        .iter()
        .map(|p| Prbs::prbs31(p.prbs_seed))
        .collect::<Result<_>>()?;
    let ties: Vec<TieBreak> = config.pairs.iter().map(PairSetup::tie_break).collect();
    let mut outcomes = vec![PairOutcome::default(); n_pairs];
    let mut block_stats = vec![DecoyStatistics::default(); n_pairs];

    let mut alice = Vec::with_capacity(n_pairs);
    let mut inputs = Vec::with_capacity(n_pairs);
    let mut detections = Vec::with_capacity(n_pairs);

    for i in 0..config.n_pulses {
        alice.clear();
        inputs.clear();
        for (p, setup) in config.pairs.iter().enumerate() {
            // fixed PRBS consumption per pulse, whatever the intensity class
            let lfsr = &mut prbs[p];
            let bit = lfsr.next_bit();
            let basis = if lfsr.next_unit() < config.basis_prob_x {
                BasisId::X
            } else {
                BasisId::Z
            };
            let class = setup.schedule.class_for(lfsr.next_unit());
            let bob_basis = if engine.rng(p).random::<f64>() < config.bob_basis_prob_x {
                BasisId::X
            } else {
                BasisId::Z
            };
            alice.push(PulseRecord {
                pulse_index: i,
                core_pair: p,
                bit,
                basis,
                class,
            });
            inputs.push((
                prepare_state(bit, basis),
                bob_basis,
                setup.schedule.mean_photon_number(class),
            ));
        }
        engine.fire(&inputs, i, &mut detections)?;

        for p in 0..n_pairs {
            let (a, b) = (&alice[p], &detections[p]);
            observe(a, b)?;
            let sifted = sift_one(a, b, &ties[p]);
            if let Some((x, y)) = sifted {
                outcomes[p].sifted.class_mut(a.class).push(i, x, y);
            }
            outcomes[p].statistics.record(a, b.any_click(), sifted);
            if config.block_pulses.is_some() {
                block_stats[p].record(a, b.any_click(), sifted);
            }
        }
        if let Some(block) = config.block_pulses {
            if (i + 1) % block == 0 || i + 1 == config.n_pulses {
                for p in 0..n_pairs {
                    outcomes[p].blocks.push(std::mem::take(&mut block_stats[p]));
                }
            }
        }
    }

    for o in &outcomes {
        o.statistics.validate()?;
    }
    Ok(outcomes)
}
