//! Line-delimited pulse log.
//!
//! The first line is a JSON header
//! `{"format_version":1,"kind":"sdmqkd-pulse-log","n_pairs":N,"config":{..}}`
//! carrying the configuration that produced the run. Every following line is
//! one pulse on one core pair:
//!
//! ```text
//! {"i":17,"pair":1,"class":"v","bit":0,"a_basis":"Z","b_basis":"Z","c0":1,"c1":0}
//! ```
//!
//! Records appear in pulse order and, within a pulse, in core-pair order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::DetectionRecord;
use crate::error::{Error, Result};
use crate::protocol::{IntensityClass, PulseRecord};
use crate::qstate::BasisId;

pub const PULSE_LOG_FORMAT_VERSION: u32 = 1;
pub const PULSE_LOG_KIND: &str = "sdmqkd-pulse-log";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    kind: String,
    n_pairs: usize,
    config: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    i: u64,
    pair: usize,
    class: IntensityClass,
    bit: u8,
    a_basis: BasisId,
    b_basis: BasisId,
    c0: u8,
    c1: u8,
}

pub struct PulseLogWriter<W: Write> {
    out: W,
    n_pairs: usize,
}

impl<W: Write> PulseLogWriter<W> {
    pub fn new(mut out: W, n_pairs: usize, config: &Value) -> std::io::Result<Self> {
        let header = Header {
            format_version: PULSE_LOG_FORMAT_VERSION,
            kind: PULSE_LOG_KIND.to_string(),
            n_pairs,
            config: config.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        Ok(PulseLogWriter { out, n_pairs })
    }

    pub fn write(&mut self, alice: &PulseRecord, bob: &DetectionRecord) -> std::io::Result<()> {
        debug_assert!(alice.core_pair < self.n_pairs);
        let line = Line {
            i: alice.pulse_index,
            pair: alice.core_pair,
            class: alice.class,
            bit: alice.bit as u8,
            a_basis: alice.basis,
            b_basis: bob.basis,
            c0: bob.clicked_0 as u8,
            c1: bob.clicked_1 as u8,
        };
        serde_json::to_writer(&mut self.out, &line)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parsed pulse log: the embedded configuration plus index-aligned record
/// sequences per core pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseLog {
    pub config: Value,
    pub alice: Vec<Vec<PulseRecord>>,
    pub bob: Vec<Vec<DetectionRecord>>,
}

fn bool_field(v: u8, name: &str, line: usize) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::PulseLog(format!("line {line}: `{name}` must be 0 or 1"))),
    }
}

pub fn read_pulse_log<R: BufRead>(reader: R) -> Result<PulseLog> {
    let mut lines = reader.lines().enumerate();
    let header_text = match lines.next() {
        Some((_, Ok(l))) => l,
        Some((_, Err(e))) => return Err(Error::PulseLog(e.to_string())),
        None => return Err(Error::PulseLog("empty pulse log".into())),
    };
    let header: Header = serde_json::from_str(&header_text)
        .map_err(|e| Error::PulseLog(format!("line 1: bad header: {e}")))?;
    if header.kind != PULSE_LOG_KIND {
        return Err(Error::PulseLog(format!("line 1: unexpected kind `{}`", header.kind)));
    }
    if header.format_version != PULSE_LOG_FORMAT_VERSION {
        return Err(Error::PulseLog(format!(
            "line 1: unsupported format_version {}",
            header.format_version
        )));
    }

    let mut alice = vec![Vec::new(); header.n_pairs];
    let mut bob = vec![Vec::new(); header.n_pairs];
    for (idx, line) in lines {
        let lineno = idx + 1;
        let text = line.map_err(|e| Error::PulseLog(e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: Line = serde_json::from_str(&text)
            .map_err(|e| Error::PulseLog(format!("line {lineno}: {e}")))?;
        if rec.pair >= header.n_pairs {
            return Err(Error::PulseLog(format!(
                "line {lineno}: core pair {} exceeds n_pairs {}",
                rec.pair, header.n_pairs
            )));
        }
        alice[rec.pair].push(PulseRecord {
            pulse_index: rec.i,
            core_pair: rec.pair,
            bit: bool_field(rec.bit, "bit", lineno)?,
            basis: rec.a_basis,
            class: rec.class,
        });
        bob[rec.pair].push(DetectionRecord {
            clicked_0: bool_field(rec.c0, "c0", lineno)?,
            clicked_1: bool_field(rec.c1, "c1", lineno)?,
            basis: rec.b_basis,
            pulse_index: rec.i,
        });
    }
    Ok(PulseLog {
        config: header.config,
        alice,
        bob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::protocol::{run_session_with, sift, DecoyStatistics, IntensitySchedule, PairSetup, SessionConfig};
    use crate::protocol::sift_one;
    use serde_json::json;

    #[test]
    fn log_replays_session_statistics() {
        let cfg = SessionConfig {
            n_pulses: 3_000,
            rep_rate_hz: 5000.0,
            basis_prob_x: 0.5,
            bob_basis_prob_x: 0.5,
            pairs: vec![
                PairSetup {
                    prbs_seed: 5,
                    rng_seed: 6,
                    schedule: IntensitySchedule::with_signal(0.8),
                },
                PairSetup {
                    prbs_seed: 7,
                    rng_seed: 8,
                    schedule: IntensitySchedule::with_signal(0.4),
                },
            ],
            block_pulses: None,
        };
        let ch = ChannelParams {
            e_det: 0.1,
            dark_count_prob: 1e-3,
            crosstalk_db: Some(-10.0),
            ..ChannelParams::lossless()
        };
        let mut writer = PulseLogWriter::new(Vec::new(), 2, &json!({"tag": 1})).unwrap();
        let outcomes = run_session_with(&cfg, &[ch.clone(), ch], |a, b| {
            writer.write(a, b).map_err(|e| Error::PulseLog(e.to_string()))
        })
        .unwrap();
        let bytes = writer.finish().unwrap();

        let log = read_pulse_log(bytes.as_slice()).unwrap();
        assert_eq!(log.config, json!({"tag": 1}));
        for p in 0..2 {
            let tie = cfg.pairs[p].tie_break();
            let sifted = sift(&log.alice[p], &log.bob[p], &tie).unwrap();
            assert_eq!(sifted, outcomes[p].sifted);
            let mut stats = DecoyStatistics::default();
            for (a, b) in log.alice[p].iter().zip(&log.bob[p]) {
                stats.record(a, b.any_click(), sift_one(a, b, &tie));
            }
            assert_eq!(stats, outcomes[p].statistics);
        }
    }

    #[test]
    fn malformed_logs_are_rejected() {
        assert!(read_pulse_log(&b""[..]).is_err());
        assert!(read_pulse_log(&b"{\"format_version\":9,\"kind\":\"sdmqkd-pulse-log\",\"n_pairs\":1,\"config\":null}\n"[..]).is_err());
        let bad_pair = b"{\"format_version\":1,\"kind\":\"sdmqkd-pulse-log\",\"n_pairs\":1,\"config\":null}\n\
{\"i\":0,\"pair\":3,\"class\":\"u\",\"bit\":0,\"a_basis\":\"X\",\"b_basis\":\"X\",\"c0\":0,\"c1\":0}\n";
        assert!(read_pulse_log(&bad_pair[..]).is_err());
    }
}
