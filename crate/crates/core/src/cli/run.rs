use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::analysis::tomography;
use crate::cli::config::{parse_config_with_seed, ConfigError, OutputFormat, RunConfig};
use crate::cli::report::*;
use crate::error::Error;
use crate::multiplex::compare_sweep;
use crate::protocol::{read_pulse_log, run_session, run_session_with, sift_one, DecoyStatistics, PairOutcome, PulseLogWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Analyze,
    Tomography,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Tomography => "tomography",
            Command::Compare => "compare",
        }
    }

    fn default_format(self) -> OutputFormat {
        match self {
            Command::Compare => OutputFormat::Csv,
            _ => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_path: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub command: Command,
    pub out: PathBuf,
    /// Artifact file names relative to `out`.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(ConfigError),
    Io { path: Option<PathBuf>, message: String },
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Analysis(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Analysis(_) => "analysis",
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> serde_json::Value {
        let mut error = json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config(c) => {
                error["key"] = json!(c.key);
                error["line"] = json!(c.line);
                error["column"] = json!(c.column);
            }
            CliError::Io { path, .. } => error["path"] = json!(path.as_ref().map(|p| p.display().to_string())),
            CliError::Analysis(_) => {}
        }
        json!({ "format_version": REPORT_FORMAT_VERSION, "error": error })
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: Some(path.to_path_buf()),
            message: format!("{}: {e}", path.display()),
        }
    }

    fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config(ConfigError {
            message: message.into(),
            key: Some(key.to_string()),
            line: None,
            column: None,
        })
    }

    fn domain(e: Error) -> Self {
        match e {
            Error::OutOfRange { .. } | Error::InvalidSession(_) | Error::InvalidScheme(_) | Error::MissingCdmaParameter(_) => {
                CliError::Config(ConfigError {
                    message: e.to_string(),
                    key: None,
                    line: None,
                    column: None,
                })
            }
            Error::PulseLog(m) => CliError::Io { path: None, message: m },
            other => CliError::Analysis(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(c) => write!(f, "configuration error: {c}"),
            CliError::Io { message, .. } => write!(f, "I/O error: {message}"),
            CliError::Analysis(m) => write!(f, "analysis failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record(header).map_err(|e| CliError::io(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest(&mut self, command: Command, config: &RunConfig) -> Result<(), CliError> {
        let manifest = Manifest {
            format_version: REPORT_FORMAT_VERSION,
            kind: "manifest".into(),
            command: command.name().into(),
            files: self.files.clone(),
            config: config.clone(),
        };
        self.json("manifest.json", &manifest)
    }
}

/// Executes one subcommand, writing its artifacts into `inv.out`.
pub fn run(inv: &Invocation) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(&inv.config_path).map_err(|e| CliError::io(&inv.config_path, e))?;
    let config = parse_config_with_seed(&text, inv.seed).map_err(CliError::Config)?;
    let format = inv
        .format
        .or(config.output.format)
        .unwrap_or(inv.command.default_format());
    fs::create_dir_all(&inv.out).map_err(|e| CliError::io(&inv.out, e))?;
    let mut art = Artifacts {
        dir: &inv.out,
        files: Vec::new(),
    };
    match inv.command {
        Command::Simulate => simulate(&config, format, &mut art)?,
        Command::Analyze => {
            let base = inv.config_path.parent().unwrap_or(Path::new("."));
            analyze(&config, base, format, &mut art)?
        }
        Command::Tomography => tomography_cmd(&config, format, &mut art)?,
        Command::Compare => compare(&config, format, &mut art)?,
    }
    Ok(RunSummary {
        command: inv.command,
        out: inv.out.clone(),
        files: art.files,
    })
}

fn simulate(config: &RunConfig, format: OutputFormat, art: &mut Artifacts) -> Result<(), CliError> {
    let session = config.session_config();
    let channels = config.channels();
    let outcomes = if config.output.pulse_log {
        let path = art.path("pulses.jsonl");
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let header = serde_json::to_value(config).map_err(|e| CliError::io(&path, e))?;
        let mut writer =
            PulseLogWriter::new(BufWriter::new(file), config.pairs.len(), &header).map_err(|e| CliError::io(&path, e))?;
        let outcomes = run_session_with(&session, &channels, |a, b| {
            writer.write(a, b).map_err(|e| Error::PulseLog(e.to_string()))
        })
        .map_err(CliError::domain)?;
        writer.finish().map_err(|e| CliError::io(&path, e))?;
        art.files.push("pulses.jsonl".into());
        outcomes
    } else {
        run_session(&session, &channels).map_err(CliError::domain)?
    };

    let stats: Vec<DecoyStatistics> = outcomes.iter().map(|o| o.statistics).collect();
    write_key_rate_report("simulate", config, &stats, format, art)?;
    if config.session.block_pulses.is_some() {
        write_timeseries(config, &outcomes, art)?;
    }
    art.manifest(Command::Simulate, config)
}

fn write_key_rate_report(
    source: &str,
    config: &RunConfig,
    stats: &[DecoyStatistics],
    format: OutputFormat,
    art: &mut Artifacts,
) -> Result<Vec<PairReport>, CliError> {
    let pairs: Vec<PairReport> = stats
        .iter()
        .enumerate()
        .map(|(i, s)| PairReport::build(i, &config.pairs[i], s, config))
        .collect();
    match format {
        OutputFormat::Json => {
            let doc = KeyRateDocument {
                format_version: REPORT_FORMAT_VERSION,
                kind: "key_rate_report".into(),
                source: source.into(),
                config: config.clone(),
                pairs: pairs.clone(),
            };
            art.json("report.json", &doc)?;
        }
        OutputFormat::Csv => {
            let rows: Vec<_> = pairs
                .iter()
                .flat_map(|p| statistics_rows(p, &config.pairs[p.core_pair]))
                .collect();
            art.csv("statistics.csv", &STATISTICS_CSV_HEADER, rows)?;
            art.csv("key_rate.csv", &KEY_RATE_CSV_HEADER, pairs.iter().map(key_rate_row))?;
        }
    }
    Ok(pairs)
}

fn write_timeseries(config: &RunConfig, outcomes: &[PairOutcome], art: &mut Artifacts) -> Result<(), CliError> {
    let block = config.session.block_pulses.unwrap_or(config.session.n_pulses.max(1));
    let mut rows = Vec::new();
    for (p, outcome) in outcomes.iter().enumerate() {
        for (b, stats) in outcome.blocks.iter().enumerate() {
            let start = b as u64 * block;
            rows.push(vec![
                p.to_string(),
                b.to_string(),
                start.to_string(),
                (start as f64 / config.session.rep_rate_hz).to_string(),
                opt(stats.signal.gain()),
                opt(stats.signal.qber()),
                opt(stats.decoy.gain()),
                opt(stats.decoy.qber()),
            ]);
        }
    }
    art.csv("timeseries.csv", &TIMESERIES_CSV_HEADER, rows)
}

fn analyze(config: &RunConfig, base: &Path, format: OutputFormat, art: &mut Artifacts) -> Result<(), CliError> {
    let rel = config
        .analyze
        .pulse_log
        .as_deref()
        .ok_or_else(|| CliError::config("analyze.pulse_log", "`analyze.pulse_log` is required for analyze"))?;
    let path = base.join(rel);
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let log = read_pulse_log(BufReader::new(file)).map_err(|e| CliError::io(&path, e))?;
    let source: RunConfig = serde_json::from_value(log.config)
        .map_err(|e| CliError::io(&path, format!("embedded configuration: {e}")))?;
    if source.pairs.len() != log.alice.len() {
        return Err(CliError::io(&path, "header pair count disagrees with the embedded configuration"));
    }

    let mut stats = Vec::with_capacity(source.pairs.len());
    for (p, setup) in source.pair_setups().iter().enumerate() {
        let tie = setup.tie_break();
        let mut s = DecoyStatistics::default();
        for (a, b) in log.alice[p].iter().zip(&log.bob[p]) {
            s.record(a, b.any_click(), sift_one(a, b, &tie));
        }
        stats.push(s);
    }
    let pairs = write_key_rate_report("analyze", &source, &stats, format, art)?;
    art.manifest(Command::Analyze, &source)?;

    let failed: Vec<String> = pairs
        .iter()
        .filter(|p| p.analysis_failed())
        .map(|p| match &p.analysis_error {
            Some(e) => format!("pair {}: {e}", p.core_pair),
            None => format!("pair {}: single-photon yield bound is not positive", p.core_pair),
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Analysis(failed.join("; ")))
    }
}

fn tomography_cmd(config: &RunConfig, format: OutputFormat, art: &mut Artifacts) -> Result<(), CliError> {
    let results = tomography(&config.tomography_config(), &config.channels()).map_err(CliError::domain)?;
    match format {
        OutputFormat::Json => {
            let doc = TomographyDocument {
                format_version: REPORT_FORMAT_VERSION,
                kind: "tomography".into(),
                config: config.clone(),
                pairs: results,
            };
            art.json("tomography.json", &doc)?;
        }
        OutputFormat::Csv => {
            const LABELS: [&str; 4] = ["A", "B", "A+B", "A-B"];
            let mut rows = Vec::new();
            for r in &results {
                for (i, label) in LABELS.iter().enumerate() {
                    let mut row = vec![r.core_pair.to_string(), label.to_string()];
                    row.extend(r.matrix.entries[i].iter().map(f64::to_string));
                    row.extend(r.matrix.counts[i].iter().map(u64::to_string));
                    rows.push(row);
                }
            }
            art.csv("tomography.csv", &TOMOGRAPHY_CSV_HEADER, rows)?;
            art.csv(
                "fidelity.csv",
                &FIDELITY_CSV_HEADER,
                results.iter().map(|r| {
                    vec![
                        r.core_pair.to_string(),
                        r.fidelity.to_string(),
                        r.cross_basis_fidelity.to_string(),
                        r.full_fidelity.to_string(),
                    ]
                }),
            )?;
        }
    }
    art.manifest(Command::Tomography, config)
}

fn compare(config: &RunConfig, format: OutputFormat, art: &mut Artifacts) -> Result<(), CliError> {
    let table = compare_sweep(&config.compare.scheme_params(), &config.compare.sweep, config.compare.noise_mode)
        .map_err(CliError::domain)?;
    match format {
        OutputFormat::Csv => {
            let path = art.path("compare.csv");
            let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            let mut out = BufWriter::new(file);
            table.write_csv(&mut out).map_err(|e| CliError::io(&path, e))?;
            out.flush().map_err(|e| CliError::io(&path, e))?;
            art.files.push("compare.csv".into());
        }
        OutputFormat::Json => {
            let doc = CompareDocument {
                format_version: REPORT_FORMAT_VERSION,
                kind: "compare".into(),
                config: config.clone(),
                rows: table.rows,
            };
            art.json("compare.json", &doc)?;
        }
    }
    art.manifest(Command::Compare, config)
}
