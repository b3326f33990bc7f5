//! End-to-end runs: simulate, tally, estimate, key rate, reports.
//!
//! Rounds are split into contiguous partitions (10^6 rounds by default) that
//! are simulated in parallel and merged. Because every round seeds its own
//! generator from the run seed and its index, the merged table does not
//! depend on the partitioning or on the order in which partitions finish.
//!
//! A run directory contains:
//!
//! | file            | content                                        |
//! |-----------------|------------------------------------------------|
//! | config snapshot | byte copy of the input config                  |
//! | `tallies.csv`   | per-cell counts and rates                      |
//! | `estimate.json` | decoy bounds and LP diagnostics                |
//! | `keyrate.json`  | per-setting key-rate breakdown                 |
//! | `keyrate.txt`   | the same as a table                            |
//! | `manifest.json` | seed, timings, versions and the list above     |
//!
//! While a simulation is running, `checkpoint.json` holds the merged table
//! of all finished partitions; a rerun with the same config resumes from it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsm::Simulator;
use crate::config::{ConfigError, ExperimentConfig};
use crate::decoy::{estimate_from_rates, DecoyError, DecoyEstimate};
use crate::keyrate::{key_rate, KeyRateReport, KeyRateSettings};
use crate::tally::{TallyError, TallyTable};

/// Rounds per partition unless a partition count is given.
pub const DEFAULT_PARTITION_ROUNDS: u64 = 1_000_000;

pub const TALLIES_FILE: &str = "tallies.csv";
pub const ESTIMATE_FILE: &str = "estimate.json";
pub const KEYRATE_JSON_FILE: &str = "keyrate.json";
pub const KEYRATE_TEXT_FILE: &str = "keyrate.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("sift-tally: {0}")]
    Tally(#[from] TallyError),
    #[error("decoy-lp: {0}")]
    Decoy(#[from] DecoyError),
    #[error("pipeline: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("pipeline: {path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("pipeline records are serializable") + "\n"
}

/// Where a run's configuration comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigSource {
    File(PathBuf),
    Preset(String),
}

impl ConfigSource {
    /// An existing file wins over a preset of the same name.
    pub fn resolve(arg: &str) -> Result<Self, PipelineError> {
        let path = Path::new(arg);
        if path.is_file() {
            Ok(ConfigSource::File(path.to_path_buf()))
        } else if ExperimentConfig::preset(arg).is_some() {
            Ok(ConfigSource::Preset(arg.to_string()))
        } else {
            Err(PipelineError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such config file or preset"),
            })
        }
    }

    /// Parsed config, the exact bytes to snapshot and the snapshot file name.
    pub fn load(&self) -> Result<(ExperimentConfig, Vec<u8>, String), PipelineError> {
        match self {
            ConfigSource::File(path) => {
                let bytes = fs::read(path).map_err(io_err(path))?;
                let text = String::from_utf8(bytes.clone()).map_err(|e| PipelineError::Format {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                let cfg = ExperimentConfig::parse(&text)?;
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "config.toml".into());
                Ok((cfg, bytes, name))
            }
            ConfigSource::Preset(name) => {
                let cfg = ExperimentConfig::preset(name).ok_or_else(|| PipelineError::Format {
                    path: PathBuf::from(name),
                    message: "unknown preset".into(),
                })?;
                let text = cfg.to_toml_string()?;
                Ok((cfg, text.into_bytes(), format!("{name}.toml")))
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    /// Number of partitions; `None` means partitions of
    /// [`DEFAULT_PARTITION_ROUNDS`].
    pub partitions: Option<u64>,
    /// File for partial tables; `None` disables checkpointing.
    pub checkpoint: Option<PathBuf>,
}

/// Contiguous round ranges covering `0..pulse_pairs`.
pub fn partition_ranges(pulse_pairs: u64, partitions: Option<u64>) -> Vec<Range<u64>> {
    let size = match partitions {
        Some(p) if p > 0 => pulse_pairs.div_ceil(p).max(1),
        _ => DEFAULT_PARTITION_ROUNDS,
    };
    (0..pulse_pairs.div_ceil(size))
        .map(|i| i * size..((i + 1) * size).min(pulse_pairs))
        .collect()
}

/// Tally of the rounds in `range`.
pub fn simulate_range(sim: &Simulator, range: Range<u64>) -> TallyTable {
    let mut table = TallyTable::new();
    for i in range {
        table.record(&sim.simulate_round(i));
    }
    table
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    config: ExperimentConfig,
    ranges: Vec<(u64, u64)>,
    done: usize,
    table: TallyTable,
}

/// Simulates `cfg.pulse_pairs` rounds and returns the merged tally.
pub fn simulate_tally(cfg: &ExperimentConfig, opts: &SimulateOptions) -> Result<TallyTable, PipelineError> {
    let sim = Simulator::new(cfg)?;
    let ranges = partition_ranges(cfg.pulse_pairs, opts.partitions);
    let range_pairs: Vec<(u64, u64)> = ranges.iter().map(|r| (r.start, r.end)).collect();

    let (mut table, mut done) = (TallyTable::new(), 0);
    if let Some(path) = opts.checkpoint.as_deref().filter(|p| p.exists()) {
        let cp: Checkpoint = read_json(path)?;
        if cp.config == *cfg && cp.ranges == range_pairs {
            info!("resuming from {} at partition {}/{}", path.display(), cp.done, ranges.len());
            table = cp.table;
            done = cp.done;
        } else {
            info!("ignoring checkpoint {} from a different run", path.display());
        }
    }

    let wave = 4 * rayon::current_num_threads();
    let started = Instant::now();
    while done < ranges.len() {
        let end = (done + wave).min(ranges.len());
        let part = ranges[done..end]
            .par_iter()
            .map(|r| simulate_range(&sim, r.clone()))
            .reduce(TallyTable::new, |a, b| a.merged(&b));
        table.merge(&part);
        done = end;
        if let Some(path) = &opts.checkpoint {
            let cp = Checkpoint {
                config: cfg.clone(),
                ranges: range_pairs.clone(),
                done,
                table: table.clone(),
            };
            let tmp = path.with_extension("tmp");
            write_file(&tmp, to_json(&cp))?;
            fs::rename(&tmp, path).map_err(io_err(path))?;
        }
        info!(
            "partition {done}/{} ({} rounds, {:.1} s)",
            ranges.len(),
            table.total_rounds(),
            started.elapsed().as_secs_f64()
        );
    }
    debug_assert_eq!(table.total_rounds(), cfg.pulse_pairs);
    Ok(table)
}

/// Decoy bounds and key rate from a tally.
pub fn post_process(table: &TallyTable, cfg: &ExperimentConfig) -> Result<(DecoyEstimate, KeyRateReport), PipelineError> {
    let rates = table.rates();
    let estimate = estimate_from_rates(&rates, cfg)?;
    let report = key_rate(&rates, &estimate, &KeyRateSettings::from(cfg));
    Ok((estimate, report))
}

/// Record of one run; lists every file written next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_snapshot: String,
    pub seed: u64,
    pub pulse_pairs: u64,
    pub partitions: usize,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub simulation_s: f64,
    pub module_versions: BTreeMap<String, String>,
    /// Artifact name to file name, relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
    pub y11_lower: f64,
    pub e11_upper: f64,
    pub key_rate_per_pulse: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn module_versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION");
    ["config", "source", "bsm", "tally", "lp", "decoy", "keyrate", "pipeline"]
        .into_iter()
        .map(|m| (m.to_string(), v.to_string()))
        .collect()
}

/// Runs the full chain and writes every artifact into `out_dir`.
pub fn run_pipeline(source: &ConfigSource, out_dir: &Path, opts: &SimulateOptions) -> Result<RunManifest, PipelineError> {
    let (cfg, snapshot, snapshot_name) = source.load()?;
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let started_unix_s = unix_now();

    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    let sim_opts = SimulateOptions {
        partitions: opts.partitions,
        checkpoint: opts.checkpoint.clone().or(Some(checkpoint.clone())),
    };
    let t0 = Instant::now();
    let table = simulate_tally(&cfg, &sim_opts)?;
    let simulation_s = t0.elapsed().as_secs_f64();
    info!("simulated {} rounds in {simulation_s:.1} s", cfg.pulse_pairs);

    let mut artifacts = BTreeMap::new();
    write_file(&out_dir.join(&snapshot_name), &snapshot)?;
    artifacts.insert("config".to_string(), snapshot_name.clone());
    write_file(&out_dir.join(TALLIES_FILE), table.to_csv_string())?;
    artifacts.insert("tallies".to_string(), TALLIES_FILE.to_string());

    let (estimate, report) = post_process(&table, &cfg)?;
    write_file(&out_dir.join(ESTIMATE_FILE), to_json(&estimate))?;
    artifacts.insert("estimate".to_string(), ESTIMATE_FILE.to_string());
    write_file(&out_dir.join(KEYRATE_JSON_FILE), to_json(&report))?;
    artifacts.insert("keyrate".to_string(), KEYRATE_JSON_FILE.to_string());
    write_file(&out_dir.join(KEYRATE_TEXT_FILE), format!("{report}\n"))?;
    artifacts.insert("keyrate_table".to_string(), KEYRATE_TEXT_FILE.to_string());

    if let Some(cp) = &sim_opts.checkpoint {
        if cp.exists() {
            fs::remove_file(cp).map_err(io_err(cp))?;
        }
    }

    let manifest = RunManifest {
        config_snapshot: snapshot_name,
        seed: cfg.seed,
        pulse_pairs: cfg.pulse_pairs,
        partitions: partition_ranges(cfg.pulse_pairs, opts.partitions).len(),
        started_unix_s,
        finished_unix_s: unix_now(),
        simulation_s,
        module_versions: module_versions(),
        artifacts,
        y11_lower: estimate.y11_lower,
        e11_upper: estimate.e11_upper,
        key_rate_per_pulse: report.total_per_pulse,
    };
    write_file(&out_dir.join(MANIFEST_FILE), to_json(&manifest))?;
    debug!("wrote {}", out_dir.join(MANIFEST_FILE).display());
    Ok(manifest)
}

/// Post-processes an exported tally without simulating.
pub fn estimate_only(tallies: &Path, source: &ConfigSource) -> Result<(DecoyEstimate, KeyRateReport), PipelineError> {
    let (cfg, _, _) = source.load()?;
    cfg.validate()?;
    let file = fs::File::open(tallies).map_err(io_err(tallies))?;
    let table = TallyTable::read_csv(std::io::BufReader::new(file))?;
    post_process(&table, &cfg)
}

/// Stored results of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub estimate: DecoyEstimate,
    pub key_rate: KeyRateReport,
}

/// Loads the reports of the run in `run_dir`.
pub fn report(run_dir: &Path) -> Result<RunSummary, PipelineError> {
    let manifest: RunManifest = read_json(&run_dir.join(MANIFEST_FILE))?;
    let file_of = |key: &str| -> Result<PathBuf, PipelineError> {
        manifest
            .artifacts
            .get(key)
            .map(|f| run_dir.join(f))
            .ok_or_else(|| PipelineError::Format {
                path: run_dir.join(MANIFEST_FILE),
                message: format!("no {key} artifact listed"),
            })
    };
    let estimate = read_json(&file_of("estimate")?)?;
    let key_rate = read_json(&file_of("keyrate")?)?;
    Ok(RunSummary {
        manifest,
        estimate,
        key_rate,
    })
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.manifest;
        let e = &self.estimate;
        writeln!(f, "config               {}", m.config_snapshot)?;
        writeln!(f, "seed                 {}", m.seed)?;
        writeln!(f, "rounds               {} in {} partitions, {:.1} s", m.pulse_pairs, m.partitions, m.simulation_s)?;
        for lp in [&e.z_yield, &e.x_yield, &e.x_error] {
            writeln!(
                f,
                "{:<26} {} value {:.6e}, {} pivots, {} binding rows",
                lp.program, lp.status, lp.value, lp.iterations, lp.binding_rows
            )?;
        }
        let flag = |b: bool| if b { " (clamped)" } else { "" };
        writeln!(f, "Y11 lower (X data)   {:.6e}", e.y11_lower_x)?;
        writeln!(f, "b11 upper (X data)   {:.6e}", e.b11_upper)?;
        writeln!(f, "e11 upper            {:.6}{}", e.e11_upper, flag(e.e11_clamped))?;
        writeln!(f, "Y11 lower            {:.6e}{}", e.y11_lower, flag(e.y11_clamped))?;
        write!(f, "{}", self.key_rate)
    }
}
