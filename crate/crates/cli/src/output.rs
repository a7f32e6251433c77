//! Run directories.
//!
//! A run directory is named after the digest of its resolved config and is
//! never modified once written. Files are first written to a staging
//! directory next to it and moved into place in one rename.
//!
//! Layout:
//!
//! | file | content |
//! |------|---------|
//! | `config.toml` | resolved config |
//! | `returns.txt` | one signed return per line, post-equilibration |
//! | `returns_rescaled.txt` | sums over windows of `rescale_k` steps |
//! | `histogram.csv` | `size,final_groups,mean_groups` |
//! | `decisions.csv` | `size,buy,sell,merge,fragment` |
//! | `summary.json` | run summary |
//! | `manifest.json` | config, digests of the files above, timestamps |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use herding_core::engine::{rescale_returns, ReturnSeries, RunSummary};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const RETURNS_FILE: &str = "returns.txt";
pub const RESCALED_FILE: &str = "returns_rescaled.txt";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const DECISIONS_FILE: &str = "decisions.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub config: RunConfig,
    pub warnings: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_secs: f64,
    /// File name to hex SHA-256.
    pub files: BTreeMap<String, String>,
}

pub fn run_dir_name(cfg: &RunConfig) -> String {
    format!("run-{}", &cfg.digest()[..16])
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn render_histogram(summary: &RunSummary) -> String {
    let finals: BTreeMap<usize, u64> = summary.final_histogram.iter().copied().collect();
    let mut out = String::from("size,final_groups,mean_groups\n");
    for (s, mean) in summary.mean_size_counts.iter().enumerate().skip(1) {
        let fin = finals.get(&s).copied().unwrap_or(0);
        if fin > 0 || *mean > 0.0 {
            writeln!(out, "{s},{fin},{mean:.17e}").unwrap();
        }
    }
    out
}

fn render_decisions(summary: &RunSummary) -> String {
    let mut out = String::from("size,buy,sell,merge,fragment\n");
    for (s, d) in summary.decisions_by_size.iter().enumerate() {
        if d.iter().any(|c| *c > 0) {
            writeln!(out, "{s},{},{},{},{}", d[0], d[1], d[2], d[3]).unwrap();
        }
    }
    out
}

pub enum Written {
    Created(PathBuf),
    /// A complete run with this config already existed and was kept.
    Existing(PathBuf),
}

impl Written {
    pub fn path(&self) -> &Path {
        match self {
            Written::Created(p) | Written::Existing(p) => p,
        }
    }
}

/// Write a finished run below `root`.
pub fn write_run(
    root: &Path,
    cfg: &RunConfig,
    series: &ReturnSeries,
    summary: &RunSummary,
    started_at: String,
) -> Result<Written, CliError> {
    let final_dir = root.join(run_dir_name(cfg));
    if final_dir.join(MANIFEST_FILE).is_file() {
        return Ok(Written::Existing(final_dir));
    }
    fs::create_dir_all(root).map_err(CliError::io(root))?;
    let staging = root.join(format!(".{}.partial-{}", run_dir_name(cfg), std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(CliError::io(&staging))?;
    }
    fs::create_dir(&staging).map_err(CliError::io(&staging))?;

    let mut returns = Vec::new();
    series.write_text(&mut returns)?;
    let mut rescaled = Vec::new();
    rescale_returns(series, cfg.rescale_k)?.write_text(&mut rescaled)?;
    let files: Vec<(&str, Vec<u8>)> = vec![
        (CONFIG_FILE, cfg.to_toml().into_bytes()),
        (RETURNS_FILE, returns),
        (RESCALED_FILE, rescaled),
        (HISTOGRAM_FILE, render_histogram(summary).into_bytes()),
        (DECISIONS_FILE, render_decisions(summary).into_bytes()),
        (SUMMARY_FILE, (serde_json::to_string_pretty(summary).expect("summary serializes") + "\n").into_bytes()),
    ];
    let mut digests = BTreeMap::new();
    for (name, bytes) in &files {
        let path = staging.join(name);
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        digests.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
    }
    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        config: cfg.clone(),
        warnings: cfg.warnings(),
        started_at,
        finished_at: timestamp(),
        wall_time_secs: summary.wall_time_secs,
        files: digests,
    };
    let path = staging.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
        .map_err(CliError::io(&path))?;

    match fs::rename(&staging, &final_dir) {
        Ok(()) => Ok(Written::Created(final_dir)),
        // another process finished the same run first
        Err(_) if final_dir.join(MANIFEST_FILE).is_file() => {
            let _ = fs::remove_dir_all(&staging);
            Ok(Written::Existing(final_dir))
        }
        Err(e) => Err(CliError::Io { path: final_dir, source: e }),
    }
}

/// A run directory opened for analysis.
pub struct StoredRun {
    pub dir: PathBuf,
    pub config: RunConfig,
}

impl StoredRun {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let cfg_path = dir.join(CONFIG_FILE);
        if !dir.is_dir() {
            return Err(CliError::Input { path: dir.to_path_buf(), message: "run directory does not exist".into() });
        }
        let text = fs::read_to_string(&cfg_path)
            .map_err(|_| CliError::Input { path: cfg_path.clone(), message: "missing run artifact".into() })?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Input { path: cfg_path, message: e.message().to_string() })?;
        Ok(Self { dir: dir.to_path_buf(), config })
    }

    pub fn returns(&self, rescaled: bool) -> Result<ReturnSeries, CliError> {
        let path = self.dir.join(if rescaled { RESCALED_FILE } else { RETURNS_FILE });
        let text = fs::read_to_string(&path)
            .map_err(|_| CliError::Input { path: path.clone(), message: "missing run artifact".into() })?;
        ReturnSeries::read_text(&text).map_err(|e| CliError::Input { path, message: e.to_string() })
    }

    pub fn name(&self) -> String {
        self.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
    }
}
