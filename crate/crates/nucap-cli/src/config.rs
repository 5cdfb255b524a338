//! Run configuration and the kernel spec file format.
//!
//! Kernel files are plain `key = value` lines. Every family needs `family`;
//! parameters are family specific:
//!
//! ```text
//! family = fractional        # rho^{-d - s*order}
//! s = 0.25
//! order = 2
//! ```
//!
//! `log-zero-order` takes `gamma`, `delta`; `double-log` takes `beta`,
//! `gamma`; `reg-varying` takes `profile = <csv path>` with `r,value` rows.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nucap::kernel::{KernelFamily, KernelSpec};
use nucap::TabulatedRadial;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_keyvals(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    map
}

fn need_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64, ConfigError> {
    map.get(key)
        .ok_or_else(|| ConfigError(format!("missing key `{key}`")))?
        .parse()
        .map_err(|_| ConfigError(format!("key `{key}` is not a number")))
}

/// Reads a kernel spec file and attaches the run's dimension and order.
pub fn load_kernel(path: &Path, d: u32, p: f64) -> Result<KernelSpec, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read kernel file {}: {e}", path.display())))?;
    let map = parse_keyvals(&text);
    let family = map
        .get("family")
        .ok_or_else(|| ConfigError("missing key `family`".into()))?
        .as_str();
    let fam = match family {
        "fractional" => KernelFamily::Fractional {
            s: need_f64(&map, "s")?,
            order: need_f64(&map, "order")?,
        },
        "log-zero-order" => KernelFamily::LogZeroOrder {
            gamma: need_f64(&map, "gamma")?,
            delta: need_f64(&map, "delta")?,
        },
        "double-log" => KernelFamily::DoubleLog {
            beta: need_f64(&map, "beta")?,
            gamma: need_f64(&map, "gamma")?,
        },
        "reg-varying" => {
            let rel = map
                .get("profile")
                .ok_or_else(|| ConfigError("reg-varying needs `profile = <csv>`".into()))?;
            let profile_path = path.parent().unwrap_or(Path::new(".")).join(rel);
            let text = fs::read_to_string(&profile_path).map_err(|e| {
                ConfigError(format!("cannot read profile {}: {e}", profile_path.display()))
            })?;
            let mut nodes = Vec::new();
            let mut values = Vec::new();
            for line in text.lines().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let mut parts = line.split(',');
                let r: f64 = parts
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| ConfigError(format!("bad profile row `{line}`")))?;
                let v: f64 = parts
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| ConfigError(format!("bad profile row `{line}`")))?;
                nodes.push(r);
                values.push(v);
            }
            let table = TabulatedRadial::new(nodes, values)
                .map_err(|e| ConfigError(format!("bad profile table: {e}")))?;
            KernelFamily::RegVarying(table)
        }
        other => return Err(ConfigError(format!("unknown family `{other}`"))),
    };
    KernelSpec::new(fam, d, p).map_err(|e| ConfigError(e.to_string()))
}

/// Parsed command line, validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub kernel_path: PathBuf,
    pub d: u32,
    pub extent: f64,
    pub n: usize,
    pub p: f64,
    pub radii: Vec<f64>,
    pub t_levels: usize,
    pub out: PathBuf,
    pub seed: u64,
    /// Optional directory for the cell-mass binary sidecar cache.
    pub cache: Option<PathBuf>,
    /// Far cutoff for the cell masses, as a multiple of the extent.
    pub far_factor: f64,
    /// Dump capacity minimizer snapshots as grid CSV files.
    pub dump_minimizers: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    KernelInfo,
    HardyCheck,
    Capacity,
    CoareaCheck,
    PropertySuite,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::KernelInfo => "kernel-info",
            Command::HardyCheck => "hardy-check",
            Command::Capacity => "capacity",
            Command::CoareaCheck => "coarea-check",
            Command::PropertySuite => "property-suite",
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.kernel_path.is_file() {
            return Err(ConfigError(format!(
                "kernel file {} is not readable",
                self.kernel_path.display()
            )));
        }
        if !self.n.is_power_of_two() {
            return Err(ConfigError(format!(
                "n = {} must be a power of two (refinement halving)",
                self.n
            )));
        }
        if !(self.d == 1 || self.d == 2) {
            return Err(ConfigError(format!("d must be 1 or 2, got {}", self.d)));
        }
        if !(self.extent > 0.0) {
            return Err(ConfigError(format!("extent must be positive, got {}", self.extent)));
        }
        if !(self.p >= 1.0) {
            return Err(ConfigError(format!("p must be >= 1, got {}", self.p)));
        }
        if self.t_levels == 0 || self.t_levels > 16 {
            return Err(ConfigError("t-levels must be in 1..=16".into()));
        }
        Ok(())
    }
}
