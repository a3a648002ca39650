//! Run configuration: one TOML file with a top-level `seed` and one table per subcommand.
//!
//! ```toml
//! seed = 7
//!
//! [walk]
//! kernel = { kind = "power_law", alpha = 1.0, n_max = 8 }
//! disorder = { family = "gaussian", sigma = 1.0 }
//! beta = 1.0
//! h = -1.0
//! f = 0.3
//! horizon = 200
//! ```
//!
//! Seeds never appear inside the tables; every random stream is derived from the
//! master seed by labeled hashing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rwsre::environment::{DisorderSpec, KernelKind};
use rwsre::walk::DEFAULT_STEP_BUDGET;

use crate::CliError;

/// Largest accepted master seed (TOML integers are signed 64-bit).
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvSection,
    pub walk: WalkSection,
    pub pinning: PinningSection,
    pub verify: VerifySection,
    pub scan: ScanSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            env: EnvSection::default(),
            walk: WalkSection::default(),
            pinning: PinningSection::default(),
            verify: VerifySection::default(),
            scan: ScanSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn power_law(alpha: f64, n_max: usize) -> KernelKind {
    KernelKind::PowerLaw { alpha, n_max }
}

fn gaussian(sigma: f64) -> DisorderSpec<f64> {
    DisorderSpec::Gaussian { sigma }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub horizon: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            kernel: power_law(1.0, 8),
            disorder: gaussian(1.0),
            horizon: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta: f64,
    pub h: f64,
    pub f: f64,
    pub horizon: usize,
    /// Absorbing level `R`; defaults to `horizon`.
    pub target: Option<usize>,
    pub replicas: usize,
    pub step_budget: u64,
    /// Steps of the unfolded walk for the speed estimate; 0 skips it.
    pub speed_steps: usize,
    pub speed_replicas: usize,
}

impl Default for WalkSection {
    fn default() -> Self {
        Self {
            kernel: power_law(1.0, 8),
            disorder: gaussian(1.0),
            beta: 0.0,
            h: 0.0,
            f: 0.0,
            horizon: 10,
            target: None,
            replicas: 10_000,
            step_budget: DEFAULT_STEP_BUDGET,
            speed_steps: 0,
            speed_replicas: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinningSection {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta: f64,
    pub h: f64,
    /// Length of the partition table and of the free-energy estimate.
    pub n: usize,
    /// Drift of the grand canonical series; omitted means no series.
    pub grand_canonical_f: Option<f64>,
    /// Run the quenched critical point search.
    pub critical: bool,
    pub search_n: usize,
    pub search_replicas: usize,
    pub tol: f64,
    pub min_threshold: f64,
    pub spread_factor: f64,
    /// Search interval for `h`; defaults to `[h_c^a - 1, 1]`.
    pub range: Option<[f64; 2]>,
}

impl Default for PinningSection {
    fn default() -> Self {
        Self {
            kernel: power_law(0.6, 100),
            disorder: gaussian(1.0),
            beta: 0.0,
            h: 0.0,
            n: 1000,
            grand_canonical_f: None,
            critical: false,
            search_n: 20_000,
            search_replicas: 4,
            tol: 1e-2,
            min_threshold: 1e-4,
            spread_factor: 1.0,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta: f64,
    pub h: f64,
    pub f: f64,
    pub tau_replicas: usize,
    pub walk_replicas: usize,
    pub r_min: usize,
    pub r_max: usize,
    pub pilot_replicas: usize,
    pub abs_slack: f64,
    pub step_budget: u64,
    /// Terms of the zero-drift series in the `E[tau_1]` bound.
    pub tau_mean_terms: usize,
    pub tau_mean_slack: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            kernel: power_law(1.0, 8),
            disorder: gaussian(1.0),
            beta: 1.0,
            h: -1.0,
            f: 0.3,
            tau_replicas: 1000,
            walk_replicas: 1000,
            r_min: 16,
            r_max: 1 << 14,
            pilot_replicas: 200,
            abs_slack: 1e-9,
            step_budget: DEFAULT_STEP_BUDGET,
            tau_mean_terms: 64,
            tau_mean_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta_grid: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub search_n: usize,
    pub search_replicas: usize,
    pub tol: f64,
    pub min_threshold: f64,
    pub spread_factor: f64,
    pub n_terms: usize,
    pub eps_small: f64,
    pub tie_tolerance: f64,
    /// Re-run with every budget doubled and report numbered cases that change.
    pub stability: bool,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            kernel: power_law(0.6, 100),
            disorder: gaussian(1.0),
            beta_grid: vec![0.5, 1.0, 1.5],
            h_grid: vec![-1.2, -0.9, -0.6, -0.3, -0.1],
            search_n: 10_000,
            search_replicas: 2,
            tol: 0.02,
            min_threshold: 1e-4,
            spread_factor: 1.0,
            n_terms: 2000,
            eps_small: 0.01,
            tie_tolerance: 1e-12,
            stability: false,
        }
    }
}

/// `power_law:ALPHA:N_MAX`, `geometric:Q:N_MAX` or `dirac:STEP`.
pub fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, String> {
        parts
            .get(i)
            .ok_or_else(|| format!("kernel `{s}` is missing a field"))?
            .parse()
            .map_err(|e| format!("kernel `{s}`: {e}"))
    };
    let int = |i: usize| -> Result<usize, String> {
        parts
            .get(i)
            .ok_or_else(|| format!("kernel `{s}` is missing a field"))?
            .parse()
            .map_err(|e| format!("kernel `{s}`: {e}"))
    };
    let kind = match parts[0] {
        "power_law" | "power-law" if parts.len() == 3 => KernelKind::PowerLaw {
            alpha: num(1)?,
            n_max: int(2)?,
        },
        "geometric" if parts.len() == 3 => KernelKind::Geometric {
            q: num(1)?,
            n_max: int(2)?,
        },
        "dirac" if parts.len() == 2 => KernelKind::Dirac { step: int(1)? },
        _ => return Err(format!(
            "unknown kernel `{s}`; expected power_law:ALPHA:N_MAX, geometric:Q:N_MAX or dirac:STEP"
        )),
    };
    Ok(kind)
}

/// `gaussian:SIGMA`, `rademacher` or `uniform:HALF_WIDTH`.
pub fn parse_disorder(s: &str) -> Result<DisorderSpec<f64>, String> {
    let (name, arg) = match s.split_once(':') {
        Some((name, arg)) => (name, Some(arg)),
        None => (s, None),
    };
    let value = || -> Result<f64, String> {
        arg.ok_or_else(|| format!("disorder `{s}` needs a parameter"))?
            .parse()
            .map_err(|e| format!("disorder `{s}`: {e}"))
    };
    match (name, arg.is_some()) {
        ("gaussian", true) => Ok(DisorderSpec::Gaussian { sigma: value()? }),
        ("rademacher", false) => Ok(DisorderSpec::Rademacher),
        ("uniform", true) => Ok(DisorderSpec::UniformCentered {
            half_width: value()?,
        }),
        _ => Err(format!(
            "unknown disorder `{s}`; expected gaussian:SIGMA, rademacher or uniform:HALF_WIDTH"
        )),
    }
}
