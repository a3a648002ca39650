//! Checks that tie the walk and the pinning model together.
//!
//! Every routine here is a pure function of its config (seeds included).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{DisorderSpec, KernelKind, RenewalKernel, SparseEnvironment};
use crate::error::{Error, Result};
use crate::pinning::{
    annealed_critical_point, disorder_replicas, free_energy_estimate, grand_canonical,
    homogeneous_free_energy, quenched_critical_point_estimate, CriticalSearch,
    GrandCanonicalReport, PartitionTable, Verdict,
};
use crate::rng;
use crate::scalar::ls_slope;
use crate::walk::{
    visit_samples, McEstimate, Potential, VisitSimulator, WalkParams, DEFAULT_STEP_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

/// Parameters of one key-relation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeyRelationConfig {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta: f64,
    pub h: f64,
    pub f: f64,
    pub tau_replicas: usize,
    pub walk_replicas: usize,
    pub seed: u64,
    /// Smallest absorbing level tried; doubled until the truncation estimate is small.
    pub r_min: usize,
    pub r_max: usize,
    /// Environments used to choose `R` before the main run.
    pub pilot_replicas: usize,
    /// Absolute slack added to the acceptance band (floating point floor).
    pub abs_slack: f64,
    pub step_budget: u64,
}

impl Default for KeyRelationConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::PowerLaw {
                alpha: 1.0,
                n_max: 8,
            },
            disorder: DisorderSpec::Gaussian { sigma: 1.0 },
            beta: 1.0,
            h: -1.0,
            f: 0.3,
            tau_replicas: 1000,
            walk_replicas: 1000,
            seed: 1,
            r_min: 16,
            r_max: 1 << 14,
            pilot_replicas: 200,
            abs_slack: 1e-9,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

/// Both sides of `E_tau E_V[#visits to 0] = sum_n Z_n e^{-f n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRelationReport {
    pub config: KeyRelationConfig,
    /// Absorbing level of the walks.
    pub r: usize,
    /// Walk Monte Carlo, averaged over `tau`; stderr from the spread of per-`tau` means.
    pub lhs: McEstimate,
    /// Mean over the same `tau` samples of the exact `sum_{i < R} e^{V_i}`.
    pub lhs_exact_tau_average: f64,
    /// Mean over `tau` of `sum_{R <= i < 2R} e^{V_i}`: mass the finite-R walk omits.
    pub lhs_truncation: f64,
    /// Grand canonical partial sum `S_{2R-1}`.
    pub rhs: f64,
    /// Geometric tail bound of the grand canonical series past `2R - 1`.
    pub rhs_tail_bound: Option<f64>,
    /// `S_{R-1}`, the exact target of the finite-R walk average.
    pub rhs_at_r: f64,
    pub rhs_report: GrandCanonicalReport<f64>,
    pub difference: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
}

fn per_tau_seed(master: u64, t: u64) -> u64 {
    rng::derive_seed(master, &format!("walk/{t}"))
}

/// Runs the walk pipeline and the pinning pipeline on a shared `omega` and compares them.
pub fn verify_key_relation(config: &KeyRelationConfig) -> Result<KeyRelationReport> {
    if config.tau_replicas < 2 || config.walk_replicas < 2 {
        return Err(Error::TooFewReplicas {
            min: 2,
            got: config.tau_replicas.min(config.walk_replicas),
        });
    }
    if config.r_min == 0 || config.r_max < config.r_min {
        return Err(Error::InvalidParameter("need 1 <= r_min <= r_max".into()));
    }
    let kernel = RenewalKernel::<f64>::new(config.kernel)?;
    let disorder = config.disorder.validated()?;
    let params = WalkParams::new(config.beta, config.h, config.f)?;
    let sampler = kernel.sampler();
    let omega_key = rng::derive_seed(config.seed, "omega");
    let tau_key = rng::derive_seed(config.seed, "tau");
    let walk_key = rng::derive_seed(config.seed, "walk");

    // Streams are consumed sequentially, so a longer draw extends a shorter one.
    let omega_for = |len: usize| disorder.sample(len, &mut rng::stream(omega_key, 0));
    let potential_for = |omega: &[f64], t: u64| {
        let env = SparseEnvironment::with_disorder(&sampler, omega, &mut rng::stream(tau_key, t));
        Potential::build(&env, &params)
    };

    // Pick R so the omitted mass is a tenth of the predicted standard error.
    let pilot = config.pilot_replicas.clamp(2, config.tau_replicas);
    let mut r = config.r_min;
    loop {
        let omega = omega_for(2 * r);
        let stats: Vec<(f64, f64)> = (0..pilot as u64)
            .into_par_iter()
            .map(|t| {
                let p = potential_for(&omega, t);
                let w_r = p.expected_visits_exact(r).expect("r within horizon");
                let w_ext = p.expected_visits_exact(2 * r).expect("2r within horizon");
                (w_r, w_ext - w_r)
            })
            .collect();
        let k = pilot as f64;
        let mean_w = stats.iter().map(|s| s.0).sum::<f64>() / k;
        let var_w = stats.iter().map(|s| (s.0 - mean_w).powi(2)).sum::<f64>() / (k - 1.0);
        let geo_var = stats.iter().map(|s| s.0 * (s.0 - 1.0)).sum::<f64>() / k;
        let predicted =
            ((geo_var / config.walk_replicas as f64 + var_w) / config.tau_replicas as f64).sqrt();
        let omitted = stats.iter().map(|s| s.1).sum::<f64>() / k;
        if omitted <= (0.1 * predicted).max(config.abs_slack) {
            break;
        }
        if 2 * r > config.r_max {
            return Err(Error::InvalidParameter(format!(
                "absorbing level would exceed r_max = {}; drift too weak for a finite check",
                config.r_max
            )));
        }
        r *= 2;
    }

    let horizon = 2 * r;
    let omega = omega_for(horizon);
    let per_tau: Vec<(f64, f64, f64)> = (0..config.tau_replicas as u64)
        .into_par_iter()
        .map(|t| {
            let p = potential_for(&omega, t);
            let sim = VisitSimulator::new(&p, r, config.step_budget)?;
            let counts = visit_samples(&sim, config.walk_replicas, per_tau_seed(walk_key, t))?;
            let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
            let w_r = p.expected_visits_exact(r)?;
            let w_ext = p.expected_visits_exact(horizon)?;
            Ok((mean, w_r, w_ext - w_r))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = per_tau.iter().map(|x| x.0).collect();
    let lhs = McEstimate::from_samples(&means, config.seed);
    let k = per_tau.len() as f64;
    let lhs_exact_tau_average = per_tau.iter().map(|x| x.1).sum::<f64>() / k;
    let lhs_truncation = per_tau.iter().map(|x| x.2).sum::<f64>() / k;

    let table = PartitionTable::compute(&omega, &kernel, config.beta, config.h, horizon - 1)?;
    let rhs_report = grand_canonical(&table, config.f, horizon - 1);
    let rhs = rhs_report.value();
    let rhs_at_r = rhs_report.partial_sum(r - 1);
    let rhs_tail_bound = rhs_report.tail_bound();
    let difference = (lhs.mean - rhs).abs();
    let tolerance =
        3.0 * lhs.stderr + lhs_truncation + rhs_tail_bound.unwrap_or(0.0) + config.abs_slack;
    let outcome = match rhs_tail_bound {
        None => Outcome::Inconclusive,
        Some(_) if difference <= tolerance => Outcome::Pass,
        Some(_) => Outcome::Fail,
    };
    Ok(KeyRelationReport {
        config: config.clone(),
        r,
        lhs,
        lhs_exact_tau_average,
        lhs_truncation,
        rhs,
        rhs_tail_bound,
        rhs_at_r,
        rhs_report,
        difference,
        tolerance,
        outcome,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TauMeanConfig {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta: f64,
    pub h: f64,
    /// Number of grand canonical terms; raised to `n_max` if smaller.
    pub n_terms: usize,
    pub seed: u64,
    pub slack: f64,
}

impl Default for TauMeanConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::PowerLaw {
                alpha: 1.0,
                n_max: 8,
            },
            disorder: DisorderSpec::Gaussian { sigma: 1.0 },
            beta: 0.0,
            h: -1e3,
            n_terms: 64,
            seed: 1,
            slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMeanReport {
    pub config: TauMeanConfig,
    pub mean_gap: f64,
    /// `S_N` at `f = 0`.
    pub partial_sum: f64,
    pub n_terms: usize,
    pub outcome: Outcome,
}

/// `sum_n Z_n >= E[tau_1]` at `f = 0`, since `Z_n >= P(tau_1 > n)` term by term.
pub fn tau_mean_lower_bound(config: &TauMeanConfig) -> Result<TauMeanReport> {
    let kernel = RenewalKernel::<f64>::new(config.kernel)?;
    let n = config.n_terms.max(kernel.n_max());
    let omega = config
        .disorder
        .validated()?
        .sample(n, &mut rng::labeled_stream(config.seed, "omega", 0));
    let table = PartitionTable::compute(&omega, &kernel, config.beta, config.h, n)?;
    let report = grand_canonical(&table, 0.0, n);
    let mean_gap = kernel.mean();
    let partial_sum = report.value();
    Ok(TauMeanReport {
        config: config.clone(),
        mean_gap,
        partial_sum,
        n_terms: n,
        outcome: if partial_sum >= mean_gap - config.slack {
            Outcome::Pass
        } else {
            Outcome::Fail
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransienceConfig {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta: f64,
    pub h: f64,
    pub environments: usize,
    pub walk_replicas: usize,
    /// Absorbing levels, increasing.
    pub levels: Vec<usize>,
    pub seed: u64,
    pub step_budget: u64,
}

impl Default for TransienceConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::PowerLaw {
                alpha: 1.0,
                n_max: 8,
            },
            disorder: DisorderSpec::Gaussian { sigma: 1.0 },
            beta: 1.0,
            h: -1.0,
            environments: 1000,
            walk_replicas: 200,
            levels: vec![8, 32, 128],
            seed: 1,
            step_budget: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceLevel {
    pub level: usize,
    /// Trajectories absorbed at the level within the step budget.
    pub absorbed_fraction: f64,
    /// Mean over environments of the exact `sum_{i < R} e^{V_i}`.
    pub mean_exact_visits: f64,
    /// Mean over environments and walks of the simulated visit count (absorbed walks only).
    pub mean_mc_visits: f64,
    /// Environments whose estimated return probability lies within 3 sigma of `1 - 1/W(R)`.
    pub within_3_sigma: f64,
    pub max_abs_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceReport {
    pub config: TransienceConfig,
    pub levels: Vec<TransienceLevel>,
    /// Mean exact visits still growing by a factor > 1.5 per level step (recurrence signature).
    pub unbounded_growth: bool,
}

/// Escape statistics of the `f = 0` walk over sampled `(tau, omega)`.
pub fn annealed_transience_check(config: &TransienceConfig) -> Result<TransienceReport> {
    if config.levels.is_empty() || config.levels.contains(&0) {
        return Err(Error::InvalidParameter(
            "levels must be non-empty and positive".into(),
        ));
    }
    let kernel = RenewalKernel::<f64>::new(config.kernel)?;
    let disorder = config.disorder.validated()?;
    let params = WalkParams::new(config.beta, config.h, 0.0)?;
    let horizon = *config.levels.iter().max().unwrap();
    let tau_key = rng::derive_seed(config.seed, "tau");
    let omega_key = rng::derive_seed(config.seed, "omega");
    let walk_key = rng::derive_seed(config.seed, "walk");
    let potentials: Vec<Potential<f64>> = (0..config.environments as u64)
        .into_par_iter()
        .map(|e| {
            let env = SparseEnvironment::sample(
                &kernel,
                &disorder,
                horizon,
                rng::derive_seed(tau_key, &e.to_string()),
                rng::derive_seed(omega_key, &e.to_string()),
            );
            Potential::build(&env, &params)
        })
        .collect();
    let mut levels = Vec::new();
    for &level in &config.levels {
        let per_env: Vec<(usize, u64, u64, f64, f64)> = potentials
            .par_iter()
            .enumerate()
            .map(|(e, p)| {
                let sim = VisitSimulator::new(p, level, config.step_budget)
                    .expect("level within horizon");
                let seed = rng::derive_seed(walk_key, &format!("{level}/{e}"));
                let mut absorbed = 0usize;
                let mut visits = 0u64;
                let mut returns = 0u64;
                for r in 0..config.walk_replicas as u64 {
                    if let Ok(v) = sim.run(&mut rng::stream(seed, r)) {
                        absorbed += 1;
                        visits += v;
                        returns += v - 1;
                    }
                }
                let exact = p
                    .expected_visits_exact(level)
                    .expect("level within horizon");
                let q_exact = 1.0 - 1.0 / exact;
                let q_hat = if visits > 0 {
                    returns as f64 / visits as f64
                } else {
                    0.0
                };
                let se = (q_exact * (1.0 - q_exact) / visits.max(1) as f64).sqrt();
                let z = if se > 0.0 {
                    (q_hat - q_exact) / se
                } else if (q_hat - q_exact).abs() < 1e-15 {
                    0.0
                } else {
                    f64::INFINITY
                };
                (absorbed, visits, returns, exact, z)
            })
            .collect();
        let envs = per_env.len() as f64;
        let total_walks = (config.walk_replicas * per_env.len()) as f64;
        let absorbed: usize = per_env.iter().map(|x| x.0).sum();
        let visits: u64 = per_env.iter().map(|x| x.1).sum();
        levels.push(TransienceLevel {
            level,
            absorbed_fraction: absorbed as f64 / total_walks,
            mean_exact_visits: per_env.iter().map(|x| x.3).sum::<f64>() / envs,
            mean_mc_visits: if absorbed > 0 {
                visits as f64 / absorbed as f64
            } else {
                f64::NAN
            },
            within_3_sigma: per_env.iter().filter(|x| x.4.abs() <= 3.0).count() as f64 / envs,
            max_abs_z: per_env.iter().map(|x| x.4.abs()).fold(0.0, f64::max),
        });
    }
    let unbounded_growth = levels
        .windows(2)
        .all(|w| w[1].mean_exact_visits > 1.5 * w[0].mean_exact_visits);
    Ok(TransienceReport {
        config: config.clone(),
        levels,
        unbounded_growth,
    })
}

/// Theorem-level classification of a `(beta, h)` point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `h_c < h < 0`: quenched-transient, partially annealed return count infinite.
    Case1,
    /// `h_c^a < h <= h_c`: partially annealed finite, fully annealed infinite.
    Case2,
    /// `h <= h_c^a`: fully annealed finite.
    Case3,
    /// `h` equals `h_c^a` up to the tie tolerance.
    Boundary,
    /// `h` falls inside the estimated bracket of `h_c`.
    Unresolved,
    /// `h >= 0`; the walk is not transient.
    OutsideTheorem,
}

impl Regime {
    pub fn is_numbered(&self) -> bool {
        matches!(self, Self::Case1 | Self::Case2 | Self::Case3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub kernel: KernelKind,
    pub disorder: DisorderSpec<f64>,
    pub beta_grid: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub search: CriticalSearch,
    /// Terms in each grand canonical series.
    pub n_terms: usize,
    /// Small positive drift for the `epsilon > 0` statements.
    pub eps_small: f64,
    pub tie_tolerance: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::PowerLaw {
                alpha: 0.6,
                n_max: 100,
            },
            disorder: DisorderSpec::Gaussian { sigma: 1.0 },
            beta_grid: vec![0.5, 1.0, 1.5],
            h_grid: vec![-1.2, -0.9, -0.6, -0.3, -0.1],
            search: CriticalSearch {
                n: 10_000,
                replicas: 2,
                tol: 0.02,
                seed: 1,
                range: None,
                min_threshold: 1e-4,
                spread_factor: 1.0,
            },
            n_terms: 2000,
            eps_small: 0.01,
            tie_tolerance: 1e-12,
        }
    }
}

/// Grand canonical verdicts at one drift value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheck {
    pub eps: f64,
    pub verdict: Verdict<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    pub beta: f64,
    pub h: f64,
    pub regime: Regime,
    pub annealed_critical: f64,
    pub critical_bracket: (f64, f64),
    /// Quenched free energy estimate at `h` (first disorder replica).
    pub f_hat: f64,
    /// Homogeneous free energy at `h + lambda(beta)`.
    pub annealed_free_energy: f64,
    /// Quenched series at `eps` in `{0, eps_small}`, plus `f_hat / 2` when `f_hat > 0`.
    pub quenched: Vec<SeriesCheck>,
    /// Annealed series at `eps` in `{0, eps_small}`, plus half the annealed free energy when positive.
    pub annealed: Vec<SeriesCheck>,
    /// Exact visit sum of one sampled environment at `f = 0` has decaying terms.
    pub environment_visits_finite: bool,
    /// Whether the diagnostics match what the regime predicts; `None` when it predicts nothing.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub config: ScanConfig,
    pub points: Vec<RegimePoint>,
    /// Betas at which `h_c = h_c^a` exactly (cases 2 and 3 merge).
    pub merged_betas: Vec<f64>,
}

impl RegimeReport {
    pub fn count(&self, regime: Regime) -> usize {
        self.points.iter().filter(|p| p.regime == regime).count()
    }

    /// CSV summary, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "beta,h,regime,annealed_critical,hc_lo,hc_hi,f_hat,annealed_free_energy,consistent\n",
        );
        for p in &self.points {
            let regime = serde_json_like(p.regime);
            let consistent = match p.consistent {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.beta,
                p.h,
                regime,
                p.annealed_critical,
                p.critical_bracket.0,
                p.critical_bracket.1,
                p.f_hat,
                p.annealed_free_energy,
                consistent
            ));
        }
        out
    }
}

fn serde_json_like(r: Regime) -> &'static str {
    match r {
        Regime::Case1 => "case1",
        Regime::Case2 => "case2",
        Regime::Case3 => "case3",
        Regime::Boundary => "boundary",
        Regime::Unresolved => "unresolved",
        Regime::OutsideTheorem => "outside_theorem",
    }
}

/// Places `h` relative to `h_c^a` and the estimated `h_c` bracket.
pub fn classify(h: f64, annealed: f64, bracket: (f64, f64), tie: f64) -> Regime {
    if (h - annealed).abs() <= tie {
        Regime::Boundary
    } else if h < annealed {
        Regime::Case3
    } else if h >= 0.0 {
        Regime::OutsideTheorem
    } else if h >= bracket.0 && h <= bracket.1 {
        Regime::Unresolved
    } else if h > bracket.1 {
        Regime::Case1
    } else {
        Regime::Case2
    }
}

fn series_checks(table: &PartitionTable<f64>, n_terms: usize, eps: &[f64]) -> Vec<SeriesCheck> {
    eps.iter()
        .map(|&e| SeriesCheck {
            eps: e,
            verdict: grand_canonical(table, e, n_terms).verdict,
        })
        .collect()
}

/// Classifies every `(beta, h)` grid point and attaches series diagnostics.
pub fn regime_scan(config: &ScanConfig) -> Result<RegimeReport> {
    let kernel = RenewalKernel::<f64>::new(config.kernel)?;
    let disorder = config.disorder.validated()?;
    if config.n_terms > config.search.n {
        return Err(Error::InvalidParameter(
            "n_terms must not exceed the critical search size".into(),
        ));
    }
    let omega = disorder_replicas(&disorder, config.search.n, 1, config.search.seed)
        .pop()
        .expect("one replica");
    let mut points = Vec::new();
    let mut merged_betas = Vec::new();
    for &beta in &config.beta_grid {
        let annealed_critical = annealed_critical_point(&disorder, beta);
        let bracket = if beta == 0.0 {
            merged_betas.push(beta);
            (0.0, 0.0)
        } else {
            quenched_critical_point_estimate(&disorder, &kernel, beta, &config.search)?.bracket
        };
        let row: Vec<RegimePoint> = config
            .h_grid
            .par_iter()
            .map(|&h| {
                let regime = classify(h, annealed_critical, bracket, config.tie_tolerance);
                let f_hat = free_energy_estimate(&omega, &kernel, beta, h, config.search.n)?.f_hat;
                let annealed_fe =
                    homogeneous_free_energy(&kernel, h - annealed_critical).free_energy;
                let quenched_table =
                    PartitionTable::compute(&omega, &kernel, beta, h, config.n_terms)?;
                let annealed_table =
                    PartitionTable::homogeneous(&kernel, h - annealed_critical, config.n_terms);
                let mut q_eps = vec![0.0, config.eps_small];
                if f_hat > 0.0 {
                    q_eps.push(0.5 * f_hat);
                }
                let mut a_eps = vec![0.0, config.eps_small];
                if annealed_fe > 0.0 {
                    a_eps.push(0.5 * annealed_fe);
                }
                let quenched = series_checks(&quenched_table, config.n_terms, &q_eps);
                let annealed = series_checks(&annealed_table, config.n_terms, &a_eps);

                let env = SparseEnvironment::with_disorder(
                    &kernel.sampler(),
                    &omega[..config.n_terms],
                    &mut rng::labeled_stream(config.search.seed, "scan-tau", 0),
                );
                let potential = Potential::build(&env, &WalkParams::new(beta, h, 0.0)?);
                let half = &potential.values()[config.n_terms / 2..];
                let environment_visits_finite = ls_slope(half) < 0.0;

                let at = |checks: &[SeriesCheck], idx: usize| checks.get(idx).map(|c| c.verdict);
                let consistent = match regime {
                    Regime::Case1 => Some(
                        environment_visits_finite
                            && at(&quenched, 2).is_some_and(|v| v.is_diverging()),
                    ),
                    Regime::Case2 => Some(
                        at(&quenched, 1).is_some_and(|v| v.is_converged())
                            && at(&annealed, 2).is_some_and(|v| v.is_diverging()),
                    ),
                    Regime::Case3 => Some(at(&annealed, 1).is_some_and(|v| v.is_converged())),
                    _ => None,
                };
                Ok(RegimePoint {
                    beta,
                    h,
                    regime,
                    annealed_critical,
                    critical_bracket: bracket,
                    f_hat,
                    annealed_free_energy: annealed_fe,
                    quenched,
                    annealed,
                    environment_visits_finite,
                    consistent,
                })
            })
            .collect::<Result<_>>()?;
        points.extend(row);
    }
    Ok(RegimeReport {
        config: config.clone(),
        points,
        merged_betas,
    })
}

/// A copy of `config` with every budget doubled.
pub fn doubled_budgets(config: &ScanConfig) -> ScanConfig {
    let mut c = config.clone();
    c.search.n *= 2;
    c.search.replicas *= 2;
    c.n_terms *= 2;
    c
}

/// Grid points whose numbered case differs between two scans of the same grid.
pub fn case_flips(a: &RegimeReport, b: &RegimeReport) -> Vec<(f64, f64, Regime, Regime)> {
    a.points
        .iter()
        .zip(&b.points)
        .filter(|(p, q)| p.regime.is_numbered() && q.regime.is_numbered() && p.regime != q.regime)
        .map(|(p, q)| (p.beta, p.h, p.regime, q.regime))
        .collect()
}
