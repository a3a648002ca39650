//! Pinning model partition functions, free energies and critical points.
//!
//! Conventions: `z^c_n` is the pinned partition function (renewal point forced at
//! `n`), `Z_n` the free one, and both are 1 at `n = 0`. With `Z_0 = 1` the grand
//! canonical sum `sum_n Z_n e^{-f n}` equals the expected number of visits to the
//! origin of the walk (time 0 included) averaged over `tau`; the alternative
//! convention `Z_0 = 0` is available as [`GrandCanonicalReport::without_origin_term`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{DisorderSpec, RenewalKernel};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{compensated_sum, log_add_exp, log_sum_exp, ls_slope, Scalar};

/// Largest `n` accepted by [`brute_force_partition`].
pub const BRUTE_FORCE_MAX: usize = 14;

/// Log partition functions on `0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTable<T> {
    pub beta: T,
    pub h: T,
    /// `log z^c_m`, pinned.
    pub log_zc: Vec<T>,
    /// `log Z_m`, free. Empty until [`PartitionTable::fill_free`] runs.
    pub log_z: Vec<T>,
}

fn log_weights<T: Scalar>(kernel: &RenewalKernel<T>) -> Vec<T> {
    kernel.weights().iter().map(|w| w.ln()).collect()
}

/// `z^c_0 = 1`, `z^c_m = e^{beta omega_m + h} sum_{k=1}^{min(m, n_max)} K(k) z^c_{m-k}`, in log domain.
pub fn pinned_recursion<T: Scalar>(
    omega: &[T],
    kernel: &RenewalKernel<T>,
    beta: T,
    h: T,
    n: usize,
) -> Result<PartitionTable<T>> {
    if omega.len() < n {
        return Err(Error::ShortDisorder {
            have: omega.len(),
            need: n,
        });
    }
    let log_k = log_weights(kernel);
    let mut log_zc = Vec::with_capacity(n + 1);
    log_zc.push(T::zero());
    for m in 1..=n {
        let reach = m.min(log_k.len());
        let terms = (1..=reach).map(|k| log_k[k - 1] + log_zc[m - k]);
        let acc = log_sum_exp(terms);
        log_zc.push(beta * omega[m - 1] + h + acc);
    }
    Ok(PartitionTable {
        beta,
        h,
        log_zc,
        log_z: Vec::new(),
    })
}

impl<T: Scalar> PartitionTable<T> {
    /// Pinned and free tables up to `n`.
    pub fn compute(
        omega: &[T],
        kernel: &RenewalKernel<T>,
        beta: T,
        h: T,
        n: usize,
    ) -> Result<Self> {
        let mut table = pinned_recursion(omega, kernel, beta, h, n)?;
        table.fill_free(kernel);
        Ok(table)
    }

    /// Homogeneous (`beta = 0`) tables at contact reward `h`.
    pub fn homogeneous(kernel: &RenewalKernel<T>, h: T, n: usize) -> Self {
        let zeros = vec![T::zero(); n];
        Self::compute(&zeros, kernel, T::zero(), h, n).expect("omega covers n")
    }

    pub fn len(&self) -> usize {
        self.log_zc.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.log_zc.len() <= 1
    }

    /// `Z_m = sum_{k} z^c_k P(tau_1 > m - k)`, decomposing on the last renewal before `m`.
    pub fn fill_free(&mut self, kernel: &RenewalKernel<T>) {
        let log_tail: Vec<T> = kernel.tails().iter().map(|t| t.ln()).collect();
        let n_max = kernel.n_max();
        self.log_z = (0..self.log_zc.len())
            .map(|m| {
                let first = m.saturating_sub(n_max - 1);
                log_sum_exp((first..=m).map(|k| self.log_zc[k] + log_tail[m - k]))
            })
            .collect();
    }

    /// CSV with header `n,log_zc,log_z`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,log_zc,log_z\n");
        for (m, lzc) in self.log_zc.iter().enumerate() {
            let lz = self.log_z.get(m).copied().unwrap_or_else(T::nan);
            out.push_str(&format!("{m},{lzc},{lz}\n"));
        }
        out
    }
}

/// Enumerates every renewal configuration on `{1..n}`; returns `(Z_n, z^c_n)`.
pub fn brute_force_partition<T: Scalar>(
    omega: &[T],
    kernel: &RenewalKernel<T>,
    beta: T,
    h: T,
    n: usize,
) -> Result<(T, T)> {
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    if omega.len() < n {
        return Err(Error::ShortDisorder {
            have: omega.len(),
            need: n,
        });
    }
    if n == 0 {
        return Ok((T::one(), T::one()));
    }
    let mut free = Vec::new();
    let mut pinned = Vec::new();
    for mask in 0u32..(1 << n) {
        let mut weight = T::one();
        let mut energy = T::zero();
        let mut last = 0usize;
        for site in 1..=n {
            if mask & (1 << (site - 1)) != 0 {
                weight = weight * kernel.weight(site - last);
                energy = energy + beta * omega[site - 1] + h;
                last = site;
            }
        }
        if weight == T::zero() {
            continue;
        }
        let w = weight * energy.exp();
        if last == n {
            pinned.push(w);
        }
        free.push(w * kernel.tail(n - last));
    }
    Ok((compensated_sum(free), compensated_sum(pinned)))
}

/// Convergence call on a grand canonical partial-sum sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict<T> {
    /// Terms decay geometrically; `tail_bound` majorizes the omitted tail.
    Converged {
        tail_bound: T,
    },
    /// Terms grow at exponential rate `rate`.
    Diverging {
        rate: T,
    },
    Inconclusive {
        rate: T,
    },
}

impl<T> Verdict<T> {
    pub fn is_converged(&self) -> bool {
        matches!(self, Self::Converged { .. })
    }

    pub fn is_diverging(&self) -> bool {
        matches!(self, Self::Diverging { .. })
    }
}

/// Partial sums `S_N = sum_{n <= N} Z_n e^{-f n}` with a convergence verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandCanonicalReport<T> {
    pub f: T,
    /// `log S_0 .. log S_N`.
    pub log_partial_sums: Vec<T>,
    /// Least-squares slope of `log(Z_n e^{-f n})` over `n` in `[N/2, N]`.
    pub growth_rate: T,
    pub verdict: Verdict<T>,
}

impl<T: Scalar> GrandCanonicalReport<T> {
    pub fn horizon(&self) -> usize {
        self.log_partial_sums.len() - 1
    }

    /// `S_N`.
    pub fn value(&self) -> T {
        self.log_partial_sums
            .last()
            .copied()
            .unwrap_or_else(T::neg_infinity)
            .exp()
    }

    /// `S_k` for `k <= N`.
    pub fn partial_sum(&self, k: usize) -> T {
        self.log_partial_sums[k].exp()
    }

    /// `S_N - Z_0`, the sum under the `Z_0 = 0` convention.
    pub fn without_origin_term(&self) -> T {
        self.value() - T::one()
    }

    pub fn tail_bound(&self) -> Option<T> {
        match self.verdict {
            Verdict::Converged { tail_bound } => Some(tail_bound),
            _ => None,
        }
    }
}

/// Growth-rate threshold separating converged/diverging from inconclusive.
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 1e-3;

/// Grand canonical partial sums of `table` up to `n_terms` (capped at the table length).
pub fn grand_canonical<T: Scalar>(
    table: &PartitionTable<T>,
    f: T,
    n_terms: usize,
) -> GrandCanonicalReport<T> {
    grand_canonical_with(table, f, n_terms, T::lit(DEFAULT_GROWTH_THRESHOLD))
}

pub fn grand_canonical_with<T: Scalar>(
    table: &PartitionTable<T>,
    f: T,
    n_terms: usize,
    threshold: T,
) -> GrandCanonicalReport<T> {
    assert!(
        !table.log_z.is_empty(),
        "free partition functions must be filled before summing"
    );
    let last = n_terms.min(table.log_z.len() - 1);
    let terms: Vec<T> = (0..=last)
        .map(|n| {
            if n == 0 {
                table.log_z[0]
            } else {
                table.log_z[n] - f * T::from_usize_lossy(n)
            }
        })
        .collect();
    let mut log_partial_sums = Vec::with_capacity(terms.len());
    let mut acc = T::neg_infinity();
    for t in &terms {
        acc = log_add_exp(acc, *t);
        log_partial_sums.push(acc);
    }
    let (growth_rate, verdict) = tail_verdict(&terms, threshold);
    GrandCanonicalReport {
        f,
        log_partial_sums,
        growth_rate,
        verdict,
    }
}

/// Verdict from the log-terms over the second half of the sequence.
fn tail_verdict<T: Scalar>(terms: &[T], threshold: T) -> (T, Verdict<T>) {
    let last = terms.len() - 1;
    let start = last / 2;
    let window = &terms[start..];
    if window.iter().all(|t| *t == T::neg_infinity()) {
        return (
            T::neg_infinity(),
            Verdict::Converged {
                tail_bound: T::zero(),
            },
        );
    }
    if window.len() < 2 || window.iter().any(|t| !t.is_finite()) {
        return (T::nan(), Verdict::Inconclusive { rate: T::nan() });
    }
    let ys: Vec<f64> = window.iter().map(|t| t.as_f64()).collect();
    let slope = ls_slope(&ys);
    let rate = T::lit(slope);
    if rate < -threshold {
        // Line of the fitted slope through (last, envelope) dominates every window point.
        let envelope = ys
            .iter()
            .enumerate()
            .map(|(i, y)| y + slope * (ys.len() - 1 - i) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let r = slope.exp();
        let bound = envelope.exp() * r / (1.0 - r);
        (
            rate,
            Verdict::Converged {
                tail_bound: T::lit(bound),
            },
        )
    } else if rate > threshold {
        (rate, Verdict::Diverging { rate })
    } else {
        (rate, Verdict::Inconclusive { rate })
    }
}

/// Finite-volume free energy `(1/n) log z^c_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate<T> {
    /// Clamped at zero.
    pub f_hat: T,
    /// Before clamping.
    pub raw: T,
    /// `max - min` of `(1/m) log z^c_m` over `m` in `[n/2, n]`.
    pub window_spread: T,
    pub n: usize,
}

pub fn free_energy_estimate<T: Scalar>(
    omega: &[T],
    kernel: &RenewalKernel<T>,
    beta: T,
    h: T,
    n: usize,
) -> Result<FreeEnergyEstimate<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("free energy needs n >= 1".into()));
    }
    let table = pinned_recursion(omega, kernel, beta, h, n)?;
    let per_site = |m: usize| table.log_zc[m] / T::from_usize_lossy(m);
    let start = (n / 2).max(1);
    let (lo, hi) = (start..=n)
        .map(per_site)
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    let raw = per_site(n);
    Ok(FreeEnergyEstimate {
        f_hat: raw.max(T::zero()),
        raw,
        window_spread: hi - lo,
        n,
    })
}

/// Free energy of the `beta = 0` model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSolution<T> {
    pub h: T,
    pub free_energy: T,
    /// `sum_n K(n) e^{-F n} - e^{-h}` at the returned root (0 when `h <= 0`).
    pub residual: T,
}

/// `F(h)`: zero for `h <= 0`, otherwise the root of `sum_n K(n) e^{-F n} = e^{-h}`.
pub fn homogeneous_free_energy<T: Scalar>(
    kernel: &RenewalKernel<T>,
    h: T,
) -> HomogeneousSolution<T> {
    if h <= T::zero() {
        return HomogeneousSolution {
            h,
            free_energy: T::zero(),
            residual: T::zero(),
        };
    }
    // sum_n K(n) e^{-F n} - e^{-h}, strictly decreasing; root lies in (0, h].
    let target = (-h).exp();
    let laplace = |x: T| {
        compensated_sum(
            kernel
                .weights()
                .iter()
                .enumerate()
                .map(|(i, w)| *w * (-x * T::from_usize_lossy(i + 1)).exp()),
        )
    };
    let tol = T::lit(1e-12).max(T::epsilon() * h * T::lit(4.0));
    let (mut lo, mut hi) = (T::zero(), h);
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if laplace(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let free_energy = (lo + hi) / T::lit(2.0);
    HomogeneousSolution {
        h,
        free_energy,
        residual: laplace(free_energy) - target,
    }
}

/// `h_c^a(beta) = -lambda(beta)`.
pub fn annealed_critical_point<T: Scalar>(spec: &DisorderSpec<T>, beta: T) -> T {
    -spec.log_mgf(beta)
}

/// Disorder relevance for a pure power-law kernel with constant slowly varying part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    Relevant,
    Irrelevant,
}

/// Relevant iff `sum_n n^{-2(1 - alpha)}` diverges, i.e. `alpha >= 1/2`.
pub fn relevance_classifier(alpha: f64) -> Result<Relevance> {
    if alpha.is_nan() || alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    if 2.0 * (1.0 - alpha) <= 1.0 {
        Ok(Relevance::Relevant)
    } else {
        Ok(Relevance::Irrelevant)
    }
}

/// Settings for [`quenched_critical_point_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearch {
    /// System size of each free-energy evaluation.
    pub n: usize,
    /// Independent disorder sequences; their mean `f_hat` is tested.
    pub replicas: usize,
    /// Bracket width at which bisection stops.
    pub tol: f64,
    pub seed: u64,
    /// Search interval; defaults to `[h_c^a - 1, 1]`.
    pub range: Option<(f64, f64)>,
    /// Floor of the localization threshold.
    pub min_threshold: f64,
    /// Threshold as a multiple of the window spread.
    pub spread_factor: f64,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            n: 20_000,
            replicas: 4,
            tol: 1e-2,
            seed: 0,
            range: None,
            min_threshold: 1e-4,
            spread_factor: 1.0,
        }
    }
}

/// Localization test at one `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationProbe {
    pub h: f64,
    /// Mean of `f_hat` over disorder replicas.
    pub f_hat: f64,
    /// Largest window spread among replicas.
    pub window_spread: f64,
    /// `max - min` of `f_hat` across replicas.
    pub replica_spread: f64,
    pub threshold: f64,
    pub localized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointEstimate {
    pub beta: f64,
    pub h_hat: f64,
    /// `f_hat(lo) <= threshold < f_hat(hi)`.
    pub bracket: (f64, f64),
    pub probes: Vec<LocalizationProbe>,
}

/// Disorder sequences used by the quenched estimators; replica `r` is stream `r`.
pub fn disorder_replicas(
    spec: &DisorderSpec<f64>,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let key = rng::derive_seed(seed, "quenched-omega");
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| spec.sample(n, &mut rng::stream(key, r)))
        .collect()
}

/// Evaluates the localization test `f_hat > max(min_threshold, spread_factor * spread)`.
pub fn localization_probe(
    omegas: &[Vec<f64>],
    kernel: &RenewalKernel<f64>,
    beta: f64,
    h: f64,
    search: &CriticalSearch,
) -> Result<LocalizationProbe> {
    let estimates: Vec<FreeEnergyEstimate<f64>> = omegas
        .par_iter()
        .map(|omega| free_energy_estimate(omega, kernel, beta, h, search.n))
        .collect::<Result<_>>()?;
    let k = estimates.len() as f64;
    let f_hat = estimates.iter().map(|e| e.f_hat).sum::<f64>() / k;
    let window_spread = estimates
        .iter()
        .map(|e| e.window_spread)
        .fold(0.0, f64::max);
    let (lo, hi) = estimates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.f_hat), hi.max(e.f_hat))
        });
    let threshold = search
        .min_threshold
        .max(search.spread_factor * window_spread);
    Ok(LocalizationProbe {
        h,
        f_hat,
        window_spread,
        replica_spread: hi - lo,
        threshold,
        localized: f_hat > threshold,
    })
}

/// Bisection on `h` for the onset of `f_hat > threshold`.
pub fn quenched_critical_point_estimate(
    spec: &DisorderSpec<f64>,
    kernel: &RenewalKernel<f64>,
    beta: f64,
    search: &CriticalSearch,
) -> Result<CriticalPointEstimate> {
    if search.tol.is_nan() || search.tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    if search.replicas == 0 || search.n == 0 {
        return Err(Error::InvalidParameter(
            "need n >= 1 and replicas >= 1".into(),
        ));
    }
    let omegas = disorder_replicas(spec, search.n, search.replicas, search.seed);
    let (mut lo, mut hi) = search
        .range
        .unwrap_or((annealed_critical_point(spec, beta) - 1.0, 1.0));
    let mut probes = Vec::new();
    let bottom = localization_probe(&omegas, kernel, beta, lo, search)?;
    let top = localization_probe(&omegas, kernel, beta, hi, search)?;
    probes.push(bottom);
    probes.push(top);
    if bottom.localized || !top.localized {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > search.tol {
        let mid = 0.5 * (lo + hi);
        let probe = localization_probe(&omegas, kernel, beta, mid, search)?;
        probes.push(probe);
        if probe.localized {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalPointEstimate {
        beta,
        h_hat: 0.5 * (lo + hi),
        bracket: (lo, hi),
        probes,
    })
}
