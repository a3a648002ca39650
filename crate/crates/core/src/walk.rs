//! Nearest-neighbour walk in a potential: exact formulas and Monte Carlo.
//!
//! The walk on `Z` is assumed symmetric about `-1/2`, which is equivalent to the
//! folded birth-and-death chain on `{0, 1, 2, ...}` with a forced `0 -> 1` step.
//! From `i >= 1` the chain steps up with probability `1 / (1 + e^{V_i - V_{i-1}})`.
//! The scale function `W(n) = sum_{k<n} e^{V_k}` is harmonic for that chain, so
//! exit probabilities and expected visit counts to the origin are explicit.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::SparseEnvironment;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::scalar::{compensated_sum, log_sum_exp, Scalar};

/// Default cap on steps of a single trajectory.
pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

/// Disorder strength, contact reward, and external drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams<T> {
    pub beta: T,
    pub h: T,
    pub f: T,
}

impl<T: Scalar> WalkParams<T> {
    pub fn new(beta: T, h: T, f: T) -> Result<Self> {
        if beta.is_nan() || beta < T::zero() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= 0, got {beta}"
            )));
        }
        if !h.is_finite() || !f.is_finite() {
            return Err(Error::InvalidParameter("h and f must be finite".into()));
        }
        Ok(Self { beta, h, f })
    }
}

/// Potential `V_0 = 0, V_1, ..., V_M` on the non-negative half line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential<T> {
    values: Vec<T>,
}

/// `1 / (1 + e^{delta_v})`, the probability of an up-step across increment `delta_v`.
pub fn step_prob<T: Scalar>(delta_v: T) -> T {
    if delta_v > T::zero() {
        let e = (-delta_v).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + delta_v.exp())
    }
}

impl<T: Scalar> Potential<T> {
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.first() != Some(&T::zero()) {
            return Err(Error::InvalidParameter(
                "potential must start with V_0 = 0".into(),
            ));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("potential contains NaN".into()));
        }
        Ok(Self { values })
    }

    /// Flat potential `V = 0` on `0..=horizon`.
    pub fn flat(horizon: usize) -> Self {
        Self {
            values: vec![T::zero(); horizon + 1],
        }
    }

    /// Homogeneous drift `V_i = -f i`.
    pub fn linear(horizon: usize, f: T) -> Self {
        Self {
            values: (0..=horizon).map(|i| -f * T::from_usize_lossy(i)).collect(),
        }
    }

    /// `V_i = V_{i-1} + (h + beta omega_i) 1{i in tau} - f`.
    pub fn build(env: &SparseEnvironment<T>, params: &WalkParams<T>) -> Self {
        let mut values = Vec::with_capacity(env.horizon() + 1);
        let mut v = T::zero();
        values.push(v);
        for i in 1..=env.horizon() {
            if env.is_renewal(i) {
                v = v + (params.h + params.beta * env.omega(i));
            }
            v = v - params.f;
            values.push(v);
        }
        Self { values }
    }

    /// `M`, the last site carrying a value.
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `V_i - V_{i-1}` for `i >= 1`.
    pub fn increment(&self, i: usize) -> T {
        self.values[i] - self.values[i - 1]
    }

    /// Up-step probability of the folded chain at `i`; 1 at the origin.
    pub fn up_prob(&self, i: usize) -> T {
        if i == 0 {
            T::one()
        } else {
            step_prob(self.increment(i))
        }
    }

    fn check_index(&self, n: usize) -> Result<()> {
        let max = self.values.len();
        if n > max {
            Err(Error::OutOfRange { index: n, max })
        } else {
            Ok(())
        }
    }

    /// Scale function `W(n) = sum_{0 <= k < n} e^{V_k}` for `0 <= n <= M + 1`.
    pub fn scale(&self, n: usize) -> Result<T> {
        self.check_index(n)?;
        Ok(compensated_sum(self.values[..n].iter().map(|v| v.exp())))
    }

    /// `log W(n)`; `-inf` at `n = 0`.
    pub fn log_scale(&self, n: usize) -> Result<T> {
        self.check_index(n)?;
        Ok(log_sum_exp(self.values[..n].iter().copied()))
    }

    /// Probability, started from `b`, of reaching `c` before returning to `a`:
    /// `(W(b) - W(a)) / (W(c) - W(a))`.
    pub fn ruin_prob(&self, a: usize, b: usize, c: usize) -> Result<T> {
        if !(a < b && b <= c) {
            return Err(Error::BadOrdering { a, b, c });
        }
        self.check_index(c)?;
        if b == c {
            return Ok(T::one());
        }
        let window = &self.values[a..c];
        let shift = window
            .iter()
            .copied()
            .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
        let num = compensated_sum(window[..b - a].iter().map(|v| (*v - shift).exp()));
        let den = compensated_sum(window.iter().map(|v| (*v - shift).exp()));
        Ok(num / den)
    }

    /// Expected visits to 0 (time 0 included) before first hitting `r`:
    /// `sum_{0 <= i < r} e^{V_i}`. Each excursion from 0 escapes to `r` with
    /// probability `1 / W(r)`, so the count is geometric with that mean.
    pub fn expected_visits_exact(&self, r: usize) -> Result<T> {
        Ok(self.log_expected_visits(r)?.exp())
    }

    pub fn log_expected_visits(&self, r: usize) -> Result<T> {
        if r == 0 {
            return Err(Error::OutOfRange {
                index: 0,
                max: self.values.len(),
            });
        }
        self.log_scale(r)
    }

    /// Bound on `sum_{i >= from} e^{V_i}` valid when every increment past `from`
    /// is at most `-rate` (e.g. `rate = f` when all contact rewards are non-positive).
    pub fn geometric_tail_bound(&self, from: usize, rate: T) -> T {
        if rate <= T::zero() {
            return T::infinity();
        }
        let v = self.values[from.min(self.horizon())];
        v.exp() / (-(-rate).exp_m1())
    }

    /// CSV with header `i,V,step_prob_up` (the folded chain's forced step at 0).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,V,step_prob_up\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i, v, self.up_prob(i)));
        }
        out
    }
}

/// Trajectory runner for the folded chain absorbed at `target`.
#[derive(Debug, Clone)]
pub struct VisitSimulator {
    up: Vec<f64>,
    target: usize,
    budget: u64,
}

impl VisitSimulator {
    pub fn new<T: Scalar>(potential: &Potential<T>, target: usize, budget: u64) -> Result<Self> {
        if target == 0 || target > potential.horizon() + 1 {
            return Err(Error::OutOfRange {
                index: target,
                max: potential.horizon() + 1,
            });
        }
        let up = (0..target).map(|i| potential.up_prob(i).as_f64()).collect();
        Ok(Self { up, target, budget })
    }

    /// Visits to 0 (including time 0) of one trajectory.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        let mut state = 0usize;
        let mut visits = 1u64;
        let mut steps = 0u64;
        loop {
            if steps == self.budget {
                return Err(Error::StepBudget {
                    budget: self.budget,
                    target: self.target,
                    replica: None,
                });
            }
            steps += 1;
            if state == 0 {
                state = 1;
            } else if rng.random::<f64>() < self.up[state] {
                state += 1;
            } else {
                state -= 1;
                if state == 0 {
                    visits += 1;
                }
            }
            if state == self.target {
                return Ok(visits);
            }
        }
    }
}

/// One trajectory with the default step budget, from stream 0 of `seed`.
pub fn simulate_visits<T: Scalar>(
    potential: &Potential<T>,
    target: usize,
    seed: u64,
) -> Result<u64> {
    VisitSimulator::new(potential, target, DEFAULT_STEP_BUDGET)?.run(&mut rng::stream(seed, 0))
}

/// Replica mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Summary of samples in index order; the result does not depend on how they were produced.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len() as f64;
        let mean = compensated_sum(samples.iter().copied()) / n;
        let variance = if samples.len() > 1 {
            compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (variance / n).sqrt(),
            variance,
            replicas: samples.len(),
            seed,
        }
    }
}

/// Per-replica visit counts; replica `r` uses stream `r` of `seed`.
pub fn visit_samples(sim: &VisitSimulator, replicas: usize, seed: u64) -> Result<Vec<u64>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            sim.run(&mut rng::stream(seed, r)).map_err(|e| match e {
                Error::StepBudget { budget, target, .. } => Error::StepBudget {
                    budget,
                    target,
                    replica: Some(r),
                },
                other => other,
            })
        })
        .collect()
}

/// Monte Carlo mean of visits to 0 before hitting `target`.
pub fn mc_visits<T: Scalar>(
    potential: &Potential<T>,
    target: usize,
    replicas: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_visits_with_budget(potential, target, replicas, seed, DEFAULT_STEP_BUDGET)
}

pub fn mc_visits_with_budget<T: Scalar>(
    potential: &Potential<T>,
    target: usize,
    replicas: usize,
    seed: u64,
    budget: u64,
) -> Result<McEstimate> {
    if replicas < 2 {
        return Err(Error::TooFewReplicas {
            min: 2,
            got: replicas,
        });
    }
    let sim = VisitSimulator::new(potential, target, budget)?;
    let counts = visit_samples(&sim, replicas, seed)?;
    let samples: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

/// Monte Carlo estimate of the ballistic speed `E|X_n| / n` of the unfolded walk.
///
/// The walk lives on `Z`; the negative half line mirrors the potential about
/// `-1/2` with `V_{-1} = 0`, so the up-probability at `-j` is the down-probability
/// at `j` and the origin is symmetric. Each replica draws its own potential from
/// `generate`, which must cover at least `n_steps` sites.
pub fn mc_speed<T, G>(generate: G, n_steps: usize, replicas: usize, seed: u64) -> Result<McEstimate>
where
    T: Scalar,
    G: Fn(u64, &mut StreamRng) -> Potential<T> + Sync,
{
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
    }
    if replicas < 2 {
        return Err(Error::TooFewReplicas {
            min: 2,
            got: replicas,
        });
    }
    let env_seed = rng::derive_seed(seed, "speed-environment");
    let walk_seed = rng::derive_seed(seed, "speed-walk");
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let potential = generate(r, &mut rng::stream(env_seed, r));
            if potential.horizon() < n_steps {
                return Err(Error::OutOfRange {
                    index: n_steps,
                    max: potential.horizon(),
                });
            }
            let up: Vec<f64> = (0..=n_steps)
                .map(|i| {
                    if i == 0 {
                        0.5
                    } else {
                        step_prob(potential.increment(i)).as_f64()
                    }
                })
                .collect();
            let mut rng = rng::stream(walk_seed, r);
            let mut x: i64 = 0;
            for _ in 0..n_steps {
                let u: f64 = rng.random();
                let j = x.unsigned_abs() as usize;
                let p_away = up[j];
                let away = u < p_away;
                x += match (x.signum(), away) {
                    (0, _) => {
                        if away {
                            1
                        } else {
                            -1
                        }
                    }
                    (s, true) => s,
                    (s, false) => -s,
                };
            }
            Ok(x.unsigned_abs() as f64 / n_steps as f64)
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples, seed))
}
