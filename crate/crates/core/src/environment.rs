//! The two layers of randomness: renewal locations `tau` and disorder `omega`.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{compensated_sum, Scalar};

/// Zero-mean disorder law of a single `omega_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DisorderSpec<T> {
    Gaussian { sigma: T },
    Rademacher,
    UniformCentered { half_width: T },
}

impl<T: Scalar> DisorderSpec<T> {
    pub fn gaussian(sigma: T) -> Result<Self> {
        Self::Gaussian { sigma }.validated()
    }

    pub fn uniform_centered(half_width: T) -> Result<Self> {
        Self::UniformCentered { half_width }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Gaussian { sigma } if !(sigma > T::zero() && sigma.is_finite()) => Err(
                Error::InvalidDisorder(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            Self::UniformCentered { half_width }
                if !(half_width > T::zero() && half_width.is_finite()) =>
            {
                Err(Error::InvalidDisorder(format!(
                    "uniform half width must be positive, got {half_width}"
                )))
            }
            _ => Ok(self),
        }
    }

    /// `lambda(beta) = log E[exp(beta * omega)]`.
    pub fn log_mgf(&self, beta: T) -> T {
        let half = T::lit(0.5);
        match *self {
            Self::Gaussian { sigma } => half * beta * beta * sigma * sigma,
            Self::Rademacher => {
                // log cosh, stable for large |beta|
                let b = beta.abs();
                b + (-(b + b)).exp().ln_1p() - T::LN_2()
            }
            Self::UniformCentered { half_width } => log_sinhc(half_width * beta),
        }
    }

    pub fn variance(&self) -> T {
        match *self {
            Self::Gaussian { sigma } => sigma * sigma,
            Self::Rademacher => T::one(),
            Self::UniformCentered { half_width } => half_width * half_width / T::lit(3.0),
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            Self::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * T::lit(z)
            }
            Self::Rademacher => {
                if rng.random::<bool>() {
                    T::one()
                } else {
                    -T::one()
                }
            }
            Self::UniformCentered { half_width } => {
                let u: f64 = rng.random_range(-1.0..1.0);
                half_width * T::lit(u)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

/// `log(sinh(x) / x)`, with the removable singularity at 0.
fn log_sinhc<T: Scalar>(x: T) -> T {
    let x = x.abs();
    if x < T::lit(0.1) {
        let x2 = x * x;
        // Taylor series through x^12; truncation is below 1e-19 on this range.
        let coeffs = [
            1.0 / 6.0,
            -1.0 / 180.0,
            1.0 / 2835.0,
            -1.0 / 37800.0,
            1.0 / 467775.0,
            -691.0 / 3831077250.0,
        ];
        let poly = coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x2 + T::lit(*c));
        x2 * poly
    } else if x < T::lit(20.0) {
        (x.sinh() / x).ln()
    } else {
        x + (-(x + x)).exp().neg().ln_1p() - (x + x).ln()
    }
}

/// `n` i.i.d. disorder values from stream 0 of `seed`.
pub fn sample_disorder<T: Scalar>(spec: &DisorderSpec<T>, n: usize, seed: u64) -> Vec<T> {
    spec.sample(n, &mut rng::stream(seed, 0))
}

/// Shape of the inter-arrival law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `K(n) ∝ n^{-(1+alpha)}` on `1..=n_max`.
    PowerLaw { alpha: f64, n_max: usize },
    /// `K(n) ∝ (1-q) q^{n-1}` on `1..=n_max`.
    Geometric { q: f64, n_max: usize },
    /// All mass on `step`.
    Dirac { step: usize },
}

/// Inter-arrival law `K(n) = P(tau_1 = n)` of the renewal process, with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalKernel<T> {
    kind: KernelKind,
    /// `weights[n - 1] = K(n)`
    weights: Vec<T>,
    /// `tails[n] = P(tau_1 > n)` for `n` in `0..=n_max`
    tails: Vec<T>,
}

impl<T: Scalar> RenewalKernel<T> {
    pub fn new(kind: KernelKind) -> Result<Self> {
        let raw: Vec<T> = match kind {
            KernelKind::PowerLaw { alpha, n_max } => {
                if n_max == 0 {
                    return Err(Error::InvalidKernel("n_max must be positive".into()));
                }
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidKernel(format!(
                        "alpha must be finite and >= 0, got {alpha}"
                    )));
                }
                (1..=n_max)
                    .map(|n| T::lit((n as f64).powf(-(1.0 + alpha))))
                    .collect()
            }
            KernelKind::Geometric { q, n_max } => {
                if n_max == 0 {
                    return Err(Error::InvalidKernel("n_max must be positive".into()));
                }
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidKernel(format!(
                        "q must lie in (0,1), got {q}"
                    )));
                }
                (1..=n_max)
                    .map(|n| T::lit((1.0 - q) * q.powi(n as i32 - 1)))
                    .collect()
            }
            KernelKind::Dirac { step } => {
                if step == 0 {
                    return Err(Error::InvalidKernel("dirac step must be positive".into()));
                }
                let mut w = vec![T::zero(); step];
                w[step - 1] = T::one();
                w
            }
        };
        if raw.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidKernel("weights underflow or overflow".into()));
        }
        let total = compensated_sum(raw.iter().copied());
        let weights: Vec<T> = raw.into_iter().map(|w| w / total).collect();
        if matches!(
            kind,
            KernelKind::PowerLaw { .. } | KernelKind::Geometric { .. }
        ) && weights.iter().any(|w| *w <= T::zero())
        {
            return Err(Error::InvalidKernel(
                "weights underflow to zero on the declared support; lower n_max".into(),
            ));
        }
        let mut tails = vec![T::zero(); weights.len() + 1];
        for n in (0..weights.len()).rev() {
            tails[n] = tails[n + 1] + weights[n];
        }
        Ok(Self {
            kind,
            weights,
            tails,
        })
    }

    pub fn power_law(alpha: f64, n_max: usize) -> Result<Self> {
        Self::new(KernelKind::PowerLaw { alpha, n_max })
    }

    pub fn geometric(q: f64, n_max: usize) -> Result<Self> {
        Self::new(KernelKind::Geometric { q, n_max })
    }

    pub fn dirac(step: usize) -> Result<Self> {
        Self::new(KernelKind::Dirac { step })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Largest gap with positive weight.
    pub fn n_max(&self) -> usize {
        self.weights.len()
    }

    /// `K(1..=n_max)`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `K(n)`, zero off the support.
    pub fn weight(&self, n: usize) -> T {
        if n == 0 || n > self.weights.len() {
            T::zero()
        } else {
            self.weights[n - 1]
        }
    }

    /// Gaps carrying positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(i, _)| i + 1)
    }

    /// `E[tau_1]`.
    pub fn mean(&self) -> T {
        compensated_sum(
            self.weights
                .iter()
                .enumerate()
                .map(|(i, w)| T::from_usize_lossy(i + 1) * *w),
        )
    }

    /// `P(tau_1 > n)`.
    pub fn tail(&self, n: usize) -> T {
        self.tails.get(n).copied().unwrap_or_else(T::zero)
    }

    pub fn tails(&self) -> &[T] {
        &self.tails
    }

    pub fn sampler(&self) -> GapSampler {
        let w: Vec<f64> = self.weights.iter().map(|w| w.as_f64()).collect();
        GapSampler {
            alias: WeightedAliasIndex::new(w).expect("normalized kernel weights"),
        }
    }

    /// Kernel table as CSV with header `n,weight,tail`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,weight,tail\n");
        for n in 1..=self.n_max() {
            out.push_str(&format!("{},{},{}\n", n, self.weight(n), self.tail(n)));
        }
        out
    }
}

/// O(1) sampler of renewal gaps.
#[derive(Debug, Clone)]
pub struct GapSampler {
    alias: WeightedAliasIndex<f64>,
}

impl GapSampler {
    pub fn sample_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng) + 1
    }

    /// Renewal points `0 = tau_0 < tau_1 < ...` up to `horizon`.
    pub fn sample_renewal<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<usize> {
        let mut tau = vec![0];
        let mut t = 0usize;
        loop {
            t += self.sample_gap(rng);
            if t > horizon {
                break;
            }
            tau.push(t);
        }
        tau
    }
}

/// Renewal points up to `horizon`, from stream 0 of `seed`.
pub fn sample_renewal<T: Scalar>(
    kernel: &RenewalKernel<T>,
    horizon: usize,
    seed: u64,
) -> Vec<usize> {
    kernel
        .sampler()
        .sample_renewal(horizon, &mut rng::stream(seed, 0))
}

/// One realization of `(tau, omega)` on sites `0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvironment<T>", into = "RawEnvironment<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct SparseEnvironment<T> {
    horizon: usize,
    tau: Vec<usize>,
    omega: Vec<T>,
    contact: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct RawEnvironment<T> {
    horizon: usize,
    tau: Vec<usize>,
    omega: Vec<T>,
}

impl<T: Scalar> TryFrom<RawEnvironment<T>> for SparseEnvironment<T> {
    type Error = Error;

    fn try_from(raw: RawEnvironment<T>) -> Result<Self> {
        Self::new(raw.horizon, raw.tau, raw.omega)
    }
}

impl<T: Scalar> From<SparseEnvironment<T>> for RawEnvironment<T> {
    fn from(env: SparseEnvironment<T>) -> Self {
        Self {
            horizon: env.horizon,
            tau: env.tau,
            omega: env.omega,
        }
    }
}

impl<T: Scalar> SparseEnvironment<T> {
    /// `omega[i - 1]` is the disorder at site `i`.
    pub fn new(horizon: usize, tau: Vec<usize>, omega: Vec<T>) -> Result<Self> {
        if tau.first() != Some(&0) {
            return Err(Error::InvalidEnvironment("tau must start at 0".into()));
        }
        if tau.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidEnvironment(
                "tau must be strictly increasing".into(),
            ));
        }
        if tau.last().is_some_and(|&t| t > horizon) {
            return Err(Error::InvalidEnvironment(format!(
                "tau point beyond horizon {horizon}"
            )));
        }
        if omega.len() != horizon {
            return Err(Error::InvalidEnvironment(format!(
                "omega has {} values, horizon is {horizon}",
                omega.len()
            )));
        }
        let mut contact = vec![false; horizon + 1];
        for &t in &tau {
            contact[t] = true;
        }
        Ok(Self {
            horizon,
            tau,
            omega,
            contact,
        })
    }

    /// Independent `tau` and `omega` draws.
    pub fn sample(
        kernel: &RenewalKernel<T>,
        spec: &DisorderSpec<T>,
        horizon: usize,
        tau_seed: u64,
        omega_seed: u64,
    ) -> Self {
        let tau = sample_renewal(kernel, horizon, tau_seed);
        let omega = sample_disorder(spec, horizon, omega_seed);
        Self::new(horizon, tau, omega).expect("sampled environment is valid")
    }

    /// Fresh `tau` over a given disorder sequence (partially annealed setting).
    pub fn with_disorder<R: Rng + ?Sized>(sampler: &GapSampler, omega: &[T], rng: &mut R) -> Self {
        let horizon = omega.len();
        let tau = sampler.sample_renewal(horizon, rng);
        Self::new(horizon, tau, omega.to_vec()).expect("sampled environment is valid")
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn tau(&self) -> &[usize] {
        &self.tau
    }

    /// Disorder at sites `1..=horizon`.
    pub fn omega_values(&self) -> &[T] {
        &self.omega
    }

    /// Disorder at site `i >= 1`.
    pub fn omega(&self, i: usize) -> T {
        self.omega[i - 1]
    }

    pub fn is_renewal(&self, i: usize) -> bool {
        self.contact.get(i).copied().unwrap_or(false)
    }

    /// Checks that every gap lies in the kernel's support.
    pub fn check_gaps(&self, kernel: &RenewalKernel<T>) -> Result<()> {
        for w in self.tau.windows(2) {
            let gap = w[1] - w[0];
            if kernel.weight(gap) <= T::zero() {
                return Err(Error::InvalidEnvironment(format!(
                    "gap {gap} outside kernel support"
                )));
            }
        }
        Ok(())
    }
}
