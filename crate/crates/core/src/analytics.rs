//! Analytic error predictions for ABCDP.
//!
//! Given the realized distances `ρ_t`, the probability that the private
//! indicator disagrees with the non-private one is `G_b(|ρ_t - ε_abc|)`.
//! Summing those flip probabilities bounds the expected error between the
//! ABCDP and rejection-ABC posterior expectations of any test function, and a
//! Markov-type argument on the exponential part gives a tail bound.
//!
//! These quantities need the raw distances, so they are only meant for
//! synthetic or benchmark data.

use alloc::vec::Vec;

use libm::{exp, fabs, pow, sqrt};

use crate::engine::{noise_scale_from_budget, IndicatorTrace};
use crate::error::{invalid, Error, Result};
use crate::noise::{LaplaceScale, NoiseDiffDistribution};

/// Probability that ABCDP and rejection ABC disagree on a proposal at
/// distance `rho`. Zero when `b = 0`.
pub fn flip_probability(rho: f64, epsilon_abc: f64, b: LaplaceScale) -> f64 {
    match NoiseDiffDistribution::new(b) {
        Ok(z) => z.tail_unchecked(fabs(rho - epsilon_abc)),
        Err(_) => 0.0,
    }
}

/// Flip probabilities of a sequence of realized distances.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipProfile {
    pub rho_values: Vec<f64>,
    pub epsilon_abc: f64,
    pub scale: LaplaceScale,
    pub flip_probs: Vec<f64>,
}

impl FlipProfile {
    pub fn new(rho_values: Vec<f64>, epsilon_abc: f64, scale: LaplaceScale) -> Self {
        let flip_probs = rho_values
            .iter()
            .map(|&r| flip_probability(r, epsilon_abc, scale))
            .collect();
        FlipProfile { rho_values, epsilon_abc, scale, flip_probs }
    }

    pub fn total_flip(&self) -> f64 {
        self.flip_probs.iter().sum()
    }

    pub fn mean_flip(&self) -> f64 {
        if self.flip_probs.is_empty() {
            0.0
        } else {
            self.total_flip() / self.flip_probs.len() as f64
        }
    }

    /// `Σ_t exp(-|ρ_t - ε_abc| / 2b)`; zero when `b = 0`.
    pub fn exponential_sum(&self) -> f64 {
        let b = self.scale.get();
        if b == 0.0 {
            return 0.0;
        }
        self.rho_values
            .iter()
            .map(|&r| exp(-fabs(r - self.epsilon_abc) / (2.0 * b)))
            .sum()
    }
}

/// Values `f(θ_t)` of a vector-valued test function over the proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFunctional {
    values: Vec<Vec<f64>>,
    k_t: f64,
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

impl PosteriorFunctional {
    pub fn evaluate<F>(thetas: &[Vec<f64>], f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        Self::from_values(thetas.iter().map(|t| f(t)).collect())
    }

    /// `f = identity`, i.e. the posterior mean.
    pub fn identity(thetas: &[Vec<f64>]) -> Result<Self> {
        Self::from_values(thetas.to_vec())
    }

    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        let k_t = values.iter().map(|v| norm(v)).fold(0.0, f64::max);
        if !k_t.is_finite() {
            return Err(invalid("test function is unbounded over the proposals"));
        }
        Ok(PosteriorFunctional { values, k_t })
    }

    /// `K_T = max_t ‖f(θ_t)‖₂`.
    pub fn k_t(&self) -> f64 {
        self.k_t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(1/c) Σ_t f(θ_t) τ_t`; `None` when nothing was accepted.
    pub fn accepted_mean(&self, trace: &IndicatorTrace) -> Option<Vec<f64>> {
        let (&first, rest) = trace.accepted.split_first()?;
        let mut acc = self.values[first - 1].clone();
        for &t in rest {
            for (a, v) in acc.iter_mut().zip(&self.values[t - 1]) {
                *a += v;
            }
        }
        let c = trace.accepted.len() as f64;
        acc.iter_mut().for_each(|a| *a /= c);
        Some(acc)
    }

    /// `‖(1/c) Σ f τ̃ - (1/c') Σ f τ‖₂`; `None` if either run accepted nothing.
    pub fn realized_error(&self, private: &IndicatorTrace, non_private: &IndicatorTrace) -> Option<f64> {
        let a = self.accepted_mean(private)?;
        let b = self.accepted_mean(non_private)?;
        Some(sqrt(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum()))
    }
}

fn check_c_prime(c_prime: usize) -> Result<()> {
    if c_prime == 0 {
        return Err(Error::UndefinedBound("the non-private run accepted no samples (c' = 0)".into()));
    }
    Ok(())
}

/// `(2 K_T / c') Σ_t G_b(|ρ_t - ε_abc|)`.
pub fn expected_error_bound(
    profile: &FlipProfile,
    functional: &PosteriorFunctional,
    c_prime: usize,
) -> Result<f64> {
    check_c_prime(c_prime)?;
    Ok(2.0 * functional.k_t() / c_prime as f64 * profile.total_flip())
}

/// `max(0, 1 - (4 K_T / 3ac') Σ_t exp(-|ρ_t - ε_abc| / 2b))`, a lower bound on
/// the probability that the realized error is at most `a`.
pub fn tail_error_bound(
    profile: &FlipProfile,
    functional: &PosteriorFunctional,
    c_prime: usize,
    a: f64,
) -> Result<f64> {
    check_c_prime(c_prime)?;
    if !(a > 0.0) {
        return Err(invalid(alloc::format!("tail level a must be positive, got {a}")));
    }
    let slack = 4.0 * functional.k_t() / (3.0 * a * c_prime as f64) * profile.exponential_sum();
    Ok((1.0 - slack).clamp(0.0, 1.0))
}

/// The error level `a` at which [`tail_error_bound`] equals `level`.
pub fn tail_level_for_probability(
    profile: &FlipProfile,
    functional: &PosteriorFunctional,
    c_prime: usize,
    level: f64,
) -> Result<f64> {
    check_c_prime(c_prime)?;
    if !(0.0..1.0).contains(&level) {
        return Err(invalid("probability level must lie in [0, 1)"));
    }
    Ok(4.0 * functional.k_t() / (3.0 * c_prime as f64) * profile.exponential_sum() / (1.0 - level))
}

/// Bounds next to a realized paired-run error.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorBoundReport {
    pub expected_error_bound: f64,
    /// `(a, lower bound on P(error ≤ a))` pairs.
    pub tail_bounds: Vec<(f64, f64)>,
    pub realized_error: Option<f64>,
    pub c: usize,
    pub c_prime: usize,
}

impl ErrorBoundReport {
    pub fn build(
        profile: &FlipProfile,
        functional: &PosteriorFunctional,
        private: &IndicatorTrace,
        non_private: &IndicatorTrace,
        tail_levels: &[f64],
    ) -> Result<Self> {
        let c_prime = non_private.accepted_count();
        let expected_error_bound = expected_error_bound(profile, functional, c_prime)?;
        let tail_bounds = tail_levels
            .iter()
            .map(|&a| tail_error_bound(profile, functional, c_prime, a).map(|p| (a, p)))
            .collect::<Result<_>>()?;
        Ok(ErrorBoundReport {
            expected_error_bound,
            tail_bounds,
            realized_error: functional.realized_error(private, non_private),
            c: private.accepted_count(),
            c_prime,
        })
    }
}

/// One cell of the flip-probability grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlipGridRow {
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
    pub c: usize,
    pub epsilon_total: f64,
    pub mean_flip_prob: f64,
}

/// Mean flip probability over `rho_samples` for every `(N, c, ε_total)`, with
/// `Δρ = 2√B_k / N`. Rows are ordered by `N`, then `c`, then `ε_total`, each
/// in the order given.
pub fn flip_profile_grid(
    rho_samples: &[f64],
    epsilon_abc: f64,
    n_grid: &[usize],
    c_grid: &[usize],
    eps_total_grid: &[f64],
    resample: bool,
    kernel_bound: f64,
) -> Result<Vec<FlipGridRow>> {
    if rho_samples.is_empty() || n_grid.is_empty() || c_grid.is_empty() || eps_total_grid.is_empty() {
        return Err(invalid("flip grid axes and ρ samples must be nonempty"));
    }
    if !(kernel_bound > 0.0) {
        return Err(invalid("kernel bound must be positive"));
    }
    let mut rows = Vec::with_capacity(n_grid.len() * c_grid.len() * eps_total_grid.len());
    for &n in n_grid {
        if n == 0 {
            return Err(invalid("dataset sizes must be positive"));
        }
        let delta_rho = 2.0 * sqrt(kernel_bound) / n as f64;
        for &c in c_grid {
            for &eps in eps_total_grid {
                let b = noise_scale_from_budget(eps, c, resample, delta_rho)?;
                let mean = rho_samples
                    .iter()
                    .map(|&r| flip_probability(r, epsilon_abc, b))
                    .sum::<f64>()
                    / rho_samples.len() as f64;
                rows.push(FlipGridRow { n, c, epsilon_total: eps, mean_flip_prob: mean });
            }
        }
    }
    Ok(rows)
}

/// `count` values spaced log-uniformly over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..count)
            .map(|i| lo * pow(hi / lo, i as f64 / (count - 1) as f64))
            .collect(),
    }
}
