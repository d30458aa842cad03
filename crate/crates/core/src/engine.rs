//! Rejection ABC, the c-sample ABCDP loop, and the privacy accountant.
//!
//! ABCDP is the sparse vector technique applied to the stream of distances
//! `ρ(Y*, Y_t)`: the threshold is perturbed with `m ~ Lap(b)` before the loop,
//! every distance with a fresh `ν_t ~ Lap(2b)`, and the loop stops after `c`
//! acceptances. With `RESAMPLE` the threshold noise is re-drawn after every
//! acceptance, which costs `2cΔρ/b` instead of `(c+1)Δρ/b`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::RngCore;

use crate::distance::{Dataset, DistanceSpec, PreparedDistance};
use crate::error::{invalid, Error, Result};
use crate::noise::LaplaceScale;

/// One `(θ_t, Y_t)` pair drawn in the public simulation phase. Indices start
/// at 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProposalRecord {
    pub index: usize,
    pub theta: Vec<f64>,
    pub pseudo_data: Dataset,
}

/// Checks that indices run 1..=T.
pub fn validate_proposals(proposals: &[ProposalRecord]) -> Result<()> {
    for (i, p) in proposals.iter().enumerate() {
        if p.index != i + 1 {
            return Err(invalid(alloc::format!(
                "proposal at position {i} has index {}, expected {}",
                p.index,
                i + 1
            )));
        }
    }
    Ok(())
}

#[inline]
fn budget_factor(c: usize, resample: bool) -> f64 {
    if resample {
        2.0 * c as f64
    } else {
        (c + 1) as f64
    }
}

/// Laplace scale that makes a `c`-sample run `ε_total`-DP.
///
/// `ε_total = ∞` yields the noiseless sentinel.
pub fn noise_scale_from_budget(
    epsilon_total: f64,
    c: usize,
    resample: bool,
    delta_rho: f64,
) -> Result<LaplaceScale> {
    if epsilon_total.is_nan() || epsilon_total <= 0.0 {
        return Err(invalid(alloc::format!("ε_total must be positive, got {epsilon_total}")));
    }
    if c == 0 {
        return Err(invalid("c must be at least 1"));
    }
    if !(delta_rho.is_finite() && delta_rho > 0.0) {
        return Err(invalid(alloc::format!("Δρ must be positive and finite, got {delta_rho}")));
    }
    if epsilon_total.is_infinite() {
        return Ok(LaplaceScale::NONE);
    }
    LaplaceScale::new(budget_factor(c, resample) * delta_rho / epsilon_total)
}

/// Privacy loss of a run at scale `b`; infinite when `b = 0`.
pub fn epsilon_from_scale(scale: LaplaceScale, c: usize, resample: bool, delta_rho: f64) -> f64 {
    if scale.is_noiseless() {
        f64::INFINITY
    } else {
        budget_factor(c, resample) * delta_rho / scale.get()
    }
}

/// `ε_total`, the acceptance quota `c`, the threshold policy and the derived
/// noise scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon_total: f64,
    c: usize,
    resample: bool,
    delta_rho: f64,
    scale: LaplaceScale,
}

impl PrivacyBudget {
    pub fn new(epsilon_total: f64, c: usize, resample: bool, delta_rho: f64) -> Result<Self> {
        let scale = noise_scale_from_budget(epsilon_total, c, resample, delta_rho)?;
        Ok(PrivacyBudget { epsilon_total, c, resample, delta_rho, scale })
    }

    /// Budget for the distance `spec` on an observed dataset of size `n`.
    pub fn for_distance(
        epsilon_total: f64,
        c: usize,
        resample: bool,
        spec: &DistanceSpec,
        n: usize,
    ) -> Result<Self> {
        PrivacyBudget::new(epsilon_total, c, resample, spec.sensitivity(n)?)
    }

    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }
    pub fn c(&self) -> usize {
        self.c
    }
    pub fn resample(&self) -> bool {
        self.resample
    }
    pub fn delta_rho(&self) -> f64 {
        self.delta_rho
    }
    pub fn scale(&self) -> LaplaceScale {
        self.scale
    }
}

/// What the accountant reports after a run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BudgetLedger {
    /// Privacy loss re-derived from `b`; `None` encodes `∞`.
    pub epsilon_total: Option<f64>,
    pub c: usize,
    pub resample: bool,
    pub noise_scale: f64,
    pub delta_rho: f64,
    pub composition: String,
}

/// Re-derives `ε_total` from the budget's noise scale and checks it against
/// the declared value to `1e-12` (relative for `ε_total > 1`).
pub fn accountant_report(budget: &PrivacyBudget, delta_rho: f64) -> Result<BudgetLedger> {
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !rel(budget.delta_rho, delta_rho) {
        return Err(Error::ContractViolation(alloc::format!(
            "budget calibrated for Δρ = {} but charged against Δρ = {delta_rho}",
            budget.delta_rho
        )));
    }
    let spent = epsilon_from_scale(budget.scale, budget.c, budget.resample, delta_rho);
    let consistent = if spent.is_infinite() || budget.epsilon_total.is_infinite() {
        spent == budget.epsilon_total
    } else {
        rel(spent, budget.epsilon_total)
    };
    if !consistent {
        return Err(Error::ContractViolation(alloc::format!(
            "noise scale {} re-derives ε_total = {spent}, declared {}",
            budget.scale.get(),
            budget.epsilon_total
        )));
    }
    Ok(BudgetLedger {
        epsilon_total: spent.is_finite().then_some(spent),
        c: budget.c,
        resample: budget.resample,
        noise_scale: budget.scale.get(),
        delta_rho,
        composition: String::from("linear"),
    })
}

/// Raw noise of one loop step; only recorded for white-box tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraw {
    pub threshold_noise: f64,
    pub distance_noise: f64,
}

/// Output indicators of one run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndicatorTrace {
    /// `τ_t` for `t = 1..=T'`, where `T' < T` after an early stop.
    pub indicators: Vec<bool>,
    /// 1-based indices `t` with `τ_t = 1`.
    pub accepted: Vec<usize>,
    pub terminated_early: bool,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub noise_log: Option<Vec<NoiseDraw>>,
}

impl IndicatorTrace {
    pub fn accepted_count(&self) -> usize {
        self.accepted.len()
    }

    /// Indicator at 1-based `t`, with unvisited steps reading as 0.
    pub fn indicator(&self, t: usize) -> bool {
        t >= 1 && self.indicators.get(t - 1).copied().unwrap_or(false)
    }
}

/// Non-private threshold pass: `τ_t = 1` iff `ρ_t ≤ ε_abc`, stopping after
/// `c_stop` acceptances when given.
pub fn threshold_pass(distances: &[f64], epsilon_abc: f64, c_stop: Option<usize>) -> IndicatorTrace {
    let mut trace = IndicatorTrace::default();
    for (i, &rho) in distances.iter().enumerate() {
        let accept = rho <= epsilon_abc;
        trace.indicators.push(accept);
        if accept {
            trace.accepted.push(i + 1);
            if c_stop.is_some_and(|c| trace.accepted.len() >= c) {
                trace.terminated_early = i + 1 < distances.len();
                break;
            }
        }
    }
    trace
}

/// Parameters of the sparse-vector pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvtParams {
    pub epsilon_abc: f64,
    pub c: usize,
    pub scale: LaplaceScale,
    pub resample: bool,
    pub log_noise: bool,
}

impl SvtParams {
    pub fn from_budget(epsilon_abc: f64, budget: &PrivacyBudget) -> Self {
        SvtParams {
            epsilon_abc,
            c: budget.c,
            scale: budget.scale,
            resample: budget.resample,
            log_noise: false,
        }
    }
}

/// The ABCDP loop over precomputed distances.
///
/// The threshold noise is drawn once before the loop and, with `resample`,
/// again right after each acceptance. Every step draws distance noise at
/// scale `2b`. At `b = 0` no randomness is consumed and the output equals
/// [`threshold_pass`] with `c_stop = c`.
pub fn sparse_vector_pass<R: RngCore + ?Sized>(
    distances: &[f64],
    params: &SvtParams,
    rng: &mut R,
) -> IndicatorTrace {
    let distance_scale = params.scale.doubled();
    let mut trace = IndicatorTrace {
        noise_log: params.log_noise.then(Vec::new),
        ..IndicatorTrace::default()
    };
    let mut threshold_noise = params.scale.sample(rng);
    for (i, &rho) in distances.iter().enumerate() {
        let distance_noise = distance_scale.sample(rng);
        if let Some(log) = trace.noise_log.as_mut() {
            log.push(NoiseDraw { threshold_noise, distance_noise });
        }
        let accept = rho + distance_noise <= params.epsilon_abc + threshold_noise;
        trace.indicators.push(accept);
        if accept {
            trace.accepted.push(i + 1);
            if trace.accepted.len() >= params.c {
                trace.terminated_early = i + 1 < distances.len();
                break;
            }
            if params.resample {
                threshold_noise = params.scale.sample(rng);
            }
        }
    }
    trace
}

/// Result of one inference run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AbcResult {
    pub trace: IndicatorTrace,
    pub accepted_thetas: Vec<Vec<f64>>,
    /// Mean of the accepted parameters; `None` when nothing was accepted.
    pub posterior_mean: Option<Vec<f64>>,
    /// `ρ_t` for every proposal. Only populated for non-private runs or runs
    /// explicitly marked as synthetic.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub distances: Option<Vec<f64>>,
}

impl AbcResult {
    pub fn from_trace(
        trace: IndicatorTrace,
        proposals: &[ProposalRecord],
        distances: Option<Vec<f64>>,
    ) -> Self {
        let accepted_thetas: Vec<Vec<f64>> =
            trace.accepted.iter().map(|&t| proposals[t - 1].theta.clone()).collect();
        let posterior_mean = mean_vector(&accepted_thetas);
        AbcResult { trace, accepted_thetas, posterior_mean, distances }
    }
}

/// Component-wise mean; `None` for an empty collection.
pub fn mean_vector(rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let first = rows.first()?;
    let mut acc = alloc::vec![0.0; first.len()];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Some(acc)
}

/// `ρ(Y*, Y_t)` for every proposal, in order.
pub fn compute_distances(proposals: &[ProposalRecord], distance: &PreparedDistance) -> Result<Vec<f64>> {
    proposals.iter().map(|p| distance.distance(&p.pseudo_data)).collect()
}

/// Plain rejection ABC. All distances are recorded.
pub fn run_rejection_abc(
    proposals: &[ProposalRecord],
    observed: &Dataset,
    spec: &DistanceSpec,
    epsilon_abc: f64,
    c_stop: Option<usize>,
) -> Result<AbcResult> {
    validate_proposals(proposals)?;
    let distances = compute_distances(proposals, &spec.prepare(observed)?)?;
    let trace = threshold_pass(&distances, epsilon_abc, c_stop);
    Ok(AbcResult::from_trace(trace, proposals, Some(distances)))
}

/// Switches for [`run_abcdp`] that are only meaningful on synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// The observed data is synthetic, so distances may be returned.
    pub synthetic: bool,
    /// Record every noise draw in the trace.
    pub log_noise: bool,
}

/// The c-sample ABCDP algorithm.
///
/// `budget` must have been calibrated with the sensitivity of `spec` at
/// `N = |observed|`; a mismatch is a contract violation. Distances are only
/// returned when the run is noiseless or `options.synthetic` is set, and the
/// noise log only when `options.log_noise` is set.
pub fn run_abcdp<R: RngCore + ?Sized>(
    proposals: &[ProposalRecord],
    observed: &Dataset,
    spec: &DistanceSpec,
    epsilon_abc: f64,
    budget: &PrivacyBudget,
    rng: &mut R,
    options: RunOptions,
) -> Result<AbcResult> {
    if proposals.is_empty() {
        return Err(invalid("ABCDP needs at least one proposal"));
    }
    validate_proposals(proposals)?;
    let delta_rho = spec.sensitivity(observed.len())?;
    accountant_report(budget, delta_rho)?;
    let distances = compute_distances(proposals, &spec.prepare(observed)?)?;
    let params = SvtParams { log_noise: options.log_noise, ..SvtParams::from_budget(epsilon_abc, budget) };
    let trace = sparse_vector_pass(&distances, &params, rng);
    let expose = budget.scale.is_noiseless() || options.synthetic;
    Ok(AbcResult::from_trace(trace, proposals, expose.then_some(distances)))
}
