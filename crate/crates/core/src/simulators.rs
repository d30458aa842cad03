//! Priors and generative models.
//!
//! Three models are provided behind [`SimulatorSpec`]:
//!
//! - a mixture of five unit-width uniforms with Dirichlet mixing weights,
//! - a cubic outbreak curve evaluated on a fixed time grid,
//! - a two-phase stochastic birth-death epidemic whose output is the
//!   multiset of transmission-cluster sizes of the first `n` cases.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Gamma, Normal};

use crate::distance::Dataset;
use crate::engine::ProposalRecord;
use crate::error::{invalid, Error, Result};
use crate::seed::stream_rng;

/// A bound of a uniform prior: a constant, or an affine function of
/// parameters drawn earlier in the same vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Bound {
    Const(f64),
    Affine { intercept: f64, terms: Vec<(usize, f64)> },
}

impl Bound {
    fn eval(&self, earlier: &[f64]) -> Result<f64> {
        match self {
            Bound::Const(v) => Ok(*v),
            Bound::Affine { intercept, terms } => terms.iter().try_fold(*intercept, |acc, &(i, w)| {
                earlier
                    .get(i)
                    .map(|x| acc + w * x)
                    .ok_or_else(|| invalid(alloc::format!("bound refers to parameter {i} not yet drawn")))
            }),
        }
    }
}

/// Prior of one parameter block. A Dirichlet block fills `alpha.len()`
/// consecutive coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "dist", rename_all = "snake_case"))]
pub enum ParamPrior {
    Dirichlet { alpha: Vec<f64> },
    Normal { mean: f64, sd: f64 },
    Uniform { lo: Bound, hi: Bound },
}

/// Joint prior as an ordered list of blocks.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct PriorSpec {
    pub params: Vec<ParamPrior>,
}

/// One prior draw and how many whole-vector redraws it took.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSample {
    pub theta: Vec<f64>,
    pub redraws: u32,
}

/// Redraw limit for priors whose derived bounds can invert.
pub const MAX_PRIOR_REDRAWS: u32 = 10_000;

impl PriorSpec {
    /// `Dirichlet(1, 1, 1, 1, 1)` over the mixing weights.
    pub fn uniform_mixture() -> Self {
        PriorSpec { params: alloc::vec![ParamPrior::Dirichlet { alpha: alloc::vec![1.0; 5] }] }
    }

    /// `a_i ~ N(0, 1)` for the four polynomial coefficients.
    pub fn polynomial_outbreak() -> Self {
        PriorSpec { params: alloc::vec![ParamPrior::Normal { mean: 0.0, sd: 1.0 }; 4] }
    }

    /// `(β, R1, t1, R2)` with `R2` bounded above by `(1 - 0.05 R1) / 0.95`.
    pub fn birth_death() -> Self {
        PriorSpec {
            params: alloc::vec![
                ParamPrior::Normal { mean: 200.0, sd: 30.0 },
                ParamPrior::Uniform { lo: Bound::Const(1.01), hi: Bound::Const(20.0) },
                ParamPrior::Uniform { lo: Bound::Const(0.01), hi: Bound::Const(30.0) },
                ParamPrior::Uniform {
                    lo: Bound::Const(0.01),
                    hi: Bound::Affine { intercept: 1.0 / 0.95, terms: alloc::vec![(1, -0.05 / 0.95)] },
                },
            ],
        }
    }

    /// Length of the parameter vector.
    pub fn dim(&self) -> usize {
        self.params
            .iter()
            .map(|p| match p {
                ParamPrior::Dirichlet { alpha } => alpha.len(),
                _ => 1,
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.params {
            match p {
                ParamPrior::Dirichlet { alpha } => {
                    if alpha.is_empty() || alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                        return Err(invalid("Dirichlet concentrations must be positive"));
                    }
                }
                ParamPrior::Normal { mean, sd } => {
                    if !mean.is_finite() || !(sd.is_finite() && *sd > 0.0) {
                        return Err(invalid("normal prior needs finite mean and positive sd"));
                    }
                }
                ParamPrior::Uniform { lo: Bound::Const(lo), hi: Bound::Const(hi) } if !(lo < hi) => {
                    return Err(invalid(alloc::format!("uniform prior needs lo < hi, got [{lo}, {hi}]")));
                }
                ParamPrior::Uniform { .. } => {}
            }
        }
        Ok(())
    }

    /// One draw of θ. A derived uniform whose bounds come out inverted
    /// triggers a redraw of the whole vector.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<PriorSample> {
        let mut redraws = 0;
        loop {
            if let Some(theta) = self.try_sample(rng)? {
                return Ok(PriorSample { theta, redraws });
            }
            redraws += 1;
            if redraws > MAX_PRIOR_REDRAWS {
                return Err(Error::RedrawLimit(MAX_PRIOR_REDRAWS));
            }
        }
    }

    fn try_sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Option<Vec<f64>>> {
        let mut theta = Vec::with_capacity(self.dim());
        for p in &self.params {
            match p {
                ParamPrior::Dirichlet { alpha } => {
                    let start = theta.len();
                    for &a in alpha {
                        let g = Gamma::new(a, 1.0).map_err(|e| invalid(alloc::format!("{e}")))?;
                        theta.push(g.sample(rng));
                    }
                    let total: f64 = theta[start..].iter().sum();
                    theta[start..].iter_mut().for_each(|x| *x /= total);
                }
                ParamPrior::Normal { mean, sd } => {
                    let n = Normal::new(*mean, *sd).map_err(|e| invalid(alloc::format!("{e}")))?;
                    theta.push(n.sample(rng));
                }
                ParamPrior::Uniform { lo, hi } => {
                    let (lo, hi) = (lo.eval(&theta)?, hi.eval(&theta)?);
                    if !(lo < hi) {
                        return Ok(None);
                    }
                    theta.push(rng.random_range(lo..hi));
                }
            }
        }
        Ok(Some(theta))
    }
}

/// Draws from `Σ_i θ_i Uniform([i-1, i])`, `i = 1..=θ.len()`.
pub fn simulate_uniform_mixture<R: RngCore + ?Sized>(theta: &[f64], n: usize, rng: &mut R) -> Result<Dataset> {
    let total: f64 = theta.iter().sum();
    if theta.is_empty() || theta.iter().any(|&w| !(w >= -1e-9)) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid("mixture weights must lie on the simplex"));
    }
    if n == 0 {
        return Err(invalid("need at least one draw"));
    }
    let last = theta.len() - 1;
    let points = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut component = last;
            for (i, &w) in theta.iter().enumerate() {
                acc += w.max(0.0);
                if u < acc {
                    component = i;
                    break;
                }
            }
            // Guard against weights rounding to an empty final component.
            while component > 0 && theta[component] <= 0.0 {
                component -= 1;
            }
            component as f64 + rng.random::<f64>()
        })
        .collect();
    Dataset::from_scalars(points)
}

/// `y(t) = a3 + a2 t + a1 t² + a0 t³` with `a = [a0, a1, a2, a3]`.
pub fn simulate_polynomial_outbreak(a: &[f64], t_grid: &[f64]) -> Result<Dataset> {
    let [a0, a1, a2, a3] = *a else {
        return Err(Error::DimensionMismatch { expected: 4, found: a.len() });
    };
    if t_grid.is_empty() {
        return Err(invalid("time grid must be nonempty"));
    }
    Dataset::from_scalars(t_grid.iter().map(|&t| a3 + t * (a2 + t * (a1 + t * a0))).collect())
}

/// Default grid `0, 1, ..., 17`.
pub fn default_outbreak_grid() -> Vec<f64> {
    (0..18).map(f64::from).collect()
}

/// Fixed settings of the birth-death simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BirthDeathParams {
    /// Rate of new introductions, each starting a new cluster.
    pub introduction_rate: f64,
    /// Multiplies `β` to give the per-individual removal rate; transmission
    /// happens at `R` times that.
    pub rate_per_burden: f64,
    /// Hard cap on simulated events.
    pub event_cap: u64,
}

impl Default for BirthDeathParams {
    fn default() -> Self {
        BirthDeathParams { introduction_rate: 1.0, rate_per_burden: 0.005, event_cap: 1_000_000 }
    }
}

/// Cluster sizes of the first `n` cases.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathOutput {
    /// Sizes sorted in decreasing order.
    pub clusters: Dataset,
    /// The event cap was reached before `n` cases.
    pub truncated: bool,
}

/// Fenwick tree over per-cluster active counts.
#[derive(Debug)]
struct CountTree {
    tree: Vec<u64>,
    total: u64,
}

impl CountTree {
    fn new(capacity: usize) -> Self {
        CountTree { tree: alloc::vec![0; capacity + 1], total: 0 }
    }

    fn add(&mut self, idx: usize, delta: i64) {
        self.total = self.total.wrapping_add_signed(delta);
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    /// Index of the cluster holding the `k`-th active individual (0-based).
    fn find(&self, mut k: u64) -> usize {
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Two-phase linear birth-death epidemic with cluster bookkeeping.
///
/// `theta = (β, R1, t1, R2)`. Introductions arrive at a constant rate and
/// each seeds a new cluster with one case. An infectious individual is
/// removed at rate `κβ` and transmits within its cluster at rate `κβR`,
/// where `R = R1` while the cluster is younger than `t1` and `R2` afterwards.
/// The process runs (exactly, event by event) until `n` cases have occurred
/// or `event_cap` events have been simulated.
pub fn simulate_birth_death<R: RngCore + ?Sized>(
    theta: &[f64],
    n: usize,
    params: &BirthDeathParams,
    rng: &mut R,
) -> Result<BirthDeathOutput> {
    let [beta, r1, t1, r2] = *theta else {
        return Err(Error::DimensionMismatch { expected: 4, found: theta.len() });
    };
    if !(beta > 0.0 && r1 > 0.0 && r2 > 0.0 && t1 >= 0.0) || !(beta.is_finite() && r1.is_finite() && r2.is_finite())
    {
        return Err(invalid(alloc::format!(
            "birth-death needs β, R1, R2 > 0 and t1 ≥ 0, got {theta:?}"
        )));
    }
    if n == 0 {
        return Err(invalid("need at least one case"));
    }
    if !(params.introduction_rate > 0.0 && params.rate_per_burden > 0.0) {
        return Err(invalid("birth-death rates must be positive"));
    }
    let unit = params.rate_per_burden * beta;

    let mut sizes: Vec<u64> = Vec::new();
    let mut phase_one = CountTree::new(n);
    let mut phase_two = CountTree::new(n);
    let mut switches: VecDeque<(f64, usize)> = VecDeque::new();
    let mut time = 0.0;
    let mut cases = 0usize;
    let mut events = 0u64;
    let mut truncated = false;

    let introduce = |time: f64, sizes: &mut Vec<u64>, phase_one: &mut CountTree, switches: &mut VecDeque<_>| {
        let id = sizes.len();
        sizes.push(1);
        phase_one.add(id, 1);
        switches.push_back((time + t1, id));
    };
    introduce(time, &mut sizes, &mut phase_one, &mut switches);
    cases += 1;

    while cases < n {
        let (a1, a2) = (phase_one.total as f64, phase_two.total as f64);
        let rate = params.introduction_rate + unit * ((r1 + 1.0) * a1 + (r2 + 1.0) * a2);
        let wait: f64 = rng.sample::<f64, _>(Exp1) / rate;
        if let Some(&(switch_at, id)) = switches.front() {
            if time + wait >= switch_at {
                // Memoryless: restart the clock at the phase change.
                time = switch_at;
                switches.pop_front();
                let active = phase_one.tree_count(id);
                if active > 0 {
                    phase_one.add(id, -(active as i64));
                    phase_two.add(id, active as i64);
                }
                continue;
            }
        }
        time += wait;
        events += 1;
        if events > params.event_cap {
            truncated = true;
            break;
        }
        let mut u = rng.random::<f64>() * rate;
        if u < params.introduction_rate {
            introduce(time, &mut sizes, &mut phase_one, &mut switches);
            cases += 1;
            continue;
        }
        u -= params.introduction_rate;
        let (tree, r, count) = if a2 == 0.0 || (a1 > 0.0 && u < unit * (r1 + 1.0) * a1) {
            (&mut phase_one, r1, a1)
        } else {
            u -= unit * (r1 + 1.0) * a1;
            (&mut phase_two, r2, a2)
        };
        let per_individual = unit * (r + 1.0);
        let k = ((u / per_individual) as u64).min(count as u64 - 1);
        let cluster = tree.find(k);
        // Within one individual's rate slot: transmission first, then removal.
        let within = u - k as f64 * per_individual;
        if within < unit * r {
            tree.add(cluster, 1);
            sizes[cluster] += 1;
            cases += 1;
        } else {
            tree.add(cluster, -1);
        }
    }

    let mut out: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    out.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    Ok(BirthDeathOutput { clusters: Dataset::from_scalars(out)?, truncated })
}

impl CountTree {
    fn tree_count(&self, idx: usize) -> u64 {
        self.prefix(idx + 1) - self.prefix(idx)
    }

    fn prefix(&self, mut i: usize) -> u64 {
        let mut acc = 0u64;
        while i > 0 {
            acc = acc.wrapping_add(self.tree[i]);
            i &= i - 1;
        }
        acc
    }
}

/// Which generative model a simulator runs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum Model {
    UniformMixture,
    PolynomialOutbreak {
        #[cfg_attr(feature = "serde", serde(default = "default_outbreak_grid"))]
        t_grid: Vec<f64>,
    },
    BirthDeath {
        #[cfg_attr(feature = "serde", serde(default))]
        params: BirthDeathParams,
    },
}

/// A model, its prior, and the pseudo-dataset size.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulatorSpec {
    pub model: Model,
    pub prior: PriorSpec,
    pub n_pseudo: usize,
}

impl SimulatorSpec {
    pub fn uniform_mixture(n_pseudo: usize) -> Self {
        SimulatorSpec { model: Model::UniformMixture, prior: PriorSpec::uniform_mixture(), n_pseudo }
    }

    pub fn polynomial_outbreak() -> Self {
        let t_grid = default_outbreak_grid();
        SimulatorSpec {
            n_pseudo: t_grid.len(),
            model: Model::PolynomialOutbreak { t_grid },
            prior: PriorSpec::polynomial_outbreak(),
        }
    }

    pub fn birth_death(n_pseudo: usize) -> Self {
        SimulatorSpec {
            model: Model::BirthDeath { params: BirthDeathParams::default() },
            prior: PriorSpec::birth_death(),
            n_pseudo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pseudo == 0 {
            return Err(invalid("n_pseudo must be at least 1"));
        }
        self.prior.validate()?;
        let expected = match &self.model {
            Model::UniformMixture => None,
            Model::PolynomialOutbreak { t_grid } => {
                if t_grid.is_empty() {
                    return Err(invalid("polynomial time grid must be nonempty"));
                }
                Some(4)
            }
            Model::BirthDeath { .. } => Some(4),
        };
        match expected {
            Some(d) if d != self.prior.dim() => Err(Error::DimensionMismatch { expected: d, found: self.prior.dim() }),
            _ => Ok(()),
        }
    }

    /// One pseudo-dataset of `n` points (cases, for the birth-death model).
    pub fn simulate_n<R: RngCore + ?Sized>(&self, theta: &[f64], n: usize, rng: &mut R) -> Result<Dataset> {
        match &self.model {
            Model::UniformMixture => simulate_uniform_mixture(theta, n, rng),
            Model::PolynomialOutbreak { t_grid } => simulate_polynomial_outbreak(theta, t_grid),
            Model::BirthDeath { params } => Ok(simulate_birth_death(theta, n, params, rng)?.clusters),
        }
    }

    pub fn simulate<R: RngCore + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Result<Dataset> {
        self.simulate_n(theta, self.n_pseudo, rng)
    }
}

/// Stream name of per-record proposal generators.
pub const PROPOSAL_STREAM: &str = "proposal";
/// Stream name of the observed-data generator.
pub const OBSERVED_STREAM: &str = "observed";

/// Record `index` (1-based) of a proposal set; independent of all others.
pub fn build_proposal(spec: &SimulatorSpec, index: usize, seed: u64) -> Result<ProposalRecord> {
    let mut rng = stream_rng(seed, index as u64, PROPOSAL_STREAM);
    let theta = spec.prior.sample(&mut rng)?.theta;
    let pseudo_data = spec.simulate(&theta, &mut rng)?;
    Ok(ProposalRecord { index, theta, pseudo_data })
}

/// `T` records with indices `1..=T`, each drawn from its own derived stream.
pub fn build_proposals(spec: &SimulatorSpec, count: usize, seed: u64) -> Result<Vec<ProposalRecord>> {
    if count == 0 {
        return Err(invalid("need at least one proposal"));
    }
    spec.validate()?;
    (1..=count).map(|t| build_proposal(spec, t, seed)).collect()
}

/// Known parameters and the observed dataset generated from them.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta_star: Vec<f64>,
    pub observed: Dataset,
}

impl GroundTruth {
    /// Simulates `n` observations from `theta_star`; reproducible from `seed`.
    pub fn generate(spec: &SimulatorSpec, theta_star: Vec<f64>, n: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0, OBSERVED_STREAM);
        let observed = spec.simulate_n(&theta_star, n, &mut rng)?;
        Ok(GroundTruth { theta_star, observed })
    }
}

/// Mixing weights used as the toy ground truth.
pub const TOY_THETA_STAR: [f64; 5] = [0.25, 0.04, 0.33, 0.04, 0.34];
