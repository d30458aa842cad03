//! Distances between the observed dataset and pseudo-datasets.
//!
//! Two families are supported: the biased (V-statistic) empirical MMD with a
//! bounded kernel, whose global sensitivity follows from the kernel bound, and
//! a weighted L2 distance between summary statistics, clipped at `C` so that
//! its sensitivity is finite.

use alloc::vec::Vec;
use core::borrow::Borrow;
use core::cmp::Ordering;

use libm::{exp, fabs, sqrt};
use rand::RngCore;

use crate::error::{invalid, Error, Result};

/// Ordered collection of `d`-dimensional points stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dataset dimension must be at least 1"));
        }
        if values.is_empty() {
            return Err(invalid("dataset must contain at least one point"));
        }
        if values.len() % dim != 0 {
            return Err(invalid(alloc::format!(
                "{} values do not form {dim}-dimensional points",
                values.len()
            )));
        }
        Ok(Dataset { dim, values })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Dataset::new(1, values)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            values.extend_from_slice(p);
        }
        Dataset::new(dim, values)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points `n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Always false; datasets hold at least one point.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    /// Flat row-major values.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copy with point `i` replaced; used to build neighbouring datasets.
    pub fn with_point_replaced(&self, i: usize, point: &[f64]) -> Result<Self> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: point.len() });
        }
        let mut out = self.clone();
        out.values[i * self.dim..(i + 1) * self.dim].copy_from_slice(point);
        Ok(out)
    }
}

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bounded kernel used by the MMD distance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum KernelSpec {
    /// `k(x, y) = exp(-‖x - y‖² / 2l²)`, bounded by 1 for every `l > 0`.
    Gaussian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let k = KernelSpec::Gaussian { bandwidth };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { bandwidth } if bandwidth.is_finite() && bandwidth > 0.0 => Ok(()),
            KernelSpec::Gaussian { bandwidth } => Err(invalid(alloc::format!(
                "Gaussian bandwidth must be positive and finite, got {bandwidth}"
            ))),
        }
    }

    /// `B_k = sup k(x, x')`.
    pub fn bound(&self) -> f64 {
        match self {
            KernelSpec::Gaussian { .. } => 1.0,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                exp(-squared_euclidean(x, y) / (2.0 * bandwidth * bandwidth))
            }
        }
    }
}

// One-dimensional Gaussian kernel sums by Taylor moments.
//
// With u = (x - c)/l and v = (y - c)/l for a common center c,
// k(x, y) = exp(-u²/2) exp(-v²/2) exp(uv), and expanding exp(uv) gives
// Σ_ij k(x_i, y_j) = Σ_k m_k(x) m_k(y) where m_k(x) = Σ_i exp(-u_i²/2) u_i^k / √k!.
// That replaces the O(mn) double loop by O((m + n) K) work. The series is
// truncated once its remainder is below 1e-17 of the smallest possible pair
// value. Signed terms can cancel, so the same sum is also taken over |u|^k;
// when it exceeds the signed result by more than CANCELLATION_LIMIT the
// direct double loop runs instead. Rounding error then stays near 1e-12
// relative.

const TAYLOR_MAX_TERMS: usize = 64;
const CANCELLATION_LIMIT: f64 = 64.0;

/// Midrange and half-range of a nonempty sample.
fn span(v: &[f64]) -> (f64, f64) {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let c = 0.5 * (lo + hi);
    (c, 0.5 * (hi - lo))
}

fn radius_about(v: &[f64], center: f64) -> f64 {
    v.iter().map(|&x| fabs(x - center)).fold(0.0, f64::max)
}

/// Number of Taylor terms for scaled radii `r`, `s`, or `None` when more
/// than [`TAYLOR_MAX_TERMS`] would be needed.
fn taylor_terms(r: f64, s: f64) -> Option<usize> {
    let a = r * s;
    // Smallest pair value relative to the per-pair prefactor.
    let scale = exp(0.5 * (r + s) * (r + s));
    if !scale.is_finite() {
        return None;
    }
    // t = a^k / k!; the tail from k on is at most t / (1 - a/(k+1)).
    let mut t = 1.0;
    for k in 0..=TAYLOR_MAX_TERMS {
        let next = k as f64 + 1.0;
        if next > a && t / (1.0 - a / next) * scale <= 1e-17 {
            return Some(k.max(1));
        }
        t *= a / next;
    }
    None
}

/// Whether `pairs` kernel evaluations cost more than building moments of
/// `fresh` points.
fn taylor_worthwhile(pairs: usize, fresh: usize, terms: usize) -> bool {
    pairs as f64 > 8.0 * fresh as f64 * terms as f64
}

/// Scaled Gaussian moments about `center`, signed and absolute.
#[derive(Debug, Clone)]
struct Moments {
    signed: Vec<f64>,
    absolute: Vec<f64>,
}

impl Moments {
    fn new(v: &[f64], center: f64, inv_l: f64, terms: usize) -> Self {
        let mut inv_sqrt = [0.0; TAYLOR_MAX_TERMS];
        for (k, w) in inv_sqrt.iter_mut().enumerate().take(terms).skip(1) {
            *w = 1.0 / sqrt(k as f64);
        }
        let mut signed = alloc::vec![0.0; terms];
        let mut absolute = alloc::vec![0.0; terms];
        for &x in v {
            let u = (x - center) * inv_l;
            let au = fabs(u);
            let mut p = exp(-0.5 * u * u);
            let mut q = p;
            signed[0] += p;
            absolute[0] += p;
            for k in 1..terms {
                p *= u * inv_sqrt[k];
                q *= au * inv_sqrt[k];
                signed[k] += p;
                absolute[k] += q;
            }
        }
        Moments { signed, absolute }
    }

    /// `Σ_k m_k(self) m_k(other)`, or `None` if cancellation is too strong.
    fn pair_sum(&self, other: &Moments) -> Option<f64> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let value = dot(&self.signed, &other.signed);
        let magnitude = dot(&self.absolute, &other.absolute);
        (value > 0.0 && magnitude <= CANCELLATION_LIMIT * value).then_some(value)
    }
}

/// Moments of an observed sample kept for repeated cross sums.
#[derive(Debug, Clone)]
struct CachedMoments {
    center: f64,
    radius: f64,
    moments: Moments,
}

impl CachedMoments {
    fn new(v: &[f64], inv_l: f64) -> Self {
        let (center, half) = span(v);
        CachedMoments { center, radius: half * inv_l, moments: Moments::new(v, center, inv_l, TAYLOR_MAX_TERMS) }
    }
}

#[inline]
fn inv_bandwidth(k: &KernelSpec) -> f64 {
    let KernelSpec::Gaussian { bandwidth } = *k;
    1.0 / bandwidth
}

/// Sum of `k(x_i, x_j)` over all ordered pairs, diagonal included.
fn self_kernel_sum(x: &Dataset, k: &KernelSpec) -> f64 {
    let n = x.len();
    let KernelSpec::Gaussian { bandwidth } = *k;
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut off = 0.0;
    if x.dim() == 1 {
        let v = x.values();
        if let Some(sum) = taylor_self_sum(v, k) {
            return sum;
        }
        for i in 0..n {
            let xi = v[i];
            let mut row = 0.0;
            for &xj in &v[i + 1..] {
                let d = xi - xj;
                row += exp(-gamma * d * d);
            }
            off += row;
        }
    } else {
        for i in 0..n {
            let xi = x.point(i);
            let mut row = 0.0;
            for j in i + 1..n {
                row += exp(-gamma * squared_euclidean(xi, x.point(j)));
            }
            off += row;
        }
    }
    // k(x, x) = 1 for the Gaussian kernel.
    n as f64 + 2.0 * off
}

fn direct_cross_sum(x: &Dataset, y: &Dataset, k: &KernelSpec) -> f64 {
    let KernelSpec::Gaussian { bandwidth } = *k;
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut total = 0.0;
    if x.dim() == 1 {
        let yv = y.values();
        for &xi in x.values() {
            let mut row = 0.0;
            for &yj in yv {
                let d = xi - yj;
                row += exp(-gamma * d * d);
            }
            total += row;
        }
    } else {
        for xi in x.points() {
            let mut row = 0.0;
            for yj in y.points() {
                row += exp(-gamma * squared_euclidean(xi, yj));
            }
            total += row;
        }
    }
    total
}

fn taylor_self_sum(v: &[f64], k: &KernelSpec) -> Option<f64> {
    let (center, half) = span(v);
    let r = half * inv_bandwidth(k);
    let terms = taylor_terms(r, r).filter(|&t| taylor_worthwhile(v.len() * v.len(), v.len(), t))?;
    let m = Moments::new(v, center, inv_bandwidth(k), terms);
    m.pair_sum(&m)
}

fn taylor_cross_sum(x: &CachedMoments, x_len: usize, y: &[f64], k: &KernelSpec) -> Option<f64> {
    let inv_l = inv_bandwidth(k);
    let s = radius_about(y, x.center) * inv_l;
    let terms = taylor_terms(x.radius, s).filter(|&t| taylor_worthwhile(x_len * y.len(), y.len(), t))?;
    // The cached moments run to the maximum order; zipping truncates them.
    x.moments.pair_sum(&Moments::new(y, x.center, inv_l, terms))
}

/// Cross sum against `x`, using its cached moments when given.
fn cross_kernel_sum_cached(x: &Dataset, cached: Option<&CachedMoments>, y: &Dataset, k: &KernelSpec) -> f64 {
    cached
        .and_then(|c| taylor_cross_sum(c, x.len(), y.values(), k))
        .unwrap_or_else(|| direct_cross_sum(x, y, k))
}

fn cross_kernel_sum(x: &Dataset, y: &Dataset, k: &KernelSpec) -> f64 {
    let cached = (x.dim() == 1).then(|| CachedMoments::new(x.values(), inv_bandwidth(k)));
    cross_kernel_sum_cached(x, cached.as_ref(), y, k)
}

fn check_same_dim(x: &Dataset, y: &Dataset) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    Ok(())
}

/// Biased empirical `MMD²` (V-statistic, diagonal terms included), clamped
/// at zero.
pub fn mmd_squared(x: &Dataset, y: &Dataset, k: &KernelSpec) -> Result<f64> {
    check_same_dim(x, y)?;
    k.validate()?;
    let (m, n) = (x.len() as f64, y.len() as f64);
    let v = self_kernel_sum(x, k) / (m * m) + self_kernel_sum(y, k) / (n * n)
        - 2.0 * cross_kernel_sum(x, y, k) / (m * n);
    Ok(v.max(0.0))
}

/// Empirical MMD, the square root of [`mmd_squared`].
pub fn mmd(x: &Dataset, y: &Dataset, k: &KernelSpec) -> Result<f64> {
    mmd_squared(x, y, k).map(sqrt)
}

/// MMD against a fixed observed dataset with its self-term cached.
#[derive(Debug, Clone)]
pub struct MmdEstimator {
    observed: Dataset,
    kernel: KernelSpec,
    observed_term: f64,
    moments: Option<CachedMoments>,
}

impl MmdEstimator {
    pub fn new(observed: Dataset, kernel: KernelSpec) -> Result<Self> {
        kernel.validate()?;
        let n = observed.len() as f64;
        let observed_term = self_kernel_sum(&observed, &kernel) / (n * n);
        let moments = (observed.dim() == 1).then(|| CachedMoments::new(observed.values(), inv_bandwidth(&kernel)));
        Ok(MmdEstimator { observed, kernel, observed_term, moments })
    }

    pub fn observed(&self) -> &Dataset {
        &self.observed
    }

    pub fn distance(&self, y: &Dataset) -> Result<f64> {
        check_same_dim(&self.observed, y)?;
        let (m, n) = (self.observed.len() as f64, y.len() as f64);
        let v = self.observed_term + self_kernel_sum(y, &self.kernel) / (n * n)
            - 2.0 * cross_kernel_sum_cached(&self.observed, self.moments.as_ref(), y, &self.kernel) / (m * n);
        Ok(sqrt(v.max(0.0)))
    }
}

/// A summary statistic `S`: maps a dataset to a fixed-length real vector.
pub trait SummaryStatistic {
    fn summarize(&self, data: &Dataset) -> Vec<f64>;
}

impl<F> SummaryStatistic for F
where
    F: Fn(&Dataset) -> Vec<f64>,
{
    fn summarize(&self, data: &Dataset) -> Vec<f64> {
        self(data)
    }
}

/// Built-in summary statistics selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Summary {
    /// The flattened raw values.
    Identity,
    /// For a dataset of cluster sizes: number of clusters, largest cluster,
    /// number of singletons, total cases.
    ClusterStats,
    /// Number of clusters, largest cluster and number of singletons, each
    /// divided by the public case count `cases`. Comparable across data sizes.
    ClusterFractions { cases: u64 },
}

impl Summary {
    pub fn validate(&self) -> Result<()> {
        match self {
            Summary::ClusterFractions { cases: 0 } => Err(invalid("cluster fractions need a positive case count")),
            _ => Ok(()),
        }
    }

    /// Per-record bound on the change of each coordinate, if the statistic
    /// has one that does not depend on the data.
    ///
    /// Moving one case between clusters changes the cluster count and the
    /// largest cluster by at most one, the singleton count by at most two,
    /// and leaves the total unchanged.
    pub fn record_sensitivities(&self) -> Option<Vec<f64>> {
        match *self {
            Summary::Identity => None,
            Summary::ClusterStats => Some(alloc::vec![1.0, 1.0, 2.0, 0.0]),
            Summary::ClusterFractions { cases } => {
                let n = cases as f64;
                Some(alloc::vec![1.0 / n, 1.0 / n, 2.0 / n])
            }
        }
    }
}

fn cluster_counts(sizes: &[f64]) -> (f64, f64, f64) {
    let largest = sizes.iter().copied().fold(0.0, f64::max);
    let singletons = sizes.iter().filter(|&&s| s == 1.0).count() as f64;
    (sizes.len() as f64, largest, singletons)
}

impl SummaryStatistic for Summary {
    fn summarize(&self, data: &Dataset) -> Vec<f64> {
        match *self {
            Summary::Identity => data.values().to_vec(),
            Summary::ClusterStats => {
                let (clusters, largest, singletons) = cluster_counts(data.values());
                let total: f64 = data.values().iter().sum();
                alloc::vec![clusters, largest, singletons, total]
            }
            Summary::ClusterFractions { cases } => {
                let (clusters, largest, singletons) = cluster_counts(data.values());
                let n = cases as f64;
                alloc::vec![clusters / n, largest / n, singletons / n]
            }
        }
    }
}

/// `sqrt(Σ w_j (a_j - b_j)²)` clipped at `clip`.
pub fn weighted_l2_summaries(a: &[f64], b: &[f64], weights: &[f64], clip: f64) -> Result<f64> {
    if a.len() != weights.len() || b.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: if a.len() != weights.len() { a.len() } else { b.len() },
        });
    }
    let sq: f64 = a
        .iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| w * (x - y) * (x - y))
        .sum();
    Ok(sqrt(sq).min(clip))
}

/// `min(sqrt(Σ_j w_j (S_j(X) - S_j(Y))²), C)`.
pub fn weighted_l2_distance<S: SummaryStatistic + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    summary: &S,
    weights: &[f64],
    clip: f64,
) -> Result<f64> {
    validate_weights(weights, clip)?;
    weighted_l2_summaries(&summary.summarize(x), &summary.summarize(y), weights, clip)
}

/// `sqrt(Σ w_j δ_j²)` from the summary's per-record bounds `δ_j`. By the
/// triangle inequality this bounds the change of the weighted distance when
/// one observed record changes, and clipping can only shrink it.
fn derived_sensitivity(summary: &Summary, weights: &[f64]) -> Option<f64> {
    let deltas = summary.record_sensitivities()?;
    (deltas.len() == weights.len()).then(|| sqrt(deltas.iter().zip(weights).map(|(d, w)| w * d * d).sum()))
}

fn validate_weights(weights: &[f64], clip: f64) -> Result<()> {
    if !(clip.is_finite() && clip > 0.0) {
        return Err(invalid(alloc::format!("clip bound must be positive, got {clip}")));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(invalid("weights must be finite and non-negative"));
    }
    Ok(())
}

/// Which distance `ρ` to use, together with what is needed for its
/// sensitivity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum DistanceSpec {
    Mmd {
        kernel: KernelSpec,
    },
    WeightedL2 {
        summary: Summary,
        weights: Vec<f64>,
        clip: f64,
        /// A tighter per-record bound on `Δρ`; the clip bound `C` otherwise.
        #[cfg_attr(feature = "serde", serde(default))]
        declared_sensitivity: Option<f64>,
    },
}

impl DistanceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistanceSpec::Mmd { kernel } => kernel.validate(),
            DistanceSpec::WeightedL2 { summary, weights, clip, declared_sensitivity } => {
                summary.validate()?;
                validate_weights(weights, *clip)?;
                match declared_sensitivity {
                    Some(s) if !(s.is_finite() && *s > 0.0) => {
                        Err(invalid(alloc::format!("declared sensitivity must be positive, got {s}")))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    /// Global sensitivity `Δρ` for observed datasets of size `n`.
    pub fn sensitivity(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(invalid("sensitivity needs N ≥ 1"));
        }
        Ok(match self {
            DistanceSpec::Mmd { kernel } => 2.0 * sqrt(kernel.bound()) / n as f64,
            DistanceSpec::WeightedL2 { summary, weights, clip, declared_sensitivity } => {
                declared_sensitivity.unwrap_or_else(|| derived_sensitivity(summary, weights).unwrap_or(*clip).min(*clip))
            }
        })
    }

    /// `B_ρ`, the supremum of the distance.
    pub fn upper_bound(&self) -> f64 {
        match self {
            DistanceSpec::Mmd { kernel } => 2.0 * sqrt(kernel.bound()),
            DistanceSpec::WeightedL2 { clip, .. } => *clip,
        }
    }

    /// Binds the distance to an observed dataset.
    pub fn prepare(&self, observed: &Dataset) -> Result<PreparedDistance> {
        self.validate()?;
        Ok(match self {
            DistanceSpec::Mmd { kernel } => {
                PreparedDistance::Mmd(MmdEstimator::new(observed.clone(), *kernel)?)
            }
            DistanceSpec::WeightedL2 { summary, weights, clip, .. } => {
                let observed_summary = summary.summarize(observed);
                if observed_summary.len() != weights.len() {
                    return Err(Error::DimensionMismatch {
                        expected: weights.len(),
                        found: observed_summary.len(),
                    });
                }
                PreparedDistance::WeightedL2 {
                    summary: *summary,
                    observed_summary,
                    weights: weights.clone(),
                    clip: *clip,
                }
            }
        })
    }
}

/// A distance with everything depending only on the observed data computed.
#[derive(Debug, Clone)]
pub enum PreparedDistance {
    Mmd(MmdEstimator),
    WeightedL2 { summary: Summary, observed_summary: Vec<f64>, weights: Vec<f64>, clip: f64 },
}

impl PreparedDistance {
    /// `ρ(Y*, y)`.
    pub fn distance(&self, y: &Dataset) -> Result<f64> {
        match self {
            PreparedDistance::Mmd(est) => est.distance(y),
            PreparedDistance::WeightedL2 { summary, observed_summary, weights, clip } => {
                weighted_l2_summaries(observed_summary, &summary.summarize(y), weights, *clip)
            }
        }
    }
}

/// Default number of points kept before the quadratic pairwise pass.
pub const MEDIAN_HEURISTIC_CAP: usize = 2000;

/// Bandwidth chosen by the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianBandwidth {
    pub bandwidth: f64,
    /// The pairwise distances had a zero median and `1.0` was used instead.
    pub fell_back: bool,
}

/// Median of pairwise Euclidean distances over (a subsample of) the pooled
/// pseudo-data points. Never pass the observed dataset here.
///
/// When more than `cap` points are pooled, `cap` of them are drawn without
/// replacement using `rng`; otherwise `rng` is untouched. An even number of
/// pairs takes the mean of the two middle distances.
pub fn median_heuristic_bandwidth<D, R>(pool: &[D], cap: usize, rng: &mut R) -> Result<MedianBandwidth>
where
    D: Borrow<Dataset>,
    R: RngCore + ?Sized,
{
    let dim = match pool.first() {
        Some(d) => d.borrow().dim(),
        None => return Err(invalid("median heuristic needs at least one dataset")),
    };
    if let Some(bad) = pool.iter().map(Borrow::borrow).find(|d| d.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    let total: usize = pool.iter().map(|d| d.borrow().len()).sum();
    if total < 2 {
        return Err(invalid("median heuristic needs at least two points"));
    }
    if cap < 2 {
        return Err(invalid("median heuristic subsample cap must be at least 2"));
    }
    let points = || pool.iter().flat_map(|d| d.borrow().points());
    let chosen: Vec<&[f64]> = if total > cap {
        let mut idx = rand::seq::index::sample(rng, total, cap).into_vec();
        idx.sort_unstable();
        // Walk the pool once, picking the sorted global indices.
        let mut picked = Vec::with_capacity(cap);
        let mut offset = 0;
        let mut next = idx.iter().peekable();
        for d in pool.iter().map(Borrow::borrow) {
            while let Some(&&i) = next.peek() {
                if i >= offset + d.len() {
                    break;
                }
                picked.push(d.point(i - offset));
                next.next();
            }
            offset += d.len();
        }
        picked
    } else {
        points().collect()
    };

    let mut dists = Vec::with_capacity(chosen.len() * (chosen.len() - 1) / 2);
    for (i, a) in chosen.iter().enumerate() {
        for b in &chosen[i + 1..] {
            dists.push(sqrt(squared_euclidean(a, b)));
        }
    }
    let median = median_in_place(&mut dists);
    if median > 0.0 && median.is_finite() {
        Ok(MedianBandwidth { bandwidth: median, fell_back: false })
    } else {
        Ok(MedianBandwidth { bandwidth: 1.0, fell_back: true })
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).unwrap_or(Ordering::Equal);
    let mid = v.len() / 2;
    let odd = v.len() % 2 == 1;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, cmp);
    let hi = *upper;
    if odd {
        hi
    } else {
        let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}
