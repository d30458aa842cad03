//! Seeded experiment orchestration.
//!
//! A replication draws its observed data (synthetic mode) and its proposal
//! set from seeds derived from `(master_seed, replication, stream)`, then
//! computes every distance `ρ_t` once. Each setting `(ε_abc, c, ε_total,
//! RESAMPLE)` is evaluated on those shared distances: ABCDP with noise from
//! the replication's `"noise"` stream, and rejection ABC stopped after `c`
//! acceptances, so both runs see the same computational budget.
//!
//! Every setting of a replication reuses the same noise stream. Noise scales
//! differ between settings but the underlying uniforms do not, which makes
//! comparisons across privacy levels less noisy without coupling runs of
//! different replications.

use std::path::Path;
use std::sync::Arc;

use abcdp_core::analytics::{
    flip_profile_grid, log_grid, tail_level_for_probability, ErrorBoundReport, FlipGridRow, FlipProfile,
    PosteriorFunctional,
};
use abcdp_core::distance::{median_heuristic_bandwidth, Dataset, DistanceSpec, MedianBandwidth, Summary, SummaryStatistic};
use abcdp_core::engine::{
    accountant_report, sparse_vector_pass, threshold_pass, BudgetLedger, IndicatorTrace, PrivacyBudget,
    ProposalRecord, SvtParams,
};
use abcdp_core::seed::{derive_seed, stream_rng};
use abcdp_core::simulators::{build_proposal, GroundTruth, Model, SimulatorSpec};
use log::{debug, info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DistanceConfig, Epsilon, ExperimentConfig, Mode, ObservedSource, Setting};
use crate::error::{HarnessError, Result};
use crate::io;

pub const REPLICATION_STREAM: &str = "replication";
pub const NOISE_STREAM: &str = "noise";
pub const BANDWIDTH_STREAM: &str = "bandwidth";
pub const FLIP_RHO_STREAM: &str = "flip_rho";

/// Probability levels whose tail-bound inverses serve as default error levels.
pub const DEFAULT_TAIL_PROBABILITIES: [f64; 3] = [0.25, 0.5, 0.75];

/// Observed-data size `N` as the simulator counts it: cases for the
/// birth-death model, points otherwise.
pub fn observed_size(model: &Model, observed: &Dataset) -> usize {
    match model {
        Model::BirthDeath { .. } => observed.values().iter().sum::<f64>().round() as usize,
        _ => observed.len(),
    }
}

/// Everything a setting needs from one replication. Pseudo-datasets are
/// dropped once their distances are known.
#[derive(Debug, Clone)]
pub struct PreparedReplication {
    pub index: usize,
    pub seed: u64,
    pub observed_len: usize,
    pub theta_star: Option<Vec<f64>>,
    pub thetas: Vec<Vec<f64>>,
    pub distance: DistanceSpec,
    pub delta_rho: f64,
    pub distances: Vec<f64>,
    pub bandwidth: Option<MedianBandwidth>,
}

/// Inputs shared by all replications of a config.
#[derive(Debug)]
pub struct Harness {
    config: ExperimentConfig,
    csv_observed: Option<Dataset>,
    loaded_proposals: Option<Arc<Vec<ProposalRecord>>>,
}

impl Harness {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let csv_observed = match &config.observed {
            ObservedSource::Csv { path, .. } => Some(io::read_dataset(path)?),
            ObservedSource::Synthetic { .. } => None,
        };
        let loaded_proposals = match &config.proposals_dir {
            Some(dir) => Some(Arc::new(io::load_proposals(dir)?)),
            None => None,
        };
        Ok(Harness { config, csv_observed, loaded_proposals })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn replication_seed(&self, index: usize) -> u64 {
        derive_seed(self.config.master_seed, index as u64, REPLICATION_STREAM)
    }

    fn simulator_spec(&self, observed: &Dataset) -> SimulatorSpec {
        let n = match &self.config.observed {
            ObservedSource::Synthetic { n, .. } => *n,
            ObservedSource::Csv { .. } => observed_size(&self.config.simulator.model, observed),
        };
        self.config.simulator.to_spec(n)
    }

    fn observed(&self, seed: u64) -> Result<Dataset> {
        match (&self.config.observed, &self.csv_observed) {
            (_, Some(data)) => Ok(data.clone()),
            (ObservedSource::Synthetic { theta_star, n }, None) => {
                let spec = self.config.simulator.to_spec(*n);
                Ok(GroundTruth::generate(&spec, theta_star.clone(), *n, seed)?.observed)
            }
            (ObservedSource::Csv { .. }, None) => unreachable!("csv data is loaded in Harness::new"),
        }
    }

    /// Simulates (or loads) replication `index` and returns it with its
    /// proposal set.
    pub fn prepare_with_proposals(&self, index: usize) -> Result<(PreparedReplication, Arc<Vec<ProposalRecord>>)> {
        let seed = self.replication_seed(index);
        let observed = self.observed(seed)?;
        let spec = self.simulator_spec(&observed);
        let proposals = match &self.loaded_proposals {
            Some(p) => Arc::clone(p),
            None => {
                spec.validate()?;
                let built = (1..=self.config.proposals)
                    .into_par_iter()
                    .map(|t| build_proposal(&spec, t, seed))
                    .collect::<abcdp_core::Result<Vec<_>>>()?;
                Arc::new(built)
            }
        };

        let bandwidth = match self.config.distance.needs_median() {
            Some(cap) => {
                let pool: Vec<&Dataset> = proposals.iter().map(|p| &p.pseudo_data).collect();
                let mut rng = stream_rng(seed, 0, BANDWIDTH_STREAM);
                let mb = median_heuristic_bandwidth(&pool, cap, &mut rng)?;
                if mb.fell_back {
                    warn!("replication {index}: zero median pairwise distance, using bandwidth 1");
                }
                Some(mb)
            }
            None => None,
        };
        let summary_len = match &self.config.distance {
            DistanceConfig::WeightedL2 { summary, .. } => {
                if let Summary::ClusterFractions { cases } = summary {
                    let actual = observed_size(&self.config.simulator.model, &observed);
                    if *cases as usize != actual {
                        warn!("replication {index}: cluster fractions use {cases} cases, observed data has {actual}");
                    }
                }
                summary.summarize(&observed).len()
            }
            DistanceConfig::Mmd { .. } => 0,
        };
        let distance = self.config.distance.to_spec(bandwidth.map(|b| b.bandwidth), summary_len)?;
        distance.validate().map_err(|e| HarnessError::validation("distance", e))?;
        let delta_rho = distance.sensitivity(observed.len())?;
        let prepared = distance.prepare(&observed)?;
        let distances = proposals
            .par_iter()
            .map(|p| prepared.distance(&p.pseudo_data))
            .collect::<abcdp_core::Result<Vec<f64>>>()?;
        debug!("replication {index}: {} distances, Δρ = {delta_rho}", distances.len());

        let rep = PreparedReplication {
            index,
            seed,
            observed_len: observed.len(),
            theta_star: self.config.observed.theta_star().map(<[f64]>::to_vec),
            thetas: proposals.iter().map(|p| p.theta.clone()).collect(),
            distance,
            delta_rho,
            distances,
            bandwidth,
        };
        Ok((rep, proposals))
    }

    pub fn prepare(&self, index: usize) -> Result<PreparedReplication> {
        Ok(self.prepare_with_proposals(index)?.0)
    }

    /// Tail levels for a setting: the configured ones, or the error levels at
    /// which the tail bound reaches each of [`DEFAULT_TAIL_PROBABILITIES`].
    fn tail_levels(&self, profile: &FlipProfile, functional: &PosteriorFunctional, c_prime: usize) -> Vec<f64> {
        if let Some(levels) = &self.config.tail_levels {
            return levels.clone();
        }
        if c_prime == 0 || profile.scale.is_noiseless() {
            return Vec::new();
        }
        DEFAULT_TAIL_PROBABILITIES
            .iter()
            .filter_map(|&p| tail_level_for_probability(profile, functional, c_prime, p).ok())
            .filter(|a| *a > 0.0 && a.is_finite())
            .collect()
    }
}

/// What one run (private or not) produced, reduced to releasable quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub accepted: Vec<usize>,
    /// Parameters of the accepted proposals; written to CSV, not to JSON.
    #[serde(skip)]
    pub accepted_thetas: Vec<Vec<f64>>,
    pub accepted_count: usize,
    /// Proposals visited before the loop stopped.
    pub steps: usize,
    pub terminated_early: bool,
    pub acceptance_rate: f64,
    pub posterior_mean: Option<Vec<f64>>,
    /// `‖mean - θ*‖²`, when the truth is known and something was accepted.
    pub mse: Option<f64>,
    /// Mean over parameters of `|mean_j - θ*_j|`.
    pub mean_abs_error: Option<f64>,
}

impl RunSummary {
    fn new(trace: &IndicatorTrace, thetas: &[Vec<f64>], functional: &PosteriorFunctional, theta_star: Option<&[f64]>) -> Self {
        let posterior_mean = functional.accepted_mean(trace);
        let (mse, mean_abs_error) = match (&posterior_mean, theta_star) {
            (Some(m), Some(t)) => {
                let sq = m.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                let abs = m.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / t.len() as f64;
                (Some(sq), Some(abs))
            }
            _ => (None, None),
        };
        let steps = trace.indicators.len();
        RunSummary {
            accepted: trace.accepted.clone(),
            accepted_thetas: trace.accepted.iter().map(|&t| thetas[t - 1].clone()).collect(),
            accepted_count: trace.accepted_count(),
            steps,
            terminated_early: trace.terminated_early,
            acceptance_rate: if steps == 0 { 0.0 } else { trace.accepted_count() as f64 / steps as f64 },
            posterior_mean,
            mse,
            mean_abs_error,
        }
    }
}

/// A paired ABCDP / rejection-ABC evaluation of one setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingOutcome {
    pub replication: usize,
    pub setting: Setting,
    pub ledger: BudgetLedger,
    pub abcdp: RunSummary,
    pub abc: RunSummary,
    /// `‖ABCDP mean - ABC mean‖₂`; absent if either run accepted nothing.
    pub realized_error: Option<f64>,
    pub mean_flip_prob: f64,
    /// Absent when the non-private run accepted nothing.
    pub bounds: Option<ErrorBoundReport>,
}

impl SettingOutcome {
    /// Excluded from aggregates: one of the runs accepted nothing.
    pub fn excluded(&self) -> bool {
        self.abcdp.accepted_count == 0 || self.abc.accepted_count == 0
    }
}

impl Harness {
    /// Runs one setting on a prepared replication. `noise_index` selects an
    /// independent noise stream; the CLI always uses 0.
    pub fn evaluate(&self, rep: &PreparedReplication, setting: Setting, noise_index: u64) -> Result<SettingOutcome> {
        evaluate_setting(rep, setting, noise_index, |profile, functional, c_prime| {
            self.tail_levels(profile, functional, c_prime)
        })
    }
}

/// Paired evaluation with caller-chosen tail levels.
pub fn evaluate_setting<F>(
    rep: &PreparedReplication,
    setting: Setting,
    noise_index: u64,
    tail_levels: F,
) -> Result<SettingOutcome>
where
    F: Fn(&FlipProfile, &PosteriorFunctional, usize) -> Vec<f64>,
{
    let budget = PrivacyBudget::new(setting.epsilon_total.0, setting.c, setting.resample, rep.delta_rho)?;
    let ledger = accountant_report(&budget, rep.delta_rho)?;
    let mut rng = stream_rng(rep.seed, noise_index, NOISE_STREAM);
    let private = sparse_vector_pass(&rep.distances, &SvtParams::from_budget(setting.epsilon_abc, &budget), &mut rng);
    let non_private = threshold_pass(&rep.distances, setting.epsilon_abc, Some(setting.c));

    let functional = PosteriorFunctional::identity(&rep.thetas)?;
    let profile = FlipProfile::new(rep.distances.clone(), setting.epsilon_abc, budget.scale());
    let c_prime = non_private.accepted_count();
    let bounds = if c_prime > 0 {
        let levels = tail_levels(&profile, &functional, c_prime);
        Some(ErrorBoundReport::build(&profile, &functional, &private, &non_private, &levels)?)
    } else {
        None
    };
    let theta_star = rep.theta_star.as_deref();
    Ok(SettingOutcome {
        replication: rep.index,
        setting,
        ledger,
        realized_error: functional.realized_error(&private, &non_private),
        mean_flip_prob: profile.mean_flip(),
        abcdp: RunSummary::new(&private, &rep.thetas, &functional, theta_star),
        abc: RunSummary::new(&non_private, &rep.thetas, &functional, theta_star),
        bounds,
    })
}

/// Mean and standard error of a sample; the error needs two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub stderr: Option<f64>,
}

pub fn mean_se(values: &[f64]) -> Option<MeanSe> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = (values.len() > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Some(MeanSe { mean, stderr })
}

/// Aggregate of one setting over the replications where both runs accepted
/// something.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingSummary {
    pub setting: Setting,
    pub replications: usize,
    pub excluded: usize,
    pub mse: Option<MeanSe>,
    pub abc_mse: Option<MeanSe>,
    pub mean_abs_error: Option<MeanSe>,
    pub abc_mean_abs_error: Option<MeanSe>,
    pub realized_error: Option<MeanSe>,
    pub expected_error_bound: Option<MeanSe>,
    pub mean_flip_prob: Option<MeanSe>,
    pub acceptance_rate: Option<MeanSe>,
    pub ledger: BudgetLedger,
}

impl SettingSummary {
    /// Summarizes outcomes that all share `setting`; `outcomes` must be nonempty.
    pub fn from_outcomes(outcomes: &[&SettingOutcome]) -> Self {
        let kept: Vec<&&SettingOutcome> = outcomes.iter().filter(|o| !o.excluded()).collect();
        let collect = |f: &dyn Fn(&SettingOutcome) -> Option<f64>| -> Option<MeanSe> {
            let v: Vec<f64> = kept.iter().filter_map(|o| f(o)).collect();
            mean_se(&v)
        };
        SettingSummary {
            setting: outcomes[0].setting,
            replications: kept.len(),
            excluded: outcomes.len() - kept.len(),
            mse: collect(&|o| o.abcdp.mse),
            abc_mse: collect(&|o| o.abc.mse),
            mean_abs_error: collect(&|o| o.abcdp.mean_abs_error),
            abc_mean_abs_error: collect(&|o| o.abc.mean_abs_error),
            realized_error: collect(&|o| o.realized_error),
            expected_error_bound: collect(&|o| o.bounds.as_ref().map(|b| b.expected_error_bound)),
            mean_flip_prob: collect(&|o| Some(o.mean_flip_prob)),
            acceptance_rate: collect(&|o| Some(o.abcdp.acceptance_rate)),
            ledger: outcomes[0].ledger.clone(),
        }
    }
}

/// Outcomes of every replication and setting, ordered by replication then
/// setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResults {
    pub outcomes: Vec<SettingOutcome>,
    pub summaries: Vec<SettingSummary>,
}

/// Prepares every replication and evaluates every configured setting.
/// Proposal sets are saved under `save_dir/proposals/rep_NNNN` when given.
pub fn run_settings(harness: &Harness, save_dir: Option<&Path>) -> Result<BenchmarkResults> {
    let config = harness.config();
    let settings = config.settings();
    let per_rep = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let (rep, proposals) = harness.prepare_with_proposals(r)?;
            if let Some(dir) = save_dir {
                io::save_proposals(&dir.join(format!("proposals/rep_{r:04}")), &proposals)?;
            }
            drop(proposals);
            info!("replication {r} prepared");
            settings.iter().map(|s| harness.evaluate(&rep, *s, 0)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<SettingOutcome> = per_rep.into_iter().flatten().collect();
    let summaries = settings
        .iter()
        .map(|s| {
            let group: Vec<&SettingOutcome> = outcomes.iter().filter(|o| o.setting == *s).collect();
            SettingSummary::from_outcomes(&group)
        })
        .collect();
    Ok(BenchmarkResults { outcomes, summaries })
}

/// The flip-probability grid of the config's `flip_grid` section.
pub fn flip_grid(config: &ExperimentConfig) -> Result<Vec<FlipGridRow>> {
    let g = &config.flip_grid;
    let mut rng = stream_rng(config.master_seed, 0, FLIP_RHO_STREAM);
    let rhos: Vec<f64> = (0..g.rho_samples).map(|_| rng.random::<f64>()).collect();
    let eps = log_grid(g.epsilon_total_min, g.epsilon_total_max, g.epsilon_total_points);
    Ok(flip_profile_grid(&rhos, g.epsilon_abc, &g.n, &g.c, &eps, config.budget.resample, g.kernel_bound)?)
}

/// Result file names, shared with plot emission.
pub mod files {
    pub const RESULTS: &str = "results.json";
    pub const CONFIG_ECHO: &str = "config.json";
    pub const ACCEPTED: &str = "accepted_theta.csv";
    pub const METRICS: &str = "metrics.csv";
    pub const RUNS: &str = "runs.csv";
    pub const BOUNDS: &str = "bounds.csv";
    pub const FLIP_GRID: &str = "flip_grid.csv";
}

const SETTING_COLUMNS: [&str; 4] = ["epsilon_abc", "c", "epsilon_total", "resample"];

fn setting_cells(s: &Setting) -> Vec<String> {
    vec![s.epsilon_abc.to_string(), s.c.to_string(), s.epsilon_total.to_string(), s.resample.to_string()]
}

fn header(prefix: &[&str], rest: &[&str]) -> Vec<String> {
    prefix.iter().chain(rest).map(|s| (*s).to_owned()).collect()
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table(path, &h, rows)
}

/// What a finished run reports back to the caller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Execution {
    pub mode: Mode,
    /// One ledger per distinct setting, in setting order.
    pub ledgers: Vec<(Setting, BudgetLedger)>,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct ResultsDoc<'a, T: Serialize> {
    mode: Mode,
    master_seed: u64,
    replications: usize,
    #[serde(flatten)]
    body: &'a T,
}

/// Runs the configured mode and writes its artifacts into `out`.
pub fn execute(config: ExperimentConfig, out: &Path) -> Result<Execution> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mode = config.mode;
    let mut files = vec![files::CONFIG_ECHO.to_owned(), files::RESULTS.to_owned()];
    io::write_text(&out.join(files::CONFIG_ECHO), &(config.to_json() + "\n"))?;

    if mode == Mode::FlipGrid {
        let rows = flip_grid(&config)?;
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r.n.to_string(), r.c.to_string(), r.epsilon_total.to_string(), r.mean_flip_prob.to_string()])
            .collect();
        write_rows(&out.join(files::FLIP_GRID), &header(&["N", "c", "epsilon_total", "mean_flip_prob"], &[]), &cells)?;
        files.push(files::FLIP_GRID.to_owned());
        #[derive(Serialize)]
        struct Body<'a> {
            rows: &'a [FlipGridRow],
        }
        let doc = ResultsDoc { mode, master_seed: config.master_seed, replications: 0, body: &Body { rows: &rows } };
        io::write_json(&out.join(files::RESULTS), &doc)?;
        return Ok(Execution { mode, ledgers: Vec::new(), files });
    }

    let harness = Harness::new(config)?;
    let config = harness.config();
    let save_dir = config.save_proposals.then_some(out);
    let results = run_settings(&harness, save_dir)?;
    let ledgers = results.summaries.iter().map(|s| (s.setting, s.ledger.clone())).collect();

    write_accepted(&out.join(files::ACCEPTED), &results.outcomes)?;
    files.push(files::ACCEPTED.to_owned());
    match mode {
        Mode::DpRun => {
            write_dp_metrics(&out.join(files::METRICS), &results.outcomes)?;
            #[derive(Serialize)]
            struct PrivateOutcome<'a> {
                replication: usize,
                setting: Setting,
                ledger: &'a BudgetLedger,
                abcdp: &'a RunSummary,
            }
            #[derive(Serialize)]
            struct Body<'a> {
                runs: Vec<PrivateOutcome<'a>>,
            }
            let runs = results
                .outcomes
                .iter()
                .map(|o| PrivateOutcome { replication: o.replication, setting: o.setting, ledger: &o.ledger, abcdp: &o.abcdp })
                .collect();
            let doc = ResultsDoc { mode, master_seed: config.master_seed, replications: config.replications, body: &Body { runs } };
            io::write_json(&out.join(files::RESULTS), &doc)?;
            files.push(files::METRICS.to_owned());
        }
        Mode::PairedBenchmark | Mode::BoundsReport => {
            write_summary(&out.join(files::METRICS), &results.summaries)?;
            write_runs(&out.join(files::RUNS), &results.outcomes)?;
            write_bounds(&out.join(files::BOUNDS), &results.outcomes)?;
            let doc = ResultsDoc { mode, master_seed: config.master_seed, replications: config.replications, body: &results };
            io::write_json(&out.join(files::RESULTS), &doc)?;
            files.extend([files::METRICS, files::RUNS, files::BOUNDS].map(str::to_owned));
        }
        Mode::FlipGrid => unreachable!("handled above"),
    }
    Ok(Execution { mode, ledgers, files })
}

/// `replication,epsilon_abc,c,epsilon_total,resample,t,theta_1..theta_d`,
/// one row per ABCDP acceptance.
fn write_accepted(path: &Path, outcomes: &[SettingOutcome]) -> Result<()> {
    let d = outcomes
        .iter()
        .find_map(|o| o.abcdp.posterior_mean.as_ref().map(Vec::len))
        .unwrap_or(0);
    let mut h = header(&["replication"], &SETTING_COLUMNS);
    h.push("t".into());
    h.extend((1..=d).map(|j| format!("theta_{j}")));
    let mut rows = Vec::new();
    for o in outcomes {
        for (t, theta) in o.abcdp.accepted.iter().zip(&o.abcdp.accepted_thetas) {
            let mut row = vec![o.replication.to_string()];
            row.extend(setting_cells(&o.setting));
            row.push(t.to_string());
            row.extend(theta.iter().map(|v| v.to_string()));
            rows.push(row);
        }
    }
    write_rows(path, &h, &rows)
}

fn write_dp_metrics(path: &Path, outcomes: &[SettingOutcome]) -> Result<()> {
    let h = header(
        &["replication"],
        &[&SETTING_COLUMNS[..], &["accepted", "steps", "acceptance_rate", "mse", "mean_abs_error"]].concat(),
    );
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            let mut row = vec![o.replication.to_string()];
            row.extend(setting_cells(&o.setting));
            row.extend([
                o.abcdp.accepted_count.to_string(),
                o.abcdp.steps.to_string(),
                o.abcdp.acceptance_rate.to_string(),
                io::cell(o.abcdp.mse),
                io::cell(o.abcdp.mean_abs_error),
            ]);
            row
        })
        .collect();
    write_rows(path, &h, &rows)
}

fn mean_cells(m: Option<MeanSe>) -> [String; 2] {
    [io::cell(m.map(|m| m.mean)), io::cell(m.and_then(|m| m.stderr))]
}

/// Columns of the per-setting summary table.
pub const SUMMARY_COLUMNS: [&str; 21] = [
    "epsilon_abc",
    "c",
    "epsilon_total",
    "resample",
    "noise_scale",
    "replications",
    "excluded",
    "mse_mean",
    "mse_stderr",
    "abc_mse_mean",
    "abc_mse_stderr",
    "mae_mean",
    "mae_stderr",
    "abc_mae_mean",
    "abc_mae_stderr",
    "realized_error_mean",
    "realized_error_stderr",
    "expected_error_bound_mean",
    "expected_error_bound_stderr",
    "mean_flip_prob",
    "acceptance_rate_mean",
];

fn write_summary(path: &Path, summaries: &[SettingSummary]) -> Result<()> {
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let mut row = setting_cells(&s.setting);
            row.push(s.ledger.noise_scale.to_string());
            row.push(s.replications.to_string());
            row.push(s.excluded.to_string());
            for m in [s.mse, s.abc_mse, s.mean_abs_error, s.abc_mean_abs_error, s.realized_error, s.expected_error_bound] {
                row.extend(mean_cells(m));
            }
            row.push(io::cell(s.mean_flip_prob.map(|m| m.mean)));
            row.push(io::cell(s.acceptance_rate.map(|m| m.mean)));
            row
        })
        .collect();
    io::write_table(path, &SUMMARY_COLUMNS, &rows)
}

fn write_runs(path: &Path, outcomes: &[SettingOutcome]) -> Result<()> {
    let h = header(
        &["replication"],
        &[
            &SETTING_COLUMNS[..],
            &[
                "abcdp_accepted",
                "abc_accepted",
                "abcdp_mse",
                "abc_mse",
                "abcdp_mae",
                "abc_mae",
                "realized_error",
                "expected_error_bound",
                "mean_flip_prob",
            ],
        ]
        .concat(),
    );
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            let mut row = vec![o.replication.to_string()];
            row.extend(setting_cells(&o.setting));
            row.extend([
                o.abcdp.accepted_count.to_string(),
                o.abc.accepted_count.to_string(),
                io::cell(o.abcdp.mse),
                io::cell(o.abc.mse),
                io::cell(o.abcdp.mean_abs_error),
                io::cell(o.abc.mean_abs_error),
                io::cell(o.realized_error),
                io::cell(o.bounds.as_ref().map(|b| b.expected_error_bound)),
                o.mean_flip_prob.to_string(),
            ]);
            row
        })
        .collect();
    write_rows(path, &h, &rows)
}

/// One row per tail level; settings without levels get a single row with
/// empty `a` and `tail_bound`.
fn write_bounds(path: &Path, outcomes: &[SettingOutcome]) -> Result<()> {
    let h = header(
        &["replication"],
        &[&SETTING_COLUMNS[..], &["c_prime", "expected_error_bound", "realized_error", "a", "tail_bound"]].concat(),
    );
    let mut rows = Vec::new();
    for o in outcomes {
        let Some(b) = &o.bounds else { continue };
        let mut base = vec![o.replication.to_string()];
        base.extend(setting_cells(&o.setting));
        base.extend([b.c_prime.to_string(), b.expected_error_bound.to_string(), io::cell(b.realized_error)]);
        if b.tail_bounds.is_empty() {
            rows.push([base.clone(), vec![String::new(), String::new()]].concat());
        }
        for (a, p) in &b.tail_bounds {
            rows.push([base.clone(), vec![a.to_string(), p.to_string()]].concat());
        }
    }
    write_rows(path, &h, &rows)
}

/// Parses a setting back from its CSV cells.
pub fn parse_setting(cells: &[String]) -> Option<Setting> {
    let epsilon_total = match cells.get(2)?.as_str() {
        "inf" => Epsilon::INFINITE,
        v => Epsilon(v.parse().ok()?),
    };
    Some(Setting {
        epsilon_abc: cells.first()?.parse().ok()?,
        c: cells.get(1)?.parse().ok()?,
        epsilon_total,
        resample: cells.get(3)?.parse().ok()?,
    })
}
