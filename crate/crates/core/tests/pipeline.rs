//! Public-API properties of the inference pipeline.

use abcdp_core::distance::{DistanceSpec, KernelSpec};
use abcdp_core::engine::{
    run_abcdp, run_rejection_abc, sparse_vector_pass, threshold_pass, PrivacyBudget, RunOptions, SvtParams,
};
use abcdp_core::noise::LaplaceScale;
use abcdp_core::seed::stream_rng;
use abcdp_core::simulators::{build_proposals, GroundTruth, SimulatorSpec};
use proptest::prelude::*;

fn trace_is_consistent(indicators: &[bool], accepted: &[usize], early: bool, t: usize, c: usize) -> bool {
    let from_indicators: Vec<usize> = indicators.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i + 1).collect();
    let stopped_at_quota = accepted.len() == c;
    from_indicators == accepted
        && accepted.len() <= c
        && early == (stopped_at_quota && indicators.len() < t)
        && (stopped_at_quota || indicators.len() == t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn private_traces_are_well_formed(
        distances in prop::collection::vec(0.0f64..2.0, 1..300),
        eps_abc in 0.0f64..2.0,
        b in 0.0f64..1.0,
        c in 1usize..40,
        resample: bool,
        seed: u64,
    ) {
        let params = SvtParams { epsilon_abc: eps_abc, c, scale: LaplaceScale::new(b).unwrap(), resample, log_noise: true };
        let mut rng = stream_rng(seed, 0, "pipeline");
        let trace = sparse_vector_pass(&distances, &params, &mut rng);
        prop_assert!(trace_is_consistent(&trace.indicators, &trace.accepted, trace.terminated_early, distances.len(), c));
        let log = trace.noise_log.as_ref().unwrap();
        prop_assert_eq!(log.len(), trace.indicators.len());
        // The threshold noise only moves right after an acceptance, and then only with resample.
        for t in 1..log.len() {
            let moved = log[t].threshold_noise != log[t - 1].threshold_noise;
            if moved {
                prop_assert!(resample && trace.indicators[t - 1]);
            }
        }
    }

    #[test]
    fn noiseless_pass_equals_threshold_pass(
        distances in prop::collection::vec(0.0f64..2.0, 1..300),
        eps_abc in 0.0f64..2.0,
        c in 1usize..40,
        resample: bool,
    ) {
        let params = SvtParams { epsilon_abc: eps_abc, c, scale: LaplaceScale::NONE, resample, log_noise: false };
        let mut rng = stream_rng(0, 0, "pipeline");
        let private = sparse_vector_pass(&distances, &params, &mut rng);
        prop_assert_eq!(private, threshold_pass(&distances, eps_abc, Some(c)));
        prop_assert_eq!(rng, stream_rng(0, 0, "pipeline"));
    }
}

#[test]
fn generous_budget_recovers_the_rejection_posterior() {
    let spec = SimulatorSpec::uniform_mixture(200);
    let proposals = build_proposals(&spec, 1500, 8).unwrap();
    let truth = GroundTruth::generate(&spec, vec![0.25, 0.04, 0.33, 0.04, 0.34], 2000, 9).unwrap();
    let distance = DistanceSpec::Mmd { kernel: KernelSpec::gaussian(0.8).unwrap() };
    let abc = run_rejection_abc(&proposals, &truth.observed, &distance, f64::INFINITY, None).unwrap();
    let mut sorted = abc.distances.clone().unwrap();
    sorted.sort_by(f64::total_cmp);
    let eps_abc = sorted[100];
    let reference = run_rejection_abc(&proposals, &truth.observed, &distance, eps_abc, Some(50)).unwrap();

    let delta_rho = distance.sensitivity(truth.observed.len()).unwrap();
    let budget = PrivacyBudget::new(1000.0, 50, true, delta_rho).unwrap();
    let mut rng = stream_rng(3, 0, "pipeline");
    let private = run_abcdp(&proposals, &truth.observed, &distance, eps_abc, &budget, &mut rng, RunOptions::default()).unwrap();
    assert!(private.distances.is_none());
    assert_eq!(private.accepted_thetas.len(), 50);
    let gap: f64 = private
        .posterior_mean
        .unwrap()
        .iter()
        .zip(reference.posterior_mean.as_ref().unwrap())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(gap < 0.02, "private mean is {gap} away from the rejection mean");
}
