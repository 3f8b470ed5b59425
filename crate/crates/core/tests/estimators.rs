use pbn_steady::gelman_rubin::generate_converged_chains;
use pbn_steady::model::{exact_steady_state, random_pbn, PbnModel, RandomPbnSpec};
use pbn_steady::parallel::{parallel_skart, parallel_two_state, ChainConfig};
use pbn_steady::sim::{
    BitSeq, BitSource, FixedSource, MetaProperty, SimOptions, SyntheticKind, SyntheticSource,
    WorkerPool,
};
use pbn_steady::skart::{self, skart_run, SkartSettings};
use pbn_steady::two_state::{self, run_sequential, TwoStateSettings};
use pbn_steady::{Degeneracy, EstimateError};

fn small_model(seed: u64, p: f64) -> PbnModel {
    random_pbn(&RandomPbnSpec::new(8, (1, 3), (1, 3)).with_perturbation(p), seed).unwrap()
}

#[test]
fn converged_chains_match_oracle() {
    let model = small_model(3, 0.01);
    let prop = MetaProperty::new("v2", &[(2, true)]);
    let pi = exact_steady_state(&model).unwrap().mass(|s| prop.holds(s));
    let pool = WorkerPool::new(2);
    let out = generate_converged_chains(
        &model,
        &[prop],
        4,
        1000,
        1.1,
        17,
        &pool,
        &SimOptions::default(),
    )
    .unwrap();
    let psi = out.set.psi;
    assert!(*out.trace.last().unwrap() < 1.1);
    assert!(out.set.chains().iter().all(|c| c.len() == 2 * psi));
    let mut means = Vec::new();
    for c in out.set.chains() {
        c.history(0).block_means(psi..2 * psi, psi / 10, &mut means);
    }
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let se = (means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
    assert!((mean - pi).abs() < 3.0 * se, "{mean} vs {pi}, se {se}");
}

#[test]
fn looser_threshold_stops_no_later() {
    let pool = WorkerPool::sequential();
    for seed in 0..5 {
        let model = small_model(10 + seed, 0.01);
        let props = [MetaProperty::new("a", &[(0, true), (1, false)])];
        let run = |t| {
            generate_converged_chains(&model, &props, 3, 200, t, seed, &pool, &SimOptions::default())
                .unwrap()
        };
        let loose = run(1.5);
        let tight = run(1.01);
        assert!(loose.set.psi <= tight.set.psi);
        // the tight run saw the loose run's whole trace first
        assert_eq!(tight.trace[..loose.trace.len()], loose.trace[..]);
    }
}

#[test]
fn chain_generation_is_deterministic() {
    let model = small_model(4, 0.02);
    let props = [MetaProperty::new("a", &[(3, true)])];
    let a = generate_converged_chains(
        &model,
        &props,
        4,
        500,
        1.05,
        9,
        &WorkerPool::new(1),
        &SimOptions::default(),
    )
    .unwrap();
    let b = generate_converged_chains(
        &model,
        &props,
        4,
        500,
        1.05,
        9,
        &WorkerPool::new(3),
        &SimOptions::default(),
    )
    .unwrap();
    assert_eq!(a.set.psi, b.set.psi);
    for (x, y) in a.set.chains().iter().zip(b.set.chains()) {
        assert_eq!(x.current(), y.current());
        assert!(x.history(0).iter().eq(y.history(0).iter()));
    }
}

#[test]
fn parallel_two_state_bookkeeping() {
    let model = small_model(21, 0.03);
    let props: Vec<MetaProperty> = (0..3)
        .map(|i| MetaProperty::new(format!("v{i}"), &[(i, true)]))
        .collect();
    let settings = TwoStateSettings {
        precision: 2e-3,
        ..Default::default()
    };
    let config = ChainConfig {
        omega: 3,
        ..Default::default()
    };
    let r = parallel_two_state(&model, &props, &settings, &config, 5).unwrap();
    assert_eq!(r.total_sample_size % 3, 0);
    for o in &r.properties {
        let e = o.result.as_ref().unwrap();
        assert_eq!(e.sample_size, r.total_sample_size);
        assert!(e.required_sample_size.unwrap() <= r.total_sample_size);
        assert_eq!(e.burn_in, r.burn_in);
        assert!(e.estimate > 0.0 && e.estimate < 1.0);
    }
    assert_eq!(r.simulated_steps, 3 * (r.burn_in + r.total_sample_size / 3));
}

#[test]
fn batch_count_rounded_to_chain_multiple() {
    let mut src = SyntheticSource::new(SyntheticKind::Iid { q: 0.5 }, 3, 1);
    let settings = SkartSettings {
        h_star: 0.5,
        ..Default::default()
    };
    let r = skart::estimate_multi_chain(&mut src, &settings, 0).unwrap();
    let plan = r.batching.unwrap();
    assert_eq!(plan.p, 1281);
    assert_eq!(plan.p / 3, 427);
    assert_eq!(src.len(), 427 * plan.kappa);
}

#[test]
fn single_chain_parallel_skart_matches_sequential() {
    let mut compared = 0;
    for seed in 0..6 {
        let model = small_model(30 + seed, 0.5);
        let prop = MetaProperty::new("v1", &[(1, true)]);
        let settings = SkartSettings {
            h_star: 5e-3,
            ..Default::default()
        };
        let seq = skart_run(&model, &prop, &settings, seed, &SimOptions::default()).unwrap();
        let config = ChainConfig {
            omega: 1,
            ..Default::default()
        };
        let par = parallel_skart(&model, &prop, &settings, &config, seed).unwrap();
        let plan = seq.batching.unwrap();
        if plan.d == 0 {
            assert_eq!(seq.estimate.to_bits(), par.estimate.to_bits());
            assert_eq!(seq.ci, par.ci);
            compared += 1;
        }
    }
    assert!(compared >= 3, "{compared}");
}

#[test]
fn results_independent_of_worker_count() {
    let model = small_model(8, 0.02);
    let prop = MetaProperty::new("v5", &[(5, false)]);
    let settings = TwoStateSettings {
        precision: 3e-3,
        ..Default::default()
    };
    let run = |workers| {
        let config = ChainConfig {
            omega: 4,
            workers,
            ..Default::default()
        };
        let a = parallel_two_state(&model, std::slice::from_ref(&prop), &settings, &config, 2).unwrap();
        let b = parallel_skart(&model, &prop, &SkartSettings { h_star: 3e-3, ..Default::default() }, &config, 2)
            .unwrap();
        (a.properties[0].result.clone().unwrap(), b)
    };
    let (a1, b1) = run(1);
    for w in [2, 4] {
        let (a, b) = run(w);
        assert!(a.same_outcome(&a1));
        assert!(b.same_outcome(&b1));
    }
}

#[test]
fn empty_property_is_always_in_interest() {
    let model = small_model(1, 0.05);
    let all = MetaProperty::all("everything");
    let r = run_sequential(&model, &all, &TwoStateSettings::default(), 1, &SimOptions::default()).unwrap();
    assert_eq!((r.estimate, r.flag), (1.0, Some(Degeneracy::AlwaysInterest)));
    let r = skart_run(&model, &all, &SkartSettings::default(), 1, &SimOptions::default()).unwrap();
    assert_eq!((r.estimate, r.flag), (1.0, Some(Degeneracy::AlwaysInterest)));
    let config = ChainConfig::default();
    let r = parallel_skart(&model, &all, &SkartSettings::default(), &config, 1).unwrap();
    assert_eq!(r.flag, Some(Degeneracy::AlwaysInterest));
    let props = [all.clone(), MetaProperty::new("v0", &[(0, true)])];
    let settings = TwoStateSettings {
        precision: 5e-3,
        ..Default::default()
    };
    let r = parallel_two_state(&model, &props, &settings, &config, 1).unwrap();
    assert_eq!(r.properties[0].result.as_ref().unwrap().estimate, 1.0);
    assert!(r.properties[1].result.as_ref().unwrap().flag.is_none());
}

/// A model whose only fixed point is all-zero, with a target state that
/// is practically never visited.
fn sink_model() -> PbnModel {
    let text = r#"{"format":"pbn-1","n":12,"perturbation":1e-7,"nodes":[
        [{"parents":[0],"table":"0","prob":1}],[{"parents":[1],"table":"0","prob":1}],
        [{"parents":[2],"table":"0","prob":1}],[{"parents":[3],"table":"0","prob":1}],
        [{"parents":[4],"table":"0","prob":1}],[{"parents":[5],"table":"0","prob":1}],
        [{"parents":[6],"table":"0","prob":1}],[{"parents":[7],"table":"0","prob":1}],
        [{"parents":[8],"table":"0","prob":1}],[{"parents":[9],"table":"0","prob":1}],
        [{"parents":[10],"table":"0","prob":1}],[{"parents":[11],"table":"0","prob":1}]]}"#;
    pbn_steady::model::parse_model(text).unwrap()
}

#[test]
fn never_visited_meta_state() {
    let model = sink_model();
    let prop = MetaProperty::new("all-on", &(0..12).map(|i| (i, true)).collect::<Vec<_>>());
    let options = SimOptions {
        cap: 2_000_000,
        ..Default::default()
    };
    let err = run_sequential(&model, &prop, &TwoStateSettings::default(), 3, &options).unwrap_err();
    assert!(matches!(err, EstimateError::Degenerate { kind: Degeneracy::NeverInterest, .. }), "{err}");
    let err = skart_run(&model, &prop, &SkartSettings::default(), 3, &options).unwrap_err();
    assert!(matches!(err, EstimateError::Degenerate { kind: Degeneracy::NeverInterest, .. }), "{err}");
    let config = ChainConfig {
        sim: options.clone(),
        ..Default::default()
    };
    let err = parallel_skart(&model, &prop, &SkartSettings::default(), &config, 3).unwrap_err();
    assert!(err.is_degenerate(), "{err}");
    let r = parallel_two_state(&model, &[prop], &TwoStateSettings::default(), &config, 3).unwrap();
    assert!(r.properties[0].result.as_ref().unwrap_err().is_degenerate());
}

#[test]
fn degenerate_streams() {
    let zeros = || FixedSource::new(BitSeq::from_bits(std::iter::repeat(false).take(40_000)));
    let alternating = || FixedSource::new(BitSeq::from_bits((0..40_000).map(|i| i % 2 == 1)));
    let kind = |e: EstimateError| match e {
        EstimateError::Degenerate { kind, .. } => kind,
        other => panic!("unexpected {other}"),
    };
    let ts = TwoStateSettings::default();
    assert_eq!(kind(two_state::estimate_from_source(&mut zeros(), &ts).unwrap_err()), Degeneracy::NeverInterest);
    assert_eq!(kind(two_state::estimate_from_source(&mut alternating(), &ts).unwrap_err()), Degeneracy::Periodic);
    let sk = SkartSettings::default();
    assert_eq!(kind(skart::estimate_from_source(&mut zeros(), &sk).unwrap_err()), Degeneracy::NeverInterest);
    assert!(skart::estimate_from_source(&mut alternating(), &sk).unwrap_err().is_degenerate());
}

#[test]
fn memoryless_abstraction() {
    // alpha + beta = 1: the abstraction forgets its past in one step
    let p = two_state::TwoStateParams::new(0.3, 0.7);
    assert_eq!(two_state::burn_in_m(&p, 1e-10).unwrap(), 1);
    let mut src = SyntheticSource::new(SyntheticKind::Iid { q: 0.3 }, 1, 8);
    let settings = TwoStateSettings {
        precision: 5e-3,
        ..Default::default()
    };
    let r = two_state::estimate_from_source(&mut src, &settings).unwrap();
    assert!(r.estimate.is_finite() && (r.estimate - 0.3).abs() < 0.01);
}

#[test]
fn cap_exceeded_is_reported() {
    let model = small_model(2, 0.01);
    let prop = MetaProperty::new("v0", &[(0, true)]);
    let options = SimOptions {
        cap: 50_000,
        ..Default::default()
    };
    let settings = TwoStateSettings {
        precision: 1e-4,
        ..Default::default()
    };
    let err = run_sequential(&model, &prop, &settings, 1, &options).unwrap_err();
    assert!(matches!(err, EstimateError::CapExceeded { .. }), "{err}");
}
