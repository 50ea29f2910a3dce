use skmm::evaluator::{evaluate_selection, EvalConfig};
use skmm::moments::{second_moment, spectral_decomposition};
use skmm::selectors::skmm::MomentMatching;
use skmm::selectors::{
    run_selector, sketch_seed, uniform_indices, SelectionData, SelectorConfig, SkmmConfig,
    SkmmSelectorConfig,
};
use skmm::sketch::{apply_sketch, build_sketch, SketchKind};
use skmm::synth::{gmm_generate, GeneratedDataset, GmmSpec};

fn dataset(seed: u64) -> GeneratedDataset {
    gmm_generate(&GmmSpec {
        n: 300,
        r: 60,
        clusters: 4,
        sigma_max: 0.1,
        seed,
    })
    .unwrap()
}

fn skmm_cfg(m: usize) -> SkmmSelectorConfig {
    SkmmSelectorConfig {
        m,
        sketch: SketchKind::Gaussian,
        presketched: false,
        optimizer: SkmmConfig {
            iterations: 2000,
            learning_rate: 1e-4,
            ..SkmmConfig::default()
        },
    }
}

#[test]
fn skmm_raises_the_moment_ratio_over_a_uniform_subset() {
    let (n, m) = (24, 8);
    let mut wins = 0;
    for seed in 0..10 {
        let d = dataset(seed);
        let cfg = skmm_cfg(m);
        let sel = run_selector(
            &SelectorConfig::Skmm(cfg.clone()),
            &SelectionData::new(&d.features),
            n,
            seed,
        )
        .unwrap();

        let op = build_sketch(cfg.sketch, d.features.cols(), m, sketch_seed(seed)).unwrap();
        let sketched = apply_sketch(&d.features, &op).unwrap();
        let spec = spectral_decomposition(&second_moment(&sketched).unwrap()).unwrap();
        let mm = MomentMatching::new(&sketched, &spec, cfg.optimizer.c_s, false).unwrap();

        let mut vertex = vec![0.0; d.features.rows()];
        for i in uniform_indices(d.features.rows(), n, seed).unwrap() {
            vertex[i] = 1.0 / n as f64;
        }
        let weights = &sel.weights.as_ref().unwrap().s;
        let ours = mm.min_moment_ratio(weights);
        let base = mm.min_moment_ratio(&vertex);
        assert!(ours.is_finite() && base.is_finite());
        assert!(mm.evaluate(weights).value <= mm.evaluate(&vertex).value * (1.0 + 1e-12));
        if ours >= base {
            wins += 1;
        }
    }
    assert!(wins >= 8, "SkMM improved the ratio on only {wins}/10 seeds");
}

#[test]
fn objective_trace_ends_at_or_above_the_reported_best() {
    let d = dataset(3);
    let sel = run_selector(
        &SelectorConfig::Skmm(skmm_cfg(8)),
        &SelectionData::new(&d.features),
        30,
        1,
    )
    .unwrap();
    let trace = sel.objective_trace.as_ref().unwrap();
    let best = sel.objective.unwrap();
    assert_eq!(trace.first().unwrap().iteration, 0);
    assert_eq!(trace.last().unwrap().iteration, 2000);
    assert!(trace.iter().all(|t| t.objective >= best));
    assert!(best <= trace[0].objective);
}

#[test]
fn every_selector_feeds_the_evaluator() {
    let d = dataset(5);
    let methods = [
        SelectorConfig::Uniform,
        SelectorConfig::Herding,
        SelectorConfig::KCenter,
        SelectorConfig::Adaptive,
        SelectorConfig::TLeverage { rank: 8 },
        SelectorConfig::RLeverage { rho: 1e3 },
        SelectorConfig::Skmm(skmm_cfg(8)),
    ];
    let cfg = EvalConfig::default();
    for method in &methods {
        let sel = run_selector(method, &SelectionData::new(&d.features), 40, 2).unwrap();
        sel.validate(d.features.rows()).unwrap();
        assert_eq!(sel.method, method.name());
        let rep = evaluate_selection(&d.features, &d.labels, &sel.indices, &cfg).unwrap();
        assert!(rep.empirical_risk.is_finite() && rep.empirical_risk >= 0.0);
    }
}
