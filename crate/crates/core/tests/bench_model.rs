use nalgebra::{DMatrix, DVector};
use spaceiv_core::bench::{
    classify_assumptions, evaluate, generate_random_model, model_dataset, AssumptionGroup, BenchConfig, Method,
};
use spaceiv_core::graph::CausalGraph;
use spaceiv_core::model::{support, NoiseSpec, Scm};

#[test]
fn generated_models_follow_the_protocol() {
    let cfg = BenchConfig::default();
    for id in 0..300 {
        let scm = generate_random_model(&cfg, cfg.model_seed(id)).unwrap();
        let b = scm.b();
        // Acyclic and complete under some order: exactly one edge per pair.
        assert!(CausalGraph::from_scm(&scm, 0.0).is_ok());
        for i in 0..cfg.d {
            assert_eq!(b[(i, i)], 0.0);
            for j in 0..i {
                assert!((b[(i, j)] == 0.0) != (b[(j, i)] == 0.0), "pair ({i}, {j})");
            }
        }
        for row in b.row_iter() {
            let max = row.amax();
            assert!(max == 0.0 || (max - 1.0).abs() < 1e-15);
            assert!(row.iter().all(|&x| x == 0.0 || x.abs() >= 0.5 / 1.5 - 1e-12));
        }
        for i in 0..cfg.m.min(cfg.d) {
            assert_eq!(scm.a()[(i, i)], 1.0);
        }
        assert!(scm.a().iter().all(|&x| x == 0.0 || x == 1.0));
        let pa = support(scm.beta_star());
        assert_eq!(pa.len(), 2);
        assert!(pa.iter().all(|&j| scm.beta_star()[j] == 1.0));
        assert_eq!(scm.noise().confounder_dim, cfg.q);
    }
}

#[test]
fn exactly_one_causal_order_root() {
    let cfg = BenchConfig::default();
    for id in 0..50 {
        let scm = generate_random_model(&cfg, cfg.model_seed(id)).unwrap();
        let roots = scm.b().row_iter().filter(|r| r.amax() == 0.0).count();
        assert_eq!(roots, 1);
    }
}

#[test]
fn models_and_runs_are_reproducible() {
    let cfg = BenchConfig::default();
    let s1 = generate_random_model(&cfg, cfg.model_seed(4)).unwrap();
    let s2 = generate_random_model(&cfg, cfg.model_seed(4)).unwrap();
    assert_eq!(s1, s2);
    let data = model_dataset(&cfg, &s1, 4, 100).unwrap();
    assert_eq!(data, model_dataset(&cfg, &s2, 4, 100).unwrap());
    for method in Method::ALL {
        let a = evaluate(method, &s1, &data, &cfg).unwrap();
        let b = evaluate(method, &s1, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.rmse >= 0.0);
    }
}

#[test]
fn duplicated_parent_columns_are_never_fully_identified() {
    // X1 and X2 receive the same instrument and nothing else.
    let b = DMatrix::zeros(3, 3);
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let scm = Scm::new(b, a, DVector::from_vec(vec![1.0, 1.0, 0.0]), NoiseSpec::standard(3)).unwrap();
    assert_ne!(classify_assumptions(&scm), AssumptionGroup::A1AndA3);
    assert_eq!(classify_assumptions(&scm), AssumptionGroup::None);
}
