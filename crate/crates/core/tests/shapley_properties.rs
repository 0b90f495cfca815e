mod common;

use common::{permutation_lsv, random_point, RandomModel};
use foolshap::cache::{load_lsv, save_lsv, CacheMeta};
use foolshap::model::{FnModel, Model, ModelSpec};
use foolshap::rng::{seeded, Categorical};
use foolshap::shapley::{local_shapley, weighted_gsv, BackgroundCoefficients, Explainer};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn efficiency(seed in any::<u64>(), d in 1usize..=8) {
        let mut rng = seeded(seed);
        let f = RandomModel::new(&mut rng, d, &[]);
        let x = random_point(&mut rng, d);
        let z = random_point(&mut rng, d);
        let phi = local_shapley(&f, &x, &z).unwrap();
        prop_assert!((phi.sum() - (f.predict(&x) - f.predict(&z))).abs() < 1e-9);
    }

    #[test]
    fn dummy_feature_is_exactly_zero(seed in any::<u64>(), d in 2usize..=7) {
        let mut rng = seeded(seed);
        let skip = rng.gen_range(0..d);
        let f = RandomModel::new(&mut rng, d, &[skip]);
        let x = random_point(&mut rng, d);
        let z = random_point(&mut rng, d);
        prop_assert_eq!(local_shapley(&f, &x, &z).unwrap().phi[skip], 0.0);
    }

    #[test]
    fn symmetry_under_column_permutation(seed in any::<u64>(), d in 2usize..=6) {
        let mut rng = seeded(seed);
        let f = RandomModel::new(&mut rng, d, &[]);
        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        // g reads column k of its input where f read column perm[k]
        let g = FnModel::new(|v: &[f64]| {
            let mut u = vec![0.0; v.len()];
            for (k, &p) in perm.iter().enumerate() {
                u[p] = v[k];
            }
            f.predict(&u)
        });
        let x = random_point(&mut rng, d);
        let z = random_point(&mut rng, d);
        let px: Vec<f64> = perm.iter().map(|&p| x[p]).collect();
        let pz: Vec<f64> = perm.iter().map(|&p| z[p]).collect();
        let phi_f = local_shapley(&f, &x, &z).unwrap().phi;
        let phi_g = local_shapley(&g, &px, &pz).unwrap().phi;
        for (k, &p) in perm.iter().enumerate() {
            prop_assert!((phi_g[k] - phi_f[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn linearity(seed in any::<u64>(), d in 1usize..=6, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = seeded(seed);
        let f = RandomModel::new(&mut rng, d, &[]);
        let g = RandomModel::new(&mut rng, d, &[]);
        let h = FnModel::new(|v: &[f64]| a * f.predict(v) + b * g.predict(v));
        let x = random_point(&mut rng, d);
        let z = random_point(&mut rng, d);
        let pf = local_shapley(&f, &x, &z).unwrap().phi;
        let pg = local_shapley(&g, &x, &z).unwrap().phi;
        let ph = local_shapley(&h, &x, &z).unwrap().phi;
        for i in 0..d {
            prop_assert!((ph[i] - (a * pf[i] + b * pg[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_permutation_average(seed in any::<u64>(), d in 1usize..=5) {
        let mut rng = seeded(seed);
        let f = RandomModel::new(&mut rng, d, &[]);
        let x = random_point(&mut rng, d);
        let z = random_point(&mut rng, d);
        let fast = local_shapley(&f, &x, &z).unwrap().phi;
        let slow = permutation_lsv(&f, &x, &z);
        for i in 0..d {
            prop_assert!((fast[i] - slow[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn plug_in_gsv_sums_to_mean_gap(seed in any::<u64>(), d in 1usize..=5, n0 in 1usize..8, n1 in 1usize..8) {
        let mut rng = seeded(seed);
        let f = RandomModel::new(&mut rng, d, &[]);
        let s0: Vec<Vec<f64>> = (0..n0).map(|_| random_point(&mut rng, d)).collect();
        let s1: Vec<Vec<f64>> = (0..n1).map(|_| random_point(&mut rng, d)).collect();
        let gsv = Explainer::new(&f).global(&s0, &s1).unwrap();
        let gap = s0.iter().map(|x| f.predict(x)).sum::<f64>() / n0 as f64
            - s1.iter().map(|z| f.predict(z)).sum::<f64>() / n1 as f64;
        prop_assert!((gsv.sum() - gap).abs() < 1e-9);
    }
}

#[test]
fn linear_model_closed_form() {
    let mut rng = seeded(3);
    for _ in 0..50 {
        let d = rng.gen_range(1..10);
        let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w = weights.clone();
        let f = FnModel::new(move |v: &[f64]| w.iter().zip(v).map(|(a, b)| a * b).sum());
        let x = random_point(&mut rng, d);
        let z = random_point(&mut rng, d);
        let phi = local_shapley(&f, &x, &z).unwrap().phi;
        for i in 0..d {
            assert!((phi[i] - weights[i] * (x[i] - z[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn confidence_interval_covers_population_value() {
    // finite populations play the role of the true distributions
    let mut rng = seeded(17);
    let f = RandomModel::new(&mut rng, 3, &[]);
    let pop0: Vec<Vec<f64>> = (0..400).map(|_| random_point(&mut rng, 3)).collect();
    let pop1: Vec<Vec<f64>> = (0..400)
        .map(|_| random_point(&mut rng, 3).into_iter().map(|v| v + 0.7).collect())
        .collect();
    let truth = Explainer::new(&f).global(&pop0, &pop1).unwrap().phi[0];
    let m = 60;
    let reps = 200;
    let mut covered = 0;
    let mut explainer = Explainer::new(&f);
    for _ in 0..reps {
        let s0: Vec<Vec<f64>> = (0..m).map(|_| pop0[rng.gen_range(0..400)].clone()).collect();
        let s1: Vec<Vec<f64>> = (0..m).map(|_| pop1[rng.gen_range(0..400)].clone()).collect();
        let ci = explainer.confidence_interval(&s0, &s1, 0, 0.05).unwrap();
        covered += usize::from(ci.contains(truth));
    }
    let rate = covered as f64 / reps as f64;
    assert!(rate >= 0.9, "coverage {rate}");
}

#[test]
fn weighted_estimate_converges() {
    let mut rng = seeded(5);
    let f = RandomModel::new(&mut rng, 3, &[]);
    let fore: Vec<Vec<f64>> = (0..10).map(|_| random_point(&mut rng, 3)).collect();
    let d1: Vec<Vec<f64>> = (0..40).map(|_| random_point(&mut rng, 3)).collect();
    let omega: Vec<f64> = {
        let raw: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / t).collect()
    };
    let mut explainer = Explainer::new(&f);
    let coeffs: Vec<f64> = d1
        .iter()
        .map(|z| explainer.background_coefficient(&fore, z, 0).unwrap())
        .collect();
    let target = weighted_gsv(
        &BackgroundCoefficients {
            coeffs: coeffs.clone(),
            sensitive_index: 0,
            foreground_ids: vec![],
        },
        &omega,
    )
    .unwrap();
    let cat = Categorical::new(&omega).unwrap();
    let mut last = f64::INFINITY;
    for m in [16, 64, 256] {
        let mut dev = 0.0;
        for _ in 0..100 {
            let back: Vec<Vec<f64>> = cat.sample_n(&mut rng, m).into_iter().map(|j| d1[j].clone()).collect();
            dev += (explainer.global(&fore, &back).unwrap().phi[0] - target).abs();
        }
        dev /= 100.0;
        assert!(dev < last, "mean deviation {dev} at M={m} did not drop below {last}");
        last = dev;
    }
}

#[test]
fn cached_grid_round_trips() {
    let spec = ModelSpec::Logistic {
        weights: vec![0.4, -0.2, 0.9],
        bias: 0.1,
    };
    let mut rng = seeded(8);
    let fore: Vec<Vec<f64>> = (0..4).map(|_| random_point(&mut rng, 3)).collect();
    let back: Vec<Vec<f64>> = (0..5).map(|_| random_point(&mut rng, 3)).collect();
    let lsv = Explainer::new(&spec).lsv_matrix(&fore, &back).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.bin");
    let meta = CacheMeta {
        n_fore: 4,
        n_back: 5,
        d: 3,
        model_hash: spec.hash(),
        foreground_ids: (0..4).collect(),
        background_ids: (0..5).collect(),
        feature_names: vec!["a".into(), "b".into(), "c".into()],
    };
    save_lsv(&path, &lsv, &meta).unwrap();
    let (back_lsv, _) = load_lsv(&path, &spec.hash()).unwrap();
    assert_eq!(back_lsv, lsv);
    let direct = Explainer::new(&spec).global(&fore, &back).unwrap().phi;
    for (a, b) in back_lsv.global().iter().zip(&direct) {
        assert!((a - b).abs() < 1e-15);
    }
}
