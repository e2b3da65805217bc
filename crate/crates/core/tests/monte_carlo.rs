//! Seeded Monte Carlo checks of the generators, the normality test and the
//! residual bootstrap.

use jointdep::causal::{residual_bootstrap_test, DagModel, SemTestOptions, SplineConfig};
use jointdep::inference::{
    energy_normality_pvalue, expected_abs_normal, expected_normal_pair_distance, NormalityTestConfig,
};
use jointdep::metrics::{centered_matrices, dcov_sq_high_order};
use jointdep::simulate::{
    covariance, gen_gaussian_copula, gen_mvn, gen_triplet, gen_vector_triplet_with_components, run_experiment,
    CovKind, ExperimentConfig,
};
use jointdep::{rng, BootstrapConfig, CenteredMatrix, Dataset, Estimator, MetricConfig, Statistic, Variant};
use rand::Rng;
use rand_distr::{Exp, StandardNormal};

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn copula_moments() {
    let ds = gen_gaussian_copula(10_000, 3, 1, 5).unwrap();
    for c in 0..3 {
        let (m, v) = mean_var(&ds.column(c));
        assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.05, "column {c}: {m} {v}");
    }
}

#[test]
fn mvn_sample_covariance() {
    let d = 5;
    for kind in [CovKind::Ar1, CovKind::Banded, CovKind::Block] {
        let sigma = covariance(d, kind, 0.25).unwrap();
        let ds = gen_mvn(100_000, d, kind, 0.25, 9).unwrap();
        let cols: Vec<Vec<f64>> = (0..d).map(|c| ds.column(c)).collect();
        let n = 100_000.0;
        for i in 0..d {
            for j in 0..d {
                let s: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum::<f64>() / n;
                assert!((s - sigma[i * d + j]).abs() < 0.02, "{kind:?} ({i},{j}): {s}");
            }
        }
    }
}

#[test]
fn exponential_mean_is_sqrt_two() {
    let mut r = rng::stream(3, &[]);
    let e = Exp::new(1.0 / std::f64::consts::SQRT_2).unwrap();
    let m = (0..100_000).map(|_| r.sample(e)).sum::<f64>() / 100_000.0;
    assert!((m / std::f64::consts::SQRT_2 - 1.0).abs() < 0.01, "{m}");
    // the triplet's |Z| is that exponential
    let t = gen_triplet(100_000, 1, 4).unwrap();
    let mz = t.column(2).iter().map(|v| v.abs()).sum::<f64>() / 100_000.0;
    assert!((mz / std::f64::consts::SQRT_2 - 1.0).abs() < 0.01, "{mz}");
}

#[test]
fn mixture_components_are_balanced() {
    let (_, comps) = gen_vector_triplet_with_components(10_000, 2, 2, 8).unwrap();
    for k in 0..3u8 {
        let f = comps.iter().filter(|&&c| c == k).count() as f64 / 10_000.0;
        assert!((f - 1.0 / 3.0).abs() < 0.02, "component {k}: {f}");
    }
}

#[test]
fn triplet_is_pairwise_independent_but_jointly_dependent() {
    let ds = gen_triplet(500, 1, 12).unwrap();
    let mats = centered_matrices(&ds, Estimator::U).unwrap();
    let pair = dcov_sq_high_order(&[&mats[0], &mats[2]], Estimator::U).unwrap().value;
    let refs: Vec<&CenteredMatrix> = mats.iter().collect();
    let triple = dcov_sq_high_order(&refs, Estimator::U).unwrap().value;
    assert!(pair.abs() < 0.01, "pairwise {pair}");
    assert!(triple > 0.05, "third order {triple}");
    assert!(triple > 10.0 * pair.abs());
}

#[test]
fn expected_distance_formulas() {
    // E|a − Z| by trapezoid integration on a wide grid
    for a in [0.0, 0.7, -1.9] {
        let h = 1e-3;
        let integral: f64 = (-12_000..=12_000)
            .map(|i| {
                let z = i as f64 * h;
                (a - z).abs() * (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() * h
            })
            .sum();
        assert!((integral - expected_abs_normal(a)).abs() < 1e-6, "a = {a}");
    }
    assert!((expected_abs_normal(0.0) - 0.7979).abs() < 1e-4);
    let mut r = rng::stream(21, &[]);
    for p in [1usize, 3] {
        let m = 200_000;
        let s: f64 = (0..m)
            .map(|_| {
                (0..p)
                    .map(|_| {
                        let d: f64 = r.sample::<f64, _>(StandardNormal) - r.sample::<f64, _>(StandardNormal);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / m as f64;
        assert!((s - expected_normal_pair_distance(p)).abs() < 0.01, "p = {p}: {s}");
    }
    assert!((expected_normal_pair_distance(1) - 1.1284).abs() < 1e-4);
}

#[test]
fn normality_test_size_and_power() {
    let ncfg = NormalityTestConfig {
        b_param: 99,
        mc_draws: 500,
        seed: 1,
    };
    let mut rejections = 0;
    let reps = 40;
    for rep in 0..reps {
        let ds = gen_gaussian_copula(60, 2, 1, 500 + rep).unwrap();
        if energy_normality_pvalue(ds.values(), 60, 2, &ncfg).unwrap() <= 0.05 {
            rejections += 1;
        }
    }
    assert!(rejections <= 6, "{rejections} of {reps} normal samples rejected");
    let skewed = gen_gaussian_copula(100, 2, 3, 77).unwrap();
    let p = energy_normality_pvalue(skewed.values(), 100, 2, &ncfg).unwrap();
    assert!(p <= 0.05, "cubed normals not detected: {p}");
    let one = gen_gaussian_copula(100, 1, 3, 78).unwrap();
    assert!(energy_normality_pvalue(one.values(), 100, 1, &ncfg).unwrap() <= 0.05);
}

#[test]
fn scaled_jdcov_beats_plain_on_vector_triplet() {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        seed = 54
        reps = 150
        bootstrap = 200
        levels = [0.1]
        [[generator]]
        example = "vector-triplet"
        variant = 1
        n = 100
        p = 5
        [[test]]
        statistic = "jdcov"
        [[test]]
        statistic = "jdcov-s"
        "#,
    )
    .unwrap();
    let r = run_experiment(&cfg).unwrap();
    let (plain, scaled) = (r.rows[0].proportion, r.rows[1].proportion);
    assert!(scaled > plain, "JdCov_S {scaled} vs JdCov {plain}");
}

fn sem_sample(seed: u64, n: usize) -> Dataset {
    let mut r = rng::stream(seed, &[]);
    let x1: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let x2: Vec<f64> = x1
        .iter()
        .map(|&x| 0.6 * (x * x - 1.0) + 0.918 * r.sample::<f64, _>(StandardNormal))
        .collect();
    let x3: Vec<f64> = x1
        .iter()
        .map(|&x| (1.5 * x).sin() + 0.95 * r.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::from_columns(&["x1", "x2", "x3"], &[x1, x2, x3]).unwrap()
}

#[test]
fn true_dag_outscores_reversed_dag() {
    let truth = DagModel::new(vec![vec![], vec![0], vec![0]]).unwrap();
    let reversed = truth.reversed().unwrap();
    let stat = Statistic::Jdcov(MetricConfig::new(1.0, Estimator::U, Variant::Plain).unwrap());
    let scfg = SplineConfig::default();
    let opts = SemTestOptions::default();
    let mut pt = Vec::new();
    let mut pr = Vec::new();
    for run in 0..50u64 {
        let ds = sem_sample(9000 + run, 150);
        let boot = BootstrapConfig::new(stat, 50, run, 0.05).unwrap();
        pt.push(residual_bootstrap_test(&ds, &truth, &boot, &scfg, &opts).unwrap().p_value);
        pr.push(residual_bootstrap_test(&ds, &reversed, &boot, &scfg, &opts).unwrap().p_value);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[24] + v[25]) / 2.0
    };
    let (mt, mr) = (median(&mut pt), median(&mut pr));
    assert!(mt > mr, "true {mt} vs reversed {mr}");
}
