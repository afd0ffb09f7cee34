use mdev_core::efficiency::*;
use mdev_core::exit::{exit_asymptotic, exit_ball_exact, exit_is, Method};
use mdev_core::geometry::{BodySpec, ConvexBody};
use mdev_core::models::{Bernoulli, Estimator, EstimatorKind, FamilySpec, GaussianLocation, GaussianMeanVector};
use mdev_core::numerics::{normal_cdf, RngStream, SpdMatrix};

/// `P(Bin(n, p) = k)` by the multiplicative recurrence, in linear space
/// from the mode outward.
fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mode = ((n as f64 + 1.0) * p).floor().min(n as f64) as usize;
    let mut w = vec![0.0; n as usize + 1];
    w[mode] = 1.0;
    for k in mode..n as usize {
        w[k + 1] = w[k] * (n as f64 - k as f64) / (k as f64 + 1.0) * p / (1.0 - p);
    }
    for k in (1..=mode).rev() {
        w[k - 1] = w[k] * k as f64 / (n as f64 - k as f64 + 1.0) * (1.0 - p) / p;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn bernoulli_oracle(n: u64, b_n: f64, theta: f64, theta0: f64) -> f64 {
    let a = 1.0 / (theta0 * (1.0 - theta0)).sqrt();
    binomial_pmf(n, theta)
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let est = (*k as f64 / n as f64).clamp(1e-6, 1.0 - 1e-6);
            (a * (est - theta)).abs() >= b_n
        })
        .map(|(_, p)| p)
        .sum()
}

#[test]
fn denominator_examples() {
    let ball = ConvexBody::ball(2, 1.0).unwrap();
    let s = RngStream::new(1, 0);
    let d = denominator(&ball, 100, 0.3, 0, &s).unwrap();
    assert!((d.value - (-4.5f64).exp()).abs() < 1e-15);
    assert_eq!(d.method, Method::Exact);
    let far = denominator(&ball, 400, 1.0, 0, &s).unwrap();
    assert!((far.log_value + 200.0).abs() < 1e-10);

    let ell = ConvexBody::ellipsoid(vec![1.0, 0.5], 1.0).unwrap();
    let d = denominator(&ell, 25, 1.0, 1_000_000, &s).unwrap();
    assert_eq!(d.method, Method::Asymptotic);
    assert!((d.value / 6.868e-7 - 1.0).abs() < 1e-3, "{}", d.value);
    assert!(d.warnings.is_empty(), "{:?}", d.warnings);
    // outside the asymptotic regime importance sampling is used
    assert_eq!(denominator(&ell, 1, 1.0, 0, &s).unwrap().method, Method::Is);
}

#[test]
fn denominator_routes_agree() {
    for dim in [2, 3] {
        let ball = ConvexBody::ball(dim, 1.0).unwrap();
        for t in [3.0, 4.5, 6.0] {
            let exact = exit_ball_exact(dim, t, 1.0).unwrap();
            let asym = exit_asymptotic(&ball, t, 3.0).unwrap();
            let is = exit_is(&ball, t, 200_000, &RngStream::new(2, dim as u64)).unwrap();
            let pairs = [(&exact, &asym), (&exact, &is), (&asym, &is)];
            for (a, b) in pairs {
                let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
                // the asymptotic route carries an O(1/t²) relative bias
                let rel = if a.method == Method::Asymptotic || b.method == Method::Asymptotic {
                    0.05f64.max(5.0 / (t * t))
                } else {
                    0.05
                };
                let tol = (3.0 * se).max(rel * a.value.max(b.value));
                assert!((a.value - b.value).abs() <= tol, "d={dim} t={t} {a:?} {b:?}");
            }
        }
    }
}

#[test]
fn gaussian_numerator_matches_normal_tail() {
    let g = GaussianLocation::new(1.0).unwrap();
    let body = ConvexBody::ball(1, 1.0).unwrap();
    let scaling = SpdMatrix::identity(1);
    let problem = DeviationProblem {
        family: &g,
        estimator: &Estimator::SampleMean,
        theta: &[0.0],
        n: 100,
        b_n: 0.3,
        body: &body,
        scaling: &scaling,
    };
    let exact = 2.0 * normal_cdf(-3.0);
    assert!((exact - 2.6998e-3).abs() < 1e-7);
    let mc = McConfig {
        n_trials: 100_000,
        use_is: false,
        engine: Engine::Mc,
    };
    let est = numerator(&problem, &mc, &RngStream::new(3, 0)).unwrap();
    assert_eq!(est.method, Method::Mc);
    assert!((est.value - exact).abs() <= 3.0 * est.std_error, "{est:?}");

    let is = McConfig {
        n_trials: 20_000,
        use_is: true,
        engine: Engine::Auto,
    };
    let est = numerator(&problem, &is, &RngStream::new(3, 1)).unwrap();
    assert_eq!(est.method, Method::Is);
    assert!((est.value - exact).abs() <= 3.0 * est.std_error, "{est:?}");
    assert!(est.std_error < 0.05 * exact);
}

#[test]
fn numerator_vanishes_for_large_scales() {
    let g = GaussianLocation::new(1.0).unwrap();
    let body = ConvexBody::ball(1, 1.0).unwrap();
    let scaling = SpdMatrix::identity(1);
    let mc = McConfig {
        n_trials: 2_000,
        use_is: false,
        engine: Engine::Mc,
    };
    let mut last = 1.0;
    for b in [0.05, 0.1, 0.2, 0.4, 1.0, 5.0] {
        let p = DeviationProblem {
            family: &g,
            estimator: &Estimator::SampleMean,
            theta: &[0.0],
            n: 50,
            b_n: b,
            body: &body,
            scaling: &scaling,
        };
        // common random numbers make the estimate monotone in b
        let v = numerator(&p, &mc, &RngStream::new(4, 0)).unwrap().value;
        assert!(v <= last);
        last = v;
    }
    assert_eq!(last, 0.0);
}

#[test]
fn bernoulli_numerator_engines_agree_with_enumeration() {
    let n = 400;
    let b_n = 0.4 * (400f64).powf(-0.35);
    assert!((b_n - 0.049).abs() < 1e-3);
    let body = ConvexBody::ball(1, 1.0).unwrap();
    let scaling = SpdMatrix::scalar(2.0).unwrap();
    let oracle = bernoulli_oracle(n, b_n, 0.5, 0.5);
    for (estimator, seed) in [(Estimator::Mle, 5), (Estimator::SampleMean, 6)] {
        let p = DeviationProblem {
            family: &Bernoulli,
            estimator: &estimator,
            theta: &[0.5],
            n,
            b_n,
            body: &body,
            scaling: &scaling,
        };
        let exact = numerator_enumeration(&p).unwrap();
        assert!((exact.value - oracle).abs() < 1e-12, "{} vs {oracle}", exact.value);
        let mc = numerator_mc(&p, 50_000, &RngStream::new(seed, 0)).unwrap();
        assert!((mc.value - oracle).abs() <= 3.0 * mc.std_error);
        if estimator.is_linear() {
            let is = numerator_is(&p, 20_000, &RngStream::new(seed, 1)).unwrap();
            assert!((is.value - oracle).abs() <= 3.0 * is.std_error, "{is:?} {oracle}");
        }
    }
    // off-centre θ against the same oracle
    let p = DeviationProblem {
        family: &Bernoulli,
        estimator: &Estimator::Mle,
        theta: &[0.56],
        n,
        b_n,
        body: &body,
        scaling: &scaling,
    };
    let exact = numerator_enumeration(&p).unwrap();
    assert!((exact.value - bernoulli_oracle(n, b_n, 0.56, 0.5)).abs() < 1e-12);
}

#[test]
fn is_falls_back_for_nonlinear_estimators() {
    let body = ConvexBody::ball(1, 1.0).unwrap();
    let scaling = SpdMatrix::identity(1);
    let fam = mdev_core::models::ExponentialRate;
    let p = DeviationProblem {
        family: &fam,
        estimator: &Estimator::Mle,
        theta: &[1.0],
        n: 20,
        b_n: 0.3,
        body: &body,
        scaling: &scaling,
    };
    let mc = McConfig {
        n_trials: 1_000,
        use_is: true,
        engine: Engine::Auto,
    };
    let est = numerator(&p, &mc, &RngStream::new(7, 0)).unwrap();
    assert_eq!(est.method, Method::Mc);
    assert_eq!(est.warnings.len(), 1);
}

fn gaussian_config(n_grid: Vec<u64>, points: usize, trials: u64) -> ExperimentConfig {
    ExperimentConfig {
        family: FamilySpec::GaussianLocation { sigma2: 1.0 },
        estimator: EstimatorKind::SampleMean,
        theta0: vec![0.0],
        body: BodySpec::Ball { dim: 1, r: 1.0 },
        bn_rule: BnRule { c: 1.0, gamma: 0.4 },
        n_grid,
        cn_rule: CnRule::default(),
        theta_grid_points: points,
        mc: McConfig {
            n_trials: trials,
            use_is: false,
            engine: Engine::Mc,
        },
        master_seed: 42,
    }
}

#[test]
fn gaussian_sweep_attains_ratio_one() {
    let cfg = gaussian_config(vec![100, 1000], 3, 50_000);
    let rep = efficiency_sweep(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 2 * 5);
    for row in &rep.rows {
        let (r, se) = (row.ratio.unwrap(), row.ratio_std_error.unwrap());
        // I is constant, so every θ in the window gives ratio 1 exactly
        assert!((r - 1.0).abs() <= 3.0 * se, "{row:?}");
        assert!(r.is_finite() && r > 0.0);
    }
    for s in &rep.summary {
        assert!(s.sup_at_least_one);
        assert!(s.sup_ratio.unwrap() >= s.ratio_at_theta0.unwrap());
    }
    assert!(rep.warnings.is_empty());
}

#[test]
fn gaussian_vector_sweep_attains_ratio_one() {
    let mut cfg = gaussian_config(vec![200], 1, 40_000);
    cfg.family = FamilySpec::GaussianMeanVector {
        cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    };
    cfg.theta0 = vec![0.0, 0.0];
    cfg.body = BodySpec::Ball { dim: 2, r: 1.0 };
    let rep = efficiency_sweep(&cfg).unwrap();
    let row = &rep.rows[0];
    assert!((row.ratio.unwrap() - 1.0).abs() <= 3.0 * row.ratio_std_error.unwrap(), "{row:?}");
}

#[test]
fn sweep_is_reproducible() {
    let cfg = gaussian_config(vec![50, 200], 2, 3_000);
    let a = serde_json::to_string(&efficiency_sweep(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&efficiency_sweep(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.master_seed = 43;
    assert_ne!(a, serde_json::to_string(&efficiency_sweep(&other).unwrap()).unwrap());
    assert_eq!(canonical_hash(&cfg).unwrap(), canonical_hash(&cfg.clone()).unwrap());
    assert_ne!(canonical_hash(&cfg).unwrap(), canonical_hash(&other).unwrap());
}

#[test]
fn bernoulli_trend_towards_one() {
    let cfg = ExperimentConfig {
        family: FamilySpec::Bernoulli {},
        estimator: EstimatorKind::Mle,
        theta0: vec![0.5],
        body: BodySpec::Ball { dim: 1, r: 1.0 },
        bn_rule: BnRule { c: 1.0, gamma: 0.4 },
        n_grid: vec![400, 4000, 40000],
        cn_rule: CnRule::default(),
        theta_grid_points: 5,
        mc: McConfig {
            n_trials: 1000,
            use_is: false,
            engine: Engine::Enumeration,
        },
        master_seed: 1,
    };
    let rep = efficiency_sweep(&cfg).unwrap();
    let mut last = f64::INFINITY;
    for s in &rep.summary {
        let sup = s.sup_ratio.unwrap();
        assert!(sup.is_finite() && sup > 0.0);
        let gap = (sup - 1.0).abs();
        assert!(gap < last, "{:?}", rep.summary);
        last = gap;
    }
    // every row against the linear-space oracle
    for row in &rep.rows {
        let oracle = bernoulli_oracle(row.n, row.b_n, row.theta[0], 0.5);
        let num = row.numerator.as_ref().unwrap().value;
        assert!((num - oracle).abs() <= 1e-10 * oracle.max(1e-300), "{row:?} {oracle}");
    }
}

#[test]
fn config_validation() {
    let mut cfg = gaussian_config(vec![100], 1, 100);
    cfg.bn_rule.gamma = 0.5;
    assert!(cfg.prepare().is_err());
    cfg.bn_rule.gamma = 0.0;
    assert!(cfg.prepare().is_err());
    cfg.bn_rule.gamma = 0.3;
    assert_eq!(cfg.prepare().unwrap().warnings.len(), 1);
    cfg.bn_rule.gamma = 0.4;
    assert!(cfg.prepare().unwrap().warnings.is_empty());
    cfg.n_grid = vec![];
    assert!(cfg.prepare().is_err());
    let mut cfg = gaussian_config(vec![100], 1, 100);
    cfg.body = BodySpec::Ball { dim: 2, r: 1.0 };
    assert!(cfg.prepare().is_err());

    let text = r#"{"family":{"family":"bernoulli"},"estimator":"mle","theta0":[0.5],
        "body":{"kind":"ball","dim":1,"r":1.0},"bn_rule":{"gamma":0.4},"n_grid":[400],
        "mc":{"n_trials":1000},"master_seed":3}"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    assert_eq!(cfg.theta_grid_points, 5);
    assert_eq!(cfg.cn_rule.c0, 1.0);
    assert_eq!(cfg.mc.engine, Engine::Auto);
    assert!(ExperimentConfig::from_json(&text.replace("\"master_seed\"", "\"seed\"")).is_err());
}

#[test]
fn failed_cells_do_not_abort() {
    let mut cfg = gaussian_config(vec![100, 200], 2, 100);
    cfg.mc.engine = Engine::Enumeration;
    let rep = efficiency_sweep(&cfg).unwrap();
    assert!(rep.rows.iter().all(|r| r.error.is_some() && r.ratio.is_none()));
    assert!(rep.summary.iter().all(|s| s.failed_rows == 3 && s.sup_ratio.is_none()));
}

#[test]
fn theta_grid_stays_in_window() {
    let g = GaussianLocation::new(1.0).unwrap();
    let grid = theta_grid(&g, &[1.0], 0.5, 5);
    assert_eq!(grid.len(), 9);
    assert_eq!(grid[0], vec![1.0]);
    assert!(grid.iter().all(|t| (t[0] - 1.0).abs() < 0.5));
    // points leaving (0, 1) are dropped
    let grid = theta_grid(&Bernoulli, &[0.1], 0.3, 4);
    assert!(grid.iter().all(|t| t[0] > 0.0 && t[0] < 1.0));
    assert_eq!(grid.len(), 1 + 3 + 1);
    let v = GaussianMeanVector::isotropic(2);
    assert_eq!(theta_grid(&v, &[0.0, 0.0], 1.0, 3).len(), 1 + 2 * 4);
}

#[test]
fn bahadur_gaussian_examples() {
    let g = GaussianLocation::new(1.0).unwrap();
    let mc = McConfig {
        n_trials: 1000,
        use_is: false,
        engine: Engine::Auto,
    };
    let s = RngStream::new(0, 0);
    let at = |root_nb: f64| {
        let n = 100u64;
        bahadur_log_bound(&g, 0.0, &Estimator::SampleMean, n, root_nb / 10.0, &mc, &s).unwrap()
    };
    let r4 = at(4.0);
    let oracle = (2.0 * normal_cdf(-4.0)).ln() / 8.0;
    assert!((r4.normalized_log - oracle).abs() < 1e-12);
    assert!((r4.normalized_log + 1.208).abs() < 1e-3);
    assert!((r4.slack + 0.208).abs() < 1e-3);
    assert_eq!(r4.bound, -1.0);
    assert!(r4.consistent);
    assert!(at(6.0).slack.abs() < at(3.0).slack.abs());
}

#[test]
fn bahadur_bernoulli_and_simulated() {
    let mc = McConfig {
        n_trials: 20_000,
        use_is: true,
        engine: Engine::Auto,
    };
    let s = RngStream::new(9, 0);
    let r = bahadur_log_bound(&Bernoulli, 0.5, &Estimator::Mle, 1000, 0.05, &mc, &s).unwrap();
    assert_eq!(r.probability.method, Method::Exact);
    assert_eq!(r.bound, -4.0);
    assert!(r.normalized_log.is_finite());
    // exponential MLE: direct simulation, non-linear so no IS fallback
    let e = mdev_core::models::ExponentialRate;
    let r = bahadur_log_bound(&e, 1.0, &Estimator::Mle, 100, 0.2, &mc, &s).unwrap();
    assert_eq!(r.probability.method, Method::Mc);
    assert!(r.consistent, "{r:?}");
    // tiny probability for the gaussian sample mean through the IS switch
    let g = GaussianLocation::new(1.0).unwrap();
    let plug = Estimator::Plugin(std::sync::Arc::new(|xs: &[f64]| vec![xs.iter().sum::<f64>() / xs.len() as f64]));
    assert!(bahadur_log_bound(&g, 0.0, &plug, 100, 0.5, &McConfig { n_trials: 100, use_is: false, engine: Engine::Mc }, &s).is_err());
}
