//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails or overruns its time budget.

use std::time::{Duration, Instant};

use fedshift::fed::{
    broadcast_shuffled_pool, consistency_sweep, run_training, ConsistencyRatios, DiscreteShiftFamily, RatioPipeline,
    ServerHyper, SupremumMethod, TrainMode, TrainingConfig,
};
use fedshift::predictors::PredictorSpec;
use fedshift::ratio::{
    empirical_bd_risk, estimate_supremum_histogram, estimate_supremum_kmeans, nnbd_gradient, nnbd_objective,
    train_ratio_model, BregmanVariant, RatioArch, RatioHyper, RatioKind, RatioModel,
};
use fedshift::ridge::{
    bias_variance_fixed, bias_variance_onehot, mc_identity_check, no_reweight_sweep, sample_problem, reweight_sweep,
    ConditionForm, OneHotSpectrum,
};
use fedshift::rng::{self, StreamTag};
use fedshift::synthdata::{
    fashion_mnist_five_client_counts, gaussian_shift_pair, ratio_twenty_counts, BaseGenerator, ClientCounts,
    CountTable, GaussianClusters, ShiftScenario,
};
use rand::Rng;

struct Check {
    pass: bool,
    detail: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn reweight() -> Check {
    let r = reweight_sweep(10_000, 2024, ConditionForm::Stated).unwrap();
    let witness = r
        .first_violation
        .as_ref()
        .map(|(p, w)| format!("; first: mu={:?} lambda={} w={:.4?}", p.mu, p.lambda, w))
        .unwrap_or_default();
    Check {
        pass: r.passed(),
        detail: format!(
            "{} instances, {} violations, component orderings reversed: bias {} variance {}, max rel excess {:.3e}{witness}",
            r.instances, r.violations, r.bias_violations, r.variance_violations, r.max_rel_excess
        ),
    }
}

fn no_reweight() -> Check {
    let r = no_reweight_sweep(10_000, 2025, ConditionForm::Stated).unwrap();
    Check {
        pass: r.passed(),
        detail: format!(
            "{} instances, {} violations, component orderings reversed: bias {} variance {}, {} with some w > 1, max rel excess {:.3e}",
            r.instances, r.violations, r.bias_violations, r.variance_violations, r.w_above_one, r.max_rel_excess
        ),
    }
}

fn mc_identity() -> Check {
    let r = mc_identity_check(20, 10_000, 7).unwrap();
    let worst = r.z_scores.iter().map(|z| z.abs()).fold(0.0, f64::max);
    Check {
        pass: r.within_3se >= 19,
        detail: format!("{}/20 within 3 SE, max |z| {worst:.2}", r.within_3se),
    }
}

fn supremum() -> Check {
    let mut g = GaussianClusters::new(5, 10);
    g.extent = 8.0;
    let counts = ratio_twenty_counts(4000).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for m in [20, 30, 40, 50] {
        let vals: Vec<f64> = (0..20u64)
            .map(|s| {
                let sc = ShiftScenario::new(counts.clone(), BaseGenerator::GaussianClusters(g.clone()), s).unwrap();
                let sp = sc.generate().unwrap();
                estimate_supremum_kmeans(&sp[0].train_features(), &sp[0].test_pool, 1, m, 50, s)
                    .unwrap()
                    .r_tilde
            })
            .collect();
        let ok = vals.iter().filter(|v| (10.0..=40.0).contains(*v)).count();
        pass &= ok >= 18;
        lines.push(format!("M={m}: {ok}/20 in [10,40], median {:.2}", median(vals)));
    }
    Check { pass, detail: lines.join("; ") }
}

fn lsif_fit() -> Check {
    let mut gaps = Vec::new();
    for s in 0..5u64 {
        let fit = gaussian_shift_pair(0.0, 0.5, 1.0, 2000, 2000, s).unwrap();
        let held = gaussian_shift_pair(0.0, 0.5, 1.0, 10_000, 10_000, 1000 + s).unwrap();
        let sup = estimate_supremum_histogram(&fit.train, &fit.test, 1, 10).unwrap();
        let tr = train_ratio_model(
            BregmanVariant::Lsif,
            &fit.train,
            &fit.test,
            1,
            &sup,
            &RatioArch::LinearSoftplus,
            &RatioHyper::default(),
            s,
        )
        .unwrap();
        let truth = |x: &[f64]| fit.ratio.eval(x[0]);
        let learned = empirical_bd_risk(BregmanVariant::Lsif, &tr.model, sup.c, 1, &held.train, &held.test).unwrap();
        let exact = empirical_bd_risk(BregmanVariant::Lsif, &truth, sup.c, 1, &held.train, &held.test).unwrap();
        gaps.push((learned - exact).abs());
    }
    Check {
        pass: gaps.iter().all(|g| *g <= 0.05),
        detail: format!("|BD risk gap| per seed {gaps:.4?} (tolerance 0.05)"),
    }
}

fn five_client_ordering() -> Check {
    let mut g = GaussianClusters::new(8, 10);
    g.clusters_per_class = 3;
    g.extent = 4.0;
    let counts = fashion_mnist_five_client_counts().scaled(0.25);
    let spec = PredictorSpec::Logistic { dim: 8, classes: 10 };
    let cfg = TrainingConfig {
        server: ServerHyper { rounds: 3000, batch_size: 32, ..Default::default() },
        ratios: RatioPipeline::Oracle,
        threads: None,
    };
    let run = |mode: &TrainMode| -> f64 {
        median(
            (0..5u64)
                .map(|s| {
                    let sc = ShiftScenario::new(counts.clone(), BaseGenerator::GaussianClusters(g.clone()), s).unwrap();
                    run_training(&sc, mode, &spec, &cfg, s).unwrap().summary.average
                })
                .collect(),
        )
    };
    let (avg, ftw, fitw) = (run(&TrainMode::Fedavg), run(&TrainMode::Ftw), run(&TrainMode::Fitw));
    Check {
        pass: ftw >= avg + 0.05 && fitw >= avg + 0.02,
        detail: format!("median average accuracy FTW {ftw:.4}, FITW {fitw:.4}, FedAvg {avg:.4}"),
    }
}

fn consistency() -> Check {
    let fam = DiscreteShiftFamily::skewed_three_client();
    let grid = [100, 1000, 10_000];
    let ftw = consistency_sweep(&fam, &TrainMode::Ftw, ConsistencyRatios::Oracle, &grid, 5, 3).unwrap();
    let avg = consistency_sweep(&fam, &TrainMode::Fedavg, ConsistencyRatios::Oracle, &grid, 5, 3).unwrap();
    let meds = |r: &fedshift::fed::ConsistencyReport| r.rows.iter().map(|r| format!("{:.3e}", r.median)).collect::<Vec<_>>();
    let (f_last, a_last) = (ftw.rows[2].median, avg.rows[2].median);
    // A plateau: FedAvg at the largest n is still near its positive limit.
    let plateau = avg.limit_excess > 0.0 && a_last >= 0.5 * avg.limit_excess && a_last > f_last;
    Check {
        pass: ftw.strictly_decreasing && plateau,
        detail: format!(
            "FTW medians {:?} (slope {:.2}); FedAvg medians {:?}, limit {:.3e}",
            meds(&ftw),
            ftw.log_log_slope,
            meds(&avg),
            avg.limit_excess
        ),
    }
}

fn gradient_fd_failures() -> usize {
    let mut bad = 0;
    let mut r = rng::stream(11, StreamTag::Instance, 0);
    let kind = RatioKind::MlpSoftplus { dim: 2, hidden: 3 };
    let xs = |r: &mut rng::StreamRng, n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect()
    };
    for variant in BregmanVariant::ALL {
        let r_max = if variant == BregmanVariant::Pu { 0.95 } else { 50.0 };
        for c in [0.05, 0.9] {
            let params: Vec<f64> = (0..13).map(|_| r.random_range(-0.3..0.3)).collect();
            let mut model = RatioModel::with_params(kind.clone(), params, r_max).unwrap();
            let (tr, te) = (xs(&mut r, 6), xs(&mut r, 9));
            let an = nnbd_gradient(variant, &model, c, 3, &tr, &te).unwrap();
            for j in 0..model.params.len() {
                let h = 1e-5;
                let p0 = model.params[j];
                model.params[j] = p0 + h;
                let up = nnbd_objective(variant, &model, c, 3, &tr, &te).unwrap();
                model.params[j] = p0 - h;
                let dn = nnbd_objective(variant, &model, c, 3, &tr, &te).unwrap();
                model.params[j] = p0;
                let fd_b = (up.bracket - dn.bracket) / (2.0 * h);
                let fd_l = (up.ell2_term - dn.ell2_term) / (2.0 * h);
                let close = |a: f64, f: f64| (a - f).abs() <= 1e-4 * a.abs().max(1e-6);
                if !close(an.d_bracket[j], fd_b) || !close(an.d_ell2_term[j], fd_l) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

fn bias_variance_failures() -> usize {
    let mut bad = 0;
    for i in 0..200u64 {
        let mut r = rng::stream(12, StreamTag::Instance, i);
        let p = sample_problem(&mut r);
        let w: Vec<f64> = (0..p.mu.len()).map(|_| r.random_range(0.0..3.0)).collect();
        let spec = OneHotSpectrum::new(p.mu.clone(), w).unwrap();
        let closed = bias_variance_onehot(&spec, &p.theta_star, &p.lambda_te, p.sigma2, p.lambda);
        let inst = spec.induced_instance(&p.theta_star, &p.lambda_te, p.sigma2, p.lambda);
        let matrix = bias_variance_fixed(&inst).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if !rel(closed.bias, matrix.bias) || !rel(closed.variance, matrix.variance) {
            bad += 1;
        }
    }
    bad
}

fn shifted_scenario(seed: u64, shift: bool) -> ShiftScenario {
    let train = [[60, 30, 10], [10, 30, 60], [30, 40, 30]];
    let pool = if shift { [[10, 20, 30], [30, 20, 10], [20, 20, 20]] } else { [[30, 15, 5], [5, 15, 30], [15, 20, 15]] };
    let counts = CountTable::new(
        (0..3)
            .map(|k| ClientCounts::new(train[k].to_vec(), pool[k].to_vec()))
            .collect(),
    );
    ShiftScenario::new(counts, BaseGenerator::GaussianClusters(GaussianClusters::new(2, 3)), seed).unwrap()
}

fn properties() -> Check {
    let mut failures = Vec::new();

    let fd = gradient_fd_failures();
    if fd > 0 {
        failures.push(format!("{fd} gradient coordinates off"));
    }
    let bv = bias_variance_failures();
    if bv > 0 {
        failures.push(format!("{bv} closed-form/matrix mismatches"));
    }

    let spec = PredictorSpec::Logistic { dim: 2, classes: 3 };
    let cfg = |threads| TrainingConfig {
        server: ServerHyper { rounds: 60, batch_size: 8, participation: 0.67, eval_every: 20, ..Default::default() },
        ratios: RatioPipeline::Oracle,
        threads,
    };
    let calm = shifted_scenario(4, false);
    let a = run_training(&calm, &TrainMode::Fitw, &spec, &cfg(None), 5).unwrap();
    let b = run_training(&calm, &TrainMode::Fedavg, &spec, &cfg(None), 5).unwrap();
    if a.predictor.params != b.predictor.params || a.logs != b.logs {
        failures.push("FITW differs from FedAvg without shift".into());
    }

    let shifted = shifted_scenario(6, true);
    let trained = TrainingConfig {
        ratios: RatioPipeline::Trained {
            variant: BregmanVariant::Lsif,
            supremum: SupremumMethod::Kmeans { clusters: 6, iters: 20 },
            arch: RatioArch::ClassTable { centroids: None },
            hyper: RatioHyper { max_epochs: 20, ..Default::default() },
            gamma: 1.0,
        },
        ..cfg(None)
    };
    for (mode, base) in [(TrainMode::Ftw, cfg(None)), (TrainMode::Fitw, trained.clone())] {
        let one = run_training(&shifted, &mode, &spec, &TrainingConfig { threads: Some(1), ..base.clone() }, 8).unwrap();
        let many = run_training(&shifted, &mode, &spec, &TrainingConfig { threads: Some(4), ..base }, 8).unwrap();
        if one.predictor.params != many.predictor.params || one.logs != many.logs {
            failures.push(format!("{} differs between 1 and 4 threads", mode.name()));
        }
        if mode == TrainMode::Fitw && one.cross_client_flows != 0 {
            failures.push(format!("FITW saw {} cross-client flows", one.cross_client_flows));
        }
    }
    let oracle_fitw = run_training(&shifted, &TrainMode::Fitw, &spec, &cfg(None), 8).unwrap();
    if oracle_fitw.cross_client_flows != 0 {
        failures.push("oracle FITW crossed clients".into());
    }

    let splits = shifted.generate().unwrap();
    let p1 = broadcast_shuffled_pool(&splits, 1).unwrap();
    let p2 = broadcast_shuffled_pool(&splits, 2).unwrap();
    let sorted = |mut p: Vec<Vec<f64>>| {
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p
    };
    let union: Vec<Vec<f64>> = splits.iter().flat_map(|s| s.test_pool.clone()).collect();
    if p1 == p2 || sorted(p1.clone()) != sorted(p2) || sorted(p1) != sorted(union) {
        failures.push("shuffle is not a content-preserving reordering".into());
    }

    Check {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "finite differences, bias/variance forms, FITW=FedAvg, 1-vs-4 threads, shuffle multiset, zero FITW flows".into()
        } else {
            failures.join("; ")
        },
    }
}

type Criterion = (&'static str, u64, fn() -> Check);

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("stated reweighting condition is sound", 10, reweight),
        ("stated no-reweighting condition is sound", 10, no_reweight),
        ("Monte Carlo excess risk matches B + V", 30, mc_identity),
        ("k-means supremum estimate on ratio-20 data", 60, supremum),
        ("LSIF fit quality on Gaussian shift", 120, lsif_fit),
        ("five-client target-shift accuracy ordering", 300, five_client_ordering),
        ("FTW consistency and FedAvg plateau", 300, consistency),
        ("property suites", 600, properties),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let c = f();
        let elapsed = t.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = c.pass && in_time;
        println!(
            "criterion {} {}: {name} [{:.1}s / {budget}s{}] {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" },
            c.detail
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
