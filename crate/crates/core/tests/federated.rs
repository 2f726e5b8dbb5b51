use fedshift::fed::{run_training, RatioPipeline, ServerHyper, TrainMode, TrainingConfig};
use fedshift::predictors::PredictorSpec;
use fedshift::synthdata::{BaseGenerator, ClientCounts, CountTable, GaussianClusters, ShiftScenario};

const SPEC: PredictorSpec = PredictorSpec::Logistic { dim: 2, classes: 3 };

fn config(rounds: usize) -> TrainingConfig {
    TrainingConfig {
        server: ServerHyper { rounds, batch_size: 32, lr: Some(0.02), ..ServerHyper::default() },
        ratios: RatioPipeline::Oracle,
        threads: None,
    }
}

fn scenario(clients: Vec<ClientCounts>, seed: u64) -> ShiftScenario {
    let g = GaussianClusters { std: 0.9, ..GaussianClusters::new(2, 3) };
    ShiftScenario::new(CountTable::new(clients), BaseGenerator::GaussianClusters(g), seed).unwrap()
}

/// Several clusters per class: a linear model cannot fit every class at
/// once, so the choice of weights decides which client it serves.
fn misspecified(clients: Vec<ClientCounts>, seed: u64) -> ShiftScenario {
    let g = GaussianClusters { clusters_per_class: 3, extent: 4.0, ..GaussianClusters::new(2, 3) };
    ShiftScenario::new(CountTable::new(clients), BaseGenerator::GaussianClusters(g), seed).unwrap()
}

#[test]
fn without_shift_all_modes_agree_within_a_point() {
    let c = || ClientCounts::new(vec![100, 100, 100], vec![100, 100, 100]);
    let sc = scenario(vec![c(), c(), c()], 4);
    let avg = |mode: TrainMode| run_training(&sc, &mode, &SPEC, &config(600), 4).unwrap().summary.average;
    let (ftw, fitw, fedavg) = (avg(TrainMode::Ftw), avg(TrainMode::Fitw), avg(TrainMode::Fedavg));
    assert_eq!(fitw, fedavg, "identical proportions give unit FITW weights");
    assert!((ftw - fedavg).abs() <= 0.01, "ftw {ftw} fedavg {fedavg}");
}

#[test]
fn focusing_on_a_client_lowers_its_test_loss() {
    let sc = misspecified(
        vec![
            ClientCounts::new(vec![200, 20, 20], vec![20, 20, 200]),
            ClientCounts::new(vec![20, 200, 20], vec![200, 20, 20]),
        ],
        9,
    );
    let loss = |mode: TrainMode| run_training(&sc, &mode, &SPEC, &config(800), 9).unwrap().summary;
    let focused = loss(TrainMode::Focused { target: 0, lambdas: vec![0.5, 0.5] });
    let fedavg = loss(TrainMode::Fedavg);
    assert!(
        focused.per_client_test_loss[0] < fedavg.per_client_test_loss[0],
        "focused {:?} fedavg {:?}",
        focused.per_client_test_loss,
        fedavg.per_client_test_loss
    );
}

#[test]
fn logs_cover_every_round_and_accuracy_is_recorded_on_schedule() {
    let c = || ClientCounts::new(vec![30, 30, 30], vec![30, 30, 30]);
    let sc = scenario(vec![c(), c()], 1);
    let mut cfg = config(25);
    cfg.server.eval_every = 10;
    let out = run_training(&sc, &TrainMode::Ftw, &SPEC, &cfg, 1).unwrap();
    assert_eq!(out.logs.len(), 25);
    let evaluated: Vec<usize> = out.logs.iter().filter(|l| l.accuracies.is_some()).map(|l| l.round).collect();
    assert_eq!(evaluated, vec![9, 19, 24]);
    assert_eq!(out.summary.per_client_accuracy.len(), 2);
    assert!(out.ratio_models.is_empty());
}

#[test]
fn predictor_dimension_must_match_the_data() {
    let sc = scenario(vec![ClientCounts::new(vec![5, 5, 5], vec![5, 5, 5])], 0);
    let spec = PredictorSpec::Logistic { dim: 3, classes: 3 };
    assert!(run_training(&sc, &TrainMode::Fedavg, &spec, &config(1), 0).is_err());
}
