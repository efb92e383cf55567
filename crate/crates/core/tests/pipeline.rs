use urnn_core::experiment::{run_experiment, ExperimentConfig, Mode, ModeGrid};
use urnn_core::io::{load_dataset, save_dataset};
use urnn_core::rnn::Activation;
use urnn_core::synth::{generate_dataset, generate_system, SystemSpec};
use urnn_core::train::{evaluate, init_student, train, Constraint, TrainConfig};

#[test]
fn generate_save_train_evaluate() {
    let spec = SystemSpec::new(3, 2, 1, 0.05, 9);
    let sys = generate_system(&spec).unwrap();
    let data = generate_dataset(&sys.params, &spec, 30, 10, 60, 20.0, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data");
    save_dataset(&path, &data).unwrap();
    let loaded = load_dataset(&path).unwrap();
    assert_eq!(loaded.train, data.train);
    assert_eq!(loaded.test, data.test);
    assert_eq!(loaded.meta, data.meta);

    let teacher = evaluate(&sys.params, &loaded).unwrap();
    assert!((teacher.r2 - teacher.optimal_r2).abs() < 0.05);

    let mut cfg = TrainConfig::new(4, Constraint::Unitary, 1);
    cfg.max_epochs = 8;
    let init = init_student(4, 2, 1, Activation::Relu, &cfg.constraint, 1).unwrap();
    let (a, ra) = train(&init, &loaded, &cfg).unwrap();
    let (b, rb) = train(&init, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert!(ra.final_constraint_residual <= 1e-8);
    assert!(ra.best_val_loss < ra.val_loss[0]);
}

#[test]
fn sweep_matches_single_cell_training() {
    let cfg = ExperimentConfig {
        system: SystemSpec::new(2, 1, 1, 0.1, 0),
        n_train: 20,
        n_test: 6,
        t_len: 40,
        grids: vec![ModeGrid { mode: Mode::Contractive, hidden_units: vec![3] }],
        seeds: vec![5],
        max_epochs: 4,
        ..ExperimentConfig::desk()
    };
    let rep = run_experiment(&cfg).unwrap();
    let row = &rep.rows[0];

    let data = cfg.dataset(5).unwrap();
    let tc = cfg.train_config(Mode::Contractive, 3, 5);
    let init = init_student(3, 1, 1, Activation::Relu, &tc.constraint, 5).unwrap();
    let (best, tr) = train(&init, &data, &tc).unwrap();
    assert_eq!(row.test_r2, Some(evaluate(&best, &data).unwrap().r2));
    assert_eq!(row.epochs, tr.epochs_run);
    assert!(row.max_constraint_residual.unwrap() <= Constraint::DEFAULT_CAP);
}
