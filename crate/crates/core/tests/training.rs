use rtr_core::graph::EvalMode;
use rtr_core::harness::{evaluate, periodic_table_oracle, prepare, train, DataSource, RunConfig};
use rtr_core::model::RtrConfig;
use rtr_core::synth::PeriodicSpec;

fn small_run(seed: u64) -> RunConfig {
    let mut cfg: RunConfig = serde_json::from_value(serde_json::json!({
        "data": {"kind": "periodic", "users": 12, "items": 6, "period": 3, "events": 900, "noise": 0.05},
        "model": {"dim": 8, "time_dim": 4, "seq_dim": 4, "neighbors": 5, "base_mode": "explicit"},
        "optim": {"epochs": 4, "batch_size": 30, "patience": 4, "adam": {"lr": 0.01}},
    }))
    .unwrap();
    cfg.seed = seed;
    cfg
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let cfg = small_run(3);
    let (g, split) = prepare(&cfg).unwrap();
    let (_, a) = train(&cfg, &g, &split).unwrap();
    let (_, b) = train(&cfg, &g, &split).unwrap();
    assert_eq!(serde_json::to_string(&a.transductive).unwrap(), serde_json::to_string(&b.transductive).unwrap());
    let losses = |r: &rtr_core::harness::MetricsReport| r.epochs.iter().map(|e| e.train_loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
}

#[test]
fn training_beats_chance_and_evaluation_is_repeatable() {
    let cfg = small_run(5);
    let (g, split) = prepare(&cfg).unwrap();
    let (mut model, report) = train(&cfg, &g, &split).unwrap();
    let first = report.epochs.first().unwrap().train_loss;
    let best = report.epochs.iter().map(|e| e.train_loss).fold(f64::INFINITY, f64::min);
    assert!(best < first, "loss never improved: {:?}", report.epochs);
    let ap = report.transductive.as_ref().unwrap().ap;
    assert!(ap > 0.6, "transductive AP {ap}");
    let again = evaluate(&mut model, &g, &split, cfg.optim.batch_size, cfg.seed).unwrap();
    assert_eq!(again.mode(EvalMode::Transductive).unwrap().ap.to_bits(), ap.to_bits());
}

#[test]
fn phase_table_oracle_nearly_solves_clean_periodic_data() {
    let spec = PeriodicSpec { users: 20, items: 10, period: 5, events: 3000, noise: 0.0 };
    let cfg = RunConfig { data: DataSource::Periodic(spec), ..small_run(1) };
    let (g, split) = prepare(&cfg).unwrap();
    let r = periodic_table_oracle(&g, &split, 5, cfg.seed).unwrap();
    let ap = r.mode(EvalMode::Transductive).unwrap().ap;
    assert!(ap > 0.95, "oracle AP {ap}");
}

#[test]
fn invalid_run_configs_are_rejected() {
    let mut cfg = small_run(0);
    cfg.optim.batch_size = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = small_run(0);
    cfg.optim.plateau_decay = 0.0;
    assert!(cfg.validate().is_err());
    let mut cfg = small_run(0);
    cfg.model = RtrConfig { heads: 3, ..cfg.model };
    assert!(cfg.validate().is_err());
    let bad = serde_json::from_value::<RunConfig>(serde_json::json!({"data": {"kind": "periodic"}, "optim": {"epochz": 1}}));
    assert!(bad.is_err());
}
