use zkpot_core::consensus::ByzantineKind;
use zkpot_core::ledger::{Chain, NO_LEADER};
use zkpot_core::sim::{
    emit_plots, read_metrics, run_simulation, scaling_experiment, simulate, ConfigError, LatencyModel, SimConfig,
    SimError, METRICS_HEADER,
};

fn small(nodes: usize, rounds: usize, seed: u64) -> SimConfig {
    SimConfig {
        nodes,
        rounds,
        seed,
        hidden: vec![16],
        train_samples: Some(1200),
        eval_samples: Some(400),
        prove_samples: 50,
        synthetic_dim: 32,
        local_epochs: 1,
        learning_rate: 0.1,
        ..SimConfig::default()
    }
}

#[test]
fn smoke_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig { out: dir.path().join("run"), ..small(4, 2, 7) };
    let report = run_simulation(&cfg).unwrap();
    assert_eq!(report.chain.len(), 3);
    assert_eq!(report.metrics.len(), 2);
    let text = std::fs::read_to_string(cfg.out.join("metrics.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
    let chain = Chain::read_log(cfg.out.join("chain.log")).unwrap();
    chain.validate(&report.registry).unwrap();
    assert_eq!(chain.tip_hash(), report.chain_hash());
    for row in &report.metrics {
        assert!(row.leader_id.is_some());
        assert!(row.global_accuracy.is_finite());
        assert!(row.block_generation_s >= row.verify_s && row.verify_s >= 0.0);
    }
    assert!(report.metrics[0].setup_s >= 0.0 && report.metrics[1].setup_s == 0.0);
    assert!(cfg.out.join("summary.json").is_file());
}

#[test]
fn deterministic_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let cfg = SimConfig {
            deterministic: true,
            latency: LatencyModel::Uniform { lo_ms: 5.0, hi_ms: 80.0 },
            out: dir.path().join(name),
            ..small(6, 3, 11)
        };
        run_simulation(&cfg).unwrap();
        (std::fs::read(cfg.out.join("chain.log")).unwrap(), std::fs::read(cfg.out.join("metrics.csv")).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
}

#[test]
fn latency_changes_timings_not_outcomes() {
    let base = SimConfig { deterministic: true, ..small(5, 2, 3) };
    let slow = SimConfig { latency: LatencyModel::Uniform { lo_ms: 100.0, hi_ms: 900.0 }, ..base.clone() };
    let (a, b) = (simulate(&base).unwrap(), simulate(&slow).unwrap());
    let leaders = |r: &zkpot_core::sim::SimReport| r.metrics.iter().map(|m| (m.leader_id, m.included_txs)).collect::<Vec<_>>();
    assert_eq!(leaders(&a), leaders(&b));
    assert_eq!(a.final_model.digest(), b.final_model.digest());
    assert!(b.metrics[0].block_generation_s > a.metrics[0].block_generation_s);
}

#[test]
fn inflated_accuracy_never_leads() {
    let cfg = SimConfig { byzantine_frac: 1.0 / 3.0, ..small(9, 4, 5) };
    let report = simulate(&cfg).unwrap();
    assert_eq!(report.byzantine.len(), 3);
    for (row, block) in report.metrics.iter().zip(&report.chain.blocks()[1..]) {
        assert!(!row.byzantine_elected);
        let leader = row.leader_id.expect("honest leader");
        assert!(!report.byzantine.contains(&leader));
        assert!(block.transactions.iter().all(|t| !report.byzantine.contains(&t.sender_id)));
        assert_eq!(block.header.leader_id, leader);
    }
}

#[test]
fn withheld_votes_still_elect() {
    let cfg = SimConfig { byzantine_frac: 0.25, byzantine_kind: ByzantineKind::WithholdVote, ..small(8, 2, 2) };
    let report = simulate(&cfg).unwrap();
    assert!(report.metrics.iter().all(|r| r.leader_id.is_some()));
}

#[test]
fn gaussian_leader_rounds_are_recorded() {
    let cfg = SimConfig {
        byzantine_frac: 1.0 / 3.0,
        byzantine_kind: ByzantineKind::GaussianAggregate,
        ..small(6, 4, 1)
    };
    let report = simulate(&cfg).unwrap();
    assert_eq!(report.metrics.len(), 4);
    for (row, block) in report.metrics.iter().zip(&report.chain.blocks()[1..]) {
        assert_ne!(block.header.leader_id, NO_LEADER);
        assert_eq!(row.byzantine_elected, report.byzantine.contains(&block.header.leader_id));
    }
}

#[test]
fn elected_transactions_verify() {
    let report = simulate(&small(5, 2, 9)).unwrap();
    for b in &report.chain.blocks()[1..] {
        assert_eq!(b.transactions[0].sender_id, b.header.leader_id);
        assert!(b.transactions.windows(2).all(|w| w[0].acc >= w[1].acc));
    }
    report.chain.validate_store(report.store.as_ref()).unwrap();
}

#[test]
fn config_errors() {
    assert!(matches!(simulate(&SimConfig { rounds: 0, ..small(4, 1, 0) }), Err(SimError::Config(_))));
    assert!(matches!(
        scaling_experiment(&[4], &SimConfig { rounds: 0, ..small(4, 1, 0) }),
        Err(SimError::Config(ConfigError::Invalid(_)))
    ));
    assert_eq!(SimError::Config(ConfigError::Invalid(String::new())).exit_code(), 2);
}

#[test]
fn scaling_rows_per_count() {
    let rows = scaling_experiment(&[4, 8], &SimConfig { deterministic: true, ..small(4, 2, 4) }).unwrap();
    assert_eq!(rows.iter().map(|r| r.nodes).collect::<Vec<_>>(), vec![4, 8]);
    assert!(rows.iter().all(|r| r.rounds == 2 && r.mean_block_generation_s > 0.0));
}

#[test]
fn plots_and_data_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig { out: dir.path().join("run"), ..small(4, 3, 2) };
    run_simulation(&cfg).unwrap();
    let metrics = cfg.out.join("metrics.csv");
    let files = emit_plots(&metrics, &dir.path().join("plots")).unwrap();
    assert!(files.iter().all(|f| f.is_file()));
    let table = std::fs::read_to_string(dir.path().join("plots/accuracy.csv")).unwrap();
    let ys: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let rows = read_metrics(&metrics).unwrap();
    assert_eq!(ys, rows.iter().map(|r| r.global_accuracy).collect::<Vec<_>>());

    assert!(matches!(emit_plots(&dir.path().join("missing.csv"), dir.path()), Err(SimError::NotFound(_))));
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{METRICS_HEADER}\n")).unwrap();
    assert!(matches!(emit_plots(&empty, dir.path()), Err(SimError::EmptyInput(_))));
}

#[test]
fn monotone_accuracy_plots_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let mut text = format!("{METRICS_HEADER}\n");
    for r in 1..=6 {
        text.push_str(&format!("{r},{},1,4,4,0,0,0,0,0.1,false\n", 0.5 + r as f64 * 0.05));
    }
    std::fs::write(&path, text).unwrap();
    emit_plots(&path, dir.path()).unwrap();
    let table = std::fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
    let ys: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ys.len(), 6);
    assert!(ys.windows(2).all(|w| w[1] > w[0]));
    let svg = std::fs::read_to_string(dir.path().join("accuracy.svg")).unwrap();
    assert!(svg.contains("<svg"));
}
