//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Positional arguments select criteria by
//! number, e.g. `cargo test --test acceptance -- 3 7`.

use std::path::PathBuf;
use std::time::Instant;

use ark_ec::CurveGroup;
use ark_ff::UniformRand;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zkpot_core::commit::{commit, random_opening, verify_opening, CommitKey};
use zkpot_core::consensus::{elect_leader, threshold, ByzantineKind, Verdict, Vote, VoteRecord};
use zkpot_core::field::{chunk_count, Fr};
use zkpot_core::fl::{
    load_mnist, local_train, partition, train_federated, Dataset, FloatModel, PartitionScheme, TrainConfig,
};
use zkpot_core::ledger::{node_signing_key, Chain, KeyRegistry};
use zkpot_core::quant::{argmax_lowest, fixed_multiplier, qmatmul_biased, quantized_forward, QuantParams, QuantizedTensor};
use zkpot_core::sim::{run_simulation, scaling_experiment, simulate, timing_breakdown, DatasetKind, SimConfig};
use zkpot_core::testkit::{honest, tampered, TAMPERS};
use zkpot_core::zkproof::{backend_for, BackendKind, CircuitConfig, TestSet};

type Outcome = Result<String, String>;

fn mnist_dir() -> PathBuf {
    std::env::var_os("ZKPOT_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist() -> Result<(Dataset, Dataset), String> {
    let dir = mnist_dir();
    load_mnist(&dir).map_err(|e| {
        format!("MNIST unavailable at {} ({e}); run scripts/fetch_mnist.sh or set ZKPOT_MNIST_DIR", dir.display())
    })
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Product of zero-point-shifted operands straight from the definition.
fn reference_bracket(qw: &QuantizedTensor, qx: &QuantizedTensor, bias: i64, m_prime: i64, i: usize, c: usize) -> i128 {
    let (zw, zx) = (qw.params().zero_point as i128, qx.params().zero_point as i128);
    let dot: i128 = (0..qw.cols()).map(|j| (qw.get(i, j) as i128 - zw) * (qx.get(j, c) as i128 - zx)).sum();
    dot + bias as i128 + m_prime as i128
}

fn c1_quantized_identity() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let k = 24u32;
    let mut elements = 0usize;
    for trial in 0..1000 {
        let (m, n, p) = (rng.gen_range(1..9), rng.gen_range(1..33), rng.gen_range(1..9));
        let bw = if trial % 2 == 0 { 8 } else { 16 };
        let qmax = (1i64 << bw) - 1;
        let wp = QuantParams::new(rng.gen_range(0.001..0.1), rng.gen_range(0..=qmax), bw).unwrap();
        let xp = QuantParams::new(rng.gen_range(0.001..0.1), rng.gen_range(0..=qmax), bw).unwrap();
        let yp = QuantParams::new(rng.gen_range(0.01..1.0), rng.gen_range(0..=qmax), bw).unwrap();
        let qw = QuantizedTensor::new(m, n, (0..m * n).map(|_| rng.gen_range(0..=qmax)).collect(), wp).unwrap();
        let qx = QuantizedTensor::new(n, p, (0..n * p).map(|_| rng.gen_range(0..=qmax)).collect(), xp).unwrap();
        let bias: Vec<i64> = (0..m).map(|_| rng.gen_range(-2000..2000)).collect();
        let mult = fixed_multiplier(wp.scale, xp.scale, yp.scale, k).unwrap();
        let out = qmatmul_biased(&qw, &qx, Some(&bias), &mult, &yp).map_err(|e| format!("trial {trial}: {e}"))?;
        let m_prime = ((((yp.zero_point as i128) << k) + mult.m as i128 - 1).div_euclid(mult.m as i128)) as i64;
        for i in 0..m {
            for c in 0..p {
                let idx = i * p + c;
                let (y, r) = (out.raw[idx] as i128, out.remainder[idx] as i128);
                let rhs = mult.m as i128 * reference_bracket(&qw, &qx, bias[i], m_prime, i, c);
                if (y << k) + r != rhs || !(0..1i128 << k).contains(&r) || out.qy.get(i, c) != out.raw[idx].clamp(0, qmax) {
                    return Err(format!("trial {trial} element ({i},{c}) violates the identity"));
                }
                elements += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < 10.0, format!("1000 instances, {elements} elements exact, 0 <= R < 2^{k}, {secs:.2}s (limit 10s)"))
}

fn c2_quantization_fidelity() -> Outcome {
    let (train, test) = mnist()?;
    let cfg = TrainConfig { local_epochs: 1, seed: 2, ..TrainConfig::default() };
    let model = local_train(&FloatModel::shallow_net(2), &train, &cfg).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let q = model.quantize(train.head(2000).features().view(), 8, 24).map_err(|e| e.to_string())?;
    let inputs = test.quantized_inputs(8).map_err(|e| e.to_string())?;
    let (logits, _) = quantized_forward(&q, &inputs).map_err(|e| e.to_string())?;
    let float = model.predict(test.features().view());
    let agree = (0..test.len()).filter(|&c| argmax_lowest(logits.column(c)) == Some(float[c])).count();
    let secs = t.elapsed().as_secs_f64();
    let rate = agree as f64 / test.len() as f64;
    check(
        rate >= 0.99 && test.len() == 10_000 && secs < 60.0,
        format!("argmax agreement {agree}/{} = {rate:.4} (need >= 0.99), {secs:.1}s (limit 60s)", test.len()),
    )
}

const WIDTHS: [usize; 3] = [8, 4, 3];
const SAMPLES: usize = 4;

fn c3_completeness() -> Outcome {
    let mut parts = Vec::new();
    for kind in [BackendKind::Oracle, BackendKind::Snark] {
        let b = backend_for(kind);
        let (st0, _) = honest(&WIDTHS, SAMPLES, 0);
        let (pk, vk) = b
            .setup(&st0.shape, &CircuitConfig { samples: SAMPLES }, 128, &mut ChaCha20Rng::seed_from_u64(3))
            .map_err(|e| e.to_string())?;
        let (mut accepted, mut prove_s) = (0, 0.0);
        for trial in 0..100u64 {
            let (st, w) = honest(&WIDTHS, SAMPLES, 1000 + trial);
            b.register_test_set(&TestSet::new(w.inputs.clone(), w.labels.clone()).unwrap());
            let t = Instant::now();
            let (_, proof) = b.prove(&pk, &st, &w, &mut ChaCha20Rng::seed_from_u64(trial)).map_err(|e| e.to_string())?;
            prove_s += t.elapsed().as_secs_f64();
            accepted += b.verify(&vk, &st, &proof).map_err(|e| e.to_string())? as usize;
        }
        parts.push((kind, accepted, prove_s / 100.0));
    }
    let detail = parts
        .iter()
        .map(|(k, a, s)| format!("{k} {a}/100 accepted, {s:.3}s per proof"))
        .collect::<Vec<_>>()
        .join("; ");
    check(parts.iter().all(|p| p.1 == 100), format!("{detail} ({WIDTHS:?} model, {SAMPLES}-sample statement)"))
}

fn c4_soundness() -> Outcome {
    let mut parts = Vec::new();
    for kind in [BackendKind::Oracle, BackendKind::Snark] {
        let b = backend_for(kind);
        let (st0, _) = honest(&WIDTHS, SAMPLES, 0);
        let (pk, vk) = b
            .setup(&st0.shape, &CircuitConfig { samples: SAMPLES }, 128, &mut ChaCha20Rng::seed_from_u64(4))
            .map_err(|e| e.to_string())?;
        let mut accepted = 0;
        for trial in 0..100u64 {
            let tamper = TAMPERS[trial as usize % TAMPERS.len()];
            let (st, proof) = tampered(b.as_ref(), &pk, &WIDTHS, SAMPLES, 5000 + trial, tamper);
            accepted += b.verify(&vk, &st, &proof).map_err(|e| e.to_string())? as usize;
        }
        parts.push((kind, accepted));
    }
    let detail = parts.iter().map(|(k, a)| format!("{k} {a}/100 accepted")).collect::<Vec<_>>().join("; ");
    check(parts.iter().all(|p| p.1 == 0), format!("{detail} over {TAMPERS:?}"))
}

fn c5_commitments() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let key = CommitKey::derive(16);
    let mut hom = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=16);
        let v: Vec<Fr> = (0..n).map(|_| Fr::rand(&mut rng)).collect();
        let w: Vec<Fr> = (0..n).map(|_| Fr::rand(&mut rng)).collect();
        let (r1, r2) = (Fr::rand(&mut rng), Fr::rand(&mut rng));
        let sum: Vec<Fr> = v.iter().zip(&w).map(|(a, b)| *a + b).collect();
        let lhs = (key.commit_scalars(&v, &r1).unwrap() + key.commit_scalars(&w, &r2).unwrap()).into_affine();
        hom += (lhs == key.commit_scalars(&sum, &(r1 + r2)).unwrap()) as usize;
    }
    let bytes: Vec<u8> = (0..300).map(|_| rng.gen()).collect();
    let key = CommitKey::derive(chunk_count(bytes.len()));
    let r = random_opening(&mut rng);
    let cm = commit(&key, &bytes, &r).unwrap();
    let mut false_openings = 0;
    for _ in 0..10_000 {
        let mut t = bytes.clone();
        let i = rng.gen_range(0..t.len());
        t[i] ^= rng.gen_range(1..=255u8);
        false_openings += verify_opening(&key, &cm, &t, &r) as usize;
    }
    let honest_ok = verify_opening(&key, &cm, &bytes, &r);
    check(
        hom == 1000 && false_openings == 0 && honest_ok,
        format!("homomorphism {hom}/1000; {false_openings} false openings in 10000 single-byte tampers"),
    )
}

fn c6_threshold_boundary() -> Outcome {
    let report = simulate(&small_sim(4, 1, 6)).map_err(|e| e.to_string())?;
    let tx = report.chain.blocks()[1].transactions[0].clone();
    let id = tx.id();
    let mut checked = 0;
    for n in [3usize, 4, 6, 7, 100] {
        let mut registry = KeyRegistry::new();
        let keys: Vec<_> = (0..n as u32).map(|v| node_signing_key(66, v)).collect();
        for (v, k) in keys.iter().enumerate() {
            registry.insert(v as u32, k.verifying_key());
        }
        let oracle = (0..=n).find(|t| 3 * t >= 2 * n).unwrap();
        if threshold(n) != oracle {
            return Err(format!("threshold({n}) = {}, expected {oracle}", threshold(n)));
        }
        for accepts in 0..=n {
            let e = elect_leader(std::slice::from_ref(&tx), n, |_| {
                let mut rec = VoteRecord::new(id);
                for (v, k) in keys.iter().enumerate() {
                    let verdict = if v < accepts { Verdict::Accept } else { Verdict::Reject };
                    rec.record(&Vote::new(id, v as u32, verdict, k), &registry).unwrap();
                }
                rec
            });
            if e.leader.is_some() != (accepts >= oracle) {
                return Err(format!("N={n}: {accepts} accepts gave {:?}", e.leader));
            }
            checked += 1;
        }
    }
    Ok(format!("all {checked} tallies at N in {{3,4,6,7,100}} elect iff >= ceil(2N/3)"))
}

fn c7_byzantine() -> Outcome {
    mnist()?;
    let t = Instant::now();
    let cfg = SimConfig {
        nodes: 9,
        rounds: 50,
        byzantine_frac: 1.0 / 3.0,
        byzantine_kind: ByzantineKind::ClaimInflatedAcc,
        dataset: DatasetKind::Mnist,
        data_dir: Some(mnist_dir()),
        backend: BackendKind::Oracle,
        seed: 3,
        train_samples: Some(12_000),
        hidden: vec![16],
        local_epochs: 2,
        ..SimConfig::default()
    };
    let attacked = simulate(&cfg).map_err(|e| e.to_string())?;
    let baseline = simulate(&SimConfig { byzantine_frac: 0.0, ..cfg.clone() }).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let byz_leaders = attacked
        .metrics
        .iter()
        .filter(|r| r.leader_id.map_or(true, |l| attacked.byzantine.contains(&l)))
        .count();
    let gap = (attacked.final_accuracy - baseline.final_accuracy).abs();
    check(
        attacked.byzantine.len() == 3 && byz_leaders == 0 && gap <= 0.02 && secs < 600.0,
        format!(
            "byzantine {:?}: {byz_leaders} byzantine or missing leaders in 50 rounds; accuracy {:.4} vs baseline {:.4} (gap {:.4}, limit 0.02); {secs:.0}s (limit 600s)",
            attacked.byzantine, attacked.final_accuracy, baseline.final_accuracy, gap
        ),
    )
}

fn c8_convergence() -> Outcome {
    let (train, test) = mnist()?;
    let clients = partition(&train, 100, PartitionScheme::Iid, 8).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { local_epochs: 5, clients_total: 100, clients_per_round: 20, global_rounds: 30, seed: 8, ..TrainConfig::default() };
    let (_, history) = train_federated(&FloatModel::shallow_net(8), &clients, &test, &cfg).map_err(|e| e.to_string())?;
    let last = *history.last().unwrap();
    check(last >= 0.90, format!("ShallowNet 20-of-100, 5 epochs, 30 rounds: test accuracy {last:.4} (need >= 0.90)"))
}

fn c9_scalability() -> Outcome {
    let t = Instant::now();
    let cfg = SimConfig { rounds: 20, seed: 9, ..small_sim(4, 20, 9) };
    let rows = scaling_experiment(&[100, 800], &cfg).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let ratio = rows[1].mean_block_generation_s / rows[0].mean_block_generation_s;
    check(
        ratio <= 2.0 && secs < 1800.0 && rows.iter().all(|r| r.rounds >= 20),
        format!(
            "mean block generation {:.4}s at 100 nodes, {:.4}s at 800 (ratio {ratio:.2}, limit 2); {secs:.0}s",
            rows[0].mean_block_generation_s, rows[1].mean_block_generation_s
        ),
    )
}

fn c10_setup_independence() -> Outcome {
    let cfg = SimConfig {
        backend: BackendKind::Snark,
        rounds: 1,
        prove_samples: SAMPLES,
        synthetic_dim: WIDTHS[0],
        hidden: vec![WIDTHS[1]],
        synthetic_classes: WIDTHS[2],
        ..small_sim(4, 1, 10)
    };
    let rows = timing_breakdown(&[100, 200], &cfg, 10).map_err(|e| e.to_string())?;
    let (a, b) = (rows[0].setup_s, rows[1].setup_s);
    let rel = (a - b).abs() / a.min(b);
    check(
        rel <= 0.05,
        format!(
            "snark setup {a:.3}s at 100 nodes, {b:.3}s at 200 (diff {:.1}%, limit 5%); prove {:.3}s vs {:.3}s, verify {:.3}s vs {:.3}s",
            rel * 100.0,
            rows[0].prove_s,
            rows[1].prove_s,
            rows[0].verify_s,
            rows[1].verify_s
        ),
    )
}

fn c11_ledger_integrity() -> Outcome {
    let report = simulate(&SimConfig { clients_per_round: 1, ..small_sim(4, 9, 11) }).map_err(|e| e.to_string())?;
    if report.chain.len() != 10 {
        return Err(format!("expected 10 blocks, got {}", report.chain.len()));
    }
    let log = report.chain.to_log();
    Chain::from_log(&log).and_then(|c| c.validate(&report.registry)).map_err(|e| format!("honest chain rejected: {e}"))?;
    let mut survivors = Vec::new();
    let mut trials = 0;
    for i in 0..log.len() {
        for delta in [0x01u8, 0x80, 0xff] {
            let mut m = log.clone();
            m[i] ^= delta;
            trials += 1;
            if Chain::from_log(&m).and_then(|c| c.validate(&report.registry)).is_ok() {
                survivors.push((i, delta));
            }
        }
    }
    check(
        survivors.is_empty(),
        format!("{trials} single-byte mutations over a {}-byte 10-block log, {} validated {:?}", log.len(), survivors.len(), &survivors[..survivors.len().min(5)]),
    )
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let cfg = SimConfig {
            deterministic: true,
            byzantine_frac: 0.25,
            byzantine_kind: ByzantineKind::GaussianAggregate,
            latency: zkpot_core::sim::LatencyModel::Uniform { lo_ms: 10.0, hi_ms: 200.0 },
            out: dir.path().join(name),
            ..small_sim(8, 5, 12)
        };
        run_simulation(&cfg).map_err(|e| e.to_string())?;
        let read = |f: &str| std::fs::read(cfg.out.join(f)).map_err(|e| e.to_string());
        Ok((read("chain.log")?, read("metrics.csv")?))
    };
    let (a, b) = (run("a")?, run("b")?);
    check(
        a == b,
        format!("chain.log {} bytes identical: {}; metrics.csv {} bytes identical: {}", a.0.len(), a.0 == b.0, a.1.len(), a.1 == b.1),
    )
}

fn small_sim(nodes: usize, rounds: usize, seed: u64) -> SimConfig {
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

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "quantized-inference identity", c1_quantized_identity),
        (2, "quantization fidelity", c2_quantization_fidelity),
        (3, "proof completeness", c3_completeness),
        (4, "soundness surrogate", c4_soundness),
        (5, "commitment properties", c5_commitments),
        (6, "consensus threshold boundary", c6_threshold_boundary),
        (7, "byzantine robustness", c7_byzantine),
        (8, "FL convergence", c8_convergence),
        (9, "scalability", c9_scalability),
        (10, "setup independence", c10_setup_independence),
        (11, "ledger integrity", c11_ledger_integrity),
        (12, "determinism", c12_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                println!("criterion {n:>2} FAIL {name}: {d} [{secs:.1}s]");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
