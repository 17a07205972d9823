use zkpot_core::commit::{commit, verify_opening, CommitKey};
use zkpot_core::field::{fr_from_bytes, fr_from_seed, fr_to_bytes};
use zkpot_core::ledger::*;

const SEED: u64 = 21;
const NODES: u32 = 5;

fn registry() -> KeyRegistry {
    let mut reg = KeyRegistry::new();
    for id in 0..NODES {
        reg.insert(id, node_signing_key(SEED, id).verifying_key());
    }
    reg
}

fn tx(store: &dyn BlobStore, sender: u32, round: u64) -> Transaction {
    let model = format!("model of {sender} in round {round}").into_bytes();
    let r = fr_from_seed(&[sender as u8, round as u8]);
    let mut tx = Transaction {
        sender_id: sender,
        task_name: "digits".into(),
        acc: 90 + sender as u64,
        shard_size: 100,
        model_addr: store.put(&model).unwrap(),
        proof_addr: store.put(format!("proof {sender} {round}").as_bytes()).unwrap(),
        vk_addr: store.put(b"verifying key").unwrap(),
        commitment: commit(&CommitKey::for_bytes(model.len()), &model, &r).unwrap(),
        opening: fr_to_bytes(&r),
        nonce: round,
        signature: [0; 64],
    };
    sign_tx(&mut tx, &node_signing_key(SEED, sender));
    tx
}

fn build(store: &dyn BlobStore, rounds: u64) -> Chain {
    let reg = registry();
    let mut chain = Chain::new();
    let genesis = store.put(b"initial model").unwrap();
    let publisher = node_signing_key(SEED, PUBLISHER_ID);
    chain.append(Block::seal(None, 0, NO_LEADER, vec![], genesis, &publisher), &reg).unwrap();
    for round in 1..=rounds {
        let txs: Vec<_> = (1..NODES).map(|s| tx(store, s, round)).collect();
        let leader = txs.iter().max_by_key(|t| t.acc).unwrap().sender_id;
        let global = store.put(format!("global {round}").as_bytes()).unwrap();
        let parent = chain.tip().unwrap().header.clone();
        let block = Block::seal(Some(&parent), round * 10, leader, txs, global, &node_signing_key(SEED, leader));
        chain.append(block, &reg).unwrap();
    }
    chain
}

#[test]
fn disk_backed_chain_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = DiskCas::open(dir.path().join("cas")).unwrap();
    let chain = build(&store, 4);
    assert_eq!(chain.len(), 5);

    let log = dir.path().join("chain.log");
    chain.write_log(&log).unwrap();
    let back = Chain::read_log(&log).unwrap();
    assert_eq!(back, chain);
    back.validate(&registry()).unwrap();
    back.validate_store(&store).unwrap();

    for b in back.blocks() {
        assert_eq!(b.header.merkle_root, merkle_root(&b.transactions));
        for t in &b.transactions {
            assert!(verify_tx(t, &registry()).unwrap());
            let model = store.get(&t.model_addr).unwrap();
            let r = fr_from_bytes(&t.opening).unwrap();
            assert!(verify_opening(&CommitKey::for_bytes(model.len()), &t.commitment, &model, &r));
        }
    }
}

#[test]
fn corrupted_blob_on_disk_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let store = DiskCas::open(dir.path()).unwrap();
    let chain = build(&store, 2);
    let addr = chain.tip().unwrap().global_model_addr();
    std::fs::write(store.path_of(&addr), b"swapped model").unwrap();
    assert_eq!(chain.validate_store(&store), Err(LedgerError::CorruptBlob(addr)));
    std::fs::remove_file(store.path_of(&addr)).unwrap();
    assert_eq!(chain.validate_store(&store), Err(LedgerError::NotFound(addr)));
}

#[test]
fn rewritten_history_is_rejected() {
    let store = MemCas::new();
    let chain = build(&store, 3);
    let reg = registry();

    // a leader re-signs round 2 with a different model; round 3 no longer links
    let mut blocks = chain.blocks().to_vec();
    let b2 = &blocks[2];
    let forged = Block::seal(
        Some(&blocks[1].header),
        b2.header.timestamp,
        b2.header.leader_id,
        b2.transactions.clone(),
        store.put(b"forged global").unwrap(),
        &node_signing_key(SEED, b2.header.leader_id),
    );
    blocks[2] = forged;
    let mut rebuilt = Chain::new();
    let mut err = None;
    for b in blocks {
        if let Err(e) = rebuilt.append(b, &reg) {
            err = Some(e);
            break;
        }
    }
    assert!(matches!(err, Some(LedgerError::ForkRejected(_))), "{err:?}");
    assert_eq!(rebuilt.len(), 3);

    // a sealer outside the registry
    let outsider = node_signing_key(SEED, 99);
    let parent = chain.tip().unwrap().header.clone();
    let block = Block::seal(Some(&parent), 99, 99, vec![], parent.global_model_addr, &outsider);
    let mut c = chain.clone();
    assert!(c.append(block, &reg).is_err());
    assert_eq!(c.len(), chain.len());
}
