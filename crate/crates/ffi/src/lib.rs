//! C ABI over `zkpot-core`.
//!
//! Objects cross the boundary as opaque handles released with the matching
//! `*_free`. Every fallible call returns a [`ZkpotStatus`]; the message of the
//! last failure on the calling thread is available from [`zkpot_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use zkpot_core::commit::{commit, verify_opening, CommitKey, Commitment, COMMITMENT_LEN};
use zkpot_core::field::{fr_from_bytes, fr_to_bytes};
use zkpot_core::ledger::{node_signing_key, Chain, KeyRegistry, LedgerError};
use zkpot_core::sim::{simulate, SimConfig, SimError, SimReport};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZkpotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Ledger = 5,
    InvalidChain = 6,
    Proof = 7,
    Commitment = 8,
    Simulation = 9,
    Panic = 10,
}

/// A finished simulation run.
pub struct ZkpotSim {
    report: SimReport,
}

/// A chain loaded from a block log.
pub struct ZkpotChain {
    chain: Chain,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: ZkpotStatus, msg: impl ToString) -> ZkpotStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> ZkpotStatus) -> ZkpotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ZkpotStatus::Panic, "internal panic"),
    }
}

fn ledger_status(e: &LedgerError) -> ZkpotStatus {
    match e {
        LedgerError::Io(_) => ZkpotStatus::Io,
        LedgerError::Format(_) | LedgerError::ForkRejected(_) | LedgerError::InvalidBlock(_) => ZkpotStatus::InvalidChain,
        _ => ZkpotStatus::Ledger,
    }
}

fn sim_status(e: &SimError) -> ZkpotStatus {
    match e {
        SimError::Config(_) => ZkpotStatus::Config,
        SimError::Ledger(l) => ledger_status(l),
        SimError::Proof(_) => ZkpotStatus::Proof,
        SimError::Io(_) | SimError::NotFound(_) | SimError::Data(_) => ZkpotStatus::Io,
        _ => ZkpotStatus::Simulation,
    }
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, ZkpotStatus> {
    if s.is_null() {
        return Err(fail(ZkpotStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(ZkpotStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn bytes<'a>(p: *const u8, len: usize) -> Result<&'a [u8], ZkpotStatus> {
    if p.is_null() {
        return Err(fail(ZkpotStatus::NullPointer, "null buffer"));
    }
    Ok(slice::from_raw_parts(p, len))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Copies the last error message of this thread into `buf` as a NUL-terminated
/// string, truncating to `len - 1` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zkpot_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Runs a simulation configured by a JSON object with `SimConfig` fields
/// (missing fields take their defaults) and checks the resulting chain.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zkpot_simulate(config_json: *const c_char, out: *mut *mut ZkpotSim) -> ZkpotStatus {
    guard(|| {
        if out.is_null() {
            return fail(ZkpotStatus::NullPointer, "null output handle");
        }
        let text = try_ffi!(c_str(config_json));
        let cfg: SimConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(ZkpotStatus::Config, e),
        };
        let report = match simulate(&cfg) {
            Ok(r) => r,
            Err(e) => return fail(sim_status(&e), e),
        };
        if let Err(e) = report.chain.validate(&report.registry) {
            return fail(ledger_status(&e), e);
        }
        *out = Box::into_raw(Box::new(ZkpotSim { report }));
        ZkpotStatus::Ok
    })
}

/// # Safety
/// `sim` must be null or a handle from [`zkpot_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zkpot_sim_free(sim: *mut ZkpotSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of completed rounds, 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zkpot_sim_rounds(sim: *const ZkpotSim) -> usize {
    sim.as_ref().map_or(0, |s| s.report.metrics.len())
}

/// Blocks on the chain, genesis included.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zkpot_sim_blocks(sim: *const ZkpotSim) -> usize {
    sim.as_ref().map_or(0, |s| s.report.chain.len())
}

/// Test accuracy of the final global model, NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zkpot_sim_final_accuracy(sim: *const ZkpotSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.report.final_accuracy)
}

/// Leader of round `round` (1-based), or -1 when no leader was elected or the
/// round does not exist.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zkpot_sim_leader(sim: *const ZkpotSim, round: usize) -> i64 {
    sim.as_ref()
        .and_then(|s| round.checked_sub(1).and_then(|i| s.report.metrics.get(i)))
        .and_then(|r| r.leader_id)
        .map_or(-1, i64::from)
}

/// # Safety
/// `sim` must be a live handle; `out` must point to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zkpot_sim_tip_hash(sim: *const ZkpotSim, out: *mut u8) -> ZkpotStatus {
    let Some(s) = sim.as_ref() else { return fail(ZkpotStatus::NullPointer, "null handle") };
    if out.is_null() {
        return fail(ZkpotStatus::NullPointer, "null output buffer");
    }
    ptr::copy_nonoverlapping(s.report.chain_hash().as_ptr(), out, 32);
    ZkpotStatus::Ok
}

/// Writes the chain as a block log readable by [`zkpot_chain_read_log`].
///
/// # Safety
/// `sim` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn zkpot_sim_write_chain_log(sim: *const ZkpotSim, path: *const c_char) -> ZkpotStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else { return fail(ZkpotStatus::NullPointer, "null handle") };
        let path = try_ffi!(c_str(path));
        match s.report.chain.write_log(path) {
            Ok(()) => ZkpotStatus::Ok,
            Err(e) => fail(ledger_status(&e), e),
        }
    })
}

/// Parses a block log. Only structural checks run here; see
/// [`zkpot_chain_validate`] for signatures and linkage.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zkpot_chain_read_log(path: *const c_char, out: *mut *mut ZkpotChain) -> ZkpotStatus {
    guard(|| {
        if out.is_null() {
            return fail(ZkpotStatus::NullPointer, "null output handle");
        }
        let path = try_ffi!(c_str(path));
        match Chain::read_log(path) {
            Ok(chain) => {
                *out = Box::into_raw(Box::new(ZkpotChain { chain }));
                ZkpotStatus::Ok
            }
            Err(e) => fail(ledger_status(&e), e),
        }
    })
}

/// Same as [`zkpot_chain_read_log`] over an in-memory log.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zkpot_chain_from_bytes(data: *const u8, len: usize, out: *mut *mut ZkpotChain) -> ZkpotStatus {
    guard(|| {
        if out.is_null() {
            return fail(ZkpotStatus::NullPointer, "null output handle");
        }
        let data = try_ffi!(bytes(data, len));
        match Chain::from_log(data) {
            Ok(chain) => {
                *out = Box::into_raw(Box::new(ZkpotChain { chain }));
                ZkpotStatus::Ok
            }
            Err(e) => fail(ledger_status(&e), e),
        }
    })
}

/// # Safety
/// `chain` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zkpot_chain_free(chain: *mut ZkpotChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zkpot_chain_len(chain: *const ZkpotChain) -> usize {
    chain.as_ref().map_or(0, |c| c.chain.len())
}

/// # Safety
/// `chain` must be a live handle; `out` must point to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zkpot_chain_tip_hash(chain: *const ZkpotChain, out: *mut u8) -> ZkpotStatus {
    let Some(c) = chain.as_ref() else { return fail(ZkpotStatus::NullPointer, "null handle") };
    if out.is_null() {
        return fail(ZkpotStatus::NullPointer, "null output buffer");
    }
    ptr::copy_nonoverlapping(c.chain.tip_hash().as_ptr(), out, 32);
    ZkpotStatus::Ok
}

/// Checks linkage, Merkle roots, seals and transaction signatures against the
/// keys a simulation with `seed` and `nodes` nodes hands out.
///
/// # Safety
/// `chain` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn zkpot_chain_validate(chain: *const ZkpotChain, seed: u64, nodes: u32) -> ZkpotStatus {
    guard(|| {
        let Some(c) = chain.as_ref() else { return fail(ZkpotStatus::NullPointer, "null handle") };
        let mut registry = KeyRegistry::new();
        for id in 0..nodes {
            registry.insert(id, node_signing_key(seed, id).verifying_key());
        }
        match c.chain.validate(&registry) {
            Ok(()) => ZkpotStatus::Ok,
            Err(e) => fail(ledger_status(&e), e),
        }
    })
}

/// Commits to `model[..len]` with the 32-byte opening and writes the encoded
/// commitment (`ZKPOT_COMMITMENT_LEN` bytes) to `out`.
///
/// # Safety
/// `model` must point to `len` readable bytes, `opening` to 32, `out` to
/// `ZKPOT_COMMITMENT_LEN` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zkpot_commit(model: *const u8, len: usize, opening: *const u8, out: *mut u8) -> ZkpotStatus {
    guard(|| {
        let model = try_ffi!(bytes(model, len));
        let opening = try_ffi!(bytes(opening, 32));
        if out.is_null() {
            return fail(ZkpotStatus::NullPointer, "null output buffer");
        }
        let Some(r) = fr_from_bytes(opening.try_into().expect("32 bytes")) else {
            return fail(ZkpotStatus::InvalidArgument, "opening is not a canonical scalar");
        };
        match commit(&CommitKey::for_bytes(model.len()), model, &r) {
            Ok(cm) => {
                ptr::copy_nonoverlapping(cm.to_bytes().as_ptr(), out, COMMITMENT_LEN);
                ZkpotStatus::Ok
            }
            Err(e) => fail(ZkpotStatus::Commitment, e),
        }
    })
}

/// Sets `*valid` to whether the commitment opens to `model` under `opening`.
/// A malformed commitment encoding is an error, a wrong opening is not.
///
/// # Safety
/// `commitment` must point to `ZKPOT_COMMITMENT_LEN` readable bytes, `model` to
/// `len`, `opening` to 32; `valid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zkpot_commitment_verify(
    commitment: *const u8,
    model: *const u8,
    len: usize,
    opening: *const u8,
    valid: *mut bool,
) -> ZkpotStatus {
    guard(|| {
        let cm = try_ffi!(bytes(commitment, COMMITMENT_LEN));
        let model = try_ffi!(bytes(model, len));
        let opening = try_ffi!(bytes(opening, 32));
        if valid.is_null() {
            return fail(ZkpotStatus::NullPointer, "null output");
        }
        let cm = match Commitment::from_bytes(cm) {
            Ok(c) => c,
            Err(e) => return fail(ZkpotStatus::Commitment, e),
        };
        *valid = !model.is_empty()
            && fr_from_bytes(opening.try_into().expect("32 bytes"))
                .is_some_and(|r| verify_opening(&CommitKey::for_bytes(model.len()), &cm, model, &r));
        ZkpotStatus::Ok
    })
}

/// Derives a canonical opening scalar from arbitrary seed bytes.
///
/// # Safety
/// `seed` must point to `len` readable bytes, `out` to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zkpot_opening_from_seed(seed: *const u8, len: usize, out: *mut u8) -> ZkpotStatus {
    let seed = try_ffi!(bytes(seed, len));
    if out.is_null() {
        return fail(ZkpotStatus::NullPointer, "null output buffer");
    }
    let r = zkpot_core::field::fr_from_seed(seed);
    ptr::copy_nonoverlapping(fr_to_bytes(&r).as_ptr(), out, 32);
    ZkpotStatus::Ok
}

/// Encoded commitment length in bytes.
pub const ZKPOT_COMMITMENT_LEN: usize = 80;

const _: () = assert!(ZKPOT_COMMITMENT_LEN == COMMITMENT_LEN);
