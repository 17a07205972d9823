//! Reusable constraint gadgets: booleans, range checks, byte packing, Poseidon.

use ark_ff::{BigInteger, Field, One, PrimeField, Zero};

use super::r1cs::{ConstraintSink, Lc, Var};
use crate::field::{Fr, CHUNK_BYTES};
use crate::poseidon::{PoseidonParams, RATE, WIDTH};

pub fn pow2(n: u32) -> Fr {
    Fr::from(2u64).pow([n as u64])
}


/// `a * b`, materialized as a fresh witness.
pub fn mul<S: ConstraintSink>(cs: &mut S, a: &Lc, b: &Lc) -> Var {
    let v = cs.eval(a) * cs.eval(b);
    let out = cs.alloc_witness(v);
    cs.enforce(a.clone(), b.clone(), Lc::var(out));
    out
}

pub fn boolean<S: ConstraintSink>(cs: &mut S, bit: bool) -> Var {
    let b = cs.alloc_witness(if bit { Fr::one() } else { Fr::zero() });
    enforce_boolean(cs, b);
    b
}

pub fn enforce_boolean<S: ConstraintSink>(cs: &mut S, b: Var) {
    cs.enforce(Lc::var(b), Lc::constant(Fr::one()) - Lc::var(b), Lc::zero());
}

pub fn enforce_equal<S: ConstraintSink>(cs: &mut S, a: Lc, b: Lc) {
    cs.enforce(a - b, Lc::constant(Fr::one()), Lc::zero());
}

/// Low `n` bits of a field element's canonical integer.
fn low_bits(x: Fr, n: usize) -> Vec<bool> {
    let big = x.into_bigint();
    (0..n).map(|i| big.get_bit(i)).collect()
}

/// Decomposes `x` into `n` little-endian bits, proving `0 <= x < 2^n`.
pub fn range_bits<S: ConstraintSink>(cs: &mut S, x: &Lc, n: usize) -> Vec<Var> {
    let bits: Vec<Var> = low_bits(cs.eval(x), n).into_iter().map(|b| boolean(cs, b)).collect();
    enforce_equal(cs, pack_bits(&bits), x.clone());
    bits
}

/// Allocates an unconstrained value as `n` bits (e.g. opaque serialized bytes).
pub fn alloc_bits<S: ConstraintSink>(cs: &mut S, value: u64, n: usize) -> Vec<Var> {
    (0..n).map(|i| boolean(cs, (value >> i) & 1 == 1)).collect()
}

pub fn pack_bits(bits: &[Var]) -> Lc {
    let mut lc = Lc::zero();
    let mut coeff = Fr::one();
    for b in bits {
        lc.add_term(*b, coeff);
        coeff += coeff;
    }
    lc
}

/// Little-endian bytes of `width_bytes` bytes; bits past the end are zero.
pub fn bytes_from_bits(bits: &[Var], width_bytes: usize) -> Vec<Lc> {
    (0..width_bytes)
        .map(|k| {
            let lo = (8 * k).min(bits.len());
            let hi = (8 * k + 8).min(bits.len());
            pack_bits(&bits[lo..hi])
        })
        .collect()
}

pub fn const_bytes(bytes: &[u8]) -> Vec<Lc> {
    bytes.iter().map(|b| Lc::from_u64(*b as u64)).collect()
}

/// 31-byte big-endian chunks of a byte stream, matching `field::chunk_bytes`.
pub fn pack_chunks(bytes: &[Lc]) -> Vec<Lc> {
    let base = Fr::from(256u64);
    bytes
        .chunks(CHUNK_BYTES)
        .map(|chunk| {
            let mut lc = Lc::zero();
            let mut coeff = Fr::one();
            for _ in chunk.len()..CHUNK_BYTES {
                coeff *= base;
            }
            for b in chunk.iter().rev() {
                lc.add_scaled(b, coeff);
                coeff *= base;
            }
            lc.compact()
        })
        .collect()
}

fn sbox<S: ConstraintSink>(cs: &mut S, x: &Lc) -> Lc {
    let x2 = Lc::var(mul(cs, x, x));
    let x4 = Lc::var(mul(cs, &x2, &x2));
    Lc::var(mul(cs, &x4, x))
}

fn permute<S: ConstraintSink>(cs: &mut S, state: &mut [Lc; WIDTH]) {
    let p = PoseidonParams::get();
    for (r, rc) in p.round_constants.iter().enumerate() {
        for (s, c) in state.iter_mut().zip(rc) {
            s.add_term(Var::One, *c);
        }
        if PoseidonParams::is_full_round(r) {
            for s in state.iter_mut() {
                *s = sbox(cs, &s.clone().compact());
            }
        } else {
            state[0] = sbox(cs, &state[0].clone().compact());
        }
        let old = state.clone();
        for (i, s) in state.iter_mut().enumerate() {
            let mut lc = Lc::zero();
            for (m, v) in p.mds[i].iter().zip(&old) {
                lc.add_scaled(v, *m);
            }
            *s = lc.compact();
        }
    }
}

/// In-circuit counterpart of `poseidon::hash`.
pub fn poseidon<S: ConstraintSink>(cs: &mut S, inputs: &[Lc]) -> Lc {
    let mut state = [Lc::from_u64(inputs.len() as u64), Lc::zero(), Lc::zero()];
    if inputs.is_empty() {
        permute(cs, &mut state);
    }
    for pair in inputs.chunks(RATE) {
        state[1] = state[1].clone() + &pair[0];
        if let Some(b) = pair.get(1) {
            state[2] = state[2].clone() + b;
        }
        permute(cs, &mut state);
    }
    state[1].clone()
}

/// `max(x, z)` for `x, z` in `[0, 2^bits)`.
pub fn max_gadget<S: ConstraintSink>(cs: &mut S, x: &Lc, z: &Lc, bits: usize) -> Lc {
    let diff = x.clone() - z;
    let shifted = diff.clone() + Lc::constant(pow2(bits as u32));
    let b = range_bits(cs, &shifted, bits + 1);
    let ge = b[bits];
    z.clone() + Lc::var(mul(cs, &Lc::var(ge), &diff))
}

/// Clamps a signed `y` with `|y| < 2^wide` into `[0, qmax]`.
pub fn clamp_gadget<S: ConstraintSink>(cs: &mut S, y: Var, qmax: u64, wide: usize) -> Lc {
    let yv = cs.value(y);
    let (below, above) = signed_position(yv, qmax);
    let lo = boolean(cs, below);
    let hi = boolean(cs, above);
    let y_lc = Lc::var(y);
    let t1 = Lc::var(mul(cs, &Lc::var(lo), &y_lc));
    let t2 = Lc::var(mul(cs, &Lc::var(hi), &y_lc));
    let two = Fr::from(2u64);
    let q = Fr::from(qmax);
    // lo: -y-1 >= 0, else y >= 0
    let d1 = y_lc.clone() - t1.clone().scale(two) - Lc::var(lo);
    range_bits(cs, &d1, wide);
    // hi: y-qmax-1 >= 0, else qmax-y >= 0
    let d2 = t2.clone().scale(two) - Lc::var(hi).scale(two * q + Fr::one()) + Lc::constant(q) - &y_lc;
    range_bits(cs, &d2, wide);
    y_lc - t1 - t2 + Lc::var(hi).scale(q)
}

/// Interprets a field element as a small signed integer and compares it to `[0, qmax]`.
fn signed_position(v: Fr, qmax: u64) -> (bool, bool) {
    let neg = -v;
    let small = |x: Fr| x.into_bigint().num_bits() <= 126;
    if small(v) {
        let big = v.into_bigint();
        let above = big.num_bits() > 64 || big.as_ref()[0] > qmax;
        (false, above)
    } else if small(neg) {
        (true, false)
    } else {
        (false, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{chunk_bytes, fr_from_i64};
    use crate::poseidon;
    use crate::zkproof::r1cs::R1cs;

    #[test]
    fn range_check_accepts_and_rejects() {
        let mut cs = R1cs::new();
        let x = cs.alloc_witness(Fr::from(255u64));
        range_bits(&mut cs, &Lc::var(x), 8);
        assert!(cs.is_satisfied());
        let mut cs = R1cs::new();
        let x = cs.alloc_witness(Fr::from(256u64));
        range_bits(&mut cs, &Lc::var(x), 8);
        assert!(!cs.is_satisfied());
    }

    #[test]
    fn chunk_packing_matches_native() {
        let bytes: Vec<u8> = (0..70u8).map(|b| b.wrapping_mul(37)).collect();
        let mut cs = R1cs::new();
        let lcs = const_bytes(&bytes);
        let chunks = pack_chunks(&lcs);
        let native = chunk_bytes(&bytes);
        assert_eq!(chunks.len(), native.len());
        for (c, n) in chunks.iter().zip(&native) {
            assert_eq!(cs.eval(c), *n);
        }
        let _ = cs.alloc_witness(Fr::zero());
    }

    #[test]
    fn poseidon_gadget_matches_native() {
        for len in [0usize, 1, 2, 5] {
            let mut cs = R1cs::new();
            let vals: Vec<Fr> = (0..len as u64).map(|i| Fr::from(i * 7 + 1)).collect();
            let inputs: Vec<Lc> = vals.iter().map(|v| Lc::var(cs.alloc_witness(*v))).collect();
            let out = poseidon(&mut cs, &inputs);
            assert_eq!(cs.eval(&out), poseidon::hash(&vals));
            assert!(cs.is_satisfied());
        }
    }

    #[test]
    fn max_and_clamp() {
        for (x, z) in [(3u64, 5u64), (5, 3), (4, 4), (0, 255), (255, 0)] {
            let mut cs = R1cs::new();
            let xv = Lc::var(cs.alloc_witness(Fr::from(x)));
            let zv = Lc::var(cs.alloc_witness(Fr::from(z)));
            let m = max_gadget(&mut cs, &xv, &zv, 8);
            assert_eq!(cs.eval(&m), Fr::from(x.max(z)));
            assert!(cs.is_satisfied());
        }
        for y in [-1_000_000i64, -1, 0, 7, 255, 256, 1 << 40] {
            let mut cs = R1cs::new();
            let yv = cs.alloc_witness(fr_from_i64(y));
            let q = clamp_gadget(&mut cs, yv, 255, 64);
            assert_eq!(cs.eval(&q), Fr::from(y.clamp(0, 255) as u64), "y = {y}");
            assert!(cs.is_satisfied(), "y = {y}");
        }
    }

    #[test]
    fn clamp_rejects_lying_selector() {
        let mut cs = R1cs::new();
        let yv = cs.alloc_witness(Fr::from(10u64));
        let _ = clamp_gadget(&mut cs, yv, 255, 64);
        assert!(cs.is_satisfied());
        // witness layout: y, lo, hi, t1 = lo * y, ...
        cs.set_witness(1, Fr::one());
        cs.set_witness(3, Fr::from(10u64));
        assert!(!cs.is_satisfied());
    }
}
