//! Deterministic mock of the BFV operations the protocols rely on.
//!
//! A ciphertext carries its masked slot payload together with the mask that
//! was applied at encryption time, so decryption is exact while the visible
//! payload stays pseudorandom. There is no cryptographic security here by
//! design: the simulator preserves slot semantics and operation counts only.
//!
//! Rotation is cyclic over the full n-slot vector. Noise is modelled purely
//! as a multiplication-depth counter.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ring::{add_mod, mul_mod, sub_mod, PrimeContext};

/// Ciphertext modulus bitwidth used for byte accounting.
pub const CT_MODULUS_BITS: u64 = 218;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeError {
    #[error("slot vector has length {got}, ring degree is {expected}")]
    SlotLength { expected: usize, got: usize },
    #[error("rotation offset {offset} out of range for {n} slots")]
    RotationRange { offset: usize, n: usize },
}

/// Global tallies of the costed HE primitives plus ciphertext traffic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OpCounter {
    pub n_pmult: u64,
    pub n_rot: u64,
    pub n_add: u64,
    pub n_ct_sent: u64,
    pub bytes_sent: u64,
}

impl OpCounter {
    /// Bytes on the wire for one ciphertext of degree `n`.
    pub fn ciphertext_bytes(n: usize) -> u64 {
        (n as u64 * CT_MODULUS_BITS).div_ceil(8)
    }

    pub fn record_send(&mut self, ct: &Ciphertext) {
        self.n_ct_sent += 1;
        self.bytes_sent += Self::ciphertext_bytes(ct.slots.len());
    }

    pub fn merge(&mut self, other: &OpCounter) {
        self.n_pmult += other.n_pmult;
        self.n_rot += other.n_rot;
        self.n_add += other.n_add;
        self.n_ct_sent += other.n_ct_sent;
        self.bytes_sent += other.bytes_sent;
    }
}

/// Mock ciphertext: masked slot payload, the mask itself, and a Pmult-depth
/// tally standing in for noise budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    slots: Vec<u64>,
    mask: Vec<u64>,
    pub mask_id: u64,
    pub depth: u32,
}

impl Ciphertext {
    /// Number of slots.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// The masked payload as visible on the wire.
    pub fn wire_slots(&self) -> &[u64] {
        &self.slots
    }
}

/// Key material: a seed for the masking PRNG and the field parameters.
#[derive(Debug, Clone)]
pub struct KeyContext {
    seed: u64,
    next_mask: u64,
}

impl KeyContext {
    pub fn new(seed: u64) -> Self {
        Self { seed, next_mask: 0 }
    }

    fn fresh_mask(&mut self, n: usize, p: u64) -> (u64, Vec<u64>) {
        let id = self.next_mask;
        self.next_mask += 1;
        let mut rng =
            ChaCha20Rng::seed_from_u64(self.seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        (id, uniform_residues(&mut rng, n, p))
    }
}

/// Rejection-sampled uniform residues mod p.
pub fn uniform_residues(rng: &mut ChaCha20Rng, n: usize, p: u64) -> Vec<u64> {
    let bits = 64 - (p - 1).leading_zeros();
    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    (0..n)
        .map(|_| loop {
            let v = rng.next_u64() & mask;
            if v < p {
                break v;
            }
        })
        .collect()
}

pub fn encrypt(
    pt: &[u64],
    keys: &mut KeyContext,
    ctx: &PrimeContext,
) -> Result<Ciphertext, HeError> {
    if pt.len() != ctx.degree() {
        return Err(HeError::SlotLength { expected: ctx.degree(), got: pt.len() });
    }
    let p = ctx.modulus();
    let (mask_id, mask) = keys.fresh_mask(pt.len(), p);
    let slots = pt
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| add_mod(v % p, m, p))
        .collect();
    Ok(Ciphertext { slots, mask, mask_id, depth: 0 })
}

pub fn decrypt(ct: &Ciphertext, ctx: &PrimeContext) -> Vec<u64> {
    let p = ctx.modulus();
    ct.slots
        .iter()
        .zip(&ct.mask)
        .map(|(&s, &m)| sub_mod(s, m, p))
        .collect()
}

/// Slot-wise ciphertext-plaintext product.
pub fn he_pmult(
    ct: &Ciphertext,
    pt: &[u64],
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Ciphertext, HeError> {
    if pt.len() != ct.len() {
        return Err(HeError::SlotLength { expected: ct.len(), got: pt.len() });
    }
    let p = ctx.modulus();
    counter.n_pmult += 1;
    Ok(Ciphertext {
        slots: ct.slots.iter().zip(pt).map(|(&s, &w)| mul_mod(s, w % p, p)).collect(),
        mask: ct.mask.iter().zip(pt).map(|(&m, &w)| mul_mod(m, w % p, p)).collect(),
        mask_id: ct.mask_id,
        depth: ct.depth + 1,
    })
}

/// Cyclic left rotation of the slot vector by `r`; a zero offset is free.
pub fn he_rot(
    ct: &Ciphertext,
    r: usize,
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Ciphertext, HeError> {
    let n = ctx.degree();
    if r >= n {
        return Err(HeError::RotationRange { offset: r, n });
    }
    if r == 0 {
        return Ok(ct.clone());
    }
    counter.n_rot += 1;
    let rot = |v: &[u64]| -> Vec<u64> { (0..n).map(|i| v[(i + r) % n]).collect() };
    Ok(Ciphertext {
        slots: rot(&ct.slots),
        mask: rot(&ct.mask),
        mask_id: ct.mask_id,
        depth: ct.depth,
    })
}

/// Slot-wise ciphertext addition.
pub fn he_add(
    a: &Ciphertext,
    b: &Ciphertext,
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Ciphertext, HeError> {
    if a.len() != b.len() {
        return Err(HeError::SlotLength { expected: a.len(), got: b.len() });
    }
    let p = ctx.modulus();
    counter.n_add += 1;
    Ok(Ciphertext {
        slots: a.slots.iter().zip(&b.slots).map(|(&x, &y)| add_mod(x, y, p)).collect(),
        mask: a.mask.iter().zip(&b.mask).map(|(&x, &y)| add_mod(x, y, p)).collect(),
        mask_id: a.mask_id.min(b.mask_id),
        depth: a.depth.max(b.depth),
    })
}

/// Ciphertext-plaintext addition (counted with the additions).
pub fn he_add_plain(
    ct: &Ciphertext,
    pt: &[u64],
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Ciphertext, HeError> {
    if pt.len() != ct.len() {
        return Err(HeError::SlotLength { expected: ct.len(), got: pt.len() });
    }
    let p = ctx.modulus();
    counter.n_add += 1;
    Ok(Ciphertext {
        slots: ct.slots.iter().zip(pt).map(|(&s, &v)| add_mod(s, v % p, p)).collect(),
        mask: ct.mask.clone(),
        mask_id: ct.mask_id,
        depth: ct.depth,
    })
}

/// Ciphertext-plaintext subtraction, `ct - pt` (counted with the additions).
pub fn he_sub_plain(
    ct: &Ciphertext,
    pt: &[u64],
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Ciphertext, HeError> {
    if pt.len() != ct.len() {
        return Err(HeError::SlotLength { expected: ct.len(), got: pt.len() });
    }
    let p = ctx.modulus();
    counter.n_add += 1;
    Ok(Ciphertext {
        slots: ct.slots.iter().zip(pt).map(|(&s, &v)| sub_mod(s, v % p, p)).collect(),
        mask: ct.mask.clone(),
        mask_id: ct.mask_id,
        depth: ct.depth,
    })
}
