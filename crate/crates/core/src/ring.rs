//! Prime-field arithmetic and exact transforms for the plaintext rings.
//!
//! Everything runs over a single NTT-friendly prime `p` with `p ≡ 1 (mod 2n)`
//! so the ring degree `n` admits a nega-cyclic NTT and every power-of-two
//! length `ℓ | n` admits a cyclic NTT. All arithmetic is exact; there is no
//! floating point in this module.

use std::collections::BTreeMap;

use thiserror::Error;

/// Default plaintext bitwidth used across the toolkit.
pub const DEFAULT_PRIME_BITS: u32 = 41;
/// Default ring degree.
pub const DEFAULT_RING_DEGREE: usize = 8192;
/// Smallest 41-bit prime congruent to 1 mod 2*8192 (the toolkit default
/// modulus, found by [`find_prime`] and pinned here for documentation).
pub const DEFAULT_MODULUS: u64 = 1_099_511_922_689;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("ring degree {0} is not a power of two")]
    DegreeNotPowerOfTwo(usize),
    #[error("no prime with {bits} bits congruent to 1 mod {modulus} in range")]
    NoPrimeInRange { bits: u32, modulus: u64 },
    #[error("prime search needs 2n < 2^bits and bits <= 62 (got bits={bits}, n={n})")]
    BadPrimeRequest { bits: u32, n: usize },
    #[error("transform length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
    #[error("transform length {len} does not divide the ring degree {n}")]
    LengthDoesNotDivide { len: usize, n: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[inline(always)]
pub fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

#[inline(always)]
pub fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + p - b
    }
}

#[inline(always)]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Modular inverse via Fermat (p prime).
pub fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Deterministic Miller-Rabin, complete for all u64 with this base set.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// An immutable prime-field context: modulus, ring degree, a primitive 2n-th
/// root of unity and a per-length cache of cyclic roots.
#[derive(Debug, Clone)]
pub struct PrimeContext {
    p: u64,
    n: usize,
    root_2n: u64,
    /// Cyclic primitive roots, forward and inverse, per power-of-two length.
    cyclic_roots: BTreeMap<usize, (u64, u64)>,
    n_inv: BTreeMap<usize, u64>,
    psi_powers: Vec<u64>,
    psi_inv_powers: Vec<u64>,
}

impl PrimeContext {
    /// Build a context from a known prime with `p ≡ 1 (mod 2n)`.
    pub fn new(p: u64, n: usize) -> Result<Self, RingError> {
        if !n.is_power_of_two() {
            return Err(RingError::DegreeNotPowerOfTwo(n));
        }
        assert!(is_prime(p), "modulus must be prime");
        let two_n = 2 * n as u64;
        assert_eq!((p - 1) % two_n, 0, "p must be 1 mod 2n");

        // Smallest base whose (p-1)/2n power has exact order 2n. Since 2n is a
        // power of two, order 2n is equivalent to r^n = -1.
        let mut root_2n = 0u64;
        for g in 2..p {
            let r = pow_mod(g, (p - 1) / two_n, p);
            if pow_mod(r, n as u64, p) == p - 1 {
                root_2n = r;
                break;
            }
        }
        assert_ne!(root_2n, 0, "no 2n-th root found");

        let mut cyclic_roots = BTreeMap::new();
        let mut n_inv = BTreeMap::new();
        let mut len = 1usize;
        while len <= n {
            let w = pow_mod(root_2n, (two_n / len as u64) as u64, p);
            cyclic_roots.insert(len, (w, inv_mod(w, p)));
            n_inv.insert(len, inv_mod(len as u64, p));
            len *= 2;
        }

        let mut psi_powers = Vec::with_capacity(n);
        let mut psi_inv_powers = Vec::with_capacity(n);
        let psi_inv = inv_mod(root_2n, p);
        let (mut a, mut b) = (1u64, 1u64);
        for _ in 0..n {
            psi_powers.push(a);
            psi_inv_powers.push(b);
            a = mul_mod(a, root_2n, p);
            b = mul_mod(b, psi_inv, p);
        }

        Ok(Self { p, n, root_2n, cyclic_roots, n_inv, psi_powers, psi_inv_powers })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn root_2n(&self) -> u64 {
        self.root_2n
    }

    /// Primitive cyclic root of unity for a power-of-two length dividing n.
    pub fn cyclic_root(&self, len: usize) -> Result<u64, RingError> {
        self.check_len(len)?;
        Ok(self.cyclic_roots[&len].0)
    }

    fn check_len(&self, len: usize) -> Result<(), RingError> {
        if !len.is_power_of_two() {
            return Err(RingError::LengthNotPowerOfTwo(len));
        }
        if len > self.n || self.n % len != 0 {
            return Err(RingError::LengthDoesNotDivide { len, n: self.n });
        }
        Ok(())
    }

    /// Cyclic NTT of a power-of-two length `ℓ | n`, natural order in and out.
    ///
    /// Forward maps coefficients of Z_p[x]/(x^ℓ - 1) to evaluations at the
    /// ℓ-th roots of unity; with `inverse` set it is the exact inverse.
    pub fn ntt_cyclic(&self, v: &[u64], inverse: bool) -> Result<Vec<u64>, RingError> {
        let len = v.len();
        self.check_len(len)?;
        let (w, w_inv) = self.cyclic_roots[&len];
        let mut out = v.to_vec();
        self.ntt_in_place(&mut out, if inverse { w_inv } else { w });
        if inverse {
            let s = self.n_inv[&len];
            for x in &mut out {
                *x = mul_mod(*x, s, self.p);
            }
        }
        Ok(out)
    }

    /// Nega-cyclic NTT of length exactly `n` (the slot transform of
    /// Z_p[x]/(x^n + 1)): twist by powers of the 2n-th root, then a cyclic
    /// transform. Pointwise products in the image correspond to nega-cyclic
    /// polynomial products.
    pub fn ntt_negacyclic(&self, v: &[u64], inverse: bool) -> Result<Vec<u64>, RingError> {
        if v.len() != self.n {
            return Err(RingError::LengthMismatch { expected: self.n, got: v.len() });
        }
        let p = self.p;
        if !inverse {
            let mut twisted: Vec<u64> = (0..self.n)
                .map(|i| mul_mod(v[i], self.psi_powers[i], p))
                .collect();
            let (w, _) = self.cyclic_roots[&self.n];
            self.ntt_in_place(&mut twisted, w);
            Ok(twisted)
        } else {
            let (_, w_inv) = self.cyclic_roots[&self.n];
            let mut out = v.to_vec();
            self.ntt_in_place(&mut out, w_inv);
            let s = self.n_inv[&self.n];
            for (i, x) in out.iter_mut().enumerate() {
                *x = mul_mod(mul_mod(*x, s, p), self.psi_inv_powers[i], p);
            }
            Ok(out)
        }
    }

    /// Iterative radix-2 transform with the given primitive root; bit-reversal
    /// handled internally so callers see natural order on both sides.
    fn ntt_in_place(&self, data: &mut [u64], root: u64) {
        let n = data.len();
        if n <= 1 {
            return;
        }
        let p = self.p;
        let log_n = n.trailing_zeros();
        for i in 0..n {
            let j = bit_reverse(i, log_n);
            if i < j {
                data.swap(i, j);
            }
        }
        let mut m = 2;
        while m <= n {
            let wm = pow_mod(root, (n / m) as u64, p);
            for base in (0..n).step_by(m) {
                let mut w = 1u64;
                for j in 0..m / 2 {
                    let t = mul_mod(w, data[base + j + m / 2], p);
                    let u = data[base + j];
                    data[base + j] = add_mod(u, t, p);
                    data[base + j + m / 2] = sub_mod(u, t, p);
                    w = mul_mod(w, wm, p);
                }
            }
            m *= 2;
        }
    }

    /// Exact product in Z_p[x]/(x^ℓ - 1) via forward transforms, a pointwise
    /// product and one inverse transform.
    pub fn poly_mul_cyclic(&self, a: &[u64], b: &[u64]) -> Result<Vec<u64>, RingError> {
        if a.len() != b.len() {
            return Err(RingError::LengthMismatch { expected: a.len(), got: b.len() });
        }
        let fa = self.ntt_cyclic(a, false)?;
        let fb = self.ntt_cyclic(b, false)?;
        let prod: Vec<u64> = fa
            .iter()
            .zip(&fb)
            .map(|(&x, &y)| mul_mod(x, y, self.p))
            .collect();
        self.ntt_cyclic(&prod, true)
    }

    /// Exact product in Z_p[x]/(x^n + 1).
    pub fn poly_mul_negacyclic(&self, a: &[u64], b: &[u64]) -> Result<Vec<u64>, RingError> {
        let fa = self.ntt_negacyclic(a, false)?;
        let fb = self.ntt_negacyclic(b, false)?;
        let prod: Vec<u64> = fa
            .iter()
            .zip(&fb)
            .map(|(&x, &y)| mul_mod(x, y, self.p))
            .collect();
        self.ntt_negacyclic(&prod, true)
    }

    /// Reduce a signed integer into [0, p).
    pub fn reduce_i64(&self, v: i64) -> u64 {
        let p = self.p as i128;
        let r = (v as i128).rem_euclid(p);
        r as u64
    }
}

#[inline]
fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut out = 0usize;
    for _ in 0..bits {
        out = (out << 1) | (x & 1);
        x >>= 1;
    }
    out
}

/// Find the smallest prime `p >= 2^(bits-1)` with `p ≡ 1 (mod 2n)` and build
/// a verified context around it.
pub fn find_prime(bits: u32, n: usize) -> Result<PrimeContext, RingError> {
    if !n.is_power_of_two() {
        return Err(RingError::DegreeNotPowerOfTwo(n));
    }
    let two_n = 2 * n as u64;
    if bits > 62 || bits < 2 || (two_n as u128) >= (1u128 << bits) {
        return Err(RingError::BadPrimeRequest { bits, n });
    }
    let lo = 1u64 << (bits - 1);
    let mut candidate = lo + ((1 + two_n - lo % two_n) % two_n);
    if candidate < lo {
        candidate += two_n;
    }
    let hi = if bits == 62 { u64::MAX } else { (1u64 << (bits + 1)) - 1 };
    while candidate <= hi {
        if is_prime(candidate) {
            return PrimeContext::new(candidate, n);
        }
        match candidate.checked_add(two_n) {
            Some(c) => candidate = c,
            None => break,
        }
    }
    Err(RingError::NoPrimeInRange { bits, modulus: two_n })
}
