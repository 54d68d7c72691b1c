//! Executors that run a [`BsgsPlan`] over mock ciphertexts.
//!
//! Layout. A ciphertext of degree n is split into `P = n / ℓ` block positions
//! of ℓ slots each; position q carries the ℓ-point cyclic DFT of one encoded
//! block, so a slot-wise product folds the per-block polynomial products and
//! a rotation by ℓ slots steps one block position.
//!
//! An input tile of `d` blocks is laid out at positions `0..d`. If the
//! ciphertext has spare positions (`d < P`), positions `d..2d-1` repeat
//! blocks `0..d-1` so every baby/giant rotation the schedule performs reads
//! the cyclically wrapped block without extra rotations; when `d == P` the
//! wrap-around is the natural one. Weight diagonals are laid down
//! pre-rotated by their giant step, which makes the giant-step rotation of
//! the accumulated inner sums land every product at its home position.
//!
//! The executed rotation and multiplication counts equal the plan's
//! predictions exactly; this is asserted by the test suites, not assumed.

use thiserror::Error;

use crate::bsgs::{BsgsPlan, ConvDims, GemmDims, PlanKind};
use crate::circulant::{BlockCirculantConvKernel, BlockCirculantMatrix};
use crate::encode::{
    decode_block_conv_output, decode_block_gemm_output, encode_block_conv_input,
    encode_block_conv_weight, encode_block_gemm_input, gemm_weight_block_slots, EncodeError,
};
use crate::mockhe::{
    decrypt, encrypt, he_add, he_pmult, he_rot, Ciphertext, HeError, KeyContext, OpCounter,
};
use crate::ring::PrimeContext;
use crate::tensor::{Mat, Ten3};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("plan was built for a {expected:?} layer, got a {got:?} layer")]
    KindMismatch { expected: PlanKind, got: PlanKind },
    #[error("plan does not match the layer: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    He(#[from] HeError),
}

fn ensure(cond: bool, msg: &str) -> Result<(), ExecError> {
    if cond {
        Ok(())
    } else {
        Err(ExecError::PlanMismatch(msg.to_string()))
    }
}

/// Write `block` (already DFT'd, length ℓ) at block position `pos`.
fn place_block(slots: &mut [u64], pos: usize, block: &[u64]) {
    let l = block.len();
    slots[pos * l..(pos + 1) * l].copy_from_slice(block);
}

/// Positions a tile's payload occupies, replica region included.
fn payload_positions(d: usize, positions: usize) -> usize {
    if d == positions {
        d
    } else {
        (2 * d - 1).min(positions)
    }
}

// ---------------------------------------------------------------------------
// Input encoding (client side)
// ---------------------------------------------------------------------------

/// Slot vectors for every input ciphertext of a GEMM, ordered by
/// (column tile, channel-block tile).
pub fn encode_gemm_inputs(
    plan: &BsgsPlan,
    x: &Mat<u64>,
    ctx: &PrimeContext,
) -> Result<Vec<Vec<u64>>, ExecError> {
    ensure(plan.kind == PlanKind::Gemm, "gemm plan required")?;
    ensure(x.rows % plan.b == 0, "input rows must be a multiple of the block size")?;
    let b = plan.b;
    let l = plan.block_len;
    let d1_pad = l / b;
    let positions = plan.positions();
    let block_cols = x.rows / b;
    let col_tiles = x.cols.div_ceil(plan.d1_tile);
    let in_tiles = block_cols.div_ceil(plan.d);
    let mut out = Vec::with_capacity(col_tiles * in_tiles);
    for t in 0..col_tiles {
        let c0 = t * plan.d1_tile;
        let width = plan.d1_tile.min(x.cols - c0);
        for ci in 0..in_tiles {
            let mut slots = vec![0u64; plan.n];
            for q in 0..payload_positions(plan.d, positions) {
                let cb = ci * plan.d + (q % plan.d);
                if cb >= block_cols {
                    continue;
                }
                let mut blk = Mat::zeros(b, width);
                for i in 0..b {
                    for j in 0..width {
                        *blk.at_mut(i, j) = *x.at(cb * b + i, c0 + j);
                    }
                }
                let coeffs = encode_block_gemm_input(&blk, d1_pad)?;
                let dft = ctx.ntt_cyclic(&coeffs, false).map_err(EncodeError::from)?;
                place_block(&mut slots, q, &dft);
            }
            out.push(slots);
        }
    }
    Ok(out)
}

/// Slot vectors for every input ciphertext of a convolution, ordered by
/// channel-block tile.
pub fn encode_conv_inputs(
    plan: &BsgsPlan,
    x: &Ten3<u64>,
    ctx: &PrimeContext,
) -> Result<Vec<Vec<u64>>, ExecError> {
    ensure(plan.kind == PlanKind::Conv, "conv plan required")?;
    ensure(x.c % plan.b == 0, "input channels must be a multiple of the block size")?;
    ensure(x.h * x.w == plan.d1_tile, "spatial size does not match the plan")?;
    let b = plan.b;
    let l = plan.block_len;
    let hw_pad = l / b;
    let positions = plan.positions();
    let block_cols = x.c / b;
    let in_tiles = block_cols.div_ceil(plan.d);
    let mut out = Vec::with_capacity(in_tiles);
    for ci in 0..in_tiles {
        let mut slots = vec![0u64; plan.n];
        for q in 0..payload_positions(plan.d, positions) {
            let cb = ci * plan.d + (q % plan.d);
            if cb >= block_cols {
                continue;
            }
            let mut blk = Ten3::zeros(b, x.h, x.w);
            for i in 0..b {
                for j in 0..x.h {
                    for k in 0..x.w {
                        *blk.at_mut(i, j, k) = *x.at(cb * b + i, j, k);
                    }
                }
            }
            let coeffs = encode_block_conv_input(&blk, hw_pad)?;
            let dft = ctx.ntt_cyclic(&coeffs, false).map_err(EncodeError::from)?;
            place_block(&mut slots, q, &dft);
        }
        out.push(slots);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Weight diagonals (server side, plaintext; prepared offline and not counted)
// ---------------------------------------------------------------------------

trait DiagonalSource {
    /// Plaintext slot vector for diagonal `t` of weight tile (ko, ci),
    /// pre-rotated by its giant step.
    fn diagonal(&self, plan: &BsgsPlan, ko: usize, ci: usize, t: usize) -> Vec<u64>;
    fn block_rows(&self) -> usize;
    fn block_cols(&self) -> usize;
}

struct GemmWeights<'a> {
    w: &'a BlockCirculantMatrix,
    ctx: &'a PrimeContext,
}

impl DiagonalSource for GemmWeights<'_> {
    fn diagonal(&self, plan: &BsgsPlan, ko: usize, ci: usize, t: usize) -> Vec<u64> {
        let positions = plan.positions();
        let shift = (t / plan.baby) * plan.baby;
        let mut slots = vec![0u64; plan.n];
        for q in 0..plan.d {
            let r_blk = ko * plan.d + q;
            let c_blk = ci * plan.d + (q + t) % plan.d;
            if r_blk >= self.block_rows() || c_blk >= self.block_cols() {
                continue;
            }
            let gen = self.w.generator(r_blk, c_blk);
            let dft = gemm_weight_block_slots(gen, plan.block_len, self.ctx)
                .expect("weight block fits its slot");
            place_block(&mut slots, (q + shift) % positions, &dft);
        }
        slots
    }

    fn block_rows(&self) -> usize {
        self.w.block_rows()
    }

    fn block_cols(&self) -> usize {
        self.w.block_cols()
    }
}

struct ConvWeights<'a> {
    w: &'a BlockCirculantConvKernel,
    width: usize,
    ctx: &'a PrimeContext,
}

impl DiagonalSource for ConvWeights<'_> {
    fn diagonal(&self, plan: &BsgsPlan, ko: usize, ci: usize, t: usize) -> Vec<u64> {
        let positions = plan.positions();
        let shift = (t / plan.baby) * plan.baby;
        let hw_pad = plan.block_len / plan.b;
        let mut slots = vec![0u64; plan.n];
        for q in 0..plan.d {
            let r_blk = ko * plan.d + q;
            let c_blk = ci * plan.d + (q + t) % plan.d;
            if r_blk >= self.block_rows() || c_blk >= self.block_cols() {
                continue;
            }
            let gen = self.w.generator(r_blk, c_blk);
            let coeffs =
                encode_block_conv_weight(gen, plan.b, self.w.r, self.width, hw_pad)
                    .expect("kernel taps fit the padded block");
            let dft = self.ctx.ntt_cyclic(&coeffs, false).expect("block length divides n");
            place_block(&mut slots, (q + shift) % positions, &dft);
        }
        slots
    }

    fn block_rows(&self) -> usize {
        self.w.block_rows()
    }

    fn block_cols(&self) -> usize {
        self.w.block_cols()
    }
}

// ---------------------------------------------------------------------------
// The shared BSGS fold
// ---------------------------------------------------------------------------

/// Run the baby-step giant-step fold over already-encrypted inputs. Inputs
/// are ordered (column tile, channel tile); outputs come back ordered
/// (column tile, output tile). Only the plan's rotations and multiplications
/// touch the counter.
fn bsgs_fold(
    plan: &BsgsPlan,
    source: &dyn DiagonalSource,
    in_cts: &[Ciphertext],
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Vec<Ciphertext>, ExecError> {
    let in_tiles = source.block_cols().div_ceil(plan.d);
    let out_tiles = source.block_rows().div_ceil(plan.d);
    let col_tiles = in_cts.len() / in_tiles;
    ensure(col_tiles * in_tiles == in_cts.len(), "ciphertext count does not match the plan")?;
    let l = plan.block_len;
    let mut outputs = Vec::with_capacity(col_tiles * out_tiles);
    for t in 0..col_tiles {
        // Baby-step rotations, shared across every output tile.
        let mut babies: Vec<Vec<Ciphertext>> = Vec::with_capacity(in_tiles);
        for ci in 0..in_tiles {
            let mut rots = Vec::with_capacity(plan.baby);
            rots.push(in_cts[t * in_tiles + ci].clone());
            for i in 1..plan.baby {
                let next = he_rot(&rots[i - 1], l, counter, ctx)?;
                rots.push(next);
            }
            babies.push(rots);
        }
        for ko in 0..out_tiles {
            let mut acc: Option<Ciphertext> = None;
            for j in 0..plan.giant {
                let mut inner: Option<Ciphertext> = None;
                for (ci, rots) in babies.iter().enumerate() {
                    for (i, rot) in rots.iter().enumerate() {
                        let diag = source.diagonal(plan, ko, ci, j * plan.baby + i);
                        let term = he_pmult(rot, &diag, counter, ctx)?;
                        inner = Some(match inner {
                            None => term,
                            Some(s) => he_add(&s, &term, counter, ctx)?,
                        });
                    }
                }
                let mut inner = inner.expect("plan always schedules at least one product");
                if j > 0 {
                    inner = he_rot(&inner, j * plan.baby * l, counter, ctx)?;
                }
                acc = Some(match acc {
                    None => inner,
                    Some(s) => he_add(&s, &inner, counter, ctx)?,
                });
            }
            outputs.push(acc.expect("giant loop runs at least once"));
        }
    }
    Ok(outputs)
}

/// GEMM fold over encrypted inputs; the heavy entry point for protocols.
pub fn gemm_on_ciphertexts(
    plan: &BsgsPlan,
    w: &BlockCirculantMatrix,
    in_cts: &[Ciphertext],
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Vec<Ciphertext>, ExecError> {
    ensure(plan.kind == PlanKind::Gemm, "gemm plan required")?;
    ensure(plan.b == w.b, "plan and weight disagree on the block size")?;
    ensure(plan.n == ctx.degree(), "plan and ring disagree on the degree")?;
    let source = GemmWeights { w, ctx };
    bsgs_fold(plan, &source, in_cts, counter, ctx)
}

/// Convolution fold over encrypted inputs.
pub fn conv_on_ciphertexts(
    plan: &BsgsPlan,
    w: &BlockCirculantConvKernel,
    width: usize,
    in_cts: &[Ciphertext],
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Vec<Ciphertext>, ExecError> {
    ensure(plan.kind == PlanKind::Conv, "conv plan required")?;
    ensure(plan.b == w.b, "plan and kernel disagree on the block size")?;
    ensure(plan.n == ctx.degree(), "plan and ring disagree on the degree")?;
    let source = ConvWeights { w, width, ctx };
    bsgs_fold(plan, &source, in_cts, counter, ctx)
}

// ---------------------------------------------------------------------------
// Output decoding
// ---------------------------------------------------------------------------

/// Decode GEMM output slot vectors (ordered (column tile, output tile)) into
/// the d3 x d1 result.
pub fn decode_gemm_outputs(
    plan: &BsgsPlan,
    dims: GemmDims,
    slot_vecs: &[Vec<u64>],
    ctx: &PrimeContext,
) -> Result<Mat<u64>, ExecError> {
    let b = plan.b;
    let l = plan.block_len;
    let d1_pad = l / b;
    let block_rows = dims.d3 / b;
    let out_tiles = block_rows.div_ceil(plan.d);
    let col_tiles = dims.d1.div_ceil(plan.d1_tile);
    ensure(slot_vecs.len() == col_tiles * out_tiles, "output ciphertext count mismatch")?;
    let mut y = Mat::zeros(dims.d3, dims.d1);
    for t in 0..col_tiles {
        let c0 = t * plan.d1_tile;
        let width = plan.d1_tile.min(dims.d1 - c0);
        for ko in 0..out_tiles {
            let slots = &slot_vecs[t * out_tiles + ko];
            for q in 0..plan.d {
                let kb = ko * plan.d + q;
                if kb >= block_rows {
                    continue;
                }
                let poly = ctx
                    .ntt_cyclic(&slots[q * l..(q + 1) * l], true)
                    .map_err(EncodeError::from)?;
                let blk = decode_block_gemm_output(&poly, b, d1_pad, width);
                for i in 0..b {
                    for j in 0..width {
                        *y.at_mut(kb * b + i, c0 + j) = *blk.at(i, j);
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Decode convolution output slot vectors (ordered by output tile) into the
/// K x (H-R+1) x (W-R+1) result.
pub fn decode_conv_outputs(
    plan: &BsgsPlan,
    dims: ConvDims,
    slot_vecs: &[Vec<u64>],
    ctx: &PrimeContext,
) -> Result<Ten3<u64>, ExecError> {
    let b = plan.b;
    let l = plan.block_len;
    let hw_pad = l / b;
    let block_rows = dims.k / b;
    let out_tiles = block_rows.div_ceil(plan.d);
    ensure(slot_vecs.len() == out_tiles, "output ciphertext count mismatch")?;
    let (ho, wo) = (dims.h - dims.r + 1, dims.w - dims.r + 1);
    let mut y = Ten3::zeros(dims.k, ho, wo);
    for (ko, slots) in slot_vecs.iter().enumerate() {
        for q in 0..plan.d {
            let kb = ko * plan.d + q;
            if kb >= block_rows {
                continue;
            }
            let poly = ctx
                .ntt_cyclic(&slots[q * l..(q + 1) * l], true)
                .map_err(EncodeError::from)?;
            let blk = decode_block_conv_output(&poly, b, dims.h, dims.w, dims.r, hw_pad);
            for i in 0..b {
                for j in 0..ho {
                    for k in 0..wo {
                        *y.at_mut(kb * b + i, j, k) = *blk.at(i, j, k);
                    }
                }
            }
        }
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// End-to-end convenience paths
// ---------------------------------------------------------------------------

/// Encrypt, fold and decrypt a whole GEMM; the decoded result equals the
/// dense product and the counter tallies equal the plan's predictions.
pub fn execute_gemm(
    plan: &BsgsPlan,
    w: &BlockCirculantMatrix,
    x: &Mat<u64>,
    keys: &mut KeyContext,
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Mat<u64>, ExecError> {
    ensure(w.d2 == x.rows, "weight columns must match input rows")?;
    let dims = GemmDims { d1: x.cols, d2: w.d2, d3: w.d3 };
    let encoded = encode_gemm_inputs(plan, x, ctx)?;
    let mut cts = Vec::with_capacity(encoded.len());
    for slots in &encoded {
        cts.push(encrypt(slots, keys, ctx)?);
    }
    let out = gemm_on_ciphertexts(plan, w, &cts, counter, ctx)?;
    let slot_vecs: Vec<Vec<u64>> = out.iter().map(|ct| decrypt(ct, ctx)).collect();
    decode_gemm_outputs(plan, dims, &slot_vecs, ctx)
}

/// Encrypt, fold and decrypt a whole convolution.
pub fn execute_conv(
    plan: &BsgsPlan,
    w: &BlockCirculantConvKernel,
    x: &Ten3<u64>,
    keys: &mut KeyContext,
    counter: &mut OpCounter,
    ctx: &PrimeContext,
) -> Result<Ten3<u64>, ExecError> {
    ensure(w.c_in == x.c, "kernel input channels must match the input")?;
    ensure(x.h >= w.r && x.w >= w.r, "kernel larger than the input")?;
    let dims = ConvDims { h: x.h, w: x.w, c: x.c, k: w.k_out, r: w.r };
    let encoded = encode_conv_inputs(plan, x, ctx)?;
    let mut cts = Vec::with_capacity(encoded.len());
    for slots in &encoded {
        cts.push(encrypt(slots, keys, ctx)?);
    }
    let out = conv_on_ciphertexts(plan, w, x.w, &cts, counter, ctx)?;
    let slot_vecs: Vec<Vec<u64>> = out.iter().map(|ct| decrypt(ct, ctx)).collect();
    decode_conv_outputs(plan, dims, &slot_vecs, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsgs::{plan_bsgs_conv, plan_bsgs_gemm};
    use crate::oracle::{dense_circulant_conv, dense_circulant_gemm};
    use crate::ring::find_prime;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize, p: u64) -> Mat<u64> {
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(0..p)).collect())
    }

    fn random_bcm(
        rng: &mut ChaCha20Rng,
        d3: usize,
        d2: usize,
        b: usize,
        p: u64,
    ) -> BlockCirculantMatrix {
        let gens = (0..(d3 / b) * (d2 / b) * b).map(|_| rng.gen_range(0..p)).collect();
        BlockCirculantMatrix::new(d3, d2, b, gens).unwrap()
    }

    fn random_kernel(
        rng: &mut ChaCha20Rng,
        k: usize,
        c: usize,
        r: usize,
        b: usize,
        p: u64,
    ) -> BlockCirculantConvKernel {
        let gens = (0..(k / b) * (c / b) * b * r * r).map(|_| rng.gen_range(0..p)).collect();
        BlockCirculantConvKernel::new(k, c, r, b, gens).unwrap()
    }

    fn check_gemm(d1: usize, d2: usize, d3: usize, b: usize, n: usize, seed: u64) {
        let ctx = find_prime(20, n).unwrap();
        let p = ctx.modulus();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let plan = plan_bsgs_gemm(GemmDims { d1, d2, d3 }, b, n).unwrap();
        let w = random_bcm(&mut rng, d3, d2, b, p);
        let x = random_matrix(&mut rng, d2, d1, p);
        let mut keys = KeyContext::new(seed);
        let mut counter = OpCounter::default();
        let y = execute_gemm(&plan, &w, &x, &mut keys, &mut counter, &ctx).unwrap();
        assert_eq!(y, dense_circulant_gemm(&w, &x, p), "({d1},{d2},{d3}) b={b} n={n}");
        assert_eq!(counter.n_rot, plan.n_rot, "rotations ({d1},{d2},{d3}) b={b}");
        assert_eq!(counter.n_pmult, plan.n_pmult, "pmults ({d1},{d2},{d3}) b={b}");
    }

    #[test]
    fn small_gemm_grid_matches_dense_oracle() {
        check_gemm(4, 8, 8, 4, 64, 1); // the worked 4-block example shape
        check_gemm(4, 8, 8, 4, 32, 2);
        check_gemm(8, 16, 32, 2, 64, 3);
        check_gemm(16, 8, 8, 2, 256, 4); // partial fill with replica region
        check_gemm(6, 12, 24, 2, 64, 5); // ragged tiles
        check_gemm(3, 10, 6, 2, 32, 6);
        check_gemm(5, 8, 24, 4, 128, 7);
        check_gemm(8, 24, 12, 2, 64, 8);
    }

    #[test]
    fn one_block_gemm_uses_zero_rotations() {
        let ctx = find_prime(20, 64).unwrap();
        let p = ctx.modulus();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let plan = plan_bsgs_gemm(GemmDims { d1: 4, d2: 8, d3: 8 }, 8, 64).unwrap();
        assert_eq!(plan.d, 1);
        let w = random_bcm(&mut rng, 8, 8, 8, p);
        let x = random_matrix(&mut rng, 8, 4, p);
        let mut keys = KeyContext::new(0);
        let mut counter = OpCounter::default();
        let y = execute_gemm(&plan, &w, &x, &mut keys, &mut counter, &ctx).unwrap();
        assert_eq!(y, dense_circulant_gemm(&w, &x, p));
        assert_eq!(counter.n_rot, 0);
    }

    fn check_conv(h: usize, w: usize, c: usize, k: usize, r: usize, b: usize, n: usize, seed: u64) {
        let ctx = find_prime(20, n).unwrap();
        let p = ctx.modulus();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let plan = plan_bsgs_conv(ConvDims { h, w, c, k, r }, b, n).unwrap();
        let kernel = random_kernel(&mut rng, k, c, r, b, p);
        let x = Ten3::from_vec(
            c,
            h,
            w,
            (0..c * h * w).map(|_| rng.gen_range(0..p)).collect(),
        );
        let mut keys = KeyContext::new(seed);
        let mut counter = OpCounter::default();
        let y = execute_conv(&plan, &kernel, &x, &mut keys, &mut counter, &ctx).unwrap();
        assert_eq!(y, dense_circulant_conv(&kernel, &x, p), "conv {h}x{w} {c}->{k} r{r} b{b}");
        assert_eq!(counter.n_rot, plan.n_rot);
        assert_eq!(counter.n_pmult, plan.n_pmult);
    }

    #[test]
    fn small_conv_grid_matches_dense_oracle() {
        check_conv(4, 4, 2, 2, 3, 2, 64, 11); // the worked toy convolution shape
        check_conv(4, 4, 4, 4, 1, 2, 64, 12); // 1x1 kernel
        check_conv(6, 6, 4, 4, 3, 2, 512, 13); // padded spatial plane
        check_conv(8, 8, 8, 8, 3, 2, 512, 14); // the reduced desk instance
        check_conv(4, 4, 8, 16, 3, 4, 256, 15);
        check_conv(5, 5, 4, 2, 2, 2, 128, 16);
        check_conv(3, 3, 12, 6, 2, 2, 256, 17); // replica region in play
        check_conv(4, 4, 16, 8, 1, 2, 128, 18);
    }

    #[test]
    fn conv_single_block_zero_rotations() {
        let ctx = find_prime(20, 64).unwrap();
        let p = ctx.modulus();
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        // C = K = b: a single block.
        let plan = plan_bsgs_conv(ConvDims { h: 4, w: 4, c: 2, k: 2, r: 3 }, 2, 64).unwrap();
        assert_eq!(plan.n_rot, 0);
        let kernel = random_kernel(&mut rng, 2, 2, 3, 2, p);
        let x = Ten3::from_vec(2, 4, 4, (0..32).map(|_| rng.gen_range(0..p)).collect());
        let mut keys = KeyContext::new(1);
        let mut counter = OpCounter::default();
        let y = execute_conv(&plan, &kernel, &x, &mut keys, &mut counter, &ctx).unwrap();
        assert_eq!(y, dense_circulant_conv(&kernel, &x, p));
        assert_eq!(counter.n_rot, 0);
    }

    #[test]
    fn impulse_input_reads_back_kernel_taps() {
        // A delta at one spatial position reproduces mirrored kernel rows.
        let ctx = find_prime(20, 64).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(20);
        let p = ctx.modulus();
        let kernel = random_kernel(&mut rng, 2, 2, 3, 2, p);
        let mut x = Ten3::zeros(2, 4, 4);
        *x.at_mut(0, 1, 1) = 1;
        let plan = plan_bsgs_conv(ConvDims { h: 4, w: 4, c: 2, k: 2, r: 3 }, 2, 64).unwrap();
        let mut keys = KeyContext::new(2);
        let mut counter = OpCounter::default();
        let y = execute_conv(&plan, &kernel, &x, &mut keys, &mut counter, &ctx).unwrap();
        let dense = kernel.to_dense();
        for k in 0..2 {
            for oy in 0..2 {
                for ox in 0..2 {
                    // Only the tap aligning the delta with (oy, ox) contributes.
                    let (ry, rx) = (1 - oy as i64, 1 - ox as i64);
                    let expect = if (0..3).contains(&ry) && (0..3).contains(&rx) {
                        *dense.at(k, 0, ry as usize, rx as usize)
                    } else {
                        0
                    };
                    assert_eq!(*y.at(k, oy, ox), expect);
                }
            }
        }
    }
}
