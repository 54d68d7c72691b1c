//! The nested encoding: coefficient packing inside each circulant block and
//! SIMD packing across blocks through a per-block cyclic DFT.
//!
//! Within a block, a circulant GEMM of shape (b, b) x (b, d1) packs as
//! `x̂[i*d1 + j] = X[i, j]` and `ŵ[i*d1] = W[i, 0]`; the cyclic polynomial
//! product `ŷ = ŵ * x̂` then holds the result at `ŷ[i*d1 + j]`. The analogous
//! convolution packing places `x̂[i*HW + j*W + k] = X[i, j, k]` and mirrors the
//! kernel taps at `ŵ[i*HW + (W+1)(R-1) - j*W - k]`, with outputs read at
//! `ŷ[i*HW + (W+1)(R-1) + j*W + k]`.
//!
//! When the block length is padded to a power of two, padding extends the
//! free axis (columns for GEMM, the spatial plane for convolution) so the
//! wrap-around stays on the block boundary and the index rules above are
//! unchanged.

use thiserror::Error;

use crate::ring::{PrimeContext, RingError};
use crate::tensor::{Mat, Ten3};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("block data ({need} coefficients) exceeds block length {len}")]
    BlockOverflow { need: usize, len: usize },
    #[error("padded width {pad} smaller than data width {width}")]
    PadTooSmall { pad: usize, width: usize },
    #[error("{count} blocks of length {len} do not fill the ring degree {n}")]
    PackShape { count: usize, len: usize, n: usize },
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// Pack a b x d1 integer block as coefficients, with the column axis padded
/// to `d1_pad`: `x̂[i*d1_pad + j] = X[i, j]`.
pub fn encode_block_gemm_input(x: &Mat<u64>, d1_pad: usize) -> Result<Vec<u64>, EncodeError> {
    if d1_pad < x.cols {
        return Err(EncodeError::PadTooSmall { pad: d1_pad, width: x.cols });
    }
    let mut v = vec![0u64; x.rows * d1_pad];
    for i in 0..x.rows {
        for j in 0..x.cols {
            v[i * d1_pad + j] = *x.at(i, j);
        }
    }
    Ok(v)
}

/// Pack a generator column: `ŵ[i*d1_pad] = gen[i]`, all other coefficients 0.
pub fn encode_block_gemm_weight(gen: &[u64], d1_pad: usize) -> Vec<u64> {
    let mut v = vec![0u64; gen.len() * d1_pad];
    for (i, &g) in gen.iter().enumerate() {
        v[i * d1_pad] = g;
    }
    v
}

/// Read a b x d1 result block back out of a product polynomial.
pub fn decode_block_gemm_output(poly: &[u64], b: usize, d1_pad: usize, d1: usize) -> Mat<u64> {
    let mut y = Mat::zeros(b, d1);
    for i in 0..b {
        for j in 0..d1 {
            *y.at_mut(i, j) = poly[i * d1_pad + j];
        }
    }
    y
}

/// One circulant block GEMM evaluated through a single cyclic polynomial
/// product. `gen` is the block's generator column, `x` is b x d1 with
/// `b * d1` a power of two dividing the ring degree.
pub fn block_gemm_via_polymul(
    gen: &[u64],
    x: &Mat<u64>,
    ctx: &PrimeContext,
) -> Result<Mat<u64>, EncodeError> {
    let b = gen.len();
    assert_eq!(x.rows, b, "input rows must equal the block size");
    let xv = encode_block_gemm_input(x, x.cols)?;
    let wv = encode_block_gemm_weight(gen, x.cols);
    let y = ctx.poly_mul_cyclic(&wv, &xv)?;
    Ok(decode_block_gemm_output(&y, b, x.cols, x.cols))
}

/// Pack a b x H x W input block as coefficients with the spatial plane padded
/// to `hw_pad` entries: `x̂[i*hw_pad + j*W + k] = X[i, j, k]`.
pub fn encode_block_conv_input(x: &Ten3<u64>, hw_pad: usize) -> Result<Vec<u64>, EncodeError> {
    if hw_pad < x.h * x.w {
        return Err(EncodeError::PadTooSmall { pad: hw_pad, width: x.h * x.w });
    }
    let mut v = vec![0u64; x.c * hw_pad];
    for i in 0..x.c {
        for j in 0..x.h {
            for k in 0..x.w {
                v[i * hw_pad + j * x.w + k] = *x.at(i, j, k);
            }
        }
    }
    Ok(v)
}

/// Pack a b x R x R kernel generator slice with mirrored taps:
/// `ŵ[i*hw_pad + (W+1)(R-1) - j*W - k] = gen[i, j, k]`.
pub fn encode_block_conv_weight(
    gen: &[u64],
    b: usize,
    r: usize,
    w: usize,
    hw_pad: usize,
) -> Result<Vec<u64>, EncodeError> {
    assert_eq!(gen.len(), b * r * r, "generator slice length mismatch");
    let base = (w + 1) * (r - 1);
    if base >= hw_pad {
        return Err(EncodeError::BlockOverflow { need: base + 1, len: hw_pad });
    }
    let mut v = vec![0u64; b * hw_pad];
    for i in 0..b {
        for j in 0..r {
            for k in 0..r {
                v[i * hw_pad + base - j * w - k] = gen[(i * r + j) * r + k];
            }
        }
    }
    Ok(v)
}

/// Read a b x (H-R+1) x (W-R+1) block of convolution outputs.
pub fn decode_block_conv_output(
    poly: &[u64],
    b: usize,
    h: usize,
    w: usize,
    r: usize,
    hw_pad: usize,
) -> Ten3<u64> {
    let (ho, wo) = (h - r + 1, w - r + 1);
    let base = (w + 1) * (r - 1);
    let mut y = Ten3::zeros(b, ho, wo);
    for i in 0..b {
        for j in 0..ho {
            for k in 0..wo {
                *y.at_mut(i, j, k) = poly[i * hw_pad + base + j * w + k];
            }
        }
    }
    y
}

/// One circulant convolution block evaluated through a single cyclic
/// polynomial product; `gen` is a b x R x R generator slice, `x` is b x H x W
/// with `b*H*W` a power of two dividing the ring degree.
pub fn block_conv_via_polymul(
    gen: &[u64],
    x: &Ten3<u64>,
    r: usize,
    ctx: &PrimeContext,
) -> Result<Ten3<u64>, EncodeError> {
    let hw = x.h * x.w;
    let xv = encode_block_conv_input(x, hw)?;
    let wv = encode_block_conv_weight(gen, x.c, r, x.w, hw)?;
    let y = ctx.poly_mul_cyclic(&wv, &xv)?;
    Ok(decode_block_conv_output(&y, x.c, x.h, x.w, r, hw))
}

/// Concatenate the per-block cyclic DFTs of `M` equal-length blocks into one
/// slot vector of length n (`M * len == n`).
pub fn pack_blocks_simd(
    blocks: &[Vec<u64>],
    ctx: &PrimeContext,
) -> Result<Vec<u64>, EncodeError> {
    let n = ctx.degree();
    let len = blocks.first().map_or(0, Vec::len);
    if blocks.is_empty() || blocks.len() * len != n {
        return Err(EncodeError::PackShape { count: blocks.len(), len, n });
    }
    let mut out = Vec::with_capacity(n);
    for block in blocks {
        if block.len() != len {
            return Err(EncodeError::PackShape { count: blocks.len(), len: block.len(), n });
        }
        out.extend(ctx.ntt_cyclic(block, false)?);
    }
    Ok(out)
}

/// Inverse of [`pack_blocks_simd`].
pub fn unpack_blocks_simd(
    slots: &[u64],
    block_len: usize,
    ctx: &PrimeContext,
) -> Result<Vec<Vec<u64>>, EncodeError> {
    let n = ctx.degree();
    if block_len == 0 || slots.len() != n || n % block_len != 0 {
        return Err(EncodeError::PackShape { count: 0, len: block_len, n });
    }
    slots
        .chunks(block_len)
        .map(|chunk| ctx.ntt_cyclic(chunk, true).map_err(EncodeError::from))
        .collect()
}

/// Slot vector of a packed generator column without running a full-length
/// DFT: the coefficients sit on the subgroup of multiples of `d1_pad`, so the
/// length-ℓ DFT is the length-b DFT of the generator tiled ℓ/b times.
pub fn gemm_weight_block_slots(
    gen: &[u64],
    block_len: usize,
    ctx: &PrimeContext,
) -> Result<Vec<u64>, EncodeError> {
    let b = gen.len();
    debug_assert_eq!(block_len % b, 0);
    let small = ctx.ntt_cyclic(gen, false)?;
    let mut out = Vec::with_capacity(block_len);
    for _ in 0..block_len / b {
        out.extend_from_slice(&small);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::find_prime;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn ctx() -> PrimeContext {
        find_prime(20, 64).unwrap()
    }

    #[test]
    fn gemm_input_index_map() {
        let x = Mat::from_vec(2, 2, vec![3, 5, 4, 6]);
        assert_eq!(encode_block_gemm_input(&x, 2).unwrap(), vec![3, 5, 4, 6]);
        let zero = Mat::<u64>::zeros(2, 2);
        assert_eq!(encode_block_gemm_input(&zero, 2).unwrap(), vec![0; 4]);
        // round trip through decode
        let enc = encode_block_gemm_input(&x, 4).unwrap();
        assert_eq!(decode_block_gemm_output(&enc, 2, 4, 2), x);
    }

    #[test]
    fn gemm_weight_index_map() {
        assert_eq!(encode_block_gemm_weight(&[1, 2], 1), vec![1, 2]);
        assert_eq!(encode_block_gemm_weight(&[1, 2], 2), vec![1, 0, 2, 0]);
        let v = encode_block_gemm_weight(&[7, 8, 9, 1], 4);
        assert_eq!(v.iter().filter(|&&x| x != 0).count(), 4);
    }

    #[test]
    fn block_gemm_small_example() {
        // gen = [1, 2] is the circulant [[1, 2], [2, 1]]; X = [[3], [4]].
        let ctx = ctx();
        let x = Mat::from_vec(2, 1, vec![3, 4]);
        let y = block_gemm_via_polymul(&[1, 2], &x, &ctx).unwrap();
        assert_eq!(y.data, vec![11, 10]);
        // b = 1 is plain row scaling
        let x = Mat::from_vec(1, 4, vec![1, 2, 3, 4]);
        let y = block_gemm_via_polymul(&[3], &x, &ctx).unwrap();
        assert_eq!(y.data, vec![3, 6, 9, 12]);
    }

    #[test]
    fn pack_unpack_round_trip_and_single_block() {
        let ctx = ctx();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let p = ctx.modulus();
        let blocks: Vec<Vec<u64>> =
            (0..4).map(|_| (0..16).map(|_| rng.gen_range(0..p)).collect()).collect();
        let packed = pack_blocks_simd(&blocks, &ctx).unwrap();
        assert_eq!(unpack_blocks_simd(&packed, 16, &ctx).unwrap(), blocks);

        let single = vec![(0..64).map(|_| rng.gen_range(0..p)).collect::<Vec<u64>>()];
        let packed = pack_blocks_simd(&single, &ctx).unwrap();
        assert_eq!(packed, ctx.ntt_cyclic(&single[0], false).unwrap());

        assert!(matches!(
            pack_blocks_simd(&blocks[..3], &ctx),
            Err(EncodeError::PackShape { .. })
        ));
    }

    #[test]
    fn weight_slots_tiling_matches_full_dft() {
        let ctx = ctx();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let p = ctx.modulus();
        for (b, len) in [(2usize, 16usize), (4, 16), (8, 32), (4, 64)] {
            let gen: Vec<u64> = (0..b).map(|_| rng.gen_range(0..p)).collect();
            let direct = ctx
                .ntt_cyclic(&encode_block_gemm_weight(&gen, len / b), false)
                .unwrap();
            assert_eq!(gemm_weight_block_slots(&gen, len, &ctx).unwrap(), direct);
        }
    }
}
