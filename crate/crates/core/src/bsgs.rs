//! Baby-step giant-step tiling planners.
//!
//! Across blocks the computation is a block-level GEMM; each ciphertext packs
//! `d` blocks of padded length `ℓ` and the d diagonals of every d x d weight
//! tile are folded with `B` baby and `G` giant rotations, `B*G = d`. The
//! planners minimise
//!
//! ```text
//! #Rot = n_ct_in * (B - 1) + n_ct_out * (G - 1)
//! ```
//!
//! over the feasible tilings and report the exact multiplication and
//! ciphertext counts the executor will realise.
//!
//! Candidate tilings fill the ciphertext exactly (`ℓ * d = n`, with ℓ the
//! power-of-two padding of the block payload). Only when no exact-fill
//! tiling exists does the planner fall back to a partially filled ciphertext
//! holding the whole free axis, in which case the schedule needs room for a
//! wrap-around replica (`2d - 1` block positions).

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("block size {b} must be a power of two dividing {d2} and {d3}")]
    BadBlock { b: usize, d2: usize, d3: usize },
    #[error("ring degree {n} must be a power of two")]
    BadDegree { n: usize },
    #[error("block payload of {need} coefficients cannot fit a ring of degree {n}")]
    Infeasible { need: usize, n: usize },
}

/// GEMM problem dimensions: Y (d3 x d1) = W (d3 x d2) * X (d2 x d1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GemmDims {
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
}

/// Convolution problem dimensions (stride 1, valid padding).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConvDims {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub k: usize,
    pub r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlanKind {
    Gemm,
    Conv,
}

/// A fixed rotation/tiling schedule with its predicted operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BsgsPlan {
    pub kind: PlanKind,
    pub b: usize,
    pub n: usize,
    /// Tile width along the free axis (columns for GEMM; for convolution the
    /// whole spatial plane, recorded as H*W).
    pub d1_tile: usize,
    /// Blocks per ciphertext.
    pub d: usize,
    pub baby: usize,
    pub giant: usize,
    /// Padded per-block coefficient length ℓ.
    pub block_len: usize,
    pub n_rot: u64,
    pub n_pmult: u64,
    pub n_ct_in: u64,
    pub n_ct_out: u64,
}

impl BsgsPlan {
    /// Block positions per ciphertext.
    pub fn positions(&self) -> usize {
        self.n / self.block_len
    }

    /// Whether every block position carries payload (no replica region).
    pub fn exact_fill(&self) -> bool {
        self.d == self.positions()
    }
}

fn next_pow2(x: usize) -> usize {
    x.next_power_of_two()
}

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

fn divisor_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=d).filter(move |b| d % b == 0).map(move |b| (b, d / b))
}

/// Lexicographic preference: fewest rotations, then fewest multiplications,
/// then smaller giant step, smaller baby step, larger block length, smaller d.
fn plan_key(p: &BsgsPlan) -> (u64, u64, usize, usize, usize, usize) {
    (p.n_rot, p.n_pmult, p.giant, p.baby, usize::MAX - p.block_len, p.d)
}

struct Tiling {
    block_len: usize,
    d1_tile: usize,
    d: usize,
}

fn candidates_for(
    kind: PlanKind,
    b: usize,
    n: usize,
    free_axis: usize,
    block_cols: usize,
    block_rows: usize,
    tilings: &[Tiling],
) -> Option<BsgsPlan> {
    let mut best: Option<BsgsPlan> = None;
    for t in tilings {
        let col_tiles = div_ceil(free_axis, t.d1_tile);
        let in_tiles = div_ceil(block_cols, t.d);
        let out_tiles = div_ceil(block_rows, t.d);
        let n_ct_in = (col_tiles * in_tiles) as u64;
        let n_ct_out = (col_tiles * out_tiles) as u64;
        let n_pmult = (col_tiles * in_tiles * out_tiles * t.d) as u64;
        for (baby, giant) in divisor_pairs(t.d) {
            let n_rot = n_ct_in * (baby as u64 - 1) + n_ct_out * (giant as u64 - 1);
            let plan = BsgsPlan {
                kind,
                b,
                n,
                d1_tile: t.d1_tile,
                d: t.d,
                baby,
                giant,
                block_len: t.block_len,
                n_rot,
                n_pmult,
                n_ct_in,
                n_ct_out,
            };
            if best.as_ref().is_none_or(|cur| plan_key(&plan) < plan_key(cur)) {
                best = Some(plan);
            }
        }
    }
    best
}

/// Largest block count a partially filled ciphertext can schedule: either all
/// positions are payload, or a full wrap-around replica must fit.
fn partial_d(want: usize, positions: usize) -> usize {
    if want == positions || 2 * want - 1 <= positions {
        want
    } else {
        want.min((positions + 1) / 2)
    }
}

/// Plan the rotation schedule for a block-circulant GEMM.
pub fn plan_bsgs_gemm(dims: GemmDims, b: usize, n: usize) -> Result<BsgsPlan, PlanError> {
    let GemmDims { d1, d2, d3 } = dims;
    if !b.is_power_of_two() || d2 % b != 0 || d3 % b != 0 || b == 0 {
        return Err(PlanError::BadBlock { b, d2, d3 });
    }
    if !n.is_power_of_two() {
        return Err(PlanError::BadDegree { n });
    }
    if next_pow2(b) > n {
        return Err(PlanError::Infeasible { need: b, n });
    }
    let (block_cols, block_rows) = (d2 / b, d3 / b);
    let min_ck = block_cols.min(block_rows);

    let mut tilings = Vec::new();
    // Exact-fill tilings: ℓ is the tight power-of-two padding of b*d1_tile
    // and d = n/ℓ blocks cover the ciphertext.
    let l_cap = next_pow2(d1 * b).min(n);
    let mut l = b;
    while l <= l_cap {
        let d = n / l;
        if d <= min_ck {
            tilings.push(Tiling { block_len: l, d1_tile: d1.min(l / b), d });
        }
        l *= 2;
    }
    if tilings.is_empty() {
        // Partial fill: the whole free axis in one tile.
        let l = next_pow2(d1 * b);
        if l > n {
            return Err(PlanError::Infeasible { need: d1 * b, n });
        }
        let d = partial_d(min_ck, n / l);
        tilings.push(Tiling { block_len: l, d1_tile: d1, d });
    }
    Ok(candidates_for(PlanKind::Gemm, b, n, d1, block_cols, block_rows, &tilings)
        .expect("at least one tiling candidate"))
}

/// Plan the rotation schedule for a block-circulant convolution.
pub fn plan_bsgs_conv(dims: ConvDims, b: usize, n: usize) -> Result<BsgsPlan, PlanError> {
    let ConvDims { h, w, c, k, r } = dims;
    if !b.is_power_of_two() || c % b != 0 || k % b != 0 || b == 0 {
        return Err(PlanError::BadBlock { b, d2: c, d3: k });
    }
    if !n.is_power_of_two() {
        return Err(PlanError::BadDegree { n });
    }
    assert!(r >= 1 && h >= r && w >= r, "kernel must fit inside the input");
    let l = next_pow2(h * w * b);
    if l > n {
        return Err(PlanError::Infeasible { need: h * w * b, n });
    }
    let (block_cols, block_rows) = (c / b, k / b);
    let min_ck = block_cols.min(block_rows);
    let positions = n / l;
    let d = if positions <= min_ck { positions } else { partial_d(min_ck, positions) };
    let tilings = [Tiling { block_len: l, d1_tile: h * w, d }];
    Ok(candidates_for(PlanKind::Conv, b, n, h * w, block_cols, block_rows, &tilings)
        .expect("at least one tiling candidate"))
}
