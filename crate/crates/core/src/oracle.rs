//! Independent reference implementations.
//!
//! Everything in this module is deliberately naive — schoolbook loops and
//! exhaustive scans with no shared code paths into the encoders, planners or
//! executors they are used to check.

use crate::bsgs::{BsgsPlan, ConvDims, GemmDims};
use crate::circulant::{BlockCirculantConvKernel, BlockCirculantMatrix};
use crate::ring::{add_mod, mul_mod, sub_mod};
use crate::tensor::{Mat, Ten3, Ten4};

/// O(ℓ²) wrap-around product mod (x^ℓ - 1, p).
pub fn cyclic_conv(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let l = a.len();
    assert_eq!(l, b.len());
    let mut out = vec![0u64; l];
    for i in 0..l {
        if a[i] == 0 {
            continue;
        }
        for j in 0..l {
            let k = (i + j) % l;
            out[k] = add_mod(out[k], mul_mod(a[i], b[j], p), p);
        }
    }
    out
}

/// O(n²) product mod (x^n + 1, p): sign flips on wrap.
pub fn negacyclic_conv(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let l = a.len();
    assert_eq!(l, b.len());
    let mut out = vec![0u64; l];
    for i in 0..l {
        if a[i] == 0 {
            continue;
        }
        for j in 0..l {
            let t = mul_mod(a[i], b[j], p);
            if i + j < l {
                out[i + j] = add_mod(out[i + j], t, p);
            } else {
                out[i + j - l] = sub_mod(out[i + j - l], t, p);
            }
        }
    }
    out
}

/// Dense GEMM mod p.
pub fn dense_gemm(w: &Mat<u64>, x: &Mat<u64>, p: u64) -> Mat<u64> {
    assert_eq!(w.cols, x.rows);
    let mut y = Mat::zeros(w.rows, x.cols);
    for r in 0..w.rows {
        for c in 0..x.cols {
            let mut acc = 0u64;
            for k in 0..w.cols {
                acc = add_mod(acc, mul_mod(*w.at(r, k), *x.at(k, c), p), p);
            }
            *y.at_mut(r, c) = acc;
        }
    }
    y
}

/// Dense GEMM of an expanded block-circulant matrix.
pub fn dense_circulant_gemm(w: &BlockCirculantMatrix, x: &Mat<u64>, p: u64) -> Mat<u64> {
    dense_gemm(&w.to_dense(), x, p)
}

/// Direct (valid, stride 1) convolution mod p.
pub fn dense_conv(w: &Ten4<u64>, x: &Ten3<u64>, p: u64) -> Ten3<u64> {
    assert_eq!(w.c, x.c);
    let (ho, wo) = (x.h - w.r + 1, x.w - w.s + 1);
    let mut y = Ten3::zeros(w.k, ho, wo);
    for k in 0..w.k {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0u64;
                for c in 0..x.c {
                    for ry in 0..w.r {
                        for rx in 0..w.s {
                            acc = add_mod(
                                acc,
                                mul_mod(*w.at(k, c, ry, rx), *x.at(c, oy + ry, ox + rx), p),
                                p,
                            );
                        }
                    }
                }
                *y.at_mut(k, oy, ox) = acc;
            }
        }
    }
    y
}

/// Direct convolution of an expanded block-circulant kernel.
pub fn dense_circulant_conv(w: &BlockCirculantConvKernel, x: &Ten3<u64>, p: u64) -> Ten3<u64> {
    dense_conv(&w.to_dense(), x, p)
}

/// Real-valued dense convolution (for fusion checks).
pub fn dense_conv_f64(w: &Ten4<f64>, x: &Ten3<f64>) -> Ten3<f64> {
    assert_eq!(w.c, x.c);
    let (ho, wo) = (x.h - w.r + 1, x.w - w.s + 1);
    let mut y = Ten3::zeros(w.k, ho, wo);
    for k in 0..w.k {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0;
                for c in 0..x.c {
                    for ry in 0..w.r {
                        for rx in 0..w.s {
                            acc += w.at(k, c, ry, rx) * x.at(c, oy + ry, ox + rx);
                        }
                    }
                }
                *y.at_mut(k, oy, ox) = acc;
            }
        }
    }
    y
}

/// Minimum rotation count over the full feasible tiling space, enumerated
/// from scratch; used to check planner optimality. Returns `(rot, pmult)` of
/// the lexicographically best point under the planner's own preference.
pub fn exhaustive_min_rotations(
    free_axis: usize,
    block_cols: usize,
    block_rows: usize,
    b: usize,
    n: usize,
    conv: bool,
) -> Option<(u64, u64)> {
    let min_ck = block_cols.min(block_rows);
    let mut tilings: Vec<(usize, usize, usize)> = Vec::new(); // (len, tile, d)
    if conv {
        let l = (free_axis * b).next_power_of_two();
        if l > n {
            return None;
        }
        let positions = n / l;
        if positions <= min_ck {
            tilings.push((l, free_axis, positions));
        } else {
            let d = if min_ck == positions || 2 * min_ck - 1 <= positions {
                min_ck
            } else {
                min_ck.min((positions + 1) / 2)
            };
            tilings.push((l, free_axis, d));
        }
    } else {
        let cap = (free_axis * b).next_power_of_two().min(n);
        let mut l = b;
        while l <= cap {
            let d = n / l;
            if d <= min_ck {
                tilings.push((l, free_axis.min(l / b), d));
            }
            l *= 2;
        }
        if tilings.is_empty() {
            let l = (free_axis * b).next_power_of_two();
            if l > n {
                return None;
            }
            let positions = n / l;
            let d = if min_ck == positions || 2 * min_ck - 1 <= positions {
                min_ck
            } else {
                min_ck.min((positions + 1) / 2)
            };
            tilings.push((l, free_axis, d));
        }
    }
    let mut best: Option<(u64, u64)> = None;
    for (_, tile, d) in tilings {
        let col_tiles = free_axis.div_ceil(tile);
        let in_ct = (col_tiles * block_cols.div_ceil(d)) as u64;
        let out_ct = (col_tiles * block_rows.div_ceil(d)) as u64;
        let pm = in_ct * block_rows.div_ceil(d) as u64 * d as u64;
        for baby in 1..=d {
            if d % baby != 0 {
                continue;
            }
            let giant = d / baby;
            let rot = in_ct * (baby as u64 - 1) + out_ct * (giant as u64 - 1);
            if best.is_none() || (rot, pm) < best.unwrap() {
                best = Some((rot, pm));
            }
        }
    }
    best
}

/// Convenience wrappers matching the planner signatures.
pub fn exhaustive_gemm_min(dims: GemmDims, b: usize, n: usize) -> Option<(u64, u64)> {
    exhaustive_min_rotations(dims.d1, dims.d2 / b, dims.d3 / b, b, n, false)
}

pub fn exhaustive_conv_min(dims: ConvDims, b: usize, n: usize) -> Option<(u64, u64)> {
    exhaustive_min_rotations(dims.h * dims.w, dims.c / b, dims.k / b, b, n, true)
}

/// Check that a plan matches the enumerated lexicographic optimum exactly.
pub fn plan_is_optimal(plan: &BsgsPlan, oracle: Option<(u64, u64)>) -> bool {
    oracle == Some((plan.n_rot, plan.n_pmult))
}

/// Exhaustive multiple-choice knapsack: minimise total sensitivity subject to
/// a latency budget. Returns the optimal objective, or None when infeasible.
pub fn exhaustive_knapsack(omega: &[Vec<f64>], lat: &[Vec<f64>], limit: f64) -> Option<f64> {
    fn rec(
        omega: &[Vec<f64>],
        lat: &[Vec<f64>],
        layer: usize,
        used: f64,
        acc: f64,
        limit: f64,
        best: &mut Option<f64>,
    ) {
        if layer == omega.len() {
            if used <= limit && best.map_or(true, |b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        for j in 0..omega[layer].len() {
            let u = used + lat[layer][j];
            if u <= limit {
                rec(omega, lat, layer + 1, u, acc + omega[layer][j], limit, best);
            }
        }
    }
    let mut best = None;
    rec(omega, lat, 0, 0.0, 0.0, limit, &mut best);
    best
}
