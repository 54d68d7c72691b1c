//! Structure-preserving convolution / batch-norm fusion.
//!
//! Folding a batch-norm into the preceding convolution scales each output
//! channel, which in general breaks the circulant structure of a block. The
//! fix is to average the batch-norm parameters over each b-sized channel
//! group first; the per-block scale is then constant and the fused kernel is
//! block-circulant again. Fusion is exact precisely when the original
//! parameters were already block-constant; otherwise it is the group-mean
//! approximation and [`fusion_gap`] reports the deviation.
//!
//! Everything here operates on real values; quantisation to the plaintext
//! field is a separate explicit step.

use thiserror::Error;

use crate::circulant::BlockCirculantConvKernel;
use crate::ring::PrimeContext;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("block size {b} does not divide the channel count {c}")]
    BadBlock { b: usize, c: usize },
    #[error("parameter vectors must all have length {expected}")]
    ParamLength { expected: usize },
    #[error("kernel block size {kernel} does not match the requested {requested}")]
    BlockMismatch { kernel: usize, requested: usize },
}

/// Batch-norm parameters over C channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BnParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
}

impl BnParams {
    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self) -> Result<(), FusionError> {
        let c = self.gamma.len();
        if self.beta.len() != c || self.running_mean.len() != c || self.running_var.len() != c {
            return Err(FusionError::ParamLength { expected: c });
        }
        assert!(
            self.running_var.iter().all(|&v| v + self.eps > 0.0),
            "variance plus eps must stay positive"
        );
        Ok(())
    }
}

/// Real-valued block-circulant conv kernel (generator layout identical to
/// the residue version).
#[derive(Debug, Clone, PartialEq)]
pub struct RealConvKernel {
    pub k_out: usize,
    pub c_in: usize,
    pub r: usize,
    pub b: usize,
    /// (K/b) x (C/b) grid of b*R*R generator slices, row-major.
    pub generators: Vec<f64>,
}

impl RealConvKernel {
    pub fn generator(&self, bi: usize, bj: usize) -> &[f64] {
        let sz = self.b * self.r * self.r;
        let idx = (bi * (self.c_in / self.b) + bj) * sz;
        &self.generators[idx..idx + sz]
    }

    /// Dense tap value via the circulant index rule.
    pub fn entry(&self, k: usize, c: usize, y: usize, x: usize) -> f64 {
        let b = self.b;
        let gen = self.generator(k / b, c / b);
        let i = (k % b + b - c % b) % b;
        gen[(i * self.r + y) * self.r + x]
    }

    /// Round into the plaintext field with a fixed-point scale.
    pub fn quantize(&self, scale: f64, ctx: &PrimeContext) -> BlockCirculantConvKernel {
        let gens = self
            .generators
            .iter()
            .map(|&v| ctx.reduce_i64((v * scale).round() as i64))
            .collect();
        BlockCirculantConvKernel::new(self.k_out, self.c_in, self.r, self.b, gens)
            .expect("layout invariants carried over")
    }
}

/// Quantise a real vector with a fixed-point scale.
pub fn quantize_vec(v: &[f64], scale: f64, ctx: &PrimeContext) -> Vec<u64> {
    v.iter().map(|&x| ctx.reduce_i64((x * scale).round() as i64)).collect()
}

/// Replace every b-sized group of each parameter vector by its group mean.
pub fn group_average_bn(params: &BnParams, b: usize) -> Result<BnParams, FusionError> {
    params.validate()?;
    let c = params.channels();
    if b == 0 || c % b != 0 {
        return Err(FusionError::BadBlock { b, c });
    }
    let avg = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; c];
        for g in 0..c / b {
            let mean = v[g * b..(g + 1) * b].iter().sum::<f64>() / b as f64;
            out[g * b..(g + 1) * b].fill(mean);
        }
        out
    };
    Ok(BnParams {
        gamma: avg(&params.gamma),
        beta: avg(&params.beta),
        running_mean: avg(&params.running_mean),
        running_var: avg(&params.running_var),
        eps: params.eps,
    })
}

/// A fused convolution: scaled kernel plus per-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedConvBn {
    pub kernel: RealConvKernel,
    pub bias: Vec<f64>,
}

/// Fold a batch-norm (group-averaged first) into a block-circulant kernel.
/// The result satisfies the circulant index rule again because the averaged
/// scale is constant within each block row.
pub fn fuse_convbn(
    kernel: &RealConvKernel,
    params: &BnParams,
    b: usize,
) -> Result<FusedConvBn, FusionError> {
    if kernel.b != b {
        return Err(FusionError::BlockMismatch { kernel: kernel.b, requested: b });
    }
    if params.channels() != kernel.k_out {
        return Err(FusionError::ParamLength { expected: kernel.k_out });
    }
    let avg = group_average_bn(params, b)?;
    let scale: Vec<f64> = avg
        .gamma
        .iter()
        .zip(&avg.running_var)
        .map(|(&g, &v)| g / (v + avg.eps).sqrt())
        .collect();
    let bias: Vec<f64> = (0..kernel.k_out)
        .map(|k| avg.beta[k] - scale[k] * avg.running_mean[k])
        .collect();

    let block_cols = kernel.c_in / b;
    let sz = b * kernel.r * kernel.r;
    let mut generators = kernel.generators.clone();
    for bi in 0..kernel.k_out / b {
        // scale is block-constant, so one factor per block row
        let s = scale[bi * b];
        for bj in 0..block_cols {
            let base = (bi * block_cols + bj) * sz;
            // generator index i corresponds to output channel bi*b + i at
            // column 0; the same scale applies across the whole block row.
            for (off, gv) in generators[base..base + sz].iter_mut().enumerate() {
                let i = off / (kernel.r * kernel.r);
                let _ = i;
                *gv *= s;
            }
        }
    }
    Ok(FusedConvBn {
        kernel: RealConvKernel {
            k_out: kernel.k_out,
            c_in: kernel.c_in,
            r: kernel.r,
            b,
            generators,
        },
        bias,
    })
}

/// Max-abs deviation between the fused network and bn(conv(.)) on the given
/// activation, reported as a diagnostic for non-block-constant parameters.
pub fn fusion_gap(
    kernel: &RealConvKernel,
    params: &BnParams,
    x: &crate::tensor::Ten3<f64>,
) -> Result<f64, FusionError> {
    use crate::oracle::dense_conv_f64;
    use crate::tensor::Ten4;

    let fused = fuse_convbn(kernel, params, kernel.b)?;
    let dense = |rk: &RealConvKernel| -> Ten4<f64> {
        let mut t = Ten4::zeros(rk.k_out, rk.c_in, rk.r, rk.r);
        for k in 0..rk.k_out {
            for c in 0..rk.c_in {
                for y in 0..rk.r {
                    for xx in 0..rk.r {
                        *t.at_mut(k, c, y, xx) = rk.entry(k, c, y, xx);
                    }
                }
            }
        }
        t
    };
    let conv_out = dense_conv_f64(&dense(kernel), x);
    let fused_out = dense_conv_f64(&dense(&fused.kernel), x);
    let mut gap: f64 = 0.0;
    for k in 0..conv_out.c {
        let s = params.gamma[k] / (params.running_var[k] + params.eps).sqrt();
        for y in 0..conv_out.h {
            for xx in 0..conv_out.w {
                let bn = s * (conv_out.at(k, y, xx) - params.running_mean[k]) + params.beta[k];
                let f = fused_out.at(k, y, xx) + fused.bias[k];
                gap = gap.max((bn - f).abs());
            }
        }
    }
    Ok(gap)
}
