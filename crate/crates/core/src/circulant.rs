//! Block-circulant weight containers.
//!
//! A block-circulant matrix is partitioned into b x b blocks, each fully
//! determined by its first column (the generator): within a block,
//! `W[i, j] = gen[(i - j) mod b]`, equivalently `W[i, j] = W[0, (b - i + j) mod b]`.
//! Convolution kernels are block-circulant over the (output, input) channel
//! pair with one b x R x R generator slice per block.

use thiserror::Error;

use crate::tensor::{Mat, Ten4};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CirculantError {
    #[error("block size {b} must be a power of two")]
    BlockNotPowerOfTwo { b: usize },
    #[error("block size {b} does not divide dimension {dim}")]
    BlockDoesNotDivide { b: usize, dim: usize },
}

fn check_block(b: usize, dims: &[usize]) -> Result<(), CirculantError> {
    if !b.is_power_of_two() {
        return Err(CirculantError::BlockNotPowerOfTwo { b });
    }
    for &dim in dims {
        if dim % b != 0 {
            return Err(CirculantError::BlockDoesNotDivide { b, dim });
        }
    }
    Ok(())
}

/// A d3 x d2 block-circulant matrix with one length-b generator column per
/// b x b block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCirculantMatrix {
    pub d3: usize,
    pub d2: usize,
    pub b: usize,
    /// (d3/b) x (d2/b) grid of length-b generators, row-major.
    generators: Vec<u64>,
}

impl BlockCirculantMatrix {
    pub fn new(d3: usize, d2: usize, b: usize, generators: Vec<u64>) -> Result<Self, CirculantError> {
        check_block(b, &[d2, d3])?;
        assert_eq!(generators.len(), (d3 / b) * (d2 / b) * b, "generator count mismatch");
        Ok(Self { d3, d2, b, generators })
    }

    /// Compress a dense matrix that is already block-circulant; entries that
    /// break the structure are simply ignored (the generator column wins).
    pub fn from_dense(w: &Mat<u64>, b: usize) -> Result<Self, CirculantError> {
        check_block(b, &[w.cols, w.rows])?;
        let (d3, d2) = (w.rows, w.cols);
        let mut generators = Vec::with_capacity((d3 / b) * (d2 / b) * b);
        for bi in 0..d3 / b {
            for bj in 0..d2 / b {
                for i in 0..b {
                    generators.push(*w.at(bi * b + i, bj * b));
                }
            }
        }
        Ok(Self { d3, d2, b, generators })
    }

    pub fn block_rows(&self) -> usize {
        self.d3 / self.b
    }

    pub fn block_cols(&self) -> usize {
        self.d2 / self.b
    }

    /// Generator column of block (bi, bj).
    pub fn generator(&self, bi: usize, bj: usize) -> &[u64] {
        let idx = (bi * self.block_cols() + bj) * self.b;
        &self.generators[idx..idx + self.b]
    }

    /// Entry of the reconstructed dense matrix.
    pub fn entry(&self, row: usize, col: usize) -> u64 {
        let b = self.b;
        let gen = self.generator(row / b, col / b);
        gen[(row % b + b - col % b) % b]
    }

    /// Expand to the dense d3 x d2 matrix.
    pub fn to_dense(&self) -> Mat<u64> {
        let mut m = Mat::zeros(self.d3, self.d2);
        for r in 0..self.d3 {
            for c in 0..self.d2 {
                *m.at_mut(r, c) = self.entry(r, c);
            }
        }
        m
    }
}

/// A K x C x R x R convolution kernel, block-circulant over (K, C) with one
/// b x R x R generator slice per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCirculantConvKernel {
    pub k_out: usize,
    pub c_in: usize,
    pub r: usize,
    pub b: usize,
    /// (K/b) x (C/b) grid of b*R*R generator slices, row-major.
    generators: Vec<u64>,
}

impl BlockCirculantConvKernel {
    pub fn new(
        k_out: usize,
        c_in: usize,
        r: usize,
        b: usize,
        generators: Vec<u64>,
    ) -> Result<Self, CirculantError> {
        check_block(b, &[c_in, k_out])?;
        assert_eq!(
            generators.len(),
            (k_out / b) * (c_in / b) * b * r * r,
            "generator count mismatch"
        );
        Ok(Self { k_out, c_in, r, b, generators })
    }

    pub fn from_dense(w: &Ten4<u64>, b: usize) -> Result<Self, CirculantError> {
        check_block(b, &[w.c, w.k])?;
        let (k_out, c_in, r) = (w.k, w.c, w.r);
        let mut generators = Vec::with_capacity((k_out / b) * (c_in / b) * b * r * r);
        for bi in 0..k_out / b {
            for bj in 0..c_in / b {
                for i in 0..b {
                    for y in 0..r {
                        for x in 0..r {
                            generators.push(*w.at(bi * b + i, bj * b, y, x));
                        }
                    }
                }
            }
        }
        Ok(Self { k_out, c_in, r, b, generators })
    }

    pub fn block_rows(&self) -> usize {
        self.k_out / self.b
    }

    pub fn block_cols(&self) -> usize {
        self.c_in / self.b
    }

    /// Generator slice (b x R x R, row-major) of block (bi, bj).
    pub fn generator(&self, bi: usize, bj: usize) -> &[u64] {
        let sz = self.b * self.r * self.r;
        let idx = (bi * self.block_cols() + bj) * sz;
        &self.generators[idx..idx + sz]
    }

    /// Tap (y, x) of the dense kernel entry (k, c).
    pub fn entry(&self, k: usize, c: usize, y: usize, x: usize) -> u64 {
        let b = self.b;
        let gen = self.generator(k / b, c / b);
        let i = (k % b + b - c % b) % b;
        gen[(i * self.r + y) * self.r + x]
    }

    pub fn to_dense(&self) -> Ten4<u64> {
        let mut t = Ten4::zeros(self.k_out, self.c_in, self.r, self.r);
        for k in 0..self.k_out {
            for c in 0..self.c_in {
                for y in 0..self.r {
                    for x in 0..self.r {
                        *t.at_mut(k, c, y, x) = self.entry(k, c, y, x);
                    }
                }
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_reconstruction_rule() {
        // gen = [1, 2] gives the circulant [[1, 2], [2, 1]].
        let m = BlockCirculantMatrix::new(2, 2, 2, vec![1, 2]).unwrap();
        let d = m.to_dense();
        assert_eq!(d.data, vec![1, 2, 2, 1]);
        // index rule W[i, j] = W[0, (b - i + j) mod b] holds on a 4x4 block
        let m = BlockCirculantMatrix::new(4, 4, 4, vec![5, 6, 7, 8]).unwrap();
        let d = m.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(*d.at(i, j), *d.at(0, (4 - i + j) % 4));
            }
        }
    }

    #[test]
    fn dense_round_trip() {
        let m = BlockCirculantMatrix::new(4, 6, 2, (1..=13).cycle().take(12).collect()).unwrap();
        let dense = m.to_dense();
        let back = BlockCirculantMatrix::from_dense(&dense, 2).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn conv_kernel_index_rule() {
        let gens: Vec<u64> = (1..=18).collect(); // one 2x3x3 block
        let k = BlockCirculantConvKernel::new(2, 2, 3, 2, gens).unwrap();
        let d = k.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                for y in 0..3 {
                    for x in 0..3 {
                        assert_eq!(*d.at(i, j, y, x), *d.at(0, (2 - i + j) % 2, y, x));
                    }
                }
            }
        }
        let back = BlockCirculantConvKernel::from_dense(&d, 2).unwrap();
        assert_eq!(k, back);
    }

    #[test]
    fn divisibility_enforced() {
        assert_eq!(
            BlockCirculantMatrix::new(4, 6, 4, vec![]).unwrap_err(),
            CirculantError::BlockDoesNotDivide { b: 4, dim: 6 }
        );
        assert_eq!(
            BlockCirculantMatrix::new(6, 6, 3, vec![]).unwrap_err(),
            CirculantError::BlockNotPowerOfTwo { b: 3 }
        );
    }
}
