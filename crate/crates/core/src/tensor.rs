//! Minimal dense containers used throughout the crate.
//!
//! Nothing here is clever: row-major storage with checked constructors, used
//! for oracle code, protocol payloads and snapshot tensors alike.

/// Row-major 2-d matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Clone + Default> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::default(); rows * cols] }
    }
}

impl<T> Mat<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Channel-major 3-d tensor (channels x height x width).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ten3<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Clone + Default> Ten3<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, data: vec![T::default(); c * h * w] }
    }
}

impl<T> Ten3<T> {
    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data length mismatch");
        Self { c, h, w, data }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> &T {
        &self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[(c * self.h + y) * self.w + x]
    }
}

/// 4-d tensor for dense convolution kernels (out x in x r x r).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ten4<T> {
    pub k: usize,
    pub c: usize,
    pub r: usize,
    pub s: usize,
    pub data: Vec<T>,
}

impl<T: Clone + Default> Ten4<T> {
    pub fn zeros(k: usize, c: usize, r: usize, s: usize) -> Self {
        Self { k, c, r, s, data: vec![T::default(); k * c * r * s] }
    }
}

impl<T> Ten4<T> {
    pub fn from_vec(k: usize, c: usize, r: usize, s: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), k * c * r * s, "kernel data length mismatch");
        Self { k, c, r, s, data }
    }

    #[inline]
    pub fn at(&self, k: usize, c: usize, r: usize, s: usize) -> &T {
        &self.data[((k * self.c + c) * self.r + r) * self.s + s]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize, c: usize, r: usize, s: usize) -> &mut T {
        &mut self.data[((k * self.c + c) * self.r + r) * self.s + s]
    }
}
