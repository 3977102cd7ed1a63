//! Unitary DFT primitives, circulant shifts and Zadoff-Chu sequences.
//!
//! Every transform in the crate uses the same convention: the forward kernel
//! is `exp(-j 2 pi k n / L) / sqrt(L)` and the inverse is its conjugate.
//! Lengths are arbitrary; non power-of-two sizes go through the mixed-radix
//! and Bluestein/Rader paths of `rustfft`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("transform length must be at least 1")]
    EmptyInput,
    #[error("Zadoff-Chu root {root} is not coprime with length {length}")]
    RootNotCoprime { length: usize, root: u64 },
    #[error("grid dimensions must be at least 1x1, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("buffer of length {got} does not fit a {rows}x{cols} grid")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn from_inverse(inverse: bool) -> Self {
        if inverse {
            Direction::Inverse
        } else {
            Direction::Forward
        }
    }
}

/// Dense `rows x cols` complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self, SpectralError> {
        if rows == 0 || cols == 0 {
            return Err(SpectralError::EmptyGrid { rows, cols });
        }
        Ok(Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> C64,
    ) -> Result<Self, SpectralError> {
        let mut grid = Self::zeros(rows, cols)?;
        for r in 0..rows {
            for c in 0..cols {
                grid.data[r * cols + c] = f(r, c);
            }
        }
        Ok(grid)
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, SpectralError> {
        if rows == 0 || cols == 0 {
            return Err(SpectralError::EmptyGrid { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(SpectralError::ShapeMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, row: usize) -> &[C64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Coordinates `(row, col)` of entries with magnitude above `tol`.
    pub fn support(&self, tol: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c).norm() > tol {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Largest entrywise absolute difference; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for ComplexGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexGrid")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish_non_exhaustive()
    }
}

/// A planned unitary DFT of a fixed length. Cheap to clone.
#[derive(Clone)]
pub struct DftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl DftPlan {
    pub fn new(len: usize) -> Result<Self, SpectralError> {
        if len == 0 {
            return Err(SpectralError::EmptyInput);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            scale: 1.0 / (len as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `buf` in place. `buf.len()` must equal the plan length.
    pub fn process(&self, buf: &mut [C64], direction: Direction) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match direction {
            Direction::Forward => self.forward.process(buf),
            Direction::Inverse => self.inverse.process(buf),
        }
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }

    pub fn apply(&self, v: &[C64], direction: Direction) -> Vec<C64> {
        let mut buf = v.to_vec();
        self.process(&mut buf, direction);
        buf
    }
}

/// Planned 2D transform `U_M G U_N` for `M x N` grids.
#[derive(Clone)]
pub struct Dft2dPlan {
    rows: DftPlan,
    cols: DftPlan,
}

impl Dft2dPlan {
    pub fn new(rows: usize, cols: usize) -> Result<Self, SpectralError> {
        if rows == 0 || cols == 0 {
            return Err(SpectralError::EmptyGrid { rows, cols });
        }
        Ok(Self {
            rows: DftPlan::new(rows)?,
            cols: DftPlan::new(cols)?,
        })
    }

    pub fn apply(&self, grid: &ComplexGrid, direction: Direction) -> ComplexGrid {
        let (m, n) = (grid.rows, grid.cols);
        assert_eq!(
            (m, n),
            (self.rows.len(), self.cols.len()),
            "grid shape does not match plan"
        );
        let mut out = grid.clone();
        // G U_N: transform each row.
        for r in 0..m {
            self.cols.process(&mut out.data[r * n..(r + 1) * n], direction);
        }
        // U_M (.): transform each column.
        let mut col = vec![C64::new(0.0, 0.0); m];
        for c in 0..n {
            for r in 0..m {
                col[r] = out.data[r * n + c];
            }
            self.rows.process(&mut col, direction);
            for r in 0..m {
                out.data[r * n + c] = col[r];
            }
        }
        out
    }
}

/// `U_L v`, or `U_L^* v` for [`Direction::Inverse`].
pub fn unitary_dft(v: &[C64], direction: Direction) -> Result<Vec<C64>, SpectralError> {
    Ok(DftPlan::new(v.len())?.apply(v, direction))
}

/// `U_M G U_N`, or `U_M^* G U_N^*` for [`Direction::Inverse`].
pub fn dft2d(grid: &ComplexGrid, direction: Direction) -> ComplexGrid {
    Dft2dPlan::new(grid.rows, grid.cols)
        .expect("grid invariants guarantee non-empty dimensions")
        .apply(grid, direction)
}

/// Entry `(k, n)` of the unitary DFT matrix of size `len`.
#[inline]
pub fn dft_entry(len: usize, k: usize, n: usize) -> C64 {
    // Reduce the product exactly before converting to a phase.
    let r = ((k as u128 * n as u128) % len as u128) as f64;
    C64::from_polar(1.0 / (len as f64).sqrt(), -2.0 * PI * r / len as f64)
}

/// The full `len x len` unitary DFT matrix.
pub fn dft_matrix(len: usize) -> Result<ComplexGrid, SpectralError> {
    if len == 0 {
        return Err(SpectralError::EmptyInput);
    }
    ComplexGrid::from_fn(len, len, |k, n| dft_entry(len, k, n))
}

/// `J_shift v`: `out[i] = v[(i + shift) mod len]`.
pub fn circulant_shift(v: &[C64], shift: i64) -> Vec<C64> {
    let len = v.len();
    if len == 0 {
        return Vec::new();
    }
    let s = shift.rem_euclid(len as i64) as usize;
    (0..len).map(|i| v[(i + s) % len]).collect()
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZadoffChuSequence {
    root: u64,
    entries: Vec<C64>,
}

impl ZadoffChuSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }
}

/// Zadoff-Chu sequence of length `length` and root `root`.
///
/// Odd lengths use `exp(-j pi u m (m+1) / M)`, even lengths `exp(-j pi u m^2 / M)`.
pub fn zadoff_chu(length: usize, root: u64) -> Result<ZadoffChuSequence, SpectralError> {
    if length == 0 {
        return Err(SpectralError::EmptyInput);
    }
    if gcd(root, length as u64) != 1 {
        return Err(SpectralError::RootNotCoprime { length, root });
    }
    let big_m = length as u128;
    let period = 2 * big_m;
    let entries = (0..length as u128)
        .map(|m| {
            let quad = if length % 2 == 1 { m * (m + 1) } else { m * m };
            // The phase is periodic in u * quad with period 2M.
            let r = (root as u128 % period) * (quad % period) % period;
            C64::from_polar(1.0, -PI * r as f64 / length as f64)
        })
        .collect();
    Ok(ZadoffChuSequence { root, entries })
}

pub fn l2_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn dft_of_first_basis_vector_is_constant() {
        let v = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let out = unitary_dft(&v, Direction::Forward).unwrap();
        assert!(close(&out, &[c(0.5, 0.0); 4], 1e-15));
    }

    #[test]
    fn dft_of_constant_is_impulse() {
        let out = unitary_dft(&[c(1.0, 0.0); 4], Direction::Forward).unwrap();
        assert!(close(
            &out,
            &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            1e-15
        ));
    }

    #[test]
    fn empty_dft_rejected() {
        assert_eq!(
            unitary_dft(&[], Direction::Forward),
            Err(SpectralError::EmptyInput)
        );
    }

    #[test]
    fn forward_kernel_sign() {
        // U_4 e_1 = [1, -j, -1, j] / 2
        let v = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let out = unitary_dft(&v, Direction::Forward).unwrap();
        assert!(close(
            &out,
            &[c(0.5, 0.0), c(0.0, -0.5), c(-0.5, 0.0), c(0.0, 0.5)],
            1e-15
        ));
    }

    #[test]
    fn dft2d_of_corner_impulse() {
        let mut g = ComplexGrid::zeros(2, 2).unwrap();
        g.set(0, 0, c(1.0, 0.0));
        let out = dft2d(&g, Direction::Forward);
        assert!(out.as_slice().iter().all(|z| (z - c(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn circulant_shift_examples() {
        let v = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        assert_eq!(circulant_shift(&v, 1), vec![v[1], v[2], v[0]]);
        assert_eq!(circulant_shift(&v, 0), v.to_vec());
        assert_eq!(circulant_shift(&v, 3), v.to_vec());
        assert_eq!(circulant_shift(&v, -1), vec![v[2], v[0], v[1]]);
    }

    #[test]
    fn zadoff_chu_formula_branches() {
        let zc = zadoff_chu(31, 1).unwrap();
        let expected = C64::from_polar(1.0, -PI * 6.0 / 31.0);
        assert!((zc.entries()[2] - expected).norm() < 1e-14);

        let zc = zadoff_chu(4, 1).unwrap();
        assert!((zc.entries()[2] - c(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zadoff_chu_rejects_common_factor() {
        assert_eq!(
            zadoff_chu(12, 3),
            Err(SpectralError::RootNotCoprime { length: 12, root: 3 })
        );
    }

    #[test]
    fn zadoff_chu_dft_has_unit_magnitude() {
        for &(len, root) in &[(31, 1), (31, 7), (257, 1), (16, 3), (25, 2)] {
            let zc = zadoff_chu(len, root).unwrap();
            assert!(zc.entries().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let spec = unitary_dft(zc.entries(), Direction::Forward).unwrap();
            for z in spec {
                assert!((z.norm() - 1.0).abs() < 1e-9, "len={len} root={root}");
            }
        }
    }

    #[test]
    fn primes() {
        let p: Vec<usize> = (0..32).filter(|&n| is_prime(n)).collect();
        assert_eq!(p, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31]);
        assert!(is_prime(257));
    }

    #[test]
    fn grid_shape_checks() {
        assert!(ComplexGrid::zeros(0, 3).is_err());
        assert!(ComplexGrid::from_row_major(2, 2, vec![c(0.0, 0.0); 3]).is_err());
    }
}
