//! Compressed sparse row matrices and the sparse direct solver.
//!
//! Matrices are assembled from triplets; duplicates are summed in insertion
//! order, so assembly is bitwise reproducible. Factorizations are delegated
//! to faer's sparse LU. The symbolic analysis is cached and reused as long as
//! the sparsity pattern does not change, which is the case for every Newton
//! iteration of a run.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::{LuError, SupernodalThreshold};
use faer::sparse::{Argsort, FaerError, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Par};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(capacity),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(self) -> SparseMatrix {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        // stable: equal (row, col) keep insertion order
        order.sort_by_key(|&i| (self.entries[i].0, self.entries[i].1));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(order.len());
        let mut values: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<(usize, usize)> = None;
        for i in order {
            let (r, c, v) = self.entries[i];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha · A x`
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi += alpha * s;
        }
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// `alpha · A + beta · B` over the union of both patterns.
    pub fn add(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (mut a, ae) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (mut b, be) = (other.row_ptr[i], other.row_ptr[i + 1]);
            while a < ae || b < be {
                let ca = if a < ae { self.col_idx[a] } else { usize::MAX };
                let cb = if b < be { other.col_idx[b] } else { usize::MAX };
                if ca == cb {
                    col_idx.push(ca);
                    values.push(alpha * self.values[a] + beta * other.values[b]);
                    a += 1;
                    b += 1;
                } else if ca < cb {
                    col_idx.push(ca);
                    values.push(alpha * self.values[a]);
                    a += 1;
                } else {
                    col_idx.push(cb);
                    values.push(beta * other.values[b]);
                    b += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `A · diag(d) · B`, or `A · B` when `d` is `None`.
    pub fn mul_scaled(&self, d: Option<&[f64]>, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            cols.clear();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let k = self.col_idx[p];
                let a = self.values[p] * d.map_or(1.0, |d| d[k]);
                for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                    let j = other.col_idx[q];
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * other.values[q];
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `[[s00 A00, s01 A01], [s10 A10, s11 A11]]` for square blocks of equal size.
    pub fn block2x2(blocks: [[(&SparseMatrix, f64); 2]; 2]) -> SparseMatrix {
        let n = blocks[0][0].0.nrows;
        for row in &blocks {
            for (b, _) in row {
                assert_eq!((b.nrows, b.ncols), (n, n));
            }
        }
        let mut row_ptr = Vec::with_capacity(2 * n + 1);
        let cap: usize = blocks.iter().flatten().map(|(b, _)| b.nnz()).sum();
        let mut col_idx = Vec::with_capacity(cap);
        let mut values = Vec::with_capacity(cap);
        row_ptr.push(0);
        for (bi, row) in blocks.iter().enumerate() {
            let _ = bi;
            for i in 0..n {
                for (bj, (b, s)) in row.iter().enumerate() {
                    for p in b.row_ptr[i]..b.row_ptr[i + 1] {
                        col_idx.push(bj * n + b.col_idx[p]);
                        values.push(s * b.values[p]);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        SparseMatrix {
            nrows: 2 * n,
            ncols: 2 * n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

struct Analysis {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    lu: SymbolicLu<usize>,
}

/// Factorization variant used by [`DirectSolver`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LuVariant {
    #[default]
    Auto,
    Simplicial,
    Supernodal,
}

/// Sparse LU solver that reuses the symbolic factorization across matrices
/// sharing one pattern.
#[derive(Default)]
pub struct DirectSolver {
    variant: LuVariant,
    analysis: Option<Analysis>,
    numeric: NumericLu<usize, f64>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("variant", &self.variant)
            .field("analyzed", &self.analysis.is_some())
            .finish()
    }
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_variant(variant: LuVariant) -> Self {
        DirectSolver {
            variant,
            ..Self::default()
        }
    }

    fn analyze(&self, a: &SparseMatrix) -> Result<Analysis> {
        let mut pairs = Vec::with_capacity(a.nnz());
        for i in 0..a.nrows {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                pairs.push(Pair {
                    row: i,
                    col: a.col_idx[p],
                });
            }
        }
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(a.nrows, a.ncols, &pairs)
            .map_err(|e| Error::LinearSolve(format!("pattern: {e:?}")))?;
        let params = LuSymbolicParams {
            supernodal_flop_ratio_threshold: match self.variant {
                LuVariant::Auto => SupernodalThreshold::AUTO,
                LuVariant::Simplicial => SupernodalThreshold::FORCE_SIMPLICIAL,
                LuVariant::Supernodal => SupernodalThreshold::FORCE_SUPERNODAL,
            },
            ..Default::default()
        };
        let lu = factorize_symbolic_lu(symbolic.as_ref(), params).map_err(|e| Error::LinearSolve(format!("symbolic LU: {e:?}")))?;
        Ok(Analysis {
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
            symbolic,
            argsort,
            lu,
        })
    }

    /// Solves `A x = rhs`.
    pub fn solve(&mut self, a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        if a.nrows != a.ncols {
            return Err(Error::InvalidArgument(format!("matrix is {}x{}, not square", a.nrows, a.ncols)));
        }
        if rhs.len() != a.nrows {
            return Err(Error::DimensionMismatch {
                expected: a.nrows,
                got: rhs.len(),
            });
        }
        let reuse = matches!(&self.analysis, Some(an) if an.row_ptr == a.row_ptr && an.col_idx == a.col_idx);
        if !reuse {
            self.analysis = Some(self.analyze(a)?);
        }
        let an = self.analysis.as_ref().unwrap();
        let mat = SparseColMat::new_from_argsort(an.symbolic.clone(), &an.argsort, &a.values)
            .map_err(|e| Error::LinearSolve(format!("values: {e:?}")))?;
        let par = Par::Seq;
        let numeric = &mut self.numeric;
        let mut x = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        // faer panics on an exactly zero pivot instead of returning an error
        let solved = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            let mut mem = MemBuffer::try_new(an.lu.factorize_numeric_lu_scratch::<f64>(par, Default::default()))
                .map_err(|_| LuError::Generic(FaerError::OutOfMemory))?;
            let lu = an
                .lu
                .factorize_numeric_lu(numeric, mat.as_ref(), par, MemStack::new(&mut mem), Default::default())?;
            let mut mem = MemBuffer::new(an.lu.solve_in_place_scratch::<f64>(1, par));
            lu.solve_in_place_with_conj(Conj::No, x.as_mut(), par, MemStack::new(&mut mem));
            Ok::<(), LuError>(())
        }))
        .map_err(|_| Error::LinearSolve("numeric LU: zero pivot".into()))?;
        solved.map_err(|e| Error::LinearSolve(format!("numeric LU: {e:?}")))?;
        let out: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("singular matrix (non-finite solution)".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix {
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 0, 4.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        b.push(1, 1, 3.0);
        b.push(2, 2, 2.0);
        b.push(1, 1, 0.5);
        b.push(2, 0, 0.0);
        b.build()
    }

    #[test]
    fn duplicates_summed_and_zeros_kept() {
        let a = sample();
        assert_eq!(a.get(1, 1), 3.5);
        assert_eq!(a.nnz(), 6);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![5.0, 4.5, 2.0]);
    }

    #[test]
    fn add_and_blocks() {
        let a = sample();
        let id = {
            let mut b = TripletBuilder::new(3, 3);
            (0..3).for_each(|i| b.push(i, i, 1.0));
            b.build()
        };
        let s = a.add(1.0, &id, -2.0);
        assert_eq!(s.get(0, 0), 2.0);
        assert_eq!(s.get(0, 1), 1.0);
        let j = SparseMatrix::block2x2([[(&a, 1.0), (&id, 0.5)], [(&id, 2.0), (&a, -1.0)]]);
        assert_eq!(j.nrows(), 6);
        assert_eq!(j.get(0, 3), 0.5);
        assert_eq!(j.get(4, 1), 2.0);
        assert_eq!(j.get(4, 4), -3.5);
        assert_eq!(j.nnz(), 2 * a.nnz() + 6);
    }

    #[test]
    fn direct_solve_and_reuse() {
        let a = sample();
        let mut solver = DirectSolver::new();
        let x = solver.solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        let a2 = a.add(2.0, &a, 0.0);
        assert!(a2.same_pattern(&a));
        let x2 = solver.solve(&a2, &[1.0, 2.0, 3.0]).unwrap();
        for (u, v) in x.iter().zip(&x2) {
            assert!((u - 2.0 * v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_reported() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        b.push(1, 1, 1.0);
        let a = b.build();
        assert!(DirectSolver::new().solve(&a, &[1.0, 0.0]).is_err());
    }
}
