//! Compressed sparse row matrices, block systems and linear solvers.
//!
//! The direct solver is a sparse LU with partial pivoting from `faer`, run
//! sequentially so that repeated solves are bit-for-bit reproducible.

use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Par};
use num_traits::{Num, NumCast};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Value types a [`SparseMatrix`] can hold: reals and the integer incidence entries.
pub trait SparseValue: Num + Copy + Send + Sync + Debug + PartialEq + 'static {}
impl<V: Num + Copy + Send + Sync + Debug + PartialEq + 'static> SparseValue for V {}

/// CSR matrix with sorted, unique column indices per row and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<V> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<V>,
}

impl<V: SparseValue> SparseMatrix<V> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![V::one(); n],
        }
    }

    /// Finalizes a triplet list: duplicates are summed in input order, then exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, V)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row keeping input order, then stable sort each row by column
        let mut next = counts.clone();
        let mut bucket: Vec<(usize, V)> = vec![(0, V::zero()); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut acc = V::zero();
                while i < row.len() && row[i].0 == c {
                    acc = acc + row[i].1;
                    i += 1;
                }
                if acc != V::zero() {
                    col_idx.push(c);
                    values.push(acc);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(rows: &[Vec<V>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense input");
            for (j, &v) in row.iter().enumerate() {
                t.push((i, j, v));
            }
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, V)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> V {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => V::zero(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, V)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            out.extend(self.row(i).map(|(j, v)| (i, j, v)));
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![V::zero(); self.nnz()];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr: counts, col_idx, values }
    }

    pub fn matvec(&self, x: &[V]) -> Vec<V> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).fold(V::zero(), |acc, (j, v)| acc + v * x[j]))
            .collect()
    }

    /// `self^T x` without forming the transpose.
    pub fn matvec_transpose(&self, x: &[V]) -> Vec<V> {
        assert_eq!(x.len(), self.nrows, "matvec dimension mismatch");
        let mut y = vec![V::zero(); self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] = y[j] + v * *xi;
            }
        }
        y
    }

    /// Sparse product `self * rhs` (row-wise Gustavson with a dense accumulator).
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "matmul dimension mismatch");
        let mut acc = vec![V::zero(); rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = V::zero();
                        cols.push(j);
                    }
                    acc[j] = acc[j] + a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                if acc[j] != V::zero() {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows: self.nrows, ncols: rhs.ncols, row_ptr, col_idx, values }
    }

    /// `alpha * self + beta * rhs`.
    pub fn add_scaled(&self, alpha: V, rhs: &Self, beta: V) -> Self {
        assert_eq!(self.shape(), rhs.shape(), "add dimension mismatch");
        let mut t = Vec::with_capacity(self.nnz() + rhs.nnz());
        for i in 0..self.nrows {
            t.extend(self.row(i).map(|(j, v)| (i, j, alpha * v)));
            t.extend(rhs.row(i).map(|(j, v)| (i, j, beta * v)));
        }
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scale(&self, alpha: V) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Keeps the listed columns, renumbered in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::new();
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    t.push((i, map[j], v));
                }
            }
        }
        Self::from_triplets(self.nrows, keep.len(), &t)
    }

    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut t = Vec::new();
        for (new, &old) in keep.iter().enumerate() {
            t.extend(self.row(old).map(|(j, v)| (new, j, v)));
        }
        Self::from_triplets(keep.len(), self.ncols, &t)
    }

    pub fn to_dense(&self) -> Vec<Vec<V>> {
        let mut out = vec![vec![V::zero(); self.ncols]; self.nrows];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[i][j] = v;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    /// Converts the stored values, e.g. an integer incidence matrix to reals.
    pub fn cast<W: SparseValue + NumCast>(&self) -> SparseMatrix<W>
    where
        V: NumCast,
    {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| W::from(v).expect("value cast")).collect(),
        }
    }
}

impl<T: Real> SparseMatrix<T> {
    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Same sparsity pattern as `other` (used to reuse symbolic factorizations).
    pub fn same_pattern(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(out, "{} {} {:e}", i + 1, j + 1, v.to_f64_lossy())?;
            }
        }
        Ok(())
    }
}

pub fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, v| a + *v * *v).sqrt()
}

pub fn norm_inf<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// `x^T A y`.
pub fn quadratic_form<T: Real>(a: &SparseMatrix<T>, x: &[T], y: &[T]) -> T {
    dot(x, &a.matvec(y))
}

/// Grid of optional blocks with per-block-row right-hand sides.
#[derive(Debug, Clone)]
pub struct BlockSystem<T> {
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    blocks: Vec<Option<SparseMatrix<T>>>,
    rhs: Vec<Vec<T>>,
}

impl<T: Real> BlockSystem<T> {
    pub fn new(row_dims: Vec<usize>, col_dims: Vec<usize>) -> Self {
        let rhs = row_dims.iter().map(|&n| vec![T::zero(); n]).collect();
        Self { blocks: vec![None; row_dims.len() * col_dims.len()], row_dims, col_dims, rhs }
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn set_block(&mut self, i: usize, j: usize, block: SparseMatrix<T>) {
        let idx = i * self.col_dims.len() + j;
        self.blocks[idx] = Some(block);
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&SparseMatrix<T>> {
        self.blocks[i * self.col_dims.len() + j].as_ref()
    }

    pub fn set_rhs(&mut self, i: usize, rhs: Vec<T>) {
        self.rhs[i] = rhs;
    }

    pub fn rhs(&self, i: usize) -> &[T] {
        &self.rhs[i]
    }

    fn check(&self) -> Result<()> {
        for (i, &nr) in self.row_dims.iter().enumerate() {
            if self.rhs[i].len() != nr {
                return Err(Error::ShapeMismatch(format!(
                    "rhs segment {i} has length {} but block row has {nr} rows",
                    self.rhs[i].len()
                )));
            }
            for (j, &nc) in self.col_dims.iter().enumerate() {
                if let Some(b) = self.block(i, j) {
                    if b.shape() != (nr, nc) {
                        return Err(Error::ShapeMismatch(format!(
                            "block ({i}, {j}) is {:?}, expected {:?}",
                            b.shape(),
                            (nr, nc)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Assembles the monolithic matrix and right-hand side in block order.
    pub fn compose(&self) -> Result<(SparseMatrix<T>, Vec<T>)> {
        self.check()?;
        let row_off = offsets(&self.row_dims);
        let col_off = offsets(&self.col_dims);
        let nrows = row_off[self.row_dims.len()];
        let ncols = col_off[self.col_dims.len()];
        let mut t = Vec::new();
        for i in 0..self.row_dims.len() {
            for j in 0..self.col_dims.len() {
                if let Some(b) = self.block(i, j) {
                    t.extend(b.triplets().into_iter().map(|(r, c, v)| (r + row_off[i], c + col_off[j], v)));
                }
            }
        }
        let rhs = self.rhs.concat();
        Ok((SparseMatrix::from_triplets(nrows, ncols, &t), rhs))
    }

    /// Block-by-block product, independent of [`Self::compose`].
    pub fn block_matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.check()?;
        let col_off = offsets(&self.col_dims);
        if x.len() != col_off[self.col_dims.len()] {
            return Err(Error::ShapeMismatch("vector length does not match block columns".into()));
        }
        let mut out = Vec::new();
        for (i, &nr) in self.row_dims.iter().enumerate() {
            let mut seg = vec![T::zero(); nr];
            for j in 0..self.col_dims.len() {
                if let Some(b) = self.block(i, j) {
                    let y = b.matvec(&x[col_off[j]..col_off[j + 1]]);
                    for (s, v) in seg.iter_mut().zip(y) {
                        *s = *s + v;
                    }
                }
            }
            out.extend(seg);
        }
        Ok(out)
    }
}

pub fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(dims.len() + 1);
    off.push(0);
    for d in dims {
        off.push(off.last().unwrap() + d);
    }
    off
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolveMethod {
    Direct,
    Iterative { tol: f64, maxit: usize },
}

impl Default for SolveMethod {
    fn default() -> Self {
        SolveMethod::Direct
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub x: Vec<T>,
    /// `||A x - b|| / ||b||` (zero when `b = 0`).
    pub relative_residual: f64,
}

pub fn relative_residual<T: Real>(a: &SparseMatrix<T>, x: &[T], b: &[T]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<T> = ax.iter().zip(b).map(|(p, q)| *p - *q).collect();
    let nb = norm2(b).to_f64_lossy();
    let nr = norm2(&r).to_f64_lossy();
    if nb == 0.0 {
        nr
    } else {
        nr / nb
    }
}

/// Immutable LU factorization of a square sparse matrix.
pub struct Factorization<T: Real> {
    lu: Lu<usize, T>,
    symbolic: SymbolicLu<usize>,
    n: usize,
}

impl<T: Real> Factorization<T> {
    pub fn new(a: &SparseMatrix<T>) -> Result<Self> {
        Self::with_symbolic(a, None)
    }

    /// Reuses `previous`'s symbolic analysis (caller guarantees an identical pattern).
    pub fn with_symbolic(a: &SparseMatrix<T>, previous: Option<&Self>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::ShapeMismatch(format!("matrix is {:?}, not square", a.shape())));
        }
        faer::set_global_parallelism(Par::Seq);
        let n = a.nrows();
        // CSR of A^T is CSC of A
        let at = a.transpose();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, at.row_ptr(), None, at.col_idx());
        let mat = SparseColMatRef::new(sym, at.values());
        let symbolic = match previous {
            Some(p) => p.symbolic.clone(),
            None => SymbolicLu::try_new(sym).map_err(|e| Error::SingularMatrix(format!("{e:?}")))?,
        };
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat)
            .map_err(|e| Error::SingularMatrix(format!("{e:?}")))?;
        Ok(Self { lu, symbolic, n })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let mut rhs = Mat::<T>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Direct solve with reuse of the symbolic analysis across calls with equal patterns.
#[derive(Default)]
pub struct DirectSolver<T: Real> {
    cache: Option<(SparseMatrix<T>, Arc<Factorization<T>>)>,
}

impl<T: Real> DirectSolver<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }

    pub fn factorize(&mut self, a: &SparseMatrix<T>) -> Result<Arc<Factorization<T>>> {
        let previous = match &self.cache {
            Some((m, f)) if m.same_pattern(a) => Some(f.clone()),
            _ => None,
        };
        let f = Arc::new(Factorization::with_symbolic(a, previous.as_deref())?);
        self.cache = Some((a.clone(), f.clone()));
        Ok(f)
    }

    pub fn solve(&mut self, a: &SparseMatrix<T>, b: &[T]) -> Result<Solution<T>> {
        let f = self.factorize(a)?;
        direct_solution(a, &f, b)
    }
}

fn direct_solution<T: Real>(a: &SparseMatrix<T>, f: &Factorization<T>, b: &[T]) -> Result<Solution<T>> {
    let mut x = f.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix("non-finite solution from LU".into()));
    }
    let mut res = relative_residual(a, &x, b);
    // one step of iterative refinement when the first pass is not at round-off level
    if res > 1e-13 {
        let ax = a.matvec(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(p, q)| *p - *q).collect();
        let dx = f.solve(&r);
        let refined: Vec<T> = x.iter().zip(&dx).map(|(p, q)| *p + *q).collect();
        let res2 = relative_residual(a, &refined, b);
        if res2 < res {
            x = refined;
            res = res2;
        }
    }
    if !res.is_finite() || res > 1e-6 {
        return Err(Error::SingularMatrix(format!("LU solve left relative residual {res:e}")));
    }
    Ok(Solution { x, relative_residual: res })
}

/// Solves `A x = b` with the requested method.
pub fn solve<T: Real>(a: &SparseMatrix<T>, b: &[T], method: SolveMethod) -> Result<Solution<T>> {
    if a.nrows() != a.ncols() || b.len() != a.nrows() {
        return Err(Error::ShapeMismatch(format!("matrix {:?} with rhs of length {}", a.shape(), b.len())));
    }
    match method {
        SolveMethod::Direct => {
            let f = Factorization::new(a)?;
            direct_solution(a, &f, b)
        }
        SolveMethod::Iterative { tol, maxit } => bicgstab(a, b, tol, maxit),
    }
}

/// Jacobi-preconditioned BiCGSTAB.
pub fn bicgstab<T: Real>(a: &SparseMatrix<T>, b: &[T], tol: f64, maxit: usize) -> Result<Solution<T>> {
    let n = b.len();
    let nb = norm2(b);
    if nb == T::zero() {
        return Ok(Solution { x: vec![T::zero(); n], relative_residual: 0.0 });
    }
    let inv_diag: Vec<T> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d == T::zero() {
                T::one()
            } else {
                T::one() / d
            }
        })
        .collect();
    let precond = |v: &[T]| -> Vec<T> { v.iter().zip(&inv_diag).map(|(x, d)| *x * *d).collect() };
    let tol_t = T::lit(tol);
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho = T::one();
    let mut alpha = T::one();
    let mut omega = T::one();
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    for _ in 0..maxit {
        let rho_new = dot(&r_hat, &r);
        if rho_new == T::zero() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond(&p);
        v = a.matvec(&y);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<T> = r.iter().zip(&v).map(|(ri, vi)| *ri - alpha * *vi).collect();
        if norm2(&s) / nb <= tol_t {
            for i in 0..n {
                x[i] = x[i] + alpha * y[i];
            }
            let res = relative_residual(a, &x, b);
            return Ok(Solution { x, relative_residual: res });
        }
        let z = precond(&s);
        let t = a.matvec(&z);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] = x[i] + alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) / nb <= tol_t {
            let res = relative_residual(a, &x, b);
            return Ok(Solution { x, relative_residual: res });
        }
        if omega == T::zero() {
            break;
        }
    }
    Err(Error::NoConvergence { maxit, residual: relative_residual(a, &x, b) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0), (1, 2, -1.0), (1, 0, 4.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.get(1, 0), 4.0);
    }

    #[test]
    fn identity_system() {
        let a = SparseMatrix::<f64>::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let s = solve(&a, &b, SolveMethod::Direct).unwrap();
        assert_eq!(s.x, b);
    }

    #[test]
    fn diagonal_spd_two_by_two() {
        let a = SparseMatrix::from_dense(&[vec![2.0f64, 0.0], vec![0.0, 3.0]]);
        let s = solve(&a, &[2.0, 3.0], SolveMethod::Direct).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-15 && (s.x[1] - 1.0).abs() < 1e-15);
        let s = solve(&a, &[2.0, 3.0], SolveMethod::Iterative { tol: 1e-12, maxit: 10 }).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_point_with_zero_diagonal_block() {
        // [[2, 1], [1, 0]] needs pivoting
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        let s = solve(&a, &[3.0, 2.0, 1.0], SolveMethod::Direct).unwrap();
        assert!(s.relative_residual < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(solve(&a, &[1.0, 2.0], SolveMethod::Direct), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn iterative_reports_non_convergence() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 3.0], vec![4.0, 0.0, 1.0]]);
        let r = solve(&a, &[1.0, 1.0, 1.0], SolveMethod::Iterative { tol: 1e-30, maxit: 1 });
        assert!(matches!(r, Err(Error::NoConvergence { maxit: 1, .. })));
    }

    #[test]
    fn identity_blocks_compose_to_identity() {
        let mut bs = BlockSystem::<f64>::new(vec![2, 3], vec![2, 3]);
        bs.set_block(0, 0, SparseMatrix::identity(2));
        bs.set_block(1, 1, SparseMatrix::identity(3));
        let (a, rhs) = bs.compose().unwrap();
        assert_eq!(a, SparseMatrix::identity(5));
        assert_eq!(rhs, vec![0.0; 5]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut bs = BlockSystem::<f64>::new(vec![2, 3], vec![2, 3]);
        bs.set_block(0, 1, SparseMatrix::identity(2));
        assert!(matches!(bs.compose(), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn matrix_market_header() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 2.5]]);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n"));
    }

    fn arb_matrix(n: usize, m: usize) -> impl Strategy<Value = SparseMatrix<f64>> {
        proptest::collection::vec((0..n, 0..m, -3i32..=3), 0..40)
            .prop_map(move |t| {
                let t: Vec<_> = t.into_iter().map(|(i, j, v)| (i, j, v as f64)).collect();
                SparseMatrix::from_triplets(n, m, &t)
            })
    }

    proptest! {
        #[test]
        fn transpose_and_matmul_agree_with_dense(a in arb_matrix(5, 4), b in arb_matrix(4, 6)) {
            let c = a.matmul(&b).to_dense();
            let (da, db) = (a.to_dense(), b.to_dense());
            for i in 0..5 {
                for j in 0..6 {
                    let v: f64 = (0..4).map(|k| da[i][k] * db[k][j]).sum();
                    prop_assert_eq!(c[i][j], v);
                }
            }
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            let x = vec![1.0, -2.0, 0.5, 3.0, 1.5];
            let y1 = a.matvec_transpose(&x);
            let y2 = a.transpose().matvec(&x);
            prop_assert_eq!(y1, y2);
        }

        #[test]
        fn monolithic_matvec_matches_blockwise(a in arb_matrix(3, 3), b in arb_matrix(3, 2), c in arb_matrix(2, 2),
                                               x in proptest::collection::vec(-1.0f64..1.0, 5)) {
            let mut bs = BlockSystem::new(vec![3, 2], vec![3, 2]);
            bs.set_block(0, 0, a);
            bs.set_block(0, 1, b.clone());
            bs.set_block(1, 0, b.transpose());
            bs.set_block(1, 1, c);
            let (m, _) = bs.compose().unwrap();
            let y1 = m.matvec(&x);
            let y2 = bs.block_matvec(&x).unwrap();
            for (p, q) in y1.iter().zip(&y2) {
                prop_assert!((p - q).abs() <= 1e-13);
            }
        }
    }
}
