//! Batched cubic Hermite segments in matrix form.
//!
//! A segment between `P1` and `P2` with parameter tangents `V1`, `V2` is the
//! cubic `s(t) = a t^3 + b t^2 + c t + d` on `t in [0, 1]` with
//! `(a, b, c, d) = T (p1, p2, v1, v2)`. For `M` trajectories the coefficients of
//! one segment index come from a single product with the block-diagonal
//! matrix `G = diag(T, ..., T)`, and the cubics are sampled at `r + 1` ticks
//! through the product `C R` of the `M x 4` coefficient table with the
//! `4 x (r + 1)` table of tick powers.

use std::thread;

use crate::error::{Error, Result};

pub type Mat4 = [[f64; 4]; 4];

/// Hermite basis matrix mapping `(p1, p2, v1, v2)` to `(a, b, c, d)`.
pub const BASIS_T: Mat4 = [
    [2.0, -2.0, 1.0, 1.0],
    [-3.0, 3.0, -2.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
];

pub fn basis_matrix_t() -> Mat4 {
    BASIS_T
}

#[inline]
fn mat4_apply(m: &Mat4, x: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HermiteCubic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl HermiteCubic {
    pub fn from_array([a, b, c, d]: [f64; 4]) -> Self {
        Self { a, b, c, d }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Horner evaluation of `s(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        ((self.a * t + self.b) * t + self.c) * t + self.d
    }

    /// `s'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        (3.0 * self.a * t + 2.0 * self.b) * t + self.c
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Endpoint values and parameter-unit tangents of one segment component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegmentData {
    pub p1: f64,
    pub p2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl SegmentData {
    pub fn new(p1: f64, p2: f64, v1: f64, v2: f64) -> Self {
        Self { p1, p2, v1, v2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p1, self.p2, self.v1, self.v2]
    }
}

/// Cubic with `s(0) = p1`, `s(1) = p2`, `s'(0) = v1`, `s'(1) = v2`.
pub fn hermite_coefficients(seg: SegmentData) -> HermiteCubic {
    let SegmentData { p1, p2, v1, v2 } = seg;
    HermiteCubic {
        a: 2.0 * p1 - 2.0 * p2 + v1 + v2,
        b: -3.0 * p1 + 3.0 * p2 - 2.0 * v1 - v2,
        c: v1,
        d: p1,
    }
}

/// The `4M x 4M` matrix `diag(T, ..., T)` stored as one shared block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonalBasis {
    m_trajectories: usize,
    block: Mat4,
}

/// Largest `M` for which [`BlockDiagonalBasis::to_dense`] will materialize `G`.
pub const MAX_DENSE_TRAJECTORIES: usize = 64;

pub fn build_global_basis(m: usize) -> Result<BlockDiagonalBasis> {
    if m == 0 {
        return Err(Error::domain("global basis needs at least one trajectory"));
    }
    Ok(BlockDiagonalBasis {
        m_trajectories: m,
        block: BASIS_T,
    })
}

impl BlockDiagonalBasis {
    pub fn m_trajectories(&self) -> usize {
        self.m_trajectories
    }

    /// Side length `4M` of the logical matrix.
    pub fn dim(&self) -> usize {
        4 * self.m_trajectories
    }

    pub fn block(&self, i: usize) -> Option<&Mat4> {
        (i < self.m_trajectories).then_some(&self.block)
    }

    /// Entries inside the diagonal blocks, `16 M`.
    pub fn block_entries(&self) -> usize {
        16 * self.m_trajectories
    }

    /// Entries of the blocks that are actually non-zero (`T` has 10).
    pub fn nonzero_count(&self) -> usize {
        let per_block = self.block.iter().flatten().filter(|v| **v != 0.0).count();
        per_block * self.m_trajectories
    }

    /// Fraction of the logical matrix covered by diagonal blocks: `1 / M`.
    pub fn density(&self) -> f64 {
        let dim = self.dim() as f64;
        self.block_entries() as f64 / (dim * dim)
    }

    /// Bytes held by this representation.
    pub fn storage_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
    }

    /// Entry count of the dense `4M x 4M` equivalent.
    pub fn dense_entries(&self) -> u128 {
        let dim = self.dim() as u128;
        dim * dim
    }

    /// Row-major dense form, for small test sizes only.
    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>> {
        if self.m_trajectories > MAX_DENSE_TRAJECTORIES {
            return Err(Error::domain(format!(
                "refusing to materialize dense G for M = {} > {MAX_DENSE_TRAJECTORIES}",
                self.m_trajectories
            )));
        }
        let n = self.dim();
        let mut dense = vec![vec![0.0; n]; n];
        for b in 0..self.m_trajectories {
            for (i, row) in self.block.iter().enumerate() {
                dense[4 * b + i][4 * b..4 * b + 4].copy_from_slice(row);
            }
        }
        Ok(dense)
    }

    /// `G p` written into `out`.
    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if p.len() != n || out.len() != n {
            return Err(Error::domain(format!(
                "G is {n} x {n} but input has length {} and output {}",
                p.len(),
                out.len()
            )));
        }
        for (x, y) in p.chunks_exact(4).zip(out.chunks_exact_mut(4)) {
            y.copy_from_slice(&mat4_apply(&self.block, x));
        }
        Ok(())
    }

    /// Materialize one stored block per trajectory.
    pub fn to_explicit(&self) -> ExplicitBlockDiagonal {
        ExplicitBlockDiagonal {
            blocks: vec![self.block; self.m_trajectories],
        }
    }
}

/// Block-diagonal matrix with every `4 x 4` block stored separately.
///
/// Used to compare against the shared-block form; the storage grows as
/// `128 M` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitBlockDiagonal {
    blocks: Vec<Mat4>,
}

impl ExplicitBlockDiagonal {
    pub fn dim(&self) -> usize {
        4 * self.blocks.len()
    }

    pub fn storage_bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.blocks.len() * std::mem::size_of::<Mat4>()
    }

    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if p.len() != n || out.len() != n {
            return Err(Error::domain(format!(
                "matrix is {n} x {n} but input has length {} and output {}",
                p.len(),
                out.len()
            )));
        }
        for ((x, y), block) in p
            .chunks_exact(4)
            .zip(out.chunks_exact_mut(4))
            .zip(&self.blocks)
        {
            y.copy_from_slice(&mat4_apply(block, x));
        }
        Ok(())
    }
}

/// Hermite coefficients for all `M` trajectories of one segment: `G p`.
///
/// `p` holds `M` consecutive blocks `(p1, p2, v1, v2)`; the result holds the
/// matching blocks `(a, b, c, d)`.
pub fn batch_coefficients(basis: &BlockDiagonalBasis, p: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; basis.dim()];
    basis.apply_into(p, &mut out)?;
    Ok(out)
}

/// The `M x 4` coefficient table `C` of one segment and one component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HermiteBatch {
    rows: Vec<[f64; 4]>,
}

impl HermiteBatch {
    pub fn from_rows(rows: Vec<[f64; 4]>) -> Self {
        Self { rows }
    }

    pub fn from_cubics(cubics: &[HermiteCubic]) -> Self {
        Self {
            rows: cubics.iter().map(|c| c.to_array()).collect(),
        }
    }

    /// Reshape the output of [`batch_coefficients`].
    pub fn from_flat(coefficients: &[f64]) -> Result<Self> {
        if !coefficients.len().is_multiple_of(4) {
            return Err(Error::domain(format!(
                "coefficient vector length {} is not a multiple of 4",
                coefficients.len()
            )));
        }
        Ok(Self {
            rows: coefficients
                .chunks_exact(4)
                .map(|c| [c[0], c[1], c[2], c[3]])
                .collect(),
        })
    }

    pub fn m_trajectories(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[[f64; 4]] {
        &self.rows
    }

    pub fn cubic(&self, i: usize) -> HermiteCubic {
        HermiteCubic::from_array(self.rows[i])
    }
}

/// Tick powers `R` (and their derivatives) for `r` ticks per cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    r: usize,
    // 4 x (r + 1), row-major
    values: Vec<f64>,
    derivatives: Vec<f64>,
}

pub fn evaluation_matrix(r: usize) -> Result<EvaluationGrid> {
    if r == 0 {
        return Err(Error::domain(
            "evaluation grid needs at least one tick interval",
        ));
    }
    let cols = r + 1;
    let mut values = vec![0.0; 4 * cols];
    let mut derivatives = vec![0.0; 4 * cols];
    for k in 0..cols {
        let t = k as f64 / r as f64;
        let t2 = t * t;
        values[k] = t2 * t;
        values[cols + k] = t2;
        values[2 * cols + k] = t;
        values[3 * cols + k] = 1.0;
        derivatives[k] = 3.0 * t2;
        derivatives[cols + k] = 2.0 * t;
        derivatives[2 * cols + k] = 1.0;
        derivatives[3 * cols + k] = 0.0;
    }
    Ok(EvaluationGrid {
        r,
        values,
        derivatives,
    })
}

impl EvaluationGrid {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn cols(&self) -> usize {
        self.r + 1
    }

    pub fn tick(&self, k: usize) -> f64 {
        self.values[2 * self.cols() + k]
    }

    /// Column `k` of `R`: `(t^3, t^2, t, 1)` at `t = k / r`.
    pub fn column(&self, k: usize) -> [f64; 4] {
        let cols = self.cols();
        [
            self.values[k],
            self.values[cols + k],
            self.values[2 * cols + k],
            self.values[3 * cols + k],
        ]
    }

    /// Row `i` of `R`.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.cols();
        &self.values[i * cols..(i + 1) * cols]
    }

    /// Index of the tick equal to `t0`, if any.
    pub fn tick_index(&self, t0: f64) -> Option<usize> {
        (0..self.cols()).find(|&k| self.tick(k) == t0)
    }
}

/// Dense row-major result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, k)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn bitwise_eq(&self, other: &Table) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// `out = C R` for a contiguous block of rows of `C`.
fn product_rows(rows: &[[f64; 4]], r: &[f64], cols: usize, out: &mut [f64]) {
    let (r0, rest) = r.split_at(cols);
    let (r1, rest) = rest.split_at(cols);
    let (r2, r3) = rest.split_at(cols);
    for (c, o) in rows.iter().zip(out.chunks_exact_mut(cols)) {
        for k in 0..cols {
            o[k] = c[0] * r0[k] + c[1] * r1[k] + c[2] * r2[k] + c[3] * r3[k];
        }
    }
}

/// Values of all cubics at all ticks: the `M x (r + 1)` product `C R`.
pub fn evaluate_batch(batch: &HermiteBatch, grid: &EvaluationGrid) -> Table {
    let mut table = Table::zeros(batch.m_trajectories(), grid.cols());
    product_rows(&batch.rows, &grid.values, grid.cols(), &mut table.data);
    table
}

/// Parameter derivatives `s'(t_k)` of all cubics at all ticks.
pub fn evaluate_batch_derivative(batch: &HermiteBatch, grid: &EvaluationGrid) -> Table {
    let mut table = Table::zeros(batch.m_trajectories(), grid.cols());
    product_rows(&batch.rows, &grid.derivatives, grid.cols(), &mut table.data);
    table
}

/// [`evaluate_batch`] with rows split evenly over `workers` threads.
///
/// Requires `M % workers == 0`. Each worker writes a disjoint row range of the
/// output and the per-row arithmetic is identical, so the result does not
/// depend on `workers`.
pub fn evaluate_batch_partitioned(
    batch: &HermiteBatch,
    grid: &EvaluationGrid,
    workers: usize,
) -> Result<Table> {
    let m = batch.m_trajectories();
    if workers == 0 {
        return Err(Error::domain("worker count must be at least 1"));
    }
    if !m.is_multiple_of(workers) {
        return Err(Error::domain(format!(
            "{m} trajectories cannot be split evenly over {workers} workers"
        )));
    }
    let cols = grid.cols();
    let mut table = Table::zeros(m, cols);
    if workers == 1 || m == 0 {
        product_rows(&batch.rows, &grid.values, cols, &mut table.data);
        return Ok(table);
    }
    let rows_per_worker = m / workers;
    thread::scope(|scope| {
        for (rows, out) in batch
            .rows
            .chunks(rows_per_worker)
            .zip(table.data.chunks_mut(rows_per_worker * cols))
        {
            let r = &grid.values;
            scope.spawn(move || product_rows(rows, r, cols, out));
        }
    });
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_rows() {
        let t = basis_matrix_t();
        assert_eq!(t[2], [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(mat4_apply(&t, &[0.0; 4]), [0.0; 4]);
        assert_eq!(mat4_apply(&t, &[0.0, 1.0, 1.0, 1.0]), [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn coefficient_examples() {
        let flat = hermite_coefficients(SegmentData::new(1.0, 1.0, 0.0, 0.0));
        assert_eq!(flat.to_array(), [0.0, 0.0, 0.0, 1.0]);
        let line = hermite_coefficients(SegmentData::new(0.0, 1.0, 1.0, 1.0));
        assert_eq!(line.to_array(), [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn global_basis_small_cases() {
        assert!(build_global_basis(0).is_err());
        let g1 = build_global_basis(1).unwrap();
        let dense = g1.to_dense().unwrap();
        for i in 0..4 {
            assert_eq!(dense[i].as_slice(), BASIS_T[i].as_slice());
        }
        let g100 = build_global_basis(100).unwrap();
        assert_eq!(g100.density(), 0.01);
        assert_eq!(g100.nonzero_count(), 1000);
        assert!(build_global_basis(65).unwrap().to_dense().is_err());
    }

    #[test]
    fn dense_matches_block_product() {
        let g = build_global_basis(5).unwrap();
        let dense = g.to_dense().unwrap();
        let p: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let gp = batch_coefficients(&g, &p).unwrap();
        for (i, row) in dense.iter().enumerate() {
            let expect: f64 = row.iter().zip(&p).map(|(a, b)| a * b).sum();
            assert!((gp[i] - expect).abs() < 1e-14);
        }
        // Block structure: entries off the diagonal blocks are zero.
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i / 4 != j / 4 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn batch_coefficients_checks_length() {
        let g = build_global_basis(3).unwrap();
        assert!(batch_coefficients(&g, &[0.0; 11]).is_err());
        assert_eq!(batch_coefficients(&g, &[0.0; 12]).unwrap(), vec![0.0; 12]);
    }

    #[test]
    fn explicit_blocks_agree_with_shared() {
        let g = build_global_basis(9).unwrap();
        let e = g.to_explicit();
        let p: Vec<f64> = (0..36).map(|i| i as f64 - 17.5).collect();
        let mut a = vec![0.0; 36];
        let mut b = vec![0.0; 36];
        g.apply_into(&p, &mut a).unwrap();
        e.apply_into(&p, &mut b).unwrap();
        assert_eq!(a, b);
        assert!(e.storage_bytes() > g.storage_bytes());
    }

    #[test]
    fn evaluation_matrix_columns() {
        assert!(evaluation_matrix(0).is_err());
        let r1 = evaluation_matrix(1).unwrap();
        assert_eq!(r1.column(0), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(r1.column(1), [1.0, 1.0, 1.0, 1.0]);
        let r2 = evaluation_matrix(2).unwrap();
        assert_eq!(r2.column(1), [0.125, 0.25, 0.5, 1.0]);
        let r10 = evaluation_matrix(10).unwrap();
        assert_eq!(r10.cols(), 11);
        assert_eq!(r10.column(10), [1.0; 4]);
        assert!(r10.row(3).iter().all(|&v| v == 1.0));
        assert_eq!(r10.tick_index(0.5), Some(5));
        assert_eq!(r10.tick_index(0.55), None);
    }

    #[test]
    fn evaluate_line_and_zero() {
        let grid = evaluation_matrix(4).unwrap();
        let line = HermiteBatch::from_rows(vec![[0.0, 0.0, 1.0, 0.0]]);
        assert_eq!(
            evaluate_batch(&line, &grid).row(0),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        let zero = HermiteBatch::from_rows(vec![[0.0; 4]; 3]);
        assert!(evaluate_batch(&zero, &grid)
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_table_matches_closed_form() {
        let grid = evaluation_matrix(5).unwrap();
        let cubic = HermiteCubic {
            a: 1.5,
            b: -2.0,
            c: 0.25,
            d: 3.0,
        };
        let table = evaluate_batch_derivative(&HermiteBatch::from_cubics(&[cubic]), &grid);
        for k in 0..grid.cols() {
            assert!((table.get(0, k) - cubic.derivative(grid.tick(k))).abs() < 1e-14);
        }
    }

    #[test]
    fn partition_rejects_uneven_split() {
        let grid = evaluation_matrix(3).unwrap();
        let batch = HermiteBatch::from_rows(vec![[1.0; 4]; 6]);
        assert!(evaluate_batch_partitioned(&batch, &grid, 4).is_err());
        assert!(evaluate_batch_partitioned(&batch, &grid, 0).is_err());
        let p3 = evaluate_batch_partitioned(&batch, &grid, 3).unwrap();
        assert!(p3.bitwise_eq(&evaluate_batch(&batch, &grid)));
    }

    #[test]
    fn from_flat_checks_length() {
        assert!(HermiteBatch::from_flat(&[0.0; 7]).is_err());
        let b = HermiteBatch::from_flat(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            b.cubic(0),
            HermiteCubic {
                a: 1.0,
                b: 2.0,
                c: 3.0,
                d: 4.0
            }
        );
    }
}
