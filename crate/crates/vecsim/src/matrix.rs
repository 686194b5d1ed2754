//! Dense and N:M structured-sparse matrix representations.
//!
//! An N:M matrix stores, per block of M consecutive row elements, at most N
//! non-zero values together with their global column indexes (`values` /
//! `col_idx` pairs). Blocks with fewer than N non-zeros are padded with a
//! zero value whose index is the block's first column, so every row encodes
//! to a fixed `cols / m * n` slots.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix of 32-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Uniform values in [-1, 1), deterministic per seed.
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Largest |a - b| over all elements; shapes must match.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f32> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }

    /// Bit-exact equality, or fallback relative tolerance on the larger
    /// magnitude of each element pair.
    pub fn matches(&self, other: &DenseMatrix, rel_tol: f32) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| {
                a.to_bits() == b.to_bits() || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
            })
    }
}

/// N:M sparsity pattern: at most `n` non-zeros per block of `m` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NMConfig {
    n: usize,
    m: usize,
}

impl NMConfig {
    pub const ONE_OF_FOUR: NMConfig = NMConfig { n: 1, m: 4 };
    pub const TWO_OF_FOUR: NMConfig = NMConfig { n: 2, m: 4 };
    pub const ONE_OF_TWO: NMConfig = NMConfig { n: 1, m: 2 };

    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || n > m {
            return Err(Error::constraint(format!(
                "invalid sparsity {n}:{m}, need 1 <= n <= m"
            )));
        }
        Ok(Self { n, m })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Encoded slots per row for a matrix with `cols` columns.
    pub fn slots_per_row(&self, cols: usize) -> usize {
        cols / self.m * self.n
    }
}

impl std::fmt::Display for NMConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.n, self.m)
    }
}

impl std::str::FromStr for NMConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (n, m) = s
            .split_once(':')
            .ok_or_else(|| Error::parse(format!("expected N:M, got {s:?}")))?;
        let n = n
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad N in {s:?}")))?;
        let m = m
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad M in {s:?}")))?;
        NMConfig::new(n, m)
    }
}

/// N:M encoded sparse matrix: parallel `values` / `col_idx` arrays of shape
/// rows x (cols/m * n), slot-major within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub nm: NMConfig,
    values: Vec<f32>,
    col_idx: Vec<u32>,
}

impl StructuredSparseMatrix {
    pub fn from_parts(
        rows: usize,
        cols: usize,
        nm: NMConfig,
        values: Vec<f32>,
        col_idx: Vec<u32>,
    ) -> Result<Self> {
        let s = Self {
            rows,
            cols,
            nm,
            values,
            col_idx,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn slots_per_row(&self) -> usize {
        self.nm.slots_per_row(self.cols)
    }

    pub fn blocks_per_row(&self) -> usize {
        self.cols / self.nm.m
    }

    pub fn values_row(&self, i: usize) -> &[f32] {
        let s = self.slots_per_row();
        &self.values[i * s..(i + 1) * s]
    }

    pub fn col_idx_row(&self, i: usize) -> &[u32] {
        let s = self.slots_per_row();
        &self.col_idx[i * s..(i + 1) * s]
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Checks every format invariant: column count divisible by m, indexes
    /// within their block, occupied slots in strictly increasing index order
    /// ahead of padding, padding slots zero-valued at the block's first
    /// column.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.nm.n, self.nm.m);
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::shape("dimensions must be positive"));
        }
        if !self.cols.is_multiple_of(m) {
            return Err(Error::shape(format!(
                "cols {} not a multiple of block size {m}",
                self.cols
            )));
        }
        let slots = self.slots_per_row();
        if self.values.len() != self.rows * slots || self.col_idx.len() != self.rows * slots {
            return Err(Error::format(format!(
                "expected {} slots, got {} values / {} indexes",
                self.rows * slots,
                self.values.len(),
                self.col_idx.len()
            )));
        }
        for i in 0..self.rows {
            let vals = self.values_row(i);
            let idxs = self.col_idx_row(i);
            for b in 0..self.blocks_per_row() {
                let first_col = (b * m) as u32;
                let mut prev: Option<u32> = None;
                let mut in_padding = false;
                for s in 0..n {
                    let v = vals[b * n + s];
                    let c = idxs[b * n + s];
                    if c < first_col || c >= first_col + m as u32 {
                        return Err(Error::format(format!(
                            "row {i} block {b}: index {c} outside [{first_col}, {})",
                            first_col + m as u32
                        )));
                    }
                    if v == 0.0 {
                        if c != first_col {
                            return Err(Error::format(format!(
                                "row {i} block {b}: padding slot must point at column {first_col}, got {c}"
                            )));
                        }
                        in_padding = true;
                    } else {
                        if in_padding {
                            return Err(Error::format(format!(
                                "row {i} block {b}: occupied slot after padding"
                            )));
                        }
                        if let Some(p) = prev {
                            if c <= p {
                                return Err(Error::format(format!(
                                    "row {i} block {b}: indexes not strictly increasing ({p} then {c})"
                                )));
                            }
                        }
                        prev = Some(c);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Row-wise product: `C[i][j] = sum_k a[i][k] * b[k][j]`, accumulated in
/// ascending k order.
pub fn dense_matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(format!(
            "inner dimensions differ: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            let brow = b.row(k);
            let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aik * bj;
            }
        }
    }
    Ok(c)
}

/// Keeps the n largest-magnitude elements of every length-m block and zeroes
/// the rest. Ties keep the lower column index.
pub fn prune_nm(x: &DenseMatrix, nm: NMConfig) -> Result<DenseMatrix> {
    if !x.cols.is_multiple_of(nm.m) {
        return Err(Error::shape(format!(
            "cols {} not a multiple of block size {}",
            x.cols, nm.m
        )));
    }
    let mut out = x.clone();
    let mut order: Vec<usize> = Vec::with_capacity(nm.m);
    for i in 0..x.rows {
        for b in 0..x.cols / nm.m {
            let base = i * x.cols + b * nm.m;
            order.clear();
            order.extend(0..nm.m);
            // Stable sort by descending magnitude keeps lower indexes first
            // among equals.
            order.sort_by(|&p, &q| {
                out.data[base + q]
                    .abs()
                    .partial_cmp(&out.data[base + p].abs())
                    .unwrap()
            });
            for &p in &order[nm.n..] {
                out.data[base + p] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Encodes an already N:M-compliant dense matrix. A block holding more than
/// n non-zeros is a format violation.
pub fn encode_nm(x: &DenseMatrix, nm: NMConfig) -> Result<StructuredSparseMatrix> {
    if !x.cols.is_multiple_of(nm.m) {
        return Err(Error::shape(format!(
            "cols {} not a multiple of block size {}",
            x.cols, nm.m
        )));
    }
    let slots = nm.slots_per_row(x.cols);
    let mut values = Vec::with_capacity(x.rows * slots);
    let mut col_idx = Vec::with_capacity(x.rows * slots);
    for i in 0..x.rows {
        for b in 0..x.cols / nm.m {
            let first_col = b * nm.m;
            let mut filled = 0;
            for j in first_col..first_col + nm.m {
                let v = x.get(i, j);
                if v != 0.0 {
                    if filled == nm.n {
                        return Err(Error::format(format!(
                            "row {i} block {b} has more than {} non-zeros",
                            nm.n
                        )));
                    }
                    values.push(v);
                    col_idx.push(j as u32);
                    filled += 1;
                }
            }
            for _ in filled..nm.n {
                values.push(0.0);
                col_idx.push(first_col as u32);
            }
        }
    }
    StructuredSparseMatrix::from_parts(x.rows, x.cols, nm, values, col_idx)
}

/// Scatters an encoded matrix back to dense form.
pub fn decode_nm(s: &StructuredSparseMatrix) -> Result<DenseMatrix> {
    s.validate()?;
    let mut out = DenseMatrix::zeros(s.rows, s.cols);
    for i in 0..s.rows {
        for (v, c) in s.values_row(i).iter().zip(s.col_idx_row(i)) {
            if *v != 0.0 {
                out.set(i, *c as usize, *v);
            }
        }
    }
    Ok(out)
}

/// Random valid N:M matrix with exactly n non-zeros per block, deterministic
/// per seed. Magnitudes are kept away from zero so the block occupancy is
/// exact.
pub fn random_nm(
    rows: usize,
    cols: usize,
    nm: NMConfig,
    seed: u64,
) -> Result<StructuredSparseMatrix> {
    if !cols.is_multiple_of(nm.m) {
        return Err(Error::shape(format!(
            "cols {cols} not a multiple of block size {}",
            nm.m
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::shape("dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = nm.slots_per_row(cols);
    let mut values = Vec::with_capacity(rows * slots);
    let mut col_idx = Vec::with_capacity(rows * slots);
    let mut picks: Vec<usize> = Vec::with_capacity(nm.m);
    for _ in 0..rows {
        for b in 0..cols / nm.m {
            picks.clear();
            picks.extend(0..nm.m);
            // Partial Fisher-Yates: choose n distinct offsets within the block.
            for t in 0..nm.n {
                let r = rng.random_range(t..nm.m);
                picks.swap(t, r);
            }
            picks[..nm.n].sort_unstable();
            for &off in &picks[..nm.n] {
                let mag = rng.random_range(0.1f32..1.0);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                values.push(sign * mag);
                col_idx.push((b * nm.m + off) as u32);
            }
        }
    }
    StructuredSparseMatrix::from_parts(rows, cols, nm, values, col_idx)
}

// ---------------------------------------------------------------------------
// .mtxt text format
// ---------------------------------------------------------------------------

/// A parsed `.mtxt` file: `dense <rows> <cols>` followed by one line per row,
/// or `nm <rows> <cols> <n> <m>` followed by alternating values / col_idx
/// lines per row. Decimal text round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(StructuredSparseMatrix),
}

impl Matrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Matrix::Dense(d) => (d.rows, d.cols),
            Matrix::Sparse(s) => (s.rows, s.cols),
        }
    }
}

pub fn write_mtxt(m: &Matrix) -> String {
    let mut out = String::new();
    match m {
        Matrix::Dense(d) => {
            let _ = writeln!(out, "dense {} {}", d.rows, d.cols);
            for i in 0..d.rows {
                let row: Vec<String> = d.row(i).iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        Matrix::Sparse(s) => {
            let _ = writeln!(out, "nm {} {} {} {}", s.rows, s.cols, s.nm.n(), s.nm.m());
            for i in 0..s.rows {
                let vals: Vec<String> = s.values_row(i).iter().map(|v| format!("{v}")).collect();
                let idxs: Vec<String> = s.col_idx_row(i).iter().map(|c| format!("{c}")).collect();
                let _ = writeln!(out, "{}", vals.join(" "));
                let _ = writeln!(out, "{}", idxs.join(" "));
            }
        }
    }
    out
}

fn parse_floats(line: &str, expect: usize, what: &str) -> Result<Vec<f32>> {
    let vals: Vec<f32> = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f32>()
                .map_err(|_| Error::parse(format!("bad number {t:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expect {
        return Err(Error::parse(format!(
            "{what}: expected {expect} entries, got {}",
            vals.len()
        )));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(format!("{what}: non-finite element")));
    }
    Ok(vals)
}

pub fn parse_mtxt(text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty matrix file"))?;
    let mut toks = header.split_whitespace();
    let kind = toks.next().unwrap_or("");
    let dims: Vec<usize> = toks
        .map(|t| {
            t.parse()
                .map_err(|_| Error::parse(format!("bad header field {t:?}")))
        })
        .collect::<Result<_>>()?;
    match kind {
        "dense" => {
            let [rows, cols] = dims[..] else {
                return Err(Error::parse(format!(
                    "dense header needs 2 fields, got {}",
                    dims.len()
                )));
            };
            let mut data = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::parse(format!("missing row {i}")))?;
                data.extend(parse_floats(line, cols, &format!("row {i}"))?);
            }
            Ok(Matrix::Dense(DenseMatrix::new(rows, cols, data)?))
        }
        "nm" => {
            let [rows, cols, n, m] = dims[..] else {
                return Err(Error::parse(format!(
                    "nm header needs 4 fields, got {}",
                    dims.len()
                )));
            };
            let nm = NMConfig::new(n, m)?;
            let slots = nm.slots_per_row(cols);
            let mut values = Vec::with_capacity(rows * slots);
            let mut col_idx = Vec::with_capacity(rows * slots);
            for i in 0..rows {
                let vline = lines
                    .next()
                    .ok_or_else(|| Error::parse(format!("missing values row {i}")))?;
                values.extend(parse_floats(vline, slots, &format!("values row {i}"))?);
                let iline = lines
                    .next()
                    .ok_or_else(|| Error::parse(format!("missing col_idx row {i}")))?;
                for t in iline.split_whitespace() {
                    col_idx.push(
                        t.parse::<u32>()
                            .map_err(|_| Error::parse(format!("bad index {t:?} in row {i}")))?,
                    );
                }
                if col_idx.len() != (i + 1) * slots {
                    return Err(Error::parse(format!(
                        "col_idx row {i}: expected {slots} entries"
                    )));
                }
            }
            Ok(Matrix::Sparse(StructuredSparseMatrix::from_parts(
                rows, cols, nm, values, col_idx,
            )?))
        }
        other => Err(Error::parse(format!("unknown matrix kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: classic i-j-k dot-product loop, written before the
    /// row-wise implementation and kept separate from it.
    fn matmul_oracle(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let mut c = DenseMatrix::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut acc = 0.0f32;
                for k in 0..a.cols {
                    acc += a.get(i, k) * b.get(k, j);
                }
                c.set(i, j, acc);
            }
        }
        c
    }

    #[test]
    fn matmul_identity_passes_through() {
        let b = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = dense_matmul(&DenseMatrix::identity(2), &b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn matmul_zero_matrix() {
        let a = DenseMatrix::zeros(3, 4);
        let b = DenseMatrix::random(4, 5, 7);
        let c = dense_matmul(&a, &b).unwrap();
        assert_eq!(c, DenseMatrix::zeros(3, 5));
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let a = DenseMatrix::random(8, 8, 1);
        let b = DenseMatrix::random(8, 8, 2);
        let c = dense_matmul(&a, &b).unwrap();
        let expect = matmul_oracle(&a, &b);
        assert_eq!(c.data(), expect.data());
    }

    #[test]
    fn matmul_rejects_dimension_mismatch() {
        let a = DenseMatrix::random(2, 3, 0);
        let b = DenseMatrix::random(4, 2, 0);
        assert!(matches!(dense_matmul(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn prune_single_max_magnitude() {
        let x = DenseMatrix::new(1, 4, vec![5.0, -9.0, 1.0, 2.0]).unwrap();
        let p = prune_nm(&x, NMConfig::ONE_OF_FOUR).unwrap();
        assert_eq!(p.data(), &[0.0, -9.0, 0.0, 0.0]);
    }

    #[test]
    fn prune_two_max_magnitudes() {
        let x = DenseMatrix::new(1, 4, vec![5.0, -9.0, 1.0, 2.0]).unwrap();
        let p = prune_nm(&x, NMConfig::TWO_OF_FOUR).unwrap();
        assert_eq!(p.data(), &[5.0, -9.0, 0.0, 0.0]);
    }

    #[test]
    fn prune_ties_keep_lower_index() {
        let x = DenseMatrix::new(1, 4, vec![3.0, -3.0, 3.0, 3.0]).unwrap();
        let p = prune_nm(&x, NMConfig::TWO_OF_FOUR).unwrap();
        assert_eq!(p.data(), &[3.0, -3.0, 0.0, 0.0]);
    }

    #[test]
    fn prune_bounds_nonzeros_per_block() {
        let x = DenseMatrix::random(4, 8, 3);
        let p = prune_nm(&x, NMConfig::TWO_OF_FOUR).unwrap();
        for i in 0..4 {
            for b in 0..2 {
                let nnz = (0..4).filter(|o| p.get(i, b * 4 + o) != 0.0).count();
                assert!(nnz <= 2, "row {i} block {b} has {nnz} non-zeros");
            }
        }
    }

    #[test]
    fn prune_rejects_bad_cols() {
        let x = DenseMatrix::random(2, 10, 0);
        assert!(matches!(
            prune_nm(&x, NMConfig::ONE_OF_FOUR),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn encode_all_zero_uses_padding_rule() {
        let x = DenseMatrix::zeros(2, 4);
        let s = encode_nm(&x, NMConfig::TWO_OF_FOUR).unwrap();
        assert!(s.values_row(0).iter().all(|v| *v == 0.0));
        assert_eq!(s.col_idx_row(0), &[0, 0]);
        assert_eq!(s.col_idx_row(1), &[0, 0]);
    }

    #[test]
    fn encode_reads_off_definition() {
        let x = DenseMatrix::new(1, 4, vec![0.0, 7.0, 0.0, 3.0]).unwrap();
        let s = encode_nm(&x, NMConfig::TWO_OF_FOUR).unwrap();
        assert_eq!(s.values_row(0), &[7.0, 3.0]);
        assert_eq!(s.col_idx_row(0), &[1, 3]);
    }

    #[test]
    fn encode_rejects_overfull_block() {
        let x = DenseMatrix::new(1, 4, vec![1.0, 2.0, 3.0, 0.0]).unwrap();
        assert!(matches!(
            encode_nm(&x, NMConfig::TWO_OF_FOUR),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn decode_inverse_of_encode_example() {
        let s = StructuredSparseMatrix::from_parts(
            1,
            4,
            NMConfig::TWO_OF_FOUR,
            vec![7.0, 3.0],
            vec![1, 3],
        )
        .unwrap();
        let d = decode_nm(&s).unwrap();
        assert_eq!(d.data(), &[0.0, 7.0, 0.0, 3.0]);
    }

    #[test]
    fn decode_padded_zero_encoding() {
        let s = StructuredSparseMatrix::from_parts(
            2,
            8,
            NMConfig::ONE_OF_FOUR,
            vec![0.0; 4],
            vec![0, 4, 0, 4],
        )
        .unwrap();
        assert_eq!(decode_nm(&s).unwrap(), DenseMatrix::zeros(2, 8));
    }

    #[test]
    fn decode_rejects_out_of_block_index() {
        let r = StructuredSparseMatrix::from_parts(
            1,
            4,
            NMConfig::TWO_OF_FOUR,
            vec![7.0, 3.0],
            vec![1, 5],
        );
        assert!(matches!(r, Err(Error::Format(_))));
    }

    #[test]
    fn decode_rejects_duplicate_index() {
        let r = StructuredSparseMatrix::from_parts(
            1,
            4,
            NMConfig::TWO_OF_FOUR,
            vec![7.0, 3.0],
            vec![1, 1],
        );
        assert!(matches!(r, Err(Error::Format(_))));
    }

    #[test]
    fn roundtrip_pruned_16x64() {
        let x = prune_nm(&DenseMatrix::random(16, 64, 11), NMConfig::ONE_OF_FOUR).unwrap();
        let s = encode_nm(&x, NMConfig::ONE_OF_FOUR).unwrap();
        assert_eq!(decode_nm(&s).unwrap(), x);
    }

    #[test]
    fn random_nm_is_deterministic() {
        let a = random_nm(8, 16, NMConfig::TWO_OF_FOUR, 5).unwrap();
        let b = random_nm(8, 16, NMConfig::TWO_OF_FOUR, 5).unwrap();
        assert_eq!(a, b);
        let c = random_nm(8, 16, NMConfig::TWO_OF_FOUR, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_nm_fills_every_block() {
        let s = random_nm(8, 16, NMConfig::TWO_OF_FOUR, 9).unwrap();
        let d = decode_nm(&s).unwrap();
        for i in 0..8 {
            for b in 0..4 {
                let nnz = (0..4).filter(|o| d.get(i, b * 4 + o) != 0.0).count();
                assert_eq!(nnz, 2, "row {i} block {b}");
            }
        }
    }

    #[test]
    fn random_nm_dense_when_n_equals_m() {
        let s = random_nm(3, 8, NMConfig::new(4, 4).unwrap(), 1).unwrap();
        assert_eq!(s.nnz(), 3 * 8);
    }

    #[test]
    fn mtxt_roundtrip_dense() {
        let d = Matrix::Dense(DenseMatrix::random(5, 7, 123));
        assert_eq!(parse_mtxt(&write_mtxt(&d)).unwrap(), d);
    }

    #[test]
    fn mtxt_roundtrip_sparse() {
        let s = Matrix::Sparse(random_nm(6, 12, NMConfig::ONE_OF_FOUR, 77).unwrap());
        assert_eq!(parse_mtxt(&write_mtxt(&s)).unwrap(), s);
    }

    #[test]
    fn mtxt_rejects_garbage() {
        assert!(parse_mtxt("").is_err());
        assert!(parse_mtxt("coo 2 2\n1 2\n3 4\n").is_err());
        assert!(parse_mtxt("dense 2 2\n1 2\n3\n").is_err());
        assert!(parse_mtxt("dense 1 2\nnan 1\n").is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn nm_strategy() -> impl Strategy<Value = NMConfig> {
            prop_oneof![
                Just(NMConfig::ONE_OF_TWO),
                Just(NMConfig::ONE_OF_FOUR),
                Just(NMConfig::TWO_OF_FOUR),
            ]
        }

        proptest! {
            /// The file parser rejects arbitrary junk without panicking.
            #[test]
            fn mtxt_parser_never_panics(text in "\\PC{0,200}") {
                let _ = parse_mtxt(&text);
            }

            #[test]
            fn prune_encode_decode_roundtrip(
                nm in nm_strategy(),
                rows in 1usize..12,
                blocks in 1usize..10,
                seed in any::<u64>(),
            ) {
                let cols = blocks * nm.m();
                let x = DenseMatrix::random(rows, cols, seed);
                let pruned = prune_nm(&x, nm).unwrap();
                let back = decode_nm(&encode_nm(&pruned, nm).unwrap()).unwrap();
                prop_assert_eq!(back.data(), pruned.data());
            }

            #[test]
            fn prune_is_idempotent(
                nm in nm_strategy(),
                rows in 1usize..12,
                blocks in 1usize..10,
                seed in any::<u64>(),
            ) {
                let cols = blocks * nm.m();
                let x = DenseMatrix::random(rows, cols, seed);
                let once = prune_nm(&x, nm).unwrap();
                let twice = prune_nm(&once, nm).unwrap();
                prop_assert_eq!(once.data(), twice.data());
            }

            #[test]
            fn prune_bounds_row_nnz(
                nm in nm_strategy(),
                rows in 1usize..8,
                blocks in 1usize..8,
                seed in any::<u64>(),
            ) {
                let cols = blocks * nm.m();
                let p = prune_nm(&DenseMatrix::random(rows, cols, seed), nm).unwrap();
                for i in 0..rows {
                    let nnz = p.row(i).iter().filter(|v| **v != 0.0).count();
                    prop_assert!(nnz <= nm.n() * blocks);
                }
            }

            #[test]
            fn random_nm_row_nnz_is_exact(
                nm in nm_strategy(),
                rows in 1usize..8,
                blocks in 1usize..8,
                seed in any::<u64>(),
            ) {
                let cols = blocks * nm.m();
                let s = random_nm(rows, cols, nm, seed).unwrap();
                let d = decode_nm(&s).unwrap();
                for i in 0..rows {
                    let nnz = d.row(i).iter().filter(|v| **v != 0.0).count();
                    prop_assert_eq!(nnz, nm.n() * blocks);
                }
            }
        }
    }
}
