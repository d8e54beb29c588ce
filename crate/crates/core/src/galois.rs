//! Arithmetic over GF(2^m) for 1 <= m <= 8 and dense matrices over it.
//!
//! Every field is built once from a fixed primitive polynomial and shared as a
//! `&'static GaloisField`, so matrices can carry their field without lifetimes.
//! Multiplication and inversion go through log/antilog tables.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

/// Primitive polynomials indexed by `m - 1`. The generator is `x` (value 2),
/// except for GF(2) where the multiplicative group is trivial.
const PRIMITIVE_POLYS: [u16; 8] = [
    0b11,        // x + 1
    0b111,       // x^2 + x + 1
    0b1011,      // x^3 + x + 1
    0b1_0011,    // x^4 + x + 1
    0b10_0101,   // x^5 + x^2 + 1
    0b100_0011,  // x^6 + x + 1
    0b1000_0011, // x^7 + x + 1
    0x11D,       // x^8 + x^4 + x^3 + x^2 + 1
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaloisError {
    #[error("unsupported field GF(2^{0}); m must be in 1..=8")]
    UnsupportedBits(u32),
    #[error("field order {0} is not 2^m with 1 <= m <= 8")]
    UnsupportedOrder(usize),
    #[error("value {value} is not an element of GF({order})")]
    OutOfRange { value: u32, order: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("vandermonde points must be nonzero")]
    ZeroPoint,
    #[error("vandermonde point {0} appears more than once")]
    DuplicatePoint(u8),
    #[error("vandermonde matrix needs at least one row and one point")]
    EmptyVandermonde,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrices are over different fields")]
    FieldMismatch,
}

/// An element of some GF(2^m), stored by its polynomial-basis representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FieldElem(pub u8);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// GF(2^m) with log/antilog tables.
pub struct GaloisField {
    bits: u32,
    poly: u16,
    // exp is doubled so that exp[log a + log b] never needs a reduction.
    exp: [u8; 512],
    log: [u8; 256],
}

static FIELDS: OnceLock<Vec<GaloisField>> = OnceLock::new();

impl GaloisField {
    fn build(bits: u32) -> GaloisField {
        let poly = PRIMITIVE_POLYS[bits as usize - 1];
        let order = 1usize << bits;
        let group = order - 1;
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u16 = 1;
        for (i, slot) in exp.iter_mut().enumerate().take(group) {
            *slot = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & (1 << bits) != 0 {
                x ^= poly;
            }
            if bits == 1 {
                // GF(2): the only nonzero element is 1.
                x = 1;
            }
        }
        for i in group..512 {
            exp[i] = exp[i % group];
        }
        GaloisField {
            bits,
            poly,
            exp,
            log,
        }
    }

    /// The shared instance of GF(2^bits).
    pub fn with_bits(bits: u32) -> Result<&'static GaloisField, GaloisError> {
        if !(1..=8).contains(&bits) {
            return Err(GaloisError::UnsupportedBits(bits));
        }
        let fields = FIELDS.get_or_init(|| (1..=8).map(GaloisField::build).collect());
        Ok(&fields[bits as usize - 1])
    }

    /// The shared instance of GF(q).
    pub fn with_order(order: usize) -> Result<&'static GaloisField, GaloisError> {
        if !(2..=256).contains(&order) || !order.is_power_of_two() {
            return Err(GaloisError::UnsupportedOrder(order));
        }
        Self::with_bits(order.trailing_zeros())
    }

    pub fn gf16() -> &'static GaloisField {
        Self::with_bits(4).expect("GF(16) is supported")
    }

    pub fn gf256() -> &'static GaloisField {
        Self::with_bits(8).expect("GF(256) is supported")
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn order(&self) -> usize {
        1 << self.bits
    }

    /// Reduction polynomial including the leading term.
    pub fn polynomial(&self) -> u16 {
        self.poly
    }

    /// Checked conversion from an integer representation.
    pub fn elem(&self, value: u32) -> Result<FieldElem, GaloisError> {
        if (value as usize) < self.order() {
            Ok(FieldElem(value as u8))
        } else {
            Err(GaloisError::OutOfRange {
                value,
                order: self.order(),
            })
        }
    }

    /// All elements `0..q` in representation order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElem> {
        (0..self.order()).map(|v| FieldElem(v as u8))
    }

    #[inline]
    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        FieldElem(a.0 ^ b.0)
    }

    /// Same as `add` in characteristic 2.
    #[inline]
    pub fn sub(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        FieldElem(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if a.0 == 0 || b.0 == 0 {
            return FieldElem::ZERO;
        }
        let idx = self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize;
        FieldElem(self.exp[idx])
    }

    pub fn inv(&self, a: FieldElem) -> Result<FieldElem, GaloisError> {
        if a.0 == 0 {
            return Err(GaloisError::DivisionByZero);
        }
        let group = self.order() - 1;
        let l = self.log[a.0 as usize] as usize;
        Ok(FieldElem(self.exp[(group - l) % group]))
    }

    pub fn div(&self, a: FieldElem, b: FieldElem) -> Result<FieldElem, GaloisError> {
        let b_inv = self.inv(b)?;
        Ok(self.mul(a, b_inv))
    }

    /// `a^e`, with `0^0 = 1`.
    pub fn pow(&self, a: FieldElem, e: u32) -> FieldElem {
        if e == 0 {
            return FieldElem::ONE;
        }
        if a.0 == 0 {
            return FieldElem::ZERO;
        }
        let group = (self.order() - 1) as u64;
        let l = self.log[a.0 as usize] as u64 * e as u64 % group;
        FieldElem(self.exp[l as usize])
    }
}

impl fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}; poly={:#x})", self.bits, self.poly)
    }
}

/// Dense row-major matrix over a fixed field.
#[derive(Clone)]
pub struct Matrix {
    field: &'static GaloisField,
    rows: usize,
    cols: usize,
    data: Vec<FieldElem>,
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.field.bits == other.field.bits
            && self.rows == other.rows
            && self.cols == other.cols
            && self.data == other.data
    }
}

impl Eq for Matrix {}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix[{}x{} over GF({})]", self.rows, self.cols, self.field.order())?;
        let mut list = f.debug_list();
        for r in 0..self.rows {
            list.entry(&self.row(r).iter().map(|e| e.0).collect::<Vec<_>>());
        }
        list.finish()
    }
}

impl Matrix {
    pub fn zeros(field: &'static GaloisField, rows: usize, cols: usize) -> Matrix {
        Matrix {
            field,
            rows,
            cols,
            data: vec![FieldElem::ZERO; rows * cols],
        }
    }

    pub fn identity(field: &'static GaloisField, size: usize) -> Matrix {
        let mut m = Matrix::zeros(field, size, size);
        for i in 0..size {
            m.set(i, i, FieldElem::ONE);
        }
        m
    }

    /// Builds a matrix from integer rows, validating the shape and the values.
    pub fn from_rows(field: &'static GaloisField, rows: &[Vec<u32>]) -> Result<Matrix, GaloisError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(GaloisError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for &v in row {
                data.push(field.elem(v)?);
            }
        }
        Ok(Matrix {
            field,
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_elems(
        field: &'static GaloisField,
        rows: usize,
        cols: usize,
        data: Vec<FieldElem>,
    ) -> Result<Matrix, GaloisError> {
        if data.len() != rows * cols {
            return Err(GaloisError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let order = field.order();
        if let Some(bad) = data.iter().find(|e| e.0 as usize >= order) {
            return Err(GaloisError::OutOfRange {
                value: bad.0 as u32,
                order,
            });
        }
        Ok(Matrix {
            field,
            rows,
            cols,
            data,
        })
    }

    pub fn field(&self) -> &'static GaloisField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FieldElem {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldElem) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [FieldElem] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|e| e.0).collect())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|e| e.is_zero())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Submatrix from explicit row and column index lists (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.field, rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out.set(i, j, self.get(r, c));
            }
        }
        out
    }

    /// Rows `start..end`.
    pub fn row_range(&self, start: usize, end: usize) -> Matrix {
        let rows: Vec<usize> = (start..end).collect();
        let cols: Vec<usize> = (0..self.cols).collect();
        self.select(&rows, &cols)
    }

    /// Columns `start..end`.
    pub fn col_range(&self, start: usize, end: usize) -> Matrix {
        let rows: Vec<usize> = (0..self.rows).collect();
        let cols: Vec<usize> = (start..end).collect();
        self.select(&rows, &cols)
    }

    fn check_field(&self, other: &Matrix) -> Result<(), GaloisError> {
        if self.field.bits != other.field.bits {
            return Err(GaloisError::FieldMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, GaloisError> {
        self.check_field(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(GaloisError::DimensionMismatch(format!(
                "{}x{} + {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| self.field.add(a, b))
            .collect();
        Ok(Matrix { data, ..self.clone() })
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, GaloisError> {
        self.check_field(other)?;
        if self.cols != other.rows {
            return Err(GaloisError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = self.field;
        let mut out = Matrix::zeros(f, self.rows, other.cols);
        for r in 0..self.rows {
            for t in 0..self.cols {
                let a = self.get(r, t);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let v = f.add(out.get(r, c), f.mul(a, other.get(t, c)));
                    out.set(r, c, v);
                }
            }
        }
        Ok(out)
    }

    fn scale_row(&mut self, r: usize, factor: FieldElem) {
        let f = self.field;
        for v in self.row_mut(r) {
            *v = f.mul(*v, factor);
        }
    }

    /// `row[dst] += factor * row[src]`
    fn axpy_row(&mut self, dst: usize, src: usize, factor: FieldElem) {
        if factor.is_zero() {
            return;
        }
        let f = self.field;
        let cols = self.cols;
        for c in 0..cols {
            let v = f.add(self.data[dst * cols + c], f.mul(factor, self.data[src * cols + c]));
            self.data[dst * cols + c] = v;
        }
    }

    /// In-place reduced row echelon form over the first `pivot_cols` columns.
    /// Pivots are chosen as the first nonzero entry scanning rows top-down.
    /// Returns the pivot column of each pivot row, in order.
    pub fn rref_in_place(&mut self, pivot_cols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..pivot_cols.min(self.cols) {
            if row == self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&r| !self.get(r, col).is_zero()) else {
                continue;
            };
            if p != row {
                for c in 0..self.cols {
                    self.data.swap(p * self.cols + c, row * self.cols + c);
                }
            }
            let inv = self.field.inv(self.get(row, col)).expect("pivot is nonzero");
            self.scale_row(row, inv);
            for r in 0..self.rows {
                if r != row {
                    let factor = self.get(r, col);
                    self.axpy_row(r, row, factor);
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref_in_place(self.cols).len()
    }

    pub fn determinant(&self) -> Result<FieldElem, GaloisError> {
        if self.rows != self.cols {
            return Err(GaloisError::DimensionMismatch(format!(
                "determinant of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let f = self.field;
        let mut m = self.clone();
        let mut det = FieldElem::ONE;
        for col in 0..m.cols {
            let Some(p) = (col..m.rows).find(|&r| !m.get(r, col).is_zero()) else {
                return Ok(FieldElem::ZERO);
            };
            if p != col {
                // Row swaps flip the sign, which is a no-op in characteristic 2.
                for c in 0..m.cols {
                    m.data.swap(p * m.cols + c, col * m.cols + c);
                }
            }
            let pivot = m.get(col, col);
            det = f.mul(det, pivot);
            let inv = f.inv(pivot)?;
            for r in col + 1..m.rows {
                let factor = f.mul(m.get(r, col), inv);
                m.axpy_row(r, col, factor);
            }
        }
        Ok(det)
    }
}

/// `rows x points.len()` Vandermonde matrix with entry `(i, j) = points[j]^i`.
pub fn vandermonde(
    field: &'static GaloisField,
    points: &[FieldElem],
    rows: usize,
) -> Result<Matrix, GaloisError> {
    if rows == 0 || points.is_empty() {
        return Err(GaloisError::EmptyVandermonde);
    }
    let mut seen = [false; 256];
    for &p in points {
        if p.is_zero() {
            return Err(GaloisError::ZeroPoint);
        }
        if p.0 as usize >= field.order() {
            return Err(GaloisError::OutOfRange {
                value: p.0 as u32,
                order: field.order(),
            });
        }
        if std::mem::replace(&mut seen[p.0 as usize], true) {
            return Err(GaloisError::DuplicatePoint(p.0));
        }
    }
    let mut m = Matrix::zeros(field, rows, points.len());
    for (j, &p) in points.iter().enumerate() {
        let mut acc = FieldElem::ONE;
        for i in 0..rows {
            m.set(i, j, acc);
            acc = field.mul(acc, p);
        }
    }
    Ok(m)
}

/// Solves the square system `a x = b` for one or more right-hand-side columns.
///
/// Returns `Ok(None)` when `a` is singular.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Option<Matrix>, GaloisError> {
    a.check_field(b)?;
    if a.rows != a.cols || b.rows != a.rows {
        return Err(GaloisError::DimensionMismatch(format!(
            "solve with a {}x{} system and {} right-hand rows",
            a.rows, a.cols, b.rows
        )));
    }
    let n = a.rows;
    let mut aug = augment(a, b);
    let pivots = aug.rref_in_place(n);
    if pivots.len() < n {
        return Ok(None);
    }
    Ok(Some(aug.col_range(n, n + b.cols)))
}

/// Solves a consistent, possibly non-square system `a x = b` for the unknowns
/// listed in `targets` only.
///
/// Returns `Ok(None)` unless every target unknown is uniquely determined; the
/// remaining unknowns may stay underdetermined. On success row `i` of the result
/// holds the value of unknown `targets[i]`.
pub fn solve_for_unknowns(
    a: &Matrix,
    b: &Matrix,
    targets: &[usize],
) -> Result<Option<Matrix>, GaloisError> {
    a.check_field(b)?;
    if b.rows != a.rows {
        return Err(GaloisError::DimensionMismatch(format!(
            "{} equations but {} right-hand rows",
            a.rows, b.rows
        )));
    }
    let mut is_target = vec![false; a.cols];
    for &t in targets {
        if t >= a.cols || std::mem::replace(&mut is_target[t], true) {
            return Err(GaloisError::DimensionMismatch(format!(
                "invalid or repeated target unknown {t}"
            )));
        }
    }
    // Order columns as [others.., targets..]: a target is determined exactly
    // when its column is a pivot of the reduced form.
    let mut order: Vec<usize> = (0..a.cols).filter(|&c| !is_target[c]).collect();
    let first_target = order.len();
    order.extend_from_slice(targets);
    let all_rows: Vec<usize> = (0..a.rows).collect();
    let reordered = a.select(&all_rows, &order);
    let mut aug = augment(&reordered, b);
    let pivots = aug.rref_in_place(a.cols);
    let mut out = Matrix::zeros(a.field, targets.len(), b.cols);
    for i in 0..targets.len() {
        let col = first_target + i;
        let Some(row) = pivots.iter().position(|&p| p == col) else {
            return Ok(None);
        };
        for c in 0..b.cols {
            out.set(i, c, aug.get(row, a.cols + c));
        }
    }
    Ok(Some(out))
}

fn augment(a: &Matrix, b: &Matrix) -> Matrix {
    let cols = a.cols + b.cols;
    let mut m = Matrix::zeros(a.field, a.rows, cols);
    for r in 0..a.rows {
        m.row_mut(r)[..a.cols].copy_from_slice(a.row(r));
        m.row_mut(r)[a.cols..].copy_from_slice(b.row(r));
    }
    m
}
