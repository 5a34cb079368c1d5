//! Vectors and matrices over Z_q.
//!
//! Entries are stored in the canonical range `[0, q)`. The centered lift maps
//! a residue into `(-q/2, q/2]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ZqError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("modulus mismatch: {0} vs {1}")]
    Modulus(u32, u32),
    #[error("entry {value} is outside [0, {q})")]
    OutOfRange { value: u32, q: u32 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("modulus must be at least 2")]
    BadModulus,
}

/// Reduces a signed integer into `[0, q)`.
#[inline]
pub fn reduce(x: i64, q: u32) -> u32 {
    x.rem_euclid(q as i64) as u32
}

/// Centered representative in `(-q/2, q/2]`.
#[inline]
pub fn center(x: u32, q: u32) -> i64 {
    let x = x as i64;
    let q = q as i64;
    if x > q / 2 {
        x - q
    } else {
        x
    }
}

pub fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= q as u64 {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn mod_pow(mut b: u64, mut e: u64, q: u64) -> u64 {
    let mut acc = 1u64 % q;
    b %= q;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % q;
        }
        b = b * b % q;
        e >>= 1;
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZqVec {
    q: u32,
    entries: Vec<u32>,
}

impl ZqVec {
    pub fn zeros(len: usize, q: u32) -> Self {
        ZqVec {
            q,
            entries: vec![0; len],
        }
    }

    /// Builds a vector from canonical entries, rejecting anything `>= q`.
    pub fn new(entries: Vec<u32>, q: u32) -> Result<Self, ZqError> {
        if q < 2 {
            return Err(ZqError::BadModulus);
        }
        if let Some(&value) = entries.iter().find(|&&v| v >= q) {
            return Err(ZqError::OutOfRange { value, q });
        }
        Ok(ZqVec { q, entries })
    }

    /// Reduces arbitrary signed values mod q.
    pub fn from_signed(values: &[i64], q: u32) -> Self {
        ZqVec {
            q,
            entries: values.iter().map(|&v| reduce(v, q)).collect(),
        }
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> u32 {
        self.entries[i]
    }

    pub fn set(&mut self, i: usize, v: i64) {
        self.entries[i] = reduce(v, self.q);
    }

    pub fn centered(&self) -> Vec<i64> {
        self.entries.iter().map(|&v| center(v, self.q)).collect()
    }

    /// Infinity norm of the centered lift.
    pub fn inf_norm(&self) -> i64 {
        self.centered().iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &ZqVec) -> Result<ZqVec, ZqError> {
        self.check_compat(other)?;
        let q = self.q as u64;
        Ok(ZqVec {
            q: self.q,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| ((a as u64 + b as u64) % q) as u32)
                .collect(),
        })
    }

    pub fn dot(&self, other: &ZqVec) -> Result<u32, ZqError> {
        self.check_compat(other)?;
        let q = self.q as u64;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .fold(0u64, |acc, (&a, &b)| (acc + a as u64 * b as u64) % q) as u32)
    }

    fn check_compat(&self, other: &ZqVec) -> Result<(), ZqError> {
        if self.q != other.q {
            return Err(ZqError::Modulus(self.q, other.q));
        }
        if self.len() != other.len() {
            return Err(ZqError::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }

    /// Little-endian 16-bit encoding per coefficient.
    pub fn to_le16(&self) -> Vec<u8> {
        debug_assert!(self.q <= 1 << 16);
        self.entries
            .iter()
            .flat_map(|&v| (v as u16).to_le_bytes())
            .collect()
    }

    pub fn from_le16(bytes: &[u8], q: u32) -> Result<Self, ZqError> {
        if !bytes.len().is_multiple_of(2) {
            return Err(ZqError::Dimension {
                expected: bytes.len() + 1,
                got: bytes.len(),
            });
        }
        let entries = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect();
        ZqVec::new(entries, q)
    }
}

/// Dense row-major matrix over Z_q.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZqMat {
    q: u32,
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

impl ZqMat {
    pub fn zeros(rows: usize, cols: usize, q: u32) -> Self {
        ZqMat {
            q,
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize, q: u32) -> Self {
        let mut m = Self::zeros(n, n, q);
        for i in 0..n {
            m.entries[i * n + i] = 1 % q;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>], q: u32) -> Result<Self, ZqError> {
        if q < 2 {
            return Err(ZqError::BadModulus);
        }
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(ZqError::Dimension {
                    expected: c,
                    got: row.len(),
                });
            }
            entries.extend(row.iter().map(|&v| reduce(v, q)));
        }
        Ok(ZqMat {
            q,
            rows: r,
            cols: c,
            entries,
        })
    }

    /// Builds a matrix from canonical row-major entries.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<u32>,
        q: u32,
    ) -> Result<Self, ZqError> {
        if entries.len() != rows * cols {
            return Err(ZqError::Dimension {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        if let Some(&value) = entries.iter().find(|&&v| v >= q) {
            return Err(ZqError::OutOfRange { value, q });
        }
        Ok(ZqMat {
            q,
            rows,
            cols,
            entries,
        })
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.entries[r * self.cols + c]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul_vec(&self, v: &ZqVec) -> Result<ZqVec, ZqError> {
        if v.len() != self.cols {
            return Err(ZqError::Dimension {
                expected: self.cols,
                got: v.len(),
            });
        }
        if v.modulus() != self.q {
            return Err(ZqError::Modulus(self.q, v.modulus()));
        }
        let q = self.q as u64;
        let out = self
            .entries
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| {
                row.iter()
                    .zip(v.entries())
                    .fold(0u64, |acc, (&a, &b)| (acc + a as u64 * b as u64) % q)
                    as u32
            })
            .collect();
        Ok(ZqVec {
            q: self.q,
            entries: out,
        })
    }

    /// `selfᵀ · v`.
    pub fn transpose_mul_vec(&self, v: &ZqVec) -> Result<ZqVec, ZqError> {
        if v.len() != self.rows {
            return Err(ZqError::Dimension {
                expected: self.rows,
                got: v.len(),
            });
        }
        let q = self.q as u64;
        let mut acc = vec![0u64; self.cols];
        for (r, &vr) in v.entries().iter().enumerate() {
            let row = &self.entries[r * self.cols..(r + 1) * self.cols];
            for (a, &m) in acc.iter_mut().zip(row) {
                *a = (*a + m as u64 * vr as u64) % q;
            }
        }
        Ok(ZqVec {
            q: self.q,
            entries: acc.into_iter().map(|x| x as u32).collect(),
        })
    }

    pub fn mul(&self, other: &ZqMat) -> Result<ZqMat, ZqError> {
        if self.cols != other.rows {
            return Err(ZqError::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        if self.q != other.q {
            return Err(ZqError::Modulus(self.q, other.q));
        }
        let q = self.q as u64;
        let mut out = ZqMat::zeros(self.rows, other.cols, self.q);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0u64;
                for l in 0..self.cols {
                    acc = (acc + self.get(i, l) as u64 * other.get(l, j) as u64) % q;
                }
                out.entries[i * other.cols + j] = acc as u32;
            }
        }
        Ok(out)
    }

    pub fn pow(&self, mut e: u64) -> Result<ZqMat, ZqError> {
        if !self.is_square() {
            return Err(ZqError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut base = self.clone();
        let mut acc = ZqMat::identity(self.rows, self.q);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            base = base.mul(&base)?;
            e >>= 1;
        }
        Ok(acc)
    }

    /// Induced infinity norm (max absolute row sum) of the centered lift.
    pub fn centered_inf_norm(&self) -> i64 {
        self.entries
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().map(|&v| center(v, self.q).abs()).sum())
            .max()
            .unwrap_or(0)
    }

    /// Determinant mod q by Gaussian elimination. Requires q prime.
    pub fn det_mod(&self) -> Result<u32, ZqError> {
        if !self.is_square() {
            return Err(ZqError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let q = self.q as u64;
        let mut a: Vec<u64> = self.entries.iter().map(|&v| v as u64).collect();
        let mut det = 1u64;
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&r| a[r * n + col] != 0) else {
                return Ok(0);
            };
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                det = (q - det) % q;
            }
            let p = a[col * n + col];
            det = det * p % q;
            let inv = mod_pow(p, q - 2, q);
            for r in col + 1..n {
                let f = a[r * n + col] * inv % q;
                if f == 0 {
                    continue;
                }
                for j in col..n {
                    let sub = f * a[col * n + j] % q;
                    a[r * n + j] = (a[r * n + j] + q - sub) % q;
                }
            }
        }
        Ok(det as u32)
    }

    pub fn to_le16(&self) -> Vec<u8> {
        self.entries
            .iter()
            .flat_map(|&v| (v as u16).to_le_bytes())
            .collect()
    }
}
