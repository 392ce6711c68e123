//! Schatten p-norms of small dense matrices.
//!
//! Spectra are computed with cyclic Jacobi iterations: the classical two-sided
//! variant for symmetric eigenproblems and the one-sided (Hestenes) variant
//! for singular values. The one-sided sweep applies the Jacobi rotations of
//! the Gram matrix `MᵀM` directly to the columns of `M`, which keeps small
//! singular values accurate to roundoff instead of to its square root.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

const MAX_SWEEPS: usize = 64;

/// Exponent of an ℓ^p or Schatten norm: a real `p >= 1` or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PExponent {
    Finite(f64),
    Infinity,
}

impl PExponent {
    pub const ONE: PExponent = PExponent::Finite(1.0);
    pub const TWO: PExponent = PExponent::Finite(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(PExponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(PExponent::Finite(p))
        } else {
            Err(Error::invalid(format!("exponent must be >= 1 or inf, got {p}")))
        }
    }

    /// The conjugate exponent `p*` with `1/p + 1/p* = 1`.
    pub fn conjugate(self) -> PExponent {
        match self {
            PExponent::Infinity => PExponent::ONE,
            PExponent::Finite(p) if p == 1.0 => PExponent::Infinity,
            PExponent::Finite(p) => PExponent::Finite(p / (p - 1.0)),
        }
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            PExponent::Infinity => 0.0,
            PExponent::Finite(p) => 1.0 / p,
        }
    }

    /// ℓ^p norm of a vector.
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            PExponent::Infinity => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            PExponent::Finite(p) if p == 1.0 => v.iter().map(|x| x.abs()).sum(),
            PExponent::Finite(p) if p == 2.0 => {
                // scaled to avoid overflow on large entries
                let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
            }
            PExponent::Finite(p) => {
                let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                scale * v.iter().map(|x| (x.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PExponent::Infinity => write!(f, "inf"),
            PExponent::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl std::str::FromStr for PExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(PExponent::Infinity);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse exponent '{s}'")))?;
        PExponent::new(p)
    }
}

impl Serialize for PExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PExponent::Infinity => s.serialize_str("inf"),
            PExponent::Finite(p) => s.serialize_f64(*p),
        }
    }
}

impl<'de> Deserialize<'de> for PExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            serde_json::Value::Number(n) => {
                PExponent::new(n.as_f64().unwrap_or(f64::NAN)).map_err(serde::de::Error::custom)
            }
            _ => Err(serde::de::Error::custom("exponent must be a number or \"inf\"")),
        }
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl GeneralMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::invalid("matrix must have positive dimension"));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::invalid("matrix must be square"));
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(dim, entries)
    }

    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::invalid("entry count does not match dimension"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(GeneralMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        GeneralMatrix { dim, entries }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::identity(values.len());
        for (i, v) in values.iter().enumerate() {
            m.entries[i * values.len() + i] = *v;
        }
        m
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::invalid("outer product of vectors of different length"));
        }
        let entries = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        Self::from_row_major(u.len(), entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        GeneralMatrix { dim: n, entries }
    }

    pub fn mul(&self, other: &GeneralMatrix) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        GeneralMatrix { dim: n, entries }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `Tr(Mᵀ N)`.
    pub fn frobenius_dot(&self, other: &GeneralMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        PExponent::TWO.norm(&self.entries)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&x, &y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs()))
                .unwrap();
            if a[piv * n + c] == 0.0 {
                return 0.0;
            }
            if piv != c {
                for j in 0..n {
                    a.swap(piv * n + j, c * n + j);
                }
                det = -det;
            }
            let p = a[c * n + c];
            det *= p;
            for r in c + 1..n {
                let f = a[r * n + c] / p;
                for j in c..n {
                    a[r * n + j] -= f * a[c * n + j];
                }
            }
        }
        det
    }
}

/// Dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: GeneralMatrix,
}

impl SymMatrix {
    /// Builds a symmetric matrix; entries must agree exactly across the diagonal.
    pub fn new(m: GeneralMatrix) -> Result<Self> {
        let n = m.dim();
        for i in 0..n {
            for j in i + 1..n {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::invalid("matrix is not symmetric"));
                }
            }
        }
        Ok(SymMatrix { inner: m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(GeneralMatrix::from_rows(rows)?)
    }

    /// Symmetric part `(M + Mᵀ)/2`.
    pub fn symmetrize(m: &GeneralMatrix) -> Self {
        let n = m.dim();
        let mut s = m.clone();
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        SymMatrix { inner: s }
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix { inner: GeneralMatrix::diag(values) }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_general(&self) -> &GeneralMatrix {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Eigenvalues, sorted nonincreasing.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Eigenvalues (nonincreasing) and orthonormal eigenvectors stored as columns.
    pub fn eigen(&self) -> (Vec<f64>, GeneralMatrix) {
        jacobi_eigen(&self.inner)
    }
}

fn jacobi_eigen(m: &GeneralMatrix) -> (Vec<f64>, GeneralMatrix) {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = GeneralMatrix::identity(n);
    let fro = m.frobenius_norm();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * fro || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vecs = GeneralMatrix::identity(n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs.set(k, col, v.get(k, src));
        }
    }
    (values, vecs)
}

/// Singular values, sorted nonincreasing.
pub fn singular_values(m: &GeneralMatrix) -> Vec<f64> {
    let n = m.dim();
    // columns of m, rotated in place until mutually orthogonal
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let x = cols[p][k];
                    let y = cols[q][k];
                    cols[p][k] = c * x - s * y;
                    cols[q][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| PExponent::TWO.norm(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Schatten p-norm: the ℓ^p norm of the singular values.
pub fn schatten_norm(m: &GeneralMatrix, p: PExponent) -> f64 {
    p.norm(&singular_values(m))
}

/// Schatten norm of a symmetric matrix through its eigenvalues.
pub fn schatten_norm_sym(m: &SymMatrix, p: PExponent) -> f64 {
    p.norm(&m.eigenvalues())
}

/// Comparison of `|Tr M|` with the nuclear norm of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceGap {
    pub trace: f64,
    pub s1: f64,
    /// `|Tr M| == |M|_1` within `1e-10 (1 + |M|_1)`.
    pub equality: bool,
    /// Common sign of the eigenvalues when `equality` holds (0 for the zero matrix).
    pub definite_sign: i8,
}

pub fn trace_schatten_gap(m: &SymMatrix) -> TraceGap {
    let eig = m.eigenvalues();
    let s1 = PExponent::ONE.norm(&eig);
    let trace = m.trace();
    let tol = 1e-10 * (1.0 + s1);
    let equality = (s1 - trace.abs()).abs() <= tol;
    let definite_sign = if !equality || s1 <= tol {
        0
    } else if trace > 0.0 {
        1
    } else {
        -1
    };
    TraceGap { trace, s1, equality, definite_sign }
}
