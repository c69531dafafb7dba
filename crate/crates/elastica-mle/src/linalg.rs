//! Small dense matrices and a cyclic Jacobi eigensolver.
//!
//! Everything is sized for the interaction dimension `d` (a handful of
//! coordinates) or for test-scale block matrices up to a few thousand rows.
//! Robustness beats asymptotics at these sizes, hence Jacobi rotations
//! instead of a QR pipeline, and dense row-major storage throughout.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    dim: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        Mat { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { dim, data })
    }

    pub(crate) fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Mat { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let d = self.dim;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}×{0} by {}×{1}",
                self.dim, other.dim
            )));
        }
        let d = self.dim;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.data[i * d + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += aik * other.data[k * d + j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d);
        for (row, o) in self.data.chunks_exact(d).zip(out.iter_mut()) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch("matrix subtraction with unequal dims".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Mat { dim: self.dim, data })
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { dim: self.dim, data: self.data.iter().map(|v| c * v).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Mat::from_rows(rows).map_err(D::Error::custom)
    }
}

/// Symmetric square matrix. The constructor enforces `m[i][j] == m[j][i]`
/// exactly (bitwise after `==`); everything downstream relies on that, e.g.
/// the eigensolver only reads one triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Mat);

impl SymMatrix {
    /// Build from explicit rows, rejecting anything not exactly symmetric.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = Mat::from_rows(rows)?;
        Self::from_mat(m)
    }

    fn from_mat(m: Mat) -> Result<Self> {
        let d = m.dim;
        for i in 0..d {
            for j in 0..d {
                let v = m.data[i * d + j];
                if !v.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "matrix entry ({i},{j}) = {v} is not finite"
                    )));
                }
            }
            for j in (i + 1)..d {
                let a = m.data[i * d + j];
                let b = m.data[j * d + i];
                if a != b {
                    return Err(Error::InvalidConfig(format!(
                        "matrix not symmetric: entry ({i},{j}) = {a} but ({j},{i}) = {b}"
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// `(m + mᵀ)/2`, with both triangles filled from the same computed
    /// value so the symmetry invariant holds bit-for-bit.
    pub fn symmetrize(m: &Mat) -> SymMatrix {
        let d = m.dim;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            out.data[i * d + i] = m.data[i * d + i];
            for j in (i + 1)..d {
                let v = 0.5 * (m.data[i * d + j] + m.data[j * d + i]);
                out.data[i * d + j] = v;
                out.data[j * d + i] = v;
            }
        }
        SymMatrix(out)
    }

    /// Fill from the upper triangle of a closure; the lower triangle copies
    /// the identical value.
    pub(crate) fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> SymMatrix {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(dim: usize) -> SymMatrix {
        SymMatrix(Mat::identity(dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> SymMatrix {
        let d = diag.len();
        let mut m = Mat::zeros(d);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * d + i] = v;
        }
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.to_rows()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        self.0.matvec(x, out)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| ((i + 1)..d).all(|j| self.get(i, j) == 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let m = Mat::deserialize(deserializer)?;
        SymMatrix::from_mat(m).map_err(D::Error::custom)
    }
}

/// Eigendecomposition of a symmetric matrix: `m == vectors · diag(values) ·
/// vectorsᵀ`, eigenvalues sorted descending, eigenvectors as the columns of
/// an orthogonal matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigensolver.
///
/// Repeatedly sweeps all off-diagonal pairs, each rotation annihilating one
/// entry; quadratic convergence sets in after a few sweeps. Never fails in
/// practice at the dimensions used here (the sweep cap is pure paranoia).
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    let d = m.dim();
    let mut a = m.0.clone();
    let mut v = Mat::identity(d);

    if d == 1 {
        return Ok(SymEigen { values: vec![a.get(0, 0)], vectors: v });
    }

    let frob: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = false;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a.get(p, q).abs();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        // Early sweeps skip entries that are small relative to the whole
        // off-diagonal mass; later sweeps rotate everything nonzero, and
        // entries too small to move the diagonal get hard-zeroed.
        let thresh = if sweep < 3 { 0.2 * off / (d * d) as f64 } else { 0.0 };
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let diff = aqq - app;
                let t = if diff.abs() + g == diff.abs() {
                    // Rotation angle small enough that tan θ ≈ a_pq/diff.
                    apq / diff
                } else {
                    let tau = diff / (2.0 * apq);
                    if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..d {
                    if r != p && r != q {
                        let arp = a.get(r, p);
                        let arq = a.get(r, q);
                        let np = c * arp - s * arq;
                        let nq = s * arp + c * arq;
                        a.set(r, p, np);
                        a.set(p, r, np);
                        a.set(r, q, nq);
                        a.set(q, r, nq);
                    }
                }
                for r in 0..d {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, c * vrp - s * vrq);
                    v.set(r, q, s * vrp + c * vrq);
                }
            }
        }
    }
    if !converged {
        // If the sweep cap was exhausted, accept a residual at rounding
        // level (scaled for accumulation); anything larger is a genuine
        // failure worth surfacing.
        let off: f64 = (0..d)
            .flat_map(|p| ((p + 1)..d).map(move |q| (p, q)))
            .map(|(p, q)| a.get(p, q).abs())
            .sum();
        if off > 1e-13 * frob * d as f64 {
            return Err(Error::EigenNoConvergence(JACOBI_MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).expect("eigenvalues are finite"));
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Mat::zeros(d);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..d {
            vectors.set(r, new_col, v.get(r, old_col));
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Largest absolute eigenvalue — the spectral norm of a symmetric matrix.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    let eig = sym_eigen(m)?;
    Ok(eig.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())))
}

/// Relative condition floor below which we refuse to invert.
const SOLVE_MIN_RATIO: f64 = 1e-12;

/// Solve `m · X = rhs` for positive-definite `m` via the eigendecomposition.
///
/// Rejects matrices whose smallest eigenvalue is below `1e−12` of the
/// largest; at that point the solution would be dominated by noise in `rhs`.
pub fn sym_solve(m: &SymMatrix, rhs: &Mat) -> Result<Mat> {
    if m.dim() != rhs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "solve with {}×{0} matrix and {}×{1} rhs",
            m.dim(),
            rhs.dim()
        )));
    }
    let eig = sym_eigen(m)?;
    let lmax = eig.values[0];
    let lmin = *eig.values.last().expect("nonempty");
    if !(lmin > SOLVE_MIN_RATIO * lmax) || lmax <= 0.0 {
        let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        return Err(Error::SingularGram { condition });
    }
    // X = V diag(1/λ) Vᵀ rhs
    let vt_rhs = eig.vectors.transpose().matmul(rhs)?;
    let mut scaled = vt_rhs;
    for i in 0..m.dim() {
        let inv = 1.0 / eig.values[i];
        for j in 0..m.dim() {
            let v = scaled.get(i, j) * inv;
            scaled.set(i, j, v);
        }
    }
    eig.vectors.matmul(&scaled)
}
