//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices here are small (at most a few hundred rows), so everything is a
//! plain row-major `Vec<Complex64>`. The Hermitian eigensolver is a cyclic
//! complex Jacobi iteration.

use num_complex::Complex64 as C64;
use std::ops::{Index, IndexMut};

use crate::error::{PstError, Result};

/// Off-diagonal Frobenius norm below which Jacobi iteration stops.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;

pub type CVector = Vec<C64>;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self { rows, cols, data: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[CVector]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (r, v) in col.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> CVector {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> CVector {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    /// Submatrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn unit(dim: usize, k: usize) -> CVector {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[k] = C64::new(1.0, 0.0);
    v
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    pub sweeps: usize,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k)
    }

    /// `V f(D) V^dagger` for a scalar function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&e| f(e)).collect();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|e| C64::new(e, 0.0))
    }
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic complex Jacobi diagonalization of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary and then applies the usual real symmetric rotation. Iteration
/// stops once the off-diagonal norm drops below `JACOBI_TOLERANCE` (relative
/// to the matrix norm when that exceeds one).
pub fn eigh(matrix: &CMatrix) -> Result<Eigen> {
    if !matrix.is_square() {
        return Err(PstError::Dimension { expected: matrix.rows(), found: matrix.cols() });
    }
    let n = matrix.rows();
    let mut a = matrix.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);
    let threshold = JACOBI_TOLERANCE * scale;

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a);
    while off > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(PstError::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        off = off_diagonal_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Eigen { values, vectors, sweeps })
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let n = a.rows();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / g;

    let theta = (aqq - app) / (2.0 * g);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        0.0
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // Rotation V restricted to (p, q):
    //   [ c              s            ]
    //   [ -s e^{-i phi}  c e^{-i phi} ]
    let e = phase.conj();
    let vpp = C64::new(c, 0.0);
    let vpq = C64::new(s, 0.0);
    let vqp = e * (-s);
    let vqq = e * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * vpp + akq * vqp;
        a[(k, q)] = akp * vpq + akq * vqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = vpp.conj() * apk + vqp.conj() * aqk;
        a[(q, k)] = vpq.conj() * apk + vqq.conj() * aqk;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(app - t * g, 0.0);
    a[(q, q)] = C64::new(aqq + t * g, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * vpp + vkq * vqp;
        v[(k, q)] = vkp * vpq + vkq * vqq;
    }
}

/// Principal value of the argument in `(-pi, pi]`.
pub fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonalizes_pauli_y() {
        let m = CMatrix::from_fn(2, 2, |r, cc| match (r, cc) {
            (0, 1) => c(0.0, -1.0),
            (1, 0) => c(0.0, 1.0),
            _ => c(0.0, 0.0),
        });
        let e = eigh(&m).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        assert!(e.reconstruct().sub(&m).max_abs() < 1e-14);
    }

    #[test]
    fn handles_degenerate_and_diagonal_input() {
        let m = CMatrix::from_real(3, 3, &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, -1.0]);
        let e = eigh(&m).unwrap();
        assert_eq!(e.sweeps, 0);
        assert_eq!(e.values, vec![-1.0, 2.0, 2.0]);
    }

    #[test]
    fn reconstructs_complex_hermitian() {
        let n = 7;
        let m = CMatrix::from_fn(n, n, |r, cc| {
            let (i, j) = (r.min(cc) as f64, r.max(cc) as f64);
            let re = (1.3 * i + 0.7 * j).sin() * 3.0;
            let im = if r == cc { 0.0 } else { (0.4 * i - 1.1 * j).cos() };
            if r <= cc { c(re, im) } else { c(re, -im) }
        });
        let e = eigh(&m).unwrap();
        assert!(e.reconstruct().sub(&m).max_abs() < 1e-12);
        let gram = e.vectors.adjoint().matmul(&e.vectors);
        assert!(gram.sub(&CMatrix::identity(n)).max_abs() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_rectangular() {
        assert!(matches!(eigh(&CMatrix::zeros(2, 3)), Err(PstError::Dimension { .. })));
    }

    #[test]
    fn principal_arg_maps_negative_real_axis_to_pi() {
        assert_eq!(principal_arg(c(-1.0, -0.0)), std::f64::consts::PI);
        assert_eq!(principal_arg(c(-1.0, 0.0)), std::f64::consts::PI);
    }
}
