//! Small dense linear algebra used by the Newton solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves the dense real system `a·x = b` (row-major `a`).
pub fn solve_real(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_row_slice(n, n, a);
    let rhs = DVector::from_column_slice(b);
    m.lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Domain("singular linear system".into()))
}

/// Determinant by Gaussian elimination with partial pivoting (row-major input).
pub fn det_complex(a: &[Complex64], n: usize) -> Complex64 {
    let mut m = a.to_vec();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].norm().total_cmp(&m[j * n + col].norm()))
            .unwrap();
        let p = m[pivot * n + col];
        if p.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        det *= p;
        for row in col + 1..n {
            let factor = m[row * n + col] / p;
            if factor.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = m[col * n + k];
                m[row * n + k] -= factor * v;
            }
        }
    }
    det
}

/// Row-major `n×n` complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.n + col] = v;
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.n).map(|r| self.get(r, col)).collect()
    }

    pub fn det(&self) -> Complex64 {
        det_complex(&self.data, self.n)
    }

    pub fn conj(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn inverse(&self) -> Option<Self> {
        let inv = self.to_nalgebra().try_inverse()?;
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(i, j, inv[(i, j)]);
            }
        }
        Some(out)
    }

    pub fn min_singular_value(&self) -> f64 {
        self.to_nalgebra()
            .singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
