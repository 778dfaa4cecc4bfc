//! Small dense complex matrices.
//!
//! The dimensions in play are 2, 4, and 8, so everything here is written for
//! reliability at tiny sizes rather than throughput: row-major storage,
//! straightforward O(n^3) products, and a cyclic complex Jacobi eigensolver
//! for Hermitian matrices from which operator norms are derived.

use num_complex::Complex64;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
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
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows must be square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations,
    /// ascending. The input is symmetrized first; callers guard hermiticity.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.clone();
        // Work on (A + A*)/2 so roundoff asymmetry cannot stall convergence.
        let adj = a.adjoint();
        a = a.add(&adj).scale(Complex64::new(0.5, 0.0));

        let off = |m: &CMatrix| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += m[(i, j)].norm_sqr();
                    }
                }
            }
            s.sqrt()
        };
        let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
        for _sweep in 0..60 {
            if off(&a) <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.norm() <= 1e-18 * scale {
                        continue;
                    }
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let phase = apq / apq.norm();
                    let theta = 0.5 * (2.0 * apq.norm()).atan2(app - aqq);
                    let (c, s) = (theta.cos(), theta.sin());
                    // G = [[c, -s e^{i phi}], [s e^{-i phi}, c]] applied as G* A G.
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * c + akq * s * phase.conj();
                        a[(k, q)] = -akp * s * phase + akq * c;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = apk * c + aqk * s * phase;
                        a[(q, k)] = -apk * s * phase.conj() + aqk * c;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }

    /// Operator (spectral) norm: sqrt of the largest eigenvalue of A* A.
    pub fn operator_norm(&self) -> f64 {
        let gram = self.adjoint().mul(self);
        let eig = gram.hermitian_eigenvalues();
        eig.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    /// JSON encoding: array of rows, each entry a `[re, im]` pair.
    pub fn to_json(&self) -> Value {
        Value::Array(
            (0..self.n)
                .map(|i| {
                    Value::Array(
                        (0..self.n)
                            .map(|j| {
                                let c = self[(i, j)];
                                Value::Array(vec![c.re.into(), c.im.into()])
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let rows = value
            .as_array()
            .ok_or_else(|| Error::InvalidInput("matrix JSON must be an array of rows".into()))?;
        let n = rows.len();
        let mut m = CMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|r| r.len() == n)
                .ok_or_else(|| Error::InvalidInput(format!("row {i} is not length {n}")))?;
            for (j, entry) in row.iter().enumerate() {
                let pair = entry
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("entry ({i},{j}) is not a [re, im] pair"))
                    })?;
                let re = pair[0]
                    .as_f64()
                    .ok_or_else(|| Error::InvalidInput(format!("entry ({i},{j}) re not a number")))?;
                let im = pair[1]
                    .as_f64()
                    .ok_or_else(|| Error::InvalidInput(format!("entry ({i},{j}) im not a number")))?;
                m[(i, j)] = Complex64::new(re, im);
            }
        }
        Ok(m)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}
