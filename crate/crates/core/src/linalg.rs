//! Small dense complex linear algebra used throughout the crate.
//!
//! Hermitian factorizations go through [`Cholesky`], which optionally
//! tallies complex multiply-accumulate operations on an [`OpCounter`] so the
//! direct-inverse and matrix-free solver paths can be compared by work done.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// Tally of complex multiply-accumulate operations.
#[derive(Debug, Default)]
pub struct OpCounter {
    macs: Cell<u64>,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.macs.set(self.macs.get() + n);
    }

    pub fn get(&self) -> u64 {
        self.macs.get()
    }

    pub fn reset(&self) {
        self.macs.set(0);
    }
}

#[inline]
pub(crate) fn tick(counter: Option<&OpCounter>, n: u64) {
    if let Some(c) = counter {
        c.add(n);
    }
}

/// `aᴴ b`.
#[inline]
pub fn dot_h(a: &CVec, b: &CVec) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &CVec) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Replaces `m` by `(m + mᴴ)/2`.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// `m += weight · v vᴴ`.
pub fn add_outer(m: &mut CMat, v: &CVec, weight: f64) {
    let n = v.len();
    for j in 0..n {
        let vj = v[j].conj() * weight;
        for i in 0..n {
            m[(i, j)] += v[i] * vj;
        }
    }
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending and
/// matching eigenvectors as columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Lower-triangular Cholesky factor `A = L Lᴴ` of a Hermitian positive
/// definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMat,
}

impl Cholesky {
    /// Returns `None` when a pivot is non-positive or non-finite.
    pub fn factor(a: &CMat, counter: Option<&OpCounter>) -> Option<Self> {
        let n = a.nrows();
        let mut l = CMat::zeros(n, n);
        let mut macs = 0u64;
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            macs += j as u64;
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let ljj = d.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                macs += j as u64;
                l[(i, j)] = s / ljj;
            }
        }
        tick(counter, macs);
        Some(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &CMat {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &CVec, counter: Option<&OpCounter>) -> CVec {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        tick(counter, (n * (n + 1) / 2) as u64);
        y
    }

    /// Solves `Lᴴ x = y`.
    pub fn backward(&self, y: &CVec, counter: Option<&OpCounter>) -> CVec {
        let n = self.dim();
        let mut x = y.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)].conj() * x[k];
            }
            x[i] = s / self.l[(i, i)].re;
        }
        tick(counter, (n * (n + 1) / 2) as u64);
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &CVec, counter: Option<&OpCounter>) -> CVec {
        let y = self.forward(b, counter);
        self.backward(&y, counter)
    }

    /// `bᴴ A⁻¹ b`, real and nonnegative.
    pub fn inverse_quadratic(&self, b: &CVec) -> f64 {
        norm_sqr(&self.forward(b, None))
    }

    pub fn inverse(&self) -> CMat {
        let n = self.dim();
        let mut inv = CMat::zeros(n, n);
        for j in 0..n {
            let mut e = CVec::zeros(n);
            e[j] = Complex64::new(1.0, 0.0);
            inv.set_column(j, &self.solve(&e, None));
        }
        inv
    }
}

/// Ratio of extreme eigenvalues, used to report near-singular inputs.
pub fn condition_estimate(m: &CMat) -> f64 {
    let vals = hermitian_eigenvalues(m);
    let lo = vals.first().copied().unwrap_or(0.0);
    let hi = vals.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
