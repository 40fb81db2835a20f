//! Small dense helpers shared by the solvers.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{math, CMat, Mat, C64};

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn spectral_radius(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .fold(0.0, |acc, l| f64::max(acc, l.norm()))
}

pub fn eigenvalues(m: &Mat) -> Vec<C64> {
    m.complex_eigenvalues().iter().copied().collect()
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_fn(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = Mat::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(symmetrize(m));
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn max_sym_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone().try_inverse().ok_or(Error::SingularSystem)
}

/// Solves `a x = b` by LU, rejecting matrices whose pivots fall below
/// `1e-13` of the largest pivot.
pub fn solve_complex(a: &CMat, b: &CMat) -> Option<CMat> {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut big: f64 = 0.0;
    let mut small = f64::INFINITY;
    for i in 0..u.nrows() {
        let p = u[(i, i)].norm();
        big = big.max(p);
        small = small.min(p);
    }
    let scale = big.max(a.iter().fold(0.0, |acc: f64, x| acc.max(x.norm())));
    if u.nrows() > 0 && !(small > 1e-13 * scale) {
        return None;
    }
    lu.solve(b)
}

/// `(z I - a)^{-1} b`.
pub fn resolvent(a: &Mat, b: &CMat, z: C64) -> Result<CMat> {
    let n = a.nrows();
    let mut m = to_complex(a) * C64::new(-1.0, 0.0);
    for i in 0..n {
        m[(i, i)] += z;
    }
    solve_complex(&m, b).ok_or(Error::SingularResolvent { re: z.re, im: z.im })
}

/// `(I - z a)^{-1} b`.
pub fn resolvent_reflected(a: &Mat, b: &CMat, z: C64) -> Result<CMat> {
    let n = a.nrows();
    let mut m = to_complex(a) * (-z);
    for i in 0..n {
        m[(i, i)] += C64::new(1.0, 0.0);
    }
    solve_complex(&m, b).ok_or(Error::SingularResolvent { re: z.re, im: z.im })
}

pub fn rank(m: &nalgebra::DMatrix<C64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.iter().fold(0.0, |a: f64, &b| a.max(b));
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a: f64, x| a.max(x.norm()))
}

pub fn exchange(n: usize) -> Mat {
    DMatrix::from_fn(n, n, |i, j| if i + j + 1 == n { 1.0 } else { 0.0 })
}

pub fn sqrt_pos(x: f64) -> f64 {
    math::sqrt(x.max(0.0))
}
