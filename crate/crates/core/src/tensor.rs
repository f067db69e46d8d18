//! Small fixed-dimension second-order tensors.
//!
//! Every tensor is stored as a full row-major `d x d` block (`d` in 1..=3), also
//! for symmetric quantities such as `C` or `S`. Voigt vectors only appear at file
//! boundaries and use the ordering `(11, 22, 33, 12, 13, 23)` in 3D, `(11, 22, 12)`
//! in 2D and `(11)` in 1D.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A `d x d` real tensor with `d` in `{1, 2, 3}`.
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor2 {
    dim: usize,
    c: [f64; 9],
}

impl fmt::Debug for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2{}{:?}", self.dim, self.as_slice())
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::invalid(format!("tensor dimension must be 1, 2 or 3, got {d}")))
    }
}

/// Voigt index pairs for symmetric tensors of dimension `d`.
pub fn voigt_pairs(d: usize) -> &'static [(usize, usize)] {
    match d {
        1 => &[(0, 0)],
        2 => &[(0, 0), (1, 1), (0, 1)],
        _ => &[(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)],
    }
}

impl Tensor2 {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "tensor dimension {dim} out of range");
        Tensor2 { dim, c: [0.0; 9] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.set(i, i, 1.0);
        }
        t
    }

    /// Builds a tensor from `d*d` row-major components.
    pub fn from_row_major(dim: usize, components: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if components.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: components.len(),
            });
        }
        let mut t = Self::zeros(dim);
        t.c[..dim * dim].copy_from_slice(components);
        Ok(t)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                t.set(i, j, f(i, j));
            }
        }
        t
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut t = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            t.set(i, i, *v);
        }
        t
    }

    pub fn scalar(v: f64) -> Self {
        Self::diag(&[v])
    }

    /// Symmetric tensor from tensor-component Voigt entries.
    pub fn from_voigt(dim: usize, voigt: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let pairs = voigt_pairs(dim);
        if voigt.len() != pairs.len() {
            return Err(Error::DimensionMismatch {
                expected: pairs.len(),
                found: voigt.len(),
            });
        }
        let mut t = Self::zeros(dim);
        for (&(i, j), &v) in pairs.iter().zip(voigt) {
            t.set(i, j, v);
            t.set(j, i, v);
        }
        Ok(t)
    }

    /// Symmetric strain tensor from Voigt entries with engineering shear strains.
    pub fn from_voigt_engineering(dim: usize, voigt: &[f64]) -> Result<Self> {
        let mut t = Self::from_voigt(dim, voigt)?;
        for &(i, j) in voigt_pairs(dim) {
            if i != j {
                let v = 0.5 * t.get(i, j);
                t.set(i, j, v);
                t.set(j, i, v);
            }
        }
        Ok(t)
    }

    pub fn to_voigt(&self) -> Vec<f64> {
        voigt_pairs(self.dim)
            .iter()
            .map(|&(i, j)| 0.5 * (self.get(i, j) + self.get(j, i)))
            .collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.c[i * self.dim + j] = v;
    }

    /// Row-major components, length `d*d`.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim * self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let n = self.dim * self.dim;
        &mut self.c[..n]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn det(&self) -> f64 {
        let a = |i, j| self.get(i, j);
        match self.dim {
            1 => a(0, 0),
            2 => a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
            _ => {
                a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                    - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                    + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
            }
        }
    }

    /// Inverse, or `None` when `|det| <= tol * max(1, |A|^d)`.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        let scale = self.norm().powi(self.dim as i32).max(f64::MIN_POSITIVE);
        if det.abs() <= 1e-14 * scale || !det.is_finite() {
            return None;
        }
        let a = |i, j| self.get(i, j);
        let inv = match self.dim {
            1 => Self::scalar(1.0 / a(0, 0)),
            2 => Self::from_row_major(2, &[a(1, 1), -a(0, 1), -a(1, 0), a(0, 0)]).unwrap() * (1.0 / det),
            _ => {
                let cof = Self::from_fn(3, |i, j| {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0)
                });
                cof * (1.0 / det)
            }
        };
        Some(inv)
    }

    pub fn dot(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "tensor product dimension mismatch");
        let d = self.dim;
        Self::from_fn(d, |i, j| (0..d).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }

    /// `A : B` without a dimension check.
    #[inline]
    pub fn contract(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.contract(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn symmetric_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    /// Frobenius norm of `A - A^T`.
    pub fn asymmetry(&self) -> f64 {
        (*self - self.transpose()).norm()
    }

    /// True when `|A - A^T| <= tol * max(1, |A|)`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol * self.norm().max(1.0)
    }

    /// Principal square root of a symmetric positive definite tensor.
    pub fn spd_sqrt(&self) -> Option<Self> {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)));
        let eig = SymmetricEigen::new(m);
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return None;
        }
        let q = &eig.eigenvectors;
        Some(Self::from_fn(d, |i, j| {
            (0..d).map(|k| q[(i, k)] * eig.eigenvalues[k].sqrt() * q[(j, k)]).sum()
        }))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(mut self, rhs: Tensor2) -> Tensor2 {
        self += rhs;
        self
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, rhs: Tensor2) {
        assert_eq!(self.dim, rhs.dim, "tensor sum dimension mismatch");
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(mut self, rhs: Tensor2) -> Tensor2 {
        assert_eq!(self.dim, rhs.dim, "tensor difference dimension mismatch");
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self * -1.0
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(mut self, s: f64) -> Tensor2 {
        for a in self.c.iter_mut() {
            *a *= s;
        }
        self
    }
}

impl Mul for Tensor2 {
    type Output = Tensor2;
    fn mul(self, rhs: Tensor2) -> Tensor2 {
        self.dot(&rhs)
    }
}

/// Double contraction `sum_ij a_ij b_ij`.
pub fn frobenius_inner(a: &Tensor2, b: &Tensor2) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(a.contract(b))
}

/// A proper orthogonal tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    m: Tensor2,
}

impl Rotation {
    pub fn new(m: Tensor2) -> Result<Self> {
        let qtq = m.transpose().dot(&m);
        let off = qtq.max_abs_diff(&Tensor2::identity(m.dim()));
        if off > 1e-12 {
            return Err(Error::invalid(format!("rotation is not orthogonal (|QtQ - I| = {off:e})")));
        }
        if (m.det() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("rotation determinant {} != 1", m.det())));
        }
        Ok(Rotation { m })
    }

    pub fn identity(dim: usize) -> Self {
        Rotation {
            m: Tensor2::identity(dim),
        }
    }

    /// Rotation by `angle` about the z axis (2D and 3D).
    pub fn about_z(dim: usize, angle: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("in-plane rotations need dimension >= 2"));
        }
        let (s, c) = angle.sin_cos();
        let mut m = Tensor2::identity(dim);
        m.set(0, 0, c);
        m.set(0, 1, -s);
        m.set(1, 0, s);
        m.set(1, 1, c);
        Ok(Rotation { m })
    }

    pub fn matrix(&self) -> &Tensor2 {
        &self.m
    }

    pub fn inverse(&self) -> Self {
        Rotation { m: self.m.transpose() }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// `Q A Q^T`.
    pub fn conjugate(&self, a: &Tensor2) -> Tensor2 {
        self.m.dot(a).dot(&self.m.transpose())
    }
}

/// Rotates a strain-stress pair as `(Q E Q^T, Q T Q^T)`.
pub fn rotate_pair(strain: &Tensor2, stress: &Tensor2, q: &Rotation) -> Result<(Tensor2, Tensor2)> {
    for t in [strain, stress] {
        if t.dim() != q.dim() {
            return Err(Error::DimensionMismatch {
                expected: q.dim(),
                found: t.dim(),
            });
        }
    }
    Ok((q.conjugate(strain), q.conjugate(stress)))
}

/// Checks the balance of angular momentum through the skew part of `P F^T`.
///
/// Returns true iff `|P F^T - F P^T| <= tol * max(1, |P F^T|)`.
pub fn check_angular_momentum(f: &Tensor2, p: &Tensor2, tol: f64) -> bool {
    if f.dim() != p.dim() {
        return false;
    }
    let pft = p.dot(&f.transpose());
    let skew = pft - pft.transpose();
    skew.norm() <= tol * pft.norm().max(1.0)
}
