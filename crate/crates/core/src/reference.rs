//! Classical oracles: small-strain linear elastic FEM on the same meshes and
//! the closed-form incompressible rod.

use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_gen::Family;
use crate::error::{Error, Result};
use crate::fem::{assemble_external_force, BoundaryConditions, DofMap, LinearSolverKind, Mesh, QuadraturePointData, ReducedSystem};

/// Isotropic Hooke law. 2D meshes are treated in plane strain, 1D as a rod
/// with `sigma = E eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearElasticLaw {
    pub young: f64,
    pub poisson: f64,
}

impl LinearElasticLaw {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        let law = LinearElasticLaw { young, poisson };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young > 0.0 && self.young.is_finite()) {
            return Err(Error::invalid(format!("Young's modulus must be positive, got {}", self.young)));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::invalid(format!("Poisson ratio must lie in (-1, 0.5), got {}", self.poisson)));
        }
        Ok(())
    }

    /// Lamé constants `(lambda, mu)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    /// `C_ijkl` for the given dimension.
    pub fn modulus(&self, d: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
        if d == 1 {
            return self.young;
        }
        let (lam, mu) = self.lame();
        let delta = |a: usize, b: usize| f64::from(u8::from(a == b));
        lam * delta(i, j) * delta(k, l) + mu * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k))
    }

    /// Stress `C : eps` for a small-strain tensor.
    pub fn stress(&self, eps: &crate::tensor::Tensor2) -> crate::tensor::Tensor2 {
        let d = eps.dim();
        crate::tensor::Tensor2::from_fn(d, |i, j| {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += self.modulus(d, i, j, k, l) * eps.get(k, l);
                }
            }
            s
        })
    }
}

fn assemble_stiffness(mesh: &Mesh, qps: &[QuadraturePointData], law: &LinearElasticLaw) -> CsrMatrix<f64> {
    let d = mesh.dim();
    let npe = mesh.element_type().nodes_per_element();
    let nl = npe * d;
    let blocks: Vec<Vec<f64>> = qps
        .par_chunks(1 << d)
        .map(|pts| {
            let mut k = vec![0.0; nl * nl];
            for q in pts {
                for a in 0..npe {
                    for i in 0..d {
                        for b in 0..npe {
                            for j in 0..d {
                                let mut v = 0.0;
                                for m in 0..d {
                                    for n in 0..d {
                                        v += q.b[a][m] * law.modulus(d, i, m, j, n) * q.b[b][n];
                                    }
                                }
                                k[(a * d + i) * nl + b * d + j] += q.weight * v;
                            }
                        }
                    }
                }
            }
            k
        })
        .collect();
    let ndof = mesh.num_nodes() * d;
    let mut coo = CooMatrix::new(ndof, ndof);
    for (e, k) in blocks.iter().enumerate() {
        let conn = mesh.element(e);
        for r in 0..nl {
            for c in 0..nl {
                coo.push(conn[r / d] * d + r % d, conn[c / d] * d + c % d, k[r * nl + c]);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Displacement FEM solution of the linear elastic problem.
pub fn solve_linear_elastic(mesh: &Mesh, bcs: &BoundaryConditions, law: &LinearElasticLaw) -> Result<Vec<f64>> {
    law.validate()?;
    let dofs = DofMap::new(mesh, bcs)?;
    let qps = mesh.quadrature_points();
    let k = assemble_stiffness(mesh, &qps, law);
    let f = assemble_external_force(mesh, bcs, &qps)?;
    ReducedSystem::new(&k, &dofs.u, LinearSolverKind::Cholesky)?.solve(&f, 1.0)
}

/// Stretch at which the uniaxial law of `family` carries the Piola stress `p`.
pub fn rod_stretch(family: Family, c1: f64, c3: f64, p: f64) -> Result<f64> {
    if !(c1 > 0.0) || c3 < 0.0 || !p.is_finite() {
        return Err(Error::invalid("rod inversion needs c1 > 0, c3 >= 0 and a finite load"));
    }
    if family == Family::Linear {
        return Ok(p / c1);
    }
    let g = |l: f64| family.piola(l, c1, c3) - p;
    let (mut lo, mut hi) = (1.0, 1.0);
    if p > 0.0 {
        while g(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e8 {
                return Err(Error::invalid(format!("load {p:e} lies outside the monotone range")));
            }
        }
    } else if p < 0.0 {
        while g(lo) > 0.0 {
            lo *= 0.5;
            if lo < 1e-12 {
                return Err(Error::invalid(format!("load {p:e} lies outside the monotone range")));
            }
        }
    } else {
        return Ok(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// End displacement `(l1 - 1) L` of the incompressible rod under end force `n0`.
pub fn rod_analytic(family: Family, c1: f64, c3: f64, n0: f64, area: f64, length: f64) -> Result<f64> {
    if !(area > 0.0 && length > 0.0) {
        return Err(Error::invalid("rod geometry must be positive"));
    }
    Ok((rod_stretch(family, c1, c3, n0 / area)? - 1.0) * length)
}
