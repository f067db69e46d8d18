use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use super::bc::BoundaryConditions;
use super::mesh::{Mesh, QuadraturePointData};
use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// `G_ij = sum_a v_{a,i} dN_a/dX_j` of a nodal vector field (stride `d`).
pub fn gradient_of_field(qp: &QuadraturePointData, mesh: &Mesh, values: &[f64]) -> Tensor2 {
    let d = mesh.dim();
    let conn = mesh.element(qp.element);
    let mut g = Tensor2::zeros(d);
    for (&node, b) in conn.iter().zip(&qp.b) {
        for i in 0..d {
            let v = values[node * d + i];
            for j in 0..d {
                let idx = i * d + j;
                g.as_mut_slice()[idx] += v * b[j];
            }
        }
    }
    g
}

/// `F = I + grad u`.
pub fn deformation_gradient(qp: &QuadraturePointData, mesh: &Mesh, u: &[f64]) -> Tensor2 {
    Tensor2::identity(mesh.dim()) + gradient_of_field(qp, mesh, u)
}

fn qps_per_element(mesh: &Mesh) -> usize {
    1 << mesh.dim()
}

/// Element-wise `K_e = mu0 * int B^T B`, per displacement component, as a
/// global sparse matrix over all dofs (no constraints applied).
pub fn assemble_scaled_laplacian(mesh: &Mesh, qps: &[QuadraturePointData], mu0: f64) -> CsrMatrix<f64> {
    let d = mesh.dim();
    let ndof = mesh.num_nodes() * d;
    let npe = mesh.element_type().nodes_per_element();
    let blocks: Vec<Vec<f64>> = qps
        .par_chunks(qps_per_element(mesh))
        .map(|pts| {
            let mut k = vec![0.0; npe * npe];
            for q in pts {
                for a in 0..npe {
                    for b in 0..npe {
                        let dot: f64 = (0..d).map(|j| q.b[a][j] * q.b[b][j]).sum();
                        k[a * npe + b] += mu0 * q.weight * dot;
                    }
                }
            }
            k
        })
        .collect();
    let mut coo = CooMatrix::new(ndof, ndof);
    for (e, k) in blocks.iter().enumerate() {
        let conn = mesh.element(e);
        for a in 0..npe {
            for b in 0..npe {
                for i in 0..d {
                    coo.push(conn[a] * d + i, conn[b] * d + i, k[a * npe + b]);
                }
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// `r_(a,i) = sum_qp w M_ij dN_a/dX_j` for one tensor `M` per quadrature point.
pub fn integrate_gradient_form(mesh: &Mesh, qps: &[QuadraturePointData], tensors: &[Tensor2]) -> Vec<f64> {
    let d = mesh.dim();
    let npe = mesh.element_type().nodes_per_element();
    let nq = qps_per_element(mesh);
    let blocks: Vec<Vec<f64>> = qps
        .par_chunks(nq)
        .zip(tensors.par_chunks(nq))
        .map(|(pts, ms)| {
            let mut r = vec![0.0; npe * d];
            for (q, m) in pts.iter().zip(ms) {
                for a in 0..npe {
                    for i in 0..d {
                        let s: f64 = (0..d).map(|j| m.get(i, j) * q.b[a][j]).sum();
                        r[a * d + i] += q.weight * s;
                    }
                }
            }
            r
        })
        .collect();
    let mut out = vec![0.0; mesh.num_nodes() * d];
    for (e, r) in blocks.iter().enumerate() {
        for (a, &node) in mesh.element(e).iter().enumerate() {
            for i in 0..d {
                out[node * d + i] += r[a * d + i];
            }
        }
    }
    out
}

/// `f_ext = int N^T rho0 B dOmega + int N^T T dGamma` over all dofs.
pub fn assemble_external_force(mesh: &Mesh, bcs: &BoundaryConditions, qps: &[QuadraturePointData]) -> Result<Vec<f64>> {
    let d = mesh.dim();
    let mut f = vec![0.0; mesh.num_nodes() * d];
    if bcs.body_force[..d].iter().any(|&v| v != 0.0) {
        for q in qps {
            for (a, &node) in mesh.element(q.element).iter().enumerate() {
                for i in 0..d {
                    f[node * d + i] += q.weight * q.n[a] * bcs.body_force[i];
                }
            }
        }
    }
    let faces = mesh.element_type().faces();
    for t in &bcs.tractions {
        if t.element >= mesh.num_elements() || t.face >= faces.len() {
            return Err(Error::invalid(format!("traction on nonexistent face ({}, {})", t.element, t.face)));
        }
        let local = faces[t.face];
        for (n, w) in mesh.face_quadrature(t.element, t.face)? {
            for (k, &l) in local.iter().enumerate() {
                let node = mesh.element(t.element)[l];
                for i in 0..d {
                    f[node * d + i] += w * n[k] * t.value[i];
                }
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense(k: &CsrMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from(k)
    }

    #[test]
    fn single_line_element_stiffness() {
        let (l, a, mu0) = (0.1, 1e-6, 3.0e6);
        let m = Mesh::line(1, l, a).unwrap();
        let k = dense(&assemble_scaled_laplacian(&m, &m.quadrature_points(), mu0));
        let s = mu0 * a / l;
        let expect = DMatrix::from_row_slice(2, 2, &[s, -s, -s, s]);
        assert!((k - expect).abs().max() < 1e-9 * s);
    }

    #[test]
    fn two_element_stencil_and_rigid_modes() {
        let m = Mesh::line(2, 2.0, 1.0).unwrap();
        let k = dense(&assemble_scaled_laplacian(&m, &m.quadrature_points(), 1.0));
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert!((k.clone() - expect).abs().max() < 1e-14);
        for r in 0..3 {
            assert!(k.row(r).sum().abs() < 1e-14);
        }
        let b = Mesh::cuboid([2, 1, 2], [1.0, 0.5, 0.7]).unwrap().mapped(|x| vec![x[0] + 0.1 * x[1], x[1], x[2] + 0.05 * x[0]]).unwrap();
        let k2 = assemble_scaled_laplacian(&b, &b.quadrature_points(), 2.0);
        let k = dense(&k2);
        let t: Vec<f64> = (0..b.num_nodes()).flat_map(|_| [0.3, -1.0, 2.0]).collect();
        let kt = &k * nalgebra::DVector::from_vec(t);
        assert!(kt.abs().max() < 1e-12);
        assert!((k.clone() - k.transpose()).abs().max() < 1e-14);
        let k4 = dense(&assemble_scaled_laplacian(&b, &b.quadrature_points(), 4.0));
        assert!((k4 - k * 2.0).abs().max() < 1e-12);
    }

    #[test]
    fn traction_and_body_force() {
        let m = Mesh::line(4, 0.1, 1e-6).unwrap();
        let qps = m.quadrature_points();
        assert!(assemble_external_force(&m, &BoundaryConditions::new(), &qps).unwrap().iter().all(|&v| v == 0.0));
        let mut bc = BoundaryConditions::new();
        bc.load_set(&m, "xmax", [1.0e6, 0.0, 0.0]).unwrap();
        let f = assemble_external_force(&m, &bc, &qps).unwrap();
        assert!((f[4] - 1.0).abs() < 1e-12);
        assert!(f[..4].iter().all(|&v| v == 0.0));

        let mut bc = BoundaryConditions::new();
        bc.body_force = [5.0, 0.0, 0.0];
        let f = assemble_external_force(&m, &bc, &qps).unwrap();
        for i in 1..4 {
            assert!((f[i] - f[1]).abs() < 1e-18);
        }
        assert!((f[0] - 0.5 * f[1]).abs() < 1e-18);

        let b = Mesh::cuboid([2, 3, 1], [1.0, 1.5, 0.5]).unwrap();
        let mut bc = BoundaryConditions::new();
        bc.load_set(&b, "ymax", [0.0, 2.0, -1.0]).unwrap();
        let f = assemble_external_force(&b, &bc, &b.quadrature_points()).unwrap();
        let fy: f64 = f.iter().skip(1).step_by(3).sum();
        let fz: f64 = f.iter().skip(2).step_by(3).sum();
        assert!((fy - 2.0 * 0.5).abs() < 1e-12 && (fz + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradients_reproduce_affine_fields() {
        let m = Mesh::line(1, 0.1, 1.0).unwrap();
        let q = &m.quadrature_points()[0];
        assert_eq!(deformation_gradient(q, &m, &[0.0, 0.0]), Tensor2::identity(1));
        assert!((deformation_gradient(q, &m, &[0.0, 0.01]).get(0, 0) - 1.1).abs() < 1e-12);
        let lam: Vec<f64> = (0..2).map(|i| 0.5 * m.node(i)[0]).collect();
        assert!((gradient_of_field(q, &m, &lam).get(0, 0) - 0.5).abs() < 1e-12);

        let m = Mesh::rectangle(3, 3, 1.0, 1.0, 1.0)
            .unwrap()
            .mapped(|x| vec![x[0] + 0.08 * (x[1] * 7.0).sin() * x[0] * (1.0 - x[0]), x[1] + 0.05 * x[0] * x[1]])
            .unwrap();
        let g = [[0.02, 0.013], [-0.04, 0.007]];
        let u: Vec<f64> = (0..m.num_nodes())
            .flat_map(|n| {
                let x = m.node(n);
                [g[0][0] * x[0] + g[0][1] * x[1] + 0.3, g[1][0] * x[0] + g[1][1] * x[1]]
            })
            .collect();
        for q in m.quadrature_points() {
            let f = deformation_gradient(&q, &m, &u);
            for i in 0..2 {
                for j in 0..2 {
                    let e = g[i][j] + if i == j { 1.0 } else { 0.0 };
                    assert!((f.get(i, j) - e).abs() < 1e-10);
                }
            }
            let c = gradient_of_field(&q, &m, &vec![1.5; m.num_nodes() * 2]);
            assert!(c.norm() < 1e-12);
        }
    }
}
