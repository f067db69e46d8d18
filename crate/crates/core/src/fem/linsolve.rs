use std::collections::VecDeque;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use super::bc::FieldDofs;
use crate::error::{Error, Result};

/// Method for the symmetric positive definite systems of the FP scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LinearSolverKind {
    #[default]
    /// Sparse Cholesky in reverse Cuthill-McKee order, factorized once.
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Cg { tol: f64, max_iter: usize },
}

/// Number of connected dof groups of `k` that contain no prescribed dof.
pub fn count_null_modes(k: &CsrMatrix<f64>, field: &FieldDofs) -> usize {
    let n = k.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j, v) in k.triplet_iter() {
        if i != j && *v != 0.0 {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut anchored = vec![false; n];
    for g in 0..n {
        if field.is_fixed(g) {
            let r = find(&mut parent, g);
            anchored[r] = true;
        }
    }
    (0..n).filter(|&g| find(&mut parent, g) == g && !anchored[g]).count()
}

/// Reverse Cuthill-McKee ordering of a symmetric pattern.
fn rcm(k: &CsrMatrix<f64>) -> Vec<usize> {
    let n = k.nrows();
    let degree: Vec<usize> = (0..n).map(|i| k.row(i).nnz()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| (degree[i], i));
    for &s in &starts {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = k.row(v).col_indices().iter().copied().filter(|&c| !visited[c]).collect();
            nb.sort_by_key(|&c| (degree[c], c));
            for c in nb {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

enum Backend {
    Cholesky { factor: CscCholesky<f64>, perm: Vec<usize> },
    Cg { tol: f64, max_iter: usize, diag: Vec<f64> },
}

/// `K` restricted to the free dofs of one field, ready for repeated solves.
pub struct ReducedSystem {
    full: CsrMatrix<f64>,
    kff: CsrMatrix<f64>,
    field: FieldDofs,
    backend: Backend,
}

impl ReducedSystem {
    /// Eliminates the prescribed dofs of `field` from `k` and factorizes.
    pub fn new(k: &CsrMatrix<f64>, field: &FieldDofs, kind: LinearSolverKind) -> Result<Self> {
        let modes = count_null_modes(k, field);
        if modes > 0 {
            return Err(Error::SingularSystem { modes });
        }
        let nf = field.num_free();
        let mut coo = CooMatrix::new(nf, nf);
        for (i, j, v) in k.triplet_iter() {
            if let (Some(a), Some(b)) = (field.eq[i], field.eq[j]) {
                coo.push(a, b, *v);
            }
        }
        let kff = CsrMatrix::from(&coo);
        let backend = match kind {
            LinearSolverKind::Cholesky => {
                let perm = rcm(&kff);
                let mut inv = vec![0; nf];
                for (new, &old) in perm.iter().enumerate() {
                    inv[old] = new;
                }
                let mut pc = CooMatrix::new(nf, nf);
                for (i, j, v) in kff.triplet_iter() {
                    pc.push(inv[i], inv[j], *v);
                }
                let factor = CscCholesky::factor(&CscMatrix::from(&pc)).map_err(|e| {
                    Error::LinearSolver(format!("Cholesky factorization failed ({e:?}); the system is not positive definite"))
                })?;
                Backend::Cholesky { factor, perm }
            }
            LinearSolverKind::Cg { tol, max_iter } => {
                let mut diag = vec![0.0; nf];
                for (i, j, v) in kff.triplet_iter() {
                    if i == j {
                        diag[i] += *v;
                    }
                }
                if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
                    return Err(Error::LinearSolver(format!("non-positive diagonal at equation {i}")));
                }
                Backend::Cg { tol, max_iter, diag }
            }
        };
        Ok(ReducedSystem {
            full: k.clone(),
            kff,
            field: field.clone(),
            backend,
        })
    }

    pub fn num_free(&self) -> usize {
        self.field.num_free()
    }

    /// Solves `K x = rhs` with prescribed values scaled by `load`; returns all dofs.
    pub fn solve(&self, rhs: &[f64], load: f64) -> Result<Vec<f64>> {
        let xc: Vec<f64> = self.field.prescribed.iter().map(|v| v * load).collect();
        let kxc = &self.full * &nalgebra::DVector::from_column_slice(&xc);
        let b: Vec<f64> = self.field.free.iter().map(|&g| rhs[g] - kxc[g]).collect();
        let x = self.solve_free(&b)?;
        Ok(self.field.expand(&x, load))
    }

    fn solve_free(&self, b: &[f64]) -> Result<Vec<f64>> {
        let nf = b.len();
        if nf == 0 {
            return Ok(Vec::new());
        }
        match &self.backend {
            Backend::Cholesky { factor, perm } => {
                let pb = DMatrix::from_iterator(nf, 1, perm.iter().map(|&old| b[old]));
                let px = factor.solve(&pb);
                let mut x = vec![0.0; nf];
                for (new, &old) in perm.iter().enumerate() {
                    x[old] = px[new];
                }
                Ok(x)
            }
            Backend::Cg { tol, max_iter, diag } => self.cg(b, *tol, *max_iter, diag),
        }
    }

    fn cg(&self, b: &[f64], tol: f64, max_iter: usize, diag: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let matvec = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let row = self.kff.row(i);
                    row.col_indices().iter().zip(row.values()).map(|(&j, v)| v * x[j]).sum()
                })
                .collect()
        };
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        let bnorm = dot(b, b).sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..max_iter {
            let ap = matvec(&p);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= tol * bnorm {
                return Ok(x);
            }
            z = r.iter().zip(diag).map(|(r, d)| r / d).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::LinearSolver(format!(
            "conjugate gradients did not reach relative residual {tol:e} in {max_iter} iterations"
        )))
    }
}

/// LU factorization with partial pivoting of a general banded matrix.
///
/// Entries outside `[i - kl, i + ku]` are structurally zero.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    lower: Vec<f64>,
    piv: Vec<usize>,
    factored: bool,
}

impl BandedLu {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + kl + 1;
        BandedLu {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            lower: vec![0.0; n * kl.max(1)],
            piv: vec![0; n],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let k = self.at(i, j);
        self.band[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            return 0.0;
        }
        self.band[self.at(i, j)]
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.at(k, k)].abs();
            for r in k + 1..=last {
                let v = self.band[self.at(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 1e-14 * scale) {
                return Err(Error::LinearSolver(format!("singular tangent matrix at pivot {k}")));
            }
            self.piv[k] = p;
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.at(k, j), self.at(p, j));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.at(k, k)];
            for r in k + 1..=last {
                let ir = self.at(r, k);
                let m = self.band[ir] / pivot;
                self.band[ir] = 0.0;
                self.lower[k * kl.max(1) + (r - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        let kj = self.band[self.at(k, j)];
                        if kj != 0.0 {
                            let rj = self.at(r, j);
                            self.band[rj] -= m * kj;
                        }
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve before factor");
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let last = (k + kl).min(n.saturating_sub(1));
            for r in k + 1..=last {
                x[r] -= self.lower[k * kl.max(1) + (r - k - 1)] * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ku + kl).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= self.band[self.at(k, j)] * x[j];
            }
            x[k] = s / self.band[self.at(k, k)];
        }
        x
    }
}

/// Reverse Cuthill-McKee order of mesh nodes from element connectivity.
pub fn node_ordering(mesh: &super::Mesh) -> Vec<usize> {
    let n = mesh.num_nodes();
    let mut coo = CooMatrix::new(n, n);
    for e in 0..mesh.num_elements() {
        for &a in mesh.element(e) {
            for &b in mesh.element(e) {
                coo.push(a, b, 1.0);
            }
        }
    }
    for i in 0..n {
        coo.push(i, i, 1.0);
    }
    rcm(&CsrMatrix::from(&coo))
}
