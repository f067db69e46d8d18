use std::collections::BTreeMap;

use rayon::prelude::*;

use super::element::{gauss_rule, ElementType};
use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// Quadrature point of an element with its geometric data.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraturePointData {
    pub element: usize,
    pub point: usize,
    pub xi: [f64; 3],
    /// Gauss weight times Jacobian determinant, times the section in 1D and 2D.
    pub weight: f64,
    pub n: Vec<f64>,
    /// Physical shape gradients, `b[a][j] = dN_a / dX_j`.
    pub b: Vec<[f64; 3]>,
}

/// Finite element mesh in the reference configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    etype: ElementType,
    section: f64,
    nodes: Vec<[f64; 3]>,
    connectivity: Vec<usize>,
    nodesets: BTreeMap<String, Vec<usize>>,
    facesets: BTreeMap<String, Vec<(usize, usize)>>,
}

impl Mesh {
    /// Builds and validates a mesh. `section` is the cross-section area of a
    /// 1D mesh or the thickness of a 2D mesh (ignored in 3D).
    pub fn new(etype: ElementType, nodes: Vec<Vec<f64>>, elements: Vec<Vec<usize>>, section: f64) -> Result<Self> {
        let dim = etype.dim();
        let mut coords = Vec::with_capacity(nodes.len());
        for (i, x) in nodes.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::invalid(format!("node {i} has {} coordinates, expected {dim}", x.len())));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("node {i} has a non-finite coordinate")));
            }
            let mut c = [0.0; 3];
            c[..dim].copy_from_slice(x);
            coords.push(c);
        }
        let npe = etype.nodes_per_element();
        let mut connectivity = Vec::with_capacity(elements.len() * npe);
        for (e, conn) in elements.iter().enumerate() {
            if conn.len() != npe {
                return Err(Error::invalid(format!("element {e} has {} nodes, {etype} needs {npe}", conn.len())));
            }
            if let Some(&bad) = conn.iter().find(|&&n| n >= coords.len()) {
                return Err(Error::invalid(format!("element {e} references node {bad} of {}", coords.len())));
            }
            connectivity.extend_from_slice(conn);
        }
        let section = if dim == 3 { 1.0 } else { section };
        if !(section > 0.0 && section.is_finite()) {
            return Err(Error::invalid(format!("section must be positive, got {section}")));
        }
        let mesh = Mesh {
            dim,
            etype,
            section,
            nodes: coords,
            connectivity,
            nodesets: BTreeMap::new(),
            facesets: BTreeMap::new(),
        };
        for e in 0..mesh.num_elements() {
            for (xi, _) in gauss_rule(dim) {
                let det = mesh.jacobian(e, &xi)?.det();
                if !(det > 0.0) {
                    return Err(Error::invalid(format!(
                        "element {e} has non-positive Jacobian determinant {det:e} at a quadrature point"
                    )));
                }
            }
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element_type(&self) -> ElementType {
        self.etype
    }

    pub fn section(&self) -> f64 {
        self.section
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.connectivity.len() / self.etype.nodes_per_element()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i][..self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let npe = self.etype.nodes_per_element();
        &self.connectivity[e * npe..(e + 1) * npe]
    }

    pub fn nodeset(&self, name: &str) -> Option<&[usize]> {
        self.nodesets.get(name).map(Vec::as_slice)
    }

    pub fn faceset(&self, name: &str) -> Option<&[(usize, usize)]> {
        self.facesets.get(name).map(Vec::as_slice)
    }

    pub fn nodesets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.nodesets
    }

    pub fn facesets(&self) -> &BTreeMap<String, Vec<(usize, usize)>> {
        &self.facesets
    }

    pub fn add_nodeset(&mut self, name: impl Into<String>, nodes: Vec<usize>) -> Result<()> {
        let name = name.into();
        if let Some(&bad) = nodes.iter().find(|&&n| n >= self.num_nodes()) {
            return Err(Error::invalid(format!("nodeset '{name}' references node {bad}")));
        }
        self.nodesets.insert(name, nodes);
        Ok(())
    }

    pub fn add_faceset(&mut self, name: impl Into<String>, faces: Vec<(usize, usize)>) -> Result<()> {
        let name = name.into();
        let nf = self.etype.faces().len();
        for &(e, f) in &faces {
            if e >= self.num_elements() || f >= nf {
                return Err(Error::invalid(format!("faceset '{name}' references nonexistent face ({e}, {f})")));
            }
        }
        self.facesets.insert(name, faces);
        Ok(())
    }

    /// Nodes of a faceset, sorted and unique.
    pub fn faceset_nodes(&self, name: &str) -> Option<Vec<usize>> {
        let faces = self.faceset(name)?;
        let mut nodes: Vec<usize> = faces
            .iter()
            .flat_map(|&(e, f)| self.etype.faces()[f].iter().map(move |&l| self.element(e)[l]))
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        Some(nodes)
    }

    /// `J_jk = dX_j / d xi_k`.
    fn jacobian(&self, e: usize, xi: &[f64; 3]) -> Result<Tensor2> {
        let s = self.etype.shape_eval(xi)?;
        let conn = self.element(e);
        Ok(Tensor2::from_fn(self.dim, |j, k| {
            conn.iter().zip(&s.dn).map(|(&n, g)| self.nodes[n][j] * g[k]).sum()
        }))
    }

    fn element_points(&self, e: usize) -> Vec<QuadraturePointData> {
        let d = self.dim;
        let scale = if d < 3 { self.section } else { 1.0 };
        gauss_rule(d)
            .into_iter()
            .enumerate()
            .map(|(p, (xi, w))| {
                let s = self.etype.shape_eval(&xi).expect("Gauss point inside reference element");
                let j = self.jacobian(e, &xi).expect("Gauss point inside reference element");
                let jinv = j.inverse().expect("Jacobian checked at construction");
                let b = s
                    .dn
                    .iter()
                    .map(|g| {
                        let mut out = [0.0; 3];
                        for (jj, o) in out.iter_mut().enumerate().take(d) {
                            *o = (0..d).map(|k| g[k] * jinv.get(k, jj)).sum();
                        }
                        out
                    })
                    .collect();
                QuadraturePointData {
                    element: e,
                    point: p,
                    xi,
                    weight: w * j.det() * scale,
                    n: s.n,
                    b,
                }
            })
            .collect()
    }

    /// All quadrature points, ordered by element then point.
    pub fn quadrature_points(&self) -> Vec<QuadraturePointData> {
        (0..self.num_elements())
            .into_par_iter()
            .map(|e| self.element_points(e))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    /// Total measure of the domain (volume, or length times area, or area times thickness).
    pub fn volume(&self) -> f64 {
        self.quadrature_points().iter().map(|q| q.weight).sum()
    }

    /// Quadrature on face `f` of element `e`: `(local nodes, N on those nodes, dGamma weight)`.
    pub(crate) fn face_quadrature(&self, e: usize, f: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        let faces = self.etype.faces();
        if e >= self.num_elements() || f >= faces.len() {
            return Err(Error::invalid(format!("nonexistent face ({e}, {f})")));
        }
        let local = faces[f];
        let x: Vec<[f64; 3]> = local.iter().map(|&l| self.nodes[self.element(e)[l]]).collect();
        match self.etype {
            ElementType::Line2 => Ok(vec![(vec![1.0], self.section)]),
            ElementType::Quad4 => {
                let len = ((x[1][0] - x[0][0]).powi(2) + (x[1][1] - x[0][1]).powi(2)).sqrt();
                Ok(gauss_rule(1)
                    .into_iter()
                    .map(|(s, w)| {
                        let n = vec![0.5 * (1.0 - s[0]), 0.5 * (1.0 + s[0])];
                        (n, w * 0.5 * len * self.section)
                    })
                    .collect())
            }
            ElementType::Hex8 => {
                let q = ElementType::Quad4;
                Ok(gauss_rule(2)
                    .into_iter()
                    .map(|(s, w)| {
                        let sh = q.shape_eval(&s).expect("Gauss point inside face");
                        let mut t = [[0.0; 3]; 2];
                        for (a, g) in sh.dn.iter().enumerate() {
                            for k in 0..2 {
                                for j in 0..3 {
                                    t[k][j] += x[a][j] * g[k];
                                }
                            }
                        }
                        let c = [
                            t[0][1] * t[1][2] - t[0][2] * t[1][1],
                            t[0][2] * t[1][0] - t[0][0] * t[1][2],
                            t[0][0] * t[1][1] - t[0][1] * t[1][0],
                        ];
                        let area = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                        (sh.n, w * area)
                    })
                    .collect())
            }
        }
    }

    /// Uniform mesh of `n` LINE2 elements on `[0, length]` with cross-section `area`.
    ///
    /// Node and face sets `xmin` and `xmax` mark the rod ends.
    pub fn line(n: usize, length: f64, area: f64) -> Result<Self> {
        if n == 0 || !(length > 0.0) {
            return Err(Error::invalid("line mesh needs n >= 1 and positive length"));
        }
        let nodes = (0..=n).map(|i| vec![length * i as f64 / n as f64]).collect();
        let elements = (0..n).map(|e| vec![e, e + 1]).collect();
        let mut m = Mesh::new(ElementType::Line2, nodes, elements, area)?;
        m.add_nodeset("xmin", vec![0])?;
        m.add_nodeset("xmax", vec![n])?;
        m.add_faceset("xmin", vec![(0, 0)])?;
        m.add_faceset("xmax", vec![(n - 1, 1)])?;
        Ok(m)
    }

    /// Structured `nx` by `ny` QUAD4 mesh of `[0, lx] x [0, ly]`.
    ///
    /// Node and face sets `xmin`, `xmax`, `ymin`, `ymax` mark the edges.
    pub fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64, thickness: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lx > 0.0 && ly > 0.0) {
            return Err(Error::invalid("rectangle mesh needs positive divisions and lengths"));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(vec![lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }
        let mut elements = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut m = Mesh::new(ElementType::Quad4, nodes, elements, thickness)?;
        let el = |i: usize, j: usize| j * nx + i;
        m.add_nodeset("xmin", (0..=ny).map(|j| id(0, j)).collect())?;
        m.add_nodeset("xmax", (0..=ny).map(|j| id(nx, j)).collect())?;
        m.add_nodeset("ymin", (0..=nx).map(|i| id(i, 0)).collect())?;
        m.add_nodeset("ymax", (0..=nx).map(|i| id(i, ny)).collect())?;
        m.add_faceset("xmin", (0..ny).map(|j| (el(0, j), 3)).collect())?;
        m.add_faceset("xmax", (0..ny).map(|j| (el(nx - 1, j), 1)).collect())?;
        m.add_faceset("ymin", (0..nx).map(|i| (el(i, 0), 0)).collect())?;
        m.add_faceset("ymax", (0..nx).map(|i| (el(i, ny - 1), 2)).collect())?;
        Ok(m)
    }

    /// Structured HEX8 mesh of `[0, lx] x [0, ly] x [0, lz]`.
    ///
    /// Node and face sets `xmin` .. `zmax` mark the six sides.
    pub fn cuboid(n: [usize; 3], l: [f64; 3]) -> Result<Self> {
        if n.contains(&0) || l.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("box mesh needs positive divisions and lengths"));
        }
        let [nx, ny, nz] = n;
        let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
        let mut nodes = Vec::new();
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push(vec![
                        l[0] * i as f64 / nx as f64,
                        l[1] * j as f64 / ny as f64,
                        l[2] * k as f64 / nz as f64,
                    ]);
                }
            }
        }
        let mut elements = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    elements.push(vec![
                        id(i, j, k),
                        id(i + 1, j, k),
                        id(i + 1, j + 1, k),
                        id(i, j + 1, k),
                        id(i, j, k + 1),
                        id(i + 1, j, k + 1),
                        id(i + 1, j + 1, k + 1),
                        id(i, j + 1, k + 1),
                    ]);
                }
            }
        }
        let mut m = Mesh::new(ElementType::Hex8, nodes, elements, 1.0)?;
        let el = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
        let mut ns: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    let v = id(i, j, k);
                    for (name, on) in [
                        ("xmin", i == 0),
                        ("xmax", i == nx),
                        ("ymin", j == 0),
                        ("ymax", j == ny),
                        ("zmin", k == 0),
                        ("zmax", k == nz),
                    ] {
                        if on {
                            ns.entry(name).or_default().push(v);
                        }
                    }
                }
            }
        }
        for (name, v) in ns {
            m.add_nodeset(name, v)?;
        }
        let mut fs: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let e = el(i, j, k);
                    for (name, on, face) in [
                        ("zmin", k == 0, 0),
                        ("zmax", k == nz - 1, 1),
                        ("ymin", j == 0, 2),
                        ("xmax", i == nx - 1, 3),
                        ("ymax", j == ny - 1, 4),
                        ("xmin", i == 0, 5),
                    ] {
                        if on {
                            fs.entry(name).or_default().push((e, face));
                        }
                    }
                }
            }
        }
        for (name, f) in fs {
            m.add_faceset(name, f)?;
        }
        Ok(m)
    }

    /// Copy of the mesh with nodes moved by `f`; sets are kept.
    pub fn mapped(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let nodes = (0..self.num_nodes()).map(|i| f(self.node(i))).collect();
        let elements = (0..self.num_elements()).map(|e| self.element(e).to_vec()).collect();
        let mut m = Mesh::new(self.etype, nodes, elements, self.section)?;
        m.nodesets = self.nodesets.clone();
        m.facesets = self.facesets.clone();
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_sum_to_domain() {
        let m = Mesh::line(7, 0.1, 1e-6).unwrap();
        assert!((m.volume() - 1e-7).abs() <= 1e-10 * 1e-7);
        let m = Mesh::rectangle(3, 4, 2.0, 1.5, 0.1).unwrap();
        assert!((m.volume() - 0.3).abs() <= 1e-10 * 0.3);
        let m = Mesh::cuboid([2, 3, 2], [1.0, 2.0, 0.5]).unwrap();
        assert!((m.volume() - 1.0).abs() <= 1e-10);
        let d = m
            .mapped(|x| vec![x[0] + 0.1 * x[1] * x[2], x[1] + 0.05 * x[0] * x[0], x[2]])
            .unwrap();
        let per_element: Vec<f64> = (0..d.num_elements())
            .map(|e| d.quadrature_points().iter().filter(|q| q.element == e).map(|q| q.weight).sum())
            .collect();
        assert!((per_element.iter().sum::<f64>() - d.volume()).abs() < 1e-12);
    }

    #[test]
    fn rejects_inverted_and_bad_indices() {
        let nodes = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        assert!(Mesh::new(ElementType::Quad4, nodes.clone(), vec![vec![0, 3, 2, 1]], 1.0).is_err());
        assert!(Mesh::new(ElementType::Quad4, nodes.clone(), vec![vec![0, 1, 2, 4]], 1.0).is_err());
        assert!(Mesh::new(ElementType::Quad4, nodes.clone(), vec![vec![0, 1, 2]], 1.0).is_err());
        assert!(Mesh::new(ElementType::Quad4, nodes, vec![vec![0, 1, 2, 3]], 1.0).is_ok());
    }

    #[test]
    fn face_measures() {
        let m = Mesh::rectangle(2, 2, 1.0, 1.0, 0.5).unwrap();
        let total: f64 = m
            .faceset("xmax")
            .unwrap()
            .iter()
            .flat_map(|&(e, f)| m.face_quadrature(e, f).unwrap())
            .map(|(_, w)| w)
            .sum();
        assert!((total - 0.5).abs() < 1e-14);
        let b = Mesh::cuboid([2, 2, 2], [1.0, 2.0, 3.0]).unwrap();
        for (name, area) in [("xmin", 6.0), ("xmax", 6.0), ("ymin", 3.0), ("ymax", 3.0), ("zmin", 2.0), ("zmax", 2.0)] {
            let total: f64 = b
                .faceset(name)
                .unwrap()
                .iter()
                .flat_map(|&(e, f)| b.face_quadrature(e, f).unwrap())
                .map(|(_, w)| w)
                .sum();
            assert!((total - area).abs() < 1e-12, "{name}");
        }
        assert_eq!(b.faceset_nodes("xmax").unwrap(), b.nodeset("xmax").unwrap().to_vec());
    }
}
