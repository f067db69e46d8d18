use std::collections::{BTreeMap, BTreeSet};

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Prescribed value of one nodal component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dirichlet {
    pub node: usize,
    pub component: usize,
    pub value: f64,
}

/// Constant nominal traction (Pa) on one element face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Traction {
    pub element: usize,
    pub face: usize,
    pub value: [f64; 3],
}

/// Boundary and volume loading of a problem.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryConditions {
    pub dirichlet_u: Vec<Dirichlet>,
    /// `None` selects zero multipliers wherever `u` is prescribed.
    pub dirichlet_lambda: Option<Vec<Dirichlet>>,
    pub tractions: Vec<Traction>,
    /// Reference body force density (N/m^3), constant over the domain.
    pub body_force: [f64; 3],
    /// Allows a traction component on a node whose same displacement component is prescribed.
    pub allow_overlap: bool,
}

impl BoundaryConditions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Prescribes component `component` of `u` on every node of a nodeset.
    pub fn fix_set(&mut self, mesh: &Mesh, set: &str, component: usize, value: f64) -> Result<&mut Self> {
        let nodes = mesh
            .nodeset(set)
            .map(<[usize]>::to_vec)
            .or_else(|| mesh.faceset_nodes(set))
            .ok_or_else(|| Error::invalid(format!("unknown node set '{set}'")))?;
        for node in nodes {
            self.dirichlet_u.push(Dirichlet { node, component, value });
        }
        Ok(self)
    }

    /// Applies a traction to every face of a faceset.
    pub fn load_set(&mut self, mesh: &Mesh, set: &str, value: [f64; 3]) -> Result<&mut Self> {
        let faces = mesh
            .faceset(set)
            .ok_or_else(|| Error::invalid(format!("unknown face set '{set}'")))?;
        for &(element, face) in faces {
            self.tractions.push(Traction { element, face, value });
        }
        Ok(self)
    }

    /// Multipliers prescribed where `u` is prescribed unless set explicitly.
    pub fn lambda_constraints(&self) -> Vec<Dirichlet> {
        match &self.dirichlet_lambda {
            Some(v) => v.clone(),
            None => self
                .dirichlet_u
                .iter()
                .map(|d| Dirichlet { value: 0.0, ..*d })
                .collect(),
        }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let d = mesh.dim();
        for c in self.dirichlet_u.iter().chain(self.lambda_constraints().iter()) {
            if c.node >= mesh.num_nodes() || c.component >= d {
                return Err(Error::invalid(format!(
                    "Dirichlet condition on node {} component {} does not exist",
                    c.node, c.component
                )));
            }
            if !c.value.is_finite() {
                return Err(Error::invalid(format!("non-finite Dirichlet value on node {}", c.node)));
            }
        }
        let nf = mesh.element_type().faces().len();
        for t in &self.tractions {
            if t.element >= mesh.num_elements() || t.face >= nf {
                return Err(Error::invalid(format!("traction on nonexistent face ({}, {})", t.element, t.face)));
            }
            if t.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite traction value"));
            }
        }
        if self.body_force.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite body force"));
        }
        if !self.allow_overlap {
            let fixed: BTreeSet<(usize, usize)> = self.dirichlet_u.iter().map(|c| (c.node, c.component)).collect();
            for t in &self.tractions {
                for &l in mesh.element_type().faces()[t.face] {
                    let node = mesh.element(t.element)[l];
                    for (k, v) in t.value.iter().enumerate().take(d) {
                        if *v != 0.0 && fixed.contains(&(node, k)) {
                            return Err(Error::invalid(format!(
                                "node {node} carries both a displacement constraint and a traction in component {k}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Equation numbering of one nodal vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDofs {
    /// Equation number of each global dof, `None` when prescribed.
    pub eq: Vec<Option<usize>>,
    /// Prescribed values, zero for free dofs.
    pub prescribed: Vec<f64>,
    /// Global dof of each equation.
    pub free: Vec<usize>,
}

impl FieldDofs {
    fn build(ndof: usize, dim: usize, constraints: &[Dirichlet]) -> Result<Self> {
        let mut fixed: BTreeMap<usize, f64> = BTreeMap::new();
        for c in constraints {
            let g = c.node * dim + c.component;
            if let Some(old) = fixed.insert(g, c.value) {
                if old != c.value {
                    return Err(Error::invalid(format!(
                        "conflicting Dirichlet values {old} and {} on node {} component {}",
                        c.value, c.node, c.component
                    )));
                }
            }
        }
        let mut eq = vec![None; ndof];
        let mut prescribed = vec![0.0; ndof];
        let mut free = Vec::new();
        for g in 0..ndof {
            match fixed.get(&g) {
                Some(&v) => prescribed[g] = v,
                None => {
                    eq[g] = Some(free.len());
                    free.push(g);
                }
            }
        }
        Ok(FieldDofs { eq, prescribed, free })
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.eq.len()
    }

    pub fn is_fixed(&self, g: usize) -> bool {
        self.eq[g].is_none()
    }

    /// Full vector from free values, with prescribed values scaled by `load`.
    pub fn expand(&self, free_values: &[f64], load: f64) -> Vec<f64> {
        let mut full: Vec<f64> = self.prescribed.iter().map(|v| v * load).collect();
        for (k, &g) in self.free.iter().enumerate() {
            full[g] = free_values[k];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&g| full[g]).collect()
    }
}

/// Dof numbering of the displacement and multiplier fields; dof `node * d + component`.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub dim: usize,
    pub num_nodes: usize,
    pub u: FieldDofs,
    pub lambda: FieldDofs,
}

impl DofMap {
    pub fn new(mesh: &Mesh, bcs: &BoundaryConditions) -> Result<Self> {
        bcs.validate(mesh)?;
        let d = mesh.dim();
        let ndof = mesh.num_nodes() * d;
        Ok(DofMap {
            dim: d,
            num_nodes: mesh.num_nodes(),
            u: FieldDofs::build(ndof, d, &bcs.dirichlet_u)?,
            lambda: FieldDofs::build(ndof, d, &bcs.lambda_constraints())?,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.dim
    }
}
