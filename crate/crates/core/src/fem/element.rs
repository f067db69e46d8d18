use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported isoparametric elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementType {
    #[serde(rename = "LINE2")]
    Line2,
    #[serde(rename = "QUAD4")]
    Quad4,
    #[serde(rename = "HEX8")]
    Hex8,
}

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

const LINE2_NODES: [[f64; 3]; 2] = [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
const QUAD4_NODES: [[f64; 3]; 4] = [[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]];
const HEX8_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

const LINE2_FACES: [&[usize]; 2] = [&[0], &[1]];
const QUAD4_FACES: [&[usize]; 4] = [&[0, 1], &[1, 2], &[2, 3], &[3, 0]];
const HEX8_FACES: [&[usize]; 6] = [
    &[0, 3, 2, 1],
    &[4, 5, 6, 7],
    &[0, 1, 5, 4],
    &[1, 2, 6, 5],
    &[2, 3, 7, 6],
    &[3, 0, 4, 7],
];

/// Shape function values and reference gradients at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeEval {
    pub n: Vec<f64>,
    /// `dn[a][k] = dN_a / d xi_k`.
    pub dn: Vec<[f64; 3]>,
}

impl ElementType {
    pub fn dim(self) -> usize {
        match self {
            ElementType::Line2 => 1,
            ElementType::Quad4 => 2,
            ElementType::Hex8 => 3,
        }
    }

    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementType::Line2 => 2,
            ElementType::Quad4 => 4,
            ElementType::Hex8 => 8,
        }
    }

    pub fn for_dim(dim: usize) -> Result<Self> {
        match dim {
            1 => Ok(ElementType::Line2),
            2 => Ok(ElementType::Quad4),
            3 => Ok(ElementType::Hex8),
            _ => Err(Error::invalid(format!("no element for dimension {dim}"))),
        }
    }

    fn corners(self) -> &'static [[f64; 3]] {
        match self {
            ElementType::Line2 => &LINE2_NODES,
            ElementType::Quad4 => &QUAD4_NODES,
            ElementType::Hex8 => &HEX8_NODES,
        }
    }

    /// Reference coordinates of the element nodes.
    pub fn reference_nodes(self) -> Vec<[f64; 3]> {
        self.corners().to_vec()
    }

    /// Local node lists of the element faces, outward oriented for HEX8.
    pub fn faces(self) -> &'static [&'static [usize]] {
        match self {
            ElementType::Line2 => &LINE2_FACES,
            ElementType::Quad4 => &QUAD4_FACES,
            ElementType::Hex8 => &HEX8_FACES,
        }
    }

    /// Trilinear-family shape functions at `xi` (only the first `dim` entries are used).
    pub fn shape_eval(self, xi: &[f64]) -> Result<ShapeEval> {
        let d = self.dim();
        if xi.len() < d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: xi.len(),
            });
        }
        if xi[..d].iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-12) {
            return Err(Error::invalid(format!("local coordinates {:?} outside the reference element", &xi[..d])));
        }
        let corners = self.corners();
        let mut n = Vec::with_capacity(corners.len());
        let mut dn = Vec::with_capacity(corners.len());
        for c in corners {
            let f: Vec<f64> = (0..d).map(|k| 0.5 * (1.0 + c[k] * xi[k])).collect();
            n.push(f.iter().product());
            let mut g = [0.0; 3];
            for (k, gk) in g.iter_mut().enumerate().take(d) {
                *gk = 0.5 * c[k] * (0..d).filter(|&m| m != k).map(|m| f[m]).product::<f64>();
            }
            dn.push(g);
        }
        Ok(ShapeEval { n, dn })
    }

    /// Full tensor-product two-point Gauss rule; x varies fastest.
    pub fn quadrature(self) -> Vec<([f64; 3], f64)> {
        gauss_rule(self.dim())
    }
}

pub(crate) fn gauss_rule(d: usize) -> Vec<([f64; 3], f64)> {
    let mut pts = Vec::new();
    let range = |k: usize| if k < d { 0..2 } else { 0..1 };
    for iz in range(2) {
        for iy in range(1) {
            for ix in range(0) {
                let mut xi = [0.0; 3];
                let idx = [ix, iy, iz];
                for k in 0..d {
                    xi[k] = GAUSS[idx[k]];
                }
                pts.push((xi, 1.0));
            }
        }
    }
    pts
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementType::Line2 => "LINE2",
            ElementType::Quad4 => "QUAD4",
            ElementType::Hex8 => "HEX8",
        })
    }
}

impl FromStr for ElementType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LINE2" => Ok(ElementType::Line2),
            "QUAD4" => Ok(ElementType::Quad4),
            "HEX8" => Ok(ElementType::Hex8),
            other => Err(Error::invalid(format!("unknown element type '{other}'"))),
        }
    }
}
