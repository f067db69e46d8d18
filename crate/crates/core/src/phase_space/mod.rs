//! Material data in phase space: strain-stress tuples, the energy-like distance
//! between a mechanical state and a tuple, and nearest-tuple queries.

mod io;
mod refine;
mod search;

pub(crate) use io::header_pairs;
pub use io::{format_dataset, parse_dataset, read_dataset, write_dataset};
pub use refine::{median_spacing, metric_distance, refine_around, RadiusPolicy, TupleSource};
pub use search::{nearest, SearchIndex, SearchStrategy};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{check_angular_momentum, Tensor2};

/// Symmetry tolerance used when ingesting symmetric pairings.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Angular momentum tolerance used when ingesting (F, P) tuples.
pub const ANGULAR_MOMENTUM_TOL: f64 = 1e-8;

/// Kinematic pairing of a data set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairingKind {
    /// Deformation gradient and first Piola-Kirchhoff stress.
    #[serde(rename = "FP", alias = "fp")]
    Fp,
    /// Right Cauchy-Green tensor and second Piola-Kirchhoff stress.
    #[serde(rename = "CS", alias = "cs")]
    Cs,
    /// Small strain and Cauchy stress.
    #[serde(rename = "EPS", alias = "eps")]
    EpsSigma,
}

impl PairingKind {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, PairingKind::Fp)
    }

    /// Strain value of the undeformed state.
    pub fn reference_strain(self, dim: usize) -> Tensor2 {
        match self {
            PairingKind::EpsSigma => Tensor2::zeros(dim),
            _ => Tensor2::identity(dim),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairingKind::Fp => "FP",
            PairingKind::Cs => "CS",
            PairingKind::EpsSigma => "EPS",
        }
    }
}

impl fmt::Display for PairingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FP" => Ok(PairingKind::Fp),
            "CS" => Ok(PairingKind::Cs),
            "EPS" | "EPS_SIGMA" => Ok(PairingKind::EpsSigma),
            other => Err(Error::invalid(format!("unknown pairing kind '{other}'"))),
        }
    }
}

/// One strain-stress pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataTuple {
    pub strain: Tensor2,
    pub stress: Tensor2,
    pub id: usize,
}

impl DataTuple {
    pub fn dim(&self) -> usize {
        self.strain.dim()
    }
}

/// Validates (and for symmetric pairings, symmetrizes) one raw pair.
pub(crate) fn validate_pair(kind: PairingKind, dim: usize, strain: Tensor2, stress: Tensor2) -> std::result::Result<(Tensor2, Tensor2), String> {
    if strain.dim() != dim || stress.dim() != dim {
        return Err(format!(
            "tuple dimension ({}, {}) does not match data set dimension {dim}",
            strain.dim(),
            stress.dim()
        ));
    }
    if strain.as_slice().iter().chain(stress.as_slice()).any(|v| !v.is_finite()) {
        return Err("non-finite component".into());
    }
    if kind.is_symmetric() {
        if !strain.is_symmetric(SYMMETRY_TOL) {
            return Err(format!("strain is not symmetric (|A - A^T| = {:e})", strain.asymmetry()));
        }
        if !stress.is_symmetric(SYMMETRY_TOL) {
            return Err(format!("stress is not symmetric (|A - A^T| = {:e})", stress.asymmetry()));
        }
        Ok((strain.symmetric_part(), stress.symmetric_part()))
    } else {
        if !check_angular_momentum(&strain, &stress, ANGULAR_MOMENTUM_TOL) {
            return Err("tuple violates the balance of angular momentum (P F^T not symmetric)".into());
        }
        Ok((strain, stress))
    }
}

/// An immutable, validated collection of data tuples sharing one pairing and
/// dimension, together with the metric scale `mu0` in Pa.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    kind: PairingKind,
    dim: usize,
    tuples: Vec<DataTuple>,
    mu0: f64,
}

impl DataSet {
    /// Validates `pairs` and assigns dense ids. `mu0 = None` selects [`auto_mu0`].
    pub fn new(kind: PairingKind, dim: usize, pairs: Vec<(Tensor2, Tensor2)>, mu0: Option<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("data set dimension {dim} out of range")));
        }
        let mut tuples = Vec::with_capacity(pairs.len());
        for (id, (strain, stress)) in pairs.into_iter().enumerate() {
            let (strain, stress) =
                validate_pair(kind, dim, strain, stress).map_err(|message| Error::InvalidTuple { id, message })?;
            tuples.push(DataTuple { strain, stress, id });
        }
        let mut set = DataSet { kind, dim, tuples, mu0: 1.0 };
        set.mu0 = match mu0 {
            Some(m) => m,
            None => auto_mu0(&set)?,
        };
        if !(set.mu0 > 0.0 && set.mu0.is_finite()) {
            return Err(Error::invalid(format!("mu0 must be positive and finite, got {}", set.mu0)));
        }
        Ok(set)
    }

    /// Builds a set from already validated tuples, re-indexing ids densely.
    pub(crate) fn from_validated(kind: PairingKind, dim: usize, pairs: Vec<(Tensor2, Tensor2)>, mu0: f64) -> Self {
        let tuples = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (strain, stress))| DataTuple { strain, stress, id })
            .collect();
        DataSet { kind, dim, tuples, mu0 }
    }

    pub fn with_mu0(mut self, mu0: f64) -> Result<Self> {
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invalid(format!("mu0 must be positive and finite, got {mu0}")));
        }
        self.mu0 = mu0;
        Ok(self)
    }

    pub fn kind(&self) -> PairingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[DataTuple] {
        &self.tuples
    }

    pub fn get(&self, id: usize) -> Option<&DataTuple> {
        self.tuples.get(id)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Tensor2, Tensor2)> + '_ {
        self.tuples.iter().map(|t| (t.strain, t.stress))
    }
}

/// Mechanical state at a quadrature point with its assigned data tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalState {
    pub strain: Tensor2,
    pub stress: Tensor2,
    pub assigned: Option<usize>,
}

impl LocalState {
    pub fn new(strain: Tensor2, stress: Tensor2) -> Self {
        LocalState {
            strain,
            stress,
            assigned: None,
        }
    }
}

/// `mu0/2 |strain - strain'|^2 + 1/(2 mu0) |stress - stress'|^2` without checks.
#[inline]
pub fn penalty_value(strain: &Tensor2, stress: &Tensor2, tuple: &DataTuple, mu0: f64) -> f64 {
    let de = (*strain - tuple.strain).norm_squared();
    let ds = (*stress - tuple.stress).norm_squared();
    0.5 * mu0 * de + 0.5 * ds / mu0
}

/// Local penalty between a state and a tuple.
pub fn local_penalty(state: &LocalState, tuple: &DataTuple, mu0: f64) -> Result<f64> {
    for t in [&state.strain, &state.stress, &tuple.stress] {
        if t.dim() != tuple.strain.dim() {
            return Err(Error::DimensionMismatch {
                expected: tuple.strain.dim(),
                found: t.dim(),
            });
        }
    }
    Ok(penalty_value(&state.strain, &state.stress, tuple, mu0))
}

/// Weighted sum of local penalties of states against their assigned tuples.
///
/// Weights are quadrature weight times Jacobian determinant.
pub fn global_penalty(states: &[(LocalState, f64)], set: &DataSet) -> Result<f64> {
    let mut total = 0.0;
    for (k, (state, weight)) in states.iter().enumerate() {
        let id = state.assigned.ok_or(Error::Unassigned(k))?;
        let tuple = set
            .get(id)
            .ok_or_else(|| Error::invalid(format!("state {k} assigned to unknown tuple {id}")))?;
        total += weight * local_penalty(state, tuple, set.mu0())?;
    }
    Ok(total)
}

/// Metric scale estimate: RMS stress norm over RMS strain deviation from the
/// undeformed state.
pub fn auto_mu0(set: &DataSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    let reference = set.kind().reference_strain(set.dim());
    let n = set.len() as f64;
    let stress_rms = (set.tuples().iter().map(|t| t.stress.norm_squared()).sum::<f64>() / n).sqrt();
    let strain_rms = (set
        .tuples()
        .iter()
        .map(|t| (t.strain - reference).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    let strain_scale = (set.tuples().iter().map(|t| t.strain.norm_squared()).sum::<f64>() / n)
        .sqrt()
        .max(1.0);
    if strain_rms <= f64::EPSILON * strain_scale {
        return Err(Error::invalid(
            "cannot derive mu0: every strain equals the undeformed state",
        ));
    }
    if stress_rms <= 0.0 {
        return Err(Error::invalid("cannot derive mu0: every stress is zero"));
    }
    Ok(stress_rms / strain_rms)
}
