use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{penalty_value, DataSet, DataTuple, PairingKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// Distance `sqrt(mu0 |de|^2 + |ds|^2 / mu0)` between two tuples.
pub fn metric_distance(a: &DataTuple, b: &DataTuple, mu0: f64) -> f64 {
    (2.0 * penalty_value(&a.strain, &a.stress, b, mu0)).sqrt()
}

/// Anything that can supply candidate tuples around a point of phase space:
/// a larger data set or an analytic generator.
pub trait TupleSource: Sync {
    fn kind(&self) -> PairingKind;
    fn dim(&self) -> usize;
    /// Every tuple within metric distance `radius` of `center`.
    fn tuples_within(&self, center: &DataTuple, radius: f64, mu0: f64) -> Result<Vec<(Tensor2, Tensor2)>>;
}

impl TupleSource for DataSet {
    fn kind(&self) -> PairingKind {
        DataSet::kind(self)
    }

    fn dim(&self) -> usize {
        DataSet::dim(self)
    }

    fn tuples_within(&self, center: &DataTuple, radius: f64, mu0: f64) -> Result<Vec<(Tensor2, Tensor2)>> {
        Ok(self
            .tuples()
            .iter()
            .filter(|t| metric_distance(center, t, mu0) <= radius)
            .map(|t| (t.strain, t.stress))
            .collect())
    }
}

/// Neighbourhood size used by [`refine_around`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusPolicy {
    /// `factor` times the median nearest-neighbour spacing of the current set.
    MedianSpacing { factor: f64 },
    /// Fixed metric radius.
    Fixed { radius: f64 },
}

impl Default for RadiusPolicy {
    fn default() -> Self {
        RadiusPolicy::MedianSpacing { factor: 2.0 }
    }
}

/// Median over tuples of the metric distance to the closest distinct tuple.
pub fn median_spacing(set: &DataSet) -> Result<f64> {
    let mu0 = set.mu0();
    let tuples = set.tuples();
    let mut nn: Vec<f64> = tuples
        .par_iter()
        .filter_map(|a| {
            tuples
                .iter()
                .filter(|b| b.id != a.id)
                .map(|b| metric_distance(a, b, mu0))
                .filter(|&d| d > 0.0)
                .min_by(f64::total_cmp)
        })
        .collect();
    if nn.is_empty() {
        return Err(Error::invalid(
            "median spacing is undefined for a set without two distinct tuples",
        ));
    }
    nn.sort_by(f64::total_cmp);
    let m = nn.len();
    Ok(if m % 2 == 1 { nn[m / 2] } else { 0.5 * (nn[m / 2 - 1] + nn[m / 2]) })
}

fn key(s: &Tensor2, t: &Tensor2) -> Vec<u64> {
    s.as_slice().iter().chain(t.as_slice()).map(|v| v.to_bits()).collect()
}

/// Next-level data set: the assigned tuples of `current` (or all of them with
/// `keep_all`), followed by the tuples of `source` near any assigned tuple.
///
/// Ids are re-indexed densely and exact duplicates dropped; `mu0` is inherited.
pub fn refine_around(
    source: &dyn TupleSource,
    assigned: &[usize],
    current: &DataSet,
    radius: RadiusPolicy,
    keep_all: bool,
) -> Result<DataSet> {
    if assigned.is_empty() {
        return Err(Error::invalid("refinement needs at least one assigned tuple"));
    }
    if source.kind() != current.kind() {
        return Err(Error::PairingMismatch {
            expected: current.kind().to_string(),
            found: source.kind().to_string(),
        });
    }
    if source.dim() != current.dim() {
        return Err(Error::DimensionMismatch {
            expected: current.dim(),
            found: source.dim(),
        });
    }
    let mut ids: Vec<usize> = assigned.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&bad) = ids.iter().find(|&&id| id >= current.len()) {
        return Err(Error::invalid(format!(
            "assigned id {bad} is not in the current set of {} tuples",
            current.len()
        )));
    }
    let r = match radius {
        RadiusPolicy::Fixed { radius } => radius,
        RadiusPolicy::MedianSpacing { factor } => factor * median_spacing(current)?,
    };
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("refinement radius must be finite and non-negative, got {r}")));
    }
    let r = r * (1.0 + 1e-9);
    let mu0 = current.mu0();

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let keep: Vec<usize> = if keep_all { (0..current.len()).collect() } else { ids.clone() };
    for id in keep {
        let t = &current.tuples()[id];
        if seen.insert(key(&t.strain, &t.stress)) {
            out.push((t.strain, t.stress));
        }
    }
    let found: Vec<Vec<(Tensor2, Tensor2)>> = ids
        .par_iter()
        .map(|&id| source.tuples_within(&current.tuples()[id], r, mu0))
        .collect::<Result<_>>()?;
    for group in found {
        for (strain, stress) in group {
            let (strain, stress) = super::validate_pair(current.kind(), current.dim(), strain, stress)
                .map_err(|message| Error::InvalidTuple { id: out.len(), message })?;
            if seen.insert(key(&strain, &stress)) {
                out.push((strain, stress));
            }
        }
    }
    Ok(DataSet::from_validated(current.kind(), current.dim(), out, mu0))
}
