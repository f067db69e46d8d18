//! Data-driven solvers: the linearized (F, P) scheme and the nonlinear (C, S)
//! scheme, both wrapped in the alternating data-assignment loop.

mod cs;
mod fp;

pub use cs::{
    newton_solve, recover_states_cs, residual_lambda, residual_u, solve_cs, solve_cs_from, tangent_blocks, CsSystem, CsSolveConfig,
    LineSearch, NewtonOutcome, TangentBlocks,
};
pub use fp::{recover_states, solve_fp, solve_fp_from, solve_lambda_system, solve_u_system, FpSolveConfig, FpSystem};

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Mesh, QuadraturePointData};
use crate::phase_space::{penalty_value, DataSet, LocalState, PairingKind, SearchIndex, SearchStrategy};
use crate::tensor::Tensor2;

/// Which data-driven scheme produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Fp,
    Cs,
}

impl Formulation {
    pub fn pairing(self) -> PairingKind {
        match self {
            Formulation::Fp => PairingKind::Fp,
            Formulation::Cs => PairingKind::Cs,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Fp => "fp",
            Formulation::Cs => "cs",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    NonConverged,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "CONVERGED",
            SolveStatus::NonConverged => "NONCONVERGED",
        })
    }
}

/// Why the data loop stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Reassignment reproduced the current assignment.
    FixedPoint,
    /// Relative change of the global penalty fell below the tolerance.
    PenaltyStagnation,
    /// The assignment returned to an earlier one.
    Cycle,
    MaxIterations,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::FixedPoint => "fixed_point",
            StopReason::PenaltyStagnation => "penalty_stagnation",
            StopReason::Cycle => "cycle",
            StopReason::MaxIterations => "max_iterations",
        })
    }
}

/// One pass of the data loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub load_step: usize,
    pub iteration: usize,
    pub penalty: f64,
    /// Quadrature points whose tuple changed after this pass.
    pub reassigned: usize,
    pub newton_iterations: usize,
    pub residual: f64,
}

/// Quality measures of the final state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// `|int B^T P - f_ext|` on free multiplier dofs, relative to the load scale.
    pub equilibrium_residual: f64,
    /// `sqrt(int |strain - strain*|^2) / sqrt(volume)`: mismatch between the
    /// compatible strain and the assigned data strain.
    pub compatibility_gap: f64,
    /// FP: largest relative `|P F^T - F P^T|`; CS: largest relative `|S - S^T|`.
    pub max_asymmetry: f64,
}

/// Result of a data-driven solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub formulation: Formulation,
    pub status: SolveStatus,
    pub stop_reason: StopReason,
    pub mu0: f64,
    /// Nodal displacements, dof `node * d + component`.
    pub u: Vec<f64>,
    /// Nodal Lagrange multipliers.
    pub lambda: Vec<f64>,
    /// Recovered states with their assigned tuples, one per quadrature point.
    pub states: Vec<LocalState>,
    pub weights: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub data_iterations: usize,
    pub penalty: f64,
    pub diagnostics: Diagnostics,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn assignments(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.assigned.unwrap_or(usize::MAX)).collect()
    }

    /// Sorted distinct tuple ids in use.
    pub fn assigned_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.states.iter().filter_map(|s| s.assigned).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn newton_counts(&self) -> Vec<usize> {
        self.history.iter().map(|h| h.newton_iterations).collect()
    }
}

/// Solver settings of either formulation.
#[derive(Clone, Debug, PartialEq)]
pub enum SolverSettings {
    Fp(FpSolveConfig),
    Cs(CsSolveConfig),
}

impl SolverSettings {
    pub fn formulation(&self) -> Formulation {
        match self {
            SolverSettings::Fp(_) => Formulation::Fp,
            SolverSettings::Cs(_) => Formulation::Cs,
        }
    }

    pub fn mu0(&self) -> Option<f64> {
        match self {
            SolverSettings::Fp(c) => c.mu0,
            SolverSettings::Cs(c) => c.mu0,
        }
    }

    pub fn set_mu0(&mut self, mu0: Option<f64>) {
        match self {
            SolverSettings::Fp(c) => c.mu0 = mu0,
            SolverSettings::Cs(c) => c.mu0 = mu0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SolverSettings::Fp(c) => c.validate(),
            SolverSettings::Cs(c) => c.validate(),
        }
    }

    /// Runs the matching solver, optionally from a given assignment.
    pub fn solve(
        &self,
        mesh: &Mesh,
        bcs: &crate::fem::BoundaryConditions,
        set: &DataSet,
        start: Option<&[usize]>,
    ) -> Result<SolveReport> {
        match self {
            SolverSettings::Fp(c) => solve_fp_from(mesh, bcs, set, c, start),
            SolverSettings::Cs(c) => solve_cs_from(mesh, bcs, set, c, start),
        }
    }
}

pub(crate) struct InnerSolution {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub states: Vec<LocalState>,
    pub newton_iterations: usize,
    pub residual: f64,
}

pub(crate) struct LoopOutcome {
    pub solution: InnerSolution,
    pub converged: bool,
    pub reason: StopReason,
    pub penalty: f64,
    pub iterations: usize,
}

pub(crate) struct LoopSettings {
    pub max_data_iterations: usize,
    pub penalty_tol: f64,
}

pub(crate) fn check_dataset(set: &DataSet, mesh: &Mesh, formulation: Formulation) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    if set.kind() != formulation.pairing() {
        return Err(Error::PairingMismatch {
            expected: formulation.pairing().to_string(),
            found: set.kind().to_string(),
        });
    }
    if set.dim() != mesh.dim() {
        return Err(Error::DimensionMismatch {
            expected: mesh.dim(),
            found: set.dim(),
        });
    }
    Ok(())
}

/// The data set with the configured `mu0`, or unchanged when none is set.
pub(crate) fn resolve_mu0(set: &DataSet, mu0: Option<f64>) -> Result<DataSet> {
    match mu0 {
        Some(m) => set.clone().with_mu0(m),
        None => Ok(set.clone()),
    }
}

pub(crate) fn assign_all(index: &SearchIndex<'_>, states: &[LocalState]) -> Vec<usize> {
    states.par_iter().map(|s| index.query(&s.strain, &s.stress).0).collect()
}

pub(crate) fn initial_assignment(index: &SearchIndex<'_>, n: usize, dim: usize) -> Vec<usize> {
    let (id, _) = index.query(&index.set().kind().reference_strain(dim), &Tensor2::zeros(dim));
    vec![id; n]
}

pub(crate) fn check_start(start: &[usize], set: &DataSet, n: usize) -> Result<Vec<usize>> {
    if start.len() != n {
        return Err(Error::invalid(format!("initial assignment has {} entries for {n} quadrature points", start.len())));
    }
    if let Some(k) = start.iter().position(|&id| id >= set.len()) {
        return Err(Error::Unassigned(k));
    }
    Ok(start.to_vec())
}

pub(crate) fn weighted_penalty(set: &DataSet, states: &[LocalState], weights: &[f64]) -> f64 {
    states
        .iter()
        .zip(weights)
        .map(|(s, w)| {
            let t = &set.tuples()[s.assigned.expect("state assigned")];
            w * penalty_value(&s.strain, &s.stress, t, set.mu0())
        })
        .sum()
}

/// Alternates `inner` solves with nearest-tuple reassignment.
pub(crate) fn data_loop(
    index: &SearchIndex<'_>,
    weights: &[f64],
    start: Vec<usize>,
    settings: &LoopSettings,
    load_step: usize,
    history: &mut Vec<IterationRecord>,
    mut inner: impl FnMut(&[usize]) -> Result<InnerSolution>,
) -> Result<LoopOutcome> {
    let set = index.set();
    let mut assignment = start;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(assignment.clone());
    let mut best: Option<(f64, InnerSolution)> = None;
    let mut previous: Option<f64> = None;
    for it in 1..=settings.max_data_iterations {
        let sol = inner(&assignment)?;
        let penalty = weighted_penalty(set, &sol.states, weights);
        let next = assign_all(index, &sol.states);
        let reassigned = next.iter().zip(&assignment).filter(|(a, b)| a != b).count();
        history.push(IterationRecord {
            load_step,
            iteration: it,
            penalty,
            reassigned,
            newton_iterations: sol.newton_iterations,
            residual: sol.residual,
        });
        log::debug!("data iteration {it}: penalty {penalty:e}, {reassigned} reassigned");
        let stop = if reassigned == 0 {
            Some((true, StopReason::FixedPoint))
        } else if previous.is_some_and(|p| (penalty - p).abs() <= settings.penalty_tol * p.abs().max(f64::MIN_POSITIVE)) {
            Some((true, StopReason::PenaltyStagnation))
        } else if !seen.insert(next.clone()) {
            Some((false, StopReason::Cycle))
        } else if it == settings.max_data_iterations {
            Some((false, StopReason::MaxIterations))
        } else {
            None
        };
        if let Some((converged, reason)) = stop {
            let (solution, penalty) = match best {
                Some((bp, bs)) if !converged && bp < penalty => (bs, bp),
                _ => (sol, penalty),
            };
            return Ok(LoopOutcome {
                solution,
                converged,
                reason,
                penalty,
                iterations: it,
            });
        }
        if best.as_ref().map_or(true, |b| penalty < b.0) {
            best = Some((penalty, sol));
        }
        previous = Some(penalty);
        assignment = next;
    }
    unreachable!("data loop exits on its last iteration")
}

/// `sqrt(int |strain - strain*|^2 / volume)`.
pub(crate) fn compatibility_gap(set: &DataSet, states: &[LocalState], weights: &[f64]) -> f64 {
    let vol: f64 = weights.iter().sum();
    let s: f64 = states
        .iter()
        .zip(weights)
        .map(|(st, w)| w * (st.strain - set.tuples()[st.assigned.expect("assigned")].strain).norm_squared())
        .sum();
    (s / vol).sqrt()
}

pub(crate) fn free_norm(v: &[f64], free: &[usize]) -> f64 {
    free.iter().map(|&g| v[g] * v[g]).sum::<f64>().sqrt()
}

pub(crate) fn build_index(set: &DataSet, search: SearchStrategy) -> Result<SearchIndex<'_>> {
    SearchIndex::new(set, search)
}

pub(crate) fn qp_weights(qps: &[QuadraturePointData]) -> Vec<f64> {
    qps.iter().map(|q| q.weight).collect()
}
