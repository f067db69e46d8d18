use serde::{Deserialize, Serialize};

use super::{
    build_index, check_dataset, compatibility_gap, data_loop, free_norm, check_start, initial_assignment, qp_weights, resolve_mu0,
    Diagnostics, Formulation, InnerSolution, LoopSettings, SolveReport, SolveStatus,
};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_external_force, assemble_scaled_laplacian, deformation_gradient, gradient_of_field,
    integrate_gradient_form, BoundaryConditions, DofMap, LinearSolverKind, Mesh, QuadraturePointData, ReducedSystem,
};
use crate::phase_space::{DataSet, LocalState, SearchStrategy};
use crate::tensor::Tensor2;

/// Settings of the (F, P) solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpSolveConfig {
    pub max_data_iterations: usize,
    /// Relative change of the global penalty that ends the data loop.
    pub penalty_tol: f64,
    /// Metric scale in Pa; `None` keeps the one stored in the data set.
    pub mu0: Option<f64>,
    pub linear_solver: LinearSolverKind,
    pub search: SearchStrategy,
}

impl Default for FpSolveConfig {
    fn default() -> Self {
        FpSolveConfig {
            max_data_iterations: 100,
            penalty_tol: 1e-12,
            mu0: None,
            linear_solver: LinearSolverKind::Cholesky,
            search: SearchStrategy::BruteForce,
        }
    }
}

impl FpSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_data_iterations == 0 {
            return Err(Error::Config("max_data_iterations must be at least 1".into()));
        }
        if !(self.penalty_tol > 0.0) {
            return Err(Error::Config("penalty_tol must be positive".into()));
        }
        if let Some(m) = self.mu0 {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("mu0 must be positive, got {m}")));
            }
        }
        if let LinearSolverKind::Cg { tol, max_iter } = self.linear_solver {
            if !(tol > 0.0) || max_iter == 0 {
                return Err(Error::Config("CG needs a positive tolerance and iteration limit".into()));
            }
        }
        Ok(())
    }
}

/// Discretized (F, P) problem: the factorized scaled Laplacian for both fields
/// and the external force vector.
pub struct FpSystem<'m> {
    pub mesh: &'m Mesh,
    pub qps: Vec<QuadraturePointData>,
    pub dofs: DofMap,
    pub f_ext: Vec<f64>,
    mu0: f64,
    sys_u: ReducedSystem,
    sys_lambda: Option<ReducedSystem>,
}

impl<'m> FpSystem<'m> {
    pub fn new(mesh: &'m Mesh, bcs: &BoundaryConditions, mu0: f64, linear: LinearSolverKind) -> Result<Self> {
        let dofs = DofMap::new(mesh, bcs)?;
        let qps = mesh.quadrature_points();
        let k = assemble_scaled_laplacian(mesh, &qps, mu0);
        let sys_u = ReducedSystem::new(&k, &dofs.u, linear)?;
        let sys_lambda = if dofs.lambda.free == dofs.u.free {
            None
        } else {
            Some(ReducedSystem::new(&k, &dofs.lambda, linear)?)
        };
        let f_ext = assemble_external_force(mesh, bcs, &qps)?;
        Ok(FpSystem {
            mesh,
            qps,
            dofs,
            f_ext,
            mu0,
            sys_u,
            sys_lambda,
        })
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    fn lambda_system(&self) -> &ReducedSystem {
        self.sys_lambda.as_ref().unwrap_or(&self.sys_u)
    }

    fn check_assignment(&self, set: &DataSet, assignment: &[usize]) -> Result<()> {
        if assignment.len() != self.qps.len() {
            return Err(Error::invalid(format!(
                "{} assignments for {} quadrature points",
                assignment.len(),
                self.qps.len()
            )));
        }
        if let Some(k) = assignment.iter().position(|&id| id >= set.len()) {
            return Err(Error::Unassigned(k));
        }
        Ok(())
    }
}

/// Solves `K u = mu0 int B^T (F* - I)` for the displacements.
pub fn solve_u_system(sys: &FpSystem<'_>, set: &DataSet, assignment: &[usize]) -> Result<Vec<f64>> {
    sys.check_assignment(set, assignment)?;
    let d = sys.mesh.dim();
    let m: Vec<Tensor2> = assignment
        .iter()
        .map(|&id| (set.tuples()[id].strain - Tensor2::identity(d)) * sys.mu0)
        .collect();
    let rhs = integrate_gradient_form(sys.mesh, &sys.qps, &m);
    sys.sys_u.solve(&rhs, 1.0)
}

/// Solves `K lambda = f_ext - int B^T P*` for the multipliers.
pub fn solve_lambda_system(sys: &FpSystem<'_>, set: &DataSet, assignment: &[usize]) -> Result<Vec<f64>> {
    sys.check_assignment(set, assignment)?;
    let p: Vec<Tensor2> = assignment.iter().map(|&id| set.tuples()[id].stress).collect();
    let int = integrate_gradient_form(sys.mesh, &sys.qps, &p);
    let rhs: Vec<f64> = sys.f_ext.iter().zip(&int).map(|(f, i)| f - i).collect();
    sys.lambda_system().solve(&rhs, 1.0)
}

/// `F = I + grad u`, `P = P* + mu0 grad lambda` at every quadrature point.
///
/// With this sign the recovered stress balances `f_ext` exactly for the
/// multiplier system `K lambda = f_ext - int B^T P*`.
pub fn recover_states(
    sys: &FpSystem<'_>,
    set: &DataSet,
    u: &[f64],
    lambda: &[f64],
    assignment: &[usize],
) -> Result<Vec<LocalState>> {
    sys.check_assignment(set, assignment)?;
    Ok(sys
        .qps
        .iter()
        .zip(assignment)
        .map(|(q, &id)| LocalState {
            strain: deformation_gradient(q, sys.mesh, u),
            stress: set.tuples()[id].stress + gradient_of_field(q, sys.mesh, lambda) * sys.mu0,
            assigned: Some(id),
        })
        .collect())
}

fn equilibrium_residual(sys: &FpSystem<'_>, stresses: &[Tensor2], reference: &[Tensor2]) -> f64 {
    let int = integrate_gradient_form(sys.mesh, &sys.qps, stresses);
    let free = &sys.dofs.lambda.free;
    let r: Vec<f64> = int.iter().zip(&sys.f_ext).map(|(a, f)| a - f).collect();
    let scale = free_norm(&sys.f_ext, free)
        .max(free_norm(&integrate_gradient_form(sys.mesh, &sys.qps, reference), free))
        .max(f64::MIN_POSITIVE);
    free_norm(&r, free) / scale
}

/// Runs the (F, P) data-driven solver.
pub fn solve_fp(mesh: &Mesh, bcs: &BoundaryConditions, dataset: &DataSet, config: &FpSolveConfig) -> Result<SolveReport> {
    solve_fp_from(mesh, bcs, dataset, config, None)
}

/// [`solve_fp`] starting from a given assignment instead of the tuple
/// nearest to the undeformed state.
pub fn solve_fp_from(
    mesh: &Mesh,
    bcs: &BoundaryConditions,
    dataset: &DataSet,
    config: &FpSolveConfig,
    start: Option<&[usize]>,
) -> Result<SolveReport> {
    config.validate()?;
    check_dataset(dataset, mesh, Formulation::Fp)?;
    let set = resolve_mu0(dataset, config.mu0)?;
    let sys = FpSystem::new(mesh, bcs, set.mu0(), config.linear_solver)?;
    let index = build_index(&set, config.search)?;
    let weights = qp_weights(&sys.qps);
    let start = match start {
        Some(a) => check_start(a, &set, sys.qps.len())?,
        None => initial_assignment(&index, sys.qps.len(), mesh.dim()),
    };
    let settings = LoopSettings {
        max_data_iterations: config.max_data_iterations,
        penalty_tol: config.penalty_tol,
    };
    let mut history = Vec::new();
    let outcome = data_loop(&index, &weights, start, &settings, 0, &mut history, |assignment| {
        let u = solve_u_system(&sys, &set, assignment)?;
        let lambda = solve_lambda_system(&sys, &set, assignment)?;
        let states = recover_states(&sys, &set, &u, &lambda, assignment)?;
        let p: Vec<Tensor2> = states.iter().map(|s| s.stress).collect();
        let pstar: Vec<Tensor2> = assignment.iter().map(|&id| set.tuples()[id].stress).collect();
        let residual = equilibrium_residual(&sys, &p, &pstar);
        Ok(InnerSolution {
            u,
            lambda,
            states,
            newton_iterations: 0,
            residual,
        })
    })?;
    let states = outcome.solution.states;
    let max_asymmetry = states
        .iter()
        .map(|s| {
            let pft = s.stress.dot(&s.strain.transpose());
            (pft - pft.transpose()).norm() / pft.norm().max(1.0)
        })
        .fold(0.0, f64::max);
    let diagnostics = Diagnostics {
        equilibrium_residual: outcome.solution.residual,
        compatibility_gap: compatibility_gap(&set, &states, &weights),
        max_asymmetry,
    };
    Ok(SolveReport {
        formulation: Formulation::Fp,
        status: if outcome.converged { SolveStatus::Converged } else { SolveStatus::NonConverged },
        stop_reason: outcome.reason,
        mu0: set.mu0(),
        u: outcome.solution.u,
        lambda: outcome.solution.lambda,
        states,
        weights,
        history,
        data_iterations: outcome.iterations,
        penalty: outcome.penalty,
        diagnostics,
    })
}
