use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_index, check_dataset, check_start, compatibility_gap, data_loop, free_norm, initial_assignment, qp_weights, resolve_mu0,
    Diagnostics, Formulation, InnerSolution, IterationRecord, LoopSettings, SolveReport, SolveStatus,
};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_external_force, gradient_of_field, integrate_gradient_form, node_ordering, BandedLu, BoundaryConditions,
    DofMap, Mesh, QuadraturePointData,
};
use crate::phase_space::{DataSet, LocalState, SearchStrategy};
use crate::tensor::Tensor2;

/// Globalization of the Newton iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LineSearch {
    #[default]
    None,
    /// Step halving (by `factor`) until the residual norm decreases.
    Backtracking { factor: f64, max_steps: usize },
}

/// Settings of the (C, S) solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsSolveConfig {
    pub max_data_iterations: usize,
    pub penalty_tol: f64,
    /// Newton stops at `|R| <= newton_tol * (1 + |f_ext|)`.
    pub newton_tol: f64,
    pub newton_maxit: usize,
    pub line_search: LineSearch,
    pub load_steps: usize,
    pub mu0: Option<f64>,
    pub search: SearchStrategy,
}

impl Default for CsSolveConfig {
    fn default() -> Self {
        CsSolveConfig {
            max_data_iterations: 100,
            penalty_tol: 1e-12,
            newton_tol: 1e-10,
            newton_maxit: 30,
            line_search: LineSearch::None,
            load_steps: 1,
            mu0: None,
            search: SearchStrategy::BruteForce,
        }
    }
}

impl CsSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_data_iterations == 0 || self.newton_maxit == 0 {
            return Err(Error::Config("iteration limits must be at least 1".into()));
        }
        if !(self.penalty_tol > 0.0 && self.newton_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.load_steps == 0 {
            return Err(Error::Config("load_steps must be at least 1".into()));
        }
        if let Some(m) = self.mu0 {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("mu0 must be positive, got {m}")));
            }
        }
        if let LineSearch::Backtracking { factor, max_steps } = self.line_search {
            if !(factor > 0.0 && factor < 1.0) || max_steps == 0 {
                return Err(Error::Config("backtracking needs 0 < factor < 1 and max_steps >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Discretized (C, S) problem with the unknown numbering used by Newton.
pub struct CsSystem<'m> {
    pub mesh: &'m Mesh,
    pub qps: Vec<QuadraturePointData>,
    pub dofs: DofMap,
    pub f_ext: Vec<f64>,
    mu0: f64,
    pos_u: Vec<Option<usize>>,
    pos_lambda: Vec<Option<usize>>,
    unknowns: usize,
    band: usize,
}

impl<'m> CsSystem<'m> {
    pub fn new(mesh: &'m Mesh, bcs: &BoundaryConditions, mu0: f64) -> Result<Self> {
        let dofs = DofMap::new(mesh, bcs)?;
        let qps = mesh.quadrature_points();
        let f_ext = assemble_external_force(mesh, bcs, &qps)?;
        let d = mesh.dim();
        let ndof = dofs.num_dofs();
        let mut pos_u = vec![None; ndof];
        let mut pos_lambda = vec![None; ndof];
        let mut next = 0;
        for node in node_ordering(mesh) {
            for i in 0..d {
                let g = node * d + i;
                if !dofs.u.is_fixed(g) {
                    pos_u[g] = Some(next);
                    next += 1;
                }
            }
            for i in 0..d {
                let g = node * d + i;
                if !dofs.lambda.is_fixed(g) {
                    pos_lambda[g] = Some(next);
                    next += 1;
                }
            }
        }
        let band = (0..mesh.num_elements())
            .map(|e| {
                let ps: Vec<usize> = mesh
                    .element(e)
                    .iter()
                    .flat_map(|&n| (0..d).map(move |i| n * d + i))
                    .flat_map(|g| [pos_u[g], pos_lambda[g]])
                    .flatten()
                    .collect();
                match (ps.iter().min(), ps.iter().max()) {
                    (Some(lo), Some(hi)) => hi - lo,
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0);
        Ok(CsSystem {
            mesh,
            qps,
            dofs,
            f_ext,
            mu0,
            pos_u,
            pos_lambda,
            unknowns: next,
            band,
        })
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn num_unknowns(&self) -> usize {
        self.unknowns
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

    fn kinematics(&self, u: &[f64], lambda: &[f64]) -> Vec<(Tensor2, Tensor2)> {
        let d = self.mesh.dim();
        self.qps
            .par_iter()
            .map(|q| {
                (
                    Tensor2::identity(d) + gradient_of_field(q, self.mesh, u),
                    gradient_of_field(q, self.mesh, lambda),
                )
            })
            .collect()
    }

    fn unknown_vector(&self, u: &[f64], lambda: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.unknowns];
        for g in 0..u.len() {
            if let Some(p) = self.pos_u[g] {
                x[p] = u[g];
            }
            if let Some(p) = self.pos_lambda[g] {
                x[p] = lambda[g];
            }
        }
        x
    }

    fn scatter_unknowns(&self, x: &[f64], u: &mut [f64], lambda: &mut [f64]) {
        for g in 0..u.len() {
            if let Some(p) = self.pos_u[g] {
                u[g] = x[p];
            }
            if let Some(p) = self.pos_lambda[g] {
                lambda[g] = x[p];
            }
        }
    }

    fn stacked(&self, ru: &[f64], rl: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.unknowns];
        for g in 0..ru.len() {
            if let Some(p) = self.pos_u[g] {
                r[p] = ru[g];
            }
            if let Some(p) = self.pos_lambda[g] {
                r[p] = rl[g];
            }
        }
        r
    }
}

/// `2 mu0 F (C - C*) - L S* - mu0 L L^T F`, paired with `grad du`.
fn stress_u(f: &Tensor2, l: &Tensor2, cs: &Tensor2, ss: &Tensor2, mu0: f64) -> Tensor2 {
    let c = f.transpose().dot(f);
    f.dot(&(c - *cs)) * (2.0 * mu0) - l.dot(ss) - l.dot(&l.transpose()).dot(f) * mu0
}

/// `F S* + mu0 F F^T L = F S`, paired with `grad dlambda`.
fn stress_lambda(f: &Tensor2, l: &Tensor2, ss: &Tensor2, mu0: f64) -> Tensor2 {
    f.dot(ss) + f.dot(&f.transpose()).dot(l) * mu0
}

/// Recovered `S = S* + mu0 F^T grad lambda`.
fn recovered_stress(f: &Tensor2, l: &Tensor2, ss: &Tensor2, mu0: f64) -> Tensor2 {
    *ss + f.transpose().dot(l) * mu0
}

/// Displacement residual over all dofs.
pub fn residual_u(sys: &CsSystem<'_>, set: &DataSet, u: &[f64], lambda: &[f64], assignment: &[usize]) -> Result<Vec<f64>> {
    sys.check_assignment(set, assignment)?;
    let kin = sys.kinematics(u, lambda);
    let m: Vec<Tensor2> = kin
        .iter()
        .zip(assignment)
        .map(|((f, l), &id)| {
            let t = &set.tuples()[id];
            stress_u(f, l, &t.strain, &t.stress, sys.mu0)
        })
        .collect();
    Ok(integrate_gradient_form(sys.mesh, &sys.qps, &m))
}

/// Multiplier residual over all dofs, with the external force scaled by `load`.
pub fn residual_lambda(
    sys: &CsSystem<'_>,
    set: &DataSet,
    u: &[f64],
    lambda: &[f64],
    assignment: &[usize],
    load: f64,
) -> Result<Vec<f64>> {
    sys.check_assignment(set, assignment)?;
    let kin = sys.kinematics(u, lambda);
    let m: Vec<Tensor2> = kin
        .iter()
        .zip(assignment)
        .map(|((f, l), &id)| stress_lambda(f, l, &set.tuples()[id].stress, sys.mu0))
        .collect();
    let mut r = integrate_gradient_form(sys.mesh, &sys.qps, &m);
    for (ri, fi) in r.iter_mut().zip(&sys.f_ext) {
        *ri -= load * fi;
    }
    Ok(r)
}

/// `C = F^T F` and `S = S* + mu0 F^T grad lambda` at every quadrature point.
pub fn recover_states_cs(
    sys: &CsSystem<'_>,
    set: &DataSet,
    u: &[f64],
    lambda: &[f64],
    assignment: &[usize],
) -> Result<Vec<LocalState>> {
    sys.check_assignment(set, assignment)?;
    Ok(sys
        .kinematics(u, lambda)
        .iter()
        .zip(assignment)
        .map(|((f, l), &id)| LocalState {
            strain: f.transpose().dot(f).symmetric_part(),
            stress: recovered_stress(f, l, &set.tuples()[id].stress, sys.mu0),
            assigned: Some(id),
        })
        .collect())
}

/// Element tangent in local order `[u (a, i) | lambda (a, i)]`, size `2 n d`.
fn element_tangent(
    sys: &CsSystem<'_>,
    set: &DataSet,
    e: usize,
    pts: &[QuadraturePointData],
    kin: &[(Tensor2, Tensor2)],
    assignment: &[usize],
) -> Vec<f64> {
    let d = sys.mesh.dim();
    let npe = sys.mesh.element_type().nodes_per_element();
    let nl = npe * d;
    let size = 2 * nl;
    let mu0 = sys.mu0;
    let mut k = vec![0.0; size * size];
    let first = pts.first().map_or(0, |_| e * pts.len());
    for (p, q) in pts.iter().enumerate() {
        let (f, l) = kin[first + p];
        let t = &set.tuples()[assignment[first + p]];
        let (cs, ss) = (t.strain, t.stress);
        let c = f.transpose().dot(&f);
        let llt = l.dot(&l.transpose());
        let ffft = f.dot(&f.transpose());
        for b in 0..npe {
            for j in 0..d {
                let mut dg = Tensor2::zeros(d);
                for n in 0..d {
                    dg.set(j, n, q.b[b][n]);
                }
                let du_f = (dg.dot(&(c - cs)) + f.dot(&(dg.transpose().dot(&f) + f.transpose().dot(&dg)))) * (2.0 * mu0)
                    - llt.dot(&dg) * mu0;
                let du_l = -dg.dot(&ss) - (dg.dot(&l.transpose()) + l.dot(&dg.transpose())).dot(&f) * mu0;
                let dl_f = dg.dot(&ss) + (dg.dot(&f.transpose()) + f.dot(&dg.transpose())).dot(&l) * mu0;
                let dl_l = ffft.dot(&dg) * mu0;
                let col_u = b * d + j;
                let col_l = nl + b * d + j;
                for a in 0..npe {
                    for i in 0..d {
                        let proj = |m: &Tensor2| -> f64 { (0..d).map(|n| m.get(i, n) * q.b[a][n]).sum::<f64>() * q.weight };
                        let row_u = a * d + i;
                        let row_l = nl + a * d + i;
                        k[row_u * size + col_u] += proj(&du_f);
                        k[row_u * size + col_l] += proj(&du_l);
                        k[row_l * size + col_u] += proj(&dl_f);
                        k[row_l * size + col_l] += proj(&dl_l);
                    }
                }
            }
        }
    }
    k
}

fn element_tangents(sys: &CsSystem<'_>, set: &DataSet, u: &[f64], lambda: &[f64], assignment: &[usize]) -> Vec<Vec<f64>> {
    let kin = sys.kinematics(u, lambda);
    let nq = 1 << sys.mesh.dim();
    sys.qps
        .par_chunks(nq)
        .enumerate()
        .map(|(e, pts)| element_tangent(sys, set, e, pts, &kin, assignment))
        .collect()
}

/// Derivatives of the residuals over all dofs.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentBlocks {
    pub uu: DMatrix<f64>,
    pub ul: DMatrix<f64>,
    pub lu: DMatrix<f64>,
    pub ll: DMatrix<f64>,
}

/// Dense tangent blocks `dR_u/du`, `dR_u/dlambda`, `dR_lambda/du`, `dR_lambda/dlambda`.
pub fn tangent_blocks(
    sys: &CsSystem<'_>,
    set: &DataSet,
    u: &[f64],
    lambda: &[f64],
    assignment: &[usize],
) -> Result<TangentBlocks> {
    sys.check_assignment(set, assignment)?;
    let d = sys.mesh.dim();
    let n = sys.dofs.num_dofs();
    let npe = sys.mesh.element_type().nodes_per_element();
    let nl = npe * d;
    let size = 2 * nl;
    let mut blocks = TangentBlocks {
        uu: DMatrix::zeros(n, n),
        ul: DMatrix::zeros(n, n),
        lu: DMatrix::zeros(n, n),
        ll: DMatrix::zeros(n, n),
    };
    for (e, k) in element_tangents(sys, set, u, lambda, assignment).iter().enumerate() {
        let conn = sys.mesh.element(e);
        let g = |loc: usize| conn[(loc % nl) / d] * d + loc % d;
        for r in 0..size {
            for c in 0..size {
                let v = k[r * size + c];
                let m = match (r < nl, c < nl) {
                    (true, true) => &mut blocks.uu,
                    (true, false) => &mut blocks.ul,
                    (false, true) => &mut blocks.lu,
                    (false, false) => &mut blocks.ll,
                };
                m[(g(r), g(c))] += v;
            }
        }
    }
    Ok(blocks)
}

fn assemble_jacobian(sys: &CsSystem<'_>, set: &DataSet, u: &[f64], lambda: &[f64], assignment: &[usize]) -> BandedLu {
    let d = sys.mesh.dim();
    let npe = sys.mesh.element_type().nodes_per_element();
    let nl = npe * d;
    let size = 2 * nl;
    let mut jac = BandedLu::new(sys.unknowns, sys.band, sys.band);
    for (e, k) in element_tangents(sys, set, u, lambda, assignment).iter().enumerate() {
        let conn = sys.mesh.element(e);
        let pos = |loc: usize| {
            let g = conn[(loc % nl) / d] * d + loc % d;
            if loc < nl {
                sys.pos_u[g]
            } else {
                sys.pos_lambda[g]
            }
        };
        for r in 0..size {
            let Some(pr) = pos(r) else { continue };
            for c in 0..size {
                if let Some(pc) = pos(c) {
                    jac.add(pr, pc, k[r * size + c]);
                }
            }
        }
    }
    jac
}

/// Converged Newton iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

fn residual_norm(sys: &CsSystem<'_>, set: &DataSet, u: &[f64], lambda: &[f64], assignment: &[usize], load: f64) -> Result<(Vec<f64>, f64)> {
    let ru = residual_u(sys, set, u, lambda, assignment)?;
    let rl = residual_lambda(sys, set, u, lambda, assignment, load)?;
    let r = sys.stacked(&ru, &rl);
    let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((r, n))
}

/// Newton iteration on `(R_u, R_lambda) = 0` for a fixed assignment, starting
/// from `(u0, lambda0)` with Dirichlet values and loads scaled by `load`.
pub fn newton_solve(
    sys: &CsSystem<'_>,
    set: &DataSet,
    assignment: &[usize],
    config: &CsSolveConfig,
    u0: &[f64],
    lambda0: &[f64],
    load: f64,
) -> Result<NewtonOutcome> {
    sys.check_assignment(set, assignment)?;
    let ndof = sys.dofs.num_dofs();
    if u0.len() != ndof || lambda0.len() != ndof {
        return Err(Error::invalid("initial fields do not match the dof count"));
    }
    let mut u = u0.to_vec();
    let mut lambda = lambda0.to_vec();
    for g in 0..ndof {
        if sys.dofs.u.is_fixed(g) {
            u[g] = sys.dofs.u.prescribed[g] * load;
        }
        if sys.dofs.lambda.is_fixed(g) {
            lambda[g] = sys.dofs.lambda.prescribed[g] * load;
        }
    }
    let fnorm = free_norm(&sys.f_ext, &sys.dofs.lambda.free) * load.abs();
    let tol = config.newton_tol * (1.0 + fnorm);
    let (mut r, mut rn) = residual_norm(sys, set, &u, &lambda, assignment, load)?;
    let mut history = vec![rn];
    let fail = |iterations: usize, reason: String, history: &[f64]| Error::Newton {
        iterations,
        reason,
        history: history.to_vec(),
    };
    let mut it = 0;
    while rn > tol {
        if it == config.newton_maxit {
            return Err(fail(it, format!("residual {rn:e} above tolerance {tol:e}"), &history));
        }
        it += 1;
        let mut jac = assemble_jacobian(sys, set, &u, &lambda, assignment);
        jac.factor().map_err(|e| fail(it, e.to_string(), &history))?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = jac.solve(&neg);
        let x0 = sys.unknown_vector(&u, &lambda);
        let mut step = 1.0;
        let mut tries = 0;
        loop {
            let x: Vec<f64> = x0.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
            let (mut ut, mut lt) = (u.clone(), lambda.clone());
            sys.scatter_unknowns(&x, &mut ut, &mut lt);
            let (rt, rtn) = residual_norm(sys, set, &ut, &lt, assignment, load)?;
            let accept = match config.line_search {
                LineSearch::None => true,
                LineSearch::Backtracking { .. } => rtn < rn,
            };
            if accept && rtn.is_finite() {
                log::trace!("newton {it}: |R| {rtn:e}, ratio |R_k+1|/|R_k|^2 = {:e}", rtn / (rn * rn));
                u = ut;
                lambda = lt;
                r = rt;
                rn = rtn;
                break;
            }
            match config.line_search {
                LineSearch::Backtracking { factor, max_steps } if tries < max_steps => {
                    step *= factor;
                    tries += 1;
                }
                _ => {
                    history.push(rtn);
                    return Err(fail(it, format!("residual {rtn:e} could not be reduced from {rn:e}"), &history));
                }
            }
        }
        history.push(rn);
    }
    Ok(NewtonOutcome {
        u,
        lambda,
        iterations: it,
        residual_history: history,
    })
}

fn equilibrium_scale(sys: &CsSystem<'_>, load: f64) -> f64 {
    (free_norm(&sys.f_ext, &sys.dofs.lambda.free) * load.abs()).max(f64::MIN_POSITIVE)
}

/// Runs the (C, S) data-driven solver with load continuation.
pub fn solve_cs(mesh: &Mesh, bcs: &BoundaryConditions, dataset: &DataSet, config: &CsSolveConfig) -> Result<SolveReport> {
    solve_cs_from(mesh, bcs, dataset, config, None)
}

/// [`solve_cs`] starting from a given assignment.
pub fn solve_cs_from(
    mesh: &Mesh,
    bcs: &BoundaryConditions,
    dataset: &DataSet,
    config: &CsSolveConfig,
    start: Option<&[usize]>,
) -> Result<SolveReport> {
    config.validate()?;
    check_dataset(dataset, mesh, Formulation::Cs)?;
    let set = resolve_mu0(dataset, config.mu0)?;
    let sys = CsSystem::new(mesh, bcs, set.mu0())?;
    let index = build_index(&set, config.search)?;
    let weights = qp_weights(&sys.qps);
    let settings = LoopSettings {
        max_data_iterations: config.max_data_iterations,
        penalty_tol: config.penalty_tol,
    };
    let ndof = sys.dofs.num_dofs();
    let mut warm_u = vec![0.0; ndof];
    let mut warm_lambda = vec![0.0; ndof];
    let mut assignment = match start {
        Some(a) => check_start(a, &set, sys.qps.len())?,
        None => initial_assignment(&index, sys.qps.len(), mesh.dim()),
    };
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut last = None;
    for step in 1..=config.load_steps {
        let load = step as f64 / config.load_steps as f64;
        let outcome = data_loop(&index, &weights, assignment.clone(), &settings, step, &mut history, |a| {
            let n = newton_solve(&sys, &set, a, config, &warm_u, &warm_lambda, load)?;
            warm_u.clone_from(&n.u);
            warm_lambda.clone_from(&n.lambda);
            let states = recover_states_cs(&sys, &set, &n.u, &n.lambda, a)?;
            let rl = residual_lambda(&sys, &set, &n.u, &n.lambda, a, load)?;
            let residual = free_norm(&rl, &sys.dofs.lambda.free) / equilibrium_scale(&sys, load);
            Ok(InnerSolution {
                u: n.u,
                lambda: n.lambda,
                states,
                newton_iterations: n.iterations,
                residual,
            })
        })?;
        assignment = outcome.solution.states.iter().map(|s| s.assigned.expect("assigned")).collect();
        warm_u.clone_from(&outcome.solution.u);
        warm_lambda.clone_from(&outcome.solution.lambda);
        let done = !outcome.converged || step == config.load_steps;
        if !outcome.converged {
            log::warn!("load step {step} of {} did not converge ({})", config.load_steps, outcome.reason);
        }
        last = Some(outcome);
        if done {
            break;
        }
    }
    let outcome = last.expect("at least one load step");
    let states = outcome.solution.states;
    let max_asymmetry = states
        .iter()
        .map(|s| s.stress.asymmetry() / s.stress.norm().max(1.0))
        .fold(0.0, f64::max);
    let diagnostics = Diagnostics {
        equilibrium_residual: outcome.solution.residual,
        compatibility_gap: compatibility_gap(&set, &states, &weights),
        max_asymmetry,
    };
    let reason = outcome.reason;
    Ok(SolveReport {
        formulation: Formulation::Cs,
        status: if outcome.converged { SolveStatus::Converged } else { SolveStatus::NonConverged },
        stop_reason: reason,
        mu0: set.mu0(),
        u: outcome.solution.u,
        lambda: outcome.solution.lambda,
        states,
        weights,
        data_iterations: history.iter().filter(|h| h.load_step == history.last().map_or(0, |l| l.load_step)).count(),
        history,
        penalty: outcome.penalty,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::PairingKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_cs(points: &[(f64, f64)], mu0: f64) -> DataSet {
        DataSet::new(
            PairingKind::Cs,
            1,
            points.iter().map(|&(c, s)| (Tensor2::scalar(c), Tensor2::scalar(s))).collect(),
            Some(mu0),
        )
        .unwrap()
    }

    fn rod(n: usize) -> (Mesh, BoundaryConditions) {
        let m = Mesh::line(n, 0.1, 1e-6).unwrap();
        let mut bc = BoundaryConditions::new();
        bc.fix_set(&m, "xmin", 0, 0.0).unwrap();
        (m, bc)
    }

    #[test]
    fn residual_u_examples() {
        let (m, bc) = rod(1);
        let mu0 = 2.0;
        let sys = CsSystem::new(&m, &bc, mu0).unwrap();
        let set = scalar_cs(&[(1.0, 0.0), (1.0, 5.0)], mu0);
        let z = vec![0.0; 2];
        assert!(residual_u(&sys, &set, &z, &z, &[0, 0]).unwrap().iter().all(|&v| v == 0.0));
        let u = vec![0.0, 0.01];
        let r = residual_u(&sys, &set, &u, &z, &[0, 0]).unwrap();
        let expect = 2.0 * mu0 * 1.1 * (1.21 - 1.0) * 1e-6;
        assert!((r[1] - expect).abs() < 1e-12 * expect && (r[0] + expect).abs() < 1e-12 * expect);

        let lam = vec![0.0, 0.003];
        let base = residual_u(&sys, &set, &u, &z, &[0, 0]).unwrap();
        let pert = residual_u(&sys, &set, &u, &lam, &[0, 0]).unwrap();
        let lp = 0.03;
        let term = -mu0 * lp * lp * 1.1 * 1e-6;
        assert!((pert[1] - base[1] - term).abs() < 1e-12 * term.abs());
    }

    #[test]
    fn residual_lambda_examples() {
        let (m, mut bc) = rod(3);
        let n0 = 2.0;
        bc.load_set(&m, "xmax", [n0 / 1e-6, 0.0, 0.0]).unwrap();
        let sys = CsSystem::new(&m, &bc, 1.0e6).unwrap();
        let set = scalar_cs(&[(1.0, n0 / 1e-6), (1.0, 0.0)], 1.0e6);
        let z = vec![0.0; 4];
        let r = residual_lambda(&sys, &set, &z, &z, &[0; 6], 1.0).unwrap();
        assert!(r[1..].iter().all(|v| v.abs() < 1e-12));
        let r = residual_lambda(&sys, &set, &z, &z, &[1; 6], 1.0).unwrap();
        for (a, b) in r.iter().zip(&sys.f_ext) {
            assert_eq!(*a, -b);
        }
        let (m, bc) = rod(2);
        let sys = CsSystem::new(&m, &bc, 1.0).unwrap();
        assert!(residual_lambda(&sys, &set, &[0.0; 3], &[0.0; 3], &[1; 4], 1.0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovery_examples() {
        let (m, bc) = rod(1);
        let sys = CsSystem::new(&m, &bc, 1.0).unwrap();
        let set = scalar_cs(&[(1.0, 0.0), (1.0, 4.0)], 1.0);
        let s = recover_states_cs(&sys, &set, &[0.0, 0.02], &[0.0, 0.01], &[0, 0]).unwrap();
        for st in &s {
            assert!((st.stress.get(0, 0) - 0.12).abs() < 1e-12);
            assert!((st.strain.get(0, 0) - 1.44).abs() < 1e-12);
        }
        let s = recover_states_cs(&sys, &set, &[0.0, 0.0], &[0.0, 0.0], &[1, 1]).unwrap();
        assert!(s.iter().all(|st| st.stress.get(0, 0) == 4.0 && st.strain == Tensor2::identity(1)));
    }

    fn random_problem(dim: usize, seed: u64) -> (Mesh, BoundaryConditions, DataSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = match dim {
            1 => Mesh::line(3, 1.0, 0.5).unwrap(),
            2 => Mesh::rectangle(2, 2, 1.0, 1.0, 1.0).unwrap().mapped(|x| vec![x[0] + 0.1 * x[1] * x[1], x[1] + 0.05 * x[0]]).unwrap(),
            _ => Mesh::cuboid([1, 1, 2], [1.0, 1.0, 1.0]).unwrap(),
        };
        let mut bc = BoundaryConditions::new();
        for c in 0..dim {
            bc.fix_set(&m, "xmin", c, 0.0).unwrap();
        }
        bc.load_set(&m, "xmax", [0.3, 0.1, 0.0]).unwrap();
        let pairs = (0..5)
            .map(|_| {
                let a = Tensor2::from_fn(dim, |_, _| rng.gen_range(-0.2..0.2)).symmetric_part();
                let b = Tensor2::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)).symmetric_part();
                (Tensor2::identity(dim) + a, b)
            })
            .collect();
        (m, bc, DataSet::new(PairingKind::Cs, dim, pairs, Some(1.3)).unwrap())
    }

    #[test]
    fn tangent_matches_finite_differences() {
        for dim in 1..=3 {
            for seed in 0..20u64 {
                let (m, bc, set) = random_problem(dim, seed);
                let sys = CsSystem::new(&m, &bc, set.mu0()).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let n = sys.dofs.num_dofs();
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
                let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
                let asg: Vec<usize> = (0..sys.qps.len()).map(|_| rng.gen_range(0..set.len())).collect();
                let t = tangent_blocks(&sys, &set, &u, &lam, &asg).unwrap();
                let h = 1e-6;
                let mut fd = [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
                for k in 0..n {
                    for (field, offset) in [(0usize, 0usize), (1, 1)] {
                        let (mut up, mut um) = (u.clone(), u.clone());
                        let (mut lp, mut lm) = (lam.clone(), lam.clone());
                        if field == 0 {
                            up[k] += h;
                            um[k] -= h;
                        } else {
                            lp[k] += h;
                            lm[k] -= h;
                        }
                        let ru = |a: &[f64], b: &[f64]| residual_u(&sys, &set, a, b, &asg).unwrap();
                        let rl = |a: &[f64], b: &[f64]| residual_lambda(&sys, &set, a, b, &asg, 1.0).unwrap();
                        let du: Vec<f64> = ru(&up, &lp).iter().zip(ru(&um, &lm)).map(|(p, q)| (p - q) / (2.0 * h)).collect();
                        let dl: Vec<f64> = rl(&up, &lp).iter().zip(rl(&um, &lm)).map(|(p, q)| (p - q) / (2.0 * h)).collect();
                        for r in 0..n {
                            fd[offset][(r, k)] = du[r];
                            fd[2 + offset][(r, k)] = dl[r];
                        }
                    }
                }
                for (blk, f) in [&t.uu, &t.ul, &t.lu, &t.ll].iter().zip(&fd) {
                    let err = (*blk - f).norm();
                    assert!(err <= 1e-6 * f.norm().max(1e-12), "dim {dim} seed {seed}: {err:e} vs {:e}", f.norm());
                }
            }
        }
    }

    #[test]
    fn reference_state_tangent_is_scaled_laplacian() {
        let m = Mesh::rectangle(2, 3, 1.0, 1.5, 0.2).unwrap();
        let mut bc = BoundaryConditions::new();
        bc.fix_set(&m, "xmin", 0, 0.0).unwrap().fix_set(&m, "xmin", 1, 0.0).unwrap();
        let set = DataSet::new(PairingKind::Cs, 2, vec![(Tensor2::identity(2), Tensor2::zeros(2))], Some(3.0)).unwrap();
        let sys = CsSystem::new(&m, &bc, 3.0).unwrap();
        let n = sys.dofs.num_dofs();
        let t = tangent_blocks(&sys, &set, &vec![0.0; n], &vec![0.0; n], &vec![0; sys.qps.len()]).unwrap();
        let k = DMatrix::from(&crate::fem::assemble_scaled_laplacian(&m, &sys.qps, 3.0));
        assert!((t.ll.clone() - k).abs().max() < 1e-12);
        let eig = nalgebra::SymmetricEigen::new(t.ll.clone()).eigenvalues;
        assert!(eig.iter().all(|&e| e > -1e-10));
        let (_, _, set3) = random_problem(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let l: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let t = tangent_blocks(&sys, &set3, &u, &l, &vec![2; sys.qps.len()]).unwrap();
        assert!((t.ll.clone() - t.ll.transpose()).abs().max() < 1e-12);
        assert!(nalgebra::SymmetricEigen::new(t.ll).eigenvalues.iter().all(|&e| e > -1e-10));
    }

    #[test]
    fn newton_from_exact_solution_takes_no_steps() {
        let (m, mut bc) = rod(4);
        let (area, mu0) = (1e-6, 1.0e6);
        let s = 0.3e6;
        bc.load_set(&m, "xmax", [s * 1.2, 0.0, 0.0]).unwrap();
        let set = scalar_cs(&[(1.44, s)], mu0);
        let sys = CsSystem::new(&m, &bc, mu0).unwrap();
        let u: Vec<f64> = (0..5).map(|i| 0.2 * m.node(i)[0]).collect();
        let cfg = CsSolveConfig::default();
        let out = newton_solve(&sys, &set, &[0; 8], &cfg, &u, &[0.0; 5], 1.0).unwrap();
        assert_eq!(out.iterations, 0);
        let out = newton_solve(&sys, &set, &[0; 8], &cfg, &[0.0; 5], &[0.0; 5], 1.0).unwrap();
        assert!(out.iterations <= 6, "{} iterations", out.iterations);
        assert!((out.u[4] - 0.02).abs() < 1e-10);
        let _ = area;
    }

    #[test]
    fn consistent_rod_cs() {
        let (m, mut bc) = rod(8);
        let c1 = 1.0e6;
        let lam1: f64 = 1.3;
        let s = 2.0 * c1 * (1.0 - lam1.powi(-3));
        bc.load_set(&m, "xmax", [lam1 * s, 0.0, 0.0]).unwrap();
        let pts: Vec<(f64, f64)> = [1.0, 1.1, lam1, 1.5]
            .iter()
            .map(|&l: &f64| (l * l, 2.0 * c1 * (1.0 - l.powi(-3))))
            .collect();
        let set = scalar_cs(&pts, c1);
        for load_steps in [1, 4] {
            let cfg = CsSolveConfig { load_steps, line_search: LineSearch::Backtracking { factor: 0.5, max_steps: 8 }, ..Default::default() };
            let rep = solve_cs(&m, &bc, &set, &CsSolveConfig { mu0: Some(c1), ..cfg }).unwrap();
            assert!(rep.converged(), "{:?}", rep.stop_reason);
            assert!((rep.u[8] - (lam1 - 1.0) * 0.1).abs() < 1e-9);
            assert!(rep.penalty < 1e-12 * c1 * 1e-7);
        }
    }
}
