//! Multi-level data refinement: solve on `D_l`, collect the assigned tuples
//! `S_l`, enrich the data around them from a larger source and solve again.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryConditions, Mesh};
use crate::phase_space::{refine_around, DataSet, RadiusPolicy, TupleSource};
use crate::solver::{SolveReport, SolverSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultilevelConfig {
    pub max_levels: usize,
    /// Stops once the relative growth of `|S_l|` falls below this value.
    pub stop_delta: f64,
    /// Stops once the global penalty reaches this floor.
    pub penalty_floor: f64,
    pub radius: RadiusPolicy,
    /// Keeps unassigned tuples of `D_l` in `D_{l+1}`.
    pub keep_all: bool,
    /// Starts each level from the previous assignment.
    pub warm_start: bool,
}

impl Default for MultilevelConfig {
    fn default() -> Self {
        MultilevelConfig {
            max_levels: 5,
            stop_delta: 0.05,
            penalty_floor: 1e-18,
            radius: RadiusPolicy::default(),
            keep_all: false,
            warm_start: true,
        }
    }
}

impl MultilevelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be at least 1".into()));
        }
        if !self.stop_delta.is_finite() || self.penalty_floor < 0.0 {
            return Err(Error::Config("stop_delta must be finite and penalty_floor non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub data_size: usize,
    pub solution_size: usize,
    pub penalty: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct MultilevelOutcome {
    pub levels: Vec<LevelRecord>,
    /// Report of the last level solved.
    pub report: SolveReport,
    /// `D_l` of every level solved.
    pub datasets: Vec<DataSet>,
    /// `S_l` ids in the numbering of each level's set.
    pub solution_sets: Vec<Vec<usize>>,
}

impl MultilevelOutcome {
    /// Data set of the last level solved.
    pub fn data(&self) -> &DataSet {
        self.datasets.last().expect("at least one level")
    }
}

/// Runs levels until `max_levels`, stagnation of `|S_l|`, a vanishing penalty
/// or an unconverged level solve. `mu0` of level 0 is kept for all levels.
pub fn run_multilevel(
    mesh: &Mesh,
    bcs: &BoundaryConditions,
    source: &dyn TupleSource,
    level0: &DataSet,
    solver: &SolverSettings,
    config: &MultilevelConfig,
) -> Result<MultilevelOutcome> {
    config.validate()?;
    solver.validate()?;
    let mu0 = solver.mu0().unwrap_or(level0.mu0());
    let mut settings = solver.clone();
    settings.set_mu0(Some(mu0));
    let mut data = level0.clone().with_mu0(mu0)?;
    let mut levels: Vec<LevelRecord> = Vec::new();
    let mut solution_sets = Vec::new();
    let mut datasets = Vec::new();
    let mut start: Option<Vec<usize>> = None;
    for level in 0..config.max_levels {
        let t = Instant::now();
        let report = settings.solve(mesh, bcs, &data, start.as_deref())?;
        let ids = report.assigned_ids();
        let rec = LevelRecord {
            level,
            data_size: data.len(),
            solution_size: ids.len(),
            penalty: report.penalty,
            iterations: report.data_iterations,
            converged: report.converged(),
            wall_time: t.elapsed(),
        };
        log::info!(
            "level {level}: |D| = {}, |S| = {}, penalty {:e}, {} iterations, {:.3?}",
            rec.data_size,
            rec.solution_size,
            rec.penalty,
            rec.iterations,
            rec.wall_time
        );
        let growth = levels
            .last()
            .map(|p| (rec.solution_size as f64 - p.solution_size as f64) / (p.solution_size.max(1) as f64));
        let done = !rec.converged
            || level + 1 == config.max_levels
            || rec.penalty <= config.penalty_floor
            || growth.is_some_and(|g| g < config.stop_delta);
        levels.push(rec);
        solution_sets.push(ids.clone());
        if done {
            datasets.push(data);
            return Ok(MultilevelOutcome {
                levels,
                report,
                datasets,
                solution_sets,
            });
        }
        let next = refine_around(source, &ids, &data, config.radius, config.keep_all)?;
        start = if config.warm_start { Some(carry_assignment(&report, &data, &next)?) } else { None };
        datasets.push(std::mem::replace(&mut data, next));
    }
    unreachable!("the last level always returns")
}

fn bits(set: &DataSet, id: usize) -> Vec<u64> {
    let t = &set.tuples()[id];
    t.strain.as_slice().iter().chain(t.stress.as_slice()).map(|v| v.to_bits()).collect()
}

/// Maps each quadrature point's tuple into the numbering of `next`.
fn carry_assignment(report: &SolveReport, current: &DataSet, next: &DataSet) -> Result<Vec<usize>> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(next.len());
    for id in (0..next.len()).rev() {
        index.insert(bits(next, id), id);
    }
    report
        .assignments()
        .iter()
        .map(|&id| {
            index
                .get(&bits(current, id))
                .copied()
                .ok_or_else(|| Error::invalid(format!("assigned tuple {id} missing from the refined set")))
        })
        .collect()
}

/// Level table with columns `level |D_l| |S_l| penalty iterations converged`.
pub fn format_level_table(levels: &[LevelRecord]) -> String {
    let mut out = String::from("level\tdata_size\tsolution_size\tpenalty\titerations\tconverged\n");
    for r in levels {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:e}\t{}\t{}",
            r.level, r.data_size, r.solution_size, r.penalty, r.iterations, r.converged
        );
    }
    out
}
