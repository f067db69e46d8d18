use serde::{Deserialize, Serialize};

use super::{penalty_value, DataSet, LocalState};
use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// Nearest-tuple search algorithm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    #[default]
    BruteForce,
    /// Uniform bucketing over up to three strain components. Returns exactly
    /// the brute-force answer.
    Grid,
}

/// Closest tuple id to `state` under the set's metric, lowest id on ties.
pub fn nearest(state: &LocalState, set: &DataSet) -> Result<usize> {
    if set.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    for t in [&state.strain, &state.stress] {
        if t.dim() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                found: t.dim(),
            });
        }
    }
    Ok(brute_force(set, &state.strain, &state.stress).0)
}

fn brute_force(set: &DataSet, strain: &Tensor2, stress: &Tensor2) -> (usize, f64) {
    let mu0 = set.mu0();
    let mut best = (0, f64::INFINITY);
    for t in set.tuples() {
        let p = penalty_value(strain, stress, t, mu0);
        if p < best.1 {
            best = (t.id, p);
        }
    }
    best
}

#[derive(Clone, Debug)]
struct Grid {
    axes: Vec<usize>,
    origin: Vec<f64>,
    h: Vec<f64>,
    counts: Vec<usize>,
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn build(set: &DataSet) -> Option<Grid> {
        let d = set.dim();
        let n = set.len();
        let candidates: Vec<usize> = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|&(i, j)| !set.kind().is_symmetric() || i <= j)
            .map(|(i, j)| i * d + j)
            .collect();
        let mut spreads: Vec<(usize, f64, f64)> = candidates
            .iter()
            .map(|&k| {
                let (lo, hi) = set.tuples().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                    let v = t.strain.as_slice()[k];
                    (lo.min(v), hi.max(v))
                });
                (k, lo, hi - lo)
            })
            .filter(|&(_, _, s)| s > 0.0)
            .collect();
        if spreads.is_empty() || n < 16 {
            return None;
        }
        spreads.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        spreads.truncate(3);
        let k = spreads.len();
        let per_axis = ((n as f64).powf(1.0 / k as f64).round() as usize).max(1);
        let axes: Vec<usize> = spreads.iter().map(|s| s.0).collect();
        let origin: Vec<f64> = spreads.iter().map(|s| s.1).collect();
        let counts = vec![per_axis; k];
        let h: Vec<f64> = spreads.iter().map(|s| s.2 / per_axis as f64).collect();
        let total: usize = counts.iter().product();
        let mut grid = Grid {
            axes,
            origin,
            h,
            counts,
            cells: vec![Vec::new(); total],
        };
        for t in set.tuples() {
            let coord: Vec<i64> = (0..k).map(|a| grid.clamped(a, t.strain.as_slice()[grid.axes[a]])).collect();
            let flat = grid.flat(&coord);
            grid.cells[flat].push(t.id as u32);
        }
        Some(grid)
    }

    fn raw_coord(&self, axis: usize, v: f64) -> i64 {
        let c = ((v - self.origin[axis]) / self.h[axis]).floor();
        c.clamp(-(1i64 << 40) as f64, (1i64 << 40) as f64) as i64
    }

    fn clamped(&self, axis: usize, v: f64) -> i64 {
        self.raw_coord(axis, v).clamp(0, self.counts[axis] as i64 - 1)
    }

    fn flat(&self, coord: &[i64]) -> usize {
        coord
            .iter()
            .zip(&self.counts)
            .fold(0usize, |acc, (&c, &n)| acc * n + c as usize)
    }

    /// Lower bound on the squared strain distance from `q` to any point in cell `c`.
    fn cell_gap_sq(&self, q: &[f64], c: &[i64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.axes.len() {
            let lo = if c[a] == 0 { f64::NEG_INFINITY } else { self.origin[a] + c[a] as f64 * self.h[a] };
            let hi = if c[a] == self.counts[a] as i64 - 1 {
                f64::INFINITY
            } else {
                self.origin[a] + (c[a] + 1) as f64 * self.h[a]
            };
            let gap = if q[a] < lo {
                lo - q[a]
            } else if q[a] > hi {
                q[a] - hi
            } else {
                0.0
            };
            s += gap * gap;
        }
        s
    }

    fn query(&self, set: &DataSet, strain: &Tensor2, stress: &Tensor2) -> (usize, f64) {
        let mu0 = set.mu0();
        let k = self.axes.len();
        let q: Vec<f64> = self.axes.iter().map(|&ax| strain.as_slice()[ax]).collect();
        let qc: Vec<i64> = (0..k).map(|a| self.clamped(a, q[a])).collect();
        let r_max = (0..k)
            .map(|a| qc[a].max(self.counts[a] as i64 - 1 - qc[a]))
            .max()
            .unwrap_or(0);
        let h_min = self.h.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut coord = vec![0i64; k];
        for r in 0..=r_max {
            let ring_gap = (r - 1).max(0) as f64 * h_min;
            if 0.5 * mu0 * ring_gap * ring_gap > best.1 {
                break;
            }
            let lo: Vec<i64> = (0..k).map(|a| (qc[a] - r).max(0)).collect();
            let hi: Vec<i64> = (0..k).map(|a| (qc[a] + r).min(self.counts[a] as i64 - 1)).collect();
            coord.copy_from_slice(&lo);
            let mut done = false;
            while !done {
                let cheb = (0..k).map(|a| (coord[a] - qc[a]).abs()).max().unwrap_or(0);
                if cheb == r {
                    let cell = &self.cells[self.flat(&coord)];
                    if !cell.is_empty() && 0.5 * mu0 * self.cell_gap_sq(&q, &coord) <= best.1 {
                        for &id in cell {
                            let t = &set.tuples()[id as usize];
                            let p = penalty_value(strain, stress, t, mu0);
                            if p < best.1 || (p == best.1 && t.id < best.0) {
                                best = (t.id, p);
                            }
                        }
                    }
                }
                let mut a = k;
                loop {
                    if a == 0 {
                        done = true;
                        break;
                    }
                    a -= 1;
                    if coord[a] < hi[a] {
                        coord[a] += 1;
                        for b in a + 1..k {
                            coord[b] = lo[b];
                        }
                        break;
                    }
                }
            }
        }
        best
    }
}

/// Reusable nearest-tuple query structure over one data set.
#[derive(Clone, Debug)]
pub struct SearchIndex<'a> {
    set: &'a DataSet,
    grid: Option<Grid>,
}

impl<'a> SearchIndex<'a> {
    pub fn new(set: &'a DataSet, strategy: SearchStrategy) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyDataSet);
        }
        let grid = match strategy {
            SearchStrategy::BruteForce => None,
            SearchStrategy::Grid => Grid::build(set),
        };
        Ok(SearchIndex { set, grid })
    }

    pub fn set(&self) -> &'a DataSet {
        self.set
    }

    /// Nearest tuple id and its local penalty.
    pub fn query(&self, strain: &Tensor2, stress: &Tensor2) -> (usize, f64) {
        match &self.grid {
            Some(g) => g.query(self.set, strain, stress),
            None => brute_force(self.set, strain, stress),
        }
    }
}
