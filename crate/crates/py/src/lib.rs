use std::path::PathBuf;

use ddfem::config::RunConfig;
use ddfem::data_gen::{self, Family, GeneratorSpec};
use ddfem::fem::{self, BoundaryConditions};
use ddfem::phase_space::{self, PairingKind};
use ddfem::reference;
use ddfem::solver::{self, CsSolveConfig, FpSolveConfig};
use ddfem::tensor::Tensor2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: ddfem::Error) -> PyErr {
    match e {
        ddfem::Error::Newton { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn pairing(s: &str) -> PyResult<PairingKind> {
    s.parse().map_err(err)
}

fn tensor(dim: usize, values: &[f64]) -> PyResult<Tensor2> {
    Tensor2::from_row_major(dim, values).map_err(err)
}

#[pyclass(name = "Mesh", module = "pyddfem")]
#[derive(Clone)]
struct PyMesh(fem::Mesh);

#[pymethods]
impl PyMesh {
    #[staticmethod]
    fn line(n: usize, length: f64, area: f64) -> PyResult<Self> {
        fem::Mesh::line(n, length, area).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (nx, ny, lx, ly, thickness = 1.0))]
    fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64, thickness: f64) -> PyResult<Self> {
        fem::Mesh::rectangle(nx, ny, lx, ly, thickness).map(Self).map_err(err)
    }

    #[staticmethod]
    fn cuboid(n: [usize; 3], size: [f64; 3]) -> PyResult<Self> {
        fem::Mesh::cuboid(n, size).map(Self).map_err(err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        fem::read_mesh(path).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.0.num_nodes()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.0.num_elements()
    }

    fn node(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.0.num_nodes() {
            return Err(PyValueError::new_err(format!("node {i} out of range")));
        }
        Ok(self.0.node(i).to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Mesh(dim={}, nodes={}, elements={})", self.0.dim(), self.0.num_nodes(), self.0.num_elements())
    }
}

#[pyclass(name = "BoundaryConditions", module = "pyddfem")]
#[derive(Clone, Default)]
struct PyBoundaryConditions(BoundaryConditions);

#[pymethods]
impl PyBoundaryConditions {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Prescribes displacement component `component` on a node set.
    #[pyo3(signature = (mesh, set, component, value = 0.0))]
    fn fix(&mut self, mesh: &PyMesh, set: &str, component: usize, value: f64) -> PyResult<()> {
        self.0.fix_set(&mesh.0, set, component, value).map(|_| ()).map_err(err)
    }

    /// Constant nominal traction (Pa) on a face set.
    fn load(&mut self, mesh: &PyMesh, set: &str, value: [f64; 3]) -> PyResult<()> {
        self.0.load_set(&mesh.0, set, value).map(|_| ()).map_err(err)
    }

    #[getter]
    fn get_body_force(&self) -> [f64; 3] {
        self.0.body_force
    }

    #[setter]
    fn set_body_force(&mut self, value: [f64; 3]) {
        self.0.body_force = value;
    }
}

#[pyclass(name = "DataSet", module = "pyddfem")]
#[derive(Clone)]
struct PyDataSet(phase_space::DataSet);

#[pymethods]
impl PyDataSet {
    /// Builds a set from row-major strain and stress lists.
    #[new]
    #[pyo3(signature = (kind, dim, strains, stresses, mu0 = None))]
    fn new(kind: &str, dim: usize, strains: Vec<Vec<f64>>, stresses: Vec<Vec<f64>>, mu0: Option<f64>) -> PyResult<Self> {
        if strains.len() != stresses.len() {
            return Err(PyValueError::new_err("strains and stresses differ in length"));
        }
        let pairs = strains
            .iter()
            .zip(&stresses)
            .map(|(e, s)| Ok((tensor(dim, e)?, tensor(dim, s)?)))
            .collect::<PyResult<_>>()?;
        phase_space::DataSet::new(pairing(kind)?, dim, pairs, mu0).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (path, mu0 = None))]
    fn read(path: PathBuf, mu0: Option<f64>) -> PyResult<Self> {
        phase_space::read_dataset(path, mu0).map(Self).map_err(err)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        phase_space::write_dataset(path, &self.0).map_err(err)
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn mu0(&self) -> f64 {
        self.0.mu0()
    }

    fn with_mu0(&self, mu0: f64) -> PyResult<Self> {
        self.0.clone().with_mu0(mu0).map(Self).map_err(err)
    }

    fn tuple(&self, id: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let t = self.0.get(id).ok_or_else(|| PyValueError::new_err(format!("tuple {id} out of range")))?;
        Ok((t.strain.as_slice().to_vec(), t.stress.as_slice().to_vec()))
    }

    fn convert(&self, target: &str) -> PyResult<Self> {
        data_gen::convert_pairing(&self.0, pairing(target)?).map(Self).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("DataSet(kind={}, dim={}, len={}, mu0={:e})", self.0.kind(), self.0.dim(), self.0.len(), self.0.mu0())
    }
}

#[pyclass(name = "SolveReport", module = "pyddfem", frozen)]
struct PySolveReport(solver::SolveReport);

#[pymethods]
impl PySolveReport {
    #[getter]
    fn formulation(&self) -> String {
        self.0.formulation.to_string()
    }

    #[getter]
    fn status(&self) -> String {
        self.0.status.to_string()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged()
    }

    #[getter]
    fn stop_reason(&self) -> String {
        self.0.stop_reason.to_string()
    }

    #[getter]
    fn mu0(&self) -> f64 {
        self.0.mu0
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.0.u.clone()
    }

    #[getter]
    fn multiplier(&self) -> Vec<f64> {
        self.0.lambda.clone()
    }

    #[getter]
    fn penalty(&self) -> f64 {
        self.0.penalty
    }

    #[getter]
    fn data_iterations(&self) -> usize {
        self.0.data_iterations
    }

    /// Assigned tuple id per quadrature point.
    #[getter]
    fn assignments(&self) -> Vec<usize> {
        self.0.assignments()
    }

    /// Penalty after every data iteration.
    #[getter]
    fn penalty_history(&self) -> Vec<f64> {
        self.0.history.iter().map(|r| r.penalty).collect()
    }

    /// `(strain, stress)` per quadrature point, row-major.
    fn states(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.0.states.iter().map(|s| (s.strain.as_slice().to_vec(), s.stress.as_slice().to_vec())).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveReport({}, {}, iterations={}, penalty={:e})",
            self.0.formulation, self.0.status, self.0.data_iterations, self.0.penalty
        )
    }
}

#[pyfunction]
#[pyo3(signature = (mesh, bcs, data, max_data_iterations = 100, mu0 = None))]
fn solve_fp(mesh: &PyMesh, bcs: &PyBoundaryConditions, data: &PyDataSet, max_data_iterations: usize, mu0: Option<f64>) -> PyResult<PySolveReport> {
    let cfg = FpSolveConfig {
        max_data_iterations,
        mu0,
        ..Default::default()
    };
    solver::solve_fp(&mesh.0, &bcs.0, &data.0, &cfg).map(PySolveReport).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mesh, bcs, data, max_data_iterations = 100, load_steps = 1, newton_tol = 1e-10, mu0 = None))]
fn solve_cs(
    mesh: &PyMesh,
    bcs: &PyBoundaryConditions,
    data: &PyDataSet,
    max_data_iterations: usize,
    load_steps: usize,
    newton_tol: f64,
    mu0: Option<f64>,
) -> PyResult<PySolveReport> {
    let cfg = CsSolveConfig {
        max_data_iterations,
        load_steps,
        newton_tol,
        mu0,
        ..Default::default()
    };
    solver::solve_cs(&mesh.0, &bcs.0, &data.0, &cfg).map(PySolveReport).map_err(err)
}

/// Runs the data-driven solve described by a config file; no files are written.
#[pyfunction]
fn solve_config(path: PathBuf) -> PyResult<PySolveReport> {
    let cfg = RunConfig::load(&path).map_err(err)?;
    let mesh = cfg.build_mesh().map_err(err)?;
    let bcs = cfg.build_bcs(&mesh).map_err(err)?;
    let set = cfg.load_dataset().map_err(err)?;
    let settings = cfg.config.solver_settings().map_err(err)?;
    settings.solve(&mesh, &bcs, &set, None).map(PySolveReport).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (family, c1, stretch_range, n, pairing_kind, c3 = 0.0))]
fn generate_1d(family: &str, c1: f64, stretch_range: [f64; 2], n: usize, pairing_kind: &str, c3: f64) -> PyResult<PyDataSet> {
    let family: Family = family.parse().map_err(err)?;
    let spec = GeneratorSpec::new(family, c1, c3, stretch_range, n, pairing(pairing_kind)?);
    data_gen::generate_1d(&spec, None).map(PyDataSet).map_err(err)
}

#[pyfunction]
fn augment_rotations_2d(base: &PyDataSet, n_angles: usize) -> PyResult<PyDataSet> {
    data_gen::augment_rotations_2d(&base.0, n_angles).map(PyDataSet).map_err(err)
}

/// Exact end displacement of the incompressible rod under end force `n0` (N).
#[pyfunction]
#[pyo3(signature = (family, c1, n0, area, length, c3 = 0.0))]
fn rod_analytic(family: &str, c1: f64, n0: f64, area: f64, length: f64, c3: f64) -> PyResult<f64> {
    let family: Family = family.parse().map_err(err)?;
    reference::rod_analytic(family, c1, c3, n0, area, length).map_err(err)
}

/// Small-strain linear elastic displacements on the same mesh and boundary conditions.
#[pyfunction]
fn solve_linear_elastic(mesh: &PyMesh, bcs: &PyBoundaryConditions, young: f64, poisson: f64) -> PyResult<Vec<f64>> {
    let law = reference::LinearElasticLaw::new(young, poisson).map_err(err)?;
    reference::solve_linear_elastic(&mesh.0, &bcs.0, &law).map_err(err)
}

#[pymodule]
fn pyddfem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyBoundaryConditions>()?;
    m.add_class::<PyDataSet>()?;
    m.add_class::<PySolveReport>()?;
    m.add_function(wrap_pyfunction!(solve_fp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cs, m)?)?;
    m.add_function(wrap_pyfunction!(solve_config, m)?)?;
    m.add_function(wrap_pyfunction!(generate_1d, m)?)?;
    m.add_function(wrap_pyfunction!(augment_rotations_2d, m)?)?;
    m.add_function(wrap_pyfunction!(rod_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linear_elastic, m)?)?;
    Ok(())
}
