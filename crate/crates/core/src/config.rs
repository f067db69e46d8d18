//! Run configuration: a TOML file naming the mesh, the data, boundary
//! conditions, solver settings and outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data_gen::{generate_1d, GeneratorSpec};
use crate::error::{Error, Result};
use crate::fem::{read_mesh, BoundaryConditions, Dirichlet, Mesh};
use crate::multilevel::MultilevelConfig;
use crate::phase_space::{read_dataset, DataSet, TupleSource};
use crate::reference::LinearElasticLaw;
use crate::solver::{CsSolveConfig, Formulation, FpSolveConfig, SolverSettings};

/// Structured meshes built in place of a mesh file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshBuilder {
    Line { n: usize, length: f64, area: f64 },
    Rectangle { nx: usize, ny: usize, lx: f64, ly: f64, thickness: f64 },
    Cuboid { n: [usize; 3], size: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    File(PathBuf),
    Builder(MeshBuilder),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSpec {
    pub set: String,
    pub component: usize,
    #[serde(default)]
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionSpec {
    pub set: String,
    pub value: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub fields: bool,
    pub states: bool,
    pub history: bool,
    pub vtk: bool,
    pub level_table: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            fields: true,
            states: true,
            history: true,
            vtk: false,
            level_table: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub formulation: Formulation,
    pub mesh: MeshSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub body_force: [f64; 3],
    #[serde(default)]
    pub allow_overlap: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dirichlet: Vec<DirichletSpec>,
    /// Multiplier constraints; by default they follow the displacement ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet_lambda: Option<Vec<DirichletSpec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traction: Vec<TractionSpec>,
    /// Keys of `FpSolveConfig` or `CsSolveConfig`, by formulation.
    #[serde(default)]
    pub solver: toml::Table,
    /// Dense data refined into for `multilevel` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multilevel: Option<MultilevelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<LinearElasticLaw>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A parsed configuration with its location and raw text.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
    pub text: String,
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = "value"` assignment mentioning `value`.
fn line_of_value(text: &str, value: &str) -> usize {
    let quoted = format!("\"{value}\"");
    text.lines()
        .position(|l| l.split('#').next().is_some_and(|c| c.contains(&quoted)))
        .map_or(1, |i| i + 1)
}

fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.starts_with(key) && t[key.len()..].trim_start().starts_with('=')
        })
        .or_else(|| text.lines().position(|l| l.trim() == format!("[{key}]")))
        .map_or(1, |i| i + 1)
}

impl RunConfig {
    /// Parses TOML text. `path` only labels error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of_offset(text, s.start));
            err(line, e.message().to_string())
        })?;
        if cfg.dataset.is_some() == cfg.generator.is_some() {
            let line = line_of_key(text, "dataset").max(line_of_key(text, "generator"));
            return Err(err(line, "exactly one of 'dataset' and '[generator]' must be given".into()));
        }
        if cfg.source.is_some() && cfg.source_generator.is_some() {
            return Err(err(line_of_key(text, "source"), "give at most one of 'source' and '[source_generator]'".into()));
        }
        cfg.solver_settings().and_then(|s| s.validate()).map_err(|e| {
            let msg = e.to_string();
            let key = msg.split('`').nth(1).filter(|_| msg.contains("unknown field")).unwrap_or("solver");
            err(line_of_key(text, key), msg)
        })?;
        if let Some(m) = &cfg.multilevel {
            m.validate().map_err(|e| err(line_of_key(text, "multilevel"), e.to_string()))?;
        }
        for g in cfg.generator.iter().chain(&cfg.source_generator) {
            g.validate().map_err(|e| err(line_of_key(text, "generator"), e.to_string()))?;
        }
        if let Some(law) = &cfg.reference {
            law.validate().map_err(|e| err(line_of_key(text, "reference"), e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LoadedConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Self::parse(&text, path)?;
        Ok(LoadedConfig {
            config,
            path: path.to_path_buf(),
            text,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let table = toml::Value::Table(self.solver.clone());
        let bad = |e: toml::de::Error| Error::Config(format!("[solver]: {}", e.message()));
        Ok(match self.formulation {
            Formulation::Fp => SolverSettings::Fp(table.try_into::<FpSolveConfig>().map_err(bad)?),
            Formulation::Cs => SolverSettings::Cs(table.try_into::<CsSolveConfig>().map_err(bad)?),
        })
    }
}

impl LoadedConfig {
    /// Resolves `p` against the directory of the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    pub fn hash(&self) -> String {
        config_hash(&self.text)
    }

    fn err(&self, line: usize, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match &self.config.mesh {
            MeshSource::File(p) => read_mesh(self.resolve(p)),
            MeshSource::Builder(b) => match *b {
                MeshBuilder::Line { n, length, area } => Mesh::line(n, length, area),
                MeshBuilder::Rectangle { nx, ny, lx, ly, thickness } => Mesh::rectangle(nx, ny, lx, ly, thickness),
                MeshBuilder::Cuboid { n, size } => Mesh::cuboid(n, size),
            }
            .map_err(|e| self.err(line_of_key(&self.text, "mesh"), e.to_string())),
        }
    }

    /// Boundary conditions; unknown sets are reported at their config line.
    pub fn build_bcs(&self, mesh: &Mesh) -> Result<BoundaryConditions> {
        let c = &self.config;
        let mut bcs = BoundaryConditions::new();
        bcs.body_force = c.body_force;
        bcs.allow_overlap = c.allow_overlap;
        for d in &c.dirichlet {
            bcs.fix_set(mesh, &d.set, d.component, d.value)
                .map_err(|e| self.err(line_of_value(&self.text, &d.set), e.to_string()))?;
        }
        for t in &c.traction {
            bcs.load_set(mesh, &t.set, t.value)
                .map_err(|e| self.err(line_of_value(&self.text, &t.set), e.to_string()))?;
        }
        if let Some(list) = &c.dirichlet_lambda {
            let mut lam = BoundaryConditions::new();
            let mut out: Vec<Dirichlet> = Vec::new();
            for d in list {
                lam.fix_set(mesh, &d.set, d.component, d.value)
                    .map_err(|e| self.err(line_of_value(&self.text, &d.set), e.to_string()))?;
            }
            out.extend(lam.dirichlet_u);
            bcs.dirichlet_lambda = Some(out);
        }
        bcs.validate(mesh).map_err(|e| self.err(line_of_key(&self.text, "traction"), e.to_string()))?;
        Ok(bcs)
    }

    /// The data set of level 0, with `mu0` from `[solver]` when given.
    pub fn load_dataset(&self) -> Result<DataSet> {
        let mu0 = self.config.solver_settings()?.mu0();
        match (&self.config.dataset, &self.config.generator) {
            (Some(p), _) => read_dataset(self.resolve(p), mu0),
            (None, Some(g)) => generate_1d(g, mu0),
            (None, None) => Err(Error::Config("no data given".into())),
        }
    }

    /// Refinement source for multi-level runs; defaults to the level-0 data.
    pub fn load_source(&self) -> Result<Option<Box<dyn TupleSource>>> {
        if let Some(p) = &self.config.source {
            return Ok(Some(Box::new(read_dataset(self.resolve(p), None)?)));
        }
        Ok(self.config.source_generator.clone().map(|g| Box::new(g) as Box<dyn TupleSource>))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output.dir)
    }
}
