use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddfem::config::{LoadedConfig, RunConfig};
use ddfem::data_gen::{
    augment_rotations_2d, convert_pairing, generate_1d, isotropic_grid_from_two_states, Family, GeneratorSpec,
    IsotropicGrid, Spacing, UnitLoadLibrary,
};
use ddfem::multilevel::{format_level_table, run_multilevel};
use ddfem::phase_space::{read_dataset, write_dataset, PairingKind};
use ddfem::reference::solve_linear_elastic;
use ddfem::report::{emit_reference, emit_report, EmitFlags};
use ddfem::Error;

#[derive(Parser)]
#[command(name = "ddfem", version, about = "Data-driven finite element analysis of hyperelastic solids")]
struct Cli {
    /// Worker threads for assembly and search; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Data-driven solve of the boundary value problem in a config file.
    Solve(RunArgs),
    /// Writes an analytic or augmented data set.
    #[command(subcommand)]
    Generate(Generate),
    /// Multi-level refinement of the data set.
    Multilevel(MultilevelArgs),
    /// Small-strain linear elastic solve on the same mesh and boundary conditions.
    Reference(RunArgs),
    /// Checks a dataset file and prints a summary.
    ValidateDataset {
        file: PathBuf,
        #[arg(long)]
        mu0: Option<f64>,
    },
    /// Rewrites a dataset in another pairing.
    ConvertDataset {
        file: PathBuf,
        #[arg(long, value_parser = parse_pairing)]
        to: PairingKind,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides the output directory of the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also writes a legacy VTK file.
    #[arg(long)]
    vtk: bool,
}

#[derive(Args)]
struct MultilevelArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Keeps unassigned tuples of each level in the next one.
    #[arg(long)]
    keep_all: bool,
    #[arg(long)]
    max_levels: Option<usize>,
    #[arg(long)]
    stop_delta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpacingArg {
    Uniform,
    Log,
}

#[derive(Subcommand)]
enum Generate {
    /// Uniaxial rod data of a LINEAR, NEOHOOKE or YEOH law.
    Rod {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        /// Pa.
        #[arg(long)]
        c1: f64,
        /// Pa, YEOH only.
        #[arg(long, default_value_t = 0.0)]
        c3: f64,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
        range: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_pairing)]
        pairing: PairingKind,
        #[arg(long, value_enum, default_value = "uniform")]
        spacing: SpacingArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Adds rotated copies of a symmetric 2D data set.
    Rotate {
        base: PathBuf,
        #[arg(long)]
        angles: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Isotropic small-strain grid from the elongation and shear responses of a unit-load library.
    Isotropic {
        library: PathBuf,
        /// Voigt slot of the elongation response.
        #[arg(long, default_value_t = 0)]
        elong_slot: usize,
        /// Voigt slot of the shear response.
        #[arg(long, default_value_t = 3)]
        shear_slot: usize,
        /// Voigt slots spanned by the grid.
        #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2, 3, 4, 5])]
        slots: Vec<usize>,
        /// Strain amplitudes sampled along every slot.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        amplitudes: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        rotations: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn parse_pairing(s: &str) -> Result<PairingKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Input(String),
    NonConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Newton { .. } => Failure::NonConverged(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Solve(a) => solve(&a),
        Command::Generate(g) => generate(g),
        Command::Multilevel(a) => multilevel(&a),
        Command::Reference(a) => reference(&a),
        Command::ValidateDataset { file, mu0 } => validate(&file, mu0),
        Command::ConvertDataset { file, to, output } => convert(&file, to, &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NonConverged(msg)) => {
            eprintln!("NONCONVERGED: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(args: &RunArgs) -> Result<(LoadedConfig, PathBuf, EmitFlags), Failure> {
    let cfg = RunConfig::load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir());
    let o = &cfg.config.output;
    let flags = EmitFlags {
        fields: o.fields,
        states: o.states,
        history: o.history,
        vtk: o.vtk || args.vtk,
    };
    Ok((cfg, out, flags))
}

/// Errors without a source line are attributed to the config file.
fn located(cfg: &LoadedConfig) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Parse { .. } | Error::Newton { .. } => e.into(),
        other => Failure::Input(format!("{}: {other}", cfg.path.display())),
    }
}

fn solve(args: &RunArgs) -> Outcome {
    let (cfg, out, flags) = load(args)?;
    let at = located(&cfg);
    let mesh = cfg.build_mesh()?;
    let bcs = cfg.build_bcs(&mesh)?;
    let set = cfg.load_dataset()?;
    let settings = cfg.config.solver_settings().map_err(&at)?;
    log::info!("{} tuples, {} elements, {} formulation", set.len(), mesh.num_elements(), settings.formulation());
    let report = settings.solve(&mesh, &bcs, &set, None).map_err(&at)?;
    let written = emit_report(&out, &mesh, &set, &report, &cfg.hash(), flags)?;
    summarize(report.converged(), &format!("{} data iterations, penalty {:e}", report.data_iterations, report.penalty), &written)
}

fn multilevel(args: &MultilevelArgs) -> Outcome {
    let (cfg, out, flags) = load(&args.run)?;
    let at = located(&cfg);
    let mesh = cfg.build_mesh()?;
    let bcs = cfg.build_bcs(&mesh)?;
    let level0 = cfg.load_dataset()?;
    let settings = cfg.config.solver_settings().map_err(&at)?;
    let mut ml = cfg.config.multilevel.clone().unwrap_or_default();
    ml.keep_all |= args.keep_all;
    if let Some(n) = args.max_levels {
        ml.max_levels = n;
    }
    if let Some(d) = args.stop_delta {
        ml.stop_delta = d;
    }
    let source = cfg.load_source()?;
    let source: &dyn ddfem::phase_space::TupleSource = match &source {
        Some(s) => s.as_ref(),
        None => &level0,
    };
    let outcome = run_multilevel(&mesh, &bcs, source, &level0, &settings, &ml).map_err(&at)?;
    let mut written = emit_report(&out, &mesh, outcome.data(), &outcome.report, &cfg.hash(), flags)?;
    if cfg.config.output.level_table {
        let path = out.join("levels.tsv");
        std::fs::write(&path, format_level_table(&outcome.levels)).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    let last = outcome.levels.last().expect("at least one level");
    summarize(
        outcome.report.converged(),
        &format!("{} levels, |D| = {}, penalty {:e}", outcome.levels.len(), last.data_size, last.penalty),
        &written,
    )
}

fn reference(args: &RunArgs) -> Outcome {
    let (cfg, out, flags) = load(args)?;
    let law = cfg
        .config
        .reference
        .ok_or_else(|| Failure::Input(format!("{}:1: config has no [reference] section", cfg.path.display())))?;
    let mesh = cfg.build_mesh()?;
    let bcs = cfg.build_bcs(&mesh)?;
    let u = solve_linear_elastic(&mesh, &bcs, &law).map_err(located(&cfg))?;
    let written = emit_reference(&out, &mesh, &u, &cfg.hash(), flags.vtk)?;
    summarize(true, "linear elastic reference", &written)
}

fn summarize(converged: bool, what: &str, written: &[PathBuf]) -> Outcome {
    for p in written {
        log::info!("wrote {}", p.display());
    }
    if converged {
        println!("CONVERGED: {what}");
        Ok(())
    } else {
        Err(Failure::NonConverged(format!("{what}; outputs written")))
    }
}

fn generate(g: Generate) -> Outcome {
    let (set, output) = match g {
        Generate::Rod {
            family,
            c1,
            c3,
            range,
            n,
            pairing,
            spacing,
            output,
        } => {
            let mut spec = GeneratorSpec::new(family, c1, c3, [range[0], range[1]], n, pairing);
            spec.spacing = match spacing {
                SpacingArg::Uniform => Spacing::Uniform,
                SpacingArg::Log => Spacing::Log,
            };
            (generate_1d(&spec, None)?, output)
        }
        Generate::Rotate { base, angles, output } => (augment_rotations_2d(&read_dataset(base, None)?, angles)?, output),
        Generate::Isotropic {
            library,
            elong_slot,
            shear_slot,
            slots,
            amplitudes,
            rotations,
            output,
        } => {
            let lib = UnitLoadLibrary::read(library)?;
            if elong_slot >= 3 || !(3..6).contains(&shear_slot) {
                return Err(Failure::Input("elong-slot must lie in 0..3 and shear-slot in 3..6".into()));
            }
            let grid = IsotropicGrid {
                strains: if amplitudes.is_empty() { (0..6).map(|k| lib.strain_voigt(k)).collect() } else { Vec::new() },
                slots,
                amplitudes,
                rotations,
                scaling: None,
            };
            (isotropic_grid_from_two_states(&lib.tuple(elong_slot), &lib.tuple(shear_slot), &grid)?, output)
        }
    };
    write_dataset(&output, &set)?;
    println!("wrote {} tuples ({}, dim {}) to {}", set.len(), set.kind(), set.dim(), output.display());
    Ok(())
}

fn validate(file: &Path, mu0: Option<f64>) -> Outcome {
    let set = read_dataset(file, mu0)?;
    println!("kind={} dim={} tuples={} mu0={:e}", set.kind(), set.dim(), set.len(), set.mu0());
    Ok(())
}

fn convert(file: &Path, to: PairingKind, output: &Path) -> Outcome {
    let set = convert_pairing(&read_dataset(file, None)?, to)?;
    write_dataset(output, &set)?;
    println!("wrote {} tuples ({}) to {}", set.len(), set.kind(), output.display());
    Ok(())
}
