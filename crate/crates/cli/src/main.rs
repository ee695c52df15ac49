//! `cfpe`: stationary chemical Fokker-Planck densities from a TOML recipe.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use cfpe::mesh::export::{write_hanging_table, write_vtk};
use cfpe::pipeline::{self, RunConfig, RunDir, SsaStage};
use cfpe::solver::SolverMethod;
use cfpe::{Error, LuScalar, Result};

#[derive(Parser, Debug)]
#[command(name = "cfpe", version, about = "SSA-guided adaptive FEM for stationary chemical Fokker-Planck equations")]
struct Cli {
    /// Worker threads (default: CFPE_THREADS, else all cores).
    #[arg(long, global = true, env = "CFPE_THREADS")]
    threads: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline: SSA, mesh, assembly, solve, outputs.
    Run(RunArgs),
    /// Error(H) against a finer reference mesh on one shared SSA run.
    ConvergeH {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        h: Vec<u8>,
        #[arg(long)]
        h_ref: u8,
    },
    /// Error(T) against a longer reference simulation.
    ConvergeT {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long)]
        t_ref: f64,
    },
    /// Error(beta1) against a reference refinement radius.
    ConvergeBeta1 {
        #[command(flatten)]
        common: Common,
        #[arg(long = "beta1-list", value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long)]
        beta1_ref: f64,
    },
    /// Compare with the run using {S, 2T, 2Q, 2B, 2 beta1, beta2, H + 1}.
    DoublingTest(Common),
    /// Run only the stochastic simulation and cache its samples.
    SsaOnly(Common),
    /// Build and export the mesh without solving.
    MeshOnly(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Reuse samples cached by `ssa-only`.
    #[arg(long)]
    samples: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Auto,
    Direct,
    Iterative,
}

impl From<Method> for SolverMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => SolverMethod::Auto,
            Method::Direct => SolverMethod::Direct,
            Method::Iterative => SolverMethod::Iterative,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Precision {
    F32,
    F64,
}

/// Recipe path plus overrides of individual config keys.
#[derive(Args, Debug)]
struct Common {
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    #[arg(long)]
    seed: Option<u64>,
    /// SSA recording window T.
    #[arg(long)]
    duration: Option<f64>,
    /// Samples per unit time Q.
    #[arg(long)]
    rate: Option<f64>,
    /// Burn-in B.
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// Refinement passes H.
    #[arg(long)]
    max_level: Option<u8>,
    #[arg(long)]
    max_cells: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    drift_sign: Option<i8>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Null-vector method (overrides `solver.method`).
    #[arg(long, value_enum)]
    method: Option<Method>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag {
                    c.$($field).+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(duration => ssa.duration);
        set!(rate => ssa.rate);
        set!(beta1 => mesh.beta1);
        set!(beta2 => mesh.beta2);
        set!(max_level => mesh.max_level);
        set!(max_cells => mesh.max_cells);
        set!(drift_sign => drift_sign);
        set!(tol => solver.tol);
        set!(max_iter => solver.max_iter);
        if let Some(m) = self.method {
            c.solver.method = m.into();
        }
        if let Some(b) = self.burn_in {
            c.ssa.burn_in = Some(b);
        }
        if let Some(o) = &self.out {
            c.output.dir = Some(o.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn out_dir(cfg: &RunConfig, config_path: &Path, command: &str) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| {
        let stem = if cfg.name.is_empty() {
            config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string()
        } else {
            cfg.name.clone()
        };
        PathBuf::from("runs").join(format!("{stem}-{command}"))
    })
}

/// Samples plus the seconds spent simulating (zero when cached).
fn ssa_for<T: LuScalar>(cfg: &RunConfig, cached: Option<&Path>) -> Result<(SsaStage<T>, f64)> {
    match cached {
        Some(p) => {
            info!("using cached samples from {}", p.display());
            Ok((pipeline::load_ssa(p, cfg)?, 0.0))
        }
        None => {
            let t0 = Instant::now();
            let s = pipeline::ssa_stage(cfg)?;
            Ok((s, t0.elapsed().as_secs_f64()))
        }
    }
}

fn run<T: LuScalar>(args: &RunArgs) -> Result<PathBuf> {
    let cfg = args.common.load()?;
    let (ssa, t_ssa) = ssa_for::<T>(&cfg, args.samples.as_deref())?;
    let mut out = pipeline::run_with_samples(&cfg, &ssa, None)?;
    out.timings.ssa = t_ssa;
    let mut dir = RunDir::create(&out_dir(&cfg, &args.common.config, "run"))?;
    pipeline::write_run(&mut dir, &out)?;
    let r = &out.report;
    println!(
        "vertices {} hanging {} dofs {} elements {} | residual {:.3e} clipped {:.3e} mass {:.12}",
        r.mesh.vertices, r.mesh.hanging, r.mesh.dofs, r.mesh.elements, r.density.residual, r.density.clipped_mass_fraction, r.mass
    );
    dir.finish("run", Some(out.timings))
}

fn mesh_only<T: LuScalar>(args: &RunArgs) -> Result<PathBuf> {
    let cfg = args.common.load()?;
    let (ssa, _) = ssa_for::<T>(&cfg, args.samples.as_deref())?;
    let (_, mesh) = pipeline::mesh_stage(&cfg, &ssa.samples, None)?;
    let mut dir = RunDir::create(&out_dir(&cfg, &args.common.config, "mesh"))?;
    dir.json("mesh.json", mesh.stats())?;
    let level: Vec<T> = vec![T::zero(); mesh.vertices().len()];
    write_vtk(&mesh, &[("zero", &level)], std::io::BufWriter::new(std::fs::File::create(dir.file("mesh.vtk"))?))?;
    write_hanging_table(&mesh, std::io::BufWriter::new(std::fs::File::create(dir.file("hanging_nodes.csv"))?))?;
    let s = mesh.stats();
    println!(
        "leaves {} vertices {} hanging {} dofs {} elements {}",
        s.leaves, s.vertices, s.hanging, s.dofs, s.elements
    );
    dir.finish("mesh-only", None)
}

fn ssa_only<T: LuScalar>(common: &Common) -> Result<PathBuf> {
    let cfg = common.load()?;
    let ssa = pipeline::ssa_stage::<T>(&cfg)?;
    let mut dir = RunDir::create(&out_dir(&cfg, &common.config, "ssa"))?;
    pipeline::save_ssa(&dir.file("ssa.json"), &cfg, &ssa)?;
    ssa.samples
        .write_csv(std::io::BufWriter::new(std::fs::File::create(dir.file("samples.csv"))?))?;
    println!(
        "{} samples, {} events, min {:?}, max {:?}",
        ssa.samples.len(),
        ssa.samples.events,
        ssa.samples.per_species_min,
        ssa.samples.per_species_max
    );
    dir.finish("ssa-only", None)
}

fn study<T: LuScalar>(common: &Common, name: &str, f: impl FnOnce(&RunConfig) -> Result<pipeline::ConvergenceTable>) -> Result<PathBuf> {
    let cfg = common.load()?;
    let table = f(&cfg)?;
    let mut dir = RunDir::create(&out_dir(&cfg, &common.config, name))?;
    dir.json("table.json", &table)?;
    table.write_csv(std::fs::File::create(dir.file("table.csv"))?)?;
    table.write_csv(std::io::stdout())?;
    dir.finish(name, None)
}

fn doubling<T: LuScalar>(common: &Common) -> Result<PathBuf> {
    let cfg = common.load()?;
    let rep = pipeline::doubling_accuracy_test::<T>(&cfg)?;
    let mut dir = RunDir::create(&out_dir(&cfg, &common.config, "doubling"))?;
    dir.json("doubling.json", &rep)?;
    println!(
        "L2 difference {:.3e}, reference norm {:.3e}, relative {:.3e}",
        rep.error.l2_diff, rep.error.l2_norm_ref, rep.error.relative
    );
    dir.finish("doubling-test", None)
}

fn dispatch<T: LuScalar>(cmd: &Command) -> Result<PathBuf> {
    match cmd {
        Command::Run(a) => run::<T>(a),
        Command::MeshOnly(a) => mesh_only::<T>(a),
        Command::SsaOnly(c) => ssa_only::<T>(c),
        Command::DoublingTest(c) => doubling::<T>(c),
        Command::ConvergeH { common, h, h_ref } => study::<T>(common, "converge-h", |c| pipeline::converge_h::<T>(c, h, *h_ref)),
        Command::ConvergeT { common, t, t_ref } => study::<T>(common, "converge-t", |c| pipeline::converge_t::<T>(c, t, *t_ref)),
        Command::ConvergeBeta1 {
            common,
            betas,
            beta1_ref,
        } => study::<T>(common, "converge-beta1", |c| pipeline::converge_beta1::<T>(c, betas, *beta1_ref)),
    }
}

fn precision(cmd: &Command) -> Precision {
    match cmd {
        Command::Run(a) | Command::MeshOnly(a) => a.common.precision,
        Command::SsaOnly(c) | Command::DoublingTest(c) => c.precision,
        Command::ConvergeH { common, .. } | Command::ConvergeT { common, .. } | Command::ConvergeBeta1 { common, .. } => {
            common.precision
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match precision(&cli.command) {
        Precision::F64 => dispatch::<f64>(&cli.command),
        Precision::F32 => dispatch::<f32>(&cli.command),
    };
    match result {
        Ok(manifest) => {
            println!("manifest: {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if matches!(e.root(), Error::ResourceCap(_)) {
                eprintln!("hint: raise --max-cells or lower --max-level");
            }
            ExitCode::from(code as u8)
        }
    }
}
