//! End-to-end run: steady states, SSA, region and domain, mesh, assembly,
//! null solve.

use std::sync::Arc;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::analysis::integrate;
use crate::fem::{assemble, AssemblyOptions};
use crate::mesh::{build_mesh, compute_domain, compute_region, AdaptiveMesh, Domain, MeshStats, RefinementRegion};
use crate::network::{mean_field_steady_states, NewtonOptions, ReactionNetwork};
use crate::solver::{solve_density, DensityReport, StationaryDensity};
use crate::ssa::{run_ensemble, TrajectorySamples};
use crate::{Error, LuScalar, Real, Result, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaSummary {
    pub n_samples: usize,
    pub n_trajectories: usize,
    pub events: u64,
    pub per_species_min: Vec<f64>,
    pub per_species_max: Vec<f64>,
}

impl SsaSummary {
    pub fn of<T: Real>(s: &TrajectorySamples<T>) -> Self {
        Self {
            n_samples: s.len(),
            n_trajectories: s.n_trajectories,
            events: s.events,
            per_species_min: s.per_species_min.iter().map(|v| v.to_f64_lossy()).collect(),
            per_species_max: s.per_species_max.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }
}

/// Everything a run reports. Contains no timings, so identical configs give
/// identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scalar: String,
    pub config: RunConfig,
    pub steady_states: Vec<Vec<f64>>,
    pub starts: Vec<Vec<i64>>,
    pub ssa: SsaSummary,
    pub domain: Domain<f64>,
    pub region_radii: [f64; 3],
    pub mesh: MeshStats,
    pub density: DensityReport,
    /// `int p` recomputed by quadrature.
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub ssa: f64,
    pub mesh: f64,
    pub assembly: f64,
    pub solve: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub density: StationaryDensity<T>,
    pub samples: Arc<TrajectorySamples<T>>,
    pub region: RefinementRegion<T>,
    pub report: RunReport,
    pub timings: StageTimings,
}

/// SSA samples plus the steady states and starts that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaStage<T> {
    pub steady_states: Vec<Vec<f64>>,
    pub starts: Vec<Vec<i64>>,
    pub samples: TrajectorySamples<T>,
}

pub fn scalar_name<T: Real>() -> String {
    if T::epsilon().to_f64_lossy() < 1e-10 { "f64" } else { "f32" }.to_string()
}

pub fn domain_f64<T: Real>(d: &Domain<T>) -> Domain<f64> {
    Domain {
        lo: d.lo.map(|v| v.to_f64_lossy()),
        hi: d.hi.map(|v| v.to_f64_lossy()),
        lower_clamps: d.lower_clamps.map(|v| v.to_f64_lossy()),
    }
}

pub fn domain_from_f64<T: Real>(d: &Domain<f64>) -> Result<Domain<T>> {
    Domain::with_clamps(d.lo.map(T::c), d.hi.map(T::c), d.lower_clamps.map(T::c))
}

/// Rounded Newton roots of every guess, then the explicit points, each
/// repeated `trajectories_per_start` times.
pub fn start_points<T: Real>(cfg: &RunConfig, net: &ReactionNetwork<T>) -> Result<(Vec<Vec<f64>>, Vec<Vec<i64>>)> {
    let guesses: Vec<Vec<T>> = cfg
        .starts
        .guesses
        .iter()
        .map(|g| g.iter().map(|v| T::c(*v)).collect())
        .collect();
    let roots = mean_field_steady_states(net, &guesses, &NewtonOptions::default());
    if !cfg.starts.guesses.is_empty() && roots.is_empty() {
        return Err(Error::NotConverged {
            iterations: NewtonOptions::<T>::default().max_iter,
            residual: f64::NAN,
        });
    }
    let steady: Vec<Vec<f64>> = roots.iter().map(|r| r.iter().map(|v| v.to_f64_lossy()).collect()).collect();
    let mut base: Vec<Vec<i64>> = Vec::new();
    for r in &steady {
        if r.iter().any(|v| *v < -0.5) {
            info!("steady state {r:?} has negative coordinates; not used as a start");
            continue;
        }
        base.push(r.iter().map(|v| v.round().max(0.0) as i64).collect());
    }
    base.extend(cfg.starts.points.iter().cloned());
    if base.is_empty() {
        return Err(Error::Config("no usable SSA start point".into()));
    }
    let k = cfg.starts.trajectories_per_start;
    let starts = base.iter().flat_map(|s| std::iter::repeat_n(s.clone(), k)).collect();
    Ok((steady, starts))
}

pub fn ssa_stage<T: Real>(cfg: &RunConfig) -> Result<SsaStage<T>> {
    cfg.validate()?;
    let net = cfg.network::<T>().stage("network")?;
    let (steady_states, starts) = start_points(cfg, &net).stage("steady states")?;
    let plan = cfg.plan()?;
    info!("SSA: {} trajectories over [{}, {}]", starts.len(), plan.burn_in, plan.end_time());
    let samples = run_ensemble(&net, &starts, &plan, cfg.seed).stage("ssa")?;
    info!("SSA: {} samples, {} events", samples.len(), samples.events);
    Ok(SsaStage {
        steady_states,
        starts,
        samples,
    })
}

/// Region from `samples`; domain from `samples` unless fixed by the caller.
pub fn mesh_stage<T: Real>(
    cfg: &RunConfig,
    samples: &TrajectorySamples<T>,
    domain: Option<&Domain<T>>,
) -> Result<(RefinementRegion<T>, AdaptiveMesh<T>)> {
    let region = compute_region(samples, T::c(cfg.mesh.beta1)).stage("region")?;
    let domain = match domain {
        Some(d) => *d,
        None => compute_domain(samples, T::c(cfg.mesh.beta2), cfg.lower_clamps()).stage("domain")?,
    };
    let mesh = build_mesh(&domain, &region, cfg.mesh.max_level, cfg.mesh.max_cells).stage("mesh")?;
    let s = mesh.stats();
    info!(
        "mesh H={}: {} leaves, {} vertices, {} hanging, {} dofs, {} elements",
        cfg.mesh.max_level, s.leaves, s.vertices, s.hanging, s.dofs, s.elements
    );
    Ok((region, mesh))
}

pub fn solve_stage<T: LuScalar>(
    cfg: &RunConfig,
    net: &ReactionNetwork<T>,
    mesh: Arc<AdaptiveMesh<T>>,
) -> Result<(StationaryDensity<T>, f64, f64)> {
    let t0 = Instant::now();
    let opts = AssemblyOptions {
        drift_sign: T::c(f64::from(cfg.drift_sign)),
    };
    let op = assemble(&mesh, net, &opts).stage("assembly")?;
    let t_asm = t0.elapsed().as_secs_f64();
    info!("assembled {} x {} with {} nonzeros", op.dim(), op.dim(), op.matrix.nnz());
    let t1 = Instant::now();
    let p = solve_density(mesh, &op, &cfg.solver).stage("solve")?;
    Ok((p, t_asm, t1.elapsed().as_secs_f64()))
}

/// Mesh, solve and report for samples already at hand.
pub fn run_with_samples<T: LuScalar>(
    cfg: &RunConfig,
    ssa: &SsaStage<T>,
    domain: Option<&Domain<T>>,
) -> Result<RunOutput<T>> {
    cfg.validate()?;
    let net = cfg.network::<T>().stage("network")?;
    let t0 = Instant::now();
    let (region, mesh) = mesh_stage(cfg, &ssa.samples, domain)?;
    let t_mesh = t0.elapsed().as_secs_f64();
    let mesh = Arc::new(mesh);
    let (density, t_asm, t_solve) = solve_stage(cfg, &net, mesh.clone())?;
    let report = RunReport {
        scalar: scalar_name::<T>(),
        config: cfg.clone(),
        steady_states: ssa.steady_states.clone(),
        starts: ssa.starts.clone(),
        ssa: SsaSummary::of(&ssa.samples),
        domain: domain_f64(mesh.domain()),
        region_radii: region.radii().map(|v| v.to_f64_lossy()),
        mesh: *mesh.stats(),
        density: density.report.clone(),
        mass: integrate(&density).to_f64_lossy(),
    };
    Ok(RunOutput {
        density,
        samples: Arc::new(ssa.samples.clone()),
        region,
        report,
        timings: StageTimings {
            ssa: 0.0,
            mesh: t_mesh,
            assembly: t_asm,
            solve: t_solve,
        },
    })
}

pub fn run<T: LuScalar>(cfg: &RunConfig) -> Result<RunOutput<T>> {
    run_in_domain(cfg, None)
}

/// `run` with the computational domain fixed by the caller.
pub fn run_in_domain<T: LuScalar>(cfg: &RunConfig, domain: Option<&Domain<T>>) -> Result<RunOutput<T>> {
    let t0 = Instant::now();
    let ssa = ssa_stage::<T>(cfg)?;
    let t_ssa = t0.elapsed().as_secs_f64();
    let mut out = run_with_samples(cfg, &ssa, domain)?;
    out.timings.ssa = t_ssa;
    Ok(out)
}
