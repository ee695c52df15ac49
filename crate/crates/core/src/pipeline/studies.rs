//! Convergence studies in H, T and beta1, and the doubling accuracy test.

use std::io::{self, Write};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{run_in_domain, run_with_samples, ssa_stage, RunOutput, RunReport};
use crate::analysis::{l2_diff, ErrorReport};
use crate::mesh::{compute_domain, Domain};
use crate::{Error, LuScalar, Result, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub value: f64,
    pub error: ErrorReport,
    pub vertices: usize,
    pub hanging: usize,
    pub dofs: usize,
    pub elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub parameter: String,
    pub reference_value: f64,
    pub reference: RunReport,
    pub rows: Vec<ConvergenceRow>,
    pub notes: Vec<String>,
}

impl ConvergenceTable {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error.l2_diff).collect()
    }

    /// Absolute errors strictly decrease along the rows.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error.l2_diff < w[0].error.l2_diff)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{},l2_diff,relative,vertices,hanging,dofs,elements", self.parameter)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:e},{:e},{},{},{},{}",
                r.value, r.error.l2_diff, r.error.relative, r.vertices, r.hanging, r.dofs, r.elements
            )?;
        }
        Ok(())
    }
}

fn row<T: LuScalar>(value: f64, out: &RunOutput<T>, reference: &RunOutput<T>) -> Result<ConvergenceRow> {
    let m = &out.report.mesh;
    Ok(ConvergenceRow {
        value,
        error: l2_diff(&out.density, &reference.density).stage("analysis")?,
        vertices: m.vertices,
        hanging: m.hanging,
        dofs: m.dofs,
        elements: m.elements,
    })
}

/// A study is meaningless if `max_cells` silently lowered the requested H.
fn require_full_refinement<T>(out: &RunOutput<T>, label: &str) -> Result<()> {
    if out.report.mesh.capped {
        return Err(Error::ResourceCap(format!(
            "{label}: max_cells = {} stopped refinement after {} of {} passes",
            out.report.config.mesh.max_cells, out.report.mesh.passes, out.report.config.mesh.max_level
        )));
    }
    Ok(())
}

/// `Error(H) = |p_Href - p_H|_L2` for every H, all meshes built from one SSA
/// run and the same domain.
pub fn converge_h<T: LuScalar>(cfg: &RunConfig, hs: &[u8], h_ref: u8) -> Result<ConvergenceTable> {
    if let Some(&m) = hs.iter().max() {
        if m >= h_ref {
            return Err(Error::Config(format!("H_ref = {h_ref} must exceed every H in the list (max {m})")));
        }
    }
    let ssa = ssa_stage::<T>(cfg)?;
    let domain = compute_domain(&ssa.samples, T::c(cfg.mesh.beta2), cfg.lower_clamps()).stage("domain")?;
    let at = |h: u8| -> Result<RunOutput<T>> {
        let mut c = cfg.clone();
        c.mesh.max_level = h;
        let out = run_with_samples(&c, &ssa, Some(&domain))?;
        require_full_refinement(&out, &format!("H = {h}"))?;
        Ok(out)
    };
    let reference = at(h_ref)?;
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        info!("converge-h: H = {h}");
        rows.push(row(f64::from(h), &at(h)?, &reference)?);
    }
    Ok(ConvergenceTable {
        parameter: "H".into(),
        reference_value: f64::from(h_ref),
        reference: reference.report,
        rows,
        notes: vec!["one SSA run and one domain shared by all meshes".into()],
    })
}

/// `Error(T) = |p_Tref - p_T|_L2`; each T has its own SSA run (same seed),
/// the domain comes from the `T_ref` run.
pub fn converge_t<T: LuScalar>(cfg: &RunConfig, ts: &[f64], t_ref: f64) -> Result<ConvergenceTable> {
    let with_t = |t: f64| {
        let mut c = cfg.clone();
        c.ssa.duration = t;
        c.validate().map(|_| c)
    };
    let reference = run_in_domain::<T>(&with_t(t_ref)?, None)?;
    require_full_refinement(&reference, "T_ref")?;
    let domain = *reference.density.mesh.domain();
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        info!("converge-t: T = {t}");
        let out = run_in_domain::<T>(&with_t(t)?, Some(&domain))?;
        require_full_refinement(&out, &format!("T = {t}"))?;
        rows.push(row(t, &out, &reference)?);
    }
    Ok(ConvergenceTable {
        parameter: "T".into(),
        reference_value: t_ref,
        reference: reference.report,
        rows,
        notes: vec!["domain fixed from the reference run".into()],
    })
}

/// `Error(beta1) = |p_beta1ref - p_beta1|_L2` on one SSA run and one domain.
pub fn converge_beta1<T: LuScalar>(cfg: &RunConfig, betas: &[f64], beta_ref: f64) -> Result<ConvergenceTable> {
    let ssa = ssa_stage::<T>(cfg)?;
    let domain = compute_domain(&ssa.samples, T::c(cfg.mesh.beta2), cfg.lower_clamps()).stage("domain")?;
    let at = |b: f64| -> Result<RunOutput<T>> {
        let mut c = cfg.clone();
        c.mesh.beta1 = b;
        c.validate()?;
        let out = run_with_samples(&c, &ssa, Some(&domain))?;
        require_full_refinement(&out, &format!("beta1 = {b}"))?;
        Ok(out)
    };
    let reference = at(beta_ref)?;
    let mut rows = Vec::with_capacity(betas.len());
    for &b in betas {
        info!("converge-beta1: beta1 = {b}");
        rows.push(row(b, &at(b)?, &reference)?);
    }
    Ok(ConvergenceTable {
        parameter: "beta1".into(),
        reference_value: beta_ref,
        reference: reference.report,
        rows,
        notes: vec!["one SSA run and one domain shared by all meshes".into()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// `|p_base - p_doubled|`, relative to `|p_doubled|`.
    pub error: ErrorReport,
    pub base: RunReport,
    pub doubled: RunReport,
}

/// Runs `doubled` first, then `base` in the doubled run's domain, and
/// compares them.
pub fn compare_runs<T: LuScalar>(base: &RunConfig, doubled: &RunConfig) -> Result<DoublingReport> {
    let d = run_in_domain::<T>(doubled, None)?;
    if d.report.mesh.capped {
        return Err(Error::ResourceCap(format!(
            "doubled run: max_cells = {} reached after {} of {} passes",
            doubled.mesh.max_cells, d.report.mesh.passes, doubled.mesh.max_level
        )));
    }
    let domain: Domain<T> = *d.density.mesh.domain();
    let b = run_in_domain::<T>(base, Some(&domain))?;
    Ok(DoublingReport {
        error: l2_diff(&b.density, &d.density).stage("analysis")?,
        base: b.report,
        doubled: d.report,
    })
}

/// Compares `cfg` with `{S, 2T, 2Q, 2B, 2 beta1, beta2, H + 1}`.
pub fn doubling_accuracy_test<T: LuScalar>(cfg: &RunConfig) -> Result<DoublingReport> {
    cfg.validate()?;
    compare_runs::<T>(cfg, &cfg.doubled())
}
