//! Null vector of the assembled operator by shift-invert power iteration on a
//! sparse LU factorization, followed by clipping and normalization.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::fem::SparseOperator;
use crate::mesh::AdaptiveMesh;
use crate::{Error, LuScalar, Real, Result};

mod krylov;

/// How the null vector is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Direct up to `direct_max_dofs`, iterative above.
    Auto,
    /// Shift-invert power iteration on a sparse LU.
    Direct,
    /// ILU(0)-preconditioned GMRES on the mass-bordered system.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop once `|A x|_2 / (|A|_F |x|_2) <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Absolute shift; `None` uses `1e-8 * |A|_inf / m`.
    pub shift: Option<f64>,
    /// Iterative-refinement steps per linear solve.
    pub refinement_steps: usize,
    pub method: SolverMethod,
    pub direct_max_dofs: usize,
    /// GMRES restart length.
    pub restart: usize,
    /// Cap on GMRES iterations over all restarts.
    pub krylov_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            shift: None,
            refinement_steps: 2,
            method: SolverMethod::Auto,
            direct_max_dofs: 40_000,
            restart: 60,
            krylov_max_iter: 20_000,
        }
    }
}

impl SolverOptions {
    /// Tolerance actually used for scalar type `T`: never below what its
    /// precision can reach.
    pub fn effective_tol<T: Real>(&self) -> f64 {
        self.tol.max(100.0 * T::epsilon().to_f64_lossy())
    }

    /// Method used for an operator with `m` DOFs.
    pub fn method_for(&self, m: usize) -> SolverMethod {
        match self.method {
            SolverMethod::Auto if m <= self.direct_max_dofs => SolverMethod::Direct,
            SolverMethod::Auto => SolverMethod::Iterative,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSolveReport {
    pub method: SolverMethod,
    pub iterations: usize,
    /// Relative residual after each power iteration or GMRES cycle, starting
    /// with the initial vector.
    pub residuals: Vec<f64>,
    /// Zero for the iterative method.
    pub shift: f64,
}

impl NullSolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&f64::NAN)
    }
}

fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

fn relative_residual<T: Real>(op: &SparseOperator<T>, x: &[T], a_fro: T) -> f64 {
    let r = op.matrix.matvec(x);
    (norm2(&r) / (a_fro * norm2(x))).to_f64_lossy()
}

/// Raw null vector of `op.matrix`, signed so that `sum_i w_i x_i > 0`.
pub fn solve_null<T: LuScalar>(op: &SparseOperator<T>, opts: &SolverOptions) -> Result<(Vec<T>, NullSolveReport)> {
    let m = op.dim();
    if m == 0 {
        return Err(Error::Config("operator has no degrees of freedom".into()));
    }
    let a = &op.matrix;
    let a_fro = a.norm_fro();
    if a_fro == T::zero() {
        return Err(Error::Factorization("operator is identically zero".into()));
    }
    if opts.method_for(m) == SolverMethod::Iterative {
        return solve_null_iterative(op, opts, a_fro);
    }
    let shift = match opts.shift {
        Some(s) => T::c(s),
        None => T::c(1e-8) * a.norm_inf() / T::from_usize_lossy(m),
    };
    let tol = opts.effective_tol::<T>();

    let mut trips: Vec<Triplet<usize, usize, T>> = a
        .triplets()
        .map(|(i, j, v)| Triplet::new(i as usize, j as usize, v))
        .collect();
    trips.extend((0..m).map(|i| Triplet::new(i, i, -shift)));
    let shifted = SparseColMat::<usize, T>::try_new_from_triplets(m, m, &trips)
        .map_err(|e| Error::Factorization(format!("building sparse matrix: {e:?}")))?;
    let lu = shifted.sp_lu().map_err(|e| {
        Error::Factorization(format!(
            "sparse LU of A - {shift} I failed ({e:?}); try a larger shift"
        ))
    })?;

    let solve = |rhs: &[T]| -> Vec<T> {
        let mut y = Mat::<T>::from_fn(m, 1, |i, _| rhs[i]);
        lu.solve_in_place(y.as_mut());
        let mut y: Vec<T> = (0..m).map(|i| y[(i, 0)]).collect();
        for _ in 0..opts.refinement_steps {
            let ay = a.matvec(&y);
            let r: Vec<T> = (0..m).map(|i| rhs[i] - (ay[i] - shift * y[i])).collect();
            let mut d = Mat::<T>::from_fn(m, 1, |i, _| r[i]);
            lu.solve_in_place(d.as_mut());
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += d[(i, 0)];
            }
        }
        y
    };

    let mut x = vec![T::one() / T::from_usize_lossy(m).sqrt(); m];
    let mut residuals = vec![relative_residual(op, &x, a_fro)];
    let mut iterations = 0;
    while residuals.last().copied().unwrap() > tol {
        if iterations == opts.max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual: *residuals.last().unwrap(),
            });
        }
        let y = solve(&x);
        let n = norm2(&y);
        if !(n.is_finite() && n > T::zero()) {
            return Err(Error::Factorization(
                "inverse iteration produced a non-finite vector; try a larger shift".into(),
            ));
        }
        x = y.into_iter().map(|v| v / n).collect();
        iterations += 1;
        let r = relative_residual(op, &x, a_fro);
        debug!("inverse iteration {iterations}: residual {r:.3e}");
        residuals.push(r);
    }
    let mass: T = x.iter().zip(&op.mass_weights).map(|(a, b)| *a * *b).sum();
    if mass < T::zero() {
        for v in &mut x {
            *v = -*v;
        }
    }
    info!(
        "null vector: {} DOFs, {iterations} iterations, residual {:.3e}",
        m,
        residuals.last().unwrap()
    );
    Ok((
        x,
        NullSolveReport {
            method: SolverMethod::Direct,
            iterations,
            residuals,
            shift: shift.to_f64_lossy(),
        },
    ))
}

fn solve_null_iterative<T: Real>(op: &SparseOperator<T>, opts: &SolverOptions, a_fro: T) -> Result<(Vec<T>, NullSolveReport)> {
    let m = op.dim();
    let tol = opts.effective_tol::<T>();
    let mut residuals = Vec::new();
    let out = krylov::bordered_null_vector(
        &op.matrix,
        &op.mass_weights,
        opts.restart.max(1),
        opts.krylov_max_iter,
        T::c(0.1 * tol),
        |x| {
            let r = relative_residual(op, x, a_fro);
            residuals.push(r);
            r <= tol
        },
    );
    let last = *residuals.last().unwrap();
    debug!("bordered-system residual per cycle: {:?}", out.cycle_residuals);
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            residual: last,
        });
    }
    if !out.x.iter().all(|v| v.is_finite()) {
        return Err(Error::Factorization("GMRES produced a non-finite vector".into()));
    }
    info!("null vector: {m} DOFs, {} GMRES iterations, residual {last:.3e}", out.iterations);
    Ok((
        out.x,
        NullSolveReport {
            method: SolverMethod::Iterative,
            iterations: out.iterations,
            residuals,
            shift: 0.0,
        },
    ))
}

/// Clipped coefficients scaled to unit mass, and the clipped mass fraction
/// `|sum_{x_i<0} w_i x_i| / sum_{x_i>0} w_i x_i`.
pub fn clip_and_normalize<T: Real>(raw: &[T], weights: &[T]) -> Result<(Vec<T>, f64)> {
    if raw.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: raw.len(),
        });
    }
    let mut pos = T::zero();
    let mut neg = T::zero();
    for (x, w) in raw.iter().zip(weights) {
        if *x > T::zero() {
            pos += *w * *x;
        } else {
            neg += *w * *x;
        }
    }
    if !(pos > T::zero()) || !pos.is_finite() {
        return Err(Error::NoPositiveMass);
    }
    let p = raw.iter().map(|x| x.max(T::zero()) / pos).collect();
    Ok((p, (neg.abs() / pos).to_f64_lossy()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub method: SolverMethod,
    pub clipped_mass_fraction: f64,
    pub residual: f64,
    pub iterations: usize,
    pub shift: f64,
}

/// Normalized non-negative FEM density on a mesh.
#[derive(Debug, Clone)]
pub struct StationaryDensity<T> {
    pub mesh: Arc<AdaptiveMesh<T>>,
    /// Values at free vertices, indexed by DOF.
    pub coefficients: Vec<T>,
    /// Values at all vertices, hanging ones reconstructed.
    pub vertex_values: Vec<T>,
    pub report: DensityReport,
}

impl<T: Real> StationaryDensity<T> {
    pub fn from_coefficients(mesh: Arc<AdaptiveMesh<T>>, coefficients: Vec<T>, report: DensityReport) -> Self {
        let vertex_values = mesh.dofs().vertex_values(&coefficients);
        Self {
            mesh,
            coefficients,
            vertex_values,
            report,
        }
    }
}

/// `solve_null` followed by `clip_and_normalize`.
pub fn solve_density<T: LuScalar>(
    mesh: Arc<AdaptiveMesh<T>>,
    op: &SparseOperator<T>,
    opts: &SolverOptions,
) -> Result<StationaryDensity<T>> {
    let (raw, rep) = solve_null(op, opts)?;
    let (p, clipped) = clip_and_normalize(&raw, &op.mass_weights)?;
    info!("clipped mass fraction {clipped:.3e}");
    Ok(StationaryDensity::from_coefficients(
        mesh,
        p,
        DensityReport {
            method: rep.method,
            clipped_mass_fraction: clipped,
            residual: rep.final_residual(),
            iterations: rep.iterations,
            shift: rep.shift,
        },
    ))
}
