//! Point evaluation, integrals and cross-mesh L2 differences.

use serde::{Deserialize, Serialize};

use crate::fem::quadrature::{map_point, QuadratureRule};
use crate::mesh::tet::{signed_volume, tetrahedralize};
use crate::mesh::{AdaptiveMesh, Domain};
use crate::solver::StationaryDensity;
use crate::{Error, Real, Result};

/// Value of the piecewise-linear density at `x`.
pub fn evaluate<T: Real>(p: &StationaryDensity<T>, x: &[T; 3]) -> Result<T> {
    let leaf = p.mesh.locate(x).ok_or_else(|| Error::OutOfDomain {
        point: x.iter().map(|v| v.to_f64_lossy()).collect(),
    })?;
    Ok(p.mesh.interpolate_in_leaf(leaf, x, &p.vertex_values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l2_diff: f64,
    pub l2_norm_ref: f64,
    pub relative: f64,
    /// Cubes of the common refinement used for quadrature.
    pub quadrature_cells: usize,
    pub quadrature_level: u8,
}

fn same_domain<T: Real>(a: &Domain<T>, b: &Domain<T>) -> bool {
    (0..3).all(|i| {
        let tol = T::c(1e-12) * a.extent(i);
        (a.lo[i] - b.lo[i]).abs() <= tol && (a.hi[i] - b.hi[i]).abs() <= tol
    })
}

/// Visits the cubes of the common refinement of two octrees over the same
/// domain, passing the cube bounds and the leaf of each mesh containing it.
fn overlay<T: Real, F: FnMut([T; 3], [T; 3], usize, usize, u8)>(a: &AdaptiveMesh<T>, b: &AdaptiveMesh<T>, mut f: F) {
    let (ta, tb) = (a.tree(), b.tree());
    let mut stack = vec![(0u32, 0u32, 0u8)];
    while let Some((ca, cb, depth)) = stack.pop() {
        let (la, lb) = (a.leaf_of_cell(ca), b.leaf_of_cell(cb));
        match (la, lb) {
            (Some(la), Some(lb)) => {
                let finer_is_a = ta.cell(ca).level >= tb.cell(cb).level;
                let (lo, hi) = if finer_is_a { a.leaf_bounds(la) } else { b.leaf_bounds(lb) };
                f(lo, hi, la, lb, depth);
            }
            _ => {
                for k in 0..8 {
                    let na = if la.is_some() { ca } else { ta.cell(ca).first_child + k };
                    let nb = if lb.is_some() { cb } else { tb.cell(cb).first_child + k };
                    stack.push((na, nb, depth + 1));
                }
            }
        }
    }
}

/// `int_Omega |p_a - p_b|^2` over the common refinement of both meshes with the
/// degree-3 rule on each cube's path tets. The reference norm is that of `b`.
pub fn l2_diff<T: Real>(a: &StationaryDensity<T>, b: &StationaryDensity<T>) -> Result<ErrorReport> {
    if !same_domain(a.mesh.domain(), b.mesh.domain()) {
        return Err(Error::DomainMismatch(format!(
            "{:?} vs {:?}",
            a.mesh.domain(),
            b.mesh.domain()
        )));
    }
    let rule = QuadratureRule::<T>::degree3();
    let mut diff = T::zero();
    let mut norm = T::zero();
    let mut cells = 0;
    let mut level = 0;
    overlay(&a.mesh, &b.mesh, |lo, hi, la, lb, depth| {
        cells += 1;
        level = level.max(depth);
        for tet in tetrahedralize(&lo, &hi) {
            let jac = signed_volume(&tet) * T::c(6.0);
            for (lam, w) in rule.points.iter().zip(&rule.weights) {
                let x = map_point(&tet, lam);
                let va = a.mesh.interpolate_in_leaf(la, &x, &a.vertex_values);
                let vb = b.mesh.interpolate_in_leaf(lb, &x, &b.vertex_values);
                diff += *w * jac * (va - vb) * (va - vb);
                norm += *w * jac * vb * vb;
            }
        }
    });
    let l2_diff = diff.max(T::zero()).sqrt().to_f64_lossy();
    let l2_norm_ref = norm.max(T::zero()).sqrt().to_f64_lossy();
    Ok(ErrorReport {
        l2_diff,
        l2_norm_ref,
        relative: if l2_norm_ref > 0.0 { l2_diff / l2_norm_ref } else { f64::NAN },
        quadrature_cells: cells,
        quadrature_level: level,
    })
}

/// `int_Omega p` by the degree-3 rule on every element.
pub fn integrate<T: Real>(p: &StationaryDensity<T>) -> T {
    let rule = QuadratureRule::<T>::degree3();
    let m = &p.mesh;
    (0..m.elements().len())
        .map(|e| {
            let x = m.element_coords(e);
            let vals = m.elements()[e].vertices.map(|v| p.vertex_values[v as usize]);
            let jac = signed_volume(&x) * T::c(6.0);
            rule.integrate_reference(|lam| (0..4).map(|k| lam[k] * vals[k]).sum()) * jac
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{build_mesh, RefinementRegion};
    use crate::solver::DensityReport;

    fn report() -> DensityReport {
        DensityReport {
            method: crate::solver::SolverMethod::Direct,
            clipped_mass_fraction: 0.0,
            residual: 0.0,
            iterations: 0,
            shift: 0.0,
        }
    }

    fn density_from<F: Fn(&[f64; 3]) -> f64>(mesh: Arc<AdaptiveMesh<f64>>, f: F) -> StationaryDensity<f64> {
        let c: Vec<f64> = (0..mesh.dofs().n_dofs() as u32)
            .map(|k| f(&mesh.vertices()[mesh.dofs().dof_vertex(k) as usize]))
            .collect();
        StationaryDensity::from_coefficients(mesh, c, report())
    }

    fn adaptive(h: u8, c: [f64; 3]) -> Arc<AdaptiveMesh<f64>> {
        let d = Domain::new([0.0, 0.0, 0.0], [2.0, 1.0, 1.0]).unwrap();
        let g = RefinementRegion::new(vec![c], [0.01; 3]).unwrap();
        Arc::new(build_mesh(&d, &g, h, 1_000_000).unwrap())
    }

    #[test]
    fn evaluate_reproduces_affine_functions() {
        let m = adaptive(4, [0.3, 0.2, 0.7]);
        let g = |x: &[f64; 3]| 0.5 + x[0] - 2.0 * x[1] + 0.25 * x[2];
        let p = density_from(m.clone(), g);
        for x in [[0.31, 0.22, 0.69], [1.7, 0.9, 0.1], [0.0, 0.5, 1.0], [2.0, 1.0, 1.0]] {
            assert!((evaluate(&p, &x).unwrap() - g(&x)).abs() < 1e-12);
        }
        // free vertices give their coefficients, hanging ones their masters
        for (v, x) in m.vertices().iter().enumerate() {
            assert!((evaluate(&p, x).unwrap() - p.vertex_values[v]).abs() < 1e-12);
        }
        assert!(matches!(evaluate(&p, &[2.5, 0.0, 0.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn continuity_across_refinement_levels() {
        let m = adaptive(4, [0.3, 0.2, 0.7]);
        let p = density_from(m.clone(), |x| (3.0 * x[0]).sin() * (x[1] + 1.0) + x[2] * x[2]);
        // probe shared faces between leaves from both sides
        let eps = 1e-9;
        let mut checked = 0;
        for leaf in 0..m.n_leaves() {
            let (lo, hi) = m.leaf_bounds(leaf);
            for a in 0..3 {
                if hi[a] >= m.domain().hi[a] {
                    continue;
                }
                for t in [0.17, 0.5, 0.83] {
                    let mut x = [0.0; 3];
                    for b in 0..3 {
                        x[b] = lo[b] + t * (hi[b] - lo[b]) * if b == (a + 1) % 3 { 1.0 } else { 0.61 };
                    }
                    x[a] = hi[a];
                    let inside = m.interpolate_in_leaf(leaf, &x, &p.vertex_values);
                    let mut y = x;
                    y[a] += eps;
                    let outside = evaluate(&p, &y).unwrap();
                    assert!((inside - outside).abs() < 1e-7, "leaf {leaf} axis {a}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn l2_diff_closed_forms() {
        let m = adaptive(3, [0.3, 0.2, 0.7]);
        let vol = m.domain().volume();
        let p = density_from(m.clone(), |_| 1.0 / vol);
        let zero = density_from(m.clone(), |_| 0.0);
        let r = l2_diff(&p, &p).unwrap();
        assert_eq!(r.l2_diff, 0.0);
        assert_eq!(r.relative, 0.0);
        let r = l2_diff(&p, &zero).unwrap();
        assert!((r.l2_diff - vol.powf(-0.5)).abs() < 1e-12);
        assert!((integrate(&p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_diff_across_meshes_is_exact_for_matching_linear_functions() {
        let g = |x: &[f64; 3]| 1.0 + x[0] + x[1] * 0.5;
        let a = density_from(adaptive(3, [0.3, 0.2, 0.7]), g);
        let b = density_from(adaptive(5, [1.5, 0.8, 0.1]), g);
        let r = l2_diff(&a, &b).unwrap();
        assert!(r.relative < 1e-12);
        assert!(r.quadrature_cells >= b.mesh.n_leaves());
    }

    #[test]
    fn l2_diff_is_a_metric() {
        let a = density_from(adaptive(3, [0.3, 0.2, 0.7]), |x| x[0] * x[1]);
        let b = density_from(adaptive(4, [1.5, 0.8, 0.1]), |x| (x[2] - 0.5).powi(2));
        let c = density_from(adaptive(2, [1.0, 0.5, 0.5]), |x| x[0].cos());
        let d = |p: &StationaryDensity<f64>, q: &StationaryDensity<f64>| l2_diff(p, q).unwrap().l2_diff;
        assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-10);
        assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-10);
        assert!(d(&b, &c) <= d(&b, &a) + d(&a, &c) + 1e-10);
    }

    #[test]
    fn mismatched_domains_are_rejected() {
        let a = density_from(adaptive(2, [0.3, 0.2, 0.7]), |_| 1.0);
        let d = Domain::new([0.0; 3], [1.0; 3]).unwrap();
        let b = density_from(Arc::new(AdaptiveMesh::uniform(d, 1).unwrap()), |_| 1.0);
        assert!(matches!(l2_diff(&a, &b), Err(Error::DomainMismatch(_))));
    }
}
