//! Element matrices of the stationary form and global assembly with
//! hanging-node elimination.

use rayon::prelude::*;

use super::coefficients::CoefficientField;
use super::quadrature::{map_point, QuadratureRule};
use super::sparse::CsrMatrix;
use crate::dense::inverse3;
use crate::mesh::{AdaptiveMesh, DofMap};
use crate::{Error, Real, Result};

/// Local matrix and volume of one tet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrix<T> {
    pub entries: [[T; 4]; 4],
    pub volume: T,
}

/// Gradients of the four barycentric functions and `det J` (six times the
/// signed volume).
pub fn barycentric_gradients<T: Real>(x: &[[T; 3]; 4]) -> ([[T; 3]; 4], T) {
    let m: [[T; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|a| x[k + 1][a] - x[0][a]));
    let (det, inv) = inverse3(&m);
    let mut g = [[T::zero(); 3]; 4];
    for k in 0..3 {
        for a in 0..3 {
            g[k + 1][a] = inv[a][k];
            g[0][a] -= inv[a][k];
        }
    }
    (g, det)
}

/// Entry `(i, j)` is `int (D grad phi_j + sigma phi_j v) . grad phi_i` over the tet.
pub fn local_form<T: Real, F: CoefficientField<T> + ?Sized>(
    x: &[[T; 3]; 4],
    field: &F,
    rule: &QuadratureRule<T>,
    drift_sign: T,
) -> Option<ElementMatrix<T>> {
    let (g, det) = barycentric_gradients(x);
    let scale = (0..3)
        .map(|k| (0..3).map(|a| (x[k + 1][a] - x[0][a]).abs()).fold(T::zero(), T::max))
        .fold(T::one(), |p, l| p * l);
    if !(det.abs() > T::c(1e3) * T::epsilon() * scale) {
        return None;
    }
    let jac = det.abs();

    let mut dbar = [[T::zero(); 3]; 3];
    let mut vbar = [[T::zero(); 3]; 4];
    for (lam, w) in rule.points.iter().zip(&rule.weights) {
        let (d, v) = field.eval(&map_point(x, lam));
        let wq = *w * jac;
        for a in 0..3 {
            for b in 0..3 {
                dbar[a][b] += wq * d[a][b];
            }
        }
        for j in 0..4 {
            for a in 0..3 {
                vbar[j][a] += wq * lam[j] * v[a];
            }
        }
    }

    let mut e = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = T::zero();
            for a in 0..3 {
                let mut dg = T::zero();
                for b in 0..3 {
                    dg += dbar[a][b] * g[j][b];
                }
                s += g[i][a] * (dg + drift_sign * vbar[j][a]);
            }
            e[i][j] = s;
        }
    }
    Some(ElementMatrix {
        entries: e,
        volume: jac / T::c(6.0),
    })
}

/// Assembled system over the free vertices.
#[derive(Debug, Clone)]
pub struct SparseOperator<T> {
    pub matrix: CsrMatrix<T>,
    /// `int phi_i` for every DOF.
    pub mass_weights: Vec<T>,
    pub dofs: DofMap<T>,
}

impl<T: Real> SparseOperator<T> {
    pub fn dim(&self) -> usize {
        self.mass_weights.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions<T> {
    /// Sign of the drift term in the flux `D grad p + sigma v p`.
    pub drift_sign: T,
}

impl<T: Real> Default for AssemblyOptions<T> {
    fn default() -> Self {
        Self {
            drift_sign: -T::one(),
        }
    }
}

/// Elements processed per parallel batch during assembly.
const CHUNK: usize = 1 << 15;

fn element_matrices<T: Real, F: CoefficientField<T> + ?Sized>(
    mesh: &AdaptiveMesh<T>,
    field: &F,
    opts: &AssemblyOptions<T>,
    range: std::ops::Range<usize>,
) -> Result<Vec<ElementMatrix<T>>> {
    let rule = QuadratureRule::degree3();
    range
        .into_par_iter()
        .map(|e| {
            let x = mesh.element_coords(e);
            local_form(&x, field, &rule, opts.drift_sign).ok_or_else(|| Error::DegenerateElement {
                element: e,
                volume: crate::mesh::tet::signed_volume(&x).to_f64_lossy(),
            })
        })
        .collect()
}

/// Sorted column sets of the constrained operator, as CSR arrays.
fn constrained_pattern<T: Real>(mesh: &AdaptiveMesh<T>, dofs: &DofMap<T>) -> (Vec<usize>, Vec<u32>) {
    let n = dofs.n_dofs();
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut clean = vec![0usize; n];
    for el in mesh.elements() {
        for &a in &el.vertices {
            for &(di, _) in dofs.expansion(a) {
                let di = di as usize;
                let row = &mut rows[di];
                for &b in &el.vertices {
                    row.extend(dofs.expansion(b).iter().map(|e| e.0));
                }
                if row.len() > 2 * clean[di] + 64 {
                    row.sort_unstable();
                    row.dedup();
                    clean[di] = row.len();
                }
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for row in &mut rows {
        row.sort_unstable();
        row.dedup();
        col_idx.extend_from_slice(row);
        row_ptr.push(col_idx.len());
        *row = Vec::new();
    }
    (row_ptr, col_idx)
}

/// Assembles `A_ij = a(phi_j, phi_i)` on the constrained space: each hanging
/// vertex's row and column are distributed to its resolved masters. Element
/// matrices are computed in parallel batches and summed in element order.
pub fn assemble<T: Real, F: CoefficientField<T> + ?Sized>(
    mesh: &AdaptiveMesh<T>,
    field: &F,
    opts: &AssemblyOptions<T>,
) -> Result<SparseOperator<T>> {
    let dofs = mesh.dofs();
    let n = dofs.n_dofs();
    let (row_ptr, col_idx) = constrained_pattern(mesh, dofs);
    let mut values = vec![T::zero(); col_idx.len()];
    let mut mass = vec![T::zero(); n];
    let quarter = T::c(0.25);
    let elements = mesh.elements();
    for start in (0..elements.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(elements.len());
        let locals = element_matrices(mesh, field, opts, start..end)?;
        for (el, loc) in elements[start..end].iter().zip(&locals) {
            for i in 0..4 {
                let ei = dofs.expansion(el.vertices[i]);
                for &(di, wi) in ei {
                    mass[di as usize] += wi * quarter * loc.volume;
                }
                for j in 0..4 {
                    let v = loc.entries[i][j];
                    for &(di, wi) in ei {
                        let r = row_ptr[di as usize]..row_ptr[di as usize + 1];
                        let cols = &col_idx[r.clone()];
                        for &(dj, wj) in dofs.expansion(el.vertices[j]) {
                            let k = cols.binary_search(&dj).expect("pattern covers every coupling");
                            values[r.start + k] += wi * wj * v;
                        }
                    }
                }
            }
        }
    }
    Ok(SparseOperator {
        matrix: CsrMatrix::from_parts(n, n, row_ptr, col_idx, values),
        mass_weights: mass,
        dofs: dofs.clone(),
    })
}

/// Assembly over all vertices, ignoring constraints.
pub fn assemble_vertex_matrix<T: Real, F: CoefficientField<T> + ?Sized>(
    mesh: &AdaptiveMesh<T>,
    field: &F,
    opts: &AssemblyOptions<T>,
) -> Result<CsrMatrix<T>> {
    let locals = element_matrices(mesh, field, opts, 0..mesh.elements().len())?;
    let mut trips = Vec::with_capacity(locals.len() * 16);
    for (el, loc) in mesh.elements().iter().zip(&locals) {
        for i in 0..4 {
            for j in 0..4 {
                trips.push((el.vertices[i], el.vertices[j], loc.entries[i][j]));
            }
        }
    }
    let n = mesh.vertices().len();
    Ok(CsrMatrix::from_triplets(n, n, &trips))
}

/// Residual `A p`.
pub fn apply_density_ops<T: Real>(op: &SparseOperator<T>, p: &[T]) -> Result<Vec<T>> {
    if p.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: p.len(),
        });
    }
    Ok(op.matrix.matvec(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::coefficients::{ConstantField, WithoutDrift};
    use crate::mesh::{build_mesh, Domain, RefinementRegion};
    use crate::network::linear_test_network;

    fn ref_tet() -> [[f64; 3]; 4] {
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    fn hanging_mesh() -> AdaptiveMesh<f64> {
        let d = Domain::new([0.0, 0.0, 0.0], [2.0, 1.0, 3.0]).unwrap();
        let g = RefinementRegion::new(vec![[0.2, 0.1, 0.4]], [0.02, 0.01, 0.03]).unwrap();
        build_mesh(&d, &g, 3, 1_000_000).unwrap()
    }

    #[test]
    fn pure_diffusion_local_matrix() {
        let rule = QuadratureRule::degree3();
        let e = local_form(&ref_tet(), &ConstantField::pure_diffusion(), &rule, -1.0).unwrap();
        for i in 0..4 {
            let row: f64 = e.entries[i].iter().sum();
            assert!(row.abs() < 1e-15);
            for j in 0..4 {
                assert!((e.entries[i][j] - e.entries[j][i]).abs() < 1e-15);
            }
        }
        // P1 Laplacian on the reference tet: diagonal (1/2, 1/6, 1/6, 1/6)
        assert!((e.entries[0][0] - 0.5).abs() < 1e-15);
        assert!((e.entries[1][1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((e.volume - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn constant_coefficients_scale_with_similar_tets() {
        let rule = QuadratureRule::degree3();
        let f = ConstantField {
            diffusion: [[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 3.0]],
            drift: [1.0, -2.0, 0.5],
        };
        let x = ref_tet();
        let s = 3.0;
        let xs = x.map(|p| p.map(|c| c * s));
        let a = local_form(&x, &f, &rule, -1.0).unwrap();
        let b = local_form(&xs, &f, &rule, -1.0).unwrap();
        // diffusion part scales like s, drift part like s^2
        let f0 = ConstantField {
            drift: [0.0; 3],
            ..f
        };
        let a0 = local_form(&x, &f0, &rule, -1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d = a0.entries[i][j];
                let c = a.entries[i][j] - d;
                assert!((b.entries[i][j] - (s * d + s * s * c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drift_columns_sum_to_zero() {
        // a(phi_j, 1) = 0 for every j, including the drift term
        let rule = QuadratureRule::degree3();
        let net = linear_test_network::<f64>(100.0, 5.0, 5.0, 1.0, 1.0);
        let x = [[100.0, 90.0, 80.0], [103.0, 91.0, 80.5], [99.0, 94.0, 81.0], [101.0, 90.0, 84.0]];
        let e = local_form(&x, &net, &rule, -1.0).unwrap();
        for j in 0..4 {
            let col: f64 = (0..4).map(|i| e.entries[i][j]).sum();
            let scale: f64 = (0..4).map(|i| e.entries[i][j].abs()).sum();
            assert!(col.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn degenerate_tet_is_rejected() {
        let rule = QuadratureRule::degree3();
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(local_form(&x, &ConstantField::pure_diffusion(), &rule, -1.0).is_none());
    }

    #[test]
    fn single_cuboid_operator() {
        let m = AdaptiveMesh::<f64>::uniform(Domain::unit_cube(), 0).unwrap();
        let op = assemble(&m, &ConstantField::pure_diffusion(), &AssemblyOptions::default()).unwrap();
        assert_eq!(op.dim(), 8);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(op.matrix.get(i, j) == 0.0, op.matrix.get(j, i) == 0.0);
            }
        }
        let r = apply_density_ops(&op, &[1.0; 8]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn constrained_operator_invariants() {
        let m = hanging_mesh();
        assert!(m.stats().hanging > 0);
        let net = linear_test_network::<f64>(100.0, 5.0, 5.0, 1.0, 1.0);
        let op = assemble(&m, &net, &AssemblyOptions::default()).unwrap();
        let n = op.dim();
        assert_eq!(n, m.stats().vertices - m.stats().hanging);
        let mass: f64 = op.mass_weights.iter().sum();
        assert!((mass - m.domain().volume()).abs() < 1e-12 * m.domain().volume());
        let cols = op.matrix.matvec_transpose(&vec![1.0; n]);
        let tol = 1e-10 * op.matrix.max_abs();
        assert!(cols.iter().all(|c| c.abs() <= tol));

        let diff = assemble(&m, &WithoutDrift(&net), &AssemblyOptions::default()).unwrap();
        let r = apply_density_ops(&diff, &vec![1.0; n]).unwrap();
        let tol = 1e-12 * diff.matrix.norm_inf();
        assert!(r.iter().all(|v| v.abs() <= tol));
    }

    #[test]
    fn elimination_matches_restriction_of_full_matrix() {
        let m = hanging_mesh();
        let f = ConstantField {
            diffusion: [[1.0, 0.2, 0.0], [0.2, 2.0, 0.0], [0.0, 0.0, 0.5]],
            drift: [0.3, -0.1, 0.7],
        };
        let opts = AssemblyOptions::default();
        let a = assemble(&m, &f, &opts).unwrap().matrix.to_dense();
        let k = assemble_vertex_matrix(&m, &f, &opts).unwrap();
        // P maps DOFs to vertex values; expect A = P^T K P
        let dofs = m.dofs();
        let n = dofs.n_dofs();
        let mut ptkp = vec![vec![0.0; n]; n];
        for (vi, vj, kv) in k.triplets() {
            for &(di, wi) in dofs.expansion(vi) {
                for &(dj, wj) in dofs.expansion(vj) {
                    ptkp[di as usize][dj as usize] += wi * wj * kv;
                }
            }
        }
        let scale = k.max_abs();
        for i in 0..n {
            for j in 0..n {
                assert!((a[i][j] - ptkp[i][j]).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn uniform_mesh_has_no_constraint_effect() {
        let m = AdaptiveMesh::<f64>::uniform(Domain::unit_cube(), 2).unwrap();
        let f = ConstantField::pure_diffusion();
        let opts = AssemblyOptions::default();
        let a = assemble(&m, &f, &opts).unwrap().matrix;
        let k = assemble_vertex_matrix(&m, &f, &opts).unwrap();
        assert_eq!(a.nnz(), k.nnz());
        let scale = k.max_abs();
        for ((i, j, x), (ki, kj, y)) in a.triplets().zip(k.triplets()) {
            assert_eq!((i, j), (ki, kj));
            assert!((x - y).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn laplacian_is_psd_with_one_dimensional_kernel() {
        let m = hanging_mesh();
        let op = assemble(&m, &ConstantField::pure_diffusion(), &AssemblyOptions::default()).unwrap();
        let n = op.dim();
        let d = op.matrix.to_dense();
        let mat = faer::Mat::<f64>::from_fn(n, n, |i, j| d[i][j]);
        let ev = mat.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let top = ev[n - 1];
        assert!(ev[0].abs() < 1e-12 * top);
        assert!(ev[1] > 1e-8 * top, "second eigenvalue {}", ev[1]);
        for i in 0..n {
            for j in 0..n {
                assert!((d[i][j] - d[j][i]).abs() < 1e-14 * top);
            }
        }
    }

    #[test]
    fn residual_is_linear() {
        let m = hanging_mesh();
        let net = linear_test_network::<f64>(100.0, 5.0, 5.0, 1.0, 1.0);
        let op = assemble(&m, &net, &AssemblyOptions::default()).unwrap();
        let n = op.dim();
        assert!(apply_density_ops(&op, &vec![0.0; n]).unwrap().iter().all(|v| *v == 0.0));
        let p: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let p3: Vec<f64> = p.iter().map(|v| 3.0 * v).collect();
        let r = apply_density_ops(&op, &p).unwrap();
        let r3 = apply_density_ops(&op, &p3).unwrap();
        let s = op.matrix.norm_inf();
        for (a, b) in r.iter().zip(&r3) {
            assert!((3.0 * a - b).abs() <= 1e-12 * s);
        }
        assert!(matches!(
            apply_density_ops(&op, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
