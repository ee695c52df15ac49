//! Tetrahedral mesh built from the leaves of a refined octree, with
//! first-order hanging-node constraints.

use std::collections::HashMap;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::dofs::DofMap;
use super::octree::{Octree, PassStats, MAX_LEVEL, NO_CELL};
use super::region::{Domain, RefinementRegion};
use super::tet::{locate_in_cube, PATH_TETS};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tetrahedron {
    pub vertices: [u32; 4],
    /// Index into [`AdaptiveMesh::leaves`].
    pub leaf: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HangingKind {
    /// Midpoint of a coarse cell edge.
    Edge,
    /// Center of a coarse cell face.
    Face,
}

/// A vertex whose value is the average of two masters on a coarser cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HangingNode<T> {
    pub vertex: u32,
    pub kind: HangingKind,
    pub masters: [u32; 2],
    pub weights: [T; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshStats {
    pub leaves: usize,
    pub vertices: usize,
    pub hanging: usize,
    pub edge_hanging: usize,
    pub face_hanging: usize,
    pub dofs: usize,
    pub elements: usize,
    pub finest_level: u8,
    pub passes: usize,
    pub refined: usize,
    pub balance_splits: usize,
    /// Refinement stopped early because the next pass exceeded `max_cells`.
    pub capped: bool,
}

#[derive(Debug, Clone)]
pub struct AdaptiveMesh<T> {
    domain: Domain<T>,
    tree: Octree,
    leaves: Vec<u32>,
    leaf_of_cell: Vec<u32>,
    leaf_corners: Vec<[u32; 8]>,
    vertices: Vec<[T; 3]>,
    lattice: Vec<[u32; 3]>,
    hanging: Vec<HangingNode<T>>,
    dofs: DofMap<T>,
    elements: Vec<Tetrahedron>,
    stats: MeshStats,
}

/// Repeats refinement passes up to `max_passes` times. A pass that would push
/// the leaf count past `max_cells` is discarded and refinement stops there.
pub fn build_mesh<T: Real>(
    domain: &Domain<T>,
    region: &RefinementRegion<T>,
    max_passes: u8,
    max_cells: usize,
) -> Result<AdaptiveMesh<T>> {
    if max_passes > MAX_LEVEL {
        return Err(Error::Config(format!(
            "H = {max_passes} exceeds the supported maximum {MAX_LEVEL}"
        )));
    }
    let mut tree = Octree::new(max_passes);
    let mut totals = PassStats::default();
    let mut passes = 0;
    let mut capped = false;
    for pass in 0..max_passes {
        let mut trial = tree.clone();
        let stats = trial.refine_pass(domain, region);
        if stats.refined == 0 {
            debug!("pass {}: nothing to refine", pass + 1);
            break;
        }
        if trial.n_leaves() > max_cells {
            if pass == 0 {
                return Err(Error::Config(format!(
                    "first refinement pass already yields {} cells (max_cells = {max_cells})",
                    trial.n_leaves()
                )));
            }
            info!(
                "stopping after {pass} passes: pass {} would give {} cells > {max_cells}",
                pass + 1,
                trial.n_leaves()
            );
            capped = true;
            break;
        }
        debug!(
            "pass {}: refined {}, balance splits {}, leaves {}",
            pass + 1,
            stats.refined,
            stats.balance_splits,
            trial.n_leaves()
        );
        totals.refined += stats.refined;
        totals.balance_splits += stats.balance_splits;
        passes += 1;
        tree = trial;
    }
    let mut mesh = AdaptiveMesh::from_octree(*domain, tree)?;
    mesh.stats.passes = passes;
    mesh.stats.refined = totals.refined;
    mesh.stats.balance_splits = totals.balance_splits;
    mesh.stats.capped = capped;
    Ok(mesh)
}

/// Offsets in lattice units along each axis: helper for building points.
fn offset(o: [u32; 3], d: [u32; 3]) -> [u32; 3] {
    [o[0] + d[0], o[1] + d[1], o[2] + d[2]]
}

impl<T: Real> AdaptiveMesh<T> {
    /// Uniform mesh with `2^level` cells per axis.
    pub fn uniform(domain: Domain<T>, level: u8) -> Result<Self> {
        let mut tree = Octree::new(level);
        let mut frontier = vec![0u32];
        for _ in 0..level {
            let mut next = Vec::with_capacity(frontier.len() * 8);
            for id in frontier {
                tree.split(id);
                let first = tree.cell(id).first_child;
                next.extend(first..first + 8);
            }
            frontier = next;
        }
        Self::from_octree(domain, tree)
    }

    /// Tetrahedralizes the leaves of a 2:1-balanced octree and resolves its
    /// hanging nodes.
    pub fn from_octree(domain: Domain<T>, tree: Octree) -> Result<Self> {
        let leaves = tree.leaves();
        let mut leaf_of_cell = vec![NO_CELL; tree.n_cells()];
        for (i, &id) in leaves.iter().enumerate() {
            leaf_of_cell[id as usize] = i as u32;
        }

        let mut index: HashMap<[u32; 3], u32> = HashMap::with_capacity(leaves.len() * 2);
        let mut lattice: Vec<[u32; 3]> = Vec::new();
        let mut leaf_corners = Vec::with_capacity(leaves.len());
        for &id in &leaves {
            let c = tree.cell(id);
            let s = tree.size(id);
            let corners: [u32; 8] = std::array::from_fn(|k| {
                let p = offset(c.origin, std::array::from_fn(|a| s * (k as u32 >> a & 1)));
                *index.entry(p).or_insert_with(|| {
                    lattice.push(p);
                    lattice.len() as u32 - 1
                })
            });
            leaf_corners.push(corners);
        }

        let hanging = find_hanging(&tree, &leaves, &index)?;
        let expansions = resolve_constraints(lattice.len(), &hanging);
        let dofs = DofMap::new(&expansions);

        let n = T::from_usize_lossy(tree.resolution() as usize);
        let res = tree.resolution();
        let vertices = lattice
            .iter()
            .map(|p| {
                std::array::from_fn(|a| {
                    if p[a] == res {
                        domain.hi[a]
                    } else {
                        domain.lo[a] + domain.extent(a) * T::from_usize_lossy(p[a] as usize) / n
                    }
                })
            })
            .collect();

        let elements: Vec<Tetrahedron> = leaf_corners
            .iter()
            .enumerate()
            .flat_map(|(l, corners)| {
                PATH_TETS.iter().map(move |t| Tetrahedron {
                    vertices: t.map(|k| corners[k]),
                    leaf: l as u32,
                })
            })
            .collect();

        let edge_hanging = hanging.iter().filter(|h| h.kind == HangingKind::Edge).count();
        let stats = MeshStats {
            leaves: leaves.len(),
            vertices: lattice.len(),
            hanging: hanging.len(),
            edge_hanging,
            face_hanging: hanging.len() - edge_hanging,
            dofs: dofs.n_dofs(),
            elements: elements.len(),
            finest_level: leaves.iter().map(|&id| tree.cell(id).level).max().unwrap_or(0),
            passes: 0,
            refined: 0,
            balance_splits: 0,
            capped: false,
        };
        Ok(Self {
            domain,
            tree,
            leaves,
            leaf_of_cell,
            leaf_corners,
            vertices,
            lattice,
            hanging,
            dofs,
            elements,
            stats,
        })
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn tree(&self) -> &Octree {
        &self.tree
    }

    pub fn stats(&self) -> &MeshStats {
        &self.stats
    }

    pub fn vertices(&self) -> &[[T; 3]] {
        &self.vertices
    }

    /// Vertex positions on the integer lattice of the finest level.
    pub fn lattice_points(&self) -> &[[u32; 3]] {
        &self.lattice
    }

    pub fn elements(&self) -> &[Tetrahedron] {
        &self.elements
    }

    pub fn hanging_nodes(&self) -> &[HangingNode<T>] {
        &self.hanging
    }

    pub fn dofs(&self) -> &DofMap<T> {
        &self.dofs
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Octree cell id of a leaf.
    pub fn leaf_cell(&self, leaf: usize) -> u32 {
        self.leaves[leaf]
    }

    pub fn leaf_level(&self, leaf: usize) -> u8 {
        self.tree.cell(self.leaves[leaf]).level
    }

    pub fn leaf_corners(&self, leaf: usize) -> &[u32; 8] {
        &self.leaf_corners[leaf]
    }

    pub fn leaf_bounds(&self, leaf: usize) -> ([T; 3], [T; 3]) {
        let c = &self.leaf_corners[leaf];
        (self.vertices[c[0] as usize], self.vertices[c[7] as usize])
    }

    pub fn element_coords(&self, e: usize) -> [[T; 3]; 4] {
        self.elements[e].vertices.map(|v| self.vertices[v as usize])
    }

    /// Leaf containing `x`, or `None` outside the domain.
    pub fn locate(&self, x: &[T; 3]) -> Option<usize> {
        let id = self.tree.locate(&self.domain, x)?;
        Some(self.leaf_of_cell[id as usize] as usize)
    }

    /// Leaf index of an octree cell, `None` for interior cells.
    pub fn leaf_of_cell(&self, id: u32) -> Option<usize> {
        match self.leaf_of_cell[id as usize] {
            NO_CELL => None,
            l => Some(l as usize),
        }
    }

    /// Interpolant of per-vertex `values` at `x`, assuming `x` lies in `leaf`
    /// (clamped to it otherwise).
    pub fn interpolate_in_leaf(&self, leaf: usize, x: &[T; 3], values: &[T]) -> T {
        let (lo, hi) = self.leaf_bounds(leaf);
        let u: [T; 3] = std::array::from_fn(|a| ((x[a] - lo[a]) / (hi[a] - lo[a])).max(T::zero()).min(T::one()));
        let (_, w) = locate_in_cube(&u);
        let corners = &self.leaf_corners[leaf];
        w.iter().map(|&(k, wk)| wk * values[corners[k] as usize]).sum()
    }

    /// Vertices and weights of the piecewise-linear interpolant at `x`.
    pub fn interpolation_weights(&self, x: &[T; 3]) -> Option<[(u32, T); 4]> {
        let leaf = self.locate(x)?;
        let (lo, hi) = self.leaf_bounds(leaf);
        let u: [T; 3] = std::array::from_fn(|a| ((x[a] - lo[a]) / (hi[a] - lo[a])).max(T::zero()).min(T::one()));
        let (_, w) = locate_in_cube(&u);
        let corners = &self.leaf_corners[leaf];
        Some(w.map(|(k, wk)| (corners[k], wk)))
    }
}

fn find_hanging<T: Real>(tree: &Octree, leaves: &[u32], index: &HashMap<[u32; 3], u32>) -> Result<Vec<HangingNode<T>>> {
    let half = T::c(0.5);
    let mut found: HashMap<u32, HangingNode<T>> = HashMap::new();
    let mut record = |p: [u32; 3], kind, m0: [u32; 3], m1: [u32; 3]| {
        if let Some(&v) = index.get(&p) {
            let masters = [index[&m0], index[&m1]];
            let node = found.entry(v).or_insert(HangingNode {
                vertex: v,
                kind,
                masters,
                weights: [half, half],
            });
            debug_assert_eq!(node.masters, masters, "inconsistent masters for vertex {v}");
        }
    };
    for &id in leaves {
        let s = tree.size(id);
        if s < 2 {
            continue;
        }
        let o = tree.cell(id).origin;
        let h = s / 2;
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            for bits in 0..4u32 {
                let mut d = [0u32; 3];
                d[i] = s * (bits & 1);
                d[j] = s * (bits >> 1);
                let lo = offset(o, d);
                let mut mid = lo;
                mid[k] += h;
                let mut hi = lo;
                hi[k] += s;
                record(mid, HangingKind::Edge, lo, hi);
            }
            // face with normal k on each side, masters on its min-max diagonal
            for side in 0..2u32 {
                let mut lo = o;
                lo[k] += side * s;
                let mut center = lo;
                center[i] += h;
                center[j] += h;
                let mut hi = lo;
                hi[i] += s;
                hi[j] += s;
                record(center, HangingKind::Face, lo, hi);
            }
        }
        if s >= 4 {
            check_order_one(o, s, index)?;
        }
    }
    let mut out: Vec<HangingNode<T>> = found.into_values().collect();
    out.sort_by_key(|h| h.vertex);
    Ok(out)
}

/// Any vertex at an odd quarter point of a leaf boundary means a neighbour is
/// two or more levels finer.
fn check_order_one(o: [u32; 3], s: u32, index: &HashMap<[u32; 3], u32>) -> Result<()> {
    let q = s / 4;
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        for side in 0..2u32 {
            for a in 0..5u32 {
                for b in 0..5u32 {
                    if a % 2 == 0 && b % 2 == 0 {
                        continue;
                    }
                    let mut p = o;
                    p[k] += side * s;
                    p[i] += a * q;
                    p[j] += b * q;
                    if index.contains_key(&p) {
                        return Err(Error::MeshInvariant(format!(
                            "hanging node of order >= 2 at lattice point {p:?} on cell at {o:?} (size {s})"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Expands each hanging vertex into free vertices, following chains.
fn resolve_constraints<T: Real>(n_vertices: usize, hanging: &[HangingNode<T>]) -> Vec<Vec<(u32, T)>> {
    let mut by_vertex: HashMap<u32, &HangingNode<T>> = HashMap::with_capacity(hanging.len());
    for h in hanging {
        by_vertex.insert(h.vertex, h);
    }
    let mut out: Vec<Option<Vec<(u32, T)>>> = vec![None; n_vertices];

    fn expand<T: Real>(
        v: u32,
        by_vertex: &HashMap<u32, &HangingNode<T>>,
        out: &mut Vec<Option<Vec<(u32, T)>>>,
    ) -> Vec<(u32, T)> {
        let Some(h) = by_vertex.get(&v) else {
            return vec![(v, T::one())];
        };
        if let Some(e) = &out[v as usize] {
            return e.clone();
        }
        let mut acc: Vec<(u32, T)> = Vec::new();
        for (m, w) in h.masters.iter().zip(h.weights) {
            for (u, wu) in expand(*m, by_vertex, out) {
                match acc.iter_mut().find(|e| e.0 == u) {
                    Some(e) => e.1 += w * wu,
                    None => acc.push((u, w * wu)),
                }
            }
        }
        acc.sort_by_key(|e| e.0);
        out[v as usize] = Some(acc.clone());
        acc
    }

    for h in hanging {
        expand(h.vertex, &by_vertex, &mut out);
    }
    out.into_iter().map(Option::unwrap_or_default).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tet::signed_volume;

    fn point_region(p: [f64; 3]) -> RefinementRegion<f64> {
        RefinementRegion::new(vec![p], [1e-3; 3]).unwrap()
    }

    #[test]
    fn single_cuboid() {
        let m = AdaptiveMesh::<f64>::uniform(Domain::unit_cube(), 0).unwrap();
        let s = m.stats();
        assert_eq!((s.vertices, s.elements, s.hanging, s.dofs), (8, 6, 0, 8));
    }

    #[test]
    fn cube_refined_once() {
        let m = build_mesh(&Domain::<f64>::unit_cube(), &point_region([0.3, 0.3, 0.3]), 1, 100).unwrap();
        let s = m.stats();
        assert_eq!((s.leaves, s.vertices, s.elements, s.hanging), (8, 27, 48, 0));
    }

    #[test]
    fn one_refined_octant_has_expected_hanging_nodes() {
        // a level-1 mesh with one octant split: 19 new points; its 3 inner
        // face centers hang, as do the 9 edges shared with coarse cells
        let d = Domain::<f64>::unit_cube();
        let mut tree = Octree::new(2);
        tree.split(0);
        tree.split(tree.cell(0).first_child);
        let m = AdaptiveMesh::from_octree(d, tree).unwrap();
        let s = *m.stats();
        assert_eq!(s.vertices, 27 + 19);
        assert_eq!(s.face_hanging, 3);
        assert_eq!(s.edge_hanging, 9);
        assert_eq!(s.dofs, s.vertices - s.hanging);
        for h in m.hanging_nodes() {
            let p = m.vertices()[h.vertex as usize];
            let a = m.vertices()[h.masters[0] as usize];
            let b = m.vertices()[h.masters[1] as usize];
            for k in 0..3 {
                assert!((p[k] - 0.5 * (a[k] + b[k])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn element_volumes_sum_to_domain() {
        let d = Domain::new([1.0, 10.0, 0.0], [3.0, 13.0, 0.5]).unwrap();
        let g = RefinementRegion::new(vec![[1.2, 10.4, 0.1], [2.9, 12.0, 0.45]], [0.05, 0.1, 0.01]).unwrap();
        let m = build_mesh(&d, &g, 4, 1_000_000).unwrap();
        let mut total = 0.0f64;
        for e in 0..m.elements().len() {
            let v = signed_volume(&m.element_coords(e));
            assert!(v > 0.0);
            total += v;
        }
        assert!((total - d.volume()).abs() < 1e-12 * d.volume());
        assert!(m.tree().is_balanced());
    }

    #[test]
    fn constrained_vertex_values_follow_linear_function() {
        let d = Domain::<f64>::unit_cube();
        let g = RefinementRegion::new(vec![[0.1, 0.2, 0.15]], [0.01; 3]).unwrap();
        let m = build_mesh(&d, &g, 4, 1_000_000).unwrap();
        assert!(m.stats().hanging > 0);
        let f = |x: &[f64; 3]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2];
        let coeffs: Vec<f64> = (0..m.dofs().n_dofs() as u32)
            .map(|k| f(&m.vertices()[m.dofs().dof_vertex(k) as usize]))
            .collect();
        let vals = m.dofs().vertex_values(&coeffs);
        for (v, x) in vals.iter().zip(m.vertices()) {
            assert!((v - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn max_cells_on_first_pass_is_config_error() {
        let r = build_mesh(&Domain::<f64>::unit_cube(), &point_region([0.5; 3]), 3, 4);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn max_cells_stops_refinement_early() {
        let d = Domain::<f64>::unit_cube();
        let g = point_region([0.3, 0.6, 0.2]);
        let full = build_mesh(&d, &g, 5, usize::MAX).unwrap();
        let cap = full.stats().leaves - 1;
        let capped = build_mesh(&d, &g, 5, cap).unwrap();
        assert!(capped.stats().leaves <= cap);
        assert!(capped.stats().passes < full.stats().passes);
        assert!(capped.stats().capped && !full.stats().capped);
    }

    #[test]
    fn interpolation_weights_locate_points() {
        let d = Domain::new([0.0, 0.0, 0.0], [2.0, 1.0, 1.0]).unwrap();
        let m = build_mesh(&d, &point_region([0.2, 0.3, 0.4]), 3, 100_000).unwrap();
        for x in [[0.21, 0.33, 0.41], [1.9, 0.01, 0.99], [2.0, 1.0, 1.0], [0.0, 0.0, 0.0]] {
            let w = m.interpolation_weights(&x).unwrap();
            let mut y = [0.0; 3];
            for (v, wv) in w {
                for a in 0..3 {
                    y[a] += wv * m.vertices()[v as usize][a];
                }
            }
            for a in 0..3 {
                assert!((y[a] - x[a]).abs() < 1e-12);
            }
        }
        assert!(m.interpolation_weights(&[2.5, 0.5, 0.5]).is_none());
    }
}
