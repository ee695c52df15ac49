//! Mapping from mesh vertices to unconstrained degrees of freedom.

use crate::Real;

/// Every vertex expands to a weighted list of DOFs: one entry with weight 1
/// for free vertices, the resolved master combination for hanging ones.
#[derive(Debug, Clone)]
pub struct DofMap<T> {
    offsets: Vec<u32>,
    entries: Vec<(u32, T)>,
    dof_vertex: Vec<u32>,
}

impl<T: Real> DofMap<T> {
    /// `expansions[v]` lists `(vertex, weight)` pairs over free vertices, or is
    /// empty when `v` itself is free.
    pub(crate) fn new(expansions: &[Vec<(u32, T)>]) -> Self {
        let n = expansions.len();
        let mut dof_of = vec![u32::MAX; n];
        let mut dof_vertex = Vec::new();
        for (v, e) in expansions.iter().enumerate() {
            if e.is_empty() {
                dof_of[v] = dof_vertex.len() as u32;
                dof_vertex.push(v as u32);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut entries = Vec::with_capacity(n);
        offsets.push(0);
        for (v, e) in expansions.iter().enumerate() {
            if e.is_empty() {
                entries.push((dof_of[v], T::one()));
            } else {
                entries.extend(e.iter().map(|&(m, w)| {
                    debug_assert!(dof_of[m as usize] != u32::MAX);
                    (dof_of[m as usize], w)
                }));
            }
            offsets.push(entries.len() as u32);
        }
        Self {
            offsets,
            entries,
            dof_vertex,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(dof, weight)` pairs giving the value at vertex `v`.
    pub fn expansion(&self, v: u32) -> &[(u32, T)] {
        &self.entries[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    pub fn is_free(&self, v: u32) -> bool {
        let e = self.expansion(v);
        e.len() == 1 && self.dof_vertex[e[0].0 as usize] == v
    }

    pub fn dof_vertex(&self, dof: u32) -> u32 {
        self.dof_vertex[dof as usize]
    }

    /// Vertex values of the FEM function with the given DOF coefficients.
    pub fn vertex_values(&self, coeffs: &[T]) -> Vec<T> {
        assert_eq!(coeffs.len(), self.n_dofs());
        (0..self.n_vertices() as u32)
            .map(|v| self.expansion(v).iter().map(|&(d, w)| w * coeffs[d as usize]).sum())
            .collect()
    }
}
