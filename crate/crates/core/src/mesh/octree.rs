//! Octree on an integer lattice with `2^max_level` cells per axis.
//!
//! Cells are stored in an arena; the children of a split cell are eight
//! consecutive entries ordered by corner bits (bit 0 = x, bit 1 = y, bit 2 = z).

use rayon::prelude::*;

use super::region::{Domain, Interval, RefinementRegion};
use crate::Real;

pub const NO_CELL: u32 = u32::MAX;

/// Deepest supported level; lattice coordinates must fit in `u32` with room
/// for doubling.
pub const MAX_LEVEL: u8 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub origin: [u32; 3],
    pub level: u8,
    pub parent: u32,
    pub first_child: u32,
}

impl Cell {
    pub fn is_leaf(&self) -> bool {
        self.first_child == NO_CELL
    }
}

#[derive(Debug, Clone)]
pub struct Octree {
    cells: Vec<Cell>,
    max_level: u8,
}

/// Work done by one refinement pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassStats {
    pub refined: usize,
    pub balance_splits: usize,
}

const NEIGHBOR_DIRS: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut k = 0;
    while k < 27 {
        let d = [(k % 3) as i64 - 1, ((k / 3) % 3) as i64 - 1, (k / 9) as i64 - 1];
        if !(d[0] == 0 && d[1] == 0 && d[2] == 0) {
            out[n] = d;
            n += 1;
        }
        k += 1;
    }
    out
};

impl Octree {
    pub fn new(max_level: u8) -> Self {
        assert!(max_level <= MAX_LEVEL, "octree depth {max_level} exceeds {MAX_LEVEL}");
        Self {
            cells: vec![Cell {
                origin: [0; 3],
                level: 0,
                parent: NO_CELL,
                first_child: NO_CELL,
            }],
            max_level,
        }
    }

    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    /// Lattice points per axis edge of the whole tree.
    pub fn resolution(&self) -> u32 {
        1 << self.max_level
    }

    pub fn cell(&self, id: u32) -> &Cell {
        &self.cells[id as usize]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Edge length of a cell at `level`, in lattice units.
    pub fn size_at(&self, level: u8) -> u32 {
        1 << (self.max_level - level)
    }

    pub fn size(&self, id: u32) -> u32 {
        self.size_at(self.cells[id as usize].level)
    }

    /// Leaf ids in depth-first order.
    pub fn leaves(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let c = &self.cells[id as usize];
            if c.is_leaf() {
                out.push(id);
            } else {
                stack.extend((0..8).rev().map(|k| c.first_child + k));
            }
        }
        out
    }

    pub fn n_leaves(&self) -> usize {
        // every split adds 8 cells and removes one leaf
        1 + 7 * (self.cells.len() - 1) / 8
    }

    pub fn split(&mut self, id: u32) {
        let c = self.cells[id as usize];
        assert!(c.is_leaf(), "cell {id} already split");
        assert!(c.level < self.max_level, "cell {id} is at the finest level");
        let half = self.size_at(c.level) / 2;
        let first = self.cells.len() as u32;
        for k in 0..8u32 {
            let mut origin = c.origin;
            for (a, o) in origin.iter_mut().enumerate() {
                if k >> a & 1 == 1 {
                    *o += half;
                }
            }
            self.cells.push(Cell {
                origin,
                level: c.level + 1,
                parent: id,
                first_child: NO_CELL,
            });
        }
        self.cells[id as usize].first_child = first;
    }

    /// Leaf containing a point given in doubled lattice coordinates. Points on
    /// a cell face go to the upper cell. Returns `None` outside the tree.
    pub fn locate_doubled(&self, p2: [i64; 3]) -> Option<u32> {
        let lim = 2 * self.resolution() as i64;
        if p2.iter().any(|&v| v < 0 || v > lim) {
            return None;
        }
        let mut id = 0u32;
        loop {
            let c = &self.cells[id as usize];
            if c.is_leaf() {
                return Some(id);
            }
            let s = self.size_at(c.level) as i64;
            let mut k = 0;
            for a in 0..3 {
                if p2[a] >= 2 * c.origin[a] as i64 + s {
                    k |= 1 << a;
                }
            }
            id = c.first_child + k;
        }
    }

    /// Leaf containing the physical point `x`, or `None` outside `domain`.
    pub fn locate<T: Real>(&self, domain: &Domain<T>, x: &[T; 3]) -> Option<u32> {
        if !domain.contains(x) {
            return None;
        }
        let n = T::from_usize_lossy(self.resolution() as usize);
        let mut id = 0u32;
        loop {
            let c = &self.cells[id as usize];
            if c.is_leaf() {
                return Some(id);
            }
            let half = T::from_usize_lossy(self.size_at(c.level) as usize / 2);
            let mut k = 0;
            for a in 0..3 {
                let u = (x[a] - domain.lo[a]) / domain.extent(a) * n;
                if u >= T::from_usize_lossy(c.origin[a] as usize) + half {
                    k |= 1 << a;
                }
            }
            id = c.first_child + k;
        }
    }

    /// Physical extent of a cell along one axis.
    pub fn cell_interval<T: Real>(&self, domain: &Domain<T>, id: u32, axis: usize) -> Interval<T> {
        let c = &self.cells[id as usize];
        let h = domain.extent(axis) / T::from_usize_lossy(self.resolution() as usize);
        let lo = domain.lo[axis] + h * T::from_usize_lossy(c.origin[axis] as usize);
        let hi = lo + h * T::from_usize_lossy(self.size(id) as usize);
        Interval::new(lo, hi)
    }

    /// Refinement test: the cell is closer to the region than its own width
    /// along every axis.
    pub fn needs_refinement<T: Real>(&self, domain: &Domain<T>, region: &RefinementRegion<T>, id: u32) -> bool {
        (0..3).all(|a| {
            let iv = self.cell_interval(domain, id, a);
            region.axis_distance(iv, a) < iv.len()
        })
    }

    /// One adaptive pass: splits every marked leaf, then restores 2:1 balance.
    pub fn refine_pass<T: Real>(&mut self, domain: &Domain<T>, region: &RefinementRegion<T>) -> PassStats {
        let leaves = self.leaves();
        let marked: Vec<bool> = leaves
            .par_iter()
            .map(|&id| self.cells[id as usize].level < self.max_level && self.needs_refinement(domain, region, id))
            .collect();
        let mut refined = 0;
        for (&id, m) in leaves.iter().zip(marked) {
            if m {
                self.split(id);
                refined += 1;
            }
        }
        PassStats {
            refined,
            balance_splits: self.balance(),
        }
    }

    /// Splits leaves until no two leaves sharing a face, edge or corner differ
    /// by more than one level. Returns the number of splits made.
    pub fn balance(&mut self) -> usize {
        let mut splits = 0;
        let mut stack: Vec<u32> = self.leaves();
        stack.reverse();
        while let Some(id) = stack.pop() {
            let c = self.cells[id as usize];
            if !c.is_leaf() || c.level < 2 {
                continue;
            }
            let s = self.size_at(c.level) as i64;
            for d in NEIGHBOR_DIRS {
                let p2: [i64; 3] = std::array::from_fn(|a| 2 * c.origin[a] as i64 + s + 2 * d[a] * s);
                while let Some(n) = self.locate_doubled(p2) {
                    if self.cells[n as usize].level + 1 >= c.level {
                        break;
                    }
                    self.split(n);
                    splits += 1;
                    let first = self.cells[n as usize].first_child;
                    stack.extend(first..first + 8);
                }
            }
        }
        splits
    }

    /// Whether every pair of touching leaves differs by at most one level.
    pub fn is_balanced(&self) -> bool {
        self.leaves().iter().all(|&id| {
            let c = self.cells[id as usize];
            let s = self.size_at(c.level) as i64;
            NEIGHBOR_DIRS.iter().all(|d| {
                let p2: [i64; 3] = std::array::from_fn(|a| 2 * c.origin[a] as i64 + s + 2 * d[a] * s);
                match self.locate_doubled(p2) {
                    Some(n) => self.cells[n as usize].level + 1 >= c.level,
                    None => true,
                }
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(points: Vec<[f64; 3]>, r: f64) -> RefinementRegion<f64> {
        RefinementRegion::new(points, [r; 3]).unwrap()
    }

    #[test]
    fn split_creates_eight_children() {
        let mut t = Octree::new(2);
        t.split(0);
        assert_eq!(t.leaves().len(), 8);
        assert_eq!(t.n_leaves(), 8);
        let origins: Vec<[u32; 3]> = t.leaves().iter().map(|&id| t.cell(id).origin).collect();
        assert_eq!(origins[0], [0, 0, 0]);
        assert_eq!(origins[1], [2, 0, 0]);
        assert_eq!(origins[7], [2, 2, 2]);
    }

    #[test]
    fn single_sample_splits_unit_cube() {
        let d = Domain::<f64>::unit_cube();
        let mut t = Octree::new(1);
        let stats = t.refine_pass(&d, &region(vec![[0.3, 0.4, 0.6]], 0.01));
        assert_eq!(stats.refined, 1);
        assert_eq!(t.n_leaves(), 8);
    }

    #[test]
    fn far_region_leaves_cell_alone() {
        let d = Domain::<f64>::new([0.0; 3], [4.0; 3]).unwrap();
        let mut t = Octree::new(2);
        t.split(0);
        // on x the cells [2,4] are 2.9 away from the center: not refined
        let stats = t.refine_pass(&d, &region(vec![[-0.9, 1.0, 1.0]], 0.0));
        assert_eq!(stats.refined, 4);
        for id in t.leaves() {
            let c = t.cell(id);
            assert_eq!(c.level, if c.origin[0] >= 2 { 1 } else { 2 });
        }
    }

    #[test]
    fn finest_cells_stay_near_one_octant() {
        let d = Domain::<f64>::unit_cube();
        let g = region(vec![[0.1, 0.1, 0.1], [0.2, 0.15, 0.05]], 0.01);
        let mut t = Octree::new(3);
        for _ in 0..3 {
            t.refine_pass(&d, &g);
        }
        assert!(t.is_balanced());
        let mut finest = 0;
        for id in t.leaves() {
            let c = t.cell(id);
            if c.origin.iter().any(|&o| o >= 4) {
                assert!(c.level <= 2, "{c:?}");
            }
            if c.level == 3 {
                finest += 1;
                assert!(c.origin.iter().all(|&o| o < 4));
            }
        }
        assert!(finest > 0);
    }

    #[test]
    fn level_one_cells_always_refine_when_region_inside() {
        // any gap inside a cube is shorter than half its edge
        let d = Domain::<f64>::unit_cube();
        let mut t = Octree::new(2);
        let g = region(vec![[0.01, 0.01, 0.01]], 0.001);
        t.refine_pass(&d, &g);
        let stats = t.refine_pass(&d, &g);
        assert_eq!(stats.refined, 8);
    }

    #[test]
    fn balance_repairs_corner_jump() {
        let mut t = Octree::new(3);
        t.split(0);
        // refine the child at the centre corner twice
        let c0 = t.cell(0).first_child;
        t.split(c0);
        let cc = t.cell(c0).first_child + 7;
        t.split(cc);
        assert!(!t.is_balanced());
        let n = t.balance();
        assert!(n > 0);
        assert!(t.is_balanced());
    }

    #[test]
    fn locate_matches_cell_bounds() {
        let d = Domain::<f64>::new([0.0, 10.0, -1.0], [2.0, 20.0, 1.0]).unwrap();
        let mut t = Octree::new(3);
        t.split(0);
        t.split(t.cell(0).first_child + 5);
        for x in [[0.1, 11.0, -0.9], [1.9, 19.0, 0.9], [1.2, 10.1, 0.5], [2.0, 20.0, 1.0]] {
            let id = t.locate(&d, &x).unwrap();
            assert!(t.cell(id).is_leaf());
            for a in 0..3 {
                let iv = t.cell_interval(&d, id, a);
                assert!(x[a] >= iv.lo && x[a] <= iv.hi);
            }
        }
        assert!(t.locate(&d, &[2.1, 15.0, 0.0]).is_none());
    }
}
