//! Marginals and slices of a density on regular grids.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::solver::StationaryDensity;
use crate::{Error, Real, Result};

/// Regular 2D grid over two coordinate axes. `values[i * y.len() + j]` is
/// the value at `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<T> {
    pub axes: [usize; 2],
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Grid2D<T> {
    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[i * self.y.len() + j]
    }

    /// Midpoint-rule integral; meaningful for cell-centred grids.
    pub fn midpoint_integral(&self) -> T {
        let dx = self.x[1] - self.x[0];
        let dy = self.y[1] - self.y[0];
        self.values.iter().copied().sum::<T>() * dx * dy
    }

    /// Coordinates of the largest value.
    pub fn argmax(&self) -> (T, T) {
        let k = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].partial_cmp(&self.values[b]).unwrap())
            .unwrap();
        (self.x[k / self.y.len()], self.y[k % self.y.len()])
    }

    /// Integrates out the second axis with the midpoint rule.
    pub fn integrate_y(&self) -> Grid1D<T> {
        let dy = self.y[1] - self.y[0];
        let ny = self.y.len();
        Grid1D {
            axis: self.axes[0],
            x: self.x.clone(),
            values: (0..self.x.len())
                .map(|i| self.values[i * ny..(i + 1) * ny].iter().copied().sum::<T>() * dy)
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x{},x{},value", self.axes[0] + 1, self.axes[1] + 1)?;
        for (i, x) in self.x.iter().enumerate() {
            for (j, y) in self.y.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{:e}",
                    x.to_f64_lossy(),
                    y.to_f64_lossy(),
                    self.value(i, j).to_f64_lossy()
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D<T> {
    pub axis: usize,
    pub x: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Grid1D<T> {
    pub fn midpoint_integral(&self) -> T {
        let dx = self.x[1] - self.x[0];
        self.values.iter().copied().sum::<T>() * dx
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x{},value", self.axis + 1)?;
        for (x, v) in self.x.iter().zip(&self.values) {
            writeln!(w, "{},{:e}", x.to_f64_lossy(), v.to_f64_lossy())?;
        }
        Ok(())
    }
}

fn check_axis(axis: usize) -> Result<()> {
    if axis < 3 {
        Ok(())
    } else {
        Err(Error::Config(format!("axis {axis} out of range 0..3")))
    }
}

/// Cells per axis of the finest leaves.
pub fn finest_resolution<T: Real>(p: &StationaryDensity<T>) -> usize {
    1 << p.mesh.stats().finest_level
}

fn centers<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let h = (hi - lo) / T::from_usize_lossy(n);
    (0..n).map(|i| lo + h * (T::from_usize_lossy(i) + T::c(0.5))).collect()
}

fn nodes<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let h = (hi - lo) / T::from_usize_lossy(n);
    (0..=n).map(|i| if i == n { hi } else { lo + h * T::from_usize_lossy(i) }).collect()
}

fn value_at<T: Real>(p: &StationaryDensity<T>, x: &[T; 3]) -> T {
    match p.mesh.locate(x) {
        Some(leaf) => p.mesh.interpolate_in_leaf(leaf, x, &p.vertex_values),
        None => T::zero(),
    }
}

/// Integrates out `drop_axis` by composite midpoint sampling on `n` cells per
/// axis (the finest mesh resolution by default).
pub fn marginal2d<T: Real>(p: &StationaryDensity<T>, drop_axis: usize) -> Result<Grid2D<T>> {
    marginal2d_with_resolution(p, drop_axis, finest_resolution(p))
}

pub fn marginal2d_with_resolution<T: Real>(p: &StationaryDensity<T>, drop_axis: usize, n: usize) -> Result<Grid2D<T>> {
    check_axis(drop_axis)?;
    let d = p.mesh.domain();
    let keep = [(drop_axis + 1) % 3, (drop_axis + 2) % 3];
    let keep = if keep[0] < keep[1] { keep } else { [keep[1], keep[0]] };
    let x = centers(d.lo[keep[0]], d.hi[keep[0]], n);
    let y = centers(d.lo[keep[1]], d.hi[keep[1]], n);
    let z = centers(d.lo[drop_axis], d.hi[drop_axis], n);
    let dz = d.extent(drop_axis) / T::from_usize_lossy(n);
    let values = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let mut pt = [T::zero(); 3];
            pt[keep[0]] = x[k / n];
            pt[keep[1]] = y[k % n];
            z.iter()
                .map(|zv| {
                    pt[drop_axis] = *zv;
                    value_at(p, &pt)
                })
                .sum::<T>()
                * dz
        })
        .collect();
    Ok(Grid2D { axes: keep, x, y, values })
}

/// Integrates out the other two axes with the same midpoint scheme.
pub fn marginal1d<T: Real>(p: &StationaryDensity<T>, keep_axis: usize) -> Result<Grid1D<T>> {
    check_axis(keep_axis)?;
    let n = finest_resolution(p);
    let d = p.mesh.domain();
    let [a, b] = [(keep_axis + 1) % 3, (keep_axis + 2) % 3];
    let x = centers(d.lo[keep_axis], d.hi[keep_axis], n);
    let ya = centers(d.lo[a], d.hi[a], n);
    let yb = centers(d.lo[b], d.hi[b], n);
    let da = d.extent(a) / T::from_usize_lossy(n);
    let db = d.extent(b) / T::from_usize_lossy(n);
    let values = x
        .par_iter()
        .map(|xv| {
            let mut pt = [T::zero(); 3];
            pt[keep_axis] = *xv;
            let mut s = T::zero();
            for va in &ya {
                for vb in &yb {
                    pt[a] = *va;
                    pt[b] = *vb;
                    s += value_at(p, &pt);
                }
            }
            s * da * db
        })
        .collect();
    Ok(Grid1D {
        axis: keep_axis,
        x,
        values,
    })
}

/// Point values on the plane `x_axis = value`, on the lattice of the finest
/// leaves (`n + 1` nodes per direction).
pub fn slice<T: Real>(p: &StationaryDensity<T>, axis: usize, value: T) -> Result<Grid2D<T>> {
    check_axis(axis)?;
    let d = p.mesh.domain();
    if !(value >= d.lo[axis] && value <= d.hi[axis]) {
        let mut point = vec![f64::NAN; 3];
        point[axis] = value.to_f64_lossy();
        return Err(Error::OutOfDomain { point });
    }
    let n = finest_resolution(p);
    let keep = {
        let k = [(axis + 1) % 3, (axis + 2) % 3];
        if k[0] < k[1] {
            k
        } else {
            [k[1], k[0]]
        }
    };
    let x = nodes(d.lo[keep[0]], d.hi[keep[0]], n);
    let y = nodes(d.lo[keep[1]], d.hi[keep[1]], n);
    let ny = y.len();
    let values = (0..x.len() * ny)
        .into_par_iter()
        .map(|k| {
            let mut pt = [T::zero(); 3];
            pt[axis] = value;
            pt[keep[0]] = x[k / ny];
            pt[keep[1]] = y[k % ny];
            value_at(p, &pt)
        })
        .collect();
    Ok(Grid2D { axes: keep, x, y, values })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{build_mesh, AdaptiveMesh, Domain, RefinementRegion};
    use crate::solver::DensityReport;

    fn density_from<F: Fn(&[f64; 3]) -> f64>(mesh: AdaptiveMesh<f64>, f: F) -> StationaryDensity<f64> {
        let c: Vec<f64> = (0..mesh.dofs().n_dofs() as u32)
            .map(|k| f(&mesh.vertices()[mesh.dofs().dof_vertex(k) as usize]))
            .collect();
        let rep = DensityReport {
            method: crate::solver::SolverMethod::Direct,
            clipped_mass_fraction: 0.0,
            residual: 0.0,
            iterations: 0,
            shift: 0.0,
        };
        StationaryDensity::from_coefficients(Arc::new(mesh), c, rep)
    }

    fn mesh() -> AdaptiveMesh<f64> {
        let d = Domain::new([0.0, 1.0, 2.0], [2.0, 2.0, 6.0]).unwrap();
        let g = RefinementRegion::new(vec![[0.5, 1.5, 3.0]], [0.01; 3]).unwrap();
        build_mesh(&d, &g, 4, 1_000_000).unwrap()
    }

    #[test]
    fn constant_marginal() {
        let p = density_from(mesh(), |_| 1.0 / 8.0);
        let m = marginal2d(&p, 2).unwrap();
        assert_eq!(m.axes, [0, 1]);
        assert!(m.values.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!((m.midpoint_integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fubini_consistency() {
        let p = density_from(mesh(), |x| (x[0] + 0.2) * (x[1] - 0.5) * x[2].sqrt() / 8.0);
        let m2 = marginal2d(&p, 1).unwrap();
        assert_eq!(m2.axes, [0, 2]);
        let m1 = marginal1d(&p, 0).unwrap();
        let via2 = m2.integrate_y();
        for (a, b) in via2.values.iter().zip(&m1.values) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn slice_properties() {
        let p = density_from(mesh(), |_| 3.0);
        let s = slice(&p, 0, 1.3).unwrap();
        assert!(s.values.iter().all(|v| (v - 3.0).abs() < 1e-12));
        assert!(matches!(slice(&p, 0, 2.5), Err(Error::OutOfDomain { .. })));

        let f = |x: &[f64; 3]| x[0] * x[1] + x[2];
        let m = mesh();
        let p = density_from(m.clone(), f);
        // a lattice plane reproduces nodal values
        let s = slice(&p, 2, 4.0).unwrap();
        for (i, x) in s.x.iter().enumerate() {
            for (j, y) in s.y.iter().enumerate() {
                let pt = [*x, *y, 4.0];
                if let Some(v) = m.vertices().iter().position(|q| *q == pt) {
                    assert!((s.value(i, j) - p.vertex_values[v]).abs() < 1e-12);
                }
            }
        }
        // neighbouring slices differ by O(spacing)
        let h = 4.0 / 16.0;
        let a = slice(&p, 2, 4.0).unwrap();
        let b = slice(&p, 2, 4.0 + h).unwrap();
        let max_gap = a.values.iter().zip(&b.values).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(max_gap <= 1.5 * h);
    }

    #[test]
    fn csv_layout() {
        let p = density_from(mesh(), |_| 0.125);
        let m = marginal2d_with_resolution(&p, 0, 4).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("x2,x3,value"));
        assert_eq!(s.lines().count(), 17);
    }
}
