//! Binned comparison of a density against SSA samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::Domain;
use crate::solver::StationaryDensity;
use crate::ssa::TrajectorySamples;
use crate::{Error, Real, Result};

/// Regular histogram over a box. Each sample may be spread uniformly over a
/// cube of edge `spread` centred on it (1 for integer copy numbers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram3D {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub bins: [usize; 3],
    /// Row-major with the first axis slowest.
    pub counts: Vec<f64>,
    /// Sample weight falling outside the box.
    pub outside: f64,
    pub n_samples: usize,
}

fn overlaps(lo: f64, hi: f64, n: usize, a: f64, b: f64) -> Vec<(usize, f64)> {
    let h = (hi - lo) / n as f64;
    if b <= a {
        // point sample
        if a < lo || a > hi {
            return Vec::new();
        }
        let k = (((a - lo) / h).floor() as usize).min(n - 1);
        return vec![(k, 1.0)];
    }
    let len = b - a;
    let k0 = (((a - lo) / h).floor().max(0.0) as usize).min(n - 1);
    let k1 = (((b - lo) / h).floor().max(0.0) as usize).min(n - 1);
    (k0..=k1)
        .filter_map(|k| {
            let c0 = lo + h * k as f64;
            let c1 = if k == n - 1 { hi } else { c0 + h };
            let ov = (b.min(c1) - a.max(c0)).max(0.0);
            (ov > 0.0).then_some((k, ov / len))
        })
        .collect()
}

impl Histogram3D {
    pub fn new<T: Real>(domain: &Domain<T>, bins: [usize; 3]) -> Result<Self> {
        if bins.contains(&0) {
            return Err(Error::Config(format!("histogram bins must be positive, got {bins:?}")));
        }
        Ok(Self {
            lo: domain.lo.map(|v| v.to_f64_lossy()),
            hi: domain.hi.map(|v| v.to_f64_lossy()),
            bins,
            counts: vec![0.0; bins[0] * bins[1] * bins[2]],
            outside: 0.0,
            n_samples: 0,
        })
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.bins[1] + j) * self.bins[2] + k
    }

    pub fn add(&mut self, x: [f64; 3], spread: f64) {
        let s = 0.5 * spread;
        let ov: [Vec<(usize, f64)>; 3] =
            std::array::from_fn(|a| overlaps(self.lo[a], self.hi[a], self.bins[a], x[a] - s, x[a] + s));
        let mut inside = 0.0;
        for &(i, wi) in &ov[0] {
            for &(j, wj) in &ov[1] {
                for &(k, wk) in &ov[2] {
                    let idx = self.index(i, j, k);
                    self.counts[idx] += wi * wj * wk;
                    inside += wi * wj * wk;
                }
            }
        }
        self.outside += (1.0 - inside).max(0.0);
        self.n_samples += 1;
    }

    pub fn from_samples<T: Real>(samples: &TrajectorySamples<T>, domain: &Domain<T>, bins: [usize; 3], spread: f64) -> Result<Self> {
        if samples.dim != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: samples.dim,
            });
        }
        let mut h = Self::new(domain, bins)?;
        for p in samples.iter_points() {
            h.add([p[0].to_f64_lossy(), p[1].to_f64_lossy(), p[2].to_f64_lossy()], spread);
        }
        if h.n_samples == 0 {
            return Err(Error::EmptyHistogram);
        }
        Ok(h)
    }

    /// Per-bin sample fractions; together with `outside_fraction` they sum to 1.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_samples.max(1) as f64;
        self.counts.iter().map(|c| c / n).collect()
    }

    pub fn outside_fraction(&self) -> f64 {
        self.outside / self.n_samples.max(1) as f64
    }

    /// Mass of the density in every bin, by midpoint sampling with `sub`
    /// points per bin and axis.
    pub fn bin_masses<T: Real>(&self, p: &StationaryDensity<T>, sub: usize) -> Vec<f64> {
        let h: [f64; 3] = std::array::from_fn(|a| (self.hi[a] - self.lo[a]) / self.bins[a] as f64);
        let cell = h[0] * h[1] * h[2] / (sub * sub * sub) as f64;
        (0..self.counts.len())
            .into_par_iter()
            .map(|idx| {
                let k = idx % self.bins[2];
                let j = (idx / self.bins[2]) % self.bins[1];
                let i = idx / (self.bins[1] * self.bins[2]);
                let mut s = 0.0;
                for a in 0..sub {
                    for b in 0..sub {
                        for c in 0..sub {
                            let frac = |n: usize, m: usize| n as f64 + (m as f64 + 0.5) / sub as f64;
                            let x = [
                                T::c(self.lo[0] + h[0] * frac(i, a)),
                                T::c(self.lo[1] + h[1] * frac(j, b)),
                                T::c(self.lo[2] + h[2] * frac(k, c)),
                            ];
                            if let Some(leaf) = p.mesh.locate(&x) {
                                s += p.mesh.interpolate_in_leaf(leaf, &x, &p.vertex_values).to_f64_lossy();
                            }
                        }
                    }
                }
                s * cell
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    /// Total-variation distance between binned density and sample frequencies.
    pub tv: f64,
    /// Sample weight that fell outside the domain (counted in `tv`).
    pub outside_fraction: f64,
    pub density_mass_in_bins: f64,
    pub n_samples: usize,
    pub bins: [usize; 3],
}

/// Total variation `1/2 sum |freq - mass|` over a `bins` histogram of the
/// samples (each spread over a unit cube), plus half the sample weight
/// outside the domain.
pub fn ssa_cross_check<T: Real>(p: &StationaryDensity<T>, samples: &TrajectorySamples<T>, bins: [usize; 3]) -> Result<CrossCheck> {
    let hist = Histogram3D::from_samples(samples, p.mesh.domain(), bins, 1.0)?;
    let fine = 1usize << p.mesh.stats().finest_level;
    let sub = (2 * fine.div_ceil(*bins.iter().min().unwrap())).max(2);
    let masses = hist.bin_masses(p, sub);
    Ok(compare(&hist, &masses))
}

pub fn compare(hist: &Histogram3D, masses: &[f64]) -> CrossCheck {
    let freq = hist.frequencies();
    let out = hist.outside_fraction();
    let tv = 0.5 * (freq.iter().zip(masses).map(|(f, m)| (f - m).abs()).sum::<f64>() + out);
    CrossCheck {
        tv,
        outside_fraction: out,
        density_mass_in_bins: masses.iter().sum(),
        n_samples: hist.n_samples,
        bins: hist.bins,
    }
}

/// Fraction of the density's mass outside the cells (of a regular grid at
/// the finest mesh resolution) that contain a sample, after dilating that set
/// by `dilation` cells in every direction.
pub fn mass_outside_sample_shell<T: Real>(p: &StationaryDensity<T>, samples: &TrajectorySamples<T>, dilation: usize) -> f64 {
    let n = 1usize << p.mesh.stats().finest_level;
    let d = p.mesh.domain();
    let cell_of = |x: &[T]| -> Option<[usize; 3]> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let u = ((x[a] - d.lo[a]) / d.extent(a)).to_f64_lossy();
            if !(0.0..=1.0).contains(&u) {
                return None;
            }
            c[a] = ((u * n as f64) as usize).min(n - 1);
        }
        Some(c)
    };
    let idx = |c: [usize; 3]| (c[0] * n + c[1]) * n + c[2];
    let mut marked = vec![false; n * n * n];
    for x in samples.iter_points() {
        if let Some(c) = cell_of(x) {
            marked[idx(c)] = true;
        }
    }
    // separable Chebyshev dilation
    for axis in 0..3 {
        let src = marked.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = [i, j, k];
                    if !src[idx(c)] {
                        continue;
                    }
                    let lo = c[axis].saturating_sub(dilation);
                    let hi = (c[axis] + dilation).min(n - 1);
                    for t in lo..=hi {
                        let mut e = c;
                        e[axis] = t;
                        marked[idx(e)] = true;
                    }
                }
            }
        }
    }
    let h: [T; 3] = std::array::from_fn(|a| d.extent(a) / T::from_usize_lossy(n));
    let (inside, total) = (0..n * n * n)
        .into_par_iter()
        .map(|id| {
            let c = [id / (n * n), (id / n) % n, id % n];
            let x: [T; 3] = std::array::from_fn(|a| d.lo[a] + h[a] * (T::from_usize_lossy(c[a]) + T::c(0.5)));
            let v = p
                .mesh
                .locate(&x)
                .map(|leaf| p.mesh.interpolate_in_leaf(leaf, &x, &p.vertex_values).to_f64_lossy())
                .unwrap_or(0.0);
            (if marked[id] { v } else { 0.0 }, v)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total > 0.0 {
        (total - inside) / total
    } else {
        0.0
    }
}
