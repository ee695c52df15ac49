//! Computational domain and refinement region derived from SSA samples.

use serde::{Deserialize, Serialize};

use crate::ssa::TrajectorySamples;
use crate::{Error, Real, Result};

/// Closed interval `[lo, hi]` on one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn len(&self) -> T {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    /// Gap between two intervals, zero when they overlap.
    pub fn gap(&self, other: &Self) -> T {
        (other.lo - self.hi).max(self.lo - other.hi).max(T::zero())
    }
}

/// Axis-aligned box `A_1 x A_2 x A_3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    pub lo: [T; 3],
    pub hi: [T; 3],
    pub lower_clamps: [T; 3],
}

impl<T: Real> Domain<T> {
    pub fn new(lo: [T; 3], hi: [T; 3]) -> Result<Self> {
        Self::with_clamps(lo, hi, [T::zero(); 3])
    }

    pub fn with_clamps(lo: [T; 3], hi: [T; 3], lower_clamps: [T; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(hi[i] > lo[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::Config(format!(
                    "domain interval {i} is empty or invalid: ({}, {})",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(Self { lo, hi, lower_clamps })
    }

    pub fn unit_cube() -> Self {
        Self::new([T::zero(); 3], [T::one(); 3]).unwrap()
    }

    pub fn extent(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn interval(&self, axis: usize) -> Interval<T> {
        Interval::new(self.lo[axis], self.hi[axis])
    }

    pub fn volume(&self) -> T {
        self.extent(0) * self.extent(1) * self.extent(2)
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[T; 3]) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

/// Union of axis-aligned ellipsoids with common radii around every sample.
#[derive(Debug, Clone)]
pub struct RefinementRegion<T> {
    centers: Vec<[T; 3]>,
    radii: [T; 3],
    /// Center coordinates sorted per axis, for interval-distance queries.
    sorted: [Vec<T>; 3],
}

impl<T: Real> RefinementRegion<T> {
    pub fn new(centers: Vec<[T; 3]>, radii: [T; 3]) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Config("refinement region needs at least one center".into()));
        }
        if radii.iter().any(|r| !(*r >= T::zero()) || !r.is_finite()) {
            return Err(Error::Config(format!("invalid radii {radii:?}")));
        }
        let sorted = std::array::from_fn(|i| {
            let mut v: Vec<T> = centers.iter().map(|c| c[i]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite center coordinates"));
            v
        });
        Ok(Self {
            centers,
            radii,
            sorted,
        })
    }

    pub fn centers(&self) -> &[[T; 3]] {
        &self.centers
    }

    pub fn radii(&self) -> [T; 3] {
        self.radii
    }

    /// `dist(Gamma, I)` along one axis: the axis projection of each ellipsoid
    /// is `[z_i - r_i, z_i + r_i]`, so this is the smallest gap between `I` and
    /// any such interval.
    pub fn axis_distance(&self, interval: Interval<T>, axis: usize) -> T {
        let s = &self.sorted[axis];
        let r = self.radii[axis];
        // first center >= interval.lo - r
        let k = s.partition_point(|c| *c < interval.lo - r);
        let mut best = T::infinity();
        if k < s.len() {
            best = best.min(Interval::new(s[k] - r, s[k] + r).gap(&interval));
        }
        if k > 0 {
            best = best.min(Interval::new(s[k - 1] - r, s[k - 1] + r).gap(&interval));
        }
        best
    }

    /// Whether `x` lies in at least one ellipsoid (closed).
    pub fn contains(&self, x: &[T; 3]) -> bool {
        self.centers.iter().any(|c| {
            let mut q = T::zero();
            for i in 0..3 {
                let d = x[i] - c[i];
                if self.radii[i] > T::zero() {
                    q += (d / self.radii[i]).powi(2);
                } else if d != T::zero() {
                    return false;
                }
            }
            q <= T::one()
        })
    }
}

fn points3<T: Real>(samples: &TrajectorySamples<T>) -> Result<Vec<[T; 3]>> {
    if samples.dim != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: samples.dim,
        });
    }
    Ok(samples.iter_points().map(|p| [p[0], p[1], p[2]]).collect())
}

/// `r = beta1 * (x_range_1, x_range_2, x_range_3)` around every sample.
pub fn compute_region<T: Real>(samples: &TrajectorySamples<T>, beta1: T) -> Result<RefinementRegion<T>> {
    if !(beta1 > T::zero()) {
        return Err(Error::Config(format!("beta1 must be positive, got {beta1}")));
    }
    if samples.is_empty() {
        return Err(Error::Config("refinement region needs at least one sample".into()));
    }
    let ranges = samples.ranges();
    if let Some(axis) = ranges.iter().position(|r| !(*r > T::zero())) {
        return Err(Error::DegenerateRegion { axis });
    }
    let radii = [beta1 * ranges[0], beta1 * ranges[1], beta1 * ranges[2]];
    RefinementRegion::new(points3(samples)?, radii)
}

/// `A_i = (max(clamp_i, x_min - beta2 x_range), x_max + beta2 x_range)`.
pub fn compute_domain<T: Real>(samples: &TrajectorySamples<T>, beta2: T, lower_clamps: [T; 3]) -> Result<Domain<T>> {
    if !(beta2 > T::zero()) {
        return Err(Error::Config(format!("beta2 must be positive, got {beta2}")));
    }
    if samples.dim != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: samples.dim,
        });
    }
    let mut lo = [T::zero(); 3];
    let mut hi = [T::zero(); 3];
    for i in 0..3 {
        let (mn, mx) = (samples.per_species_min[i], samples.per_species_max[i]);
        let range = mx - mn;
        lo[i] = lower_clamps[i].max(mn - beta2 * range);
        hi[i] = mx + beta2 * range;
    }
    Domain::with_clamps(lo, hi, lower_clamps)
}
