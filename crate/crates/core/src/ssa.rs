//! Exact stochastic simulation (Gillespie direct method) and the subsampled
//! point cloud that drives mesh generation.
//!
//! Each step draws the waiting time `tau = -ln(u) / alpha_0` and picks reaction
//! `j` with probability `alpha_j / alpha_0` by a cumulative-sum scan. A
//! trajectory of length `B + T` is sampled at the equidistant times
//! `B + l/Q`, `l = 1..floor(QT)`, while per-species extrema are tracked at
//! reaction resolution over `[B, B + T]`.

use std::io::Write;

use rand::distr::{Distribution, OpenClosed01, StandardUniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::network::ReactionNetwork;
use crate::{Error, Real, Result};

/// Identifies an independent random stream: `(seed, stream_id)` always yields
/// the same sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Outcome of one SSA step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step<T> {
    Fired { tau: T, reaction: usize },
    /// Total propensity is zero; the state can never change again.
    Absorbed,
}

/// `tau = -ln(u) / a0`.
#[inline]
pub fn waiting_time<T: Real>(a0: T, u: T) -> T {
    -u.ln() / a0
}

/// Index `j` with `sum_{k<j} a_k < u * a0 <= sum_{k<=j} a_k`, skipping
/// zero-propensity channels.
#[inline]
pub fn select_reaction<T: Real>(props: &[T], a0: T, u: T) -> usize {
    let target = u * a0;
    let mut acc = T::zero();
    let mut last = 0;
    for (j, a) in props.iter().enumerate() {
        if *a > T::zero() {
            acc += *a;
            last = j;
            if target < acc {
                return j;
            }
        }
    }
    last
}

/// Propensities at an integer state, with channels that would drive a count
/// negative switched off.
#[inline]
fn state_propensities<T: Real>(net: &ReactionNetwork<T>, state: &[i64], xs: &mut [T], props: &mut [T]) -> T {
    for (x, s) in xs.iter_mut().zip(state) {
        *x = T::c(*s as f64);
    }
    net.propensities_into(xs, props);
    let mut a0 = T::zero();
    for (p, r) in props.iter_mut().zip(net.reactions()) {
        if r.stoich.iter().zip(state).any(|(nu, s)| s + nu < 0) || !(*p > T::zero()) {
            *p = T::zero();
        }
        a0 += *p;
    }
    a0
}

/// Reusable buffers for stepping one trajectory.
struct Stepper<T> {
    xs: Vec<T>,
    props: Vec<T>,
    a0: T,
}

impl<T: Real> Stepper<T> {
    fn new(net: &ReactionNetwork<T>) -> Self {
        Self {
            xs: vec![T::zero(); net.n_species()],
            props: vec![T::zero(); net.n_reactions()],
            a0: T::zero(),
        }
    }

    /// Evaluates propensities at `state` and draws the waiting time, or `None`
    /// when the state is absorbing.
    fn waiting_time<R: Rng + ?Sized>(&mut self, net: &ReactionNetwork<T>, state: &[i64], rng: &mut R) -> Option<T> {
        self.a0 = state_propensities(net, state, &mut self.xs, &mut self.props);
        if !(self.a0 > T::zero()) {
            return None;
        }
        let u: f64 = OpenClosed01.sample(rng);
        Some(waiting_time(self.a0, T::c(u)))
    }

    /// Picks and applies a reaction using the propensities of the last
    /// `waiting_time` call.
    fn fire<R: Rng + ?Sized>(&self, net: &ReactionNetwork<T>, state: &mut [i64], rng: &mut R) -> usize {
        let u: f64 = StandardUniform.sample(rng);
        let j = select_reaction(&self.props, self.a0, T::c(u));
        for (s, nu) in state.iter_mut().zip(&net.reactions()[j].stoich) {
            *s += nu;
        }
        j
    }

    fn step<R: Rng + ?Sized>(&mut self, net: &ReactionNetwork<T>, state: &mut [i64], rng: &mut R) -> Step<T> {
        match self.waiting_time(net, state, rng) {
            Some(tau) => Step::Fired {
                tau,
                reaction: self.fire(net, state, rng),
            },
            None => Step::Absorbed,
        }
    }
}

/// One SSA step: updates `state` in place and returns the waiting time and
/// the reaction fired.
pub fn ssa_step<T: Real, R: Rng + ?Sized>(net: &ReactionNetwork<T>, state: &mut [i64], rng: &mut R) -> Result<Step<T>> {
    if state.len() != net.n_species() {
        return Err(Error::DimensionMismatch {
            expected: net.n_species(),
            got: state.len(),
        });
    }
    Ok(Stepper::new(net).step(net, state, rng))
}

/// Sampling schedule shared by every trajectory of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Burn-in `B`.
    pub burn_in: f64,
    /// Recorded window length `T`.
    pub duration: f64,
    /// Samples per unit time `Q`.
    pub rate: f64,
}

impl SamplingPlan {
    pub fn new(burn_in: f64, duration: f64, rate: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {duration}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Config(format!("Q must be positive, got {rate}")));
        }
        if !(burn_in >= 0.0 && burn_in.is_finite()) {
            return Err(Error::Config(format!("B must be non-negative, got {burn_in}")));
        }
        Ok(Self {
            burn_in,
            duration,
            rate,
        })
    }

    /// `B = T / 10` when no burn-in is given.
    pub fn with_default_burn_in(duration: f64, rate: f64) -> Result<Self> {
        Self::new(duration / 10.0, duration, rate)
    }

    /// `floor(Q T)`.
    pub fn samples_per_trajectory(&self) -> usize {
        (self.rate * self.duration).floor() as usize
    }

    pub fn sample_time(&self, l: usize) -> f64 {
        self.burn_in + l as f64 / self.rate
    }

    pub fn end_time(&self) -> f64 {
        self.burn_in + self.duration
    }
}

/// Subsampled states of `S` trajectories plus per-species extrema over the
/// recording window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySamples<T> {
    pub dim: usize,
    /// Flat row-major sample coordinates.
    pub points: Vec<T>,
    /// Sample times, one per point.
    pub times: Vec<T>,
    /// Trajectory index of each point.
    pub trajectory: Vec<u32>,
    pub per_species_min: Vec<T>,
    pub per_species_max: Vec<T>,
    pub n_trajectories: usize,
    pub plan: SamplingPlan,
    /// Reaction events simulated over all trajectories (burn-in included).
    pub events: u64,
}

impl<T: Real> TrajectorySamples<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[T]> {
        self.points.chunks_exact(self.dim)
    }

    /// `x_max - x_min` per species.
    pub fn ranges(&self) -> Vec<T> {
        self.per_species_max
            .iter()
            .zip(&self.per_species_min)
            .map(|(a, b)| *a - *b)
            .collect()
    }

    /// Concatenates trajectories; extrema are combined by min/max.
    pub fn merge(parts: Vec<TrajectorySamples<T>>) -> Option<Self> {
        let mut it = parts.into_iter();
        let mut acc = it.next()?;
        for p in it {
            assert_eq!(p.dim, acc.dim);
            let offset = acc.n_trajectories as u32;
            acc.points.extend(p.points);
            acc.times.extend(p.times);
            acc.trajectory.extend(p.trajectory.into_iter().map(|k| k + offset));
            for i in 0..acc.dim {
                acc.per_species_min[i] = acc.per_species_min[i].min(p.per_species_min[i]);
                acc.per_species_max[i] = acc.per_species_max[i].max(p.per_species_max[i]);
            }
            acc.n_trajectories += p.n_trajectories;
            acc.events += p.events;
        }
        Some(acc)
    }

    /// Writes `t,x1,x2,...` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (t, p) in self.times.iter().zip(self.iter_points()) {
            let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", t, row.join(","))?;
        }
        Ok(())
    }
}

/// Simulates one trajectory from `y0` over `[0, B + T]`.
pub fn simulate<T: Real, R: Rng + ?Sized>(
    net: &ReactionNetwork<T>,
    y0: &[i64],
    plan: &SamplingPlan,
    rng: &mut R,
) -> Result<TrajectorySamples<T>> {
    let n = net.n_species();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y0.len(),
        });
    }
    if let Some(i) = y0.iter().position(|v| *v < 0) {
        return Err(Error::Config(format!("initial state has negative count in species {i}")));
    }
    let n_samples = plan.samples_per_trajectory();
    let end = plan.end_time();
    let mut state = y0.to_vec();
    let mut points = Vec::with_capacity(n_samples * n);
    let mut times = Vec::with_capacity(n_samples);
    let mut lo = vec![i64::MAX; n];
    let mut hi = vec![i64::MIN; n];
    let mut stepper = Stepper::new(net);
    let mut t = 0.0_f64;
    let mut next_l = 1usize;
    let mut events = 0u64;

    loop {
        let tau = stepper.waiting_time(net, &state, rng);
        let Some(tau) = tau else {
            if t < end {
                let partial = points
                    .chunks_exact(n)
                    .map(|p: &[T]| p.iter().map(|v| v.to_f64_lossy() as i64).collect())
                    .collect();
                return Err(Error::Absorbed {
                    time: t,
                    trajectory: None,
                    partial,
                });
            }
            break;
        };
        let t_next = t + tau.to_f64_lossy();
        // `state` holds on [t, t_next)
        if t_next > plan.burn_in && t <= end {
            for i in 0..n {
                lo[i] = lo[i].min(state[i]);
                hi[i] = hi[i].max(state[i]);
            }
        }
        while next_l <= n_samples {
            let ts = plan.sample_time(next_l);
            if ts >= t_next {
                break;
            }
            points.extend(state.iter().map(|s| T::c(*s as f64)));
            times.push(T::c(ts));
            next_l += 1;
        }
        if t_next > end {
            break;
        }
        stepper.fire(net, &mut state, rng);
        events += 1;
        t = t_next;
    }

    Ok(TrajectorySamples {
        dim: n,
        points,
        times,
        trajectory: vec![0; n_samples],
        per_species_min: lo.iter().map(|v| T::c(*v as f64)).collect(),
        per_species_max: hi.iter().map(|v| T::c(*v as f64)).collect(),
        n_trajectories: 1,
        plan: *plan,
        events,
    })
}

/// Runs one trajectory per start on independent streams `(seed, k)` and merges
/// the results in start order.
pub fn run_ensemble<T: Real>(
    net: &ReactionNetwork<T>,
    starts: &[Vec<i64>],
    plan: &SamplingPlan,
    seed: u64,
) -> Result<TrajectorySamples<T>> {
    if starts.is_empty() {
        return Err(Error::Config("at least one SSA start point is required".into()));
    }
    let parts = starts
        .par_iter()
        .enumerate()
        .map(|(k, y0)| {
            let mut rng = RngStream::new(seed, k as u64).rng();
            simulate(net, y0, plan, &mut rng).map_err(|e| match e {
                Error::Absorbed { time, partial, .. } => Error::Absorbed {
                    time,
                    trajectory: Some(k),
                    partial,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySamples::merge(parts).expect("non-empty ensemble"))
}
