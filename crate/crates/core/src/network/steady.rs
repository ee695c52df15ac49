//! Newton search for steady states of the mean-field system `dx/dt = v(x)`.

use log::warn;

use super::ReactionNetwork;
use crate::dense::solve_dense;
use crate::Real;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<T> {
    /// Converged once `max_i |v_i(x)| <= residual_tol * (1 + max_i |x_i|)`.
    pub residual_tol: T,
    pub max_iter: usize,
    /// Roots closer than this (max-norm) are reported once.
    pub dedup_tol: T,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        let eps = T::epsilon().to_f64_lossy();
        Self {
            residual_tol: T::c((100.0 * eps).max(1e-10)),
            max_iter: 100,
            dedup_tol: T::c(1e-6),
        }
    }
}

/// Runs Newton from every guess and returns the distinct converged roots in
/// the order they were first found.
pub fn mean_field_steady_states<T: Real>(
    net: &ReactionNetwork<T>,
    guesses: &[Vec<T>],
    opts: &NewtonOptions<T>,
) -> Vec<Vec<T>> {
    let mut roots: Vec<Vec<T>> = Vec::new();
    for (g, guess) in guesses.iter().enumerate() {
        match newton(net, guess, opts) {
            Some(root) => {
                let dup = roots.iter().any(|r| {
                    r.iter()
                        .zip(&root)
                        .all(|(a, b)| (*a - *b).abs() <= opts.dedup_tol)
                });
                if !dup {
                    roots.push(root);
                }
            }
            None => warn!("steady-state guess {g} ({guess:?}) did not converge; dropped"),
        }
    }
    roots
}

fn newton<T: Real>(net: &ReactionNetwork<T>, guess: &[T], opts: &NewtonOptions<T>) -> Option<Vec<T>> {
    let n = net.n_species();
    if guess.len() != n {
        return None;
    }
    let mut x = guess.to_vec();
    for _ in 0..=opts.max_iter {
        let v = net.drift_vector(&x).ok()?;
        let scale = T::one() + x.iter().fold(T::zero(), |m, xi| m.max(xi.abs()));
        let res = v.iter().fold(T::zero(), |m, vi| m.max(vi.abs()));
        if !res.is_finite() {
            return None;
        }
        if res <= opts.residual_tol * scale {
            return Some(x);
        }
        let jac = net.drift_jacobian(&x).ok()?;
        let rhs: Vec<T> = v.iter().map(|vi| -*vi).collect();
        let dx = solve_dense(n, jac, rhs)?;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    None
}
