//! Diffusion and drift fields evaluated at physical points.

use crate::network::ReactionNetwork;
use crate::Real;

pub trait CoefficientField<T>: Sync {
    /// `(D(x), v(x))` with `D` given by rows.
    fn eval(&self, x: &[T; 3]) -> ([[T; 3]; 3], [T; 3]);
}

impl<T: Real> CoefficientField<T> for ReactionNetwork<T> {
    fn eval(&self, x: &[T; 3]) -> ([[T; 3]; 3], [T; 3]) {
        self.coefficients3(x)
    }
}

/// Spatially constant coefficients, e.g. `D = I, v = 0` for checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField<T> {
    pub diffusion: [[T; 3]; 3],
    pub drift: [T; 3],
}

impl<T: Real> ConstantField<T> {
    pub fn pure_diffusion() -> Self {
        let mut d = [[T::zero(); 3]; 3];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Self {
            diffusion: d,
            drift: [T::zero(); 3],
        }
    }
}

impl<T: Real> CoefficientField<T> for ConstantField<T> {
    fn eval(&self, _x: &[T; 3]) -> ([[T; 3]; 3], [T; 3]) {
        (self.diffusion, self.drift)
    }
}

/// The network's diffusion with the drift replaced by zero.
#[derive(Debug, Clone, Copy)]
pub struct WithoutDrift<'a, F>(pub &'a F);

impl<T: Real, F: CoefficientField<T>> CoefficientField<T> for WithoutDrift<'_, F> {
    fn eval(&self, x: &[T; 3]) -> ([[T; 3]; 3], [T; 3]) {
        (self.0.eval(x).0, [T::zero(); 3])
    }
}
