//! Quadrature on tetrahedra in barycentric coordinates.

use crate::Real;

/// Points are barycentric 4-tuples; weights sum to the reference volume 1/6,
/// so `|det J| * sum_q w_q f(x_q)` integrates over a physical tet.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub points: Vec<[T; 4]>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// Five-point rule exact for total degree 3: the centroid with weight
    /// `-4/5` and the four points `(1/2, 1/6, 1/6, 1/6)` (permuted) with
    /// `9/20`, relative to the tet volume. The centroid weight is negative;
    /// no five-point degree-3 rule with all weights positive is used here.
    pub fn degree3() -> Self {
        let sixth = T::c(1.0 / 6.0);
        let quarter = T::c(0.25);
        let half = T::c(0.5);
        let mut points = vec![[quarter; 4]];
        let mut weights = vec![T::c(-4.0 / 5.0) * sixth];
        for k in 0..4 {
            let mut p = [sixth; 4];
            p[k] = half;
            points.push(p);
            weights.push(T::c(9.0 / 20.0) * sixth);
        }
        Self { points, weights }
    }

    /// Single centroid point, exact for degree 1.
    pub fn centroid() -> Self {
        Self {
            points: vec![[T::c(0.25); 4]],
            weights: vec![T::c(1.0 / 6.0)],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of weights times `f` evaluated at each barycentric point.
    pub fn integrate_reference<F: FnMut(&[T; 4]) -> T>(&self, mut f: F) -> T {
        self.points.iter().zip(&self.weights).map(|(p, w)| *w * f(p)).sum()
    }
}

/// Physical point for barycentric coordinates `lam` in the tet `x`.
pub fn map_point<T: Real>(x: &[[T; 3]; 4], lam: &[T; 4]) -> [T; 3] {
    std::array::from_fn(|a| (0..4).map(|k| lam[k] * x[k][a]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Integral of `l0^a l1^b l2^c l3^d` over the reference tet.
    fn dirichlet(e: [u32; 4]) -> f64 {
        e.iter().map(|&k| factorial(k)).product::<f64>() / factorial(e.iter().sum::<u32>() + 3)
    }

    #[test]
    fn weights_sum_to_reference_volume() {
        let r = QuadratureRule::<f64>::degree3();
        assert_eq!(r.len(), 5);
        assert!((r.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-16);
        for p in &r.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cubic_barycentric_monomial() {
        let r = QuadratureRule::<f64>::degree3();
        let v = r.integrate_reference(|l| l[1].powi(3));
        assert!((v - 1.0 / 120.0).abs() < 1e-16);
    }

    #[test]
    fn exact_for_all_monomials_up_to_degree_three() {
        let r = QuadratureRule::<f64>::degree3();
        for a in 0..4u32 {
            for b in 0..4 - a {
                for c in 0..4 - a - b {
                    for d in 0..4 - a - b - c {
                        let e = [a, b, c, d];
                        let q = r.integrate_reference(|l| (0..4).map(|k| l[k].powi(e[k] as i32)).product());
                        let ex = dirichlet(e);
                        assert!((q - ex).abs() <= 1e-14 * ex, "{e:?}: {q} vs {ex}");
                    }
                }
            }
        }
    }

    #[test]
    fn degree_four_is_not_exact() {
        let r = QuadratureRule::<f64>::degree3();
        let q = r.integrate_reference(|l| l[0].powi(4));
        assert!((q - dirichlet([4, 0, 0, 0])).abs() > 1e-6);
    }
}
