//! Sparse multivariate polynomials with exact partial differentiation.

use std::collections::BTreeMap;

use crate::Real;

/// A polynomial in `n_vars` variables stored as a sorted list of monomials.
///
/// Like terms are always merged and zero coefficients dropped, so two equal
/// polynomials have identical term lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    n_vars: usize,
    terms: Vec<(T, Vec<u32>)>,
}

impl<T: Real> Polynomial<T> {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            terms: Vec::new(),
        }
    }

    pub fn constant(n_vars: usize, c: T) -> Self {
        Self::from_terms(n_vars, vec![(c, vec![0; n_vars])])
    }

    pub fn monomial(coefficient: T, exponents: Vec<u32>) -> Self {
        let n = exponents.len();
        Self::from_terms(n, vec![(coefficient, exponents)])
    }

    /// Builds a polynomial from raw terms, merging duplicates.
    ///
    /// Panics if an exponent vector does not have length `n_vars`.
    pub fn from_terms(n_vars: usize, terms: Vec<(T, Vec<u32>)>) -> Self {
        let mut merged: BTreeMap<Vec<u32>, T> = BTreeMap::new();
        for (c, e) in terms {
            assert_eq!(e.len(), n_vars, "exponent vector length");
            *merged.entry(e).or_insert_with(T::zero) += c;
        }
        Self {
            n_vars,
            terms: merged
                .into_iter()
                .filter(|(_, c)| *c != T::zero())
                .map(|(e, c)| (c, e))
                .collect(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> &[(T, Vec<u32>)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn has_nonnegative_coefficients(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c >= T::zero())
    }

    pub fn eval(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.n_vars);
        let mut acc = T::zero();
        for (c, e) in &self.terms {
            let mut m = *c;
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    m *= *xi;
                }
            }
            acc += m;
        }
        acc
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Self {
        assert!(var < self.n_vars);
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[var] > 0)
            .map(|(c, e)| {
                let mut e = e.clone();
                let k = e[var];
                e[var] -= 1;
                (*c * T::c(k as f64), e)
            })
            .collect();
        Self::from_terms(self.n_vars, terms)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_terms(
            self.n_vars,
            self.terms.iter().map(|(c, e)| (*c * s, e.clone())).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n_vars, other.n_vars);
        Self::from_terms(
            self.n_vars,
            self.terms.iter().chain(&other.terms).cloned().collect(),
        )
    }

    /// Sum of `weights[k] * polys[k]`.
    pub fn linear_combination<'a>(
        n_vars: usize,
        items: impl IntoIterator<Item = (T, &'a Self)>,
    ) -> Self {
        let mut terms = Vec::new();
        for (w, p) in items {
            assert_eq!(p.n_vars, n_vars);
            terms.extend(p.terms.iter().map(|(c, e)| (*c * w, e.clone())));
        }
        Self::from_terms(n_vars, terms)
    }
}
