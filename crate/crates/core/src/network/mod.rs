//! Chemical reaction networks with polynomial mass-action propensities, and the
//! Fokker-Planck coefficient fields derived from them.
//!
//! For reactions `k = 1..M` with stoichiometric vectors `nu_k` and propensities
//! `alpha_k(x)` the diffusion and drift fields are
//!
//! ```text
//! d_ij(x) = 1/2 sum_k nu_ki nu_kj alpha_k(x)
//! v_i(x)  = sum_k nu_ki alpha_k(x) - sum_j d/dx_j d_ij(x)
//! ```
//!
//! Both are kept as polynomials so the divergence term is differentiated
//! exactly.

mod parse;
mod polynomial;
mod steady;

pub use parse::parse_reaction;
pub use polynomial::Polynomial;
pub use steady::{mean_field_steady_states, NewtonOptions};

use crate::{Error, Real, Result};

/// Highest total degree a propensity may have.
pub const MAX_PROPENSITY_DEGREE: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction<T> {
    pub label: String,
    pub stoich: Vec<i64>,
    pub propensity: Polynomial<T>,
}

impl<T: Real> Reaction<T> {
    pub fn new(label: impl Into<String>, stoich: Vec<i64>, propensity: Polynomial<T>) -> Self {
        Self {
            label: label.into(),
            stoich,
            propensity,
        }
    }

    /// Mass-action reaction `sum r_i X_i -> sum p_i X_i` with propensity
    /// `rate * prod x_i^{r_i}`.
    pub fn mass_action(label: impl Into<String>, reactants: &[u32], products: &[u32], rate: T) -> Self {
        assert_eq!(reactants.len(), products.len());
        let stoich = reactants
            .iter()
            .zip(products)
            .map(|(&r, &p)| p as i64 - r as i64)
            .collect();
        Self::new(label, stoich, Polynomial::monomial(rate, reactants.to_vec()))
    }
}

/// A validated reaction network. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ReactionNetwork<T> {
    species: Vec<String>,
    reactions: Vec<Reaction<T>>,
    diffusion: Vec<Polynomial<T>>,
    drift: Vec<Polynomial<T>>,
    drift_jacobian: Vec<Polynomial<T>>,
}

impl<T: Real> ReactionNetwork<T> {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction<T>>) -> Result<Self> {
        let n = species.len();
        if n == 0 {
            return Err(Error::Model("network has no species".into()));
        }
        if reactions.is_empty() {
            return Err(Error::Model("network has no reactions".into()));
        }
        for (k, r) in reactions.iter().enumerate() {
            if r.stoich.len() != n {
                return Err(Error::Model(format!(
                    "reaction {k} (`{}`): stoichiometric vector has length {}, expected {n}",
                    r.label,
                    r.stoich.len()
                )));
            }
            if r.propensity.n_vars() != n {
                return Err(Error::Model(format!(
                    "reaction {k} (`{}`): propensity is over {} variables, expected {n}",
                    r.label,
                    r.propensity.n_vars()
                )));
            }
            if !r.propensity.has_nonnegative_coefficients() {
                return Err(Error::Model(format!(
                    "reaction {k} (`{}`): propensity has a negative coefficient",
                    r.label
                )));
            }
            if r.propensity.degree() > MAX_PROPENSITY_DEGREE {
                return Err(Error::Model(format!(
                    "reaction {k} (`{}`): propensity degree {} exceeds {MAX_PROPENSITY_DEGREE}",
                    r.label,
                    r.propensity.degree()
                )));
            }
        }

        let half = T::c(0.5);
        let mut diffusion = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                diffusion.push(Polynomial::linear_combination(
                    n,
                    reactions
                        .iter()
                        .map(|r| (half * T::c((r.stoich[i] * r.stoich[j]) as f64), &r.propensity)),
                ));
            }
        }
        let mut drift = Vec::with_capacity(n);
        for i in 0..n {
            let mean = Polynomial::linear_combination(
                n,
                reactions.iter().map(|r| (T::c(r.stoich[i] as f64), &r.propensity)),
            );
            let div = (0..n).fold(Polynomial::zero(n), |acc, j| acc.add(&diffusion[i * n + j].partial(j)));
            drift.push(mean.add(&div.scale(-T::one())));
        }
        let drift_jacobian = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| drift[i].partial(j))
            .collect();

        Ok(Self {
            species,
            reactions,
            diffusion,
            drift,
            drift_jacobian,
        })
    }

    /// Parses `reactants -> products @ rate` lines against the given species names.
    pub fn from_strings<S: AsRef<str>>(species: Vec<String>, reactions: &[S]) -> Result<Self> {
        let parsed = reactions
            .iter()
            .map(|s| parse_reaction(s.as_ref(), &species))
            .collect::<Result<Vec<_>>>()?;
        Self::new(species, parsed)
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction<T>] {
        &self.reactions
    }

    pub fn diffusion_polynomial(&self, i: usize, j: usize) -> &Polynomial<T> {
        &self.diffusion[i * self.n_species() + j]
    }

    pub fn drift_polynomial(&self, i: usize) -> &Polynomial<T> {
        &self.drift[i]
    }

    /// Solver paths (mesh, assembly) are three-dimensional.
    pub fn ensure_three_species(&self) -> Result<()> {
        if self.n_species() != 3 {
            return Err(Error::Model(format!(
                "the Fokker-Planck solver needs exactly 3 species, network has {}",
                self.n_species()
            )));
        }
        Ok(())
    }

    /// Propensity vector `alpha(x)`.
    pub fn propensities(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        let mut out = vec![T::zero(); self.n_reactions()];
        self.propensities_into(x, &mut out);
        if let Some(k) = out.iter().position(|a| *a < T::zero() || a.is_nan()) {
            return Err(Error::Model(format!(
                "propensity of reaction {k} (`{}`) is {} at x = {:?}",
                self.reactions[k].label, out[k], x
            )));
        }
        Ok(out)
    }

    /// Unchecked propensity evaluation for hot loops.
    #[inline]
    pub fn propensities_into(&self, x: &[T], out: &mut [T]) {
        for (o, r) in out.iter_mut().zip(&self.reactions) {
            *o = r.propensity.eval(x);
        }
    }

    /// Diffusion matrix `D(x)`, row-major `n x n`.
    pub fn diffusion_matrix(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        Ok(self.diffusion.iter().map(|p| p.eval(x)).collect())
    }

    /// Drift vector `v(x)` including the divergence correction.
    pub fn drift_vector(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        Ok(self.drift.iter().map(|p| p.eval(x)).collect())
    }

    /// Jacobian of the drift, row-major.
    pub fn drift_jacobian(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        Ok(self.drift_jacobian.iter().map(|p| p.eval(x)).collect())
    }

    /// Fixed-size evaluation used by the finite element assembly.
    #[inline]
    pub fn coefficients3(&self, x: &[T; 3]) -> ([[T; 3]; 3], [T; 3]) {
        debug_assert_eq!(self.n_species(), 3);
        let mut d = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let v = self.diffusion[i * 3 + j].eval(x);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        let v = [self.drift[0].eval(x), self.drift[1].eval(x), self.drift[2].eval(x)];
        (d, v)
    }

    fn check_len(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n_species() {
            return Err(Error::DimensionMismatch {
                expected: self.n_species(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// The linear five-reaction test system
/// `0 -> X1 (k1V)`, `X1 <-> X2 (k2, k3)`, `X2 -> X3 (k4)`, `X3 -> 0 (k5)`.
pub fn linear_test_network<T: Real>(k1v: f64, k2: f64, k3: f64, k4: f64, k5: f64) -> ReactionNetwork<T> {
    let species = vec!["X1".to_string(), "X2".to_string(), "X3".to_string()];
    let r = |label: &str, reac: [u32; 3], prod: [u32; 3], k: f64| Reaction::mass_action(label, &reac, &prod, T::c(k));
    ReactionNetwork::new(
        species,
        vec![
            r("0 -> X1", [0, 0, 0], [1, 0, 0], k1v),
            r("X1 -> X2", [1, 0, 0], [0, 1, 0], k2),
            r("X2 -> X1", [0, 1, 0], [1, 0, 0], k3),
            r("X2 -> X3", [0, 1, 0], [0, 0, 1], k4),
            r("X3 -> 0", [0, 0, 1], [0, 0, 0], k5),
        ],
    )
    .expect("linear test network is well formed")
}

/// The Oregonator written as six mass-action reactions, with the `k_c` channel
/// split into two halves. Rates are on the concentration scale; the two
/// bimolecular channels are divided by the system size `volume` so that copy
/// numbers are `volume` times concentrations (`volume = 1` keeps them as given).
pub fn oregonator_network<T: Real>(k1: f64, k2: f64, k3: f64, k4: f64, kc: f64, volume: f64) -> ReactionNetwork<T> {
    let species = vec!["X1".to_string(), "X2".to_string(), "X3".to_string()];
    let r = |label: &str, reac: [u32; 3], prod: [u32; 3], k: f64| Reaction::mass_action(label, &reac, &prod, T::c(k));
    ReactionNetwork::new(
        species,
        vec![
            r("X2 -> X1", [0, 1, 0], [1, 0, 0], k1),
            r("X1 + X2 -> 0", [1, 1, 0], [0, 0, 0], k2 / volume),
            r("X1 -> 2 X1 + 2 X3", [1, 0, 0], [2, 0, 2], k3),
            r("2 X1 -> 0", [2, 0, 0], [0, 0, 0], k4 / volume),
            r("X3 -> 0", [0, 0, 1], [0, 0, 0], kc / 2.0),
            r("X3 -> X2", [0, 0, 1], [0, 1, 0], kc / 2.0),
        ],
    )
    .expect("oregonator network is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> ReactionNetwork<f64> {
        linear_test_network(100.0, 5.0, 5.0, 1.0, 1.0)
    }

    #[test]
    fn linear_propensities_at_reference_state() {
        let a = linear().propensities(&[120.0, 100.0, 100.0]).unwrap();
        assert_eq!(a, vec![100.0, 600.0, 500.0, 100.0, 100.0]);
    }

    #[test]
    fn zero_state_without_constant_terms() {
        let net = ReactionNetwork::<f64>::from_strings(
            vec!["A".into(), "B".into(), "C".into()],
            &["A -> B @ 2", "B + C -> 0 @ 3"],
        )
        .unwrap();
        assert_eq!(net.propensities(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_birth_propensity_and_diffusion() {
        let net = ReactionNetwork::<f64>::from_strings(vec!["X".into()], &["0 -> X @ 7"]).unwrap();
        for x in [0.0, 3.0, 1e4] {
            assert_eq!(net.propensities(&[x]).unwrap(), vec![7.0]);
            assert_eq!(net.diffusion_matrix(&[x]).unwrap(), vec![3.5]);
            assert_eq!(net.drift_vector(&[x]).unwrap(), vec![7.0]);
        }
    }

    #[test]
    fn linear_diffusion_entry() {
        let d = linear().diffusion_matrix(&[120.0, 100.0, 100.0]).unwrap();
        assert_eq!(d[4], 600.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[i * 3 + j], d[j * 3 + i]);
            }
        }
    }

    #[test]
    fn linear_drift_has_divergence_correction() {
        let net = linear();
        for x in [[120.0, 100.0, 100.0], [3.0, 17.0, 250.0], [0.0, 0.0, 0.0]] {
            let v = net.drift_vector(&x).unwrap();
            assert!((v[0] - (100.0 - 5.0 * x[0] + 5.0 * x[1])).abs() < 1e-12);
            assert!((v[1] - (5.0 * x[0] - 6.0 * x[1] - 0.5)).abs() < 1e-12);
            assert!((v[2] - (x[1] - x[2])).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_malformed_networks() {
        let bad_len = Reaction::new("x", vec![1, 0], Polynomial::<f64>::constant(3, 1.0));
        assert!(matches!(
            ReactionNetwork::new(vec!["a".into(), "b".into(), "c".into()], vec![bad_len]),
            Err(Error::Model(_))
        ));
        let neg = Reaction::new("x", vec![1, 0, 0], Polynomial::<f64>::constant(3, -1.0));
        assert!(ReactionNetwork::new(vec!["a".into(), "b".into(), "c".into()], vec![neg]).is_err());
        let cubic = Reaction::new("x", vec![-1, 0, 0], Polynomial::<f64>::monomial(1.0, vec![3, 0, 0]));
        assert!(ReactionNetwork::new(vec!["a".into(), "b".into(), "c".into()], vec![cubic]).is_err());
    }

    #[test]
    fn propensities_check_dimension() {
        assert!(matches!(
            linear().propensities(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn oregonator_mean_field_matches_rate_equations() {
        let (k1, k2, k3, k4, kc) = (0.3, 4000.0, 5.0, 1200.0, 0.02);
        let net = oregonator_network::<f64>(k1, k2, k3, k4, kc, 1.0);
        let x = [47.0, 211.0, 2.4e4];
        let a = net.propensities(&x).unwrap();
        let mut mean = [0.0; 3];
        for (r, ak) in net.reactions().iter().zip(&a) {
            for i in 0..3 {
                mean[i] += r.stoich[i] as f64 * ak;
            }
        }
        let expect = [
            k1 * x[1] - k2 * x[0] * x[1] + k3 * x[0] - 2.0 * k4 * x[0] * x[0],
            -k1 * x[1] - k2 * x[0] * x[1] + 0.5 * kc * x[2],
            2.0 * k3 * x[0] - kc * x[2],
        ];
        for i in 0..3 {
            assert!((mean[i] - expect[i]).abs() <= 1e-9 * expect[i].abs().max(1.0));
        }
    }

    #[test]
    fn oregonator_volume_scales_bimolecular_channels() {
        let net = oregonator_network::<f64>(0.3, 4000.0, 5.0, 1200.0, 0.02, 1e5);
        let a = net.propensities(&[10.0, 20.0, 30.0]).unwrap();
        assert!((a[1] - 0.04 * 200.0).abs() < 1e-12);
        assert!((a[3] - 0.012 * 100.0).abs() < 1e-12);
        assert!((a[2] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let net = linear_test_network::<f32>(100.0, 5.0, 5.0, 1.0, 1.0);
        let v = net.drift_vector(&[120.0, 100.0, 100.0]).unwrap();
        assert!((v[1] - (600.0 - 600.0 - 0.5)).abs() < 1e-4);
    }
}
