//! Parser for `reactants -> products @ rate` reaction strings.
//!
//! Sides are `0` (or `∅`) or `+`-separated terms `[count] Species`, e.g.
//! `2 X1 -> 0 @ 1200` or `X1 + X2 → ∅ @ 4000`.

use super::{Reaction, MAX_PROPENSITY_DEGREE};
use crate::{Error, Real, Result};

pub fn parse_reaction<T: Real>(input: &str, species: &[String]) -> Result<Reaction<T>> {
    let err = |reason: String| Error::Parse {
        input: input.to_string(),
        reason,
    };

    let (lhs_rhs, rate) = input
        .split_once('@')
        .ok_or_else(|| err("missing `@ rate`".into()))?;
    let rate: f64 = rate
        .trim()
        .parse()
        .map_err(|e| err(format!("bad rate `{}`: {e}", rate.trim())))?;
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(err(format!("rate must be finite and non-negative, got {rate}")));
    }

    let (lhs, rhs) = lhs_rhs
        .split_once("->")
        .or_else(|| lhs_rhs.split_once('→'))
        .ok_or_else(|| err("missing `->`".into()))?;

    let reactants = parse_side(lhs, species).map_err(&err)?;
    let products = parse_side(rhs, species).map_err(&err)?;
    let order: u32 = reactants.iter().sum();
    if order > MAX_PROPENSITY_DEGREE {
        return Err(err(format!(
            "reaction order {order} exceeds the supported maximum of {MAX_PROPENSITY_DEGREE}"
        )));
    }
    Ok(Reaction::mass_action(input.trim(), &reactants, &products, T::c(rate)))
}

fn parse_side(side: &str, species: &[String]) -> std::result::Result<Vec<u32>, String> {
    let mut counts = vec![0u32; species.len()];
    let side = side.trim();
    if side == "0" || side == "∅" || side.is_empty() {
        return Ok(counts);
    }
    for term in side.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return Err("empty term".into());
        }
        let split = term
            .find(|c: char| !c.is_ascii_digit())
            .ok_or_else(|| format!("term `{term}` has no species"))?;
        let (num, name) = term.split_at(split);
        let name = name.trim_start_matches('*').trim();
        let mult: u32 = if num.is_empty() {
            1
        } else {
            num.parse().map_err(|e| format!("bad multiplicity in `{term}`: {e}"))?
        };
        let idx = species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| format!("unknown species `{name}`"))?;
        counts[idx] += mult;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp() -> Vec<String> {
        vec!["X1".into(), "X2".into(), "X3".into()]
    }

    #[test]
    fn parses_mass_action_forms() {
        let r = parse_reaction::<f64>("X1 -> 2 X1 + 2 X3 @ 5", &sp()).unwrap();
        assert_eq!(r.stoich, vec![1, 0, 2]);
        assert_eq!(r.propensity.eval(&[3.0, 0.0, 0.0]), 15.0);

        let r = parse_reaction::<f64>("2X1 → ∅ @ 1200", &sp()).unwrap();
        assert_eq!(r.stoich, vec![-2, 0, 0]);
        assert_eq!(r.propensity.eval(&[2.0, 0.0, 0.0]), 4800.0);

        let r = parse_reaction::<f64>("0 -> X1 @ 1e2", &sp()).unwrap();
        assert_eq!(r.stoich, vec![1, 0, 0]);
        assert_eq!(r.propensity.degree(), 0);
    }

    #[test]
    fn rejects_bad_input() {
        for s in [
            "X1 -> X2",
            "X1 X2 @ 1",
            "X4 -> 0 @ 1",
            "X1 -> 0 @ -1",
            "X1 + X1 + X2 -> 0 @ 1",
            "X1 -> 0 @ abc",
            "X1 + -> 0 @ 1",
        ] {
            assert!(matches!(parse_reaction::<f64>(s, &sp()), Err(Error::Parse { .. })), "{s}");
        }
    }
}
