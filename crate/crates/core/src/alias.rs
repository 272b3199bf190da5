//! Alias-method sampler: O(1) draws from an arbitrary categorical
//! distribution given as nonnegative weights.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// Precomputed alias table over `len` slots.
///
/// Slot `i` keeps an acceptance threshold `prob[i]` and a fallback index
/// `alias[i]`. A draw picks a slot uniformly, then accepts it or takes the
/// fallback, so the cost per sample is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table from nonnegative weights.
    ///
    /// Construction is deterministic: the under- and over-full worklists are
    /// seeded in ascending index order and consumed FIFO.
    pub fn build(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("alias table needs at least one weight"));
        }
        let mut total = 0.0f64;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!(
                    "weight {i} is {w}, must be finite and >= 0"
                )));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::invalid("all weights are zero"));
        }

        let n = weights.len();
        let mut scaled: Vec<f64> = weights.iter().map(|&w| w * n as f64 / total).collect();
        let mut prob = vec![1.0f64; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        vose_fill(&mut scaled, &mut prob, &mut alias);
        Ok(AliasTable { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Draws one index distributed as the normalized input weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let slot = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[slot] {
            slot
        } else {
            self.alias[slot] as usize
        }
    }

    /// Probability mass the table actually assigns to each index.
    pub fn implied_mass(&self) -> Vec<f64> {
        implied_mass(&self.prob, &self.alias)
    }
}

/// Core alias construction. `scaled[i]` must hold `w_i * n / sum(w)`; `prob`
/// starts at 1.0 and `alias` at identity. Worklists are seeded in ascending
/// index order and consumed FIFO so the layout is reproducible.
pub(crate) fn vose_fill(scaled: &mut [f64], prob: &mut [f64], alias: &mut [u32]) {
    let mut small = VecDeque::new();
    let mut large = VecDeque::new();
    for (i, &s) in scaled.iter().enumerate() {
        if s < 1.0 {
            small.push_back(i);
        } else {
            large.push_back(i);
        }
    }

    while let (Some(&s), Some(&l)) = (small.front(), large.front()) {
        small.pop_front();
        prob[s] = scaled[s];
        alias[s] = l as u32;
        scaled[l] -= 1.0 - scaled[s];
        if scaled[l] < 1.0 {
            large.pop_front();
            small.push_back(l);
        }
    }
    // Leftovers on either list are exactly full up to rounding.
    for i in small {
        prob[i] = 1.0;
    }
}

pub(crate) fn implied_mass(prob: &[f64], alias: &[u32]) -> Vec<f64> {
    let n = prob.len();
    let mut mass = vec![0.0f64; n];
    for i in 0..n {
        mass[i] += prob[i] / n as f64;
        mass[alias[i] as usize] += (1.0 - prob[i]) / n as f64;
    }
    mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn uniform_weights_never_take_alias() {
        let t = AliasTable::build(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(t.prob.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn degenerate_mass_always_hits_heavy_slot() {
        let t = AliasTable::build(&[0.0, 5.0]).unwrap();
        let mut rng = seeds::rng(11, &[0]);
        assert!((0..10_000).all(|_| t.sample(&mut rng) == 1));
    }

    #[test]
    fn all_zero_weights_rejected() {
        assert!(AliasTable::build(&[0.0, 0.0]).is_err());
        assert!(AliasTable::build(&[]).is_err());
        assert!(AliasTable::build(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        let w = [0.3, 2.0, 0.0, 1.25, 0.7];
        assert_eq!(
            AliasTable::build(&w).unwrap(),
            AliasTable::build(&w).unwrap()
        );
    }

    /// Chi-square goodness-of-fit p-value for observed counts against
    /// expected probabilities.
    pub(crate) fn chi_square_p(observed: &[u64], expected_probs: &[f64]) -> f64 {
        let total: u64 = observed.iter().sum();
        let mut stat = 0.0f64;
        let mut dof = 0usize;
        for (&o, &p) in observed.iter().zip(expected_probs) {
            let e = p * total as f64;
            if e > 0.0 {
                stat += (o as f64 - e).powi(2) / e;
                dof += 1;
            } else {
                assert_eq!(o, 0, "draws landed on a zero-probability slot");
            }
        }
        assert!(dof > 1);
        let chi = ChiSquared::new((dof - 1) as f64).unwrap();
        1.0 - chi.cdf(stat)
    }

    #[test]
    fn three_to_one_frequencies_fit() {
        let weights = [3.0, 1.0];
        let t = AliasTable::build(&weights).unwrap();
        let mut rng = seeds::rng(42, &[1]);
        let mut counts = [0u64; 2];
        for _ in 0..1_000_000 {
            counts[t.sample(&mut rng)] += 1;
        }
        let p = chi_square_p(&counts, &[0.75, 0.25]);
        assert!(p > 0.01, "chi-square p = {p}, counts = {counts:?}");
    }

    proptest! {
        #[test]
        fn implied_mass_matches_normalized_weights(
            weights in proptest::collection::vec(0.0f64..100.0, 1..=32),
            heavy_idx in any::<prop::sample::Index>(),
        ) {
            let mut weights = weights;
            let idx = heavy_idx.index(weights.len());
            weights[idx] += 1.0; // guarantee one positive weight
            let total: f64 = weights.iter().sum();
            let t = AliasTable::build(&weights).unwrap();
            let mass = t.implied_mass();
            prop_assert!((mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (m, w) in mass.iter().zip(&weights) {
                prop_assert!((m - w / total).abs() < 1e-9, "mass {m} vs weight {}", w / total);
            }
        }
    }
}
