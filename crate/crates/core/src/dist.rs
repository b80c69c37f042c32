//! Categorical distributions over finite ordered supports.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for a probability vector to count as normalized.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// A distribution over an ordered, finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical<T> {
    support: Vec<T>,
    probs: Vec<f64>,
}

impl<T> Categorical<T> {
    /// Builds a distribution from already-normalized probabilities.
    pub fn new(support: Vec<T>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::SupportMismatch);
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig("negative or non-finite probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self { support, probs })
    }

    /// Builds a distribution proportional to nonnegative `weights`.
    pub fn from_weights(support: Vec<T>, weights: &[f64]) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::SupportMismatch);
        }
        Ok(Self {
            support,
            probs: normalize(weights)?,
        })
    }

    pub fn point(outcome: T) -> Self {
        Self {
            support: vec![outcome],
            probs: vec![1.0],
        }
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.support.iter().zip(self.probs.iter().copied())
    }

    /// Index drawn by inverse CDF over the support order.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &T {
        &self.support[self.sample_index(rng)]
    }
}

impl<T: PartialEq> Categorical<T> {
    pub fn prob_of(&self, outcome: &T) -> f64 {
        self.support
            .iter()
            .position(|s| s == outcome)
            .map_or(0.0, |i| self.probs[i])
    }
}

/// Scales nonnegative weights to sum to one.
pub fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Inverse-CDF draw over `probs` in order. Trailing rounding mass goes to the
/// last outcome with positive probability.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
            cum += p;
            if u < cum {
                return i;
            }
        }
    }
    last_positive
}

/// Half the L1 distance between two distributions on the same ordered support,
/// which equals the largest gap `|p(E) - q(E)|` over events `E`.
pub fn k_step_variation_distance<T: PartialEq>(
    p: &Categorical<T>,
    q: &Categorical<T>,
) -> Result<f64> {
    if p.support != q.support {
        return Err(Error::SupportMismatch);
    }
    let l1: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngStreams, Stream};
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize(&[1.0]).unwrap(), vec![1.0]);
        let n = normalize(&[0.6 * 0.5, 0.4 * 0.5]).unwrap();
        assert!((n[0] - 0.6).abs() < 1e-12 && (n[1] - 0.4).abs() < 1e-12);
        assert_eq!(normalize(&[0.0, 0.0]), Err(Error::AllZeroWeights));
    }

    #[test]
    fn point_mass_ignores_seed() {
        let d = Categorical::point("x");
        for seed in 0..50 {
            let mut rng = RngStreams::new(seed).stream(Stream::Agent);
            assert_eq!(*d.sample(&mut rng), "x");
        }
    }

    #[test]
    fn zero_prob_outcomes_never_drawn() {
        let d = Categorical::new(vec![0, 1, 2], vec![0.0, 1.0, 0.0]).unwrap();
        let mut rng = RngStreams::new(3).stream(Stream::Agent);
        for _ in 0..1000 {
            assert_eq!(*d.sample(&mut rng), 1);
        }
    }

    #[test]
    fn uniform_frequency_matches() {
        let d = Categorical::new(vec!['a', 'b'], vec![0.5, 0.5]).unwrap();
        let mut rng = RngStreams::new(11).stream(Stream::Env);
        let n = 100_000;
        let a = (0..n).filter(|_| *d.sample(&mut rng) == 'a').count();
        let f = a as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn same_seed_same_outcome() {
        let d = Categorical::new(vec![0, 1, 2, 3], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let draw = |s| *d.sample(&mut RngStreams::new(s).stream(Stream::Mentor));
        for s in 0..20 {
            assert_eq!(draw(s), draw(s));
        }
    }

    /// Largest event gap by enumerating all subsets of the support.
    fn max_event_gap(p: &[f64], q: &[f64]) -> f64 {
        let n = p.len();
        (0u32..(1 << n))
            .map(|mask| {
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..n {
                    if mask & (1 << i) != 0 {
                        a += p[i];
                        b += q[i];
                    }
                }
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn variation_distance_examples() {
        let p = Categorical::new(vec![0, 1], vec![0.7, 0.3]).unwrap();
        let q = Categorical::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        let oracle = max_event_gap(&[0.7, 0.3], &[0.5, 0.5]);
        assert!((oracle - 0.2).abs() < 1e-12);
        assert!((k_step_variation_distance(&p, &q).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(k_step_variation_distance(&p, &p).unwrap(), 0.0);
        let x = Categorical::new(vec![0, 1], vec![1.0, 0.0]).unwrap();
        let y = Categorical::new(vec![0, 1], vec![0.0, 1.0]).unwrap();
        assert_eq!(k_step_variation_distance(&x, &y).unwrap(), 1.0);
        let other = Categorical::new(vec![0, 2], vec![0.5, 0.5]).unwrap();
        assert_eq!(
            k_step_variation_distance(&p, &other),
            Err(Error::SupportMismatch)
        );
    }

    fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n)
            .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-6)
            .prop_map(|w| normalize(&w).unwrap())
    }

    proptest! {
        #[test]
        fn variation_distance_is_a_metric(p in dist(5), q in dist(5), r in dist(5)) {
            let s: Vec<usize> = (0..5).collect();
            let p = Categorical::new(s.clone(), p).unwrap();
            let q = Categorical::new(s.clone(), q).unwrap();
            let r = Categorical::new(s, r).unwrap();
            let pq = k_step_variation_distance(&p, &q).unwrap();
            let qp = k_step_variation_distance(&q, &p).unwrap();
            let pr = k_step_variation_distance(&p, &r).unwrap();
            let rq = k_step_variation_distance(&r, &q).unwrap();
            prop_assert!(pq >= 0.0);
            prop_assert!((pq - qp).abs() < 1e-15);
            prop_assert!(pq <= pr + rq + 1e-12);
            prop_assert!((pq - max_event_gap(p.probs(), q.probs())).abs() < 1e-12);
        }

        #[test]
        fn normalized_sums_to_one(w in prop::collection::vec(0.0f64..10.0, 1..20)) {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            let n = normalize(&w).unwrap();
            prop_assert!((n.iter().sum::<f64>() - 1.0).abs() <= PROB_TOLERANCE);
        }
    }
}
