use rand::Rng;

use crate::pairs::TrainingPair;

/// Negative-sampling distribution: `P(id) ∝ freq(id)^power` over ids that
/// occur as a context at least once.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    ids: Vec<u32>,
    cumulative: Vec<f64>,
}

impl NoiseTable {
    /// `None` when every count is zero.
    pub fn from_counts(counts: &[u64], power: f64) -> Option<Self> {
        let mut ids = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (id, &c) in counts.iter().enumerate() {
            if c > 0 {
                acc += (c as f64).powf(power);
                ids.push(id as u32);
                cumulative.push(acc);
            }
        }
        if ids.is_empty() {
            return None;
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Some(NoiseTable { ids, cumulative })
    }

    pub fn from_pairs(n_places: usize, pairs: &[TrainingPair], power: f64) -> Option<Self> {
        let mut counts = vec![0u64; n_places];
        for p in pairs {
            counts[p.context.index()] += 1;
        }
        Self::from_counts(&counts, power)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let k = self.cumulative.partition_point(|&c| c <= u).min(self.ids.len() - 1);
        self.ids[k] as usize
    }

    pub fn support(&self) -> &[u32] {
        &self.ids
    }

    pub fn probability(&self, id: usize) -> f64 {
        match self.ids.binary_search(&(id as u32)) {
            Ok(k) => self.cumulative[k] - if k == 0 { 0.0 } else { self.cumulative[k - 1] },
            Err(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probabilities_follow_power() {
        let t = NoiseTable::from_counts(&[16, 0, 1], 0.75).unwrap();
        assert_eq!(t.support(), &[0, 2]);
        let total: f64 = t.support().iter().map(|&i| t.probability(i as usize)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((t.probability(0) - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(t.probability(1), 0.0);
    }

    #[test]
    fn empirical_frequencies() {
        let t = NoiseTable::from_counts(&[1, 3, 0, 6], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut hits = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            hits[t.sample(&mut rng)] += 1;
        }
        assert_eq!(hits[2], 0);
        for (id, p) in [(0, 0.1), (1, 0.3), (3, 0.6)] {
            let f = hits[id] as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 4.0 * sd, "id {id}: {f} vs {p}");
        }
    }

    #[test]
    fn all_zero_is_none() {
        assert!(NoiseTable::from_counts(&[0, 0], 0.75).is_none());
    }
}
