//! Random streams and samplers shared by the simulation code.
//!
//! Every replicate owns a generator derived from `(seed, cell, replicate)`,
//! so results do not depend on how replicates are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _, Poisson};
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// How the total count behaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SampleSize {
    /// Fixed `n`; counts are multinomial.
    Multinomial,
    /// Poisson total with known rate; counts are independent Poisson.
    Poisson { lambda: f64 },
}

impl SampleSize {
    /// Size of one simulated data set: `n` itself, or a Poisson draw.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> usize {
        match *self {
            SampleSize::Multinomial => n,
            SampleSize::Poisson { lambda } => poisson(lambda, rng) as usize,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for replicate `replicate` of simulation cell `cell`.
pub fn stream(seed: u64, cell: u64, replicate: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(cell)));
    rng.set_stream(replicate);
    rng
}

/// Stable 64-bit key for a textual cell label (FNV-1a).
pub fn cell_key(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Multinomial counts via sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = left;
            break;
        }
        let c = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = Binomial::new(left, c).expect("probability in [0, 1]").sample(rng);
        counts[i] = x;
        left -= x;
        mass -= p;
    }
    counts
}

/// Independent Poisson counts with the given means.
pub fn poisson_counts<R: Rng + ?Sized>(means: &[f64], rng: &mut R) -> Vec<u64> {
    means.iter().map(|&m| poisson(m, rng)).collect()
}

/// One Poisson draw; a zero mean gives zero.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistic::{chisq_quantile, chisq_stat, StatisticKind};

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(1, 2, 3).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: u64 = stream(1, 2, 3).random();
        let y: u64 = stream(1, 2, 4).random();
        let z: u64 = stream(1, 3, 3).random();
        let w: u64 = stream(2, 2, 3).random();
        assert!(x != y && x != z && x != w);
    }

    #[test]
    fn multinomial_totals_and_means() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let mut rng = stream(7, 0, 0);
        let reps = 4000;
        let mut sums = [0u64; 4];
        for _ in 0..reps {
            let c = multinomial(100, &probs, &mut rng);
            assert_eq!(c.iter().sum::<u64>(), 100);
            for (s, x) in sums.iter_mut().zip(&c) {
                *s += x;
            }
        }
        for (s, p) in sums.iter().zip(probs) {
            let mean = *s as f64 / reps as f64;
            let se = (100.0 * p * (1.0 - p) / reps as f64).sqrt();
            assert!((mean - 100.0 * p).abs() < 4.0 * se, "{mean} vs {}", 100.0 * p);
        }
        assert_eq!(multinomial(0, &probs, &mut rng), vec![0; 4]);
    }

    fn null_q95(kind: StatisticKind, n: u64, probs: &[f64], reps: u64) -> f64 {
        let expected: Vec<f64> = probs.iter().map(|p| n as f64 * p).collect();
        let mut values: Vec<f64> = (0..reps)
            .filter_map(|r| {
                let o: Vec<f64> = multinomial(n, probs, &mut stream(11, n, r))
                    .into_iter()
                    .map(|c| c as f64)
                    .collect();
                chisq_stat(kind, &o, &expected).ok()
            })
            .collect();
        assert!(values.len() as u64 > reps * 99 / 100, "{kind}");
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values[(0.95 * values.len() as f64) as usize]
    }

    #[test]
    fn null_percentiles_match_chisq() {
        // Under multinomial sampling the 95th percentile of each statistic
        // should sit near the chi-square(k-1) critical value.
        let probs = [0.1, 0.15, 0.2, 0.25, 0.3];
        let crit = chisq_quantile(0.95, 4.0).unwrap();
        for kind in StatisticKind::ALL {
            let q95 = null_q95(kind, 1000, &probs, 5000);
            assert!((q95 / crit - 1.0).abs() < 0.05, "{kind}: {q95} vs {crit}");
        }
        // Smallest expected count 10. The Neyman form has a much heavier
        // right tail this close to the threshold and is excluded.
        for kind in StatisticKind::ALL {
            if kind == StatisticKind::NeymanModified {
                continue;
            }
            let q95 = null_q95(kind, 100, &probs, 5000);
            assert!((q95 / crit - 1.0).abs() < 0.05, "{kind}: {q95} vs {crit}");
        }
    }
}
