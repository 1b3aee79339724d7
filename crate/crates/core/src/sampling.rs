//! Seeded, partition-independent sampling from a finite distribution.
//!
//! Draws are grouped in fixed-size chunks; chunk `k` uses ChaCha stream `k`
//! of the run seed. Counts therefore do not depend on how many worker
//! threads process the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

pub(crate) const CHUNK: u64 = 1 << 16;

/// Counts of `n` draws of category indices from `probs` (which must sum to 1
/// within 1e-9). Returns one count per category.
pub(crate) fn sample_counts(probs: &[f64], n: u64, seed: u64) -> Result<Vec<u64>> {
    if probs.is_empty() {
        return Err(Error::InvalidInput("empty distribution".into()));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidInput("negative or non-finite weight".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p / total;
        cumulative.push(acc);
    }
    // zero-weight trailing categories must never be selected
    let last_positive = probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);

    let chunks = n.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let draws = CHUNK.min(n - k * CHUNK);
            let mut counts = vec![0u64; probs.len()];
            for _ in 0..draws {
                let u: f64 = rng.gen();
                let idx = cumulative.partition_point(|c| *c <= u).min(last_positive);
                counts[idx] += 1;
            }
            counts
        })
        .collect();

    let mut counts = vec![0u64; probs.len()];
    for chunk in per_chunk {
        for (c, x) in counts.iter_mut().zip(chunk) {
            *c += x;
        }
    }
    Ok(counts)
}
