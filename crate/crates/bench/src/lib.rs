//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valconf_core::corpus::Label;
use valconf_core::NUM_VALUES;

/// Non-negative profiles summing to one.
pub fn profiles(n: usize, seed: u64) -> Vec<[f64; NUM_VALUES]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: [f64; NUM_VALUES] = std::array::from_fn(|_| rng.random::<f64>());
            let s: f64 = x.iter().sum();
            x.map(|v| v / s)
        })
        .collect()
}

/// Short synthetic posts over a small vocabulary.
pub fn documents(n: usize, seed: u64) -> Vec<String> {
    const WORDS: [&str; 24] = [
        "freedom",
        "rules",
        "people",
        "tradition",
        "power",
        "help",
        "nature",
        "success",
        "fun",
        "safety",
        "think",
        "really",
        "policy",
        "vote",
        "honest",
        "change",
        "family",
        "money",
        "justice",
        "order",
        "care",
        "new",
        "faith",
        "world",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(5..25);
            (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

pub fn labels(n: usize, seed: u64) -> Vec<Label> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Label::from_index(rng.random_range(0..3)).expect("index below 3")).collect()
}
