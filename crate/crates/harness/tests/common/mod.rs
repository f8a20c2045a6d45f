#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcfuse::dataset::{write_uci_har, Dataset, HarVariant, LabeledSample, HAR_ACTIVITY_NAMES};

/// Six well-separated classes of noisy sinusoids, one per activity label.
pub fn surrogate_split(per_class: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for _ in 0..per_class {
        for c in 0..6 {
            let phase: f64 = rng.gen_range(-0.3..0.3);
            let features = (0..dim)
                .map(|t| {
                    let t = t as f64 / dim as f64;
                    (std::f64::consts::TAU * (c + 1) as f64 * t + phase).sin() + 0.5 + rng.gen_range(-0.2..0.2)
                })
                .collect();
            samples.push(LabeledSample::new(features, c));
        }
    }
    Dataset::new(samples, HAR_ACTIVITY_NAMES.iter().map(|s| s.to_string()).collect()).unwrap()
}

/// Writes a small dataset in the UCI HAR directory layout.
pub fn write_surrogate(root: &Path, variant: HarVariant) {
    let dim = variant.dim();
    let train = surrogate_split(12, dim, 1);
    let test = surrogate_split(5, dim, 2);
    write_uci_har(root, &train, &test, variant).unwrap();
}
