use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Indices of the training and validation interactions.
///
/// `floor(n * fraction)` interactions are drawn for validation by a seeded
/// shuffle; both halves keep the original order.
pub fn split_validation(num_interactions: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(fraction > 0.0 && fraction < 1.0, "validation fraction must be in (0, 1)");
    let count = (num_interactions as f64 * fraction).floor() as usize;
    let mut order: Vec<usize> = (0..num_interactions).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut validation = order[..count].to_vec();
    validation.sort_unstable();
    let mut is_val = vec![false; num_interactions];
    for &v in &validation {
        is_val[v] = true;
    }
    let train = (0..num_interactions).filter(|i| !is_val[*i]).collect();
    (train, validation)
}
