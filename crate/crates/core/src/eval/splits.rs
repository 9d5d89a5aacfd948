//! Seeded 6:2:2 train/validation/test split plans.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of independent splits in the standard protocol.
pub const PROTOCOL_SPLITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub partitions: Vec<Partition>,
}

/// Builds [`PROTOCOL_SPLITS`] independent shuffled partitions with sizes
/// 6:2:2; validation and test each get `floor(n/5)` ids, the remainder
/// goes to training.
pub fn make_splits(ids: &[String], seed: u64) -> Result<SplitPlan> {
    let n = ids.len();
    if n < 5 {
        return Err(Error::Eval(format!("need at least 5 ids to split, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_val = n / 5;
    let n_test = n / 5;
    let n_train = n - n_val - n_test;
    let partitions = (0..PROTOCOL_SPLITS)
        .map(|_| {
            let mut shuffled = ids.to_vec();
            shuffled.shuffle(&mut rng);
            let train = shuffled[..n_train].to_vec();
            let val = shuffled[n_train..n_train + n_val].to_vec();
            let test = shuffled[n_train + n_val..].to_vec();
            Partition { train, val, test }
        })
        .collect();
    Ok(SplitPlan { seed, partitions })
}
