//! The pinned benchmark: four classes of two Gaussian subclusters
//! each in 16 dimensions, 35% uniform label noise, 4000 training and 1000
//! test samples.

use crate::correction::Voting;
use crate::dataset::{generate_synthetic, inject_noise, NoiseModel, NoisyDataset, SyntheticSpec};
use crate::error::Result;
use crate::model::{Architecture, OptimConfig};
use crate::prototypes::SelectorConfig;
use crate::selftrain::TrainConfig;

pub const NOISE_RATE: f64 = 0.35;
pub const NOISE_SEED: u64 = 101;
pub const SPLIT_SEED: u64 = 201;
pub const TEST_FRACTION: f64 = 0.2;

pub fn synthetic_spec() -> SyntheticSpec {
    SyntheticSpec {
        classes: 4,
        subclusters_per_class: 2,
        dim: 16,
        samples_per_class: 1250,
        subcluster_spread: 0.8,
        center_separation: 3.0,
        seed: 1,
    }
}

pub fn noise_model() -> NoiseModel {
    NoiseModel::uniform(NOISE_RATE, NOISE_SEED)
}

/// Noisy dataset before the train/test split.
pub fn dataset() -> Result<NoisyDataset> {
    inject_noise(&generate_synthetic(&synthetic_spec())?, &noise_model())
}

/// `(train, test)`.
pub fn split() -> Result<(NoisyDataset, NoisyDataset)> {
    dataset()?.split(TEST_FRACTION, SPLIT_SEED)
}

/// Five warmup epochs, then fifteen correction epochs with p = 4, m = 128 and
/// α = 0.5. The learning rate stays constant over the 20 epochs.
pub fn train_config() -> TrainConfig {
    TrainConfig {
        num_epochs: 20,
        start_epoch: 6,
        alpha: 0.5,
        batch_size: 128,
        selector: SelectorConfig::new(128, 4),
        optim: OptimConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 5e-3,
            decay_factor: 10.0,
            decay_period: 20,
        },
        architecture: Architecture::OneHidden { hidden: 256 },
        seed: 7,
        restrict_to_verified: false,
        test_fraction: TEST_FRACTION,
        voting: Voting::Mean,
    }
}
