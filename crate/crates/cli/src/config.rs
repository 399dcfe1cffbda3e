//! JSON config files. Relative paths inside a config resolve against the
//! config file's directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smp_core::dataset::{read_csv, read_dataset, NoiseModel, NoisyDataset, SyntheticSpec};
use smp_core::evalreport::SweepSpec;
use smp_core::selftrain::TrainConfig;

use crate::failure::{CliResult, Code, Failure, OrCode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataConfig {
    pub synthetic: SyntheticSpec,
    pub noise: NoiseModel,
    /// Share of samples to mark verified, drawn with the noise seed.
    #[serde(default)]
    pub verified_fraction: Option<f64>,
}

/// Where training data comes from. Without `test`, `train` is split with the
/// run's `test_fraction` and `split_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFileConfig {
    pub data: DataConfig,
    pub sweep: SweepSpec,
}

/// A parsed config with the bytes it was parsed from.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub path: PathBuf,
    pub digest: String,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new("")).join(p)
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<Loaded<T>> {
    let bytes = std::fs::read(path)
        .or_code(Code::Config)
        .map_err(|f| f.context(format!("reading config {}", path.display())))?;
    let value = serde_json::from_slice(&bytes)
        .or_code(Code::Config)
        .map_err(|f| f.context(format!("parsing config {}", path.display())))?;
    Ok(Loaded {
        value,
        path: path.to_path_buf(),
        digest: digest(&bytes),
    })
}

/// Reads a dataset, picking the format from the extension.
pub fn read_data(path: &Path) -> CliResult<NoisyDataset> {
    let ds = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path, None)
    } else {
        read_dataset(path)
    };
    ds.or_code(Code::Data)
        .map_err(|f| f.context(format!("reading dataset {}", path.display())))
}

/// Train and test sets for a run.
pub fn load_split<T>(
    cfg: &Loaded<T>,
    data: &DataConfig,
    test_fraction: f64,
) -> CliResult<(NoisyDataset, NoisyDataset)> {
    let train = read_data(&cfg.resolve(&data.train))?;
    match &data.test {
        Some(p) => Ok((train, read_data(&cfg.resolve(p))?)),
        None => {
            if test_fraction <= 0.0 {
                return Err(Failure::config(
                    "test_fraction: must be positive when data.test is not set",
                ));
            }
            Ok(train.split(test_fraction, data.split_seed)?)
        }
    }
}
