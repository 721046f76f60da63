//! Run configuration: defaults, key=value config files, and the
//! machine-parsable error classes behind the exit codes.

use growthcast_core::convlstm::{ModelConfig, OutputGatePeephole, TrainConfig};
use growthcast_core::pipeline::PipelineError;
use growthcast_core::segnet::SegConfig;
use growthcast_core::synth::GrowthConfig;
use std::fmt;
use std::path::Path;

/// Error class carried to the exit code: config 2, data 3, numeric 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl ErrorClass {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Numeric => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Data,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Numeric,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class.label(), self.message)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::data(e.to_string())
    }
}

/// Merged configuration for all subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    /// Binarization threshold for masks and classification metrics.
    pub threshold: f64,
    /// Prediction tile size.
    pub tile_size: usize,
    /// Segmentation block size.
    pub block_size: usize,
    pub clean_min_area: usize,
    pub clean_radius: usize,
    pub growth: GrowthConfig,
    pub seg: SegConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            threshold: 0.5,
            tile_size: 256,
            block_size: 1024,
            clean_min_area: 64,
            clean_radius: 1,
            growth: GrowthConfig::default(),
            seg: SegConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Apply a `key = value` config file. Every key must parse and be
    /// known; unknown keys are errors, not warnings.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim()).map_err(|msg| {
                CliError::config(format!("{}:{}: {msg}", path.display(), lineno + 1))
            })?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            value
                .parse()
                .map_err(|e| format!("key {key}: cannot parse {value:?}: {e}"))
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "tile.size" => self.tile_size = parse(key, value)?,
            "seg.block_size" => self.block_size = parse(key, value)?,
            "clean.min_area" => self.clean_min_area = parse(key, value)?,
            "clean.radius" => self.clean_radius = parse(key, value)?,
            "growth.width" => self.growth.width = parse(key, value)?,
            "growth.height" => self.growth.height = parse(key, value)?,
            "growth.dates" => self.growth.dates = parse(key, value)?,
            "growth.f0" => self.growth.initial_fraction = parse(key, value)?,
            "growth.rate" => self.growth.growth_rate = parse(key, value)?,
            "growth.noise" => self.growth.noise_sigma = parse(key, value)?,
            "seg.components" => self.seg.components = parse(key, value)?,
            "seg.filters" => self.seg.filters = parse(key, value)?,
            "seg.labels" => self.seg.labels = parse(key, value)?,
            "seg.mu" => self.seg.continuity_weight = parse(key, value)?,
            "seg.lr" => self.seg.lr = parse(key, value)?,
            "seg.momentum" => self.seg.momentum = parse(key, value)?,
            "seg.max_iters" => self.seg.max_iters = parse(key, value)?,
            "seg.min_labels" => self.seg.min_labels = parse(key, value)?,
            "model.layers" => self.model.layers = parse(key, value)?,
            "model.filters" => self.model.filters = parse(key, value)?,
            "model.kernel" => self.model.kernel = parse(key, value)?,
            "model.out_channels" => self.model.out_channels = parse(key, value)?,
            "model.peephole" => {
                self.model.peephole = match value {
                    "previous" => OutputGatePeephole::PreviousCell,
                    "updated" => OutputGatePeephole::UpdatedCell,
                    other => {
                        return Err(format!(
                            "key {key}: expected previous|updated, got {other:?}"
                        ))
                    }
                }
            }
            "train.batch_size" => self.train.batch_size = parse(key, value)?,
            "train.lr" => self.train.lr = parse(key, value)?,
            "train.beta1" => self.train.beta1 = parse(key, value)?,
            "train.beta2" => self.train.beta2 = parse(key, value)?,
            "train.eps" => self.train.adam_eps = parse(key, value)?,
            "train.epochs" => self.train.epochs_max = parse(key, value)?,
            "train.patience" => {
                self.train.patience = if value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_values_override_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nseed = 7\nseg.filters = 24\ntrain.patience = none").unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(f.path()).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.seg.filters, 24);
        assert_eq!(cfg.train.patience, None);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "nonsense.key = 1").unwrap();
        let err = RunConfig::default().apply_file(f.path()).unwrap_err();
        assert_eq!(err.class, ErrorClass::Config);
        assert!(err.message.contains("unknown key"));
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "growth.dates = banana").unwrap();
        let err = RunConfig::default().apply_file(f.path()).unwrap_err();
        assert!(err.message.contains("growth.dates"));
    }
}
