//! Flat TOML run configuration. Every key is optional; absent keys keep the
//! library defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rarelab::cgan::{GanConfig, DEFAULT_SAMPLE_COUNTS};
use rarelab::pipeline::{ExperimentConfig, GridSpec, KernelChoice, SplitSpec};
use rarelab::surrogate::SurrogateSpec;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,

    pub surrogate_n_total: Option<usize>,
    pub surrogate_n_positive: Option<usize>,
    pub surrogate_female_fraction: Option<f64>,
    pub surrogate_positive_female_fraction: Option<f64>,
    pub surrogate_panic_negative_mean: Option<f64>,
    pub surrogate_panic_negative_sd: Option<f64>,
    pub surrogate_panic_positive_mean: Option<f64>,
    pub surrogate_panic_positive_sd: Option<f64>,
    pub surrogate_suicidal_negative_mean: Option<f64>,
    pub surrogate_suicidal_negative_sd: Option<f64>,
    pub surrogate_suicidal_positive_mean: Option<f64>,
    pub surrogate_suicidal_positive_sd: Option<f64>,
    pub surrogate_missing_rate: Option<f64>,

    pub gan_latent_dim: Option<usize>,
    pub gan_generator_lr: Option<f64>,
    pub gan_discriminator_lr: Option<f64>,
    pub gan_batch_size: Option<usize>,
    pub gan_epochs: Option<usize>,
    pub gan_generator_hidden: Option<Vec<usize>>,
    pub gan_discriminator_hidden: Option<Vec<usize>>,
    pub gan_dropout: Option<f64>,
    pub gan_sample_negative: Option<usize>,
    pub gan_sample_positive: Option<usize>,

    pub grid_lr_lambda: Option<Vec<f64>>,
    pub grid_svm_kernel: Option<Vec<KernelChoice>>,
    pub grid_svm_c: Option<Vec<f64>>,
    pub grid_svm_gamma: Option<Vec<f64>>,
    pub grid_rf_trees: Option<Vec<usize>>,
    /// 0 means unbounded depth.
    pub grid_rf_depth: Option<Vec<usize>>,

    pub split_test_fraction: Option<f64>,
    pub split_stratified: Option<bool>,
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value.clone() {
            $target = v;
        }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn surrogate(&self, seed: u64) -> SurrogateSpec {
        let mut s = SurrogateSpec {
            seed,
            ..Default::default()
        };
        set!(s.n_total, self.surrogate_n_total);
        set!(s.n_positive, self.surrogate_n_positive);
        set!(s.female_fraction, self.surrogate_female_fraction);
        set!(
            s.positive_female_fraction,
            self.surrogate_positive_female_fraction
        );
        set!(s.panic_negative.mean, self.surrogate_panic_negative_mean);
        set!(s.panic_negative.sd, self.surrogate_panic_negative_sd);
        set!(s.panic_positive.mean, self.surrogate_panic_positive_mean);
        set!(s.panic_positive.sd, self.surrogate_panic_positive_sd);
        set!(
            s.suicidal_negative.mean,
            self.surrogate_suicidal_negative_mean
        );
        set!(s.suicidal_negative.sd, self.surrogate_suicidal_negative_sd);
        set!(
            s.suicidal_positive.mean,
            self.surrogate_suicidal_positive_mean
        );
        set!(s.suicidal_positive.sd, self.surrogate_suicidal_positive_sd);
        set!(s.missing_rate, self.surrogate_missing_rate);
        s
    }

    pub fn gan(&self, seed: u64) -> GanConfig {
        let mut g = GanConfig {
            seed,
            ..Default::default()
        };
        set!(g.latent_dim, self.gan_latent_dim);
        set!(g.generator_lr, self.gan_generator_lr);
        set!(g.discriminator_lr, self.gan_discriminator_lr);
        set!(g.batch_size, self.gan_batch_size);
        set!(g.epochs, self.gan_epochs);
        set!(g.generator_hidden, self.gan_generator_hidden);
        set!(g.discriminator_hidden, self.gan_discriminator_hidden);
        set!(g.dropout, self.gan_dropout);
        g
    }

    pub fn sample_counts(&self) -> [usize; 2] {
        [
            self.gan_sample_negative.unwrap_or(DEFAULT_SAMPLE_COUNTS[0]),
            self.gan_sample_positive.unwrap_or(DEFAULT_SAMPLE_COUNTS[1]),
        ]
    }

    pub fn split(&self) -> SplitSpec {
        let mut s = SplitSpec::default();
        set!(s.test_fraction, self.split_test_fraction);
        set!(s.stratified, self.split_stratified);
        s
    }

    pub fn grid(&self) -> GridSpec {
        let mut g = GridSpec::default();
        set!(g.lr_lambda, self.grid_lr_lambda);
        set!(g.svm_kernel, self.grid_svm_kernel);
        set!(g.svm_c, self.grid_svm_c);
        set!(g.svm_gamma, self.grid_svm_gamma);
        set!(g.rf_trees, self.grid_rf_trees);
        if let Some(depths) = &self.grid_rf_depth {
            g.rf_depth = depths.iter().map(|&d| (d > 0).then_some(d)).collect();
        }
        g
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            split: self.split(),
            grid: self.grid(),
        }
    }
}
