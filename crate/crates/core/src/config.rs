//! Run configuration shared by every pipeline command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{AutoencoderConfig, LatentScaling};
use crate::nnet::{NetworkSpec, TrainConfig};
use crate::waveform::{
    equispaced, NewtonianChirp, TimeGrid, DEFAULT_SAMPLES, DEFAULT_T_COALESCENCE, DEFAULT_T_END,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
    /// Coalescence time of the chirp family; must lie past `t_end`.
    pub t_coalescence: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: DEFAULT_T_END,
            n_samples: DEFAULT_SAMPLES,
            t_coalescence: DEFAULT_T_COALESCENCE,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_start, self.t_end, self.n_samples)
    }

    pub fn model(&self) -> NewtonianChirp {
        NewtonianChirp::new(self.t_coalescence)
    }
}

/// Optimizer schedule without a seed; the run seed is attached on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub gamma: f64,
    pub step_epochs: usize,
}

impl Schedule {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            gamma: self.gamma,
            step_epochs: self.step_epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub scaling: LatentScaling,
    pub schedule: Schedule,
    pub pca_components: usize,
}

impl Default for LatentConfig {
    fn default() -> Self {
        let ae = AutoencoderConfig::default();
        Self {
            latent_dim: ae.latent_dim,
            hidden: ae.hidden,
            scaling: ae.scaling,
            schedule: Schedule {
                epochs: ae.train.epochs,
                batch_size: ae.train.batch_size,
                lr0: ae.train.lr0,
                gamma: ae.train.gamma,
                step_epochs: ae.train.step_epochs,
            },
            pca_components: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub batch_sizes: Vec<usize>,
    pub repetitions: usize,
    /// Memory budget used to report a maximum single-pass batch size.
    pub memory_budget_bytes: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            batch_sizes: vec![1, 100, 10_000, 100_000],
            repetitions: 5,
            memory_budget_bytes: 11 << 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub grid: GridConfig,
    pub tol: f64,
    /// Regressor architectures, e.g. `"32-64"` and `"S-32-64"`.
    pub specs: Vec<String>,
    pub regressor: Schedule,
    pub latent: LatentConfig,
    pub bench: BenchConfig,
    pub seed: u64,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset("desk").unwrap()
    }
}

pub const PRESETS: [&str; 3] = ["desk", "paper-q1-2", "paper-q1-8"];

/// Stream ids on the run seed: shuffles and weight init use 0 and 1.
const VAL_STREAM: u64 = 2;
const TEST_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let desk = Self {
            q_min: 1.0,
            q_max: 2.0,
            n_train: 1000,
            n_val: 200,
            n_test: 200,
            grid: GridConfig::default(),
            tol: 1e-10,
            specs: ["32-64", "S-32-64", "32-64-128", "S-32-64-128"]
                .map(String::from)
                .to_vec(),
            regressor: Schedule {
                epochs: 500,
                batch_size: 16,
                lr0: 1e-3,
                gamma: 0.95,
                step_epochs: 150,
            },
            latent: LatentConfig::default(),
            bench: BenchConfig::default(),
            seed: 0,
            out_dir: "out".into(),
        };
        match name {
            "desk" => Ok(desk),
            "paper-q1-2" => Ok(Self {
                n_train: 10_000,
                n_val: 2000,
                n_test: 2000,
                regressor: Schedule {
                    epochs: 2500,
                    ..desk.regressor.clone()
                },
                ..desk
            }),
            "paper-q1-8" => Ok(Self {
                q_max: 8.0,
                n_train: 56_000,
                n_val: 14_000,
                n_test: 14_000,
                specs: ["32-64", "S-32-64", "32-64-128-64", "S-32-64-128-64"]
                    .map(String::from)
                    .to_vec(),
                regressor: Schedule {
                    epochs: 5000,
                    batch_size: 32,
                    lr0: 1e-3,
                    gamma: 0.9,
                    step_epochs: 30,
                },
                ..desk
            }),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {PRESETS:?}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_min >= 1.0 && self.q_min.is_finite()) {
            return Err(Error::Config(format!(
                "q_min = {} must be >= 1",
                self.q_min
            )));
        }
        if !(self.q_min < self.q_max && self.q_max.is_finite()) {
            return Err(Error::Config(format!(
                "q_min = {} must be below q_max = {}",
                self.q_min, self.q_max
            )));
        }
        for (name, n) in [
            ("n_train", self.n_train),
            ("n_val", self.n_val),
            ("n_test", self.n_test),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!(
                "tol = {} must lie in (0, 1)",
                self.tol
            )));
        }
        let grid = self.grid.grid()?;
        if self.grid.t_coalescence <= grid.t_end {
            return Err(Error::Config(
                "t_coalescence must lie past the grid end".into(),
            ));
        }
        for s in &self.specs {
            s.parse::<NetworkSpec>()?;
        }
        self.regressor.with_seed(self.seed).validate()?;
        self.autoencoder().train.validate()?;
        if self.latent.latent_dim == 0 || self.latent.pca_components == 0 {
            return Err(Error::Config("latent dimensions must be positive".into()));
        }
        if self.bench.repetitions == 0 || self.bench.batch_sizes.contains(&0) {
            return Err(Error::Config("benchmark sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn network_specs(&self) -> Result<Vec<NetworkSpec>> {
        self.specs.iter().map(|s| s.parse()).collect()
    }

    pub fn regressor_train(&self) -> TrainConfig {
        self.regressor.with_seed(self.seed)
    }

    pub fn autoencoder(&self) -> AutoencoderConfig {
        AutoencoderConfig {
            latent_dim: self.latent.latent_dim,
            hidden: self.latent.hidden.clone(),
            scaling: self.latent.scaling,
            train: self.latent.schedule.with_seed(self.seed),
        }
    }

    /// Equispaced training values; validation and test values are drawn
    /// uniformly from their own ChaCha streams of the run seed.
    pub fn q_values(&self, split: Split) -> Vec<f64> {
        let (n, stream) = match split {
            Split::Train => return equispaced(self.q_min, self.q_max, self.n_train),
            Split::Val => (self.n_val, VAL_STREAM),
            Split::Test => (self.n_test, TEST_STREAM),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        (0..n)
            .map(|_| rng.random_range(self.q_min..=self.q_max))
            .collect()
    }
}
