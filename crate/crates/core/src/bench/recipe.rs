use crate::net::ModelConfig;
use crate::train::{AlphaSchedule, TrainConfig};

use super::env::{EnvName, EnvSpec};

/// Model and optimizer settings for training on `env` with one CPU core.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRecipe {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl EnvSpec {
    /// Settings that train a usable field for this environment in about ten
    /// minutes on one core: the compact network, low-frequency Fourier
    /// features, clipped Adam with cosine decay, and endpoint re-pairing.
    /// Tuned on the tabletop.
    pub fn training_recipe(&self) -> TrainingRecipe {
        let mut model = ModelConfig::compact(self.space);
        let mut train = TrainConfig::for_epochs(600);
        match self.name {
            EnvName::FreeSpace => {
                model.fourier_scale = 1.0;
                train = TrainConfig::for_epochs(100);
                // nothing to smooth, and the Dirichlet pull biases T low
                train.epsilon = 0.0;
            }
            _ => {
                model.fourier_scale = 4.0;
                train.epsilon = 0.05;
                train.alpha_schedule = AlphaSchedule::constant(1.0);
                train.grad_clip = Some(1.0);
                train.lr_final_fraction = 0.05;
                train.repair_endpoints = true;
            }
        }
        TrainingRecipe { model, train }
    }
}
