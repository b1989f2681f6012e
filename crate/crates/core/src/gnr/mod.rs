//! The conjunction-model imputer.
//!
//! A latent `z ~ N(0, I)` drives two parameter-disjoint decoders in
//! parallel: a Gaussian data decoder `p(x | z)` and a Bernoulli mask decoder
//! `p(m | z)`. An amortized Gaussian encoder `q(z | x_obs)` (which never sees
//! the mask) supplies proposals for the importance-weighted bound
//!
//! ```text
//! L_K = mean_rows [ log (1/K) Σ_k ŵ_k ]
//! log ŵ_k = Σ_{j observed} log N(x_j; μ_j(z_k), σ_j(z_k))
//!         + α Σ_j log Bern(m_j; π_j(z_k))
//!         + log N(z_k; 0, I) − log q(z_k | x_obs)
//! ```
//!
//! With α = 1 the weight is the untempered joint-likelihood ratio; with α = 0
//! the mask term vanishes and the bound is an observed-data importance
//! weighted bound. Missing entries are imputed by self-normalized importance
//! sampling over `L` draws, and multiple imputations by sampling importance
//! resampling.

mod impute;
mod model;
mod params;
mod train;

pub use impute::{
    impute, impute_seeded, impute_with, multiple_impute, posterior_draws, snis_combine, ImputationResult, PosteriorChunk,
    IMPUTE_STREAM,
};
pub use model::{
    bound_with_noise, decode_data, decode_mask, encode, gnr_bound, importance_log_weights,
    sample_latent, ImportanceWeightSet, LatentBatch,
};
pub use params::{BlockSizes, DataDecoder, Encoder, GnrParams, MaskDecoder, MaskPathway};
pub use train::{bound_gradient, train, train_with_pathway, TracePoint, TrainedModel};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderVariant {
    ZeroImpute,
    SetFunction,
}

impl EncoderVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderVariant::ZeroImpute => "zero_impute",
            EncoderVariant::SetFunction => "set_function",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "zero_impute" | "zi" => Ok(EncoderVariant::ZeroImpute),
            "set_function" | "set" => Ok(EncoderVariant::SetFunction),
            other => Err(Error::Config(format!("unknown encoder variant `{other}`"))),
        }
    }
}

/// Architecture and training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GnrConfig {
    pub latent_dim: usize,
    pub hidden_sizes: Vec<usize>,
    /// K: importance samples per row during training.
    pub importance_samples: usize,
    /// L: importance samples per row for imputation.
    pub imputation_samples: usize,
    /// Temperature on the mask likelihood.
    pub alpha: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub encoder_variant: EncoderVariant,
    pub set_embedding_size: usize,
    pub set_code_size: usize,
    /// Rating mode: the data mean head becomes a sigmoid scaled to this range.
    pub output_range: Option<(f64, f64)>,
    /// Interval (in iterations) between bound-trace points.
    pub trace_every: usize,
    pub seed: u64,
}

impl Default for GnrConfig {
    fn default() -> Self {
        Self {
            latent_dim: 1,
            hidden_sizes: vec![128, 128],
            importance_samples: 20,
            imputation_samples: 1000,
            alpha: 1.0,
            learning_rate: 1e-3,
            iterations: 10_000,
            batch_size: 128,
            encoder_variant: EncoderVariant::ZeroImpute,
            set_embedding_size: 20,
            set_code_size: 50,
            output_range: None,
            trace_every: 100,
            seed: 0,
        }
    }
}

impl GnrConfig {
    /// Synthetic Gaussian task: 1-dimensional latent, zero-imputation encoder.
    pub fn synthetic() -> Self {
        Self::default()
    }

    /// Real-valued tables with `d` features: latent dimension `d - 1`.
    pub fn tabular(d: usize) -> Self {
        Self { latent_dim: d.saturating_sub(1).max(1), ..Self::default() }
    }

    /// Rating matrices: 30-dimensional latent, set encoder, sigmoid mean head.
    pub fn ratings(output_range: (f64, f64)) -> Self {
        Self {
            latent_dim: 30,
            encoder_variant: EncoderVariant::SetFunction,
            output_range: Some(output_range),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.latent_dim == 0 {
            return fail("latent_dim must be at least 1".into());
        }
        if self.importance_samples == 0 {
            return fail("importance_samples (K) must be at least 1".into());
        }
        if self.imputation_samples == 0 {
            return fail("imputation_samples (L) must be at least 1".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha {} must be finite and non-negative", self.alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.hidden_sizes.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        if self.encoder_variant == EncoderVariant::SetFunction
            && (self.set_embedding_size == 0 || self.set_code_size == 0)
        {
            return fail("set encoder sizes must be positive".into());
        }
        if let Some((lo, hi)) = self.output_range {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return fail(format!("output range ({lo}, {hi}) is empty"));
            }
        }
        if self.trace_every == 0 {
            return fail("trace_every must be at least 1".into());
        }
        Ok(())
    }
}
