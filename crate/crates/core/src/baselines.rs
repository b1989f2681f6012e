//! Reference imputers: per-feature mean, the α = 0 degeneracy of the
//! conjunction model, and a serial selection model whose mask probabilities
//! come from a dense layer on the decoded data.

use crate::autodiff::Tensor2D;
use crate::gnr::{self, GnrConfig, ImputationResult, MaskPathway, TrainedModel};
use crate::missing::{CompleteMatrix, IncompleteMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Mean,
    MiwaeAlpha0,
    SerialSelection,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] =
        [BaselineKind::Mean, BaselineKind::MiwaeAlpha0, BaselineKind::SerialSelection];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Mean => "mean",
            BaselineKind::MiwaeAlpha0 => "miwae_alpha0",
            BaselineKind::SerialSelection => "serial_selection",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "mean" => Ok(BaselineKind::Mean),
            "miwae_alpha0" => Ok(BaselineKind::MiwaeAlpha0),
            "serial_selection" => Ok(BaselineKind::SerialSelection),
            other => Err(Error::Config(format!("unknown baseline `{other}`"))),
        }
    }
}

/// Per-feature means of the observed entries.
pub fn observed_means(data: &IncompleteMatrix) -> Result<Vec<f64>> {
    (0..data.cols())
        .map(|j| {
            let col = data.observed_in_column(j);
            if col.is_empty() {
                Err(Error::DegenerateFeature { feature: j, detail: "no observed entries".into() })
            } else {
                Ok(col.iter().sum::<f64>() / col.len() as f64)
            }
        })
        .collect()
}

/// Fills missing entries with `means[j]`.
pub fn fill_with(data: &IncompleteMatrix, means: &[f64]) -> Result<CompleteMatrix> {
    let (n, d) = data.shape();
    if means.len() != d {
        return Err(Error::Consistency(format!("{} means for {d} features", means.len())));
    }
    let mut out = Tensor2D::zeros(n, d);
    for i in 0..n {
        for (j, m) in means.iter().enumerate() {
            out.set(i, j, data.get(i, j).unwrap_or(*m));
        }
    }
    CompleteMatrix::new(out)
}

pub fn mean_impute(data: &IncompleteMatrix) -> Result<CompleteMatrix> {
    fill_with(data, &observed_means(data)?)
}

/// Same encoder, data decoder and objective as the conjunction model, with
/// the mask predicted serially from the decoded data mean.
pub fn train_serial_selection(data: &IncompleteMatrix, config: &GnrConfig) -> Result<TrainedModel> {
    gnr::train_with_pathway(data, config, MaskPathway::Serial)
}

pub fn train_alpha0(data: &IncompleteMatrix, config: &GnrConfig) -> Result<TrainedModel> {
    gnr::train(data, &GnrConfig { alpha: 0.0, ..config.clone() })
}

/// Fits the baseline on `data` and imputes it.
pub fn run_baseline(kind: BaselineKind, data: &IncompleteMatrix, config: &GnrConfig) -> Result<ImputationResult> {
    match kind {
        BaselineKind::Mean => Ok(ImputationResult {
            imputed: mean_impute(data)?,
            probabilistic_mask: Tensor2D::filled(data.rows(), data.cols(), 0.5),
        }),
        BaselineKind::MiwaeAlpha0 => {
            let model = train_alpha0(data, config)?;
            gnr::impute_seeded(data, &model)
        }
        BaselineKind::SerialSelection => {
            let model = train_serial_selection(data, config)?;
            gnr::impute_seeded(data, &model)
        }
    }
}
