use super::{EncoderVariant, GnrConfig};
use crate::autodiff::{BoundDense, BoundMlp, Dense, Graph, Mlp, NodeId, Tensor2D};
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Amortized posterior network q(z | x_obs).
#[derive(Clone, Debug, PartialEq)]
pub enum Encoder {
    /// Zero-filled data through a Tanh MLP.
    ZeroImpute { trunk: Mlp, mean: Dense, std: Dense },
    /// Permutation-invariant set function over observed (feature, value)
    /// pairs: `h_j = tanh(x_j w + e_j W + b)`, summed over observed `j`, then
    /// mapped linearly to the latent parameters.
    SetFunction {
        embeddings: Tensor2D,
        embed_weights: Tensor2D,
        value_weights: Tensor2D,
        bias: Tensor2D,
        mean: Dense,
        std: Dense,
    },
}

/// Gaussian data decoder p(x | z).
#[derive(Clone, Debug, PartialEq)]
pub struct DataDecoder {
    pub trunk: Mlp,
    pub mean: Dense,
    pub std: Dense,
    /// When set, the mean head is a sigmoid scaled to `[lo, hi]`.
    pub output_range: Option<(f64, f64)>,
}

/// Bernoulli mask decoder.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskDecoder {
    /// p(m | z) from its own MLP, parameter-disjoint from the data decoder.
    Parallel { trunk: Mlp, logits: Dense },
    /// p(m | x̂) from one dense layer on the decoded data mean.
    Serial { head: Dense },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskPathway {
    Parallel,
    Serial,
}

impl MaskPathway {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskPathway::Parallel => "parallel",
            MaskPathway::Serial => "serial",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(MaskPathway::Parallel),
            "serial" => Ok(MaskPathway::Serial),
            other => Err(Error::Config(format!("unknown mask pathway `{other}`"))),
        }
    }
}

/// All learnable weights: encoder, data decoder and mask decoder blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct GnrParams {
    pub features: usize,
    pub latent_dim: usize,
    pub encoder: Encoder,
    pub data_decoder: DataDecoder,
    pub mask_decoder: MaskDecoder,
}

/// Parameter lengths of the three blocks in flat order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSizes {
    pub encoder: usize,
    pub data_decoder: usize,
    pub mask_decoder: usize,
}

impl BlockSizes {
    pub fn total(&self) -> usize {
        self.encoder + self.data_decoder + self.mask_decoder
    }

    pub fn encoder_range(&self) -> std::ops::Range<usize> {
        0..self.encoder
    }

    pub fn data_range(&self) -> std::ops::Range<usize> {
        self.encoder..self.encoder + self.data_decoder
    }

    pub fn mask_range(&self) -> std::ops::Range<usize> {
        self.encoder + self.data_decoder..self.total()
    }
}

impl Encoder {
    fn new(d: usize, config: &GnrConfig, rng: &mut SeededRng) -> Self {
        let latent = config.latent_dim;
        match config.encoder_variant {
            EncoderVariant::ZeroImpute => {
                let trunk = Mlp::new(d, &config.hidden_sizes, rng);
                let w = trunk.output_width(d);
                Encoder::ZeroImpute {
                    trunk,
                    mean: Dense::new(w, latent, rng),
                    std: Dense::new(w, latent, rng),
                }
            }
            EncoderVariant::SetFunction => {
                let (e, c) = (config.set_embedding_size, config.set_code_size);
                Encoder::SetFunction {
                    embeddings: crate::autodiff::glorot_uniform(d, e, rng),
                    embed_weights: crate::autodiff::glorot_uniform(e, c, rng),
                    value_weights: crate::autodiff::glorot_uniform(1, c, rng),
                    bias: Tensor2D::zeros(1, c),
                    mean: Dense::new(c, latent, rng),
                    std: Dense::new(c, latent, rng),
                }
            }
        }
    }

    pub fn variant(&self) -> EncoderVariant {
        match self {
            Encoder::ZeroImpute { .. } => EncoderVariant::ZeroImpute,
            Encoder::SetFunction { .. } => EncoderVariant::SetFunction,
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor2D> {
        match self {
            Encoder::ZeroImpute { trunk, mean, std } => {
                let mut t = trunk.tensors();
                t.extend(mean.tensors());
                t.extend(std.tensors());
                t
            }
            Encoder::SetFunction { embeddings, embed_weights, value_weights, bias, mean, std } => {
                let mut t = vec![embeddings, embed_weights, value_weights, bias];
                t.extend(mean.tensors());
                t.extend(std.tensors());
                t
            }
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        match self {
            Encoder::ZeroImpute { trunk, mean, std } => {
                let mut t = trunk.tensors_mut();
                t.extend(mean.tensors_mut());
                t.extend(std.tensors_mut());
                t
            }
            Encoder::SetFunction { embeddings, embed_weights, value_weights, bias, mean, std } => {
                let mut t = vec![embeddings, embed_weights, value_weights, bias];
                t.extend(mean.tensors_mut());
                t.extend(std.tensors_mut());
                t
            }
        }
    }
}

impl DataDecoder {
    fn new(d: usize, config: &GnrConfig, rng: &mut SeededRng) -> Self {
        let trunk = Mlp::new(config.latent_dim, &config.hidden_sizes, rng);
        let w = trunk.output_width(config.latent_dim);
        Self {
            trunk,
            mean: Dense::new(w, d, rng),
            std: Dense::new(w, d, rng),
            output_range: config.output_range,
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor2D> {
        let mut t = self.trunk.tensors();
        t.extend(self.mean.tensors());
        t.extend(self.std.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        let mut t = self.trunk.tensors_mut();
        t.extend(self.mean.tensors_mut());
        t.extend(self.std.tensors_mut());
        t
    }
}

impl MaskDecoder {
    fn new(d: usize, config: &GnrConfig, pathway: MaskPathway, rng: &mut SeededRng) -> Self {
        match pathway {
            MaskPathway::Parallel => {
                let trunk = Mlp::new(config.latent_dim, &config.hidden_sizes, rng);
                let w = trunk.output_width(config.latent_dim);
                MaskDecoder::Parallel { trunk, logits: Dense::new(w, d, rng) }
            }
            MaskPathway::Serial => MaskDecoder::Serial { head: Dense::new(d, d, rng) },
        }
    }

    pub fn pathway(&self) -> MaskPathway {
        match self {
            MaskDecoder::Parallel { .. } => MaskPathway::Parallel,
            MaskDecoder::Serial { .. } => MaskPathway::Serial,
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor2D> {
        match self {
            MaskDecoder::Parallel { trunk, logits } => {
                let mut t = trunk.tensors();
                t.extend(logits.tensors());
                t
            }
            MaskDecoder::Serial { head } => head.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        match self {
            MaskDecoder::Parallel { trunk, logits } => {
                let mut t = trunk.tensors_mut();
                t.extend(logits.tensors_mut());
                t
            }
            MaskDecoder::Serial { head } => head.tensors_mut(),
        }
    }
}

impl GnrParams {
    /// Freshly initialised parameters for `features` inputs. Initialisation
    /// order is encoder, data decoder, mask decoder, all from `rng`.
    pub fn new(features: usize, config: &GnrConfig, pathway: MaskPathway, rng: &mut SeededRng) -> Self {
        let encoder = Encoder::new(features, config, rng);
        let data_decoder = DataDecoder::new(features, config, rng);
        let mask_decoder = MaskDecoder::new(features, config, pathway, rng);
        Self { features, latent_dim: config.latent_dim, encoder, data_decoder, mask_decoder }
    }

    pub fn tensors(&self) -> Vec<&Tensor2D> {
        let mut t = self.encoder.tensors();
        t.extend(self.data_decoder.tensors());
        t.extend(self.mask_decoder.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.data_decoder.tensors_mut());
        t.extend(self.mask_decoder.tensors_mut());
        t
    }

    pub fn block_sizes(&self) -> BlockSizes {
        let count = |ts: Vec<&Tensor2D>| ts.iter().map(|t| t.len()).sum();
        BlockSizes {
            encoder: count(self.encoder.tensors()),
            data_decoder: count(self.data_decoder.tensors()),
            mask_decoder: count(self.mask_decoder.tensors()),
        }
    }

    pub fn len(&self) -> usize {
        self.block_sizes().total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat parameter vector in encoder, data-decoder, mask-decoder order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for t in self.tensors() {
            out.extend_from_slice(t.as_slice());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::dim("set_flat", format!("{} values for {} parameters", flat.len(), self.len())));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn pathway(&self) -> MaskPathway {
        self.mask_decoder.pathway()
    }

    pub(crate) fn bind(&self, g: &mut Graph) -> BoundParams {
        let encoder = match &self.encoder {
            Encoder::ZeroImpute { trunk, mean, std } => BoundEncoder::ZeroImpute {
                trunk: trunk.bind(g),
                mean: mean.bind(g),
                std: std.bind(g),
            },
            Encoder::SetFunction { embeddings, embed_weights, value_weights, bias, mean, std } => {
                BoundEncoder::SetFunction {
                    embeddings: g.param(embeddings.clone()),
                    embed_weights: g.param(embed_weights.clone()),
                    value_weights: g.param(value_weights.clone()),
                    bias: g.param(bias.clone()),
                    mean: mean.bind(g),
                    std: std.bind(g),
                }
            }
        };
        let data = BoundDataDecoder {
            trunk: self.data_decoder.trunk.bind(g),
            mean: self.data_decoder.mean.bind(g),
            std: self.data_decoder.std.bind(g),
            output_range: self.data_decoder.output_range,
        };
        let mask = match &self.mask_decoder {
            MaskDecoder::Parallel { trunk, logits } => {
                BoundMaskDecoder::Parallel { trunk: trunk.bind(g), logits: logits.bind(g) }
            }
            MaskDecoder::Serial { head } => BoundMaskDecoder::Serial { head: head.bind(g) },
        };
        BoundParams { encoder, data, mask }
    }
}

pub(crate) enum BoundEncoder {
    ZeroImpute { trunk: BoundMlp, mean: BoundDense, std: BoundDense },
    SetFunction {
        embeddings: NodeId,
        embed_weights: NodeId,
        value_weights: NodeId,
        bias: NodeId,
        mean: BoundDense,
        std: BoundDense,
    },
}

pub(crate) struct BoundDataDecoder {
    pub trunk: BoundMlp,
    pub mean: BoundDense,
    pub std: BoundDense,
    pub output_range: Option<(f64, f64)>,
}

pub(crate) enum BoundMaskDecoder {
    Parallel { trunk: BoundMlp, logits: BoundDense },
    Serial { head: BoundDense },
}

pub(crate) struct BoundParams {
    pub encoder: BoundEncoder,
    pub data: BoundDataDecoder,
    pub mask: BoundMaskDecoder,
}

impl BoundParams {
    /// Node ids in the same order as [`GnrParams::tensors`].
    pub fn ids(&self) -> Vec<NodeId> {
        let mut ids = match &self.encoder {
            BoundEncoder::ZeroImpute { trunk, mean, std } => {
                let mut v = trunk.ids();
                v.extend(mean.ids());
                v.extend(std.ids());
                v
            }
            BoundEncoder::SetFunction { embeddings, embed_weights, value_weights, bias, mean, std } => {
                let mut v = vec![*embeddings, *embed_weights, *value_weights, *bias];
                v.extend(mean.ids());
                v.extend(std.ids());
                v
            }
        };
        ids.extend(self.data.trunk.ids());
        ids.extend(self.data.mean.ids());
        ids.extend(self.data.std.ids());
        match &self.mask {
            BoundMaskDecoder::Parallel { trunk, logits } => {
                ids.extend(trunk.ids());
                ids.extend(logits.ids());
            }
            BoundMaskDecoder::Serial { head } => ids.extend(head.ids()),
        }
        ids
    }
}
