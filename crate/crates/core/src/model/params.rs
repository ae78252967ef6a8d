use ndarray::Array2;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Mat, ModelError};

/// Number of flag values (0, 1, 2), i.e. rows of the flag embedding tables.
pub const FLAG_STATES: usize = 3;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub max_len: usize,
    /// Whether decoder cross-attention reads the flag matrix at all.
    pub use_flags: bool,
    pub layer_norm_eps: f64,
}

impl ModelConfig {
    /// Two encoder and two decoder layers, width 64, four heads.
    pub fn small(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            dim: 64,
            heads: 4,
            ff_dim: 128,
            encoder_layers: 2,
            decoder_layers: 2,
            max_len: 96,
            use_flags: true,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 || self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(ModelError::BadConfig(format!(
                "dim {} must be a positive multiple of heads {}",
                self.dim, self.heads
            )));
        }
        if self.vocab_size < crate::text::SEP_ID + 1 || self.max_len == 0 || self.ff_dim == 0 {
            return Err(ModelError::BadConfig(
                "vocab, max_len and ff_dim must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Mat,
    pub bias: Mat,
}

impl LayerNormParams {
    pub fn new(dim: usize) -> Self {
        LayerNormParams {
            gain: Array2::ones((1, dim)),
            bias: Array2::zeros((1, dim)),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat)>) {
        out.push((format!("{prefix}.gain"), &self.gain));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        out.push(&mut self.gain);
        out.push(&mut self.bias);
    }
}

/// Projections of one multi-head attention block. Rows are input features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
}

impl AttentionParams {
    fn init(dim: usize, out_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let std = 1.0 / (dim as f64).sqrt();
        AttentionParams {
            wq: normal((dim, dim), std, rng),
            wk: normal((dim, dim), std, rng),
            wv: normal((dim, dim), std, rng),
            wo: normal((dim, dim), std * out_scale, rng),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat)>) {
        out.push((format!("{prefix}.wq"), &self.wq));
        out.push((format!("{prefix}.wk"), &self.wk));
        out.push((format!("{prefix}.wv"), &self.wv));
        out.push((format!("{prefix}.wo"), &self.wo));
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        out.extend([&mut self.wq, &mut self.wk, &mut self.wv, &mut self.wo]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

impl FeedForwardParams {
    fn init(dim: usize, ff: usize, out_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        FeedForwardParams {
            w1: normal((dim, ff), 1.0 / (dim as f64).sqrt(), rng),
            b1: Array2::zeros((1, ff)),
            w2: normal((ff, dim), out_scale / (ff as f64).sqrt(), rng),
            b2: Array2::zeros((1, dim)),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat)>) {
        out.push((format!("{prefix}.w1"), &self.w1));
        out.push((format!("{prefix}.b1"), &self.b1));
        out.push((format!("{prefix}.w2"), &self.w2));
        out.push((format!("{prefix}.b2"), &self.b2));
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        out.extend([&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerParams {
    pub norm1: LayerNormParams,
    pub attn: AttentionParams,
    pub norm2: LayerNormParams,
    pub ffn: FeedForwardParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayerParams {
    pub norm1: LayerNormParams,
    pub self_attn: AttentionParams,
    pub norm2: LayerNormParams,
    pub cross_attn: AttentionParams,
    pub norm3: LayerNormParams,
    pub ffn: FeedForwardParams,
}

/// Every learned tensor of the model.
///
/// `flag_key` and `flag_value` hold one row per flag value and are shared
/// by the cross-attention of every decoder layer. Head `h` reads the
/// contiguous column slice `h * head_dim .. (h + 1) * head_dim`, the same
/// slice it uses of the keys and values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub token_embedding: Mat,
    pub encoder_positions: Mat,
    pub decoder_positions: Mat,
    pub encoder: Vec<EncoderLayerParams>,
    pub encoder_norm: LayerNormParams,
    pub decoder: Vec<DecoderLayerParams>,
    pub decoder_norm: LayerNormParams,
    pub flag_key: Mat,
    pub flag_value: Mat,
    pub output_proj: Mat,
    pub output_bias: Mat,
}

fn normal(shape: (usize, usize), std: f64, rng: &mut ChaCha8Rng) -> Mat {
    let dist = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn(shape, || dist.sample(rng))
}

impl ModelParams {
    /// Seeded random initialization.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.dim;
        let layers = (config.encoder_layers + config.decoder_layers).max(1);
        let out_scale = 1.0 / (2.0 * layers as f64).sqrt();
        let token_embedding = normal((config.vocab_size, d), 0.5, &mut rng);
        let encoder_positions = normal((config.max_len, d), 0.1, &mut rng);
        let decoder_positions = normal((config.max_len, d), 0.1, &mut rng);
        let encoder = (0..config.encoder_layers)
            .map(|_| EncoderLayerParams {
                norm1: LayerNormParams::new(d),
                attn: AttentionParams::init(d, out_scale, &mut rng),
                norm2: LayerNormParams::new(d),
                ffn: FeedForwardParams::init(d, config.ff_dim, out_scale, &mut rng),
            })
            .collect();
        let decoder = (0..config.decoder_layers)
            .map(|_| DecoderLayerParams {
                norm1: LayerNormParams::new(d),
                self_attn: AttentionParams::init(d, out_scale, &mut rng),
                norm2: LayerNormParams::new(d),
                cross_attn: AttentionParams::init(d, out_scale, &mut rng),
                norm3: LayerNormParams::new(d),
                ffn: FeedForwardParams::init(d, config.ff_dim, out_scale, &mut rng),
            })
            .collect();
        let (flag_key, flag_value) = if config.use_flags {
            (
                normal((FLAG_STATES, d), 0.5, &mut rng),
                normal((FLAG_STATES, d), 0.5, &mut rng),
            )
        } else {
            (
                Array2::zeros((FLAG_STATES, d)),
                Array2::zeros((FLAG_STATES, d)),
            )
        };
        let output_proj = normal((d, config.vocab_size), 1.0 / (d as f64).sqrt(), &mut rng);
        let output_bias = Array2::zeros((1, config.vocab_size));
        Ok(ModelParams {
            token_embedding,
            encoder_positions,
            decoder_positions,
            encoder,
            encoder_norm: LayerNormParams::new(d),
            decoder,
            decoder_norm: LayerNormParams::new(d),
            flag_key,
            flag_value,
            output_proj,
            output_bias,
            config,
        })
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = vec![
            ("token_embedding".to_string(), &self.token_embedding),
            ("encoder_positions".to_string(), &self.encoder_positions),
            ("decoder_positions".to_string(), &self.decoder_positions),
        ];
        for (l, layer) in self.encoder.iter().enumerate() {
            layer.norm1.visit(&format!("encoder.{l}.norm1"), &mut out);
            layer.attn.visit(&format!("encoder.{l}.attn"), &mut out);
            layer.norm2.visit(&format!("encoder.{l}.norm2"), &mut out);
            layer.ffn.visit(&format!("encoder.{l}.ffn"), &mut out);
        }
        self.encoder_norm.visit("encoder_norm", &mut out);
        for (l, layer) in self.decoder.iter().enumerate() {
            layer.norm1.visit(&format!("decoder.{l}.norm1"), &mut out);
            layer
                .self_attn
                .visit(&format!("decoder.{l}.self_attn"), &mut out);
            layer.norm2.visit(&format!("decoder.{l}.norm2"), &mut out);
            layer
                .cross_attn
                .visit(&format!("decoder.{l}.cross_attn"), &mut out);
            layer.norm3.visit(&format!("decoder.{l}.norm3"), &mut out);
            layer.ffn.visit(&format!("decoder.{l}.ffn"), &mut out);
        }
        self.decoder_norm.visit("decoder_norm", &mut out);
        out.push(("flag_key".to_string(), &self.flag_key));
        out.push(("flag_value".to_string(), &self.flag_value));
        out.push(("output_proj".to_string(), &self.output_proj));
        out.push(("output_bias".to_string(), &self.output_bias));
        out
    }

    /// Mutable tensors, same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut out = vec![
            &mut self.token_embedding,
            &mut self.encoder_positions,
            &mut self.decoder_positions,
        ];
        for layer in &mut self.encoder {
            layer.norm1.visit_mut(&mut out);
            layer.attn.visit_mut(&mut out);
            layer.norm2.visit_mut(&mut out);
            layer.ffn.visit_mut(&mut out);
        }
        self.encoder_norm.visit_mut(&mut out);
        for layer in &mut self.decoder {
            layer.norm1.visit_mut(&mut out);
            layer.self_attn.visit_mut(&mut out);
            layer.norm2.visit_mut(&mut out);
            layer.cross_attn.visit_mut(&mut out);
            layer.norm3.visit_mut(&mut out);
            layer.ffn.visit_mut(&mut out);
        }
        self.decoder_norm.visit_mut(&mut out);
        out.extend([
            &mut self.flag_key,
            &mut self.flag_value,
            &mut self.output_proj,
            &mut self.output_bias,
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Zeroes the flag tables, reducing the model to the plain baseline.
    pub fn zero_flag_embeddings(&mut self) {
        self.flag_key.fill(0.0);
        self.flag_value.fill(0.0);
    }

    /// Adds `scale * other` to every tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.scaled_add(scale, src);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}
