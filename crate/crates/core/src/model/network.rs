//! Full-sequence forward and backward passes.

use ndarray::{Array2, ArrayView2, Axis};

use super::attention::{
    attention, attention_backward, AttentionCache, AttentionOpts, FlagGrads, FlagInput,
};
use super::layers::{
    feed_forward, feed_forward_backward, layer_norm, layer_norm_backward, log_softmax_row,
    FeedForwardCache, LayerNormCache,
};
use super::params::ModelParams;
use super::{Mat, ModelError};

struct EncoderLayerCache {
    norm1: LayerNormCache,
    attn: AttentionCache,
    norm2: LayerNormCache,
    ffn: FeedForwardCache,
}

struct DecoderLayerCache {
    norm1: LayerNormCache,
    self_attn: AttentionCache,
    norm2: LayerNormCache,
    cross_attn: AttentionCache,
    norm3: LayerNormCache,
    ffn: FeedForwardCache,
}

pub(crate) struct ForwardCache {
    src: Vec<usize>,
    dec_in: Vec<usize>,
    encoder: Vec<EncoderLayerCache>,
    encoder_norm: LayerNormCache,
    encoder_out: Mat,
    decoder: Vec<DecoderLayerCache>,
    decoder_norm: LayerNormCache,
    decoder_out: Mat,
    uses_flags: bool,
}

impl ModelParams {
    fn check_ids(&self, ids: &[usize], what: &str) -> Result<(), ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySequence(what.to_string()));
        }
        if ids.len() > self.config.max_len {
            return Err(ModelError::LengthOverflow {
                len: ids.len(),
                max: self.config.max_len,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(ModelError::TokenOutOfVocab(bad));
        }
        Ok(())
    }

    pub(crate) fn embed(&self, ids: &[usize], positions: &Mat) -> Mat {
        let d = self.config.dim;
        let mut x = Array2::zeros((ids.len(), d));
        for (r, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(r);
            row.assign(&self.token_embedding.row(id));
            row += &positions.row(r);
        }
        x
    }

    fn encode_cached(
        &self,
        src: &[usize],
    ) -> Result<(Mat, Vec<EncoderLayerCache>, LayerNormCache), ModelError> {
        self.check_ids(src, "source")?;
        let eps = self.config.layer_norm_eps;
        let heads = self.config.heads;
        let mut x = self.embed(src, &self.encoder_positions);
        let mut caches = Vec::with_capacity(self.encoder.len());
        for layer in &self.encoder {
            let (a, norm1) = layer_norm(x.view(), &layer.norm1, eps);
            let (sa, attn) = attention(
                a.view(),
                a.view(),
                &layer.attn,
                heads,
                AttentionOpts::default(),
            )?;
            x += &sa;
            let (b, norm2) = layer_norm(x.view(), &layer.norm2, eps);
            let (f, ffn) = feed_forward(b.view(), &layer.ffn);
            x += &f;
            caches.push(EncoderLayerCache {
                norm1,
                attn,
                norm2,
                ffn,
            });
        }
        let (h, norm) = layer_norm(x.view(), &self.encoder_norm, eps);
        Ok((h, caches, norm))
    }

    /// Encoder states, one row per source position.
    pub fn encode(&self, src: &[usize]) -> Result<Mat, ModelError> {
        Ok(self.encode_cached(src)?.0)
    }

    fn flag_input<'a>(
        &'a self,
        flags: Option<&'a [Vec<u8>]>,
        t: usize,
        s: usize,
    ) -> Result<Option<FlagInput<'a>>, ModelError> {
        if !self.config.use_flags {
            return Ok(None);
        }
        let columns = flags
            .ok_or_else(|| ModelError::ShapeMismatch("flag model needs flag columns".into()))?;
        if columns.len() < t {
            return Err(ModelError::ShapeMismatch(format!(
                "{} flag columns for {t} decoder positions",
                columns.len()
            )));
        }
        if columns[..t].iter().any(|c| c.len() != s) {
            return Err(ModelError::ShapeMismatch(format!(
                "flag columns must have {s} rows"
            )));
        }
        Ok(Some(FlagInput {
            columns,
            key: &self.flag_key,
            value: &self.flag_value,
        }))
    }

    pub(crate) fn forward_cached(
        &self,
        src: &[usize],
        dec_in: &[usize],
        flags: Option<&[Vec<u8>]>,
    ) -> Result<(Mat, ForwardCache), ModelError> {
        self.check_ids(dec_in, "decoder input")?;
        let (h, enc_caches, enc_norm) = self.encode_cached(src)?;
        let eps = self.config.layer_norm_eps;
        let heads = self.config.heads;
        let flag_input = self.flag_input(flags, dec_in.len(), src.len())?;
        let mut y = self.embed(dec_in, &self.decoder_positions);
        let mut caches = Vec::with_capacity(self.decoder.len());
        for layer in &self.decoder {
            let (a, norm1) = layer_norm(y.view(), &layer.norm1, eps);
            let causal = AttentionOpts {
                causal: true,
                ..Default::default()
            };
            let (sa, self_attn) = attention(a.view(), a.view(), &layer.self_attn, heads, causal)?;
            y += &sa;
            let (b, norm2) = layer_norm(y.view(), &layer.norm2, eps);
            let cross = AttentionOpts {
                flags: flag_input,
                ..Default::default()
            };
            let (ca, cross_attn) = attention(b.view(), h.view(), &layer.cross_attn, heads, cross)?;
            y += &ca;
            let (c, norm3) = layer_norm(y.view(), &layer.norm3, eps);
            let (f, ffn) = feed_forward(c.view(), &layer.ffn);
            y += &f;
            caches.push(DecoderLayerCache {
                norm1,
                self_attn,
                norm2,
                cross_attn,
                norm3,
                ffn,
            });
        }
        let (z, dec_norm) = layer_norm(y.view(), &self.decoder_norm, eps);
        let logits = z.dot(&self.output_proj) + &self.output_bias;
        let cache = ForwardCache {
            src: src.to_vec(),
            dec_in: dec_in.to_vec(),
            encoder: enc_caches,
            encoder_norm: enc_norm,
            encoder_out: h,
            decoder: caches,
            decoder_norm: dec_norm,
            decoder_out: z,
            uses_flags: flag_input.is_some(),
        };
        Ok((logits, cache))
    }

    /// Logits for every decoder position (teacher forcing).
    ///
    /// `flags[j]` is the flag column fed to every decoder layer at position
    /// `j`; it is ignored by models built without flags.
    pub fn forward(
        &self,
        src: &[usize],
        dec_in: &[usize],
        flags: Option<&[Vec<u8>]>,
    ) -> Result<Mat, ModelError> {
        Ok(self.forward_cached(src, dec_in, flags)?.0)
    }

    /// Next-token distributions for every decoder position.
    pub fn distributions(
        &self,
        src: &[usize],
        dec_in: &[usize],
        flags: Option<&[Vec<u8>]>,
    ) -> Result<Mat, ModelError> {
        let logits = self.forward(src, dec_in, flags)?;
        let mut probs = logits.clone();
        for (mut row, lrow) in probs.rows_mut().into_iter().zip(logits.rows()) {
            let lp = log_softmax_row(lrow.as_slice().expect("contiguous"));
            row.iter_mut().zip(lp).for_each(|(p, l)| *p = l.exp());
        }
        Ok(probs)
    }

    /// Summed token cross-entropy and its gradient.
    ///
    /// The loss is summed (not averaged) over positions; callers divide by
    /// the token count of the batch.
    pub fn loss_and_grads(
        &self,
        src: &[usize],
        dec_in: &[usize],
        targets: &[usize],
        flags: Option<&[Vec<u8>]>,
        label_smoothing: f64,
        grads: &mut ModelParams,
    ) -> Result<f64, ModelError> {
        if targets.len() != dec_in.len() {
            return Err(ModelError::ShapeMismatch(
                "targets and decoder inputs differ in length".into(),
            ));
        }
        let (logits, cache) = self.forward_cached(src, dec_in, flags)?;
        let v = self.config.vocab_size;
        let mut loss = 0.0;
        let mut d_logits = Array2::zeros(logits.dim());
        let off = label_smoothing / v as f64;
        for (j, &target) in targets.iter().enumerate() {
            if target >= v {
                return Err(ModelError::TokenOutOfVocab(target));
            }
            let lp = log_softmax_row(logits.row(j).as_slice().expect("contiguous"));
            let mut row = d_logits.row_mut(j);
            for (c, &l) in lp.iter().enumerate() {
                let want = off
                    + if c == target {
                        1.0 - label_smoothing
                    } else {
                        0.0
                    };
                loss -= want * l;
                row[c] = l.exp() - want;
            }
        }
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss(loss));
        }
        self.backward(d_logits.view(), &cache, grads);
        Ok(loss)
    }

    pub(crate) fn backward(
        &self,
        d_logits: ArrayView2<'_, f64>,
        cache: &ForwardCache,
        grads: &mut ModelParams,
    ) {
        let heads = self.config.heads;
        grads.output_proj += &cache.decoder_out.t().dot(&d_logits);
        grads.output_bias += &d_logits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dz = d_logits.dot(&self.output_proj.t());
        let mut dy = layer_norm_backward(
            dz.view(),
            &cache.decoder_norm,
            &self.decoder_norm,
            &mut grads.decoder_norm,
        );
        let mut dh = Array2::zeros(cache.encoder_out.dim());
        for (l, layer) in self.decoder.iter().enumerate().rev() {
            let lc = &cache.decoder[l];
            let g = &mut grads.decoder[l];
            let dc = feed_forward_backward(dy.view(), &lc.ffn, &layer.ffn, &mut g.ffn);
            dy += &layer_norm_backward(dc.view(), &lc.norm3, &layer.norm3, &mut g.norm3);
            let flag_grads = cache.uses_flags.then_some(FlagGrads {
                key: &self.flag_key,
                value: &self.flag_value,
                d_key: &mut grads.flag_key,
                d_value: &mut grads.flag_value,
            });
            let g = &mut grads.decoder[l];
            let (db, dh_part) = attention_backward(
                dy.view(),
                &lc.cross_attn,
                &layer.cross_attn,
                &mut g.cross_attn,
                heads,
                flag_grads,
            );
            dh += &dh_part;
            dy += &layer_norm_backward(db.view(), &lc.norm2, &layer.norm2, &mut g.norm2);
            let (dq, dkv) = attention_backward(
                dy.view(),
                &lc.self_attn,
                &layer.self_attn,
                &mut g.self_attn,
                heads,
                None,
            );
            let da = dq + dkv;
            dy += &layer_norm_backward(da.view(), &lc.norm1, &layer.norm1, &mut g.norm1);
        }
        for (r, &id) in cache.dec_in.iter().enumerate() {
            let row = dy.row(r);
            let mut e = grads.token_embedding.row_mut(id);
            e += &row;
            let mut pe = grads.decoder_positions.row_mut(r);
            pe += &row;
        }
        let mut dx = layer_norm_backward(
            dh.view(),
            &cache.encoder_norm,
            &self.encoder_norm,
            &mut grads.encoder_norm,
        );
        for (l, layer) in self.encoder.iter().enumerate().rev() {
            let lc = &cache.encoder[l];
            let g = &mut grads.encoder[l];
            let db = feed_forward_backward(dx.view(), &lc.ffn, &layer.ffn, &mut g.ffn);
            dx += &layer_norm_backward(db.view(), &lc.norm2, &layer.norm2, &mut g.norm2);
            let (dq, dkv) =
                attention_backward(dx.view(), &lc.attn, &layer.attn, &mut g.attn, heads, None);
            let da = dq + dkv;
            dx += &layer_norm_backward(da.view(), &lc.norm1, &layer.norm1, &mut g.norm1);
        }
        for (r, &id) in cache.src.iter().enumerate() {
            let row = dx.row(r);
            let mut e = grads.token_embedding.row_mut(id);
            e += &row;
            let mut pe = grads.encoder_positions.row_mut(r);
            pe += &row;
        }
    }
}
