//! Step-by-step decoding with cached keys and values.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::layers::{feed_forward, layer_norm, log_softmax_row};
use super::params::{AttentionParams, FLAG_STATES};
use super::{Mat, ModelError, ModelParams};

/// Encoder output with the cross-attention keys and values of every
/// decoder layer precomputed.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    pub states: Mat,
    cross_k: Vec<Mat>,
    cross_v: Vec<Mat>,
}

impl EncodedSource {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

/// Self-attention keys and values of the tokens fed so far.
#[derive(Debug, Clone)]
pub struct DecoderState {
    keys: Vec<Mat>,
    values: Vec<Mat>,
    position: usize,
}

impl DecoderState {
    /// Number of tokens already fed to the decoder.
    pub fn position(&self) -> usize {
        self.position
    }
}

fn attend_one(
    q: ArrayView1<'_, f64>,
    k: &Mat,
    v: &Mat,
    heads: usize,
    flags: Option<(&[u8], &Mat, &Mat)>,
) -> Array1<f64> {
    let dim = q.len();
    let hd = dim / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let s = k.nrows();
    let mut out = Array1::zeros(dim);
    for h in 0..heads {
        let cols = s![h * hd..(h + 1) * hd];
        let qh = q.slice(cols);
        let kh = k.slice(s![.., h * hd..(h + 1) * hd]);
        let mut raw = kh.dot(&qh);
        if let Some((column, ek, _)) = flags {
            let qe = ek.slice(s![.., h * hd..(h + 1) * hd]).dot(&qh);
            for i in 0..s {
                raw[i] += qe[column[i] as usize];
            }
        }
        let max = raw
            .iter()
            .map(|&x| x * scale)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = raw.iter().map(|&x| (x * scale - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let mut o = out.slice_mut(cols);
        for (i, &p) in probs.iter().enumerate() {
            o.scaled_add(p, &v.slice(s![i, h * hd..(h + 1) * hd]));
        }
        if let Some((column, _, ev)) = flags {
            let mut mass = [0.0; FLAG_STATES];
            for (i, &p) in probs.iter().enumerate() {
                mass[column[i] as usize] += p;
            }
            for (f, &m) in mass.iter().enumerate() {
                o.scaled_add(m, &ev.slice(s![f, h * hd..(h + 1) * hd]));
            }
        }
    }
    out
}

fn project_row(x: ArrayView1<'_, f64>, w: &Mat) -> Array1<f64> {
    x.dot(w)
}

impl ModelParams {
    /// Runs the encoder once and caches cross-attention keys and values.
    pub fn encode_source(&self, src: &[usize]) -> Result<EncodedSource, ModelError> {
        let states = self.encode(src)?;
        let cross_k = self
            .decoder
            .iter()
            .map(|l| states.dot(&l.cross_attn.wk))
            .collect();
        let cross_v = self
            .decoder
            .iter()
            .map(|l| states.dot(&l.cross_attn.wv))
            .collect();
        Ok(EncodedSource {
            states,
            cross_k,
            cross_v,
        })
    }

    pub fn start_decoder(&self) -> DecoderState {
        let d = self.config.dim;
        DecoderState {
            keys: vec![Array2::zeros((0, d)); self.decoder.len()],
            values: vec![Array2::zeros((0, d)); self.decoder.len()],
            position: 0,
        }
    }

    /// Feeds one token and returns log-probabilities of the next one.
    ///
    /// `flags` is the flag column for this decoder position (ignored by
    /// models without flags).
    pub fn decode_step(
        &self,
        enc: &EncodedSource,
        state: &mut DecoderState,
        token: usize,
        flags: Option<&[u8]>,
    ) -> Result<Vec<f64>, ModelError> {
        if token >= self.config.vocab_size {
            return Err(ModelError::TokenOutOfVocab(token));
        }
        if state.position >= self.config.max_len {
            return Err(ModelError::LengthOverflow {
                len: state.position + 1,
                max: self.config.max_len,
            });
        }
        let flag_tables = if self.config.use_flags {
            let column = flags.ok_or_else(|| {
                ModelError::ShapeMismatch("flag model needs a flag column".into())
            })?;
            if column.len() != enc.len() {
                return Err(ModelError::ShapeMismatch(format!(
                    "flag column has {} rows for {} source positions",
                    column.len(),
                    enc.len()
                )));
            }
            if column.iter().any(|&m| m as usize >= FLAG_STATES) {
                return Err(ModelError::ShapeMismatch(
                    "flag values must be 0, 1 or 2".into(),
                ));
            }
            Some((column, &self.flag_key, &self.flag_value))
        } else {
            None
        };
        let eps = self.config.layer_norm_eps;
        let heads = self.config.heads;
        let mut y = &self.token_embedding.row(token) + &self.decoder_positions.row(state.position);
        for (l, layer) in self.decoder.iter().enumerate() {
            let x = y.view().insert_axis(Axis(0));
            let (a, _) = layer_norm(x, &layer.norm1, eps);
            let a = a.row(0);
            push_row(&mut state.keys[l], project_row(a, &layer.self_attn.wk));
            push_row(&mut state.values[l], project_row(a, &layer.self_attn.wv));
            let q = project_row(a, &layer.self_attn.wq);
            let sa = attend_one(q.view(), &state.keys[l], &state.values[l], heads, None);
            y += &sa.dot(&layer.self_attn.wo);
            let (b, _) = layer_norm(y.view().insert_axis(Axis(0)), &layer.norm2, eps);
            let ca = cross_step(
                b.row(0),
                &layer.cross_attn,
                &enc.cross_k[l],
                &enc.cross_v[l],
                heads,
                flag_tables,
            );
            y += &ca;
            let (c, _) = layer_norm(y.view().insert_axis(Axis(0)), &layer.norm3, eps);
            let (f, _) = feed_forward(c.view(), &layer.ffn);
            y += &f.row(0);
        }
        state.position += 1;
        let (z, _) = layer_norm(y.view().insert_axis(Axis(0)), &self.decoder_norm, eps);
        let logits = z.row(0).dot(&self.output_proj) + self.output_bias.row(0);
        Ok(log_softmax_row(logits.as_slice().expect("contiguous")))
    }
}

fn cross_step(
    b: ArrayView1<'_, f64>,
    p: &AttentionParams,
    k: &Mat,
    v: &Mat,
    heads: usize,
    flags: Option<(&[u8], &Mat, &Mat)>,
) -> Array1<f64> {
    let q = project_row(b, &p.wq);
    attend_one(q.view(), k, v, heads, flags).dot(&p.wo)
}

fn push_row(m: &mut Mat, row: Array1<f64>) {
    m.push_row(row.view()).expect("row width matches model dim");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny(use_flags: bool) -> ModelParams {
        let mut cfg = ModelConfig::small(12);
        cfg.dim = 8;
        cfg.heads = 2;
        cfg.ff_dim = 16;
        cfg.max_len = 16;
        cfg.use_flags = use_flags;
        ModelParams::init(cfg, 3).unwrap()
    }

    #[test]
    fn incremental_matches_full_forward() {
        for use_flags in [false, true] {
            let p = tiny(use_flags);
            let src = [5, 6, 4, 7, 8];
            let dec = [2, 9, 10, 11];
            let cols: Vec<Vec<u8>> = vec![
                vec![0, 1, 0, 1, 0],
                vec![0, 1, 0, 1, 0],
                vec![0, 2, 0, 1, 0],
                vec![0, 2, 0, 2, 0],
            ];
            let full = p.forward(&src, &dec, Some(&cols)).unwrap();
            let enc = p.encode_source(&src).unwrap();
            let mut st = p.start_decoder();
            for (j, &tok) in dec.iter().enumerate() {
                let lp = p.decode_step(&enc, &mut st, tok, Some(&cols[j])).unwrap();
                let row = full.row(j);
                let norm = log_softmax_row(row.as_slice().unwrap());
                for (a, b) in lp.iter().zip(&norm) {
                    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
                }
            }
            assert_eq!(st.position(), 4);
        }
    }

    #[test]
    fn step_errors() {
        let p = tiny(true);
        let enc = p.encode_source(&[5, 6]).unwrap();
        let mut st = p.start_decoder();
        assert!(matches!(
            p.decode_step(&enc, &mut st, 2, None),
            Err(ModelError::ShapeMismatch(_))
        ));
        assert!(matches!(
            p.decode_step(&enc, &mut st, 2, Some(&[0])),
            Err(ModelError::ShapeMismatch(_))
        ));
        assert!(matches!(
            p.decode_step(&enc, &mut st, 99, Some(&[0, 0])),
            Err(ModelError::TokenOutOfVocab(99))
        ));
    }
}
