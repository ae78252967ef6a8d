//! Multi-head attention with optional mention-flag key/value embeddings.
//!
//! For query `j` and key `i` with flag `m = M[j][i]`, head `h` scores
//! `q_j · (k_i + E_k[m]) / sqrt(head_dim)` and returns
//! `Σ_i α_ji (v_i + E_v[m])`. Without flags this is plain scaled
//! dot-product attention.

use ndarray::{s, Array2, ArrayView2};

use super::params::{AttentionParams, FLAG_STATES};
use super::{Mat, ModelError};

/// Flag columns and embedding tables for one cross-attention call.
#[derive(Debug, Clone, Copy)]
pub struct FlagInput<'a> {
    /// `columns[j][i]` is the flag of key position `i` seen by query `j`.
    pub columns: &'a [Vec<u8>],
    pub key: &'a Mat,
    pub value: &'a Mat,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AttentionOpts<'a> {
    pub causal: bool,
    /// `true` marks a key position that must receive zero weight.
    pub key_mask: Option<&'a [bool]>,
    pub flags: Option<FlagInput<'a>>,
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    q_in: Mat,
    kv_in: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    pub(crate) probs: Vec<Mat>,
    mass: Vec<Mat>,
    concat: Mat,
    flag_columns: Option<Vec<Vec<u8>>>,
}

fn check_flags(flags: &FlagInput<'_>, t: usize, s: usize, dim: usize) -> Result<(), ModelError> {
    if flags.columns.len() < t || flags.columns[..t].iter().any(|c| c.len() != s) {
        return Err(ModelError::ShapeMismatch(format!(
            "flag columns must cover {t} queries over {s} keys"
        )));
    }
    if flags.key.dim() != (FLAG_STATES, dim) || flags.value.dim() != (FLAG_STATES, dim) {
        return Err(ModelError::ShapeMismatch(
            "flag tables must be 3 x dim".into(),
        ));
    }
    if flags.columns[..t]
        .iter()
        .flatten()
        .any(|&m| m as usize >= FLAG_STATES)
    {
        return Err(ModelError::ShapeMismatch(
            "flag values must be 0, 1 or 2".into(),
        ));
    }
    Ok(())
}

pub(crate) fn attention(
    q_in: ArrayView2<'_, f64>,
    kv_in: ArrayView2<'_, f64>,
    p: &AttentionParams,
    heads: usize,
    opts: AttentionOpts<'_>,
) -> Result<(Mat, AttentionCache), ModelError> {
    let (t, dim) = q_in.dim();
    let s = kv_in.nrows();
    if kv_in.ncols() != dim || p.wq.dim() != (dim, dim) {
        return Err(ModelError::ShapeMismatch(format!(
            "attention inputs {t}x{dim} / {s}x{} with projection {:?}",
            kv_in.ncols(),
            p.wq.dim()
        )));
    }
    if let Some(mask) = opts.key_mask {
        if mask.len() != s {
            return Err(ModelError::ShapeMismatch("key mask length".into()));
        }
    }
    if let Some(f) = &opts.flags {
        check_flags(f, t, s, dim)?;
    }
    let hd = dim / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let q = q_in.dot(&p.wq);
    let k = kv_in.dot(&p.wk);
    let v = kv_in.dot(&p.wv);
    let mut concat = Array2::zeros((t, dim));
    let mut probs = Vec::with_capacity(heads);
    let mut masses = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * hd..(h + 1) * hd];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);
        let mut scores = qh.dot(&kh.t());
        let flag_terms = opts.flags.map(|f| qh.dot(&f.key.slice(cols).t()));
        for j in 0..t {
            let mut row = scores.row_mut(j);
            for i in 0..s {
                let masked = (opts.causal && i > j) || opts.key_mask.is_some_and(|m| m[i]);
                if masked {
                    row[i] = f64::NEG_INFINITY;
                    continue;
                }
                let mut raw = row[i];
                if let (Some(f), Some(qe)) = (&opts.flags, &flag_terms) {
                    raw += qe[[j, f.columns[j][i] as usize]];
                }
                row[i] = raw * scale;
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                row.fill(0.0);
                continue;
            }
            let mut total = 0.0;
            row.mapv_inplace(|x| {
                let e = (x - max).exp();
                total += e;
                e
            });
            row.mapv_inplace(|x| x / total);
        }
        let mut out = scores.dot(&vh);
        let mut mass = Array2::zeros((t, FLAG_STATES));
        if let Some(f) = &opts.flags {
            for j in 0..t {
                for i in 0..s {
                    mass[[j, f.columns[j][i] as usize]] += scores[[j, i]];
                }
            }
            out += &mass.dot(&f.value.slice(cols));
        }
        concat.slice_mut(cols).assign(&out);
        probs.push(scores);
        masses.push(mass);
    }
    let y = concat.dot(&p.wo);
    let cache = AttentionCache {
        q_in: q_in.to_owned(),
        kv_in: kv_in.to_owned(),
        q,
        k,
        v,
        probs,
        mass: masses,
        concat,
        flag_columns: opts.flags.map(|f| f.columns[..t].to_vec()),
    };
    Ok((y, cache))
}

/// Gradients of the flag tables, when the call used flags.
pub(crate) struct FlagGrads<'a> {
    pub key: &'a Mat,
    pub value: &'a Mat,
    pub d_key: &'a mut Mat,
    pub d_value: &'a mut Mat,
}

/// Returns `(d q_in, d kv_in)` and accumulates parameter gradients.
pub(crate) fn attention_backward(
    d_out: ArrayView2<'_, f64>,
    cache: &AttentionCache,
    p: &AttentionParams,
    grads: &mut AttentionParams,
    heads: usize,
    mut flag_grads: Option<FlagGrads<'_>>,
) -> (Mat, Mat) {
    let (t, dim) = cache.q_in.dim();
    let s = cache.kv_in.nrows();
    let hd = dim / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    grads.wo += &cache.concat.t().dot(&d_out);
    let d_concat = d_out.dot(&p.wo.t());
    let mut dq = Array2::zeros((t, dim));
    let mut dk = Array2::zeros((s, dim));
    let mut dv = Array2::zeros((s, dim));
    for h in 0..heads {
        let cols = s![.., h * hd..(h + 1) * hd];
        let a = &cache.probs[h];
        let doh = d_concat.slice(cols);
        let mut da = doh.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&doh));
        let flagged = cache.flag_columns.as_ref().zip(flag_grads.as_mut());
        if let Some((columns, fg)) = &flagged {
            let dmass = doh.dot(&fg.value.slice(cols).t());
            for j in 0..t {
                for i in 0..s {
                    da[[j, i]] += dmass[[j, columns[j][i] as usize]];
                }
            }
        }
        if let Some((_, fg)) = flagged {
            let mut dval = fg.d_value.slice_mut(cols);
            dval += &cache.mass[h].t().dot(&doh);
        }
        // softmax backward, folded with the score scale
        let mut draw = Array2::zeros((t, s));
        for j in 0..t {
            let dot: f64 = (0..s).map(|i| da[[j, i]] * a[[j, i]]).sum();
            for i in 0..s {
                draw[[j, i]] = scale * a[[j, i]] * (da[[j, i]] - dot);
            }
        }
        let qh = cache.q.slice(cols);
        let mut dqh = draw.dot(&cache.k.slice(cols));
        dk.slice_mut(cols).assign(&draw.t().dot(&qh));
        if let (Some(columns), Some(fg)) = (&cache.flag_columns, flag_grads.as_mut()) {
            let mut dsmass = Array2::<f64>::zeros((t, FLAG_STATES));
            for j in 0..t {
                for i in 0..s {
                    dsmass[[j, columns[j][i] as usize]] += draw[[j, i]];
                }
            }
            dqh += &dsmass.dot(&fg.key.slice(cols));
            let mut dkey = fg.d_key.slice_mut(cols);
            dkey += &dsmass.t().dot(&qh);
        }
        dq.slice_mut(cols).assign(&dqh);
    }
    grads.wq += &cache.q_in.t().dot(&dq);
    grads.wk += &cache.kv_in.t().dot(&dk);
    grads.wv += &cache.kv_in.t().dot(&dv);
    let d_q_in = dq.dot(&p.wq.t());
    let d_kv_in = dk.dot(&p.wk.t()) + dv.dot(&p.wv.t());
    (d_q_in, d_kv_in)
}

/// Flag-augmented cross-attention on its own.
///
/// `h_d` holds decoder queries (one row per query), `h_e` encoder states,
/// `columns[j]` the flag column seen by query `j`. Returns the attended
/// vectors after the output projection together with the per-head
/// attention weights.
pub fn cross_attention_flagged(
    h_d: ArrayView2<'_, f64>,
    h_e: ArrayView2<'_, f64>,
    columns: &[Vec<u8>],
    params: &AttentionParams,
    flag_key: &Mat,
    flag_value: &Mat,
    heads: usize,
) -> Result<(Mat, Vec<Mat>), ModelError> {
    let opts = AttentionOpts {
        flags: Some(FlagInput {
            columns,
            key: flag_key,
            value: flag_value,
        }),
        ..Default::default()
    };
    let (y, cache) = attention(h_d, h_e, params, heads, opts)?;
    Ok((y, cache.probs))
}

/// Plain cross-attention with the same projections.
pub fn cross_attention(
    h_d: ArrayView2<'_, f64>,
    h_e: ArrayView2<'_, f64>,
    params: &AttentionParams,
    heads: usize,
) -> Result<(Mat, Vec<Mat>), ModelError> {
    let (y, cache) = attention(h_d, h_e, params, heads, AttentionOpts::default())?;
    Ok((y, cache.probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn identity_params(dim: usize) -> AttentionParams {
        let eye = Array2::eye(dim);
        AttentionParams {
            wq: eye.clone(),
            wk: eye.clone(),
            wv: eye.clone(),
            wo: eye,
        }
    }

    #[test]
    fn zero_flag_tables_reduce_to_plain_attention() {
        let p = AttentionParams {
            wq: array![[0.3, -0.2], [0.1, 0.9]],
            wk: array![[1.1, 0.4], [-0.5, 0.2]],
            wv: array![[0.7, 0.0], [0.2, -1.3]],
            wo: array![[0.5, 0.5], [-0.25, 1.0]],
        };
        let hd = array![[0.2, -1.0], [1.5, 0.3], [0.0, 0.4]];
        let he = array![[1.0, 2.0], [-0.5, 0.1]];
        let cols = vec![vec![0, 1], vec![2, 1], vec![1, 1]];
        let zeros = Array2::zeros((3, 2));
        let (flagged, _) =
            cross_attention_flagged(hd.view(), he.view(), &cols, &p, &zeros, &zeros, 1).unwrap();
        let (plain, _) = cross_attention(hd.view(), he.view(), &p, 1).unwrap();
        assert_eq!(flagged, plain);
    }

    #[test]
    fn rows_sum_to_one_and_masking_zeroes_weights() {
        let p = identity_params(4);
        let x = array![
            [0.1, 0.2, 0.3, 0.4],
            [1.0, -1.0, 0.5, 0.0],
            [0.0, 0.0, 2.0, 1.0]
        ];
        let mask = [false, true, false];
        let opts = AttentionOpts {
            key_mask: Some(&mask),
            ..Default::default()
        };
        let (_, cache) = attention(x.view(), x.view(), &p, 2, opts).unwrap();
        for a in &cache.probs {
            for row in a.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row[1] < 1e-6);
            }
        }
        let causal = AttentionOpts {
            causal: true,
            ..Default::default()
        };
        let (_, cache) = attention(x.view(), x.view(), &p, 1, causal).unwrap();
        assert_eq!(cache.probs[0][[0, 1]], 0.0);
        assert_eq!(cache.probs[0][[0, 0]], 1.0);
    }

    #[test]
    fn shape_errors() {
        let p = identity_params(2);
        let hd = array![[1.0, 0.0]];
        let he = array![[1.0, 0.0], [0.0, 1.0]];
        let e = Array2::zeros((3, 2));
        let short = vec![vec![0]];
        assert!(matches!(
            cross_attention_flagged(hd.view(), he.view(), &short, &p, &e, &e, 1),
            Err(ModelError::ShapeMismatch(_))
        ));
        let bad_table = Array2::zeros((2, 2));
        let cols = vec![vec![0, 0]];
        assert!(
            cross_attention_flagged(hd.view(), he.view(), &cols, &p, &bad_table, &e, 1).is_err()
        );
    }
}
