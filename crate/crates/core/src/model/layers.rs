//! Dense building blocks with explicit backward passes.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::params::{FeedForwardParams, LayerNormParams};
use super::Mat;

/// Cached activations of one layer-norm application.
#[derive(Debug, Clone)]
pub(crate) struct LayerNormCache {
    xhat: Mat,
    inv_std: Array1<f64>,
}

pub(crate) fn layer_norm(
    x: ArrayView2<'_, f64>,
    p: &LayerNormParams,
    eps: f64,
) -> (Mat, LayerNormCache) {
    let (rows, dim) = x.dim();
    let mut xhat = Array2::zeros((rows, dim));
    let mut inv_std = Array1::zeros(rows);
    let mut y = Array2::zeros((rows, dim));
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.sum() / dim as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[r] = is;
        for c in 0..dim {
            let h = (row[c] - mean) * is;
            xhat[[r, c]] = h;
            y[[r, c]] = h * p.gain[[0, c]] + p.bias[[0, c]];
        }
    }
    (y, LayerNormCache { xhat, inv_std })
}

pub(crate) fn layer_norm_backward(
    dy: ArrayView2<'_, f64>,
    cache: &LayerNormCache,
    p: &LayerNormParams,
    grads: &mut LayerNormParams,
) -> Mat {
    let (rows, dim) = dy.dim();
    let n = dim as f64;
    let mut dx = Array2::zeros((rows, dim));
    for r in 0..rows {
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for c in 0..dim {
            let g = dy[[r, c]];
            let h = cache.xhat[[r, c]];
            grads.gain[[0, c]] += g * h;
            grads.bias[[0, c]] += g;
            let dh = g * p.gain[[0, c]];
            sum_dxhat += dh;
            sum_dxhat_xhat += dh * h;
        }
        let is = cache.inv_std[r];
        for c in 0..dim {
            let dh = dy[[r, c]] * p.gain[[0, c]];
            dx[[r, c]] = is / n * (n * dh - sum_dxhat - cache.xhat[[r, c]] * sum_dxhat_xhat);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

#[derive(Debug, Clone)]
pub(crate) struct FeedForwardCache {
    input: Mat,
    pre: Mat,
    act: Mat,
}

pub(crate) fn feed_forward(
    x: ArrayView2<'_, f64>,
    p: &FeedForwardParams,
) -> (Mat, FeedForwardCache) {
    let pre = x.dot(&p.w1) + &p.b1;
    let act = pre.mapv(gelu);
    let y = act.dot(&p.w2) + &p.b2;
    (
        y,
        FeedForwardCache {
            input: x.to_owned(),
            pre,
            act,
        },
    )
}

pub(crate) fn feed_forward_backward(
    dy: ArrayView2<'_, f64>,
    cache: &FeedForwardCache,
    p: &FeedForwardParams,
    grads: &mut FeedForwardParams,
) -> Mat {
    grads.w2 += &cache.act.t().dot(&dy);
    grads.b2 += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut dpre = dy.dot(&p.w2.t());
    dpre.zip_mut_with(&cache.pre, |d, &z| *d *= gelu_grad(z));
    grads.w1 += &cache.input.t().dot(&dpre);
    grads.b1 += &dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
    dpre.dot(&p.w1.t())
}

/// Row-wise log-softmax.
pub(crate) fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_derivative_matches_finite_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn layer_norm_normalizes_rows() {
        let p = LayerNormParams::new(4);
        let x = ndarray::array![[1.0, 2.0, 3.0, 4.0], [-1.0, 0.0, 0.0, 1.0]];
        let (y, _) = layer_norm(x.view(), &p, 1e-12);
        for r in 0..2 {
            let row = y.row(r);
            assert!(row.sum().abs() < 1e-9);
            assert!((row.mapv(|v| v * v).sum() / 4.0 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn log_softmax_sums_to_one() {
        let lp = log_softmax_row(&[1.0, 2.0, 1000.0, -5.0]);
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
