use rand::Rng;

use super::{Real, Tensor4};
use crate::numerics::RngStream;
use crate::{Error, Result};

/// Stride-1 2D cross-correlation with "same" zero padding.
///
/// Even kernels pad ⌊(k−1)/2⌋ before and ⌈(k−1)/2⌉ after, so the output
/// has the input's spatial size for every kernel shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kh: usize,
    pub kw: usize,
    /// out × in × kh × kw, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Zero padding (top, bottom, left, right).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl<T: Real> ConvLayer<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kh: usize, kw: usize) -> Self {
        ConvLayer {
            in_channels,
            out_channels,
            kh,
            kw,
            weights: vec![T::zero(); out_channels * in_channels * kh * kw],
            bias: vec![T::zero(); out_channels],
        }
    }

    /// Fan-in uniform init in ±√(1/(in·kh·kw)), zero bias.
    pub fn init(in_channels: usize, out_channels: usize, kh: usize, kw: usize, rng: &mut RngStream) -> Self {
        let mut layer = Self::zeros(in_channels, out_channels, kh, kw);
        let bound = (1.0 / (in_channels * kh * kw) as f64).sqrt();
        for w in &mut layer.weights {
            *w = T::from_f64(rng.random_range(-bound..bound));
        }
        layer
    }

    pub fn padding(&self) -> Padding {
        Padding {
            top: (self.kh - 1) / 2,
            bottom: self.kh / 2,
            left: (self.kw - 1) / 2,
            right: self.kw / 2,
        }
    }

    /// Rows of the im2col matrix.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kh * self.kw
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor4<T>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Output rows per im2col block, sized so a block stays cache-resident.
fn block_rows<T>(layer: &ConvLayer<T>, w: usize) -> usize
where
    T: Real,
{
    const BLOCK_BYTES: usize = 1 << 22;
    (BLOCK_BYTES / (layer.patch_len() * w * std::mem::size_of::<T>()).max(1)).max(1)
}

/// Unrolls output rows `y0..y1` of one (C, H, W) item into a
/// (C·kh·kw) × ((y1−y0)·W) patch matrix.
pub(crate) fn im2col<T: Real>(
    item: &[T],
    layer: &ConvLayer<T>,
    h: usize,
    w: usize,
    (y0, y1): (usize, usize),
    cols: &mut Vec<T>,
) {
    let n = h * w;
    let nb = (y1 - y0) * w;
    let pad = layer.padding();
    cols.clear();
    cols.resize(layer.patch_len() * nb, T::zero());
    let mut row = 0;
    for c in 0..layer.in_channels {
        let plane = &item[c * n..(c + 1) * n];
        for a in 0..layer.kh {
            for b in 0..layer.kw {
                let dst = &mut cols[row * nb..(row + 1) * nb];
                // output column x reads input column x + b − left
                let x_lo = pad.left.saturating_sub(b);
                let x_hi = (w + pad.left).saturating_sub(b).min(w);
                for y in y0..y1 {
                    let sy = y + a;
                    if sy < pad.top || sy - pad.top >= h || x_lo >= x_hi {
                        continue;
                    }
                    let src_row = &plane[(sy - pad.top) * w..(sy - pad.top + 1) * w];
                    let sx0 = x_lo + b - pad.left;
                    let o = (y - y0) * w;
                    dst[o + x_lo..o + x_hi].copy_from_slice(&src_row[sx0..sx0 + (x_hi - x_lo)]);
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters a patch-matrix block back onto the
/// (C, H, W) item, accumulating.
pub(crate) fn col2im<T: Real>(
    cols: &[T],
    layer: &ConvLayer<T>,
    h: usize,
    w: usize,
    (y0, y1): (usize, usize),
    item: &mut [T],
) {
    let n = h * w;
    let nb = (y1 - y0) * w;
    let pad = layer.padding();
    let mut row = 0;
    for c in 0..layer.in_channels {
        let plane = &mut item[c * n..(c + 1) * n];
        for a in 0..layer.kh {
            for b in 0..layer.kw {
                let src = &cols[row * nb..(row + 1) * nb];
                let x_lo = pad.left.saturating_sub(b);
                let x_hi = (w + pad.left).saturating_sub(b).min(w);
                for y in y0..y1 {
                    let sy = y + a;
                    if sy < pad.top || sy - pad.top >= h || x_lo >= x_hi {
                        continue;
                    }
                    let sx0 = x_lo + b - pad.left;
                    let o = (y - y0) * w;
                    let dst_row = &mut plane[(sy - pad.top) * w..(sy - pad.top + 1) * w];
                    for (d, s) in dst_row[sx0..sx0 + (x_hi - x_lo)].iter_mut().zip(&src[o + x_lo..o + x_hi]) {
                        *d += *s;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Row-major matrix view: data plus row stride.
#[derive(Clone, Copy)]
struct Mat<'a, T> {
    data: &'a [T],
    ld: usize,
}

/// `c (m×n, row stride ldc) = a (m×k) · b (k×n) + beta·c`.
fn matmul<T: Real>(m: usize, k: usize, n: usize, a: Mat<T>, b: Mat<T>, beta: T, c: &mut [T], ldc: usize) {
    assert!(a.data.len() >= (m - 1) * a.ld + k && b.data.len() >= (k - 1) * b.ld + n);
    assert!(c.len() >= (m - 1) * ldc + n);
    unsafe {
        T::gemm(
            m, k, n, T::from_f64(1.0), a.data.as_ptr(), a.ld as isize, 1, b.data.as_ptr(), b.ld as isize, 1, beta,
            c.as_mut_ptr(), ldc as isize, 1,
        )
    }
}

/// `c (m×k) += a (m×n) · bᵀ` where `b` is k×n.
fn matmul_bt_acc<T: Real>(m: usize, n: usize, k: usize, a: Mat<T>, b: Mat<T>, c: &mut [T]) {
    assert!(a.data.len() >= (m - 1) * a.ld + n && b.data.len() >= (k - 1) * b.ld + n && c.len() >= m * k);
    unsafe {
        T::gemm(
            m, n, k, T::from_f64(1.0), a.data.as_ptr(), a.ld as isize, 1, b.data.as_ptr(), 1, b.ld as isize,
            T::from_f64(1.0), c.as_mut_ptr(), k as isize, 1,
        )
    }
}

/// `c (k×n) = aᵀ · b` where `a` is m×k and `b` is m×n.
fn matmul_at<T: Real>(m: usize, k: usize, n: usize, a: Mat<T>, b: Mat<T>, c: &mut [T]) {
    assert!(a.data.len() >= (m - 1) * a.ld + k && b.data.len() >= (m - 1) * b.ld + n && c.len() >= k * n);
    unsafe {
        T::gemm(
            k, m, n, T::from_f64(1.0), a.data.as_ptr(), 1, a.ld as isize, b.data.as_ptr(), b.ld as isize, 1, T::zero(),
            c.as_mut_ptr(), n as isize, 1,
        )
    }
}

/// Layers with at most this many outputs skip im2col: GEMM kernels waste
/// most of their register tile on them.
const DIRECT_MAX_OUT: usize = 4;

/// Input plane zero-padded to (h + kh − 1) × (w + kw − 1), plus one
/// spare row so shifted reads near the end stay in bounds.
///
/// With `wp = w + kw − 1`, output (y, x) of a layer lives at `y·wp + x` in
/// a "wide" plane and tap (a, b) reads padded index `y·wp + x + a·wp + b`,
/// so every tap is one contiguous shifted vector.
fn pad_item<T: Real>(item: &[T], layer: &ConvLayer<T>, h: usize, w: usize, buf: &mut Vec<T>) -> (usize, usize) {
    let p = layer.padding();
    let (hp, wp) = (h + layer.kh - 1, w + layer.kw - 1);
    let plane = hp * wp;
    buf.clear();
    buf.resize(layer.in_channels * plane + wp, T::zero());
    for c in 0..layer.in_channels {
        for y in 0..h {
            let dst = c * plane + (y + p.top) * wp + p.left;
            buf[dst..dst + w].copy_from_slice(&item[(c * h + y) * w..(c * h + y + 1) * w]);
        }
    }
    (plane, wp)
}

fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::zero(); 16];
    let (xc, yc) = (x.chunks_exact(16), y.chunks_exact(16));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for j in 0..16 {
            acc[j] += a[j] * b[j];
        }
    }
    let mut s = T::zero();
    for (&a, &b) in xr.iter().zip(yr) {
        s += a * b;
    }
    for v in acc {
        s += v;
    }
    s
}

fn direct_forward<T: Real>(item: &[T], layer: &ConvLayer<T>, h: usize, w: usize, out: &mut [T], buf: &mut Vec<T>) {
    let (plane, wp) = pad_item(item, layer, h, w, buf);
    let len = h * wp;
    let mut wide = vec![T::zero(); len];
    for o in 0..layer.out_channels {
        wide.iter_mut().for_each(|v| *v = layer.bias[o]);
        for c in 0..layer.in_channels {
            for a in 0..layer.kh {
                for b in 0..layer.kw {
                    let wt = layer.weights[((o * layer.in_channels + c) * layer.kh + a) * layer.kw + b];
                    let off = c * plane + a * wp + b;
                    axpy(wt, &buf[off..off + len], &mut wide);
                }
            }
        }
        for y in 0..h {
            out[(o * h + y) * w..(o * h + y + 1) * w].copy_from_slice(&wide[y * wp..y * wp + w]);
        }
    }
}

/// Direct-path counterpart of the im2col backward for one item.
#[allow(clippy::too_many_arguments)]
fn direct_backward<T: Real>(
    item: &[T],
    layer: &ConvLayer<T>,
    h: usize,
    w: usize,
    g: &[T],
    gw: &mut [T],
    grad_in: Option<&mut [T]>,
    buf: &mut Vec<T>,
) {
    let (plane, wp) = pad_item(item, layer, h, w, buf);
    let len = h * wp;
    let mut wide = vec![T::zero(); len];
    let mut gin_pad = grad_in.as_ref().map(|_| vec![T::zero(); buf.len()]);
    for o in 0..layer.out_channels {
        for y in 0..h {
            wide[y * wp..y * wp + w].copy_from_slice(&g[(o * h + y) * w..(o * h + y + 1) * w]);
        }
        for c in 0..layer.in_channels {
            for a in 0..layer.kh {
                for b in 0..layer.kw {
                    let wi = ((o * layer.in_channels + c) * layer.kh + a) * layer.kw + b;
                    let off = c * plane + a * wp + b;
                    gw[wi] += dot(&wide, &buf[off..off + len]);
                    if let Some(gp) = gin_pad.as_mut() {
                        axpy(layer.weights[wi], &wide, &mut gp[off..off + len]);
                    }
                }
            }
        }
    }
    if let (Some(gi), Some(gp)) = (grad_in, gin_pad) {
        let p = layer.padding();
        for c in 0..layer.in_channels {
            for y in 0..h {
                let src = c * plane + (y + p.top) * wp + p.left;
                for (d, s) in gi[(c * h + y) * w..(c * h + y + 1) * w].iter_mut().zip(&gp[src..src + w]) {
                    *d += *s;
                }
            }
        }
    }
}

fn check_input<T: Real>(input: &Tensor4<T>, layer: &ConvLayer<T>) -> Result<()> {
    if input.channels() != layer.in_channels {
        return Err(Error::invalid(format!(
            "layer expects {} input channels, got {}",
            layer.in_channels,
            input.channels()
        )));
    }
    Ok(())
}

pub(crate) fn forward_with<T: Real>(
    input: &Tensor4<T>,
    layer: &ConvLayer<T>,
    cols: &mut Vec<T>,
) -> Result<Tensor4<T>> {
    check_input(input, layer)?;
    let [batch, _, h, w] = input.shape();
    let n = h * w;
    let mut out = Tensor4::zeros([batch, layer.out_channels, h, w]);
    let k = layer.patch_len();
    let rows = block_rows(layer, w);
    let weights = Mat { data: &layer.weights[..], ld: k };
    for bi in 0..batch {
        let dst = out.item_mut(bi);
        if layer.out_channels <= DIRECT_MAX_OUT {
            direct_forward(input.item(bi), layer, h, w, dst, cols);
            continue;
        }
        for (o, chunk) in dst.chunks_exact_mut(n).enumerate() {
            chunk.iter_mut().for_each(|v| *v = layer.bias[o]);
        }
        for y0 in (0..h).step_by(rows) {
            let y1 = (y0 + rows).min(h);
            im2col(input.item(bi), layer, h, w, (y0, y1), cols);
            let nb = (y1 - y0) * w;
            let patches = Mat { data: &cols[..], ld: nb };
            matmul(layer.out_channels, k, nb, weights, patches, T::from_f64(1.0), &mut dst[y0 * w..], n);
        }
    }
    Ok(out)
}

pub fn conv2d_forward<T: Real>(input: &Tensor4<T>, layer: &ConvLayer<T>) -> Result<Tensor4<T>> {
    forward_with(input, layer, &mut Vec::new())
}

/// Accumulates weight and bias gradients into `gw`/`gb`; returns the input
/// gradient when `want_input` is set.
pub(crate) fn backward_with<T: Real>(
    input: &Tensor4<T>,
    layer: &ConvLayer<T>,
    upstream: &Tensor4<T>,
    want_input: bool,
    gw: &mut [T],
    gb: &mut [T],
    cols: &mut Vec<T>,
) -> Result<Option<Tensor4<T>>> {
    check_input(input, layer)?;
    let [batch, _, h, w] = input.shape();
    if upstream.shape() != [batch, layer.out_channels, h, w] {
        return Err(Error::invalid(format!(
            "upstream gradient shape {:?} does not match layer output",
            upstream.shape()
        )));
    }
    let n = h * w;
    let k = layer.patch_len();
    let mut grad_in = want_input.then(|| Tensor4::zeros(input.shape()));
    let mut dcols = Vec::new();
    for bi in 0..batch {
        let g = upstream.item(bi);
        for (o, chunk) in g.chunks_exact(n).enumerate() {
            let mut s = T::zero();
            for &v in chunk {
                s += v;
            }
            gb[o] += s;
        }
        if layer.out_channels <= DIRECT_MAX_OUT {
            let gi = grad_in.as_mut().map(|t| t.item_mut(bi));
            direct_backward(input.item(bi), layer, h, w, g, gw, gi, cols);
            continue;
        }
        let rows = block_rows(layer, w);
        for y0 in (0..h).step_by(rows) {
            let y1 = (y0 + rows).min(h);
            let nb = (y1 - y0) * w;
            let g_block = Mat { data: &g[y0 * w..], ld: n };
            im2col(input.item(bi), layer, h, w, (y0, y1), cols);
            matmul_bt_acc(layer.out_channels, nb, k, g_block, Mat { data: &cols[..], ld: nb }, gw);
            if let Some(gi) = grad_in.as_mut() {
                dcols.resize(k * nb, T::zero());
                let weights = Mat { data: &layer.weights[..], ld: k };
                matmul_at(layer.out_channels, k, nb, weights, g_block, &mut dcols);
                col2im(&dcols[..k * nb], layer, h, w, (y0, y1), gi.item_mut(bi));
            }
        }
    }
    Ok(grad_in)
}

pub fn conv2d_backward<T: Real>(
    input: &Tensor4<T>,
    layer: &ConvLayer<T>,
    upstream: &Tensor4<T>,
) -> Result<ConvGrads<T>> {
    let mut gw = vec![T::zero(); layer.weights.len()];
    let mut gb = vec![T::zero(); layer.bias.len()];
    let gi = backward_with(input, layer, upstream, true, &mut gw, &mut gb, &mut Vec::new())?
        .expect("input gradient requested");
    Ok(ConvGrads {
        input: gi,
        weights: gw,
        bias: gb,
    })
}
