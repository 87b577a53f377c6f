//! Dense numeric kernels behind the graph ops.
//!
//! All kernels take explicit dimensions and flat row-major slices. Batched
//! layouts are `[batch, features]` for dense and `[batch, channels, h, w]`
//! for the spatial ops.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_len(&self) -> usize {
        self.out_height() * self.out_width()
    }
}

/// `y[b, o] = sum_i x[b, i] * w[o, i] + bias[o]`
pub fn dense_forward<T: Scalar>(x: &[T], w: &[T], bias: &[T], batch: usize, inp: usize, out: usize) -> Vec<T> {
    let mut y = Vec::with_capacity(batch * out);
    for _ in 0..batch {
        y.extend_from_slice(bias);
    }
    T::gemm(
        batch,
        inp,
        out,
        T::one(),
        x,
        (inp as isize, 1),
        w,
        (1, inp as isize),
        T::one(),
        &mut y,
        (out as isize, 1),
    );
    y
}

/// Accumulates `dx`, `dw`, `dbias` for the dense op; any target may be skipped.
#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Scalar>(
    g: &[T],
    x: &[T],
    w: &[T],
    batch: usize,
    inp: usize,
    out: usize,
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    dbias: Option<&mut [T]>,
) {
    if let Some(dx) = dx {
        T::gemm(batch, out, inp, T::one(), g, (out as isize, 1), w, (inp as isize, 1), T::one(), dx, (inp as isize, 1));
    }
    if let Some(dw) = dw {
        T::gemm(out, batch, inp, T::one(), g, (1, out as isize), x, (inp as isize, 1), T::one(), dw, (inp as isize, 1));
    }
    if let Some(db) = dbias {
        for row in g.chunks_exact(out) {
            for (d, &v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
    }
}

/// Gather table mapping every im2col cell to an offset in the zero-padded
/// input planes. Depends only on the geometry, so callers may cache it.
#[derive(Clone, Debug)]
pub struct ConvPlan {
    geom: ConvGeom,
    idx: Vec<u32>,
    ph: usize,
    pw: usize,
}

impl ConvPlan {
    pub fn new(geom: &ConvGeom) -> Self {
        let (ho, wo) = (geom.out_height(), geom.out_width());
        let (ph, pw) = (geom.height + 2 * geom.padding, geom.width + 2 * geom.padding);
        let mut idx = Vec::with_capacity(geom.patch_len() * ho * wo);
        for c in 0..geom.in_channels {
            for ki in 0..geom.kernel_h {
                for kj in 0..geom.kernel_w {
                    for oy in 0..ho {
                        let row = (c * ph + oy * geom.stride + ki) * pw;
                        for ox in 0..wo {
                            idx.push((row + ox * geom.stride + kj) as u32);
                        }
                    }
                }
            }
        }
        Self { geom: *geom, idx, ph, pw }
    }

    pub fn geom(&self) -> &ConvGeom {
        &self.geom
    }

    /// Length of one sample's column matrix.
    pub fn cols_len(&self) -> usize {
        self.idx.len()
    }

    fn padded_len(&self) -> usize {
        self.geom.in_channels * self.ph * self.pw
    }

    fn im2col<T: Scalar>(&self, x: &[T], padded: &mut [T], cols: &mut [T]) {
        let (h, w, p) = (self.geom.height, self.geom.width, self.geom.padding);
        for c in 0..self.geom.in_channels {
            for y in 0..h {
                let dst = (c * self.ph + y + p) * self.pw + p;
                padded[dst..dst + w].copy_from_slice(&x[(c * h + y) * w..(c * h + y + 1) * w]);
            }
        }
        assert!(padded.len() >= self.padded_len() && cols.len() >= self.idx.len());
        for (dst, &i) in cols.iter_mut().zip(&self.idx) {
            // SAFETY: every index was built below `padded_len()` in `new`,
            // and `padded` is at least that long (asserted above).
            *dst = unsafe { *padded.get_unchecked(i as usize) };
        }
    }

    /// Adds the transpose of [`Self::im2col`] applied to `cols` into `dx`.
    fn col2im_add<T: Scalar>(&self, cols: &[T], padded: &mut [T], dx: &mut [T]) {
        assert!(padded.len() >= self.padded_len());
        padded.fill(T::zero());
        for (&v, &i) in cols.iter().zip(&self.idx) {
            // SAFETY: as in `im2col`.
            unsafe { *padded.get_unchecked_mut(i as usize) += v };
        }
        let (h, w, p) = (self.geom.height, self.geom.width, self.geom.padding);
        for c in 0..self.geom.in_channels {
            for y in 0..h {
                let src = (c * self.ph + y + p) * self.pw + p;
                for (d, &v) in dx[(c * h + y) * w..(c * h + y + 1) * w].iter_mut().zip(&padded[src..src + w]) {
                    *d += v;
                }
            }
        }
    }
}

/// Zero-padded strided 2D convolution (cross-correlation).
pub fn conv2d_forward<T: Scalar>(x: &[T], w: &[T], bias: &[T], batch: usize, geom: &ConvGeom) -> Vec<T> {
    let plan = ConvPlan::new(geom);
    let mut cols = vec![T::zero(); plan.cols_len()];
    conv2d_forward_planned(&plan, x, w, bias, batch, &mut cols, false)
}

/// Forward with a prepared plan. With `keep_cols`, `cols` must hold
/// `batch * plan.cols_len()` values and receives every sample's column
/// matrix for reuse by [`conv2d_backward_planned`]; otherwise one sample's
/// worth of scratch is enough.
pub fn conv2d_forward_planned<T: Scalar>(
    plan: &ConvPlan,
    x: &[T],
    w: &[T],
    bias: &[T],
    batch: usize,
    cols: &mut [T],
    keep_cols: bool,
) -> Vec<T> {
    let geom = &plan.geom;
    let in_len = geom.in_channels * geom.height * geom.width;
    let (k, n, o) = (geom.patch_len(), geom.out_len(), geom.out_channels);
    let mut padded = vec![T::zero(); plan.padded_len()];
    let mut y = vec![T::zero(); batch * o * n];
    for b in 0..batch {
        let cb = if keep_cols { &mut cols[b * k * n..(b + 1) * k * n] } else { &mut cols[..k * n] };
        plan.im2col(&x[b * in_len..(b + 1) * in_len], &mut padded, cb);
        let yb = &mut y[b * o * n..(b + 1) * o * n];
        for (oc, row) in yb.chunks_exact_mut(n).enumerate() {
            row.fill(bias[oc]);
        }
        T::gemm(o, k, n, T::one(), w, (k as isize, 1), cb, (n as isize, 1), T::one(), yb, (n as isize, 1));
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    g: &[T],
    x: &[T],
    w: &[T],
    batch: usize,
    geom: &ConvGeom,
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    dbias: Option<&mut [T]>,
) {
    let plan = ConvPlan::new(geom);
    conv2d_backward_planned(&plan, g, ConvSource::Input(x), w, batch, dx, dw, dbias);
}

/// Where the backward pass gets column matrices for the weight gradient.
pub enum ConvSource<'a, T> {
    /// Raw input; columns are rebuilt per sample.
    Input(&'a [T]),
    /// All samples' columns as kept by the forward pass.
    Cols(&'a [T]),
}

#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_planned<T: Scalar>(
    plan: &ConvPlan,
    g: &[T],
    source: ConvSource<'_, T>,
    w: &[T],
    batch: usize,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    dbias: Option<&mut [T]>,
) {
    let geom = &plan.geom;
    let in_len = geom.in_channels * geom.height * geom.width;
    let (k, n, o) = (geom.patch_len(), geom.out_len(), geom.out_channels);
    // im2col relies on zero borders, which col2im_add overwrites
    let mut padded = vec![T::zero(); plan.padded_len()];
    let mut scatter = vec![T::zero(); plan.padded_len()];
    let mut cols = vec![T::zero(); k * n];
    for b in 0..batch {
        let gb = &g[b * o * n..(b + 1) * o * n];
        if let Some(dw) = dw.as_deref_mut() {
            let cb: &[T] = match source {
                ConvSource::Cols(all) => &all[b * k * n..(b + 1) * k * n],
                ConvSource::Input(x) => {
                    plan.im2col(&x[b * in_len..(b + 1) * in_len], &mut padded, &mut cols);
                    &cols
                }
            };
            T::gemm(o, n, k, T::one(), gb, (n as isize, 1), cb, (1, n as isize), T::one(), dw, (k as isize, 1));
        }
        if let Some(dx) = dx.as_deref_mut() {
            T::gemm(k, o, n, T::one(), w, (1, k as isize), gb, (n as isize, 1), T::zero(), &mut cols, (n as isize, 1));
            plan.col2im_add(&cols, &mut scatter, &mut dx[b * in_len..(b + 1) * in_len]);
        }
    }
    if let Some(db) = dbias {
        for gb in g.chunks_exact(o * n) {
            for (d, row) in db.iter_mut().zip(gb.chunks_exact(n)) {
                *d += row.iter().copied().sum::<T>();
            }
        }
    }
}

/// Nearest-neighbour x2 upsampling of `planes` planes of `h x w`.
pub fn upsample2_forward<T: Scalar>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let mut y = vec![T::zero(); planes * 4 * h * w];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut y[p * 4 * h * w..(p + 1) * 4 * h * w];
        for i in 0..2 * h {
            for j in 0..2 * w {
                dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
            }
        }
    }
    y
}

pub fn upsample2_backward<T: Scalar>(g: &[T], planes: usize, h: usize, w: usize, dx: &mut [T]) {
    for p in 0..planes {
        let src = &g[p * 4 * h * w..(p + 1) * 4 * h * w];
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for i in 0..2 * h {
            for j in 0..2 * w {
                dst[(i / 2) * w + j / 2] += src[i * 2 * w + j];
            }
        }
    }
}

/// Gradient of the reversal node: `-lambda * upstream`.
pub fn grl_backward<T: Scalar>(upstream: &[T], lambda: T) -> Vec<T> {
    upstream.iter().map(|&g| -(lambda * g)).collect()
}

/// Outer/inner split used by concat along `axis`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis..].iter().product();
    (outer, inner)
}
