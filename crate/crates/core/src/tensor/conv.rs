//! 2-D convolution and transposed convolution over a single `[C, H, W]` sample.
//!
//! Both layers share one geometry: an "image" side (conv input, transposed-conv
//! output) and a "map" side (conv output, transposed-conv input). Kernels are
//! stored as `[map_c, img_c, k, k]`, so a transposed convolution with kernel `K`
//! is exactly the input-gradient of the convolution with the same `K`.

use super::{axpy, dot, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub img_c: usize,
    pub img_h: usize,
    pub img_w: usize,
    pub map_c: usize,
    pub map_h: usize,
    pub map_w: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn conv(
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if stride == 0 || k == 0 || h + 2 * padding < k || w + 2 * padding < k {
            return Err(Error::dim(
                "conv2d",
                format!("stride >= 1 and padded input >= kernel {k}"),
                format!("input {h}x{w}, padding {padding}, stride {stride}"),
            ));
        }
        Ok(Self {
            img_c: c_in,
            img_h: h,
            img_w: w,
            map_c: c_out,
            map_h: (h + 2 * padding - k) / stride + 1,
            map_w: (w + 2 * padding - k) / stride + 1,
            k,
            stride,
            padding,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn transposed(
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self> {
        if stride == 0 || output_padding >= stride {
            return Err(Error::dim(
                "conv_transpose2d",
                "stride >= 1 and output_padding < stride",
                format!("stride {stride}, output_padding {output_padding}"),
            ));
        }
        let out_h = ((h - 1) * stride + k + output_padding).checked_sub(2 * padding);
        let out_w = ((w - 1) * stride + k + output_padding).checked_sub(2 * padding);
        match (out_h, out_w) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok(Self {
                img_c: c_out,
                img_h: oh,
                img_w: ow,
                map_c: c_in,
                map_h: h,
                map_w: w,
                k,
                stride,
                padding,
            }),
            _ => Err(Error::dim(
                "conv_transpose2d",
                "positive output extent",
                format!("input {h}x{w}, padding {padding}"),
            )),
        }
    }

    /// Rows of the column matrix: `img_c * k * k`.
    pub fn rows(&self) -> usize {
        self.img_c * self.k * self.k
    }

    pub fn positions(&self) -> usize {
        self.map_h * self.map_w
    }

    pub fn img_len(&self) -> usize {
        self.img_c * self.img_h * self.img_w
    }

    pub fn map_len(&self) -> usize {
        self.map_c * self.positions()
    }

    /// Source offset of the tap `(ky, kx)` for map position `(oy, ox)`, or
    /// `None` when it falls into the zero padding.
    #[inline]
    fn tap(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.stride + ky).checked_sub(self.padding)?;
        let ix = (ox * self.stride + kx).checked_sub(self.padding)?;
        (iy < self.img_h && ix < self.img_w).then_some((iy, ix))
    }

    pub fn im2col(&self, img: &[f32], col: &mut [f32]) {
        let p = self.positions();
        for c in 0..self.img_c {
            let plane = &img[c * self.img_h * self.img_w..(c + 1) * self.img_h * self.img_w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let r = (c * self.k + ky) * self.k + kx;
                    let row = &mut col[r * p..(r + 1) * p];
                    for oy in 0..self.map_h {
                        for ox in 0..self.map_w {
                            row[oy * self.map_w + ox] = match self.tap(oy, ox, ky, kx) {
                                Some((iy, ix)) => plane[iy * self.img_w + ix],
                                None => 0.0,
                            };
                        }
                    }
                }
            }
        }
    }

    pub fn col2im_add(&self, col: &[f32], img: &mut [f32]) {
        let p = self.positions();
        for c in 0..self.img_c {
            let plane = &mut img[c * self.img_h * self.img_w..(c + 1) * self.img_h * self.img_w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let r = (c * self.k + ky) * self.k + kx;
                    let row = &col[r * p..(r + 1) * p];
                    for oy in 0..self.map_h {
                        for ox in 0..self.map_w {
                            if let Some((iy, ix)) = self.tap(oy, ox, ky, kx) {
                                plane[iy * self.img_w + ix] += row[oy * self.map_w + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    /// `map[m, :] += sum_r kernel[m, r] * col[r, :]`
    fn kernel_times_col(&self, kernel: &[f32], col: &[f32], map: &mut [f32]) {
        let (p, rows) = (self.positions(), self.rows());
        for m in 0..self.map_c {
            let out = &mut map[m * p..(m + 1) * p];
            for r in 0..rows {
                axpy(out, kernel[m * rows + r], &col[r * p..(r + 1) * p]);
            }
        }
    }

    /// `col[r, :] += sum_m kernel[m, r] * map[m, :]`
    fn kernel_t_times_map(&self, kernel: &[f32], map: &[f32], col: &mut [f32]) {
        let (p, rows) = (self.positions(), self.rows());
        for m in 0..self.map_c {
            let src = &map[m * p..(m + 1) * p];
            for r in 0..rows {
                axpy(&mut col[r * p..(r + 1) * p], kernel[m * rows + r], src);
            }
        }
    }

    /// `grad_kernel[m, r] += dot(map[m, :], col[r, :])`
    fn accumulate_kernel_grad(&self, map: &[f32], col: &[f32], grad_kernel: &mut [f32]) {
        let (p, rows) = (self.positions(), self.rows());
        for m in 0..self.map_c {
            let a = &map[m * p..(m + 1) * p];
            for r in 0..rows {
                grad_kernel[m * rows + r] += dot(a, &col[r * p..(r + 1) * p]);
            }
        }
    }

    /// Convolution: image → map.
    pub fn forward(&self, img: &[f32], kernel: &[f32], bias: &[f32], map: &mut [f32]) {
        let p = self.positions();
        let mut col = vec![0.0; self.rows() * p];
        self.im2col(img, &mut col);
        for (m, &b) in bias.iter().enumerate() {
            map[m * p..(m + 1) * p].fill(b);
        }
        self.kernel_times_col(kernel, &col, map);
    }

    /// Accumulates kernel/bias gradients of the convolution and, when asked,
    /// the gradient with respect to the image.
    pub fn backward(
        &self,
        grad_map: &[f32],
        img: &[f32],
        kernel: &[f32],
        grads: Option<(&mut [f32], &mut [f32])>,
        grad_img: Option<&mut [f32]>,
    ) {
        let p = self.positions();
        let mut col = vec![0.0; self.rows() * p];
        if let Some((grad_kernel, grad_bias)) = grads {
            self.im2col(img, &mut col);
            for (m, gb) in grad_bias.iter_mut().enumerate() {
                *gb += grad_map[m * p..(m + 1) * p].iter().sum::<f32>();
            }
            self.accumulate_kernel_grad(grad_map, &col, grad_kernel);
            col.fill(0.0);
        }
        if let Some(grad_img) = grad_img {
            self.kernel_t_times_map(kernel, grad_map, &mut col);
            self.col2im_add(&col, grad_img);
        }
    }

    /// Transposed convolution: map → image.
    pub fn forward_transposed(&self, map: &[f32], kernel: &[f32], bias: &[f32], img: &mut [f32]) {
        let mut col = vec![0.0; self.rows() * self.positions()];
        self.kernel_t_times_map(kernel, map, &mut col);
        let plane = self.img_h * self.img_w;
        for (c, &b) in bias.iter().enumerate() {
            img[c * plane..(c + 1) * plane].fill(b);
        }
        self.col2im_add(&col, img);
    }

    pub fn backward_transposed(
        &self,
        grad_img: &[f32],
        map: &[f32],
        kernel: &[f32],
        grads: Option<(&mut [f32], &mut [f32])>,
        grad_map: Option<&mut [f32]>,
    ) {
        let mut col = vec![0.0; self.rows() * self.positions()];
        self.im2col(grad_img, &mut col);
        if let Some((grad_kernel, grad_bias)) = grads {
            let plane = self.img_h * self.img_w;
            for (c, gb) in grad_bias.iter_mut().enumerate() {
                *gb += grad_img[c * plane..(c + 1) * plane].iter().sum::<f32>();
            }
            self.accumulate_kernel_grad(map, &col, grad_kernel);
        }
        if let Some(grad_map) = grad_map {
            self.kernel_times_col(kernel, &col, grad_map);
        }
    }
}

/// Gradients of a convolution-type layer with respect to its input, kernel
/// and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

fn check_square_kernel(op: &'static str, kernel: &Tensor) -> Result<usize> {
    kernel.expect_rank(op, 4)?;
    let ks = kernel.shape();
    if ks[2] != ks[3] {
        return Err(Error::dim(op, "square kernel", format!("{ks:?}")));
    }
    Ok(ks[2])
}

fn conv_geom(op: &'static str, input: &Tensor, kernel: &Tensor, stride: usize, padding: usize) -> Result<ConvGeom> {
    input.expect_rank(op, 3)?;
    let k = check_square_kernel(op, kernel)?;
    let (is, ks) = (input.shape(), kernel.shape());
    if ks[1] != is[0] {
        return Err(Error::dim(
            op,
            format!("kernel [C_out, {}, k, k] for input {is:?}", is[0]),
            format!("kernel {ks:?}"),
        ));
    }
    ConvGeom::conv(is[0], is[1], is[2], ks[0], k, stride, padding)
}

fn transposed_geom(
    op: &'static str,
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<ConvGeom> {
    input.expect_rank(op, 3)?;
    let k = check_square_kernel(op, kernel)?;
    let (is, ks) = (input.shape(), kernel.shape());
    if ks[0] != is[0] {
        return Err(Error::dim(
            op,
            format!("kernel [{}, C_out, k, k] for input {is:?}", is[0]),
            format!("kernel {ks:?}"),
        ));
    }
    ConvGeom::transposed(is[0], is[1], is[2], ks[1], k, stride, padding, output_padding)
}

/// Cross-correlation of a `[C_in, H, W]` input with a `[C_out, C_in, k, k]`
/// kernel. Output extent is `(H + 2·padding − k) / stride + 1`.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = conv_geom("conv2d", input, kernel, stride, padding)?;
    bias.expect_shape("conv2d", &[g.map_c])?;
    let mut out = Tensor::zeros([g.map_c, g.map_h, g.map_w]);
    g.forward(input.data(), kernel.data(), bias.data(), out.data_mut());
    Ok(out)
}

pub fn conv2d_backward(
    grad_out: &Tensor,
    saved_input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads> {
    let g = conv_geom("conv2d_backward", saved_input, kernel, stride, padding)?;
    grad_out.expect_shape("conv2d_backward", &[g.map_c, g.map_h, g.map_w])?;
    let mut grads = ConvGrads {
        input: saved_input.zeros_like(),
        kernel: kernel.zeros_like(),
        bias: Tensor::zeros([g.map_c]),
    };
    g.backward(
        grad_out.data(),
        saved_input.data(),
        kernel.data(),
        Some((grads.kernel.data_mut(), grads.bias.data_mut())),
        Some(grads.input.data_mut()),
    );
    Ok(grads)
}

/// Transposed convolution of a `[C_in, H, W]` input with a `[C_in, C_out, k, k]`
/// kernel. Output extent is `(H − 1)·stride − 2·padding + k + output_padding`.
pub fn conv_transpose2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<Tensor> {
    let g = transposed_geom("conv_transpose2d", input, kernel, stride, padding, output_padding)?;
    bias.expect_shape("conv_transpose2d", &[g.img_c])?;
    let mut out = Tensor::zeros([g.img_c, g.img_h, g.img_w]);
    g.forward_transposed(input.data(), kernel.data(), bias.data(), out.data_mut());
    Ok(out)
}

pub fn conv_transpose2d_backward(
    grad_out: &Tensor,
    saved_input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<ConvGrads> {
    let g = transposed_geom(
        "conv_transpose2d_backward",
        saved_input,
        kernel,
        stride,
        padding,
        output_padding,
    )?;
    grad_out.expect_shape("conv_transpose2d_backward", &[g.img_c, g.img_h, g.img_w])?;
    let mut grads = ConvGrads {
        input: saved_input.zeros_like(),
        kernel: kernel.zeros_like(),
        bias: Tensor::zeros([g.img_c]),
    };
    g.backward_transposed(
        grad_out.data(),
        saved_input.data(),
        kernel.data(),
        Some((grads.kernel.data_mut(), grads.bias.data_mut())),
        Some(grads.input.data_mut()),
    );
    Ok(grads)
}
