use rand::Rng;

use super::discriminator::{pair, IMAGE_SIDE};
use super::{init_uniform, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::activation::{relu_backward_in_place, relu_in_place, tanh_backward_in_place};
use crate::tensor::{linear_backward_raw, linear_raw, ConvGeom, Tensor};

pub const NOISE_DIM: usize = 100;

const FC_W: usize = 0;
const FC_B: usize = 1;
const DECONV1_W: usize = 2;
const DECONV1_B: usize = 3;
const DECONV2_W: usize = 4;
const DECONV2_B: usize = 5;
const DECONV3_W: usize = 6;
const DECONV3_B: usize = 7;

/// Channel counts of the generator; `standard()` is 32 planes → 32 → 16 → 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorWidths {
    pub planes: usize,
    pub deconv1: usize,
    pub deconv2: usize,
}

impl GeneratorWidths {
    pub const fn standard() -> Self {
        Self {
            planes: 32,
            deconv1: 32,
            deconv2: 16,
        }
    }

    /// Width of the first linear layer's output, `planes · 7 · 7`.
    pub fn projection(&self) -> usize {
        self.planes * 7 * 7
    }

    fn geoms(&self) -> (ConvGeom, ConvGeom, ConvGeom) {
        let d1 = ConvGeom::transposed(self.planes, 7, 7, self.deconv1, 3, 2, 1, 1).expect("static geometry");
        let d2 = ConvGeom::transposed(self.deconv1, d1.img_h, d1.img_w, self.deconv2, 3, 2, 1, 1)
            .expect("static geometry");
        let d3 = ConvGeom::transposed(self.deconv2, d2.img_h, d2.img_w, 1, 3, 1, 1, 0).expect("static geometry");
        (d1, d2, d3)
    }

    fn layout(&self) -> Vec<(&'static str, Vec<usize>, usize)> {
        vec![
            ("fc.weight", vec![self.projection(), NOISE_DIM], NOISE_DIM),
            ("fc.bias", vec![self.projection()], NOISE_DIM),
            ("deconv1.weight", vec![self.planes, self.deconv1, 3, 3], self.planes * 9),
            ("deconv1.bias", vec![self.deconv1], self.planes * 9),
            ("deconv2.weight", vec![self.deconv1, self.deconv2, 3, 3], self.deconv1 * 9),
            ("deconv2.bias", vec![self.deconv2], self.deconv1 * 9),
            ("deconv3.weight", vec![self.deconv2, 1, 3, 3], self.deconv2 * 9),
            ("deconv3.bias", vec![1], self.deconv2 * 9),
        ]
    }
}

/// Noise-to-image network: fc(100→1568) → ReLU → reshape 32×7×7 →
/// deconv(s2) → ReLU → deconv(s2) → ReLU → deconv(s1) → Tanh, giving 1×28×28.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    widths: GeneratorWidths,
    params: ParamSet,
}

#[derive(Debug)]
pub struct GeneratorTape {
    z: Vec<f32>,
    f: Vec<f32>,
    d1: Vec<f32>,
    d2: Vec<f32>,
    out: Vec<f32>,
}

impl GeneratorNet {
    pub fn new(rng: &mut impl Rng) -> Self {
        Self::with_widths(GeneratorWidths::standard(), rng)
    }

    pub fn with_widths(widths: GeneratorWidths, rng: &mut impl Rng) -> Self {
        Self {
            widths,
            params: init_uniform(&widths.layout(), rng),
        }
    }

    pub fn zeros(widths: GeneratorWidths) -> Self {
        let entries = widths
            .layout()
            .into_iter()
            .map(|(n, s, _)| (n.to_string(), Tensor::zeros(s)))
            .collect();
        Self {
            widths,
            params: ParamSet::new(entries).expect("unique names"),
        }
    }

    pub fn from_params(params: ParamSet) -> Result<Self> {
        let reference = Self::zeros(GeneratorWidths::standard());
        if let Some(why) = reference.params.layout_mismatch(&params) {
            return Err(Error::dim("generator", "generator layout", why));
        }
        Ok(Self {
            widths: GeneratorWidths::standard(),
            params,
        })
    }

    pub fn widths(&self) -> GeneratorWidths {
        self.widths
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    pub fn forward(&self, z: &Tensor) -> Result<(Tensor, GeneratorTape)> {
        z.expect_shape("generator_forward", &[NOISE_DIM])?;
        let (g1, g2, g3) = self.widths.geoms();
        let p = &self.params;

        let mut f = vec![0.0; self.widths.projection()];
        linear_raw(z.data(), p.tensor(FC_W).data(), p.tensor(FC_B).data(), &mut f);
        relu_in_place(&mut f);

        let mut d1 = vec![0.0; g1.img_len()];
        g1.forward_transposed(&f, p.tensor(DECONV1_W).data(), p.tensor(DECONV1_B).data(), &mut d1);
        relu_in_place(&mut d1);

        let mut d2 = vec![0.0; g2.img_len()];
        g2.forward_transposed(&d1, p.tensor(DECONV2_W).data(), p.tensor(DECONV2_B).data(), &mut d2);
        relu_in_place(&mut d2);

        let mut out = vec![0.0; g3.img_len()];
        g3.forward_transposed(&d2, p.tensor(DECONV3_W).data(), p.tensor(DECONV3_B).data(), &mut out);
        out.iter_mut().for_each(|v| *v = v.tanh());

        let image = Tensor::new([1, IMAGE_SIDE, IMAGE_SIDE], out.clone()).expect("output shape");
        let tape = GeneratorTape {
            z: z.data().to_vec(),
            f,
            d1,
            d2,
            out,
        };
        Ok((image, tape))
    }

    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        self.forward(z).map(|(img, _)| img)
    }

    /// Spatial shape after each stage, for inspection.
    pub fn shape_trace(&self) -> Vec<Vec<usize>> {
        let (g1, g2, g3) = self.widths.geoms();
        vec![
            vec![self.widths.projection()],
            vec![self.widths.planes, 7, 7],
            vec![g1.img_c, g1.img_h, g1.img_w],
            vec![g2.img_c, g2.img_h, g2.img_w],
            vec![g3.img_c, g3.img_h, g3.img_w],
        ]
    }

    /// Backpropagates a gradient on the output image. Parameter gradients are
    /// added into `grads`; returns the gradient with respect to `z` when asked.
    pub fn backward(
        &self,
        tape: GeneratorTape,
        grad_image: &Tensor,
        mut grads: Option<&mut ParamSet>,
        want_noise: bool,
    ) -> Result<Option<Tensor>> {
        grad_image.expect_shape("generator_backward", &[1, IMAGE_SIDE, IMAGE_SIDE])?;
        if let Some(g) = grads.as_deref() {
            if !g.same_layout(&self.params) {
                return Err(Error::dim(
                    "generator_backward",
                    "gradient buffer matching the network",
                    g.layout_mismatch(&self.params).unwrap_or_default(),
                ));
            }
        }
        let (g1, g2, g3) = self.widths.geoms();
        let p = &self.params;

        let mut g_out = grad_image.data().to_vec();
        tanh_backward_in_place(&mut g_out, &tape.out);

        let mut gd2 = vec![0.0; g3.map_len()];
        g3.backward_transposed(
            &g_out,
            &tape.d2,
            p.tensor(DECONV3_W).data(),
            pair(&mut grads, DECONV3_W, DECONV3_B),
            Some(&mut gd2),
        );
        relu_backward_in_place(&mut gd2, &tape.d2);

        let mut gd1 = vec![0.0; g2.map_len()];
        g2.backward_transposed(
            &gd2,
            &tape.d1,
            p.tensor(DECONV2_W).data(),
            pair(&mut grads, DECONV2_W, DECONV2_B),
            Some(&mut gd1),
        );
        relu_backward_in_place(&mut gd1, &tape.d1);

        let mut gf = vec![0.0; g1.map_len()];
        g1.backward_transposed(
            &gd1,
            &tape.f,
            p.tensor(DECONV1_W).data(),
            pair(&mut grads, DECONV1_W, DECONV1_B),
            Some(&mut gf),
        );
        relu_backward_in_place(&mut gf, &tape.f);

        let mut gz = want_noise.then(|| vec![0.0; NOISE_DIM]);
        linear_backward_raw(
            &gf,
            &tape.z,
            p.tensor(FC_W).data(),
            pair(&mut grads, FC_W, FC_B),
            gz.as_deref_mut(),
        );
        Ok(gz.map(Tensor::vector))
    }
}
