use rand::Rng;

use super::{init_uniform, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::activation::{relu_backward_in_place, relu_in_place};
use crate::tensor::{linear_backward_raw, linear_raw, ConvGeom, Tensor};

pub const IMAGE_SIDE: usize = 28;
pub const NUM_OUTPUTS: usize = 11;
/// Logit index reserved for generated samples.
pub const FAKE_CLASS: usize = 10;

const CONV1_W: usize = 0;
const CONV1_B: usize = 1;
const CONV2_W: usize = 2;
const CONV2_B: usize = 3;
const FC1_W: usize = 4;
const FC1_B: usize = 5;
const FC2_W: usize = 6;
const FC2_B: usize = 7;

/// Channel counts of the classifier. `standard()` is 32 / 64 / 200; smaller
/// widths exist for gradient checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscriminatorWidths {
    pub conv1: usize,
    pub conv2: usize,
    pub hidden: usize,
}

impl DiscriminatorWidths {
    pub const fn standard() -> Self {
        Self {
            conv1: 32,
            conv2: 64,
            hidden: 200,
        }
    }

    pub fn flatten(&self) -> usize {
        self.conv2 * 7 * 7
    }

    fn geoms(&self) -> (ConvGeom, ConvGeom) {
        let c1 = ConvGeom::conv(1, IMAGE_SIDE, IMAGE_SIDE, self.conv1, 3, 2, 1).expect("static geometry");
        let c2 = ConvGeom::conv(self.conv1, c1.map_h, c1.map_w, self.conv2, 3, 2, 1).expect("static geometry");
        (c1, c2)
    }

    fn layout(&self) -> Vec<(&'static str, Vec<usize>, usize)> {
        vec![
            ("conv1.weight", vec![self.conv1, 1, 3, 3], 9),
            ("conv1.bias", vec![self.conv1], 9),
            ("conv2.weight", vec![self.conv2, self.conv1, 3, 3], self.conv1 * 9),
            ("conv2.bias", vec![self.conv2], self.conv1 * 9),
            ("fc1.weight", vec![self.hidden, self.flatten()], self.flatten()),
            ("fc1.bias", vec![self.hidden], self.flatten()),
            ("fc2.weight", vec![NUM_OUTPUTS, self.hidden], self.hidden),
            ("fc2.bias", vec![NUM_OUTPUTS], self.hidden),
        ]
    }
}

/// The 11-way classifier shared through the federation:
/// conv(1→32, s2) → ReLU → conv(32→64, s2) → ReLU → fc(3136→200) → ReLU → fc(200→11).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorNet {
    widths: DiscriminatorWidths,
    params: ParamSet,
}

/// Activations saved by [`DiscriminatorNet::forward`]; consumed by the backward pass.
#[derive(Debug)]
pub struct DiscriminatorTape {
    input: Vec<f32>,
    h1: Vec<f32>,
    h2: Vec<f32>,
    h3: Vec<f32>,
}

/// Mutable weight/bias gradient slices of one layer, if gradients are wanted.
pub(crate) fn pair<'a>(
    grads: &'a mut Option<&mut ParamSet>,
    weight: usize,
    bias: usize,
) -> Option<(&'a mut [f32], &'a mut [f32])> {
    grads.as_deref_mut().map(|g| {
        let (w, b) = g.pair_mut(weight, bias);
        (w.data_mut(), b.data_mut())
    })
}

impl DiscriminatorNet {
    pub fn new(rng: &mut impl Rng) -> Self {
        Self::with_widths(DiscriminatorWidths::standard(), rng)
    }

    pub fn with_widths(widths: DiscriminatorWidths, rng: &mut impl Rng) -> Self {
        let params = init_uniform(&widths.layout(), rng);
        Self { widths, params }
    }

    pub fn zeros(widths: DiscriminatorWidths) -> Self {
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

    /// Wraps parameters after checking them against the standard architecture.
    pub fn from_params(params: ParamSet) -> Result<Self> {
        Self::from_params_with(DiscriminatorWidths::standard(), params)
    }

    pub fn from_params_with(widths: DiscriminatorWidths, params: ParamSet) -> Result<Self> {
        let reference = Self::zeros(widths);
        if let Some(why) = reference.params.layout_mismatch(&params) {
            return Err(Error::dim("discriminator", "discriminator layout", why));
        }
        Ok(Self { widths, params })
    }

    pub fn widths(&self) -> DiscriminatorWidths {
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

    pub fn forward(&self, image: &Tensor) -> Result<(Tensor, DiscriminatorTape)> {
        image.expect_shape("discriminator_forward", &[1, IMAGE_SIDE, IMAGE_SIDE])?;
        let (g1, g2) = self.widths.geoms();
        let p = &self.params;

        let mut h1 = vec![0.0; g1.map_len()];
        g1.forward(image.data(), p.tensor(CONV1_W).data(), p.tensor(CONV1_B).data(), &mut h1);
        relu_in_place(&mut h1);

        let mut h2 = vec![0.0; g2.map_len()];
        g2.forward(&h1, p.tensor(CONV2_W).data(), p.tensor(CONV2_B).data(), &mut h2);
        relu_in_place(&mut h2);

        let mut h3 = vec![0.0; self.widths.hidden];
        linear_raw(&h2, p.tensor(FC1_W).data(), p.tensor(FC1_B).data(), &mut h3);
        relu_in_place(&mut h3);

        let mut logits = vec![0.0; NUM_OUTPUTS];
        linear_raw(&h3, p.tensor(FC2_W).data(), p.tensor(FC2_B).data(), &mut logits);

        let tape = DiscriminatorTape {
            input: image.data().to_vec(),
            h1,
            h2,
            h3,
        };
        Ok((Tensor::vector(logits), tape))
    }

    /// Logits only, without keeping a tape.
    pub fn logits(&self, image: &Tensor) -> Result<Tensor> {
        self.forward(image).map(|(l, _)| l)
    }

    /// Backpropagates `grad_logits`. Parameter gradients are *added* into
    /// `grads` when given; the input gradient is returned when `want_input`.
    pub fn backward(
        &self,
        tape: DiscriminatorTape,
        grad_logits: &Tensor,
        mut grads: Option<&mut ParamSet>,
        want_input: bool,
    ) -> Result<Option<Tensor>> {
        grad_logits.expect_shape("discriminator_backward", &[NUM_OUTPUTS])?;
        if let Some(g) = grads.as_deref() {
            if !g.same_layout(&self.params) {
                return Err(Error::dim(
                    "discriminator_backward",
                    "gradient buffer matching the network",
                    g.layout_mismatch(&self.params).unwrap_or_default(),
                ));
            }
        }
        let (g1, g2) = self.widths.geoms();
        let p = &self.params;

        let mut gh3 = vec![0.0; self.widths.hidden];
        linear_backward_raw(
            grad_logits.data(),
            &tape.h3,
            p.tensor(FC2_W).data(),
            pair(&mut grads, FC2_W, FC2_B),
            Some(&mut gh3),
        );
        relu_backward_in_place(&mut gh3, &tape.h3);

        let mut gh2 = vec![0.0; g2.map_len()];
        linear_backward_raw(
            &gh3,
            &tape.h2,
            p.tensor(FC1_W).data(),
            pair(&mut grads, FC1_W, FC1_B),
            Some(&mut gh2),
        );
        relu_backward_in_place(&mut gh2, &tape.h2);

        let mut gh1 = vec![0.0; g1.map_len()];
        g2.backward(
            &gh2,
            &tape.h1,
            p.tensor(CONV2_W).data(),
            pair(&mut grads, CONV2_W, CONV2_B),
            Some(&mut gh1),
        );
        relu_backward_in_place(&mut gh1, &tape.h1);

        let mut g_input = want_input.then(|| vec![0.0; g1.img_len()]);
        g1.backward(
            &gh1,
            &tape.input,
            p.tensor(CONV1_W).data(),
            pair(&mut grads, CONV1_W, CONV1_B),
            g_input.as_deref_mut(),
        );
        Ok(g_input.map(|d| Tensor::new([1, IMAGE_SIDE, IMAGE_SIDE], d).expect("input shape")))
    }
}
