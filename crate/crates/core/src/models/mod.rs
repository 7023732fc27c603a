//! The two fixed networks: the 11-way classifier that doubles as the
//! attack's discriminator, and the noise-to-image generator.

mod discriminator;
mod generator;
mod params;

pub use discriminator::{
    DiscriminatorNet, DiscriminatorTape, DiscriminatorWidths, FAKE_CLASS, IMAGE_SIDE, NUM_OUTPUTS,
};
pub use generator::{GeneratorNet, GeneratorTape, GeneratorWidths, NOISE_DIM};
pub use params::ParamSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{adam_step, softmax_cross_entropy, AdamState, Tensor};

/// Every tensor drawn from `U(−1/sqrt(fan_in), 1/sqrt(fan_in))`, in layout order.
fn init_uniform(layout: &[(&'static str, Vec<usize>, usize)], rng: &mut impl Rng) -> ParamSet {
    let entries = layout
        .iter()
        .map(|(name, shape, fan_in)| {
            let bound = 1.0 / (*fan_in as f32).sqrt();
            let t = Tensor::from_fn(shape.clone(), |_| rng.gen_range(-bound..=bound));
            (name.to_string(), t)
        })
        .collect();
    ParamSet::new(entries).expect("unique names")
}

/// Adam state for every tensor of a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f32) -> Self {
        Self {
            states: params.tensors().map(|t| AdamState::new(t.shape(), lr)).collect(),
        }
    }

    pub fn lr(&self) -> f32 {
        self.states.first().map_or(0.0, |s| s.lr)
    }

    pub fn steps(&self) -> u32 {
        self.states.first().map_or(0, |s| s.t)
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        if self.states.len() != params.len() || !params.same_layout(grads) {
            return Err(Error::dim(
                "adam_step",
                format!("{} tensors matching the parameters", params.len()),
                params.layout_mismatch(grads).unwrap_or_else(|| format!("{} states", self.states.len())),
            ));
        }
        for ((p, g), s) in params.tensors_mut().zip(grads.tensors()).zip(&mut self.states) {
            adam_step(p, g, s)?;
        }
        Ok(())
    }
}

/// One optimizer step on the batch-averaged cross-entropy gradient.
/// Returns the mean loss over the batch (evaluated before the step).
pub fn train_batch(net: &mut DiscriminatorNet, batch: &[(&Tensor, usize)], opt: &mut Adam) -> Result<f32> {
    if batch.is_empty() {
        return Err(Error::Usage("train_batch: empty batch".into()));
    }
    let mut grads = net.params().zeros_like();
    let mut total = 0.0f32;
    for &(image, class) in batch {
        if class >= NUM_OUTPUTS {
            return Err(Error::Index {
                op: "train_batch",
                index: class,
                len: NUM_OUTPUTS,
            });
        }
        let (logits, tape) = net.forward(image)?;
        let (loss, grad) = softmax_cross_entropy(&logits, class)?;
        total += loss;
        net.backward(tape, &grad, Some(&mut grads), false)?;
    }
    let inv = 1.0 / batch.len() as f32;
    grads.scale(inv);
    opt.step(net.params_mut(), &grads)?;
    Ok(total * inv)
}
