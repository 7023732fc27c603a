//! The adversary: reuse the downloaded global model as a frozen discriminator,
//! train a generator toward the victim's class, then upload a local model
//! trained to label the generated images as the fake class.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{
    train_batch, Adam, DiscriminatorNet, GeneratorNet, ParamSet, FAKE_CLASS, NOISE_DIM,
};
use crate::rng::StreamRng;
use crate::tensor::{softmax_cross_entropy, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseKind {
    /// i.i.d. uniform on `[−1, 1]`.
    #[default]
    Uniform,
    /// i.i.d. standard normal.
    Gaussian,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Uniform => "uniform",
            NoiseKind::Gaussian => "gaussian",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(NoiseKind::Uniform),
            "gaussian" => Ok(NoiseKind::Gaussian),
            other => Err(format!("unknown noise `{other}` (uniform | gaussian)")),
        }
    }
}

pub fn sample_noise(rng: &mut impl Rng, n: usize, kind: NoiseKind) -> Vec<Tensor> {
    (0..n)
        .map(|_| {
            Tensor::from_fn([NOISE_DIM], |_| match kind {
                NoiseKind::Uniform => rng.gen_range(-1.0..=1.0),
                NoiseKind::Gaussian => rng.sample(StandardNormal),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub target_class: usize,
    pub lr_generator: f32,
    pub lr_discriminator: f32,
    /// Generator updates per round, each on one batch of fresh noise.
    pub gan_epochs: usize,
    pub batch_size: usize,
    /// Generated images the local model trains on per round.
    pub adversary_samples: usize,
    pub noise: NoiseKind,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            target_class: 1,
            lr_generator: 0.001,
            lr_discriminator: 0.005,
            gan_epochs: 500,
            batch_size: 16,
            adversary_samples: 5000,
            noise: NoiseKind::Uniform,
        }
    }
}

/// Everything the adversary keeps between rounds. The generator and both
/// optimizers persist for the whole experiment.
#[derive(Clone, Debug)]
pub struct AdversaryState {
    pub config: AttackConfig,
    pub generator: GeneratorNet,
    pub generator_opt: Adam,
    pub local: DiscriminatorNet,
    pub local_opt: Adam,
    noise_rng: StreamRng,
}

impl AdversaryState {
    pub fn new(config: AttackConfig, generator: GeneratorNet, local: DiscriminatorNet, noise_rng: StreamRng) -> Result<Self> {
        if config.target_class >= FAKE_CLASS {
            return Err(Error::Index {
                op: "AdversaryState::new",
                index: config.target_class,
                len: FAKE_CLASS,
            });
        }
        Ok(Self {
            generator_opt: Adam::new(generator.params(), config.lr_generator),
            local_opt: Adam::new(local.params(), config.lr_discriminator),
            config,
            generator,
            local,
            noise_rng,
        })
    }

    pub fn target_class(&self) -> usize {
        self.config.target_class
    }
}

/// Trains the generator so the frozen discriminator assigns its samples to
/// the target class. Returns the mean loss of the last update.
pub fn train_generator(adv: &mut AdversaryState, frozen: &ParamSet, epochs: usize, batch: usize) -> Result<f32> {
    if epochs == 0 || batch == 0 {
        return Err(Error::Usage("train_generator: epochs and batch must be >= 1".into()));
    }
    let disc = DiscriminatorNet::from_params(frozen.clone())?;
    let target = adv.config.target_class;
    let mut last = 0.0;
    for _ in 0..epochs {
        let noise = sample_noise(&mut adv.noise_rng, batch, adv.config.noise);
        let mut grads = adv.generator.params().zeros_like();
        let mut total = 0.0f32;
        for z in &noise {
            let (image, gtape) = adv.generator.forward(z)?;
            let (logits, dtape) = disc.forward(&image)?;
            let (loss, g_logits) = softmax_cross_entropy(&logits, target)?;
            total += loss;
            let g_image = disc
                .backward(dtape, &g_logits, None, true)?
                .expect("input gradient requested");
            adv.generator.backward(gtape, &g_image, Some(&mut grads), false)?;
        }
        let inv = 1.0 / batch as f32;
        grads.scale(inv);
        adv.generator_opt.step(adv.generator.params_mut(), &grads)?;
        last = total * inv;
    }
    Ok(last)
}

/// Mean generator loss against `frozen` on a fixed noise set; no state change.
pub fn generator_loss(adv: &AdversaryState, frozen: &ParamSet, noise: &[Tensor]) -> Result<f32> {
    let disc = DiscriminatorNet::from_params(frozen.clone())?;
    let mut total = 0.0;
    for z in noise {
        let logits = disc.logits(&adv.generator.generate(z)?)?;
        total += softmax_cross_entropy(&logits, adv.config.target_class)?.0;
    }
    Ok(total / noise.len().max(1) as f32)
}

/// One attack round: adopt the global model, train the generator against it,
/// then train the local copy to call `n_samples` generated images fake.
pub fn adversary_local_update(adv: &mut AdversaryState, global: &ParamSet, n_samples: usize) -> Result<ParamSet> {
    adv.local = DiscriminatorNet::from_params(global.clone())?;
    if n_samples == 0 {
        return Ok(global.clone());
    }
    train_generator(adv, global, adv.config.gan_epochs, adv.config.batch_size)?;
    let fakes = generate(&adv.generator, &mut adv.noise_rng, n_samples, adv.config.noise)?;
    for chunk in fakes.chunks(adv.config.batch_size.max(1)) {
        let batch: Vec<(&Tensor, usize)> = chunk.iter().map(|t| (t, FAKE_CLASS)).collect();
        train_batch(&mut adv.local, &batch, &mut adv.local_opt)?;
    }
    Ok(adv.local.params().clone())
}

fn generate(generator: &GeneratorNet, rng: &mut impl Rng, n: usize, kind: NoiseKind) -> Result<Vec<Tensor>> {
    sample_noise(rng, n, kind).iter().map(|z| generator.generate(z)).collect()
}

/// Fresh samples from the current generator using a caller-owned stream.
pub fn snapshot_reconstruction(adv: &AdversaryState, n: usize, rng: &mut impl Rng) -> Result<Vec<Tensor>> {
    generate(&adv.generator, rng, n, adv.config.noise)
}

/// Samples from the generator for a fixed noise set.
pub fn reconstruct_from_noise(adv: &AdversaryState, noise: &[Tensor]) -> Result<Vec<Tensor>> {
    noise.iter().map(|z| adv.generator.generate(z)).collect()
}
