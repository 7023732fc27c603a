//! Browser bindings: classify a drawn digit, invert a trained model into
//! class images, and explore ROC curves.

use fedleak::attack::{reconstruct_from_noise, sample_noise, train_generator, AdversaryState, AttackConfig};
use fedleak::data::{byte_to_unit, unit_to_byte};
use fedleak::metrics::roc_auc;
use fedleak::models::{DiscriminatorNet, GeneratorNet, ParamSet, FAKE_CLASS, IMAGE_SIDE};
use fedleak::rng::{stream, Purpose};
use fedleak::runner::checkpoint_from_bytes;
use fedleak::tensor::softmax;
use fedleak::Tensor;
use wasm_bindgen::prelude::*;

const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

fn js(e: fedleak::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn load_net(checkpoint: &[u8]) -> fedleak::Result<DiscriminatorNet> {
    DiscriminatorNet::from_params(checkpoint_from_bytes(checkpoint)?)
}

fn image_from_bytes(pixels: &[u8]) -> fedleak::Result<Tensor> {
    if pixels.len() != PIXELS {
        return Err(fedleak::Error::Usage(format!(
            "expected {PIXELS} grayscale bytes, got {}",
            pixels.len()
        )));
    }
    Tensor::new([1, IMAGE_SIDE, IMAGE_SIDE], pixels.iter().map(|&b| byte_to_unit(b)).collect())
}

/// A global model loaded from a checkpoint.
#[wasm_bindgen]
pub struct Classifier {
    net: DiscriminatorNet,
}

impl Classifier {
    pub fn from_checkpoint(checkpoint: &[u8]) -> fedleak::Result<Classifier> {
        Ok(Classifier {
            net: load_net(checkpoint)?,
        })
    }

    /// Softmax over all 11 outputs for a 28×28 grayscale image, white ink on
    /// black, row-major.
    pub fn class_probabilities(&self, pixels: &[u8]) -> fedleak::Result<Vec<f32>> {
        Ok(softmax(&self.net.logits(&image_from_bytes(pixels)?)?).into_data())
    }
}

#[wasm_bindgen]
impl Classifier {
    #[wasm_bindgen(constructor)]
    pub fn new(checkpoint: &[u8]) -> Result<Classifier, JsError> {
        Classifier::from_checkpoint(checkpoint).map_err(js)
    }

    pub fn probabilities(&self, pixels: &[u8]) -> Result<Vec<f32>, JsError> {
        self.class_probabilities(pixels).map_err(js)
    }

    #[wasm_bindgen(js_name = fakeClass)]
    pub fn fake_class() -> u32 {
        FAKE_CLASS as u32
    }
}

/// Trains a generator against a frozen model, one call at a time, so the
/// page can redraw between updates.
#[wasm_bindgen]
pub struct Inverter {
    adversary: AdversaryState,
    frozen: ParamSet,
    preview: Vec<Tensor>,
    updates: u32,
    last_loss: f32,
}

impl Inverter {
    pub fn build(checkpoint: &[u8], target: usize, preview: usize, seed: u64) -> fedleak::Result<Inverter> {
        let net = load_net(checkpoint)?;
        let frozen = net.params().clone();
        let config = AttackConfig {
            target_class: target,
            ..AttackConfig::default()
        };
        let noise = sample_noise(&mut stream(seed, Purpose::Reconstruction, &[]), preview.max(1), config.noise);
        let generator = GeneratorNet::new(&mut stream(seed, Purpose::AdversaryInit, &[]));
        let adversary = AdversaryState::new(config, generator, net, stream(seed, Purpose::AdversaryNoise, &[]))?;
        Ok(Inverter {
            adversary,
            frozen,
            preview: noise,
            updates: 0,
            last_loss: f32::NAN,
        })
    }

    pub fn train(&mut self, updates: usize) -> fedleak::Result<f32> {
        let batch = self.adversary.config.batch_size;
        self.last_loss = train_generator(&mut self.adversary, &self.frozen, updates, batch)?;
        self.updates += updates as u32;
        Ok(self.last_loss)
    }

    /// Preview images as consecutive 784-byte grayscale frames.
    pub fn preview_bytes(&self) -> fedleak::Result<Vec<u8>> {
        Ok(reconstruct_from_noise(&self.adversary, &self.preview)?
            .iter()
            .flat_map(|im| im.data().iter().map(|&v| unit_to_byte(v)))
            .collect())
    }
}

#[wasm_bindgen]
impl Inverter {
    #[wasm_bindgen(constructor)]
    pub fn new(checkpoint: &[u8], target: u32, preview: u32, seed: u32) -> Result<Inverter, JsError> {
        Inverter::build(checkpoint, target as usize, preview as usize, seed as u64).map_err(js)
    }

    /// Runs `updates` generator updates and returns the last loss.
    pub fn step(&mut self, updates: u32) -> Result<f32, JsError> {
        self.train(updates.max(1) as usize).map_err(js)
    }

    pub fn samples(&self) -> Result<Vec<u8>, JsError> {
        self.preview_bytes().map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn updates(&self) -> u32 {
        self.updates
    }

    #[wasm_bindgen(getter)]
    pub fn loss(&self) -> f32 {
        self.last_loss
    }
}

/// Result of [`roc`]: the curve as parallel coordinate arrays plus its area.
#[wasm_bindgen]
pub struct Roc {
    fpr: Vec<f64>,
    tpr: Vec<f64>,
    auc: f64,
}

#[wasm_bindgen]
impl Roc {
    #[wasm_bindgen(getter)]
    pub fn fpr(&self) -> Vec<f64> {
        self.fpr.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn tpr(&self) -> Vec<f64> {
        self.tpr.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn auc(&self) -> f64 {
        self.auc
    }
}

pub fn roc_points(scores: &[f64], labels: &[u8]) -> fedleak::Result<Roc> {
    if scores.len() != labels.len() {
        return Err(fedleak::Error::Usage(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives: Vec<bool> = labels.iter().map(|&l| l != 0).collect();
    let curve = roc_auc(scores, &positives)?;
    let (fpr, tpr) = curve.points.iter().copied().unzip();
    Ok(Roc {
        fpr,
        tpr,
        auc: curve.auc,
    })
}

/// ROC curve of `scores` against 0/1 `labels`.
#[wasm_bindgen]
pub fn roc(scores: &[f64], labels: &[u8]) -> Result<Roc, JsError> {
    roc_points(scores, labels).map_err(js)
}
