//! Round engine: download → local training → upload → average → validate.

use rand::seq::index;
use rand::Rng;

use crate::attack::{adversary_local_update, AdversaryState};
use crate::data::{LabeledImage, Partition, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::metrics::{confusion, macro_scores, roc_auc, RocCurve, RoundRecord};
use crate::models::{train_batch, Adam, DiscriminatorNet, ParamSet};
use crate::rng::{stream, Purpose};
use crate::tensor::{softmax, Tensor};

/// Holds the global model between rounds.
#[derive(Clone, Debug)]
pub struct ParameterServer {
    global: ParamSet,
    round: u64,
}

impl ParameterServer {
    pub fn new(global: ParamSet) -> Self {
        Self { global, round: 0 }
    }

    pub fn global(&self) -> &ParamSet {
        &self.global
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Replaces the global model; the layout must not change.
    pub fn install(&mut self, params: ParamSet) -> Result<()> {
        if let Some(why) = self.global.layout_mismatch(&params) {
            return Err(Error::Aggregation {
                client: usize::MAX,
                reason: why,
            });
        }
        self.global = params;
        self.round += 1;
        Ok(())
    }
}

/// Elementwise mean of the uploads.
pub fn aggregate(uploads: &[ParamSet]) -> Result<ParamSet> {
    let first = uploads
        .first()
        .ok_or_else(|| Error::Usage("aggregate: no uploads".into()))?;
    for (client, up) in uploads.iter().enumerate().skip(1) {
        if let Some(why) = first.layout_mismatch(up) {
            return Err(Error::Aggregation { client, reason: why });
        }
    }
    if uploads.len() == 1 {
        return Ok(first.clone());
    }
    // f64 accumulation keeps the mean of identical copies exact.
    let n = uploads.len() as f64;
    let mut mean = first.clone();
    for (idx, out) in mean.tensors_mut().enumerate() {
        let mut acc: Vec<f64> = vec![0.0; out.len()];
        for up in uploads {
            acc.iter_mut().zip(up.tensor(idx).data()).for_each(|(a, &v)| *a += v as f64);
        }
        out.data_mut().iter_mut().zip(&acc).for_each(|(o, &a)| *o = (a / n) as f32);
    }
    Ok(mean)
}

/// Strict comparison: the attack starts only when accuracy is *better than*
/// the threshold.
pub fn attack_gate(validation_accuracy: f64, threshold: f64) -> bool {
    validation_accuracy > threshold
}

/// [`attack_gate`] with latching: once open it stays open.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackGate {
    threshold: f64,
    latched_at: Option<u64>,
}

impl AttackGate {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            latched_at: None,
        }
    }

    pub fn observe(&mut self, round: u64, accuracy: f64) -> bool {
        if self.latched_at.is_none() && attack_gate(accuracy, self.threshold) {
            self.latched_at = Some(round);
        }
        self.is_open()
    }

    pub fn is_open(&self) -> bool {
        self.latched_at.is_some()
    }

    pub fn latched_at(&self) -> Option<u64> {
        self.latched_at
    }
}

/// Hyperparameters of benign local training.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTraining {
    pub lr: f32,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub images_per_round: usize,
}

impl Default for LocalTraining {
    fn default() -> Self {
        Self {
            lr: 0.005,
            batch_size: 16,
            local_epochs: 1,
            images_per_round: 50,
        }
    }
}

/// What a client knows about the round it is asked to train in.
#[derive(Clone, Copy, Debug)]
pub struct RoundContext {
    /// 1-based index of the round being run.
    pub round: u64,
    pub master_seed: u64,
    pub attack_active: bool,
}

/// Anything that can take part in a round.
pub trait Participant: Send {
    fn id(&self) -> usize;
    fn local_update(&mut self, global: &ParamSet, ctx: &RoundContext) -> Result<ParamSet>;
}

#[derive(Debug)]
pub enum Role {
    Benign(Partition),
    Adversary(Box<AdversaryState>),
}

/// One participant. A benign client's partition is private to it; the
/// adversary holds no real data.
#[derive(Debug)]
pub struct ClientState {
    id: usize,
    role: Role,
    training: LocalTraining,
    optimizer: Option<Adam>,
}

impl ClientState {
    pub fn benign(id: usize, partition: Partition, training: LocalTraining) -> Self {
        Self {
            id,
            role: Role::Benign(partition),
            training,
            optimizer: None,
        }
    }

    pub fn adversary(id: usize, state: AdversaryState) -> Self {
        Self {
            id,
            role: Role::Adversary(Box::new(state)),
            training: LocalTraining::default(),
            optimizer: None,
        }
    }

    pub fn is_adversary(&self) -> bool {
        matches!(self.role, Role::Adversary(_))
    }

    pub fn owner_class(&self) -> Option<usize> {
        match &self.role {
            Role::Benign(p) => Some(p.owner_class),
            Role::Adversary(_) => None,
        }
    }

    pub fn adversary_state(&self) -> Option<&AdversaryState> {
        match &self.role {
            Role::Adversary(a) => Some(a),
            Role::Benign(_) => None,
        }
    }

    pub fn adversary_state_mut(&mut self) -> Option<&mut AdversaryState> {
        match &mut self.role {
            Role::Adversary(a) => Some(a),
            Role::Benign(_) => None,
        }
    }
}

impl Participant for ClientState {
    fn id(&self) -> usize {
        self.id
    }

    fn local_update(&mut self, global: &ParamSet, ctx: &RoundContext) -> Result<ParamSet> {
        match &mut self.role {
            Role::Benign(_) => {
                let mut rng = stream(ctx.master_seed, Purpose::ClientSampling, &[self.id as u64, ctx.round]);
                benign_local_update(self, global, &mut rng)
            }
            Role::Adversary(adv) if ctx.attack_active => {
                let n = adv.config.adversary_samples;
                adversary_local_update(adv, global, n)
            }
            // No data of its own before the attack: hand the model back untouched.
            Role::Adversary(_) => Ok(global.clone()),
        }
    }
}

/// Starts from `global`, samples `images_per_round` images of the client's
/// partition without replacement, and runs `local_epochs` passes over them in
/// batches of `batch_size` (the last batch may be smaller).
pub fn benign_local_update(client: &mut ClientState, global: &ParamSet, rng: &mut impl Rng) -> Result<ParamSet> {
    let partition = match &client.role {
        Role::Benign(p) => p,
        Role::Adversary(_) => {
            return Err(Error::Usage(format!(
                "benign_local_update called on adversary {}",
                client.id
            )))
        }
    };
    if partition.is_empty() {
        return Err(Error::Data(format!("client {} has an empty partition", client.id)));
    }
    let cfg = &client.training;
    let mut net = DiscriminatorNet::from_params(global.clone())?;
    let opt = client.optimizer.get_or_insert_with(|| Adam::new(global, cfg.lr));

    let take = cfg.images_per_round.min(partition.len());
    let chosen = index::sample(rng, partition.len(), take).into_vec();
    for _ in 0..cfg.local_epochs {
        for chunk in chosen.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<(&Tensor, usize)> = chunk
                .iter()
                .map(|&i| (&partition.samples[i].pixels, partition.samples[i].label))
                .collect();
            train_batch(&mut net, &batch, opt)?;
        }
    }
    Ok(net.into_params())
}

/// Validation output of the global model on held-out data.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub record: RoundRecord,
    /// One-vs-rest ROC curve per real class (`None` where undefined).
    pub roc: Vec<Option<RocCurve>>,
}

/// Argmax over all 11 logits (so fake-class predictions count as errors) and
/// per-class ROC on the softmax probabilities.
pub fn evaluate(global: &ParamSet, testset: &[LabeledImage], round: u64) -> Result<Evaluation> {
    let net = DiscriminatorNet::from_params(global.clone())?;
    let probs: Vec<Tensor> = map_in_order(testset, |s| net.logits(&s.pixels).map(|l| softmax(&l)))?;
    let y_true: Vec<usize> = testset.iter().map(|s| s.label).collect();
    let y_pred: Vec<usize> = probs.iter().map(Tensor::argmax).collect();
    let scores = macro_scores(&confusion(&y_true, &y_pred, NUM_CLASSES)?);
    let roc: Vec<Option<RocCurve>> = (0..NUM_CLASSES)
        .map(|c| {
            let s: Vec<f64> = probs.iter().map(|p| p.data()[c] as f64).collect();
            let pos: Vec<bool> = y_true.iter().map(|&t| t == c).collect();
            roc_auc(&s, &pos).ok()
        })
        .collect();
    Ok(Evaluation {
        record: RoundRecord {
            round,
            accuracy: scores.accuracy,
            macro_precision: scores.precision,
            macro_recall: scores.recall,
            f1: scores.f1,
            per_class_auc: roc.iter().map(|r| r.as_ref().map(|r| r.auc)).collect(),
            reconstruction_distance: None,
        },
        roc,
    })
}

/// Participation knob: the clients taking part in a round. `fraction >= 1`
/// selects everyone.
pub fn select_participants(n_clients: usize, fraction: f64, master_seed: u64, round: u64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..n_clients).collect();
    }
    let k = ((fraction * n_clients as f64).ceil() as usize).clamp(1, n_clients);
    let mut rng = stream(master_seed, Purpose::Selection, &[round]);
    let mut chosen = index::sample(&mut rng, n_clients, k).into_vec();
    chosen.sort_unstable();
    chosen
}

/// One full round. Returns the evaluation of the new global model.
pub fn run_round<P: Participant>(
    server: &mut ParameterServer,
    clients: &mut [P],
    testset: &[LabeledImage],
    ctx: &RoundContext,
    participation: f64,
) -> Result<Evaluation> {
    let selected = select_participants(clients.len(), participation, ctx.master_seed, ctx.round);
    let global = server.global().clone();
    let mut active: Vec<&mut P> = clients
        .iter_mut()
        .enumerate()
        .filter(|(i, _)| selected.binary_search(i).is_ok())
        .map(|(_, c)| c)
        .collect();
    let uploads: Vec<ParamSet> = update_in_order(&mut active, &global, ctx)?;
    for (up, client) in uploads.iter().zip(&active) {
        if let Some(why) = global.layout_mismatch(up) {
            return Err(Error::Aggregation {
                client: client.id(),
                reason: why,
            });
        }
    }
    server.install(aggregate(&uploads)?)?;
    evaluate(server.global(), testset, server.round())
}

#[cfg(feature = "parallel")]
fn map_in_order<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_in_order<T, U>(items: &[T], f: impl Fn(&T) -> Result<U>) -> Result<Vec<U>> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn update_in_order<P: Participant>(clients: &mut [&mut P], global: &ParamSet, ctx: &RoundContext) -> Result<Vec<ParamSet>> {
    use rayon::prelude::*;
    clients.par_iter_mut().map(|c| c.local_update(global, ctx)).collect()
}

#[cfg(not(feature = "parallel"))]
fn update_in_order<P: Participant>(clients: &mut [&mut P], global: &ParamSet, ctx: &RoundContext) -> Result<Vec<ParamSet>> {
    clients.iter_mut().map(|c| c.local_update(global, ctx)).collect()
}
