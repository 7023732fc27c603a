//! Scenario construction and the round loop.

use std::fs;
use std::path::{Path, PathBuf};

use crate::attack::{reconstruct_from_noise, sample_noise, AdversaryState};
use crate::data::{load_dataset, mean_image, partition_by_class, LabeledImage, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::federation::{run_round, AttackGate, ClientState, Evaluation, ParameterServer, RoundContext};
use crate::metrics::{distance_to_reference, RoundRecord};
use crate::models::{DiscriminatorNet, GeneratorNet, FAKE_CLASS};
use crate::rng::{stream, Purpose};
use crate::tensor::Tensor;

use super::config::{ExperimentConfig, Scenario};
use super::persist::{append_line, export_pgm, metrics_row, roc_csv, save_checkpoint, METRICS_HEADER};

/// A constructed experiment, advanced one round at a time.
#[derive(Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    server: ParameterServer,
    clients: Vec<ClientState>,
    testset: Vec<LabeledImage>,
    gate: AttackGate,
    adversary: usize,
    /// Pixelwise mean of the victim's partition.
    target_mean: Tensor,
    /// Fixed noise so per-round reconstructions are comparable.
    recon_noise: Vec<Tensor>,
}

/// What one call to [`Experiment::step`] produced.
#[derive(Clone, Debug)]
pub struct RoundOutcome {
    pub evaluation: Evaluation,
    /// The gate opened on this round.
    pub gate_opened: bool,
    /// First fixed-noise reconstruction, from the gate round on.
    pub reconstruction: Option<Tensor>,
}

impl RoundOutcome {
    pub fn record(&self) -> &RoundRecord {
        &self.evaluation.record
    }
}

/// Loads data and builds clients and the initial global model.
pub fn build_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let (train, test) = load_dataset(config.dataset, &config.data_dir)?;
    build_experiment_from(config, &train, &test)
}

/// [`build_experiment`] on already loaded data.
pub fn build_experiment_from(config: &ExperimentConfig, train: &[LabeledImage], test: &[LabeledImage]) -> Result<Experiment> {
    config.validate()?;
    let seed = config.master_seed;
    let mut partitions = partition_by_class(train, config.samples_per_class, &mut stream(seed, Purpose::Partition, &[]))?;
    let owned: Vec<usize> = match config.scenario {
        Scenario::ElevenUser => (0..NUM_CLASSES).collect(),
        Scenario::TwoUser => vec![config.target_class],
    };

    let target_mean = mean_image(&partitions[&config.target_class].samples)
        .ok_or_else(|| Error::Data(format!("class {} has no samples", config.target_class)))?;

    let mut clients: Vec<ClientState> = owned
        .iter()
        .enumerate()
        .map(|(id, class)| ClientState::benign(id, partitions.remove(class).unwrap(), config.local_training()))
        .collect();

    let global = DiscriminatorNet::new(&mut stream(seed, Purpose::GlobalInit, &[]));
    let generator = GeneratorNet::new(&mut stream(seed, Purpose::AdversaryInit, &[]));
    let adversary = clients.len();
    let state = AdversaryState::new(
        config.attack(),
        generator,
        global.clone(),
        stream(seed, Purpose::AdversaryNoise, &[]),
    )?;
    clients.push(ClientState::adversary(adversary, state));

    let testset = select_test(test, &owned, config.test_per_class);
    if testset.is_empty() {
        return Err(Error::Data("test split has no images of the benign clients' classes".into()));
    }
    let recon_noise = sample_noise(
        &mut stream(seed, Purpose::Reconstruction, &[]),
        config.recon_samples,
        config.noise,
    );

    Ok(Experiment {
        config: config.clone(),
        server: ParameterServer::new(global.into_params()),
        clients,
        testset,
        gate: AttackGate::new(config.attack_threshold),
        adversary,
        target_mean,
        recon_noise,
    })
}

/// Test images of the classes some benign client holds, optionally capped
/// per class (first images in file order).
fn select_test(test: &[LabeledImage], classes: &[usize], per_class: usize) -> Vec<LabeledImage> {
    let mut taken = [0usize; NUM_CLASSES];
    test.iter()
        .filter(|s| {
            if !classes.contains(&s.label) || (per_class > 0 && taken[s.label] >= per_class) {
                return false;
            }
            taken[s.label] += 1;
            true
        })
        .cloned()
        .collect()
}

impl Experiment {
    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn server(&self) -> &ParameterServer {
        &self.server
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn testset(&self) -> &[LabeledImage] {
        &self.testset
    }

    pub fn gate(&self) -> &AttackGate {
        &self.gate
    }

    pub fn round(&self) -> u64 {
        self.server.round()
    }

    pub fn adversary(&self) -> &AdversaryState {
        self.clients[self.adversary].adversary_state().expect("adversary slot")
    }

    pub fn target_mean(&self) -> &Tensor {
        &self.target_mean
    }

    /// Runs one round. The adversary attacks from the round after the gate
    /// opens; the gate round itself reports the untrained generator's distance.
    pub fn step(&mut self) -> Result<RoundOutcome> {
        let round = self.server.round() + 1;
        let ctx = RoundContext {
            round,
            master_seed: self.config.master_seed,
            attack_active: self.gate.is_open(),
        };
        let was_open = self.gate.is_open();
        let mut evaluation = run_round(
            &mut self.server,
            &mut self.clients,
            &self.testset,
            &ctx,
            self.config.participation,
        )
        .map_err(|e| Error::Round { round, source: Box::new(e) })?;
        let open = self.gate.observe(round, evaluation.record.accuracy);

        let mut reconstruction = None;
        if open {
            let fakes = self.reconstructions().map_err(|e| Error::Round { round, source: Box::new(e) })?;
            evaluation.record.reconstruction_distance = Some(distance_to_reference(&fakes, &self.target_mean)?);
            reconstruction = fakes.into_iter().next();
        }
        Ok(RoundOutcome {
            evaluation,
            gate_opened: open && !was_open,
            reconstruction,
        })
    }

    /// Generator output on the fixed reconstruction noise.
    pub fn reconstructions(&self) -> Result<Vec<Tensor>> {
        reconstruct_from_noise(self.adversary(), &self.recon_noise)
    }

    /// Fraction of `n` fresh generator samples the global model assigns to
    /// the target class or the fake class.
    pub fn generated_hit_rate(&self, n: usize, seed: u64) -> Result<f64> {
        let adv = self.adversary();
        let noise = sample_noise(&mut stream(seed, Purpose::Reconstruction, &[1]), n, adv.config.noise);
        let net = DiscriminatorNet::from_params(self.server.global().clone())?;
        let mut hits = 0;
        for image in reconstruct_from_noise(adv, &noise)? {
            let class = net.logits(&image)?.argmax();
            hits += usize::from(class == adv.target_class() || class == FAKE_CLASS);
        }
        Ok(hits as f64 / n.max(1) as f64)
    }
}

/// Files written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub records: Vec<RoundRecord>,
    pub gate_round: Option<u64>,
}

pub const MANIFEST_FILE: &str = "manifest.cfg";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "final.flgm";

/// Builds and runs the experiment, writing the manifest, metrics, ROC
/// snapshots, reconstruction frames and the final checkpoint into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    run_experiment_with(build_experiment(config)?, |_| {})
}

/// [`run_experiment`] on a prepared experiment, calling `progress` after
/// every round.
pub fn run_experiment_with(mut exp: Experiment, mut progress: impl FnMut(&RoundOutcome)) -> Result<RunSummary> {
    let out = exp.config.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write(&out.join(MANIFEST_FILE), exp.config.to_manifest().as_bytes())?;
    let metrics_path = out.join(METRICS_FILE);
    let mut metrics = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    append_line(&mut metrics, &metrics_path, METRICS_HEADER)?;

    let mut records = Vec::new();
    let rounds = exp.config.rounds;
    for _ in 0..rounds {
        let outcome = exp.step()?;
        let record = outcome.record();
        append_line(&mut metrics, &metrics_path, &metrics_row(record))?;
        if outcome.gate_opened || record.round == rounds {
            write(
                &out.join(format!("roc_round{}.csv", record.round)),
                roc_csv(&outcome.evaluation.roc).as_bytes(),
            )?;
        }
        if let Some(image) = &outcome.reconstruction {
            export_pgm(image, &out.join(format!("recon_r{}.pgm", record.round)))?;
        }
        progress(&outcome);
        records.push(outcome.evaluation.record);
    }
    save_checkpoint(exp.server.global(), &out.join(CHECKPOINT_FILE))?;
    Ok(RunSummary {
        out_dir: out,
        records,
        gate_round: exp.gate.latched_at(),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
