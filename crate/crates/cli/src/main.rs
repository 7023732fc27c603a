use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fedleak::attack::{sample_noise, train_generator, AdversaryState, AttackConfig, NoiseKind};
use fedleak::models::{GeneratorNet, FAKE_CLASS};
use fedleak::rng::{stream, Purpose};
use fedleak::runner::{
    build_experiment, export_pgm, load_checkpoint, load_discriminator, run_experiment_with, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "fedleak", version, about = "Federated learning simulator with a GAN-based reconstruction attack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts to `out_dir`.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value`, applied after the config file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Print the tensors stored in a checkpoint.
    InspectCheckpoint { path: PathBuf },
    /// Train a generator against a stored global model and write PGM samples.
    ExportRecon {
        checkpoint: PathBuf,
        #[arg(long)]
        target: usize,
        #[arg(short = 'n', default_value_t = 8)]
        count: usize,
        /// Generator updates before sampling.
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn split_override(raw: &str) -> Result<(String, String)> {
    match raw.split_once('=') {
        Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
        None => bail!("override `{raw}` is not of the form key=value"),
    }
}

fn run(config: Option<PathBuf>, overrides: Vec<String>, quiet: bool) -> Result<()> {
    let overrides = overrides.iter().map(|o| split_override(o)).collect::<Result<Vec<_>>>()?;
    let cfg = ExperimentConfig::load(config.as_deref(), &overrides)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let started = Instant::now();
    let exp = build_experiment(&cfg)?;
    let summary = run_experiment_with(exp, |o| {
        if quiet {
            return;
        }
        let r = o.record();
        let dist = r.reconstruction_distance.map(|d| format!(" dist {d:.4}")).unwrap_or_default();
        let gate = if o.gate_opened { " [gate]" } else { "" };
        eprintln!(
            "round {:>4}  acc {:.4}  P {:.4}  R {:.4}  F1 {:.4}{dist}{gate}  ({:.0}s)",
            r.round,
            r.accuracy,
            r.macro_precision,
            r.macro_recall,
            r.f1,
            started.elapsed().as_secs_f64()
        );
    })?;
    match summary.gate_round {
        Some(g) => println!("attack gate opened at round {g}"),
        None => println!("attack gate never opened"),
    }
    println!("artifacts in {}", summary.out_dir.display());
    Ok(())
}

fn inspect(path: PathBuf) -> Result<()> {
    let params = load_checkpoint(&path)?;
    println!("{}: {} tensors, {} parameters", path.display(), params.len(), params.param_count());
    for (name, t) in params.iter() {
        let (lo, hi) = t
            .data()
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        println!("  {name:<14} {:?}  min {lo:+.5}  max {hi:+.5}", t.shape());
    }
    Ok(())
}

fn export_recon(checkpoint: PathBuf, target: usize, count: usize, epochs: usize, out_dir: PathBuf, seed: u64) -> Result<()> {
    if target >= FAKE_CLASS {
        bail!("--target must be in 0..{FAKE_CLASS}");
    }
    let disc = load_discriminator(&checkpoint)?;
    let frozen = disc.params().clone();
    let config = AttackConfig {
        target_class: target,
        ..AttackConfig::default()
    };
    let generator = GeneratorNet::new(&mut stream(seed, Purpose::AdversaryInit, &[]));
    let mut adv = AdversaryState::new(config.clone(), generator, disc, stream(seed, Purpose::AdversaryNoise, &[]))?;
    train_generator(&mut adv, &frozen, epochs, config.batch_size)?;
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let noise = sample_noise(&mut stream(seed, Purpose::Reconstruction, &[]), count, NoiseKind::Uniform);
    for (i, z) in noise.iter().enumerate() {
        let path = out_dir.join(format!("recon_c{target}_{i}.pgm"));
        export_pgm(&adv.generator.generate(z)?, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, overrides, quiet } => run(config, overrides, quiet),
        Command::InspectCheckpoint { path } => inspect(path),
        Command::ExportRecon {
            checkpoint,
            target,
            count,
            epochs,
            out_dir,
            seed,
        } => export_recon(checkpoint, target, count, epochs, out_dir, seed),
    }
}
