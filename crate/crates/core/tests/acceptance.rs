//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

mod common;

use std::fs;
use std::time::Instant;

use common::gradcheck::*;
use common::oracles::{data_dir, mann_whitney_auc};
use common::FdReport;
use fedleak::data::{LabeledImage, Partition};
use fedleak::federation::{
    aggregate, attack_gate, run_round, AttackGate, ParameterServer, Participant, RoundContext,
};
use fedleak::metrics::{confusion, macro_scores, reconstruction_distance, roc_auc, RoundRecord};
use fedleak::models::{DiscriminatorNet, ParamSet};
use fedleak::rng::{stream, Purpose};
use fedleak::runner::{
    build_experiment, run_experiment, ExperimentConfig, CHECKPOINT_FILE, MANIFEST_FILE, METRICS_FILE,
};
use fedleak::{Result, Tensor};
use rand::Rng;

type Verdict = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let reports: Vec<(&str, FdReport)> = vec![
        ("conv2d", conv2d_report(101)),
        ("conv_transpose2d", conv_transpose2d_report(102)),
        ("linear", linear_report(103)),
        ("relu/tanh", activations_report(104)),
        ("cross-entropy", cross_entropy_report(105)),
        ("discriminator", discriminator_report(TINY_DISCRIMINATOR, 60, 106)),
        ("generator", generator_report(TINY_GENERATOR, 60, 107)),
        ("generator->discriminator", end_to_end_report(60, 108)),
    ];
    let secs = start.elapsed().as_secs_f64();
    let worst = reports
        .iter()
        .min_by(|a, b| a.1.fraction().total_cmp(&b.1.fraction()))
        .unwrap();
    let detail = format!(
        "{} checks, lowest agreement {:.1}% ({}), {secs:.1}s",
        reports.len(),
        100.0 * worst.1.fraction(),
        worst.0
    );
    ensure(
        reports.iter().all(|(_, r)| r.checked > 0 && r.fraction() >= 0.95) && secs < 60.0,
        detail,
    )
}

fn metric_oracles() -> Verdict {
    let s = macro_scores(&confusion(&[0, 0, 1, 1, 2, 2], &[0, 1, 1, 1, 2, 0], 3).map_err(|e| e.to_string())?);
    let hand = [(s.precision, 0.7222), (s.recall, 0.6667), (s.f1, 0.6933), (s.accuracy, 0.6667)];
    let hand_ok = hand.iter().all(|(got, want)| (got - want).abs() <= 1e-4);

    let mut rng = common::rng(2024);
    let mut worst = 0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=40);
        let mut positives: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        positives[0] = true;
        positives[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..15) as f64 / 14.0).collect();
        let auc = roc_auc(&scores, &positives).map_err(|e| e.to_string())?.auc;
        worst = worst.max((auc - mann_whitney_auc(&scores, &positives)).abs());
    }

    let part = |images: &[[f32; 3]]| Partition {
        owner_class: 0,
        samples: images
            .iter()
            .map(|p| LabeledImage {
                pixels: Tensor::vector(p.to_vec()),
                label: 0,
            })
            .collect(),
        source_indices: (0..images.len()).collect(),
    };
    let reals = [[0.5f32, -0.25, 1.0], [-0.5, 0.75, 0.0]];
    let fakes = [Tensor::vector(vec![0.125, 0.5, -1.0]), Tensor::vector(vec![1.0, 1.0, 0.25])];
    let shift = 0.375f32;
    let shifted_reals: Vec<[f32; 3]> = reals.iter().map(|r| r.map(|v| v + shift)).collect();
    let shifted_fakes: Vec<Tensor> = fakes.iter().map(|f| f.map(|v| v + shift)).collect();
    let d0 = reconstruction_distance(&fakes, &part(&reals)).map_err(|e| e.to_string())?;
    let d1 = reconstruction_distance(&shifted_fakes, &part(&shifted_reals)).map_err(|e| e.to_string())?;
    let zero = reconstruction_distance(&[Tensor::vector(vec![0.0, 0.25, 0.5])], &part(&reals)).map_err(|e| e.to_string())?;

    ensure(
        hand_ok && worst <= 1e-9 && d0 == d1 && zero == 0.0,
        format!(
            "P={:.4} R={:.4} F1={:.4} acc={:.4}; max |auc - U| over 1000 cases = {worst:.1e}; shift {d0} -> {d1}; zero case {zero}",
            s.precision, s.recall, s.f1, s.accuracy
        ),
    )
}

struct Stub {
    id: usize,
    value: Option<f32>,
}

impl Participant for Stub {
    fn id(&self) -> usize {
        self.id
    }

    fn local_update(&mut self, global: &ParamSet, _: &RoundContext) -> Result<ParamSet> {
        let mut up = global.clone();
        if let Some(v) = self.value {
            up.tensors_mut().for_each(|t| t.data_mut().fill(v));
        }
        Ok(up)
    }
}

fn aggregation_protocol() -> Verdict {
    let ps = |v: &[f32]| ParamSet::new(vec![("w".into(), Tensor::vector(v.to_vec()))]).unwrap();
    let two_point = aggregate(&[ps(&[1.0, 3.0]), ps(&[3.0, 5.0])]).map_err(|e| e.to_string())?;
    let two_point_ok = two_point.tensor(0).data() == [2.0, 4.0];

    let testset: Vec<LabeledImage> = (0..3)
        .map(|label| LabeledImage {
            pixels: Tensor::full([1, 28, 28], label as f32 * 0.5 - 0.5),
            label,
        })
        .collect();
    let ctx = RoundContext {
        round: 1,
        master_seed: 5,
        attack_active: false,
    };
    let global = DiscriminatorNet::new(&mut stream(5, Purpose::GlobalInit, &[])).into_params();

    let mut server = ParameterServer::new(global.clone());
    let mut stubs: Vec<Stub> = [1.5f32, -0.5, 0.25]
        .iter()
        .enumerate()
        .map(|(id, &v)| Stub { id, value: Some(v) })
        .collect();
    run_round(&mut server, &mut stubs, &testset, &ctx, 1.0).map_err(|e| e.to_string())?;
    let stub_ok = server
        .global()
        .tensors()
        .all(|t| t.data().iter().all(|&v| v == 0.4166666666666667f64 as f32));

    let mut server = ParameterServer::new(global.clone());
    let mut idle: Vec<Stub> = (0..4).map(|id| Stub { id, value: None }).collect();
    run_round(&mut server, &mut idle, &testset, &ctx, 1.0).map_err(|e| e.to_string())?;
    let fixed_ok = server.global().bitwise_eq(&global) && server.round() == 1;

    let mut gate = AttackGate::new(0.90);
    let gate_ok = attack_gate(0.91, 0.90)
        && !attack_gate(0.90, 0.90)
        && !gate.observe(1, 0.90)
        && gate.observe(2, 0.91)
        && gate.observe(3, 0.5)
        && gate.latched_at() == Some(2);

    ensure(
        two_point_ok && stub_ok && fixed_ok && gate_ok,
        format!("two-point {two_point_ok}, stub mean {stub_ok}, fixed point {fixed_ok}, gate {gate_ok}"),
    )
}

/// Rounds of the long MNIST run, plus the state needed by criteria 4-6.
struct LongRun {
    records: Vec<RoundRecord>,
    gate: Option<u64>,
    hit_rate: Option<f64>,
    minutes_to_gate: f64,
}

const POST_GATE_ROUNDS: u64 = 50;

fn long_run() -> std::result::Result<LongRun, String> {
    let cfg = ExperimentConfig {
        data_dir: data_dir(),
        samples_per_class: 500,
        images_per_round: 50,
        gan_epochs: 100,
        adversary_samples: 500,
        target_class: 1,
        rounds: 200 + POST_GATE_ROUNDS,
        ..ExperimentConfig::default()
    };
    let mut exp = build_experiment(&cfg).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut minutes_to_gate = 0.0;
    loop {
        let outcome = exp.step().map_err(|e| e.to_string())?;
        let r = outcome.record().clone();
        if outcome.gate_opened {
            minutes_to_gate = start.elapsed().as_secs_f64() / 60.0;
        }
        eprintln!(
            "  round {:>3} acc {:.4} P {:.4} R {:.4} F1 {:.4}{}",
            r.round,
            r.accuracy,
            r.macro_precision,
            r.macro_recall,
            r.f1,
            r.reconstruction_distance.map(|d| format!(" dist {d:.4}")).unwrap_or_default()
        );
        records.push(r);
        let round = exp.round();
        match exp.gate().latched_at() {
            None if round >= 200 => break,
            Some(g) if round >= g + POST_GATE_ROUNDS => break,
            _ => {}
        }
    }
    let hit_rate = match exp.gate().latched_at() {
        Some(_) => Some(exp.generated_hit_rate(500, 77).map_err(|e| e.to_string())?),
        None => None,
    };
    Ok(LongRun {
        records,
        gate: exp.gate().latched_at(),
        hit_rate,
        minutes_to_gate,
    })
}

fn desk_scale_training(run: &LongRun) -> Verdict {
    match run.gate {
        Some(g) => ensure(
            g <= 200,
            format!(
                "accuracy {:.4} > 0.90 at round {g} ({:.1} min)",
                run.records[g as usize - 1].accuracy, run.minutes_to_gate
            ),
        ),
        None => {
            let best = run.records.iter().map(|r| r.accuracy).fold(0.0, f64::max);
            Err(format!("gate never opened in 200 rounds (best accuracy {best:.4})"))
        }
    }
}

fn attack_efficacy(run: &LongRun) -> Verdict {
    let g = run.gate.ok_or("no gate round")? as usize;
    let at_gate = run.records[g - 1].reconstruction_distance.ok_or("no distance at gate")?;
    let last = run.records.get(g - 1 + POST_GATE_ROUNDS as usize).ok_or("run ended early")?;
    let after = last.reconstruction_distance.ok_or("no distance at gate+50")?;
    let hit = run.hit_rate.unwrap_or(0.0);
    ensure(
        after < 0.5 * at_gate && hit >= 0.8,
        format!(
            "distance {at_gate:.4} -> {after:.4} ({:.1}% of gate value); {:.1}% of fresh samples classified as target or fake",
            100.0 * after / at_gate,
            100.0 * hit
        ),
    )
}

fn degradation_signature(run: &LongRun) -> Verdict {
    let g = run.gate.ok_or("no gate round")? as usize;
    let gate = &run.records[g - 1];
    let window = run.records.get(g..g + 20).ok_or("fewer than 20 post-gate rounds")?;
    let stable = window.iter().filter(|r| (r.accuracy - gate.accuracy).abs() <= 0.05).count();
    let mean = |f: fn(&RoundRecord) -> f64| window.iter().map(f).sum::<f64>() / window.len() as f64;
    let (p, r, f1) = (mean(|x| x.macro_precision), mean(|x| x.macro_recall), mean(|x| x.f1));
    ensure(
        stable == window.len() && p < gate.macro_precision && r < gate.macro_recall && f1 < gate.f1,
        format!(
            "{stable}/20 post-gate rounds within 0.05 of gate accuracy {:.4}; mean P/R/F1 {p:.4}/{r:.4}/{f1:.4} vs gate {:.4}/{:.4}/{:.4}",
            gate.accuracy, gate.macro_precision, gate.macro_recall, gate.f1
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seed_cfg = ExperimentConfig {
        data_dir: data_dir(),
        out_dir: dir.path().join("first"),
        samples_per_class: 100,
        test_per_class: 30,
        rounds: 6,
        // Low enough that the attack runs for most rounds.
        attack_threshold: 0.05,
        gan_epochs: 5,
        adversary_samples: 32,
        recon_samples: 8,
        master_seed: 31337,
        ..ExperimentConfig::default()
    };
    run_experiment(&seed_cfg).map_err(|e| e.to_string())?;
    let manifest = dir.path().join("first").join(MANIFEST_FILE);
    let replay = ExperimentConfig::load(
        Some(&manifest),
        &[("out_dir".into(), dir.path().join("second").display().to_string())],
    )
    .map_err(|e| e.to_string())?;
    let second = run_experiment(&replay).map_err(|e| e.to_string())?;
    let read = |run: &str, file: &str| fs::read(dir.path().join(run).join(file)).map_err(|e| e.to_string());
    let csv_same = read("first", METRICS_FILE)? == read("second", METRICS_FILE)?;
    let ckpt_same = read("first", CHECKPOINT_FILE)? == read("second", CHECKPOINT_FILE)?;
    ensure(
        csv_same && ckpt_same,
        format!(
            "metrics.csv identical: {csv_same}, checkpoint identical: {ckpt_same} (gate at {:?})",
            second.gate_round
        ),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(u8, &str, Verdict)> = vec![
        (1, "gradient correctness", gradient_correctness()),
        (2, "metric oracles", metric_oracles()),
        (3, "aggregation and protocol", aggregation_protocol()),
    ];
    match long_run() {
        Ok(run) => {
            results.push((4, "desk-scale federated training", desk_scale_training(&run)));
            results.push((5, "attack efficacy", attack_efficacy(&run)));
            results.push((6, "degradation signature", degradation_signature(&run)));
        }
        Err(e) => {
            for (n, name) in [(4, "desk-scale federated training"), (5, "attack efficacy"), (6, "degradation signature")] {
                results.push((n, name, Err(format!("run failed: {e}"))));
            }
        }
    }
    results.push((7, "determinism", determinism()));

    for (n, name, verdict) in &results {
        match verdict {
            Ok(d) => println!("PASS criterion {n} ({name}): {d}"),
            Err(d) => println!("FAIL criterion {n} ({name}): {d}"),
        }
    }
    let failed: Vec<u8> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
