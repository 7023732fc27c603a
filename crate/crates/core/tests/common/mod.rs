#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use fedleak::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f32 = 1e-3;
pub const FD_REL_TOL: f64 = 1e-2;
/// Absolute slack for coordinates whose true gradient is below what a 32-bit
/// central difference at h = 1e-3 can resolve.
pub const FD_ABS_FLOOR: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    pub checked: usize,
    pub passed: usize,
    pub worst_rel: f64,
}

impl FdReport {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }

    pub fn merge(self, other: FdReport) -> FdReport {
        FdReport {
            checked: self.checked + other.checked,
            passed: self.passed + other.passed,
            worst_rel: self.worst_rel.max(other.worst_rel),
        }
    }
}

pub fn compare(analytic: f64, numeric: f64) -> (bool, f64) {
    let diff = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    let rel = if scale > 0.0 { diff / scale } else { 0.0 };
    (rel <= FD_REL_TOL || diff <= FD_ABS_FLOOR, rel)
}

/// Central differences on `coords` of `values`. `objective` is evaluated
/// with the perturbed buffer; `analytic[i]` is the claimed gradient.
pub fn central_differences(
    values: &mut [f32],
    analytic: &[f32],
    coords: &[usize],
    mut objective: impl FnMut(&[f32]) -> f64,
) -> FdReport {
    let mut report = FdReport::default();
    for &i in coords {
        let orig = values[i];
        values[i] = orig + FD_STEP;
        let up = objective(values);
        values[i] = orig - FD_STEP;
        let down = objective(values);
        values[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP as f64);
        let (ok, rel) = compare(analytic[i] as f64, numeric);
        report.checked += 1;
        report.passed += ok as usize;
        if !ok && std::env::var_os("FD_DEBUG").is_some() {
            eprintln!("  coord {i}: analytic {:.6e} numeric {:.6e} (up {up:.9} down {down:.9})", analytic[i], numeric);
        }
        if !ok {
            report.worst_rel = report.worst_rel.max(rel);
        }
    }
    report
}

/// Up to `n` distinct coordinates out of `len`, seeded.
pub fn sample_coords(len: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= n {
        return (0..len).collect();
    }
    rand::seq::index::sample(rng, len, n).into_vec()
}

/// Cross-entropy evaluated in f64 from 32-bit logits, so the finite-difference
/// quotient is not limited by the 32-bit rounding of the loss value itself.
pub fn cross_entropy_f64(logits: &Tensor, target: usize) -> f64 {
    let l: Vec<f64> = logits.data().iter().map(|&v| v as f64).collect();
    let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = l.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    lse - l[target]
}

/// `sum_i w_i · t_i` in f64, a scalar objective with non-trivial gradient `w`.
pub fn weighted_sum(t: &Tensor, w: &Tensor) -> f64 {
    t.data().iter().zip(w.data()).map(|(&a, &b)| a as f64 * b as f64).sum()
}
