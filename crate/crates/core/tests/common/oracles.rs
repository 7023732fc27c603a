//! Independent reference implementations used to check the library.

use std::path::PathBuf;

/// AUC as the Mann–Whitney U statistic: the fraction of (positive, negative)
/// pairs ranked correctly, ties counting one half.
pub fn mann_whitney_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(positives).filter(|(_, &p)| p).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(positives).filter(|(_, &p)| !p).map(|(&s, _)| s).collect();
    let mut u = 0.0;
    for &p in &pos {
        for &n in &neg {
            u += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    u / (pos.len() * neg.len()) as f64
}

/// Macro precision, recall, F1 and accuracy from a dense confusion matrix
/// built by hand; predictions outside `0..k` only hurt recall.
pub fn dense_macro(y_true: &[usize], y_pred: &[usize], k: usize) -> (f64, f64, f64, f64) {
    let mut m = vec![vec![0usize; k + 1]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[t][p.min(k)] += 1;
    }
    let (mut ps, mut rs) = (0.0, 0.0);
    for (c, row_counts) in m.iter().enumerate() {
        let tp = row_counts[c] as f64;
        let col: usize = m.iter().map(|r| r[c]).sum();
        let row: usize = row_counts.iter().sum();
        ps += if col == 0 { 0.0 } else { tp / col as f64 };
        rs += if row == 0 { 0.0 } else { tp / row as f64 };
    }
    let (p, r) = (ps / k as f64, rs / k as f64);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let correct: usize = (0..k).map(|c| m[c][c]).sum();
    let acc = if y_true.is_empty() { 0.0 } else { correct as f64 / y_true.len() as f64 };
    (p, r, f1, acc)
}

/// `FEDLEAK_DATA_DIR`, or the repository's `data/` directory.
pub fn data_dir() -> PathBuf {
    std::env::var_os("FEDLEAK_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}
