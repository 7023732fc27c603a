//! Evaluation math: one-vs-rest confusion counts, macro precision / recall /
//! F1, per-class ROC with trapezoidal AUC, and the reconstruction distance.

use crate::data::Partition;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub per_class: Vec<ClassCounts>,
    pub total: usize,
}

/// Predictions outside `0..num_classes` (the fake class) count against the
/// true class as a miss but as a false positive for no real class.
pub fn confusion(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Usage(format!(
            "confusion: {} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if let Some(&bad) = y_true.iter().find(|&&t| t >= num_classes) {
        return Err(Error::Index {
            op: "confusion",
            index: bad,
            len: num_classes,
        });
    }
    let mut per_class = vec![ClassCounts::default(); num_classes];
    for (c, counts) in per_class.iter_mut().enumerate() {
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == c, p == c) {
                (true, true) => counts.tp += 1,
                (false, true) => counts.fp += 1,
                (true, false) => counts.fn_ += 1,
                (false, false) => counts.tn += 1,
            }
        }
    }
    Ok(ConfusionCounts {
        per_class,
        total: y_true.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 of a precision/recall pair, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// True-positive rate, shared by recall and the ROC sweep.
pub fn true_positive_rate(tp: usize, fn_: usize) -> f64 {
    ratio(tp, tp + fn_)
}

pub fn false_positive_rate(fp: usize, tn: usize) -> f64 {
    ratio(fp, fp + tn)
}

/// Macro precision and recall averaged over the classes, F1 taken from the
/// macro pair, accuracy = ΣTP / total.
pub fn macro_scores(counts: &ConfusionCounts) -> MacroScores {
    let k = counts.per_class.len().max(1) as f64;
    let precision = counts.per_class.iter().map(|c| ratio(c.tp, c.tp + c.fp)).sum::<f64>() / k;
    let recall = counts
        .per_class
        .iter()
        .map(|c| true_positive_rate(c.tp, c.fn_))
        .sum::<f64>()
        / k;
    let hits: usize = counts.per_class.iter().map(|c| c.tp).sum();
    MacroScores {
        accuracy: ratio(hits, counts.total),
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// `(FPR, TPR)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps thresholds over the distinct scores in descending order; tied
/// scores move the curve in one diagonal step. Area by the trapezoid rule.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<RocCurve> {
    if scores.len() != positives.len() {
        return Err(Error::Usage(format!(
            "roc_auc: {} scores vs {} labels",
            scores.len(),
            positives.len()
        )));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(format!(
            "roc_auc needs both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("roc_auc: NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let (x1, y1) = (fp as f64 / n_neg as f64, tp as f64 / n_pos as f64);
        area += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { points, auc: area })
}

/// Mean over `fakes` of the per-pixel RMS distance to `reference`.
pub fn distance_to_reference(fakes: &[Tensor], reference: &Tensor) -> Result<f64> {
    if fakes.is_empty() {
        return Err(Error::Usage("reconstruction_distance: no generated samples".into()));
    }
    let n = reference.len() as f64;
    let mut total = 0.0;
    for fake in fakes {
        if fake.len() != reference.len() {
            return Err(Error::dim(
                "reconstruction_distance",
                format!("{:?}", reference.shape()),
                format!("{:?}", fake.shape()),
            ));
        }
        let sq: f64 = fake
            .data()
            .iter()
            .zip(reference.data())
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum();
        total += (sq / n).sqrt();
    }
    Ok(total / fakes.len() as f64)
}

/// Distance of generated samples to the pixelwise mean image of the victim's
/// class data. Root mean square per pixel, averaged over samples.
pub fn reconstruction_distance(fakes: &[Tensor], target: &Partition) -> Result<f64> {
    let mean = crate::data::mean_image(&target.samples)
        .ok_or_else(|| Error::Usage("reconstruction_distance: empty target partition".into()))?;
    distance_to_reference(fakes, &mean)
}

/// One evaluation row of the global model.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub f1: f64,
    /// One entry per real class; `None` where the test data lacks positives
    /// or negatives for that class.
    pub per_class_auc: Vec<Option<f64>>,
    /// Present from the round the attack gate latches.
    pub reconstruction_distance: Option<f64>,
}
