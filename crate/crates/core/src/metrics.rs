//! Confusion matrices and segmentation scores.
//!
//! Per-class Dice and Jaccard are computed from the confusion matrix and then
//! macro-averaged; because the average is taken after the per-class values,
//! `macro_jaccard` generally differs from `macro_dice / (2 - macro_dice)` even
//! though the identity holds exactly for every individual class.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::maskcore::{ClassId, Mask, Palette};

/// Lower clamp applied to the ground-truth probability before taking its log.
pub const FOCAL_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("class {0} is not in the palette")]
    UnknownClass(ClassId),
    #[error("ground truth has no foreground pixels")]
    NoForeground,
    #[error("no class has a defined value")]
    AllUndefined,
    #[error("pixel {index} probabilities are not a distribution (sum {sum})")]
    BadDistribution { index: usize, sum: f64 },
    #[error("invalid focal parameters: {0}")]
    BadParams(String),
}

/// K x K pixel counts; rows are ground-truth classes, columns predicted classes,
/// both in palette order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: Vec<ClassId>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: Vec<ClassId>) -> Self {
        let k = classes.len();
        ConfusionMatrix { classes, counts: vec![0; k * k] }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(classes: Vec<ClassId>, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), classes.len() * classes.len(), "counts must be K x K");
        ConfusionMatrix { classes, counts }
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    /// Count at (ground-truth position, predicted position).
    pub fn at(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.k() + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, pos: usize) -> u64 {
        (0..self.k()).map(|j| self.at(pos, j)).sum()
    }

    pub fn col_sum(&self, pos: usize) -> u64 {
        (0..self.k()).map(|i| self.at(i, pos)).sum()
    }

    pub fn position(&self, c: ClassId) -> Result<usize, MetricsError> {
        self.classes.iter().position(|&x| x == c).ok_or(MetricsError::UnknownClass(c))
    }

    pub fn stats(&self, c: ClassId) -> Result<ClassStats, MetricsError> {
        let p = self.position(c)?;
        let tp = self.at(p, p);
        let fp = self.col_sum(p) - tp;
        let fn_ = self.row_sum(p) - tp;
        Ok(ClassStats { tp, fp, fn_, tn: self.total() - tp - fp - fn_ })
    }

    /// Element-wise sum; both matrices must cover the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes, "merging matrices over different classes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> ConfusionMatrix {
        let k = self.k();
        let mut counts = vec![0; k * k];
        for i in 0..k {
            for j in 0..k {
                counts[j * k + i] = self.at(i, j);
            }
        }
        ConfusionMatrix { classes: self.classes.clone(), counts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassStats {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn check_dims(gt: &Mask, pred: &Mask) -> Result<(), MetricsError> {
    if gt.dims() != pred.dims() {
        return Err(MetricsError::DimensionMismatch(gt.dims(), pred.dims()));
    }
    Ok(())
}

pub fn confusion(gt: &Mask, pred: &Mask, palette: &Palette) -> Result<ConfusionMatrix, MetricsError> {
    check_dims(gt, pred)?;
    let classes: Vec<ClassId> = palette.entries().iter().map(|e| e.id).collect();
    let k = classes.len();
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        let gi = palette.position(g).ok_or(MetricsError::UnknownClass(g))?;
        let pi = palette.position(p).ok_or(MetricsError::UnknownClass(p))?;
        cm.counts[gi * k + pi] += 1;
    }
    Ok(cm)
}

/// Accuracy over pixels whose ground truth is not `background`.
pub fn foreground_accuracy_cm(cm: &ConfusionMatrix, background: ClassId) -> Result<f64, MetricsError> {
    let bg = cm.position(background)?;
    let mut correct = 0u64;
    let mut total = 0u64;
    for i in (0..cm.k()).filter(|&i| i != bg) {
        correct += cm.at(i, i);
        total += cm.row_sum(i);
    }
    if total == 0 {
        return Err(MetricsError::NoForeground);
    }
    Ok(correct as f64 / total as f64)
}

pub fn foreground_accuracy(gt: &Mask, pred: &Mask, palette: &Palette) -> Result<f64, MetricsError> {
    foreground_accuracy_cm(&confusion(gt, pred, palette)?, palette.background())
}

/// `2TP / (2TP + FP + FN)`; `None` when the class is absent from both masks.
pub fn dice_per_class(cm: &ConfusionMatrix, c: ClassId) -> Result<Option<f64>, MetricsError> {
    let s = cm.stats(c)?;
    let denom = 2 * s.tp + s.fp + s.fn_;
    Ok((denom > 0).then(|| (2 * s.tp) as f64 / denom as f64))
}

/// `TP / (TP + FP + FN)`; `None` when the class is absent from both masks.
pub fn jaccard_per_class(cm: &ConfusionMatrix, c: ClassId) -> Result<Option<f64>, MetricsError> {
    let s = cm.stats(c)?;
    let denom = s.tp + s.fp + s.fn_;
    Ok((denom > 0).then(|| s.tp as f64 / denom as f64))
}

/// Mean of the defined values, skipping `exclude` (typically the background class).
pub fn macro_average<I>(per_class: I, exclude: Option<ClassId>) -> Result<f64, MetricsError>
where
    I: IntoIterator<Item = (ClassId, Option<f64>)>,
{
    let (sum, n) = per_class
        .into_iter()
        .filter(|(c, _)| Some(*c) != exclude)
        .filter_map(|(_, v)| v)
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(MetricsError::AllUndefined);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocalParams {
    pub gamma: f64,
    pub alpha: Vec<f64>,
}

impl FocalParams {
    pub fn new(gamma: f64, alpha: Vec<f64>) -> Result<Self, MetricsError> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(MetricsError::BadParams(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if alpha.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(MetricsError::BadParams("alpha weights must be finite and >= 0".into()));
        }
        Ok(FocalParams { gamma, alpha })
    }

    /// gamma = 2 with unit weight for every class.
    pub fn uniform(k: usize) -> Self {
        FocalParams { gamma: 2.0, alpha: vec![1.0; k] }
    }
}

/// Per-pixel class probabilities, channels in palette order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    pub width: u32,
    pub height: u32,
    pub classes: usize,
    /// Pixel-major: `data[(y * width + x) * classes + c]`.
    pub data: Vec<f64>,
}

/// Mean focal loss `-alpha[gt] * (1 - p)^gamma * ln(p)` with `p` the
/// probability of the ground-truth class clamped to `[FOCAL_EPS, 1]`.
pub fn focal_loss(probs: &ProbMap, gt: &Mask, palette: &Palette, params: &FocalParams) -> Result<f64, MetricsError> {
    if (probs.width, probs.height) != gt.dims() || probs.data.len() != gt.len() * probs.classes {
        return Err(MetricsError::DimensionMismatch((probs.width, probs.height), gt.dims()));
    }
    if probs.classes != palette.len() || params.alpha.len() != palette.len() {
        return Err(MetricsError::BadParams(format!(
            "expected {} classes, probabilities have {} and alpha has {}",
            palette.len(),
            probs.classes,
            params.alpha.len()
        )));
    }
    let mut total = 0.0;
    for (i, (px, &g)) in probs.data.chunks(probs.classes).zip(gt.labels()).enumerate() {
        let sum: f64 = px.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || px.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(MetricsError::BadDistribution { index: i, sum });
        }
        let c = palette.position(g).ok_or(MetricsError::UnknownClass(g))?;
        let p = px[c].clamp(FOCAL_EPS, 1.0);
        total += -params.alpha[c] * (1.0 - p).powf(params.gamma) * p.ln();
    }
    Ok(total / gt.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub id: ClassId,
    pub name: String,
    #[serde(flatten)]
    pub stats: ClassStats,
    pub dice: Option<f64>,
    pub jaccard: Option<f64>,
}

/// Everything the evaluation report prints for one confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub pixels: u64,
    pub classes: Vec<ClassReport>,
    /// `None` when the ground truth has no foreground.
    pub foreground_accuracy: Option<f64>,
    pub macro_dice: Option<f64>,
    pub macro_jaccard: Option<f64>,
    pub macro_dice_with_background: Option<f64>,
    pub macro_jaccard_with_background: Option<f64>,
}

impl EvalReport {
    pub fn from_confusion(cm: &ConfusionMatrix, palette: &Palette) -> Self {
        let bg = palette.background();
        let classes: Vec<ClassReport> = palette
            .entries()
            .iter()
            .map(|e| ClassReport {
                id: e.id,
                name: e.name.clone(),
                stats: cm.stats(e.id).expect("matrix built from this palette"),
                dice: dice_per_class(cm, e.id).expect("palette class"),
                jaccard: jaccard_per_class(cm, e.id).expect("palette class"),
            })
            .collect();
        let avg = |f: fn(&ClassReport) -> Option<f64>, exclude| {
            macro_average(classes.iter().map(|c| (c.id, f(c))), exclude).ok()
        };
        EvalReport {
            pixels: cm.total(),
            foreground_accuracy: foreground_accuracy_cm(cm, bg).ok(),
            macro_dice: avg(|c| c.dice, Some(bg)),
            macro_jaccard: avg(|c| c.jaccard, Some(bg)),
            macro_dice_with_background: avg(|c| c.dice, None),
            macro_jaccard_with_background: avg(|c| c.jaccard, None),
            classes,
        }
    }

    /// Comma-separated rows, one per class plus a summary row per macro measure.
    /// Undefined values print as `NA`.
    pub fn to_csv(&self, image: &str) -> String {
        let mut s = String::new();
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{image},{},{},{},{},{},{},{},",
                c.name,
                c.stats.tp,
                c.stats.fp,
                c.stats.fn_,
                c.stats.tn,
                fmt_opt(c.dice),
                fmt_opt(c.jaccard),
            );
        }
        let _ = writeln!(
            s,
            "{image},macro,,,,,{},{},{}",
            fmt_opt(self.macro_dice),
            fmt_opt(self.macro_jaccard),
            fmt_opt(self.foreground_accuracy)
        );
        let _ = writeln!(
            s,
            "{image},macro_with_background,,,,,{},{},",
            fmt_opt(self.macro_dice_with_background),
            fmt_opt(self.macro_jaccard_with_background)
        );
        s
    }

    pub const CSV_HEADER: &'static str = "image,class,tp,fp,fn,tn,dice,jaccard,foreground_accuracy\n";
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}
