//! Macro-averaged classification metrics, the majority baseline, and the
//! results table with F1 changes against the text-only model.

use std::io::Write;

use serde::Serialize;

use super::logreg::NUM_CLASSES;
use crate::corpus::Label;
use crate::error::{Error, Result};

pub type Confusion = [[u64; NUM_CLASSES]; NUM_CLASSES];

/// `confusion[true][predicted]`.
pub fn confusion(truth: &[Label], pred: &[Label]) -> Confusion {
    let mut c = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (t, p) in truth.iter().zip(pred) {
        c[t.index()][p.index()] += 1;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Per-class precision and recall (0 when the denominator is 0), their
/// macro means, macro F1 as the mean of per-class F1, and accuracy.
pub fn evaluate(truth: &[Label], pred: &[Label]) -> Result<Scores> {
    if truth.is_empty() || truth.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "cannot evaluate {} predictions against {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let c = confusion(truth, pred);
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for k in 0..NUM_CLASSES {
        let tp = c[k][k];
        let pred_k: u64 = (0..NUM_CLASSES).map(|t| c[t][k]).sum();
        let true_k: u64 = c[k].iter().sum();
        let (pk, rk) = (ratio(tp, pred_k), ratio(tp, true_k));
        p += pk;
        r += rk;
        f += if pk + rk > 0.0 { 2.0 * pk * rk / (pk + rk) } else { 0.0 };
    }
    let k = NUM_CLASSES as f64;
    let correct: u64 = (0..NUM_CLASSES).map(|i| c[i][i]).sum();
    Ok(Scores { precision: p / k, recall: r / k, f1: f / k, accuracy: correct as f64 / truth.len() as f64 })
}

/// Most frequent training label; ties go to the first label in
/// agree/neutral/disagree order.
pub fn majority_label(train: &[Label]) -> Result<Label> {
    let mut counts = [0usize; NUM_CLASSES];
    for y in train {
        counts[y.index()] += 1;
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("majority baseline needs training labels".into()));
    }
    let best = (0..NUM_CLASSES).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
    Ok(Label::from_index(best).expect("class index in range"))
}

/// Change in F1 relative to the text-only model, as annotated on bar charts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeltaSymbol {
    MuchWorse,
    Worse,
    Same,
    Better,
}

impl DeltaSymbol {
    /// `--` below -0.1, `-` in `[-0.1, 0)`, `=` at 0, `+` above 0.
    pub fn classify(delta: f64) -> DeltaSymbol {
        if delta > 0.0 {
            DeltaSymbol::Better
        } else if delta == 0.0 {
            DeltaSymbol::Same
        } else if delta < -0.1 {
            DeltaSymbol::MuchWorse
        } else {
            DeltaSymbol::Worse
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeltaSymbol::MuchWorse => "--",
            DeltaSymbol::Worse => "-",
            DeltaSymbol::Same => "=",
            DeltaSymbol::Better => "+",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub model: String,
    pub scores: Scores,
    /// F1 minus the text-only F1; `None` for rows without a reference.
    pub delta_f1: Option<f64>,
}

pub const RESULT_COLUMNS: [&str; 7] = ["model", "P", "R", "F1", "Acc", "dF1", "symbol"];

/// Scores are rounded to 4 decimals so that repeated runs compare byte for byte.
pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    let f = |x: f64| format!("{x:.4}");
    for r in rows {
        let (delta, sym) = match r.delta_f1 {
            Some(d) => (f(d), DeltaSymbol::classify(d).as_str().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.model.clone(),
            f(r.scores.precision),
            f(r.scores.recall),
            f(r.scores.f1),
            f(r.scores.accuracy),
            delta,
            sym,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}
