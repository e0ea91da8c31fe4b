//! Plain accuracy and the one-vs-rest Q metric.

use serde::Serialize;

use crate::error::{shape, Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_test: usize,
    pub n_classes: usize,
    pub confusion: Vec<Confusion>,
    pub plain_accuracy: f64,
    pub q_accuracy: f64,
}

/// Per-class one-vs-rest confusion counts. `Q = (ΣTP + ΣTN) / (n_test · C)`.
pub fn evaluate(predicted: &[usize], truth: &[usize], n_classes: usize) -> Result<EvalReport> {
    if predicted.len() != truth.len() {
        return Err(shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if n_classes == 0 || predicted.is_empty() {
        return Err(Error::InvalidParameter(
            "evaluation needs at least one sample and one class".into(),
        ));
    }
    if let Some(bad) = predicted.iter().chain(truth).find(|&&l| l >= n_classes) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    let n = truth.len();
    let mut confusion = vec![Confusion::default(); n_classes];
    let mut correct = 0;
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            correct += 1;
            confusion[t].tp += 1;
        } else {
            confusion[t].fn_ += 1;
            confusion[p].fp += 1;
        }
    }
    for c in &mut confusion {
        c.tn = n - c.tp - c.fn_ - c.fp;
    }
    let tp_tn: usize = confusion.iter().map(|c| c.tp + c.tn).sum();
    Ok(EvalReport {
        n_test: n,
        n_classes,
        confusion,
        plain_accuracy: correct as f64 / n as f64,
        q_accuracy: tp_tn as f64 / (n * n_classes) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct() {
        let r = evaluate(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!((r.plain_accuracy, r.q_accuracy), (1.0, 1.0));
    }

    #[test]
    fn one_error_in_45() {
        let truth: Vec<usize> = (0..45).map(|i| i / 3).collect();
        let mut pred = truth.clone();
        pred[7] = 11;
        let r = evaluate(&pred, &truth, 15).unwrap();
        assert_eq!(r.plain_accuracy, 44.0 / 45.0);
        assert_eq!(r.q_accuracy, 673.0 / 675.0);
        assert!(r.confusion.iter().all(|c| c.total() == 45));
    }

    #[test]
    fn all_wrong_binary() {
        let r = evaluate(&[1, 0], &[0, 1], 2).unwrap();
        assert_eq!((r.plain_accuracy, r.q_accuracy), (0.0, 0.0));
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[0], &[0, 1], 2).is_err());
        assert!(evaluate(&[2], &[0], 2).is_err());
    }

    #[test]
    fn serializes_fn_field() {
        let r = evaluate(&[0], &[0], 1).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"fn\":0"));
    }
}
