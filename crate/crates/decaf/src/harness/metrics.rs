//! Classification metrics.

use crate::{Error, Result};

fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape("label/prediction length mismatch"));
    }
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::invalid(format!("label {t}/{p} outside [0, {k})")));
        }
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    Ok((tp, fp, fn_))
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    // A class with no true positives and no members on either side scores 0.
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Unweighted mean of per-class F1 scores.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    let (tp, fp, fn_) = confusion(y_true, y_pred, k)?;
    let sum: f64 = (0..k).map(|c| f1_from_counts(tp[c], fp[c], fn_[c])).sum();
    Ok(sum / k as f64)
}

/// F1 over pooled counts; equals accuracy in the single-label setting.
pub fn micro_f1(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    let (tp, fp, fn_) = confusion(y_true, y_pred, k)?;
    Ok(f1_from_counts(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum()))
}

/// F1 of the positive class (class 1) for binary problems.
pub fn binary_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let (tp, fp, fn_) = confusion(y_true, y_pred, 2)?;
    Ok(f1_from_counts(tp[1], fp[1], fn_[1]))
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape("label/prediction length mismatch"));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("accuracy over empty slice"));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}
