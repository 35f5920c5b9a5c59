//! Ranking statistics.

use super::EvalError;

fn check(scores: &[f64], labels: &[bool], context: &str) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Invalid(format!(
            "{context}: {} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::Invalid(format!("{context}: NaN score")));
    }
    Ok(())
}

/// Area under the ROC curve as the normalized Mann-Whitney statistic; tied
/// positive/negative pairs count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check(scores, labels, "auc")?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::DegenerateLabels {
            context: "auc".into(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the 1-based rank, so tie averages stay integral
    let mut rank2_pos: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank2 = (i + 1 + j + 1) as u64;
        rank2_pos += rank2 * order[i..=j].iter().filter(|&&o| labels[o]).count() as u64;
        i = j + 1;
    }
    let p = pos as u64;
    let u2 = rank2_pos - p * (p + 1);
    Ok(u2 as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Mean precision at the rank of each positive, ranking by descending score with ties
/// kept in input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check(scores, labels, "average precision")?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(EvalError::DegenerateLabels {
            context: "average precision".into(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &o) in order.iter().enumerate() {
        if labels[o] {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Median of finite values; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
