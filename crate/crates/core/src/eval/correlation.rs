//! Pearson and Spearman rank correlation.

/// Degenerate correlation inputs. Callers treat these as a distinguished
/// null result rather than a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CorrelationError {
    #[error("input lengths differ")]
    LengthMismatch,
    #[error("need at least two samples")]
    TooFew,
    #[error("zero variance on one side")]
    ZeroVariance,
    #[error("non-finite input value")]
    NonFinite,
}

fn validate(a: &[f64], b: &[f64]) -> Result<(), CorrelationError> {
    if a.len() != b.len() {
        return Err(CorrelationError::LengthMismatch);
    }
    if a.len() < 2 {
        return Err(CorrelationError::TooFew);
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    Ok(())
}

/// Pearson linear correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, CorrelationError> {
    validate(a, b)?;
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut s_ab = 0.0;
    let mut s_aa = 0.0;
    let mut s_bb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        s_ab += dx * dy;
        s_aa += dx * dx;
        s_bb += dy * dy;
    }
    if s_aa <= 0.0 || s_bb <= 0.0 {
        return Err(CorrelationError::ZeroVariance);
    }
    Ok(s_ab / (s_aa * s_bb).sqrt())
}

/// Ranks with average-rank tie handling, 1-based.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the average 1-based rank.
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn srcc(a: &[f64], b: &[f64]) -> Result<f64, CorrelationError> {
    validate(a, b)?;
    pearson(&average_ranks(a), &average_ranks(b))
}
