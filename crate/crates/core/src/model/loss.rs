use crate::{Error, Matrix, Result};

/// Mean softmax cross-entropy and its gradient with respect to the logits.
///
/// Each row is shifted by its maximum before exponentiation. The gradient is
/// `(softmax − one_hot) / B`.
pub fn softmax_cross_entropy(
    logits: &Matrix<f64>,
    targets: &[usize],
) -> Result<(f64, Matrix<f64>)> {
    let (b, c) = logits.shape();
    if targets.len() != b {
        return Err(Error::ShapeMismatch(format!(
            "{b} logit rows but {} targets",
            targets.len()
        )));
    }
    if b == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut grad = Matrix::<f64>::zeros(b, c);
    let mut total = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        if t >= c {
            return Err(Error::IndexOutOfRange {
                target: t,
                classes: c,
            });
        }
        let row = logits.row(i);
        let (argmax, max) = row_max(row);
        // log Σ e^{z−max} = ln(1 + Σ_{k≠argmax} e^{z_k−max})
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != argmax)
            .map(|(_, z)| (z - max).exp())
            .sum();
        let shifted_lse = rest.ln_1p();
        let log_z = max + shifted_lse;
        total += (max - row[t]) + shifted_lse;
        let g = grad.row_mut(i);
        for (gk, z) in g.iter_mut().zip(row) {
            *gk = (z - log_z).exp() / b as f64;
        }
        g[t] -= 1.0 / b as f64;
    }
    Ok((total / b as f64, grad))
}

fn row_max(row: &[f64]) -> (usize, f64) {
    row.iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, z)| if z > acc.1 { (k, z) } else { acc },
        )
}

/// Per-row log-softmax, used by evaluation code that wants probabilities.
pub fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    row.iter().map(|z| z - log_z).collect()
}

/// Mean sigmoid binary cross-entropy and its gradient `(σ(z) − y) / B`.
///
/// Uses `max(z, 0) − z·y + ln(1 + e^{−|z|})`, which is finite for any
/// finite logit.
pub fn binary_cross_entropy(logits: &[f64], targets: &[bool]) -> Result<(f64, Vec<f64>)> {
    let b = logits.len();
    if targets.len() != b {
        return Err(Error::ShapeMismatch(format!(
            "{b} logits but {} targets",
            targets.len()
        )));
    }
    if b == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| {
            let y = if y { 1.0 } else { 0.0 };
            total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            (sigmoid(z) - y) / b as f64
        })
        .collect();
    Ok((total / b as f64, grad))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
