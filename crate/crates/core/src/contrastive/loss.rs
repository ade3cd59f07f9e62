//! NT-Xent (normalised temperature-scaled cross entropy).
//!
//! Rows `2i` and `2i + 1` of the embedding matrix are a positive pair. Every
//! row is an anchor; its softmax runs over the other `2B - 1` rows, so each
//! anchor sees one positive and `2B - 2` negatives. The loss is the mean over
//! all `2B` anchors.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

fn check(embeddings: &Array2<f64>, temperature: f64) -> Result<()> {
    let rows = embeddings.nrows();
    if rows % 2 != 0 {
        return Err(Error::ShapeMismatch(format!("{rows} rows do not form pairs")));
    }
    if rows < 4 {
        return Err(Error::InvalidArgument(format!(
            "NT-Xent needs at least 2 pairs, got {}",
            rows / 2
        )));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be > 0")));
    }
    if embeddings.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding".into()));
    }
    Ok(())
}

/// Positive partner of anchor `i`.
#[inline]
pub fn positive_of(i: usize) -> usize {
    i ^ 1
}

/// Loss and gradient with respect to the unnormalised embeddings.
pub fn nt_xent(embeddings: &Array2<f64>, temperature: f64) -> Result<(f64, Array2<f64>)> {
    check(embeddings, temperature)?;
    let n = embeddings.nrows();
    let norms: Array1<f64> = embeddings.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroNorm(i));
    }
    let unit = embeddings / &norms.view().insert_axis(Axis(1));
    let sim = unit.dot(&unit.t());

    // g[i][j] = dL/ds_ij treating s_ij as it appears in anchor i's term.
    let mut g = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    let scale = 1.0 / (temperature * n as f64);
    for i in 0..n {
        let p = positive_of(i);
        let logits = sim.row(i).mapv(|s| s / temperature);
        let max = logits
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &l)| (l - max).exp())
            .sum();
        let lse = max + sum.ln();
        total += lse - logits[p];
        for j in 0..n {
            if j == i {
                continue;
            }
            let prob = (logits[j] - lse).exp();
            g[[i, j]] = (prob - if j == p { 1.0 } else { 0.0 }) * scale;
        }
    }
    let loss = total / n as f64;

    // s_ij = s_ji, so both directions contribute to dL/du_i.
    let sym = &g + &g.t();
    let grad_unit = sym.dot(&unit);
    let mut grad = Array2::<f64>::zeros((n, embeddings.ncols()));
    for i in 0..n {
        let u = unit.row(i);
        let gu = grad_unit.row(i);
        let radial = gu.dot(&u);
        let mut row = grad.row_mut(i);
        row.assign(&((&gu - &(&u * radial)) / norms[i]));
    }
    Ok((loss, grad))
}

pub fn nt_xent_loss(embeddings: &Array2<f64>, temperature: f64) -> Result<f64> {
    nt_xent(embeddings, temperature).map(|(l, _)| l)
}

pub fn nt_xent_gradient(embeddings: &Array2<f64>, temperature: f64) -> Result<Array2<f64>> {
    nt_xent(embeddings, temperature).map(|(_, g)| g)
}
