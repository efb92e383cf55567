use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn check_shapes(pred: &Matrix, truth: &Matrix) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if pred.rows() == 0 || pred.cols() == 0 {
        return Err(Error::InvalidInput("empty prediction".into()));
    }
    Ok(())
}

/// Mean of squared entry-wise errors.
pub fn mse(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    check_shapes(pred, truth)?;
    let sse: f64 = pred.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sse / pred.as_slice().len() as f64)
}

/// Channel-averaged `1 − SSE/SST`, with SST taken around each column's mean.
pub fn r_squared(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    check_shapes(pred, truth)?;
    let (rows, cols) = truth.shape();
    let mut total = 0.0;
    for j in 0..cols {
        let mean = (0..rows).map(|i| truth[(i, j)]).sum::<f64>() / rows as f64;
        let sst: f64 = (0..rows).map(|i| (truth[(i, j)] - mean).powi(2)).sum();
        let sse: f64 = (0..rows).map(|i| (truth[(i, j)] - pred[(i, j)]).powi(2)).sum();
        if sst == 0.0 {
            return Err(Error::UndefinedR2 { channel: j });
        }
        total += 1.0 - sse / sst;
    }
    Ok(total / cols as f64)
}
