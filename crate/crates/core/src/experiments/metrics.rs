use ndarray::ArrayView1;

use crate::error::{check_len, Error, Result};

/// Value reported by [`metric_snr`] for an exact recovery. Relative errors
/// below `1e-6`, the default solver tolerance, also report the cap.
pub const SNR_CAP_DB: f64 = 120.0;

/// Default support threshold for [`metric_f1`], relative to `max|x̂|`.
pub const DEFAULT_F1_THRESHOLD: f64 = 1e-3;

fn sq_norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `20 log10(‖x0‖ / ‖x̂ - x0‖)`, capped at [`SNR_CAP_DB`].
pub fn metric_snr(x_hat: ArrayView1<f64>, x0: ArrayView1<f64>) -> Result<f64> {
    check_len("metric_snr", x0.len(), x_hat.len())?;
    let signal = sq_norm(x0);
    if signal == 0.0 {
        return Err(Error::Input("SNR is undefined for a zero reference signal".into()));
    }
    let err = sq_dist(x_hat, x0);
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / err).log10()).min(SNR_CAP_DB))
}

/// F1 score of the predicted support `{n : |x̂_n| > θ·max|x̂|}` against the
/// nonzero entries of `x0`. Two empty supports score 1.
pub fn metric_f1(x_hat: ArrayView1<f64>, x0: ArrayView1<f64>, theta: f64) -> Result<f64> {
    check_len("metric_f1", x0.len(), x_hat.len())?;
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::Parameter(format!("support threshold must be >= 0, got {theta}")));
    }
    let peak = x_hat.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = theta * peak;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &t) in x_hat.iter().zip(x0.iter()) {
        let predicted = peak > 0.0 && p.abs() > cut;
        match (predicted, t != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fneg == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

/// `‖x̂ - x0‖² / ‖x0‖²`.
pub fn metric_nmse(x_hat: ArrayView1<f64>, x0: ArrayView1<f64>) -> Result<f64> {
    check_len("metric_nmse", x0.len(), x_hat.len())?;
    let signal = sq_norm(x0);
    if signal == 0.0 {
        return Err(Error::Input("NMSE is undefined for a zero reference signal".into()));
    }
    Ok(sq_dist(x_hat, x0) / signal)
}
