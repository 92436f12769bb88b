//! Reference evaluator for the latent-partition penalties at finite `α`.
//!
//! Minimizes `Σ_n h_n(σ_n)` subject to `‖Dσ‖₁ ≤ α` by exhaustive search on a
//! tensor grid followed by a pattern search along contiguous-segment
//! directions. Exponential in the length of `x`, so only short vectors are
//! accepted. Meant for tests and diagnostics.

use ndarray::ArrayView1;

use super::{phi, phi_log, phi_mcp, PenaltySpec};
use crate::error::{Error, Result};

/// Largest input length the brute-force evaluator accepts.
pub const MAX_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Grid points per coordinate (reduced automatically so the tensor grid
    /// stays below `max_cells`).
    pub points: usize,
    pub max_cells: usize,
    /// Number of best grid cells refined by pattern search.
    pub starts: usize,
    /// Pattern-search step at which refinement stops (relative to grid span).
    pub refine_tol: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points: 40,
            max_cells: 4_000_000,
            starts: 8,
            refine_tol: 1e-12,
        }
    }
}

/// Brute-force value of `Ψ(x)` (unscaled by `λ`) for LOP, LogLOP and AdaLOP.
///
/// For AdaLOP the inner minimum over `ω` is taken per entry, which turns the
/// summand into `φ_{γ,w_n}(x_n, σ_n)`.
pub fn penalty_bruteforce(x: ArrayView1<f64>, spec: &PenaltySpec, grid: &GridConfig) -> Result<f64> {
    let n = x.len();
    if n > MAX_LEN {
        return Err(Error::Unsupported(format!(
            "brute-force penalty is limited to length {MAX_LEN}, got {n}"
        )));
    }
    if grid.points < 2 || grid.starts == 0 || !(grid.refine_tol > 0.0) {
        return Err(Error::Parameter("grid needs >= 2 points, >= 1 start and a positive refine_tol".into()));
    }
    spec.validate(n)?;
    if n == 0 {
        return Ok(0.0);
    }
    let alpha = spec.alpha().ok_or_else(|| {
        Error::Unsupported("brute-force evaluation needs a latent-partition penalty".into())
    })?;
    let xs: Vec<f64> = x.to_vec();
    let xmax = xs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    match spec {
        PenaltySpec::Lop { .. } => {
            let h = |i: usize, s: f64| phi(xs[i], s);
            let hi = 2.0 * xmax + 1.0;
            Ok(search(n, alpha, &h, linear_grid(0.0, hi, grid.points), 0.0, grid))
        }
        PenaltySpec::LogLop { epsilon, .. } => {
            let h = |i: usize, s: f64| phi_log(xs[i], s, *epsilon);
            let top = (xmax / epsilon + 1.0).powi(2);
            let hi = 2.0 * top + 1.0;
            Ok(search(n, alpha, &h, geometric_grid(1.0, hi, grid.points), 1.0, grid))
        }
        PenaltySpec::AdaLop { gamma, .. } => {
            let w = spec.initial_weights(n).expect("adalop has weights");
            let h = |i: usize, s: f64| phi_mcp(xs[i], s, *gamma, w[i]);
            let hi = 2.0 * xmax + 1.0;
            Ok(search(n, alpha, &h, linear_grid(0.0, hi, grid.points), 0.0, grid))
        }
        PenaltySpec::L1 { .. } => unreachable!("l1 has no partition parameter"),
    }
}

fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..points)
        .map(|i| lo * (ratio * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn total_variation(s: &[f64]) -> f64 {
    s.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

fn search<H>(n: usize, alpha: f64, h: &H, mut axis: Vec<f64>, lower: f64, grid: &GridConfig) -> f64
where
    H: Fn(usize, f64) -> f64,
{
    // shrink the per-axis grid so points^n stays bounded
    let cap = (grid.max_cells as f64).powf(1.0 / n as f64).floor() as usize;
    if axis.len() > cap.max(2) {
        let keep = cap.max(2);
        axis = (0..keep)
            .map(|i| axis[i * (axis.len() - 1) / (keep - 1)])
            .collect();
    }
    let span = axis[axis.len() - 1] - axis[0];
    let feas_tol = 1e-12 * (1.0 + alpha);

    let objective = |s: &[f64]| -> f64 {
        if s.iter().any(|&v| v < lower) || total_variation(s) > alpha + feas_tol {
            return f64::INFINITY;
        }
        (0..n).map(|i| h(i, s[i])).sum()
    };

    // exhaustive tensor-grid scan, keeping the best few cells
    let m = axis.len();
    let mut idx = vec![0usize; n];
    let mut point = vec![axis[0]; n];
    let mut best: Vec<(f64, Vec<f64>)> = Vec::with_capacity(grid.starts + 1);
    loop {
        let v = objective(&point);
        if v.is_finite() && (best.len() < grid.starts || v < best[best.len() - 1].0) {
            best.push((v, point.clone()));
            best.sort_by(|a, b| a.0.total_cmp(&b.0));
            best.truncate(grid.starts);
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == n {
                return refine_all(best, &objective, span, n, grid.refine_tol);
            }
            idx[d] += 1;
            if idx[d] < m {
                point[d] = axis[idx[d]];
                break;
            }
            idx[d] = 0;
            point[d] = axis[0];
            d += 1;
        }
    }
}

fn refine_all<F>(starts: Vec<(f64, Vec<f64>)>, objective: &F, span: f64, n: usize, tol: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    // directions: indicator vectors of every contiguous segment
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut d = vec![0.0; n];
            d[i..=j].iter_mut().for_each(|v| *v = 1.0);
            dirs.push(d);
        }
    }
    let mut overall = f64::INFINITY;
    for (mut value, mut point) in starts {
        let mut step = span / 4.0;
        let mut trial = point.clone();
        while step > tol * span.max(1.0) {
            let mut improved = false;
            for d in &dirs {
                for sign in [1.0, -1.0] {
                    for k in 0..n {
                        trial[k] = point[k] + sign * step * d[k];
                    }
                    let v = objective(&trial);
                    if v < value {
                        value = v;
                        point.copy_from_slice(&trial);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        overall = overall.min(value);
    }
    overall
}
