//! Variational functions, scalar penalties and the closed-form limits of the
//! latent-partition penalties.
//!
//! The `φ` family returns `f64::INFINITY` outside its domain. Multiplying such
//! a value by a zero weight is treated as zero (see [`weighted`]).

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod bruteforce;

/// `φ(x, τ) = x²/(2τ) + τ/2` for `τ > 0`, `φ(0, 0) = 0`, `+∞` otherwise.
///
/// Minimizing over `τ` gives `|x|`, attained at `τ = |x|`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VarL2;

impl VarL2 {
    #[inline]
    pub fn eval(&self, x: f64, tau: f64) -> f64 {
        phi(x, tau)
    }
}

/// `φ_ε(x, τ) = (|x|/ε + 1)²/(2τ) + ½ log τ - ½` for `τ ≥ 1`, `+∞` otherwise.
///
/// Minimizing over `τ` gives `log(|x|/ε + 1)`, attained at `τ = (|x|/ε + 1)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarLog {
    pub epsilon: f64,
}

impl VarLog {
    #[inline]
    pub fn eval(&self, x: f64, tau: f64) -> f64 {
        phi_log(x, tau, self.epsilon)
    }

    pub fn argmin_tau(&self, x: f64) -> f64 {
        (x.abs() / self.epsilon + 1.0).powi(2)
    }
}

/// `φ_{γ,w}(x, τ) = g(φ(x, τ))` with `g` the MCP profile; bounded by `γw²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarMcp {
    pub gamma: f64,
    pub w: f64,
}

impl VarMcp {
    #[inline]
    pub fn eval(&self, x: f64, tau: f64) -> f64 {
        phi_mcp(x, tau, self.gamma, self.w)
    }
}

#[inline]
pub fn phi(x: f64, tau: f64) -> f64 {
    if tau > 0.0 {
        0.5 * (x * x / tau + tau)
    } else if x == 0.0 && tau == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[inline]
pub fn phi_log(x: f64, tau: f64, epsilon: f64) -> f64 {
    if tau >= 1.0 {
        let z = x.abs() / epsilon + 1.0;
        0.5 * z * z / tau + 0.5 * tau.ln() - 0.5
    } else {
        f64::INFINITY
    }
}

#[inline]
pub fn phi_mcp(x: f64, tau: f64, gamma: f64, w: f64) -> f64 {
    mcp_profile(phi(x, tau), gamma, w)
}

/// `g(z) = w z - z²/(2γ)` on `[0, γw]`, `γw²/2` beyond (including `z = +∞`).
#[inline]
pub fn mcp_profile(z: f64, gamma: f64, w: f64) -> f64 {
    if z <= gamma * w {
        w * z - z * z / (2.0 * gamma)
    } else {
        0.5 * gamma * w * w
    }
}

/// `weight · value` under the convention `0 · ∞ = 0`.
#[inline]
pub fn weighted(weight: f64, value: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * value
    }
}

/// Log-sum penalty `Σ log(|x_n|/ε + 1)`.
pub fn log_sum(x: ArrayView1<f64>, epsilon: f64) -> f64 {
    x.iter().map(|v| (v.abs() / epsilon).ln_1p()).sum()
}

/// Minimax concave penalty of a scalar.
#[inline]
pub fn mcp(x: f64, gamma: f64, w: f64) -> f64 {
    mcp_profile(x.abs(), gamma, w)
}

/// Weight attaining the inner minimum of `ω·φ + (γ/2)(ω - w)²` over `ω ≥ 0`.
#[inline]
pub fn emcp_optimal_weight(phi_val: f64, gamma: f64, w: f64) -> f64 {
    if phi_val.is_infinite() {
        return 0.0;
    }
    (w - phi_val / gamma).max(0.0)
}

/// Block penalty `|B| · log √( (1/|B|) Σ (|x_n|/ε + 1)² )`.
pub fn block_penalty_theta(xblock: ArrayView1<f64>, epsilon: f64) -> Result<f64> {
    if xblock.is_empty() {
        return Err(Error::Input("block penalty needs a nonempty block".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be > 0, got {epsilon}")));
    }
    let m = xblock.len() as f64;
    let mean_sq = xblock
        .iter()
        .map(|v| (v.abs() / epsilon + 1.0).powi(2))
        .sum::<f64>()
        / m;
    Ok(0.5 * m * mean_sq.ln())
}

/// Regularizer selection and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PenaltySpec {
    /// `λ‖Lx‖₁`
    L1 { lambda: f64 },
    /// Convex latent optimally partitioned `ℓ2/ℓ1`, `λΨ_α(Lx)`.
    Lop { lambda: f64, alpha: f64 },
    /// `λΨ_{α,ε}(Lx)` with logarithmic variational function.
    #[serde(rename = "loglop")]
    LogLop { lambda: f64, alpha: f64, epsilon: f64 },
    /// `Ψ_{α,γ,w}(Lx)` with adaptive weights; `w0 = λ·1` when not given.
    #[serde(rename = "adalop")]
    AdaLop {
        lambda: f64,
        alpha: f64,
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w0: Option<Vec<f64>>,
    },
}

impl PenaltySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltySpec::L1 { .. } => "l1",
            PenaltySpec::Lop { .. } => "lop",
            PenaltySpec::LogLop { .. } => "loglop",
            PenaltySpec::AdaLop { .. } => "adalop",
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            PenaltySpec::L1 { lambda }
            | PenaltySpec::Lop { lambda, .. }
            | PenaltySpec::LogLop { lambda, .. }
            | PenaltySpec::AdaLop { lambda, .. } => *lambda,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            PenaltySpec::L1 { .. } => None,
            PenaltySpec::Lop { alpha, .. }
            | PenaltySpec::LogLop { alpha, .. }
            | PenaltySpec::AdaLop { alpha, .. } => Some(*alpha),
        }
    }

    pub fn with_lambda(&self, value: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            PenaltySpec::L1 { lambda }
            | PenaltySpec::Lop { lambda, .. }
            | PenaltySpec::LogLop { lambda, .. }
            | PenaltySpec::AdaLop { lambda, .. } => *lambda = value,
        }
        out
    }

    pub fn with_alpha(&self, value: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            PenaltySpec::L1 { .. } => {}
            PenaltySpec::Lop { alpha, .. }
            | PenaltySpec::LogLop { alpha, .. }
            | PenaltySpec::AdaLop { alpha, .. } => *alpha = value,
        }
        out
    }

    /// Checks parameter ranges; `k` is the length of `Lx`.
    pub fn validate(&self, k: usize) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if let Some(alpha) = self.alpha() {
            if !(alpha >= 0.0) || alpha.is_nan() {
                return Err(Error::Parameter(format!("alpha must be >= 0, got {alpha}")));
            }
        }
        match self {
            PenaltySpec::LogLop { epsilon, .. } if !(*epsilon > 0.0) || !epsilon.is_finite() => {
                Err(Error::Parameter(format!("epsilon must be > 0, got {epsilon}")))
            }
            PenaltySpec::AdaLop { gamma, w0, .. } => {
                if !(*gamma > 0.0) || gamma.is_nan() {
                    return Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")));
                }
                if let Some(w) = w0 {
                    if w.len() != k {
                        return Err(Error::Shape {
                            context: "AdaLOP initial weights",
                            expected: k,
                            actual: w.len(),
                        });
                    }
                    if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                        return Err(Error::Parameter("initial weights must be finite and >= 0".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Initial AdaLOP weights of length `k` (`λ·1` unless given).
    pub fn initial_weights(&self, k: usize) -> Option<Array1<f64>> {
        match self {
            PenaltySpec::AdaLop { lambda, w0, .. } => Some(match w0 {
                Some(w) => Array1::from(w.clone()),
                None => Array1::from_elem(k, *lambda),
            }),
            _ => None,
        }
    }
}

/// Limit of the partition parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `α → 0`: one global block.
    AlphaZero,
    /// `α → ∞`: every entry is its own block.
    AlphaInf,
}

/// Closed-form value of the LogLOP or AdaLOP penalty (without the `λ` factor
/// for LogLOP) in the limits `α → 0` and `α → ∞`.
pub fn penalty_closed_form(x: ArrayView1<f64>, spec: &PenaltySpec, regime: Regime) -> Result<f64> {
    spec.validate(x.len())?;
    match (spec, regime) {
        (PenaltySpec::LogLop { epsilon, .. }, Regime::AlphaInf) => Ok(log_sum(x, *epsilon)),
        (PenaltySpec::LogLop { epsilon, .. }, Regime::AlphaZero) => {
            if x.is_empty() {
                return Ok(0.0);
            }
            block_penalty_theta(x, *epsilon)
        }
        (PenaltySpec::AdaLop { gamma, .. }, regime) => {
            let w = spec.initial_weights(x.len()).expect("adalop has weights");
            Ok(match regime {
                Regime::AlphaInf => x.iter().zip(w.iter()).map(|(&xn, &wn)| mcp(xn, *gamma, wn)).sum(),
                Regime::AlphaZero => adaptive_l2_value(x, w.view(), *gamma),
            })
        }
        _ => Err(Error::Unsupported(format!(
            "closed-form limits are only available for loglop and adalop, not {}",
            spec.name()
        ))),
    }
}

/// `min_{ω ≥ 0, τ ≥ 0} Σ ω_n φ(x_n, τ) + (γ/2)‖ω - w‖²` by alternating the
/// closed-form `ω`-step and `τ = ‖x‖_{ω,2} / ‖ω‖₁^{1/2}`.
///
/// The objective is not jointly convex, so the alternation is started from the
/// `w`-weighted scale and from every `|x_n|`, keeping the best fixed point.
fn adaptive_l2_value(x: ArrayView1<f64>, w: ArrayView1<f64>, gamma: f64) -> f64 {
    let objective = |omega: &Array1<f64>, tau: f64| -> f64 {
        let data: f64 = omega
            .iter()
            .zip(x.iter())
            .map(|(&o, &xn)| weighted(o, phi(xn, tau)))
            .sum();
        let reg: f64 = omega.iter().zip(w.iter()).map(|(o, wn)| (o - wn).powi(2)).sum();
        data + 0.5 * gamma * reg
    };
    let omega_step = |tau: f64| -> Array1<f64> {
        Array1::from_iter(
            x.iter()
                .zip(w.iter())
                .map(|(&xn, &wn)| emcp_optimal_weight(phi(xn, tau), gamma, wn)),
        )
    };
    let tau_step = |omega: &Array1<f64>| -> Option<f64> {
        let wsum: f64 = omega.sum();
        if wsum <= 0.0 {
            return None;
        }
        let wx2: f64 = omega.iter().zip(x.iter()).map(|(o, xn)| o * xn * xn).sum();
        Some(wx2.sqrt() / wsum.sqrt())
    };

    let mut starts: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    if let Some(t) = tau_step(&w.to_owned()) {
        starts.push(t);
    }

    let mut best = 0.5 * gamma * w.dot(&w); // ω = 0
    for tau0 in starts {
        let mut tau = tau0;
        let mut prev = f64::INFINITY;
        for _ in 0..10_000 {
            let omega = omega_step(tau);
            let value = match tau_step(&omega) {
                Some(t) => {
                    tau = t;
                    objective(&omega, tau)
                }
                None => objective(&omega, tau),
            };
            if (prev - value).abs() < 1e-12 || value >= prev {
                prev = prev.min(value);
                break;
            }
            prev = value;
        }
        best = best.min(prev);
    }
    best
}
