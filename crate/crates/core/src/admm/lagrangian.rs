use ndarray::{Array1, ArrayView1};

use super::{AdmmState, Problem};
use crate::linops::LinearMap;
use crate::penalties::{phi, phi_log, weighted, PenaltySpec};

/// Augmented Lagrangian of the splitting at `state`, recomputed from scratch.
///
/// `f(u) + R(v, ξ, ω) + ι(η) + Σ_i r_iᵀ c_i + (μ_i/2)‖c_i‖²` with the constraint
/// residuals `c = (u - Ax, v - Lx, η - Dσ, ξ - σ)`. The regularizer term is
/// `λΣφ_ε(v,ξ)` (LogLOP), `Σω_nφ(v_n,ξ_n) + (γ/2)‖ω - w‖²` (AdaLOP),
/// `λΣφ(v,ξ)` (LOP) or `λ‖v‖₁` (ℓ1). Returns `+∞` when any term is outside its domain.
pub fn augmented_lagrangian(problem: &Problem, s: &AdmmState) -> f64 {
    let ax = problem.a.apply_unchecked(s.x.view());
    let lx = problem.l.apply_unchecked(s.x.view());

    let mut total = problem.fidelity.value(s.u.view());
    total += match &problem.penalty {
        PenaltySpec::L1 { lambda } => lambda * s.v.iter().map(|v| v.abs()).sum::<f64>(),
        PenaltySpec::Lop { lambda, .. } => {
            lambda * s.v.iter().zip(s.xi.iter()).map(|(&v, &t)| phi(v, t)).sum::<f64>()
        }
        PenaltySpec::LogLop { lambda, epsilon, .. } => {
            lambda
                * s.v
                    .iter()
                    .zip(s.xi.iter())
                    .map(|(&v, &t)| phi_log(v, t, *epsilon))
                    .sum::<f64>()
        }
        PenaltySpec::AdaLop { gamma, .. } => {
            let data: f64 = s
                .omega
                .iter()
                .zip(s.v.iter().zip(s.xi.iter()))
                .map(|(&o, (&v, &t))| weighted(o, phi(v, t)))
                .sum();
            let reg: f64 = s.omega.iter().zip(s.w.iter()).map(|(o, w)| (o - w).powi(2)).sum();
            data + 0.5 * gamma * reg
        }
    };

    total += coupling(s.u.view(), ax.view(), s.r1.view(), s.mu1);
    total += coupling(s.v.view(), lx.view(), s.r2.view(), s.mu2);

    if let (Some(alpha), false) = (problem.penalty.alpha(), s.sigma.is_empty()) {
        let l1: f64 = s.eta.iter().map(|v| v.abs()).sum();
        if l1 > alpha * (1.0 + 1e-12) + 1e-12 {
            return f64::INFINITY;
        }
        let d = LinearMap::first_difference(s.sigma.len());
        let dsigma = d.apply_unchecked(s.sigma.view());
        total += coupling(s.eta.view(), dsigma.view(), s.r3.view(), s.mu3);
        total += coupling(s.xi.view(), s.sigma.view(), s.r4.view(), s.mu4);
    }
    total
}

/// `rᵀ(a - b) + (μ/2)‖a - b‖²`
fn coupling(a: ArrayView1<f64>, b: ArrayView1<f64>, r: ArrayView1<f64>, mu: f64) -> f64 {
    let c: Array1<f64> = &a - &b;
    r.dot(&c) + 0.5 * mu * c.dot(&c)
}
