use ndarray::{Array1, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Init, Problem};
use crate::error::{Error, Result};
use crate::linops::{norm_inf, solve_cg, solve_tridiag_sigma, CgOutcome, LinearMap};
use crate::penalties::{emcp_optimal_weight, phi, PenaltySpec};
use crate::prox::{bisect_xi_unchecked, elastic_net_scalar, project_l1_ball, prox_perspective, soft_threshold};

/// Primal, auxiliary and dual iterates of the ADMM splitting
/// `u = Ax, v = Lx, η = Dσ, ξ = σ`.
///
/// `sigma`, `eta`, `xi`, `r3`, `r4` are empty for the plain `ℓ1` solver;
/// `omega` and `w` are empty unless the penalty is AdaLOP.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Array1<f64>,
    pub sigma: Array1<f64>,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub eta: Array1<f64>,
    pub xi: Array1<f64>,
    pub omega: Array1<f64>,
    pub w: Array1<f64>,
    pub r1: Array1<f64>,
    pub r2: Array1<f64>,
    pub r3: Array1<f64>,
    pub r4: Array1<f64>,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub iter: usize,
    /// `Ax` and `Lx` at the current `x`.
    pub ax: Array1<f64>,
    pub lx: Array1<f64>,
}

impl AdmmState {
    /// Builds the starting point. Auxiliary variables are placed where the
    /// variational function is finite so the first weight update is well defined.
    pub fn initial(problem: &Problem, mu: [f64; 4], init: Init) -> Result<Self> {
        let n = problem.a.cols();
        let j = problem.a.rows();
        let k = problem.l.rows();
        let partition = problem.has_partition();
        let kp = if partition { k } else { 0 };
        let kd = kp.saturating_sub(1);

        let x = match init {
            Init::Zeros => Array1::zeros(n),
            Init::RandomNormal(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Array1::from_iter((0..n).map(|_| StandardNormal.sample(&mut rng)))
            }
        };
        let ax = problem.a.apply_unchecked(x.view());
        let lx = problem.l.apply_unchecked(x.view());
        let (u, v) = match init {
            Init::Zeros => (Array1::zeros(j), Array1::zeros(k)),
            Init::RandomNormal(_) => (ax.clone(), lx.clone()),
        };

        let sigma = match &problem.penalty {
            PenaltySpec::L1 { .. } => Array1::zeros(0),
            PenaltySpec::LogLop { epsilon, .. } => v.mapv(|vn| (vn.abs() / epsilon + 1.0).powi(2)),
            _ => v.mapv(f64::abs),
        };
        let eta = match problem.penalty.alpha() {
            Some(alpha) if partition => {
                let d = LinearMap::first_difference(kp);
                project_l1_ball(d.apply_unchecked(sigma.view()).view(), alpha)?
            }
            _ => Array1::zeros(0),
        };
        let w = problem.penalty.initial_weights(k).unwrap_or_else(|| Array1::zeros(0));

        Ok(AdmmState {
            x,
            xi: sigma.clone(),
            sigma,
            u,
            v,
            eta,
            omega: w.clone(),
            w,
            r1: Array1::zeros(j),
            r2: Array1::zeros(k),
            r3: Array1::zeros(kd),
            r4: Array1::zeros(kp),
            mu1: mu[0],
            mu2: mu[1],
            mu3: mu[2],
            mu4: mu[3],
            iter: 0,
            ax,
            lx,
        })
    }

    /// Solves `(μ1AᵀA + μ2LᵀL)x = Aᵀ(μ1u + r1) + Lᵀ(μ2v + r2)` by CG warm-started at the current `x`.
    pub fn step_x(&mut self, a: &LinearMap, l: &LinearMap, cg_tol: f64, cg_max_iter: usize) -> Result<CgOutcome> {
        let (mu1, mu2) = (self.mu1, self.mu2);
        let t1 = &self.u * mu1 + &self.r1;
        let t2 = &self.v * mu2 + &self.r2;
        let rhs = a.adjoint_unchecked(t1.view()) + l.adjoint_unchecked(t2.view());
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: self.iter + 1, variable: "x" });
        }
        let normal = |z: ndarray::ArrayView1<f64>| {
            let az = a.apply_unchecked(z);
            let lz = l.apply_unchecked(z);
            a.adjoint_unchecked(az.view()) * mu1 + l.adjoint_unchecked(lz.view()) * mu2
        };
        let out = solve_cg(normal, rhs.view(), self.x.view(), cg_tol, cg_max_iter)?;
        self.x.assign(&out.x);
        self.ax = a.apply_unchecked(self.x.view());
        self.lx = l.apply_unchecked(self.x.view());
        Ok(out)
    }

    /// `u = prox_{f/μ1}(Ax - r1/μ1)`.
    pub fn step_u(&mut self, fidelity: &crate::prox::Fidelity) -> Result<()> {
        let point = &self.ax - &(&self.r1 / self.mu1);
        self.u = fidelity.prox(1.0 / self.mu1, point.view())?;
        Ok(())
    }

    /// Solves `(μ3DᵀD + μ4I)σ = Dᵀ(μ3η + r3) + μ4ξ + r4`.
    pub fn step_sigma(&mut self) -> Result<()> {
        let k = self.sigma.len();
        let d = LinearMap::first_difference(k);
        let t = &self.eta * self.mu3 + &self.r3;
        let rhs = d.adjoint_unchecked(t.view()) + &self.xi * self.mu4 + &self.r4;
        self.sigma = solve_tridiag_sigma(self.mu3, self.mu4, rhs.view())?;
        Ok(())
    }

    /// `η = P_{‖·‖₁ ≤ α}(Dσ - r3/μ3)`.
    pub fn step_eta(&mut self, alpha: f64) -> Result<()> {
        let d = LinearMap::first_difference(self.sigma.len());
        let point = d.apply_unchecked(self.sigma.view()) - &(&self.r3 / self.mu3);
        self.eta = project_l1_ball(point.view(), alpha)?;
        Ok(())
    }

    /// Elastic-net prox with per-entry weights
    /// `λ1 = λ/(μ2 ξ_n ε)`, `λ2 = λ/(2μ2 ξ_n ε²)`.
    pub fn step_v_logop(&mut self, lambda: f64, epsilon: f64) {
        let mu2 = self.mu2;
        let point = &self.lx - &(&self.r2 / mu2);
        self.v = Zip::from(&point).and(&self.xi).map_collect(|&p, &xi| {
            let l1 = lambda / (mu2 * xi * epsilon);
            let l2 = lambda / (2.0 * mu2 * xi * epsilon * epsilon);
            elastic_net_scalar(p, l1, l2)
        });
    }

    /// Per entry, `ξ_n = argmin_{ξ ≥ 1}` of the log-variational term plus the
    /// `r4` coupling, by bisection.
    pub fn step_xi_logop(&mut self, lambda: f64, epsilon: f64, tol: f64) {
        let mu4 = self.mu4;
        let xi = Zip::from(&self.v)
            .and(&self.sigma)
            .and(&self.r4)
            .map_collect(|&vn, &sn, &rn| {
                let a = (vn.abs() / epsilon + 1.0).powi(2);
                let b = sn - rn / mu4;
                if lambda == 0.0 {
                    b.max(1.0)
                } else {
                    bisect_xi_unchecked(a, b, lambda, mu4, tol)
                }
            });
        self.xi = xi;
    }

    /// `(v_n, ξ_n) = prox_{(weight_n/μ2)φ}((Lx - r2/μ2)_n, (σ - r4/μ4)_n)`; requires `μ4 = μ2`.
    pub fn step_v_xi_weighted(&mut self, weight: impl Fn(usize) -> f64) -> Result<()> {
        let k = self.v.len();
        for n in 0..k {
            let pv = self.lx[n] - self.r2[n] / self.mu2;
            let px = self.sigma[n] - self.r4[n] / self.mu4;
            let (vn, xn) = prox_perspective(weight(n) / self.mu2, pv, px)?;
            self.v[n] = vn;
            self.xi[n] = xn;
        }
        Ok(())
    }

    /// AdaLOP joint update using the current adaptive weights `ω`.
    pub fn step_v_xi_adalop(&mut self) -> Result<()> {
        let omega = self.omega.clone();
        self.step_v_xi_weighted(|n| omega[n])
    }

    /// `ω_n = max(0, w_n - φ(v_n, ξ_n)/γ)`, then `w ← ω`.
    pub fn step_omega_w_adalop(&mut self, gamma: f64) {
        let omega = Zip::from(&self.w)
            .and(&self.v)
            .and(&self.xi)
            .map_collect(|&wn, &vn, &xn| emcp_optimal_weight(phi(vn, xn), gamma, wn));
        self.w.assign(&omega);
        self.omega = omega;
    }

    /// `v = soft(Lx - r2/μ2, λ/μ2)` for the plain `ℓ1` penalty.
    pub fn step_v_l1(&mut self, lambda: f64) {
        let t = lambda / self.mu2;
        let point = &self.lx - &(&self.r2 / self.mu2);
        self.v = point.mapv(|p| soft_threshold(p, t));
    }

    /// Dual ascent. Returns the `∞`-norms of the four constraint residuals
    /// (`u - Ax`, `v - Lx`, `η - Dσ`, `ξ - σ`); the last two are zero without a partition.
    pub fn step_duals(&mut self) -> [f64; 4] {
        let res1 = &self.u - &self.ax;
        let res2 = &self.v - &self.lx;
        self.r1.scaled_add(self.mu1, &res1);
        self.r2.scaled_add(self.mu2, &res2);
        let mut norms = [norm_inf(res1.view()), norm_inf(res2.view()), 0.0, 0.0];
        if !self.sigma.is_empty() {
            let d = LinearMap::first_difference(self.sigma.len());
            let res3 = &self.eta - &d.apply_unchecked(self.sigma.view());
            let res4 = &self.xi - &self.sigma;
            self.r3.scaled_add(self.mu3, &res3);
            self.r4.scaled_add(self.mu4, &res4);
            norms[2] = norm_inf(res3.view());
            norms[3] = norm_inf(res4.view());
        }
        norms
    }

    pub fn scale_mu(&mut self, rho: f64) {
        self.mu1 *= rho;
        self.mu2 *= rho;
        self.mu3 *= rho;
        self.mu4 *= rho;
    }

    /// Name of the first iterate holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        let fields: [(&'static str, &Array1<f64>); 12] = [
            ("x", &self.x),
            ("u", &self.u),
            ("v", &self.v),
            ("sigma", &self.sigma),
            ("eta", &self.eta),
            ("xi", &self.xi),
            ("omega", &self.omega),
            ("w", &self.w),
            ("r1", &self.r1),
            ("r2", &self.r2),
            ("r3", &self.r3),
            ("r4", &self.r4),
        ];
        fields
            .iter()
            .find(|(_, v)| v.iter().any(|e| !e.is_finite()))
            .map(|(name, _)| *name)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(variable) => Err(Error::NonFinite {
                iteration: self.iter,
                variable,
            }),
            None => Ok(()),
        }
    }
}
