//! ADMM solvers for `minimize_x f(Ax) + R(Lx)`.
//!
//! All four regularizers share one loop over the splitting
//! `u = Ax, v = Lx, η = Dσ, ξ = σ`:
//!
//! | penalty | sweep order |
//! |---------|-------------|
//! | LogLOP  | x, u, v, σ, η, ξ, duals, μ ← ρμ |
//! | AdaLOP  | (ω, w), x, u, σ, η, (v, ξ), duals, μ ← ρμ |
//! | LOP     | x, u, σ, η, (v, ξ) with ω ≡ λ, duals, μ ← ρμ |
//! | ℓ1      | x, u, v (soft threshold), duals, μ ← ρμ |
//!
//! A run stops after `max_iter` sweeps or once every constraint residual and
//! the change in `x` fall below `stop_tol`.

mod lagrangian;
mod state;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use lagrangian::augmented_lagrangian;
pub use state::AdmmState;

use crate::error::{check_len, Error, Result};
use crate::linops::{norm_inf, LinearMap};
use crate::penalties::PenaltySpec;
use crate::prox::{Fidelity, DEFAULT_BISECT_TOL};

/// Margin added to `λ/54` for the default LogLOP `μ4`.
pub const LOGLOP_MU4_MARGIN: f64 = 1e-3;

/// A recovery problem: observation operator `A`, sparsifying transform `L`,
/// data fidelity and regularizer.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: LinearMap,
    pub l: LinearMap,
    pub fidelity: Fidelity,
    pub penalty: PenaltySpec,
}

impl Problem {
    pub fn new(a: LinearMap, l: LinearMap, fidelity: Fidelity, penalty: PenaltySpec) -> Result<Self> {
        check_len("Problem: cols of L vs cols of A", a.cols(), l.cols())?;
        check_len("Problem: observation length vs rows of A", a.rows(), fidelity.len())?;
        penalty.validate(l.rows())?;
        if !matches!(penalty, PenaltySpec::L1 { .. }) && l.rows() == 0 {
            return Err(Error::Input("latent-partition penalties need L with at least one row".into()));
        }
        Ok(Problem { a, l, fidelity, penalty })
    }

    pub fn with_penalty(&self, penalty: PenaltySpec) -> Result<Self> {
        Problem::new(self.a.clone(), self.l.clone(), self.fidelity.clone(), penalty)
    }

    /// Whether the penalty carries the latent partition `(σ, η, ξ)`.
    pub fn has_partition(&self) -> bool {
        !matches!(self.penalty, PenaltySpec::L1 { .. })
    }
}

/// Starting point of the iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Zeros,
    /// `x⁰ ~ N(0, I)` from the given seed; `u⁰ = Ax⁰`, `v⁰ = Lx⁰` and
    /// `σ⁰ = ξ⁰` at the per-entry minimizer of the variational function.
    RandomNormal(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmConfig {
    pub max_iter: usize,
    /// Growth factor of the penalty parameters, `≥ 1`.
    pub rho: f64,
    /// `(μ1, μ2, μ3, μ4)`; `None` selects defaults scaled to the fidelity
    /// curvature (see [`AdmmConfig::resolve_mu`]).
    pub mu_init: Option<[f64; 4]>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub bisect_tol: f64,
    pub stop_tol: f64,
    pub init: Init,
    pub record_lagrangian: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            max_iter: 2000,
            rho: 1.01,
            mu_init: None,
            cg_tol: 1e-10,
            cg_max_iter: 1000,
            bisect_tol: DEFAULT_BISECT_TOL,
            stop_tol: 1e-6,
            init: Init::Zeros,
            record_lagrangian: true,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return Err(Error::Config(format!("rho must be >= 1, got {}", self.rho)));
        }
        for (name, v) in [
            ("cg_tol", self.cg_tol),
            ("bisect_tol", self.bisect_tol),
            ("stop_tol", self.stop_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(mu) = self.mu_init {
            if mu.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
                return Err(Error::Config(format!("all mu must be > 0, got {mu:?}")));
            }
        }
        Ok(())
    }

    /// Penalty parameters for `penalty`, applying the per-kind rules
    /// (`μ4 = μ2` for LOP/AdaLOP, `μ4 > λ/54` for LogLOP).
    ///
    /// The defaults are `κ(1, 1, 1, 1)` with `κ` the fidelity curvature scale,
    /// except LogLOP's `μ4 = λ/54 + κ·1e-3`. A default that ignores `κ` lets
    /// a weakly curved fidelity freeze once `μ` has grown.
    pub fn resolve_mu(&self, penalty: &PenaltySpec, curvature: f64) -> Result<[f64; 4]> {
        let mu = match self.mu_init {
            Some(mu) => mu,
            None => {
                let k = curvature;
                let mu4 = match penalty {
                    PenaltySpec::LogLop { lambda, .. } => lambda / 54.0 + k * LOGLOP_MU4_MARGIN,
                    _ => k,
                };
                [k, k, k, mu4]
            }
        };
        match penalty {
            PenaltySpec::Lop { .. } | PenaltySpec::AdaLop { .. } if mu[3] != mu[1] => Err(Error::Config(
                format!("{} requires mu4 = mu2, got mu2={}, mu4={}", penalty.name(), mu[1], mu[3]),
            )),
            PenaltySpec::LogLop { lambda, .. } if !(mu[3] > lambda / 54.0) => Err(Error::Config(format!(
                "loglop requires mu4 > lambda/54 = {}, got {}",
                lambda / 54.0,
                mu[3]
            ))),
            _ => Ok(mu),
        }
    }
}

/// Output of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_hat: Array1<f64>,
    /// Latent partition vector; empty for `ℓ1`.
    pub sigma_hat: Array1<f64>,
    /// Final adaptive weights (AdaLOP only).
    pub weights: Option<Array1<f64>>,
    /// Augmented Lagrangian after each sweep (empty when not recorded).
    pub lagrangian_trace: Vec<f64>,
    /// Largest constraint-residual `∞`-norm after each sweep.
    pub primal_residuals: Vec<f64>,
    pub cg_iterations: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-sweep diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepInfo {
    pub residuals: [f64; 4],
    pub primal_residual: f64,
    pub x_change: f64,
    pub cg_iterations: usize,
    pub cg_converged: bool,
    pub lagrangian: Option<f64>,
}

/// Stepwise driver around [`AdmmState`]. Traces survive a failed sweep, so a
/// caller can still report the partial run.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    problem: &'a Problem,
    config: AdmmConfig,
    pub state: AdmmState,
    pub lagrangian_trace: Vec<f64>,
    pub primal_residuals: Vec<f64>,
    pub cg_iterations: Vec<usize>,
    converged: bool,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a Problem, config: AdmmConfig) -> Result<Self> {
        config.validate()?;
        let mu = config.resolve_mu(&problem.penalty, problem.fidelity.curvature_scale())?;
        let state = AdmmState::initial(problem, mu, config.init)?;
        Ok(Solver {
            problem,
            config,
            state,
            lagrangian_trace: Vec::new(),
            primal_residuals: Vec::new(),
            cg_iterations: Vec::new(),
            converged: false,
        })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.config
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// One full sweep in the order of the selected algorithm.
    pub fn sweep(&mut self) -> Result<SweepInfo> {
        let p = self.problem;
        let cfg = &self.config;
        let s = &mut self.state;
        let x_prev = s.x.clone();

        let cg = match &p.penalty {
            PenaltySpec::L1 { lambda } => {
                let cg = s.step_x(&p.a, &p.l, cfg.cg_tol, cfg.cg_max_iter)?;
                s.step_u(&p.fidelity)?;
                s.step_v_l1(*lambda);
                cg
            }
            PenaltySpec::LogLop { lambda, alpha, epsilon } => {
                let cg = s.step_x(&p.a, &p.l, cfg.cg_tol, cfg.cg_max_iter)?;
                s.step_u(&p.fidelity)?;
                s.step_v_logop(*lambda, *epsilon);
                s.step_sigma()?;
                s.step_eta(*alpha)?;
                s.step_xi_logop(*lambda, *epsilon, cfg.bisect_tol);
                cg
            }
            PenaltySpec::Lop { lambda, alpha } => {
                let cg = s.step_x(&p.a, &p.l, cfg.cg_tol, cfg.cg_max_iter)?;
                s.step_u(&p.fidelity)?;
                s.step_sigma()?;
                s.step_eta(*alpha)?;
                let weight = *lambda;
                s.step_v_xi_weighted(|_| weight)?;
                cg
            }
            PenaltySpec::AdaLop { alpha, gamma, .. } => {
                s.step_omega_w_adalop(*gamma);
                let cg = s.step_x(&p.a, &p.l, cfg.cg_tol, cfg.cg_max_iter)?;
                s.step_u(&p.fidelity)?;
                s.step_sigma()?;
                s.step_eta(*alpha)?;
                s.step_v_xi_adalop()?;
                cg
            }
        };
        let residuals = s.step_duals();
        s.iter += 1;
        s.check_finite()?;

        let lagrangian = cfg
            .record_lagrangian
            .then(|| augmented_lagrangian(p, s));
        s.scale_mu(cfg.rho);

        let primal_residual = residuals.iter().fold(0.0_f64, |m, r| m.max(*r));
        let x_change = norm_inf((&s.x - &x_prev).view());
        let x_scale = norm_inf(s.x.view()).max(1.0);
        self.converged = primal_residual <= cfg.stop_tol && x_change <= cfg.stop_tol * x_scale;

        self.primal_residuals.push(primal_residual);
        self.cg_iterations.push(cg.iterations);
        if let Some(l) = lagrangian {
            self.lagrangian_trace.push(l);
        }
        Ok(SweepInfo {
            residuals,
            primal_residual,
            x_change,
            cg_iterations: cg.iterations,
            cg_converged: cg.converged,
            lagrangian,
        })
    }

    /// Sweeps until convergence or `max_iter`.
    pub fn run(&mut self) -> Result<()> {
        while self.state.iter < self.config.max_iter {
            self.sweep()?;
            if self.converged {
                break;
            }
        }
        Ok(())
    }

    pub fn result(&self) -> SolveResult {
        let s = &self.state;
        SolveResult {
            x_hat: s.x.clone(),
            sigma_hat: s.sigma.clone(),
            weights: matches!(self.problem.penalty, PenaltySpec::AdaLop { .. }).then(|| s.w.clone()),
            lagrangian_trace: self.lagrangian_trace.clone(),
            primal_residuals: self.primal_residuals.clone(),
            cg_iterations: self.cg_iterations.clone(),
            iterations: s.iter,
            converged: self.converged,
        }
    }
}

/// Runs the solver selected by `problem.penalty` to completion.
pub fn solve(problem: &Problem, config: &AdmmConfig) -> Result<SolveResult> {
    let mut solver = Solver::new(problem, config.clone())?;
    solver.run()?;
    Ok(solver.result())
}
