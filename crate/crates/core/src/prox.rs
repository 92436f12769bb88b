//! Proximal operators used by the ADMM sub-steps.
//!
//! `prox_{βh}(u) = argmin_x h(x) + ‖x - u‖² / (2β)`.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{check_len, Error, Result};

/// Data-fidelity term `f(u)` together with its observation.
#[derive(Debug, Clone, PartialEq)]
pub enum Fidelity {
    /// `½‖y - u‖²`
    SquaredError { y: Array1<f64> },
    /// `‖y - u‖₁`
    AbsoluteError { y: Array1<f64> },
    /// Shifted I-divergence `Σ u + ν² - y log(u + ν²)`, for mixed Poisson-Gaussian noise.
    ShiftedIDiv { y: Array1<f64>, nu2: f64 },
}

impl Fidelity {
    pub fn squared_error(y: Array1<f64>) -> Result<Self> {
        check_finite("y", y.view())?;
        Ok(Fidelity::SquaredError { y })
    }

    pub fn absolute_error(y: Array1<f64>) -> Result<Self> {
        check_finite("y", y.view())?;
        Ok(Fidelity::AbsoluteError { y })
    }

    pub fn shifted_idiv(y: Array1<f64>, nu2: f64) -> Result<Self> {
        if !(nu2 > 0.0) || !nu2.is_finite() {
            return Err(Error::Parameter(format!("nu2 must be > 0, got {nu2}")));
        }
        if let Some(bad) = y.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Input(format!(
                "shifted I-divergence needs strictly positive observations, found {bad}"
            )));
        }
        Ok(Fidelity::ShiftedIDiv { y, nu2 })
    }

    pub fn observation(&self) -> &Array1<f64> {
        match self {
            Fidelity::SquaredError { y }
            | Fidelity::AbsoluteError { y }
            | Fidelity::ShiftedIDiv { y, .. } => y,
        }
    }

    pub fn len(&self) -> usize {
        self.observation().len()
    }

    /// Typical second derivative of `f` near the data: 1 for the squared
    /// and absolute errors, `1/mean(y)` for the shifted I-divergence.
    pub fn curvature_scale(&self) -> f64 {
        match self {
            Fidelity::SquaredError { .. } | Fidelity::AbsoluteError { .. } => 1.0,
            Fidelity::ShiftedIDiv { y, .. } => match y.mean() {
                Some(m) if m > 0.0 => 1.0 / m,
                _ => 1.0,
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self) -> &'static str {
        match self {
            Fidelity::SquaredError { .. } => "l2",
            Fidelity::AbsoluteError { .. } => "l1",
            Fidelity::ShiftedIDiv { .. } => "sid",
        }
    }

    /// `f(u)`; `+∞` outside the domain of the shifted I-divergence.
    pub fn value(&self, u: ArrayView1<f64>) -> f64 {
        match self {
            Fidelity::SquaredError { y } => 0.5 * Zip::from(y).and(u).fold(0.0, |s, a, b| s + (a - b).powi(2)),
            Fidelity::AbsoluteError { y } => Zip::from(y).and(u).fold(0.0, |s, a, b| s + (a - b).abs()),
            Fidelity::ShiftedIDiv { y, nu2 } => Zip::from(y).and(u).fold(0.0, |s, &yj, &uj| {
                let t = uj + nu2;
                if t > 0.0 {
                    s + t - yj * t.ln()
                } else {
                    f64::INFINITY
                }
            }),
        }
    }

    /// `prox_{βf}(u)`.
    pub fn prox(&self, beta: f64, u: ArrayView1<f64>) -> Result<Array1<f64>> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Parameter(format!("prox step beta must be > 0, got {beta}")));
        }
        check_len("Fidelity::prox", self.len(), u.len())?;
        Ok(match self {
            Fidelity::SquaredError { y } => Zip::from(y).and(u).map_collect(|&yj, &uj| (beta * yj + uj) / (beta + 1.0)),
            Fidelity::AbsoluteError { y } => Zip::from(y).and(u).map_collect(|&yj, &uj| {
                let d = yj - uj;
                uj + beta * d / d.abs().max(beta)
            }),
            Fidelity::ShiftedIDiv { y, nu2 } => {
                Zip::from(y).and(u).map_collect(|&yj, &uj| sid_prox_scalar(yj, *nu2, beta, uj))
            }
        })
    }
}

/// Positive root `t` of `t² + (β - ν² - u)t - βy = 0`, returned as `t - ν²`.
fn sid_prox_scalar(y: f64, nu2: f64, beta: f64, u: f64) -> f64 {
    let b = beta - nu2 - u;
    let disc = (b * b + 4.0 * beta * y).sqrt();
    // avoid cancellation in -b + disc when b > 0
    let t = if b > 0.0 {
        2.0 * beta * y / (b + disc)
    } else {
        0.5 * (disc - b)
    };
    t - nu2
}

/// Free-function form of [`Fidelity::prox`].
pub fn prox_fidelity(f: &Fidelity, beta: f64, u: ArrayView1<f64>) -> Result<Array1<f64>> {
    f.prox(beta, u)
}

/// Euclidean projection onto `{z : ‖z‖₁ ≤ alpha}`.
///
/// The soft-threshold level is found with Condat's pivot-filtering scan,
/// which runs in linear time in practice.
pub fn project_l1_ball(z: ArrayView1<f64>, alpha: f64) -> Result<Array1<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::Parameter(format!("l1-ball radius must be >= 0, got {alpha}")));
    }
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    if l1 <= alpha {
        return Ok(z.to_owned());
    }
    if alpha == 0.0 {
        return Ok(Array1::zeros(z.len()));
    }
    let theta = simplex_threshold(z.iter().map(|v| v.abs()), alpha);
    Ok(z.mapv(|v| v.signum() * (v.abs() - theta).max(0.0)))
}

/// Threshold `θ` with `Σ max(y_i - θ, 0) = a` for nonnegative `y` with `Σ y > a > 0`.
fn simplex_threshold(mut ys: impl Iterator<Item = f64>, a: f64) -> f64 {
    let first = match ys.next() {
        Some(y) => y,
        None => return 0.0,
    };
    let mut active = vec![first];
    let mut parked: Vec<f64> = Vec::new();
    let mut rho = first - a;
    for y in ys {
        if y > rho {
            rho += (y - rho) / (active.len() as f64 + 1.0);
            if rho > y - a {
                active.push(y);
            } else {
                parked.append(&mut active);
                active.push(y);
                rho = y - a;
            }
        }
    }
    for y in parked {
        if y > rho {
            active.push(y);
            rho += (y - rho) / active.len() as f64;
        }
    }
    loop {
        let before = active.len();
        let mut i = 0;
        while i < active.len() {
            let y = active[i];
            if y <= rho {
                active.swap_remove(i);
                rho += (rho - y) / active.len() as f64;
            } else {
                i += 1;
            }
        }
        if active.len() == before {
            break;
        }
    }
    rho.max(0.0)
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

#[inline]
pub(crate) fn elastic_net_scalar(v: f64, l1: f64, l2: f64) -> f64 {
    soft_threshold(v, l1) / (1.0 + 2.0 * l2)
}

/// Prox of `l1‖·‖₁ + l2‖·‖₂²`: `sign(v)·max(0, |v| - l1) / (1 + 2·l2)`.
pub fn prox_elastic_net(v: ArrayView1<f64>, l1: f64, l2: f64) -> Result<Array1<f64>> {
    if !(l1 >= 0.0) || !(l2 >= 0.0) {
        return Err(Error::Parameter(format!(
            "elastic-net weights must be >= 0, got l1={l1}, l2={l2}"
        )));
    }
    Ok(v.mapv(|x| elastic_net_scalar(x, l1, l2)))
}

/// Which branch of the perspective prox produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerspectiveCase {
    ZeroWeight,
    Origin,
    Axis,
    Interior,
}

/// `prox_{ωφ}(v, ξ)` with `φ(x, τ) = x²/(2τ) + τ/2` (the perspective of `½(x² + 1)`).
pub fn prox_perspective(omega: f64, v: f64, xi: f64) -> Result<(f64, f64)> {
    prox_perspective_case(omega, v, xi).map(|(p, _)| p)
}

/// Same as [`prox_perspective`] but also reports the active case.
pub fn prox_perspective_case(omega: f64, v: f64, xi: f64) -> Result<((f64, f64), PerspectiveCase)> {
    if !omega.is_finite() || !v.is_finite() || !xi.is_finite() {
        return Err(Error::Input(format!(
            "perspective prox needs finite inputs, got omega={omega}, v={v}, xi={xi}"
        )));
    }
    if omega < 0.0 {
        return Err(Error::Parameter(format!("perspective weight must be >= 0, got {omega}")));
    }
    if omega == 0.0 {
        return Ok(((v, xi.max(0.0)), PerspectiveCase::ZeroWeight));
    }
    // boundaries go to the zero-producing branch
    if 2.0 * omega * xi + v * v <= omega * omega {
        return Ok(((0.0, 0.0), PerspectiveCase::Origin));
    }
    if v == 0.0 {
        return Ok(((0.0, xi - 0.5 * omega), PerspectiveCase::Axis));
    }
    let s = positive_cubic_root(2.0 * xi / omega + 1.0, 2.0 * v.abs() / omega);
    let x = v - s * omega * v.signum();
    let tau = xi + 0.5 * (s * s - 1.0) * omega;
    Ok(((x, tau.max(0.0)), PerspectiveCase::Interior))
}

/// Unique positive root of `s³ + p·s - q = 0` for `q > 0`.
///
/// Uses the trigonometric/hyperbolic forms of the depressed-cubic solution,
/// followed by one Newton step.
pub(crate) fn positive_cubic_root(p: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0);
    let s = if p == 0.0 {
        q.cbrt()
    } else if p > 0.0 {
        let m = (p / 3.0).sqrt();
        let arg = 1.5 * q / (p * m);
        2.0 * m * (arg.asinh() / 3.0).sinh()
    } else {
        let m = (-p / 3.0).sqrt();
        let arg = 1.5 * q / (-p * m);
        if arg >= 1.0 {
            2.0 * m * (arg.acosh() / 3.0).cosh()
        } else {
            // three real roots; the largest one is the positive root
            2.0 * m * (arg.acos() / 3.0).cos()
        }
    };
    let f = s * s * s + p * s - q;
    let df = 3.0 * s * s + p;
    if df > 0.0 {
        let refined = s - f / df;
        if refined > 0.0 && refined.is_finite() {
            return refined;
        }
    }
    s
}

/// Default absolute bracket width for [`bisect_xi`].
pub const DEFAULT_BISECT_TOL: f64 = 1e-10;

/// Minimizer over `ξ ≥ 1` of `(λ/(2ξ))·a + (λ/2)·log ξ + (μ4/2)(ξ - b)²`.
///
/// Requires `μ4 > λ/54`, which makes the objective strictly convex on `ξ ≥ 1`.
/// The root of the derivative lies in `[max(1, min(a,b)), max(a,b)]`.
pub fn bisect_xi(a: f64, b: f64, lambda: f64, mu4: f64, tol: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be > 0, got {lambda}")));
    }
    if !(mu4 > lambda / 54.0) {
        return Err(Error::Parameter(format!(
            "mu4 = {mu4} must exceed lambda/54 = {} for a unique xi",
            lambda / 54.0
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("bisection tolerance must be > 0, got {tol}")));
    }
    if !(a >= 1.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Input(format!("bisection needs finite a >= 1 and b, got a={a}, b={b}")));
    }
    Ok(bisect_xi_unchecked(a, b, lambda, mu4, tol))
}

pub(crate) fn bisect_xi_unchecked(a: f64, b: f64, lambda: f64, mu4: f64, tol: f64) -> f64 {
    let deriv = |xi: f64| 0.5 * lambda / (xi * xi) * (xi - a) + mu4 * (xi - b);
    let mut lo = a.min(b).max(1.0);
    let mut hi = a.max(b);
    if hi <= lo || deriv(lo) >= 0.0 {
        return lo;
    }
    if deriv(hi) <= 0.0 {
        return hi;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_finite(name: &str, v: ArrayView1<f64>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input(format!("non-finite value in {name}")));
    }
    Ok(())
}
