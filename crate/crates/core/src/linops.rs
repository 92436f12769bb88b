//! Linear operators and the two structured solvers used by the ADMM updates.
//!
//! A [`LinearMap`] is immutable once built, so it can be shared across threads
//! by reference. The solvers keep no state between calls.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{check_len, Error, Result};

/// Matrix-free linear operator `R^cols -> R^rows`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    /// Explicit row-major matrix.
    Dense(Array2<f64>),
    /// Forward difference on `R^k`: `(Dz)_i = z_{i+1} - z_i`, with `k - 1` rows.
    FirstDifference(usize),
    Identity(usize),
    /// `scale * inner`.
    Scaled(f64, Box<LinearMap>),
    /// `outer * inner`, i.e. `inner` is applied first.
    Compose(Box<LinearMap>, Box<LinearMap>),
}

impl LinearMap {
    pub fn dense(matrix: Array2<f64>) -> Self {
        LinearMap::Dense(matrix)
    }

    pub fn identity(n: usize) -> Self {
        LinearMap::Identity(n)
    }

    pub fn first_difference(k: usize) -> Self {
        LinearMap::FirstDifference(k)
    }

    pub fn scaled(self, scale: f64) -> Self {
        LinearMap::Scaled(scale, Box::new(self))
    }

    /// `outer ∘ inner`. Fails when `inner.rows() != outer.cols()`.
    pub fn compose(outer: LinearMap, inner: LinearMap) -> Result<Self> {
        check_len("LinearMap::compose", outer.cols(), inner.rows())?;
        Ok(LinearMap::Compose(Box::new(outer), Box::new(inner)))
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::FirstDifference(k) => k.saturating_sub(1),
            LinearMap::Identity(n) => *n,
            LinearMap::Scaled(_, inner) => inner.rows(),
            LinearMap::Compose(outer, _) => outer.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.ncols(),
            LinearMap::FirstDifference(k) => *k,
            LinearMap::Identity(n) => *n,
            LinearMap::Scaled(_, inner) => inner.cols(),
            LinearMap::Compose(_, inner) => inner.cols(),
        }
    }

    /// `op · z`.
    pub fn apply(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("LinearMap::apply", self.cols(), z.len())?;
        Ok(self.apply_unchecked(z))
    }

    /// `opᵀ · y`.
    pub fn adjoint_apply(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("LinearMap::adjoint_apply", self.rows(), y.len())?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn apply_unchecked(&self, z: ArrayView1<f64>) -> Array1<f64> {
        match self {
            LinearMap::Dense(m) => m.dot(&z),
            LinearMap::FirstDifference(k) => {
                if *k < 2 {
                    return Array1::zeros(0);
                }
                Array1::from_iter(z.windows(2).into_iter().map(|w| w[1] - w[0]))
            }
            LinearMap::Identity(_) => z.to_owned(),
            LinearMap::Scaled(s, inner) => inner.apply_unchecked(z) * *s,
            LinearMap::Compose(outer, inner) => {
                let t = inner.apply_unchecked(z);
                outer.apply_unchecked(t.view())
            }
        }
    }

    pub(crate) fn adjoint_unchecked(&self, y: ArrayView1<f64>) -> Array1<f64> {
        match self {
            LinearMap::Dense(m) => m.t().dot(&y),
            LinearMap::FirstDifference(k) => difference_adjoint(y, *k),
            LinearMap::Identity(_) => y.to_owned(),
            LinearMap::Scaled(s, inner) => inner.adjoint_unchecked(y) * *s,
            LinearMap::Compose(outer, inner) => {
                let t = outer.adjoint_unchecked(y);
                inner.adjoint_unchecked(t.view())
            }
        }
    }

    /// Dense materialization, mostly for tests and small problems.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.cols();
        let mut out = Array2::zeros((self.rows(), n));
        let mut e = Array1::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            out.column_mut(j).assign(&self.apply_unchecked(e.view()));
            e[j] = 0.0;
        }
        out
    }
}

/// `Dᵀy` for the forward difference on `R^k` (`y` has length `k - 1`).
fn difference_adjoint(y: ArrayView1<f64>, k: usize) -> Array1<f64> {
    let mut out = Array1::zeros(k);
    for (i, &yi) in y.iter().enumerate() {
        out[i] -= yi;
        out[i + 1] += yi;
    }
    out
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Array1<f64>,
    pub iterations: usize,
    /// Relative residual `‖Mx - b‖ / ‖b‖` reached the tolerance.
    pub converged: bool,
    /// A search direction with non-positive curvature was hit.
    pub stagnated: bool,
    pub residual_norm: f64,
}

/// Conjugate gradient for a symmetric positive semidefinite map.
///
/// Starts from `x0` (warm start). On stagnation or when `max_iter` is exhausted,
/// the iterate with the smallest residual seen so far is returned with the
/// corresponding flag set.
pub fn solve_cg<F>(
    apply_normal: F,
    rhs: ArrayView1<f64>,
    x0: ArrayView1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    check_len("solve_cg", rhs.len(), x0.len())?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("cg tolerance must be > 0, got {tol}")));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in cg right-hand side".into()));
    }

    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: Array1::zeros(rhs.len()),
            iterations: 0,
            converged: true,
            stagnated: false,
            residual_norm: 0.0,
        });
    }
    let threshold = tol * b_norm;

    let mut x = if x0.iter().all(|v| v.is_finite()) {
        x0.to_owned()
    } else {
        Array1::zeros(rhs.len())
    };
    let mut r = &rhs - &apply_normal(x.view());
    let mut rr = r.dot(&r);
    let mut best = (rr.sqrt(), x.clone());
    if best.0 <= threshold {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            converged: true,
            stagnated: false,
            residual_norm: best.0,
        });
    }

    let mut p = r.clone();
    let mut stagnated = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        let mp = apply_normal(p.view());
        let curvature = p.dot(&mp);
        if !(curvature > f64::EPSILON * p.dot(&p) * 1e-6) {
            stagnated = true;
            break;
        }
        iterations += 1;
        let step = rr / curvature;
        x.scaled_add(step, &p);
        r.scaled_add(-step, &mp);
        let rr_next = r.dot(&r);
        let res = rr_next.sqrt();
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= threshold {
            return Ok(CgOutcome {
                x,
                iterations,
                converged: true,
                stagnated: false,
                residual_norm: res,
            });
        }
        p *= rr_next / rr;
        p += &r;
        rr = rr_next;
    }

    Ok(CgOutcome {
        x: best.1,
        iterations,
        converged: false,
        stagnated,
        residual_norm: best.0,
    })
}

/// Solves `(mu3·DᵀD + mu4·I) σ = rhs` with the Thomas algorithm.
///
/// The system is tridiagonal: diagonal `mu4 + mu3` at both ends, `mu4 + 2·mu3`
/// in the interior, off-diagonals `-mu3`. For `K = 1` there are no difference
/// rows and the system is `mu4·σ = rhs`.
pub fn solve_tridiag_sigma(mu3: f64, mu4: f64, rhs: ArrayView1<f64>) -> Result<Array1<f64>> {
    if !(mu3 >= 0.0) || !mu3.is_finite() {
        return Err(Error::Parameter(format!("mu3 must be >= 0, got {mu3}")));
    }
    if !(mu4 > 0.0) || !mu4.is_finite() {
        return Err(Error::Parameter(format!("mu4 must be > 0, got {mu4}")));
    }
    let k = rhs.len();
    if k == 0 {
        return Err(Error::Input("sigma system needs at least one unknown".into()));
    }
    if k == 1 {
        return Ok(rhs.mapv(|v| v / mu4));
    }

    let diag = |i: usize| {
        if i == 0 || i == k - 1 {
            mu4 + mu3
        } else {
            mu4 + 2.0 * mu3
        }
    };
    let off = -mu3;

    // forward sweep
    let mut c_prime = vec![0.0; k];
    let mut d_prime = vec![0.0; k];
    c_prime[0] = off / diag(0);
    d_prime[0] = rhs[0] / diag(0);
    for i in 1..k {
        let denom = diag(i) - off * c_prime[i - 1];
        c_prime[i] = off / denom;
        d_prime[i] = (rhs[i] - off * d_prime[i - 1]) / denom;
    }

    let mut out = Array1::zeros(k);
    out[k - 1] = d_prime[k - 1];
    for i in (0..k - 1).rev() {
        out[i] = d_prime[i] - c_prime[i] * out[i + 1];
    }
    Ok(out)
}

pub(crate) fn norm2(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub(crate) fn norm_inf(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense_solve(mut m: Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
        // Gaussian elimination with partial pivoting.
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
                .unwrap();
            if piv != col {
                for c in 0..n {
                    m.swap([col, c], [piv, c]);
                }
                b.swap(col, piv);
            }
            for row in col + 1..n {
                let f = m[[row, col]] / m[[col, col]];
                for c in col..n {
                    m[[row, c]] -= f * m[[col, c]];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = Array1::zeros(n);
        for row in (0..n).rev() {
            let mut s = b[row];
            for c in row + 1..n {
                s -= m[[row, c]] * x[c];
            }
            x[row] = s / m[[row, row]];
        }
        x
    }

    #[test]
    fn apply_examples() {
        let id = LinearMap::identity(3);
        assert_eq!(id.apply(array![1.0, 2.0, 3.0].view()).unwrap(), array![1.0, 2.0, 3.0]);

        let d = LinearMap::first_difference(3);
        assert_eq!(d.rows(), 2);
        assert_eq!(d.apply(array![1.0, 4.0, 9.0].view()).unwrap(), array![3.0, 5.0]);

        let m = LinearMap::dense(array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(m.apply(array![1.0, 1.0].view()).unwrap(), array![3.0, 7.0]);
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let d = LinearMap::first_difference(4);
        let err = d.apply(array![1.0, 2.0].view()).unwrap_err();
        assert!(matches!(err, Error::Shape { expected: 4, actual: 2, .. }));
        assert!(d.adjoint_apply(array![1.0].view()).is_err());
    }

    #[test]
    fn difference_of_length_one_is_empty() {
        let d = LinearMap::first_difference(1);
        assert_eq!(d.rows(), 0);
        assert_eq!(d.apply(array![5.0].view()).unwrap().len(), 0);
        assert_eq!(d.adjoint_apply(Array1::zeros(0).view()).unwrap(), array![0.0]);
    }

    #[test]
    fn compose_and_scale() {
        let d = LinearMap::first_difference(3);
        let op = LinearMap::compose(d, LinearMap::identity(3).scaled(2.0)).unwrap();
        assert_eq!(op.apply(array![1.0, 4.0, 9.0].view()).unwrap(), array![6.0, 10.0]);
        assert!(LinearMap::compose(LinearMap::identity(2), LinearMap::identity(3)).is_err());
    }

    #[test]
    fn cg_identity_one_iteration() {
        let b = array![1.0, -2.0, 3.0];
        let out = solve_cg(|z| z.to_owned(), b.view(), Array1::zeros(3).view(), 1e-12, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn cg_diagonal() {
        let d = array![1.0, 2.0, 4.0];
        let out = solve_cg(
            |z| &z * &d,
            array![1.0, 2.0, 4.0].view(),
            Array1::zeros(3).view(),
            1e-14,
            10,
        )
        .unwrap();
        for v in out.x.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_matches_dense_solve_on_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let g = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        let m = g.t().dot(&g) + Array2::<f64>::eye(n) * 0.5;
        let b = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let out = solve_cg(|z| m.dot(&z), b.view(), Array1::zeros(n).view(), 1e-13, 500).unwrap();
        assert!(out.converged);
        let exact = dense_solve(m, b);
        for (a, e) in out.x.iter().zip(exact.iter()) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
    }

    #[test]
    fn cg_singular_returns_flagged_iterate() {
        // rank-deficient: second coordinate is annihilated, rhs not in range
        let out = solve_cg(
            |z| array![z[0], 0.0],
            array![1.0, 1.0].view(),
            Array1::zeros(2).view(),
            1e-10,
            20,
        )
        .unwrap();
        assert!(!out.converged);
        assert!(out.stagnated);
        assert!(out.x.iter().all(|v| v.is_finite()));
        // no iterate beats the residual of the starting point
        assert!((out.residual_norm - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cg_rejects_non_finite_rhs() {
        let err = solve_cg(
            |z| z.to_owned(),
            array![1.0, f64::NAN].view(),
            Array1::zeros(2).view(),
            1e-8,
            5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn tridiag_examples() {
        let s = solve_tridiag_sigma(0.0, 2.0, array![4.0, 6.0].view()).unwrap();
        assert_eq!(s, array![2.0, 3.0]);
        let s = solve_tridiag_sigma(3.0, 5.0, array![10.0].view()).unwrap();
        assert_eq!(s, array![2.0]);

        let s = solve_tridiag_sigma(1.0, 1.0, array![1.0, 0.0, 1.0].view()).unwrap();
        let exact = dense_solve(
            array![[2.0, -1.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -1.0, 2.0]],
            array![1.0, 0.0, 1.0],
        );
        for (a, e) in s.iter().zip(exact.iter()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiag_rejects_bad_parameters() {
        assert!(solve_tridiag_sigma(-1.0, 1.0, array![1.0].view()).is_err());
        assert!(solve_tridiag_sigma(1.0, 0.0, array![1.0].view()).is_err());
    }
}
