//! Time base generators: polynomial reference profiles that start at
//! prescribed derivative values and vanish, together with their first `n`
//! derivatives, at the settling time `t_f`.
//!
//! For a system of order `n` the basis holds `n` polynomials of degree
//! `2n + 1`. Polynomial `h_k` satisfies `h_k^(j)(0) = 1` for `j = k - 1` and
//! `0` for every other `j in {0..n}`, and `h_k^(j)(t_f) = 0` for all
//! `j in {0..n}`. Past `t_f` every polynomial is identically zero.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};

/// Residual bound for the boundary-condition solve, in the scaled variable.
const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// A solved collection of `n` TBG polynomials for settling time `t_f`.
///
/// Coefficients are solved in the normalized variable `u = t / t_f` (the raw
/// Vandermonde system is badly conditioned for large `t_f`); raw-time
/// evaluation applies a `t_f^-j` chain-rule factor per derivative order.
#[derive(Debug, Clone, PartialEq)]
pub struct TbgBasis {
    n: usize,
    t_f: f64,
    /// Raw-time monomial coefficients per polynomial, highest degree first.
    coeffs: Vec<Vec<f64>>,
    /// Scaled-variable coefficients of `p_k^(j)(u)`, ascending degree,
    /// for j = 0..=n. Differentiated analytically at build time.
    deriv: Vec<Vec<Vec<f64>>>,
    /// Exact integer coefficients of `n! * p_k^(j)(u) / t_f^(k-1)`, the
    /// canonical representation used for boundary verification. Every entry
    /// is an integer far below 2^53 for practical orders, so these tables
    /// carry no rounding at all.
    exact: Vec<Vec<Vec<f64>>>,
    /// Per-polynomial scale `t_f^(k-1) / n!` relating `exact` to `deriv`.
    factors: Vec<f64>,
}

/// `H(t)` and `K_t(t)` evaluated at one instant.
///
/// Row `j` of `h` holds the `j`-th derivative of each polynomial; `kt` holds
/// the `n`-th derivatives. `H(0) = I`, and both are exactly zero for
/// `t >= t_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct TbgEvaluation {
    pub h: DMatrix<f64>,
    pub kt: RowDVector<f64>,
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|v| v as f64).product()
}

/// Falling factorial d * (d-1) * ... * (d-j+1), the monomial derivative weight.
fn falling(d: usize, j: usize) -> f64 {
    (d - j + 1..=d).map(|v| v as f64).product()
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, &c)| c * d as f64)
        .collect()
}

fn horner_ascending(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}


impl TbgBasis {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn settling_time(&self) -> f64 {
        self.t_f
    }

    /// Raw-time monomial coefficients of `h_k` (1-based `k`), highest degree
    /// first, length `2n + 2`.
    pub fn coefficients(&self, k: usize) -> &[f64] {
        &self.coeffs[k - 1]
    }

    /// Scaled coefficients of `p_k(u)` with `h_k(t) = p_k(t / t_f)`,
    /// ascending degree.
    pub fn scaled_coefficients(&self, k: usize) -> &[f64] {
        &self.deriv[k - 1][0]
    }

    /// `h_k^(j)(t)` by analytic differentiation of the stored coefficients.
    pub fn derivative(&self, k: usize, j: usize, t: f64) -> f64 {
        assert!(j <= self.n, "derivative order {j} exceeds system order");
        if t >= self.t_f {
            return 0.0;
        }
        let u = t / self.t_f;
        horner_ascending(&self.deriv[k - 1][j], u) / self.t_f.powi(j as i32)
    }

    /// Evaluates `H(t)` and `K_t(t)`. Rejects negative `t`; for `t >= t_f`
    /// both are exactly zero by the piecewise definition.
    pub fn eval(&self, t: f64) -> Result<TbgEvaluation> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
        }
        let n = self.n;
        if t >= self.t_f {
            return Ok(TbgEvaluation {
                h: DMatrix::zeros(n, n),
                kt: RowDVector::zeros(n),
            });
        }
        if t == 0.0 {
            // Defining boundary values, bit-exact.
            return Ok(TbgEvaluation {
                h: DMatrix::identity(n, n),
                kt: RowDVector::zeros(n),
            });
        }
        let u = t / self.t_f;
        let mut h = DMatrix::zeros(n, n);
        let mut kt = RowDVector::zeros(n);
        for k in 0..n {
            for j in 0..n {
                h[(j, k)] = horner_ascending(&self.deriv[k][j], u) / self.t_f.powi(j as i32);
            }
            kt[k] = horner_ascending(&self.deriv[k][n], u) / self.t_f.powi(n as i32);
        }
        Ok(TbgEvaluation { h, kt })
    }

    /// Maximum boundary-condition residual over all polynomials, measured in
    /// the normalized variable: residuals of `p_k^(j)` at `u = 0` and `u = 1`
    /// divided by the natural coefficient scale `t_f^(k-1)` of `p_k`.
    pub fn boundary_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let nfact = factorial(self.n);
        for k in 1..=self.n {
            let scale = self.t_f.powi(k as i32 - 1);
            for j in 0..=self.n {
                // Evaluate the exact integer tables; the `n!` normalization
                // cancels in the relative measure.
                let at0 = self.factors[k - 1] * horner_ascending(&self.exact[k - 1][j], 0.0);
                let want0 = if j == k - 1 { scale } else { 0.0 };
                worst = worst.max(((at0 - want0) / scale).abs());
                let at1 = horner_ascending(&self.exact[k - 1][j], 1.0) / nfact;
                worst = worst.max(at1.abs());
            }
        }
        worst
    }

    /// Max-entry residual of `Hdot = A H + B K_t` at `t`, with `Hdot`
    /// approximated by a central finite difference of step `dt_fd`,
    /// normalized by the largest entry magnitude of `H` and `K_t` at `t`.
    ///
    /// The normalization keeps the measure meaningful across settling times:
    /// entries of `H` scale like powers of `t_f` and an absolute residual
    /// would be dominated by finite-difference roundoff on the large ones.
    ///
    /// `A`, `B` are the canonical integrator-chain matrices, so the right-hand
    /// side is `H` shifted up one row with `K_t` as the last row.
    pub fn check_hdot_identity(&self, t: f64, dt_fd: f64) -> Result<f64> {
        if !(t > 0.0 && t < self.t_f) {
            return Err(Error::InvalidArgument(format!(
                "t must lie in (0, t_f), got {t}"
            )));
        }
        if !(dt_fd > 0.0 && dt_fd < self.t_f) {
            return Err(Error::InvalidArgument(format!(
                "dt_fd must lie in (0, t_f), got {dt_fd}"
            )));
        }
        let plus = self.eval(t + dt_fd)?;
        let minus = self.eval((t - dt_fd).max(0.0))?;
        let here = self.eval(t)?;
        let n = self.n;
        let mut residual: f64 = 0.0;
        for k in 0..n {
            for j in 0..n {
                let fd = (plus.h[(j, k)] - minus.h[(j, k)]) / (2.0 * dt_fd);
                let rhs = if j + 1 < n {
                    here.h[(j + 1, k)]
                } else {
                    here.kt[k]
                };
                residual = residual.max((fd - rhs).abs());
            }
        }
        let scale = 1.0f64.max(here.h.amax()).max(here.kt.amax());
        Ok(residual / scale)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Builds the `2n + 2` boundary conditions per polynomial in factored form
/// and returns the basis.
///
/// The terminal conditions `p^(j)(1) = 0` for `j = 0..=n` hold exactly when
/// `p_k(u) = (1 - u)^{n+1} r_k(u)` with `deg r_k = n`; the initial conditions
/// then determine the coefficients of `r_k` by forward substitution (the
/// Leibniz expansion of `p^(j)(0)` is triangular in the derivatives of `r_k`
/// at zero). This avoids the badly conditioned Vandermonde-type solve in the
/// monomial basis, so the stored coefficients meet the boundary conditions to
/// roundoff even for large `t_f` and `n`.
pub fn build_basis(n: usize, t_f: f64) -> Result<TbgBasis> {
    if n == 0 {
        return Err(Error::InvalidArgument("order n must be >= 1".into()));
    }
    if !(t_f > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "settling time must be > 0, got {t_f}"
        )));
    }
    // g(u) = (1 - u)^{n+1}: derivatives at 0 and monomial coefficients.
    let g_deriv0: Vec<f64> = (0..=n)
        .map(|m| if m % 2 == 0 { falling(n + 1, m) } else { -falling(n + 1, m) })
        .collect();
    let g_coeffs: Vec<f64> = (0..=n + 1)
        .map(|d| {
            let c = binomial(n + 1, d);
            if d % 2 == 0 { c } else { -c }
        })
        .collect();

    let nfact = factorial(n);
    let mut coeffs = Vec::with_capacity(n);
    let mut deriv = Vec::with_capacity(n);
    let mut exact = Vec::with_capacity(n);
    let mut factors = Vec::with_capacity(n);
    for k in 1..=n {
        // Forward substitution for r^(j)(0): the Leibniz rule gives
        // p^(j)(0) = sum_m C(j, m) g^(m)(0) r^(j-m)(0), and the normalized
        // target is p^(j)(0) = 1 for j = k - 1, zero otherwise. With integer
        // targets every quantity below is an integer, so the whole table is
        // computed without rounding.
        let mut r_deriv0 = vec![0.0; n + 1];
        for j in 0..=n {
            let target = if j == k - 1 { 1.0 } else { 0.0 };
            let mut acc = target;
            for m in 1..=j {
                acc -= binomial(j, m) * g_deriv0[m] * r_deriv0[j - m];
            }
            r_deriv0[j] = acc;
        }
        // Coefficients of n! * r_k(u): r^(j)(0) * n!/j!, still integers.
        let r_scaled: Vec<f64> = r_deriv0
            .iter()
            .enumerate()
            .map(|(j, &d0)| d0 * ((j + 1..=n).map(|v| v as f64).product::<f64>()))
            .collect();

        // n! * p_k = g * (n! * r_k), expanded by convolution to degree 2n+1.
        let mut base = vec![0.0; 2 * n + 2];
        for (dg, &cg) in g_coeffs.iter().enumerate() {
            for (dr, &cr) in r_scaled.iter().enumerate() {
                base[dg + dr] += cg * cr;
            }
        }
        let mut int_table = vec![base];
        for _ in 0..n {
            let next = differentiate(int_table.last().unwrap());
            int_table.push(next);
        }

        let factor = t_f.powi(k as i32 - 1) / nfact;
        let table: Vec<Vec<f64>> = int_table
            .iter()
            .map(|row| row.iter().map(|&c| c * factor).collect())
            .collect();
        let raw: Vec<f64> = table[0]
            .iter()
            .enumerate()
            .rev()
            .map(|(d, &c)| c / t_f.powi(d as i32))
            .collect();
        coeffs.push(raw);
        deriv.push(table);
        exact.push(int_table);
        factors.push(factor);
    }
    let basis = TbgBasis {
        n,
        t_f,
        coeffs,
        deriv,
        exact,
        factors,
    };
    let residual = basis.boundary_residual();
    if residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::SingularBoundarySystem { k: n, residual });
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Known closed-form degree-7 collection for n = 3, t_f = 5, as scaled-variable
    /// coefficients of p_k(u) = h_k(u * t_f), ascending degree.
    fn reference_scaled_n3(t_f: f64) -> [Vec<f64>; 3] {
        let s = |v: &[f64], f: f64| v.iter().map(|c| c * f).collect::<Vec<_>>();
        [
            vec![1.0, 0.0, 0.0, 0.0, -35.0, 84.0, -70.0, 20.0],
            s(&[0.0, 1.0, 0.0, 0.0, -20.0, 45.0, -36.0, 10.0], t_f),
            s(&[0.0, 0.0, 0.5, 0.0, -5.0, 10.0, -7.5, 2.0], t_f * t_f),
        ]
    }

    #[test]
    fn matches_known_third_order_collection() {
        let basis = build_basis(3, 5.0).unwrap();
        let want = reference_scaled_n3(5.0);
        for k in 1..=3 {
            let got = basis.scaled_coefficients(k);
            for (g, w) in got.iter().zip(&want[k - 1]) {
                assert!((g - w).abs() < 1e-9, "h_{k}: got {g}, want {w}");
            }
        }
    }

    #[test]
    fn first_order_basis_is_the_unique_cubic() {
        // h(0)=1, h'(0)=0, h(t_f)=0, h'(t_f)=0 => 2u^3 - 3u^2 + 1.
        let basis = build_basis(1, 2.0).unwrap();
        let want = [1.0, 0.0, -3.0, 2.0];
        for (g, w) in basis.scaled_coefficients(1).iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn second_order_boundary_checks() {
        let basis = build_basis(2, 1.0).unwrap();
        assert!(basis.boundary_residual() < 1e-9);
    }

    #[test]
    fn eval_at_zero_is_identity_with_null_gain_row() {
        for n in 1..=5 {
            let basis = build_basis(n, 3.0).unwrap();
            let e = basis.eval(0.0).unwrap();
            assert_eq!(e.h, DMatrix::identity(n, n));
            assert_eq!(e.kt, RowDVector::zeros(n));
        }
    }

    #[test]
    fn eval_past_settling_time_is_exactly_zero() {
        let basis = build_basis(3, 5.0).unwrap();
        for t in [5.0, 5.1, 100.0] {
            let e = basis.eval(t).unwrap();
            assert!(e.h.iter().all(|&v| v == 0.0));
            assert!(e.kt.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn eval_rejects_negative_time() {
        let basis = build_basis(2, 1.0).unwrap();
        assert!(basis.eval(-0.1).is_err());
    }

    #[test]
    fn midpoint_values_match_symbolic_evaluation() {
        // h_1(t_f/2) = 20/2^7 - 70/2^6 + 84/2^5 - 35/2^4 + 1 = 0.5 and
        // h_1'''(t_f/2) = (4200/16 - 8400/8 + 5040/4 - 840/2) / t_f^3 = 0.42.
        let basis = build_basis(3, 5.0).unwrap();
        let e = basis.eval(2.5).unwrap();
        assert!((e.h[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((e.kt[0] - 0.42).abs() < 1e-12);
    }

    #[test]
    fn hdot_identity_residuals() {
        let b3 = build_basis(3, 5.0).unwrap();
        assert!(b3.check_hdot_identity(2.5, 1e-5).unwrap() < 1e-6);
        let b1 = build_basis(1, 2.0).unwrap();
        assert!(b1.check_hdot_identity(1.0, 1e-5).unwrap() < 1e-6);
        // Interior point just below t_f.
        assert!(b3.check_hdot_identity(5.0 - 1e-4, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn rejects_degenerate_arguments() {
        assert!(build_basis(0, 1.0).is_err());
        assert!(build_basis(2, 0.0).is_err());
        assert!(build_basis(2, -3.0).is_err());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let a = build_basis(4, 7.3).unwrap();
        let b = build_basis(4, 7.3).unwrap();
        for i in 0..200 {
            let t = 7.3 * i as f64 / 200.0;
            assert_eq!(a.eval(t).unwrap(), b.eval(t).unwrap());
        }
    }
}
