//! Consensus and tracking errors, sliding surfaces, and the three auxiliary
//! control laws.
//!
//! All three protocols share the coupling term
//! `mu_i = b_i u_l + sum_j a_ij v_j - K_t(t) e_i(0) + K_fr xi_{i,2:n}` and
//! divide by the degree sum `beta_i`. Neighbor inputs `v_j` come from a
//! one-step communication buffer by default; a zero-delay topological mode
//! exists for acyclic graphs.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::topology::Network;

/// Eigenvalue real-part tolerance for the Hurwitz configuration check.
const HURWITZ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Linear,
    RobustSmc,
    ContinuousFixedTime,
}

impl ProtocolKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::Linear => "linear",
            ProtocolKind::RobustSmc => "robust_smc",
            ProtocolKind::ContinuousFixedTime => "continuous_fixed_time",
        }
    }
}

/// Parameters of the continuous fixed-time switching term: surface
/// coefficients `c_j`, `b_j`, exponents `exp_alpha_j in (0,1)` and
/// `exp_beta_j > 1`, and integrator gain `gain > 0`.
///
/// The exponents are named `exp_*` to keep them apart from the degree sum
/// `beta_i` of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousParams {
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub exp_alpha: Vec<f64>,
    pub exp_beta: Vec<f64>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// Feedback gain row of length `n - 1` (empty when `n = 1`).
    pub k_fr: Vec<f64>,
    /// Switching gain of the discontinuous protocol.
    pub k1: f64,
    pub continuous: Option<ContinuousParams>,
}

impl ProtocolConfig {
    pub fn linear(k_fr: Vec<f64>) -> Self {
        ProtocolConfig {
            kind: ProtocolKind::Linear,
            k_fr,
            k1: 0.0,
            continuous: None,
        }
    }

    pub fn robust(k_fr: Vec<f64>, k1: f64) -> Self {
        ProtocolConfig {
            kind: ProtocolKind::RobustSmc,
            k_fr,
            k1,
            continuous: None,
        }
    }

    pub fn continuous(k_fr: Vec<f64>, params: ContinuousParams) -> Self {
        ProtocolConfig {
            kind: ProtocolKind::ContinuousFixedTime,
            k_fr,
            k1: 0.0,
            continuous: Some(params),
        }
    }

    /// Validates against system order `n`; hard violations are errors,
    /// a non-Hurwitz `K_fr` is returned as a warning so intentionally
    /// misconfigured runs stay reproducible.
    pub fn validate(&self, n: usize) -> Result<Vec<String>> {
        if self.k_fr.len() + 1 != n {
            return Err(Error::DimensionMismatch(format!(
                "protocol.k_fr has length {}, expected n - 1 = {}",
                self.k_fr.len(),
                n - 1
            )));
        }
        if self.k1 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "protocol.k1 must be >= 0, got {}",
                self.k1
            )));
        }
        if self.kind == ProtocolKind::ContinuousFixedTime {
            let p = self.continuous.as_ref().ok_or_else(|| {
                Error::InvalidArgument(
                    "continuous protocol requires the continuous parameter set".into(),
                )
            })?;
            for (name, list) in [
                ("c", &p.c),
                ("b", &p.b),
                ("exp_alpha", &p.exp_alpha),
                ("exp_beta", &p.exp_beta),
            ] {
                if list.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "protocol.{name} has length {}, expected n = {n}",
                        list.len()
                    )));
                }
            }
            for (j, &a) in p.exp_alpha.iter().enumerate() {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "protocol.exp_alpha[{j}] must lie in (0, 1), got {a}"
                    )));
                }
            }
            for (j, &b) in p.exp_beta.iter().enumerate() {
                if !(b > 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "protocol.exp_beta[{j}] must be > 1, got {b}"
                    )));
                }
            }
            if !(p.gain > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "protocol.gain must be > 0, got {}",
                    p.gain
                )));
            }
        }
        let mut warnings = Vec::new();
        if !self.k_fr_is_hurwitz() {
            warnings.push(format!(
                "K_fr = {:?} does not place the reduced error system in the open left \
                 half-plane; the tracking error is not asymptotically stable",
                self.k_fr
            ));
        }
        Ok(warnings)
    }

    /// Companion-matrix eigenvalue check for the reduced error system
    /// driven by `-K_fr xi_{2:n}`.
    pub fn k_fr_is_hurwitz(&self) -> bool {
        let m = self.k_fr.len();
        if m == 0 {
            // n = 1: the reduced system is trivial.
            return true;
        }
        let mut companion = DMatrix::zeros(m, m);
        for r in 0..m - 1 {
            companion[(r, r + 1)] = 1.0;
        }
        for c in 0..m {
            companion[(m - 1, c)] = -self.k_fr[c];
        }
        companion
            .complex_eigenvalues()
            .iter()
            .all(|ev| ev.re < -HURWITZ_TOL)
    }
}

/// Consensus error of agent `i`:
/// `sum_j a_ij (x_j - x_i) - b_i (x_i - x_l)`.
pub fn consensus_error(
    i: usize,
    states: &[DVector<f64>],
    leader: &DVector<f64>,
    net: &Network,
) -> DVector<f64> {
    let mut e = DVector::zeros(leader.len());
    for (j, w) in net.in_neighbors(i) {
        e += w * (&states[j] - &states[i]);
    }
    let b = net.leader_weight(i);
    if b > 0.0 {
        e -= b * (&states[i] - leader);
    }
    e
}

/// Tracking error `xi_i = e_i - H(t) e_i(0)`; exactly zero at `t = 0`.
pub fn tracking_error(e: &DVector<f64>, e0: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    e - h * e0
}

/// `s_i = K_fr xi_{1:n-1} + xi_n`; degenerates to `xi_1` when `n = 1`.
pub fn sliding_surface(xi: &DVector<f64>, k_fr: &[f64]) -> f64 {
    let n = xi.len();
    debug_assert_eq!(k_fr.len() + 1, n);
    let mut s = xi[n - 1];
    for (k, &g) in k_fr.iter().enumerate() {
        s += g * xi[k];
    }
    s
}

/// `|x|^p sign(x)` with `sign(0) = 0`.
pub fn signed_power(x: f64, p: f64) -> f64 {
    debug_assert!(p > 0.0);
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p) * x.signum()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Shared coupling numerator
/// `mu_i = b_i u_l + sum_j a_ij v_j - K_t e_i(0) + K_fr xi_{2:n}`.
#[allow(clippy::too_many_arguments)]
pub fn coupling_numerator(
    i: usize,
    neighbor_v: &[f64],
    e0: &DVector<f64>,
    xi: &DVector<f64>,
    kt: &RowDVector<f64>,
    u_l: f64,
    net: &Network,
    k_fr: &[f64],
) -> f64 {
    let mut mu = net.leader_weight(i) * u_l;
    for (j, w) in net.in_neighbors(i) {
        mu += w * neighbor_v[j];
    }
    mu -= kt.dot(&e0.transpose());
    for (k, &g) in k_fr.iter().enumerate() {
        mu += g * xi[k + 1];
    }
    mu
}

/// Linear TBG-tracking protocol: `v_i = mu_i / beta_i`.
#[allow(clippy::too_many_arguments)]
pub fn linear_v(
    i: usize,
    neighbor_v: &[f64],
    e0: &DVector<f64>,
    xi: &DVector<f64>,
    kt: &RowDVector<f64>,
    u_l: f64,
    net: &Network,
    cfg: &ProtocolConfig,
) -> f64 {
    coupling_numerator(i, neighbor_v, e0, xi, kt, u_l, net, &cfg.k_fr) / net.beta(i)
}

/// Discontinuous sliding-mode protocol:
/// `v_i = (mu_i + k1 sign(s_i)) / beta_i`.
#[allow(clippy::too_many_arguments)]
pub fn robust_v(
    i: usize,
    neighbor_v: &[f64],
    e0: &DVector<f64>,
    xi: &DVector<f64>,
    s: f64,
    kt: &RowDVector<f64>,
    u_l: f64,
    net: &Network,
    cfg: &ProtocolConfig,
) -> f64 {
    let mu = coupling_numerator(i, neighbor_v, e0, xi, kt, u_l, net, &cfg.k_fr);
    (mu + cfg.k1 * sign(s)) / net.beta(i)
}

/// One step of the continuous fixed-time protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousStep {
    pub v: f64,
    /// Fixed-time surface value, including the `xi_dot_n` estimate.
    pub s: f64,
    /// Integrated switching state after this step.
    pub u_n: f64,
}

/// Continuous fixed-time protocol. The signed-power sum
/// `sum_j c_j |xi_j|^alpha_j sign(xi_j) + sum_j b_j |xi_j|^beta_j sign(xi_j)`
/// forms both the equivalent-control term and, together with the `xi_dot_n`
/// estimate, the surface; the switching state integrates
/// `u_n' = gain * sign(s)` by forward Euler.
#[allow(clippy::too_many_arguments)]
pub fn continuous_v(
    i: usize,
    neighbor_v: &[f64],
    e0: &DVector<f64>,
    xi: &DVector<f64>,
    xi_dot_n: f64,
    u_n: f64,
    kt: &RowDVector<f64>,
    u_l: f64,
    net: &Network,
    cfg: &ProtocolConfig,
    dt: f64,
) -> Result<ContinuousStep> {
    let p = cfg.continuous.as_ref().ok_or_else(|| {
        Error::InvalidArgument("continuous protocol requires the continuous parameter set".into())
    })?;
    let mut u_eq = 0.0;
    for j in 0..xi.len() {
        u_eq += p.c[j] * signed_power(xi[j], p.exp_alpha[j]);
        u_eq += p.b[j] * signed_power(xi[j], p.exp_beta[j]);
    }
    if !u_eq.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite signed-power sum for agent {i}"
        )));
    }
    let s = xi_dot_n + u_eq;
    let mu = coupling_numerator(i, neighbor_v, e0, xi, kt, u_l, net, &cfg.k_fr);
    let v = (mu + u_eq + u_n) / net.beta(i);
    let u_n_next = u_n + dt * p.gain * sign(s);
    Ok(ContinuousStep { v, s, u_n: u_n_next })
}

/// Central gain-condition check for the discontinuous protocol: with declared
/// disturbance amplitudes `rho_bound`, returns one warning per agent whose
/// worst-case `beta_i |rho_i| - sum_j a_ij |rho_j|` exceeds `k1`.
pub fn gain_condition_warnings(net: &Network, rho_bound: &[f64], k1: f64) -> Vec<String> {
    let mut warnings = Vec::new();
    for i in 0..net.follower_count() {
        let mut needed = net.beta(i) * rho_bound[i];
        for (j, w) in net.in_neighbors(i) {
            needed -= w * rho_bound[j];
        }
        if k1 < needed {
            warnings.push(format!(
                "agent {}: switching gain k1 = {k1} is below the worst-case bound {needed:.6} \
                 required by the declared disturbance amplitudes",
                i + 1
            ));
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn two_agent_net() -> Network {
        // Agent 1 listens to the leader and to agent 2.
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        Network::new(a, dvector![1.0, 0.0]).unwrap()
    }

    #[test]
    fn consensus_error_vanishes_at_consensus() {
        let net = two_agent_net();
        let leader = dvector![1.0, -2.0];
        let states = vec![leader.clone(), leader.clone()];
        for i in 0..2 {
            assert_eq!(
                consensus_error(i, &states, &leader, &net),
                DVector::zeros(2)
            );
        }
    }

    #[test]
    fn consensus_error_two_followers_first_order() {
        // e_1 = a_12 (x_2 - x_1) - b_1 (x_1 - x_l) = 3 - 2 = 1.
        let net = two_agent_net();
        let states = vec![dvector![2.0], dvector![5.0]];
        let e = consensus_error(0, &states, &dvector![0.0], &net);
        assert_eq!(e[0], 1.0);
    }

    #[test]
    fn tracking_error_cases() {
        let e0 = dvector![1.0, 0.0];
        let h = DMatrix::identity(2, 2);
        assert_eq!(tracking_error(&e0, &e0, &h), DVector::zeros(2));
        // t >= t_f: H = 0 so xi = e.
        let e = dvector![0.3, -0.7];
        assert_eq!(tracking_error(&e, &e0, &DMatrix::zeros(2, 2)), e);
        let h = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let xi = tracking_error(&dvector![1.0, 2.0], &e0, &h);
        assert_eq!(xi, dvector![0.5, 2.0]);
    }

    #[test]
    fn sliding_surface_cases() {
        assert_eq!(sliding_surface(&dvector![0.0, 0.0, 0.0], &[1.0, 2.0]), 0.0);
        assert_eq!(sliding_surface(&dvector![0.5, -1.0, 3.0], &[1.0, 2.0]), 1.5);
        assert_eq!(sliding_surface(&dvector![0.7], &[]), 0.7);
    }

    #[test]
    fn signed_power_cases() {
        assert_eq!(signed_power(0.0, 0.7), 0.0);
        assert_eq!(signed_power(-4.0, 0.5), -2.0);
        assert!((signed_power(2.0, 21.0 / 20.0) - 2.0f64.powf(1.05)).abs() < 1e-15);
    }

    #[test]
    fn zero_start_property() {
        // K_t(0) = 0 and xi(0) = 0 force v_i(0) = 0 for every protocol.
        // Both agents need a leader edge so both degree sums are positive.
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        let net = Network::new(a, dvector![1.0, 1.0]).unwrap();
        let cfg = ProtocolConfig::robust(vec![1.0], 2.5);
        let e0 = dvector![1.0, -1.0];
        let xi = DVector::zeros(2);
        let kt = RowDVector::zeros(2);
        let buf = [0.0, 0.0];
        for i in 0..2 {
            assert_eq!(linear_v(i, &buf, &e0, &xi, &kt, 0.0, &net, &cfg), 0.0);
            assert_eq!(robust_v(i, &buf, &e0, &xi, 0.0, &kt, 0.0, &net, &cfg), 0.0);
        }
        let ccfg = ProtocolConfig::continuous(
            vec![1.0],
            ContinuousParams {
                c: vec![80.0, 66.0],
                b: vec![80.0, 66.0],
                exp_alpha: vec![7.0 / 16.0, 7.0 / 13.0],
                exp_beta: vec![21.0 / 18.0, 21.0 / 19.0],
                gain: 10.0,
            },
        );
        let step =
            continuous_v(0, &buf, &e0, &xi, 0.0, 0.0, &kt, 0.0, &net, &ccfg, 1e-4).unwrap();
        assert_eq!(step.v, 0.0);
        assert_eq!(step.s, 0.0);
        assert_eq!(step.u_n, 0.0);
    }

    #[test]
    fn single_follower_linear_reduction() {
        // One follower, b = 1, n = 1: v = -K_t e(0).
        let net = Network::new(DMatrix::zeros(1, 1), dvector![1.0]).unwrap();
        let cfg = ProtocolConfig::linear(vec![]);
        let e0 = dvector![2.0];
        let xi = dvector![0.3];
        let kt = RowDVector::from_row_slice(&[0.42]);
        let v = linear_v(0, &[0.0], &e0, &xi, &kt, 0.0, &net, &cfg);
        assert!((v - (-0.42 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn two_follower_chain_interior_step() {
        // Hand substitution: beta_1 = 2, mu = b u_l + a_12 v_2 - Kt.e0 + K_fr xi_2
        //   = 1*0.5 + 1*0.25 - (0.1*1 + 0.2*(-2)) + 3*0.4 = 2.25; v = 1.125.
        let net = two_agent_net();
        let cfg = ProtocolConfig::linear(vec![3.0]);
        let e0 = dvector![1.0, -2.0];
        let xi = dvector![0.0, 0.4];
        let kt = RowDVector::from_row_slice(&[0.1, 0.2]);
        let v = linear_v(0, &[0.0, 0.25], &e0, &xi, &kt, 0.5, &net, &cfg);
        assert!((v - 1.125).abs() < 1e-15);
    }

    #[test]
    fn robust_equals_linear_when_surface_or_gain_is_zero() {
        let net = two_agent_net();
        let cfg = ProtocolConfig::robust(vec![1.0], 2.5);
        let e0 = dvector![1.0, -1.0];
        let xi = dvector![0.2, -0.1];
        let kt = RowDVector::from_row_slice(&[0.3, 0.6]);
        let buf = [0.5, -0.25];
        let lin = linear_v(0, &buf, &e0, &xi, &kt, 0.0, &net, &cfg);
        assert_eq!(robust_v(0, &buf, &e0, &xi, 0.0, &kt, 0.0, &net, &cfg), lin);
        let zero_gain = ProtocolConfig::robust(vec![1.0], 0.0);
        assert_eq!(
            robust_v(0, &buf, &e0, &xi, 1.7, &kt, 0.0, &net, &zero_gain),
            linear_v(0, &buf, &e0, &xi, &kt, 0.0, &net, &zero_gain)
        );
    }

    #[test]
    fn continuous_surface_with_only_first_component() {
        // Third-order parameterization with xi = (1, 0, 0), u_n = 0,
        // xi_dot_3 = 0: u_eq = 80 + 80 = 160 and s = 160.
        let mut a = DMatrix::zeros(1, 1);
        a[(0, 0)] = 0.0;
        let net = Network::new(a, dvector![1.0]).unwrap();
        let cfg = ProtocolConfig::continuous(
            vec![1.0, 2.0],
            ContinuousParams {
                c: vec![80.0, 66.0, 15.0],
                b: vec![80.0, 66.0, 15.0],
                exp_alpha: vec![7.0 / 16.0, 7.0 / 13.0, 7.0 / 10.0],
                exp_beta: vec![21.0 / 18.0, 21.0 / 19.0, 21.0 / 20.0],
                gain: 10.0,
            },
        );
        let xi = dvector![1.0, 0.0, 0.0];
        let e0 = DVector::zeros(3);
        let kt = RowDVector::zeros(3);
        let step =
            continuous_v(0, &[0.0], &e0, &xi, 0.0, 0.0, &kt, 0.0, &net, &cfg, 1e-4).unwrap();
        assert!((step.s - 160.0).abs() < 1e-12);
        assert!((step.u_n - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn hurwitz_check() {
        assert!(ProtocolConfig::linear(vec![1.0, 2.0]).k_fr_is_hurwitz());
        assert!(ProtocolConfig::linear(vec![]).k_fr_is_hurwitz());
        assert!(!ProtocolConfig::linear(vec![-1.0, 2.0]).k_fr_is_hurwitz());
        assert!(!ProtocolConfig::linear(vec![0.0]).k_fr_is_hurwitz());
    }

    #[test]
    fn validate_rejects_bad_continuous_parameters() {
        let mut cfg = ProtocolConfig::continuous(
            vec![1.0, 2.0],
            ContinuousParams {
                c: vec![1.0; 3],
                b: vec![1.0; 3],
                exp_alpha: vec![0.5, 0.5, 1.5],
                exp_beta: vec![1.1; 3],
                gain: 10.0,
            },
        );
        assert!(cfg.validate(3).is_err());
        cfg.continuous.as_mut().unwrap().exp_alpha = vec![0.5; 3];
        assert!(cfg.validate(3).is_ok());
        cfg.continuous.as_mut().unwrap().gain = 0.0;
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn gain_condition_warning_fires() {
        let net = two_agent_net();
        // Agent 1: beta = 2, bound = 2*0.9 - 1*0.1 = 1.7 > 1.0.
        let warnings = gain_condition_warnings(&net, &[0.9, 0.1], 1.0);
        assert_eq!(warnings.len(), 1);
        assert!(gain_condition_warnings(&net, &[0.9, 0.1], 2.0).is_empty());
    }
}
