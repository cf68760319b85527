//! Follower agents in normal form, the integrator-chain leader, feedback
//! linearization and disturbance generators.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Input gains below this magnitude abort the simulation.
const SINGULAR_GAIN_TOL: f64 = 1e-12;

/// Drift and input-gain catalogue for a follower in normal form. Arbitrary
/// code is never loaded: beyond the built-in entries, models come from the
/// scenario expression grammar.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// `f = 0`, `g = 1`: a pure integrator chain.
    PureChain,
    /// `f = x1 x2 sin(x3) + 0.1 x1 x3`, `g = -2` (third-order only).
    CoupledTrig,
    /// Expression-defined drift and gain over `x1..xn` and `t`.
    Expression { f: Expr, g: Expr },
}

/// A follower model: chain length plus drift/gain functions.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub n: usize,
    pub kind: ModelKind,
}

impl AgentModel {
    pub fn pure_chain(n: usize) -> Self {
        AgentModel {
            n,
            kind: ModelKind::PureChain,
        }
    }

    pub fn coupled_trig() -> Self {
        AgentModel {
            n: 3,
            kind: ModelKind::CoupledTrig,
        }
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::PureChain => 0.0,
            ModelKind::CoupledTrig => x[0] * x[1] * x[2].sin() + 0.1 * x[0] * x[2],
            ModelKind::Expression { f, .. } => f.eval(t, x),
        }
    }

    pub fn input_gain(&self, t: f64, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::PureChain => 1.0,
            ModelKind::CoupledTrig => -2.0,
            ModelKind::Expression { g, .. } => g.eval(t, x),
        }
    }
}

/// `u = (-f(x) + v) / g(x)`: the physical input that reduces the normal form
/// to an integrator chain driven by the auxiliary input `v`.
///
/// Signals a singular-gain fault when `|g(x)| < 1e-12`; the caller aborts the
/// simulation.
pub fn feedback_linearize(
    model: &AgentModel,
    agent: usize,
    t: f64,
    x: &[f64],
    v: f64,
) -> Result<f64> {
    let g = model.input_gain(t, x);
    if g.abs() < SINGULAR_GAIN_TOL {
        return Err(Error::SingularInputGain {
            agent,
            time: t,
            state: x.to_vec(),
        });
    }
    Ok((-model.drift(t, x) + v) / g)
}

/// Integrator-chain derivative `(x2, ..., xn, v + rho)`.
pub fn chain_derivative(x: &DVector<f64>, v: f64, rho: f64) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(n, |k, _| if k + 1 < n { x[k + 1] } else { v + rho })
}

/// Matched-disturbance generator on the last integrator.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSpec {
    None,
    /// `rho(t) = alpha * (1 + sin(omega t))`.
    SinusoidalOffset { alpha: f64, omega: f64 },
    /// Piecewise-linear table over `(time, value)` samples, clamped at both
    /// ends. Samples must be strictly increasing in time.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl DisturbanceSpec {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            DisturbanceSpec::None => 0.0,
            DisturbanceSpec::SinusoidalOffset { alpha, omega } => {
                alpha * (1.0 + (omega * t).sin())
            }
            DisturbanceSpec::Table { times, values } => {
                if times.is_empty() {
                    return 0.0;
                }
                match times.partition_point(|&tt| tt <= t) {
                    0 => values[0],
                    p if p == times.len() => values[p - 1],
                    p => {
                        let frac = (t - times[p - 1]) / (times[p] - times[p - 1]);
                        values[p - 1] + frac * (values[p] - values[p - 1])
                    }
                }
            }
        }
    }

    /// Amplitude of the sinusoidal kind, if any; used for gain-condition
    /// warnings.
    pub fn amplitude(&self) -> Option<f64> {
        match self {
            DisturbanceSpec::SinusoidalOffset { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }
}

/// Leader input: constant or time expression.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderInput {
    Constant(f64),
    Expression(Expr),
}

impl LeaderInput {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            LeaderInput::Constant(c) => *c,
            LeaderInput::Expression(e) => e.eval(t, &[]),
        }
    }
}

/// Pure integrator-chain leader.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    pub n: usize,
    pub initial_state: DVector<f64>,
    pub input: LeaderInput,
}

impl LeaderModel {
    pub fn constant(initial_state: DVector<f64>) -> Self {
        LeaderModel {
            n: initial_state.len(),
            initial_state,
            input: LeaderInput::Constant(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_chain_passes_v_through() {
        let m = AgentModel::pure_chain(3);
        let u = feedback_linearize(&m, 0, 0.0, &[1.0, 2.0, 3.0], 4.5).unwrap();
        assert_eq!(u, 4.5);
    }

    #[test]
    fn coupled_trig_hand_evaluation() {
        // f(1, 2, pi/2) = 2 + 0.05 pi, g = -2 => u = 1 + 0.025 pi.
        let m = AgentModel::coupled_trig();
        let x = [1.0, 2.0, std::f64::consts::FRAC_PI_2];
        let u = feedback_linearize(&m, 0, 0.0, &x, 0.0).unwrap();
        assert!((u - (1.0 + 0.025 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn zero_gain_is_a_fault() {
        let m = AgentModel {
            n: 1,
            kind: ModelKind::Expression {
                f: Expr::parse("0", 1).unwrap(),
                g: Expr::parse("0", 1).unwrap(),
            },
        };
        let err = feedback_linearize(&m, 3, 1.25, &[7.0], 0.0).unwrap_err();
        assert!(matches!(
            err,
            Error::SingularInputGain { agent: 3, .. }
        ));
    }

    #[test]
    fn chain_derivative_shifts_and_injects() {
        let x = DVector::from_row_slice(&[0.0, 0.0, 0.0]);
        assert_eq!(chain_derivative(&x, 0.0, 0.0), x);
        let x = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(
            chain_derivative(&x, 4.0, 0.5),
            DVector::from_row_slice(&[2.0, 3.0, 4.5])
        );
        let x = DVector::from_row_slice(&[7.0]);
        assert_eq!(
            chain_derivative(&x, -1.0, 0.0),
            DVector::from_row_slice(&[-1.0])
        );
    }

    #[test]
    fn feedback_linearization_reproduces_the_chain() {
        // f + g * u + rho must equal v + rho bit-for-bit at random states.
        let m = AgentModel::coupled_trig();
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..200 {
            let x = [next(), next(), next()];
            let v = next();
            let u = feedback_linearize(&m, 0, 0.0, &x, v).unwrap();
            let reconstructed = m.drift(0.0, &x) + m.input_gain(0.0, &x) * u;
            assert!((reconstructed - v).abs() <= 1e-15 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn sinusoidal_disturbance_values() {
        let zero = DisturbanceSpec::SinusoidalOffset {
            alpha: 0.0,
            omega: 5.0,
        };
        assert_eq!(zero.value(0.3), 0.0);
        let d = DisturbanceSpec::SinusoidalOffset {
            alpha: 0.5,
            omega: 5.0,
        };
        assert_eq!(d.value(0.0), 0.5);
        let d = DisturbanceSpec::SinusoidalOffset {
            alpha: 1.0,
            omega: 5.0,
        };
        let peak = d.value(std::f64::consts::PI / 10.0);
        assert!((peak - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoidal_disturbance_is_bounded_by_twice_alpha() {
        let d = DisturbanceSpec::SinusoidalOffset {
            alpha: 0.8,
            omega: 5.0,
        };
        for i in 0..10_000 {
            let t = i as f64 * 1e-3;
            assert!(d.value(t).abs() <= 1.6 + 1e-12);
        }
    }

    #[test]
    fn table_disturbance_interpolates_and_clamps() {
        let d = DisturbanceSpec::Table {
            times: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 2.0, 0.0],
        };
        assert_eq!(d.value(0.5), 1.0);
        assert_eq!(d.value(1.5), 1.0);
        assert_eq!(d.value(-1.0), 0.0);
        assert_eq!(d.value(5.0), 0.0);
    }
}
