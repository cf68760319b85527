//! Scenario documents (TOML), validation, CSV serialization of results and
//! access to the bundled fixtures.
//!
//! A scenario document is a TOML file, conventionally with the `.scn`
//! extension. Agent ids are 1-based in documents; the leader is id 0 in CSV
//! output. See the bundled files under `scenarios/` for the full shape.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentModel, DisturbanceSpec, LeaderInput, LeaderModel, ModelKind};
use crate::engine::{EvalMode, SimConfig, SimResult};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::protocols::{gain_condition_warnings, ContinuousParams, ProtocolConfig, ProtocolKind};
use crate::topology::Network;

/// Default seed for runs that do not specify one.
pub const DEFAULT_SEED: u64 = 42;

/// Fixed setup of one follower.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSetup {
    pub initial_state: DVector<f64>,
    pub model: AgentModel,
    pub disturbance: DisturbanceSpec,
}

/// A fully validated scenario, ready for the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub order: usize,
    pub settling_time: f64,
    pub seed: u64,
    pub sim: SimConfig,
    pub network: Network,
    pub leader: LeaderModel,
    pub agents: Vec<AgentSetup>,
    pub protocol: ProtocolConfig,
    /// Non-fatal validation findings (e.g. non-Hurwitz gains).
    pub warnings: Vec<String>,
    /// Effective disturbance amplitudes per agent, for the output header.
    pub alphas: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Raw document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    order: usize,
    settling_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sim: Option<RawSim>,
    network: RawNetwork,
    leader: RawLeader,
    agents: Vec<RawAgent>,
    protocol: RawProtocol,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    settle_threshold: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    #[serde(default)]
    edges: Vec<RawEdge>,
    leader_edges: Vec<RawLeaderEdge>,
}

/// `{from, to}`: agent `to` listens to agent `from`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: usize,
    to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeaderEdge {
    to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeader {
    initial_state: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<NumberOrExpr>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NumberOrExpr {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    initial_state: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<RawModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disturbance: Option<RawDisturbance>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawModel {
    Catalogue(String),
    Expressions { f: String, g: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum RawDisturbance {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "sinusoidal_offset")]
    SinusoidalOffset {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<NumberOrExpr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    #[serde(rename = "table")]
    Table { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    kind: String,
    #[serde(default)]
    k_fr: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exp_alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exp_beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain: Option<f64>,
    /// Optional per-agent disturbance bounds for the central gain-condition
    /// check (agents cannot know their neighbors' bounds locally).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho_bounds: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Parsing and validation
// ---------------------------------------------------------------------------

/// Parses and fully validates a scenario document. Fatal findings are
/// collected and reported together with their field paths; non-fatal ones
/// (non-Hurwitz gains, violated gain conditions) become warnings on the
/// returned scenario.
pub fn parse_and_validate(document: &str) -> Result<Scenario> {
    let raw: RawScenario =
        toml::from_str(document).map_err(|e| Error::ScenarioParse(e.to_string()))?;
    let mut errors: Vec<String> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    let n = raw.order;
    if n == 0 {
        errors.push("order: must be >= 1".into());
    }
    if !(raw.settling_time > 0.0) {
        errors.push(format!(
            "settling_time: must be > 0, got {}",
            raw.settling_time
        ));
    }
    let n_agents = raw.agents.len();
    if n_agents == 0 {
        errors.push("agents: at least one follower is required".into());
    }

    // Network.
    let mut a = DMatrix::zeros(n_agents, n_agents);
    for (idx, edge) in raw.network.edges.iter().enumerate() {
        let w = edge.weight.unwrap_or(1.0);
        if edge.from == 0 || edge.from > n_agents || edge.to == 0 || edge.to > n_agents {
            errors.push(format!(
                "network.edges[{idx}]: agent ids must lie in 1..={n_agents}, got {} -> {}",
                edge.from, edge.to
            ));
            continue;
        }
        if edge.from == edge.to {
            errors.push(format!("network.edges[{idx}]: self-loop on agent {}", edge.to));
            continue;
        }
        if !(w > 0.0) {
            errors.push(format!("network.edges[{idx}]: weight must be > 0, got {w}"));
            continue;
        }
        a[(edge.to - 1, edge.from - 1)] = w;
    }
    let mut b = DVector::zeros(n_agents);
    for (idx, edge) in raw.network.leader_edges.iter().enumerate() {
        let w = edge.weight.unwrap_or(1.0);
        if edge.to == 0 || edge.to > n_agents {
            errors.push(format!(
                "network.leader_edges[{idx}]: agent id must lie in 1..={n_agents}, got {}",
                edge.to
            ));
            continue;
        }
        if !(w > 0.0) {
            errors.push(format!(
                "network.leader_edges[{idx}]: weight must be > 0, got {w}"
            ));
            continue;
        }
        b[edge.to - 1] = w;
    }
    let network = match Network::new(a, b) {
        Ok(net) => {
            if !net.leader_rooted() {
                errors.push(
                    "network: the leader does not root the graph (some follower is unreachable)"
                        .into(),
                );
            }
            Some(net)
        }
        Err(e) => {
            errors.push(format!("network: {e}"));
            None
        }
    };

    // Leader.
    if raw.leader.initial_state.len() != n {
        errors.push(format!(
            "leader.initial_state: has length {}, expected order = {n}",
            raw.leader.initial_state.len()
        ));
    }
    let leader_input = match &raw.leader.input {
        None => LeaderInput::Constant(0.0),
        Some(NumberOrExpr::Number(v)) => LeaderInput::Constant(*v),
        Some(NumberOrExpr::Expr(src)) => match Expr::parse(src, 0) {
            Ok(expr) => LeaderInput::Expression(expr),
            Err(e) => {
                errors.push(format!("leader.input: {e}"));
                LeaderInput::Constant(0.0)
            }
        },
    };

    // Agents; disturbance amplitudes may be drawn from the seeded RNG.
    let seed = raw.seed.unwrap_or(DEFAULT_SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = Vec::with_capacity(n_agents);
    let mut alphas = vec![0.0; n_agents];
    for (idx, agent) in raw.agents.iter().enumerate() {
        if agent.initial_state.len() != n {
            errors.push(format!(
                "agents[{}].initial_state: has length {}, expected order = {n}",
                idx + 1,
                agent.initial_state.len()
            ));
        }
        let model = match &agent.model {
            None => AgentModel::pure_chain(n),
            Some(RawModel::Catalogue(id)) => match id.as_str() {
                "pure_chain" => AgentModel::pure_chain(n),
                "coupled_trig" => {
                    if n != 3 {
                        errors.push(format!(
                            "agents[{}].model: 'coupled_trig' requires order 3, got {n}",
                            idx + 1
                        ));
                    }
                    AgentModel::coupled_trig()
                }
                other => {
                    errors.push(format!(
                        "agents[{}].model: unknown catalogue id '{other}' \
                         (known: pure_chain, coupled_trig)",
                        idx + 1
                    ));
                    AgentModel::pure_chain(n)
                }
            },
            Some(RawModel::Expressions { f, g }) => {
                let mut parse = |src: &str, field: &str| match Expr::parse(src, n) {
                    Ok(expr) => Some(expr),
                    Err(e) => {
                        errors.push(format!("agents[{}].model.{field}: {e}", idx + 1));
                        None
                    }
                };
                match (parse(f, "f"), parse(g, "g")) {
                    (Some(f), Some(g)) => AgentModel {
                        n,
                        kind: ModelKind::Expression { f, g },
                    },
                    _ => AgentModel::pure_chain(n),
                }
            }
        };
        let disturbance = match &agent.disturbance {
            None | Some(RawDisturbance::None) => DisturbanceSpec::None,
            Some(RawDisturbance::SinusoidalOffset { alpha, omega }) => {
                let alpha = match alpha {
                    Some(NumberOrExpr::Number(v)) => *v,
                    Some(NumberOrExpr::Expr(word)) if word == "random" => {
                        rng.random_range(0.0..1.0)
                    }
                    Some(NumberOrExpr::Expr(other)) => {
                        errors.push(format!(
                            "agents[{}].disturbance.alpha: expected a number or \"random\", \
                             got '{other}'",
                            idx + 1
                        ));
                        0.0
                    }
                    None => rng.random_range(0.0..1.0),
                };
                alphas[idx] = alpha;
                DisturbanceSpec::SinusoidalOffset {
                    alpha,
                    omega: omega.unwrap_or(5.0),
                }
            }
            Some(RawDisturbance::Table { times, values }) => {
                if times.len() != values.len() {
                    errors.push(format!(
                        "agents[{}].disturbance: times and values lengths differ ({} vs {})",
                        idx + 1,
                        times.len(),
                        values.len()
                    ));
                }
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    errors.push(format!(
                        "agents[{}].disturbance.times: must be strictly increasing",
                        idx + 1
                    ));
                }
                DisturbanceSpec::Table {
                    times: times.clone(),
                    values: values.clone(),
                }
            }
        };
        agents.push(AgentSetup {
            initial_state: DVector::from_row_slice(&agent.initial_state),
            model,
            disturbance,
        });
    }

    // Protocol.
    let kind = match raw.protocol.kind.as_str() {
        "linear" => ProtocolKind::Linear,
        "robust_smc" => ProtocolKind::RobustSmc,
        "continuous_fixed_time" => ProtocolKind::ContinuousFixedTime,
        other => {
            errors.push(format!(
                "protocol.kind: unknown protocol '{other}' \
                 (valid: linear, robust_smc, continuous_fixed_time)"
            ));
            ProtocolKind::Linear
        }
    };
    let continuous = if kind == ProtocolKind::ContinuousFixedTime {
        match (
            &raw.protocol.c,
            &raw.protocol.b,
            &raw.protocol.exp_alpha,
            &raw.protocol.exp_beta,
            raw.protocol.gain,
        ) {
            (Some(c), Some(b), Some(ea), Some(eb), Some(gain)) => Some(ContinuousParams {
                c: c.clone(),
                b: b.clone(),
                exp_alpha: ea.clone(),
                exp_beta: eb.clone(),
                gain,
            }),
            _ => {
                errors.push(
                    "protocol: continuous_fixed_time requires c, b, exp_alpha, exp_beta and gain"
                        .into(),
                );
                None
            }
        }
    } else {
        None
    };
    let protocol = ProtocolConfig {
        kind,
        k_fr: raw.protocol.k_fr.clone(),
        k1: raw.protocol.k1.unwrap_or(0.0),
        continuous,
    };
    match protocol.validate(n.max(1)) {
        Ok(w) => warnings.extend(w),
        Err(e) => errors.push(format!("protocol: {e}")),
    }
    if kind == ProtocolKind::RobustSmc {
        if let (Some(bounds), Some(net)) = (&raw.protocol.rho_bounds, &network) {
            if bounds.len() != n_agents {
                errors.push(format!(
                    "protocol.rho_bounds: has length {}, expected {n_agents}",
                    bounds.len()
                ));
            } else {
                warnings.extend(gain_condition_warnings(net, bounds, protocol.k1));
            }
        }
    }

    // Sim config.
    let raw_sim = raw.sim.unwrap_or_default();
    let mut sim = SimConfig::defaults(raw.settling_time);
    if let Some(dt) = raw_sim.dt {
        sim.dt = dt;
    }
    if let Some(horizon) = raw_sim.horizon {
        sim.horizon = horizon;
    }
    if let Some(stride) = raw_sim.stride {
        sim.stride = stride;
    }
    if let Some(threshold) = raw_sim.settle_threshold {
        sim.settle_threshold = threshold;
    }
    if let Some(mode) = &raw_sim.mode {
        match EvalMode::parse(mode) {
            Ok(m) => sim.mode = m,
            Err(e) => errors.push(format!("sim.mode: {e}")),
        }
    }
    if raw.settling_time > 0.0 {
        if let Err(e) = sim.validate(raw.settling_time) {
            errors.push(e.to_string());
        }
    }

    if !errors.is_empty() {
        return Err(Error::ScenarioInvalid(errors));
    }
    Ok(Scenario {
        name: raw.name,
        order: n,
        settling_time: raw.settling_time,
        seed,
        sim,
        network: network.expect("validated"),
        leader: LeaderModel {
            n,
            initial_state: DVector::from_row_slice(&raw.leader.initial_state),
            input: leader_input,
        },
        agents,
        protocol,
        warnings,
        alphas,
    })
}

/// Serializes a validated scenario back to document form. Drawn disturbance
/// amplitudes are pinned to their concrete values, so reparsing yields an
/// equivalent scenario regardless of seed.
pub fn serialize(scenario: &Scenario) -> String {
    let raw = RawScenario {
        name: scenario.name.clone(),
        order: scenario.order,
        settling_time: scenario.settling_time,
        seed: Some(scenario.seed),
        sim: Some(RawSim {
            dt: Some(scenario.sim.dt),
            horizon: Some(scenario.sim.horizon),
            mode: Some(scenario.sim.mode.name().to_string()),
            stride: Some(scenario.sim.stride),
            settle_threshold: Some(scenario.sim.settle_threshold),
        }),
        network: RawNetwork {
            edges: {
                let mut edges = Vec::new();
                for i in 0..scenario.network.follower_count() {
                    for (j, w) in scenario.network.in_neighbors(i) {
                        edges.push(RawEdge {
                            from: j + 1,
                            to: i + 1,
                            weight: Some(w),
                        });
                    }
                }
                edges
            },
            leader_edges: (0..scenario.network.follower_count())
                .filter(|&i| scenario.network.leader_weight(i) > 0.0)
                .map(|i| RawLeaderEdge {
                    to: i + 1,
                    weight: Some(scenario.network.leader_weight(i)),
                })
                .collect(),
        },
        leader: RawLeader {
            initial_state: scenario.leader.initial_state.iter().copied().collect(),
            input: Some(match &scenario.leader.input {
                LeaderInput::Constant(v) => NumberOrExpr::Number(*v),
                LeaderInput::Expression(e) => NumberOrExpr::Expr(e.to_string()),
            }),
        },
        agents: scenario
            .agents
            .iter()
            .map(|agent| RawAgent {
                initial_state: agent.initial_state.iter().copied().collect(),
                model: Some(match &agent.model.kind {
                    ModelKind::PureChain => RawModel::Catalogue("pure_chain".into()),
                    ModelKind::CoupledTrig => RawModel::Catalogue("coupled_trig".into()),
                    ModelKind::Expression { f, g } => RawModel::Expressions {
                        f: f.to_string(),
                        g: g.to_string(),
                    },
                }),
                disturbance: Some(match &agent.disturbance {
                    DisturbanceSpec::None => RawDisturbance::None,
                    DisturbanceSpec::SinusoidalOffset { alpha, omega } => {
                        RawDisturbance::SinusoidalOffset {
                            alpha: Some(NumberOrExpr::Number(*alpha)),
                            omega: Some(*omega),
                        }
                    }
                    DisturbanceSpec::Table { times, values } => RawDisturbance::Table {
                        times: times.clone(),
                        values: values.clone(),
                    },
                }),
            })
            .collect(),
        protocol: RawProtocol {
            kind: scenario.protocol.kind.name().to_string(),
            k_fr: scenario.protocol.k_fr.clone(),
            k1: Some(scenario.protocol.k1),
            c: scenario.protocol.continuous.as_ref().map(|p| p.c.clone()),
            b: scenario.protocol.continuous.as_ref().map(|p| p.b.clone()),
            exp_alpha: scenario
                .protocol
                .continuous
                .as_ref()
                .map(|p| p.exp_alpha.clone()),
            exp_beta: scenario
                .protocol
                .continuous
                .as_ref()
                .map(|p| p.exp_beta.clone()),
            gain: scenario.protocol.continuous.as_ref().map(|p| p.gain),
            rho_bounds: None,
        },
    };
    toml::to_string(&raw).expect("scenario serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Bundled fixtures
// ---------------------------------------------------------------------------

/// Bundled scenario documents, by name.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    (
        "ring_robust",
        include_str!("../scenarios/ring_robust.scn"),
    ),
    (
        "tree_robust",
        include_str!("../scenarios/tree_robust.scn"),
    ),
    (
        "tree_linear",
        include_str!("../scenarios/tree_linear.scn"),
    ),
    (
        "tree_continuous",
        include_str!("../scenarios/tree_continuous.scn"),
    ),
];

/// Parses a bundled scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    let doc = BUILTIN_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, doc)| *doc)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown bundled scenario '{name}'")))?;
    parse_and_validate(doc)
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

fn fmt17(value: f64) -> String {
    format!("{value:.16e}")
}

/// Writes a result as CSV: comment header block, a header row
/// `t,agent,x1..xn,e1..en,xi1..xin,s,v,u,rho`, then rows in time-major,
/// agent-minor order. Leader rows use agent id 0 with error and surface
/// columns left empty. Floats carry 17 significant digits.
pub fn write_csv(result: &SimResult, path: &Path) -> Result<()> {
    let mut out = String::new();
    let h = &result.header;
    writeln!(out, "# scenario: {}", h.scenario).unwrap();
    writeln!(out, "# seed: {}", h.seed).unwrap();
    writeln!(
        out,
        "# alpha: {}",
        h.alphas
            .iter()
            .map(|a| fmt17(*a))
            .collect::<Vec<_>>()
            .join(",")
    )
    .unwrap();
    writeln!(out, "# dt: {}", fmt17(h.dt)).unwrap();
    writeln!(out, "# t_f: {}", fmt17(h.t_f)).unwrap();
    writeln!(out, "# protocol: {}", h.protocol).unwrap();
    writeln!(out, "# mode: {}", h.mode).unwrap();
    writeln!(out, "# xi_dot: {}", h.xi_dot_estimate).unwrap();

    let n = result.leader.first().map_or(0, |x| x.len());
    let mut header_row = String::from("t,agent");
    for prefix in ["x", "e", "xi"] {
        for k in 1..=n {
            write!(header_row, ",{prefix}{k}").unwrap();
        }
    }
    header_row.push_str(",s,v,u,rho");
    writeln!(out, "{header_row}").unwrap();

    for (idx, &t) in result.time.iter().enumerate() {
        // Leader first (agent id 0); error/surface columns stay empty.
        write!(out, "{},0", fmt17(t)).unwrap();
        for value in result.leader[idx].iter() {
            write!(out, ",{}", fmt17(*value)).unwrap();
        }
        writeln!(out, "{}", ",".repeat(2 * n + 4)).unwrap();
        for (agent_idx, series) in result.agents.iter().enumerate() {
            write!(out, "{},{}", fmt17(t), agent_idx + 1).unwrap();
            for vec in [&series.x[idx], &series.e[idx], &series.xi[idx]] {
                for value in vec.iter() {
                    write!(out, ",{}", fmt17(*value)).unwrap();
                }
            }
            writeln!(
                out,
                ",{},{},{},{}",
                fmt17(series.s[idx]),
                fmt17(series.v[idx]),
                fmt17(series.u[idx]),
                fmt17(series.rho[idx])
            )
            .unwrap();
        }
    }

    write_atomic(path, &out)
}

/// Writes through a temp file in the same directory, renaming on success so
/// failures leave no partial output.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// A CSV file read back for plotting or metric recomputation.
#[derive(Debug, Clone)]
pub struct CsvData {
    pub t_f: f64,
    pub order: usize,
    pub times: Vec<f64>,
    pub leader: Vec<Vec<f64>>,
    /// Per agent: (x, e, xi, s, v, u, rho) series.
    pub agents: Vec<CsvAgent>,
}

#[derive(Debug, Clone, Default)]
pub struct CsvAgent {
    pub x: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
}

impl CsvData {
    /// Recomputes the stacked consensus-error norm at the recorded time
    /// closest to `t_f`.
    pub fn final_error_norm(&self) -> f64 {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (**a - self.t_f)
                    .abs()
                    .total_cmp(&(**b - self.t_f).abs())
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.agents
            .iter()
            .map(|a| a.e[idx].iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_v(&self) -> f64 {
        self.agents
            .iter()
            .flat_map(|a| a.v.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Reads back a CSV file produced by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<CsvData> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut t_f = f64::NAN;
    let mut order = 0usize;
    let mut times: Vec<f64> = Vec::new();
    let mut leader: Vec<Vec<f64>> = Vec::new();
    let mut agents: Vec<CsvAgent> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# t_f:") {
            t_f = rest
                .trim()
                .parse()
                .map_err(|_| Error::ScenarioParse(format!("bad t_f header in {line}")))?;
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if line.starts_with("t,agent") {
            // 2 + 3n data columns before s,v,u,rho.
            let cols = line.split(',').count();
            order = (cols - 6) / 3;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::ScenarioParse(format!("bad float '{s}' in CSV")))
        };
        let t = parse(fields[0])?;
        let agent: usize = fields[1]
            .parse()
            .map_err(|_| Error::ScenarioParse(format!("bad agent id '{}'", fields[1])))?;
        if agent == 0 {
            times.push(t);
            leader.push(
                fields[2..2 + order]
                    .iter()
                    .map(|s| parse(s))
                    .collect::<Result<_>>()?,
            );
        } else {
            while agents.len() < agent {
                agents.push(CsvAgent::default());
            }
            let slot = &mut agents[agent - 1];
            let grab = |lo: usize| -> Result<Vec<f64>> {
                fields[lo..lo + order].iter().map(|s| parse(s)).collect()
            };
            slot.x.push(grab(2)?);
            slot.e.push(grab(2 + order)?);
            slot.xi.push(grab(2 + 2 * order)?);
            let tail = 2 + 3 * order;
            slot.s.push(parse(fields[tail])?);
            slot.v.push(parse(fields[tail + 1])?);
            slot.u.push(parse(fields[tail + 2])?);
            slot.rho.push(parse(fields[tail + 3])?);
        }
    }
    Ok(CsvData {
        t_f,
        order,
        times,
        leader,
        agents,
    })
}
