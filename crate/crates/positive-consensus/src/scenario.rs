//! Scenario files: a TOML format describing a complete simulation setup.
//!
//! A file carries the leader and follower models, the switching graph family
//! and rule, the coupling gain (or `"auto"`), feedback gains (missing ones
//! are synthesized), the controller mode, and initial conditions (explicit or
//! seeded-random). [`parse_str`] turns text into a validated
//! [`Scenario`]; [`emit`] writes a scenario back out so that
//! `parse(emit(s))` reproduces `s`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{validate_mu, Digraph, GraphError, GraphSchedule, SwitchingRule};
use crate::linalg::{from_rows, to_rows, DenseMatrix, LinalgError, Vector};
use crate::regulator::{self, RegulatorError};
use crate::sim::{Mode, Scenario, DEFAULT_HORIZON};
use crate::systems::{
    check_positive_system, synthesize_observer_gain, synthesize_state_gain, AgentGains,
    AgentModel, GainSet, LeaderModel, Provenance, SystemsError,
};

/// Fraction of `mu_max` used when the file says `mu = "auto"`.
pub const AUTO_MU_FRACTION: f64 = 0.9;

/// Default sampling interval for random nonnegative initial conditions.
pub const DEFAULT_INIT_RANGE: [f64; 2] = [0.0, 10.0];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("scenario emit error: {0}")]
    TomlEmit(#[from] toml::ser::Error),
    #[error("{section}: {source}")]
    Matrix {
        section: String,
        #[source]
        source: LinalgError,
    },
    #[error(transparent)]
    Systems(#[from] SystemsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("agent {agent}: gain synthesis failed: {source}")]
    Synthesis {
        agent: usize,
        #[source]
        source: SystemsError,
    },
    #[error("agent {agent}: feedforward gain needs the regulator equations: {source}")]
    Feedforward {
        agent: usize,
        #[source]
        source: RegulatorError,
    },
    #[error("mu must be a number or the keyword \"auto\", found \"{0}\"")]
    BadMuKeyword(String),
    #[error("agent {agent}: system data has negative entries, so the plant is not positive")]
    NegativeAgentData { agent: usize },
    #[error("leader: system data has negative entries")]
    NegativeLeaderData,
    #[error("coupling gain mu = {mu} is outside the admissible interval (0, {mu_max})")]
    MuOutOfRange { mu: f64, mu_max: f64 },
    #[error("{what} has negative entries; initial conditions must be nonnegative")]
    NegativeInitial { what: String },
    #[error("initial: {0}")]
    BadInitial(String),
    #[error("schedule: {0}")]
    BadSchedule(String),
    #[error(transparent)]
    Structure(#[from] crate::sim::SimError),
}

fn matrix(section: impl Into<String>, rows: &[Vec<f64>]) -> Result<DenseMatrix, ScenarioError> {
    from_rows(rows).map_err(|source| ScenarioError::Matrix {
        section: section.into(),
        source,
    })
}

/// The on-disk document. Field names match the file keys; everything else is
/// rejected so typos cannot silently disable a setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub mode: Mode,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub mu: MuSpec,
    pub leader: LeaderSection,
    pub agents: Vec<AgentSection>,
    pub graphs: Vec<GraphSection>,
    pub schedule: ScheduleSection,
    pub initial: InitialSection,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

/// Either an explicit coupling gain or `"auto"` (resolved to
/// [`AUTO_MU_FRACTION`] of `mu_max`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSection {
    #[serde(rename = "A0")]
    pub a0: Vec<Vec<f64>>,
    #[serde(rename = "C0")]
    pub c0: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "K1", default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K2", default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K3", default, skip_serializing_if = "Option::is_none")]
    pub k3: Option<Vec<Vec<f64>>>,
}

/// One digraph as an edge list over node indices (0 is the leader).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub edges: Vec<[usize; 2]>,
}

/// `kind = "periodic"` (needs `block`, optional `order`), `"constant"`
/// (`order` holds the single active index), or `"explicit"` (`order` is the
/// per-step index list, holding its last value).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

/// Explicit initial conditions (`x0`, `x`) or
/// `kind = "random-nonnegative"` with `seed` and `range`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<f64>>>,
}

/// Parses a scenario document, applying strict validation.
pub fn parse_str(text: &str) -> Result<Scenario, ScenarioError> {
    build(toml::from_str(text)?, false)
}

/// Parses a scenario document; with `override_assumptions` set, semantic
/// violations (negative data, an out-of-range coupling gain, negative initial
/// conditions) are tolerated and the resulting scenario carries the override,
/// so the simulator will run it for negative testing.
pub fn parse_str_with(text: &str, override_assumptions: bool) -> Result<Scenario, ScenarioError> {
    build(toml::from_str(text)?, override_assumptions)
}

/// Parses only the document structure, without building models or resolving
/// gains. Used by tooling that wants to edit a file (for example, to strip or
/// override fields) before building.
pub fn parse_document(text: &str) -> Result<ScenarioFile, ScenarioError> {
    Ok(toml::from_str(text)?)
}

/// Builds a validated [`Scenario`] from a parsed document. Missing gains are
/// synthesized; `mu = "auto"` resolves to [`AUTO_MU_FRACTION`] `· mu_max`.
pub fn build(file: ScenarioFile, override_assumptions: bool) -> Result<Scenario, ScenarioError> {
    let leader = LeaderModel::new(
        matrix("leader.A0", &file.leader.a0)?,
        matrix("leader.C0", &file.leader.c0)?,
    )?;
    if !override_assumptions
        && !(crate::linalg::is_nonnegative(&leader.a0, 0.0)
            && crate::linalg::is_nonnegative(&leader.c0, 0.0))
    {
        return Err(ScenarioError::NegativeLeaderData);
    }

    let mut agents = Vec::with_capacity(file.agents.len());
    for (i, section) in file.agents.iter().enumerate() {
        let id = i + 1;
        let agent = AgentModel::new(
            id,
            matrix(format!("agents[{i}].A"), &section.a)?,
            matrix(format!("agents[{i}].B"), &section.b)?,
            matrix(format!("agents[{i}].C"), &section.c)?,
        )?;
        if !override_assumptions
            && !check_positive_system(&agent.a, &agent.b, &agent.c, 0.0).unwrap_or(false)
        {
            return Err(ScenarioError::NegativeAgentData { agent: id });
        }
        agents.push(agent);
    }

    let n_followers = agents.len();
    let family = file
        .graphs
        .iter()
        .map(|g| Digraph::new(n_followers, g.edges.iter().map(|&[a, b]| (a, b))))
        .collect::<Result<Vec<_>, _>>()?;
    let rule = build_rule(&file.schedule, family.len())?;
    let schedule = GraphSchedule::new(family, rule)?;

    let (mu, mu_provenance) = match &file.mu {
        MuSpec::Value(v) => {
            if !override_assumptions {
                let constants = schedule.constants()?;
                if !validate_mu(*v, &constants) {
                    return Err(ScenarioError::MuOutOfRange {
                        mu: *v,
                        mu_max: constants.mu_max,
                    });
                }
            }
            (*v, Provenance::User)
        }
        MuSpec::Keyword(word) if word == "auto" => {
            let constants = schedule.constants()?;
            (AUTO_MU_FRACTION * constants.mu_max, Provenance::Synthesized)
        }
        MuSpec::Keyword(other) => return Err(ScenarioError::BadMuKeyword(other.clone())),
    };

    let gains = build_gains(&file, &agents, &leader, mu, mu_provenance)?;
    let (x0_init, x_init) = build_initial(&file.initial, &leader, &agents)?;
    if !override_assumptions {
        if x0_init.iter().any(|&v| v < 0.0) {
            return Err(ScenarioError::NegativeInitial {
                what: "leader initial state".into(),
            });
        }
        for (i, x) in x_init.iter().enumerate() {
            if x.iter().any(|&v| v < 0.0) {
                return Err(ScenarioError::NegativeInitial {
                    what: format!("agent {} initial state", i + 1),
                });
            }
        }
    }

    let scenario = Scenario {
        leader,
        agents,
        schedule,
        gains,
        mode: file.mode,
        horizon: file.horizon,
        x0_init,
        x_init,
        w_init: None,
        eta_init: None,
        override_assumptions,
        force_observer_to_leader: false,
    };
    crate::sim::validate_structure(&scenario)?;
    Ok(scenario)
}

fn build_rule(section: &ScheduleSection, family_len: usize) -> Result<SwitchingRule, ScenarioError> {
    let default_order = || (1..=family_len).collect::<Vec<_>>();
    match section.kind.as_str() {
        "periodic" => {
            let block = section.block.ok_or_else(|| {
                ScenarioError::BadSchedule("periodic schedule needs a block length".into())
            })?;
            Ok(SwitchingRule::PeriodicBlock {
                block,
                order: section.order.clone().unwrap_or_else(default_order),
            })
        }
        "constant" => {
            if section.block.is_some() {
                return Err(ScenarioError::BadSchedule(
                    "constant schedule takes no block length".into(),
                ));
            }
            let order = section.order.clone().unwrap_or_else(|| vec![1]);
            if order.len() != 1 {
                return Err(ScenarioError::BadSchedule(format!(
                    "constant schedule takes exactly one index, found {}",
                    order.len()
                )));
            }
            Ok(SwitchingRule::Constant { index: order[0] })
        }
        "explicit" => {
            if section.block.is_some() {
                return Err(ScenarioError::BadSchedule(
                    "explicit schedule takes no block length".into(),
                ));
            }
            let list = section.order.clone().ok_or_else(|| {
                ScenarioError::BadSchedule("explicit schedule needs an order list".into())
            })?;
            Ok(SwitchingRule::Explicit { list })
        }
        other => Err(ScenarioError::BadSchedule(format!(
            "unknown kind \"{other}\" (expected periodic, constant, or explicit)"
        ))),
    }
}

fn build_gains(
    file: &ScenarioFile,
    agents: &[AgentModel],
    leader: &LeaderModel,
    mu: f64,
    mu_provenance: Provenance,
) -> Result<GainSet, ScenarioError> {
    let mut out = Vec::with_capacity(agents.len());
    for (i, (agent, section)) in agents.iter().zip(&file.agents).enumerate() {
        let id = i + 1;
        let mut synthesized = false;
        let k1 = match &section.k1 {
            Some(rows) => matrix(format!("agents[{i}].K1"), rows)?,
            None => {
                synthesized = true;
                synthesize_state_gain(&agent.a, &agent.b)
                    .map_err(|source| ScenarioError::Synthesis { agent: id, source })?
            }
        };
        let k2 = match &section.k2 {
            Some(rows) => matrix(format!("agents[{i}].K2"), rows)?,
            None => {
                synthesized = true;
                regulator::solve_regulator(agent, leader)
                    .and_then(|sol| regulator::compute_feedforward_gain(&sol, &k1))
                    .map_err(|source| ScenarioError::Feedforward { agent: id, source })?
            }
        };
        let k3 = match (&section.k3, file.mode) {
            (Some(rows), _) => Some(matrix(format!("agents[{i}].K3"), rows)?),
            (None, Mode::OutputFeedback) => {
                synthesized = true;
                Some(
                    synthesize_observer_gain(&agent.a, &agent.c)
                        .map_err(|source| ScenarioError::Synthesis { agent: id, source })?,
                )
            }
            (None, _) => None,
        };
        out.push(AgentGains {
            k1,
            k2,
            k3,
            provenance: if synthesized {
                Provenance::Synthesized
            } else {
                Provenance::User
            },
        });
    }
    Ok(GainSet {
        agents: out,
        mu,
        mu_provenance,
    })
}

fn build_initial(
    section: &InitialSection,
    leader: &LeaderModel,
    agents: &[AgentModel],
) -> Result<(Vector, Vec<Vector>), ScenarioError> {
    match section.kind.as_deref() {
        None => {
            if section.seed.is_some() || section.range.is_some() {
                return Err(ScenarioError::BadInitial(
                    "seed/range apply only to kind = \"random-nonnegative\"".into(),
                ));
            }
            let x0 = section.x0.as_ref().ok_or_else(|| {
                ScenarioError::BadInitial("explicit initial conditions need x0".into())
            })?;
            let xs = section.x.as_ref().ok_or_else(|| {
                ScenarioError::BadInitial("explicit initial conditions need x".into())
            })?;
            Ok((
                Vector::from_row_slice(x0),
                xs.iter().map(|v| Vector::from_row_slice(v)).collect(),
            ))
        }
        Some("random-nonnegative") => {
            if section.x0.is_some() || section.x.is_some() {
                return Err(ScenarioError::BadInitial(
                    "random-nonnegative does not take explicit x0/x".into(),
                ));
            }
            let range = section.range.unwrap_or(DEFAULT_INIT_RANGE);
            if !(range[0] >= 0.0 && range[1] > range[0]) {
                return Err(ScenarioError::BadInitial(format!(
                    "range must satisfy 0 <= lo < hi, found [{}, {}]",
                    range[0], range[1]
                )));
            }
            let seed = section.seed.unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // draw order is part of the format: x0 first, then each agent in
            // file order, entries front to back
            let mut draw = |n: usize| Vector::from_fn(n, |_, _| rng.gen_range(range[0]..range[1]));
            let x0 = draw(leader.n0());
            let xs = agents.iter().map(|a| draw(a.n())).collect();
            Ok((x0, xs))
        }
        Some(other) => Err(ScenarioError::BadInitial(format!(
            "unknown kind \"{other}\" (expected random-nonnegative or explicit x0/x)"
        ))),
    }
}

/// Writes a resolved scenario back to document form: gains filled in, the
/// coupling gain numeric, and initial conditions explicit.
pub fn to_document(s: &Scenario) -> ScenarioFile {
    ScenarioFile {
        mode: s.mode,
        horizon: s.horizon,
        mu: MuSpec::Value(s.gains.mu),
        leader: LeaderSection {
            a0: to_rows(&s.leader.a0),
            c0: to_rows(&s.leader.c0),
        },
        agents: s
            .agents
            .iter()
            .zip(&s.gains.agents)
            .map(|(agent, gains)| AgentSection {
                a: to_rows(&agent.a),
                b: to_rows(&agent.b),
                c: to_rows(&agent.c),
                k1: Some(to_rows(&gains.k1)),
                k2: Some(to_rows(&gains.k2)),
                k3: gains.k3.as_ref().map(to_rows),
            })
            .collect(),
        graphs: s
            .schedule
            .family()
            .iter()
            .map(|g| GraphSection {
                edges: g.edges().map(|(a, b)| [a, b]).collect(),
            })
            .collect(),
        schedule: match s.schedule.rule() {
            SwitchingRule::Constant { index } => ScheduleSection {
                kind: "constant".into(),
                block: None,
                order: Some(vec![*index]),
            },
            SwitchingRule::PeriodicBlock { block, order } => ScheduleSection {
                kind: "periodic".into(),
                block: Some(*block),
                order: Some(order.clone()),
            },
            SwitchingRule::Explicit { list } => ScheduleSection {
                kind: "explicit".into(),
                block: None,
                order: Some(list.clone()),
            },
        },
        initial: InitialSection {
            kind: None,
            seed: None,
            range: None,
            x0: Some(s.x0_init.iter().copied().collect()),
            x: Some(
                s.x_init
                    .iter()
                    .map(|v| v.iter().copied().collect())
                    .collect(),
            ),
        },
    }
}

/// Serializes a scenario as a TOML document such that parsing it back yields
/// the same scenario.
pub fn emit(s: &Scenario) -> Result<String, ScenarioError> {
    Ok(toml::to_string(&to_document(s))?)
}

/// The bundled reference scenario: two-state marginally stable leader, three
/// single-input followers, two switching graphs alternating every 20 steps,
/// published gains, and `mu = 0.3`.
pub fn bundled_example() -> &'static str {
    include_str!("../scenarios/paper_example.toml")
}
