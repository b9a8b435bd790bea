//! The synchronous round engine: advances leader, observers, compensators,
//! and plants in lockstep, records traces, and computes the positivity and
//! tracking diagnostics that the rest of the tooling reports.
//!
//! A scenario is stepped with a per-round barrier: all control inputs are
//! computed from time-`k` states before any state advances to `k+1`, so the
//! recorded trace is exactly the synchronous closed loop regardless of agent
//! ordering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{validate_mu, GraphConstants, GraphSchedule};
use crate::linalg::Vector;
use crate::protocol;
use crate::regulator;
use crate::systems::{
    check_leader, check_positive_system, AgentModel, GainSet, LeaderModel, VERIFY_MARGIN,
};

/// Entries below `-POSITIVITY_TOL` count as positivity violations; the same
/// slack is granted when checking `η_i ≤ x_i`.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Step count used when a scenario does not specify one. The bundled example
/// dynamics settle well within this at their published gains.
pub const DEFAULT_HORIZON: usize = 500;

/// Which controller drives the followers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `u_i = K1·x_i + K2·w_i`: followers measure their own state.
    StateFeedback,
    /// `u_i = K1·η_i + K2·w_i` with a Luenberger-style compensator `η_i`.
    OutputFeedback,
    /// No plants: only the distributed observer runs.
    ObserverOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::StateFeedback => "state-feedback",
            Mode::OutputFeedback => "output-feedback",
            Mode::ObserverOnly => "observer-only",
        }
    }

    /// True when plant states are simulated at all.
    pub fn has_plants(self) -> bool {
        !matches!(self, Mode::ObserverOnly)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "state-feedback" | "state" => Ok(Mode::StateFeedback),
            "output-feedback" | "output" => Ok(Mode::OutputFeedback),
            "observer-only" | "observer" => Ok(Mode::ObserverOnly),
            other => Err(format!(
                "unknown mode `{other}` (expected state-feedback, output-feedback, or observer-only)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("assumption checks failed: {0}")]
    AssumptionsFailed(String),
    #[error("scenario has {agents} agents but the graphs have {followers} followers")]
    AgentCountMismatch { agents: usize, followers: usize },
    #[error("scenario has {agents} agents but gains for {gains}")]
    GainCountMismatch { agents: usize, gains: usize },
    #[error("agent {id}: {what} gain is required in {mode} mode")]
    MissingGain {
        id: usize,
        what: &'static str,
        mode: Mode,
    },
    #[error("agent {id}: {what} must be {expected_rows}x{expected_cols}, found {found_rows}x{found_cols}")]
    BadGainShape {
        id: usize,
        what: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("{what}: expected {expected} entries, found {found}")]
    BadInitialLength {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("agent {id}: output has {agent_outputs} entries but the leader has {leader_outputs}; tracking errors are undefined")]
    OutputDimensionMismatch {
        id: usize,
        agent_outputs: usize,
        leader_outputs: usize,
    },
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
}

/// A complete simulation setup.
///
/// `w_init`/`eta_init` default to zero vectors when `None`; nonzero values
/// fall outside the hypotheses of the convergence guarantees, so the
/// assumption checks flag them and running requires `override_assumptions`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub leader: LeaderModel,
    pub agents: Vec<AgentModel>,
    pub schedule: GraphSchedule,
    pub gains: GainSet,
    pub mode: Mode,
    pub horizon: usize,
    pub x0_init: Vector,
    pub x_init: Vec<Vector>,
    pub w_init: Option<Vec<Vector>>,
    pub eta_init: Option<Vec<Vector>>,
    /// Run even when assumption checks fail (negative testing).
    pub override_assumptions: bool,
    /// Diagnostic hook: pin every observer to the true leader state each
    /// step, isolating the plant subsystem from observer transients.
    pub force_observer_to_leader: bool,
}

/// Everything recorded about one agent at one step. `x`, `y`, `e` are absent
/// in observer-only mode, `eta` outside output-feedback mode, and `u` at the
/// final step (the trace holds `horizon + 1` states but only `horizon`
/// inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub x: Option<Vector>,
    pub w: Vector,
    pub eta: Option<Vector>,
    pub u: Option<Vector>,
    pub y: Option<Vector>,
    pub e: Option<Vector>,
}

/// One synchronous round: the active graph index and every state recorded at
/// time `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub sigma: usize,
    pub x0: Vector,
    pub y0: Vector,
    pub agents: Vec<AgentStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub mode: Mode,
    pub horizon: usize,
    /// `horizon + 1` records; record `k` holds states at time `k`.
    pub steps: Vec<StepRecord>,
}

/// Per-agent gain verification numbers, reported alongside the assumptions.
#[derive(Debug, Clone, Serialize)]
pub struct GainVerification {
    pub agent_id: usize,
    /// Spectral radius of `A + B·K1`.
    pub state_loop_spectral_radius: f64,
    /// Smallest entry of `A + B·K1`.
    pub state_loop_min_entry: f64,
    pub state_gain_ok: bool,
    /// The closed-loop positivity argument feeds `B·K2·w` into the plant, so
    /// this block must be nonnegative.
    pub feedforward_coupling_nonnegative: bool,
    /// Spectral radius of `A − K3·C`, when output feedback is in play.
    pub observer_loop_spectral_radius: Option<f64>,
    pub observer_loop_min_entry: Option<f64>,
    pub observer_gain_ok: Option<bool>,
    /// Output feedback additionally needs `K1 ≤ 0` so that `−B·K1·x̄ ≥ 0` in
    /// the compensator positivity argument.
    pub state_gain_nonpositive: Option<bool>,
}

/// The result of checking a scenario against every hypothesis the guarantees
/// rest on: leader marginal stability, nonnegative data, admissible switching
/// graphs, the observer gain bound, solvable regulator equations, and (in
/// feedback modes) verified gains. `violations` is empty exactly when the
/// scenario is inside the theory.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub leader_spectral_radius: f64,
    pub leader_unit_spectral_radius: bool,
    pub leader_nonnegative: bool,
    pub agents_nonnegative: bool,
    pub graph_constants: Option<GraphConstants>,
    pub mu: f64,
    pub mu_admissible: bool,
    /// Substitution residual of the regulator equations, one per agent.
    pub regulator_residuals: Vec<f64>,
    /// Whether the solved `(X, U)` pair is entrywise nonnegative, per agent.
    pub regulator_nonnegative: Vec<bool>,
    pub gain_checks: Vec<GainVerification>,
    pub violations: Vec<String>,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural validation: dimensions, counts, and gain presence. These are
/// hard errors — no override makes a malformed scenario simulable.
pub fn validate_structure(s: &Scenario) -> Result<(), SimError> {
    let n_agents = s.agents.len();
    let followers = s.schedule.n_followers();
    if n_agents != followers {
        return Err(SimError::AgentCountMismatch {
            agents: n_agents,
            followers,
        });
    }
    let n0 = s.leader.n0();
    if s.x0_init.len() != n0 {
        return Err(SimError::BadInitialLength {
            what: "leader initial state".into(),
            expected: n0,
            found: s.x0_init.len(),
        });
    }
    check_vec_block(&s.x_init, "initial state", n_agents, |i| s.agents[i].n())?;
    if let Some(ws) = &s.w_init {
        check_vec_block(ws, "observer initial state", n_agents, |_| n0)?;
    }
    if let Some(etas) = &s.eta_init {
        check_vec_block(etas, "compensator initial state", n_agents, |i| {
            s.agents[i].n()
        })?;
    }
    for (i, agent) in s.agents.iter().enumerate() {
        if agent.l() != s.leader.l() {
            return Err(SimError::OutputDimensionMismatch {
                id: i + 1,
                agent_outputs: agent.l(),
                leader_outputs: s.leader.l(),
            });
        }
    }
    if s.mode.has_plants() {
        if s.gains.agents.len() != n_agents {
            return Err(SimError::GainCountMismatch {
                agents: n_agents,
                gains: s.gains.agents.len(),
            });
        }
        for (i, (agent, g)) in s.agents.iter().zip(&s.gains.agents).enumerate() {
            let id = i + 1;
            check_gain_shape(id, "state gain", &g.k1, agent.m(), agent.n())?;
            check_gain_shape(id, "feedforward gain", &g.k2, agent.m(), s.leader.n0())?;
            match (&g.k3, s.mode) {
                (Some(k3), _) => {
                    check_gain_shape(id, "injection gain", k3, agent.n(), agent.l())?
                }
                (None, Mode::OutputFeedback) => {
                    return Err(SimError::MissingGain {
                        id,
                        what: "injection",
                        mode: s.mode,
                    })
                }
                (None, _) => {}
            }
        }
    }
    Ok(())
}

fn check_vec_block(
    block: &[Vector],
    what: &str,
    n_agents: usize,
    expected: impl Fn(usize) -> usize,
) -> Result<(), SimError> {
    if block.len() != n_agents {
        return Err(SimError::BadInitialLength {
            what: format!("{what} list"),
            expected: n_agents,
            found: block.len(),
        });
    }
    for (i, v) in block.iter().enumerate() {
        if v.len() != expected(i) {
            return Err(SimError::BadInitialLength {
                what: format!("agent {} {what}", i + 1),
                expected: expected(i),
                found: v.len(),
            });
        }
    }
    Ok(())
}

fn check_gain_shape(
    id: usize,
    what: &'static str,
    gain: &crate::linalg::DenseMatrix,
    rows: usize,
    cols: usize,
) -> Result<(), SimError> {
    if gain.nrows() != rows || gain.ncols() != cols {
        return Err(SimError::BadGainShape {
            id,
            what,
            expected_rows: rows,
            expected_cols: cols,
            found_rows: gain.nrows(),
            found_cols: gain.ncols(),
        });
    }
    Ok(())
}

/// Checks every hypothesis behind the convergence and positivity guarantees
/// and collects human-readable violations. Never fails — callers decide
/// whether a non-passing report aborts (see [`run_scenario`]) or is merely
/// reported (the `check` command).
pub fn check_assumptions(s: &Scenario) -> AssumptionReport {
    let mut violations = Vec::new();

    let leader_diag = check_leader(&s.leader);
    if !leader_diag.unit_radius {
        violations.push(format!(
            "leader: spectral radius {:.6} is not 1",
            leader_diag.spectral_radius
        ));
    }
    let leader_nonnegative = leader_diag.a0_nonnegative && leader_diag.c0_nonnegative;
    if !leader_nonnegative {
        violations.push("leader: system data has negative entries".into());
    }

    let mut agents_nonnegative = true;
    for (i, agent) in s.agents.iter().enumerate() {
        let ok = check_positive_system(&agent.a, &agent.b, &agent.c, 0.0).unwrap_or(false);
        if !ok {
            agents_nonnegative = false;
            violations.push(format!(
                "agent {}: system data has negative entries, so the plant is not positive",
                i + 1
            ));
        }
    }

    let graph_constants = match s.schedule.constants() {
        Ok(c) => Some(c),
        Err(e) => {
            violations.push(format!("graph family: {e}"));
            None
        }
    };
    let mu = s.gains.mu;
    let mu_admissible = graph_constants
        .as_ref()
        .is_some_and(|c| validate_mu(mu, c));
    if let Some(c) = &graph_constants {
        if !mu_admissible {
            violations.push(format!(
                "coupling gain mu = {} is outside the admissible interval (0, {})",
                mu, c.mu_max
            ));
        }
    }

    let mut regulator_residuals = Vec::with_capacity(s.agents.len());
    let mut regulator_nonnegative = Vec::with_capacity(s.agents.len());
    for (i, agent) in s.agents.iter().enumerate() {
        match regulator::solve_regulator(agent, &s.leader) {
            Ok(sol) => {
                if !sol.solvable() {
                    violations.push(format!(
                        "agent {}: regulator equations unsolvable (residual {:.3e})",
                        i + 1,
                        sol.residual
                    ));
                } else if !sol.nonneg_ok {
                    violations.push(format!(
                        "agent {}: regulator equations admit no nonnegative solution",
                        i + 1
                    ));
                }
                regulator_residuals.push(sol.residual);
                regulator_nonnegative.push(sol.nonneg_ok);
            }
            Err(e) => {
                violations.push(format!("agent {}: regulator equations: {e}", i + 1));
                regulator_residuals.push(f64::INFINITY);
                regulator_nonnegative.push(false);
            }
        }
    }

    let mut gain_checks = Vec::new();
    if s.mode.has_plants() && s.gains.agents.len() == s.agents.len() {
        for (i, (agent, g)) in s.agents.iter().zip(&s.gains.agents).enumerate() {
            let id = i + 1;
            let state = crate::systems::verify_state_gain(&agent.a, &agent.b, &g.k1);
            let (rho, min_entry, state_ok) = match &state {
                Ok(d) => (d.spectral_radius, d.min_entry, d.pass()),
                Err(_) => (f64::NAN, f64::NAN, false),
            };
            if !state_ok {
                violations.push(format!(
                    "agent {id}: state gain fails verification (closed-loop spectral radius {rho:.6}, min entry {min_entry:.3e})"
                ));
            }
            let coupling = &agent.b * &g.k2;
            let coupling_ok = crate::linalg::is_nonnegative(&coupling, VERIFY_MARGIN);
            if !coupling_ok {
                violations.push(format!(
                    "agent {id}: feedforward coupling B·K2 has negative entries"
                ));
            }
            let mut check = GainVerification {
                agent_id: id,
                state_loop_spectral_radius: rho,
                state_loop_min_entry: min_entry,
                state_gain_ok: state_ok,
                feedforward_coupling_nonnegative: coupling_ok,
                observer_loop_spectral_radius: None,
                observer_loop_min_entry: None,
                observer_gain_ok: None,
                state_gain_nonpositive: None,
            };
            // an injection gain is verified whenever one is supplied; only
            // output feedback *requires* one (and a nonpositive K1)
            if let Some(k3) = &g.k3 {
                let obs = crate::systems::verify_observer_gain(&agent.a, &agent.c, k3);
                let (orho, omin, obs_ok) = match &obs {
                    Ok(d) => (d.spectral_radius, d.min_entry, d.pass()),
                    Err(_) => (f64::NAN, f64::NAN, false),
                };
                if !obs_ok {
                    violations.push(format!(
                        "agent {id}: injection gain fails verification (observer-loop spectral radius {orho:.6}, min entry {omin:.3e})"
                    ));
                }
                check.observer_loop_spectral_radius = Some(orho);
                check.observer_loop_min_entry = Some(omin);
                check.observer_gain_ok = Some(obs_ok);
            }
            if s.mode == Mode::OutputFeedback {
                let nonpositive = g.k1.iter().all(|&v| v <= VERIFY_MARGIN);
                if !nonpositive {
                    violations.push(format!(
                        "agent {id}: state gain must be nonpositive for output feedback (compensator positivity)"
                    ));
                }
                check.state_gain_nonpositive = Some(nonpositive);
            }
            gain_checks.push(check);
        }
    }

    if s.x0_init.iter().any(|&v| v < 0.0) {
        violations.push("leader initial state has negative entries".into());
    }
    for (i, x) in s.x_init.iter().enumerate() {
        if x.iter().any(|&v| v < 0.0) {
            violations.push(format!("agent {} initial state has negative entries", i + 1));
        }
    }
    for (what, block) in [("observer", &s.w_init), ("compensator", &s.eta_init)] {
        if let Some(vs) = block {
            if vs.iter().any(|v| v.iter().any(|&x| x != 0.0)) {
                violations.push(format!(
                    "{what} initial state is nonzero (outside the hypotheses of the convergence guarantees)"
                ));
            }
        }
    }

    AssumptionReport {
        leader_spectral_radius: leader_diag.spectral_radius,
        leader_unit_spectral_radius: leader_diag.unit_radius,
        leader_nonnegative,
        agents_nonnegative,
        graph_constants,
        mu,
        mu_admissible,
        regulator_residuals,
        regulator_nonnegative,
        gain_checks,
        violations,
    }
}

/// The schedule's switching signal: which graph (1-based index into the
/// family) is active at step `k`.
pub fn switching_index(schedule: &GraphSchedule, k: usize) -> usize {
    schedule.sigma(k)
}

/// Runs a scenario to its horizon and records the full trace.
///
/// Per step: (1) read `σ(k)` and the active graph, (2) compute every control
/// input from time-`k` states, (3) advance the leader, all plants, all
/// observers, and all compensators to `k+1`, (4) record. The leader evolves
/// autonomously; observer-only mode skips the plants entirely.
///
/// Fails with [`SimError::AssumptionsFailed`] naming each violated
/// hypothesis unless `override_assumptions` is set.
pub fn run_scenario(s: &Scenario) -> Result<SimulationTrace, SimError> {
    validate_structure(s)?;
    let report = check_assumptions(s);
    if !report.pass() && !s.override_assumptions {
        return Err(SimError::AssumptionsFailed(report.violations.join("; ")));
    }

    let n_agents = s.agents.len();
    let n0 = s.leader.n0();
    let mut x0 = s.x0_init.clone();
    let mut xs = s.x_init.clone();
    let mut ws = s
        .w_init
        .clone()
        .unwrap_or_else(|| vec![Vector::zeros(n0); n_agents]);
    let mut etas = s
        .eta_init
        .clone()
        .unwrap_or_else(|| s.agents.iter().map(|a| Vector::zeros(a.n())).collect());

    let mut steps = Vec::with_capacity(s.horizon + 1);
    for k in 0..=s.horizon {
        if s.force_observer_to_leader {
            for w in &mut ws {
                w.copy_from(&x0);
            }
        }
        let graph = s.schedule.graph_at(k);
        let sigma = s.schedule.sigma(k);
        let y0 = &s.leader.c0 * &x0;
        let last = k == s.horizon;

        let mut records = Vec::with_capacity(n_agents);
        let mut next_xs = Vec::with_capacity(n_agents);
        let mut next_ws = Vec::with_capacity(n_agents);
        let mut next_etas = Vec::with_capacity(n_agents);
        for (i, agent) in s.agents.iter().enumerate() {
            if !last {
                let neighbors: Vec<(&Vector, f64)> = graph
                    .follower_in_neighbors(i + 1)
                    .map(|j| (&ws[j - 1], 1.0))
                    .collect();
                let leader_link = graph.has_leader_edge(i + 1).then_some((&x0, 1.0));
                next_ws.push(protocol::observer_step(
                    &ws[i],
                    &neighbors,
                    leader_link,
                    s.gains.mu,
                    &s.leader.a0,
                )?);
            }

            let record = match s.mode {
                Mode::ObserverOnly => AgentStep {
                    x: None,
                    w: ws[i].clone(),
                    eta: None,
                    u: None,
                    y: None,
                    e: None,
                },
                Mode::StateFeedback => {
                    let g = &s.gains.agents[i];
                    let y = &agent.c * &xs[i];
                    let e = &y - &y0;
                    let mut u = None;
                    if !last {
                        let uu =
                            protocol::state_feedback_control(&g.k1, &g.k2, &xs[i], &ws[i])?;
                        next_xs.push(&agent.a * &xs[i] + &agent.b * &uu);
                        u = Some(uu);
                    }
                    AgentStep {
                        x: Some(xs[i].clone()),
                        w: ws[i].clone(),
                        eta: None,
                        u,
                        y: Some(y),
                        e: Some(e),
                    }
                }
                Mode::OutputFeedback => {
                    let g = &s.gains.agents[i];
                    let k3 = g.k3.as_ref().expect("presence checked during validation");
                    let y = &agent.c * &xs[i];
                    let e = &y - &y0;
                    let mut u = None;
                    if !last {
                        let (uu, eta_next) = protocol::output_feedback_step(
                            &g.k1, &g.k2, k3, agent, &etas[i], &ws[i], &y,
                        )?;
                        next_xs.push(&agent.a * &xs[i] + &agent.b * &uu);
                        next_etas.push(eta_next);
                        u = Some(uu);
                    }
                    AgentStep {
                        x: Some(xs[i].clone()),
                        w: ws[i].clone(),
                        eta: Some(etas[i].clone()),
                        u,
                        y: Some(y),
                        e: Some(e),
                    }
                }
            };
            records.push(record);
        }
        steps.push(StepRecord {
            k,
            sigma,
            x0: x0.clone(),
            y0,
            agents: records,
        });
        if !last {
            x0 = &s.leader.a0 * &x0;
            ws = next_ws;
            if s.mode.has_plants() {
                xs = next_xs;
            }
            if s.mode == Mode::OutputFeedback {
                etas = next_etas;
            }
        }
    }
    Ok(SimulationTrace {
        mode: s.mode,
        horizon: s.horizon,
        steps,
    })
}

/// One negative entry (or `η > x` excess) found in a trace. `agent` 0 is the
/// leader; followers are 1-based. `state` names the scanned block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityViolation {
    pub step: usize,
    pub agent: usize,
    pub state: &'static str,
    pub component: usize,
    pub value: f64,
}

/// Positivity scan over a complete trace: plant and observer states must stay
/// entrywise nonnegative. The compensator is not constrained by the theory,
/// so `η` is reported separately through the relation it does satisfy,
/// `η_i ≤ x_i` (the difference `x_i − η_i` is itself a nonnegative state).
#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    /// Smallest entry over `x_0`, every `x_i`, and every `w_i`, all steps.
    pub min_entry: f64,
    pub violations: Vec<PositivityViolation>,
    /// Steps where some `η_i` component exceeds the matching `x_i` component
    /// beyond tolerance; `value` holds the excess.
    pub eta_exceedances: Vec<PositivityViolation>,
}

impl PositivityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty() && self.eta_exceedances.is_empty()
    }
}

pub fn positivity_report(t: &SimulationTrace) -> PositivityReport {
    let mut min_entry = f64::INFINITY;
    let mut violations = Vec::new();
    let mut eta_exceedances = Vec::new();
    let scan = |step: usize, agent: usize, state: &'static str, v: &Vector,
                    min_entry: &mut f64,
                    violations: &mut Vec<PositivityViolation>| {
        for (component, &value) in v.iter().enumerate() {
            *min_entry = min_entry.min(value);
            if value < -POSITIVITY_TOL {
                violations.push(PositivityViolation {
                    step,
                    agent,
                    state,
                    component,
                    value,
                });
            }
        }
    };
    for step in &t.steps {
        scan(step.k, 0, "x", &step.x0, &mut min_entry, &mut violations);
        for (i, a) in step.agents.iter().enumerate() {
            let id = i + 1;
            if let Some(x) = &a.x {
                scan(step.k, id, "x", x, &mut min_entry, &mut violations);
            }
            scan(step.k, id, "w", &a.w, &mut min_entry, &mut violations);
            if let (Some(eta), Some(x)) = (&a.eta, &a.x) {
                for (component, (&ev, &xv)) in eta.iter().zip(x.iter()).enumerate() {
                    if ev > xv + POSITIVITY_TOL {
                        eta_exceedances.push(PositivityViolation {
                            step: step.k,
                            agent: id,
                            state: "eta",
                            component,
                            value: ev - xv,
                        });
                    }
                }
            }
        }
    }
    PositivityReport {
        min_entry,
        violations,
        eta_exceedances,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub threshold: f64,
    pub converged: bool,
    /// First step `K` with `max_i ‖e_i(k)‖_∞ < threshold` for every `k ≥ K`
    /// inside the horizon.
    pub first_step: Option<usize>,
    /// Largest per-step error over the final 10% (rounded up) of records.
    pub tail_error: f64,
}

/// Worst tracking error at one recorded step: `max_i ‖e_i(k)‖_∞`, or the
/// observer disagreement `max_i ‖w_i(k) − x_0(k)‖_∞` when no plants ran.
pub fn step_error(step: &StepRecord) -> f64 {
    step.agents
        .iter()
        .map(|a| match &a.e {
            Some(e) => e.amax(),
            None => (&a.w - &step.x0).amax(),
        })
        .fold(0.0, f64::max)
}

pub fn convergence_report(t: &SimulationTrace, threshold: f64) -> ConvergenceReport {
    let errs: Vec<f64> = t.steps.iter().map(step_error).collect();
    let mut first_step = None;
    for k in (0..errs.len()).rev() {
        if errs[k] < threshold {
            first_step = Some(k);
        } else {
            break;
        }
    }
    let tail = errs.len().div_ceil(10);
    let tail_error = errs[errs.len() - tail..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    ConvergenceReport {
        threshold,
        converged: first_step.is_some(),
        first_step,
        tail_error,
    }
}
