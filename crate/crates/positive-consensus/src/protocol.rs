//! The distributed update rules: leader-state observer, state feedback, and
//! output feedback.
//!
//! Each follower runs a copy of the leader dynamics corrected by a diffusive
//! coupling on the estimate disagreements,
//!
//! ```text
//! w_i(k+1) = A0·( w_i(k) + μ·Σ_j a_ij(k)·(w_j(k) − w_i(k)) )
//! ```
//!
//! where the sum ranges over in-neighbors and `w_0(k) := x_0(k)` for agents
//! pinned to the leader. Because the coupling matrix `I − μH` is nonnegative
//! for `μ ≤ 1/Δ`, the estimates inherit the leader's positivity. The control
//! laws then combine the local state (or a local output-driven compensator)
//! with the estimate: `u = K1·x + K2·w` or `u = K1·η + K2·w`.

use thiserror::Error;

use crate::linalg::{kron, DenseMatrix, Vector};
use crate::systems::AgentModel;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("{what} has length {found}, expected {expected}")]
    VectorLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} has shape {found_rows} x {found_cols}, expected {rows} x {cols}")]
    MatrixShape {
        what: &'static str,
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
}

/// Per-follower leader estimates plus the shared coupling gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub w: Vec<Vector>,
    pub mu: f64,
}

impl ObserverState {
    /// The theorem initialization: every estimate starts at the origin.
    pub fn zeros(n_agents: usize, n0: usize, mu: f64) -> Self {
        Self {
            w: vec![Vector::zeros(n0); n_agents],
            mu,
        }
    }
}

/// Per-follower compensator states for output feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub eta: Vec<Vector>,
}

impl ControllerState {
    /// The theorem initialization: every compensator starts at the origin.
    pub fn zeros(state_dims: &[usize]) -> Self {
        Self {
            eta: state_dims.iter().map(|&n| Vector::zeros(n)).collect(),
        }
    }
}

fn check_len(what: &'static str, v: &Vector, expected: usize) -> Result<(), ProtocolError> {
    if v.len() != expected {
        return Err(ProtocolError::VectorLength {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// One observer update for a single agent.
///
/// `neighbor_ws` carries follower estimates with their edge weights;
/// `leader_w0` carries the leader's state (which plays `w_0`) when the agent
/// is pinned. Returns `A0·(w_i + μ·Σ a·(w_j − w_i))`.
pub fn observer_step(
    w_i: &Vector,
    neighbor_ws: &[(&Vector, f64)],
    leader_w0: Option<(&Vector, f64)>,
    mu: f64,
    a0: &DenseMatrix,
) -> Result<Vector, ProtocolError> {
    let n0 = a0.nrows();
    check_len("observer state", w_i, n0)?;
    let mut diffusion = Vector::zeros(n0);
    for (w_j, weight) in neighbor_ws {
        check_len("neighbor estimate", w_j, n0)?;
        diffusion += *weight * (*w_j - w_i);
    }
    if let Some((w_0, weight)) = leader_w0 {
        check_len("leader state", w_0, n0)?;
        diffusion += weight * (w_0 - w_i);
    }
    Ok(a0 * (w_i + mu * diffusion))
}

/// The switched system matrix of the stacked observer error: `(I − μH) ⊗ A0`.
///
/// Its spectrum is the pairwise product of the factors' spectra, which is how
/// the coupling gain bound guarantees contraction. `hp` must be square.
pub fn compact_observer_matrix(hp: &DenseMatrix, mu: f64, a0: &DenseMatrix) -> DenseMatrix {
    assert_eq!(hp.nrows(), hp.ncols(), "follower submatrix must be square");
    let n = hp.nrows();
    let coupling = DenseMatrix::identity(n, n) - mu * hp;
    kron(&coupling, a0)
}

/// One synchronous update of the whole stacked observer:
/// `w⁺ = ((I − μH) ⊗ A0)·w + μ·(Λ ⊗ A0)·(1 ⊗ x0)`, with `Λ` the diagonal of
/// leader-link weights. Used as the closed-form oracle against per-agent
/// stepping.
pub fn stacked_observer_step(
    w_stacked: &Vector,
    hp: &DenseMatrix,
    leader_links: &[f64],
    mu: f64,
    a0: &DenseMatrix,
    x0: &Vector,
) -> Result<Vector, ProtocolError> {
    let n = hp.nrows();
    let n0 = a0.nrows();
    check_len("stacked observer state", w_stacked, n * n0)?;
    check_len("leader state", x0, n0)?;
    if leader_links.len() != n {
        return Err(ProtocolError::VectorLength {
            what: "leader link diagonal",
            expected: n,
            found: leader_links.len(),
        });
    }
    let system = compact_observer_matrix(hp, mu, a0);
    let lambda = DenseMatrix::from_diagonal(&Vector::from_row_slice(leader_links));
    let ones = Vector::from_element(n, 1.0);
    let input = mu * kron(&lambda, a0) * kron_vec(&ones, x0);
    Ok(system * w_stacked + input)
}

/// `a ⊗ b` for column vectors.
fn kron_vec(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        out.rows_mut(i * b.len(), b.len()).copy_from(&(a[i] * b));
    }
    out
}

/// State feedback law `u = K1·x + K2·w`.
pub fn state_feedback_control(
    k1: &DenseMatrix,
    k2: &DenseMatrix,
    x_i: &Vector,
    w_i: &Vector,
) -> Result<Vector, ProtocolError> {
    check_len("agent state", x_i, k1.ncols())?;
    check_len("leader estimate", w_i, k2.ncols())?;
    if k1.nrows() != k2.nrows() {
        return Err(ProtocolError::MatrixShape {
            what: "feedforward gain",
            rows: k1.nrows(),
            cols: k2.ncols(),
            found_rows: k2.nrows(),
            found_cols: k2.ncols(),
        });
    }
    Ok(k1 * x_i + k2 * w_i)
}

/// Output feedback law: `u = K1·η + K2·w` together with the compensator
/// update `η⁺ = (A − K3·C)·η + B·u + K3·y`, using the same-step `u`.
pub fn output_feedback_step(
    k1: &DenseMatrix,
    k2: &DenseMatrix,
    k3: &DenseMatrix,
    agent: &AgentModel,
    eta_i: &Vector,
    w_i: &Vector,
    y_i: &Vector,
) -> Result<(Vector, Vector), ProtocolError> {
    check_len("compensator state", eta_i, agent.n())?;
    check_len("agent output", y_i, agent.l())?;
    if k3.nrows() != agent.n() || k3.ncols() != agent.l() {
        return Err(ProtocolError::MatrixShape {
            what: "injection gain",
            rows: agent.n(),
            cols: agent.l(),
            found_rows: k3.nrows(),
            found_cols: k3.ncols(),
        });
    }
    let u = state_feedback_control(k1, k2, eta_i, w_i)?;
    if u.len() != agent.m() {
        return Err(ProtocolError::VectorLength {
            what: "control input",
            expected: agent.m(),
            found: u.len(),
        });
    }
    let eta_next = (&agent.a - k3 * &agent.c) * eta_i + &agent.b * &u + k3 * y_i;
    Ok((u, eta_next))
}
