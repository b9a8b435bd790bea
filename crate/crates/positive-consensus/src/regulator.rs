//! Regulator equations: the tracking manifold for each follower.
//!
//! For a follower `(A, B, C)` and leader `(A0, C0)`, a pair `(X, U)` with
//!
//! ```text
//! A·X + B·U − X·A0 = 0,      C·X − C0 = 0
//! ```
//!
//! defines the manifold `x = X·x0` on which the follower's output equals the
//! leader's, sustained by the steady-state input `u = U·x0`. The pair is found
//! by vectorizing both equations into one linear system and solving it by
//! minimum-norm least squares; if that lands outside the nonnegative orthant
//! a second, nonnegativity-constrained pass runs.

use thiserror::Error;

use crate::linalg::{kron, min_entry, solve_linear_least_squares, DenseMatrix, Vector};
use crate::systems::{AgentModel, LeaderModel};

/// A solution is accepted as exact when its substitution residual is below this.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Entrywise floor for calling a solution nonnegative.
pub const NONNEG_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RegulatorError {
    #[error("agent {agent_id} has {agent_outputs} outputs but the leader has {leader_outputs}")]
    OutputDimensionMismatch {
        agent_id: usize,
        agent_outputs: usize,
        leader_outputs: usize,
    },
    #[error("feedforward needs a solved regulator pair; substitution residual is {residual:.3e}")]
    NotSolvable { residual: f64 },
    #[error("state gain has shape {found_rows} x {found_cols}, expected {rows} x {cols}")]
    GainShape {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
}

/// Solution of the regulator equations for one follower.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    /// State map onto the manifold, `n_i × n_0`.
    pub x: DenseMatrix,
    /// Steady-state input map, `m_i × n_0`.
    pub u: DenseMatrix,
    /// 2-norm of the stacked substitution residual of both equations.
    pub residual: f64,
    /// Whether `X` and `U` are entrywise ≥ −[`NONNEG_TOL`].
    pub nonneg_ok: bool,
}

impl RegulatorSolution {
    /// True when the equations are satisfied to [`RESIDUAL_TOL`].
    pub fn solvable(&self) -> bool {
        self.residual < RESIDUAL_TOL
    }
}

/// Substitution residual of a candidate pair `(X, U)`: the 2-norm of the
/// stacked entries of `A·X + B·U − X·A0` and `C·X − C0`.
pub fn regulation_residual(
    agent: &AgentModel,
    leader: &LeaderModel,
    x: &DenseMatrix,
    u: &DenseMatrix,
) -> Result<f64, RegulatorError> {
    check_output_dims(agent, leader)?;
    let sylvester = &agent.a * x + &agent.b * u - x * &leader.a0;
    let output = &agent.c * x - &leader.c0;
    Ok((sylvester.norm_squared() + output.norm_squared()).sqrt())
}

fn check_output_dims(agent: &AgentModel, leader: &LeaderModel) -> Result<(), RegulatorError> {
    if agent.l() != leader.l() {
        return Err(RegulatorError::OutputDimensionMismatch {
            agent_id: agent.id,
            agent_outputs: agent.l(),
            leader_outputs: leader.l(),
        });
    }
    Ok(())
}

/// Builds the vectorized system `M·[vec X; vec U] = [0; vec C0]` and stacks
/// the right-hand side. Vectorization is column-stacking, so
/// `vec(A·X) = (I ⊗ A)·vec X` and `vec(X·A0) = (A0ᵀ ⊗ I)·vec X`.
fn vectorized_system(agent: &AgentModel, leader: &LeaderModel) -> (DenseMatrix, Vector) {
    let n = agent.n();
    let m = agent.m();
    let n0 = leader.n0();
    let l = agent.l();
    let eye_n0 = DenseMatrix::identity(n0, n0);
    let eye_n = DenseMatrix::identity(n, n);

    let sylv_x = kron(&eye_n0, &agent.a) - kron(&leader.a0.transpose(), &eye_n);
    let sylv_u = kron(&eye_n0, &agent.b);
    let out_x = kron(&eye_n0, &agent.c);

    let rows = n * n0 + l * n0;
    let cols = n * n0 + m * n0;
    let mut system = DenseMatrix::zeros(rows, cols);
    system
        .view_mut((0, 0), (n * n0, n * n0))
        .copy_from(&sylv_x);
    system
        .view_mut((0, n * n0), (n * n0, m * n0))
        .copy_from(&sylv_u);
    system
        .view_mut((n * n0, 0), (l * n0, n * n0))
        .copy_from(&out_x);

    let mut rhs = Vector::zeros(rows);
    rhs.rows_mut(n * n0, l * n0)
        .copy_from_slice(leader.c0.as_slice());
    (system, rhs)
}

fn unpack(agent: &AgentModel, leader: &LeaderModel, z: &Vector) -> (DenseMatrix, DenseMatrix) {
    let n = agent.n();
    let m = agent.m();
    let n0 = leader.n0();
    let x = DenseMatrix::from_column_slice(n, n0, &z.as_slice()[..n * n0]);
    let u = DenseMatrix::from_column_slice(m, n0, &z.as_slice()[n * n0..]);
    (x, u)
}

/// Solves the regulator equations by minimum-norm least squares, falling back
/// to a nonnegativity-constrained solve when the first pass leaves the
/// nonnegative orthant. A residual above [`RESIDUAL_TOL`] flags the pair as
/// unsolvable in the returned solution rather than erroring.
pub fn solve_regulator(
    agent: &AgentModel,
    leader: &LeaderModel,
) -> Result<RegulatorSolution, RegulatorError> {
    check_output_dims(agent, leader)?;
    let (system, rhs) = vectorized_system(agent, leader);
    let (z, _) = solve_linear_least_squares(&system, &rhs)
        .expect("vectorized regulator system is non-empty");
    let (x, u) = unpack(agent, leader, &z);
    let residual = regulation_residual(agent, leader, &x, &u)?;
    let nonneg_ok = min_entry(&x).min(min_entry(&u)) >= -NONNEG_TOL;

    if residual < RESIDUAL_TOL && !nonneg_ok {
        // second pass: the minimum-norm point is outside the orthant, but a
        // nonnegative solution may still exist on the solution set
        let z2 = nonneg_least_squares(&system, &rhs);
        let (x2, u2) = unpack(agent, leader, &z2);
        let residual2 = regulation_residual(agent, leader, &x2, &u2)?;
        if residual2 < RESIDUAL_TOL {
            let nonneg_ok2 = min_entry(&x2).min(min_entry(&u2)) >= -NONNEG_TOL;
            return Ok(RegulatorSolution {
                x: x2,
                u: u2,
                residual: residual2,
                nonneg_ok: nonneg_ok2,
            });
        }
    }
    Ok(RegulatorSolution {
        x,
        u,
        residual,
        nonneg_ok,
    })
}

/// Feedforward gain `K2 = U − K1·X`.
///
/// Requires a solved pair and a conformable `K1`. A negative `K2` entry is not
/// rejected here — the scenario checks report it, since the positivity
/// argument for the closed loop needs `K2 ≥ 0`.
pub fn compute_feedforward_gain(
    sol: &RegulatorSolution,
    k1: &DenseMatrix,
) -> Result<DenseMatrix, RegulatorError> {
    if !sol.solvable() {
        return Err(RegulatorError::NotSolvable {
            residual: sol.residual,
        });
    }
    let rows = sol.u.nrows();
    let cols = sol.x.nrows();
    if k1.nrows() != rows || k1.ncols() != cols {
        return Err(RegulatorError::GainShape {
            rows,
            cols,
            found_rows: k1.nrows(),
            found_cols: k1.ncols(),
        });
    }
    Ok(&sol.u - k1 * &sol.x)
}

/// Lawson–Hanson nonnegative least squares: minimizes `‖M·z − rhs‖` over
/// `z ≥ 0` by active-set pivoting, one gradient-positive column at a time.
fn nonneg_least_squares(m: &DenseMatrix, rhs: &Vector) -> Vector {
    let ncols = m.ncols();
    let mut z = Vector::zeros(ncols);
    let mut passive = vec![false; ncols];
    let scale = m.amax().max(1.0) * rhs.amax().max(1.0);
    let grad_tol = 1e-12 * scale;

    for _ in 0..3 * ncols.max(1) {
        let w = m.transpose() * (rhs - m * &z);
        let enter = (0..ncols)
            .filter(|&j| !passive[j] && w[j] > grad_tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(enter) = enter else { break };
        passive[enter] = true;

        loop {
            let cols: Vec<usize> = (0..ncols).filter(|&j| passive[j]).collect();
            let sub = m.select_columns(cols.iter());
            let (s_sub, _) = solve_linear_least_squares(&sub, rhs)
                .expect("passive set is non-empty");
            if s_sub.min() > 0.0 {
                z.fill(0.0);
                for (idx, &j) in cols.iter().enumerate() {
                    z[j] = s_sub[idx];
                }
                break;
            }
            // back off along the segment to the subproblem optimum until the
            // first passive variable hits zero, then drop it
            let mut alpha = f64::INFINITY;
            for (idx, &j) in cols.iter().enumerate() {
                if s_sub[idx] <= 0.0 {
                    let denom = z[j] - s_sub[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(z[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                break;
            }
            for (idx, &j) in cols.iter().enumerate() {
                z[j] += alpha * (s_sub[idx] - z[j]);
                if z[j] <= 1e-14 * scale {
                    z[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    z
}
