//! Agent and leader models with positivity checks, plus verification and
//! synthesis of stabilizing gains.
//!
//! A discrete-time linear system is positive — trajectories stay in the
//! nonnegative orthant for all nonnegative initial states and inputs —
//! exactly when its system matrices are entrywise nonnegative. Feedback
//! design therefore has a two-sided target: the closed loop must be both
//! nonnegative and Schur. Verification checks those two facts directly;
//! synthesis searches for a nonpositive state gain (or nonnegative
//! output-injection gain) achieving them via a weighted row-sum certificate.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use thiserror::Error;

use crate::linalg::{is_nonnegative, min_entry, spectral_radius, DenseMatrix, Vector};

/// Tolerance for verification: a closed loop passes when its minimum entry is
/// at least `-VERIFY_MARGIN` and its spectral radius is below `1 - VERIFY_MARGIN`.
pub const VERIFY_MARGIN: f64 = 1e-9;

/// Contraction headroom targeted by synthesis; far looser than
/// [`VERIFY_MARGIN`] so synthesized loops are robustly inside the unit disc.
pub const SYNTHESIS_MARGIN: f64 = 0.05;

/// Maximum number of gain/weight alternations before synthesis gives up.
pub const SYNTHESIS_BUDGET: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum SystemsError {
    #[error("state matrix must be square, got {0} x {1}")]
    StateNotSquare(usize, usize),
    #[error("state dimension must be at least 1")]
    EmptyState,
    #[error("{what} has {found} rows, expected {expected}")]
    RowMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} has {found} columns, expected {expected}")]
    ColMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("agent {id} must have at least one input and one output channel")]
    Unactuated { id: usize },
    #[error("{what} must be nonnegative for synthesis")]
    NegativeData { what: &'static str },
    #[error(
        "no stabilizing gain found after {iterations} alternations; best closed-loop spectral radius {best_rho}"
    )]
    SynthesisInfeasible { iterations: usize, best_rho: f64 },
    #[error("linear program failed: {0}")]
    LpFailure(String),
}

/// One follower: `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub id: usize,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
}

impl AgentModel {
    pub fn new(
        id: usize,
        a: DenseMatrix,
        b: DenseMatrix,
        c: DenseMatrix,
    ) -> Result<Self, SystemsError> {
        check_system_dimensions(&a, &b, &c)?;
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(SystemsError::Unactuated { id });
        }
        Ok(Self { id, a, b, c })
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension.
    pub fn l(&self) -> usize {
        self.c.nrows()
    }
}

/// The autonomous leader: `x0(k+1) = A0 x0(k)`, `y0(k) = C0 x0(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    pub a0: DenseMatrix,
    pub c0: DenseMatrix,
}

impl LeaderModel {
    pub fn new(a0: DenseMatrix, c0: DenseMatrix) -> Result<Self, SystemsError> {
        if a0.nrows() != a0.ncols() {
            return Err(SystemsError::StateNotSquare(a0.nrows(), a0.ncols()));
        }
        if a0.nrows() == 0 {
            return Err(SystemsError::EmptyState);
        }
        if c0.nrows() == 0 {
            return Err(SystemsError::Unactuated { id: 0 });
        }
        if c0.ncols() != a0.nrows() {
            return Err(SystemsError::ColMismatch {
                what: "leader output matrix",
                expected: a0.nrows(),
                found: c0.ncols(),
            });
        }
        Ok(Self { a0, c0 })
    }

    pub fn n0(&self) -> usize {
        self.a0.nrows()
    }

    pub fn l(&self) -> usize {
        self.c0.nrows()
    }
}

/// Where a gain came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    User,
    Synthesized,
}

/// Per-agent feedback gains. `k3` is present only in output-feedback mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGains {
    pub k1: DenseMatrix,
    pub k2: DenseMatrix,
    pub k3: Option<DenseMatrix>,
    pub provenance: Provenance,
}

/// All gains for a scenario: per-agent feedback plus the shared observer
/// coupling gain `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub agents: Vec<AgentGains>,
    pub mu: f64,
    pub mu_provenance: Provenance,
}

fn check_system_dimensions(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
) -> Result<(), SystemsError> {
    if a.nrows() != a.ncols() {
        return Err(SystemsError::StateNotSquare(a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(SystemsError::EmptyState);
    }
    if b.nrows() != n {
        return Err(SystemsError::RowMismatch {
            what: "input matrix",
            expected: n,
            found: b.nrows(),
        });
    }
    if c.ncols() != n {
        return Err(SystemsError::ColMismatch {
            what: "output matrix",
            expected: n,
            found: c.ncols(),
        });
    }
    Ok(())
}

/// True iff `A`, `B`, `C` are all entrywise nonnegative (within `tol`), i.e.
/// the system maps nonnegative states and inputs to nonnegative states and
/// outputs.
pub fn check_positive_system(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    tol: f64,
) -> Result<bool, SystemsError> {
    check_system_dimensions(a, b, c)?;
    Ok(is_nonnegative(a, tol) && is_nonnegative(b, tol) && is_nonnegative(c, tol))
}

/// Outcome of checking the leader model: nonnegative matrices and a unit
/// spectral radius (marginally stable reference generator).
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderDiagnosis {
    pub a0_nonnegative: bool,
    pub c0_nonnegative: bool,
    pub spectral_radius: f64,
    pub unit_radius: bool,
}

impl LeaderDiagnosis {
    pub fn pass(&self) -> bool {
        self.a0_nonnegative && self.c0_nonnegative && self.unit_radius
    }
}

pub fn check_leader(leader: &LeaderModel) -> LeaderDiagnosis {
    let rho = spectral_radius(&leader.a0).expect("leader state matrix is square and non-empty");
    LeaderDiagnosis {
        a0_nonnegative: is_nonnegative(&leader.a0, 0.0),
        c0_nonnegative: is_nonnegative(&leader.c0, 0.0),
        spectral_radius: rho,
        unit_radius: (rho - 1.0).abs() <= 1e-8,
    }
}

/// Outcome of verifying a closed loop: the matrix itself plus the two facts
/// that matter — its minimum entry (nonnegativity) and its spectral radius
/// (Schur stability).
#[derive(Debug, Clone, PartialEq)]
pub struct GainDiagnosis {
    pub closed_loop: DenseMatrix,
    pub min_entry: f64,
    pub spectral_radius: f64,
}

impl GainDiagnosis {
    pub fn pass(&self) -> bool {
        self.min_entry >= -VERIFY_MARGIN && self.spectral_radius < 1.0 - VERIFY_MARGIN
    }
}

fn diagnose(closed_loop: DenseMatrix) -> GainDiagnosis {
    let rho = spectral_radius(&closed_loop).expect("closed loop is square and non-empty");
    GainDiagnosis {
        min_entry: min_entry(&closed_loop),
        spectral_radius: rho,
        closed_loop,
    }
}

/// Checks that `A + B·K1` is entrywise nonnegative and Schur.
pub fn verify_state_gain(
    a: &DenseMatrix,
    b: &DenseMatrix,
    k1: &DenseMatrix,
) -> Result<GainDiagnosis, SystemsError> {
    if a.nrows() != a.ncols() {
        return Err(SystemsError::StateNotSquare(a.nrows(), a.ncols()));
    }
    if b.nrows() != a.nrows() {
        return Err(SystemsError::RowMismatch {
            what: "input matrix",
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if k1.nrows() != b.ncols() {
        return Err(SystemsError::RowMismatch {
            what: "state gain",
            expected: b.ncols(),
            found: k1.nrows(),
        });
    }
    if k1.ncols() != a.nrows() {
        return Err(SystemsError::ColMismatch {
            what: "state gain",
            expected: a.nrows(),
            found: k1.ncols(),
        });
    }
    Ok(diagnose(a + b * k1))
}

/// Checks that `A − K3·C` is entrywise nonnegative and Schur.
pub fn verify_observer_gain(
    a: &DenseMatrix,
    c: &DenseMatrix,
    k3: &DenseMatrix,
) -> Result<GainDiagnosis, SystemsError> {
    if a.nrows() != a.ncols() {
        return Err(SystemsError::StateNotSquare(a.nrows(), a.ncols()));
    }
    if c.ncols() != a.nrows() {
        return Err(SystemsError::ColMismatch {
            what: "output matrix",
            expected: a.nrows(),
            found: c.ncols(),
        });
    }
    if k3.nrows() != a.nrows() {
        return Err(SystemsError::RowMismatch {
            what: "injection gain",
            expected: a.nrows(),
            found: k3.nrows(),
        });
    }
    if k3.ncols() != c.nrows() {
        return Err(SystemsError::ColMismatch {
            what: "injection gain",
            expected: c.nrows(),
            found: k3.ncols(),
        });
    }
    Ok(diagnose(a - k3 * c))
}

/// Searches for a nonpositive `K1` making `A + B·K1` nonnegative and Schur.
///
/// A nonnegative matrix `M` is Schur exactly when `M·v < v` for some positive
/// weight vector `v`. With `v` fixed, feasibility in `K1 ≤ 0` is a linear
/// program; the bilinearity in `(K1, v)` is handled by alternating the solve
/// with a weight update built from the attained closed loop. The returned
/// gain always passes [`verify_state_gain`] — the verifier is the acceptance
/// oracle, not the certificate.
pub fn synthesize_state_gain(
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<DenseMatrix, SystemsError> {
    if a.nrows() != a.ncols() {
        return Err(SystemsError::StateNotSquare(a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(SystemsError::EmptyState);
    }
    if b.nrows() != n {
        return Err(SystemsError::RowMismatch {
            what: "input matrix",
            expected: n,
            found: b.nrows(),
        });
    }
    if !is_nonnegative(a, 0.0) {
        return Err(SystemsError::NegativeData {
            what: "state matrix",
        });
    }
    if !is_nonnegative(b, 0.0) {
        return Err(SystemsError::NegativeData {
            what: "input matrix",
        });
    }

    let mut v = vec![1.0; n];
    let mut best_rho = f64::INFINITY;
    for _ in 0..SYNTHESIS_BUDGET {
        let k1 = best_gain_for_weights(a, b, &v)?;
        let diag = verify_state_gain(a, b, &k1).expect("dimensions already validated");
        if diag.pass() {
            return Ok(k1);
        }
        best_rho = best_rho.min(diag.spectral_radius);
        v = contraction_weights(&diag.closed_loop, diag.spectral_radius);
    }
    Err(SystemsError::SynthesisInfeasible {
        iterations: SYNTHESIS_BUDGET,
        best_rho,
    })
}

/// Searches for a nonnegative `K3` making `A − K3·C` nonnegative and Schur.
///
/// Solved by duality: a state-gain synthesis on `(Aᵀ, Cᵀ)` yields `K ≤ 0`
/// with `Aᵀ + CᵀK` nonnegative and Schur; transposing gives `A + KᵀC`, so
/// `K3 = −Kᵀ ≥ 0` works for the injection form.
pub fn synthesize_observer_gain(
    a: &DenseMatrix,
    c: &DenseMatrix,
) -> Result<DenseMatrix, SystemsError> {
    if a.nrows() != a.ncols() {
        return Err(SystemsError::StateNotSquare(a.nrows(), a.ncols()));
    }
    if c.ncols() != a.nrows() {
        return Err(SystemsError::ColMismatch {
            what: "output matrix",
            expected: a.nrows(),
            found: c.ncols(),
        });
    }
    let k = synthesize_state_gain(&a.transpose(), &c.transpose())?;
    Ok(-k.transpose())
}

/// One linear-program pass: with weights `v` fixed, maximize the worst
/// row-wise contraction margin `t` over `P = −K1 ≥ 0` subject to `B·P ≤ A`
/// entrywise (closed-loop nonnegativity) and
/// `(A − B·P)·v + t_i·v ≤ (1 − ε)·v` per row with `t ≤ t_i`.
///
/// The per-row margins `t_i` carry a small secondary objective weight so that
/// rows the input cannot influence (which cap `t`) do not strip all pressure
/// off the rest — among gains attaining the best worst-case margin, the one
/// shrinking the remaining weighted row sums most is returned.
fn best_gain_for_weights(
    a: &DenseMatrix,
    b: &DenseMatrix,
    v: &[f64],
) -> Result<DenseMatrix, SystemsError> {
    let n = a.nrows();
    let m = b.ncols();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let p: Vec<Vec<microlp::Variable>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| problem.add_var(0.0, (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    let t = problem.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    let row_margins: Vec<microlp::Variable> = (0..n)
        .map(|_| problem.add_var(1e-3, (f64::NEG_INFINITY, 1.0)))
        .collect();

    for i in 0..n {
        for j in 0..n {
            let expr: LinearExpr = (0..m).map(|r| (p[r][j], b[(i, r)])).collect();
            problem.add_constraint(expr, ComparisonOp::Le, a[(i, j)]);
        }
    }
    for i in 0..n {
        let mut expr = LinearExpr::empty();
        for r in 0..m {
            for j in 0..n {
                expr.add(p[r][j], -b[(i, r)] * v[j]);
            }
        }
        expr.add(row_margins[i], v[i]);
        let row_sum: f64 = (0..n).map(|j| a[(i, j)] * v[j]).sum();
        problem.add_constraint(
            expr,
            ComparisonOp::Le,
            (1.0 - SYNTHESIS_MARGIN) * v[i] - row_sum,
        );
        problem.add_constraint(
            [(t, 1.0), (row_margins[i], -1.0)],
            ComparisonOp::Le,
            0.0,
        );
    }

    let solution = problem
        .solve()
        .map_err(|e| SystemsError::LpFailure(e.to_string()))?
        .into_solution()
        .map_err(|_| SystemsError::LpFailure("solve interrupted".into()))?;
    let mut k1 = DenseMatrix::zeros(m, n);
    for r in 0..m {
        for s in 0..n {
            k1[(r, s)] = -solution.var_value(p[r][s]);
        }
    }
    Ok(k1)
}

/// Weight update for the alternation: a truncated Neumann series
/// `Σ (M/θ)^j · 1` with `θ` just above the attained spectral radius, which
/// tilts the weights toward the closed loop's dominant directions.
fn contraction_weights(closed_loop: &DenseMatrix, rho: f64) -> Vec<f64> {
    let n = closed_loop.nrows();
    let theta = rho.max(0.5) + 0.05;
    let mut acc = Vector::from_element(n, 1.0);
    let mut sum = acc.clone();
    for _ in 0..60 {
        acc = closed_loop * &acc / theta;
        sum += &acc;
    }
    let peak = sum.amax().max(1e-300);
    (0..n).map(|i| (sum[i] / peak).max(1e-8)).collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::{AgentModel, LeaderModel};
    use crate::linalg::from_rows;

    pub fn leader() -> LeaderModel {
        LeaderModel::new(
            from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap(),
            from_rows(&[vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap()
    }

    pub fn agent1() -> AgentModel {
        AgentModel::new(
            1,
            from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
            from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
            from_rows(&[vec![2.0, 0.0]]).unwrap(),
        )
        .unwrap()
    }

    pub fn agent2() -> AgentModel {
        AgentModel::new(
            2,
            from_rows(&[vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap(),
            from_rows(&[vec![1.0], vec![1.0]]).unwrap(),
            from_rows(&[vec![2.0, 0.0]]).unwrap(),
        )
        .unwrap()
    }

    pub fn agent3() -> AgentModel {
        AgentModel::new(
            3,
            from_rows(&[vec![1.0, 0.0], vec![0.5, 0.8]]).unwrap(),
            from_rows(&[vec![1.0], vec![2.5]]).unwrap(),
            from_rows(&[vec![4.0, 0.0]]).unwrap(),
        )
        .unwrap()
    }

    pub fn k1_gains() -> [crate::linalg::DenseMatrix; 3] {
        [
            from_rows(&[vec![-0.5, 0.0]]).unwrap(),
            from_rows(&[vec![-0.3, 0.0]]).unwrap(),
            from_rows(&[vec![-0.2, 0.0]]).unwrap(),
        ]
    }

    pub fn k3_gains() -> [crate::linalg::DenseMatrix; 3] {
        [
            from_rows(&[vec![0.3], vec![0.3]]).unwrap(),
            from_rows(&[vec![0.5], vec![0.1]]).unwrap(),
            from_rows(&[vec![0.1], vec![0.1]]).unwrap(),
        ]
    }
}
