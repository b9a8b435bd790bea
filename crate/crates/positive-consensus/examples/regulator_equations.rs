//! Solving the regulator equations that shape the tracking manifold.
//!
//! For each follower, the pair (X_i, U_i) with
//!
//! ```text
//! A_i·X_i + B_i·U_i = X_i·A_0        C_i·X_i = C_0
//! ```
//!
//! describes where follower i's state must sit (x_i = X_i·x0) and the input
//! that keeps it there (u_i = U_i·x0) for the output y_i to equal y_0. The
//! solver vectorizes both equations into one least-squares problem via
//! Kronecker products and reports the substitution residual; the feedforward
//! gain is then K2_i = U_i − K1_i·X_i.

use positive_consensus::linalg::DenseMatrix;
use positive_consensus::regulator::{compute_feedforward_gain, solve_regulator};
use positive_consensus::systems::{AgentModel, LeaderModel};

fn print_matrix(name: &str, m: &DenseMatrix) {
    println!("{name} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>8.4}", m[(i, j)])).collect();
        println!("    [{}]", row.join(", "));
    }
}

fn main() {
    let leader = LeaderModel::new(
        DenseMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
        DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
    )
    .unwrap();

    let agents = [
        (
            AgentModel::new(
                1,
                DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
                DenseMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
                DenseMatrix::from_row_slice(1, 2, &[2.0, 0.0]),
            )
            .unwrap(),
            DenseMatrix::from_row_slice(1, 2, &[-0.5, 0.0]),
        ),
        (
            AgentModel::new(
                2,
                DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.7]),
                DenseMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
                DenseMatrix::from_row_slice(1, 2, &[2.0, 0.0]),
            )
            .unwrap(),
            DenseMatrix::from_row_slice(1, 2, &[-0.3, 0.0]),
        ),
        (
            AgentModel::new(
                3,
                DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.8]),
                DenseMatrix::from_row_slice(2, 1, &[1.0, 2.5]),
                DenseMatrix::from_row_slice(1, 2, &[4.0, 0.0]),
            )
            .unwrap(),
            DenseMatrix::from_row_slice(1, 2, &[-0.2, 0.0]),
        ),
    ];

    for (agent, k1) in &agents {
        println!("=== agent {}", agent.id);
        let sol = solve_regulator(agent, &leader).expect("dimensions conform");
        print_matrix("X", &sol.x);
        print_matrix("U", &sol.u);
        println!(
            "residual {:.3e}, nonnegative: {}, solvable: {}",
            sol.residual,
            sol.nonneg_ok,
            sol.solvable()
        );
        let k2 = compute_feedforward_gain(&sol, k1).expect("solution accepted");
        print_matrix("K2 = U - K1*X", &k2);

        // substitute back: both equations must hold to working precision
        let lhs1 = &agent.a * &sol.x + &agent.b * &sol.u - &sol.x * &leader.a0;
        let lhs2 = &agent.c * &sol.x - &leader.c0;
        println!(
            "substitution check: |AX+BU-XA0| = {:.3e}, |CX-C0| = {:.3e}",
            lhs1.amax(),
            lhs2.amax()
        );
        println!();
    }
}
