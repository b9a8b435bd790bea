//! Synthesizing stabilizing gains by linear programming.
//!
//! For a positive system, `A + B·K1` being entrywise nonnegative with row
//! sums below 1 is enough for Schur stability — and those constraints are
//! linear in K1, so feasibility is a small LP. The same trick applied to the
//! transpose pair (Aᵀ, Cᵀ) yields the observer injection K3 with A − K3·C
//! nonnegative and Schur.

use positive_consensus::linalg::DenseMatrix;
use positive_consensus::systems::{
    synthesize_observer_gain, synthesize_state_gain, verify_observer_gain, verify_state_gain,
};

fn print_matrix(name: &str, m: &DenseMatrix) {
    println!("{name} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>9.5}", m[(i, j)])).collect();
        println!("    [{}]", row.join(", "));
    }
}

fn main() {
    // agent 3 of the published example: unstable (spectral radius 1) until
    // feedback is applied
    let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.8]);
    let b = DenseMatrix::from_row_slice(2, 1, &[1.0, 2.5]);
    let c = DenseMatrix::from_row_slice(1, 2, &[4.0, 0.0]);

    let k1 = synthesize_state_gain(&a, &b).expect("positively stabilizable");
    print_matrix("K1", &k1);
    let v = verify_state_gain(&a, &b, &k1).expect("shapes conform");
    println!(
        "A + B*K1: spectral radius {:.6}, min entry {:.3e}, verified {}",
        v.spectral_radius, v.min_entry, v.pass()
    );

    println!();
    let k3 = synthesize_observer_gain(&a, &c).expect("positively detectable");
    print_matrix("K3", &k3);
    let v = verify_observer_gain(&a, &c, &k3).expect("shapes conform");
    println!(
        "A - K3*C: spectral radius {:.6}, min entry {:.3e}, verified {}",
        v.spectral_radius, v.min_entry, v.pass()
    );

    // and a system that no nonnegativity-preserving feedback can stabilize:
    // B = 0 leaves the unstable diagonal untouched
    println!();
    let hopeless_b = DenseMatrix::zeros(2, 1);
    match synthesize_state_gain(&a, &hopeless_b) {
        Ok(_) => unreachable!("cannot stabilize without input authority"),
        Err(e) => println!("infeasible case reported: {e}"),
    }
}
