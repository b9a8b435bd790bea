//! How the coupling gain bound μ < min{1/Δ, 2/λ̄} separates three regimes.
//!
//! Δ is the largest in-degree across the graph family and λ̄ the largest
//! coupling eigenvalue. Below both bounds the observer update matrix is
//! nonnegative and Schur: estimates converge and stay nonnegative from any
//! nonnegative start. Between 1/Δ and 2/λ̄ the update still converges but
//! loses nonnegativity — an adversarial initial estimate on the busiest node
//! makes an entry go negative. Beyond 2/λ̄ the error recursion is unstable.
//!
//! The demonstration loads the estimate of the highest in-degree follower
//! while the others start at zero, which exposes the negative diagonal of
//! I − μH as soon as μ > 1/Δ.

use positive_consensus::scenario;
use positive_consensus::sim::{self, Mode};

fn main() {
    let base = scenario::parse_str(scenario::bundled_example()).unwrap();
    let constants = base.schedule.constants().expect("family is admissible");
    println!(
        "graph family: max in-degree {} (1/Δ = {:.4}), coupling eigenvalues up to {:.4} (2/λ̄ = {:.4})",
        constants.delta,
        1.0 / constants.delta,
        constants.lambda_max,
        2.0 / constants.lambda_max
    );
    println!("admissible range: 0 < mu < {:.4}", constants.mu_max);
    println!();

    // agent 2 has three in-neighbors in the first graph; hit it hard
    let adversarial = vec![
        positive_consensus::linalg::Vector::zeros(2),
        positive_consensus::linalg::Vector::from_vec(vec![10.0, 10.0]),
        positive_consensus::linalg::Vector::zeros(2),
    ];

    println!(
        "{:>6} {:>12} {:>12} {:>10} {:>12}",
        "mu", "min entry", "tail error", "converged", "regime"
    );
    for mu in [0.15, 0.30, 0.45, 0.60] {
        let mut s = base.clone();
        s.mode = Mode::ObserverOnly;
        s.horizon = 800;
        s.gains.mu = mu;
        s.w_init = Some(adversarial.clone());
        // nonzero initial estimates and supercritical gains are both outside
        // the guarantees, so silence the checker and observe what happens
        s.override_assumptions = true;

        let trace = sim::run_scenario(&s).unwrap();
        let positivity = sim::positivity_report(&trace);
        let convergence = sim::convergence_report(&trace, 1e-6);
        let regime = if mu < 1.0 / constants.delta {
            "nonnegative + convergent"
        } else if mu < 2.0 / constants.lambda_max {
            "convergent only"
        } else {
            "unstable"
        };
        println!(
            "{:>6.2} {:>12.3e} {:>12.3e} {:>10} {:>12}",
            mu, positivity.min_entry, convergence.tail_error, convergence.converged, regime
        );
        if let Some(v) = positivity.violations.first() {
            println!(
                "       first violation: step {}, agent {}, {}[{}] = {:.4e}",
                v.step, v.agent, v.state, v.component, v.value
            );
        }
    }
}
