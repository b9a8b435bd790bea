//! What the assumption checker catches, shown on deliberately broken setups.
//!
//! The convergence and positivity guarantees rest on: a nonnegative leader
//! with spectral radius exactly 1, nonnegative follower data, a jointly
//! connected switching graph family with symmetric follower coupling, a
//! coupling gain below 1/Δ and 2/λ̄, solvable regulator equations with
//! nonnegative solutions, and verified gains. Each scenario below breaks
//! exactly one of these.

use positive_consensus::scenario::{self, parse_document};
use positive_consensus::sim;

fn show(label: &str, report: &sim::AssumptionReport) {
    println!("--- {label}");
    println!("    pass: {}", report.pass());
    for v in &report.violations {
        println!("    violation: {v}");
    }
    println!();
}

fn main() {
    let base = scenario::bundled_example();

    let good = scenario::parse_str(base).unwrap();
    show("published example, unmodified", &sim::check_assumptions(&good));

    // leader spectral radius 1.01: trajectories grow, the regulator equations
    // and the tracking guarantee no longer apply
    let mut doc = parse_document(base).unwrap();
    doc.leader.a0[0][0] = 1.01;
    let s = scenario::build(doc, true).unwrap();
    show("leader scaled to spectral radius 1.01", &sim::check_assumptions(&s));

    // negative entry in an input matrix: the follower is no longer a
    // positive system
    let mut doc = parse_document(base).unwrap();
    doc.agents[0].b[0][0] = -1.0;
    let s = scenario::build(doc, true).unwrap();
    show("agent 1 input matrix made negative", &sim::check_assumptions(&s));

    // coupling gain at the boundary 1/Δ = 1/3: the bound is strict
    let mut doc = parse_document(base).unwrap();
    doc.mu = scenario::MuSpec::Value(1.0 / 3.0);
    let s = scenario::build(doc, true).unwrap();
    show("coupling gain at the strict bound", &sim::check_assumptions(&s));

    // zeroed feedback gains: the state loop is not Schur, verification fails
    let mut doc = parse_document(base).unwrap();
    for agent in &mut doc.agents {
        if let Some(k1) = &mut agent.k1 {
            for row in k1.iter_mut() {
                for v in row.iter_mut() {
                    *v = 0.0;
                }
            }
        }
    }
    let s = scenario::build(doc, true).unwrap();
    show("state gains zeroed", &sim::check_assumptions(&s));
}
