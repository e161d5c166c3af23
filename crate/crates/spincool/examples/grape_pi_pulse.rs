//! Smallest possible pulse-design problem: invert a single spin in 1 ms.
//! The analytic optimum is a constant 500 Hz drive; the optimizer finds an
//! equivalent pulse from a random start.
//!
//! ```bash
//! cargo run --release -p spincool --example grape_pi_pulse
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use spincool::grape::{
    fidelity, optimize, ControlPulse, CouplingForm, GrapeProblem, HamiltonianSpec,
    OptimizeConfig, PulseInit,
};
use spincool::system::{DiagonalState, Spin, SpinSystem};

fn main() {
    let sys = SpinSystem::new(
        "single",
        1e-5,
        vec![Spin {
            name: "A".into(),
            gamma_rel: 1.0,
            t1_s: 1.0,
            t2star_s: 1.0,
            rf_channel: "rf".into(),
        }],
    )
    .unwrap();
    let spec = HamiltonianSpec {
        offsets_hz: BTreeMap::new(),
        j_couplings_hz: vec![],
        coupling_form: CouplingForm::Weak,
        channels: None,
    };
    let problem = GrapeProblem::new(
        Arc::clone(&sys),
        spec,
        DiagonalState::product(&sys, &[1.0]).unwrap(),
        DiagonalState::product(&sys, &[-1.0]).unwrap(),
        1e-3,
        50,
        vec![(1.0, 1.0)],
        2000.0,
    )
    .unwrap();

    // the closed-form solution: 2 pi * 500 Hz * 1 ms = pi
    let analytic = ControlPulse::constant(&problem, &[[500.0, 0.0]]).unwrap();
    println!("analytic pi pulse fidelity: {:.9}", fidelity(&problem, &analytic).unwrap());

    let outcome = optimize(
        &problem,
        PulseInit::Random { seed: 1 },
        &OptimizeConfig { max_iters: 500, ..OptimizeConfig::default() },
    )
    .unwrap();
    println!(
        "optimized from random seed: fidelity {:.9} after {} iterations",
        outcome.fidelity, outcome.iterations
    );
    let trace = &outcome.pulse.fidelity_trace;
    println!(
        "fidelity trace: {:.4} -> {:.4} -> ... -> {:.6}",
        trace[0],
        trace[trace.len().min(2) - 1],
        trace[trace.len() - 1]
    );
    println!("peak amplitude: {:.1} Hz (cap 2000 Hz)", outcome.pulse.max_magnitude());
}
