//! Robust polarization-exchange pulse for the TCE system: a 6.5 ms
//! state-to-state transfer optimized jointly over RF-power scales
//! {0.85, 1.0, 1.15}, i.e. tolerant to +-15% miscalibration.
//!
//! This runs a shortened ascent (300 iterations, ~30 s in release mode).
//! The bundled `data/grape_pe.json` job runs 900 iterations and reaches a
//! mean fidelity above 0.98:
//!
//! ```bash
//! cargo run --release -p spincool --example grape_pe_pulse
//! cargo run --release -p spincool -- grape --config data/grape_pe.json --out pe_pulse.json
//! ```

use std::path::PathBuf;

use spincool::grape::{optimize, GrapeConfig, OptimizeConfig, PulseInit, PulseOutput};

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/grape_pe.json");
    let config = GrapeConfig::load(&path).expect("load data/grape_pe.json");
    let problem = config.to_problem().unwrap();
    println!(
        "transfer problem: {} slices over {} ms, channels {:?}, {} RF scales",
        problem.slices,
        problem.duration_s * 1e3,
        problem.context().channel_names(),
        problem.rf_scales.len()
    );

    let cfg = OptimizeConfig { max_iters: 300, tol: 1e-8, ..OptimizeConfig::default() };
    let outcome = optimize(&problem, PulseInit::Random { seed: config.seed }, &cfg).unwrap();

    println!("mean fidelity {:.5} after {} iterations", outcome.fidelity, outcome.iterations);
    for (&(scale, _), f) in problem.rf_scales.iter().zip(&outcome.per_scale) {
        println!("  RF scale {scale:.2}: fidelity {f:.5}");
    }

    let output = PulseOutput::new(&problem, &outcome, config.seed);
    let csv = output.to_csv();
    println!("\nslice table head:");
    for line in csv.lines().take(7) {
        println!("  {line}");
    }
    println!("  ... ({} rows)", csv.lines().count() - 1);
}
