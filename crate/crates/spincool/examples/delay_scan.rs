//! Exhaustive grid search over the recovery delays of the first cooling
//! process, maximizing the final carbon information content.
//!
//! ```bash
//! cargo run --release -p spincool --example delay_scan
//! ```

use std::collections::BTreeMap;

use spincool::engine::{scan_delays, DelayAxis};
use spincool::gates::GateModel;
use spincool::sequence::ProcessKind;
use spincool::system::SpinSystem;

fn main() {
    let sys = SpinSystem::tce();
    let grid: BTreeMap<String, DelayAxis> = [
        ("D2".to_string(), DelayAxis { min: 1.0, max: 10.0, step: 1.0 }),
        ("D3".to_string(), DelayAxis { min: 1.0, max: 10.0, step: 1.0 }),
    ]
    .into_iter()
    .collect();

    let outcome = scan_delays(
        ProcessKind::P1,
        &sys,
        &grid,
        &["C1".to_string()],
        7,
        &GateModel::ideal(),
    )
    .unwrap();

    println!(
        "best delays after {} grid points: D2 = {} s, D3 = {} s  (IC_C1 = {:.3})\n",
        outcome.surface.len(),
        outcome.best.delays["D2"],
        outcome.best.delays["D3"],
        outcome.best.objective
    );

    println!("IC_C1 surface (rows D2 = 1..10, cols D3 = 1..10):");
    for d2 in 1..=10 {
        let row: Vec<String> = (1..=10)
            .map(|d3| {
                let point = outcome
                    .surface
                    .iter()
                    .find(|p| p.delays["D2"] == d2 as f64 && p.delays["D3"] == d3 as f64)
                    .unwrap();
                format!("{:5.2}", point.objective)
            })
            .collect();
        println!("  {}", row.join(" "));
    }
}
