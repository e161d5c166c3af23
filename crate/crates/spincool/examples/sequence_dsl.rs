//! Parse a sequence file, execute it, and show how parse errors carry
//! their position.
//!
//! ```bash
//! cargo run -p spincool --example sequence_dsl
//! ```

use std::path::PathBuf;

use spincool::engine::run;
use spincool::gates::GateModel;
use spincool::sequence::parse_sequence;
use spincool::system::{DiagonalState, SpinSystem};

fn main() {
    let sys = SpinSystem::tce();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/process1.seq");
    let text = std::fs::read_to_string(&path).expect("read data/process1.seq");
    println!("--- {} ---\n{text}", path.display());

    let seq = parse_sequence(&text, &sys).unwrap();
    let model = GateModel::new(0.95, 0.92).unwrap();
    let traj = run(&seq, &model, &DiagonalState::equilibrium(&sys)).unwrap();
    println!("--- trajectory ---");
    print!("{}", traj.to_csv());

    println!("\n--- a broken file ---");
    for text in ["wait -2;", "repeat 0 { wait 1; }", "pe H Xe;"] {
        match parse_sequence(text, &sys) {
            Err(err) => println!("{text:<22} -> {err}"),
            Ok(_) => println!("{text:<22} -> unexpectedly parsed"),
        }
    }
}
