//! Multi-round cooling trajectories: ideal pulses vs the calibrated gate
//! efficiencies, with limit-cycle detection.
//!
//! ```bash
//! cargo run -p spincool --example cooling_rounds
//! ```

use spincool::engine::{detect_limit_cycle, run_process};
use spincool::gates::GateModel;
use spincool::sequence::ProcessKind;
use spincool::system::SpinSystem;

fn main() {
    let sys = SpinSystem::tce();
    let delays = ProcessKind::P1.default_delays();

    for (label, model) in [
        ("perfect pulses", GateModel::ideal()),
        ("eta_pe=0.95, eta_comp=0.92", GateModel::new(0.95, 0.92).unwrap()),
    ] {
        let traj = run_process(ProcessKind::P1, &sys, &delays, 10, &model).unwrap();
        println!("Process 1, {label}:");
        println!("  round   eps_C1    IC_C1");
        for rec in traj.round_records() {
            println!("  {:>5}   {:>6.3}   {:>6.2}", rec.round, rec.pols[2], rec.ics[2]);
        }
        match detect_limit_cycle(&traj, 0.03) {
            Some(r) => println!("  limit cycle reached at round {r}\n"),
            None => println!("  no limit cycle within 10 rounds\n"),
        }
    }

    // the longer schedules spread the gain over two or three spins
    for kind in [ProcessKind::P2, ProcessKind::P3] {
        let traj =
            run_process(kind, &sys, &kind.default_delays(), 7, &GateModel::ideal()).unwrap();
        let rec = traj.final_record();
        println!(
            "Process {} final:  H {:.3}  C2 {:.3}  C1 {:.3}  (total IC {:.2})",
            kind.number(),
            rec.pols[0],
            rec.pols[1],
            rec.pols[2],
            rec.ic_total
        );
    }
}
