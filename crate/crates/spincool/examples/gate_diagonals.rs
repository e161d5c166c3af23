//! The two cooling gates as diagonal rewrites: polarization exchange swaps
//! marginals, compression concentrates them onto the target spin.
//!
//! ```bash
//! cargo run -p spincool --example gate_diagonals
//! ```

use spincool::gates::Gate;
use spincool::system::{DiagonalState, SpinSystem};

fn show(label: &str, state: &DiagonalState) {
    let dev: Vec<String> = state
        .deviation_diagonal()
        .values
        .iter()
        .map(|d| format!("{d:.2}"))
        .collect();
    let pols: Vec<String> = state.all_marginals().iter().map(|p| format!("{p:.3}")).collect();
    println!("{label:<22} dev {{{}}}  pols [{}]", dev.join(", "), pols.join(", "));
}

fn main() {
    // the integer patterns are cleanest with the gamma ratio rounded to 4
    let sys = SpinSystem::tce_gamma4();
    let eq = DiagonalState::equilibrium(&sys);
    show("equilibrium", &eq);

    let pe = Gate::pe(&sys, "H", "C2").unwrap();
    show("after PE(H->C2)", &pe.apply(&eq, 1.0).unwrap());
    show("after PE at eta=0.95", &pe.apply(&eq, 0.95).unwrap());

    println!();
    let flat = DiagonalState::product(&sys, &[1.0, 1.0, 1.0]).unwrap();
    show("uniform polarization", &flat);
    let comp = Gate::comp(&sys, "C1", "C2", "H").unwrap();
    let compressed = comp.apply(&flat, 1.0).unwrap();
    show("after COMP onto C1", &compressed);
    show("COMP twice (involution)", &comp.apply(&compressed, 1.0).unwrap());

    println!();
    let real = SpinSystem::tce();
    let eq = DiagonalState::equilibrium(&real);
    let comp = Gate::comp(&real, "C1", "C2", "H").unwrap();
    let out = comp.apply(&eq, 0.92).unwrap();
    println!(
        "COMP on equilibrium at eta=0.92: C1 = {:.3} (ideal {:.3})",
        out.marginal_polarization("C1").unwrap(),
        comp.apply(&eq, 1.0).unwrap().marginal_polarization("C1").unwrap(),
    );
}
