//! Equilibrium analytics of the bundled TCE system: polarizations, the
//! information-content budget, and the two cooling bounds.
//!
//! ```bash
//! cargo run -p spincool --example entropy_bounds
//! ```

use spincool::system::{DiagonalState, SpinSystem};
use spincool::thermo::{
    self, entropy_bound_max_pol, equilibrium_polarization, ic_report, sort_bound,
    spin_temperature, PhysicalConditions,
};

fn main() {
    // absolute scale: a proton at 14.1 T and room temperature
    let cond = PhysicalConditions::new(2.675e8, 14.1, 298.0).unwrap();
    let eps_h = equilibrium_polarization(&cond);
    println!("proton equilibrium polarization at 14.1 T, 298 K: {eps_h:.3e}");
    let t_cooled = spin_temperature(4.0 * eps_h, &cond).unwrap();
    println!("spin temperature after 4x cooling: {t_cooled:.1} K\n");

    // relative scale: everything below is in carbon-equilibrium units
    let sys = SpinSystem::tce();
    let eq = DiagonalState::equilibrium(&sys);
    let report = ic_report(&eq);
    println!("TCE equilibrium ({} spins, eps_unit {}):", sys.len(), sys.eps_unit());
    for (name, ic) in &report.per_spin {
        let pol = eq.marginal_polarization(name).unwrap();
        println!("  {name:>3}: polarization {pol:.3}, IC {ic:.4}");
    }
    println!("  total IC            : {:.4}", report.total_leading);
    println!("  exact IC            : {:.3e} bits", report.exact_bits);

    let bound = entropy_bound_max_pol(report.total_leading).unwrap();
    println!("\nentropy bound on any single spin : {bound:.4}");
    for name in ["H", "C2", "C1"] {
        let sb = sort_bound(&eq, name).unwrap();
        println!("sort (permutation) bound for {name:>3}: {sb:.4}");
    }

    // secondary mode: invert the exact bit-valued entropy instead of the
    // leading-order budget; at NMR polarizations the two agree
    let exact = thermo::entropy_bound_max_pol_exact(report.exact_bits).unwrap();
    println!(
        "exact-entropy bound              : {:.4} (from {:.3e} bits)",
        exact / sys.eps_unit(),
        report.exact_bits
    );
}
