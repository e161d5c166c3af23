//! Thermodynamic and information-theoretic analytics.
//!
//! Polarizations map to information content (IC) through the binary entropy:
//! a spin with polarization eps carries `IC = 1 - H2((1+eps)/2)` bits, which
//! expands to `eps^2/ln4` at small eps. Leading-order IC values are reported
//! in units of `eps_unit^2/ln4` so that a spin at polarization `p` (eps_unit
//! units) contributes exactly `p^2`; with the reference spin at equilibrium
//! this is the conventional carbon-squared unit and the numbers compare
//! directly with published tables.
//!
//! Two cooling limits are provided:
//! * the entropy bound (maximal single-spin polarization consistent with the
//!   total IC under lossless manipulations), and
//! * the sort bound (maximal single-spin polarization reachable by basis
//!   permutations of the *current* state, realized by a descending sort).

use crate::error::{Error, Result};
use crate::system::DiagonalState;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_BOLTZMANN: f64 = 1.380_649e-23;

/// Static field, temperature and absolute gyromagnetic ratio of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConditions {
    /// Gyromagnetic ratio, rad s^-1 T^-1.
    pub gamma_abs: f64,
    /// Field intensity, tesla.
    pub b_field_t: f64,
    /// Bath temperature, kelvin.
    pub temperature_k: f64,
}

impl PhysicalConditions {
    pub fn new(gamma_abs: f64, b_field_t: f64, temperature_k: f64) -> Result<Self> {
        if !(gamma_abs >= 0.0) || !(b_field_t > 0.0) || !(temperature_k > 0.0) {
            return Err(Error::Parameter(
                "physical conditions must be positive".into(),
            ));
        }
        Ok(PhysicalConditions {
            gamma_abs,
            b_field_t,
            temperature_k,
        })
    }

    /// `Delta E / (2 k_B T)`, the tanh argument.
    fn boltzmann_argument(&self) -> f64 {
        HBAR * self.gamma_abs * self.b_field_t / (2.0 * K_BOLTZMANN * self.temperature_k)
    }
}

/// Thermal-equilibrium polarization `tanh(hbar gamma B / 2 k_B T)`.
pub fn equilibrium_polarization(cond: &PhysicalConditions) -> f64 {
    cond.boltzmann_argument().tanh()
}

/// Spin temperature of a (positive) polarization under the linearized
/// Boltzmann relation: `T_spin = hbar gamma B / (2 k_B eps)`.
pub fn spin_temperature(eps: f64, cond: &PhysicalConditions) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!(
            "spin temperature needs eps > 0, got {eps}"
        )));
    }
    Ok(HBAR * cond.gamma_abs * cond.b_field_t / (2.0 * K_BOLTZMANN * eps))
}

/// Binary entropy in bits of a probability `p`.
pub fn binary_entropy_bits(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    let q = 1.0 - p;
    if q > 0.0 {
        h -= q * q.log2();
    }
    h
}

/// Information content of a single spin at absolute polarization `eps`:
/// `(exact bits, leading order eps^2/ln4)`.
pub fn ic_single(eps: f64) -> Result<(f64, f64)> {
    if eps.abs() > 1.0 {
        return Err(Error::Domain(format!("|eps| must be <= 1, got {eps}")));
    }
    let exact = 1.0 - binary_entropy_bits((1.0 + eps) / 2.0);
    let leading = eps * eps / 4f64.ln();
    Ok((exact, leading))
}

/// Per-spin and total information content of a diagonal state.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IcReport {
    /// `(spin name, marginal^2)` in system order; units eps_unit^2/ln4.
    pub per_spin: Vec<(String, f64)>,
    /// Sum of the per-spin leading-order entries.
    pub total_leading: f64,
    /// `n - H(p)` of the full 2^n distribution, in bits.
    pub exact_bits: f64,
}

/// Leading-order per-spin IC plus the exact whole-distribution IC.
pub fn ic_report(state: &DiagonalState) -> IcReport {
    let system = state.system();
    let per_spin: Vec<(String, f64)> = system
        .spins()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pol = state.marginal_by_index(i);
            (s.name.clone(), pol * pol)
        })
        .collect();
    let total_leading = per_spin.iter().map(|(_, ic)| ic).sum();
    let exact_bits = system.len() as f64 - state.shannon_entropy_bits();
    IcReport {
        per_spin,
        total_leading,
        exact_bits,
    }
}

/// Entropy-bound ("Shannon bound") maximal polarization at leading order:
/// a single spin holding the entire IC budget has `eps_max = sqrt(IC)` in
/// eps_unit units.
pub fn entropy_bound_max_pol(total_ic: f64) -> Result<f64> {
    if total_ic < 0.0 {
        return Err(Error::Domain(format!(
            "information content must be nonnegative, got {total_ic}"
        )));
    }
    Ok(total_ic.sqrt())
}

/// Exact counterpart of [`entropy_bound_max_pol`] for IC given in bits:
/// numerically inverts `1 - H2((1+eps)/2) = ic_bits`. Saturates at 1 when
/// the budget exceeds one full bit.
pub fn entropy_bound_max_pol_exact(ic_bits: f64) -> Result<f64> {
    if ic_bits < 0.0 {
        return Err(Error::Domain(format!(
            "information content must be nonnegative, got {ic_bits}"
        )));
    }
    if ic_bits >= 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let ic = 1.0 - binary_entropy_bits((1.0 + mid) / 2.0);
        if ic < ic_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximum marginal polarization of `target` over all basis permutations of
/// the state: sort the populations descending and assign the top half to the
/// target-up states.
pub fn sort_bound(state: &DiagonalState, target: &str) -> Result<f64> {
    state.system().spin_index(target)?;
    let mut pops = state.populations().to_vec();
    pops.sort_by(|a, b| b.partial_cmp(a).expect("populations are finite"));
    let half = pops.len() / 2;
    let top: f64 = pops[..half].iter().sum();
    let rest: f64 = pops[half..].iter().sum();
    Ok((top - rest) / state.system().eps_unit())
}
