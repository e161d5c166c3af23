//! T1 thermalization between pulses.
//!
//! Each spin relaxes independently through the two-state master-equation
//! map whose marginal obeys
//! `eps_i(t) = eps_eq_i + (eps_i(0) - eps_eq_i) exp(-t/T1_i)`;
//! the full channel is the tensor product of the per-spin 2x2 maps. Gates
//! are treated as instantaneous (millisecond pulses against second-scale
//! delays), so relaxation only acts during explicit waits.

use crate::error::{Error, Result};
use crate::system::{DiagonalState, SpinSystem};

/// Tensor product of per-spin column-stochastic 2x2 maps for a fixed
/// duration; the fixed point is the equilibrium product state.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationChannel {
    /// `exp(-t/T1_i)` per spin.
    decays: Vec<f64>,
    /// Equilibrium polarization per spin, eps_unit units.
    eq_pols: Vec<f64>,
    eps_unit: f64,
}

impl RelaxationChannel {
    pub fn new(system: &SpinSystem, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::Parameter(format!(
                "relaxation duration must be nonnegative, got {t}"
            )));
        }
        Ok(RelaxationChannel {
            decays: system.spins().iter().map(|s| (-t / s.t1_s).exp()).collect(),
            eq_pols: system.equilibrium_pols(),
            eps_unit: system.eps_unit(),
        })
    }

    /// The 2x2 column-stochastic map of spin `i`, row-major
    /// `[[up<-up, up<-down], [down<-up, down<-down]]`.
    pub fn map_for_spin(&self, i: usize) -> [[f64; 2]; 2] {
        let f = self.decays[i];
        let eps_eq = self.eq_pols[i] * self.eps_unit;
        let pi_up = (1.0 + eps_eq) / 2.0;
        let pi_down = 1.0 - pi_up;
        [
            [f + (1.0 - f) * pi_up, (1.0 - f) * pi_up],
            [(1.0 - f) * pi_down, f + (1.0 - f) * pi_down],
        ]
    }

    pub fn apply(&self, state: &DiagonalState) -> Result<DiagonalState> {
        let n = state.system().len();
        if n != self.decays.len() {
            return Err(Error::Parameter(
                "channel and state belong to different systems".into(),
            ));
        }
        let mut pops = state.populations().to_vec();
        for i in 0..n {
            let m = self.map_for_spin(i);
            let stride = 1usize << (n - 1 - i);
            for x in 0..pops.len() {
                if x & stride == 0 {
                    let up = pops[x];
                    let down = pops[x | stride];
                    pops[x] = m[0][0] * up + m[0][1] * down;
                    pops[x | stride] = m[1][0] * up + m[1][1] * down;
                }
            }
        }
        state.with_populations(pops)
    }
}

/// Evolves `state` toward equilibrium for `t` seconds.
pub fn relax(state: &DiagonalState, t: f64) -> Result<DiagonalState> {
    RelaxationChannel::new(state.system(), t)?.apply(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SpinSystem;

    #[test]
    fn zero_duration_is_identity() {
        let sys = SpinSystem::tce();
        let st = DiagonalState::product(&sys, &[2.0, 0.5, -1.0]).unwrap();
        let out = relax(&st, 0.0).unwrap();
        for (a, b) in out.populations().iter().zip(st.populations()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let sys = SpinSystem::tce();
        let eq = DiagonalState::equilibrium(&sys);
        for t in [0.1, 3.0, 40.0] {
            let out = relax(&eq, t).unwrap();
            for (a, b) in out.populations().iter().zip(eq.populations()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn proton_recovery_closed_form() {
        let sys = SpinSystem::tce();
        let st = DiagonalState::product(&sys, &[1.0, 1.0, 1.0]).unwrap();
        let out = relax(&st, 3.0).unwrap();
        let h = out.marginal_polarization("H").unwrap();
        let expect = 3.98 + (1.0 - 3.98) * (-3.0f64 / 2.67).exp();
        assert!((h - expect).abs() < 1e-9, "{h} vs {expect}");
        assert!((h - 3.01).abs() < 0.01);
    }

    #[test]
    fn marginal_law_holds_for_correlated_states() {
        // start from a compressed (non-product) state
        let sys = SpinSystem::tce();
        let st = DiagonalState::product(&sys, &[1.0, 1.0, 1.0]).unwrap();
        let gate = crate::gates::Gate::comp(&sys, "C1", "C2", "H").unwrap();
        let st = gate.apply(&st, 1.0).unwrap();
        let before = st.all_marginals();
        let t = 4.2;
        let out = relax(&st, t).unwrap();
        for (i, spin) in sys.spins().iter().enumerate() {
            let f = (-t / spin.t1_s).exp();
            let expect = spin.gamma_rel + (before[i] - spin.gamma_rel) * f;
            let got = out.marginal_by_index(i);
            assert!((got - expect).abs() < 1e-10, "{}: {got} vs {expect}", spin.name);
        }
    }

    #[test]
    fn semigroup_property() {
        let sys = SpinSystem::tce();
        let st = DiagonalState::product(&sys, &[-0.5, 4.0, 2.0]).unwrap();
        let a = relax(&relax(&st, 1.3).unwrap(), 2.9).unwrap();
        let b = relax(&st, 4.2).unwrap();
        for (x, y) in a.populations().iter().zip(b.populations()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn long_time_limit_reaches_equilibrium() {
        let sys = SpinSystem::tce();
        let st = DiagonalState::product(&sys, &[-3.0, 0.0, 5.0]).unwrap();
        let t = 50.0 * 29.2;
        let out = relax(&st, t).unwrap();
        let eq = DiagonalState::equilibrium(&sys);
        let tv: f64 = out
            .populations()
            .iter()
            .zip(eq.populations())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-10, "total variation {tv}");
    }

    #[test]
    fn negative_duration_rejected() {
        let sys = SpinSystem::tce();
        let st = DiagonalState::uniform(sys);
        assert!(relax(&st, -1.0).is_err());
    }
}
