//! Reversible gates on diagonal states.
//!
//! Every gate is an explicit permutation of the 2^n basis indices, so
//! composition, inversion and multiset-preservation checks are trivial.
//! Two named constructors cover the cooling repertoire:
//!
//! * [`Gate::pe`] — polarization exchange, the bit swap of two spins; it
//!   exchanges their marginal polarizations exactly.
//! * [`Gate::comp`] — 3-bit compression, the single transposition of the
//!   basis states with (target, a, b) bits (0,1,1) and (1,0,0); at leading
//!   order it lifts the target to `(eps_t + eps_a + eps_b)/2`.
//!
//! Imperfect execution is modeled by [`Gate::apply`] with an efficiency
//! `eta`: the permuted populations are mixed with the populations obtained
//! by replacing the involved spins' subsystem with the uniform distribution.
//! Marginals (and correlations) touching the involved spins scale by `eta`;
//! spins the gate does not act on are left untouched.

use crate::error::{Error, Result};
use crate::system::{DiagonalState, SpinSystem};

/// A basis permutation with a label and the set of spins it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    permutation: Vec<usize>,
    label: String,
    involved: Vec<usize>,
}

/// Calibrated efficiencies for the two gate roles used by cooling sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateModel {
    pub eta_pe: f64,
    pub eta_comp: f64,
}

impl GateModel {
    pub fn new(eta_pe: f64, eta_comp: f64) -> Result<Self> {
        check_eta(eta_pe)?;
        check_eta(eta_comp)?;
        Ok(GateModel { eta_pe, eta_comp })
    }

    /// Perfect pulses.
    pub fn ideal() -> Self {
        GateModel {
            eta_pe: 1.0,
            eta_comp: 1.0,
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Parameter(format!(
            "efficiency must lie in (0, 1], got {eta}"
        )));
    }
    Ok(())
}

impl Gate {
    /// Builds a gate from a raw index permutation.
    pub fn from_permutation(
        system: &SpinSystem,
        permutation: Vec<usize>,
        label: impl Into<String>,
        involved_spins: &[&str],
    ) -> Result<Self> {
        let dim = system.dim();
        if permutation.len() != dim {
            return Err(Error::Parameter(format!(
                "permutation has length {}, system needs {dim}",
                permutation.len()
            )));
        }
        let mut seen = vec![false; dim];
        for &p in &permutation {
            if p >= dim || seen[p] {
                return Err(Error::Parameter("not a bijection".into()));
            }
            seen[p] = true;
        }
        let involved = involved_spins
            .iter()
            .map(|name| system.spin_index(name))
            .collect::<Result<Vec<_>>>()?;
        Ok(Gate {
            permutation,
            label: label.into(),
            involved,
        })
    }

    /// Polarization exchange: swaps the bits of `a` and `b` in every basis
    /// index, exchanging their marginal polarizations exactly.
    pub fn pe(system: &SpinSystem, a: &str, b: &str) -> Result<Self> {
        let ia = system.spin_index(a)?;
        let ib = system.spin_index(b)?;
        if ia == ib {
            return Err(Error::Parameter(format!(
                "polarization exchange needs two distinct spins, got `{a}` twice"
            )));
        }
        let n = system.len();
        let (sa, sb) = (n - 1 - ia, n - 1 - ib);
        let permutation = (0..system.dim())
            .map(|x| {
                let (ba, bb) = (x >> sa & 1, x >> sb & 1);
                if ba == bb {
                    x
                } else {
                    x ^ (1 << sa) ^ (1 << sb)
                }
            })
            .collect();
        Ok(Gate {
            permutation,
            label: format!("PE({a}->{b})"),
            involved: vec![ia, ib],
        })
    }

    /// 3-bit compression onto `target`: transposes the two basis states
    /// whose (target, a, b) bits are (0,1,1) and (1,0,0), leaving everything
    /// else fixed.
    pub fn comp(system: &SpinSystem, target: &str, a: &str, b: &str) -> Result<Self> {
        let it = system.spin_index(target)?;
        let ia = system.spin_index(a)?;
        let ib = system.spin_index(b)?;
        if it == ia || it == ib || ia == ib {
            return Err(Error::Parameter(
                "compression needs three distinct spins".into(),
            ));
        }
        let n = system.len();
        let bit = |spin: usize| 1usize << (n - 1 - spin);
        // bit value 1 encodes the "down" state
        let i = bit(ia) + bit(ib); // target 0, a 1, b 1
        let j = bit(it); // target 1, a 0, b 0
        let mut permutation: Vec<usize> = (0..system.dim()).collect();
        permutation.swap(i, j);
        Ok(Gate {
            permutation,
            label: format!("COMP({target};{a},{b})"),
            involved: vec![it, ia, ib],
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Indices (system order) of the spins the gate acts on.
    pub fn involved_spins(&self) -> &[usize] {
        &self.involved
    }

    /// `self` after `other` (the composite applies `other` first).
    pub fn compose(&self, other: &Gate) -> Gate {
        let permutation = (0..self.permutation.len())
            .map(|x| self.permutation[other.permutation[x]])
            .collect();
        let mut involved: Vec<usize> = self
            .involved
            .iter()
            .chain(&other.involved)
            .copied()
            .collect();
        involved.sort_unstable();
        involved.dedup();
        Gate {
            permutation,
            label: format!("{}*{}", self.label, other.label),
            involved,
        }
    }

    pub fn inverse(&self) -> Gate {
        let mut permutation = vec![0usize; self.permutation.len()];
        for (x, &y) in self.permutation.iter().enumerate() {
            permutation[y] = x;
        }
        Gate {
            permutation,
            label: format!("{}^-1", self.label),
            involved: self.involved.clone(),
        }
    }

    /// Applies the gate with efficiency `eta` in (0, 1].
    ///
    /// With `eta = 1` the populations are permuted exactly. Otherwise the
    /// output is `eta * permuted + (1 - eta) * depolarized`, where the
    /// depolarized term replaces the involved spins' joint distribution by
    /// the uniform one (conditioned on the untouched spins).
    pub fn apply(&self, state: &DiagonalState, eta: f64) -> Result<DiagonalState> {
        check_eta(eta)?;
        if self.permutation.len() != state.populations().len() {
            return Err(Error::Parameter(
                "gate and state belong to different systems".into(),
            ));
        }
        let pops = state.populations();
        let mut permuted = vec![0.0; pops.len()];
        for (x, &p) in pops.iter().enumerate() {
            permuted[self.permutation[x]] = p;
        }
        if eta == 1.0 {
            return state.with_populations(permuted);
        }

        let n = state.system().len();
        let mut mask_involved = 0usize;
        for &s in &self.involved {
            mask_involved |= 1 << (n - 1 - s);
        }
        let mask_rest = (state.populations().len() - 1) & !mask_involved;
        let cell = (1usize << self.involved.len()) as f64;

        // average over the involved bits within each block of fixed rest-bits
        let mut block_sum = vec![0.0; permuted.len()];
        for (x, &p) in permuted.iter().enumerate() {
            block_sum[x & mask_rest] += p;
        }
        let out = permuted
            .iter()
            .enumerate()
            .map(|(x, &p)| eta * p + (1.0 - eta) * block_sum[x & mask_rest] / cell)
            .collect();
        state.with_populations(out)
    }
}
