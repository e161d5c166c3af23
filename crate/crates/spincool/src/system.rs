//! Spin systems and diagonal states.
//!
//! A [`SpinSystem`] is an ordered list of named spins with relaxation times
//! and gyromagnetic ratios relative to a reference spin (the reference has
//! `gamma_rel = 1`, e.g. carbon). The physical equilibrium polarization of
//! the reference spin is the system's `eps_unit`; every polarization handled
//! by this crate is expressed in multiples of that unit.
//!
//! A [`DiagonalState`] is the exact population vector over the 2^n
//! computational basis states. Populations are honest probabilities; the
//! product-operator "deviation diagonal" used throughout the NMR literature
//! is recovered as a view via [`DiagonalState::deviation_diagonal`].
//!
//! Bit convention: spin `i` (in system order) occupies bit `i` counted from
//! the most significant bit of the basis index, and bit value 0 is the
//! aligned ("up") state. Gates are always constructed from spin *names*, so
//! nothing downstream depends on the ordering choice.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One spin-1/2 nucleus of the molecule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spin {
    pub name: String,
    /// Gyromagnetic ratio relative to the reference spin.
    pub gamma_rel: f64,
    /// Longitudinal relaxation time, seconds.
    pub t1_s: f64,
    /// Effective transverse dephasing time, seconds. Carried as metadata;
    /// the diagonal simulator never uses it.
    pub t2star_s: f64,
    /// RF channel this spin is driven on (groups spins for pulse design).
    pub rf_channel: String,
}

/// Serialized form of a spin system (the on-disk JSON schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub label: String,
    pub eps_unit: f64,
    pub spins: Vec<Spin>,
}

/// An ordered collection of spins with a polarization unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    label: String,
    eps_unit: f64,
    spins: Vec<Spin>,
}

impl SpinSystem {
    /// Validates and wraps a spin list. At most 16 spins so the population
    /// vector stays in memory; `eps_unit` must stay small enough for the
    /// leading-order formulas used by the analytics.
    pub fn new(label: impl Into<String>, eps_unit: f64, spins: Vec<Spin>) -> Result<Arc<Self>> {
        let label = label.into();
        if spins.is_empty() || spins.len() > 16 {
            return Err(Error::Config(format!(
                "system `{label}` must have between 1 and 16 spins, got {}",
                spins.len()
            )));
        }
        if !(eps_unit > 0.0 && eps_unit <= 0.05) {
            return Err(Error::Config(format!(
                "eps_unit must lie in (0, 0.05], got {eps_unit}"
            )));
        }
        for (i, s) in spins.iter().enumerate() {
            if s.name.is_empty() {
                return Err(Error::Config(format!("spin #{i} has an empty name")));
            }
            if spins[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Config(format!("duplicate spin name `{}`", s.name)));
            }
            if s.gamma_rel == 0.0 || !s.gamma_rel.is_finite() {
                return Err(Error::Config(format!(
                    "spin `{}` needs a nonzero finite gamma_rel",
                    s.name
                )));
            }
            if !(s.t1_s > 0.0) || !(s.t2star_s > 0.0) {
                return Err(Error::Config(format!(
                    "spin `{}` needs positive T1 and T2*",
                    s.name
                )));
            }
        }
        Ok(Arc::new(SpinSystem {
            label,
            eps_unit,
            spins,
        }))
    }

    pub fn from_config(cfg: SystemConfig) -> Result<Arc<Self>> {
        Self::new(cfg.label, cfg.eps_unit, cfg.spins)
    }

    pub fn from_json(text: &str) -> Result<Arc<Self>> {
        Self::from_config(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Arc<Self>> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!("cannot read `{}`: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }

    pub fn to_config(&self) -> SystemConfig {
        SystemConfig {
            label: self.label.clone(),
            eps_unit: self.eps_unit,
            spins: self.spins.clone(),
        }
    }

    /// The trichloroethylene three-spin system: proton plus two labelled
    /// carbons, with measured T1/T2* and the precise gamma ratio 3.98.
    pub fn tce() -> Arc<Self> {
        Self::with_tce_gamma(3.98)
    }

    /// TCE with the gamma ratio rounded to 4, the convention used when
    /// quoting integer-valued deviation diagonals.
    pub fn tce_gamma4() -> Arc<Self> {
        Self::with_tce_gamma(4.0)
    }

    fn with_tce_gamma(gamma_h: f64) -> Arc<Self> {
        Self::new(
            "TCE",
            1e-5,
            vec![
                Spin {
                    name: "H".into(),
                    gamma_rel: gamma_h,
                    t1_s: 2.67,
                    t2star_s: 0.20,
                    rf_channel: "1H".into(),
                },
                Spin {
                    name: "C2".into(),
                    gamma_rel: 1.0,
                    t1_s: 17.3,
                    t2star_s: 0.44,
                    rf_channel: "13C".into(),
                },
                Spin {
                    name: "C1".into(),
                    gamma_rel: 1.0,
                    t1_s: 29.2,
                    t2star_s: 0.23,
                    rf_channel: "13C".into(),
                },
            ],
        )
        .expect("built-in TCE system is valid")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eps_unit(&self) -> f64 {
        self.eps_unit
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Dimension of the population vector, 2^n.
    pub fn dim(&self) -> usize {
        1 << self.spins.len()
    }

    pub fn spin_index(&self, name: &str) -> Result<usize> {
        self.spins
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSpin(name.to_string()))
    }

    pub fn spin_names(&self) -> Vec<String> {
        self.spins.iter().map(|s| s.name.clone()).collect()
    }

    /// +1 if spin `spin` is "up" (bit 0) in basis index `index`, else -1.
    #[inline]
    pub fn bit_sign(&self, index: usize, spin: usize) -> f64 {
        let shift = self.spins.len() - 1 - spin;
        if index >> shift & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Equilibrium polarizations in eps_unit units: just the gamma ratios.
    pub fn equilibrium_pols(&self) -> Vec<f64> {
        self.spins.iter().map(|s| s.gamma_rel).collect()
    }
}

/// Deviation diagonal: `d_x = (2^n p_x - 1) / eps_unit`, the traceless part
/// of the state in equilibrium-polarization units (the `{{...}}` notation).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationDiagonal {
    pub values: Vec<f64>,
}

impl DeviationDiagonal {
    pub fn new(values: Vec<f64>) -> Self {
        DeviationDiagonal { values }
    }
}

/// Exact population vector of an n-spin diagonal ensemble state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    system: Arc<SpinSystem>,
    populations: Vec<f64>,
}

const SUM_TOL: f64 = 1e-12;
const NEG_TOL: f64 = -1e-15;

impl DiagonalState {
    /// Wraps a raw population vector, clamping negatives within `-1e-15`
    /// to zero and rejecting anything worse.
    pub fn new(system: Arc<SpinSystem>, mut populations: Vec<f64>) -> Result<Self> {
        if populations.len() != system.dim() {
            return Err(Error::Parameter(format!(
                "population vector has length {}, system needs {}",
                populations.len(),
                system.dim()
            )));
        }
        for p in populations.iter_mut() {
            if *p < 0.0 {
                if *p < NEG_TOL {
                    return Err(Error::Parameter(format!("negative population {p}")));
                }
                *p = 0.0;
            }
        }
        let sum: f64 = populations.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Parameter(format!(
                "populations sum to {sum}, expected 1"
            )));
        }
        Ok(DiagonalState {
            system,
            populations,
        })
    }

    /// The maximally mixed state.
    pub fn uniform(system: Arc<SpinSystem>) -> Self {
        let dim = system.dim();
        DiagonalState {
            system,
            populations: vec![1.0 / dim as f64; dim],
        }
    }

    /// Product state with the given per-spin polarizations (eps_unit units):
    /// `p_x = 2^-n prod_i (1 + s_i(x) pol_i eps_unit)`.
    pub fn product(system: &Arc<SpinSystem>, pols: &[f64]) -> Result<Self> {
        let n = system.len();
        if pols.len() != n {
            return Err(Error::Parameter(format!(
                "got {} polarizations for {} spins",
                pols.len(),
                n
            )));
        }
        let eps = system.eps_unit();
        for (i, &pol) in pols.iter().enumerate() {
            if !(pol.abs() * eps < 1.0) {
                return Err(Error::Domain(format!(
                    "polarization {pol} for spin `{}` has |pol|*eps_unit >= 1",
                    system.spins()[i].name
                )));
            }
        }
        let dim = system.dim();
        let mut populations = Vec::with_capacity(dim);
        for x in 0..dim {
            let mut p = 1.0 / dim as f64;
            for (i, &pol) in pols.iter().enumerate() {
                p *= 1.0 + system.bit_sign(x, i) * pol * eps;
            }
            populations.push(p);
        }
        Ok(DiagonalState {
            system: Arc::clone(system),
            populations,
        })
    }

    /// Thermal-equilibrium product state (polarizations = gamma ratios).
    pub fn equilibrium(system: &Arc<SpinSystem>) -> Self {
        let pols = system.equilibrium_pols();
        Self::product(system, &pols).expect("equilibrium polarizations are in range")
    }

    /// Inverse of [`deviation_diagonal`](Self::deviation_diagonal):
    /// `p_x = (1 + eps_unit d_x) / 2^n`.
    pub fn from_deviation(system: &Arc<SpinSystem>, dev: &DeviationDiagonal) -> Result<Self> {
        let dim = system.dim();
        if dev.values.len() != dim {
            return Err(Error::Parameter(format!(
                "deviation vector has length {}, system needs {dim}",
                dev.values.len()
            )));
        }
        let eps = system.eps_unit();
        let populations = dev
            .values
            .iter()
            .map(|&d| (1.0 + eps * d) / dim as f64)
            .collect();
        Self::new(Arc::clone(system), populations)
    }

    pub fn system(&self) -> &Arc<SpinSystem> {
        &self.system
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// `(P_up - P_down) / eps_unit` for the named spin.
    pub fn marginal_polarization(&self, spin: &str) -> Result<f64> {
        Ok(self.marginal_by_index(self.system.spin_index(spin)?))
    }

    pub fn marginal_by_index(&self, spin: usize) -> f64 {
        let mut diff = 0.0;
        for (x, &p) in self.populations.iter().enumerate() {
            diff += self.system.bit_sign(x, spin) * p;
        }
        diff / self.system.eps_unit()
    }

    /// All marginal polarizations in system order.
    pub fn all_marginals(&self) -> Vec<f64> {
        (0..self.system.len())
            .map(|i| self.marginal_by_index(i))
            .collect()
    }

    /// Traceless diagonal in eps_unit units.
    pub fn deviation_diagonal(&self) -> DeviationDiagonal {
        let dim = self.populations.len() as f64;
        let eps = self.system.eps_unit();
        DeviationDiagonal::new(
            self.populations
                .iter()
                .map(|&p| (dim * p - 1.0) / eps)
                .collect(),
        )
    }

    /// Shannon entropy of the full 2^n distribution, in bits.
    pub fn shannon_entropy_bits(&self) -> f64 {
        let mut h = 0.0;
        for &p in &self.populations {
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        h
    }

    pub(crate) fn with_populations(&self, populations: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.system), populations)
    }
}
