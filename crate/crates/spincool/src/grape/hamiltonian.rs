//! Rotating-frame spin Hamiltonians for pulse design.
//!
//! `H = sum_j 2 pi offset_j Iz_j + coupling terms + rf_scale * sum_c 2 pi
//! (u_x^c Fx_c + u_y^c Fy_c)` with `Fx_c = sum_{j in c} Ix_j`. Couplings are
//! either weak (`2 pi J Iz Iz`) or isotropic (`2 pi J (IxIx + IyIy + IzIz)`).
//! Offsets and amplitudes are in Hz; operators use the same bit convention
//! as [`crate::system`] (spin 0 on the most significant bit, bit 0 = up).

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SpinSystem;

const TAU: f64 = std::f64::consts::TAU;

/// How scalar couplings enter the drift Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingForm {
    /// Secular ZZ coupling only.
    Weak,
    /// Full XX + YY + ZZ exchange.
    Isotropic,
}

/// One scalar coupling between two named spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JCoupling {
    pub a: String,
    pub b: String,
    pub value_hz: f64,
}

/// Drift-Hamiltonian description plus the RF channel layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    /// Resonance offsets in Hz; spins not listed sit at 0.
    #[serde(default)]
    pub offsets_hz: BTreeMap<String, f64>,
    #[serde(default)]
    pub j_couplings_hz: Vec<JCoupling>,
    pub coupling_form: CouplingForm,
    /// Optional explicit channel layout; when absent, spins are grouped by
    /// their `rf_channel` field. If present it must form a partition that
    /// agrees with the system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<BTreeMap<String, Vec<String>>>,
}

/// Precomputed operators for one (system, spec) pair.
#[derive(Debug, Clone)]
pub struct HamiltonianContext {
    dim: usize,
    drift: Array2<C64>,
    /// Channel name plus its collective (Fx, Fy) operators, sorted by name.
    channels: Vec<(String, Array2<C64>, Array2<C64>)>,
}

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let v = a[[i, j]];
            if v.norm() == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = v * b[[k, l]];
                }
            }
        }
    }
    out
}

fn single(axis: usize) -> Array2<C64> {
    let z = C64::new(0.0, 0.0);
    let h = C64::new(0.5, 0.0);
    let ih = C64::new(0.0, 0.5);
    match axis {
        0 => ndarray::array![[z, h], [h, z]],
        1 => ndarray::array![[z, -ih], [ih, z]],
        _ => ndarray::array![[h, z], [z, -h]],
    }
}

/// `I_axis` embedded for spin `spin` of an n-spin register.
pub fn spin_operator(n: usize, spin: usize, axis: usize) -> Array2<C64> {
    let mut op = Array2::from_diag_elem(1 << spin, C64::new(1.0, 0.0));
    op = kron(&op, &single(axis));
    let rest = n - 1 - spin;
    if rest > 0 {
        op = kron(&op, &Array2::from_diag_elem(1 << rest, C64::new(1.0, 0.0)));
    }
    op
}

impl HamiltonianContext {
    pub fn new(system: &SpinSystem, spec: &HamiltonianSpec) -> Result<Self> {
        let n = system.len();
        let dim = system.dim();

        for name in spec.offsets_hz.keys() {
            system.spin_index(name)?;
        }
        let ix: Vec<_> = (0..n).map(|i| spin_operator(n, i, 0)).collect();
        let iy: Vec<_> = (0..n).map(|i| spin_operator(n, i, 1)).collect();
        let iz: Vec<_> = (0..n).map(|i| spin_operator(n, i, 2)).collect();

        let mut drift: Array2<C64> = Array2::zeros((dim, dim));
        for (i, spin) in system.spins().iter().enumerate() {
            let offset = spec.offsets_hz.get(&spin.name).copied().unwrap_or(0.0);
            if !offset.is_finite() {
                return Err(Error::Config(format!("offset for `{}` must be finite", spin.name)));
            }
            if offset != 0.0 {
                drift = drift + &iz[i] * C64::new(TAU * offset, 0.0);
            }
        }
        let mut seen_pairs = Vec::new();
        for j in &spec.j_couplings_hz {
            let a = system.spin_index(&j.a)?;
            let b = system.spin_index(&j.b)?;
            if a == b {
                return Err(Error::Config(format!("self-coupling on `{}`", j.a)));
            }
            let key = (a.min(b), a.max(b));
            if seen_pairs.contains(&key) {
                return Err(Error::Config(format!(
                    "duplicate coupling between `{}` and `{}`",
                    j.a, j.b
                )));
            }
            seen_pairs.push(key);
            if !j.value_hz.is_finite() {
                return Err(Error::Config("coupling must be finite".into()));
            }
            let k = C64::new(TAU * j.value_hz, 0.0);
            let zz = iz[a].dot(&iz[b]);
            match spec.coupling_form {
                CouplingForm::Weak => {
                    drift = drift + &zz * k;
                }
                CouplingForm::Isotropic => {
                    let xx = ix[a].dot(&ix[b]);
                    let yy = iy[a].dot(&iy[b]);
                    drift = drift + &(xx + yy + zz) * k;
                }
            }
        }

        // channel layout: explicit map or grouped by the spins' rf_channel
        let grouped: BTreeMap<String, Vec<String>> = match &spec.channels {
            Some(map) => {
                let mut assigned: BTreeMap<&str, &str> = BTreeMap::new();
                for (channel, spins) in map {
                    for s in spins {
                        system.spin_index(s)?;
                        if assigned.insert(s, channel).is_some() {
                            return Err(Error::Config(format!(
                                "spin `{s}` appears in more than one channel"
                            )));
                        }
                    }
                }
                for spin in system.spins() {
                    match assigned.get(spin.name.as_str()) {
                        None => {
                            return Err(Error::Config(format!(
                                "spin `{}` is missing from the channel map",
                                spin.name
                            )));
                        }
                        Some(ch) if *ch != spin.rf_channel => {
                            return Err(Error::Config(format!(
                                "spin `{}` is on channel `{}` but mapped to `{ch}`",
                                spin.name, spin.rf_channel
                            )));
                        }
                        _ => {}
                    }
                }
                map.clone()
            }
            None => {
                let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
                for spin in system.spins() {
                    map.entry(spin.rf_channel.clone())
                        .or_default()
                        .push(spin.name.clone());
                }
                map
            }
        };

        let channels = grouped
            .into_iter()
            .map(|(name, spins)| {
                let mut fx: Array2<C64> = Array2::zeros((dim, dim));
                let mut fy: Array2<C64> = Array2::zeros((dim, dim));
                for s in &spins {
                    let i = system.spin_index(s)?;
                    fx += &ix[i];
                    fy += &iy[i];
                }
                Ok((name, fx, fy))
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(HamiltonianContext { dim, drift, channels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|(n, _, _)| n.clone()).collect()
    }

    pub fn drift(&self) -> &Array2<C64> {
        &self.drift
    }

    /// Control operator of channel `c`: quadrature 0 is x, 1 is y.
    pub(crate) fn control_op(&self, c: usize, quadrature: usize) -> &Array2<C64> {
        let (_, fx, fy) = &self.channels[c];
        if quadrature == 0 {
            fx
        } else {
            fy
        }
    }

    /// Hamiltonian of one slice given per-channel `(x, y)` amplitudes in Hz.
    pub fn build(&self, controls: &[[f64; 2]], rf_scale: f64) -> Result<Array2<C64>> {
        if controls.len() != self.channels.len() {
            return Err(Error::Parameter(format!(
                "got controls for {} channels, context has {}",
                controls.len(),
                self.channels.len()
            )));
        }
        let mut h = self.drift.clone();
        for (c, [ux, uy]) in controls.iter().enumerate() {
            let (_, fx, fy) = &self.channels[c];
            if *ux != 0.0 {
                h = h + fx * C64::new(rf_scale * TAU * ux, 0.0);
            }
            if *uy != 0.0 {
                h = h + fy * C64::new(rf_scale * TAU * uy, 0.0);
            }
        }
        Ok(h)
    }
}
