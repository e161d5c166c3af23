//! Optimal-control pulse synthesis (GRAPE).
//!
//! A [`GrapeProblem`] pairs a drift Hamiltonian with an initial and a target
//! diagonal state; [`optimize`] runs gradient ascent on piecewise-constant
//! RF amplitudes to maximize the state-to-state deviation-transfer fidelity,
//! averaged over an ensemble of RF-power scales so the resulting pulse
//! tolerates miscalibration (e.g. scales {0.85, 1.0, 1.15} for +-15%).
//! Gradients are exact per slice (block-triangular augmented exponential),
//! which makes them checkable against finite differences at tight tolerance.

mod expm;
mod hamiltonian;
mod optimize;

pub use expm::{matrix_exp, matrix_exp_frechet};
pub use hamiltonian::{CouplingForm, HamiltonianContext, HamiltonianSpec, JCoupling, spin_operator};
pub use optimize::{fidelity, gradient, optimize, per_scale_fidelities, propagate};

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{DiagonalState, SpinSystem, SystemConfig};
use crate::util::fmt_sig;

/// A state-to-state transfer problem over an RF-scale ensemble.
#[derive(Debug, Clone)]
pub struct GrapeProblem {
    system: Arc<SpinSystem>,
    spec: HamiltonianSpec,
    ctx: HamiltonianContext,
    pub initial: DiagonalState,
    pub target: DiagonalState,
    pub duration_s: f64,
    pub slices: usize,
    /// `(scale, weight)` pairs; weights are normalized to sum to 1.
    pub rf_scales: Vec<(f64, f64)>,
    pub max_amplitude_hz: f64,
}

impl GrapeProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: Arc<SpinSystem>,
        spec: HamiltonianSpec,
        initial: DiagonalState,
        target: DiagonalState,
        duration_s: f64,
        slices: usize,
        rf_scales: Vec<(f64, f64)>,
        max_amplitude_hz: f64,
    ) -> Result<Self> {
        if initial.system() != &system || target.system() != &system {
            return Err(Error::Parameter(
                "initial and target states must belong to the problem's system".into(),
            ));
        }
        if !(duration_s > 0.0) {
            return Err(Error::Parameter(format!(
                "duration must be positive, got {duration_s}"
            )));
        }
        if slices == 0 {
            return Err(Error::Parameter("at least one slice is required".into()));
        }
        if rf_scales.is_empty() {
            return Err(Error::Parameter("rf_scales must not be empty".into()));
        }
        let weight_sum: f64 = rf_scales.iter().map(|(_, w)| w).sum();
        if !(weight_sum > 0.0) || rf_scales.iter().any(|&(s, w)| !(s > 0.0) || !(w >= 0.0)) {
            return Err(Error::Parameter(
                "rf scales must be positive with nonnegative weights".into(),
            ));
        }
        let rf_scales = rf_scales
            .into_iter()
            .map(|(s, w)| (s, w / weight_sum))
            .collect();
        if !(max_amplitude_hz > 0.0) {
            return Err(Error::Parameter("max amplitude must be positive".into()));
        }
        let ctx = HamiltonianContext::new(&system, &spec)?;
        Ok(GrapeProblem {
            system,
            spec,
            ctx,
            initial,
            target,
            duration_s,
            slices,
            rf_scales,
            max_amplitude_hz,
        })
    }

    pub fn system(&self) -> &Arc<SpinSystem> {
        &self.system
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn context(&self) -> &HamiltonianContext {
        &self.ctx
    }

    pub fn n_channels(&self) -> usize {
        self.ctx.n_channels()
    }

    pub fn slice_dt(&self) -> f64 {
        self.duration_s / self.slices as f64
    }

    /// Deviation part of a state as a diagonal complex matrix.
    pub(crate) fn deviation_matrix(state: &DiagonalState) -> Array2<C64> {
        let d = state.deviation_diagonal().values;
        let mut m = Array2::zeros((d.len(), d.len()));
        for (i, v) in d.iter().enumerate() {
            m[[i, i]] = C64::new(*v, 0.0);
        }
        m
    }
}

/// Piecewise-constant RF amplitudes: `amplitudes[slice][channel] = [x, y]`
/// in Hz, channels ordered as in the problem's context (sorted names).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    pub amplitudes: Vec<Vec<[f64; 2]>>,
    pub duration_s: f64,
    /// Robust fidelity after each accepted ascent iteration.
    pub fidelity_trace: Vec<f64>,
}

impl ControlPulse {
    pub fn zeros(problem: &GrapeProblem) -> Self {
        ControlPulse {
            amplitudes: vec![vec![[0.0, 0.0]; problem.n_channels()]; problem.slices],
            duration_s: problem.duration_s,
            fidelity_trace: Vec::new(),
        }
    }

    /// Constant amplitudes on every slice.
    pub fn constant(problem: &GrapeProblem, per_channel: &[[f64; 2]]) -> Result<Self> {
        if per_channel.len() != problem.n_channels() {
            return Err(Error::Parameter(format!(
                "expected amplitudes for {} channels",
                problem.n_channels()
            )));
        }
        Ok(ControlPulse {
            amplitudes: vec![per_channel.to_vec(); problem.slices],
            duration_s: problem.duration_s,
            fidelity_trace: Vec::new(),
        })
    }

    /// Uniform random amplitudes within 5% of the cap; deterministic in
    /// the seed.
    pub fn random(problem: &GrapeProblem, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = 0.05 * problem.max_amplitude_hz;
        let amplitudes = (0..problem.slices)
            .map(|_| {
                (0..problem.n_channels())
                    .map(|_| [rng.random_range(-amp..amp), rng.random_range(-amp..amp)])
                    .collect()
            })
            .collect();
        ControlPulse {
            amplitudes,
            duration_s: problem.duration_s,
            fidelity_trace: Vec::new(),
        }
    }

    pub(crate) fn check_shape(&self, problem: &GrapeProblem) -> Result<()> {
        if self.amplitudes.len() != problem.slices
            || self
                .amplitudes
                .iter()
                .any(|s| s.len() != problem.n_channels())
        {
            return Err(Error::Parameter(format!(
                "pulse shape {}x{} does not match problem {}x{}",
                self.amplitudes.len(),
                self.amplitudes.first().map_or(0, Vec::len),
                problem.slices,
                problem.n_channels()
            )));
        }
        if (self.duration_s - problem.duration_s).abs() > 1e-12 {
            return Err(Error::Parameter(
                "pulse duration does not match problem".into(),
            ));
        }
        Ok(())
    }

    /// Rescales any `(x, y)` pair whose magnitude exceeds `max_amplitude`.
    pub fn clip(&mut self, max_amplitude_hz: f64) {
        for slice in &mut self.amplitudes {
            for xy in slice {
                let mag = (xy[0] * xy[0] + xy[1] * xy[1]).sqrt();
                if mag > max_amplitude_hz {
                    let k = max_amplitude_hz / mag;
                    xy[0] *= k;
                    xy[1] *= k;
                }
            }
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.amplitudes
            .iter()
            .flatten()
            .map(|xy| (xy[0] * xy[0] + xy[1] * xy[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Ascent-loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub max_iters: usize,
    /// Stop once an accepted step improves fidelity by less than this.
    pub tol: f64,
    /// Initial step, as a fraction of `max_amplitude_hz`.
    pub init_step: f64,
    /// Give up (stagnation) when backtracking pushes the step below this.
    pub min_step: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            max_iters: 500,
            tol: 1e-9,
            init_step: 0.1,
            min_step: 1e-9,
        }
    }
}

/// Starting point for the ascent.
#[derive(Debug, Clone)]
pub enum PulseInit {
    Zeros,
    Random { seed: u64 },
    Pulse(ControlPulse),
}

/// Result of [`optimize`].
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub pulse: ControlPulse,
    /// Ensemble-weighted fidelity of the returned pulse.
    pub fidelity: f64,
    /// Fidelity at each `rf_scales` entry.
    pub per_scale: Vec<f64>,
    pub iterations: usize,
    /// True when no improving step existed at the minimum step size.
    pub stagnated: bool,
}

// ---------------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------------

/// Initial/target description: per-spin polarizations in eps_unit units.
/// Non-product states (e.g. a compressed target) can be given as explicit
/// deviation diagonals instead, which take precedence over the pol maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    #[serde(default)]
    pub initial_pols: BTreeMap<String, f64>,
    #[serde(default)]
    pub target_pols: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_deviation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_deviation: Option<Vec<f64>>,
}

/// Optimizer settings as stored in a grape config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_init_step")]
    pub init_step: f64,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
    /// When set, the CLI treats a stagnated run below this fidelity as a
    /// numerical failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_fidelity: Option<f64>,
}

fn default_max_iters() -> usize {
    500
}
fn default_tol() -> f64 {
    1e-9
}
fn default_init_step() -> f64 {
    0.1
}
fn default_min_step() -> f64 {
    1e-9
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: default_max_iters(),
            tol: default_tol(),
            init_step: default_init_step(),
            min_step: default_min_step(),
            target_fidelity: None,
        }
    }
}

/// On-disk description of a complete pulse-design job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrapeConfig {
    pub system: SystemConfig,
    pub hamiltonian: HamiltonianSpec,
    pub duration_s: f64,
    pub slices: usize,
    pub rf_scales: Vec<(f64, f64)>,
    pub max_amplitude_hz: f64,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
}

impl GrapeConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!("cannot read `{}`: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }

    fn pols_in_order(map: &BTreeMap<String, f64>, system: &SpinSystem) -> Result<Vec<f64>> {
        for name in map.keys() {
            system.spin_index(name)?;
        }
        system
            .spins()
            .iter()
            .map(|s| {
                map.get(&s.name).copied().ok_or_else(|| {
                    Error::Config(format!("objective is missing spin `{}`", s.name))
                })
            })
            .collect()
    }

    fn state_from(
        system: &Arc<SpinSystem>,
        deviation: &Option<Vec<f64>>,
        pols: &BTreeMap<String, f64>,
    ) -> Result<DiagonalState> {
        match deviation {
            Some(values) => DiagonalState::from_deviation(
                system,
                &crate::system::DeviationDiagonal::new(values.clone()),
            ),
            None => DiagonalState::product(system, &Self::pols_in_order(pols, system)?),
        }
    }

    pub fn to_problem(&self) -> Result<GrapeProblem> {
        let system = SpinSystem::from_config(self.system.clone())?;
        let initial = Self::state_from(
            &system,
            &self.objective.initial_deviation,
            &self.objective.initial_pols,
        )?;
        let target = Self::state_from(
            &system,
            &self.objective.target_deviation,
            &self.objective.target_pols,
        )?;
        GrapeProblem::new(
            system,
            self.hamiltonian.clone(),
            initial,
            target,
            self.duration_s,
            self.slices,
            self.rf_scales.clone(),
            self.max_amplitude_hz,
        )
    }
}

/// Serialized result of a pulse-design run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseOutput {
    pub duration_s: f64,
    pub slices: usize,
    pub slice_dt_s: f64,
    pub channels: Vec<String>,
    /// `[slice][channel] = [x_hz, y_hz]`.
    pub amplitudes_hz: Vec<Vec<[f64; 2]>>,
    /// `(scale, fidelity)` per ensemble member.
    pub per_scale_fidelity: Vec<(f64, f64)>,
    pub mean_fidelity: f64,
    pub fidelity_trace: Vec<f64>,
    pub iterations: usize,
    pub stagnated: bool,
    pub seed: u64,
}

impl PulseOutput {
    pub fn new(
        problem: &GrapeProblem,
        outcome: &OptimizeOutcome,
        seed: u64,
    ) -> Self {
        PulseOutput {
            duration_s: problem.duration_s,
            slices: problem.slices,
            slice_dt_s: problem.slice_dt(),
            channels: problem.context().channel_names(),
            amplitudes_hz: outcome.pulse.amplitudes.clone(),
            per_scale_fidelity: problem
                .rf_scales
                .iter()
                .map(|&(s, _)| s)
                .zip(outcome.per_scale.iter().copied())
                .collect(),
            mean_fidelity: outcome.fidelity,
            fidelity_trace: outcome.pulse.fidelity_trace.clone(),
            iterations: outcome.iterations,
            stagnated: outcome.stagnated,
            seed,
        }
    }

    /// Slice table for plotting: `slice,time_s,channel,x_hz,y_hz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slice,time_s,channel,x_hz,y_hz\n");
        for (k, per_channel) in self.amplitudes_hz.iter().enumerate() {
            let t = k as f64 * self.slice_dt_s;
            for (c, xy) in per_channel.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    k,
                    fmt_sig(t, 6),
                    self.channels[c],
                    fmt_sig(xy[0], 6),
                    fmt_sig(xy[1], 6),
                ));
            }
        }
        out
    }
}
