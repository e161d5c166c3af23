//! Trajectory execution, limit-cycle detection and delay-grid scans.
//!
//! [`run`] walks a [`PulseSequence`] deterministically: waits evolve the
//! state through the T1 channel, gate steps apply their permutation with the
//! efficiency bound to their role, and a trajectory record is emitted for
//! the initial state, every `measure` statement and every completed
//! iteration of a top-level `repeat` (a cooling round).

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::GateModel;
use crate::relaxation::RelaxationChannel;
use crate::sequence::{build_process, EtaRole, ProcessKind, PulseSequence, SequenceStep};
use crate::system::{DiagonalState, SpinSystem};
use crate::thermo;
use crate::util::{csv_field, fmt_sig};

/// One row of a trajectory: the state summary after some event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    /// Cooling round the record belongs to (0 = initial state).
    pub round: u32,
    /// Elapsed wait time, seconds.
    pub time_s: f64,
    /// Marginal polarizations in system order, eps_unit units.
    pub pols: Vec<f64>,
    /// Leading-order per-spin IC (pol^2), system order.
    pub ics: Vec<f64>,
    pub ic_total: f64,
    pub ic_exact_bits: f64,
    /// Label of the last executed step.
    pub event: String,
}

/// The full record stream of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    system: Arc<SpinSystem>,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn system(&self) -> &Arc<SpinSystem> {
        &self.system
    }

    pub fn final_record(&self) -> &TrajectoryRecord {
        self.records.last().expect("trajectory has an initial record")
    }

    /// Last record of each round, indexed by round number starting at 0.
    pub fn round_records(&self) -> Vec<&TrajectoryRecord> {
        let mut out: Vec<&TrajectoryRecord> = Vec::new();
        for rec in &self.records {
            match out.last() {
                Some(last) if last.round == rec.round => {
                    *out.last_mut().unwrap() = rec;
                }
                _ => out.push(rec),
            }
        }
        out
    }

    /// CSV table: `round,time_s,pol_<spin>...,ic_<spin>...,ic_total,ic_exact_bits,event`.
    pub fn to_csv(&self) -> String {
        let names = self.system.spin_names();
        let mut out = String::from("round,time_s");
        for n in &names {
            out.push_str(&format!(",pol_{n}"));
        }
        for n in &names {
            out.push_str(&format!(",ic_{n}"));
        }
        out.push_str(",ic_total,ic_exact_bits,event\n");
        for r in &self.records {
            out.push_str(&r.round.to_string());
            out.push(',');
            out.push_str(&fmt_sig(r.time_s, 6));
            for p in &r.pols {
                out.push(',');
                out.push_str(&fmt_sig(*p, 6));
            }
            for ic in &r.ics {
                out.push(',');
                out.push_str(&fmt_sig(*ic, 6));
            }
            out.push(',');
            out.push_str(&fmt_sig(r.ic_total, 6));
            out.push(',');
            out.push_str(&fmt_sig(r.ic_exact_bits, 6));
            out.push(',');
            out.push_str(&csv_field(&r.event));
            out.push('\n');
        }
        out
    }

    /// JSON mirror of the CSV table (full float precision).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "system": self.system.label(),
            "spins": self.system.spin_names(),
            "records": self.records,
        })
    }
}

struct Executor {
    state: DiagonalState,
    model: GateModel,
    time_s: f64,
    rounds_done: u32,
    in_round: bool,
    last_event: String,
    records: Vec<TrajectoryRecord>,
}

impl Executor {
    fn record(&mut self, event: String) {
        let pols = self.state.all_marginals();
        let ics: Vec<f64> = pols.iter().map(|p| p * p).collect();
        let ic_total = ics.iter().sum();
        let report_round = if self.in_round {
            self.rounds_done + 1
        } else {
            self.rounds_done
        };
        self.records.push(TrajectoryRecord {
            round: report_round,
            time_s: self.time_s,
            pols,
            ics,
            ic_total,
            ic_exact_bits: self.state.system().len() as f64
                - self.state.shannon_entropy_bits(),
            event,
        });
    }

    fn exec(&mut self, steps: &[SequenceStep], depth: usize) -> Result<()> {
        for step in steps {
            match step {
                SequenceStep::Wait(t) => {
                    let channel = RelaxationChannel::new(self.state.system(), *t)?;
                    self.state = channel.apply(&self.state)?;
                    self.time_s += t;
                    self.last_event = format!("wait {}", fmt_sig(*t, 6));
                }
                SequenceStep::ApplyGate { gate, role } => {
                    let eta = match role {
                        EtaRole::Pe => self.model.eta_pe,
                        EtaRole::Comp => self.model.eta_comp,
                        EtaRole::Ideal => 1.0,
                    };
                    self.state = gate.apply(&self.state, eta)?;
                    self.last_event = gate.label().to_string();
                }
                SequenceStep::Measure(spins) => {
                    self.record(format!("measure {}", spins.join(" ")));
                }
                SequenceStep::Repeat { count, body } => {
                    for _ in 0..*count {
                        if depth == 0 {
                            self.in_round = true;
                        }
                        self.exec(body, depth + 1)?;
                        if depth == 0 {
                            self.in_round = false;
                            self.rounds_done += 1;
                            self.record(self.last_event.clone());
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Executes `seq` from `initial` and returns the trajectory (including the
/// initial record). Deterministic: identical inputs give identical output.
pub fn run(seq: &PulseSequence, model: &GateModel, initial: &DiagonalState) -> Result<Trajectory> {
    if seq.system() != initial.system() {
        return Err(Error::Parameter(
            "sequence and initial state belong to different systems".into(),
        ));
    }
    let mut exec = Executor {
        state: initial.clone(),
        model: *model,
        time_s: 0.0,
        rounds_done: 0,
        in_round: false,
        last_event: String::new(),
        records: Vec::new(),
    };
    exec.record("init".into());
    exec.exec(&seq.steps, 0)?;
    Ok(Trajectory {
        system: Arc::clone(initial.system()),
        records: exec.records,
    })
}

/// Smallest round `r >= 1` whose per-spin polarizations moved less than
/// `tol` from round `r-1`; `None` if the trajectory never settles.
pub fn detect_limit_cycle(traj: &Trajectory, tol: f64) -> Option<u32> {
    let rounds = traj.round_records();
    for pair in rounds.windows(2) {
        let (prev, cur) = (pair[0], pair[1]);
        if cur.round != prev.round + 1 {
            continue;
        }
        let max_delta = prev
            .pols
            .iter()
            .zip(&cur.pols)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_delta < tol {
            return Some(cur.round);
        }
    }
    None
}

/// Inclusive sampling of one delay axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayAxis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl DelayAxis {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = self.min + self.step * k as f64;
            if v > self.max + 1e-9 {
                break;
            }
            out.push(v);
            k += 1;
        }
        out
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub delays: BTreeMap<String, f64>,
    pub objective: f64,
}

/// Result of an exhaustive delay scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOutcome {
    pub best: ScanPoint,
    pub surface: Vec<ScanPoint>,
}

/// Exhaustively evaluates a process template over a delay grid, maximizing
/// the summed leading-order IC of `objective_spins` at the end of the run.
/// Ties break toward the lexicographically smallest delay tuple.
pub fn scan_delays(
    kind: ProcessKind,
    system: &Arc<SpinSystem>,
    grid: &BTreeMap<String, DelayAxis>,
    objective_spins: &[String],
    rounds: u32,
    model: &GateModel,
) -> Result<ScanOutcome> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty delay grid".into()));
    }
    if objective_spins.is_empty() {
        return Err(Error::Parameter("empty objective spin set".into()));
    }
    let objective_idx = objective_spins
        .iter()
        .map(|name| system.spin_index(name))
        .collect::<Result<Vec<_>>>()?;
    let mut axes = Vec::new();
    for (name, axis) in grid {
        if !kind.required_delays().contains(&name.as_str()) {
            return Err(Error::Parameter(format!(
                "process {} does not use delay {name}",
                kind.number()
            )));
        }
        if !(axis.step > 0.0) || !(axis.min >= 0.0) || axis.max < axis.min {
            return Err(Error::Parameter(format!("invalid grid axis for {name}")));
        }
        let values = axis.values();
        if values.is_empty() {
            return Err(Error::Parameter(format!("grid axis {name} has no points")));
        }
        axes.push((name.clone(), values));
    }

    let mut points: Vec<BTreeMap<String, f64>> = vec![kind.default_delays()];
    for (name, values) in &axes {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for base in &points {
            for &v in values {
                let mut d = base.clone();
                d.insert(name.clone(), v);
                next.push(d);
            }
        }
        points = next;
    }

    let initial = DiagonalState::equilibrium(system);
    let surface: Vec<ScanPoint> = points
        .par_iter()
        .map(|delays| {
            let seq = build_process(kind, system, delays, rounds)?;
            let traj = run(&seq, model, &initial)?;
            let final_rec = traj.final_record();
            let objective = objective_idx.iter().map(|&i| final_rec.ics[i]).sum();
            Ok(ScanPoint {
                delays: delays.clone(),
                objective,
            })
        })
        .collect::<Result<_>>()?;

    // strict comparison keeps the first (lexicographically smallest) argmax
    let mut best = surface[0].clone();
    for p in &surface[1..] {
        if p.objective > best.objective {
            best = p.clone();
        }
    }
    Ok(ScanOutcome { best, surface })
}

/// Convenience wrapper: trajectory of a process template from equilibrium.
pub fn run_process(
    kind: ProcessKind,
    system: &Arc<SpinSystem>,
    delays: &BTreeMap<String, f64>,
    rounds: u32,
    model: &GateModel,
) -> Result<Trajectory> {
    let seq = build_process(kind, system, delays, rounds)?;
    run(&seq, model, &DiagonalState::equilibrium(system))
}

/// Leading-order analytics for `analyze`-style reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub system: String,
    pub eps_unit: f64,
    pub spins: Vec<String>,
    pub equilibrium_pols: Vec<f64>,
    pub ic_per_spin: Vec<f64>,
    pub ic_total: f64,
    pub ic_exact_bits: f64,
    pub entropy_bound_max_pol: f64,
    pub sort_bound_per_spin: Vec<f64>,
}

/// Equilibrium analytics of a system: IC budget, entropy bound and the
/// permutation (sort) bound per spin.
pub fn analyze(system: &Arc<SpinSystem>) -> AnalysisReport {
    let eq = DiagonalState::equilibrium(system);
    let report = thermo::ic_report(&eq);
    let entropy_bound = thermo::entropy_bound_max_pol(report.total_leading)
        .expect("total IC is nonnegative");
    let sort_bounds = system
        .spins()
        .iter()
        .map(|s| thermo::sort_bound(&eq, &s.name).expect("spin exists"))
        .collect();
    AnalysisReport {
        system: system.label().to_string(),
        eps_unit: system.eps_unit(),
        spins: system.spin_names(),
        equilibrium_pols: eq.all_marginals(),
        ic_per_spin: report.per_spin.iter().map(|(_, ic)| *ic).collect(),
        ic_total: report.total_leading,
        ic_exact_bits: report.exact_bits,
        entropy_bound_max_pol: entropy_bound,
        sort_bound_per_spin: sort_bounds,
    }
}
