//! Simulation and pulse design for algorithmic cooling of nuclear-spin
//! ensembles.
//!
//! The crate models a small spin system (the bundled example is
//! 13C2-trichloroethylene: a fast-relaxing proton and two slow carbons) as
//! an exact diagonal population vector and provides:
//!
//! * [`system`] — spin systems, product/diagonal states, deviation
//!   diagonals, JSON configuration;
//! * [`thermo`] — equilibrium polarization, spin temperature, information
//!   content, the entropy ("Shannon") bound and the permutation (sort)
//!   bound;
//! * [`gates`] — polarization exchange and 3-bit compression as explicit
//!   basis permutations, with an efficiency-degraded application mode;
//! * [`relaxation`] — the per-spin T1 thermalization channel;
//! * [`engine`] — a pulse-sequence mini-DSL, the three process templates,
//!   trajectory execution, limit-cycle detection and delay-grid scans (see
//!   [`sequence`] for parsing);
//! * [`grape`] — gradient-ascent synthesis of piecewise-constant RF pulses
//!   for state-to-state transfers, robust to RF-power miscalibration.
//!
//! Polarizations are expressed in units of the reference spin's equilibrium
//! polarization (`eps_unit`), so a cooled carbon at "4.6" means 4.6 times
//! its thermal polarization; leading-order information content is the
//! square of that number.
//!
//! ```
//! use spincool::engine::{detect_limit_cycle, run_process};
//! use spincool::gates::GateModel;
//! use spincool::sequence::ProcessKind;
//! use spincool::system::SpinSystem;
//!
//! let sys = SpinSystem::tce();
//! let model = GateModel::new(0.95, 0.92).unwrap();
//! let traj = run_process(
//!     ProcessKind::P1,
//!     &sys,
//!     &ProcessKind::P1.default_delays(),
//!     7,
//!     &model,
//! )
//! .unwrap();
//! let c1 = traj.final_record().pols[2];
//! assert!(c1 > 4.2, "carbon cooled {c1}x beyond equilibrium");
//! assert_eq!(detect_limit_cycle(&traj, 0.03), Some(7));
//! ```
//!
//! Each major capability has a runnable example under `examples/`;
//! the `spincool` binary exposes the same functionality as subcommands
//! (`analyze`, `simulate`, `scan`, `grape`, `parse-check`).

// `!(x > 0.0)`-style guards are used throughout so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod error;
pub mod gates;
pub mod grape;
pub mod relaxation;
pub mod sequence;
pub mod system;
pub mod thermo;
pub(crate) mod util;

pub use error::{Error, Result};
