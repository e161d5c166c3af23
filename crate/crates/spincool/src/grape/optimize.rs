//! Propagation, fidelity, exact gradients and the ascent loop.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::expm::{matrix_exp, matrix_exp_frechet};
use super::{ControlPulse, GrapeProblem, OptimizeConfig, OptimizeOutcome, PulseInit};

const TAU: f64 = std::f64::consts::TAU;

fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// `Tr(a b)` without forming the product.
fn trace_prod(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            tr += a[[i, j]] * b[[j, i]];
        }
    }
    tr
}

fn frobenius_norm_diag(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Slice propagators for one RF scale, first slice first.
fn slice_unitaries(
    problem: &GrapeProblem,
    pulse: &ControlPulse,
    rf_scale: f64,
) -> Result<Vec<Array2<C64>>> {
    let dt = problem.slice_dt();
    pulse
        .amplitudes
        .iter()
        .map(|controls| {
            let h = problem.context().build(controls, rf_scale)?;
            let a = h.mapv(|z| z * C64::new(0.0, -dt));
            Ok(matrix_exp(&a))
        })
        .collect()
}

/// Total propagator `U = U_{K-1} ... U_0` and the slice factors.
pub fn propagate(
    problem: &GrapeProblem,
    pulse: &ControlPulse,
    rf_scale: f64,
) -> Result<(Array2<C64>, Vec<Array2<C64>>)> {
    pulse.check_shape(problem)?;
    let units = slice_unitaries(problem, pulse, rf_scale)?;
    let dim = problem.context().dim();
    let mut total = Array2::from_diag_elem(dim, C64::new(1.0, 0.0));
    for u in &units {
        total = u.dot(&total);
    }
    Ok((total, units))
}

/// Normalized Hilbert-Schmidt overlap of the propagated initial deviation
/// with the target deviation. Exposed shape: `Tr(Δt U Δi U†)/(‖Δt‖‖Δi‖)`.
pub(crate) fn overlap_fidelity(
    delta_target: &[f64],
    u: &Array2<C64>,
    delta_initial: &[f64],
) -> f64 {
    let norm = frobenius_norm_diag(delta_target) * frobenius_norm_diag(delta_initial);
    let mut f = 0.0;
    for (x, dt) in delta_target.iter().enumerate() {
        if *dt == 0.0 {
            continue;
        }
        let mut diag = 0.0;
        for (y, di) in delta_initial.iter().enumerate() {
            diag += u[[x, y]].norm_sqr() * di;
        }
        f += dt * diag;
    }
    f / norm
}

fn deviations(problem: &GrapeProblem) -> Result<(Vec<f64>, Vec<f64>)> {
    let di = problem.initial.deviation_diagonal().values;
    let dt = problem.target.deviation_diagonal().values;
    if frobenius_norm_diag(&di) == 0.0 || frobenius_norm_diag(&dt) == 0.0 {
        return Err(Error::Domain(
            "initial and target deviations must be nonzero".into(),
        ));
    }
    Ok((di, dt))
}

/// Per-ensemble-member fidelities, ordered like `problem.rf_scales`.
pub fn per_scale_fidelities(problem: &GrapeProblem, pulse: &ControlPulse) -> Result<Vec<f64>> {
    pulse.check_shape(problem)?;
    let (di, dt) = deviations(problem)?;
    problem
        .rf_scales
        .par_iter()
        .map(|&(scale, _)| {
            let (u, _) = propagate(problem, pulse, scale)?;
            Ok(overlap_fidelity(&dt, &u, &di))
        })
        .collect()
}

/// Ensemble-weighted transfer fidelity in [-1, 1].
pub fn fidelity(problem: &GrapeProblem, pulse: &ControlPulse) -> Result<f64> {
    let per_scale = per_scale_fidelities(problem, pulse)?;
    Ok(problem
        .rf_scales
        .iter()
        .zip(&per_scale)
        .map(|(&(_, w), f)| w * f)
        .sum())
}

/// Exact gradient of [`fidelity`] w.r.t. every slice amplitude.
pub fn gradient(problem: &GrapeProblem, pulse: &ControlPulse) -> Result<Vec<Vec<[f64; 2]>>> {
    pulse.check_shape(problem)?;
    let (di, dt) = deviations(problem)?;
    let norm = frobenius_norm_diag(&dt) * frobenius_norm_diag(&di);
    let dim = problem.context().dim();
    let dt_slice = problem.slice_dt();
    let n_channels = problem.n_channels();
    let slices = problem.slices;

    let delta_i = GrapeProblem::deviation_matrix(&problem.initial);
    let delta_t = GrapeProblem::deviation_matrix(&problem.target);

    // per-scale gradients evaluated independently, then mixed in order
    let per_scale: Vec<Vec<Vec<[f64; 2]>>> = problem
        .rf_scales
        .par_iter()
        .map(|&(scale, _)| {
            let units = slice_unitaries(problem, pulse, scale)?;

            // forward-propagated deviations rho_k before slice k
            let mut rho = Vec::with_capacity(slices);
            rho.push(delta_i.clone());
            for u in &units[..slices - 1] {
                let prev = rho.last().unwrap();
                rho.push(u.dot(prev).dot(&dagger(u)));
            }
            // backward-conjugated costates lambda_k after slice k
            let mut lam = vec![Array2::<C64>::zeros((dim, dim)); slices];
            lam[slices - 1] = delta_t.clone();
            for k in (0..slices - 1).rev() {
                let next = &units[k + 1];
                lam[k] = dagger(next).dot(&lam[k + 1]).dot(next);
            }

            let grad: Vec<Vec<[f64; 2]>> = (0..slices)
                .into_par_iter()
                .map(|k| {
                    let h = problem
                        .context()
                        .build(&pulse.amplitudes[k], scale)
                        .expect("pulse shape already checked");
                    let a = h.mapv(|z| z * C64::new(0.0, -dt_slice));
                    let u_dag = dagger(&units[k]);
                    let mut row = vec![[0.0, 0.0]; n_channels];
                    for (c, entry) in row.iter_mut().enumerate() {
                        for (q, slot) in entry.iter_mut().enumerate() {
                            let e = problem
                                .context()
                                .control_op(c, q)
                                .mapv(|z| z * C64::new(0.0, -dt_slice * scale * TAU));
                            let (_, d) = matrix_exp_frechet(&a, &e);
                            let m = d.dot(&rho[k]).dot(&u_dag);
                            *slot = 2.0 * trace_prod(&lam[k], &m).re / norm;
                        }
                    }
                    row
                })
                .collect();
            Ok(grad)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![vec![[0.0, 0.0]; n_channels]; slices];
    for (&(_, w), grad) in problem.rf_scales.iter().zip(&per_scale) {
        for (ts, gs) in total.iter_mut().zip(grad) {
            for (txy, gxy) in ts.iter_mut().zip(gs) {
                txy[0] += w * gxy[0];
                txy[1] += w * gxy[1];
            }
        }
    }
    Ok(total)
}

fn sup_norm(grad: &[Vec<[f64; 2]>]) -> f64 {
    grad.iter()
        .flatten()
        .flat_map(|xy| xy.iter())
        .fold(0.0f64, |m, g| m.max(g.abs()))
}

/// Monotone gradient ascent with a backtracking line search. Deterministic
/// given the init; amplitudes are clipped to the cap after every update.
pub fn optimize(
    problem: &GrapeProblem,
    init: PulseInit,
    cfg: &OptimizeConfig,
) -> Result<OptimizeOutcome> {
    let mut pulse = match init {
        PulseInit::Zeros => ControlPulse::zeros(problem),
        PulseInit::Random { seed } => ControlPulse::random(problem, seed),
        PulseInit::Pulse(p) => {
            p.check_shape(problem)?;
            p
        }
    };
    pulse.clip(problem.max_amplitude_hz);

    let mut f = fidelity(problem, &pulse)?;
    pulse.fidelity_trace = vec![f];
    let mut step = cfg.init_step;
    let mut stagnated = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        let grad = gradient(problem, &pulse)?;
        let g_norm = sup_norm(&grad);
        if g_norm < 1e-15 {
            break;
        }
        // normalized direction: largest component moves by step * cap
        let mut accepted = None;
        while step >= cfg.min_step {
            let mut trial = pulse.clone();
            let h = step * problem.max_amplitude_hz / g_norm;
            for (ts, gs) in trial.amplitudes.iter_mut().zip(&grad) {
                for (txy, gxy) in ts.iter_mut().zip(gs) {
                    txy[0] += h * gxy[0];
                    txy[1] += h * gxy[1];
                }
            }
            trial.clip(problem.max_amplitude_hz);
            let ft = fidelity(problem, &trial)?;
            if ft > f {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft)) = accepted else {
            stagnated = true;
            break;
        };
        let gain = ft - f;
        pulse.amplitudes = trial.amplitudes;
        f = ft;
        pulse.fidelity_trace.push(f);
        iterations += 1;
        step = (step * 1.5).min(0.5);
        if gain < cfg.tol {
            break;
        }
    }

    let per_scale = per_scale_fidelities(problem, &pulse)?;
    Ok(OptimizeOutcome {
        pulse,
        fidelity: f,
        per_scale,
        iterations,
        stagnated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grape::{CouplingForm, HamiltonianSpec, JCoupling};
    use crate::system::{DiagonalState, Spin, SpinSystem};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn single_spin_problem(slices: usize) -> GrapeProblem {
        let sys = SpinSystem::new(
            "one",
            1e-5,
            vec![Spin {
                name: "A".into(),
                gamma_rel: 1.0,
                t1_s: 1.0,
                t2star_s: 1.0,
                rf_channel: "c".into(),
            }],
        )
        .unwrap();
        let spec = HamiltonianSpec {
            offsets_hz: BTreeMap::new(),
            j_couplings_hz: vec![],
            coupling_form: CouplingForm::Weak,
            channels: None,
        };
        let initial = DiagonalState::product(&sys, &[1.0]).unwrap();
        let target = DiagonalState::product(&sys, &[-1.0]).unwrap();
        GrapeProblem::new(
            Arc::clone(&sys),
            spec,
            initial,
            target,
            1e-3,
            slices,
            vec![(1.0, 1.0)],
            2000.0,
        )
        .unwrap()
    }

    fn three_spin_problem(form: CouplingForm, scales: Vec<(f64, f64)>) -> GrapeProblem {
        let sys = SpinSystem::tce();
        let spec = HamiltonianSpec {
            offsets_hz: [
                ("H".to_string(), 0.0),
                ("C2".to_string(), -528.0),
                ("C1".to_string(), 528.0),
            ]
            .into_iter()
            .collect(),
            j_couplings_hz: vec![
                JCoupling { a: "H".into(), b: "C2".into(), value_hz: 201.0 },
                JCoupling { a: "C1".into(), b: "C2".into(), value_hz: 103.0 },
                JCoupling { a: "H".into(), b: "C1".into(), value_hz: 9.0 },
            ],
            coupling_form: form,
            channels: None,
        };
        let initial = DiagonalState::equilibrium(&sys);
        let target = DiagonalState::product(&sys, &[1.0, 3.98, 1.0]).unwrap();
        GrapeProblem::new(
            Arc::clone(&sys),
            spec,
            initial,
            target,
            6.5e-3,
            8,
            scales,
            10_000.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_hamiltonian_propagates_to_identity() {
        let problem = single_spin_problem(4);
        let pulse = ControlPulse::zeros(&problem);
        let (u, units) = propagate(&problem, &pulse, 1.0).unwrap();
        assert_eq!(units.len(), 4);
        for ((i, j), z) in u.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((z - C64::new(want, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_x_drive_is_a_pi_pulse() {
        // 2 pi * 500 Hz * 1 ms = pi
        let problem = single_spin_problem(50);
        let pulse = ControlPulse::constant(&problem, &[[500.0, 0.0]]).unwrap();
        let (u, _) = propagate(&problem, &pulse, 1.0).unwrap();
        assert!((u[[1, 0]].norm() - 1.0).abs() < 1e-10, "inversion amplitude");
        assert!(u[[0, 0]].norm() < 1e-10);
        let f = fidelity(&problem, &pulse).unwrap();
        assert!((f - 1.0).abs() < 1e-10, "fidelity {f}");
    }

    #[test]
    fn slicing_invariance_for_constant_controls() {
        let p1 = single_spin_problem(1);
        let p64 = single_spin_problem(64);
        let u1 = propagate(&p1, &ControlPulse::constant(&p1, &[[317.0, -121.0]]).unwrap(), 1.0)
            .unwrap()
            .0;
        let u64 = propagate(&p64, &ControlPulse::constant(&p64, &[[317.0, -121.0]]).unwrap(), 1.0)
            .unwrap()
            .0;
        for (a, b) in u1.iter().zip(u64.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn propagator_unitarity() {
        let problem = three_spin_problem(CouplingForm::Weak, vec![(1.0, 1.0)]);
        let pulse = ControlPulse::random(&problem, 3);
        let (u, units) = propagate(&problem, &pulse, 1.0).unwrap();
        for m in units.iter().chain(std::iter::once(&u)) {
            let prod = dagger(m).dot(m);
            let defect: f64 = prod
                .indexed_iter()
                .map(|((i, j), z)| {
                    let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                    (z - want).norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            assert!(defect < 1e-10, "unitarity defect {defect}");
        }
    }

    #[test]
    fn fidelity_of_exact_swap_permutation() {
        // oracle propagator built from the PE permutation matrix
        let problem = three_spin_problem(CouplingForm::Weak, vec![(1.0, 1.0)]);
        let gate = crate::gates::Gate::pe(problem.system(), "H", "C2").unwrap();
        let mut u = Array2::<C64>::zeros((8, 8));
        for (x, &y) in gate.permutation().iter().enumerate() {
            u[[y, x]] = C64::new(1.0, 0.0);
        }
        let di = problem.initial.deviation_diagonal().values;
        let dt = problem.target.deviation_diagonal().values;
        let f = overlap_fidelity(&dt, &u, &di);
        assert!((f - 1.0).abs() < 1e-12, "fidelity {f}");
    }

    #[test]
    fn fidelity_bounded_by_one() {
        let problem = three_spin_problem(CouplingForm::Isotropic, vec![(0.9, 0.5), (1.1, 0.5)]);
        for seed in 0..5 {
            let pulse = ControlPulse::random(&problem, seed);
            let f = fidelity(&problem, &pulse).unwrap();
            assert!(f.abs() <= 1.0 + 1e-12, "fidelity {f}");
        }
    }

    #[test]
    fn fidelity_is_basis_independent() {
        // conjugating target, propagator and initial by the same unitary
        let problem = three_spin_problem(CouplingForm::Weak, vec![(1.0, 1.0)]);
        let pulse = ControlPulse::random(&problem, 11);
        let (u, _) = propagate(&problem, &pulse, 1.0).unwrap();
        let di = problem.initial.deviation_diagonal().values;
        let dt = problem.target.deviation_diagonal().values;
        let f0 = overlap_fidelity(&dt, &u, &di);

        // random unitary via the exponential of a random Hermitian
        let mut h = Array2::<C64>::zeros((8, 8));
        for i in 0..8 {
            for j in 0..8 {
                h[[i, j]] = C64::new(((i * 3 + j) % 7) as f64 * 0.21, ((i + 5 * j) % 5) as f64 * 0.13);
            }
        }
        let herm = &h + &dagger(&h);
        let v = matrix_exp(&herm.mapv(|z| z * C64::new(0.0, -0.3)));

        // general (non-diagonal) deviations need the matrix-level overlap
        let mk_diag = |d: &[f64]| {
            let mut m = Array2::<C64>::zeros((8, 8));
            for (i, x) in d.iter().enumerate() {
                m[[i, i]] = C64::new(*x, 0.0);
            }
            m
        };
        let norm = frobenius_norm_diag(&dt) * frobenius_norm_diag(&di);
        let dt_m = v.dot(&mk_diag(&dt)).dot(&dagger(&v));
        let di_m = v.dot(&mk_diag(&di)).dot(&dagger(&v));
        let w = v.dot(&u).dot(&dagger(&v));
        let f1 = trace_prod(&dt_m, &w.dot(&di_m).dot(&dagger(&w))).re / norm;
        assert!((f0 - f1).abs() < 1e-11, "{f0} vs {f1}");
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradient_matches_finite_differences() {
        for form in [CouplingForm::Weak, CouplingForm::Isotropic] {
            let problem = three_spin_problem(form, vec![(0.85, 1.0), (1.0, 1.0), (1.15, 1.0)]);
            let pulse = ControlPulse::random(&problem, 17);
            let grad = gradient(&problem, &pulse).unwrap();
            let g_max = sup_norm(&grad);
            let h = 1e-6 * problem.max_amplitude_hz;
            for k in [0, 3, 7] {
                for c in 0..problem.n_channels() {
                    for q in 0..2 {
                        let mut plus = pulse.clone();
                        plus.amplitudes[k][c][q] += h;
                        let mut minus = pulse.clone();
                        minus.amplitudes[k][c][q] -= h;
                        let fd = (fidelity(&problem, &plus).unwrap()
                            - fidelity(&problem, &minus).unwrap())
                            / (2.0 * h);
                        let g = grad[k][c][q];
                        let tol = 1e-4 * fd.abs().max(1e-3 * g_max);
                        assert!(
                            (g - fd).abs() <= tol,
                            "{form:?} slice {k} ch {c} q {q}: {g} vs {fd}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_perfect_fidelity() {
        // target equals initial, no drift, zero controls: F = 1 exactly
        let sys = SpinSystem::new(
            "one",
            1e-5,
            vec![Spin {
                name: "A".into(),
                gamma_rel: 1.0,
                t1_s: 1.0,
                t2star_s: 1.0,
                rf_channel: "c".into(),
            }],
        )
        .unwrap();
        let spec = HamiltonianSpec {
            offsets_hz: BTreeMap::new(),
            j_couplings_hz: vec![],
            coupling_form: CouplingForm::Weak,
            channels: None,
        };
        let st = DiagonalState::product(&sys, &[1.0]).unwrap();
        let problem = GrapeProblem::new(
            Arc::clone(&sys),
            spec,
            st.clone(),
            st,
            1e-3,
            10,
            vec![(1.0, 1.0)],
            1000.0,
        )
        .unwrap();
        let pulse = ControlPulse::zeros(&problem);
        assert!((fidelity(&problem, &pulse).unwrap() - 1.0).abs() < 1e-14);
        let grad = gradient(&problem, &pulse).unwrap();
        assert!(sup_norm(&grad) <= 1e-8, "gradient norm {}", sup_norm(&grad));
    }

    #[test]
    fn weight_normalization_leaves_gradient_unchanged() {
        let p1 = three_spin_problem(CouplingForm::Weak, vec![(0.9, 0.5), (1.1, 0.5)]);
        let p2 = three_spin_problem(CouplingForm::Weak, vec![(0.9, 1.0), (1.1, 1.0)]);
        let pulse = ControlPulse::random(&p1, 23);
        let g1 = gradient(&p1, &pulse).unwrap();
        let g2 = gradient(&p2, &pulse).unwrap();
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_scale_ensemble_equals_plain_fidelity() {
        let problem = three_spin_problem(CouplingForm::Weak, vec![(1.0, 1.0)]);
        let pulse = ControlPulse::random(&problem, 5);
        let f = fidelity(&problem, &pulse).unwrap();
        let per = per_scale_fidelities(&problem, &pulse).unwrap();
        assert_eq!(per.len(), 1);
        assert_eq!(f, per[0]);
    }

    #[test]
    fn pi_pulse_optimization_converges() {
        let problem = single_spin_problem(50);
        let outcome = optimize(
            &problem,
            PulseInit::Random { seed: 1 },
            &OptimizeConfig { max_iters: 500, ..OptimizeConfig::default() },
        )
        .unwrap();
        assert!(outcome.fidelity >= 0.999, "fidelity {}", outcome.fidelity);
        // monotone trace
        for w in outcome.pulse.fidelity_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(outcome.pulse.max_magnitude() <= problem.max_amplitude_hz + 1e-9);
    }

    #[test]
    fn zero_iterations_returns_init() {
        let problem = single_spin_problem(10);
        let init = ControlPulse::random(&problem, 9);
        let outcome = optimize(
            &problem,
            PulseInit::Pulse(init.clone()),
            &OptimizeConfig { max_iters: 0, ..OptimizeConfig::default() },
        )
        .unwrap();
        assert_eq!(outcome.pulse.amplitudes, init.amplitudes);
        assert_eq!(outcome.iterations, 0);
        assert!(!outcome.stagnated);
    }

    #[test]
    fn zero_deviation_is_domain_error() {
        let sys = SpinSystem::tce();
        let spec = HamiltonianSpec {
            offsets_hz: BTreeMap::new(),
            j_couplings_hz: vec![],
            coupling_form: CouplingForm::Weak,
            channels: None,
        };
        let uniform = DiagonalState::uniform(Arc::clone(&sys));
        let target = DiagonalState::equilibrium(&sys);
        let problem = GrapeProblem::new(
            Arc::clone(&sys),
            spec,
            uniform,
            target,
            1e-3,
            4,
            vec![(1.0, 1.0)],
            1000.0,
        )
        .unwrap();
        let pulse = ControlPulse::zeros(&problem);
        assert!(matches!(fidelity(&problem, &pulse), Err(Error::Domain(_))));
    }
}
