use irgnm::gauss_newton::KrylovSettings;
use irgnm::observation::SyntheticStream;
use irgnm::problems::potential::truth_field;
use irgnm::problems::{PotentialProblem, PotentialTruth};
use irgnm::*;

fn setup(sigma: f64) -> (PotentialProblem, ParamField, SyntheticStream) {
    let g = Grid::new(9).unwrap();
    let prob = PotentialProblem::new(g, PotentialTruth::Smooth);
    let stream = SyntheticStream::new(prob.exact_data(), NoiseConfig::new(sigma, 17).unwrap());
    (prob, truth_field(PotentialTruth::Smooth, g), stream)
}

fn config(prob: &PotentialProblem, truth: &ParamField, schedule: RegSchedule) -> GnConfig {
    GnConfig::new(ParamField::constant(prob.grid(), 0.0), schedule, StepMethod::Native).with_reference(truth.clone())
}

fn max_rel(a: &ParamField, b: &ParamField) -> f64 {
    relative_error(a, b).unwrap()
}

#[test]
fn zero_iterations_return_the_start() {
    let (prob, truth, stream) = setup(1e-3);
    let cfg = config(&prob, &truth, RegSchedule::geometric(1e-3, 1.5).unwrap());
    let start = ParamField::from_fn(prob.grid(), |x, y| x * y);
    let t = run_cirgnm(&prob, &cfg, &start, stream.exact(), 0, 0).unwrap();
    assert!(t.is_empty());
    assert_eq!(t.final_estimate, start);
    assert_eq!(t.final_alpha, None);
}

#[test]
fn one_dynamic_step_is_one_classical_step() {
    let (prob, truth, stream) = setup(1e-3);
    let dynamic = config(&prob, &truth, RegSchedule::power(1e-3, 1.2).unwrap());
    let d = run_dirgnm(&prob, &dynamic, stream.clone(), 1).unwrap();
    let classic = config(&prob, &truth, RegSchedule::power(1e-3, 1.2).unwrap());
    let c = run_cirgnm(&prob, &classic, &classic.u0, &stream.observation(1), 1, 1).unwrap();
    assert_eq!(d.records[0].alpha, 1e-3);
    assert_eq!(d.final_estimate, c.final_estimate);
    assert_eq!(d.final_alpha, Some(1e-3));
}

#[test]
fn noise_free_dynamic_equals_classical() {
    let (prob, truth, stream) = setup(0.0);
    let schedule = RegSchedule::power(1e-3, 0.9).unwrap();
    let cfg = config(&prob, &truth, schedule);
    let d = run_dirgnm(&prob, &cfg, stream.clone(), 12).unwrap();
    let c = run_cirgnm(&prob, &cfg, &cfg.u0, stream.exact(), 0, 12).unwrap();
    assert_eq!(d.len(), c.len());
    for (a, b) in d.records.iter().zip(&c.records) {
        assert_eq!(a.alpha, b.alpha);
        let (ea, eb) = (a.rel_error.unwrap(), b.rel_error.unwrap());
        assert!((ea - eb).abs() <= 1e-10 * eb);
    }
    assert!(max_rel(&d.final_estimate, &c.final_estimate) < 1e-10);
}

#[test]
fn hybrid_without_classical_phase_is_dynamic() {
    let (prob, truth, stream) = setup(1e-3);
    let cfg = config(&prob, &truth, RegSchedule::power(1e-3, 1.2).unwrap());
    let d = run_dirgnm(&prob, &cfg, stream.clone(), 8).unwrap();
    let h = run_hirgnm(&prob, &cfg, stream.clone(), 8, 0, 1.5).unwrap();
    assert_eq!(d.records, h.records);
    assert_eq!(d.final_estimate, h.final_estimate);
}

#[test]
fn hybrid_phases_and_schedule_handover() {
    let (prob, truth, stream) = setup(1e-3);
    let cfg = config(&prob, &truth, RegSchedule::power(1e-3, 1.2).unwrap());
    let h = run_hirgnm(&prob, &cfg, stream.clone(), 6, 4, 1.5).unwrap();
    let phases: Vec<Phase> = h.records.iter().map(|r| r.phase).collect();
    assert_eq!(phases, [[Phase::Dynamic; 6].as_slice(), [Phase::Classic; 4].as_slice()].concat());
    let alpha_n = h.records[5].alpha;
    for (k, r) in h.phase(Phase::Classic).enumerate() {
        assert_eq!(r.iter, k + 1);
        assert_eq!(r.n_obs_used, 6);
        assert_eq!(r.alpha, alpha_n * 1.5f64.powi(-(k as i32 + 1)));
    }
    for (k, r) in h.phase(Phase::Dynamic).enumerate() {
        assert_eq!(r.iter, k + 1);
        assert_eq!(r.n_obs_used, k + 1);
    }
    // the classical phase continues from Û_N on Z_N
    let dyn_only = run_dirgnm(&prob, &cfg, stream.clone(), 6).unwrap();
    let z = stream.average(6).unwrap();
    let classic = GnConfig::new(cfg.u0.clone(), RegSchedule::geometric(alpha_n, 1.5).unwrap(), StepMethod::Native)
        .with_reference(truth.clone());
    let c = run_cirgnm(&prob, &classic, &dyn_only.final_estimate, z.mean(), 6, 4).unwrap();
    assert!(max_rel(&h.final_estimate, &c.final_estimate) < 1e-12);
}

#[test]
fn hybrid_needs_an_observation() {
    let (prob, truth, stream) = setup(1e-3);
    let cfg = config(&prob, &truth, RegSchedule::power(1e-3, 1.2).unwrap());
    assert!(run_hirgnm(&prob, &cfg, stream, 0, 3, 1.5).is_err());
}

#[test]
fn dynamic_rejects_geometric_schedule() {
    let (prob, truth, stream) = setup(1e-3);
    let cfg = config(&prob, &truth, RegSchedule::geometric(1e-3, 1.5).unwrap());
    assert!(run_dirgnm(&prob, &cfg, stream, 3).is_err());
}

#[test]
fn short_stream_reports_exhaustion() {
    let (prob, truth, stream) = setup(1e-3);
    let cfg = config(&prob, &truth, RegSchedule::power(1e-3, 1.2).unwrap());
    let err = run_dirgnm(&prob, &cfg, stream.take(3), 5).unwrap_err();
    assert!(matches!(err, Error::StreamExhausted { expected: 5, got: 3 }));
}

#[test]
fn failing_step_keeps_partial_trajectory() {
    let (prob, truth, stream) = setup(1e-3);
    let settings = KrylovSettings { tol: 1e-14, max_iter: 1 };
    let cfg = GnConfig::new(
        ParamField::constant(prob.grid(), 0.0),
        RegSchedule::geometric(1e-3, 1.5).unwrap(),
        StepMethod::Krylov(settings),
    )
    .with_reference(truth);
    match run_cirgnm(&prob, &cfg, &cfg.u0, stream.exact(), 0, 3) {
        Err(Error::Aborted { iteration, partial, source }) => {
            assert_eq!(iteration, 1);
            assert!(partial.is_empty());
            assert!(matches!(*source, Error::KrylovNotConverged { .. }));
        }
        other => panic!("expected an aborted run, got {other:?}"),
    }
}

#[test]
fn discrepancy_rule_stops_early() {
    let (prob, truth, stream) = setup(1e-3);
    let w = stream.observation(1);
    let base = config(&prob, &truth, RegSchedule::geometric(1e-3, 1.5).unwrap());
    let full = run_cirgnm(&prob, &base, &base.u0, &w, 1, 40).unwrap();
    let rule = StopRule::discrepancy(1.5, 1e-3).unwrap();
    let stopped = run_cirgnm(&prob, &base.clone().with_stop(rule), &base.u0, &w, 1, 40).unwrap();
    assert!(stopped.len() < full.len());
    let last = stopped.records.last().unwrap();
    assert!(last.residual_norm <= 1.5e-3);
    assert!(stopped.records[..stopped.len() - 1].iter().all(|r| r.residual_norm > 1.5e-3));
}

#[test]
fn krylov_step_is_stationary() {
    let (prob, _, stream) = setup(1e-3);
    let g = prob.grid();
    let u_n = ParamField::from_fn(g, |x, y| 0.3 + x * y);
    let anchor = ParamField::constant(g, 0.1);
    let w = stream.observation(2);
    let alpha = 1e-3;
    let settings = KrylovSettings::default();
    let u = gn_step_identity(&prob, &u_n, &anchor, &w, alpha, settings).unwrap();
    let lin = prob.linearize(u_n.values()).unwrap();
    let delta: Vec<f64> = u.values().iter().zip(u_n.values()).map(|(a, b)| a - b).collect();
    let jd = lin.deriv(&delta).unwrap();
    let r: Vec<f64> = (0..g.len()).map(|k| lin.value()[k] + jd[k] - w.values()[k]).collect();
    let mut grad = lin.adjoint(&r).unwrap();
    for k in 0..g.len() {
        grad[k] += alpha * (u.values()[k] - anchor.values()[k]);
    }
    let r0: Vec<f64> = (0..g.len()).map(|k| w.values()[k] - lin.value()[k]).collect();
    let mut rhs = lin.adjoint(&r0).unwrap();
    for k in 0..g.len() {
        rhs[k] -= alpha * (u_n.values()[k] - anchor.values()[k]);
    }
    assert!(g.inner(&grad, &grad).sqrt() <= 10.0 * settings.tol * g.inner(&rhs, &rhs).sqrt());
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let (prob, truth, stream) = setup(1e-3);
    let cfg = config(&prob, &truth, RegSchedule::power(1e-3, 1.2).unwrap());
    let a = run_hirgnm(&prob, &cfg, stream.clone(), 5, 3, 1.5).unwrap();
    let b = run_hirgnm(&prob, &cfg, stream, 5, 3, 1.5).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}
