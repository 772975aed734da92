use bouss1d::biotsavart::{build_prefix_table, velocity_z};
use bouss1d::build_initial_state;
use bouss1d::diagnostics::{check_gamma_bound, gamma_probes, QUALITY_D_MISMATCH};
use bouss1d::model::{make_params, InitialDataSpec, LagrangianState};
use bouss1d::solver::{refine_markers, run_simulation_observed, RunOptions, StepControl, Termination};

fn phi_at_label(state: &LagrangianState, label: f64) -> f64 {
    let i = state.label.binary_search_by(|l| l.total_cmp(&label)).expect("label kept");
    state.phi[i]
}

#[test]
fn short_desk_run_keeps_pointwise_invariants() {
    let p = make_params(1.2, 0.9, None).unwrap();
    let spec = InitialDataSpec { n_markers: 1024, ..Default::default() };
    let ctrl = StepControl { frame_stride: 4, ..StepControl::for_spec(&spec) };
    let probes = gamma_probes(1.0, spec.l4, 8, 1e-10).unwrap();
    let opts = RunOptions { t_end: 2.5e-3, checkpoints: vec![] };
    let mut frames_seen = 0;
    let out = run_simulation_observed(&p, &spec, &ctrl, &opts, |s, f| {
        frames_seen += 1;
        s.check_invariants().unwrap();
        for i in 0..s.len() {
            // density is carried exactly
            assert_eq!(s.rho[i], spec.rho0(s.label[i]));
        }
        let sup = s.sup_omega();
        let drift = (0..s.len()).map(|i| (s.omega[i] - s.rho[i] * s.forcing[i]).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-8 * (1.0 + sup), "omega drift {drift} at t = {}", s.t);
        assert!(check_gamma_bound(s, &probes).pass, "barrier violated at t = {}", s.t);
        assert_eq!(f.quality & QUALITY_D_MISMATCH, 0, "D inconsistent at t = {}", f.t);
    })
    .unwrap();
    assert_eq!(out.cause, Termination::Horizon);
    assert_eq!(frames_seen, out.frames.len());
    assert!(out.frames.windows(2).all(|w| w[0].t < w[1].t && w[0].psi <= w[1].psi));
    assert!(out.frames.windows(2).all(|w| w[0].i_omega <= w[1].i_omega && w[0].i_dxu <= w[1].i_dxu));
}

#[test]
fn sign_definite_trajectories_drift_outward() {
    let p = make_params(1.0, 1.0, None).unwrap();
    let spec = InitialDataSpec { n_markers: 512, ..Default::default() };
    let initial = build_initial_state(&spec, &p).unwrap();
    let ctrl = StepControl { frame_stride: 2, ..StepControl::for_spec(&spec) };
    let opts = RunOptions { t_end: 2.5e-3, checkpoints: vec![] };
    let mut previous: Option<LagrangianState> = None;
    run_simulation_observed(&p, &spec, &ctrl, &opts, |s, _| {
        if let Some(prev) = &previous {
            for &l in initial.label.iter().step_by(7) {
                assert!(phi_at_label(s, l) >= phi_at_label(prev, l), "label {l} moved inward");
            }
        }
        previous = Some(s.clone());
    })
    .unwrap();
}

#[test]
fn refinement_reduces_velocity_error() {
    let p = make_params(1.2, 0.9, None).unwrap();
    let phi = |l: f64| l + 0.05 * (0.7 * l).sin();
    let w = |l: f64| 1.0 + 0.5 * (0.4 * l).cos();
    let fill = |s: &mut LagrangianState| {
        for i in 0..s.len() {
            s.phi[i] = phi(s.label[i]);
            s.forcing[i] = w(s.label[i]);
            s.omega[i] = s.rho[i] * s.forcing[i];
        }
    };
    let coarse_spec = InitialDataSpec { n_markers: 256, ..Default::default() };
    let mut coarse = build_initial_state(&coarse_spec, &p).unwrap();
    fill(&mut coarse);
    let fine_spec = InitialDataSpec { n_markers: 16 * 256, ..Default::default() };
    let mut reference = build_initial_state(&fine_spec, &p).unwrap();
    fill(&mut reference);
    let all = StepControl { h_max: 1e-9, max_markers: usize::MAX, ..StepControl::for_spec(&coarse_spec) };
    let refined = refine_markers(&coarse, &all, &coarse_spec);
    assert_eq!(refined.len(), 2 * coarse.len() - 1);

    let tables = [&coarse, &refined, &reference].map(|s| build_prefix_table(s).unwrap());
    let (mut e_coarse, mut e_refined) = (0.0f64, 0.0f64);
    for k in 0..400 {
        let z = 0.8 + 13.0 * (k as f64 + 0.37) / 400.0;
        let truth = velocity_z(z, &tables[2], &p);
        e_coarse = e_coarse.max((velocity_z(z, &tables[0], &p) - truth).abs());
        e_refined = e_refined.max((velocity_z(z, &tables[1], &p) - truth).abs());
    }
    assert!(e_coarse >= 3.0 * e_refined, "coarse {e_coarse:e}, refined {e_refined:e}");
}
