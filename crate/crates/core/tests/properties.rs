use bouss1d::biotsavart::{stretch_rate, velocity_x, velocity_z, PrefixTable, Weight};
use bouss1d::model::{frame_transform, make_params, velocity_x_to_z, velocity_z_to_x, Direction, InitialDataSpec};
use bouss1d::solver::{refine_markers, StepControl};
use bouss1d::{build_initial_state, ModelParams};
use proptest::prelude::*;

/// Nonnegative sum of Gaussian bumps.
#[derive(Debug, Clone)]
struct Bumps(Vec<(f64, f64, f64)>);

impl Bumps {
    fn at(&self, y: f64) -> f64 {
        self.0.iter().map(|&(a, c, s)| a * (-(y - c).powi(2) / (2.0 * s * s)).exp()).sum()
    }
}

fn bumps() -> impl Strategy<Value = Bumps> {
    prop::collection::vec((0.1f64..3.0, 1.0f64..11.0, 0.4f64..2.0), 1..4).prop_map(Bumps)
}

fn params() -> impl Strategy<Value = ModelParams> {
    (1.0f64..1.8, 0.6f64..1.0).prop_map(|(b1, b2)| make_params(b1, b2, None).unwrap())
}

fn z_table(field: &Bumps, n: usize, hi: f64) -> PrefixTable {
    let nodes: Vec<f64> = (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect();
    let values = nodes.iter().map(|&z| field.at(z)).collect();
    PrefixTable::from_nodes(nodes, values, Weight::Unit).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stretch_rate_is_velocity_slope(field in bumps(), p in params(), z in 0.5f64..11.0) {
        let table = z_table(&field, 4001, 13.0);
        let h = 1e-5;
        let fd = (velocity_z(z + h, &table, &p) - velocity_z(z - h, &table, &p)) / (2.0 * h);
        let k = stretch_rate(z, &table, &p);
        let scale = k.abs().max(1e-3 * table.values().iter().fold(0.0f64, |a, &b| a.max(b)));
        prop_assert!((fd - k).abs() <= 1e-6 * scale, "fd {} vs K {}", fd, k);
    }

    #[test]
    fn sign_definite_velocity_is_outward(field in bumps(), z in 0.0f64..12.0) {
        let p = make_params(1.0, 1.0, None).unwrap();
        let table = z_table(&field, 801, 13.0);
        prop_assert!(velocity_z(z, &table, &p) >= 0.0);
    }

    #[test]
    fn frame_maps_round_trip(z in 0.0f64..40.0, u in -5.0f64..5.0) {
        let x = frame_transform(z, Direction::ZToX).unwrap();
        let back = frame_transform(x, Direction::XToZ).unwrap();
        prop_assert!((back - z).abs() <= 1e-13 * z.max(1.0));
        let uz = velocity_x_to_z(u, x);
        prop_assert!((velocity_z_to_x(uz, z) - u).abs() <= 1e-13 * u.abs().max(1e-300));
    }

    #[test]
    fn make_params_is_idempotent(b1 in 1.0f64..3.0, b2 in 0.05f64..1.0) {
        let p = make_params(b1, b2, None).unwrap();
        let q = make_params(p.beta1, p.beta2, p.epsilon).unwrap();
        prop_assert_eq!(p, q);
        prop_assert_eq!(p.blow_up_range, b1 < 2.0 * b2);
        prop_assert_eq!(p.epsilon.is_some(), p.blow_up_range);
    }

    #[test]
    fn cumulative_integrals_add_up(field in bumps(), a in 0.0f64..6.0, b in 6.0f64..12.0, c in 0.0f64..1.0) {
        let table = z_table(&field, 300, 13.0);
        let m = a + c * (b - a);
        let whole = table.integral(a, b);
        prop_assert!((whole - table.integral(a, m) - table.integral(m, b)).abs() <= 1e-12 * whole.abs().max(1.0));
        prop_assert!(whole >= 0.0);
    }

    #[test]
    fn refinement_keeps_order_and_density(h_max in 0.005f64..0.5, refine_tol in 0.01f64..0.5) {
        let p = make_params(1.2, 0.9, None).unwrap();
        let spec = InitialDataSpec { n_markers: 128, ..Default::default() };
        let mut state = build_initial_state(&spec, &p).unwrap();
        for i in 0..state.len() {
            state.forcing[i] = (0.3 * state.label[i]).exp();
            state.omega[i] = state.rho[i] * state.forcing[i];
        }
        let ctrl = StepControl { h_max, refine_tol, ..StepControl::for_spec(&spec) };
        let fine = refine_markers(&state, &ctrl, &spec);
        fine.check_invariants().unwrap();
        prop_assert!(fine.len() <= ctrl.max_markers.max(state.len()));
        for i in 0..fine.len() {
            prop_assert_eq!(fine.rho[i], spec.rho0(fine.label[i]));
            prop_assert_eq!(fine.omega[i], fine.rho[i] * fine.forcing[i]);
        }
    }
}

#[test]
fn unit_interval_velocity_matches_log_frame() {
    // the same field on matched fine meshes in both frames
    let p = make_params(1.3, 0.8, None).unwrap();
    let field = Bumps(vec![(1.0, 4.0, 1.0), (0.5, 7.5, 0.7)]);
    let n = 200_001;
    let zs: Vec<f64> = (0..n).map(|i| 14.0 * i as f64 / (n - 1) as f64).collect();
    let zt = PrefixTable::from_nodes(zs.clone(), zs.iter().map(|&z| field.at(z)).collect(), Weight::Unit).unwrap();
    let xs: Vec<f64> = zs.iter().rev().map(|&z| (-z).exp()).collect();
    let xv: Vec<f64> = zs.iter().rev().map(|&z| field.at(z)).collect();
    let xt = PrefixTable::from_nodes(xs, xv, Weight::Reciprocal).unwrap();
    for z in [0.3f64, 1.7, 4.2, 8.9, 12.5] {
        let x = (-z).exp();
        let ux = velocity_x(x, &xt, &p).unwrap();
        let expect = -x * velocity_z(z, &zt, &p);
        assert!((ux - expect).abs() <= 1e-8 * expect.abs().max(1e-3 * x), "z = {z}: {ux} vs {expect}");
    }
}
