use infmodel::dynamics::{
    fit_log_slope, macro_discrepancies, simulate, step_euler, SimOptions, Snapshots,
};
use infmodel::macroscale::MacroField;
use infmodel::steady::{solve_steady, SteadyOptions};
use infmodel::transport::{HasQuantiles, DEFAULT_K};
use infmodel::{Density, Grid, ModelParams, ReproPlan, SelectionFn};

fn quiet() -> SimOptions {
    SimOptions {
        snapshots: Snapshots::None,
        stop_tol: None,
        ..Default::default()
    }
}

#[test]
fn neutral_dynamics_approach_gaussian_monotonically() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let params = ModelParams::new(0.0, 1.0, SelectionFn::bimodal(), 0.05, 20.0).unwrap();
    let n0 = Density::gaussian_mixture(g, &[(0.5, -3.0, 0.5), (0.5, 2.0, 1.0)]).unwrap();
    let z0 = n0.mean();
    let opts = SimOptions {
        reference: Some(Density::gaussian(g, z0, 2.0).unwrap()),
        ..quiet()
    };
    let rec = simulate(&n0, &params, &plan, &opts).unwrap();
    let w = rec.w2_to_reference.unwrap();
    assert!(w.windows(2).all(|p| p[1] <= p[0] + 1e-12), "{w:?}");
    assert!(*w.last().unwrap() < 0.05 * w[0]);
    assert!(rec.z.iter().all(|z| (z - z0).abs() < 1e-8));
}

#[test]
fn strong_selection_reaches_both_optima() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let params = ModelParams::new(1.0, 1.0, SelectionFn::bimodal(), 0.05, 60.0).unwrap();
    for (z0, target) in [(-10.0, -5.0), (10.0, 5.0)] {
        let n0 = Density::gaussian(g, z0, 2.0).unwrap();
        let rec = simulate(&n0, &params, &plan, &SimOptions::default()).unwrap();
        assert!((rec.terminal_z() - target).abs() < 0.1, "{z0}: {}", rec.terminal_z());
        assert!(rec.stopped_early);
    }
}

#[test]
fn trajectory_bounds_hold() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let a = SelectionFn::bimodal_truncated();
    let params = ModelParams::new(0.5, 1.0, a.clone(), 0.05, 40.0).unwrap();
    let z0 = -8.0;
    let n0 = Density::gaussian_mixture(g, &[(0.7, -9.0, 1.0), (0.3, z0 + 2.1, 3.0)]).unwrap();
    let rec = simulate(&n0, &params, &plan, &quiet()).unwrap();
    let bound = rec.z[0].abs().max(a.support_radius().unwrap()) + 0.1;
    assert!(rec.z.iter().all(|z| z.abs() <= bound));
    let m2 = rec.second_moment[0];
    assert!(rec.second_moment.iter().all(|m| *m <= 2.0 * m2 + 4.0));
    assert!(rec.mass_drift.iter().all(|d| *d < 1e-6));
}

#[test]
fn euler_error_is_first_order() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let n0 = Density::gaussian(g, -2.0, 2.0).unwrap();
    let terminal = |dt: f64| {
        let params = ModelParams::new(1.0, 1.0, SelectionFn::bimodal(), dt, 4.0).unwrap();
        let opts = SimOptions { record_every: 1, ..quiet() };
        simulate(&n0, &params, &plan, &opts).unwrap().terminal_z()
    };
    let (z1, z2, z3) = (terminal(0.1), terminal(0.05), terminal(0.025));
    let ratio = (z1 - z2) / (z2 - z3);
    assert!((ratio - 2.0).abs() < 0.5, "{ratio}");
}

#[test]
fn steady_state_is_stationary_under_dynamics() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let params = ModelParams::new(0.1, 1.0, SelectionFn::bimodal_truncated(), 0.05, 10.0).unwrap();
    let steady = solve_steady(&params, &plan, 5.0, &SteadyOptions::default()).unwrap();
    let q = steady.density.quantiles(DEFAULT_K);
    let one = step_euler(&steady.density, &params, &plan).unwrap().density;
    assert!(one.quantiles(DEFAULT_K).w2(&q) < 1e-6);
    let rec = simulate(&steady.density, &params, &plan, &quiet()).unwrap();
    assert!(rec.final_state.quantiles(DEFAULT_K).w2(&q) <= 1e-6);
}

#[test]
fn pairwise_discrepancies_contract() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let alpha = 0.1;
    let a = SelectionFn::bimodal_truncated();
    let params = ModelParams::new(alpha, 1.0, a.clone(), 0.05, 150.0).unwrap();
    let opts = SimOptions { keep_states: true, ..quiet() };
    let n0 = Density::gaussian_mixture(g, &[(0.6, 3.5, 1.5), (0.4, 5.5, 2.5)]).unwrap();
    let m0 = Density::gaussian_mixture(g, &[(0.6, 3.6, 1.5), (0.4, 5.6, 2.5)]).unwrap();
    let rn = simulate(&n0, &params, &plan, &opts).unwrap();
    let rm = simulate(&m0, &params, &plan, &opts).unwrap();

    let same = macro_discrepancies(&rn, &rn, DEFAULT_K).unwrap();
    assert!(same.composite.iter().all(|c| *c == 0.0));
    assert!(same.tilted_gap.iter().all(|c| *c == 0.0));

    let d = macro_discrepancies(&rn, &rm, DEFAULT_K).unwrap();
    let half = d.times.len() / 2;
    let slope = fit_log_slope(&d.times[half..], &d.composite[half..]).unwrap();
    let field = MacroField::new(1.0, a).unwrap();
    let z_bar = field.find_roots(0.0, 10.0, 1e-10).unwrap().nearest_stable(5.0).unwrap();
    assert!(slope <= alpha * z_bar.f_prime / 2.0, "{slope}");
    let worst = d
        .selection_gap
        .iter()
        .zip(d.mean_gap.iter().zip(&d.recentered))
        .filter(|(_, (z, w))| **z + **w > 1e-12)
        .map(|(i, (z, w))| i / (z + w))
        .fold(0.0, f64::max);
    assert!(worst < 10.0, "{worst}");
}

#[test]
fn misaligned_records_are_rejected() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let n0 = Density::gaussian(g, 0.0, 2.0).unwrap();
    let short = ModelParams::new(0.1, 1.0, SelectionFn::bimodal(), 0.05, 2.0).unwrap();
    let long = ModelParams::new(0.1, 1.0, SelectionFn::bimodal(), 0.05, 3.0).unwrap();
    let keep = SimOptions { keep_states: true, ..quiet() };
    let a = simulate(&n0, &short, &plan, &keep).unwrap();
    let b = simulate(&n0, &long, &plan, &keep).unwrap();
    assert!(macro_discrepancies(&a, &b, DEFAULT_K).is_err());
    let c = simulate(&n0, &short, &plan, &quiet()).unwrap();
    assert!(macro_discrepancies(&a, &c, DEFAULT_K).is_err());
}

#[test]
fn ode_tracks_near_equilibrium_start() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let alpha = 0.1;
    let a = SelectionFn::bimodal_truncated();
    let field = MacroField::new(1.0, a.clone()).unwrap();
    let z_bar = field.find_roots(0.0, 10.0, 1e-10).unwrap().nearest_stable(5.0).unwrap().location;
    let params = ModelParams::new(alpha, 1.0, a, 0.05, 100.0).unwrap();
    let n0 = Density::gaussian(g, z_bar, 2.0).unwrap();
    let rec = simulate(&n0, &params, &plan, &quiet()).unwrap();
    assert!(field.compare_macro(&rec, alpha).unwrap().sup_error <= 0.02);
}

#[test]
fn snapshots_follow_policy() {
    let g = Grid::default();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let params = ModelParams::new(0.1, 1.0, SelectionFn::bimodal(), 0.05, 9.0).unwrap();
    let n0 = Density::gaussian(g, 0.0, 2.0).unwrap();
    let geo = simulate(&n0, &params, &plan, &SimOptions { stop_tol: None, ..Default::default() }).unwrap();
    let times: Vec<f64> = geo.snapshots.iter().map(|s| s.0).collect();
    assert_eq!(times.len(), 4);
    for (t, want) in times.iter().zip([1.0, 2.0, 4.0, 8.0]) {
        assert!((t - want).abs() < 1e-9, "{times:?}");
    }
    let at = SimOptions {
        snapshots: Snapshots::At(vec![0.0, 3.0]),
        stop_tol: None,
        ..Default::default()
    };
    let rec = simulate(&n0, &params, &plan, &at).unwrap();
    assert_eq!(rec.snapshots.len(), 2);
    assert_eq!(rec.snapshots[0].0, 0.0);
}
