use crystal_relax::grid::{GridSpec, ScalarField};
use crystal_relax::model::ModelParams;
use crystal_relax::scheme::{
    advance, eval_bar_u, eval_tilde_u, lyapunov_ledger, mass_law_check, step_residual,
};
use crystal_relax::solvers::{apply_p_laplacian_forward, SolverConfig};
use proptest::prelude::*;

fn bump(g: GridSpec, x0: f64, y0: f64, amp: f64) -> ScalarField {
    ScalarField::from_fn(g, |i, j| {
        let (x, y) = g.center(i, j);
        amp * (-((x - x0).powi(2) + (y - y0).powi(2)) / 0.4).exp()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_respect_step_invariants(
        p in prop::sample::select(vec![1.5, 3.0]),
        beta in prop::sample::select(vec![0.0, 1.0]),
        q in prop::sample::select(vec![0.0, 2.0]),
        x0 in 0.5f64..1.5, y0 in 0.5f64..1.5, amp in 0.2f64..2.0,
    ) {
        let g = GridSpec::with_extent(10, 10, 2.0, 2.0).unwrap();
        let u0 = bump(g, x0, y0, amp);
        let cfg = SolverConfig::default();
        let params = ModelParams::coupled(p, beta, q, 0.05).unwrap();
        let traj = advance(&u0, 0.2, 4, &params, &cfg).map_err(|(_, e)| e).unwrap();
        let params = traj.params;

        for w in traj.states.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            // Independently re-evaluated residuals of both equations.
            let (z, v) = step_residual(&cur.u, &prev.u, &params);
            prop_assert!(z.l2_norm() <= cfg.fp_tol * prev.u.l2_norm());
            let a = apply_p_laplacian_forward(&cur.u, &params);
            prop_assert!(a.sub(&cur.v).l2_norm() <= cfg.fp_tol * v.l2_norm().max(1e-300));

            let mass_prev = prev.diagnostics.mass;
            let defect = (cur.diagnostics.mass * params.mass_factor() - mass_prev).abs();
            prop_assert!(defect <= 100.0 * cfg.fp_tol * mass_prev.abs());
        }

        let ledger = lyapunov_ledger(&traj);
        prop_assert!(ledger.violations(1e-9 * ledger.initial).is_empty(), "{:?}", ledger.slacks);
        prop_assert!(mass_law_check(&traj).max_relative() <= 1e-8);

        for s in &traj.states {
            prop_assert_eq!(&eval_tilde_u(&traj, s.t).unwrap(), &s.u);
            prop_assert_eq!(&eval_bar_u(&traj, s.t).unwrap(), &s.u);
        }
    }
}
