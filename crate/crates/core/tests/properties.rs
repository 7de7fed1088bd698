use std::sync::Arc;

use proptest::prelude::*;

use hjb_transmission::geometry::{Grid, GridFunction};
use hjb_transmission::operators::{FirstOrderOperator, SecondOrderOperator};
use hjb_transmission::regularize::{inf_convolution, sup_convolution};
use hjb_transmission::scheme::{solve, SolverConfig, TransmissionProblem};
use hjb_transmission::verifier::{verify, CheckRule};

fn line_problem(alpha: f64, rhs: f64, h: f64) -> TransmissionProblem {
    let grid = Arc::new(Grid::line(-1.0, 1.0, 0.0, h).unwrap());
    TransmissionProblem::new(
        grid,
        FirstOrderOperator::eikonal(1.0),
        SecondOrderOperator::half_laplacian(rhs),
        move |x| if x[0] > 0.0 { alpha } else { 0.0 },
        0.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn larger_tolerance_never_flips_pass_to_fail(
        a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.0f64..1.0, k in 0usize..3,
    ) {
        let h = [0.02, 0.01, 0.005][k];
        let p = line_problem(1.0, 0.0, h);
        let u = GridFunction::from_fn(p.grid.clone(), |x| a * x[0] + b * x[0] * x[0] + c).unwrap();
        let mut passed = false;
        for tol in [h, 10.0 * h, 100.0 * h, 1000.0 * h] {
            let pass = verify(&u, &p, CheckRule::Strong, tol).unwrap().pass;
            prop_assert!(pass || !passed);
            passed = pass;
        }
    }

    #[test]
    fn steep_smooth_fields_are_rejected(
        amp in 2.0f64..5.0, freq in 0.5f64..3.0, phase in 0.0f64..6.3,
    ) {
        let h = 0.01;
        let p = line_problem(1.0, 1.0, h);
        let u = GridFunction::from_fn(p.grid.clone(), |x| amp * x[0] + 0.1 * (freq * x[0] + phase).sin()).unwrap();
        prop_assert!(!verify(&u, &p, CheckRule::Strong, 10.0 * h).unwrap().pass);
    }

    #[test]
    fn solver_output_passes_its_own_verifier(alpha in -2.0f64..3.0, rhs in 0.0f64..2.0) {
        let h = 0.02;
        let p = line_problem(alpha, rhs, h);
        let (u, d) = solve(&p, &SolverConfig::default()).unwrap();
        prop_assert!(d.converged);
        prop_assert!(verify(&u, &p, CheckRule::Strong, 10.0 * h).unwrap().pass);
    }

    #[test]
    fn convolutions_commute_with_constants(shift in -2.0f64..2.0, eps in 0.02f64..0.2, w in 1.0f64..6.0) {
        let grid = Arc::new(Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.05).unwrap());
        let u = GridFunction::from_fn(grid.clone(), |x| (w * x[0]).sin() * 0.3 + x[1]).unwrap();
        let v = GridFunction::from_fn(grid, |x| (w * x[0]).sin() * 0.3 + x[1] + shift).unwrap();
        for (a, b) in [
            (sup_convolution(&u, eps).unwrap(), sup_convolution(&v, eps).unwrap()),
            (inf_convolution(&u, eps).unwrap(), inf_convolution(&v, eps).unwrap()),
        ] {
            for i in a.nodes().filter(|&i| b.inside[i]) {
                prop_assert!((b.values[i] - a.values[i] - shift).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn sup_and_inf_convolutions_bracket_the_field() {
    let grid = Arc::new(Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.05).unwrap());
    let u = GridFunction::from_fn(grid, |x| (x[0] * 3.0).cos() - x[1].abs()).unwrap();
    let sup = sup_convolution(&u, 0.05).unwrap();
    let inf = inf_convolution(&u, 0.05).unwrap();
    for i in sup.nodes() {
        assert!(sup.values[i] >= u.value(i));
    }
    for i in inf.nodes() {
        assert!(inf.values[i] <= u.value(i));
    }
}
