//! Convergence tables and the named validation suites.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::{solve_1d_family, solve_annulus, ClosedForm1D};
use crate::config::{BoundarySpec, ExperimentConfig, GeometrySpec, OperatorSpec, SecondOrderSpec};
use crate::error::{Error, Result};
use crate::geometry::{Grid, GridFunction, Region, Side};
use crate::montecarlo::{estimate_value, McDomain, PathConfig, Phase, Policy};
use crate::operators::{FirstOrderOperator, SecondOrderOperator};
use crate::regularize::{inf_convolution, semiconvexity_defect, sup_convolution};
use crate::scheme::{solve, InterfaceRule, SolverConfig, TransmissionProblem};
use crate::verifier::{check_comparison, verify, CheckRule, NodeClass};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rule: InterfaceRule,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// CSV with columns `h,error[,order]`; the order column is omitted for a single row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let with_order = self.rows.len() > 1;
        if with_order {
            w.write_record(["h", "error", "order"])?;
        } else {
            w.write_record(["h", "error"])?;
        }
        for row in &self.rows {
            let mut rec = vec![format!("{:?}", row.h), format!("{:?}", row.error)];
            if with_order {
                rec.push(row.order.map(|o| format!("{o:?}")).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn min_order(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order).reduce(f64::min)
    }
}

/// L∞ error against the closed-form oracle for each spacing in `hs`.
pub fn run_convergence(config: &ExperimentConfig, hs: &[f64]) -> Result<ConvergenceTable> {
    if hs.is_empty() {
        return Err(Error::config("empty spacing list"));
    }
    let oracle = config.oracle()?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(hs.len());
    for &h in hs {
        let mut cfg = config.clone();
        cfg.geometry.set_h(h);
        let problem = cfg.build_problem()?;
        let (u, _) = solve(&problem, &cfg.solver)?;
        let grid = &problem.grid;
        let mut error: f64 = 0.0;
        for (i, v) in u.active() {
            error = error.max((v - oracle(&grid.point(i))?).abs());
        }
        let order = rows
            .last()
            .filter(|prev| prev.error > 0.0 && error > 0.0)
            .map(|prev| (prev.error / error).ln() / (prev.h / h).ln());
        rows.push(ConvergenceRow { h, error, order });
    }
    Ok(ConvergenceTable {
        rule: config.solver.rule,
        rows,
    })
}

pub const SUITES: [&str; 6] = ["oracles1d", "annulus", "strong-vs-relaxed", "comparison", "regularize", "mc"];

#[derive(Clone, Copy, Debug, Default)]
pub struct SuiteOptions {
    /// Reduced Monte Carlo sample size (10⁴ paths).
    pub fast: bool,
    /// Perturb the super-solution in the comparison suite.
    pub inject_fault: bool,
    /// Run independent suites concurrently.
    pub concurrent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
            detail: None,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            pass: value >= threshold,
            value,
            threshold,
            detail: None,
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub elapsed_seconds: f64,
}

pub fn run_suite(name: &str, options: SuiteOptions) -> Result<SuiteReport> {
    let start = Instant::now();
    let checks = match name {
        "oracles1d" => suite_oracles1d()?,
        "annulus" => suite_annulus()?,
        "strong-vs-relaxed" => suite_strong_vs_relaxed()?,
        "comparison" => suite_comparison(options.inject_fault)?,
        "regularize" => suite_regularize()?,
        "mc" => suite_mc(options.fast)?,
        other => {
            return Err(Error::usage(format!(
                "unknown suite `{other}`; expected one of {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every suite, sequentially unless `options.concurrent`.
pub fn run_all(options: SuiteOptions) -> Result<Vec<SuiteReport>> {
    if options.concurrent {
        SUITES.par_iter().map(|s| run_suite(s, options)).collect()
    } else {
        SUITES.iter().map(|s| run_suite(s, options)).collect()
    }
}

const SPACINGS: [f64; 3] = [1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0];

fn family_problem(alpha: f64, h: f64) -> Result<TransmissionProblem> {
    let grid = Arc::new(Grid::line(-1.0, 1.0, 0.0, h)?);
    TransmissionProblem::new(
        grid,
        FirstOrderOperator::eikonal(1.0),
        SecondOrderOperator::half_laplacian(0.0),
        move |x| if x[0] > 0.0 { alpha } else { 0.0 },
        0.0,
    )
}

fn radial_problem(n: u32, r: f64, rho: f64, big_r: f64, h: f64) -> Result<TransmissionProblem> {
    let grid = Arc::new(Grid::line_oriented(r, big_r, rho, h, Side::Upper)?);
    TransmissionProblem::new(
        grid,
        FirstOrderOperator::eikonal(1.0),
        SecondOrderOperator::radial_half_laplacian(n, 1.0),
        |_| 0.0,
        0.0,
    )
}

fn max_error(u: &GridFunction, exact: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let grid = u.grid();
    let mut e: f64 = 0.0;
    for (i, v) in u.active() {
        e = e.max((v - exact(&grid.point(i))?).abs());
    }
    Ok(e)
}

fn suite_oracles1d() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let h = 1.0 / 200.0;
    for alpha in [2.0, 1.0, -1.0] {
        let p = family_problem(alpha, h)?;
        let sol = solve_1d_family(alpha)
            .solution()
            .ok_or_else(|| Error::Internal(format!("α = {alpha} should be solvable")))?;
        let t = Instant::now();
        let (u, _) = solve(&p, &SolverConfig::default())?;
        let secs = t.elapsed().as_secs_f64();
        checks.push(Check::at_most(
            format!("alpha={alpha} error"),
            max_error(&u, |x| sol.eval(x[0]))?,
            2.0 * h,
        ));
        checks.push(Check::at_most(format!("alpha={alpha} runtime_seconds"), secs, 1.0));
    }
    for h in SPACINGS {
        let p = family_problem(-3.0, h)?;
        for beta in [-1.0, -0.75, -0.5, -0.25, 0.0] {
            let c = ClosedForm1D::candidate(-3.0, beta);
            let u = GridFunction::from_fn(p.grid.clone(), |x| c.eval_candidate(x[0]).unwrap_or(f64::NAN))?;
            let rep = verify(&u, &p, CheckRule::Strong, 10.0 * h)?;
            let r = rep
                .violations
                .iter()
                .filter(|v| v.region == Region::Interface && v.class == NodeClass::SubViolation)
                .map(|v| v.residual)
                .fold(0.0, f64::max);
            checks.push(Check::at_least(format!("alpha=-3 beta={beta} h={h} interface_sub_residual"), r, 0.5));
        }
    }
    Ok(checks)
}

fn suite_annulus() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let h = 1.0 / 200.0;
    for (n, rho) in [(2, 1.0), (3, 1.0)] {
        let exact = solve_annulus(n, 0.5, 2.0, rho)?;
        let worst = exact.residuals().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        checks.push(Check::at_most(format!("n={n} constraint_residuals"), worst, 1e-12));
        let p = radial_problem(n, 0.5, rho, 2.0, h)?;
        let (u, _) = solve(&p, &SolverConfig::default())?;
        checks.push(Check::at_most(
            format!("n={n} radial error"),
            max_error(&u, |x| exact.eval(x[0]))?,
            5.0 * h,
        ));
        let field = GridFunction::from_fn(p.grid.clone(), |x| exact.eval(x[0]).unwrap_or(f64::NAN))?;
        let rep = verify(&field, &p, CheckRule::Strong, 10.0 * h)?;
        checks.push(
            Check::at_most(
                format!("n={n} closed form verify violations"),
                rep.violations.len() as f64,
                0.0,
            )
            .detail(format!("{:?}", rep.worst)),
        );
    }
    let exact = solve_annulus(2, 0.5, 2.0, 1.0)?;
    let grid = Arc::new(Grid::annulus(0.5, 1.0, 2.0, 0.025)?);
    let p = TransmissionProblem::new(
        grid.clone(),
        FirstOrderOperator::eikonal(1.0),
        SecondOrderOperator::half_laplacian(1.0),
        |x| exact.eval_point(x).unwrap_or(0.0),
        0.0,
    )?;
    let (u, _) = solve(&p, &SolverConfig::default())?;
    checks.push(
        Check::at_most("2d error", max_error(&u, |x| exact.eval_point(x))?, 0.05)
            .detail(format!("grid {:?}", grid.shape())),
    );
    Ok(checks)
}

fn suite_strong_vs_relaxed() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let relaxed = SolverConfig::with_rule(InterfaceRule::RelaxedMin);
    let strong = SolverConfig::with_rule(InterfaceRule::StrongEikonal);
    for h in SPACINGS {
        let mut problems = Vec::new();
        for alpha in [2.0, 1.0, -1.0] {
            problems.push((format!("alpha={alpha} h={h}"), family_problem(alpha, h)?));
        }
        problems.push((format!("annulus h={h}"), radial_problem(2, 0.5, 1.0, 2.0, h)?));
        for (name, p) in problems {
            let (a, _) = solve(&p, &relaxed)?;
            let (b, _) = solve(&p, &strong)?;
            checks.push(Check::at_most(format!("{name} difference"), a.max_abs_diff(&b), 2.0 * h));
        }
    }
    Ok(checks)
}

/// Sub/super pairs: `u` solves the problem with gap `η` and data `g`,
/// `v` solves the gap-free problem with data `g + δ`, `δ ≥ 0`.
fn suite_comparison(inject_fault: bool) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut located = None;
    let mut failures = 0usize;
    let pairs = 20;
    for k in 0..pairs {
        let eta = rng.random_range(0.05..0.5);
        let h = 0.05;
        let two_d = k % 2 == 1;
        let grid = Arc::new(if two_d {
            Grid::slab((0.0, 1.0), (-0.5, 0.5), 0.0, h)?
        } else {
            Grid::line(-1.0, 1.0, 0.0, h)?
        });
        let slope = 1.0 - eta;
        let c0 = rng.random_range(0.0..1.0);
        let c1 = rng.random_range(-0.5 * slope..0.5 * slope);
        let c2 = rng.random_range(-0.5 * slope..0.5 * slope);
        let lift = rng.random_range(0.0..0.5);
        let rhs = rng.random_range(0.0..1.0);
        let g = move |x: &[f64]| c0 + c1 * x[0] + x.get(1).map_or(0.0, |y| c2 * y);
        let sub = TransmissionProblem::new(
            grid.clone(),
            FirstOrderOperator::eikonal(1.0),
            SecondOrderOperator::half_laplacian(rhs),
            g,
            eta,
        )?;
        let sup = TransmissionProblem::new(
            grid.clone(),
            FirstOrderOperator::eikonal(1.0),
            SecondOrderOperator::half_laplacian(rhs),
            move |x| g(x) + lift,
            0.0,
        )?;
        let (u, _) = solve(&sub, &SolverConfig::default())?;
        let (mut v, _) = solve(&sup, &SolverConfig::default())?;
        if inject_fault && k == 0 {
            let node = grid.nodes(Region::Eikonal).nth(grid.count(Region::Eikonal) / 2).unwrap_or(0);
            v.values_mut()[node] -= 1.0;
        }
        let rep = check_comparison(&u, &v, &sub, 1e-8, 10.0 * h)?;
        if rep.worst_margin > worst {
            worst = rep.worst_margin;
        }
        if !rep.pass {
            failures += 1;
            if located.is_none() {
                located = rep.worst_point.clone().map(|pt| (k, pt));
            }
        }
    }
    let mut check = Check::at_most("ordering violations", failures as f64, 0.0);
    check.detail = Some(match located {
        Some((k, pt)) => format!("pair {k}: u > v at {pt:?}, margin {worst:e}"),
        None => format!("{pairs} pairs, largest u - v = {worst:e}"),
    });
    Ok(vec![check])
}

fn suite_regularize() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let h = 0.02;
    let grid = Arc::new(Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, h)?);
    let problem = TransmissionProblem::new(
        grid.clone(),
        FirstOrderOperator::eikonal(1.0),
        SecondOrderOperator::half_laplacian(1.0),
        |_| 0.0,
        0.0,
    )?;
    let (solved, _) = solve(&problem, &SolverConfig::default())?;
    let fields: Vec<(&str, GridFunction, f64)> = vec![
        ("abs", GridFunction::from_fn(grid.clone(), |x| x[0].abs())?, 1.0),
        (
            "wave",
            GridFunction::from_fn(grid.clone(), |x| 0.3 * (3.0 * x[0]).sin() + 0.5 * x[1])?,
            0.9,
        ),
        ("cone", GridFunction::from_fn(grid.clone(), |x| 1.0 - (x[0].abs() + x[1].abs()))?, 1.0),
    ];
    for (name, u, lip) in fields {
        let mut previous: Option<crate::regularize::Regularized> = None;
        for eps in [0.01, 0.02, 0.05] {
            let w = sup_convolution(&u, eps)?;
            checks.push(Check::at_least(
                format!("{name} eps={eps} semiconvexity_defect"),
                semiconvexity_defect(&w),
                -10.0 * h,
            ));
            checks.push(Check::at_most(
                format!("{name} eps={eps} deviation"),
                w.max_deviation(),
                lip * lip * eps / 2.0 + 2.0 * h,
            ));
            let down = inf_convolution(&u, eps)?;
            checks.push(Check::at_most(format!("{name} eps={eps} inf_deviation"), down.max_deviation(), lip * lip * eps / 2.0 + 2.0 * h));
            if let Some(prev) = previous {
                let bad = w.nodes().filter(|&i| !(prev.values[i] <= w.values[i] + 1e-15)).count();
                checks.push(Check::at_most(format!("{name} eps={eps} monotone"), bad as f64, 0.0));
            }
            previous = Some(w);
        }
    }
    let w = sup_convolution(&solved, 0.02)?;
    checks.push(Check::at_least(
        "solved slab semiconvexity_defect",
        semiconvexity_defect(&w),
        -10.0 * h,
    ));
    Ok(checks)
}

fn suite_mc(fast: bool) -> Result<Vec<Check>> {
    let paths = if fast { 10_000 } else { 100_000 };
    let cfg = PathConfig {
        paths,
        dt: 1e-4,
        ..Default::default()
    };
    let mut checks = Vec::new();
    let brownian = McDomain::Interval {
        a: 0.0,
        b: 1.0,
        split: 0.0,
        lower: Phase::Brownian,
        upper: Phase::Brownian,
    };
    let e = estimate_value(&brownian, &Policy::NearestExit, &[0.5], &cfg)?;
    checks.push(
        Check::at_most("brownian |mean - 0.25|", (e.mean - 0.25).abs(), 3.0 * e.std_error)
            .detail(format!("mean {} se {}", e.mean, e.std_error)),
    );

    let config = ExperimentConfig {
        geometry: GeometrySpec::Interval {
            a: -1.0,
            b: 1.0,
            interface: 0.0,
            h: 1.0 / 200.0,
            eikonal_side: Default::default(),
        },
        operators: OperatorSpec {
            second_order: SecondOrderSpec::HalfNegLaplacian {
                rhs: 1.0,
                lambda: 0.5,
                lambda_bar: 0.5,
            },
            ..Default::default()
        },
        boundary: BoundarySpec::Constant { value: 0.0 },
        gap: 0.0,
        solver: SolverConfig::default(),
        verifier: Default::default(),
        outputs: Default::default(),
    };
    let problem = config.build_problem()?;
    let (u, _) = solve(&problem, &config.solver)?;
    let x0 = [0.5];
    let pde = problem
        .grid
        .interpolate(u.values(), &x0)
        .ok_or_else(|| Error::Internal("x0 outside grid".into()))?;
    let domain = config.geometry.mc_domain();
    let e = estimate_value(&domain, &Policy::SteepestDescent(u.clone()), &x0, &cfg)?;
    checks.push(
        Check::at_most("steepest |mean - pde|", (e.mean - pde).abs(), 3.0 * e.std_error)
            .detail(format!("mean {} se {} pde {pde}", e.mean, e.std_error)),
    );
    let bad = estimate_value(&domain, &Policy::constant(vec![1.0]), &x0, &cfg)?;
    checks.push(
        Check::at_least("misdirected mean - pde", bad.mean - pde, 3.0 * bad.std_error)
            .detail(format!("mean {} se {}", bad.mean, bad.std_error)),
    );
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(alpha: f64, rule: InterfaceRule) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_json(&format!(
            r#"{{"geometry": {{"kind": "interval", "a": -1, "b": 1, "interface": 0, "h": 0.02}},
                "operators": {{"first_order": {{"form": "eikonal"}},
                               "second_order": {{"form": "half_neg_laplacian", "rhs": 0}}}},
                "boundary": {{"kind": "oracle1d", "alpha": {alpha}}}}}"#
        ))
        .unwrap();
        cfg.solver.rule = rule;
        cfg
    }

    #[test]
    fn relaxed_family_converges_first_order() {
        let t = run_convergence(&model(1.0, InterfaceRule::RelaxedMin), &SPACINGS).unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].error < w[0].error), "{t:?}");
        assert!(t.min_order().unwrap() >= 0.9, "{t:?}");
    }

    #[test]
    fn eikonal_square_converges() {
        let cfg = ExperimentConfig::from_json(
            r#"{"geometry": {"kind": "square", "x": [-1, 1], "y": [-1, 1], "h": 0.1}}"#,
        )
        .unwrap();
        let t = run_convergence(&cfg, &[0.1, 0.05, 0.025]).unwrap();
        assert!(t.min_order().unwrap() >= 0.9, "{t:?}");
    }

    #[test]
    fn single_spacing_has_no_order_column() {
        let t = run_convergence(&model(2.0, InterfaceRule::StrongEikonal), &[0.02]).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next(), Some("h,error"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn missing_oracle_is_config_error() {
        let cfg = ExperimentConfig::from_json(
            r#"{"geometry": {"kind": "slab", "x": [0, 1], "y": [-1, 1], "interface": 0, "h": 0.1}}"#,
        )
        .unwrap();
        assert!(matches!(run_convergence(&cfg, &[0.1]), Err(Error::Config(_))));
        assert!(matches!(run_convergence(&model(-3.0, InterfaceRule::RelaxedMin), &[0.1]), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(run_suite("nope", SuiteOptions::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn comparison_fault_is_located() {
        let ok = run_suite("comparison", SuiteOptions::default()).unwrap();
        assert!(ok.pass, "{ok:?}");
        let bad = run_suite(
            "comparison",
            SuiteOptions {
                inject_fault: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!bad.pass);
        assert!(bad.checks[0].detail.as_ref().unwrap().contains("pair 0"));
    }
}
