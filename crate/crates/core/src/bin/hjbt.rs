use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hjb_transmission::closed_forms::{binding_rho, solve_1d_family, solve_annulus, Family1D};
use hjb_transmission::config::{ExperimentConfig, TolSpec};
use hjb_transmission::experiments::{run_all, run_convergence, run_suite, SuiteOptions, SuiteReport};
use hjb_transmission::geometry::{Grid, GridFunction};
use hjb_transmission::montecarlo::{estimate_value, PathConfig, Policy};
use hjb_transmission::regularize::{inf_convolution, semiconvexity_defect, sup_convolution, Mode};
use hjb_transmission::scheme::{solve, InterfaceRule};
use hjb_transmission::verifier::{verify, CheckRule};
use hjb_transmission::{Error, Result};

/// Transmission HJB solver, verifier and Monte Carlo cross-check.
#[derive(Parser)]
#[command(name = "hjbt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a JSON config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Interface rule: relaxed | strong.
        #[arg(long)]
        rule: Option<String>,
        /// Override the grid spacing.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        gap: Option<f64>,
        /// Solution CSV (stdout if omitted and not set in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Check the discrete viscosity conditions for a solution CSV.
    Verify {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// strong | relaxed.
        #[arg(long)]
        rule: Option<String>,
        /// `auto` (10h) or a number.
        #[arg(long)]
        tol: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Closed-form 1D family sampled on [-1, 1]; columns x,u.
    Oracle1d {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form radial annulus solution; columns s,u.
    Annulus {
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long = "R", default_value_t = 2.0)]
        big_r: f64,
        /// Defaults to the radius where the slope constraint binds.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tangential sup/inf convolution of a solution CSV.
    Regularize {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Sup)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the expected exit time.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyArg::Steepest)]
        policy: PolicyArg,
        /// Required for the steepest-descent policy.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Direction for the fixed policy, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        direction: Option<String>,
        /// Starting point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 50.0)]
        t_max: f64,
        /// Disable the Brownian-bridge crossing correction.
        #[arg(long)]
        no_bridge: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L∞ error and observed order against a closed-form oracle.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Comma separated spacings, e.g. 0.02,0.01,0.005.
        #[arg(long)]
        h: String,
        #[arg(long)]
        rule: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named validation suite (or `all`).
    Suite {
        name: String,
        /// 10⁴ Monte Carlo paths instead of 10⁵.
        #[arg(long)]
        fast: bool,
        /// Perturb the super-solution in the comparison suite.
        #[arg(long)]
        inject_fault: bool,
        /// Run suites concurrently (with `all`).
        #[arg(long)]
        concurrent: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sup,
    Inf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Steepest,
    Fixed,
    Nearest,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("not a number: `{t}`")))
        })
        .collect()
}

fn load_config(path: &Path, rule: Option<&str>, h: Option<f64>, gap: Option<f64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(r) = rule {
        cfg.solver.rule = InterfaceRule::parse(r)?;
    }
    if let Some(h) = h {
        cfg.geometry.set_h(h);
    }
    if let Some(g) = gap {
        cfg.gap = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            config,
            rule,
            h,
            gap,
            out,
            diag,
        } => {
            let cfg = load_config(&config, rule.as_deref(), h, gap)?;
            let problem = cfg.build_problem()?;
            let (u, d) = solve(&problem, &cfg.solver)?;
            let out = out.or(cfg.outputs.solution.clone());
            u.write_csv(sink(out.as_deref())?)?;
            if let Some(path) = diag.or(cfg.outputs.diagnostics.clone()) {
                write_json(Some(&path), &json!({ "config": cfg, "diagnostics": d }))?;
            }
            if !d.converged {
                eprintln!("warning: solver stopped after {} sweeps without converging", d.iterations);
            }
            if let Some(m) = d.boundary_mismatch {
                eprintln!("warning: boundary data exceeds what the eikonal side can attain by {m:e}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            solution,
            config,
            rule,
            tol,
            report,
        } => {
            let cfg = load_config(&config, None, None, None)?;
            let problem = cfg.build_problem()?;
            let u = GridFunction::read_csv(problem.grid.clone(), File::open(&solution)?)?;
            let rule = match rule {
                Some(r) => CheckRule::parse(&r)?,
                None => cfg.verifier.rule,
            };
            let tol_spec = match tol {
                Some(t) => TolSpec::parse(&t)?,
                None => cfg.verifier.tol,
            };
            let tol = tol_spec.resolve(problem.grid.h());
            let rep = verify(&u, &problem, rule, tol)?;
            let summary = json!({
                "config": cfg,
                "solution": solution,
                "pass": rep.pass,
                "tolerance": rep.tolerance,
                "rule": rep.rule,
                "checked_nodes": rep.checked_nodes,
                "violation_count": rep.violations.len(),
                "worst": rep.worst,
                "interface_rules_agree": rep.interface_rules_agree,
                "skipped_interface_nodes": rep.skipped.len(),
                "concave_kinks": rep.concave_kinks.len(),
                "violations": rep.violations,
            });
            write_json(report.or(cfg.outputs.report.clone()).as_deref(), &summary)?;
            eprintln!("{}", if rep.pass { "PASS" } else { "FAIL" });
            Ok(if rep.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Oracle1d { alpha, h, out } => {
            let sol = match solve_1d_family(alpha) {
                Family1D::Solution(s) => s,
                Family1D::NoSolution { alpha } => {
                    return Err(Error::Infeasible(format!(
                        "no solution of the 1D family for α = {alpha} (needs α ≥ -2)"
                    )))
                }
            };
            let grid = Grid::line(-1.0, 1.0, 0.0, h)?;
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            w.write_record(["x", "u"])?;
            for i in 0..grid.len() {
                let x = grid.coord(i, 0);
                w.write_record([format!("{x:?}"), format!("{:?}", sol.eval(x)?)])?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Annulus {
            n,
            r,
            big_r,
            rho,
            h,
            out,
        } => {
            let rho = match rho {
                Some(v) => v,
                None => binding_rho(n, r, big_r)?,
            };
            let sol = solve_annulus(n, r, big_r, rho)?;
            let steps = ((big_r - r) / h).round() as usize;
            if steps < 2 || ((big_r - r) / h - steps as f64).abs() > 1e-9 {
                return Err(Error::Config(format!("h = {h} must divide R - r = {}", big_r - r)));
            }
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            w.write_record(["s", "u"])?;
            for k in 0..=steps {
                let s = if k == steps { big_r } else { r + k as f64 * h };
                w.write_record([format!("{s:?}"), format!("{:?}", sol.eval(s)?)])?;
            }
            w.flush()?;
            let residuals = sol.residuals();
            eprintln!(
                "{}",
                json!({
                    "n": n, "r": r, "rho": rho, "R": big_r, "A": sol.a, "B": sol.b,
                    "slope_at_rho": sol.slope_at_rho(), "lower_slope_ok": sol.lower_slope_ok(),
                    "residuals": residuals,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Regularize {
            solution,
            eps,
            mode,
            out,
        } => {
            let u = GridFunction::read_csv_infer_grid(File::open(&solution)?)?;
            let w = match mode {
                ModeArg::Sup => sup_convolution(&u, eps)?,
                ModeArg::Inf => inf_convolution(&u, eps)?,
            };
            w.to_grid_function().write_csv(sink(out.as_deref())?)?;
            if w.mode == Mode::Sup {
                eprintln!("semiconvexity defect {:e}", semiconvexity_defect(&w));
            }
            eprintln!("max deviation {:e}, window r = {}", w.max_deviation(), w.params.r);
            Ok(ExitCode::SUCCESS)
        }
        Command::Mc {
            config,
            policy,
            solution,
            direction,
            x0,
            paths,
            dt,
            seed,
            t_max,
            no_bridge,
            out,
        } => {
            let cfg = load_config(&config, None, None, None)?;
            let domain = cfg.geometry.mc_domain();
            let x0 = parse_list(&x0)?;
            let policy = match policy {
                PolicyArg::Nearest => Policy::NearestExit,
                PolicyArg::Fixed => {
                    let d = direction.ok_or_else(|| Error::Usage("--direction is required for --policy fixed".into()))?;
                    Policy::constant(parse_list(&d)?)
                }
                PolicyArg::Steepest => {
                    let path = solution
                        .ok_or_else(|| Error::Usage("--solution is required for --policy steepest".into()))?;
                    let grid: Arc<Grid> = Arc::new(cfg.geometry.build()?);
                    Policy::SteepestDescent(GridFunction::read_csv(grid, File::open(path)?)?)
                }
            };
            let pc = PathConfig {
                dt,
                t_max,
                seed,
                paths,
                bridge: !no_bridge,
            };
            let est = estimate_value(&domain, &policy, &x0, &pc)?;
            if est.unreliable {
                eprintln!(
                    "warning: {:.2}% of paths truncated at t_max; estimate unreliable",
                    100.0 * est.truncated_fraction
                );
            }
            if !est.dt_resolves_grid {
                eprintln!("warning: dt exceeds h²/2 for the solution grid");
            }
            write_json(
                out.as_deref(),
                &json!({ "config": cfg, "policy": format!("{policy:?}"), "path_config": pc, "estimate": est }),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence { config, h, rule, out } => {
            let cfg = load_config(&config, rule.as_deref(), None, None)?;
            let hs = parse_list(&h)?;
            let table = run_convergence(&cfg, &hs)?;
            table.write_csv(sink(out.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite {
            name,
            fast,
            inject_fault,
            concurrent,
            out,
        } => {
            let options = SuiteOptions {
                fast,
                inject_fault,
                concurrent,
            };
            let reports: Vec<SuiteReport> = if name == "all" {
                run_all(options)?
            } else {
                vec![run_suite(&name, options)?]
            };
            for r in &reports {
                eprintln!("{}: {}", r.suite, if r.pass { "PASS" } else { "FAIL" });
                for c in r.checks.iter().filter(|c| !c.pass) {
                    eprintln!(
                        "  FAIL {}: {} (threshold {}){}",
                        c.name,
                        c.value,
                        c.threshold,
                        c.detail.as_deref().map(|d| format!(" {d}")).unwrap_or_default()
                    );
                }
            }
            let pass = reports.iter().all(|r| r.pass);
            write_json(out.as_deref(), &json!({ "pass": pass, "suites": reports }))?;
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) => ExitCode::from(2),
                Error::Infeasible(_) => ExitCode::from(3),
                _ => ExitCode::from(4),
            }
        }
    }
}
