//! Monotone finite-difference scheme for the transmission problem and its
//! fixed-point solvers.
//!
//! Eikonal and interface nodes are relaxed by Gauss–Seidel sweeps over all
//! `2^n` diagonal orderings. The Brownian region is linear in the unknowns, so
//! after every ordering its block is solved exactly with Dirichlet data taken
//! from the current interface and boundary values.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid, GridFunction, Region};
use crate::linalg::{BandedLu, BandedMatrix};
use crate::operators::{AffineForm, FirstOrderOperator, SecondOrderOperator};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;
/// Interior initial value is this multiple of `max(1, ‖g‖∞)`.
pub const INIT_SCALE: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceRule {
    /// Interface value is the smaller of the two candidates.
    RelaxedMin,
    /// Interface value is the eikonal candidate.
    StrongEikonal,
}

impl InterfaceRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relaxed" | "relaxed_min" => Ok(Self::RelaxedMin),
            "strong" | "strong_eikonal" => Ok(Self::StrongEikonal),
            _ => Err(Error::config(format!("unknown interface rule `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rule: InterfaceRule,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rule: InterfaceRule::StrongEikonal,
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

impl SolverConfig {
    pub fn with_rule(rule: InterfaceRule) -> Self {
        SolverConfig {
            rule,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::config("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TransmissionProblem {
    pub grid: Arc<Grid>,
    pub h_minus: FirstOrderOperator,
    pub h_plus: SecondOrderOperator,
    /// Dirichlet data; only entries at BOUNDARY nodes are meaningful.
    pub g: Vec<f64>,
    /// Gap added to both equations (`H- + η`, `H+ + η`).
    pub eta: f64,
}

impl TransmissionProblem {
    pub fn new(
        grid: Arc<Grid>,
        h_minus: FirstOrderOperator,
        h_plus: SecondOrderOperator,
        boundary: impl Fn(&[f64]) -> f64,
        eta: f64,
    ) -> Result<Self> {
        let g = (0..grid.len())
            .map(|i| {
                if grid.tag(i) == Region::Boundary {
                    boundary(&grid.point(i))
                } else {
                    0.0
                }
            })
            .collect();
        Self::with_values(grid, h_minus, h_plus, g, eta)
    }

    pub fn with_values(
        grid: Arc<Grid>,
        h_minus: FirstOrderOperator,
        h_plus: SecondOrderOperator,
        g: Vec<f64>,
        eta: f64,
    ) -> Result<Self> {
        if g.len() != grid.len() {
            return Err(Error::config("boundary vector length does not match grid"));
        }
        if let Some(i) = grid.nodes(Region::Boundary).find(|&i| !g[i].is_finite()) {
            return Err(Error::config(format!("non-finite boundary value at node {i}")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::config(format!("gap η must be ≥ 0, got {eta}")));
        }
        let p = TransmissionProblem {
            grid,
            h_minus,
            h_plus,
            g,
            eta,
        };
        p.check_supported()?;
        Ok(p)
    }

    /// Same problem with a different gap.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::with_values(self.grid.clone(), self.h_minus.clone(), self.h_plus.clone(), self.g.clone(), eta)
    }

    fn check_supported(&self) -> Result<()> {
        let speed = match &self.h_minus {
            FirstOrderOperator::Eikonal { speed } => *speed,
            other => {
                return Err(Error::config(format!(
                    "the sweeping solver supports the eikonal form |p| - c only, got {other:?}"
                )))
            }
        };
        if speed - self.eta <= 0.0 {
            return Err(Error::config(format!(
                "effective speed c - η = {} must be positive",
                speed - self.eta
            )));
        }
        let grid = &self.grid;
        let h = grid.h();
        for i in (0..grid.len()).filter(|&i| matches!(grid.tag(i), Region::Brownian | Region::Interface)) {
            let form = self.h_plus.affine_at(&grid.point(i)).ok_or_else(|| {
                Error::config(format!(
                    "the sweeping solver needs an affine second-order operator, got {:?}",
                    self.h_plus
                ))
            })?;
            if !(form.diffusion > 0.0) || form.zeroth < 0.0 {
                return Err(Error::config("affine operator needs a > 0 and λ0 ≥ 0"));
            }
            if form.drift.abs() * h / 2.0 > form.diffusion {
                return Err(Error::config(format!(
                    "drift {} too large for a monotone centred stencil at h = {h}",
                    form.drift
                )));
            }
        }
        Ok(())
    }

    /// `c - η`.
    pub fn effective_speed(&self) -> f64 {
        self.h_minus.speed().expect("eikonal") - self.eta
    }

    /// Affine coefficients at node `i`, with `f` lowered by `η`.
    pub fn effective_affine(&self, i: usize) -> AffineForm {
        let mut form = self
            .h_plus
            .affine_at(&self.grid.point(i))
            .expect("checked at construction");
        form.rhs -= self.eta;
        form
    }

    fn boundary_sup(&self) -> f64 {
        self.grid
            .nodes(Region::Boundary)
            .map(|i| self.g[i].abs())
            .fold(0.0, f64::max)
    }

    fn boundary_min(&self) -> f64 {
        self.grid
            .nodes(Region::Boundary)
            .map(|i| self.g[i])
            .fold(f64::INFINITY, f64::min)
    }

    /// Boundary values pinned, free nodes at `value`, exterior `NaN`.
    pub fn initial_guess(&self, value: f64) -> GridFunction {
        let grid = &self.grid;
        let values = (0..grid.len())
            .map(|i| match grid.tag(i) {
                Region::Boundary => self.g[i],
                Region::Exterior => f64::NAN,
                _ => value,
            })
            .collect();
        GridFunction::from_raw(grid.clone(), values)
    }
}

/// One-sided neighbour pair `(u_{-e_k}, u_{+e_k})` along every axis.
pub fn axis_pairs(grid: &Grid, values: &[f64], node: usize) -> Vec<(f64, f64)> {
    (0..grid.dim())
        .map(|axis| {
            let lo = grid.neighbor(node, axis, -1).expect("free node has neighbours");
            let hi = grid.neighbor(node, axis, 1).expect("free node has neighbours");
            (values[lo], values[hi])
        })
        .collect()
}

/// Solves `Σ_k (max(u - min(u_k^-, u_k^+), 0)/h)² = c²` for the largest root,
/// dropping axes whose minimum exceeds the candidate.
pub fn godunov_update_eikonal(pairs: &[(f64, f64)], h: f64, speed: f64) -> f64 {
    let mut mins: Vec<f64> = pairs.iter().map(|&(a, b)| a.min(b)).collect();
    mins.sort_by(f64::total_cmp);
    let ch = speed * h;
    let mut candidate = mins[0] + ch;
    let (mut s1, mut s2) = (mins[0], mins[0] * mins[0]);
    for k in 1..mins.len() {
        if candidate <= mins[k] {
            break;
        }
        s1 += mins[k];
        s2 += mins[k] * mins[k];
        let kf = (k + 1) as f64;
        let disc = (s1 * s1 - kf * (s2 - ch * ch)).max(0.0);
        candidate = (s1 + disc.sqrt()) / kf;
    }
    candidate
}

/// Centre value solving the affine stencil equation
/// `a(2n u - Σ nbrs)/h² - Σ_k d(u_k^+ - u_k^-)/(2h) + λ0 u - f = 0`.
/// The drift acts along the last axis only.
pub fn elliptic_update(pairs: &[(f64, f64)], h: f64, form: AffineForm) -> f64 {
    let n = pairs.len();
    let ah = form.diffusion / (h * h);
    let mut acc = form.rhs;
    for (k, &(lo, hi)) in pairs.iter().enumerate() {
        acc += ah * (lo + hi);
        if k == n - 1 {
            acc += form.drift * (hi - lo) / (2.0 * h);
        }
    }
    acc / (2.0 * n as f64 * ah + form.zeroth)
}

pub fn interface_update(rule: InterfaceRule, eikonal: f64, elliptic: f64) -> f64 {
    match rule {
        InterfaceRule::RelaxedMin => eikonal.min(elliptic),
        InterfaceRule::StrongEikonal => eikonal,
    }
}

/// Value the scheme assigns to a free node given the current field.
pub fn node_update(problem: &TransmissionProblem, rule: InterfaceRule, values: &[f64], node: usize) -> f64 {
    let grid = &problem.grid;
    let pairs = axis_pairs(grid, values, node);
    let h = grid.h();
    match grid.tag(node) {
        Region::Eikonal => godunov_update_eikonal(&pairs, h, problem.effective_speed()),
        Region::Brownian => elliptic_update(&pairs, h, problem.effective_affine(node)),
        Region::Interface => interface_update(
            rule,
            godunov_update_eikonal(&pairs, h, problem.effective_speed()),
            elliptic_update(&pairs, h, problem.effective_affine(node)),
        ),
        _ => values[node],
    }
}

/// Exact solver for the Brownian block with Dirichlet data from the rest of the grid.
#[derive(Clone, Debug)]
struct BrownianBlock {
    nodes: Vec<usize>,
    base: Vec<f64>,
    /// Per row: couplings to non-Brownian nodes, moved to the right-hand side.
    external: Vec<Vec<(usize, f64)>>,
    lu: Option<BandedLu>,
}

impl BrownianBlock {
    fn assemble(problem: &TransmissionProblem) -> Result<Self> {
        let grid = &problem.grid;
        let nodes: Vec<usize> = grid.nodes(Region::Brownian).collect();
        if nodes.is_empty() {
            return Ok(BrownianBlock {
                nodes,
                base: Vec::new(),
                external: Vec::new(),
                lu: None,
            });
        }
        let mut local = vec![usize::MAX; grid.len()];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = k;
        }
        let h = grid.h();
        let dim = grid.dim();
        let mut rows = Vec::with_capacity(nodes.len());
        let (mut kl, mut ku) = (0usize, 0usize);
        for (k, &i) in nodes.iter().enumerate() {
            let form = problem.effective_affine(i);
            let ah = form.diffusion / (h * h);
            let mut entries = vec![(i, 2.0 * dim as f64 * ah + form.zeroth)];
            for axis in 0..dim {
                let drift = if axis == dim - 1 { form.drift / (2.0 * h) } else { 0.0 };
                for (step, sign) in [(-1isize, -1.0), (1, 1.0)] {
                    let j = grid.neighbor(i, axis, step).expect("free node has neighbours");
                    entries.push((j, -(ah + sign * drift)));
                    if local[j] != usize::MAX {
                        let lj = local[j];
                        if lj < k {
                            kl = kl.max(k - lj);
                        } else {
                            ku = ku.max(lj - k);
                        }
                    }
                }
            }
            rows.push((entries, form.rhs));
        }
        let mut a = BandedMatrix::zeros(nodes.len(), kl, ku);
        let mut base = Vec::with_capacity(nodes.len());
        let mut external = Vec::with_capacity(nodes.len());
        for (k, (entries, rhs)) in rows.into_iter().enumerate() {
            let mut ext = Vec::new();
            for (j, c) in entries {
                if local[j] != usize::MAX {
                    a.add(k, local[j], c);
                } else {
                    ext.push((j, -c));
                }
            }
            base.push(rhs);
            external.push(ext);
        }
        Ok(BrownianBlock {
            nodes,
            base,
            external,
            lu: Some(a.factor()?),
        })
    }

    /// Overwrites Brownian values; returns the largest change.
    fn solve(&self, values: &mut [f64]) -> f64 {
        let Some(lu) = &self.lu else { return 0.0 };
        let mut rhs: Vec<f64> = self
            .base
            .iter()
            .zip(&self.external)
            .map(|(b, ext)| b + ext.iter().map(|&(j, c)| c * values[j]).sum::<f64>())
            .collect();
        lu.solve_in_place(&mut rhs);
        let mut change = 0.0f64;
        for (&i, v) in self.nodes.iter().zip(rhs) {
            change = change.max((values[i] - v).abs());
            values[i] = v;
        }
        change
    }
}

/// Visits every node in the diagonal ordering encoded by `bits`
/// (bit `k` set: axis `k` descending).
fn for_each_in_ordering(grid: &Grid, bits: usize, mut f: impl FnMut(usize)) {
    let shape = grid.shape();
    match shape.len() {
        1 => {
            let n = shape[0];
            for k in 0..n {
                f(if bits & 1 == 1 { n - 1 - k } else { k });
            }
        }
        2 => {
            let (n0, n1) = (shape[0], shape[1]);
            for a in 0..n0 {
                let i0 = if bits & 1 == 1 { n0 - 1 - a } else { a };
                for b in 0..n1 {
                    let i1 = if bits & 2 == 2 { n1 - 1 - b } else { b };
                    f(i0 * n1 + i1);
                }
            }
        }
        _ => {
            for node in 0..grid.len() {
                f(node);
            }
        }
    }
}

fn gauss_seidel_non_brownian(problem: &TransmissionProblem, rule: InterfaceRule, values: &mut [f64], bits: usize) -> f64 {
    let grid = &problem.grid;
    let mut change = 0.0f64;
    for_each_in_ordering(grid, bits, |node| {
        if matches!(grid.tag(node), Region::Eikonal | Region::Interface) {
            let v = node_update(problem, rule, values, node);
            change = change.max((v - values[node]).abs());
            values[node] = v;
        }
    });
    change
}

/// Reusable sweeping state (factored Brownian block).
#[derive(Clone, Debug)]
pub struct Sweeper<'a> {
    problem: &'a TransmissionProblem,
    block: BrownianBlock,
    rule: InterfaceRule,
}

impl<'a> Sweeper<'a> {
    pub fn new(problem: &'a TransmissionProblem, rule: InterfaceRule) -> Result<Self> {
        Ok(Sweeper {
            problem,
            block: BrownianBlock::assemble(problem)?,
            rule,
        })
    }

    /// All `2^n` orderings, each followed by a Brownian block solve.
    pub fn sweep(&self, values: &mut [f64]) -> f64 {
        let mut change = 0.0f64;
        for bits in 0..(1usize << self.problem.grid.dim()) {
            change = change.max(gauss_seidel_non_brownian(self.problem, self.rule, values, bits));
            change = change.max(self.block.solve(values));
        }
        change
    }

    /// All orderings on `Ω_- ∪ Γ`, then a single lift on `Ω_B`.
    pub fn alternate(&self, values: &mut [f64]) -> f64 {
        let mut change = 0.0f64;
        for bits in 0..(1usize << self.problem.grid.dim()) {
            change = change.max(gauss_seidel_non_brownian(self.problem, self.rule, values, bits));
        }
        change.max(self.block.solve(values))
    }

    pub fn lift(&self, values: &mut [f64]) -> f64 {
        self.block.solve(values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// Largest nodal change in the final sweep.
    pub final_residual: f64,
    /// Geometric-tail estimate of the remaining distance to the fixed point.
    pub error_estimate: f64,
    pub converged: bool,
    pub tolerance: f64,
    pub rule: InterfaceRule,
    /// Largest `|S(u) - u|` per region after the final sweep.
    pub residual_by_region: BTreeMap<String, f64>,
    /// Largest amount by which a boundary value exceeds what the eikonal
    /// neighbours can attain (`g - u - c·h`), when positive.
    pub boundary_mismatch: Option<f64>,
    /// False if an iteration expected to be monotone moved the wrong way.
    pub monotone: bool,
}

/// Stopping rule: the change is below `tol` and, when the iteration contracts
/// geometrically with ratio `q`, the tail bound `δ q/(1-q)` is below `tol/2`.
struct Stopper {
    tol: f64,
    prev: Option<f64>,
    ratio: f64,
}

impl Stopper {
    fn new(tol: f64) -> Self {
        Stopper {
            tol,
            prev: None,
            ratio: 1.0,
        }
    }

    /// Returns `(converged, error_estimate)`.
    fn update(&mut self, delta: f64, scale: f64) -> (bool, f64) {
        let q = match self.prev {
            Some(p) if p > 0.0 => delta / p,
            _ => 1.0,
        };
        let q_eff = q.max(self.ratio.min(1.0));
        self.ratio = q;
        self.prev = Some(delta);
        if delta == 0.0 {
            return (true, 0.0);
        }
        let estimate = if q_eff < 1.0 {
            delta * q_eff / (1.0 - q_eff)
        } else {
            f64::INFINITY
        };
        let roundoff = 1e3 * f64::EPSILON * scale.max(1.0);
        let done = delta <= self.tol && (estimate <= 0.5 * self.tol || delta <= roundoff);
        (done, estimate)
    }
}

fn finish(
    problem: &TransmissionProblem,
    rule: InterfaceRule,
    values: Vec<f64>,
    iterations: usize,
    last: f64,
    estimate: f64,
    converged: bool,
    tol: f64,
    monotone: bool,
) -> (GridFunction, SolveDiagnostics) {
    let grid = &problem.grid;
    let mut residual_by_region = BTreeMap::new();
    for region in [Region::Eikonal, Region::Interface, Region::Brownian] {
        let r = grid
            .nodes(region)
            .map(|i| (node_update(problem, rule, &values, i) - values[i]).abs())
            .fold(0.0, f64::max);
        if grid.count(region) > 0 {
            residual_by_region.insert(region.as_str().to_string(), r);
        }
    }
    let diag = SolveDiagnostics {
        iterations,
        final_residual: last,
        error_estimate: estimate,
        converged,
        tolerance: tol,
        rule,
        residual_by_region,
        boundary_mismatch: boundary_mismatch(problem, &values),
        monotone,
    };
    (GridFunction::from_raw(grid.clone(), values), diag)
}

fn boundary_mismatch(problem: &TransmissionProblem, values: &[f64]) -> Option<f64> {
    let grid = &problem.grid;
    let reach = problem.effective_speed() * grid.h();
    let mut worst = 0.0f64;
    for b in grid.nodes(Region::Boundary) {
        for axis in 0..grid.dim() {
            for step in [-1, 1] {
                if let Some(j) = grid.neighbor(b, axis, step) {
                    if matches!(grid.tag(j), Region::Eikonal | Region::Interface) {
                        worst = worst.max(problem.g[b] - values[j] - reach);
                    }
                }
            }
        }
    }
    (worst > 1e-8).then_some(worst)
}

/// One full sweep (all orderings) from `u`; returns the new field and the largest change.
pub fn sweep(u: &GridFunction, problem: &TransmissionProblem, config: &SolverConfig) -> Result<(GridFunction, f64)> {
    let sweeper = Sweeper::new(problem, config.rule)?;
    let mut values = u.values().to_vec();
    for i in problem.grid.nodes(Region::Boundary) {
        values[i] = problem.g[i];
    }
    let change = sweeper.sweep(&mut values);
    Ok((GridFunction::from_raw(problem.grid.clone(), values), change))
}

/// Fixed point of the sweep, iterated monotonically from above.
pub fn solve(problem: &TransmissionProblem, config: &SolverConfig) -> Result<(GridFunction, SolveDiagnostics)> {
    let init = INIT_SCALE * problem.boundary_sup().max(1.0);
    solve_from(problem, config, &problem.initial_guess(init))
}

/// Fixed point of the sweep from an arbitrary starting field.
pub fn solve_from(
    problem: &TransmissionProblem,
    config: &SolverConfig,
    start: &GridFunction,
) -> Result<(GridFunction, SolveDiagnostics)> {
    iterate(problem, config, start, Mode::Sweep)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Sweep,
    Perron,
}

fn iterate(
    problem: &TransmissionProblem,
    config: &SolverConfig,
    start: &GridFunction,
    mode: Mode,
) -> Result<(GridFunction, SolveDiagnostics)> {
    config.validate()?;
    if start.grid().len() != problem.grid.len() {
        return Err(Error::config("starting field lives on a different grid"));
    }
    let sweeper = Sweeper::new(problem, config.rule)?;
    let mut values = start.values().to_vec();
    for i in problem.grid.nodes(Region::Boundary) {
        values[i] = problem.g[i];
    }
    let mut stopper = Stopper::new(config.tol);
    let mut monotone = true;
    let mut last = f64::INFINITY;
    let mut estimate = f64::INFINITY;
    for it in 1..=config.max_sweeps {
        let before = (mode == Mode::Perron).then(|| values.clone());
        last = match mode {
            Mode::Sweep => sweeper.sweep(&mut values),
            Mode::Perron => sweeper.alternate(&mut values),
        };
        if let Some(before) = before {
            let slack = 1e3 * f64::EPSILON * problem.boundary_sup().max(1.0);
            if before.iter().zip(&values).any(|(b, v)| *v < b - slack) {
                monotone = false;
            }
        }
        let scale = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
        let (done, est) = stopper.update(last, scale);
        estimate = est;
        if done {
            return Ok(finish(problem, config.rule, values, it, last, estimate, true, config.tol, monotone));
        }
    }
    Ok(finish(
        problem,
        config.rule,
        values,
        config.max_sweeps,
        last,
        estimate,
        false,
        config.tol,
        monotone,
    ))
}

/// Replaces Brownian values by the solution of the elliptic Dirichlet problem
/// with data `u` on `Γ ∪ ∂Ω`; other values are unchanged.
pub fn lift_elliptic(u: &GridFunction, problem: &TransmissionProblem) -> Result<GridFunction> {
    if problem.grid.count(Region::Brownian) == 0 {
        return Err(Error::usage("lift needs a nonempty Brownian region"));
    }
    let sweeper = Sweeper::new(problem, InterfaceRule::RelaxedMin)?;
    let mut values = u.values().to_vec();
    sweeper.lift(&mut values);
    Ok(GridFunction::from_raw(problem.grid.clone(), values))
}

/// Alternating eikonal sweeps and elliptic lifts, increasing from the constant
/// sub-solution `min g` (a sub-solution whenever `f - η ≥ 0`).
pub fn perron_solve(problem: &TransmissionProblem, config: &SolverConfig) -> Result<(GridFunction, SolveDiagnostics)> {
    perron_solve_from(problem, config, &problem.initial_guess(problem.boundary_min()))
}

pub fn perron_solve_from(
    problem: &TransmissionProblem,
    config: &SolverConfig,
    start: &GridFunction,
) -> Result<(GridFunction, SolveDiagnostics)> {
    iterate(problem, config, start, Mode::Perron)
}
