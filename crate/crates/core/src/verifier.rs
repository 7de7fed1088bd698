//! Discrete viscosity-solution checks: interior residuals on both sides,
//! one-sided jets and interval tests at the interface, and an empirical
//! comparison-principle harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridFunction, InterfaceShape, Region};
use crate::operators::FirstOrderOperator;
use crate::scheme::{axis_pairs, elliptic_update, godunov_update_eikonal, TransmissionProblem};

/// Default tolerance constant: `tol = C·h`.
pub const TOL_FACTOR: f64 = 10.0;
/// Default second-difference bound used by kink detection.
pub const KINK_CURVATURE: f64 = 2.0;
/// Number of equispaced normal slopes sampled in the interval tests.
pub const SLOPE_SAMPLES: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeClass {
    Pass,
    SubViolation,
    SuperViolation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckRule {
    /// Eikonal equation on `Ω_- ∪ Γ`, tested with the interval logic.
    Strong,
    /// `min(H_-(q, b), a - b) ≤ 0` for the sub side; super side as in `Strong`.
    Relaxed,
}

impl CheckRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "strong" | "strong_eikonal" => Ok(Self::Strong),
            "relaxed" | "relaxed_min" => Ok(Self::Relaxed),
            _ => Err(Error::config(format!("unknown verification rule `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneSidedJet {
    pub node: usize,
    pub z: f64,
    /// Tangential gradient (centred differences), empty in 1D.
    pub q: Vec<f64>,
    /// `∂_ν u` from the eikonal side.
    pub a: f64,
    /// `∂_ν u` from the Brownian side.
    pub b: f64,
    pub tangential_second: Vec<f64>,
}

impl OneSidedJet {
    /// Full gradient in coordinates for a normal slope `p_nu`.
    fn gradient(&self, p_nu: f64, normal_sign: f64) -> Vec<f64> {
        let mut p = self.q.clone();
        p.push(normal_sign * p_nu);
        p
    }
}

pub fn jets_at_interface(u: &GridFunction, node: usize) -> Result<OneSidedJet> {
    let grid = u.grid();
    if grid.tag(node) != Region::Interface {
        return Err(Error::usage(format!("node {node} is not an interface node")));
    }
    let h = grid.h();
    let axis = grid.normal_axis();
    let sign = grid.normal_sign() as isize;
    let v = u.values();
    let along = |k: isize| -> Option<f64> {
        let mut cur = node;
        for _ in 0..k.unsigned_abs() {
            cur = grid.neighbor(cur, axis, k.signum())?;
        }
        (grid.tag(cur) != Region::Exterior).then(|| v[cur])
    };
    let missing = || Error::usage(format!("node {node}: fewer than two nodes on one side of the interface"));
    let (e1, e2) = (along(-sign).ok_or_else(missing)?, along(-2 * sign).ok_or_else(missing)?);
    let (b1, b2) = (along(sign).ok_or_else(missing)?, along(2 * sign).ok_or_else(missing)?);
    let u0 = v[node];
    let mut q = Vec::new();
    let mut second = Vec::new();
    for t in 0..axis {
        let lo = grid.neighbor(node, t, -1).ok_or_else(missing)?;
        let hi = grid.neighbor(node, t, 1).ok_or_else(missing)?;
        q.push((v[hi] - v[lo]) / (2.0 * h));
        second.push((v[hi] - 2.0 * u0 + v[lo]) / (h * h));
    }
    Ok(OneSidedJet {
        node,
        z: u0,
        q,
        a: (3.0 * u0 - 4.0 * e1 + e2) / (2.0 * h),
        b: (-3.0 * u0 + 4.0 * b1 - b2) / (2.0 * h),
        tangential_second: second,
    })
}

fn slopes(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = SLOPE_SAMPLES - 1;
    (0..=n).map(move |k| {
        if k == 0 {
            lo
        } else if k == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / n as f64
        }
    })
}

/// Evaluation context for the interface tests: `H_-` plus a constant shift,
/// frozen at the node position and the sign of `ν`.
#[derive(Clone, Copy)]
pub struct InterfaceContext<'a> {
    pub h_minus: &'a FirstOrderOperator,
    pub shift: f64,
    pub x: &'a [f64],
    pub normal_sign: f64,
}

impl InterfaceContext<'_> {
    fn eval(&self, jet: &OneSidedJet, p_nu: f64) -> f64 {
        self.h_minus.eval(&jet.gradient(p_nu, self.normal_sign), jet.z, self.x) + self.shift
    }
}

/// Interval test of the strong interface condition; returns the class and the
/// size of the violation (0 on pass).
pub fn check_interface_strong(jet: &OneSidedJet, ctx: &InterfaceContext, tol: f64) -> (NodeClass, f64) {
    let (a, b) = (jet.a, jet.b);
    if (a - b).abs() <= tol {
        let v = ctx.eval(jet, 0.5 * (a + b));
        if v > tol {
            return (NodeClass::SubViolation, v);
        }
        if v < -tol {
            return (NodeClass::SuperViolation, -v);
        }
        return (NodeClass::Pass, 0.0);
    }
    if a > b {
        let worst = slopes(b, a).map(|p| ctx.eval(jet, p)).fold(f64::NEG_INFINITY, f64::max);
        if worst > tol {
            return (NodeClass::SubViolation, worst);
        }
    } else {
        let worst = slopes(a, b).map(|p| ctx.eval(jet, p)).fold(f64::INFINITY, f64::min);
        if worst < -tol {
            return (NodeClass::SuperViolation, -worst);
        }
    }
    (NodeClass::Pass, 0.0)
}

/// Sub-solution form of the relaxed transmission condition.
pub fn check_transmission_relaxed(jet: &OneSidedJet, ctx: &InterfaceContext, tol: f64) -> (NodeClass, f64) {
    let v = ctx.eval(jet, jet.b).min(jet.a - jet.b);
    if v > tol {
        (NodeClass::SubViolation, v)
    } else {
        (NodeClass::Pass, 0.0)
    }
}

/// Super-solution half of the strong interval test (convex or flat angles).
fn check_interface_super(jet: &OneSidedJet, ctx: &InterfaceContext, tol: f64) -> (NodeClass, f64) {
    match check_interface_strong(jet, ctx, tol) {
        r @ (NodeClass::SuperViolation, _) => r,
        _ => (NodeClass::Pass, 0.0),
    }
}

/// `(sub, super)` residuals of the Godunov scheme at an eikonal node, scaled by
/// `1/h` to the units of `H_-`.
pub fn eikonal_residuals(values: &[f64], problem: &TransmissionProblem, node: usize) -> (f64, f64) {
    let grid = &problem.grid;
    let g = godunov_update_eikonal(&axis_pairs(grid, values, node), grid.h(), problem.effective_speed());
    let u = values[node];
    ((u - g) / grid.h(), (g - u) / grid.h())
}

/// Discrete `H_+ u` at a node (positive: sub-solution test fails).
pub fn elliptic_residual(values: &[f64], problem: &TransmissionProblem, node: usize) -> f64 {
    let grid = &problem.grid;
    let form = problem.effective_affine(node);
    let h = grid.h();
    let centre = 2.0 * grid.dim() as f64 * form.diffusion / (h * h) + form.zeroth;
    let update = elliptic_update(&axis_pairs(grid, values, node), h, form);
    centre * (values[node] - update)
}

/// Kink indicator along any axis: one-sided slopes jump by more than `4h·K`.
/// Returns `Some(true)` for a concave kink, `Some(false)` for a convex one.
pub fn kink_at(u: &GridFunction, node: usize, curvature: f64) -> Option<bool> {
    let grid = u.grid();
    let h = grid.h();
    let v = u.values();
    let mut found = None;
    for axis in 0..grid.dim() {
        let (Some(lo), Some(hi)) = (grid.neighbor(node, axis, -1), grid.neighbor(node, axis, 1)) else {
            continue;
        };
        let jump = (v[hi] - v[node]) / h - (v[node] - v[lo]) / h;
        if jump.abs() > 4.0 * h * curvature {
            if jump < 0.0 {
                return Some(true);
            }
            found = Some(false);
        }
    }
    found
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub node: usize,
    pub point: Vec<f64>,
    pub region: Region,
    pub class: NodeClass,
    pub residual: f64,
    pub check: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub tolerance: f64,
    pub rule: CheckRule,
    pub pass: bool,
    #[serde(skip)]
    pub classes: Vec<NodeClass>,
    pub violations: Vec<Violation>,
    pub worst: Option<Violation>,
    pub checked_nodes: usize,
    /// Interface nodes skipped (curved interface or insufficient stencil).
    pub skipped: Vec<usize>,
    /// Eikonal nodes where a concave kink made the super check vacuous.
    pub concave_kinks: Vec<usize>,
    /// Whether the strong and relaxed sub tests agreed at every interface node.
    pub interface_rules_agree: bool,
    pub jets: Vec<OneSidedJet>,
}

impl VerificationReport {
    pub fn count(&self, class: NodeClass) -> usize {
        self.violations.iter().filter(|v| v.class == class).count()
    }

    pub fn worst_of(&self, class: NodeClass) -> f64 {
        self.violations
            .iter()
            .filter(|v| v.class == class)
            .map(|v| v.residual)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub tol: f64,
    pub curvature: f64,
}

impl VerifyOptions {
    pub fn auto(h: f64) -> Self {
        VerifyOptions {
            tol: TOL_FACTOR * h,
            curvature: KINK_CURVATURE,
        }
    }

    pub fn with_tol(tol: f64) -> Self {
        VerifyOptions {
            tol,
            curvature: KINK_CURVATURE,
        }
    }
}

pub fn verify(u: &GridFunction, problem: &TransmissionProblem, rule: CheckRule, tol: f64) -> Result<VerificationReport> {
    verify_with(u, problem, rule, VerifyOptions::with_tol(tol))
}

pub fn verify_with(
    u: &GridFunction,
    problem: &TransmissionProblem,
    rule: CheckRule,
    opts: VerifyOptions,
) -> Result<VerificationReport> {
    let grid = &problem.grid;
    if u.grid().len() != grid.len() || u.grid().shape() != grid.shape() {
        return Err(Error::config("solution grid does not match problem grid"));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::config("tolerance must be nonnegative"));
    }
    let tol = opts.tol;
    let h = grid.h();
    let values = u.values();
    let mut classes = vec![NodeClass::Pass; grid.len()];
    let mut violations = Vec::new();
    let mut skipped = Vec::new();
    let mut concave_kinks = Vec::new();
    let mut jets = Vec::new();
    let mut agree = true;
    let mut checked = 0;
    let mut record = |node: usize, class: NodeClass, residual: f64, check: &'static str, classes: &mut Vec<NodeClass>| {
        if class == NodeClass::Pass {
            return;
        }
        classes[node] = class;
        violations.push(Violation {
            node,
            point: grid.point(node),
            region: grid.tag(node),
            class,
            residual,
            check,
        });
    };
    for node in 0..grid.len() {
        match grid.tag(node) {
            Region::Eikonal => {
                checked += 1;
                let (sub, sup) = eikonal_residuals(values, problem, node);
                let kink = kink_at(u, node, opts.curvature);
                let sub_tol = if kink.is_some() { tol * (1.0 + 1.0 / h) } else { tol };
                if sub > sub_tol {
                    record(node, NodeClass::SubViolation, sub, "eikonal", &mut classes);
                } else if kink == Some(true) {
                    concave_kinks.push(node);
                } else if sup > tol {
                    record(node, NodeClass::SuperViolation, sup, "eikonal", &mut classes);
                }
            }
            Region::Brownian => {
                checked += 1;
                let r = elliptic_residual(values, problem, node);
                if r > tol {
                    record(node, NodeClass::SubViolation, r, "elliptic", &mut classes);
                } else if r < -tol {
                    record(node, NodeClass::SuperViolation, -r, "elliptic", &mut classes);
                }
            }
            Region::Interface => {
                if !matches!(grid.interface(), InterfaceShape::Flat { .. }) {
                    skipped.push(node);
                    continue;
                }
                let Ok(jet) = jets_at_interface(u, node) else {
                    skipped.push(node);
                    continue;
                };
                checked += 1;
                let x = grid.point(node);
                let ctx = InterfaceContext {
                    h_minus: &problem.h_minus,
                    shift: problem.eta,
                    x: &x,
                    normal_sign: grid.normal_sign(),
                };
                let strong = check_interface_strong(&jet, &ctx, tol);
                let relaxed = check_transmission_relaxed(&jet, &ctx, tol);
                let strong_sub = strong.0 == NodeClass::SubViolation;
                if strong_sub != (relaxed.0 == NodeClass::SubViolation) {
                    agree = false;
                }
                let (class, residual, check) = match rule {
                    CheckRule::Strong => (strong.0, strong.1, "interface_strong"),
                    CheckRule::Relaxed => {
                        if relaxed.0 != NodeClass::Pass {
                            (relaxed.0, relaxed.1, "interface_relaxed")
                        } else {
                            let s = check_interface_super(&jet, &ctx, tol);
                            (s.0, s.1, "interface_strong")
                        }
                    }
                };
                record(node, class, residual, check, &mut classes);
                jets.push(jet);
            }
            _ => {}
        }
    }
    let worst = violations
        .iter()
        .max_by(|a, b| a.residual.total_cmp(&b.residual))
        .cloned();
    Ok(VerificationReport {
        tolerance: tol,
        rule,
        pass: violations.is_empty(),
        classes,
        violations,
        worst,
        checked_nodes: checked,
        skipped,
        concave_kinks,
        interface_rules_agree: agree,
        jets,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub pass: bool,
    pub tolerance: f64,
    /// `max (u - v)` over all active nodes.
    pub worst_margin: f64,
    pub worst_node: Option<usize>,
    pub worst_point: Option<Vec<f64>>,
    pub violations: Vec<usize>,
    pub u_is_subsolution: bool,
    pub v_is_supersolution: bool,
    pub boundary_ordered: bool,
}

/// Checks `u ≤ v + tol` everywhere. Preconditions (sub checks for `u` in the
/// `η`-shifted problem, super checks for `v` with gap 0, boundary ordering)
/// are evaluated and reported but do not abort the check.
pub fn check_comparison(
    u: &GridFunction,
    v: &GridFunction,
    problem: &TransmissionProblem,
    tol: f64,
    check_tol: f64,
) -> Result<ComparisonReport> {
    let grid = &problem.grid;
    if u.grid().len() != grid.len() || v.grid().len() != grid.len() {
        return Err(Error::config("comparison fields must share the problem grid"));
    }
    let sub_report = verify(u, problem, CheckRule::Strong, check_tol)?;
    let zero_gap = problem.with_eta(0.0)?;
    let super_report = verify(v, &zero_gap, CheckRule::Strong, check_tol)?;
    let boundary_ordered = grid
        .nodes(Region::Boundary)
        .all(|i| u.value(i) <= v.value(i) + tol);
    let mut worst = (f64::NEG_INFINITY, None);
    let mut violations = Vec::new();
    for (i, a) in u.active() {
        let margin = a - v.value(i);
        if margin > worst.0 {
            worst = (margin, Some(i));
        }
        if margin > tol {
            violations.push(i);
        }
    }
    Ok(ComparisonReport {
        pass: violations.is_empty(),
        tolerance: tol,
        worst_margin: worst.0,
        worst_node: worst.1,
        worst_point: worst.1.map(|i| grid.point(i)),
        violations,
        u_is_subsolution: sub_report.count(NodeClass::SubViolation) == 0,
        v_is_supersolution: super_report.count(NodeClass::SuperViolation) == 0,
        boundary_ordered,
    })
}
