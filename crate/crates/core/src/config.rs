//! JSON experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};

use crate::closed_forms::{solve_1d_family, solve_annulus, AnnulusSolution};
use crate::error::{Error, Result};
use crate::geometry::{Grid, Side};
use crate::montecarlo::{McDomain, Phase};
use crate::operators::{FirstOrderOperator, SecondOrderOperator};
use crate::scheme::{SolverConfig, TransmissionProblem};
use crate::verifier::{CheckRule, TOL_FACTOR};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideSpec {
    #[default]
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// `[a, b]` with the interface at `interface`.
    Interval {
        a: f64,
        b: f64,
        interface: f64,
        h: f64,
        #[serde(default)]
        eikonal_side: SideSpec,
    },
    /// Radial reduction of the `n`-dimensional annulus on `[r, R]`.
    Radial {
        n: u32,
        r: f64,
        rho: f64,
        #[serde(rename = "R")]
        big_r: f64,
        h: f64,
    },
    /// Rectangle with `Γ = {x_2 = interface}`, eikonal below.
    Slab {
        x: [f64; 2],
        y: [f64; 2],
        interface: f64,
        h: f64,
    },
    /// Rectangle without interface (eikonal everywhere).
    Square { x: [f64; 2], y: [f64; 2], h: f64 },
    /// Planar annulus embedded in `[-R, R]²`.
    Annulus {
        r: f64,
        rho: f64,
        #[serde(rename = "R")]
        big_r: f64,
        h: f64,
    },
}

impl GeometrySpec {
    pub fn h(&self) -> f64 {
        match self {
            GeometrySpec::Interval { h, .. }
            | GeometrySpec::Radial { h, .. }
            | GeometrySpec::Slab { h, .. }
            | GeometrySpec::Square { h, .. }
            | GeometrySpec::Annulus { h, .. } => *h,
        }
    }

    pub fn set_h(&mut self, value: f64) {
        match self {
            GeometrySpec::Interval { h, .. }
            | GeometrySpec::Radial { h, .. }
            | GeometrySpec::Slab { h, .. }
            | GeometrySpec::Square { h, .. }
            | GeometrySpec::Annulus { h, .. } => *h = value,
        }
    }

    pub fn build(&self) -> Result<Grid> {
        match *self {
            GeometrySpec::Interval {
                a,
                b,
                interface,
                h,
                eikonal_side,
            } => Grid::line_oriented(
                a,
                b,
                interface,
                h,
                match eikonal_side {
                    SideSpec::Lower => Side::Lower,
                    SideSpec::Upper => Side::Upper,
                },
            ),
            GeometrySpec::Radial { n, r, rho, big_r, h } => {
                if n < 2 {
                    return Err(Error::config("radial geometry needs n ≥ 2"));
                }
                Grid::line_oriented(r, big_r, rho, h, Side::Upper)
            }
            GeometrySpec::Slab { x, y, interface, h } => Grid::slab((x[0], x[1]), (y[0], y[1]), interface, h),
            GeometrySpec::Square { x, y, h } => Grid::eikonal_box((x[0], x[1]), (y[0], y[1]), h),
            GeometrySpec::Annulus { r, rho, big_r, h } => Grid::annulus(r, rho, big_r, h),
        }
    }

    /// Exact geometry for Monte Carlo simulation.
    pub fn mc_domain(&self) -> McDomain {
        match *self {
            GeometrySpec::Interval {
                a,
                b,
                interface,
                eikonal_side,
                ..
            } => {
                let (lower, upper) = match eikonal_side {
                    SideSpec::Lower => (Phase::Eikonal, Phase::Brownian),
                    SideSpec::Upper => (Phase::Brownian, Phase::Eikonal),
                };
                McDomain::Interval {
                    a,
                    b,
                    split: interface,
                    lower,
                    upper,
                }
            }
            GeometrySpec::Radial { r, rho, big_r, .. } | GeometrySpec::Annulus { r, rho, big_r, .. } => {
                McDomain::Annulus { r, rho, big_r }
            }
            GeometrySpec::Slab { x, y, interface, .. } => McDomain::Slab {
                x: (x[0], x[1]),
                y: (y[0], y[1]),
                split: interface,
                lower: Phase::Eikonal,
                upper: Phase::Brownian,
            },
            GeometrySpec::Square { x, y, .. } => McDomain::Slab {
                x: (x[0], x[1]),
                y: (y[0], y[1]),
                split: y[0],
                lower: Phase::Eikonal,
                upper: Phase::Eikonal,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum FirstOrderSpec {
    Eikonal {
        #[serde(default = "one")]
        speed: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SecondOrderSpec {
    /// `½(-Δu) = f`; `lambda`/`lambda_bar` are informational and must equal ½.
    HalfNegLaplacian {
        #[serde(default = "one")]
        rhs: f64,
        #[serde(default = "half")]
        lambda: f64,
        #[serde(default = "half")]
        lambda_bar: f64,
    },
    /// `a(-Δu) + λ0 u = f`.
    Affine {
        diffusion: f64,
        #[serde(default)]
        zeroth: f64,
        rhs: f64,
    },
    Pucci {
        lambda: f64,
        lambda_bar: f64,
        #[serde(default = "yes")]
        plus: bool,
        #[serde(default)]
        zeroth: f64,
        rhs: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub first_order: FirstOrderSpec,
    pub second_order: SecondOrderSpec,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec {
            first_order: FirstOrderSpec::Eikonal { speed: 1.0 },
            second_order: SecondOrderSpec::HalfNegLaplacian {
                rhs: 1.0,
                lambda: 0.5,
                lambda_bar: 0.5,
            },
        }
    }
}

impl OperatorSpec {
    pub fn first_order(&self) -> FirstOrderOperator {
        match self.first_order {
            FirstOrderSpec::Eikonal { speed } => FirstOrderOperator::eikonal(speed),
        }
    }

    /// `radial_dim` selects the radial form of the affine operators.
    pub fn second_order(&self, radial_dim: Option<u32>) -> Result<SecondOrderOperator> {
        Ok(match self.second_order {
            SecondOrderSpec::HalfNegLaplacian {
                rhs,
                lambda,
                lambda_bar,
            } => {
                if lambda != 0.5 || lambda_bar != 0.5 {
                    return Err(Error::config(format!(
                        "½(-Δ) has ellipticity constants (0.5, 0.5), got ({lambda}, {lambda_bar})"
                    )));
                }
                SecondOrderOperator::Affine {
                    diffusion: 0.5,
                    radial_dim,
                    zeroth: 0.0,
                    rhs,
                }
            }
            SecondOrderSpec::Affine { diffusion, zeroth, rhs } => SecondOrderOperator::Affine {
                diffusion,
                radial_dim,
                zeroth,
                rhs,
            },
            SecondOrderSpec::Pucci {
                lambda,
                lambda_bar,
                plus,
                zeroth,
                rhs,
            } => {
                if !(0.0 < lambda && lambda <= lambda_bar) {
                    return Err(Error::config("Pucci constants need 0 < λ ≤ Λ"));
                }
                SecondOrderOperator::Pucci {
                    lambda,
                    lambda_bar,
                    plus,
                    zeroth,
                    rhs,
                }
            }
        })
    }

    fn rhs(&self) -> f64 {
        match self.second_order {
            SecondOrderSpec::HalfNegLaplacian { rhs, .. }
            | SecondOrderSpec::Affine { rhs, .. }
            | SecondOrderSpec::Pucci { rhs, .. } => rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    Constant {
        value: f64,
    },
    /// `u(a) = 0`, `u(b) = α` for the one-dimensional family.
    Oracle1d {
        alpha: f64,
    },
    /// Values of the closed-form annulus solution.
    Annulus,
    /// Expression in `x1`, `x2` (also `x`, `y`), e.g. `"math::sin(x1) + x2"`.
    Expression {
        expr: String,
    },
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec::Constant { value: 0.0 }
    }
}

/// Compiled boundary expression.
pub struct Expression {
    source: String,
    tree: Node<DefaultNumericTypes>,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let tree = evalexpr::build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| Error::config(format!("cannot parse expression `{source}`: {e}")))?;
        Ok(Expression {
            source: source.to_string(),
            tree,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        let names: [&[&str]; 2] = [&["x1", "x"], &["x2", "y"]];
        for (k, v) in x.iter().enumerate().take(2) {
            for name in names[k] {
                ctx.set_value((*name).to_string(), Value::Float(*v))
                    .map_err(|e| Error::Internal(e.to_string()))?;
            }
        }
        let v = self
            .tree
            .eval_number_with_context(&ctx)
            .map_err(|e| Error::config(format!("cannot evaluate `{}` at {x:?}: {e}", self.source)))?;
        if !v.is_finite() {
            return Err(Error::config(format!("`{}` is not finite at {x:?}", self.source)));
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TolSpec {
    Value(f64),
    Keyword(AutoTol),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTol {
    Auto,
}

impl Default for TolSpec {
    fn default() -> Self {
        TolSpec::Keyword(AutoTol::Auto)
    }
}

impl TolSpec {
    /// `10h` for `auto`.
    pub fn resolve(self, h: f64) -> f64 {
        match self {
            TolSpec::Value(v) => v,
            TolSpec::Keyword(AutoTol::Auto) => TOL_FACTOR * h,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(TolSpec::Keyword(AutoTol::Auto));
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0)
            .map(TolSpec::Value)
            .ok_or_else(|| Error::usage(format!("tolerance must be `auto` or a positive number, got `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifierSpec {
    pub tol: TolSpec,
    pub rule: CheckRule,
}

impl Default for VerifierSpec {
    fn default() -> Self {
        VerifierSpec {
            tol: TolSpec::default(),
            rule: CheckRule::Strong,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub solution: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub operators: OperatorSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub gap: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verifier: VerifierSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that need more than the schema: boundary/geometry compatibility,
    /// parseable expressions, finite parameters.
    pub fn validate(&self) -> Result<()> {
        if !(self.gap >= 0.0 && self.gap.is_finite()) {
            return Err(Error::config("gap must be a finite number ≥ 0"));
        }
        if let TolSpec::Value(v) = self.verifier.tol {
            if !(v > 0.0) {
                return Err(Error::config("verifier tolerance must be positive"));
            }
        }
        match (&self.boundary, &self.geometry) {
            (BoundarySpec::Oracle1d { .. }, GeometrySpec::Interval { .. }) => {}
            (BoundarySpec::Oracle1d { .. }, _) => {
                return Err(Error::config("boundary kind `oracle1d` needs an interval geometry"))
            }
            (BoundarySpec::Annulus, GeometrySpec::Radial { .. } | GeometrySpec::Annulus { .. }) => {
                self.annulus_solution()?;
            }
            (BoundarySpec::Annulus, _) => {
                return Err(Error::config("boundary kind `annulus` needs a radial or annulus geometry"))
            }
            (BoundarySpec::Expression { expr }, _) => {
                Expression::parse(expr)?;
            }
            (BoundarySpec::Constant { value }, _) if !value.is_finite() => {
                return Err(Error::config("constant boundary value must be finite"))
            }
            _ => {}
        }
        self.operators.second_order(None)?;
        Ok(())
    }

    fn radial_dim(&self) -> Option<u32> {
        match self.geometry {
            GeometrySpec::Radial { n, .. } => Some(n),
            _ => None,
        }
    }

    /// Closed-form annulus solution for radial/annulus geometries.
    pub fn annulus_solution(&self) -> Result<AnnulusSolution> {
        let (n, r, rho, big_r) = match self.geometry {
            GeometrySpec::Radial { n, r, rho, big_r, .. } => (n, r, rho, big_r),
            GeometrySpec::Annulus { r, rho, big_r, .. } => (2, r, rho, big_r),
            _ => return Err(Error::config("no annulus oracle for this geometry")),
        };
        let speed = match self.operators.first_order {
            FirstOrderSpec::Eikonal { speed } => speed,
        };
        if speed != 1.0 || self.operators.rhs() != 1.0 || self.gap != 0.0 {
            return Err(Error::config(
                "the annulus oracle is for |Du| = 1, ½(-Δu) = 1 and zero gap",
            ));
        }
        match self.operators.second_order {
            SecondOrderSpec::HalfNegLaplacian { .. } => {}
            SecondOrderSpec::Affine { diffusion, zeroth, .. } if diffusion == 0.5 && zeroth == 0.0 => {}
            _ => return Err(Error::config("the annulus oracle needs the operator ½(-Δ)")),
        }
        solve_annulus(n, r, big_r, rho)
    }

    pub fn boundary_fn(&self) -> Result<Box<dyn Fn(&[f64]) -> Result<f64>>> {
        Ok(match &self.boundary {
            BoundarySpec::Constant { value } => {
                let v = *value;
                Box::new(move |_| Ok(v))
            }
            BoundarySpec::Oracle1d { alpha } => {
                let (a, b) = match self.geometry {
                    GeometrySpec::Interval { a, b, .. } => (a, b),
                    _ => unreachable!("validated"),
                };
                let alpha = *alpha;
                let mid = 0.5 * (a + b);
                Box::new(move |x| Ok(if x[0] > mid { alpha } else { 0.0 }))
            }
            BoundarySpec::Annulus => {
                let sol = self.annulus_solution()?;
                if self.radial_dim().is_some() {
                    Box::new(move |x| sol.eval(x[0]))
                } else {
                    Box::new(move |x| sol.eval_point(x))
                }
            }
            BoundarySpec::Expression { expr } => {
                let e = Expression::parse(expr)?;
                Box::new(move |x| e.eval(x))
            }
        })
    }

    pub fn build_problem(&self) -> Result<TransmissionProblem> {
        let grid = Arc::new(self.geometry.build()?);
        let boundary = self.boundary_fn()?;
        let mut g = vec![0.0; grid.len()];
        for i in grid.nodes(crate::geometry::Region::Boundary) {
            g[i] = boundary(&grid.point(i))?;
        }
        TransmissionProblem::with_values(
            grid,
            self.operators.first_order(),
            self.operators.second_order(self.radial_dim())?,
            g,
            self.gap,
        )
    }

    /// Exact solution when one is known for this configuration.
    pub fn oracle(&self) -> Result<Box<dyn Fn(&[f64]) -> Result<f64>>> {
        let no_oracle = || Error::config("no closed-form oracle for this configuration");
        match (&self.boundary, &self.geometry) {
            (BoundarySpec::Oracle1d { alpha }, GeometrySpec::Interval { a, b, interface, eikonal_side, .. }) => {
                let standard = *a == -1.0 && *b == 1.0 && *interface == 0.0 && *eikonal_side == SideSpec::Lower;
                let model = matches!(
                    self.operators.second_order,
                    SecondOrderSpec::HalfNegLaplacian { rhs, .. } if rhs == 0.0
                ) && matches!(self.operators.first_order, FirstOrderSpec::Eikonal { speed } if speed == 1.0);
                if !(standard && model && self.gap == 0.0) {
                    return Err(no_oracle());
                }
                let sol = solve_1d_family(*alpha).solution().ok_or_else(|| {
                    Error::config(format!("no solution exists for α = {alpha}, so there is no oracle"))
                })?;
                Ok(Box::new(move |x| sol.eval(x[0])))
            }
            (BoundarySpec::Annulus, _) => {
                let sol = self.annulus_solution()?;
                if self.radial_dim().is_some() {
                    Ok(Box::new(move |x| sol.eval(x[0])))
                } else {
                    Ok(Box::new(move |x| sol.eval_point(x)))
                }
            }
            (BoundarySpec::Constant { value }, GeometrySpec::Square { x, y, .. }) => {
                let FirstOrderSpec::Eikonal { speed } = self.operators.first_order;
                let c = speed - self.gap;
                let (x, y, v) = (*x, *y, *value);
                Ok(Box::new(move |p| {
                    let d = (p[0] - x[0]).min(x[1] - p[0]).min(p[1] - y[0]).min(y[1] - p[1]);
                    Ok(v + d / c)
                }))
            }
            _ => Err(no_oracle()),
        }
    }
}
