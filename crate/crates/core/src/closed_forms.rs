//! Exact solutions: the one-dimensional family on `(-1, 1)` with the interface
//! at 0, and the radial annulus solution.

use serde::Serialize;

use crate::error::{Error, Result};

/// `u(x) = 1 + β - |x - β|` on `[-1, 0]`, `u(x) = αx + (1 + 2β)(1 - x)` on `[0, 1]`.
///
/// `exists` is false for members that are not viscosity solutions (e.g. any
/// candidate for `α < -2`); those can still be evaluated through
/// [`ClosedForm1D::eval_candidate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedForm1D {
    pub alpha: f64,
    pub beta: f64,
    pub exists: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Family1D {
    Solution(ClosedForm1D),
    NoSolution { alpha: f64 },
}

impl Family1D {
    pub fn solution(self) -> Option<ClosedForm1D> {
        match self {
            Family1D::Solution(s) => Some(s),
            Family1D::NoSolution { .. } => None,
        }
    }
}

pub fn solve_1d_family(alpha: f64) -> Family1D {
    if alpha >= 0.0 {
        Family1D::Solution(ClosedForm1D {
            alpha,
            beta: 0.0,
            exists: true,
        })
    } else if alpha >= -2.0 {
        Family1D::Solution(ClosedForm1D {
            alpha,
            beta: alpha / 2.0,
            exists: true,
        })
    } else {
        Family1D::NoSolution { alpha }
    }
}

impl ClosedForm1D {
    /// Family member with a prescribed kink location, not necessarily a solution.
    pub fn candidate(alpha: f64, beta: f64) -> Self {
        let exists = solve_1d_family(alpha)
            .solution()
            .is_some_and(|s| s.beta == beta);
        ClosedForm1D {
            alpha,
            beta,
            exists,
        }
    }

    /// Slope of the linear branch on `[0, 1]`.
    pub fn gamma(&self) -> f64 {
        self.alpha - 1.0 - 2.0 * self.beta
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.exists {
            return Err(Error::usage(format!(
                "no solution exists for α = {}; use eval_candidate",
                self.alpha
            )));
        }
        self.eval_candidate(x)
    }

    pub fn eval_candidate(&self, x: f64) -> Result<f64> {
        if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&x) {
            return Err(Error::usage(format!("x = {x} outside [-1, 1]")));
        }
        Ok(if x <= 0.0 {
            1.0 + self.beta - (x - self.beta).abs()
        } else {
            self.alpha * x + (1.0 + 2.0 * self.beta) * (1.0 - x)
        })
    }
}

/// `u = R - |x|` for `ρ ≤ |x| ≤ R`, `u = A + BΦ(|x|) - |x|²/n` for `r ≤ |x| < ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnulusSolution {
    pub n: u32,
    pub r: f64,
    pub rho: f64,
    pub big_r: f64,
    pub a: f64,
    pub b: f64,
}

/// Fundamental-solution profile: `-ln s` for `n = 2`, `s^{2-n}` for `n ≥ 3`.
pub fn fundamental(n: u32, s: f64) -> f64 {
    if n == 2 {
        -s.ln()
    } else {
        s.powi(2 - n as i32)
    }
}

pub fn fundamental_derivative(n: u32, s: f64) -> f64 {
    if n == 2 {
        -1.0 / s
    } else {
        (2.0 - n as f64) * s.powi(1 - n as i32)
    }
}

fn check_radii(n: u32, r: f64, rho: f64, big_r: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::config(format!("annulus dimension must be ≥ 2, got {n}")));
    }
    if !(0.0 < r && r < rho && rho < big_r) {
        return Err(Error::config(format!(
            "annulus radii must satisfy 0 < r < ρ < R, got r={r}, ρ={rho}, R={big_r}"
        )));
    }
    Ok(())
}

/// Inner-branch slope `BΦ'(ρ) - 2ρ/n` for the constants fixed by continuity.
fn slope_for(n: u32, r: f64, rho: f64, big_r: f64) -> f64 {
    let (_, b) = constants(n, r, rho, big_r);
    b * fundamental_derivative(n, rho) - 2.0 * rho / n as f64
}

fn constants(n: u32, r: f64, rho: f64, big_r: f64) -> (f64, f64) {
    let nf = n as f64;
    let (pr, pp) = (fundamental(n, r), fundamental(n, rho));
    let b = (big_r - rho + rho * rho / nf - r * r / nf) / (pp - pr);
    let a = r * r / nf - b * pr;
    (a, b)
}

pub fn solve_annulus(n: u32, r: f64, big_r: f64, rho: f64) -> Result<AnnulusSolution> {
    check_radii(n, r, rho, big_r)?;
    let (a, b) = constants(n, r, rho, big_r);
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Internal("singular annulus constraint system".into()));
    }
    let sol = AnnulusSolution {
        n,
        r,
        rho,
        big_r,
        a,
        b,
    };
    let slope = sol.slope_at_rho();
    if slope > 1.0 {
        return Err(Error::Infeasible(format!(
            "slope constraint fails at ρ={rho}: BΦ'(ρ) - 2ρ/n = {slope} > 1"
        )));
    }
    Ok(sol)
}

/// Smallest feasible `ρ`, where the slope constraint binds, located by bisection
/// to `1e-10`. Returns the feasible end of the final bracket.
pub fn binding_rho(n: u32, r: f64, big_r: f64) -> Result<f64> {
    check_radii(n, r, 0.5 * (r + big_r), big_r)?;
    let samples = 2000;
    let mut prev = None;
    for k in 1..samples {
        let rho = r + (big_r - r) * k as f64 / samples as f64;
        let feasible = slope_for(n, r, rho, big_r) <= 1.0;
        if feasible {
            let Some(mut lo) = prev else {
                return Err(Error::Infeasible(
                    "slope constraint never binds: feasible arbitrarily close to r".into(),
                ));
            };
            let mut hi = rho;
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if slope_for(n, r, mid, big_r) <= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
        prev = Some(rho);
    }
    Err(Error::Infeasible(format!(
        "no feasible ρ in ({r}, {big_r}) for n={n}"
    )))
}

impl AnnulusSolution {
    pub fn phi(&self, s: f64) -> f64 {
        fundamental(self.n, s)
    }

    pub fn slope_at_rho(&self) -> f64 {
        self.b * fundamental_derivative(self.n, self.rho) - 2.0 * self.rho / self.n as f64
    }

    /// The additional lower bound `≥ -1`, reported but not enforced.
    pub fn lower_slope_ok(&self) -> bool {
        self.slope_at_rho() >= -1.0
    }

    /// Absolute residuals of the boundary condition at `r`, the continuity
    /// condition at `ρ`, and the excess of the slope constraint (0 if satisfied).
    pub fn residuals(&self) -> [f64; 3] {
        let nf = self.n as f64;
        [
            (self.a + self.b * self.phi(self.r) - self.r * self.r / nf).abs(),
            (self.a + self.b * self.phi(self.rho) - self.rho * self.rho / nf - (self.big_r - self.rho)).abs(),
            (self.slope_at_rho() - 1.0).max(0.0),
        ]
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let slack = 1e-12 * self.big_r;
        if !(self.r - slack..=self.big_r + slack).contains(&s) {
            return Err(Error::usage(format!(
                "radius {s} outside [{}, {}]",
                self.r, self.big_r
            )));
        }
        Ok(self.eval_radius(s))
    }

    pub(crate) fn eval_radius(&self, s: f64) -> f64 {
        if s >= self.rho {
            self.big_r - s
        } else {
            self.a + self.b * self.phi(s) - s * s / self.n as f64
        }
    }

    pub fn eval_point(&self, x: &[f64]) -> Result<f64> {
        self.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}
