//! Monte Carlo estimates of expected exit times for the hybrid dynamics:
//! unit-speed controlled motion on the eikonal side, Brownian motion on the
//! Brownian side.
//!
//! Exits are detected after each step with linear interpolation of the exit
//! time. Between two Brownian positions the probability that the path crossed
//! a boundary or the interface is accounted for with the Brownian-bridge
//! formula `exp(-2 d₀ d₁ / dt)` for a locally flat boundary.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridFunction;

/// Estimates with a larger truncated fraction are flagged unreliable.
pub const TRUNCATION_LIMIT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Eikonal,
    Brownian,
}

/// Exact geometry for the simulation; the interface belongs to the eikonal side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum McDomain {
    /// `(a, b)` split at `split`; `lower` below, `upper` above.
    Interval {
        a: f64,
        b: f64,
        split: f64,
        lower: Phase,
        upper: Phase,
    },
    /// Rectangle split at `x_2 = split`.
    Slab {
        x: (f64, f64),
        y: (f64, f64),
        split: f64,
        lower: Phase,
        upper: Phase,
    },
    /// `r < |x| < R`, Brownian for `|x| < ρ`, eikonal for `|x| ≥ ρ`.
    Annulus { r: f64, rho: f64, big_r: f64 },
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl McDomain {
    pub fn dim(&self) -> usize {
        match self {
            McDomain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Signed distance to `∂Ω`, positive inside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            McDomain::Interval { a, b, .. } => (x[0] - a).min(b - x[0]),
            McDomain::Slab { x: xr, y: yr, .. } => (x[0] - xr.0)
                .min(xr.1 - x[0])
                .min(x[1] - yr.0)
                .min(yr.1 - x[1]),
            McDomain::Annulus { r, big_r, .. } => {
                let s = norm(x);
                (s - r).min(big_r - s)
            }
        }
    }

    /// Signed distance to `Γ`, positive on the Brownian side; `None` if there is
    /// no interface between different phases.
    pub fn interface_distance(&self, x: &[f64]) -> Option<f64> {
        match self {
            McDomain::Interval {
                split, lower, upper, ..
            } => (lower != upper).then(|| {
                let d = x[0] - split;
                if *upper == Phase::Brownian {
                    d
                } else {
                    -d
                }
            }),
            McDomain::Slab {
                split, lower, upper, ..
            } => (lower != upper).then(|| {
                let d = x[1] - split;
                if *upper == Phase::Brownian {
                    d
                } else {
                    -d
                }
            }),
            McDomain::Annulus { rho, .. } => Some(rho - norm(x)),
        }
    }

    pub fn phase(&self, x: &[f64]) -> Phase {
        match self {
            McDomain::Interval { lower, upper, .. } | McDomain::Slab { lower, upper, .. } if lower == upper => *lower,
            _ => match self.interface_distance(x) {
                Some(d) if d > 0.0 => Phase::Brownian,
                _ => Phase::Eikonal,
            },
        }
    }

    /// Closest point of `Γ` to `x`.
    fn project_interface(&self, x: &[f64]) -> Vec<f64> {
        match self {
            McDomain::Interval { split, .. } => vec![*split],
            McDomain::Slab { split, .. } => vec![x[0], *split],
            McDomain::Annulus { rho, .. } => {
                let s = norm(x).max(1e-300);
                x.iter().map(|v| v * rho / s).collect()
            }
        }
    }

    /// Unit direction toward the nearest point of `∂Ω`.
    fn nearest_exit_direction(&self, x: &[f64]) -> Vec<f64> {
        match self {
            McDomain::Interval { a, b, .. } => vec![if x[0] - a <= b - x[0] { -1.0 } else { 1.0 }],
            McDomain::Slab { x: xr, y: yr, .. } => {
                let cands = [
                    (x[0] - xr.0, [-1.0, 0.0]),
                    (xr.1 - x[0], [1.0, 0.0]),
                    (x[1] - yr.0, [0.0, -1.0]),
                    (yr.1 - x[1], [0.0, 1.0]),
                ];
                let best = cands.iter().min_by(|p, q| p.0.total_cmp(&q.0)).expect("four sides");
                best.1.to_vec()
            }
            McDomain::Annulus { r, big_r, .. } => {
                let s = norm(x).max(1e-300);
                let out = if s - r < big_r - s { -1.0 } else { 1.0 };
                x.iter().map(|v| out * v / s).collect()
            }
        }
    }
}

pub type DirectionField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Policy {
    /// `-∇u/|∇u|` with `∇u` from centred differences of the interpolated field.
    SteepestDescent(GridFunction),
    /// A prescribed direction field (normalised on use).
    Fixed(DirectionField),
    NearestExit,
}

impl std::fmt::Debug for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Policy::SteepestDescent(_) => f.write_str("SteepestDescent"),
            Policy::Fixed(_) => f.write_str("Fixed"),
            Policy::NearestExit => f.write_str("NearestExit"),
        }
    }
}

impl Policy {
    /// Constant direction.
    pub fn constant(dir: Vec<f64>) -> Self {
        Policy::Fixed(Arc::new(move |_| dir.clone()))
    }

    pub fn direction(&self, domain: &McDomain, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.direction_into(domain, x, &mut out);
        out
    }

    /// Writes the unit direction at `x` into `out`.
    pub fn direction_into(&self, domain: &McDomain, x: &[f64], out: &mut [f64]) {
        match self {
            Policy::NearestExit => {
                out.copy_from_slice(&domain.nearest_exit_direction(x));
                return;
            }
            Policy::Fixed(f) => out.copy_from_slice(&f(x)),
            Policy::SteepestDescent(u) => steepest_descent(u, x, out),
        }
        let n = norm(out);
        if n > 1e-12 {
            out.iter_mut().for_each(|v| *v /= n);
        } else {
            out.copy_from_slice(&domain.nearest_exit_direction(x));
        }
    }

    fn reference_spacing(&self) -> Option<f64> {
        match self {
            Policy::SteepestDescent(u) => Some(u.grid().h()),
            _ => None,
        }
    }
}

fn steepest_descent(u: &GridFunction, x: &[f64], out: &mut [f64]) {
    let grid = u.grid();
    let h = grid.h();
    let v = u.values();
    let mut p = [0.0; 2];
    let n = x.len();
    p[..n].copy_from_slice(x);
    let centre = grid.interpolate(v, &p[..n]);
    for k in 0..n {
        p[k] = x[k] - h;
        let lo = grid.interpolate(v, &p[..n]);
        p[k] = x[k] + h;
        let hi = grid.interpolate(v, &p[..n]);
        p[k] = x[k];
        out[k] = -match (lo, hi, centre) {
            (Some(a), Some(b), _) => (b - a) / (2.0 * h),
            (Some(a), None, Some(c)) => (c - a) / h,
            (None, Some(b), Some(c)) => (b - c) / h,
            _ => 0.0,
        };
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub paths: usize,
    /// Apply the Brownian-bridge crossing correction.
    pub bridge: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            dt: 1e-4,
            t_max: 50.0,
            seed: 42,
            paths: 100_000,
            bridge: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathOutcome {
    Exit(f64),
    Truncated(f64),
}

impl PathOutcome {
    pub fn time(self) -> f64 {
        match self {
            PathOutcome::Exit(t) | PathOutcome::Truncated(t) => t,
        }
    }
}

/// Random source for one path: ChaCha8 seeded from `seed` on stream `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_start(domain: &McDomain, x0: &[f64]) -> Result<()> {
    if x0.len() != domain.dim() {
        return Err(Error::usage(format!(
            "starting point has dimension {}, domain has {}",
            x0.len(),
            domain.dim()
        )));
    }
    if !(domain.boundary_distance(x0) >= 0.0) {
        return Err(Error::usage(format!("starting point {x0:?} lies outside Ω")));
    }
    Ok(())
}

pub fn simulate_path(
    domain: &McDomain,
    policy: &Policy,
    x0: &[f64],
    config: &PathConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PathOutcome> {
    check_start(domain, x0)?;
    if !(config.dt > 0.0 && config.t_max > 0.0) {
        return Err(Error::config("dt and t_max must be positive"));
    }
    Ok(run_path(domain, policy, x0, config, rng))
}

fn run_path(domain: &McDomain, policy: &Policy, x0: &[f64], config: &PathConfig, rng: &mut ChaCha8Rng) -> PathOutcome {
    let dt = config.dt;
    let sdt = dt.sqrt();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    if domain.boundary_distance(&x) <= 0.0 {
        return PathOutcome::Exit(0.0);
    }
    let mut next = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    while t < config.t_max {
        let d0 = domain.boundary_distance(&x);
        match domain.phase(&x) {
            Phase::Eikonal => {
                policy.direction_into(domain, &x, &mut v);
                for k in 0..x.len() {
                    next[k] = x[k] + v[k] * dt;
                }
                let d1 = domain.boundary_distance(&next);
                if d1 <= 0.0 {
                    return PathOutcome::Exit(t + dt * d0 / (d0 - d1));
                }
            }
            Phase::Brownian => {
                for k in 0..x.len() {
                    let xi: f64 = rng.sample(StandardNormal);
                    next[k] = x[k] + sdt * xi;
                }
                let d1 = domain.boundary_distance(&next);
                if d1 <= 0.0 {
                    return PathOutcome::Exit(t + dt * d0 / (d0 - d1));
                }
                if config.bridge {
                    let u: f64 = rng.random();
                    if u < (-2.0 * d0 * d1 / dt).exp() {
                        return PathOutcome::Exit(t + 0.5 * dt);
                    }
                }
                if let (Some(g0), Some(g1)) = (domain.interface_distance(&x), domain.interface_distance(&next)) {
                    let crossed = g1 <= 0.0
                        || (config.bridge && {
                            let u: f64 = rng.random();
                            u < (-2.0 * g0 * g1 / dt).exp()
                        });
                    if crossed {
                        let frac = if g1 <= 0.0 { g0 / (g0 - g1) } else { 0.5 };
                        let target: Vec<f64> = x.iter().zip(&next).map(|(a, b)| a + frac * (b - a)).collect();
                        x = domain.project_interface(&target);
                        t += frac * dt;
                        continue;
                    }
                }
            }
        }
        std::mem::swap(&mut x, &mut next);
        t += dt;
    }
    PathOutcome::Truncated(config.t_max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub x0: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub truncated_fraction: f64,
    pub unreliable: bool,
    /// `dt ≤ h²/2` for the reference grid of the policy (true if none).
    pub dt_resolves_grid: bool,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
}

/// Mean over `N` paths; path `i` uses stream `i` of the seeded generator, and
/// the reduction runs in index order so the result does not depend on the
/// number of threads.
pub fn estimate_value(domain: &McDomain, policy: &Policy, x0: &[f64], config: &PathConfig) -> Result<McEstimate> {
    check_start(domain, x0)?;
    if config.paths < 2 {
        return Err(Error::config("need at least two paths for a standard error"));
    }
    if !(config.dt > 0.0 && config.t_max > 0.0) {
        return Err(Error::config("dt and t_max must be positive"));
    }
    let outcomes: Vec<PathOutcome> = (0..config.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            run_path(domain, policy, x0, config, &mut rng)
        })
        .collect();
    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|o| o.time()).sum::<f64>() / n;
    let var = outcomes.iter().map(|o| (o.time() - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let truncated = outcomes
        .iter()
        .filter(|o| matches!(o, PathOutcome::Truncated(_)))
        .count() as f64
        / n;
    Ok(McEstimate {
        x0: x0.to_vec(),
        mean,
        std_error: (var / n).sqrt(),
        truncated_fraction: truncated,
        unreliable: truncated > TRUNCATION_LIMIT,
        dt_resolves_grid: policy.reference_spacing().is_none_or(|h| config.dt <= 0.5 * h * h),
        paths: config.paths,
        dt: config.dt,
        seed: config.seed,
    })
}
