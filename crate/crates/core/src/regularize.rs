//! Tangential sup/inf convolutions
//! `u^ε(x) = sup_{y'} u(y', x_n) - |y' - x'|²/(2ε)` and
//! `u_ε(x) = inf_{y'} u(y', x_n) + |y' - x'|²/(2ε)`, evaluated on grid nodes.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{GridFunction, Region};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvolutionParams {
    pub eps: f64,
    /// `‖u‖∞`.
    pub m: f64,
    /// `2√(Mε)`.
    pub r: f64,
}

impl ConvolutionParams {
    pub fn new(eps: f64, m: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::config(format!("ε must lie in (0, 1), got {eps}")));
        }
        Ok(ConvolutionParams {
            eps,
            m,
            r: 2.0 * (m * eps).sqrt(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sup,
    Inf,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sup" => Ok(Mode::Sup),
            "inf" => Ok(Mode::Inf),
            _ => Err(Error::config(format!("unknown convolution mode `{s}`"))),
        }
    }
}

/// Convolved values on the shrunk domain `Ω^r`; entries outside are `NaN`.
#[derive(Clone, Debug)]
pub struct Regularized {
    pub params: ConvolutionParams,
    pub mode: Mode,
    pub inside: Vec<bool>,
    pub values: Vec<f64>,
    source: GridFunction,
}

impl Regularized {
    pub fn source(&self) -> &GridFunction {
        &self.source
    }

    /// Values as a grid function on a grid whose nodes outside `Ω^r` are EXTERIOR.
    pub fn to_grid_function(&self) -> GridFunction {
        let grid = Arc::new(self.source.grid().restricted(&self.inside));
        GridFunction::from_raw(grid, self.values.clone())
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i)
    }

    /// `max |u^ε - u|` over `Ω^r`.
    pub fn max_deviation(&self) -> f64 {
        self.nodes()
            .map(|i| (self.values[i] - self.source.value(i)).abs())
            .fold(0.0, f64::max)
    }
}

/// Nodes whose closed `r`-ball lies within the grid box and meets no EXTERIOR node.
pub fn shrunk_domain(u: &GridFunction, r: f64) -> Vec<bool> {
    let grid = u.grid();
    let h = grid.h();
    let dim = grid.dim();
    let k = (r / h + 1e-9).floor() as isize;
    let offsets: Vec<Vec<isize>> = match dim {
        1 => (-k..=k).map(|a| vec![a]).collect(),
        _ => (-k..=k)
            .flat_map(|a| (-k..=k).map(move |b| vec![a, b]))
            .filter(|o| ((o[0] * o[0] + o[1] * o[1]) as f64).sqrt() * h <= r + 1e-12)
            .collect(),
    };
    (0..grid.len())
        .map(|i| {
            if grid.tag(i) == Region::Exterior {
                return false;
            }
            let multi = grid.multi_index(i);
            for a in 0..dim {
                let x = grid.coord(i, a);
                let lo = grid.origin()[a];
                let hi = lo + (grid.shape()[a] - 1) as f64 * h;
                if x - r < lo - 1e-12 || x + r > hi + 1e-12 {
                    return false;
                }
            }
            offsets.iter().all(|o| {
                let m: Vec<usize> = multi
                    .iter()
                    .zip(o)
                    .map(|(&c, &d)| (c as isize + d) as usize)
                    .collect();
                grid.index(&m).is_some_and(|j| grid.tag(j) != Region::Exterior)
            })
        })
        .collect()
}

fn convolve(u: &GridFunction, eps: f64, mode: Mode) -> Result<Regularized> {
    let grid = u.grid();
    if grid.dim() < 2 {
        return Err(Error::config(
            "tangential convolutions need at least one tangential direction (dimension ≥ 2)",
        ));
    }
    let params = ConvolutionParams::new(eps, u.sup_norm())?;
    let h = grid.h();
    if params.r < h {
        return Err(Error::config(format!(
            "search window r = {} is below the spacing {h}: fewer than 3 tangential nodes",
            params.r
        )));
    }
    let inside = shrunk_domain(u, params.r);
    let k = (params.r / h + 1e-9).floor() as isize;
    let sign = match mode {
        Mode::Sup => 1.0,
        Mode::Inf => -1.0,
    };
    let v = u.values();
    let values = (0..grid.len())
        .map(|i| {
            if !inside[i] {
                return f64::NAN;
            }
            let best = (-k..=k)
                .filter_map(|j| grid.neighbor(i, 0, j))
                .map(|n| {
                    let d = grid.coord(n, 0) - grid.coord(i, 0);
                    sign * v[n] - d * d / (2.0 * eps)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            sign * best
        })
        .collect();
    Ok(Regularized {
        params,
        mode,
        inside,
        values,
        source: u.clone(),
    })
}

pub fn sup_convolution(u: &GridFunction, eps: f64) -> Result<Regularized> {
    convolve(u, eps, Mode::Sup)
}

pub fn inf_convolution(u: &GridFunction, eps: f64) -> Result<Regularized> {
    convolve(u, eps, Mode::Inf)
}

/// Minimum over `Ω^r` of the raw tangential second difference of
/// `w + |x'|²/(2ε)` (not divided by `h²`).
pub fn semiconvexity_defect(w: &Regularized) -> f64 {
    let grid = w.source.grid();
    let eps = w.params.eps;
    let lifted = |i: usize| {
        let x = grid.coord(i, 0);
        w.values[i] + x * x / (2.0 * eps)
    };
    w.nodes()
        .filter_map(|i| {
            let lo = grid.neighbor(i, 0, -1)?;
            let hi = grid.neighbor(i, 0, 1)?;
            (w.inside[lo] && w.inside[hi]).then(|| lifted(lo) - 2.0 * lifted(i) + lifted(hi))
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    fn slab(h: f64) -> Arc<Grid> {
        Arc::new(Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, h).unwrap())
    }

    #[test]
    fn constants_are_fixed() {
        let u = GridFunction::constant(slab(0.05), 0.7);
        for w in [sup_convolution(&u, 0.1).unwrap(), inf_convolution(&u, 0.1).unwrap()] {
            assert!(w.nodes().count() > 0);
            assert!(w.max_deviation() < 1e-15);
        }
    }

    #[test]
    fn abs_profile() {
        let h = 0.01;
        let u = GridFunction::from_fn(slab(h), |x| x[0].abs()).unwrap();
        let w = sup_convolution(&u, 0.1).unwrap();
        let grid = u.grid();
        for i in w.nodes() {
            let x = grid.coord(i, 0);
            assert!((w.values[i] - (x.abs() + 0.05)).abs() <= 2.0 * h, "{x}");
        }
        let w = inf_convolution(&u, 0.1).unwrap();
        let zero = w.nodes().find(|&i| grid.coord(i, 0).abs() < 1e-12).unwrap();
        assert_eq!(w.values[zero], 0.0);
    }

    #[test]
    fn duality_and_monotonicity() {
        let u = GridFunction::from_fn(slab(0.02), |x| (3.0 * x[0]).sin() * 0.3 + x[1]).unwrap();
        let mut neg = u.clone();
        neg.values_mut().iter_mut().for_each(|v| *v = -*v);
        let a = inf_convolution(&u, 0.05).unwrap();
        let b = sup_convolution(&neg, 0.05).unwrap();
        for i in a.nodes() {
            assert_eq!(a.values[i], -b.values[i]);
        }
        let s1 = sup_convolution(&u, 0.025).unwrap();
        let s2 = sup_convolution(&u, 0.05).unwrap();
        for i in s2.nodes() {
            assert!(s1.values[i] <= s2.values[i] && u.value(i) <= s1.values[i]);
        }
    }

    #[test]
    fn defect_examples() {
        let h = 0.02;
        let u = GridFunction::from_fn(slab(h), |x| (5.0 * x[0]).cos() * 0.2 - x[0].abs()).unwrap();
        let w = sup_convolution(&u, 0.05).unwrap();
        assert!(semiconvexity_defect(&w) >= -1e-12);
        let mut raw = sup_convolution(&u, 0.05).unwrap();
        let grid = u.grid().clone();
        for i in raw.nodes().collect::<Vec<_>>() {
            raw.values[i] = -grid.coord(i, 0).abs();
        }
        assert!(semiconvexity_defect(&raw) < -h);
        for i in raw.nodes().collect::<Vec<_>>() {
            raw.values[i] = 0.3 * grid.coord(i, 0) + 1.0;
        }
        assert!((semiconvexity_defect(&raw) - h * h / 0.05).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let line = Arc::new(Grid::line(-1.0, 1.0, 0.0, 0.1).unwrap());
        assert!(sup_convolution(&GridFunction::constant(line, 1.0), 0.1).is_err());
        let u = GridFunction::constant(slab(0.25), 0.01);
        assert!(matches!(sup_convolution(&u, 0.1), Err(Error::Config(_))));
        assert!(sup_convolution(&GridFunction::constant(slab(0.1), 1.0), 1.5).is_err());
    }
}
