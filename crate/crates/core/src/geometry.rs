//! Uniform Cartesian grids with a flat (or, for the annulus, approximated)
//! interface between the eikonal side and the Brownian side.
//!
//! Nodes are stored in C order over the axes: axis 0 is `x_1`, the last axis is
//! the normal coordinate `x_n`. The interface normal `ν = ±e_n` points into the
//! Brownian side.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when testing that a length is an integer multiple of `h`.
const COMMENSURATE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Region {
    Eikonal = 0,
    Brownian = 1,
    Interface = 2,
    Boundary = 3,
    Exterior = 4,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::Eikonal,
        Region::Brownian,
        Region::Interface,
        Region::Boundary,
        Region::Exterior,
    ];

    pub fn as_byte(self) -> u8 {
        self as u8
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        Region::ALL
            .get(b as usize)
            .copied()
            .ok_or_else(|| Error::Validation(format!("unknown region byte {b}")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Eikonal => "eikonal",
            Region::Brownian => "brownian",
            Region::Interface => "interface",
            Region::Boundary => "boundary",
            Region::Exterior => "exterior",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Region::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown region tag `{s}`")))
    }

    /// Nodes whose value is an unknown of the discrete problem.
    pub fn is_free(self) -> bool {
        matches!(self, Region::Eikonal | Region::Brownian | Region::Interface)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterfaceShape {
    /// `Γ = Ω ∩ {x_n = level}`.
    Flat { level: f64 },
    /// Grid approximation of a curved interface (annulus); validation only.
    Curved,
    /// No Brownian region.
    Absent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `x_n` below the interface.
    Lower,
    /// `x_n` above the interface.
    Upper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    h: f64,
    origin: Vec<f64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    tags: Vec<Region>,
    normal_sign: f64,
    interface: InterfaceShape,
}

fn steps(length: f64, h: f64, what: &str) -> Result<usize> {
    let ratio = length / h;
    let k = ratio.round();
    if !ratio.is_finite() || (ratio - k).abs() > COMMENSURATE_TOL * ratio.abs().max(1.0) {
        return Err(Error::config(format!(
            "{what}: length/h = {ratio} is not an integer (length {length}, h {h})"
        )));
    }
    Ok(k as usize)
}

fn check_spacing(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("grid spacing must be positive, got {h}")));
    }
    Ok(())
}

impl Grid {
    fn from_parts(
        h: f64,
        origin: Vec<f64>,
        shape: Vec<usize>,
        tags: Vec<Region>,
        normal_sign: f64,
        interface: InterfaceShape,
    ) -> Self {
        let dim = shape.len();
        let mut strides = vec![1; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        debug_assert_eq!(tags.len(), shape.iter().product::<usize>());
        Grid {
            h,
            origin,
            shape,
            strides,
            tags,
            normal_sign,
            interface,
        }
    }

    /// Interval `[a, b]` with the interface at `interface_pos`, eikonal side on the left.
    pub fn line(a: f64, b: f64, interface_pos: f64, h: f64) -> Result<Self> {
        Self::line_oriented(a, b, interface_pos, h, Side::Lower)
    }

    /// Interval grid with the eikonal region on the chosen side of the interface.
    /// Used with `Side::Upper` for the radial reduction of the annulus, where the
    /// eikonal region is the outer shell.
    pub fn line_oriented(a: f64, b: f64, interface_pos: f64, h: f64, eikonal: Side) -> Result<Self> {
        check_spacing(h)?;
        if !(a < interface_pos && interface_pos < b) {
            return Err(Error::config(format!(
                "need a < interface < b, got a={a}, interface={interface_pos}, b={b}"
            )));
        }
        let left = steps(interface_pos - a, h, "left segment")?;
        let right = steps(b - interface_pos, h, "right segment")?;
        if left < 2 || right < 2 {
            return Err(Error::config(format!(
                "fewer than 2 interior nodes per side: (interface-a)/h = {left}, (b-interface)/h = {right}"
            )));
        }
        let n = left + right + 1;
        let (below, above) = match eikonal {
            Side::Lower => (Region::Eikonal, Region::Brownian),
            Side::Upper => (Region::Brownian, Region::Eikonal),
        };
        let tags = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    Region::Boundary
                } else if i == left {
                    Region::Interface
                } else if i < left {
                    below
                } else {
                    above
                }
            })
            .collect();
        let sign = if eikonal == Side::Lower { 1.0 } else { -1.0 };
        Ok(Self::from_parts(
            h,
            vec![a],
            vec![n],
            tags,
            sign,
            InterfaceShape::Flat {
                level: a + left as f64 * h,
            },
        ))
    }

    /// Rectangle `x_range × y_range` with `Γ = {x_2 = interface}`; eikonal below.
    pub fn slab(x_range: (f64, f64), y_range: (f64, f64), interface: f64, h: f64) -> Result<Self> {
        check_spacing(h)?;
        let (x0, x1) = x_range;
        let (y0, y1) = y_range;
        if !(x0 < x1 && y0 < interface && interface < y1) {
            return Err(Error::config(format!(
                "degenerate slab x=({x0},{x1}) y=({y0},{y1}) interface={interface}"
            )));
        }
        let nx = steps(x1 - x0, h, "slab width")? + 1;
        let below = steps(interface - y0, h, "slab lower part")?;
        let above = steps(y1 - interface, h, "slab upper part")?;
        if nx < 3 || below < 2 || above < 2 {
            return Err(Error::config(
                "slab needs at least one interior column and two interior rows per side",
            ));
        }
        let ny = below + above + 1;
        let mut tags = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let tag = if i == 0 || i == nx - 1 || j == 0 || j == ny - 1 {
                    Region::Boundary
                } else if j == below {
                    Region::Interface
                } else if j < below {
                    Region::Eikonal
                } else {
                    Region::Brownian
                };
                tags.push(tag);
            }
        }
        Ok(Self::from_parts(
            h,
            vec![x0, y0],
            vec![nx, ny],
            tags,
            1.0,
            InterfaceShape::Flat {
                level: y0 + below as f64 * h,
            },
        ))
    }

    /// Rectangle with every interior node on the eikonal side (no interface).
    pub fn eikonal_box(x_range: (f64, f64), y_range: (f64, f64), h: f64) -> Result<Self> {
        check_spacing(h)?;
        let nx = steps(x_range.1 - x_range.0, h, "box width")? + 1;
        let ny = steps(y_range.1 - y_range.0, h, "box height")? + 1;
        if nx < 3 || ny < 3 {
            return Err(Error::config("box needs at least one interior node"));
        }
        let mut tags = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let edge = i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
                tags.push(if edge { Region::Boundary } else { Region::Eikonal });
            }
        }
        Ok(Self::from_parts(
            h,
            vec![x_range.0, y_range.0],
            vec![nx, ny],
            tags,
            1.0,
            InterfaceShape::Absent,
        ))
    }

    /// Annulus `r ≤ |x| ≤ R` embedded in `[-R, R]²`, Brownian for `|x| < ρ`,
    /// eikonal for `|x| ≥ ρ`. A node of the outer side with an axis neighbour
    /// strictly inside `|x| < ρ` is tagged as interface.
    pub fn annulus(r: f64, rho: f64, big_r: f64, h: f64) -> Result<Self> {
        check_spacing(h)?;
        if !(0.0 < r && r < rho && rho < big_r) {
            return Err(Error::config(format!(
                "annulus radii must satisfy 0 < r < rho < R, got r={r}, rho={rho}, R={big_r}"
            )));
        }
        if h > big_r - r {
            return Err(Error::config(format!(
                "spacing h={h} exceeds annulus width R-r={}: empty interior",
                big_r - r
            )));
        }
        let half = steps(big_r, h, "annulus outer radius")?;
        let n = 2 * half + 1;
        let radius = |i: usize, j: usize| {
            let x = -big_r + i as f64 * h;
            let y = -big_r + j as f64 * h;
            (x * x + y * y).sqrt()
        };
        let outside = |i: usize, j: usize| {
            let s = radius(i, j);
            s < r || s > big_r
        };
        let mut tags = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let s = radius(i, j);
                let tag = if outside(i, j) {
                    Region::Exterior
                } else if i == 0
                    || j == 0
                    || i == n - 1
                    || j == n - 1
                    || outside(i - 1, j)
                    || outside(i + 1, j)
                    || outside(i, j - 1)
                    || outside(i, j + 1)
                {
                    Region::Boundary
                } else if s < rho {
                    Region::Brownian
                } else if radius(i - 1, j) < rho
                    || radius(i + 1, j) < rho
                    || radius(i, j - 1) < rho
                    || radius(i, j + 1) < rho
                {
                    Region::Interface
                } else {
                    Region::Eikonal
                };
                tags.push(tag);
            }
        }
        if !tags.iter().any(|t| t.is_free()) {
            return Err(Error::config("annulus grid has no interior nodes"));
        }
        Ok(Self::from_parts(
            h,
            vec![-big_r, -big_r],
            vec![n, n],
            tags,
            1.0,
            InterfaceShape::Curved,
        ))
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn tag(&self, node: usize) -> Region {
        self.tags[node]
    }

    pub fn tags(&self) -> &[Region] {
        &self.tags
    }

    pub fn interface(&self) -> &InterfaceShape {
        &self.interface
    }

    pub fn normal_axis(&self) -> usize {
        self.dim() - 1
    }

    /// `+1` if `ν = e_n`, `-1` if `ν = -e_n`.
    pub fn normal_sign(&self) -> f64 {
        self.normal_sign
    }

    pub fn normal(&self) -> Vec<f64> {
        let mut nu = vec![0.0; self.dim()];
        nu[self.normal_axis()] = self.normal_sign;
        nu
    }

    pub fn count(&self, region: Region) -> usize {
        self.tags.iter().filter(|&&t| t == region).count()
    }

    pub fn nodes(&self, region: Region) -> impl Iterator<Item = usize> + '_ {
        self.tags
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t == region)
            .map(|(i, _)| i)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        self.strides
            .iter()
            .map(|&s| {
                let k = rest / s;
                rest %= s;
                k
            })
            .collect()
    }

    pub fn index(&self, multi: &[usize]) -> Option<usize> {
        if multi.len() != self.dim() || multi.iter().zip(&self.shape).any(|(&k, &n)| k >= n) {
            return None;
        }
        Some(multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum())
    }

    pub fn coord(&self, node: usize, axis: usize) -> f64 {
        let k = (node / self.strides[axis]) % self.shape[axis];
        self.origin[axis] + k as f64 * self.h
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(node, a)).collect()
    }

    /// Axis neighbour in direction `step` (±1 grid steps along `axis`).
    pub fn neighbor(&self, node: usize, axis: usize, step: isize) -> Option<usize> {
        let k = (node / self.strides[axis]) % self.shape[axis];
        let target = k as isize + step;
        if target < 0 || target >= self.shape[axis] as isize {
            return None;
        }
        Some((node as isize + step * self.strides[axis] as isize) as usize)
    }

    /// Node obtained by mirroring the normal coordinate about the flat interface.
    pub fn reflect_normal(&self, node: usize) -> Option<usize> {
        let InterfaceShape::Flat { level } = self.interface else {
            return None;
        };
        let axis = self.normal_axis();
        let mut multi = self.multi_index(node);
        let pos = self.origin[axis] + multi[axis] as f64 * self.h;
        let mirrored = ((2.0 * level - pos - self.origin[axis]) / self.h).round();
        if mirrored < 0.0 {
            return None;
        }
        multi[axis] = mirrored as usize;
        self.index(&multi)
    }

    /// Copy of the grid with every node outside `keep` tagged EXTERIOR.
    pub fn restricted(&self, keep: &[bool]) -> Grid {
        let mut out = self.clone();
        for (tag, &k) in out.tags.iter_mut().zip(keep) {
            if !k {
                *tag = Region::Exterior;
            }
        }
        out
    }

    /// Multilinear interpolation of nodal values at an arbitrary point inside the
    /// bounding box. Returns `None` outside the box or if a cell corner is exterior.
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> Option<f64> {
        let dim = self.dim();
        if point.len() != dim {
            return None;
        }
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..dim {
            let t = (point[a] - self.origin[a]) / self.h;
            let last = (self.shape[a] - 1) as f64;
            if !(-1e-12..=last + 1e-12).contains(&t) {
                return None;
            }
            let t = t.clamp(0.0, last);
            let k = (t.floor() as usize).min(self.shape[a].saturating_sub(2));
            base[a] = k;
            frac[a] = t - k as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut node = 0;
            for a in 0..dim {
                let mut m = base[a];
                if corner >> a & 1 == 1 {
                    m += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
                if m >= self.shape[a] {
                    return None;
                }
                node += m * self.strides[a];
            }
            if w == 0.0 {
                continue;
            }
            if self.tags[node] == Region::Exterior {
                return None;
            }
            acc += w * values[node];
        }
        Some(acc)
    }

    pub fn to_json(&self) -> GridJson {
        GridJson {
            dimension: self.dim(),
            h: self.h,
            origin: self.origin.clone(),
            shape: self.shape.clone(),
            tags: self.tags.iter().map(|t| t.as_byte()).collect(),
            normal: self.normal(),
            interface: self.interface.clone(),
        }
    }

    pub fn from_json(json: &GridJson) -> Result<Self> {
        check_spacing(json.h)?;
        if json.dimension == 0
            || json.shape.len() != json.dimension
            || json.origin.len() != json.dimension
            || json.normal.len() != json.dimension
        {
            return Err(Error::Validation("grid JSON has inconsistent dimensions".into()));
        }
        if json.tags.len() != json.shape.iter().product::<usize>() {
            return Err(Error::Validation("grid JSON tag count does not match shape".into()));
        }
        let tags = json
            .tags
            .iter()
            .map(|&b| Region::from_byte(b))
            .collect::<Result<Vec<_>>>()?;
        let sign = json.normal[json.dimension - 1].signum();
        Ok(Self::from_parts(
            json.h,
            json.origin.clone(),
            json.shape.clone(),
            tags,
            sign,
            json.interface.clone(),
        ))
    }
}

/// Serialized grid: tags are a row-major byte array (see [`Region::as_byte`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    pub dimension: usize,
    pub h: f64,
    pub origin: Vec<f64>,
    pub shape: Vec<usize>,
    pub tags: Vec<u8>,
    pub normal: Vec<f64>,
    pub interface: InterfaceShape,
}

/// Node-indexed values on a shared grid. Exterior nodes hold `NaN`.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Validation(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = (0..grid.len())
            .find(|&i| grid.tag(i) != Region::Exterior && !values[i].is_finite())
        {
            return Err(Error::Validation(format!(
                "non-finite value at node {bad} ({:?})",
                grid.point(bad)
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| {
                if grid.tag(i) == Region::Exterior {
                    f64::NAN
                } else {
                    f(&grid.point(i))
                }
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c).expect("constant is finite")
    }

    /// Internal constructor that skips the finiteness check.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// `‖u‖∞` over non-exterior nodes.
    pub fn sup_norm(&self) -> f64 {
        self.active().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    /// `(node, value)` over non-exterior nodes.
    pub fn active(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.tag(*i) != Region::Exterior)
            .map(|(i, &v)| (i, v))
    }

    /// Largest `|u - v|` over non-exterior nodes.
    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.active()
            .map(|(i, v)| (v - other.values[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Solution CSV: one row per node with columns `x1..xn,u,tag`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.grid.dim();
        let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        header.push("u".into());
        header.push("tag".into());
        w.write_record(&header)?;
        for i in 0..self.grid.len() {
            let mut row: Vec<String> = self.grid.point(i).iter().map(|c| format!("{c:?}")).collect();
            row.push(format!("{:?}", self.values[i]));
            row.push(self.grid.tag(i).as_str().into());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a solution CSV written for `grid`; rows must match node order and tags.
    pub fn read_csv<R: Read>(grid: Arc<Grid>, input: R) -> Result<Self> {
        let rows = read_rows(input)?;
        if rows.len() != grid.len() {
            return Err(Error::Validation(format!(
                "solution has {} rows, grid has {} nodes",
                rows.len(),
                grid.len()
            )));
        }
        let tol = 1e-9 * grid.h();
        let mut values = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.coords.len() != grid.dim() {
                return Err(Error::Validation("solution dimension does not match grid".into()));
            }
            let p = grid.point(i);
            if row.coords.iter().zip(&p).any(|(a, b)| (a - b).abs() > tol) || row.tag != grid.tag(i) {
                return Err(Error::Validation(format!(
                    "row {i} does not match grid node {p:?} ({})",
                    grid.tag(i).as_str()
                )));
            }
            values.push(row.value);
        }
        Self::new(grid, values)
    }

    /// Reads a solution CSV and reconstructs a uniform grid from its coordinates.
    /// The normal orientation defaults to `+e_n`; the interface is taken as flat
    /// when all interface nodes share one normal coordinate.
    pub fn read_csv_infer_grid<R: Read>(input: R) -> Result<Self> {
        let rows = read_rows(input)?;
        let Some(first) = rows.first() else {
            return Err(Error::Validation("empty solution file".into()));
        };
        let dim = first.coords.len();
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for row in &rows {
            for (a, &c) in row.coords.iter().enumerate() {
                axes[a].push(c);
            }
        }
        let mut h = f64::INFINITY;
        let mut origin = Vec::with_capacity(dim);
        let mut shape = Vec::with_capacity(dim);
        for coords in &mut axes {
            coords.sort_by(f64::total_cmp);
            coords.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            origin.push(coords[0]);
            shape.push(coords.len());
            for w in coords.windows(2) {
                h = h.min(w[1] - w[0]);
            }
        }
        if !h.is_finite() {
            return Err(Error::Validation("cannot infer spacing from a single node".into()));
        }
        if rows.len() != shape.iter().product::<usize>() {
            return Err(Error::Validation("solution rows do not form a full tensor grid".into()));
        }
        let normal_axis = dim - 1;
        let levels: Vec<f64> = rows
            .iter()
            .filter(|r| r.tag == Region::Interface)
            .map(|r| r.coords[normal_axis])
            .collect();
        let interface = match levels.first() {
            None => InterfaceShape::Absent,
            Some(&l) if levels.iter().all(|&x| (x - l).abs() < 1e-9 * h) => {
                InterfaceShape::Flat { level: l }
            }
            Some(_) => InterfaceShape::Curved,
        };
        let mut grid = Grid::from_parts(h, origin, shape, vec![Region::Exterior; rows.len()], 1.0, interface);
        let mut values = vec![f64::NAN; rows.len()];
        for row in &rows {
            let multi: Vec<usize> = row
                .coords
                .iter()
                .zip(&grid.origin)
                .map(|(c, o)| ((c - o) / h).round() as usize)
                .collect();
            let node = grid
                .index(&multi)
                .ok_or_else(|| Error::Validation("row outside inferred grid".into()))?;
            grid.tags[node] = row.tag;
            values[node] = row.value;
        }
        Self::new(Arc::new(grid), values)
    }
}

struct CsvRow {
    coords: Vec<f64>,
    value: f64,
    tag: Region,
}

fn read_rows<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let ncols = headers.len();
    if ncols < 3 || &headers[ncols - 1] != "tag" || &headers[ncols - 2] != "u" {
        return Err(Error::Validation("solution CSV must have columns x1..xn,u,tag".into()));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Validation(format!("bad number `{s}`: {e}")))
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let coords = (0..ncols - 2).map(|k| parse(&rec[k])).collect::<Result<Vec<_>>>()?;
        rows.push(CsvRow {
            coords,
            value: parse(&rec[ncols - 2])?,
            tag: Region::parse(rec[ncols - 1].trim())?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags_of(g: &Grid) -> Vec<Region> {
        g.tags().to_vec()
    }

    #[test]
    fn line_tags_match_model_geometry() {
        use Region::*;
        let g = Grid::line(-1.0, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(tags_of(&g), vec![Boundary, Eikonal, Interface, Brownian, Boundary]);
        assert_eq!(g.normal(), vec![1.0]);
    }

    #[test]
    fn line_rejects_coarse_spacing() {
        let err = Grid::line(-1.0, 1.0, 0.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("fewer than 2"), "{err}");
    }

    #[test]
    fn line_rejects_non_commensurate_spacing() {
        let err = Grid::line(-1.0, 1.0, 0.0, 0.3).unwrap_err();
        assert!(err.to_string().contains("3.33"), "{err}");
    }

    #[test]
    fn line_counts_nodes() {
        let g = Grid::line(0.0, 3.0, 1.0, 0.5).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g.nodes(Region::Interface).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn radial_line_points_normal_inward() {
        let g = Grid::line_oriented(0.5, 2.0, 1.0, 0.25, Side::Upper).unwrap();
        assert_eq!(g.normal_sign(), -1.0);
        assert_eq!(g.tag(1), Region::Brownian);
        assert_eq!(g.tag(4), Region::Eikonal);
    }

    #[test]
    fn slab_enumeration() {
        let g = Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.5).unwrap();
        assert_eq!(g.len(), 25);
        let on_gamma = (0..g.len()).filter(|&i| g.coord(i, 1).abs() < 1e-12).count();
        assert_eq!(on_gamma, 5);
        // the two ends of the Γ row lie on ∂Ω
        assert_eq!(g.count(Region::Interface), 3);
        let total: usize = Region::ALL.iter().map(|&r| g.count(r)).sum();
        assert_eq!(total, g.len());
    }

    #[test]
    fn slab_reflection_swaps_sides() {
        let g = Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.25).unwrap();
        for i in 0..g.len() {
            let j = g.reflect_normal(i).unwrap();
            let expected = match g.tag(i) {
                Region::Eikonal => Region::Brownian,
                Region::Brownian => Region::Eikonal,
                t => t,
            };
            assert_eq!(g.tag(j), expected);
        }
    }

    #[test]
    fn annulus_exterior_by_radius() {
        let g = Grid::annulus(0.5, 1.0, 2.0, 0.25).unwrap();
        for i in 0..g.len() {
            let p = g.point(i);
            let s = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert_eq!(g.tag(i) == Region::Exterior, s < 0.5 || s > 2.0, "{p:?}");
        }
    }

    #[test]
    fn annulus_rejects_coarse_spacing() {
        assert!(Grid::annulus(0.5, 1.0, 2.0, 1.6).is_err());
    }

    #[test]
    fn free_nodes_have_all_neighbors() {
        let grids = [
            Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.25).unwrap(),
            Grid::annulus(0.5, 1.0, 2.0, 0.1).unwrap(),
            Grid::line(-1.0, 1.0, 0.0, 0.1).unwrap(),
        ];
        for g in &grids {
            for i in (0..g.len()).filter(|&i| g.tag(i).is_free()) {
                for axis in 0..g.dim() {
                    for step in [-1, 1] {
                        let j = g.neighbor(i, axis, step).expect("neighbor present");
                        assert_ne!(g.tag(j), Region::Exterior);
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let g = Grid::line_oriented(0.5, 2.0, 1.0, 0.25, Side::Upper).unwrap();
        let s = serde_json::to_string(&g.to_json()).unwrap();
        let back = Grid::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn csv_round_trip_and_inference() {
        let g = Arc::new(Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.5).unwrap());
        let u = GridFunction::from_fn(g.clone(), |p| p[0] * 0.1 + p[1]).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(g.clone(), buf.as_slice()).unwrap();
        assert_eq!(back.values(), u.values());
        let inferred = GridFunction::read_csv_infer_grid(buf.as_slice()).unwrap();
        assert_eq!(inferred.grid().tags(), g.tags());
        assert_eq!(inferred.grid().shape(), g.shape());
    }

    #[test]
    fn interpolation_is_exact_on_bilinear_data() {
        let g = Grid::slab((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.25).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| {
            let p = g.point(i);
            1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1]
        }).collect();
        let q = [0.31, -0.77];
        let exact = 1.0 + 2.0 * q[0] - q[1] + 0.5 * q[0] * q[1];
        assert!((g.interpolate(&vals, &q).unwrap() - exact).abs() < 1e-12);
        assert!(g.interpolate(&vals, &[1.5, 0.0]).is_none());
    }
}
