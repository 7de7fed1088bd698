//! First- and second-order operators, Pucci extremal operators, support
//! functions of sub-level sets and the Hopf-Lax envelope.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Rays used to sample the boundary of a custom sub-level set in 2D.
pub const RAYS_2D: usize = 720;
/// Bisection tolerance (in `p`-space) for custom sub-level set boundaries.
pub const RAY_TOL: f64 = 1e-9;

pub type FirstOrderFn = Arc<dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync>;
pub type SecondOrderFn = Arc<dyn Fn(&DMatrix<f64>, &[f64], f64) -> f64 + Send + Sync>;
pub type PositionalFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// A user supplied quasi-convex Hamiltonian `H(p, z, x)`.
#[derive(Clone)]
pub struct CustomFirstOrder {
    pub name: String,
    pub eval: FirstOrderFn,
    /// A point with `H(p0, z, x) < 0`, used as the origin of the ray search.
    pub interior_point: Vec<f64>,
    /// Radius of a ball centred at 0 containing `{H ≤ level}` for `level ≤ 0`.
    pub radius_bound: f64,
    pub proper: bool,
    pub quasi_convex: bool,
}

#[derive(Clone)]
pub enum FirstOrderOperator {
    /// `|p| - c`.
    Eikonal { speed: f64 },
    /// `|p - q| - c`.
    ShiftedEikonal { center: Vec<f64>, speed: f64 },
    Custom(CustomFirstOrder),
}

impl fmt::Debug for FirstOrderOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Eikonal { speed } => f.debug_struct("Eikonal").field("speed", speed).finish(),
            Self::ShiftedEikonal { center, speed } => f
                .debug_struct("ShiftedEikonal")
                .field("center", center)
                .field("speed", speed)
                .finish(),
            Self::Custom(c) => f.debug_tuple("Custom").field(&c.name).finish(),
        }
    }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(p: &[f64], x: &[f64]) -> f64 {
    p.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl FirstOrderOperator {
    pub fn eikonal(speed: f64) -> Self {
        Self::Eikonal { speed }
    }

    pub fn eval(&self, p: &[f64], z: f64, x: &[f64]) -> f64 {
        match self {
            Self::Eikonal { speed } => norm(p) - speed,
            Self::ShiftedEikonal { center, speed } => {
                let d: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
                norm(&d) - speed
            }
            Self::Custom(c) => (c.eval)(p, z, x),
        }
    }

    /// Radius of a ball around the origin containing `{p : H(p, z, x) ≤ level}`
    /// for `|z| ≤ z_bound`.
    pub fn sublevel_radius(&self, level: f64, _z_bound: f64) -> f64 {
        match self {
            Self::Eikonal { speed } => (speed + level).max(0.0),
            Self::ShiftedEikonal { center, speed } => norm(center) + (speed + level).max(0.0),
            Self::Custom(c) => c.radius_bound,
        }
    }

    /// Nondecreasing in `z`.
    pub fn is_proper(&self) -> bool {
        match self {
            Self::Custom(c) => c.proper,
            _ => true,
        }
    }

    pub fn is_quasi_convex(&self) -> bool {
        match self {
            Self::Custom(c) => c.quasi_convex,
            _ => true,
        }
    }

    pub fn speed(&self) -> Option<f64> {
        match self {
            Self::Eikonal { speed } | Self::ShiftedEikonal { speed, .. } => Some(*speed),
            Self::Custom(_) => None,
        }
    }
}

/// `F(M, p, z) + f(z, x)` with the ellipticity constants of `F`.
#[derive(Clone)]
pub enum SecondOrderOperator {
    /// `a·(-tr M) - d(x)·p + λ0·z - f`, with `d(x) = a(n-1)/x` when `radial_dim = Some(n)`
    /// (radial reduction of the `n`-dimensional Laplacian, `x` being the radius).
    Affine {
        diffusion: f64,
        radial_dim: Option<u32>,
        zeroth: f64,
        rhs: f64,
    },
    /// `M^±_{λ,Λ}(M) + λ0·z - f`.
    Pucci {
        lambda: f64,
        lambda_bar: f64,
        plus: bool,
        zeroth: f64,
        rhs: f64,
    },
    Custom {
        name: String,
        translation_invariant: SecondOrderFn,
        positional: PositionalFn,
        lambda: f64,
        lambda_bar: f64,
    },
}

impl fmt::Debug for SecondOrderOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine {
                diffusion,
                radial_dim,
                zeroth,
                rhs,
            } => f
                .debug_struct("Affine")
                .field("diffusion", diffusion)
                .field("radial_dim", radial_dim)
                .field("zeroth", zeroth)
                .field("rhs", rhs)
                .finish(),
            Self::Pucci {
                lambda,
                lambda_bar,
                plus,
                zeroth,
                rhs,
            } => f
                .debug_struct("Pucci")
                .field("lambda", lambda)
                .field("lambda_bar", lambda_bar)
                .field("plus", plus)
                .field("zeroth", zeroth)
                .field("rhs", rhs)
                .finish(),
            Self::Custom { name, .. } => f.debug_tuple("Custom").field(name).finish(),
        }
    }
}

/// Coefficients of an affine second-order operator at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineForm {
    pub diffusion: f64,
    pub drift: f64,
    pub zeroth: f64,
    pub rhs: f64,
}

impl SecondOrderOperator {
    /// `½(-Δu) - f`.
    pub fn half_laplacian(rhs: f64) -> Self {
        Self::Affine {
            diffusion: 0.5,
            radial_dim: None,
            zeroth: 0.0,
            rhs,
        }
    }

    /// `½(-Δu) - f` written for radial functions in `n` dimensions.
    pub fn radial_half_laplacian(n: u32, rhs: f64) -> Self {
        Self::Affine {
            diffusion: 0.5,
            radial_dim: Some(n),
            zeroth: 0.0,
            rhs,
        }
    }

    pub fn eval(&self, m: &DMatrix<f64>, p: &[f64], z: f64, x: &[f64]) -> Result<f64> {
        check_symmetric(m)?;
        Ok(match self {
            Self::Affine { .. } => {
                let a = self.affine_at(x).expect("affine");
                -a.diffusion * m.trace() - a.drift * p.iter().sum::<f64>() + a.zeroth * z - a.rhs
            }
            Self::Pucci {
                lambda,
                lambda_bar,
                plus,
                zeroth,
                rhs,
            } => {
                let core = if *plus {
                    pucci_plus(m, *lambda, *lambda_bar)?
                } else {
                    pucci_minus(m, *lambda, *lambda_bar)?
                };
                core + zeroth * z - rhs
            }
            Self::Custom {
                translation_invariant,
                positional,
                ..
            } => translation_invariant(m, p, z) + positional(z, x),
        })
    }

    /// `(λ, Λ)` such that `M⁻(M₁-M₂) ≤ F(M₁)-F(M₂) ≤ M⁺(M₁-M₂)`.
    pub fn ellipticity(&self) -> (f64, f64) {
        match self {
            Self::Affine { diffusion, .. } => (*diffusion, *diffusion),
            Self::Pucci {
                lambda, lambda_bar, ..
            }
            | Self::Custom {
                lambda, lambda_bar, ..
            } => (*lambda, *lambda_bar),
        }
    }

    /// Coefficients at `x` when the operator has the affine form.
    pub fn affine_at(&self, x: &[f64]) -> Option<AffineForm> {
        match self {
            Self::Affine {
                diffusion,
                radial_dim,
                zeroth,
                rhs,
            } => {
                let drift = match radial_dim {
                    Some(n) => diffusion * (*n as f64 - 1.0) / x[0],
                    None => 0.0,
                };
                Some(AffineForm {
                    diffusion: *diffusion,
                    drift,
                    zeroth: *zeroth,
                    rhs: *rhs,
                })
            }
            _ => None,
        }
    }

    /// The same operator with `f` replaced by `f + delta`.
    pub fn with_rhs_shift(&self, delta: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Affine { rhs, .. } | Self::Pucci { rhs, .. } => *rhs += delta,
            Self::Custom { positional, .. } => {
                let inner = positional.clone();
                *positional = Arc::new(move |z, x| inner(z, x) - delta);
            }
        }
        out
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Validation(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Validation(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

fn eigenvalues(m: &DMatrix<f64>, lambda: f64, lambda_bar: f64) -> Result<Vec<f64>> {
    if !(0.0 < lambda && lambda <= lambda_bar) {
        return Err(Error::Validation(format!(
            "ellipticity constants must satisfy 0 < λ ≤ Λ, got λ={lambda}, Λ={lambda_bar}"
        )));
    }
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect())
}

/// `M⁺(M) = sup_{λI ≤ A ≤ ΛI} -tr(AM) = -Σ (λ e⁺ - Λ e⁻)`.
pub fn pucci_plus(m: &DMatrix<f64>, lambda: f64, lambda_bar: f64) -> Result<f64> {
    Ok(-eigenvalues(m, lambda, lambda_bar)?
        .into_iter()
        .map(|e| lambda * e.max(0.0) - lambda_bar * (-e).max(0.0))
        .sum::<f64>())
}

/// `M⁻(M) = inf_{λI ≤ A ≤ ΛI} -tr(AM) = -Σ (Λ e⁺ - λ e⁻)`.
pub fn pucci_minus(m: &DMatrix<f64>, lambda: f64, lambda_bar: f64) -> Result<f64> {
    Ok(-eigenvalues(m, lambda, lambda_bar)?
        .into_iter()
        .map(|e| lambda_bar * e.max(0.0) - lambda * (-e).max(0.0))
        .sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportSign {
    Plus,
    Minus,
}

/// `φ±(x) = ± max { ±p·x : H(p, z, x₀) + t ≤ 0 }`.
#[derive(Clone, Debug)]
pub struct SupportFunction {
    sign: SupportSign,
    op: FirstOrderOperator,
    gap: f64,
    /// Sampled boundary of the sub-level set (custom operators only).
    cloud: Option<Arc<Vec<Vec<f64>>>>,
}

impl SupportFunction {
    /// Sub-level set `{H + gap ≤ 0}` evaluated at `z = 0`, `x = 0` of dimension `dim`.
    pub fn new(sign: SupportSign, op: FirstOrderOperator, gap: f64, dim: usize) -> Result<Self> {
        Self::at(sign, op, gap, dim, 0.0, &vec![0.0; dim])
    }

    pub fn at(
        sign: SupportSign,
        op: FirstOrderOperator,
        gap: f64,
        dim: usize,
        z: f64,
        x: &[f64],
    ) -> Result<Self> {
        if gap < 0.0 || !gap.is_finite() {
            return Err(Error::config(format!("support gap must be ≥ 0, got {gap}")));
        }
        let cloud = match &op {
            FirstOrderOperator::Eikonal { speed } | FirstOrderOperator::ShiftedEikonal { speed, .. } => {
                if gap > *speed {
                    return Err(Error::Infeasible(format!(
                        "sub-level set {{H + {gap} ≤ 0}} is empty for speed {speed}"
                    )));
                }
                None
            }
            FirstOrderOperator::Custom(c) => Some(Arc::new(sample_sublevel(c, gap, dim, z, x)?)),
        };
        Ok(SupportFunction {
            sign,
            op,
            gap,
            cloud,
        })
    }

    pub fn sign(&self) -> SupportSign {
        self.sign
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn operator(&self) -> &FirstOrderOperator {
        &self.op
    }

    /// Radius of the sub-level set ball around 0 (Lipschitz constant of `φ±`).
    pub fn lipschitz(&self) -> f64 {
        match &self.op {
            FirstOrderOperator::Eikonal { speed } => speed - self.gap,
            FirstOrderOperator::ShiftedEikonal { center, speed } => norm(center) + speed - self.gap,
            FirstOrderOperator::Custom(_) => self
                .cloud
                .as_ref()
                .map(|c| c.iter().map(|p| norm(p)).fold(0.0, f64::max))
                .unwrap_or(0.0),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = match self.sign {
            SupportSign::Plus => 1.0,
            SupportSign::Minus => -1.0,
        };
        match &self.op {
            FirstOrderOperator::Eikonal { speed } => s * (speed - self.gap) * norm(x),
            FirstOrderOperator::ShiftedEikonal { center, speed } => {
                dot(center, x) + s * (speed - self.gap) * norm(x)
            }
            FirstOrderOperator::Custom(_) => {
                let cloud = self.cloud.as_ref().expect("custom cloud");
                s * cloud.iter().map(|p| s * dot(p, x)).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

fn ray_directions(dim: usize) -> Result<Vec<Vec<f64>>> {
    match dim {
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => Ok((0..RAYS_2D)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / RAYS_2D as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()),
        _ => Err(Error::config(format!(
            "custom sub-level sets are sampled in dimension 1 or 2, got {dim}"
        ))),
    }
}

fn sample_sublevel(c: &CustomFirstOrder, gap: f64, dim: usize, z: f64, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let h = |p: &[f64]| (c.eval)(p, z, x) + gap;
    let p0 = &c.interior_point;
    if p0.len() != dim {
        return Err(Error::config("interior point dimension mismatch"));
    }
    if h(p0) > 0.0 {
        return Err(Error::Infeasible(format!(
            "interior point {p0:?} is outside {{H + {gap} ≤ 0}}"
        )));
    }
    let reach = c.radius_bound + norm(p0) + 1.0;
    let mut out = Vec::new();
    for e in ray_directions(dim)? {
        let at = |t: f64| -> Vec<f64> { p0.iter().zip(&e).map(|(a, b)| a + t * b).collect() };
        let (mut lo, mut hi) = (0.0, reach);
        if h(&at(hi)) <= 0.0 {
            return Err(Error::config(format!(
                "sub-level set of `{}` exceeds its declared radius bound",
                c.name
            )));
        }
        while hi - lo > RAY_TOL {
            let mid = 0.5 * (lo + hi);
            if h(&at(mid)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(at(lo));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HopfLaxResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub spacing: f64,
    /// Set when the minimum over the window is attained only at its edge.
    pub edge_minimum: bool,
}

/// `ψ(x) = inf_{y'} data(y') + φ⁺(x - (y', 0))` over `y'` sampled with the given
/// spacing in the window `|y' - x'| ≤ R·|x_n| + data_radius`, `R` the sub-level radius.
/// `x` has dimension 1 or 2; `data` receives the tangential coordinates.
pub fn hopf_lax(
    data: &dyn Fn(&[f64]) -> f64,
    sf: &SupportFunction,
    x: &[f64],
    spacing: f64,
    data_radius: f64,
) -> Result<HopfLaxResult> {
    if sf.sign() != SupportSign::Plus {
        return Err(Error::usage("Hopf-Lax envelope uses the upper support function φ⁺"));
    }
    if !(spacing > 0.0) {
        return Err(Error::config(format!("sample spacing must be positive, got {spacing}")));
    }
    let n = x.len();
    let xn = x[n - 1];
    if xn > 0.0 {
        return Err(Error::usage(format!("Hopf-Lax point must satisfy x_n ≤ 0, got {xn}")));
    }
    match n {
        1 => Ok(HopfLaxResult {
            value: data(&[]) + sf.value(x),
            argmin: Vec::new(),
            spacing,
            edge_minimum: false,
        }),
        2 => {
            let radius = sf.lipschitz() * xn.abs() + data_radius;
            let k = (radius / spacing).ceil() as i64;
            let mut best = (f64::INFINITY, 0i64);
            let mut interior_best = f64::INFINITY;
            for j in -k..=k {
                let y = x[0] + j as f64 * spacing;
                let v = data(&[y]) + sf.value(&[x[0] - y, xn]);
                if v < best.0 {
                    best = (v, j);
                }
                if j.abs() < k {
                    interior_best = interior_best.min(v);
                }
            }
            let edge = best.1.abs() == k && k > 0 && best.0 < interior_best;
            Ok(HopfLaxResult {
                value: best.0,
                argmin: vec![x[0] + best.1 as f64 * spacing],
                spacing,
                edge_minimum: edge,
            })
        }
        _ => Err(Error::config(format!("Hopf-Lax supports dimension 1 or 2, got {n}"))),
    }
}
