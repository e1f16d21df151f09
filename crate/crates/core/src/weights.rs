//! Weight catalog and the two weight-class norms.
//!
//! The Morrey–Campanato norm is `sup_{x,r} r^α (r^{-n} ∫_{B(x,r)} w^p)^{1/p}`
//! over a declared finite center/radius family.  The Kerman–Sawyer norm is
//! `sup_Q (∫_Q w)^{-1} ∫_Q∫_Q w(x)w(y)|x-y|^{α-n} dx dy` over a dyadic cube
//! family.  Both norms are evaluated with midpoint quadrature; the singular
//! diagonal of the Kerman–Sawyer double integral uses exact same-cell
//! integrals of the Riesz kernel, precomputed per cell size.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::GridSpec;
use crate::quadrature::{gauss_legendre, rescale};

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("point {0:?} lies outside the weight's domain")]
    OutsideDomain(Vec<f64>),
    #[error("invalid weight parameter: {0}")]
    InvalidParameter(String),
    #[error("unparsable weight id '{id}': {reason}")]
    InvalidId { id: String, reason: String },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("weight has no mass on the cube family")]
    EmptyWeight,
    #[error("dimension mismatch: weight built for {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

type Result<T> = std::result::Result<T, WeightError>;

/// A nonnegative weight, analytic-form or grid-sampled.
///
/// The singular `power` kind `w(x) = |x|^{-a}` is evaluated with the half-cell
/// cap: quadratures replace `|x|` by `max(|x|, half_cell)` so that `w(0)` is
/// capped at `(spacing/2)^{-a}` on a grid of that spacing.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Power { exponent: f64 },
    Bump { center: Vec<f64>, width: f64, amplitude: f64 },
    Indicator { corner: Vec<f64>, sides: Vec<f64> },
    Uniform { amplitude: f64 },
    Sampled { grid: GridSpec, values: Vec<f64> },
    Sum(Vec<WeightSpec>),
    Product(Vec<WeightSpec>),
    Pow { base: Box<WeightSpec>, exponent: f64 },
    Scaled { lambda: f64, inner: Box<WeightSpec> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    /// Optional bounding box `(lo, hi)`; evaluation outside errors.
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
}

impl WeightSpec {
    fn from_kind(kind: WeightKind) -> Self {
        WeightSpec { kind, domain: None }
    }

    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(WeightError::InvalidParameter(format!(
                "power exponent must be positive, got {exponent}"
            )));
        }
        Ok(Self::from_kind(WeightKind::Power { exponent }))
    }

    pub fn bump(center: &[f64], width: f64, amplitude: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(WeightError::InvalidParameter(format!(
                "bump width must be positive, got {width}"
            )));
        }
        if amplitude < 0.0 {
            return Err(WeightError::InvalidParameter(format!(
                "bump amplitude must be nonnegative, got {amplitude}"
            )));
        }
        Ok(Self::from_kind(WeightKind::Bump {
            center: center.to_vec(),
            width,
            amplitude,
        }))
    }

    pub fn cube_indicator(corner: &[f64], side: f64) -> Result<Self> {
        if !(side > 0.0) {
            return Err(WeightError::InvalidParameter(format!(
                "indicator side must be positive, got {side}"
            )));
        }
        Ok(Self::from_kind(WeightKind::Indicator {
            corner: corner.to_vec(),
            sides: vec![side; corner.len()],
        }))
    }

    pub fn box_indicator(corner: &[f64], sides: &[f64]) -> Self {
        Self::from_kind(WeightKind::Indicator {
            corner: corner.to_vec(),
            sides: sides.to_vec(),
        })
    }

    pub fn uniform(amplitude: f64) -> Self {
        Self::from_kind(WeightKind::Uniform { amplitude })
    }

    pub fn sampled(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(WeightError::InvalidParameter(
                "sample count must match grid".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(WeightError::InvalidParameter(format!(
                "sampled weight must be nonnegative and finite, got {v}"
            )));
        }
        Ok(Self::from_kind(WeightKind::Sampled {
            grid: grid.clone(),
            values,
        }))
    }

    pub fn sum(parts: Vec<WeightSpec>) -> Self {
        Self::from_kind(WeightKind::Sum(parts))
    }

    pub fn product(parts: Vec<WeightSpec>) -> Self {
        Self::from_kind(WeightKind::Product(parts))
    }

    /// Pointwise power `w^e`, `e > 0`.
    pub fn powf(&self, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(WeightError::InvalidParameter(format!(
                "pointwise power must be positive, got {exponent}"
            )));
        }
        Ok(Self::from_kind(WeightKind::Pow {
            base: Box::new(self.clone()),
            exponent,
        }))
    }

    /// The rescaled weight `x ↦ w(λx)`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(WeightError::InvalidParameter(format!(
                "scale must be positive, got {lambda}"
            )));
        }
        Ok(Self::from_kind(WeightKind::Scaled {
            lambda,
            inner: Box::new(self.clone()),
        }))
    }

    pub fn with_domain(mut self, lo: &[f64], hi: &[f64]) -> Self {
        self.domain = Some((lo.to_vec(), hi.to_vec()));
        self
    }

    /// Pointwise value with cap radius 0 (the `power` kind is `+∞` at the
    /// origin in this mode; quadratures always pass a positive half-cell).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_capped(x, 0.0)
    }

    /// Pointwise value with the half-cell cap applied to singular kinds.
    pub fn eval_capped(&self, x: &[f64], half_cell: f64) -> Result<f64> {
        if let Some((lo, hi)) = &self.domain {
            for a in 0..x.len().min(lo.len()) {
                if x[a] < lo[a] || x[a] > hi[a] {
                    return Err(WeightError::OutsideDomain(x.to_vec()));
                }
            }
        }
        Ok(match &self.kind {
            WeightKind::Power { exponent } => {
                let r = norm(x).max(half_cell);
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    r.powf(-exponent)
                }
            }
            WeightKind::Bump {
                center,
                width,
                amplitude,
            } => {
                let d2: f64 = x
                    .iter()
                    .zip(center.iter().chain(std::iter::repeat(&center[0])))
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum();
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            WeightKind::Indicator { corner, sides } => {
                let inside = x.iter().enumerate().all(|(a, &xi)| {
                    let lo = corner[a.min(corner.len() - 1)];
                    let side = sides[a.min(sides.len() - 1)];
                    xi >= lo && xi < lo + side
                });
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            WeightKind::Uniform { amplitude } => *amplitude,
            WeightKind::Sampled { grid, values } => {
                let n = grid.points_per_axis();
                let h = grid.spacing();
                let mut idx = 0usize;
                let mut outside = false;
                for a in 0..grid.dim() {
                    let j = ((x[a] + grid.half_width()) / h).round() as i64;
                    if j < 0 || j >= n as i64 {
                        outside = true;
                        break;
                    }
                    idx = idx * n + j as usize;
                }
                if outside {
                    0.0
                } else {
                    values[idx]
                }
            }
            WeightKind::Sum(parts) => {
                let mut acc = 0.0;
                for p in parts {
                    acc += p.eval_capped(x, half_cell)?;
                }
                acc
            }
            WeightKind::Product(parts) => {
                let mut acc = 1.0;
                for p in parts {
                    acc *= p.eval_capped(x, half_cell)?;
                }
                acc
            }
            WeightKind::Pow { base, exponent } => base.eval_capped(x, half_cell)?.powf(*exponent),
            WeightKind::Scaled { lambda, inner } => {
                let y: Vec<f64> = x.iter().map(|xi| xi * lambda).collect();
                inner.eval_capped(&y, half_cell * lambda)?
            }
        })
    }

    /// Canonical catalog id (inverse of [`parse_weight_id`] for parsed ids).
    pub fn to_id(&self) -> String {
        match &self.kind {
            WeightKind::Power { exponent } => format!("power:a={exponent}"),
            WeightKind::Bump {
                center,
                width,
                amplitude,
            } => format!(
                "bump:c={},w={width},A={amplitude}",
                center
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("|")
            ),
            WeightKind::Indicator { corner, sides } => format!(
                "indicator:lo={},side={}",
                corner
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("|"),
                sides[0]
            ),
            WeightKind::Uniform { amplitude } => format!("uniform:c={amplitude}"),
            WeightKind::Sum(parts) => parts
                .iter()
                .map(|p| p.to_id())
                .collect::<Vec<_>>()
                .join("+"),
            WeightKind::Product(_) => "<product>".into(),
            WeightKind::Pow { base, exponent } => format!("({})^{}", base.to_id(), exponent),
            WeightKind::Scaled { lambda, inner } => format!("{}@scale{}", inner.to_id(), lambda),
            WeightKind::Sampled { .. } => "<sampled>".into(),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Parses a catalog id like `power:a=1.0`, `bump:c=0,w=1,A=2`,
/// `indicator:lo=0,side=1` or `uniform:c=1`; `+` joins summands.
/// Scalar vector fields are replicated across `dim` axes; components may be
/// given explicitly with `|`, e.g. `c=0.5|0`.
pub fn parse_weight_id(id: &str, dim: usize) -> Result<WeightSpec> {
    let terms: Vec<&str> = id.split('+').collect();
    let mut parts = Vec::new();
    for term in terms {
        parts.push(parse_single(term.trim(), dim)?);
    }
    if parts.len() == 1 {
        Ok(parts.pop().unwrap())
    } else {
        Ok(WeightSpec::sum(parts))
    }
}

fn parse_single(id: &str, dim: usize) -> Result<WeightSpec> {
    let bad = |reason: &str| WeightError::InvalidId {
        id: id.to_string(),
        reason: reason.to_string(),
    };
    let (kind, rest) = id.split_once(':').ok_or_else(|| bad("missing ':'"))?;
    let mut fields = std::collections::BTreeMap::new();
    for kv in rest.split(',') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad("field without '='"))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let scalar = |key: &str| -> Result<f64> {
        fields
            .get(key)
            .ok_or_else(|| bad(&format!("missing field '{key}'")))?
            .parse::<f64>()
            .map_err(|_| bad(&format!("field '{key}' is not a number")))
    };
    let vector = |key: &str| -> Result<Vec<f64>> {
        let raw = fields
            .get(key)
            .ok_or_else(|| bad(&format!("missing field '{key}'")))?;
        let comps: std::result::Result<Vec<f64>, _> =
            raw.split('|').map(|c| c.trim().parse::<f64>()).collect();
        let comps = comps.map_err(|_| bad(&format!("field '{key}' is not a vector")))?;
        if comps.len() == 1 {
            Ok(vec![comps[0]; dim])
        } else if comps.len() == dim {
            Ok(comps)
        } else {
            Err(bad(&format!("field '{key}' has wrong arity")))
        }
    };
    match kind.trim() {
        "power" => WeightSpec::power(scalar("a")?),
        "bump" => WeightSpec::bump(&vector("c")?, scalar("w")?, scalar("A")?),
        "indicator" => WeightSpec::cube_indicator(&vector("lo")?, scalar("side")?),
        "uniform" => Ok(WeightSpec::uniform(scalar("c")?)),
        other => Err(bad(&format!("unknown weight kind '{other}'"))),
    }
}

/// Axis-aligned cube from the origin-anchored dyadic family.
///
/// For levels `j >= 0` the corner coordinates are `corner_index · side` with
/// `side = base_scale · 2^{-j}`.  A symmetric base box `[-L, L)^n` enters the
/// family as a root at level `-1` (corner index `-1` per axis by convention).
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicCube {
    pub level: i32,
    pub corner_index: Vec<i64>,
    pub corner: Vec<f64>,
    pub side: f64,
}

impl DyadicCube {
    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.corner.iter().map(|c| c + 0.5 * self.side).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .all(|(xi, c)| *xi >= *c && *xi < c + self.side)
    }

    pub fn label(&self) -> String {
        format!(
            "level {} corner {:?} side {}",
            self.level, self.corner_index, self.side
        )
    }
}

/// Cubic base box `[lo, lo + side)^n` for dyadic enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseBox {
    pub lo: Vec<f64>,
    pub side: f64,
}

impl BaseBox {
    pub fn anchored(lo: &[f64], side: f64) -> Self {
        BaseBox {
            lo: lo.to_vec(),
            side,
        }
    }

    /// The symmetric box `[-half_width, half_width)^n`.
    pub fn symmetric(dim: usize, half_width: f64) -> Self {
        BaseBox {
            lo: vec![-half_width; dim],
            side: 2.0 * half_width,
        }
    }
}

/// Enumerates the anchored dyadic family intersecting the base box, levels
/// `level_min ..= level_max`, each level complete.
///
/// Anchored boxes (corner a multiple of the side) use base scale `L₀ = side`
/// so level 0 is the box itself.  The symmetric box `[-L, L)^n` uses
/// `L₀ = L`; its standard children live at level 0 and the box itself is
/// included as the level `-1` root when `level_min <= -1`.
///
/// `min_side` is the resolution bound: the smallest requested side
/// `L₀·2^{-level_max}` must be at least `min_side`.
pub fn dyadic_cubes(
    base: &BaseBox,
    level_min: i32,
    level_max: i32,
    min_side: f64,
) -> Result<Vec<DyadicCube>> {
    if level_min > level_max {
        return Err(WeightError::InvalidParameters(format!(
            "level_min {level_min} > level_max {level_max}"
        )));
    }
    let dim = base.lo.len();
    let anchored = base
        .lo
        .iter()
        .all(|lo| (lo / base.side - (lo / base.side).round()).abs() < 1e-9);
    let symmetric = base
        .lo
        .iter()
        .all(|lo| (lo + 0.5 * base.side).abs() < 1e-9 * base.side);
    let (base_scale, box_index, include_root) = if anchored {
        // Box is [k, k+1) · side per axis in units of the side.
        let k: Vec<i64> = base
            .lo
            .iter()
            .map(|lo| (lo / base.side).round() as i64)
            .collect();
        (base.side, k, false)
    } else if symmetric {
        // Box is [-1, 1) · L₀ per axis with L₀ = side/2.
        (0.5 * base.side, vec![-1i64; dim], true)
    } else {
        return Err(WeightError::InvalidParameters(
            "base box must be origin-anchored or symmetric about the origin".into(),
        ));
    };
    let min_level = if include_root { -1 } else { 0 };
    if level_min < min_level {
        return Err(WeightError::InvalidParameters(format!(
            "level_min {level_min} below the family root {min_level}"
        )));
    }
    let smallest = base_scale * (2.0f64).powi(-level_max);
    if min_side > 0.0 && smallest < min_side * (1.0 - 1e-12) {
        return Err(WeightError::InvalidParameters(format!(
            "resolution bound violated: level {level_max} side {smallest} < {min_side}"
        )));
    }

    let mut cubes = Vec::new();
    for level in level_min..=level_max {
        if include_root && level == -1 {
            cubes.push(DyadicCube {
                level: -1,
                corner_index: vec![-1; dim],
                corner: vec![-base_scale; dim],
                side: 2.0 * base_scale,
            });
            continue;
        }
        let side = base_scale * (2.0f64).powi(-level);
        // Per-axis index range of anchored cubes intersecting the box.
        let mut ranges = Vec::with_capacity(dim);
        for a in 0..dim {
            // Box occupies [k_a, k_a + span) in units of L₀ where span is 1
            // for anchored boxes and 2 for the symmetric box.
            let (k, span) = if include_root {
                (box_index[a], 2i64)
            } else {
                (box_index[a], 1i64)
            };
            let (lo_idx, hi_idx) = if level >= 0 {
                (k << level, (k + span) << level)
            } else {
                let shift = (-level) as u32;
                (floor_shr(k, shift), ceil_shr(k + span, shift))
            };
            ranges.push((lo_idx, hi_idx));
        }
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            cubes.push(DyadicCube {
                level,
                corner_index: idx.clone(),
                corner: idx.iter().map(|i| *i as f64 * side).collect(),
                side,
            });
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < ranges[a].1 {
                    continue 'outer;
                }
                idx[a] = ranges[a].0;
                if a == 0 {
                    break 'outer;
                }
            }
        }
    }
    Ok(cubes)
}

fn floor_shr(v: i64, shift: u32) -> i64 {
    v >> shift
}

fn ceil_shr(v: i64, shift: u32) -> i64 {
    let d = 1i64 << shift;
    (v + d - 1) >> shift
}

/// The dyadic family used by the Kerman–Sawyer sup on a symmetric box:
/// root `[-L, L)^n` at level `-1` plus all full levels with side at least
/// `min_side`.
pub fn ks_cube_family(dim: usize, half_width: f64, min_side: f64) -> Result<Vec<DyadicCube>> {
    let level_max = (half_width / min_side).log2().floor() as i32;
    if level_max < 0 {
        return Err(WeightError::InvalidParameters(
            "box too small for the requested resolution".into(),
        ));
    }
    dyadic_cubes(
        &BaseBox::symmetric(dim, half_width),
        -1,
        level_max,
        min_side,
    )
}

/// Midpoint/exact-diagonal quadrature for the singular double integral
/// `∫_Q∫_Q w(x)w(y)|x-y|^{α-n} dx dy`.
#[derive(Debug, Clone)]
pub struct RieszQuadrature {
    pub dim: usize,
    pub alpha: f64,
    pub cells_per_axis: usize,
    unit_same_cell: f64,
}

impl RieszQuadrature {
    pub fn new(dim: usize, alpha: f64, cells_per_axis: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(WeightError::InvalidParameters(format!(
                "alpha must lie in (0, n) = (0, {dim}), got {alpha}"
            )));
        }
        if cells_per_axis < 2 {
            return Err(WeightError::InvalidParameters(
                "need at least 2 cells per axis".into(),
            ));
        }
        Ok(RieszQuadrature {
            dim,
            alpha,
            cells_per_axis,
            unit_same_cell: unit_cell_pair_integral(dim, alpha),
        })
    }

    /// `∫∫_{C×C} |x-y|^{α-n}` over one quadrature cell of size `delta`.
    pub fn same_cell_integral(&self, delta: f64) -> f64 {
        self.unit_same_cell * delta.powf(self.dim as f64 + self.alpha)
    }

    fn cells(&self, cube: &DyadicCube) -> (Vec<Vec<f64>>, f64) {
        let m = self.cells_per_axis;
        let delta = cube.side / m as f64;
        let dim = self.dim;
        let count = m.pow(dim as u32);
        let mut mids = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        loop {
            let mid: Vec<f64> = (0..dim)
                .map(|a| cube.corner[a] + (idx[a] as f64 + 0.5) * delta)
                .collect();
            mids.push(mid);
            let mut a = dim;
            loop {
                if a == 0 {
                    return (mids, delta);
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < m {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// `∫_Q w` by the midpoint rule with the half-cell cap.
    pub fn cube_mass(&self, w: &WeightSpec, cube: &DyadicCube) -> Result<f64> {
        cube_mass_midpoint(w, cube, self.cells_per_axis)
    }

    /// The double integral with exact same-cell diagonal handling.
    pub fn double_integral(&self, w: &WeightSpec, cube: &DyadicCube) -> Result<f64> {
        let (mids, delta) = self.cells(cube);
        let half = 0.5 * delta;
        let vol = delta.powi(self.dim as i32);
        let kernel_pow = self.alpha - self.dim as f64;
        let mut values = Vec::with_capacity(mids.len());
        for mid in &mids {
            values.push(w.eval_capped(mid, half)?);
        }
        let mut acc = 0.0;
        let same = self.same_cell_integral(delta);
        for v in &values {
            acc += v * v * same;
        }
        let vol2 = vol * vol;
        for i in 0..mids.len() {
            if values[i] == 0.0 {
                continue;
            }
            let xi = &mids[i];
            for j in (i + 1)..mids.len() {
                if values[j] == 0.0 {
                    continue;
                }
                let d2: f64 = xi
                    .iter()
                    .zip(&mids[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                acc += 2.0 * values[i] * values[j] * d2.sqrt().powf(kernel_pow) * vol2;
            }
        }
        Ok(acc)
    }
}

/// `∫_Q w` by the midpoint rule with the half-cell cap applied to singular
/// kinds.
pub fn cube_mass_midpoint(w: &WeightSpec, cube: &DyadicCube, cells_per_axis: usize) -> Result<f64> {
    let m = cells_per_axis;
    let dim = cube.dim();
    let delta = cube.side / m as f64;
    let half = 0.5 * delta;
    let vol = delta.powi(dim as i32);
    let mut acc = 0.0;
    let mut idx = vec![0usize; dim];
    loop {
        let mid: Vec<f64> = (0..dim)
            .map(|a| cube.corner[a] + (idx[a] as f64 + 0.5) * delta)
            .collect();
        acc += w.eval_capped(&mid, half)?;
        let mut a = dim;
        loop {
            if a == 0 {
                return Ok(acc * vol);
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < m {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Free-function form of the cube double integral.
pub fn riesz_double_integral(
    w: &WeightSpec,
    cube: &DyadicCube,
    alpha: f64,
    cells_per_axis: usize,
) -> Result<f64> {
    RieszQuadrature::new(cube.dim(), alpha, cells_per_axis)?.double_integral(w, cube)
}

/// `∫_{[0,1]^n}∫_{[0,1]^n} |x-y|^{α-n} dx dy`.
///
/// Closed form in n = 1; in n = 2, 3 reduced to
/// `2^n ∫_{[0,1]^n} Π(1-t_i) |t|^{α-n} dt` and integrated by dyadic peeling
/// toward the origin with per-box Gauss–Legendre and a two-term series for
/// the residual corner.
pub fn unit_cell_pair_integral(dim: usize, alpha: f64) -> f64 {
    if dim == 1 {
        return 2.0 / (alpha * (alpha + 1.0));
    }
    let s_const = corner_power_integral(dim, alpha, 0);
    let t_const = corner_power_integral(dim, alpha, 1);
    let depth = 26;
    let mut total = 0.0;
    let mut scale = 1.0f64;
    for _ in 0..depth {
        total += shell_integral(dim, alpha, scale, true);
        scale *= 0.5;
    }
    // Residual corner [0, ε]^n with Π(1-t_i) ≈ 1 - Σ t_i.
    total += scale.powf(alpha) * s_const - dim as f64 * scale.powf(alpha + 1.0) * t_const;
    (2.0f64).powi(dim as i32) * total
}

/// `∫_{[0,1]^n} t_1^m |t|^{α-n} dt` via the self-similarity
/// `F = shell / (1 - 2^{-(α+m)})`.
fn corner_power_integral(dim: usize, alpha: f64, moment: u32) -> f64 {
    let shell = shell_moment_integral(dim, alpha, moment);
    shell / (1.0 - (2.0f64).powf(-(alpha + moment as f64)))
}

/// Integral over `[0,scale]^n \ [0,scale/2]^n` of `|t|^{α-n}`, optionally
/// times the tent weight `Π(1-t_i)` (`with_tent`), by per-box Gauss–Legendre.
fn shell_integral(dim: usize, alpha: f64, scale: f64, with_tent: bool) -> f64 {
    let p = if dim == 2 { 16 } else { 10 };
    let (gx, gw) = gauss_legendre(p);
    let mut total = 0.0;
    // The 2^n - 1 sub-boxes of [0,scale]^n excluding the origin box.
    for mask in 1u32..(1 << dim) {
        let mut nodes_per_axis = Vec::with_capacity(dim);
        for a in 0..dim {
            let (lo, hi) = if mask & (1 << a) != 0 {
                (0.5 * scale, scale)
            } else {
                (0.0, 0.5 * scale)
            };
            nodes_per_axis.push(rescale(&gx, &gw, lo, hi));
        }
        let mut idx = vec![0usize; dim];
        'boxes: loop {
            let mut weight = 1.0;
            let mut r2 = 0.0;
            let mut tent = 1.0;
            for a in 0..dim {
                let (ref xs, ref ws) = nodes_per_axis[a];
                let x = xs[idx[a]];
                weight *= ws[idx[a]];
                r2 += x * x;
                tent *= 1.0 - x;
            }
            let mut val = r2.sqrt().powf(alpha - dim as f64) * weight;
            if with_tent {
                val *= tent;
            }
            total += val;
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < p {
                    continue 'boxes;
                }
                idx[a] = 0;
                if a == 0 {
                    break 'boxes;
                }
            }
        }
    }
    total
}

fn shell_moment_integral(dim: usize, alpha: f64, moment: u32) -> f64 {
    let p = if dim == 2 { 16 } else { 10 };
    let (gx, gw) = gauss_legendre(p);
    let mut total = 0.0;
    for mask in 1u32..(1 << dim) {
        let mut nodes_per_axis = Vec::with_capacity(dim);
        for a in 0..dim {
            let (lo, hi) = if mask & (1 << a) != 0 {
                (0.5, 1.0)
            } else {
                (0.0, 0.5)
            };
            nodes_per_axis.push(rescale(&gx, &gw, lo, hi));
        }
        let mut idx = vec![0usize; dim];
        'boxes: loop {
            let mut weight = 1.0;
            let mut r2 = 0.0;
            let mut first = 0.0;
            for a in 0..dim {
                let (ref xs, ref ws) = nodes_per_axis[a];
                let x = xs[idx[a]];
                weight *= ws[idx[a]];
                r2 += x * x;
                if a == 0 {
                    first = x;
                }
            }
            total += first.powi(moment as i32) * r2.sqrt().powf(alpha - dim as f64) * weight;
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < p {
                    continue 'boxes;
                }
                idx[a] = 0;
                if a == 0 {
                    break 'boxes;
                }
            }
        }
    }
    total
}

/// Declared center/radius family for the Morrey–Campanato sup.
#[derive(Debug, Clone)]
pub struct McFamily {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Midpoint cells across each ball diameter; the cell size is `2r/m`.
    pub cells_per_diameter: usize,
}

impl McFamily {
    /// Lattice of `counts^n` centers spanning `[-extent, extent]^n` with the
    /// given dyadic radii.
    pub fn lattice(dim: usize, counts: usize, extent: f64, radii: &[f64]) -> Self {
        let mut centers = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let c: Vec<f64> = (0..dim)
                .map(|a| {
                    if counts == 1 {
                        0.0
                    } else {
                        -extent + 2.0 * extent * idx[a] as f64 / (counts - 1) as f64
                    }
                })
                .collect();
            centers.push(c);
            let mut a = dim;
            loop {
                if a == 0 {
                    return McFamily {
                        centers,
                        radii: radii.to_vec(),
                        cells_per_diameter: 24,
                    };
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < counts {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    pub fn rescaled(&self, lambda: f64) -> Self {
        McFamily {
            centers: self
                .centers
                .iter()
                .map(|c| c.iter().map(|x| x / lambda).collect())
                .collect(),
            radii: self.radii.iter().map(|r| r / lambda).collect(),
            cells_per_diameter: self.cells_per_diameter,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McNormResult {
    pub value: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `sup r^α (r^{-n} ∫_{B(x,r)} w^p)^{1/p}` over the declared family.
pub fn mc_norm(w: &WeightSpec, alpha: f64, p: f64, family: &McFamily) -> Result<McNormResult> {
    let dim = family
        .centers
        .first()
        .ok_or_else(|| WeightError::InvalidParameters("empty center family".into()))?
        .len();
    let n = dim as f64;
    if !(alpha > 0.0 && alpha <= n) {
        return Err(WeightError::InvalidParameters(format!(
            "alpha must lie in (0, n], got {alpha}"
        )));
    }
    if !(p >= 1.0 && p <= n / alpha + 1e-12) {
        return Err(WeightError::InvalidParameters(format!(
            "p must lie in [1, n/alpha] = [1, {}], got {p}",
            n / alpha
        )));
    }
    let m = family.cells_per_diameter;
    let mut best: Option<McNormResult> = None;
    for center in &family.centers {
        for &r in &family.radii {
            let delta = 2.0 * r / m as f64;
            let half = 0.5 * delta;
            let vol = delta.powi(dim as i32);
            let r2 = r * r;
            let mut integral = 0.0;
            let mut idx = vec![0usize; dim];
            'cells: loop {
                let mut d2 = 0.0;
                let mut x = vec![0.0; dim];
                for a in 0..dim {
                    x[a] = center[a] - r + (idx[a] as f64 + 0.5) * delta;
                    let dd = x[a] - center[a];
                    d2 += dd * dd;
                }
                if d2 <= r2 {
                    integral += w.eval_capped(&x, half)?.powf(p) * vol;
                }
                for a in (0..dim).rev() {
                    idx[a] += 1;
                    if idx[a] < m {
                        continue 'cells;
                    }
                    idx[a] = 0;
                    if a == 0 {
                        break 'cells;
                    }
                }
            }
            let value = r.powf(alpha) * (integral / r.powf(n)).powf(1.0 / p);
            let better = best.as_ref().map(|b| value > b.value).unwrap_or(true);
            if better {
                best = Some(McNormResult {
                    value,
                    center: center.clone(),
                    radius: r,
                });
            }
        }
    }
    Ok(best.expect("non-empty family"))
}

#[derive(Debug, Clone)]
pub struct KsNormResult {
    pub value: f64,
    pub cube: DyadicCube,
    pub evaluated: usize,
    pub skipped: usize,
}

/// `sup_Q (∫_Q w)^{-1} ∫_Q∫_Q w w |x-y|^{α-n}` over the given cube family.
///
/// Cubes whose mass falls below `1e-12` of the total mass (the coarsest
/// level's sum) are skipped; if every cube is skipped the weight is
/// effectively zero on the family.
pub fn ks_norm(
    w: &WeightSpec,
    alpha: f64,
    cubes: &[DyadicCube],
    cells_per_axis: usize,
) -> Result<KsNormResult> {
    let dim = cubes
        .first()
        .ok_or_else(|| WeightError::InvalidParameters("empty cube family".into()))?
        .dim();
    // alpha = n is the degenerate constant-kernel boundary: the defining
    // ratio collapses to the cube mass, so the singular quadrature is not
    // needed there.
    let boundary = alpha == dim as f64;
    let quad = if boundary {
        None
    } else {
        Some(RieszQuadrature::new(dim, alpha, cells_per_axis)?)
    };
    let coarsest = cubes.iter().map(|c| c.level).min().unwrap();
    let mut total_mass = 0.0;
    for cube in cubes.iter().filter(|c| c.level == coarsest) {
        total_mass += cube_mass_midpoint(w, cube, cells_per_axis)?;
    }
    if !(total_mass > 0.0) {
        return Err(WeightError::EmptyWeight);
    }
    let floor = 1e-12 * total_mass;
    let evaluated: Vec<(usize, Result<Option<f64>>)> = cubes
        .par_iter()
        .enumerate()
        .map(|(i, cube)| {
            let res = (|| {
                let mass = cube_mass_midpoint(w, cube, cells_per_axis)?;
                if mass < floor {
                    return Ok(None);
                }
                match &quad {
                    None => Ok(Some(mass)),
                    Some(q) => Ok(Some(q.double_integral(w, cube)? / mass)),
                }
            })();
            (i, res)
        })
        .collect();
    let mut best: Option<(f64, usize)> = None;
    let mut skipped = 0usize;
    let mut used = 0usize;
    for (i, res) in evaluated {
        match res? {
            None => skipped += 1,
            Some(ratio) => {
                used += 1;
                if best.map(|(v, _)| ratio > v).unwrap_or(true) {
                    best = Some((ratio, i));
                }
            }
        }
    }
    match best {
        None => Err(WeightError::EmptyWeight),
        Some((value, idx)) => Ok(KsNormResult {
            value,
            cube: cubes[idx].clone(),
            evaluated: used,
            skipped,
        }),
    }
}

#[derive(Debug, Clone)]
pub struct KsPowerResult {
    /// `‖w^β‖_{KS_α}^{1/(2β)}`.
    pub value: f64,
    pub inner: KsNormResult,
}

/// `‖w^β‖_{KS_α}^{1/(2β)}`, the weight factor of the smoothing estimates.
pub fn ks_norm_power(
    w: &WeightSpec,
    beta: f64,
    alpha: f64,
    cubes: &[DyadicCube],
    cells_per_axis: usize,
) -> Result<KsPowerResult> {
    if beta < 1.0 {
        return Err(WeightError::InvalidParameters(format!(
            "beta must be >= 1, got {beta}"
        )));
    }
    let powered = w.powf(beta)?;
    let inner = ks_norm(&powered, alpha, cubes, cells_per_axis)?;
    Ok(KsPowerResult {
        value: inner.value.powf(1.0 / (2.0 * beta)),
        inner,
    })
}
