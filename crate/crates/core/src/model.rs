//! Problem instances: domain, weight `b`, boundary profile `q` and the
//! parameters `(epsilon, p)`, together with the closed-form scenario presets
//! for vortex rings and lake vortices.
//!
//! Every preset is an instance of
//!
//! ```text
//! -div(grad u / b) = (b / eps^2) (u - q_eps)_+^p  in Omega,   u = 0 on the boundary,
//! ```
//!
//! with `q_eps = log(1/eps) q`. For rings the meridian half-plane `(r, z)` is
//! the computational plane and `b = r`; for lakes `b` is the depth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample_profile, Grid, Profile};

/// Nodal values on an `n1 x n2` node lattice covering the bounding rectangle,
/// stored with index `i * n2 + j` (`i` along `x1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalValues {
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

impl NodalValues {
    pub fn new(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n1 * n2 {
            return Err(Error::FieldMismatch { expected: n1 * n2, got: values.len() });
        }
        Ok(Self { n1, n2, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    None,
    Disc { center: [f64; 2], radius: f64 },
    /// `true` marks a node whose cell is removed from the domain.
    Mask { n1: usize, n2: usize, cells: Vec<bool> },
}

impl Obstacle {
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        match self {
            Obstacle::None | Obstacle::Mask { .. } => false,
            Obstacle::Disc { center, radius } => {
                let d1 = x1 - center[0];
                let d2 = x2 - center[1];
                d1 * d1 + d2 * d2 < radius * radius
            }
        }
    }
}

/// Bounding rectangle of the computational domain plus its obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    /// `x1 = x1[0] = 0` is the symmetry axis `r = 0`.
    #[serde(default)]
    pub axis: bool,
    #[serde(default = "no_obstacle")]
    pub obstacle: Obstacle,
    /// The rectangle truncates an unbounded domain.
    #[serde(default)]
    pub truncated: bool,
}

fn no_obstacle() -> Obstacle {
    Obstacle::None
}

impl DomainGeometry {
    pub fn rectangle(x1: [f64; 2], x2: [f64; 2]) -> Self {
        Self { x1, x2, axis: false, obstacle: Obstacle::None, truncated: false }
    }

    /// Meridian half-plane `(0, r_max) x (-z_half, z_half)` with the axis flag set.
    pub fn meridian(r_max: f64, z_half: f64) -> Self {
        Self {
            x1: [0.0, r_max],
            x2: [-z_half, z_half],
            axis: true,
            obstacle: Obstacle::None,
            truncated: true,
        }
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacle = obstacle;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let [a1, b1] = self.x1;
        let [a2, b2] = self.x2;
        if !(a1.is_finite() && b1.is_finite() && a2.is_finite() && b2.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite rectangle".into()));
        }
        if !(b1 > a1 && b2 > a2) {
            return Err(Error::InvalidGeometry(format!(
                "rectangle [{a1}, {b1}] x [{a2}, {b2}] has no area"
            )));
        }
        if self.axis && a1 != 0.0 {
            return Err(Error::InvalidGeometry("axis flag requires x1_min = 0".into()));
        }
        if a1 < 0.0 && self.axis {
            return Err(Error::InvalidGeometry("x1_min must be >= 0 on an axisymmetric domain".into()));
        }
        if let Obstacle::Disc { center, radius } = &self.obstacle {
            if !(*radius > 0.0) {
                return Err(Error::InvalidGeometry("obstacle radius must be positive".into()));
            }
            // A disc centred on the symmetry axis is the meridian trace of a ball.
            let left_ok = if self.axis && center[0] == a1 {
                true
            } else {
                center[0] - radius > a1
            };
            let inside = left_ok
                && center[0] + radius < b1
                && center[1] - radius > a2
                && center[1] + radius < b2;
            if !inside {
                return Err(Error::InvalidGeometry("obstacle must lie strictly inside the rectangle".into()));
            }
        }
        if let Obstacle::Mask { n1, n2, cells } = &self.obstacle {
            if cells.len() != n1 * n2 {
                return Err(Error::InvalidGeometry("mask size does not match its dimensions".into()));
            }
            if cells.iter().all(|&c| c) {
                return Err(Error::InvalidGeometry("mask removes the whole domain".into()));
            }
        }
        Ok(())
    }
}

/// The weight `b` of the operator `-div(grad u / b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightProfile {
    /// `b(x) = x1^alpha`.
    Power { alpha: f64 },
    Constant { value: f64 },
    /// `b(x) = base + amplitude * exp(-|x - center|^2 / width^2)`.
    Gaussian { base: f64, amplitude: f64, center: [f64; 2], width: f64 },
    /// `b(x) = base + slope . x`.
    LinearRamp { base: f64, slope: [f64; 2] },
    /// Values at the nodes of the grid; faces use the mean of their endpoints.
    Tabulated(NodalValues),
}

impl WeightProfile {
    /// The lake depth `1 + exp(-|x - x0|^2)`.
    pub fn gaussian_bump(center: [f64; 2]) -> Self {
        WeightProfile::Gaussian { base: 1.0, amplitude: 1.0, center, width: 1.0 }
    }

    /// Closed-form value, `None` for tabulated weights.
    pub fn eval(&self, x1: f64, x2: f64) -> Option<f64> {
        match self {
            WeightProfile::Power { alpha } => Some(if *alpha == 0.0 { 1.0 } else { x1.powf(*alpha) }),
            WeightProfile::Constant { value } => Some(*value),
            WeightProfile::Gaussian { base, amplitude, center, width } => {
                let d1 = x1 - center[0];
                let d2 = x2 - center[1];
                Some(base + amplitude * (-(d1 * d1 + d2 * d2) / (width * width)).exp())
            }
            WeightProfile::LinearRamp { base, slope } => Some(base + slope[0] * x1 + slope[1] * x2),
            WeightProfile::Tabulated(_) => None,
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match self {
            WeightProfile::Power { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

/// The profile `q` with `q_eps = log(1/eps) q` and `psi_0 = -q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryProfile {
    /// `q = W r^2/2 + 3/(8W) (kappa/2pi)^2`.
    WholeSpaceRing { w: f64, kappa: f64 },
    /// Whole-space profile when `kappa < 4 pi W`, otherwise
    /// `q = W r^2/2 + (kappa/2pi - W/2)`.
    CylinderRing { w: f64, kappa: f64 },
    /// `q = W/2 (r^2 - r^2/(r^2+z^2)^(3/2)) + offset`, the stream function of
    /// uniform flow past the unit ball; it equals `W/2 (r^2 - 1/r) + offset`
    /// on `z = 0`.
    OutsideBallRing { w: f64, kappa: f64, offset: f64 },
    /// Translation-invariant far field `W x1^(alpha+1)/(alpha+1) + k`.
    FarField { w: f64, alpha: f64, k: f64 },
    LakeConstant { value: f64 },
    /// `q = -psi_0` for a weighted-harmonic background stream function.
    LakeBackground { psi0: NodalValues },
    Numeric(NodalValues),
}

impl BoundaryProfile {
    /// Closed-form value, `None` for nodal profiles.
    pub fn eval(&self, x1: f64, x2: f64) -> Option<f64> {
        match self {
            BoundaryProfile::WholeSpaceRing { w, kappa } => Some(whole_space_q(*w, *kappa, x1)),
            BoundaryProfile::CylinderRing { w, kappa } => {
                if *kappa < 4.0 * PI * w {
                    Some(whole_space_q(*w, *kappa, x1))
                } else {
                    Some(0.5 * w * x1 * x1 + (kappa / (2.0 * PI) - 0.5 * w))
                }
            }
            BoundaryProfile::OutsideBallRing { w, offset, .. } => {
                let rho2 = x1 * x1 + x2 * x2;
                Some(0.5 * w * x1 * x1 * (1.0 - 1.0 / (rho2 * rho2.sqrt())) + offset)
            }
            BoundaryProfile::FarField { w, alpha, k } => {
                Some(w * x1.powf(alpha + 1.0) / (alpha + 1.0) + k)
            }
            BoundaryProfile::LakeConstant { value } => Some(*value),
            BoundaryProfile::LakeBackground { .. } | BoundaryProfile::Numeric(_) => None,
        }
    }

    /// Nodal table backing this profile, if any. Background profiles are negated.
    pub fn nodal(&self) -> Option<(usize, usize, Vec<f64>)> {
        match self {
            BoundaryProfile::LakeBackground { psi0 } => {
                Some((psi0.n1, psi0.n2, psi0.values.iter().map(|v| -v).collect()))
            }
            BoundaryProfile::Numeric(n) => Some((n.n1, n.n2, n.values.clone())),
            _ => None,
        }
    }
}

fn whole_space_q(w: f64, kappa: f64, r: f64) -> f64 {
    let g = kappa / (2.0 * PI);
    0.5 * w * r * r + 3.0 / (8.0 * w) * g * g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    WholeSpaceRing,
    CylinderRing,
    OutsideBallRing,
    /// Translation-invariant comparison problem for the exterior ring.
    FarFieldRing,
    Lake,
    LakeBackground,
    Custom,
}

impl Scenario {
    pub fn is_ring(self) -> bool {
        matches!(
            self,
            Scenario::WholeSpaceRing | Scenario::CylinderRing | Scenario::OutsideBallRing | Scenario::FarFieldRing
        )
    }

    pub fn is_lake(self) -> bool {
        matches!(self, Scenario::Lake | Scenario::LakeBackground)
    }
}

/// One instance of the weighted semilinear problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub scenario: Scenario,
    pub geometry: DomainGeometry,
    pub weight: WeightProfile,
    pub profile: BoundaryProfile,
    pub epsilon: f64,
    pub p: f64,
    /// Radius of the limiting vortex filament, for ring scenarios.
    pub r_star: Option<f64>,
}

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_EXPONENT: f64 = 2.0;

impl ProblemSpec {
    pub fn new(
        scenario: Scenario,
        geometry: DomainGeometry,
        weight: WeightProfile,
        profile: BoundaryProfile,
    ) -> Result<Self> {
        let spec = Self {
            scenario,
            geometry,
            weight,
            profile,
            epsilon: DEFAULT_EPSILON,
            p: DEFAULT_EXPONENT,
            r_star: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_exponent(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    /// `log(1/eps)`, the factor turning `q` into `q_eps`.
    pub fn log_inv_eps(&self) -> f64 {
        (1.0 / self.epsilon).ln()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must lie in (0, 1), got {}", self.epsilon),
            });
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter { name: "p", reason: format!("must exceed 1, got {}", self.p) });
        }
        if let WeightProfile::Power { alpha } = self.weight {
            if alpha < 0.0 {
                return Err(Error::InvalidParameter { name: "alpha", reason: "must be >= 0".into() });
            }
            if alpha > 0.0 && self.geometry.x1[0] < 0.0 {
                return Err(Error::InvalidGeometry("x1_min must be >= 0 for a power weight".into()));
            }
        }
        Ok(())
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be positive, got {value}") })
    }
}

/// Vortex ring in the whole space, truncated to the meridian rectangle `rect`.
pub fn make_whole_space_ring(w: f64, kappa: f64, rect: DomainGeometry) -> Result<ProblemSpec> {
    check_positive("W", w)?;
    check_positive("kappa", kappa)?;
    if !rect.axis {
        return Err(Error::InvalidGeometry("whole-space ring needs the axis flag".into()));
    }
    let mut spec = ProblemSpec::new(
        Scenario::WholeSpaceRing,
        rect,
        WeightProfile::Power { alpha: 1.0 },
        BoundaryProfile::WholeSpaceRing { w, kappa },
    )?;
    spec.r_star = Some(kappa / (4.0 * PI * w));
    Ok(spec)
}

/// Vortex ring in the unit cylinder, on `(0, 1) x (-z_half, z_half)`.
pub fn make_cylinder_ring(w: f64, kappa: f64, z_half: f64) -> Result<ProblemSpec> {
    check_positive("W", w)?;
    check_positive("kappa", kappa)?;
    check_positive("z_half", z_half)?;
    let mut geometry = DomainGeometry::meridian(1.0, z_half);
    geometry.truncated = true;
    let mut spec = ProblemSpec::new(
        Scenario::CylinderRing,
        geometry,
        WeightProfile::Power { alpha: 1.0 },
        BoundaryProfile::CylinderRing { w, kappa },
    )?;
    spec.r_star = Some(cylinder_r_star(w, kappa));
    Ok(spec)
}

pub fn cylinder_r_star(w: f64, kappa: f64) -> f64 {
    if kappa >= 4.0 * PI * w {
        1.0
    } else {
        kappa / (4.0 * PI * w)
    }
}

/// Unique root `r >= 1` of `2r + 1/r^2 = c`, for `c >= 3`.
pub fn outside_ball_radius(c: f64) -> Result<f64> {
    let f = |r: f64| 2.0 * r + 1.0 / (r * r) - c;
    let mut lo = 1.0;
    let mut hi = 0.5 * c + 1.0;
    if !(f(lo) <= 4.0 * f64::EPSILON * c && f(hi) > 0.0) {
        return Err(Error::RootNotBracketed { lo, hi });
    }
    // f has a double root at r = 1 when c = 3
    if f(lo).abs() <= 4.0 * f64::EPSILON * c {
        return Ok(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Vortex ring outside the unit ball. `rect` must carry the unit-disc obstacle
/// centred at the origin.
pub fn make_outside_ball_ring(w: f64, kappa: f64, rect: DomainGeometry) -> Result<ProblemSpec> {
    check_positive("W", w)?;
    check_positive("kappa", kappa)?;
    if !rect.axis {
        return Err(Error::InvalidGeometry("exterior ring needs the axis flag".into()));
    }
    match rect.obstacle {
        Obstacle::Disc { center, radius } if center == [0.0, 0.0] && radius == 1.0 => {}
        _ => return Err(Error::InvalidGeometry("exterior ring needs the unit disc obstacle".into())),
    }
    let (offset, r_star) = outside_ball_branch(w, kappa)?;
    let mut spec = ProblemSpec::new(
        Scenario::OutsideBallRing,
        rect,
        WeightProfile::Power { alpha: 1.0 },
        BoundaryProfile::OutsideBallRing { w, kappa, offset },
    )?;
    spec.r_star = Some(r_star);
    Ok(spec)
}

/// `(offset, r_star)` of the exterior-ring profile for the branch selected by
/// `kappa` against `6 pi W`.
pub fn outside_ball_branch(w: f64, kappa: f64) -> Result<(f64, f64)> {
    if kappa > 6.0 * PI * w {
        let r = outside_ball_radius(kappa / (2.0 * PI * w))?;
        Ok((1.5 * w * (r * r + 1.0 / r), r))
    } else {
        Ok((kappa / (2.0 * PI), 1.0))
    }
}

/// Translation-invariant companion `q_inf = W r^2/2 + offset` of an exterior
/// ring, on the same rectangle without the obstacle.
pub fn make_far_field_ring(w: f64, offset: f64, rect: DomainGeometry) -> Result<ProblemSpec> {
    check_positive("W", w)?;
    let rect = rect.with_obstacle(Obstacle::None);
    let mut spec = ProblemSpec::new(
        Scenario::FarFieldRing,
        rect,
        WeightProfile::Power { alpha: 1.0 },
        BoundaryProfile::FarField { w, alpha: 1.0, k: offset },
    )?;
    // minimiser of (W r^2/2 + c)^2 / r
    spec.r_star = Some((2.0 * offset / (3.0 * w)).sqrt());
    Ok(spec)
}

/// How the lake profile is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LakeForcing {
    /// Constant `q = kappa/2pi * sup b`.
    Circulation(f64),
    /// Background stream function `psi_0 < 0`, `q = -psi_0`.
    Background(NodalValues),
}

/// Lake vortex on the bounded rectangle `rect`. `sup_b` is the supremum of the
/// depth over the domain (only used in circulation mode).
pub fn make_lake(
    rect: DomainGeometry,
    depth: WeightProfile,
    sup_b: f64,
    forcing: LakeForcing,
) -> Result<ProblemSpec> {
    if depth.exponent().map_or(false, |a| a != 0.0) {
        return Err(Error::InvalidParameter { name: "depth", reason: "power weights are reserved for rings".into() });
    }
    check_depth_positive(&rect, &depth)?;
    match forcing {
        LakeForcing::Circulation(kappa) => {
            check_positive("kappa", kappa)?;
            check_positive("sup_b", sup_b)?;
            ProblemSpec::new(
                Scenario::Lake,
                rect,
                depth,
                BoundaryProfile::LakeConstant { value: kappa / (2.0 * PI) * sup_b },
            )
        }
        LakeForcing::Background(psi0) => {
            if let Some(max) = psi0.values.iter().cloned().reduce(f64::max) {
                if !(max < 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "psi0",
                        reason: format!("must be strictly negative, sup = {max}"),
                    });
                }
            }
            ProblemSpec::new(Scenario::LakeBackground, rect, depth, BoundaryProfile::LakeBackground { psi0 })
        }
    }
}

fn check_depth_positive(rect: &DomainGeometry, depth: &WeightProfile) -> Result<()> {
    let bad = |x1: f64, x2: f64, value: f64| Error::NonPositiveWeight { x1, x2, value };
    match depth {
        WeightProfile::Tabulated(t) => {
            if let Some(v) = t.values.iter().find(|v| !(**v > 0.0)) {
                return Err(bad(f64::NAN, f64::NAN, *v));
            }
        }
        WeightProfile::Constant { value } if !(*value > 0.0) => return Err(bad(0.0, 0.0, *value)),
        WeightProfile::Gaussian { base, amplitude, .. } if !(*base > 0.0 && base + amplitude.min(0.0) > 0.0) => {
            return Err(bad(f64::NAN, f64::NAN, *base));
        }
        WeightProfile::LinearRamp { .. } => {
            for x1 in rect.x1 {
                for x2 in rect.x2 {
                    let v = depth.eval(x1, x2).unwrap_or(f64::NAN);
                    if !(v > 0.0) {
                        return Err(bad(x1, x2, v));
                    }
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Predicted concentration point and limits of the normalized circulation
/// and energy density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub point: [f64; 2],
    pub node: usize,
    /// `2 pi q/b` at the point.
    pub limit_circulation: f64,
    /// `inf q^2/b` over the unknown nodes.
    pub limit_energy_density: f64,
}

/// Argmin of `q^2/b` over the unknown nodes of `grid` (lowest node index on
/// ties).
pub fn predicted_target(spec: &ProblemSpec, grid: &Grid) -> Result<Target> {
    let b = sample_profile(grid, Profile::Weight(&spec.weight))?;
    let q = sample_profile(grid, Profile::Boundary(&spec.profile))?;
    let mut best: Option<(f64, usize)> = None;
    for &k in grid.unknown_nodes() {
        let v = q.values[k] * q.values[k] / b.values[k];
        if best.map_or(true, |(m, _)| v < m) {
            best = Some((v, k));
        }
    }
    let (inf, node) = best.ok_or(Error::InvalidGeometry("grid has no unknown nodes".into()))?;
    Ok(Target {
        point: grid.coords(node),
        node,
        limit_circulation: 2.0 * PI * q.values[node] / b.values[node],
        limit_energy_density: inf,
    })
}
