//! Geometric and field types shared by every solver stage:
//!
//! - [`AmbientFlow`]: polynomial background Stokes flow (ū, p̄, μ).
//! - [`DomainGeometry`]: free space, half-space, or spherical cavity with a
//!   velocity/traction boundary partition.
//! - [`SphereConfiguration`]: a hard-sphere particle arrangement.
//! - [`NumberDensity`]: polynomial particle density n(x) and the volume
//!   fraction c(x) derived from it.
//!
//! Lengths are measured in units of the mean interparticle spacing, so n is
//! O(1), sphere radii ε are small, and domain radii are large.

mod sample;

pub use sample::{sample_configuration, sample_configuration_fixed_n};

use crate::poly3::{divergence, Poly3};
use crate::{Error, Mat3, Result, Vec3};
use std::f64::consts::PI;

/// Background flow (ū, p̄) with viscosity μ, polynomial in position:
/// velocity of total degree ≤ 2, pressure of degree ≤ 1.
///
/// Construction verifies the Stokes equations symbolically, so a successfully
/// built flow is exactly divergence-free and exactly momentum-balanced.
#[derive(Debug, Clone)]
pub struct AmbientFlow {
    viscosity: f64,
    velocity: [Poly3; 3],
    pressure: Poly3,
}

impl AmbientFlow {
    /// Build a flow from explicit polynomial components, checking
    /// ∇·ū = 0 and μ∇²ū = ∇p̄ exactly on the coefficients.
    pub fn new(viscosity: f64, velocity: [Poly3; 3], pressure: Poly3) -> Result<Self> {
        if !(viscosity > 0.0) {
            return Err(Error::InvalidInput("viscosity must be positive".into()));
        }
        if velocity.iter().any(|v| v.degree().unwrap_or(0) > 2) {
            return Err(Error::InvalidInput(
                "ambient velocity must have total degree ≤ 2".into(),
            ));
        }
        if pressure.degree().unwrap_or(0) > 1 {
            return Err(Error::InvalidInput(
                "ambient pressure must have total degree ≤ 1".into(),
            ));
        }
        if !divergence(&velocity).is_zero() {
            return Err(Error::InvalidInput(
                "ambient velocity is not divergence-free".into(),
            ));
        }
        for i in 0..3 {
            let momentum = velocity[i].laplacian().scale(viscosity) - pressure.diff(i);
            if !momentum.is_zero() {
                return Err(Error::InvalidInput(format!(
                    "ambient flow violates the Stokes momentum balance in component {i}"
                )));
            }
        }
        Ok(Self {
            viscosity,
            velocity,
            pressure,
        })
    }

    /// Quiescent fluid.
    pub fn still(viscosity: f64) -> Self {
        Self::new(viscosity, [Poly3::zero(), Poly3::zero(), Poly3::zero()], Poly3::zero())
            .expect("zero flow is always valid")
    }

    /// Linear flow ū = A·x with tr A = 0 (e.g. shear or planar elongation);
    /// the pressure is uniform (zero).
    pub fn linear(viscosity: f64, gradient: &Mat3) -> Result<Self> {
        let velocity = std::array::from_fn(|i| {
            (0..3).fold(Poly3::zero(), |acc, j| {
                acc + Poly3::coord(j).scale(gradient[(i, j)])
            })
        });
        Self::new(viscosity, velocity, Poly3::zero())
    }

    /// Simple shear ū = (rate·y, 0, 0).
    pub fn simple_shear(viscosity: f64, rate: f64) -> Self {
        let mut a = Mat3::zeros();
        a[(0, 1)] = rate;
        Self::linear(viscosity, &a).expect("shear is divergence-free")
    }

    /// Straining flow ū = G·x for a symmetric traceless G.
    pub fn straining(viscosity: f64, g: &Mat3) -> Result<Self> {
        if (g - g.transpose()).norm() > 1e-14 || g.trace().abs() > 1e-14 {
            return Err(Error::InvalidInput(
                "straining flow needs a symmetric traceless tensor".into(),
            ));
        }
        Self::linear(viscosity, g)
    }

    /// Unidirectional parabolic flow ū = (curvature·z², 0, 0) driven by the
    /// matching pressure gradient p̄ = 2 μ curvature x.
    pub fn parabolic(viscosity: f64, curvature: f64) -> Self {
        let velocity = [Poly3::monomial(curvature, 0, 0, 2), Poly3::zero(), Poly3::zero()];
        let pressure = Poly3::monomial(2.0 * viscosity * curvature, 1, 0, 0);
        Self::new(viscosity, velocity, pressure).expect("parabolic flow is Stokes-consistent")
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        Vec3::new(
            self.velocity[0].eval(x),
            self.velocity[1].eval(x),
            self.velocity[2].eval(x),
        )
    }

    pub fn pressure(&self, x: &Vec3) -> f64 {
        self.pressure.eval(x)
    }

    /// Velocity gradient (∇ū)_{ij} = ∂ū_i/∂x_j.
    pub fn velocity_gradient(&self, x: &Vec3) -> Mat3 {
        Mat3::from_fn(|i, j| self.velocity[i].diff(j).eval(x))
    }

    /// Ambient stress σ̄ = −p̄ I + μ(∇ū + ∇ūᵀ).
    pub fn stress(&self, x: &Vec3) -> Mat3 {
        let grad = self.velocity_gradient(x);
        (grad + grad.transpose()) * self.viscosity - Mat3::identity() * self.pressure(x)
    }
}

/// Rate of strain G(x) = ½(∇ū + ∇ūᵀ) of the ambient flow: symmetric, and
/// traceless because ū is divergence-free.
pub fn rate_of_strain(flow: &AmbientFlow, x: &Vec3) -> Mat3 {
    let grad = flow.velocity_gradient(x);
    (grad + grad.transpose()) * 0.5
}

/// Spherical-cap patch of the cavity wall where traction (rather than
/// velocity) is prescribed: all wall points within `half_angle` of `axis`.
#[derive(Debug, Clone)]
pub struct CapPatch {
    pub axis: Vec3,
    pub half_angle: f64,
}

impl CapPatch {
    pub fn new(axis: Vec3, half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < PI) {
            return Err(Error::Geometry("cap half-angle must lie in (0, π)".into()));
        }
        let norm = axis.norm();
        if norm < 1e-12 {
            return Err(Error::Geometry("cap axis must be a nonzero vector".into()));
        }
        Ok(Self {
            axis: axis / norm,
            half_angle,
        })
    }

    pub fn contains_direction(&self, dir: &Vec3) -> bool {
        self.axis.dot(&dir.normalize()) >= self.half_angle.cos()
    }
}

/// Shape of the fluid domain.
#[derive(Debug, Clone)]
pub enum DomainShape {
    /// Unbounded fluid, no walls.
    FreeSpace,
    /// Fluid occupies z > wall_z; the plane is a rigid no-slip wall.
    HalfSpace { wall_z: f64 },
    /// Fluid inside a sphere of radius R_d centered at the origin.
    SphericalCavity { radius: f64 },
}

/// Fluid domain plus its boundary partition: the wall defaults to velocity
/// conditions (∂Ω_u) everywhere, with optional spherical-cap patches carved
/// out as traction conditions (∂Ω_f, cavity only).
#[derive(Debug, Clone)]
pub struct DomainGeometry {
    shape: DomainShape,
    traction_caps: Vec<CapPatch>,
    macro_length: f64,
}

impl DomainGeometry {
    pub fn free_space() -> Self {
        Self {
            shape: DomainShape::FreeSpace,
            traction_caps: Vec::new(),
            // Nominal macroscopic scale; free space has no wall to measure
            // against but downstream feasibility checks still want an O(R).
            macro_length: f64::INFINITY,
        }
    }

    pub fn half_space(wall_z: f64, macro_length: f64) -> Result<Self> {
        if !(macro_length > 1.0) {
            return Err(Error::Geometry("macroscopic length must exceed 1".into()));
        }
        Ok(Self {
            shape: DomainShape::HalfSpace { wall_z },
            traction_caps: Vec::new(),
            macro_length,
        })
    }

    /// Cavity with velocity conditions on the entire wall.
    pub fn spherical_cavity(radius: f64) -> Result<Self> {
        Self::spherical_cavity_with_caps(radius, Vec::new())
    }

    /// Cavity whose wall is split into traction caps (∂Ω_f) and the
    /// complementary velocity region (∂Ω_u). Caps must not overlap.
    pub fn spherical_cavity_with_caps(radius: f64, caps: Vec<CapPatch>) -> Result<Self> {
        if !(radius > 1.0) {
            return Err(Error::Geometry(
                "cavity radius must exceed 1 (macroscopic scale)".into(),
            ));
        }
        for (i, a) in caps.iter().enumerate() {
            for b in caps.iter().skip(i + 1) {
                let gap = a.axis.dot(&b.axis).clamp(-1.0, 1.0).acos();
                if gap < a.half_angle + b.half_angle {
                    return Err(Error::Geometry("traction caps overlap".into()));
                }
            }
        }
        Ok(Self {
            shape: DomainShape::SphericalCavity { radius },
            traction_caps: caps,
            macro_length: radius,
        })
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn traction_caps(&self) -> &[CapPatch] {
        &self.traction_caps
    }

    /// Macroscopic length R (the cavity radius, or a nominal wall scale).
    pub fn macro_length(&self) -> f64 {
        self.macro_length
    }

    /// Signed distance from x to the nearest wall (+∞ in free space;
    /// positive inside the fluid).
    pub fn wall_distance(&self, x: &Vec3) -> f64 {
        match self.shape {
            DomainShape::FreeSpace => f64::INFINITY,
            DomainShape::HalfSpace { wall_z } => x.z - wall_z,
            DomainShape::SphericalCavity { radius } => radius - x.norm(),
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        self.wall_distance(x) > 0.0
    }

    /// Fluid volume (cavity only; unbounded otherwise).
    pub fn volume(&self) -> Option<f64> {
        match self.shape {
            DomainShape::SphericalCavity { radius } => Some(4.0 / 3.0 * PI * radius.powi(3)),
            _ => None,
        }
    }

    /// Is the wall direction `dir` (cavity) inside a traction cap?
    pub fn on_traction_patch(&self, dir: &Vec3) -> bool {
        self.traction_caps.iter().any(|c| c.contains_direction(dir))
    }
}

/// Hard-sphere particle arrangement: centers plus the common radius ε.
#[derive(Debug, Clone)]
pub struct SphereConfiguration {
    centers: Vec<Vec3>,
    radius: f64,
}

impl SphereConfiguration {
    /// Validating constructor: radius bound, pairwise separation, and wall
    /// clearance (`None` uses the default clearance ε).
    pub fn new(
        centers: Vec<Vec3>,
        radius: f64,
        domain: &DomainGeometry,
        clearance: Option<f64>,
    ) -> Result<Self> {
        let cfg = Self { centers, radius };
        cfg.validate(domain, clearance)?;
        Ok(cfg)
    }

    /// Construct without wall checks (free-space utility; still enforces the
    /// radius bound and pairwise separation).
    pub fn unbounded(centers: Vec<Vec3>, radius: f64) -> Result<Self> {
        Self::new(centers, radius, &DomainGeometry::free_space(), Some(0.0))
    }

    /// Check every invariant, erroring on the first violation.
    pub fn validate(&self, domain: &DomainGeometry, clearance: Option<f64>) -> Result<()> {
        let eps = self.radius;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Geometry("sphere radius must lie in (0, 1)".into()));
        }
        let clear = clearance.unwrap_or(eps);
        for (i, a) in self.centers.iter().enumerate() {
            if domain.wall_distance(a) < eps + clear {
                return Err(Error::Geometry(format!(
                    "sphere {i} violates the wall clearance"
                )));
            }
            for (j, b) in self.centers.iter().enumerate().skip(i + 1) {
                if (a - b).norm() < 2.0 * eps {
                    return Err(Error::Geometry(format!("spheres {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    pub fn center(&self, n: usize) -> &Vec3 {
        &self.centers[n]
    }
}

/// Particle number density n(x): a positive polynomial field of degree ≤ 2.
#[derive(Debug, Clone)]
pub struct NumberDensity {
    n: Poly3,
}

impl NumberDensity {
    pub fn new(n: Poly3) -> Result<Self> {
        if n.degree().unwrap_or(0) > 2 {
            return Err(Error::InvalidInput(
                "number density must have total degree ≤ 2".into(),
            ));
        }
        Ok(Self { n })
    }

    pub fn constant(n0: f64) -> Self {
        Self::new(Poly3::constant(n0)).expect("constant density is degree 0")
    }

    /// n(x) = n₀ (1 + g·x).
    pub fn linear(n0: f64, g: &Vec3) -> Self {
        let p = Poly3::constant(1.0)
            + Poly3::coord(0).scale(g.x)
            + Poly3::coord(1).scale(g.y)
            + Poly3::coord(2).scale(g.z);
        Self::new(p.scale(n0)).expect("linear density is degree 1")
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        self.n.eval(x)
    }

    /// The volume fraction c(x) = (4/3)π ε³ n(x).
    ///
    /// This is the single place the conversion lives; everything downstream
    /// calls it rather than re-deriving the factor.
    pub fn volume_fraction(&self, eps: f64, x: &Vec3) -> f64 {
        4.0 / 3.0 * PI * eps.powi(3) * self.value(x)
    }

    pub fn poly(&self) -> &Poly3 {
        &self.n
    }

    /// ∫ n dV over the domain (cavity only: exact polynomial integral).
    pub fn expected_count(&self, domain: &DomainGeometry) -> Result<f64> {
        match *domain.shape() {
            DomainShape::SphericalCavity { radius } => Ok(ball_integral(&self.n, radius)),
            _ => Err(Error::InvalidInput(
                "expected count needs a bounded domain".into(),
            )),
        }
    }

    /// Rigorous upper bound for n on |x| ≤ r, from coefficient magnitudes.
    pub fn upper_bound_in_ball(&self, r: f64) -> f64 {
        monomial_bound(&self.n, r)
    }

    /// Check positivity on a deterministic grid filling the ball |x| ≤ r.
    pub fn positive_in_ball(&self, r: f64) -> bool {
        let m = 12;
        for i in 0..=m {
            for j in 0..=m {
                for k in 0..=m {
                    let p = Vec3::new(
                        r * (2.0 * i as f64 / m as f64 - 1.0),
                        r * (2.0 * j as f64 / m as f64 - 1.0),
                        r * (2.0 * k as f64 / m as f64 - 1.0),
                    );
                    if p.norm() <= r && self.value(&p) <= 0.0 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Exact integral of a polynomial over a ball of radius `r` at the origin.
///
/// Odd monomials vanish; even ones reduce to sphere moments
/// ∮ x̂^{2a} ŷ^{2b} ẑ^{2c} dΩ = 4π (2a−1)!!(2b−1)!!(2c−1)!!/(2a+2b+2c+1)!!.
pub fn ball_integral(p: &Poly3, r: f64) -> f64 {
    fn double_factorial(n: i64) -> f64 {
        let mut acc = 1.0;
        let mut k = n;
        while k > 1 {
            acc *= k as f64;
            k -= 2;
        }
        acc
    }
    let mut acc = crate::util::KahanSum::new();
    // Re-expand via monomials: iterate the polynomial by probing derivative
    // structure is overkill; Poly3 exposes terms through eval only, so work
    // over the canonical monomial list up to its degree.
    let deg = p.degree().unwrap_or(0) as u8;
    for i in 0..=deg {
        for j in 0..=(deg - i) {
            for k in 0..=(deg - i - j) {
                let c = monomial_coefficient(p, i, j, k);
                if c == 0.0 || i % 2 == 1 || j % 2 == 1 || k % 2 == 1 {
                    continue;
                }
                let (a, b, d) = (i as i64, j as i64, k as i64);
                let l = a + b + d;
                let sphere_moment = 4.0 * PI * double_factorial(a - 1)
                    * double_factorial(b - 1)
                    * double_factorial(d - 1)
                    / double_factorial(l + 1);
                let radial = r.powi((l + 3) as i32) / (l + 3) as f64;
                acc.add(c * sphere_moment * radial);
            }
        }
    }
    acc.value()
}

/// Extract the coefficient of x^i y^j z^k by repeated differentiation at 0.
fn monomial_coefficient(p: &Poly3, i: u8, j: u8, k: u8) -> f64 {
    let mut q = p.clone();
    for _ in 0..i {
        q = q.diff(0);
    }
    for _ in 0..j {
        q = q.diff(1);
    }
    for _ in 0..k {
        q = q.diff(2);
    }
    let fact = |m: u8| (1..=m as u64).product::<u64>() as f64;
    q.eval(&Vec3::zeros()) / (fact(i) * fact(j) * fact(k))
}

/// Bound |p(x)| ≤ Σ |c_m| r^{deg m} on the ball |x| ≤ r.
fn monomial_bound(p: &Poly3, r: f64) -> f64 {
    let deg = p.degree().unwrap_or(0) as u8;
    let mut acc = 0.0;
    for i in 0..=deg {
        for j in 0..=(deg - i) {
            for k in 0..=(deg - i - j) {
                let c = monomial_coefficient(p, i, j, k);
                acc += c.abs() * r.powi((i + j + k) as i32);
            }
        }
    }
    acc
}
