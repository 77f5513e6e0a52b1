//! Green's functions for Stokes flow in the supported domains.
//!
//! The full kernel T = t + τ combines the free-space point-force solution t
//! with a domain image τ that is regular in the fluid and enforces the wall
//! conditions: T vanishes on velocity boundaries and its wall traction
//! vanishes on traction patches. Submodules:
//!
//! - [`primitives`]: bare singularity tensors and derivatives.
//! - [`free`]: physical free-space kernels (Stokeslet, stress kernel).
//! - [`blake`]: closed-form image for the plane wall.
//! - [`icosphere`]/[`wall`]: collocation-built image operator for the
//!   spherical cavity, cached to disk.

pub mod blake;
pub mod free;
pub mod icosphere;
pub mod primitives;
pub mod wall;

pub use free::{stokeslet, stress_kernel_free, traction_kernel};
pub use wall::{CavityStrengths, WallOperator, NODE_LADDER};

use crate::domain::{DomainGeometry, DomainShape};
use crate::{Error, Mat3, Result, Vec3};
use blake::WallImage;
use primitives as prim;
use std::f64::consts::PI;
use std::sync::Arc;

/// Per-force-direction field of a prepared singularity at one observation
/// point (bare units): velocity columns u[(i, j)], pressure p[j], and
/// gradient grad[l][(i, j)] = ∂u_ij/∂x_l.
#[derive(Debug, Clone)]
pub struct ImageField {
    pub u: Mat3,
    pub p: Vec3,
    pub grad: [Mat3; 3],
}

impl ImageField {
    pub fn zero() -> Self {
        Self {
            u: Mat3::zeros(),
            p: Vec3::zeros(),
            grad: [Mat3::zeros(); 3],
        }
    }

    /// Stress σ[(i,k)] per force direction j (bare units):
    /// σ_ikj = −p_j δ_ik + ∂_k u_ij + ∂_i u_kj.
    pub fn stress(&self) -> [Mat3; 3] {
        std::array::from_fn(|j| {
            Mat3::from_fn(|i, k| {
                let mut s = self.grad[k][(i, j)] + self.grad[i][(k, j)];
                if i == k {
                    s -= self.p[j];
                }
                s
            })
        })
    }

    pub fn add(&mut self, other: &ImageField) {
        self.u += other.u;
        self.p += other.p;
        for l in 0..3 {
            self.grad[l] += other.grad[l];
        }
    }
}

/// Single-column variant for moment (dipole) sources: u_i, p, and
/// grad[(i, l)] = ∂u_i/∂x_l.
#[derive(Debug, Clone)]
pub struct ImageField1 {
    pub u: Vec3,
    pub p: f64,
    pub grad: Mat3,
}

impl ImageField1 {
    pub fn zero() -> Self {
        Self {
            u: Vec3::zeros(),
            p: 0.0,
            grad: Mat3::zeros(),
        }
    }

    /// Stress σ_ik = −p δ_ik + ∂_k u_i + ∂_i u_k (bare units).
    pub fn stress(&self) -> Mat3 {
        Mat3::from_fn(|i, k| {
            let mut s = self.grad[(i, k)] + self.grad[(k, i)];
            if i == k {
                s -= self.p;
            }
            s
        })
    }

    pub fn add(&mut self, other: &ImageField1) {
        self.u += other.u;
        self.p += other.p;
        self.grad += other.grad;
    }
}

/// Free-space point-force field at `obs` for a source at `src` (bare units).
pub fn free_point_field(obs: &Vec3, src: &Vec3) -> ImageField {
    let z = obs - src;
    ImageField {
        u: prim::oseen(&z),
        p: prim::pressure(&z),
        grad: prim::oseen_grad(&z),
    }
}

/// Free-space dipole field with moment M_mj: u_i = −M_mj ∂_m S_ij(obs − src).
pub fn free_moment_field(obs: &Vec3, src: &Vec3, moment: &Mat3) -> ImageField1 {
    let z = obs - src;
    let sg = prim::oseen_grad(&z);
    let sg2 = prim::oseen_grad2(&z);
    let pg = prim::pressure_grad(&z);
    let mut u = Vec3::zeros();
    let mut p = 0.0;
    let mut grad = Mat3::zeros();
    for m in 0..3 {
        for j in 0..3 {
            let c = moment[(m, j)];
            if c == 0.0 {
                continue;
            }
            for i in 0..3 {
                u[i] -= c * sg[m][(i, j)];
                for l in 0..3 {
                    grad[(i, l)] -= c * sg2[m][l][(i, j)];
                }
            }
            p -= c * pg[(j, m)];
        }
    }
    ImageField1 { u, p, grad }
}

/// Green's kernel for one domain: evaluation accessors for the velocity
/// tensor, pressure vector, stress kernel, and the image part, plus the
/// prepared-source machinery the solvers build on.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    domain: DomainGeometry,
    wall: Option<Arc<WallOperator>>,
}

impl GreenKernel {
    /// Kernel for free space or a half-space (no auxiliary operator needed).
    pub fn new(domain: DomainGeometry) -> Self {
        Self { domain, wall: None }
    }

    pub fn free_space() -> Self {
        Self::new(DomainGeometry::free_space())
    }

    /// Attach the wall operator a cavity kernel needs for its images.
    pub fn with_wall_operator(domain: DomainGeometry, wall: Arc<WallOperator>) -> Result<Self> {
        match *domain.shape() {
            DomainShape::SphericalCavity { radius } if radius == wall.radius() => {
                Ok(Self { domain, wall: Some(wall) })
            }
            DomainShape::SphericalCavity { radius } => Err(Error::InvalidInput(format!(
                "wall operator radius {} does not match cavity radius {radius}",
                wall.radius()
            ))),
            _ => Err(Error::InvalidInput(
                "wall operators attach to cavity domains only".into(),
            )),
        }
    }

    pub fn domain(&self) -> &DomainGeometry {
        &self.domain
    }

    pub fn wall_operator(&self) -> Option<&Arc<WallOperator>> {
        self.wall.as_ref()
    }

    fn check_interior(&self, x: &Vec3) -> Result<()> {
        if !self.domain.contains(x) {
            return Err(Error::Geometry(format!(
                "point {x:?} lies outside the fluid domain"
            )));
        }
        Ok(())
    }

    /// Prepare the image of a unit point force at `y`; evaluation at any
    /// number of observation points then costs no further solves.
    pub fn prepare(&self, y: &Vec3) -> Result<PreparedPoint> {
        self.check_interior(y)?;
        let image = match *self.domain.shape() {
            DomainShape::FreeSpace => PointImage::None,
            DomainShape::HalfSpace { wall_z } => PointImage::Wall(WallImage::new(y, wall_z)),
            DomainShape::SphericalCavity { .. } => {
                let wall = self.wall.as_ref().ok_or_else(|| {
                    Error::InvalidInput("cavity kernel has no wall operator attached".into())
                })?;
                PointImage::Cavity(wall.prepare_stokeslet(y))
            }
        };
        Ok(PreparedPoint { source: *y, image })
    }

    /// Prepare the image of a point-force dipole at `y` with moment M_mj.
    ///
    /// The plane-wall image derivative is taken by central differences over
    /// the source position (the closed form differentiates smoothly; step
    /// 1e-5 gives ~1e-9 relative accuracy); the cavity image differentiates
    /// the collocation right-hand side analytically.
    pub fn prepare_moment(&self, y: &Vec3, moment: &Mat3) -> Result<PreparedMoment> {
        self.check_interior(y)?;
        let image = match *self.domain.shape() {
            DomainShape::FreeSpace => MomentImage::None,
            DomainShape::HalfSpace { wall_z } => {
                let h = 1e-5;
                let mut parts = Vec::new();
                for m in 0..3 {
                    let col = Vec3::new(moment[(m, 0)], moment[(m, 1)], moment[(m, 2)]);
                    if col.norm() == 0.0 {
                        continue;
                    }
                    let mut yp = *y;
                    let mut ym = *y;
                    yp[m] += h;
                    ym[m] -= h;
                    parts.push(MomentWallPart {
                        plus: WallImage::new(&yp, wall_z),
                        minus: WallImage::new(&ym, wall_z),
                        weights: col / (2.0 * h),
                    });
                }
                MomentImage::Wall(parts)
            }
            DomainShape::SphericalCavity { .. } => {
                let wall = self.wall.as_ref().ok_or_else(|| {
                    Error::InvalidInput("cavity kernel has no wall operator attached".into())
                })?;
                MomentImage::Cavity(wall.prepare_moment(y, moment))
            }
        };
        Ok(PreparedMoment { source: *y, moment: *moment, image })
    }

    /// Velocity tensor and pressure vector of the full kernel:
    /// T_ij(x, y) = t_ij + τ_ij and P_i, physical units for viscosity `mu`
    /// (x observation, y source).
    pub fn velocity_tensor(&self, x: &Vec3, y: &Vec3, mu: f64) -> Result<(Mat3, Vec3)> {
        let prep = self.prepare(y)?;
        let f = prep.total_at(x)?;
        Ok((f.u / (8.0 * PI * mu), f.p / (8.0 * PI)))
    }

    /// Image part τ_ij(x, y) and its pressure π_i (physical units).
    pub fn image(&self, x: &Vec3, y: &Vec3, mu: f64) -> Result<(Mat3, Vec3)> {
        match *self.domain.shape() {
            DomainShape::FreeSpace => Err(Error::InvalidInput(
                "free space has no image system".into(),
            )),
            _ => {
                let prep = self.prepare(y)?;
                self.check_interior(x)?;
                let f = prep.image_at(x);
                Ok((f.u / (8.0 * PI * mu), f.p / (8.0 * PI)))
            }
        }
    }

    /// Stress kernel of the Green's pair: out[k][(i, j)] is the (i, j) stress
    /// component at `y` of the velocity/pressure pair generated by a unit
    /// force in direction k at `x` (physical units, μ-independent). In free
    /// space this is the closed form (3/4π) r_i r_j r_k/r⁵ with r = x − y.
    pub fn stress_kernel(&self, x: &Vec3, y: &Vec3) -> Result<[Mat3; 3]> {
        if x == y {
            return Err(Error::Singular("stress kernel evaluated at its pole".into()));
        }
        self.check_interior(x)?;
        self.check_interior(y)?;
        let prep = self.prepare(x)?;
        let f = prep.total_at(y)?;
        let sig = f.stress();
        Ok(std::array::from_fn(|k| sig[k] / (8.0 * PI)))
    }
}

#[derive(Debug, Clone)]
enum PointImage {
    None,
    Wall(WallImage),
    Cavity(CavityStrengths),
}

/// A point force with its domain image, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct PreparedPoint {
    source: Vec3,
    image: PointImage,
}

impl PreparedPoint {
    pub fn source(&self) -> &Vec3 {
        &self.source
    }

    /// Image contribution τ at `obs` (bare units; zero in free space).
    pub fn image_at(&self, obs: &Vec3) -> ImageField {
        match &self.image {
            PointImage::None => ImageField::zero(),
            PointImage::Wall(w) => w.eval(obs),
            PointImage::Cavity(c) => c.field(obs),
        }
    }

    /// Total field t + τ at `obs` (bare units).
    pub fn total_at(&self, obs: &Vec3) -> Result<ImageField> {
        if obs == &self.source {
            return Err(Error::Singular("kernel evaluated at its pole".into()));
        }
        let mut f = free_point_field(obs, &self.source);
        f.add(&self.image_at(obs));
        Ok(f)
    }
}

#[derive(Debug, Clone)]
struct MomentWallPart {
    plus: WallImage,
    minus: WallImage,
    weights: Vec3,
}

#[derive(Debug, Clone)]
enum MomentImage {
    None,
    Wall(Vec<MomentWallPart>),
    Cavity(CavityStrengths),
}

/// A point-force dipole (moment source) with its domain image.
#[derive(Debug, Clone)]
pub struct PreparedMoment {
    source: Vec3,
    moment: Mat3,
    image: MomentImage,
}

impl PreparedMoment {
    pub fn source(&self) -> &Vec3 {
        &self.source
    }

    pub fn moment(&self) -> &Mat3 {
        &self.moment
    }

    /// Image contribution at `obs` (bare units).
    pub fn image_at(&self, obs: &Vec3) -> ImageField1 {
        match &self.image {
            MomentImage::None => ImageField1::zero(),
            MomentImage::Wall(parts) => {
                let mut out = ImageField1::zero();
                for part in parts {
                    let fp = part.plus.eval(obs);
                    let fm = part.minus.eval(obs);
                    for j in 0..3 {
                        let w = part.weights[j];
                        if w == 0.0 {
                            continue;
                        }
                        for i in 0..3 {
                            out.u[i] += w * (fp.u[(i, j)] - fm.u[(i, j)]);
                            for l in 0..3 {
                                out.grad[(i, l)] += w * (fp.grad[l][(i, j)] - fm.grad[l][(i, j)]);
                            }
                        }
                        out.p += w * (fp.p[j] - fm.p[j]);
                    }
                }
                out
            }
            MomentImage::Cavity(c) => c.field_single(obs),
        }
    }

    /// Total dipole field at `obs` (bare units).
    pub fn total_at(&self, obs: &Vec3) -> Result<ImageField1> {
        if obs == &self.source {
            return Err(Error::Singular("kernel evaluated at its pole".into()));
        }
        let mut f = free_moment_field(obs, &self.source, &self.moment);
        f.add(&self.image_at(obs));
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_space_kernel_matches_the_stokeslet() {
        let k = GreenKernel::free_space();
        let x = Vec3::new(1.0, -0.5, 2.0);
        let y = Vec3::new(0.2, 0.3, 0.1);
        let (t, p) = k.velocity_tensor(&x, &y, 1.7).unwrap();
        let (ts, ps) = stokeslet(&x, &y, 1.7).unwrap();
        assert!((t - ts).norm() < 1e-15);
        assert!((p - ps).norm() < 1e-15);
        assert!(k.image(&x, &y, 1.0).is_err());
    }

    #[test]
    fn half_space_kernel_vanishes_on_the_wall() {
        let dom = DomainGeometry::half_space(0.0, 10.0).unwrap();
        let k = GreenKernel::new(dom);
        let y = Vec3::new(0.0, 0.5, 1.5);
        for obs in [
            Vec3::new(1.0, 0.0, 1e-12),
            Vec3::new(-2.0, 3.0, 1e-12),
        ] {
            let (t, _) = k.velocity_tensor(&obs, &y, 1.0).unwrap();
            assert!(t.norm() < 1e-9, "wall residual {}", t.norm());
        }
    }

    #[test]
    fn stress_kernel_reduces_to_closed_form_in_free_space() {
        let k = GreenKernel::free_space();
        let x = Vec3::new(0.3, 0.4, 0.5);
        let y = Vec3::new(-0.6, 1.0, 0.1);
        let got = k.stress_kernel(&x, &y).unwrap();
        let expect = stress_kernel_free(&x, &y).unwrap();
        for j in 0..3 {
            assert!((got[j] - expect[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn half_space_stress_kernel_is_finite_inside() {
        let dom = DomainGeometry::half_space(-1.0, 10.0).unwrap();
        let k = GreenKernel::new(dom);
        let got = k
            .stress_kernel(&Vec3::new(0.0, 0.0, 0.5), &Vec3::new(0.4, 0.2, 0.8))
            .unwrap();
        for j in 0..3 {
            assert!(got[j].iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn moment_field_matches_source_derivative_of_point_field() {
        // Free space: dipole vs finite differences of the Stokeslet over y.
        let y = Vec3::new(0.1, 0.2, 0.3);
        let obs = Vec3::new(1.3, -0.4, 0.9);
        let mut moment = Mat3::zeros();
        moment[(2, 0)] = 2.0;
        let f = free_moment_field(&obs, &y, &moment);
        let h = 1e-6;
        let mut yp = y;
        let mut ym = y;
        yp.z += h;
        ym.z -= h;
        let up = free_point_field(&obs, &yp).u;
        let um = free_point_field(&obs, &ym).u;
        let fd = (up.column(0) - um.column(0)) * (2.0 / (2.0 * h));
        assert!((f.u - fd).norm() < 1e-6);
    }

    #[test]
    fn half_space_moment_image_is_regular_and_consistent() {
        let dom = DomainGeometry::half_space(0.0, 10.0).unwrap();
        let k = GreenKernel::new(dom);
        let y = Vec3::new(0.0, 0.0, 1.0);
        let mut moment = Mat3::zeros();
        moment[(0, 2)] = 1.0;
        moment[(1, 1)] = -0.5;
        let prep = k.prepare_moment(&y, &moment).unwrap();
        // Total dipole field should cancel on the wall like the point field.
        for obs in [Vec3::new(0.5, 0.0, 1e-12), Vec3::new(-1.0, 2.0, 1e-12)] {
            let f = prep.total_at(&obs).unwrap();
            assert!(f.u.norm() < 1e-6, "wall residual {}", f.u.norm());
        }
        let interior = prep.total_at(&Vec3::new(0.3, 0.3, 0.7)).unwrap();
        assert!(interior.u.norm().is_finite() && interior.u.norm() > 0.0);
    }

    #[test]
    fn prepared_point_rejects_its_own_pole() {
        let k = GreenKernel::free_space();
        let y = Vec3::new(1.0, 1.0, 1.0);
        let prep = k.prepare(&y).unwrap();
        assert!(prep.total_at(&y).is_err());
    }

    #[test]
    fn pressure_vector_matches_free_field() {
        let k = GreenKernel::free_space();
        let x = Vec3::new(2.0, 0.0, 0.0);
        let (_, p) = k.velocity_tensor(&x, &Vec3::zeros(), 1.0).unwrap();
        assert_relative_eq!(p.x, 1.0 / (4.0 * PI) / 4.0, epsilon = 1e-15);
    }
}
