//! Field evaluation from a solved traction: velocity, pressure, and stress
//! of the disturbed flow at points in the fluid.
//!
//! The flow is reconstructed as the ambient field minus one single layer
//! per sphere (plus their domain images). On a sphere surface the self
//! layer is evaluated spectrally — quadrature kernels are singular there —
//! so the no-slip velocity is available directly on the boundary. There is
//! no near-singular quadrature: accuracy degrades smoothly as the point
//! approaches a surface it is not on.

use super::assemble::{apply_block_diagonal, Workspace};
use super::TractionField;
use crate::domain::{AmbientFlow, DomainShape, SphereConfiguration};
use crate::greens::{blake::WallImage, primitives as prim, GreenKernel};
use crate::{Error, Mat3, Result, Vec3};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::sync::Arc;

/// Fluid velocity at `y`. Points on a sphere surface (within 1e-9 of the
/// radius) are allowed and reproduce the rigid no-slip motion; interior
/// points are an error. `flow` must be the ambient flow the traction was
/// solved under.
pub fn velocity_at(
    y: &Vec3,
    config: &SphereConfiguration,
    traction: &TractionField,
    flow: &AmbientFlow,
    kernel: &GreenKernel,
) -> Result<Vec3> {
    require_in_domain(y, kernel)?;
    let ctx = FieldContext::new(config, traction, kernel)?;
    let place = classify(y, config)?;
    let eps = config.radius();
    let mu = flow.viscosity();
    let scale = 1.0 / (8.0 * PI * mu);

    let mut u = flow.velocity(y);
    for (n, c) in config.centers().iter().enumerate() {
        if place == Placement::OnSurface(n) {
            // Spectral self layer on the surface itself.
            let mut c_sl = traction.coefficients(n).clone();
            apply_block_diagonal(&ctx.ws.basis, &mut c_sl, |l| {
                *ctx.ws.spectrum.single_layer_block(l)
            });
            let dir = (y - c).normalize();
            u -= eps * scale * ctx.ws.basis.evaluate_at(&c_sl, &dir)?;
        } else {
            for (p, x) in ctx.sources[n].iter().enumerate() {
                u -= scale * (prim::oseen(&(y - x)) * ctx.sval(n, p));
            }
        }
    }
    if let Some(imgs) = &ctx.wall_imgs {
        for (n, per_node) in imgs.iter().enumerate() {
            for (p, img) in per_node.iter().enumerate() {
                u -= scale * (img.eval(y).u * ctx.sval(n, p));
            }
        }
    }
    if let Some((sources, q)) = &ctx.cavity {
        for (j, s) in sources.iter().enumerate() {
            let f = Vec3::new(q[3 * j], q[3 * j + 1], q[3 * j + 2]);
            u -= scale * (prim::oseen(&(y - s)) * f);
        }
    }
    Ok(u)
}

/// Fluid pressure at a strictly exterior point `y` (the single-layer
/// pressure jumps across each surface, so on-surface points are an error).
pub fn pressure_at(
    y: &Vec3,
    config: &SphereConfiguration,
    traction: &TractionField,
    flow: &AmbientFlow,
    kernel: &GreenKernel,
) -> Result<f64> {
    require_in_domain(y, kernel)?;
    let ctx = FieldContext::new(config, traction, kernel)?;
    require_exterior(y, config)?;
    let scale = 1.0 / (8.0 * PI);

    let mut p = flow.pressure(y);
    for n in 0..config.len() {
        for (pi, x) in ctx.sources[n].iter().enumerate() {
            p -= scale * prim::pressure(&(y - x)).dot(&ctx.sval(n, pi));
        }
    }
    if let Some(imgs) = &ctx.wall_imgs {
        for (n, per_node) in imgs.iter().enumerate() {
            for (pi, img) in per_node.iter().enumerate() {
                p -= scale * img.eval(y).p.dot(&ctx.sval(n, pi));
            }
        }
    }
    if let Some((sources, q)) = &ctx.cavity {
        for (j, s) in sources.iter().enumerate() {
            let f = Vec3::new(q[3 * j], q[3 * j + 1], q[3 * j + 2]);
            p -= scale * prim::pressure(&(y - s)).dot(&f);
        }
    }
    Ok(p)
}

/// Fluid stress tensor at a strictly exterior point `y`.
pub fn stress_at(
    y: &Vec3,
    config: &SphereConfiguration,
    traction: &TractionField,
    flow: &AmbientFlow,
    kernel: &GreenKernel,
) -> Result<Mat3> {
    require_in_domain(y, kernel)?;
    let ctx = FieldContext::new(config, traction, kernel)?;
    require_exterior(y, config)?;
    let scale = 1.0 / (8.0 * PI);

    let mut sig = flow.stress(y);
    for n in 0..config.len() {
        for (pi, x) in ctx.sources[n].iter().enumerate() {
            let blocks = prim::stress(&(y - x));
            let f = ctx.sval(n, pi);
            for j in 0..3 {
                sig -= scale * f[j] * blocks[j];
            }
        }
    }
    if let Some(imgs) = &ctx.wall_imgs {
        for (n, per_node) in imgs.iter().enumerate() {
            for (pi, img) in per_node.iter().enumerate() {
                let blocks = img.eval(y).stress();
                let f = ctx.sval(n, pi);
                for j in 0..3 {
                    sig -= scale * f[j] * blocks[j];
                }
            }
        }
    }
    if let Some((sources, q)) = &ctx.cavity {
        for (j, s) in sources.iter().enumerate() {
            let f = Vec3::new(q[3 * j], q[3 * j + 1], q[3 * j + 2]);
            let blocks = prim::stress(&(y - s));
            for d in 0..3 {
                sig -= scale * f[d] * blocks[d];
            }
        }
    }
    Ok(sig)
}

fn require_in_domain(y: &Vec3, kernel: &GreenKernel) -> Result<()> {
    if !kernel.domain().contains(y) {
        return Err(Error::InvalidInput(
            "evaluation point lies outside the fluid domain".into(),
        ));
    }
    Ok(())
}

#[derive(PartialEq)]
enum Placement {
    Exterior,
    OnSurface(usize),
}

/// Reject interior points; report which surface (if any) `y` sits on.
fn classify(y: &Vec3, config: &SphereConfiguration) -> Result<Placement> {
    let eps = config.radius();
    let mut surf = None;
    for (n, c) in config.centers().iter().enumerate() {
        let d = (y - c).norm();
        if (d - eps).abs() <= 1e-9 * eps {
            surf = Some(n);
        } else if d < eps {
            return Err(Error::InvalidInput(format!(
                "evaluation point lies inside sphere {n}"
            )));
        }
    }
    Ok(surf.map_or(Placement::Exterior, Placement::OnSurface))
}

fn require_exterior(y: &Vec3, config: &SphereConfiguration) -> Result<()> {
    match classify(y, config)? {
        Placement::Exterior => Ok(()),
        Placement::OnSurface(n) => Err(Error::InvalidInput(format!(
            "pressure and stress jump across the single layer: evaluate strictly \
             outside sphere {n}"
        ))),
    }
}

/// Everything the three evaluators share for one (config, traction, kernel)
/// triple: weighted source values, physical source nodes, and the domain
/// image machinery.
struct FieldContext {
    ws: Workspace,
    /// Per sphere: w_p ε² f(x_p) stacked over source nodes.
    svals: Vec<DVector<f64>>,
    /// Per sphere: physical source-node positions.
    sources: Vec<Vec<Vec3>>,
    /// Half-space: one image per source node.
    wall_imgs: Option<Vec<Vec<WallImage>>>,
    /// Cavity: wall-source positions and the collapsed image strengths of
    /// the full density set.
    cavity: Option<(Arc<Vec<Vec3>>, DVector<f64>)>,
}

impl FieldContext {
    fn new(
        config: &SphereConfiguration,
        traction: &TractionField,
        kernel: &GreenKernel,
    ) -> Result<Self> {
        if traction.sphere_count() != config.len() {
            return Err(Error::InvalidInput(format!(
                "traction field covers {} spheres, configuration has {}",
                traction.sphere_count(),
                config.len()
            )));
        }
        if traction.radius() != config.radius() {
            return Err(Error::InvalidInput(
                "traction field and configuration disagree on the sphere radius".into(),
            ));
        }
        let eps = config.radius();
        let ws = Workspace::new(traction.basis().l_max(), eps, 1)?;
        let svals: Vec<DVector<f64>> = (0..config.len())
            .map(|n| &ws.src_vals * traction.coefficients(n))
            .collect();
        let sources: Vec<Vec<Vec3>> = config
            .centers()
            .iter()
            .map(|c| ws.src_rule.nodes.iter().map(|d| c + eps * d).collect())
            .collect();

        let mut wall_imgs = None;
        let mut cavity = None;
        match *kernel.domain().shape() {
            DomainShape::FreeSpace => {}
            DomainShape::HalfSpace { wall_z } => {
                wall_imgs = Some(
                    sources
                        .iter()
                        .map(|nodes| nodes.iter().map(|x| WallImage::new(x, wall_z)).collect())
                        .collect(),
                );
            }
            DomainShape::SphericalCavity { .. } => {
                let wall = kernel.wall_operator().ok_or_else(|| {
                    Error::InvalidInput("cavity kernel has no wall operator attached".into())
                })?;
                // The collapse of all source images into one monopole set:
                // images are linear in the density, so weight and sum the
                // collocation data first and solve once.
                let m = wall.node_count();
                let mut rhs = DMatrix::zeros(3 * m, 1);
                for (nodes, sv) in sources.iter().zip(&svals) {
                    for (p, x) in nodes.iter().enumerate() {
                        let block = wall.stokeslet_rhs(x);
                        let f = Vec3::new(sv[3 * p], sv[3 * p + 1], sv[3 * p + 2]);
                        for row in 0..3 * m {
                            rhs[(row, 0)] +=
                                block[(row, 0)] * f.x + block[(row, 1)] * f.y + block[(row, 2)] * f.z;
                        }
                    }
                }
                let q = wall.solve(&rhs).column(0).into_owned();
                cavity = Some((wall.sources().clone(), q));
            }
        }
        Ok(Self { ws, svals, sources, wall_imgs, cavity })
    }

    /// Weighted traction value w_p ε² f(x_p) at source node `p` of sphere `n`.
    fn sval(&self, n: usize, p: usize) -> Vec3 {
        Vec3::new(
            self.svals[n][3 * p],
            self.svals[n][3 * p + 1],
            self.svals[n][3 * p + 2],
        )
    }
}
