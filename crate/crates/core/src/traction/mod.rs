//! Surface-traction solvers for rigid spheres in Stokes flow.
//!
//! The traction f = σ·ξ̂ (outward normal) on each sphere satisfies a
//! second-kind boundary-integral system; this module provides
//!   * the coupled N-sphere solve ([`solve_full`]),
//!   * the one-sphere solve with wall images ([`solve_one_sphere`]),
//!   * the isolated-sphere closed form ([`analytic_one_sphere`]),
//!   * the free-space two-sphere solve ([`solve_pair`]),
//!   * the far-field reflected-stresslet correction
//!     ([`farfield_pair_correction`]), and
//!   * field evaluation away from the spheres ([`velocity_at`],
//!     [`pressure_at`], [`stress_at`]).
//!
//! All spheres are freely suspended: every returned field carries zero net
//! force and torque per sphere, with the rigid motions recovered from the
//! no-slip surface velocity.

mod assemble;
mod eval;
mod solve;

pub use eval::{pressure_at, stress_at, velocity_at};
pub use solve::{
    analytic_one_sphere, farfield_pair_correction, solve_full, solve_one_sphere, solve_pair,
};

use crate::greens::WallOperator;
use crate::spharm::{Family, Mode, SurfaceBasis};
use crate::{Error, Mat3, Result, Vec3};
use nalgebra::DVector;
use std::sync::Arc;

/// Which solver produced a traction field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Full,
    OneSphere,
    Pair,
    Farfield,
}

/// Tunables for the boundary-integral solvers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Spherical-harmonic degree cap (≥ 1; rigid modes need degree 1).
    pub l_max: u32,
    /// Source-quadrature refinement factor for the coupling blocks.
    pub oversample: usize,
    /// Re-assemble with doubled coupling nodes until the matrix entries
    /// stabilize to 1e-9 (at most three doublings).
    pub verify_quadrature: bool,
    /// Minimum acceptable LU pivot ratio before the system is declared
    /// too ill-conditioned to trust.
    pub pivot_tol: f64,
    /// Cavity wall operator to attach when the kernel does not already
    /// carry one (overrides the kernel's operator when set).
    pub wall: Option<Arc<WallOperator>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            l_max: 2,
            oversample: 1,
            verify_quadrature: false,
            pivot_tol: 1e-12,
            wall: None,
        }
    }
}

/// Solver health indicators returned with every field.
#[derive(Debug, Clone, Copy)]
pub struct SolveDiagnostics {
    /// Relative residual of the discretized equations at the solution.
    pub residual: f64,
    /// Largest rigid multiplier: quadrature-inconsistency of the
    /// force/torque constraints (≈ 0 for a consistent discretization).
    pub constraint_gap: f64,
    /// Smallest surface-to-surface gap between spheres, in sphere radii
    /// (infinite for a single sphere).
    pub min_gap: f64,
    /// Gap below 0.02 radii: expect degraded coupling accuracy — no
    /// lubrication augmentation is applied.
    pub near_contact: bool,
}

impl SolveDiagnostics {
    fn clean() -> Self {
        Self {
            residual: 0.0,
            constraint_gap: 0.0,
            min_gap: f64::INFINITY,
            near_contact: false,
        }
    }
}

/// Surface tractions for a set of spheres: per-sphere coefficients in the
/// shared [`SurfaceBasis`], plus the rigid motion (U, Ω) of each sphere.
#[derive(Debug, Clone)]
pub struct TractionField {
    basis: Arc<SurfaceBasis>,
    radius: f64,
    coeffs: Vec<DVector<f64>>,
    motions: Vec<(Vec3, Vec3)>,
    provenance: Provenance,
    diagnostics: SolveDiagnostics,
}

impl TractionField {
    pub(crate) fn new(
        basis: Arc<SurfaceBasis>,
        radius: f64,
        coeffs: Vec<DVector<f64>>,
        motions: Vec<(Vec3, Vec3)>,
        provenance: Provenance,
        diagnostics: SolveDiagnostics,
    ) -> Self {
        Self { basis, radius, coeffs, motions, provenance, diagnostics }
    }

    pub fn sphere_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn basis(&self) -> &Arc<SurfaceBasis> {
        &self.basis
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    /// Basis coefficients of sphere `n`'s traction.
    pub fn coefficients(&self, n: usize) -> &DVector<f64> {
        &self.coeffs[n]
    }

    /// Rigid motion (U, Ω) of sphere `n`.
    pub fn motion(&self, n: usize) -> (Vec3, Vec3) {
        self.motions[n]
    }

    /// Traction vector at surface direction `dir` of sphere `n`.
    pub fn traction_at(&self, n: usize, dir: &Vec3) -> Result<Vec3> {
        self.check_sphere(n)?;
        self.basis.evaluate_at(&self.coeffs[n], dir)
    }

    /// Traction values at the basis quadrature nodes of sphere `n`.
    pub fn node_values(&self, n: usize) -> Result<Vec<Vec3>> {
        self.check_sphere(n)?;
        self.basis.evaluate(&self.coeffs[n])
    }

    /// Net surface force ∫ f ds on sphere `n`.
    pub fn force(&self, n: usize) -> Result<Vec3> {
        let vals = self.node_values(n)?;
        let mut sum = Vec3::zeros();
        for (f, w) in vals.iter().zip(self.basis.weights()) {
            sum += *w * f;
        }
        Ok(sum * self.radius * self.radius)
    }

    /// Net surface torque ∫ ξ × f ds on sphere `n` (about its center).
    pub fn torque(&self, n: usize) -> Result<Vec3> {
        let vals = self.node_values(n)?;
        let mut sum = Vec3::zeros();
        for ((f, dir), w) in vals.iter().zip(self.basis.nodes()).zip(self.basis.weights()) {
            sum += *w * dir.cross(f);
        }
        Ok(sum * self.radius.powi(3))
    }

    /// Stresslet of sphere `n`: the symmetric traceless first moment
    /// s_jk = ∫ [½(f_j ξ_k + f_k ξ_j) − ⅓ δ_jk f·ξ] ds.
    pub fn stresslet(&self, n: usize) -> Result<Mat3> {
        let vals = self.node_values(n)?;
        let mut s = Mat3::zeros();
        for ((f, dir), w) in vals.iter().zip(self.basis.nodes()).zip(self.basis.weights()) {
            let dot = f.dot(dir);
            for j in 0..3 {
                for kx in 0..3 {
                    let mut v = 0.5 * (f[j] * dir[kx] + f[kx] * dir[j]);
                    if j == kx {
                        v -= dot / 3.0;
                    }
                    s[(j, kx)] += w * v;
                }
            }
        }
        Ok(s * self.radius.powi(3))
    }

    /// Write one CSV with a row per (degree, order) carrying the three
    /// family coefficients, then one translation and one rotation row per
    /// sphere. Columns: sphere, kind (0 = mode, 1 = U, 2 = Ω), degree,
    /// order, radial/x, gradient/y, curl/z.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let fams = [Family::Radial, Family::Gradient, Family::Curl];
        let mut rows = Vec::new();
        for (sn, c) in self.coeffs.iter().enumerate() {
            for l in 0..=self.basis.l_max() {
                for m in -(l as i32)..=(l as i32) {
                    let mut row = vec![sn as f64, 0.0, l as f64, m as f64];
                    for &family in &fams {
                        let v = self
                            .basis
                            .index_of(&Mode { family, degree: l, order: m })
                            .map_or(0.0, |i| c[i]);
                        row.push(v);
                    }
                    rows.push(row);
                }
            }
            let (u, om) = self.motions[sn];
            rows.push(vec![sn as f64, 1.0, 0.0, 0.0, u.x, u.y, u.z]);
            rows.push(vec![sn as f64, 2.0, 0.0, 0.0, om.x, om.y, om.z]);
        }
        crate::io::write_csv(path, "sphere,kind,degree,order,c1,c2,c3", &rows)
    }

    fn check_sphere(&self, n: usize) -> Result<()> {
        if n >= self.coeffs.len() {
            return Err(Error::InvalidInput(format!(
                "sphere index {n} out of range ({} spheres)",
                self.coeffs.len()
            )));
        }
        Ok(())
    }
}
