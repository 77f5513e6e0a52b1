//! Vector spherical-harmonic surface discretization for sphere boundaries.
//!
//! Provides:
//! - `SurfaceBasis`: an orthonormal real vector-harmonic basis together with
//!   a product-exact quadrature grid (Gauss–Legendre in the polar angle ×
//!   uniform azimuth) and projection/evaluation between node samples and
//!   coefficients;
//! - `SelfSpectrum`: the per-degree family blocks and eigenvalues of the
//!   singular self-interaction traction operator, computed once here so no
//!   downstream solver ever performs singular quadrature.

pub mod solid;
pub mod spectrum;

pub use self::spectrum::{self_spectrum, self_spectrum_cached, SelfSpectrum};

use self::solid::ScalarHarmonic;
use crate::quad::SphereRule;
use crate::{Error, Result, Vec3};
use nalgebra::DVector;

/// The three vector families attached to each scalar harmonic Y_lm.
///
/// `Radial` is ξ̂Y, `Gradient` is ∇ₛY/√(l(l+1)), and `Curl` is
/// ξ̂×∇ₛY/√(l(l+1)); the two tangential families vanish identically for
/// l = 0 and are omitted, so a basis to degree L carries 3(L+1)² − 2 modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Radial,
    Gradient,
    Curl,
}

/// Index of one basis mode: family plus (degree, signed order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub family: Family,
    pub degree: u32,
    /// Signed order: positive = cos(mφ), negative = sin(|m|φ), 0 = zonal.
    pub order: i32,
}

/// Orthonormal real vector-harmonic basis on the unit sphere with its
/// quadrature grid. Immutable after construction; shared read-only.
#[derive(Debug, Clone)]
pub struct SurfaceBasis {
    l_max: u32,
    rule: SphereRule,
    modes: Vec<Mode>,
    harmonics: Vec<ScalarHarmonic>,
    /// Per mode, the field evaluated at every quadrature node.
    node_values: Vec<Vec<Vec3>>,
}

impl SurfaceBasis {
    /// Build the basis for maximum degree `l_max` (≤ 12).
    ///
    /// The grid has L+4 polar × 2L+6 azimuthal nodes, enough to integrate
    /// every product of two basis-mode components exactly.
    pub fn new(l_max: u32) -> Result<Self> {
        if l_max > 12 {
            return Err(Error::InvalidInput(format!(
                "surface basis degree {l_max} exceeds the supported maximum of 12"
            )));
        }
        let n_theta = (l_max as usize) + 4;
        let n_phi = 2 * (l_max as usize) + 6;
        let rule = SphereRule::gauss_uniform(n_theta, n_phi);
        let harmonics = solid::harmonics_up_to(l_max);

        let mut modes = Vec::new();
        let mut node_values = Vec::new();
        for (hi, h) in harmonics.iter().enumerate() {
            for family in [Family::Radial, Family::Gradient, Family::Curl] {
                if h.degree == 0 && family != Family::Radial {
                    continue;
                }
                modes.push(Mode { family, degree: h.degree, order: h.order });
                let values = rule
                    .nodes
                    .iter()
                    .map(|n| evaluate_family(&harmonics[hi], family, n))
                    .collect();
                node_values.push(values);
            }
        }
        Ok(Self { l_max, rule, modes, harmonics, node_values })
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Number of scalar unknowns per sphere (= number of modes).
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn node_count(&self) -> usize {
        self.rule.nodes.len()
    }

    /// Unit-sphere quadrature nodes.
    pub fn nodes(&self) -> &[Vec3] {
        &self.rule.nodes
    }

    /// Quadrature weights (sum to 4π; scale by ε² for a radius-ε sphere).
    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    /// Position of `mode` in the coefficient vector.
    pub fn index_of(&self, mode: &Mode) -> Option<usize> {
        self.modes.iter().position(|m| m == mode)
    }

    /// Basis mode `k` evaluated at every node.
    pub fn mode_values(&self, k: usize) -> &[Vec3] {
        &self.node_values[k]
    }

    /// Project node samples of a vector field onto the basis.
    ///
    /// Because the grid integrates basis products exactly, this is the
    /// least-squares-optimal coefficient vector for band-limited fields.
    pub fn project(&self, samples: &[Vec3]) -> Result<DVector<f64>> {
        if samples.len() != self.node_count() {
            return Err(Error::InvalidInput(format!(
                "projection needs {} node samples, got {}",
                self.node_count(),
                samples.len()
            )));
        }
        let mut coeffs = DVector::zeros(self.mode_count());
        for (k, values) in self.node_values.iter().enumerate() {
            let mut acc = crate::util::KahanSum::new();
            for ((v, s), w) in values.iter().zip(samples).zip(&self.rule.weights) {
                acc.add(w * v.dot(s));
            }
            coeffs[k] = acc.value();
        }
        Ok(coeffs)
    }

    /// Reconstruct the field at every quadrature node from coefficients.
    pub fn evaluate(&self, coeffs: &DVector<f64>) -> Result<Vec<Vec3>> {
        if coeffs.len() != self.mode_count() {
            return Err(Error::InvalidInput(format!(
                "evaluation needs {} coefficients, got {}",
                self.mode_count(),
                coeffs.len()
            )));
        }
        let mut out = vec![Vec3::zeros(); self.node_count()];
        for (k, values) in self.node_values.iter().enumerate() {
            let c = coeffs[k];
            for (o, v) in out.iter_mut().zip(values) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Reconstruct the field at an arbitrary unit direction.
    pub fn evaluate_at(&self, coeffs: &DVector<f64>, dir: &Vec3) -> Result<Vec3> {
        if coeffs.len() != self.mode_count() {
            return Err(Error::InvalidInput(format!(
                "evaluation needs {} coefficients, got {}",
                self.mode_count(),
                coeffs.len()
            )));
        }
        let mut out = Vec3::zeros();
        for (k, mode) in self.modes.iter().enumerate() {
            if coeffs[k] == 0.0 {
                continue;
            }
            let h = self.harmonic(mode.degree, mode.order);
            out += coeffs[k] * evaluate_family(h, mode.family, dir);
        }
        Ok(out)
    }

    /// The scalar harmonic (l, m) backing a mode.
    pub fn harmonic(&self, degree: u32, order: i32) -> &ScalarHarmonic {
        let base = (degree * degree) as usize;
        let offset = (order + degree as i32) as usize;
        &self.harmonics[base + offset]
    }
}

/// Evaluate one vector family of a scalar harmonic at a unit direction.
pub fn evaluate_family(h: &ScalarHarmonic, family: Family, dir: &Vec3) -> Vec3 {
    match family {
        Family::Radial => dir * h.poly.eval(dir),
        Family::Gradient => {
            let g = grad_at(h, dir);
            // Surface gradient: ∇R − l ξ̂ Y on |ξ| = 1 (Euler's relation).
            (g - dir * (h.degree as f64 * h.poly.eval(dir))) / tangential_norm(h.degree)
        }
        Family::Curl => dir.cross(&grad_at(h, dir)) / tangential_norm(h.degree),
    }
}

fn grad_at(h: &ScalarHarmonic, dir: &Vec3) -> Vec3 {
    Vec3::new(h.grad[0].eval(dir), h.grad[1].eval(dir), h.grad[2].eval(dir))
}

fn tangential_norm(l: u32) -> f64 {
    ((l * (l + 1)) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mat3;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mode_count_has_three_families_minus_degenerate_pair() {
        for l in 0..=6u32 {
            let basis = SurfaceBasis::new(l).unwrap();
            assert_eq!(basis.mode_count(), (3 * (l + 1) * (l + 1) - 2) as usize);
        }
    }

    #[test]
    fn basis_is_orthonormal_under_the_surface_inner_product() {
        for l in [2u32, 8] {
            let basis = SurfaceBasis::new(l).unwrap();
            for a in 0..basis.mode_count() {
                for b in a..basis.mode_count() {
                    let mut ip = crate::util::KahanSum::new();
                    for ((va, vb), w) in basis
                        .mode_values(a)
                        .iter()
                        .zip(basis.mode_values(b))
                        .zip(basis.weights())
                    {
                        ip.add(w * va.dot(vb));
                    }
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (ip.value() - want).abs() < 1e-12,
                        "⟨{:?}|{:?}⟩ = {:.3e}",
                        basis.modes()[a],
                        basis.modes()[b],
                        ip.value()
                    );
                }
            }
        }
    }

    #[test]
    fn surface_normal_projects_onto_the_monopole_alone() {
        let basis = SurfaceBasis::new(3).unwrap();
        let samples: Vec<Vec3> = basis.nodes().to_vec();
        let coeffs = basis.project(&samples).unwrap();
        for (k, mode) in basis.modes().iter().enumerate() {
            let want = if mode.degree == 0 { (4.0 * std::f64::consts::PI).sqrt() } else { 0.0 };
            assert!(
                (coeffs[k] - want).abs() < 1e-12,
                "mode {:?} got {:.3e}",
                mode,
                coeffs[k]
            );
        }
    }

    #[test]
    fn traceless_strain_traction_is_pure_degree_two() {
        let g = Mat3::new(0.3, 0.4, -0.1, 0.4, -0.5, 0.7, -0.1, 0.7, 0.2);
        let basis = SurfaceBasis::new(4).unwrap();
        let samples: Vec<Vec3> = basis.nodes().iter().map(|n| g * n).collect();
        let coeffs = basis.project(&samples).unwrap();
        for (k, mode) in basis.modes().iter().enumerate() {
            if mode.degree != 2 {
                assert!(coeffs[k].abs() < 1e-12, "mode {:?} got {:.3e}", mode, coeffs[k]);
            }
        }
        // And the projection is lossless: G·n̂ is band-limited.
        let back = basis.evaluate(&coeffs).unwrap();
        for (b, s) in back.iter().zip(&samples) {
            assert!((b - s).norm() < 1e-12);
        }
    }

    #[test]
    fn band_limited_round_trip_is_identity() {
        let basis = SurfaceBasis::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let coeffs =
                DVector::from_fn(basis.mode_count(), |_, _| rng.gen_range(-1.0..1.0));
            let samples = basis.evaluate(&coeffs).unwrap();
            let back = basis.project(&samples).unwrap();
            assert!((&back - &coeffs).amax() < 1e-12);
        }
    }

    #[test]
    fn point_evaluation_matches_node_tables() {
        let basis = SurfaceBasis::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs = DVector::from_fn(basis.mode_count(), |_, _| rng.gen_range(-1.0..1.0));
        let samples = basis.evaluate(&coeffs).unwrap();
        for (n, s) in basis.nodes().iter().zip(&samples).step_by(7) {
            let v = basis.evaluate_at(&coeffs, n).unwrap();
            assert!((v - s).norm() < 1e-12);
        }
    }

    #[test]
    fn quadrature_integrates_second_moments_exactly() {
        let eps = 0.4;
        let basis = SurfaceBasis::new(2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = crate::util::KahanSum::new();
                for (n, w) in basis.nodes().iter().zip(basis.weights()) {
                    acc.add(w * eps * eps * n[i] * n[j]);
                }
                let want =
                    if i == j { 4.0 * std::f64::consts::PI / 3.0 * eps * eps } else { 0.0 };
                assert_relative_eq!(acc.value(), want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn oversized_degree_is_rejected() {
        assert!(SurfaceBasis::new(13).is_err());
    }

    #[test]
    fn mismatched_sample_count_is_rejected() {
        let basis = SurfaceBasis::new(2).unwrap();
        assert!(basis.project(&[Vec3::zeros(); 3]).is_err());
    }
}
