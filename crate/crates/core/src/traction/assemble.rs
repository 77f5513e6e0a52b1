//! Galerkin assembly of the coupled surface-traction system.
//!
//! Working with the outward-normal traction f = σ·ξ̂ on each sphere, the
//! coupled equations read
//!     (½I − K)[f_n] + Img_nn[f_n] + Σ_{n'≠n} X_nn'[f_{n'}] = σ(ū)·ξ̂,
//! where K is the singular self-operator (its family blocks come from
//! `SelfSpectrum`, never from quadrature), X_nn' is the traction at ∂s_n of
//! sphere n''s single layer, and Img collects wall-image contributions.
//! All coupling kernels are smooth for disjoint surfaces, so those blocks
//! use plain tensor-product quadrature.
//!
//! The operator annihilates rigid tractions, so the system is bordered:
//! six multiplier columns per sphere (the rigid coefficient directions) and
//! six constraint rows (zero net force and torque). The multipliers vanish
//! up to quadrature noise and are kept as a consistency diagnostic.

use crate::domain::AmbientFlow;
use crate::greens::{blake::WallImage, primitives as prim, GreenKernel, WallOperator};
use crate::domain::DomainShape;
use crate::quad::SphereRule;
use crate::spharm::{evaluate_family, Family, Mode, SelfSpectrum, SurfaceBasis};
use crate::{Error, Result, Vec3};
use nalgebra::{DMatrix, DVector, Dyn, Matrix3};
use std::f64::consts::PI;
use std::sync::Arc;

/// Order-to-direction map shared by the rigid columns: ê_x ↔ m = 1,
/// ê_y ↔ m = −1, ê_z ↔ m = 0 (the degree-1 harmonics are ∝ x, y, z).
const DIR_ORDER: [i32; 3] = [1, -1, 0];

/// Geometry-independent discretization pieces for one (L_max, oversample,
/// radius) choice; every sphere shares them.
pub(crate) struct Workspace {
    pub basis: Arc<SurfaceBasis>,
    pub spectrum: Arc<SelfSpectrum>,
    /// Source-side quadrature (the basis grid times the oversample factor).
    pub src_rule: SphereRule,
    /// Galerkin projection rows: proj[a, 3q+i] = w_q B_a(ŷ_q)_i.
    pub proj: DMatrix<f64>,
    /// Source evaluation columns: src_vals[3p+k, b] = w_p ε² B_b(x̂_p)_k.
    pub src_vals: DMatrix<f64>,
    /// Block-diagonal ½I − K over the basis modes.
    pub self_system: DMatrix<f64>,
    /// Six orthonormal rigid coefficient columns (3 translations, 3 rotations).
    pub rigid: DMatrix<f64>,
    pub eps: f64,
}

impl Workspace {
    pub fn new(l_max: u32, eps: f64, oversample: usize) -> Result<Self> {
        if l_max < 1 {
            return Err(Error::InvalidInput(
                "traction solves need at least degree 1 (rigid modes)".into(),
            ));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("sphere radius {eps} must be positive")));
        }
        let s = oversample.max(1);
        let basis = Arc::new(SurfaceBasis::new(l_max)?);
        let spectrum = crate::spharm::self_spectrum_cached(l_max)?;
        let src_rule = SphereRule::gauss_uniform(
            (l_max as usize + 4) * s,
            (2 * l_max as usize + 6) * s,
        );
        let k = basis.mode_count();
        let q = basis.node_count();

        let mut proj = DMatrix::zeros(k, 3 * q);
        for a in 0..k {
            let vals = basis.mode_values(a);
            for (qi, w) in basis.weights().iter().enumerate() {
                for i in 0..3 {
                    proj[(a, 3 * qi + i)] = w * vals[qi][i];
                }
            }
        }

        let mut src_vals = DMatrix::zeros(3 * src_rule.len(), k);
        for (b, mode) in basis.modes().iter().enumerate() {
            let h = basis.harmonic(mode.degree, mode.order);
            for (p, (x_hat, w)) in src_rule.nodes.iter().zip(&src_rule.weights).enumerate() {
                let v = evaluate_family(h, mode.family, x_hat) * (w * eps * eps);
                for kx in 0..3 {
                    src_vals[(3 * p + kx, b)] = v[kx];
                }
            }
        }

        let self_system = block_diagonal(&basis, |l| spectrum.system_block(l));
        let rigid = rigid_columns(&basis);
        Ok(Self { basis, spectrum, src_rule, proj, src_vals, self_system, rigid, eps })
    }

    pub fn mode_count(&self) -> usize {
        self.basis.mode_count()
    }
}

/// Expand per-degree 3×3 family blocks to a mode-space matrix.
fn block_diagonal<F: Fn(u32) -> Matrix3<f64>>(basis: &SurfaceBasis, f: F) -> DMatrix<f64> {
    let k = basis.mode_count();
    let mut out = DMatrix::zeros(k, k);
    let fams = [Family::Radial, Family::Gradient, Family::Curl];
    for l in 0..=basis.l_max() {
        let block = f(l);
        for m in -(l as i32)..=(l as i32) {
            let idx: Vec<Option<usize>> = fams
                .iter()
                .map(|&family| basis.index_of(&Mode { family, degree: l, order: m }))
                .collect();
            for (fa, ia) in idx.iter().enumerate() {
                for (fb, ib) in idx.iter().enumerate() {
                    if let (Some(a), Some(b)) = (ia, ib) {
                        out[(*a, *b)] = block[(fa, fb)];
                    }
                }
            }
        }
    }
    out
}

/// The six orthonormal rigid coefficient columns. Translations mix the
/// degree-1 radial and gradient families as ê_d = √(4π/3)(P₁ + √2 B₁);
/// rotations are the degree-1 curl modes themselves.
fn rigid_columns(basis: &SurfaceBasis) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(basis.mode_count(), 6);
    for (d, &m) in DIR_ORDER.iter().enumerate() {
        let p = basis
            .index_of(&Mode { family: Family::Radial, degree: 1, order: m })
            .expect("degree-1 radial mode");
        let b = basis
            .index_of(&Mode { family: Family::Gradient, degree: 1, order: m })
            .expect("degree-1 gradient mode");
        let c = basis
            .index_of(&Mode { family: Family::Curl, degree: 1, order: m })
            .expect("degree-1 curl mode");
        out[(p, d)] = 1.0 / 3f64.sqrt();
        out[(b, d)] = (2f64 / 3.0).sqrt();
        out[(c, 3 + d)] = 1.0;
    }
    out
}

/// The assembled bordered system for one configuration, plus the pieces the
/// rigid-motion recovery pass reuses.
pub(crate) struct System {
    pub ws: Workspace,
    pub centers: Vec<Vec3>,
    pub kernel: GreenKernel,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Cavity image strengths for every source node and force direction
    /// (3M × 3·N·Q_s), kept for the velocity pass.
    pub cavity_strengths: Option<DMatrix<f64>>,
}

/// Traction 3×3 block of a bare point force: rows i, force direction k,
/// contracted with the outward normal at the observation point.
fn traction_block(z: &Vec3, normal: &Vec3) -> Matrix3<f64> {
    let sig = prim::stress(z);
    Matrix3::from_fn(|i, kx| (sig[kx] * normal)[i])
}

impl System {
    pub fn assemble(
        ws: Workspace,
        centers: &[Vec3],
        flow: &AmbientFlow,
        kernel: &GreenKernel,
    ) -> Result<Self> {
        let n = centers.len();
        let k = ws.mode_count();
        let eps = ws.eps;
        let q = ws.basis.node_count();
        let qs = ws.src_rule.len();
        let dim = n * k + 6 * n;
        let mut matrix = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);

        // Physical node positions.
        let targets: Vec<Vec<Vec3>> = centers
            .iter()
            .map(|c| ws.basis.nodes().iter().map(|d| c + eps * d).collect())
            .collect();
        let sources: Vec<Vec<Vec3>> = centers
            .iter()
            .map(|c| ws.src_rule.nodes.iter().map(|d| c + eps * d).collect())
            .collect();

        // Self blocks are spectral — exact, no quadrature.
        for sn in 0..n {
            matrix.view_mut((sn * k, sn * k), (k, k)).copy_from(&ws.self_system);
        }

        // Free-space coupling blocks for distinct spheres.
        let mut theta = DMatrix::zeros(3 * q, 3 * qs);
        for tn in 0..n {
            for sn in 0..n {
                if sn == tn {
                    continue;
                }
                for (qi, y) in targets[tn].iter().enumerate() {
                    let normal = ws.basis.nodes()[qi];
                    for (p, x) in sources[sn].iter().enumerate() {
                        let blk = traction_block(&(y - x), &normal) / (8.0 * PI);
                        for i in 0..3 {
                            for kx in 0..3 {
                                theta[(3 * qi + i, 3 * p + kx)] = blk[(i, kx)];
                            }
                        }
                    }
                }
                let block = &ws.proj * &theta * &ws.src_vals;
                matrix.view_mut((tn * k, sn * k), (k, k)).copy_from(&block);
            }
        }

        // Wall-image coupling blocks (all ordered pairs, including self).
        let cavity_strengths = match *kernel.domain().shape() {
            DomainShape::FreeSpace => None,
            DomainShape::HalfSpace { wall_z } => {
                let mut t_img = DMatrix::zeros(3 * q, 3 * qs);
                for sn in 0..n {
                    let mut imgs = Vec::with_capacity(qs);
                    for x in &sources[sn] {
                        imgs.push(WallImage::new(x, wall_z));
                    }
                    for tn in 0..n {
                        for (qi, y) in targets[tn].iter().enumerate() {
                            let normal = ws.basis.nodes()[qi];
                            for (p, img) in imgs.iter().enumerate() {
                                let sig = img.eval(y).stress();
                                for i in 0..3 {
                                    for kx in 0..3 {
                                        t_img[(3 * qi + i, 3 * p + kx)] =
                                            (sig[kx] * normal)[i] / (8.0 * PI);
                                    }
                                }
                            }
                        }
                        let block = &ws.proj * &t_img * &ws.src_vals;
                        let mut view = matrix.view_mut((tn * k, sn * k), (k, k));
                        view += block;
                    }
                }
                None
            }
            DomainShape::SphericalCavity { .. } => {
                let wall = kernel.wall_operator().ok_or_else(|| {
                    Error::InvalidInput("cavity kernel has no wall operator attached".into())
                })?;
                Some(Self::assemble_cavity_images(
                    &ws, centers, wall, &targets, &sources, &mut matrix,
                )?)
            }
        };

        // Bordering: rigid multiplier columns and force/torque constraint rows.
        for sn in 0..n {
            matrix
                .view_mut((sn * k, n * k + 6 * sn), (k, 6))
                .copy_from(&ws.rigid);
            matrix
                .view_mut((n * k + 6 * sn, sn * k), (6, k))
                .copy_from(&ws.rigid.transpose());
        }

        // Galerkin right-hand side: the ambient traction σ(ū)·ξ̂.
        for sn in 0..n {
            let mut samples = DVector::zeros(3 * q);
            for (qi, y) in targets[sn].iter().enumerate() {
                let normal = ws.basis.nodes()[qi];
                let t = flow.stress(y) * normal;
                for i in 0..3 {
                    samples[3 * qi + i] = t[i];
                }
            }
            rhs.rows_mut(sn * k, k).copy_from(&(&ws.proj * samples));
        }

        Ok(Self {
            ws,
            centers: centers.to_vec(),
            kernel: kernel.clone(),
            matrix,
            rhs,
            cavity_strengths,
        })
    }

    /// Cavity images via the wall operator, batched: one collocation solve
    /// for every source node and direction at once, then per-target-sphere
    /// stress evaluation matrices contracted against the strengths.
    fn assemble_cavity_images(
        ws: &Workspace,
        centers: &[Vec3],
        wall: &Arc<WallOperator>,
        targets: &[Vec<Vec3>],
        sources: &[Vec<Vec3>],
        matrix: &mut DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let n = centers.len();
        let k = ws.mode_count();
        let q = ws.basis.node_count();
        let qs = ws.src_rule.len();
        let m = wall.node_count();

        let mut rhs_all = DMatrix::zeros(3 * m, 3 * n * qs);
        for (sn, nodes) in sources.iter().enumerate() {
            for (p, x) in nodes.iter().enumerate() {
                rhs_all
                    .view_mut((0, 3 * (sn * qs + p)), (3 * m, 3))
                    .copy_from(&wall.stokeslet_rhs(x));
            }
        }
        let strengths = wall.solve(&rhs_all);

        let wall_sources = wall.sources();
        for tn in 0..n {
            // Stress of each wall source at each target node, contracted
            // with the outward normal there.
            let mut e_sig = DMatrix::zeros(3 * q, 3 * m);
            for (qi, y) in targets[tn].iter().enumerate() {
                let normal = ws.basis.nodes()[qi];
                for (j, s) in wall_sources.iter().enumerate() {
                    let blk = traction_block(&(y - s), &normal);
                    for i in 0..3 {
                        for d in 0..3 {
                            e_sig[(3 * qi + i, 3 * j + d)] = blk[(i, d)];
                        }
                    }
                }
            }
            let g = (e_sig * &strengths) / (8.0 * PI);
            for sn in 0..n {
                let t_img = g.view((0, 3 * sn * qs), (3 * q, 3 * qs));
                let block = &ws.proj * t_img * &ws.src_vals;
                let mut view = matrix.view_mut((tn * k, sn * k), (k, k));
                view += block;
            }
        }
        Ok(strengths)
    }

    /// Rebuild the Galerkin right-hand side for another ambient flow; the
    /// geometry-dependent matrix is untouched, so one factorization can
    /// serve a whole family of ambient flows.
    pub fn set_flow(&mut self, flow: &AmbientFlow) {
        let ws = &self.ws;
        let k = ws.mode_count();
        let q = ws.basis.node_count();
        for (sn, c) in self.centers.iter().enumerate() {
            let mut samples = DVector::zeros(3 * q);
            for (qi, dir) in ws.basis.nodes().iter().enumerate() {
                let t = flow.stress(&(c + ws.eps * dir)) * dir;
                for i in 0..3 {
                    samples[3 * qi + i] = t[i];
                }
            }
            self.rhs.rows_mut(sn * k, k).copy_from(&(&ws.proj * samples));
        }
    }

    /// LU-factor the bordered matrix, guarding against pivot collapse.
    pub fn factor(&self, pivot_tol: f64) -> Result<nalgebra::LU<f64, Dyn, Dyn>> {
        let lu = self.matrix.clone().lu();
        let diag: Vec<f64> = (0..self.matrix.nrows()).map(|i| lu.u()[(i, i)].abs()).collect();
        let (dmin, dmax) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if dmin < pivot_tol * dmax {
            return Err(Error::Singular(format!(
                "traction system pivot ratio {:.3e} below tolerance {pivot_tol:.1e}",
                dmin / dmax
            )));
        }
        Ok(lu)
    }

    /// Back-substitute the current right-hand side through an existing
    /// factorization; returns per-sphere coefficients, rigid multipliers,
    /// and the relative residual of the traction rows.
    pub fn solve_factored(
        &self,
        lu: &nalgebra::LU<f64, Dyn, Dyn>,
    ) -> Result<(Vec<DVector<f64>>, DVector<f64>, f64)> {
        let n = self.centers.len();
        let k = self.ws.mode_count();
        let x = lu
            .solve(&self.rhs)
            .ok_or_else(|| Error::Singular("traction system LU solve failed".into()))?;
        let residual = (&self.matrix * &x - &self.rhs).amax() / self.rhs.amax().max(1e-300);
        let coeffs = (0..n).map(|sn| DVector::from(x.rows(sn * k, k))).collect();
        let mult = DVector::from(x.rows(n * k, 6 * n));
        Ok((coeffs, mult, residual))
    }

    /// LU solve with a pivot-ratio guard; returns per-sphere coefficients,
    /// rigid multipliers, and the relative residual of the traction rows.
    pub fn solve(&self, pivot_tol: f64) -> Result<(Vec<DVector<f64>>, DVector<f64>, f64)> {
        let lu = self.factor(pivot_tol)?;
        self.solve_factored(&lu)
    }

    /// Rigid-body motions from the no-slip surface velocity: with density
    /// q = −f, the flow is u = ū − Σ single layers; project its surface
    /// trace onto the rigid fields. The self layer is evaluated spectrally
    /// (the quadrature kernels are singular there), all else by quadrature.
    pub fn recover_motions(
        &self,
        coeffs: &[DVector<f64>],
        flow: &AmbientFlow,
    ) -> Result<Vec<(Vec3, Vec3)>> {
        let ws = &self.ws;
        let n = self.centers.len();
        let eps = ws.eps;
        let mu = flow.viscosity();
        let qs = ws.src_rule.len();
        let scale_u = 1.0 / (8.0 * PI * mu);

        // Weighted source values w_p ε² f(x_p) per sphere.
        let svals: Vec<DVector<f64>> = coeffs.iter().map(|c| &ws.src_vals * c).collect();
        // Collapsed cavity-image strengths for the whole density set.
        let img_strengths = self.cavity_strengths.as_ref().map(|qall| {
            let mut stacked = DVector::zeros(3 * n * qs);
            for (sn, sv) in svals.iter().enumerate() {
                stacked.rows_mut(3 * sn * qs, 3 * qs).copy_from(sv);
            }
            qall * stacked
        });

        // Half-space images per source node, built once.
        let wall_imgs: Option<Vec<Vec<WallImage>>> = match *self.kernel.domain().shape() {
            DomainShape::HalfSpace { wall_z } => Some(
                self.centers
                    .iter()
                    .map(|c| {
                        ws.src_rule
                            .nodes
                            .iter()
                            .map(|xd| WallImage::new(&(c + eps * xd), wall_z))
                            .collect()
                    })
                    .collect(),
            ),
            _ => None,
        };

        let mut motions = Vec::with_capacity(n);
        for tn in 0..n {
            // Spectral self layer: u_self = −(ε/8πμ)·(bare block per degree).
            let mut c_sl = coeffs[tn].clone();
            apply_block_diagonal(&ws.basis, &mut c_sl, |l| *ws.spectrum.single_layer_block(l));
            let self_vals = ws.basis.evaluate(&c_sl)?;

            let mut u_sum = Vec3::zeros();
            let mut rot_sum = Vec3::zeros();
            for (qi, (dir, w)) in
                ws.basis.nodes().iter().zip(ws.basis.weights()).enumerate()
            {
                let y = self.centers[tn] + eps * dir;
                let mut u = flow.velocity(&y) - eps * scale_u * self_vals[qi];
                for sn in 0..n {
                    if sn == tn {
                        continue;
                    }
                    for (p, xd) in ws.src_rule.nodes.iter().enumerate() {
                        let x = self.centers[sn] + eps * xd;
                        let f = Vec3::new(
                            svals[sn][3 * p],
                            svals[sn][3 * p + 1],
                            svals[sn][3 * p + 2],
                        );
                        u -= scale_u * (prim::oseen(&(y - x)) * f);
                    }
                }
                if let Some(imgs) = &wall_imgs {
                    for sn in 0..n {
                        for (p, img) in imgs[sn].iter().enumerate() {
                            let f = Vec3::new(
                                svals[sn][3 * p],
                                svals[sn][3 * p + 1],
                                svals[sn][3 * p + 2],
                            );
                            u -= scale_u * (img.eval(&y).u * f);
                        }
                    }
                }
                if let Some(wimg) = &img_strengths {
                    let wall = self.kernel.wall_operator().unwrap();
                    for (j, s) in wall.sources().iter().enumerate() {
                        let f = Vec3::new(wimg[3 * j], wimg[3 * j + 1], wimg[3 * j + 2]);
                        u -= scale_u * (prim::oseen(&(y - s)) * f);
                    }
                }
                u_sum += *w * u;
                rot_sum += *w * dir.cross(&u);
            }
            let u_n = u_sum / (4.0 * PI);
            let om_n = rot_sum * 3.0 / (8.0 * PI * eps);
            motions.push((u_n, om_n));
        }
        Ok(motions)
    }
}

/// Apply per-degree 3×3 family blocks to a coefficient vector in place.
pub(crate) fn apply_block_diagonal<F: Fn(u32) -> Matrix3<f64>>(
    basis: &SurfaceBasis,
    coeffs: &mut DVector<f64>,
    f: F,
) {
    let fams = [Family::Radial, Family::Gradient, Family::Curl];
    for l in 0..=basis.l_max() {
        let block = f(l);
        for m in -(l as i32)..=(l as i32) {
            let idx: Vec<Option<usize>> = fams
                .iter()
                .map(|&family| basis.index_of(&Mode { family, degree: l, order: m }))
                .collect();
            let mut v = nalgebra::Vector3::zeros();
            for (fi, id) in idx.iter().enumerate() {
                if let Some(a) = id {
                    v[fi] = coeffs[*a];
                }
            }
            let out = block * v;
            for (fi, id) in idx.iter().enumerate() {
                if let Some(a) = id {
                    coeffs[*a] = out[fi];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AmbientFlow;
    use crate::util::fit_power_law;

    #[test]
    fn cross_block_decays_with_the_cube_of_separation() {
        // The coupling block contracted against force-free densities: net
        // forces travel as r⁻², everything a neutrally buoyant sphere can
        // carry as r⁻³. Projecting out the translation columns isolates the
        // faster decay.
        let eps = 0.01;
        let flow = AmbientFlow::simple_shear(1.0, 1.0);
        let kernel = GreenKernel::free_space();
        let (mut rs, mut norms) = (Vec::new(), Vec::new());
        for m in [8.0, 16.0, 32.0, 64.0] {
            let ws = Workspace::new(2, eps, 1).unwrap();
            let k = ws.mode_count();
            let centers = [Vec3::zeros(), Vec3::new(m * eps, 0.0, 0.0)];
            let sys = System::assemble(ws, &centers, &flow, &kernel).unwrap();
            let block = sys.matrix.view((0, k), (k, k)).into_owned();
            let mut proj = DMatrix::<f64>::identity(k, k);
            for d in 0..3 {
                let t = sys.ws.rigid.column(d);
                proj -= &t * t.transpose();
            }
            rs.push(m * eps);
            norms.push((block * proj).norm());
        }
        let fit = fit_power_law(&rs, &norms).unwrap();
        assert!(
            (fit.slope + 3.0).abs() <= 0.3,
            "projected cross-block decay exponent {:.2} is not cubic",
            -fit.slope
        );
    }
}
