//! Spectrum of the singular self-interaction traction operator on a sphere.
//!
//! The operator K[f](y) = ∫ k(y,x)·f(x) ds(x) with the traction kernel
//! k_ij(y,x) = −(3/4π) z_i z_j (z·n̂(y))/|z|⁵, z = y−x, n̂ inward, maps each
//! (degree, order) harmonic subspace to itself and only mixes the three
//! vector families. We evaluate K by singularity subtraction — on a sphere
//! ∫ k(y,x) ds(x) = ½I exactly, so
//!     K[f](y) = ∫ k(y,x)(f(x) − f(y)) ds(x) + ½ f(y)
//! has an integrable O(1/|z|)·O(|z|) integrand — and reconstruct the 3×3
//! family block per degree from point values, exploiting that the three
//! family fields are mutually orthogonal at every point.
//!
//! Downstream solvers consume the blocks of ½I − K; they never touch the
//! singular kernel themselves.

use super::{evaluate_family, solid, Family, SurfaceBasis};
use crate::quad::{rotation_to, SphereRule};
use crate::util::KahanSum;
use crate::{Error, Result, Vec3};
use nalgebra::{DVector, Matrix3};

/// Families in block order.
pub const FAMILIES: [Family; 3] = [Family::Radial, Family::Gradient, Family::Curl];

/// One audit row: the eigenvalue of K on a (degree, family) eigenvector.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumRow {
    pub degree: u32,
    /// Dominant family of the eigenvector (the tangential families mix with
    /// the radial one inside each degree).
    pub family: Family,
    pub eigenvalue: f64,
}

/// The two singular self-operators a sphere surface needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Traction operator K (kernel (3/8π)·z zᵀ/(ε|z|³) ds on the sphere).
    Traction,
    /// Bare single-layer velocity operator (1/ε)∫ S(y−x)·q ds with
    /// S = I/|z| + z zᵀ/|z|³; physical self velocity = ε/(8πμ) × this.
    SingleLayer,
}

/// Family-mixing blocks and eigenvalues of K for every degree ≤ L_max.
#[derive(Debug, Clone)]
pub struct SelfSpectrum {
    l_max: u32,
    /// Per degree, K in family order [Radial, Gradient, Curl]; degree 0 uses
    /// only the (0,0) entry since the tangential families vanish there.
    blocks: Vec<Matrix3<f64>>,
    /// Per degree, the bare single-layer velocity operator.
    sl_blocks: Vec<Matrix3<f64>>,
    rows: Vec<SpectrumRow>,
}

/// Process-wide cache of computed spectra: the blocks are deterministic
/// pure functions of the degree cap, and solvers request them per solve.
pub fn self_spectrum_cached(l_max: u32) -> Result<std::sync::Arc<SelfSpectrum>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<SelfSpectrum>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&l_max) {
        return Ok(Arc::clone(hit));
    }
    let fresh = Arc::new(self_spectrum(l_max)?);
    cache.lock().unwrap().insert(l_max, Arc::clone(&fresh));
    Ok(fresh)
}

/// Compute the self-interaction spectrum up to `l_max` (≤ 8).
///
/// Each block is computed on two quadrature rungs (doubled node count) and
/// at two independent surface points; disagreement beyond 1e-8 fails with a
/// report rather than returning an unconverged table.
pub fn self_spectrum(l_max: u32) -> Result<SelfSpectrum> {
    if l_max > 8 {
        return Err(Error::InvalidInput(format!(
            "self-interaction spectrum degree {l_max} exceeds the supported maximum of 8"
        )));
    }
    let mut tables = Vec::new();
    for kind in [KernelKind::Traction, KernelKind::SingleLayer] {
        let coarse = blocks_at_radius(kind, l_max, 1.0, 32)?;
        let fine = blocks_at_radius(kind, l_max, 1.0, 64)?;
        let mut worst = 0.0f64;
        for (a, b) in coarse.iter().zip(&fine) {
            worst = worst.max((a - b).amax());
        }
        if worst > 1e-8 {
            return Err(Error::Quadrature(format!(
                "self-interaction blocks moved {worst:.3e} under node doubling (tolerance 1e-8)"
            )));
        }
        tables.push(fine);
    }
    let sl_blocks = tables.pop().unwrap();
    let blocks = tables.pop().unwrap();

    let mut rows = Vec::new();
    for (l, block) in blocks.iter().enumerate() {
        rows.extend(block_rows(l as u32, block)?);
    }
    Ok(SelfSpectrum { l_max, blocks, sl_blocks, rows })
}

impl SelfSpectrum {
    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// K restricted to degree `l`, in family order [Radial, Gradient, Curl].
    pub fn block(&self, l: u32) -> &Matrix3<f64> {
        &self.blocks[l as usize]
    }

    /// ½I − K at degree `l`: the self part of the traction equations.
    pub fn system_block(&self, l: u32) -> Matrix3<f64> {
        Matrix3::identity() * 0.5 - self.blocks[l as usize]
    }

    /// Bare single-layer velocity block at degree `l`. A surface density
    /// with coefficients c produces the on-surface velocity
    /// ε/(8πμ) · (block applied per degree) on a sphere of radius ε.
    pub fn single_layer_block(&self, l: u32) -> &Matrix3<f64> {
        &self.sl_blocks[l as usize]
    }

    /// Audit rows (degree, dominant family, eigenvalue), degree-major.
    pub fn rows(&self) -> &[SpectrumRow] {
        &self.rows
    }

    /// Export the audit table as CSV (degree, family, eigenvalue).
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                let fam = match r.family {
                    Family::Radial => 0.0,
                    Family::Gradient => 1.0,
                    Family::Curl => 2.0,
                };
                vec![r.degree as f64, fam, r.eigenvalue]
            })
            .collect();
        crate::io::write_csv(path, "degree,family,eigenvalue", &rows)
    }

    /// Solve (½I − K)f = rhs for the traction on one freely suspended
    /// sphere, given both sides as basis coefficients.
    ///
    /// The rigid-motion modes sit in the null space of ½I − K (their
    /// eigenvalue of K is ½); zero net force and torque make the right-hand
    /// side orthogonal to them, and this solve returns the traction with no
    /// rigid component — the freely suspended closure.
    pub fn solve_force_free(
        &self,
        basis: &SurfaceBasis,
        rhs: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if basis.l_max() > self.l_max {
            return Err(Error::InvalidInput(format!(
                "basis degree {} exceeds spectrum degree {}",
                basis.l_max(),
                self.l_max
            )));
        }
        if rhs.len() != basis.mode_count() {
            return Err(Error::InvalidInput(format!(
                "right-hand side has {} coefficients, basis has {} modes",
                rhs.len(),
                basis.mode_count()
            )));
        }
        let mut out = DVector::zeros(rhs.len());
        for l in 0..=basis.l_max() {
            let sys = self.system_block(l);
            for m in -(l as i32)..=(l as i32) {
                let idx: Vec<Option<usize>> = FAMILIES
                    .iter()
                    .map(|&family| basis.index_of(&super::Mode { family, degree: l, order: m }))
                    .collect();
                let mut b = nalgebra::Vector3::zeros();
                for (fi, id) in idx.iter().enumerate() {
                    if let Some(k) = *id {
                        b[fi] = rhs[k];
                    }
                }
                let x = solve_block(&sys, &b, l)?;
                for (fi, id) in idx.iter().enumerate() {
                    if let Some(k) = *id {
                        out[k] = x[fi];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Solve one 3×3 degree block by truncated SVD.
///
/// At degree 1 the rigid translation and rotation tractions are null
/// directions of ½I − K; truncation drops them, and the residual check
/// rejects right-hand sides that actually carry a rigid (net force or
/// torque) component instead of silently projecting it away.
fn solve_block(
    sys: &Matrix3<f64>,
    b: &nalgebra::Vector3<f64>,
    l: u32,
) -> Result<nalgebra::Vector3<f64>> {
    let svd = sys.svd(true, true);
    let cut = 1e-8 * svd.singular_values.max().max(1.0);
    let x = svd.solve(b, cut).map_err(|e| Error::Singular(e.to_string()))?;
    let resid = (sys * x - b).norm();
    if resid > 1e-8 * b.norm().max(1.0) {
        return Err(Error::Singular(format!(
            "degree-{l} right-hand side has a rigid component (residual {resid:.3e})"
        )));
    }
    Ok(x)
}

/// Dominant-family eigen rows of one block.
fn block_rows(l: u32, block: &Matrix3<f64>) -> Result<Vec<SpectrumRow>> {
    if l == 0 {
        return Ok(vec![SpectrumRow { degree: 0, family: Family::Radial, eigenvalue: block[(0, 0)] }]);
    }
    let eig = block.complex_eigenvalues();
    for e in eig.iter() {
        if e.im.abs() > 1e-10 {
            return Err(Error::Quadrature(format!(
                "degree-{l} eigenvalue has imaginary part {:.3e}",
                e.im
            )));
        }
    }
    let mut vals: Vec<f64> = eig.iter().map(|e| e.re).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // Label each eigenvalue by the dominant family of its eigenvector.
    let rows = vals
        .into_iter()
        .map(|ev| {
            let shifted = block - Matrix3::identity() * ev;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.unwrap();
            let vec = v_t.row(2); // right-singular vector of the smallest σ
            let mut fam = 0;
            for i in 1..3 {
                if vec[i].abs() > vec[fam].abs() {
                    fam = i;
                }
            }
            SpectrumRow { degree: l, family: FAMILIES[fam], eigenvalue: ev }
        })
        .collect();
    Ok(rows)
}

/// Family blocks at every degree ≤ l_max, on a sphere of radius `eps`,
/// with an `n`-band polar quadrature (the spectrum is radius-invariant; the
/// radius argument exists so tests can assert exactly that).
pub(crate) fn blocks_at_radius(
    kind: KernelKind,
    l_max: u32,
    eps: f64,
    n: usize,
) -> Result<Vec<Matrix3<f64>>> {
    let harmonics = solid::harmonics_up_to(l_max);
    let mut blocks = Vec::with_capacity(l_max as usize + 1);
    for l in 0..=l_max {
        // Any order gives the same block; the sectoral harmonic keeps the
        // evaluation points far from its zero sets.
        let h = harmonics
            .iter()
            .find(|h| h.degree == l && h.order == l as i32)
            .expect("sectoral harmonic present");
        blocks.push(family_block(kind, h, eps, n)?);
    }
    Ok(blocks)
}

/// The 3×3 family block on the (degree, order) subspace of `h`.
fn family_block(
    kind: KernelKind,
    h: &solid::ScalarHarmonic,
    eps: f64,
    n: usize,
) -> Result<Matrix3<f64>> {
    let (y1, y2) = evaluation_points(h);
    let mut block = Matrix3::zeros();
    for (fi, &family) in FAMILIES.iter().enumerate() {
        if h.degree == 0 && family != Family::Radial {
            continue;
        }
        let c1 = apply_and_reconstruct(kind, h, family, &y1, eps, n);
        let c2 = apply_and_reconstruct(kind, h, family, &y2, eps, n);
        let diff = (c1 - c2).amax();
        if diff > 1e-8 {
            return Err(Error::Quadrature(format!(
                "degree-{} {:?} column differs by {diff:.3e} between surface points",
                h.degree, family
            )));
        }
        block.set_column(fi, &c1);
    }
    Ok(block)
}

/// Apply the operator to one family field and express the result at y back
/// in family components; the families are mutually orthogonal at each
/// point, so the reconstruction is three independent projections.
///
/// Both kernels are O(1/|z|) on the sphere and get the same treatment:
/// subtract the density at y so the integrand is bounded, then add back the
/// exact integral of the kernel itself — ½I for the traction kernel,
/// (16π/3)I for the bare single layer.
fn apply_and_reconstruct(
    kind: KernelKind,
    h: &solid::ScalarHarmonic,
    family: Family,
    y_hat: &Vec3,
    eps: f64,
    n: usize,
) -> nalgebra::Vector3<f64> {
    let rule = SphereRule::polar(n, n).rotated(&rotation_to(y_hat));
    let y = eps * y_hat;
    let b_y = evaluate_family(h, family, y_hat);
    let mut acc = [KahanSum::new(), KahanSum::new(), KahanSum::new()];
    for (x_hat, w) in rule.nodes.iter().zip(&rule.weights) {
        let x = eps * x_hat;
        let z = y - x;
        let r2 = z.norm_squared();
        if r2 < 1e-28 {
            continue; // exact pole: the subtracted integrand vanishes there
        }
        let df = evaluate_family(h, family, x_hat) - b_y;
        let contrib = match kind {
            // k(y,x) ds with inward normal: z·n̂(y) = −|z|²/(2ε) on the
            // sphere, so k = (3/8π) z zᵀ/(ε|z|³); ds = ε² w.
            KernelKind::Traction => {
                let scale = 3.0 / (8.0 * std::f64::consts::PI) * eps / (r2 * r2.sqrt());
                z * (z.dot(&df) * scale)
            }
            // (1/ε)·S(z)·df ds with S = I/|z| + z zᵀ/|z|³; ds = ε² w.
            KernelKind::SingleLayer => {
                let r = r2.sqrt();
                eps * (df / r + z * (z.dot(&df) / (r2 * r)))
            }
        } * *w;
        for i in 0..3 {
            acc[i].add(contrib[i]);
        }
    }
    let back = match kind {
        KernelKind::Traction => 0.5,
        KernelKind::SingleLayer => 16.0 * std::f64::consts::PI / 3.0,
    };
    let k_y = Vec3::new(acc[0].value(), acc[1].value(), acc[2].value()) + back * b_y;
    // Project onto the three family directions at y.
    let mut out = nalgebra::Vector3::zeros();
    for (fi, &f) in FAMILIES.iter().enumerate() {
        if h.degree == 0 && f != Family::Radial {
            continue;
        }
        let bf = evaluate_family(h, f, y_hat);
        out[fi] = bf.dot(&k_y) / bf.norm_squared();
    }
    out
}

/// Two well-separated surface points where the scalar harmonic and its
/// surface gradient are both far from zero.
fn evaluation_points(h: &solid::ScalarHarmonic) -> (Vec3, Vec3) {
    let grid = SphereRule::gauss_uniform(14, 20);
    let score = |p: &Vec3| -> f64 {
        if h.degree == 0 {
            return 1.0 + p.z * 1e-6; // constant field: any point works
        }
        let yv = h.poly.eval(p).abs();
        let g = Vec3::new(h.grad[0].eval(p), h.grad[1].eval(p), h.grad[2].eval(p));
        let tang = (g - p * (h.degree as f64) * h.poly.eval(p)).norm()
            / ((h.degree * (h.degree + 1)) as f64).sqrt();
        yv.min(tang)
    };
    let mut best = grid.nodes[0];
    for p in &grid.nodes {
        if score(p) > score(&best) {
            best = *p;
        }
    }
    let mut second = None;
    for p in &grid.nodes {
        if (p - best).norm() > 0.8 && second.map_or(true, |s: Vec3| score(p) > score(&s)) {
            second = Some(*p);
        }
    }
    (best, second.expect("well-separated second point exists"))
}
