//! Exact real solid harmonics as polynomials in Cartesian coordinates.
//!
//! Each harmonic is built once as a `Poly3` through integer recurrences, so
//! evaluation anywhere on (or off) the unit sphere is exact polynomial
//! arithmetic — no trigonometric grids and no Condon–Shortley phase.

use crate::poly3::Poly3;

/// Scalar surface harmonic of degree `l`, order `m`, together with the
/// Cartesian gradient of its degree-`l` solid extension.
///
/// Orders are signed: `m > 0` selects the cos(mφ) harmonic, `m < 0` the
/// sin(|m|φ) harmonic, `m = 0` the zonal one. Normalized so that
/// ∮ Y² dΩ = 1 on the unit sphere.
#[derive(Debug, Clone)]
pub struct ScalarHarmonic {
    pub degree: u32,
    pub order: i32,
    /// Homogeneous degree-`l` polynomial equal to Y on the unit sphere.
    pub poly: Poly3,
    /// Cartesian gradient of `poly` (degree `l`−1 components).
    pub grad: [Poly3; 3],
}

/// All real surface harmonics with degree ≤ `l_max`, ordered by degree and
/// then by signed order −l, …, 0, …, +l.
pub fn harmonics_up_to(l_max: u32) -> Vec<ScalarHarmonic> {
    let l_max = l_max as usize;
    // Azimuthal factors: c[m] + i s[m] = (x + iy)^m.
    let mut c = vec![Poly3::constant(1.0)];
    let mut s = vec![Poly3::zero()];
    let x = Poly3::coord(0);
    let y = Poly3::coord(1);
    for m in 1..=l_max {
        c.push((&x * &c[m - 1]) - (&y * &s[m - 1]));
        s.push((&x * &s[m - 1]) + (&y * &c[m - 1]));
    }

    // Legendre-type factors Π[l][m] with Π·(x+iy)^m a solid harmonic:
    //   Π[m][m]   = (2m−1)!!,
    //   Π[m+1][m] = (2m+1) z Π[m][m],
    //   Π[l][m]   = ((2l−1) z Π[l−1][m] − (l−1+m) r² Π[l−2][m]) / (l−m).
    let z = Poly3::coord(2);
    let r2 = Poly3::r_squared();
    let mut pi = vec![vec![Poly3::zero(); l_max + 1]; l_max + 1];
    for m in 0..=l_max {
        pi[m][m] = Poly3::constant(odd_double_factorial(m as u64));
        if m + 1 <= l_max {
            pi[m + 1][m] = (&z * &pi[m][m]).scale(2.0 * m as f64 + 1.0);
        }
        for l in (m + 2)..=l_max {
            let a = (&z * &pi[l - 1][m]).scale(2.0 * l as f64 - 1.0);
            let b = (&r2 * &pi[l - 2][m]).scale((l - 1 + m) as f64);
            pi[l][m] = (a - b).scale(1.0 / (l - m) as f64);
        }
    }

    let mut out = Vec::with_capacity((l_max + 1) * (l_max + 1));
    for l in 0..=l_max {
        for m in -(l as i32)..=(l as i32) {
            let am = m.unsigned_abs() as usize;
            let unnorm = match m.signum() {
                0 => pi[l][0].clone(),
                1 => &pi[l][am] * &c[am],
                _ => &pi[l][am] * &s[am],
            };
            let poly = unnorm.scale(normalization(l as u32, am as u32));
            let grad = poly.gradient();
            out.push(ScalarHarmonic { degree: l as u32, order: m, poly, grad });
        }
    }
    out
}

/// Normalization making ∮ Y² dΩ = 1 for Y = N·Π_l^|m|·{cos|sin}(|m|φ)·(r sinθ)^|m|.
fn normalization(l: u32, m_abs: u32) -> f64 {
    let ratio = factorial_ratio(l, m_abs); // (l−m)!/(l+m)!
    if m_abs == 0 {
        ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI)).sqrt()
    } else {
        ((2.0 * l as f64 + 1.0) / (2.0 * std::f64::consts::PI) * ratio).sqrt()
    }
}

/// (l−m)!/(l+m)! as an exact product (integers stay below 2⁵³ for l ≤ 16).
fn factorial_ratio(l: u32, m: u32) -> f64 {
    let mut denom = 1.0;
    for k in (l - m + 1)..=(l + m) {
        denom *= k as f64;
    }
    1.0 / denom
}

/// (2m−1)!! with the (−1)!! = 1 convention for m = 0.
fn odd_double_factorial(m: u64) -> f64 {
    (1..=m).map(|k| (2 * k - 1) as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::SphereRule;
    use approx::assert_relative_eq;

    #[test]
    fn low_degree_harmonics_match_closed_forms() {
        let hs = harmonics_up_to(2);
        let p = crate::Vec3::new(0.3, -0.5, 0.7);
        let find = |l: u32, m: i32| hs.iter().find(|h| h.degree == l && h.order == m).unwrap();
        let c = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(find(0, 0).poly.eval(&p), c, max_relative = 1e-15);
        assert_relative_eq!(find(1, 0).poly.eval(&p), 3f64.sqrt() * c * p.z, max_relative = 1e-14);
        assert_relative_eq!(find(1, 1).poly.eval(&p), 3f64.sqrt() * c * p.x, max_relative = 1e-14);
        assert_relative_eq!(find(1, -1).poly.eval(&p), 3f64.sqrt() * c * p.y, max_relative = 1e-14);
        // Y₂₀ = √(5/16π)(3z² − r²), Y₂₂ = √(15/16π)(x² − y²), Y₂₋₂ = √(15/4π)xy.
        let y20 = (5.0 / (16.0 * std::f64::consts::PI)).sqrt()
            * (3.0 * p.z * p.z - p.norm_squared());
        assert_relative_eq!(find(2, 0).poly.eval(&p), y20, max_relative = 1e-14);
        let y22 = (15.0 / (16.0 * std::f64::consts::PI)).sqrt() * (p.x * p.x - p.y * p.y);
        assert_relative_eq!(find(2, 2).poly.eval(&p), y22, max_relative = 1e-14);
        let y2m2 = (15.0 / (4.0 * std::f64::consts::PI)).sqrt() * p.x * p.y;
        assert_relative_eq!(find(2, -2).poly.eval(&p), y2m2, max_relative = 1e-14);
    }

    #[test]
    fn solid_harmonics_are_harmonic_polynomials() {
        // Recurrence coefficients are not all dyadic, so the laplacian
        // cancels to roundoff rather than exactly; check it pointwise.
        let pts = [
            crate::Vec3::new(0.9, -0.2, 0.4),
            crate::Vec3::new(-0.6, 0.8, -0.1),
            crate::Vec3::new(0.2, 0.3, -0.9),
        ];
        for h in harmonics_up_to(8) {
            let lap = h.poly.laplacian();
            for p in &pts {
                assert!(
                    lap.eval(p).abs() < 1e-12,
                    "∇²Y = {:.3e} at l={} m={}",
                    lap.eval(p),
                    h.degree,
                    h.order
                );
            }
            assert_eq!(h.poly.degree(), Some(h.degree));
        }
    }

    #[test]
    fn scalar_harmonics_are_orthonormal_on_the_sphere() {
        let hs = harmonics_up_to(6);
        let rule = SphereRule::gauss_uniform(10, 16);
        for (a, ha) in hs.iter().enumerate() {
            for (b, hb) in hs.iter().enumerate().skip(a) {
                let ip = rule.integrate(|n| ha.poly.eval(n) * hb.poly.eval(n));
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (ip - want).abs() < 1e-12,
                    "⟨{} {}|{} {}⟩ = {ip}",
                    ha.degree,
                    ha.order,
                    hb.degree,
                    hb.order
                );
            }
        }
    }
}
