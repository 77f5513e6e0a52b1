//! Physical free-space kernels: the point-force velocity/pressure pair and
//! the traction (stress) kernel entering the boundary integral equation.
//!
//! Argument order is observation first: `x` is where the field is evaluated,
//! `y` is where the unit force sits, r = x − y.

use super::primitives;
use crate::{Error, Mat3, Result, Vec3};
use std::f64::consts::PI;

/// Point-force velocity tensor and pressure vector:
/// t_ij = (1/8πμ)(δ_ij/r + r_i r_j/r³), p_i = (1/4π) r_i/r³, r = x − y.
pub fn stokeslet(x: &Vec3, y: &Vec3, mu: f64) -> Result<(Mat3, Vec3)> {
    let r = x - y;
    if r.norm() == 0.0 {
        return Err(Error::Singular("stokeslet evaluated at its pole".into()));
    }
    let t = primitives::oseen(&r) / (8.0 * PI * mu);
    let p = primitives::pressure(&r) / (8.0 * PI);
    Ok((t, p))
}

/// Free-space stress kernel of the Green's pair: rank-3 tensor
/// (3/4π) r_i r_j r_k / r⁵ with r = x − y, returned as out[k][(i, j)]
/// with k the force direction (the tensor is totally symmetric).
pub fn stress_kernel_free(x: &Vec3, y: &Vec3) -> Result<[Mat3; 3]> {
    let r = x - y;
    if r.norm() == 0.0 {
        return Err(Error::Singular("stress kernel evaluated at its pole".into()));
    }
    let sig = primitives::stress(&(-r)); // Σ(y−x) = −Σ(x−y); see below
    // Σ_ikj(y−x) = −6 (y−x)³/|·|⁵ = +6 (x−y) pattern; divide by 8π to get
    // (3/4π) r r r/r⁵ with r = x − y.
    Ok(std::array::from_fn(|j| sig[j] / (8.0 * PI)))
}

/// Traction kernel of the boundary integral equation: the traction at
/// observation point `y_obs` (surface point with inward normal `normal`)
/// produced by a unit point force at `x_src`, as a 3×3 map from force
/// direction to traction component:
///
///   k_ij(y, x) = −(3/4π) z_i z_j (z·n̂)/|z|⁵,  z = y_obs − x_src.
///
/// On a unit sphere with both points on the surface and n̂ inward this
/// reduces to +(3/8π) z_i z_j/|z|³, whose surface integral is exactly ½ δ.
pub fn traction_kernel(y_obs: &Vec3, x_src: &Vec3, normal: &Vec3) -> Mat3 {
    let z = y_obs - x_src;
    let r5 = z.norm().powi(5);
    let zn = z.dot(normal);
    Mat3::from_fn(|i, j| -3.0 / (4.0 * PI) * z[i] * z[j] * zn / r5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::SphereRule;
    use approx::assert_relative_eq;

    #[test]
    fn stokeslet_axis_value() {
        // x − y = (1,0,0), μ = 1 → t = (1/8π) diag(2, 1, 1).
        let (t, p) = stokeslet(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros(), 1.0).unwrap();
        let expect = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)) / (8.0 * PI);
        assert!((t - expect).norm() < 1e-15);
        assert_relative_eq!(p.x, 1.0 / (4.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn stokeslet_scaling_with_distance() {
        let y = Vec3::new(0.2, -0.1, 0.4);
        let d = Vec3::new(0.3, 1.1, -0.7);
        let (t1, p1) = stokeslet(&(y + d), &y, 1.0).unwrap();
        let (t2, p2) = stokeslet(&(y + d * 2.0), &y, 1.0).unwrap();
        assert!((t2 * 2.0 - t1).norm() < 1e-13);
        assert!((p2 * 4.0 - p1).norm() < 1e-13);
    }

    #[test]
    fn stokeslet_divergence_vanishes() {
        let y = Vec3::new(0.5, 0.5, 0.5);
        for x in [Vec3::new(2.0, 1.0, 0.0), Vec3::new(-0.3, 1.9, 2.2)] {
            let h = 1e-5;
            for j in 0..3 {
                let mut div = 0.0;
                for i in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += h;
                    xm[i] -= h;
                    let (tp, _) = stokeslet(&xp, &y, 1.0).unwrap();
                    let (tm, _) = stokeslet(&xm, &y, 1.0).unwrap();
                    div += (tp[(i, j)] - tm[(i, j)]) / (2.0 * h);
                }
                assert!(div.abs() < 1e-7, "divergence {div} for column {j}");
            }
        }
    }

    #[test]
    fn coincident_points_error() {
        let x = Vec3::new(1.0, 2.0, 3.0);
        assert!(stokeslet(&x, &x, 1.0).is_err());
        assert!(stress_kernel_free(&x, &x).is_err());
    }

    #[test]
    fn stress_kernel_closed_form_on_axis() {
        // r = x − y = (0,0,2): (3/4π) r_i r_j r_k/r⁵ is zero unless all
        // indices are 3, where it equals (3/4π)·8/32 = 3/(16π).
        let k = stress_kernel_free(&Vec3::new(0.0, 0.0, 2.0), &Vec3::zeros()).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                for l in 0..3 {
                    let expect = if i == 2 && j == 2 && l == 2 {
                        3.0 / (16.0 * PI)
                    } else {
                        0.0
                    };
                    assert_relative_eq!(k[j][(i, l)], expect, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn traction_kernel_integrates_to_half_identity_on_unit_sphere() {
        // ∮ k(y, x) ds(x) = ½ I for y on the unit sphere, n̂(y) = −ŷ inward.
        // The integrand has an integrable 1/|z| singularity at x = y, so use
        // the pole-concentrated rule rotated to y.
        let y = Vec3::new(0.6, -0.3, 0.74).normalize();
        let rot = crate::quad::rotation_to(&y);
        let rule = SphereRule::polar(32, 32).rotated(&rot);
        let mut acc = Mat3::zeros();
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += traction_kernel(&y, x, &(-y)) * *w;
        }
        assert!(
            (acc - Mat3::identity() * 0.5).norm() < 1e-10,
            "∮k ds = {acc}"
        );
    }

    #[test]
    fn stress_kernel_decays_as_inverse_square() {
        // ‖σ_y(T)‖ ~ r⁻² over r ∈ [4, 64].
        let y = Vec3::zeros();
        let dir = Vec3::new(0.36, 0.48, 0.8);
        let rs: Vec<f64> = crate::util::geomspace(4.0, 64.0, 9);
        let mags: Vec<f64> = rs
            .iter()
            .map(|r| {
                let k = stress_kernel_free(&(dir * *r), &y).unwrap();
                k.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
            })
            .collect();
        let fit = crate::util::fit_power_law(&rs, &mags).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.05, "decay exponent {}", fit.slope);
    }
}
