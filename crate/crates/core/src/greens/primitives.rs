//! Raw singularity tensors for Stokes flow and their derivatives.
//!
//! Everything here is in "bare" units: no 1/8π prefactor and no viscosity.
//! The velocity kernel is S_ij(z) = δ_ij/|z| + z_i z_j/|z|³ with z pointing
//! from the source to the observation point, the matching pressure is
//! P_j(z) = 2 z_j/|z|³, and the stress of that pair obeys the closed form
//! −P_j δ_ik + ∂_k S_ij + ∂_i S_kj = −6 z_i z_k z_j/|z|⁵, which the tests
//! verify directly. Callers apply 1/(8πμ) (velocity) or 1/(8π) (pressure,
//! stress) to obtain physical fields.

use crate::{Mat3, Vec3};

/// Velocity tensor S_ij(z) of a point force.
pub fn oseen(z: &Vec3) -> Mat3 {
    let r = z.norm();
    let r3 = r * r * r;
    Mat3::from_fn(|i, j| {
        let d = if i == j { 1.0 / r } else { 0.0 };
        d + z[i] * z[j] / r3
    })
}

/// ∂S_ij/∂z_k, returned as grad[k][(i, j)].
pub fn oseen_grad(z: &Vec3) -> [Mat3; 3] {
    let r = z.norm();
    let r3 = r.powi(3);
    let r5 = r.powi(5);
    std::array::from_fn(|k| {
        Mat3::from_fn(|i, j| {
            let mut v = -3.0 * z[i] * z[j] * z[k] / r5;
            if i == j {
                v -= z[k] / r3;
            }
            if i == k {
                v += z[j] / r3;
            }
            if j == k {
                v += z[i] / r3;
            }
            v
        })
    })
}

/// ∂²S_ij/∂z_k∂z_l, returned as hess[k][l][(i, j)].
pub fn oseen_grad2(z: &Vec3) -> [[Mat3; 3]; 3] {
    let r = z.norm();
    let r3 = r.powi(3);
    let r5 = r.powi(5);
    let r7 = r.powi(7);
    std::array::from_fn(|k| {
        std::array::from_fn(|l| {
            Mat3::from_fn(|i, j| {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                d(i, j) * (3.0 * z[k] * z[l] / r5 - d(k, l) / r3)
                    + (d(i, k) * d(j, l) + d(j, k) * d(i, l)) / r3
                    - 3.0 * (d(i, k) * z[j] + d(j, k) * z[i]) * z[l] / r5
                    - 3.0 * (d(i, l) * z[j] * z[k] + d(j, l) * z[i] * z[k] + d(k, l) * z[i] * z[j])
                        / r5
                    + 15.0 * z[i] * z[j] * z[k] * z[l] / r7
            })
        })
    })
}

/// Pressure vector P_j(z) = 2 z_j/|z|³ of a point force.
pub fn pressure(z: &Vec3) -> Vec3 {
    let r3 = z.norm().powi(3);
    z * (2.0 / r3)
}

/// ∂P_j/∂z_k, returned with rows j and columns k.
pub fn pressure_grad(z: &Vec3) -> Mat3 {
    let r = z.norm();
    let r3 = r.powi(3);
    let r5 = r.powi(5);
    Mat3::from_fn(|j, k| {
        let d = if j == k { 2.0 / r3 } else { 0.0 };
        d - 6.0 * z[j] * z[k] / r5
    })
}

/// Potential-dipole direction field D_i(z) = z_i/|z|³.
pub fn point_source(z: &Vec3) -> Vec3 {
    z / z.norm().powi(3)
}

/// ∂D_i/∂z_k.
pub fn point_source_grad(z: &Vec3) -> Mat3 {
    let r = z.norm();
    let r3 = r.powi(3);
    let r5 = r.powi(5);
    Mat3::from_fn(|i, k| {
        let d = if i == k { 1.0 / r3 } else { 0.0 };
        d - 3.0 * z[i] * z[k] / r5
    })
}

/// ∂²D_i/∂z_k∂z_l, returned as hess[k][l][i-row vector form].
pub fn point_source_grad2(z: &Vec3) -> [[Vec3; 3]; 3] {
    let r = z.norm();
    let r5 = r.powi(5);
    let r7 = r.powi(7);
    std::array::from_fn(|k| {
        std::array::from_fn(|l| {
            Vec3::from_fn(|i, _| {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                -3.0 * (d(i, k) * z[l] + d(i, l) * z[k] + d(k, l) * z[i]) / r5
                    + 15.0 * z[i] * z[k] * z[l] / r7
            })
        })
    })
}

/// Stress tensor of the point-force pair: Σ_ikj(z) = −6 z_i z_k z_j/|z|⁵,
/// returned as sigma[j][(i, k)] with j the force direction.
pub fn stress(z: &Vec3) -> [Mat3; 3] {
    let r5 = z.norm().powi(5);
    std::array::from_fn(|j| Mat3::from_fn(|i, k| -6.0 * z[i] * z[k] * z[j] / r5))
}

/// ∂Σ_ikj/∂z_l, returned as dsigma[j][l][(i, k)].
pub fn stress_grad(z: &Vec3) -> [[Mat3; 3]; 3] {
    let r = z.norm();
    let r5 = r.powi(5);
    let r7 = r.powi(7);
    std::array::from_fn(|j| {
        std::array::from_fn(|l| {
            Mat3::from_fn(|i, k| {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                -6.0 * (d(i, l) * z[k] * z[j] + d(k, l) * z[i] * z[j] + d(j, l) * z[i] * z[k]) / r5
                    + 30.0 * z[i] * z[k] * z[j] * z[l] / r7
            })
        })
    })
}
