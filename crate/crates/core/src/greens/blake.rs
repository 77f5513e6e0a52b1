//! Image system for a point force above a plane no-slip wall.
//!
//! The image of a Stokeslet at height h over the wall combines a mirrored
//! Stokeslet, a potential dipole, and a Stokeslet doublet at the mirror
//! point; the combination cancels the source velocity exactly on the wall.
//! Everything here is in bare units (no 1/8π, no μ); the fields are linear
//! in the force, so each quantity is returned per unit force direction.

use super::primitives as prim;
use super::ImageField;
use crate::{Mat3, Vec3};

/// Prepared image of a point force at `source` above the wall z = wall_z.
#[derive(Debug, Clone)]
pub struct WallImage {
    mirror: Vec3,
    height: f64,
}

impl WallImage {
    /// The source must sit strictly inside the fluid (z > wall_z).
    pub fn new(source: &Vec3, wall_z: f64) -> Self {
        let height = source.z - wall_z;
        assert!(height > 0.0, "image source must lie above the wall");
        Self {
            mirror: Vec3::new(source.x, source.y, 2.0 * wall_z - source.z),
            height,
        }
    }

    /// Evaluate the image velocity/pressure/gradient at `obs` (bare units).
    ///
    /// With R = obs − mirror, h the source height, and β = (1, 1, −1):
    ///   u_ij = −S_ij(R) + 2h β_j ∂/∂R_j [ h R_i/R³ − S_i3(R) ]   (no sum on j)
    ///   p_j  = −P_j(R) − 2h β_j ∂P_3/∂R_j(R)
    pub fn eval(&self, obs: &Vec3) -> ImageField {
        let r = obs - self.mirror;
        let h = self.height;
        let beta = [1.0, 1.0, -1.0];

        let s = prim::oseen(&r);
        let sg = prim::oseen_grad(&r);
        let sg2 = prim::oseen_grad2(&r);
        let dg = prim::point_source_grad(&r);
        let dg2 = prim::point_source_grad2(&r);
        let p = prim::pressure(&r);
        let pg = prim::pressure_grad(&r);

        // ∂/∂R_j [ h D_i − S_i3 ](R) and its gradient ∂_l of the same.
        let mut u = Mat3::zeros();
        let mut grad = [Mat3::zeros(); 3];
        for j in 0..3 {
            for i in 0..3 {
                let core = h * dg[(i, j)] - sg[j][(i, 2)];
                u[(i, j)] = -s[(i, j)] + 2.0 * h * beta[j] * core;
                for l in 0..3 {
                    let core_l = h * dg2[j][l][i] - sg2[j][l][(i, 2)];
                    grad[l][(i, j)] = -sg[l][(i, j)] + 2.0 * h * beta[j] * core_l;
                }
            }
        }
        let mut pv = Vec3::zeros();
        for j in 0..3 {
            pv[j] = -p[j] - 2.0 * h * beta[j] * pg[(2, j)];
        }

        ImageField { u, p: pv, grad }
    }
}
