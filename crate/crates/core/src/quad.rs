//! Quadrature rules: Gauss–Legendre lines, product rules on spheres and
//! spherical caps, pole-concentrated rules for nearly singular surface
//! integrals, and small exact orientation sets.

use crate::Vec3;
use nalgebra::Matrix3;
use std::f64::consts::PI;

/// Legendre polynomial P_n and its derivative at x via the three-term
/// recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes (ascending) and weights on [-1, 1].
///
/// Symmetry is enforced exactly: node[n-1-i] = -node[i] and equal weights,
/// so rules built from this are invariant under point reflection.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // `x` descends from +1; store ascending.
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped onto [a, b].
pub fn gauss_legendre_ab(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Quadrature nodes on the unit sphere with weights summing to 4π.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Product rule: Gauss–Legendre in cos θ × uniform in φ.
    ///
    /// Exact for spherical polynomials of degree ≤ min(2·n_theta − 1,
    /// n_phi − 1). With even n_phi the node set is symmetric under x → −x.
    pub fn gauss_uniform(n_theta: usize, n_phi: usize) -> Self {
        let (us, wus) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (u, wu) in us.iter().zip(&wus) {
            let s = (1.0 - u * u).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = dphi * k as f64;
                nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), *u));
                weights.push(wu * dphi);
            }
        }
        Self { nodes, weights }
    }

    /// Rule concentrated around the north pole for integrands with an
    /// integrable O(1/|y−x|) singularity at the pole.
    ///
    /// Near band θ ∈ [0, π/3] is parameterized by t = sin(θ/2) (area element
    /// 4t dt dφ), which makes kernels of the form f(x)/|ẑ − x| smooth in t;
    /// the far band θ ∈ [π/3, π] uses a plain Gauss–Legendre rule in cos θ.
    pub fn polar(n_band: usize, n_phi: usize) -> Self {
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        // Near band: t ∈ [0, sin(π/6)].
        let (ts, wts) = gauss_legendre_ab(n_band, 0.0, 0.5);
        for (t, wt) in ts.iter().zip(&wts) {
            let theta = 2.0 * t.asin();
            let (s, u) = (theta.sin(), theta.cos());
            for k in 0..n_phi {
                let phi = dphi * k as f64;
                nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), u));
                weights.push(4.0 * t * wt * dphi);
            }
        }
        // Far band: u = cos θ ∈ [−1, cos(π/3)].
        let (us, wus) = gauss_legendre_ab(n_band, -1.0, 0.5);
        for (u, wu) in us.iter().zip(&wus) {
            let s = (1.0 - u * u).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = dphi * k as f64;
                nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), *u));
                weights.push(wu * dphi);
            }
        }
        Self { nodes, weights }
    }

    /// Rule on the spherical cap θ ∈ [0, half_angle] around the north pole.
    pub fn cap(half_angle: f64, n_theta: usize, n_phi: usize) -> Self {
        assert!(half_angle > 0.0 && half_angle <= PI);
        let dphi = 2.0 * PI / n_phi as f64;
        let (us, wus) = gauss_legendre_ab(n_theta, half_angle.cos(), 1.0);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (u, wu) in us.iter().zip(&wus) {
            let s = (1.0 - u * u).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = dphi * k as f64;
                nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), *u));
                weights.push(wu * dphi);
            }
        }
        Self { nodes, weights }
    }

    /// The same rule with every node rotated by `rot`.
    pub fn rotated(&self, rot: &Matrix3<f64>) -> Self {
        Self {
            nodes: self.nodes.iter().map(|n| rot * n).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate a vector-valued surface function against the rule.
    pub fn integrate<F: FnMut(&Vec3) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = crate::util::KahanSum::new();
        for (n, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(n));
        }
        acc.value()
    }
}

/// Rotation matrix mapping ẑ to `axis` (unit vector), chosen deterministically.
///
/// The orthonormal completion is built from whichever coordinate axis is
/// least aligned with `axis`, so nearby axes give nearby rotations except at
/// the selection switchovers.
pub fn rotation_to(axis: &Vec3) -> Matrix3<f64> {
    let z = axis.normalize();
    let helper = if z.x.abs() <= z.y.abs() && z.x.abs() <= z.z.abs() {
        Vec3::x()
    } else if z.y.abs() <= z.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let x = (helper - z * helper.dot(&z)).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// 14-point octahedron + cube-vertex orientation set, exact for spherical
/// polynomials of degree ≤ 5. Weights sum to 1.
pub fn orientation_set_14() -> Vec<(Vec3, f64)> {
    let mut set = Vec::with_capacity(14);
    let a = 1.0 / 15.0;
    for i in 0..3 {
        let mut v = Vec3::zeros();
        v[i] = 1.0;
        set.push((v, a));
        set.push((-v, a));
    }
    let b = 3.0 / 40.0;
    let c = 1.0 / 3.0f64.sqrt();
    for &sx in &[-1.0, 1.0] {
        for &sy in &[-1.0, 1.0] {
            for &sz in &[-1.0, 1.0] {
                set.push((Vec3::new(sx * c, sy * c, sz * c), b));
            }
        }
    }
    set
}

/// 26-point orientation set (vertices + edge midpoints + cube corners),
/// exact for spherical polynomials of degree ≤ 7. Weights sum to 1.
pub fn orientation_set_26() -> Vec<(Vec3, f64)> {
    let mut set = Vec::with_capacity(26);
    let a1 = 1.0 / 21.0;
    for i in 0..3 {
        let mut v = Vec3::zeros();
        v[i] = 1.0;
        set.push((v, a1));
        set.push((-v, a1));
    }
    let a2 = 4.0 / 105.0;
    let h = 1.0 / 2.0f64.sqrt();
    for i in 0..3 {
        for j in (i + 1)..3 {
            for &si in &[-1.0, 1.0] {
                for &sj in &[-1.0, 1.0] {
                    let mut v = Vec3::zeros();
                    v[i] = si * h;
                    v[j] = sj * h;
                    set.push((v, a2));
                }
            }
        }
    }
    let a3 = 9.0 / 280.0;
    let c = 1.0 / 3.0f64.sqrt();
    for &sx in &[-1.0, 1.0] {
        for &sy in &[-1.0, 1.0] {
            for &sz in &[-1.0, 1.0] {
                set.push((Vec3::new(sx * c, sy * c, sz * c), a3));
            }
        }
    }
    set
}

/// Trapezoid rule on a (possibly nonuniform) ascending grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut acc = crate::util::KahanSum::new();
    for i in 1..xs.len() {
        acc.add(0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_small_orders_match_closed_forms() {
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[1], 1.0 / 3.0f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, _) = gauss_legendre(3);
        assert_relative_eq!(x[2], (3.0f64 / 5.0).sqrt(), epsilon = 1e-15);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [4usize, 9, 16] {
            let (xs, ws) = gauss_legendre(n);
            for k in 0..(2 * n) {
                let num: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                let exact = if k % 2 == 0 {
                    2.0 / (k as f64 + 1.0)
                } else {
                    0.0
                };
                assert!(
                    (num - exact).abs() < 1e-13,
                    "n={n} k={k}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn gauss_legendre_nodes_are_reflection_symmetric() {
        for n in [5usize, 8, 13] {
            let (xs, ws) = gauss_legendre(n);
            for i in 0..n {
                assert_eq!(xs[i], -xs[n - 1 - i]);
                assert_eq!(ws[i], ws[n - 1 - i]);
            }
        }
    }

    #[test]
    fn sphere_rule_integrates_low_moments() {
        let rule = SphereRule::gauss_uniform(6, 12);
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, 4.0 * PI, epsilon = 1e-12);
        // ∮ n_i n_j dΩ = (4π/3) δ_ij
        for i in 0..3 {
            for j in 0..3 {
                let v = rule.integrate(|n| n[i] * n[j]);
                let exact = if i == j { 4.0 * PI / 3.0 } else { 0.0 };
                assert_relative_eq!(v, exact, epsilon = 1e-12);
            }
        }
        // ∮ n_x⁴ dΩ = 4π/5
        let v = rule.integrate(|n| n.x.powi(4));
        assert_relative_eq!(v, 4.0 * PI / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_rule_nodes_are_point_symmetric_for_even_phi_count() {
        let rule = SphereRule::gauss_uniform(5, 8);
        for node in &rule.nodes {
            let neg = -node;
            let found = rule
                .nodes
                .iter()
                .any(|m| (m - neg).norm() < 1e-14);
            assert!(found, "missing mirror of {node:?}");
        }
    }

    #[test]
    fn polar_rule_handles_pole_singularity() {
        // ∮ ds / |ẑ − x| over the unit sphere equals 4π.
        let rule = SphereRule::polar(24, 16);
        let pole = Vec3::z();
        let v = rule.integrate(|x| 1.0 / (pole - x).norm());
        assert_relative_eq!(v, 4.0 * PI, epsilon = 1e-12);
        // Smooth integrands are also handled: ∮ exp(z) ds = 4π sinh(1).
        let v = rule.integrate(|x| x.z.exp());
        assert_relative_eq!(v, 4.0 * PI * 1.0f64.sinh(), epsilon = 1e-12);
    }

    #[test]
    fn cap_rule_reproduces_cap_area() {
        let alpha = 0.7;
        let rule = SphereRule::cap(alpha, 8, 16);
        let area: f64 = rule.weights.iter().sum();
        assert_relative_eq!(area, 2.0 * PI * (1.0 - alpha.cos()), epsilon = 1e-12);
    }

    #[test]
    fn rotation_maps_pole_to_axis() {
        for axis in [
            Vec3::new(0.3, -0.4, 0.86),
            Vec3::new(-1.0, 0.1, 0.05),
            Vec3::z(),
            -Vec3::z(),
        ] {
            let r = rotation_to(&axis);
            let err = (r * Vec3::z() - axis.normalize()).norm();
            assert!(err < 1e-14);
            // Proper rotation: Rᵀ R = I, det = +1.
            assert_relative_eq!((r.transpose() * r - Matrix3::identity()).norm(), 0.0, epsilon = 1e-14);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn orientation_sets_are_exact_to_their_degree() {
        for (set, degree) in [(orientation_set_14(), 5usize), (orientation_set_26(), 7)] {
            let total: f64 = set.iter().map(|(_, w)| w).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-14);
            // Spherical averages of even monomials: ⟨x²⟩ = 1/3, ⟨x⁴⟩ = 1/5,
            // ⟨x²y²⟩ = 1/15, ⟨x⁶⟩ = 1/7 (degree ≤ 7 sets only).
            let avg = |f: &dyn Fn(&Vec3) -> f64| -> f64 {
                set.iter().map(|(v, w)| w * f(v)).sum()
            };
            assert_relative_eq!(avg(&|v| v.x * v.x), 1.0 / 3.0, epsilon = 1e-13);
            assert_relative_eq!(avg(&|v| v.x.powi(4)), 1.0 / 5.0, epsilon = 1e-13);
            assert_relative_eq!(avg(&|v| v.x * v.x * v.y * v.y), 1.0 / 15.0, epsilon = 1e-13);
            assert_relative_eq!(avg(&|v| v.z), 0.0, epsilon = 1e-14);
            if degree >= 7 {
                assert_relative_eq!(avg(&|v| v.x.powi(6)), 1.0 / 7.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let xs = [0.0, 0.5, 1.25, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_relative_eq!(trapezoid(&xs, &ys), 6.0, epsilon = 1e-14);
    }
}
