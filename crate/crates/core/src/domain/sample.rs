//! Random sequential addition of hard spheres with an inhomogeneous
//! intensity n(x), deterministic for a fixed seed.

use super::{DomainGeometry, DomainShape, NumberDensity, SphereConfiguration};
use crate::{Error, Result, Vec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::f64::consts::PI;

/// Draw a configuration with a Poisson-distributed particle count of mean
/// ∫n dV and centers placed sequentially with intensity ∝ n(x), subject to
/// the hard-sphere and wall-clearance constraints.
///
/// Deterministic for fixed (inputs, seed). Fails loudly when the rejection
/// budget is exhausted instead of returning an under-filled configuration.
pub fn sample_configuration(
    density: &NumberDensity,
    domain: &DomainGeometry,
    eps: f64,
    seed: u64,
) -> Result<SphereConfiguration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = density.expected_count(domain)?;
    if mean < 1.0 {
        return Err(Error::Sampling(format!(
            "expected particle count {mean:.3} is below 1"
        )));
    }
    let n = Poisson::new(mean)
        .map_err(|e| Error::Sampling(format!("invalid Poisson mean: {e}")))?
        .sample(&mut rng) as usize;
    place(density, domain, eps, n, &mut rng)
}

/// Fixed-count variant of [`sample_configuration`] for variance-reduction
/// studies: identical placement logic, but exactly `count` spheres.
pub fn sample_configuration_fixed_n(
    density: &NumberDensity,
    domain: &DomainGeometry,
    eps: f64,
    count: usize,
    seed: u64,
) -> Result<SphereConfiguration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    place(density, domain, eps, count, &mut rng)
}

fn place(
    density: &NumberDensity,
    domain: &DomainGeometry,
    eps: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SphereConfiguration> {
    let radius = match *domain.shape() {
        DomainShape::SphericalCavity { radius } => radius,
        _ => {
            return Err(Error::Sampling(
                "configuration sampling needs a bounded (cavity) domain".into(),
            ))
        }
    };
    // Default clearance ε: centers stay a full diameter off the wall.
    let allow = radius - 2.0 * eps;
    if allow <= 0.0 {
        return Err(Error::Sampling("cavity too small for the sphere size".into()));
    }
    let n_bound = density.upper_bound_in_ball(radius);
    if !density.positive_in_ball(radius) {
        return Err(Error::Sampling("number density is not positive on the domain".into()));
    }
    let packing = 4.0 / 3.0 * PI * eps.powi(3) * n_bound;
    if packing >= 0.2 {
        return Err(Error::Sampling(format!(
            "peak volume fraction {packing:.3} is too dense for sequential addition"
        )));
    }

    let mut centers: Vec<Vec3> = Vec::with_capacity(count);
    let budget = 10_000 * (count + 1);
    let mut attempts = 0usize;
    while centers.len() < count {
        if attempts >= budget {
            return Err(Error::Sampling(format!(
                "rejection budget exhausted after {attempts} proposals \
                 ({}/{count} spheres placed)",
                centers.len()
            )));
        }
        attempts += 1;
        let p = uniform_in_ball(allow, rng);
        // Thin by n(x)/n_bound to realize the inhomogeneous intensity.
        if rng.gen::<f64>() * n_bound > density.value(&p) {
            continue;
        }
        if centers.iter().any(|c| (c - p).norm() < 2.0 * eps) {
            continue;
        }
        centers.push(p);
    }

    let cfg = SphereConfiguration::new(centers, eps, domain, None)?;
    debug_assert!(cfg.validate(domain, None).is_ok());
    Ok(cfg)
}

/// Uniform point in the ball of radius `r` (rejection from the cube).
fn uniform_in_ball(r: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let p = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if p.norm_squared() <= 1.0 {
            return p * r;
        }
    }
}
