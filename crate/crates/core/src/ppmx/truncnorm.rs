//! Lower-truncated normal sampling for censored log event times.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::function::erf::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal upper tail 1 − Φ(z) without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Draws from N(mu, sigma²) conditioned on exceeding `lower`.
///
/// Plain rejection while the acceptance region is wide, exponential proposals
/// (Robert, 1995) deep in the tail.
pub fn sample_lower_truncated<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64, lower: f64) -> f64 {
    let alpha = (lower - mu) / sigma;
    let z = if alpha < 0.45 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > alpha {
                break z;
            }
        }
    } else {
        let lambda = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
        let exp = Exp::new(lambda).expect("positive rate");
        loop {
            let z = alpha + exp.sample(rng);
            let u: f64 = rng.random();
            if u <= (-0.5 * (z - lambda) * (z - lambda)).exp() {
                break z;
            }
        }
    };
    let x = mu + sigma * z;
    if x > lower {
        x
    } else {
        lower.next_up()
    }
}

/// E[X | X > lower] for X ~ N(mu, sigma²).
pub fn lower_truncated_mean(mu: f64, sigma: f64, lower: f64) -> f64 {
    let alpha = (lower - mu) / sigma;
    mu + sigma * normal_pdf(alpha) / normal_sf(alpha)
}
