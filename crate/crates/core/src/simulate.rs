//! Seeded generators for the stochastic models, used by tests, the
//! acceptance suite and the synthetic fixture bundle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::load::{sarma_generate, sarmax_generate, SarmaParams, SarmaxParams};
use crate::postproc::{MvArxParams, UvArxParams};

/// Deterministic random source for a given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` independent draws from N(0, sd^2).
pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    let d = Normal::new(0.0, sd.max(0.0)).expect("finite standard deviation");
    (0..n).map(|_| d.sample(rng)).collect()
}

/// SARMA path of `n` hours with N(0, sigma2) innovations after a burn-in of
/// `burn` discarded hours.
pub fn sarma_path(params: &SarmaParams, n: usize, burn: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let psi = gaussian(&mut r, n + burn, params.sigma2.sqrt());
    sarma_generate(params, &psi).split_off(burn)
}

/// SARMAX path of `n` hours started at the unconditional mean, after a
/// burn-in of `burn` discarded hours.
pub fn sarmax_path(params: &SarmaxParams, n: usize, burn: usize, seed: u64) -> Vec<f64> {
    let p = &params.sarma;
    let denom = (1.0 - p.phi1) * (1.0 - p.phi24) - params.phi168;
    let level = if denom.abs() > 1e-9 {
        p.phi0 / denom
    } else {
        0.0
    };
    let mut r = rng(seed);
    let psi = gaussian(&mut r, n + burn, p.sigma2.sqrt());
    let y = sarmax_generate(params, &vec![level; 168], &psi);
    y[168 + burn..].to_vec()
}

/// Exogenous inputs of the price-error models for one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDay {
    pub holiday: bool,
    pub wind: [f64; 24],
}

/// Hourly price-error path of the univariate ARX over `days.len()` days.
/// The first week is pure noise and serves as lag history.
pub fn uv_arx_path(params: &UvArxParams, days: &[ErrorDay], seed: u64) -> Vec<[f64; 24]> {
    let mut r = rng(seed);
    let psi = gaussian(&mut r, days.len() * 24, params.sigma2.sqrt());
    let mut e: Vec<f64> = psi[..168.min(psi.len())].to_vec();
    let (p, w) = (&params.phi, &params.omega);
    for t in e.len()..psi.len() {
        let (d, h) = (t / 24, t % 24);
        let prev = &e[(d - 1) * 24..d * 24];
        let lo = prev.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hol = if days[d].holiday { 1.0 } else { 0.0 };
        let v = p[0]
            + p[1] * e[t - 1]
            + p[2] * e[t - 2]
            + p[3] * e[t - 24]
            + p[4] * e[t - 168]
            + p[5] * psi[t - 1]
            + w[0] * lo
            + w[1] * hi
            + w[2] * hol
            + w[3] * days[d].wind[h]
            + psi[t];
        e.push(v);
    }
    e.chunks(24)
        .map(|c| std::array::from_fn(|h| c[h]))
        .collect()
}

/// Price-error path of the multivariate ARX, one equation per hour of day.
/// The first week is pure noise.
pub fn mv_arx_path(params: &MvArxParams, days: &[ErrorDay], seed: u64) -> Vec<[f64; 24]> {
    let mut r = rng(seed);
    let mut out: Vec<[f64; 24]> = Vec::with_capacity(days.len());
    for (d, day) in days.iter().enumerate() {
        let noise: Vec<f64> = params
            .hours
            .iter()
            .flat_map(|p| gaussian(&mut r, 1, p.sigma2.sqrt()))
            .collect();
        if d < 7 {
            out.push(std::array::from_fn(|h| noise[h]));
            continue;
        }
        let prev = out[d - 1];
        let lo = prev.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hol = if day.holiday { 1.0 } else { 0.0 };
        let row = std::array::from_fn(|h| {
            let p = &params.hours[h];
            p.phi[0]
                + p.phi[1] * prev[h]
                + p.phi[2] * out[d - 7][h]
                + p.omega[0] * lo
                + p.omega[1] * hi
                + p.omega[2] * hol
                + p.omega[3] * day.wind[h]
                + noise[h]
        });
        out.push(row);
    }
    out
}
