//! Brute-force certification: dense midpoint Riemann sums cross-checked by
//! seeded Monte Carlo, plus a direct quadrature of the product integral on
//! a coarse lattice. Integration here is written from scratch on purpose:
//! it shares only `eval`/partial evaluation with the rest of the crate, so
//! agreement with the section-based engines is evidence, not tautology.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::copula::CopulaSpec;
use crate::num::Real;

/// Settings for brute-force integration.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Midpoint nodes per axis for the Riemann sum; at least 64.
    pub grid_n: usize,
    /// Monte Carlo sample count.
    pub mc_samples: usize,
    /// Seed for the Monte Carlo stream.
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { grid_n: 2048, mc_samples: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle grid must have at least 64 nodes per axis, got {grid_n}")]
    GridTooCoarse { grid_n: usize },
    #[error("integrand is not finite at ({u}, {v})")]
    NonFiniteNode { u: f64, v: f64 },
}

/// Both brute-force estimates of an integral over the open unit square.
#[derive(Debug, Clone, Copy)]
pub struct OracleIntegral<T> {
    /// Midpoint Riemann sum over grid_n^2 nodes.
    pub riemann: T,
    /// Seeded Monte Carlo mean over mc_samples uniform points.
    pub mc: T,
    /// Standard error of the Monte Carlo mean.
    pub mc_stderr: T,
}

/// Integrate a function over (0,1)^2 two independent ways. The caller
/// compares `riemann` and `mc` (they should agree within a few standard
/// errors) and then uses `riemann` as the certified value.
pub fn oracle_integral<T: Real>(
    f: impl Fn(T, T) -> T,
    cfg: &OracleConfig,
) -> Result<OracleIntegral<T>, OracleError> {
    if cfg.grid_n < 64 {
        return Err(OracleError::GridTooCoarse { grid_n: cfg.grid_n });
    }
    let g = T::of_usize(cfg.grid_n);
    let half = T::real(0.5);
    let mut riemann = T::zero();
    for i in 0..cfg.grid_n {
        let u = (T::of_usize(i) + half) / g;
        let mut row = T::zero();
        for j in 0..cfg.grid_n {
            let v = (T::of_usize(j) + half) / g;
            let value = f(u, v);
            if !value.is_finite() {
                return Err(OracleError::NonFiniteNode { u: u.as_f64(), v: v.as_f64() });
            }
            row += value;
        }
        riemann += row / g;
    }
    riemann /= g;

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    for _ in 0..cfg.mc_samples {
        let u = T::real(rng.random());
        let v = T::real(rng.random());
        let value = f(u, v);
        if !value.is_finite() {
            return Err(OracleError::NonFiniteNode { u: u.as_f64(), v: v.as_f64() });
        }
        sum += value;
        sum_sq += value * value;
    }
    let count = T::of_usize(cfg.mc_samples);
    let mc = sum / count;
    let variance = (sum_sq / count - mc * mc).max(T::zero());
    let mc_stderr = (variance / count).sqrt();
    Ok(OracleIntegral { riemann, mc, mc_stderr })
}

/// Number of output nodes per axis in [`oracle_star`] lattices (33 x 33,
/// i.e. steps of 1/32 including both endpoints).
pub const STAR_LATTICE: usize = 33;

/// Direct quadrature of the product integral
/// (A * B)(u, v) = integral of d2 A(u, t) d1 B(t, v) over t, evaluated on a
/// coarse output lattice. Partials come from centered finite differences of
/// `eval`, so this route is independent of the section engine entirely.
pub fn oracle_star<T: Real>(
    a: &CopulaSpec<T>,
    b: &CopulaSpec<T>,
    cfg: &OracleConfig,
) -> Result<Vec<Vec<T>>, OracleError> {
    if cfg.grid_n < 64 {
        return Err(OracleError::GridTooCoarse { grid_n: cfg.grid_n });
    }
    let g = T::of_usize(cfg.grid_n);
    let side = T::of_usize(STAR_LATTICE - 1);
    let half = T::real(0.5);
    let mut lattice = vec![vec![T::zero(); STAR_LATTICE]; STAR_LATTICE];
    for (i, row) in lattice.iter_mut().enumerate() {
        let u = T::of_usize(i) / side;
        for (j, out) in row.iter_mut().enumerate() {
            let v = T::of_usize(j) / side;
            let mut acc = T::zero();
            for k in 0..cfg.grid_n {
                let t0 = T::of_usize(k) / g;
                let t1 = T::of_usize(k + 1) / g;
                let tm = (T::of_usize(k) + half) / g;
                // d2 A(u, .) integrated exactly over the t-cell times the
                // midpoint value of d1 B(., v).
                let da = a.eval_unchecked(u, t1) - a.eval_unchecked(u, t0);
                let db = fd_d1(b, tm, v, g.recip() * half);
                acc += da * db;
            }
            *out = acc;
        }
    }
    Ok(lattice)
}

/// Centered finite difference of C in its first argument, shrunk at the
/// boundary so both evaluation points stay inside [0, 1].
fn fd_d1<T: Real>(spec: &CopulaSpec<T>, t: T, v: T, step: T) -> T {
    let lo = (t - step).max(T::zero());
    let hi = (t + step).min(T::one());
    (spec.eval_unchecked(hi, v) - spec.eval_unchecked(lo, v)) / (hi - lo)
}
