//! The * product of copulas, Markov-chain composition, invertibility
//! classification, and strip shuffles.
//!
//! (A*B)(u,v) integrates d2 A(u,t) · d1 B(t,v) over t. Both factors are
//! exact step functions of t (see [`crate::sections`]), so each cell mass of
//! the product checkerboard is an exact inner product of two step-function
//! increments; quadrature error enters only through the output resolution.
//! When both operands are checkerboards whose resolutions divide the output
//! resolution, the same integral collapses to a matrix product, kept as a
//! separate fast path and cross-checked by tests.

use crate::checkerboard::CheckerboardCopula;
use crate::copula::{CopulaSpec, GridConfig};
use crate::num::Real;
use crate::sections::{d1_sections, d2_sections, StepFn};

/// Default interior-derivative threshold for invertibility classification.
pub const CLASSIFY_EPS: f64 = 0.05;
/// Default tolerated fraction of interior-derivative samples.
pub const CLASSIFY_DELTA: f64 = 0.02;
/// Default sampling resolution for invertibility classification.
pub const CLASSIFY_RESOLUTION: usize = 256;

/// Which one-sided inverses a copula has under the * product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvertibilityClass {
    /// Transpose is both a left and a right inverse.
    Invertible,
    /// C^T * C = M but C * C^T may differ from M.
    LeftInvertible,
    /// C * C^T = M but C^T * C may differ from M.
    RightInvertible,
    /// Neither one-sided inverse exists.
    Neither,
}

/// Classification outcome with the measured evidence: the fraction of
/// sampled points where each partial derivative is strictly between the
/// thresholds (true one-sided invertibility needs a {0,1}-valued partial
/// almost everywhere, so the fraction should vanish as resolution grows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertibilityReport<T> {
    pub class: InvertibilityClass,
    pub fraction_interior_d1: T,
    pub fraction_interior_d2: T,
}

/// The * product A*B, materialized as a checkerboard.
///
/// Output resolution: the least common multiple of the operand board
/// resolutions when both operands are boards (capped at `cfg.quad_n`),
/// otherwise `cfg.quad_n`. Whenever both operand resolutions divide the
/// output resolution the result is cell-exact for A*B itself; in every case
/// it equals the checkerboard discretization of the true product at the
/// output resolution, up to rounding.
pub fn star<T: Real>(a: &CopulaSpec<T>, b: &CopulaSpec<T>, cfg: &GridConfig<T>) -> CopulaSpec<T> {
    let r = star_resolution(a, b, cfg.quad_n);
    if let (CopulaSpec::Checkerboard(ba), CopulaSpec::Checkerboard(bb)) = (a, b) {
        if r.is_multiple_of(ba.n()) && r.is_multiple_of(bb.n()) {
            return CopulaSpec::Checkerboard(matrix_star(
                &ba.refine(r / ba.n()),
                &bb.refine(r / bb.n()),
            ));
        }
    }
    CopulaSpec::Checkerboard(section_star(a, b, r))
}

/// Left fold of the * product over a chain of copulas, giving the copula
/// linking the first and last states of the Markov chain.
pub fn markov_compose<T: Real>(chain: &[CopulaSpec<T>], cfg: &GridConfig<T>) -> CopulaSpec<T> {
    assert!(!chain.is_empty(), "markov composition needs at least one copula");
    let mut acc = chain[0].clone();
    for next in &chain[1..] {
        acc = star(&acc, next, cfg);
    }
    acc
}

/// Decide left/right invertibility by sampling both partial derivatives on
/// a midpoint lattice of `resolution`^2 points and measuring how often each
/// lands strictly inside (eps, 1-eps).
pub fn classify_invertibility<T: Real>(
    spec: &CopulaSpec<T>,
    resolution: usize,
    eps: T,
    delta: T,
) -> InvertibilityReport<T> {
    assert!(eps > T::zero() && eps < T::real(0.5), "eps must lie in (0, 0.5)");
    assert!(delta > T::zero() && delta < T::one(), "delta must lie in (0, 1)");
    assert!(resolution >= 2, "classification needs at least a 2x2 lattice");
    let rn = T::of_usize(resolution);
    let half = T::real(0.5);
    let mut interior1 = 0usize;
    let mut interior2 = 0usize;
    for i in 0..resolution {
        let u = (T::of_usize(i) + half) / rn;
        for j in 0..resolution {
            let v = (T::of_usize(j) + half) / rn;
            let d1 = spec.point_d1(u, v);
            if d1 > eps && d1 < T::one() - eps {
                interior1 += 1;
            }
            let d2 = spec.point_d2(u, v);
            if d2 > eps && d2 < T::one() - eps {
                interior2 += 1;
            }
        }
    }
    let total = T::of_usize(resolution * resolution);
    let fraction_interior_d1 = T::of_usize(interior1) / total;
    let fraction_interior_d2 = T::of_usize(interior2) / total;
    let left = fraction_interior_d1 < delta;
    let right = fraction_interior_d2 < delta;
    let class = match (left, right) {
        (true, true) => InvertibilityClass::Invertible,
        (true, false) => InvertibilityClass::LeftInvertible,
        (false, true) => InvertibilityClass::RightInvertible,
        (false, false) => InvertibilityClass::Neither,
    };
    InvertibilityReport { class, fraction_interior_d1, fraction_interior_d2 }
}

/// Discretize to resolution n and permute the u-strips: row i of the result
/// is row perm[i] of the input. Equivalent to composing on the left with a
/// straight-shuffle copula, so every dependence measure of Y on X is
/// unchanged.
pub fn shuffle_left<T: Real>(
    spec: &CopulaSpec<T>,
    perm: &[usize],
    n: usize,
) -> CopulaSpec<T> {
    assert!(is_permutation(perm, n), "perm must be a permutation of 0..n");
    let board = spec.to_checkerboard(n);
    let mut mass = vec![T::zero(); n * n];
    for (i, &src) in perm.iter().enumerate() {
        mass[i * n..(i + 1) * n].copy_from_slice(&board.mass()[src * n..(src + 1) * n]);
    }
    CopulaSpec::Checkerboard(CheckerboardCopula::from_raw(n, mass))
}

fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

fn board_n<T: Real>(spec: &CopulaSpec<T>) -> Option<usize> {
    match spec {
        CopulaSpec::Checkerboard(b) => Some(b.n()),
        _ => None,
    }
}

fn star_resolution<T: Real>(a: &CopulaSpec<T>, b: &CopulaSpec<T>, quad_n: usize) -> usize {
    match (board_n(a), board_n(b)) {
        (Some(na), Some(nb)) => lcm(na, nb).min(quad_n),
        _ => quad_n,
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Exact product of two equal-resolution boards: cell (i,j) of A*B holds
/// n · (P_A P_B)[i][j].
fn matrix_star<T: Real>(
    a: &CheckerboardCopula<T>,
    b: &CheckerboardCopula<T>,
) -> CheckerboardCopula<T> {
    let n = a.n();
    debug_assert_eq!(n, b.n());
    let nn = T::of_usize(n);
    let mut mass = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a.cell(i, k) * nn;
            if aik == T::zero() {
                continue;
            }
            let row_b = &b.mass()[k * n..(k + 1) * n];
            let row_out = &mut mass[i * n..(i + 1) * n];
            for (out, &bkj) in row_out.iter_mut().zip(row_b) {
                *out += aik * bkj;
            }
        }
    }
    CheckerboardCopula::from_raw(n, mass)
}

/// General product path: cell (i,j) of A*B is the exact integral over t of
/// [d2 A(u_{i+1}, t) - d2 A(u_i, t)] · [d1 B(t, v_{j+1}) - d1 B(t, v_j)],
/// evaluated with step-function inner products.
fn section_star<T: Real>(
    a: &CopulaSpec<T>,
    b: &CopulaSpec<T>,
    r: usize,
) -> CheckerboardCopula<T> {
    let rn = T::of_usize(r);
    let grid: Vec<T> = (0..=r).map(|k| T::of_usize(k) / rn).collect();
    let a_deltas: Vec<StepFn<T>> = {
        let mut prev = d2_sections(a, grid[0]);
        grid[1..]
            .iter()
            .map(|&u| {
                let cur = d2_sections(a, u);
                let delta = cur.sub(&prev);
                prev = cur;
                delta
            })
            .collect()
    };
    let b_deltas: Vec<StepFn<T>> = {
        let mut prev = d1_sections(b, grid[0]);
        grid[1..]
            .iter()
            .map(|&v| {
                let cur = d1_sections(b, v);
                let delta = cur.sub(&prev);
                prev = cur;
                delta
            })
            .collect()
    };
    let mut mass = vec![T::zero(); r * r];
    for (i, da) in a_deltas.iter().enumerate() {
        for (j, db) in b_deltas.iter().enumerate() {
            mass[i * r + j] = da.dot(db);
        }
    }
    // The true product has exactly uniform margins. Assembly rounding is
    // tiny per row but signed, so prefix sums across many rows can drift
    // past validation tolerances; rebalancing caps the drift at the prefix
    // level because it is at most r times the worst row/column residual.
    // Scale factors stay within rounding of 1, so exact products
    // (equal-resolution operands) are preserved to working precision. A
    // stall just keeps the best-effort masses.
    let tol = T::EXACT_TOL / T::of_usize(r);
    let _ = crate::checkerboard::sinkhorn(&mut mass, r, tol, 64);
    CheckerboardCopula::from_raw(r, mass)
}
