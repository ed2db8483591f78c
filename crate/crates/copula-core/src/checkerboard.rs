//! Checkerboard copulas: n x n cell-mass matrices with uniform margins.
//!
//! The checkerboard copula is the copula with piecewise-uniform density
//! determined by the mass matrix; evaluating it between lattice points by
//! bilinear interpolation of cumulative masses IS that copula, not an
//! approximation of it. Cell (i, j) holds the mass of
//! [i/n, (i+1)/n] x [j/n, (j+1)/n], with i indexing u and j indexing v.

use crate::num::Real;
use thiserror::Error;

/// Errors from constructing, rescaling, or parsing a checkerboard.
#[derive(Debug, Error)]
pub enum BoardError {
    #[error("checkerboard resolution must be at least 1")]
    EmptyBoard,
    #[error("expected {expected} cells for n={n}, got {got}")]
    CellCount { n: usize, expected: usize, got: usize },
    #[error("cell ({i},{j}) is negative: {value}")]
    NegativeCell { i: usize, j: usize, value: f64 },
    #[error("cell ({i},{j}) is not finite")]
    NonFiniteCell { i: usize, j: usize },
    #[error("row {i} sums to {sum}, expected {expected} (deviation {dev})")]
    RowMargin { i: usize, sum: f64, expected: f64, dev: f64 },
    #[error("column {j} sums to {sum}, expected {expected} (deviation {dev})")]
    ColMargin { j: usize, sum: f64, expected: f64, dev: f64 },
    #[error("total mass is {total}, expected 1 (deviation {dev})")]
    TotalMass { total: f64, dev: f64 },
    #[error("sinkhorn rescaling stalled at margin residual {residual} after {sweeps} sweeps (tolerance {tol})")]
    SinkhornStall { residual: f64, sweeps: usize, tol: f64 },
    #[error("sinkhorn rescaling hit an empty row or column that the mass floor could not fix")]
    SinkhornDegenerate,
    #[error("bad header line {line:?}: expected `checkerboard <n>`")]
    BadHeader { line: String },
    #[error("line {line}: cannot parse cell value {token:?}")]
    BadCell { line: usize, token: String },
    #[error("line {line}: expected {expected} values, got {got}")]
    BadRowLength { line: usize, expected: usize, got: usize },
    #[error("expected {expected} rows, got {got}")]
    BadRowCount { expected: usize, got: usize },
    #[error("margins deviate from 1/n by {dev}, beyond the file gate {gate}; re-run with normalization to rescale")]
    MarginGate { dev: f64, gate: f64 },
}

/// An n x n nonnegative cell-mass matrix with uniform margins.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckerboardCopula<T> {
    n: usize,
    mass: Vec<T>,
    /// Cumulative distribution on the (n+1) x (n+1) lattice, row-major.
    cdf: Vec<T>,
}

impl<T: Real> CheckerboardCopula<T> {
    /// Validating constructor: checks shape, nonnegativity, and that every
    /// row/column sums to 1/n (and the total to 1) within `T::MARGIN_TOL`.
    pub fn new(n: usize, mass: Vec<T>) -> Result<Self, BoardError> {
        if n == 0 {
            return Err(BoardError::EmptyBoard);
        }
        if mass.len() != n * n {
            return Err(BoardError::CellCount { n, expected: n * n, got: mass.len() });
        }
        for i in 0..n {
            for j in 0..n {
                let v = mass[i * n + j];
                if !v.is_finite() {
                    return Err(BoardError::NonFiniteCell { i, j });
                }
                if v < T::zero() {
                    return Err(BoardError::NegativeCell { i, j, value: v.as_f64() });
                }
            }
        }
        let target = T::one() / T::of_usize(n);
        let mut total = T::zero();
        for i in 0..n {
            let sum: T = mass[i * n..(i + 1) * n].iter().copied().sum();
            total += sum;
            let dev = (sum - target).abs();
            if dev > T::MARGIN_TOL {
                return Err(BoardError::RowMargin {
                    i,
                    sum: sum.as_f64(),
                    expected: target.as_f64(),
                    dev: dev.as_f64(),
                });
            }
        }
        for j in 0..n {
            let sum: T = (0..n).map(|i| mass[i * n + j]).sum();
            let dev = (sum - target).abs();
            if dev > T::MARGIN_TOL {
                return Err(BoardError::ColMargin {
                    j,
                    sum: sum.as_f64(),
                    expected: target.as_f64(),
                    dev: dev.as_f64(),
                });
            }
        }
        let total_dev = (total - T::one()).abs();
        if total_dev > T::MARGIN_TOL {
            return Err(BoardError::TotalMass { total: total.as_f64(), dev: total_dev.as_f64() });
        }
        Ok(Self::from_raw(n, mass))
    }

    /// Constructor for masses that are valid by construction (discretization,
    /// matrix * products, Sinkhorn output). Clamps away negative rounding
    /// dust; margin deviations are the caller's responsibility.
    pub(crate) fn from_raw(n: usize, mut mass: Vec<T>) -> Self {
        debug_assert!(n >= 1 && mass.len() == n * n);
        for v in &mut mass {
            if *v < T::zero() {
                debug_assert!(*v > -T::EXACT_TOL, "negative cell beyond rounding dust: {v}");
                *v = T::zero();
            }
        }
        let cdf = build_cdf(n, &mass);
        Self { n, mass, cdf }
    }

    /// Build a board without any invariant checks so candidate matrices
    /// (possibly with negative cells or broken margins) can be fed to
    /// validation. The result may not be a copula.
    pub fn from_mass_unchecked(n: usize, mass: Vec<T>) -> Self {
        assert!(n >= 1 && mass.len() == n * n, "mass matrix must be n x n");
        let cdf = build_cdf(n, &mass);
        Self { n, mass, cdf }
    }

    /// The uniform board: the checkerboard of the independence copula.
    pub fn uniform(n: usize) -> Self {
        let cell = T::one() / T::of_usize(n * n);
        Self::from_raw(n, vec![cell; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn cell(&self, i: usize, j: usize) -> T {
        self.mass[i * self.n + j]
    }

    /// CDF value at lattice point (i/n, j/n).
    pub fn cdf_at(&self, i: usize, j: usize) -> T {
        self.cdf[i * (self.n + 1) + j]
    }

    /// Copula value at (u, v) by bilinear interpolation of the cumulative
    /// lattice; exact for the checkerboard copula itself.
    pub fn eval(&self, u: T, v: T) -> T {
        let n = self.n;
        let (i, fu) = locate(u, n);
        let (j, fv) = locate(v, n);
        let c00 = self.cdf_at(i, j);
        let c10 = self.cdf_at(i + 1, j);
        let c01 = self.cdf_at(i, j + 1);
        let one = T::one();
        c00 * (one - fu) * (one - fv)
            + c10 * fu * (one - fv)
            + c01 * (one - fu) * fv
            + self.cdf_at(i + 1, j + 1) * fu * fv
    }

    /// d1 C at u inside strip `i`: n times the cumulative mass of row i up
    /// to v. Piecewise constant in u, piecewise linear in v.
    pub fn d1_strip_value(&self, i: usize, v: T) -> T {
        let (j, fv) = locate(v, self.n);
        let below = self.cdf_at(i + 1, j) - self.cdf_at(i, j);
        T::of_usize(self.n) * (below + fv * self.cell(i, j))
    }

    /// d2 C at v inside strip `j`: n times the cumulative mass of column j
    /// up to u.
    pub fn d2_strip_value(&self, j: usize, u: T) -> T {
        let (i, fu) = locate(u, self.n);
        let left = self.cdf_at(i, j + 1) - self.cdf_at(i, j);
        T::of_usize(self.n) * (left + fu * self.cell(i, j))
    }

    /// Transposed board: mass matrix transposed.
    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self.cell(i, j);
            }
        }
        Self::from_raw(n, out)
    }

    /// Board of u - C(u, 1-v): columns reversed.
    pub fn flip_y(&self) -> Self {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + (n - 1 - j)] = self.cell(i, j);
            }
        }
        Self::from_raw(n, out)
    }

    /// Board of v - C(1-u, v): rows reversed.
    pub fn flip_x(&self) -> Self {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[(n - 1 - i) * n + j] = self.cell(i, j);
            }
        }
        Self::from_raw(n, out)
    }

    /// Exact refinement to resolution n * factor: each cell splits into
    /// factor^2 equal-mass subcells (same copula).
    pub fn refine(&self, factor: usize) -> Self {
        assert!(factor >= 1, "refinement factor must be at least 1");
        if factor == 1 {
            return self.clone();
        }
        let n = self.n;
        let m = n * factor;
        let scale = T::one() / T::of_usize(factor * factor);
        let mut out = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let sub = self.cell(i, j) * scale;
                for a in 0..factor {
                    for b in 0..factor {
                        out[(i * factor + a) * m + (j * factor + b)] = sub;
                    }
                }
            }
        }
        Self::from_raw(m, out)
    }

    /// Largest deviation of any row/column sum from 1/n.
    pub fn margin_residual(&self) -> T {
        margin_residual(self.n, &self.mass)
    }

    /// Parse the text format:
    ///
    /// ```text
    /// checkerboard <n>
    /// <n rows of n whitespace-separated reals>
    /// ```
    ///
    /// Margins within `MARGIN_TOL` are accepted as-is (serialization noise);
    /// anything beyond is rejected unless `normalize` is set, in which case
    /// any nonnegative matrix with total support (no empty row or column)
    /// is Sinkhorn-rescaled. Strictness by default keeps quietly broken
    /// inputs from turning into quietly wrong numbers.
    pub fn parse(text: &str, normalize: bool) -> Result<Self, BoardError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| BoardError::BadHeader { line: String::new() })?;
        let mut parts = header.split_whitespace();
        let tag = parts.next().unwrap_or("");
        let n: usize = match (tag, parts.next(), parts.next()) {
            ("checkerboard", Some(num), None) => num
                .parse()
                .map_err(|_| BoardError::BadHeader { line: header.to_string() })?,
            _ => return Err(BoardError::BadHeader { line: header.to_string() }),
        };
        if n == 0 {
            return Err(BoardError::EmptyBoard);
        }
        let mut mass = Vec::with_capacity(n * n);
        let mut rows = 0usize;
        for (lineno, line) in lines {
            if rows == n {
                return Err(BoardError::BadRowCount { expected: n, got: rows + 1 });
            }
            let mut count = 0usize;
            for token in line.split_whitespace() {
                let value: f64 = token
                    .parse()
                    .map_err(|_| BoardError::BadCell { line: lineno + 1, token: token.to_string() })?;
                mass.push(T::real(value));
                count += 1;
            }
            if count != n {
                return Err(BoardError::BadRowLength { line: lineno + 1, expected: n, got: count });
            }
            rows += 1;
        }
        if rows != n {
            return Err(BoardError::BadRowCount { expected: n, got: rows });
        }
        for i in 0..n {
            for j in 0..n {
                let v = mass[i * n + j];
                if !v.is_finite() {
                    return Err(BoardError::NonFiniteCell { i, j });
                }
                if v < T::zero() {
                    return Err(BoardError::NegativeCell { i, j, value: v.as_f64() });
                }
            }
        }
        let residual = margin_residual(n, &mass);
        if residual <= T::MARGIN_TOL {
            return Self::new(n, mass);
        }
        if !normalize {
            return Err(BoardError::MarginGate {
                dev: residual.as_f64(),
                gate: T::MARGIN_TOL.as_f64(),
            });
        }
        sinkhorn(&mut mass, n, T::SINKHORN_TOL, SINKHORN_MAX_SWEEPS)?;
        Ok(Self::from_raw(n, mass))
    }

    /// Serialize to the text format (full-precision shortest decimals).
    pub fn to_text(&self) -> String {
        let mut out = format!("checkerboard {}\n", self.n);
        for i in 0..self.n {
            let row: Vec<String> =
                (0..self.n).map(|j| format!("{}", self.cell(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn build_cdf<T: Real>(n: usize, mass: &[T]) -> Vec<T> {
    let w = n + 1;
    let mut cdf = vec![T::zero(); w * w];
    for i in 0..n {
        let mut row_acc = T::zero();
        for j in 0..n {
            row_acc += mass[i * n + j];
            cdf[(i + 1) * w + (j + 1)] = cdf[i * w + (j + 1)] + row_acc;
        }
    }
    cdf
}

/// Locate `t` in [0,1]: strip index (clamped to n-1 so t=1 lands in the last
/// strip with fraction 1) and the fraction inside the strip.
fn locate<T: Real>(t: T, n: usize) -> (usize, T) {
    let scaled = t * T::of_usize(n);
    let mut idx = scaled.floor().to_usize().unwrap_or(0);
    if idx >= n {
        idx = n - 1;
    }
    (idx, scaled - T::of_usize(idx))
}

pub(crate) fn margin_residual<T: Real>(n: usize, mass: &[T]) -> T {
    let target = T::one() / T::of_usize(n);
    let mut worst = T::zero();
    for i in 0..n {
        let sum: T = mass[i * n..(i + 1) * n].iter().copied().sum();
        worst = worst.max((sum - target).abs());
    }
    for j in 0..n {
        let sum: T = (0..n).map(|i| mass[i * n + j]).sum();
        worst = worst.max((sum - target).abs());
    }
    worst
}

/// Hard cap on Sinkhorn sweeps. Near-deterministic supports (e.g. binned
/// samples of a functional relationship) converge geometrically but slowly,
/// needing ~12k sweeps at n=64 to reach 1e-10; a sweep is O(n^2), so the cap
/// is cheap insurance rather than a hot loop.
pub const SINKHORN_MAX_SWEEPS: usize = 20_000;

/// Alternating row/column rescaling toward uniform margins (all sums 1/n).
/// Returns the number of sweeps used. Rows or columns with zero mass make
/// the target unreachable; callers should apply a mass floor first (see
/// `estimation::empirical_checkerboard`).
pub fn sinkhorn<T: Real>(
    mass: &mut [T],
    n: usize,
    tol: T,
    max_sweeps: usize,
) -> Result<usize, BoardError> {
    let target = T::one() / T::of_usize(n);
    for sweep in 1..=max_sweeps {
        for i in 0..n {
            let sum: T = mass[i * n..(i + 1) * n].iter().copied().sum();
            if sum <= T::zero() {
                return Err(BoardError::SinkhornDegenerate);
            }
            let scale = target / sum;
            for v in &mut mass[i * n..(i + 1) * n] {
                *v *= scale;
            }
        }
        for j in 0..n {
            let sum: T = (0..n).map(|i| mass[i * n + j]).sum();
            if sum <= T::zero() {
                return Err(BoardError::SinkhornDegenerate);
            }
            let scale = target / sum;
            for i in 0..n {
                mass[i * n + j] *= scale;
            }
        }
        if margin_residual(n, mass) < tol {
            return Ok(sweep);
        }
    }
    Err(BoardError::SinkhornStall {
        residual: margin_residual(n, mass).as_f64(),
        sweeps: max_sweeps,
        tol: tol.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(n: usize) -> CheckerboardCopula<f64> {
        let mut mass = vec![0.0; n * n];
        for i in 0..n {
            mass[i * n + i] = 1.0 / n as f64;
        }
        CheckerboardCopula::new(n, mass).unwrap()
    }

    #[test]
    fn uniform_board_is_independence() {
        let b = CheckerboardCopula::<f64>::uniform(4);
        assert!((b.eval(0.3, 0.7) - 0.21).abs() < 1e-15);
        assert!((b.eval(1.0, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(b.eval(0.0, 0.9), 0.0);
    }

    #[test]
    fn n_one_board_is_independence() {
        let b = CheckerboardCopula::<f64>::new(1, vec![1.0]).unwrap();
        assert!((b.eval(0.25, 0.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn diagonal_board_matches_min_on_lattice() {
        let b = diag(4);
        for i in 0..=4 {
            for j in 0..=4 {
                let (u, v) = (i as f64 / 4.0, j as f64 / 4.0);
                assert!((b.eval(u, v) - u.min(v)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_margins_and_negative_cells() {
        let err = CheckerboardCopula::<f64>::new(2, vec![0.4, 0.2, 0.1, 0.3]).unwrap_err();
        assert!(matches!(err, BoardError::RowMargin { .. }));
        let err =
            CheckerboardCopula::<f64>::new(2, vec![0.3, -0.05, -0.05, 0.3]).unwrap_err();
        assert!(matches!(err, BoardError::NegativeCell { .. }));
    }

    #[test]
    fn strip_values_interpolate_row_mass() {
        let b = diag(2);
        // Row 0 holds mass 0.5 in the first column; d1 ramps 0 -> 1 across v in [0, 0.5].
        assert!((b.d1_strip_value(0, 0.25) - 0.5).abs() < 1e-15);
        assert!((b.d1_strip_value(0, 0.5) - 1.0).abs() < 1e-15);
        assert!((b.d1_strip_value(0, 1.0) - 1.0).abs() < 1e-15);
        assert!((b.d2_strip_value(1, 0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transpose_and_flips_permute_cells() {
        let b = CheckerboardCopula::new(2, vec![0.15, 0.35, 0.35, 0.15]).unwrap();
        assert_eq!(b.transpose().cell(0, 1), 0.35);
        let f = b.flip_y();
        assert_eq!(f.cell(0, 0), 0.35);
        assert_eq!(f.cell(0, 1), 0.15);
        let g = b.flip_x();
        assert_eq!(g.cell(0, 0), 0.35);
        assert_eq!(g.cell(1, 0), 0.15);
    }

    #[test]
    fn refine_preserves_the_copula() {
        let b = diag(2);
        let r = b.refine(3);
        assert_eq!(r.n(), 6);
        for i in 0..=6 {
            for j in 0..=6 {
                let (u, v) = (i as f64 / 6.0, j as f64 / 6.0);
                assert!((r.eval(u, v) - b.eval(u, v)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn aggregate_of_refinement_recovers_cells() {
        let b = CheckerboardCopula::new(2, vec![0.15, 0.35, 0.35, 0.15]).unwrap();
        let r = b.refine(2);
        for i in 0..2 {
            for j in 0..2 {
                let sum: f64 = (0..2)
                    .flat_map(|a| (0..2).map(move |b2| (a, b2)))
                    .map(|(a, b2)| r.cell(2 * i + a, 2 * j + b2))
                    .sum();
                assert!((sum - b.cell(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sinkhorn_restores_margins() {
        let mut mass = vec![0.4, 0.1, 0.2, 0.3];
        sinkhorn(&mut mass, 2, 1e-12, 1000).unwrap();
        assert!(margin_residual(2, &mass) < 1e-12);
    }

    #[test]
    fn sinkhorn_reports_degenerate_support() {
        let mut mass = vec![0.5, 0.5, 0.0, 0.0];
        assert!(matches!(
            sinkhorn(&mut mass, 2, 1e-10, 100),
            Err(BoardError::SinkhornDegenerate)
        ));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let b = CheckerboardCopula::new(2, vec![0.15, 0.35, 0.35, 0.15]).unwrap();
        let text = b.to_text();
        let back = CheckerboardCopula::<f64>::parse(&text, false).unwrap();
        assert_eq!(back.mass(), b.mass());
    }

    #[test]
    fn parse_rejects_margin_noise_without_normalize() {
        let text = "checkerboard 2\n0.2500001 0.25\n0.25 0.2499999\n";
        assert!(matches!(
            CheckerboardCopula::<f64>::parse(text, false),
            Err(BoardError::MarginGate { .. })
        ));
        let b = CheckerboardCopula::<f64>::parse(text, true).unwrap();
        assert!(b.margin_residual() < 1e-10);
    }

    #[test]
    fn parse_normalize_rescales_raw_weights() {
        let text = "checkerboard 2\n0.4 0.25\n0.25 0.1\n";
        assert!(matches!(
            CheckerboardCopula::<f64>::parse(text, false),
            Err(BoardError::MarginGate { .. })
        ));
        let b = CheckerboardCopula::<f64>::parse(text, true).unwrap();
        assert!(b.margin_residual() < 1e-10);
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(matches!(
            CheckerboardCopula::<f64>::parse("chessboard 2\n1 2\n3 4\n", false),
            Err(BoardError::BadHeader { .. })
        ));
        assert!(matches!(
            CheckerboardCopula::<f64>::parse("checkerboard 2\n0.25 x\n0.25 0.25\n", false),
            Err(BoardError::BadCell { .. })
        ));
        assert!(matches!(
            CheckerboardCopula::<f64>::parse("checkerboard 2\n0.25 0.25 0.25\n0.25\n", false),
            Err(BoardError::BadRowLength { .. })
        ));
        assert!(matches!(
            CheckerboardCopula::<f64>::parse("checkerboard 2\n0.25 0.25\n", false),
            Err(BoardError::BadRowCount { .. })
        ));
    }

    #[test]
    fn f32_boards_work_with_loosened_margins() {
        let b = CheckerboardCopula::<f32>::uniform(8);
        assert!(b.margin_residual() < f32::MARGIN_TOL);
        assert!((b.eval(0.5, 0.5) - 0.25).abs() < 1e-6);
    }
}
