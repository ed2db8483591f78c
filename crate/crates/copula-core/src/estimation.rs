//! Empirical estimation: rank-based pseudo-observations, the checkerboard
//! estimator with margin restoration, and synthetic sampling from any
//! copula spec by conditional inversion. Together these support round-trip
//! validation: sample from a known copula, re-estimate, compare measures.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::checkerboard::{sinkhorn, BoardError, CheckerboardCopula, SINKHORN_MAX_SWEEPS};
use crate::copula::{CopulaSpec, GridConfig};
use crate::measures::{measure, MeasureError, MeasureReport, MeasureSpec};
use crate::num::Real;

/// Identity of the sampling generator, recorded in reports so seeded runs
/// are reproducible across versions of this crate.
pub const RNG_ID: &str = "chacha12";

/// Errors from sample handling and estimation.
#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("need at least 2 sample pairs, got {m}")]
    TooFewSamples { m: usize },
    #[error("sample pair {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("column {column} is constant; ranks are undefined for degenerate margins")]
    ConstantColumn { column: char },
    #[error("checkerboard resolution {n} exceeds the sample count {m}")]
    GridTooFine { n: usize, m: usize },
    #[error("checkerboard resolution must be at least 1")]
    GridZero,
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("csv read failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row} has {fields} fields, expected 2")]
    BadCsvRow { row: usize, fields: usize },
    #[error("csv row {row} field {text:?} is not a number")]
    BadCsvField { row: usize, text: String },
    #[error("csv write failed: {0}")]
    CsvWrite(std::io::Error),
}

/// Paired observations (x, y); at least two pairs, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    pairs: Vec<(T, T)>,
}

impl<T: Real> SampleSet<T> {
    pub fn from_pairs(pairs: Vec<(T, T)>) -> Result<Self, EstimationError> {
        if pairs.len() < 2 {
            return Err(EstimationError::TooFewSamples { m: pairs.len() });
        }
        for (index, (x, y)) in pairs.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(EstimationError::NonFiniteSample { index });
            }
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(T, T)] {
        &self.pairs
    }
}

/// Average ranks (1-based) of a column; tied values share the mean of the
/// positions they occupy.
fn average_ranks<T: Real>(values: &[T]) -> Vec<T> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    // Finiteness is a SampleSet invariant, so the comparison is total.
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![T::zero(); m];
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = T::real((i + j) as f64 / 2.0 + 1.0);
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Rank transform to the open unit square: u_i = rank(x_i)/(m+1), v_i
/// likewise, with average ranks on ties. A fully tied column collapses to
/// 0.5 everywhere; estimation entry points reject that case, the transform
/// itself stays total.
pub fn pseudo_observations<T: Real>(s: &SampleSet<T>) -> Vec<(T, T)> {
    let xs: Vec<T> = s.pairs().iter().map(|&(x, _)| x).collect();
    let ys: Vec<T> = s.pairs().iter().map(|&(_, y)| y).collect();
    let scale = T::of_usize(s.len() + 1).recip();
    let ru = average_ranks(&xs);
    let rv = average_ranks(&ys);
    ru.into_iter().zip(rv).map(|(a, b)| (a * scale, b * scale)).collect()
}

/// Dependence is undefined when a margin is degenerate; reject constant
/// columns before estimating anything from ranks.
fn reject_constant_columns<T: Real>(s: &SampleSet<T>) -> Result<(), EstimationError> {
    let (x0, y0) = s.pairs()[0];
    if s.pairs().iter().all(|&(x, _)| x == x0) {
        return Err(EstimationError::ConstantColumn { column: 'x' });
    }
    if s.pairs().iter().all(|&(_, y)| y == y0) {
        return Err(EstimationError::ConstantColumn { column: 'y' });
    }
    Ok(())
}

fn bin_of<T: Real>(t: T, n: usize) -> usize {
    let idx = (t * T::of_usize(n)).floor().as_f64() as usize;
    idx.min(n - 1)
}

/// Checkerboard estimator: bin pseudo-observations into an n-by-n grid with
/// mass 1/m per point, then restore exactly uniform margins by alternating
/// row/column rescaling.
///
/// A floor of 1/(m n^2) is added to every cell when a row or column is
/// empty, and also when the rescaling stalls: sparse supports (data
/// concentrated on thin curves) can lack the structure alternating
/// rescaling needs to converge geometrically, while a strictly positive
/// matrix always has it. The floor perturbs cell masses by at most 1/m,
/// below estimator noise.
pub fn empirical_checkerboard<T: Real>(
    s: &SampleSet<T>,
    n: usize,
) -> Result<CheckerboardCopula<T>, EstimationError> {
    if n == 0 {
        return Err(EstimationError::GridZero);
    }
    if n > s.len() {
        return Err(EstimationError::GridTooFine { n, m: s.len() });
    }
    reject_constant_columns(s)?;
    let mut binned = vec![T::zero(); n * n];
    let w = T::of_usize(s.len()).recip();
    for (u, v) in pseudo_observations(s) {
        binned[bin_of(u, n) * n + bin_of(v, n)] += w;
    }
    let row_empty = (0..n).any(|i| binned[i * n..(i + 1) * n].iter().all(|&c| c == T::zero()));
    let col_empty = (0..n).any(|j| (0..n).all(|i| binned[i * n + j] == T::zero()));
    let floor = w / T::of_usize(n * n);
    if row_empty || col_empty {
        for cell in &mut binned {
            *cell += floor;
        }
    }
    let mut mass = binned.clone();
    match sinkhorn(&mut mass, n, T::SINKHORN_TOL, SINKHORN_MAX_SWEEPS) {
        Ok(_) => {}
        Err(BoardError::SinkhornStall { .. }) => {
            mass = binned;
            for cell in &mut mass {
                *cell += floor;
            }
            sinkhorn(&mut mass, n, T::SINKHORN_TOL, SINKHORN_MAX_SWEEPS)?;
        }
        Err(other) => return Err(other.into()),
    }
    Ok(CheckerboardCopula::new(n, mass)?)
}

/// Default estimator resolution for m samples: floor(sqrt(m)), capped at 64.
pub fn default_grid(m: usize) -> usize {
    m.isqrt().min(64)
}

/// Draw m pairs from a copula by conditional inversion: u uniform, then v
/// solves d1 C(u, v) = t by bisection (the conditional distribution is
/// nondecreasing in v). Each draw uses its own counter-based substream, so
/// output is deterministic in (seed, m) and independent of draw order.
pub fn sample_from<T: Real>(spec: &CopulaSpec<T>, m: usize, seed: u64) -> SampleSet<T> {
    assert!(m >= 1, "need at least one draw");
    let base = ChaCha12Rng::seed_from_u64(seed);
    let pairs = (0..m)
        .map(|i| {
            let mut rng = base.clone();
            rng.set_stream(i as u64);
            let u = positive_unit(&mut rng);
            let t = positive_unit(&mut rng);
            (u, invert_conditional(spec, u, t))
        })
        .collect();
    SampleSet { pairs }
}

/// Uniform draw in (0, 1): the half-open generator can produce 0.0, which
/// would put a sample on the boundary, so redraw in that case.
fn positive_unit<T: Real>(rng: &mut ChaCha12Rng) -> T {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return T::real(x);
        }
    }
}

/// Generalized inverse of the conditional distribution w -> d1 C(u, w) at
/// level t, by bisection on [0, 1].
fn invert_conditional<T: Real>(spec: &CopulaSpec<T>, u: T, t: T) -> T {
    let mut lo = T::zero();
    let mut hi = T::one();
    let half = T::real(0.5);
    while hi - lo > T::BISECT_TOL {
        let mid = (lo + hi) * half;
        if spec.point_d1(u, mid) >= t {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// A measure computed from data, with the estimator settings on record.
#[derive(Debug, Clone)]
pub struct EstimateReport<T> {
    pub report: MeasureReport<T>,
    /// Checkerboard resolution the samples were binned at.
    pub n: usize,
    /// Number of sample pairs.
    pub m: usize,
}

/// Estimate a measure from samples: checkerboard estimator at resolution n
/// (default [`default_grid`]), then the requested measure on the board.
pub fn measure_from_samples<T: Real>(
    s: &SampleSet<T>,
    mspec: &MeasureSpec<T>,
    n: Option<usize>,
    cfg: &GridConfig<T>,
) -> Result<EstimateReport<T>, EstimationError> {
    let n = n.unwrap_or_else(|| default_grid(s.len()));
    let board = empirical_checkerboard(s, n)?;
    let report = measure(&CopulaSpec::Checkerboard(board), mspec, cfg)?;
    Ok(EstimateReport { report, n, m: s.len() })
}

/// Read comma-separated (x, y) pairs. A header row is detected by parse
/// failure: the first row is skipped iff either of its fields is not a
/// number. Later rows must parse or the read fails.
pub fn read_csv_pairs<T: Real>(reader: impl Read) -> Result<SampleSet<T>, EstimationError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut pairs = Vec::new();
    for (row, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(EstimationError::BadCsvRow { row, fields: record.len() });
        }
        let parsed: Vec<Result<f64, _>> =
            record.iter().map(|field| field.parse::<f64>()).collect();
        match (&parsed[0], &parsed[1]) {
            (Ok(x), Ok(y)) => pairs.push((T::real(*x), T::real(*y))),
            _ if row == 0 => continue,
            _ => {
                let bad = record
                    .iter()
                    .find(|field| field.parse::<f64>().is_err())
                    .unwrap_or_default();
                return Err(EstimationError::BadCsvField { row, text: bad.to_string() });
            }
        }
    }
    SampleSet::from_pairs(pairs)
}

/// Write pairs as CSV with a `u,v` header row.
pub fn write_csv_pairs<T: Real>(
    mut writer: impl Write,
    s: &SampleSet<T>,
) -> Result<(), EstimationError> {
    writeln!(writer, "u,v").map_err(EstimationError::CsvWrite)?;
    for (x, y) in s.pairs() {
        writeln!(writer, "{x},{y}").map_err(EstimationError::CsvWrite)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Direction, MeasureFamily};

    fn set(pairs: &[(f64, f64)]) -> SampleSet<f64> {
        SampleSet::from_pairs(pairs.to_vec()).unwrap()
    }

    #[test]
    fn pseudo_observations_rank_the_data() {
        let got = pseudo_observations(&set(&[(1.0, 10.0), (2.0, 20.0), (3.0, 30.0)]));
        assert_eq!(got, vec![(0.25, 0.25), (0.5, 0.5), (0.75, 0.75)]);
        let got = pseudo_observations(&set(&[(3.0, 10.0), (1.0, 30.0), (2.0, 20.0)]));
        assert_eq!(got, vec![(0.75, 0.25), (0.25, 0.75), (0.5, 0.5)]);
    }

    #[test]
    fn ties_take_the_average_rank() {
        let got = pseudo_observations(&set(&[(1.0, 5.0), (1.0, 7.0)]));
        assert_eq!(got[0].0, 0.5);
        assert_eq!(got[1].0, 0.5);
    }

    #[test]
    fn estimation_rejects_constant_columns() {
        let err = empirical_checkerboard(&set(&[(2.0, 1.0), (2.0, 3.0)]), 2).unwrap_err();
        assert!(matches!(err, EstimationError::ConstantColumn { column: 'x' }));
        let err = empirical_checkerboard(&set(&[(1.0, 4.0), (3.0, 4.0)]), 2).unwrap_err();
        assert!(matches!(err, EstimationError::ConstantColumn { column: 'y' }));
    }

    #[test]
    fn sample_set_validates() {
        assert!(matches!(
            SampleSet::from_pairs(vec![(0.1f64, 0.2)]),
            Err(EstimationError::TooFewSamples { m: 1 })
        ));
        assert!(matches!(
            SampleSet::from_pairs(vec![(0.1f64, 0.2), (f64::NAN, 0.5)]),
            Err(EstimationError::NonFiniteSample { index: 1 })
        ));
    }

    #[test]
    fn ranks_are_invariant_under_increasing_transforms() {
        let raw = [(0.3, 1.2), (-1.0, 0.4), (2.5, -3.0), (0.9, 0.0), (1.7, 2.2)];
        let direct = pseudo_observations(&set(&raw));
        let mapped: Vec<(f64, f64)> =
            raw.iter().map(|&(x, y)| (x.exp(), y.powi(3))).collect();
        let transformed = pseudo_observations(&set(&mapped));
        assert_eq!(direct, transformed);
    }

    #[test]
    fn grid_points_give_the_uniform_board() {
        let mut pairs = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                pairs.push(((i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0));
            }
        }
        let board = empirical_checkerboard(&set(&pairs), 4).unwrap();
        for &cell in board.mass() {
            assert!((cell - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_data_recovers_the_comonotone_board() {
        let pairs: Vec<(f64, f64)> =
            (0..400).map(|i| (i as f64, (i as f64).exp() / 1e6)).collect();
        let board = empirical_checkerboard(&set(&pairs), 4).unwrap();
        let target = CopulaSpec::UpperBound.to_checkerboard(4);
        for (got, want) in board.mass().iter().zip(target.mass()) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_rows_fall_back_to_a_floor() {
        // The tied u ranks 0.375, 0.375, 0.75 land in strips 1 and 2 of a
        // 3-grid, leaving strip 0 empty.
        let board =
            empirical_checkerboard(&set(&[(1.0, 5.0), (1.0, 7.0), (2.0, 6.0)]), 3).unwrap();
        assert!(board.margin_residual() < 1e-9);
        assert!(board.mass().iter().all(|&c| c > 0.0));
    }

    #[test]
    fn resolution_is_gated_by_sample_count() {
        assert!(matches!(
            empirical_checkerboard(&set(&[(1.0, 2.0), (2.0, 1.0)]), 3),
            Err(EstimationError::GridTooFine { n: 3, m: 2 })
        ));
        assert!(matches!(
            empirical_checkerboard(&set(&[(1.0, 2.0), (2.0, 1.0)]), 0),
            Err(EstimationError::GridZero)
        ));
    }

    #[test]
    fn default_grid_caps_at_sixty_four() {
        assert_eq!(default_grid(100), 10);
        assert_eq!(default_grid(10_000), 64);
        assert_eq!(default_grid(2), 1);
    }

    #[test]
    fn comonotone_samples_sit_on_the_diagonal() {
        let samples = sample_from(&CopulaSpec::<f64>::UpperBound, 50, 11);
        for &(u, v) in samples.pairs() {
            assert!((u - v).abs() < 1e-9, "({u}, {v}) off the diagonal");
        }
    }

    #[test]
    fn independent_samples_are_uncorrelated() {
        let samples = sample_from(&CopulaSpec::<f64>::Independence, 4000, 3);
        let m = samples.len() as f64;
        let (mut su, mut sv, mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(u, v) in samples.pairs() {
            su += u;
            sv += v;
            suv += u * v;
            suu += u * u;
            svv += v * v;
        }
        let cov = suv / m - su / m * (sv / m);
        let var_u = suu / m - (su / m).powi(2);
        let var_v = svv / m - (sv / m).powi(2);
        let corr = cov / (var_u * var_v).sqrt();
        assert!(corr.abs() < 4.0 / m.sqrt(), "corr = {corr}");
    }

    #[test]
    fn tent_samples_lie_on_the_support_segments() {
        let spec: CopulaSpec<f64> = CopulaSpec::tent(0.3).unwrap();
        let samples = sample_from(&spec, 2000, 5);
        for &(u, v) in samples.pairs() {
            let rising = (v - u / 0.3).abs();
            let falling = (v - (1.0 - u) / 0.7).abs();
            assert!(rising.min(falling) < 1e-6, "({u}, {v}) off the tent support");
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let spec = CopulaSpec::tent(0.6).unwrap();
        let a = sample_from(&spec, 40, 9);
        let b = sample_from(&spec, 40, 9);
        assert_eq!(a, b);
        let c = sample_from(&spec, 40, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn round_trip_recovers_the_tent_asymmetry() {
        let spec: CopulaSpec<f64> = CopulaSpec::tent(0.3).unwrap();
        let samples = sample_from(&spec, 2000, 42);
        let cfg = GridConfig::default();
        let tau1 = MeasureSpec::new(MeasureFamily::parse("tau1").unwrap(), Direction::XY);
        let xy = measure_from_samples(&samples, &tau1, None, &cfg).unwrap();
        assert_eq!(xy.n, 44);
        assert_eq!(xy.m, 2000);
        assert!(xy.report.value > 0.85, "xy tau1 = {}", xy.report.value);
        let tau1_yx = MeasureSpec::new(MeasureFamily::parse("tau1").unwrap(), Direction::YX);
        let yx = measure_from_samples(&samples, &tau1_yx, None, &cfg).unwrap();
        assert!((yx.report.value - 0.58).abs() < 0.1, "yx tau1 = {}", yx.report.value);
    }

    #[test]
    fn csv_round_trips_with_header_detection() {
        let samples = sample_from(&CopulaSpec::tent(0.4).unwrap(), 25, 77);
        let mut buffer = Vec::new();
        write_csv_pairs(&mut buffer, &samples).unwrap();
        let text = String::from_utf8(buffer.clone()).unwrap();
        assert!(text.starts_with("u,v\n"));
        let back: SampleSet<f64> = read_csv_pairs(buffer.as_slice()).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in back.pairs().iter().zip(samples.pairs()) {
            assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
        }
    }

    #[test]
    fn headerless_csv_keeps_the_first_row() {
        let data = "0.1,0.9\n0.8,0.2\n0.5,0.5\n";
        let samples: SampleSet<f64> = read_csv_pairs(data.as_bytes()).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples.pairs()[0], (0.1, 0.9));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let err = read_csv_pairs::<f64>("x,y\n0.1,oops\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EstimationError::BadCsvField { row: 1, .. }));
        let err = read_csv_pairs::<f64>("0.1,0.2,0.3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EstimationError::BadCsvRow { row: 0, fields: 3 }));
    }
}
