//! Copula specifications: closed-form families, structural transforms, and
//! checkerboards under one enum, plus evaluation, exact pointwise partial
//! derivatives, discretization, and axiom validation.
//!
//! Partial derivatives follow the right-limit convention at kink lines, so
//! every variant has an exact pointwise partial and finite differences are
//! only a cross-check, never the computation path.

use crate::checkerboard::CheckerboardCopula;
use crate::num::Real;
use thiserror::Error;

/// Errors from constructing or evaluating copula specifications.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("point ({u}, {v}) is outside the closed unit square")]
    DomainPoint { u: f64, v: f64 },
    #[error("point ({u}, {v}) is outside the open unit square required for partial derivatives")]
    PartialDomain { u: f64, v: f64 },
    #[error("tent parameter {theta} is outside [0, 1]")]
    TentTheta { theta: f64 },
    #[error("mix weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("mix weight {index} is negative: {value}")]
    WeightNegative { index: usize, value: f64 },
    #[error("mix has {weights} weights but {parts} parts")]
    MixLengthMismatch { weights: usize, parts: usize },
    #[error("mix needs at least one part")]
    EmptyMix,
    #[error("quadrature resolution {quad_n} is below the minimum of 2")]
    QuadTooSmall { quad_n: usize },
    #[error("finite-difference step {step} is outside (0, 0.5)")]
    FdStep { step: f64 },
}

/// Resolution knobs for quadrature and finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig<T> {
    /// Quadrature points per axis for integrals without a closed form.
    pub quad_n: usize,
    /// Step for finite-difference cross-checks of analytic partials.
    pub fd_step: T,
}

impl<T: Real> GridConfig<T> {
    pub fn new(quad_n: usize, fd_step: T) -> Result<Self, SpecError> {
        if quad_n < 2 {
            return Err(SpecError::QuadTooSmall { quad_n });
        }
        if fd_step <= T::zero() || fd_step >= T::real(0.5) {
            return Err(SpecError::FdStep { step: fd_step.as_f64() });
        }
        Ok(Self { quad_n, fd_step })
    }
}

impl<T: Real> Default for GridConfig<T> {
    fn default() -> Self {
        Self { quad_n: 512, fd_step: T::real(1e-5) }
    }
}

/// A bivariate copula, either closed-form or a checkerboard, possibly
/// wrapped in structural transforms.
#[derive(Debug, Clone, PartialEq)]
pub enum CopulaSpec<T> {
    /// Product copula uv (independent coordinates).
    Independence,
    /// min(u, v): the pointwise largest copula (comonotone coordinates).
    UpperBound,
    /// max(u + v - 1, 0): the pointwise smallest copula.
    LowerBound,
    /// Singular copula supported on two line segments through (theta, 1);
    /// theta = 1 gives UpperBound, theta = 0 gives LowerBound.
    Tent { theta: T },
    /// C^T(u, v) = C(v, u).
    Transpose(Box<CopulaSpec<T>>),
    /// u - C(u, 1-v): the copula after a decreasing rearrangement of v.
    FlipY(Box<CopulaSpec<T>>),
    /// v - C(1-u, v): the copula after a decreasing rearrangement of u.
    FlipX(Box<CopulaSpec<T>>),
    /// Convex combination of copulas.
    ConvexMix { weights: Vec<T>, parts: Vec<CopulaSpec<T>> },
    /// Piecewise-uniform copula from an n x n mass matrix.
    Checkerboard(CheckerboardCopula<T>),
}

impl<T: Real> CopulaSpec<T> {
    /// Tent copula with the given corner parameter.
    pub fn tent(theta: T) -> Result<Self, SpecError> {
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(SpecError::TentTheta { theta: theta.as_f64() });
        }
        Ok(CopulaSpec::Tent { theta })
    }

    /// Transposed copula, simplified structurally: symmetric builtins are
    /// returned unchanged, double transposes unwrap, flips commute past the
    /// transpose, mixes distribute, and checkerboards transpose eagerly.
    pub fn transpose(self) -> Self {
        match self {
            CopulaSpec::Independence | CopulaSpec::UpperBound | CopulaSpec::LowerBound => self,
            CopulaSpec::Transpose(inner) => *inner,
            CopulaSpec::FlipY(inner) => CopulaSpec::FlipX(Box::new(inner.transpose())),
            CopulaSpec::FlipX(inner) => CopulaSpec::FlipY(Box::new(inner.transpose())),
            CopulaSpec::ConvexMix { weights, parts } => CopulaSpec::ConvexMix {
                weights,
                parts: parts.into_iter().map(CopulaSpec::transpose).collect(),
            },
            CopulaSpec::Checkerboard(board) => CopulaSpec::Checkerboard(board.transpose()),
            tent @ CopulaSpec::Tent { .. } => CopulaSpec::Transpose(Box::new(tent)),
        }
    }

    /// Copula of (X, g(Y)) for strictly decreasing g, simplified
    /// structurally where exact.
    pub fn flip_y(self) -> Self {
        match self {
            CopulaSpec::Independence => CopulaSpec::Independence,
            CopulaSpec::UpperBound => CopulaSpec::LowerBound,
            CopulaSpec::LowerBound => CopulaSpec::UpperBound,
            CopulaSpec::FlipY(inner) => *inner,
            CopulaSpec::ConvexMix { weights, parts } => CopulaSpec::ConvexMix {
                weights,
                parts: parts.into_iter().map(CopulaSpec::flip_y).collect(),
            },
            CopulaSpec::Checkerboard(board) => CopulaSpec::Checkerboard(board.flip_y()),
            other => CopulaSpec::FlipY(Box::new(other)),
        }
    }

    /// Copula of (g(X), Y) for strictly decreasing g.
    pub fn flip_x(self) -> Self {
        match self {
            CopulaSpec::Independence => CopulaSpec::Independence,
            CopulaSpec::UpperBound => CopulaSpec::LowerBound,
            CopulaSpec::LowerBound => CopulaSpec::UpperBound,
            CopulaSpec::FlipX(inner) => *inner,
            CopulaSpec::ConvexMix { weights, parts } => CopulaSpec::ConvexMix {
                weights,
                parts: parts.into_iter().map(CopulaSpec::flip_x).collect(),
            },
            CopulaSpec::Checkerboard(board) => CopulaSpec::Checkerboard(board.flip_x()),
            other => CopulaSpec::FlipX(Box::new(other)),
        }
    }

    /// Convex combination. Weights must be nonnegative and sum to 1; a mix
    /// of checkerboards with equal resolution collapses into one board so
    /// downstream exact matrix paths stay available.
    ///
    /// The weight test is a negated comparison on purpose: NaN weights must
    /// fail it too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn convex_mix(weights: Vec<T>, parts: Vec<CopulaSpec<T>>) -> Result<Self, SpecError> {
        if parts.is_empty() {
            return Err(SpecError::EmptyMix);
        }
        if weights.len() != parts.len() {
            return Err(SpecError::MixLengthMismatch { weights: weights.len(), parts: parts.len() });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !(w >= T::zero()) {
                return Err(SpecError::WeightNegative { index, value: w.as_f64() });
            }
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > T::EXACT_TOL {
            return Err(SpecError::WeightSum { sum: sum.as_f64() });
        }
        if parts.len() == 1 {
            return Ok(parts.into_iter().next().unwrap());
        }
        let common_n = parts.iter().try_fold(None, |acc, p| match (acc, p) {
            (None, CopulaSpec::Checkerboard(b)) => Ok(Some(b.n())),
            (Some(n), CopulaSpec::Checkerboard(b)) if b.n() == n => Ok(Some(n)),
            _ => Err(()),
        });
        if let Ok(Some(n)) = common_n {
            let mut mass = vec![T::zero(); n * n];
            for (w, part) in weights.iter().zip(&parts) {
                if let CopulaSpec::Checkerboard(b) = part {
                    for (out, &cell) in mass.iter_mut().zip(b.mass()) {
                        *out += *w * cell;
                    }
                }
            }
            return Ok(CopulaSpec::Checkerboard(CheckerboardCopula::new(n, mass).expect(
                "convex combination of valid boards has valid margins",
            )));
        }
        Ok(CopulaSpec::ConvexMix { weights, parts })
    }

    /// C(u, v). Errors outside the closed unit square.
    pub fn eval(&self, u: T, v: T) -> Result<T, SpecError> {
        if !in_closed_square(u, v) {
            return Err(SpecError::DomainPoint { u: u.as_f64(), v: v.as_f64() });
        }
        Ok(self.eval_unchecked(u, v))
    }

    pub(crate) fn eval_unchecked(&self, u: T, v: T) -> T {
        match self {
            CopulaSpec::Independence => u * v,
            CopulaSpec::UpperBound => u.min(v),
            CopulaSpec::LowerBound => (u + v - T::one()).max(T::zero()),
            CopulaSpec::Tent { theta } => {
                let th = *theta;
                if u <= th * v {
                    u
                } else if u < T::one() - (T::one() - th) * v {
                    th * v
                } else {
                    u + v - T::one()
                }
            }
            CopulaSpec::Transpose(inner) => inner.eval_unchecked(v, u),
            CopulaSpec::FlipY(inner) => u - inner.eval_unchecked(u, T::one() - v),
            CopulaSpec::FlipX(inner) => v - inner.eval_unchecked(T::one() - u, v),
            CopulaSpec::ConvexMix { weights, parts } => weights
                .iter()
                .zip(parts)
                .map(|(w, p)| *w * p.eval_unchecked(u, v))
                .sum(),
            CopulaSpec::Checkerboard(board) => board.eval(u, v),
        }
    }

    /// d1 C(u, v), exact for every variant, using the right-limit value on
    /// kink lines. Errors outside the open unit square.
    pub fn partial1(&self, u: T, v: T) -> Result<T, SpecError> {
        if !in_open_square(u, v) {
            return Err(SpecError::PartialDomain { u: u.as_f64(), v: v.as_f64() });
        }
        Ok(self.point_d1(u, v).max(T::zero()).min(T::one()))
    }

    /// d2 C(u, v), exact for every variant. Errors outside the open square.
    pub fn partial2(&self, u: T, v: T) -> Result<T, SpecError> {
        if !in_open_square(u, v) {
            return Err(SpecError::PartialDomain { u: u.as_f64(), v: v.as_f64() });
        }
        Ok(self.point_d2(u, v).max(T::zero()).min(T::one()))
    }

    pub(crate) fn point_d1(&self, u: T, v: T) -> T {
        match self {
            CopulaSpec::Independence => v,
            CopulaSpec::UpperBound => {
                if u < v {
                    T::one()
                } else {
                    T::zero()
                }
            }
            CopulaSpec::LowerBound => {
                if u < T::one() - v {
                    T::zero()
                } else {
                    T::one()
                }
            }
            CopulaSpec::Tent { theta } => {
                let th = *theta;
                if u < th * v {
                    T::one()
                } else if u < T::one() - (T::one() - th) * v {
                    T::zero()
                } else {
                    T::one()
                }
            }
            CopulaSpec::Transpose(inner) => inner.point_d2(v, u),
            CopulaSpec::FlipY(inner) => T::one() - inner.point_d1(u, T::one() - v),
            CopulaSpec::FlipX(inner) => inner.point_d1(T::one() - u, v),
            CopulaSpec::ConvexMix { weights, parts } => weights
                .iter()
                .zip(parts)
                .map(|(w, p)| *w * p.point_d1(u, v))
                .sum(),
            CopulaSpec::Checkerboard(board) => {
                let i = strip_index(u, board.n());
                board.d1_strip_value(i, v)
            }
        }
    }

    pub(crate) fn point_d2(&self, u: T, v: T) -> T {
        match self {
            CopulaSpec::Independence => u,
            CopulaSpec::UpperBound => {
                if v < u {
                    T::one()
                } else {
                    T::zero()
                }
            }
            CopulaSpec::LowerBound => {
                if v < T::one() - u {
                    T::zero()
                } else {
                    T::one()
                }
            }
            CopulaSpec::Tent { theta } => {
                let th = *theta;
                if u <= th * v {
                    T::zero()
                } else if u >= T::one() - (T::one() - th) * v {
                    T::one()
                } else {
                    th
                }
            }
            CopulaSpec::Transpose(inner) => inner.point_d1(v, u),
            CopulaSpec::FlipY(inner) => inner.point_d2(u, T::one() - v),
            CopulaSpec::FlipX(inner) => T::one() - inner.point_d2(T::one() - u, v),
            CopulaSpec::ConvexMix { weights, parts } => weights
                .iter()
                .zip(parts)
                .map(|(w, p)| *w * p.point_d2(u, v))
                .sum(),
            CopulaSpec::Checkerboard(board) => {
                let j = strip_index(v, board.n());
                board.d2_strip_value(j, u)
            }
        }
    }

    /// Central-difference estimate of d1 C, for cross-checking the analytic
    /// path. The step shrinks near the boundary to stay inside the square.
    pub fn fd_partial1(&self, u: T, v: T, step: T) -> Result<T, SpecError> {
        if !in_open_square(u, v) {
            return Err(SpecError::PartialDomain { u: u.as_f64(), v: v.as_f64() });
        }
        let h = step.min(u).min(T::one() - u);
        let rise = self.eval_unchecked(u + h, v) - self.eval_unchecked(u - h, v);
        Ok((rise / (h + h)).max(T::zero()).min(T::one()))
    }

    /// Central-difference estimate of d2 C.
    pub fn fd_partial2(&self, u: T, v: T, step: T) -> Result<T, SpecError> {
        if !in_open_square(u, v) {
            return Err(SpecError::PartialDomain { u: u.as_f64(), v: v.as_f64() });
        }
        let h = step.min(v).min(T::one() - v);
        let rise = self.eval_unchecked(u, v + h) - self.eval_unchecked(u, v - h);
        Ok((rise / (h + h)).max(T::zero()).min(T::one()))
    }

    /// Discretize onto an n x n checkerboard by inclusion-exclusion of cell
    /// rectangle masses. Boards discretize exactly (clone or refine) when
    /// resolutions nest; otherwise the lattice evaluation is still exact
    /// because board evaluation is closed-form.
    pub fn to_checkerboard(&self, n: usize) -> CheckerboardCopula<T> {
        assert!(n >= 1, "checkerboard resolution must be at least 1");
        if let CopulaSpec::Checkerboard(board) = self {
            if board.n() == n {
                return board.clone();
            }
            if n.is_multiple_of(board.n()) {
                return board.refine(n / board.n());
            }
        }
        let w = n + 1;
        let mut lattice = vec![T::zero(); w * w];
        let nn = T::of_usize(n);
        for i in 0..=n {
            let u = T::of_usize(i) / nn;
            for j in 0..=n {
                let v = T::of_usize(j) / nn;
                lattice[i * w + j] = self.eval_unchecked(u, v);
            }
        }
        let mut mass = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                mass[i * n + j] = lattice[(i + 1) * w + (j + 1)] - lattice[(i + 1) * w + j]
                    - lattice[i * w + (j + 1)]
                    + lattice[i * w + j];
            }
        }
        CheckerboardCopula::from_raw(n, mass)
    }

    /// Check the copula axioms on an (n+1) x (n+1) lattice: groundedness,
    /// uniform margins, nonnegative rectangle masses, the Lipschitz bound,
    /// and the pointwise ordering between the extremal copulas. Violations
    /// are returned as data; an empty list means the lattice passed.
    pub fn validate(&self, n: usize) -> Vec<Violation<T>> {
        assert!(n >= 1, "validation lattice needs at least one cell");
        let tol = T::EXACT_TOL;
        let w = n + 1;
        let nn = T::of_usize(n);
        let mut lattice = vec![T::zero(); w * w];
        for i in 0..=n {
            let u = T::of_usize(i) / nn;
            for j in 0..=n {
                lattice[i * w + j] = self.eval_unchecked(u, T::of_usize(j) / nn);
            }
        }
        let mut violations = Vec::new();
        let mut push = |kind, i: usize, j: usize, magnitude: T| {
            violations.push(Violation {
                kind,
                u: T::of_usize(i) / nn,
                v: T::of_usize(j) / nn,
                magnitude,
            });
        };
        for i in 0..=n {
            let u = T::of_usize(i) / nn;
            for j in 0..=n {
                let v = T::of_usize(j) / nn;
                let c = lattice[i * w + j];
                if (i == 0 || j == 0) && c.abs() > tol {
                    push(ViolationKind::Grounded, i, j, c.abs());
                }
                if i == n && (c - v).abs() > tol {
                    push(ViolationKind::Margin, i, j, (c - v).abs());
                }
                if j == n && (c - u).abs() > tol {
                    push(ViolationKind::Margin, i, j, (c - u).abs());
                }
                let lower = (u + v - T::one()).max(T::zero());
                if c < lower - tol {
                    push(ViolationKind::FrechetLower, i, j, lower - c);
                }
                let upper = u.min(v);
                if c > upper + tol {
                    push(ViolationKind::FrechetUpper, i, j, c - upper);
                }
                if i < n {
                    let du = (lattice[(i + 1) * w + j] - c).abs();
                    if du > T::one() / nn + tol {
                        push(ViolationKind::Lipschitz, i, j, du - T::one() / nn);
                    }
                }
                if j < n {
                    let dv = (lattice[i * w + (j + 1)] - c).abs();
                    if dv > T::one() / nn + tol {
                        push(ViolationKind::Lipschitz, i, j, dv - T::one() / nn);
                    }
                }
                if i < n && j < n {
                    let rect = lattice[(i + 1) * w + (j + 1)] - lattice[(i + 1) * w + j]
                        - lattice[i * w + (j + 1)]
                        + c;
                    if rect < -tol {
                        push(ViolationKind::TwoIncreasing, i, j, -rect);
                    }
                }
            }
        }
        violations
    }
}

/// Which copula axiom a lattice check found broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// C(u, 0) or C(0, v) is nonzero.
    Grounded,
    /// C(u, 1) != u or C(1, v) != v.
    Margin,
    /// A cell rectangle carries negative mass.
    TwoIncreasing,
    /// A lattice step changes C by more than the step length.
    Lipschitz,
    /// C dips below max(u + v - 1, 0).
    FrechetLower,
    /// C exceeds min(u, v).
    FrechetUpper,
}

/// One failed lattice check, located at the lower-left corner of the cell
/// (for rectangle and step checks) or at the offending point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation<T> {
    pub kind: ViolationKind,
    pub u: T,
    pub v: T,
    /// How far past the tolerance the check failed.
    pub magnitude: T,
}

fn in_closed_square<T: Real>(u: T, v: T) -> bool {
    u >= T::zero() && u <= T::one() && v >= T::zero() && v <= T::one()
}

fn in_open_square<T: Real>(u: T, v: T) -> bool {
    u > T::zero() && u < T::one() && v > T::zero() && v < T::one()
}

/// Strip index for a coordinate, clamped so t = 1 lands in the last strip.
/// Points exactly on a cut line belong to the strip on their right, which
/// realizes the right-limit convention for piecewise-constant partials.
pub(crate) fn strip_index<T: Real>(t: T, n: usize) -> usize {
    let idx = (t * T::of_usize(n)).floor().to_usize().unwrap_or(0);
    idx.min(n - 1)
}
