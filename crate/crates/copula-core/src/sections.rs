//! Step functions on [0,1] and exact partial-derivative sections.
//!
//! For every `CopulaSpec` variant, the map u -> d1 C(u, v) at fixed v (and
//! v -> d2 C(u, v) at fixed u) is a step function with finitely many pieces.
//! Representing those sections exactly, instead of sampling them, is what
//! lets integrals in u, the * product, and the data-processing ordering be
//! computed without discretization error in the u direction.

use crate::copula::CopulaSpec;
use crate::num::Real;

/// A piecewise-constant function on [0,1]. Piece k takes `values[k]` on
/// [cuts[k], cuts[k+1]), except the last piece, which is closed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFn<T> {
    cuts: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> StepFn<T> {
    /// One piece covering the whole interval.
    pub fn constant(value: T) -> Self {
        Self { cuts: vec![T::zero(), T::one()], values: vec![value] }
    }

    /// Build from sorted cuts spanning [0,1]; zero-width pieces (repeated
    /// cuts) are dropped, which is how boundary cases like a section of the
    /// extremal copulas at v = 0 collapse cleanly.
    pub fn new(cuts: Vec<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(cuts.len(), values.len() + 1);
        debug_assert!(cuts.first() == Some(&T::zero()) && cuts.last() == Some(&T::one()));
        debug_assert!(cuts.windows(2).all(|w| w[0] <= w[1]), "cuts must be sorted: {cuts:?}");
        let mut out_cuts = Vec::with_capacity(cuts.len());
        let mut out_values = Vec::with_capacity(values.len());
        out_cuts.push(T::zero());
        for (k, &value) in values.iter().enumerate() {
            if cuts[k + 1] > cuts[k] {
                out_cuts.push(cuts[k + 1]);
                out_values.push(value);
            }
        }
        debug_assert!(!out_values.is_empty(), "step function must cover [0,1]");
        Self { cuts: out_cuts, values: out_values }
    }

    pub fn cuts(&self) -> &[T] {
        &self.cuts
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterate pieces as (start, end, value).
    pub fn pieces(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &value)| (self.cuts[k], self.cuts[k + 1], value))
    }

    /// Right-continuous evaluation: a point on an interior cut belongs to
    /// the piece starting there.
    pub fn value_at(&self, t: T) -> T {
        let interior = &self.cuts[1..self.cuts.len() - 1];
        let k = interior.partition_point(|&c| c <= t);
        self.values[k]
    }

    /// Exact integral over [0,1].
    pub fn integral(&self) -> T {
        self.pieces().map(|(a, b, value)| (b - a) * value).sum()
    }

    /// Apply a function to every piece value.
    pub fn map_values(mut self, f: impl Fn(T) -> T) -> Self {
        for value in &mut self.values {
            *value = f(*value);
        }
        self
    }

    /// The function t -> f(1 - t).
    pub fn reflect(self) -> Self {
        let one = T::one();
        let mut cuts: Vec<T> = self.cuts.into_iter().map(|c| one - c).collect();
        cuts.reverse();
        if let Some(first) = cuts.first_mut() {
            *first = T::zero();
        }
        if let Some(last) = cuts.last_mut() {
            *last = one;
        }
        let mut values = self.values;
        values.reverse();
        Self { cuts, values }
    }

    /// Pointwise combination on the merged cut set.
    pub fn combine_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let cap = self.values.len() + other.values.len();
        let mut cuts = Vec::with_capacity(cap + 1);
        let mut values = Vec::with_capacity(cap);
        cuts.push(T::zero());
        let (mut ka, mut kb) = (0usize, 0usize);
        let mut lo = T::zero();
        while ka < self.values.len() && kb < other.values.len() {
            let end_a = self.cuts[ka + 1];
            let end_b = other.cuts[kb + 1];
            let hi = end_a.min(end_b);
            if hi > lo {
                cuts.push(hi);
                values.push(f(self.values[ka], other.values[kb]));
            }
            if end_a <= hi {
                ka += 1;
            }
            if end_b <= hi {
                kb += 1;
            }
            lo = hi;
        }
        Self { cuts, values }
    }

    /// Pointwise difference.
    pub fn sub(&self, other: &Self) -> Self {
        self.combine_with(other, |a, b| a - b)
    }

    /// Exact inner product: integral of the pointwise product, via a
    /// two-pointer sweep over both cut sets without allocating.
    pub fn dot(&self, other: &Self) -> T {
        let mut total = T::zero();
        let (mut ka, mut kb) = (0usize, 0usize);
        let mut lo = T::zero();
        while ka < self.values.len() && kb < other.values.len() {
            let end_a = self.cuts[ka + 1];
            let end_b = other.cuts[kb + 1];
            let hi = end_a.min(end_b);
            total += (hi - lo) * self.values[ka] * other.values[kb];
            if end_a <= hi {
                ka += 1;
            }
            if end_b <= hi {
                kb += 1;
            }
            lo = hi;
        }
        total
    }
}

/// The section u -> d1 C(u, v) as an exact step function.
pub fn d1_sections<T: Real>(spec: &CopulaSpec<T>, v: T) -> StepFn<T> {
    let one = T::one();
    let zero = T::zero();
    match spec {
        CopulaSpec::Independence => StepFn::constant(v),
        CopulaSpec::UpperBound => StepFn::new(vec![zero, v, one], vec![one, zero]),
        CopulaSpec::LowerBound => StepFn::new(vec![zero, one - v, one], vec![zero, one]),
        CopulaSpec::Tent { theta } => {
            let th = *theta;
            let rise = th * v;
            // The kinks satisfy rise <= fall for every v <= 1, but the
            // rounded difference can land one ulp below rise at v = 1.
            let fall = (one - (one - th) * v).max(rise);
            StepFn::new(vec![zero, rise, fall, one], vec![one, zero, one])
        }
        CopulaSpec::Transpose(inner) => d2_sections(inner, v),
        CopulaSpec::FlipY(inner) => d1_sections(inner, one - v).map_values(|p| one - p),
        CopulaSpec::FlipX(inner) => d1_sections(inner, v).reflect(),
        CopulaSpec::ConvexMix { weights, parts } => weighted_sum(
            weights
                .iter()
                .zip(parts)
                .map(|(&w, part)| d1_sections(part, v).map_values(|p| w * p)),
        ),
        CopulaSpec::Checkerboard(board) => {
            let n = board.n();
            let cuts = (0..=n).map(|i| T::of_usize(i) / T::of_usize(n)).collect();
            let values = (0..n).map(|i| board.d1_strip_value(i, v)).collect();
            StepFn::new(cuts, values)
        }
    }
}

/// The section v -> d2 C(u, v) as an exact step function.
pub fn d2_sections<T: Real>(spec: &CopulaSpec<T>, u: T) -> StepFn<T> {
    let one = T::one();
    let zero = T::zero();
    match spec {
        CopulaSpec::Independence => StepFn::constant(u),
        CopulaSpec::UpperBound => StepFn::new(vec![zero, u, one], vec![one, zero]),
        CopulaSpec::LowerBound => StepFn::new(vec![zero, one - u, one], vec![zero, one]),
        CopulaSpec::Tent { theta } => {
            let th = *theta;
            if u < th {
                StepFn::new(vec![zero, u / th, one], vec![th, zero])
            } else if u > th {
                let fall = (one - u) / (one - th);
                StepFn::new(vec![zero, fall, one], vec![th, one])
            } else {
                StepFn::constant(th)
            }
        }
        CopulaSpec::Transpose(inner) => d1_sections(inner, u),
        CopulaSpec::FlipY(inner) => d2_sections(inner, u).reflect(),
        CopulaSpec::FlipX(inner) => d2_sections(inner, one - u).map_values(|p| one - p),
        CopulaSpec::ConvexMix { weights, parts } => weighted_sum(
            weights
                .iter()
                .zip(parts)
                .map(|(&w, part)| d2_sections(part, u).map_values(|p| w * p)),
        ),
        CopulaSpec::Checkerboard(board) => {
            let n = board.n();
            let cuts = (0..=n).map(|j| T::of_usize(j) / T::of_usize(n)).collect();
            let values = (0..n).map(|j| board.d2_strip_value(j, u)).collect();
            StepFn::new(cuts, values)
        }
    }
}

fn weighted_sum<T: Real>(mut parts: impl Iterator<Item = StepFn<T>>) -> StepFn<T> {
    let first = parts.next().expect("mix has at least one part");
    parts.fold(first, |acc, next| acc.combine_with(&next, |a, b| a + b))
}
