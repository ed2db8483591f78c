//! Bivariate copulas, the Markov * product, and nonsymmetric dependence measures.
//!
//! The crate is organized around a symbolic copula representation
//! ([`CopulaSpec`]) whose partial derivatives admit exact step-function
//! decompositions along one axis ([`sections`]). That structure drives three
//! numerical workhorses:
//!
//! * the * product of two copulas, computed cell-exactly ([`algebra`]),
//! * dependence measures with exact inner integrals ([`measures`]),
//! * rank-based estimation from paired samples ([`estimation`]).
//!
//! A brute-force [`oracle`] module certifies integral values independently,
//! and [`suites`] bundles the randomized property checks used by the CLI.
//!
//! All numerical kernels are generic over the [`num::Real`] scalar; the
//! `*64` aliases below fix `f64`, which is what the CLI and test suites use.

pub mod algebra;
pub mod checkerboard;
pub mod copula;
pub mod estimation;
pub mod measures;
pub mod num;
pub mod oracle;
pub mod sections;
pub mod suites;

pub use checkerboard::CheckerboardCopula;
pub use copula::{CopulaSpec, GridConfig, Violation, ViolationKind};
pub use estimation::{EstimateReport, SampleSet};
pub use measures::{Direction, MeasureFamily, MeasureReport, MeasureSpec};
pub use num::Real;
pub use suites::{SuiteConfig, SuiteOutcome, SuiteStatus};

/// `f64` copula spec, the default working type.
pub type Copula64 = CopulaSpec<f64>;
/// `f64` checkerboard.
pub type Board64 = CheckerboardCopula<f64>;
/// `f64` grid configuration.
pub type Grid64 = GridConfig<f64>;
/// `f64` measure report.
pub type Report64 = MeasureReport<f64>;

/// `f32` copula spec; supported with loosened tolerances (see [`num::Real`]).
pub type Copula32 = CopulaSpec<f32>;
/// `f32` checkerboard.
pub type Board32 = CheckerboardCopula<f32>;
