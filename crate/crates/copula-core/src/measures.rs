//! Dependence measures on copulas: the convex-distance family around the
//! first partial derivative, Schweizer-Wolff distances, the Sobolev measure,
//! density-based mutual-information measures on checkerboards, and the
//! nonsymmetric entropy family with its normalizing bounds.
//!
//! Two computation paths exist. Checkerboards with exponent 1 or 2 integrate
//! the piecewise-linear conditional distributions in closed form (the
//! "exact-checkerboard" path). Everything else uses step-function sections
//! that are exact along u combined with midpoint quadrature along v (the
//! "quadrature" path); midpoint nodes keep v strictly inside (0,1), so the
//! entropy integrands never see v = 0.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::checkerboard::CheckerboardCopula;
use crate::copula::{CopulaSpec, GridConfig};
use crate::num::Real;
use crate::sections::d1_sections;

/// Errors from measure construction or evaluation.
#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("unknown measure id {id:?}")]
    UnknownMeasure { id: String },
    #[error("measure id {id:?} has a malformed numeric parameter {token:?}")]
    BadMeasureNumber { id: String, token: String },
    #[error("tau_alpha needs alpha >= 1, got {alpha}")]
    TauAlphaRange { alpha: f64 },
    #[error("{id} needs alpha > 0 and alpha != 1, got {alpha}")]
    DensityAlphaRange { id: &'static str, alpha: f64 },
    #[error("copula_distance needs alpha >= 1, got {alpha}")]
    CopulaDistanceRange { alpha: f64 },
    #[error("{id} needs alpha in (0, 2) excluding 1, got {alpha}; the measure is unbounded from alpha = 2 on, and alpha = 1 is the Shannon limit (use ns_shannon)")]
    NonsymAlphaRange { id: &'static str, alpha: f64 },
    #[error("{id} at alpha = 1 is the Shannon limit; use gns_shannon:{k}")]
    GenAlphaOne { id: &'static str, k: f64 },
    #[error("{id} needs k > -2 and alpha in (0, k+3) excluding 1, got alpha {alpha}, k {k}")]
    GenRange { id: &'static str, alpha: f64, k: f64 },
    #[error("gns_shannon needs k > -2, got {k}")]
    GenShannonK { k: f64 },
    #[error("{id} needs a copula density, which only checkerboards have; discretize the input first")]
    DensityUnavailable { id: String },
    #[error("phi contract {label:?} must vanish at 0, got {value}")]
    PhiNotZeroAtZero { label: String, value: f64 },
    #[error("phi contract {label:?} failed the convexity spot-check")]
    PhiNotConvex { label: String },
}

/// Which variable conditions which: XY measures how strongly Y depends on X
/// (built from d1 C), YX transposes the copula first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    XY,
    YX,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::XY => "xy",
            Direction::YX => "yx",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A caller-supplied convex function with phi(0) = 0, labeled for reports.
/// Convexity is the caller's contract; a seeded numeric spot-check runs as a
/// guardrail before any integration.
#[derive(Clone)]
pub struct PhiContract<T> {
    label: String,
    f: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T> PhiContract<T> {
    pub fn new(label: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply(&self, x: T) -> T {
        (self.f)(x)
    }
}

impl<T> fmt::Debug for PhiContract<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhiContract({:?})", self.label)
    }
}

/// The measure families. Parameters are validated by [`MeasureFamily::validate`],
/// called automatically by [`measure`].
#[derive(Debug, Clone)]
pub enum MeasureFamily<T> {
    /// k_alpha-normalized L^alpha distance between the conditional
    /// distribution v -> d1 C(u,v) and the independent one (alpha >= 1).
    TauAlpha { alpha: T },
    /// Unnormalized convex distance around d1 C - v.
    GenericPhi(PhiContract<T>),
    /// 12 times the L1 distance between C and the product copula.
    SWSigma,
    /// Square root of 90 times the squared L2 distance from the product.
    SWGamma,
    /// 4 times the sup distance from the product, over the lattice.
    SWKappa,
    /// Sobolev-seminorm measure mixing both partial derivatives.
    Sobolev,
    /// Renyi mutual information of order alpha on a checkerboard density.
    RenyiMI { alpha: T },
    /// Tsallis divergence of order alpha on a checkerboard density.
    Tsallis { alpha: T },
    /// L^alpha distance between the checkerboard density and 1.
    CopulaDistance { alpha: T },
    /// Shannon mutual information on a checkerboard density.
    ShannonMI,
    /// sqrt(1 - exp(-2 MI)): Shannon MI rescaled into [0,1].
    Linfoot,
    /// Nonsymmetric Renyi-type entropy of the conditional, alpha in (0,2).
    NonsymRenyi { alpha: T },
    /// Nonsymmetric Tsallis-type entropy, alpha in (0,2).
    NonsymTsallis { alpha: T },
    /// Nonsymmetric Shannon-type entropy, already in [0,1].
    NonsymShannon,
    /// Weighted generalization of the nonsymmetric Renyi entropy with
    /// reference weight (k+2) v^k; k > -2, alpha in (0, k+3).
    GenNonsymRenyi { alpha: T, k: T },
    /// Weighted generalization of the nonsymmetric Tsallis entropy.
    GenNonsymTsallis { alpha: T, k: T },
    /// Weighted generalization of the nonsymmetric Shannon entropy.
    GenNonsymShannon { k: T },
}

/// A measure family plus the direction it is evaluated in.
#[derive(Debug, Clone)]
pub struct MeasureSpec<T> {
    pub family: MeasureFamily<T>,
    pub direction: Direction,
}

impl<T> MeasureSpec<T> {
    pub fn new(family: MeasureFamily<T>, direction: Direction) -> Self {
        Self { family, direction }
    }
}

/// How a report's numbers were computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComputePath {
    /// Closed-form piecewise integration on a checkerboard.
    ExactCheckerboard,
    /// Exact-in-u sections with midpoint quadrature in v (or a 2D midpoint
    /// rule for measures of C itself).
    Quadrature,
}

impl ComputePath {
    pub fn as_str(self) -> &'static str {
        match self {
            ComputePath::ExactCheckerboard => "exact-checkerboard",
            ComputePath::Quadrature => "quadrature",
        }
    }
}

impl fmt::Display for ComputePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One computed measure value.
#[derive(Debug, Clone)]
pub struct MeasureReport<T> {
    pub spec: MeasureSpec<T>,
    /// Normalized value; for bounded families this lies in [0, 1].
    pub value: T,
    /// The defining integral (or transform of it) before normalization.
    pub raw_value: T,
    /// Resolution used: board resolution on the exact path, quadrature
    /// nodes per axis otherwise.
    pub grid: usize,
    pub path: ComputePath,
}

impl<T: Real> MeasureFamily<T> {
    /// Parse a stable measure id like `tau1`, `tau_alpha:1.5`,
    /// `gns_renyi:1.5:0`.
    pub fn parse(id: &str) -> Result<Self, MeasureError> {
        let mut parts = id.split(':');
        let head = parts.next().unwrap_or("");
        let args: Vec<&str> = parts.collect();
        let family = match (head, args.len()) {
            ("tau1", 0) => MeasureFamily::TauAlpha { alpha: T::one() },
            ("tau2", 0) => MeasureFamily::TauAlpha { alpha: T::real(2.0) },
            ("tau_alpha", 1) => MeasureFamily::TauAlpha { alpha: parse_num(id, args[0])? },
            ("sw_sigma", 0) => MeasureFamily::SWSigma,
            ("sw_gamma", 0) => MeasureFamily::SWGamma,
            ("sw_kappa", 0) => MeasureFamily::SWKappa,
            ("sobolev", 0) => MeasureFamily::Sobolev,
            ("renyi_mi", 1) => MeasureFamily::RenyiMI { alpha: parse_num(id, args[0])? },
            ("tsallis", 1) => MeasureFamily::Tsallis { alpha: parse_num(id, args[0])? },
            ("copula_distance", 1) => {
                MeasureFamily::CopulaDistance { alpha: parse_num(id, args[0])? }
            }
            ("shannon_mi", 0) => MeasureFamily::ShannonMI,
            ("linfoot", 0) => MeasureFamily::Linfoot,
            ("ns_renyi", 1) => MeasureFamily::NonsymRenyi { alpha: parse_num(id, args[0])? },
            ("ns_tsallis", 1) => MeasureFamily::NonsymTsallis { alpha: parse_num(id, args[0])? },
            ("ns_shannon", 0) => MeasureFamily::NonsymShannon,
            ("gns_renyi", 2) => MeasureFamily::GenNonsymRenyi {
                alpha: parse_num(id, args[0])?,
                k: parse_num(id, args[1])?,
            },
            ("gns_tsallis", 2) => MeasureFamily::GenNonsymTsallis {
                alpha: parse_num(id, args[0])?,
                k: parse_num(id, args[1])?,
            },
            ("gns_shannon", 1) => MeasureFamily::GenNonsymShannon { k: parse_num(id, args[0])? },
            _ => return Err(MeasureError::UnknownMeasure { id: id.to_string() }),
        };
        family.validate()?;
        Ok(family)
    }

    /// The stable id this family round-trips through.
    pub fn id(&self) -> String {
        match self {
            MeasureFamily::TauAlpha { alpha } => {
                let a = alpha.as_f64();
                if a == 1.0 {
                    "tau1".to_string()
                } else if a == 2.0 {
                    "tau2".to_string()
                } else {
                    format!("tau_alpha:{a}")
                }
            }
            MeasureFamily::GenericPhi(phi) => format!("phi:{}", phi.label()),
            MeasureFamily::SWSigma => "sw_sigma".to_string(),
            MeasureFamily::SWGamma => "sw_gamma".to_string(),
            MeasureFamily::SWKappa => "sw_kappa".to_string(),
            MeasureFamily::Sobolev => "sobolev".to_string(),
            MeasureFamily::RenyiMI { alpha } => format!("renyi_mi:{}", alpha.as_f64()),
            MeasureFamily::Tsallis { alpha } => format!("tsallis:{}", alpha.as_f64()),
            MeasureFamily::CopulaDistance { alpha } => {
                format!("copula_distance:{}", alpha.as_f64())
            }
            MeasureFamily::ShannonMI => "shannon_mi".to_string(),
            MeasureFamily::Linfoot => "linfoot".to_string(),
            MeasureFamily::NonsymRenyi { alpha } => format!("ns_renyi:{}", alpha.as_f64()),
            MeasureFamily::NonsymTsallis { alpha } => format!("ns_tsallis:{}", alpha.as_f64()),
            MeasureFamily::NonsymShannon => "ns_shannon".to_string(),
            MeasureFamily::GenNonsymRenyi { alpha, k } => {
                format!("gns_renyi:{}:{}", alpha.as_f64(), k.as_f64())
            }
            MeasureFamily::GenNonsymTsallis { alpha, k } => {
                format!("gns_tsallis:{}:{}", alpha.as_f64(), k.as_f64())
            }
            MeasureFamily::GenNonsymShannon { k } => format!("gns_shannon:{}", k.as_f64()),
        }
    }

    /// Check parameter ranges. Range tests are negated comparisons on
    /// purpose: a NaN parameter (which `parse` accepts as a float) must
    /// fail them too.
    #[allow(clippy::neg_cmp_op_on_partial_ord, clippy::collapsible_match)]
    pub fn validate(&self) -> Result<(), MeasureError> {
        let one = T::one();
        match self {
            MeasureFamily::TauAlpha { alpha } => {
                if !(*alpha >= one) {
                    return Err(MeasureError::TauAlphaRange { alpha: alpha.as_f64() });
                }
            }
            MeasureFamily::RenyiMI { alpha } => {
                if !(*alpha > T::zero()) || *alpha == one {
                    return Err(MeasureError::DensityAlphaRange {
                        id: "renyi_mi",
                        alpha: alpha.as_f64(),
                    });
                }
            }
            MeasureFamily::Tsallis { alpha } => {
                if !(*alpha > T::zero()) || *alpha == one {
                    return Err(MeasureError::DensityAlphaRange {
                        id: "tsallis",
                        alpha: alpha.as_f64(),
                    });
                }
            }
            MeasureFamily::CopulaDistance { alpha } => {
                if !(*alpha >= one) {
                    return Err(MeasureError::CopulaDistanceRange { alpha: alpha.as_f64() });
                }
            }
            MeasureFamily::NonsymRenyi { alpha } => {
                if !(*alpha > T::zero() && *alpha < T::real(2.0)) || *alpha == one {
                    return Err(MeasureError::NonsymAlphaRange {
                        id: "ns_renyi",
                        alpha: alpha.as_f64(),
                    });
                }
            }
            MeasureFamily::NonsymTsallis { alpha } => {
                if !(*alpha > T::zero() && *alpha < T::real(2.0)) || *alpha == one {
                    return Err(MeasureError::NonsymAlphaRange {
                        id: "ns_tsallis",
                        alpha: alpha.as_f64(),
                    });
                }
            }
            MeasureFamily::GenNonsymRenyi { alpha, k } => {
                validate_gen("gns_renyi", *alpha, *k)?;
            }
            MeasureFamily::GenNonsymTsallis { alpha, k } => {
                validate_gen("gns_tsallis", *alpha, *k)?;
            }
            MeasureFamily::GenNonsymShannon { k } => {
                if !(*k > T::real(-2.0)) {
                    return Err(MeasureError::GenShannonK { k: k.as_f64() });
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Whether the normalized value is contractually confined to [0, 1].
    pub fn is_bounded(&self) -> bool {
        matches!(
            self,
            MeasureFamily::TauAlpha { .. }
                | MeasureFamily::SWSigma
                | MeasureFamily::SWGamma
                | MeasureFamily::SWKappa
                | MeasureFamily::Sobolev
                | MeasureFamily::Linfoot
                | MeasureFamily::NonsymRenyi { .. }
                | MeasureFamily::NonsymTsallis { .. }
                | MeasureFamily::NonsymShannon
                | MeasureFamily::GenNonsymRenyi { .. }
                | MeasureFamily::GenNonsymTsallis { .. }
                | MeasureFamily::GenNonsymShannon { .. }
        )
    }

    /// Whether this family integrates the copula density (and therefore
    /// requires a checkerboard input).
    pub fn needs_density(&self) -> bool {
        matches!(
            self,
            MeasureFamily::RenyiMI { .. }
                | MeasureFamily::Tsallis { .. }
                | MeasureFamily::CopulaDistance { .. }
                | MeasureFamily::ShannonMI
                | MeasureFamily::Linfoot
        )
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate_gen<T: Real>(id: &'static str, alpha: T, k: T) -> Result<(), MeasureError> {
    if !(k > T::real(-2.0)) || !(alpha > T::zero() && alpha < k + T::real(3.0)) {
        return Err(MeasureError::GenRange { id, alpha: alpha.as_f64(), k: k.as_f64() });
    }
    if alpha == T::one() {
        return Err(MeasureError::GenAlphaOne { id, k: k.as_f64() });
    }
    Ok(())
}

fn parse_num<T: Real>(id: &str, token: &str) -> Result<T, MeasureError> {
    token
        .parse::<f64>()
        .map(T::real)
        .map_err(|_| MeasureError::BadMeasureNumber { id: id.to_string(), token: token.to_string() })
}

/// Normalization constant for the L^alpha conditional distance: the
/// reciprocal of its value on the comonotone copula,
/// ((alpha+1)(alpha+2)/2)^(1/alpha).
pub fn k_alpha<T: Real>(alpha: T) -> T {
    let one = T::one();
    let two = T::real(2.0);
    let base = (alpha + one) * (alpha + two) / two;
    if alpha == one {
        base
    } else if alpha == two {
        base.sqrt()
    } else {
        base.powf(alpha.recip())
    }
}

/// L1 form of the order-1 conditional distance with its own constant 3,
/// kept as an independent route for cross-checking the general
/// normalization path.
pub fn tau1_l1_form<T: Real>(
    spec: &CopulaSpec<T>,
    cfg: &GridConfig<T>,
) -> Result<T, MeasureError> {
    let three = T::real(3.0);
    if let CopulaSpec::Checkerboard(board) = spec {
        return Ok(three * tau_board_raw(board, false));
    }
    Ok(three * d1_quadrature(spec, cfg.quad_n, |p, v| (p - v).abs()))
}

/// Compute a measure report for a copula.
pub fn measure<T: Real>(
    input: &CopulaSpec<T>,
    spec: &MeasureSpec<T>,
    cfg: &GridConfig<T>,
) -> Result<MeasureReport<T>, MeasureError> {
    spec.family.validate()?;
    let oriented = match spec.direction {
        Direction::XY => input.clone(),
        Direction::YX => input.clone().transpose(),
    };
    let (raw_value, value, grid, path) = compute(&oriented, &spec.family, cfg)?;
    let value = if spec.family.is_bounded() { clamp_bounded(value) } else { value };
    Ok(MeasureReport { spec: spec.clone(), value, raw_value, grid, path })
}

/// Clamp rounding spill back into [0, 1]. Only values within a narrow band
/// of the range are touched; a genuine bound violation passes through and
/// fails the range tests instead of being masked.
fn clamp_bounded<T: Real>(value: T) -> T {
    if value < T::zero() && value >= -T::CLAMP_BAND {
        T::zero()
    } else if value > T::one() && value <= T::one() + T::CLAMP_BAND {
        T::one()
    } else {
        value
    }
}

type Computed<T> = (T, T, usize, ComputePath);

fn compute<T: Real>(
    spec: &CopulaSpec<T>,
    family: &MeasureFamily<T>,
    cfg: &GridConfig<T>,
) -> Result<Computed<T>, MeasureError> {
    let q = cfg.quad_n;
    let one = T::one();
    match family {
        MeasureFamily::TauAlpha { alpha } => {
            let a = *alpha;
            let two = T::real(2.0);
            let (raw, grid, path) = match spec {
                CopulaSpec::Checkerboard(b) if a == one || a == two => {
                    (tau_board_raw(b, a == two), b.n(), ComputePath::ExactCheckerboard)
                }
                _ => {
                    let raw = if a == one {
                        d1_quadrature(spec, q, |p, v| (p - v).abs())
                    } else if a == two {
                        d1_quadrature(spec, q, |p, v| {
                            let g = p - v;
                            g * g
                        })
                    } else {
                        d1_quadrature(spec, q, |p, v| (p - v).abs().powf(a))
                    };
                    (raw, q, ComputePath::Quadrature)
                }
            };
            let root = if a == one {
                raw
            } else if a == two {
                raw.sqrt()
            } else {
                raw.powf(a.recip())
            };
            Ok((raw, k_alpha(a) * root, grid, path))
        }
        MeasureFamily::GenericPhi(phi) => {
            spot_check_phi(phi)?;
            let raw = d1_quadrature(spec, q, |p, v| phi.apply(p - v));
            Ok((raw, raw, q, ComputePath::Quadrature))
        }
        MeasureFamily::SWSigma => {
            let raw = eval_quadrature(spec, q, |c, pi| (c - pi).abs());
            Ok((raw, T::real(12.0) * raw, q, ComputePath::Quadrature))
        }
        MeasureFamily::SWGamma => {
            let raw = eval_quadrature(spec, q, |c, pi| {
                let d = c - pi;
                d * d
            });
            Ok((raw, (T::real(90.0) * raw).sqrt(), q, ComputePath::Quadrature))
        }
        MeasureFamily::SWKappa => {
            let raw = lattice_sup(spec, q);
            Ok((raw, T::real(4.0) * raw, q, ComputePath::Quadrature))
        }
        MeasureFamily::Sobolev => {
            let (i1, i2, grid, path) = match spec {
                CopulaSpec::Checkerboard(b) => (
                    tau_board_raw(b, true),
                    tau_board_raw(&b.transpose(), true),
                    b.n(),
                    ComputePath::ExactCheckerboard,
                ),
                _ => {
                    let transposed = spec.clone().transpose();
                    let sq = |p: T, v: T| {
                        let g = p - v;
                        g * g
                    };
                    (
                        d1_quadrature(spec, q, sq),
                        d1_quadrature(&transposed, q, sq),
                        q,
                        ComputePath::Quadrature,
                    )
                }
            };
            let raw = i1 + i2;
            Ok((raw, (T::real(3.0) * raw).sqrt(), grid, path))
        }
        MeasureFamily::RenyiMI { alpha } => {
            let b = density_board(spec, family)?;
            let s = density_power_sum(b, *alpha);
            let raw = s.ln() / (*alpha - one);
            Ok((raw, raw, b.n(), ComputePath::ExactCheckerboard))
        }
        MeasureFamily::Tsallis { alpha } => {
            let b = density_board(spec, family)?;
            let s = density_power_sum(b, *alpha);
            let raw = (s - one) / (*alpha - one);
            Ok((raw, raw, b.n(), ComputePath::ExactCheckerboard))
        }
        MeasureFamily::CopulaDistance { alpha } => {
            let b = density_board(spec, family)?;
            let a = *alpha;
            let n2 = T::of_usize(b.n() * b.n());
            let raw = b
                .mass()
                .iter()
                .map(|&m| {
                    let dev = (m * n2 - one).abs();
                    if a == one {
                        dev
                    } else if a == T::real(2.0) {
                        dev * dev
                    } else {
                        dev.powf(a)
                    }
                })
                .sum::<T>()
                / n2;
            Ok((raw, raw, b.n(), ComputePath::ExactCheckerboard))
        }
        MeasureFamily::ShannonMI => {
            let b = density_board(spec, family)?;
            let raw = shannon_mi_board(b);
            Ok((raw, raw, b.n(), ComputePath::ExactCheckerboard))
        }
        MeasureFamily::Linfoot => {
            let b = density_board(spec, family)?;
            let mi = shannon_mi_board(b);
            let value = (one - (-T::real(2.0) * mi).exp()).max(T::zero()).sqrt();
            Ok((mi, value, b.n(), ComputePath::ExactCheckerboard))
        }
        MeasureFamily::NonsymRenyi { alpha } => {
            let a = *alpha;
            let s = d1_quadrature(spec, q, |p, v| pow_ratio(p, v, a));
            let raw = s.ln() / (a - one);
            let scale = -(a - one) / (T::real(2.0) - a).ln();
            Ok((raw, raw * scale, q, ComputePath::Quadrature))
        }
        MeasureFamily::NonsymTsallis { alpha } => {
            let a = *alpha;
            let s = d1_quadrature(spec, q, |p, v| pow_ratio(p, v, a));
            let raw = (s - one) / (a - one);
            Ok((raw, raw * (T::real(2.0) - a), q, ComputePath::Quadrature))
        }
        MeasureFamily::NonsymShannon => {
            let raw = d1_quadrature(spec, q, |p, v| {
                if p > T::zero() {
                    let r = p / v;
                    r * r.ln()
                } else {
                    T::zero()
                }
            });
            Ok((raw, raw, q, ComputePath::Quadrature))
        }
        MeasureFamily::GenNonsymRenyi { alpha, k } => {
            let (a, kk) = (*alpha, *k);
            let weight = kk + T::real(2.0);
            let expo = kk + one - a;
            let s = d1_quadrature(spec, q, |p, v| gns_integrand(p, v, weight, expo, a));
            let s_ref = gns_reference(q, weight, expo, a);
            let raw = s.ln() / (a - one);
            // alpha - 1 cancels between the raw value and its upper bound.
            let value = (s.ln() - s_ref.ln()) / (weight / (kk + T::real(3.0) - a)).ln();
            Ok((raw, value, q, ComputePath::Quadrature))
        }
        MeasureFamily::GenNonsymTsallis { alpha, k } => {
            let (a, kk) = (*alpha, *k);
            let weight = kk + T::real(2.0);
            let expo = kk + one - a;
            let s = d1_quadrature(spec, q, |p, v| gns_integrand(p, v, weight, expo, a));
            let s_ref = gns_reference(q, weight, expo, a);
            let raw = (s - one) / (a - one);
            let value = (s - s_ref) * (kk + T::real(3.0) - a) / (a - one);
            Ok((raw, value, q, ComputePath::Quadrature))
        }
        MeasureFamily::GenNonsymShannon { k } => {
            let kk = *k;
            let weight = kk + T::real(2.0);
            let raw = d1_quadrature(spec, q, |p, v| {
                if p > T::zero() {
                    weight * v.powf(kk) * p * (p / v).ln()
                } else {
                    T::zero()
                }
            });
            Ok((raw, raw * weight, q, ComputePath::Quadrature))
        }
    }
}

/// (p/v)^alpha with 0^alpha = 0; exponent fast paths keep the hot loops off
/// powf where the measure tables use integer-like alphas.
fn pow_ratio<T: Real>(p: T, v: T, alpha: T) -> T {
    if p <= T::zero() {
        return T::zero();
    }
    (p / v).powf(alpha)
}

fn pow_plain<T: Real>(p: T, alpha: T) -> T {
    if p <= T::zero() {
        return T::zero();
    }
    p.powf(alpha)
}

/// Weighted-power integrand of the generalized nonsymmetric family; kept as
/// a named function so the measure and its independence reference run the
/// exact same floating-point expression.
fn gns_integrand<T: Real>(p: T, v: T, weight: T, expo: T, alpha: T) -> T {
    weight * v.powf(expo) * pow_plain(p, alpha)
}

/// The same quadrature evaluated at the product copula, where the
/// conditional distribution is v itself. Normalizing against this instead
/// of the exact integral (which is 1) cancels the shared quadrature bias:
/// independence reports exactly 0 and the bounds are hit cleanly.
fn gns_reference<T: Real>(q: usize, weight: T, expo: T, alpha: T) -> T {
    let qn = T::of_usize(q);
    let half = T::real(0.5);
    let mut total = T::zero();
    for j in 0..q {
        let v = (T::of_usize(j) + half) / qn;
        total += gns_integrand(v, v, weight, expo, alpha);
    }
    total / qn
}

/// Integral over the unit square of g(d1 C(u,v), v): exact in u through the
/// step-function sections, midpoint rule with q nodes in v.
fn d1_quadrature<T: Real>(spec: &CopulaSpec<T>, q: usize, g: impl Fn(T, T) -> T) -> T {
    let qn = T::of_usize(q);
    let half = T::real(0.5);
    let mut total = T::zero();
    for j in 0..q {
        let v = (T::of_usize(j) + half) / qn;
        let section = d1_sections(spec, v);
        let inner: T = section.pieces().map(|(a, b, p)| (b - a) * g(p, v)).sum();
        total += inner;
    }
    total / qn
}

/// 2D midpoint quadrature of g(C(u,v), uv).
fn eval_quadrature<T: Real>(spec: &CopulaSpec<T>, q: usize, g: impl Fn(T, T) -> T) -> T {
    let qn = T::of_usize(q);
    let half = T::real(0.5);
    let mut total = T::zero();
    for i in 0..q {
        let u = (T::of_usize(i) + half) / qn;
        for j in 0..q {
            let v = (T::of_usize(j) + half) / qn;
            total += g(spec.eval_unchecked(u, v), u * v);
        }
    }
    total / (qn * qn)
}

/// Sup of |C - uv| over the (q+1)^2 lattice including boundaries; a lower
/// bound on the true sup with O(1/q) error (exact when C is piecewise
/// bilinear on a subgrid of the lattice).
fn lattice_sup<T: Real>(spec: &CopulaSpec<T>, q: usize) -> T {
    let qn = T::of_usize(q);
    let mut worst = T::zero();
    for i in 0..=q {
        let u = T::of_usize(i) / qn;
        for j in 0..=q {
            let v = T::of_usize(j) / qn;
            worst = worst.max((spec.eval_unchecked(u, v) - u * v).abs());
        }
    }
    worst
}

/// Exact integral over the square of |d1 C - v|^alpha for a checkerboard
/// and alpha in {1, 2}. Within each strip-i, cell-j rectangle the integrand
/// argument is linear in v, so the v-integral has a closed form; `alpha2`
/// switches between the quadratic and the absolute-value antiderivative.
fn tau_board_raw<T: Real>(board: &CheckerboardCopula<T>, alpha2: bool) -> T {
    let n = board.n();
    let nn = T::of_usize(n);
    let h = T::one() / nn;
    let third = T::real(3.0).recip();
    let half = T::real(0.5);
    let mut total = T::zero();
    for i in 0..n {
        let mut strip = T::zero();
        for j in 0..n {
            let g0 = nn * (board.cdf_at(i + 1, j) - board.cdf_at(i, j)) - T::of_usize(j) / nn;
            let g1 = nn * (board.cdf_at(i + 1, j + 1) - board.cdf_at(i, j + 1))
                - T::of_usize(j + 1) / nn;
            strip += if alpha2 {
                h * (g0 * g0 + g0 * g1 + g1 * g1) * third
            } else if g0 * g1 >= T::zero() {
                h * (g0.abs() + g1.abs()) * half
            } else {
                // The linear section crosses zero inside the cell; split at
                // the root.
                h * (g0 * g0 + g1 * g1) / (T::real(2.0) * (g0.abs() + g1.abs()))
            };
        }
        total += strip * h;
    }
    total
}

fn density_board<'a, T: Real>(
    spec: &'a CopulaSpec<T>,
    family: &MeasureFamily<T>,
) -> Result<&'a CheckerboardCopula<T>, MeasureError> {
    match spec {
        CopulaSpec::Checkerboard(b) => Ok(b),
        _ => Err(MeasureError::DensityUnavailable { id: family.id() }),
    }
}

fn density_power_sum<T: Real>(board: &CheckerboardCopula<T>, alpha: T) -> T {
    let n2 = T::of_usize(board.n() * board.n());
    board.mass().iter().map(|&m| pow_plain(m * n2, alpha)).sum::<T>() / n2
}

fn shannon_mi_board<T: Real>(board: &CheckerboardCopula<T>) -> T {
    let n2 = T::of_usize(board.n() * board.n());
    board
        .mass()
        .iter()
        .filter(|&&m| m > T::zero())
        .map(|&m| m * (m * n2).ln())
        .sum()
}

/// Seeded guardrail for caller-supplied phi: requires phi(0) = 0 and checks
/// the chord inequality on 100 random triples in [-1, 1].
fn spot_check_phi<T: Real>(phi: &PhiContract<T>) -> Result<(), MeasureError> {
    let at_zero = phi.apply(T::zero());
    if at_zero.abs() > T::EXACT_TOL {
        return Err(MeasureError::PhiNotZeroAtZero {
            label: phi.label().to_string(),
            value: at_zero.as_f64(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EC7);
    for _ in 0..100 {
        let mut xs = [0.0f64; 3];
        for x in &mut xs {
            *x = rng.random_range(-1.0..=1.0);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let [a, b, c] = xs.map(T::real);
        if c - a <= T::EXACT_TOL {
            continue;
        }
        let lambda = (b - a) / (c - a);
        let chord = (T::one() - lambda) * phi.apply(a) + lambda * phi.apply(c);
        let slack = T::real(1e-9) * (T::one() + chord.abs());
        if phi.apply(b) > chord + slack {
            return Err(MeasureError::PhiNotConvex { label: phi.label().to_string() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    type Spec = CopulaSpec<f64>;

    fn cfg(q: usize) -> GridConfig<f64> {
        GridConfig { quad_n: q, ..GridConfig::default() }
    }

    fn run(spec: &Spec, id: &str, q: usize) -> MeasureReport<f64> {
        let family = MeasureFamily::parse(id).unwrap();
        measure(spec, &MeasureSpec::new(family, Direction::XY), &cfg(q)).unwrap()
    }

    fn tent(theta: f64) -> Spec {
        Spec::tent(theta).unwrap()
    }

    fn diag_board(n: usize) -> Spec {
        CopulaSpec::Checkerboard(Spec::UpperBound.to_checkerboard(n))
    }

    #[test]
    fn normalization_constants_are_exact() {
        assert_eq!(k_alpha(1.0f64), 3.0);
        assert_eq!(k_alpha(2.0f64), 6.0f64.sqrt());
        assert!((k_alpha(1.5f64) - (2.5 * 3.5 / 2.0f64).powf(1.0 / 1.5)).abs() < 1e-15);
    }

    #[test]
    fn ids_round_trip() {
        for id in [
            "tau1",
            "tau2",
            "tau_alpha:1.5",
            "sw_sigma",
            "sw_gamma",
            "sw_kappa",
            "sobolev",
            "renyi_mi:1.5",
            "tsallis:0.5",
            "copula_distance:2",
            "shannon_mi",
            "linfoot",
            "ns_renyi:1.5",
            "ns_tsallis:0.5",
            "ns_shannon",
            "gns_renyi:1.5:0",
            "gns_tsallis:1.5:-0.5",
            "gns_shannon:1",
        ] {
            let family = MeasureFamily::<f64>::parse(id).unwrap();
            assert_eq!(family.id(), id);
        }
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(matches!(
            MeasureFamily::<f64>::parse("tau_alpha:0.5"),
            Err(MeasureError::TauAlphaRange { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("ns_renyi:2"),
            Err(MeasureError::NonsymAlphaRange { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("ns_tsallis:1"),
            Err(MeasureError::NonsymAlphaRange { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("gns_renyi:1:0"),
            Err(MeasureError::GenAlphaOne { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("gns_tsallis:3.5:0"),
            Err(MeasureError::GenRange { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("gns_shannon:-2"),
            Err(MeasureError::GenShannonK { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("renyi_mi:1"),
            Err(MeasureError::DensityAlphaRange { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("nope"),
            Err(MeasureError::UnknownMeasure { .. })
        ));
        assert!(matches!(
            MeasureFamily::<f64>::parse("tau_alpha:abc"),
            Err(MeasureError::BadMeasureNumber { .. })
        ));
    }

    #[test]
    fn tau_vanishes_at_independence_and_peaks_at_comonotone() {
        assert_eq!(run(&Spec::Independence, "tau1", 128).value, 0.0);
        assert_eq!(run(&Spec::Independence, "tau2", 128).value, 0.0);
        let m1 = run(&Spec::UpperBound, "tau1", 512);
        assert!((m1.value - 1.0).abs() < 1e-5, "tau1(M) = {}", m1.value);
        let m2 = run(&Spec::UpperBound, "tau2", 512);
        assert!((m2.value - 1.0).abs() < 1e-5);
        assert_eq!(m1.path, ComputePath::Quadrature);
    }

    #[test]
    fn tau_exact_board_values() {
        // The comonotone board smears mass over the diagonal cells, which
        // costs exactly 1/(2n) of the normalized order-1 distance.
        for n in [4, 16, 50] {
            let report = run(&diag_board(n), "tau1", 512);
            assert_eq!(report.path, ComputePath::ExactCheckerboard);
            assert_eq!(report.grid, n);
            assert!((report.value - (1.0 - 0.5 / n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_tent_hits_the_closed_form() {
        let spec = tent(0.3).transpose();
        let report = run(&spec, "tau1", 512);
        assert!((report.value - 0.58).abs() < 1e-4, "got {}", report.value);
        let two = run(&spec, "tau2", 512);
        let expected_sq = 3.0 * (0.3f64 - 0.5).powi(2) + 0.25;
        assert!((two.value * two.value - expected_sq).abs() < 1e-4);
    }

    #[test]
    fn tau1_l1_route_matches_normalized_route() {
        let board = CopulaSpec::Checkerboard(tent(0.37).to_checkerboard(16));
        let via_l1 = tau1_l1_form(&board, &cfg(512)).unwrap();
        let via_norm = run(&board, "tau1", 512).value;
        assert!((via_l1 - via_norm).abs() < 1e-15);
    }

    #[test]
    fn direction_yx_transposes() {
        let board = CopulaSpec::Checkerboard(tent(0.3).to_checkerboard(32));
        let family = MeasureFamily::parse("tau1").unwrap();
        let yx = measure(&board, &MeasureSpec::new(family, Direction::YX), &cfg(64)).unwrap();
        let xy_of_transpose = run(&board.transpose(), "tau1", 64);
        assert_eq!(yx.value, xy_of_transpose.value);
    }

    #[test]
    fn generic_phi_squares_match_the_closed_form() {
        let phi = MeasureFamily::GenericPhi(PhiContract::new("square", |x: f64| x * x));
        let report =
            measure(&Spec::UpperBound, &MeasureSpec::new(phi, Direction::XY), &cfg(512)).unwrap();
        assert!((report.raw_value - 1.0 / 6.0).abs() < 1e-6);
        let abs = MeasureFamily::GenericPhi(PhiContract::new("abs", |x: f64| x.abs()));
        let on_tent =
            measure(&tent(0.5), &MeasureSpec::new(abs, Direction::XY), &cfg(512)).unwrap();
        assert!((on_tent.raw_value - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn phi_guardrails_reject_bad_contracts() {
        let offset = MeasureFamily::GenericPhi(PhiContract::new("offset", |x: f64| x + 1.0));
        assert!(matches!(
            measure(&Spec::Independence, &MeasureSpec::new(offset, Direction::XY), &cfg(16)),
            Err(MeasureError::PhiNotZeroAtZero { .. })
        ));
        let concave = MeasureFamily::GenericPhi(PhiContract::new("concave", |x: f64| -x * x));
        assert!(matches!(
            measure(&Spec::Independence, &MeasureSpec::new(concave, Direction::XY), &cfg(16)),
            Err(MeasureError::PhiNotConvex { .. })
        ));
    }

    #[test]
    fn schweizer_wolff_distances_on_the_bounds() {
        for id in ["sw_sigma", "sw_gamma", "sw_kappa"] {
            assert!(run(&Spec::Independence, id, 128).value.abs() < 1e-12);
            let at_m = run(&Spec::UpperBound, id, 256).value;
            assert!((at_m - 1.0).abs() < 1e-3, "{id}(M) = {at_m}");
            let at_w = run(&Spec::LowerBound, id, 256).value;
            assert!((at_w - 1.0).abs() < 1e-3, "{id}(W) = {at_w}");
        }
        // The sup distance is attained at the center, which is a lattice
        // point, so kappa is exact there.
        assert_eq!(run(&Spec::UpperBound, "sw_kappa", 256).value, 1.0);
    }

    #[test]
    fn sobolev_combines_both_partials() {
        assert!(run(&Spec::Independence, "sobolev", 128).value.abs() < 1e-12);
        let board = CopulaSpec::Checkerboard(tent(0.35).to_checkerboard(32));
        let sob = run(&board, "sobolev", 128);
        assert_eq!(sob.path, ComputePath::ExactCheckerboard);
        let t2 = run(&board, "tau2", 128);
        let t2t = run(&board.transpose(), "tau2", 128);
        let identity = 0.5 * (t2.value * t2.value + t2t.value * t2t.value);
        assert!((sob.value * sob.value - identity).abs() < 1e-12);
        let on_tent = run(&tent(0.5), "sobolev", 512).value;
        assert!((on_tent - 0.625f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn density_measures_on_known_boards() {
        let pi = CopulaSpec::Checkerboard(CheckerboardCopula::uniform(8));
        for id in ["renyi_mi:1.5", "tsallis:1.5", "copula_distance:1", "shannon_mi", "linfoot"]
        {
            assert!(run(&pi, id, 64).value.abs() < 1e-12, "{id} at independence");
        }
        let diag = diag_board(2);
        assert!((run(&diag, "copula_distance:1", 64).value - 1.0).abs() < 1e-15);
        assert!((run(&diag, "shannon_mi", 64).value - 2.0f64.ln()).abs() < 1e-15);
        assert!((run(&diag, "renyi_mi:1.5", 64).value - 2.0f64.ln()).abs() < 1e-14);
        let linfoot = run(&diag, "linfoot", 64).value;
        assert!((linfoot - 0.75f64.sqrt()).abs() < 1e-14);
        let tsallis = run(&diag, "tsallis:1.5", 64).value;
        assert!((tsallis - 2.0 * (2.0f64.sqrt() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn density_measures_reject_singular_specs() {
        assert!(matches!(
            measure(
                &Spec::UpperBound,
                &MeasureSpec::new(MeasureFamily::parse("shannon_mi").unwrap(), Direction::XY),
                &cfg(64),
            ),
            Err(MeasureError::DensityUnavailable { .. })
        ));
    }

    #[test]
    fn nonsym_entropy_zero_at_independence() {
        for id in
            ["ns_renyi:1.5", "ns_tsallis:1.5", "ns_shannon", "gns_renyi:1.5:0", "gns_tsallis:1.5:0", "gns_shannon:0"]
        {
            let report = run(&Spec::Independence, id, 128);
            assert_eq!(report.value, 0.0, "{id} at independence");
        }
    }

    #[test]
    fn nonsym_entropy_peaks_on_comonotone() {
        for id in ["ns_shannon", "gns_renyi:1.5:0", "gns_tsallis:1.5:0", "gns_shannon:0"] {
            let report = run(&Spec::UpperBound, id, 8192);
            assert!((report.value - 1.0).abs() < 1e-3, "{id}(M) = {}", report.value);
        }
    }

    #[test]
    fn nonsym_power_entropies_approach_one_on_comonotone() {
        // At the comonotone copula these integrands behave like v^(1-alpha)
        // near v = 0, so the midpoint error decays like q^(alpha/2 - 1) and
        // a large node count is needed for tight agreement.
        for id in ["ns_renyi:1.5", "ns_tsallis:1.5"] {
            let report = run(&Spec::UpperBound, id, 1 << 20);
            assert!((report.value - 1.0).abs() < 1e-3, "{id}(M) = {}", report.value);
        }
    }

    #[test]
    fn nonsym_shannon_of_lower_bound_is_also_one() {
        let report = run(&Spec::LowerBound, "ns_shannon", 8192);
        assert!((report.value - 1.0).abs() < 1e-3);
    }

    #[test]
    fn general_family_reduces_to_the_special_one_at_k_minus_one() {
        let board = CopulaSpec::Checkerboard(tent(0.3).to_checkerboard(16));
        let gen = run(&board, "gns_renyi:1.5:-1", 256);
        let special = run(&board, "ns_renyi:1.5", 256);
        assert!((gen.value - special.value).abs() < 1e-12);
        let gen_t = run(&board, "gns_tsallis:0.5:-1", 256);
        let special_t = run(&board, "ns_tsallis:0.5", 256);
        assert!((gen_t.value - special_t.value).abs() < 1e-12);
        let gen_s = run(&board, "gns_shannon:-1", 256);
        let special_s = run(&board, "ns_shannon", 256);
        assert!((gen_s.value - special_s.value).abs() < 1e-12);
    }

    #[test]
    fn bounded_families_stay_in_range_on_builtins() {
        let specs: Vec<Spec> = vec![
            Spec::Independence,
            Spec::UpperBound,
            Spec::LowerBound,
            tent(0.3),
            tent(0.7).transpose(),
            tent(0.5).flip_y(),
            Spec::convex_mix(vec![0.5, 0.5], vec![Spec::UpperBound, Spec::LowerBound]).unwrap(),
        ];
        let ids = [
            "tau1",
            "tau2",
            "tau_alpha:1.5",
            "sw_sigma",
            "sw_gamma",
            "sw_kappa",
            "sobolev",
            "ns_renyi:1.5",
            "ns_tsallis:0.5",
            "ns_shannon",
            "gns_renyi:1.5:0.5",
            "gns_tsallis:2.5:1",
            "gns_shannon:0",
        ];
        for spec in &specs {
            for id in ids {
                // 256 nodes keeps the 2D midpoint overshoot of the sup-style
                // integrands inside the rounding clamp band.
                let report = run(spec, id, 256);
                assert!(
                    (0.0..=1.0).contains(&report.value),
                    "{id} out of range on {spec:?}: {}",
                    report.value
                );
            }
        }
    }
}
