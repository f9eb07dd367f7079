//! Per-flow utility families and network utility aggregation.
//!
//! Four families are supported, one per slice: linear (revenue), sigmoid
//! (QoS threshold), polynomial with exponent in (0, 1] (delay-sensitive,
//! concave) and logarithmic (best-effort). Mixing sigmoid slices with
//! the concave families makes the total network utility non-concave,
//! which is what the solvers in this crate are built to handle.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::model::RateAllocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    Linear,
    Sigmoid,
    Polynomial,
    Logarithmic,
}

impl UtilityKind {
    pub fn name(self) -> &'static str {
        match self {
            UtilityKind::Linear => "linear",
            UtilityKind::Sigmoid => "sigmoid",
            UtilityKind::Polynomial => "polynomial",
            UtilityKind::Logarithmic => "logarithmic",
        }
    }
}

/// One utility function `U(r)` parameterised by `(alpha, beta)`:
///
/// * linear:      `alpha * r + beta`
/// * sigmoid:     `1 / (1 + exp(-alpha * (r - beta)))`
/// * polynomial:  `alpha * r^beta`, `beta` in (0, 1]
/// * logarithmic: `ln(alpha * r + beta)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityError {
    /// Logarithm argument `alpha * r + beta` was not strictly positive.
    LogDomain { rate: f64, argument: f64 },
    /// Spec parameters violate the family's constraints.
    InvalidSpec {
        kind: UtilityKind,
        reason: &'static str,
    },
    /// Allocation shape does not match the parameter set.
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for UtilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityError::LogDomain { rate, argument } => write!(
                f,
                "logarithmic utility undefined at rate {rate} (argument {argument})"
            ),
            UtilityError::InvalidSpec { kind, reason } => {
                write!(f, "invalid {} spec: {reason}", kind.name())
            }
            UtilityError::DimensionMismatch { expected, got } => {
                write!(f, "expected {expected} slices, got {got}")
            }
        }
    }
}

impl core::error::Error for UtilityError {}

impl UtilitySpec {
    pub fn new(kind: UtilityKind, alpha: f64, beta: f64) -> Result<Self, UtilityError> {
        let spec = UtilitySpec { kind, alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), UtilityError> {
        let fail = |reason| {
            Err(UtilityError::InvalidSpec {
                kind: self.kind,
                reason,
            })
        };
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return fail("parameters must be finite");
        }
        match self.kind {
            UtilityKind::Linear => Ok(()),
            UtilityKind::Sigmoid => {
                if self.alpha <= 0.0 {
                    return fail("alpha must be positive");
                }
                Ok(())
            }
            UtilityKind::Polynomial => {
                if !(self.beta > 0.0 && self.beta <= 1.0) {
                    return fail("beta must lie in (0, 1]");
                }
                Ok(())
            }
            UtilityKind::Logarithmic => {
                // alpha*r + beta must stay positive over all r >= 0.
                if self.beta <= 0.0 {
                    return fail("beta must be positive");
                }
                if self.alpha < 0.0 {
                    return fail("alpha must be non-negative");
                }
                Ok(())
            }
        }
    }
}

/// One [`UtilitySpec`] per slice, in slice order.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityParams {
    specs: Vec<UtilitySpec>,
}

impl UtilityParams {
    pub fn new(specs: Vec<UtilitySpec>) -> Result<Self, UtilityError> {
        for spec in &specs {
            spec.validate()?;
        }
        Ok(UtilityParams { specs })
    }

    /// The default evaluation parameters: slices 1..4 are linear,
    /// sigmoid, polynomial and logarithmic, normalised so that every
    /// family evaluates to roughly 1.0 at 750 Mbps.
    pub fn default_four_slices() -> Self {
        UtilityParams {
            specs: vec![
                UtilitySpec {
                    kind: UtilityKind::Linear,
                    alpha: 0.00133,
                    beta: 0.0,
                },
                UtilitySpec {
                    kind: UtilityKind::Sigmoid,
                    alpha: 0.08,
                    beta: 350.0,
                },
                UtilitySpec {
                    kind: UtilityKind::Polynomial,
                    alpha: 0.03651,
                    beta: 0.5,
                },
                UtilitySpec {
                    kind: UtilityKind::Logarithmic,
                    alpha: 0.00229,
                    beta: 1.0,
                },
            ],
        }
    }

    pub fn slice_count(&self) -> usize {
        self.specs.len()
    }

    pub fn spec(&self, slice: usize) -> &UtilitySpec {
        &self.specs[slice]
    }

    pub fn specs(&self) -> &[UtilitySpec] {
        &self.specs
    }
}

/// Utility of a single flow at rate `rate` (Mbps).
pub fn flow_utility(spec: &UtilitySpec, rate: f64) -> Result<f64, UtilityError> {
    match spec.kind {
        UtilityKind::Linear => Ok(spec.alpha * rate + spec.beta),
        UtilityKind::Sigmoid => Ok(1.0 / (1.0 + math::exp(-spec.alpha * (rate - spec.beta)))),
        UtilityKind::Polynomial => Ok(spec.alpha * math::pow(rate, spec.beta)),
        UtilityKind::Logarithmic => {
            let argument = spec.alpha * rate + spec.beta;
            if argument <= 0.0 {
                return Err(UtilityError::LogDomain { rate, argument });
            }
            Ok(math::ln(argument))
        }
    }
}

/// Derivative dU/dr, used by the gradient ascent.
///
/// For the polynomial family with exponent < 1 the slope diverges as
/// `rate -> 0`; callers keep iterates strictly inside the box.
pub fn flow_utility_slope(spec: &UtilitySpec, rate: f64) -> Result<f64, UtilityError> {
    match spec.kind {
        UtilityKind::Linear => Ok(spec.alpha),
        UtilityKind::Sigmoid => {
            let s = 1.0 / (1.0 + math::exp(-spec.alpha * (rate - spec.beta)));
            Ok(spec.alpha * s * (1.0 - s))
        }
        UtilityKind::Polynomial => Ok(spec.alpha * spec.beta * math::pow(rate, spec.beta - 1.0)),
        UtilityKind::Logarithmic => {
            let argument = spec.alpha * rate + spec.beta;
            if argument <= 0.0 {
                return Err(UtilityError::LogDomain { rate, argument });
            }
            Ok(spec.alpha / argument)
        }
    }
}

/// Second derivative d2U/dr2, used to precondition the gradient ascent.
///
/// Only the sigmoid is non-concave (positive curvature below its
/// inflection); the polynomial curvature diverges as `rate -> 0`.
pub fn flow_utility_curvature(spec: &UtilitySpec, rate: f64) -> Result<f64, UtilityError> {
    match spec.kind {
        UtilityKind::Linear => Ok(0.0),
        UtilityKind::Sigmoid => {
            let s = 1.0 / (1.0 + math::exp(-spec.alpha * (rate - spec.beta)));
            Ok(spec.alpha * spec.alpha * s * (1.0 - s) * (1.0 - 2.0 * s))
        }
        UtilityKind::Polynomial => {
            Ok(spec.alpha * spec.beta * (spec.beta - 1.0) * math::pow(rate, spec.beta - 2.0))
        }
        UtilityKind::Logarithmic => {
            let argument = spec.alpha * rate + spec.beta;
            if argument <= 0.0 {
                return Err(UtilityError::LogDomain { rate, argument });
            }
            Ok(-spec.alpha * spec.alpha / (argument * argument))
        }
    }
}

/// Total network utility: the sum of per-flow utilities over all slices
/// and paths.
pub fn total_utility(
    params: &UtilityParams,
    allocation: &RateAllocation,
) -> Result<f64, UtilityError> {
    if params.slice_count() != allocation.slice_count() {
        return Err(UtilityError::DimensionMismatch {
            expected: params.slice_count(),
            got: allocation.slice_count(),
        });
    }
    let mut total = 0.0;
    for i in 0..allocation.slice_count() {
        let spec = params.spec(i);
        for j in 0..allocation.path_count() {
            total += flow_utility(spec, allocation.rate(i, j))?;
        }
    }
    Ok(total)
}

/// Utility change when moving a flow from `rate` to `rate + step`.
pub fn utility_delta(spec: &UtilitySpec, rate: f64, step: f64) -> Result<f64, UtilityError> {
    Ok(flow_utility(spec, rate + step)? - flow_utility(spec, rate)?)
}
