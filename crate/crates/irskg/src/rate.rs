//! Closed-form secret-key rate: the rational kernel `Lambda(v)`, the
//! determinant form of conditional mutual information it compresses, and the
//! two-term total rate.
//!
//! [`cond_mi_determinant`] is the reference implementation built from
//! explicit sub-determinants of the 4x4 sample covariance; [`lambda_fn`] is
//! the closed rational expression, validated against it.

use crate::plan::ProbePlan;
use crate::scenario::{estimation_variances_at, ScenarioConfig};
use crate::stats::{build_delta, build_omega, CovarianceQuad, Regime, ScenarioContext};

/// Condition-number guard for the normalized covariance: above this the
/// determinant ratio is numerically meaningless.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum RateError {
    /// Eve's sub-block `x3 x4 - y2^2` is singular or indefinite.
    SingularEveBlock { det: f64 },
    /// The quad does not induce a usable positive-definite covariance
    /// (non-positive variance, eigenvalue at or below zero, or condition
    /// estimate beyond [`CONDITION_LIMIT`]).
    InvalidCovariance { detail: String },
}

impl std::fmt::Display for RateError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateError::SingularEveBlock { det } => {
                write!(f, "eavesdropper covariance block singular (det = {det})")
            }
            RateError::InvalidCovariance { detail } => write!(f, "invalid covariance: {detail}"),
        }
    }
}

impl std::error::Error for RateError {}

/// Secret-key rate split into its two probing contributions, in bits per
/// probing symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkgRate {
    pub direct_term: f64,
    pub reflected_term: f64,
    pub total: f64,
    pub regime: Regime,
}

/// Normalized (unit-diagonal) form of the quad.  All determinant ratios in
/// the conditional MI are scale-free, so working on the correlation-shaped
/// matrix avoids mixing the wildly different physical scales of the four
/// variances into the conditioning estimate.
struct NormalizedQuad {
    r1: f64,
    r2: f64,
    r3: f64,
    r4: f64,
}

fn normalize(v: &CovarianceQuad) -> Result<NormalizedQuad, RateError> {
    for (name, x) in [("x1", v.x1), ("x2", v.x2), ("x3", v.x3), ("x4", v.x4)] {
        if !(x > 0.0) || !x.is_finite() {
            return Err(RateError::InvalidCovariance {
                detail: format!("self-variance {name} = {x} must be positive and finite"),
            });
        }
    }
    Ok(NormalizedQuad {
        r1: v.y1 / (v.x1 * v.x2).sqrt(),
        r2: v.y2 / (v.x3 * v.x4).sqrt(),
        r3: v.y3 / (v.x1 * v.x3).sqrt(),
        r4: v.y4 / (v.x2 * v.x4).sqrt(),
    })
}

/// Correlation-shaped 4x4 matrix in (a, b, ae, be) order.  `y3` normalizes
/// differently in rows a and b because the two legitimate variances differ.
fn normalized_matrix(v: &CovarianceQuad, n: &NormalizedQuad) -> nalgebra::Matrix4<f64> {
    let r3b = v.y3 / (v.x2 * v.x3).sqrt();
    let r4a = v.y4 / (v.x1 * v.x4).sqrt();
    nalgebra::Matrix4::new(
        1.0, n.r1, n.r3, r4a, //
        n.r1, 1.0, r3b, n.r4, //
        n.r3, r3b, 1.0, n.r2, //
        r4a, n.r4, n.r2, 1.0,
    )
}

fn check_conditioning(v: &CovarianceQuad, n: &NormalizedQuad) -> Result<(), RateError> {
    let m = normalized_matrix(v, n);
    let eig = m.symmetric_eigen().eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(RateError::InvalidCovariance {
            detail: format!("normalized covariance eigenvalue {min} <= 0"),
        });
    }
    if max / min > CONDITION_LIMIT {
        return Err(RateError::InvalidCovariance {
            detail: format!("condition estimate {:e} beyond limit", max / min),
        });
    }
    Ok(())
}

/// Conditional mutual information `I(s_a; s_b | s_ae, s_be)` in bits, from
/// the determinant ratio of explicit sub-matrices of the quad's covariance.
///
/// Evaluated on the normalized matrix: the scale factors of the four
/// sub-determinants cancel exactly in the ratio.
pub fn cond_mi_determinant(v: &CovarianceQuad) -> Result<f64, RateError> {
    let n = normalize(v)?;
    check_conditioning(v, &n)?;
    let det2 = |a: f64, b: f64, c: f64| -> f64 {
        // det [[1, a, b], [a, 1, c], [b, c, 1]] written out
        1.0 + 2.0 * a * b * c - a * a - b * b - c * c
    };
    // rows (a, ae, be) and (b, ae, be) of the normalized matrix
    let r4a = v.y4 / (v.x1 * v.x4).sqrt();
    let r3b = v.y3 / (v.x2 * v.x3).sqrt();
    let det_a = det2(n.r3, r4a, n.r2);
    let det_b = det2(r3b, n.r4, n.r2);
    let det_e = 1.0 - n.r2 * n.r2;
    let det_full = normalized_matrix(v, &n).determinant();
    if det_e <= 0.0 {
        return Err(RateError::SingularEveBlock { det: det_e * v.x3 * v.x4 });
    }
    if det_full <= 0.0 || det_a <= 0.0 || det_b <= 0.0 {
        return Err(RateError::InvalidCovariance {
            detail: format!("nonpositive sub-determinant (full={det_full}, a={det_a}, b={det_b})"),
        });
    }
    Ok((det_a.log2() + det_b.log2()) - (det_e.log2() + det_full.log2()))
}

/// The closed rational kernel whose `log2` is the conditional mutual
/// information, evaluated exactly as the closed form states it.
pub fn lambda_fn(v: &CovarianceQuad) -> Result<f64, RateError> {
    let n = normalize(v)?;
    check_conditioning(v, &n)?;
    let (x1, x2, x3, x4) = (v.x1, v.x2, v.x3, v.x4);
    let (y1, y2, y3, y4) = (v.y1, v.y2, v.y3, v.y4);
    let eve = x3 * x4 - y2 * y2;
    if eve <= 0.0 {
        return Err(RateError::SingularEveBlock { det: eve });
    }
    let tail = 2.0 * y2 * y3 * y4 - y4 * y4 * x3 - y3 * y3 * x4;
    let num = (x1 * eve + tail) * (x2 * eve + tail);
    let den = eve * ((x1 + x2 - 2.0 * y1) * tail - eve * (y1 * y1 - x1 * x2));
    if !(den > 0.0) {
        return Err(RateError::InvalidCovariance {
            detail: format!("nonpositive denominator {den}"),
        });
    }
    Ok(num / den)
}

/// Total secret-key rate for raw probing times, without plan validation.
///
/// This is the smooth function of `(t_d, t_s)` the optimizer models; callers
/// holding a validated [`ProbePlan`] use [`skg_rate`].
pub fn skg_rate_at(
    ctx: &ScenarioContext,
    t_d: f64,
    t_s: f64,
    regime: Regime,
    scn: &ScenarioConfig,
) -> Result<SkgRate, RateError> {
    if !(t_d > 0.0) || !(t_s > 0.0) {
        return Err(RateError::InvalidCovariance {
            detail: format!("probe times must be positive (t_d={t_d}, t_s={t_s})"),
        });
    }
    let v = estimation_variances_at(scn, t_d, t_s);
    let direct = lambda_fn(&build_omega(ctx, &v))?.log2().max(0.0) / (2.0 * t_d);
    let reflected = lambda_fn(&build_delta(ctx, &v, regime))?.log2().max(0.0) / (2.0 * t_s);
    Ok(SkgRate { direct_term: direct, reflected_term: reflected, total: direct + reflected, regime })
}

/// Total secret-key rate of a validated plan:
/// `log2 Lambda(omega) / (2 T_d) + log2 Lambda(delta) / (2 T_s)`.
///
/// Rounds are identically distributed, so the per-round sum collapses into
/// the single `1 / (2 T_s)` weight.
pub fn skg_rate(scn: &ScenarioConfig, plan: &ProbePlan, regime: Regime) -> Result<SkgRate, RateError> {
    let ctx = ScenarioContext::new(scn);
    skg_rate_at(&ctx, plan.t_d, plan.t_s, regime, scn)
}
