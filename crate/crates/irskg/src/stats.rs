//! Second-order statistics of the probing samples: temporal correlation
//! coefficients between rounds and the covariance parameter vectors of the
//! direct and reflected sample quadruples.

use nalgebra::DMatrix;

use crate::geometry::{spatial_correlation, CorrelationMatrix};
use crate::plan::ProbePlan;
use crate::scenario::{
    estimation_variances_at, noise_power, path_gain, spatial_rho, EstimationVariances, Link,
    NodePair, ScenarioConfig,
};

/// Surface phase-shift regime: one shared random phase per round (`Eps`) or
/// independent random phases per element per round (`Rps`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Eps,
    Rps,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Eps => "eps",
            Regime::Rps => "rps",
        }
    }
}

/// `tr{R_j o R_i}` with the Hadamard product: the sum of products of
/// diagonal entries, carrying both `kappa` scales.
pub fn trace_hadamard(r_i: &CorrelationMatrix, r_j: &CorrelationMatrix) -> f64 {
    assert_eq!(r_i.dim(), r_j.dim(), "correlation matrices must share dimensions");
    let mut acc = 0.0;
    for n in 0..r_i.dim() {
        acc += r_i.entries[(n, n)] * r_j.entries[(n, n)];
    }
    r_i.kappa * r_j.kappa * acc
}

/// `tr{R_j R_i}` with the matrix product, carrying both `kappa` scales.
pub fn trace_product(r_i: &CorrelationMatrix, r_j: &CorrelationMatrix) -> f64 {
    assert_eq!(r_i.dim(), r_j.dim(), "correlation matrices must share dimensions");
    let mut acc = 0.0;
    for i in 0..r_i.dim() {
        for j in 0..r_i.dim() {
            acc += r_i.entries[(i, j)] * r_j.entries[(j, i)];
        }
    }
    r_i.kappa * r_j.kappa * acc
}

/// Both traces of a pair of surface covariance matrices; the phase regime
/// selects which one enters a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePair {
    pub hadamard: f64,
    pub product: f64,
}

impl TracePair {
    pub fn select(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Eps => self.product,
            Regime::Rps => self.hadamard,
        }
    }
}

/// Temporal correlation between two probing rounds of one coherence block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationCoefficient {
    pub value: f64,
    pub regime: Regime,
    pub with_direct: bool,
}

/// Correlation between two rounds when the direct path is left in the
/// samples: `beta / (beta + trace + sigma_hat^2)`.
pub fn corr_with_direct(
    regime: Regime,
    beta: f64,
    traces: TracePair,
    sigma_hat2: f64,
) -> CorrelationCoefficient {
    let value = if beta == 0.0 { 0.0 } else { beta / (beta + traces.select(regime) + sigma_hat2) };
    CorrelationCoefficient { value, regime, with_direct: true }
}

/// Correlation between two rounds of direct-subtracted samples:
/// `sigma_hat_step1^2 / (trace + sigma_hat_z^2)`.
///
/// The numerator is the variance of the step-one estimation noise, which is
/// subtracted from every round of the block and is therefore common to all
/// of them.
pub fn corr_without_direct(
    regime: Regime,
    sigma_hat_step1: f64,
    traces: TracePair,
    sigma_hat_z2: f64,
) -> CorrelationCoefficient {
    let value = if sigma_hat_step1 == 0.0 {
        0.0
    } else {
        sigma_hat_step1 / (traces.select(regime) + sigma_hat_z2)
    };
    CorrelationCoefficient { value, regime, with_direct: false }
}

/// The eight second-order parameters of a sample quadruple
/// `(s_a, s_b, s_ae, s_be)`: self-variances `x1..x4` and the cross
/// correlations `y1` (a-b), `y2` (ae-be), `y3` (legitimate-ae, shared by a
/// and b) and `y4` (legitimate-be).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceQuad {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub y4: f64,
}

impl CovarianceQuad {
    /// The induced 4x4 covariance matrix in (a, b, ae, be) order.  The
    /// legitimate samples share one channel realization, so rows a and b
    /// carry the same cross terms toward Eve.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                self.x1, self.y1, self.y3, self.y4, //
                self.y1, self.x2, self.y3, self.y4, //
                self.y3, self.y3, self.x3, self.y2, //
                self.y4, self.y4, self.y2, self.x4,
            ],
        )
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.to_matrix()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn as_array(&self) -> [f64; 8] {
        [self.x1, self.x2, self.x3, self.x4, self.y1, self.y2, self.y3, self.y4]
    }

    pub const FIELD_NAMES: [&'static str; 8] = ["x1", "x2", "x3", "x4", "y1", "y2", "y3", "y4"];
}

/// Scenario-level constants every closed form consumes, precomputed once:
/// path gains of the direct links, surface covariance scales, inter-node
/// correlation coefficients, the unit-kernel traces, and receiver noise.
#[derive(Debug, Clone)]
pub struct ScenarioContext {
    pub beta_ab: f64,
    pub beta_ae: f64,
    pub beta_be: f64,
    pub kappa_ar: f64,
    pub kappa_br: f64,
    pub kappa_er: f64,
    pub rho_ab: f64,
    pub rho_ae: f64,
    pub rho_be: f64,
    /// Unit-kernel traces (`kappa = 1` on both sides).
    pub unit_traces: TracePair,
    pub n_elements: usize,
    pub sigma2: f64,
    pub power_a_w: f64,
    pub power_b_w: f64,
}

impl ScenarioContext {
    pub fn new(scn: &ScenarioConfig) -> Self {
        let r = spatial_correlation(&scn.irs);
        let area = scn.irs.element_area();
        let unit_traces =
            TracePair { hadamard: trace_hadamard(&r, &r), product: trace_product(&r, &r) };
        ScenarioContext {
            beta_ab: path_gain(scn, Link::Ab),
            beta_ae: path_gain(scn, Link::Ae),
            beta_be: path_gain(scn, Link::Be),
            kappa_ar: path_gain(scn, Link::Ar) * area,
            kappa_br: path_gain(scn, Link::Rb) * area,
            kappa_er: path_gain(scn, Link::Re) * area,
            rho_ab: spatial_rho(scn, NodePair::Ab),
            rho_ae: spatial_rho(scn, NodePair::Ae),
            rho_be: spatial_rho(scn, NodePair::Be),
            unit_traces,
            n_elements: scn.irs.element_count(),
            sigma2: noise_power(scn).sigma2_a,
            power_a_w: scn.power_a_w,
            power_b_w: scn.power_b_w,
        }
    }

    /// Kappa-scaled trace pair for a pair of surface links.
    pub fn traces(&self, kappa_i: f64, kappa_j: f64) -> TracePair {
        TracePair {
            hadamard: kappa_i * kappa_j * self.unit_traces.hadamard,
            product: kappa_i * kappa_j * self.unit_traces.product,
        }
    }

    /// Traces of the legitimate pair (Alice-surface, surface-Bob), the ones
    /// entering the temporal-correlation constraint.
    pub fn traces_ab(&self) -> TracePair {
        self.traces(self.kappa_ar, self.kappa_br)
    }

    /// Temporal correlation of the direct-subtracted samples at Alice and at
    /// Bob for raw times, the quantities capped by the optimizer.
    pub fn sample_correlations(&self, regime: Regime, t_d: f64, t_s: f64) -> (f64, f64) {
        let v = EstimationVariancesLite::at(self, t_d, t_s);
        let tr = self.traces_ab();
        let rho_a = corr_without_direct(regime, v.direct_a2, tr, v.combined_za).value;
        let rho_b = corr_without_direct(regime, v.direct_b1, tr, v.combined_zb).value;
        (rho_a, rho_b)
    }
}

/// Estimation variances computed from the context alone (avoids rebuilding
/// the scenario-derived constants in optimizer-hot paths).
struct EstimationVariancesLite {
    direct_a2: f64,
    direct_b1: f64,
    combined_za: f64,
    combined_zb: f64,
}

impl EstimationVariancesLite {
    fn at(ctx: &ScenarioContext, t_d: f64, t_s: f64) -> Self {
        let direct_a2 = ctx.sigma2 / (ctx.power_b_w * t_d);
        let direct_b1 = ctx.sigma2 / (ctx.power_a_w * t_d);
        EstimationVariancesLite {
            direct_a2,
            direct_b1,
            combined_za: direct_a2 + ctx.sigma2 / (ctx.power_b_w * t_s),
            combined_zb: direct_b1 + ctx.sigma2 / (ctx.power_a_w * t_s),
        }
    }
}

/// Covariance parameters of the direct-probe quadruple
/// `(h_hat_a, h_hat_b, h_hat_ae, h_hat_be)`.
///
/// The legitimate estimates both observe the same reciprocal coefficient, so
/// their cross term is the full channel variance; Eve's cross terms carry
/// the Bessel coefficient of the node pair that differs between the two
/// channels.
pub fn build_omega(ctx: &ScenarioContext, v: &EstimationVariances) -> CovarianceQuad {
    let s_ab = ctx.beta_ab;
    let s_ae = ctx.beta_ae;
    let s_be = ctx.beta_be;
    CovarianceQuad {
        x1: s_ab + v.direct_a2,
        x2: s_ab + v.direct_b1,
        x3: s_ae + v.direct_e1,
        x4: s_be + v.direct_e2,
        y1: s_ab,
        y2: ctx.rho_ab * (s_ae * s_be).sqrt(),
        y3: ctx.rho_be * (s_ae * s_ab).sqrt(),
        y4: ctx.rho_ae * (s_ab * s_be).sqrt(),
    }
}

/// Covariance parameters of the direct-subtracted reflected quadruple
/// `(h_a^p, h_b^p, h_ae^p, h_be^p)`.
///
/// These are the exact second moments of the bilinear cascade samples under
/// the correlated channel model: products of two inter-node correlation
/// coefficients enter alongside the single-coefficient terms, and each
/// self-variance carries a `1 + rho^2` factor from the pairing of the two
/// correlated vectors inside one cascade.  [`build_delta_leading_order`]
/// drops those second-order products.
pub fn build_delta(ctx: &ScenarioContext, v: &EstimationVariances, regime: Regime) -> CovarianceQuad {
    delta_parts(ctx, v, regime, true)
}

/// Leading-order variant of [`build_delta`]: keeps only terms linear in the
/// inter-node correlation coefficients.  Adequate when all `rho` products
/// are negligible; the Monte Carlo oracle resolves any doubt.
pub fn build_delta_leading_order(
    ctx: &ScenarioContext,
    v: &EstimationVariances,
    regime: Regime,
) -> CovarianceQuad {
    delta_parts(ctx, v, regime, false)
}

fn delta_parts(
    ctx: &ScenarioContext,
    v: &EstimationVariances,
    regime: Regime,
    exact: bool,
) -> CovarianceQuad {
    let tr_unit = ctx.unit_traces.select(regime);
    let (kar, kbr, ker) = (ctx.kappa_ar, ctx.kappa_br, ctx.kappa_er);
    let (rab, rae, rbe) = (ctx.rho_ab, ctx.rho_ae, ctx.rho_be);
    let t_ab = kar * kbr * tr_unit;
    let t_ae = kar * ker * tr_unit;
    let t_be = kbr * ker * tr_unit;
    // second-order corrections from the joint correlation of the two vectors
    // inside each cascade
    let (q_ab, q_ae, q_be) = if exact { (rab * rab, rae * rae, rbe * rbe) } else { (0.0, 0.0, 0.0) };
    let (c2, c3, c4) =
        if exact { (rae * rbe, rab * rae, rab * rbe) } else { (0.0, 0.0, 0.0) };
    CovarianceQuad {
        x1: (1.0 + q_ab) * t_ab + v.combined_za,
        x2: (1.0 + q_ab) * t_ab + v.combined_zb,
        x3: (1.0 + q_ae) * t_ae + v.combined_zae,
        x4: (1.0 + q_be) * t_be + v.combined_zbe,
        y1: (1.0 + q_ab) * t_ab,
        y2: (rab + c2) * (kar * kbr).sqrt() * ker * tr_unit,
        y3: (rbe + c3) * (ker * kbr).sqrt() * kar * tr_unit,
        y4: (rae + c4) * (ker * kar).sqrt() * kbr * tr_unit,
    }
}

/// Convenience wrappers taking the scenario and a validated plan.
pub fn omega_quad(scn: &ScenarioConfig, plan: &ProbePlan) -> CovarianceQuad {
    let ctx = ScenarioContext::new(scn);
    build_omega(&ctx, &estimation_variances_at(scn, plan.t_d, plan.t_s))
}

pub fn delta_quad(scn: &ScenarioConfig, plan: &ProbePlan, regime: Regime) -> CovarianceQuad {
    let ctx = ScenarioContext::new(scn);
    build_delta(&ctx, &estimation_variances_at(scn, plan.t_d, plan.t_s), regime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::IrsGeometry;
    use crate::scenario::estimation_variances;
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 0.299_792_458;

    fn unit_corr(n: usize, kappa: f64) -> CorrelationMatrix {
        CorrelationMatrix { entries: DMatrix::identity(n, n), kappa }
    }

    #[test]
    fn hadamard_trace_of_unit_diagonals() {
        let a = unit_corr(4, 1.0);
        assert_relative_eq!(trace_hadamard(&a, &a), 4.0);
        let b = unit_corr(10, 2.0);
        let c = unit_corr(10, 3.0);
        assert_relative_eq!(trace_hadamard(&b, &c), 60.0);
    }

    #[test]
    fn hadamard_trace_large_grid() {
        let g = IrsGeometry::square(30, 0.5, LAMBDA).unwrap();
        let r = spatial_correlation(&g);
        let ri = CorrelationMatrix { entries: r.entries.clone(), kappa: 2.5e-6 };
        let rj = CorrelationMatrix { entries: r.entries.clone(), kappa: 4.0e-9 };
        assert_relative_eq!(trace_hadamard(&ri, &rj), 2.5e-6 * 4.0e-9 * 900.0, max_relative = 1e-12);
    }

    #[test]
    fn product_trace_identity_and_rank_one() {
        let a = unit_corr(4, 1.0);
        assert_relative_eq!(trace_product(&a, &a), 4.0);
        // all-ones kernel: J*J = n*J, so tr = kappa_i kappa_j n^2
        let n = 6;
        let ones = CorrelationMatrix { entries: DMatrix::from_element(n, n, 1.0), kappa: 0.5 };
        let ones2 = CorrelationMatrix { entries: DMatrix::from_element(n, n, 1.0), kappa: 2.0 };
        assert_relative_eq!(trace_product(&ones, &ones2), 36.0, max_relative = 1e-12);
    }

    #[test]
    fn product_trace_matches_eigen_route() {
        // eigendecomposition oracle on a quarter-wavelength 4x4 grid
        let g = IrsGeometry::square(4, 0.25, LAMBDA).unwrap();
        let r = spatial_correlation(&g);
        let ri = CorrelationMatrix { entries: r.entries.clone(), kappa: 1.7 };
        let rj = CorrelationMatrix { entries: r.entries.clone(), kappa: 0.3 };
        let si = crate::sim::psd_sqrt(&ri).unwrap();
        let sj = crate::sim::psd_sqrt(&rj).unwrap();
        let psi = &si * &sj;
        let sum_sq: f64 =
            psi.symmetric_eigen().eigenvalues.iter().map(|&e| e * e).sum();
        assert_relative_eq!(sum_sq, trace_product(&ri, &rj), max_relative = 1e-9);
    }

    #[test]
    #[should_panic(expected = "share dimensions")]
    fn trace_dimension_mismatch_panics() {
        let a = unit_corr(3, 1.0);
        let b = unit_corr(4, 1.0);
        trace_hadamard(&a, &b);
    }

    #[test]
    fn with_direct_correlation_limits() {
        let tr = TracePair { hadamard: 2.0, product: 3.0 };
        assert_eq!(corr_with_direct(Regime::Rps, 0.0, tr, 0.5).value, 0.0);
        let zero_tr = TracePair { hadamard: 0.0, product: 0.0 };
        assert_eq!(corr_with_direct(Regime::Eps, 1.0, zero_tr, 0.0).value, 1.0);
        // regime picks the matching trace
        let c = corr_with_direct(Regime::Rps, 1.0, tr, 0.5);
        assert_relative_eq!(c.value, 1.0 / 3.5);
        let c = corr_with_direct(Regime::Eps, 1.0, tr, 0.5);
        assert_relative_eq!(c.value, 1.0 / 4.5);
        assert!(c.value.abs() <= 1.0);
    }

    #[test]
    fn without_direct_correlation_limits() {
        let tr = TracePair { hadamard: 2.0, product: 3.0 };
        assert_eq!(corr_without_direct(Regime::Rps, 0.0, tr, 1.0).value, 0.0);
        let zero_tr = TracePair { hadamard: 0.0, product: 0.0 };
        // no surface randomness: bounded by the noise ratio, below one
        let c = corr_without_direct(Regime::Rps, 1.0, zero_tr, 2.0);
        assert!(c.value < 1.0);
        assert_relative_eq!(c.value, 0.5);
    }

    #[test]
    fn correlation_monotonicity() {
        let scn = ScenarioConfig::reference(4);
        let ctx = ScenarioContext::new(&scn);
        // with-direct falls as the surface grows
        let big = ScenarioContext::new(&ScenarioConfig::reference(8));
        let v = estimation_variances_at(&scn, 20.0, 5.0);
        let small_c =
            corr_with_direct(Regime::Rps, ctx.beta_ab, ctx.traces_ab(), v.reflected_a).value;
        let big_c =
            corr_with_direct(Regime::Rps, big.beta_ab, big.traces_ab(), v.reflected_a).value;
        assert!(big_c < small_c);
        // without-direct falls as the direct probe lengthens
        let (r1, _) = ctx.sample_correlations(Regime::Eps, 10.0, 5.0);
        let (r2, _) = ctx.sample_correlations(Regime::Eps, 30.0, 5.0);
        assert!(r2 < r1);
    }

    #[test]
    fn eps_trace_dominates_rps_for_reference_kernel() {
        let ctx = ScenarioContext::new(&ScenarioConfig::reference(4));
        assert!(ctx.unit_traces.product > ctx.unit_traces.hadamard);
    }

    #[test]
    fn omega_special_cases() {
        let scn = ScenarioConfig::reference(4);
        let mut ctx = ScenarioContext::new(&scn);
        let plan = ProbePlan::new(100.0, 40.0, 10.0).unwrap();
        let v = estimation_variances(&scn, &plan);

        // fully decorrelated Eve
        ctx.rho_ab = 0.0;
        ctx.rho_ae = 0.0;
        ctx.rho_be = 0.0;
        let q = build_omega(&ctx, &v);
        assert_eq!((q.y2, q.y3, q.y4), (0.0, 0.0, 0.0));

        // zero noise: rank-deficient legitimate pair
        let zero = EstimationVariances {
            direct_a2: 0.0,
            direct_b1: 0.0,
            direct_e1: 0.0,
            direct_e2: 0.0,
            reflected_a: 0.0,
            reflected_b: 0.0,
            reflected_ae: 0.0,
            reflected_be: 0.0,
            combined_za: 0.0,
            combined_zb: 0.0,
            combined_zae: 0.0,
            combined_zbe: 0.0,
        };
        let q = build_omega(&ctx, &zero);
        assert_eq!(q.x1, ctx.beta_ab);
        assert_eq!(q.x2, ctx.beta_ab);
        assert_eq!(q.y1, ctx.beta_ab);
    }

    #[test]
    fn omega_reference_arithmetic() {
        // hand-evaluated entries at T_d = 40
        let scn = ScenarioConfig::reference(4);
        let ctx = ScenarioContext::new(&scn);
        let v = estimation_variances_at(&scn, 40.0, 10.0);
        let q = build_omega(&ctx, &v);
        let sigma2 = 1.258_925_411_794_167e-13;
        assert_relative_eq!(q.x1, ctx.beta_ab + sigma2 / 40.0, max_relative = 1e-12);
        assert_relative_eq!(q.y2, ctx.rho_ab * (ctx.beta_ae * ctx.beta_be).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(q.y3, ctx.rho_be * (ctx.beta_ae * ctx.beta_ab).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(q.y4, ctx.rho_ae * (ctx.beta_ab * ctx.beta_be).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn delta_special_cases() {
        let scn = ScenarioConfig::reference(4);
        let mut ctx = ScenarioContext::new(&scn);
        let v = estimation_variances_at(&scn, 20.0, 5.0);

        ctx.rho_ab = 0.0;
        ctx.rho_ae = 0.0;
        ctx.rho_be = 0.0;
        let q = build_delta(&ctx, &v, Regime::Rps);
        assert_eq!((q.y2, q.y3, q.y4), (0.0, 0.0, 0.0));
        // with vanishing cross correlations the Hadamard-trace form is exact
        assert_relative_eq!(
            q.x1,
            ctx.kappa_ar * ctx.kappa_br * ctx.n_elements as f64 + v.combined_za,
            max_relative = 1e-12
        );
        assert_eq!(q.y1, ctx.kappa_ar * ctx.kappa_br * ctx.n_elements as f64);
    }

    #[test]
    fn delta_exact_vs_leading_order() {
        let scn = ScenarioConfig::reference(4);
        let ctx = ScenarioContext::new(&scn);
        let v = estimation_variances_at(&scn, 20.0, 5.0);
        for regime in [Regime::Eps, Regime::Rps] {
            let exact = build_delta(&ctx, &v, regime);
            let lead = build_delta_leading_order(&ctx, &v, regime);
            let tr = ctx.traces_ab().select(regime);
            // the self-variance correction is exactly rho_ab^2 * trace
            assert_relative_eq!(exact.x1 - lead.x1, ctx.rho_ab.powi(2) * tr, max_relative = 1e-9);
            // and the legitimate-ae cross term gains rho_ab*rho_ae
            let t = ctx.unit_traces.select(regime);
            assert_relative_eq!(
                exact.y3 - lead.y3,
                ctx.rho_ab * ctx.rho_ae * (ctx.kappa_er * ctx.kappa_br).sqrt() * ctx.kappa_ar * t,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn quads_are_positive_semidefinite() {
        let scn = ScenarioConfig::reference(4);
        let ctx = ScenarioContext::new(&scn);
        for (t_d, t_s) in [(5.0, 2.0), (20.0, 5.0), (40.0, 10.0)] {
            let v = estimation_variances_at(&scn, t_d, t_s);
            for regime in [Regime::Eps, Regime::Rps] {
                let q = build_delta(&ctx, &v, regime);
                assert!(q.min_eigenvalue() >= -1e-10 * q.x3.abs());
                // Cauchy-Schwarz on every cross term
                assert!(q.y1 * q.y1 <= q.x1 * q.x2 * (1.0 + 1e-12));
                assert!(q.y2 * q.y2 <= q.x3 * q.x4 * (1.0 + 1e-12));
                assert!(q.y3 * q.y3 <= q.x1 * q.x3 * (1.0 + 1e-12));
                assert!(q.y4 * q.y4 <= q.x2 * q.x4 * (1.0 + 1e-12));
            }
            let q = build_omega(&ctx, &v);
            assert!(q.min_eigenvalue() >= -1e-10 * q.x3.abs());
        }
    }
}
