//! The validation suite: every closed form checked against its independent
//! oracle at desk scale.  The `validate` command and the acceptance test
//! target both run these criteria.

use std::time::Instant;

use rayon::prelude::*;

use crate::geometry::{spatial_correlation, CorrelationMatrix, IrsGeometry};
use crate::optim::{exhaustive_search, scp_solve, OptProblem, RateObjective, ScpProblem};
use crate::oracle::{empirical_correlation, empirical_mi, empirical_quad, gaussianity_check};
use crate::plan::ProbePlan;
use crate::rate::{cond_mi_determinant, lambda_fn, skg_rate_at};
use crate::scenario::{estimation_variances, path_gain, Link, ScenarioConfig};
use crate::sim::psd_sqrt;
use crate::stats::{
    build_delta, build_omega, corr_with_direct, corr_without_direct, trace_hadamard,
    trace_product, CovarianceQuad, Regime, ScenarioContext,
};

/// One verified quantity inside a criterion.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    /// Batch standard error where applicable, NaN otherwise.
    pub standard_error: f64,
    pub pass: bool,
}

impl CheckRow {
    fn close(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, se: f64) -> Self {
        CheckRow {
            name: name.into(),
            value,
            reference,
            tolerance,
            standard_error: se,
            pass: (value - reference).abs() <= tolerance,
        }
    }

    fn bound(name: impl Into<String>, value: f64, limit: f64) -> Self {
        CheckRow {
            name: name.into(),
            value,
            reference: 0.0,
            tolerance: limit,
            standard_error: f64::NAN,
            pass: value <= limit,
        }
    }

    fn flag(name: impl Into<String>, pass: bool) -> Self {
        CheckRow {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            reference: 1.0,
            tolerance: 0.0,
            standard_error: f64::NAN,
            pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: &'static str,
    pub summary: &'static str,
    pub rows: Vec<CheckRow>,
    pub elapsed_seconds: f64,
    pub runtime_limit_seconds: f64,
    pub pass: bool,
}

impl CriterionReport {
    fn finish(
        id: &'static str,
        summary: &'static str,
        rows: Vec<CheckRow>,
        started: Instant,
        runtime_limit_seconds: f64,
    ) -> Self {
        let elapsed_seconds = started.elapsed().as_secs_f64();
        let pass = rows.iter().all(|r| r.pass) && elapsed_seconds <= runtime_limit_seconds;
        CriterionReport { id, summary, rows, elapsed_seconds, runtime_limit_seconds, pass }
    }
}

/// Monte Carlo sizes, scalable from the command line.  The stated criteria
/// use `base_blocks = 1e5`.
#[derive(Debug, Clone, Copy)]
pub struct McScale {
    pub base_blocks: u64,
}

impl Default for McScale {
    fn default() -> Self {
        Self { base_blocks: 100_000 }
    }
}

fn desk_scenario() -> ScenarioConfig {
    ScenarioConfig::reference(4)
}

fn desk_plan() -> ProbePlan {
    ProbePlan::new(100.0, 20.0, 5.0).unwrap()
}

/// Closed-form temporal correlation versus Monte Carlo, all four regimes.
pub fn criterion_a1(seed: u64, scale: McScale) -> CriterionReport {
    let started = Instant::now();
    let scn = desk_scenario();
    let plan = desk_plan();
    let ctx = ScenarioContext::new(&scn);
    let v = estimation_variances(&scn, &plan);
    let blocks = scale.base_blocks;
    let mut rows = Vec::new();
    for regime in [Regime::Eps, Regime::Rps] {
        for with_direct in [true, false] {
            let closed = if with_direct {
                corr_with_direct(regime, ctx.beta_ab, ctx.traces_ab(), v.reflected_a).value
            } else {
                corr_without_direct(regime, v.direct_a2, ctx.traces_ab(), v.combined_za).value
            };
            let (est, se) = empirical_correlation(&scn, &plan, regime, with_direct, blocks, seed);
            let tol = (4.0 * se).max(0.02);
            rows.push(CheckRow::close(
                format!("rho_{}_{}", regime.name(), if with_direct { "with" } else { "without" }),
                est,
                closed,
                tol,
                se,
            ));
        }
    }
    rows.push(CheckRow::bound("runtime_seconds", started.elapsed().as_secs_f64(), 120.0));
    CriterionReport::finish("A1", "temporal correlation closed forms vs Monte Carlo", rows, started, 120.0)
}

/// Eigendecomposition trace identities across the geometry test matrix.
pub fn criterion_a2(_seed: u64, _scale: McScale) -> CriterionReport {
    let started = Instant::now();
    let scn = desk_scenario();
    let beta_i = path_gain(&scn, Link::Ar);
    let beta_j = path_gain(&scn, Link::Rb);
    let wavelength = scn.wavelength();
    let cases: Vec<(usize, f64)> = [1usize, 2, 4, 8, 30]
        .iter()
        .flat_map(|&n| [0.125, 0.25, 0.5].iter().map(move |&s| (n, s)))
        .collect();
    let mut rows: Vec<CheckRow> = cases
        .par_iter()
        .flat_map(|&(n, spacing)| {
            let geom = IrsGeometry::square(n, spacing, wavelength).unwrap();
            let r = spatial_correlation(&geom);
            let area = geom.element_area();
            let r_i = CorrelationMatrix { entries: r.entries.clone(), kappa: beta_i * area };
            let r_j = CorrelationMatrix { entries: r.entries.clone(), kappa: beta_j * area };
            // identity 1: kappa_j * sum of squared eigenvalues of sqrt(R_i)
            // equals the Hadamard trace
            let s_i = psd_sqrt(&r_i).unwrap();
            let sum_sq: f64 =
                s_i.clone().symmetric_eigen().eigenvalues.iter().map(|&l| l * l).sum();
            let lhs1 = r_j.kappa * sum_sq;
            let rhs1 = trace_hadamard(&r_i, &r_j);
            // identity 2: squared eigenvalues of the product of the two
            // square roots sum to the product trace
            let s_j = psd_sqrt(&r_j).unwrap();
            let psi = &s_i * &s_j;
            let sum_sq2: f64 = psi.symmetric_eigen().eigenvalues.iter().map(|&l| l * l).sum();
            let rhs2 = trace_product(&r_i, &r_j);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            vec![
                CheckRow::bound(format!("hadamard_identity_n{n}x{n}_s{spacing}"), rel(lhs1, rhs1), 1e-9),
                CheckRow::bound(format!("product_identity_n{n}x{n}_s{spacing}"), rel(sum_sq2, rhs2), 1e-9),
            ]
        })
        .collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    CriterionReport::finish("A2", "eigendecomposition trace identities", rows, started, 60.0)
}

/// Reflected-path covariance quad versus the empirical quad, entrywise.
pub fn criterion_a3(seed: u64, scale: McScale) -> CriterionReport {
    let started = Instant::now();
    let scn = desk_scenario();
    let plan = desk_plan();
    let ctx = ScenarioContext::new(&scn);
    let v = estimation_variances(&scn, &plan);
    let blocks = scale.base_blocks * 10;
    let mut rows = Vec::new();
    for regime in [Regime::Eps, Regime::Rps] {
        let closed = build_delta(&ctx, &v, regime);
        let (emp, se) = empirical_quad(&scn, &plan, regime, blocks, seed + regime as u64);
        for k in 0..8 {
            rows.push(CheckRow::close(
                format!("delta_{}_{}", regime.name(), CovarianceQuad::FIELD_NAMES[k]),
                emp.as_array()[k],
                closed.as_array()[k],
                4.0 * se.as_array()[k],
                se.as_array()[k],
            ));
        }
    }
    CriterionReport::finish("A3", "covariance quad vs Monte Carlo", rows, started, 300.0)
}

fn random_structured_quad(rng: &mut impl rand::Rng) -> CovarianceQuad {
    loop {
        let mut b = [[0.0f64; 3]; 3];
        for row in &mut b {
            for v in row.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let mut c = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| b[i][k] * b[j][k]).sum();
            }
        }
        if c[0][0] < 1e-6 || c[1][1] < 1e-6 || c[2][2] < 1e-6 {
            continue;
        }
        let va = rng.random_range(1e-3..2.0);
        let vb = rng.random_range(1e-3..2.0);
        return CovarianceQuad {
            x1: c[0][0] + va,
            x2: c[0][0] + vb,
            x3: c[1][1],
            x4: c[2][2],
            y1: c[0][0],
            y2: c[1][2],
            y3: c[0][1],
            y4: c[0][2],
        };
    }
}

/// Agreement of the rational kernel with the determinant reference.
pub fn criterion_a4(seed: u64, _scale: McScale) -> CriterionReport {
    use rand::SeedableRng;
    let started = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst_random = 0.0f64;
    let mut checked = 0u32;
    while checked < 10_000 {
        let q = random_structured_quad(&mut rng);
        let (Ok(l), Ok(mi)) = (lambda_fn(&q), cond_mi_determinant(&q)) else {
            continue;
        };
        worst_random = worst_random.max((l.log2() - mi).abs());
        checked += 1;
    }
    let mut worst_scn = 0.0f64;
    let base = desk_scenario();
    for power in [0.01, 1.0, 100.0] {
        let mut scn = base.clone();
        scn.power_a_w = power;
        scn.power_b_w = power;
        let ctx = ScenarioContext::new(&scn);
        for t_d in [5.0, 20.0, 40.0] {
            for t_s in [2.0, 5.0, 10.0] {
                let v = crate::scenario::estimation_variances_at(&scn, t_d, t_s);
                let mut quads = vec![build_omega(&ctx, &v)];
                for regime in [Regime::Eps, Regime::Rps] {
                    quads.push(build_delta(&ctx, &v, regime));
                }
                for q in quads {
                    if let (Ok(l), Ok(mi)) = (lambda_fn(&q), cond_mi_determinant(&q)) {
                        worst_scn = worst_scn.max((l.log2() - mi).abs());
                    }
                }
            }
        }
    }
    let rows = vec![
        CheckRow::bound("random_quads_max_divergence_bits", worst_random, 1e-9),
        CheckRow::bound("scenario_quads_max_divergence_bits", worst_scn, 1e-9),
    ];
    CriterionReport::finish("A4", "rational kernel vs determinant reference", rows, started, 60.0)
}

/// Monte Carlo Gaussian mutual information versus the closed reflected term.
pub fn criterion_a5(seed: u64, scale: McScale) -> CriterionReport {
    let started = Instant::now();
    let scn = ScenarioConfig::reference(8);
    let plan = desk_plan();
    let ctx = ScenarioContext::new(&scn);
    let v = estimation_variances(&scn, &plan);
    let blocks = scale.base_blocks * 10;
    let regime = Regime::Eps;
    let closed = lambda_fn(&build_delta(&ctx, &v, regime)).unwrap().log2();
    let (mi, se) = empirical_mi(&scn, &plan, regime, blocks, seed);
    let rel = (mi - closed).abs() / closed.abs();
    let mut rows = vec![CheckRow::bound("reflected_mi_relative_error", rel, 0.03)];
    rows.push(CheckRow::close("reflected_mi_bits", mi, closed, 0.03 * closed.abs(), se));
    CriterionReport::finish("A5", "Monte Carlo mutual information vs closed form", rows, started, 300.0)
}

/// Fourth-moment Gaussianity of the composite reflected coefficient.
pub fn criterion_a6(seed: u64, scale: McScale) -> CriterionReport {
    let started = Instant::now();
    let draws = scale.base_blocks * 10;
    let (m100, se100) = gaussianity_check(&ScenarioConfig::reference(10), Regime::Rps, draws, seed);
    let (m1, se1) = gaussianity_check(&ScenarioConfig::reference(1), Regime::Eps, draws, seed + 1);
    let rows = vec![
        CheckRow::close("fourth_moment_n100", m100, 2.0, 0.05, se100),
        CheckRow::close("fourth_moment_n1_control", m1, 4.0, 0.1, se1),
    ];
    CriterionReport::finish("A6", "composite coefficient Gaussianity", rows, started, 120.0)
}

/// Optimizer versus the exhaustive-search baseline over a power sweep.
pub fn criterion_a7(_seed: u64, _scale: McScale) -> CriterionReport {
    let started = Instant::now();
    let base = desk_scenario();
    let powers = [0.01, 0.1, 1.0, 10.0, 100.0];
    let mut rows = Vec::new();
    let mut wall_scp = 0.0f64;
    let mut wall_es = 0.0f64;
    // warm-up pass so one-time costs land outside the timing comparison
    {
        let scn = base.clone();
        let prob = RateObjective::new(&scn, OptProblem::new(Regime::Eps, 100.0, 0.1, 20));
        let _ = scp_solve(&prob, prob.opt.default_init());
        let _ = exhaustive_search(&prob, 1e-2);
    }
    for power in powers {
        let mut scn = base.clone();
        scn.power_a_w = power;
        scn.power_b_w = power;
        let prob = RateObjective::new(&scn, OptProblem::new(Regime::Eps, 100.0, 0.1, 20));
        let t0 = Instant::now();
        let scp = scp_solve(&prob, prob.opt.default_init());
        wall_scp += t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let es = exhaustive_search(&prob, 1e-2);
        wall_es += t1.elapsed().as_secs_f64();
        match (scp, es) {
            (Ok(scp), Ok(es)) => {
                rows.push(CheckRow {
                    name: format!("scp_vs_es_gap_p{power}"),
                    value: scp.rate - es.rate,
                    reference: 0.0,
                    tolerance: f64::INFINITY,
                    standard_error: f64::NAN,
                    pass: scp.rate >= es.rate - 1e-3,
                });
                rows.push(CheckRow::flag(
                    format!("scp_exact_feasible_p{power}"),
                    prob.exact_feasible([scp.t_d, scp.t_s]),
                ));
                rows.push(CheckRow::flag(
                    format!("es_exact_feasible_p{power}"),
                    prob.exact_feasible([es.t_d, es.t_s]),
                ));
            }
            (scp, es) => {
                rows.push(CheckRow::flag(
                    format!("solver_failed_p{power}_scp_{}_es_{}", scp.is_ok(), es.is_ok()),
                    false,
                ));
            }
        }
    }
    rows.push(CheckRow::bound("scp_wall_over_es_wall", wall_scp / wall_es, 0.1));
    CriterionReport::finish("A7", "sequential-convex optimizer vs grid baseline", rows, started, 300.0)
}

/// Figure-shape checks: interior maximum of the rate slice, and the
/// trace-ordering implication for the per-sample reflected information.
pub fn criterion_a8(_seed: u64, _scale: McScale) -> CriterionReport {
    let started = Instant::now();
    // low transmit power puts the direct-term optimum inside the slice
    let mut scn = desk_scenario();
    scn.power_a_w = 5e-3;
    scn.power_b_w = 5e-3;
    let ctx = ScenarioContext::new(&scn);
    let t_s = 10.0;
    let rates: Vec<f64> = (1..=40)
        .map(|k| skg_rate_at(&ctx, k as f64, t_s, Regime::Eps, &scn).unwrap().total)
        .collect();
    let signs: Vec<f64> = rates.windows(2).map(|w| (w[1] - w[0]).signum()).collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let argmax = rates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut rows = vec![
        CheckRow::bound("rate_slice_sign_changes", changes as f64, 1.0),
        CheckRow::flag("rate_slice_interior_max", argmax > 0 && argmax < rates.len() - 1),
    ];
    // per-sample reflected information ordering implied by the traces
    let scn = desk_scenario();
    let ctx = ScenarioContext::new(&scn);
    let v = estimation_variances(&scn, &desk_plan());
    let mi_eps = lambda_fn(&build_delta(&ctx, &v, Regime::Eps)).unwrap().log2();
    let mi_rps = lambda_fn(&build_delta(&ctx, &v, Regime::Rps)).unwrap().log2();
    let trace_orders = ctx.unit_traces.product > ctx.unit_traces.hadamard;
    rows.push(CheckRow::flag(
        "eps_exceeds_rps_when_traces_order",
        !trace_orders || mi_eps > mi_rps,
    ));
    rows.push(CheckRow::flag("traces_do_order_here", trace_orders));
    CriterionReport::finish("A8", "figure-shape checks", rows, started, 120.0)
}

/// All criteria in order.
pub fn run_all(seed: u64, scale: McScale) -> Vec<CriterionReport> {
    vec![
        criterion_a1(seed, scale),
        criterion_a2(seed, scale),
        criterion_a3(seed, scale),
        criterion_a4(seed, scale),
        criterion_a5(seed, scale),
        criterion_a6(seed, scale),
        criterion_a7(seed, scale),
        criterion_a8(seed, scale),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    // the full-size criteria run in the dedicated acceptance target; these
    // exercise the plumbing at reduced scale
    #[test]
    fn a2_and_a4_and_a8_pass_quickly() {
        let scale = McScale { base_blocks: 1000 };
        let a4 = criterion_a4(7, scale);
        assert!(a4.pass, "{:?}", a4.rows);
        let a8 = criterion_a8(7, scale);
        assert!(a8.pass, "{:?}", a8.rows);
    }

    #[test]
    fn a1_reduced_scale() {
        let r = criterion_a1(3, McScale { base_blocks: 10_000 });
        assert!(r.pass, "{:#?}", r.rows);
        assert_eq!(r.rows.len(), 5);
    }
}
