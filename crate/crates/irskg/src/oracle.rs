//! Monte Carlo reference estimators for every closed form: empirical
//! temporal correlation, empirical covariance quads, empirical Gaussian
//! mutual information, and the distributional check behind the central-limit
//! argument.
//!
//! Standard errors come from batch means (100 batches by default): rounds
//! within a block share the channel draw and the step-one noise, so standard
//! errors are computed across block batches, never across rounds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::geometry::spatial_correlation;
use crate::plan::ProbePlan;
use crate::rate::cond_mi_determinant;
use crate::scenario::ScenarioConfig;
use crate::sim::{block_rng, BlockSampler, BlockSamples, PhaseSchedule, TripleWorkspace};
use crate::stats::{CovarianceQuad, Regime};

pub const DEFAULT_BATCHES: u64 = 100;

/// Outcome of one oracle-versus-closed-form comparison.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    /// Identifier of the closed form being checked.
    pub target: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub sample_count: u64,
    /// Closed-form value the estimate is compared against.
    pub reference: f64,
    /// True when `|estimate - reference|` is within the stated tolerance.
    pub pass: bool,
}

impl MonteCarloReport {
    pub fn new(
        target: impl Into<String>,
        estimate: f64,
        standard_error: f64,
        sample_count: u64,
        reference: f64,
        tolerance: f64,
    ) -> Self {
        MonteCarloReport {
            target: target.into(),
            estimate,
            standard_error,
            sample_count,
            reference,
            pass: (estimate - reference).abs() <= tolerance,
        }
    }
}

/// Mean and batch-mean standard error of a set of batch estimates.
fn batch_stats(batch_estimates: &[f64]) -> (f64, f64) {
    let b = batch_estimates.len() as f64;
    let mean = batch_estimates.iter().sum::<f64>() / b;
    let var = batch_estimates.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

fn run_batches<A, F>(blocks: u64, batches: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(u64, std::ops::Range<u64>) -> A + Sync,
{
    let per = blocks / batches;
    assert!(per > 0, "need at least one block per batch");
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * per;
            let end = if b == batches - 1 { blocks } else { start + per };
            f(b, start..end)
        })
        .collect()
}

struct CorrAccum {
    cross: f64,
    cross_n: u64,
    power: f64,
    power_n: u64,
}

/// Empirical temporal correlation of Alice's samples across round pairs.
///
/// Estimates `E[s^(p1) conj(s^(p2))] / E[|s|^2]` over all unordered round
/// pairs of every block; `with_direct` selects the raw composite samples or
/// the direct-subtracted ones.
pub fn empirical_correlation(
    scn: &ScenarioConfig,
    plan: &ProbePlan,
    regime: Regime,
    with_direct: bool,
    blocks: u64,
    seed: u64,
) -> (f64, f64) {
    let sampler =
        BlockSampler::new(scn, plan, PhaseSchedule::continuous(regime, plan.rounds)).unwrap();
    let n = scn.irs.element_count();
    let accs = run_batches(blocks, DEFAULT_BATCHES.min(blocks), |_, range| {
        let mut ws = TripleWorkspace::new(n);
        let mut out = BlockSamples::default();
        let mut acc = CorrAccum { cross: 0.0, cross_n: 0, power: 0.0, power_n: 0 };
        for block in range {
            let mut rng = block_rng(seed, block);
            sampler.sample_block(&mut rng, &mut ws, &mut out);
            let series = if with_direct { &out.with_direct } else { &out.subtracted };
            for (i, r1) in series.iter().enumerate() {
                acc.power += r1[0].norm_sqr();
                acc.power_n += 1;
                for r2 in series.iter().skip(i + 1) {
                    acc.cross += (r1[0] * r2[0].conj()).re;
                    acc.cross_n += 1;
                }
            }
        }
        acc
    });
    let per_batch: Vec<f64> = accs
        .iter()
        .map(|a| (a.cross / a.cross_n as f64) / (a.power / a.power_n as f64))
        .collect();
    let (_, se) = batch_stats(&per_batch);
    let cross: f64 = accs.iter().map(|a| a.cross).sum::<f64>()
        / accs.iter().map(|a| a.cross_n).sum::<u64>() as f64;
    let power: f64 = accs.iter().map(|a| a.power).sum::<f64>()
        / accs.iter().map(|a| a.power_n).sum::<u64>() as f64;
    (cross / power, se)
}

/// Accumulator of the ten second moments of the sample quadruple.
#[derive(Clone, Copy, Default)]
struct QuadAccum {
    sums: [f64; 10],
    count: u64,
}

impl QuadAccum {
    fn add(&mut self, s: &[Complex64; 4]) {
        let [a, b, ae, be] = *s;
        self.sums[0] += a.norm_sqr();
        self.sums[1] += b.norm_sqr();
        self.sums[2] += ae.norm_sqr();
        self.sums[3] += be.norm_sqr();
        self.sums[4] += (a * b.conj()).re;
        self.sums[5] += (ae * be.conj()).re;
        self.sums[6] += (a * ae.conj()).re;
        self.sums[7] += (b * ae.conj()).re;
        self.sums[8] += (a * be.conj()).re;
        self.sums[9] += (b * be.conj()).re;
        self.count += 1;
    }

    fn merge(mut self, other: &QuadAccum) -> QuadAccum {
        for (s, o) in self.sums.iter_mut().zip(other.sums.iter()) {
            *s += o;
        }
        self.count += other.count;
        self
    }

    fn quad(&self) -> CovarianceQuad {
        let c = self.count as f64;
        let m = |i: usize| self.sums[i] / c;
        CovarianceQuad {
            x1: m(0),
            x2: m(1),
            x3: m(2),
            x4: m(3),
            y1: m(4),
            y2: m(5),
            y3: 0.5 * (m(6) + m(7)),
            y4: 0.5 * (m(8) + m(9)),
        }
    }
}

fn quad_batches(
    scn: &ScenarioConfig,
    plan: &ProbePlan,
    regime: Regime,
    blocks: u64,
    seed: u64,
) -> Vec<QuadAccum> {
    let sampler =
        BlockSampler::new(scn, plan, PhaseSchedule::continuous(regime, plan.rounds)).unwrap();
    let n = scn.irs.element_count();
    run_batches(blocks, DEFAULT_BATCHES.min(blocks), |_, range| {
        let mut ws = TripleWorkspace::new(n);
        let mut out = BlockSamples::default();
        let mut acc = QuadAccum::default();
        for block in range {
            let mut rng = block_rng(seed, block);
            sampler.sample_block(&mut rng, &mut ws, &mut out);
            for s in &out.subtracted {
                acc.add(s);
            }
        }
        acc
    })
}

/// Empirical covariance quad of the direct-subtracted samples, with a
/// per-entry batch standard error.
pub fn empirical_quad(
    scn: &ScenarioConfig,
    plan: &ProbePlan,
    regime: Regime,
    blocks: u64,
    seed: u64,
) -> (CovarianceQuad, CovarianceQuad) {
    let accs = quad_batches(scn, plan, regime, blocks, seed);
    let pooled = accs.iter().fold(QuadAccum::default(), |a, b| a.merge(b)).quad();
    let mut se = [0.0f64; 8];
    for k in 0..8 {
        let vals: Vec<f64> = accs.iter().map(|a| a.quad().as_array()[k]).collect();
        se[k] = batch_stats(&vals).1;
    }
    (
        pooled,
        CovarianceQuad {
            x1: se[0],
            x2: se[1],
            x3: se[2],
            x4: se[3],
            y1: se[4],
            y2: se[5],
            y3: se[6],
            y4: se[7],
        },
    )
}

/// Plug-in Gaussian mutual information of the empirical quad, in bits, with
/// a batch standard error.
pub fn empirical_mi(
    scn: &ScenarioConfig,
    plan: &ProbePlan,
    regime: Regime,
    blocks: u64,
    seed: u64,
) -> (f64, f64) {
    let accs = quad_batches(scn, plan, regime, blocks, seed);
    let pooled = accs.iter().fold(QuadAccum::default(), |a, b| a.merge(b)).quad();
    let mi = cond_mi_determinant(&pooled).expect("empirical covariance usable");
    let batch_mis: Vec<f64> = accs
        .iter()
        .filter_map(|a| cond_mi_determinant(&a.quad()).ok())
        .collect();
    let (_, se) = batch_stats(&batch_mis);
    (mi, se)
}

/// Normalized fourth absolute moment `E|z|^4 / (E|z|^2)^2` of the composite
/// reflected coefficient `z = sum_n h1[n] phi[n] h2[n]` with two independent
/// surface channel vectors.  A circularly-symmetric Gaussian gives exactly 2;
/// the `N = 1` equal-phase case is a product of two Gaussians and gives 4.
pub fn gaussianity_check(
    scn: &ScenarioConfig,
    regime: Regime,
    draws: u64,
    seed: u64,
) -> (f64, f64) {
    let r = spatial_correlation(&scn.irs);
    let s_unit = crate::sim::psd_sqrt(&r).expect("sinc kernel is PSD");
    let n = r.dim();
    let chunk = 64usize;
    let accs = run_batches(draws, DEFAULT_BATCHES.min(draws), |b, range| {
        let mut rng = block_rng(seed, b);
        let mut g_re = DMatrix::<f64>::zeros(n, 2 * chunk);
        let mut g_im = DMatrix::<f64>::zeros(n, 2 * chunk);
        let mut h_re = DMatrix::<f64>::zeros(n, 2 * chunk);
        let mut h_im = DMatrix::<f64>::zeros(n, 2 * chunk);
        let mut m2 = 0.0f64;
        let mut m4 = 0.0f64;
        let mut left = range.end - range.start;
        while left > 0 {
            let take = chunk.min(left as usize);
            for m in [&mut g_re, &mut g_im] {
                for v in m.iter_mut() {
                    let x: f64 = rng.sample(StandardNormal);
                    *v = x * std::f64::consts::FRAC_1_SQRT_2;
                }
            }
            h_re.gemm(1.0, &s_unit, &g_re, 0.0);
            h_im.gemm(1.0, &s_unit, &g_im, 0.0);
            for k in 0..take {
                let mut z = Complex64::ZERO;
                match regime {
                    Regime::Eps => {
                        let phi: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                        let p = Complex64::new(phi.cos(), phi.sin());
                        for i in 0..n {
                            let h1 = Complex64::new(h_re[(i, 2 * k)], h_im[(i, 2 * k)]);
                            let h2 = Complex64::new(h_re[(i, 2 * k + 1)], h_im[(i, 2 * k + 1)]);
                            z += h1 * h2;
                        }
                        z *= p;
                    }
                    Regime::Rps => {
                        for i in 0..n {
                            let phi: f64 =
                                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                            let p = Complex64::new(phi.cos(), phi.sin());
                            let h1 = Complex64::new(h_re[(i, 2 * k)], h_im[(i, 2 * k)]);
                            let h2 = Complex64::new(h_re[(i, 2 * k + 1)], h_im[(i, 2 * k + 1)]);
                            z += h1 * p * h2;
                        }
                    }
                }
                let p2 = z.norm_sqr();
                m2 += p2;
                m4 += p2 * p2;
            }
            left -= take as u64;
        }
        (m2, m4, range.end - range.start)
    });
    let per_batch: Vec<f64> = accs
        .iter()
        .map(|(m2, m4, c)| {
            let c = *c as f64;
            (m4 / c) / (m2 / c).powi(2)
        })
        .collect();
    let (_, se) = batch_stats(&per_batch);
    let m2: f64 = accs.iter().map(|a| a.0).sum::<f64>();
    let m4: f64 = accs.iter().map(|a| a.1).sum::<f64>();
    let c: f64 = accs.iter().map(|a| a.2).sum::<u64>() as f64;
    ((m4 / c) / (m2 / c).powi(2), se)
}
