//! Seeded Monte Carlo generation of correlated channel realizations, surface
//! phase schedules, and probe samples with estimation noise.
//!
//! One coherence block holds a single channel draw, one step-one estimate per
//! receiver, and `P` phase-shift rounds.  The step-one estimation noise is
//! drawn once per block and subtracted from every round, which is what makes
//! consecutive subtracted samples share a common noise component.
//!
//! Reproducibility contract: every block owns a counter-derived RNG stream,
//! so parallel and serial runs of the same seed produce identical samples.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::geometry::{clipped_eigen, CorrelationMatrix, GeometryError};
use crate::plan::ProbePlan;
use crate::scenario::{estimation_variances, EstimationVariances, ScenarioConfig};
use crate::stats::{Regime, ScenarioContext};

/// Phase configuration policy of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSchedule {
    pub mode: Regime,
    /// Quantization bits `B >= 1` for discrete phases drawn from
    /// `{0, 2 pi / 2^B, ..}`; `None` draws continuous uniform phases.
    pub quantization_bits: Option<u8>,
    pub rounds: u32,
}

impl PhaseSchedule {
    pub fn continuous(mode: Regime, rounds: u32) -> Self {
        Self { mode, quantization_bits: None, rounds }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Geometry(GeometryError),
    /// The 3x3 inter-node correlation matrix has a negative eigenvalue.
    NodeCorrelationNotPsd { eigenvalue: f64 },
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::Geometry(e) => write!(f, "{e}"),
            SimError::NodeCorrelationNotPsd { eigenvalue } => {
                write!(f, "inter-node correlation matrix indefinite: eigenvalue {eigenvalue}")
            }
        }
    }
}

impl std::error::Error for SimError {}

impl From<GeometryError> for SimError {
    fn from(e: GeometryError) -> Self {
        SimError::Geometry(e)
    }
}

/// RNG for one block: one ChaCha stream per block index under a master seed.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block.wrapping_add(1));
    rng
}

/// Standard circularly-symmetric complex normal, unit variance.
pub fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Symmetric PSD square root `S` with `S S = kappa R`, eigenvalues clipped
/// per the geometry module's tolerance.
pub fn psd_sqrt(r: &CorrelationMatrix) -> Result<DMatrix<f64>, GeometryError> {
    let (vecs, vals) = clipped_eigen(r)?;
    let n = r.dim();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = (r.kappa * v).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * vecs.transpose())
}

fn sqrt3(c: &Matrix3<f64>) -> Result<Matrix3<f64>, SimError> {
    let eig = c.symmetric_eigen();
    let scale = eig.eigenvalues.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut d = Matrix3::zeros();
    for i in 0..3 {
        let v = eig.eigenvalues[i];
        if v < -1e-12 * scale.max(1e-300) {
            return Err(SimError::NodeCorrelationNotPsd { eigenvalue: v });
        }
        d[(i, i)] = v.max(0.0).sqrt();
    }
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// One realization of all channels of a coherence block.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub h_ab: Complex64,
    pub h_ae: Complex64,
    pub h_be: Complex64,
    pub h_ar: DVector<Complex64>,
    pub h_br: DVector<Complex64>,
    pub h_er: DVector<Complex64>,
}

/// Draws the three surface channel vectors with per-vector covariance
/// `kappa_i R` and cross-covariance `rho_ij sqrt(kappa_i kappa_j) R`.
pub struct TripleSampler {
    s_unit: DMatrix<f64>,
    s_nodes: Matrix3<f64>,
    n: usize,
}

impl TripleSampler {
    /// `kappas = [kappa_ar, kappa_br, kappa_er]`,
    /// `rhos = [rho_ab, rho_ae, rho_be]`.
    pub fn new(r_unit: &CorrelationMatrix, kappas: [f64; 3], rhos: [f64; 3]) -> Result<Self, SimError> {
        let s_unit = psd_sqrt(&CorrelationMatrix { entries: r_unit.entries.clone(), kappa: 1.0 })?;
        let [kar, kbr, ker] = kappas;
        let [rab, rae, rbe] = rhos;
        let c = Matrix3::new(
            kar,
            rab * (kar * kbr).sqrt(),
            rae * (kar * ker).sqrt(),
            rab * (kar * kbr).sqrt(),
            kbr,
            rbe * (kbr * ker).sqrt(),
            rae * (kar * ker).sqrt(),
            rbe * (kbr * ker).sqrt(),
            ker,
        );
        Ok(Self { s_unit, s_nodes: sqrt3(&c)?, n: r_unit.dim() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Fill `h_re`/`h_im` (n x 3) with one draw; column order (ar, br, er).
    pub fn draw_into(&self, rng: &mut impl Rng, ws: &mut TripleWorkspace) {
        for m in [&mut ws.g_re, &mut ws.g_im] {
            for v in m.iter_mut() {
                let x: f64 = rng.sample(StandardNormal);
                *v = x * std::f64::consts::FRAC_1_SQRT_2;
            }
        }
        // H = S_unit * G * S_nodes, applied separately to the real and
        // imaginary parts since both factors are real
        ws.t_re.gemm(1.0, &ws.g_re, &self.s_nodes, 0.0);
        ws.t_im.gemm(1.0, &ws.g_im, &self.s_nodes, 0.0);
        ws.h_re.gemm(1.0, &self.s_unit, &ws.t_re, 0.0);
        ws.h_im.gemm(1.0, &self.s_unit, &ws.t_im, 0.0);
    }

    /// Allocation-per-call variant returning the three vectors.
    pub fn draw(&self, rng: &mut impl Rng) -> [DVector<Complex64>; 3] {
        let mut ws = TripleWorkspace::new(self.n);
        self.draw_into(rng, &mut ws);
        let col = |k: usize| {
            DVector::from_fn(self.n, |i, _| Complex64::new(ws.h_re[(i, k)], ws.h_im[(i, k)]))
        };
        [col(0), col(1), col(2)]
    }
}

/// Reusable buffers for [`TripleSampler::draw_into`].
pub struct TripleWorkspace {
    g_re: DMatrix<f64>,
    g_im: DMatrix<f64>,
    t_re: DMatrix<f64>,
    t_im: DMatrix<f64>,
    pub h_re: DMatrix<f64>,
    pub h_im: DMatrix<f64>,
}

impl TripleWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            g_re: DMatrix::zeros(n, 3),
            g_im: DMatrix::zeros(n, 3),
            t_re: DMatrix::zeros(n, 3),
            t_im: DMatrix::zeros(n, 3),
            h_re: DMatrix::zeros(n, 3),
            h_im: DMatrix::zeros(n, 3),
        }
    }
}

/// One draw of the correlated surface channel triple `(h_ar, h_br, h_er)`.
pub fn draw_correlated_triple(
    r_unit: &CorrelationMatrix,
    kappas: [f64; 3],
    rhos: [f64; 3],
    rng: &mut impl Rng,
) -> Result<[DVector<Complex64>; 3], SimError> {
    Ok(TripleSampler::new(r_unit, kappas, rhos)?.draw(rng))
}

fn draw_phase(bits: Option<u8>, rng: &mut impl Rng) -> Complex64 {
    let phi = match bits {
        None => rng.random_range(-PI..PI),
        Some(b) => {
            let levels = 1u64 << b.max(1);
            2.0 * PI * (rng.random_range(0..levels) as f64) / levels as f64
        }
    };
    Complex64::new(phi.cos(), phi.sin())
}

/// Unit-modulus diagonal of one phase round.
pub fn draw_phase_round(
    schedule: &PhaseSchedule,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<Complex64> {
    let mut buf = Vec::with_capacity(n);
    fill_phase_round(schedule, n, rng, &mut buf);
    buf
}

fn fill_phase_round(
    schedule: &PhaseSchedule,
    n: usize,
    rng: &mut impl Rng,
    buf: &mut Vec<Complex64>,
) {
    buf.clear();
    match schedule.mode {
        Regime::Eps => {
            let p = draw_phase(schedule.quantization_bits, rng);
            buf.resize(n, p);
        }
        Regime::Rps => buf.extend((0..n).map(|_| draw_phase(schedule.quantization_bits, rng))),
    }
}

/// Bilinear cascade coefficients of one round from the channel triple and a
/// phase diagonal: `(c_ab, c_ae, c_be)` with
/// `c_ij = sum_n h_i[n] phi[n] h_j[n]`.  The legitimate coefficient is
/// symmetric in the two parties, which is exactly channel reciprocity.
pub fn cascades(
    h_re: &DMatrix<f64>,
    h_im: &DMatrix<f64>,
    phases: &[Complex64],
) -> (Complex64, Complex64, Complex64) {
    let n = phases.len();
    let mut c_ab = Complex64::ZERO;
    let mut c_ae = Complex64::ZERO;
    let mut c_be = Complex64::ZERO;
    for i in 0..n {
        let ar = Complex64::new(h_re[(i, 0)], h_im[(i, 0)]);
        let br = Complex64::new(h_re[(i, 1)], h_im[(i, 1)]);
        let er = Complex64::new(h_re[(i, 2)], h_im[(i, 2)]);
        let p = phases[i];
        c_ab += ar * p * br;
        c_ae += ar * p * er;
        c_be += br * p * er;
    }
    (c_ab, c_ae, c_be)
}

/// Per-round probe samples of one coherence block, in `(a, b, ae, be)` order.
#[derive(Debug, Clone, Default)]
pub struct BlockSamples {
    /// Step-one direct estimates `(h_hat_a, h_hat_b, h_hat_ae, h_hat_be)`.
    pub direct: [Complex64; 4],
    /// Composite estimates with the direct path still present.
    pub with_direct: Vec<[Complex64; 4]>,
    /// Direct-subtracted samples, the key material.
    pub subtracted: Vec<[Complex64; 4]>,
    phase_buf: Vec<Complex64>,
}

/// Everything needed to sample blocks of one scenario/plan/schedule.
pub struct BlockSampler {
    triple: TripleSampler,
    s_direct: Matrix3<f64>,
    vars: EstimationVariances,
    schedule: PhaseSchedule,
    n: usize,
}

impl BlockSampler {
    pub fn new(
        scn: &ScenarioConfig,
        plan: &ProbePlan,
        schedule: PhaseSchedule,
    ) -> Result<Self, SimError> {
        let ctx = ScenarioContext::new(scn);
        let r_unit = crate::geometry::spatial_correlation(&scn.irs);
        let triple = TripleSampler::new(
            &r_unit,
            [ctx.kappa_ar, ctx.kappa_br, ctx.kappa_er],
            [ctx.rho_ab, ctx.rho_ae, ctx.rho_be],
        )?;
        // direct channels (h_ab, h_ae, h_be): the correlation of a pair of
        // direct channels is the Bessel coefficient of the node pair in
        // which they differ
        let (bab, bae, bbe) = (ctx.beta_ab, ctx.beta_ae, ctx.beta_be);
        let c = Matrix3::new(
            bab,
            ctx.rho_be * (bab * bae).sqrt(),
            ctx.rho_ae * (bab * bbe).sqrt(),
            ctx.rho_be * (bab * bae).sqrt(),
            bae,
            ctx.rho_ab * (bae * bbe).sqrt(),
            ctx.rho_ae * (bab * bbe).sqrt(),
            ctx.rho_ab * (bae * bbe).sqrt(),
            bbe,
        );
        Ok(Self {
            triple,
            s_direct: sqrt3(&c)?,
            vars: estimation_variances(scn, plan),
            schedule,
            n: scn.irs.element_count(),
        })
    }

    pub fn rounds(&self) -> u32 {
        self.schedule.rounds
    }

    pub fn channel_draw(&self, rng: &mut impl Rng, ws: &mut TripleWorkspace) -> ChannelDraw {
        self.triple.draw_into(rng, ws);
        let g = nalgebra::Vector3::new(complex_normal(rng), complex_normal(rng), complex_normal(rng));
        let d = self.s_direct.map(|x| Complex64::new(x, 0.0)) * g;
        let col = |k: usize| {
            DVector::from_fn(self.n, |i, _| Complex64::new(ws.h_re[(i, k)], ws.h_im[(i, k)]))
        };
        ChannelDraw {
            h_ab: d[0],
            h_ae: d[1],
            h_be: d[2],
            h_ar: col(0),
            h_br: col(1),
            h_er: col(2),
        }
    }

    /// Sample one block into `out`, reusing its buffers.
    pub fn sample_block(
        &self,
        rng: &mut impl Rng,
        ws: &mut TripleWorkspace,
        out: &mut BlockSamples,
    ) {
        self.triple.draw_into(rng, ws);
        let g = nalgebra::Vector3::new(complex_normal(rng), complex_normal(rng), complex_normal(rng));
        let d = self.s_direct.map(|x| Complex64::new(x, 0.0)) * g;
        let (h_ab, h_ae, h_be) = (d[0], d[1], d[2]);

        let v = &self.vars;
        // step-one estimation noise, one draw per block, reused by every
        // round's subtraction
        let n_a2 = complex_normal(rng) * v.direct_a2.sqrt();
        let n_b1 = complex_normal(rng) * v.direct_b1.sqrt();
        let n_e1 = complex_normal(rng) * v.direct_e1.sqrt();
        let n_e2 = complex_normal(rng) * v.direct_e2.sqrt();
        out.direct = [h_ab + n_a2, h_ab + n_b1, h_ae + n_e1, h_be + n_e2];

        out.with_direct.clear();
        out.subtracted.clear();
        let mut phases = std::mem::take(&mut out.phase_buf);
        for _ in 0..self.schedule.rounds {
            fill_phase_round(&self.schedule, self.n, rng, &mut phases);
            let (c_ab, c_ae, c_be) = cascades(&ws.h_re, &ws.h_im, &phases);
            let n_a = complex_normal(rng) * v.reflected_a.sqrt();
            let n_b = complex_normal(rng) * v.reflected_b.sqrt();
            let n_ae = complex_normal(rng) * v.reflected_ae.sqrt();
            let n_be = complex_normal(rng) * v.reflected_be.sqrt();
            out.with_direct.push([
                h_ab + c_ab + n_a,
                h_ab + c_ab + n_b,
                h_ae + c_ae + n_ae,
                h_be + c_be + n_be,
            ]);
            out.subtracted.push([
                c_ab + n_a - n_a2,
                c_ab + n_b - n_b1,
                c_ae + n_ae - n_e1,
                c_be + n_be - n_e2,
            ]);
        }
        out.phase_buf = phases;
    }
}

/// Probe samples of one coherence block.
pub fn probe_block(
    scn: &ScenarioConfig,
    plan: &ProbePlan,
    schedule: PhaseSchedule,
    rng: &mut impl Rng,
) -> Result<BlockSamples, SimError> {
    let sampler = BlockSampler::new(scn, plan, schedule)?;
    let mut ws = TripleWorkspace::new(scn.irs.element_count());
    let mut out = BlockSamples::default();
    sampler.sample_block(rng, &mut ws, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{spatial_correlation, IrsGeometry};
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 0.299_792_458;

    fn quarter_grid(n: usize) -> CorrelationMatrix {
        spatial_correlation(&IrsGeometry::square(n, 0.25, LAMBDA).unwrap())
    }

    #[test]
    fn psd_sqrt_identity_and_diagonal() {
        let id = CorrelationMatrix { entries: DMatrix::identity(3, 3), kappa: 1.0 };
        let s = psd_sqrt(&id).unwrap();
        assert!((s - DMatrix::identity(3, 3)).norm() < 1e-12);
        let diag =
            CorrelationMatrix { entries: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])), kappa: 1.0 };
        let s = psd_sqrt(&diag).unwrap();
        assert_relative_eq!(s[(0, 0)], 2.0, max_relative = 1e-12);
        assert_relative_eq!(s[(1, 1)], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn psd_sqrt_reconstructs_sinc_kernel() {
        let r = quarter_grid(2);
        let scaled = CorrelationMatrix { entries: r.entries.clone(), kappa: 0.37 };
        let s = psd_sqrt(&scaled).unwrap();
        let err = (&s * &s - 0.37 * &r.entries).norm() / (0.37 * r.entries.norm());
        assert!(err < 1e-8, "reconstruction error {err}");
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 2.0;
        m[(1, 0)] = 2.0;
        assert!(psd_sqrt(&CorrelationMatrix { entries: m, kappa: 1.0 }).is_err());
    }

    #[test]
    fn identical_seed_reproduces_streams() {
        let r = quarter_grid(2);
        let s = TripleSampler::new(&r, [1.0, 0.5, 0.25], [0.1, -0.2, 0.05]).unwrap();
        let a = s.draw(&mut block_rng(9, 3));
        let b = s.draw(&mut block_rng(9, 3));
        let c = s.draw(&mut block_rng(9, 4));
        assert_eq!(a[0], b[0]);
        assert_eq!(a[2], b[2]);
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn degenerate_correlation_duplicates_vectors() {
        let r = quarter_grid(2);
        let s = TripleSampler::new(&r, [0.7, 0.7, 0.3], [1.0, 0.0, 0.0]).unwrap();
        let [h_ar, h_br, _] = s.draw(&mut block_rng(1, 0));
        for i in 0..h_ar.len() {
            assert_relative_eq!(h_ar[i].re, h_br[i].re, epsilon = 1e-10);
            assert_relative_eq!(h_ar[i].im, h_br[i].im, epsilon = 1e-10);
        }
    }

    #[test]
    fn triple_sampler_rejects_indefinite_node_matrix() {
        let r = quarter_grid(2);
        assert!(matches!(
            TripleSampler::new(&r, [1.0, 1.0, 1.0], [0.9, 0.9, -0.9]),
            Err(SimError::NodeCorrelationNotPsd { .. })
        ));
    }

    #[test]
    fn empirical_cross_covariance_matches_model() {
        // moderate sample check of E[h_ar h_br^H] = rho sqrt(k k') R
        let r = quarter_grid(2);
        let (kar, kbr) = (1.3, 0.6);
        let rho = 0.4;
        let s = TripleSampler::new(&r, [kar, kbr, 1.0], [rho, 0.0, 0.0]).unwrap();
        let m = 40_000;
        let mut acc = DMatrix::<Complex64>::zeros(4, 4);
        let mut ws = TripleWorkspace::new(4);
        let mut rng = block_rng(5, 0);
        for _ in 0..m {
            s.draw_into(&mut rng, &mut ws);
            for i in 0..4 {
                for j in 0..4 {
                    let ar = Complex64::new(ws.h_re[(i, 0)], ws.h_im[(i, 0)]);
                    let br = Complex64::new(ws.h_re[(j, 1)], ws.h_im[(j, 1)]);
                    acc[(i, j)] += ar * br.conj();
                }
            }
        }
        let scale = rho * (kar * kbr).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let want = scale * r.entries[(i, j)];
                let got = acc[(i, j)] / m as f64;
                // 4 standard errors, se ~ sqrt(k k' / m)
                let se = ((kar * kbr) as f64 / m as f64).sqrt();
                assert!(
                    (got.re - want).abs() < 4.0 * se && got.im.abs() < 4.0 * se,
                    "entry ({i},{j}): got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn eps_phases_are_shared_and_unit_modulus() {
        let sch = PhaseSchedule::continuous(Regime::Eps, 1);
        let ph = draw_phase_round(&sch, 5, &mut block_rng(2, 0));
        for p in &ph {
            assert_relative_eq!(p.norm(), 1.0, max_relative = 1e-12);
            assert_eq!(*p, ph[0]);
        }
    }

    #[test]
    fn one_bit_phases_are_plus_minus_one() {
        let sch = PhaseSchedule { mode: Regime::Rps, quantization_bits: Some(1), rounds: 1 };
        let ph = draw_phase_round(&sch, 64, &mut block_rng(3, 0));
        for p in ph {
            assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-12
                || (p - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn continuous_phases_average_to_zero() {
        let sch = PhaseSchedule::continuous(Regime::Rps, 1);
        let m = 200_000;
        let mut sum = Complex64::ZERO;
        let mut rng = block_rng(4, 0);
        for _ in 0..m {
            sum += draw_phase_round(&sch, 1, &mut rng)[0];
        }
        assert!((sum / m as f64).norm() < 4.0 / (m as f64).sqrt());
    }

    #[test]
    fn zero_noise_block_is_reciprocal() {
        let mut scn = ScenarioConfig::reference(2);
        // push noise to zero through absurd transmit power
        scn.power_a_w = 1e30;
        scn.power_b_w = 1e30;
        let plan = ProbePlan::new(100.0, 20.0, 5.0).unwrap();
        let out = probe_block(
            &scn,
            &plan,
            PhaseSchedule::continuous(Regime::Eps, plan.rounds),
            &mut block_rng(8, 0),
        )
        .unwrap();
        assert_eq!(out.subtracted.len(), 6);
        for round in &out.subtracted {
            assert_relative_eq!(round[0].re, round[1].re, max_relative = 1e-6);
            assert_relative_eq!(round[0].im, round[1].im, max_relative = 1e-6);
        }
        for round in &out.with_direct {
            assert_relative_eq!(round[0].re, round[1].re, max_relative = 1e-6);
        }
    }

    #[test]
    fn same_phases_give_identical_rounds() {
        // deterministic channel and a repeated phase diagonal
        let r = quarter_grid(2);
        let s = TripleSampler::new(&r, [1.0, 1.0, 1.0], [0.0, 0.0, 0.0]).unwrap();
        let mut ws = TripleWorkspace::new(4);
        s.draw_into(&mut block_rng(11, 0), &mut ws);
        let sch = PhaseSchedule::continuous(Regime::Eps, 2);
        let phases = draw_phase_round(&sch, 4, &mut block_rng(12, 0));
        let first = cascades(&ws.h_re, &ws.h_im, &phases);
        let second = cascades(&ws.h_re, &ws.h_im, &phases);
        assert_eq!(first, second);
    }
}
