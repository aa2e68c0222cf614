//! Probing-time optimization: maximize the closed-form rate over
//! `(T_d, T_s)` under the time budget and the sample-correlation caps, via a
//! sequential-convex iteration, with an exhaustive grid search as baseline.
//!
//! Each iteration Taylor-expands the rate and both correlation constraints
//! to second order around the current point, projects the curvatures so the
//! local model is a concave objective over a convex set, and solves the
//! two-variable model exactly by active-set enumeration.  Iterates violating
//! the exact correlation caps are recorded with zero value; the result is
//! the best exactly-feasible iterate.

use crate::plan::ProbePlan;
use crate::rate::skg_rate_at;
use crate::scenario::ScenarioConfig;
use crate::stats::{Regime, ScenarioContext};

/// Curvature handling for the objective model.  The subproblem maximizes, so
/// the default keeps the concave part of the Hessian; the literal variant
/// keeps the convex part instead (selectable for comparison).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianProjection {
    NegativeSemidefinite,
    LiteralPsd,
}

#[derive(Debug, Clone)]
pub struct OptProblem {
    pub regime: Regime,
    /// Probing budget in symbols.
    pub t_p: f64,
    /// Cap on the temporal correlation of the subtracted samples.
    pub rho_t: f64,
    pub max_iterations: u32,
    pub projection: HessianProjection,
    /// Trust-region half width as a fraction of `t_p`.
    pub trust_fraction: f64,
    /// Smallest admissible probe time in symbols.
    pub min_time: f64,
    /// Relative step for numerical derivatives.
    pub rel_step: f64,
}

impl OptProblem {
    pub fn new(regime: Regime, t_p: f64, rho_t: f64, max_iterations: u32) -> Self {
        assert!(rho_t > 0.0 && rho_t < 1.0, "correlation cap must lie in (0, 1)");
        assert!(t_p > 0.0 && max_iterations >= 1);
        Self {
            regime,
            t_p,
            rho_t,
            max_iterations,
            projection: HessianProjection::NegativeSemidefinite,
            trust_fraction: 0.1,
            min_time: 1.0,
            rel_step: 1e-4,
        }
    }

    /// Recommended starting point: `(0.4 T_p, 0.16 T_p)`.  It violates the
    /// time budget, which is fine: the first iterate already lands inside.
    pub fn default_init(&self) -> [f64; 2] {
        [0.4 * self.t_p, 0.16 * self.t_p]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub t_d: f64,
    pub t_s: f64,
    /// Exact rate when the iterate satisfies the exact constraints, else 0.
    pub rate: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub t_d: f64,
    pub t_s: f64,
    pub rate: f64,
    pub iterations: u32,
    pub converged: bool,
    pub trace: Vec<IterateRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptError {
    /// No iterate satisfied the exact constraints within the iteration cap.
    NoFeasibleIterate { iterations: u32 },
    /// No grid point satisfied the exact constraints.
    EmptyFeasibleGrid,
    /// A derivative stencil could not be evaluated even after shrinking.
    DerivativeStencil { detail: String },
}

impl std::fmt::Display for OptError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptError::NoFeasibleIterate { iterations } => {
                write!(f, "no feasible iterate found in {iterations} iterations")
            }
            OptError::EmptyFeasibleGrid => write!(f, "no feasible point in the search grid"),
            OptError::DerivativeStencil { detail } => {
                write!(f, "derivative stencil failed: {detail}")
            }
        }
    }
}

impl std::error::Error for OptError {}

/// A problem the sequential-convex loop and the grid baseline can drive:
/// a smooth objective plus the two exact correlation values.
pub trait ScpProblem: Sync {
    fn params(&self) -> &OptProblem;
    /// Smooth objective; `None` where it cannot be evaluated.
    fn objective(&self, t: [f64; 2]) -> Option<f64>;
    /// Exact sample correlations at Alice and Bob.
    fn correlations(&self, t: [f64; 2]) -> (f64, f64);

    fn exact_feasible(&self, t: [f64; 2]) -> bool {
        let p = self.params();
        if !ProbePlan::budget_ok(p.t_p, t[0], t[1]) || t[0] < p.min_time || t[1] < p.min_time {
            return false;
        }
        let (ra, rb) = self.correlations(t);
        let tol = p.rho_t * 1e-9;
        ra <= p.rho_t + tol && rb <= p.rho_t + tol
    }

    /// Objective with the exact-feasibility filter applied: the sentinel 0
    /// outside the feasible set.
    fn objective_filtered(&self, t: [f64; 2]) -> f64 {
        if self.exact_feasible(t) {
            self.objective(t).unwrap_or(0.0).max(0.0)
        } else {
            0.0
        }
    }
}

/// The closed-form rate as an optimization objective.
pub struct RateObjective<'a> {
    pub scn: &'a ScenarioConfig,
    pub ctx: ScenarioContext,
    pub opt: OptProblem,
}

impl<'a> RateObjective<'a> {
    pub fn new(scn: &'a ScenarioConfig, opt: OptProblem) -> Self {
        Self { scn, ctx: ScenarioContext::new(scn), opt }
    }
}

impl ScpProblem for RateObjective<'_> {
    fn params(&self) -> &OptProblem {
        &self.opt
    }

    fn objective(&self, t: [f64; 2]) -> Option<f64> {
        skg_rate_at(&self.ctx, t[0], t[1], self.opt.regime, self.scn).ok().map(|r| r.total)
    }

    fn correlations(&self, t: [f64; 2]) -> (f64, f64) {
        self.ctx.sample_correlations(self.opt.regime, t[0], t[1])
    }
}

fn stencil<F>(f: &F, t: [f64; 2], rel_step: f64) -> Result<(f64, [f64; 2], [[f64; 2]; 2]), OptError>
where
    F: Fn([f64; 2]) -> Option<f64>,
{
    for attempt in 0..2 {
        let shrink = if attempt == 0 { 1.0 } else { 0.1 };
        let h = [
            (t[0].abs() * rel_step * shrink).max(1e-9),
            (t[1].abs() * rel_step * shrink).max(1e-9),
        ];
        let at = |i: f64, j: f64| f([t[0] + i * h[0], t[1] + j * h[1]]);
        let pts = [
            at(0.0, 0.0),
            at(1.0, 0.0),
            at(-1.0, 0.0),
            at(0.0, 1.0),
            at(0.0, -1.0),
            at(1.0, 1.0),
            at(1.0, -1.0),
            at(-1.0, 1.0),
            at(-1.0, -1.0),
        ];
        if pts.iter().any(|p| p.map_or(true, |v| !v.is_finite())) {
            continue;
        }
        let v: Vec<f64> = pts.iter().map(|p| p.unwrap()).collect();
        let g = [(v[1] - v[2]) / (2.0 * h[0]), (v[3] - v[4]) / (2.0 * h[1])];
        let hxx = (v[1] - 2.0 * v[0] + v[2]) / (h[0] * h[0]);
        let hyy = (v[3] - 2.0 * v[0] + v[4]) / (h[1] * h[1]);
        let hxy = (v[5] - v[6] - v[7] + v[8]) / (4.0 * h[0] * h[1]);
        return Ok((v[0], g, [[hxx, hxy], [hxy, hyy]]));
    }
    Err(OptError::DerivativeStencil { detail: format!("objective undefined near ({}, {})", t[0], t[1]) })
}

/// Central-difference gradient and symmetrized Hessian on a 9-point stencil.
///
/// The stencil shrinks once (tenfold) if the function is undefined at any
/// point, then errors out.
pub fn numerical_derivatives<F>(
    f: F,
    t: [f64; 2],
    rel_step: f64,
) -> Result<([f64; 2], [[f64; 2]; 2]), OptError>
where
    F: Fn([f64; 2]) -> Option<f64>,
{
    stencil(&f, t, rel_step).map(|(_, g, h)| (g, h))
}

/// Quadratic model `f0 + g.d + d'Hd/2` around the current iterate.
#[derive(Debug, Clone, Copy)]
struct Quad2 {
    f0: f64,
    g: [f64; 2],
    h: [[f64; 2]; 2],
}

impl Quad2 {
    fn eval(&self, d: [f64; 2]) -> f64 {
        self.f0
            + self.g[0] * d[0]
            + self.g[1] * d[1]
            + 0.5 * (d[0] * (self.h[0][0] * d[0] + self.h[0][1] * d[1])
                + d[1] * (self.h[1][0] * d[0] + self.h[1][1] * d[1]))
    }

    fn grad(&self, d: [f64; 2]) -> [f64; 2] {
        [
            self.g[0] + self.h[0][0] * d[0] + self.h[0][1] * d[1],
            self.g[1] + self.h[1][0] * d[0] + self.h[1][1] * d[1],
        ]
    }
}

/// Eigenvalue clipping of a symmetric 2x2 matrix.
fn project_2x2(h: [[f64; 2]; 2], keep_negative: bool) -> [[f64; 2]; 2] {
    let (a, b, c) = (h[0][0], h[1][1], 0.5 * (h[0][1] + h[1][0]));
    let mean = 0.5 * (a + b);
    let disc = (0.25 * (a - b) * (a - b) + c * c).sqrt();
    let (l1, l2) = (mean + disc, mean - disc);
    let clip = |l: f64| if keep_negative { l.min(0.0) } else { l.max(0.0) };
    let (k1, k2) = (clip(l1), clip(l2));
    if disc < 1e-300 {
        return [[k1, 0.0], [0.0, k1]];
    }
    // eigenvector for l1
    let (ux, uy) = if c.abs() > (l1 - a).abs() { (c, l1 - a) } else { (l1 - b, c) };
    let norm = (ux * ux + uy * uy).sqrt();
    let (ux, uy) = if norm > 0.0 { (ux / norm, uy / norm) } else { (1.0, 0.0) };
    // orthogonal complement carries l2
    let (vx, vy) = (-uy, ux);
    [
        [k1 * ux * ux + k2 * vx * vx, k1 * ux * uy + k2 * vx * vy],
        [k1 * ux * uy + k2 * vx * vy, k1 * uy * uy + k2 * vy * vy],
    ]
}

fn solve_2x2(m: [[f64; 2]; 2], rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m[0][0].abs().max(m[1][1].abs()).max(m[0][1].abs()).max(1e-300);
    if det.abs() < 1e-13 * scale * scale {
        return None;
    }
    Some([
        (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ])
}

/// Linear constraint `a . d <= b`.
#[derive(Debug, Clone, Copy)]
struct Lin {
    a: [f64; 2],
    b: f64,
}

struct Subproblem {
    obj: Quad2,
    lins: Vec<Lin>,
    quads: [Quad2; 2],
    rho_t: f64,
}

impl Subproblem {
    fn lin_ok(&self, d: [f64; 2], tol: f64) -> bool {
        self.lins.iter().all(|l| l.a[0] * d[0] + l.a[1] * d[1] <= l.b + tol)
    }

    fn quad_ok(&self, d: [f64; 2], tol: f64) -> bool {
        self.quads.iter().all(|q| q.eval(d) <= self.rho_t + tol)
    }

    /// Feasible t-interval of the parameterized line `p0 + t u` under all
    /// linear constraints except `skip`.
    fn line_interval(&self, p0: [f64; 2], u: [f64; 2], skip: usize) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (k, l) in self.lins.iter().enumerate() {
            if k == skip {
                continue;
            }
            let du = l.a[0] * u[0] + l.a[1] * u[1];
            let rem = l.b - (l.a[0] * p0[0] + l.a[1] * p0[1]);
            if du.abs() < 1e-14 {
                if rem < -1e-9 {
                    return None;
                }
            } else if du > 0.0 {
                hi = hi.min(rem / du);
            } else {
                lo = lo.max(rem / du);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn solve(&self, scale: f64) -> [f64; 2] {
        let lin_tol = 1e-9 * scale.max(1.0);
        let quad_tol = 1e-9 * self.rho_t.max(1e-12);
        let mut cands: Vec<[f64; 2]> = Vec::with_capacity(64);

        // interior stationary point of the concave model
        if let Some(d) = solve_2x2(self.obj.h, [-self.obj.g[0], -self.obj.g[1]]) {
            cands.push(d);
        }

        // one linear constraint active: its 1-d vertex and the interval ends
        let mut line_geom: Vec<([f64; 2], [f64; 2], f64, f64)> = Vec::with_capacity(5);
        for (k, l) in self.lins.iter().enumerate() {
            let nn = l.a[0] * l.a[0] + l.a[1] * l.a[1];
            if nn < 1e-300 {
                continue;
            }
            let p0 = [l.a[0] * l.b / nn, l.a[1] * l.b / nn];
            let u = {
                let inv = 1.0 / nn.sqrt();
                [-l.a[1] * inv, l.a[0] * inv]
            };
            let Some((lo, hi)) = self.line_interval(p0, u, k) else {
                continue;
            };
            line_geom.push((p0, u, lo, hi));
            let gl = self.obj.grad(p0);
            let lin_coef = gl[0] * u[0] + gl[1] * u[1];
            let curv = 0.5
                * (u[0] * (self.obj.h[0][0] * u[0] + self.obj.h[0][1] * u[1])
                    + u[1] * (self.obj.h[1][0] * u[0] + self.obj.h[1][1] * u[1]));
            let mut ts: Vec<f64> = vec![lo, hi];
            if curv < -1e-300 {
                ts.push((-lin_coef / (2.0 * curv)).clamp(lo, hi));
            }
            for t in ts {
                if t.is_finite() {
                    cands.push([p0[0] + t * u[0], p0[1] + t * u[1]]);
                }
            }
        }

        let best_of = |cands: &[[f64; 2]], check_quads: bool| -> Option<[f64; 2]> {
            let mut best: Option<([f64; 2], f64)> = None;
            for &d in cands {
                if !d[0].is_finite() || !d[1].is_finite() {
                    continue;
                }
                if !self.lin_ok(d, lin_tol) || (check_quads && !self.quad_ok(d, quad_tol)) {
                    continue;
                }
                let v = self.obj.eval(d);
                if best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((d, v));
                }
            }
            best.map(|(d, _)| d)
        };

        // the relaxation without the quadratic constraints is exact whenever
        // its winner already satisfies them
        if let Some(d) = best_of(&cands, false) {
            if self.quad_ok(d, quad_tol) {
                return d;
            }
        }

        // a correlation constraint matters; the two are identical when the
        // parties transmit at the same power
        let same = (self.quads[0].f0 - self.quads[1].f0).abs()
            <= 1e-12 * self.quads[0].f0.abs().max(1e-300)
            && (0..2).all(|i| {
                (self.quads[0].g[i] - self.quads[1].g[i]).abs()
                    <= 1e-12 * self.quads[0].g[i].abs().max(1e-300)
            });
        let quads: &[Quad2] = if same { &self.quads[..1] } else { &self.quads[..] };

        for q in quads {
            // boundary crossings along each active line
            for &(p0, u, lo, hi) in &line_geom {
                let q0 = q.eval(p0) - self.rho_t;
                let gq = q.grad(p0);
                let b1 = gq[0] * u[0] + gq[1] * u[1];
                let b2 = 0.5
                    * (u[0] * (q.h[0][0] * u[0] + q.h[0][1] * u[1])
                        + u[1] * (q.h[1][0] * u[0] + q.h[1][1] * u[1]));
                for t in roots_quadratic(b2, b1, q0) {
                    if t.is_finite() && t >= lo - 1e-9 && t <= hi + 1e-9 {
                        cands.push([p0[0] + t * u[0], p0[1] + t * u[1]]);
                    }
                }
            }
            // constraint active alone: root-scan the multiplier of
            // (H - mu P) d = mu g_c - g over the constraint residual
            let residual = |mu: f64| -> Option<(f64, [f64; 2])> {
                let m = [
                    [self.obj.h[0][0] - mu * q.h[0][0], self.obj.h[0][1] - mu * q.h[0][1]],
                    [self.obj.h[1][0] - mu * q.h[1][0], self.obj.h[1][1] - mu * q.h[1][1]],
                ];
                let rhs = [mu * q.g[0] - self.obj.g[0], mu * q.g[1] - self.obj.g[1]];
                let d = solve_2x2(m, rhs)?;
                Some((q.eval(d) - self.rho_t, d))
            };
            let mut prev: Option<(f64, f64)> = None;
            for e in -10..=12 {
                let mu = if e == -10 { 0.0 } else { 10f64.powi(e) };
                let Some((r, d)) = residual(mu) else {
                    prev = None;
                    continue;
                };
                if r.abs() < 1e-12 {
                    cands.push(d);
                }
                if let Some((pmu, pr)) = prev {
                    if pr.signum() != r.signum() {
                        let (mut a, mut b) = (pmu, mu);
                        let mut ra = pr;
                        for _ in 0..60 {
                            let mid = 0.5 * (a + b);
                            match residual(mid) {
                                Some((rm, _)) => {
                                    if rm.signum() == ra.signum() {
                                        a = mid;
                                        ra = rm;
                                    } else {
                                        b = mid;
                                    }
                                }
                                None => break,
                            }
                        }
                        if let Some((_, d)) = residual(0.5 * (a + b)) {
                            cands.push(d);
                        }
                    }
                }
                prev = Some((mu, r));
            }
        }

        if let Some(d) = best_of(&cands, true) {
            return d;
        }
        // no model-feasible candidate: fall back to the least-violating
        // point of a coarse scan so the iteration can keep moving
        let (mut bd, mut bv) = ([0.0, 0.0], f64::INFINITY);
        let bounds = self.box_bounds();
        for i in 0..=32 {
            for j in 0..=32 {
                let d = [
                    bounds.0[0] + (bounds.1[0] - bounds.0[0]) * i as f64 / 32.0,
                    bounds.0[1] + (bounds.1[1] - bounds.0[1]) * j as f64 / 32.0,
                ];
                let mut viol = 0.0;
                for l in &self.lins {
                    viol += (l.a[0] * d[0] + l.a[1] * d[1] - l.b).max(0.0) / scale.max(1e-12);
                }
                for q in &self.quads {
                    viol += (q.eval(d) - self.rho_t).max(0.0) / self.rho_t.max(1e-12);
                }
                let v = viol - 1e-9 * self.obj.eval(d);
                if v < bv {
                    bv = v;
                    bd = d;
                }
            }
        }
        bd
    }

    /// Bounding box of the step implied by the four box constraints.
    fn box_bounds(&self) -> ([f64; 2], [f64; 2]) {
        let (mut lo, mut hi) = ([f64::NEG_INFINITY; 2], [f64::INFINITY; 2]);
        for l in &self.lins {
            for i in 0..2 {
                if l.a[i] == 1.0 && l.a[1 - i] == 0.0 {
                    hi[i] = hi[i].min(l.b);
                }
                if l.a[i] == -1.0 && l.a[1 - i] == 0.0 {
                    lo[i] = lo[i].max(-l.b);
                }
            }
        }
        (lo, hi)
    }
}

fn roots_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        if b.abs() < 1e-300 {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let s = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * s);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Sequential-convex iteration from `init`, capped at `max_iterations`.
///
/// Returns the best iterate satisfying the exact constraints; errors if no
/// iterate ever does.
pub fn scp_solve(problem: &impl ScpProblem, init: [f64; 2]) -> Result<OptResult, OptError> {
    let p = problem.params().clone();
    let mut t = init;
    let mut trace: Vec<IterateRecord> = Vec::with_capacity(p.max_iterations as usize);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..p.max_iterations {
        iterations += 1;
        let (f0, g, h) = stencil(&|x| problem.objective(x), t, p.rel_step)?;
        let keep_negative = p.projection == HessianProjection::NegativeSemidefinite;
        let obj = Quad2 { f0, g, h: project_2x2(h, keep_negative) };
        let corr = |x: [f64; 2]| -> Option<f64> {
            (x[0] > 0.0 && x[1] > 0.0).then(|| problem.correlations(x)).map(|c| c.0)
        };
        let corr_b = |x: [f64; 2]| -> Option<f64> {
            (x[0] > 0.0 && x[1] > 0.0).then(|| problem.correlations(x)).map(|c| c.1)
        };
        let (ra0, ga, ha) = stencil(&corr, t, p.rel_step)?;
        let (rb0, gb, hb) = stencil(&corr_b, t, p.rel_step)?;
        let quads = [
            Quad2 { f0: ra0, g: ga, h: project_2x2(ha, false) },
            Quad2 { f0: rb0, g: gb, h: project_2x2(hb, false) },
        ];

        // linear constraints on the step d = x - t: budget plus the box
        // formed by global bounds intersected with the trust region
        let radius = p.trust_fraction * p.t_p;
        let lo = [(p.min_time - t[0]).max(-radius), (p.min_time - t[1]).max(-radius)];
        let hi = [
            (p.t_p / 2.0 - t[0]).min(radius).max(lo[0]),
            (p.t_p / 2.0 - t[1]).min(radius).max(lo[1]),
        ];
        let lins = vec![
            Lin { a: [1.0, 1.0], b: p.t_p / 2.0 - (t[0] + t[1]) },
            Lin { a: [1.0, 0.0], b: hi[0] },
            Lin { a: [-1.0, 0.0], b: -lo[0] },
            Lin { a: [0.0, 1.0], b: hi[1] },
            Lin { a: [0.0, -1.0], b: -lo[1] },
        ];
        let sub = Subproblem { obj, lins, quads, rho_t: p.rho_t };
        let d = sub.solve(p.t_p);
        let mut next = [t[0] + d[0], t[1] + d[1]];
        for v in &mut next {
            *v = v.clamp(p.min_time, p.t_p / 2.0);
        }
        let excess = next[0] + next[1] - p.t_p / 2.0;
        if excess > 0.0 {
            next[0] = (next[0] - 0.5 * excess).max(p.min_time);
            next[1] = (p.t_p / 2.0 - next[0]).max(p.min_time);
        }
        let step = (next[0] - t[0]).abs().max((next[1] - t[1]).abs());
        t = next;
        let feasible = problem.exact_feasible(t);
        let rate = if feasible { problem.objective(t).unwrap_or(0.0).max(0.0) } else { 0.0 };
        trace.push(IterateRecord { t_d: t[0], t_s: t[1], rate, feasible });
        if step <= 1e-7 * p.t_p {
            converged = true;
            break;
        }
    }
    let best = trace
        .iter()
        .filter(|r| r.feasible)
        .cloned()
        .max_by(|a, b| a.rate.total_cmp(&b.rate))
        .ok_or(OptError::NoFeasibleIterate { iterations })?;
    Ok(OptResult {
        t_d: best.t_d,
        t_s: best.t_s,
        rate: best.rate,
        iterations,
        converged,
        trace,
    })
}

/// Grid scan over `(T_d, T_s)` in `(0, T_p/2]^2` at step `step_fraction *
/// T_p`, with exact-constraint filtering.
pub fn exhaustive_search(
    problem: &impl ScpProblem,
    step_fraction: f64,
) -> Result<OptResult, OptError> {
    assert!(step_fraction > 0.0);
    let p = problem.params();
    let step = step_fraction * p.t_p;
    let kmax = (p.t_p / 2.0 / step).floor() as u64;
    let mut best: Option<IterateRecord> = None;
    let mut evaluated = 0u32;
    for i in 1..=kmax {
        let t_d = i as f64 * step;
        for j in 1..=kmax {
            let t_s = j as f64 * step;
            let t = [t_d, t_s];
            evaluated += 1;
            if !problem.exact_feasible(t) {
                continue;
            }
            let Some(rate) = problem.objective(t) else {
                continue;
            };
            if best.as_ref().map_or(true, |b| rate > b.rate) {
                best = Some(IterateRecord { t_d, t_s, rate, feasible: true });
            }
        }
    }
    let best = best.ok_or(OptError::EmptyFeasibleGrid)?;
    Ok(OptResult {
        t_d: best.t_d,
        t_s: best.t_s,
        rate: best.rate,
        iterations: evaluated,
        converged: true,
        trace: vec![best],
    })
}
