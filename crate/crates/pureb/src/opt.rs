//! Minimization of S(rho || rho_AB(p)) over pure bosonic extension
//! coefficients: the REE objective, its analytic gradient, and an L-BFGS
//! driver with random restarts.
//!
//! The gradient differentiates through the matrix logarithm with the
//! divided-difference (Daleckii-Krein) form of the Frechet derivative in
//! the eigenbasis of the marginal, which is exact for Hermitian arguments.
//! A finite-difference contract in the tests keeps it honest.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dicke::{rdm_from_params, BTensor, DickeBasis, PurebParams};
use crate::qstate::{
    hermitian_eig, matrix_log_pade, C64, ComplexMatrix, DensityMatrix, QstateError, Result,
    DEFAULT_LOG_FLOOR,
};

/// Which matrix-log backend evaluates the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBackend {
    /// Spectral log; exact for Hermitian arguments. Default.
    Eigen,
    /// Inverse scaling-and-squaring with a Gauss-Legendre rational
    /// approximant; kept for parity experiments.
    Pade { m: usize, k: usize },
}

impl LogBackend {
    pub fn name(&self) -> String {
        match self {
            LogBackend::Eigen => "eigen".into(),
            LogBackend::Pade { m, k } => format!("pade({m},{k})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub tolerance: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub log_backend: LogBackend,
    pub floor: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            restarts: 3,
            max_iters: 2000,
            log_backend: LogBackend::Eigen,
            floor: DEFAULT_LOG_FLOOR,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerResult {
    /// Best value of S(rho || rho_AB(p)) found across restarts.
    pub ree: f64,
    pub params: PurebParams,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    pub per_restart: Vec<f64>,
}

impl OptimizerResult {
    /// Checkpoint: JSON {d_a, d_b, n, raw_re, raw_im, objective, seed, backend}.
    pub fn to_checkpoint(&self, seed: u64, backend: &LogBackend) -> serde_json::Value {
        let mut v = self.params.to_json();
        v["objective"] = serde_json::json!(self.ree);
        v["seed"] = serde_json::json!(seed);
        v["backend"] = serde_json::json!(backend.name());
        v
    }
}

/// Eigenvalues of a unit-trace marginal below this threshold are exact
/// zeros up to rounding (structural rank deficiency of the marginal) and
/// are snapped to the floor, so the floored log stays smooth instead of
/// amplifying O(1e-16) noise through 1/w.
pub const ZERO_EIG_SNAP: f64 = 1e-13;

/// Shared per-target data for repeated objective evaluations.
pub struct ReeProblem<'a> {
    pub rho: &'a DensityMatrix,
    pub bt: &'a BTensor,
    pub cfg: &'a OptimizerConfig,
    /// Tr(rho ln rho), evaluated once on the support of rho.
    rho_entropy: f64,
}

impl<'a> ReeProblem<'a> {
    pub fn new(rho: &'a DensityMatrix, bt: &'a BTensor, cfg: &'a OptimizerConfig) -> Result<Self> {
        let (d_a, d_b) = rho.dims();
        if d_b != bt.d {
            return Err(QstateError::DimensionMismatch(format!(
                "rho B dim {} vs tensor d {}",
                d_b, bt.d
            )));
        }
        let _ = d_a;
        let (w, _) = hermitian_eig(rho.mat())?;
        let rho_entropy = w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum();
        Ok(Self { rho, bt, cfg, rho_entropy })
    }

    fn marginal(&self, p: &PurebParams) -> Result<DensityMatrix> {
        rdm_from_params(&p.normalized(), self.bt)
    }

    /// S(rho || rho_AB(p/||p||)).
    pub fn objective(&self, p: &PurebParams) -> Result<f64> {
        let sigma = self.marginal(p)?;
        let cross = match self.cfg.log_backend {
            LogBackend::Eigen => {
                let (w, v) = hermitian_eig(sigma.mat())?;
                let r = v.adjoint() * self.rho.mat() * &v;
                let floor = self.cfg.floor;
                (0..w.len())
                    .map(|a| {
                        let we = if w[a] < ZERO_EIG_SNAP { floor } else { w[a] };
                        r[(a, a)].re * we.ln()
                    })
                    .sum::<f64>()
            }
            LogBackend::Pade { m, k } => {
                // the rational form needs a strictly positive spectrum
                let d = sigma.dim();
                let shifted = sigma.mat() + ComplexMatrix::identity(d, d).scale(self.cfg.floor);
                let log_sigma = matrix_log_pade(&shifted, m, k)?;
                (self.rho.mat() * log_sigma).trace().re
            }
        };
        Ok(self.rho_entropy - cross)
    }

    /// Objective together with the Wirtinger gradient w.r.t. the raw
    /// (unnormalized) parameters. The real and imaginary parts of the
    /// returned array are the true partial derivatives w.r.t. the real and
    /// imaginary parts of each raw coefficient.
    pub fn objective_and_gradient(&self, p: &PurebParams) -> Result<(f64, DMatrix<C64>)> {
        let nrm = p.norm();
        let pn = p.normalized();
        let sigma = rdm_from_params(&pn, self.bt)?;
        let (w, v) = hermitian_eig(sigma.mat())?;
        let dim = w.len();
        let floor = self.cfg.floor;
        let flog = |x: f64| if x < ZERO_EIG_SNAP { floor.ln() } else { x.ln() };

        let r = v.adjoint() * self.rho.mat() * &v;
        let value =
            self.rho_entropy - (0..dim).map(|a| r[(a, a)].re * flog(w[a])).sum::<f64>();

        // Frechet derivative of the floored log by divided differences
        let mut kmat = ComplexMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                let g = if (w[a] - w[b]).abs() < 1e-12 {
                    if w[a] < ZERO_EIG_SNAP { 0.0 } else { 1.0 / w[a] }
                } else {
                    (flog(w[a]) - flog(w[b])) / (w[a] - w[b])
                };
                kmat[(a, b)] = r[(a, b)] * g;
            }
        }
        // d Tr(rho ln sigma)[d sigma] = Tr(kf . d sigma)
        let kf = &v * kmat * v.adjoint();

        let d_a = pn.d_a;
        let d_b = pn.d_b;
        // c[j, k'] = d(-Tr rho ln sigma)/d p*_{j,k'} at the normalized point
        let mut c = DMatrix::<C64>::zeros(d_a, pn.raw.ncols());
        for e in &self.bt.entries {
            for a in 0..d_a {
                let pa = pn.raw[(a, e.k_pos)];
                if pa.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d_a {
                    c[(j, e.kp_pos)] -=
                        kf[(j * d_b + e.j, a * d_b + e.i)] * pa * Complex::new(e.value, 0.0);
                }
            }
        }
        // chain through p = raw/||raw||: the objective is scale invariant,
        // so the raw gradient is the tangential projection
        let s_re: f64 = c
            .iter()
            .zip(p.raw.iter())
            .map(|(ci, pi)| (ci * pi.conj()).re)
            .sum();
        let grad = DMatrix::from_fn(d_a, pn.raw.ncols(), |i, j| {
            (c[(i, j)] / Complex::new(nrm, 0.0)
                - p.raw[(i, j)] * Complex::new(s_re / (nrm * nrm * nrm), 0.0))
                * Complex::new(2.0, 0.0)
        });
        Ok((value, grad))
    }
}

/// Options for the generic real-vector L-BFGS driver.
#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub grad_tolerance: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, max_iters: 2000, tolerance: 1e-10, grad_tolerance: 1e-11 }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Strong-Wolfe line search (c1 = 1e-4, c2 = 0.9) with a zoom phase.
/// `phi` evaluates value and directional derivative at a step length.
fn strong_wolfe(
    mut phi: impl FnMut(f64) -> (f64, f64),
    f0: f64,
    d0: f64,
    a_init: f64,
) -> Option<(f64, f64)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut g_prev = d0;
    let mut a = a_init;
    fn zoom(
        phi: &mut dyn FnMut(f64) -> (f64, f64),
        f0: f64,
        d0: f64,
        mut lo: f64,
        mut f_lo: f64,
        mut g_lo: f64,
        mut hi: f64,
        mut f_hi: f64,
    ) -> Option<(f64, f64)> {
        const C1: f64 = 1e-4;
        const C2: f64 = 0.9;
        for _ in 0..40 {
            // cubic-safeguarded bisection
            let mut t = 0.5 * (lo + hi);
            let dspan = hi - lo;
            if g_lo.abs() > 0.0 {
                let cand = lo - 0.5 * g_lo * dspan * dspan / (f_hi - f_lo - g_lo * dspan);
                if cand.is_finite() && (cand - lo) * (cand - hi) < 0.0 {
                    t = cand;
                }
            }
            let (ft, gt) = phi(t);
            if ft > f0 + C1 * t * d0 || ft >= f_lo {
                hi = t;
                f_hi = ft;
            } else {
                if gt.abs() <= -C2 * d0 {
                    return Some((t, ft));
                }
                if gt * (hi - lo) >= 0.0 {
                    hi = lo;
                    f_hi = f_lo;
                }
                lo = t;
                f_lo = ft;
                g_lo = gt;
            }
            if (hi - lo).abs() < 1e-16 * (1.0 + lo.abs()) {
                return Some((lo, f_lo));
            }
        }
        Some((lo, f_lo))
    }
    for i in 0..20 {
        let (fa, ga) = phi(a);
        if fa > f0 + C1 * a * d0 || (i > 0 && fa >= f_prev) {
            return zoom(&mut phi, f0, d0, a_prev, f_prev, g_prev, a, fa);
        }
        if ga.abs() <= -C2 * d0 {
            return Some((a, fa));
        }
        if ga >= 0.0 {
            return zoom(&mut phi, f0, d0, a, fa, ga, a_prev, f_prev);
        }
        a_prev = a;
        f_prev = fa;
        g_prev = ga;
        a *= 2.0;
    }
    None
}

/// L-BFGS over a real parameter vector, falling back to backtracking
/// gradient descent when the line search fails twice in a row.
pub fn lbfgs_minimize(
    mut fg: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: Vec<f64>,
    opts: &LbfgsOptions,
) -> LbfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut ls_failures = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= opts.grad_tolerance {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &q);
            for (qk, yk) in q.iter_mut().zip(&y_hist[i]) {
                *qk -= alpha[i] * yk;
            }
        }
        if m > 0 {
            let last = m - 1;
            let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
            for qk in q.iter_mut() {
                *qk *= gamma;
            }
        }
        for i in 0..m {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            for (qk, sk) in q.iter_mut().zip(&s_hist[i]) {
                *qk += (alpha[i] - beta) * sk;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut d0 = dot(&g, &dir);
        if d0 >= 0.0 {
            // not a descent direction: reset to steepest descent
            dir = g.iter().map(|v| -v).collect();
            d0 = -gnorm * gnorm;
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        let mut trial_x = vec![0.0; n];
        let mut trial_g = vec![0.0; n];
        let phi = |a: f64, fg: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
                   trial_x: &mut Vec<f64>, trial_g: &mut Vec<f64>| {
            for k in 0..n {
                trial_x[k] = x[k] + a * dir[k];
            }
            let (fa, ga) = fg(trial_x);
            *trial_g = ga;
            (fa, dot(trial_g, &dir))
        };

        let a_init = if m == 0 { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let ls = strong_wolfe(
            |a| phi(a, &mut fg, &mut trial_x, &mut trial_g),
            f,
            d0,
            a_init,
        );
        let (step, f_new) = match ls {
            Some((a, fa)) if fa <= f => {
                ls_failures = 0;
                (a, fa)
            }
            _ => {
                ls_failures += 1;
                if ls_failures >= 2 {
                    s_hist.clear();
                    y_hist.clear();
                    rho_hist.clear();
                }
                // backtracking along steepest descent
                let sd: Vec<f64> = g.iter().map(|v| -v).collect();
                let mut a = 1.0 / gnorm.max(1.0);
                let mut accepted = None;
                for _ in 0..50 {
                    for k in 0..n {
                        trial_x[k] = x[k] + a * sd[k];
                    }
                    let (fa, ga) = fg(&trial_x);
                    if fa < f {
                        trial_g = ga;
                        accepted = Some((a, fa));
                        break;
                    }
                    a *= 0.5;
                }
                match accepted {
                    Some((a, fa)) => {
                        dir = sd;
                        let _ = a;
                        (1.0, fa) // trial_x already holds the point
                    }
                    None => {
                        // no descent found in either direction: stationary
                        converged = true;
                        break;
                    }
                }
            }
        };
        let _ = step;

        let s: Vec<f64> = trial_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        let df = f - f_new;
        x = trial_x.clone();
        g = trial_g.clone();
        f = f_new;
        if df.abs() <= opts.tolerance {
            converged = true;
            break;
        }
    }
    LbfgsOutcome { x, value: f, iterations, converged }
}

fn params_to_reals(p: &PurebParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * p.raw.len());
    for v in p.raw.iter() {
        out.push(v.re);
        out.push(v.im);
    }
    out
}

fn reals_to_params(x: &[f64], template: &PurebParams) -> PurebParams {
    let raw = DMatrix::from_iterator(
        template.raw.nrows(),
        template.raw.ncols(),
        x.chunks(2).map(|c| C64::new(c[0], c[1])),
    );
    PurebParams { raw, ..template.clone() }
}

fn grad_to_reals(g: &DMatrix<C64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * g.len());
    for v in g.iter() {
        out.push(v.re);
        out.push(v.im);
    }
    out
}

/// Random complex-normal initial parameters.
pub fn random_init(d_a: usize, d_b: usize, n: usize, seed: u64) -> Result<PurebParams> {
    let basis = DickeBasis::new(n, d_b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(d_a, basis.len(), |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    PurebParams::new(raw, d_a, d_b, n)
}

fn run_single(problem: &ReeProblem<'_>, init: PurebParams) -> Result<(f64, PurebParams, usize, bool)> {
    let opts = LbfgsOptions {
        memory: 10,
        max_iters: problem.cfg.max_iters,
        tolerance: problem.cfg.tolerance,
        grad_tolerance: 1e-11,
    };
    let x0 = params_to_reals(&init);
    let template = init.clone();
    let outcome = lbfgs_minimize(
        |x| {
            let p = reals_to_params(x, &template);
            match problem.objective_and_gradient(&p) {
                Ok((f, g)) => (f, grad_to_reals(&g)),
                Err(_) => (f64::INFINITY, vec![0.0; x.len()]),
            }
        },
        x0,
        &opts,
    );
    let p = reals_to_params(&outcome.x, &template);
    Ok((outcome.value, p, outcome.iterations, outcome.converged))
}

/// Best-of-restarts minimization of S(rho || rho_AB(p)) at extension count `n`.
pub fn minimize_ree(rho: &DensityMatrix, n: usize, cfg: &OptimizerConfig) -> Result<OptimizerResult> {
    let (_, d_b) = rho.dims();
    let bt = BTensor::new(n, d_b)?;
    minimize_ree_with_tensor(rho, &bt, cfg, None)
}

/// Variant reusing a prebuilt B-tensor, optionally warm-starting the first
/// restart from previously optimized coefficients.
pub fn minimize_ree_with_tensor(
    rho: &DensityMatrix,
    bt: &BTensor,
    cfg: &OptimizerConfig,
    warm: Option<&PurebParams>,
) -> Result<OptimizerResult> {
    if cfg.restarts < 1 || cfg.tolerance <= 0.0 {
        return Err(QstateError::InvalidArgument(
            "restarts >= 1 and tolerance > 0 required".into(),
        ));
    }
    let (d_a, d_b) = rho.dims();
    let problem = ReeProblem::new(rho, bt, cfg)?;
    let mut per_restart = Vec::with_capacity(cfg.restarts);
    let mut best: Option<(f64, PurebParams, bool)> = None;
    let mut total_iters = 0usize;
    for r in 0..cfg.restarts {
        let init = match (r, warm) {
            (0, Some(w)) => w.clone(),
            _ => random_init(d_a, d_b, bt.n, cfg.seed.wrapping_add(r as u64))?,
        };
        let (val, p, iters, conv) = run_single(&problem, init)?;
        total_iters += iters;
        per_restart.push(val);
        let better = best.as_ref().map_or(true, |(b, _, _)| val < *b);
        if better {
            best = Some((val, p, conv));
        }
        // a warm start that already sits at a certified zero needs no re-runs
        if warm.is_some() && r == 0 && val <= cfg.tolerance {
            break;
        }
    }
    let (ree, params, converged) = best.unwrap();
    Ok(OptimizerResult {
        ree,
        params,
        iterations: total_iters,
        restarts_used: per_restart.len(),
        converged,
        per_restart,
    })
}

/// REE values along a parametrized family of states, optionally carrying
/// the optimum forward between neighboring parameters.
pub fn ree_curve(
    family: impl Fn(f64) -> Result<DensityMatrix>,
    alphas: &[f64],
    n: usize,
    cfg: &OptimizerConfig,
    warm_start: bool,
) -> Result<Vec<(f64, OptimizerResult)>> {
    let mut out = Vec::with_capacity(alphas.len());
    let mut prev: Option<PurebParams> = None;
    let mut bt: Option<BTensor> = None;
    for &alpha in alphas {
        let rho = family(alpha)?;
        let (_, d_b) = rho.dims();
        if bt.as_ref().map(|b| b.d) != Some(d_b) {
            bt = Some(BTensor::new(n, d_b)?);
        }
        let res = minimize_ree_with_tensor(&rho, bt.as_ref().unwrap(), cfg, prev.as_ref())?;
        if warm_start {
            prev = Some(res.params.clone());
        }
        out.push((alpha, res));
    }
    Ok(out)
}
