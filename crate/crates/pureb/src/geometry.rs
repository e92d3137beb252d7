//! Ray-based boundary geometry in Gell-Mann coordinates: distances from
//! the maximally mixed state to the density-matrix, PPT, convex-hull
//! (BCHA) and pure-bosonic-extension boundaries along a direction, plus
//! plane scans and random gap surveys built on top of them.
//!
//! All boundary values are the scale `beta` at which `I/d + beta rho_hat
//! . lambda` leaves the respective set, with `rho_hat` a unit vector of
//! Gell-Mann coordinates.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dicke::{BTensor, PurebParams};
use crate::opt::{minimize_ree_with_tensor, OptimizerConfig};
use crate::qstate::{
    gellmann_decompose, gellmann_reconstruct, lambda_min, partial_transpose, random_pure_state,
    C64, DensityMatrix, GellMannBasis, QstateError, Result, StateVector,
};

/// Bracket width at which the eigenvalue bisections stop; the smallest
/// eigenvalue is sqrt(2)-Lipschitz in beta for a unit direction, so this
/// pins lambda_min to well under 1e-10.
const BISECT_TOL: f64 = 1e-11;

/// A unit direction in Gell-Mann coordinate space together with the
/// bipartition it lives on.
#[derive(Debug, Clone)]
pub struct Ray {
    pub direction: StateVector,
    pub d_a: usize,
    pub d_b: usize,
}

impl Ray {
    pub fn new(direction: StateVector, d_a: usize, d_b: usize) -> Result<Self> {
        if direction.d != d_a * d_b {
            return Err(QstateError::DimensionMismatch(format!(
                "direction lives on dim {} but bipartition is {}x{}",
                direction.d, d_a, d_b
            )));
        }
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(QstateError::InvalidArgument(format!(
                "ray direction must be unit norm, got {}",
                direction.norm()
            )));
        }
        Ok(Self { direction, d_a, d_b })
    }

    /// Direction from the maximally mixed state toward `rho`.
    pub fn from_state(rho: &DensityMatrix, basis: &GellMannBasis) -> Result<Self> {
        let (d_a, d_b) = rho.dims();
        let v = gellmann_decompose(rho, basis);
        if v.norm() < 1e-12 {
            return Err(QstateError::InvalidArgument(
                "state coincides with the maximally mixed state; no direction".into(),
            ));
        }
        Ray::new(v.normalized(), d_a, d_b)
    }

    /// The state I/d + beta * direction . lambda. Hermitian and unit trace
    /// by construction; positive only for beta up to the DM boundary.
    pub fn state_at(&self, beta: f64, basis: &GellMannBasis) -> DensityMatrix {
        let scaled = StateVector {
            vec: self.direction.vec.iter().map(|x| beta * x).collect(),
            d: self.direction.d,
        };
        DensityMatrix::new_unchecked(gellmann_reconstruct(&scaled, basis), self.d_a, self.d_b)
    }
}

/// Norm of the Gell-Mann coordinates of `rho`: the beta at which the ray
/// through `rho` reaches it.
pub fn state_beta(rho: &DensityMatrix, basis: &GellMannBasis) -> f64 {
    gellmann_decompose(rho, basis).norm()
}

/// Invert `alpha -> state_beta(family(alpha))` by bisection, assuming it
/// is monotone increasing on [alpha_lo, alpha_hi].
pub fn alpha_for_beta(
    family: impl Fn(f64) -> Result<DensityMatrix>,
    basis: &GellMannBasis,
    beta: f64,
    alpha_lo: f64,
    alpha_hi: f64,
) -> Result<f64> {
    let g = |a: f64| -> Result<f64> { Ok(state_beta(&family(a)?, basis) - beta) };
    let (mut lo, mut hi) = (alpha_lo, alpha_hi);
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if glo > 0.0 || ghi < 0.0 {
        return Err(QstateError::InvalidArgument(format!(
            "beta {beta} not bracketed by alpha range [{alpha_lo}, {alpha_hi}]"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of a lambda_min profile that starts positive at beta = 0 and is
/// concave along the ray, so the positive root is unique.
fn bisect_boundary(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if f(0.0)? <= 0.0 {
        return Err(QstateError::ContractViolation(
            "lambda_min not positive at the maximally mixed state".into(),
        ));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut bracketed = false;
    for _ in 0..64 {
        if f(hi)? < 0.0 {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !bracketed {
        return Err(QstateError::ContractViolation(
            "lambda_min never negative along the ray".into(),
        ));
    }
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Distance to the density-matrix boundary: smallest beta with
/// lambda_min(rho(beta)) = 0.
pub fn beta_dm(ray: &Ray, basis: &GellMannBasis) -> Result<f64> {
    bisect_boundary(|b| lambda_min(ray.state_at(b, basis).mat()))
}

/// Distance to the boundary of the PPT set: smallest beta at which the
/// state or its partial transpose loses positivity. The min of two
/// concave profiles is concave, so the bisection bracket stays valid.
pub fn beta_ppt(ray: &Ray, basis: &GellMannBasis) -> Result<f64> {
    bisect_boundary(|b| {
        let rho = ray.state_at(b, basis);
        let direct = lambda_min(rho.mat())?;
        let transposed = lambda_min(&partial_transpose(&rho))?;
        Ok(direct.min(transposed))
    })
}

// ---------------------------------------------------------------------------
// Dense revised simplex, two phases. Small problems only (a few hundred
// columns); the explicit basis inverse is refactorized periodically.

const LP_TOL: f64 = 1e-9;
const LP_PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    /// Dual prices per equality row (original row signs); a candidate
    /// column a_j improves the LP iff c_j - dual . a_j > 0.
    pub dual: Vec<f64>,
    /// Final basis (raw column indices), reusable as a warm start.
    pub basis: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(SimplexSolution),
    Infeasible,
}

struct Simplex {
    /// m x (n + m): real columns then one artificial per row.
    cols: DMatrix<f64>,
    b: DVector<f64>,
    m: usize,
    n: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    pivots: usize,
    /// Row sign flips applied to make b nonnegative.
    flips: Vec<f64>,
}

impl Simplex {
    fn new(a: &DMatrix<f64>, b: &[f64]) -> Self {
        let m = a.nrows();
        let n = a.ncols();
        let mut cols = DMatrix::zeros(m, n + m);
        let mut bv = DVector::from_row_slice(b);
        let mut flips = vec![1.0; m];
        for i in 0..m {
            let flip = if bv[i] < 0.0 { -1.0 } else { 1.0 };
            flips[i] = flip;
            bv[i] *= flip;
            for j in 0..n {
                cols[(i, j)] = flip * a[(i, j)];
            }
            cols[(i, n + i)] = 1.0;
        }
        let basis: Vec<usize> = (n..n + m).collect();
        let mut in_basis = vec![false; n + m];
        for &j in &basis {
            in_basis[j] = true;
        }
        Simplex {
            cols,
            b: bv.clone(),
            m,
            n,
            basis,
            in_basis,
            binv: DMatrix::identity(m, m),
            xb: bv,
            pivots: 0,
            flips,
        }
    }

    fn prices(&self, cost: &[f64]) -> DVector<f64> {
        let mut y = DVector::zeros(self.m);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                y += self.binv.row(i).transpose().scale(cb);
            }
        }
        y
    }

    /// Entering column with positive reduced cost among columns < limit;
    /// Dantzig rule, or Bland's rule when anti-cycling is on.
    fn entering(&self, cost: &[f64], limit: usize, bland: bool) -> Option<usize> {
        let y = self.prices(cost);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..limit {
            if self.in_basis[j] {
                continue;
            }
            let mut r = cost[j];
            for i in 0..self.m {
                r -= y[i] * self.cols[(i, j)];
            }
            if r > LP_TOL {
                if bland {
                    return Some(j);
                }
                if best.map_or(true, |(_, br)| r > br) {
                    best = Some((j, r));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn refactorize(&mut self) -> Result<()> {
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (i, &j) in self.basis.iter().enumerate() {
            bmat.set_column(i, &self.cols.column(j));
        }
        let inv = bmat.lu().try_inverse().ok_or_else(|| {
            QstateError::NumericalDomain("simplex basis became singular".into())
        })?;
        self.binv = inv;
        self.xb = &self.binv * &self.b;
        for x in self.xb.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        Ok(())
    }

    fn pivot(&mut self, enter: usize, row: usize, d: &DVector<f64>) -> Result<()> {
        let theta = self.xb[row] / d[row];
        for i in 0..self.m {
            if i != row {
                self.xb[i] = (self.xb[i] - theta * d[i]).max(0.0);
            }
        }
        self.xb[row] = theta;
        self.in_basis[self.basis[row]] = false;
        self.in_basis[enter] = true;
        self.basis[row] = enter;
        let pivot_val = d[row];
        let pivot_row = self.binv.row(row).into_owned() / pivot_val;
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = d[i];
            if factor != 0.0 {
                let updated = self.binv.row(i).into_owned() - pivot_row.scale(factor);
                self.binv.set_row(i, &updated);
            }
        }
        self.binv.set_row(row, &pivot_row);
        self.pivots += 1;
        if self.pivots % 32 == 0 {
            self.refactorize()?;
        }
        Ok(())
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        (0..self.m).map(|i| cost[self.basis[i]] * self.xb[i]).sum()
    }

    /// Primal iterations until no entering column remains or `stop` says
    /// the current basis is good enough. Dantzig rule, switching to
    /// Bland's rule permanently once the objective stagnates (the hull
    /// LPs are heavily degenerate: almost every right-hand side is zero).
    fn run(
        &mut self,
        cost: &[f64],
        limit: usize,
        stop: Option<f64>,
        artificial_guard: bool,
    ) -> Result<()> {
        let budget = 2000 + 50 * (self.m + limit);
        let mut bland = false;
        let mut stagnant = 0usize;
        let mut last_obj = self.objective(cost);
        for _ in 0..budget {
            if let Some(target) = stop {
                if last_obj >= target {
                    return Ok(());
                }
            }
            let Some(enter) = self.entering(cost, limit, bland) else {
                return Ok(());
            };
            let d = &self.binv * self.cols.column(enter).into_owned();
            // min-ratio test; among near-ties prefer the largest pivot for
            // stability, then the smallest basis index (Bland). With the
            // guard on, a parked artificial whose level would grow is
            // forced out first (a degenerate pivot on a negative entry),
            // so feasibility of the original rows is preserved.
            let mut row: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..self.m {
                if artificial_guard
                    && self.basis[i] >= self.n
                    && d[i] < -LP_PIVOT_TOL
                    && self.xb[i] <= 1e-12
                {
                    row = Some(i);
                    break;
                }
                if d[i] > LP_PIVOT_TOL {
                    let ratio = self.xb[i] / d[i];
                    if ratio < best - 1e-12 {
                        best = ratio;
                        row = Some(i);
                    } else if ratio < best + 1e-12 {
                        let r = row.unwrap();
                        let better = if bland {
                            self.basis[i] < self.basis[r]
                        } else {
                            d[i] > d[r]
                        };
                        if better {
                            best = best.min(ratio);
                            row = Some(i);
                        }
                    }
                }
            }
            let Some(row) = row else {
                return Err(QstateError::NumericalDomain(
                    "simplex objective unbounded".into(),
                ));
            };
            self.pivot(enter, row, &d)?;
            let obj = self.objective(cost);
            if obj > last_obj + 1e-12 {
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant > 4 * self.m {
                    bland = true;
                }
            }
            last_obj = obj;
        }
        Err(QstateError::NumericalDomain(
            "simplex iteration budget exhausted".into(),
        ))
    }
}

/// Maximize c.x subject to A x = b, x >= 0. Dense two-phase revised
/// simplex with Bland anti-cycling fallback.
pub fn simplex_max(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Result<LpOutcome> {
    simplex_max_warm(a, b, c, None)
}

/// As simplex_max, but optionally warm-started from a known feasible
/// basis (raw column indices; n..n+m address the artificial of each row).
/// An unusable warm basis silently falls back to a cold start.
pub fn simplex_max_warm(
    a: &DMatrix<f64>,
    b: &[f64],
    c: &[f64],
    warm: Option<&[usize]>,
) -> Result<LpOutcome> {
    let m = a.nrows();
    let n = a.ncols();
    if b.len() != m || c.len() != n {
        return Err(QstateError::DimensionMismatch(
            "LP shape mismatch".into(),
        ));
    }
    let mut s = Simplex::new(a, b);
    let mut warmed = false;
    if let Some(basis) = warm {
        let mut seen = vec![false; n + m];
        let usable = basis.len() == m
            && basis.iter().all(|&j| {
                if j >= n + m || seen[j] {
                    false
                } else {
                    seen[j] = true;
                    true
                }
            });
        if usable {
            let saved = s.basis.clone();
            s.basis = basis.to_vec();
            if s.refactorize().is_ok()
                && (0..m).filter(|&i| s.basis[i] >= n).map(|i| s.xb[i]).sum::<f64>() <= 1e-7
            {
                s.in_basis = vec![false; n + m];
                for &j in &s.basis {
                    s.in_basis[j] = true;
                }
                warmed = true;
            } else {
                s.basis = saved;
                s.binv = DMatrix::identity(m, m);
                s.xb = s.b.clone();
            }
        }
    }
    if !warmed {
        // phase 1: drive out the artificial variables. Feasible as soon
        // as the artificial mass is gone; phase-1 optimality not needed
        let mut phase1 = vec![0.0; n + m];
        for v in phase1.iter_mut().skip(n) {
            *v = -1.0;
        }
        s.run(&phase1, n + m, Some(-1e-10), false)?;
        let infeas: f64 = (0..m)
            .filter(|&i| s.basis[i] >= n)
            .map(|i| s.xb[i])
            .sum();
        if infeas > 1e-7 {
            return Ok(LpOutcome::Infeasible);
        }
        // pivot residual artificials out where possible; rows that cannot
        // be pivoted are linearly dependent and stay parked at zero
        for row in 0..m {
            if s.basis[row] < n {
                continue;
            }
            for j in 0..n {
                if s.in_basis[j] {
                    continue;
                }
                let d = &s.binv * s.cols.column(j).into_owned();
                if d[row].abs() > 1e-7 {
                    s.xb[row] = 0.0;
                    s.pivot(j, row, &d)?;
                    break;
                }
            }
        }
    }
    // phase 2 over the real columns only
    let mut cost = vec![0.0; n + m];
    cost[..n].copy_from_slice(c);
    s.run(&cost, n, None, true)?;
    let mut x = vec![0.0; n];
    let mut objective = 0.0;
    for i in 0..m {
        if s.basis[i] < n {
            x[s.basis[i]] = s.xb[i];
            objective += c[s.basis[i]] * s.xb[i];
        }
    }
    let y = s.prices(&cost);
    let dual = (0..m).map(|i| s.flips[i] * y[i]).collect();
    Ok(LpOutcome::Optimal(SimplexSolution {
        objective,
        x,
        dual,
        basis: s.basis.clone(),
    }))
}

// ---------------------------------------------------------------------------
// BCHA: bagging with convex hull approximation over sampled product states.

#[derive(Debug, Clone)]
pub struct BchaConfig {
    pub n_states: usize,
    pub bagging_rounds: usize,
    pub seed: u64,
    /// Initial perturbation angle for kept support states.
    pub perturb_angle: f64,
    /// Geometric decay of the angle per round, so late rounds refine.
    pub perturb_decay: f64,
}

impl Default for BchaConfig {
    fn default() -> Self {
        Self {
            n_states: 200,
            bagging_rounds: 20,
            seed: 0,
            perturb_angle: 0.1,
            perturb_decay: 0.65,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BchaOutcome {
    pub beta: f64,
    /// LP value after each bagging round; non-decreasing.
    pub round_betas: Vec<f64>,
}

struct PoolState {
    a: Vec<C64>,
    b: Vec<C64>,
    coords: Vec<f64>,
}

fn product_coords(a: &[C64], b: &[C64], d_a: usize, d_b: usize, basis: &GellMannBasis) -> Vec<f64> {
    let d = d_a * d_b;
    let mut psi = vec![C64::new(0.0, 0.0); d];
    for i in 0..d_a {
        for j in 0..d_b {
            psi[i * d_b + j] = a[i] * b[j];
        }
    }
    let mut mat = crate::qstate::ComplexMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            mat[(r, c)] = psi[r] * psi[c].conj();
        }
    }
    let dm = DensityMatrix::new_unchecked(mat, d_a, d_b);
    gellmann_decompose(&dm, basis).vec
}

fn pool_state(a: Vec<C64>, b: Vec<C64>, d_a: usize, d_b: usize, basis: &GellMannBasis) -> PoolState {
    let coords = product_coords(&a, &b, d_a, d_b, basis);
    PoolState { a, b, coords }
}

fn fresh_pool_state<R: rand::Rng>(
    d_a: usize,
    d_b: usize,
    basis: &GellMannBasis,
    rng: &mut R,
) -> PoolState {
    let a = random_pure_state(d_a, rng);
    let b = random_pure_state(d_b, rng);
    pool_state(a, b, d_a, d_b, basis)
}

/// Rotate `v` by `angle` toward a Haar-random orthogonal direction.
fn perturb_vector<R: rand::Rng>(v: &[C64], angle: f64, rng: &mut R) -> Vec<C64> {
    let d = v.len();
    let mut g: Vec<C64> = (0..d)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let overlap: C64 = v.iter().zip(&g).map(|(x, y)| x.conj() * y).sum();
    for (gi, vi) in g.iter_mut().zip(v) {
        *gi -= overlap * vi;
    }
    let norm = g.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return v.to_vec();
    }
    let (s, c) = angle.sin_cos();
    v.iter()
        .zip(&g)
        .map(|(vi, gi)| vi.scale(c) + gi.scale(s / norm))
        .collect()
}

/// Smallest product-state expectation <psi phi| H |psi phi> of a
/// Hermitian witness by alternating smallest-eigenvector descent
/// (seesaw). Each half-step is a global minimization over one factor, so
/// the value is monotone; the result is a local minimum over products.
fn seesaw_min_product(
    h: &crate::qstate::ComplexMatrix,
    d_a: usize,
    d_b: usize,
    psi0: &[C64],
    phi0: &[C64],
) -> Result<(Vec<C64>, Vec<C64>)> {
    use crate::qstate::{hermitian_eig, ComplexMatrix};
    let mut psi = psi0.to_vec();
    let mut phi = phi0.to_vec();
    let mut last = f64::INFINITY;
    for _ in 0..60 {
        let mut ma = ComplexMatrix::zeros(d_a, d_a);
        for i in 0..d_a {
            for ip in 0..d_a {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..d_b {
                    for jp in 0..d_b {
                        acc += phi[j].conj() * h[(i * d_b + j, ip * d_b + jp)] * phi[jp];
                    }
                }
                ma[(i, ip)] = acc;
            }
        }
        let (_, va) = hermitian_eig(&ma)?;
        psi = va.column(0).iter().copied().collect();
        let mut mb = ComplexMatrix::zeros(d_b, d_b);
        for j in 0..d_b {
            for jp in 0..d_b {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..d_a {
                    for ip in 0..d_a {
                        acc += psi[i].conj() * h[(i * d_b + j, ip * d_b + jp)] * psi[ip];
                    }
                }
                mb[(j, jp)] = acc;
            }
        }
        let (wb, vb) = hermitian_eig(&mb)?;
        phi = vb.column(0).iter().copied().collect();
        let val = wb[0];
        if (last - val).abs() < 1e-13 {
            break;
        }
        last = val;
    }
    Ok((psi, phi))
}

/// Build and solve the hull LP: maximize beta with
/// sum_i lam_i coords_i = beta * dir, sum_i lam_i = 1, lam >= 0.
/// Symbolic basis column of the hull LP, stable across pool reshuffles.
#[derive(Debug, Clone, Copy)]
enum HullCol {
    Lambda(usize),
    Beta,
    Artificial(usize),
}

fn hull_lp(pool: &[PoolState], dir: &[f64], warm: Option<&[HullCol]>) -> Result<LpOutcome> {
    let n_lam = pool.len();
    let m = dir.len() + 1;
    let n = n_lam + 1;
    let mut a = DMatrix::zeros(m, n);
    for (j, st) in pool.iter().enumerate() {
        for (i, &v) in st.coords.iter().enumerate() {
            a[(i, j)] = v;
        }
        a[(m - 1, j)] = 1.0;
    }
    for (i, &v) in dir.iter().enumerate() {
        a[(i, n_lam)] = -v;
    }
    // the all-zero right-hand side makes the LP massively degenerate and
    // stalls the simplex; a fixed tiny perturbation breaks ties while
    // moving beta by under 1e-8. The same vector is used every round, so
    // a kept support stays feasible and the rounds stay monotone.
    let mut b = vec![0.0; m];
    for (i, v) in b.iter_mut().enumerate().take(m - 1) {
        *v = 1e-9 * (12.9898 * (i + 1) as f64).sin();
    }
    b[m - 1] = 1.0;
    let mut c = vec![0.0; n];
    c[n_lam] = 1.0;
    let raw_warm: Option<Vec<usize>> = warm.map(|cols| {
        cols.iter()
            .map(|hc| match hc {
                HullCol::Lambda(i) => *i,
                HullCol::Beta => n_lam,
                HullCol::Artificial(r) => n + r,
            })
            .collect()
    });
    simplex_max_warm(&a, &b, &c, raw_warm.as_deref())
}

/// Lower bound on the separable-boundary beta by bagging over convex hulls
/// of sampled product states.
pub fn beta_cha(ray: &Ray, basis: &GellMannBasis, cfg: &BchaConfig) -> Result<BchaOutcome> {
    let (d_a, d_b) = (ray.d_a, ray.d_b);
    let d = d_a * d_b;
    if cfg.n_states < d * d {
        return Err(QstateError::InvalidArgument(format!(
            "n_states {} below (d_A d_B)^2 = {}",
            cfg.n_states,
            d * d
        )));
    }
    if cfg.bagging_rounds == 0 {
        return Err(QstateError::InvalidArgument("bagging_rounds >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pool: Vec<PoolState> = (0..cfg.n_states)
        .map(|_| fresh_pool_state(d_a, d_b, basis, &mut rng))
        .collect();
    let mut round_betas = Vec::with_capacity(cfg.bagging_rounds);
    let mut retries = 0usize;
    let mut round = 0usize;
    let mut warm: Option<Vec<HullCol>> = None;
    while round < cfg.bagging_rounds {
        let outcome = hull_lp(&pool, &ray.direction.vec, warm.as_deref())?;
        let sol = match outcome {
            LpOutcome::Optimal(sol) => sol,
            LpOutcome::Infeasible => {
                if round == 0 && retries < 5 {
                    retries += 1;
                    pool = (0..cfg.n_states)
                        .map(|_| fresh_pool_state(d_a, d_b, basis, &mut rng))
                        .collect();
                    continue;
                }
                return Err(QstateError::NumericalDomain(
                    "hull LP persistently infeasible".into(),
                ));
            }
        };
        round_betas.push(sol.objective);
        if round + 1 == cfg.bagging_rounds {
            break;
        }
        // keep every basic column (the support plus degenerate zero-level
        // basics, so the final basis can warm-start the next solve) and
        // the near-tight old columns, add pricing candidates from the
        // dual witness, refine with shrinking perturbations, and top up
        // with fresh samples
        let support: Vec<usize> = (0..pool.len()).filter(|&i| sol.x[i] > 1e-9).collect();
        let angle = cfg.perturb_angle * cfg.perturb_decay.powi(round as i32);
        let reduced_cost = |coords: &[f64]| -> f64 {
            -(coords.iter().zip(&sol.dual).map(|(c, y)| c * y).sum::<f64>() + sol.dual[d * d - 1])
        };
        let n_lam = pool.len();
        let mut next: Vec<PoolState> = Vec::with_capacity(cfg.n_states);
        let mut kept = vec![false; n_lam];
        let mut next_warm = Vec::with_capacity(sol.basis.len());
        for &raw in &sol.basis {
            if raw < n_lam {
                kept[raw] = true;
                next_warm.push(HullCol::Lambda(next.len()));
                next.push(PoolState {
                    a: pool[raw].a.clone(),
                    b: pool[raw].b.clone(),
                    coords: pool[raw].coords.clone(),
                });
            } else if raw == n_lam {
                next_warm.push(HullCol::Beta);
            } else {
                next_warm.push(HullCol::Artificial(raw - n_lam - 1));
            }
        }
        warm = Some(next_warm);
        // column generation: the duals of the coordinate rows form a
        // witness H = sum_a y_a lambda_a, and a product state improves
        // the next LP iff its H-expectation beats the dual cutoff; seesaw
        // minimization supplies such states when they exist
        let mut witness = crate::qstate::ComplexMatrix::zeros(d, d);
        for (l, &y) in basis.mats.iter().zip(&sol.dual) {
            witness += l.scale(y);
        }
        // the number of useful extreme points grows with the face
        // dimension, so scale the pricing effort with d^2
        let n_starts = (d * d / 2).max(6);
        let mut starts: Vec<(Vec<C64>, Vec<C64>)> = Vec::new();
        for _ in 0..n_starts {
            starts.push((random_pure_state(d_a, &mut rng), random_pure_state(d_b, &mut rng)));
        }
        for &i in support.iter().take(n_starts) {
            starts.push((
                perturb_vector(&pool[i].a, angle, &mut rng),
                perturb_vector(&pool[i].b, angle, &mut rng),
            ));
        }
        for (a0, b0) in &starts {
            if next.len() >= cfg.n_states {
                break;
            }
            let (a, b) = seesaw_min_product(&witness, d_a, d_b, a0, b0)?;
            next.push(pool_state(a, b, d_a, d_b, basis));
        }
        // plain local perturbations of the support
        let mut perturb_budget = support.len().min(cfg.n_states.saturating_sub(next.len()));
        for &i in &support {
            if perturb_budget == 0 {
                break;
            }
            let a = perturb_vector(&pool[i].a, angle, &mut rng);
            let b = perturb_vector(&pool[i].b, angle, &mut rng);
            next.push(pool_state(a, b, d_a, d_b, basis));
            perturb_budget -= 1;
        }
        // retain the old non-support columns closest to tight; they often
        // re-enter the support as the hull face rotates. The pool is
        // allowed to grow well past n_states: discarding columns is what
        // stalls the convex-hull refinement.
        let cap = 4 * cfg.n_states;
        let fresh_quota = (cfg.n_states / 10).max(d).min(cap.saturating_sub(next.len()));
        let keep_old = cap.saturating_sub(next.len() + fresh_quota);
        if keep_old > 0 {
            let mut old: Vec<usize> = (0..pool.len()).filter(|&i| !kept[i]).collect();
            old.sort_by(|&i, &j| {
                reduced_cost(&pool[j].coords)
                    .partial_cmp(&reduced_cost(&pool[i].coords))
                    .unwrap()
            });
            for &i in old.iter().take(keep_old) {
                next.push(PoolState {
                    a: pool[i].a.clone(),
                    b: pool[i].b.clone(),
                    coords: pool[i].coords.clone(),
                });
            }
        }
        while next.len() < cfg.n_states.min(cap) {
            next.push(fresh_pool_state(d_a, d_b, basis, &mut rng));
        }
        pool = next;
        round += 1;
    }
    let beta = *round_betas.last().unwrap();
    Ok(BchaOutcome { beta, round_betas })
}

// ---------------------------------------------------------------------------
// PureB(k) boundary by binary search on the REE predicate.

#[derive(Debug, Clone)]
pub struct PurebBoundaryConfig {
    /// REE threshold defining "outside": E_R > epsilon.
    pub epsilon: f64,
    /// Binary search stops when the bracket is this narrow.
    pub bracket_tol: f64,
    pub opt: OptimizerConfig,
}

impl Default for PurebBoundaryConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            bracket_tol: 1e-5,
            opt: OptimizerConfig {
                restarts: 2,
                ..OptimizerConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PurebBoundary {
    pub beta: f64,
    /// Largest beta classified inside (E_R <= epsilon).
    pub last_inside: f64,
    /// Smallest beta classified outside.
    pub last_outside: f64,
    pub evals: usize,
    /// An ambiguous predicate value triggered a retry with extra restarts.
    pub retried: bool,
    /// The retry stayed ambiguous; beta is the conservative outer edge.
    pub suspect: bool,
}

/// Binary search for the PureB(k) boundary along `ray` between a lower
/// bound known inside (typically beta_cha) and an upper bound known
/// outside or on the DM boundary (typically beta_dm).
pub fn beta_pureb(
    ray: &Ray,
    bt: &BTensor,
    basis: &GellMannBasis,
    lo: f64,
    hi: f64,
    cfg: &PurebBoundaryConfig,
) -> Result<PurebBoundary> {
    if !(0.0..hi).contains(&lo) {
        return Err(QstateError::InvalidArgument(format!(
            "need 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut inside = lo;
    let mut outside = hi;
    let mut warm: Option<PurebParams> = None;
    let mut evals = 0usize;
    let mut retried = false;
    let mut suspect = false;
    while outside - inside > cfg.bracket_tol {
        let mid = 0.5 * (inside + outside);
        let rho = ray.state_at(mid, basis);
        let res = minimize_ree_with_tensor(&rho, bt, &cfg.opt, warm.as_ref())?;
        evals += 1;
        let mut ree = res.ree;
        warm = Some(res.params);
        if ree > cfg.epsilon && ree < 10.0 * cfg.epsilon {
            // close call: the optimizer may be stuck in a shallow local
            // minimum, so spend extra restarts before trusting "outside"
            retried = true;
            let mut harder = cfg.opt.clone();
            harder.restarts = (cfg.opt.restarts * 2).max(4);
            harder.seed = cfg.opt.seed.wrapping_add(101);
            let res2 = minimize_ree_with_tensor(&rho, bt, &harder, warm.as_ref())?;
            evals += 1;
            if res2.ree < ree {
                ree = res2.ree;
                warm = Some(res2.params);
            }
            if ree > cfg.epsilon && ree < 10.0 * cfg.epsilon {
                suspect = true;
            }
        }
        if ree > cfg.epsilon {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    let beta = if suspect {
        outside
    } else {
        0.5 * (inside + outside)
    };
    Ok(PurebBoundary {
        beta,
        last_inside: inside,
        last_outside: outside,
        evals,
        retried,
        suspect,
    })
}

// ---------------------------------------------------------------------------
// Per-ray bundles, plane scans, surveys.

/// Which boundaries to compute for a ray; beta_dm and beta_ppt are always
/// computed (they are cheap and anchor the orderings).
#[derive(Debug, Clone, Default)]
pub struct MethodSelection {
    pub cha: Option<BchaConfig>,
    pub pureb_k: Vec<usize>,
    pub pureb: PurebBoundaryConfig,
}

#[derive(Debug, Clone)]
pub struct BoundaryResult {
    pub ray: Ray,
    /// Plane angle that produced this ray, when part of a scan.
    pub theta: Option<f64>,
    pub beta_dm: f64,
    pub beta_ppt: f64,
    pub beta_cha: Option<f64>,
    pub beta_pureb: Vec<(usize, PurebBoundary)>,
}

/// Prebuild the B-tensors a MethodSelection needs, keyed by k.
pub fn build_tensors(k_list: &[usize], d_b: usize) -> Result<HashMap<usize, BTensor>> {
    let mut map = HashMap::new();
    for &k in k_list {
        if !map.contains_key(&k) {
            map.insert(k, BTensor::new(k, d_b)?);
        }
    }
    Ok(map)
}

/// All selected boundaries along one ray. Read-only inputs throughout, so
/// independent rays can run in parallel.
pub fn boundary_for_ray(
    ray: &Ray,
    basis: &GellMannBasis,
    tensors: &HashMap<usize, BTensor>,
    methods: &MethodSelection,
) -> Result<BoundaryResult> {
    let dm = beta_dm(ray, basis)?;
    let ppt = beta_ppt(ray, basis)?;
    let cha = match &methods.cha {
        Some(cfg) => Some(beta_cha(ray, basis, cfg)?.beta),
        None => None,
    };
    let mut pureb = Vec::with_capacity(methods.pureb_k.len());
    for &k in &methods.pureb_k {
        let bt = tensors.get(&k).ok_or_else(|| {
            QstateError::InvalidArgument(format!("no B-tensor prebuilt for k = {k}"))
        })?;
        // beta_cha is a certified inner point; back off slightly for LP noise
        let lo = cha.map_or(0.0, |b| (b - 1e-6).max(0.0));
        pureb.push((k, beta_pureb(ray, bt, basis, lo, dm, &methods.pureb)?));
    }
    Ok(BoundaryResult {
        ray: ray.clone(),
        theta: None,
        beta_dm: dm,
        beta_ppt: ppt,
        beta_cha: cha,
        beta_pureb: pureb,
    })
}

/// Orthonormal plane axes from two states via Gram-Schmidt on their
/// Gell-Mann coordinates. Errors when the directions are near-collinear.
pub fn plane_axes(
    v1: &DensityMatrix,
    v2: &DensityMatrix,
    basis: &GellMannBasis,
) -> Result<(StateVector, StateVector)> {
    if v1.dims() != v2.dims() {
        return Err(QstateError::DimensionMismatch(
            "plane states live on different bipartitions".into(),
        ));
    }
    let w1 = gellmann_decompose(v1, basis);
    let w2 = gellmann_decompose(v2, basis);
    if w1.norm() < 1e-12 || w2.norm() < 1e-12 {
        return Err(QstateError::InvalidArgument(
            "plane state coincides with the maximally mixed state".into(),
        ));
    }
    let e1 = w1.normalized();
    let overlap: f64 = e1.vec.iter().zip(&w2.vec).map(|(a, b)| a * b).sum();
    let resid: Vec<f64> = w2
        .vec
        .iter()
        .zip(&e1.vec)
        .map(|(b, a)| b - overlap * a)
        .collect();
    let resid_norm = resid.iter().map(|x| x * x).sum::<f64>().sqrt();
    if resid_norm / w2.norm() < 1e-6 {
        return Err(QstateError::InvalidArgument(
            "plane states are near-collinear".into(),
        ));
    }
    let e2 = StateVector {
        vec: resid.iter().map(|x| x / resid_norm).collect(),
        d: w2.d,
    };
    Ok((e1, e2))
}

/// The rays cos(theta) e1 + sin(theta) e2 for theta on a uniform grid over
/// [0, 2 pi).
pub fn plane_rays(
    v1: &DensityMatrix,
    v2: &DensityMatrix,
    resolution: usize,
    basis: &GellMannBasis,
) -> Result<Vec<(f64, Ray)>> {
    if resolution == 0 {
        return Err(QstateError::InvalidArgument("resolution >= 1".into()));
    }
    let (e1, e2) = plane_axes(v1, v2, basis)?;
    let (d_a, d_b) = v1.dims();
    let mut out = Vec::with_capacity(resolution);
    for t in 0..resolution {
        let theta = 2.0 * std::f64::consts::PI * t as f64 / resolution as f64;
        let (s, c) = theta.sin_cos();
        let vec: Vec<f64> = e1
            .vec
            .iter()
            .zip(&e2.vec)
            .map(|(a, b)| c * a + s * b)
            .collect();
        let dir = StateVector { vec, d: e1.d };
        out.push((theta, Ray::new(dir.normalized(), d_a, d_b)?));
    }
    Ok(out)
}

/// Boundary scan over the plane spanned by two states.
pub fn plane_scan(
    v1: &DensityMatrix,
    v2: &DensityMatrix,
    resolution: usize,
    methods: &MethodSelection,
    tensors: &HashMap<usize, BTensor>,
    basis: &GellMannBasis,
) -> Result<Vec<BoundaryResult>> {
    let rays = plane_rays(v1, v2, resolution, basis)?;
    let mut out = Vec::with_capacity(rays.len());
    for (theta, ray) in rays {
        let mut res = boundary_for_ray(&ray, basis, tensors, methods)?;
        res.theta = Some(theta);
        out.push(res);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Random-direction statistics.

#[derive(Debug, Clone)]
pub struct SurveySample {
    pub index: usize,
    pub beta_ppt: f64,
    pub beta_cha: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SurveyStats {
    pub samples: Vec<SurveySample>,
    pub median_gap: f64,
    pub max_gap: f64,
    pub min_gap: f64,
}

/// PPT-vs-BCHA gap along rays toward random (Ginibre) states.
pub fn gap_survey(
    n_samples: usize,
    dims: (usize, usize),
    seed: u64,
    cha: &BchaConfig,
) -> Result<SurveyStats> {
    if n_samples == 0 {
        return Err(QstateError::InvalidArgument("n_samples >= 1".into()));
    }
    let (d_a, d_b) = dims;
    let basis = GellMannBasis::new(d_a * d_b);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let rho = crate::qstate::random_density_matrix(d_a, d_b, seed.wrapping_add(i as u64));
        let ray = Ray::from_state(&rho, &basis)?;
        let ppt = beta_ppt(&ray, &basis)?;
        let mut cha_cfg = cha.clone();
        cha_cfg.seed = cha.seed.wrapping_add(0x9e37 * i as u64 + 1);
        let chv = beta_cha(&ray, &basis, &cha_cfg)?.beta;
        samples.push(SurveySample {
            index: i,
            beta_ppt: ppt,
            beta_cha: chv,
            gap: ppt - chv,
        });
    }
    let mut gaps: Vec<f64> = samples.iter().map(|s| s.gap).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_gap = if gaps.len() % 2 == 1 {
        gaps[gaps.len() / 2]
    } else {
        0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2])
    };
    Ok(SurveyStats {
        samples,
        median_gap,
        max_gap: *gaps.last().unwrap(),
        min_gap: gaps[0],
    })
}

#[derive(Debug, Clone)]
pub struct KextErrorSample {
    pub direction_id: usize,
    pub k: usize,
    pub beta: f64,
    pub beta_ref: f64,
    pub rel_error: f64,
}

/// Relative PureB(k) boundary error on random directions, against an
/// external reference table keyed by (direction_id, k), or against
/// PureB(4k) in self-consistency mode when no reference is given.
pub fn random_direction_kext_error(
    n_samples: usize,
    dims: (usize, usize),
    k_list: &[usize],
    reference: Option<&HashMap<(usize, usize), f64>>,
    seed: u64,
    cfg: &PurebBoundaryConfig,
) -> Result<Vec<KextErrorSample>> {
    let (d_a, d_b) = dims;
    let basis = GellMannBasis::new(d_a * d_b);
    let mut k_needed: Vec<usize> = k_list.to_vec();
    if reference.is_none() {
        k_needed.extend(k_list.iter().map(|&k| 4 * k));
    }
    let tensors = build_tensors(&k_needed, d_b)?;
    let mut out = Vec::with_capacity(n_samples * k_list.len());
    for i in 0..n_samples {
        let rho = crate::qstate::random_density_matrix(d_a, d_b, seed.wrapping_add(i as u64));
        let ray = Ray::from_state(&rho, &basis)?;
        let dm = beta_dm(&ray, &basis)?;
        for &k in k_list {
            let b = beta_pureb(&ray, &tensors[&k], &basis, 0.0, dm, cfg)?.beta;
            let b_ref = match reference {
                Some(map) => *map.get(&(i, k)).ok_or_else(|| {
                    QstateError::InvalidArgument(format!(
                        "reference table missing entry for direction {i}, k {k}"
                    ))
                })?,
                None => beta_pureb(&ray, &tensors[&(4 * k)], &basis, 0.0, dm, cfg)?.beta,
            };
            out.push(KextErrorSample {
                direction_id: i,
                k,
                beta: b,
                beta_ref: b_ref,
                rel_error: (b - b_ref).abs() / b_ref,
            });
        }
    }
    Ok(out)
}
