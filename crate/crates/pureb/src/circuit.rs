//! Symmetric variational circuit realization of the pure bosonic extension
//! ansatz (qubit case).
//!
//! Instead of optimizing raw complex coefficients, the pure state on
//! `A (x) Sym_n(B)` is prepared by a layered circuit acting directly in the
//! compressed space `C^2 (x) Sym_n(C^2)`: each layer applies a continuous
//! Weyl-power gate `X^a Z^b` on A, a CNOT from A onto every B copy, and the
//! same single-qubit gate on every B copy. The collective B gate never
//! leaves the symmetric subspace, so `U^{(x)n}` restricted to `Sym_n` is the
//! spin-`n/2` rotation generated by the collective operators `J_x`, `J_z`
//! acting on Dicke amplitudes — exact, with no `2^n` expansion. The layer
//! angles are then optimized against the same relative-entropy objective as
//! the coefficient parameterization, giving a circuit-sized witness whose
//! reachable marginals are a subset of the coefficient-parameterized ones.

use std::collections::HashMap;
use std::sync::Mutex;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dicke::{BTensor, PurebParams};
use crate::opt::{
    lbfgs_minimize, LbfgsOptions, OptimizerConfig, OptimizerResult, ReeProblem,
};
use crate::qstate::{C64, DensityMatrix, QstateError, Result};

/// Unit-norm tolerance for compressed states.
pub const STATE_NORM_TOL: f64 = 1e-12;

/// Central-difference step for the angle gradient. Objective evaluations
/// are accurate to ~1e-14, so h = 1e-5 balances truncation (h^2 ~ 1e-10)
/// against roundoff (eps/h ~ 1e-9).
const FD_STEP: f64 = 1e-5;

/// One circuit layer: `(a, b)` angle pairs for the A gate `X^a Z^b` and the
/// collective B gate, in units where a full Pauli power is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub theta_a: [f64; 2],
    pub theta_b: [f64; 2],
}

/// Angles of a layered symmetric circuit on `C^2 (x) Sym_n(C^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    pub layers: Vec<Layer>,
    /// extension count (number of B copies)
    pub n: usize,
}

impl CircuitParams {
    pub fn new(layers: Vec<Layer>, n: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(QstateError::InvalidArgument(
                "circuit needs at least one layer".into(),
            ));
        }
        if n < 1 {
            return Err(QstateError::InvalidArgument(
                "extension count n must be >= 1".into(),
            ));
        }
        Ok(Self { layers, n })
    }

    /// All-zero angles (every gate is the identity).
    pub fn zeros(layers: usize, n: usize) -> Result<Self> {
        Self::new(vec![Layer { theta_a: [0.0; 2], theta_b: [0.0; 2] }; layers], n)
    }

    /// Checkpoint: JSON `{n, layers: [[aA, bA, aB, bB], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let layers: Vec<[f64; 4]> = self
            .layers
            .iter()
            .map(|l| [l.theta_a[0], l.theta_a[1], l.theta_b[0], l.theta_b[1]])
            .collect();
        serde_json::json!({ "n": self.n, "layers": layers })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let n = v["n"]
            .as_u64()
            .ok_or_else(|| QstateError::Format("missing integer field 'n'".into()))?
            as usize;
        let rows = v["layers"]
            .as_array()
            .ok_or_else(|| QstateError::Format("missing array field 'layers'".into()))?;
        let mut layers = Vec::with_capacity(rows.len());
        for row in rows {
            let vals: Vec<f64> = row
                .as_array()
                .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                .unwrap_or_default();
            if vals.len() != 4 {
                return Err(QstateError::Format(
                    "each layer must be four numbers [aA, bA, aB, bB]".into(),
                ));
            }
            layers.push(Layer {
                theta_a: [vals[0], vals[1]],
                theta_b: [vals[2], vals[3]],
            });
        }
        Self::new(layers, n)
    }

    fn to_reals(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| [l.theta_a[0], l.theta_a[1], l.theta_b[0], l.theta_b[1]])
            .collect()
    }

    fn from_reals(x: &[f64], n: usize) -> Self {
        let layers = x
            .chunks_exact(4)
            .map(|c| Layer { theta_a: [c[0], c[1]], theta_b: [c[2], c[3]] })
            .collect();
        Self { layers, n }
    }
}

/// Pure state on `C^2 (x) Sym_n(C^2)`, stored as amplitudes indexed by
/// `i * (n+1) + p` where `i` is the A basis state and `p` the Dicke basis
/// position (occupation `(n-p, p)`).
#[derive(Debug, Clone)]
pub struct CompressedState {
    pub amplitudes: Vec<C64>,
    pub n: usize,
}

impl CompressedState {
    pub fn new(amplitudes: Vec<C64>, n: usize) -> Result<Self> {
        if amplitudes.len() != 2 * (n + 1) {
            return Err(QstateError::DimensionMismatch(format!(
                "expected {} amplitudes for n={}, got {}",
                2 * (n + 1),
                n,
                amplitudes.len()
            )));
        }
        let s = Self { amplitudes, n };
        if (s.norm() - 1.0).abs() > STATE_NORM_TOL {
            return Err(QstateError::ContractViolation(format!(
                "compressed state norm {:.3e} is not 1",
                s.norm()
            )));
        }
        Ok(s)
    }

    /// Circuit input `|0> (x) |D^n_{(n,0)}>` (all qubits in `|0>`).
    pub fn ground(n: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 2 * (n + 1)];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self { amplitudes, n }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn dim_b(&self) -> usize {
        self.n + 1
    }

    /// Reinterpret the amplitudes as coefficient parameters `p[i, kvec]`.
    pub fn to_params(&self) -> Result<PurebParams> {
        let dim = self.dim_b();
        let raw = DMatrix::from_fn(2, dim, |i, p| self.amplitudes[i * dim + p]);
        PurebParams::new(raw, 2, 2, self.n)
    }
}

/// `X^a = exp(i pi a / 2) exp(-i pi a X / 2)` composed with
/// `Z^b = diag(1, e^{i pi b})`, as a 2x2 matrix (principal powers).
fn weyl_gate(theta: [f64; 2]) -> DMatrix<C64> {
    let (a, b) = (theta[0], theta[1]);
    let zb = Complex::from_polar(1.0, std::f64::consts::PI * b);
    let phase = Complex::from_polar(1.0, std::f64::consts::PI * a / 2.0);
    let c = Complex::new((std::f64::consts::PI * a / 2.0).cos(), 0.0);
    let s = Complex::new(0.0, -(std::f64::consts::PI * a / 2.0).sin());
    // X^a Z^b: columns of Z^b scaled into the rotation about X.
    DMatrix::from_row_slice(2, 2, &[
        phase * c,
        phase * s * zb,
        phase * s,
        phase * c * zb,
    ])
}

/// Applies `X^a Z^b` on the A qubit only.
pub fn apply_ua(state: &CompressedState, theta: [f64; 2]) -> CompressedState {
    let u = weyl_gate(theta);
    let dim = state.dim_b();
    let mut amplitudes = vec![C64::new(0.0, 0.0); 2 * dim];
    for p in 0..dim {
        let a0 = state.amplitudes[p];
        let a1 = state.amplitudes[dim + p];
        amplitudes[p] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
        amplitudes[dim + p] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
    }
    CompressedState { amplitudes, n: state.n }
}

/// CNOT from A onto every B copy: control value `x` cyclically shifts the
/// occupation vector by `x`, which for qubits swaps `(k0, k1)`. In Dicke
/// position terms the `x = 1` block maps `p -> n - p`; the `x = 0` block is
/// untouched.
pub fn apply_cnot_all(state: &CompressedState) -> CompressedState {
    let dim = state.dim_b();
    let mut amplitudes = state.amplitudes.clone();
    for p in 0..dim / 2 {
        amplitudes.swap(dim + p, dim + (state.n - p));
    }
    CompressedState { amplitudes, n: state.n }
}

/// Cached eigendecomposition of the collective `J_x` on `Sym_n(C^2)`
/// (spin `j = n/2`), in Dicke position order `p = 0..n` with
/// `m = j - p`. Tridiagonal: `<p+1| J_x |p> = sqrt((p+1)(n-p)) / 2`.
fn jx_eigen(n: usize) -> (DVector<f64>, DMatrix<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (DVector<f64>, DMatrix<f64>)>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| {
            let dim = n + 1;
            let mut jx = DMatrix::<f64>::zeros(dim, dim);
            for p in 0..n {
                let v = (((p + 1) * (n - p)) as f64).sqrt() / 2.0;
                jx[(p, p + 1)] = v;
                jx[(p + 1, p)] = v;
            }
            let eig = jx.symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors)
        })
        .clone()
}

/// Applies `(X^a Z^b)^{(x)n}` restricted to `Sym_n` on the B factor, for
/// each A block independently. `(Z^b)^{(x)n}|Sym` is diagonal in the Dicke
/// basis, `e^{i pi b n / 2} e^{-i pi b m_p}` with `m_p = n/2 - p`;
/// `(X^a)^{(x)n}|Sym = e^{i pi a n / 2} exp(-i pi a J_x)` via the cached
/// `J_x` eigendecomposition.
pub fn apply_ub_symmetric(state: &CompressedState, theta: [f64; 2]) -> CompressedState {
    let (a, b) = (theta[0], theta[1]);
    let n = state.n;
    let dim = state.dim_b();
    let j = n as f64 / 2.0;
    let pi = std::f64::consts::PI;
    let global = Complex::from_polar(1.0, pi * (a + b) * n as f64 / 2.0);
    let (evals, evecs) = jx_eigen(n);
    let rot: Vec<C64> = evals.iter().map(|&l| Complex::from_polar(1.0, -pi * a * l)).collect();
    let zphase: Vec<C64> =
        (0..dim).map(|p| Complex::from_polar(1.0, -pi * b * (j - p as f64))).collect();
    let mut amplitudes = vec![C64::new(0.0, 0.0); 2 * dim];
    let mut u = vec![C64::new(0.0, 0.0); dim];
    let mut w = vec![C64::new(0.0, 0.0); dim];
    for i in 0..2 {
        for p in 0..dim {
            u[p] = state.amplitudes[i * dim + p] * zphase[p];
        }
        // w = V^T u, then scale by the rotation spectrum, then map back.
        for q in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..dim {
                acc += Complex::new(evecs[(p, q)], 0.0) * u[p];
            }
            w[q] = acc * rot[q];
        }
        for p in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..dim {
                acc += Complex::new(evecs[(p, q)], 0.0) * w[q];
            }
            amplitudes[i * dim + p] = acc * global;
        }
    }
    CompressedState { amplitudes, n }
}

/// Runs the full circuit from `|0> (x) |D^n_{(n,0)}>`: per layer,
/// `U_A -> CNOT-all -> U_B`.
pub fn run_circuit(params: &CircuitParams) -> Result<CompressedState> {
    if params.layers.is_empty() {
        return Err(QstateError::InvalidArgument(
            "circuit needs at least one layer".into(),
        ));
    }
    let mut state = CompressedState::ground(params.n);
    for layer in &params.layers {
        state = apply_ua(&state, layer.theta_a);
        state = apply_cnot_all(&state);
        state = apply_ub_symmetric(&state, layer.theta_b);
    }
    Ok(state)
}

/// Minimizes `S(rho || rho_AB(circuit))` over the layer angles, best of
/// `cfg.restarts` runs. The first restart starts from `init`'s angles, the
/// rest from uniform random angles in `[0, 2)`. An all-zero init is itself
/// a stationary point of the objective (mirror symmetry under angle sign
/// flips kills every directional derivative), so it is replaced by a random
/// start. Gradients are central finite differences; the returned
/// coefficients are the best circuit state reinterpreted as raw parameters.
pub fn circuit_ree(
    rho: &DensityMatrix,
    init: &CircuitParams,
    cfg: &OptimizerConfig,
) -> Result<OptimizerResult> {
    circuit_ree_full(rho, init, cfg).map(|(res, _)| res)
}

/// As [`circuit_ree`], additionally returning the optimized layer angles.
pub fn circuit_ree_full(
    rho: &DensityMatrix,
    init: &CircuitParams,
    cfg: &OptimizerConfig,
) -> Result<(OptimizerResult, CircuitParams)> {
    let (d_a, d_b) = rho.dims();
    if d_a != 2 || d_b != 2 {
        return Err(QstateError::InvalidArgument(format!(
            "circuit ansatz is implemented for qubits only, got {d_a}x{d_b}"
        )));
    }
    if cfg.restarts < 1 || cfg.tolerance <= 0.0 {
        return Err(QstateError::InvalidArgument(
            "restarts >= 1 and tolerance > 0 required".into(),
        ));
    }
    let n = init.n;
    let n_layers = init.layers.len();
    let bt = BTensor::new(n, 2)?;
    let problem = ReeProblem::new(rho, &bt, cfg)?;
    let objective = |x: &[f64]| -> f64 {
        let p = CircuitParams::from_reals(x, n);
        run_circuit(&p)
            .and_then(|s| s.to_params())
            .and_then(|p| problem.objective(&p))
            .unwrap_or(f64::INFINITY)
    };
    let opts = LbfgsOptions {
        memory: 10,
        max_iters: cfg.max_iters,
        tolerance: cfg.tolerance,
        // the finite-difference noise floor; tighter targets just stall
        grad_tolerance: 1e-7,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut per_restart = Vec::with_capacity(cfg.restarts);
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut total_iters = 0usize;
    for r in 0..cfg.restarts {
        let trivial =
            init.layers.iter().all(|l| l.theta_a == [0.0; 2] && l.theta_b == [0.0; 2]);
        let x0 = if r == 0 && !trivial {
            init.to_reals()
        } else {
            (0..4 * n_layers).map(|_| rng.gen_range(0.0..2.0)).collect()
        };
        let outcome = lbfgs_minimize(
            |x| {
                let f = objective(x);
                let mut g = vec![0.0; x.len()];
                let mut xs = x.to_vec();
                for i in 0..x.len() {
                    let xi = xs[i];
                    xs[i] = xi + FD_STEP;
                    let fp = objective(&xs);
                    xs[i] = xi - FD_STEP;
                    let fm = objective(&xs);
                    xs[i] = xi;
                    g[i] = (fp - fm) / (2.0 * FD_STEP);
                }
                (f, g)
            },
            x0,
            &opts,
        );
        total_iters += outcome.iterations;
        per_restart.push(outcome.value);
        let better = best.as_ref().map_or(true, |(b, _, _)| outcome.value < *b);
        if better {
            best = Some((outcome.value, outcome.x, outcome.converged));
        }
    }
    let (ree, x, converged) = best.unwrap();
    let angles = CircuitParams::from_reals(&x, n);
    let state = run_circuit(&angles)?;
    let result = OptimizerResult {
        ree,
        params: state.to_params()?,
        iterations: total_iters,
        restarts_used: per_restart.len(),
        converged,
        per_restart,
    };
    Ok((result, angles))
}
