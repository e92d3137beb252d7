//! Complex Hermitian matrix operations, spectral functions, bipartite
//! superoperators, the generalized Gell-Mann basis, and random-state
//! generation.
//!
//! Everything downstream (Dicke marginals, the REE objective, boundary
//! scans) is built on the small set of primitives here. All types are
//! immutable values after construction and all operations are pure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Dense complex double-precision matrix.
pub type ComplexMatrix = DMatrix<C64>;

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const DM_HERMITICITY_TOL: f64 = 1e-12;
pub const DM_TRACE_TOL: f64 = 1e-12;
pub const DM_PSD_TOL: f64 = -1e-10;

/// Default eigenvalue floor for log arguments. Marginals of pure extensions
/// are often rank-deficient; flooring keeps `S(rho||sigma)` finite and
/// smooth for the optimizer.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-18;

#[derive(Debug, Error)]
pub enum QstateError {
    #[error("matrix is not Hermitian within tolerance (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, QstateError>;

fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > dev {
                dev = d;
            }
        }
    }
    dev
}

/// Trace-one positive semidefinite matrix with bipartite dimension metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    d_a: usize,
    d_b: usize,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and numerical positivity.
    pub fn new(mat: ComplexMatrix, d_a: usize, d_b: usize) -> Result<Self> {
        let d = d_a * d_b;
        if d_a == 0 || d_b == 0 || mat.nrows() != d || mat.ncols() != d {
            return Err(QstateError::DimensionMismatch(format!(
                "expected {d}x{d} for dims ({d_a},{d_b}), got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let dev = hermiticity_deviation(&mat);
        if dev > DM_HERMITICITY_TOL {
            return Err(QstateError::NotHermitian(dev));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > DM_TRACE_TOL || tr.im.abs() > DM_TRACE_TOL {
            return Err(QstateError::ContractViolation(format!(
                "trace {tr} differs from 1"
            )));
        }
        let (w, _) = hermitian_eig(&mat)?;
        if w[0] < DM_PSD_TOL {
            return Err(QstateError::ContractViolation(format!(
                "smallest eigenvalue {} below PSD tolerance",
                w[0]
            )));
        }
        Ok(Self { mat, d_a, d_b })
    }

    /// Skips invariant checks. For internal paths where validity is
    /// guaranteed by construction.
    pub fn new_unchecked(mat: ComplexMatrix, d_a: usize, d_b: usize) -> Self {
        Self { mat, d_a, d_b }
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.d_b
    }

    /// Maximally mixed state I/d on the given bipartition.
    pub fn maximally_mixed(d_a: usize, d_b: usize) -> Self {
        let d = d_a * d_b;
        let mat = ComplexMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0));
        Self::new_unchecked(mat, d_a, d_b)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let d = self.dim();
        let mut re = vec![vec![0.0; d]; d];
        let mut im = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                re[i][j] = self.mat[(i, j)].re;
                im[i][j] = self.mat[(i, j)].im;
            }
        }
        serde_json::json!({ "d_a": self.d_a, "d_b": self.d_b, "re": re, "im": im })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            d_a: usize,
            d_b: usize,
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        let raw: Raw = serde_json::from_value(v.clone())
            .map_err(|e| QstateError::Format(e.to_string()))?;
        let d = raw.d_a * raw.d_b;
        if raw.re.len() != d || raw.im.len() != d {
            return Err(QstateError::Format("row count mismatch".into()));
        }
        let mut mat = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            if raw.re[i].len() != d || raw.im[i].len() != d {
                return Err(QstateError::Format("column count mismatch".into()));
            }
            for j in 0..d {
                mat[(i, j)] = C64::new(raw.re[i][j], raw.im[i][j]);
            }
        }
        Self::new(mat, raw.d_a, raw.d_b)
    }

    /// Compact binary form: magic "QDM1", u32 d_a, u32 d_b (little endian),
    /// then interleaved re/im f64 pairs in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dim();
        let mut out = Vec::with_capacity(12 + 16 * d * d);
        out.extend_from_slice(b"QDM1");
        out.extend_from_slice(&(self.d_a as u32).to_le_bytes());
        out.extend_from_slice(&(self.d_b as u32).to_le_bytes());
        for i in 0..d {
            for j in 0..d {
                out.extend_from_slice(&self.mat[(i, j)].re.to_le_bytes());
                out.extend_from_slice(&self.mat[(i, j)].im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[0..4] != b"QDM1" {
            return Err(QstateError::Format("missing QDM1 magic".into()));
        }
        let d_a = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d_b = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let d = d_a * d_b;
        let expected = 12 + 16 * d * d;
        if bytes.len() != expected {
            return Err(QstateError::Format(format!(
                "expected {expected} bytes, got {}",
                bytes.len()
            )));
        }
        let mut mat = ComplexMatrix::zeros(d, d);
        let mut off = 12;
        for i in 0..d {
            for j in 0..d {
                let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
                let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
                mat[(i, j)] = C64::new(re, im);
                off += 16;
            }
        }
        Self::new(mat, d_a, d_b)
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Errors if the input deviates from Hermiticity by more than 1e-10; the
/// input is symmetrized before factorization so downstream results are
/// exactly Hermitian-consistent.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<(DVector<f64>, ComplexMatrix)> {
    let dev = hermiticity_deviation(m);
    if dev > HERMITICITY_TOL {
        return Err(QstateError::NotHermitian(dev));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let w = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut v = ComplexMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((w, v))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lambda_min(m: &ComplexMatrix) -> Result<f64> {
    let (w, _) = hermitian_eig(m)?;
    Ok(w[0])
}

/// Apply a real scalar function to a Hermitian matrix through its spectrum.
pub fn hermitian_func(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let (w, v) = hermitian_eig(m)?;
    let n = m.nrows();
    let mut scaled = v.clone();
    for j in 0..n {
        let fw = C64::new(f(w[j]), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= fw;
        }
    }
    Ok(&scaled * v.adjoint())
}

/// Matrix logarithm of a Hermitian PSD matrix with eigenvalues clamped
/// below at `floor` before the log is taken.
pub fn matrix_log_psd(m: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    if floor <= 0.0 {
        return Err(QstateError::InvalidArgument(format!(
            "log floor must be positive, got {floor}"
        )));
    }
    hermitian_func(m, |x| x.max(floor).ln())
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on the Legendre polynomial of degree m over [-1, 1],
    // then an affine map to [0, 1].
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=m {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (x + 1.0));
        weights.push(0.5 * w);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    (
        order.iter().map(|&i| nodes[i]).collect(),
        order.iter().map(|&i| weights[i]).collect(),
    )
}

/// Principal square root of a Hermitian positive definite matrix via the
/// Denman-Beavers iteration. Kept free of the eigendecomposition path so
/// the two log backends stay independent.
fn sqrtm_pd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.nrows();
    let mut x = m.clone();
    let mut y = ComplexMatrix::identity(n, n);
    for _ in 0..60 {
        let xi = x.clone().try_inverse().ok_or_else(|| {
            QstateError::NumericalDomain("singular iterate in matrix square root".into())
        })?;
        let yi = y.clone().try_inverse().ok_or_else(|| {
            QstateError::NumericalDomain("singular iterate in matrix square root".into())
        })?;
        let xn = (&x + &yi).scale(0.5);
        let yn = (&y + &xi).scale(0.5);
        let diff = (&xn - &x).norm();
        x = xn;
        y = yn;
        if diff < 1e-14 * (1.0 + x.norm()) {
            break;
        }
    }
    Ok(x)
}

/// Inverse-scaling-and-squaring matrix logarithm: `k_roots` repeated
/// principal square roots followed by the Gauss-Legendre rational
/// approximant of order `m_nodes`, scaled back by 2^k_roots.
pub fn matrix_log_pade(m: &ComplexMatrix, m_nodes: usize, k_roots: usize) -> Result<ComplexMatrix> {
    let dev = hermiticity_deviation(m);
    if dev > HERMITICITY_TOL {
        return Err(QstateError::NotHermitian(dev));
    }
    if m_nodes == 0 {
        return Err(QstateError::InvalidArgument("m_nodes must be >= 1".into()));
    }
    // Positive definiteness shows up as a singular Denman-Beavers iterate;
    // catch an obviously non-PD diagonal early for a clearer error.
    let n = m.nrows();
    for i in 0..n {
        if m[(i, i)].re <= 0.0 {
            return Err(QstateError::NumericalDomain(
                "matrix_log_pade requires a positive definite input".into(),
            ));
        }
    }
    let mut x = m.clone();
    for _ in 0..k_roots {
        x = sqrtm_pd(&x)?;
    }
    let (nodes, weights) = gauss_legendre_unit(m_nodes);
    let id = ComplexMatrix::identity(n, n);
    let xm1 = &x - &id;
    let mut r = ComplexMatrix::zeros(n, n);
    for (t, w) in nodes.iter().zip(weights.iter()) {
        let denom = xm1.scale(*t) + &id;
        let di = denom.try_inverse().ok_or_else(|| {
            QstateError::NumericalDomain("singular denominator in rational approximant".into())
        })?;
        r += (&xm1 * di).scale(*w);
    }
    Ok(r.scale((1u64 << k_roots) as f64))
}

/// Default Padé hyper-parameters: 8 quadrature nodes, 6 square roots.
pub const PADE_DEFAULT_M: usize = 8;
pub const PADE_DEFAULT_K: usize = 6;

/// Quantum relative entropy S(rho || sigma) = Tr(rho ln rho - rho ln sigma).
///
/// `rho ln rho` is evaluated on the support of rho (zero eigenvalues
/// contribute nothing); the log of sigma uses the eigenvalue `floor`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix, floor: f64) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QstateError::DimensionMismatch(format!(
            "rho dim {} vs sigma dim {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let (w, _) = hermitian_eig(rho.mat())?;
    let mut s = 0.0;
    for &x in w.iter() {
        if x > 0.0 {
            s += x * x.ln();
        }
    }
    let log_sigma = matrix_log_psd(sigma.mat(), floor)?;
    let cross = (rho.mat() * log_sigma).trace().re;
    Ok(s - cross)
}

/// Transpose the B factor of a bipartite operator.
pub fn partial_transpose(rho: &DensityMatrix) -> ComplexMatrix {
    let (d_a, d_b) = rho.dims();
    let m = rho.mat();
    let d = d_a * d_b;
    let mut out = ComplexMatrix::zeros(d, d);
    for a in 0..d_a {
        for b in 0..d_a {
            for i in 0..d_b {
                for j in 0..d_b {
                    out[(a * d_b + j, b * d_b + i)] = m[(a * d_b + i, b * d_b + j)];
                }
            }
        }
    }
    out
}

/// Reduced density matrix of a pure state on the first two tensor factors,
/// tracing out every later factor. Brute-force oracle for the Dicke-basis
/// machinery; exponential in the number of factors.
pub fn partial_trace_b_tail(psi: &[C64], dims: &[usize]) -> Result<ComplexMatrix> {
    if dims.len() < 2 {
        return Err(QstateError::InvalidArgument(
            "need at least two tensor factors".into(),
        ));
    }
    let total: usize = dims.iter().product();
    if psi.len() != total {
        return Err(QstateError::DimensionMismatch(format!(
            "vector length {} vs product of dims {}",
            psi.len(),
            total
        )));
    }
    let head = dims[0] * dims[1];
    let tail = total / head;
    let mut out = ComplexMatrix::zeros(head, head);
    for r in 0..head {
        for c in 0..head {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..tail {
                acc += psi[r * tail + t] * psi[c * tail + t].conj();
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// The d^2 - 1 generalized Gell-Mann matrices: symmetric off-diagonal pairs
/// first, then antisymmetric, then diagonal, each in lexicographic index
/// order. Normalized so Tr(l_a l_b) = 2 delta_ab.
#[derive(Debug, Clone)]
pub struct GellMannBasis {
    pub d: usize,
    pub mats: Vec<ComplexMatrix>,
}

impl GellMannBasis {
    pub fn new(d: usize) -> Self {
        let mut mats = Vec::with_capacity(d * d - 1);
        for j in 0..d {
            for k in (j + 1)..d {
                let mut m = ComplexMatrix::zeros(d, d);
                m[(j, k)] = C64::new(1.0, 0.0);
                m[(k, j)] = C64::new(1.0, 0.0);
                mats.push(m);
            }
        }
        for j in 0..d {
            for k in (j + 1)..d {
                let mut m = ComplexMatrix::zeros(d, d);
                m[(j, k)] = C64::new(0.0, -1.0);
                m[(k, j)] = C64::new(0.0, 1.0);
                mats.push(m);
            }
        }
        for l in 1..d {
            let norm = (2.0 / (l as f64 * (l as f64 + 1.0))).sqrt();
            let mut m = ComplexMatrix::zeros(d, d);
            for i in 0..l {
                m[(i, i)] = C64::new(norm, 0.0);
            }
            m[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
            mats.push(m);
        }
        Self { d, mats }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }
}

/// Real coordinates of a density matrix relative to the maximally mixed
/// state: rho = I/d + sum_a vec[a] * lambda_a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub vec: Vec<f64>,
    pub d: usize,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.vec.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        StateVector {
            vec: self.vec.iter().map(|x| x / n).collect(),
            d: self.d,
        }
    }
}

/// Coordinates rho_a = Tr(rho lambda_a) / 2 under the Tr(l_a l_b) = 2 d_ab
/// convention.
pub fn gellmann_decompose(rho: &DensityMatrix, basis: &GellMannBasis) -> StateVector {
    debug_assert_eq!(rho.dim(), basis.d);
    let vec = basis
        .mats
        .iter()
        .map(|l| 0.5 * (rho.mat() * l).trace().re)
        .collect();
    StateVector { vec, d: basis.d }
}

/// Rebuild I/d + v . lambda. The result may be non-PSD; callers that need a
/// state must check.
pub fn gellmann_reconstruct(v: &StateVector, basis: &GellMannBasis) -> ComplexMatrix {
    let d = basis.d;
    let mut m = ComplexMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0));
    for (c, l) in v.vec.iter().zip(basis.mats.iter()) {
        m += l.scale(*c);
    }
    m
}

/// Full-rank random state from the Ginibre-induced measure:
/// G G^dag / Tr(G G^dag) with G square complex standard normal.
pub fn random_density_matrix(d_a: usize, d_b: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_density_matrix_with(d_a, d_b, &mut rng)
}

pub fn random_density_matrix_with<R: rand::Rng>(
    d_a: usize,
    d_b: usize,
    rng: &mut R,
) -> DensityMatrix {
    let d = d_a * d_b;
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        C64::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        )
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mat = m.scale(1.0 / tr);
    // Hermitian by construction; symmetrize away the last bits of rounding.
    let mat = (&mat + mat.adjoint()).scale(0.5);
    DensityMatrix::new_unchecked(mat, d_a, d_b)
}

/// Haar-random pure state of dimension d as a complex vector.
pub fn random_pure_state<R: rand::Rng>(d: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..d)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn cm(rows: usize, cols: usize, entries: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |i, j| C64::new(entries[i * cols + j], 0.0))
    }

    #[test]
    fn eig_identity() {
        let m = ComplexMatrix::identity(3, 3);
        let (w, _) = hermitian_eig(&m).unwrap();
        for &x in w.iter() {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eig_diagonal_sorted() {
        let m = cm(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let (w, v) = hermitian_eig(&m).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[2], 3.0, epsilon = 1e-12);
        // reconstruction
        let mut rec = ComplexMatrix::zeros(3, 3);
        for j in 0..3 {
            let col = v.column(j);
            rec += (col * col.adjoint()).scale(w[j]);
        }
        assert!((rec - m).norm() < 1e-10);
    }

    #[test]
    fn eig_pauli_x() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        m[(1, 0)] = C64::new(1.0, 0.0);
        let (w, _) = hermitian_eig(&m).unwrap();
        assert_abs_diff_eq!(w[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            hermitian_eig(&m),
            Err(QstateError::NotHermitian(_))
        ));
    }

    #[test]
    fn log_psd_cases() {
        let id = ComplexMatrix::identity(3, 3);
        assert!(matrix_log_psd(&id, 1e-18).unwrap().norm() < 1e-12);

        let m = cm(2, 2, &[std::f64::consts::E, 0.0, 0.0, 7.389056098930650]);
        let l = matrix_log_psd(&m, 1e-18).unwrap();
        assert_abs_diff_eq!(l[(0, 0)].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(l[(1, 1)].re, 2.0, epsilon = 1e-10);

        let m = cm(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let l = matrix_log_psd(&m, 1e-18).unwrap();
        assert_abs_diff_eq!(l[(0, 0)].re, 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_psd_rejects_bad_floor() {
        let id = ComplexMatrix::identity(2, 2);
        assert!(matrix_log_psd(&id, 0.0).is_err());
    }

    #[test]
    fn log_pade_scalar_and_identity() {
        let id = ComplexMatrix::identity(2, 2);
        let l = matrix_log_pade(&id, PADE_DEFAULT_M, PADE_DEFAULT_K).unwrap();
        assert!(l.norm() < 1e-12);

        let m = cm(1, 1, &[2.0]);
        let l = matrix_log_pade(&m, PADE_DEFAULT_M, PADE_DEFAULT_K).unwrap();
        assert_abs_diff_eq!(l[(0, 0)].re, 2.0f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn log_pade_matches_eigen_backend() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let g = ComplexMatrix::from_fn(4, 4, |_, _| {
                C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            });
            let m = &g * g.adjoint() + ComplexMatrix::identity(4, 4).scale(0.1);
            let a = matrix_log_pade(&m, PADE_DEFAULT_M, PADE_DEFAULT_K).unwrap();
            let b = matrix_log_psd(&m, 1e-18).unwrap();
            assert!((a - b).norm() < 1e-8, "backends disagree");
        }
    }

    #[test]
    fn log_pade_rejects_non_pd() {
        let m = cm(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matrix_log_pade(&m, 8, 6).is_err());
    }

    #[test]
    fn relative_entropy_classical_cases() {
        let rho = DensityMatrix::new(cm(2, 2, &[1.0, 0.0, 0.0, 0.0]), 1, 2).unwrap();
        let sig = DensityMatrix::new(cm(2, 2, &[0.5, 0.0, 0.0, 0.5]), 1, 2).unwrap();
        let s = relative_entropy(&rho, &sig, DEFAULT_LOG_FLOOR).unwrap();
        assert_abs_diff_eq!(s, 2.0f64.ln(), epsilon = 1e-10);

        let rho = DensityMatrix::new(cm(2, 2, &[0.7, 0.0, 0.0, 0.3]), 1, 2).unwrap();
        let s = relative_entropy(&rho, &sig, DEFAULT_LOG_FLOOR).unwrap();
        let expect = 0.7 * (1.4f64).ln() + 0.3 * (0.6f64).ln();
        assert_abs_diff_eq!(s, expect, epsilon = 1e-10);

        let s = relative_entropy(&rho, &rho, DEFAULT_LOG_FLOOR).unwrap();
        assert!(s.abs() < 1e-10);
    }

    #[test]
    fn relative_entropy_nonneg_and_zero_iff_equal() {
        for seed in 0..10u64 {
            let rho = random_density_matrix(2, 2, seed);
            let sig = random_density_matrix(2, 2, seed + 1000);
            let s = relative_entropy(&rho, &sig, DEFAULT_LOG_FLOOR).unwrap();
            assert!(s >= -1e-10);
            let close = (rho.mat() - sig.mat()).norm() < 1e-10;
            if close {
                assert!(s.abs() < 1e-8);
            } else {
                assert!(s > 1e-8);
            }
            let zero = relative_entropy(&rho, &rho, DEFAULT_LOG_FLOOR).unwrap();
            assert!(zero.abs() < 1e-10);
        }
    }

    #[test]
    fn partial_transpose_product_and_bell() {
        // product state: PT acts as transpose on B, stays PSD
        let rho_a = cm(2, 2, &[0.75, 0.0, 0.0, 0.25]);
        let mut rho_b = ComplexMatrix::zeros(2, 2);
        rho_b[(0, 0)] = C64::new(0.5, 0.0);
        rho_b[(0, 1)] = C64::new(0.0, 0.3);
        rho_b[(1, 0)] = C64::new(0.0, -0.3);
        rho_b[(1, 1)] = C64::new(0.5, 0.0);
        let prod = rho_a.kronecker(&rho_b);
        let dm = DensityMatrix::new(prod.clone(), 2, 2).unwrap();
        let pt = partial_transpose(&dm);
        let expect = rho_a.kronecker(&rho_b.transpose());
        assert!((pt.clone() - expect).norm() < 1e-14);
        assert!(lambda_min(&pt).unwrap() >= -1e-12);

        // maximally entangled state: smallest PT eigenvalue -1/2
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi[3] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut bell = ComplexMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                bell[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        let dm = DensityMatrix::new(bell, 2, 2).unwrap();
        let pt = partial_transpose(&dm);
        assert_abs_diff_eq!(lambda_min(&pt).unwrap(), -0.5, epsilon = 1e-12);

        // maximally mixed is a fixed point
        let mm = DensityMatrix::maximally_mixed(2, 2);
        assert!((partial_transpose(&mm) - mm.mat()).norm() < 1e-15);
    }

    #[test]
    fn partial_transpose_involution() {
        let rho = random_density_matrix(2, 3, 11);
        let pt = partial_transpose(&rho);
        let ptdm = DensityMatrix::new_unchecked(pt.clone(), 2, 3);
        let ptpt = partial_transpose(&ptdm);
        assert!((ptpt - rho.mat()).norm() < 1e-14);
        assert!(hermiticity_deviation(&pt) < 1e-14);
        assert_abs_diff_eq!(pt.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ppt_necessity_on_separable_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mut mix = ComplexMatrix::zeros(6, 6);
            let mut weights = [0.0f64; 4];
            let mut total = 0.0;
            for w in weights.iter_mut() {
                *w = rng.gen::<f64>();
                total += *w;
            }
            for w in weights.iter_mut() {
                *w /= total;
            }
            for &w in weights.iter() {
                let a = random_pure_state(2, &mut rng);
                let b = random_pure_state(3, &mut rng);
                let mut prod = vec![C64::new(0.0, 0.0); 6];
                for i in 0..2 {
                    for j in 0..3 {
                        prod[i * 3 + j] = a[i] * b[j];
                    }
                }
                for r in 0..6 {
                    for c in 0..6 {
                        mix[(r, c)] += prod[r] * prod[c].conj() * C64::new(w, 0.0);
                    }
                }
            }
            let dm = DensityMatrix::new_unchecked(mix, 2, 3);
            let pt = partial_transpose(&dm);
            assert!(lambda_min(&pt).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn partial_trace_oracle_basics() {
        // |00> on 2x2
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[0] = C64::new(1.0, 0.0);
        let r = partial_trace_b_tail(&psi, &[2, 2]).unwrap();
        assert_abs_diff_eq!(r[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert!(r.trace().re - 1.0 < 1e-15);

        // Bell state traced down to one qubit: I/2
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi[3] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let r = partial_trace_b_tail(&psi, &[2, 1, 2]).unwrap();
        assert_abs_diff_eq!(r[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert!(r[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn partial_trace_length_mismatch() {
        let psi = vec![C64::new(1.0, 0.0); 3];
        assert!(partial_trace_b_tail(&psi, &[2, 2]).is_err());
    }

    #[test]
    fn gellmann_basis_invariants() {
        for d in 2..=4usize {
            let basis = GellMannBasis::new(d);
            assert_eq!(basis.len(), d * d - 1);
            for (a, la) in basis.mats.iter().enumerate() {
                assert!(hermiticity_deviation(la) < 1e-15);
                assert!(la.trace().norm() < 1e-14);
                for (b, lb) in basis.mats.iter().enumerate() {
                    let inner = (la * lb).trace().re;
                    let expect = if a == b { 2.0 } else { 0.0 };
                    assert_abs_diff_eq!(inner, expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gellmann_round_trip() {
        for d_pair in [(2usize, 1usize), (1, 3), (2, 2)] {
            let basis = GellMannBasis::new(d_pair.0 * d_pair.1);
            for seed in 0..5u64 {
                let rho = random_density_matrix(d_pair.0, d_pair.1, seed);
                let v = gellmann_decompose(&rho, &basis);
                let rec = gellmann_reconstruct(&v, &basis);
                assert!((rec - rho.mat()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gellmann_special_vectors() {
        let basis = GellMannBasis::new(2);
        let mm = DensityMatrix::maximally_mixed(1, 2);
        let v = gellmann_decompose(&mm, &basis);
        assert!(v.norm() < 1e-15);

        let rho = DensityMatrix::new(cm(2, 2, &[1.0, 0.0, 0.0, 0.0]), 1, 2).unwrap();
        let v = gellmann_decompose(&rho, &basis);
        // order: sym(0,1), antisym(0,1), diag
        assert!(v.vec[0].abs() < 1e-15);
        assert!(v.vec[1].abs() < 1e-15);
        assert_abs_diff_eq!(v.vec[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn random_density_matrix_properties() {
        let a = random_density_matrix(3, 3, 42);
        let b = random_density_matrix(3, 3, 42);
        assert_eq!(a.mat(), b.mat());
        assert!(DensityMatrix::new(a.mat().clone(), 3, 3).is_ok());

        // law of large numbers: mean approaches I/9
        let mut mean = ComplexMatrix::zeros(9, 9);
        for seed in 0..1000u64 {
            mean += random_density_matrix(3, 3, seed).mat();
        }
        mean = mean.scale(1.0 / 1000.0);
        let target = ComplexMatrix::from_diagonal_element(9, 9, C64::new(1.0 / 9.0, 0.0));
        let dev = (mean - target)
            .iter()
            .map(|x| x.norm())
            .fold(0.0f64, f64::max);
        assert!(dev < 0.02, "entrywise deviation {dev}");
    }

    #[test]
    fn density_matrix_serialization_round_trips() {
        let rho = random_density_matrix(2, 3, 5);
        let j = rho.to_json();
        let back = DensityMatrix::from_json(&j).unwrap();
        assert!((back.mat() - rho.mat()).norm() < 1e-15);
        assert_eq!(back.dims(), (2, 3));

        let bytes = rho.to_bytes();
        assert_eq!(&bytes[0..4], b"QDM1");
        let back = DensityMatrix::from_bytes(&bytes).unwrap();
        assert_eq!(back.mat(), rho.mat());
    }

    #[test]
    fn density_matrix_rejects_bad_input() {
        let m = cm(2, 2, &[0.9, 0.0, 0.0, 0.2]);
        assert!(DensityMatrix::new(m, 1, 2).is_err());
        let m = cm(2, 2, &[1.5, 0.0, 0.0, -0.5]);
        assert!(DensityMatrix::new(m, 1, 2).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (t, w) = gauss_legendre_unit(8);
        // degree-15 exactness: integral of x^k on [0,1] is 1/(k+1)
        for k in 0..16u32 {
            let approx: f64 = t
                .iter()
                .zip(w.iter())
                .map(|(x, wi)| wi * x.powi(k as i32))
                .sum();
            assert_abs_diff_eq!(approx, 1.0 / (k as f64 + 1.0), epsilon = 1e-13);
        }
    }
}
