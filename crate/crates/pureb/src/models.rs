//! Model states and analytic references: Werner and isotropic families
//! with closed-form REE, UPB-constructed bound entangled states, and the
//! separable example families with known pure-extension behavior.

use nalgebra::DMatrix;

use crate::dicke::PurebParams;
use crate::qstate::{C64, ComplexMatrix, DensityMatrix, QstateError, Result};

/// Werner state (I - alpha F)/(d^2 - d alpha) on d (x) d, where F is the
/// swap operator. Separable iff alpha <= 1/d.
pub fn werner(d: usize, alpha: f64) -> Result<DensityMatrix> {
    if !(-1.0..=1.0).contains(&alpha) {
        return Err(QstateError::InvalidArgument(format!(
            "werner alpha must lie in [-1,1], got {alpha}"
        )));
    }
    let d2 = d * d;
    let norm = 1.0 / (d2 as f64 - d as f64 * alpha);
    let mut m = ComplexMatrix::zeros(d2, d2);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + j, i * d + j)] += C64::new(norm, 0.0);
            m[(i * d + j, j * d + i)] -= C64::new(alpha * norm, 0.0);
        }
    }
    Ok(DensityMatrix::new_unchecked(m, d, d))
}

/// Isotropic state (1-alpha)/d^2 I + alpha |psi+><psi+| on d (x) d.
pub fn isotropic(d: usize, alpha: f64) -> Result<DensityMatrix> {
    let lo = -1.0 / (d * d - 1) as f64;
    if !(lo..=1.0).contains(&alpha) {
        return Err(QstateError::InvalidArgument(format!(
            "isotropic alpha must lie in [{lo},1], got {alpha}"
        )));
    }
    let d2 = d * d;
    let mut m =
        ComplexMatrix::from_diagonal_element(d2, d2, C64::new((1.0 - alpha) / d2 as f64, 0.0));
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] += C64::new(alpha / d as f64, 0.0);
        }
    }
    Ok(DensityMatrix::new_unchecked(m, d, d))
}

fn kl_term(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * (p.ln() - q.ln())
    }
}

/// Analytic REE of the Werner family: zero below alpha = 1/d, otherwise
/// S(rho_W(alpha) || rho_W(1/d)). Both states are simultaneously diagonal
/// in the symmetric/antisymmetric split of the swap operator, so this is a
/// two-outcome classical divergence with multiplicities d(d+1)/2 and
/// d(d-1)/2.
pub fn werner_ree_analytic(d: usize, alpha: f64) -> f64 {
    if alpha < 1.0 / d as f64 {
        return 0.0;
    }
    let df = d as f64;
    let m_sym = df * (df + 1.0) / 2.0;
    let m_anti = df * (df - 1.0) / 2.0;
    let eig = |a: f64| {
        let norm = 1.0 / (df * df - df * a);
        ((1.0 - a) * norm, (1.0 + a) * norm)
    };
    let (p_sym, p_anti) = eig(alpha);
    let (q_sym, q_anti) = eig(1.0 / df);
    m_sym * kl_term(p_sym, q_sym) + m_anti * kl_term(p_anti, q_anti)
}

/// Analytic REE of the isotropic family: zero below alpha = 1/(d+1),
/// otherwise S(rho_I(alpha) || rho_I(1/(d+1))); the maximally entangled
/// projector and its complement diagonalize both states.
pub fn isotropic_ree_analytic(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    if alpha < 1.0 / (df + 1.0) {
        return 0.0;
    }
    let d2 = df * df;
    let eig = |a: f64| ((1.0 - a) / d2 + a, (1.0 - a) / d2);
    let (p_top, p_rest) = eig(alpha);
    let (q_top, q_rest) = eig(1.0 / (df + 1.0));
    kl_term(p_top, q_top) + (d2 - 1.0) * kl_term(p_rest, q_rest)
}

/// Which unextendible product basis to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpbName {
    Tiles,
    Pyramid,
}

/// Five orthogonal product vectors in 3 (x) 3 whose complement holds no
/// product vector, stored as (A factor, B factor) pairs.
#[derive(Debug, Clone)]
pub struct UpbSet {
    pub name: UpbName,
    pub vectors: Vec<(Vec<C64>, Vec<C64>)>,
}

impl UpbSet {
    pub fn new(name: UpbName) -> Self {
        let vectors = match name {
            UpbName::Tiles => {
                let r = |coeffs: [f64; 3]| -> Vec<C64> {
                    let n = coeffs.iter().map(|x| x * x).sum::<f64>().sqrt();
                    coeffs.iter().map(|&x| C64::new(x / n, 0.0)).collect()
                };
                vec![
                    (r([1.0, 0.0, 0.0]), r([1.0, -1.0, 0.0])),
                    (r([0.0, 0.0, 1.0]), r([0.0, 1.0, -1.0])),
                    (r([1.0, -1.0, 0.0]), r([0.0, 0.0, 1.0])),
                    (r([0.0, 1.0, -1.0]), r([1.0, 0.0, 0.0])),
                    (r([1.0, 1.0, 1.0]), r([1.0, 1.0, 1.0])),
                ]
            }
            UpbName::Pyramid => {
                // regular pentagon with apex height h = (1/2) sqrt(1 + sqrt 5)
                let h = 0.5 * (1.0 + 5.0f64.sqrt()).sqrt();
                let nrm = 2.0 / (5.0 + 5.0f64.sqrt()).sqrt();
                let v = |j: usize| -> Vec<C64> {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / 5.0;
                    vec![
                        C64::new(nrm * t.cos(), 0.0),
                        C64::new(nrm * t.sin(), 0.0),
                        C64::new(nrm * h, 0.0),
                    ]
                };
                (0..5).map(|j| (v(j), v((2 * j) % 5))).collect()
            }
        };
        Self { name, vectors }
    }

    /// Product vectors in the 9-dimensional joint space.
    pub fn product_vectors(&self) -> Vec<Vec<C64>> {
        self.vectors
            .iter()
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(9);
                for x in a {
                    for y in b {
                        out.push(x * y);
                    }
                }
                out
            })
            .collect()
    }
}

/// Rank-4 bound entangled state (I - sum |psi_i><psi_i|) / 4 built from a
/// UPB: PPT by construction yet entangled.
pub fn upb_bes(name: UpbName) -> DensityMatrix {
    let set = UpbSet::new(name);
    let mut m = ComplexMatrix::identity(9, 9);
    for psi in set.product_vectors() {
        for i in 0..9 {
            for j in 0..9 {
                m[(i, j)] -= psi[i] * psi[j].conj();
            }
        }
    }
    let m = m.scale(0.25);
    let m = (&m + m.adjoint()).scale(0.5);
    DensityMatrix::new_unchecked(m, 3, 3)
}

/// Separable two-qubit state lambda |0><0| (x) |1><1| +
/// (1-lambda) |1><1| (x) |+><+|; its best pure k-extension is known in
/// closed form.
pub fn appendix_b_example1(lam: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&lam) {
        return Err(QstateError::InvalidArgument(format!("lambda {lam} outside [0,1]")));
    }
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(1, 1)] = C64::new(lam, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            m[(2 + i, 2 + j)] = C64::new((1.0 - lam) * 0.5, 0.0);
        }
    }
    Ok(DensityMatrix::new_unchecked(m, 2, 2))
}

/// Marginal of the closed-form trial extension
/// sqrt(lam)|0>|1>^k + sqrt(1-lam)|1>|+>^k: the target state plus a
/// coherence term that decays like 2^{-(k-1)/2}.
pub fn appendix_b_example1_marginal(lam: f64, k: usize) -> Result<DensityMatrix> {
    if k < 1 {
        return Err(QstateError::InvalidArgument("k must be >= 1".into()));
    }
    let rho = appendix_b_example1(lam)?;
    let mut m = rho.mat().clone();
    let eps = (lam * (1.0 - lam)).sqrt() / 2.0f64.powf((k as f64 - 1.0) / 2.0);
    // |0><1| (x) |1><+| : row block A=0, column block A=1, B part |1><+|
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for bj in 0..2 {
        m[(1, 2 + bj)] += C64::new(eps * inv_sqrt2, 0.0);
        m[(2 + bj, 1)] += C64::new(eps * inv_sqrt2, 0.0);
    }
    Ok(DensityMatrix::new_unchecked(m, 2, 2))
}

/// Separable state lambda (I/d) (x) |0><0| + (1-lambda) (I/d) (x) |1><1|
/// on d (x) 2; the worst-case family for pure extensions at lambda in {0,1}.
pub fn appendix_b_example2(lam: f64, d: usize) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&lam) {
        return Err(QstateError::InvalidArgument(format!("lambda {lam} outside [0,1]")));
    }
    let dim = 2 * d;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for a in 0..d {
        m[(a * 2, a * 2)] = C64::new(lam / d as f64, 0.0);
        m[(a * 2 + 1, a * 2 + 1)] = C64::new((1.0 - lam) / d as f64, 0.0);
    }
    Ok(DensityMatrix::new_unchecked(m, d, 2))
}

/// Exact pure 4-extension preimage of `appendix_b_example2(0.5, 2)`:
/// coefficients b on |D^4_0> and |D^4_4>, -a on |D^4_2> at A level 0, and
/// 1/2 on |D^4_1>, |D^4_3> at A level 1, with a = 1/(2 sqrt 2), b = sqrt(3)/4.
pub fn example2_preimage_k4() -> PurebParams {
    let a = 1.0 / (2.0 * 2.0f64.sqrt());
    let b = 3.0f64.sqrt() / 4.0;
    let mut raw = DMatrix::zeros(2, 5);
    raw[(0, 0)] = C64::new(b, 0.0);
    raw[(0, 2)] = C64::new(-a, 0.0);
    raw[(0, 4)] = C64::new(b, 0.0);
    raw[(1, 1)] = C64::new(0.5, 0.0);
    raw[(1, 3)] = C64::new(0.5, 0.0);
    PurebParams::new(raw, 2, 2, 4).expect("static shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{rdm_from_params, BTensor};
    use crate::qstate::{
        gellmann_decompose, lambda_min, partial_trace_b_tail, partial_transpose,
        relative_entropy, GellMannBasis, DEFAULT_LOG_FLOOR,
    };
    use approx::assert_abs_diff_eq;

    #[test]
    fn werner_basic_shapes() {
        let w0 = werner(3, 0.0).unwrap();
        let mm = DensityMatrix::maximally_mixed(3, 3);
        assert!((w0.mat() - mm.mat()).norm() < 1e-14);
        assert!(werner(2, 1.5).is_err());
        for alpha in [-1.0, -0.3, 0.4, 1.0] {
            let w = werner(3, alpha).unwrap();
            assert!(DensityMatrix::new(w.mat().clone(), 3, 3).is_ok());
        }
    }

    #[test]
    fn werner_ppt_boundary_at_half_for_qubits() {
        let basis = GellMannBasis::new(4);
        let below = werner(2, 0.499).unwrap();
        let above = werner(2, 0.501).unwrap();
        assert!(lambda_min(&partial_transpose(&below)).unwrap() > 0.0);
        assert!(lambda_min(&partial_transpose(&above)).unwrap() < 0.0);
        let _ = basis;
    }

    #[test]
    fn isotropic_basic_shapes() {
        let iso = isotropic(3, 1.0).unwrap();
        // pure maximally entangled projector
        let tr2 = (iso.mat() * iso.mat()).trace().re;
        assert_abs_diff_eq!(tr2, 1.0, epsilon = 1e-12);
        assert!(isotropic(3, -0.5).is_err());
        for alpha in [0.0, 0.2, 0.9] {
            let m = isotropic(3, alpha).unwrap();
            assert!(DensityMatrix::new(m.mat().clone(), 3, 3).is_ok());
        }
    }

    #[test]
    fn analytic_ree_thresholds_and_values() {
        assert_eq!(werner_ree_analytic(3, 0.3), 0.0);
        assert_eq!(isotropic_ree_analytic(3, 0.2), 0.0);
        assert_abs_diff_eq!(werner_ree_analytic(2, 1.0), 2.0f64.ln(), epsilon = 1e-10);

        // spectral oracle: evaluate S(rho_W(alpha) || rho_W(1/d)) directly
        for alpha in [0.5, 0.7, 1.0] {
            let rho = werner(3, alpha).unwrap();
            let sigma = werner(3, 1.0 / 3.0).unwrap();
            let direct = relative_entropy(&rho, &sigma, DEFAULT_LOG_FLOOR).unwrap();
            assert_abs_diff_eq!(werner_ree_analytic(3, alpha), direct, epsilon = 1e-10);
        }
        for alpha in [0.3, 0.6, 1.0] {
            let rho = isotropic(3, alpha).unwrap();
            let sigma = isotropic(3, 0.25).unwrap();
            let direct = relative_entropy(&rho, &sigma, DEFAULT_LOG_FLOOR).unwrap();
            assert_abs_diff_eq!(isotropic_ree_analytic(3, alpha), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn analytic_ree_continuity_at_threshold() {
        for d in [2usize, 3] {
            let t = 1.0 / d as f64;
            assert!(werner_ree_analytic(d, t + 1e-9) < 1e-7);
            let t = 1.0 / (d as f64 + 1.0);
            assert!(isotropic_ree_analytic(d, t + 1e-9) < 1e-7);
        }
    }

    #[test]
    fn upb_orthogonality_and_productness() {
        for name in [UpbName::Tiles, UpbName::Pyramid] {
            let set = UpbSet::new(name);
            let prods = set.product_vectors();
            for i in 0..5 {
                let ni: f64 = prods[i].iter().map(|x| x.norm_sqr()).sum();
                assert_abs_diff_eq!(ni, 1.0, epsilon = 1e-12);
                for j in (i + 1)..5 {
                    let ip: C64 = prods[i]
                        .iter()
                        .zip(&prods[j])
                        .map(|(x, y)| x.conj() * y)
                        .sum();
                    assert!(ip.norm() < 1e-12, "{name:?} vectors {i},{j} overlap {ip}");
                }
            }
        }
    }

    #[test]
    fn upb_unextendibility_by_determinant_criterion() {
        // every 3-subset of either side spans C^3, so no product vector can
        // be orthogonal to all five
        for name in [UpbName::Tiles, UpbName::Pyramid] {
            let set = UpbSet::new(name);
            for side in 0..2 {
                for a in 0..5 {
                    for b in (a + 1)..5 {
                        for c in (b + 1)..5 {
                            let m = ComplexMatrix::from_fn(3, 3, |r, col| {
                                let v = match r {
                                    0 => &set.vectors[a],
                                    1 => &set.vectors[b],
                                    _ => &set.vectors[c],
                                };
                                if side == 0 { v.0[col] } else { v.1[col] }
                            });
                            let det = m.determinant().norm();
                            assert!(
                                det > 1e-3,
                                "{name:?} side {side} subset ({a},{b},{c}) is degenerate"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn upb_bes_is_ppt_rank4() {
        for name in [UpbName::Tiles, UpbName::Pyramid] {
            let rho = upb_bes(name);
            assert_abs_diff_eq!(rho.mat().trace().re, 1.0, epsilon = 1e-12);
            assert!(DensityMatrix::new(rho.mat().clone(), 3, 3).is_ok());
            let pt = partial_transpose(&rho);
            assert!(lambda_min(&pt).unwrap() >= -1e-10, "{name:?} not PPT");
            // normalized rank-4 projector: purity 1/4
            let purity = (rho.mat() * rho.mat()).trace().re;
            assert_abs_diff_eq!(purity, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn example1_construction() {
        let rho = appendix_b_example1(0.0).unwrap();
        // |1><1| (x) |+><+|
        assert_abs_diff_eq!(rho.mat()[(2, 3)].re, 0.5, epsilon = 1e-15);
        let marg = appendix_b_example1_marginal(0.0, 5).unwrap();
        assert!((marg.mat() - rho.mat()).norm() < 1e-15);

        // deviation magnitude: two matrix units of size eps/sqrt(2) each,
        // Frobenius norm eps * sqrt(2) with eps = sqrt(l(1-l)) 2^{-(k-1)/2}
        let lam = 0.233;
        let k = 9;
        let rho = appendix_b_example1(lam).unwrap();
        let marg = appendix_b_example1_marginal(lam, k).unwrap();
        let eps = (lam * (1.0 - lam)).sqrt() / 2.0f64.powi(4);
        let dev = (marg.mat() - rho.mat()).norm();
        assert_abs_diff_eq!(dev, eps * 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn example1_marginal_matches_trial_state_oracle() {
        let lam: f64 = 0.233;
        for k in [2usize, 3, 4] {
            // full-space trial state sqrt(lam)|0>|1..1> + sqrt(1-lam)|1>|+..+>
            let dim_b = 1usize << k;
            let mut psi = vec![C64::new(0.0, 0.0); 2 * dim_b];
            psi[dim_b - 1] += C64::new(lam.sqrt(), 0.0); // |0> (x) |1>^k
            let amp = (1.0 - lam).sqrt() / (dim_b as f64).sqrt();
            for x in 0..dim_b {
                psi[dim_b + x] += C64::new(amp, 0.0); // |1> (x) |+>^k
            }
            let mut dims = vec![2usize];
            dims.extend(std::iter::repeat(2).take(k));
            let oracle = partial_trace_b_tail(&psi, &dims).unwrap();
            let marg = appendix_b_example1_marginal(lam, k).unwrap();
            assert!(
                (marg.mat() - &oracle).norm() < 1e-12,
                "k={k} marginal mismatch"
            );
        }
    }

    #[test]
    fn example2_preimage_exact() {
        let p = example2_preimage_k4();
        assert_abs_diff_eq!(p.norm(), 1.0, epsilon = 1e-15);
        let bt = BTensor::new(4, 2).unwrap();
        let rdm = rdm_from_params(&p, &bt).unwrap();
        let target = appendix_b_example2(0.5, 2).unwrap();
        assert!(
            (rdm.mat() - target.mat()).norm() < 1e-12,
            "preimage marginal deviates by {}",
            (rdm.mat() - target.mat()).norm()
        );
        // lambda = 1/2 state is maximally mixed on 2x2
        let (w, _) = crate::qstate::hermitian_eig(target.mat()).unwrap();
        for &x in w.iter() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn gellmann_vector_of_maximally_mixed_is_zero() {
        let basis = GellMannBasis::new(9);
        let v = gellmann_decompose(&DensityMatrix::maximally_mixed(3, 3), &basis);
        assert!(v.norm() < 1e-14);
    }
}
