//! Privacy of a target linear function of the phases.
//!
//! `P(Q, v) = v^T Q v / tr Q` is the share of the total Fisher information
//! carried by the target direction. Directions in `ker Q` are unobservable.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::QfimResult;

/// Trace at or below which the probe is insensitive and `P` is undefined.
pub const TRACE_TOL: f64 = 1e-12;
/// Tolerance on `|v| = 1`.
pub const NORM_TOL: f64 = 1e-10;
/// `P` at or above `1 - COMPLETE_TOL` counts as complete privacy.
pub const COMPLETE_TOL: f64 = 1e-9;
/// Eigenvalues below this fraction of the largest (but outside the kernel)
/// are reported as near-kernel.
pub const NEAR_KERNEL_REL: f64 = 1e-6;
/// Minimum norm of the projection of `e_j` onto the kernel for `theta_j` to
/// count as private.
pub const PRIVATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTol {
    pub rel: f64,
    pub floor: f64,
}

impl Default for KernelTol {
    fn default() -> Self {
        Self { rel: 1e-10, floor: 1e-14 }
    }
}

impl KernelTol {
    fn threshold(&self, q: &QfimResult) -> f64 {
        (self.rel * q.max_eigenvalue().abs()).max(self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Complete,
    Partial,
    None,
    Insensitive,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::Complete => "complete",
            Regime::Partial => "partial",
            Regime::None => "none",
            Regime::Insensitive => "insensitive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    /// `None` when the probe is insensitive.
    pub p: Option<f64>,
    pub target: DVector<f64>,
    pub trace_q: f64,
    pub kernel_dim: usize,
    pub kernel_basis: DMatrix<f64>,
    /// Eigenvalues above the kernel threshold but below `1e-6 lambda_max`.
    pub near_kernel: Vec<f64>,
    pub private_flags: Vec<bool>,
    pub regime: Regime,
}

/// Uniform unit vector `(1, ..., 1) / sqrt(m)`.
pub fn average_direction(m: usize) -> DVector<f64> {
    DVector::from_element(m, 1.0 / (m as f64).sqrt())
}

fn check_direction(q: &QfimResult, v: &DVector<f64>) -> Result<()> {
    if v.len() != q.dim() {
        return Err(Error::LengthMismatch { expected: q.dim(), got: v.len() });
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotUnitNorm(norm));
    }
    Ok(())
}

pub fn privacy_measure(q: &QfimResult, v: &DVector<f64>) -> Result<f64> {
    check_direction(q, v)?;
    let tr = q.trace();
    if tr <= TRACE_TOL {
        return Err(Error::Insensitive(tr));
    }
    Ok(q.quadratic_form(v) / tr)
}

/// Orthonormal basis of `ker Q` as matrix columns.
pub fn kernel(q: &QfimResult, tol: KernelTol) -> DMatrix<f64> {
    let cut = tol.threshold(q);
    let cols: Vec<usize> = (0..q.dim()).filter(|&i| q.eigenvalues[i] <= cut).collect();
    DMatrix::from_fn(q.dim(), cols.len(), |i, c| q.eigenvectors[(i, cols[c])])
}

/// Eigenvalues that are small but not treated as zero.
pub fn near_kernel(q: &QfimResult, tol: KernelTol) -> Vec<f64> {
    let cut = tol.threshold(q);
    let near = NEAR_KERNEL_REL * q.max_eigenvalue().abs();
    q.eigenvalues.iter().copied().filter(|&l| l > cut && l <= near).collect()
}

/// `theta_j` is private when `e_j` has a nonzero projection onto `ker Q`.
pub fn private_components(q: &QfimResult, tol: KernelTol) -> Vec<bool> {
    let k = kernel(q, tol);
    (0..q.dim()).map(|j| k.row(j).norm() > PRIVATE_TOL).collect()
}

pub fn classify_regime(q: &QfimResult, v: &DVector<f64>, tol: KernelTol) -> Result<Regime> {
    check_direction(q, v)?;
    if q.trace() <= TRACE_TOL {
        return Ok(Regime::Insensitive);
    }
    let p = privacy_measure(q, v)?;
    Ok(if p >= 1.0 - COMPLETE_TOL {
        Regime::Complete
    } else if kernel(q, tol).ncols() > 0 {
        Regime::Partial
    } else {
        Regime::None
    })
}

pub fn analyze(q: &QfimResult, v: &DVector<f64>, tol: KernelTol) -> Result<PrivacyReport> {
    let regime = classify_regime(q, v, tol)?;
    let p = match regime {
        Regime::Insensitive => None,
        _ => Some(privacy_measure(q, v)?),
    };
    let kernel_basis = kernel(q, tol);
    Ok(PrivacyReport {
        p,
        target: v.clone(),
        trace_q: q.trace(),
        kernel_dim: kernel_basis.ncols(),
        kernel_basis,
        near_kernel: near_kernel(q, tol),
        private_flags: private_components(q, tol),
        regime,
    })
}

/// `1 - (2^N - 2) / ((2^N - 1) + cosh 2r)` for the tree along the average.
pub fn closed_form_tree_privacy(depth: u32, r: f64) -> Result<f64> {
    if depth < 2 {
        return Err(Error::Depth { min: 2, got: depth });
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Squeezing(r));
    }
    let m = 2f64.powi(depth as i32);
    Ok(1.0 - (m - 2.0) / ((m - 1.0) + (2.0 * r).cosh()))
}

/// Privacy of the two-mode squeezed vacuum with real displacements `a1`, `a2`
/// applied before encoding.
pub fn closed_form_displaced_privacy(r: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Squeezing(r));
    }
    let a2sum = a1 * a1 + a2 * a2;
    if r == 0.0 && a2sum == 0.0 {
        return Err(Error::Insensitive(0.0));
    }
    let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    Ok(1.0 - (a2sum * c + 2.0 * a1 * a2 * s) / (2.0 * a2sum * c + s * s))
}

/// Four-mode tree privacy `1 - 2 / (3 + cosh 2r)`.
pub fn p4(r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Squeezing(r));
    }
    Ok(1.0 - 2.0 / (3.0 + (2.0 * r).cosh()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{qfim_pure_phase, qfim_tree, tree_spectrum_closed_form, Convention};
    use crate::linalg::sym_eigen_sorted;
    use crate::network::{build_product_squeezed, build_tree_state, TreeSpec};
    use crate::phase_space::{displace, two_mode_squeezed};
    use approx::assert_relative_eq;
    use nalgebra::Complex;
    use proptest::prelude::*;

    fn q_of(m: DMatrix<f64>) -> QfimResult {
        QfimResult::new(m, Convention::ClosedForm)
    }

    fn q_w() -> QfimResult {
        q_of((DMatrix::identity(3, 3) * 3.0 - DMatrix::from_element(3, 3, 1.0)) * (4.0 / 9.0))
    }

    #[test]
    fn warm_up_values() {
        let v = average_direction(3);
        assert_relative_eq!(privacy_measure(&q_of(DMatrix::from_element(3, 3, 1.0)), &v).unwrap(), 1.0, epsilon = 1e-15);
        assert!(privacy_measure(&q_w(), &v).unwrap().abs() < 1e-15);
        assert_relative_eq!(privacy_measure(&q_of(DMatrix::identity(3, 3)), &v).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        let q = q_of(DMatrix::identity(2, 2));
        assert!(matches!(privacy_measure(&q, &DVector::from_vec(vec![1.0, 1.0])), Err(Error::NotUnitNorm(_))));
        assert!(privacy_measure(&q, &average_direction(3)).is_err());
        let zero = q_of(DMatrix::zeros(2, 2));
        assert!(matches!(privacy_measure(&zero, &average_direction(2)), Err(Error::Insensitive(_))));
        let rep = analyze(&zero, &average_direction(2), KernelTol::default()).unwrap();
        assert_eq!(rep.regime, Regime::Insensitive);
        assert_eq!(rep.p, None);
    }

    #[test]
    fn kernels() {
        let t = qfim_tree(2, 1.0).unwrap().direct;
        let k = kernel(&t, KernelTol::default());
        assert_eq!(k.ncols(), 1);
        for (a, b) in k.column(0).iter().zip([0.5, 0.5, -0.5, -0.5]) {
            assert!((a - b).abs() < 1e-10);
        }
        let kw = kernel(&q_w(), KernelTol::default());
        assert_eq!(kw.ncols(), 1);
        assert!(kw.column(0).iter().all(|x| (x - 1.0 / 3f64.sqrt()).abs() < 1e-12));
        assert_eq!(kernel(&q_of(DMatrix::identity(3, 3)), KernelTol::default()).ncols(), 0);
    }

    #[test]
    fn near_kernel_is_reported_separately() {
        let q = q_of(DMatrix::from_diagonal(&DVector::from_vec(vec![1e-8, 0.0, 1.0])));
        let rep = analyze(&q, &average_direction(3), KernelTol::default()).unwrap();
        assert_eq!(rep.kernel_dim, 1);
        assert_eq!(rep.near_kernel, vec![1e-8]);
    }

    #[test]
    fn private_flags() {
        let t = qfim_tree(2, 1.0).unwrap().direct;
        assert_eq!(private_components(&t, KernelTol::default()), vec![true; 4]);
        assert_eq!(private_components(&q_of(DMatrix::identity(3, 3)), KernelTol::default()), vec![false; 3]);
        let ghz = q_of(DMatrix::from_element(3, 3, 1.0));
        assert_eq!(private_components(&ghz, KernelTol::default()), vec![true; 3]);
    }

    #[test]
    fn regimes() {
        let tol = KernelTol::default();
        let tmss = qfim_pure_phase(&two_mode_squeezed(0.8)).unwrap();
        assert_eq!(classify_regime(&tmss, &average_direction(2), tol).unwrap(), Regime::Complete);
        let tree = qfim_tree(3, 0.8).unwrap().direct;
        assert_eq!(classify_regime(&tree, &average_direction(8), tol).unwrap(), Regime::Partial);
        let prod = qfim_pure_phase(&build_product_squeezed(2, 0.8).unwrap()).unwrap();
        assert_eq!(classify_regime(&prod, &average_direction(2), tol).unwrap(), Regime::None);
        assert_relative_eq!(privacy_measure(&prod, &average_direction(2)).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn tree_closed_forms() {
        assert!((closed_form_tree_privacy(2, 1.0).unwrap() - 0.704235).abs() < 5e-5);
        assert_eq!(closed_form_tree_privacy(2, 1.0).unwrap(), p4(1.0).unwrap());
        assert!(closed_form_tree_privacy(2, 0.0).is_err());
        assert!((p4(1e-6).unwrap() - 0.5).abs() < 1e-10);
        let mut last = 0.0;
        for &r in &[0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let p = closed_form_tree_privacy(3, r).unwrap();
            assert!(p > last);
            last = p;
        }
        assert!(1.0 - last < 1e-3);
        let ps: Vec<f64> = (2..10).map(|n| closed_form_tree_privacy(n, 1.0).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
        for n in 2..=6 {
            for &r in &[0.3, 1.1] {
                let q = qfim_tree(n, r).unwrap().direct;
                let p = privacy_measure(&q, &average_direction(1 << n)).unwrap();
                assert_relative_eq!(p, closed_form_tree_privacy(n, r).unwrap(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn p4_matches_spectrum() {
        for &r in &[0.2, 1.0, 2.5] {
            let sp = tree_spectrum_closed_form(2, r).unwrap();
            let alt = sp.lambda_plus / (sp.lambda_plus + 2.0 * sp.lambda_perp);
            assert_relative_eq!(alt, p4(r).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn displaced_closed_form() {
        assert_eq!(closed_form_displaced_privacy(0.7, 0.0, 0.0).unwrap(), 1.0);
        assert!((closed_form_displaced_privacy(1.0, 1.0, 0.0).unwrap() - 0.818074).abs() < 5e-5);
        for &(a1, a2) in &[(0.1, 0.0), (0.5, 0.5), (-1.0, 2.0)] {
            assert!(closed_form_displaced_privacy(0.9, a1, a2).unwrap() < 1.0);
        }
        for &r in &[0.5, 1.0] {
            for &(a1, a2) in &[(0.5, 0.0), (1.0, 2.0), (2.0, 0.5)] {
                let s = displace(&two_mode_squeezed(r), &[Complex::new(a1, 0.0), Complex::new(a2, 0.0)]).unwrap();
                let q = qfim_pure_phase(&s).unwrap();
                assert_relative_eq!(
                    privacy_measure(&q, &average_direction(2)).unwrap(),
                    closed_form_displaced_privacy(r, a1, a2).unwrap(),
                    epsilon = 1e-8
                );
            }
        }
        assert!(closed_form_displaced_privacy(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn tree_kernel_spans_s() {
        let spec = TreeSpec::new(3, 0.6).unwrap();
        let q = qfim_pure_phase(&build_tree_state(&spec).unwrap()).unwrap();
        let k = kernel(&q, KernelTol::default());
        assert_eq!(k.ncols(), 1);
        let s = DVector::from_vec(spec.s_vector()) / 8f64.sqrt();
        assert!((k.column(0).dot(&s).abs() - 1.0).abs() < 1e-10);
    }

    fn random_orthogonal(seed: &[f64], m: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(m, m, |i, j| seed[i * m + j]);
        let (_, v) = sym_eigen_sorted(&(&a + a.transpose()));
        v
    }

    proptest! {
        #[test]
        fn scale_invariance(c in 1e-6..1e6f64, r in 0.1..2.0f64) {
            let q = qfim_tree(2, r).unwrap().direct;
            let v = average_direction(4);
            let p = privacy_measure(&q, &v).unwrap();
            let pc = privacy_measure(&q.rescaled(c, Convention::ClosedForm), &v).unwrap();
            prop_assert!((p - pc).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn basis_invariance(seed in proptest::collection::vec(-1.0..1.0f64, 16), r in 0.1..2.0f64) {
            let q = qfim_tree(2, r).unwrap().direct;
            let b = random_orthogonal(&seed, 4);
            let v = average_direction(4);
            let qb = q_of(&b * &q.matrix * b.transpose());
            let p = privacy_measure(&q, &v).unwrap();
            let pb = privacy_measure(&qb, &(&b * &v)).unwrap();
            prop_assert!((p - pb).abs() < 1e-10);
        }

        #[test]
        fn continuity(seed in proptest::collection::vec(-1.0..1.0f64, 16), eps in 1e-8..1e-3f64) {
            let q = qfim_tree(2, 1.0).unwrap().direct;
            let d = DMatrix::from_fn(4, 4, |i, j| seed[i * 4 + j] + seed[j * 4 + i]) * eps;
            let v = average_direction(4);
            let p = privacy_measure(&q, &v).unwrap();
            let pd = privacy_measure(&q_of(&q.matrix + &d), &v).unwrap();
            let k = 2.0 * 4.0f64.sqrt() / q.trace();
            prop_assert!((p - pd).abs() <= k * d.norm());
        }

        #[test]
        fn privacy_in_unit_interval(n in 2u32..=4, r in 0.05..2.5f64) {
            let q = qfim_tree(n, r).unwrap().direct;
            let p = privacy_measure(&q, &average_direction(1 << n)).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
