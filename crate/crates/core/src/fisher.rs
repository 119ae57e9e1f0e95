//! Quantum Fisher information matrices for local phase encodings.
//!
//! Three routes are provided: the number-covariance formula for pure probes,
//! the moment-derivative formula for general Gaussian states, and closed forms
//! for the two-mode lossy probe and the splitting tree.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, spd_inverse, sym_eigen_sorted, symmetrize};
use crate::network::{build_tree_state, encode_phases, TreeSpec};
use crate::phase_space::GaussianState;

/// Symplectic eigenvalues must lie this close to `1/2` for the pure route.
pub const PURITY_TOL: f64 = 1e-6;
/// Condition number above which the general route refuses to invert.
pub const MAX_CONDITION: f64 = 1e12;
/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Required agreement between the two tree routes.
pub const TREE_ROUTE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `Q = 4 cov(n)`, the normalisation of the pure-state formula.
    NumberCovariance,
    /// Moment-derivative formula `tr[(s^-1 ds)^2]/2 + dr^T s^-1 dr`.
    MomentDerivative,
    ClosedForm,
}

impl Convention {
    pub fn tag(self) -> &'static str {
        match self {
            Convention::NumberCovariance => "number-covariance",
            Convention::MomentDerivative => "moment-derivative",
            Convention::ClosedForm => "closed-form",
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QfimResult {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub convention: Convention,
    /// Condition number of the covariance that was inverted, if any.
    pub condition_number: Option<f64>,
}

impl QfimResult {
    pub fn new(matrix: DMatrix<f64>, convention: Convention) -> Self {
        let matrix = symmetrize(&matrix);
        let (eigenvalues, eigenvectors) = sym_eigen_sorted(&matrix);
        Self { matrix, eigenvalues, eigenvectors, convention, condition_number: None }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// The same matrix multiplied by `c` under another convention tag.
    pub fn rescaled(&self, c: f64, convention: Convention) -> Self {
        let mut out = Self::new(&self.matrix * c, convention);
        out.condition_number = self.condition_number;
        out
    }

    /// Largest entry of `V diag(w) V^T - Q`.
    pub fn reconstruction_error(&self) -> f64 {
        let rebuilt =
            &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues) * self.eigenvectors.transpose();
        max_abs_diff(&rebuilt, &self.matrix)
    }

    /// `v^T Q v`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.matrix * v))
    }
}

/// Number-covariance QFIm of a pure probe under local phase shifts.
///
/// `Q_mn = 2 sum_{z,w} (s_{zm,wn}^2 + 2 s_{zm,wn} r_zm r_wn) - delta_mn`
/// with `s` the symmetrised central covariance and `r` the mean.
pub fn qfim_pure_phase(state: &GaussianState) -> Result<QfimResult> {
    let nu = state.symplectic_eigenvalues()?;
    if let Some(&worst) = nu.iter().find(|v| (*v - 0.5).abs() > PURITY_TOL) {
        return Err(Error::MixedState(worst));
    }
    let m = state.num_modes();
    let (s, r) = (state.cov(), state.mean());
    let q = DMatrix::from_fn(m, m, |mu, nv| {
        let mut acc = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let (i, j) = (2 * mu + a, 2 * nv + b);
                acc += s[(i, j)] * s[(i, j)] + 2.0 * s[(i, j)] * r[i] * r[j];
            }
        }
        2.0 * acc - if mu == nv { 1.0 } else { 0.0 }
    });
    Ok(QfimResult::new(q, Convention::NumberCovariance))
}

/// Moment-derivative QFIm from precomputed derivatives of the covariance and
/// mean along each parameter.
pub fn qfim_from_derivatives(
    sigma: &DMatrix<f64>,
    dsigma: &[DMatrix<f64>],
    dmean: &[DVector<f64>],
) -> Result<QfimResult> {
    if dsigma.len() != dmean.len() {
        return Err(Error::LengthMismatch { expected: dsigma.len(), got: dmean.len() });
    }
    let (inv, cond) = spd_inverse(sigma)?;
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let a: Vec<DMatrix<f64>> = dsigma.iter().map(|d| &inv * d).collect();
    let b: Vec<DVector<f64>> = dmean.iter().map(|d| &inv * d).collect();
    let p = dsigma.len();
    let q = DMatrix::from_fn(p, p, |mu, nv| {
        let tr: f64 = a[mu].iter().zip(a[nv].transpose().iter()).map(|(x, y)| x * y).sum();
        0.5 * tr + dmean[mu].dot(&b[nv])
    });
    let mut out = QfimResult::new(q, Convention::MomentDerivative);
    out.condition_number = Some(cond);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference { step: f64 },
}

impl Default for DerivativeMethod {
    fn default() -> Self {
        DerivativeMethod::Analytic
    }
}

/// Derivatives of the covariance and mean of an encoded state with respect to
/// each local phase: `d sigma = G sigma + sigma G^T`, `d r = G r`, where `G`
/// is `[[0, 1], [-1, 0]]` on the phase's mode.
pub fn phase_derivatives(enc: &GaussianState) -> (Vec<DMatrix<f64>>, Vec<DVector<f64>>) {
    let (s, r) = (enc.cov(), enc.mean());
    let m = enc.num_modes();
    let mut dsigma = Vec::with_capacity(m);
    let mut dmean = Vec::with_capacity(m);
    for mu in 0..m {
        // G s keeps only rows x_mu, p_mu.
        let mut gs = DMatrix::zeros(2 * m, 2 * m);
        gs.row_mut(2 * mu).copy_from(&s.row(2 * mu + 1));
        gs.row_mut(2 * mu + 1).copy_from(&(-s.row(2 * mu)));
        dsigma.push(&gs + gs.transpose());
        let mut dr = DVector::zeros(2 * m);
        dr[2 * mu] = r[2 * mu + 1];
        dr[2 * mu + 1] = -r[2 * mu];
        dmean.push(dr);
    }
    (dsigma, dmean)
}

/// Moment-derivative QFIm of `theta -> encode_phases(probe, theta)` at `theta0`.
pub fn qfim_phase_family(
    probe: &GaussianState,
    theta0: &[f64],
    method: DerivativeMethod,
) -> Result<QfimResult> {
    match method {
        DerivativeMethod::Analytic => {
            let enc = encode_phases(probe, theta0)?;
            let (dsigma, dmean) = phase_derivatives(&enc);
            qfim_from_derivatives(enc.cov(), &dsigma, &dmean)
        }
        DerivativeMethod::FiniteDifference { step } => {
            qfim_general(|t| encode_phases(probe, t), theta0, step)
        }
    }
}

/// Moment-derivative QFIm of an arbitrary Gaussian family using central
/// differences of step `h`.
pub fn qfim_general<F>(family: F, theta0: &[f64], h: f64) -> Result<QfimResult>
where
    F: Fn(&[f64]) -> Result<GaussianState>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let centre = family(theta0)?;
    let mut dsigma = Vec::with_capacity(theta0.len());
    let mut dmean = Vec::with_capacity(theta0.len());
    let mut t = theta0.to_vec();
    for mu in 0..theta0.len() {
        t[mu] = theta0[mu] + h;
        let plus = family(&t)?;
        t[mu] = theta0[mu] - h;
        let minus = family(&t)?;
        t[mu] = theta0[mu];
        dsigma.push((plus.cov() - minus.cov()) / (2.0 * h));
        dmean.push((plus.mean() - minus.mean()) / (2.0 * h));
    }
    qfim_from_derivatives(centre.cov(), &dsigma, &dmean)
}

/// `2 eta^2 sinh^2 2r / (1 + 4 (1 - eta) eta sinh^2 r)`, the common entry of
/// the closed-form two-mode lossy QFIm.
pub fn two_mode_lossy_entry(r: f64, eta: f64) -> f64 {
    let s2 = (2.0 * r).sinh().powi(2);
    2.0 * eta * eta * s2 / (1.0 + 4.0 * (1.0 - eta) * eta * r.sinh().powi(2))
}

fn check_eta_open(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Transmissivity(eta));
    }
    Ok(())
}

/// Closed-form QFIm of the lossy two-mode squeezed vacuum: the entry above
/// times the all-ones matrix.
pub fn qfim_two_mode_lossy_closed_form(r: f64, eta: f64) -> Result<QfimResult> {
    check_eta_open(eta)?;
    let e = two_mode_lossy_entry(r, eta);
    Ok(QfimResult::new(DMatrix::from_element(2, 2, e), Convention::ClosedForm))
}

/// Spectrum of the tree QFIm.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpectrum {
    pub depth: u32,
    pub r: f64,
    /// Degenerate eigenvalue on the subspace orthogonal to `1` and `s`.
    pub lambda_perp: f64,
    /// Eigenvalue along the all-ones direction.
    pub lambda_plus: f64,
    /// Full multiset in ascending order.
    pub values: Vec<f64>,
}

impl TreeSpectrum {
    pub fn num_modes(&self) -> usize {
        1 << self.depth
    }

    /// Zero-eigenvalue direction `s / sqrt(M)`.
    pub fn zero_vector(&self) -> DVector<f64> {
        let spec = TreeSpec::new(self.depth, self.r).expect("validated depth");
        DVector::from_vec(spec.s_vector()) / (self.num_modes() as f64).sqrt()
    }

    pub fn average_vector(&self) -> DVector<f64> {
        let m = self.num_modes();
        DVector::from_element(m, 1.0 / (m as f64).sqrt())
    }
}

pub fn tree_spectrum_closed_form(depth: u32, r: f64) -> Result<TreeSpectrum> {
    if depth < 2 {
        return Err(Error::Depth { min: 2, got: depth });
    }
    TreeSpec::new(depth, r)?;
    let n = depth as i32;
    let m = 1usize << depth;
    let lambda_perp = ((2.0 * r).cosh() - 1.0) / 2f64.powi(n - 2);
    let lambda_plus = ((4.0 * r).cosh() - 1.0) / 2f64.powi(n - 1);
    let mut values = vec![0.0];
    values.extend(std::iter::repeat(lambda_perp).take(m - 2));
    values.push(lambda_plus);
    values.sort_by(f64::total_cmp);
    Ok(TreeSpectrum { depth, r, lambda_perp, lambda_plus, values })
}

/// Tree QFIm evaluated from `l_perp (I - P_plus - P_0) + l_plus P_plus`.
pub fn qfim_tree_projector(depth: u32, r: f64) -> Result<QfimResult> {
    let sp = tree_spectrum_closed_form(depth, r)?;
    let one = sp.average_vector();
    let s = sp.zero_vector();
    let m = sp.num_modes();
    let p_plus = &one * one.transpose();
    let p_zero = &s * s.transpose();
    let q = (DMatrix::identity(m, m) - &p_plus - p_zero) * sp.lambda_perp + p_plus * sp.lambda_plus;
    Ok(QfimResult::new(q, Convention::ClosedForm))
}

/// Both tree routes side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeQfim {
    pub projector: QfimResult,
    pub direct: QfimResult,
    pub max_deviation: f64,
}

/// Tree QFIm from the projector form and from the built state; fails if the
/// two differ by more than `1e-10` in any entry (relative to the largest).
pub fn qfim_tree(depth: u32, r: f64) -> Result<TreeQfim> {
    let projector = qfim_tree_projector(depth, r)?;
    let direct = qfim_pure_phase(&build_tree_state(&TreeSpec::new(depth, r)?)?)?;
    let max_deviation = max_abs_diff(&projector.matrix, &direct.matrix);
    if max_deviation > TREE_ROUTE_TOL * projector.matrix.amax().max(1.0) {
        return Err(Error::Domain(format!(
            "tree QFIm routes disagree by {max_deviation:.3e} at N={depth}, r={r}"
        )));
    }
    Ok(TreeQfim { projector, direct, max_deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonStats {
    pub mean_photons_per_mode: f64,
    pub total_photons: f64,
    pub lambda_snl: f64,
    pub lambda_max: f64,
    /// `lambda_max / lambda_snl`; the limit 2 when there are no photons.
    pub enhancement: f64,
}

pub fn mean_photon_stats(depth: u32, r: f64) -> Result<PhotonStats> {
    if depth < 2 {
        return Err(Error::Depth { min: 2, got: depth });
    }
    TreeSpec::new(depth, r)?;
    let half_m = 2f64.powi(depth as i32 - 1);
    let n = r.sinh().powi(2) / half_m;
    let lambda_snl = 4.0 * n;
    let lambda_max = 8.0 * n * (1.0 + half_m * n);
    let enhancement = if n > 0.0 { lambda_max / lambda_snl } else { 2.0 };
    Ok(PhotonStats {
        mean_photons_per_mode: n,
        total_photons: 2.0 * half_m * n,
        lambda_snl,
        lambda_max,
        enhancement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tree_covariance_closed_form;
    use crate::phase_space::{
        apply_loss, apply_map, displace, single_mode_squeezer, two_mode_squeezed, vacuum_state,
    };
    use approx::assert_relative_eq;
    use nalgebra::Complex;
    use proptest::prelude::*;

    fn ones(m: usize) -> DMatrix<f64> {
        DMatrix::from_element(m, m, 1.0)
    }

    #[test]
    fn pure_route_examples() {
        let r = 0.7f64;
        let q = qfim_pure_phase(&two_mode_squeezed(r)).unwrap();
        assert!(max_abs_diff(&q.matrix, &(ones(2) * (2.0 * r).sinh().powi(2))) < 1e-12);
        assert_eq!(q.convention, Convention::NumberCovariance);

        let sq = apply_map(&vacuum_state(1).unwrap(), &single_mode_squeezer(r)).unwrap();
        assert_relative_eq!(qfim_pure_phase(&sq).unwrap().matrix[(0, 0)], (4.0 * r).cosh() - 1.0, epsilon = 1e-12);

        let vac = qfim_pure_phase(&vacuum_state(3).unwrap()).unwrap();
        assert!(vac.matrix.amax() < 1e-15);

        let coh = displace(&vacuum_state(1).unwrap(), &[Complex::new(0.8, 0.3)]).unwrap();
        assert_relative_eq!(qfim_pure_phase(&coh).unwrap().matrix[(0, 0)], 4.0 * 0.73, epsilon = 1e-12);
    }

    #[test]
    fn pure_route_rejects_mixed() {
        let lossy = apply_loss(&two_mode_squeezed(1.0), &[0.7, 0.7]).unwrap();
        assert!(matches!(qfim_pure_phase(&lossy), Err(Error::MixedState(_))));
    }

    #[test]
    fn lossy_general_route_is_rank_one() {
        let lossy = apply_loss(&two_mode_squeezed(1.0), &[0.7, 0.7]).unwrap();
        let q = qfim_phase_family(&lossy, &[0.0, 0.0], DerivativeMethod::Analytic).unwrap();
        assert_eq!(q.convention, Convention::MomentDerivative);
        assert!(q.min_eigenvalue().abs() < 1e-10 * q.max_eigenvalue());
        let k = q.eigenvectors.column(0);
        assert_relative_eq!(k[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
        assert_relative_eq!(k[1], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
        assert!(q.condition_number.unwrap() > 1.0);
    }

    #[test]
    fn general_route_matches_closed_form_entry() {
        for &(r, eta) in &[(0.5, 0.3), (1.0, 0.6), (0.25, 0.9), (1.2, 1.0)] {
            let lossy = apply_loss(&two_mode_squeezed(r), &[eta, eta]).unwrap();
            let q = qfim_phase_family(&lossy, &[0.2, -0.4], DerivativeMethod::Analytic).unwrap();
            let closed = qfim_two_mode_lossy_closed_form(r, eta).unwrap();
            assert!(max_abs_diff(&q.matrix, &closed.matrix) < 1e-9 * closed.matrix.amax());
        }
    }

    #[test]
    fn finite_difference_agrees_with_analytic() {
        let probe = displace(
            &apply_loss(&two_mode_squeezed(0.8), &[0.6, 0.9]).unwrap(),
            &[Complex::new(0.5, 0.1), Complex::new(-0.3, 0.7)],
        )
        .unwrap();
        let theta = [0.3, -1.2];
        let a = qfim_phase_family(&probe, &theta, DerivativeMethod::Analytic).unwrap();
        let f = qfim_phase_family(&probe, &theta, DerivativeMethod::FiniteDifference { step: DEFAULT_STEP })
            .unwrap();
        assert!(max_abs_diff(&a.matrix, &f.matrix) < 1e-6 * a.matrix.amax());
    }

    #[test]
    fn closed_form_two_mode_examples() {
        let q = qfim_two_mode_lossy_closed_form(1.0, 1.0).unwrap();
        assert_relative_eq!(q.matrix[(0, 1)], 26.30825, epsilon = 5e-5);
        let (r, eta) = (0.9f64, 0.45);
        let q = qfim_two_mode_lossy_closed_form(r, eta).unwrap();
        let expect = 4.0 * eta * eta * (2.0 * r).sinh().powi(2) / (1.0 + 4.0 * (1.0 - eta) * eta * r.sinh().powi(2));
        assert!(q.eigenvalues[0].abs() < 1e-12);
        assert_relative_eq!(q.eigenvalues[1], expect, epsilon = 1e-12);
        assert_eq!(qfim_two_mode_lossy_closed_form(0.0, 0.5).unwrap().matrix, DMatrix::zeros(2, 2));
        assert!(qfim_two_mode_lossy_closed_form(1.0, 0.0).is_err());
    }

    #[test]
    fn tree_spectrum_examples() {
        let sp = tree_spectrum_closed_form(2, 1.0).unwrap();
        let expect = [0.0, 2.762196, 2.762196, 13.154115];
        for (v, e) in sp.values.iter().zip(expect) {
            assert!((v - e).abs() < 5e-6);
        }
        let z = sp.zero_vector();
        assert_eq!(z.as_slice(), &[0.5, 0.5, -0.5, -0.5]);
        assert!(tree_spectrum_closed_form(3, 0.0).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(tree_spectrum_closed_form(1, 1.0).is_err());
    }

    #[test]
    fn tree_routes_agree() {
        let t = qfim_tree(2, 1.0).unwrap();
        let sp = tree_spectrum_closed_form(2, 1.0).unwrap();
        assert_relative_eq!(t.direct.matrix[(0, 0)], 4.669627, epsilon = 1e-6);
        assert_relative_eq!(t.direct.matrix[(0, 3)], sp.lambda_plus / 4.0, epsilon = 1e-12);
        for (a, b) in t.direct.eigenvalues.iter().zip(&sp.values) {
            assert!((a - b).abs() < 1e-10 * sp.lambda_plus);
        }
        assert!(t.direct.reconstruction_error() < 1e-9);
        for n in 2..=5 {
            assert!(qfim_tree(n, 0.9).is_ok());
        }
    }

    #[test]
    fn photon_statistics() {
        let st = mean_photon_stats(2, 1.0).unwrap();
        assert_relative_eq!(st.mean_photons_per_mode, 1f64.sinh().powi(2) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(st.enhancement, 2.0 * 1f64.sinh().powi(2) + 2.0, epsilon = 1e-12);
        for n in 2..=6 {
            let st = mean_photon_stats(n, 0.8).unwrap();
            let sp = tree_spectrum_closed_form(n, 0.8).unwrap();
            assert_relative_eq!(st.lambda_snl, sp.lambda_perp, max_relative = 1e-12);
            assert_relative_eq!(st.lambda_max, sp.lambda_plus, max_relative = 1e-12);
            let nbar = st.total_photons;
            let alt = nbar * nbar / 2f64.powi(n as i32 - 2) + 8.0 * nbar / 2f64.powi(n as i32);
            assert_relative_eq!(st.lambda_max, alt, max_relative = 1e-12);
        }
        assert_eq!(mean_photon_stats(3, 0.0).unwrap().enhancement, 2.0);
    }

    #[test]
    fn heisenberg_ratio_approaches_one() {
        let ratios: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0]
            .iter()
            .map(|&r| {
                let st = mean_photon_stats(4, r).unwrap();
                st.lambda_max * 4.0 / st.total_photons.powi(2)
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0] && w[1] > 1.0));
        assert!(ratios[3] - 1.0 < 5e-3);
    }

    #[test]
    fn pure_limit_ratio_is_two() {
        let s = two_mode_squeezed(0.6);
        let moment = qfim_phase_family(&s, &[0.0, 0.0], DerivativeMethod::Analytic).unwrap();
        let pure = qfim_pure_phase(&s).unwrap();
        assert_relative_eq!(moment.matrix[(0, 1)] / pure.matrix[(0, 1)], 2.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn qfim_is_theta_independent(n in 1u32..=3, r in 0.05..1.5f64, seed in proptest::collection::vec(-3.0..3.0f64, 8)) {
            let tree = tree_covariance_closed_form(&TreeSpec::new(n, r).unwrap());
            let m = tree.num_modes();
            let q0 = qfim_pure_phase(&tree).unwrap();
            let q1 = qfim_pure_phase(&encode_phases(&tree, &seed[..m]).unwrap()).unwrap();
            prop_assert!(max_abs_diff(&q0.matrix, &q1.matrix) < 1e-10 * q0.matrix.amax().max(1.0));
        }

        #[test]
        fn qfim_is_psd(r in -1.5..1.5f64, eta in 0.05..1.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64) {
            let s = displace(&two_mode_squeezed(r), &[Complex::new(a, b), Complex::new(b, -a)]).unwrap();
            let q = qfim_pure_phase(&s).unwrap();
            prop_assert!(q.min_eigenvalue() >= -1e-9);
            prop_assert!(q.reconstruction_error() < 1e-9);
            let lossy = apply_loss(&s, &[eta, eta]).unwrap();
            let g = qfim_phase_family(&lossy, &[a, b], DerivativeMethod::Analytic).unwrap();
            prop_assert!(g.min_eigenvalue() >= -1e-9 * g.max_eigenvalue().max(1.0));
        }
    }
}
