//! Gaussian states, symplectic maps and the pure-loss channel.
//!
//! Quadratures are interleaved `(x1, p1, ..., xM, pM)` with `hbar = 1`, so the
//! vacuum has covariance `I/2`. Covariances are the symmetrised central second
//! moments.

use nalgebra::{Complex, DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, max_asymmetry, omega};

/// Tolerance on covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance on symplectic eigenvalues against the vacuum value `1/2`.
pub const PHYSICAL_TOL: f64 = 1e-9;
/// Tolerance on `F Omega F^T = Omega`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state after checking dimensions, symmetry and the uncertainty
    /// principle.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 {
            return Err(Error::NoModes);
        }
        if dim % 2 != 0 || cov.ncols() != dim {
            return Err(Error::LengthMismatch { expected: 2 * (dim / 2 + 1), got: dim });
        }
        if mean.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: mean.len() });
        }
        let state = Self { modes: dim / 2, mean, cov };
        state.validate()?;
        Ok(state)
    }

    /// Wraps moments produced by exact symplectic algebra without re-checking.
    pub(crate) fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        debug_assert_eq!(mean.len(), cov.nrows());
        Self { modes: cov.nrows() / 2, mean, cov }
    }

    pub fn num_modes(&self) -> usize {
        self.modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn validate(&self) -> Result<()> {
        let asym = max_asymmetry(&self.cov);
        if asym > SYMMETRY_TOL * self.cov.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let nu = self.symplectic_eigenvalues()?;
        if nu[0] < 0.5 - PHYSICAL_TOL {
            return Err(Error::Unphysical(nu[0]));
        }
        Ok(())
    }

    /// Symplectic eigenvalues in ascending order, one per mode.
    ///
    /// These are the moduli of the eigenvalues of `Omega sigma`, which come in
    /// pairs `+-i nu`.
    pub fn symplectic_eigenvalues(&self) -> Result<DVector<f64>> {
        let asym = max_asymmetry(&self.cov);
        if asym > SYMMETRY_TOL * self.cov.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let a = omega(self.modes) * &self.cov;
        let mut mags: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        mags.sort_by(f64::total_cmp);
        Ok(DVector::from_iterator(
            self.modes,
            mags.chunks(2).map(|p| 0.5 * (p[0] + p[1])),
        ))
    }

    /// True when every symplectic eigenvalue equals `1/2` within `tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        match self.symplectic_eigenvalues() {
            Ok(nu) => nu.iter().all(|v| (v - 0.5).abs() <= tol),
            Err(_) => false,
        }
    }

    /// Mean photon number of each mode, `(<x^2> + <p^2> - 1) / 2`.
    pub fn mean_photon_numbers(&self) -> Vec<f64> {
        (0..self.modes)
            .map(|k| {
                let (x, p) = (2 * k, 2 * k + 1);
                0.5 * (self.cov[(x, x)] + self.cov[(p, p)] + self.mean[x].powi(2) + self.mean[p].powi(2))
                    - 0.5
            })
            .collect()
    }
}

/// A Gaussian unitary `z -> F z + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMap {
    matrix: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl SymplecticMap {
    pub fn new(matrix: DMatrix<f64>, displacement: DVector<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 {
            return Err(Error::NoModes);
        }
        if dim % 2 != 0 || matrix.ncols() != dim {
            return Err(Error::LengthMismatch { expected: dim + dim % 2, got: matrix.ncols() });
        }
        if displacement.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: displacement.len() });
        }
        let map = Self { matrix, displacement };
        let dev = map.symplectic_deviation();
        if dev > SYMPLECTIC_TOL {
            return Err(Error::NotSymplectic(dev));
        }
        Ok(map)
    }

    pub(crate) fn linear(matrix: DMatrix<f64>) -> Self {
        let dim = matrix.nrows();
        Self { matrix, displacement: DVector::zeros(dim) }
    }

    pub fn identity(modes: usize) -> Self {
        Self::linear(DMatrix::identity(2 * modes, 2 * modes))
    }

    pub fn num_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    /// Largest entry of `F Omega F^T - Omega`.
    pub fn symplectic_deviation(&self) -> f64 {
        let om = omega(self.num_modes());
        max_abs_diff(&(&self.matrix * &om * self.matrix.transpose()), &om)
    }

    /// Lifts this map onto modes `first..first + self.num_modes()` of a
    /// `total`-mode system.
    pub fn embed(&self, first: usize, total: usize) -> Result<Self> {
        let k = self.num_modes();
        if first + k > total {
            return Err(Error::ModeOutOfRange { index: first + k - 1, modes: total });
        }
        let mut f = DMatrix::identity(2 * total, 2 * total);
        f.view_mut((2 * first, 2 * first), (2 * k, 2 * k)).copy_from(&self.matrix);
        let mut d = DVector::zeros(2 * total);
        d.rows_mut(2 * first, 2 * k).copy_from(&self.displacement);
        Ok(Self { matrix: f, displacement: d })
    }
}

fn check_mode(index: usize, modes: usize) -> Result<()> {
    if index >= modes {
        return Err(Error::ModeOutOfRange { index, modes });
    }
    Ok(())
}

pub fn vacuum_state(modes: usize) -> Result<GaussianState> {
    if modes == 0 {
        return Err(Error::NoModes);
    }
    Ok(GaussianState::from_parts(
        DVector::zeros(2 * modes),
        DMatrix::identity(2 * modes, 2 * modes) * 0.5,
    ))
}

/// Two-mode squeezed vacuum with squeezing `r`.
pub fn two_mode_squeezed(r: f64) -> GaussianState {
    let c = (2.0 * r).cosh() / 2.0;
    let s = (2.0 * r).sinh() / 2.0;
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, -s, 0.0,
        0.0, c, 0.0, s,
        -s, 0.0, c, 0.0,
        0.0, s, 0.0, c,
    ]);
    GaussianState::from_parts(DVector::zeros(4), cov)
}

/// Single-mode squeezer `diag(e^-r, e^r)`; positive `r` squeezes `x`.
pub fn single_mode_squeezer(r: f64) -> SymplecticMap {
    SymplecticMap::linear(DMatrix::from_diagonal(&DVector::from_vec(vec![(-r).exp(), r.exp()])))
}

/// Balanced beam splitter `(z_i, z_j) -> ((z_i + z_j)/sqrt2, (z_i - z_j)/sqrt2)`.
pub fn beam_splitter_balanced(i: usize, j: usize, modes: usize) -> Result<SymplecticMap> {
    check_mode(i, modes)?;
    check_mode(j, modes)?;
    if i == j {
        return Err(Error::SameMode(i));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut f = DMatrix::identity(2 * modes, 2 * modes);
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        f[(a, a)] = h;
        f[(a, b)] = h;
        f[(b, a)] = h;
        f[(b, b)] = -h;
    }
    Ok(SymplecticMap::linear(f))
}

/// Per-mode rotation `[[cos t, sin t], [-sin t, cos t]]`.
pub fn phase_shift(theta: &[f64]) -> Result<SymplecticMap> {
    if theta.is_empty() {
        return Err(Error::NoModes);
    }
    let m = theta.len();
    let mut f = DMatrix::zeros(2 * m, 2 * m);
    for (k, t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        f.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&Matrix2::new(c, s, -s, c));
    }
    Ok(SymplecticMap::linear(f))
}

/// Controlled-phase shear `p_i += g x_j`, `p_j += g x_i`.
pub fn cz_gate(i: usize, j: usize, g: f64, modes: usize) -> Result<SymplecticMap> {
    check_mode(i, modes).map_err(|_| Error::InvalidEdge(i, j))?;
    check_mode(j, modes).map_err(|_| Error::InvalidEdge(i, j))?;
    if i == j {
        return Err(Error::InvalidEdge(i, j));
    }
    let mut f = DMatrix::identity(2 * modes, 2 * modes);
    f[(2 * i + 1, 2 * j)] = g;
    f[(2 * j + 1, 2 * i)] = g;
    Ok(SymplecticMap::linear(f))
}

/// Shifts `<x_j>` by `sqrt2 Re a_j` and `<p_j>` by `sqrt2 Im a_j`.
pub fn displace(state: &GaussianState, alpha: &[Complex<f64>]) -> Result<GaussianState> {
    if alpha.len() != state.modes {
        return Err(Error::LengthMismatch { expected: state.modes, got: alpha.len() });
    }
    let mut mean = state.mean.clone();
    for (k, a) in alpha.iter().enumerate() {
        mean[2 * k] += std::f64::consts::SQRT_2 * a.re;
        mean[2 * k + 1] += std::f64::consts::SQRT_2 * a.im;
    }
    Ok(GaussianState::from_parts(mean, state.cov.clone()))
}

/// Pure-loss channel with per-mode transmissivity.
pub fn apply_loss(state: &GaussianState, eta: &[f64]) -> Result<GaussianState> {
    if eta.len() != state.modes {
        return Err(Error::LengthMismatch { expected: state.modes, got: eta.len() });
    }
    if let Some(&bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::Transmissivity(bad));
    }
    let x = DVector::from_iterator(2 * state.modes, eta.iter().flat_map(|e| [e.sqrt(); 2]));
    let y = DVector::from_iterator(2 * state.modes, eta.iter().flat_map(|e| [(1.0 - e) / 2.0; 2]));
    let mut cov = state.cov.clone();
    for i in 0..cov.nrows() {
        for j in 0..cov.ncols() {
            cov[(i, j)] *= x[i] * x[j];
        }
        cov[(i, i)] += y[i];
    }
    let mean = state.mean.component_mul(&x);
    Ok(GaussianState::from_parts(mean, cov))
}

pub fn apply_map(state: &GaussianState, map: &SymplecticMap) -> Result<GaussianState> {
    if map.num_modes() != state.modes {
        return Err(Error::LengthMismatch { expected: state.modes, got: map.num_modes() });
    }
    let f = &map.matrix;
    let cov = f * &state.cov * f.transpose();
    let mean = f * &state.mean + &map.displacement;
    Ok(GaussianState::from_parts(mean, cov))
}

/// Applies a map on the contiguous modes starting at `first`.
pub fn apply_local(state: &GaussianState, map: &SymplecticMap, first: usize) -> Result<GaussianState> {
    apply_map(state, &map.embed(first, state.modes)?)
}

/// The map that applies `b` first and then `a`.
pub fn compose(a: &SymplecticMap, b: &SymplecticMap) -> Result<SymplecticMap> {
    if a.num_modes() != b.num_modes() {
        return Err(Error::LengthMismatch { expected: a.num_modes(), got: b.num_modes() });
    }
    Ok(SymplecticMap {
        matrix: &a.matrix * &b.matrix,
        displacement: &a.matrix * &b.displacement + &a.displacement,
    })
}

pub fn tensor(a: &GaussianState, b: &GaussianState) -> GaussianState {
    let (da, db) = (2 * a.modes, 2 * b.modes);
    let mut cov = DMatrix::zeros(da + db, da + db);
    cov.view_mut((0, 0), (da, da)).copy_from(&a.cov);
    cov.view_mut((da, da), (db, db)).copy_from(&b.cov);
    let mean = DVector::from_iterator(da + db, a.mean.iter().chain(b.mean.iter()).copied());
    GaussianState::from_parts(mean, cov)
}

/// Reorders modes so that new mode `k` is old mode `perm[k]`.
pub fn permute_modes(state: &GaussianState, perm: &[usize]) -> Result<GaussianState> {
    let m = state.modes;
    if perm.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: perm.len() });
    }
    let mut seen = vec![false; m];
    for &p in perm {
        check_mode(p, m)?;
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::Domain(format!("mode {p} appears twice in permutation")));
        }
    }
    let idx: Vec<usize> = perm.iter().flat_map(|&p| [2 * p, 2 * p + 1]).collect();
    let mean = DVector::from_iterator(2 * m, idx.iter().map(|&i| state.mean[i]));
    let cov = DMatrix::from_fn(2 * m, 2 * m, |a, b| state.cov[(idx[a], idx[b])]);
    Ok(GaussianState::from_parts(mean, cov))
}

/// Permutation matrix `P` with `z_interleaved = P z_block`, where the block
/// ordering is `(x1, ..., xM, p1, ..., pM)`.
pub fn block_to_interleaved(modes: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        p[(2 * j, j)] = 1.0;
        p[(2 * j + 1, modes + j)] = 1.0;
    }
    p
}

/// Splits an interleaved covariance into its `x-x` and `p-p` blocks.
pub fn quadrature_blocks(cov: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = cov.nrows() / 2;
    (
        DMatrix::from_fn(m, m, |j, k| cov[(2 * j, 2 * k)]),
        DMatrix::from_fn(m, m, |j, k| cov[(2 * j + 1, 2 * k + 1)]),
    )
}
