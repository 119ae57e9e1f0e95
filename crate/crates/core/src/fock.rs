//! Brute-force checks in a truncated Fock basis, and the three-qubit
//! warm-up examples with exact rational arithmetic.
//!
//! Basis index of `|n_0, ..., n_{m-1}>` is `sum_k n_k d^(m-1-k)` with
//! `d = n_max + 1`, so mode 0 is the most significant digit.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use num_rational::Ratio;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const MAX_MODES: usize = 4;
/// Probability floor in the mixed-state QFI sum.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FockData {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: usize,
    n_max: usize,
    data: FockData,
    /// Probability discarded by the truncation.
    pub tail_mass: f64,
}

fn check_shape(modes: usize, n_max: usize) -> Result<()> {
    if modes == 0 || modes > MAX_MODES {
        return Err(Error::Fock(format!("mode count {modes} outside 1..={MAX_MODES}")));
    }
    if n_max == 0 {
        return Err(Error::Fock("truncation n_max must be at least 1".into()));
    }
    Ok(())
}

impl FockState {
    pub fn pure(modes: usize, n_max: usize, psi: DVector<C64>, tail_mass: f64) -> Result<Self> {
        check_shape(modes, n_max)?;
        let dim = (n_max + 1).pow(modes as u32);
        if psi.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: psi.len() });
        }
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Fock("zero state vector".into()));
        }
        Ok(Self { modes, n_max, data: FockData::Pure(psi / C64::new(norm, 0.0)), tail_mass })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1).pow(self.modes as u32)
    }

    pub fn data(&self) -> &FockData {
        &self.data
    }

    /// Occupation of `mode` in basis state `index`.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        let d = self.n_max + 1;
        (index / d.pow((self.modes - 1 - mode) as u32)) % d
    }

    pub fn density(&self) -> DMatrix<C64> {
        match &self.data {
            FockData::Pure(psi) => psi * psi.adjoint(),
            FockData::Mixed(rho) => rho.clone(),
        }
    }

    pub fn to_mixed(&self) -> Self {
        Self { data: FockData::Mixed(self.density()), ..self.clone() }
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            FockData::Pure(psi) => psi.norm_squared(),
            FockData::Mixed(rho) => rho.trace().re,
        }
    }

    fn populations(&self) -> Vec<f64> {
        match &self.data {
            FockData::Pure(psi) => psi.iter().map(|a| a.norm_sqr()).collect(),
            FockData::Mixed(rho) => (0..rho.nrows()).map(|i| rho[(i, i)].re).collect(),
        }
    }

    pub fn mean_photons(&self) -> Vec<f64> {
        let pop = self.populations();
        (0..self.modes)
            .map(|k| pop.iter().enumerate().map(|(i, p)| p * self.occupation(i, k) as f64).sum())
            .collect()
    }

    /// `4 cov(n_mu, n_nu)` from the Fock populations.
    pub fn number_covariance_x4(&self) -> DMatrix<f64> {
        let pop = self.populations();
        let m = self.modes;
        let mean = self.mean_photons();
        DMatrix::from_fn(m, m, |a, b| {
            let second: f64 = pop
                .iter()
                .enumerate()
                .map(|(i, p)| p * (self.occupation(i, a) * self.occupation(i, b)) as f64)
                .sum();
            4.0 * (second - mean[a] * mean[b])
        })
    }
}

/// Two-mode squeezed vacuum `sum_n tanh^n r / cosh r |n, n>`, renormalised.
pub fn tmss_fock(r: f64, n_max: usize) -> Result<FockState> {
    check_shape(2, n_max)?;
    let d = n_max + 1;
    let t = r.tanh();
    let mut psi = DVector::zeros(d * d);
    for n in 0..d {
        psi[n * d + n] = C64::new(t.powi(n as i32) / r.cosh(), 0.0);
    }
    FockState::pure(2, n_max, psi, (t * t).powi(d as i32))
}

/// Single-mode coherent state.
pub fn coherent_fock(alpha: C64, n_max: usize) -> Result<FockState> {
    check_shape(1, n_max)?;
    let mut psi = DVector::zeros(n_max + 1);
    let mut amp = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    let mut kept = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        psi[n] = amp;
        kept += amp.norm_sqr();
    }
    FockState::pure(1, n_max, psi, (1.0 - kept).max(0.0))
}

/// Single-mode squeezed vacuum; only even photon numbers appear.
pub fn squeezed_vacuum_fock(r: f64, n_max: usize) -> Result<FockState> {
    check_shape(1, n_max)?;
    let mut psi = DVector::zeros(n_max + 1);
    let t = -r.tanh();
    let mut amp = 1.0 / r.cosh().sqrt();
    let mut kept = 0.0;
    for k in 0..=n_max / 2 {
        if k > 0 {
            // ratio of sqrt((2k)!)/(2^k k!) between k and k-1
            amp *= t * (((2 * k - 1) * (2 * k)) as f64).sqrt() / (2 * k) as f64;
        }
        psi[2 * k] = C64::new(amp, 0.0);
        kept += amp * amp;
    }
    FockState::pure(1, n_max, psi, (1.0 - kept).max(0.0))
}

/// Tensor product of two pure states with the same truncation.
pub fn tensor_fock(a: &FockState, b: &FockState) -> Result<FockState> {
    if a.n_max != b.n_max {
        return Err(Error::Fock("tensor factors need the same truncation".into()));
    }
    match (&a.data, &b.data) {
        (FockData::Pure(x), FockData::Pure(y)) => {
            let psi = x.kronecker(y);
            FockState::pure(a.modes + b.modes, a.n_max, psi, a.tail_mass + b.tail_mass)
        }
        _ => Err(Error::Fock("tensor product implemented for pure states only".into())),
    }
}

fn binomial_weights(n_max: usize, eta: f64) -> Vec<Vec<f64>> {
    // w[m][k] = sqrt(C(m,k) eta^(m-k) (1-eta)^k)
    let mut w = vec![vec![0.0; n_max + 1]; n_max + 1];
    for (m, row) in w.iter_mut().enumerate() {
        let mut c = 1.0f64;
        for k in 0..=m {
            if k > 0 {
                c *= (m - k + 1) as f64 / k as f64;
            }
            row[k] = (c * eta.powi((m - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt();
        }
    }
    w
}

/// Pure-loss channel with per-mode transmissivity via damping Kraus operators.
pub fn apply_loss_fock(state: &FockState, eta: &[f64]) -> Result<FockState> {
    if eta.len() != state.modes {
        return Err(Error::LengthMismatch { expected: state.modes, got: eta.len() });
    }
    if let Some(&bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::Transmissivity(bad));
    }
    let d = state.n_max + 1;
    let dim = state.dim();
    let mut rho = state.density();
    for (mode, &e) in eta.iter().enumerate() {
        if e == 1.0 {
            continue;
        }
        let w = binomial_weights(state.n_max, e);
        let stride = d.pow((state.modes - 1 - mode) as u32);
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        for j in 0..dim {
            let mj = (j / stride) % d;
            for i in 0..dim {
                let v = rho[(i, j)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let mi = (i / stride) % d;
                for k in 0..=mi.min(mj) {
                    out[(i - k * stride, j - k * stride)] += v * (w[mi][k] * w[mj][k]);
                }
            }
        }
        rho = out;
    }
    Ok(FockState { data: FockData::Mixed(rho), ..state.clone() })
}

/// `4 cov(n)` of a pure state.
pub fn qfim_fock_pure(state: &FockState) -> Result<DMatrix<f64>> {
    match state.data {
        FockData::Pure(_) => Ok(state.number_covariance_x4()),
        FockData::Mixed(_) => Err(Error::Fock("pure-state QFIm requested for a density matrix".into())),
    }
}

/// Groups basis indices into the connected components of the nonzero
/// pattern of `rho`.
fn connected_blocks(rho: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = rho.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..j {
            if rho[(i, j)] != C64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Exact QFIm for phase generators `n_mu` on a density matrix:
/// `sum_{p_a + p_b > eps} 2 (p_a - p_b)^2 / (p_a + p_b) Re[<a|n_mu|b><b|n_nu|a>]`.
///
/// The number operators are diagonal in the Fock basis, so the sum splits over
/// connected blocks of `rho`.
pub fn qfim_fock_mixed(state: &FockState) -> Result<DMatrix<f64>> {
    let rho = state.density();
    let m = state.modes;
    let mut q = DMatrix::<f64>::zeros(m, m);
    for block in connected_blocks(&rho) {
        let k = block.len();
        let sub = DMatrix::from_fn(k, k, |a, b| rho[(block[a], block[b])]);
        let eig = SymmetricEigen::new(sub);
        let p = eig.eigenvalues;
        let u = eig.eigenvectors;
        // generator matrices in the eigenbasis
        let gens: Vec<DMatrix<C64>> = (0..m)
            .map(|mu| {
                let diag = DVector::from_iterator(
                    k,
                    block.iter().map(|&i| C64::new(state.occupation(i, mu) as f64, 0.0)),
                );
                u.adjoint() * DMatrix::from_diagonal(&diag) * &u
            })
            .collect();
        for a in 0..k {
            for b in 0..k {
                let s = p[a] + p[b];
                if s <= EIGEN_FLOOR {
                    continue;
                }
                let wgt = 2.0 * (p[a] - p[b]).powi(2) / s;
                if wgt == 0.0 {
                    continue;
                }
                for mu in 0..m {
                    for nu in 0..m {
                        q[(mu, nu)] += wgt * (gens[mu][(a, b)] * gens[nu][(b, a)]).re;
                    }
                }
            }
        }
    }
    Ok(q)
}

/// Exact rational 3-qubit QFIm under `U = |0><0| + e^{i theta} |1><1|` on
/// each qubit, together with the privacy of the average phase.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitCase {
    pub q: Vec<Vec<Ratio<i64>>>,
    pub privacy: Ratio<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitWarmups {
    pub ghz: QubitCase,
    pub w: QubitCase,
    pub plus: QubitCase,
}

/// `4 cov(n_mu, n_nu)` from a distribution over computational basis strings.
fn exact_number_qfim(qubits: usize, dist: &[(usize, Ratio<i64>)]) -> QubitCase {
    let bit = |s: usize, k: usize| Ratio::from_integer(((s >> (qubits - 1 - k)) & 1) as i64);
    let mean: Vec<Ratio<i64>> =
        (0..qubits).map(|k| dist.iter().map(|(s, p)| p * bit(*s, k)).sum()).collect();
    let q: Vec<Vec<Ratio<i64>>> = (0..qubits)
        .map(|a| {
            (0..qubits)
                .map(|b| {
                    let second: Ratio<i64> = dist.iter().map(|(s, p)| p * bit(*s, a) * bit(*s, b)).sum();
                    Ratio::from_integer(4) * (second - mean[a] * mean[b])
                })
                .collect()
        })
        .collect();
    let total: Ratio<i64> = q.iter().flatten().sum();
    let trace: Ratio<i64> = (0..qubits).map(|k| q[k][k]).sum();
    // v = 1/sqrt(n): v^T Q v = (sum of entries) / n
    let privacy = total / Ratio::from_integer(qubits as i64) / trace;
    QubitCase { q, privacy }
}

pub fn qubit_warmups() -> QubitWarmups {
    let half = Ratio::new(1, 2);
    let third = Ratio::new(1, 3);
    let eighth = Ratio::new(1, 8);
    QubitWarmups {
        ghz: exact_number_qfim(3, &[(0b000, half), (0b111, half)]),
        w: exact_number_qfim(3, &[(0b001, third), (0b010, third), (0b100, third)]),
        plus: exact_number_qfim(3, &(0..8).map(|s| (s, eighth)).collect::<Vec<_>>()),
    }
}

/// Floating-point pure-state QFIm `4 Re[<d_mu psi|d_nu psi> - <d_mu psi|psi><psi|d_nu psi>]`
/// for qubit amplitudes, with `d_mu psi = i n_mu psi`.
pub fn qubit_qfim_from_amplitudes(qubits: usize, amps: &[C64]) -> Result<DMatrix<f64>> {
    if amps.len() != 1 << qubits {
        return Err(Error::LengthMismatch { expected: 1 << qubits, got: amps.len() });
    }
    let i = C64::new(0.0, 1.0);
    let deriv: Vec<Vec<C64>> = (0..qubits)
        .map(|k| {
            amps.iter()
                .enumerate()
                .map(|(s, a)| i * a * (((s >> (qubits - 1 - k)) & 1) as f64))
                .collect()
        })
        .collect();
    let inner = |x: &[C64], y: &[C64]| -> C64 { x.iter().zip(y).map(|(a, b)| a.conj() * b).sum() };
    Ok(DMatrix::from_fn(qubits, qubits, |a, b| {
        let t = inner(&deriv[a], &deriv[b]) - inner(&deriv[a], amps) * inner(amps, &deriv[b]);
        4.0 * t.re
    }))
}
