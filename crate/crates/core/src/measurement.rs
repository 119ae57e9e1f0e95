//! Homodyne readout, classical Fisher information and Monte-Carlo simulation
//! of the two-party estimation protocol.
//!
//! The two-mode scheme mixes the encoded lossy two-mode squeezed vacuum on a
//! balanced beam splitter, then reads `x_phi` on mode 0 and `p_phi` on mode 1,
//! with `x_phi = cos(phi) x + sin(phi) p` and `p_phi = -sin(phi) x + cos(phi) p`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fisher::{phase_derivatives, two_mode_lossy_entry};
use crate::linalg::spd_inverse;
use crate::network::encode_phases;
use crate::optimize::golden_section_max;
use crate::phase_space::{
    apply_loss, beam_splitter_balanced, compose, two_mode_squeezed, GaussianState,
    SymplecticMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// `cos(phi) x + sin(phi) p`
    X,
    /// `-sin(phi) x + cos(phi) p`
    P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneSpec {
    pub angles: Vec<f64>,
    pub quadratures: Vec<Quadrature>,
    /// Balanced splitters applied in order before the readout.
    pub beam_splitters: Vec<(usize, usize)>,
}

impl HomodyneSpec {
    pub fn validate(&self, modes: usize) -> Result<()> {
        if self.angles.len() != modes {
            return Err(Error::LengthMismatch { expected: modes, got: self.angles.len() });
        }
        if self.quadratures.len() != modes {
            return Err(Error::LengthMismatch { expected: modes, got: self.quadratures.len() });
        }
        if let Some(a) = self.angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::Domain(format!("homodyne angle {a} is not finite")));
        }
        for &(i, j) in &self.beam_splitters {
            beam_splitter_balanced(i, j, modes)?;
        }
        Ok(())
    }

    pub fn pre_map(&self, modes: usize) -> Result<SymplecticMap> {
        let mut map = SymplecticMap::identity(modes);
        for &(i, j) in &self.beam_splitters {
            map = compose(&beam_splitter_balanced(i, j, modes)?, &map)?;
        }
        Ok(map)
    }

    fn unit(&self, k: usize) -> (f64, f64) {
        let (s, c) = self.angles[k].sin_cos();
        match self.quadratures[k] {
            Quadrature::X => (c, s),
            Quadrature::P => (-s, c),
        }
    }

    /// Rows mapping the pre-measurement quadratures onto the recorded ones.
    pub fn readout(&self, modes: usize) -> Result<DMatrix<f64>> {
        self.validate(modes)?;
        let mut rot = DMatrix::zeros(modes, 2 * modes);
        for k in 0..modes {
            let (a, b) = self.unit(k);
            rot[(k, 2 * k)] = a;
            rot[(k, 2 * k + 1)] = b;
        }
        Ok(rot * self.pre_map(modes)?.matrix())
    }

    /// Noise matrix of a general-dyne measurement that approaches this
    /// homodyne as `squeeze -> infinity`, in the frame after the splitters.
    pub fn dyne_noise(&self, modes: usize, squeeze: f64) -> Result<DMatrix<f64>> {
        self.validate(modes)?;
        let mut noise = DMatrix::zeros(2 * modes, 2 * modes);
        let (lo, hi) = (0.5 * (-2.0 * squeeze).exp(), 0.5 * (2.0 * squeeze).exp());
        for k in 0..modes {
            let (a, b) = self.unit(k);
            let u = nalgebra::Vector2::new(a, b);
            let w = nalgebra::Vector2::new(-b, a);
            let block = u * u.transpose() * lo + w * w.transpose() * hi;
            noise.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&block);
        }
        Ok(noise)
    }
}

/// `F = tr{[(S + S_M)^-1 dS]^2} / 2 + dr^T (S + S_M)^-1 dr` for one parameter.
pub fn classical_fisher(
    sigma: &DMatrix<f64>,
    dsigma: &DMatrix<f64>,
    dr: &DVector<f64>,
    sigma_m: Option<&DMatrix<f64>>,
) -> Result<f64> {
    let total = match sigma_m {
        Some(m) => sigma + m,
        None => sigma.clone(),
    };
    let (inv, _) = spd_inverse(&total)?;
    let a = &inv * dsigma;
    Ok(0.5 * (&a * &a).trace() + dr.dot(&(&inv * dr)))
}

fn directional(enc: &GaussianState, direction: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = enc.num_modes();
    if direction.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: direction.len() });
    }
    let (ds, dr) = phase_derivatives(enc);
    let mut s = DMatrix::zeros(2 * m, 2 * m);
    let mut r = DVector::zeros(2 * m);
    for (k, v) in direction.iter().enumerate() {
        s += &ds[k] * *v;
        r += &dr[k] * *v;
    }
    Ok((s, r))
}

/// Classical Fisher information of homodyne outcomes on
/// `encode_phases(probe, theta)` along `direction`, from the exact marginal.
pub fn homodyne_fisher(
    probe: &GaussianState,
    theta: &[f64],
    direction: &[f64],
    spec: &HomodyneSpec,
) -> Result<f64> {
    let enc = encode_phases(probe, theta)?;
    let (ds, dr) = directional(&enc, direction)?;
    let l = spec.readout(enc.num_modes())?;
    let lt = l.transpose();
    classical_fisher(&(&l * enc.cov() * &lt), &(&l * ds * &lt), &(&l * dr), None)
}

/// Same information from the finite-squeezing general-dyne form.
pub fn general_dyne_fisher(
    probe: &GaussianState,
    theta: &[f64],
    direction: &[f64],
    spec: &HomodyneSpec,
    squeeze: f64,
) -> Result<f64> {
    let enc = encode_phases(probe, theta)?;
    let m = enc.num_modes();
    let (ds, dr) = directional(&enc, direction)?;
    let f = spec.pre_map(m)?;
    let ft = f.matrix().transpose();
    let s = f.matrix() * enc.cov() * &ft;
    let d = f.matrix() * ds * &ft;
    classical_fisher(&s, &d, &(f.matrix() * dr), Some(&spec.dyne_noise(m, squeeze)?))
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Transmissivity(eta));
    }
    Ok(())
}

/// `(t1 + t2)/2 + arctan(eta sinh 2r / sqrt(1 + 4 (1 - eta) eta sinh^2 r))`.
pub fn optimal_angle(r: f64, eta: f64, t1: f64, t2: f64) -> Result<f64> {
    check_eta(eta)?;
    let x = eta * (2.0 * r).sinh() / (1.0 + 4.0 * (1.0 - eta) * eta * r.sinh().powi(2)).sqrt();
    Ok(0.5 * (t1 + t2) + x.atan())
}

/// Readout angle `phi` of the two-mode scheme that attains the optimum
/// above. With `a = (t1 + t2)/2` the scheme depends on `phi + a` only, and
/// the best value of `phi + a` is `(optimal_angle - a - pi/2) / 2`.
pub fn quadrature_angle(r: f64, eta: f64, t1: f64, t2: f64) -> Result<f64> {
    let avg = 0.5 * (t1 + t2);
    Ok(-avg + 0.5 * (optimal_angle(r, eta, t1, t2)? - avg - FRAC_PI_2))
}

/// Fisher information of the optimal homodyne readout along the unit average
/// direction: `2 eta^2 sinh^2 2r / (1 + 4 (1 - eta) eta sinh^2 r)`.
pub fn cfi_at_optimal(r: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(two_mode_lossy_entry(r, eta))
}

/// The lossy two-mode probe with its beam-splitter homodyne readout.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeScheme {
    pub r: f64,
    pub eta: f64,
    probe: GaussianState,
    /// Covariance after the splitter at zero phases.
    mixed: Matrix4<f64>,
    /// Extrema in `[0, pi)` of the mode-0 outcome variance as a function of
    /// `psi = phi + (t1 + t2)/2`.
    extrema: Vec<f64>,
}

impl TwoModeScheme {
    pub fn new(r: f64, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        if !r.is_finite() {
            return Err(Error::Squeezing(r));
        }
        let probe = apply_loss(&two_mode_squeezed(r), &[eta, eta])?;
        let bs = beam_splitter_balanced(0, 1, 2)?;
        let m = bs.matrix() * probe.cov() * bs.matrix().transpose();
        let mixed = Matrix4::from_fn(|i, j| m[(i, j)]);
        let mut scheme = Self { r, eta, probe, mixed, extrema: Vec::new() };
        scheme.extrema = scheme.variance_extrema();
        Ok(scheme)
    }

    pub fn probe(&self) -> &GaussianState {
        &self.probe
    }

    pub fn spec(phi: f64) -> HomodyneSpec {
        HomodyneSpec {
            angles: vec![phi, phi],
            quadratures: vec![Quadrature::X, Quadrature::P],
            beam_splitters: vec![(0, 1)],
        }
    }

    /// Fisher information along the unit average direction.
    pub fn fisher_average(&self, theta: [f64; 2], phi: f64) -> Result<f64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        homodyne_fisher(&self.probe, &theta, &[h, h], &Self::spec(phi))
    }

    /// Outcome covariance at phases `theta` and readout angle `phi`.
    pub fn outcome_cov(&self, theta: [f64; 2], phi: f64) -> Result<Matrix2<f64>> {
        let enc = encode_phases(&self.probe, &theta)?;
        let l = Self::spec(phi).readout(2)?;
        let s = &l * enc.cov() * l.transpose();
        Ok(Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]))
    }

    /// Outcome covariance as a function of `psi = phi + (t1 + t2)/2`.
    ///
    /// Equal phase shifts commute with the splitter and add to the readout
    /// angle, so this is all the model depends on.
    pub fn cov_at_psi(&self, psi: f64) -> Matrix2<f64> {
        let (s, c) = psi.sin_cos();
        let u = SMatrix::<f64, 2, 4>::new(c, s, 0.0, 0.0, 0.0, 0.0, -s, c);
        u * self.mixed * u.transpose()
    }

    fn variance_extrema(&self) -> Vec<f64> {
        // The outcome covariance has period pi in psi.
        const GRID: usize = 720;
        let step = PI / GRID as f64;
        let v = |psi: f64| self.cov_at_psi(psi)[(0, 0)];
        let vals: Vec<f64> = (0..=GRID + 1).map(|i| v((i as f64 - 1.0) * step)).collect();
        let mut extrema = Vec::new();
        for i in 1..=GRID {
            let (va, vb, vc) = (vals[i - 1], vals[i], vals[i + 1]);
            let is_max = vb >= va && vb > vc;
            let is_min = vb <= va && vb < vc;
            if is_max || is_min {
                let sign = if is_max { 1.0 } else { -1.0 };
                let b = (i as f64 - 1.0) * step;
                let refined = golden_section_max(|x| Ok(sign * v(x)), b - step, b + step, 1e-12)
                    .map(|m| m.x)
                    .unwrap_or(b);
                extrema.push(refined.rem_euclid(PI));
            }
        }
        extrema.sort_by(f64::total_cmp);
        extrema
    }

    /// Maximal interval of `psi` containing `centre` on which the mode-0
    /// outcome variance is monotone. The likelihood is symmetric about the
    /// ends of this interval, so the average phase is only identifiable inside.
    pub fn monotone_window(&self, centre: f64) -> (f64, f64) {
        if self.extrema.is_empty() {
            return (centre - FRAC_PI_2, centre + FRAC_PI_2);
        }
        let shift = (centre / PI).floor() * PI;
        let mut all: Vec<f64> = (-1..=2)
            .flat_map(|k| self.extrema.iter().map(move |e| e + shift + k as f64 * PI))
            .collect();
        all.sort_by(f64::total_cmp);
        let hi = all.iter().copied().find(|&e| e > centre).unwrap_or(centre + FRAC_PI_2);
        let lo = all.iter().copied().rev().find(|&e| e <= centre).unwrap_or(centre - FRAC_PI_2);
        (lo, hi)
    }
}

/// Negative log-likelihood per shot (up to constants) of zero-mean Gaussian
/// outcomes with second-moment estimate `s`.
fn mean_nll(model: &Matrix2<f64>, s: &Matrix2<f64>) -> f64 {
    let det = model.determinant();
    let inv = model.try_inverse().expect("outcome covariance is positive definite");
    0.5 * (det.ln() + (inv * s).trace())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    /// Draw every shot from the outcome distribution.
    Shots,
    /// Draw the sufficient statistic `sum y y^T` directly from its Wishart
    /// distribution (Bartlett decomposition); needs at least 2 shots.
    Wishart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub r: f64,
    pub eta: f64,
    pub theta: [f64; 2],
    pub shots: u64,
    pub repetitions: usize,
    /// Shots of the fixed-angle pre-run; `None` measures at the angle that is
    /// optimal for zero phases without adapting.
    pub pre_shots: Option<u64>,
    pub seed: u64,
    pub grid_index: u32,
    pub sampler: Sampler,
}

impl ProtocolConfig {
    pub fn new(r: f64, eta: f64, theta: [f64; 2], shots: u64, seed: u64) -> Self {
        Self {
            r,
            eta,
            theta,
            shots,
            repetitions: 200,
            pre_shots: Some(1000),
            seed,
            grid_index: 0,
            sampler: Sampler::Shots,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub truth: f64,
    /// Mean of the per-repetition estimates of the average phase.
    pub estimate: f64,
    pub bias: f64,
    pub standard_error: Option<f64>,
    /// Sample variance of the per-repetition estimates.
    pub variance: Option<f64>,
    /// `variance * shots * F`, with `F` the optimal Fisher information for the
    /// average phase; near 1 for an efficient estimator.
    pub crb_ratio: Option<f64>,
    pub fisher_average_phase: f64,
    pub shots: u64,
    pub repetitions: usize,
    /// Per-repetition estimates in repetition order.
    pub estimates: Vec<f64>,
    /// Per-repetition mean second moments `(s00, s01, s11)`.
    pub statistics: Vec<[f64; 3]>,
}

/// Independent stream for one repetition at one grid point.
pub fn stream_rng(seed: u64, grid_index: u32, rep: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid_index as u64) << 32) | rep as u64);
    rng
}

fn sample_second_moment<R: Rng>(cov: &Matrix2<f64>, n: u64, sampler: Sampler, rng: &mut R) -> Matrix2<f64> {
    let l = cov.cholesky().expect("outcome covariance is positive definite").l();
    let s = match sampler {
        Sampler::Wishart if n >= 2 => {
            let c1: f64 = ChiSquared::new(n as f64).expect("dof > 0").sample(rng);
            let c2: f64 = ChiSquared::new((n - 1) as f64).expect("dof > 0").sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            let a = Matrix2::new(c1.sqrt(), 0.0, z, c2.sqrt());
            l * a * a.transpose() * l.transpose()
        }
        _ => {
            let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let u: f64 = StandardNormal.sample(rng);
                let v: f64 = StandardNormal.sample(rng);
                let y0 = l[(0, 0)] * u;
                let y1 = l[(1, 0)] * u + l[(1, 1)] * v;
                s00 += y0 * y0;
                s01 += y0 * y1;
                s11 += y1 * y1;
            }
            Matrix2::new(s00, s01, s01, s11)
        }
    };
    s / n as f64
}

/// Maximum-likelihood average phase from the mean second moment `s` measured
/// at readout angle `phi`, searched on the identifiable window around `centre`.
fn mle_average_phase(scheme: &TwoModeScheme, s: &Matrix2<f64>, phi: f64, centre: f64) -> f64 {
    let (lo, hi) = scheme.monotone_window(phi + centre);
    let (lo, hi) = (lo - phi, hi - phi);
    let nll = |a: f64| mean_nll(&scheme.cov_at_psi(phi + a), s);
    const GRID: usize = 48;
    let step = (hi - lo) / GRID as f64;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=GRID {
        let a = lo + step * i as f64;
        let v = nll(a);
        if v < best.1 {
            best = (a, v);
        }
    }
    let (a, b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    golden_section_max(|x| Ok(-nll(x)), a, b, 1e-12).map(|m| m.x).unwrap_or(best.0)
}

fn run_once(scheme: &TwoModeScheme, cfg: &ProtocolConfig, rep: u32) -> Result<(f64, [f64; 3])> {
    let mut rng = stream_rng(cfg.seed, cfg.grid_index, rep);
    let centre = match cfg.pre_shots {
        Some(pre) if pre > 0 => {
            let phi0 = quadrature_angle(cfg.r, cfg.eta, 0.0, 0.0)?;
            let cov = scheme.outcome_cov(cfg.theta, phi0)?;
            let s = sample_second_moment(&cov, pre, cfg.sampler, &mut rng);
            mle_average_phase(scheme, &s, phi0, 0.0)
        }
        _ => 0.0,
    };
    let phi = quadrature_angle(cfg.r, cfg.eta, centre, centre)?;
    let cov = scheme.outcome_cov(cfg.theta, phi)?;
    let s = sample_second_moment(&cov, cfg.shots, cfg.sampler, &mut rng);
    Ok((mle_average_phase(scheme, &s, phi, centre), [s[(0, 0)], s[(0, 1)], s[(1, 1)]]))
}

fn mean_and_variance(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = (xs.len() >= 2).then(|| xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0));
    (mean, var)
}

/// Repeats the protocol `repetitions` times and summarises the estimates of
/// the average phase. Results do not depend on the number of worker threads.
pub fn simulate_protocol(cfg: &ProtocolConfig) -> Result<ProtocolReport> {
    if cfg.shots == 0 {
        return Err(Error::NoShots);
    }
    if cfg.repetitions == 0 {
        return Err(Error::Domain("at least one repetition is required".into()));
    }
    let scheme = TwoModeScheme::new(cfg.r, cfg.eta)?;
    let runs: Vec<(f64, [f64; 3])> = (0..cfg.repetitions as u32)
        .into_par_iter()
        .map(|rep| run_once(&scheme, cfg, rep))
        .collect::<Result<_>>()?;
    let estimates: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let statistics: Vec<[f64; 3]> = runs.iter().map(|r| r.1).collect();
    let truth = 0.5 * (cfg.theta[0] + cfg.theta[1]);
    let (estimate, var) = mean_and_variance(&estimates);
    // Fisher information for the average phase itself is twice that along
    // the unit average direction.
    let fisher = 2.0 * cfi_at_optimal(cfg.r, cfg.eta)?;
    let variance = if cfg.shots >= 2 { var } else { None };
    Ok(ProtocolReport {
        truth,
        estimate,
        bias: estimate - truth,
        standard_error: variance.map(|v| (v / cfg.repetitions as f64).sqrt()),
        variance,
        crb_ratio: variance.map(|v| v * cfg.shots as f64 * fisher),
        fisher_average_phase: fisher,
        shots: cfg.shots,
        repetitions: cfg.repetitions,
        estimates,
        statistics,
    })
}

/// Least-squares slope of `y` on `x` and its standard error.
pub fn regression_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Domain("regression needs at least 3 paired points".into()));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("regressor has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    Ok((slope, (rss / (n - 2.0) / sxx).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRegression {
    /// Tested relative phases `(t1 - t2) / 2`.
    pub truths: Vec<f64>,
    /// Slopes of `(s00, s01, s11, estimate)` against the relative phase.
    pub slopes: [f64; 4],
    pub standard_errors: [f64; 4],
    /// Whether every `slope +- z * se` interval contains zero.
    pub no_information: bool,
    /// Homodyne Fisher information along the unit relative direction.
    pub model_fisher: f64,
}

/// Tries to learn the relative phase from the protocol data: runs the
/// protocol at several relative phases with fixed average and regresses every
/// recorded statistic on the truth.
pub fn kernel_direction_regression(
    base: &ProtocolConfig,
    truths: &[f64],
    z: f64,
) -> Result<KernelRegression> {
    let avg = 0.5 * (base.theta[0] + base.theta[1]);
    let mut xs = Vec::new();
    let mut ys: [Vec<f64>; 4] = Default::default();
    for (k, &d) in truths.iter().enumerate() {
        let cfg = ProtocolConfig {
            theta: [avg + d, avg - d],
            grid_index: base.grid_index + 1 + k as u32,
            ..base.clone()
        };
        let rep = simulate_protocol(&cfg)?;
        for (est, st) in rep.estimates.iter().zip(&rep.statistics) {
            xs.push(d);
            ys[0].push(st[0]);
            ys[1].push(st[1]);
            ys[2].push(st[2]);
            ys[3].push(*est);
        }
    }
    let mut slopes = [0.0; 4];
    let mut standard_errors = [0.0; 4];
    for i in 0..4 {
        let (b, se) = regression_slope(&xs, &ys[i])?;
        slopes[i] = b;
        standard_errors[i] = se;
    }
    let no_information = slopes.iter().zip(&standard_errors).all(|(b, se)| b.abs() <= z * se);
    let scheme = TwoModeScheme::new(base.r, base.eta)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi = quadrature_angle(base.r, base.eta, avg, avg)?;
    let model_fisher = homodyne_fisher(scheme.probe(), &base.theta, &[h, -h], &TwoModeScheme::spec(phi))?;
    Ok(KernelRegression { truths: truths.to_vec(), slopes, standard_errors, no_information, model_fisher })
}
