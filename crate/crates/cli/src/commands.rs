//! Subcommand implementations. Each grid point is evaluated independently
//! and rows come back in grid order.

use std::f64::consts::FRAC_1_SQRT_2;

use cvpriv_core::fisher::{
    qfim_phase_family, qfim_pure_phase, tree_spectrum_closed_form, two_mode_lossy_entry, DerivativeMethod,
};
use cvpriv_core::fock::{apply_loss_fock, qfim_fock_mixed, qfim_fock_pure, tmss_fock};
use cvpriv_core::measurement::{
    cfi_at_optimal, optimal_angle, quadrature_angle, simulate_protocol, ProtocolConfig, Sampler,
};
use cvpriv_core::network::{
    build_cluster_state, build_product_squeezed, split_through_tree, ClusterSpec, Edge,
};
use cvpriv_core::optimize::{cluster_privacy, optimal_cluster_coupling};
use cvpriv_core::phase_space::{apply_loss, displace, two_mode_squeezed};
use cvpriv_core::privacy::{
    analyze, average_direction, closed_form_displaced_privacy, closed_form_tree_privacy, privacy_measure,
    KernelTol, PrivacyReport, Regime,
};
use cvpriv_core::{Complex, DVector, Error, GaussianState, QfimResult};
use rayon::prelude::*;

use crate::config::{Channel, Direction, SamplerKind, ScenarioConfig, StateConfig};
use crate::table::{Cell, Table};

/// Coupling used by `compare-states` when neither the state nor the sweep sets one.
pub const DEFAULT_CLUSTER_G: f64 = 0.88;

#[derive(Debug)]
pub enum Failure {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Invariant(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::Depth { .. }
            | Error::Transmissivity(_)
            | Error::LengthMismatch { .. }
            | Error::InvalidEdge(..)
            | Error::ModeOutOfRange { .. }
            | Error::SameMode(_)
            | Error::NoModes
            | Error::Squeezing(_) => Failure::Config(e.to_string()),
            other => Failure::Invariant(vec![other.to_string()]),
        }
    }
}

type Rows = Result<(Vec<Cell>, Vec<String>), Failure>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub depth: Option<u32>,
    pub r: f64,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub g: Option<f64>,
}

/// Cartesian grid in the order depth, r, g, alpha, eta (last varies fastest).
pub fn grid(cfg: &ScenarioConfig) -> Vec<GridPoint> {
    let s = &cfg.sweep;
    let depths: Vec<Option<u32>> = match (&s.depth, &cfg.state) {
        (Some(ds), _) => ds.iter().map(|&d| Some(d)).collect(),
        (None, StateConfig::Tree { depth, .. }) => vec![Some(*depth)],
        _ => vec![None],
    };
    let rs = s.r.clone().unwrap_or_else(|| vec![cfg.state.r()]);
    let gs: Vec<Option<f64>> = match (&s.g, &cfg.state) {
        (Some(gs), _) => gs.iter().map(|&g| Some(g)).collect(),
        (None, StateConfig::Cluster { g, .. }) => vec![Some(*g)],
        _ => vec![None],
    };
    let opt = |axis: &Option<Vec<f64>>| axis.as_ref().map_or(vec![None], |xs| xs.iter().map(|&x| Some(x)).collect());
    let (alphas, etas) = (opt(&s.alpha), opt(&s.eta));
    let mut out = Vec::new();
    for &depth in &depths {
        for &r in &rs {
            for &g in &gs {
                for &alpha in &alphas {
                    for &eta in &etas {
                        out.push(GridPoint { index: out.len(), depth, r, eta, alpha, g });
                    }
                }
            }
        }
    }
    out
}

fn run_grid<F>(points: &[GridPoint], f: F) -> Result<Vec<Vec<Cell>>, Failure>
where
    F: Fn(&GridPoint) -> Rows + Sync,
{
    let results: Vec<Rows> = points.par_iter().map(&f).collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut violations = Vec::new();
    for (p, res) in points.iter().zip(results) {
        match res {
            Ok((row, v)) => {
                rows.push(row);
                violations.extend(v.into_iter().map(|m| format!("grid point {}: {m}", p.index)));
            }
            Err(Failure::Invariant(v)) => {
                violations.extend(v.into_iter().map(|m| format!("grid point {}: {m}", p.index)));
            }
            Err(Failure::Config(m)) => return Err(Failure::Config(format!("grid point {}: {m}", p.index))),
        }
    }
    if violations.is_empty() {
        Ok(rows)
    } else {
        Err(Failure::Invariant(violations))
    }
}

fn has_channels(cfg: &ScenarioConfig, p: &GridPoint) -> bool {
    !cfg.channels.is_empty() || p.alpha.is_some() || p.eta.is_some()
}

/// State at a grid point: input state, channels, sweep displacement and loss,
/// then the splitting network for trees.
pub fn build_state(cfg: &ScenarioConfig, p: &GridPoint) -> Result<GaussianState, Failure> {
    let mut state = match &cfg.state {
        StateConfig::Tree { .. } | StateConfig::TwoMode { .. } => two_mode_squeezed(p.r),
        StateConfig::Product { modes, .. } => build_product_squeezed(*modes, p.r)?,
        StateConfig::Cluster { modes, g, edges, .. } => {
            let g = p.g.unwrap_or(*g);
            let spec = match edges {
                Some(es) => ClusterSpec { modes: *modes, r: p.r, edges: es.iter().map(|&[a, b]| Edge { a, b, g }).collect() },
                None => ClusterSpec::linear_chain(*modes, p.r, g),
            };
            build_cluster_state(&spec)?
        }
    };
    let m = state.num_modes();
    for ch in &cfg.channels {
        state = match ch {
            Channel::Loss { eta } if eta.len() == 1 => apply_loss(&state, &vec![eta[0]; m])?,
            Channel::Loss { eta } => apply_loss(&state, eta)?,
            Channel::Displace { alpha } => {
                displace(&state, &alpha.iter().map(|&[re, im]| Complex::new(re, im)).collect::<Vec<_>>())?
            }
        };
    }
    if let Some(a) = p.alpha {
        let mut alpha = vec![Complex::new(0.0, 0.0); m];
        alpha[0] = Complex::new(a, 0.0);
        state = displace(&state, &alpha)?;
    }
    if let Some(eta) = p.eta {
        state = apply_loss(&state, &vec![eta; m])?;
    }
    if let Some(depth) = p.depth {
        state = split_through_tree(&state, depth - 1)?;
    }
    Ok(state)
}

/// Pure-state formula when the state is pure, the moment-derivative formula otherwise.
pub fn qfim(state: &GaussianState) -> Result<QfimResult, Failure> {
    match qfim_pure_phase(state) {
        Ok(q) => Ok(q),
        Err(Error::MixedState(_)) => {
            Ok(qfim_phase_family(state, &vec![0.0; state.num_modes()], DerivativeMethod::Analytic)?)
        }
        Err(e) => Err(e.into()),
    }
}

fn target(cfg: &ScenarioConfig, m: usize) -> Result<DVector<f64>, Failure> {
    match (cfg.target.direction, &cfg.target.vector) {
        (Direction::Custom, Some(v)) if v.len() == m => Ok(DVector::from_vec(v.clone())),
        (Direction::Custom, Some(v)) => {
            Err(Failure::Config(format!("target.vector has {} entries for {m} modes", v.len())))
        }
        _ => Ok(average_direction(m)),
    }
}

fn generic_checks(q: &QfimResult, report: Option<&PrivacyReport>) -> Vec<String> {
    let mut v = Vec::new();
    let scale = q.max_eigenvalue().abs().max(1.0);
    if q.min_eigenvalue() < -1e-9 * scale {
        v.push(format!("QFIm not positive semidefinite (min eigenvalue {:.3e})", q.min_eigenvalue()));
    }
    if q.reconstruction_error() > 1e-9 * scale {
        v.push(format!("eigendecomposition error {:.3e}", q.reconstruction_error()));
    }
    if let Some(p) = report.and_then(|r| r.p) {
        if !(-1e-12..=1.0 + 1e-12).contains(&p) {
            v.push(format!("privacy {p} outside [0, 1]"));
        }
    }
    v
}

fn opt_int(x: Option<u32>) -> Cell {
    x.map_or(Cell::Missing, Cell::from)
}

pub fn spectrum(cfg: &ScenarioConfig) -> Result<Table, Failure> {
    if !matches!(cfg.state, StateConfig::Tree { .. }) {
        return Err(Failure::Config("spectrum needs a tree state".into()));
    }
    let mut t = Table::new(vec![
        "grid_index", "convention", "depth", "modes", "r", "eta", "alpha", "lambda_min_nonzero", "lambda_max",
        "lambda_max_closed_form", "spectral_gap", "kernel_dim", "regime",
    ]);
    let tol = KernelTol::default();
    let points = grid(cfg);
    t.rows = run_grid(&points, |p| {
        let state = build_state(cfg, p)?;
        let q = qfim(&state)?;
        let m = q.dim();
        let report = analyze(&q, &target(cfg, m)?, tol)?;
        let lmax = q.max_eigenvalue();
        let lmin = q.eigenvalues.iter().copied().find(|&l| l > (tol.rel * lmax).max(tol.floor));
        let depth = p.depth.expect("tree grid has a depth");
        let closed = if depth >= 2 && !has_channels(cfg, p) {
            Some(tree_spectrum_closed_form(depth, p.r)?.lambda_plus)
        } else {
            None
        };
        let mut v = generic_checks(&q, Some(&report));
        if let Some(c) = closed {
            if (lmax - c).abs() > 1e-9 * c.abs() + 1e-12 {
                v.push(format!("lambda_max {lmax} differs from closed form {c}"));
            }
        }
        let row = vec![
            p.index.into(),
            q.convention.tag().into(),
            depth.into(),
            m.into(),
            p.r.into(),
            p.eta.into(),
            p.alpha.into(),
            lmin.into(),
            lmax.into(),
            closed.into(),
            lmin.map(|l| lmax / l).into(),
            report.kernel_dim.into(),
            report.regime.tag().into(),
        ];
        Ok((row, v))
    })?;
    Ok(t)
}

/// Closed-form privacy when the grid point matches a known scenario.
fn known_privacy(cfg: &ScenarioConfig, p: &GridPoint) -> Result<Option<f64>, Failure> {
    if cfg.target.direction != Direction::Average || !cfg.channels.is_empty() || p.r == 0.0 {
        return Ok(None);
    }
    Ok(match (&cfg.state, p.alpha, p.eta) {
        (StateConfig::Tree { .. }, None, None) if p.depth.is_some_and(|d| d >= 2) => {
            Some(closed_form_tree_privacy(p.depth.unwrap_or(2), p.r)?)
        }
        (StateConfig::TwoMode { .. }, alpha, None | Some(1.0)) => {
            Some(closed_form_displaced_privacy(p.r, alpha.unwrap_or(0.0), 0.0)?)
        }
        (StateConfig::TwoMode { .. }, None | Some(0.0), Some(eta)) if eta > 0.0 => Some(1.0),
        (StateConfig::Product { modes, .. }, None, _) => Some(1.0 / *modes as f64),
        _ => None,
    })
}

pub fn privacy_sweep(cfg: &ScenarioConfig) -> Result<Table, Failure> {
    let mut t = Table::new(vec![
        "grid_index", "convention", "state", "modes", "depth", "r", "eta", "alpha", "g", "privacy",
        "privacy_closed_form", "trace_q", "kernel_dim", "near_kernel_dim", "private_modes", "regime",
    ]);
    let tol = KernelTol::default();
    let points = grid(cfg);
    t.rows = run_grid(&points, |p| {
        let state = build_state(cfg, p)?;
        let q = qfim(&state)?;
        let report = analyze(&q, &target(cfg, q.dim())?, tol)?;
        let closed = known_privacy(cfg, p)?;
        let mut v = generic_checks(&q, Some(&report));
        if let (Some(pc), Some(pv)) = (closed, report.p) {
            if (pc - pv).abs() > 1e-8 {
                v.push(format!("privacy {pv} differs from closed form {pc}"));
            }
        }
        let row = vec![
            p.index.into(),
            q.convention.tag().into(),
            cfg.state.name().into(),
            q.dim().into(),
            opt_int(p.depth),
            p.r.into(),
            p.eta.into(),
            p.alpha.into(),
            p.g.into(),
            report.p.into(),
            closed.into(),
            report.trace_q.into(),
            report.kernel_dim.into(),
            report.near_kernel.len().into(),
            report.private_flags.iter().filter(|f| **f).count().into(),
            report.regime.tag().into(),
        ];
        Ok((row, v))
    })?;
    Ok(t)
}

/// Four-mode comparison of the depth-2 tree, the linear cluster chain and the
/// product of squeezed vacua, all along the average direction.
pub fn compare_states(cfg: &ScenarioConfig) -> Result<Table, Failure> {
    if !cfg.channels.is_empty() || cfg.sweep.eta.is_some() || cfg.sweep.alpha.is_some() || cfg.sweep.depth.is_some() {
        return Err(Failure::Config("compare-states takes only r and g sweeps and no channels".into()));
    }
    if cfg.target.direction != Direction::Average {
        return Err(Failure::Config("compare-states uses the average direction".into()));
    }
    let g_default = match cfg.state {
        StateConfig::Cluster { g, .. } => g,
        _ => DEFAULT_CLUSTER_G,
    };
    let mut t = Table::new(vec![
        "grid_index", "convention", "r", "g", "privacy_tree", "privacy_cluster", "privacy_product", "g_opt",
        "g_opt_bracket_lo", "g_opt_bracket_hi", "privacy_cluster_opt",
    ]);
    let points = grid(cfg);
    t.rows = run_grid(&points, |p| {
        let g = p.g.unwrap_or(g_default);
        let tree = qfim(&split_through_tree(&two_mode_squeezed(p.r), 1)?)?;
        let v4 = average_direction(4);
        let pt = privacy_measure(&tree, &v4)?;
        let pc = cluster_privacy(4, p.r, g)?;
        let pp = privacy_measure(&qfim(&build_product_squeezed(4, p.r)?)?, &v4)?;
        let best = optimal_cluster_coupling(p.r)?;
        let mut v = generic_checks(&tree, None);
        if (pp - 0.25).abs() > 1e-12 {
            v.push(format!("product privacy {pp} is not 1/4"));
        }
        for (name, x) in [("tree", pt), ("cluster", pc)] {
            if !(-1e-12..=1.0 + 1e-12).contains(&x) {
                v.push(format!("{name} privacy {x} outside [0, 1]"));
            }
        }
        let row = vec![
            p.index.into(),
            tree.convention.tag().into(),
            p.r.into(),
            g.into(),
            pt.into(),
            pc.into(),
            pp.into(),
            best.x.into(),
            best.bracket.0.into(),
            best.bracket.1.into(),
            best.value.into(),
        ];
        Ok((row, v))
    })?;
    Ok(t)
}

fn require_two_mode(cfg: &ScenarioConfig, cmd: &str) -> Result<(), Failure> {
    if !matches!(cfg.state, StateConfig::TwoMode { .. }) {
        return Err(Failure::Config(format!("{cmd} needs a two-mode state")));
    }
    if !cfg.channels.is_empty() || cfg.sweep.alpha.is_some() || cfg.target.direction != Direction::Average {
        return Err(Failure::Config(format!("{cmd} takes only r and eta sweeps, no channels and the average direction")));
    }
    Ok(())
}

/// Lossy two-mode squeezed vacuum: structure of the QFIm, its ratio to the
/// closed-form entry and the optimal homodyne readout.
pub fn two_mode(cfg: &ScenarioConfig) -> Result<Table, Failure> {
    require_two_mode(cfg, "two-mode")?;
    let mut t = Table::new(vec![
        "grid_index", "convention", "r", "eta", "privacy", "kernel_dim", "regime", "qfim_entry",
        "closed_form_entry", "entry_ratio", "cfi_optimal", "optimal_angle", "quadrature_angle",
    ]);
    let tol = KernelTol::default();
    let points = grid(cfg);
    t.rows = run_grid(&points, |p| {
        let eta = p.eta.unwrap_or(1.0);
        let q = qfim(&apply_loss(&two_mode_squeezed(p.r), &[eta, eta])?)?;
        let report = analyze(&q, &average_direction(2), tol)?;
        let entry = q.matrix[(0, 1)];
        let closed = two_mode_lossy_entry(p.r, eta);
        let mut v = generic_checks(&q, Some(&report));
        if report.regime != Regime::Insensitive {
            if let Some(pv) = report.p.filter(|pv| (pv - 1.0).abs() > 1e-9) {
                v.push(format!("two-mode privacy {pv} is not 1"));
            }
            if report.kernel_dim != 1 {
                v.push(format!("kernel dimension {} (expected 1)", report.kernel_dim));
            }
        }
        let ratio = (closed > 0.0).then(|| entry / closed);
        let row = vec![
            p.index.into(),
            q.convention.tag().into(),
            p.r.into(),
            eta.into(),
            report.p.into(),
            report.kernel_dim.into(),
            report.regime.tag().into(),
            entry.into(),
            closed.into(),
            ratio.into(),
            cfi_at_optimal(p.r, eta)?.into(),
            optimal_angle(p.r, eta, 0.0, 0.0)?.into(),
            quadrature_angle(p.r, eta, 0.0, 0.0)?.into(),
        ];
        Ok((row, v))
    })?;
    Ok(t)
}

pub fn protocol_sim(cfg: &ScenarioConfig, seed: u64) -> Result<Table, Failure> {
    require_two_mode(cfg, "protocol-sim")?;
    let pc = &cfg.protocol;
    let mut t = Table::new(vec![
        "grid_index", "convention", "r", "eta", "theta_1", "theta_2", "shots", "repetitions", "truth", "estimate",
        "bias", "standard_error", "variance", "fisher_average", "crb_ratio",
    ]);
    let points = grid(cfg);
    t.rows = run_grid(&points, |p| {
        let eta = p.eta.unwrap_or(1.0);
        let mut sim = ProtocolConfig::new(p.r, eta, pc.theta, pc.shots, seed);
        sim.repetitions = pc.repetitions;
        sim.pre_shots = (pc.pre_shots > 0).then_some(pc.pre_shots);
        sim.grid_index = u32::try_from(p.index).map_err(|_| Failure::Config("grid too large".into()))?;
        sim.sampler = match pc.sampler {
            SamplerKind::Shots => Sampler::Shots,
            SamplerKind::Wishart => Sampler::Wishart,
        };
        let rep = simulate_protocol(&sim)?;
        let mut v = Vec::new();
        if !rep.estimate.is_finite() || rep.variance.is_some_and(|x| !x.is_finite()) {
            v.push("non-finite estimate".into());
        }
        let row = vec![
            p.index.into(),
            "closed-form".into(),
            p.r.into(),
            eta.into(),
            pc.theta[0].into(),
            pc.theta[1].into(),
            pc.shots.into(),
            pc.repetitions.into(),
            rep.truth.into(),
            rep.estimate.into(),
            rep.bias.into(),
            rep.standard_error.into(),
            rep.variance.into(),
            rep.fisher_average_phase.into(),
            rep.crb_ratio.into(),
        ];
        Ok((row, v))
    })?;
    Ok(t)
}

/// Truncated Fock-space QFIm of the (lossy) two-mode squeezed vacuum against
/// the phase-space routes. Relative deviation is reported for pure states;
/// mixed states report the ratio to the moment-derivative formula.
pub fn oracle_check(cfg: &ScenarioConfig) -> Result<Table, Failure> {
    require_two_mode(cfg, "oracle-check")?;
    let n_max = cfg.oracle.n_max;
    let mut t = Table::new(vec![
        "grid_index", "convention", "r", "eta", "n_max", "tail_mass", "fock_entry", "phase_space_entry",
        "relative_deviation", "fock_over_phase_space", "fock_average_qfi",
    ]);
    let points = grid(cfg);
    t.rows = run_grid(&points, |p| {
        let eta = p.eta.unwrap_or(1.0);
        let pure = tmss_fock(p.r, n_max)?;
        let tail = pure.tail_mass;
        let (fock, ps) = if eta == 1.0 {
            (qfim_fock_pure(&pure)?, qfim_pure_phase(&two_mode_squeezed(p.r))?)
        } else {
            let mixed = apply_loss_fock(&pure, &[eta, eta])?;
            (qfim_fock_mixed(&mixed)?, qfim(&apply_loss(&two_mode_squeezed(p.r), &[eta, eta])?)?)
        };
        let norm = ps.matrix.norm();
        let deviation = (eta == 1.0 && norm > 0.0).then(|| (&fock - &ps.matrix).norm() / norm);
        let mut v = Vec::new();
        if let Some(d) = deviation.filter(|d| *d > 1e-6) {
            v.push(format!("Fock and phase-space QFIm differ by {d:.3e} (tail mass {tail:.3e})"));
        }
        let avg = DVector::from_element(2, FRAC_1_SQRT_2);
        let pse = ps.matrix[(0, 1)];
        let row = vec![
            p.index.into(),
            ps.convention.tag().into(),
            p.r.into(),
            eta.into(),
            n_max.into(),
            tail.into(),
            fock[(0, 1)].into(),
            pse.into(),
            deviation.into(),
            (pse != 0.0).then(|| fock[(0, 1)] / pse).into(),
            avg.dot(&(&fock * &avg)).into(),
        ];
        Ok((row, v))
    })?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(&format!("schema_version = 1\n{text}")).unwrap()
    }

    #[test]
    fn grid_order_and_size() {
        let c = cfg("[state]\nkind = \"tree\"\ndepth = 2\nr = 1.0\n[sweep]\ndepth = [2, 3]\nr = [0.5, 1.0, 1.5]\n");
        let g = grid(&c);
        assert_eq!(g.len(), 6);
        assert_eq!((g[0].depth, g[0].r), (Some(2), 0.5));
        assert_eq!((g[5].depth, g[5].r), (Some(3), 1.5));
        assert!(g.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn tree_state_matches_core_builder() {
        let c = cfg("[state]\nkind = \"tree\"\ndepth = 3\nr = 0.7\n");
        let s = build_state(&c, &grid(&c)[0]).unwrap();
        let spec = cvpriv_core::TreeSpec::new(3, 0.7).unwrap();
        assert_eq!(s, cvpriv_core::network::build_tree_state(&spec).unwrap());
    }

    #[test]
    fn mixed_states_use_moment_formula() {
        let c = cfg("[state]\nkind = \"two-mode\"\nr = 1.0\n[sweep]\neta = [0.5]\n");
        let q = qfim(&build_state(&c, &grid(&c)[0]).unwrap()).unwrap();
        assert_eq!(q.convention.tag(), "moment-derivative");
    }

    #[test]
    fn known_privacy_covers_tree_and_displacement() {
        let c = cfg("[state]\nkind = \"two-mode\"\nr = 1.0\n[sweep]\nalpha = [1.0]\n");
        let p = known_privacy(&c, &grid(&c)[0]).unwrap().unwrap();
        assert!((p - closed_form_displaced_privacy(1.0, 1.0, 0.0).unwrap()).abs() < 1e-15);
        let c = cfg("[state]\nkind = \"tree\"\ndepth = 2\nr = 1.0\n[[channels]]\nkind = \"loss\"\neta = [0.5]\n");
        assert_eq!(known_privacy(&c, &grid(&c)[0]).unwrap(), None);
    }

    #[test]
    fn spectrum_rejects_non_tree() {
        let c = cfg("[state]\nkind = \"product\"\nmodes = 4\nr = 1.0\n");
        assert!(matches!(spectrum(&c), Err(Failure::Config(_))));
    }

    #[test]
    fn custom_target_length_is_checked() {
        let c = cfg("[state]\nkind = \"product\"\nmodes = 4\nr = 1.0\n[target]\ndirection = \"custom\"\nvector = [1.0, 0.0]\n");
        assert!(matches!(privacy_sweep(&c), Err(Failure::Config(_))));
    }
}
