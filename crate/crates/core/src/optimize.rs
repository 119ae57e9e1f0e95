//! One-dimensional maximisation used for the cluster coupling strength.

use crate::error::{Error, Result};
use crate::fisher::qfim_pure_phase;
use crate::network::{build_cluster_state, ClusterSpec};
use crate::privacy::{average_direction, privacy_measure};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// Final bracket containing the maximiser.
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Maximum>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Domain(format!("bad bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut evaluations = 2;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
    }
    let x = 0.5 * (a + b);
    Ok(Maximum { x, value: f(x)?, bracket: (a, b), evaluations: evaluations + 1 })
}

/// Grid scan followed by golden-section refinement around the best grid
/// point, for functions that may not be unimodal over the whole range.
pub fn scan_then_refine<F>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<Maximum>
where
    F: Fn(f64) -> Result<f64>,
{
    if points < 3 {
        return Err(Error::Domain("grid scan needs at least 3 points".into()));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..points {
        let v = f(lo + step * i as f64)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let a = lo + step * best.0.saturating_sub(1) as f64;
    let b = (lo + step * (best.0 + 1) as f64).min(hi);
    let mut m = golden_section_max(&f, a, b, tol)?;
    m.evaluations += points;
    Ok(m)
}

/// Privacy of the average phase for a linear-chain cluster of `modes` modes.
pub fn cluster_privacy(modes: usize, r: f64, g: f64) -> Result<f64> {
    let state = build_cluster_state(&ClusterSpec::linear_chain(modes, r, g))?;
    privacy_measure(&qfim_pure_phase(&state)?, &average_direction(modes))
}

/// Coupling strength maximising the four-mode chain privacy on `[0, 3]`.
pub fn optimal_cluster_coupling(r: f64) -> Result<Maximum> {
    scan_then_refine(|g| cluster_privacy(4, r, g), 0.0, 3.0, 31, 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let m = golden_section_max(|x| Ok(-(x - 1.3) * (x - 1.3) + 2.0), -4.0, 5.0, 1e-9).unwrap();
        assert!((m.x - 1.3).abs() < 1e-6);
        assert!((m.value - 2.0).abs() < 1e-12);
        assert!(m.bracket.0 <= m.x && m.x <= m.bracket.1);
        assert!(golden_section_max(|x| Ok(x), 1.0, 0.0, 1e-6).is_err());
    }

    #[test]
    fn scan_handles_two_peaks() {
        let f = |x: f64| Ok((-(x - 0.5f64).powi(2) * 50.0).exp() + 2.0 * (-(x - 2.5f64).powi(2) * 50.0).exp());
        let m = scan_then_refine(f, 0.0, 3.0, 31, 1e-9).unwrap();
        assert!((m.x - 2.5).abs() < 1e-6);
    }

    #[test]
    fn cluster_optimum_near_expected() {
        let m = optimal_cluster_coupling(1.0).unwrap();
        assert!((0.83..=0.93).contains(&m.x), "g_opt = {}", m.x);
        assert!(cluster_privacy(4, 1.0, 2.5).unwrap() < m.value);
    }
}
