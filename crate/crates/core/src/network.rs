//! Resource states: the balanced beam-splitter tree fed by a two-mode squeezed
//! vacuum, its closed-form covariance, and the cluster and product comparators.
//!
//! Tree leaves use binary labels. Leaf `j` of a depth-`N` tree sits on the A
//! branch when its top bit `j_{N-1}` is zero, so A leaves are modes
//! `0..M/2` and B leaves are `M/2..M`. Splitting leaf `j` produces leaves `2j`
//! (sum port) and `2j + 1` (difference port).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phase_space::{
    apply_local, apply_map, beam_splitter_balanced, block_to_interleaved, compose, cz_gate,
    phase_shift, single_mode_squeezer, tensor, two_mode_squeezed, vacuum_state, GaussianState,
    SymplecticMap,
};

/// Deepest tree accepted; `2^16` modes is far beyond what dense matrices handle.
pub const MAX_DEPTH: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSpec {
    depth: u32,
    r: f64,
}

impl TreeSpec {
    pub fn new(depth: u32, r: f64) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Depth { min: 1, got: depth });
        }
        if depth > MAX_DEPTH {
            return Err(Error::Domain(format!("tree depth {depth} exceeds {MAX_DEPTH}")));
        }
        if !r.is_finite() {
            return Err(Error::Squeezing(r));
        }
        Ok(Self { depth, r })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn squeezing(&self) -> f64 {
        self.r
    }

    pub fn num_modes(&self) -> usize {
        1 << self.depth
    }

    /// Bit `i` of the leaf label.
    pub fn leaf_bit(j: usize, i: u32) -> usize {
        (j >> i) & 1
    }

    /// 0 for the A branch, 1 for the B branch.
    pub fn branch(&self, j: usize) -> usize {
        Self::leaf_bit(j, self.depth - 1)
    }

    /// Sign picked up by leaf `j` from the vacuum injected at layer `l`.
    pub fn layer_sign(&self, j: usize, l: u32) -> f64 {
        if Self::leaf_bit(j, self.depth - l - 1) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Index of the splitter at layer `l` that leaf `j` descends from.
    pub fn layer_node(&self, j: usize, l: u32) -> usize {
        j >> (self.depth - l)
    }

    /// The zero-eigenvalue direction: `+1` on A leaves, `-1` on B leaves.
    pub fn s_vector(&self) -> Vec<f64> {
        (0..self.num_modes())
            .map(|j| if self.branch(j) == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// Vacuum part of the leaf covariance as the explicit sum over layers.
    pub fn vacuum_sum(&self, j: usize, k: usize) -> f64 {
        let n = self.depth;
        (1..n)
            .filter(|&l| self.layer_node(j, l) == self.layer_node(k, l))
            .map(|l| 0.5 * 2f64.powi(-((n - l) as i32)) * self.layer_sign(j, l) * self.layer_sign(k, l))
            .sum()
    }

    /// The same vacuum part from its three possible values.
    pub fn vacuum_three_value(&self, j: usize, k: usize) -> f64 {
        let n = self.depth as i32;
        if j == k {
            0.5 * (1.0 - 2f64.powi(1 - n))
        } else if self.branch(j) == self.branch(k) {
            -(2f64.powi(-n))
        } else {
            0.0
        }
    }
}

/// Passes every mode of `input` through its own balanced splitting tree with
/// `layers` layers. Output mode `j * 2^layers + t` is leaf `t` of input mode `j`.
pub fn split_through_tree(input: &GaussianState, layers: u32) -> Result<GaussianState> {
    let mut state = input.clone();
    for _ in 0..layers {
        let m = state.num_modes();
        let mut doubled = tensor(&state, &vacuum_state(m)?);
        for j in 0..m {
            doubled = apply_map(&doubled, &beam_splitter_balanced(j, m + j, 2 * m)?)?;
        }
        let perm: Vec<usize> = (0..m).flat_map(|j| [j, m + j]).collect();
        state = crate::phase_space::permute_modes(&doubled, &perm)?;
    }
    Ok(state)
}

/// Tree state built gate by gate from a two-mode squeezed vacuum.
pub fn build_tree_state(spec: &TreeSpec) -> Result<GaussianState> {
    split_through_tree(&two_mode_squeezed(spec.r), spec.depth - 1)
}

/// Tree state assembled from the analytic leaf covariances.
pub fn tree_covariance_closed_form(spec: &TreeSpec) -> GaussianState {
    tree_closed_form_with(spec, TreeSpec::vacuum_sum)
}

/// Closed form using the three-value vacuum term instead of the layer sum.
pub fn tree_covariance_three_value(spec: &TreeSpec) -> GaussianState {
    tree_closed_form_with(spec, TreeSpec::vacuum_three_value)
}

fn tree_closed_form_with(spec: &TreeSpec, vac: fn(&TreeSpec, usize, usize) -> f64) -> GaussianState {
    if spec.depth == 1 {
        return two_mode_squeezed(spec.r);
    }
    let m = spec.num_modes();
    let scale = 2f64.powi(-(spec.depth as i32));
    let (c, s) = ((2.0 * spec.r).cosh(), (2.0 * spec.r).sinh());
    let mut block = DMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for k in 0..m {
            let v = vac(spec, j, k);
            let same = spec.branch(j) == spec.branch(k);
            let (sx, sp) = if same { (c, c) } else { (-s, s) };
            block[(j, k)] = scale * sx + v;
            block[(m + j, m + k)] = scale * sp + v;
        }
    }
    let p = block_to_interleaved(m);
    let cov = &p * block * p.transpose();
    GaussianState::from_parts(DVector::zeros(2 * m), cov)
}

/// Applies local phase shifts `theta`.
pub fn encode_phases(state: &GaussianState, theta: &[f64]) -> Result<GaussianState> {
    if theta.len() != state.num_modes() {
        return Err(Error::LengthMismatch { expected: state.num_modes(), got: theta.len() });
    }
    apply_map(state, &phase_shift(theta)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub modes: usize,
    pub r: f64,
    pub edges: Vec<Edge>,
}

impl ClusterSpec {
    /// Chain `(0,1), (1,2), ...` with a common coupling.
    pub fn linear_chain(modes: usize, r: f64, g: f64) -> Self {
        let edges = (1..modes).map(|k| Edge { a: k - 1, b: k, g }).collect();
        Self { modes, r, edges }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::NoModes);
        }
        for e in &self.edges {
            if e.a == e.b || e.a >= self.modes || e.b >= self.modes || !e.g.is_finite() {
                return Err(Error::InvalidEdge(e.a, e.b));
            }
        }
        Ok(())
    }

    /// The entangling map: CZ shears applied in edge-list order.
    pub fn entangler(&self) -> Result<SymplecticMap> {
        self.validate()?;
        let mut map = SymplecticMap::identity(self.modes);
        for e in &self.edges {
            map = compose(&cz_gate(e.a, e.b, e.g, self.modes)?, &map)?;
        }
        Ok(map)
    }
}

/// Momentum-squeezed vacua (`squeezer(-r)` on every mode) joined by CZ gates.
pub fn build_cluster_state(spec: &ClusterSpec) -> Result<GaussianState> {
    let entangler = spec.entangler()?;
    let mut state = vacuum_state(spec.modes)?;
    for k in 0..spec.modes {
        state = apply_local(&state, &single_mode_squeezer(-spec.r), k)?;
    }
    apply_map(&state, &entangler)
}

/// Product of `modes` single-mode squeezed vacua.
pub fn build_product_squeezed(modes: usize, r: f64) -> Result<GaussianState> {
    let mut state = vacuum_state(modes)?;
    for k in 0..modes {
        state = apply_local(&state, &single_mode_squeezer(r), k)?;
    }
    Ok(state)
}
