//! Model parameters, finite Cayley-tree slices, the Hamiltonian, exact
//! finite-volume measures and the brute-force compatibility oracle.
//!
//! Sites carry a pair spin (sigma, s) with sigma in {-1,+1} and s in {1..q}.
//! Nearest-neighbour energy mixes an Ising term and a Potts term with
//! weight `alpha`. Measures are computed in log-space and normalized at the
//! end, so beta*J up to ~20 stays inside double range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cap on exhaustive enumeration: 6^8 configurations.
pub const ENUM_LIMIT: u128 = 1_679_616;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: u32,
    pub k: u32,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "J_I")]
    pub j_i: f64,
    #[serde(rename = "J_P")]
    pub j_p: f64,
}

impl ModelParams {
    pub fn new(q: u32, k: u32, alpha: f64, beta: f64, j_i: f64, j_p: f64) -> Result<Self> {
        let p = ModelParams { q, k, alpha, beta, j_i, j_p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 3 {
            return Err(Error::InvalidParams(format!("q must be >= 3, got {}", self.q)));
        }
        if self.k < 1 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in [0,1], got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be > 0, got {}", self.beta)));
        }
        if !self.j_i.is_finite() || !self.j_p.is_finite() {
            return Err(Error::InvalidParams("couplings must be finite".into()));
        }
        Ok(())
    }

    /// Construct from the exponentiated weights theta_I, theta_P at beta = 1.
    pub fn from_thetas(q: u32, k: u32, alpha: f64, theta_i: f64, theta_p: f64) -> Result<Self> {
        if !(theta_i > 0.0) || !(theta_p > 0.0) {
            return Err(Error::InvalidParams("theta weights must be > 0".into()));
        }
        ModelParams::new(q, k, alpha, 1.0, theta_i.ln(), theta_p.ln())
    }

    /// Construct from the reduced weights a = theta_I^alpha, b = theta_P^(1-alpha).
    /// Uses alpha = 1/2 unless that would lose information (a or b pinned to 1).
    pub fn from_ab(q: u32, k: u32, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::InvalidParams("a and b must be > 0".into()));
        }
        // alpha = 1/2: theta_I = a^2, theta_P = b^2
        ModelParams::from_thetas(q, k, 0.5, a * a, b * b)
    }

    pub fn theta_i(&self) -> f64 {
        (self.beta * self.j_i).exp()
    }

    pub fn theta_p(&self) -> f64 {
        (self.beta * self.j_p).exp()
    }

    /// a = theta_I^alpha
    pub fn a(&self) -> f64 {
        (self.beta * self.j_i * self.alpha).exp()
    }

    /// b = theta_P^(1-alpha)
    pub fn b(&self) -> f64 {
        (self.beta * self.j_p * (1.0 - self.alpha)).exp()
    }

    /// Number of single-site spin values, 2q.
    pub fn n_spins(&self) -> usize {
        2 * self.q as usize
    }
}

/// Reductions to the classical single-component models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialCase {
    /// alpha = 1: the Potts term drops out.
    Ising,
    /// alpha = 0: the Ising term drops out.
    Potts,
}

pub fn special_case(kind: SpecialCase, params: &ModelParams) -> ModelParams {
    let mut p = *params;
    match kind {
        SpecialCase::Ising => p.alpha = 1.0,
        SpecialCase::Potts => p.alpha = 0.0,
    }
    p
}

/// Ball of radius `depth` in the Cayley tree, stored in BFS order so that
/// the vertices of every smaller ball form a prefix. Vertex 0 is the root.
#[derive(Clone, Debug)]
pub struct CayleyTreeSlice {
    pub k: u32,
    pub depth: u32,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    generation: Vec<u32>,
}

impl CayleyTreeSlice {
    pub fn n_vertices(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn generation(&self, v: usize) -> u32 {
        self.generation[v]
    }

    /// Vertices of generation m (contiguous in BFS order).
    pub fn generation_vertices(&self, m: u32) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&v| self.generation[v] == m)
            .collect()
    }

    /// Number of vertices in the ball of radius m (a BFS-order prefix).
    pub fn ball_size(&self, m: u32) -> usize {
        self.generation
            .iter()
            .filter(|&&g| g <= m)
            .count()
    }

    /// Parent-child edges with both ends in the first `prefix` vertices.
    pub fn edges_within(&self, prefix: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..prefix).map(|v| (self.parent[v].expect("non-root"), v))
    }
}

/// Builds the ball of radius `n`. The root has `k+1` children by default
/// (the full Cayley tree); `rooted_half` gives it `k` instead.
pub fn build_slice(k: u32, n: u32) -> CayleyTreeSlice {
    build_slice_root_degree(k, n, k + 1)
}

pub fn build_slice_root_degree(k: u32, n: u32, root_children: u32) -> CayleyTreeSlice {
    let mut parent = vec![None];
    let mut children = vec![Vec::new()];
    let mut generation = vec![0u32];
    let mut frontier = vec![0usize];
    for gen in 1..=n {
        let mut next = Vec::new();
        for &v in &frontier {
            let fanout = if v == 0 { root_children } else { k };
            for _ in 0..fanout {
                let u = parent.len();
                parent.push(Some(v));
                children.push(Vec::new());
                generation.push(gen);
                children[v].push(u);
                next.push(u);
            }
        }
        frontier = next;
    }
    CayleyTreeSlice { k, depth: n, parent, children, generation }
}

/// Index of the pair spin (sigma, s) in a flat vector of length 2q:
/// sigma = +1 occupies 0..q (s-1), sigma = -1 occupies q..2q (q + s - 1).
pub fn spin_index(sigma: i8, s: u32, q: u32) -> usize {
    debug_assert!(sigma == 1 || sigma == -1);
    debug_assert!((1..=q).contains(&s));
    if sigma == 1 {
        (s - 1) as usize
    } else {
        (q + s - 1) as usize
    }
}

/// Inverse of [`spin_index`].
pub fn spin_from_index(t: usize, q: u32) -> (i8, u32) {
    let t = t as u32;
    if t < q {
        (1, t + 1)
    } else {
        (-1, t - q + 1)
    }
}

/// A pair-spin configuration on the vertices of a slice (or a prefix of one).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub spins: Vec<(i8, u32)>,
}

impl Configuration {
    pub fn uniform(n_vertices: usize, sigma: i8, s: u32) -> Self {
        Configuration { spins: vec![(sigma, s); n_vertices] }
    }

    /// Decodes configuration number `id` in base 2q, vertex 0 least significant.
    pub fn from_id(id: u128, n_vertices: usize, q: u32) -> Self {
        let base = 2 * q as u128;
        let mut spins = Vec::with_capacity(n_vertices);
        let mut rest = id;
        for _ in 0..n_vertices {
            spins.push(spin_from_index((rest % base) as usize, q));
            rest /= base;
        }
        Configuration { spins }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }
}

/// Log-scale boundary fields h, one vector of length 2q per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldAssignment {
    pub q: u32,
    pub h: Vec<Vec<f64>>,
}

impl FieldAssignment {
    pub fn zeros(n_vertices: usize, q: u32) -> Self {
        FieldAssignment { q, h: vec![vec![0.0; 2 * q as usize]; n_vertices] }
    }

    pub fn at(&self, vertex: usize, sigma: i8, s: u32) -> f64 {
        self.h[vertex][spin_index(sigma, s, self.q)]
    }

    pub fn set_vertex(&mut self, vertex: usize, h: Vec<f64>) {
        assert_eq!(h.len(), 2 * self.q as usize);
        self.h[vertex] = h;
    }
}

/// Energy of a configuration on the first `prefix` vertices:
/// -alpha J_I sum sigma sigma' - (1-alpha) J_P sum delta_{s s'} over edges.
fn energy_prefix(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    config: &Configuration,
    prefix: usize,
) -> f64 {
    let mut ising = 0.0;
    let mut potts = 0.0;
    for (x, y) in slice.edges_within(prefix) {
        let (sx, cx) = config.spins[x];
        let (sy, cy) = config.spins[y];
        ising += (sx as f64) * (sy as f64);
        if cx == cy {
            potts += 1.0;
        }
    }
    -params.alpha * params.j_i * ising - (1.0 - params.alpha) * params.j_p * potts
}

pub fn hamiltonian(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    config: &Configuration,
) -> Result<f64> {
    if config.len() != slice.n_vertices() {
        return Err(Error::ConfigMismatch);
    }
    Ok(energy_prefix(params, slice, config, slice.n_vertices()))
}

/// Unnormalized log-weight of a configuration on the ball of radius `m`:
/// -beta H + boundary fields summed over generation m.
fn log_weight(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    config: &Configuration,
    m: u32,
) -> f64 {
    let prefix = slice.ball_size(m);
    let mut lw = -params.beta * energy_prefix(params, slice, config, prefix);
    for v in 0..prefix {
        if slice.generation(v) == m {
            let (sigma, s) = config.spins[v];
            lw += fields.at(v, sigma, s);
        }
    }
    lw
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn enum_guard(n_spins: usize, n_vertices: usize) -> Result<u128> {
    let mut total: u128 = 1;
    for _ in 0..n_vertices {
        total = total
            .checked_mul(n_spins as u128)
            .ok_or(Error::SizeLimit(u128::MAX))?;
        if total > ENUM_LIMIT {
            return Err(Error::SizeLimit(total));
        }
    }
    Ok(total)
}

/// All unnormalized log-weights over the ball of radius `m`, indexed by
/// configuration id (base 2q, vertex 0 least significant).
fn log_weight_table(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    m: u32,
) -> Result<Vec<f64>> {
    let prefix = slice.ball_size(m);
    let total = enum_guard(params.n_spins(), prefix)? as usize;
    let q = params.q;
    Ok((0..total)
        .into_par_iter()
        .map(|id| {
            let config = Configuration::from_id(id as u128, prefix, q);
            log_weight(params, slice, fields, &config, m)
        })
        .collect())
}

/// Probability of `config` under the finite-volume measure on the ball of
/// radius `slice.depth`, with boundary fields read off the deepest generation.
pub fn finite_volume_measure(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    config: &Configuration,
) -> Result<f64> {
    if config.len() != slice.n_vertices() {
        return Err(Error::ConfigMismatch);
    }
    if fields.h.len() < slice.n_vertices() {
        return Err(Error::MissingField(fields.h.len()));
    }
    let table = log_weight_table(params, slice, fields, slice.depth)?;
    let z = log_sum_exp(table.iter().cloned());
    let lw = log_weight(params, slice, fields, config, slice.depth);
    Ok((lw - z).exp())
}

/// Full probability table over the ball of radius `slice.depth`, indexed by
/// configuration id.
pub fn measure_table(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
) -> Result<Vec<f64>> {
    let table = log_weight_table(params, slice, fields, slice.depth)?;
    let z = log_sum_exp(table.iter().cloned());
    Ok(table.iter().map(|lw| (lw - z).exp()).collect())
}

/// Per-leaf transfer sum: for a leaf `y` with fields `h_y`, the factor
/// L_y(parent spin) = sum over (i,j) of exp(beta alpha J_I i u
/// + beta (1-alpha) J_P delta_{jv} + h_{i,j,y}).
fn leaf_factor_log(params: &ModelParams, h_y: &[f64], parent: (i8, u32)) -> f64 {
    let (u, v) = parent;
    let q = params.q;
    let mut terms = Vec::with_capacity(2 * q as usize);
    for t in 0..2 * q as usize {
        let (i, j) = spin_from_index(t, q);
        let mut lw = params.beta * params.alpha * params.j_i * (i as f64) * (u as f64);
        if j == v {
            lw += params.beta * (1.0 - params.alpha) * params.j_p;
        }
        terms.push(lw + h_y[t]);
    }
    log_sum_exp(terms)
}

/// Marginal of the radius-n measure on the ball of radius n-1, computed by
/// summing out the leaves per-subtree instead of enumerating them.
fn marginal_factorized(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    n: u32,
) -> Result<Vec<f64>> {
    let inner = slice.ball_size(n - 1);
    let total = enum_guard(params.n_spins(), inner)? as usize;
    let q = params.q;
    let leaves = slice.generation_vertices(n);
    let log_num: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|id| {
            let config = Configuration::from_id(id as u128, inner, q);
            let mut lw = -params.beta * energy_prefix(params, slice, &config, inner);
            for &y in &leaves {
                let p = slice.parent(y).expect("leaf has parent");
                lw += leaf_factor_log(params, &fields.h[y], config.spins[p]);
            }
            lw
        })
        .collect();
    let z = log_sum_exp(log_num.iter().cloned());
    Ok(log_num.iter().map(|lw| (lw - z).exp()).collect())
}

/// Marginal of the radius-n measure on the ball of radius n-1 by exhaustive
/// enumeration of all configurations on the full ball.
fn marginal_naive(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    n: u32,
) -> Result<Vec<f64>> {
    let outer = slice.ball_size(n);
    let inner = slice.ball_size(n - 1);
    let table = log_weight_table(params, slice, fields, n)?;
    let z = log_sum_exp(table.iter().cloned());
    let base = params.n_spins() as u128;
    let inner_total = base.pow(inner as u32) as usize;
    let mut marg = vec![0.0; inner_total];
    for (id, lw) in table.iter().enumerate() {
        let inner_id = (id as u128 % base.pow(inner as u32)) as usize;
        marg[inner_id] += (lw - z).exp();
    }
    let _ = outer;
    Ok(marg)
}

/// Maximum deviation between the radius-(n-1) measure and the marginal of
/// the radius-n measure, both built from `fields`. Uses exhaustive
/// enumeration when the full ball has at most 8 vertices, the factorized
/// leaf summation otherwise.
pub fn check_compatibility(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    n: u32,
) -> Result<f64> {
    if n < 1 || n > slice.depth {
        return Err(Error::InvalidRange(format!("n must be in 1..={}, got {n}", slice.depth)));
    }
    let marg = if slice.ball_size(n) <= 8 {
        marginal_naive(params, slice, fields, n)?
    } else {
        marginal_factorized(params, slice, fields, n)?
    };
    compare_with_inner_measure(params, slice, fields, n, &marg)
}

/// Exhaustive-path oracle, exposed for cross-checking against the
/// factorized path on small instances.
pub fn check_compatibility_naive(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    n: u32,
) -> Result<f64> {
    let marg = marginal_naive(params, slice, fields, n)?;
    compare_with_inner_measure(params, slice, fields, n, &marg)
}

pub fn check_compatibility_factorized(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    n: u32,
) -> Result<f64> {
    let marg = marginal_factorized(params, slice, fields, n)?;
    compare_with_inner_measure(params, slice, fields, n, &marg)
}

fn compare_with_inner_measure(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
    n: u32,
    marg: &[f64],
) -> Result<f64> {
    let inner = slice.ball_size(n - 1);
    let q = params.q;
    let table: Vec<f64> = (0..marg.len())
        .into_par_iter()
        .map(|id| {
            let config = Configuration::from_id(id as u128, inner, q);
            log_weight(params, slice, fields, &config, n - 1)
        })
        .collect();
    let z = log_sum_exp(table.iter().cloned());
    let mut max_dev: f64 = 0.0;
    for (id, lw) in table.iter().enumerate() {
        let mu_inner = (lw - z).exp();
        max_dev = max_dev.max((mu_inner - marg[id]).abs());
    }
    Ok(max_dev)
}

/// Root-spin marginal of the radius-n measure, by message passing up the
/// tree (log-space throughout). Returns a probability vector of length 2q.
pub fn root_marginal(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    fields: &FieldAssignment,
) -> Vec<f64> {
    let q = params.q;
    let n_spins = params.n_spins();
    // message[v][t]: log of the partial sum over the subtree below v, given
    // the spin of v's parent is t
    fn message(
        params: &ModelParams,
        slice: &CayleyTreeSlice,
        fields: &FieldAssignment,
        v: usize,
        parent_spin: (i8, u32),
    ) -> f64 {
        let q = params.q;
        let (u, pv) = parent_spin;
        let mut terms = Vec::with_capacity(2 * q as usize);
        for t in 0..2 * q as usize {
            let (i, j) = spin_from_index(t, q);
            let mut lw = params.beta * params.alpha * params.j_i * (i as f64) * (u as f64);
            if j == pv {
                lw += params.beta * (1.0 - params.alpha) * params.j_p;
            }
            if slice.children(v).is_empty() {
                lw += fields.h[v][t];
            } else {
                for &c in slice.children(v) {
                    lw += message(params, slice, fields, c, spin_from_index(t, q));
                }
            }
            terms.push(lw);
        }
        log_sum_exp(terms)
    }
    let mut logw = Vec::with_capacity(n_spins);
    for t in 0..n_spins {
        let spin = spin_from_index(t, q);
        let mut lw = 0.0;
        if slice.children(0).is_empty() {
            lw += fields.h[0][t];
        }
        for &c in slice.children(0) {
            lw += message(params, slice, fields, c, spin);
        }
        logw.push(lw);
    }
    let z = log_sum_exp(logw.iter().cloned());
    logw.iter().map(|lw| (lw - z).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: u32, k: u32, alpha: f64, theta_i: f64, theta_p: f64) -> ModelParams {
        ModelParams::from_thetas(q, k, alpha, theta_i, theta_p).unwrap()
    }

    #[test]
    fn slice_sizes() {
        let s = build_slice(2, 1);
        assert_eq!(s.n_vertices(), 4);
        assert_eq!(s.generation_vertices(1).len(), 3);
        let s = build_slice(2, 2);
        assert_eq!(s.n_vertices(), 10);
        assert_eq!(s.generation_vertices(2).len(), 6);
        let s = build_slice(1, 2);
        assert_eq!(s.n_vertices(), 5);
    }

    #[test]
    fn slice_parent_structure() {
        let s = build_slice(2, 2);
        for v in 1..s.n_vertices() {
            let p = s.parent(v).unwrap();
            assert!(s.children(p).contains(&v));
            assert_eq!(s.generation(v), s.generation(p) + 1);
        }
        assert_eq!(s.children(0).len(), 3);
        for &c in s.children(0) {
            assert_eq!(s.children(c).len(), 2);
        }
    }

    #[test]
    fn aligned_energy() {
        // all spins (+1, 1) on k=2, n=1: 3 edges, all pairs aligned
        let p = ModelParams::new(3, 2, 0.3, 1.0, 0.7, 1.1).unwrap();
        let s = build_slice(2, 1);
        let c = Configuration::uniform(4, 1, 1);
        let e = hamiltonian(&p, &s, &c).unwrap();
        let expect = -3.0 * p.alpha * p.j_i - 3.0 * (1.0 - p.alpha) * p.j_p;
        assert!((e - expect).abs() < 1e-14);
    }

    #[test]
    fn alpha_one_ignores_potts_component() {
        let p = ModelParams::new(3, 2, 1.0, 1.0, 0.7, 1.1).unwrap();
        let s = build_slice(2, 1);
        let mut c1 = Configuration::uniform(4, 1, 1);
        let mut c2 = Configuration::uniform(4, 1, 1);
        c1.spins[2] = (-1, 1);
        c2.spins[2] = (-1, 3);
        let e1 = hamiltonian(&p, &s, &c1).unwrap();
        let e2 = hamiltonian(&p, &s, &c2).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn alpha_zero_ignores_ising_component() {
        let p = ModelParams::new(3, 2, 0.0, 1.0, 0.7, 1.1).unwrap();
        let s = build_slice(2, 1);
        let mut c1 = Configuration::uniform(4, 1, 2);
        let mut c2 = Configuration::uniform(4, 1, 2);
        c1.spins[1] = (-1, 2);
        c2.spins[1] = (1, 2);
        assert_eq!(hamiltonian(&p, &s, &c1).unwrap(), hamiltonian(&p, &s, &c2).unwrap());
    }

    #[test]
    fn spin_flip_symmetry_pure_ising() {
        let p = ModelParams::new(4, 2, 1.0, 1.3, 0.9, 0.4).unwrap();
        let s = build_slice(2, 1);
        let c = Configuration {
            spins: vec![(1, 1), (-1, 2), (1, 4), (-1, 3)],
        };
        let flipped = Configuration {
            spins: c.spins.iter().map(|&(sg, sp)| (-sg, sp)).collect(),
        };
        assert_eq!(hamiltonian(&p, &s, &c).unwrap(), hamiltonian(&p, &s, &flipped).unwrap());
    }

    #[test]
    fn measure_normalizes() {
        let p = params(3, 2, 0.4, 2.0, 3.0);
        let s = build_slice(2, 1);
        let mut f = FieldAssignment::zeros(4, 3);
        f.set_vertex(1, vec![0.3, -0.2, 0.1, 0.0, 0.5, -0.4]);
        let table = measure_table(&p, &s, &f).unwrap();
        let total: f64 = table.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn high_temperature_limit_uniform() {
        let p = ModelParams::new(3, 1, 0.5, 1e-12, 1.0, 1.0).unwrap();
        let s = build_slice(1, 1);
        let f = FieldAssignment::zeros(s.n_vertices(), 3);
        let table = measure_table(&p, &s, &f).unwrap();
        let uniform = 1.0 / table.len() as f64;
        for &pr in &table {
            assert!((pr - uniform).abs() < 1e-12);
        }
    }

    #[test]
    fn product_measure_is_compatible() {
        // alpha = 0 and J_P = 0: no interaction at all, i.i.d. sites
        let p = ModelParams::new(3, 2, 0.0, 1.0, 5.0, 0.0).unwrap();
        let s = build_slice(2, 2);
        let f = FieldAssignment::zeros(s.n_vertices(), 3);
        let dev = check_compatibility(&p, &s, &f, 2).unwrap();
        assert!(dev < 1e-13, "dev = {dev}");
    }

    #[test]
    fn naive_and_factorized_paths_agree() {
        // k=1, n=2: 5 vertices, both paths run
        let p = params(3, 1, 0.35, 2.5, 4.0);
        let s = build_slice(1, 2);
        let mut f = FieldAssignment::zeros(s.n_vertices(), 3);
        for v in 0..s.n_vertices() {
            let h: Vec<f64> = (0..6).map(|t| ((v * 7 + t * 3) % 11) as f64 * 0.07 - 0.3).collect();
            f.set_vertex(v, h);
        }
        let naive = check_compatibility_naive(&p, &s, &f, 2).unwrap();
        let fact = check_compatibility_factorized(&p, &s, &f, 2).unwrap();
        assert!((naive - fact).abs() < 1e-13, "naive {naive} vs factorized {fact}");
    }

    #[test]
    fn generic_fields_violate_compatibility() {
        let p = params(3, 2, 0.0, 1.0, 5.0);
        let s = build_slice(2, 2);
        let mut f = FieldAssignment::zeros(s.n_vertices(), 3);
        for v in 0..s.n_vertices() {
            let h: Vec<f64> = (0..6).map(|t| ((v * 5 + t) % 7) as f64 * 0.23).collect();
            f.set_vertex(v, h);
        }
        let dev = check_compatibility(&p, &s, &f, 2).unwrap();
        assert!(dev > 1e-3, "dev = {dev}");
    }

    #[test]
    fn enumeration_guard_trips() {
        let p = params(3, 3, 0.5, 2.0, 2.0);
        let s = build_slice(3, 2); // 17 vertices, 6^17 configurations
        let f = FieldAssignment::zeros(s.n_vertices(), 3);
        let c = Configuration::uniform(s.n_vertices(), 1, 1);
        assert!(matches!(
            finite_volume_measure(&p, &s, &f, &c),
            Err(crate::Error::SizeLimit(_))
        ));
    }

    #[test]
    fn special_cases_set_alpha() {
        let p = ModelParams::new(3, 2, 0.4, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(special_case(SpecialCase::Ising, &p).alpha, 1.0);
        assert_eq!(special_case(SpecialCase::Potts, &p).alpha, 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(2, 2, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 2, 1.5, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 2, 0.5, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn params_serde_field_names() {
        let p = ModelParams::new(3, 2, 0.25, 1.0, 0.5, 1.5).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"J_I\""));
        assert!(json.contains("\"J_P\""));
        let back: ModelParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn derived_weights() {
        let p = params(3, 2, 0.0, 2.0, 5.0);
        assert!((p.theta_p() - 5.0).abs() < 1e-12);
        assert!((p.b() - 5.0).abs() < 1e-12);
        assert!((p.a() - 1.0).abs() < 1e-12);
        let p = ModelParams::from_ab(3, 2, 5.0, 5.0).unwrap();
        assert!((p.a() - 5.0).abs() < 1e-10);
        assert!((p.b() - 5.0).abs() < 1e-10);
    }
}
