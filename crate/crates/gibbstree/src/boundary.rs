//! The boundary-law operator, propagation of fields on finite trees and
//! fixed-point iteration.
//!
//! A boundary field is a positive vector z indexed by pair spins (i, j),
//! normalized so the entry at (-1, q) is exactly 1. The operator W maps the
//! common field of a vertex's children to the field of the vertex; its
//! fixed points are the translation-invariant splitting measures.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{spin_from_index, spin_index, CayleyTreeSlice, FieldAssignment, ModelParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    q: u32,
    z: Vec<f64>,
}

impl BoundaryField {
    /// Wraps a flat vector of length 2q (layout of [`spin_index`]). The
    /// entry at (-1, q) must be 1 and every entry strictly positive.
    pub fn new(q: u32, z: Vec<f64>) -> Result<Self> {
        if z.len() != 2 * q as usize {
            return Err(Error::InvalidParams(format!(
                "field length {} does not match 2q = {}",
                z.len(),
                2 * q
            )));
        }
        if z.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NonpositiveField);
        }
        let pin = z[spin_index(-1, q, q)];
        if pin != 1.0 {
            return Err(Error::InvalidParams(format!("entry at (-1,q) must be 1, got {pin}")));
        }
        Ok(BoundaryField { q, z })
    }

    pub fn ones(q: u32) -> Self {
        BoundaryField { q, z: vec![1.0; 2 * q as usize] }
    }

    /// All entries z except (1,q) and (-1,q), which are 1.
    pub fn from_i1(q: u32, z: f64) -> Result<Self> {
        let mut v = vec![z; 2 * q as usize];
        v[spin_index(1, q, q)] = 1.0;
        v[spin_index(-1, q, q)] = 1.0;
        BoundaryField::new(q, v)
    }

    /// z1 on the sigma = +1 block (except the pinned (1,q) = 1), z2 on the
    /// sigma = -1 block.
    pub fn from_i2(q: u32, z1: f64, z2: f64) -> Result<Self> {
        let mut v = vec![0.0; 2 * q as usize];
        for j in 1..=q {
            v[spin_index(1, j, q)] = if j == q { 1.0 } else { z1 };
            v[spin_index(-1, j, q)] = if j == q { 1.0 } else { z2 };
        }
        BoundaryField::new(q, v)
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn get(&self, sigma: i8, s: u32) -> f64 {
        self.z[spin_index(sigma, s, self.q)]
    }

    pub fn entries(&self) -> &[f64] {
        &self.z
    }

    /// Sup-norm distance entry-wise.
    pub fn sup_dist(&self, other: &BoundaryField) -> f64 {
        self.z
            .iter()
            .zip(&other.z)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Sup-norm distance in log coordinates.
    pub fn log_sup_dist(&self, other: &BoundaryField) -> f64 {
        self.z
            .iter()
            .zip(&other.z)
            .map(|(a, b)| (a.ln() - b.ln()).abs())
            .fold(0.0, f64::max)
    }

    /// Log-scale field vector h = ln z for a vertex.
    pub fn to_log(&self) -> Vec<f64> {
        self.z.iter().map(|v| v.ln()).collect()
    }

    /// Which invariant set the field lies in, entry-wise within `tol`.
    pub fn invariant_set(&self, tol: f64) -> InvariantSetTag {
        let q = self.q;
        if (self.get(1, q) - 1.0).abs() > tol {
            return InvariantSetTag::General;
        }
        let z1_block: Vec<f64> = (1..q).map(|j| self.get(1, j)).collect();
        let z2_block: Vec<f64> = (1..q).map(|j| self.get(-1, j)).collect();
        let spread = |v: &[f64]| -> f64 {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        if spread(&z1_block) > tol || spread(&z2_block) > tol {
            return InvariantSetTag::General;
        }
        let z1 = z1_block[0];
        let z2 = z2_block[0];
        if (z1 - z2).abs() <= tol {
            InvariantSetTag::I1 { z: z1 }
        } else {
            InvariantSetTag::I2 { z1, z2 }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum InvariantSetTag {
    I1 { z: f64 },
    I2 { z1: f64, z2: f64 },
    General,
}

/// Per-spin transfer sums for one child field: `N[(i,j)]` is the double sum
/// over child spins (u,v) of exp(beta alpha J_I i u) exp(beta (1-alpha) J_P
/// delta_{jv}) z_{u,v}. The ratio N[(i,j)] / N[(-1,q)] is the per-child
/// factor of the recurrence.
fn transfer_sums(params: &ModelParams, child: &BoundaryField) -> Vec<f64> {
    let q = params.q;
    let wi = (params.beta * params.alpha * params.j_i).exp();
    let wp = (params.beta * (1.0 - params.alpha) * params.j_p).exp();
    // sums over u of the Ising weight times z, per child Potts colour v
    let mut plus = vec![0.0; q as usize]; // i = +1
    let mut minus = vec![0.0; q as usize]; // i = -1
    for v in 1..=q {
        let zp = child.get(1, v);
        let zm = child.get(-1, v);
        plus[(v - 1) as usize] = wi * zp + zm / wi;
        minus[(v - 1) as usize] = zp / wi + wi * zm;
    }
    let mut out = vec![0.0; 2 * q as usize];
    for t in 0..2 * q as usize {
        let (i, j) = spin_from_index(t, q);
        let row = if i == 1 { &plus } else { &minus };
        let mut total = 0.0;
        for v in 1..=q {
            let w = if v == j { wp } else { 1.0 };
            total += w * row[(v - 1) as usize];
        }
        out[t] = total;
    }
    out
}

/// One application of the translation-invariant operator: each entry is
/// (N_{i,j} / N_{-1,q})^k, the pinned entry stays 1.
pub fn apply_w(params: &ModelParams, child: &BoundaryField) -> Result<BoundaryField> {
    apply_w_multi(params, &vec![child.clone(); params.k as usize])
}

/// General recurrence: the product over children of per-child ratios.
pub fn apply_w_multi(params: &ModelParams, children: &[BoundaryField]) -> Result<BoundaryField> {
    if children.is_empty() {
        return Err(Error::EmptyChildren);
    }
    let q = params.q;
    let pin = spin_index(-1, q, q);
    let mut out = vec![1.0; 2 * q as usize];
    for child in children {
        let n = transfer_sums(params, child);
        let d = n[pin];
        for t in 0..out.len() {
            out[t] *= n[t] / d;
        }
    }
    out[pin] = 1.0;
    BoundaryField::new(q, out)
}

/// The compact per-colour form of the same operator: N_{i,j} =
/// sum over v of theta_P^{(1-alpha) delta_{jv}} (theta_I^{alpha i} z_{1,v}
/// + theta_I^{-alpha i} z_{-1,v}). Kept separate so the two forms can be
/// compared; they must agree.
pub fn apply_w_compact(params: &ModelParams, child: &BoundaryField) -> Result<BoundaryField> {
    let q = params.q;
    let a = params.a();
    let b = params.b();
    let n_of = |i: i8, j: u32| -> f64 {
        let ai = if i == 1 { a } else { 1.0 / a };
        let mut total = 0.0;
        for v in 1..=q {
            let w = if v == j { b } else { 1.0 };
            total += w * (ai * child.get(1, v) + child.get(-1, v) / ai);
        }
        total
    };
    let d = n_of(-1, q);
    let mut out = vec![0.0; 2 * q as usize];
    for t in 0..2 * q as usize {
        let (i, j) = spin_from_index(t, q);
        out[t] = (n_of(i, j) / d).powi(params.k as i32);
    }
    out[spin_index(-1, q, q)] = 1.0;
    BoundaryField::new(q, out)
}

/// Computes fields on every vertex from given leaf fields, leaf-to-root.
/// `leaves` maps each deepest-generation vertex index to its field.
pub fn propagate_fields(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    leaves: &[(usize, BoundaryField)],
) -> Result<Vec<BoundaryField>> {
    let n = slice.n_vertices();
    let mut fields: Vec<Option<BoundaryField>> = vec![None; n];
    for (v, f) in leaves {
        fields[*v] = Some(f.clone());
    }
    for v in slice.generation_vertices(slice.depth) {
        if fields[v].is_none() {
            return Err(Error::MissingField(v));
        }
    }
    // BFS order puts children after parents, so reverse order is leaf-first
    for v in (0..n).rev() {
        if slice.children(v).is_empty() {
            continue;
        }
        let child_fields: Vec<BoundaryField> = slice
            .children(v)
            .iter()
            .map(|&c| fields[c].clone().ok_or(Error::MissingField(c)))
            .collect::<Result<_>>()?;
        fields[v] = Some(apply_w_multi(params, &child_fields)?);
    }
    Ok(fields.into_iter().map(|f| f.expect("all vertices filled")).collect())
}

/// Per-vertex log fields (h = ln z) from per-vertex boundary fields.
pub fn to_field_assignment(q: u32, fields: &[BoundaryField]) -> FieldAssignment {
    FieldAssignment { q, h: fields.iter().map(|f| f.to_log()).collect() }
}

/// Embeds a translation-invariant field on a finite slice: every leaf gets
/// `z`, interior vertices are recomputed by propagation (so a true fixed
/// point reproduces itself on every non-root vertex).
pub fn embed_translation_invariant(
    params: &ModelParams,
    slice: &CayleyTreeSlice,
    z: &BoundaryField,
) -> Result<Vec<BoundaryField>> {
    let leaves: Vec<(usize, BoundaryField)> = slice
        .generation_vertices(slice.depth)
        .into_iter()
        .map(|v| (v, z.clone()))
        .collect();
    propagate_fields(params, slice, &leaves)
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub diverged: bool,
    pub invariant_set: InvariantSetTag,
    #[serde(skip)]
    pub limit: Option<BoundaryField>,
}

/// Plain fixed-point iteration of W from `z0`, stopping when successive
/// iterates are within `tol` in log-coordinate sup-norm.
pub fn iterate_w(
    params: &ModelParams,
    z0: &BoundaryField,
    max_iter: usize,
    tol: f64,
) -> Result<IterationReport> {
    let mut z = z0.clone();
    for it in 0..=max_iter {
        let next = match apply_w(params, &z) {
            Ok(f) => f,
            Err(Error::NonpositiveField) => {
                return Ok(IterationReport {
                    converged: false,
                    iterations: it,
                    residual: f64::INFINITY,
                    diverged: true,
                    invariant_set: InvariantSetTag::General,
                    limit: None,
                })
            }
            Err(e) => return Err(e),
        };
        let dist = next.log_sup_dist(&z);
        if !dist.is_finite() {
            return Ok(IterationReport {
                converged: false,
                iterations: it,
                residual: f64::INFINITY,
                diverged: true,
                invariant_set: InvariantSetTag::General,
                limit: None,
            });
        }
        if dist < tol {
            let tag = next.invariant_set(tol.max(1e-9));
            return Ok(IterationReport {
                converged: true,
                iterations: it,
                residual: dist,
                diverged: false,
                invariant_set: tag,
                limit: Some(next),
            });
        }
        z = next;
    }
    let residual = apply_w(params, &z).map(|n| n.log_sup_dist(&z)).unwrap_or(f64::INFINITY);
    Ok(IterationReport {
        converged: false,
        iterations: max_iter,
        residual,
        diverged: false,
        invariant_set: z.invariant_set(1e-9),
        limit: Some(z),
    })
}

/// Whether `z` is a fixed point of W within `tol`; returns the sup-norm
/// residual of apply_w(z) - z.
pub fn is_fixed_point(params: &ModelParams, z: &BoundaryField, tol: f64) -> Result<(bool, f64)> {
    let image = apply_w(params, z)?;
    let residual = image.sup_dist(z);
    Ok((residual <= tol, residual))
}

// BoundaryField serializes as {"z": [[i, j, value], ...]} with the pinned
// entry included.
impl Serialize for BoundaryField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut triples = Vec::with_capacity(self.z.len());
        for t in 0..self.z.len() {
            let (i, j) = spin_from_index(t, self.q);
            triples.push((i as i64, j as u64, self.z[t]));
        }
        let mut map = s.serialize_map(Some(1))?;
        map.serialize_entry("z", &triples)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for BoundaryField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            z: Vec<(i64, u64, f64)>,
        }
        let raw = Raw::deserialize(d)?;
        let n = raw.z.len();
        if n < 6 || n % 2 != 0 {
            return Err(D::Error::custom(format!("expected 2q >= 6 entries, got {n}")));
        }
        let q = (n / 2) as u32;
        let mut z = vec![f64::NAN; n];
        for (i, j, value) in raw.z {
            if (i != 1 && i != -1) || j < 1 || j > q as u64 {
                return Err(D::Error::custom(format!("invalid spin index ({i}, {j})")));
            }
            z[spin_index(i as i8, j as u32, q)] = value;
        }
        if z.iter().any(|v| v.is_nan()) {
            return Err(D::Error::custom("missing spin entries"));
        }
        BoundaryField::new(q, z).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_slice, check_compatibility, ModelParams};

    fn params(q: u32, k: u32, alpha: f64, theta_i: f64, theta_p: f64) -> ModelParams {
        ModelParams::from_thetas(q, k, alpha, theta_i, theta_p).unwrap()
    }

    // deterministic pseudo-random draws for property-style tests
    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn random_params(state: &mut u64) -> ModelParams {
        let q = 3 + (lcg(state) * 3.0) as u32;
        let k = 1 + (lcg(state) * 3.0) as u32;
        let alpha = lcg(state);
        let theta_i = 0.5 + 4.0 * lcg(state);
        let theta_p = 0.5 + 4.0 * lcg(state);
        params(q, k, alpha, theta_i, theta_p)
    }

    #[test]
    fn all_ones_is_fixed() {
        let mut state = 17;
        for _ in 0..100 {
            let p = random_params(&mut state);
            let ones = BoundaryField::ones(p.q);
            let image = apply_w(&p, &ones).unwrap();
            assert!(image.sup_dist(&ones) <= 1e-14);
        }
    }

    #[test]
    fn i1_is_invariant() {
        let mut state = 23;
        for _ in 0..100 {
            let p = random_params(&mut state);
            let z = 0.2 + 3.0 * lcg(&mut state);
            let f = BoundaryField::from_i1(p.q, z).unwrap();
            let image = apply_w(&p, &f).unwrap();
            match image.invariant_set(1e-10) {
                InvariantSetTag::I1 { .. } => {}
                other => panic!("I1 not preserved: {other:?} at {p:?}, z = {z}"),
            }
        }
    }

    #[test]
    fn i2_groups_stay_equal() {
        // the two blocks of equal entries stay internally equal under W
        let mut state = 31;
        for _ in 0..100 {
            let p = random_params(&mut state);
            let z1 = 0.2 + 3.0 * lcg(&mut state);
            let z2 = 0.2 + 3.0 * lcg(&mut state);
            let f = BoundaryField::from_i2(p.q, z1, z2).unwrap();
            let image = apply_w(&p, &f).unwrap();
            for block in [1i8, -1] {
                let vals: Vec<f64> = (1..p.q).map(|j| image.get(block, j)).collect();
                let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - vals.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(
                    spread <= 1e-12 * vals[0].abs().max(1.0),
                    "block {block} spread {spread}"
                );
            }
        }
    }

    #[test]
    fn outputs_stay_positive() {
        let mut state = 41;
        for _ in 0..100 {
            let p = random_params(&mut state);
            let z: Vec<f64> = (0..2 * p.q as usize).map(|_| 0.05 + 5.0 * lcg(&mut state)).collect();
            let mut z = z;
            z[crate::model::spin_index(-1, p.q, p.q)] = 1.0;
            let f = BoundaryField::new(p.q, z).unwrap();
            let image = apply_w(&p, &f).unwrap();
            assert!(image.entries().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn compact_form_agrees_with_double_sum() {
        let mut state = 53;
        for _ in 0..100 {
            let p = random_params(&mut state);
            let mut z: Vec<f64> =
                (0..2 * p.q as usize).map(|_| 0.1 + 4.0 * lcg(&mut state)).collect();
            z[crate::model::spin_index(-1, p.q, p.q)] = 1.0;
            let f = BoundaryField::new(p.q, z).unwrap();
            let a = apply_w(&p, &f).unwrap();
            let b = apply_w_compact(&p, &f).unwrap();
            for (x, y) in a.entries().iter().zip(b.entries()) {
                assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn multi_with_identical_children_matches_apply_w() {
        let p = params(4, 3, 0.4, 2.0, 3.0);
        let f = BoundaryField::from_i2(4, 1.7, 0.6).unwrap();
        let single = apply_w(&p, &f).unwrap();
        let multi = apply_w_multi(&p, &[f.clone(), f.clone(), f]).unwrap();
        assert!(single.sup_dist(&multi) <= 1e-13);
    }

    #[test]
    fn propagate_all_ones() {
        let p = params(3, 2, 0.3, 2.0, 3.0);
        let slice = build_slice(2, 2);
        let ones = BoundaryField::ones(3);
        let fields = embed_translation_invariant(&p, &slice, &ones).unwrap();
        for f in &fields {
            assert!(f.sup_dist(&ones) <= 1e-14);
        }
    }

    #[test]
    fn propagated_fields_are_compatible() {
        let p = params(3, 2, 0.0, 1.0, 5.0);
        let slice = build_slice(2, 2);
        let mut state = 67;
        let leaves: Vec<(usize, BoundaryField)> = slice
            .generation_vertices(2)
            .into_iter()
            .map(|v| {
                let mut z: Vec<f64> = (0..6).map(|_| 0.2 + 2.0 * lcg(&mut state)).collect();
                z[crate::model::spin_index(-1, 3, 3)] = 1.0;
                (v, BoundaryField::new(3, z).unwrap())
            })
            .collect();
        let fields = propagate_fields(&p, &slice, &leaves).unwrap();
        let assignment = to_field_assignment(3, &fields);
        let dev = check_compatibility(&p, &slice, &assignment, 2).unwrap();
        assert!(dev <= 1e-10, "dev = {dev}");
    }

    #[test]
    fn case1_large_root_is_fixed_point() {
        // q=3, alpha=0, theta_P=5, k=2: z = (3 + 2 sqrt 2)/2 on I1
        let p = params(3, 2, 0.0, 1.0, 5.0);
        let z = (3.0 + 2.0 * std::f64::consts::SQRT_2) / 2.0;
        let f = BoundaryField::from_i1(3, z).unwrap();
        let (ok, residual) = is_fixed_point(&p, &f, 1e-10).unwrap();
        assert!(ok, "residual = {residual}");
    }

    #[test]
    fn iteration_finds_case1_root() {
        let p = params(3, 2, 0.0, 1.0, 5.0);
        let z0 = BoundaryField::from_i1(3, 3.2).unwrap();
        let report = iterate_w(&p, &z0, 100_000, 1e-13).unwrap();
        assert!(report.converged);
        let limit = report.limit.unwrap();
        let (ok, res) = is_fixed_point(&p, &limit, 1e-12).unwrap();
        assert!(ok, "residual {res}");
        // the I1 coordinate solves z (2z+5)^2 = (6z+1)^2
        match limit.invariant_set(1e-9) {
            InvariantSetTag::I1 { z } => {
                let lhs = z * (2.0 * z + 5.0) * (2.0 * z + 5.0);
                let rhs = (6.0 * z + 1.0) * (6.0 * z + 1.0);
                assert!((lhs - rhs).abs() <= 1e-8 * rhs, "z = {z}");
            }
            other => panic!("expected I1 limit, got {other:?}"),
        }
    }

    #[test]
    fn iteration_from_ones_converges_immediately() {
        let p = params(3, 2, 0.5, 2.0, 3.0);
        let report = iterate_w(&p, &BoundaryField::ones(3), 10, 1e-12).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn nonpositive_entries_rejected() {
        assert!(BoundaryField::new(3, vec![1.0, -0.5, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(BoundaryField::new(3, vec![1.0, 0.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        // pinned entry not 1
        assert!(BoundaryField::new(3, vec![1.0, 1.0, 1.0, 1.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn scaled_ones_is_not_fixed() {
        let p = params(3, 2, 0.3, 2.0, 4.0);
        let f = BoundaryField::from_i1(3, 2.0).unwrap();
        let (ok, residual) = is_fixed_point(&p, &f, 1e-10).unwrap();
        assert!(!ok);
        assert!(residual > 1e-3);
    }

    #[test]
    fn serde_round_trip() {
        let f = BoundaryField::from_i2(3, 1.5, 0.75).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.starts_with("{\"z\":[["));
        let back: BoundaryField = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn serde_rejects_broken_pin() {
        let json = r#"{"z":[[1,1,2.0],[1,2,2.0],[1,3,1.0],[-1,1,2.0],[-1,2,2.0],[-1,3,1.5]]}"#;
        assert!(serde_json::from_str::<BoundaryField>(json).is_err());
    }
}
