//! Convex feasible command set over gait parameters `(dq_x, dq_y, q_z)`.
//!
//! Commands inside the convex hull of the vertex list are the ones the
//! walking controller is known to stabilize. A small library keyed by slope
//! angle lets the planners switch sets on ramps.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lp::{self, LpOutcome};

pub type GaitParameter = [f64; 3];

pub const DEFAULT_CONTAINS_TOL: f64 = 1e-6;

/// Loose envelope every vertex must sit in: the gait-library ranges widened
/// to the extreme speeds and lateral steps observed on hardware.
pub const ENVELOPE: [[f64; 2]; 3] = [[-1.0, 1.2], [-0.5, 0.5], [0.65, 1.0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSet {
    pub vertices: Vec<GaitParameter>,
    /// Yaw-rate interval in rad/s.
    pub yaw_rate_bounds: [f64; 2],
    /// Terrain slope this set was computed for, in degrees.
    #[serde(default)]
    pub slope_angle: f64,
}

/// Result of the hull-distance program.
#[derive(Debug, Clone, PartialEq)]
pub struct HullDistance {
    /// `min ‖Σλ_j·p_j − p‖∞` over the simplex of weights.
    pub distance: f64,
    pub weights: Vec<f64>,
    pub closest: GaitParameter,
}

const YAW_LIMIT: f64 = 20.0 * std::f64::consts::PI / 180.0;

impl CommandSet {
    pub fn new(vertices: Vec<GaitParameter>, yaw_rate_bounds: [f64; 2], slope_angle: f64) -> Result<Self> {
        let s = Self { vertices, yaw_rate_bounds, slope_angle };
        s.validate()?;
        Ok(s)
    }

    /// Flat-ground set tracing the known speed/height envelope: fastest
    /// forward walking near 0.95 m, slower everywhere at the extremes of height.
    pub fn default_flat() -> Self {
        Self {
            vertices: vec![
                [1.2, 0.0, 0.95],
                [-0.6, 0.0, 0.85],
                [0.0, 0.5, 0.85],
                [0.0, -0.5, 0.85],
                [0.4, 0.2, 0.7],
                [0.4, -0.2, 0.7],
                [-0.2, 0.0, 0.7],
                [0.6, 0.25, 1.0],
                [0.6, -0.25, 1.0],
                [-0.3, 0.0, 1.0],
            ],
            yaw_rate_bounds: [-YAW_LIMIT, YAW_LIMIT],
            slope_angle: 0.0,
        }
    }

    /// Uphill set: backward walking is halved.
    pub fn default_incline() -> Self {
        let mut s = Self::default_flat();
        for v in &mut s.vertices {
            if v[0] < 0.0 {
                v[0] *= 0.5;
            }
        }
        s.slope_angle = 10.0;
        s
    }

    /// Downhill set: the lowest walking height is raised to 0.75 m.
    pub fn default_decline() -> Self {
        let mut s = Self::default_flat();
        for v in &mut s.vertices {
            v[2] = v[2].max(0.75);
        }
        s.slope_angle = -10.0;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 4 {
            return Err(Error::InvalidSet(format!("need at least 4 vertices, got {}", self.vertices.len())));
        }
        for v in &self.vertices {
            for (k, (&c, [lo, hi])) in v.iter().zip(ENVELOPE).enumerate() {
                if !c.is_finite() || c < lo - 1e-12 || c > hi + 1e-12 {
                    return Err(Error::InvalidSet(format!("vertex {v:?} coordinate {k} outside [{lo}, {hi}]")));
                }
            }
        }
        if affine_rank(&self.vertices) < 3 {
            return Err(Error::InvalidSet("vertices are not affinely independent".into()));
        }
        let [lo, hi] = self.yaw_rate_bounds;
        if !(hi > 0.0) || (lo + hi).abs() > 1e-12 {
            return Err(Error::InvalidSet(format!("yaw-rate bounds [{lo}, {hi}] must be symmetric about 0")));
        }
        Ok(())
    }

    /// Axis-aligned bounding box `[[lo, hi]; 3]` of the vertices.
    pub fn bounding_box(&self) -> [[f64; 2]; 3] {
        let mut bb = [[f64::INFINITY, f64::NEG_INFINITY]; 3];
        for v in &self.vertices {
            for k in 0..3 {
                bb[k][0] = bb[k][0].min(v[k]);
                bb[k][1] = bb[k][1].max(v[k]);
            }
        }
        bb
    }

    pub fn centroid(&self) -> GaitParameter {
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for k in 0..3 {
                c[k] += v[k] / n;
            }
        }
        c
    }

    /// L∞ distance from `p` to the hull with the minimizing convex weights.
    pub fn hull_distance(&self, p: GaitParameter) -> HullDistance {
        let s = self.vertices.len();
        // Columns: λ (s), e⁺ (3), e⁻ (3), t, w (3).
        let n = s + 10;
        let t_col = s + 6;
        let mut a = Vec::with_capacity(7);
        let mut b = Vec::with_capacity(7);
        for k in 0..3 {
            let mut row = vec![0.0; n];
            for (j, v) in self.vertices.iter().enumerate() {
                row[j] = v[k];
            }
            row[s + k] = -1.0;
            row[s + 3 + k] = 1.0;
            a.push(row);
            b.push(p[k]);
        }
        for k in 0..3 {
            let mut row = vec![0.0; n];
            row[t_col] = 1.0;
            row[s + k] = -1.0;
            row[s + 3 + k] = -1.0;
            row[s + 7 + k] = -1.0;
            a.push(row);
            b.push(0.0);
        }
        let mut row = vec![0.0; n];
        row[..s].fill(1.0);
        a.push(row);
        b.push(1.0);
        let mut c = vec![0.0; n];
        c[t_col] = 1.0;
        match lp::solve(&a, &b, &c) {
            LpOutcome::Optimal { x, .. } => {
                let weights = x[..s].to_vec();
                let mut closest = [0.0; 3];
                for (w, v) in weights.iter().zip(&self.vertices) {
                    for k in 0..3 {
                        closest[k] += w * v[k];
                    }
                }
                let distance = (0..3).map(|k| (closest[k] - p[k]).abs()).fold(0.0, f64::max);
                HullDistance { distance, weights, closest }
            }
            // The program is always feasible and bounded below by 0.
            other => unreachable!("hull-distance LP returned {other:?}"),
        }
    }

    pub fn margin(&self, p: GaitParameter) -> f64 {
        self.hull_distance(p).distance
    }

    pub fn contains(&self, p: GaitParameter, tol: f64) -> bool {
        // The LP solution carries round-off of a few ulps on the weights.
        self.margin(p) <= tol + 1e-12
    }

    /// Nearest hull point in the L∞ sense.
    pub fn project(&self, p: GaitParameter) -> GaitParameter {
        self.hull_distance(p).closest
    }

    pub fn clamp_yaw_rate(&self, rate: f64) -> f64 {
        rate.clamp(self.yaw_rate_bounds[0], self.yaw_rate_bounds[1])
    }
}

fn affine_rank(vertices: &[GaitParameter]) -> usize {
    let base = vertices[0];
    let mut rows: Vec<[f64; 3]> =
        vertices[1..].iter().map(|v| [v[0] - base[0], v[1] - base[1], v[2] - base[2]]).collect();
    let mut rank = 0;
    for col in 0..3 {
        let Some(piv) = (rank..rows.len())
            .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()))
            .filter(|&r| rows[r][col].abs() > 1e-9)
        else {
            continue;
        };
        rows.swap(rank, piv);
        let pr = rows[rank];
        for r in rank + 1..rows.len() {
            let f = rows[r][col] / pr[col];
            for k in 0..3 {
                rows[r][k] -= f * pr[k];
            }
        }
        rank += 1;
    }
    rank
}

/// Shape of the per-node convex-combination block added to the NLP: `S`
/// weights `λ_ij ≥ 0`, one slack `δ_cfeas,i ≥ 0`, the three rows
/// `p_i − Σ_j λ_ij·p_j = 0` and the row `Σ_j λ_ij − 1 − δ_cfeas,i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricBlock {
    pub node_index: usize,
    pub vertices: Vec<GaitParameter>,
}

impl BarycentricBlock {
    pub fn num_weights(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_slacks(&self) -> usize {
        1
    }

    pub fn num_equalities(&self) -> usize {
        4
    }

    pub fn residual(&self, p: GaitParameter, weights: &[f64], slack: f64) -> [f64; 4] {
        let mut r = [p[0], p[1], p[2], -1.0 - slack];
        for (w, v) in weights.iter().zip(&self.vertices) {
            for k in 0..3 {
                r[k] -= w * v[k];
            }
            r[3] += w;
        }
        r
    }
}

pub fn barycentric_constraints(set: &CommandSet, node_index: usize) -> BarycentricBlock {
    BarycentricBlock { node_index, vertices: set.vertices.clone() }
}

/// Command sets keyed by integer slope angle in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetLibrary {
    #[serde(with = "slope_keys")]
    pub sets: BTreeMap<i32, CommandSet>,
}

/// Slope keys travel as strings so the library fits TOML tables.
mod slope_keys {
    use super::CommandSet;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<i32, CommandSet>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<i32, CommandSet>, D::Error> {
        BTreeMap::<String, CommandSet>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<i32>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("slope key `{k}` is not an integer")))
            })
            .collect()
    }
}

impl Default for SetLibrary {
    fn default() -> Self {
        let mut sets = BTreeMap::new();
        sets.insert(0, CommandSet::default_flat());
        sets.insert(10, CommandSet::default_incline());
        sets.insert(-10, CommandSet::default_decline());
        Self { sets }
    }
}

impl SetLibrary {
    pub fn flat_only(set: CommandSet) -> Self {
        Self { sets: BTreeMap::from([(0, set)]) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sets.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if !self.sets.contains_key(&0) {
            return Err(Error::InvalidSet("library has no flat-ground (0°) set".into()));
        }
        self.sets.values().try_for_each(CommandSet::validate)
    }

    /// Registered slope nearest to `slope_deg`; ties go to the smaller magnitude.
    pub fn nearest_key(&self, slope_deg: f64) -> Result<i32> {
        self.sets
            .keys()
            .copied()
            .min_by(|&a, &b| {
                let da = (a as f64 - slope_deg).abs();
                let db = (b as f64 - slope_deg).abs();
                da.total_cmp(&db).then(a.abs().cmp(&b.abs()))
            })
            .ok_or(Error::EmptyLibrary)
    }
}

pub fn select_set(library: &SetLibrary, slope_deg: f64) -> Result<&CommandSet> {
    let key = library.nearest_key(slope_deg)?;
    Ok(&library.sets[&key])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_round_trips_through_toml() {
        let lib = SetLibrary::default();
        let text = toml::to_string(&lib).unwrap();
        let back: SetLibrary = toml::from_str(&text).unwrap();
        assert_eq!(back, lib);
    }

    #[test]
    fn centroid_is_inside() {
        let s = CommandSet::default_flat();
        assert!(s.contains(s.centroid(), DEFAULT_CONTAINS_TOL));
    }

    #[test]
    fn fastest_gait_is_on_the_boundary() {
        assert!(CommandSet::default_flat().contains([1.2, 0.0, 0.95], DEFAULT_CONTAINS_TOL));
    }

    #[test]
    fn cannot_walk_fast_when_low() {
        let s = CommandSet::default_flat();
        assert!(!s.contains([1.2, 0.0, 0.70], DEFAULT_CONTAINS_TOL));
        assert!(s.margin([1.2, 0.0, 0.70]) > 0.1);
    }

    #[test]
    fn default_sets_validate() {
        SetLibrary::default().validate().unwrap();
    }

    #[test]
    fn too_few_or_flat_vertices_rejected() {
        let y = [-0.3, 0.3];
        assert!(CommandSet::new(vec![[0.0, 0.0, 0.8], [0.1, 0.0, 0.8], [0.0, 0.1, 0.8]], y, 0.0).is_err());
        let coplanar = vec![[0.0, 0.0, 0.8], [0.1, 0.0, 0.8], [0.0, 0.1, 0.8], [0.1, 0.1, 0.8]];
        assert!(CommandSet::new(coplanar, y, 0.0).is_err());
        let tet = vec![[0.0, 0.0, 0.8], [0.1, 0.0, 0.8], [0.0, 0.1, 0.8], [0.0, 0.0, 0.9]];
        assert!(CommandSet::new(tet.clone(), y, 0.0).is_ok());
        assert!(CommandSet::new(tet, [-0.2, 0.3], 0.0).is_err());
    }

    #[test]
    fn block_shape() {
        let mut s = CommandSet::default_flat();
        s.vertices.truncate(8);
        let b = barycentric_constraints(&s, 3);
        assert_eq!((b.num_weights(), b.num_slacks(), b.num_equalities()), (8, 1, 4));
        assert_eq!(b.node_index, 3);
    }

    #[test]
    fn block_residual_vanishes_at_hull_weights() {
        let s = CommandSet::default_flat();
        let p = [0.3, 0.05, 0.85];
        let h = s.hull_distance(p);
        assert!(h.distance < 1e-9);
        let r = barycentric_constraints(&s, 0).residual(p, &h.weights, 0.0);
        assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");
    }

    #[test]
    fn select_nearest_slope() {
        let lib = SetLibrary::default();
        assert_eq!(select_set(&lib, 0.0).unwrap().slope_angle, 0.0);
        assert_eq!(select_set(&lib, 4.0).unwrap().slope_angle, 0.0);
        assert_eq!(select_set(&lib, 6.0).unwrap().slope_angle, 10.0);
        assert_eq!(select_set(&lib, 5.0).unwrap().slope_angle, 0.0);
        assert_eq!(select_set(&lib, -5.0).unwrap().slope_angle, 0.0);
        let decl = select_set(&lib, -10.0).unwrap();
        assert_eq!(decl.slope_angle, -10.0);
        assert!(decl.bounding_box()[2][0] > CommandSet::default_flat().bounding_box()[2][0]);
    }

    #[test]
    fn empty_library_errors() {
        let lib = SetLibrary { sets: BTreeMap::new() };
        assert!(matches!(select_set(&lib, 0.0), Err(Error::EmptyLibrary)));
    }

    #[test]
    fn projection_lands_in_hull() {
        let s = CommandSet::default_flat();
        let q = s.project([1.2, 0.0, 0.7]);
        assert!(s.contains(q, 1e-9));
    }
}
