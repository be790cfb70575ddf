use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::error::{Error, Result};

/// Suggested patch on which `(x - p) . nu < 0`: a boundary node and a
/// chordal radius such that every node strictly inside the ball violates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSuggestion {
    pub center_index: usize,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Outcome of scanning `(x - p) . nu_x` over the nodes of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub center: Vec<f64>,
    pub min_value: f64,
    pub argmin: usize,
    pub argmin_point: Vec<f64>,
    pub violating_nodes: Vec<usize>,
    pub patch_suggestion: Option<PatchSuggestion>,
}

impl ConcavityReport {
    pub fn is_concave(&self) -> bool {
        self.min_value < 0.0
    }

    /// Nodes inside the suggested patch.
    pub fn patch_nodes(&self, mesh: &Mesh) -> Vec<usize> {
        let Some(patch) = &self.patch_suggestion else {
            return Vec::new();
        };
        (0..mesh.len())
            .filter(|&i| dist(&mesh.node(i), &patch.center) < patch.radius)
            .collect()
    }
}

fn dist(a: &[f64; 3], b: &[f64]) -> f64 {
    b.iter()
        .enumerate()
        .map(|(k, v)| (a[k] - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn support_values(mesh: &Mesh, p: &[f64]) -> Vec<f64> {
    (0..mesh.len())
        .map(|i| {
            let (x, n) = (mesh.node(i), mesh.normal(i));
            p.iter().enumerate().map(|(k, pk)| (x[k] - pk) * n[k]).sum()
        })
        .collect()
}

/// Nodal minimum of `(x - p) . nu_x` with the violating set and a patch
/// suggestion.
///
/// The patch is centered at the violating node whose nearest non-violating
/// node is farthest away; that distance is the chordal radius. Ties go to
/// the larger violation.
pub fn concavity_scan(mesh: &Mesh, p: &[f64]) -> ConcavityReport {
    assert_eq!(p.len(), mesh.dimension(), "center dimension mismatch");
    let values = support_values(mesh, p);
    let (argmin, min_value) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a });
    let violating: Vec<usize> = (0..values.len()).filter(|&i| values[i] < 0.0).collect();
    let safe: Vec<[f64; 3]> = (0..values.len())
        .filter(|&i| values[i] >= 0.0)
        .map(|i| mesh.node(i))
        .collect();

    let clearances: Vec<f64> = violating
        .par_iter()
        .map(|&i| {
            let x = mesh.node(i);
            safe.iter()
                .map(|y| dist(&x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let patch_suggestion = violating
        .iter()
        .zip(&clearances)
        .fold(None::<(usize, f64)>, |best, (&i, &c)| match best {
            Some((j, cj)) if cj > c || (cj == c && values[j] <= values[i]) => Some((j, cj)),
            _ => Some((i, c)),
        })
        .map(|(i, c)| {
            // a fully violating boundary has no finite clearance
            let radius = if c.is_finite() { c } else { diameter_bound(mesh) };
            PatchSuggestion {
                center_index: i,
                center: mesh.node(i)[..mesh.dimension()].to_vec(),
                radius,
            }
        });

    ConcavityReport {
        center: p.to_vec(),
        min_value,
        argmin,
        argmin_point: mesh.node(argmin)[..mesh.dimension()].to_vec(),
        violating_nodes: violating,
        patch_suggestion,
    }
}

fn bounding_box(mesh: &Mesh) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for i in 0..mesh.len() {
        let x = mesh.node(i);
        for k in 0..3 {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    (lo, hi)
}

fn diameter_bound(mesh: &Mesh) -> f64 {
    let (lo, hi) = bounding_box(mesh);
    (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
}

/// Nodal minimum of the Gaussian curvature: `(value, node, point)`.
pub fn gaussian_curvature_min(mesh: &Mesh) -> Result<(f64, usize, [f64; 3])> {
    let Mesh::Surface(surface) = mesh else {
        return Err(Error::Unsupported(
            "Gaussian curvature is defined for surfaces; use the signed curvature of a curve".into(),
        ));
    };
    let curvature = surface.curvature().ok_or_else(|| {
        Error::Unsupported("mesh carries no parametric curvature (e.g. an inverted surface)".into())
    })?;
    let (i, k) = curvature
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a });
    Ok((k, i, mesh.node(i)))
}

/// Ranking of lattice candidates in the witness-center search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessObjective {
    /// Largest violation `-min (x - p) . nu`.
    Violation,
    /// Largest violation times the distance from `p` to the nearest node.
    /// Keeps `p` away from the boundary, where the inverted surface is
    /// strongly distorted.
    Clearance,
}

/// Lattice used by the witness-center search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearch {
    /// Cell-centered points per axis over the bounding box.
    pub resolution: usize,
    /// Minimum distance to the boundary in units of local node spacing.
    pub margin: f64,
    pub objective: WitnessObjective,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        WitnessSearch {
            resolution: 17,
            margin: 1.0,
            objective: WitnessObjective::Violation,
        }
    }
}

/// Interior center maximizing the concavity violation, with its report.
pub fn find_witness_center(mesh: &Mesh) -> Option<(Vec<f64>, ConcavityReport)> {
    find_witness_center_with(mesh, &WitnessSearch::default())
}

pub fn find_witness_center_with(
    mesh: &Mesh,
    search: &WitnessSearch,
) -> Option<(Vec<f64>, ConcavityReport)> {
    let d = mesh.dimension();
    let n = search.resolution.max(1);
    let (lo, hi) = bounding_box(mesh);
    let axis = |k: usize, j: usize| lo[k] + (j as f64 + 0.5) * (hi[k] - lo[k]) / n as f64;
    let total = n.pow(d as u32);
    let candidates: Vec<Option<(Vec<f64>, f64)>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut q = [0.0; 3];
            let mut rest = flat;
            for (k, qk) in q.iter_mut().enumerate().take(d) {
                *qk = axis(k, rest % n);
                rest /= n;
            }
            let (near, distance) = mesh.nearest_node(&q);
            if distance <= search.margin * mesh.local_spacing(near) || !mesh.contains(&q) {
                return None;
            }
            let p = q[..d].to_vec();
            let min = support_values(mesh, &p)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if min >= 0.0 {
                return None;
            }
            let score = match search.objective {
                WitnessObjective::Violation => min,
                WitnessObjective::Clearance => min * distance,
            };
            Some((p, score))
        })
        .collect();
    let best = candidates
        .into_iter()
        .flatten()
        .fold(None::<(Vec<f64>, f64)>, |best, (p, v)| match best {
            Some(b) if b.1 <= v => Some(b),
            _ => Some((p, v)),
        })?;
    let report = concavity_scan(mesh, &best.0);
    Some((best.0, report))
}
