use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{CurveMesh, Mesh, SurfaceMesh};
use crate::error::{Error, Result};

/// Where the inversion center sits relative to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Interior,
    Exterior,
}

/// Inversion `T x = p + r^2 (x - p) / |x - p|^2` together with the position
/// flag of its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    pub position: Position,
}

impl InversionConfig {
    /// Radius used when none is given; the spectrum does not depend on it.
    pub const DEFAULT_RADIUS: f64 = 1.0;

    /// Validate `center` against `mesh` and classify it with the winding
    /// (2D) or solid-angle (3D) test.
    pub fn new(mesh: &Mesh, center: &[f64], radius: f64) -> Result<Self> {
        let center = check_center(mesh, center, radius)?;
        let position = if mesh.contains(&pad(&center)) {
            Position::Interior
        } else {
            Position::Exterior
        };
        Ok(InversionConfig {
            center,
            radius,
            position,
        })
    }

    /// As [`InversionConfig::new`], insisting on a given position.
    pub fn with_position(
        mesh: &Mesh,
        center: &[f64],
        radius: f64,
        position: Position,
    ) -> Result<Self> {
        let cfg = Self::new(mesh, center, radius)?;
        if cfg.position != position {
            return Err(Error::Singular(format!(
                "center {center:?} is {:?} to the domain, not {position:?}",
                cfg.position
            )));
        }
        Ok(cfg)
    }

    /// `m` in the normal transformation: 0 for an interior center, 1 otherwise.
    pub fn m(&self) -> u8 {
        match self.position {
            Position::Interior => 0,
            Position::Exterior => 1,
        }
    }

    pub(crate) fn center3(&self) -> Vector3<f64> {
        let c = pad(&self.center);
        Vector3::new(c[0], c[1], c[2])
    }

    /// Image of a point.
    pub fn map_point(&self, x: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let q: f64 = u.iter().map(|v| v * v).sum();
        u.iter()
            .zip(&self.center)
            .map(|(v, c)| c + self.radius * self.radius * v / q)
            .collect()
    }
}

fn pad(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..v.len().min(3)].copy_from_slice(&v[..v.len().min(3)]);
    out
}

fn check_center(mesh: &Mesh, center: &[f64], radius: f64) -> Result<Vec<f64>> {
    if center.len() != mesh.dimension() {
        return Err(Error::Unsupported(format!(
            "inversion center has {} components for a {}D mesh",
            center.len(),
            mesh.dimension()
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Singular(format!("inversion radius must be positive, got {radius}")));
    }
    // Centers on the boundary are outside the scope of the transformation
    // formulas and are rejected.
    let (nearest, distance) = mesh.nearest_node(&pad(center));
    let spacing = mesh.local_spacing(nearest);
    if distance <= spacing {
        return Err(Error::NearBoundary {
            point: center.to_vec(),
            distance,
            spacing,
        });
    }
    Ok(center.to_vec())
}

/// Map a discrete boundary through the inversion: nodes by `T`, weights by
/// the Jacobian factor `(r/|x-p|)^(2(d-1))`, normals by the reflection
/// `(-1)^m (I - 2 u u^T)`, followed by a global orientation fix so that the
/// image normals point out of the image domain.
pub fn invert_shape(mesh: &Mesh, cfg: &InversionConfig) -> Result<Mesh> {
    if cfg.center.len() != mesh.dimension() {
        return Err(Error::Unsupported("inversion center dimension mismatch".into()));
    }
    let tol = 1e-12 * mesh.spacing();
    for i in 0..mesh.len() {
        let x = mesh.node(i);
        let d: f64 = (0..mesh.dimension())
            .map(|k| (x[k] - cfg.center[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        if d <= tol {
            return Err(Error::Singular(format!(
                "node {i} coincides with the inversion center"
            )));
        }
    }
    match mesh {
        Mesh::Curve(c) => invert_curve(c, cfg).map(Mesh::Curve),
        Mesh::Surface(s) => invert_surface(s, cfg).map(Mesh::Surface),
    }
}

fn sign(cfg: &InversionConfig) -> f64 {
    if cfg.m() == 0 {
        1.0
    } else {
        -1.0
    }
}

fn invert_curve(c: &CurveMesh, cfg: &InversionConfig) -> Result<CurveMesh> {
    type V2 = Vector2<f64>;
    let p = V2::new(cfg.center[0], cfg.center[1]);
    let r2 = cfg.radius * cfg.radius;
    let n = c.len();
    let (mut nodes, mut d1, mut d2, mut normals) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let u = c.nodes()[i] - p;
        let (x1, x2) = (c.tangents()[i], c.accelerations()[i]);
        let q = u.norm_squared();
        let a = u.dot(&x1);
        let da = x1.dot(&x1) + u.dot(&x2);
        nodes.push(p + u * (r2 / q));
        d1.push((x1 / q - u * (2.0 * a / (q * q))) * r2);
        d2.push(
            (x2 / q - x1 * (4.0 * a / (q * q)) - u * (2.0 * da / (q * q))
                + u * (8.0 * a * a / (q * q * q)))
                * r2,
        );
        let uh = u / q.sqrt();
        let nu = c.normals()[i];
        normals.push((nu - uh * (2.0 * uh.dot(&nu))) * sign(cfg));
    }
    CurveMesh::from_parametric(nodes, d1, d2, Some(normals), c.refinement())
}

fn invert_surface(s: &SurfaceMesh, cfg: &InversionConfig) -> Result<SurfaceMesh> {
    type V3 = Vector3<f64>;
    let p = cfg.center3();
    let r2 = cfg.radius * cfg.radius;
    let map = |x: &V3| {
        let u = x - p;
        p + u * (r2 / u.norm_squared())
    };
    let panels: Vec<[V3; 3]> = s.panels().iter().map(|t| t.map(|v| map(&v))).collect();
    let patches: Vec<[V3; 3]> = s.patches().iter().map(|t| t.map(|v| map(&v))).collect();
    let nodes: Vec<V3> = s.nodes().iter().map(map).collect();
    let weights: Vec<f64> = s
        .nodes()
        .iter()
        .zip(s.weights())
        .map(|(x, w)| w * (r2 / (x - p).norm_squared()).powi(2))
        .collect();
    let mut normals: Vec<V3> = s
        .nodes()
        .iter()
        .zip(s.normals())
        .map(|(x, nu)| {
            let uh = (x - p).normalize();
            (nu - uh * (2.0 * uh.dot(nu))) * sign(cfg)
        })
        .collect();
    let flux: f64 = (0..nodes.len())
        .map(|i| weights[i] * (nodes[i] - p).dot(&normals[i]))
        .sum();
    if flux < 0.0 {
        normals.iter_mut().for_each(|v| *v = -*v);
    }
    SurfaceMesh::from_parts(panels, patches, nodes, normals, weights, None, s.refinement())
}
