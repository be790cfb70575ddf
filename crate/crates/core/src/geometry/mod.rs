//! Discrete closed curves and surfaces.
//!
//! Curves are sampled uniformly in their parameter (Nyström nodes); surfaces
//! are flat-triangle panels obtained by pushing a frequency-`n` icosahedral
//! grid through a surface-of-revolution profile, collocated at one smooth
//! surface point per panel.

mod curve;
mod invert;
mod scan;
mod surface;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use curve::CurveMesh;
pub use invert::{invert_shape, InversionConfig, Position};
pub use scan::{
    concavity_scan, find_witness_center, find_witness_center_with, gaussian_curvature_min,
    ConcavityReport, PatchSuggestion, WitnessObjective, WitnessSearch,
};
pub use surface::SurfaceMesh;

/// Smallest accepted refinement level.
pub const MIN_REFINEMENT: usize = 8;

/// Content hash identifying a mesh; operators and densities carry it so that
/// mismatched operands are caught.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeshId(String);

impl MeshId {
    pub(crate) fn digest(chunks: impl IntoIterator<Item = f64>, tag: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(tag.as_bytes());
        for v in chunks {
            hasher.update(v.to_le_bytes());
        }
        let out = hasher.finalize();
        MeshId(out[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MeshId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    Ellipse,
    Star2d,
    Sphere,
    Spheroid,
    Star3d,
}

impl ShapeKind {
    pub fn dimension(self) -> usize {
        match self {
            ShapeKind::Circle | ShapeKind::Ellipse | ShapeKind::Star2d => 2,
            ShapeKind::Sphere | ShapeKind::Spheroid | ShapeKind::Star3d => 3,
        }
    }
}

/// Kind-specific parameters. Only the fields relevant to the kind are read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Radial profile `r(t) = c0 + sum_k c_k cos(k t)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

/// Declarative description of a shape family member and its resolution.
///
/// In 2D `refinement` is the number of Nyström nodes. In 3D it is the
/// subdivision frequency of each icosahedral face, giving `20 n^2` panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub dimension: usize,
    pub kind: ShapeKind,
    #[serde(default)]
    pub params: ShapeParams,
    pub refinement: usize,
    #[serde(default)]
    pub center_offset: Vec<f64>,
}

impl ShapeSpec {
    fn new(kind: ShapeKind, params: ShapeParams, refinement: usize) -> Self {
        let dimension = kind.dimension();
        ShapeSpec {
            dimension,
            kind,
            params,
            refinement,
            center_offset: vec![0.0; dimension],
        }
    }

    pub fn circle(radius: f64, nodes: usize) -> Self {
        let params = ShapeParams {
            radius: Some(radius),
            ..Default::default()
        };
        Self::new(ShapeKind::Circle, params, nodes)
    }

    pub fn ellipse(a: f64, b: f64, nodes: usize) -> Self {
        let params = ShapeParams {
            a: Some(a),
            b: Some(b),
            ..Default::default()
        };
        Self::new(ShapeKind::Ellipse, params, nodes)
    }

    pub fn star2d(coeffs: Vec<f64>, nodes: usize) -> Self {
        let params = ShapeParams {
            coeffs: Some(coeffs),
            ..Default::default()
        };
        Self::new(ShapeKind::Star2d, params, nodes)
    }

    pub fn sphere(radius: f64, refinement: usize) -> Self {
        let params = ShapeParams {
            radius: Some(radius),
            ..Default::default()
        };
        Self::new(ShapeKind::Sphere, params, refinement)
    }

    /// Spheroid with equatorial semi-axis `a` and polar semi-axis `c`.
    pub fn spheroid(a: f64, c: f64, refinement: usize) -> Self {
        let params = ShapeParams {
            a: Some(a),
            c: Some(c),
            ..Default::default()
        };
        Self::new(ShapeKind::Spheroid, params, refinement)
    }

    pub fn star3d(coeffs: Vec<f64>, refinement: usize) -> Self {
        let params = ShapeParams {
            coeffs: Some(coeffs),
            ..Default::default()
        };
        Self::new(ShapeKind::Star3d, params, refinement)
    }

    /// The dumbbell `r(theta) = 1 + 0.7 cos(2 theta)` used throughout the tests.
    pub fn dumbbell(refinement: usize) -> Self {
        Self::star3d(vec![1.0, 0.0, 0.7], refinement)
    }

    pub fn with_offset(mut self, offset: &[f64]) -> Self {
        self.center_offset = offset.to_vec();
        self
    }

    pub fn with_refinement(mut self, refinement: usize) -> Self {
        self.refinement = refinement;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ShapeSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("shape spec serializes")
    }

    fn param(&self, value: Option<f64>, name: &str) -> Result<f64> {
        match value {
            Some(v) if v.is_finite() && v > 0.0 => Ok(v),
            Some(v) => Err(Error::InvalidShape(format!(
                "{:?}: parameter `{name}` must be positive, got {v}",
                self.kind
            ))),
            None => Err(Error::InvalidShape(format!(
                "{:?}: missing parameter `{name}`",
                self.kind
            ))),
        }
    }

    fn coeffs(&self) -> Result<&[f64]> {
        let coeffs = self.params.coeffs.as_deref().ok_or_else(|| {
            Error::InvalidShape(format!("{:?}: missing parameter `coeffs`", self.kind))
        })?;
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidShape(format!(
                "{:?}: `coeffs` must be a nonempty list of finite numbers",
                self.kind
            )));
        }
        // Dense sampling of the trigonometric profile; the bound
        // c0 - sum |ck| is sufficient but rejects valid shapes.
        let samples = 4096 * coeffs.len();
        let (worst, at) = (0..=samples)
            .map(|s| {
                let t = std::f64::consts::PI * s as f64 / samples as f64;
                (radial_profile(coeffs, t), t)
            })
            .fold((f64::INFINITY, 0.0), |acc, v| if v.0 < acc.0 { v } else { acc });
        if worst <= 0.0 {
            return Err(Error::InvalidShape(format!(
                "{:?}: radial profile is nonpositive (r = {worst:.4} at angle {at:.4})",
                self.kind
            )));
        }
        Ok(coeffs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != self.kind.dimension() {
            return Err(Error::InvalidShape(format!(
                "{:?} is a {}D shape but dimension {} was given",
                self.kind,
                self.kind.dimension(),
                self.dimension
            )));
        }
        if self.refinement < MIN_REFINEMENT {
            return Err(Error::InvalidShape(format!(
                "refinement {} is below the minimum {MIN_REFINEMENT}",
                self.refinement
            )));
        }
        if !self.center_offset.is_empty() && self.center_offset.len() != self.dimension {
            return Err(Error::InvalidShape(format!(
                "center_offset has {} components, expected {}",
                self.center_offset.len(),
                self.dimension
            )));
        }
        if self.center_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("center_offset must be finite".into()));
        }
        self.profile().map(|_| ())
    }

    fn offset(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, v) in out.iter_mut().zip(&self.center_offset) {
            *o = *v;
        }
        out
    }

    pub(crate) fn profile(&self) -> Result<Profile> {
        let p = &self.params;
        Ok(match self.kind {
            ShapeKind::Circle => Profile::Circle(self.param(p.radius, "radius")?),
            ShapeKind::Ellipse => {
                Profile::Ellipse(self.param(p.a, "a")?, self.param(p.b, "b")?)
            }
            ShapeKind::Star2d => Profile::Star(self.coeffs()?.to_vec()),
            ShapeKind::Sphere => Profile::Sphere(self.param(p.radius, "radius")?),
            ShapeKind::Spheroid => {
                Profile::Spheroid(self.param(p.a, "a")?, self.param(p.c, "c")?)
            }
            ShapeKind::Star3d => Profile::Star(self.coeffs()?.to_vec()),
        })
    }
}

/// `r(t) = c0 + sum_k c_k cos(k t)` and its first two derivatives.
pub(crate) fn radial_profile_derivs(coeffs: &[f64], t: f64) -> (f64, f64, f64) {
    coeffs
        .iter()
        .enumerate()
        .fold((0.0, 0.0, 0.0), |(r, dr, ddr), (k, &c)| {
            let k = k as f64;
            let (s, co) = (k * t).sin_cos();
            (r + c * co, dr - k * c * s, ddr - k * k * c * co)
        })
}

pub(crate) fn radial_profile(coeffs: &[f64], t: f64) -> f64 {
    radial_profile_derivs(coeffs, t).0
}

#[derive(Debug, Clone)]
pub(crate) enum Profile {
    Circle(f64),
    Ellipse(f64, f64),
    Sphere(f64),
    Spheroid(f64, f64),
    Star(Vec<f64>),
}

/// A discretized boundary, curve or surface.
#[derive(Debug, Clone)]
pub enum Mesh {
    Curve(CurveMesh),
    Surface(SurfaceMesh),
}

impl Mesh {
    pub fn dimension(&self) -> usize {
        match self {
            Mesh::Curve(_) => 2,
            Mesh::Surface(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Mesh::Curve(m) => m.len(),
            Mesh::Surface(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self) -> &MeshId {
        match self {
            Mesh::Curve(m) => m.id(),
            Mesh::Surface(m) => m.id(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Mesh::Curve(m) => m.weights(),
            Mesh::Surface(m) => m.weights(),
        }
    }

    pub fn refinement(&self) -> usize {
        match self {
            Mesh::Curve(m) => m.refinement(),
            Mesh::Surface(m) => m.refinement(),
        }
    }

    /// Typical node spacing: mean arclength weight in 2D, square root of the
    /// mean panel weight in 3D.
    pub fn spacing(&self) -> f64 {
        match self {
            Mesh::Curve(m) => m.spacing(),
            Mesh::Surface(m) => m.spacing(),
        }
    }

    /// Node `i` padded to three components.
    pub fn node(&self, i: usize) -> [f64; 3] {
        match self {
            Mesh::Curve(m) => {
                let x = m.nodes()[i];
                [x.x, x.y, 0.0]
            }
            Mesh::Surface(m) => {
                let x = m.nodes()[i];
                [x.x, x.y, x.z]
            }
        }
    }

    /// Normal `i` padded to three components.
    pub fn normal(&self, i: usize) -> [f64; 3] {
        match self {
            Mesh::Curve(m) => {
                let x = m.normals()[i];
                [x.x, x.y, 0.0]
            }
            Mesh::Surface(m) => {
                let x = m.normals()[i];
                [x.x, x.y, x.z]
            }
        }
    }

    /// Nodal curvature: signed curvature in 2D, Gaussian curvature in 3D
    /// (absent on inverted surfaces).
    pub fn curvature(&self) -> Option<&[f64]> {
        match self {
            Mesh::Curve(m) => Some(m.curvature()),
            Mesh::Surface(m) => m.curvature(),
        }
    }

    /// Divergence-theorem volume (area in 2D): `sum w (x . nu) / d`.
    pub fn enclosed_measure(&self) -> f64 {
        let d = self.dimension() as f64;
        (0..self.len())
            .map(|i| {
                let (x, n) = (self.node(i), self.normal(i));
                self.weights()[i] * (x[0] * n[0] + x[1] * n[1] + x[2] * n[2])
            })
            .sum::<f64>()
            / d
    }

    /// Distance from `q` to the nearest node, with that node's index.
    pub fn nearest_node(&self, q: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.len() {
            let x = self.node(i);
            let d2: f64 = (0..self.dimension()).map(|k| (x[k] - q[k]).powi(2)).sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    /// Local spacing at node `i`.
    pub fn local_spacing(&self, i: usize) -> f64 {
        match self {
            Mesh::Curve(m) => m.weights()[i],
            Mesh::Surface(m) => m.weights()[i].sqrt(),
        }
    }

    /// Winding number (2D) or solid-angle fraction (3D) of the boundary
    /// around `q`: close to 1 inside, close to 0 outside.
    pub fn winding(&self, q: &[f64]) -> f64 {
        match self {
            Mesh::Curve(m) => m.winding_number(q),
            Mesh::Surface(m) => m.solid_angle_fraction(q),
        }
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        self.winding(q) > 0.5
    }

    /// Plain-text table, one row per node: coordinates, normal, weight,
    /// curvature (`nan` when unavailable).
    pub fn to_table(&self) -> String {
        let d = self.dimension();
        let axes = ["x", "y", "z"];
        let mut out = String::new();
        out.push_str("# index");
        for a in &axes[..d] {
            out.push_str(&format!(" {a}"));
        }
        for a in &axes[..d] {
            out.push_str(&format!(" n{a}"));
        }
        out.push_str(" weight curvature\n");
        let curv = self.curvature();
        for i in 0..self.len() {
            let (x, n) = (self.node(i), self.normal(i));
            out.push_str(&i.to_string());
            for v in x[..d].iter().chain(&n[..d]) {
                out.push_str(&format!(" {v:.16e}"));
            }
            let k = curv.map_or(f64::NAN, |c| c[i]);
            out.push_str(&format!(" {:.16e} {k:.16e}\n", self.weights()[i]));
        }
        out
    }
}

/// Realize a shape specification as a discrete boundary.
pub fn build_shape(spec: &ShapeSpec) -> Result<Mesh> {
    spec.validate()?;
    let profile = spec.profile()?;
    let offset = spec.offset();
    match spec.dimension {
        2 => Ok(Mesh::Curve(CurveMesh::from_profile(
            &profile,
            spec.refinement,
            [offset[0], offset[1]],
        )?)),
        _ => Ok(Mesh::Surface(SurfaceMesh::from_profile(
            &profile,
            spec.refinement,
            offset,
        )?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"dimension":3,"kind":"star3d","params":{"coeffs":[1.0,0.0,0.7]},"refinement":8,"center_offset":[0,0,0]}"#;
        let spec = ShapeSpec::from_json(text).unwrap();
        assert_eq!(spec, ShapeSpec::dumbbell(8));
        assert_eq!(ShapeSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn rejects_small_refinement() {
        let err = build_shape(&ShapeSpec::dumbbell(4)).unwrap_err();
        assert!(err.to_string().contains("refinement"));
    }

    #[test]
    fn rejects_nonpositive_profile() {
        let err = build_shape(&ShapeSpec::star3d(vec![1.0, 0.0, 1.2], 8)).unwrap_err();
        assert!(err.to_string().contains("nonpositive"), "{err}");
        let err = build_shape(&ShapeSpec::star2d(vec![0.5, 0.6], 16)).unwrap_err();
        assert!(err.to_string().contains("nonpositive"), "{err}");
    }

    #[test]
    fn rejects_dimension_and_param_errors() {
        let mut spec = ShapeSpec::sphere(1.0, 8);
        spec.dimension = 2;
        assert!(build_shape(&spec).is_err());
        assert!(build_shape(&ShapeSpec::ellipse(2.0, -1.0, 16)).is_err());
        let mut spec = ShapeSpec::circle(1.0, 16);
        spec.params.radius = None;
        assert!(build_shape(&spec).is_err());
        assert!(build_shape(&ShapeSpec::circle(1.0, 16).with_offset(&[0.0])).is_err());
    }

    #[test]
    fn unit_circle_basics() {
        let mesh = build_shape(&ShapeSpec::circle(1.0, 64)).unwrap();
        assert_eq!(mesh.len(), 64);
        let total: f64 = mesh.weights().iter().sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        for &k in mesh.curvature().unwrap() {
            assert!((k - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_sphere_area() {
        let mesh = build_shape(&ShapeSpec::sphere(1.0, 16)).unwrap();
        assert_eq!(mesh.len(), 20 * 16 * 16);
        let total: f64 = mesh.weights().iter().sum();
        assert!((total / (4.0 * PI) - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn point_in_domain() {
        let mesh = build_shape(&ShapeSpec::dumbbell(8)).unwrap();
        assert!(mesh.contains(&[0.0, 0.0, 1.0]));
        assert!(mesh.contains(&[0.0, 0.0, -1.2]));
        assert!(!mesh.contains(&[0.5, 0.0, 0.0]));
        assert!(!mesh.contains(&[3.0, 0.0, 0.0]));
        let curve = build_shape(&ShapeSpec::ellipse(2.0, 1.0, 64)).unwrap();
        assert!(curve.contains(&[1.5, 0.0, 0.0]));
        assert!(!curve.contains(&[0.0, 1.5, 0.0]));
    }

    #[test]
    fn table_has_one_row_per_node() {
        let mesh = build_shape(&ShapeSpec::circle(1.0, 16)).unwrap();
        let table = mesh.to_table();
        assert_eq!(table.lines().count(), 17);
        assert!(table.starts_with("# index x y nx ny weight curvature"));
    }
}
