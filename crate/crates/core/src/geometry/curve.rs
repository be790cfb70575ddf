use std::f64::consts::PI;

use nalgebra::Vector2;

use super::{radial_profile_derivs, MeshId, Profile};
use crate::error::{Error, Result};

type V2 = Vector2<f64>;

/// Closed curve sampled at `N` equispaced parameter values `t_i = 2 pi i / N`.
///
/// Besides nodes and normals the mesh keeps the first and second parametric
/// derivatives, which the logarithmic product quadrature and the inversion
/// map both need.
#[derive(Debug, Clone)]
pub struct CurveMesh {
    nodes: Vec<V2>,
    d1: Vec<V2>,
    d2: Vec<V2>,
    normals: Vec<V2>,
    weights: Vec<f64>,
    curvature: Vec<f64>,
    speed: Vec<f64>,
    refinement: usize,
    id: MeshId,
}

impl CurveMesh {
    pub(crate) fn from_profile(profile: &Profile, n: usize, offset: [f64; 2]) -> Result<Self> {
        let shift = V2::new(offset[0], offset[1]);
        let mut nodes = Vec::with_capacity(n);
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n {
            let t = 2.0 * PI * i as f64 / n as f64;
            let (s, c) = t.sin_cos();
            let (x, dx, ddx) = match profile {
                Profile::Circle(r) => (
                    V2::new(r * c, r * s),
                    V2::new(-r * s, r * c),
                    V2::new(-r * c, -r * s),
                ),
                Profile::Ellipse(a, b) => (
                    V2::new(a * c, b * s),
                    V2::new(-a * s, b * c),
                    V2::new(-a * c, -b * s),
                ),
                Profile::Star(coeffs) => {
                    let (r, dr, ddr) = radial_profile_derivs(coeffs, t);
                    let e = V2::new(c, s);
                    let f = V2::new(-s, c);
                    (r * e, dr * e + r * f, ddr * e + 2.0 * dr * f - r * e)
                }
                _ => return Err(Error::InvalidShape("not a planar profile".into())),
            };
            nodes.push(x + shift);
            d1.push(dx);
            d2.push(ddx);
        }
        Self::from_parametric(nodes, d1, d2, None, n)
    }

    /// Assemble a curve from parametric samples. Normals default to the
    /// clockwise rotation of the tangent; either way the global orientation
    /// is fixed so that the divergence identity gives a positive area.
    pub(crate) fn from_parametric(
        nodes: Vec<V2>,
        d1: Vec<V2>,
        d2: Vec<V2>,
        normals: Option<Vec<V2>>,
        refinement: usize,
    ) -> Result<Self> {
        let n = nodes.len();
        let h = 2.0 * PI / n as f64;
        let speed: Vec<f64> = d1.iter().map(|d| d.norm()).collect();
        if speed.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Singular("curve parametrization has zero speed".into()));
        }
        let weights: Vec<f64> = speed.iter().map(|s| h * s).collect();
        let mut normals = normals.unwrap_or_else(|| {
            d1.iter()
                .map(|d| V2::new(d.y, -d.x).normalize())
                .collect()
        });
        let flux: f64 = (0..n).map(|i| weights[i] * nodes[i].dot(&normals[i])).sum();
        if flux < 0.0 {
            normals.iter_mut().for_each(|v| *v = -*v);
        }
        let curvature = (0..n)
            .map(|i| -d2[i].dot(&normals[i]) / (speed[i] * speed[i]))
            .collect();
        let id = MeshId::digest(
            nodes
                .iter()
                .chain(&normals)
                .flat_map(|v| [v.x, v.y])
                .chain(weights.iter().copied()),
            "curve",
        );
        Ok(CurveMesh {
            nodes,
            d1,
            d2,
            normals,
            weights,
            curvature,
            speed,
            refinement,
            id,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[V2] {
        &self.nodes
    }

    pub fn normals(&self) -> &[V2] {
        &self.normals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Signed curvature with respect to the outward normal (positive on
    /// convex arcs).
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    /// `|x'(t)|` at each node.
    pub fn param_speed(&self) -> &[f64] {
        &self.speed
    }

    pub fn tangents(&self) -> &[V2] {
        &self.d1
    }

    pub fn accelerations(&self) -> &[V2] {
        &self.d2
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    pub fn id(&self) -> &MeshId {
        &self.id
    }

    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.len() as f64
    }

    /// Parameter value of node `i`.
    pub fn param(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.len() as f64
    }

    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                best = best.max((a - b).norm_squared());
            }
        }
        best.sqrt()
    }

    /// Dilation `x -> factor * x` about the origin.
    pub fn scaled(&self, factor: f64) -> CurveMesh {
        let scale = |v: &Vec<V2>| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        CurveMesh::from_parametric(
            scale(&self.nodes),
            scale(&self.d1),
            scale(&self.d2),
            Some(self.normals.clone()),
            self.refinement,
        )
        .expect("dilation preserves a valid curve")
    }

    /// The curve dilated to diameter at most 1/2, where the negated
    /// logarithmic single layer is positive definite. Returns the factor
    /// applied (1 when already small enough).
    pub fn energy_scaled(&self) -> (CurveMesh, f64) {
        let diameter = self.diameter();
        if diameter <= 0.5 {
            (self.clone(), 1.0)
        } else {
            let factor = 0.5 / diameter;
            (self.scaled(factor), factor)
        }
    }

    pub(crate) fn winding_number(&self, q: &[f64]) -> f64 {
        let q = V2::new(q[0], q[1]);
        let n = self.len();
        let total: f64 = (0..n)
            .map(|i| {
                let a = self.nodes[i] - q;
                let b = self.nodes[(i + 1) % n] - q;
                (a.x * b.y - a.y * b.x).atan2(a.dot(&b))
            })
            .sum();
        (total / (2.0 * PI)).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_shape, Mesh, ShapeSpec};

    fn curve(spec: ShapeSpec) -> CurveMesh {
        match build_shape(&spec).unwrap() {
            Mesh::Curve(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn ellipse_divergence_identity() {
        let c = curve(ShapeSpec::ellipse(2.0, 1.0, 128));
        let flux: f64 = (0..c.len())
            .map(|i| c.weights()[i] * c.nodes()[i].dot(&c.normals()[i]))
            .sum();
        assert!((flux - 2.0 * 2.0 * PI).abs() < 1e-10, "{flux}");
    }

    #[test]
    fn ellipse_curvature_matches_closed_form() {
        let c = curve(ShapeSpec::ellipse(2.0, 1.0, 64));
        for i in 0..c.len() {
            let t = c.param(i);
            let exact = 2.0 / (4.0 * t.sin().powi(2) + t.cos().powi(2)).powf(1.5);
            assert!((c.curvature()[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn star_curve_normals_are_outward_and_unit() {
        let c = curve(ShapeSpec::star2d(vec![1.0, 0.0, 0.0, 0.3], 96));
        for (x, n) in c.nodes().iter().zip(c.normals()) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            // star-shaped about the origin
            assert!(x.dot(n) > 0.0);
        }
        // concave arcs exist on this three-lobed star
        assert!(c.curvature().iter().any(|&k| k < 0.0));
    }

    #[test]
    fn energy_scaling_reaches_half_diameter() {
        let c = curve(ShapeSpec::ellipse(2.0, 1.0, 64));
        let (s, factor) = c.energy_scaled();
        assert!((factor - 0.125).abs() < 1e-12);
        assert!((s.diameter() - 0.5).abs() < 1e-12);
        assert!((s.curvature()[0] - c.curvature()[0] / factor).abs() < 1e-9);
    }
}
