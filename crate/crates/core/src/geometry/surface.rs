use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{radial_profile_derivs, MeshId, Profile};
use crate::error::{Error, Result};

type V3 = Vector3<f64>;

/// Flat-triangle panel surface with one collocation node per panel.
///
/// Panel vertices lie on the smooth surface; the node is the surface point
/// above the panel's parametric centroid, and normal and Gaussian curvature
/// are evaluated there from the parametrization rather than from the
/// triangulation. Panel vertex order is counter-clockwise seen from outside.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    panels: Vec<[V3; 3]>,
    patches: Vec<[V3; 3]>,
    nodes: Vec<V3>,
    normals: Vec<V3>,
    weights: Vec<f64>,
    areas: Vec<f64>,
    curvature: Option<Vec<f64>>,
    refinement: usize,
    id: MeshId,
}

/// Samples of a surface of revolution about the z-axis at polar parameter
/// `t`: meridian `(rho, z)` with first and second derivatives.
struct Meridian {
    rho: f64,
    z: f64,
    drho: f64,
    dz: f64,
    ddrho: f64,
    ddz: f64,
}

fn meridian(profile: &Profile, t: f64) -> Meridian {
    let (s, c) = t.sin_cos();
    match *profile {
        Profile::Sphere(r) => ellipse_meridian(r, r, s, c),
        Profile::Spheroid(a, cz) => ellipse_meridian(a, cz, s, c),
        Profile::Star(ref coeffs) => {
            let (r, dr, ddr) = radial_profile_derivs(coeffs, t);
            Meridian {
                rho: r * s,
                z: r * c,
                drho: dr * s + r * c,
                dz: dr * c - r * s,
                ddrho: ddr * s + 2.0 * dr * c - r * s,
                ddz: ddr * c - 2.0 * dr * s - r * c,
            }
        }
        _ => unreachable!("planar profile passed to surface builder"),
    }
}

fn ellipse_meridian(a: f64, c: f64, s: f64, co: f64) -> Meridian {
    Meridian {
        rho: a * s,
        z: c * co,
        drho: a * co,
        dz: -c * s,
        ddrho: -a * s,
        ddz: -c * co,
    }
}

struct SurfacePoint {
    x: V3,
    normal: V3,
    gauss: f64,
}

fn surface_point(profile: &Profile, dir: &V3, offset: &V3) -> SurfacePoint {
    let t = dir.z.clamp(-1.0, 1.0).acos();
    let phi = dir.y.atan2(dir.x);
    let (sp, cp) = phi.sin_cos();
    let m = meridian(profile, t);
    let speed2 = m.drho * m.drho + m.dz * m.dz;
    let speed = speed2.sqrt();
    let x = V3::new(m.rho * cp, m.rho * sp, m.z) + offset;
    let normal = V3::new(-m.dz * cp, -m.dz * sp, m.drho) / speed;
    let bend = m.drho * m.ddz - m.dz * m.ddrho;
    let gauss = if m.rho.abs() > 1e-12 {
        m.dz * bend / (m.rho * speed2 * speed2)
    } else {
        // umbilic on the axis
        (bend / (speed2 * speed)).powi(2)
    };
    SurfacePoint { x, normal, gauss }
}

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

fn icosahedron_vertices() -> [V3; 12] {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    [
        V3::new(-1.0, g, 0.0),
        V3::new(1.0, g, 0.0),
        V3::new(-1.0, -g, 0.0),
        V3::new(1.0, -g, 0.0),
        V3::new(0.0, -1.0, g),
        V3::new(0.0, 1.0, g),
        V3::new(0.0, -1.0, -g),
        V3::new(0.0, 1.0, -g),
        V3::new(g, 0.0, -1.0),
        V3::new(g, 0.0, 1.0),
        V3::new(-g, 0.0, -1.0),
        V3::new(-g, 0.0, 1.0),
    ]
    .map(|v| v.normalize())
}

/// Unit-sphere triangles of the frequency-`n` geodesic subdivision.
fn geodesic_triangles(n: usize) -> Vec<[V3; 3]> {
    let verts = icosahedron_vertices();
    let mut out = Vec::with_capacity(20 * n * n);
    for face in ICOSAHEDRON_FACES {
        let (a, b, c) = (verts[face[0]], verts[face[1]], verts[face[2]]);
        let grid = |i: usize, j: usize| {
            let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
            (a + (b - a) * u + (c - a) * v).normalize()
        };
        for i in 0..n {
            for j in 0..n - i {
                out.push([grid(i, j), grid(i + 1, j), grid(i, j + 1)]);
                if i + j + 1 < n {
                    out.push([grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)]);
                }
            }
        }
    }
    out
}

pub(crate) fn triangle_area_normal(tri: &[V3; 3]) -> (f64, V3) {
    let cross = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let norm = cross.norm();
    (0.5 * norm, cross / norm)
}

/// Signed solid angle subtended by a triangle at `q` (Van Oosterom-Strackee).
pub(crate) fn solid_angle(tri: &[V3; 3], q: &V3) -> f64 {
    let (a, b, c) = (tri[0] - q, tri[1] - q, tri[2] - q);
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * num.atan2(den)
}

/// Subdivision of each panel's curved patch used for near-field integrals.
pub(crate) const PATCH_SPLIT: usize = 4;

/// `m x m` flat sub-triangles with vertices on the surface above a
/// direction triangle.
fn patch_triangles(profile: &Profile, tri: &[V3; 3], offset: &V3, m: usize) -> Vec<[V3; 3]> {
    let point = |i: usize, j: usize| {
        let (u, v) = (i as f64 / m as f64, j as f64 / m as f64);
        let dir = (tri[0] + (tri[1] - tri[0]) * u + (tri[2] - tri[0]) * v).normalize();
        surface_point(profile, &dir, offset).x
    };
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m - i {
            out.push([point(i, j), point(i + 1, j), point(i, j + 1)]);
            if i + j + 1 < m {
                out.push([point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)]);
            }
        }
    }
    out
}

fn total_area(tris: &[[V3; 3]]) -> f64 {
    tris.iter().map(|t| triangle_area_normal(t).0).sum()
}

impl SurfaceMesh {
    pub(crate) fn from_profile(profile: &Profile, n: usize, offset: [f64; 3]) -> Result<Self> {
        let offset = V3::from(offset);
        let triangles = geodesic_triangles(n);
        let mut panels = Vec::with_capacity(triangles.len());
        let mut patches = Vec::with_capacity(triangles.len() * PATCH_SPLIT * PATCH_SPLIT);
        let mut weights = Vec::with_capacity(triangles.len());
        let mut nodes = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut curvature = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let verts = tri.map(|d| surface_point(profile, &d, &offset).x);
            let center = ((tri[0] + tri[1] + tri[2]) / 3.0).normalize();
            let sp = surface_point(profile, &center, &offset);
            let patch = patch_triangles(profile, tri, &offset, PATCH_SPLIT);
            // Richardson on the sub-triangulation removes its second-order error
            let fine = total_area(&patch_triangles(profile, tri, &offset, 2 * PATCH_SPLIT));
            weights.push((4.0 * fine - total_area(&patch)) / 3.0);
            patches.extend(patch);
            panels.push(verts);
            nodes.push(sp.x);
            normals.push(sp.normal);
            curvature.push(sp.gauss);
        }
        let mesh = Self::from_parts(panels, patches, nodes, normals, weights, Some(curvature), n)?;
        // outwardness against the parametric normal
        for (p, nu) in mesh.panels.iter().zip(&mesh.normals) {
            let (_, flat) = triangle_area_normal(p);
            if flat.dot(nu) <= 0.0 {
                return Err(Error::Singular(
                    "panel normal disagrees with the parametric normal".into(),
                ));
            }
        }
        Ok(mesh)
    }

    /// Assemble from per-panel data, reordering panel vertices to agree with
    /// the supplied normals. `patches` holds `PATCH_SPLIT^2` sub-triangles
    /// per panel.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        mut panels: Vec<[V3; 3]>,
        patches: Vec<[V3; 3]>,
        nodes: Vec<V3>,
        normals: Vec<V3>,
        weights: Vec<f64>,
        curvature: Option<Vec<f64>>,
        refinement: usize,
    ) -> Result<Self> {
        let per = PATCH_SPLIT * PATCH_SPLIT;
        let mut areas = Vec::with_capacity(panels.len());
        for (k, (p, nu)) in panels.iter_mut().zip(&normals).enumerate() {
            let (area, flat) = triangle_area_normal(p);
            if !(area > 0.0) {
                return Err(Error::Singular("degenerate panel".into()));
            }
            if flat.dot(nu) < 0.0 {
                p.swap(1, 2);
            }
            areas.push(total_area(&patches[k * per..(k + 1) * per]));
        }
        let id = MeshId::digest(
            nodes
                .iter()
                .chain(&normals)
                .flat_map(|v| [v.x, v.y, v.z])
                .chain(weights.iter().copied()),
            "surface",
        );
        Ok(SurfaceMesh {
            panels,
            patches,
            nodes,
            normals,
            weights,
            areas,
            curvature,
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

    pub fn panels(&self) -> &[[V3; 3]] {
        &self.panels
    }

    pub fn nodes(&self) -> &[V3] {
        &self.nodes
    }

    pub fn normals(&self) -> &[V3] {
        &self.normals
    }

    /// Quadrature weights: areas of the curved surface patches above each
    /// panel on constructed meshes, transformed areas on inverted ones.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Areas of the sub-triangulated patches used for near-field integrals.
    pub fn panel_areas(&self) -> &[f64] {
        &self.areas
    }

    /// Flat sub-triangles approximating the curved patch of panel `j`.
    pub fn patch(&self, j: usize) -> &[[V3; 3]] {
        let per = PATCH_SPLIT * PATCH_SPLIT;
        &self.patches[j * per..(j + 1) * per]
    }

    pub(crate) fn patches(&self) -> &[[V3; 3]] {
        &self.patches
    }

    /// Gaussian curvature from the smooth parametrization, when known.
    pub fn curvature(&self) -> Option<&[f64]> {
        self.curvature.as_deref()
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    pub fn id(&self) -> &MeshId {
        &self.id
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn spacing(&self) -> f64 {
        (self.area() / self.len() as f64).sqrt()
    }

    pub(crate) fn solid_angle_fraction(&self, q: &[f64]) -> f64 {
        let q = V3::new(q[0], q[1], q[2]);
        let total: f64 = self.panels.iter().map(|p| solid_angle(p, &q)).sum();
        total / (4.0 * PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_shape, Mesh, ShapeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn surface(spec: ShapeSpec) -> SurfaceMesh {
        match build_shape(&spec).unwrap() {
            Mesh::Surface(s) => s,
            _ => unreachable!(),
        }
    }

    #[test]
    fn geodesic_grid_counts() {
        for n in [1, 2, 5] {
            assert_eq!(geodesic_triangles(n).len(), 20 * n * n);
        }
    }

    #[test]
    fn normals_unit_and_outward() {
        for spec in [
            ShapeSpec::sphere(1.0, 8),
            ShapeSpec::spheroid(1.0, 0.5, 8),
            ShapeSpec::dumbbell(8),
        ] {
            let s = surface(spec);
            for (i, nu) in s.normals().iter().enumerate() {
                assert!((nu.norm() - 1.0).abs() < 1e-12);
                let (_, flat) = triangle_area_normal(&s.panels()[i]);
                assert!(flat.dot(nu) > 0.0);
            }
        }
    }

    #[test]
    fn sphere_divergence_and_curvature() {
        let s = surface(ShapeSpec::sphere(2.0, 12));
        let flux: f64 = (0..s.len())
            .map(|i| s.weights()[i] * s.nodes()[i].dot(&s.normals()[i]))
            .sum();
        let volume = 4.0 / 3.0 * PI * 8.0;
        assert!((flux / 3.0 / volume - 1.0).abs() < 0.01);
        for &k in s.curvature().unwrap() {
            assert!((k - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn spheroid_gaussian_curvature_closed_form() {
        // K = c^2 / (a^2 c^2 ... ) for x^2/a^2 + y^2/a^2 + z^2/c^2 = 1:
        // K = 1 / (a^2 c^2 (x^2/a^4 + y^2/a^4 + z^2/c^4)^2)
        let (a, c) = (1.0, 0.5);
        let s = surface(ShapeSpec::spheroid(a, c, 8));
        for (x, &k) in s.nodes().iter().zip(s.curvature().unwrap()) {
            let q = (x.x * x.x + x.y * x.y) / a.powi(4) + x.z * x.z / c.powi(4);
            let exact = 1.0 / (a * a * c * c * q * q);
            assert!((k - exact).abs() < 1e-9 * exact);
        }
    }

    #[test]
    fn dumbbell_volume_matches_monte_carlo() {
        let coeffs = [1.0, 0.0, 0.7];
        let s = surface(ShapeSpec::dumbbell(16));
        let flux: f64 = (0..s.len())
            .map(|i| s.weights()[i] * s.nodes()[i].dot(&s.normals()[i]))
            .sum();
        // Monte-Carlo oracle: star-shaped membership test in the bounding box.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (half_xy, half_z) = (1.0, 1.7);
        let samples = 400_000;
        let inside = (0..samples)
            .filter(|_| {
                let p = V3::new(
                    rng.random_range(-half_xy..half_xy),
                    rng.random_range(-half_xy..half_xy),
                    rng.random_range(-half_z..half_z),
                );
                let t = (p.z / p.norm()).acos();
                p.norm() < crate::geometry::radial_profile(&coeffs, t)
            })
            .count();
        let mc = 8.0 * half_xy * half_xy * half_z * inside as f64 / samples as f64;
        assert!((flux / 3.0 / mc - 1.0).abs() < 0.01, "{} vs {mc}", flux / 3.0);
    }

    #[test]
    fn solid_angle_sums() {
        let s = surface(ShapeSpec::sphere(1.0, 8));
        assert!((s.solid_angle_fraction(&[0.2, 0.1, -0.3]) - 1.0).abs() < 1e-10);
        assert!(s.solid_angle_fraction(&[1.5, 0.0, 0.0]).abs() < 1e-10);
    }
}
