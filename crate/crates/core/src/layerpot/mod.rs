//! Dense discretizations of the single layer `S` and the NP operator `K*`.
//!
//! Convention: row `i` is the target node, column `j` the source node, and
//! quadrature weights are folded in, so a matrix applied to nodal values
//! approximates the integral operator at the nodes.
//!
//! * 2D: periodic Nyström with the logarithm split off and integrated by
//!   trigonometric product weights; `K*` has the continuous diagonal limit
//!   `w_i kappa_i / (4 pi)`.
//! * 3D: centroid collocation on flat panels. `S` uses point quadrature in the
//!   far field; near the diagonal each curved patch is split into flat
//!   sub-triangles integrated in closed form, for `S` and `K*` alike.
//!   The `K*` diagonal is fixed by `sum_i w_i K*_ij = w_j / 2`, the discrete
//!   form of `int K*[phi] = (1/2) int phi`.

mod jump2d;
mod kress;
mod panel;

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CurveMesh, Mesh, MeshId, SurfaceMesh};

pub(crate) use panel::{triangle_grad_inv_r, triangle_inv_r};

/// Panels closer than this many local spacings use exact integrals.
const NEAR_FACTOR: f64 = 4.0;
/// Off-boundary evaluation switches to exact panel integrals within this
/// many local spacings.
const EVAL_NEAR_FACTOR: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    S,
    Kstar,
}

/// Dense operator bound to the mesh it was assembled on.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    kind: OperatorKind,
    entries: Mat<f64>,
    mesh_id: MeshId,
    weights: Vec<f64>,
    dimension: usize,
}

/// Header written next to a binary matrix dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub n: usize,
    pub kind: OperatorKind,
    pub mesh_hash: MeshId,
}

impl OperatorMatrix {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn mesh_id(&self) -> &MeshId {
        &self.mesh_id
    }

    /// Quadrature weights of the source mesh.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub(crate) fn check_same_mesh(&self, other: &MeshId) -> Result<()> {
        if &self.mesh_id != other {
            return Err(Error::MeshMismatch {
                left: self.mesh_id.clone(),
                right: other.clone(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, density: &Density) -> Result<Density> {
        self.check_same_mesh(&density.mesh_id)?;
        Ok(Density {
            values: self.apply_slice(&density.values),
            mesh_id: self.mesh_id.clone(),
        })
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.entries[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Write the entries row-major as little-endian `f64` to `path` and the
    /// JSON header to `path` with extension `json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.len();
        let mut bytes = Vec::with_capacity(8 * n * n);
        for i in 0..n {
            for j in 0..n {
                bytes.extend_from_slice(&self.entries[(i, j)].to_le_bytes());
            }
        }
        fs::File::create(path)?.write_all(&bytes)?;
        let header = DumpHeader {
            n,
            kind: self.kind,
            mesh_hash: self.mesh_id.clone(),
        };
        fs::write(path.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
        Ok(())
    }

    /// Read a dump written by [`OperatorMatrix::save`] and bind it to `mesh`.
    pub fn load(path: &Path, mesh: &Mesh) -> Result<Self> {
        let header: DumpHeader =
            serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
        if &header.mesh_hash != mesh.id() {
            return Err(Error::MeshMismatch {
                left: header.mesh_hash,
                right: mesh.id().clone(),
            });
        }
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let n = header.n;
        if bytes.len() != 8 * n * n {
            return Err(Error::LengthMismatch {
                expected: 8 * n * n,
                found: bytes.len(),
            });
        }
        let value = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
        Ok(OperatorMatrix {
            kind: header.kind,
            entries: Mat::from_fn(n, n, |i, j| value(i * n + j)),
            mesh_id: header.mesh_hash,
            weights: mesh.weights().to_vec(),
            dimension: mesh.dimension(),
        })
    }
}

/// Nodal coefficients of a boundary density.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    values: Vec<f64>,
    mesh_id: MeshId,
}

impl Density {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        Self::bind(mesh.id(), mesh.len(), values)
    }

    pub(crate) fn bind(id: &MeshId, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("density has non-finite values".into()));
        }
        Ok(Density {
            values,
            mesh_id: id.clone(),
        })
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Density {
            values: vec![value; mesh.len()],
            mesh_id: mesh.id().clone(),
        }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// A few random low-frequency plane waves evaluated at the nodes.
    pub fn random_smooth(mesh: &Mesh, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = mesh.dimension();
        let waves: Vec<([f64; 3], f64, f64)> = (0..4)
            .map(|_| {
                let mut k = [0.0; 3];
                for v in k.iter_mut().take(d) {
                    *v = rng.random_range(-2.0..2.0);
                }
                (k, rng.random_range(0.0..2.0 * PI), rng.random_range(-1.0..1.0))
            })
            .collect();
        let offset = rng.random_range(-1.0..1.0);
        let values = (0..mesh.len())
            .map(|i| {
                let x = mesh.node(i);
                offset
                    + waves
                        .iter()
                        .map(|(k, phase, amp)| {
                            amp * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + phase).cos()
                        })
                        .sum::<f64>()
            })
            .collect();
        Density {
            values,
            mesh_id: mesh.id().clone(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mesh_id(&self) -> &MeshId {
        &self.mesh_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> Density {
        Density {
            values: self.values.iter().map(|v| v * factor).collect(),
            mesh_id: self.mesh_id.clone(),
        }
    }

    /// `int phi` by nodal quadrature.
    pub fn integral(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(v, w)| v * w).sum()
    }
}

fn duplicate_error(i: usize, j: usize) -> Error {
    Error::Singular(format!("nodes {i} and {j} coincide"))
}

// ---------------------------------------------------------------- 2D rows

fn curve_s_row(c: &CurveMesh, log_w: &[f64], i: usize) -> Result<Vec<f64>> {
    let n = c.len();
    let h = 2.0 * PI / n as f64;
    let xi = c.nodes()[i];
    let speed = c.param_speed();
    (0..n)
        .map(|j| {
            let smooth = if i == j {
                (speed[i] * speed[i]).ln()
            } else {
                let d2 = (xi - c.nodes()[j]).norm_squared();
                if d2 == 0.0 {
                    return Err(duplicate_error(i, j));
                }
                let half = 0.5 * (c.param(i) - c.param(j));
                (d2 / (4.0 * half.sin().powi(2))).ln()
            };
            Ok(speed[j] / (4.0 * PI) * (log_w[(i + n - j) % n] + h * smooth))
        })
        .collect()
}

fn curve_k_row(c: &CurveMesh, i: usize) -> Result<Vec<f64>> {
    let (xi, ni) = (c.nodes()[i], c.normals()[i]);
    (0..c.len())
        .map(|j| {
            let w = c.weights()[j];
            if i == j {
                return Ok(w * c.curvature()[i] / (4.0 * PI));
            }
            let u: Vector2<f64> = xi - c.nodes()[j];
            let d2 = u.norm_squared();
            if d2 == 0.0 {
                return Err(duplicate_error(i, j));
            }
            Ok(w * u.dot(&ni) / (2.0 * PI * d2))
        })
        .collect()
}

// ---------------------------------------------------------------- 3D rows

fn near(s: &SurfaceMesh, i: usize, j: usize, d: f64) -> bool {
    let a = s.panel_areas();
    d < NEAR_FACTOR * a[i].max(a[j]).sqrt()
}

/// `int 1/|x-y|` over the sub-triangulated curved patch of panel `j`.
fn patch_inv_r(s: &SurfaceMesh, j: usize, x: &Vector3<f64>) -> f64 {
    s.patch(j).iter().map(|t| triangle_inv_r(t, x)).sum()
}

fn surface_s_row(s: &SurfaceMesh, i: usize) -> Result<Vec<f64>> {
    let (nodes, areas, weights) = (s.nodes(), s.panel_areas(), s.weights());
    let xi = nodes[i];
    let self_integral = |j: usize, x: &Vector3<f64>| patch_inv_r(s, j, x) / areas[j];
    (0..s.len())
        .map(|j| {
            let d = (xi - nodes[j]).norm();
            let g = if i == j {
                self_integral(i, &xi)
            } else if d == 0.0 {
                return Err(duplicate_error(i, j));
            } else if near(s, i, j, d) {
                // symmetrized so that the unfolded matrix is symmetric
                0.5 * (self_integral(j, &xi) + self_integral(i, &nodes[j]))
            } else {
                1.0 / d
            };
            Ok(-weights[j] * g / (4.0 * PI))
        })
        .collect()
}

/// `int nu . (x - y) / |x-y|^3` over the sub-triangulated patch of panel `j`.
fn patch_flux(s: &SurfaceMesh, j: usize, x: &Vector3<f64>, nu: &Vector3<f64>) -> f64 {
    -s.patch(j)
        .iter()
        .map(|t| nu.dot(&triangle_grad_inv_r(t, x)))
        .sum::<f64>()
}

fn surface_k_row(s: &SurfaceMesh, i: usize) -> Result<Vec<f64>> {
    let (nodes, normals, weights, areas) = (s.nodes(), s.normals(), s.weights(), s.panel_areas());
    let (xi, ni) = (nodes[i], normals[i]);
    let mut row = vec![0.0; s.len()];
    // diagonal from the weighted column sum of column i
    let mut calibration = 0.0;
    for j in 0..s.len() {
        if i == j {
            continue;
        }
        let u: Vector3<f64> = xi - nodes[j];
        let d = u.norm();
        if d == 0.0 {
            return Err(duplicate_error(i, j));
        }
        if near(s, i, j, d) {
            row[j] = weights[j] / areas[j] * patch_flux(s, j, &xi, &ni) / (4.0 * PI);
            let column = weights[i] / areas[i] * patch_flux(s, i, &nodes[j], &normals[j]) / (4.0 * PI);
            calibration -= weights[j] * column / weights[i];
        } else {
            let d3 = 4.0 * PI * d * d * d;
            row[j] = weights[j] * ni.dot(&u) / d3;
            calibration -= weights[j] * normals[j].dot(&(-u)) / d3;
        }
    }
    row[i] = 0.5 + calibration;
    Ok(row)
}

/// Row `i` of the assembled operator without forming the matrix.
pub(crate) fn operator_row(mesh: &Mesh, kind: OperatorKind, i: usize) -> Result<Vec<f64>> {
    match (mesh, kind) {
        (Mesh::Curve(c), OperatorKind::S) => curve_s_row(c, &kress::log_weights(c.len()), i),
        (Mesh::Curve(c), OperatorKind::Kstar) => curve_k_row(c, i),
        (Mesh::Surface(s), OperatorKind::S) => surface_s_row(s, i),
        (Mesh::Surface(s), OperatorKind::Kstar) => surface_k_row(s, i),
    }
}

fn assemble(mesh: &Mesh, kind: OperatorKind) -> Result<OperatorMatrix> {
    let n = mesh.len();
    let log_w = match mesh {
        Mesh::Curve(c) => kress::log_weights(c.len()),
        Mesh::Surface(_) => Vec::new(),
    };
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| match (mesh, kind) {
            (Mesh::Curve(c), OperatorKind::S) => curve_s_row(c, &log_w, i),
            _ => operator_row(mesh, kind, i),
        })
        .collect::<Result<_>>()?;
    let entries = Mat::from_fn(n, n, |i, j| rows[i][j]);
    Ok(OperatorMatrix {
        kind,
        entries,
        mesh_id: mesh.id().clone(),
        weights: mesh.weights().to_vec(),
        dimension: mesh.dimension(),
    })
}

/// Single layer `S[phi](x) = int Gamma(x - y) phi(y) dsigma(y)` with
/// `Gamma = ln|x| / (2 pi)` in 2D and `-1 / (4 pi |x|)` in 3D.
pub fn assemble_single_layer(mesh: &Mesh) -> Result<OperatorMatrix> {
    assemble(mesh, OperatorKind::S)
}

/// NP operator `K*[phi](x) = int nu_x . grad_x Gamma(x - y) phi(y) dsigma(y)`.
pub fn assemble_np_adjoint(mesh: &Mesh) -> Result<OperatorMatrix> {
    assemble(mesh, OperatorKind::Kstar)
}

// ------------------------------------------------------ off-boundary values

fn single_layer_at_point(mesh: &Mesh, phi: &[f64], q: &[f64; 3]) -> f64 {
    match mesh {
        Mesh::Curve(c) => {
            let q = Vector2::new(q[0], q[1]);
            c.nodes()
                .iter()
                .zip(c.weights())
                .zip(phi)
                .map(|((y, w), f)| w * f * (q - y).norm().ln())
                .sum::<f64>()
                / (2.0 * PI)
        }
        Mesh::Surface(s) => {
            let q = Vector3::new(q[0], q[1], q[2]);
            let areas = s.panel_areas();
            let total: f64 = (0..s.len())
                .map(|j| {
                    let d = (q - s.nodes()[j]).norm();
                    let wf = s.weights()[j] * phi[j];
                    if d < EVAL_NEAR_FACTOR * areas[j].sqrt() {
                        wf * patch_inv_r(s, j, &q) / areas[j]
                    } else {
                        wf / d
                    }
                })
                .sum();
            -total / (4.0 * PI)
        }
    }
}

fn check_off_boundary(mesh: &Mesh, q: &[f64]) -> Result<[f64; 3]> {
    if q.len() != mesh.dimension() {
        return Err(Error::LengthMismatch {
            expected: mesh.dimension(),
            found: q.len(),
        });
    }
    let mut p = [0.0; 3];
    p[..q.len()].copy_from_slice(q);
    let (nearest, distance) = mesh.nearest_node(&p);
    let spacing = mesh.local_spacing(nearest);
    if distance < spacing {
        return Err(Error::NearBoundary {
            point: q.to_vec(),
            distance,
            spacing,
        });
    }
    Ok(p)
}

/// `S[phi]` at points off the boundary. Points closer to the nearest node
/// than its local spacing are refused.
///
/// In 3D, panels within a few spacings of the point are integrated exactly
/// (flat panel, constant density); all others by the nodal rule.
pub fn eval_single_layer_at(mesh: &Mesh, density: &Density, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if density.mesh_id() != mesh.id() {
        return Err(Error::MeshMismatch {
            left: density.mesh_id().clone(),
            right: mesh.id().clone(),
        });
    }
    let checked: Vec<[f64; 3]> = points
        .iter()
        .map(|q| check_off_boundary(mesh, q))
        .collect::<Result<_>>()?;
    Ok(checked
        .par_iter()
        .map(|q| single_layer_at_point(mesh, density.values(), q))
        .collect())
}

/// Sampling for [`jump_residual_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpOptions {
    /// Maximum number of boundary nodes probed.
    pub samples: usize,
    /// Surfaces: smallest finite-difference step in units of mesh spacing.
    /// Curves: largest extrapolation offset in units of half a spacing.
    pub step_factor: f64,
}

impl Default for JumpOptions {
    fn default() -> Self {
        JumpOptions {
            samples: 24,
            step_factor: 3.0,
        }
    }
}

/// Outcome of a jump-relation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub res_plus: f64,
    pub res_minus: f64,
    pub nodes: Vec<usize>,
    pub step: f64,
}

/// Compare one-sided normal derivatives of `S[phi]` with `(+-1/2 I + K*) phi`.
pub fn jump_residual(mesh: &Mesh, density: &Density) -> Result<(f64, f64)> {
    jump_residual_with(mesh, density, &JumpOptions::default()).map(|r| (r.res_plus, r.res_minus))
}

/// Nodes whose whole offset stencil `x +- k h nu`, `k = 1, 2, 4` stays
/// closest to the node itself and clear of the rest of the boundary.
fn jump_nodes(mesh: &Mesh, h: f64, samples: usize) -> Vec<usize> {
    let n = mesh.len();
    // deterministic spread over the node list
    let stride = [7919usize, 104_729, 1_299_709]
        .into_iter()
        .find(|p| n % p != 0)
        .unwrap_or(1);
    let mut chosen = Vec::new();
    for k in 0..n {
        if chosen.len() == samples {
            break;
        }
        let i = (k * stride + 1) % n;
        let (x, nu) = (mesh.node(i), mesh.normal(i));
        let ok = [1.0, 2.0, 4.0, -1.0, -2.0, -4.0].iter().all(|s| {
            let q = [x[0] + s * h * nu[0], x[1] + s * h * nu[1], x[2] + s * h * nu[2]];
            let (nearest, dist) = mesh.nearest_node(&q);
            nearest == i && dist >= 0.75 * s.abs() * h && dist >= mesh.local_spacing(nearest)
        });
        if ok {
            chosen.push(i);
        }
    }
    chosen
}

pub fn jump_residual_with(mesh: &Mesh, density: &Density, opts: &JumpOptions) -> Result<JumpReport> {
    if density.mesh_id() != mesh.id() {
        return Err(Error::MeshMismatch {
            left: density.mesh_id().clone(),
            right: mesh.id().clone(),
        });
    }
    if let Mesh::Curve(c) = mesh {
        return jump2d::curve_jump(mesh, c, density.values(), opts);
    }
    let h = opts.step_factor * mesh.spacing();
    let nodes = jump_nodes(mesh, h, opts.samples);
    if nodes.is_empty() {
        return Err(Error::NearBoundary {
            point: Vec::new(),
            distance: h,
            spacing: mesh.spacing(),
        });
    }
    let phi = density.values();
    let rows: Vec<(f64, f64, f64, f64)> = nodes
        .par_iter()
        .map(|&i| -> Result<_> {
            let s_row = operator_row(mesh, OperatorKind::S, i)?;
            let k_row = operator_row(mesh, OperatorKind::Kstar, i)?;
            let u0: f64 = s_row.iter().zip(phi).map(|(a, b)| a * b).sum();
            let kphi: f64 = k_row.iter().zip(phi).map(|(a, b)| a * b).sum();
            let (x, nu) = (mesh.node(i), mesh.normal(i));
            let derivative = |side: f64| {
                let d = |step: f64| {
                    let q = [
                        x[0] + side * step * nu[0],
                        x[1] + side * step * nu[1],
                        x[2] + side * step * nu[2],
                    ];
                    side * (single_layer_at_point(mesh, phi, &q) - u0) / step
                };
                (8.0 * d(h) - 6.0 * d(2.0 * h) + d(4.0 * h)) / 3.0
            };
            Ok((derivative(1.0), derivative(-1.0), kphi + 0.5 * phi[i], kphi - 0.5 * phi[i]))
        })
        .collect::<Result<_>>()?;
    let scale = rows
        .iter()
        .map(|r| r.2.abs().max(r.3.abs()))
        .fold(1e-14, f64::max);
    let res_plus = rows.iter().map(|r| (r.0 - r.2).abs()).fold(0.0, f64::max) / scale;
    let res_minus = rows.iter().map(|r| (r.1 - r.3).abs()).fold(0.0, f64::max) / scale;
    Ok(JumpReport {
        res_plus,
        res_minus,
        nodes,
        step: h,
    })
}
