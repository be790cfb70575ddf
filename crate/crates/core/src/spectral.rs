//! Energy inner product, NP quadratic forms and the self-adjoint NP
//! eigenproblem.
//!
//! With `W = diag(w)`, `B = -(W S)` is the Gram matrix of the energy inner
//! product and `B A` (with `A` the `K*` matrix) that of `<K* phi, psi>`.
//! Symmetry of `B A` is the discrete Plemelj principle; its defect is
//! reported and `B A` is symmetrized before the pencil `M x = lambda B x`
//! is solved by Cholesky reduction.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, MeshId};
use crate::layerpot::{assemble_np_adjoint, assemble_single_layer, Density, OperatorKind, OperatorMatrix};

fn check_pair(s: &OperatorMatrix, k: &OperatorMatrix) -> Result<()> {
    if s.kind() != OperatorKind::S || k.kind() != OperatorKind::Kstar {
        return Err(Error::Unsupported("expected an S matrix and a K* matrix".into()));
    }
    s.check_same_mesh(k.mesh_id())
}

/// `<phi, psi> = -sum_i w_i phi_i (S psi)_i`.
///
/// A nonpositive self-pairing of a nonzero density is reported as a
/// definiteness error: the mesh or (in 2D) the scale is unsuitable.
pub fn energy_inner_product(s: &OperatorMatrix, phi: &Density, psi: &Density) -> Result<f64> {
    if s.kind() != OperatorKind::S {
        return Err(Error::Unsupported("energy inner product needs the S matrix".into()));
    }
    s.check_same_mesh(phi.mesh_id())?;
    s.check_same_mesh(psi.mesh_id())?;
    let s_psi = s.apply_slice(psi.values());
    let value = -weighted_dot(s.weights(), phi.values(), &s_psi);
    if phi.values() == psi.values() && value <= 0.0 && phi.values().iter().any(|&v| v != 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "self-pairing {value:e} of a nonzero density"
        )));
    }
    Ok(value)
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// `<K* phi, phi>` in the energy inner product: `-sum_i w_i (K* phi)_i (S phi)_i`.
pub fn quadratic_form_np(s: &OperatorMatrix, k: &OperatorMatrix, phi: &Density) -> Result<f64> {
    check_pair(s, k)?;
    s.check_same_mesh(phi.mesh_id())?;
    let k_phi = k.apply_slice(phi.values());
    let s_phi = s.apply_slice(phi.values());
    Ok(-weighted_dot(s.weights(), &k_phi, &s_phi))
}

/// `B = -(W S)`, symmetrized.
pub fn energy_matrix(s: &OperatorMatrix) -> Mat<f64> {
    let w = s.weights();
    let e = s.entries();
    let n = s.len();
    Mat::from_fn(n, n, |i, j| -0.5 * (w[i] * e[(i, j)] + w[j] * e[(j, i)]))
}

fn frobenius_asymmetry(c: &Mat<f64>) -> f64 {
    let n = c.nrows();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let v = c[(i, j)];
            num += (v - c[(j, i)]).powi(2);
            den += v * v;
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// `||B A - (B A)^T||_F / ||B A||_F`.
pub fn plemelj_residual(s: &OperatorMatrix, k: &OperatorMatrix) -> Result<f64> {
    check_pair(s, k)?;
    let b = energy_matrix(s);
    Ok(frobenius_asymmetry(&(&b * k.entries())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Number of eigenvalues kept, largest first; `None` keeps all.
    pub count: Option<usize>,
    /// Also return B-orthonormal eigenvectors and their residuals.
    pub vectors: bool,
    /// Gap below which neighboring eigenvalues are grouped into a cluster.
    pub cluster_tol: f64,
}

impl SpectrumOptions {
    /// Solver tolerance on `||M x - lambda B x|| / ||B x||`.
    pub const SOLVER_TOL: f64 = 1e-10;
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            count: None,
            vectors: false,
            cluster_tol: 10.0 * Self::SOLVER_TOL,
        }
    }
}

/// Group of numerically coincident eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub first_index: usize,
    pub multiplicity: usize,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Columns are B-orthonormal eigenvectors matching `eigenvalues`.
    pub eigenvectors: Option<Mat<f64>>,
    /// `||M x - lambda B x|| / ||B x||` per returned eigenpair.
    pub residuals: Option<Vec<f64>>,
    pub symmetrization_residual: f64,
    pub mesh_id: MeshId,
}

impl SpectralResult {
    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// Eigenvector `k` as a density on the source mesh.
    pub fn eigenvector(&self, k: usize) -> Option<Density> {
        let v = self.eigenvectors.as_ref()?;
        let values = (0..v.nrows()).map(|i| v[(i, k)]).collect();
        Density::bind(&self.mesh_id, v.nrows(), values).ok()
    }

    /// Gap-based grouping of the (descending) eigenvalues.
    pub fn clusters(&self, tol: f64) -> Vec<Cluster> {
        let mut out: Vec<Cluster> = Vec::new();
        let mut start = 0;
        for k in 1..=self.eigenvalues.len() {
            let split = k == self.eigenvalues.len()
                || (self.eigenvalues[k - 1] - self.eigenvalues[k]).abs() > tol;
            if split {
                let group = &self.eigenvalues[start..k];
                out.push(Cluster {
                    first_index: start,
                    multiplicity: group.len(),
                    mean: group.iter().sum::<f64>() / group.len() as f64,
                });
                start = k;
            }
        }
        out
    }

    /// CSV with header `index,eigenvalue`, plus a `residual` column when
    /// eigenpair residuals are available.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue");
        if self.residuals.is_some() {
            out.push_str(",residual");
        }
        out.push('\n');
        for (i, v) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{v:.16e}"));
            if let Some(r) = &self.residuals {
                out.push_str(&format!(",{:.16e}", r[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Solve `M x = lambda B x` with `M = sym(B A)` and `B` the energy Gram matrix.
pub fn np_spectrum(s: &OperatorMatrix, k: &OperatorMatrix, opts: &SpectrumOptions) -> Result<SpectralResult> {
    check_pair(s, k)?;
    let n = s.len();
    let b = energy_matrix(s);
    let ba = &b * k.entries();
    let symmetrization_residual = frobenius_asymmetry(&ba);
    let m = Mat::from_fn(n, n, |i, j| 0.5 * (ba[(i, j)] + ba[(j, i)]));
    drop(ba);

    let llt = b.llt(Side::Lower).map_err(|e| {
        Error::NotPositiveDefinite(format!("energy Gram matrix has no Cholesky factor: {e:?}"))
    })?;
    let l = llt.L().to_owned();
    drop(llt);
    // C = L^-1 M L^-T
    let mut c = m.clone();
    l.solve_lower_triangular_in_place(c.as_mut());
    let mut c = c.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));

    let keep = opts.count.unwrap_or(n).min(n);
    if !opts.vectors {
        let mut values = c
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        values.reverse();
        values.truncate(keep);
        return Ok(SpectralResult {
            eigenvalues: values,
            eigenvectors: None,
            residuals: None,
            symmetrization_residual,
            mesh_id: s.mesh_id().clone(),
        });
    }

    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    drop(c);
    let ascending = evd.S().column_vector();
    let u = evd.U();
    // descending order, first `keep`
    let order: Vec<usize> = (0..n).rev().take(keep).collect();
    let eigenvalues: Vec<f64> = order.iter().map(|&i| ascending[i]).collect();
    let mut x = Mat::from_fn(n, keep, |i, j| u[(i, order[j])]);
    l.transpose().solve_upper_triangular_in_place(x.as_mut());

    let mx = &m * &x;
    let bx = &b * &x;
    let residuals = (0..keep)
        .map(|j| {
            let lambda = eigenvalues[j];
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n {
                num += (mx[(i, j)] - lambda * bx[(i, j)]).powi(2);
                den += bx[(i, j)].powi(2);
            }
            (num / den).sqrt()
        })
        .collect();
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors: Some(x),
        residuals: Some(residuals),
        symmetrization_residual,
        mesh_id: s.mesh_id().clone(),
    })
}

/// Operators ready for energy-space work: curves are first dilated to
/// diameter at most 1/2 (the NP spectrum is dilation invariant).
#[derive(Debug, Clone)]
pub struct EnergyOperators {
    pub mesh: Mesh,
    pub scale: f64,
    pub s: OperatorMatrix,
    pub k: OperatorMatrix,
}

pub fn energy_operators(mesh: &Mesh) -> Result<EnergyOperators> {
    let (mesh, scale) = match mesh {
        Mesh::Curve(c) => {
            let (scaled, factor) = c.energy_scaled();
            (Mesh::Curve(scaled), factor)
        }
        Mesh::Surface(_) => (mesh.clone(), 1.0),
    };
    let s = assemble_single_layer(&mesh)?;
    let k = assemble_np_adjoint(&mesh)?;
    Ok(EnergyOperators { mesh, scale, s, k })
}

/// Assemble and solve in one step.
pub fn np_spectrum_of(mesh: &Mesh, opts: &SpectrumOptions) -> Result<SpectralResult> {
    let ops = energy_operators(mesh)?;
    np_spectrum(&ops.s, &ops.k, opts)
}
