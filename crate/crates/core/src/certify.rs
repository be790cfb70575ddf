//! Certification of a negative NP eigenvalue from a concavity witness.
//!
//! Given `p` inside the domain and a boundary patch where `(x - p) . nu < 0`,
//! a density `phi` with `S[phi]` equal to a bump supported in the patch makes
//! the sum of the NP quadratic forms on the boundary and on its inverted
//! image negative, so one of the two operators has a negative eigenvalue.

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    concavity_scan, find_witness_center_with, ConcavityReport, InversionConfig, Mesh, MeshId,
    Position, WitnessObjective, WitnessSearch,
};
use crate::inversion::{InversionSetup, RESIDUAL_FLOOR};
use crate::layerpot::{Density, OperatorKind, OperatorMatrix};
use crate::spectral::{np_spectrum_of, SpectrumOptions};

/// Largest accepted condition estimate of the single-layer system.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest accepted relative residual of the single-layer solve.
pub const SOLVE_TOL: f64 = 1e-8;

/// Smooth bump `exp(1 - 1/(1 - t^2))`, `t = |x - x0| / radius`, centered at
/// a boundary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BumpSpec {
    pub fn profile(t: f64) -> f64 {
        if t < 1.0 {
            (1.0 - 1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    }
}

/// Nodal bump trace. Every node where it is nonzero must violate the
/// concavity inequality of `report`.
pub fn make_bump(mesh: &Mesh, report: &ConcavityReport, spec: &BumpSpec) -> Result<Vec<f64>> {
    if spec.center.len() != mesh.dimension() || !(spec.radius > 0.0) {
        return Err(Error::Unsupported(format!(
            "bump needs a {}D center and a positive radius",
            mesh.dimension()
        )));
    }
    let mut violating = vec![false; mesh.len()];
    for &i in &report.violating_nodes {
        violating[i] = true;
    }
    let mut g = vec![0.0; mesh.len()];
    for (i, gi) in g.iter_mut().enumerate() {
        let x = mesh.node(i);
        let d = spec
            .center
            .iter()
            .enumerate()
            .map(|(k, c)| (x[k] - c).powi(2))
            .sum::<f64>()
            .sqrt();
        let v = BumpSpec::profile(d / spec.radius);
        if v > 0.0 && !violating[i] {
            return Err(Error::Singular(format!(
                "bump support reaches node {i}, where (x - p) . nu >= 0"
            )));
        }
        *gi = v;
    }
    if g.iter().all(|&v| v == 0.0) {
        return Err(Error::Singular("bump support contains no node".into()));
    }
    Ok(g)
}

/// Density solving `S phi = g` with diagnostics.
#[derive(Debug, Clone)]
pub struct SingleLayerSolve {
    pub density: Density,
    /// 1-norm condition estimate of the system matrix.
    pub condition: f64,
    /// `|S phi - g|_inf / |g|_inf`.
    pub residual: f64,
}

fn column(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn one_norm(v: &Mat<f64>) -> f64 {
    (0..v.nrows()).map(|i| v[(i, 0)].abs()).sum()
}

/// Hager's estimate of `|A^-1|_1` with Higham's alternating-sign safeguard.
fn inverse_one_norm<S, T>(n: usize, solve: S, solve_t: T) -> f64
where
    S: Fn(&Mat<f64>) -> Mat<f64>,
    T: Fn(&Mat<f64>) -> Mat<f64>,
{
    let mut x = Mat::from_fn(n, 1, |_, _| 1.0 / n as f64);
    let mut estimate = 0.0;
    let mut last = usize::MAX;
    for _ in 0..5 {
        let y = solve(&x);
        estimate = one_norm(&y);
        let xi = Mat::from_fn(n, 1, |i, _| if y[(i, 0)] >= 0.0 { 1.0 } else { -1.0 });
        let z = solve_t(&xi);
        let (j, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].abs()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let ztx: f64 = (0..n).map(|i| z[(i, 0)] * x[(i, 0)]).sum();
        if zmax <= ztx || j == last {
            break;
        }
        last = j;
        x = Mat::from_fn(n, 1, |i, _| if i == j { 1.0 } else { 0.0 });
    }
    let denom = (n.max(2) - 1) as f64;
    let alt = Mat::from_fn(n, 1, |i, _| {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        s * (1.0 + i as f64 / denom)
    });
    let alt_estimate = 2.0 * one_norm(&solve(&alt)) / (3.0 * n as f64);
    estimate.max(alt_estimate)
}

/// Solve `(S phi)_i = g_i` by LU with partial pivoting.
pub fn solve_single_layer(s: &OperatorMatrix, g: &[f64]) -> Result<SingleLayerSolve> {
    if s.kind() != OperatorKind::S {
        return Err(Error::Unsupported("expected an S matrix".into()));
    }
    if s.dimension() != 3 {
        return Err(Error::Unsupported(
            "the single layer is inverted only in three dimensions".into(),
        ));
    }
    let n = s.len();
    if g.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: g.len(),
        });
    }
    let a = s.entries();
    let lu = a.partial_piv_lu();
    let a_norm = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let condition = a_norm
        * inverse_one_norm(n, |b| lu.solve(b), |b| lu.solve_transpose(b));
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned(condition));
    }

    let b = column(g);
    let mut x = lu.solve(&b);
    let g_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual_of = |x: &Mat<f64>| {
        let r = a * x - &b;
        (0..n).fold(0.0f64, |m, i| m.max(r[(i, 0)].abs())) / g_norm.max(RESIDUAL_FLOOR)
    };
    let mut residual = residual_of(&x);
    if residual > SOLVE_TOL {
        // one step of iterative refinement
        let r = &b - a * &x;
        x += lu.solve(&r);
        residual = residual_of(&x);
    }
    if residual > SOLVE_TOL {
        return Err(Error::Singular(format!(
            "single-layer solve residual {residual:e} above {SOLVE_TOL:e}"
        )));
    }
    let values = (0..n).map(|i| x[(i, 0)]).collect();
    Ok(SingleLayerSolve {
        density: Density::bind(s.mesh_id(), n, values)?,
        condition,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedNegative,
    NotApplicable,
    Inconclusive,
}

/// How the inversion center was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterSource {
    Given,
    Auto,
    /// The given center was not inside the domain; the automatic witness
    /// replaced it.
    AutoFallback,
}

/// Minimum eigenvalue of `K*` on the boundary and on its image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfirmation {
    pub min_original: f64,
    pub min_inverted: Option<f64>,
}

impl SpectralConfirmation {
    pub fn has_negative(&self) -> bool {
        self.min_original < 0.0 || self.min_inverted.is_some_and(|v| v < 0.0)
    }
}

/// Outcome of [`certify_negative_eigenvalue`]. Nodal vectors are not
/// serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub center: Option<Vec<f64>>,
    pub center_source: CenterSource,
    pub inversion_radius: f64,
    pub patch: Option<BumpSpec>,
    pub bump_nodes: usize,
    #[serde(skip)]
    pub bump_trace: Vec<f64>,
    #[serde(skip)]
    pub density: Vec<f64>,
    pub form_original: Option<f64>,
    pub form_inverted: Option<f64>,
    pub form_sum: Option<f64>,
    /// `int (x.nu / |x|^2) |g|^2` with the prescribed trace.
    pub rhs_integral: Option<f64>,
    /// Same integral with the achieved trace `S phi`.
    pub rhs_integral_achieved: Option<f64>,
    pub identity_residual: Option<f64>,
    pub threshold: f64,
    pub condition_estimate: Option<f64>,
    pub solve_residual: Option<f64>,
    pub spectral_confirmation: Option<SpectralConfirmation>,
    pub refinement: usize,
    pub meshes: Vec<MeshId>,
    pub diagnostics: Vec<String>,
}

impl Certificate {
    fn empty(mesh: &Mesh, opts: &CertifyOptions) -> Self {
        Certificate {
            verdict: Verdict::Inconclusive,
            center: None,
            center_source: CenterSource::Given,
            inversion_radius: opts.radius,
            patch: None,
            bump_nodes: 0,
            bump_trace: Vec::new(),
            density: Vec::new(),
            form_original: None,
            form_inverted: None,
            form_sum: None,
            rhs_integral: None,
            rhs_integral_achieved: None,
            identity_residual: None,
            threshold: opts.threshold,
            condition_estimate: None,
            solve_residual: None,
            spectral_confirmation: None,
            refinement: mesh.refinement(),
            meshes: vec![mesh.id().clone()],
            diagnostics: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Largest accepted relative gap between the form sum and the integral.
    pub threshold: f64,
    /// Bump radius as a fraction of the suggested patch radius.
    pub patch_fraction: f64,
    pub radius: f64,
    /// Compute both spectra for cross-validation.
    pub spectra: bool,
    pub search: WitnessSearch,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            threshold: 0.05,
            patch_fraction: 0.8,
            radius: InversionConfig::DEFAULT_RADIUS,
            spectra: true,
            search: WitnessSearch {
                objective: WitnessObjective::Clearance,
                ..WitnessSearch::default()
            },
        }
    }
}

/// Run the certification with default options. `center = None` searches for
/// a witness.
pub fn certify_negative_eigenvalue(mesh: &Mesh, center: Option<&[f64]>) -> Result<Certificate> {
    certify_with(mesh, center, &CertifyOptions::default())
}

pub fn certify_with(mesh: &Mesh, center: Option<&[f64]>, opts: &CertifyOptions) -> Result<Certificate> {
    if mesh.dimension() != 3 {
        return Err(Error::Unsupported("certification is three-dimensional".into()));
    }
    let mut cert = Certificate::empty(mesh, opts);
    let min_original = || -> Result<Option<f64>> {
        if opts.spectra {
            Ok(Some(np_spectrum_of(mesh, &SpectrumOptions::default())?.min()))
        } else {
            Ok(None)
        }
    };

    let (p, report) = match center {
        Some(p) if mesh.contains(&pad(p)) => {
            cert.center_source = CenterSource::Given;
            (p.to_vec(), concavity_scan(mesh, p))
        }
        _ => {
            if let Some(p) = center {
                cert.diagnostics.push(format!(
                    "given center {p:?} is not inside the domain; searching for an interior witness"
                ));
                cert.center_source = CenterSource::AutoFallback;
            } else {
                cert.center_source = CenterSource::Auto;
            }
            match find_witness_center_with(mesh, &opts.search) {
                Some(found) => found,
                None => {
                    cert.verdict = Verdict::NotApplicable;
                    cert.diagnostics
                        .push("no interior center violates the concavity condition".into());
                    cert.spectral_confirmation = min_original()?.map(|m| SpectralConfirmation {
                        min_original: m,
                        min_inverted: None,
                    });
                    return Ok(cert);
                }
            }
        }
    };
    cert.center = Some(p.clone());

    let Some(patch) = report.patch_suggestion.clone().filter(|_| report.is_concave()) else {
        cert.verdict = Verdict::NotApplicable;
        cert.diagnostics.push(format!(
            "(x - p) . nu >= 0 at every node (minimum {:.3e})",
            report.min_value
        ));
        cert.spectral_confirmation = min_original()?.map(|m| SpectralConfirmation {
            min_original: m,
            min_inverted: None,
        });
        return Ok(cert);
    };

    let spec = BumpSpec {
        center: patch.center.clone(),
        radius: opts.patch_fraction * patch.radius,
    };
    let g = make_bump(mesh, &report, &spec)?;
    cert.bump_nodes = g.iter().filter(|&&v| v > 0.0).count();
    cert.patch = Some(spec);

    let cfg = InversionConfig::with_position(mesh, &p, opts.radius, Position::Interior)?;
    let setup = InversionSetup::new(mesh, &cfg)?;
    cert.meshes.push(setup.image.id().clone());

    let solved = solve_single_layer(&setup.s, &g)?;
    cert.condition_estimate = Some(solved.condition);
    cert.solve_residual = Some(solved.residual);
    let phi = solved.density;

    let (form, form_star) = setup.forms(&phi)?;
    let sum = form + form_star;
    let rhs = setup.rhs_integral(&g);
    let achieved = setup.rhs_integral(setup.s.apply(&phi)?.values());
    let residual = (sum - rhs).abs() / sum.abs().max(rhs.abs()).max(RESIDUAL_FLOOR);
    cert.form_original = Some(form);
    cert.form_inverted = Some(form_star);
    cert.form_sum = Some(sum);
    cert.rhs_integral = Some(rhs);
    cert.rhs_integral_achieved = Some(achieved);
    cert.identity_residual = Some(residual);
    cert.bump_trace = g;
    cert.density = phi.into_values();

    let negative = sum < 0.0 && rhs < 0.0 && achieved < 0.0;
    if !negative {
        cert.diagnostics.push(format!(
            "signs: form sum {sum:.3e}, integral {rhs:.3e}, achieved integral {achieved:.3e}"
        ));
    }
    if residual > opts.threshold {
        cert.diagnostics.push(format!(
            "relative gap {residual:.3e} between the form sum and the integral exceeds {:.3e}",
            opts.threshold
        ));
    }
    cert.verdict = if negative && residual <= opts.threshold {
        Verdict::CertifiedNegative
    } else {
        Verdict::Inconclusive
    };

    if opts.spectra {
        let conf = SpectralConfirmation {
            min_original: np_spectrum_of(&setup.original, &SpectrumOptions::default())?.min(),
            min_inverted: Some(np_spectrum_of(&setup.image, &SpectrumOptions::default())?.min()),
        };
        if cert.verdict == Verdict::CertifiedNegative && !conf.has_negative() {
            cert.diagnostics
                .push("neither computed spectrum has a negative eigenvalue".into());
        }
        cert.spectral_confirmation = Some(conf);
    }
    Ok(cert)
}

fn pad(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..v.len().min(3)].copy_from_slice(&v[..v.len().min(3)]);
    out
}
