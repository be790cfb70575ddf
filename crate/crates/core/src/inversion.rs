//! Densities under inversion and numerical checks of the transformation
//! rules for `S`, `K*`, the NP quadratic form and the energy pairing.
//!
//! All formulas are evaluated in the frame centered at the inversion
//! center `p`, i.e. with `x - p` in place of `x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{invert_shape, InversionConfig, Mesh, MeshId, Position};
use crate::layerpot::{
    assemble_np_adjoint, assemble_single_layer, eval_single_layer_at, Density, OperatorMatrix,
};
use crate::spectral::{
    energy_inner_product, energy_operators, np_spectrum, quadratic_form_np, SpectrumOptions,
};

/// Denominator floor of the relative residual.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// Relative size of `|int phi|` against `int |phi|` accepted as mean zero.
pub const MEAN_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    SingleLayer,
    NpInterior,
    NpExterior,
    EnergyInterior,
    EnergyExterior,
    Conformal,
}

/// Both sides of an identity and their relative sup-norm deviation.
///
/// Scalar identities carry one-element sides. The sides themselves are not
/// serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: IdentityKind,
    #[serde(skip)]
    pub lhs: Vec<f64>,
    #[serde(skip)]
    pub rhs: Vec<f64>,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub residual: f64,
    pub refinement: usize,
    pub config: InversionConfig,
    /// Original and image mesh.
    pub meshes: [MeshId; 2],
}

impl IdentityReport {
    fn new(identity: IdentityKind, lhs: Vec<f64>, rhs: Vec<f64>, setup: &InversionSetup) -> Self {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = lhs.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let (lhs_norm, rhs_norm) = (sup(&lhs), sup(&rhs));
        IdentityReport {
            identity,
            residual: diff / lhs_norm.max(rhs_norm).max(RESIDUAL_FLOOR),
            lhs,
            rhs,
            lhs_norm,
            rhs_norm,
            refinement: setup.original.refinement(),
            config: setup.cfg.clone(),
            meshes: [setup.original.id().clone(), setup.image.id().clone()],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn offsets(mesh: &Mesh, cfg: &InversionConfig) -> Vec<[f64; 3]> {
    (0..mesh.len())
        .map(|i| {
            let x = mesh.node(i);
            let mut u = [0.0; 3];
            for (k, c) in cfg.center.iter().enumerate() {
                u[k] = x[k] - c;
            }
            u
        })
        .collect()
}

fn norm(u: &[f64; 3]) -> f64 {
    (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
}

fn dot(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// A mesh together with its image under one inversion.
#[derive(Debug, Clone)]
pub struct InversionPair {
    pub cfg: InversionConfig,
    pub original: Mesh,
    pub image: Mesh,
}

impl InversionPair {
    pub fn new(mesh: &Mesh, cfg: &InversionConfig) -> Result<Self> {
        Ok(InversionPair {
            cfg: cfg.clone(),
            original: mesh.clone(),
            image: invert_shape(mesh, cfg)?,
        })
    }

    /// `phi*(y*) = phi(y) |y - p|^d / r^d`, bound to the image mesh.
    pub fn transform(&self, phi: &Density) -> Result<Density> {
        if phi.mesh_id() != self.original.id() {
            return Err(Error::MeshMismatch {
                left: phi.mesh_id().clone(),
                right: self.original.id().clone(),
            });
        }
        let d = self.original.dimension() as i32;
        let r = self.cfg.radius;
        let values = offsets(&self.original, &self.cfg)
            .iter()
            .zip(phi.values())
            .map(|(u, v)| v * (norm(u) / r).powi(d))
            .collect();
        Density::new(&self.image, values)
    }

    /// Configuration inverting the image back onto the original nodes.
    /// The center never lies inside the image domain.
    pub fn inverse_config(&self) -> InversionConfig {
        InversionConfig {
            center: self.cfg.center.clone(),
            radius: self.cfg.radius,
            position: Position::Exterior,
        }
    }
}

/// Image of `phi` under the inversion `cfg` of `mesh`.
pub fn transform_density(mesh: &Mesh, cfg: &InversionConfig, phi: &Density) -> Result<Density> {
    InversionPair::new(mesh, cfg)?.transform(phi)
}

/// `S` and `K*` assembled on a mesh and on its image.
#[derive(Debug, Clone)]
pub struct InversionSetup {
    pub cfg: InversionConfig,
    pub original: Mesh,
    pub image: Mesh,
    pub s: OperatorMatrix,
    pub k: OperatorMatrix,
    pub s_star: OperatorMatrix,
    pub k_star: OperatorMatrix,
}

impl InversionSetup {
    pub fn new(mesh: &Mesh, cfg: &InversionConfig) -> Result<Self> {
        let pair = InversionPair::new(mesh, cfg)?;
        Ok(InversionSetup {
            s: assemble_single_layer(&pair.original)?,
            k: assemble_np_adjoint(&pair.original)?,
            s_star: assemble_single_layer(&pair.image)?,
            k_star: assemble_np_adjoint(&pair.image)?,
            cfg: pair.cfg,
            original: pair.original,
            image: pair.image,
        })
    }

    fn pair(&self) -> InversionPair {
        InversionPair {
            cfg: self.cfg.clone(),
            original: self.original.clone(),
            image: self.image.clone(),
        }
    }

    pub fn transform(&self, phi: &Density) -> Result<Density> {
        self.pair().transform(phi)
    }

    /// 3D: `S*[phi*](x*) = (|x|/r) S[phi](x)`.
    /// 2D: `S*[phi*](x*) = S[phi](x) - S[phi](p) + (int phi)(G(r^2) - G(x))`
    /// with `G = ln|.| / 2 pi` and `G(r^2) = ln(r^2) / 2 pi`.
    pub fn single_layer(&self, phi: &Density) -> Result<IdentityReport> {
        let phi_star = self.transform(phi)?;
        let lhs = self.s_star.apply(&phi_star)?.into_values();
        let s_phi = self.s.apply(phi)?.into_values();
        let u = offsets(&self.original, &self.cfg);
        let r = self.cfg.radius;
        let rhs = match self.original.dimension() {
            2 => {
                let at_p = eval_single_layer_at(&self.original, phi, &[self.cfg.center.clone()])?[0];
                let total = phi.integral(self.original.weights());
                let g_r2 = (r * r).ln() / (2.0 * PI);
                u.iter()
                    .zip(&s_phi)
                    .map(|(u, s)| s - at_p + total * (g_r2 - norm(u).ln() / (2.0 * PI)))
                    .collect()
            }
            _ => u.iter().zip(&s_phi).map(|(u, s)| norm(u) / r * s).collect(),
        };
        Ok(IdentityReport::new(IdentityKind::SingleLayer, lhs, rhs, self))
    }

    /// `K*` transformation rule at every node; the case follows the
    /// position of the center.
    pub fn np_transform(&self, phi: &Density) -> Result<IdentityReport> {
        let phi_star = self.transform(phi)?;
        let lhs = self.k_star.apply(&phi_star)?.into_values();
        let k_phi = self.k.apply(phi)?.into_values();
        let sign = match self.cfg.position {
            Position::Interior => -1.0,
            Position::Exterior => 1.0,
        };
        let u = offsets(&self.original, &self.cfg);
        let r = self.cfg.radius;
        let rhs: Vec<f64> = match self.original.dimension() {
            2 => {
                let total = phi.integral(self.original.weights());
                (0..u.len())
                    .map(|i| {
                        let q = dot(&u[i], &u[i]);
                        let un = dot(&u[i], &self.original.normal(i));
                        sign * (q / (r * r) * k_phi[i] - total * un / (2.0 * PI * r * r))
                    })
                    .collect()
            }
            _ => {
                let s_phi = self.s.apply(phi)?.into_values();
                let r3 = r * r * r;
                (0..u.len())
                    .map(|i| {
                        let a = norm(&u[i]);
                        let un = dot(&u[i], &self.original.normal(i));
                        sign * (a.powi(3) / r3 * k_phi[i] + a * un / r3 * s_phi[i])
                    })
                    .collect()
            }
        };
        let kind = match self.cfg.position {
            Position::Interior => IdentityKind::NpInterior,
            Position::Exterior => IdentityKind::NpExterior,
        };
        Ok(IdentityReport::new(kind, lhs, rhs, self))
    }

    /// `int (x.nu / |x|^2) |S[phi]|^2 dS` over the original boundary.
    pub fn rhs_integral(&self, trace: &[f64]) -> f64 {
        offsets(&self.original, &self.cfg)
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let un = dot(u, &self.original.normal(i));
                self.original.weights()[i] * un / dot(u, u) * trace[i] * trace[i]
            })
            .sum()
    }

    /// Both NP quadratic forms, `<K* phi, phi>` and `<K*_* phi*, phi*>`.
    pub fn forms(&self, phi: &Density) -> Result<(f64, f64)> {
        let phi_star = self.transform(phi)?;
        Ok((
            quadratic_form_np(&self.s, &self.k, phi)?,
            quadratic_form_np(&self.s_star, &self.k_star, &phi_star)?,
        ))
    }

    /// Interior center: `form* + form = int (x.nu/|x|^2)|S phi|^2`.
    /// Exterior center: `form* - form = -int (x.nu/|x|^2)|S phi|^2`.
    pub fn energy(&self, phi: &Density) -> Result<IdentityReport> {
        if self.original.dimension() != 3 {
            return Err(Error::Unsupported(
                "the quadratic-form identity is three-dimensional".into(),
            ));
        }
        let (form, form_star) = self.forms(phi)?;
        let integral = self.rhs_integral(self.s.apply(phi)?.values());
        let (kind, lhs, rhs) = match self.cfg.position {
            Position::Interior => (IdentityKind::EnergyInterior, form_star + form, integral),
            Position::Exterior => (IdentityKind::EnergyExterior, form_star - form, -integral),
        };
        Ok(IdentityReport::new(kind, vec![lhs], vec![rhs], self))
    }

    /// `<phi*, psi*>` on the image against `<phi, psi>` on the original.
    /// In 2D both densities must have mean zero.
    pub fn conformal(&self, phi: &Density, psi: &Density) -> Result<IdentityReport> {
        if self.original.dimension() == 2 {
            for (name, f) in [("phi", phi), ("psi", psi)] {
                let w = self.original.weights();
                let total = f.integral(w);
                let mass: f64 = f.values().iter().zip(w).map(|(v, w)| v.abs() * w).sum();
                if total.abs() > MEAN_ZERO_TOL * mass.max(RESIDUAL_FLOOR) {
                    return Err(Error::Unsupported(format!(
                        "2D pairing is preserved only for mean-zero densities; int {name} = {total:e}"
                    )));
                }
            }
        }
        let lhs = energy_inner_product(&self.s_star, &self.transform(phi)?, &self.transform(psi)?)?;
        let rhs = energy_inner_product(&self.s, phi, psi)?;
        Ok(IdentityReport::new(IdentityKind::Conformal, vec![lhs], vec![rhs], self))
    }
}

pub fn check_single_layer_transform(
    mesh: &Mesh,
    cfg: &InversionConfig,
    phi: &Density,
) -> Result<IdentityReport> {
    InversionSetup::new(mesh, cfg)?.single_layer(phi)
}

pub fn check_np_transform(mesh: &Mesh, cfg: &InversionConfig, phi: &Density) -> Result<IdentityReport> {
    InversionSetup::new(mesh, cfg)?.np_transform(phi)
}

pub fn check_energy_identity(
    mesh: &Mesh,
    cfg: &InversionConfig,
    phi: &Density,
) -> Result<IdentityReport> {
    if mesh.dimension() != 3 {
        return Err(Error::Unsupported(
            "the quadratic-form identity is three-dimensional".into(),
        ));
    }
    InversionSetup::new(mesh, cfg)?.energy(phi)
}

pub fn check_conformal_pairing(
    mesh: &Mesh,
    cfg: &InversionConfig,
    phi: &Density,
    psi: &Density,
) -> Result<IdentityReport> {
    InversionSetup::new(mesh, cfg)?.conformal(phi, psi)
}

/// `phi` minus its weighted mean.
pub fn remove_mean(mesh: &Mesh, phi: &Density) -> Result<Density> {
    let w = mesh.weights();
    let mean = phi.integral(w) / w.iter().sum::<f64>();
    Density::new(mesh, phi.values().iter().map(|v| v - mean).collect())
}

/// Rayleigh quotient on the image curve of a pushed-forward eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pushforward {
    pub eigenvalue: f64,
    pub rayleigh: f64,
}

/// Spectra of a curve and of its inverted image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraComparison {
    pub original: Vec<f64>,
    pub image: Vec<f64>,
    /// Bottleneck distance of the sorted spectra with the top eigenvalue
    /// `1/2` removed from each.
    pub distance: f64,
    pub position: Position,
    pub pushforward: Vec<Pushforward>,
}

/// Number of leading nontrivial eigenvectors pushed to the image.
pub const PUSHFORWARD_COUNT: usize = 6;

pub fn compare_spectra_under_inversion_2d(
    curve: &Mesh,
    cfg: &InversionConfig,
) -> Result<SpectraComparison> {
    if curve.dimension() != 2 {
        return Err(Error::Unsupported("spectrum comparison is for curves".into()));
    }
    let pair = InversionPair::new(curve, cfg)?;
    let ops = energy_operators(&pair.original)?;
    let ops_star = energy_operators(&pair.image)?;
    let opts = SpectrumOptions {
        vectors: true,
        ..SpectrumOptions::default()
    };
    let spec = np_spectrum(&ops.s, &ops.k, &opts)?;
    let spec_star = np_spectrum(&ops_star.s, &ops_star.k, &SpectrumOptions::default())?;

    let distance = spec.eigenvalues[1..]
        .iter()
        .zip(&spec_star.eigenvalues[1..])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    // the dilation before assembly scales |y - p| uniformly, which a
    // Rayleigh quotient does not see
    let mut pushforward = Vec::new();
    for idx in 1..=PUSHFORWARD_COUNT.min(curve.len() - 1) {
        let v = spec.eigenvector(idx).expect("vectors requested");
        let phi = Density::new(&pair.original, v.into_values())?;
        let phi_star = pair.transform(&phi)?.into_values();
        let phi_star = Density::new(&ops_star.mesh, phi_star)?;
        let num = quadratic_form_np(&ops_star.s, &ops_star.k, &phi_star)?;
        let den = energy_inner_product(&ops_star.s, &phi_star, &phi_star)?;
        pushforward.push(Pushforward {
            eigenvalue: spec.eigenvalues[idx],
            rayleigh: num / den,
        });
    }
    Ok(SpectraComparison {
        original: spec.eigenvalues,
        image: spec_star.eigenvalues,
        distance,
        position: cfg.position,
        pushforward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_shape, ShapeSpec};

    fn sphere(radius: f64, n: usize) -> Mesh {
        build_shape(&ShapeSpec::sphere(radius, n)).unwrap()
    }

    #[test]
    fn density_transform_examples() {
        let mesh = sphere(2.0, 8);
        let cfg = InversionConfig::new(&mesh, &[0.0, 0.0, 0.0], 1.0).unwrap();
        let phi = transform_density(&mesh, &cfg, &Density::constant(&mesh, 5.0)).unwrap();
        assert!(phi.values().iter().all(|v| (v - 40.0).abs() < 1e-12));

        let circle = build_shape(&ShapeSpec::circle(0.5, 32)).unwrap();
        let cfg = InversionConfig::new(&circle, &[0.0, 0.0], 1.0).unwrap();
        let phi = transform_density(&circle, &cfg, &Density::constant(&circle, 8.0)).unwrap();
        assert!(phi.values().iter().all(|v| (v - 2.0).abs() < 1e-12));

        let shifted = build_shape(&ShapeSpec::sphere(1.0, 8).with_offset(&[0.3, -0.2, 0.1])).unwrap();
        let cfg = InversionConfig::new(&shifted, &[0.3, -0.2, 0.1], 1.0).unwrap();
        let f = Density::random_smooth(&shifted, 3);
        let g = transform_density(&shifted, &cfg, &f).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn density_transform_is_an_involution() {
        let mesh = build_shape(&ShapeSpec::dumbbell(8)).unwrap();
        let cfg = InversionConfig::new(&mesh, &[0.0, 0.0, 0.0], 0.7).unwrap();
        let pair = InversionPair::new(&mesh, &cfg).unwrap();
        let phi = Density::random_smooth(&mesh, 11);
        let back = InversionPair::new(&pair.image, &pair.inverse_config()).unwrap();
        let twice = back.transform(&pair.transform(&phi).unwrap()).unwrap();
        for (a, b) in phi.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
        assert!(pair.transform(&Density::random_smooth(&pair.image, 1)).is_err());
    }

    #[test]
    fn sphere_closed_forms() {
        for (radius, expected_k) in [(1.0, 0.5), (2.0, 4.0)] {
            let mesh = sphere(radius, 12);
            let cfg = InversionConfig::new(&mesh, &[0.0, 0.0, 0.0], 1.0).unwrap();
            let setup = InversionSetup::new(&mesh, &cfg).unwrap();
            let one = Density::constant(&mesh, 1.0);

            let np = setup.np_transform(&one).unwrap();
            assert_eq!(np.identity, IdentityKind::NpInterior);
            for (l, r) in np.lhs.iter().zip(&np.rhs) {
                assert!((l / expected_k - 1.0).abs() < 0.01, "{l} {r}");
                assert!((r / expected_k - 1.0).abs() < 0.01, "{l} {r}");
            }

            let energy = setup.energy(&one).unwrap();
            let target = 4.0 * PI * radius.powi(3);
            assert!((energy.lhs[0] / target - 1.0).abs() < 0.01, "{:?}", energy.lhs);
            assert!((energy.rhs[0] / target - 1.0).abs() < 0.01, "{:?}", energy.rhs);

            let sl = setup.single_layer(&one).unwrap();
            assert!(sl.rhs.iter().all(|v| (v / -(radius * radius) - 1.0).abs() < 0.01));
            assert!(sl.residual < 0.01);
        }
    }

    #[test]
    fn conformal_sphere_constant() {
        let mesh = sphere(1.0, 12);
        let cfg = InversionConfig::new(&mesh, &[0.1, 0.0, -0.2], 1.0).unwrap();
        let one = Density::constant(&mesh, 1.0);
        let rep = check_conformal_pairing(&mesh, &cfg, &one, &one).unwrap();
        assert!((rep.rhs[0] / (4.0 * PI) - 1.0).abs() < 0.01);
        assert!(rep.residual < 0.01);
        let zero = Density::zeros(&mesh);
        let rep = check_conformal_pairing(&mesh, &cfg, &zero, &zero).unwrap();
        assert_eq!(rep.lhs[0], 0.0);
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn circle_exterior_np_transform() {
        let mesh = build_shape(&ShapeSpec::circle(1.0, 128)).unwrap();
        let cfg = InversionConfig::new(&mesh, &[3.0, 0.0], 1.0).unwrap();
        assert_eq!(cfg.position, Position::Exterior);
        let rep = check_np_transform(&mesh, &cfg, &Density::constant(&mesh, 1.0)).unwrap();
        assert_eq!(rep.identity, IdentityKind::NpExterior);
        assert!(rep.residual < 1e-6, "{}", rep.residual);
    }

    #[test]
    fn ellipse_identities_2d() {
        let mesh = build_shape(&ShapeSpec::ellipse(2.0, 1.0, 128)).unwrap();
        for center in [[0.1, 0.2], [3.0, 1.0]] {
            let cfg = InversionConfig::new(&mesh, &center, 1.3).unwrap();
            let setup = InversionSetup::new(&mesh, &cfg).unwrap();
            let phi = Density::random_smooth(&mesh, 5);
            let mean_free = remove_mean(&mesh, &phi).unwrap();
            for f in [&phi, &mean_free] {
                assert!(setup.single_layer(f).unwrap().residual < 1e-6);
                assert!(setup.np_transform(f).unwrap().residual < 1e-6);
            }
            let psi = remove_mean(&mesh, &Density::random_smooth(&mesh, 6)).unwrap();
            assert!(setup.conformal(&mean_free, &psi).unwrap().residual < 1e-6);
            assert!(matches!(setup.conformal(&phi, &psi), Err(Error::Unsupported(_))));
            assert!(matches!(setup.energy(&phi), Err(Error::Unsupported(_))));
        }
    }

    #[test]
    fn report_json_round_trip() {
        let mesh = build_shape(&ShapeSpec::circle(1.0, 32)).unwrap();
        let cfg = InversionConfig::new(&mesh, &[0.2, 0.0], 1.0).unwrap();
        let rep = check_single_layer_transform(&mesh, &cfg, &Density::constant(&mesh, 1.0)).unwrap();
        let text = rep.to_json();
        let back: IdentityReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.residual, rep.residual);
        assert_eq!(back.meshes, rep.meshes);
        assert!(text.contains("\"identity\": \"single_layer\""));
    }

    #[test]
    fn ellipse_spectrum_invariance() {
        let mesh = build_shape(&ShapeSpec::ellipse(2.0, 1.0, 96)).unwrap();
        for (center, sign) in [([0.1, 0.0], -1.0), ([5.0, 0.0], 1.0)] {
            let cfg = InversionConfig::new(&mesh, &center, 1.0).unwrap();
            let cmp = compare_spectra_under_inversion_2d(&mesh, &cfg).unwrap();
            assert!(cmp.distance < 1e-5, "{center:?}: {}", cmp.distance);
            for pf in &cmp.pushforward {
                assert!((pf.rayleigh - sign * pf.eigenvalue).abs() < 1e-5, "{pf:?}");
            }
        }
    }
}
