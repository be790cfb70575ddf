use proptest::prelude::*;

use npspectra::geometry::{build_shape, InversionConfig, Mesh, Position, ShapeSpec};
use npspectra::inversion::{check_conformal_pairing, remove_mean, InversionPair};
use npspectra::layerpot::Density;
use npspectra::spectral::{energy_inner_product, energy_operators, np_spectrum_of, SpectrumOptions};

fn ellipse(n: usize) -> Mesh {
    build_shape(&ShapeSpec::ellipse(2.0, 1.0, n)).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn point3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inversion_map_is_an_involution(p in point3(), x in point3(), r in 0.2..3.0f64) {
        prop_assume!(dist(&p, &x) > 1e-3);
        let cfg = InversionConfig { center: p.clone(), radius: r, position: Position::Interior };
        let y = cfg.map_point(&x);
        prop_assert!((dist(&y, &p) * dist(&x, &p) / (r * r) - 1.0).abs() < 1e-12);
        let back = cfg.map_point(&y);
        prop_assert!(dist(&back, &x) <= 1e-10 * (1.0 + dist(&x, &p)));
    }

    #[test]
    fn inversion_distance_identity(p in point3(), x in point3(), y in point3(), r in 0.2..3.0f64) {
        let (dx, dy) = (dist(&x, &p), dist(&y, &p));
        prop_assume!(dx > 1e-2 && dy > 1e-2);
        let cfg = InversionConfig { center: p, radius: r, position: Position::Exterior };
        let lhs = dist(&cfg.map_point(&x), &cfg.map_point(&y));
        let rhs = r * r * dist(&x, &y) / (dx * dy);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn shape_spec_json_round_trip(a in 0.1..5.0f64, b in 0.1..5.0f64, n in 8usize..400, off in prop::collection::vec(-2.0..2.0f64, 2)) {
        let spec = ShapeSpec::ellipse(a, b, n).with_offset(&off);
        let back = ShapeSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(back, spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn density_transform_is_an_involution(cx in -1.5..1.5f64, cy in -0.7..0.7f64, r in 0.3..2.0f64, seed in 0u64..1000) {
        let mesh = ellipse(64);
        let cfg = match InversionConfig::new(&mesh, &[cx, cy], r) {
            Ok(cfg) => cfg,
            Err(_) => return Ok(()),
        };
        let pair = InversionPair::new(&mesh, &cfg).unwrap();
        let back = InversionPair::new(&pair.image, &pair.inverse_config()).unwrap();
        prop_assert_eq!(back.image.len(), mesh.len());
        for i in 0..mesh.len() {
            prop_assert!(dist(&back.image.node(i), &mesh.node(i)) < 1e-10);
        }
        let phi = Density::random_smooth(&mesh, seed);
        let twice = back.transform(&pair.transform(&phi).unwrap()).unwrap();
        for (a, b) in phi.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn energy_pairing_is_symmetric_and_bilinear(s1 in 0u64..1000, s2 in 0u64..1000, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let mesh = ellipse(48);
        let ops = energy_operators(&mesh).unwrap();
        let phi = Density::random_smooth(&ops.mesh, s1);
        let psi = Density::random_smooth(&ops.mesh, s2);
        let pp = energy_inner_product(&ops.s, &phi, &phi).unwrap();
        let ps = energy_inner_product(&ops.s, &phi, &psi).unwrap();
        let sp = energy_inner_product(&ops.s, &psi, &phi).unwrap();
        let ss = energy_inner_product(&ops.s, &psi, &psi).unwrap();
        prop_assert!((ps - sp).abs() <= 1e-12 * (pp.abs() + ss.abs()));
        let combo: Vec<f64> = phi.values().iter().zip(psi.values()).map(|(x, y)| a * x + b * y).collect();
        let combo = Density::new(&ops.mesh, combo).unwrap();
        let lhs = energy_inner_product(&ops.s, &combo, &combo).unwrap();
        let rhs = a * a * pp + 2.0 * a * b * ps + b * b * ss;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (a * a * pp + b * b * ss + 1e-300));
        // Cauchy-Schwarz in the energy norm
        prop_assert!(ps * ps <= pp * ss * (1.0 + 1e-10));
    }

    #[test]
    fn conformal_pairing_on_mean_zero_curves(cx in -1.5..1.5f64, cy in -0.7..0.7f64, s1 in 0u64..1000) {
        let mesh = ellipse(96);
        let cfg = match InversionConfig::new(&mesh, &[cx, cy], 1.0) {
            Ok(cfg) => cfg,
            Err(_) => return Ok(()),
        };
        let phi = remove_mean(&mesh, &Density::random_smooth(&mesh, s1)).unwrap();
        let psi = remove_mean(&mesh, &Density::random_smooth(&mesh, s1 + 1)).unwrap();
        let rep = check_conformal_pairing(&mesh, &cfg, &phi, &psi).unwrap();
        prop_assert!(rep.residual < 1e-6, "{}", rep.residual);
    }
}

#[test]
fn spectrum_is_invariant_under_rigid_motion_and_dilation() {
    let base = np_spectrum_of(&ellipse(64), &SpectrumOptions::default()).unwrap().eigenvalues;
    for spec in [
        ShapeSpec::ellipse(2.0, 1.0, 64).with_offset(&[3.0, -1.0]),
        ShapeSpec::ellipse(6.0, 3.0, 64),
    ] {
        let eig = np_spectrum_of(&build_shape(&spec).unwrap(), &SpectrumOptions::default())
            .unwrap()
            .eigenvalues;
        let gap = base.iter().zip(&eig).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "{gap}");
    }
}

#[test]
fn spectrum_lies_in_the_closed_half_interval() {
    for spec in [
        ShapeSpec::star2d(vec![1.0, 0.0, 0.0, 0.3], 96),
        ShapeSpec::dumbbell(8),
    ] {
        let eig = np_spectrum_of(&build_shape(&spec).unwrap(), &SpectrumOptions::default())
            .unwrap()
            .eigenvalues;
        assert!((eig[0] - 0.5).abs() < 1e-3, "{}", eig[0]);
        assert!(eig.iter().all(|v| v.abs() <= 0.5 + 1e-3));
    }
}
