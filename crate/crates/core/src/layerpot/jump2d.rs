//! Jump relation on curves.
//!
//! Curve data are periodic and equispaced in the parameter, so the density
//! and the parametrization are carried to a finer grid by trigonometric
//! interpolation. There the trapezoidal rule resolves `grad S` down to the
//! smallest probe offset, and the one-sided limits are polynomial
//! extrapolations in the offset. No finite differences are taken.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rayon::prelude::*;

use super::{operator_row, JumpOptions, JumpReport, OperatorKind};
use crate::error::{Error, Result};
use crate::geometry::{CurveMesh, Mesh};

/// Probe offsets are `k * delta` for `k = 1..=LEVELS`.
const LEVELS: usize = 6;
/// Fine-grid spacing is at most `delta / RESOLVE`; the trapezoidal error at
/// distance `delta` then decays like `exp(-2 pi RESOLVE)`.
const RESOLVE: f64 = 4.0;

/// Evaluate the trigonometric interpolants of several equally long periodic
/// sample vectors on a grid `factor` times finer. Even lengths split the
/// Nyquist mode symmetrically.
fn upsample(fields: &[&[f64]], factor: usize) -> Vec<Vec<f64>> {
    let n = fields[0].len();
    let m = n * factor;
    let top = n / 2;
    let coeffs: Vec<Vec<(f64, f64)>> = fields
        .iter()
        .map(|v| {
            (0..=top)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (j, x) in v.iter().enumerate() {
                        let (s, c) = (2.0 * PI * ((k * j) % n) as f64 / n as f64).sin_cos();
                        re += x * c;
                        im -= x * s;
                    }
                    (re / n as f64, im / n as f64)
                })
                .collect()
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let t = 2.0 * PI * p as f64 / m as f64;
            let mut out: Vec<f64> = coeffs.iter().map(|c| c[0].0).collect();
            for k in 1..=top {
                let (s, c) = ((k as f64) * t).sin_cos();
                let weight = if 2 * k == n { 1.0 } else { 2.0 };
                for (o, ck) in out.iter_mut().zip(&coeffs) {
                    let (re, im) = ck[k];
                    *o += weight * (re * c - im * s);
                }
            }
            out
        })
        .collect();
    (0..fields.len())
        .map(|f| columns.iter().map(|col| col[f]).collect())
        .collect()
}

/// Lagrange weights for the value at 0 of the polynomial through `1..=LEVELS`.
fn extrapolation_weights() -> [f64; LEVELS] {
    let mut w = [1.0; LEVELS];
    for (k, wk) in w.iter_mut().enumerate() {
        for j in 0..LEVELS {
            if j != k {
                *wk *= -((j + 1) as f64) / (k as f64 - j as f64);
            }
        }
    }
    w
}

fn probe_nodes(curve: &CurveMesh, mesh: &Mesh, delta: f64, samples: usize) -> Vec<usize> {
    let n = curve.len();
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
        let (x, nu) = (curve.nodes()[i], curve.normals()[i]);
        let ok = (1..=LEVELS).flat_map(|l| [l as f64, -(l as f64)]).all(|s| {
            let q = x + s * delta * nu;
            let (nearest, dist) = mesh.nearest_node(&[q.x, q.y, 0.0]);
            nearest == i && dist >= 0.75 * s.abs() * delta
        });
        if ok {
            chosen.push(i);
        }
    }
    chosen
}

pub(super) fn curve_jump(mesh: &Mesh, curve: &CurveMesh, phi: &[f64], opts: &JumpOptions) -> Result<JumpReport> {
    // largest offset is half of `step_factor` spacings
    let delta = opts.step_factor * curve.spacing() / (2.0 * LEVELS as f64);
    let nodes = probe_nodes(curve, mesh, delta, opts.samples);
    if nodes.is_empty() {
        return Err(Error::NearBoundary {
            point: Vec::new(),
            distance: delta,
            spacing: curve.spacing(),
        });
    }

    let widest = curve.weights().iter().fold(0.0f64, |m, w| m.max(*w));
    let factor = ((RESOLVE * widest / delta).ceil() as usize).max(1);
    let xs: Vec<f64> = curve.nodes().iter().map(|v| v.x).collect();
    let ys: Vec<f64> = curve.nodes().iter().map(|v| v.y).collect();
    let dxs: Vec<f64> = curve.tangents().iter().map(|v| v.x).collect();
    let dys: Vec<f64> = curve.tangents().iter().map(|v| v.y).collect();
    let fine = upsample(&[&xs, &ys, &dxs, &dys, phi], factor);
    let h = 2.0 * PI / fine[0].len() as f64;
    let sources: Vec<(Vector2<f64>, f64)> = (0..fine[0].len())
        .map(|p| {
            let speed = Vector2::new(fine[2][p], fine[3][p]).norm();
            (Vector2::new(fine[0][p], fine[1][p]), h * speed * fine[4][p])
        })
        .collect();
    let grad = |q: Vector2<f64>| -> Vector2<f64> {
        sources
            .iter()
            .map(|(y, wf)| {
                let d = q - y;
                d * (wf / d.norm_squared())
            })
            .sum::<Vector2<f64>>()
            / (2.0 * PI)
    };

    let lagrange = extrapolation_weights();
    let rows: Vec<(f64, f64, f64, f64)> = nodes
        .par_iter()
        .map(|&i| -> Result<_> {
            let k_row = operator_row(mesh, OperatorKind::Kstar, i)?;
            let kphi: f64 = k_row.iter().zip(phi).map(|(a, b)| a * b).sum();
            let (x, nu) = (curve.nodes()[i], curve.normals()[i]);
            let limit = |side: f64| {
                (0..LEVELS)
                    .map(|l| lagrange[l] * nu.dot(&grad(x + side * (l + 1) as f64 * delta * nu)))
                    .sum::<f64>()
            };
            Ok((limit(1.0), limit(-1.0), kphi + 0.5 * phi[i], kphi - 0.5 * phi[i]))
        })
        .collect::<Result<_>>()?;
    let scale = rows
        .iter()
        .map(|r| r.2.abs().max(r.3.abs()))
        .fold(1e-14, f64::max);
    Ok(JumpReport {
        res_plus: rows.iter().map(|r| (r.0 - r.2).abs()).fold(0.0, f64::max) / scale,
        res_minus: rows.iter().map(|r| (r.1 - r.3).abs()).fold(0.0, f64::max) / scale,
        nodes,
        step: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_reproduces_trig_polynomials() {
        for n in [9usize, 16] {
            let f = |t: f64| 1.0 + (2.0 * t).cos() - 0.5 * (3.0 * t).sin();
            let v: Vec<f64> = (0..n).map(|j| f(2.0 * PI * j as f64 / n as f64)).collect();
            let fine = upsample(&[&v], 5);
            for (p, got) in fine[0].iter().enumerate() {
                let t = 2.0 * PI * p as f64 / (5 * n) as f64;
                assert!((got - f(t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ellipse_jump_converges() {
        use crate::geometry::{build_shape, ShapeSpec};
        use crate::layerpot::{jump_residual, Density};
        let mut last = f64::INFINITY;
        for n in [128, 256] {
            let mesh = build_shape(&ShapeSpec::ellipse(2.0, 1.0, n)).unwrap();
            let (plus, minus) = jump_residual(&mesh, &Density::random_smooth(&mesh, 2)).unwrap();
            let res = plus.max(minus);
            assert!(res < last && res < 1e-5, "{n}: {plus:e} {minus:e}");
            last = res;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn extrapolation_is_exact_for_quintics() {
        let w = extrapolation_weights();
        let p = |x: f64| 2.0 - x + 0.3 * x.powi(3) - 0.01 * x.powi(5);
        let got: f64 = (0..LEVELS).map(|l| w[l] * p((l + 1) as f64)).sum();
        assert!((got - 2.0).abs() < 1e-9);
    }
}
