//! Closed-form potential of a uniform density on a flat triangle.

use nalgebra::Vector3;

type V3 = Vector3<f64>;

/// `int_T 1 / |x - y| dA(y)` for the flat triangle `T`, exact for any
/// observation point including points on the panel.
pub(crate) fn triangle_inv_r(tri: &[V3; 3], x: &V3) -> f64 {
    let normal = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let twice_area = normal.norm();
    if twice_area == 0.0 {
        return 0.0;
    }
    let n = normal / twice_area;
    let d = (x - tri[0]).dot(&n);
    let ad = d.abs();
    let rho = x - n * d;
    let scale = (tri[1] - tri[0]).norm();
    let tiny = 1e-14 * scale;

    let mut total = 0.0;
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        let len = (b - a).norm();
        let l = (b - a) / len;
        let u = l.cross(&n);
        let t0 = (a - rho).dot(&u);
        let lm = (a - rho).dot(&l);
        let lp = (b - rho).dot(&l);
        let r02 = t0 * t0 + d * d;
        let rm = (r02 + lm * lm).sqrt();
        let rp = (r02 + lp * lp).sqrt();
        if t0.abs() > tiny {
            // ln(R + l) without cancellation for l < 0
            let g = |r: f64, l: f64| {
                if l >= 0.0 {
                    (r + l).ln()
                } else {
                    r02.ln() - (r - l).ln()
                }
            };
            total += t0 * (g(rp, lp) - g(rm, lm));
            if ad > tiny {
                total -= ad
                    * ((t0 * lp / (r02 + ad * rp)).atan() - (t0 * lm / (r02 + ad * rm)).atan());
            }
        }
    }
    total
}

/// `grad_x int_T 1 / |x - y| dA(y)`, for `x` off the panel edges.
///
/// In-plane part from the divergence theorem over the edges, normal part
/// from the solid angle; the result does not depend on vertex order.
pub(crate) fn triangle_grad_inv_r(tri: &[V3; 3], x: &V3) -> V3 {
    let normal = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let twice_area = normal.norm();
    if twice_area == 0.0 {
        return V3::zeros();
    }
    let n = normal / twice_area;
    let d = (x - tri[0]).dot(&n);
    let rho = x - n * d;
    let mut grad = V3::zeros();
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        let l = (b - a).normalize();
        let u = l.cross(&n);
        let t0 = (a - rho).dot(&u);
        let lm = (a - rho).dot(&l);
        let lp = (b - rho).dot(&l);
        let r02 = t0 * t0 + d * d;
        let rm = (r02 + lm * lm).sqrt();
        let rp = (r02 + lp * lp).sqrt();
        // int_edge 1/R = ln((R+ + l+) / (R- + l-)), evaluated without cancellation
        let edge = if lm >= 0.0 {
            ((rp + lp) / (rm + lm)).ln()
        } else if lp <= 0.0 {
            ((rm - lm) / (rp - lp)).ln()
        } else {
            ((rp + lp) * (rm - lm) / r02).ln()
        };
        grad -= u * edge;
    }
    let (a, b, c) = (tri[0] - x, tri[1] - x, tri[2] - x);
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let omega = 2.0
        * a.dot(&b.cross(&c))
            .atan2(la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la);
    grad + n * omega
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Polar integration about the projection of `x` onto the panel plane:
    /// each edge contributes `int [sqrt(s(theta)^2 + d^2) - |d|] dtheta` over
    /// the signed angle it subtends.
    fn polar_oracle(tri: &[V3; 3], x: &V3) -> f64 {
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        let d = (x - tri[0]).dot(&n);
        let rho = x - n * d;
        let e1 = (tri[0] - rho).try_normalize(1e-300).unwrap_or_else(|| {
            (tri[1] - tri[0]).normalize()
        });
        let e1 = (e1 - n * n.dot(&e1)).normalize();
        let e2 = n.cross(&e1);
        let local = |v: &V3| {
            let w = v - rho;
            (w.dot(&e1), w.dot(&e2))
        };
        let mut total = 0.0;
        for k in 0..3 {
            let (ax, ay) = local(&tri[k]);
            let (bx, by) = local(&tri[(k + 1) % 3]);
            let cross = ax * by - ay * bx;
            if cross.abs() < 1e-12 {
                continue;
            }
            let th_a = ay.atan2(ax);
            let dth = cross.atan2(ax * bx + ay * by);
            // distance along the ray at angle theta to the edge line
            let (ex, ey) = (bx - ax, by - ay);
            let m = 4000;
            let f = |th: f64| {
                let (c, s) = (th.cos(), th.sin());
                let t = (ax * ey - ay * ex) / (c * ey - s * ex);
                (t * t + d * d).sqrt() - d.abs()
            };
            let h = dth / m as f64;
            let mut acc = f(th_a) + f(th_a + dth);
            for j in 1..m {
                acc += f(th_a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            total += acc * h / 3.0;
        }
        total
    }

    fn tri() -> [V3; 3] {
        [
            V3::new(0.1, -0.2, 0.3),
            V3::new(1.2, 0.1, 0.2),
            V3::new(0.3, 0.9, 0.6),
        ]
    }

    #[test]
    fn matches_polar_oracle() {
        let t = tri();
        let c = (t[0] + t[1] + t[2]) / 3.0;
        let n = (t[1] - t[0]).cross(&(t[2] - t[0])).normalize();
        let points = [
            c,
            c + n * 0.05,
            c - n * 0.3,
            t[0] + (t[1] - t[0]) * 0.4,
            t[1] + n * 1e-3,
            V3::new(2.0, 1.5, -0.4),
            c + (t[1] - t[2]) * 0.9 + n * 0.1,
            c + (t[0] - c) * 1.7,
        ];
        for x in points {
            let exact = triangle_inv_r(&t, &x);
            let oracle = polar_oracle(&t, &x);
            assert!((exact - oracle).abs() < 1e-9 * oracle.abs().max(1.0), "{x:?}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn far_field_limit() {
        let t = tri();
        let area = 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
        let c = (t[0] + t[1] + t[2]) / 3.0;
        let x = c + V3::new(300.0, -200.0, 100.0);
        let exact = triangle_inv_r(&t, &x);
        assert!((exact * (x - c).norm() / area - 1.0).abs() < 1e-5);
    }

    #[test]
    fn right_isoceles_vertex_value() {
        // int over the unit right triangle seen from its right-angle vertex:
        // int_0^{pi/2} 1 / (cos + sin) dtheta = sqrt(2) atanh(1/sqrt(2))
        let t = [V3::zeros(), V3::new(1.0, 0.0, 0.0), V3::new(0.0, 1.0, 0.0)];
        let exact = 2f64.sqrt() * (0.5f64.sqrt()).atanh();
        assert!((triangle_inv_r(&t, &V3::zeros()) - exact).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = tri();
        let c = (t[0] + t[1] + t[2]) / 3.0;
        let n = (t[1] - t[0]).cross(&(t[2] - t[0])).normalize();
        let mut flipped = t;
        flipped.swap(1, 2);
        for x in [c + n * 0.05, c - n * 0.3, V3::new(2.0, 1.5, -0.4), c + (t[0] - c) * 1.7 + n * 0.02] {
            let g = triangle_grad_inv_r(&t, &x);
            assert!((g - triangle_grad_inv_r(&flipped, &x)).norm() < 1e-12);
            let h = 1e-5;
            for k in 0..3 {
                let mut e = V3::zeros();
                e[k] = h;
                let fd = (triangle_inv_r(&t, &(x + e)) - triangle_inv_r(&t, &(x - e))) / (2.0 * h);
                assert!((g[k] - fd).abs() < 1e-6 * g.norm().max(1.0), "{x:?} {k}: {} vs {fd}", g[k]);
            }
        }
    }
}
