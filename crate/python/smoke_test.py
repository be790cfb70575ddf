"""Smoke test for the npspectra Python module.

Build and install first, e.g.

    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/npspectra-*.whl
    python python/smoke_test.py
"""

import math

import npspectra


def check(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    if not ok:
        raise SystemExit(1)


def main():
    circle = npspectra.Shape.circle(1.0, 64)
    eig = npspectra.spectrum(circle)
    check("circle spectrum", abs(eig[0] - 0.5) < 1e-10 and max(abs(v) for v in eig[1:]) < 1e-8)

    ellipse = npspectra.Shape.ellipse(2.0, 1.0, 96)
    eig = npspectra.spectrum(ellipse, count=3)
    check("ellipse top eigenvalues", abs(eig[1] - 1 / 6) < 1e-8 and abs(eig[2] - 1 / 18) < 1e-8, str(eig))

    cmp = npspectra.compare_spectra_2d(ellipse, [0.1, 0.0])
    check("2D inversion invariance", cmp["distance"] < 1e-5, f"{cmp['distance']:.2e}")

    sphere = npspectra.Shape.sphere(1.0, 8)
    check("sphere shape", len(sphere) == 1280 and sphere.dimension == 3, repr(sphere))
    check("sphere area", abs(sum(sphere.weights()) / (4 * math.pi) - 1) < 1e-3)

    rep = npspectra.verify(sphere, "energy", center=[0.0, 0.0, 0.0])
    check("energy identity on sphere", rep["residual"] < 1e-2, f"{rep['residual']:.2e}")

    phi = sphere.random_density(7)
    image = sphere.invert([0.2, 0.0, 0.0])
    phi_star = npspectra.transform_density(sphere, [0.2, 0.0, 0.0], phi)
    check("density transform", len(phi_star) == len(image))

    plus, minus = npspectra.jump_residual(npspectra.Shape.sphere(1.0, 16))
    check("jump relation", max(plus, minus) < 0.02, f"{plus:.2e} {minus:.2e}")

    dumbbell = npspectra.Shape.dumbbell(8)
    cert = npspectra.certify(dumbbell, spectra=False)
    check("dumbbell certificate", cert["verdict"] == "certified_negative", f"gap {cert['identity_residual']:.2e}")

    try:
        sphere.invert([1.0, 0.0, 0.0])
    except ValueError:
        check("boundary center rejected", True)
    else:
        check("boundary center rejected", False)


if __name__ == "__main__":
    main()
