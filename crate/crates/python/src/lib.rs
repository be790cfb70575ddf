//! Python bindings.
//!
//! Shapes are immutable `Shape` objects; densities are plain lists of nodal
//! values in node order. Reports come back as dictionaries with the same
//! fields as the JSON emitted by the command-line tool.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use npspectra::certify::{certify_with, CertifyOptions};
use npspectra::geometry::{
    build_shape, concavity_scan as scan, find_witness_center as witness, invert_shape,
    InversionConfig, Mesh, ShapeSpec,
};
use npspectra::inversion::{compare_spectra_under_inversion_2d, InversionSetup};
use npspectra::layerpot::{
    assemble_np_adjoint, assemble_single_layer, jump_residual as jump, Density,
};
use npspectra::spectral::{np_spectrum_of, plemelj_residual as plemelj, SpectrumOptions};
use npspectra::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Eigen(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn report<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &value)
}

/// A discretized closed curve (2D) or surface (3D).
#[pyclass(name = "Shape", module = "npspectra", frozen)]
struct PyShape {
    mesh: Mesh,
}

fn build(spec: ShapeSpec) -> PyResult<PyShape> {
    Ok(PyShape {
        mesh: build_shape(&spec).map_err(py_err)?,
    })
}

#[pymethods]
impl PyShape {
    /// Build from a JSON shape specification.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        build(ShapeSpec::from_json(text).map_err(py_err)?)
    }

    #[staticmethod]
    #[pyo3(signature = (radius=1.0, nodes=128))]
    fn circle(radius: f64, nodes: usize) -> PyResult<Self> {
        build(ShapeSpec::circle(radius, nodes))
    }

    #[staticmethod]
    #[pyo3(signature = (a, b, nodes=128))]
    fn ellipse(a: f64, b: f64, nodes: usize) -> PyResult<Self> {
        build(ShapeSpec::ellipse(a, b, nodes))
    }

    /// Polar radius `c0 + sum_k c_k cos(k t)`.
    #[staticmethod]
    #[pyo3(signature = (coeffs, nodes=128))]
    fn star2d(coeffs: Vec<f64>, nodes: usize) -> PyResult<Self> {
        build(ShapeSpec::star2d(coeffs, nodes))
    }

    #[staticmethod]
    #[pyo3(signature = (radius=1.0, refinement=8))]
    fn sphere(radius: f64, refinement: usize) -> PyResult<Self> {
        build(ShapeSpec::sphere(radius, refinement))
    }

    /// Spheroid with equatorial semi-axis `a` and polar semi-axis `c`.
    #[staticmethod]
    #[pyo3(signature = (a, c, refinement=8))]
    fn spheroid(a: f64, c: f64, refinement: usize) -> PyResult<Self> {
        build(ShapeSpec::spheroid(a, c, refinement))
    }

    /// Surface of revolution about the z-axis with polar-angle profile
    /// `c0 + sum_k c_k cos(k t)`.
    #[staticmethod]
    #[pyo3(signature = (coeffs, refinement=8))]
    fn star3d(coeffs: Vec<f64>, refinement: usize) -> PyResult<Self> {
        build(ShapeSpec::star3d(coeffs, refinement))
    }

    /// The profile `1 + 0.7 cos(2 t)`.
    #[staticmethod]
    #[pyo3(signature = (refinement=8))]
    fn dumbbell(refinement: usize) -> PyResult<Self> {
        build(ShapeSpec::dumbbell(refinement))
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.mesh.dimension()
    }

    #[getter]
    fn refinement(&self) -> usize {
        self.mesh.refinement()
    }

    #[getter]
    fn mesh_id(&self) -> String {
        self.mesh.id().to_string()
    }

    fn __len__(&self) -> usize {
        self.mesh.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Shape(dimension={}, nodes={}, refinement={}, id={})",
            self.mesh.dimension(),
            self.mesh.len(),
            self.mesh.refinement(),
            self.mesh.id()
        )
    }

    fn nodes(&self) -> Vec<Vec<f64>> {
        let d = self.mesh.dimension();
        (0..self.mesh.len()).map(|i| self.mesh.node(i)[..d].to_vec()).collect()
    }

    fn normals(&self) -> Vec<Vec<f64>> {
        let d = self.mesh.dimension();
        (0..self.mesh.len()).map(|i| self.mesh.normal(i)[..d].to_vec()).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.mesh.weights().to_vec()
    }

    /// Curvature (2D) or Gaussian curvature (3D) per node, if known.
    fn curvature(&self) -> Option<Vec<f64>> {
        self.mesh.curvature().map(<[f64]>::to_vec)
    }

    fn contains(&self, point: Vec<f64>) -> PyResult<bool> {
        if point.len() != self.mesh.dimension() {
            return Err(PyValueError::new_err("point dimension does not match the shape"));
        }
        let mut q = [0.0; 3];
        q[..point.len()].copy_from_slice(&point);
        Ok(self.mesh.contains(&q))
    }

    /// Image under the inversion with the given center and radius.
    #[pyo3(signature = (center, radius=1.0))]
    fn invert(&self, center: Vec<f64>, radius: f64) -> PyResult<PyShape> {
        let cfg = InversionConfig::new(&self.mesh, &center, radius).map_err(py_err)?;
        Ok(PyShape {
            mesh: invert_shape(&self.mesh, &cfg).map_err(py_err)?,
        })
    }

    /// Smooth pseudo-random nodal density.
    #[pyo3(signature = (seed=0))]
    fn random_density(&self, seed: u64) -> Vec<f64> {
        Density::random_smooth(&self.mesh, seed).into_values()
    }
}

fn density_or_one(mesh: &Mesh, values: Option<Vec<f64>>) -> PyResult<Density> {
    match values {
        Some(v) => Density::new(mesh, v).map_err(py_err),
        None => Ok(Density::constant(mesh, 1.0)),
    }
}

/// NP eigenvalues, largest first.
#[pyfunction]
#[pyo3(signature = (shape, count=None))]
fn spectrum(py: Python<'_>, shape: &PyShape, count: Option<usize>) -> PyResult<Vec<f64>> {
    let opts = SpectrumOptions {
        count,
        ..SpectrumOptions::default()
    };
    py.detach(|| np_spectrum_of(&shape.mesh, &opts))
        .map(|r| r.eigenvalues)
        .map_err(py_err)
}

/// Relative defect of the discrete Plemelj symmetrization.
#[pyfunction]
fn plemelj_residual(py: Python<'_>, shape: &PyShape) -> PyResult<f64> {
    py.detach(|| {
        let s = assemble_single_layer(&shape.mesh)?;
        let k = assemble_np_adjoint(&shape.mesh)?;
        plemelj(&s, &k)
    })
    .map_err(py_err)
}

/// Extrapolated jump-relation residuals `(exterior, interior)`; the
/// density defaults to the constant 1.
#[pyfunction]
#[pyo3(signature = (shape, density=None))]
fn jump_residual(py: Python<'_>, shape: &PyShape, density: Option<Vec<f64>>) -> PyResult<(f64, f64)> {
    let phi = density_or_one(&shape.mesh, density)?;
    py.detach(|| jump(&shape.mesh, &phi)).map_err(py_err)
}

/// Nodal values of the transformed density on the inverted shape.
#[pyfunction]
#[pyo3(signature = (shape, center, density, radius=1.0))]
fn transform_density(shape: &PyShape, center: Vec<f64>, density: Vec<f64>, radius: f64) -> PyResult<Vec<f64>> {
    let cfg = InversionConfig::new(&shape.mesh, &center, radius).map_err(py_err)?;
    let phi = Density::new(&shape.mesh, density).map_err(py_err)?;
    npspectra::inversion::transform_density(&shape.mesh, &cfg, &phi)
        .map(Density::into_values)
        .map_err(py_err)
}

/// Check one inversion identity: `single_layer`, `np_transform`, `energy`
/// or `conformal`. Returns the report with both sides as `lhs`/`rhs`.
#[pyfunction]
#[pyo3(signature = (shape, identity, center=None, radius=1.0, density=None, other=None))]
fn verify<'py>(
    py: Python<'py>,
    shape: &PyShape,
    identity: &str,
    center: Option<Vec<f64>>,
    radius: f64,
    density: Option<Vec<f64>>,
    other: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mesh = &shape.mesh;
    let center = center.unwrap_or_else(|| vec![0.0; mesh.dimension()]);
    let cfg = InversionConfig::new(mesh, &center, radius).map_err(py_err)?;
    let phi = density_or_one(mesh, density)?;
    let psi = match other {
        Some(v) => Density::new(mesh, v).map_err(py_err)?,
        None => phi.clone(),
    };
    if !["single_layer", "np_transform", "energy", "conformal"].contains(&identity) {
        return Err(PyValueError::new_err(format!("unknown identity {identity:?}")));
    }
    let rep = py
        .detach(|| {
            let setup = InversionSetup::new(mesh, &cfg)?;
            match identity {
                "single_layer" => setup.single_layer(&phi),
                "np_transform" => setup.np_transform(&phi),
                "energy" => setup.energy(&phi),
                _ => setup.conformal(&phi, &psi),
            }
        })
        .map_err(py_err)?;
    let out = report(py, &rep)?;
    out.set_item("lhs", rep.lhs)?;
    out.set_item("rhs", rep.rhs)?;
    Ok(out)
}

/// Nodal scan of `(x - p) . nu`.
#[pyfunction]
fn concavity_scan<'py>(py: Python<'py>, shape: &PyShape, center: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    if center.len() != shape.mesh.dimension() {
        return Err(PyValueError::new_err("center dimension does not match the shape"));
    }
    report(py, &scan(&shape.mesh, &center))
}

/// Interior center with the largest concavity violation, or `None`.
#[pyfunction]
fn find_witness_center<'py>(py: Python<'py>, shape: &PyShape) -> PyResult<Bound<'py, PyAny>> {
    match py.detach(|| witness(&shape.mesh)) {
        Some((_, rep)) => report(py, &rep),
        None => Ok(py.None().into_bound(py)),
    }
}

/// Negative-eigenvalue certificate; `center=None` searches for a witness.
#[pyfunction]
#[pyo3(signature = (shape, center=None, spectra=true, threshold=0.05))]
fn certify<'py>(
    py: Python<'py>,
    shape: &PyShape,
    center: Option<Vec<f64>>,
    spectra: bool,
    threshold: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = CertifyOptions {
        spectra,
        threshold,
        ..CertifyOptions::default()
    };
    let cert = py
        .detach(|| certify_with(&shape.mesh, center.as_deref(), &opts))
        .map_err(py_err)?;
    report(py, &cert)
}

/// Spectra of a curve and of its inverted image.
#[pyfunction]
#[pyo3(signature = (shape, center, radius=1.0))]
fn compare_spectra_2d<'py>(
    py: Python<'py>,
    shape: &PyShape,
    center: Vec<f64>,
    radius: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = InversionConfig::new(&shape.mesh, &center, radius).map_err(py_err)?;
    let cmp = py
        .detach(|| compare_spectra_under_inversion_2d(&shape.mesh, &cfg))
        .map_err(py_err)?;
    report(py, &cmp)
}

#[pymodule]
#[pyo3(name = "npspectra")]
fn npspectra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyShape>()?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(plemelj_residual, m)?)?;
    m.add_function(wrap_pyfunction!(jump_residual, m)?)?;
    m.add_function(wrap_pyfunction!(transform_density, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(concavity_scan, m)?)?;
    m.add_function(wrap_pyfunction!(find_witness_center, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(compare_spectra_2d, m)?)?;
    Ok(())
}
