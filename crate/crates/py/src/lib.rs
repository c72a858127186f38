//! Python bindings: the metric, geodesic integration, and target shooting.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kropina::error::KropinaError;
use kropina::integrate::{integrate, shoot_to_target, IntegratorConfig, StopReason};
use kropina::navigation::KropinaMetric;
use kropina::scenario::{
    constant_wind_nav, generalized_metric, original_metric, scaled_nav, SHOOT_BRACKET,
};

fn err(e: KropinaError) -> PyErr {
    match e {
        KropinaError::Config { .. }
        | KropinaError::Io { .. }
        | KropinaError::DimensionMismatch { .. }
        | KropinaError::NonFiniteCoordinates { .. }
        | KropinaError::NormMismatch { .. }
        | KropinaError::NonPositiveSpeed { .. }
        | KropinaError::BadInitialState { .. }
        | KropinaError::ExcludedHeading { .. }
        | KropinaError::EmptyInput { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn config(t_end: f64, rel_tol: f64, stride: f64) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol,
        abs_tol: rel_tol * 1e-2,
        t_end,
        output_stride: stride,
        ..IntegratorConfig::default()
    }
}

/// One integrated geodesic, sampled on a uniform time grid.
#[pyclass(frozen, name = "Trajectory", module = "kropina_py")]
struct PyTrajectory {
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    f_value: Vec<f64>,
    stop: &'static str,
}

impl PyTrajectory {
    fn from_core(traj: &kropina::integrate::Trajectory) -> PyTrajectory {
        let n = traj.samples.len();
        let mut t = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut vx = Vec::with_capacity(n);
        let mut vy = Vec::with_capacity(n);
        let mut f_value = Vec::with_capacity(n);
        for s in &traj.samples {
            t.push(s.t);
            x.push(s.x[0]);
            y.push(s.x[1]);
            vx.push(s.v[0]);
            vy.push(s.v[1]);
            f_value.push(s.f_value);
        }
        let stop = match traj.stop {
            StopReason::TimeLimit => "time_limit",
            StopReason::DomainBoundary => "domain_boundary",
            StopReason::StepFailure => "step_failure",
        };
        PyTrajectory {
            t,
            x,
            y,
            vx,
            vy,
            f_value,
            stop,
        }
    }
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    #[getter]
    fn vx(&self) -> Vec<f64> {
        self.vx.clone()
    }

    #[getter]
    fn vy(&self) -> Vec<f64> {
        self.vy.clone()
    }

    #[getter]
    fn f_value(&self) -> Vec<f64> {
        self.f_value.clone()
    }

    /// Why integration stopped: "time_limit", "domain_boundary", or
    /// "step_failure".
    #[getter]
    fn stop(&self) -> &'static str {
        self.stop
    }

    /// Final position.
    fn end(&self) -> (f64, f64) {
        (*self.x.last().unwrap(), *self.y.last().unwrap())
    }

    fn __len__(&self) -> usize {
        self.t.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory({} samples to t = {:.6}, stop = {})",
            self.t.len(),
            self.t.last().copied().unwrap_or(0.0),
            self.stop
        )
    }
}

/// A navigation metric: craft speed `|u(x)|` against a wind of equal
/// strength. Values are travel times; geodesics are time-minimal paths.
#[pyclass(frozen, name = "Metric", module = "kropina_py")]
struct PyMetric {
    inner: KropinaMetric,
    label: String,
}

#[pymethods]
impl PyMetric {
    /// The swirl scenario at full speed: `|u| = 1` everywhere.
    #[staticmethod]
    fn swirl_original() -> PyMetric {
        PyMetric {
            inner: original_metric(),
            label: "swirl_original".to_string(),
        }
    }

    /// The swirl scenario with the position-dependent speed profile.
    #[staticmethod]
    fn swirl_generalized() -> PyMetric {
        PyMetric {
            inner: generalized_metric(),
            label: "swirl_generalized".to_string(),
        }
    }

    /// Constant wind `(wx, wy)` with matching constant craft speed.
    #[staticmethod]
    fn constant_wind(wx: f64, wy: f64) -> PyResult<PyMetric> {
        let nav = constant_wind_nav([wx, wy]);
        let origin = kropina::ChartPoint::new(vec![0.0, 0.0]).map_err(err)?;
        let report = nav.validate(&[origin]);
        if !report.passed {
            return Err(PyValueError::new_err(format!(
                "wind ({wx}, {wy}) does not define a valid metric"
            )));
        }
        Ok(PyMetric {
            inner: KropinaMetric::new(nav),
            label: format!("constant_wind({wx}, {wy})"),
        })
    }

    /// The swirl wind direction scaled to constant strength `c`.
    #[staticmethod]
    fn swirl_scaled(c: f64) -> PyResult<PyMetric> {
        if !(c.is_finite() && c > 0.0) {
            return Err(PyValueError::new_err(format!(
                "wind strength must be positive, got {c}"
            )));
        }
        Ok(PyMetric {
            inner: KropinaMetric::new(scaled_nav(c)),
            label: format!("swirl_scaled({c})"),
        })
    }

    /// Metric value F(x, v): the time cost per unit of parameter.
    fn value(&self, x: f64, y: f64, vx: f64, vy: f64) -> PyResult<f64> {
        self.inner.eval(&[x, y], &[vx, vy]).map_err(err)
    }

    /// Twice the inner product of v with the wind; positive inside the
    /// admissible cone.
    fn beta(&self, x: f64, y: f64, vx: f64, vy: f64) -> PyResult<f64> {
        self.inner.beta(&[x, y], &[vx, vy]).map_err(err)
    }

    /// Resultant velocity for heading `phi` at `(x, y)`.
    fn heading_velocity(&self, x: f64, y: f64, phi: f64) -> PyResult<(f64, f64)> {
        let v = self
            .inner
            .nav()
            .heading_velocity(&[x, y], phi)
            .map_err(err)?;
        Ok((v[0], v[1]))
    }

    /// Integrate the geodesic launched from `(x, y)` at heading `phi0`.
    #[pyo3(signature = (x, y, phi0, t_end, rel_tol = 1e-10, stride = 0.01))]
    fn geodesic(
        &self,
        x: f64,
        y: f64,
        phi0: f64,
        t_end: f64,
        rel_tol: f64,
        stride: f64,
    ) -> PyResult<PyTrajectory> {
        let v0 = self
            .inner
            .nav()
            .heading_velocity(&[x, y], phi0)
            .map_err(err)?;
        let traj = integrate(&self.inner, &[x, y], &v0, &config(t_end, rel_tol, stride))
            .map_err(err)?;
        Ok(PyTrajectory::from_core(&traj))
    }

    /// Find the heading that reaches `(tx, ty)` from `(x, y)` and return
    /// `(phi0, travel_time, miss)`.
    #[pyo3(signature = (x, y, tx, ty, t_end = 6.0, rel_tol = 1e-8))]
    fn shoot(
        &self,
        x: f64,
        y: f64,
        tx: f64,
        ty: f64,
        t_end: f64,
        rel_tol: f64,
    ) -> PyResult<(f64, f64, f64)> {
        let outcome = shoot_to_target(
            &self.inner,
            &[x, y],
            &[tx, ty],
            SHOOT_BRACKET,
            &config(t_end, rel_tol, 0.01),
        )
        .map_err(err)?;
        Ok((outcome.phi0, outcome.travel_time, outcome.miss))
    }

    fn __repr__(&self) -> String {
        format!("Metric({})", self.label)
    }
}

#[pymodule]
fn kropina_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetric>()?;
    m.add_class::<PyTrajectory>()?;
    Ok(())
}
