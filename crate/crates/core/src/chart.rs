//! Points, tangent vectors, and smooth fields on a single coordinate chart.
//!
//! Fields are stored as closures over jet arithmetic so every consumer can
//! request values, gradients, and Hessians from one definition. Plain-number
//! evaluation runs the same closures with constant jets.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix};

use crate::error::KropinaError;
use crate::jet::Jet2;

/// A point in chart coordinates. Coordinates are finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, KropinaError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(KropinaError::NonFiniteCoordinates { coords });
        }
        Ok(ChartPoint { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// A tangent vector attached to a base point of matching dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: ChartPoint,
    components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, components: Vec<f64>) -> Result<Self, KropinaError> {
        if components.len() != base.dim() {
            return Err(KropinaError::DimensionMismatch {
                expected: base.dim(),
                got: components.len(),
            });
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(KropinaError::NonFiniteCoordinates { coords: components });
        }
        Ok(TangentVector { base, components })
    }

    pub fn base(&self) -> &ChartPoint {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }
}

type MatrixFn = dyn Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync;
type VectorFn = dyn Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync;
type ScalarFn = dyn Fn(&[Jet2]) -> Jet2 + Send + Sync;

/// Smooth symmetric positive-definite bilinear form given by its matrix
/// entries as a function of position.
#[derive(Clone)]
pub struct ChartMetric {
    dim: usize,
    entries: Arc<MatrixFn>,
}

impl ChartMetric {
    /// Build from a closure returning the row-major `dim * dim` entries.
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync + 'static,
    {
        ChartMetric {
            dim,
            entries: Arc::new(f),
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        ChartMetric::from_fn(dim, move |_| {
            let mut out = vec![Jet2::constant(0.0); dim * dim];
            for i in 0..dim {
                out[i * dim + i] = Jet2::constant(1.0);
            }
            out
        })
    }

    /// Pointwise scaling `factor(x) * h_ij(x)`; the factor must stay positive
    /// wherever the result is used as a metric.
    pub fn scaled(&self, factor: ScalarField) -> Self {
        let base = self.entries.clone();
        ChartMetric::from_fn(self.dim, move |x| {
            let c = factor.eval_jet(x);
            base(x).into_iter().map(|e| &c * e).collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries_jet(&self, x: &[Jet2]) -> Vec<Jet2> {
        (self.entries)(x)
    }

    /// Entry matrix at a plain point.
    pub fn matrix(&self, x: &[f64]) -> Result<DMatrix<f64>, KropinaError> {
        self.check_dim(x.len())?;
        let inputs: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v)).collect();
        let vals: Vec<f64> = (self.entries)(&inputs).iter().map(Jet2::value).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(KropinaError::NonSmoothEvaluation { point: x.to_vec() });
        }
        Ok(DMatrix::from_row_slice(self.dim, self.dim, &vals))
    }

    /// Cholesky factor at `x`; failure means the matrix is not positive
    /// definite there.
    pub fn cholesky(&self, x: &[f64]) -> Result<Cholesky<f64, nalgebra::Dyn>, KropinaError> {
        let m = self.matrix(x)?;
        Cholesky::new(m).ok_or_else(|| KropinaError::NotPositiveDefinite { point: x.to_vec() })
    }

    pub fn inner(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64, KropinaError> {
        self.check_dim(y.len())?;
        self.check_dim(z.len())?;
        let m = self.matrix(x)?;
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += m[(i, j)] * y[i] * z[j];
            }
        }
        Ok(acc)
    }

    /// Norm with a positive-definiteness check at `x`.
    pub fn norm(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
        self.check_dim(y.len())?;
        self.cholesky(x)?;
        Ok(self.inner(x, y, y)?.max(0.0).sqrt())
    }

    /// Positively oriented frame of vectors orthonormal for this metric at
    /// `x`, as rows. The first frame vector is parallel to the first chart
    /// axis, so for a Euclidean or conformally Euclidean metric the frame
    /// angle agrees with the chart angle.
    pub fn orthonormal_frame(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, KropinaError> {
        let chol = self.cholesky(x)?;
        let l = chol.l();
        // Rows of L^{-T}: solve L^T e_i with back substitution.
        let n = self.dim;
        let mut frame = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut rhs = DMatrix::zeros(n, 1);
            rhs[(i, 0)] = 1.0;
            let sol = l
                .transpose()
                .solve_upper_triangular(&rhs)
                .ok_or_else(|| KropinaError::NotPositiveDefinite { point: x.to_vec() })?;
            for j in 0..n {
                frame[i][j] = sol[(j, 0)];
            }
        }
        Ok(frame)
    }

    fn check_dim(&self, got: usize) -> Result<(), KropinaError> {
        if got != self.dim {
            Err(KropinaError::DimensionMismatch {
                expected: self.dim,
                got,
            })
        } else {
            Ok(())
        }
    }
}

/// Inner product `h_x(y, z)`.
pub fn metric_inner(
    h: &ChartMetric,
    x: &ChartPoint,
    y: &[f64],
    z: &[f64],
) -> Result<f64, KropinaError> {
    h.inner(x.coords(), y, z)
}

/// Norm `|y|_h` at `x`; fails if the metric is not positive definite there.
pub fn metric_norm(h: &ChartMetric, x: &ChartPoint, y: &[f64]) -> Result<f64, KropinaError> {
    h.norm(x.coords(), y)
}

/// Smooth vector field in chart components.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    components: Arc<VectorFn>,
}

impl VectorField {
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync + 'static,
    {
        VectorField {
            dim,
            components: Arc::new(f),
        }
    }

    pub fn constant(components: Vec<f64>) -> Self {
        let dim = components.len();
        VectorField::from_fn(dim, move |_| {
            components.iter().map(|&c| Jet2::constant(c)).collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_jet(&self, x: &[Jet2]) -> Vec<Jet2> {
        (self.components)(x)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, KropinaError> {
        let inputs: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v)).collect();
        let vals: Vec<f64> = (self.components)(&inputs).iter().map(Jet2::value).collect();
        if vals.len() != self.dim {
            return Err(KropinaError::DimensionMismatch {
                expected: self.dim,
                got: vals.len(),
            });
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(KropinaError::NonSmoothEvaluation { point: x.to_vec() });
        }
        Ok(vals)
    }
}

/// Smooth scalar field.
#[derive(Clone)]
pub struct ScalarField {
    value: Arc<ScalarFn>,
}

impl ScalarField {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&[Jet2]) -> Jet2 + Send + Sync + 'static,
    {
        ScalarField { value: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::from_fn(move |_| Jet2::constant(c))
    }

    pub fn eval_jet(&self, x: &[Jet2]) -> Jet2 {
        (self.value)(x)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, KropinaError> {
        let inputs: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v)).collect();
        let v = (self.value)(&inputs).value();
        if !v.is_finite() {
            return Err(KropinaError::NonSmoothEvaluation { point: x.to_vec() });
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn witch_hat_metric() -> ChartMetric {
        // Smooth SPD matrix with position-dependent anisotropy.
        ChartMetric::from_fn(2, |x| {
            let c = x[0].cos() * 0.3;
            vec![
                (x[1].powi(2) * 0.5 + 2.0),
                c.clone(),
                c,
                (x[0].powi(2) * 0.25 + 1.0),
            ]
        })
    }

    #[test]
    fn euclidean_norm_is_pythagorean() {
        let h = ChartMetric::euclidean(2);
        let x = ChartPoint::new(vec![7.0, -3.0]).unwrap();
        assert_eq!(metric_norm(&h, &x, &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn inner_is_bilinear_and_symmetric() {
        let h = witch_hat_metric();
        let x = ChartPoint::new(vec![0.4, -1.2]).unwrap();
        let y = [1.3, -0.2];
        let z = [0.5, 2.1];
        let w = [-0.7, 0.9];
        let iyz = metric_inner(&h, &x, &y, &z).unwrap();
        let izy = metric_inner(&h, &x, &z, &y).unwrap();
        assert!((iyz - izy).abs() < 1e-14);
        let a = 1.7;
        let b = -0.6;
        let combo: Vec<f64> = (0..2).map(|i| a * y[i] + b * w[i]).collect();
        let lhs = metric_inner(&h, &x, &combo, &z).unwrap();
        let rhs = a * iyz + b * metric_inner(&h, &x, &w, &z).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let bad = ChartMetric::from_fn(2, |_| {
            vec![
                Jet2::constant(1.0),
                Jet2::constant(0.0),
                Jet2::constant(0.0),
                Jet2::constant(-1.0),
            ]
        });
        let x = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            metric_norm(&bad, &x, &[1.0, 1.0]),
            Err(KropinaError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = ChartMetric::euclidean(2);
        let x = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            metric_inner(&h, &x, &[1.0, 0.0, 0.0], &[1.0, 0.0]),
            Err(KropinaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_points_are_rejected() {
        assert!(matches!(
            ChartPoint::new(vec![f64::NAN, 0.0]),
            Err(KropinaError::NonFiniteCoordinates { .. })
        ));
        let base = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        assert!(TangentVector::new(base, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn conformal_scaling_scales_norms() {
        let h = ChartMetric::euclidean(2);
        let scale = ScalarField::from_fn(|x| x[0].sin() * 0.5 + 1.5);
        let hs = h.scaled(scale.clone());
        let x = vec![0.7, -0.3];
        let y = [2.0, -1.0];
        let c = scale.eval(&x).unwrap();
        let expect = c.sqrt() * h.norm(&x, &y).unwrap();
        assert!((hs.norm(&x, &y).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn frame_is_orthonormal_and_oriented() {
        let h = witch_hat_metric();
        let x = vec![0.9, 0.4];
        let frame = h.orthonormal_frame(&x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = h.inner(&x, &frame[i], &frame[j]).unwrap();
                assert!((got - want).abs() < 1e-12, "frame[{i}].frame[{j}] = {got}");
            }
        }
        // First leg along the first axis, positive determinant.
        assert!(frame[0][1].abs() < 1e-15 && frame[0][0] > 0.0);
        assert!(frame[0][0] * frame[1][1] - frame[0][1] * frame[1][0] > 0.0);
    }
}
