//! Fundamental tensor and geodesic spray of a Finsler metric, obtained by
//! differentiating `F^2` in jet arithmetic rather than by finite differences.
//!
//! With `g_ij = (1/2) d^2 F^2 / dy^i dy^j`, the spray coefficients are
//!
//! ```text
//! G^i = (1/4) g^{il} ( d^2 F^2/dy^l dx^k  y^k  -  dF^2/dx^l ),
//! ```
//!
//! and geodesics solve `x'' = -2 G(x, x')`. Both `g` (0-homogeneous) and `G`
//! (2-homogeneous) are computed at the direction rescaled to unit reference
//! norm and mapped back, which keeps the tensor solve well conditioned for
//! directions of any magnitude.

use nalgebra::DMatrix;

use crate::chart::ChartMetric;
use crate::error::KropinaError;
use crate::jet::Jet2;
use crate::navigation::KropinaMetric;

/// Condition-number ceiling beyond which the tensor solve is refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A positively 1-homogeneous metric on (a conic subset of) the tangent
/// bundle, smooth enough to carry second-order jets.
pub trait FinslerMetric: Send + Sync {
    fn dim(&self) -> usize;

    /// Metric value at a plain phase point, with domain checking.
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError>;

    /// `F^2` in jet arithmetic. Callers establish domain membership through
    /// [`FinslerMetric::eval`] first.
    fn eval_f2_jet(&self, x: &[Jet2], y: &[Jet2]) -> Jet2;

    /// Norm used to rescale directions before differentiating; any positive
    /// 1-homogeneous functional works, the default is Euclidean.
    fn reference_norm(&self, _x: &[f64], y: &[f64]) -> f64 {
        y.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Signed dimensionless margin to the domain boundary; metrics defined
    /// on the whole slit tangent bundle report 1.
    fn domain_margin(&self, _x: &[f64], _y: &[f64]) -> Result<f64, KropinaError> {
        Ok(1.0)
    }
}

impl FinslerMetric for KropinaMetric {
    fn dim(&self) -> usize {
        KropinaMetric::dim(self)
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
        KropinaMetric::eval(self, x, y)
    }

    fn eval_f2_jet(&self, x: &[Jet2], y: &[Jet2]) -> Jet2 {
        KropinaMetric::eval_f2_jet(self, x, y)
    }

    fn reference_norm(&self, x: &[f64], y: &[f64]) -> f64 {
        self.nav()
            .metric()
            .inner(x, y, y)
            .map(|q| q.max(0.0).sqrt())
            .unwrap_or_else(|_| y.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    fn domain_margin(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
        KropinaMetric::domain_margin(self, x, y)
    }
}

/// The norm of a Riemannian metric viewed as a Finsler metric; the spray
/// then reduces to the Levi-Civita geodesic equation.
#[derive(Clone)]
pub struct RiemannianNorm(pub ChartMetric);

impl FinslerMetric for RiemannianNorm {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
        self.0.norm(x, y)
    }

    fn eval_f2_jet(&self, x: &[Jet2], y: &[Jet2]) -> Jet2 {
        let n = self.0.dim();
        let hm = self.0.entries_jet(x);
        let mut acc = Jet2::constant(0.0);
        for i in 0..n {
            for j in 0..n {
                acc = acc + &hm[i * n + j] * &y[i] * &y[j];
            }
        }
        acc
    }
}

/// Spray coefficients `G^i` at a phase point, with the condition estimate of
/// the tensor solve that produced them.
#[derive(Clone, Debug)]
pub struct SprayCoefficients {
    pub g: Vec<f64>,
    pub condition: f64,
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `F^2` differentiated twice in the fibre only, at the rescaled direction.
fn f2_jet_in_y(metric: &dyn FinslerMetric, x: &[f64], yhat: &[f64]) -> Result<Jet2, KropinaError> {
    let n = metric.dim();
    let xj: Vec<Jet2> = x.iter().map(|&c| Jet2::constant(c)).collect();
    let yj: Vec<Jet2> = yhat
        .iter()
        .enumerate()
        .map(|(i, &c)| Jet2::variable(c, i, n))
        .collect();
    let f2 = metric.eval_f2_jet(&xj, &yj);
    if !f2.is_finite() {
        return Err(KropinaError::NonSmoothEvaluation { point: x.to_vec() });
    }
    Ok(f2)
}

/// Fundamental tensor `g_ij(x, y)`, checked symmetric positive definite.
pub fn fundamental_tensor(
    metric: &dyn FinslerMetric,
    x: &[f64],
    y: &[f64],
) -> Result<DMatrix<f64>, KropinaError> {
    metric.eval(x, y)?;
    let n = metric.dim();
    let s = metric.reference_norm(x, y);
    let yhat: Vec<f64> = y.iter().map(|c| c / s).collect();
    let f2 = f2_jet_in_y(metric, x, &yhat)?;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = 0.5 * f2.hess(i, j);
        }
    }
    if nalgebra::Cholesky::new(g.clone()).is_none() {
        return Err(KropinaError::NotPositiveDefinite { point: x.to_vec() });
    }
    Ok(g)
}

/// Spray coefficients at `(x, y)`; refuses the solve when the fundamental
/// tensor's condition estimate exceeds [`CONDITION_LIMIT`].
pub fn spray(
    metric: &dyn FinslerMetric,
    x: &[f64],
    y: &[f64],
) -> Result<SprayCoefficients, KropinaError> {
    metric.eval(x, y)?;
    let n = metric.dim();
    let s = metric.reference_norm(x, y);
    let yhat: Vec<f64> = y.iter().map(|c| c / s).collect();

    // One evaluation with base and fibre both active: slots 0..n hold x,
    // slots n..2n hold y.
    let m = 2 * n;
    let xj: Vec<Jet2> = x
        .iter()
        .enumerate()
        .map(|(i, &c)| Jet2::variable(c, i, m))
        .collect();
    let yj: Vec<Jet2> = yhat
        .iter()
        .enumerate()
        .map(|(i, &c)| Jet2::variable(c, n + i, m))
        .collect();
    let f2 = metric.eval_f2_jet(&xj, &yj);
    if !f2.is_finite() {
        return Err(KropinaError::NonSmoothEvaluation { point: x.to_vec() });
    }

    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = 0.5 * f2.hess(n + i, n + j);
        }
    }
    let inv = g.clone().try_inverse().ok_or(KropinaError::DegenerateTensor {
        point: x.to_vec(),
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(&g) * one_norm(&inv);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(KropinaError::DegenerateTensor {
            point: x.to_vec(),
            condition,
        });
    }

    let mut rhs = DMatrix::zeros(n, 1);
    for l in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            acc += f2.hess(n + l, k) * yhat[k];
        }
        rhs[(l, 0)] = acc - f2.grad(l);
    }
    let sol = &inv * rhs;
    // G is 2-homogeneous: scale back from the unit-norm direction.
    let g_coeffs: Vec<f64> = (0..n).map(|l| 0.25 * s * s * sol[(l, 0)]).collect();
    Ok(SprayCoefficients {
        g: g_coeffs,
        condition,
    })
}

/// First-order phase-space form of the geodesic equation:
/// `(x, v) -> (v, -2 G(x, v))`.
pub fn geodesic_rhs(
    metric: &dyn FinslerMetric,
    x: &[f64],
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), KropinaError> {
    let s = spray(metric, x, v)?;
    Ok((v.to_vec(), s.g.iter().map(|gi| -2.0 * gi).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ScalarField, VectorField};
    use crate::navigation::NavigationData;

    fn unit_wind_east() -> KropinaMetric {
        KropinaMetric::new(
            NavigationData::new(
                ChartMetric::euclidean(2),
                VectorField::constant(vec![1.0, 0.0]),
                ScalarField::constant(1.0),
            )
            .unwrap(),
        )
    }

    /// Equal-strength data with position-dependent wind on a Euclidean sea.
    fn swirling_nav() -> KropinaMetric {
        let speed = ScalarField::from_fn(|x| (x[1].powi(2) * -0.2).exp() * 0.6 + 0.3);
        let speed2 = speed.clone();
        let wind = VectorField::from_fn(2, move |x| {
            let ang = &x[0] * 0.8 - &x[1] * 0.5;
            let u = speed2.eval_jet(x);
            vec![&u * ang.cos(), &u * ang.sin()]
        });
        KropinaMetric::new(NavigationData::new(ChartMetric::euclidean(2), wind, speed).unwrap())
    }

    fn value_f2(metric: &dyn FinslerMetric, x: &[f64], y: &[f64]) -> f64 {
        let xj: Vec<Jet2> = x.iter().map(|&c| Jet2::constant(c)).collect();
        let yj: Vec<Jet2> = y.iter().map(|&c| Jet2::constant(c)).collect();
        metric.eval_f2_jet(&xj, &yj).value()
    }

    /// Spray assembled purely from central differences of the value channel.
    /// The step sits at the accuracy optimum for second differences, whose
    /// rounding floor at smaller steps would exceed the comparison tolerance.
    fn fd_spray(metric: &dyn FinslerMetric, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = metric.dim();
        let step = 1e-4;
        let mut z: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
        let mut f2_at = |z: &[f64]| value_f2(metric, &z[..n], &z[n..]);
        let d2 = |a: usize, b: usize, f2_at: &mut dyn FnMut(&[f64]) -> f64, z: &mut Vec<f64>| {
            if a == b {
                z[a] += step;
                let fp = f2_at(z);
                z[a] -= 2.0 * step;
                let fm = f2_at(z);
                z[a] += step;
                let f0 = f2_at(z);
                (fp - 2.0 * f0 + fm) / (step * step)
            } else {
                let mut acc = 0.0;
                for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    z[a] += sa * step;
                    z[b] += sb * step;
                    acc += sign * f2_at(z);
                    z[a] -= sa * step;
                    z[b] -= sb * step;
                }
                acc / (4.0 * step * step)
            }
        };
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = 0.5 * d2(n + i, n + j, &mut f2_at, &mut z);
            }
        }
        let mut rhs = DMatrix::zeros(n, 1);
        for l in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += d2(n + l, k, &mut f2_at, &mut z) * y[k];
            }
            z[l] += step;
            let fp = f2_at(&z);
            z[l] -= 2.0 * step;
            let fm = f2_at(&z);
            z[l] += step;
            rhs[(l, 0)] = acc - (fp - fm) / (2.0 * step);
        }
        let sol = g.try_inverse().unwrap() * rhs;
        (0..n).map(|l| 0.25 * sol[(l, 0)]).collect()
    }

    #[test]
    fn euclidean_sea_with_constant_wind_has_no_spray() {
        let k = unit_wind_east();
        let s = spray(&k, &[0.3, -0.8], &[1.4, 0.7]).unwrap();
        for gi in &s.g {
            assert!(gi.abs() < 1e-13, "spray should vanish, got {:?}", s.g);
        }
    }

    #[test]
    fn riemannian_norm_recovers_levi_civita_geodesics() {
        // Conformal metric e^{2 lam} delta with lam = a x + b y has
        // Christoffels G^i = (d lam . v) v^i - |v|^2 (grad lam)^i / 2.
        let (a, b) = (0.3, -0.45);
        let h = ChartMetric::from_fn(2, move |x| {
            let c = ((&x[0] * a + &x[1] * b) * 2.0).exp();
            vec![c.clone(), Jet2::constant(0.0), Jet2::constant(0.0), c]
        });
        let metric = RiemannianNorm(h);
        let x = [0.4, 0.9];
        let v = [1.2, -0.3];
        let s = spray(&metric, &x, &v).unwrap();
        let dl = a * v[0] + b * v[1];
        let v2 = v[0] * v[0] + v[1] * v[1];
        let expect = [
            dl * v[0] - 0.5 * v2 * a,
            dl * v[1] - 0.5 * v2 * b,
        ];
        for i in 0..2 {
            assert!(
                (s.g[i] - expect[i]).abs() < 1e-12,
                "G[{i}] = {} vs {}",
                s.g[i],
                expect[i]
            );
        }
    }

    #[test]
    fn spray_matches_the_finite_difference_oracle() {
        let k = swirling_nav();
        let pts = [
            ([0.0, 0.0], [1.2, 0.3]),
            ([0.7, -0.4], [0.9, 0.5]),
            ([-1.1, 0.6], [0.4, -0.1]),
            ([0.2, 1.3], [1.0, 0.8]),
        ];
        for (x, y) in pts {
            let ad = spray(&k, &x, &y).unwrap();
            let fd = fd_spray(&k, &x, &y);
            for i in 0..2 {
                let scale = fd[i].abs().max(1.0);
                assert!(
                    (ad.g[i] - fd[i]).abs() <= 1e-6 * scale,
                    "at {x:?} {y:?}: ad {} vs fd {}",
                    ad.g[i],
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn tensor_is_zero_homogeneous_and_spray_is_two_homogeneous() {
        let k = swirling_nav();
        let x = [0.5, -0.2];
        let y = [1.1, 0.4];
        let g1 = fundamental_tensor(&k, &x, &y).unwrap();
        let s1 = spray(&k, &x, &y).unwrap();
        for lam in [0.05, 3.0, 80.0] {
            let yl: Vec<f64> = y.iter().map(|c| c * lam).collect();
            let gl = fundamental_tensor(&k, &x, &yl).unwrap();
            let sl = spray(&k, &x, &yl).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((gl[(i, j)] - g1[(i, j)]).abs() <= 1e-10 * g1[(i, j)].abs().max(1.0));
                }
                assert!(
                    (sl.g[i] - lam * lam * s1.g[i]).abs() <= 1e-10 * (lam * lam * s1.g[i].abs()).max(1e-10),
                    "lam {lam}: {} vs {}",
                    sl.g[i],
                    lam * lam * s1.g[i]
                );
            }
        }
    }

    #[test]
    fn euler_identity_holds() {
        let k = swirling_nav();
        for (x, y) in [
            ([0.0, 0.0], [1.0, 0.2]),
            ([0.9, 0.3], [0.7, 0.6]),
            ([-0.5, 1.2], [1.3, -0.2]),
        ] {
            let g = fundamental_tensor(&k, &x, &y).unwrap();
            let f = k.eval(&x, &y).unwrap();
            let mut quad = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    quad += g[(i, j)] * y[i] * y[j];
                }
            }
            assert!(
                (quad - f * f).abs() <= 1e-12 * (f * f),
                "at {x:?} {y:?}: g(y,y) = {quad} vs F^2 = {}",
                f * f
            );
        }
    }

    #[test]
    fn near_boundary_directions_are_refused() {
        let k = unit_wind_east();
        // Cosine margin ~3e-14 against the wind normal: far outside any
        // usable conditioning regime but still inside the conic domain guard.
        let y = [3.0e-14, 1.0];
        match spray(&k, &[0.0, 0.0], &y) {
            Err(KropinaError::DegenerateTensor { condition, .. }) => {
                assert!(condition > CONDITION_LIMIT);
            }
            Err(KropinaError::OutsideConicDomain { .. }) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn geodesic_rhs_pairs_velocity_with_acceleration() {
        let k = swirling_nav();
        let x = [0.1, 0.2];
        let v = [0.8, 0.3];
        let (dx, dv) = geodesic_rhs(&k, &x, &v).unwrap();
        let s = spray(&k, &x, &v).unwrap();
        assert_eq!(dx, v.to_vec());
        for i in 0..2 {
            assert!((dv[i] + 2.0 * s.g[i]).abs() < 1e-15);
        }
    }
}
