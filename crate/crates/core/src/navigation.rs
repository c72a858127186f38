//! Navigation data and the metrics it induces.
//!
//! A craft with own-speed field `|u|` rides a wind `W` of exactly equal
//! strength, `|W|_h = |u|`. Displacing the speed sphere by such a wind makes
//! it pass through the origin of each tangent space, and solving the
//! resulting indicatrix condition for the travel-time functional yields a
//! metric of Kropina type,
//!
//! ```text
//! F(x, y) = |y|_h^2 / (2 h(y, W)),
//! ```
//!
//! defined only on the half-space of directions with h(y, W) > 0.

use crate::chart::{ChartMetric, ChartPoint, ScalarField, VectorField};
use crate::error::KropinaError;
use crate::jet::{solve_linear_jets, Jet2};

/// Relative tolerance for the defining constraint `|W|_h = |u|`.
pub const NORM_MATCH_TOL: f64 = 1e-10;

/// Dimensionless admissibility guard: a direction `y` is evaluable when
/// `h(y, W) > DOMAIN_GUARD * |y|_h * |W|_h`.
pub const DOMAIN_GUARD: f64 = 1e-12;

/// Stall guard for heading departures: a heading is excluded when the
/// resultant velocity falls below this fraction of the wind strength. At a
/// 0.02 margin the unit-indicatrix value is still good to about 5e-13;
/// closer to the stall direction cancellation destroys it.
pub const STALL_FRACTION: f64 = 0.02;

/// Wind and own-speed fields on a chart, constrained by `|W|_h = |u| > 0`.
#[derive(Clone)]
pub struct NavigationData {
    metric: ChartMetric,
    wind: VectorField,
    speed: ScalarField,
}

/// Outcome of sampling the navigation-data invariants over a point set.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub checked: usize,
    pub passed: bool,
    /// Worst relative mismatch of `|W|_h` against `|u|`.
    pub max_norm_mismatch: f64,
    pub failures: Vec<(Vec<f64>, KropinaError)>,
}

impl NavigationData {
    pub fn new(
        metric: ChartMetric,
        wind: VectorField,
        speed: ScalarField,
    ) -> Result<Self, KropinaError> {
        if wind.dim() != metric.dim() {
            return Err(KropinaError::DimensionMismatch {
                expected: metric.dim(),
                got: wind.dim(),
            });
        }
        Ok(NavigationData {
            metric,
            wind,
            speed,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &ChartMetric {
        &self.metric
    }

    pub fn wind(&self) -> &VectorField {
        &self.wind
    }

    pub fn speed(&self) -> &ScalarField {
        &self.speed
    }

    /// Check positive-definiteness of `h`, positivity of `|u|`, and the
    /// defining norm constraint at each sample point.
    pub fn validate(&self, points: &[ChartPoint]) -> ValidationReport {
        let mut failures = Vec::new();
        let mut max_mismatch: f64 = 0.0;
        for p in points {
            let x = p.coords();
            let step = (|| -> Result<(), KropinaError> {
                self.metric.cholesky(x)?;
                let u = self.speed.eval(x)?;
                if u <= 0.0 {
                    return Err(KropinaError::NonPositiveSpeed {
                        point: x.to_vec(),
                        speed: u,
                    });
                }
                let w = self.wind.eval(x)?;
                let wn = self.metric.norm(x, &w)?;
                let mismatch = (wn - u).abs() / u.max(wn);
                max_mismatch = max_mismatch.max(mismatch);
                if mismatch > NORM_MATCH_TOL {
                    return Err(KropinaError::NormMismatch {
                        point: x.to_vec(),
                        wind_norm: wn,
                        speed: u,
                    });
                }
                Ok(())
            })();
            if let Err(e) = step {
                failures.push((x.to_vec(), e));
            }
        }
        ValidationReport {
            checked: points.len(),
            passed: failures.is_empty(),
            max_norm_mismatch: max_mismatch,
            failures,
        }
    }

    /// Resultant velocity for heading angle `phi` measured in a positively
    /// oriented `h`-orthonormal frame: `W(x) + |u(x)| e(phi)`.
    ///
    /// Two-dimensional charts only. Headings at or near the one pointing
    /// exactly against the wind are rejected as excluded: the resultant
    /// there is zero or so small that the craft stalls, and metric values
    /// on such vectors drown in cancellation (the relative error of the
    /// unit-indicatrix value grows as the squared reciprocal of the
    /// resultant speed).
    pub fn heading_velocity(&self, x: &[f64], phi: f64) -> Result<Vec<f64>, KropinaError> {
        if self.dim() != 2 {
            return Err(KropinaError::DimensionMismatch {
                expected: 2,
                got: self.dim(),
            });
        }
        let frame = self.metric.orthonormal_frame(x)?;
        let u = self.speed.eval(x)?;
        let w = self.wind.eval(x)?;
        let (s, c) = phi.sin_cos();
        let v: Vec<f64> = (0..2)
            .map(|i| w[i] + u * (c * frame[0][i] + s * frame[1][i]))
            .collect();
        let beta = 2.0 * self.metric.inner(x, &v, &w)?;
        let vn = self.metric.norm(x, &v)?;
        let wn = self.metric.norm(x, &w)?;
        if beta <= STALL_FRACTION * vn * wn || vn == 0.0 {
            return Err(KropinaError::ExcludedHeading { phi });
        }
        Ok(v)
    }

    /// Same wind direction rescaled to unit strength, with unit own-speed:
    /// the companion data whose metric is conformal to this one's.
    pub fn unit_wind_data(&self) -> NavigationData {
        let wind = self.wind.clone();
        let speed = self.speed.clone();
        let dim = self.dim();
        let unit_wind = VectorField::from_fn(dim, move |x| {
            let u = speed.eval_jet(x);
            wind.eval_jet(x).into_iter().map(|wi| wi / &u).collect()
        });
        NavigationData {
            metric: self.metric.clone(),
            wind: unit_wind,
            speed: ScalarField::constant(1.0),
        }
    }
}

/// Which regime the indicatrix equation fell into at the queried point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricBranch {
    /// `|u| > |W|`: genuine quadratic, strictly convex unit ball.
    Randers,
    /// `|u| = |W|`: the quadratic degenerates to a linear equation.
    Kropina,
    /// `|u| < |W|`: the wind overpowers the craft; values exist only inside
    /// the downwind cone.
    Supercritical,
}

#[derive(Clone, Copy, Debug)]
pub struct IndicatrixSolution {
    pub value: f64,
    pub branch: MetricBranch,
}

/// Solve the indicatrix condition
/// `(|u|^2 - |W|^2) F^2 + 2 h(y, W) F - |y|^2 = 0`
/// for the positive root `F(x, y)`, with `|u|` and `|W|` allowed to differ.
///
/// Picks the branch by the sign of `|u|^2 - |W|^2` (within the norm-match
/// tolerance of zero counts as equal); in the supercritical regime the
/// smaller positive root, the faster crossing, is returned when one exists.
pub fn solve_indicatrix(
    h: &ChartMetric,
    wind: &VectorField,
    speed: &ScalarField,
    x: &ChartPoint,
    y: &[f64],
) -> Result<IndicatrixSolution, KropinaError> {
    let xs = x.coords();
    let m = h.matrix(xs)?;
    h.cholesky(xs)?;
    let w = wind.eval(xs)?;
    let u = speed.eval(xs)?;
    if u <= 0.0 {
        return Err(KropinaError::NonPositiveSpeed {
            point: xs.to_vec(),
            speed: u,
        });
    }
    if y.len() != h.dim() {
        return Err(KropinaError::DimensionMismatch {
            expected: h.dim(),
            got: y.len(),
        });
    }
    let quad = |a: &[f64], b: &[f64]| -> f64 {
        let n = h.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += m[(i, j)] * a[i] * b[j];
            }
        }
        acc
    };
    let c = quad(y, y);
    if c == 0.0 {
        return Err(KropinaError::ZeroVector);
    }
    let w2 = quad(&w, &w);
    let a = u * u - w2;
    let b = 2.0 * quad(y, &w);

    if a.abs() <= NORM_MATCH_TOL * (u * u + w2) {
        // Degenerate linear case: F = |y|^2 / (2 h(y, W)).
        let guard = DOMAIN_GUARD * c.sqrt() * w2.sqrt();
        if b <= guard {
            return Err(KropinaError::OutsideConicDomain {
                point: xs.to_vec(),
                beta: b,
                guard,
            });
        }
        return Ok(IndicatrixSolution {
            value: c / b,
            branch: MetricBranch::Kropina,
        });
    }

    let disc = b * b + 4.0 * a * c;
    if a > 0.0 {
        // One positive root; pick the cancellation-free form.
        let value = if b >= 0.0 {
            2.0 * c / (b + disc.sqrt())
        } else {
            (-b + disc.sqrt()) / (2.0 * a)
        };
        return Ok(IndicatrixSolution {
            value,
            branch: MetricBranch::Randers,
        });
    }
    // a < 0: roots exist only downwind with a real discriminant.
    if disc < 0.0 || b <= 0.0 {
        return Err(KropinaError::NoPositiveRoot { point: xs.to_vec() });
    }
    Ok(IndicatrixSolution {
        value: 2.0 * c / (b + disc.sqrt()),
        branch: MetricBranch::Supercritical,
    })
}

/// The Kropina metric induced by equal-strength navigation data.
#[derive(Clone)]
pub struct KropinaMetric {
    nav: NavigationData,
}

/// Result of comparing the metric against its unit-wind companion at one
/// phase point.
#[derive(Clone, Copy, Debug)]
pub struct ConformalComparison {
    /// Value under the full-strength data.
    pub full: f64,
    /// Value under the unit-wind companion data.
    pub normalized: f64,
    pub ratio: f64,
    /// `1 / |u(x)|`, the ratio the conformality relation predicts.
    pub inverse_speed: f64,
}

impl KropinaMetric {
    pub fn new(nav: NavigationData) -> Self {
        KropinaMetric { nav }
    }

    pub fn nav(&self) -> &NavigationData {
        &self.nav
    }

    pub fn dim(&self) -> usize {
        self.nav.dim()
    }

    /// `2 h(y, W)`, the quantity whose positivity delimits the conic domain.
    pub fn beta(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
        let w = self.nav.wind.eval(x)?;
        Ok(2.0 * self.nav.metric.inner(x, y, &w)?)
    }

    /// Dimensionless distance to the domain boundary:
    /// `h(y, W) / (|y|_h |W|_h)`, the cosine of the angle between `y` and
    /// the wind. Zero-homogeneous in `y`.
    pub fn domain_margin(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
        let w = self.nav.wind.eval(x)?;
        let m = self.nav.metric.matrix(x)?;
        let n = self.dim();
        let quad = |a: &[f64], b: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += m[(i, j)] * a[i] * b[j];
                }
            }
            acc
        };
        let denom = quad(y, y).sqrt() * quad(&w, &w).sqrt();
        if denom == 0.0 {
            return Err(KropinaError::ZeroVector);
        }
        Ok(quad(y, &w) / denom)
    }

    /// Metric value `F(x, y) = |y|_h^2 / (2 h(y, W))`.
    ///
    /// Directions with `h(y, W)` at or below the scale-aware guard are
    /// outside the conic domain and rejected.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
        let m = self.nav.metric.matrix(x)?;
        let w = self.nav.wind.eval(x)?;
        let n = self.dim();
        if y.len() != n {
            return Err(KropinaError::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let quad = |a: &[f64], b: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += m[(i, j)] * a[i] * b[j];
                }
            }
            acc
        };
        let alpha2 = quad(y, y);
        if alpha2 == 0.0 {
            return Err(KropinaError::ZeroVector);
        }
        let beta = 2.0 * quad(y, &w);
        let guard = DOMAIN_GUARD * alpha2.sqrt() * quad(&w, &w).sqrt();
        if beta <= 2.0 * guard {
            return Err(KropinaError::OutsideConicDomain {
                point: x.to_vec(),
                beta,
                guard: 2.0 * guard,
            });
        }
        Ok(alpha2 / beta)
    }

    /// `F^2` in jet arithmetic; the caller is responsible for the domain
    /// check through [`KropinaMetric::eval`] at the value point.
    pub fn eval_f2_jet(&self, x: &[Jet2], y: &[Jet2]) -> Jet2 {
        let n = self.dim();
        let hm = self.nav.metric.entries_jet(x);
        let w = self.nav.wind.eval_jet(x);
        let mut alpha2 = Jet2::constant(0.0);
        let mut half_beta = Jet2::constant(0.0);
        for i in 0..n {
            for j in 0..n {
                let hij = &hm[i * n + j];
                alpha2 = alpha2 + hij * &y[i] * &y[j];
                half_beta = half_beta + hij * &y[i] * &w[j];
            }
        }
        let q = alpha2 / (2.0 * half_beta);
        &q * &q
    }

    /// Compare against the unit-wind companion metric at one phase point.
    pub fn conformal_compare(&self, x: &[f64], y: &[f64]) -> Result<ConformalComparison, KropinaError> {
        let full = self.eval(x, y)?;
        let normalized = KropinaMetric::new(self.nav.unit_wind_data()).eval(x, y)?;
        let u = self.nav.speed.eval(x)?;
        Ok(ConformalComparison {
            full,
            normalized,
            ratio: full / normalized,
            inverse_speed: 1.0 / u,
        })
    }

    /// Evaluate this metric and the metric built from the conformally scaled
    /// sea `h / |u|^2` with the same wind; the two agree identically.
    pub fn conformal_sea_check(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64), KropinaError> {
        let speed = self.nav.speed.clone();
        let scaled = self
            .nav
            .metric
            .scaled(ScalarField::from_fn(move |xs| {
                speed.eval_jet(xs).powi(-2)
            }));
        let sea = KropinaMetric::new(NavigationData {
            metric: scaled,
            wind: self.nav.wind.clone(),
            speed: ScalarField::constant(1.0),
        });
        Ok((sea.eval(x, y)?, self.eval(x, y)?))
    }
}

/// Metric presented through its general one-form data: `F = a(y, y) / b(y)`
/// with `a = e^{-k} h` and `b_i = 2 e^{-k} (h W)_i` for some conformal
/// factor `e^k`.
#[derive(Clone)]
pub struct KropinaData {
    pub a: ChartMetric,
    /// Covariant components of the defining one-form.
    pub b: VectorField,
    /// `a^{ij} b_i b_j`, computed strictly from the stored fields.
    pub b2: ScalarField,
    /// Log-conformal factor relating `a` back to the navigation sea.
    pub k: ScalarField,
}

/// Express navigation data in one-form terms, optionally pulled through the
/// conformal factor `e^{k}`.
pub fn to_kropina_data(nav: &NavigationData, k: Option<ScalarField>) -> KropinaData {
    let k = k.unwrap_or_else(|| ScalarField::constant(0.0));
    let a = nav.metric().scaled({
        let k = k.clone();
        ScalarField::from_fn(move |x| (-k.eval_jet(x)).exp())
    });
    let b = {
        let k = k.clone();
        let h = nav.metric().clone();
        let wind = nav.wind().clone();
        let n = nav.dim();
        VectorField::from_fn(n, move |x| {
            let scale = 2.0 * (-k.eval_jet(x)).exp();
            let hm = h.entries_jet(x);
            let w = wind.eval_jet(x);
            (0..n)
                .map(|i| {
                    let mut acc = Jet2::constant(0.0);
                    for j in 0..n {
                        acc = acc + &hm[i * n + j] * &w[j];
                    }
                    acc * &scale
                })
                .collect()
        })
    };
    let b2 = {
        let a = a.clone();
        let b = b.clone();
        let n = nav.dim();
        ScalarField::from_fn(move |x| {
            let am = a.entries_jet(x);
            let bv = b.eval_jet(x);
            let binv = solve_linear_jets(n, &am, &bv);
            let mut acc = Jet2::constant(0.0);
            for i in 0..n {
                acc = acc + &bv[i] * &binv[i];
            }
            acc
        })
    };
    KropinaData { a, b, b2, k }
}

/// Reconstruct navigation data from one-form data:
/// `h = e^{k} a`, `W^i = a^{ij} b_j / 2`, `|u| = e^{k/2} sqrt(b^2) / 2`.
///
/// A zero of the one-form makes the data singular there; it surfaces as an
/// evaluation or validation error at the offending point.
pub fn from_kropina_data(data: &KropinaData) -> Result<NavigationData, KropinaError> {
    if data.b.dim() != data.a.dim() {
        return Err(KropinaError::DimensionMismatch {
            expected: data.a.dim(),
            got: data.b.dim(),
        });
    }
    let metric = data.a.scaled({
        let k = data.k.clone();
        ScalarField::from_fn(move |x| k.eval_jet(x).exp())
    });
    let wind = {
        let a = data.a.clone();
        let b = data.b.clone();
        let n = data.a.dim();
        VectorField::from_fn(n, move |x| {
            let am = a.entries_jet(x);
            let bv = b.eval_jet(x);
            solve_linear_jets(n, &am, &bv)
                .into_iter()
                .map(|c| c * 0.5)
                .collect()
        })
    };
    let speed = {
        let k = data.k.clone();
        let b2 = data.b2.clone();
        ScalarField::from_fn(move |x| (0.5 * k.eval_jet(x)).exp() * b2.eval_jet(x).sqrt() * 0.5)
    };
    NavigationData::new(metric, wind, speed)
}
