//! The worked navigation scenario: a unit swirl wind on the Euclidean plane
//! whose direction angle at (x, y) is x + y, optionally damped by a smooth
//! speed profile, plus the experiment generators built on it. Two metrics
//! appear throughout: the "original" one with full unit speed, and the
//! "generalized" one where the ship slows according to the profile and the
//! perturbation weakens with it. Closed-form accelerations for both systems,
//! derived by hand ahead of this implementation, serve as independent
//! cross-checks of the spray; the audit machinery compares them term by term.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chart::{ChartMetric, ScalarField, VectorField};
use crate::error::KropinaError;
use crate::integrate::{
    integrate, shoot_to_target, IntegratorConfig, StopReason, Trajectory,
};
use crate::jet::Jet2;
use crate::navigation::{KropinaMetric, NavigationData};
use crate::spray::geodesic_rhs;

/// Unit wind whose direction angle at (x, y) is x + y.
pub fn swirl_wind() -> VectorField {
    VectorField::from_fn(2, |x| {
        let angle = &x[0] + &x[1];
        vec![angle.cos(), angle.sin()]
    })
}

fn speed_jet(x: &[Jet2]) -> Jet2 {
    let s = (&x[0] + &x[1]).sin();
    let damping = (((&x[1] * &x[1]) * (&s * &s)) / (-PI)).exp();
    damping * (2.0 / 3.0) + 1.0 / 3.0
}

/// Ship speed profile (2/3)·exp(−y²·sin²(x+y)/π) + 1/3, with values in
/// (1/3, 1] and full speed exactly where y·sin(x+y) = 0.
pub fn speed_profile() -> ScalarField {
    ScalarField::from_fn(speed_jet)
}

/// Unit-speed navigation data: Euclidean chart, swirl wind at full strength.
pub fn original_nav() -> NavigationData {
    NavigationData::new(
        ChartMetric::euclidean(2),
        swirl_wind(),
        ScalarField::constant(1.0),
    )
    .expect("dimensions agree by construction")
}

/// Variable-speed navigation data: the swirl wind scaled pointwise by the
/// speed profile, so the perturbation stays exactly as strong as the ship.
pub fn generalized_nav() -> NavigationData {
    let wind = VectorField::from_fn(2, |x| {
        let angle = &x[0] + &x[1];
        let speed = speed_jet(x);
        vec![&speed * &angle.cos(), &speed * &angle.sin()]
    });
    NavigationData::new(ChartMetric::euclidean(2), wind, speed_profile())
        .expect("dimensions agree by construction")
}

/// Constant-strength variant: the swirl wind and the ship speed both scaled
/// to the uniform value `c`.
pub fn scaled_nav(c: f64) -> NavigationData {
    assert!(c > 0.0, "wind strength must be positive");
    let wind = VectorField::from_fn(2, move |x| {
        let angle = &x[0] + &x[1];
        vec![angle.cos() * c, angle.sin() * c]
    });
    NavigationData::new(ChartMetric::euclidean(2), wind, ScalarField::constant(c))
        .expect("dimensions agree by construction")
}

/// Uniform wind on the Euclidean plane with ship speed equal to its
/// magnitude.
pub fn constant_wind_nav(w: [f64; 2]) -> NavigationData {
    let speed = (w[0] * w[0] + w[1] * w[1]).sqrt();
    assert!(speed > 0.0, "constant wind must not vanish");
    NavigationData::new(
        ChartMetric::euclidean(2),
        VectorField::constant(w.to_vec()),
        ScalarField::constant(speed),
    )
    .expect("dimensions agree by construction")
}

/// Kropina metric of the unit-speed scenario.
pub fn original_metric() -> KropinaMetric {
    KropinaMetric::new(original_nav())
}

/// Kropina metric of the variable-speed scenario.
pub fn generalized_metric() -> KropinaMetric {
    KropinaMetric::new(generalized_nav())
}

/// Phase state for a departure at heading `phi0`: the position together with
/// the resultant velocity wind(x₀) + speed(x₀)·(cos φ₀, sin φ₀).
pub fn initial_state(
    nav: &NavigationData,
    origin: &[f64],
    phi0: f64,
) -> Result<(Vec<f64>, Vec<f64>), KropinaError> {
    let v = nav.heading_velocity(origin, phi0)?;
    Ok((origin.to_vec(), v))
}

/// One labelled term of a closed-form acceleration numerator.
pub type Term = (&'static str, f64);

/// A single acceleration component assembled from labelled numerator terms.
#[derive(Clone, Debug)]
pub struct AxisBreakdown {
    pub terms: Vec<Term>,
    pub numerator: f64,
    pub denominator: f64,
    pub sign: f64,
    pub acceleration: f64,
}

fn axis(terms: Vec<Term>, denominator: f64, sign: f64) -> AxisBreakdown {
    let numerator: f64 = terms.iter().map(|t| t.1).sum();
    AxisBreakdown {
        acceleration: sign * numerator / denominator,
        terms,
        numerator,
        denominator,
        sign,
    }
}

/// Both acceleration components of a closed-form geodesic system, with the
/// term-level detail kept for auditing.
#[derive(Clone, Debug)]
pub struct ExplicitBreakdown {
    pub x: AxisBreakdown,
    pub y: AxisBreakdown,
}

impl ExplicitBreakdown {
    pub fn acceleration(&self) -> [f64; 2] {
        [self.x.acceleration, self.y.acceleration]
    }
}

fn breakdown_original(
    pos: &[f64; 2],
    vel: &[f64; 2],
) -> Result<ExplicitBreakdown, KropinaError> {
    let (u, v) = (vel[0], vel[1]);
    let q = u * u + v * v;
    if q == 0.0 {
        return Err(KropinaError::ZeroVector);
    }
    let w = pos[0] + pos[1];
    let (s, c) = w.sin_cos();
    let s2 = (2.0 * w).sin();
    let (u2, v2) = (u * u, v * v);
    let (u3, v3) = (u2 * u, v2 * v);
    let (u4, v4) = (u2 * u2, v2 * v2);
    let (ss, cc) = (s * s, c * c);

    let x_terms = vec![
        (
            "(4u^3 v + 4u^2 v^2 - u^4 + v^4) sin^2",
            (4.0 * u3 * v + 4.0 * u2 * v2 - u4 + v4) * ss,
        ),
        ("(u^4 + v^4)/2 sin2", 0.5 * (u4 + v4) * s2),
        (
            "u v (-3uv + 2u^2 - 2v^2) sin2",
            u * v * (-3.0 * u * v + 2.0 * u2 - 2.0 * v2) * s2,
        ),
        (
            "2 v^2 (2uv - u^2 + v^2) cos^2",
            2.0 * v2 * (2.0 * u * v - u2 + v2) * cc,
        ),
    ];
    let y_terms = vec![
        (
            "2 u^2 (2uv + u^2 - v^2) sin^2",
            2.0 * u2 * (2.0 * u * v + u2 - v2) * ss,
        ),
        (
            "u v (-3uv - 2u^2 + 2v^2) sin2",
            u * v * (-3.0 * u * v - 2.0 * u2 + 2.0 * v2) * s2,
        ),
        (
            "(4u^2 v^2 + 4u v^3 + u^4 - v^4) cos^2",
            (4.0 * u2 * v2 + 4.0 * u * v3 + u4 - v4) * cc,
        ),
        ("(u^4 + v^4)/2 sin2", 0.5 * (u4 + v4) * s2),
    ];
    let den = 2.0 * q;
    Ok(ExplicitBreakdown {
        x: axis(x_terms, den, -1.0),
        y: axis(y_terms, den, 1.0),
    })
}

fn breakdown_generalized(
    pos: &[f64; 2],
    vel: &[f64; 2],
) -> Result<ExplicitBreakdown, KropinaError> {
    let (u, v) = (vel[0], vel[1]);
    let q = u * u + v * v;
    if q == 0.0 {
        return Err(KropinaError::ZeroVector);
    }
    let y = pos[1];
    let w = pos[0] + pos[1];
    let (s, c) = w.sin_cos();
    let s2 = (2.0 * w).sin();
    let (u2, v2) = (u * u, v * v);
    let (u3, v3) = (u2 * u, v2 * v);
    let (u4, v4) = (u2 * u2, v2 * v2);
    let (ss, cc) = (s * s, c * c);
    let e = (y * y * ss / PI).exp();
    let p2 = e + 2.0;

    let x_terms = vec![
        ("16 y u v^3 sin^4", 16.0 * y * u * v3 * ss * ss),
        (
            "-pi (-4u^3 v - 4u^2 v^2 + u^4 - v^4)(e+2) sin^2",
            -PI * (-4.0 * u3 * v - 4.0 * u2 * v2 + u4 - v4) * p2 * ss,
        ),
        (
            "sin2 [pi((2u^3 v - 3u^2 v^2 - 2u v^3)(e+2) + u^4 + v^4) - y(-4(y+1)u^3 v - 6y u^2 v^2 + 4y u v^3 + y u^4 + y v^4) sin2]",
            s2 * (PI * ((2.0 * u3 * v - 3.0 * u2 * v2 - 2.0 * u * v3) * p2 + u4 + v4)
                - y * (-4.0 * (y + 1.0) * u3 * v - 6.0 * y * u2 * v2
                    + 4.0 * y * u * v3
                    + y * u4
                    + y * v4)
                    * s2),
        ),
        (
            "8 y^2 u^2 (2uv + u^2 - v^2) sin cos^3",
            8.0 * y * y * u2 * (2.0 * u * v + u2 - v2) * s * cc * c,
        ),
        (
            "2 pi v^2 (2uv - u^2 + v^2)(e+2) cos^2",
            2.0 * PI * v2 * (2.0 * u * v - u2 + v2) * p2 * cc,
        ),
        (
            "sin2/2 [4y(2(2y+3)u^2 v^2 + 4y u v^3 + (y-1)u^4 - (y+1)v^4) sin^2 + pi(u^4 + v^4)e]",
            0.5 * s2
                * (4.0 * y
                    * (2.0 * (2.0 * y + 3.0) * u2 * v2 + 4.0 * y * u * v3
                        + (y - 1.0) * u4
                        - (y + 1.0) * v4)
                    * ss
                    + PI * (u4 + v4) * e),
        ),
    ];
    let y_terms = vec![
        (
            "-8 y v^2 (v^2 - u^2) sin^4",
            -8.0 * y * v2 * (v2 - u2) * ss * ss,
        ),
        (
            "2 pi u^2 (2uv + u^2 - v^2)(e+2) sin^2",
            2.0 * PI * u2 * (2.0 * u * v + u2 - v2) * p2 * ss,
        ),
        (
            "sin2 [pi((-2u^3 v - 3u^2 v^2 + 2u v^3)(e+2) + u^4 + v^4) + y(4y u^3 v - 2(3y+2)u^2 v^2 - 4y u v^3 + (y+1)u^4 + (y-1)v^4) sin2]",
            s2 * (PI * ((-2.0 * u3 * v - 3.0 * u2 * v2 + 2.0 * u * v3) * p2 + u4 + v4)
                + y * (4.0 * y * u3 * v - 2.0 * (3.0 * y + 2.0) * u2 * v2
                    - 4.0 * y * u * v3
                    + (y + 1.0) * u4
                    + (y - 1.0) * v4)
                    * s2),
        ),
        (
            "4 y^2 (-4u^3 v - 4u^2 v^2 + u^4 - v^4) sin cos^3",
            4.0 * y * y * (-4.0 * u3 * v - 4.0 * u2 * v2 + u4 - v4) * s * cc * c,
        ),
        (
            "pi (4u^2 v^2 + 4u v^3 + u^4 - v^4)(e+2) cos^2",
            PI * (4.0 * u2 * v2 + 4.0 * u * v3 + u4 - v4) * p2 * cc,
        ),
        (
            "sin2/2 [pi(u^4 + v^4)e - 8 y v(-y u^2 v + 2(y+1)u v^2 - 2u^3 + y v^3) sin^2]",
            0.5 * s2
                * (PI * (u4 + v4) * e
                    - 8.0 * y * v * (-y * u2 * v + 2.0 * (y + 1.0) * u * v2 - 2.0 * u3
                        + y * v3)
                        * ss),
        ),
    ];
    let den = 2.0 * PI * q * p2;
    Ok(ExplicitBreakdown {
        x: axis(x_terms, den, -1.0),
        y: axis(y_terms, den, 1.0),
    })
}

/// Closed-form geodesic acceleration of the unit-speed system.
pub fn explicit_rhs_original(
    pos: &[f64; 2],
    vel: &[f64; 2],
) -> Result<[f64; 2], KropinaError> {
    Ok(breakdown_original(pos, vel)?.acceleration())
}

/// Closed-form geodesic acceleration of the variable-speed system.
pub fn explicit_rhs_generalized(
    pos: &[f64; 2],
    vel: &[f64; 2],
) -> Result<[f64; 2], KropinaError> {
    Ok(breakdown_generalized(pos, vel)?.acceleration())
}

pub type BreakdownFn = fn(&[f64; 2], &[f64; 2]) -> Result<ExplicitBreakdown, KropinaError>;

/// A named closed-form geodesic system that can be audited against the spray.
#[derive(Clone, Copy)]
pub struct ExplicitSystem {
    pub name: &'static str,
    pub breakdown: BreakdownFn,
}

pub fn original_system() -> ExplicitSystem {
    ExplicitSystem {
        name: "original",
        breakdown: breakdown_original,
    }
}

pub fn generalized_system() -> ExplicitSystem {
    ExplicitSystem {
        name: "generalized",
        breakdown: breakdown_generalized,
    }
}

/// One state where the closed form and the spray disagree beyond tolerance.
#[derive(Clone, Debug)]
pub struct Discrepancy {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub transcribed: [f64; 2],
    pub spray: [f64; 2],
    pub rel_error: f64,
    pub breakdown: ExplicitBreakdown,
}

/// Result of checking a closed-form system against the spray on a state set.
/// The spray is authoritative: a non-empty discrepancy list quarantines the
/// closed form as reference text, it never redirects the integrator.
#[derive(Debug)]
pub struct TranscriptionAudit {
    pub system: &'static str,
    pub states_checked: usize,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub discrepancies: Vec<Discrepancy>,
}

impl TranscriptionAudit {
    pub fn passed(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

impl fmt::Display for TranscriptionAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} system: {} states, max relative error {:.3e}, tolerance {:.1e}",
            self.system, self.states_checked, self.max_rel_error, self.tolerance
        )?;
        if self.discrepancies.is_empty() {
            return writeln!(f, "  closed form agrees with the spray");
        }
        for d in &self.discrepancies {
            writeln!(
                f,
                "  at x = ({:.6}, {:.6}), v = ({:.6}, {:.6}): closed form ({:+.9e}, {:+.9e}) vs spray ({:+.9e}, {:+.9e}), relative error {:.3e}",
                d.position[0],
                d.position[1],
                d.velocity[0],
                d.velocity[1],
                d.transcribed[0],
                d.transcribed[1],
                d.spray[0],
                d.spray[1],
                d.rel_error
            )?;
            for (name, br) in [("x", &d.breakdown.x), ("y", &d.breakdown.y)] {
                writeln!(
                    f,
                    "    {name}-axis numerator {:+.9e}, denominator {:+.9e}, sign {:+}:",
                    br.numerator, br.denominator, br.sign
                )?;
                for (label, value) in &br.terms {
                    writeln!(f, "      {label} = {value:+.9e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Compare a closed-form system against the spray of `metric` at the given
/// phase states.
pub fn audit_transcription(
    metric: &KropinaMetric,
    system: &ExplicitSystem,
    states: &[([f64; 2], [f64; 2])],
    tolerance: f64,
) -> Result<TranscriptionAudit, KropinaError> {
    let mut max_rel_error = 0.0_f64;
    let mut discrepancies = Vec::new();
    for &(x, v) in states {
        let (_, accel) = geodesic_rhs(metric, &x, &v)?;
        let breakdown = (system.breakdown)(&x, &v)?;
        let [tx, ty] = breakdown.acceleration();
        let scale = accel[0]
            .abs()
            .max(accel[1].abs())
            .max(tx.abs())
            .max(ty.abs())
            .max(1e-30);
        let rel = ((tx - accel[0]).abs().max((ty - accel[1]).abs())) / scale;
        max_rel_error = max_rel_error.max(rel);
        if rel > tolerance {
            discrepancies.push(Discrepancy {
                position: x,
                velocity: v,
                transcribed: [tx, ty],
                spray: [accel[0], accel[1]],
                rel_error: rel,
                breakdown,
            });
        }
    }
    Ok(TranscriptionAudit {
        system: system.name,
        states_checked: states.len(),
        tolerance,
        max_rel_error,
        discrepancies,
    })
}

/// Deterministic sample of phase states with a comfortable conic-domain
/// margin. States closer to the boundary than margin 0.05 are rejected:
/// the metric value loses roughly two digits per decade of margin there,
/// which would contaminate tight comparisons.
pub fn sample_admissible_states(
    metric: &KropinaMetric,
    count: usize,
    seed: u64,
) -> Vec<([f64; 2], [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: [f64; 2] = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let v: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if (v[0] * v[0] + v[1] * v[1]).sqrt() < 0.3 {
            continue;
        }
        if let Ok(m) = metric.domain_margin(&x, &v) {
            if m >= 0.05 {
                out.push((x, v));
            }
        }
    }
    out
}

/// A sweep of departure headings from a common origin.
#[derive(Clone, Debug)]
pub struct FanSpec {
    pub origin: [f64; 2],
    pub phi_start: f64,
    pub dphi: f64,
    pub count: usize,
    pub config: IntegratorConfig,
}

impl FanSpec {
    /// Full-circle sweep of `count` equally spaced headings starting at 0.
    pub fn full_circle(origin: [f64; 2], count: usize, config: IntegratorConfig) -> FanSpec {
        FanSpec {
            origin,
            phi_start: 0.0,
            dphi: 2.0 * PI / count as f64,
            count,
            config,
        }
    }

    pub fn headings(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.phi_start + i as f64 * self.dphi)
            .collect()
    }
}

#[derive(Debug)]
pub struct FanRay {
    pub phi0: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug)]
pub struct SkippedHeading {
    pub phi0: f64,
    pub reason: KropinaError,
}

/// Geodesic rays of a heading sweep, in heading order, with inadmissible
/// headings recorded rather than dropped.
#[derive(Debug)]
pub struct Fan {
    pub rays: Vec<FanRay>,
    pub skipped: Vec<SkippedHeading>,
}

pub fn generate_fan(metric: &KropinaMetric, spec: &FanSpec) -> Fan {
    let results: Vec<Result<FanRay, SkippedHeading>> = spec
        .headings()
        .par_iter()
        .map(|&phi0| {
            metric
                .nav()
                .heading_velocity(&spec.origin, phi0)
                .and_then(|v0| integrate(metric, &spec.origin, &v0, &spec.config))
                .map(|trajectory| FanRay { phi0, trajectory })
                .map_err(|reason| SkippedHeading { phi0, reason })
        })
        .collect();
    let mut rays = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(ray) => rays.push(ray),
            Err(skip) => skipped.push(skip),
        }
    }
    Fan { rays, skipped }
}

/// Position along a trajectory at flow time `t`: exact at emitted samples,
/// linearly interpolated between them, `None` past the stop time.
pub fn position_at(traj: &Trajectory, t: f64) -> Option<[f64; 2]> {
    let s = &traj.samples;
    let last = s.last()?;
    if t < s[0].t - 1e-12 || t > last.t + 1e-12 {
        return None;
    }
    let i = s.partition_point(|p| p.t < t);
    if i < s.len() && (s[i].t - t).abs() <= 1e-9 {
        return Some([s[i].x[0], s[i].x[1]]);
    }
    if i == 0 {
        return Some([s[0].x[0], s[0].x[1]]);
    }
    if i >= s.len() {
        return Some([last.x[0], last.x[1]]);
    }
    let (a, b) = (&s[i - 1], &s[i]);
    let w = (t - a.t) / (b.t - a.t);
    Some([
        a.x[0] + w * (b.x[0] - a.x[0]),
        a.x[1] + w * (b.x[1] - a.x[1]),
    ])
}

#[derive(Clone, Debug)]
pub struct IsochronePoint {
    pub phi0: f64,
    pub position: [f64; 2],
}

/// Locus of fan positions at a fixed flow time, ordered by heading.
#[derive(Clone, Debug)]
pub struct Isochrone {
    pub t: f64,
    pub points: Vec<IsochronePoint>,
    /// Rays that stopped before reaching this time.
    pub truncated: usize,
}

pub fn isochrones(fan: &Fan, times: &[f64]) -> Vec<Isochrone> {
    times
        .iter()
        .map(|&t| {
            let mut points = Vec::new();
            let mut truncated = 0;
            for ray in &fan.rays {
                match position_at(&ray.trajectory, t) {
                    Some(position) => points.push(IsochronePoint {
                        phi0: ray.phi0,
                        position,
                    }),
                    None => truncated += 1,
                }
            }
            Isochrone {
                t,
                points,
                truncated,
            }
        })
        .collect()
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

/// Even-odd containment test on a closed polyline; points within
/// `boundary_tol` of an edge count as inside.
pub fn polygon_contains(poly: &[[f64; 2]], p: [f64; 2], boundary_tol: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if segment_distance(poly[i], poly[(i + 1) % n], p) <= boundary_tol {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Radius of the unit level set along the heading e(φ) in the tangent space
/// at `x`: the positive r with F(x, r·e(φ)) = 1, i.e. 1/F(x, e(φ)).
pub fn indicatrix_radius(
    metric: &KropinaMetric,
    x: &[f64],
    phi: f64,
) -> Result<f64, KropinaError> {
    let e = [phi.cos(), phi.sin()];
    Ok(1.0 / metric.eval(x, &e)?)
}

/// Heading sweep for a coverage experiment: every emitted trajectory sample
/// joins the point cloud, and the covered region's outline is traced by an
/// alpha shape.
#[derive(Clone, Debug)]
pub struct ReachableSpec {
    pub origin: [f64; 2],
    pub dphi: f64,
    pub config: IntegratorConfig,
    /// Alpha radius as a multiple of the median nearest-neighbour spacing of
    /// the ray endpoints.
    pub alpha_factor: f64,
    /// Cell size for decimating samples onto a grid; 0 picks half the alpha
    /// radius.
    pub snap: f64,
}

impl ReachableSpec {
    pub fn new(origin: [f64; 2], dphi: f64, config: IntegratorConfig) -> ReachableSpec {
        ReachableSpec {
            origin,
            dphi,
            config,
            alpha_factor: 2.0,
            snap: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StopTally {
    pub time_limit: usize,
    pub domain_boundary: usize,
    pub step_failure: usize,
    pub skipped: usize,
}

/// Covered-region summary of a dense heading sweep. Cloud points are cell
/// centres of the decimation grid, sorted by cell index, so the output is
/// independent of the parallel execution order.
#[derive(Debug)]
pub struct ReachableSet {
    pub cloud: Vec<[f64; 2]>,
    pub boundary: Vec<[f64; 2]>,
    pub loops: usize,
    pub alpha: f64,
    pub snap: f64,
    pub rays: usize,
    pub tally: StopTally,
}

fn median_nn_spacing(pts: &[[f64; 2]]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let mut nn: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            pts.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_unstable_by(f64::total_cmp);
    let m = nn[nn.len() / 2];
    (m > 0.0 && m.is_finite()).then_some(m)
}

fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let la = ((b[0] - c[0]).powi(2) + (b[1] - c[1]).powi(2)).sqrt();
    let lb = ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)).sqrt();
    let lc = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
    if area2 <= f64::EPSILON * la * lb {
        return f64::INFINITY;
    }
    la * lb * lc / (2.0 * area2)
}

fn edge_key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// Boundary of the alpha shape with radius `alpha`: triangulate, keep
/// triangles with circumradius at most `alpha`, and chain the edges that
/// belong to exactly one kept triangle. Returns the longest chain and the
/// total number of chains.
fn alpha_shape(points: &[[f64; 2]], alpha: f64) -> (Vec<[f64; 2]>, usize) {
    if points.len() < 3 {
        return (Vec::new(), 0);
    }
    let sites: Vec<delaunator::Point> = points
        .iter()
        .map(|p| delaunator::Point { x: p[0], y: p[1] })
        .collect();
    let tri = delaunator::triangulate(&sites);
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in tri.triangles.chunks(3) {
        let (a, b, c) = (t[0], t[1], t[2]);
        if circumradius(points[a], points[b], points[c]) > alpha {
            continue;
        }
        for &(i, j) in &[(a, b), (b, c), (c, a)] {
            *edge_count.entry(edge_key(i, j)).or_insert(0) += 1;
        }
    }
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&(i, j), &count) in &edge_count {
        if count == 1 {
            adj.entry(i).or_default().push(j);
            adj.entry(j).or_default().push(i);
        }
    }
    for nb in adj.values_mut() {
        nb.sort_unstable();
    }
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut chains: Vec<Vec<usize>> = Vec::new();
    let starts: Vec<usize> = adj.keys().copied().collect();
    for &start in &starts {
        loop {
            let Some(&next) = adj[&start]
                .iter()
                .find(|&&j| !used.contains(&edge_key(start, j)))
            else {
                break;
            };
            let mut chain = vec![start];
            used.insert(edge_key(start, next));
            let mut prev = start;
            let mut cur = next;
            while cur != start {
                chain.push(cur);
                let Some(&nxt) = adj[&cur]
                    .iter()
                    .find(|&&j| j != prev && !used.contains(&edge_key(cur, j)))
                else {
                    break;
                };
                used.insert(edge_key(cur, nxt));
                prev = cur;
                cur = nxt;
            }
            chains.push(chain);
        }
    }
    let loops = chains.len();
    let best = chains.into_iter().max_by_key(|c| c.len()).unwrap_or_default();
    (best.into_iter().map(|i| points[i]).collect(), loops)
}

pub fn reachable_set(metric: &KropinaMetric, spec: &ReachableSpec) -> ReachableSet {
    let count = (2.0 * PI / spec.dphi).round() as usize;
    let headings: Vec<f64> = (0..count).map(|i| i as f64 * spec.dphi).collect();
    let runs: Vec<Option<Trajectory>> = headings
        .par_iter()
        .map(|&phi| {
            metric
                .nav()
                .heading_velocity(&spec.origin, phi)
                .ok()
                .and_then(|v0| integrate(metric, &spec.origin, &v0, &spec.config).ok())
        })
        .collect();

    let mut tally = StopTally::default();
    let mut endpoints = Vec::new();
    let mut trajectories = Vec::new();
    for run in runs {
        match run {
            Some(t) => {
                match t.stop {
                    StopReason::TimeLimit => tally.time_limit += 1,
                    StopReason::DomainBoundary => tally.domain_boundary += 1,
                    StopReason::StepFailure => tally.step_failure += 1,
                }
                let e = t.end();
                endpoints.push([e.x[0], e.x[1]]);
                trajectories.push(t);
            }
            None => tally.skipped += 1,
        }
    }

    let alpha = match median_nn_spacing(&endpoints) {
        Some(m) => spec.alpha_factor * m,
        None => spec.config.output_stride.max(1e-3),
    };
    let snap = if spec.snap > 0.0 { spec.snap } else { 0.5 * alpha };
    let mut cells: BTreeSet<(i64, i64)> = BTreeSet::new();
    for t in &trajectories {
        for s in &t.samples {
            cells.insert((
                (s.x[0] / snap).round() as i64,
                (s.x[1] / snap).round() as i64,
            ));
        }
    }
    let cloud: Vec<[f64; 2]> = cells
        .iter()
        .map(|&(i, j)| [i as f64 * snap, j as f64 * snap])
        .collect();
    let (boundary, loops) = alpha_shape(&cloud, alpha);
    ReachableSet {
        cloud,
        boundary,
        loops,
        alpha,
        snap,
        rays: trajectories.len(),
        tally,
    }
}

/// Travel times to one target under both scenario metrics.
#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub target: [f64; 2],
    pub phi0_original: f64,
    pub time_original: f64,
    pub phi0_generalized: f64,
    pub time_generalized: f64,
    pub delta: f64,
}

#[derive(Debug)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub skipped: Vec<([f64; 2], KropinaError)>,
}

/// Heading bracket for shooting: the full circle less a guard band around
/// the excluded upwind heading.
pub const SHOOT_BRACKET: (f64, f64) = (-PI + 1e-3, PI - 1e-3);

pub fn compare_travel_times(
    original: &KropinaMetric,
    generalized: &KropinaMetric,
    start: &[f64; 2],
    targets: &[[f64; 2]],
    cfg: &IntegratorConfig,
) -> ComparisonTable {
    let shots: Vec<Result<ComparisonRow, ([f64; 2], KropinaError)>> = targets
        .par_iter()
        .map(|&target| {
            let o = shoot_to_target(original, start, &target, SHOOT_BRACKET, cfg)
                .map_err(|e| (target, e))?;
            let g = shoot_to_target(generalized, start, &target, SHOOT_BRACKET, cfg)
                .map_err(|e| (target, e))?;
            Ok(ComparisonRow {
                target,
                phi0_original: o.phi0,
                time_original: o.travel_time,
                phi0_generalized: g.phi0,
                time_generalized: g.travel_time,
                delta: g.travel_time - o.travel_time,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for shot in shots {
        match shot {
            Ok(row) => rows.push(row),
            Err(skip) => skipped.push(skip),
        }
    }
    ComparisonTable { rows, skipped }
}

/// Evenly spaced targets taken from a fan's positions at flow time `t`.
pub fn fan_targets(fan: &Fan, t: f64, count: usize) -> Vec<[f64; 2]> {
    let pts: Vec<[f64; 2]> = fan
        .rays
        .iter()
        .filter_map(|r| position_at(&r.trajectory, t))
        .collect();
    if pts.is_empty() || count == 0 {
        return Vec::new();
    }
    (0..count.min(pts.len()))
        .map(|i| pts[i * pts.len() / count.min(pts.len())])
        .collect()
}

/// Travel time from the origin to `target` under the uniformly scaled wind,
/// for each strength in `strengths`.
pub fn scaled_travel_times(
    strengths: &[f64],
    target: &[f64; 2],
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, f64)>, KropinaError> {
    strengths
        .iter()
        .map(|&c| {
            let metric = KropinaMetric::new(scaled_nav(c));
            shoot_to_target(&metric, &[0.0, 0.0], target, SHOOT_BRACKET, cfg)
                .map(|o| (c, o.travel_time))
        })
        .collect()
}
