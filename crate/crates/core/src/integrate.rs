//! Adaptive geodesic integration with boundary event detection.
//!
//! The stepper is the Dormand-Prince 5(4) embedded pair with PI step-size
//! control and the classical quartic dense-output interpolant, so samples on
//! a fixed emission grid cost no extra derivative evaluations. Trajectories
//! stop at the time limit, at the conic-domain boundary (localized by
//! bisection on the dense output), or when the step size collapses.

use rayon::prelude::*;

use crate::error::KropinaError;
use crate::navigation::KropinaMetric;
use crate::spray::{geodesic_rhs, FinslerMetric};

#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Integration horizon.
    pub t_end: f64,
    /// Dimensionless margin at which a trajectory is declared to have
    /// reached the domain boundary; well above the evaluation guard.
    pub boundary_epsilon: f64,
    /// Spacing of emitted samples, filled in from the dense interpolant.
    pub output_stride: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            t_end: 10.0,
            boundary_epsilon: 1e-9,
            output_stride: 0.01,
        }
    }
}

/// One emitted sample of a phase trajectory, with the metric value of the
/// velocity as a conserved-quantity diagnostic.
#[derive(Clone, Debug)]
pub struct PhaseSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub f_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    TimeLimit,
    DomainBoundary,
    StepFailure,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<PhaseSample>,
    pub stop: StopReason,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    pub fn end(&self) -> &PhaseSample {
        self.samples.last().expect("trajectory always has samples")
    }
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// b - bhat, for the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the quartic interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const STEP_EXPONENT: f64 = 0.2 - 0.75 * PI_BETA;
const MAX_GROWTH: f64 = 10.0;
const MAX_SHRINK: f64 = 5.0;

type Rhs<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>, KropinaError> + Sync + 'a;

struct StepAttempt {
    z1: Vec<f64>,
    /// Scaled error components (before norm reduction).
    err: Vec<f64>,
    ks: [Vec<f64>; 7],
}

fn attempt(rhs: &Rhs, z0: &[f64], k1: &[f64], h: f64) -> Result<StepAttempt, KropinaError> {
    let n = z0.len();
    let stage = |coeffs: &[f64], ks: &[&[f64]]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                z0[i] + h * coeffs.iter().zip(ks).map(|(a, k)| a * k[i]).sum::<f64>()
            })
            .collect()
    };
    let k1 = k1.to_vec();
    let k2 = rhs(&stage(&A2, &[&k1]))?;
    let k3 = rhs(&stage(&A3, &[&k1, &k2]))?;
    let k4 = rhs(&stage(&A4, &[&k1, &k2, &k3]))?;
    let k5 = rhs(&stage(&A5, &[&k1, &k2, &k3, &k4]))?;
    let k6 = rhs(&stage(&A6, &[&k1, &k2, &k3, &k4, &k5]))?;
    let z1 = stage(&B, &[&k1, &k2, &k3, &k4, &k5, &k6]);
    let k7 = rhs(&z1)?;
    let ks = [k1, k2, k3, k4, k5, k6, k7];
    let err = (0..n)
        .map(|i| h * ks.iter().zip(&E).map(|(k, e)| e * k[i]).sum::<f64>())
        .collect();
    Ok(StepAttempt { z1, err, ks })
}

/// Coefficients of the quartic dense interpolant over one accepted step.
struct DenseSegment {
    t0: f64,
    h: f64,
    c: [Vec<f64>; 5],
}

impl DenseSegment {
    fn build(t0: f64, h: f64, z0: &[f64], at: &StepAttempt) -> Self {
        let n = z0.len();
        let dy: Vec<f64> = (0..n).map(|i| at.z1[i] - z0[i]).collect();
        let bspl: Vec<f64> = (0..n).map(|i| h * at.ks[0][i] - dy[i]).collect();
        let c = [
            z0.to_vec(),
            dy.clone(),
            bspl.clone(),
            (0..n).map(|i| dy[i] - h * at.ks[6][i] - bspl[i]).collect(),
            (0..n)
                .map(|i| h * at.ks.iter().zip(&D).map(|(k, d)| d * k[i]).sum::<f64>())
                .collect(),
        ];
        DenseSegment { t0, h, c }
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        (0..self.c[0].len())
            .map(|i| {
                self.c[0][i]
                    + th * (self.c[1][i]
                        + th1 * (self.c[2][i] + th * (self.c[3][i] + th1 * self.c[4][i])))
            })
            .collect()
    }
}

fn scaled_error_norm(err: &[f64], z0: &[f64], z1: &[f64], rel: f64, abs: f64) -> f64 {
    let n = err.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let sc = abs + rel * z0[i].abs().max(z1[i].abs());
            let e = err[i] / sc;
            e * e
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn initial_step(
    rhs: &Rhs,
    z0: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
) -> f64 {
    let n = z0.len();
    let sc: Vec<f64> = (0..n).map(|i| cfg.abs_tol + cfg.rel_tol * z0[i].abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        ((0..n).map(|i| (v[i] / sc[i]).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(z0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(cfg.max_step).min(cfg.t_end);
    let z1: Vec<f64> = (0..n).map(|i| z0[i] + h0 * f0[i]).collect();
    let h1 = match rhs(&z1) {
        Ok(f1) => {
            let d2 = rms(&(0..n).map(|i| f1[i] - f0[i]).collect::<Vec<_>>()) / h0;
            let dm = d1.max(d2);
            if dm <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / dm).powf(0.2)
            }
        }
        Err(_) => h0 * 1e-3,
    };
    (100.0 * h0).min(h1).min(cfg.max_step).min(cfg.t_end)
}

/// Integrate the geodesic flow of `metric` from `(x0, v0)`.
///
/// The initial state must be admissible with a boundary margin above
/// `boundary_epsilon`. Samples land on the output-stride grid plus the exact
/// terminal state; each carries `F(x, v)` as a diagnostic. Stage evaluations
/// that fail (for instance by stepping over the domain boundary) reject the
/// step, so the boundary is approached by shrinking steps and then localized
/// on the dense interpolant to the `boundary_epsilon` level set.
pub fn integrate(
    metric: &dyn FinslerMetric,
    x0: &[f64],
    v0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, KropinaError> {
    let n = metric.dim();
    assert!(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0 && cfg.t_end > 0.0 && cfg.output_stride > 0.0);
    if x0.len() != n || v0.len() != n {
        return Err(KropinaError::DimensionMismatch {
            expected: n,
            got: x0.len().max(v0.len()),
        });
    }
    metric.eval(x0, v0).map_err(|e| KropinaError::BadInitialState {
        detail: e.to_string(),
    })?;
    let margin0 = metric.domain_margin(x0, v0)?;
    if margin0 <= cfg.boundary_epsilon {
        return Err(KropinaError::BadInitialState {
            detail: format!(
                "boundary margin {margin0:.3e} is not above the event threshold {:.3e}",
                cfg.boundary_epsilon
            ),
        });
    }

    let rhs = move |z: &[f64]| -> Result<Vec<f64>, KropinaError> {
        let (x, v) = z.split_at(n);
        let (dx, dv) = geodesic_rhs(metric, x, v)?;
        Ok(dx.into_iter().chain(dv).collect())
    };

    let sample_at = |t: f64, z: &[f64]| -> PhaseSample {
        let (x, v) = z.split_at(n);
        PhaseSample {
            t,
            x: x.to_vec(),
            v: v.to_vec(),
            f_value: metric.eval(x, v).unwrap_or(f64::NAN),
        }
    };
    let margin_of = |z: &[f64]| -> Option<f64> {
        let (x, v) = z.split_at(n);
        metric.domain_margin(x, v).ok()
    };

    let mut z: Vec<f64> = x0.iter().chain(v0.iter()).copied().collect();
    let mut t = 0.0_f64;
    let mut samples = vec![sample_at(0.0, &z)];
    let mut out_index: u64 = 1;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    let mut f_now = rhs(&z).map_err(|e| KropinaError::BadInitialState {
        detail: e.to_string(),
    })?;
    let mut h = initial_step(&rhs, &z, &f_now, cfg);
    let mut facold = 1e-4_f64;
    let mut just_rejected = false;

    // Emit grid samples due up to time `limit` from one dense segment.
    let emit_due = |samples: &mut Vec<PhaseSample>,
                    out_index: &mut u64,
                    seg: &DenseSegment,
                    limit: f64| {
        loop {
            let t_out = *out_index as f64 * cfg.output_stride;
            if t_out > limit + 1e-12 * cfg.output_stride {
                break;
            }
            samples.push(sample_at(t_out, &seg.eval(t_out)));
            *out_index += 1;
        }
    };

    let stop = loop {
        let floor = 1e4 * f64::EPSILON * t.abs().max(1.0);
        if h < floor {
            samples.push(sample_at(t, &z));
            break StopReason::StepFailure;
        }
        let h_eff = h.min(cfg.t_end - t).min(cfg.max_step);
        match attempt(&rhs, &z, &f_now, h_eff) {
            Err(_) => {
                rejected += 1;
                just_rejected = true;
                h = h_eff * 0.25;
            }
            Ok(at) => {
                let err = scaled_error_norm(&at.err, &z, &at.z1, cfg.rel_tol, cfg.abs_tol);
                let fac11 = err.powf(STEP_EXPONENT);
                if err > 1.0 {
                    rejected += 1;
                    just_rejected = true;
                    h = h_eff / (fac11 / SAFETY).min(MAX_SHRINK);
                    continue;
                }
                accepted += 1;
                let seg = DenseSegment::build(t, h_eff, &z, &at);
                let m1 = margin_of(&at.z1);
                if m1.map_or(true, |m| m <= cfg.boundary_epsilon) {
                    // The step crossed the boundary level set; bisect for the
                    // last interpolated state still above it.
                    let mut lo = 0.0_f64;
                    let mut hi = 1.0_f64;
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        let zm = seg.eval(t + mid * h_eff);
                        if margin_of(&zm).map_or(false, |m| m > cfg.boundary_epsilon) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let t_stop = t + lo * h_eff;
                    emit_due(&mut samples, &mut out_index, &seg, t_stop);
                    if t_stop - samples.last().map_or(0.0, |s| s.t) > 1e-12 {
                        samples.push(sample_at(t_stop, &seg.eval(t_stop)));
                    }
                    break StopReason::DomainBoundary;
                }
                let t1 = t + h_eff;
                emit_due(&mut samples, &mut out_index, &seg, t1);
                t = t1;
                z = at.z1.clone();
                f_now = at.ks[6].clone();
                if t >= cfg.t_end * (1.0 - 1e-14) {
                    if t - samples.last().map_or(0.0, |s| s.t) > 1e-12 {
                        samples.push(sample_at(t, &z));
                    }
                    break StopReason::TimeLimit;
                }
                let fac = (fac11 / facold.powf(PI_BETA) / SAFETY)
                    .clamp(1.0 / MAX_GROWTH, MAX_SHRINK);
                facold = err.max(1e-4);
                let mut hnew = h_eff / fac;
                if just_rejected {
                    hnew = hnew.min(h_eff);
                }
                just_rejected = false;
                h = hnew;
            }
        }
    };

    Ok(Trajectory {
        samples,
        stop,
        steps_accepted: accepted,
        steps_rejected: rejected,
    })
}

/// Integral of the stored metric values over the whole trajectory:
/// the travel time of the traversed path.
///
/// Uniform runs of the sample grid use composite Simpson weights; irregular
/// gaps (the terminal sample) fall back to the trapezoid rule. Fails if any
/// sample's metric value is non-finite, which marks a trajectory that left
/// the admissible domain.
pub fn travel_time(traj: &Trajectory) -> Result<f64, KropinaError> {
    travel_time_to(traj, traj.end().t)
}

/// Travel time of the trajectory prefix up to `t_cut`.
pub fn travel_time_to(traj: &Trajectory, t_cut: f64) -> Result<f64, KropinaError> {
    let s = &traj.samples;
    if s.len() < 2 {
        return Err(KropinaError::EmptyInput {
            what: "trajectory with fewer than two samples",
        });
    }
    if s.iter().any(|p| !p.f_value.is_finite()) {
        let bad = s.iter().find(|p| !p.f_value.is_finite()).unwrap();
        return Err(KropinaError::LeftDomain { t: bad.t });
    }
    let t_cut = t_cut.clamp(s[0].t, s.last().unwrap().t);
    let mut acc = 0.0;
    let mut i = 0;
    while i + 1 < s.len() && s[i + 1].t <= t_cut {
        let h1 = s[i + 1].t - s[i].t;
        let simpson_ok = i + 2 < s.len()
            && s[i + 2].t <= t_cut
            && ((s[i + 2].t - s[i + 1].t) - h1).abs() <= 1e-9 * h1;
        if simpson_ok {
            acc += h1 / 3.0 * (s[i].f_value + 4.0 * s[i + 1].f_value + s[i + 2].f_value);
            i += 2;
        } else {
            acc += 0.5 * h1 * (s[i].f_value + s[i + 1].f_value);
            i += 1;
        }
    }
    if i + 1 < s.len() && t_cut > s[i].t {
        // Partial cell: linear interpolation of the integrand.
        let frac = (t_cut - s[i].t) / (s[i + 1].t - s[i].t);
        let f_cut = s[i].f_value + frac * (s[i + 1].f_value - s[i].f_value);
        acc += 0.5 * (t_cut - s[i].t) * (s[i].f_value + f_cut);
    }
    Ok(acc)
}

/// A heading whose geodesic passes through the requested target.
#[derive(Clone, Copy, Debug)]
pub struct ShootOutcome {
    pub phi0: f64,
    pub travel_time: f64,
    /// Distance of closest approach actually achieved.
    pub miss: f64,
    /// Flow time of closest approach.
    pub t_closest: f64,
}

#[derive(Clone, Copy)]
struct MissSample {
    signed: f64,
    t_closest: f64,
}

/// Cubic Hermite interpolation of position and velocity between two samples.
fn hermite(a: &PhaseSample, b: &PhaseSample, s: f64) -> (Vec<f64>, Vec<f64>) {
    let h = b.t - a.t;
    let (s2, s3) = (s * s, s * s * s);
    let (h00, h10, h01, h11) = (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    );
    let (d00, d10, d01, d11) = (
        6.0 * s2 - 6.0 * s,
        3.0 * s2 - 4.0 * s + 1.0,
        -6.0 * s2 + 6.0 * s,
        3.0 * s2 - 2.0 * s,
    );
    let x = a
        .x
        .iter()
        .zip(&a.v)
        .zip(b.x.iter().zip(&b.v))
        .map(|((&xa, &va), (&xb, &vb))| h00 * xa + h10 * h * va + h01 * xb + h11 * h * vb)
        .collect();
    let v = a
        .x
        .iter()
        .zip(&a.v)
        .zip(b.x.iter().zip(&b.v))
        .map(|((&xa, &va), (&xb, &vb))| (d00 * xa + d10 * h * va + d01 * xb + d11 * h * vb) / h)
        .collect();
    (x, v)
}

fn closest_approach(traj: &Trajectory, target: &[f64]) -> MissSample {
    let d2 = |x: &[f64]| -> f64 {
        x.iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    let s = &traj.samples;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for (i, p) in s.iter().enumerate() {
        let d = d2(&p.x);
        if d < best {
            best = d;
            best_i = i;
        }
    }
    // Refine within the sample intervals adjacent to the best sample by
    // golden-section search along the Hermite interpolant. A parabola
    // through the squared distances is not enough here: its vertex value
    // carries an error that, for a pass through the target itself, floors
    // the reported distance near the square root of the fit error.
    const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut t_star = s[best_i].t;
    let mut d2_star = best;
    let mut v_star: Vec<f64> = s[best_i].v.clone();
    let mut x_star: Vec<f64> = s[best_i].x.clone();
    let lo_interval = best_i.saturating_sub(1);
    for w in lo_interval..=best_i {
        let Some(pair) = s.get(w..w + 2) else {
            continue;
        };
        if pair[1].t <= pair[0].t {
            continue;
        }
        let f = |u: f64| d2(&hermite(&pair[0], &pair[1], u).0);
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut c = b - INV_GOLDEN * (b - a);
        let mut d = a + INV_GOLDEN * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..48 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_GOLDEN * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_GOLDEN * (b - a);
                fd = f(d);
            }
        }
        let u = if fc <= fd { c } else { d };
        let (x, v) = hermite(&pair[0], &pair[1], u);
        let val = d2(&x);
        if val < d2_star {
            t_star = pair[0].t + u * (pair[1].t - pair[0].t);
            d2_star = val;
            x_star = x;
            v_star = v;
        }
    }
    let cross = v_star[0] * (target[1] - x_star[1]) - v_star[1] * (target[0] - x_star[0]);
    MissSample {
        signed: d2_star.max(0.0).sqrt() * if cross < 0.0 { -1.0 } else { 1.0 },
        t_closest: t_star,
    }
}

fn miss_for_heading(
    k: &KropinaMetric,
    x0: &[f64],
    target: &[f64],
    phi: f64,
    cfg: &IntegratorConfig,
) -> Option<(MissSample, Trajectory)> {
    let v0 = k.nav().heading_velocity(x0, phi).ok()?;
    let traj = integrate(k, x0, &v0, cfg).ok()?;
    if traj.samples.len() < 2 {
        return None;
    }
    Some((closest_approach(&traj, target), traj))
}

enum ShootCandidate {
    /// Sign change of the signed miss between two scan headings.
    SignChange(f64, f64, MissSample),
    /// Local dip of the unsigned miss below the candidate gate.
    Dip(f64, f64),
}

/// Find headings in `bracket` whose geodesics hit `target`; returns the
/// fastest hit.
///
/// The signed miss distance is scanned over the bracket. Sign changes are
/// refined by bisection; local minima of the unsigned miss are refined by
/// golden-section search. Both refinements are needed: the sign of the miss
/// is read at the point of closest approach, and when a trajectory passes
/// the target more than once that point can jump between passes as the
/// heading varies, hiding the sign change of the pass that actually
/// collapses onto the target.
///
/// Two-dimensional charts only. Headings whose initial state is excluded are
/// skipped during the scan; if no refined heading brings the miss below an
/// absolute-plus-relative threshold the target is reported unreachable
/// within the bracket and horizon.
pub fn shoot_to_target(
    k: &KropinaMetric,
    x0: &[f64],
    target: &[f64],
    bracket: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<ShootOutcome, KropinaError> {
    let (lo, hi) = bracket;
    assert!(hi > lo, "empty heading bracket");
    let span = hi - lo;
    let scan_n = ((span / 0.035).ceil() as usize).max(48);
    let phis: Vec<f64> = (0..=scan_n)
        .map(|i| lo + span * i as f64 / scan_n as f64)
        .collect();
    let misses: Vec<Option<MissSample>> = phis
        .par_iter()
        .map(|&phi| miss_for_heading(k, x0, target, phi, cfg).map(|(m, _)| m))
        .collect();

    let target_scale = 1.0 + target.iter().map(|c| c * c).sum::<f64>().sqrt();
    let gate = 0.25 * target_scale;
    let mut candidates = Vec::new();
    for i in 0..scan_n {
        if let (Some(a), Some(b)) = (misses[i], misses[i + 1]) {
            if a.signed == 0.0 || a.signed * b.signed < 0.0 {
                candidates.push(ShootCandidate::SignChange(phis[i], phis[i + 1], a));
            }
        }
    }
    for i in 1..scan_n {
        if let (Some(a), Some(b), Some(c)) = (misses[i - 1], misses[i], misses[i + 1]) {
            let (fa, fb, fc) = (a.signed.abs(), b.signed.abs(), c.signed.abs());
            if fb <= gate && fb <= fa && fb <= fc {
                candidates.push(ShootCandidate::Dip(phis[i - 1], phis[i + 1]));
            }
        }
    }

    let outcomes: Vec<Option<ShootOutcome>> = candidates
        .par_iter()
        .map(|cand| {
            let phi = match *cand {
                ShootCandidate::SignChange(mut plo, mut phi_hi, mlo) => {
                    let mut sign_lo = mlo.signed;
                    for _ in 0..48 {
                        let mid = 0.5 * (plo + phi_hi);
                        let m = miss_for_heading(k, x0, target, mid, cfg)?.0;
                        if m.signed * sign_lo <= 0.0 {
                            phi_hi = mid;
                        } else {
                            plo = mid;
                            sign_lo = m.signed;
                        }
                    }
                    0.5 * (plo + phi_hi)
                }
                ShootCandidate::Dip(mut a, mut b) => {
                    const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;
                    let f = |phi: f64| {
                        miss_for_heading(k, x0, target, phi, cfg).map(|(m, _)| m.signed.abs())
                    };
                    let mut c = b - INV_GOLDEN * (b - a);
                    let mut d = a + INV_GOLDEN * (b - a);
                    let mut fc = f(c)?;
                    let mut fd = f(d)?;
                    for _ in 0..64 {
                        if fc <= fd {
                            b = d;
                            d = c;
                            fd = fc;
                            c = b - INV_GOLDEN * (b - a);
                            fc = f(c)?;
                        } else {
                            a = c;
                            c = d;
                            fc = fd;
                            d = a + INV_GOLDEN * (b - a);
                            fd = f(d)?;
                        }
                    }
                    if fc <= fd { c } else { d }
                }
            };
            let (m, traj) = miss_for_heading(k, x0, target, phi, cfg)?;
            let time = travel_time_to(&traj, m.t_closest).ok()?;
            Some(ShootOutcome {
                phi0: phi,
                travel_time: time,
                miss: m.signed.abs(),
                t_closest: m.t_closest,
            })
        })
        .collect();

    // A refined heading only counts as a hit when the distance of closest
    // approach actually collapsed; a far pass whose side flips (for
    // instance behind the start point) is not a solution.
    let accept = 1e-4 * target_scale;
    outcomes
        .into_iter()
        .flatten()
        .filter(|o| o.miss <= accept)
        .min_by(|a, b| a.travel_time.total_cmp(&b.travel_time))
        .ok_or_else(|| KropinaError::TargetUnreachable {
            target: target.to_vec(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartMetric, ScalarField, VectorField};
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

    /// Wind direction rotating with x at constant unit strength: geodesics
    /// curve without leaving the admissible cone.
    fn rotating_wind() -> KropinaMetric {
        let wind = VectorField::from_fn(2, |x| {
            let ang = &x[0] * 1.1 + &x[1] * 0.3;
            vec![ang.cos(), ang.sin()]
        });
        KropinaMetric::new(
            NavigationData::new(ChartMetric::euclidean(2), wind, ScalarField::constant(1.0))
                .unwrap(),
        )
    }

    /// Euclidean norm restricted to the half plane x < 1: straight geodesics
    /// with a domain wall, giving a deterministic boundary event.
    struct WalledPlane;

    impl FinslerMetric for WalledPlane {
        fn dim(&self) -> usize {
            2
        }

        fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KropinaError> {
            if x[0] >= 1.0 {
                return Err(KropinaError::OutsideConicDomain {
                    point: x.to_vec(),
                    beta: 1.0 - x[0],
                    guard: 0.0,
                });
            }
            Ok((y[0] * y[0] + y[1] * y[1]).sqrt())
        }

        fn eval_f2_jet(&self, _x: &[crate::jet::Jet2], y: &[crate::jet::Jet2]) -> crate::jet::Jet2 {
            &y[0] * &y[0] + &y[1] * &y[1]
        }

        fn domain_margin(&self, x: &[f64], _y: &[f64]) -> Result<f64, KropinaError> {
            Ok(1.0 - x[0])
        }
    }

    #[test]
    fn dense_output_reproduces_the_harmonic_oscillator() {
        // One step of z' = (z2, -z1) from (1, 0): exact solution
        // (cos t, -sin t). The interpolant's local error is fifth order, so
        // halving the step shrinks it by about 32.
        let rhs = |z: &[f64]| -> Result<Vec<f64>, KropinaError> { Ok(vec![z[1], -z[0]]) };
        let worst = |h: f64| -> f64 {
            let z0 = vec![1.0, 0.0];
            let k1 = rhs(&z0).unwrap();
            let at = attempt(&rhs, &z0, &k1, h).unwrap();
            let seg = DenseSegment::build(0.0, h, &z0, &at);
            let mut w: f64 = 0.0;
            for i in 0..=20 {
                let t = h * i as f64 / 20.0;
                let u = seg.eval(t);
                w = w.max((u[0] - t.cos()).abs()).max((u[1] + t.sin()).abs());
            }
            w
        };
        let e1 = worst(0.4);
        let e2 = worst(0.2);
        assert!(e1 < 1e-5, "interpolant error too large: {e1}");
        let ratio = e1 / e2;
        assert!(
            ratio > 16.0 && ratio < 80.0,
            "interpolant does not converge at fifth order: ratio {ratio}"
        );
        // Endpoints are reproduced exactly.
        let z0 = vec![1.0, 0.0];
        let k1 = rhs(&z0).unwrap();
        let at = attempt(&rhs, &z0, &k1, 0.3).unwrap();
        let seg = DenseSegment::build(0.0, 0.3, &z0, &at);
        assert_eq!(seg.eval(0.0), z0);
        assert_eq!(seg.eval(0.3), at.z1);
    }

    #[test]
    fn straight_rays_under_constant_wind() {
        let k = unit_wind_east();
        let cfg = IntegratorConfig {
            t_end: 3.0,
            ..Default::default()
        };
        let traj = integrate(&k, &[0.0, 0.0], &[2.0, 0.0], &cfg).unwrap();
        assert_eq!(traj.stop, StopReason::TimeLimit);
        let end = traj.end();
        assert!((end.t - 3.0).abs() < 1e-12);
        assert!((end.x[0] - 6.0).abs() < 1e-9 && end.x[1].abs() < 1e-12);
        // Samples sit on the stride grid.
        assert_eq!(traj.samples.len(), 301);
        let s100 = &traj.samples[100];
        assert!((s100.t - 1.0).abs() < 1e-12);
        assert!((s100.x[0] - 2.0).abs() < 1e-9);
        for p in &traj.samples {
            assert!((p.f_value - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn metric_value_is_conserved_along_geodesics() {
        let k = rotating_wind();
        let cfg = IntegratorConfig {
            t_end: 10.0,
            ..Default::default()
        };
        let v0 = k.nav().heading_velocity(&[0.0, 0.0], 0.4).unwrap();
        let traj = integrate(&k, &[0.0, 0.0], &v0, &cfg).unwrap();
        let f0 = traj.samples[0].f_value;
        assert!((f0 - 1.0).abs() < 1e-12);
        let drift = traj
            .samples
            .iter()
            .map(|p| (p.f_value - f0).abs() / f0)
            .fold(0.0, f64::max);
        assert!(
            drift <= 1e-6,
            "metric value drifted by {drift} over {} accepted steps",
            traj.steps_accepted
        );
    }

    #[test]
    fn tighter_tolerance_converges_to_the_reference_endpoint() {
        let k = rotating_wind();
        let run = |rel: f64| -> Vec<f64> {
            let cfg = IntegratorConfig {
                rel_tol: rel,
                abs_tol: rel * 1e-2,
                t_end: 5.0,
                ..Default::default()
            };
            let v0 = k.nav().heading_velocity(&[0.0, 0.0], 0.9).unwrap();
            integrate(&k, &[0.0, 0.0], &v0, &cfg).unwrap().end().x.clone()
        };
        let reference = run(1e-12);
        let coarse = run(1e-6);
        let fine = run(1e-9);
        let d = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let ec = d(&coarse, &reference);
        let ef = d(&fine, &reference);
        assert!(ec < 1e-4, "coarse run too far off: {ec}");
        assert!(ef < 1e-7, "fine run too far off: {ef}");
        assert!(ef < ec * 0.1, "no convergence: {ec} vs {ef}");
    }

    #[test]
    fn boundary_hits_are_localized_to_the_event_threshold() {
        // Ray at 30 degrees toward the wall x = 1: the crossing time of the
        // margin level set boundary_epsilon is known in closed form.
        let metric = WalledPlane;
        let cfg = IntegratorConfig {
            t_end: 20.0,
            ..Default::default()
        };
        let c = (std::f64::consts::PI / 6.0).cos();
        let v0 = [c, (std::f64::consts::PI / 6.0).sin()];
        let traj = integrate(&metric, &[0.0, 0.0], &v0, &cfg).unwrap();
        assert_eq!(traj.stop, StopReason::DomainBoundary);
        let end = traj.end();
        let m = metric.domain_margin(&end.x, &end.v).unwrap();
        assert!(
            m >= cfg.boundary_epsilon && m < 1e3 * cfg.boundary_epsilon,
            "terminal margin {m:.3e} not pinned at the threshold"
        );
        let t_expect = (1.0 - cfg.boundary_epsilon) / c;
        assert!(
            (end.t - t_expect).abs() < 1e-6,
            "stop time {} vs {}",
            end.t,
            t_expect
        );
        for p in &traj.samples {
            assert!(p.f_value.is_finite());
        }
        // Samples keep landing on the stride grid right up to the wall.
        assert!(traj.samples.len() > 100);
    }

    #[test]
    fn inadmissible_initial_state_is_rejected() {
        let k = unit_wind_east();
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            integrate(&k, &[0.0, 0.0], &[-1.0, 0.0], &cfg),
            Err(KropinaError::BadInitialState { .. })
        ));
    }

    #[test]
    fn travel_time_integrates_the_stored_values() {
        // Hand-built trajectory with f = cos(t) on the stride grid: the
        // integral over [0, 1] is sin(1), and Simpson on stride 0.01 nails
        // it far below the accuracy target.
        let mut samples = Vec::new();
        let n = 100;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            samples.push(PhaseSample {
                t,
                x: vec![t, 0.0],
                v: vec![1.0, 0.0],
                f_value: t.cos(),
            });
        }
        let traj = Trajectory {
            samples,
            stop: StopReason::TimeLimit,
            steps_accepted: n,
            steps_rejected: 0,
        };
        let got = travel_time(&traj).unwrap();
        assert!((got - 1.0_f64.sin()).abs() < 1e-10);
        let half = travel_time_to(&traj, 0.5).unwrap();
        assert!((half - 0.5_f64.sin()).abs() < 1e-10);
        // A cut between grid points exercises the partial cell; the run up
        // to it ends in trapezoid cells, so the accuracy drops to their
        // cubic-per-cell error.
        let cut = travel_time_to(&traj, 0.557).unwrap();
        assert!((cut - 0.557_f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn geodesic_travel_time_is_metric_times_parameter() {
        let k = rotating_wind();
        let cfg = IntegratorConfig {
            t_end: 4.0,
            ..Default::default()
        };
        let v0 = k.nav().heading_velocity(&[0.0, 0.0], 0.2).unwrap();
        let traj = integrate(&k, &[0.0, 0.0], &v0, &cfg).unwrap();
        if traj.stop == StopReason::TimeLimit {
            let tt = travel_time(&traj).unwrap();
            assert!((tt - 4.0).abs() < 1e-6, "unit-level geodesic: T = {tt}");
        }
    }

    #[test]
    fn shooting_hits_a_reachable_target_and_rejects_an_unreachable_one() {
        // Constant unit wind east: rays are straight, and the target (3, 1)
        // is reached at heading asin(3/5) after time 5/3.
        let k = unit_wind_east();
        let cfg = IntegratorConfig {
            t_end: 5.0,
            ..Default::default()
        };
        let hit = shoot_to_target(&k, &[0.0, 0.0], &[3.0, 1.0], (-1.2, 1.2), &cfg).unwrap();
        let phi_expect = (3.0_f64 / 5.0).asin();
        assert!(
            (hit.phi0 - phi_expect).abs() < 1e-8,
            "phi {} vs {}",
            hit.phi0,
            phi_expect
        );
        assert!((hit.travel_time - 5.0 / 3.0).abs() < 1e-6);
        assert!(hit.miss < 1e-8);

        // Upwind targets are outside every resultant's reach.
        assert!(matches!(
            shoot_to_target(&k, &[0.0, 0.0], &[-1.0, 0.0], (-3.0, 3.0), &cfg),
            Err(KropinaError::TargetUnreachable { .. })
        ));
    }
}
