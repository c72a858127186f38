//! Invariant suite behind the `verify` subcommand.
//!
//! Each check exercises one property the rest of the crate is built on and
//! reports a single pass/fail row. The suite is self-contained: it builds
//! the worked scenario itself and needs no input files.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chart::ChartPoint;
use crate::error::KropinaError;
use crate::integrate::{integrate, travel_time, IntegratorConfig, Trajectory};
use crate::navigation::{from_kropina_data, to_kropina_data, KropinaMetric};
use crate::scenario::{
    audit_transcription, compare_travel_times, fan_targets, generate_fan, generalized_metric,
    generalized_nav, generalized_system, isochrones, original_metric, original_nav,
    original_system, polygon_contains, sample_admissible_states, FanSpec,
};

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: String) -> CheckResult {
        CheckResult {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> CheckResult {
        CheckResult {
            name,
            passed: false,
            detail,
        }
    }
}

fn check(
    name: &'static str,
    body: impl FnOnce() -> Result<String, String>,
) -> CheckResult {
    match body() {
        Ok(detail) => CheckResult::pass(name, detail),
        Err(detail) => CheckResult::fail(name, detail),
    }
}

fn err_str(e: KropinaError) -> String {
    e.to_string()
}

/// Length of a sampled path under `metric`, treating each interval as a
/// straight segment traversed at constant velocity and applying Simpson's
/// rule to the position dependence along it.
pub fn polyline_length(
    metric: &KropinaMetric,
    nodes: &[(f64, [f64; 2])],
) -> Result<f64, KropinaError> {
    if nodes.len() < 2 {
        return Err(KropinaError::EmptyInput {
            what: "polyline with fewer than two nodes",
        });
    }
    let mut total = 0.0;
    for pair in nodes.windows(2) {
        let (t0, a) = pair[0];
        let (t1, b) = pair[1];
        let dt = t1 - t0;
        if dt <= 0.0 {
            return Err(KropinaError::EmptyInput {
                what: "polyline nodes out of time order",
            });
        }
        let v = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let fa = metric.eval(&a, &v)?;
        let fm = metric.eval(&mid, &v)?;
        let fb = metric.eval(&b, &v)?;
        total += dt / 6.0 * (fa + 4.0 * fm + fb);
    }
    Ok(total)
}

/// Worst length change over seeded fixed-endpoint perturbations of a
/// geodesic: the most negative value of (perturbed length − base length).
///
/// Perturbations are smooth low-mode bumps vanishing at both endpoints,
/// scaled so the largest node displacement equals `magnitude`.
pub fn first_variation_excess(
    metric: &KropinaMetric,
    traj: &Trajectory,
    trials: usize,
    magnitude: f64,
    seed: u64,
) -> Result<f64, KropinaError> {
    let nodes: Vec<(f64, [f64; 2])> = traj
        .samples
        .iter()
        .map(|p| (p.t, [p.x[0], p.x[1]]))
        .collect();
    if nodes.len() < 3 {
        return Err(KropinaError::EmptyInput {
            what: "trajectory too short to perturb",
        });
    }
    let base = polyline_length(metric, &nodes)?;
    let t0 = nodes[0].0;
    let span = nodes[nodes.len() - 1].0 - t0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let coeff: Vec<[f64; 2]> = (0..3)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let bump = |t: f64| -> [f64; 2] {
            let s = (t - t0) / span;
            let mut d = [0.0, 0.0];
            for (k, c) in coeff.iter().enumerate() {
                let w = (PI * (k + 1) as f64 * s).sin();
                d[0] += c[0] * w;
                d[1] += c[1] * w;
            }
            d
        };
        let peak = nodes
            .iter()
            .map(|&(t, _)| {
                let d = bump(t);
                (d[0] * d[0] + d[1] * d[1]).sqrt()
            })
            .fold(0.0, f64::max);
        if peak == 0.0 {
            continue;
        }
        let scale = magnitude / peak;
        let perturbed: Vec<(f64, [f64; 2])> = nodes
            .iter()
            .map(|&(t, x)| {
                let d = bump(t);
                (t, [x[0] + scale * d[0], x[1] + scale * d[1]])
            })
            .collect();
        let length = polyline_length(metric, &perturbed)?;
        worst = worst.min(length - base);
    }
    Ok(worst)
}

fn desk_config(t_end: f64, rel_tol: f64) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol,
        abs_tol: rel_tol * 1e-2,
        t_end,
        output_stride: 0.01,
        ..IntegratorConfig::default()
    }
}

fn unit_wind_strength() -> CheckResult {
    check("wind field has unit strength", || {
        let wind = crate::scenario::swirl_wind();
        let speed = crate::scenario::speed_profile();
        let mut worst_w: f64 = 0.0;
        let mut worst_match: f64 = 0.0;
        let (mut lo, mut hi): (f64, f64) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..41 {
            for j in 0..41 {
                let x = [-5.0 + 0.25 * i as f64, -5.0 + 0.25 * j as f64];
                let w = wind.eval(&x).map_err(err_str)?;
                let u = speed.eval(&x).map_err(err_str)?;
                let nw = (w[0] * w[0] + w[1] * w[1]).sqrt();
                worst_w = worst_w.max((nw - 1.0).abs());
                worst_match = worst_match.max((u * nw - u).abs());
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
        if worst_w > 1e-14 {
            return Err(format!("|wind| deviates from 1 by {worst_w:.3e}"));
        }
        if lo <= 1.0 / 3.0 || hi > 1.0 {
            return Err(format!("speed range [{lo:.6}, {hi:.6}] leaves (1/3, 1]"));
        }
        Ok(format!(
            "|wind| = 1 within {worst_w:.1e}; speed in [{lo:.4}, {hi:.4}] on a 41x41 grid"
        ))
    })
}

fn navigation_data_validates() -> CheckResult {
    check("navigation data passes strong-wind validation", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<ChartPoint> = (0..200)
            .map(|_| {
                ChartPoint::new(vec![rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
                    .expect("finite coords")
            })
            .collect();
        for (label, nav) in [("full-speed", original_nav()), ("variable-speed", generalized_nav())] {
            let report = nav.validate(&points);
            if !report.passed {
                return Err(format!(
                    "{label} data failed validation: worst |wind|-speed mismatch {:.3e}",
                    report.max_norm_mismatch
                ));
            }
        }
        Ok("both scenario data sets validate at 200 random points".to_string())
    })
}

fn indicatrix_unit_value() -> CheckResult {
    check("resultant headings lie on the unit indicatrix", || {
        let metric = generalized_metric();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            for k in 0..64 {
                let phi = 2.0 * PI * k as f64 / 64.0;
                match metric.nav().heading_velocity(&x, phi) {
                    Ok(v) => {
                        let f = metric.eval(&x, &v).map_err(err_str)?;
                        worst = worst.max((f - 1.0).abs());
                    }
                    Err(KropinaError::ExcludedHeading { .. }) => continue,
                    Err(e) => return Err(err_str(e)),
                }
            }
        }
        if worst > 1e-12 {
            return Err(format!("metric value deviates from 1 by {worst:.3e}"));
        }
        Ok(format!("worst |F - 1| = {worst:.1e} over 50 points x 64 headings"))
    })
}

fn conformality() -> CheckResult {
    check("variable-speed metric is the full-speed metric over the speed", || {
        let generalized = generalized_metric();
        let states = sample_admissible_states(&generalized, 1000, 2025);
        let mut worst_ratio: f64 = 0.0;
        let mut worst_sea: f64 = 0.0;
        for (x, v) in &states {
            let c = generalized.conformal_compare(x, v).map_err(err_str)?;
            worst_ratio = worst_ratio.max((c.ratio - c.inverse_speed).abs() / c.inverse_speed);
            let (sea, gen_val) = generalized.conformal_sea_check(x, v).map_err(err_str)?;
            worst_sea = worst_sea.max((sea - gen_val).abs() / gen_val.abs().max(1.0));
        }
        if worst_ratio > 1e-12 {
            return Err(format!("scaling identity off by {worst_ratio:.3e}"));
        }
        if worst_sea > 1e-14 {
            return Err(format!("rescaled-sea identity off by {worst_sea:.3e}"));
        }
        Ok(format!(
            "scaling within {worst_ratio:.1e}, rescaled-sea within {worst_sea:.1e} on 1000 states"
        ))
    })
}

fn data_round_trip() -> CheckResult {
    check("metric data round trip preserves values", || {
        let nav = generalized_nav();
        let data = to_kropina_data(&nav, None);
        let back = from_kropina_data(&data).map_err(err_str)?;
        let metric = KropinaMetric::new(nav);
        let again = KropinaMetric::new(back);
        let states = sample_admissible_states(&metric, 200, 515);
        let mut worst: f64 = 0.0;
        for (x, v) in &states {
            let a = metric.eval(x, v).map_err(err_str)?;
            let b = again.eval(x, v).map_err(err_str)?;
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
        if worst > 1e-12 {
            return Err(format!("round-trip values drift by {worst:.3e}"));
        }
        let unit = crate::scenario::original_nav();
        let unit_data = to_kropina_data(&unit, None);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut worst_b2: f64 = 0.0;
        for _ in 0..100 {
            let x = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let b2 = unit_data.b2.eval(&x).map_err(err_str)?;
            worst_b2 = worst_b2.max((b2 - 4.0).abs());
        }
        if worst_b2 > 1e-12 {
            return Err(format!("one-form norm drifts from 4 by {worst_b2:.3e}"));
        }
        Ok(format!(
            "values reproduced within {worst:.1e}; unit-speed one-form norm is 4 within {worst_b2:.1e}"
        ))
    })
}

fn spray_vs_explicit(
    name: &'static str,
    metric: KropinaMetric,
    system: crate::scenario::ExplicitSystem,
) -> CheckResult {
    check(name, || {
        let states = sample_admissible_states(&metric, 200, 4242);
        let audit = audit_transcription(&metric, &system, &states, 1e-8).map_err(err_str)?;
        if audit.passed() {
            Ok(format!(
                "worst relative gap {:.1e} over {} states",
                audit.max_rel_error,
                states.len()
            ))
        } else {
            Err(format!("transcription audit failed:\n{audit}"))
        }
    })
}

fn constant_speed_along_geodesics() -> CheckResult {
    check("geodesics hold unit speed over the full sweep", || {
        let cfg = desk_config(10.0, 1e-10);
        let mut worst: f64 = 0.0;
        for metric in [original_metric(), generalized_metric()] {
            let fan = generate_fan(&metric, &FanSpec::full_circle([0.0, 0.0], 16, cfg));
            if fan.rays.len() != 15 {
                return Err(format!("expected 15 admissible rays, got {}", fan.rays.len()));
            }
            for ray in &fan.rays {
                for s in &ray.trajectory.samples {
                    worst = worst.max((s.f_value - 1.0).abs());
                }
            }
        }
        if worst > 1e-6 {
            return Err(format!("speed drifts by {worst:.3e}"));
        }
        Ok(format!("worst speed drift {worst:.1e} across 30 rays to t = 10"))
    })
}

fn excluded_heading() -> CheckResult {
    check("the upwind heading is excluded and the downwind one is exact", || {
        let nav = generalized_nav();
        match nav.heading_velocity(&[0.0, 0.0], PI) {
            Err(KropinaError::ExcludedHeading { .. }) => {}
            Err(e) => return Err(format!("wrong rejection: {e}")),
            Ok(v) => return Err(format!("heading pi produced velocity {v:?}")),
        }
        let v = nav.heading_velocity(&[0.0, 0.0], 0.0).map_err(err_str)?;
        if v != vec![2.0, 0.0] {
            return Err(format!("heading 0 gave {v:?}, expected [2, 0]"));
        }
        Ok("heading pi rejected; heading 0 departs at exactly (2, 0)".to_string())
    })
}

fn travel_time_consistency() -> CheckResult {
    check("travel time equals elapsed time on unit-speed rays", || {
        let metric = generalized_metric();
        let v0 = metric
            .nav()
            .heading_velocity(&[0.0, 0.0], 0.0)
            .map_err(err_str)?;
        let traj = integrate(&metric, &[0.0, 0.0], &v0, &desk_config(10.0, 1e-10))
            .map_err(err_str)?;
        let t = travel_time(&traj).map_err(err_str)?;
        if (t - 10.0).abs() > 1e-5 {
            return Err(format!("travel time {t:.9} differs from 10"));
        }
        Ok(format!("travel time {t:.9} over a t = 10 ray"))
    })
}

fn irreversibility() -> CheckResult {
    check("reversed velocities leave the admissible cone", || {
        let metric = generalized_metric();
        let v0 = metric
            .nav()
            .heading_velocity(&[0.0, 0.0], PI / 2.0)
            .map_err(err_str)?;
        let traj = integrate(&metric, &[0.0, 0.0], &v0, &desk_config(2.0, 1e-10))
            .map_err(err_str)?;
        let end = traj.end();
        let reversed: Vec<f64> = end.v.iter().map(|c| -c).collect();
        let beta = metric.beta(&end.x, &reversed).map_err(err_str)?;
        if beta >= 0.0 {
            return Err(format!("reversed velocity stayed admissible (beta = {beta:.3e})"));
        }
        Ok(format!("reversed end velocity has beta = {beta:.3e} < 0"))
    })
}

fn first_variation() -> CheckResult {
    check("fixed-endpoint perturbations do not shorten geodesics", || {
        let metric = generalized_metric();
        let v0 = metric
            .nav()
            .heading_velocity(&[0.0, 0.0], PI / 4.0)
            .map_err(err_str)?;
        let traj = integrate(&metric, &[0.0, 0.0], &v0, &desk_config(2.0, 1e-10))
            .map_err(err_str)?;
        let worst = first_variation_excess(&metric, &traj, 50, 1e-3, 31337).map_err(err_str)?;
        if worst < -1e-9 {
            return Err(format!("a perturbation shortened the path by {:.3e}", -worst));
        }
        Ok(format!("worst length change {worst:+.3e} over 50 trials"))
    })
}

fn tolerance_halving() -> CheckResult {
    check("halving the tolerance moves endpoints within order", || {
        let metric = generalized_metric();
        let v0 = metric
            .nav()
            .heading_velocity(&[0.0, 0.0], PI / 8.0)
            .map_err(err_str)?;
        let coarse = integrate(&metric, &[0.0, 0.0], &v0, &desk_config(3.0, 1e-8))
            .map_err(err_str)?;
        let fine = integrate(&metric, &[0.0, 0.0], &v0, &desk_config(3.0, 0.5e-8))
            .map_err(err_str)?;
        let (a, b) = (coarse.end(), fine.end());
        let d = ((a.x[0] - b.x[0]).powi(2) + (a.x[1] - b.x[1]).powi(2)).sqrt();
        if d > 1e-7 {
            return Err(format!("endpoints moved {d:.3e} on halving"));
        }
        Ok(format!("endpoint shift {d:.1e} on halving the tolerance"))
    })
}

fn isochrone_nesting() -> CheckResult {
    check("variable-speed isochrones nest inside full-speed ones", || {
        let cfg = desk_config(3.2, 1e-8);
        let outer = generate_fan(&original_metric(), &FanSpec::full_circle([0.0, 0.0], 512, cfg));
        let inner = generate_fan(&generalized_metric(), &FanSpec::full_circle([0.0, 0.0], 64, cfg));
        let iso_outer = isochrones(&outer, &[1.0, 2.0, 3.0]);
        let iso_inner = isochrones(&inner, &[1.0, 2.0, 3.0]);
        for (io, ig) in iso_outer.iter().zip(&iso_inner) {
            let poly: Vec<[f64; 2]> = io.points.iter().map(|p| p.position).collect();
            for p in &ig.points {
                if !polygon_contains(&poly, p.position, 0.02) {
                    return Err(format!(
                        "point {:?} of the t = {} inner front escapes",
                        p.position, ig.t
                    ));
                }
            }
        }
        Ok("inner fronts at t = 1, 2, 3 stay inside the outer ones".to_string())
    })
}

fn travel_time_comparison() -> CheckResult {
    check("matched targets cost at least as much under variable speed", || {
        let original = original_metric();
        let generalized = generalized_metric();
        let fan = generate_fan(
            &generalized,
            &FanSpec::full_circle([0.0, 0.0], 16, desk_config(2.0, 1e-8)),
        );
        let targets = fan_targets(&fan, 2.0, 3);
        let table = compare_travel_times(
            &original,
            &generalized,
            &[0.0, 0.0],
            &targets,
            &desk_config(5.0, 1e-8),
        );
        if !table.skipped.is_empty() {
            return Err(format!("unreachable targets: {:?}", table.skipped));
        }
        for row in &table.rows {
            if row.delta < -1e-6 {
                return Err(format!(
                    "target {:?} was faster under variable speed by {:.3e}",
                    row.target, -row.delta
                ));
            }
        }
        Ok(format!(
            "all {} targets satisfy the time inequality",
            table.rows.len()
        ))
    })
}

/// Run the whole invariant suite in a fixed order.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        unit_wind_strength(),
        navigation_data_validates(),
        indicatrix_unit_value(),
        conformality(),
        data_round_trip(),
        spray_vs_explicit(
            "spray matches the explicit full-speed system",
            original_metric(),
            original_system(),
        ),
        spray_vs_explicit(
            "spray matches the explicit variable-speed system",
            generalized_metric(),
            generalized_system(),
        ),
        constant_speed_along_geodesics(),
        excluded_heading(),
        travel_time_consistency(),
        irreversibility(),
        first_variation(),
        tolerance_halving(),
        isochrone_nesting(),
        travel_time_comparison(),
    ]
}
