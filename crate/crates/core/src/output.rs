//! File emission: CSV tables, SVG figures, and the run manifest.
//!
//! CSV and SVG content is built as strings from the data alone, so two runs
//! with the same configuration produce byte-identical files. Wall-clock time
//! appears only in the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::error::KropinaError;
use crate::integrate::Trajectory;
use crate::navigation::KropinaMetric;
use crate::scenario::{ComparisonTable, Fan, Isochrone, ReachableSet};

/// 17 significant digits, enough to reproduce any f64 exactly.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trajectory table: one row per emitted sample, one block per ray.
///
/// `beta` is twice the inner product of the velocity with the wind, the
/// quantity whose positivity marks the admissible cone.
pub fn trajectory_csv(
    metric: &KropinaMetric,
    rays: &[(usize, f64, &Trajectory)],
) -> Result<String, KropinaError> {
    let mut out = String::from("ray_id,phi0,t,x,y,vx,vy,F_value,beta\n");
    for &(ray_id, phi0, traj) in rays {
        for s in &traj.samples {
            let beta = metric.beta(&s.x, &s.v)?;
            let _ = writeln!(
                out,
                "{ray_id},{},{},{},{},{},{},{},{}",
                num(phi0),
                num(s.t),
                num(s.x[0]),
                num(s.x[1]),
                num(s.v[0]),
                num(s.v[1]),
                num(s.f_value),
                num(beta),
            );
        }
    }
    Ok(out)
}

/// Travel-time comparison table, one row per resolved target.
pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("target_x,target_y,phi0_F,T_F,phi0_Ft,T_Ft,delta_T\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(r.target[0]),
            num(r.target[1]),
            num(r.phi0_original),
            num(r.time_original),
            num(r.phi0_generalized),
            num(r.time_generalized),
            num(r.delta),
        );
    }
    out
}

/// Isochrone points: one row per (time, heading) pair that reached the time.
pub fn isochrone_csv(fronts: &[Isochrone]) -> String {
    let mut out = String::from("t,phi0,x,y\n");
    for front in fronts {
        for p in &front.points {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                num(front.t),
                num(p.phi0),
                num(p.position[0]),
                num(p.position[1]),
            );
        }
    }
    out
}

/// Bare point list (reachable cloud, boundary loops).
pub fn points_csv(points: &[[f64; 2]]) -> String {
    let mut out = String::from("x,y\n");
    for p in points {
        let _ = writeln!(out, "{},{}", num(p[0]), num(p[1]));
    }
    out
}

// ---------------------------------------------------------------------------
// SVG figures
// ---------------------------------------------------------------------------

/// Stroke styles for the two metric series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    /// Full-speed metric: black.
    Original,
    /// Perturbed metric: red.
    Generalized,
}

impl Series {
    fn color(self) -> &'static str {
        match self {
            Series::Original => "#000000",
            Series::Generalized => "#c0392b",
        }
    }
}

/// Dash pattern for an isochrone front by position in the time list:
/// dot-dashed, then solid, then dashed, repeating.
fn front_dash(index: usize) -> &'static str {
    match index % 3 {
        0 => "2 4 9 4",
        1 => "none",
        _ => "9 5",
    }
}

const CANVAS: f64 = 840.0;
const MARGIN: f64 = 40.0;

/// World-to-canvas map with equal scales and a flipped y axis.
struct Frame {
    x0: f64,
    y0: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Frame {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        if !(lo[0].is_finite() && hi[0].is_finite()) {
            lo = [-1.0, -1.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let scale = (CANVAS - 2.0 * MARGIN) / span;
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        Frame {
            x0: cx - 0.5 * CANVAS / scale,
            y0: cy + 0.5 * CANVAS / scale,
            scale,
        }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        ((p[0] - self.x0) * self.scale, (self.y0 - p[1]) * self.scale)
    }

    fn span(&self) -> f64 {
        CANVAS / self.scale
    }
}

struct Svg {
    body: String,
    frame: Frame,
}

impl Svg {
    fn new(frame: Frame) -> Svg {
        let mut body = String::new();
        let _ = writeln!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
             width=\"{CANVAS}\" height=\"{CANVAS}\" viewBox=\"0 0 {CANVAS} {CANVAS}\">"
        );
        let _ = writeln!(
            body,
            "<rect width=\"{CANVAS}\" height=\"{CANVAS}\" fill=\"#ffffff\"/>"
        );
        Svg { body, frame }
    }

    fn polyline(&mut self, pts: &[[f64; 2]], color: &str, width: f64, dash: &str, close: bool) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, &p) in pts.iter().enumerate() {
            let (x, y) = self.frame.map(p);
            let _ = write!(d, "{}{x:.2} {y:.2}", if i == 0 { "M" } else { " L" });
        }
        if close {
            d.push_str(" Z");
        }
        let dash_attr = if dash == "none" {
            String::new()
        } else {
            format!(" stroke-dasharray=\"{dash}\"")
        };
        let _ = writeln!(
            self.body,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width:.2}\"{dash_attr}/>"
        );
    }

    fn dot(&mut self, p: [f64; 2], r: f64, color: &str) {
        let (x, y) = self.frame.map(p);
        let _ = writeln!(
            self.body,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.2}\" fill=\"{color}\"/>"
        );
    }

    fn segment(&mut self, a: [f64; 2], b: [f64; 2], color: &str, width: f64, opacity: f64) {
        let (x1, y1) = self.frame.map(a);
        let (x2, y2) = self.frame.map(b);
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
             stroke=\"{color}\" stroke-width=\"{width:.2}\" stroke-opacity=\"{opacity:.2}\"/>"
        );
    }

    /// Arrow glyphs showing the wind field on a uniform grid. Glyph length
    /// is proportional to the local wind strength.
    fn wind_glyphs(&mut self, metric: &KropinaMetric, n: usize) {
        let span = self.frame.span();
        let cell = span / n as f64;
        for i in 0..n {
            for j in 0..n {
                let x = [
                    self.frame.x0 + (i as f64 + 0.5) * cell,
                    self.frame.y0 - (j as f64 + 0.5) * cell,
                ];
                let Ok(w) = metric.nav().wind().eval(&x) else {
                    continue;
                };
                let wn = (w[0] * w[0] + w[1] * w[1]).sqrt();
                if wn < 1e-12 {
                    continue;
                }
                let len = 0.42 * cell * wn.min(1.5);
                let (ux, uy) = (w[0] / wn, w[1] / wn);
                let tip = [x[0] + len * ux, x[1] + len * uy];
                let tail = [x[0] - len * ux, x[1] - len * uy];
                self.segment(tail, tip, "#4a6fa5", 1.0, 0.45);
                for side in [-1.0, 1.0] {
                    let bx = -0.3 * len * ux + side * 0.18 * len * uy;
                    let by = -0.3 * len * uy - side * 0.18 * len * ux;
                    self.segment(tip, [tip[0] + bx, tip[1] + by], "#4a6fa5", 1.0, 0.45);
                }
            }
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn fan_points<'a>(fans: impl Iterator<Item = &'a Fan>) -> impl Iterator<Item = [f64; 2]> {
    let mut pts = Vec::new();
    for fan in fans {
        for ray in &fan.rays {
            for s in &ray.trajectory.samples {
                pts.push([s.x[0], s.x[1]]);
            }
        }
    }
    pts.into_iter()
}

/// Geodesic rays of one or two fans over a wind-glyph grid.
pub fn fan_svg(fans: &[(Series, &Fan)], wind_of: &KropinaMetric) -> String {
    let frame = Frame::fit(fan_points(fans.iter().map(|&(_, f)| f)));
    let mut svg = Svg::new(frame);
    svg.wind_glyphs(wind_of, 17);
    for &(series, fan) in fans {
        for ray in &fan.rays {
            let pts: Vec<[f64; 2]> = ray
                .trajectory
                .samples
                .iter()
                .map(|s| [s.x[0], s.x[1]])
                .collect();
            svg.polyline(&pts, series.color(), 1.3, "none", false);
        }
    }
    svg.finish()
}

/// Isochrone fronts for one or two metric series, dash-coded by time.
pub fn isochrone_svg(series: &[(Series, &[Isochrone])]) -> String {
    let all = series
        .iter()
        .flat_map(|(_, fronts)| fronts.iter())
        .flat_map(|f| f.points.iter().map(|p| p.position));
    let frame = Frame::fit(all);
    let mut svg = Svg::new(frame);
    for &(s, fronts) in series {
        for (i, front) in fronts.iter().enumerate() {
            let pts: Vec<[f64; 2]> = front.points.iter().map(|p| p.position).collect();
            svg.polyline(&pts, s.color(), 1.5, front_dash(i), pts.len() > 2);
        }
    }
    svg.finish()
}

/// Reachable-set cloud with its concave boundary loops.
pub fn reachable_svg(set: &ReachableSet, series: Series) -> String {
    let frame = Frame::fit(set.cloud.iter().chain(set.boundary.iter()).copied());
    let mut svg = Svg::new(frame);
    for &p in &set.cloud {
        svg.dot(p, 1.1, "#9db4c8");
    }
    svg.polyline(&set.boundary, series.color(), 1.6, "none", set.loops == 1);
    svg.finish()
}

// ---------------------------------------------------------------------------
// Output directory and manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    wall_time_ms: u64,
    files: &'a [String],
    config: &'a Config,
}

/// Collects files written during one run and finishes with a manifest that
/// echoes the fully resolved configuration.
pub struct OutputBundle {
    dir: PathBuf,
    files: Vec<String>,
}

fn io_err(e: std::io::Error, path: &Path) -> KropinaError {
    KropinaError::Io {
        detail: format!("{}: {e}", path.display()),
    }
}

impl OutputBundle {
    pub fn create(dir: &Path) -> Result<OutputBundle, KropinaError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(e, dir))?;
        Ok(OutputBundle {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<(), KropinaError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|e| io_err(e, &path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write `manifest.toml`. Call exactly once, after all other files, so
    /// the file list is complete; on a failed run the list holds whatever
    /// was emitted before the failure.
    pub fn finish(
        &mut self,
        command: &str,
        config: &Config,
        wall_time_ms: u64,
    ) -> Result<(), KropinaError> {
        let manifest = Manifest {
            tool: "kropina",
            version: env!("CARGO_PKG_VERSION"),
            command,
            wall_time_ms,
            files: &self.files,
            config,
        };
        let text = toml::to_string_pretty(&manifest).map_err(|e| KropinaError::Io {
            detail: format!("manifest: {e}"),
        })?;
        let path = self.dir.join("manifest.toml");
        std::fs::write(&path, text).map_err(|e| io_err(e, &path))
    }
}
