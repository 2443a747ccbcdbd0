//! Membership certificate for the structurally stable class: separatrix
//! tracing on the Poincaré sphere, the four conditions, and the Monte-Carlo
//! density experiment.

use crate::compactify::{infinity_singularities, Chart, InfinitySingularity};
use crate::cycles::{find_limit_cycles, CycleScan, CycleVerdict, LimitCycleRecord, ScanOptions, TOL_CYCLE};
use crate::model::{monomial_count, EssField, FieldEval};
use crate::ode::{Dopri5, Tolerances};
use crate::poly::Poly2;
use crate::polycycle::{detect_square_polycycle, PolycycleReport, TOL_GENERIC};
use crate::singular::{find_finite_singularities, index_sum, Location, Rect, SingularError, Singularity, TOL_HYPERBOLIC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Distance below which a trace has reached a singular point or cycle.
pub const TOL_CONVERGE: f64 = 1e-5;
/// Mismatch below which two separatrices are taken to coincide.
pub const TOL_CONNECTION: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub tol_hyperbolic: f64,
    pub tol_generic: f64,
    pub tol_cycle: f64,
    pub tol_connection: f64,
    pub tol_converge: f64,
    /// Offset of separatrix start points from their saddle.
    pub delta0: f64,
    /// Time cap for one separatrix trace (sphere time).
    pub trace_t_max: f64,
    pub scan: ScanOptions,
    pub rect: Rect,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tol_hyperbolic: TOL_HYPERBOLIC,
            tol_generic: TOL_GENERIC,
            tol_cycle: TOL_CYCLE,
            tol_connection: TOL_CONNECTION,
            tol_converge: TOL_CONVERGE,
            delta0: 1e-7,
            trace_t_max: 1e4,
            scan: ScanOptions::default(),
            rect: Rect::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Sphere geometry

/// Central projection of the plane onto the northern hemisphere.
pub fn to_sphere(p: [f64; 2]) -> [f64; 3] {
    let n = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
    [p[0] / n, p[1] / n, 1.0 / n]
}

/// Inverse of [`to_sphere`]; `None` on or below the equator.
pub fn to_plane(y: [f64; 3]) -> Option<[f64; 2]> {
    (y[2] > 0.0).then(|| [y[0] / y[2], y[1] / y[2]])
}

fn chart_base(chart: Chart, u: f64, v: f64) -> ([f64; 3], [f64; 3], [f64; 3], f64) {
    let sgn = if chart.is_v() { -1.0 } else { 1.0 };
    match chart.base() {
        Chart::U1 => ([1.0, u, v], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], sgn),
        _ => ([u, 1.0, v], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], sgn),
    }
}

/// Sphere point of chart coordinates `(u, v)`.
pub fn chart_point(chart: Chart, u: f64, v: f64) -> [f64; 3] {
    let (b, _, _, s) = chart_base(chart, u, v);
    let n = norm3(b);
    [s * b[0] / n, s * b[1] / n, s * b[2] / n]
}

/// Image on the sphere of the chart vector `(du, dv)` at `(u, 0)`.
fn chart_tangent(chart: Chart, u: f64, w: [f64; 2]) -> [f64; 3] {
    let (b, bu, bv, s) = chart_base(chart, u, 0.0);
    let n = norm3(b);
    let db = [w[0] * bu[0] + w[1] * bv[0], w[0] * bu[1] + w[1] * bv[1], w[0] * bu[2] + w[1] * bv[2]];
    let proj = dot3(b, db) / (n * n * n);
    let t = [
        s * (db[0] / n - b[0] * proj),
        s * (db[1] / n - b[1] * proj),
        s * (db[2] / n - b[2] * proj),
    ];
    let m = norm3(t);
    [t[0] / m, t[1] / m, t[2] / m]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// The compactified field on the sphere:
/// `(P̃, Q̃, 0) - (y1 P̃ + y2 Q̃) Y` with `P̃, Q̃` the degree-`n`
/// homogenizations. Orbits agree with the planar ones up to a positive
/// time change on the northern hemisphere.
#[derive(Debug, Clone)]
pub struct SphereField {
    p: Poly2,
    q: Poly2,
    n: u32,
}

impl SphereField {
    pub fn new(x: &EssField) -> Self {
        SphereField {
            p: x.p().clone(),
            q: x.q().clone(),
            n: x.n(),
        }
    }

    pub fn vector(&self, y: &[f64; 3]) -> [f64; 3] {
        let p = self.p.eval_homogeneous(self.n, y[0], y[1], y[2]);
        let q = self.q.eval_homogeneous(self.n, y[0], y[1], y[2]);
        let w = y[0] * p + y[1] * q;
        [p - w * y[0], q - w * y[1], -w * y[2]]
    }

    /// [`Self::vector`] divided by `(y3² + c²)^((n-1)/2)`, `c = 1e-2`.
    /// Same orbits; roughly planar time away from the equator, so far
    /// finite saddles are not frozen.
    pub fn rescaled(&self, y: &[f64; 3]) -> [f64; 3] {
        let v = self.vector(y);
        let s = (y[2] * y[2] + 1e-4).powf(0.5 * (self.n as f64 - 1.0));
        [v[0] / s, v[1] / s, v[2] / s]
    }
}

// ---------------------------------------------------------------------------
// Separatrices

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LimitLabel {
    Singularity { id: usize },
    LimitCycle { id: usize },
    PolycycleInLambda { square: bool },
    Infinity { chart: Chart, u0: f64 },
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Unstable,
    Stable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleInfo {
    pub location: Location,
    pub sphere: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    /// Index into [`SeparatrixSkeleton::saddles`].
    pub saddle: usize,
    pub branch: Branch,
    pub on_lambda: bool,
    /// Sphere points in trace order.
    pub points: Vec<[f64; 3]>,
    pub label: LimitLabel,
    /// Distance to the limit set when the trace stopped; `None` when
    /// unresolved.
    pub final_distance: Option<f64>,
    pub trace_time: f64,
    /// Closest approach to each saddle, indexed like `saddles`; `None`
    /// when not tracked.
    pub saddle_approach: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixSkeleton {
    pub saddles: Vec<SaddleInfo>,
    pub separatrices: Vec<Separatrix>,
    pub delta0: f64,
    pub t_max: f64,
}

/// A singular point as seen by the tracer.
struct Target {
    y: [f64; 3],
    label: LimitLabel,
    saddle: Option<usize>,
    /// `1` for a hyperbolic sink, `-1` for a hyperbolic source.
    attracts: Option<f64>,
}

fn attraction(s: &Singularity) -> Option<f64> {
    let (a, b) = (s.eigenvalues[0].re, s.eigenvalues[1].re);
    if !s.kind.is_hyperbolic() || a * b <= 0.0 {
        return None;
    }
    Some(-a.signum())
}

/// A cycle resampled at uniform time steps, for distance tests.
struct DenseCycle {
    pts: Vec<[f64; 2]>,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl DenseCycle {
    fn new(fe: &FieldEval, rec: &LimitCycleRecord, n: usize) -> Self {
        let start = rec.section.point(rec.s_star);
        let mut st = Dopri5::new(|_, y: &[f64; 2]| fe.vector(y[0], y[1]), 0.0, start, 1.0, Tolerances::default());
        let mut pts = Vec::with_capacity(n + 1);
        pts.push(start);
        let mut k = 1;
        while k <= n && st.step(rec.period).is_ok() {
            while k <= n {
                let t = rec.period * k as f64 / n as f64;
                if t > st.t() {
                    break;
                }
                let y = st.dense(t);
                pts.push(y);
                k += 1;
            }
            if st.t() >= rec.period {
                break;
            }
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &pts {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        DenseCycle { pts, lo, hi }
    }

    fn distance(&self, p: [f64; 2], cutoff: f64) -> f64 {
        if p[0] < self.lo[0] - cutoff || p[0] > self.hi[0] + cutoff || p[1] < self.lo[1] - cutoff || p[1] > self.hi[1] + cutoff {
            return f64::INFINITY;
        }
        self.pts
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * ab[0]).hypot(p[1] - a[1] - t * ab[1])
}

fn square_boundary_distance(p: [f64; 2]) -> Option<f64> {
    let inside = p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0;
    inside.then(|| p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]))
}

fn lambda_distance(y: [f64; 3]) -> f64 {
    let mut d = y[2].abs();
    if let Some(p) = to_plane(y) {
        let s = 1.0 + p[0].abs().max(p[1].abs());
        d = d.min(p[0].abs().min((p[0] - 1.0).abs()).min(p[1].abs()).min((p[1] - 1.0).abs()) / s);
    }
    d
}

struct TraceContext<'a> {
    sf: &'a SphereField,
    targets: Vec<Target>,
    cycles: Vec<DenseCycle>,
    square: Option<&'a PolycycleReport>,
    n_saddles: usize,
    opts: &'a CertifyOptions,
}

struct TraceOut {
    points: Vec<[f64; 3]>,
    label: LimitLabel,
    final_distance: f64,
    time: f64,
    approach: Vec<f64>,
}

impl TraceContext<'_> {
    fn trace(&self, start: [f64; 3], dir: f64, source: usize, on_lambda: bool) -> TraceOut {
        let tol = Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        };
        let sf = self.sf;
        let mut st = Dopri5::new(|_, y: &[f64; 3]| sf.rescaled(y), 0.0, start, dir, tol);
        st.max_steps = 1_000_000;
        let source_y = self.targets.iter().find(|t| t.saddle == Some(source)).map(|t| t.y);
        let mut left_source = source_y.is_none();
        let mut approach = vec![f64::INFINITY; self.n_saddles];
        let mut points = vec![start];
        let conv = self.opts.tol_converge;
        let t_max = self.opts.trace_t_max;
        while st.t().abs() < t_max {
            if st.step(dir * t_max).is_err() {
                break;
            }
            let mut y = *st.y();
            if (norm3(y) - 1.0).abs() > 1e-12 {
                y = normalize3(y);
                st.reset_state(y);
            }
            points.push(y);
            if !left_source {
                left_source = dist3(y, source_y.unwrap()) > 1e-3;
            }
            for t in &self.targets {
                let d = dist3(y, t.y);
                if let Some(k) = t.saddle {
                    if k == source && !left_source {
                        continue;
                    }
                    approach[k] = approach[k].min(d);
                }
                // Off-Λ traces pass close to saddles; only a much closer
                // approach counts as arrival.
                let arrive = match t.saddle {
                    Some(_) if !on_lambda => d < 1e-3 * conv,
                    _ => d < conv,
                };
                if arrive {
                    return TraceOut {
                        points,
                        label: t.label,
                        final_distance: d,
                        time: st.t().abs(),
                        approach,
                    };
                }
            }
            if let Some(p) = to_plane(y).filter(|_| y[2] > 1e-6) {
                for (id, c) in self.cycles.iter().enumerate() {
                    let d = c.distance(p, conv);
                    if d < conv {
                        return TraceOut {
                            points,
                            label: LimitLabel::LimitCycle { id },
                            final_distance: d,
                            time: st.t().abs(),
                            approach,
                        };
                    }
                }
            }
        }
        let time = st.t().abs();
        let (label, final_distance) = self.fallback_label(&points, dir);
        TraceOut {
            points,
            label,
            final_distance,
            time,
            approach,
        }
    }

    /// Labels a trace that hit the time cap from the approach over its
    /// last fifth.
    fn fallback_label(&self, points: &[[f64; 3]], dir: f64) -> (LimitLabel, f64) {
        let last = *points.last().unwrap();
        let w0 = points[points.len() - 1 - (points.len() - 1) / 5];
        let approaching = |d0: f64, d1: f64| d1 < 1e-2 && d1 < 0.5 * d0;
        for t in self.targets.iter().filter(|t| t.saddle.is_none()) {
            let (d0, d1) = (dist3(w0, t.y), dist3(last, t.y));
            // Weakly attracting points are approached slowly but surely.
            let sink = t.attracts == Some(dir) && d1 < 1e-2 && (d1 < d0 || d1 < 10.0 * self.opts.tol_converge);
            if approaching(d0, d1) || sink {
                return (t.label, d1);
            }
        }
        if let (Some(p0), Some(p1)) = (to_plane(w0), to_plane(last)) {
            for (id, c) in self.cycles.iter().enumerate() {
                let (d0, d1) = (c.distance(p0, 1.0), c.distance(p1, 1.0));
                if approaching(d0, d1) {
                    return (LimitLabel::LimitCycle { id }, d1);
                }
            }
            if self.square.is_some_and(|r| r.exists) {
                if let Some(d1) = square_boundary_distance(p1) {
                    if d1 < 1e-3 {
                        return (LimitLabel::PolycycleInLambda { square: true }, d1);
                    }
                }
            }
        }
        let d = lambda_distance(last);
        if d < 1e-4 {
            return (LimitLabel::PolycycleInLambda { square: false }, d);
        }
        (LimitLabel::Unresolved, f64::NAN)
    }
}

/// Where an on-Λ separatrix runs: along a line `x = c` (`axis` 0) or
/// `y = c` (`axis` 1) with sign `dir` in the free coordinate, or along the
/// equator with sign `dir` in the polar angle.
#[derive(Debug, Clone, Copy)]
enum LambdaPath {
    Line { axis: usize, value: f64, from: f64, dir: f64 },
    Equator { from: f64, dir: f64 },
}

/// Cap on stored points per separatrix.
const MAX_TRACE_POINTS: usize = 1000;

/// Uniform subsample keeping both ends.
fn decimate(points: Vec<[f64; 3]>, max: usize) -> Vec<[f64; 3]> {
    if points.len() <= max {
        return points;
    }
    let n = points.len() - 1;
    (0..max).map(|k| points[k * n / (max - 1)]).collect()
}

/// Sphere start data of one separatrix.
struct Seed {
    saddle: usize,
    branch: Branch,
    on_lambda: bool,
    start: [f64; 3],
    path: Option<LambdaPath>,
}

/// Limit of an on-Λ separatrix from the one-dimensional flow on its line:
/// the next singular point in the direction of travel.
fn lambda_limit(path: LambdaPath, origin: [f64; 3], finite: &[Singularity], infinite: &[InfinitySingularity]) -> (LimitLabel, Vec<[f64; 3]>) {
    let arc = |a: [f64; 3], b: [f64; 3]| -> Vec<[f64; 3]> {
        (0..=64)
            .map(|k| {
                let t = k as f64 / 64.0;
                normalize3([(1.0 - t) * a[0] + t * b[0], (1.0 - t) * a[1] + t * b[1], (1.0 - t) * a[2] + t * b[2]])
            })
            .collect()
    };
    match path {
        LambdaPath::Line { axis, value, from, dir } => {
            let free = 1 - axis;
            let next = finite
                .iter()
                .enumerate()
                .filter_map(|(id, s)| {
                    let (x, y) = s.finite_xy()?;
                    let p = [x, y];
                    (p[axis] == value && (p[free] - from) * dir > 0.0).then_some((id, (p[free] - from).abs(), p))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((id, _, p)) = next {
                return (LimitLabel::Singularity { id }, arc(origin, to_sphere(p)));
            }
            let mut end = [0.0; 3];
            end[free] = dir;
            let hit = infinite.iter().find(|s| dist3(s.direction, end) < 1e-9);
            let label = hit.map_or(LimitLabel::Unresolved, |s| LimitLabel::Infinity { chart: s.chart, u0: s.u0 });
            // Split the quarter circle so the interpolation stays well posed.
            let mid = normalize3([origin[0] + end[0], origin[1] + end[1], origin[2] + end[2]]);
            let mut pts = arc(origin, mid);
            pts.extend(arc(mid, end).into_iter().skip(1));
            (label, pts)
        }
        LambdaPath::Equator { from, dir } => {
            let tau = std::f64::consts::TAU;
            let next = infinite
                .iter()
                .map(|s| {
                    let th = s.direction[1].atan2(s.direction[0]);
                    (s, ((th - from) * dir).rem_euclid(tau))
                })
                .filter(|(_, d)| *d > 1e-12 && *d < tau - 1e-12)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let Some((s, delta)) = next else {
                return (LimitLabel::Unresolved, vec![origin]);
            };
            let pts = (0..=128)
                .map(|k| {
                    let th = from + dir * delta * k as f64 / 128.0;
                    [th.cos(), th.sin(), 0.0]
                })
                .collect();
            (LimitLabel::Infinity { chart: s.chart, u0: s.u0 }, pts)
        }
    }
}

fn finite_seeds(k: usize, s: &Singularity, delta0: f64) -> Vec<Seed> {
    let (x, y) = s.finite_xy().unwrap();
    let (ls, lu) = (s.eigenvalues[0].re, s.eigenvalues[1].re);
    let delta0 = delta0 * (1.0 + x.abs().max(y.abs()));
    let mut out = Vec::new();
    for (lam, branch) in [(lu, Branch::Unstable), (ls, Branch::Stable)] {
        let e = s.eigenvector(lam);
        let along_x_line = e[0] == 0.0 && (x == 0.0 || x == 1.0);
        let along_y_line = e[1] == 0.0 && (y == 0.0 || y == 1.0);
        for sg in [1.0, -1.0] {
            let path = if along_x_line {
                Some(LambdaPath::Line { axis: 0, value: x, from: y, dir: sg * e[1].signum() })
            } else if along_y_line {
                Some(LambdaPath::Line { axis: 1, value: y, from: x, dir: sg * e[0].signum() })
            } else {
                None
            };
            out.push(Seed {
                saddle: k,
                branch,
                on_lambda: path.is_some(),
                start: to_sphere([x + sg * delta0 * e[0], y + sg * delta0 * e[1]]),
                path,
            });
        }
    }
    out
}

fn infinite_seeds(k: usize, s: &InfinitySingularity, delta0: f64) -> Vec<Seed> {
    let q = &s.singularity;
    let (ls, lu) = (q.eigenvalues[0].re, q.eigenvalues[1].re);
    let base = s.direction;
    let mut out = Vec::new();
    for (lam, branch) in [(lu, Branch::Unstable), (ls, Branch::Stable)] {
        let e = q.eigenvector(lam);
        let w = chart_tangent(s.chart, s.u0, e);
        if e[1] == 0.0 {
            let from = base[1].atan2(base[0]);
            for sg in [1.0, -1.0] {
                let p = [base[0] + sg * delta0 * w[0], base[1] + sg * delta0 * w[1], 0.0];
                let turn = base[0] * w[1] - base[1] * w[0];
                out.push(Seed {
                    saddle: k,
                    branch,
                    on_lambda: true,
                    start: normalize3(p),
                    path: Some(LambdaPath::Equator { from, dir: sg * turn.signum() }),
                });
            }
        } else {
            // Only the branch entering the northern hemisphere.
            let sg = w[2].signum();
            let p = [base[0] + sg * delta0 * w[0], base[1] + sg * delta0 * w[1], sg * delta0 * w[2]];
            out.push(Seed {
                saddle: k,
                branch,
                on_lambda: false,
                start: normalize3(p),
                path: None,
            });
        }
    }
    out
}

/// Traces all separatrices of the hyperbolic saddles in `finite` and
/// `infinite`.
pub fn trace_with(
    x: &EssField,
    finite: &[Singularity],
    infinite: &[InfinitySingularity],
    cycles: &[LimitCycleRecord],
    square: Option<&PolycycleReport>,
    opts: &CertifyOptions,
) -> SeparatrixSkeleton {
    let sf = SphereField::new(x);
    let fe = x.evaluator();
    let mut saddles = Vec::new();
    let mut targets = Vec::new();
    let mut seeds = Vec::new();
    for (id, s) in finite.iter().enumerate() {
        let (px, py) = s.finite_xy().unwrap();
        let y = to_sphere([px, py]);
        let saddle = s.kind.is_saddle().then_some(saddles.len());
        if let Some(k) = saddle {
            seeds.extend(finite_seeds(k, s, opts.delta0));
            saddles.push(SaddleInfo { location: s.location, sphere: y });
        }
        targets.push(Target {
            y,
            label: LimitLabel::Singularity { id },
            saddle,
            attracts: attraction(s),
        });
    }
    for s in infinite {
        let saddle = s.singularity.kind.is_saddle().then_some(saddles.len());
        if let Some(k) = saddle {
            seeds.extend(infinite_seeds(k, s, opts.delta0));
            saddles.push(SaddleInfo {
                location: s.singularity.location,
                sphere: s.direction,
            });
        }
        targets.push(Target {
            y: s.direction,
            label: LimitLabel::Infinity { chart: s.chart, u0: s.u0 },
            saddle,
            attracts: attraction(&s.singularity),
        });
    }
    let saddle_pts: Vec<[f64; 3]> = saddles.iter().map(|s: &SaddleInfo| s.sphere).collect();
    let ctx = TraceContext {
        sf: &sf,
        targets,
        cycles: cycles.iter().map(|c| DenseCycle::new(&fe, c, 4096)).collect(),
        square,
        n_saddles: saddles.len(),
        opts,
    };
    let separatrices = seeds
        .into_iter()
        .map(|sd| {
            if let Some(path) = sd.path {
                let (label, points) = lambda_limit(path, saddle_pts[sd.saddle], finite, infinite);
                return Separatrix {
                    saddle: sd.saddle,
                    branch: sd.branch,
                    on_lambda: true,
                    points,
                    label,
                    final_distance: Some(0.0),
                    trace_time: 0.0,
                    saddle_approach: vec![None; ctx.n_saddles],
                };
            }
            let dir = if sd.branch == Branch::Unstable { 1.0 } else { -1.0 };
            let out = ctx.trace(sd.start, dir, sd.saddle, sd.on_lambda);
            Separatrix {
                saddle: sd.saddle,
                branch: sd.branch,
                on_lambda: sd.on_lambda,
                points: decimate(out.points, MAX_TRACE_POINTS),
                label: out.label,
                final_distance: out.final_distance.is_finite().then_some(out.final_distance),
                trace_time: out.time,
                saddle_approach: out.approach.iter().map(|d| d.is_finite().then_some(*d)).collect(),
            }
        })
        .collect();
    SeparatrixSkeleton {
        saddles,
        separatrices,
        delta0: opts.delta0,
        t_max: opts.trace_t_max,
    }
}

/// Runs the singular-point, polycycle and cycle analyses and traces the
/// separatrices. Returns an empty skeleton when the finite singular points
/// could not be resolved.
pub fn trace_separatrices(x: &EssField, opts: &CertifyOptions) -> SeparatrixSkeleton {
    analyze(x, opts).skeleton
}

// ---------------------------------------------------------------------------
// Connections

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionEvidence {
    /// Unstable separatrix index.
    pub unstable: usize,
    /// Stable separatrix index.
    pub stable: usize,
    pub source: usize,
    pub target: usize,
    /// Distance between the two separatrices on a section transverse to
    /// the stable one; `None` when the unstable one never crossed it.
    pub mismatch: Option<f64>,
}

/// Re-shoots the unstable separatrix `u` onto the section through a point
/// of the stable separatrix `s` and measures the gap.
fn shoot_mismatch(sf: &SphereField, sk: &SeparatrixSkeleton, u: &Separatrix, s: &Separatrix) -> f64 {
    let q = sk.saddles[s.saddle].sphere;
    let p = sk.saddles[u.saddle].sphere;
    let rho = 0.05f64.min(0.5 * dist3(p, q)).max(1e-4);
    let z = *s.points.iter().find(|y| dist3(**y, q) >= rho).unwrap_or(s.points.last().unwrap());
    let n = normalize3(sf.rescaled(&z));
    if !n.iter().all(|c| c.is_finite()) {
        return f64::INFINITY;
    }
    let g = |y: &[f64; 3]| (y[0] - z[0]) * n[0] + (y[1] - z[1]) * n[1] + (y[2] - z[2]) * n[2];
    let tol = Tolerances {
        rtol: 1e-12,
        atol: 1e-14,
    };
    let mut st = Dopri5::new(|_, y: &[f64; 3]| sf.rescaled(y), 0.0, u.points[0], 1.0, tol);
    st.max_steps = 400_000;
    let mut best = f64::INFINITY;
    let t_end = u.trace_time.max(1.0);
    while st.t() < t_end {
        if st.step(t_end).is_err() {
            break;
        }
        let (ga, gb) = (g(st.y_prev()), g(st.y()));
        if ga < 0.0 && gb >= 0.0 {
            let (_, ye) = st.locate_event(g, 1e-14 * (1.0 + st.t()));
            best = best.min(dist3(ye, z));
        }
    }
    best
}

fn find_connections(x: &EssField, sk: &SeparatrixSkeleton, opts: &CertifyOptions) -> Vec<ConnectionEvidence> {
    let sf = SphereField::new(x);
    let mut out = Vec::new();
    for (iu, u) in sk.separatrices.iter().enumerate() {
        if u.on_lambda || u.branch != Branch::Unstable {
            continue;
        }
        for (is, s) in sk.separatrices.iter().enumerate() {
            if s.on_lambda || s.branch != Branch::Stable || iu == is {
                continue;
            }
            let arrived = matches!(u.label, LimitLabel::Singularity { .. } | LimitLabel::Infinity { .. })
                && dist3(*u.points.last().unwrap(), sk.saddles[s.saddle].sphere) < opts.tol_converge;
            if u.saddle_approach[s.saddle].is_none_or(|d| d > 1e-3) && !arrived {
                continue;
            }
            let mismatch = Some(shoot_mismatch(&sf, sk, u, s)).filter(|m| m.is_finite());
            out.push(ConnectionEvidence {
                unstable: iu,
                stable: is,
                source: u.saddle,
                target: s.saddle,
                mismatch,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Certificate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason")]
pub enum Verdict {
    Pass,
    Fail(String),
    Inconclusive(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Overall {
    InPd,
    NotInPd,
    Inconclusive,
}

/// Distances of the certified field from the failure thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// Smallest `|Re λ| / (1 + |J|)` over all singular points.
    pub hyperbolicity: Option<f64>,
    /// `|r(Ω) - 1|` when the square is a polycycle.
    pub polycycle: Option<f64>,
    /// Smallest `|r(γ)|` over the cycles found.
    pub cycles: Option<f64>,
    /// Smallest separatrix mismatch checked for condition (c).
    pub connection: Option<f64>,
}

impl Margins {
    /// All margins exceed `factor` times their tolerances.
    pub fn exceed(&self, opts: &CertifyOptions, factor: f64) -> bool {
        self.hyperbolicity.is_some_and(|m| m > factor * opts.tol_hyperbolic)
            && self.polycycle.is_none_or(|m| m > factor * opts.tol_generic)
            && self.cycles.is_none_or(|m| m > factor * opts.tol_cycle)
    }
}

/// Counts and extrema behind the four verdicts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub finite_singularities: usize,
    pub infinite_singularities: usize,
    pub non_hyperbolic: usize,
    pub cycles: usize,
    pub min_abs_r_gamma: Option<f64>,
    pub scan_gaps: usize,
    pub separatrices: usize,
    pub connection_candidates: usize,
    pub min_mismatch: Option<f64>,
    pub unresolved_labels: usize,
    pub infinity_polycycle_labels: usize,
    pub square_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolutions {
    pub scan_samples: usize,
    pub scan_t_max: f64,
    pub max_section: f64,
    pub trace_t_max: f64,
    pub delta0: f64,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertTolerances {
    pub hyperbolic: f64,
    pub generic: f64,
    pub cycle: f64,
    pub connection: f64,
    pub converge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub a_prime: Verdict,
    pub b_prime: Verdict,
    pub c: Verdict,
    pub d_prime: Verdict,
    pub overall: Overall,
    pub margins: Margins,
    pub evidence: Evidence,
    pub tolerances: CertTolerances,
    pub resolutions: Resolutions,
}

impl StabilityCertificate {
    pub fn conditions(&self) -> [(&'static str, &Verdict); 4] {
        [("a_prime", &self.a_prime), ("b_prime", &self.b_prime), ("c", &self.c), ("d_prime", &self.d_prime)]
    }
}

fn overall_of(v: [&Verdict; 4]) -> Overall {
    if v.iter().all(|c| c.is_pass()) {
        Overall::InPd
    } else if v.iter().any(|c| c.is_fail()) {
        Overall::NotInPd
    } else {
        Overall::Inconclusive
    }
}

/// Everything computed for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub finite: Vec<Singularity>,
    pub finite_error: Option<String>,
    pub infinite: Vec<InfinitySingularity>,
    pub infinite_error: Option<String>,
    /// `2 Σ finite + Σ equator`, when every index is determined.
    pub index_sum: Option<i32>,
    pub polycycle: Option<PolycycleReport>,
    pub polycycle_error: Option<String>,
    pub cycles: CycleScan,
    pub skeleton: SeparatrixSkeleton,
    pub connections: Vec<ConnectionEvidence>,
    pub certificate: StabilityCertificate,
}

fn verdict_a(finite: &Result<Vec<Singularity>, SingularError>, infinite: &Result<Vec<InfinitySingularity>, String>) -> Verdict {
    let fin = match finite {
        Ok(v) => v,
        Err(e @ SingularError::NonIsolated(_)) => return Verdict::Fail(e.to_string()),
        Err(e) => return Verdict::Inconclusive(e.to_string()),
    };
    let inf = match infinite {
        Ok(v) => v,
        Err(e) => return Verdict::Fail(e.clone()),
    };
    let mut bad: Vec<String> = fin
        .iter()
        .filter(|s| !s.kind.is_hyperbolic())
        .map(|s| format!("{:?} at {:?}", s.kind, s.location))
        .collect();
    bad.extend(
        inf.iter()
            .filter(|s| !s.singularity.kind.is_hyperbolic())
            .map(|s| format!("{:?} at infinity ({:?}, u = {})", s.singularity.kind, s.chart, s.u0)),
    );
    if bad.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail(bad.join("; "))
    }
}

fn verdict_b(scan: Option<&CycleScan>, tol_cycle: f64) -> Verdict {
    let Some(scan) = scan else {
        return Verdict::Inconclusive("finite singular points unresolved; cycle scan skipped".into());
    };
    if scan.non_isolated() {
        return Verdict::Fail("continuum of closed orbits".into());
    }
    let weak: Vec<String> = scan
        .cycles
        .iter()
        .filter(|c| c.r_gamma.abs() <= tol_cycle || c.verdict == CycleVerdict::NonHyperbolicSuspect)
        .map(|c| format!("cycle with r = {:e}", c.r_gamma))
        .collect();
    if !weak.is_empty() {
        return Verdict::Fail(weak.join("; "));
    }
    if scan.gaps() > 0 {
        return Verdict::Inconclusive(format!("{} scan samples or refinements unresolved", scan.gaps()));
    }
    Verdict::Pass
}

fn verdict_c(traced: bool, conns: &[ConnectionEvidence], tol: f64) -> Verdict {
    if !traced {
        return Verdict::Inconclusive("separatrices not traced".into());
    }
    let bad: Vec<String> = conns
        .iter()
        .filter_map(|c| c.mismatch.filter(|m| *m < tol).map(|m| (c, m)))
        .map(|(c, m)| format!("saddle {} to saddle {} (mismatch {:e})", c.source, c.target, m))
        .collect();
    if bad.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("connection off the invariant set: {}", bad.join("; ")))
    }
}

fn verdict_d(traced: bool, sk: &SeparatrixSkeleton, square: Option<&PolycycleReport>) -> Verdict {
    if let Some(r) = square.filter(|r| r.exists && !r.generic) {
        return Verdict::Fail(format!("square polycycle is not generic (r = {})", r.ratio.unwrap_or(f64::NAN)));
    }
    if !traced {
        return Verdict::Inconclusive("separatrices not traced".into());
    }
    let unresolved = sk.separatrices.iter().filter(|s| s.label == LimitLabel::Unresolved).count();
    let other_poly = sk
        .separatrices
        .iter()
        .filter(|s| s.label == LimitLabel::PolycycleInLambda { square: false })
        .count();
    if unresolved > 0 {
        return Verdict::Inconclusive(format!("{unresolved} separatrices unresolved"));
    }
    if other_poly > 0 {
        return Verdict::Inconclusive(format!("{other_poly} separatrices approach a polycycle through infinity"));
    }
    Verdict::Pass
}

/// Full pipeline for one field.
pub fn analyze(x: &EssField, opts: &CertifyOptions) -> Analysis {
    let finite = find_finite_singularities(x, opts.rect, opts.tol_hyperbolic);
    let infinite = infinity_singularities(x, opts.tol_hyperbolic).map_err(|e| e.to_string());
    let polycycle = detect_square_polycycle(x, opts.tol_hyperbolic, opts.tol_generic);
    let fin_slice: &[Singularity] = finite.as_deref().unwrap_or(&[]);
    let inf_slice: &[InfinitySingularity] = infinite.as_deref().unwrap_or(&[]);
    let scan = finite.as_ref().ok().map(|f| find_limit_cycles(x, f, &opts.scan));
    let square = polycycle.as_ref().ok();
    let traced = finite.is_ok() && infinite.is_ok();
    let (skeleton, connections) = if traced {
        let cyc: &[LimitCycleRecord] = scan.as_ref().map_or(&[], |s| &s.cycles);
        let sk = trace_with(x, fin_slice, inf_slice, cyc, square, opts);
        let conns = find_connections(x, &sk, opts);
        (sk, conns)
    } else {
        (SeparatrixSkeleton::default(), Vec::new())
    };

    let a = verdict_a(&finite, &infinite);
    let b = verdict_b(scan.as_ref(), opts.tol_cycle);
    let c = verdict_c(traced, &connections, opts.tol_connection);
    let d = verdict_d(traced, &skeleton, square);
    let hyperbolicity = if traced {
        fin_slice
            .iter()
            .chain(inf_slice.iter().map(|s| &s.singularity))
            .map(|s| {
                let j = s.jacobian;
                let fro = (j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2)).sqrt();
                s.hyperbolicity_margin() / (1.0 + fro)
            })
            .reduce(f64::min)
    } else {
        None
    };
    let margins = Margins {
        hyperbolicity,
        polycycle: square.filter(|r| r.exists).and_then(|r| r.ratio).map(|r| (r - 1.0).abs()),
        cycles: scan.as_ref().and_then(|s| s.cycles.iter().map(|c| c.r_gamma.abs()).reduce(f64::min)),
        connection: connections.iter().filter_map(|c| c.mismatch).reduce(f64::min),
    };
    let count_label = |l: LimitLabel| skeleton.separatrices.iter().filter(|s| s.label == l).count();
    let evidence = Evidence {
        finite_singularities: fin_slice.len(),
        infinite_singularities: inf_slice.len(),
        non_hyperbolic: fin_slice
            .iter()
            .chain(inf_slice.iter().map(|s| &s.singularity))
            .filter(|s| !s.kind.is_hyperbolic())
            .count(),
        cycles: scan.as_ref().map_or(0, |s| s.cycles.len()),
        min_abs_r_gamma: margins.cycles,
        scan_gaps: scan.as_ref().map_or(0, |s| s.gaps()),
        separatrices: skeleton.separatrices.len(),
        connection_candidates: connections.len(),
        min_mismatch: margins.connection,
        unresolved_labels: count_label(LimitLabel::Unresolved),
        infinity_polycycle_labels: count_label(LimitLabel::PolycycleInLambda { square: false }),
        square_ratio: square.filter(|r| r.exists).and_then(|r| r.ratio),
    };
    let overall = overall_of([&a, &b, &c, &d]);
    let certificate = StabilityCertificate {
        a_prime: a,
        b_prime: b,
        c,
        d_prime: d,
        overall,
        margins,
        evidence,
        tolerances: CertTolerances {
            hyperbolic: opts.tol_hyperbolic,
            generic: opts.tol_generic,
            cycle: opts.tol_cycle,
            connection: opts.tol_connection,
            converge: opts.tol_converge,
        },
        resolutions: Resolutions {
            scan_samples: opts.scan.samples,
            scan_t_max: opts.scan.t_max,
            max_section: opts.scan.max_section,
            trace_t_max: opts.trace_t_max,
            delta0: opts.delta0,
            rect: opts.rect,
        },
    };
    Analysis {
        index_sum: index_sum(fin_slice, inf_slice).ok().filter(|_| traced),
        finite_error: finite.as_ref().err().map(|e| e.to_string()),
        finite: finite.unwrap_or_default(),
        infinite_error: infinite.as_ref().err().cloned(),
        infinite: infinite.unwrap_or_default(),
        polycycle_error: polycycle.as_ref().err().map(|e| e.to_string()),
        polycycle: polycycle.ok(),
        cycles: scan.unwrap_or_default(),
        skeleton,
        connections,
        certificate,
    }
}

pub fn check_membership(x: &EssField, opts: &CertifyOptions) -> StabilityCertificate {
    analyze(x, opts).certificate
}

// ---------------------------------------------------------------------------
// Density experiment

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub d: u32,
    pub samples: usize,
    pub seed: u64,
    pub radius: f64,
    pub certify: CertifyOptions,
    /// Perturbations per eligible sample in the openness probe; zero
    /// disables the probe.
    pub probes: usize,
    pub probe_radius: f64,
    /// Margin factor over the tolerances required for the probe.
    pub probe_margin: f64,
}

impl DensityOptions {
    pub fn new(d: u32, samples: usize, seed: u64, radius: f64) -> Self {
        DensityOptions {
            d,
            samples,
            seed,
            radius,
            certify: CertifyOptions::default(),
            probes: 20,
            probe_radius: 1e-4,
            probe_margin: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

impl VerdictCounts {
    fn add(&mut self, v: &Verdict) {
        match v {
            Verdict::Pass => self.pass += 1,
            Verdict::Fail(_) => self.fail += 1,
            Verdict::Inconclusive(_) => self.inconclusive += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub a_prime: VerdictCounts,
    pub b_prime: VerdictCounts,
    pub c: VerdictCounts,
    pub d_prime: VerdictCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub coefficients: Vec<f64>,
    pub overall: Overall,
    pub verdicts: [String; 4],
    pub cycles: usize,
    /// A non-hyperbolic singular point was detected or `|r(Ω) - 1| < 1e-6`.
    pub non_generic: bool,
    pub probe_eligible: bool,
    /// Outcome of the openness probe when it ran.
    pub probe_held: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub d: u32,
    pub samples: usize,
    pub seed: u64,
    pub radius: f64,
    pub distribution: String,
    pub in_pd: usize,
    pub not_in_pd: usize,
    pub inconclusive: usize,
    pub fraction_in_pd: f64,
    pub fraction_not_in_pd: f64,
    pub fraction_inconclusive: f64,
    pub conditions: ConditionCounts,
    pub non_generic: usize,
    pub max_cycles: usize,
    pub probe_eligible: usize,
    pub probe_held: usize,
    pub probe_failures: Vec<usize>,
    pub probes_per_sample: usize,
    pub probe_radius: f64,
    pub records: Vec<SampleRecord>,
}

fn unit_gaussian(rng: &mut ChaCha20Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

fn is_non_generic(a: &Analysis) -> bool {
    let bad_point = a.finite.iter().any(|s| !s.kind.is_hyperbolic())
        || a.infinite.iter().any(|s| !s.singularity.kind.is_hyperbolic())
        || a.finite_error.as_deref().is_some_and(|e| e.contains("not isolated"))
        || a.infinite_error.is_some();
    let bad_ratio = a
        .polycycle
        .as_ref()
        .filter(|r| r.exists)
        .and_then(|r| r.ratio)
        .is_some_and(|r| (r - 1.0).abs() < 1e-6);
    bad_point || bad_ratio
}

fn run_sample(i: usize, o: &DensityOptions) -> SampleRecord {
    let m = 2 * monomial_count(o.d);
    let mut rng = ChaCha20Rng::seed_from_u64(o.seed);
    rng.set_stream(i as u64);
    let dir = unit_gaussian(&mut rng, m);
    let rad = o.radius * rng.random::<f64>().powf(1.0 / m as f64);
    let coeffs: Vec<f64> = dir.iter().map(|a| a * rad).collect();
    let probe_seed: u64 = rng.random();
    let x = EssField::from_coefficient_vector(o.d, &coeffs).expect("length matches");
    let a = analyze(&x, &o.certify);
    let cert = &a.certificate;
    let eligible = o.probes > 0 && cert.overall == Overall::InPd && cert.margins.exceed(&o.certify, o.probe_margin);
    let probe_held = eligible.then(|| {
        (0..o.probes).all(|k| {
            let mut r = ChaCha20Rng::seed_from_u64(probe_seed);
            r.set_stream(k as u64);
            let e = unit_gaussian(&mut r, m);
            let v: Vec<f64> = coeffs.iter().zip(&e).map(|(c, d)| c + o.probe_radius * d).collect();
            let y = EssField::from_coefficient_vector(o.d, &v).expect("length matches");
            let ok = check_membership(&y, &o.certify).overall == Overall::InPd;
            if !ok {
                log::warn!("openness probe {k} of sample {i} left the class");
            }
            ok
        })
    });
    let tag = |v: &Verdict| match v {
        Verdict::Pass => "Pass".to_string(),
        Verdict::Fail(r) => format!("Fail: {r}"),
        Verdict::Inconclusive(r) => format!("Inconclusive: {r}"),
    };
    SampleRecord {
        index: i,
        coefficients: coeffs,
        overall: cert.overall,
        verdicts: [tag(&cert.a_prime), tag(&cert.b_prime), tag(&cert.c), tag(&cert.d_prime)],
        cycles: a.cycles.cycles.len(),
        non_generic: is_non_generic(&a),
        probe_eligible: eligible,
        probe_held,
    }
}

/// Samples fields uniformly in the coefficient ball and certifies each.
/// Deterministic for a given seed, independent of the thread count.
pub fn density_experiment(o: &DensityOptions) -> Result<DensityStats, String> {
    if o.samples == 0 {
        return Err("the number of samples must be at least 1".into());
    }
    let records: Vec<SampleRecord> = (0..o.samples).into_par_iter().map(|i| run_sample(i, o)).collect();
    let mut conditions = ConditionCounts::default();
    let count = |ov: Overall| records.iter().filter(|r| r.overall == ov).count();
    for r in &records {
        let parse = |s: &str| {
            if s == "Pass" {
                Verdict::Pass
            } else if s.starts_with("Fail") {
                Verdict::Fail(String::new())
            } else {
                Verdict::Inconclusive(String::new())
            }
        };
        conditions.a_prime.add(&parse(&r.verdicts[0]));
        conditions.b_prime.add(&parse(&r.verdicts[1]));
        conditions.c.add(&parse(&r.verdicts[2]));
        conditions.d_prime.add(&parse(&r.verdicts[3]));
    }
    let n = o.samples as f64;
    let (in_pd, not_in_pd, inconclusive) = (count(Overall::InPd), count(Overall::NotInPd), count(Overall::Inconclusive));
    Ok(DensityStats {
        d: o.d,
        samples: o.samples,
        seed: o.seed,
        radius: o.radius,
        distribution: "uniform on the coefficient ball".into(),
        in_pd,
        not_in_pd,
        inconclusive,
        fraction_in_pd: in_pd as f64 / n,
        fraction_not_in_pd: not_in_pd as f64 / n,
        fraction_inconclusive: inconclusive as f64 / n,
        conditions,
        non_generic: records.iter().filter(|r| r.non_generic).count(),
        max_cycles: records.iter().map(|r| r.cycles).max().unwrap_or(0),
        probe_eligible: records.iter().filter(|r| r.probe_eligible).count(),
        probe_held: records.iter().filter(|r| r.probe_held == Some(true)).count(),
        probe_failures: records.iter().filter(|r| r.probe_held == Some(false)).map(|r| r.index).collect(),
        probes_per_sample: o.probes,
        probe_radius: o.probe_radius,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_field;
    use crate::singular::Kind;

    #[test]
    fn sphere_field_matches_plane_direction() {
        let x = build_field(
            Poly2::from_coeffs(&[(0, 0, 0.3), (1, 0, -1.0), (0, 1, 0.7)]),
            Poly2::from_coeffs(&[(0, 0, -0.4), (1, 0, 0.9), (0, 1, 0.2)]),
            1,
        )
        .unwrap();
        let sf = SphereField::new(&x);
        for &p in &[[0.3, 0.4], [-2.0, 1.5], [4.0, -3.0]] {
            let y = to_sphere(p);
            let v = sf.vector(&y);
            assert!(dot3(v, y).abs() < 1e-14);
            // Push the planar vector forward by finite differences.
            let (a, b) = x.eval(p[0], p[1]);
            let h = 1e-7;
            let y2 = to_sphere([p[0] + h * a, p[1] + h * b]);
            let w = [(y2[0] - y[0]) / h, (y2[1] - y[1]) / h, (y2[2] - y[2]) / h];
            let cos = dot3(v, w) / (norm3(v) * norm3(w));
            assert!((cos - 1.0).abs() < 1e-6, "{cos}");
        }
    }

    #[test]
    fn chart_points_on_equator() {
        let y = chart_point(Chart::V1, 0.5, 0.0);
        assert!((norm3(y) - 1.0).abs() < 1e-15 && y[0] < 0.0 && y[2] == 0.0);
        let t = chart_tangent(Chart::U1, 0.2, [0.0, 1.0]);
        assert!(t[2] > 0.0);
        let t = chart_tangent(Chart::V1, 0.2, [0.0, 1.0]);
        assert!(t[2] < 0.0);
    }

    #[test]
    fn matching_pennies_certificate() {
        let x = EssField::matching_pennies();
        let a = analyze(&x, &CertifyOptions::default());
        let c = &a.certificate;
        assert_eq!(c.overall, Overall::NotInPd);
        assert!(c.a_prime.is_fail());
        assert!(c.d_prime.is_fail());
        // On-Λ separatrices of the corner saddles end at neighbouring corners.
        let corner_ids: Vec<usize> = a
            .finite
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == Kind::HyperbolicSaddle && s.on_lambda)
            .map(|(i, _)| i)
            .collect();
        for s in a.skeleton.separatrices.iter().filter(|s| s.on_lambda) {
            let Location::Finite { x: px, y: py } = a.skeleton.saddles[s.saddle].location else { continue };
            if !((px == 0.0 || px == 1.0) && (py == 0.0 || py == 1.0)) {
                continue;
            }
            let inward = to_plane(s.points[1]).is_some_and(|p| (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
            if !inward {
                assert!(matches!(s.label, LimitLabel::Infinity { .. }), "{:?}", s.label);
                continue;
            }
            match s.label {
                LimitLabel::Singularity { id } => assert!(corner_ids.contains(&id)),
                other => panic!("corner separatrix labelled {other:?}"),
            }
        }
    }

    #[test]
    fn constant_field_certificate() {
        let x = build_field(Poly2::constant(1.0), Poly2::constant(1.0), 0).unwrap();
        let a = analyze(&x, &CertifyOptions::default());
        assert!(a.skeleton.separatrices.iter().all(|s| s.label != LimitLabel::Unresolved));
        assert_eq!(a.certificate.overall, Overall::InPd, "{:#?}", a.certificate);
    }

    #[test]
    fn midline_connection_fails_c() {
        let f = Poly2::from_coeffs(&[(2, 0, 1.0), (1, 0, -1.0), (0, 0, 2.0 / 9.0)]);
        let g = Poly2::from_coeffs(&[(0, 1, 1.0), (1, 1, -2.0), (0, 0, -0.5), (1, 0, 1.0)]);
        let x = build_field(f, g, 2).unwrap();
        let a = analyze(&x, &CertifyOptions::default());
        assert!(a.certificate.c.is_fail(), "{:?}", a.certificate.c);
    }

    #[test]
    fn density_rejects_zero_samples() {
        assert!(density_experiment(&DensityOptions::new(1, 0, 1, 1.0)).is_err());
    }
}
