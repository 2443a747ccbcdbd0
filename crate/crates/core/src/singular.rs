//! Finite singular points: location, linear classification and indices.

use crate::compactify::{Chart, InfinitySingularity};
use crate::model::EssField;
use crate::poly::{binom, Axis, Dense2, Poly2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative hyperbolicity threshold.
pub const TOL_HYPERBOLIC: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SingularError {
    #[error("subdivision floor reached without resolving box [{x0}, {x1}] x [{y0}, {y1}] ({frame})")]
    UnresolvedBox {
        frame: &'static str,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    },
    #[error("point is not a singularity (residual {residual:e})")]
    NotASingularity { residual: f64 },
    #[error("index undetermined for a {0:?} point")]
    IndexUndetermined(Kind),
    #[error("singular points are not isolated ({0})")]
    NonIsolated(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    HyperbolicSaddle,
    HyperbolicNode,
    HyperbolicFocus,
    SemiHyperbolic,
    DegenerateMonodromic,
    NonSimple,
}

impl Kind {
    pub fn is_hyperbolic(self) -> bool {
        matches!(self, Kind::HyperbolicSaddle | Kind::HyperbolicNode | Kind::HyperbolicFocus)
    }

    pub fn is_saddle(self) -> bool {
        self == Kind::HyperbolicSaddle
    }

    /// Hyperbolic node or focus.
    pub fn is_antisaddle(self) -> bool {
        matches!(self, Kind::HyperbolicNode | Kind::HyperbolicFocus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Location {
    Finite { x: f64, y: f64 },
    Infinity { chart: Chart, u: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub location: Location,
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [Eigenvalue; 2],
    pub kind: Kind,
    pub stability: Stability,
    /// `None` when the index is not determined by the linear part.
    pub index: Option<i32>,
    pub on_lambda: bool,
    /// Scaled residual of the defining equations at the reported point.
    pub residual: f64,
}

impl Singularity {
    pub fn finite_xy(&self) -> Option<(f64, f64)> {
        match self.location {
            Location::Finite { x, y } => Some((x, y)),
            Location::Infinity { .. } => None,
        }
    }

    /// Smallest `|Re λ|` over the eigenvalues.
    pub fn hyperbolicity_margin(&self) -> f64 {
        self.eigenvalues[0].re.abs().min(self.eigenvalues[1].re.abs())
    }

    /// Real eigenvector for eigenvalue `lambda` of the stored Jacobian.
    pub fn eigenvector(&self, lambda: f64) -> [f64; 2] {
        eigenvector(self.jacobian, lambda)
    }
}

pub fn eigenvector(j: [[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    let [[a, b], [c, d]] = j;
    // Rows of (J - λI); take the null vector of the better-conditioned row.
    let r1 = [a - lambda, b];
    let r2 = [c, d - lambda];
    let n1 = r1[0].hypot(r1[1]);
    let n2 = r2[0].hypot(r2[1]);
    let v = if n1 >= n2 && n1 > 0.0 {
        [-r1[1], r1[0]]
    } else if n2 > 0.0 {
        [-r2[1], r2[0]]
    } else {
        [1.0, 0.0]
    };
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

pub fn eigenvalues(j: [[f64; 2]; 2]) -> [Eigenvalue; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    // Triangular matrices give exact eigenvalues.
    if j[0][1] == 0.0 || j[1][0] == 0.0 {
        let (a, b) = (j[0][0], j[1][1]);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        return [Eigenvalue { re: lo, im: 0.0 }, Eigenvalue { re: hi, im: 0.0 }];
    }
    let half = 0.5 * (j[0][0] - j[1][1]);
    let disc = half * half + j[0][1] * j[1][0];
    if disc >= 0.0 {
        let s = disc.sqrt();
        let m = 0.5 * tr;
        // Avoid cancellation: compute the larger-magnitude root first.
        let big = if m >= 0.0 { m + s } else { m - s };
        let small = if big != 0.0 { det / big } else { m - s };
        let (lo, hi) = if small <= big { (small, big) } else { (big, small) };
        [Eigenvalue { re: lo, im: 0.0 }, Eigenvalue { re: hi, im: 0.0 }]
    } else {
        let s = (-disc).sqrt();
        [Eigenvalue { re: 0.5 * tr, im: -s }, Eigenvalue { re: 0.5 * tr, im: s }]
    }
}

fn frob(j: [[f64; 2]; 2]) -> f64 {
    (j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2)).sqrt()
}

/// Linear classification of a singular point with Jacobian `j`.
///
/// A point is hyperbolic when every `|Re λ|` exceeds `tol_rel * (1 + |J|)`.
/// The returned record has a placeholder finite location at the origin.
pub fn classify_jacobian(j: [[f64; 2]; 2], tol_rel: f64) -> Singularity {
    let ev = eigenvalues(j);
    let tol = tol_rel * (1.0 + frob(j));
    let complex = ev[0].im != 0.0;
    let (kind, stability) = if complex {
        if ev[0].re.abs() > tol {
            let st = if ev[0].re < 0.0 { Stability::Stable } else { Stability::Unstable };
            (Kind::HyperbolicFocus, st)
        } else {
            (Kind::DegenerateMonodromic, Stability::Undetermined)
        }
    } else {
        let zeros = ev.iter().filter(|e| e.re.abs() <= tol).count();
        match zeros {
            2 => (Kind::NonSimple, Stability::Undetermined),
            1 => (Kind::SemiHyperbolic, Stability::Undetermined),
            _ if ev[0].re * ev[1].re < 0.0 => (Kind::HyperbolicSaddle, Stability::Saddle),
            _ if ev[0].re < 0.0 => (Kind::HyperbolicNode, Stability::Stable),
            _ => (Kind::HyperbolicNode, Stability::Unstable),
        }
    };
    Singularity {
        location: Location::Finite { x: 0.0, y: 0.0 },
        jacobian: j,
        eigenvalues: ev,
        kind,
        stability,
        index: poincare_index(kind).ok(),
        on_lambda: false,
        residual: 0.0,
    }
}

/// Index `(e - h)/2 + 1` from the elliptic and hyperbolic sector counts.
pub fn poincare_index(kind: Kind) -> Result<i32, SingularError> {
    let (e, h) = match kind {
        Kind::HyperbolicSaddle => (0, 4),
        Kind::HyperbolicNode | Kind::HyperbolicFocus | Kind::DegenerateMonodromic => (0, 0),
        k => return Err(SingularError::IndexUndetermined(k)),
    };
    Ok((e - h) / 2 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corner {
    C00,
    C10,
    C11,
    C01,
}

impl Corner {
    /// Counterclockwise order around the unit square.
    pub const ALL: [Corner; 4] = [Corner::C00, Corner::C10, Corner::C11, Corner::C01];

    pub fn xy(self) -> (f64, f64) {
        match self {
            Corner::C00 => (0.0, 0.0),
            Corner::C10 => (1.0, 0.0),
            Corner::C11 => (1.0, 1.0),
            Corner::C01 => (0.0, 1.0),
        }
    }
}

/// Closed-form diagonal Jacobian at a corner of the unit square.
pub fn corner_jacobian(x: &EssField, c: Corner) -> [[f64; 2]; 2] {
    let (a, b) = c.xy();
    let (f, g) = (x.f().eval(a, b), x.g().eval(a, b));
    let (df, dg) = match c {
        Corner::C00 => (-f, -g),
        Corner::C10 => (f, -g),
        Corner::C11 => (f, g),
        Corner::C01 => (-f, g),
    };
    [[df, 0.0], [0.0, dg]]
}

/// Classifies the point `(px, py)`, which must be a singularity.
pub fn classify(x: &EssField, px: f64, py: f64, tol_rel: f64) -> Result<Singularity, SingularError> {
    let ev = x.evaluator();
    let [p, q] = ev.vector(px, py);
    let scale = 1.0 + magnitude(x.p(), px, py).max(magnitude(x.q(), px, py));
    let residual = p.abs().max(q.abs()) / scale;
    if residual > 1e-9 {
        return Err(SingularError::NotASingularity { residual });
    }
    let mut j = ev.jacobian(px, py);
    // Exact structural zeros on the invariant lines.
    if px == 0.0 || px == 1.0 {
        j[0][1] = 0.0;
    }
    if py == 0.0 || py == 1.0 {
        j[1][0] = 0.0;
    }
    let s = classify_jacobian(j, tol_rel);
    Ok(Singularity {
        location: Location::Finite { x: px, y: py },
        on_lambda: px == 0.0 || px == 1.0 || py == 0.0 || py == 1.0,
        residual,
        ..s
    })
}

/// `sum |c| |x|^i |y|^j`, the natural scale for rounding in `p(x, y)`.
fn magnitude(p: &Poly2, x: f64, y: f64) -> f64 {
    p.terms()
        .iter()
        .map(|t| t.c.abs() * x.abs().powi(t.i as i32) * y.abs().powi(t.j as i32))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Default for Rect {
    fn default() -> Self {
        Rect {
            x0: -10.0,
            x1: 11.0,
            y0: -10.0,
            y1: 11.0,
        }
    }
}

/// Power-basis tensor to Bernstein coefficients on the unit square.
fn bernstein(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len() - 1;
    let n = a[0].len() - 1;
    let mut b = vec![vec![0.0; n + 1]; m + 1];
    for k in 0..=m {
        for l in 0..=n {
            let mut s = 0.0;
            for i in 0..=k {
                let ci = binom(k, i) / binom(m, i);
                for j in 0..=l {
                    s += ci * binom(l, j) / binom(n, j) * a[i][j];
                }
            }
            b[k][l] = s;
        }
    }
    b
}

/// True when the Bernstein coefficients of `p` on the box prove it has no
/// zero there.
fn excludes(p: &Poly2, r: &Rect) -> bool {
    let t = p.affine_tensor(r.x0, r.x1 - r.x0, r.y0, r.y1 - r.y0);
    let b = bernstein(&t);
    let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let margin = 1e-13 * scale;
    let all_pos = b.iter().flatten().all(|&v| v > margin);
    let all_neg = b.iter().flatten().all(|&v| v < -margin);
    all_pos || all_neg
}

/// Range enclosure of `p` over the box from its Bernstein coefficients.
fn range(p: &Poly2, r: &Rect) -> (f64, f64) {
    let t = p.affine_tensor(r.x0, r.x1 - r.x0, r.y0, r.y1 - r.y0);
    let b = bernstein(&t);
    let (lo, hi) = b.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let pad = 1e-13 * lo.abs().max(hi.abs());
    (lo - pad, hi + pad)
}

/// Krawczyk test: true when the box provably holds no common zero of
/// `f` and `g`.
fn krawczyk_excludes(f: &Poly2, g: &Poly2, jac: &[Poly2; 4], sys: &NewtonSystem, r: &Rect) -> bool {
    let c = [0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1)];
    let h = [0.5 * (r.x1 - r.x0), 0.5 * (r.y1 - r.y0)];
    let (a, b, cc, d) = (sys.fx.eval(c[0], c[1]), sys.fy.eval(c[0], c[1]), sys.gx.eval(c[0], c[1]), sys.gy.eval(c[0], c[1]));
    let det = a * d - b * cc;
    if det == 0.0 || !det.is_finite() {
        return false;
    }
    let y = [[d / det, -b / det], [-cc / det, a / det]];
    let fc = [f.eval(c[0], c[1]), g.eval(c[0], c[1])];
    let jr: Vec<(f64, f64)> = jac.iter().map(|p| range(p, r)).collect();
    let jx = [[jr[0], jr[1]], [jr[2], jr[3]]];
    for i in 0..2 {
        let k = c[i] - (y[i][0] * fc[0] + y[i][1] * fc[1]);
        let mut rad = 0.0;
        for (kk, hk) in h.iter().enumerate() {
            // Entry of I - Y J(X) as an interval.
            let mut lo = if i == kk { 1.0 } else { 0.0 };
            let mut hi = lo;
            for j in 0..2 {
                let (l, u) = jx[j][kk];
                let (p, q) = (-y[i][j] * l, -y[i][j] * u);
                lo += p.min(q);
                hi += p.max(q);
            }
            rad += lo.abs().max(hi.abs()) * hk;
        }
        let slack = 1e-12 * (1.0 + c[i].abs()) + 1e-9 * rad;
        let (lo, hi) = if i == 0 { (r.x0, r.x1) } else { (r.y0, r.y1) };
        if k + rad + slack < lo || k - rad - slack > hi {
            return true;
        }
    }
    false
}

struct NewtonSystem {
    f: Dense2,
    fx: Dense2,
    fy: Dense2,
    g: Dense2,
    gx: Dense2,
    gy: Dense2,
}

impl NewtonSystem {
    fn new(f: &Poly2, g: &Poly2) -> Self {
        NewtonSystem {
            f: Dense2::new(f),
            fx: Dense2::new(&f.partial(Axis::X)),
            fy: Dense2::new(&f.partial(Axis::Y)),
            g: Dense2::new(g),
            gx: Dense2::new(&g.partial(Axis::X)),
            gy: Dense2::new(&g.partial(Axis::Y)),
        }
    }

    /// Damped Newton from `(x, y)`; `None` if it fails to converge.
    fn solve(&self, mut x: f64, mut y: f64, step_cap: f64) -> Option<(f64, f64)> {
        let norm = |a: f64, b: f64| a.abs().max(b.abs());
        let mut r = norm(self.f.eval(x, y), self.g.eval(x, y));
        for _ in 0..60 {
            let (a, b, c, d) = (self.fx.eval(x, y), self.fy.eval(x, y), self.gx.eval(x, y), self.gy.eval(x, y));
            let det = a * d - b * c;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let (fv, gv) = (self.f.eval(x, y), self.g.eval(x, y));
            let mut dx = (d * fv - b * gv) / det;
            let mut dy = (a * gv - c * fv) / det;
            let len = dx.hypot(dy);
            if len > step_cap {
                dx *= step_cap / len;
                dy *= step_cap / len;
            }
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let (nx, ny) = (x - lam * dx, y - lam * dy);
                let nr = norm(self.f.eval(nx, ny), self.g.eval(nx, ny));
                if nr < r || nr == 0.0 {
                    x = nx;
                    y = ny;
                    r = nr;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            let moved = lam * len;
            if !accepted || moved <= 1e-15 * (1.0 + x.abs().max(y.abs())) {
                return Some((x, y));
            }
        }
        Some((x, y))
    }
}

/// Region searched for common zeros of `f` and `g`.
#[derive(Clone, Copy)]
enum Frame {
    Plane,
    /// `x = 1/v`, `y = u/v` (or `x = u/v`, `y = 1/v` for the second chart).
    Chart1,
    Chart2,
}

impl Frame {
    fn name(self) -> &'static str {
        match self {
            Frame::Plane => "plane",
            Frame::Chart1 => "chart U1",
            Frame::Chart2 => "chart U2",
        }
    }

    fn to_plane(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            Frame::Plane => (a, b),
            Frame::Chart1 => (1.0 / b, a / b),
            Frame::Chart2 => (a / b, 1.0 / b),
        }
    }
}

/// `v^d p(1/v, u/v)` or `v^d p(u/v, 1/v)` as a polynomial in `(u, v)`.
fn chart_poly(p: &Poly2, d: u32, first: bool) -> Poly2 {
    Poly2::from_terms(p.terms().iter().map(|t| crate::poly::Term {
        i: if first { t.j } else { t.i },
        j: d - t.i - t.j,
        c: t.c,
    }))
}

struct Search<'a> {
    f: &'a Poly2,
    g: &'a Poly2,
    sys: NewtonSystem,
    jac: [Poly2; 4],
    frame: Frame,
    leaf: f64,
    floor: f64,
    roots: Vec<(f64, f64)>,
    pending: Vec<Rect>,
}

impl Search<'_> {
    fn run(&mut self, r: Rect) {
        let mut stack = vec![r];
        while let Some(b) = stack.pop() {
            if excludes(self.f, &b) || excludes(self.g, &b) {
                continue;
            }
            let w = (b.x1 - b.x0).max(b.y1 - b.y0);
            if w <= self.leaf && krawczyk_excludes(self.f, self.g, &self.jac, &self.sys, &b) {
                continue;
            }
            if w <= self.leaf {
                let (cx, cy) = (0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
                if let Some((x, y)) = self.sys.solve(cx, cy, 4.0 * w) {
                    let fv = self.f.eval(x, y).abs() / (1.0 + magnitude(self.f, x, y));
                    let gv = self.g.eval(x, y).abs() / (1.0 + magnitude(self.g, x, y));
                    let slack = 1e-9 * (1.0 + x.abs().max(y.abs()));
                    let inside = x >= b.x0 - slack && x <= b.x1 + slack && y >= b.y0 - slack && y <= b.y1 + slack;
                    if fv.max(gv) <= 1e-11 {
                        self.roots.push((x, y));
                        if inside {
                            continue;
                        }
                    }
                }
                if w <= self.floor {
                    self.pending.push(b);
                    continue;
                }
            }
            let (mx, my) = (0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
            let wx = b.x1 - b.x0;
            let wy = b.y1 - b.y0;
            if wx >= 0.5 * wy {
                if wy >= 0.5 * wx {
                    stack.push(Rect { x0: b.x0, x1: mx, y0: b.y0, y1: my });
                    stack.push(Rect { x0: mx, x1: b.x1, y0: b.y0, y1: my });
                    stack.push(Rect { x0: b.x0, x1: mx, y0: my, y1: b.y1 });
                    stack.push(Rect { x0: mx, x1: b.x1, y0: my, y1: b.y1 });
                } else {
                    stack.push(Rect { x0: b.x0, x1: mx, ..b });
                    stack.push(Rect { x0: mx, x1: b.x1, ..b });
                }
            } else {
                stack.push(Rect { y0: b.y0, y1: my, ..b });
                stack.push(Rect { y0: my, y1: b.y1, ..b });
            }
        }
    }

    /// Floor boxes are acceptable when they touch a located root (the
    /// Bernstein bound cannot exclude neighbours of a zero) or, in chart
    /// frames, the equator itself.
    fn unresolved(&self) -> Option<Rect> {
        self.pending.iter().copied().find(|b| {
            let w = (b.x1 - b.x0).max(b.y1 - b.y0);
            let near_root = self.roots.iter().any(|&(x, y)| {
                x >= b.x0 - 2.0 * w && x <= b.x1 + 2.0 * w && y >= b.y0 - 2.0 * w && y <= b.y1 + 2.0 * w
            });
            let at_equator = !matches!(self.frame, Frame::Plane) && b.y0 <= w && b.y1 >= -w;
            !near_root && !at_equator
        })
    }
}

fn common_zeros(f: &Poly2, g: &Poly2, frame: Frame, r: Rect) -> Result<Vec<(f64, f64)>, SingularError> {
    let size = (r.x1 - r.x0).max(r.y1 - r.y0);
    let mut s = Search {
        f,
        g,
        sys: NewtonSystem::new(f, g),
        jac: [f.partial(Axis::X), f.partial(Axis::Y), g.partial(Axis::X), g.partial(Axis::Y)],
        frame,
        leaf: size / 256.0,
        floor: size * 1e-7,
        roots: Vec::new(),
        pending: Vec::new(),
    };
    s.run(r);
    if let Some(b) = s.unresolved() {
        let ((x0, y0), (x1, y1)) = ((b.x0, b.y0), (b.x1, b.y1));
        return Err(SingularError::UnresolvedBox {
            frame: frame.name(),
            x0,
            x1,
            y0,
            y1,
        });
    }
    Ok(s.roots)
}

fn dedupe(points: &mut Vec<(f64, f64)>) {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in points.drain(..) {
        let close = out.iter().any(|q| {
            let s = 1.0 + p.0.abs().max(p.1.abs());
            (p.0 - q.0).abs() <= 1e-7 * s && (p.1 - q.1).abs() <= 1e-7 * s
        });
        if !close {
            out.push(p);
        }
    }
    *points = out;
}

/// All finite singular points: the four corners, the zeros of `g` on
/// `x = 0, 1` and of `f` on `y = 0, 1`, and the common zeros of `f` and
/// `g`. Common zeros are searched in `r` and in the two chart regions that
/// cover the rest of the plane (`|v| <= 0.1` around the equator).
pub fn find_finite_singularities(x: &EssField, r: Rect, tol_rel: f64) -> Result<Vec<Singularity>, SingularError> {
    let (f, g) = (x.f(), x.g());
    if f.is_zero() || g.is_zero() {
        return Err(SingularError::NonIsolated("a factor vanishes identically"));
    }
    let mut line_pts: Vec<(f64, f64)> = Corner::ALL.iter().map(|c| c.xy()).collect();
    for (k, (poly, fixed_x)) in [(g, true), (g, true), (f, false), (f, false)].into_iter().enumerate() {
        let c = if k % 2 == 0 { 0.0 } else { 1.0 };
        let p1 = if fixed_x { poly.restrict_x(c) } else { poly.restrict_y(c) };
        if p1.is_zero() {
            return Err(SingularError::NonIsolated("an invariant line is singular"));
        }
        for root in p1.all_real_roots() {
            let t = if (root.x - 0.0).abs() < 1e-12 {
                0.0
            } else if (root.x - 1.0).abs() < 1e-12 {
                1.0
            } else {
                root.x
            };
            line_pts.push(if fixed_x { (c, t) } else { (t, c) });
        }
    }
    dedupe(&mut line_pts);

    let mut off: Vec<(f64, f64)> = common_zeros(f, g, Frame::Plane, r)?;
    let d = x.d();
    let chart_box = Rect {
        x0: -1.0,
        x1: 1.0,
        y0: -0.1,
        y1: 0.1,
    };
    for (frame, first) in [(Frame::Chart1, true), (Frame::Chart2, false)] {
        let (cf, cg) = (chart_poly(f, d, first), chart_poly(g, d, first));
        for (u, v) in common_zeros(&cf, &cg, frame, chart_box)? {
            if v.abs() < 1e-12 {
                continue;
            }
            let (px, py) = frame.to_plane(u, v);
            // Skip points the plane search already covers.
            if px >= r.x0 && px <= r.x1 && py >= r.y0 && py <= r.y1 {
                continue;
            }
            let sys = NewtonSystem::new(f, g);
            let (px, py) = sys.solve(px, py, f64::INFINITY).unwrap_or((px, py));
            off.push((px, py));
        }
    }
    // Snap near-line points onto the lines they belong to.
    for p in off.iter_mut() {
        for c in [0.0, 1.0] {
            if (p.0 - c).abs() < 1e-10 {
                p.0 = c;
            }
            if (p.1 - c).abs() < 1e-10 {
                p.1 = c;
            }
        }
    }
    let mut all = line_pts;
    all.extend(off);
    dedupe(&mut all);
    let mut out = Vec::with_capacity(all.len());
    for (px, py) in all {
        out.push(classify(x, px, py, tol_rel)?);
    }
    Ok(out)
}

/// Sphere index sum `2 * (finite sum) + (equator sum)`, which must be 2.
pub fn index_sum(finite: &[Singularity], infinite: &[InfinitySingularity]) -> Result<i32, SingularError> {
    let mut s = 0;
    for p in finite {
        s += 2 * p.index.ok_or(SingularError::IndexUndetermined(p.kind))?;
    }
    for p in infinite {
        let q = &p.singularity;
        s += q.index.ok_or(SingularError::IndexUndetermined(q.kind))?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexCheck {
    pub passes: bool,
    pub sum: i32,
}

pub fn index_sum_check(x: &EssField, tol_rel: f64) -> Result<IndexCheck, crate::Error> {
    let fin = find_finite_singularities(x, Rect::default(), tol_rel)?;
    let inf = crate::compactify::infinity_singularities(x, tol_rel)?;
    let sum = index_sum(&fin, &inf)?;
    Ok(IndexCheck { passes: sum == 2, sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_field;

    #[test]
    fn matching_pennies_points() {
        let x = EssField::matching_pennies();
        let s = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC).unwrap();
        assert_eq!(s.len(), 5);
        let centre = s.iter().find(|p| p.finite_xy() == Some((0.5, 0.5))).unwrap();
        assert_eq!(centre.kind, Kind::DegenerateMonodromic);
        assert_eq!(centre.index, Some(1));
        let origin = s.iter().find(|p| p.finite_xy() == Some((0.0, 0.0))).unwrap();
        assert_eq!(origin.kind, Kind::HyperbolicSaddle);
        assert_eq!(origin.jacobian, [[1.0, 0.0], [0.0, -1.0]]);
    }

    #[test]
    fn line_singularity() {
        // g(0, y) = 1 - 2y, f nonzero on x = 0.
        let x = build_field(Poly2::constant(1.0), Poly2::from_coeffs(&[(0, 0, 1.0), (0, 1, -2.0)]), 1).unwrap();
        let s = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC).unwrap();
        assert!(s.iter().any(|p| p.finite_xy() == Some((0.0, 0.5))));
        assert!(s.iter().any(|p| p.finite_xy() == Some((1.0, 0.5))));
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn constant_field_has_only_corners() {
        let x = build_field(Poly2::constant(1.0), Poly2::constant(1.0), 0).unwrap();
        let s = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC).unwrap();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn unstable_node_corner() {
        let x = build_field(
            Poly2::from_coeffs(&[(1, 0, 1.0), (0, 0, -2.0)]),
            Poly2::from_coeffs(&[(0, 1, 1.0), (0, 0, -2.0)]),
            1,
        )
        .unwrap();
        let s = classify(&x, 0.0, 0.0, TOL_HYPERBOLIC).unwrap();
        assert_eq!(s.jacobian, [[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(s.kind, Kind::HyperbolicNode);
        assert_eq!(s.stability, Stability::Unstable);
        assert!(matches!(classify(&x, 0.3, 0.3, TOL_HYPERBOLIC), Err(SingularError::NotASingularity { .. })));
    }

    #[test]
    fn far_singularity_found_through_chart() {
        // f = x - 50, g = y - 30: common zero at (50, 30), outside the box.
        let x = build_field(
            Poly2::from_coeffs(&[(1, 0, 1.0), (0, 0, -50.0)]),
            Poly2::from_coeffs(&[(0, 1, 1.0), (0, 0, -30.0)]),
            1,
        )
        .unwrap();
        let s = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC).unwrap();
        let far = s.iter().filter_map(|p| p.finite_xy()).find(|&(a, b)| a > 20.0 && b > 20.0).unwrap();
        assert!((far.0 - 50.0).abs() < 1e-9 && (far.1 - 30.0).abs() < 1e-9);
    }

    #[test]
    fn index_values() {
        assert_eq!(poincare_index(Kind::HyperbolicSaddle).unwrap(), -1);
        assert_eq!(poincare_index(Kind::HyperbolicNode).unwrap(), 1);
        assert!(poincare_index(Kind::NonSimple).is_err());
    }

    #[test]
    fn constant_field_index_sum() {
        let x = build_field(Poly2::constant(1.0), Poly2::constant(1.0), 0).unwrap();
        let c = index_sum_check(&x, TOL_HYPERBOLIC).unwrap();
        assert!(c.passes, "sum {}", c.sum);
    }

    #[test]
    fn eigen_edge_cases() {
        let e = eigenvalues([[0.0, -0.5], [0.5, 0.0]]);
        assert_eq!(e[0].re, 0.0);
        assert_eq!(e[1].im, 0.5);
        let e = eigenvalues([[2.0, 1.0], [1.0, 2.0]]);
        assert!((e[0].re - 1.0).abs() < 1e-15 && (e[1].re - 3.0).abs() < 1e-15);
        let v = eigenvector([[2.0, 1.0], [1.0, 2.0]], 3.0);
        assert!((v[0] - v[1]).abs() < 1e-15);
    }
}
