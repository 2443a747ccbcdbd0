//! Poincaré compactification: chart fields, infinity polynomials and the
//! singular points on the equator.

use crate::model::EssField;
use crate::poly::{Axis, Poly1, Poly2, Term};
use crate::singular::{self, Location, Singularity};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chart {
    U1,
    U2,
    V1,
    V2,
}

impl Chart {
    /// The `U` chart this chart is antipodal to (or itself).
    pub fn base(self) -> Chart {
        match self {
            Chart::U1 | Chart::V1 => Chart::U1,
            Chart::U2 | Chart::V2 => Chart::U2,
        }
    }

    pub fn antipode(self) -> Chart {
        match self {
            Chart::U1 => Chart::V1,
            Chart::V1 => Chart::U1,
            Chart::U2 => Chart::V2,
            Chart::V2 => Chart::U2,
        }
    }

    pub fn is_v(self) -> bool {
        matches!(self, Chart::V1 | Chart::V2)
    }

    /// Unit direction on the equator of the point with chart coordinate `u`.
    pub fn equator_direction(self, u: f64) -> [f64; 3] {
        let (a, b) = match self.base() {
            Chart::U1 => (1.0, u),
            _ => (u, 1.0),
        };
        let s = if self.is_v() { -1.0 } else { 1.0 } / (a * a + b * b).sqrt();
        [s * a, s * b, 0.0]
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CompactifyError {
    #[error("the equator is filled with singular points")]
    NonIsolatedInfinity,
}

/// Polynomial vector field of one chart in coordinates `(u, v)`, stored as
/// `Poly2` in `(x, y) = (u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartField {
    pub chart: Chart,
    pub n: u32,
    pub du: Poly2,
    pub dv: Poly2,
}

impl ChartField {
    pub fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        (self.du.eval(u, v), self.dv.eval(u, v))
    }

    pub fn jacobian(&self, u: f64, v: f64) -> [[f64; 2]; 2] {
        [
            [self.du.partial(Axis::X).eval(u, v), self.du.partial(Axis::Y).eval(u, v)],
            [self.dv.partial(Axis::X).eval(u, v), self.dv.partial(Axis::Y).eval(u, v)],
        ]
    }
}

/// `v^n * R(1/v, u/v)` (first chart) or `v^n * R(u/v, 1/v)` (second chart)
/// as a polynomial in `(u, v)`.
fn chart_pullback(r: &Poly2, n: u32, first: bool) -> Poly2 {
    Poly2::from_terms(r.terms().iter().map(|t| {
        let k = t.i + t.j;
        Term {
            i: if first { t.j } else { t.i },
            j: n - k,
            c: t.c,
        }
    }))
}

pub fn chart_field(x: &EssField, chart: Chart) -> ChartField {
    let n = x.n();
    let first = chart.base() == Chart::U1;
    let pp = chart_pullback(x.p(), n, first);
    let qq = chart_pullback(x.q(), n, first);
    let u = Poly2::x();
    let v = Poly2::y();
    let (du, dv) = if first {
        (&qq - &(&u * &pp), -&(&v * &pp))
    } else {
        (&pp - &(&u * &qq), -&(&v * &qq))
    };
    let sign = if chart.is_v() && (n - 1) % 2 == 1 { -1.0 } else { 1.0 };
    ChartField {
        chart,
        n,
        du: du.scale(sign),
        dv: dv.scale(sign),
    }
}

/// `F(u) = u(u g_d(1,u) - f_d(1,u))` for `U1`, `G(u) = u(u f_d(u,1) - g_d(u,1))`
/// for `U2`. Returns `None` when the polynomial vanishes identically.
pub fn infinity_polynomial(x: &EssField, chart: Chart) -> Option<Poly1> {
    let d = x.d();
    let fd = x.f().homogeneous_part(d);
    let gd = x.g().homogeneous_part(d);
    let (a, b) = match chart.base() {
        Chart::U1 => (gd.restrict_x(1.0), fd.restrict_x(1.0)),
        _ => (fd.restrict_y(1.0), gd.restrict_y(1.0)),
    };
    let u = Poly1::new(vec![0.0, 1.0]);
    let poly = u.mul(&u.mul(&a).sub(&b));
    if poly.is_zero() {
        None
    } else {
        Some(poly)
    }
}

/// Second (transverse) eigenvalue `-f_d(1,u)` or `-g_d(u,1)` at an equator
/// point of a `U` chart.
fn transverse_eigenvalue(x: &EssField, chart: Chart, u: f64) -> f64 {
    let d = x.d();
    match chart.base() {
        Chart::U1 => -x.f().homogeneous_part(d).eval(1.0, u),
        _ => -x.g().homogeneous_part(d).eval(u, 1.0),
    }
}

/// One singular point on the equator, together with its analysis in the
/// chart where it was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinitySingularity {
    pub chart: Chart,
    pub u0: f64,
    /// Root of the infinity polynomial is simple.
    pub simple_root: bool,
    /// Equator point as a unit vector in the sphere's ambient space.
    pub direction: [f64; 3],
    pub singularity: Singularity,
}

fn analyze_point(x: &EssField, chart: Chart, u0: f64, simple: bool, tol_hyp: f64) -> InfinitySingularity {
    let cf = chart_field(x, chart);
    let mut j = cf.jacobian(u0, 0.0);
    // The chart field is exactly triangular on the equator.
    j[1][0] = 0.0;
    let sign = if chart.is_v() && (x.n() - 1) % 2 == 1 { -1.0 } else { 1.0 };
    j[1][1] = sign * transverse_eigenvalue(x, chart.base(), u0);
    let mut s = singular::classify_jacobian(j, tol_hyp);
    if !simple && s.kind.is_hyperbolic() {
        // A repeated root forces F'(u0) = 0 even if rounding says otherwise.
        s.kind = singular::Kind::SemiHyperbolic;
        s.stability = singular::Stability::Undetermined;
        s.index = None;
    }
    InfinitySingularity {
        chart,
        u0,
        simple_root: simple,
        direction: chart.equator_direction(u0),
        singularity: Singularity {
            location: Location::Infinity { chart, u: u0 },
            on_lambda: true,
            residual: 0.0,
            ..s
        },
    }
}

/// All singular points on the equator. Roots with `|u| <= 1` are taken in
/// `U1` and roots with `|u| < 1` in `U2`, so each equator point appears once
/// per hemisphere; every `U` point is paired with its antipode in `V`.
pub fn infinity_singularities(x: &EssField, tol_hyp: f64) -> Result<Vec<InfinitySingularity>, CompactifyError> {
    let f1 = infinity_polynomial(x, Chart::U1).ok_or(CompactifyError::NonIsolatedInfinity)?;
    let f2 = infinity_polynomial(x, Chart::U2).ok_or(CompactifyError::NonIsolatedInfinity)?;
    let mut out = Vec::new();
    for r in f1.real_roots(-1.0, 1.0) {
        for chart in [Chart::U1, Chart::V1] {
            out.push(analyze_point(x, chart, r.x, r.simple, tol_hyp));
        }
    }
    let lim = 1.0 - 1e-9;
    for r in f2.real_roots(-1.0, 1.0) {
        if r.x.abs() >= lim {
            continue;
        }
        for chart in [Chart::U2, Chart::V2] {
            out.push(analyze_point(x, chart, r.x, r.simple, tol_hyp));
        }
    }
    Ok(out)
}
