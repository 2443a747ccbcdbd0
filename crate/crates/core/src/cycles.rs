//! Limit cycles: return maps on transversal sections, annulus scans, the
//! divergence integral along closed orbits, and invariant algebraic curves.

use crate::model::{EssField, FieldEval};
use crate::ode::{Dopri5, OdeError, Tolerances};
use crate::poly::{Axis, Poly2};
use crate::singular::{Kind, Singularity};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cycles with `|r| <= TOL_CYCLE` are reported as non-hyperbolic suspects.
pub const TOL_CYCLE: f64 = 1e-5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CycleError {
    #[error("no return within the time cap {t_max}")]
    NoReturn { t_max: f64 },
    #[error("orbit left the domain at t = {t}")]
    LeftDomain { t: f64 },
    #[error("orbit converged to an equilibrium at t = {t}")]
    ConvergedToEquilibrium { t: f64 },
    #[error("field is tangent to the section at the start point")]
    Tangent,
    #[error("divergence integral {r_gamma} disagrees with return-map slope log {log_slope}")]
    QuadratureFailure { r_gamma: f64, log_slope: f64 },
    #[error("orbit does not close (gap {gap:e})")]
    NotClosed { gap: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// A planar vector field with its divergence.
pub trait Planar {
    fn vector(&self, p: [f64; 2]) -> [f64; 2];
    fn divergence(&self, p: [f64; 2]) -> f64;

    /// Jacobian; central differences unless overridden.
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6 * (1.0 + p[0].abs().max(p[1].abs()));
        let (a, b) = (self.vector([p[0] + h, p[1]]), self.vector([p[0] - h, p[1]]));
        let (c, d) = (self.vector([p[0], p[1] + h]), self.vector([p[0], p[1] - h]));
        [
            [(a[0] - b[0]) / (2.0 * h), (c[0] - d[0]) / (2.0 * h)],
            [(a[1] - b[1]) / (2.0 * h), (c[1] - d[1]) / (2.0 * h)],
        ]
    }
}

impl Planar for FieldEval {
    #[inline]
    fn vector(&self, p: [f64; 2]) -> [f64; 2] {
        FieldEval::vector(self, p[0], p[1])
    }
    #[inline]
    fn divergence(&self, p: [f64; 2]) -> f64 {
        FieldEval::divergence(self, p[0], p[1])
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        FieldEval::jacobian(self, p[0], p[1])
    }
}

/// Adapter for closures.
pub struct FnField<V, D>(pub V, pub D);

impl<V, D> Planar for FnField<V, D>
where
    V: Fn([f64; 2]) -> [f64; 2],
    D: Fn([f64; 2]) -> f64,
{
    fn vector(&self, p: [f64; 2]) -> [f64; 2] {
        (self.0)(p)
    }
    fn divergence(&self, p: [f64; 2]) -> f64 {
        (self.1)(p)
    }
}

/// Time reversal of a planar field.
pub struct Reversed<'a, F: Planar>(pub &'a F);

impl<F: Planar> Planar for Reversed<'_, F> {
    fn vector(&self, p: [f64; 2]) -> [f64; 2] {
        let v = self.0.vector(p);
        [-v[0], -v[1]]
    }
    fn divergence(&self, p: [f64; 2]) -> f64 {
        -self.0.divergence(p)
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let j = self.0.jacobian(p);
        [[-j[0][0], -j[0][1]], [-j[1][0], -j[1][1]]]
    }
}

/// Segment `base + s * dir` for `s` in `[-half_length, half_length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub base: [f64; 2],
    pub dir: [f64; 2],
    pub half_length: f64,
}

impl Section {
    pub fn new(base: [f64; 2], dir: [f64; 2], half_length: f64) -> Self {
        let n = dir[0].hypot(dir[1]);
        Section {
            base,
            dir: [dir[0] / n, dir[1] / n],
            half_length,
        }
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        [self.base[0] + s * self.dir[0], self.base[1] + s * self.dir[1]]
    }

    /// Signed distance of `p` from the section's line.
    pub fn sigma(&self, p: &[f64]) -> f64 {
        self.dir[0] * (p[1] - self.base[1]) - self.dir[1] * (p[0] - self.base[0])
    }

    pub fn coordinate(&self, p: &[f64]) -> f64 {
        self.dir[0] * (p[0] - self.base[0]) + self.dir[1] * (p[1] - self.base[1])
    }

    /// Smallest `|normal component| / |field|` over `n` points in `[lo, hi]`.
    pub fn transversality<F: Planar>(&self, field: &F, lo: f64, hi: f64, n: usize) -> f64 {
        (0..n)
            .map(|k| {
                let s = lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
                let v = field.vector(self.point(s));
                let c = self.dir[0] * v[1] - self.dir[1] * v[0];
                c.abs() / v[0].hypot(v[1]).max(1e-300)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_transversal<F: Planar>(&self, field: &F) -> bool {
        self.transversality(field, -self.half_length, self.half_length, 32) > 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnOptions {
    pub t_max: f64,
    /// Orbits with `max(|x|, |y|)` beyond this leave the domain.
    pub bound: f64,
    /// Speeds below this count as convergence to an equilibrium.
    pub rest_speed: f64,
    pub tol: Tolerances,
}

impl Default for ReturnOptions {
    fn default() -> Self {
        ReturnOptions {
            t_max: 1e4,
            bound: 1e3,
            rest_speed: 1e-10,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnHit {
    pub s: f64,
    pub time: f64,
    pub point: [f64; 2],
}

/// First return to the section, crossing in the same sense as the flow
/// leaves it at `s`.
pub fn return_map<F: Planar>(field: &F, sec: &Section, s: f64, opts: &ReturnOptions) -> Result<ReturnHit, CycleError> {
    let p0 = sec.point(s);
    let v0 = field.vector(p0);
    let sense = (sec.dir[0] * v0[1] - sec.dir[1] * v0[0]).signum();
    if sense == 0.0 || v0[0].hypot(v0[1]) == 0.0 {
        return Err(CycleError::Tangent);
    }
    let mut st = Dopri5::new(|_, y: &[f64; 2]| field.vector(*y), 0.0, p0, 1.0, opts.tol);
    let mut sig_prev = 0.0;
    let mut rest_since = None;
    while st.t() < opts.t_max {
        st.step(opts.t_max).map_err(|e| match e {
            OdeError::NonFinite { t } | OdeError::StepSizeUnderflow { t } => CycleError::LeftDomain { t },
            other => CycleError::Ode(other),
        })?;
        let p = *st.y();
        if p[0].abs().max(p[1].abs()) > opts.bound {
            return Err(CycleError::LeftDomain { t: st.t() });
        }
        let sig = sec.sigma(&p);
        if sig_prev * sense < 0.0 && sig * sense >= 0.0 {
            let (t, q) = st.locate_event(|y| sec.sigma(y), 1e-13 * (1.0 + st.t()));
            let sq = sec.coordinate(&q);
            if sq.abs() <= sec.half_length {
                return Ok(ReturnHit { s: sq, time: t, point: q });
            }
        }
        sig_prev = sig;
        let d = st.dy();
        if d[0].hypot(d[1]) < opts.rest_speed {
            // Require the orbit to stay at rest briefly to avoid slow passages.
            let (since, _) = *rest_since.get_or_insert((st.t(), p));
            if st.t() - since > 10.0 {
                return Err(CycleError::ConvergedToEquilibrium { t: st.t() });
            }
        } else {
            // Step-size jitter near a stiff node keeps the speed above the
            // threshold; fall back on position drift.
            let (since, anchor) = *rest_since.get_or_insert((st.t(), p));
            let drift = (p[0] - anchor[0]).hypot(p[1] - anchor[1]);
            if drift > 10.0 * opts.rest_speed * (1.0 + p[0].abs().max(p[1].abs())) {
                rest_since = Some((st.t(), p));
            } else if st.t() - since > 10.0 {
                return Err(CycleError::ConvergedToEquilibrium { t: st.t() });
            }
        }
    }
    Err(CycleError::NoReturn { t_max: opts.t_max })
}

/// Displacement `return_map(s) - s`.
pub fn displacement<F: Planar>(field: &F, sec: &Section, s: f64, opts: &ReturnOptions) -> Result<f64, CycleError> {
    Ok(return_map(field, sec, s, opts)?.s - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleVerdict {
    HyperbolicStable,
    HyperbolicUnstable,
    NonHyperbolicSuspect,
}

pub fn verdict_for(r_gamma: f64) -> CycleVerdict {
    if r_gamma.abs() <= TOL_CYCLE {
        CycleVerdict::NonHyperbolicSuspect
    } else if r_gamma < 0.0 {
        CycleVerdict::HyperbolicStable
    } else {
        CycleVerdict::HyperbolicUnstable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeMethod {
    /// Richardson-extrapolated central differences of the return map.
    FiniteDifference,
    /// Monodromy of the variational equation, used when differences of
    /// the return map drown in integration error.
    Variational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleRecord {
    pub points: Vec<[f64; 2]>,
    pub period: f64,
    pub section: Section,
    pub s_star: f64,
    /// Divergence integral over one period.
    pub r_gamma: f64,
    /// Slope of the return map at `s_star`.
    pub slope: f64,
    pub slope_method: SlopeMethod,
    pub verdict: CycleVerdict,
    pub closure_gap: f64,
    pub scan_samples: usize,
    pub t_max: f64,
}

/// Integrates one period from `p` with the divergence carried as a third
/// state component. Returns `(final point, integral, samples)`.
pub fn orbit_with_divergence<F: Planar>(
    field: &F,
    p: [f64; 2],
    period: f64,
    tol: Tolerances,
) -> Result<([f64; 2], f64, Vec<[f64; 2]>), CycleError> {
    let rhs = |_: f64, y: &[f64; 3]| {
        let v = field.vector([y[0], y[1]]);
        [v[0], v[1], field.divergence([y[0], y[1]])]
    };
    let mut st = Dopri5::new(rhs, 0.0, [p[0], p[1], 0.0], 1.0, tol).with_max_step(period / 64.0);
    let mut pts = vec![p];
    while st.t() < period {
        st.step(period)?;
        let y = st.y();
        pts.push([y[0], y[1]]);
    }
    let y = st.y();
    Ok(([y[0], y[1]], y[2], pts))
}

/// Divergence integral and return-map slope at a fixed point `s_star` of
/// the return map on `sec`.
pub fn cycle_hyperbolicity<F: Planar>(
    field: &F,
    sec: &Section,
    s_star: f64,
    opts: &ReturnOptions,
) -> Result<LimitCycleRecord, CycleError> {
    let hit = return_map(field, sec, s_star, opts)?;
    let p = sec.point(s_star);
    let (end, mut r_gamma, points) = orbit_with_divergence(field, p, hit.time, opts.tol)?;
    let mut gap = (end[0] - p[0]).hypot(end[1] - p[1]);
    let scale = 1.0 + p[0].abs().max(p[1].abs());
    if r_gamma > 0.0 || gap > 1e-8 * scale {
        // Unstable cycles amplify forward errors; integrate them backward.
        let (back, r_back, _) = orbit_with_divergence(&Reversed(field), p, hit.time, opts.tol)?;
        let back_gap = (back[0] - p[0]).hypot(back[1] - p[1]);
        if back_gap < gap {
            gap = back_gap;
            r_gamma = -r_back;
        }
    }
    if gap > 1e-8 * scale {
        return Err(CycleError::NotClosed { gap });
    }
    let agrees = |slope: f64| slope > 0.0 && (r_gamma - slope.ln()).abs() <= 1e-4 * (1.0 + r_gamma.abs());
    let fd = if r_gamma <= 0.0 {
        fd_slope(field, sec, s_star, opts)
    } else {
        fd_slope(&Reversed(field), sec, s_star, opts).map(|v| 1.0 / v)
    };
    let (slope, slope_method) = match fd {
        Ok(v) if agrees(v) => (v, SlopeMethod::FiniteDifference),
        other => {
            let v = variational_slope(field, sec, s_star, hit.time, opts.tol)?;
            if !agrees(v) {
                let fd = other.unwrap_or(f64::NAN);
                return Err(CycleError::QuadratureFailure {
                    r_gamma,
                    log_slope: if fd.is_finite() { fd.ln() } else { v.ln() },
                });
            }
            (v, SlopeMethod::Variational)
        }
    };
    Ok(LimitCycleRecord {
        points,
        period: hit.time,
        section: *sec,
        s_star,
        r_gamma,
        slope,
        slope_method,
        verdict: verdict_for(r_gamma),
        closure_gap: gap,
        scan_samples: 0,
        t_max: opts.t_max,
    })
}

/// Central-difference slope of the return map at `s`, extrapolated from
/// steps `h` and `h/2` and integrated at tight tolerance.
fn fd_slope<F: Planar>(field: &F, sec: &Section, s: f64, opts: &ReturnOptions) -> Result<f64, CycleError> {
    let tight = ReturnOptions {
        tol: Tolerances {
            rtol: 1e-13,
            atol: 1e-15,
        },
        ..*opts
    };
    let room = (sec.half_length - s.abs()).max(0.0);
    let h = (1e-3 * (1.0 + s.abs())).min(0.25 * room);
    let diff = |h: f64| -> Result<f64, CycleError> {
        let up = return_map(field, sec, s + h, &tight)?.s;
        let dn = return_map(field, sec, s - h, &tight)?.s;
        Ok((up - dn) / (2.0 * h))
    };
    let (d1, d2) = (diff(h)?, diff(0.5 * h)?);
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Return-map slope from the monodromy matrix `M` of the variational
/// equation: `cross(X, M d) / cross(X, d)` at the start point.
fn variational_slope<F: Planar>(field: &F, sec: &Section, s: f64, period: f64, tol: Tolerances) -> Result<f64, CycleError> {
    let p = sec.point(s);
    let rhs = |_: f64, y: &[f64; 6]| {
        let v = field.vector([y[0], y[1]]);
        let j = field.jacobian([y[0], y[1]]);
        [
            v[0],
            v[1],
            j[0][0] * y[2] + j[0][1] * y[4],
            j[0][0] * y[3] + j[0][1] * y[5],
            j[1][0] * y[2] + j[1][1] * y[4],
            j[1][0] * y[3] + j[1][1] * y[5],
        ]
    };
    let y = crate::ode::integrate(rhs, 0.0, [p[0], p[1], 1.0, 0.0, 0.0, 1.0], period, tol)?;
    let d = sec.dir;
    let md = [y[2] * d[0] + y[3] * d[1], y[4] * d[0] + y[5] * d[1]];
    let x = field.vector(p);
    let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    Ok(cross(x, md) / cross(x, d))
}

/// Illinois regula falsi for a sign change of the displacement on `[a, b]`.
fn refine_fixed_point<F: Planar>(
    field: &F,
    sec: &Section,
    mut a: f64,
    mut da: f64,
    mut b: f64,
    mut db: f64,
    opts: &ReturnOptions,
) -> Result<f64, CycleError> {
    let mut side = 0;
    for _ in 0..100 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        let mut c = (a * db - b * da) / (db - da);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let dc = displacement(field, sec, c, opts)?;
        if dc == 0.0 {
            return Ok(c);
        }
        if (dc < 0.0) == (db < 0.0) {
            b = c;
            db = dc;
            if side == -1 {
                da *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            da = dc;
            if side == 1 {
                db *= 0.5;
            }
            side = 1;
        }
        if dc.abs() < 1e-14 {
            return Ok(c);
        }
    }
    Ok(if da.abs() < db.abs() { a } else { b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub samples: usize,
    pub t_max: f64,
    /// Length cap for sections in unbounded cells.
    pub max_section: f64,
    /// Fraction of near-zero displacements that flags a continuum of
    /// closed orbits.
    pub non_isolated_fraction: f64,
    pub non_isolated_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            samples: 200,
            t_max: 1e4,
            max_section: 20.0,
            non_isolated_fraction: 0.9,
            non_isolated_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusScan {
    pub center: [f64; 2],
    pub section: Section,
    pub transversality: f64,
    pub samples: usize,
    /// Samples whose orbit hit the time cap.
    pub gaps: usize,
    pub left_domain: usize,
    pub converged: usize,
    pub non_isolated: bool,
    /// Sign changes that did not refine to a closed orbit.
    pub failed_refinements: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleScan {
    pub cycles: Vec<LimitCycleRecord>,
    pub annuli: Vec<AnnulusScan>,
}

impl CycleScan {
    pub fn gaps(&self) -> usize {
        self.annuli.iter().map(|a| a.gaps + a.failed_refinements).sum()
    }

    pub fn non_isolated(&self) -> bool {
        self.annuli.iter().any(|a| a.non_isolated)
    }
}

/// Interval of the complement of `{0, 1}` containing `t`.
fn cell_interval(t: f64) -> (f64, f64) {
    if t < 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else if t < 1.0 {
        (0.0, 1.0)
    } else {
        (1.0, f64::INFINITY)
    }
}

/// Picks the ray from `c` inside its cell with the best transversality.
fn choose_section<F: Planar>(field: &F, c: [f64; 2], cap: f64) -> (Section, f64, f64) {
    let (xi, yi) = (cell_interval(c[0]), cell_interval(c[1]));
    let mut best: Option<(Section, f64, f64)> = None;
    for k in 0..16 {
        let a = std::f64::consts::PI * (k as f64 + 0.25) / 8.0;
        let dir = [a.cos(), a.sin()];
        let mut len = cap;
        for (lo, hi, p, d) in [(xi.0, xi.1, c[0], dir[0]), (yi.0, yi.1, c[1], dir[1])] {
            if d > 0.0 && hi.is_finite() {
                len = len.min((hi - p) / d);
            }
            if d < 0.0 && lo.is_finite() {
                len = len.min((lo - p) / d);
            }
        }
        let sec = Section::new(c, dir, len);
        let score = sec.transversality(field, 0.02 * len, 0.98 * len, 32);
        if best.as_ref().is_none_or(|b| score > b.2) {
            best = Some((sec, len, score));
        }
    }
    best.unwrap()
}

fn hausdorff_close(a: &[[f64; 2]], b: &[[f64; 2]], tol: f64) -> bool {
    let one_way = |a: &[[f64; 2]], b: &[[f64; 2]]| {
        a.iter().all(|p| b.iter().any(|q| (p[0] - q[0]).hypot(p[1] - q[1]) <= tol))
    };
    one_way(a, b) && one_way(b, a)
}

/// Scans the displacement map on a ray from every finite, non-saddle
/// singular point off the invariant lines and refines its sign changes
/// into closed orbits.
pub fn find_limit_cycles(x: &EssField, singularities: &[Singularity], opts: &ScanOptions) -> CycleScan {
    let field = x.evaluator();
    let ropts = ReturnOptions {
        t_max: opts.t_max,
        ..ReturnOptions::default()
    };
    let mut scan = CycleScan::default();
    for s in singularities {
        let Some((cx, cy)) = s.finite_xy() else { continue };
        if s.on_lambda || s.kind == Kind::HyperbolicSaddle {
            continue;
        }
        let (sec, len, score) = choose_section(&field, [cx, cy], opts.max_section);
        let sec = Section { half_length: len, ..sec };
        let n = opts.samples;
        let mut values: Vec<(f64, Option<f64>)> = Vec::with_capacity(n);
        let mut an = AnnulusScan {
            center: [cx, cy],
            section: sec,
            transversality: score,
            samples: n,
            gaps: 0,
            left_domain: 0,
            converged: 0,
            non_isolated: false,
            failed_refinements: 0,
        };
        for k in 0..n {
            let sk = len * (k as f64 + 0.5) / n as f64;
            let d = match displacement(&field, &sec, sk, &ropts) {
                Ok(d) => Some(d),
                Err(CycleError::NoReturn { .. }) => {
                    an.gaps += 1;
                    None
                }
                Err(CycleError::LeftDomain { .. }) => {
                    an.left_domain += 1;
                    None
                }
                Err(CycleError::ConvergedToEquilibrium { .. }) => {
                    an.converged += 1;
                    None
                }
                Err(_) => {
                    an.gaps += 1;
                    None
                }
            };
            values.push((sk, d));
        }
        let tiny = values
            .iter()
            .filter(|(_, d)| d.is_some_and(|d| d.abs() < opts.non_isolated_tol))
            .count();
        if tiny as f64 >= opts.non_isolated_fraction * n as f64 {
            an.non_isolated = true;
            scan.annuli.push(an);
            continue;
        }
        for w in values.windows(2) {
            let ((a, da), (b, db)) = (w[0], w[1]);
            let (Some(da), Some(db)) = (da, db) else { continue };
            if (da < 0.0) == (db < 0.0) && da != 0.0 {
                continue;
            }
            let rec = refine_fixed_point(&field, &sec, a, da, b, db, &ropts)
                .and_then(|s_star| {
                    let d = displacement(&field, &sec, s_star, &ropts)?;
                    if d.abs() > 1e-8 {
                        return Err(CycleError::NotClosed { gap: d.abs() });
                    }
                    cycle_hyperbolicity(&field, &sec, s_star, &ropts)
                });
            match rec {
                Ok(mut r) => {
                    r.scan_samples = n;
                    let dup = scan.cycles.iter().any(|c| hausdorff_close(&c.points, &r.points, 1e-6));
                    if !dup {
                        scan.cycles.push(r);
                    }
                }
                Err(e) => {
                    log::debug!("sign change on ({a}, {b}) not refined: {e}");
                    an.failed_refinements += 1;
                }
            }
        }
        scan.annuli.push(an);
    }
    scan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurveCheck {
    Invariant { cofactor: Poly2 },
    NotInvariant { residual: f64 },
}

/// Tests `P F_x + Q F_y = K F` by exact division by `F`.
pub fn check_invariant_algebraic_curve(x: &EssField, f: &Poly2) -> CurveCheck {
    assert!(!f.is_zero(), "curve polynomial must be nonzero");
    let n = &(x.p() * &f.partial(Axis::X)) + &(x.q() * &f.partial(Axis::Y));
    let scale = n.max_abs_coeff().max(1.0);
    let (k, r) = n.div_rem(f, 1e-15 * scale);
    let residual = r.max_abs_coeff();
    if residual <= 1e-10 {
        CurveCheck::Invariant { cofactor: k }
    } else {
        CurveCheck::NotInvariant { residual }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_field;
    use crate::singular::{find_finite_singularities, Rect, TOL_HYPERBOLIC};

    fn circle() -> FnField<impl Fn([f64; 2]) -> [f64; 2], impl Fn([f64; 2]) -> f64> {
        FnField(
            |p: [f64; 2]| {
                let r2 = p[0] * p[0] + p[1] * p[1];
                [-p[1] + p[0] * (1.0 - r2), p[0] + p[1] * (1.0 - r2)]
            },
            |p: [f64; 2]| 2.0 - 4.0 * (p[0] * p[0] + p[1] * p[1]),
        )
    }

    #[test]
    fn circle_return_map() {
        let f = circle();
        let sec = Section::new([0.0, 0.0], [1.0, 0.0], 3.0);
        assert!(sec.transversality(&f, 0.1, 3.0, 32) > 1e-6);
        let o = ReturnOptions::default();
        let h = return_map(&f, &sec, 1.0, &o).unwrap();
        assert!((h.s - 1.0).abs() < 1e-9);
        assert!((h.time - 2.0 * std::f64::consts::PI).abs() < 1e-8);
        let h = return_map(&f, &sec, 0.5, &o).unwrap();
        assert!(h.s > 0.5 && h.s < 1.0);
    }

    #[test]
    fn escaping_orbit_leaves_domain() {
        let f = FnField(|p: [f64; 2]| [p[0] * p[0] + 1.0, 1.0], |p: [f64; 2]| 2.0 * p[0]);
        let sec = Section::new([0.0, 0.0], [1.0, 0.0], 1.0);
        assert!(matches!(
            return_map(&f, &sec, 0.5, &ReturnOptions::default()),
            Err(CycleError::LeftDomain { .. })
        ));
    }

    #[test]
    fn circle_hyperbolicity() {
        let f = circle();
        let sec = Section::new([0.0, 0.0], [1.0, 0.0], 3.0);
        let rec = cycle_hyperbolicity(&f, &sec, 1.0, &ReturnOptions::default()).unwrap();
        assert!((rec.r_gamma + 4.0 * std::f64::consts::PI).abs() < 1e-6);
        assert_eq!(rec.verdict, CycleVerdict::HyperbolicStable);
        let rev = Reversed(&f);
        let rec = cycle_hyperbolicity(&rev, &sec, 1.0, &ReturnOptions::default()).unwrap();
        assert!((rec.r_gamma - 4.0 * std::f64::consts::PI).abs() < 1e-6, "{rec:?}");
        assert_eq!(verdict_for(1e-6), CycleVerdict::NonHyperbolicSuspect);
    }

    #[test]
    fn matching_pennies_is_non_isolated() {
        let x = EssField::matching_pennies();
        let s = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC).unwrap();
        let scan = find_limit_cycles(&x, &s, &ScanOptions { samples: 40, ..Default::default() });
        assert!(scan.non_isolated());
        assert!(scan.cycles.is_empty());
    }

    #[test]
    fn constant_field_has_nothing_to_scan() {
        let x = build_field(Poly2::constant(1.0), Poly2::constant(1.0), 0).unwrap();
        let s = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC).unwrap();
        let scan = find_limit_cycles(&x, &s, &ScanOptions::default());
        assert!(scan.cycles.is_empty() && scan.annuli.is_empty());
    }

    #[test]
    fn invariant_curves() {
        let x = EssField::matching_pennies();
        match check_invariant_algebraic_curve(&x, &Poly2::x()) {
            CurveCheck::Invariant { cofactor } => {
                let expected = &Poly2::from_coeffs(&[(1, 0, 1.0), (0, 0, -1.0)]) * x.f();
                assert!((&cofactor - &expected).max_abs_coeff() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
        let yy = Poly2::from_coeffs(&[(0, 2, 1.0), (0, 1, -1.0)]);
        match check_invariant_algebraic_curve(&x, &yy) {
            CurveCheck::Invariant { cofactor } => {
                let expected = &Poly2::from_coeffs(&[(0, 1, 2.0), (0, 0, -1.0)]) * x.g();
                assert!((&cofactor - &expected).max_abs_coeff() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
        let circle = Poly2::from_coeffs(&[(2, 0, 1.0), (0, 2, 1.0), (0, 0, 1.0)]);
        assert!(matches!(check_invariant_algebraic_curve(&x, &circle), CurveCheck::NotInvariant { .. }));
    }
}
