//! Perturbation constructions: the rotated family, its wedge density,
//! Melnikov-type derivatives of the saddle-connection displacement, and
//! perturbations that keep an algebraic cycle invariant.

use crate::cycles::{check_invariant_algebraic_curve, CurveCheck};
use crate::model::{build_field, EssField, FieldEval, ModelError};
use crate::ode::{Dopri5, OdeError, Tolerances};
use crate::poly::{Axis, Poly2};
use crate::singular::{self, Kind, TOL_HYPERBOLIC};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset of separatrix start points from their saddle.
pub const DELTA0: f64 = 1e-7;
/// Largest gap between the two legs of an accepted connection.
pub const CONNECTION_TOL: f64 = 1e-7;
/// Relative Richardson error bound for the Melnikov quadrature.
pub const QUADRATURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PerturbError {
    #[error(transparent)]
    Degree(#[from] ModelError),
    #[error("curve is not invariant (residual {residual:e})")]
    NotInvariantCurve { residual: f64 },
    #[error("integrand tail does not decay (eigenvalues {stable}, {unstable})")]
    TailNotDecaying { stable: f64, unstable: f64 },
    #[error("point ({x}, {y}) is not a hyperbolic saddle")]
    NotASaddle { x: f64, y: f64 },
    #[error("separatrices miss each other by {gap:e}")]
    NoConnection { gap: f64 },
    #[error("trapezoid and Richardson values disagree ({fine} vs {extrapolated})")]
    QuadratureFailure { fine: f64, extrapolated: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// `Y_λ = (x(x-1)(f - λεg), y(y-1)(g + λεf))`.
pub fn rotate_family(x: &EssField, eps: f64, lambda: f64) -> EssField {
    let s = lambda * eps;
    let f = x.f() - &x.g().scale(s);
    let g = x.g() + &x.f().scale(s);
    build_field(f, g, x.d()).expect("rotation keeps the degree bound")
}

/// `H = x(x-1) y(y-1) ε (f² + g²)`, the wedge of `Y_0` with `∂Y/∂λ`.
pub fn wedge_density(x: &EssField, eps: f64) -> Poly2 {
    let lines = &Poly2::from_coeffs(&[(2, 0, 1.0), (1, 0, -1.0)]) * &Poly2::from_coeffs(&[(0, 2, 1.0), (0, 1, -1.0)]);
    let s = &(x.f() * x.f()) + &(x.g() * x.g());
    &lines * &s.scale(eps)
}

/// `f + εδ1 F F_x`, `g + εδ2 F F_y`; keeps `F = 0` invariant.
pub fn algebraic_cycle_perturbation(x: &EssField, curve: &Poly2, eps: f64, d1: i8, d2: i8) -> Result<EssField, PerturbError> {
    if let CurveCheck::NotInvariant { residual } = check_invariant_algebraic_curve(x, curve) {
        return Err(PerturbError::NotInvariantCurve { residual });
    }
    let fx = curve.partial(Axis::X);
    let fy = curve.partial(Axis::Y);
    let f = x.f() + &(curve * &fx).scale(eps * f64::from(d1.signum()));
    let g = x.g() + &(curve * &fy).scale(eps * f64::from(d2.signum()));
    Ok(build_field(f, g, x.d())?)
}

/// `x(x-1) δ1 F_x² + y(y-1) δ2 F_y²`: the divergence gained along `F = 0`
/// per unit `ε` by [`algebraic_cycle_perturbation`].
pub fn cycle_divergence_density(curve: &Poly2, d1: i8, d2: i8) -> Poly2 {
    let fx = curve.partial(Axis::X);
    let fy = curve.partial(Axis::Y);
    let xx = Poly2::from_coeffs(&[(2, 0, 1.0), (1, 0, -1.0)]);
    let yy = Poly2::from_coeffs(&[(0, 2, 1.0), (0, 1, -1.0)]);
    &(&xx * &(&fx * &fx)).scale(f64::from(d1.signum())) + &(&yy * &(&fy * &fy)).scale(f64::from(d2.signum()))
}

/// `ε ∫_0^T H̃(γ(t)) dt` along the orbit of `x` through `start` over one
/// `period`: the change of the cycle's divergence integral.
pub fn cycle_divergence_shift(
    x: &EssField,
    curve: &Poly2,
    eps: f64,
    d1: i8,
    d2: i8,
    start: [f64; 2],
    period: f64,
    tol: Tolerances,
) -> Result<f64, PerturbError> {
    let h = cycle_divergence_density(curve, d1, d2);
    let fe = x.evaluator();
    let rhs = |_: f64, y: &[f64; 3]| {
        let v = fe.vector(y[0], y[1]);
        [v[0], v[1], h.eval(y[0], y[1])]
    };
    let y = crate::ode::integrate(rhs, 0.0, [start[0], start[1], 0.0], period, tol)?;
    Ok(eps * y[2])
}

/// One sample of a connection: time (zero at the base point), position
/// and `∫_0^t Div`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub t: f64,
    pub p: [f64; 2],
    pub div_integral: f64,
}

/// Heteroclinic orbit between two finite hyperbolic saddles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleConnection {
    pub source: [f64; 2],
    pub target: [f64; 2],
    /// `(stable, unstable)` eigenvalues at each end.
    pub source_eigenvalues: [f64; 2],
    pub target_eigenvalues: [f64; 2],
    /// Unstable direction leaving the source.
    pub source_direction: [f64; 2],
    /// Stable direction entering the target.
    pub target_direction: [f64; 2],
    /// Samples from near the source to near the target; `t = 0` at `base`.
    pub orbit: Vec<OrbitSample>,
    pub base: [f64; 2],
    /// Unit normal of the section through `base`.
    pub normal: [f64; 2],
    /// Section coordinates where the unstable and stable legs cross.
    pub n_u: f64,
    pub n_s: f64,
    pub inside_lambda: bool,
}

struct SaddleData {
    p: [f64; 2],
    stable: f64,
    unstable: f64,
    e_s: [f64; 2],
    e_u: [f64; 2],
}

fn saddle_data(x: &EssField, p: [f64; 2]) -> Result<SaddleData, PerturbError> {
    let not = PerturbError::NotASaddle { x: p[0], y: p[1] };
    let s = singular::classify(x, p[0], p[1], TOL_HYPERBOLIC).map_err(|_| not.clone())?;
    if s.kind != Kind::HyperbolicSaddle {
        return Err(not);
    }
    let (ls, lu) = (s.eigenvalues[0].re, s.eigenvalues[1].re);
    let (x0, y0) = s.finite_xy().unwrap();
    Ok(SaddleData {
        p: [x0, y0],
        stable: ls,
        unstable: lu,
        e_s: s.eigenvector(ls),
        e_u: s.eigenvector(lu),
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Sub-samples per accepted step; even, so every other sample forms a
/// coarser grid of the same kind.
const SUBSAMPLES: usize = 32;

struct Leg {
    /// `(time, [x, y, ∫Div])` in the leg's own integration time.
    samples: Vec<(f64, [f64; 3])>,
}

fn on_lambda(p: [f64; 2]) -> bool {
    let t = 1e-12;
    p[0].abs() < t || (p[0] - 1.0).abs() < t || p[1].abs() < t || (p[1] - 1.0).abs() < t
}

/// Integrates `[x, y, ∫Div]` from `start` in direction `dir`, sampling each
/// step densely, until `stop` accepts a sample or a crossing is found by
/// `section` (`g` changes sign from `sense` to the other side).
fn trace_leg(
    fe: &FieldEval,
    start: [f64; 2],
    dir: f64,
    t_max: f64,
    tol: Tolerances,
    mut stop: impl FnMut(&[f64; 3]) -> bool,
    section: Option<(&dyn Fn(&[f64; 3]) -> f64, f64)>,
) -> Result<(Leg, bool), PerturbError> {
    let rhs = |_: f64, y: &[f64; 3]| {
        let v = fe.vector(y[0], y[1]);
        [v[0], v[1], fe.divergence(y[0], y[1])]
    };
    let mut st = Dopri5::new(rhs, 0.0, [start[0], start[1], 0.0], dir, tol);
    let mut samples = vec![(0.0, [start[0], start[1], 0.0])];
    while st.t() * dir < t_max {
        st.step(dir * t_max)?;
        let (a, b) = (st.t_prev(), st.t());
        if let Some((g, sense)) = section {
            let (ga, gb) = (g(st.y_prev()), g(st.y()));
            if ga * sense > 0.0 && gb * sense <= 0.0 {
                let (te, ye) = st.locate_event(|y| g(y), 1e-14 * (1.0 + b.abs()));
                for k in 1..SUBSAMPLES {
                    let t = a + (te - a) * k as f64 / SUBSAMPLES as f64;
                    samples.push((t, st.dense(t)));
                }
                samples.push((te, ye));
                return Ok((Leg { samples }, true));
            }
        }
        for k in 1..=SUBSAMPLES {
            let t = a + (b - a) * k as f64 / SUBSAMPLES as f64;
            let y = if k == SUBSAMPLES { *st.y() } else { st.dense(t) };
            samples.push((t, y));
        }
        let y = *st.y();
        if y[0].abs().max(y[1].abs()) > 1e3 || stop(&y) {
            return Ok((Leg { samples }, false));
        }
    }
    Ok((Leg { samples }, false))
}

impl SaddleConnection {
    /// Shoots the unstable separatrices of `source` and the stable ones of
    /// `target` to a common section and accepts the pair whose crossings
    /// agree to [`CONNECTION_TOL`].
    pub fn find(x: &EssField, source: [f64; 2], target: [f64; 2], tol: Tolerances) -> Result<Self, PerturbError> {
        let sp = saddle_data(x, source)?;
        let tq = saddle_data(x, target)?;
        let fe = x.evaluator();
        let t_max = 1e4;
        let scale = 1.0 + tq.p[0].abs().max(tq.p[1].abs());
        let near = 1e-2 * dist(sp.p, tq.p).min(1.0);
        let mut best_gap = f64::INFINITY;
        for su in [1.0, -1.0] {
            let eu = [su * sp.e_u[0], su * sp.e_u[1]];
            let start = [sp.p[0] + DELTA0 * eu[0], sp.p[1] + DELTA0 * eu[1]];
            let (leg_u, _) = trace_leg(&fe, start, 1.0, t_max, tol, |y| dist([y[0], y[1]], tq.p) < near, None)?;
            let closest = leg_u.samples.iter().map(|(_, y)| dist([y[0], y[1]], tq.p)).fold(f64::INFINITY, f64::min);
            if closest >= near {
                best_gap = best_gap.min(closest);
                continue;
            }
            // Base point: the sample farthest from both saddles.
            let (ib, _) = leg_u
                .samples
                .iter()
                .enumerate()
                .map(|(i, (_, y))| (i, dist([y[0], y[1]], sp.p).min(dist([y[0], y[1]], tq.p))))
                .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            let base3 = leg_u.samples[ib].1;
            let base = [base3[0], base3[1]];
            let v = fe.vector(base[0], base[1]);
            let speed = v[0].hypot(v[1]);
            let tang = [v[0] / speed, v[1] / speed];
            // Flow direction turned clockwise, the orientation under which
            // the displacement derivative equals the Melnikov integral.
            let normal = [tang[1], -tang[0]];
            let g = move |y: &[f64; 3]| (y[0] - base[0]) * tang[0] + (y[1] - base[1]) * tang[1];
            for ss in [1.0, -1.0] {
                let es = [ss * tq.e_s[0], ss * tq.e_s[1]];
                let start = [tq.p[0] + DELTA0 * es[0], tq.p[1] + DELTA0 * es[1]];
                let (leg_s, hit) = trace_leg(&fe, start, -1.0, t_max, tol, |y| dist([y[0], y[1]], sp.p) < near, Some((&g, 1.0)))?;
                if !hit {
                    continue;
                }
                let end = leg_s.samples.last().unwrap().1;
                let n_s = (end[0] - base[0]) * normal[0] + (end[1] - base[1]) * normal[1];
                if n_s.abs() > 0.1 * scale {
                    continue;
                }
                best_gap = best_gap.min(n_s.abs());
                if n_s.abs() > CONNECTION_TOL * scale {
                    continue;
                }
                return Ok(Self::assemble(&sp, &tq, eu, es, &leg_u.samples[..=ib], &leg_s, base, normal, n_s));
            }
        }
        Err(PerturbError::NoConnection { gap: best_gap })
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        sp: &SaddleData,
        tq: &SaddleData,
        eu: [f64; 2],
        es: [f64; 2],
        up: &[(f64, [f64; 3])],
        leg_s: &Leg,
        base: [f64; 2],
        normal: [f64; 2],
        n_s: f64,
    ) -> Self {
        let (tu, phi_u) = (up.last().unwrap().0, up.last().unwrap().1[2]);
        let mut orbit: Vec<OrbitSample> = up
            .iter()
            .map(|(t, y)| OrbitSample {
                t: t - tu,
                p: [y[0], y[1]],
                div_integral: y[2] - phi_u,
            })
            .collect();
        let (ts, last) = *leg_s.samples.last().unwrap();
        // The stable leg runs backward; its time τ maps to t = τ - τ_end.
        orbit.extend(leg_s.samples.iter().rev().skip(1).map(|(t, y)| OrbitSample {
            t: t - ts,
            p: [y[0], y[1]],
            div_integral: y[2] - last[2],
        }));
        let inside_lambda = orbit.iter().all(|s| on_lambda(s.p));
        SaddleConnection {
            source: sp.p,
            target: tq.p,
            source_eigenvalues: [sp.stable, sp.unstable],
            target_eigenvalues: [tq.stable, tq.unstable],
            source_direction: eu,
            target_direction: es,
            orbit,
            base,
            normal,
            n_u: 0.0,
            n_s,
            inside_lambda,
        }
    }
}

fn newton_singular(fe: &FieldEval, mut p: [f64; 2]) -> [f64; 2] {
    for _ in 0..50 {
        let v = fe.vector(p[0], p[1]);
        let j = fe.jacobian(p[0], p[1]);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 {
            break;
        }
        let dx = (v[0] * j[1][1] - v[1] * j[0][1]) / det;
        let dy = (j[0][0] * v[1] - j[1][0] * v[0]) / det;
        p = [p[0] - dx, p[1] - dy];
        if dx.hypot(dy) < 1e-15 * (1.0 + p[0].abs().max(p[1].abs())) {
            break;
        }
    }
    p
}

/// Displacement `n^u(λ) - n^s(λ)` of the perturbed separatrices of
/// `conn` on its section, for the rotated field `Y_λ`.
pub fn displacement(x: &EssField, conn: &SaddleConnection, eps: f64, lambda: f64, tol: Tolerances) -> Result<f64, PerturbError> {
    let y = rotate_family(x, eps, lambda);
    let fe = y.evaluator();
    let sp = saddle_data(&y, newton_singular(&fe, conn.source))?;
    let tq = saddle_data(&y, newton_singular(&fe, conn.target))?;
    let orient = |e: [f64; 2], r: [f64; 2]| if e[0] * r[0] + e[1] * r[1] < 0.0 { [-e[0], -e[1]] } else { e };
    let eu = orient(sp.e_u, conn.source_direction);
    let es = orient(tq.e_s, conn.target_direction);
    let base = conn.base;
    let tang = [-conn.normal[1], conn.normal[0]];
    let g = move |y: &[f64; 3]| (y[0] - base[0]) * tang[0] + (y[1] - base[1]) * tang[1];
    let coord = |leg: &Leg| {
        let e = leg.samples.last().unwrap().1;
        (e[0] - base[0]) * conn.normal[0] + (e[1] - base[1]) * conn.normal[1]
    };
    let start_u = [sp.p[0] + DELTA0 * eu[0], sp.p[1] + DELTA0 * eu[1]];
    let (leg_u, hit_u) = trace_leg(&fe, start_u, 1.0, 1e4, tol, |_| false, Some((&g, -1.0)))?;
    let start_s = [tq.p[0] + DELTA0 * es[0], tq.p[1] + DELTA0 * es[1]];
    let (leg_s, hit_s) = trace_leg(&fe, start_s, -1.0, 1e4, tol, |_| false, Some((&g, 1.0)))?;
    if !(hit_u && hit_s) {
        return Err(PerturbError::NoConnection { gap: f64::INFINITY });
    }
    Ok(coord(&leg_u) - coord(&leg_s))
}

/// Values of the Melnikov quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovValue {
    pub derivative: f64,
    /// `∫ e^{-∫Div} H dt` over the sampled orbit plus both tails.
    pub integral: f64,
    pub tail: f64,
    pub richardson_error: f64,
}

/// `D'(0) = -(1/|Y_0(x_0)|) ∫ e^{-∫_0^t Div} H(γ(t)) dt` for the rotated
/// family. Connections on the invariant lines give exactly zero.
pub fn melnikov_derivative(x: &EssField, eps: f64, conn: &SaddleConnection) -> Result<f64, PerturbError> {
    melnikov_value(x, eps, conn).map(|m| m.derivative)
}

pub fn melnikov_value(x: &EssField, eps: f64, conn: &SaddleConnection) -> Result<MelnikovValue, PerturbError> {
    if conn.inside_lambda {
        return Ok(MelnikovValue {
            derivative: 0.0,
            integral: 0.0,
            tail: 0.0,
            richardson_error: 0.0,
        });
    }
    for e in [conn.source_eigenvalues, conn.target_eigenvalues] {
        if !(e[0] < 0.0 && e[1] > 0.0) {
            return Err(PerturbError::TailNotDecaying {
                stable: e[0],
                unstable: e[1],
            });
        }
    }
    // Integrate the unit density and scale once, so the result is linear in eps.
    let h = crate::poly::Dense2::new(&wedge_density(x, 1.0));
    let vals: Vec<f64> = conn.orbit.iter().map(|s| (-s.div_integral).exp() * h.eval(s.p[0], s.p[1])).collect();
    let ts: Vec<f64> = conn.orbit.iter().map(|s| s.t).collect();
    let trap = |stride: usize| {
        let mut acc = 0.0;
        let mut i = 0;
        while i + stride < ts.len() {
            acc += 0.5 * (ts[i + stride] - ts[i]) * (vals[i] + vals[i + stride]);
            i += stride;
        }
        (acc, i)
    };
    let (fine, _) = trap(1);
    let (coarse, reached) = trap(2);
    // An odd sample count leaves one fine interval out of the coarse sum.
    let rest: f64 = (reached..ts.len() - 1).map(|i| 0.5 * (ts[i + 1] - ts[i]) * (vals[i] + vals[i + 1])).sum();
    let coarse = coarse + rest;
    let err = (fine - coarse) / 3.0;
    let extrapolated = fine + err;
    // Exponential tails beyond the sampled ends; the integrand decays at
    // least as fast as the smaller |eigenvalue| of the saddle it approaches.
    let rate = |e: [f64; 2]| e[0].abs().min(e[1]);
    let tail = vals[0].abs() / rate(conn.source_eigenvalues) * vals[0].signum()
        + vals[vals.len() - 1].abs() / rate(conn.target_eigenvalues) * vals[vals.len() - 1].signum();
    let integral = extrapolated + tail;
    if err.abs() > QUADRATURE_TOL * integral.abs().max(f64::MIN_POSITIVE) {
        return Err(PerturbError::QuadratureFailure {
            fine: eps * fine,
            extrapolated: eps * extrapolated,
        });
    }
    let v = x.eval(conn.base[0], conn.base[1]);
    let norm = v.0.hypot(v.1);
    Ok(MelnikovValue {
        derivative: -(integral / norm) * eps,
        integral: eps * integral,
        tail: eps * tail,
        richardson_error: eps * err,
    })
}
