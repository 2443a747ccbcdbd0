//! Replicator fields, payoff games and the coefficient metric.

use crate::ode::{self, OdeError, Tolerances};
use crate::poly::{Axis, Dense2, Poly2, Term};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("{which} has degree {degree}, exceeding the bound {bound}")]
    DegreeExceeded {
        which: &'static str,
        degree: i32,
        bound: u32,
    },
    #[error("fields have different degree bounds ({0} vs {1})")]
    MismatchedDegree(u32, u32),
    #[error("coefficient vector has length {got}, expected {expected}")]
    BadVectorLength { got: usize, expected: usize },
    #[error("initial state is not on the product of simplices")]
    OffSimplex,
    #[error("integration failed: {0}")]
    Tolerance(#[from] OdeError),
}

/// Two-player, two-strategy game with polynomial payoff entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffGame {
    pub n: u32,
    #[serde(rename = "A")]
    pub a: [[Poly2; 2]; 2],
    #[serde(rename = "B")]
    pub b: [[Poly2; 2]; 2],
}

impl PayoffGame {
    pub fn constant(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> Self {
        let c = |m: [[f64; 2]; 2]| m.map(|row| row.map(Poly2::constant));
        PayoffGame {
            n: 0,
            a: c(a),
            b: c(b),
        }
    }

    /// The classic zero-degree matching-pennies game.
    pub fn matching_pennies() -> Self {
        Self::constant([[0.0, 1.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for row in self.a.iter().chain(self.b.iter()) {
            for e in row {
                if e.degree() > self.n as i32 {
                    return Err(ModelError::DegreeExceeded {
                        which: "payoff entry",
                        degree: e.degree(),
                        bound: self.n,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Planar replicator field `P = x(x-1) f`, `Q = y(y-1) g` with
/// `deg f, deg g <= d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct EssField {
    d: u32,
    f: Poly2,
    g: Poly2,
    p: Poly2,
    q: Poly2,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    d: u32,
    f: Poly2,
    g: Poly2,
}

impl TryFrom<FieldRepr> for EssField {
    type Error = ModelError;
    fn try_from(r: FieldRepr) -> Result<Self, ModelError> {
        build_field(r.f, r.g, r.d)
    }
}

impl From<EssField> for FieldRepr {
    fn from(x: EssField) -> Self {
        FieldRepr {
            d: x.d,
            f: x.f,
            g: x.g,
        }
    }
}

fn x_xm1() -> Poly2 {
    Poly2::from_coeffs(&[(2, 0, 1.0), (1, 0, -1.0)])
}

fn y_ym1() -> Poly2 {
    Poly2::from_coeffs(&[(0, 2, 1.0), (0, 1, -1.0)])
}

pub fn build_field(f: Poly2, g: Poly2, d: u32) -> Result<EssField, ModelError> {
    if f.degree() > d as i32 {
        return Err(ModelError::DegreeExceeded {
            which: "f",
            degree: f.degree(),
            bound: d,
        });
    }
    if g.degree() > d as i32 {
        return Err(ModelError::DegreeExceeded {
            which: "g",
            degree: g.degree(),
            bound: d,
        });
    }
    let p = &x_xm1() * &f;
    let q = &y_ym1() * &g;
    Ok(EssField { d, f, g, p, q })
}

pub fn reduce_game(game: &PayoffGame) -> Result<EssField, ModelError> {
    game.validate()?;
    let [[a11, a12], [a21, a22]] = &game.a;
    let [[b11, b12], [b21, b22]] = &game.b;
    let f = &(a22 - a12) + &(&(&(a12 + a21) - &(a11 + a22)) * &Poly2::y());
    let g = &(b22 - b12) + &(&(&(b12 + b21) - &(b11 + b22)) * &Poly2::x());
    build_field(f, g, game.n + 1)
}

/// Number of monomials of total degree at most `d`.
pub fn monomial_count(d: u32) -> usize {
    ((d + 1) * (d + 2) / 2) as usize
}

/// Exponents in graded-lexicographic order up to total degree `d`.
pub fn graded_exponents(d: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=d).flat_map(|k| (0..=k).map(move |i| (i, k - i)))
}

impl EssField {
    pub fn d(&self) -> u32 {
        self.d
    }

    /// Degree `n = d + 2` of the planar components.
    pub fn n(&self) -> u32 {
        self.d + 2
    }

    pub fn f(&self) -> &Poly2 {
        &self.f
    }

    pub fn g(&self) -> &Poly2 {
        &self.g
    }

    pub fn p(&self) -> &Poly2 {
        &self.p
    }

    pub fn q(&self) -> &Poly2 {
        &self.q
    }

    pub fn matching_pennies() -> Self {
        reduce_game(&PayoffGame::matching_pennies()).expect("valid game")
    }

    /// Flat coefficient vector: `f` block then `g` block, graded order.
    pub fn coefficient_vector(&self) -> Vec<f64> {
        graded_exponents(self.d)
            .map(|(i, j)| self.f.coeff(i, j))
            .chain(graded_exponents(self.d).map(|(i, j)| self.g.coeff(i, j)))
            .collect()
    }

    pub fn from_coefficient_vector(d: u32, v: &[f64]) -> Result<Self, ModelError> {
        let m = monomial_count(d);
        if v.len() != 2 * m {
            return Err(ModelError::BadVectorLength {
                got: v.len(),
                expected: 2 * m,
            });
        }
        let mk = |block: &[f64]| {
            Poly2::from_terms(graded_exponents(d).zip(block).map(|((i, j), &c)| Term { i, j, c }))
        };
        build_field(mk(&v[..m]), mk(&v[m..]), d)
    }

    /// The time-reversed field `-X`.
    pub fn reversed(&self) -> EssField {
        build_field(self.f.scale(-1.0), self.g.scale(-1.0), self.d).expect("same degree")
    }

    /// Exact check that `P = x(x-1) f` and `Q = y(y-1) g` coefficient by
    /// coefficient, so that the four lines are invariant.
    pub fn lambda_invariant(&self) -> bool {
        self.p == &x_xm1() * &self.f && self.q == &y_ym1() * &self.g
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (self.p.eval(x, y), self.q.eval(x, y))
    }

    pub fn evaluator(&self) -> FieldEval {
        FieldEval::new(self)
    }
}

/// Coefficient-metric distance between two fields of the same degree bound.
pub fn distance(x: &EssField, y: &EssField) -> Result<f64, ModelError> {
    if x.d != y.d {
        return Err(ModelError::MismatchedDegree(x.d, y.d));
    }
    let (a, b) = (x.coefficient_vector(), y.coefficient_vector());
    Ok(a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
}

/// Precompiled evaluator for `(P, Q)`, its Jacobian and divergence.
#[derive(Debug, Clone)]
pub struct FieldEval {
    f: Dense2,
    fx: Dense2,
    fy: Dense2,
    g: Dense2,
    gx: Dense2,
    gy: Dense2,
}

impl FieldEval {
    pub fn new(x: &EssField) -> Self {
        FieldEval {
            f: Dense2::new(&x.f),
            fx: Dense2::new(&x.f.partial(Axis::X)),
            fy: Dense2::new(&x.f.partial(Axis::Y)),
            g: Dense2::new(&x.g),
            gx: Dense2::new(&x.g.partial(Axis::X)),
            gy: Dense2::new(&x.g.partial(Axis::Y)),
        }
    }

    #[inline]
    pub fn fg(&self, x: f64, y: f64) -> (f64, f64) {
        (self.f.eval(x, y), self.g.eval(x, y))
    }

    #[inline]
    pub fn vector(&self, x: f64, y: f64) -> [f64; 2] {
        [x * (x - 1.0) * self.f.eval(x, y), y * (y - 1.0) * self.g.eval(x, y)]
    }

    pub fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (f, g) = self.fg(x, y);
        let (wx, wy) = (x * (x - 1.0), y * (y - 1.0));
        [
            [(2.0 * x - 1.0) * f + wx * self.fx.eval(x, y), wx * self.fy.eval(x, y)],
            [wy * self.gx.eval(x, y), (2.0 * y - 1.0) * g + wy * self.gy.eval(x, y)],
        ]
    }

    #[inline]
    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        let (f, g) = self.fg(x, y);
        (2.0 * x - 1.0) * f
            + x * (x - 1.0) * self.fx.eval(x, y)
            + (2.0 * y - 1.0) * g
            + y * (y - 1.0) * self.gy.eval(x, y)
    }
}

/// Integrates the planar field from `(x0, y0)` and samples the state at
/// the requested times (ascending, starting at or after 0).
pub fn simulate_2d(
    field: &EssField,
    start: (f64, f64),
    times: &[f64],
    tol: Tolerances,
) -> Result<Vec<[f64; 2]>, ModelError> {
    let ev = field.evaluator();
    let mut s = ode::Dopri5::new(|_, y: &[f64; 2]| ev.vector(y[0], y[1]), 0.0, [start.0, start.1], 1.0, tol);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        s.integrate_to(t)?;
        out.push(*s.y());
    }
    Ok(out)
}

/// Trajectory sample of the full four-dimensional replicator system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample4 {
    pub t: f64,
    pub state: [f64; 4],
}

/// Integrates the full replicator system in `(x1, x2, y1, y2)` up to
/// `t_end`, renormalizing each strategy pair after every accepted step.
/// Payoff entries are evaluated at `(x1, y1)`.
pub fn simulate_4d(game: &PayoffGame, state: [f64; 4], t_end: f64, tol: Tolerances) -> Result<Vec<Sample4>, ModelError> {
    let tol_s = 1e-12;
    if state.iter().any(|v| !(-tol_s..=1.0 + tol_s).contains(v))
        || (state[0] + state[1] - 1.0).abs() > 1e-9
        || (state[2] + state[3] - 1.0).abs() > 1e-9
    {
        return Err(ModelError::OffSimplex);
    }
    let a: Vec<Dense2> = game.a.iter().flatten().map(Dense2::new).collect();
    let b: Vec<Dense2> = game.b.iter().flatten().map(Dense2::new).collect();
    let rhs = |_: f64, s: &[f64; 4]| {
        let (x1, x2, y1, y2) = (s[0], s[1], s[2], s[3]);
        let am: Vec<f64> = a.iter().map(|p| p.eval(x1, y1)).collect();
        let bm: Vec<f64> = b.iter().map(|p| p.eval(x1, y1)).collect();
        let ay = [am[0] * y1 + am[1] * y2, am[2] * y1 + am[3] * y2];
        let bx = [bm[0] * x1 + bm[1] * x2, bm[2] * x1 + bm[3] * x2];
        let xay = x1 * ay[0] + x2 * ay[1];
        let ybx = y1 * bx[0] + y2 * bx[1];
        [x1 * (ay[0] - xay), x2 * (ay[1] - xay), y1 * (bx[0] - ybx), y2 * (bx[1] - ybx)]
    };
    let mut out = vec![Sample4 { t: 0.0, state }];
    let mut s = ode::Dopri5::new(rhs, 0.0, state, 1.0, tol);
    while s.t() < t_end {
        s.step(t_end)?;
        let y = *s.y();
        let sx = y[0] + y[1];
        let sy = y[2] + y[3];
        let y = [y[0] / sx, y[1] / sx, y[2] / sy, y[3] / sy];
        s.reset_state(y);
        out.push(Sample4 { t: s.t(), state: y });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies_reduction() {
        let x = EssField::matching_pennies();
        assert_eq!(x.d(), 1);
        assert_eq!(x.f(), &Poly2::from_coeffs(&[(0, 1, 2.0), (0, 0, -1.0)]));
        assert_eq!(x.g(), &Poly2::from_coeffs(&[(1, 0, -2.0), (0, 0, 1.0)]));
    }

    #[test]
    fn zero_game_reduces_to_zero_field() {
        let z = PayoffGame::constant([[0.0; 2]; 2], [[0.0; 2]; 2]);
        let x = reduce_game(&z).unwrap();
        assert!(x.f().is_zero() && x.g().is_zero());
    }

    #[test]
    fn polynomial_payoff_reduction() {
        let mut game = PayoffGame::constant([[0.0; 2]; 2], [[0.0; 2]; 2]);
        game.n = 1;
        game.a[0][1] = Poly2::x();
        let x = reduce_game(&game).unwrap();
        // -x + x*y
        assert_eq!(x.f(), &Poly2::from_coeffs(&[(1, 0, -1.0), (1, 1, 1.0)]));
        assert_eq!(x.d(), 2);
    }

    #[test]
    fn build_field_expansion_and_bounds() {
        let x = EssField::matching_pennies();
        let expected = Poly2::from_coeffs(&[(2, 1, 2.0), (2, 0, -1.0), (1, 1, -2.0), (1, 0, 1.0)]);
        assert_eq!(x.p(), &expected);
        let e = build_field(Poly2::monomial(2, 0, 1.0), Poly2::zero(), 1).unwrap_err();
        assert!(matches!(e, ModelError::DegreeExceeded { .. }));
        let z = build_field(Poly2::zero(), Poly2::zero(), 0).unwrap();
        assert!(z.lambda_invariant());
    }

    #[test]
    fn unit_distance() {
        let a = build_field(Poly2::constant(1.0), Poly2::zero(), 0).unwrap();
        let b = build_field(Poly2::zero(), Poly2::constant(1.0), 0).unwrap();
        assert_eq!(distance(&a, &a).unwrap(), 0.0);
        assert!((distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let c = build_field(Poly2::zero(), Poly2::zero(), 1).unwrap();
        assert!(matches!(distance(&a, &c), Err(ModelError::MismatchedDegree(0, 1))));
    }

    #[test]
    fn coefficient_vector_round_trip() {
        let x = EssField::matching_pennies();
        let v = x.coefficient_vector();
        // f = -1 + 2y, g = 1 - 2x in order (0,0), (0,1), (1,0).
        assert_eq!(v, vec![-1.0, 2.0, 0.0, 1.0, 0.0, -2.0]);
        assert_eq!(EssField::from_coefficient_vector(1, &v).unwrap(), x);
    }

    #[test]
    fn json_field_form() {
        let x = EssField::matching_pennies();
        let s = serde_json::to_string(&x).unwrap();
        assert!(s.starts_with(r#"{"d":1,"f":{"terms""#));
        let back: EssField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        let bad = r#"{"d":0,"f":{"terms":[{"i":1,"j":0,"c":1.0}]},"g":{"terms":[]}}"#;
        assert!(serde_json::from_str::<EssField>(bad).is_err());
    }

    #[test]
    fn evaluator_agrees_with_symbolic() {
        let x = build_field(
            Poly2::from_coeffs(&[(0, 0, 0.3), (1, 0, -1.2), (1, 1, 0.7), (0, 2, 2.0)]),
            Poly2::from_coeffs(&[(0, 0, -0.5), (2, 0, 1.1), (0, 1, 0.4)]),
            2,
        )
        .unwrap();
        let ev = x.evaluator();
        for &(a, b) in &[(0.2, 0.7), (-1.3, 2.5), (4.0, -0.25)] {
            let [p, q] = ev.vector(a, b);
            assert!((p - x.p().eval(a, b)).abs() < 1e-12 * (1.0 + p.abs()));
            assert!((q - x.q().eval(a, b)).abs() < 1e-12 * (1.0 + q.abs()));
            let j = ev.jacobian(a, b);
            let px = x.p().partial(Axis::X).eval(a, b);
            let qy = x.q().partial(Axis::Y).eval(a, b);
            assert!((j[0][0] - px).abs() < 1e-11 * (1.0 + px.abs()));
            assert!((ev.divergence(a, b) - px - qy).abs() < 1e-11 * (1.0 + px.abs() + qy.abs()));
        }
    }

    #[test]
    fn interior_equilibrium_lifts() {
        let g = PayoffGame::matching_pennies();
        let traj = simulate_4d(&g, [0.5, 0.5, 0.5, 0.5], 10.0, Tolerances::default()).unwrap();
        for s in &traj {
            assert!((s.state[0] - 0.5).abs() < 1e-12);
        }
        let traj = simulate_4d(&g, [0.0, 1.0, 0.3, 0.7], 5.0, Tolerances::default()).unwrap();
        assert!(traj.iter().all(|s| s.state[0] == 0.0));
        assert!(simulate_4d(&g, [0.3, 0.3, 0.5, 0.5], 1.0, Tolerances::default()).is_err());
    }
}
