//! Sparse bivariate and dense univariate real polynomials.
//!
//! [`Poly2`] stores only nonzero terms, ordered graded-lexicographically
//! (total degree ascending, then the power of `x` ascending). [`Poly1`]
//! stores coefficients in ascending powers with a nonzero leading entry.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A single monomial `c * x^i * y^j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub i: u32,
    pub j: u32,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

fn graded_cmp(a: (u32, u32), b: (u32, u32)) -> Ordering {
    (a.0 + a.1, a.0).cmp(&(b.0 + b.1, b.0))
}

/// Bivariate polynomial with real coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Poly2Repr", into = "Poly2Repr")]
pub struct Poly2 {
    terms: Vec<Term>,
}

#[derive(Serialize, Deserialize)]
struct Poly2Repr {
    terms: Vec<Term>,
}

impl From<Poly2Repr> for Poly2 {
    fn from(r: Poly2Repr) -> Self {
        Poly2::from_terms(r.terms)
    }
}

impl From<Poly2> for Poly2Repr {
    fn from(p: Poly2) -> Self {
        Poly2Repr { terms: p.terms }
    }
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2 { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(i: u32, j: u32, c: f64) -> Self {
        Self::from_terms([Term { i, j, c }])
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    /// Builds a polynomial from arbitrary terms; duplicates are summed and
    /// zero coefficients dropped.
    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut v: Vec<Term> = terms.into_iter().collect();
        v.sort_by(|a, b| graded_cmp((a.i, a.j), (b.i, b.j)));
        let mut out: Vec<Term> = Vec::with_capacity(v.len());
        for t in v {
            match out.last_mut() {
                Some(last) if last.i == t.i && last.j == t.j => last.c += t.c,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.c != 0.0);
        Poly2 { terms: out }
    }

    /// `sum c * x^i * y^j` from `(i, j, c)` triples.
    pub fn from_coeffs(coeffs: &[(u32, u32, f64)]) -> Self {
        Self::from_terms(coeffs.iter().map(|&(i, j, c)| Term { i, j, c }))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `-1` for the zero polynomial.
    pub fn degree(&self) -> i32 {
        self.terms
            .iter()
            .map(|t| (t.i + t.j) as i32)
            .max()
            .unwrap_or(-1)
    }

    pub fn degree_in(&self, axis: Axis) -> i32 {
        self.terms
            .iter()
            .map(|t| match axis {
                Axis::X => t.i as i32,
                Axis::Y => t.j as i32,
            })
            .max()
            .unwrap_or(-1)
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms
            .iter()
            .find(|t| t.i == i && t.j == j)
            .map_or(0.0, |t| t.c)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            s += t.c * x.powi(t.i as i32) * y.powi(t.j as i32);
        }
        s
    }

    /// Evaluates the degree-`n` homogenization at `(y1, y2, y3)`, i.e.
    /// `y3^n * p(y1/y3, y2/y3)` extended analytically to `y3 = 0`.
    pub fn eval_homogeneous(&self, n: u32, y1: f64, y2: f64, y3: f64) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let k = t.i + t.j;
            debug_assert!(k <= n);
            s += t.c * y1.powi(t.i as i32) * y2.powi(t.j as i32) * y3.powi((n - k) as i32);
        }
        s
    }

    pub fn partial(&self, axis: Axis) -> Poly2 {
        Poly2::from_terms(self.terms.iter().filter_map(|t| match axis {
            Axis::X if t.i > 0 => Some(Term {
                i: t.i - 1,
                j: t.j,
                c: t.c * t.i as f64,
            }),
            Axis::Y if t.j > 0 => Some(Term {
                i: t.i,
                j: t.j - 1,
                c: t.c * t.j as f64,
            }),
            _ => None,
        }))
    }

    /// Sum of the terms of total degree exactly `k`.
    pub fn homogeneous_part(&self, k: u32) -> Poly2 {
        Poly2 {
            terms: self
                .terms
                .iter()
                .filter(|t| t.i + t.j == k)
                .copied()
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        Poly2::from_terms(self.terms.iter().map(|t| Term { c: t.c * s, ..*t }))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.c.abs()))
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.c * t.c).sum::<f64>().sqrt()
    }

    pub fn pow(&self, k: u32) -> Poly2 {
        let mut out = Poly2::constant(1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// `p(x, y0)` as a polynomial in `x`.
    pub fn restrict_y(&self, y0: f64) -> Poly1 {
        let deg = self.degree_in(Axis::X).max(0) as usize;
        let mut c = vec![0.0; deg + 1];
        for t in &self.terms {
            c[t.i as usize] += t.c * y0.powi(t.j as i32);
        }
        Poly1::new(c)
    }

    /// `p(x0, y)` as a polynomial in `y`.
    pub fn restrict_x(&self, x0: f64) -> Poly1 {
        let deg = self.degree_in(Axis::Y).max(0) as usize;
        let mut c = vec![0.0; deg + 1];
        for t in &self.terms {
            c[t.j as usize] += t.c * x0.powi(t.i as i32);
        }
        Poly1::new(c)
    }

    /// Substitutes `x -> a + b*u`, `y -> c + e*v`, returning a polynomial in
    /// `(u, v)` as a dense tensor `coef[k][l]` of `u^k v^l`.
    pub fn affine_tensor(&self, a: f64, b: f64, c: f64, e: f64) -> Vec<Vec<f64>> {
        let m = self.degree_in(Axis::X).max(0) as usize;
        let n = self.degree_in(Axis::Y).max(0) as usize;
        let mut out = vec![vec![0.0; n + 1]; m + 1];
        for t in &self.terms {
            let (i, j) = (t.i as usize, t.j as usize);
            // (a + b u)^i = sum_k C(i,k) a^(i-k) b^k u^k
            for k in 0..=i {
                let ck = binom(i, k) * a.powi((i - k) as i32) * b.powi(k as i32);
                if ck == 0.0 {
                    continue;
                }
                for l in 0..=j {
                    let cl = binom(j, l) * c.powi((j - l) as i32) * e.powi(l as i32);
                    out[k][l] += t.c * ck * cl;
                }
            }
        }
        out
    }

    /// Divides by `divisor` using the graded order, returning
    /// `(quotient, remainder)` with `self = quotient * divisor + remainder`.
    ///
    /// Coefficients whose magnitude falls below `drop_tol` during elimination
    /// are discarded so that floating-point cancellation terminates.
    pub fn div_rem(&self, divisor: &Poly2, drop_tol: f64) -> (Poly2, Poly2) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let lead = *divisor.terms.last().unwrap();
        let mut work = self.clone();
        let mut quot = Vec::new();
        let mut rem = Vec::new();
        while let Some(&t) = work.terms.last() {
            if t.i >= lead.i && t.j >= lead.j {
                let q = Term {
                    i: t.i - lead.i,
                    j: t.j - lead.j,
                    c: t.c / lead.c,
                };
                quot.push(q);
                let sub = divisor * &Poly2::from_terms([q]);
                work = &work - &sub;
                // The leading term cancels exactly in exact arithmetic.
                work.terms.retain(|w| !(w.i == t.i && w.j == t.j));
                work.terms.retain(|w| w.c.abs() > drop_tol);
            } else {
                rem.push(t);
                work.terms.pop();
            }
        }
        (Poly2::from_terms(quot), Poly2::from_terms(rem))
    }
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for t in 0..k {
        r = r * (n - t) as f64 / (t + 1) as f64;
    }
    r
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, o: &Poly2) -> Poly2 {
        Poly2::from_terms(self.terms.iter().chain(o.terms.iter()).copied())
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, o: &Poly2) -> Poly2 {
        Poly2::from_terms(
            self.terms
                .iter()
                .copied()
                .chain(o.terms.iter().map(|t| Term { c: -t.c, ..*t })),
        )
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, o: &Poly2) -> Poly2 {
        let mut v = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                v.push(Term {
                    i: a.i + b.i,
                    j: a.j + b.j,
                    c: a.c * b.c,
                });
            }
        }
        Poly2::from_terms(v)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly2 {
            type Output = Poly2;
            fn $m(self, o: Poly2) -> Poly2 {
                (&self).$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", if t.c < 0.0 { '-' } else { '+' })?;
            } else if t.c < 0.0 {
                write!(f, "-")?;
            }
            write!(f, "{}", t.c.abs())?;
            match t.i {
                0 => {}
                1 => write!(f, "*x")?,
                i => write!(f, "*x^{i}")?,
            }
            match t.j {
                0 => {}
                1 => write!(f, "*y")?,
                j => write!(f, "*y^{j}")?,
            }
        }
        Ok(())
    }
}

/// Dense coefficient table for fast repeated evaluation of a [`Poly2`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dense2 {
    /// `c[i * w + j]` is the coefficient of `x^i y^j`.
    c: Vec<f64>,
    w: usize,
    h: usize,
}

impl Dense2 {
    pub fn new(p: &Poly2) -> Self {
        let h = (p.degree_in(Axis::X) + 1).max(1) as usize;
        let w = (p.degree_in(Axis::Y) + 1).max(1) as usize;
        let mut c = vec![0.0; w * h];
        for t in p.terms() {
            c[t.i as usize * w + t.j as usize] += t.c;
        }
        Dense2 { c, w, h }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for i in (0..self.h).rev() {
            let row = &self.c[i * self.w..(i + 1) * self.w];
            let mut r = 0.0;
            for &cj in row.iter().rev() {
                r = r * y + cj;
            }
            acc = acc * x + r;
        }
        acc
    }
}

/// A real root located by [`Poly1::real_roots`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `false` when `|p'(x)|` is below the multiplicity threshold.
    pub simple: bool,
}

/// Dense univariate polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly1 {
    coeffs: Vec<f64>,
}

const BISECT_TOL: f64 = 1e-12;
/// `|p'(x0)|` below this marks a root as non-simple.
pub const MULTIPLE_ROOT_TOL: f64 = 1e-9;

impl Poly1 {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly1 { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> i32 {
        self.coeffs.len() as i32 - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly1 {
        Poly1::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, o: &Poly1) -> Poly1 {
        if self.is_zero() || o.is_zero() {
            return Poly1::default();
        }
        let mut c = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (a, &ca) in self.coeffs.iter().enumerate() {
            for (b, &cb) in o.coeffs.iter().enumerate() {
                c[a + b] += ca * cb;
            }
        }
        Poly1::new(c)
    }

    pub fn sub(&self, o: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(o.coeffs.len());
        let c = (0..n)
            .map(|k| self.coeffs.get(k).copied().unwrap_or(0.0) - o.coeffs.get(k).copied().unwrap_or(0.0))
            .collect();
        Poly1::new(c)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Cauchy bound: every real root lies in `[-B, B]`.
    pub fn cauchy_bound(&self) -> f64 {
        match self.coeffs.last() {
            None => 0.0,
            Some(&lead) => {
                let m = self.coeffs[..self.coeffs.len() - 1]
                    .iter()
                    .fold(0.0f64, |m, c| m.max((c / lead).abs()));
                1.0 + m
            }
        }
    }

    /// All real roots, located through the Cauchy bound.
    pub fn all_real_roots(&self) -> Vec<Root> {
        let b = self.cauchy_bound();
        self.real_roots(-b, b)
    }

    /// Real roots in `[lo, hi]`, ascending.
    ///
    /// Critical points of `p` (roots of `p'`, found recursively) split the
    /// interval into monotone pieces; a piece holds a root iff its endpoint
    /// values differ in sign, and that root is refined by bisection. A
    /// critical point where `p` is numerically zero is a multiple root.
    pub fn real_roots(&self, lo: f64, hi: f64) -> Vec<Root> {
        if self.degree() < 1 {
            return Vec::new();
        }
        let dp = self.derivative();
        let mut pts = vec![lo];
        for r in dp.real_roots(lo, hi) {
            if r.x > lo && r.x < hi {
                pts.push(r.x);
            }
        }
        pts.push(hi);
        pts.dedup();

        let scale = self.max_abs_coeff();
        let mut out: Vec<f64> = Vec::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 {
                out.push(a);
            }
            if fa != 0.0 && fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
                out.push(self.polish(self.bisect(a, b, fa), &dp, a, b));
            }
        }
        if self.eval(hi) == 0.0 {
            out.push(hi);
        }
        // Touching roots at interior critical points.
        for &c in &pts[1..pts.len() - 1] {
            let mag = scale * (1.0 + c.abs()).powi(self.degree());
            if self.eval(c).abs() <= 1e-13 * mag {
                out.push(c);
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Simplicity is judged on the coefficient-normalized polynomial.
        let norm = scale.max(1e-300);
        let mut roots: Vec<Root> = Vec::new();
        for x in out {
            if let Some(last) = roots.last() {
                if (x - last.x).abs() <= 1e-9 * (1.0 + x.abs()) {
                    continue;
                }
            }
            let simple = (dp.eval(x) / norm).abs() > MULTIPLE_ROOT_TOL;
            roots.push(Root { x, simple });
        }
        roots
    }

    /// Newton steps that stay in `[a, b]` and strictly reduce `|p|`.
    fn polish(&self, mut x: f64, dp: &Poly1, a: f64, b: f64) -> f64 {
        let mut fx = self.eval(x).abs();
        for _ in 0..4 {
            if fx == 0.0 {
                break;
            }
            let d = dp.eval(x);
            if d == 0.0 {
                break;
            }
            let nx = x - self.eval(x) / d;
            if !(a..=b).contains(&nx) {
                break;
            }
            let nf = self.eval(nx).abs();
            if nf >= fx {
                break;
            }
            x = nx;
            fx = nf;
        }
        x
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (b - a) <= BISECT_TOL * (1.0 + m.abs()) || m == a || m == b {
                return m;
            }
            let fm = self.eval(m);
            if fm == 0.0 {
                return m;
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        let p = Poly2::from_coeffs(&[(0, 1, 2.0), (0, 0, -1.0)]);
        assert_eq!(p.eval(0.5, 0.5), 0.0);
        let q = Poly2::monomial(2, 1, 1.0);
        assert_eq!(q.eval(2.0, 3.0), 12.0);
        assert_eq!(Poly2::zero().eval(3.0, -7.0), 0.0);
        assert_eq!(Poly2::zero().degree(), -1);
    }

    #[test]
    fn partial_examples() {
        let p = Poly2::from_coeffs(&[(0, 1, 2.0), (0, 0, -1.0)]);
        assert_eq!(p.partial(Axis::Y), Poly2::constant(2.0));
        let q = Poly2::monomial(2, 1, 1.0);
        assert_eq!(q.partial(Axis::X), Poly2::monomial(1, 1, 2.0));
        assert!(Poly2::constant(5.0).partial(Axis::X).is_zero());
    }

    #[test]
    fn homogeneous_part_examples() {
        let p = Poly2::from_coeffs(&[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        assert_eq!(p.homogeneous_part(1), Poly2::monomial(0, 1, 2.0));
        assert_eq!(p.homogeneous_part(2), Poly2::monomial(1, 1, 3.0));
        assert!(p.homogeneous_part(7).is_zero());
    }

    #[test]
    fn json_form() {
        let p = Poly2::from_coeffs(&[(0, 1, 2.0), (0, 0, -1.0)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"terms":[{"i":0,"j":0,"c":-1.0},{"i":0,"j":1,"c":2.0}]}"#);
        let back: Poly2 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        // Zero coefficients in input are dropped, duplicates merged.
        let q: Poly2 =
            serde_json::from_str(r#"{"terms":[{"i":1,"j":0,"c":0.0},{"i":0,"j":0,"c":1.5},{"i":0,"j":0,"c":1.5}]}"#)
                .unwrap();
        assert_eq!(q, Poly2::constant(3.0));
    }

    #[test]
    fn division_exact() {
        let f = Poly2::from_coeffs(&[(0, 1, 2.0), (0, 0, -1.0)]);
        let xm1 = Poly2::from_coeffs(&[(1, 0, 1.0), (0, 0, -1.0)]);
        let n = &(&Poly2::x() * &xm1) * &f;
        let (q, r) = n.div_rem(&Poly2::x(), 1e-14);
        assert!(r.is_zero());
        assert_eq!(q, &xm1 * &f);
    }

    #[test]
    fn roots_simple_and_double() {
        // -4u^2: a double root at zero, flagged non-simple.
        let p = Poly1::new(vec![0.0, 0.0, -4.0]);
        let r = p.all_real_roots();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].x, 0.0);
        assert!(!r[0].simple);
        // u^2(u - 1)
        let q = Poly1::new(vec![0.0, 0.0, -1.0, 1.0]);
        let r = q.all_real_roots();
        assert_eq!(r.len(), 2);
        assert!(!r[0].simple && r[0].x.abs() < 1e-12);
        assert!(r[1].simple && (r[1].x - 1.0).abs() < 1e-12);
        // (x - 0.3)(x + 2)(x - 5)
        let c = Poly1::new(vec![-0.3, 1.0])
            .mul(&Poly1::new(vec![2.0, 1.0]))
            .mul(&Poly1::new(vec![-5.0, 1.0]));
        let xs: Vec<f64> = c.all_real_roots().iter().map(|r| r.x).collect();
        assert_eq!(xs.len(), 3);
        for (a, b) in xs.iter().zip([-2.0, 0.3, 5.0]) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(Poly1::new(vec![1.0, 0.0, 1.0]).all_real_roots().is_empty());
    }

    fn arb_poly2(max_deg: u32) -> impl Strategy<Value = Poly2> {
        proptest::collection::vec(((0..=max_deg), (0..=max_deg), -3.0f64..3.0), 0..10).prop_map(
            move |v| {
                Poly2::from_terms(
                    v.into_iter()
                        .filter(|&(i, j, _)| i + j <= max_deg)
                        .map(|(i, j, c)| Term { i, j, c }),
                )
            },
        )
    }

    proptest! {
        #[test]
        fn homogeneous_reconstruction(p in arb_poly2(5), x in -2.0f64..2.0, y in -2.0f64..2.0, t in -2.0f64..2.0) {
            let direct = p.eval(x, y);
            let mut sum = 0.0;
            let mut mag = 0.0;
            for k in 0..=5u32 {
                let part = p.homogeneous_part(k);
                sum += part.eval(x, y);
                mag += part.eval(x, y).abs();
                // homogeneity
                let lhs = part.eval(t * x, t * y);
                let rhs = t.powi(k as i32) * part.eval(x, y);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
            }
            prop_assert!((sum - direct).abs() <= 1e-12 * (1.0 + mag));
        }

        #[test]
        fn partial_linear_and_mixed_commute(p in arb_poly2(4), q in arb_poly2(4)) {
            let lhs = (&p + &q).partial(Axis::X);
            let rhs = &p.partial(Axis::X) + &q.partial(Axis::X);
            let diff = &lhs - &rhs;
            prop_assert!(diff.max_abs_coeff() <= 1e-12);
            prop_assert_eq!(p.partial(Axis::X).partial(Axis::Y), p.partial(Axis::Y).partial(Axis::X));
        }

        #[test]
        fn json_round_trip(p in arb_poly2(4)) {
            let s = serde_json::to_string(&p).unwrap();
            let back: Poly2 = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
