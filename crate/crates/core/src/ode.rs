//! Adaptive Dormand–Prince 5(4) integrator with dense output.
//!
//! The state is a fixed-size array so the hot loops stay allocation free.
//! Integration may run forward or backward in time.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    StepBudget { t: f64 },
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for k in 0..N {
        let mut s = 0.0;
        for (a, v) in terms {
            s += a * v[k];
        }
        out[k] += h * s;
    }
    out
}

/// Stepping state of the integrator.
pub struct Dopri5<const N: usize, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    f: F,
    tol: Tolerances,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    dir: f64,
    h_max: f64,
    t_old: f64,
    y_old: [f64; N],
    h_old: f64,
    rcont: [[f64; N]; 5],
    pub evals: usize,
    pub max_steps: usize,
    steps: usize,
}

impl<const N: usize, F> Dopri5<N, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    /// `dir` is `+1.0` for forward and `-1.0` for backward integration.
    pub fn new(mut f: F, t0: f64, y0: [f64; N], dir: f64, tol: Tolerances) -> Self {
        let k1 = f(t0, &y0);
        let mut s = Dopri5 {
            f,
            tol,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            dir: dir.signum(),
            h_max: f64::INFINITY,
            t_old: t0,
            y_old: y0,
            h_old: 0.0,
            rcont: [[0.0; N]; 5],
            evals: 1,
            max_steps: 5_000_000,
            steps: 0,
        };
        s.h = s.initial_step();
        s
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self.h = self.h.min(h_max);
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    /// Derivative at the current point.
    pub fn dy(&self) -> &[f64; N] {
        &self.k1
    }

    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    pub fn y_prev(&self) -> &[f64; N] {
        &self.y_old
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let (mut d0, mut d1) = (0.0, 0.0);
        for k in 0..N {
            let sk = self.scale(self.y[k], self.y[k]);
            d0 += (self.y[k] / sk).powi(2);
            d1 += (self.k1[k] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = lin(&self.y, self.dir * h0, &[(1.0, &self.k1)]);
        let f1 = (self.f)(self.t + self.dir * h0, &y1);
        self.evals += 1;
        let mut d2 = 0.0;
        for k in 0..N {
            let sk = self.scale(self.y[k], self.y[k]);
            d2 += ((f1[k] - self.k1[k]) / sk).powi(2);
        }
        let d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// One plain Dormand–Prince step of size `h` from `(t, y)`, no error
    /// control. Used to re-integrate onto an event time.
    pub fn single_step(&mut self, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> [f64; N] {
        let f = &mut self.f;
        let k2 = f(t + C2 * h, &lin(y, h, &[(A21, k1)]));
        let k3 = f(t + C3 * h, &lin(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &lin(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &lin(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &lin(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        self.evals += 5;
        lin(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)])
    }

    /// Takes one accepted step, never passing `t_bound`.
    pub fn step(&mut self, t_bound: f64) -> Result<(), OdeError> {
        let remaining = (t_bound - self.t) * self.dir;
        if remaining <= 0.0 {
            return Ok(());
        }
        loop {
            self.steps += 1;
            if self.steps > self.max_steps {
                return Err(OdeError::StepBudget { t: self.t });
            }
            let mut habs = self.h.min(self.h_max);
            let remaining = (t_bound - self.t) * self.dir;
            let last = habs >= remaining;
            if last {
                habs = remaining;
            }
            if habs < 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(OdeError::StepSizeUnderflow { t: self.t });
            }
            let h = self.dir * habs;
            let (t, y, k1) = (self.t, self.y, self.k1);
            let f = &mut self.f;
            let k2 = f(t + C2 * h, &lin(&y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &lin(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &lin(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * h,
                &lin(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &lin(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let ynew = lin(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let t_new = if last { t_bound } else { t + h };
            let k7 = f(t_new, &ynew);
            self.evals += 6;

            let mut err = 0.0;
            let mut finite = true;
            for k in 0..N {
                let e = h * (E1 * k1[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k]);
                let sk = self.tol.atol + self.tol.rtol * y[k].abs().max(ynew[k].abs());
                err += (e / sk).powi(2);
                finite &= ynew[k].is_finite() && k7[k].is_finite();
            }
            let err = (err / N as f64).sqrt();
            if !finite || !err.is_finite() {
                if habs < 1e-14 * self.t.abs().max(1.0) {
                    return Err(OdeError::NonFinite { t: self.t });
                }
                self.h = habs * 0.2;
                continue;
            }
            if err <= 1.0 {
                for k in 0..N {
                    let ydiff = ynew[k] - y[k];
                    let bspl = h * k1[k] - ydiff;
                    self.rcont[0][k] = y[k];
                    self.rcont[1][k] = ydiff;
                    self.rcont[2][k] = bspl;
                    self.rcont[3][k] = ydiff - h * k7[k] - bspl;
                    self.rcont[4][k] =
                        h * (D1 * k1[k] + D3 * k3[k] + D4 * k4[k] + D5 * k5[k] + D6 * k6[k] + D7 * k7[k]);
                }
                self.t_old = t;
                self.y_old = y;
                self.h_old = h;
                self.t = t_new;
                self.y = ynew;
                self.k1 = k7;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = habs * fac;
                return Ok(());
            }
            self.h = habs * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    /// Replaces the current state (e.g. after a projection), keeping the
    /// step-size history.
    pub fn reset_state(&mut self, y: [f64; N]) {
        self.y = y;
        self.k1 = (self.f)(self.t, &y);
        self.evals += 1;
    }

    /// Dense-output interpolant on the last accepted step.
    pub fn dense(&self, t: f64) -> [f64; N] {
        if self.h_old == 0.0 {
            return self.y;
        }
        let th = (t - self.t_old) / self.h_old;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let mut out = [0.0; N];
        for k in 0..N {
            out[k] = r[0][k] + th * (r[1][k] + th1 * (r[2][k] + th * (r[3][k] + th1 * r[4][k])));
        }
        out
    }

    /// Advances to exactly `t_end`.
    pub fn integrate_to(&mut self, t_end: f64) -> Result<(), OdeError> {
        while (t_end - self.t) * self.dir > 0.0 {
            self.step(t_end)?;
        }
        Ok(())
    }

    /// Locates a sign change of `g` inside the last accepted step.
    ///
    /// Bisection on the dense interpolant brackets the crossing to `t_tol`;
    /// the returned state comes from a fresh Runge–Kutta step onto that time.
    pub fn locate_event<G>(&mut self, mut g: G, t_tol: f64) -> (f64, [f64; N])
    where
        G: FnMut(&[f64; N]) -> f64,
    {
        let (mut a, mut b) = (self.t_old, self.t);
        let ga = g(&self.y_old);
        for _ in 0..200 {
            if (b - a).abs() <= t_tol {
                break;
            }
            let m = 0.5 * (a + b);
            let gm = g(&self.dense(m));
            if gm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if (gm < 0.0) == (ga < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        let te = 0.5 * (a + b);
        let (t0, y0) = (self.t_old, self.y_old);
        let k0 = (self.f)(t0, &y0);
        self.evals += 1;
        let ye = self.single_step(t0, &y0, &k0, te - t0);
        (te, ye)
    }
}

/// Integrates from `t0` to `t1` and returns the final state.
pub fn integrate<const N: usize, F>(f: F, t0: f64, y0: [f64; N], t1: f64, tol: Tolerances) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut s = Dopri5::new(f, t0, y0, (t1 - t0).signum(), tol);
    s.integrate_to(t1)?;
    Ok(*s.y())
}

/// Integrates and records the state at every accepted step, including the
/// start point.
pub fn trajectory<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: Tolerances,
) -> Result<Vec<(f64, [f64; N])>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut s = Dopri5::new(f, t0, y0, (t1 - t0).signum(), tol);
    let mut out = vec![(t0, y0)];
    while (t1 - s.t()) * (t1 - t0).signum() > 0.0 {
        s.step(t1)?;
        out.push((s.t(), *s.y()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, Tolerances::default()).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-11);
        let back = integrate(|_, y: &[f64; 1]| [-y[0]], 5.0, y, 0.0, Tolerances::default()).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let y = integrate(f, 0.0, [1.0, 0.0], 2.0 * std::f64::consts::PI, Tolerances::default()).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn dense_output_accuracy() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut s = Dopri5::new(f, 0.0, [1.0, 0.0], 1.0, Tolerances::default());
        let mut worst: f64 = 0.0;
        while s.t() < 10.0 {
            s.step(10.0).unwrap();
            let (a, b) = (s.t_prev(), s.t());
            for q in 1..10 {
                let t = a + (b - a) * q as f64 / 10.0;
                let y = s.dense(t);
                worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
            }
        }
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn event_location() {
        // First zero of cos at pi/2.
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut s = Dopri5::new(f, 0.0, [1.0, 0.0], 1.0, Tolerances::default());
        loop {
            let before = s.y()[0];
            s.step(10.0).unwrap();
            if (before > 0.0) != (s.y()[0] > 0.0) {
                break;
            }
        }
        let (te, ye) = s.locate_event(|y| y[0], 1e-13);
        assert!((te - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!(ye[0].abs() < 1e-10);
    }
}
