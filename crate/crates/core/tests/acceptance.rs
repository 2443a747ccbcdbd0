//! Acceptance criteria, one test per criterion.
//!
//! Each test prints a single `criterion N: PASS|FAIL ...` line with the
//! measured quantities; run with `--nocapture` to see them.

use ess_stab::certify::{analyze, density_experiment, CertifyOptions, DensityOptions, DensityStats, Overall, Verdict};
use ess_stab::compactify::{chart_field, infinity_polynomial, infinity_singularities, Chart, InfinitySingularity};
use ess_stab::cycles::{cycle_hyperbolicity, displacement, return_map, FnField, ReturnOptions, Section};
use ess_stab::model::{distance, monomial_count, simulate_2d, simulate_4d, EssField, PayoffGame};
use ess_stab::ode::Tolerances;
use ess_stab::perturb::{melnikov_derivative, rotate_family, wedge_density, SaddleConnection};
use ess_stab::poly::Poly2;
use ess_stab::polycycle::{coefficient_form_d1, corner_value_form, detect_square_polycycle, hyperbolicity_ratio, TOL_GENERIC};
use ess_stab::singular::{
    corner_jacobian, find_finite_singularities, index_sum, Corner, Kind, Rect, Singularity, TOL_HYPERBOLIC,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

fn report(k: u32, ok: bool, detail: String) {
    println!("criterion {k}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {k} failed: {detail}");
}

fn random_field(rng: &mut ChaCha20Rng, d: u32) -> EssField {
    let v: Vec<f64> = (0..2 * monomial_count(d)).map(|_| rng.sample(StandardNormal)).collect();
    EssField::from_coefficient_vector(d, &v).unwrap()
}

/// Winding number of `v` along the circle of radius `rho` around `c`.
/// Arcs are bisected until each turns by at most an eighth of a turn.
fn winding(v: impl Fn(f64, f64) -> (f64, f64), c: (f64, f64), rho: f64) -> Option<i32> {
    let ang = |t: f64| {
        let (a, b) = v(c.0 + rho * t.cos(), c.1 + rho * t.sin());
        b.atan2(a)
    };
    fn wrap(mut d: f64) -> f64 {
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        d
    }
    fn arc(ang: &dyn Fn(f64) -> f64, t0: f64, a0: f64, t1: f64, a1: f64, depth: u32) -> Option<f64> {
        let d = wrap(a1 - a0);
        if d.abs() <= PI / 4.0 {
            return Some(d);
        }
        if depth == 0 {
            return None;
        }
        let tm = 0.5 * (t0 + t1);
        let am = ang(tm);
        Some(arc(ang, t0, a0, tm, am, depth - 1)? + arc(ang, tm, am, t1, a1, depth - 1)?)
    }
    let n = 256;
    let mut total = 0.0;
    for k in 0..n {
        let (t0, t1) = (2.0 * PI * k as f64 / n as f64, 2.0 * PI * (k + 1) as f64 / n as f64);
        total += arc(&ang, t0, ang(t0), t1, ang(t1), 60)?;
    }
    Some((total / (2.0 * PI)).round() as i32)
}

fn min_gap(c: (f64, f64), others: &[(f64, f64)]) -> f64 {
    others
        .iter()
        .map(|o| (o.0 - c.0).hypot(o.1 - c.1))
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Finite points seen in the chart coordinates of `chart`.
fn chart_images(fin: &[Singularity], chart: Chart) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for s in fin {
        let (x, y) = s.finite_xy().unwrap();
        let (num, den) = match chart.base() {
            Chart::U1 => (y, x),
            _ => (x, y),
        };
        if den != 0.0 {
            out.push((num / den, 1.0 / den));
            out.push((num / den, -1.0 / den));
        }
    }
    out
}

#[test]
fn criterion_01_reduction_equivalence() {
    let t0 = Instant::now();
    let game = PayoffGame::matching_pennies();
    let tol = Tolerances { rtol: 1e-12, atol: 1e-14 };
    let four = simulate_4d(&game, [0.3, 0.7, 0.6, 0.4], 10.0, tol).unwrap();
    let times: Vec<f64> = four.iter().map(|s| s.t).collect();
    let two = simulate_2d(&EssField::matching_pennies(), (0.3, 0.6), &times, tol).unwrap();
    let dev = four
        .iter()
        .zip(&two)
        .map(|(a, b)| (a.state[0] - b[0]).abs().max((a.state[2] - b[1]).abs()))
        .fold(0.0, f64::max);
    let covered = times.last().copied().unwrap_or(0.0) >= 10.0;
    let el = t0.elapsed();
    report(
        1,
        covered && dev <= 1e-6 && el < Duration::from_secs(1),
        format!("max deviation {dev:.3e} over {} samples, {el:?}", times.len()),
    );
}

#[test]
fn criterion_02_matching_pennies() {
    let x = EssField::matching_pennies();
    let fin = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC).unwrap();
    let (f, g) = (x.f(), x.g());
    let mut jac_err: f64 = 0.0;
    let mut corners_ok = true;
    for c in Corner::ALL {
        let (cx, cy) = c.xy();
        let s = fin.iter().find(|s| s.finite_xy() == Some((cx, cy)));
        corners_ok &= s.is_some_and(|s| s.kind == Kind::HyperbolicSaddle);
        let sx = if cx == 0.0 { -1.0 } else { 1.0 };
        let sy = if cy == 0.0 { -1.0 } else { 1.0 };
        let want = [[sx * f.eval(cx, cy), 0.0], [0.0, sy * g.eval(cx, cy)]];
        let got = corner_jacobian(&x, c);
        for i in 0..2 {
            for j in 0..2 {
                jac_err = jac_err.max((got[i][j] - want[i][j]).abs());
            }
        }
        if let Some(s) = s {
            for i in 0..2 {
                for j in 0..2 {
                    jac_err = jac_err.max((s.jacobian[i][j] - want[i][j]).abs());
                }
            }
        }
    }
    let centre = fin.iter().find(|s| {
        let (a, b) = s.finite_xy().unwrap();
        (a - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-12
    });
    let centre_ok = centre.is_some_and(|s| s.kind == Kind::DegenerateMonodromic);
    let r = hyperbolicity_ratio(&x, TOL_HYPERBOLIC).unwrap();
    let a = analyze(&x, &CertifyOptions::default());
    let cert = &a.certificate;
    let cert_ok = cert.overall == Overall::NotInPd
        && matches!(cert.a_prime, Verdict::Fail(_))
        && matches!(cert.d_prime, Verdict::Fail(_));
    let fpoly = infinity_polynomial(&x, Chart::U1).unwrap();
    let roots = fpoly.all_real_roots();
    let double_at_zero = roots.iter().any(|r| r.x == 0.0 && !r.simple)
        && fpoly.eval(0.0) == 0.0
        && fpoly.derivative().eval(0.0) == 0.0;
    let inf = infinity_singularities(&x, TOL_HYPERBOLIC).unwrap();
    let reported = inf
        .iter()
        .any(|s| s.chart == Chart::U1 && s.u0 == 0.0 && !s.simple_root && !s.singularity.kind.is_hyperbolic());
    let ok = fin.len() == 5
        && corners_ok
        && jac_err <= 1e-12
        && centre_ok
        && (r - 1.0).abs() <= 1e-12
        && cert_ok
        && double_at_zero
        && reported;
    report(
        2,
        ok,
        format!(
            "{} finite points, corner jacobian error {jac_err:.1e}, r = {r}, overall {:?}, double root at 0: {}",
            fin.len(),
            cert.overall,
            double_at_zero && reported
        ),
    );
}

#[test]
fn criterion_03_cycle_oracle() {
    let t0 = Instant::now();
    let field = FnField(
        |p: [f64; 2]| {
            let k = 1.0 - p[0] * p[0] - p[1] * p[1];
            [-p[1] + p[0] * k, p[0] + p[1] * k]
        },
        |p: [f64; 2]| 2.0 - 4.0 * (p[0] * p[0] + p[1] * p[1]),
    );
    let sec = Section::new([0.0, 0.0], [1.0, 0.0], 3.0);
    let opts = ReturnOptions::default();
    // Bracket the sign change of the displacement along the section, then bisect.
    let grid: Vec<f64> = (1..=25).map(|k| 0.1 * k as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| displacement(&field, &sec, s, &opts).unwrap()).collect();
    let k = (0..grid.len() - 1).find(|&k| vals[k] * vals[k + 1] < 0.0).expect("no sign change");
    let (mut lo, mut hi, mut dlo) = (grid[k], grid[k + 1], vals[k]);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let dm = displacement(&field, &sec, mid, &opts).unwrap();
        if dm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if dm * dlo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            dlo = dm;
        }
    }
    let s_star = 0.5 * (lo + hi);
    let rec = cycle_hyperbolicity(&field, &sec, s_star, &opts).unwrap();
    let slope_rel = (rec.r_gamma.exp() - rec.slope).abs() / rec.slope.abs();
    let el = t0.elapsed();
    let ok = (s_star - 1.0).abs() < 1e-6
        && (rec.period - 2.0 * PI).abs() <= 1e-6
        && (rec.r_gamma + 4.0 * PI).abs() <= 1e-3
        && slope_rel <= 1e-3
        && el < Duration::from_secs(5);
    report(
        3,
        ok,
        format!(
            "radius {s_star:.9}, period error {:.2e}, r(gamma) error {:.2e}, slope rel error {slope_rel:.2e}, {el:?}",
            (rec.period - 2.0 * PI).abs(),
            (rec.r_gamma + 4.0 * PI).abs()
        ),
    );
}

#[test]
fn criterion_04_index_machinery() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (mut accepted, mut draws) = (0, 0);
    let mut failures = Vec::new();
    while accepted < 100 && draws < 10_000 {
        draws += 1;
        let x = random_field(&mut rng, 1);
        let Ok(fin) = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC) else {
            continue;
        };
        let Ok(inf) = infinity_singularities(&x, TOL_HYPERBOLIC) else {
            continue;
        };
        let hyperbolic = fin.iter().all(|s| s.kind.is_hyperbolic())
            && inf.iter().all(|s: &InfinitySingularity| s.singularity.kind.is_hyperbolic());
        if !hyperbolic {
            continue;
        }
        accepted += 1;
        let sum = index_sum(&fin, &inf).unwrap();
        if sum != 2 {
            failures.push(format!("draw {draws}: sum {sum}"));
        }
        let ev = x.evaluator();
        let pts: Vec<(f64, f64)> = fin.iter().map(|s| s.finite_xy().unwrap()).collect();
        for (s, &c) in fin.iter().zip(&pts) {
            let rho = (0.2 * min_gap(c, &pts)).min(1e-2 * (1.0 + c.0.abs().max(c.1.abs())));
            let w = winding(|a, b| (ev.vector(a, b)[0], ev.vector(a, b)[1]), c, rho);
            if w != s.index {
                failures.push(format!("draw {draws}: finite {c:?} winding {w:?} index {:?}", s.index));
            }
        }
        for s in &inf {
            let cf = chart_field(&x, s.chart);
            let mut near = chart_images(&fin, s.chart);
            near.extend(inf.iter().filter(|o| o.chart == s.chart).map(|o| (o.u0, 0.0)));
            let c = (s.u0, 0.0);
            let rho = (0.2 * min_gap(c, &near)).min(1e-2);
            let w = winding(|u, v| cf.eval(u, v), c, rho);
            if w != s.singularity.index {
                failures.push(format!(
                    "draw {draws}: {:?} u = {} winding {w:?} index {:?}",
                    s.chart, s.u0, s.singularity.index
                ));
            }
        }
    }
    report(
        4,
        accepted == 100 && failures.is_empty(),
        format!("{accepted} hyperbolic fields from {draws} draws, mismatches {failures:?}"),
    );
}

#[test]
fn criterion_05_ratio_identity() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (mut accepted, mut draws) = (0, 0);
    let (mut form_err, mut eig_err, mut rev_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    while accepted < 1000 && draws < 1_000_000 {
        draws += 1;
        let x = random_field(&mut rng, 1);
        let Ok(rep) = detect_square_polycycle(&x, TOL_HYPERBOLIC, TOL_GENERIC) else {
            continue;
        };
        if !rep.exists {
            continue;
        }
        accepted += 1;
        let ccw = if rep.orientation == Some(ess_stab::polycycle::Orientation::Ccw) {
            x.clone()
        } else {
            x.reversed()
        };
        let corner = corner_value_form(&ccw).unwrap();
        let coeff = coefficient_form_d1(&ccw).unwrap();
        form_err = form_err.max((corner - coeff).abs() / coeff.abs());
        let r = hyperbolicity_ratio(&ccw, TOL_HYPERBOLIC).unwrap();
        eig_err = eig_err.max((r - corner).abs() / corner.abs());
        let rr = hyperbolicity_ratio(&ccw.reversed(), TOL_HYPERBOLIC).unwrap();
        rev_err = rev_err.max((r * rr - 1.0).abs());
    }
    report(
        5,
        accepted == 1000 && form_err <= 1e-12 && eig_err <= 1e-12 && rev_err <= 1e-10,
        format!(
            "{accepted} sign-feasible sets from {draws} draws; corner vs coefficient {form_err:.1e}, \
             eigenvalue product {eig_err:.1e}, reversal product {rev_err:.1e}"
        ),
    );
}

/// `f = -1 + c x + 2y`, `g = 1 - 2x`.
fn tilted_pennies(c: f64) -> EssField {
    ess_stab::model::build_field(
        Poly2::from_coeffs(&[(0, 0, -1.0), (1, 0, c), (0, 1, 2.0)]),
        Poly2::from_coeffs(&[(0, 0, 1.0), (1, 0, -2.0)]),
        1,
    )
    .unwrap()
}

/// Distances to the edge `x = 1` at the start and after each of three
/// returns to the horizontal section through the interior singularity.
fn boundary_gaps(x: &EssField) -> Vec<f64> {
    let fin = find_finite_singularities(x, Rect::default(), TOL_HYPERBOLIC).unwrap();
    let (xc, yc) = fin
        .iter()
        .filter_map(|s| s.finite_xy())
        .find(|&(a, b)| a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0)
        .unwrap();
    let h = 1.0 - xc;
    let sec = Section::new([xc, yc], [1.0, 0.0], h);
    let ev = x.evaluator();
    let mut s = h - 1e-2;
    let mut out = vec![h - s];
    for _ in 0..3 {
        s = return_map(&ev, &sec, s, &ReturnOptions::default()).unwrap().s;
        out.push(h - s);
    }
    out
}

#[test]
fn criterion_06_polycycle_stability() {
    let mut stable = None;
    let mut unstable = None;
    for k in 1..=20 {
        for c in [-0.05 * k as f64, 0.05 * k as f64] {
            let x = tilted_pennies(c);
            let rep = detect_square_polycycle(&x, TOL_HYPERBOLIC, TOL_GENERIC).unwrap();
            if !rep.exists || rep.orientation != Some(ess_stab::polycycle::Orientation::Ccw) {
                continue;
            }
            let r = rep.ratio.unwrap();
            if r > 1.05 && stable.is_none() {
                stable = Some((c, r, x));
            } else if r < 0.95 && unstable.is_none() {
                unstable = Some((c, r, x));
            }
        }
    }
    let (cs, rs, xs) = stable.expect("no field with r > 1.05");
    let (cu, ru, xu) = unstable.expect("no field with r < 0.95");
    let gs = boundary_gaps(&xs);
    let gu = boundary_gaps(&xu);
    let approach = gs.windows(2).all(|w| w[1] < w[0]);
    let recede = gu.windows(2).all(|w| w[1] > w[0]);
    report(
        6,
        approach && recede,
        format!("c = {cs} r = {rs:.4} gaps {gs:?}; c = {cu} r = {ru:.4} gaps {gu:?}"),
    );
}

#[test]
fn criterion_07_wedge_melnikov() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut lambda_exact = true;
    let mut grid_ok = true;
    let mut min_h = f64::INFINITY;
    for _ in 0..20 {
        // Small integer coefficients keep every product exact.
        let v: Vec<f64> = (0..2 * monomial_count(2)).map(|_| rng.random_range(-9..=9) as f64).collect();
        let x = EssField::from_coefficient_vector(2, &v).unwrap();
        let h = wedge_density(&x, 1.0);
        for v in [0.0, 1.0] {
            lambda_exact &= h.restrict_x(v).is_zero() && h.restrict_y(v).is_zero();
        }
        for k in 1..=50 {
            for l in 1..=50 {
                let (a, b) = (k as f64 / 51.0, l as f64 / 51.0);
                let (fv, gv) = (x.f().eval(a, b), x.g().eval(a, b));
                if fv * fv + gv * gv > 1e-12 {
                    let hv = h.eval(a, b);
                    grid_ok &= hv > 0.0;
                    min_h = min_h.min(hv);
                }
            }
        }
    }
    let f = Poly2::from_coeffs(&[(2, 0, 1.0), (1, 0, -1.0), (0, 0, 2.0 / 9.0)]);
    let g = Poly2::from_coeffs(&[(0, 1, 1.0), (1, 1, -2.0), (0, 0, -0.5), (1, 0, 1.0)]);
    let x = ess_stab::model::build_field(f, g, 2).unwrap();
    let conn = SaddleConnection::find(&x, [1.0 / 3.0, 0.5], [2.0 / 3.0, 0.5], Tolerances::default()).unwrap();
    let base = melnikov_derivative(&x, 1.0, &conn).unwrap();
    let mut lin_err: f64 = 0.0;
    for eps in [0.1, 0.5, 2.0, 7.0] {
        let m = melnikov_derivative(&x, eps, &conn).unwrap();
        lin_err = lin_err.max((m - eps * base).abs() / (eps * base).abs());
    }
    report(
        7,
        lambda_exact && grid_ok && base != 0.0 && lin_err <= 1e-12,
        format!("zero on lines: {lambda_exact}, min interior H {min_h:.3e}, linearity error {lin_err:.1e}"),
    );
}

#[test]
fn criterion_08_rotation_metric() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut err: f64 = 0.0;
    let mut invariant = true;
    for k in 0..100 {
        let d = 1 + (k % 3) as u32;
        let x = random_field(&mut rng, d);
        let eps: f64 = rng.random_range(1e-3..1.0);
        let lambda: f64 = rng.random_range(-2.0..2.0);
        let y = rotate_family(&x, eps, lambda);
        let want = lambda.abs() * eps * (x.f().coeff_norm().powi(2) + x.g().coeff_norm().powi(2)).sqrt();
        let got = distance(&x, &y).unwrap();
        err = err.max((got - want).abs() / want);
        invariant &= y.lambda_invariant();
    }
    report(8, err <= 1e-12 && invariant, format!("max relative error {err:.1e}, invariant {invariant}"));
}

static SWEEP: OnceLock<(DensityStats, Duration)> = OnceLock::new();

fn sweep() -> &'static (DensityStats, Duration) {
    SWEEP.get_or_init(|| {
        let t0 = Instant::now();
        let s = density_experiment(&DensityOptions::new(1, 1000, 7, 1.0)).unwrap();
        (s, t0.elapsed())
    })
}

#[test]
fn criterion_09_density_probe() {
    let (s, el) = sweep();
    let frac = s.non_generic as f64 / s.samples as f64;
    let unprobed = s.in_pd - s.probe_eligible;
    let ok = frac <= 0.01
        && s.probes_per_sample == 20
        && s.probe_radius == 1e-4
        && s.probe_failures.is_empty()
        && s.probe_held == s.probe_eligible
        && *el < Duration::from_secs(600);
    report(
        9,
        ok,
        format!(
            "N = {}: InPd {} NotInPd {} Inconclusive {}; non-generic fraction {frac:.4}; \
             probe held {}/{} ({unprobed} InPd samples below the 10x margin); {el:?}",
            s.samples, s.in_pd, s.not_in_pd, s.inconclusive, s.probe_held, s.probe_eligible
        ),
    );
}

#[test]
fn criterion_10_at_most_one_cycle() {
    let (s, _) = sweep();
    let offenders: Vec<usize> = s.records.iter().filter(|r| r.cycles > 1).map(|r| r.index).collect();
    report(
        10,
        s.max_cycles <= 1 && offenders.is_empty(),
        format!("max cycles per field {}, offenders {offenders:?}", s.max_cycles),
    );
}
