//! The square polycycle formed by the boundary of the unit square.

use crate::model::EssField;
use crate::singular::{classify_jacobian, corner_jacobian, Corner, Kind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default genericity threshold on `|r - 1|`.
pub const TOL_GENERIC: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PolycycleError {
    #[error("edge {0} of the square is identically singular")]
    EdgeRootUnresolved(&'static str),
    #[error("corner {0:?} is not a hyperbolic saddle")]
    ZeroDenominator(Corner),
    #[error("the square is not a polycycle")]
    NoPolycycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "CCW")]
    Ccw,
    #[serde(rename = "CW")]
    Cw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolycycleStability {
    StableInside,
    UnstableInside,
    NonGeneric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleRatio {
    pub corner: Corner,
    /// Negative eigenvalue.
    pub mu: f64,
    /// Positive eigenvalue.
    pub nu: f64,
    /// `|mu| / nu`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolycycleReport {
    pub exists: bool,
    pub orientation: Option<Orientation>,
    pub saddles: Vec<SaddleRatio>,
    /// Product of the per-saddle ratios.
    pub ratio: Option<f64>,
    /// Closed corner-value form evaluated on the counterclockwise
    /// representative (`X` or `-X`).
    pub corner_form: Option<f64>,
    pub generic: bool,
    pub predicted_stability: Option<PolycycleStability>,
    pub tol_generic: f64,
    /// Why the square is not a polycycle, when it is not.
    pub reason: Option<String>,
}

impl PolycycleReport {
    fn absent(reason: impl Into<String>, tol_generic: f64) -> Self {
        PolycycleReport {
            exists: false,
            orientation: None,
            saddles: Vec::new(),
            ratio: None,
            corner_form: None,
            generic: true,
            predicted_stability: None,
            tol_generic,
            reason: Some(reason.into()),
        }
    }
}

/// Corner values `[g00 f10 g11 f01] / [f00 g10 f11 g01]`.
pub fn corner_value_form(x: &EssField) -> Result<f64, PolycycleError> {
    let (f, g) = (x.f(), x.g());
    let den = [
        (f.eval(0.0, 0.0), Corner::C00),
        (g.eval(1.0, 0.0), Corner::C10),
        (f.eval(1.0, 1.0), Corner::C11),
        (g.eval(0.0, 1.0), Corner::C01),
    ];
    for &(v, c) in &den {
        if v == 0.0 {
            return Err(PolycycleError::ZeroDenominator(c));
        }
    }
    let num = g.eval(0.0, 0.0) * f.eval(1.0, 0.0) * g.eval(1.0, 1.0) * f.eval(0.0, 1.0);
    Ok(num / (den[0].0 * den[1].0 * den[2].0 * den[3].0))
}

/// Coefficient form of the ratio for `d = 1`, with
/// `f = a00 + a10 x + a01 y` and `g = b00 + b10 x + b01 y`.
pub fn coefficient_form_d1(x: &EssField) -> Option<f64> {
    if x.d() != 1 {
        return None;
    }
    let (f, g) = (x.f(), x.g());
    let (a00, a10, a01) = (f.coeff(0, 0), f.coeff(1, 0), f.coeff(0, 1));
    let (b00, b10, b01) = (g.coeff(0, 0), g.coeff(1, 0), g.coeff(0, 1));
    let gb = b00 * (b00 + b10 + b01) / ((b00 + b10) * (b00 + b01));
    let fa = (a00 + a10) * (a00 + a01) / (a00 * (a00 + a10 + a01));
    Some(gb * fa)
}

fn saddle_ratios(x: &EssField, tol_hyp: f64) -> Result<Vec<SaddleRatio>, Corner> {
    let mut out = Vec::with_capacity(4);
    for c in Corner::ALL {
        let j = corner_jacobian(x, c);
        let s = classify_jacobian(j, tol_hyp);
        if s.kind != Kind::HyperbolicSaddle {
            return Err(c);
        }
        let (a, b) = (j[0][0], j[1][1]);
        let (mu, nu) = if a < 0.0 { (a, b) } else { (b, a) };
        out.push(SaddleRatio {
            corner: c,
            mu,
            nu,
            ratio: mu.abs() / nu,
        });
    }
    Ok(out)
}

/// Product of `|mu_i| / nu_i` over the four corner saddles.
pub fn hyperbolicity_ratio(x: &EssField, tol_hyp: f64) -> Result<f64, PolycycleError> {
    let s = saddle_ratios(x, tol_hyp).map_err(PolycycleError::ZeroDenominator)?;
    Ok(s.iter().map(|r| r.ratio).product())
}

/// Stability of the polycycle from the inside, given the ratio `r` of the
/// counterclockwise representative. For a clockwise polycycle that
/// representative is the time-reversed field, so the verdict is flipped.
pub fn predict_stability(r: f64, orientation: Orientation, tol: f64) -> PolycycleStability {
    let v = if r > 1.0 + tol {
        PolycycleStability::StableInside
    } else if r < 1.0 - tol {
        PolycycleStability::UnstableInside
    } else {
        PolycycleStability::NonGeneric
    };
    match (orientation, v) {
        (Orientation::Cw, PolycycleStability::StableInside) => PolycycleStability::UnstableInside,
        (Orientation::Cw, PolycycleStability::UnstableInside) => PolycycleStability::StableInside,
        _ => v,
    }
}

pub fn detect_square_polycycle(x: &EssField, tol_hyp: f64, tol_generic: f64) -> Result<PolycycleReport, PolycycleError> {
    let saddles = match saddle_ratios(x, tol_hyp) {
        Ok(s) => s,
        Err(c) => return Ok(PolycycleReport::absent(format!("corner {c:?} is not a hyperbolic saddle"), tol_generic)),
    };
    let (f, g) = (x.f(), x.g());
    // (edge name, restriction, sign required for counterclockwise flow)
    let edges = [
        ("y=0", f.restrict_y(0.0), -1.0),
        ("y=1", f.restrict_y(1.0), 1.0),
        ("x=0", g.restrict_x(0.0), 1.0),
        ("x=1", g.restrict_x(1.0), -1.0),
    ];
    let mut ccw = true;
    let mut cw = true;
    for (name, p, sign) in &edges {
        if p.is_zero() {
            return Err(PolycycleError::EdgeRootUnresolved(name));
        }
        let interior = p.real_roots(0.0, 1.0).into_iter().any(|r| r.x > 0.0 && r.x < 1.0);
        if interior {
            return Ok(PolycycleReport::absent(format!("edge {name} carries a singular point"), tol_generic));
        }
        let s = p.eval(0.5).signum();
        ccw &= s == *sign;
        cw &= s == -*sign;
    }
    let orientation = match (ccw, cw) {
        (true, _) => Orientation::Ccw,
        (_, true) => Orientation::Cw,
        _ => return Ok(PolycycleReport::absent("edge directions are inconsistent", tol_generic)),
    };
    let ratio: f64 = saddles.iter().map(|r| r.ratio).product();
    let representative = match orientation {
        Orientation::Ccw => x.clone(),
        Orientation::Cw => x.reversed(),
    };
    let corner_form = corner_value_form(&representative).ok();
    let rep_ratio = match orientation {
        Orientation::Ccw => ratio,
        Orientation::Cw => 1.0 / ratio,
    };
    let generic = (ratio - 1.0).abs() > tol_generic;
    Ok(PolycycleReport {
        exists: true,
        orientation: Some(orientation),
        saddles,
        ratio: Some(ratio),
        corner_form,
        generic,
        predicted_stability: Some(predict_stability(rep_ratio, orientation, tol_generic)),
        tol_generic,
        reason: None,
    })
}
