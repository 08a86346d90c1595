//! Diplotori: unions of two twisted prisms ("ploids") over a regular n-gon,
//! their embeddability conditions, the closed-form modulus, and the inverse
//! problem of hitting a prescribed modulus within a family (n, d).

use crate::flat_mesh::{AbstractTriangulation, GeometricMesh};
use crate::moduli::Modulus;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiplotorusParams {
    pub n: i64,
    pub d: i64,
    pub a: f64,
    pub h: f64,
}

#[derive(Debug, Error)]
pub enum DiploError {
    #[error("height must satisfy h > 0 (got {0})")]
    NonPositiveHeight(f64),
    #[error("polygon must satisfy n > 4 (got {0}); n = 3 is a gasket, not a ploid")]
    TooFewSides(i64),
    #[error("shift must satisfy 2 ≤ |d| < n−2 (got d = {d}, n = {n})")]
    BadShift { n: i64, d: i64 },
    #[error("twist must satisfy d+1 < a < n−1 for d > 0 (got a = {a}, n = {n}, d = {d})")]
    BadTwistPositive { n: i64, d: i64, a: f64 },
    #[error("twist must satisfy 1−n < a < d−1 for d < 0 (got a = {a}, n = {n}, d = {d})")]
    BadTwistNegative { n: i64, d: i64, a: f64 },
    #[error("target modulus is not attainable in family (n = {n}, d = {d}): {reason}")]
    Infeasible { n: i64, d: i64, reason: String },
    #[error("τ₁ inversion is ambiguous in family (n = {n}, d = {d}): candidate twists {0:?}", .candidates)]
    AmbiguousBranch {
        n: i64,
        d: i64,
        candidates: Vec<f64>,
    },
}

impl DiplotorusParams {
    pub fn validate(&self) -> Result<(), DiploError> {
        let DiplotorusParams { n, d, a, h } = *self;
        if h <= 0.0 {
            return Err(DiploError::NonPositiveHeight(h));
        }
        if n <= 4 {
            return Err(DiploError::TooFewSides(n));
        }
        if !(2 <= d.abs() && d.abs() < n - 2) {
            return Err(DiploError::BadShift { n, d });
        }
        if d > 0 {
            if !(((d + 1) as f64) < a && a < (n - 1) as f64) {
                return Err(DiploError::BadTwistPositive { n, d, a });
            }
        } else if !(((1 - n) as f64) < a && a < (d - 1) as f64) {
            return Err(DiploError::BadTwistNegative { n, d, a });
        }
        Ok(())
    }
}

/// Build the diplotorus D_{n,d}^{a,h}: A_k = (e^{i2πk/n}, 0) on the base
/// circle, B_k = (e^{iπ(a+1+2k)/n}, h) above, with interior ploid faces
/// {A_k A_{k+1} B_k}, {B_k A_{k+1} B_{k+1}} and exterior ploid faces
/// {A_k A_{k+1} B_{k−d}}, {B_{k−d} A_{k+1} B_{k+1−d}}.
pub fn build_diplotorus(p: DiplotorusParams) -> Result<GeometricMesh, DiploError> {
    p.validate()?;
    let n = p.n as usize;
    let ni = p.n;
    let mut position = Vec::with_capacity(2 * n);
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / ni as f64;
        position.push(Point3::new(t.cos(), t.sin(), 0.0));
    }
    for k in 0..n {
        let t = PI * (p.a + 1.0 + 2.0 * k as f64) / ni as f64;
        position.push(Point3::new(t.cos(), t.sin(), p.h));
    }
    let av = |k: i64| -> usize { k.rem_euclid(ni) as usize };
    let bv = |k: i64| -> usize { n + k.rem_euclid(ni) as usize };
    let mut triangles = Vec::with_capacity(4 * n);
    for k in 0..ni {
        // Orientations chosen so every directed edge occurs exactly once,
        // with the global orientation matching the sign convention of the
        // closed-form modulus.
        triangles.push([av(k + 1), av(k), bv(k)]);
        triangles.push([bv(k), bv(k + 1), av(k + 1)]);
        triangles.push([av(k), av(k + 1), bv(k - p.d)]);
        triangles.push([bv(k + 1 - p.d), bv(k - p.d), av(k + 1)]);
    }
    let base = AbstractTriangulation::from_triangles(2 * n, triangles)
        .expect("diplotorus gluing is unambiguous for 2 ≤ |d| < n−2");
    Ok(GeometricMesh { base, position })
}

/// Closed-form modulus of D_{n,d}^{a,h} (independent validation target for
/// the development oracle). τ₁ does not depend on h; τᵢ is strictly
/// increasing in h.
pub fn modulus_formula(p: DiplotorusParams) -> Result<Modulus, DiploError> {
    p.validate()?;
    Ok(modulus_unchecked(p.n, p.d, p.a, p.h))
}

fn modulus_unchecked(n: i64, d: i64, a: f64, h: f64) -> Modulus {
    Modulus::new(tau1_formula(n, d, a), tau_i_formula(n, d, a, h))
        .expect("diplotorus modulus lies in the upper half-plane")
}

pub fn tau1_formula(n: i64, d: i64, a: f64) -> f64 {
    let nf = n as f64;
    let df = d as f64;
    df / nf - ((a - df) * PI / nf).cos() * (df * PI / nf).sin() / (nf * (PI / nf).sin())
}

pub fn tau_i_formula(n: i64, d: i64, a: f64, h: f64) -> f64 {
    let nf = n as f64;
    let df = d as f64;
    let s = |x: f64| (x * PI / (2.0 * nf)).sin();
    let t1 = (h * h + 4.0 * s(a + 1.0).powi(2) * s(a - 1.0).powi(2)).sqrt();
    let t2 = (h * h
        + 4.0 * s(a - 2.0 * df + 1.0).powi(2) * s(a - 2.0 * df - 1.0).powi(2))
    .sqrt();
    (t1 + t2) / (2.0 * nf * (PI / nf).sin())
}

/// Find (a, h) with modulus_formula(n, d, a, h) = τ. τ₁ is inverted first
/// (it does not depend on h), then h by bisection using monotonicity of τᵢ.
pub fn solve_params(n: i64, d: i64, tau: Modulus) -> Result<DiplotorusParams, DiploError> {
    let (a_lo, a_hi) = if d > 0 {
        ((d + 1) as f64, (n - 1) as f64)
    } else {
        ((1 - n) as f64, (d - 1) as f64)
    };
    let margin = 1e-12 * (a_hi - a_lo);
    let f = |a: f64| tau1_formula(n, d, a) - tau.re;

    // Audit monotonicity of τ₁ on the legal interval; bisection on the
    // monotone branch, grid-then-refine fallback otherwise.
    let samples = 256;
    let mut monotone_sign = 0i32;
    let mut monotone = true;
    let mut prev = f(a_lo + margin);
    for i in 1..=samples {
        let a = a_lo + (a_hi - a_lo) * i as f64 / samples as f64;
        let cur = f((a - margin).min(a_hi - margin));
        let s = (cur - prev).signum() as i32;
        if s != 0 {
            if monotone_sign == 0 {
                monotone_sign = s;
            } else if s != monotone_sign {
                monotone = false;
            }
        }
        prev = cur;
    }

    let a = if monotone {
        let (mut lo, mut hi) = (a_lo + margin, a_hi - margin);
        let (flo, fhi) = (f(lo), f(hi));
        if flo * fhi > 0.0 {
            return Err(DiploError::Infeasible {
                n,
                d,
                reason: format!("τ₁ = {} outside attainable range [{:.6}, {:.6}]", tau.re,
                    tau1_formula(n, d, a_lo).min(tau1_formula(n, d, a_hi)),
                    tau1_formula(n, d, a_lo).max(tau1_formula(n, d, a_hi))),
            });
        }
        if flo > 0.0 {
            std::mem::swap(&mut lo, &mut hi);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        // Grid scan for all sign-change brackets, refine each; error if the
        // inverse is genuinely ambiguous.
        let mut roots: Vec<f64> = Vec::new();
        let grid = 4096;
        let mut pa = a_lo + margin;
        let mut pv = f(pa);
        for i in 1..=grid {
            let ca = a_lo + margin + (a_hi - a_lo - 2.0 * margin) * i as f64 / grid as f64;
            let cv = f(ca);
            if pv == 0.0 || pv * cv < 0.0 {
                let (mut lo, mut hi) = if pv <= 0.0 { (pa, ca) } else { (ca, pa) };
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) <= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            pa = ca;
            pv = cv;
        }
        roots.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
        match roots.len() {
            0 => {
                return Err(DiploError::Infeasible {
                    n,
                    d,
                    reason: format!("τ₁ = {} not attained on the legal twist interval", tau.re),
                })
            }
            1 => roots[0],
            _ => {
                return Err(DiploError::AmbiguousBranch {
                    n,
                    d,
                    candidates: roots,
                })
            }
        }
    };

    // h: τᵢ(a, ·) is strictly increasing from its h → 0⁺ limit.
    let floor = tau_i_formula(n, d, a, 0.0);
    if tau.im <= floor + 1e-14 {
        return Err(DiploError::Infeasible {
            n,
            d,
            reason: format!(
                "τᵢ = {} at or below the h→0 boundary value {floor}",
                tau.im
            ),
        });
    }
    let g = |h: f64| tau_i_formula(n, d, a, h) - tau.im;
    let mut hi = 1.0f64;
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(DiploError::Infeasible {
                n,
                d,
                reason: format!("τᵢ = {} not reached for any height", tau.im),
            });
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = 0.5 * (lo + hi);
    let p = DiplotorusParams { n, d, a, h };
    p.validate()?;
    Ok(p)
}
