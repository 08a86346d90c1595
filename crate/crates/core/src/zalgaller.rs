//! The long-torus origami: bends, gaskets, helical twists, and the closed
//! 270-triangle assembly for flat tori with large imaginary part.
//!
//! All pieces are portions of a right prism with equilateral cross-section
//! of side `rib`; each is isometric to a right cylinder of circumference
//! `3·rib`, so concatenating them and closing the loop realizes a flat torus
//! whose modulus is read off from the developed holonomy.

use crate::flat_mesh::{AbstractTriangulation, develop, GeometricMesh, MetricTriangulation};
use crate::moduli::{reduce_to_fundamental_domain, Modulus};
use nalgebra::{Point3, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Cutting angle used by all five bends of a helical twist.
pub fn lambda_twist() -> f64 {
    (49.0f64 / 40.0).atan()
}

/// Cutting angle used by the four right-angle corner bends of the assembly.
pub fn lambda_corner() -> f64 {
    (9.0f64 / 10.0).atan()
}

pub const DEFAULT_RIB: f64 = 1.0 / 3.0;
pub const DEFAULT_GASKET_HEIGHT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ZalgallerError {
    #[error("bending angle {0} outside (0, π)")]
    BendingAngleDomain(f64),
    #[error("cutting angle {lambda} not in (λ₀(φ), π/2) = ({min}, {max}) for φ = {phi}")]
    CuttingAngle { phi: f64, lambda: f64, min: f64, max: f64 },
    #[error("gasket turn {0} outside (−π/3, π)")]
    GasketTurn(f64),
    #[error("non-positive height {0}")]
    NonPositiveHeight(f64),
    #[error("twist angle {0} outside (−π, π]")]
    TwistAngleDomain(f64),
    #[error("geometric closure residual {0} exceeds tolerance")]
    ClosureResidual(f64),
    #[error("return bends infeasible: derived special gasket height {0} is not positive")]
    ReturnGasket(f64),
    #[error("imaginary part {tau_i} below the proven bound {min}; use the diplotorus route")]
    TooShort { tau_i: f64, min: f64 },
    #[error("intrinsic length budget infeasible: vertical prisms would have length {0}")]
    LengthBudget(f64),
    #[error("modulus solve failed to reach τ₁ = {target}; best residual {residual}")]
    ShiftUnreachable { target: f64, residual: f64 },
    #[error("internal geometric invariant violated: {0}")]
    Internal(String),
}

type ZResult<T> = Result<T, ZalgallerError>;

/// Threshold cutting angle λ₀(φ) = arctan((√3/2)·tan(φ/2)): bends with
/// cutting angle above it are embedded.
pub fn lambda0(phi: f64) -> ZResult<f64> {
    if !(phi > 0.0 && phi < PI) {
        return Err(ZalgallerError::BendingAngleDomain(phi));
    }
    Ok(((3.0f64.sqrt() / 2.0) * (phi / 2.0).tan()).atan())
}

/// A bend: a prism elbow between two cross-sections at angle φ, obtained by
/// folding the two cut triangles of the oblique cut at cutting angle λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendSpec {
    pub phi: f64,
    pub lambda: f64,
    pub rib: f64,
}

impl BendSpec {
    pub fn new(phi: f64, lambda: f64) -> Self {
        BendSpec { phi, lambda, rib: DEFAULT_RIB }
    }

    pub fn validate(&self) -> ZResult<()> {
        // φ = 0 (straight elbow, flat folds) is accepted as the degenerate
        // limit needed by twists of angle 0.
        if self.phi == 0.0 {
            if !(self.lambda > 0.0 && self.lambda < PI / 2.0) {
                return Err(ZalgallerError::CuttingAngle {
                    phi: self.phi,
                    lambda: self.lambda,
                    min: 0.0,
                    max: PI / 2.0,
                });
            }
            return Ok(());
        }
        let min = lambda0(self.phi)?;
        if !(self.lambda > min && self.lambda < PI / 2.0) {
            return Err(ZalgallerError::CuttingAngle {
                phi: self.phi,
                lambda: self.lambda,
                min,
                max: PI / 2.0,
            });
        }
        Ok(())
    }
}

/// A gasket: six congruent triangles joining two parallel triangular
/// sections at distance `h`, the top one turned by `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasketSpec {
    pub alpha: f64,
    pub h: f64,
    pub rib: f64,
}

impl GasketSpec {
    pub fn new(alpha: f64, h: f64) -> Self {
        GasketSpec { alpha, h, rib: DEFAULT_RIB }
    }

    pub fn validate(&self) -> ZResult<()> {
        if !(self.alpha > -PI / 3.0 && self.alpha < PI) {
            return Err(ZalgallerError::GasketTurn(self.alpha));
        }
        if !(self.h > 0.0) {
            return Err(ZalgallerError::NonPositiveHeight(self.h));
        }
        Ok(())
    }
}

/// Intrinsic length h̄ of the gasket with turn α and height h (rib 1/3).
pub fn gasket_length(alpha: f64, h: f64) -> ZResult<f64> {
    GasketSpec::new(alpha, h).validate()?;
    Ok(gasket_length_rib(alpha, h, DEFAULT_RIB))
}

/// Intrinsic gasket length for an arbitrary rib, by similarity with the
/// rib-1/3 formula.
pub fn gasket_length_rib(alpha: f64, h: f64, rib: f64) -> f64 {
    if alpha == 0.0 {
        // Straight prism; the correction terms of Eq. (2) cancel exactly.
        return h;
    }
    let scale = 3.0 * rib; // circumference; the base formula is for 3a = 1
    let hh = h / scale;
    let s1 = (alpha / 2.0).sin().powi(2);
    let s2 = (PI / 3.0 - alpha / 2.0).sin().powi(2);
    let sq = hh * hh + (2.0 / 27.0) * (s1 + s2) - (4.0 / 81.0) * (s1 - s2).powi(2)
        - 1.0 / 36.0;
    scale * sq.max(0.0).sqrt()
}

/// Horizontal offset of the top section relative to the bottom one in the
/// unfolded (intrinsic) cylinder of a gasket; 0 for a straight prism.
pub fn gasket_shift_rib(alpha: f64, rib: f64) -> f64 {
    // From the unfolded rectangle: the apex A' over the bottom edge AB sits
    // at abscissa (|AA'|² − |A'B|²)/(2a) + a/2 from A (h² cancels).
    (rib / 3.0f64.sqrt()) * (alpha - PI / 3.0).sin() + rib / 2.0
}

/// Solve θ = 4·arctan√(tan(3θ₀/4)·tan³(θ₀/4)) for the side θ₀ of the
/// equilateral spherical triangle whose area is |θ|.
pub fn lhuillier_theta0(theta: f64) -> f64 {
    let t = theta.abs();
    if t == 0.0 {
        return 0.0;
    }
    let f = |t0: f64| 4.0 * ((0.75 * t0).tan() * (t0 / 4.0).tan().powi(3)).sqrt().atan();
    // Monotone on (0, θ₀(π)]; θ = π corresponds to θ₀ = 4 arctan√(2−√3).
    let mut lo = 0.0f64;
    let mut hi = 4.0 * (2.0 - 3.0f64.sqrt()).sqrt().atan();
    if t >= PI {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One section of a twist/assembly in build order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SectionSpec {
    Gasket(GasketSpec),
    Bend(BendSpec),
}

/// Record of a helical twist build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistPlan {
    pub theta: f64,
    pub theta0: f64,
    pub h: f64,
    pub h_prime: f64,
    pub phi_return: f64,
    pub sections: Vec<SectionSpec>,
    /// Horizontal advance of the section center over the whole twist.
    pub horizontal_extent: f64,
    /// Sum of intrinsic section lengths (height of the isometric cylinder).
    pub intrinsic_length: f64,
}

/// An orthonormal moving frame: section center, axis direction, and the
/// direction from the center to labeled vertex 0 of the cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub c: Point3<f64>,
    pub t: Vector3<f64>,
    pub r: Vector3<f64>,
}

fn rot(axis: Vector3<f64>, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle)
}

/// Incremental builder for chains of prism sections. Tracks the moving
/// frame, the current boundary ring, the 3D positions, the faces, and an
/// independently computed intrinsic (cylinder-model) length per face.
struct Assembler {
    rib: f64,
    frame: Frame,
    position: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    ref_length: Vec<[f64; 3]>,
    ring: [usize; 3],
    sections: Vec<SectionSpec>,
    intrinsic_length: f64,
    intrinsic_shift: f64,
}

impl Assembler {
    fn new(rib: f64, start: Frame) -> Self {
        let mut a = Assembler {
            rib,
            frame: start,
            position: Vec::new(),
            faces: Vec::new(),
            ref_length: Vec::new(),
            ring: [0, 1, 2],
            sections: Vec::new(),
            intrinsic_length: 0.0,
            intrinsic_shift: 0.0,
        };
        for j in 0..3 {
            a.position.push(a.ring_vertex(start, j));
        }
        a
    }

    fn ring_vertex(&self, fr: Frame, j: usize) -> Point3<f64> {
        let rho = self.rib / 3.0f64.sqrt();
        fr.c + rho * (rot(fr.t, 2.0 * PI * j as f64 / 3.0) * fr.r)
    }

    fn push_ring(&mut self, fr: Frame, weld: Option<[usize; 3]>) -> ZResult<[usize; 3]> {
        match weld {
            Some(ids) => {
                for j in 0..3 {
                    let want = self.ring_vertex(fr, j);
                    let got = self.position[ids[j]];
                    if (want - got).norm() > 1e-8 * (1.0 + got.coords.norm()) {
                        return Err(ZalgallerError::ClosureResidual((want - got).norm()));
                    }
                }
                Ok(ids)
            }
            None => {
                let base = self.position.len();
                for j in 0..3 {
                    self.position.push(self.ring_vertex(fr, j));
                }
                Ok([base, base + 1, base + 2])
            }
        }
    }

    fn face(&mut self, t: [usize; 3], rl: [f64; 3]) {
        self.faces.push(t);
        self.ref_length.push(rl);
    }

    fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    fn ref_from_2d(c: [[f64; 2]; 3]) -> [f64; 3] {
        [
            Self::dist2(c[1], c[2]),
            Self::dist2(c[2], c[0]),
            Self::dist2(c[0], c[1]),
        ]
    }

    fn gasket(&mut self, spec: GasketSpec, weld: Option<[usize; 3]>) -> ZResult<()> {
        spec.validate()?;
        debug_assert!((spec.rib - self.rib).abs() < 1e-15);
        let fr = self.frame;
        let next = Frame {
            c: fr.c + spec.h * fr.t,
            t: fr.t,
            r: rot(fr.t, spec.alpha) * fr.r,
        };
        let top = self.push_ring(next, weld)?;
        let b = self.ring;
        // Six congruent triangles ABA', A'BB', B'BC, B'CC', C'CA, AA'C'.
        let tris = [
            [b[0], b[1], top[0]],
            [top[0], b[1], top[1]],
            [top[1], b[1], b[2]],
            [top[1], b[2], top[2]],
            [top[2], b[2], b[0]],
            [b[0], top[0], top[2]],
        ];
        // A gasket's induced metric is its intrinsic metric: the reference
        // lengths are the 3D edge lengths.
        for t in tris {
            let p = [self.position[t[0]], self.position[t[1]], self.position[t[2]]];
            self.face(
                t,
                [
                    (p[1] - p[2]).norm(),
                    (p[2] - p[0]).norm(),
                    (p[0] - p[1]).norm(),
                ],
            );
        }
        self.ring = top;
        self.frame = next;
        self.sections.push(SectionSpec::Gasket(spec));
        self.intrinsic_length += gasket_length_rib(spec.alpha, spec.h, spec.rib);
        self.intrinsic_shift += gasket_shift_rib(spec.alpha, spec.rib);
        Ok(())
    }

    /// Build a bend at angle `phi`. The steering direction (toward which the
    /// axis rotates) is the current vertex-0 direction `frame.r`; callers
    /// orient it beforehand with gaskets.
    fn bend(&mut self, spec: BendSpec, weld: Option<[usize; 3]>) -> ZResult<()> {
        spec.validate()?;
        debug_assert!((spec.rib - self.rib).abs() < 1e-15);
        let a = self.rib;
        let rho = a / 3.0f64.sqrt();
        let big_t = a * spec.lambda.tan();
        let fr = self.frame;
        let m = fr.c + big_t * fr.t;
        // Elbow section vertices (the oblique cut).
        let d_dir = fr.r;
        let c1 = m + rho * (rot(fr.t, 2.0 * PI / 3.0) * fr.r);
        let c2 = m + rho * (rot(fr.t, 4.0 * PI / 3.0) * fr.r);
        // Rotation of the moving half about the hinge CC' by φ, steering the
        // axis toward vertex 0.
        let rotation = if spec.phi == 0.0 {
            Rotation3::identity()
        } else {
            let h_axis = c2 - c1;
            let r_try = Rotation3::from_axis_angle(&Unit::new_normalize(h_axis), spec.phi);
            if (r_try * fr.t).dot(&d_dir) > 0.0 {
                r_try
            } else {
                Rotation3::from_axis_angle(&Unit::new_normalize(h_axis), -spec.phi)
            }
        };
        let rot_pt = |p: Point3<f64>| c1 + rotation * (p - c1);
        let next = Frame {
            c: rot_pt(m + big_t * fr.t),
            t: rotation * fr.t,
            r: rotation * fr.r,
        };
        let s = self.ring;
        let e_ids = self.push_ring(next, weld)?;
        let spos = [self.position[s[0]], self.position[s[1]], self.position[s[2]]];
        let epos = [
            self.position[e_ids[0]],
            self.position[e_ids[1]],
            self.position[e_ids[2]],
        ];

        // Fold geometry of the two cut triangles ACB and AC'B in the pencil
        // of planes through the line A B (= s0 e0).
        let a_pt = spos[0];
        let b_pt = epos[0];
        let m1 = Point3::from((a_pt.coords + b_pt.coords) * 0.5);
        let axis_u = (b_pt - a_pt).normalize();
        let v_mid = Point3::from((c1.coords + c2.coords) * 0.5);

        let fold_side = |c_pos: Point3<f64>| -> ZResult<([f64; 2], Point3<f64>, Point3<f64>, Point3<f64>, f64, f64)> {
            // Returns (unused, D1, F, D3, u1, u2) for one cut triangle.
            let ca = (a_pt - c_pos).norm();
            let cb = (b_pt - c_pos).norm();
            if (ca - cb).abs() > 1e-9 * ca {
                return Err(ZalgallerError::Internal(format!(
                    "cut triangle not isoceles: {ca} vs {cb}"
                )));
            }
            if spec.phi == 0.0 {
                // Flat fold: the creases have zero dihedral angle, so the
                // subdivision points may sit anywhere on the altitude; fix
                // them at 1/3 and 2/3.
                let d_tilde = m1;
                let u1 = 1.0 / 3.0;
                let u2 = 2.0 / 3.0;
                let d1 = c_pos + u1 * (d_tilde - c_pos);
                let f = c_pos + u2 * (d_tilde - c_pos);
                return Ok(([0.0, 0.0], d1, f, d_tilde, u1, u2));
            }
            let cos2mu = (a_pt - c_pos)
                .normalize()
                .dot(&(b_pt - c_pos).normalize());
            let mu = 0.5 * cos2mu.clamp(-1.0, 1.0).acos();
            let (sl, cl) = (spec.lambda.sin(), spec.lambda.cos());
            let sin_alpha = (cl / mu.cos()).clamp(-1.0, 1.0);
            let alpha_f = sin_alpha.asin();
            let beta_f = (cl / (2.0 * mu.cos())).clamp(-1.0, 1.0).asin();
            let delta_f = alpha_f - beta_f;
            if !(beta_f > 0.5 * delta_f) {
                return Err(ZalgallerError::Internal(format!(
                    "fold containment violated: beta {beta_f} <= delta/2 {}",
                    0.5 * delta_f
                )));
            }
            let rho_c = {
                let v = c_pos - m1;
                let ax = v.dot(&axis_u);
                if ax.abs() > 1e-8 * (1.0 + v.norm()) {
                    return Err(ZalgallerError::Internal(
                        "apex foot is not the midpoint of AB".into(),
                    ));
                }
                v.norm()
            };
            let rho_d = (a / cl) * (sl * sl - mu.sin().powi(2)).max(0.0).sqrt();
            // 2D computation in the plane normal to AB at M1: ê0 toward C,
            // ê1 at +90° on the side of the section center V.
            let e0v = (c_pos - m1 - (c_pos - m1).dot(&axis_u) * axis_u).normalize();
            let vproj = v_mid - m1 - (v_mid - m1).dot(&axis_u) * axis_u;
            let e1v = (vproj - vproj.dot(&e0v) * e0v).normalize();
            // The plane of the section (through V) makes angle β with Π0.
            let v_angle = vproj.normalize().dot(&e0v).clamp(-1.0, 1.0).acos();
            if (v_angle - beta_f).abs() > 1e-7 {
                return Err(ZalgallerError::Internal(format!(
                    "section plane angle {v_angle} != beta {beta_f}"
                )));
            }
            let cp = [rho_c, 0.0];
            let dt = [rho_d * alpha_f.cos(), rho_d * alpha_f.sin()];
            let cross2 = |p: [f64; 2], q: [f64; 2]| p[0] * q[1] - p[1] * q[0];
            // D1 = segment C–D̃ ∩ ray at angle δ/2.
            let g = [(0.5 * delta_f).cos(), (0.5 * delta_f).sin()];
            let denom = cross2([dt[0] - cp[0], dt[1] - cp[1]], g);
            let s1 = -cross2(cp, g) / denom;
            if !(s1 > 0.0 && s1 < 1.0) {
                return Err(ZalgallerError::Internal(format!(
                    "fold point D1 parameter {s1} outside (0,1)"
                )));
            }
            let d1_2 = [cp[0] + s1 * (dt[0] - cp[0]), cp[1] + s1 * (dt[1] - cp[1])];
            // D2 = reflection of D̃ in the plane at angle δ/2 (lands at −β).
            let d2_2 = [
                rho_d * (delta_f - alpha_f).cos(),
                rho_d * (delta_f - alpha_f).sin(),
            ];
            // F = segment D1–D2 ∩ Π0 (the plane of C, angle 0).
            let tf = d1_2[1] / (d1_2[1] - d2_2[1]);
            if !(tf > 0.0 && tf < 1.0) {
                return Err(ZalgallerError::Internal(format!(
                    "fold point F parameter {tf} outside (0,1)"
                )));
            }
            let f_2 = [d1_2[0] + tf * (d2_2[0] - d1_2[0]), 0.0];
            let d3_2 = [rho_d * beta_f.cos(), rho_d * beta_f.sin()];
            let altitude = Self::dist2(cp, dt);
            if (altitude - a).abs() > 1e-8 * a {
                return Err(ZalgallerError::Internal(format!(
                    "altitude length {altitude} != rib {a}"
                )));
            }
            let u1 = Self::dist2(cp, d1_2) / a;
            let u2 = u1 + Self::dist2(d1_2, f_2) / a;
            let tail = Self::dist2(f_2, d3_2) / a;
            if (tail - (1.0 - u2)).abs() > 1e-7 {
                return Err(ZalgallerError::Internal(format!(
                    "fold isometry audit failed: |FD3| = {tail}, 1-u2 = {}",
                    1.0 - u2
                )));
            }
            let lift = |p: [f64; 2]| m1 + p[0] * e0v + p[1] * e1v;
            Ok(([0.0, 0.0], lift(d1_2), lift(f_2), lift(d3_2), u1, u2))
        };

        let (_, d1, f_pt, d3, u1, u2) = fold_side(c1)?;
        let (_, d1p, fp_pt, d3p, u1p, u2p) = fold_side(c2)?;
        if (d3 - d3p).norm() > 1e-8 * (1.0 + d3.coords.norm())
            || (u1 - u1p).abs() > 1e-9
            || (u2 - u2p).abs() > 1e-9
        {
            return Err(ZalgallerError::Internal(
                "mirror folds disagree on the shared seam".into(),
            ));
        }
        let d3 = Point3::from(0.5 * (d3.coords + d3p.coords));

        let base = self.position.len();
        self.position.extend([c1, c2, d1, f_pt, d3, d1p, fp_pt]);
        let (ic, icp, id1, ifp, id3, id1p, ifpp) =
            (base, base + 1, base + 2, base + 3, base + 4, base + 5, base + 6);

        // Intrinsic cylinder model: s in [0, 3a] around, t in [0, 2a tanλ].
        let ll = 2.0 * big_t;
        let w: std::collections::HashMap<usize, [f64; 2]> = [
            (s[0], [0.0, 0.0]),
            (s[1], [a, 0.0]),
            (s[2], [2.0 * a, 0.0]),
            (e_ids[0], [0.0, ll]),
            (e_ids[1], [a, ll]),
            (e_ids[2], [2.0 * a, ll]),
            (ic, [a, big_t]),
            (icp, [2.0 * a, big_t]),
            (id1, [a * (1.0 - u1), big_t]),
            (ifp, [a * (1.0 - u2), big_t]),
            (id3, [0.0, big_t]),
            (id1p, [2.0 * a + u1 * a, big_t]),
            (ifpp, [2.0 * a + u2 * a, big_t]),
        ]
        .into_iter()
        .collect();
        // Faces on the vertex-2 / seam side see the s = 3a copy of the
        // vertex-0 generatrix.
        let wrap = |id: usize| -> [f64; 2] {
            let p = w[&id];
            if id == s[0] || id == e_ids[0] || id == id3 {
                [p[0] + 3.0 * a, p[1]]
            } else {
                p
            }
        };
        let plain = |t: [usize; 3]| Self::ref_from_2d([w[&t[0]], w[&t[1]], w[&t[2]]]);
        let seam = |t: [usize; 3]| Self::ref_from_2d([wrap(t[0]), wrap(t[1]), wrap(t[2])]);

        // Fixed and moving rectangle halves (diagonal from the lower-left
        // corner of the developed layout), side triangles, and the two
        // six-triangle folds.
        let faces_plain: [[usize; 3]; 12] = [
            [s[1], s[2], icp],
            [s[1], icp, ic],
            [ic, icp, e_ids[2]],
            [ic, e_ids[2], e_ids[1]],
            [s[0], s[1], ic],
            [ic, e_ids[1], e_ids[0]],
            [s[0], ic, id1],
            [id1, ic, e_ids[0]],
            [s[0], id1, ifp],
            [e_ids[0], ifp, id1],
            [s[0], ifp, id3],
            [e_ids[0], id3, ifp],
        ];
        for t in faces_plain {
            let rl = plain(t);
            self.face(t, rl);
        }
        let faces_seam: [[usize; 3]; 8] = [
            [s[2], s[0], icp],
            [icp, e_ids[0], e_ids[2]],
            [s[0], id1p, icp],
            [id1p, e_ids[0], icp],
            [s[0], ifpp, id1p],
            [e_ids[0], id1p, ifpp],
            [s[0], id3, ifpp],
            [e_ids[0], ifpp, id3],
        ];
        for t in faces_seam {
            let rl = seam(t);
            self.face(t, rl);
        }

        self.ring = e_ids;
        self.frame = next;
        self.sections.push(SectionSpec::Bend(spec));
        self.intrinsic_length += ll;
        Ok(())
    }

    /// Signed angle from the current vertex-0 direction to `target` about
    /// the axis.
    fn rib_mismatch(&self, target: Vector3<f64>) -> f64 {
        let fr = self.frame;
        let t_perp = (target - target.dot(&fr.t) * fr.t).normalize();
        fr.t.dot(&fr.r.cross(&t_perp)).atan2(fr.r.dot(&t_perp))
    }

    /// Orient vertex 0 toward `target` with a pair of gaskets of height `h`
    /// and turns δ/2 ± ξ, the pair total δ reduced into (−2π/3, 4π/3].
    ///
    /// With `long_way` and a negative δ, the pair realizes δ + 2π instead
    /// (both halves stay in the legal (−π/3, π) range): the section ends up
    /// identically oriented but the intrinsic shift of the pair jumps, which
    /// the modulus solver uses to reach every τ₁.
    fn align(&mut self, target: Vector3<f64>, h: f64, xi: f64, long_way: bool) -> ZResult<()> {
        let mut delta = self.rib_mismatch(target);
        if delta <= -2.0 * PI / 3.0 {
            delta += 2.0 * PI;
        }
        if long_way && delta < 0.0 {
            delta += 2.0 * PI;
        }
        // Clamp the asymmetry so both halves stay in the legal turn range.
        let margin = 1e-6;
        let lo = -PI / 3.0 + margin;
        let hi = PI - margin;
        let xi_max = ((hi - delta / 2.0).min(delta / 2.0 - lo)).max(0.0);
        let xi_eff = xi.clamp(-xi_max, xi_max);
        self.gasket(GasketSpec { alpha: delta / 2.0 + xi_eff, h, rib: self.rib }, None)?;
        self.gasket(GasketSpec { alpha: delta / 2.0 - xi_eff, h, rib: self.rib }, None)?;
        Ok(())
    }

    fn into_mesh(self, closed: bool) -> ZResult<(GeometricMesh, MetricTriangulation)> {
        let base = AbstractTriangulation::from_triangles(self.position.len(), self.faces)
            .map_err(|e| ZalgallerError::Internal(format!("gluing failed: {e}")))?;
        let audit = base
            .euler_audit()
            .map_err(|e| ZalgallerError::Internal(format!("audit failed: {e}")))?;
        if audit.closed != closed || !audit.orientable {
            return Err(ZalgallerError::Internal(format!(
                "unexpected topology: closed={} orientable={}",
                audit.closed, audit.orientable
            )));
        }
        let mesh = GeometricMesh { base: base.clone(), position: self.position };
        let reference = MetricTriangulation { base, edge_length: self.ref_length };
        reference
            .validate()
            .map_err(|e| ZalgallerError::Internal(format!("reference metric: {e}")))?;
        Ok((mesh, reference))
    }
}

/// Build a single bend as an open mesh (20 faces, two boundary sections).
pub fn build_bend(spec: BendSpec) -> ZResult<GeometricMesh> {
    spec.validate()?;
    let start = Frame {
        c: Point3::origin(),
        t: Vector3::x(),
        r: Vector3::z(),
    };
    let mut asm = Assembler::new(spec.rib, start);
    asm.bend(spec, None)?;
    Ok(asm.into_mesh(false)?.0)
}

/// Build a single gasket as an open mesh (6 faces, two boundary sections).
pub fn build_gasket(spec: GasketSpec) -> ZResult<GeometricMesh> {
    spec.validate()?;
    let start = Frame {
        c: Point3::origin(),
        t: Vector3::x(),
        r: Vector3::z(),
    };
    let mut asm = Assembler::new(spec.rib, start);
    asm.gasket(spec, None)?;
    Ok(asm.into_mesh(false)?.0)
}

/// Internal intermediate state of a twist build.
struct TwistBuild {
    asm: Assembler,
    plan: TwistPlan,
}

/// How the two final gaskets orient the last section.
enum FinalAlign {
    /// Standalone twist: the last section is the first one rotated by θ
    /// about the common axis.
    RotatedByTheta,
    /// Assembly: turn the last section so vertex 0 points along the given
    /// direction (the paper's extra −θ turn).
    Direction(Vector3<f64>),
}

fn twist_core(
    theta: f64,
    h: f64,
    xi: f64,
    windows: u8,
    finish: FinalAlign,
    start: Frame,
) -> ZResult<TwistBuild> {
    if !(theta > -PI && theta <= PI) {
        return Err(ZalgallerError::TwistAngleDomain(theta));
    }
    if !(h > 0.0) {
        return Err(ZalgallerError::NonPositiveHeight(h));
    }
    let rib = DEFAULT_RIB;
    let lam = lambda_twist();
    let big_a = rib * lam.tan();
    let e_twist = 16.0 * (h + big_a);
    let theta0 = lhuillier_theta0(theta);

    let mut asm = Assembler::new(rib, start);
    let c0 = start.c;
    let x_axis = start.t;

    // Spherical directions P → Q → R → P in the frame (t̂, ẑ-steer, ŷ-out).
    // Build an orthonormal basis aligned with the start frame.
    let ez = start.r;
    let ey = start.t.cross(&start.r);
    let to_world = |v: Vector3<f64>| v.x * x_axis + v.y * ey + v.z * ez;
    // The spherical triangle lives in the plane spanned by the axis and the
    // outward ŷ of the section frame, keeping the twist's mid-excursion clear
    // of the axis–ẑ plane used by the closing corner loop of the assembly.
    let p_dir = to_world(Vector3::new(1.0, 0.0, 0.0));
    let q_dir = to_world(Vector3::new(theta0.cos(), theta0.sin(), 0.0));
    let r_dir = if theta0 == 0.0 {
        p_dir
    } else {
        let cs = theta0.cos();
        let ab = cs / (1.0 + cs);
        let cross = p_dir.cross(&q_dir);
        let g2 = (1.0 - ab * ab * 2.0 - 2.0 * ab * ab * cs) / cross.norm_squared();
        let gamma = g2.max(0.0).sqrt() * if theta >= 0.0 { 1.0 } else { -1.0 };
        ab * p_dir + ab * q_dir + gamma * cross
    };

    // Gasket pairs are numbered 0..5 in build order (before each of the five
    // bends, then the final orientation pair); bit i of `windows` asks pair i
    // to take the long-way turn.
    let long = |i: u8| windows >> i & 1 == 1;

    let bend_toward = |asm: &mut Assembler, target_axis: Vector3<f64>, h_pair: f64, xi_pair: f64, lw: bool| -> ZResult<f64> {
        let t_cur = asm.frame.t;
        let cosphi = t_cur.dot(&target_axis).clamp(-1.0, 1.0);
        let phi = cosphi.acos();
        let steer = if phi < 1e-12 {
            asm.frame.r
        } else {
            (target_axis - cosphi * t_cur).normalize()
        };
        asm.align(steer, h_pair, xi_pair, lw)?;
        asm.bend(BendSpec { phi, lambda: lam, rib }, None)?;
        if (asm.frame.t - target_axis).norm() > 1e-9 {
            return Err(ZalgallerError::Internal(
                "bend did not reach the target axis".into(),
            ));
        }
        Ok(phi)
    };

    // Three bends at θ₀ walking the spherical triangle.
    bend_toward(&mut asm, q_dir, h, xi, long(0))?;
    bend_toward(&mut asm, r_dir, h, xi, long(1))?;
    bend_toward(&mut asm, p_dir, h, xi, long(2))?;

    // Return bends: bend down toward the initial axis line, travel along the
    // two special gaskets of height h', and bend back onto the line.
    //
    // A bend's center path kinks at the elbow: the elbow section center sits
    // at distance ρ/2 from the hinge, so the moving half displaces it by
    // (ρ/2)(R·d̂ − d̂). With both kinks included the closure reads
    //   sinφ·(2A + 2h') − ρ·(1 − cosφ) = w
    //   d01 + A − (ρ/2)·sinφ + cosφ·(A + 2h') = e_twist.
    let pre = asm.frame;
    if (pre.t - x_axis).norm() > 1e-9 {
        return Err(ZalgallerError::Internal("twist axis drifted".into()));
    }
    let m0 = pre.c + 2.0 * h * pre.t; // center at the start of bend 4
    let off = (m0 - c0) - (m0 - c0).dot(&x_axis) * x_axis;
    let w = off.norm();
    let d01 = (m0 - c0).dot(&x_axis);
    let cap_h = e_twist - d01;
    let rho = rib / 3.0f64.sqrt();
    let (phi_r, h_prime) = if w < 1e-12 {
        let hp = 0.5 * (cap_h - 2.0 * big_a);
        (0.0, hp)
    } else {
        // X(φ) = A + 2h' from the horizontal equation; root of the drop
        // equation g(φ) = sinφ·(X + A) − ρ·sin²φ − w, strictly increasing
        // for the small φ at play.
        let xf = |phi: f64| (cap_h - big_a + 0.5 * rho * phi.sin()) / phi.cos();
        let f = |phi: f64| phi.sin() * (xf(phi) + big_a) - rho * (1.0 - phi.cos()) - w;
        let mut lo = 0.0f64;
        let mut hi = 0.1f64;
        while f(hi) < 0.0 && hi < 1.5 {
            hi *= 1.5;
        }
        if f(hi) < 0.0 {
            return Err(ZalgallerError::ClosureResidual(w));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let phi = 0.5 * (lo + hi);
        let hp = 0.5 * (xf(phi) - big_a);
        (phi, hp)
    };
    if !(h_prime > 0.0) {
        return Err(ZalgallerError::ReturnGasket(h_prime));
    }
    if phi_r.tan() >= 0.75 {
        return Err(ZalgallerError::Internal(format!(
            "return bend angle tanφ = {} ≥ 3/4",
            phi_r.tan()
        )));
    }

    let u_dir = if phi_r == 0.0 {
        x_axis
    } else {
        phi_r.cos() * x_axis - phi_r.sin() * (off / w)
    };
    // Bend 4 with the standard-height pair, the two h' gaskets, bend 5.
    {
        let t_cur = asm.frame.t;
        let steer4 = if phi_r == 0.0 {
            asm.frame.r
        } else {
            (u_dir - u_dir.dot(&t_cur) * t_cur).normalize()
        };
        asm.align(steer4, h, xi, long(3))?;
        asm.bend(BendSpec { phi: phi_r, lambda: lam, rib }, None)?;
        if (asm.frame.t - u_dir).norm() > 1e-9 {
            return Err(ZalgallerError::Internal("bend 4 missed its axis".into()));
        }
    }
    {
        let t_cur = asm.frame.t;
        let steer5 = if phi_r == 0.0 {
            asm.frame.r
        } else {
            (x_axis - x_axis.dot(&t_cur) * t_cur).normalize()
        };
        asm.align(steer5, h_prime, 0.0, long(4))?;
        asm.bend(BendSpec { phi: phi_r, lambda: lam, rib }, None)?;
    }
    // Audit: back on the initial axis line, pointing along it.
    {
        let fr = asm.frame;
        let axis_err = (fr.t - x_axis).norm();
        let line_err = ((fr.c - c0) - (fr.c - c0).dot(&x_axis) * x_axis).norm();
        let res = axis_err.max(line_err);
        if res > 1e-8 {
            return Err(ZalgallerError::ClosureResidual(res));
        }
    }
    // Final pair of standard gaskets orients the last section.
    let target_r = match finish {
        FinalAlign::RotatedByTheta => rot(x_axis, theta) * start.r,
        FinalAlign::Direction(v) => v,
    };
    asm.align(target_r, h, xi, long(5))?;

    let horizontal_extent = (asm.frame.c - c0).dot(&x_axis);
    let plan = TwistPlan {
        theta,
        theta0,
        h,
        h_prime,
        phi_return: phi_r,
        sections: asm.sections.clone(),
        horizontal_extent,
        intrinsic_length: asm.intrinsic_length,
    };
    Ok(TwistBuild { asm, plan })
}

/// Build a helical twist of angle θ: pattern (g²b)⁵g², all bends at cutting
/// angle arctan(49/40). Open mesh with the final section a translate of the
/// first one rotated by θ about their common axis.
pub fn build_helical_twist(theta: f64, h: f64) -> ZResult<(GeometricMesh, TwistPlan)> {
    let start = Frame {
        c: Point3::origin(),
        t: Vector3::x(),
        r: Vector3::z(),
    };
    let tb = twist_core(theta, h, 0.0, 0, FinalAlign::RotatedByTheta, start)?;
    let d_twist = 18.0 * (DEFAULT_RIB * lambda_twist().tan() + h);
    if tb.plan.horizontal_extent > d_twist {
        return Err(ZalgallerError::Internal(format!(
            "twist extent {} exceeds d_twist {}",
            tb.plan.horizontal_extent, d_twist
        )));
    }
    let hp_bound = 2.0 * 10.0f64.sqrt() * (2.0 * h + 3.0 * DEFAULT_RIB * lambda_twist().tan());
    if tb.plan.h_prime > hp_bound {
        return Err(ZalgallerError::Internal(format!(
            "h' = {} exceeds its bound {hp_bound}",
            tb.plan.h_prime
        )));
    }
    let plan = tb.plan.clone();
    let (mesh, _) = tb.asm.into_mesh(false)?;
    Ok((mesh, plan))
}

/// Assembly record for `assemble_long_torus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTorusPlan {
    pub tau: Modulus,
    pub twist: TwistPlan,
    pub xi: f64,
    /// Bitmask of gasket pairs that take the long-way (δ + 2π) turn.
    pub pair_windows: u8,
    pub vertical_prism: f64,
    pub horizontal_prism: f64,
    pub sections: Vec<SectionSpec>,
}

#[derive(Debug, Clone)]
pub struct LongTorus {
    pub mesh: GeometricMesh,
    /// The intrinsic right-cylinder model of the same complex: per-face
    /// lengths computed from the unfolded prisms, independent of the 3D
    /// coordinates.
    pub reference: MetricTriangulation,
    pub plan: LongTorusPlan,
}

fn build_closed(
    theta: f64,
    xi: f64,
    windows: u8,
    h: f64,
    tau_i: f64,
) -> ZResult<(Assembler, TwistPlan, f64, f64)> {
    let rib = DEFAULT_RIB;
    let a2 = rib * lambda_corner().tan();
    let start = Frame {
        c: Point3::origin(),
        t: Vector3::x(),
        r: Vector3::z(),
    };
    let tb = twist_core(theta, h, xi, windows, FinalAlign::Direction(Vector3::z()), start)?;
    let mut asm = tb.asm;
    let plan = tb.plan;
    let lh = plan.horizontal_extent;
    let lv = 0.5 * (3.0 * rib * tau_i - plan.intrinsic_length - 8.0 * a2 - lh);
    if lv < rib / 3.0 {
        return Err(ZalgallerError::LengthBudget(lv));
    }
    // Corner loop: (bend, prism) × 3, final bend welded onto the start ring.
    let corner = BendSpec { phi: PI / 2.0, lambda: lambda_corner(), rib };
    let steer_seq = [
        Vector3::z(),
        -Vector3::x(),
        -Vector3::z(),
        Vector3::x(),
    ];
    let prism_len = [lv, lh, lv];
    for i in 0..4 {
        if (asm.frame.r - steer_seq[i]).norm() > 1e-9 {
            return Err(ZalgallerError::Internal(format!(
                "corner bend {i} rib misoriented by {}",
                (asm.frame.r - steer_seq[i]).norm()
            )));
        }
        let weld = if i == 3 { Some([0usize, 1, 2]) } else { None };
        asm.bend(corner, weld)?;
        if i < 3 {
            asm.gasket(GasketSpec { alpha: 0.0, h: prism_len[i], rib }, None)?;
        }
    }
    Ok((asm, plan, lv, lh))
}

fn reference_tau(reference: &MetricTriangulation, tau_i_hint: f64) -> ZResult<Modulus> {
    let dev = develop(reference)
        .map_err(|e| ZalgallerError::Internal(format!("development failed: {e}")))?;
    let (w1, w2) = dev.holonomy;
    let ratio = w2 / w1;
    let ratio = if ratio.im > 0.0 { ratio } else { w1 / w2 };
    let raw = Modulus::from_complex(Complex64::new(ratio.re, ratio.im))
        .map_err(|e| ZalgallerError::Internal(format!("holonomy ratio: {e}")))?;
    let (red, _) = reduce_to_fundamental_domain(raw)
        .map_err(|e| ZalgallerError::Internal(format!("reduction: {e}")))?;
    if (red.im - tau_i_hint).abs() > 1e-6 * tau_i_hint {
        return Err(ZalgallerError::Internal(format!(
            "developed length {} does not match target {tau_i_hint}",
            red.im
        )));
    }
    Ok(red)
}

fn wrap_unit(x: f64) -> f64 {
    let mut y = x % 1.0;
    if y > 0.5 {
        y -= 1.0;
    }
    if y <= -0.5 {
        y += 1.0;
    }
    y
}

/// Realized τ₁ for given knobs (solver probe).
fn realized_tau1(theta: f64, xi: f64, windows: u8, h: f64, tau_i: f64) -> ZResult<f64> {
    let (asm, _, _, _) = build_closed(theta, xi, windows, h, tau_i)?;
    let (_, reference) = asm.into_mesh(true)?;
    Ok(reference_tau(&reference, tau_i)?.re)
}

pub fn assemble_long_torus(tau: Modulus) -> ZResult<LongTorus> {
    assemble_long_torus_with(tau, DEFAULT_GASKET_HEIGHT, false)
}

/// Full assembly with explicit gasket height and an escape hatch for the
/// proven τᵢ ≥ 33 bound (no correctness claim below it).
pub fn assemble_long_torus_with(
    tau: Modulus,
    h: f64,
    override_length_check: bool,
) -> ZResult<LongTorus> {
    let (red, _) = reduce_to_fundamental_domain(tau)
        .map_err(|e| ZalgallerError::Internal(format!("reduction: {e}")))?;
    if red.im < 33.0 && !override_length_check {
        return Err(ZalgallerError::TooShort { tau_i: red.im, min: 33.0 });
    }
    let target = wrap_unit(red.re);
    let tau_i = red.im;

    // Solve for the twist angle θ (and, if θ alone cannot reach the target
    // shift, an asymmetry ξ of the gasket pairs) so that the developed
    // modulus hits τ₁ exactly.
    let probe = |theta: f64, xi: f64, win: u8| realized_tau1(theta, xi, win, h, tau_i);
    let residual = |t1: f64| wrap_unit(t1 - target);

    let mut best: Option<(f64, f64, f64, u8)> = None; // (|res|, theta, xi, windows)
    let consider = |theta: f64, xi: f64, win: u8, r: f64, best: &mut Option<(f64, f64, f64, u8)>| {
        if best.map_or(true, |(b, _, _, _)| r.abs() < b) {
            *best = Some((r.abs(), theta, xi, win));
        }
    };

    // The θ knob alone covers a continuous τ₁ interval of width ≈ 0.4; each
    // long-way pair shifts the interval by roughly +2/3 mod 1, so a small set
    // of window masks covers the whole circle. Try masks with few long-way
    // pairs first and bisect the wrapped residual in θ on each branch.
    let mut masks: Vec<u8> = (0u8..64).collect();
    masks.sort_by_key(|m| m.count_ones());

    let mut solved: Option<(f64, f64, u8)> = None;
    let n_scan = 24;
    'mask: for &win in &masks {
        let mut samples: Vec<(f64, f64)> = Vec::new();
        for i in 0..=n_scan {
            let theta = -PI + 2.0 * PI * i as f64 / n_scan as f64;
            let theta = theta.clamp(-PI + 1e-9, PI);
            if let Ok(t1) = probe(theta, 0.0, win) {
                let r = residual(t1);
                consider(theta, 0.0, win, r, &mut best);
                samples.push((theta, r));
            }
        }
        for pair in samples.windows(2) {
            let (ta, ra) = pair[0];
            let (tb, rb) = pair[1];
            if ra == 0.0 {
                solved = Some((ta, 0.0, win));
                break 'mask;
            }
            if ra * rb < 0.0 && (ra - rb).abs() < 0.5 {
                // Bisection on the continuous branch.
                let (mut lo, mut hi, mut rlo) = (ta, tb, ra);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let rm = match probe(mid, 0.0, win) {
                        Ok(t1) => residual(t1),
                        Err(_) => break,
                    };
                    consider(mid, 0.0, win, rm, &mut best);
                    if rm.abs() < 5e-13 {
                        solved = Some((mid, 0.0, win));
                        break 'mask;
                    }
                    if rlo * rm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        rlo = rm;
                    }
                }
            }
        }
    }
    // Secondary knob: pair asymmetry ξ at the best (θ, windows).
    if solved.is_none() {
        if let Some((_, theta_b, _, win_b)) = best {
            let mut xs: Vec<(f64, f64)> = Vec::new();
            for i in 0..=16 {
                let xi = -1.04 + 2.08 * i as f64 / 16.0;
                if let Ok(t1) = probe(theta_b, xi, win_b) {
                    let r = residual(t1);
                    consider(theta_b, xi, win_b, r, &mut best);
                    xs.push((xi, r));
                }
            }
            'xi: for pair in xs.windows(2) {
                let (xa, ra) = pair[0];
                let (xb, rb) = pair[1];
                if ra * rb < 0.0 && (ra - rb).abs() < 0.5 {
                    let (mut lo, mut hi, mut rlo) = (xa, xb, ra);
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        let rm = match probe(theta_b, mid, win_b) {
                            Ok(t1) => residual(t1),
                            Err(_) => break,
                        };
                        consider(theta_b, mid, win_b, rm, &mut best);
                        if rm.abs() < 5e-13 {
                            solved = Some((theta_b, mid, win_b));
                            break 'xi;
                        }
                        if rlo * rm <= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            rlo = rm;
                        }
                    }
                }
            }
        }
    }
    if solved.is_none() {
        // Accept a near-root if bisection stalled within rounding noise.
        if let Some((res, theta_b, xi_b, win_b)) = best {
            if res < 1e-9 {
                solved = Some((theta_b, xi_b, win_b));
            }
        }
    }
    let (theta, xi, windows) = match solved {
        Some(s) => s,
        None => {
            let (res, _, _, _) = best.unwrap_or((f64::INFINITY, 0.0, 0.0, 0));
            return Err(ZalgallerError::ShiftUnreachable { target, residual: res });
        }
    };

    let (asm, twist_plan, lv, lh) = build_closed(theta, xi, windows, h, tau_i)?;
    let sections = asm.sections.clone();
    let (mesh, reference) = asm.into_mesh(true)?;
    if mesh.base.face_count() != 270 {
        return Err(ZalgallerError::Internal(format!(
            "assembly has {} faces, expected 270",
            mesh.base.face_count()
        )));
    }
    let plan = LongTorusPlan {
        tau: red,
        twist: twist_plan,
        xi,
        pair_windows: windows,
        vertical_prism: lv,
        horizontal_prism: lh,
        sections,
    };
    Ok(LongTorus { mesh, reference, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat_mesh::develop;
    use approx::assert_relative_eq;

    use crate::verify::{check_isometry, extract_modulus, self_intersection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const A: f64 = DEFAULT_RIB;

    /// Circumference and height of an open cylinder, measured from its planar
    /// development: the single true holonomy translation gives the
    /// circumference, the layout extent across it gives the height.
    fn developed_cylinder(mesh: &GeometricMesh) -> (f64, f64) {
        let dev = develop(&mesh.induced_metric()).unwrap();
        assert!(dev.max_rotation_defect < 1e-9);
        let (w1, _) = dev.holonomy;
        let n = (-w1.im / w1.norm(), w1.re / w1.norm());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for tri in &dev.layout {
            for p in tri {
                let s = p[0] * n.0 + p[1] * n.1;
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        (w1.norm(), hi - lo)
    }

    #[test]
    fn lambda0_values() {
        assert!(lambda0(1e-9).unwrap() < 1e-8);
        assert_relative_eq!(
            lambda0(PI / 2.0).unwrap(),
            (3.0f64.sqrt() / 2.0).atan(),
            epsilon = 1e-12
        );
        // Strictly increasing in φ.
        let mut prev = 0.0;
        for i in 1..100 {
            let v = lambda0(PI * i as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        // At the largest spherical side the twist cutting angle still works.
        let theta0_max = 4.0 * (2.0 - 3.0f64.sqrt()).sqrt().atan();
        assert!(lambda0(theta0_max).unwrap() < lambda_twist());
        assert!(lambda0(0.0).is_err());
        assert!(lambda0(PI).is_err());
    }

    #[test]
    fn overlap_margin_function() {
        // F(x) = 3 arcsin(x/2) − arcsin(x) is positive on (0,1) with its
        // single interior critical point (the maximum) at x = √(5/8).
        let f = |x: f64| 3.0 * (x / 2.0).asin() - x.asin();
        let fp = |x: f64| 1.5 / (1.0 - x * x / 4.0).sqrt() - 1.0 / (1.0 - x * x).sqrt();
        let xc = (5.0f64 / 8.0).sqrt();
        assert!(fp(xc).abs() < 1e-12);
        for i in 1..100 {
            let x = i as f64 / 100.0;
            assert!(f(x) > 0.0);
            if x < xc {
                assert!(fp(x) > 0.0);
            }
            if x > xc + 1e-9 {
                assert!(fp(x) < 0.0);
            }
        }
    }

    #[test]
    fn bend_domain_errors() {
        let phi = PI / 3.0;
        let l0 = lambda0(phi).unwrap();
        assert!(matches!(
            BendSpec::new(phi, l0 - 0.05).validate(),
            Err(ZalgallerError::CuttingAngle { .. })
        ));
        assert!(matches!(
            BendSpec::new(phi, PI / 2.0).validate(),
            Err(ZalgallerError::CuttingAngle { .. })
        ));
        assert!(BendSpec::new(phi, l0 + 0.1).validate().is_ok());
    }

    #[test]
    fn bend_is_intrinsic_prism() {
        let lambda = lambda0(PI / 3.0).unwrap() + 0.2;
        let mesh = build_bend(BendSpec::new(PI / 3.0, lambda)).unwrap();
        assert_eq!(mesh.base.face_count(), 20);
        let (circ, height) = developed_cylinder(&mesh);
        assert_relative_eq!(circ, 3.0 * A, epsilon = 1e-12);
        assert_relative_eq!(height, 2.0 * A * lambda.tan(), epsilon = 1e-10);
    }

    #[test]
    fn bend_random_develop_and_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ec7);
        for _ in 0..50 {
            let phi = rng.gen_range(0.05..3.0);
            let l0 = lambda0(phi).unwrap();
            let hi = PI / 2.0 - 0.02;
            if l0 + 0.01 >= hi {
                continue;
            }
            let lambda = rng.gen_range(l0 + 0.01..hi);
            let mesh = build_bend(BendSpec::new(phi, lambda)).unwrap();
            let (_, height) = developed_cylinder(&mesh);
            assert!(
                (height - 2.0 * A * lambda.tan()).abs() < 1e-10,
                "phi={phi} lambda={lambda}"
            );
            assert!(
                self_intersection(&mesh).is_empty(),
                "bend self-intersects at phi={phi} lambda={lambda}"
            );
        }
    }

    #[test]
    fn gasket_length_law() {
        let h = 0.37;
        assert_eq!(gasket_length(0.0, h).unwrap(), h);
        let g = gasket_length(PI / 3.0, h).unwrap();
        assert_relative_eq!(g * g, h * h + 1.0 / 108.0, epsilon = 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(0x9a5e);
        for _ in 0..200 {
            let alpha = rng.gen_range(-PI / 3.0 + 1e-3..PI - 1e-3);
            let h = rng.gen_range(1e-3..3.0);
            let g = gasket_length(alpha, h).unwrap();
            assert!(g * g - h * h < 1.0 / 9.0, "Eq. (3) fails at alpha={alpha}");
        }
    }

    #[test]
    fn gasket_develops_to_its_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6a5e);
        for _ in 0..100 {
            let alpha = rng.gen_range(-PI / 3.0 + 1e-3..PI - 1e-3);
            let h = rng.gen_range(0.01..3.0);
            let mesh = build_gasket(GasketSpec::new(alpha, h)).unwrap();
            assert_eq!(mesh.base.face_count(), 6);
            let (circ, height) = developed_cylinder(&mesh);
            assert_relative_eq!(circ, 3.0 * A, epsilon = 1e-12);
            let want = gasket_length(alpha, h).unwrap();
            assert!((height - want).abs() < 1e-10, "alpha={alpha} h={h}");
        }
    }

    #[test]
    fn gasket_diagonal_edge_formula() {
        // |A′A| = √(4/27·sin²(α/2) + h²) with rib 1/3.
        for (alpha, h) in [(0.4, 0.2), (-0.9, 1.3), (2.5, 0.05)] {
            let mesh = build_gasket(GasketSpec::new(alpha, h)).unwrap();
            let d = (mesh.position[0] - mesh.position[3]).norm();
            let want = (4.0 / 27.0 * (alpha / 2.0).sin().powi(2) + h * h).sqrt();
            assert_relative_eq!(d, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn gasket_embedded_across_turn_range() {
        for alpha in [-PI / 3.0 + 0.01, -0.5, 0.0, PI / 2.0, PI - 0.01] {
            let mesh = build_gasket(GasketSpec::new(alpha, 1.0)).unwrap();
            assert!(
                self_intersection(&mesh).is_empty(),
                "gasket self-intersects at alpha={alpha}"
            );
        }
    }

    #[test]
    fn lhuillier_inversion() {
        assert_eq!(lhuillier_theta0(0.0), 0.0);
        let t0_max = 4.0 * (2.0 - 3.0f64.sqrt()).sqrt().atan();
        assert_relative_eq!(lhuillier_theta0(PI), t0_max, epsilon = 1e-10);
        assert_relative_eq!(t0_max, 1.9106, epsilon = 1e-3);
        // Round-trip through L'Huillier's area formula for the equilateral
        // spherical triangle of side θ₀.
        let area = |t0: f64| 4.0 * ((0.75 * t0).tan() * (t0 / 4.0).tan().powi(3)).sqrt().atan();
        for theta in [-2.9, -1.3, -0.2, 0.4, 1.7, 3.0] {
            let t0 = lhuillier_theta0(theta);
            assert!(t0 >= 0.0);
            assert_relative_eq!(area(t0), theta.abs(), epsilon = 1e-10);
        }
    }

    /// Rotation about the x-axis carrying ẑ to the given ring direction.
    fn ring_angle(v: Vector3<f64>) -> f64 {
        let y_axis = Vector3::x().cross(&Vector3::z());
        v.dot(&y_axis).atan2(v.dot(&Vector3::z()))
    }

    #[test]
    fn twist_rotates_section_by_theta() {
        for theta in [
            -3.0 * PI / 4.0,
            -PI / 2.0,
            -PI / 4.0,
            PI / 4.0,
            PI / 2.0,
            3.0 * PI / 4.0,
            PI,
        ] {
            let start = Frame {
                c: Point3::origin(),
                t: Vector3::x(),
                r: Vector3::z(),
            };
            let tb = twist_core(theta, 0.01, 0.0, 0, FinalAlign::RotatedByTheta, start).unwrap();
            let asm = tb.asm;
            // Measure the end-section rotation from the geometry itself.
            let ring: Vec<_> = asm.ring.iter().map(|&i| asm.position[i]).collect();
            let c_end = Point3::from((ring[0].coords + ring[1].coords + ring[2].coords) / 3.0);
            let v = ring[0] - c_end;
            let mut diff = ring_angle(v) - theta;
            while diff > PI {
                diff -= 2.0 * PI;
            }
            while diff < -PI {
                diff += 2.0 * PI;
            }
            assert!(diff.abs() < 1e-8, "theta={theta} rotated by {}", ring_angle(v));
            // End section is a translate along the axis: same ẑ-offset start.
            assert!((c_end.y.abs()).max(c_end.z.abs()) < 1e-8);
        }
    }

    #[test]
    fn twist_intrinsic_length_and_bounds() {
        for theta in [0.0, PI / 2.0, -3.0 * PI / 4.0, PI] {
            let (mesh, plan) = build_helical_twist(theta, 0.01).unwrap();
            // ℓ_twist: five bends of 2a·tanλ₀ plus the twelve gasket heights
            // (ten standard, two of height h′), per-gasket Eq. (2).
            let mut want = 0.0;
            let mut bends = 0;
            let mut gaskets = 0;
            for s in &plan.sections {
                match s {
                    SectionSpec::Bend(b) => {
                        assert_relative_eq!(b.lambda, lambda_twist(), epsilon = 1e-12);
                        want += 2.0 * A * b.lambda.tan();
                        bends += 1;
                    }
                    SectionSpec::Gasket(g) => {
                        want += gasket_length(g.alpha, g.h).unwrap();
                        gaskets += 1;
                    }
                }
            }
            assert_eq!((bends, gaskets), (5, 12), "pattern (g²b)⁵g²");
            let (_, height) = developed_cylinder(&mesh);
            assert!((height - want).abs() < 1e-9, "theta={theta}");
            assert!((plan.intrinsic_length - want).abs() < 1e-9);
            // Lemma 5.4 bounds.
            let h = plan.h;
            assert!(plan.h_prime <= 2.0 * 10.0f64.sqrt() * (2.0 * h + 3.0 * A * lambda_twist().tan()));
            assert!(plan.phi_return.tan() < 0.75);
            assert!(plan.horizontal_extent <= 18.0 * (A * lambda_twist().tan() + h));
        }
    }

    #[test]
    fn long_torus_end_to_end() {
        for (re, im) in [(0.0, 40.0), (0.25, 35.0), (-0.4, 50.0)] {
            let tau = Modulus::new(re, im).unwrap();
            let torus = assemble_long_torus(tau).unwrap();
            assert_eq!(torus.mesh.base.face_count(), 270);
            let audit = torus.mesh.base.euler_audit().unwrap();
            assert!(audit.closed);
            assert_eq!(audit.chi, 0);
            assert!(check_isometry(&torus.mesh, &torus.reference).unwrap() < 1e-8);
            assert!(torus.mesh.induced_metric().cone_defect().unwrap() < 1e-9);
            assert!(self_intersection(&torus.mesh).is_empty(), "tau={re}+{im}i");
            let got = extract_modulus(&torus.mesh).unwrap();
            assert!(
                (got.re - re).abs() < 1e-7 && (got.im - im).abs() < 1e-7 * im,
                "tau={re}+{im}i got {}+{}i",
                got.re,
                got.im
            );
            // Intrinsic budget of the rigid part (everything except the two
            // stretchable vertical prisms), Prop. 5.1.
            let h = torus.plan.twist.h;
            let rigid = torus.plan.twist.intrinsic_length
                + 8.0 * A * lambda_corner().tan()
                + torus.plan.horizontal_prism
                + 2.0 * A / 3.0;
            let bound = 253.0 / 18.0
                + 18.0 * h
                + 10.0 * (h * h + 1.0 / 9.0).sqrt()
                + 2.0 * (40.0 * (2.0 * h + 49.0 / 40.0).powi(2) + 1.0 / 9.0).sqrt();
            assert!(rigid < bound);
            assert!(torus.plan.vertical_prism >= A / 3.0);
        }
    }

    #[test]
    fn long_torus_rejects_short_tori() {
        let tau = Modulus::new(0.558, 16.0).unwrap();
        assert!(matches!(
            assemble_long_torus(tau),
            Err(ZalgallerError::TooShort { .. })
        ));
    }
}
