//! Combinatorial and metric torus triangulations: the almost-equilateral
//! lattice triangulation, intrinsic-metric bookkeeping, development
//! (unfolding) of flat meshes, and topology audits.
//!
//! Non-simplicial complexes (loop edges, parallel edges) are first-class:
//! face adjacency is stored explicitly as a gluing of edge slots rather than
//! derived from vertex ids, and edge lengths are attached per face corner.

use crate::moduli::Modulus;
use nalgebra::Point3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Edge slot `k` of a face is the edge opposite corner `k`, i.e. the edge
/// joining corners `k+1` and `k+2` (mod 3).
pub type Slot = (u32, u8);

/// Sentinel slot marking an unglued (boundary) edge. Component meshes such
/// as a single bend or gasket are open cylinders and carry boundary edges;
/// assembled tori are closed.
pub const BOUNDARY: Slot = (u32::MAX, 3);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractTriangulation {
    pub vertex_count: usize,
    /// Vertex ids per corner, counterclockwise in charts.
    pub triangles: Vec<[usize; 3]>,
    /// Gluing involution on edge slots; `opposite[f][k] = (f', k')`.
    pub opposite: Vec<[Slot; 3]>,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("edge ({0}, {1}) is incident to {2} directed edges; non-manifold")]
    NonManifold(usize, usize, usize),
    #[error("gluing is not an involution at face {0} slot {1}")]
    BadGluing(u32, u8),
    #[error("triangle inequality violated in face {0}: lengths {1:?}")]
    TriangleInequality(usize, [f64; 3]),
    #[error("non-flat metric: cone defects at vertices {0:?}")]
    ConeAngles(Vec<(usize, f64)>),
    #[error("degenerate (zero-area) triangle at face {0}")]
    Degenerate(usize),
    #[error("holonomy has a rotation part of angle {0}; not a translation lattice")]
    RotationalHolonomy(f64),
    #[error("mesh is not connected")]
    Disconnected,
}

impl AbstractTriangulation {
    /// Build the gluing by matching each directed edge (u, w) with a reverse
    /// directed edge (w, u). Unambiguous for complexes where an edge is
    /// determined by its endpoints; constructions with loop or parallel
    /// edges should build `opposite` explicitly instead.
    pub fn from_triangles(
        vertex_count: usize,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        use std::collections::HashMap;
        let mut directed: HashMap<(usize, usize), Vec<Slot>> = HashMap::new();
        for (f, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let u = t[(k + 1) % 3];
                let w = t[(k + 2) % 3];
                directed.entry((u, w)).or_default().push((f as u32, k as u8));
            }
        }
        let mut opposite = vec![[BOUNDARY; 3]; triangles.len()];
        for (&(u, w), slots) in directed.iter() {
            if u > w {
                continue;
            }
            let empty = Vec::new();
            let rev = if u == w {
                slots
            } else {
                directed.get(&(w, u)).unwrap_or(&empty)
            };
            if u != w && rev.is_empty() {
                // No reverse directed edge: boundary edge(s); leave unglued.
                continue;
            }
            if u == w {
                // Loop edge: pair slots of the same directed class in order.
                if slots.len() % 2 != 0 {
                    return Err(MeshError::NonManifold(u, w, slots.len()));
                }
                for pair in slots.chunks(2) {
                    let (f0, k0) = pair[0];
                    let (f1, k1) = pair[1];
                    opposite[f0 as usize][k0 as usize] = (f1, k1);
                    opposite[f1 as usize][k1 as usize] = (f0, k0);
                }
            } else {
                if slots.len() != rev.len() {
                    return Err(MeshError::NonManifold(u, w, slots.len() + rev.len()));
                }
                for (&(f0, k0), &(f1, k1)) in slots.iter().zip(rev.iter()) {
                    opposite[f0 as usize][k0 as usize] = (f1, k1);
                    opposite[f1 as usize][k1 as usize] = (f0, k0);
                }
            }
        }
        let t = AbstractTriangulation {
            vertex_count,
            triangles,
            opposite,
        };
        t.check_gluing()?;
        Ok(t)
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn check_gluing(&self) -> Result<(), MeshError> {
        for (f, opp) in self.opposite.iter().enumerate() {
            for k in 0..3 {
                let (f2, k2) = opp[k];
                if (f2, k2) == BOUNDARY {
                    continue;
                }
                if f2 == u32::MAX
                    || f2 as usize >= self.opposite.len()
                    || self.opposite[f2 as usize][k2 as usize] != (f as u32, k as u8)
                {
                    return Err(MeshError::BadGluing(f as u32, k as u8));
                }
            }
        }
        Ok(())
    }

    /// V, E, F, Euler characteristic and basic classification.
    pub fn euler_audit(&self) -> Result<EulerAudit, MeshError> {
        self.check_gluing()?;
        let f = self.face_count();
        let boundary_slots = self
            .opposite
            .iter()
            .flatten()
            .filter(|&&s| s == BOUNDARY)
            .count();
        debug_assert!((3 * f + boundary_slots) % 2 == 0);
        let e = (3 * f - boundary_slots) / 2 + boundary_slots;
        let v = self.vertex_count;
        // Orientation compatibility: a gluing must reverse the direction of
        // the shared edge.
        let mut orientable = true;
        let mut simplicial = true;
        for (fi, opp) in self.opposite.iter().enumerate() {
            let t = self.triangles[fi];
            for k in 0..3 {
                let (fj, kj) = opp[k];
                if (fj, kj) == BOUNDARY {
                    continue;
                }
                let t2 = self.triangles[fj as usize];
                let (u, w) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                let (u2, w2) = (
                    t2[(kj as usize + 1) % 3],
                    t2[(kj as usize + 2) % 3],
                );
                if (u, w) != (w2, u2) {
                    orientable = false;
                }
                if u == w {
                    simplicial = false;
                }
            }
            // Parallel edges: two corners of one face with identical vertices
            // are a degenerate case already covered; full parallel-edge
            // detection below.
        }
        // Parallel edges: same unordered endpoint pair on two distinct edges.
        {
            use std::collections::HashMap;
            let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
            for (fi, opp) in self.opposite.iter().enumerate() {
                let t = self.triangles[fi];
                for k in 0..3 {
                    // Count each undirected edge once via slot ordering.
                    let (fj, kj) = opp[k];
                    if (fj as usize, kj as usize) < (fi, k) {
                        continue;
                    }
                    let (u, w) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                    let key = (u.min(w), u.max(w));
                    *seen.entry(key).or_insert(0) += 1;
                }
            }
            if seen.values().any(|&c| c > 1) {
                simplicial = false;
            }
        }
        Ok(EulerAudit {
            v,
            e,
            f,
            chi: v as i64 - e as i64 + f as i64,
            orientable,
            closed: boundary_slots == 0,
            simplicial,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EulerAudit {
    pub v: usize,
    pub e: usize,
    pub f: usize,
    pub chi: i64,
    pub orientable: bool,
    pub closed: bool,
    pub simplicial: bool,
}

/// A triangulation with an intrinsic flat metric: per-corner edge lengths.
/// `edge_length[f][k]` is the length of the edge opposite corner `k` of
/// face `f` (equal across a gluing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTriangulation {
    pub base: AbstractTriangulation,
    pub edge_length: Vec<[f64; 3]>,
}

impl MetricTriangulation {
    pub fn validate(&self) -> Result<(), MeshError> {
        for (f, l) in self.edge_length.iter().enumerate() {
            if !(l[0] + l[1] > l[2] && l[1] + l[2] > l[0] && l[2] + l[0] > l[1]) {
                return Err(MeshError::TriangleInequality(f, *l));
            }
        }
        Ok(())
    }

    /// Interior angle at corner `k` of face `f` by the law of cosines.
    pub fn corner_angle(&self, f: usize, k: usize) -> f64 {
        let l = self.edge_length[f];
        let a = l[k]; // opposite the corner
        let b = l[(k + 1) % 3];
        let c = l[(k + 2) % 3];
        ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0).acos()
    }

    /// Max |angle sum − 2π| over vertices.
    pub fn flatness_defect(&self) -> Result<f64, MeshError> {
        self.validate()?;
        let mut sums = vec![0.0f64; self.base.vertex_count];
        for f in 0..self.base.face_count() {
            for k in 0..3 {
                sums[self.base.triangles[f][k]] += self.corner_angle(f, k);
            }
        }
        Ok(sums
            .iter()
            .map(|s| (s - 2.0 * PI).abs())
            .fold(0.0, f64::max))
    }

    /// Max |cone angle − 2π| over surface vertices, where a surface vertex
    /// is an orbit of face corners under the walk around the vertex through
    /// the gluing. Agrees with `flatness_defect` when vertex ids equal
    /// orbits, and is the meaningful notion for complexes with duplicated
    /// vertex ids (e.g. after OBJ-style export).
    pub fn cone_defect(&self) -> Result<f64, MeshError> {
        self.validate()?;
        self.base.check_gluing()?;
        let nf = self.base.face_count();
        let mut seen = vec![[false; 3]; nf];
        let mut worst = 0.0f64;
        for f0 in 0..nf {
            for k0 in 0..3 {
                if seen[f0][k0] {
                    continue;
                }
                let mut sum = 0.0;
                let (mut f, mut k) = (f0, k0);
                let mut hit_boundary = false;
                loop {
                    seen[f][k] = true;
                    sum += self.corner_angle(f, k);
                    // Cross the edge slot k+2 (which contains corner k);
                    // corner k maps to corner s'+2 on the other side.
                    let (f2, s2) = self.base.opposite[f][(k + 2) % 3];
                    if (f2, s2) == crate::flat_mesh::BOUNDARY {
                        hit_boundary = true;
                        break;
                    }
                    f = f2 as usize;
                    k = (s2 as usize + 2) % 3;
                    if (f, k) == (f0, k0) {
                        break;
                    }
                }
                if hit_boundary {
                    // Boundary vertex: walk the other way to mark the rest of
                    // the orbit; no cone condition is imposed on the boundary.
                    let (mut f, mut k) = (f0, k0);
                    loop {
                        seen[f][k] = true;
                        // Inverse walk: cross slot k+1; the new corner is
                        // s'+1 on the other side.
                        let (f2, s2) = self.base.opposite[f][(k + 1) % 3];
                        if (f2, s2) == crate::flat_mesh::BOUNDARY {
                            break;
                        }
                        f = f2 as usize;
                        k = (s2 as usize + 1) % 3;
                    }
                    continue;
                }
                worst = worst.max((sum - 2.0 * PI).abs());
            }
        }
        Ok(worst)
    }

    pub fn heron_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.edge_length[f];
        let p = 0.5 * (a + b + c);
        (p * (p - a) * (p - b) * (p - c)).max(0.0).sqrt()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.base.face_count()).map(|f| self.heron_area(f)).sum()
    }
}

/// A geometric realization: vertex coordinates in E³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricMesh {
    pub base: AbstractTriangulation,
    pub position: Vec<Point3<f64>>,
}

impl GeometricMesh {
    pub fn induced_metric(&self) -> MetricTriangulation {
        let edge_length = self
            .base
            .triangles
            .iter()
            .map(|t| {
                let p = [self.position[t[0]], self.position[t[1]], self.position[t[2]]];
                [
                    (p[1] - p[2]).norm(),
                    (p[2] - p[0]).norm(),
                    (p[0] - p[1]).norm(),
                ]
            })
            .collect();
        MetricTriangulation {
            base: self.base.clone(),
            edge_length,
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        for (f, t) in self.base.triangles.iter().enumerate() {
            let a = self.position[t[1]] - self.position[t[0]];
            let b = self.position[t[2]] - self.position[t[0]];
            if a.cross(&b).norm() <= 1e-300 {
                return Err(MeshError::Degenerate(f));
            }
        }
        Ok(())
    }
}

/// Planar coordinates of one lift of each face corner (an exact chart of the
/// intrinsic metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatChart {
    /// `corner[f][k]` = planar position of corner `k` of face `f`.
    pub corner: Vec<[[f64; 2]; 3]>,
}

impl FlatChart {
    pub fn lengths(&self) -> Vec<[f64; 3]> {
        self.corner
            .iter()
            .map(|c| {
                let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                [d(c[1], c[2]), d(c[2], c[0]), d(c[0], c[1])]
            })
            .collect()
    }
}

/// The §4.1 almost-equilateral triangulation of T_τ: the equilateral lattice
/// triangulation deformed by the linear map ℓ with 1 ↦ 1 and p_{a,b} ↦ τ,
/// quotiented by Zτ + Z.
pub fn lattice_triangulation(
    tau: Modulus,
    n: usize,
) -> Result<(MetricTriangulation, FlatChart), MeshError> {
    assert!(n >= 1);
    let nn = n as f64;
    // Nearest lattice point p_{a,b} = a e^{iπ/3}/n + b/n to τ, with a ≥ 1 so
    // the quotient is a torus.
    let omega = Complex64::from_polar(1.0 / nn, PI / 3.0);
    let tau_c = tau.as_complex();
    let a0 = (tau.im / omega.im).round().max(1.0) as i64;
    let mut best: Option<(i64, i64, f64)> = None;
    for a in (a0 - 2).max(1)..=(a0 + 2) {
        let b0 = ((tau.re - a as f64 * omega.re) * nn).round() as i64;
        for b in b0 - 2..=b0 + 2 {
            let p = a as f64 * omega + Complex64::new(b as f64 / nn, 0.0);
            let d = (tau_c - p).norm();
            let better = match best {
                None => true,
                Some((ba, bb, bd)) => {
                    d < bd - 1e-15 || (d < bd + 1e-15 && (a, b) < (ba, bb))
                }
            };
            if better {
                best = Some((a, b, d));
            }
        }
    }
    let (a, b, _) = best.unwrap();
    let (an, bn) = (a, b);
    let n_i = n as i64;
    // ℓ(u) with u = 1/n stays 1/n; ℓ(ω) = (τ − b/n)/a.
    let lu = Complex64::new(1.0 / nn, 0.0);
    let lo = (tau_c - Complex64::new(bn as f64 / nn, 0.0)) / (an as f64);
    let chart_point = |i: i64, j: i64| lo * (i as f64) + lu * (j as f64);

    // Canonical representative of (i, j) in Z²/⟨(a, b), (0, n)⟩.
    let canon = |i: i64, j: i64| -> (i64, i64) {
        let q = i.div_euclid(an);
        let i2 = i - q * an;
        let j2 = (j - q * bn).rem_euclid(n_i);
        (i2, j2)
    };
    let vid = |i: i64, j: i64| -> usize {
        let (i2, j2) = canon(i, j);
        (i2 * n_i + j2) as usize
    };
    let cell = |i: i64, j: i64| -> i64 {
        let (i2, j2) = canon(i, j);
        i2 * n_i + j2
    };
    let up = |i: i64, j: i64| -> u32 { (2 * cell(i, j)) as u32 };
    let down = |i: i64, j: i64| -> u32 { (2 * cell(i, j) + 1) as u32 };

    let vcount = (an * n_i) as usize;
    let fcount = 2 * vcount;
    let mut triangles = vec![[0usize; 3]; fcount];
    let mut opposite = vec![[(0u32, 0u8); 3]; fcount];
    let mut corners = vec![[[0.0f64; 2]; 3]; fcount];
    for i in 0..an {
        for j in 0..n_i {
            let fu = up(i, j) as usize;
            let fd = down(i, j) as usize;
            // Up triangle (i,j), (i,j+1), (i+1,j); down triangle
            // (i+1,j+1), (i+1,j), (i,j+1); both counterclockwise.
            triangles[fu] = [vid(i, j), vid(i, j + 1), vid(i + 1, j)];
            triangles[fd] = [vid(i + 1, j + 1), vid(i + 1, j), vid(i, j + 1)];
            let pt = |i: i64, j: i64| {
                let z = chart_point(i, j);
                [z.re, z.im]
            };
            corners[fu] = [pt(i, j), pt(i, j + 1), pt(i + 1, j)];
            corners[fd] = [pt(i + 1, j + 1), pt(i + 1, j), pt(i, j + 1)];
            opposite[fu] = [(down(i, j), 0), (down(i, j - 1), 1), (down(i - 1, j), 2)];
            opposite[fd] = [(up(i, j), 0), (up(i, j + 1), 1), (up(i + 1, j), 2)];
        }
    }
    let base = AbstractTriangulation {
        vertex_count: vcount,
        triangles,
        opposite,
    };
    base.check_gluing()?;
    let chart = FlatChart { corner: corners };
    let mt = MetricTriangulation {
        edge_length: chart.lengths(),
        base,
    };
    mt.validate()?;
    Ok((mt, chart))
}

/// Distance from τ to the fitted lattice point, for the §4.1 bound
/// |τ − p_{a,b}| ≤ 1/(n√3).
pub fn lattice_fit_distance(tau: Modulus, n: usize) -> f64 {
    let nn = n as f64;
    let omega = Complex64::from_polar(1.0 / nn, PI / 3.0);
    let tau_c = tau.as_complex();
    let a0 = (tau.im / omega.im).round().max(1.0) as i64;
    let mut best = f64::INFINITY;
    for a in (a0 - 2).max(1)..=(a0 + 2) {
        let b0 = ((tau.re - a as f64 * omega.re) * nn).round() as i64;
        for b in b0 - 2..=b0 + 2 {
            let p = a as f64 * omega + Complex64::new(b as f64 / nn, 0.0);
            best = best.min((tau_c - p).norm());
        }
    }
    best
}

/// Replace each face by n² similar faces (uniform barycentric subdivision).
pub fn uniform_subdivide(mt: &MetricTriangulation, n: usize) -> MetricTriangulation {
    assert!(n >= 1);
    if n == 1 {
        return mt.clone();
    }
    let nf = mt.base.face_count();
    // Grid point (f, i, j), i + j ≤ n. Union-find identifies points across
    // parent-edge gluings (corners close up through edge orbits).
    let pid = |f: usize, i: usize, j: usize| -> usize {
        f * ((n + 1) * (n + 2) / 2) + (i * (2 * n + 3 - i)) / 2 + j
    };
    let total_pts = nf * ((n + 1) * (n + 2) / 2);
    let mut parent: Vec<usize> = (0..total_pts).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let ra = find(parent, a);
        let rb = find(parent, b);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    // Grid point m = 0..n along slot k of face f, measured from corner k+1.
    let slot_point = |f: usize, k: usize, m: usize| -> usize {
        match k {
            0 => pid(f, n - m, m),
            1 => pid(f, 0, n - m),
            _ => pid(f, m, 0),
        }
    };
    for f in 0..nf {
        for k in 0..3 {
            let (f2, k2) = mt.base.opposite[f][k];
            if (f2, k2) == BOUNDARY || (f2 as usize, k2 as usize) < (f, k) {
                continue;
            }
            for m in 0..=n {
                union(
                    &mut parent,
                    slot_point(f, k, m),
                    slot_point(f2 as usize, k2 as usize, n - m),
                );
            }
        }
    }
    // Compress to vertex ids.
    let mut vid = vec![usize::MAX; total_pts];
    let mut vcount = 0usize;
    for x in 0..total_pts {
        let r = find(&mut parent, x);
        if vid[r] == usize::MAX {
            vid[r] = vcount;
            vcount += 1;
        }
        vid[x] = vid[r];
    }

    // Faces: per parent face, up(i,j) for i+j ≤ n−1 and down(i,j) for
    // i+j ≤ n−2. Face ids are assigned in that deterministic order.
    let mut up_id = vec![vec![u32::MAX; 0]; 0];
    let mut down_id = vec![vec![u32::MAX; 0]; 0];
    let mut fid = 0u32;
    for _f in 0..nf {
        let mut ups = vec![u32::MAX; n * (n + 1) / 2];
        let mut downs = vec![u32::MAX; (n - 1) * n / 2];
        for slot in ups.iter_mut().chain(downs.iter_mut()) {
            *slot = fid;
            fid += 1;
        }
        up_id.push(ups);
        down_id.push(downs);
    }
    let up_at = |f: usize, i: usize, j: usize| -> u32 {
        // Row-major over i with shrinking rows.
        let offset: usize = (0..i).map(|r| n - r).sum();
        up_id[f][offset + j]
    };
    let down_at = |f: usize, i: usize, j: usize| -> u32 {
        let offset: usize = (0..i).map(|r| n - 1 - r).sum();
        down_id[f][offset + j]
    };

    let fcount2 = fid as usize;
    let mut triangles = vec![[0usize; 3]; fcount2];
    let mut opposite = vec![[BOUNDARY; 3]; fcount2];
    let mut lengths = vec![[0.0f64; 3]; fcount2];
    for f in 0..nf {
        let [la, lb, lc] = mt.edge_length[f];
        let (sa, sb, sc) = (la / n as f64, lb / n as f64, lc / n as f64);
        for i in 0..n {
            for j in 0..(n - i) {
                let fu = up_at(f, i, j) as usize;
                triangles[fu] = [
                    vid[pid(f, i, j)],
                    vid[pid(f, i + 1, j)],
                    vid[pid(f, i, j + 1)],
                ];
                // Corner 0 ↦ parent corner-0 role etc.: edge {1,2} is
                // parallel to parent edge opposite corner 0.
                lengths[fu] = [sa, sb, sc];
            }
        }
    }
    // Gluings in a second pass.
    for f in 0..nf {
        for i in 0..n {
            for j in 0..(n - i) {
                let fu = up_at(f, i, j) as usize;
                // Slot 0: edge {(i+1,j),(i,j+1)} ↔ down(i,j).1 … but the
                // hypotenuse of up(i,j) with i+j = n−1 is on the parent
                // slot-0 edge.
                if i + j <= n.saturating_sub(2) {
                    opposite[fu][0] = (down_at(f, i, j), 1);
                }
                // Slot 1: edge {(i,j),(i,j+1)} ↔ down(i−1,j).2 or parent slot 1.
                if i >= 1 {
                    opposite[fu][1] = (down_at(f, i - 1, j), 2);
                }
                // Slot 2: edge {(i,j),(i+1,j)} ↔ down(i,j−1).0 or parent slot 2.
                if j >= 1 {
                    opposite[fu][2] = (down_at(f, i, j - 1), 0);
                }
            }
        }
        for i in 0..n.saturating_sub(1) {
            for j in 0..(n - 1 - i) {
                let fd = down_at(f, i, j) as usize;
                triangles[fd] = [
                    vid[pid(f, i + 1, j + 1)],
                    vid[pid(f, i, j + 1)],
                    vid[pid(f, i + 1, j)],
                ];
                let [la, lb, lc] = mt.edge_length[f];
                lengths[fd] = [la / n as f64, lb / n as f64, lc / n as f64];
                opposite[fd][0] = (up_at(f, i, j + 1), 2);
                opposite[fd][1] = (up_at(f, i, j), 0);
                opposite[fd][2] = (up_at(f, i + 1, j), 1);
            }
        }
    }
    // Parent-edge gluings: sub-edge m of (f, k) ↔ sub-edge n−1−m of (f2, k2).
    let slot_face = |f: usize, k: usize, m: usize| -> (u32, u8) {
        match k {
            0 => (up_at(f, n - 1 - m, m), 0),
            1 => (up_at(f, 0, n - 1 - m), 1),
            _ => (up_at(f, m, 0), 2),
        }
    };
    for f in 0..nf {
        for k in 0..3 {
            let (f2, k2) = mt.base.opposite[f][k];
            if (f2, k2) == BOUNDARY {
                continue;
            }
            for m in 0..n {
                let (fa, ka) = slot_face(f, k, m);
                let (fb, kb) = slot_face(f2 as usize, k2 as usize, n - 1 - m);
                opposite[fa as usize][ka as usize] = (fb, kb);
                opposite[fb as usize][kb as usize] = (fa, ka);
            }
        }
    }

    let base = AbstractTriangulation {
        vertex_count: vcount,
        triangles,
        opposite,
    };
    debug_assert!(base.check_gluing().is_ok());
    MetricTriangulation {
        base,
        edge_length: lengths,
    }
}

// Correction note for up-triangle orientation: up(i,j) corners are laid out
// as (i,j) → (i+1,j) → (i,j+1); with the convention that the parent corners
// are P0 (i=j=0), P1 (i=n) and P2 (j=n), this matches the parent's
// counterclockwise orientation, and edge slot 0 faces the parent hypotenuse.

/// Result of developing a flat mesh into the plane.
#[derive(Debug, Clone)]
pub struct Development {
    /// Planar layout of each face's corners.
    pub layout: Vec<[[f64; 2]; 3]>,
    /// Two translation generators of the holonomy lattice.
    pub holonomy: (Complex64, Complex64),
    /// Largest rotation angle seen on a cut edge (should be ≈ 0 for a flat
    /// torus).
    pub max_rotation_defect: f64,
    /// Worst disagreement between laid-out edge lengths and input lengths.
    pub max_length_defect: f64,
}

/// Lay out a fundamental domain in the plane along a breadth-first dual
/// spanning tree from face 0, and return the translation holonomies.
pub fn develop(mt: &MetricTriangulation) -> Result<Development, MeshError> {
    mt.validate()?;
    let nf = mt.base.face_count();
    let mut layout = vec![[[f64::NAN; 2]; 3]; nf];
    let mut placed = vec![false; nf];
    // Face 0: corner 0 at origin, corner 1 on the positive x-axis.
    {
        let [la, lb, lc] = mt.edge_length[0];
        let x = (lb * lb + lc * lc - la * la) / (2.0 * lc);
        let y = (lb * lb - x * x).max(0.0).sqrt();
        layout[0] = [[0.0, 0.0], [lc, 0.0], [x, y]];
        placed[0] = true;
    }
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(0usize);
    let mut translations: Vec<Complex64> = Vec::new();
    let mut max_rot: f64 = 0.0;
    let mut visited_edges = std::collections::HashSet::new();
    while let Some(f) = queue.pop_front() {
        for k in 0..3 {
            let (f2u, k2u) = mt.base.opposite[f][k];
            if (f2u, k2u) == BOUNDARY {
                continue;
            }
            let (f2, k2) = (f2u as usize, k2u as usize);
            let ekey = ((f, k).min((f2, k2)), (f, k).max((f2, k2)));
            if visited_edges.contains(&ekey) {
                continue;
            }
            visited_edges.insert(ekey);
            // Virtual placement of f2 glued across this edge: corner k2+1 of
            // f2 coincides with corner k+2 of f, corner k2+2 with corner k+1.
            let a = layout[f][(k + 2) % 3]; // = corner k2+1 of f2
            let b = layout[f][(k + 1) % 3]; // = corner k2+2 of f2
            let l2 = mt.edge_length[f2];
            let apex = place_apex(a, b, l2[(k2 + 2) % 3], l2[(k2 + 1) % 3]);
            let mut virt = [[0.0f64; 2]; 3];
            virt[(k2 + 1) % 3] = a;
            virt[(k2 + 2) % 3] = b;
            virt[k2] = apex;
            if !placed[f2] {
                layout[f2] = virt;
                placed[f2] = true;
                queue.push_back(f2);
            } else {
                // Cut edge: transition from the actual layout of f2 to the
                // virtual placement is α z + β.
                let za = Complex64::new(virt[(k2 + 1) % 3][0], virt[(k2 + 1) % 3][1]);
                let zb = Complex64::new(virt[(k2 + 2) % 3][0], virt[(k2 + 2) % 3][1]);
                let wa = Complex64::new(
                    layout[f2][(k2 + 1) % 3][0],
                    layout[f2][(k2 + 1) % 3][1],
                );
                let wb = Complex64::new(
                    layout[f2][(k2 + 2) % 3][0],
                    layout[f2][(k2 + 2) % 3][1],
                );
                let alpha = (za - zb) / (wa - wb);
                let beta = za - alpha * wa;
                max_rot = max_rot.max(alpha.arg().abs());
                if beta.norm() > 1e-9 {
                    translations.push(beta);
                }
            }
        }
    }
    if placed.iter().any(|&p| !p) {
        return Err(MeshError::Disconnected);
    }
    if max_rot > 1e-7 {
        return Err(MeshError::RotationalHolonomy(max_rot));
    }
    let holonomy = lattice_basis(&translations);
    // Length audit.
    let mut max_len = 0.0f64;
    for f in 0..nf {
        let c = layout[f];
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let got = [d(c[1], c[2]), d(c[2], c[0]), d(c[0], c[1])];
        for k in 0..3 {
            max_len = max_len.max((got[k] - mt.edge_length[f][k]).abs());
        }
    }
    Ok(Development {
        layout,
        holonomy,
        max_rotation_defect: max_rot,
        max_length_defect: max_len,
    })
}

fn place_apex(a: [f64; 2], b: [f64; 2], dist_a: f64, dist_b: f64) -> [f64; 2] {
    // Apex at distance dist_a from a and dist_b from b, on the left of a→b
    // (counterclockwise orientation).
    let ex = b[0] - a[0];
    let ey = b[1] - a[1];
    let l = (ex * ex + ey * ey).sqrt();
    let (ux, uy) = (ex / l, ey / l);
    let (nx, ny) = (-uy, ux);
    let x = (dist_a * dist_a - dist_b * dist_b + l * l) / (2.0 * l);
    let y = (dist_a * dist_a - x * x).max(0.0).sqrt();
    [a[0] + x * ux + y * nx, a[1] + x * uy + y * ny]
}

/// Reduce a set of translations to a lattice basis (Gaussian reduction).
fn lattice_basis(translations: &[Complex64]) -> (Complex64, Complex64) {
    let mut ts: Vec<Complex64> = translations.to_vec();
    ts.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    let w1 = match ts.first() {
        Some(&w) => w,
        None => return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)),
    };
    let mut w2 = Complex64::new(0.0, 0.0);
    for &t in &ts[1..] {
        let cross = (t.conj() * w1).im.abs();
        if cross > 1e-9 * t.norm() * w1.norm() {
            w2 = t;
            break;
        }
    }
    if w2.norm() == 0.0 {
        return (w1, w1 * Complex64::new(0.0, 1.0));
    }
    // Gauss-reduce the pair.
    let (mut u, mut v) = (w1, w2);
    for _ in 0..200 {
        let m = ((v.conj() * u).re / u.norm_sqr()).round();
        v -= u * m;
        if v.norm() < u.norm() {
            std::mem::swap(&mut u, &mut v);
        } else {
            break;
        }
    }
    if (v / u).im < 0.0 {
        v = -v;
    }
    (u, v)
}
