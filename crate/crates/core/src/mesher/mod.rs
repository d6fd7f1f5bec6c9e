//! Conforming triangular meshes of a circular domain with circular conductors.
//!
//! The outer circle and every conductor circle are discretized into polygons
//! whose edges are kept as constrained segments during Delaunay refinement.
//! Refinement stops when every triangle has a minimum angle of at least 20°
//! and no edge exceeds the local target size by more than 50%.
//!
//! Physical groups: conductor `i` (zero based) is tagged `i + 1` and named
//! `Omega_c_{i+1}`, the surrounding insulator is `Omega_i` with tag `N + 1`,
//! and the outer boundary edges are `Gamma_out` with tag `N + 2`.

mod delaunay;
mod refine;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{check_overlap, ConductorLayout, DomainBoundary, GeometryError, Point2};
use delaunay::{orient, Triangulation};
use refine::{Circle, Refiner};

pub use refine::LENGTH_FACTOR;

/// Smallest number of vertices used for any circle.
pub const MIN_CIRCLE_VERTICES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
}

/// Target edge lengths used by the mesher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSizeSpec {
    pub h_conductor_m: f64,
    pub h_far_m: f64,
    pub gradation: f64,
}

impl MeshSizeSpec {
    pub fn new(h_conductor_m: f64, h_far_m: f64, gradation: f64) -> Result<Self, GeometryError> {
        let s = Self { h_conductor_m, h_far_m, gradation };
        s.validate()?;
        Ok(s)
    }

    /// `r_c / 6` inside conductors, a tenth of the boundary radius far away,
    /// and a gradation of 1.5. Six elements per radius keep the inscribed
    /// polygon within 0.5% of the disk area.
    pub fn defaults_for(layout: &ConductorLayout, boundary: &DomainBoundary) -> Self {
        let h_c = layout.radius_m / 6.0;
        Self { h_conductor_m: h_c, h_far_m: (boundary.radius_m / 10.0).max(h_c), gradation: 1.5 }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.h_conductor_m > 0.0 && self.h_conductor_m.is_finite()) {
            return Err(GeometryError::InvalidParameter { what: "h_conductor_m", value: self.h_conductor_m });
        }
        if !(self.h_far_m >= self.h_conductor_m && self.h_far_m.is_finite()) {
            return Err(GeometryError::InvalidParameter { what: "h_far_m", value: self.h_far_m });
        }
        if !(self.gradation >= 1.0 && self.gradation.is_finite()) {
            return Err(GeometryError::InvalidParameter { what: "gradation", value: self.gradation });
        }
        Ok(())
    }
}

/// Piecewise linear size field in a frame where `centers` are given.
pub(crate) struct SizeField {
    centers: Vec<[f64; 2]>,
    radius: f64,
    h_c: f64,
    h_far: f64,
    slope: f64,
}

impl SizeField {
    fn new(centers: Vec<[f64; 2]>, radius: f64, outer_center: [f64; 2], outer_radius: f64, sizes: &MeshSizeSpec) -> Self {
        // every outer-boundary point is at least this far from all centers
        let reach = centers
            .iter()
            .map(|c| (c[0] - outer_center[0]).hypot(c[1] - outer_center[1]))
            .fold(0.0, f64::max);
        let ramp_end = outer_radius - reach;
        let max_slope = sizes.gradation - 1.0;
        let slope = if ramp_end > radius {
            ((sizes.h_far_m - sizes.h_conductor_m) / (ramp_end - radius)).min(max_slope)
        } else {
            max_slope
        };
        Self { centers, radius, h_c: sizes.h_conductor_m, h_far: sizes.h_far_m, slope }
    }

    pub(crate) fn eval(&self, p: [f64; 2]) -> f64 {
        let d = self
            .centers
            .iter()
            .map(|c| (p[0] - c[0]).hypot(p[1] - c[1]))
            .fold(f64::INFINITY, f64::min);
        if d <= self.radius {
            self.h_c
        } else {
            (self.h_c + self.slope * (d - self.radius)).min(self.h_far)
        }
    }
}

/// Target edge length at `point`: `h_conductor_m` within `r_c` of a conductor
/// center, then a linear ramp that reaches `h_far_m` at the outer boundary,
/// with slope capped at `gradation - 1`.
pub fn size_field(point: Point2, layout: &ConductorLayout, boundary: &DomainBoundary, sizes: &MeshSizeSpec) -> f64 {
    let centers = layout.centers.iter().map(|c| [c.x, c.y]).collect();
    SizeField::new(centers, layout.radius_m, [boundary.center.x, boundary.center.y], boundary.radius_m, sizes)
        .eval([point.x, point.y])
}

fn circle_vertex_count(radius: f64, h: f64) -> usize {
    ((2.0 * PI * radius / h).ceil() as usize).max(MIN_CIRCLE_VERTICES)
}

/// Equally spaced counter-clockwise vertices on a circle, starting at angle 0.
pub fn discretize_circle(center: Point2, radius: f64, h: f64) -> Vec<Point2> {
    let m = circle_vertex_count(radius, h);
    (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            Point2::new(center.x + radius * t.cos(), center.y + radius * t.sin())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub tag: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: u32,
}

/// A tagged triangular mesh. Triangles are counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub nodes: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub groups: BTreeMap<String, u32>,
}

pub fn conductor_group_name(i: usize) -> String {
    format!("Omega_c_{}", i + 1)
}

pub const INSULATOR_GROUP: &str = "Omega_i";
pub const OUTER_BOUNDARY_GROUP: &str = "Gamma_out";

impl TriMesh {
    /// Number of conductor groups (`Omega_c_*`).
    pub fn conductor_count(&self) -> usize {
        self.groups.keys().filter(|k| k.starts_with("Omega_c_")).count()
    }

    pub fn conductor_tag(&self, i: usize) -> Option<u32> {
        self.groups.get(&conductor_group_name(i)).copied()
    }

    pub fn group_tag(&self, name: &str) -> Option<u32> {
        self.groups.get(name).copied()
    }

    pub fn vertices(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].nodes.map(|i| self.nodes[i])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.vertices(t);
        Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    /// Total area of triangles carrying `tag`.
    pub fn tagged_area(&self, tag: u32) -> f64 {
        (0..self.triangles.len()).filter(|&t| self.triangles[t].tag == tag).map(|t| self.signed_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let p = self.vertices(t);
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let (u, v) = (b - a, c - a);
                let cos = (u.x * v.x + u.y * v.y) / (u.norm() * v.norm());
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Undirected edges with the number of triangles sharing each.
    pub fn edge_multiplicity(&self) -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri.nodes[k], tri.nodes[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Structural checks: index bounds, positive orientation, conformity,
    /// known tags, and boundary edges matching the mesh border.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.nodes.len();
        let known: Vec<u32> = self.groups.values().copied().collect();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.nodes.iter().any(|&i| i >= n) {
                return Err(format!("triangle {t} references a missing node"));
            }
            if !known.contains(&tri.tag) {
                return Err(format!("triangle {t} has unknown tag {}", tri.tag));
            }
            if self.signed_area(t) <= 0.0 {
                return Err(format!("triangle {t} is not positively oriented"));
            }
        }
        let edges = self.edge_multiplicity();
        if let Some((e, _)) = edges.iter().find(|(_, &c)| c > 2) {
            return Err(format!("edge {e:?} is shared by more than two triangles"));
        }
        let border: Vec<(usize, usize)> = edges.iter().filter(|(_, &c)| c == 1).map(|(e, _)| *e).collect();
        let mut declared: Vec<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])))
            .collect();
        declared.sort_unstable();
        if declared != border {
            return Err("boundary edges do not match the mesh border".into());
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[u64; 4]>,
    boundary_edges: Vec<[u64; 3]>,
    groups: BTreeMap<String, u32>,
}

impl Serialize for TriMesh {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawMesh {
            nodes: self.nodes.iter().map(|p| [p.x, p.y]).collect(),
            triangles: self
                .triangles
                .iter()
                .map(|t| [t.nodes[0] as u64, t.nodes[1] as u64, t.nodes[2] as u64, t.tag as u64])
                .collect(),
            boundary_edges: self
                .boundary_edges
                .iter()
                .map(|e| [e.nodes[0] as u64, e.nodes[1] as u64, e.tag as u64])
                .collect(),
            groups: self.groups.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TriMesh {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawMesh::deserialize(d)?;
        let tag = |v: u64| u32::try_from(v).map_err(serde::de::Error::custom);
        Ok(TriMesh {
            nodes: raw.nodes.iter().map(|&p| Point2::from(p)).collect(),
            triangles: raw
                .triangles
                .iter()
                .map(|t| Ok(Triangle { nodes: [t[0] as usize, t[1] as usize, t[2] as usize], tag: tag(t[3])? }))
                .collect::<Result<_, D::Error>>()?,
            boundary_edges: raw
                .boundary_edges
                .iter()
                .map(|e| Ok(BoundaryEdge { nodes: [e[0] as usize, e[1] as usize], tag: tag(e[2])? }))
                .collect::<Result<_, D::Error>>()?,
            groups: raw.groups,
        })
    }
}

/// Rounds to a power-of-two grid so that translated copies of a layout see
/// bit-identical local coordinates.
fn snap(x: f64, quantum: f64) -> f64 {
    (x / quantum).round() * quantum
}

/// Meshes the domain bounded by `boundary` with the conductors of `layout`.
pub fn generate_mesh(layout: &ConductorLayout, boundary: &DomainBoundary, sizes: &MeshSizeSpec) -> Result<TriMesh, MeshError> {
    layout.validate()?;
    sizes.validate()?;
    if !(boundary.radius_m > 0.0 && boundary.radius_m.is_finite() && boundary.center.is_finite()) {
        return Err(GeometryError::InvalidParameter { what: "boundary radius", value: boundary.radius_m }.into());
    }
    if let Some(&(i, _)) = check_overlap(layout).first() {
        let d = layout.centers.iter().skip(i + 1).map(|c| c.dist(layout.centers[i])).fold(f64::INFINITY, f64::min);
        return Err(GeometryError::InvalidParameter { what: "conductor spacing", value: d }.into());
    }
    let r = layout.radius_m;

    let quantum = 2f64.powi(boundary.radius_m.log2().floor() as i32 - 40);
    let outer_r = snap(boundary.radius_m, quantum);
    let local: Vec<[f64; 2]> = layout
        .centers
        .iter()
        .map(|c| [snap(c.x - boundary.center.x, quantum), snap(c.y - boundary.center.y, quantum)])
        .collect();
    for c in &local {
        let reach = c[0].hypot(c[1]) + r;
        if reach >= outer_r * (1.0 - 1e-9) {
            return Err(GeometryError::InvalidParameter { what: "boundary radius", value: boundary.radius_m }.into());
        }
    }

    let field = SizeField::new(local.clone(), r, [0.0, 0.0], outer_r, sizes);
    let mut circles = vec![Circle { center: [0.0, 0.0], radius: outer_r }];
    // outer chords start at the longest admissible length so that a later
    // encroachment split still leaves edges above half the local size
    let h_outer = sizes.h_far_m.min(field.eval([outer_r, 0.0]));
    let mut counts = vec![circle_vertex_count(outer_r, LENGTH_FACTOR * h_outer * 0.999)];
    for c in &local {
        circles.push(Circle { center: *c, radius: r });
        counts.push(circle_vertex_count(r, sizes.h_conductor_m));
    }

    let mut refiner = Refiner::new(circles, &counts, outer_r, &field).map_err(MeshError::MeshFailure)?;
    refiner.run().map_err(MeshError::MeshFailure)?;
    Ok(extract(&refiner, layout.len(), boundary.center))
}

fn extract(refiner: &Refiner<'_>, n_cond: usize, origin: Point2) -> TriMesh {
    let tr = &refiner.tr;
    let mut map = vec![usize::MAX; tr.pts.len()];
    let mut nodes = Vec::with_capacity(tr.pts.len());
    for (v, p) in tr.pts.iter().enumerate().skip(3) {
        map[v] = nodes.len();
        nodes.push(Point2::new(origin.x + p[0], origin.y + p[1]));
    }

    // per circle, alive segments sorted by start angle
    let mut loops: Vec<Vec<usize>> = vec![Vec::new(); refiner.circles.len()];
    for (s, seg) in refiner.segs.iter().enumerate() {
        if seg.alive {
            loops[seg.circle as usize].push(s);
        }
    }
    for l in &mut loops {
        l.sort_by(|&a, &b| refiner.segs[a].ta.total_cmp(&refiner.segs[b].ta));
    }

    let insulator = n_cond as u32 + 1;
    let outer = n_cond as u32 + 2;
    let inside = |ci: usize, p: [f64; 2]| -> bool {
        let circle = refiner.circles[ci];
        let (dx, dy) = (p[0] - circle.center[0], p[1] - circle.center[1]);
        if dx.hypot(dy) >= circle.radius {
            return false;
        }
        let mut t = dy.atan2(dx);
        if t < 0.0 {
            t += 2.0 * PI;
        }
        let segs = &loops[ci];
        let k = segs.partition_point(|&s| refiner.segs[s].ta <= t).saturating_sub(1);
        let seg = refiner.segs[segs[k]];
        orient(tr.point(seg.a), tr.point(seg.b), p) > 0.0
    };

    let mut triangles = Vec::new();
    for t in tr.alive_tris() {
        let v = tr.tris[t as usize].v;
        if v.iter().any(|&i| Triangulation::is_super(i)) {
            continue;
        }
        let p = v.map(|i| tr.point(i));
        let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let tag = (0..n_cond).find(|&i| inside(i + 1, c)).map(|i| i as u32 + 1).unwrap_or(insulator);
        triangles.push(Triangle { nodes: v.map(|i| map[i as usize]), tag });
    }

    let boundary_edges = loops[0]
        .iter()
        .map(|&s| {
            let seg = refiner.segs[s];
            BoundaryEdge { nodes: [map[seg.a as usize], map[seg.b as usize]], tag: outer }
        })
        .collect();

    let mut groups = BTreeMap::new();
    for i in 0..n_cond {
        groups.insert(conductor_group_name(i), i as u32 + 1);
    }
    groups.insert(INSULATOR_GROUP.to_string(), insulator);
    groups.insert(OUTER_BOUNDARY_GROUP.to_string(), outer);
    TriMesh { nodes, triangles, boundary_edges, groups }
}

/// Node indices of every boundary edge carrying `tag`.
pub fn boundary_nodes(mesh: &TriMesh, tag: u32) -> Vec<usize> {
    let mut seen: HashMap<usize, ()> = HashMap::new();
    let mut out = Vec::new();
    for e in mesh.boundary_edges.iter().filter(|e| e.tag == tag) {
        for &n in &e.nodes {
            if seen.insert(n, ()).is_none() {
                out.push(n);
            }
        }
    }
    out
}
