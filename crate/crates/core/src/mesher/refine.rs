//! Delaunay refinement of circles-in-a-circle domains.
//!
//! Every boundary segment is a chord of one of the input circles. Splitting a
//! segment inserts the midpoint of its arc, so boundary vertices always lie on
//! their circle and the polygons converge to the circles as they refine.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use super::delaunay::{orient, InsertError, Triangulation, NONE};
use super::SizeField;

/// Skinny-triangle threshold: circumradius / shortest edge > 1 / (2 sin 20°).
const MAX_RADIUS_EDGE: f64 = 1.461_902_200_081_543_5;
/// An edge is too long when it exceeds this multiple of the local size.
pub const LENGTH_FACTOR: f64 = 1.5;
/// Refinement gives up after this many Steiner points.
const MAX_STEINER: usize = 400_000;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub a: u32,
    pub b: u32,
    pub circle: u32,
    /// arc angles of a and b, with `ta < tb`
    pub ta: f64,
    pub tb: f64,
    pub alive: bool,
}

pub(crate) struct Refiner<'a> {
    pub tr: Triangulation,
    pub circles: Vec<Circle>,
    pub segs: Vec<Segment>,
    seg_of_edge: HashMap<(u32, u32), u32>,
    size: &'a SizeField,
    seg_queue: VecDeque<u32>,
    tri_queue: VecDeque<u32>,
    min_seg_len: f64,
    steiner: usize,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn on_circle(c: &Circle, t: f64) -> [f64; 2] {
    [c.center[0] + c.radius * t.cos(), c.center[1] + c.radius * t.sin()]
}

fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    // relative to a for accuracy
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

/// True if `p` lies in the closed diametral disk of segment `ab`.
fn encroaches(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    let (ux, uy) = (a[0] - p[0], a[1] - p[1]);
    let (vx, vy) = (b[0] - p[0], b[1] - p[1]);
    let dot = ux * vx + uy * vy;
    dot <= 1e-12 * (ux.hypot(uy) * vx.hypot(vy))
}

impl<'a> Refiner<'a> {
    /// Triangulates the discretized circles. `counts[k]` is the number of
    /// initial vertices on `circles[k]`.
    pub fn new(circles: Vec<Circle>, counts: &[usize], extent: f64, size: &'a SizeField) -> Result<Self, String> {
        let mut tr = Triangulation::new(extent);
        let mut segs = Vec::new();
        let mut seg_of_edge = HashMap::new();
        for (ci, (circle, &m)) in circles.iter().zip(counts).enumerate() {
            let mut ids = Vec::with_capacity(m);
            for k in 0..m {
                let t = 2.0 * PI * k as f64 / m as f64;
                let p = on_circle(circle, t);
                let (v, _) = tr.insert(p, NONE).map_err(|e| format!("could not insert boundary vertex: {e:?}"))?;
                ids.push((v, t));
            }
            for k in 0..m {
                let (a, ta) = ids[k];
                let (b, tb) = if k + 1 == m { (ids[0].0, 2.0 * PI) } else { ids[k + 1] };
                seg_of_edge.insert(key(a, b), segs.len() as u32);
                segs.push(Segment { a, b, circle: ci as u32, ta, tb, alive: true });
            }
        }
        let seg_queue = (0..segs.len() as u32).collect();
        Ok(Self {
            tr,
            circles,
            segs,
            seg_of_edge,
            size,
            seg_queue,
            tri_queue: VecDeque::new(),
            min_seg_len: 1e-7 * extent,
            steiner: 0,
        })
    }

    fn is_domain(&self, t: u32) -> bool {
        self.tr.tris[t as usize].v.iter().all(|&v| !Triangulation::is_super(v))
    }

    fn seg_len(&self, s: &Segment) -> f64 {
        dist(self.tr.point(s.a), self.tr.point(s.b))
    }

    fn seg_needs_split(&self, s: u32) -> bool {
        let seg = self.segs[s as usize];
        let (pa, pb) = (self.tr.point(seg.a), self.tr.point(seg.b));
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        if dist(pa, pb) > LENGTH_FACTOR * self.size.eval(mid) {
            return true;
        }
        let mut present = false;
        for (x, y) in [(seg.a, seg.b), (seg.b, seg.a)] {
            if let Some((t, k)) = self.tr.find_edge(x, y) {
                present = true;
                let apex = self.tr.tris[t as usize].v[k];
                if !Triangulation::is_super(apex) && encroaches(pa, pb, self.tr.point(apex)) {
                    return true;
                }
            }
        }
        !present
    }

    /// Segments that are edges of any cavity triangle.
    fn segments_touching(&self, cav: &[u32]) -> Vec<u32> {
        let mut out = Vec::new();
        for &t in cav {
            let v = self.tr.tris[t as usize].v;
            for k in 0..3 {
                if let Some(&s) = self.seg_of_edge.get(&key(v[k], v[(k + 1) % 3])) {
                    if !out.contains(&s) {
                        out.push(s);
                    }
                }
            }
        }
        out
    }

    fn insert_point(&mut self, p: [f64; 2], cav: Vec<u32>) -> Result<u32, String> {
        let touched = self.segments_touching(&cav);
        let (v, fan) = match self.tr.insert_with_cavity(p, &cav) {
            Ok(r) => r,
            Err(InsertError::Duplicate(v)) => return Err(format!("inserted point coincides with vertex {v}")),
            Err(InsertError::Degenerate) => return Err("degenerate cavity during refinement".into()),
        };
        self.steiner += 1;
        if self.steiner > MAX_STEINER {
            return Err(format!("refinement did not converge within {MAX_STEINER} inserted points"));
        }
        self.seg_queue.extend(touched);
        self.tri_queue.extend(fan);
        Ok(v)
    }

    fn split_segment(&mut self, s: u32) -> Result<(), String> {
        let seg = self.segs[s as usize];
        if !seg.alive {
            return Ok(());
        }
        if self.seg_len(&seg) < self.min_seg_len {
            return Err("boundary segment became too short; conductors may be nearly touching".into());
        }
        let tm = 0.5 * (seg.ta + seg.tb);
        let p = on_circle(&self.circles[seg.circle as usize], tm);
        let start = self.tr.find_edge(seg.a, seg.b).map(|(t, _)| t).unwrap_or(NONE);
        let cav = self.tr.cavity(p, start).map_err(|e| format!("could not split segment: {e:?}"))?;
        self.segs[s as usize].alive = false;
        self.seg_of_edge.remove(&key(seg.a, seg.b));
        let m = self.insert_point(p, cav)?;
        for (a, b, ta, tb) in [(seg.a, m, seg.ta, tm), (m, seg.b, tm, seg.tb)] {
            let id = self.segs.len() as u32;
            self.seg_of_edge.insert(key(a, b), id);
            self.segs.push(Segment { a, b, circle: seg.circle, ta, tb, alive: true });
            self.seg_queue.push_back(id);
        }
        Ok(())
    }

    fn is_bad(&self, t: u32) -> bool {
        let v = self.tr.tris[t as usize].v;
        let p = v.map(|i| self.tr.point(i));
        let l = [dist(p[1], p[2]), dist(p[2], p[0]), dist(p[0], p[1])];
        let area = 0.5 * orient(p[0], p[1], p[2]);
        let lmin = l[0].min(l[1]).min(l[2]);
        let circum_r = l[0] * l[1] * l[2] / (4.0 * area);
        if circum_r / lmin > MAX_RADIUS_EDGE {
            return true;
        }
        (0..3).any(|k| {
            let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            l[k] > LENGTH_FACTOR * self.size.eval(mid)
        })
    }

    fn refine_triangle(&mut self, t: u32) -> Result<(), String> {
        let v = self.tr.tris[t as usize].v;
        let p = v.map(|i| self.tr.point(i));
        let cc = circumcenter(p[0], p[1], p[2]);
        let cav = match self.tr.cavity(cc, t) {
            Ok(c) => c,
            // a vertex already sits at the circumcenter; nothing sensible to add
            Err(_) => return Ok(()),
        };
        let mut encroached: Vec<u32> = self
            .segments_touching(&cav)
            .into_iter()
            .filter(|&s| {
                let seg = self.segs[s as usize];
                encroaches(self.tr.point(seg.a), self.tr.point(seg.b), cc)
            })
            .collect();
        if encroached.is_empty() {
            self.insert_point(cc, cav)?;
        } else {
            encroached.sort_unstable();
            for s in encroached {
                self.split_segment(s)?;
            }
            // retry the triangle later if it survives the splits
            self.tri_queue.push_back(t);
        }
        Ok(())
    }

    fn drain_segments(&mut self) -> Result<(), String> {
        while let Some(s) = self.seg_queue.pop_front() {
            if self.segs[s as usize].alive && self.seg_needs_split(s) {
                self.split_segment(s)?;
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<(), String> {
        self.drain_segments()?;
        self.tri_queue.extend(self.tr.alive_tris());
        while let Some(t) = self.tri_queue.pop_front() {
            let tri = self.tr.tris[t as usize];
            if tri.alive && self.is_domain(t) && self.is_bad(t) {
                self.refine_triangle(t)?;
                self.drain_segments()?;
            }
        }
        Ok(())
    }
}
