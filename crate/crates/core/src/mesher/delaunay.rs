//! Incremental Bowyer-Watson Delaunay triangulation with exact predicates.
//!
//! Vertices 0, 1, 2 form an enclosing super triangle, so every real vertex is
//! interior and has a closed ring of incident triangles. Triangles are stored
//! counter-clockwise; `nb[k]` is the neighbor across the edge opposite `v[k]`.

use robust::{incircle, orient2d, Coord};

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tri {
    pub v: [u32; 3],
    pub nb: [u32; 3],
    pub alive: bool,
}

#[derive(Debug)]
pub(crate) enum InsertError {
    Duplicate(u32),
    Degenerate,
}

pub(crate) struct Triangulation {
    pub pts: Vec<[f64; 2]>,
    pub tris: Vec<Tri>,
    vert_tri: Vec<u32>,
    free: Vec<u32>,
    last: u32,
    /// scratch marks for cavity search, indexed by triangle
    mark: Vec<u32>,
    epoch: u32,
}

#[inline]
fn c(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

pub(crate) fn orient(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    orient2d(c(a), c(b), c(p))
}

impl Triangulation {
    /// Creates a triangulation whose super triangle contains the disk of
    /// radius `extent` around the origin with a wide margin.
    pub fn new(extent: f64) -> Self {
        let r = 40.0 * extent;
        let s = 3f64.sqrt() / 2.0;
        let pts = vec![[-s * 2.0 * r, -r], [s * 2.0 * r, -r], [0.0, 2.0 * r]];
        let tri = Tri { v: [0, 1, 2], nb: [NONE; 3], alive: true };
        Self { pts, tris: vec![tri], vert_tri: vec![0, 0, 0], free: Vec::new(), last: 0, mark: vec![0], epoch: 0 }
    }

    pub fn is_super(v: u32) -> bool {
        v < 3
    }

    pub fn point(&self, v: u32) -> [f64; 2] {
        self.pts[v as usize]
    }

    fn contains(&self, t: u32, p: [f64; 2]) -> Option<usize> {
        // returns the first edge index p is strictly outside of, or None if inside/on
        let tri = &self.tris[t as usize];
        (0..3).find(|&k| {
            let a = self.point(tri.v[(k + 1) % 3]);
            let b = self.point(tri.v[(k + 2) % 3]);
            orient(a, b, p) < 0.0
        })
    }

    /// Walks from `start` to a triangle containing `p` (inside or on its boundary).
    pub fn locate(&self, p: [f64; 2], start: u32) -> u32 {
        let mut t = if start != NONE && self.tris[start as usize].alive { start } else { self.last };
        if !self.tris[t as usize].alive {
            t = self.tris.iter().position(|t| t.alive).expect("triangulation is never empty") as u32;
        }
        let mut guard = 0usize;
        loop {
            match self.contains(t, p) {
                None => return t,
                Some(k) => {
                    let next = self.tris[t as usize].nb[k];
                    // the super triangle encloses every inserted point
                    debug_assert!(next != NONE, "point outside the super triangle");
                    if next == NONE {
                        return t;
                    }
                    t = next;
                }
            }
            guard += 1;
            if guard > 4 * self.tris.len() + 16 {
                // cannot happen on a Delaunay triangulation; fall back to a scan
                return (0..self.tris.len() as u32)
                    .find(|&i| self.tris[i as usize].alive && self.contains(i, p).is_none())
                    .unwrap_or(t);
            }
        }
    }

    fn in_circumcircle(&self, t: u32, p: [f64; 2]) -> bool {
        let v = self.tris[t as usize].v;
        incircle(c(self.point(v[0])), c(self.point(v[1])), c(self.point(v[2])), c(p)) > 0.0
    }

    /// Triangles whose circumcircle strictly contains `p`, starting from the
    /// triangle that contains it. Fails if `p` coincides with a vertex.
    pub fn cavity(&mut self, p: [f64; 2], start: u32) -> Result<Vec<u32>, InsertError> {
        let t0 = self.locate(p, start);
        for &v in &self.tris[t0 as usize].v {
            if self.point(v) == p {
                return Err(InsertError::Duplicate(v));
            }
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let mut cav = vec![t0];
        self.mark[t0 as usize] = epoch;
        let mut i = 0;
        while i < cav.len() {
            let t = cav[i];
            i += 1;
            for k in 0..3 {
                let n = self.tris[t as usize].nb[k];
                if n == NONE || self.mark[n as usize] == epoch {
                    continue;
                }
                if self.in_circumcircle(n, p) {
                    self.mark[n as usize] = epoch;
                    cav.push(n);
                }
            }
        }
        Ok(cav)
    }

    fn alloc(&mut self, tri: Tri) -> u32 {
        if let Some(id) = self.free.pop() {
            self.tris[id as usize] = tri;
            id
        } else {
            self.tris.push(tri);
            self.mark.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    /// Inserts `p` using a cavity computed by [`Self::cavity`] for the same point.
    /// Returns the new vertex id and the new triangles (fan around it).
    pub fn insert_with_cavity(&mut self, p: [f64; 2], cav: &[u32]) -> Result<(u32, Vec<u32>), InsertError> {
        let epoch = self.epoch;
        let in_cav = |m: &Vec<u32>, t: u32| t != NONE && m[t as usize] == epoch;

        // boundary edges (a, b, outer neighbor), each counter-clockwise w.r.t. the cavity
        let mut rim: Vec<(u32, u32, u32)> = Vec::new();
        for &t in cav {
            let tri = self.tris[t as usize];
            for k in 0..3 {
                if !in_cav(&self.mark, tri.nb[k]) {
                    let a = tri.v[(k + 1) % 3];
                    let b = tri.v[(k + 2) % 3];
                    if orient(self.point(a), self.point(b), p) <= 0.0 {
                        return Err(InsertError::Degenerate);
                    }
                    rim.push((a, b, tri.nb[k]));
                }
            }
        }

        let vid = self.pts.len() as u32;
        self.pts.push(p);
        self.vert_tri.push(NONE);
        for &t in cav {
            self.tris[t as usize].alive = false;
            self.free.push(t);
        }
        // reuse freed slots in a fixed order so runs are reproducible
        self.free.sort_unstable_by(|a, b| b.cmp(a));

        let mut fan = Vec::with_capacity(rim.len());
        for &(a, b, outer) in &rim {
            let id = self.alloc(Tri { v: [a, b, vid], nb: [NONE, NONE, outer], alive: true });
            if outer != NONE {
                let ot = &mut self.tris[outer as usize];
                for k in 0..3 {
                    let (oa, ob) = (ot.v[(k + 1) % 3], ot.v[(k + 2) % 3]);
                    if oa == b && ob == a {
                        ot.nb[k] = id;
                    }
                }
            }
            fan.push(id);
        }
        // stitch fan triangles: tri (a, b, p) meets (b, x, p) across edge (b, p)
        // and (y, a, p) across edge (p, a)
        for i in 0..fan.len() {
            let (a, b, _) = rim[i];
            for j in 0..fan.len() {
                if i == j {
                    continue;
                }
                let (a2, b2, _) = rim[j];
                if a2 == b {
                    // edge opposite a in tri i is (b, p)
                    self.tris[fan[i] as usize].nb[0] = fan[j];
                }
                if b2 == a {
                    // edge opposite b in tri i is (p, a)
                    self.tris[fan[i] as usize].nb[1] = fan[j];
                }
            }
        }
        for (i, &(a, b, _)) in rim.iter().enumerate() {
            self.vert_tri[a as usize] = fan[i];
            self.vert_tri[b as usize] = fan[i];
        }
        self.vert_tri[vid as usize] = fan[0];
        self.last = fan[0];
        Ok((vid, fan))
    }

    pub fn insert(&mut self, p: [f64; 2], start: u32) -> Result<(u32, Vec<u32>), InsertError> {
        let cav = self.cavity(p, start)?;
        self.insert_with_cavity(p, &cav)
    }

    /// Finds the triangle holding the directed edge `a -> b`; returns the
    /// triangle and the index of the vertex opposite the edge.
    pub fn find_edge(&self, a: u32, b: u32) -> Option<(u32, usize)> {
        let start = self.vert_tri[a as usize];
        if start == NONE {
            return None;
        }
        let mut t = start;
        // rotate around `a` in both directions to cope with open rings
        for dir in 0..2 {
            if dir == 1 {
                t = start;
            }
            loop {
                let tri = &self.tris[t as usize];
                let i = tri.v.iter().position(|&v| v == a)?;
                if tri.v[(i + 1) % 3] == b {
                    return Some((t, (i + 2) % 3));
                }
                // dir 0 crosses edge (v[i+2], a) which is opposite v[i+1]
                let next = if dir == 0 { tri.nb[(i + 1) % 3] } else { tri.nb[(i + 2) % 3] };
                if next == NONE {
                    break;
                }
                t = next;
                if t == start {
                    if dir == 0 {
                        return None;
                    }
                    break;
                }
            }
        }
        None
    }

    pub fn alive_tris(&self) -> impl Iterator<Item = u32> + '_ {
        self.tris.iter().enumerate().filter(|(_, t)| t.alive).map(|(i, _)| i as u32)
    }
}
