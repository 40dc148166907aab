//! Incremental Bowyer-Watson Delaunay triangulation.
//!
//! The unbounded face is represented by ghost triangles `[x, y, GHOST]`, one
//! per convex-hull edge `y -> x`, which act as a symbolic super-triangle:
//! a ghost "circumcircle" contains every point strictly outside its hull edge
//! and every point strictly inside the edge segment.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::predicates::{incircle, orient2d};
use super::TerrainError;
use crate::num::Real;

pub const GHOST: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinVertex<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> TinVertex<T> {
    fn xy(&self) -> [f64; 2] {
        [self.x.f64(), self.y.f64()]
    }
}

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    /// `n[i]` is the neighbor across edge `(v[i], v[i + 1])`.
    n: [usize; 3],
    alive: bool,
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v[2] == GHOST
    }

    fn edge_index(&self, a: usize, b: usize) -> usize {
        (0..3)
            .find(|&i| self.v[i] == a && self.v[(i + 1) % 3] == b)
            .expect("edge present in neighbor")
    }
}

/// Outcome of inserting a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    New(usize),
    /// The point coincides with this existing vertex and was not added.
    Duplicate(usize),
}

/// Result of a point-location query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// Index of a real triangle containing the point (interior or boundary).
    Inside(usize),
    OutsideHull,
}

/// Delaunay triangulation of planar vertices carrying an elevation.
///
/// All stored triangles are counterclockwise. Neighbor links give the
/// adjacency map; ghost triangles close the hull.
#[derive(Debug, Clone)]
pub struct Triangulation<T> {
    vertices: Vec<TinVertex<T>>,
    tris: Vec<Tri>,
    free: Vec<usize>,
    hint: usize,
}

impl<T: Real> Triangulation<T> {
    /// Triangulates the given points; the first three non-collinear points
    /// seed the mesh and the rest are inserted in a space-filling order.
    pub fn from_points(points: &[[T; 3]]) -> Result<Self, TerrainError> {
        if points.len() < 3 {
            return Err(TerrainError::TooFewPoints(points.len()));
        }
        let xy = |i: usize| [points[i][0].f64(), points[i][1].f64()];
        let second = (1..points.len())
            .find(|&i| xy(i) != xy(0))
            .ok_or(TerrainError::Collinear)?;
        let third = (1..points.len())
            .find(|&i| orient2d(xy(0), xy(second), xy(i)) != Ordering::Equal)
            .ok_or(TerrainError::Collinear)?;

        let mut tin = Self {
            vertices: Vec::with_capacity(points.len()),
            tris: Vec::with_capacity(2 * points.len() + 4),
            free: Vec::new(),
            hint: 0,
        };
        for p in points {
            tin.vertices.push(TinVertex {
                x: p[0],
                y: p[1],
                z: p[2],
            });
        }
        tin.seed_triangle(0, second, third);

        let rest: Vec<usize> = (0..points.len())
            .filter(|&i| i != 0 && i != second && i != third)
            .collect();
        for i in spatial_order(&rest, |i| xy(i)) {
            if let Insertion::Duplicate(first) = tin.insert_existing(i) {
                return Err(TerrainError::DuplicatePoint {
                    first: first.min(i),
                    second: first.max(i),
                });
            }
        }
        Ok(tin)
    }

    fn seed_triangle(&mut self, a: usize, b: usize, c: usize) {
        let (a, b, c) = if orient2d(self.xy(a), self.xy(b), self.xy(c)) == Ordering::Greater {
            (a, b, c)
        } else {
            (a, c, b)
        };
        // real triangle 0, ghosts 1..=3 across edges (a,b), (b,c), (c,a)
        self.tris.push(Tri {
            v: [a, b, c],
            n: [1, 2, 3],
            alive: true,
        });
        for [x, y] in [[b, a], [c, b], [a, c]] {
            self.tris.push(Tri {
                v: [x, y, GHOST],
                n: [0; 3],
                alive: true,
            });
        }
        // across (y, GHOST) is the ghost starting at y; across (GHOST, x) the one ending at x
        for g in 1..=3 {
            let [x, y, _] = self.tris[g].v;
            let across_y = (1..=3).find(|&h| self.tris[h].v[0] == y).unwrap();
            let across_x = (1..=3).find(|&h| self.tris[h].v[1] == x).unwrap();
            self.tris[g].n = [0, across_y, across_x];
        }
        self.hint = 0;
    }

    #[inline]
    fn xy(&self, v: usize) -> [f64; 2] {
        self.vertices[v].xy()
    }

    pub fn vertices(&self) -> &[TinVertex<T>] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Real (non-ghost) triangles as counterclockwise vertex-index triples.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        self.tris
            .iter()
            .filter(|t| t.alive && !t.is_ghost())
            .map(|t| t.v)
            .collect()
    }

    /// Vertex triple of a triangle returned by [`Triangulation::locate`].
    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.tris[t].v
    }

    /// Neighbors of a real triangle: `None` across hull edges.
    pub fn neighbors(&self, t: usize) -> [Option<usize>; 3] {
        self.tris[t]
            .n
            .map(|n| (!self.tris[n].is_ghost()).then_some(n))
    }

    /// Number of vertices on the convex hull boundary.
    pub fn hull_size(&self) -> usize {
        self.tris.iter().filter(|t| t.alive && t.is_ghost()).count()
    }

    /// Appends a vertex and triangulates it in.
    pub fn insert(&mut self, x: T, y: T, z: T) -> Insertion {
        self.vertices.push(TinVertex { x, y, z });
        let idx = self.vertices.len() - 1;
        let out = self.insert_existing(idx);
        if let Insertion::Duplicate(_) = out {
            self.vertices.pop();
        }
        out
    }

    fn ghost_contains(&self, t: &Tri, p: [f64; 2]) -> bool {
        let (a, b) = (self.xy(t.v[0]), self.xy(t.v[1]));
        match orient2d(a, b, p) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => strictly_between(a, b, p),
        }
    }

    fn circle_contains(&self, t: usize, p: [f64; 2]) -> bool {
        let tri = &self.tris[t];
        if tri.is_ghost() {
            self.ghost_contains(tri, p)
        } else {
            let [a, b, c] = tri.v.map(|v| self.xy(v));
            incircle(a, b, c, p) == Ordering::Greater
        }
    }

    fn any_alive(&self) -> usize {
        if self.tris[self.hint].alive {
            return self.hint;
        }
        self.tris.iter().position(|t| t.alive).expect("mesh nonempty")
    }

    /// Walks toward `p`; returns a real triangle containing it or a ghost
    /// whose hull edge sees it.
    fn walk(&self, p: [f64; 2]) -> usize {
        let mut t = self.any_alive();
        if self.tris[t].is_ghost() {
            t = self.tris[t].n[0];
        }
        let mut steps = 0usize;
        let mut rot = 0usize;
        'walk: loop {
            steps += 1;
            if steps > self.tris.len() + 8 {
                return self.scan(p);
            }
            let tri = &self.tris[t];
            rot = (rot + 1) % 3;
            for k in 0..3 {
                let i = (k + rot) % 3;
                let (a, b) = (self.xy(tri.v[i]), self.xy(tri.v[(i + 1) % 3]));
                if orient2d(a, b, p) == Ordering::Less {
                    let next = tri.n[i];
                    if self.tris[next].is_ghost() {
                        return next;
                    }
                    t = next;
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn scan(&self, p: [f64; 2]) -> usize {
        let mut ghost = None;
        for (i, tri) in self.tris.iter().enumerate() {
            if !tri.alive {
                continue;
            }
            if tri.is_ghost() {
                if ghost.is_none() && self.ghost_contains(tri, p) {
                    ghost = Some(i);
                }
                continue;
            }
            let inside = (0..3).all(|k| {
                orient2d(self.xy(tri.v[k]), self.xy(tri.v[(k + 1) % 3]), p) != Ordering::Less
            });
            if inside {
                return i;
            }
        }
        ghost.expect("point is inside a triangle or sees a hull edge")
    }

    /// Locates `(x, y)`. On shared edges the lowest-indexed containing
    /// triangle is returned so the answer does not depend on walk history.
    pub fn locate(&self, x: T, y: T) -> Location {
        let p = [x.f64(), y.f64()];
        let t = self.walk(p);
        let tri = &self.tris[t];
        if tri.is_ghost() {
            return Location::OutsideHull;
        }
        let mut best = t;
        for i in 0..3 {
            let (a, b) = (self.xy(tri.v[i]), self.xy(tri.v[(i + 1) % 3]));
            if orient2d(a, b, p) == Ordering::Equal {
                let nb = tri.n[i];
                if !self.tris[nb].is_ghost() {
                    best = best.min(nb);
                }
            }
        }
        Location::Inside(best)
    }

    fn alloc(&mut self, tri: Tri) -> usize {
        match self.free.pop() {
            Some(i) => {
                self.tris[i] = tri;
                i
            }
            None => {
                self.tris.push(tri);
                self.tris.len() - 1
            }
        }
    }

    fn insert_existing(&mut self, p_idx: usize) -> Insertion {
        let p = self.xy(p_idx);
        let start = self.walk(p);
        if !self.tris[start].is_ghost() {
            if let Some(&v) = self.tris[start].v.iter().find(|&&v| self.xy(v) == p) {
                return Insertion::Duplicate(v);
            }
        }

        // Cavity: every triangle whose circumcircle strictly contains p.
        let mut cavity = vec![start];
        let mut in_cavity: HashMap<usize, bool> = HashMap::new();
        in_cavity.insert(start, true);
        // (u, v, outside triangle, edge index in outside triangle)
        let mut boundary: Vec<(usize, usize, usize, usize)> = Vec::new();
        let mut k = 0;
        while k < cavity.len() {
            let t = cavity[k];
            k += 1;
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                let inside = match in_cavity.get(&nb) {
                    Some(&known) => known,
                    None => {
                        let c = self.circle_contains(nb, p);
                        in_cavity.insert(nb, c);
                        if c {
                            cavity.push(nb);
                        }
                        c
                    }
                };
                if !inside {
                    let (u, v) = (self.tris[t].v[i], self.tris[t].v[(i + 1) % 3]);
                    let j = self.tris[nb].edge_index(v, u);
                    boundary.push((u, v, nb, j));
                }
            }
        }

        for &t in &cavity {
            self.tris[t].alive = false;
            self.free.push(t);
        }

        let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut by_end: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(u, v, outside, j) in &boundary {
            let verts = if u == GHOST {
                [v, p_idx, GHOST]
            } else if v == GHOST {
                [p_idx, u, GHOST]
            } else {
                [u, v, p_idx]
            };
            let t = self.alloc(Tri {
                v: verts,
                n: [GHOST; 3],
                alive: true,
            });
            let bi = self.tris[t].edge_index(u, v);
            self.tris[t].n[bi] = outside;
            self.tris[outside].n[j] = t;
            by_start.insert(u, t);
            by_end.insert(v, t);
            created.push(t);
        }
        for &t in &created {
            for i in 0..3 {
                if self.tris[t].n[i] != GHOST {
                    continue;
                }
                let (s, e) = (self.tris[t].v[i], self.tris[t].v[(i + 1) % 3]);
                self.tris[t].n[i] = if e == p_idx { by_start[&s] } else { by_end[&e] };
            }
        }
        self.hint = created[0];
        Insertion::New(p_idx)
    }
}

fn strictly_between(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    let k = if a[0] != b[0] { 0 } else { 1 };
    let (lo, hi) = if a[k] < b[k] { (a[k], b[k]) } else { (b[k], a[k]) };
    p[k] > lo && p[k] < hi
}

/// Orders indices along a serpentine sweep of a coarse grid so that
/// consecutive points are spatially close.
pub(crate) fn spatial_order(indices: &[usize], xy: impl Fn(usize) -> [f64; 2]) -> Vec<usize> {
    if indices.len() < 3 {
        return indices.to_vec();
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in indices {
        let p = xy(i);
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let side = ((indices.len() as f64).sqrt() / 2.0).ceil().max(1.0);
    let cell = [
        ((hi[0] - lo[0]) / side).max(f64::MIN_POSITIVE),
        ((hi[1] - lo[1]) / side).max(f64::MIN_POSITIVE),
    ];
    let mut keyed: Vec<(u64, u64, f64, usize)> = indices
        .iter()
        .map(|&i| {
            let p = xy(i);
            let row = ((p[1] - lo[1]) / cell[1]).floor().min(side - 1.0) as u64;
            let col = ((p[0] - lo[0]) / cell[0]).floor().min(side - 1.0) as u64;
            let col = if row % 2 == 1 { side as u64 - 1 - col } else { col };
            let along = if row % 2 == 1 { -p[0] } else { p[0] };
            (row, col, along, i)
        })
        .collect();
    keyed.sort_by(|a, b| {
        (a.0, a.1)
            .cmp(&(b.0, b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    keyed.into_iter().map(|k| k.3).collect()
}

/// Delaunay triangulation of planar points (elevation zero).
pub fn delaunay_triangulate<T: Real>(points: &[[T; 2]]) -> Result<Triangulation<T>, TerrainError> {
    let lifted: Vec<[T; 3]> = points.iter().map(|p| [p[0], p[1], T::zero()]).collect();
    Triangulation::from_points(&lifted)
}
