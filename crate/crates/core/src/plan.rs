//! Occupancy mapping, grid A* and waypoint selection.
//!
//! The map only ever gains occupied cells. Planning runs on a 26-connected
//! lattice whose edge costs are 1, √2 or √3 cells; path costs are kept as
//! counts of each step kind so that equal paths always compare equal.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PlanError {
    #[error("goal is unreachable in the current map")]
    NoPath,
    #[error("start cell is occupied")]
    StartOccupied,
    #[error("point lies outside the map")]
    OutOfGrid,
}

pub type CellIndex = [i32; 3];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupancyGrid {
    /// Minimum corner.
    pub origin: Vec3,
    pub cell: f64,
    pub dims: [usize; 3],
    /// Clearance kept from occupied cell centers when planning.
    pub inflation: f64,
    occupied: BTreeSet<CellIndex>,
    #[serde(skip)]
    blocked: Vec<bool>,
}

impl PartialEq for OccupancyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.origin == other.origin
            && self.cell == other.cell
            && self.dims == other.dims
            && self.inflation == other.inflation
            && self.occupied == other.occupied
    }
}

/// Step-kind counts of a path: axis, face-diagonal, space-diagonal moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StepCounts(pub u32, pub u32, pub u32);

impl StepCounts {
    pub fn cost(&self, cell: f64) -> f64 {
        (self.0 as f64 + self.1 as f64 * std::f64::consts::SQRT_2 + self.2 as f64 * 3f64.sqrt()) * cell
    }

    fn add(self, o: StepCounts) -> StepCounts {
        StepCounts(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }

    fn of_move(d: [i32; 3]) -> StepCounts {
        match d.iter().filter(|v| **v != 0).count() {
            1 => StepCounts(1, 0, 0),
            2 => StepCounts(0, 1, 0),
            _ => StepCounts(0, 0, 1),
        }
    }

    /// Cheapest step counts between two cells on an empty lattice.
    pub fn octile(a: CellIndex, b: CellIndex) -> StepCounts {
        let mut d = [(a[0] - b[0]).unsigned_abs(), (a[1] - b[1]).unsigned_abs(), (a[2] - b[2]).unsigned_abs()];
        d.sort_unstable_by(|x, y| y.cmp(x));
        StepCounts(d[0] - d[1], d[1] - d[2], d[2])
    }
}

pub const NEIGHBORS_26: [[i32; 3]; 26] = {
    let mut out = [[0; 3]; 26];
    let mut k = 0;
    let mut dx = -1;
    while dx <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dz = -1;
            while dz <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[k] = [dx, dy, dz];
                    k += 1;
                }
                dz += 1;
            }
            dy += 1;
        }
        dx += 1;
    }
    out
};

impl OccupancyGrid {
    pub fn new(origin: Vec3, dims: [usize; 3], cell: f64, inflation: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let n = dims[0] * dims[1] * dims[2];
        Self { origin, cell, dims, inflation, occupied: BTreeSet::new(), blocked: vec![false; n] }
    }

    /// Grid covering the box `[lo, hi]`.
    pub fn covering(lo: Vec3, hi: Vec3, cell: f64, inflation: f64) -> Self {
        let n = |a: f64, b: f64| (((b - a) / cell).ceil() as usize).max(1);
        Self::new(lo, [n(lo.x, hi.x), n(lo.y, hi.y), n(lo.z, hi.z)], cell, inflation)
    }

    /// A single horizontal layer of cells centered at height `z`.
    pub fn planar(lo: Vec3, hi: Vec3, z: f64, cell: f64, inflation: f64) -> Self {
        let n = |a: f64, b: f64| (((b - a) / cell).ceil() as usize).max(1);
        let origin = Vec3::new(lo.x, lo.y, z - cell / 2.0);
        Self::new(origin, [n(lo.x, hi.x), n(lo.y, hi.y), 1], cell, inflation)
    }

    pub fn in_bounds(&self, c: CellIndex) -> bool {
        (0..3).all(|k| c[k] >= 0 && (c[k] as usize) < self.dims[k])
    }

    fn linear(&self, c: CellIndex) -> usize {
        (c[0] as usize * self.dims[1] + c[1] as usize) * self.dims[2] + c[2] as usize
    }

    fn unlinear(&self, i: usize) -> CellIndex {
        let z = i % self.dims[2];
        let y = (i / self.dims[2]) % self.dims[1];
        let x = i / (self.dims[1] * self.dims[2]);
        [x as i32, y as i32, z as i32]
    }

    pub fn cell_of(&self, p: &Vec3) -> CellIndex {
        let f = |v: f64, o: f64| ((v - o) / self.cell).floor() as i32;
        [f(p.x, self.origin.x), f(p.y, self.origin.y), f(p.z, self.origin.z)]
    }

    pub fn center_of(&self, c: CellIndex) -> Vec3 {
        let f = |i: i32, o: f64| o + (i as f64 + 0.5) * self.cell;
        Vec3::new(f(c[0], self.origin.x), f(c[1], self.origin.y), f(c[2], self.origin.z))
    }

    pub fn occupied(&self) -> impl Iterator<Item = &CellIndex> {
        self.occupied.iter()
    }

    pub fn is_occupied(&self, c: CellIndex) -> bool {
        self.occupied.contains(&c)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    /// Whether planning must avoid this cell. Out-of-map cells are blocked.
    pub fn is_blocked(&self, c: CellIndex) -> bool {
        !self.in_bounds(c) || self.blocked.get(self.linear(c)).copied().unwrap_or(false)
    }

    fn ensure_mask(&mut self) {
        let n = self.dims[0] * self.dims[1] * self.dims[2];
        if self.blocked.len() != n {
            self.blocked = self.mask_for(self.inflation);
        }
    }

    fn mark_around(&self, mask: &mut [bool], c: CellIndex, inflation: f64) {
        let reach = (inflation / self.cell).ceil() as i32;
        let center = self.center_of(c);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let n = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if self.in_bounds(n) && (self.center_of(n) - center).norm() <= inflation {
                        mask[self.linear(n)] = true;
                    }
                }
            }
        }
    }

    fn mask_for(&self, inflation: f64) -> Vec<bool> {
        let mut mask = vec![false; self.dims[0] * self.dims[1] * self.dims[2]];
        for c in &self.occupied {
            self.mark_around(&mut mask, *c, inflation);
        }
        mask
    }

    /// Marks the cells of `cloud` occupied. Returns the newly occupied cells.
    pub fn update_map(&mut self, cloud: &[Vec3]) -> Vec<CellIndex> {
        self.ensure_mask();
        let mut fresh = Vec::new();
        for p in cloud {
            let c = self.cell_of(p);
            if self.in_bounds(c) && self.occupied.insert(c) {
                fresh.push(c);
            }
        }
        let mut mask = std::mem::take(&mut self.blocked);
        for c in &fresh {
            self.mark_around(&mut mask, *c, self.inflation);
        }
        self.blocked = mask;
        fresh
    }

    /// True if the straight segment crosses no cell accepted by `hit`.
    fn segment_clear(&self, a: &Vec3, b: &Vec3, hit: impl Fn(CellIndex) -> bool) -> bool {
        let len = (*b - *a).norm();
        let steps = ((len / (self.cell * 0.1)).ceil() as usize).max(1);
        (0..=steps).all(|k| {
            let q = a.lerp(b, k as f64 / steps as f64);
            !hit(self.cell_of(&q))
        })
    }

    /// Line of sight against the inflated map.
    pub fn line_clear(&self, a: &Vec3, b: &Vec3) -> bool {
        self.segment_clear(a, b, |c| self.is_blocked(c))
    }

    /// Line of sight against occupied cells only.
    pub fn line_clear_raw(&self, a: &Vec3, b: &Vec3) -> bool {
        self.segment_clear(a, b, |c| self.occupied.contains(&c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vec3>,
    pub length: f64,
}

impl Path {
    pub fn new(waypoints: Vec<Vec3>) -> Self {
        let length = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Self { waypoints, length }
    }

    /// Point at arc length `s` (clamped).
    pub fn at(&self, s: f64) -> Vec3 {
        let mut left = s.max(0.0);
        for w in self.waypoints.windows(2) {
            let seg = (w[1] - w[0]).norm();
            if left <= seg && seg > 0.0 {
                return w[0].lerp(&w[1], left / seg);
            }
            left -= seg;
        }
        *self.waypoints.last().expect("path is never empty")
    }

    /// Arc length of the path point nearest to `p`.
    pub fn project(&self, p: &Vec3) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            let d = w[1] - w[0];
            let seg = d.norm();
            let t = if seg > 0.0 { ((*p - w[0]).dot(&d) / (seg * seg)).clamp(0.0, 1.0) } else { 0.0 };
            let dist = (*p - w[0].lerp(&w[1], t)).norm();
            if dist < best.0 {
                best = (dist, acc + t * seg);
            }
            acc += seg;
        }
        if self.waypoints.len() == 1 {
            return 0.0;
        }
        best.1
    }
}

/// Result of a grid search before shortcutting.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<CellIndex>,
    pub steps: StepCounts,
    pub cost: f64,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
    g: StepCounts,
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // min-heap on (f, h, idx)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// A* over free cells with the exact empty-lattice distance as heuristic.
pub fn astar(grid: &OccupancyGrid, blocked: &dyn Fn(CellIndex) -> bool, start: CellIndex, goal: CellIndex) -> Result<GridPath, PlanError> {
    if !grid.in_bounds(start) || !grid.in_bounds(goal) {
        return Err(PlanError::OutOfGrid);
    }
    if blocked(goal) {
        return Err(PlanError::NoPath);
    }
    let cell = grid.cell;
    let s = grid.linear(start);
    let g_idx = grid.linear(goal);
    let mut best: HashMap<usize, (StepCounts, usize)> = HashMap::new();
    let mut open = BinaryHeap::new();
    best.insert(s, (StepCounts::default(), s));
    let h0 = StepCounts::octile(start, goal).cost(cell);
    open.push(Open { f: h0, h: h0, idx: s, g: StepCounts::default() });
    while let Some(Open { idx, g, .. }) = open.pop() {
        if best.get(&idx).is_some_and(|(bg, _)| bg.cost(cell) < g.cost(cell)) {
            continue;
        }
        if idx == g_idx {
            let mut cells = vec![goal];
            let mut cur = idx;
            while cur != s {
                cur = best[&cur].1;
                cells.push(grid.unlinear(cur));
            }
            cells.reverse();
            return Ok(GridPath { cells, steps: g, cost: g.cost(cell) });
        }
        let c = grid.unlinear(idx);
        for d in NEIGHBORS_26 {
            let n = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
            if !grid.in_bounds(n) || blocked(n) {
                continue;
            }
            let ni = grid.linear(n);
            let ng = g.add(StepCounts::of_move(d));
            let ngc = ng.cost(cell);
            if best.get(&ni).is_none_or(|(bg, _)| ngc < bg.cost(cell)) {
                best.insert(ni, (ng, idx));
                let h = StepCounts::octile(n, goal);
                open.push(Open { f: ng.add(h).cost(cell), h: h.cost(cell), idx: ni, g: ng });
            }
        }
    }
    Err(PlanError::NoPath)
}

fn shortcut(grid: &OccupancyGrid, mask: &dyn Fn(CellIndex) -> bool, pts: &[Vec3]) -> Vec<Vec3> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let clear = |a: &Vec3, b: &Vec3| grid.segment_clear(a, b, mask);
    let mut out = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !clear(&pts[i], &pts[j]) {
            j -= 1;
        }
        out.push(pts[j]);
        i = j;
    }
    out
}

/// Plans from `start` to `goal` on the inflated map, then removes detours
/// that have line of sight. If the start sits inside the inflated margin the
/// margin is relaxed in 10% steps until it is free.
pub fn plan_path(grid: &mut OccupancyGrid, start: &Vec3, goal: &Vec3) -> Result<Path, PlanError> {
    grid.ensure_mask();
    let sc = grid.cell_of(start);
    let gc = grid.cell_of(goal);
    if !grid.in_bounds(sc) || !grid.in_bounds(gc) {
        return Err(PlanError::OutOfGrid);
    }
    let relaxed;
    let mask: Box<dyn Fn(CellIndex) -> bool + '_> = if !grid.is_blocked(sc) {
        Box::new(|c| grid.is_blocked(c))
    } else {
        let mut found = None;
        for k in (0..10).rev() {
            let m = grid.mask_for(grid.inflation * k as f64 / 10.0);
            if !m[grid.linear(sc)] {
                found = Some(m);
                break;
            }
        }
        relaxed = found.ok_or(PlanError::StartOccupied)?;
        Box::new(|c| !grid.in_bounds(c) || relaxed[grid.linear(c)])
    };
    let gp = astar(grid, &*mask, sc, gc)?;
    let mut pts: Vec<Vec3> = gp.cells.iter().map(|c| grid.center_of(*c)).collect();
    pts[0] = *start;
    let last = pts.len() - 1;
    pts[last] = *goal;
    if pts.len() == 1 {
        pts.push(*goal);
        pts[0] = *start;
    }
    Ok(Path::new(shortcut(grid, &*mask, &pts)))
}

/// The moving waypoint: the farthest path point, going forward from the
/// point nearest the robot, that is within `lookahead` and visible from the
/// robot. The goal itself once it is within reach.
pub fn select_waypoint(path: &Path, p: &Vec3, lookahead: f64, grid: Option<&OccupancyGrid>) -> Vec3 {
    let goal = *path.waypoints.last().expect("path is never empty");
    if path.waypoints.len() == 1 || (goal - *p).norm() <= lookahead {
        return goal;
    }
    let ok = |s: f64| {
        let q = path.at(s);
        (q - *p).norm() <= lookahead && grid.is_none_or(|g| g.line_clear_raw(p, &q))
    };
    let s0 = path.project(p);
    let step = grid.map_or(0.05, |g| g.cell * 0.5).min(lookahead * 0.5).max(1e-3);
    let mut good = s0;
    let mut s = s0;
    let bad = loop {
        s += step;
        if s >= path.length {
            if ok(path.length) {
                return path.at(path.length);
            }
            break path.length;
        }
        if !ok(s) {
            break s;
        }
        good = s;
    };
    let (mut lo, mut hi) = (good, bad);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    path.at(lo)
}
