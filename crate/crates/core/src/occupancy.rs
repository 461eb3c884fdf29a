//! The occupied set `S_t`: a seed region plus a growing union of closed balls.
//!
//! Balls are indexed in a uniform grid of cell size `2·R0`, so every
//! intersection query only touches the 3×3 block around the query centre.
//! Each cell also carries an 8×8 bitmask of *full* sub-squares, i.e. closed
//! squares lying inside a single inserted ball. A ball contained in the union
//! of full squares can never change the answer of a query, so it is dropped
//! from the query lists (it stays in the event list and in the per-cell
//! history used by backward traversals). Queries therefore test the seed,
//! the remaining active balls and the full squares, whose union is exactly
//! `S_t`.

use serde::{Deserialize, Serialize};

use crate::error::OccupancyError;
use crate::events::Event;
use crate::geometry::{ball_chord, window_chord, IntervalUnion, Overlap, Point, Window};

/// Fine squares per cell side.
const FINE: i64 = 8;

/// Initial condition `E` of the growth process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedRegion {
    /// Finite set of points (null Lebesgue measure).
    PointSet { points: Vec<Point> },
    /// Closed half-plane `{x <= x0}`.
    HalfPlane { x0: f64 },
    /// Closed disk.
    Disk { center: Point, radius: f64 },
    Union { parts: Vec<SeedRegion> },
}

impl SeedRegion {
    pub fn origin() -> Self {
        SeedRegion::PointSet { points: vec![Point::ORIGIN] }
    }

    pub fn point(p: Point) -> Self {
        SeedRegion::PointSet { points: vec![p] }
    }

    pub fn half_plane(x0: f64) -> Self {
        SeedRegion::HalfPlane { x0 }
    }

    pub fn disk(center: Point, radius: f64) -> Self {
        SeedRegion::Disk { center, radius }
    }

    pub fn validate(&self) -> Result<(), OccupancyError> {
        match self {
            SeedRegion::PointSet { points } => {
                if points.iter().all(|p| p.is_finite()) {
                    Ok(())
                } else {
                    Err(OccupancyError::InvalidSeed("point coordinates must be finite".into()))
                }
            }
            SeedRegion::HalfPlane { x0 } if x0.is_finite() => Ok(()),
            SeedRegion::HalfPlane { .. } => Err(OccupancyError::InvalidSeed("half-plane bound must be finite".into())),
            SeedRegion::Disk { center, radius } if center.is_finite() && radius.is_finite() && *radius >= 0.0 => Ok(()),
            SeedRegion::Disk { .. } => Err(OccupancyError::InvalidSeed("disk needs a finite centre and radius >= 0".into())),
            SeedRegion::Union { parts } => parts.iter().try_for_each(SeedRegion::validate),
        }
    }

    /// Parts of positive area, as regions a ball can overlap.
    pub fn area_parts(&self, out: &mut Vec<Overlap>) {
        match self {
            SeedRegion::PointSet { .. } => {}
            SeedRegion::HalfPlane { x0 } => out.push(Overlap::LeftOf { x0: *x0 }),
            SeedRegion::Disk { center, radius } => out.push(Overlap::Disc {
                center: *center,
                radius: *radius,
            }),
            SeedRegion::Union { parts } => parts.iter().for_each(|s| s.area_parts(out)),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.dist2_to(p) == 0.0
    }

    /// Squared distance from `p` to the closed seed set (`inf` when empty).
    pub fn dist2_to(&self, p: Point) -> f64 {
        match self {
            SeedRegion::PointSet { points } => points.iter().map(|q| q.dist2(p)).fold(f64::INFINITY, f64::min),
            SeedRegion::HalfPlane { x0 } => {
                let d = (p.x - x0).max(0.0);
                d * d
            }
            SeedRegion::Disk { center, radius } => {
                let d = (center.dist(p) - radius).max(0.0);
                d * d
            }
            SeedRegion::Union { parts } => parts.iter().map(|s| s.dist2_to(p)).fold(f64::INFINITY, f64::min),
        }
    }

    #[inline]
    pub fn intersects_ball(&self, center: Point, radius: f64) -> bool {
        self.dist2_to(center) <= radius * radius
    }

    /// A point of the seed closest to `p`.
    pub fn closest_point(&self, p: Point) -> Option<Point> {
        match self {
            SeedRegion::PointSet { points } => points.iter().copied().min_by(|a, b| a.dist2(p).total_cmp(&b.dist2(p))),
            SeedRegion::HalfPlane { x0 } => Some(Point::new(p.x.min(*x0), p.y)),
            SeedRegion::Disk { center, radius } => {
                let d = center.dist(p);
                if d <= *radius {
                    Some(p)
                } else {
                    Some(center.lerp(p, radius / d))
                }
            }
            SeedRegion::Union { parts } => parts
                .iter()
                .filter_map(|s| s.closest_point(p))
                .min_by(|a, b| a.dist2(p).total_cmp(&b.dist2(p))),
        }
    }

    pub fn is_compact(&self) -> bool {
        match self {
            SeedRegion::HalfPlane { .. } => false,
            SeedRegion::Union { parts } => parts.iter().all(SeedRegion::is_compact),
            _ => true,
        }
    }

    /// Every point has neighbourhoods of positive area inside the set.
    pub fn satisfies_triangle(&self) -> bool {
        match self {
            SeedRegion::PointSet { points } => points.is_empty(),
            SeedRegion::HalfPlane { .. } => true,
            SeedRegion::Disk { radius, .. } => *radius > 0.0,
            SeedRegion::Union { parts } => parts.iter().all(SeedRegion::satisfies_triangle),
        }
    }

    /// Bounding box, `None` for empty or unbounded seeds.
    pub fn bounds(&self) -> Option<Window> {
        match self {
            SeedRegion::PointSet { points } => points
                .iter()
                .map(|&p| Window::around_point(p))
                .reduce(|a, b| a.union(&b)),
            SeedRegion::HalfPlane { .. } => None,
            SeedRegion::Disk { center, radius } => Some(Window::around_ball(*center, *radius)),
            SeedRegion::Union { parts } => {
                let mut acc: Option<Window> = None;
                for p in parts {
                    let b = p.bounds()?;
                    acc = Some(acc.map_or(b, |a| a.union(&b)));
                }
                acc
            }
        }
    }

    /// Bounding box of `seed ∩ clip`.
    pub fn clipped_bounds(&self, clip: &Window) -> Option<Window> {
        match self {
            SeedRegion::PointSet { points } => points
                .iter()
                .filter(|p| clip.contains(**p))
                .map(|&p| Window::around_point(p))
                .reduce(|a, b| a.union(&b)),
            SeedRegion::HalfPlane { x0 } => (*x0 >= clip.x_lo).then(|| Window {
                x_hi: x0.min(clip.x_hi),
                ..*clip
            }),
            SeedRegion::Disk { .. } => self.bounds().and_then(|b| b.intersection(clip)),
            SeedRegion::Union { parts } => parts
                .iter()
                .filter_map(|p| p.clipped_bounds(clip))
                .reduce(|a, b| a.union(&b)),
        }
    }

    /// Largest x-coordinate of the seed (`-inf` when empty).
    pub fn max_x(&self) -> f64 {
        match self {
            SeedRegion::PointSet { points } => points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
            SeedRegion::HalfPlane { x0 } => *x0,
            SeedRegion::Disk { center, radius } => center.x + radius,
            SeedRegion::Union { parts } => parts.iter().map(SeedRegion::max_x).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Parameter intervals of the segment `a + u (b - a)` inside the seed.
    pub fn chords(&self, a: Point, b: Point, out: &mut Vec<(f64, f64)>) {
        match self {
            SeedRegion::PointSet { points } => {
                out.extend(points.iter().filter_map(|&p| ball_chord(a, b, p, 0.0)));
            }
            SeedRegion::HalfPlane { x0 } => {
                let dx = b.x - a.x;
                if dx == 0.0 {
                    if a.x <= *x0 {
                        out.push((f64::NEG_INFINITY, f64::INFINITY));
                    }
                } else {
                    let u = (x0 - a.x) / dx;
                    out.push(if dx > 0.0 { (f64::NEG_INFINITY, u) } else { (u, f64::INFINITY) });
                }
            }
            SeedRegion::Disk { center, radius } => out.extend(ball_chord(a, b, *center, *radius)),
            SeedRegion::Union { parts } => parts.iter().for_each(|p| p.chords(a, b, out)),
        }
    }

    /// Whether `seed ∩ clip` meets the closed ball, for a ball centred in `clip`.
    ///
    /// Exact for half-planes and point sets; disks must have their centre in
    /// `clip`, which makes the segment between the two centres a witness.
    fn clipped_intersects_ball(&self, clip: &Window, center: Point, radius: f64) -> bool {
        match self {
            SeedRegion::PointSet { points } => points
                .iter()
                .any(|p| clip.contains(*p) && p.dist2(center) <= radius * radius),
            SeedRegion::HalfPlane { x0 } => *x0 >= clip.x_lo && center.x - radius <= *x0,
            SeedRegion::Disk { .. } => self.intersects_ball(center, radius),
            SeedRegion::Union { parts } => parts.iter().any(|p| p.clipped_intersects_ball(clip, center, radius)),
        }
    }

    fn check_clip(&self, clip: &Window) -> Result<(), OccupancyError> {
        match self {
            SeedRegion::Disk { center, .. } if !clip.contains(*center) => Err(OccupancyError::InvalidSeed(
                "a disk seed in a restricted run must have its centre inside the window".into(),
            )),
            SeedRegion::Union { parts } => parts.iter().try_for_each(|p| p.check_clip(clip)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Cell {
    /// Balls that may still decide a query.
    active: Vec<u32>,
    /// Every ball centred in the cell, in insertion (= time) order.
    history: Vec<u32>,
    /// Bit `fy * 8 + fx` set when that fine square lies inside some ball.
    full: u64,
    purge_at: u32,
}

#[derive(Debug, Clone)]
struct CellGrid {
    ix0: i64,
    iy0: i64,
    nx: i64,
    ny: i64,
    cells: Vec<Cell>,
}

impl CellGrid {
    fn covering(lo: (i64, i64), hi: (i64, i64)) -> Self {
        let nx = hi.0 - lo.0 + 1;
        let ny = hi.1 - lo.1 + 1;
        CellGrid {
            ix0: lo.0,
            iy0: lo.1,
            nx,
            ny,
            cells: vec![Cell::default(); (nx * ny) as usize],
        }
    }

    #[inline]
    fn index(&self, ix: i64, iy: i64) -> Option<usize> {
        let (dx, dy) = (ix - self.ix0, iy - self.iy0);
        (dx >= 0 && dy >= 0 && dx < self.nx && dy < self.ny).then(|| (dy * self.nx + dx) as usize)
    }

    #[inline]
    fn get(&self, ix: i64, iy: i64) -> Option<&Cell> {
        self.index(ix, iy).map(|i| &self.cells[i])
    }

    fn get_mut_growing(&mut self, ix: i64, iy: i64) -> &mut Cell {
        if self.index(ix, iy).is_none() {
            self.grow_to(ix, iy);
        }
        let i = self.index(ix, iy).expect("grid grown to include cell");
        &mut self.cells[i]
    }

    fn grow_to(&mut self, ix: i64, iy: i64) {
        let pad_x = self.nx.max(4);
        let pad_y = self.ny.max(4);
        let mut lo = (self.ix0, self.iy0);
        let mut hi = (self.ix0 + self.nx - 1, self.iy0 + self.ny - 1);
        if ix < lo.0 {
            lo.0 = ix - pad_x;
        }
        if ix > hi.0 {
            hi.0 = ix + pad_x;
        }
        if iy < lo.1 {
            lo.1 = iy - pad_y;
        }
        if iy > hi.1 {
            hi.1 = iy + pad_y;
        }
        let mut grown = CellGrid::covering(lo, hi);
        for y in 0..self.ny {
            for x in 0..self.nx {
                let old = (y * self.nx + x) as usize;
                let new = grown.index(self.ix0 + x, self.iy0 + y).expect("old cell inside grown grid");
                grown.cells[new] = std::mem::take(&mut self.cells[old]);
            }
        }
        *self = grown;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fit {
    /// Squares meeting the disc.
    Meets,
    /// A superset of [`Fit::Meets`], safe against rounding.
    MeetsLoose,
    /// Squares inside the disc, a subset safe against rounding.
    Inside,
}

/// Inclusive global fine-square index ranges.
#[derive(Debug, Clone, Copy)]
struct SquareRange {
    gx: (i64, i64),
    gy: (i64, i64),
}

impl SquareRange {
    const ALL: SquareRange = SquareRange {
        gx: (i64::MIN / 4, i64::MAX / 4),
        gy: (i64::MIN / 4, i64::MAX / 4),
    };
}

#[inline]
fn ifloor(v: f64) -> i64 {
    let t = v as i64;
    if (t as f64) > v {
        t - 1
    } else {
        t
    }
}

#[inline]
fn iceil(v: f64) -> i64 {
    let t = v as i64;
    if (t as f64) < v {
        t + 1
    } else {
        t
    }
}

/// `S_t` for one run. Mutated single-threaded; shareable read-only afterwards.
#[derive(Debug, Clone)]
pub struct OccupiedState {
    seed: SeedRegion,
    clip: Option<Window>,
    r0: f64,
    cell: f64,
    fine: f64,
    grid: CellGrid,
    events: Vec<Event>,
    bbox: Option<Window>,
    max_x: f64,
    t_now: f64,
    active: usize,
    accepted: u64,
    mode: LogMode,
}

/// Which accepted balls the state keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogMode {
    /// Every accepted ball.
    #[default]
    Full,
    /// Only balls not already inside the covered interior when accepted.
    /// The union is unchanged and every hitting event is kept, but
    /// covering-event lists and two-type colouring need [`LogMode::Full`].
    Frontier,
}

impl OccupiedState {
    /// Unrestricted state.
    pub fn new(seed: SeedRegion, r0: f64) -> Result<Self, OccupancyError> {
        Self::build(seed, r0, None)
    }

    /// State of the process restricted to `clip`: only balls centred in the
    /// window are accepted and only their part inside the window is kept.
    pub fn restricted(seed: SeedRegion, r0: f64, clip: Window) -> Result<Self, OccupancyError> {
        seed.check_clip(&clip)?;
        Self::build(seed, r0, Some(clip))
    }

    fn build(seed: SeedRegion, r0: f64, clip: Option<Window>) -> Result<Self, OccupancyError> {
        seed.validate()?;
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(OccupancyError::InvalidSeed(format!("R0 = {r0} must be finite and > 0")));
        }
        let cell = 2.0 * r0;
        let bbox = match &clip {
            Some(c) => seed.clipped_bounds(c),
            None => seed.bounds(),
        };
        let extent = clip.or(bbox).unwrap_or(Window::around_point(Point::ORIGIN));
        let lo = ((extent.x_lo / cell).floor() as i64 - 1, (extent.y_lo / cell).floor() as i64 - 1);
        let hi = ((extent.x_hi / cell).floor() as i64 + 1, (extent.y_hi / cell).floor() as i64 + 1);
        let max_x = match &clip {
            Some(c) => bbox.map_or(f64::NEG_INFINITY, |b| b.x_hi.min(c.x_hi)),
            None => seed.max_x(),
        };
        Ok(OccupiedState {
            seed,
            clip,
            r0,
            cell,
            fine: cell / FINE as f64,
            grid: CellGrid::covering(lo, hi),
            events: Vec::new(),
            bbox,
            max_x,
            t_now: 0.0,
            active: 0,
            accepted: 0,
            mode: LogMode::Full,
        })
    }

    /// Rebuilds a state by inserting `events` in order, checking acceptance.
    pub fn replay(
        seed: SeedRegion,
        r0: f64,
        clip: Option<Window>,
        events: &[Event],
    ) -> Result<Self, OccupancyError> {
        let mut s = match clip {
            Some(c) => Self::restricted(seed, r0, c)?,
            None => Self::new(seed, r0)?,
        };
        for e in events {
            s.insert(*e)?;
        }
        Ok(s)
    }

    pub fn with_log_mode(mut self, mode: LogMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn log_mode(&self) -> LogMode {
        self.mode
    }

    /// Accepted events so far, including those not kept in frontier mode.
    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn seed(&self) -> &SeedRegion {
        &self.seed
    }

    pub fn clip(&self) -> Option<&Window> {
        self.clip.as_ref()
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn event(&self, id: u64) -> Option<&Event> {
        self.index_of(id).map(|i| &self.events[i])
    }

    /// Position of event `id` in [`events`](Self::events).
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.events.binary_search_by_key(&id, |e| e.id).ok()
    }

    pub fn t_now(&self) -> f64 {
        self.t_now
    }

    pub fn bbox(&self) -> Option<Window> {
        self.bbox
    }

    /// Largest x-coordinate reached by `S_t`.
    pub fn max_x(&self) -> f64 {
        self.max_x
    }

    /// Balls still consulted by queries.
    pub fn active_count(&self) -> usize {
        self.active
    }

    /// Seed part of the acceptance test.
    #[inline]
    pub fn seed_intersects(&self, center: Point, radius: f64) -> bool {
        match &self.clip {
            Some(c) => self.seed.clipped_intersects_ball(c, center, radius),
            None => self.seed.intersects_ball(center, radius),
        }
    }

    #[inline]
    pub fn seed_covers(&self, p: Point) -> bool {
        self.clip.is_none_or(|c| c.contains(p)) && self.seed.contains(p)
    }

    #[inline]
    fn cell_of(&self, p: Point) -> (i64, i64) {
        let (gx, gy) = self.fine_of(p);
        (gx.div_euclid(FINE), gy.div_euclid(FINE))
    }

    #[inline]
    fn fine_of(&self, p: Point) -> (i64, i64) {
        (ifloor(p.x / self.fine), ifloor(p.y / self.fine))
    }

    #[inline]
    fn fine_square(&self, gx: i64, gy: i64) -> Window {
        Window {
            x_lo: gx as f64 * self.fine,
            x_hi: (gx + 1) as f64 * self.fine,
            y_lo: gy as f64 * self.fine,
            y_hi: (gy + 1) as f64 * self.fine,
        }
    }

    #[inline]
    fn is_full(&self, gx: i64, gy: i64) -> bool {
        self.grid
            .get(gx.div_euclid(FINE), gy.div_euclid(FINE))
            .is_some_and(|c| c.full >> (gy.rem_euclid(FINE) * FINE + gx.rem_euclid(FINE)) & 1 == 1)
    }

    /// Fine squares of cell `(ix, iy)` that meet (or lie inside) the closed
    /// disc, as a bitmask, restricted to the global square ranges `limits`.
    fn disc_mask(&self, ix: i64, iy: i64, c: Point, r: f64, fit: Fit, limits: &SquareRange) -> u64 {
        let f = self.fine;
        let eps = 1e-12 * (1.0 + c.x.abs() + c.y.abs() + r);
        let (col0, row0) = (ix * FINE, iy * FINE);
        let col_lo = (limits.gx.0 - col0).max(0);
        let col_hi = (limits.gx.1 - col0).min(FINE - 1);
        let mut mask = 0u64;
        for fy in (limits.gy.0 - row0).max(0)..=(limits.gy.1 - row0).min(FINE - 1) {
            let gy = row0 + fy;
            let (y_lo, y_hi) = (gy as f64 * f, (gy + 1) as f64 * f);
            let near = (y_lo - c.y).max(0.0).max(c.y - y_hi);
            let dy = match fit {
                Fit::Meets => near,
                Fit::MeetsLoose => (near - eps).max(0.0),
                Fit::Inside => (y_lo - c.y).abs().max((y_hi - c.y).abs()) + eps,
            };
            let w2 = r * r - dy * dy;
            if w2 < 0.0 {
                continue;
            }
            let w = w2.sqrt();
            let (lo, hi) = match fit {
                Fit::Meets => (ifloor((c.x - w) / f), ifloor((c.x + w) / f)),
                Fit::MeetsLoose => (ifloor((c.x - w - eps) / f), ifloor((c.x + w + eps) / f)),
                Fit::Inside => (iceil((c.x - w + eps) / f), ifloor((c.x + w - eps) / f) - 1),
            };
            let lo = (lo - col0).max(col_lo);
            let hi = (hi - col0).min(col_hi);
            if lo > hi {
                continue;
            }
            let row = ((1u64 << (hi - lo + 1)) - 1) << lo;
            mask |= row << (fy * FINE);
        }
        mask
    }

    /// Cells overlapped by the bounding box of a disc.
    #[inline]
    fn cells_of_disc(&self, c: Point, r: f64) -> ((i64, i64), (i64, i64)) {
        let (gx0, gy0) = self.fine_of(Point::new(c.x - r, c.y - r));
        let (gx1, gy1) = self.fine_of(Point::new(c.x + r, c.y + r));
        (
            (gx0.div_euclid(FINE), gy0.div_euclid(FINE)),
            (gx1.div_euclid(FINE), gy1.div_euclid(FINE)),
        )
    }

    /// Squares a stored ball may mark full: those inside the clip window.
    fn inner_limits(&self) -> SquareRange {
        match &self.clip {
            None => SquareRange::ALL,
            Some(q) => SquareRange {
                gx: (iceil(q.x_lo / self.fine) + 1, ifloor(q.x_hi / self.fine) - 2),
                gy: (iceil(q.y_lo / self.fine) + 1, ifloor(q.y_hi / self.fine) - 2),
            },
        }
    }

    /// Squares that can hold part of a stored ball: those meeting the clip window.
    fn outer_limits(&self) -> SquareRange {
        match &self.clip {
            None => SquareRange::ALL,
            Some(q) => SquareRange {
                gx: (ifloor(q.x_lo / self.fine) - 1, ifloor(q.x_hi / self.fine) + 1),
                gy: (ifloor(q.y_lo / self.fine) - 1, ifloor(q.y_hi / self.fine) + 1),
            },
        }
    }

    /// Whether any full square meets the closed ball.
    fn full_square_meets(&self, center: Point, radius: f64) -> bool {
        let (lo, hi) = self.cells_of_disc(center, radius);
        for cy in lo.1..=hi.1 {
            for cx in lo.0..=hi.0 {
                let full = self.grid.get(cx, cy).map_or(0, |c| c.full);
                if full != 0 && self.disc_mask(cx, cy, center, radius, Fit::Meets, &SquareRange::ALL) & full != 0 {
                    return true;
                }
            }
        }
        false
    }

    /// `B(center, radius) ∩ S ≠ ∅` for a query radius in `(0, R0]`.
    pub fn intersects(&self, center: Point, radius: f64) -> bool {
        debug_assert!(radius <= self.r0);
        if self.seed_intersects(center, radius) {
            return true;
        }
        let (gx, gy) = self.fine_of(center);
        if self.is_full(gx, gy) {
            return true;
        }
        let (ix, iy) = (gx.div_euclid(FINE), gy.div_euclid(FINE));
        for cy in iy - 1..=iy + 1 {
            for cx in ix - 1..=ix + 1 {
                let Some(cell) = self.grid.get(cx, cy) else { continue };
                for &id in &cell.active {
                    if self.events[id as usize].intersects_ball(center, radius) {
                        return true;
                    }
                }
            }
        }
        self.full_square_meets(center, radius)
    }

    /// `p ∈ S`.
    pub fn covers(&self, p: Point) -> bool {
        if let Some(c) = &self.clip {
            if !c.contains(p) {
                return false;
            }
        }
        if self.seed.contains(p) {
            return true;
        }
        let (gx, gy) = self.fine_of(p);
        if self.is_full(gx, gy) {
            return true;
        }
        let (ix, iy) = (gx.div_euclid(FINE), gy.div_euclid(FINE));
        for cy in iy - 1..=iy + 1 {
            for cx in ix - 1..=ix + 1 {
                let Some(cell) = self.grid.get(cx, cy) else { continue };
                if cell.active.iter().any(|&id| self.events[id as usize].covers(p)) {
                    return true;
                }
            }
        }
        false
    }

    /// Ids of all balls containing `p`, ascending in time.
    pub fn covering_events(&self, p: Point) -> Vec<u64> {
        if self.clip.is_some_and(|c| !c.contains(p)) {
            return Vec::new();
        }
        let (ix, iy) = self.cell_of(p);
        let mut ids = Vec::new();
        for cy in iy - 1..=iy + 1 {
            for cx in ix - 1..=ix + 1 {
                let Some(cell) = self.grid.get(cx, cy) else { continue };
                ids.extend(
                    cell.history
                        .iter()
                        .filter(|&&id| self.events[id as usize].covers(p))
                        .map(|&id| self.events[id as usize].id),
                );
            }
        }
        ids.sort_unstable();
        ids
    }

    /// Index (into [`events`](Self::events)) of the most recent ball containing `p`.
    pub fn latest_covering(&self, p: Point) -> Option<usize> {
        if self.clip.is_some_and(|c| !c.contains(p)) {
            return None;
        }
        let (ix, iy) = self.cell_of(p);
        // histories of the cells within R0 of p, walked newest first as one merged list
        let mut lists: [&[u32]; 9] = [&[]; 9];
        let mut n = 0;
        for cy in iy - 1..=iy + 1 {
            for cx in ix - 1..=ix + 1 {
                let Some(cell) = self.grid.get(cx, cy) else { continue };
                let rect = Window {
                    x_lo: cx as f64 * self.cell,
                    x_hi: (cx + 1) as f64 * self.cell,
                    y_lo: cy as f64 * self.cell,
                    y_hi: (cy + 1) as f64 * self.cell,
                };
                if !cell.history.is_empty() && rect.dist2_to(p) <= self.r0 * self.r0 {
                    lists[n] = &cell.history;
                    n += 1;
                }
            }
        }
        let lists = &mut lists[..n];
        loop {
            let (k, id) = lists
                .iter()
                .enumerate()
                .filter_map(|(k, l)| l.last().map(|&id| (k, id)))
                .max_by_key(|&(_, id)| id)?;
            if self.events[id as usize].covers(p) {
                return Some(id as usize);
            }
            let l = &mut lists[k];
            *l = &l[..l.len() - 1];
        }
    }

    /// Indices of balls inserted before `before` (an index) that meet `B(center, radius)`.
    pub fn earlier_intersecting(&self, center: Point, radius: f64, before: usize) -> Vec<usize> {
        let (ix, iy) = self.cell_of(center);
        let mut out = Vec::new();
        for cy in iy - 1..=iy + 1 {
            for cx in ix - 1..=ix + 1 {
                let Some(cell) = self.grid.get(cx, cy) else { continue };
                for &id in &cell.history {
                    if id as usize >= before {
                        break;
                    }
                    if self.events[id as usize].intersects_ball(center, radius) {
                        out.push(id as usize);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Adds an accepted event after checking the acceptance rule.
    pub fn insert(&mut self, e: Event) -> Result<(), OccupancyError> {
        if !(e.radius > 0.0 && e.radius <= self.r0) {
            return Err(OccupancyError::BadRadius {
                id: e.id,
                radius: e.radius,
                r0: self.r0,
            });
        }
        if !(e.time > self.t_now) {
            return Err(OccupancyError::NotAfter {
                id: e.id,
                time: e.time,
                t_now: self.t_now,
            });
        }
        if self.clip.is_some_and(|c| !c.contains(e.center)) || !self.intersects(e.center, e.radius) {
            return Err(OccupancyError::NotIntersecting { id: e.id, time: e.time });
        }
        self.insert_accepted(e);
        Ok(())
    }

    /// Adds an event the caller has already checked with [`intersects`](Self::intersects).
    ///
    /// Returns `false` when the ball lay inside the covered interior, in which
    /// case it cannot change `S` or any hitting time.
    pub(crate) fn insert_accepted(&mut self, e: Event) -> bool {
        self.t_now = e.time;
        self.accepted += 1;
        let redundant = self.is_redundant(&e);
        if redundant && self.mode == LogMode::Frontier {
            return false;
        }
        let idx = self.events.len() as u32;
        self.events.push(e);
        let (ix, iy) = self.cell_of(e.center);
        if redundant {
            self.grid.get_mut_growing(ix, iy).history.push(idx);
            return false;
        }

        let mut extent = Window::around_ball(e.center, e.radius);
        let mut right = e.center.x + e.radius;
        if let Some(c) = &self.clip {
            extent = extent.intersection(c).unwrap_or(Window::around_point(e.center));
            right = right.min(c.x_hi);
        }
        self.bbox = Some(self.bbox.map_or(extent, |b| b.union(&extent)));
        self.max_x = self.max_x.max(right);

        self.mark_full_squares(&e);
        let cell = self.grid.get_mut_growing(ix, iy);
        cell.history.push(idx);
        cell.active.push(idx);
        self.active += 1;
        if cell.active.len() as u32 > cell.purge_at {
            self.purge(ix, iy);
        }
        true
    }

    fn mark_full_squares(&mut self, e: &Event) {
        // a square of side h fits in a ball only if h·√2 ≤ 2r
        if e.radius * std::f64::consts::SQRT_2 < self.fine {
            return;
        }
        let limits = self.inner_limits();
        let (lo, hi) = self.cells_of_disc(e.center, e.radius);
        for cy in lo.1..=hi.1 {
            for cx in lo.0..=hi.0 {
                let mask = self.disc_mask(cx, cy, e.center, e.radius, Fit::Inside, &limits);
                if mask != 0 {
                    self.grid.get_mut_growing(cx, cy).full |= mask;
                }
            }
        }
    }

    /// Every fine square meeting the (clipped) ball is full.
    fn is_redundant(&self, e: &Event) -> bool {
        let (cgx, cgy) = self.fine_of(e.center);
        if !self.is_full(cgx, cgy) {
            return false;
        }
        let limits = self.outer_limits();
        let (lo, hi) = self.cells_of_disc(e.center, e.radius + self.fine);
        for cy in lo.1..=hi.1 {
            for cx in lo.0..=hi.0 {
                let full = self.grid.get(cx, cy).map_or(0, |c| c.full);
                if full == u64::MAX {
                    continue;
                }
                if self.disc_mask(cx, cy, e.center, e.radius, Fit::MeetsLoose, &limits) & !full != 0 {
                    return false;
                }
            }
        }
        true
    }

    fn purge(&mut self, ix: i64, iy: i64) {
        let Some(i) = self.grid.index(ix, iy) else { return };
        let ids = std::mem::take(&mut self.grid.cells[i].active);
        let before = ids.len();
        let kept: Vec<u32> = ids
            .into_iter()
            .filter(|&id| !self.is_redundant(&self.events[id as usize]))
            .collect();
        self.active -= before - kept.len();
        let cell = &mut self.grid.cells[i];
        cell.purge_at = (2 * kept.len() as u32).max(32);
        cell.active = kept;
    }

    /// Bounding box inflated by `margin`; with `margin >= R0` every ball
    /// meeting `S` has its centre inside.
    pub fn inflated_bbox(&self, margin: f64) -> Option<Window> {
        self.bbox.map(|b| b.inflate(margin))
    }

    /// Chords of the segment `a → b` covered by `S`, in segment parameter.
    pub fn segment_chords(&self, a: Point, b: Point) -> IntervalUnion {
        let mut chords = Vec::new();
        self.seed.chords(a, b, &mut chords);
        let bounds = Window::around_point(a).union(&Window::around_point(b));
        let (lo, hi) = (self.cell_of(Point::new(bounds.x_lo, bounds.y_lo)), self.cell_of(Point::new(bounds.x_hi, bounds.y_hi)));
        let len = a.dist(b);
        for iy in lo.1 - 1..=hi.1 + 1 {
            for ix in lo.0 - 1..=hi.0 + 1 {
                let Some(cell) = self.grid.get(ix, iy) else { continue };
                let cell_win = Window {
                    x_lo: ix as f64 * self.cell,
                    x_hi: (ix + 1) as f64 * self.cell,
                    y_lo: iy as f64 * self.cell,
                    y_hi: (iy + 1) as f64 * self.cell,
                };
                if len > 0.0 && window_chord(a, b, &cell_win.inflate(self.cell)).is_none() {
                    continue;
                }
                for &id in &cell.active {
                    let e = &self.events[id as usize];
                    chords.extend(ball_chord(a, b, e.center, e.radius));
                }
                for bit in 0..64 {
                    if cell.full >> bit & 1 == 1 {
                        let sq = self.fine_square(ix * FINE + bit % FINE, iy * FINE + bit / FINE);
                        chords.extend(window_chord(a, b, &sq));
                    }
                }
            }
        }
        let clip_range = match &self.clip {
            Some(c) => window_chord(a, b, c),
            None => Some((f64::NEG_INFINITY, f64::INFINITY)),
        };
        let mut union = IntervalUnion::new();
        if let Some((clo, chi)) = clip_range {
            for (s, e) in chords {
                union.insert(s.max(clo), e.min(chi));
            }
        }
        union
    }

    /// Whether the whole closed segment `anchor → z` lies in `S`.
    pub fn segment_fully_covered(&self, anchor: Point, z: Point) -> bool {
        self.segment_chords(anchor, z).covers(0.0, 1.0)
    }

    /// Leftmost uncovered parameter interval of `anchor → z`, if any.
    pub fn segment_gap(&self, anchor: Point, z: Point) -> Option<(f64, f64)> {
        self.segment_chords(anchor, z).first_gap(0.0, 1.0)
    }
}

/// Incremental coverage of one segment, updated ball by ball.
#[derive(Debug, Clone)]
pub struct SegmentTracker {
    a: Point,
    b: Point,
    clip: Option<(f64, f64)>,
    union: IntervalUnion,
}

impl SegmentTracker {
    pub fn new(state: &OccupiedState, a: Point, b: Point) -> Self {
        let clip = state.clip().map(|c| window_chord(a, b, c).unwrap_or((1.0, 0.0)));
        SegmentTracker {
            a,
            b,
            clip,
            union: state.segment_chords(a, b),
        }
    }

    pub fn add_ball(&mut self, center: Point, radius: f64) {
        if let Some((lo, hi)) = ball_chord(self.a, self.b, center, radius) {
            match self.clip {
                Some((clo, chi)) => self.union.insert(lo.max(clo), hi.min(chi)),
                None => self.union.insert(lo, hi),
            }
        }
    }

    pub fn covered(&self) -> bool {
        self.union.covers(0.0, 1.0)
    }
}

/// Farthest covered distance along `n` equally spaced rays from an anchor.
#[derive(Debug, Clone)]
pub struct RayReach {
    anchor: Point,
    dirs: Vec<Point>,
    reach: Vec<f64>,
    last: Vec<Option<usize>>,
}

impl RayReach {
    pub fn new(state: &OccupiedState, anchor: Point, n_dir: usize) -> Self {
        let dirs: Vec<Point> = (0..n_dir)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n_dir as f64;
                Point::new(theta.cos(), theta.sin())
            })
            .collect();
        let mut rr = RayReach {
            anchor,
            reach: vec![0.0; n_dir],
            last: vec![None; n_dir],
            dirs,
        };
        let mut chords = Vec::new();
        for k in 0..n_dir {
            chords.clear();
            let tip = rr.tip(k);
            state.seed().chords(anchor, tip, &mut chords);
            for &(lo, hi) in &chords {
                if hi >= 0.0 && lo <= hi {
                    rr.reach[k] = rr.reach[k].max(hi);
                }
            }
        }
        for (i, e) in state.events().iter().enumerate() {
            rr.add_ball(i, e.center, e.radius);
        }
        rr
    }

    fn tip(&self, k: usize) -> Point {
        Point::new(self.anchor.x + self.dirs[k].x, self.anchor.y + self.dirs[k].y)
    }

    pub fn add_ball(&mut self, index: usize, center: Point, radius: f64) {
        for k in 0..self.dirs.len() {
            if let Some((_, hi)) = ball_chord(self.anchor, self.tip(k), center, radius) {
                if hi >= 0.0 && hi > self.reach[k] {
                    self.reach[k] = hi;
                    self.last[k] = Some(index);
                }
            }
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.dirs.len())
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / self.dirs.len() as f64)
            .collect()
    }

    pub fn reach(&self) -> &[f64] {
        &self.reach
    }

    /// Ball realising the reach on each ray (`None` while the seed does).
    pub fn frontier_events(&self) -> &[Option<usize>] {
        &self.last
    }

    pub fn frontier_point(&self, k: usize) -> Point {
        let d = self.dirs[k];
        Point::new(self.anchor.x + d.x * self.reach[k], self.anchor.y + d.y * self.reach[k])
    }
}
