//! Planar primitives: points, axis-aligned windows and closed-ball chords.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn lerp(self, other: Point, u: f64) -> Point {
        Point::new(self.x + u * (other.x - self.x), self.y + u * (other.y - self.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// Closed axis-aligned rectangle `[x_lo, x_hi] × [y_lo, y_hi]`.
///
/// A window may be degenerate (a point or a segment), e.g. the bounding box of
/// a point seed. Sampling from a window requires a positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Window {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self, GeometryError> {
        let w = Window { x_lo, x_hi, y_lo, y_hi };
        if ![x_lo, x_hi, y_lo, y_hi].iter().all(|v| v.is_finite()) || x_lo > x_hi || y_lo > y_hi {
            return Err(GeometryError::InvalidWindow(w));
        }
        Ok(w)
    }

    /// Square `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Window::new(lo, hi, lo, hi)
    }

    pub fn around_point(p: Point) -> Self {
        Window { x_lo: p.x, x_hi: p.x, y_lo: p.y, y_hi: p.y }
    }

    pub fn around_ball(center: Point, radius: f64) -> Self {
        Window {
            x_lo: center.x - radius,
            x_hi: center.x + radius,
            y_lo: center.y - radius,
            y_hi: center.y + radius,
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_lo && p.x <= self.x_hi && p.y >= self.y_lo && p.y <= self.y_hi
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.x_lo >= self.x_lo
            && other.x_hi <= self.x_hi
            && other.y_lo >= self.y_lo
            && other.y_hi <= self.y_hi
    }

    pub fn inflate(&self, margin: f64) -> Window {
        Window {
            x_lo: self.x_lo - margin,
            x_hi: self.x_hi + margin,
            y_lo: self.y_lo - margin,
            y_hi: self.y_hi + margin,
        }
    }

    pub fn union(&self, other: &Window) -> Window {
        Window {
            x_lo: self.x_lo.min(other.x_lo),
            x_hi: self.x_hi.max(other.x_hi),
            y_lo: self.y_lo.min(other.y_lo),
            y_hi: self.y_hi.max(other.y_hi),
        }
    }

    pub fn intersection(&self, other: &Window) -> Option<Window> {
        let w = Window {
            x_lo: self.x_lo.max(other.x_lo),
            x_hi: self.x_hi.min(other.x_hi),
            y_lo: self.y_lo.max(other.y_lo),
            y_hi: self.y_hi.min(other.y_hi),
        };
        (w.x_lo <= w.x_hi && w.y_lo <= w.y_hi).then_some(w)
    }

    /// Squared distance from `p` to the closest point of the rectangle.
    #[inline]
    pub fn dist2_to(&self, p: Point) -> f64 {
        let dx = (self.x_lo - p.x).max(0.0).max(p.x - self.x_hi);
        let dy = (self.y_lo - p.y).max(0.0).max(p.y - self.y_hi);
        dx * dx + dy * dy
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x_lo, self.x_hi), p.y.clamp(self.y_lo, self.y_hi))
    }
}

/// Parameter interval `[lo, hi]` of the segment `a + u (b - a)` lying in the
/// closed ball `B(center, radius)`, unclipped to `[0, 1]`.
pub fn ball_chord(a: Point, b: Point, center: Point, radius: f64) -> Option<(f64, f64)> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let ex = a.x - center.x;
    let ey = a.y - center.y;
    let qa = dx * dx + dy * dy;
    let qc = ex * ex + ey * ey - radius * radius;
    if qa == 0.0 {
        return (qc <= 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let qb = dx * ex + dy * ey;
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    Some(((-qb - root) / qa, (-qb + root) / qa))
}

/// Parameter interval of the segment `a + u (b - a)` inside a closed rectangle.
pub fn window_chord(a: Point, b: Point, w: &Window) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (start, delta, min, max) in [(a.x, b.x - a.x, w.x_lo, w.x_hi), (a.y, b.y - a.y, w.y_lo, w.y_hi)] {
        if delta == 0.0 {
            if start < min || start > max {
                return None;
            }
        } else {
            let (u0, u1) = ((min - start) / delta, (max - start) / delta);
            lo = lo.max(u0.min(u1));
            hi = hi.min(u0.max(u1));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Region met by a ball `B(c, r)`: another disc or a left half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Overlap {
    Disc { center: Point, radius: f64 },
    /// `{x <= x0}`.
    LeftOf { x0: f64 },
}

impl Overlap {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Overlap::Disc { center, radius } => center.dist2(p) <= radius * radius,
            Overlap::LeftOf { x0 } => p.x <= x0,
        }
    }

    /// Area of `B(c, r) ∩ self`.
    pub fn area_with_ball(&self, c: Point, r: f64) -> f64 {
        match *self {
            Overlap::Disc { center, radius } => lens_area(c, r, center, radius),
            Overlap::LeftOf { x0 } => cap_area(r, x0 - (c.x - r)),
        }
    }

    /// Rectangle containing `B(c, r) ∩ self`, as an origin, unit axis and
    /// the ranges along the axis and its normal.
    fn frame(&self, c: Point, r: f64) -> (Point, Point, (f64, f64), f64) {
        match *self {
            Overlap::Disc { center, radius } => {
                let d = c.dist(center);
                if d == 0.0 || d <= (r - radius).abs() {
                    let (o, s) = if radius < r { (center, radius) } else { (c, r) };
                    return (o, Point::new(1.0, 0.0), (-s, s), s);
                }
                let u = Point::new((center.x - c.x) / d, (center.y - c.y) / d);
                let x0 = (d * d + r * r - radius * radius) / (2.0 * d);
                let half = if (0.0..=d).contains(&x0) {
                    (r * r - x0 * x0).max(0.0).sqrt()
                } else {
                    r.min(radius)
                };
                (c, u, ((d - radius).max(-r), r.min(d + radius)), half)
            }
            Overlap::LeftOf { x0 } => {
                let lo = -r;
                let hi = (x0 - c.x).min(r);
                let half = if hi >= 0.0 { r } else { (r * r - hi * hi).max(0.0).sqrt() };
                (c, Point::new(1.0, 0.0), (lo, hi), half)
            }
        }
    }

    /// Uniform point of `B(c, r) ∩ self` by rejection from its bounding
    /// rectangle; `None` after `trials` misses.
    pub fn sample_with_ball<R: rand::Rng + ?Sized>(&self, c: Point, r: f64, rng: &mut R, trials: u32) -> Option<Point> {
        let (o, u, (lo, hi), half) = self.frame(c, r);
        if !(lo <= hi) {
            return None;
        }
        let r2 = r * r;
        for _ in 0..trials {
            let a = lo + (hi - lo) * rng.random::<f64>();
            let b = half * (2.0 * rng.random::<f64>() - 1.0);
            let p = Point::new(o.x + a * u.x - b * u.y, o.y + a * u.y + b * u.x);
            if c.dist2(p) <= r2 && self.contains(p) {
                return Some(p);
            }
        }
        None
    }
}

/// Area of the intersection of two discs.
pub fn lens_area(c1: Point, r1: f64, c2: Point, r2: f64) -> f64 {
    let d = c1.dist(c2);
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let s = r1.min(r2);
        return std::f64::consts::PI * s * s;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0).sqrt();
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k
}

/// Area of the part of a disc of radius `r` within depth `h` of its boundary
/// along a chord (a circular segment of height `h`).
pub fn cap_area(r: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if h >= 2.0 * r {
        return std::f64::consts::PI * r * r;
    }
    r * r * ((r - h) / r).clamp(-1.0, 1.0).acos() - (r - h) * (2.0 * r * h - h * h).max(0.0).sqrt()
}

/// Sorted union of closed intervals on the real line.
#[derive(Debug, Clone, Default)]
pub struct IntervalUnion {
    spans: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn spans(&self) -> &[(f64, f64)] {
        &self.spans
    }

    pub fn insert(&mut self, lo: f64, hi: f64) {
        if !(lo <= hi) {
            return;
        }
        // first span whose end reaches lo
        let start = self.spans.partition_point(|&(_, e)| e < lo);
        let mut end = start;
        let (mut new_lo, mut new_hi) = (lo, hi);
        while end < self.spans.len() && self.spans[end].0 <= hi {
            new_lo = new_lo.min(self.spans[end].0);
            new_hi = new_hi.max(self.spans[end].1);
            end += 1;
        }
        self.spans.splice(start..end, std::iter::once((new_lo, new_hi)));
    }

    /// Whether `[lo, hi]` lies inside a single merged span.
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let i = self.spans.partition_point(|&(_, e)| e < lo);
        self.spans.get(i).is_some_and(|&(s, e)| s <= lo && e >= hi)
    }

    /// Leftmost uncovered sub-interval of `[lo, hi]`, if any.
    pub fn first_gap(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let mut cursor = lo;
        for &(s, e) in &self.spans {
            if e < cursor {
                continue;
            }
            if s > cursor {
                return Some((cursor, s.min(hi)));
            }
            cursor = e;
            if cursor >= hi {
                return None;
            }
        }
        Some((cursor, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chord_of_axis_ball() {
        let (lo, hi) = ball_chord(Point::ORIGIN, Point::new(1.4, 0.0), Point::new(0.5, 0.0), 1.0).unwrap();
        assert!((lo * 1.4 + 0.5).abs() < 1e-12);
        assert!((hi * 1.4 - 1.5).abs() < 1e-12);
        assert!(ball_chord(Point::ORIGIN, Point::new(1.0, 0.0), Point::new(0.5, 2.0), 1.0).is_none());
    }

    #[test]
    fn window_chord_clips_segment() {
        let w = Window::square(0.0, 2.0).unwrap();
        let (lo, hi) = window_chord(Point::new(-1.0, 1.0), Point::new(3.0, 1.0), &w).unwrap();
        assert_eq!((lo, hi), (0.25, 0.75));
        assert!(window_chord(Point::new(-1.0, 3.0), Point::new(3.0, 3.0), &w).is_none());
    }

    #[test]
    fn interval_union_merges_touching_spans() {
        let mut u = IntervalUnion::new();
        u.insert(0.5, 0.7);
        u.insert(0.0, 0.2);
        assert!(!u.covers(0.0, 1.0));
        assert_eq!(u.first_gap(0.0, 1.0), Some((0.2, 0.5)));
        u.insert(0.2, 0.5);
        u.insert(0.6, 1.0);
        assert_eq!(u.spans(), &[(0.0, 1.0)]);
        assert!(u.covers(0.0, 1.0));
        assert_eq!(u.first_gap(0.0, 1.0), None);
    }

    #[test]
    fn window_rejects_inverted_bounds() {
        assert!(Window::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(Window::new(0.0, f64::NAN, 0.0, 1.0).is_err());
        assert_eq!(Window::around_point(Point::ORIGIN).area(), 0.0);
    }

    #[test]
    fn overlap_areas_match_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let c = Point::new(0.3, -0.2);
        let r = 1.0;
        let cases = [
            Overlap::Disc { center: Point::new(1.5, 0.4), radius: 0.8 },
            Overlap::Disc { center: Point::new(0.1, 0.0), radius: 0.3 },
            Overlap::Disc { center: Point::new(-0.5, 0.0), radius: 4.0 },
            Overlap::Disc { center: Point::new(2.29, -0.2), radius: 1.0 },
            Overlap::LeftOf { x0: -0.5 },
            Overlap::LeftOf { x0: 0.9 },
        ];
        let n = 400_000;
        for o in cases {
            let mut hit = 0;
            let mut x_sum = 0.0;
            for _ in 0..n {
                let p = Point::new(c.x + r * (2.0 * rng.random::<f64>() - 1.0), c.y + r * (2.0 * rng.random::<f64>() - 1.0));
                if c.dist2(p) <= r * r && o.contains(p) {
                    hit += 1;
                    x_sum += p.x;
                }
            }
            let est = 4.0 * r * r * hit as f64 / n as f64;
            let area = o.area_with_ball(c, r);
            assert!((est - area).abs() < 5e-3 + 0.02 * area, "{o:?}: {est} vs {area}");
            // sampler mean x against the rejection estimate
            let m = 20_000;
            let xs: f64 = (0..m).map(|_| o.sample_with_ball(c, r, &mut rng, 10_000).unwrap().x).sum::<f64>() / m as f64;
            let target = x_sum / hit as f64;
            assert!((xs - target).abs() < 0.02, "{o:?}: {xs} vs {target}");
        }
        assert_eq!(lens_area(c, 1.0, Point::new(2.4, -0.2), 1.0), 0.0);
        assert!((cap_area(1.0, 1.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
