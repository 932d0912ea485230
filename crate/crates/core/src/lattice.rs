//! Integer geometry of the half-lattice `H = Z × Z⁺`.
//!
//! Sites are written `a+bi` (real part = horizontal coordinate, imaginary
//! part = height). Rectangles are given by two diagonal corners, either of
//! which may sit at infinity; edge regions `⟨u, v⟩` are the nearest-neighbour
//! edge sets used as box constraints.

use std::cmp::{max, min};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vertex of the half-lattice. `im() >= 0` always holds.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    re: i64,
    im: i64,
}

impl Site {
    pub const ORIGIN: Site = Site { re: 0, im: 0 };

    pub fn new(re: i64, im: i64) -> Result<Site> {
        if im < 0 {
            return Err(Error::HalfSpace(format!("{re}{im:+}i")));
        }
        Ok(Site { re, im })
    }

    /// Panicking constructor for literals known to be in the half-space.
    pub fn at(re: i64, im: i64) -> Site {
        Site::new(re, im).expect("site below the half-space boundary")
    }

    pub fn re(&self) -> i64 {
        self.re
    }

    pub fn im(&self) -> i64 {
        self.im
    }

    /// Translate by `(dre, dim)`; errors if the result leaves `H`.
    pub fn offset(&self, dre: i64, dim: i64) -> Result<Site> {
        Site::new(self.re + dre, self.im + dim)
    }

    /// The up-to-four lattice neighbours that stay in `H`.
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        Direction::ALL
            .iter()
            .filter_map(move |d| self.step(*d))
    }

    pub fn step(&self, d: Direction) -> Option<Site> {
        let (dx, dy) = d.delta();
        Site::new(self.re + dx, self.im + dy).ok()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.re, self.im)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `a,b`, `a b` or the complex form `a+bi`.
impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Site> {
        let bad = || Error::Format {
            line: 0,
            msg: format!("cannot parse site `{s}`"),
        };
        let s = s.trim();
        let (re, im) = if let Some(body) = s.strip_suffix('i') {
            // split at the last sign that is not the leading one
            let pos = body
                .char_indices()
                .skip(1)
                .filter(|(_, c)| *c == '+' || *c == '-')
                .map(|(i, _)| i)
                .last()
                .ok_or_else(bad)?;
            (&body[..pos], &body[pos..])
        } else if let Some((a, b)) = s.split_once(',') {
            (a, b)
        } else if let Some((a, b)) = s.split_once(' ') {
            (a, b)
        } else {
            (s, "0")
        };
        let re: i64 = re.trim().parse().map_err(|_| bad())?;
        let im: i64 = im.trim().trim_start_matches('+').parse().map_err(|_| bad())?;
        Site::new(re, im)
    }
}

/// Unit steps on the lattice. The discriminant doubles as a bit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    East = 0,
    West = 1,
    North = 2,
    South = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::West,
        Direction::North,
        Direction::South,
    ];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
            Direction::North => (0, 1),
            Direction::South => (0, -1),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::East => Direction::West,
            Direction::West => Direction::East,
            Direction::North => Direction::South,
            Direction::South => Direction::North,
        }
    }

    pub fn from_delta(dx: i64, dy: i64) -> Option<Direction> {
        match (dx, dy) {
            (1, 0) => Some(Direction::East),
            (-1, 0) => Some(Direction::West),
            (0, 1) => Some(Direction::North),
            (0, -1) => Some(Direction::South),
            _ => None,
        }
    }
}

/// Undirected nearest-neighbour edge, stored with endpoints in lexicographic
/// `(re, im)` order so that `(x, y)` and `(y, x)` compare equal.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Edge {
    lo: Site,
    hi: Site,
}

impl Edge {
    pub fn new(x: Site, y: Site) -> Result<Edge> {
        let d = (x.re - y.re).abs() + (x.im - y.im).abs();
        if d != 1 {
            return Err(Error::Precondition(format!(
                "{x} and {y} are not nearest neighbours"
            )));
        }
        Ok(if x <= y { Edge { lo: x, hi: y } } else { Edge { lo: y, hi: x } })
    }

    pub fn endpoints(&self) -> (Site, Site) {
        (self.lo, self.hi)
    }

    pub fn is_horizontal(&self) -> bool {
        self.lo.im == self.hi.im
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// A coordinate that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bound {
    NegInf,
    Finite(i64),
    PosInf,
}

impl Bound {
    pub fn finite(self) -> Option<i64> {
        match self {
            Bound::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => write!(f, "-inf"),
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::PosInf => write!(f, "inf"),
        }
    }
}

/// Corner of a possibly infinite rectangle. Finite coordinates need not be in
/// the half-space; the rectangle is intersected with `H` on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corner {
    pub re: Bound,
    pub im: Bound,
}

impl Corner {
    pub fn finite(re: i64, im: i64) -> Corner {
        Corner {
            re: Bound::Finite(re),
            im: Bound::Finite(im),
        }
    }
}

impl From<Site> for Corner {
    fn from(s: Site) -> Corner {
        Corner::finite(s.re, s.im)
    }
}

/// `⌈u, v⌋ ∩ H`, normalized so that `lo <= hi` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    re_lo: Bound,
    re_hi: Bound,
    im_lo: Bound,
    im_hi: Bound,
    empty: bool,
}

/// `⌈u, v⌋`: the rectangle with diagonal corners `u` and `v`, clipped to `H`.
pub fn rect(u: impl Into<Corner>, v: impl Into<Corner>) -> Rect {
    Rect::new(u.into(), v.into())
}

/// `B_x(M) = ⌈x − M − Mi, x + M + Mi⌋ ∩ H`.
pub fn ball(x: Site, radius: i64) -> Rect {
    let m = radius.max(0);
    rect(
        Corner::finite(x.re - m, x.im - m),
        Corner::finite(x.re + m, x.im + m),
    )
}

impl Rect {
    pub fn new(u: Corner, v: Corner) -> Rect {
        let (re_lo, re_hi) = (min(u.re, v.re), max(u.re, v.re));
        let (mut im_lo, im_hi) = (min(u.im, v.im), max(u.im, v.im));
        let empty = im_hi < Bound::Finite(0);
        if im_lo < Bound::Finite(0) {
            im_lo = Bound::Finite(0);
        }
        Rect {
            re_lo,
            re_hi,
            im_lo,
            im_hi,
            empty,
        }
    }

    /// Finite rectangle `[x0, x1] × [y0, y1] ∩ H` from raw coordinates.
    pub fn finite(x0: i64, y0: i64, x1: i64, y1: i64) -> Rect {
        rect(Corner::finite(x0, y0), Corner::finite(x1, y1))
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn is_finite(&self) -> bool {
        [self.re_lo, self.re_hi, self.im_lo, self.im_hi]
            .iter()
            .all(|b| b.finite().is_some())
    }

    pub fn re_range(&self) -> (Bound, Bound) {
        (self.re_lo, self.re_hi)
    }

    pub fn im_range(&self) -> (Bound, Bound) {
        (self.im_lo, self.im_hi)
    }

    /// `(x0, y0, x1, y1)` for a finite, nonempty rectangle.
    pub fn bounds(&self) -> Result<(i64, i64, i64, i64)> {
        match (
            self.re_lo.finite(),
            self.im_lo.finite(),
            self.re_hi.finite(),
            self.im_hi.finite(),
        ) {
            (Some(x0), Some(y0), Some(x1), Some(y1)) if !self.empty => Ok((x0, y0, x1, y1)),
            (Some(_), Some(_), Some(_), Some(_)) => Err(Error::Window("empty rectangle".into())),
            _ => Err(Error::InfiniteRegion),
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        !self.empty
            && Bound::Finite(s.re) >= self.re_lo
            && Bound::Finite(s.re) <= self.re_hi
            && Bound::Finite(s.im) >= self.im_lo
            && Bound::Finite(s.im) <= self.im_hi
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.empty
            || (!self.empty
                && other.re_lo >= self.re_lo
                && other.re_hi <= self.re_hi
                && other.im_lo >= self.im_lo
                && other.im_hi <= self.im_hi)
    }

    /// Number of sites, or `None` when infinite.
    pub fn len(&self) -> Option<u64> {
        if self.empty {
            return Some(0);
        }
        let (x0, y0, x1, y1) = self.bounds().ok()?;
        Some(((x1 - x0 + 1) * (y1 - y0 + 1)) as u64)
    }

    /// Sites in row-major order of `(re, im)` (lexicographic).
    pub fn sites(&self) -> Result<Vec<Site>> {
        if self.empty {
            return Ok(Vec::new());
        }
        let (x0, y0, x1, y1) = self.bounds()?;
        let mut out = Vec::with_capacity(((x1 - x0 + 1) * (y1 - y0 + 1)) as usize);
        for re in x0..=x1 {
            for im in y0..=y1 {
                out.push(Site { re, im });
            }
        }
        Ok(out)
    }

    /// Materialize only the part inside `window`.
    pub fn sites_within(&self, window: &Rect) -> Result<Vec<Site>> {
        self.intersect(window).sites()
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        let re_lo = max(self.re_lo, other.re_lo);
        let re_hi = min(self.re_hi, other.re_hi);
        let im_lo = max(self.im_lo, other.im_lo);
        let im_hi = min(self.im_hi, other.im_hi);
        Rect {
            re_lo,
            re_hi,
            im_lo,
            im_hi,
            empty: self.empty || other.empty || re_lo > re_hi || im_lo > im_hi,
        }
    }

    /// Smallest rectangle containing both.
    pub fn hull(&self, other: &Rect) -> Rect {
        if self.empty {
            return *other;
        }
        if other.empty {
            return *self;
        }
        Rect {
            re_lo: min(self.re_lo, other.re_lo),
            re_hi: max(self.re_hi, other.re_hi),
            im_lo: min(self.im_lo, other.im_lo),
            im_hi: max(self.im_hi, other.im_hi),
            empty: false,
        }
    }

    /// Grow a finite rectangle by `margin` on every side (clipped to `H`).
    pub fn expand(&self, margin: i64) -> Result<Rect> {
        let (x0, y0, x1, y1) = self.bounds()?;
        Ok(Rect::finite(x0 - margin, y0 - margin, x1 + margin, y1 + margin))
    }

    /// Bounding rectangle of a nonempty set of sites.
    pub fn bounding(sites: &[Site]) -> Option<Rect> {
        let first = sites.first()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.re, first.im, first.re, first.im);
        for s in sites {
            x0 = x0.min(s.re);
            x1 = x1.max(s.re);
            y0 = y0.min(s.im);
            y1 = y1.max(s.im);
        }
        Some(Rect::finite(x0, y0, x1, y1))
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return write!(f, "empty");
        }
        write!(
            f,
            "{},{},{},{}",
            self.re_lo, self.im_lo, self.re_hi, self.im_hi
        )
    }
}

impl FromStr for Rect {
    type Err = Error;

    /// Parses the `x0,y0,x1,y1` form written by `Display` (finite or `inf`).
    fn from_str(s: &str) -> Result<Rect> {
        let bad = || Error::Format {
            line: 0,
            msg: format!("cannot parse rectangle `{s}`"),
        };
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let b = |p: &str| -> Result<Bound> {
            match p {
                "inf" | "+inf" => Ok(Bound::PosInf),
                "-inf" => Ok(Bound::NegInf),
                v => v.parse().map(Bound::Finite).map_err(|_| bad()),
            }
        };
        Ok(Rect::new(
            Corner {
                re: b(parts[0])?,
                im: b(parts[1])?,
            },
            Corner {
                re: b(parts[2])?,
                im: b(parts[3])?,
            },
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    /// `|a − c| ≥ 2|b − d|`: vertical edges on the two end columns are excluded.
    Wide,
    /// `2|a − c| ≤ |b − d|`: horizontal edges on the two end rows are excluded.
    Tall,
}

/// The edge set `⟨u, v⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeRegion {
    kind: RegionKind,
    u: Site,
    v: Site,
}

pub fn edge_region(u: Site, v: Site) -> Result<EdgeRegion> {
    EdgeRegion::new(u, v)
}

impl EdgeRegion {
    pub fn new(u: Site, v: Site) -> Result<EdgeRegion> {
        let dre = (u.re - v.re).abs();
        let dim = (u.im - v.im).abs();
        let kind = if dre >= 2 * dim {
            RegionKind::Wide
        } else if 2 * dre <= dim {
            RegionKind::Tall
        } else {
            return Err(Error::Aspect {
                u: u.to_string(),
                v: v.to_string(),
            });
        };
        Ok(EdgeRegion { kind, u, v })
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn corners(&self) -> (Site, Site) {
        (self.u, self.v)
    }

    pub fn rect(&self) -> Rect {
        rect(self.u, self.v)
    }

    pub fn contains(&self, e: &Edge) -> bool {
        let r = self.rect();
        let (x, y) = e.endpoints();
        if !r.contains(x) || !r.contains(y) {
            return false;
        }
        match self.kind {
            RegionKind::Wide => {
                let ends = [self.u.re, self.v.re];
                !(ends.contains(&x.re) && ends.contains(&y.re))
            }
            RegionKind::Tall => {
                let ends = [self.u.im, self.v.im];
                !(ends.contains(&x.im) && ends.contains(&y.im))
            }
        }
    }

    /// The explicit edge list, in lexicographic order.
    pub fn edges(&self) -> Vec<Edge> {
        let sites = self.rect().sites().expect("edge regions are finite");
        let mut out = Vec::new();
        for s in sites {
            for d in [Direction::East, Direction::North] {
                if let Some(t) = s.step(d) {
                    let e = Edge::new(s, t).expect("neighbours");
                    if self.contains(&e) {
                        out.push(e);
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Sites touched by at least one member edge.
    pub fn touched_sites(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self
            .edges()
            .iter()
            .flat_map(|e| {
                let (a, b) = e.endpoints();
                [a, b]
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeedOrientation {
    Horizontal,
    Vertical,
}

/// `(x × t)_r`: the `2r + 1` sites `⌈x − r, x + r⌋` (horizontal) or
/// `⌈x − ri, x + ri⌋` (vertical), all infected at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub center: Site,
    pub r: i64,
    pub orientation: SeedOrientation,
    pub time: f64,
}

impl Seed {
    pub fn horizontal(center: Site, r: i64, time: f64) -> Seed {
        Seed {
            center,
            r,
            orientation: SeedOrientation::Horizontal,
            time,
        }
    }

    pub fn vertical(center: Site, r: i64, time: f64) -> Seed {
        Seed {
            center,
            r,
            orientation: SeedOrientation::Vertical,
            time,
        }
    }

    pub fn sites(&self) -> Result<Vec<Site>> {
        seed_sites(self)
    }
}

pub fn seed_sites(s: &Seed) -> Result<Vec<Site>> {
    if s.r < 0 {
        return Err(Error::Precondition(format!("seed radius {} < 0", s.r)));
    }
    (-s.r..=s.r)
        .map(|k| match s.orientation {
            SeedOrientation::Horizontal => s.center.offset(k, 0),
            SeedOrientation::Vertical => s.center.offset(0, k),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_rect_is_a_point() {
        let r = rect(Site::ORIGIN, Site::ORIGIN);
        assert_eq!(r.sites().unwrap(), vec![Site::ORIGIN]);
    }

    #[test]
    fn half_infinite_strip() {
        let r = rect(
            Corner::finite(-3, 0),
            Corner {
                re: Bound::Finite(3),
                im: Bound::PosInf,
            },
        );
        assert!(!r.is_finite());
        assert_eq!(r.re_range(), (Bound::Finite(-3), Bound::Finite(3)));
        assert_eq!(r.im_range(), (Bound::Finite(0), Bound::PosInf));
        assert!(r.contains(Site::at(3, 1_000_000)));
        assert!(!r.contains(Site::at(4, 0)));
        assert_eq!(r.sites(), Err(Error::InfiniteRegion));
        let window = Rect::finite(-10, 0, 10, 2);
        assert_eq!(r.sites_within(&window).unwrap().len(), 7 * 3);
    }

    #[test]
    fn rect_normalizes_corners() {
        let r = rect(Site::at(2, 1), Site::at(-1, 0));
        let sites = r.sites().unwrap();
        assert_eq!(sites.len(), 8);
        assert_eq!(r.bounds().unwrap(), (-1, 0, 2, 1));
    }

    #[test]
    fn balls() {
        assert_eq!(ball(Site::ORIGIN, 0).sites().unwrap(), vec![Site::ORIGIN]);
        assert_eq!(ball(Site::at(5, 3), 2).bounds().unwrap(), (3, 1, 7, 5));
        assert_eq!(ball(Site::at(0, 1), 3).bounds().unwrap(), (-3, 0, 3, 4));
    }

    #[test]
    fn edge_region_kinds() {
        assert!(edge_region(Site::ORIGIN, Site::ORIGIN).unwrap().edges().is_empty());
        let r = edge_region(Site::ORIGIN, Site::at(4, 1)).unwrap();
        assert_eq!(r.kind(), RegionKind::Wide);
        // 4 horizontal edges on each of 2 rows, plus vertical edges at re = 1, 2, 3
        assert_eq!(r.edges().len(), 8 + 3);
        assert!(matches!(
            edge_region(Site::ORIGIN, Site::at(1, 1)),
            Err(Error::Aspect { .. })
        ));
        let t = edge_region(Site::ORIGIN, Site::at(1, 4)).unwrap();
        assert_eq!(t.kind(), RegionKind::Tall);
        assert_eq!(t.edges().len(), 8 + 3);
    }

    #[test]
    fn seeds() {
        let s = Seed::horizontal(Site::at(0, 5), 0, 0.0);
        assert_eq!(seed_sites(&s).unwrap(), vec![Site::at(0, 5)]);
        let s = Seed::horizontal(Site::at(0, 5), 1, 0.0);
        assert_eq!(
            seed_sites(&s).unwrap(),
            vec![Site::at(-1, 5), Site::at(0, 5), Site::at(1, 5)]
        );
        let s = Seed::vertical(Site::at(0, 1), 2, 0.0);
        assert!(matches!(seed_sites(&s), Err(Error::HalfSpace(_))));
    }

    #[test]
    fn edges_are_unordered() {
        let a = Site::at(0, 0);
        let b = Site::at(0, 1);
        assert_eq!(Edge::new(a, b).unwrap(), Edge::new(b, a).unwrap());
        assert!(Edge::new(a, Site::at(1, 1)).is_err());
    }

    #[test]
    fn site_parsing() {
        assert_eq!("3+4i".parse::<Site>().unwrap(), Site::at(3, 4));
        assert_eq!("-3+0i".parse::<Site>().unwrap(), Site::at(-3, 0));
        assert_eq!("-2,7".parse::<Site>().unwrap(), Site::at(-2, 7));
        assert_eq!(Site::at(-1, 5).to_string(), "-1+5i");
        assert!("1-2i".parse::<Site>().is_err());
    }
}
