//! Dynamic renormalization: S/L boxes chained into seed routes between the
//! squares `R_{m,n}`, the oriented site percolation on those squares, and the
//! composite G and L routes built from the route times F₁ and F₂.
//!
//! Plans are built in a canonical frame where the hop heads north from the
//! square `[0, 100h]²` to the square shifted up by `Mh`. Other orientations
//! and the eastward hop are reflections of that frame (a swap of the axes for
//! east), so a single builder covers every case.

mod grid;
mod route;
mod run;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::blocks::SeedLine;
use crate::error::{Error, Result};
use crate::lattice::{EdgeRegion, Rect, Seed, SeedOrientation, Site};

pub use grid::{renorm_grid, renorm_grid_with, Cell, CellSeeds, CellStatus, EnvHopRunner, HopRunner, RenormGrid, Via};
pub use route::{g_route, g_steps, U_STEPS, V_STEPS, l_route, EnvSeedRouter, FStep, GRoute, Heading, LRoute, SeedRouter, Which};
pub use run::{f_time_stats, run_route, FailReason, FTimeStats, RouteFailure, RouteOutcome, Summary};

/// Diagonal orientation `±1 ± i` of a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Orientation {
    pub re: i8,
    pub im: i8,
}

impl Orientation {
    pub const NE: Orientation = Orientation { re: 1, im: 1 };
    pub const SE: Orientation = Orientation { re: 1, im: -1 };
    pub const NW: Orientation = Orientation { re: -1, im: 1 };
    pub const SW: Orientation = Orientation { re: -1, im: -1 };
    pub const ALL: [Orientation; 4] = [Self::NE, Self::SE, Self::NW, Self::SW];

    /// Exchange the roles of the two axes.
    pub fn swapped(self) -> Orientation {
        Orientation { re: self.im, im: self.re }
    }

    /// Componentwise sign product, i.e. the orientation expressed in a frame
    /// reflected by `frame`.
    pub fn within(self, frame: Orientation) -> Orientation {
        Orientation {
            re: self.re * frame.re,
            im: self.im * frame.im,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let re = if self.re > 0 { "1" } else { "-1" };
        let im = if self.im > 0 { "+i" } else { "-i" };
        write!(f, "{re}{im}")
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Orientation> {
        match s.trim().replace(' ', "").as_str() {
            "1+i" | "+1+i" => Ok(Self::NE),
            "1-i" | "+1-i" => Ok(Self::SE),
            "-1+i" => Ok(Self::NW),
            "-1-i" => Ok(Self::SW),
            other => Err(Error::Precondition(format!("unknown orientation {other:?}"))),
        }
    }
}

/// Desk-scale geometry of the renormalization.
///
/// `m` plays the role of the spacing constant M: squares have side `100h` and
/// sit `Mh` apart. `kappa` loosens the upper bounds on box widths so that
/// small `h` admits integer widths. `budget` is the time allotted to each box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub h: i64,
    pub r: i64,
    pub m: i64,
    pub kappa: f64,
    pub budget: f64,
}

pub const DEFAULT_KAPPA: f64 = 1.25;

impl Geometry {
    /// Geometry with the default slack and a budget of `20h / mean_rate`.
    pub fn new(h: i64, r: i64, m: i64, mean_rate: f64) -> Result<Geometry> {
        let g = Geometry {
            h,
            r,
            m,
            kappa: DEFAULT_KAPPA,
            budget: Self::default_budget(h, mean_rate),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn default_budget(h: i64, mean_rate: f64) -> f64 {
        if mean_rate > 0.0 {
            20.0 * h as f64 / mean_rate
        } else {
            20.0 * h as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Geom(m));
        if self.h < 2 {
            return bad(format!("h = {} must be at least 2", self.h));
        }
        if self.r < 0 {
            return bad(format!("r = {} must be nonnegative", self.r));
        }
        if 4 * self.r > self.h {
            return bad(format!("h = {} leaves no room for a seed of radius {}", self.h, self.r));
        }
        if self.m < 1 {
            return bad(format!("M = {} must be at least 1", self.m));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return bad(format!("slack factor {} must be finite and >= 1", self.kappa));
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return bad(format!("box budget {} must be positive", self.budget));
        }
        let h = self.h as f64;
        if self.w_short() as f64 >= 4.0001 * h * self.kappa {
            return bad(format!("S-box width {} exceeds 4.0001·h·κ", self.w_short()));
        }
        if self.w_long() as f64 >= 8.0001 * h * self.kappa {
            return bad(format!("L-box width {} exceeds 8.0001·h·κ", self.w_long()));
        }
        Ok(())
    }

    /// Width of an S-box beyond its source seed: `4h + 4r`, raised (only for
    /// `h = 3, r = 0`) so that two S-pairs climb past the `8h + 1` reach of a
    /// turning L-box.
    pub fn w_short(&self) -> i64 {
        let h = self.h;
        (4 * h + 4 * self.r).max((9 * h + 2 - 3 * (h / 2)) / 2)
    }

    /// Width of an L-box beyond its source seed, `w_S + 4h + 1 + ⌈h/2⌉`. At a
    /// turn the vertical L-box reaches `8h + 1` back down, so its column has to
    /// clear the last horizontal S-box of the previous leg.
    pub fn w_long(&self) -> i64 {
        self.w_short() + 4 * self.h + 1 + (self.h + 1) / 2
    }

    pub fn cell_side(&self) -> i64 {
        100 * self.h
    }

    pub fn spacing(&self) -> i64 {
        self.m * self.h
    }

    /// `(back, forward)` extent of a box of `kind` measured from its source.
    fn reach(&self, kind: BoxKind) -> (i64, i64) {
        match kind {
            BoxKind::S => (4 * self.h + 1, self.w_short()),
            BoxKind::L => (8 * self.h + 1, self.w_long()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxKind {
    S,
    L,
}

/// Direction of a single hop between neighbouring squares, in grid terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    North,
    East,
}

/// Where a box wants its seed: the candidate line and the seed orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub line: SeedLine,
    pub orientation: SeedOrientation,
}

/// A box placed in the plane; target `i` is sought within region `i`. Two
/// regions and two targets mark the final box of a hop, which emits the seed
/// for the next northward hop first and the seed for the next eastward hop
/// second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedBox {
    pub hop: usize,
    pub kind: BoxKind,
    pub regions: Vec<EdgeRegion>,
    pub targets: Vec<Target>,
    pub rect: Rect,
    /// For a final box inside a longer route, the target that feeds the next hop.
    pub next: Option<usize>,
}

impl PlacedBox {
    pub fn is_final(&self) -> bool {
        self.targets.len() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub origin: Seed,
    pub orientation: Orientation,
    pub n: u32,
    pub geom: Geometry,
    /// Lower-left corner of the origin square.
    pub corner: Site,
    /// Squares visited, `(0, 0)` first, alternating north and east steps.
    pub cells: Vec<(i64, i64)>,
    pub target_cell: Rect,
    pub boxes: Vec<PlacedBox>,
}

/// Lower-left corner of the square containing `x`.
pub fn cell_corner(x: Site, geom: &Geometry) -> Site {
    let s = geom.cell_side();
    Site::at(s * x.re().div_euclid(s), s * x.im().div_euclid(s))
}

/// The square `R_{m,k}` for an orientation: the origin square shifted by
/// `Mh (o.re·m + o.im·k i)`.
pub fn cell_rect(corner: Site, m: i64, k: i64, o: Orientation, geom: &Geometry) -> Rect {
    let x0 = corner.re() + i64::from(o.re) * m * geom.spacing();
    let y0 = corner.im() + i64::from(o.im) * k * geom.spacing();
    Rect::finite(x0, y0, x0 + geom.cell_side(), y0 + geom.cell_side())
}

/// Maps canonical coordinates to the plane.
#[derive(Debug, Clone, Copy)]
struct Frame {
    ox: i64,
    oy: i64,
    sx: i64,
    sy: i64,
    swap: bool,
}

impl Frame {
    fn new(corner: Site, from: (i64, i64), step: Step, o: Orientation, geom: &Geometry) -> Frame {
        let c = cell_rect(corner, from.0, from.1, o, geom);
        let (x0, y0, x1, y1) = c.bounds().expect("cells are finite");
        let sx = i64::from(o.re);
        let sy = i64::from(o.im);
        Frame {
            ox: if sx > 0 { x0 } else { x1 },
            oy: if sy > 0 { y0 } else { y1 },
            sx,
            sy,
            swap: step == Step::East,
        }
    }

    fn to_real(self, x: i64, y: i64) -> (i64, i64) {
        let (u, v) = if self.swap { (y, x) } else { (x, y) };
        (self.ox + self.sx * u, self.oy + self.sy * v)
    }

    fn to_canon(self, x: i64, y: i64) -> (i64, i64) {
        let u = (x - self.ox) * self.sx;
        let v = (y - self.oy) * self.sy;
        if self.swap {
            (v, u)
        } else {
            (u, v)
        }
    }

    fn site(&self, x: i64, y: i64) -> Result<Site> {
        let (a, b) = self.to_real(x, y);
        Site::new(a, b).map_err(|_| Error::Geom(format!("route leaves the half-space at {a}{b:+}i")))
    }

    fn orientation(&self, canon: Line) -> SeedOrientation {
        match (canon, self.swap) {
            (Line::Row { .. }, false) | (Line::Col { .. }, true) => SeedOrientation::Horizontal,
            _ => SeedOrientation::Vertical,
        }
    }
}

/// Candidate seed sites on a canonical row or column, `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Line {
    Row { y: i64, lo: i64, hi: i64 },
    Col { x: i64, lo: i64, hi: i64 },
}

impl Line {
    fn mid(&self) -> i64 {
        match *self {
            Line::Row { lo, hi, .. } | Line::Col { lo, hi, .. } => (lo + hi).div_euclid(2),
        }
    }
}

#[derive(Debug, Clone)]
struct CanonBox {
    kind: BoxKind,
    regions: Vec<[i64; 4]>,
    targets: Vec<Line>,
}

/// Builds one hop in the canonical frame.
struct HopBuilder<'a> {
    g: &'a Geometry,
    cur: Line,
    boxes: Vec<CanonBox>,
}

impl HopBuilder<'_> {
    fn wide(&mut self, kind: BoxKind, east: bool) {
        let Line::Row { y, .. } = self.cur else {
            unreachable!("wide boxes start from rows")
        };
        let (h, r) = (self.g.h, self.g.r);
        let m = self.cur.mid();
        let (back, fwd) = self.g.reach(kind);
        let (x0, x1, tx) = if east { (m - back, m + fwd, m + fwd) } else { (m - fwd, m + back, m - fwd) };
        let t = Line::Col { x: tx, lo: y + r, hi: y + h - r };
        self.boxes.push(CanonBox {
            kind,
            regions: vec![[x0, y, x1, y + h]],
            targets: vec![t],
        });
        self.cur = t;
    }

    fn tall(&mut self, kind: BoxKind, east: bool) {
        let Line::Col { x, .. } = self.cur else {
            unreachable!("tall boxes start from columns")
        };
        let (h, r) = (self.g.h, self.g.r);
        let m = self.cur.mid();
        let (back, fwd) = self.g.reach(kind);
        let (x0, x1, lo, hi) = if east { (x, x + h, x + r, x + h - r) } else { (x - h, x, x - h + r, x - r) };
        let t = Line::Row { y: m + fwd, lo, hi };
        self.boxes.push(CanonBox {
            kind,
            regions: vec![[x0, m - back, x1, m + fwd]],
            targets: vec![t],
        });
        self.cur = t;
    }

    fn pair(&mut self, kind: BoxKind, east: bool) {
        self.wide(kind, east);
        self.tall(kind, east);
    }

    /// The two-sided L-box; returns the (left, right) target columns.
    fn double(&mut self) -> (Line, Line) {
        let Line::Row { y, .. } = self.cur else {
            unreachable!("the final box starts from a row")
        };
        let (h, r) = (self.g.h, self.g.r);
        let m = self.cur.mid();
        let (back, fwd) = self.g.reach(BoxKind::L);
        let right = Line::Col { x: m + fwd, lo: y + r, hi: y + h - r };
        let left = Line::Col { x: m - fwd, lo: y + r, hi: y + h - r };
        self.boxes.push(CanonBox {
            kind: BoxKind::L,
            regions: vec![[m - fwd, y, m + back, y + h], [m - back, y, m + fwd, y + h]],
            targets: vec![left, right],
        });
        (left, right)
    }
}

/// The zig-zag of one hop: spread northwest, switch to northeast with two
/// L-boxes past the line `30h`, back to northwest past `70h`, until the seed
/// is `10h` deep in the next square; then one L-pair toward the middle and the
/// two-sided L-box.
fn build_hop(g: &Geometry, start: Line) -> Result<Vec<CanonBox>> {
    let h = g.h;
    let side = g.cell_side();
    let (turn_lo, turn_hi) = (30 * h, 70 * h);
    let goal = g.spacing() + 10 * h;
    let rise_long = g.w_long() + h / 2;
    let mut b = HopBuilder {
        g,
        cur: start,
        boxes: Vec::new(),
    };
    // A vertical seed heads west first: its producer lies to the east.
    let mut east = match start {
        Line::Col { .. } => {
            b.tall(BoxKind::S, false);
            false
        }
        Line::Row { .. } => start.mid() < turn_lo,
    };
    loop {
        let Line::Row { y, .. } = b.cur else { unreachable!() };
        let mx = b.cur.mid();
        if y + rise_long >= goal {
            b.pair(BoxKind::L, mx <= side / 2);
            break;
        }
        if b.boxes.len() as i64 > g.m {
            break;
        }
        if !east && mx < turn_lo {
            east = true;
            b.pair(BoxKind::L, true);
        } else if east && mx > turn_hi {
            east = false;
            b.pair(BoxKind::L, false);
        } else {
            b.pair(BoxKind::S, east);
        }
    }
    let (left, right) = b.double();
    if b.boxes.len() as i64 > g.m {
        return Err(Error::Geom(format!(
            "a hop needs {} boxes but M = {} allows fewer",
            b.boxes.len(),
            g.m
        )));
    }
    for cb in &b.boxes {
        for &[x0, y0, x1, y1] in &cb.regions {
            if x0 < 0 || x1 > side || y0 < 0 || y1 > g.spacing() + side {
                return Err(Error::Geom(format!(
                    "box [{x0},{x1}]x[{y0},{y1}] leaves the column of the hop (side {side}, spacing {})",
                    g.spacing()
                )));
            }
        }
    }
    for t in [left, right] {
        let Line::Col { x, lo, hi } = t else { unreachable!() };
        if x < 0 || x > side || lo < g.spacing() || hi > g.spacing() + side {
            return Err(Error::Geom("final seeds miss the target square".into()));
        }
    }
    Ok(b.boxes)
}

fn to_line(frame: &Frame, canon: Line, r: i64) -> Result<SeedLine> {
    let sites = match canon {
        Line::Row { y, lo, hi } => (lo..=hi).map(|x| frame.site(x, y)).collect::<Result<Vec<_>>>()?,
        Line::Col { x, lo, hi } => (lo..=hi).map(|y| frame.site(x, y)).collect::<Result<Vec<_>>>()?,
    };
    Ok(SeedLine { sites, r })
}

fn seed_line_canon(frame: &Frame, seed: &Seed) -> Result<Line> {
    let sites = seed.sites()?;
    let pts: Vec<(i64, i64)> = sites.iter().map(|s| frame.to_canon(s.re(), s.im())).collect();
    let (x0, y0) = pts[0];
    if pts.iter().all(|p| p.1 == y0) {
        let lo = pts.iter().map(|p| p.0).min().unwrap_or(x0);
        let hi = pts.iter().map(|p| p.0).max().unwrap_or(x0);
        // A radius-0 seed has no direction of its own; read it through its orientation.
        if pts.len() > 1 || frame.orientation(Line::Row { y: y0, lo, hi }) == seed.orientation {
            return Ok(Line::Row { y: y0, lo, hi });
        }
    }
    let lo = pts.iter().map(|p| p.1).min().unwrap_or(y0);
    let hi = pts.iter().map(|p| p.1).max().unwrap_or(y0);
    Ok(Line::Col { x: x0, lo, hi })
}

/// Boxes of one hop from square `from` in direction `step`, starting at `seed`.
pub(crate) fn hop_boxes(
    geom: &Geometry,
    o: Orientation,
    corner: Site,
    from: (i64, i64),
    step: Step,
    seed: &Seed,
    hop: usize,
) -> Result<Vec<PlacedBox>> {
    let frame = Frame::new(corner, from, step, o, geom);
    let start = seed_line_canon(&frame, seed)?;
    let canon = build_hop(geom, start)?;
    let mut out = Vec::with_capacity(canon.len());
    for cb in canon {
        let mut regions = Vec::with_capacity(cb.regions.len());
        let mut hull: Option<Rect> = None;
        for &[x0, y0, x1, y1] in &cb.regions {
            let a = frame.site(x0, y0)?;
            let b = frame.site(x1, y1)?;
            let lo = Site::at(a.re().min(b.re()), a.im().min(b.im()));
            let hi = Site::at(a.re().max(b.re()), a.im().max(b.im()));
            let region = EdgeRegion::new(lo, hi)?;
            hull = Some(match hull {
                Some(h) => h.hull(&region.rect()),
                None => region.rect(),
            });
            regions.push(region);
        }
        let mut targets: Vec<Target> = cb
            .targets
            .iter()
            .map(|&t| {
                Ok(Target {
                    line: to_line(&frame, t, geom.r)?,
                    orientation: frame.orientation(t),
                })
            })
            .collect::<Result<_>>()?;
        if targets.len() == 2 && frame.swap {
            // In the swapped frame the canonical right seed continues north.
            targets.swap(0, 1);
            regions.swap(0, 1);
        }
        out.push(PlacedBox {
            hop,
            kind: cb.kind,
            regions,
            targets,
            rect: hull.expect("at least one region"),
            next: None,
        });
    }
    Ok(out)
}

/// Nominal seed in the middle of a target line.
pub(crate) fn nominal_seed(t: &Target, r: i64, time: f64) -> Seed {
    let center = t.line.sites[t.line.sites.len() / 2];
    Seed {
        center,
        r,
        orientation: t.orientation,
        time,
    }
}

/// The route from the square of `origin` to `R_{n,n}` along the staircase
/// north, east, north, east, ... (2n hops). Between hops the final box hands
/// on the seed for the next direction.
pub fn route_plan(origin: &Seed, o: Orientation, n: u32, geom: &Geometry) -> Result<RoutePlan> {
    geom.validate()?;
    if n == 0 {
        return Err(Error::Geom("a route needs at least one square".into()));
    }
    if origin.r != geom.r {
        return Err(Error::Geom(format!("origin seed radius {} differs from r = {}", origin.r, geom.r)));
    }
    if origin.center.im() < 10 * geom.h {
        return Err(Error::Geom(format!(
            "origin {} lies below the line Im = 10h = {}",
            origin.center,
            10 * geom.h
        )));
    }
    origin.sites().map_err(|e| Error::Geom(e.to_string()))?;
    let corner = cell_corner(origin.center, geom);
    let mut cells = vec![(0i64, 0i64)];
    let mut boxes: Vec<PlacedBox> = Vec::new();
    let mut seed = *origin;
    let mut cell = (0i64, 0i64);
    for hop in 0..2 * n as usize {
        let step = if hop % 2 == 0 { Step::North } else { Step::East };
        let mut hb = hop_boxes(geom, o, corner, cell, step, &seed, hop)?;
        cell = match step {
            Step::North => (cell.0, cell.1 + 1),
            Step::East => (cell.0 + 1, cell.1),
        };
        cells.push(cell);
        let last = hb.last_mut().expect("every hop ends in a final box");
        // North hops hand on their east seed, east hops their north seed.
        let pick = if step == Step::North { 1 } else { 0 };
        if hop + 1 < 2 * n as usize {
            last.next = Some(pick);
        }
        seed = nominal_seed(&last.targets[pick], geom.r, 0.0);
        boxes.extend(hb);
    }
    let plan = RoutePlan {
        origin: *origin,
        orientation: o,
        n,
        geom: *geom,
        corner,
        cells,
        target_cell: cell_rect(corner, i64::from(n), i64::from(n), o, geom),
        boxes,
    };
    check_disjoint(&plan.boxes)?;
    check_chained(&plan)?;
    Ok(plan)
}

/// Every pair of boxes shares no edge.
pub fn check_disjoint(boxes: &[PlacedBox]) -> Result<()> {
    let mut owner: HashMap<crate::lattice::Edge, usize> = HashMap::new();
    for (i, b) in boxes.iter().enumerate() {
        for region in &b.regions {
            for e in region.edges() {
                if let Some(&j) = owner.get(&e) {
                    if j != i {
                        let (x, y) = e.endpoints();
                        return Err(Error::Geom(format!("boxes {j} and {i} share the edge {x}-{y}")));
                    }
                } else {
                    owner.insert(e, i);
                }
            }
        }
    }
    Ok(())
}

/// Each target line sits on the source side of the box that follows it.
fn check_chained(plan: &RoutePlan) -> Result<()> {
    let first = &plan.boxes[0];
    for s in plan.origin.sites()? {
        if !first.rect.contains(s) {
            return Err(Error::Geom(format!("origin site {s} is outside the first box")));
        }
    }
    for w in plan.boxes.windows(2) {
        let t = &w[0].targets[w[0].next.unwrap_or(0)];
        if !t.line.sites.iter().all(|s| w[1].rect.contains(*s)) {
            return Err(Error::Geom("a target line is not covered by the next box".into()));
        }
    }
    Ok(())
}
