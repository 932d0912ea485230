//! Harris graphical representation on a finite space-time window.
//!
//! Death marks (rate 1 per site) and infection arrows (rate `λ_e` per ordered
//! pair) are generated eagerly into sorted arrays. Every question about the
//! contact process on the window (evolution, "joined within", infected time)
//! is then answered by one forward sweep over the merged event list.
//!
//! Conventions:
//! * a site is infected on `[infection, death)`;
//! * equal timestamps are processed as source starts, then deaths, then
//!   arrows, then target checks; within a class, lexicographic `(re, im)`
//!   order of the originating site, then of the receiving site;
//! * marks are drawn by superposition (one clock at the total rate, each ring
//!   assigned to a time line in proportion to its rate), so they come out in
//!   time order and extending the horizon extends a realization consistently.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::Rng;
use rand::RngCore;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::lattice::{Direction, Edge, EdgeRegion, Rect, Site};
use crate::stats::StreamId;

const TAG_MARKS: u64 = 0x3A;

/// Death marks recover a site; arrow marks push infection along one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MarkKind {
    Death = 0,
    Arrow = 1,
}

/// A Poisson point. `from`/`to` are site indices in the owning rep; for deaths they coincide.
#[derive(Debug, Clone, Copy)]
pub struct Mark {
    pub t: f64,
    pub kind: MarkKind,
    pub from: u32,
    pub to: u32,
    pub dir: u8,
}

/// One realization of the percolation superstructure on `region × [0, T]`.
#[derive(Debug, Clone)]
pub struct GraphicalRep {
    region: Rect,
    x0: i64,
    y0: i64,
    width: usize,
    height: usize,
    horizon: f64,
    marks: Vec<Mark>,
    provenance: String,
}

/// Draws the marks of `region × [0, horizon]` under `env`.
pub fn sample_rep(env: &Environment, region: &Rect, horizon: f64, stream: &StreamId) -> Result<GraphicalRep> {
    GraphicalRep::sample(env, region, horizon, stream)
}

/// Walker/Vose alias table drawing an index from a single 64-bit word: the
/// high half picks a column, the low half tosses the column's coin. One word
/// per draw matters here because mark generation is the hot loop of every
/// experiment.
struct Alias {
    threshold: Vec<u64>,
    alias: Vec<u32>,
}

impl Alias {
    fn new(weights: &[f64]) -> Alias {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut threshold = vec![1u64 << 32; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            threshold[s] = (scaled[s] * 4_294_967_296.0) as u64;
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        Alias { threshold, alias }
    }

    fn pick(&self, word: u64) -> usize {
        let col = (((word >> 32) * self.threshold.len() as u64) >> 32) as usize;
        if (word & 0xFFFF_FFFF) < self.threshold[col] {
            col
        } else {
            self.alias[col] as usize
        }
    }
}

/// Sort key: time, then deaths before arrows, then origin, then receiver.
/// Times are nonnegative, so their bit patterns order like the values.
fn mark_key(m: &Mark) -> u128 {
    (u128::from(m.t.to_bits()) << 64) | ((m.kind as u128) << 63) | (u128::from(m.from) << 32) | u128::from(m.to)
}

/// A rep whose horizon can be pushed further out. The marks drawn up to any
/// horizon are exactly those [`GraphicalRep::sample`] gives on that horizon,
/// so a caller can start short and extend only when it needs to.
pub struct GrowingRep {
    rep: GraphicalRep,
    lines: Vec<Mark>,
    alias: Option<Alias>,
    rng: rand_chacha::ChaCha8Rng,
    total: f64,
    /// Time of the next ring, already drawn.
    next: f64,
}

impl GrowingRep {
    pub fn new(env: &Environment, region: &Rect, stream: &StreamId) -> Result<GrowingRep> {
        let mut rep = GraphicalRep::empty(region, 0.0)?;
        rep.provenance = format!("env={} stream={:016x}", env.id(), stream.key());
        // every time line with a positive rate, as a (kind, from, to, dir) template
        let mut lines = Vec::with_capacity(rep.len() * 5);
        let mut weights = Vec::with_capacity(rep.len() * 5);
        for idx in 0..rep.len() {
            lines.push(Mark { t: 0.0, kind: MarkKind::Death, from: idx as u32, to: idx as u32, dir: 0 });
            weights.push(1.0);
            let x = rep.site(idx);
            for d in Direction::ALL {
                let Some(j) = rep.neighbor(idx, d) else { continue };
                let rate = env.rate(&Edge::new(x, rep.site(j))?)?;
                if rate > 0.0 {
                    lines.push(Mark { t: 0.0, kind: MarkKind::Arrow, from: idx as u32, to: j as u32, dir: d as u8 });
                    weights.push(rate);
                }
            }
        }
        // superposition: one clock at the total rate, each ring assigned to a
        // line with probability proportional to its rate
        let total: f64 = weights.iter().sum();
        let alias = (total > 0.0 && !lines.is_empty()).then(|| Alias::new(&weights));
        let mut rng = stream.derive(TAG_MARKS).rng();
        let next = if alias.is_some() {
            rng.sample::<f64, _>(Exp1) / total
        } else {
            f64::INFINITY
        };
        Ok(GrowingRep { rep, lines, alias, rng, total, next })
    }

    /// Extends the horizon to `horizon` (never shrinks it).
    pub fn grow(&mut self, horizon: f64) -> Result<&GraphicalRep> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon {horizon} must be positive")));
        }
        if horizon <= self.rep.horizon {
            return Ok(&self.rep);
        }
        if let Some(alias) = &self.alias {
            let expected = (self.total * (horizon - self.rep.horizon) * 1.05) as usize + 16;
            self.rep.marks.reserve(expected);
            while self.next <= horizon {
                let mut m = self.lines[alias.pick(self.rng.next_u64())];
                m.t = self.next;
                self.rep.marks.push(m);
                let gap: f64 = self.rng.sample(Exp1);
                self.next += gap / self.total;
            }
        }
        self.rep.horizon = horizon;
        Ok(&self.rep)
    }

    pub fn rep(&self) -> &GraphicalRep {
        &self.rep
    }

    pub fn into_rep(self) -> GraphicalRep {
        self.rep
    }
}

impl GraphicalRep {
    pub fn sample(env: &Environment, region: &Rect, horizon: f64, stream: &StreamId) -> Result<GraphicalRep> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon {horizon} must be positive")));
        }
        let mut g = GrowingRep::new(env, region, stream)?;
        g.grow(horizon)?;
        Ok(g.into_rep())
    }

    fn empty(region: &Rect, horizon: f64) -> Result<GraphicalRep> {
        let (x0, y0, x1, y1) = region.bounds()?;
        let width = (x1 - x0 + 1) as usize;
        let height = (y1 - y0 + 1) as usize;
        Ok(GraphicalRep {
            region: *region,
            x0,
            y0,
            width,
            height,
            horizon,
            marks: Vec::new(),
            provenance: String::new(),
        })
    }

    /// Builds a rep from explicit marks (fixtures, tests).
    pub fn from_marks(region: &Rect, horizon: f64, deaths: &[(Site, f64)], arrows: &[(Site, Site, f64)]) -> Result<GraphicalRep> {
        let mut rep = GraphicalRep::empty(region, horizon)?;
        let check_t = |t: f64| {
            if (0.0..=horizon).contains(&t) {
                Ok(())
            } else {
                Err(Error::Window(format!("mark time {t} outside [0, {horizon}]")))
            }
        };
        let mut marks = Vec::with_capacity(deaths.len() + arrows.len());
        for &(x, t) in deaths {
            check_t(t)?;
            let i = rep.index_or_err(x)? as u32;
            marks.push(Mark { t, kind: MarkKind::Death, from: i, to: i, dir: 0 });
        }
        for &(x, y, t) in arrows {
            check_t(t)?;
            let i = rep.index_or_err(x)? as u32;
            let j = rep.index_or_err(y)? as u32;
            let d = Direction::from_delta(y.re() - x.re(), y.im() - x.im())
                .ok_or_else(|| Error::Precondition(format!("{x} -> {y} is not a unit step")))?;
            marks.push(Mark { t, kind: MarkKind::Arrow, from: i, to: j, dir: d as u8 });
        }
        marks.sort_unstable_by_key(mark_key);
        rep.marks = marks;
        rep.provenance = "explicit".into();
        Ok(rep)
    }

    pub fn region(&self) -> Rect {
        self.region
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Number of sites in the window.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index in lexicographic `(re, im)` order.
    pub fn index(&self, s: Site) -> Option<usize> {
        let dx = s.re() - self.x0;
        let dy = s.im() - self.y0;
        if dx < 0 || dy < 0 || dx as usize >= self.width || dy as usize >= self.height {
            return None;
        }
        Some(dx as usize * self.height + dy as usize)
    }

    fn index_or_err(&self, s: Site) -> Result<usize> {
        self.index(s)
            .ok_or_else(|| Error::Window(format!("site {s} is outside the window {}", self.region)))
    }

    pub fn site(&self, idx: usize) -> Site {
        Site::at(self.x0 + (idx / self.height) as i64, self.y0 + (idx % self.height) as i64)
    }

    pub(crate) fn neighbor(&self, idx: usize, d: Direction) -> Option<usize> {
        let (col, row) = (idx / self.height, idx % self.height);
        match d {
            Direction::East if col + 1 < self.width => Some(idx + self.height),
            Direction::West if col > 0 => Some(idx - self.height),
            Direction::North if row + 1 < self.height => Some(idx + 1),
            Direction::South if row > 0 => Some(idx - 1),
            _ => None,
        }
    }

    /// Death times on the time line of `s`.
    pub fn deaths_at(&self, s: Site) -> Vec<f64> {
        let Some(i) = self.index(s) else { return Vec::new() };
        self.marks
            .iter()
            .filter(|m| m.kind == MarkKind::Death && m.from as usize == i)
            .map(|m| m.t)
            .collect()
    }

    /// Arrow times from `s` in direction `d`.
    pub fn arrows_from(&self, s: Site, d: Direction) -> Vec<f64> {
        let Some(i) = self.index(s) else { return Vec::new() };
        self.marks
            .iter()
            .filter(|m| m.kind == MarkKind::Arrow && m.from as usize == i && m.dir == d as u8)
            .map(|m| m.t)
            .collect()
    }

    pub fn mark_count(&self) -> usize {
        self.marks.len()
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    /// Serializes the marks in the fixture format read by [`GraphicalRep::from_fixture`].
    pub fn to_fixture(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "window {}", self.region);
        let _ = writeln!(out, "horizon {:?}", self.horizon);
        for m in &self.marks {
            let x = self.site(m.from as usize);
            match m.kind {
                MarkKind::Death => {
                    let _ = writeln!(out, "D {} {} {:?}", x.re(), x.im(), m.t);
                }
                MarkKind::Arrow => {
                    let y = self.site(m.to as usize);
                    let _ = writeln!(out, "A {} {} {} {} {:?}", x.re(), x.im(), y.re(), y.im(), m.t);
                }
            }
        }
        out
    }

    /// Parses `D a b t` / `A a b a' b' t` lines, with optional `window` and
    /// `horizon` headers. Marks of one time line must be strictly increasing.
    pub fn from_fixture(doc: &str) -> Result<GraphicalRep> {
        let err = |line: usize, msg: String| Error::Format { line, msg };
        let mut window: Option<Rect> = None;
        let mut horizon: Option<f64> = None;
        let mut deaths = Vec::new();
        let mut arrows = Vec::new();
        let mut last: std::collections::HashMap<(i64, i64, i64, i64), f64> = Default::default();
        for (i, raw) in doc.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(ln, format!("bad number `{s}`")));
            let int = |s: &str| s.parse::<i64>().map_err(|_| err(ln, format!("bad integer `{s}`")));
            match f[0] {
                "window" if f.len() == 2 => window = Some(f[1].parse().map_err(|e: Error| err(ln, e.to_string()))?),
                "horizon" if f.len() == 2 => horizon = Some(num(f[1])?),
                "D" if f.len() == 4 => {
                    let (a, b, t) = (int(f[1])?, int(f[2])?, num(f[3])?);
                    let key = (a, b, a, b);
                    if last.get(&key).is_some_and(|&p| p >= t) {
                        return Err(err(ln, format!("death marks at {a}{b:+}i are not increasing")));
                    }
                    last.insert(key, t);
                    deaths.push((Site::new(a, b).map_err(|e| err(ln, e.to_string()))?, t));
                }
                "A" if f.len() == 6 => {
                    let (a, b, c, d, t) = (int(f[1])?, int(f[2])?, int(f[3])?, int(f[4])?, num(f[5])?);
                    let key = (a, b, c, d);
                    if last.get(&key).is_some_and(|&p| p >= t) {
                        return Err(err(ln, "arrow marks on one ordered pair are not increasing".into()));
                    }
                    last.insert(key, t);
                    let x = Site::new(a, b).map_err(|e| err(ln, e.to_string()))?;
                    let y = Site::new(c, d).map_err(|e| err(ln, e.to_string()))?;
                    arrows.push((x, y, t));
                }
                _ => return Err(err(ln, format!("unrecognized line `{line}`"))),
            }
        }
        let window = match window {
            Some(w) => w,
            None => {
                let sites: Vec<Site> = deaths
                    .iter()
                    .map(|d| d.0)
                    .chain(arrows.iter().flat_map(|a| [a.0, a.1]))
                    .collect();
                Rect::bounding(&sites).ok_or_else(|| err(0, "fixture has no marks and no window".into()))?
            }
        };
        let horizon = horizon.unwrap_or_else(|| {
            deaths
                .iter()
                .map(|d| d.1)
                .chain(arrows.iter().map(|a| a.2))
                .fold(1.0, f64::max)
        });
        GraphicalRep::from_marks(&window, horizon, &deaths, &arrows)
    }
}

/// Where a path may go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Constraint {
    Unconstrained,
    /// Union of site sets (single sites are degenerate rectangles). Paths use
    /// only time lines of member sites and arrows between member sites.
    Within(Vec<Rect>),
    /// Union of edge regions. Paths use only arrows whose undirected edge is a
    /// member; time lines of sites in the regions' rectangles.
    Edges(Vec<EdgeRegion>),
}

impl Constraint {
    pub fn rect(r: Rect) -> Constraint {
        Constraint::Within(vec![r])
    }

    pub fn sites(sites: &[Site]) -> Constraint {
        Constraint::Within(sites.iter().map(|&s| Rect::finite(s.re(), s.im(), s.re(), s.im())).collect())
    }

    pub fn edges(r: EdgeRegion) -> Constraint {
        Constraint::Edges(vec![r])
    }

    pub fn allows_site(&self, s: Site) -> bool {
        match self {
            Constraint::Unconstrained => true,
            Constraint::Within(rs) => rs.iter().any(|r| r.contains(s)),
            Constraint::Edges(es) => es.iter().any(|e| e.rect().contains(s)),
        }
    }

    pub fn allows_edge(&self, e: &Edge) -> bool {
        match self {
            Constraint::Unconstrained => true,
            Constraint::Within(_) => {
                let (x, y) = e.endpoints();
                self.allows_site(x) && self.allows_site(y)
            }
            Constraint::Edges(es) => es.iter().any(|r| r.contains(e)),
        }
    }

    pub(crate) fn mask(&self, rep: &GraphicalRep) -> Mask {
        let n = rep.len();
        let mut site_ok = vec![false; n];
        let mut dir_ok = vec![0u8; n];
        for (idx, ok) in site_ok.iter_mut().enumerate() {
            *ok = self.allows_site(rep.site(idx));
        }
        for idx in 0..n {
            let x = rep.site(idx);
            for d in Direction::ALL {
                let Some(j) = rep.neighbor(idx, d) else { continue };
                let allowed = match self {
                    Constraint::Unconstrained => true,
                    Constraint::Within(_) => site_ok[idx] && site_ok[j],
                    Constraint::Edges(_) => self.allows_edge(&Edge::new(x, rep.site(j)).expect("neighbours")),
                };
                if allowed {
                    dir_ok[idx] |= 1 << d as u8;
                }
            }
        }
        Mask { site_ok, dir_ok }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Mask {
    pub site_ok: Vec<bool>,
    pub dir_ok: Vec<u8>,
}

/// Space-time atoms: a site together with a closed time interval (a single
/// instant when `t0 == t1`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpaceTimeSet {
    pub atoms: Vec<(Site, f64, f64)>,
}

impl SpaceTimeSet {
    pub fn new() -> SpaceTimeSet {
        SpaceTimeSet::default()
    }

    pub fn point(s: Site, t: f64) -> SpaceTimeSet {
        SpaceTimeSet { atoms: vec![(s, t, t)] }
    }

    pub fn interval(s: Site, t0: f64, t1: f64) -> SpaceTimeSet {
        SpaceTimeSet { atoms: vec![(s, t0.min(t1), t0.max(t1))] }
    }

    /// `sites × {t}`.
    pub fn at_time(sites: &[Site], t: f64) -> SpaceTimeSet {
        SpaceTimeSet { atoms: sites.iter().map(|&s| (s, t, t)).collect() }
    }

    /// `sites × [t0, t1]`.
    pub fn during(sites: &[Site], t0: f64, t1: f64) -> SpaceTimeSet {
        SpaceTimeSet { atoms: sites.iter().map(|&s| (s, t0, t1)).collect() }
    }

    pub fn push(&mut self, s: Site, t0: f64, t1: f64) {
        self.atoms.push((s, t0.min(t1), t0.max(t1)));
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dynamics {
    Contact,
    /// Deaths suppressed.
    Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Change {
    Infect,
    Recover,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum TickKind {
    Infect(usize),
    Recover(usize),
    Check(usize),
}

pub(crate) struct Tick<'a> {
    pub t: f64,
    pub kind: TickKind,
    pub infected: &'a [bool],
}

/// A forced-infection interval on a site index.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Start {
    pub idx: usize,
    pub t0: f64,
    pub t1: f64,
}

impl GraphicalRep {
    /// Core forward sweep. `starts` hold each site infected on `[t0, t1]`
    /// regardless of deaths; `checks` are instants at which the callback sees
    /// the state after all marks at that instant. The callback may stop early.
    pub(crate) fn sweep<F>(&self, mask: &Mask, starts: &[Start], checks: &[f64], until: f64, dynamics: Dynamics, mut f: F)
    where
        F: FnMut(Tick<'_>) -> ControlFlow<()>,
    {
        let n = self.len();
        let mut infected = vec![false; n];
        let mut forced = vec![f64::NEG_INFINITY; n];
        let mut starts: Vec<Start> = starts.to_vec();
        starts.sort_by(|a, b| a.t0.total_cmp(&b.t0).then(a.idx.cmp(&b.idx)));
        let mut check_order: Vec<usize> = (0..checks.len()).collect();
        check_order.sort_by(|&a, &b| checks[a].total_cmp(&checks[b]).then(a.cmp(&b)));
        let (mut si, mut mi, mut ci) = (0usize, 0usize, 0usize);
        let marks = &self.marks;
        let inf = f64::INFINITY;
        loop {
            let ts = starts.get(si).map_or(inf, |s| s.t0);
            let tm = marks.get(mi).map_or(inf, |m| m.t);
            let tc = check_order.get(ci).map_or(inf, |&c| checks[c]);
            let t = ts.min(tm).min(tc);
            if t > until || t == inf {
                return;
            }
            if ts == t {
                let s = starts[si];
                si += 1;
                forced[s.idx] = forced[s.idx].max(s.t1);
                if !infected[s.idx] {
                    infected[s.idx] = true;
                    if f(Tick { t, kind: TickKind::Infect(s.idx), infected: &infected }).is_break() {
                        return;
                    }
                }
                continue;
            }
            if tm == t {
                let m = marks[mi];
                mi += 1;
                match m.kind {
                    MarkKind::Death => {
                        let x = m.from as usize;
                        if dynamics == Dynamics::Contact && infected[x] && t > forced[x] {
                            infected[x] = false;
                            if f(Tick { t, kind: TickKind::Recover(x), infected: &infected }).is_break() {
                                return;
                            }
                        }
                    }
                    MarkKind::Arrow => {
                        let (x, y) = (m.from as usize, m.to as usize);
                        if infected[x] && !infected[y] && mask.dir_ok[x] & (1 << m.dir) != 0 {
                            infected[y] = true;
                            if f(Tick { t, kind: TickKind::Infect(y), infected: &infected }).is_break() {
                                return;
                            }
                        }
                    }
                }
                continue;
            }
            let c = check_order[ci];
            ci += 1;
            if f(Tick { t, kind: TickKind::Check(c), infected: &infected }).is_break() {
                return;
            }
        }
    }

    pub(crate) fn starts_for(&self, mask: &Mask, initial: &[Site], t0: f64, strict: bool) -> Result<Vec<Start>> {
        let mut out = Vec::with_capacity(initial.len());
        for &s in initial {
            let idx = self.index_or_err(s)?;
            if strict && !mask.site_ok[idx] {
                return Err(Error::Constraint(format!("initial site {s} is outside the constraint")));
            }
            out.push(Start { idx, t0, t1: t0 });
        }
        Ok(out)
    }

    fn check_until(&self, until: f64) -> Result<()> {
        if until > self.horizon || until.is_nan() {
            return Err(Error::Window(format!("time {until} is beyond the horizon {}", self.horizon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: f64,
    pub site: Site,
    pub change: Change,
}

/// Event log of one run, replayable at any time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Vec<Site>,
    pub start: f64,
    pub until: f64,
    pub log: Vec<LogEntry>,
}

impl Trajectory {
    /// `ξ_t`, sorted.
    pub fn infected_at(&self, t: f64) -> Vec<Site> {
        let mut set: std::collections::BTreeSet<Site> = Default::default();
        if t < self.start {
            return Vec::new();
        }
        set.extend(self.initial.iter().copied());
        for e in self.log.iter().take_while(|e| e.t <= t) {
            match e.change {
                Change::Infect => {
                    set.insert(e.site);
                }
                Change::Recover => {
                    set.remove(&e.site);
                }
            }
        }
        set.into_iter().collect()
    }

    pub fn final_set(&self) -> Vec<Site> {
        self.infected_at(self.until)
    }

    /// Distinct event times in order.
    pub fn event_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.log.iter().map(|e| e.t).collect();
        v.dedup();
        v
    }

    /// Whether the process is still alive at `until`.
    pub fn survives(&self) -> bool {
        !self.final_set().is_empty()
    }
}

pub fn evolve(rep: &GraphicalRep, initial: &[Site], constraint: &Constraint, until: f64) -> Result<Trajectory> {
    evolve_with(rep, initial, 0.0, constraint, until, Dynamics::Contact)
}

/// Evolution from `initial` at time `start` up to `until`.
pub fn evolve_with(
    rep: &GraphicalRep,
    initial: &[Site],
    start: f64,
    constraint: &Constraint,
    until: f64,
    dynamics: Dynamics,
) -> Result<Trajectory> {
    rep.check_until(until)?;
    let mask = constraint.mask(rep);
    let starts = rep.starts_for(&mask, initial, start, true)?;
    let mut init: Vec<Site> = initial.to_vec();
    init.sort();
    init.dedup();
    let mut log = Vec::new();
    rep.sweep(&mask, &starts, &[], until, dynamics, |tick| {
        // the initial infections themselves are not logged
        match tick.kind {
            TickKind::Infect(i) if tick.t > start || !init.contains(&rep.site(i)) => log.push(LogEntry {
                t: tick.t,
                site: rep.site(i),
                change: Change::Infect,
            }),
            TickKind::Recover(i) => log.push(LogEntry {
                t: tick.t,
                site: rep.site(i),
                change: Change::Recover,
            }),
            _ => {}
        }
        ControlFlow::Continue(())
    });
    Ok(Trajectory {
        initial: init,
        start,
        until,
        log,
    })
}

/// `ξ_t` (sorted) at each of `times`, for the process started from `initial`
/// at time `start`. The sweep stops as soon as the process dies out.
pub fn states_at(
    rep: &GraphicalRep,
    initial: &[Site],
    start: f64,
    constraint: &Constraint,
    times: &[f64],
    dynamics: Dynamics,
) -> Result<Vec<Vec<Site>>> {
    let until = times.iter().copied().fold(start, f64::max);
    rep.check_until(until)?;
    let mut out = vec![Vec::new(); times.len()];
    if initial.is_empty() {
        return Ok(out);
    }
    let mask = constraint.mask(rep);
    let starts = rep.starts_for(&mask, initial, start, true)?;
    let checks: Vec<f64> = times.iter().map(|&t| if t < start { f64::NEG_INFINITY } else { t }).collect();
    let mut alive = 0usize;
    rep.sweep(&mask, &starts, &checks, until, dynamics, |tick| {
        match tick.kind {
            TickKind::Infect(_) => alive += 1,
            TickKind::Recover(_) => {
                alive -= 1;
                if alive == 0 && tick.t >= start {
                    return ControlFlow::Break(());
                }
            }
            TickKind::Check(c) => {
                if checks[c] >= start {
                    out[c] = tick.infected.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| rep.site(i)).collect();
                }
            }
        }
        ControlFlow::Continue(())
    });
    Ok(out)
}

/// Time at which the process from `initial` (at time 0) dies out, or `None`
/// if it is still alive at the horizon.
pub fn extinction_time(rep: &GraphicalRep, initial: &[Site], constraint: &Constraint) -> Result<Option<f64>> {
    if initial.is_empty() {
        return Ok(Some(0.0));
    }
    let mask = constraint.mask(rep);
    let starts = rep.starts_for(&mask, initial, 0.0, true)?;
    let mut alive = 0usize;
    let mut died = None;
    rep.sweep(&mask, &starts, &[], rep.horizon, Dynamics::Contact, |tick| {
        match tick.kind {
            TickKind::Infect(_) => alive += 1,
            TickKind::Recover(_) => {
                alive -= 1;
                if alive == 0 {
                    died = Some(tick.t);
                    return ControlFlow::Break(());
                }
            }
            TickKind::Check(_) => {}
        }
        ControlFlow::Continue(())
    });
    Ok(died)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinResult {
    pub joined: bool,
    pub first_hit: Option<f64>,
}

/// Whether some point of `source` is joined to some point of `target` by a
/// path that respects `constraint`; `first_hit` is the earliest target time.
pub fn is_joined(rep: &GraphicalRep, source: &SpaceTimeSet, target: &SpaceTimeSet, constraint: &Constraint) -> Result<JoinResult> {
    let hit = first_hit(rep, source, target, constraint)?;
    Ok(JoinResult {
        joined: hit.is_some(),
        first_hit: hit.map(|h| h.0),
    })
}

/// Earliest target point reached, with the site hit (lowest index on ties).
pub fn first_hit(rep: &GraphicalRep, source: &SpaceTimeSet, target: &SpaceTimeSet, constraint: &Constraint) -> Result<Option<(f64, Site)>> {
    let mask = constraint.mask(rep);
    let mut starts = Vec::with_capacity(source.atoms.len());
    for &(s, t0, t1) in &source.atoms {
        starts.push(Start { idx: rep.index_or_err(s)?, t0, t1 });
    }
    let mut per_site: Vec<Vec<(f64, f64)>> = vec![Vec::new(); rep.len()];
    let mut checks = Vec::with_capacity(target.atoms.len());
    let mut check_site = Vec::with_capacity(target.atoms.len());
    for &(s, a, b) in &target.atoms {
        let idx = rep.index_or_err(s)?;
        per_site[idx].push((a, b));
        checks.push(a);
        check_site.push(idx);
    }
    let until = target.atoms.iter().map(|a| a.2).fold(f64::NEG_INFINITY, f64::max).min(rep.horizon);
    let mut hit = None;
    rep.sweep(&mask, &starts, &checks, until, Dynamics::Contact, |tick| {
        let found = match tick.kind {
            TickKind::Infect(i) if per_site[i].iter().any(|&(a, b)| a <= tick.t && tick.t <= b) => Some(i),
            TickKind::Check(c) if tick.infected[check_site[c]] => Some(check_site[c]),
            _ => None,
        };
        match found {
            Some(i) => {
                hit = Some((tick.t, rep.site(i)));
                ControlFlow::Break(())
            }
            None => ControlFlow::Continue(()),
        }
    });
    Ok(hit)
}

/// Disjoint closed intervals in increasing order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalUnion {
    pub intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= t && t <= b)
    }
}

/// `{t ≤ until : some target is infected at t}` for the run from `initial`.
pub fn infected_time(rep: &GraphicalRep, initial: &[Site], constraint: &Constraint, targets: &[Site]) -> Result<IntervalUnion> {
    infected_time_until(rep, initial, constraint, targets, rep.horizon)
}

pub fn infected_time_until(
    rep: &GraphicalRep,
    initial: &[Site],
    constraint: &Constraint,
    targets: &[Site],
    until: f64,
) -> Result<IntervalUnion> {
    rep.check_until(until)?;
    let mask = constraint.mask(rep);
    let starts = rep.starts_for(&mask, initial, 0.0, true)?;
    let mut is_target = vec![false; rep.len()];
    for &s in targets {
        if let Some(i) = rep.index(s) {
            is_target[i] = true;
        }
    }
    let mut count = 0usize;
    let mut open: Option<f64> = None;
    let mut out = IntervalUnion::default();
    rep.sweep(&mask, &starts, &[], until, Dynamics::Contact, |tick| {
        match tick.kind {
            TickKind::Infect(i) if is_target[i] => {
                count += 1;
                if count == 1 {
                    open = Some(tick.t);
                }
            }
            TickKind::Recover(i) if is_target[i] => {
                count -= 1;
                if count == 0 {
                    out.intervals.push((open.take().expect("open interval"), tick.t));
                }
            }
            _ => {}
        }
        ControlFlow::Continue(())
    });
    if let Some(a) = open {
        out.intervals.push((a, until));
    }
    Ok(out)
}
