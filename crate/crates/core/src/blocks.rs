//! Box statistics: the boundary sets `Φ^D(h, w)`, their infected-time
//! measures `Θ^D(h, w)`, block-condition estimators, seed-to-seed crossings and
//! the named corridor events.
//!
//! The box is `⌈−w, w+hi⌋ = [−w, w] × [0, h]` and the source is the horizontal
//! seed `⌈−r, r⌋ × 0`. Its four sides are
//! `R = {w}×[0,h]`, `L = {−w}×[0,h]`, `UR = [0,w]×{h}`, `UL = [−w,0]×{h}`.

use std::fmt;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::environment::EnvMode;
use crate::error::{Error, Result};
use crate::graphical::{
    evolve_with, first_hit, Constraint, Dynamics, GraphicalRep, IntervalUnion, SpaceTimeSet, Start, TickKind,
};
use crate::lattice::{ball, Rect, Seed, Site};
use crate::stats::{run_trials, wilson, EstimateWithCI, StreamId, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
    UL,
    UR,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::L, Side::R, Side::UL, Side::UR];

    pub fn name(self) -> &'static str {
        match self {
            Side::L => "L",
            Side::R => "R",
            Side::UL => "UL",
            Side::UR => "UR",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Side> {
        match s {
            "L" => Ok(Side::L),
            "R" => Ok(Side::R),
            "UL" => Ok(Side::UL),
            "UR" => Ok(Side::UR),
            _ => Err(Error::Precondition(format!("unknown side `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub h: i64,
    pub w: i64,
    pub r: i64,
    pub horizon: f64,
}

impl BoxSpec {
    pub fn new(h: i64, w: i64, r: i64, horizon: f64) -> Result<BoxSpec> {
        if h < 1 || w < 1 || r < 0 {
            return Err(Error::Precondition(format!("box needs h, w >= 1 and r >= 0 (h={h}, w={w}, r={r})")));
        }
        if r > w {
            return Err(Error::Precondition(format!("seed radius {r} exceeds half-width {w}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon {horizon} must be positive")));
        }
        Ok(BoxSpec { h, w, r, horizon })
    }

    /// `10 (h + w) / min(1, mean rate)`; a zero mean falls back to `10 (h + w)`.
    pub fn default_horizon(h: i64, w: i64, mean_rate: f64) -> f64 {
        let base = 10.0 * (h + w) as f64;
        if mean_rate > 0.0 {
            base / mean_rate.min(1.0)
        } else {
            base
        }
    }

    pub fn rect(&self) -> Rect {
        self.rect_at(0, 0)
    }

    pub fn rect_at(&self, dx: i64, dy: i64) -> Rect {
        Rect::finite(dx - self.w, dy, dx + self.w, dy + self.h)
    }

    pub fn side_sites_at(&self, side: Side, dx: i64, dy: i64) -> Vec<Site> {
        let (h, w) = (self.h, self.w);
        let r = match side {
            Side::R => Rect::finite(w, 0, w, h),
            Side::L => Rect::finite(-w, 0, -w, h),
            Side::UR => Rect::finite(0, h, w, h),
            Side::UL => Rect::finite(-w, h, 0, h),
        };
        r.sites()
            .expect("finite side")
            .into_iter()
            .map(|s| Site::at(s.re() + dx, s.im() + dy))
            .collect()
    }

    pub fn side_sites(&self, side: Side) -> Vec<Site> {
        self.side_sites_at(side, 0, 0)
    }

    pub fn seed_at(&self, dx: i64, dy: i64) -> Vec<Site> {
        (-self.r..=self.r).map(|k| Site::at(dx + k, dy)).collect()
    }

    /// Number of sites on one side.
    pub fn side_len(&self, side: Side) -> usize {
        match side {
            Side::L | Side::R => (self.h + 1) as usize,
            Side::UL | Side::UR => (self.w + 1) as usize,
        }
    }
}

/// The four boundary sets and their union, each sorted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhiResult {
    pub l: Vec<Site>,
    pub r: Vec<Site>,
    pub ul: Vec<Site>,
    pub ur: Vec<Site>,
    pub union: Vec<Site>,
}

impl PhiResult {
    pub fn get(&self, side: Side) -> &[Site] {
        match side {
            Side::L => &self.l,
            Side::R => &self.r,
            Side::UL => &self.ul,
            Side::UR => &self.ur,
        }
    }

    fn get_mut(&mut self, side: Side) -> &mut Vec<Site> {
        match side {
            Side::L => &mut self.l,
            Side::R => &mut self.r,
            Side::UL => &mut self.ul,
            Side::UR => &mut self.ur,
        }
    }

    pub fn counts(&self) -> [usize; 4] {
        [self.l.len(), self.r.len(), self.ul.len(), self.ur.len()]
    }

    pub fn side_total(&self) -> usize {
        self.counts().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThetaResult {
    pub l: IntervalUnion,
    pub r: IntervalUnion,
    pub ul: IntervalUnion,
    pub ur: IntervalUnion,
}

impl ThetaResult {
    pub fn get(&self, side: Side) -> &IntervalUnion {
        match side {
            Side::L => &self.l,
            Side::R => &self.r,
            Side::UL => &self.ul,
            Side::UR => &self.ur,
        }
    }

    fn get_mut(&mut self, side: Side) -> &mut IntervalUnion {
        match side {
            Side::L => &mut self.l,
            Side::R => &mut self.r,
            Side::UL => &mut self.ul,
            Side::UR => &mut self.ur,
        }
    }
}

pub fn phi(rep: &GraphicalRep, spec: &BoxSpec) -> Result<PhiResult> {
    Ok(phi_theta_at(rep, spec, 0, 0)?.0)
}

pub fn theta(rep: &GraphicalRep, spec: &BoxSpec) -> Result<ThetaResult> {
    Ok(phi_theta_at(rep, spec, 0, 0)?.1)
}

/// `Φ` and `Θ` of the box translated by `(dx, dy)`, from a single sweep.
pub fn phi_theta_at(rep: &GraphicalRep, spec: &BoxSpec, dx: i64, dy: i64) -> Result<(PhiResult, ThetaResult)> {
    let rect = spec.rect_at(dx, dy);
    if !rep.region().contains_rect(&rect) {
        return Err(Error::Window(format!("box {rect} is not inside the rep window {}", rep.region())));
    }
    if spec.horizon > rep.horizon() {
        return Err(Error::Window(format!(
            "box horizon {} exceeds the rep horizon {}",
            spec.horizon,
            rep.horizon()
        )));
    }
    let constraint = Constraint::rect(rect);
    let mask = constraint.mask(rep);
    let starts = rep.starts_for(&mask, &spec.seed_at(dx, dy), 0.0, true)?;
    // bit k of membership[idx] marks side Side::ALL[k]
    let mut membership = vec![0u8; rep.len()];
    for (k, side) in Side::ALL.iter().enumerate() {
        for s in spec.side_sites_at(*side, dx, dy) {
            membership[rep.index(s).expect("inside box")] |= 1 << k;
        }
    }
    let mut seen = vec![false; rep.len()];
    let mut live = [0usize; 4];
    let mut open = [0f64; 4];
    let mut out_theta = ThetaResult::default();
    rep.sweep(&mask, &starts, &[], spec.horizon, Dynamics::Contact, |tick| {
        let (idx, up) = match tick.kind {
            TickKind::Infect(i) => (i, true),
            TickKind::Recover(i) => (i, false),
            TickKind::Check(_) => return ControlFlow::Continue(()),
        };
        let bits = membership[idx];
        if bits == 0 {
            return ControlFlow::Continue(());
        }
        if up {
            seen[idx] = true;
        }
        for (k, side) in Side::ALL.iter().enumerate() {
            if bits & (1 << k) == 0 {
                continue;
            }
            if up {
                live[k] += 1;
                if live[k] == 1 {
                    open[k] = tick.t;
                }
            } else {
                live[k] -= 1;
                if live[k] == 0 {
                    out_theta.get_mut(*side).intervals.push((open[k], tick.t));
                }
            }
        }
        ControlFlow::Continue(())
    });
    for (k, side) in Side::ALL.iter().enumerate() {
        if live[k] > 0 {
            out_theta.get_mut(*side).intervals.push((open[k], spec.horizon));
        }
    }
    let mut out_phi = PhiResult::default();
    for (idx, &was) in seen.iter().enumerate() {
        if !was {
            continue;
        }
        let s = rep.site(idx);
        out_phi.union.push(s);
        for (k, side) in Side::ALL.iter().enumerate() {
            if membership[idx] & (1 << k) != 0 {
                out_phi.get_mut(*side).push(s);
            }
        }
    }
    Ok((out_phi, out_theta))
}

/// One row of a block-condition report: `P(|Φ^D| > N)` (or the union when
/// `side` is `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub event: String,
    pub side: Option<Side>,
    pub threshold: i64,
    pub h: i64,
    pub w: i64,
    pub r: i64,
    pub horizon: f64,
    pub mode: String,
    pub trials: u64,
    pub estimate: EstimateWithCI,
}

impl BlockEstimate {
    pub const CSV_HEADER: &'static str = "event,h,w,r,N,T,mode,trials,estimate,ci_lo,ci_hi";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            self.event,
            self.h,
            self.w,
            self.r,
            self.threshold,
            self.horizon,
            self.mode,
            self.trials,
            self.estimate.point,
            self.estimate.lo,
            self.estimate.hi
        )
    }
}

/// Per-trial side counts `[|Φ^L|, |Φ^R|, |Φ^UL|, |Φ^UR|, |Φ|]`.
pub fn block_counts(mode: &EnvMode, spec: &BoxSpec, trials: u64, stream: &StreamId, parallelism: usize) -> Result<Vec<[usize; 5]>> {
    let rows = run_trials(trials, stream, parallelism, |_, s| -> Result<[usize; 5]> {
        let env = mode.env_for(&s);
        let rep = GraphicalRep::sample(&env, &spec.rect(), spec.horizon, &s.derive(1))?;
        let p = phi(&rep, spec)?;
        let c = p.counts();
        Ok([c[0], c[1], c[2], c[3], p.union.len()])
    });
    rows.into_iter().collect()
}

/// `P(|Φ^D(h, w)| > N)` for every side, the union, and every threshold. All
/// thresholds are read off the same realizations, so estimates are exactly
/// nonincreasing in `N`.
pub fn estimate_block(
    mode: &EnvMode,
    spec: &BoxSpec,
    thresholds: &[i64],
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<Vec<BlockEstimate>> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let counts = block_counts(mode, spec, trials, stream, parallelism)?;
    let mut out = Vec::new();
    let labels: [(Option<Side>, &str); 5] = [
        (Some(Side::L), "phi_L"),
        (Some(Side::R), "phi_R"),
        (Some(Side::UL), "phi_UL"),
        (Some(Side::UR), "phi_UR"),
        (None, "phi"),
    ];
    for (k, (side, name)) in labels.iter().enumerate() {
        for &n in thresholds {
            let hits = counts.iter().filter(|c| c[k] as i64 > n).count() as u64;
            out.push(BlockEstimate {
                event: name.to_string(),
                side: *side,
                threshold: n,
                h: spec.h,
                w: spec.w,
                r: spec.r,
                horizon: spec.horizon,
                mode: mode.label().to_string(),
                trials,
                estimate: wilson(hits, trials, Z95),
            });
        }
    }
    Ok(out)
}

/// Which branch of the block-condition dichotomy the estimates support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dichotomy {
    pub h: i64,
    pub threshold: i64,
    pub epsilon: f64,
    /// `P(|Φ^R(h, 4h)| > N)`, `P(|Φ^R(h, 8h)| > N)`.
    pub first: [EstimateWithCI; 2],
    /// `P(|Φ^UR(h, 8h)| > N)`, `P(|Φ^R(2h, 8h)| > N)`.
    pub second: [EstimateWithCI; 2],
    pub first_supported: bool,
    pub second_supported: bool,
}

/// Estimates both assertions of the dichotomy at `(h, N, ε)`; "supported"
/// means every lower confidence bound exceeds `1 − ε`.
#[allow(clippy::too_many_arguments)]
pub fn dichotomy(
    mode: &EnvMode,
    h: i64,
    r: i64,
    threshold: i64,
    epsilon: f64,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<Dichotomy> {
    let mean = mode.mean_rate();
    let est = |hh: i64, ww: i64, side: usize, label: u64| -> Result<EstimateWithCI> {
        let spec = BoxSpec::new(hh, ww, r, BoxSpec::default_horizon(hh, ww, mean))?;
        let counts = block_counts(mode, &spec, trials, &stream.derive(label), parallelism)?;
        let hits = counts.iter().filter(|c| c[side] as i64 > threshold).count() as u64;
        Ok(wilson(hits, trials, Z95))
    };
    let first = [est(h, 4 * h, 1, 1)?, est(h, 8 * h, 1, 2)?];
    let second = [est(h, 8 * h, 3, 3)?, est(2 * h, 8 * h, 1, 4)?];
    let ok = |e: &[EstimateWithCI; 2]| e.iter().all(|x| x.lo > 1.0 - epsilon);
    Ok(Dichotomy {
        h,
        threshold,
        epsilon,
        first_supported: ok(&first),
        second_supported: ok(&second),
        first,
        second,
    })
}

/// Result of driving a seed through a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeedOutcome {
    /// The first instant `t` at which `2r + 1` consecutive sites of the
    /// target line are infected together; `center` is the middle one.
    Found { center: Site, t: f64 },
    /// No site is infected any more.
    DiedOut { t: f64 },
    /// Still alive at the horizon without producing a seed.
    Exhausted,
}

impl SeedOutcome {
    pub fn found(&self) -> Option<(Site, f64)> {
        match *self {
            SeedOutcome::Found { center, t } => Some((center, t)),
            _ => None,
        }
    }
}

/// Candidate target seeds: every window of `2r + 1` consecutive entries of
/// `sites`, which must be listed in order along a line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLine {
    pub sites: Vec<Site>,
    pub r: i64,
}

impl SeedLine {
    /// The column `{c} × [lo, hi]`, bottom to top.
    pub fn column(c: i64, lo: i64, hi: i64, r: i64) -> SeedLine {
        SeedLine {
            sites: (lo..=hi).map(|y| Site::at(c, y)).collect(),
            r,
        }
    }

    /// The row `[lo, hi] × {y}`, left to right.
    pub fn row(y: i64, lo: i64, hi: i64, r: i64) -> SeedLine {
        SeedLine {
            sites: (lo..=hi).map(|x| Site::at(x, y)).collect(),
            r,
        }
    }
}

/// Runs the process from the source seed within `constraint` and reports the
/// first simultaneous infection of a full target seed.
pub fn seed_to_seed(rep: &GraphicalRep, src: &Seed, target: &SeedLine, constraint: &Constraint, until: f64) -> Result<SeedOutcome> {
    let until = until.min(rep.horizon());
    let mask = constraint.mask(rep);
    let mut starts = Vec::new();
    for s in src.sites()? {
        let idx = rep
            .index(s)
            .ok_or_else(|| Error::Window(format!("seed site {s} is outside the rep window")))?;
        starts.push(Start { idx, t0: src.time, t1: src.time });
    }
    let len = 2 * target.r.max(0) as usize + 1;
    let mut pos = vec![usize::MAX; rep.len()];
    for (p, s) in target.sites.iter().enumerate() {
        let idx = rep
            .index(*s)
            .ok_or_else(|| Error::Window(format!("target site {s} is outside the rep window")))?;
        pos[idx] = p;
    }
    let mut on = vec![false; target.sites.len()];
    let mut alive = 0usize;
    let mut out = SeedOutcome::Exhausted;
    rep.sweep(&mask, &starts, &[], until, Dynamics::Contact, |tick| {
        match tick.kind {
            TickKind::Infect(i) => {
                alive += 1;
                let p = pos[i];
                if p != usize::MAX {
                    on[p] = true;
                    let mut left = 0;
                    while left < p && on[p - left - 1] {
                        left += 1;
                    }
                    let mut right = 0;
                    while p + right + 1 < on.len() && on[p + right + 1] {
                        right += 1;
                    }
                    if left + right + 1 >= len {
                        let start = p - left.min(len - 1);
                        out = SeedOutcome::Found {
                            center: target.sites[start + len / 2],
                            t: tick.t,
                        };
                        return ControlFlow::Break(());
                    }
                }
            }
            TickKind::Recover(i) => {
                alive -= 1;
                if pos[i] != usize::MAX {
                    on[pos[i]] = false;
                }
                if alive == 0 {
                    out = SeedOutcome::DiedOut { t: tick.t };
                    return ControlFlow::Break(());
                }
            }
            TickKind::Check(_) => {}
        }
        ControlFlow::Continue(())
    });
    Ok(out)
}

/// The named corridor events. `k` is the slab half-width `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Template {
    /// `x × t` joined to every `z × (t+1)`, `z ∈ ⌈x+4N, x+4N+Ni⌋`, within
    /// `{x} ∪ ⌈x+1, x+4N+Ni⌋`.
    E { x: Site, t: f64, n: i64 },
    /// `x × t` joined to `(x+3K+3Ki) × (t+1)` within
    /// `⌈x, x+3Ki⌋ ∪ ⌈x+3Ki, x+3K+3Ki⌋`.
    C { x: Site, t: f64, k: i64 },
    /// `x × t` joined to `⌈x+m+ni+2K+2Ki, x+m+ni+4K+4Ki⌋ × [t, ∞)` within
    /// `{x} ∪ ⌈x+i+K, x−K+2Ki+ni⌋ ∪ ⌈x−K+2Ki+ni, x+m+ni+4K+4Ki⌋`.
    A { x: Site, t: f64, m: i64, n: i64, k: i64 },
    /// Hitting time of `⌈x−Ki+m, x+Ki+m⌋` within `{x} ∪ ⌈x+1−Ki, x+Ki+m⌋`.
    T { x: Site, t: f64, m: i64, k: i64 },
    /// Hitting time of `⌈x−K+mi, x+K+mi⌋` within `{x} ∪ ⌈x+i−K, x+K+mi⌋`.
    Ti { x: Site, t: f64, m: i64, k: i64 },
    /// `⌈−r, r⌋ × 0` joined to every `z × t` on the side segment of length
    /// `3KN₁` within `B_0(m)`.
    B { m: i64, n: i64, t: f64, side: Side, r: i64, k: i64, n1: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub occurred: bool,
    /// Hitting time and site for `T` templates.
    pub hit: Option<(f64, Site)>,
}

fn pt(x: Site, dre: i64, dim: i64) -> Result<Site> {
    x.offset(dre, dim)
}

fn one(s: Site) -> Rect {
    Rect::finite(s.re(), s.im(), s.re(), s.im())
}

fn span(a: Site, b: Site) -> Rect {
    Rect::finite(a.re(), a.im(), b.re(), b.im())
}

impl Template {
    /// Site-set constraint of the event.
    pub fn constraint(&self) -> Result<Constraint> {
        Ok(Constraint::Within(self.parts()?))
    }

    fn parts(&self) -> Result<Vec<Rect>> {
        Ok(match *self {
            Template::E { x, n, .. } => vec![one(x), span(pt(x, 1, 0)?, pt(x, 4 * n, n)?)],
            Template::C { x, k, .. } => vec![span(x, pt(x, 0, 3 * k)?), span(pt(x, 0, 3 * k)?, pt(x, 3 * k, 3 * k)?)],
            Template::A { x, m, n, k, .. } => vec![
                one(x),
                span(pt(x, k, 1)?, pt(x, -k, 2 * k + n)?),
                span(pt(x, -k, 2 * k + n)?, pt(x, m + 4 * k, n + 4 * k)?),
            ],
            Template::T { x, m, k, .. } => {
                if x.im() <= k {
                    return Err(Error::Precondition(format!("T(x, t, m) needs Im(x) > K, got {x} with K = {k}")));
                }
                vec![one(x), span(pt(x, 1, -k)?, pt(x, m, k)?)]
            }
            Template::Ti { x, m, k, .. } => vec![one(x), span(pt(x, -k, 1)?, pt(x, k, m)?)],
            Template::B { m, .. } => vec![ball(Site::ORIGIN, m)],
        })
    }

    /// Smallest rectangle a rep must cover to evaluate the event.
    pub fn region(&self) -> Result<Rect> {
        let mut parts = self.parts()?;
        parts.extend(self.target_rect()?);
        if let Template::B { r, .. } = *self {
            parts.push(Rect::finite(-r, 0, r, 0));
        }
        Ok(parts.iter().skip(1).fold(parts[0], |acc, r| acc.hull(r)))
    }

    fn target_rect(&self) -> Result<Option<Rect>> {
        Ok(Some(match *self {
            Template::E { x, n, .. } => span(pt(x, 4 * n, 0)?, pt(x, 4 * n, n)?),
            Template::C { x, k, .. } => one(pt(x, 3 * k, 3 * k)?),
            Template::A { x, m, n, k, .. } => span(pt(x, m + 2 * k, n + 2 * k)?, pt(x, m + 4 * k, n + 4 * k)?),
            Template::T { x, m, k, .. } => span(pt(x, m, -k)?, pt(x, m, k)?),
            Template::Ti { x, m, k, .. } => span(pt(x, -k, m)?, pt(x, k, m)?),
            Template::B { m, n, side, k, n1, .. } => {
                let len = 3 * k * n1;
                match side {
                    Side::UR => Rect::finite(n, m, n + len, m),
                    Side::R => Rect::finite(m, n, m, n + len),
                    Side::UL => Rect::finite(-n - len, m, -n, m),
                    Side::L => Rect::finite(-m, n, -m, n + len),
                }
            }
        }))
    }
}

/// Evaluates a template on `rep`. Events with "for all z × s" targets are
/// read as simultaneous infection of the whole target at the instant `s`.
pub fn event_probe(rep: &GraphicalRep, template: &Template) -> Result<ProbeResult> {
    let region = template.region()?;
    if !rep.region().contains_rect(&region) {
        return Err(Error::Window(format!("template region {region} is not inside the rep window {}", rep.region())));
    }
    let constraint = template.constraint()?;
    let target = template.target_rect()?.expect("every template has a target").sites()?;
    let all_at = |initial: &[Site], start: f64, at: f64| -> Result<bool> {
        if at > rep.horizon() {
            return Err(Error::Window(format!("time {at} is beyond the horizon {}", rep.horizon())));
        }
        let tr = evolve_with(rep, initial, start, &constraint, at, Dynamics::Contact)?;
        let now = tr.infected_at(at);
        Ok(target.iter().all(|z| now.binary_search(z).is_ok()))
    };
    let hit_from = |x: Site, t: f64| -> Result<Option<(f64, Site)>> {
        let tgt = SpaceTimeSet::during(&target, t, rep.horizon());
        first_hit(rep, &SpaceTimeSet::point(x, t), &tgt, &constraint)
    };
    Ok(match *template {
        Template::E { x, t, .. } | Template::C { x, t, .. } => ProbeResult {
            occurred: all_at(&[x], t, t + 1.0)?,
            hit: None,
        },
        Template::A { x, t, .. } => ProbeResult {
            occurred: hit_from(x, t)?.is_some(),
            hit: None,
        },
        Template::T { x, t, .. } | Template::Ti { x, t, .. } => {
            let hit = hit_from(x, t)?;
            ProbeResult { occurred: hit.is_some(), hit }
        }
        Template::B { t, r, .. } => {
            let seed: Vec<Site> = (-r..=r).map(|k| Site::at(k, 0)).collect();
            ProbeResult {
                occurred: all_at(&seed, 0.0, t)?,
                hit: None,
            }
        }
    })
}
