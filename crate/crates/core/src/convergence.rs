//! Estimators around complete convergence: survival, the two conditions that
//! imply it, a finite-volume sampler for the upper invariant measure, the
//! mixture distance, the Richardson comparison process, coupling checks and
//! FKG covariances.
//!
//! Everything here runs on finite regions. Region margins and burn-in times
//! are part of every result so that truncation choices stay visible.

use std::collections::{BTreeMap, HashSet};
use std::ops::ControlFlow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::{phi_theta_at, BoxSpec, Side};
use crate::environment::{EnvMode, Environment};
use crate::error::{Error, Result};
use crate::graphical::{
    evolve, evolve_with, extinction_time, first_hit, states_at, Constraint, Dynamics, GraphicalRep, GrowingRep, SpaceTimeSet,
    TickKind, Trajectory,
};
use crate::lattice::{Rect, Site};
use crate::stats::{self, covariance, mann_kendall, run_trials, wilson, Covariance, EstimateWithCI, MannKendall, StreamId, Z95};

/// Largest window whose subset law is tabulated exactly (4096 atoms).
pub const MAX_WINDOW: usize = 12;

/// Margin around the initial set used when no region is given:
/// `⌈mean_rate · T⌉ + 4`, at most 40.
pub fn cone_margin(mean_rate: f64, horizon: f64) -> i64 {
    let m = (mean_rate.max(0.0) * horizon).ceil();
    if m.is_finite() {
        (m as i64 + 4).min(40)
    } else {
        40
    }
}

fn region_around(sites: &[Site], margin: i64) -> Result<Rect> {
    Rect::bounding(sites)
        .ok_or_else(|| Error::Precondition("an empty site set has no region".into()))?
        .expand(margin)
}

fn check_inside(region: &Rect, sites: &[Site], what: &str) -> Result<()> {
    match sites.iter().find(|s| !region.contains(**s)) {
        Some(s) => Err(Error::Window(format!("{what} site {s} is outside {region}"))),
        None => Ok(()),
    }
}

fn check_times(times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::Precondition("no times given".into()));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Precondition(format!("time {t} must be finite and nonnegative")));
    }
    Ok(times.iter().copied().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub initial: Vec<Site>,
    pub horizon: f64,
    pub trials: u64,
    pub mode: String,
    pub region: Rect,
    /// Margin around the initial set when the region was sized automatically.
    pub margin: Option<i64>,
    /// `P(ξ_T ≠ ∅)`.
    pub estimate: EstimateWithCI,
}

/// `P(ξ_T^A ≠ ∅)` on a region sized by [`cone_margin`].
pub fn estimate_survival(mode: &EnvMode, a: &[Site], horizon: f64, trials: u64, stream: &StreamId, parallelism: usize) -> Result<SurvivalEstimate> {
    let margin = cone_margin(mode.mean_rate(), horizon);
    let region = if a.is_empty() {
        Rect::finite(0, 0, 0, 0)
    } else {
        region_around(a, margin)?
    };
    let mut out = survival_curve(mode, a, &[horizon], &region, trials, stream, parallelism)?;
    let mut est = out.remove(0);
    est.margin = Some(margin);
    Ok(est)
}

/// `P(ξ_T^A ≠ ∅)` inside an explicit region.
pub fn estimate_survival_in(
    mode: &EnvMode,
    a: &[Site],
    horizon: f64,
    region: &Rect,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<SurvivalEstimate> {
    Ok(survival_curve(mode, a, &[horizon], region, trials, stream, parallelism)?.remove(0))
}

/// Survival estimates for several horizons on shared realizations, so the
/// estimates are nonincreasing in `T`. Each trial samples the region only as
/// far in time as it needs: the horizon starts at `T_max / 16` and doubles
/// until the process has died or `T_max` is reached.
pub fn survival_curve(
    mode: &EnvMode,
    a: &[Site],
    horizons: &[f64],
    region: &Rect,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<Vec<SurvivalEstimate>> {
    let t_max = check_times(horizons)?;
    check_inside(region, a, "initial")?;
    let constraint = Constraint::Unconstrained;
    let deaths: Vec<Result<Option<f64>>> = run_trials(trials, stream, parallelism, |_, s| {
        if a.is_empty() {
            return Ok(Some(0.0));
        }
        if t_max == 0.0 {
            return Ok(None);
        }
        let env = mode.env_for(&s);
        let mut grower = GrowingRep::new(&env, region, &s.derive(1))?;
        let mut h = t_max / 16.0;
        loop {
            let rep = grower.grow(h.min(t_max))?;
            if let Some(t) = extinction_time(rep, a, &constraint)? {
                return Ok(Some(t));
            }
            if h >= t_max {
                return Ok(None);
            }
            h *= 2.0;
        }
    });
    let deaths = deaths.into_iter().collect::<Result<Vec<_>>>()?;
    let mut initial = a.to_vec();
    initial.sort();
    Ok(horizons
        .iter()
        .map(|&t| {
            // alive at T iff extinction happens strictly after T
            let alive = deaths.iter().filter(|d| d.is_none_or(|x| x > t)).count() as u64;
            SurvivalEstimate {
                initial: initial.clone(),
                horizon: t,
                trials,
                mode: mode.label().to_string(),
                region: *region,
                margin: None,
                estimate: wilson(alive, trials, Z95),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionARow {
    pub t: f64,
    /// `P(x ∈ ξ_s for some s ∈ [t, T])`.
    pub hit: EstimateWithCI,
    /// `P(ξ_T ≠ ∅)`, from the same realizations.
    pub survive: EstimateWithCI,
    /// `survive − hit`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionA {
    pub x: Site,
    pub initial: Vec<Site>,
    pub horizon: f64,
    pub region: Rect,
    pub trials: u64,
    pub rows: Vec<ConditionARow>,
}

/// Paired estimates for the first condition in one fixed environment: does
/// survival to `T` come with visits to `x` late in `[t, T]`?
#[allow(clippy::too_many_arguments)]
pub fn condition_a(
    env: &Environment,
    x: Site,
    a: &[Site],
    t_grid: &[f64],
    horizon: f64,
    margin: i64,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<ConditionA> {
    check_times(t_grid)?;
    check_times(&[horizon])?;
    if horizon == 0.0 {
        return Err(Error::Precondition("the horizon must be positive".into()));
    }
    let mut all = a.to_vec();
    all.push(x);
    let region = region_around(&all, margin)?;
    // per trial: (alive at T, supremum of the times x is infected)
    let runs: Vec<Result<(bool, f64)>> = run_trials(trials, stream, parallelism, |_, s| {
        if a.is_empty() {
            return Ok((false, f64::NEG_INFINITY));
        }
        let rep = GraphicalRep::sample(env, &region, horizon, &s)?;
        let mask = Constraint::Unconstrained.mask(&rep);
        let starts = rep.starts_for(&mask, a, 0.0, true)?;
        let xi = rep.index(x).expect("x lies in the region");
        let mut alive = 0usize;
        let mut x_in = false;
        let mut x_last = f64::NEG_INFINITY;
        rep.sweep(&mask, &starts, &[], horizon, Dynamics::Contact, |tick| {
            match tick.kind {
                TickKind::Infect(i) => {
                    alive += 1;
                    if i == xi {
                        x_in = true;
                    }
                }
                TickKind::Recover(i) => {
                    alive -= 1;
                    if i == xi {
                        x_in = false;
                        x_last = tick.t;
                    }
                    if alive == 0 {
                        return ControlFlow::Break(());
                    }
                }
                TickKind::Check(_) => {}
            }
            ControlFlow::Continue(())
        });
        Ok((alive > 0, if x_in { f64::INFINITY } else { x_last }))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let survived = runs.iter().filter(|r| r.0).count() as u64;
    let survive = wilson(survived, trials, Z95);
    let rows = t_grid
        .iter()
        .map(|&t| {
            // x is infected on [infection, recovery): it is seen in [t, T]
            // iff it is infected at T or its last recovery comes after t
            let hits = runs.iter().filter(|r| r.1 > t).count() as u64;
            let hit = wilson(hits, trials, Z95);
            ConditionARow {
                t,
                hit,
                survive,
                gap: survive.point - hit.point,
            }
        })
        .collect();
    let mut initial = a.to_vec();
    initial.sort();
    Ok(ConditionA {
        x,
        initial,
        horizon,
        region,
        trials,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionBRow {
    pub l: i64,
    pub t: f64,
    /// `P(ξ_t^{B_x(l)} ∩ B_x(l) ≠ ∅)`.
    pub estimate: EstimateWithCI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionB {
    pub x: Site,
    pub region: Rect,
    pub margin: i64,
    pub trials: u64,
    pub rows: Vec<ConditionBRow>,
}

impl ConditionB {
    pub fn get(&self, l: i64, t: f64) -> Option<&ConditionBRow> {
        self.rows.iter().find(|r| r.l == l && r.t == t)
    }
}

/// Estimates for the second condition in one fixed environment. All radii
/// share one realization per trial on the region around the largest ball, so
/// comparisons across `l` are paired (and exactly monotone per realization).
#[allow(clippy::too_many_arguments)]
pub fn condition_b(
    env: &Environment,
    x: Site,
    ls: &[i64],
    t_grid: &[f64],
    margin: i64,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<ConditionB> {
    let t_max = check_times(t_grid)?;
    if ls.is_empty() || ls.iter().any(|&l| l < 0) {
        return Err(Error::Precondition("radii must be given and nonnegative".into()));
    }
    let l_max = *ls.iter().max().expect("nonempty");
    let region = crate::lattice::ball(x, l_max).expand(margin)?;
    let balls: Vec<Vec<Site>> = ls.iter().map(|&l| crate::lattice::ball(x, l).sites()).collect::<Result<_>>()?;
    let horizon = t_max.max(f64::MIN_POSITIVE);
    // hits[trial][l][t]
    let hits: Vec<Result<Vec<Vec<bool>>>> = run_trials(trials, stream, parallelism, |_, s| {
        let rep = GraphicalRep::sample(env, &region, horizon, &s)?;
        balls
            .iter()
            .zip(ls)
            .map(|(b, &l)| {
                let ball = crate::lattice::ball(x, l);
                let states = states_at(&rep, b, 0.0, &Constraint::Unconstrained, t_grid, Dynamics::Contact)?;
                Ok(states.iter().map(|st| st.iter().any(|s| ball.contains(*s))).collect())
            })
            .collect()
    });
    let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (li, &l) in ls.iter().enumerate() {
        for (ti, &t) in t_grid.iter().enumerate() {
            let k = hits.iter().filter(|h| h[li][ti]).count() as u64;
            rows.push(ConditionBRow {
                l,
                t,
                estimate: wilson(k, trials, Z95),
            });
        }
    }
    Ok(ConditionB {
        x,
        region,
        margin,
        trials,
        rows,
    })
}

/// Empirical law of `ξ ∩ W` over the subsets of a small window. Subsets are
/// bit masks over `sites` (bit `i` is `sites[i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLaw {
    pub window: Rect,
    pub sites: Vec<Site>,
    /// Simulation region: the window (or the window and the initial set)
    /// grown by `margin`.
    pub region: Rect,
    pub margin: i64,
    pub burn: f64,
    pub samples: u64,
    pub counts: BTreeMap<u64, u64>,
}

impl WindowLaw {
    fn new(window: &Rect, region: &Rect, margin: i64, burn: f64) -> Result<WindowLaw> {
        let sites = window.sites()?;
        if sites.len() > MAX_WINDOW {
            return Err(Error::WindowTooLarge(sites.len()));
        }
        Ok(WindowLaw {
            window: *window,
            sites,
            region: *region,
            margin,
            burn,
            samples: 0,
            counts: BTreeMap::new(),
        })
    }

    pub fn mask_of(&self, set: &[Site]) -> u64 {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, s)| set.contains(s))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    pub fn subset(&self, mask: u64) -> Vec<Site> {
        (0..self.sites.len()).filter(|i| mask & (1 << i) != 0).map(|i| self.sites[i]).collect()
    }

    fn record(&mut self, mask: u64) {
        *self.counts.entry(mask).or_default() += 1;
        self.samples += 1;
    }

    pub fn frequency(&self, mask: u64) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        self.counts.get(&mask).copied().unwrap_or(0) as f64 / self.samples as f64
    }

    pub fn mass_empty(&self) -> f64 {
        self.frequency(0)
    }

    pub fn full_mask(&self) -> u64 {
        (1u64 << self.sites.len()) - 1
    }
}

fn check_window(window: &Rect) -> Result<Vec<Site>> {
    if !window.is_finite() || window.is_empty() {
        return Err(Error::Precondition(format!("window {window} must be finite and nonempty")));
    }
    let sites = window.sites()?;
    if sites.len() > MAX_WINDOW {
        return Err(Error::WindowTooLarge(sites.len()));
    }
    Ok(sites)
}

/// `ξ_burn ∩ W` started from every site of `W` grown by `margin` (a finite
/// stand-in for the whole half-plane).
pub fn upper_invariant_sample(
    env: &Environment,
    window: &Rect,
    burn: f64,
    margin: i64,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<WindowLaw> {
    let region = window.expand(margin)?;
    Ok(upper_invariant_in(env, window, &region, margin, &[burn], trials, stream, parallelism)?.remove(0))
}

/// Laws for several burn-in times. Trial `j` uses one realization on
/// `[0, b_max]` and starts the full configuration at `b_max − b`, so a longer
/// burn gives a smaller set on every realization.
pub fn upper_invariant_sample_multi(
    env: &Environment,
    window: &Rect,
    burns: &[f64],
    margin: i64,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<Vec<WindowLaw>> {
    let region = window.expand(margin)?;
    upper_invariant_in(env, window, &region, margin, burns, trials, stream, parallelism)
}

#[allow(clippy::too_many_arguments)]
fn upper_invariant_in(
    env: &Environment,
    window: &Rect,
    region: &Rect,
    margin: i64,
    burns: &[f64],
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<Vec<WindowLaw>> {
    check_window(window)?;
    let b_max = check_times(burns)?;
    let mut laws = burns
        .iter()
        .map(|&b| WindowLaw::new(window, region, margin, b))
        .collect::<Result<Vec<_>>>()?;
    let all = region.sites()?;
    let proto = laws[0].clone();
    let masks: Vec<Result<Vec<u64>>> = run_trials(trials, stream, parallelism, |_, s| {
        if b_max == 0.0 {
            return Ok(vec![proto.full_mask(); burns.len()]);
        }
        let rep = GraphicalRep::sample(env, region, b_max, &s)?;
        burns
            .iter()
            .map(|&b| {
                let st = states_at(&rep, &all, b_max - b, &Constraint::Unconstrained, &[b_max], Dynamics::Contact)?;
                Ok(proto.mask_of(&st[0]))
            })
            .collect()
    });
    for m in masks {
        for (law, mask) in laws.iter_mut().zip(m?) {
            law.record(mask);
        }
    }
    Ok(laws)
}

fn tv(p: &BTreeMap<u64, f64>, q: &BTreeMap<u64, f64>) -> f64 {
    let keys: std::collections::BTreeSet<u64> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

fn empirical(masks: &[u64]) -> BTreeMap<u64, f64> {
    let mut out = BTreeMap::new();
    let w = 1.0 / masks.len().max(1) as f64;
    for &m in masks {
        *out.entry(m).or_insert(0.0) += w;
    }
    out
}

/// `p ν + (1 − p) δ_∅`.
fn mixture(p: f64, nu: &BTreeMap<u64, f64>) -> BTreeMap<u64, f64> {
    let mut out: BTreeMap<u64, f64> = nu.iter().map(|(&k, &v)| (k, p * v)).collect();
    *out.entry(0).or_insert(0.0) += 1.0 - p;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureDistance {
    pub t: f64,
    /// Fraction of trials with `ξ_t ≠ ∅`.
    pub p_hat: f64,
    /// Total variation distance between the law of `ξ_t ∩ W` and the mixture.
    pub distance: f64,
    /// 95% basic bootstrap interval, clamped to `[0, 1]`. It corrects for
    /// the upward bias of the plug-in distance, so it can sit below
    /// `distance`.
    pub ci: (f64, f64),
    /// Mean distance when both samples are redrawn from the fitted mixture
    /// itself: the level sampling noise alone produces.
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcReport {
    pub initial: Vec<Site>,
    pub window: Rect,
    pub region: Rect,
    pub margin: i64,
    pub burn: f64,
    pub trials: u64,
    pub upper: WindowLaw,
    pub distances: Vec<MixtureDistance>,
    pub trend: MannKendall,
}

const BOOTSTRAP: usize = 200;

/// Distance of `law(ξ_t^A ∩ W)` from `p̂ ν̂ + (1 − p̂) δ_∅` along `t_grid`, in
/// one fixed environment. Both the process and the upper invariant sampler
/// run on the same region (the hull of `A` and `W`, grown by `margin`).
#[allow(clippy::too_many_arguments)]
pub fn cc_distance(
    env: &Environment,
    a: &[Site],
    t_grid: &[f64],
    window: &Rect,
    burn: f64,
    margin: i64,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<CcReport> {
    check_window(window)?;
    let t_max = check_times(t_grid)?;
    check_times(&[burn])?;
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is needed".into()));
    }
    let mut corners = window.sites()?;
    corners.extend_from_slice(a);
    let region = region_around(&corners, margin)?;
    let upper = upper_invariant_in(env, window, &region, margin, &[burn], trials, &stream.derive(1), parallelism)?.remove(0);
    let proto = upper.clone();
    // per trial and t: (alive, mask of ξ_t ∩ W)
    let runs: Vec<Result<Vec<(bool, u64)>>> = run_trials(trials, &stream.derive(2), parallelism, |_, s| {
        if a.is_empty() {
            return Ok(vec![(false, 0); t_grid.len()]);
        }
        let rep = GraphicalRep::sample(env, &region, t_max.max(f64::MIN_POSITIVE), &s)?;
        let st = states_at(&rep, a, 0.0, &Constraint::Unconstrained, t_grid, Dynamics::Contact)?;
        Ok(st.iter().map(|set| (!set.is_empty(), proto.mask_of(set))).collect())
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let nu_masks: Vec<u64> = upper.counts.iter().flat_map(|(&m, &c)| std::iter::repeat_n(m, c as usize)).collect();
    let nu = empirical(&nu_masks);
    let mut rng = stream.derive(3).rng();
    let distances: Vec<MixtureDistance> = t_grid
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let col: Vec<(bool, u64)> = runs.iter().map(|r| r[ti]).collect();
            let stat = |col: &[(bool, u64)], nu: &BTreeMap<u64, f64>| {
                let p = col.iter().filter(|c| c.0).count() as f64 / col.len() as f64;
                let masks: Vec<u64> = col.iter().map(|c| c.1).collect();
                (p, tv(&empirical(&masks), &mixture(p, nu)))
            };
            let (p_hat, distance) = stat(&col, &nu);
            let n = col.len();
            let m = nu_masks.len();
            let mut boot = Vec::with_capacity(BOOTSTRAP);
            let mut null = 0.0;
            // fitted mixture as an explicit list of (alive, mask) outcomes to draw from
            let fitted = mixture(p_hat, &nu);
            let atoms: Vec<(u64, f64)> = fitted.iter().map(|(&k, &v)| (k, v)).collect();
            for _ in 0..BOOTSTRAP {
                let c: Vec<(bool, u64)> = (0..n).map(|_| col[rng.random_range(0..n)]).collect();
                let nm: Vec<u64> = (0..m).map(|_| nu_masks[rng.random_range(0..m)]).collect();
                boot.push(stat(&c, &empirical(&nm)).1);
                // null: the process sample drawn from the fitted mixture
                let draw: Vec<u64> = (0..n)
                    .map(|_| {
                        let mut u: f64 = rng.random();
                        for &(k, v) in &atoms {
                            if u < v {
                                return k;
                            }
                            u -= v;
                        }
                        atoms.last().map_or(0, |a| a.0)
                    })
                    .collect();
                let nm: Vec<u64> = (0..m).map(|_| nu_masks[rng.random_range(0..m)]).collect();
                null += tv(&empirical(&draw), &mixture(p_hat, &empirical(&nm)));
            }
            boot.sort_by(f64::total_cmp);
            MixtureDistance {
                t,
                p_hat,
                distance,
                // basic bootstrap: the plug-in TV is biased upward and the
                // resampled TV more so, so reflect the percentiles
                ci: (
                    (2.0 * distance - stats::quantile_sorted(&boot, 0.975)).clamp(0.0, 1.0),
                    (2.0 * distance - stats::quantile_sorted(&boot, 0.025)).clamp(0.0, 1.0),
                ),
                noise_floor: null / BOOTSTRAP as f64,
            }
        })
        .collect();
    let trend = mann_kendall(&distances.iter().map(|d| d.distance).collect::<Vec<_>>());
    let mut initial = a.to_vec();
    initial.sort();
    Ok(CcReport {
        initial,
        window: *window,
        region,
        margin,
        burn,
        trials,
        upper,
        distances,
        trend,
    })
}

/// The process with recoveries suppressed, on the whole rep.
pub fn richardson_evolve(rep: &GraphicalRep, a: &[Site], until: f64) -> Result<Trajectory> {
    evolve_with(rep, a, 0.0, &Constraint::Unconstrained, until, Dynamics::Richardson)
}

/// Whether `inner`'s infected set stays inside `outer`'s at every event time
/// of either run (both runs must start together).
pub fn dominated(inner: &Trajectory, outer: &Trajectory) -> bool {
    use crate::graphical::Change;
    let mut a: HashSet<Site> = inner.initial.iter().copied().collect();
    let mut b: HashSet<Site> = outer.initial.iter().copied().collect();
    let mut outside = a.iter().filter(|s| !b.contains(s)).count();
    let (mut i, mut j) = (0, 0);
    let (la, lb) = (&inner.log, &outer.log);
    if outside > 0 {
        return false;
    }
    while i < la.len() || j < lb.len() {
        let t = la.get(i).map_or(f64::INFINITY, |e| e.t).min(lb.get(j).map_or(f64::INFINITY, |e| e.t));
        while let Some(e) = la.get(i).filter(|e| e.t == t) {
            match e.change {
                Change::Infect => {
                    if a.insert(e.site) && !b.contains(&e.site) {
                        outside += 1;
                    }
                }
                Change::Recover => {
                    if a.remove(&e.site) && !b.contains(&e.site) {
                        outside -= 1;
                    }
                }
            }
            i += 1;
        }
        while let Some(e) = lb.get(j).filter(|e| e.t == t) {
            match e.change {
                Change::Infect => {
                    if b.insert(e.site) && a.contains(&e.site) {
                        outside -= 1;
                    }
                }
                Change::Recover => {
                    if b.remove(&e.site) && a.contains(&e.site) {
                        outside += 1;
                    }
                }
            }
            j += 1;
        }
        if outside > 0 {
            return false;
        }
    }
    true
}

/// Checks `ξ_t^{A1} ⊆ ξ_t^{A2}` at every event time, on one rep. A `false`
/// would mean the simulator breaks the monotone coupling.
pub fn coupling_check(rep: &GraphicalRep, a1: &[Site], a2: &[Site], until: f64) -> Result<bool> {
    if let Some(s) = a1.iter().find(|s| !a2.contains(s)) {
        return Err(Error::Precondition(format!("{s} is in the smaller initial set only")));
    }
    let c = Constraint::Unconstrained;
    Ok(dominated(&evolve(rep, a1, &c, until)?, &evolve(rep, a2, &c, until)?))
}

/// Events built from monotone primitives. Only those that are increasing in
/// the graphical representation (more arrows, fewer deaths) may enter
/// [`fkg_covariance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Event {
    /// `|Φ^side| > k` for the box translated by `at`.
    PhiAbove { spec: BoxSpec, at: (i64, i64), side: Side, k: usize },
    /// `|Φ^side| <= k`: decreasing.
    PhiAtMost { spec: BoxSpec, at: (i64, i64), side: Side, k: usize },
    /// `source` joined to `target` inside `within`.
    Joined { source: SpaceTimeSet, target: SpaceTimeSet, within: Rect },
    Not(Box<Event>),
    All(Vec<Event>),
    Any(Vec<Event>),
}

impl Event {
    /// `Some(true)` for increasing, `Some(false)` for decreasing, `None` when
    /// the structure does not decide.
    fn monotone(&self) -> Option<bool> {
        match self {
            Event::PhiAbove { .. } | Event::Joined { .. } => Some(true),
            Event::PhiAtMost { .. } => Some(false),
            Event::Not(e) => e.monotone().map(|m| !m),
            Event::All(es) | Event::Any(es) => {
                let ms: Vec<Option<bool>> = es.iter().map(Event::monotone).collect();
                match ms.first() {
                    None => Some(true),
                    Some(&first) if ms.iter().all(|m| *m == first) => first,
                    _ => None,
                }
            }
        }
    }

    pub fn is_increasing(&self) -> bool {
        self.monotone() == Some(true)
    }

    fn extent(&self) -> Result<(Option<Rect>, f64)> {
        Ok(match self {
            Event::PhiAbove { spec, at, .. } | Event::PhiAtMost { spec, at, .. } => (Some(spec.rect_at(at.0, at.1)), spec.horizon),
            Event::Joined { target, within, .. } => {
                let t = target.atoms.iter().map(|a| a.2).fold(0.0, f64::max);
                (Some(*within), t)
            }
            Event::Not(e) => e.extent()?,
            Event::All(es) | Event::Any(es) => {
                let mut r: Option<Rect> = None;
                let mut t = 0.0f64;
                for e in es {
                    let (er, et) = e.extent()?;
                    r = match (r, er) {
                        (Some(a), Some(b)) => Some(a.hull(&b)),
                        (a, b) => a.or(b),
                    };
                    t = t.max(et);
                }
                (r, t)
            }
        })
    }

    fn holds(&self, rep: &GraphicalRep) -> Result<bool> {
        Ok(match self {
            Event::PhiAbove { spec, at, side, k } => phi_theta_at(rep, spec, at.0, at.1)?.0.get(*side).len() > *k,
            Event::PhiAtMost { spec, at, side, k } => phi_theta_at(rep, spec, at.0, at.1)?.0.get(*side).len() <= *k,
            Event::Joined { source, target, within } => first_hit(rep, source, target, &Constraint::rect(*within))?.is_some(),
            Event::Not(e) => !e.holds(rep)?,
            Event::All(es) => {
                for e in es {
                    if !e.holds(rep)? {
                        return Ok(false);
                    }
                }
                true
            }
            Event::Any(es) => {
                for e in es {
                    if e.holds(rep)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }
}

/// `P(A ∩ B) − P(A) P(B)` for two increasing events evaluated on one rep per
/// trial (covering both events).
pub fn fkg_covariance(a: &Event, b: &Event, mode: &EnvMode, trials: u64, stream: &StreamId, parallelism: usize) -> Result<Covariance> {
    for e in [a, b] {
        if !e.is_increasing() {
            return Err(Error::NotIncreasing(format!("{e:?}")));
        }
    }
    let (ra, ta) = a.extent()?;
    let (rb, tb) = b.extent()?;
    let region = match (ra, rb) {
        (Some(x), Some(y)) => x.hull(&y),
        (x, y) => x.or(y).ok_or_else(|| Error::Precondition("events without a region".into()))?,
    };
    let horizon = ta.max(tb).max(f64::MIN_POSITIVE);
    let pairs: Vec<Result<(bool, bool)>> = run_trials(trials, stream, parallelism, |_, s| {
        let env = mode.env_for(&s);
        let rep = GraphicalRep::sample(&env, &region, horizon, &s.derive(1))?;
        Ok((a.holds(&rep)?, b.holds(&rep)?))
    });
    Ok(covariance(&pairs.into_iter().collect::<Result<Vec<_>>>()?))
}
