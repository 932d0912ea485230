//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! (straight to stderr, so it shows even when output is captured) and the
//! test fails if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::io::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cpre_core::blocks::{estimate_block, phi_theta_at, BoxSpec, Side};
use cpre_core::cli::{parse_config, run_command, Command};
use cpre_core::convergence::{
    cc_distance, condition_b, coupling_check, dominated, estimate_survival_in, fkg_covariance, richardson_evolve, Event,
};
use cpre_core::environment::{window_edges, DistSpec, EnvMode, Environment};
use cpre_core::graphical::{evolve, is_joined, Constraint, GraphicalRep, MarkKind, SpaceTimeSet};
use cpre_core::lattice::{EdgeRegion, Rect, RegionKind, Seed, Site};
use cpre_core::renorm::{
    g_route, g_steps, renorm_grid_with, route_plan, CellSeeds, CellStatus, Geometry, Heading, HopRunner, Orientation,
    SeedRouter, Step, Via,
};
use cpre_core::stats::StreamId;
use cpre_core::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: u32, name: &str, elapsed: Duration, out: &Outcome) {
    let tag = if out.pass { "PASS" } else { "FAIL" };
    let line = format!("acceptance {n:>2} {tag} {name} ({:.1}s): {}\n", elapsed.as_secs_f64(), out.detail);
    let mut err = std::io::stderr();
    let _ = err.write_all(line.as_bytes());
    let _ = err.flush();
}

fn quenched(spec: DistSpec, seed: u64) -> EnvMode {
    EnvMode::Quenched(Environment::new(spec, seed).unwrap())
}

// 1. Pure death: with every rate zero each site lives an Exp(1) time.
fn pure_death() -> Outcome {
    let a = [Site::at(0, 0), Site::at(3, 0), Site::at(0, 2)];
    let t: f64 = 2.0;
    let n = 10_000;
    let mode = quenched(DistSpec::Point(0.0), 11);
    let region = Rect::finite(0, 0, 3, 2);
    let est = estimate_survival_in(&mode, &a, t, &region, n, &StreamId::root(101), 1).unwrap();
    let truth = 1.0 - (1.0 - (-t).exp()).powi(3);
    let sigma = (truth * (1.0 - truth) / n as f64).sqrt();
    let err = (est.estimate.point - truth).abs();
    Outcome {
        pass: err <= 3.0 * sigma,
        detail: format!("estimate {:.4} vs closed form {truth:.4}, |err| {err:.4} <= 3σ {:.4}", est.estimate.point, 3.0 * sigma),
    }
}

/// Probability the two-site chain is empty at `t`, by RK4 on the forward
/// equation over states (empty, one infected, both infected).
fn two_site_empty(lambda: f64, t: f64, start_both: bool, dt: f64) -> f64 {
    let deriv = |p: [f64; 3]| -> [f64; 3] {
        [p[1], -(1.0 + lambda) * p[1] + 2.0 * p[2], lambda * p[1] - 2.0 * p[2]]
    };
    let mut p = if start_both { [0.0, 0.0, 1.0] } else { [0.0, 1.0, 0.0] };
    let steps = (t / dt).round() as usize;
    let h = t / steps as f64;
    let add = |p: [f64; 3], k: [f64; 3], s: f64| [p[0] + s * k[0], p[1] + s * k[1], p[2] + s * k[2]];
    for _ in 0..steps {
        let k1 = deriv(p);
        let k2 = deriv(add(p, k1, h / 2.0));
        let k3 = deriv(add(p, k2, h / 2.0));
        let k4 = deriv(add(p, k3, h));
        for i in 0..3 {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    p[0]
}

// 2. Two sites joined by one edge of rate 1.
fn two_site_chain() -> Outcome {
    let mode = quenched(DistSpec::Point(1.0), 12);
    let region = Rect::finite(0, 0, 1, 0);
    let n = 10_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, a, both) in [("one", vec![Site::at(0, 0)], false), ("both", vec![Site::at(0, 0), Site::at(1, 0)], true)] {
        let est = estimate_survival_in(&mode, &a, 3.0, &region, n, &StreamId::root(102), 1).unwrap();
        let truth = 1.0 - two_site_empty(1.0, 3.0, both, 1e-4);
        let sigma = (truth * (1.0 - truth) / n as f64).sqrt();
        let err = (est.estimate.point - truth).abs();
        pass &= err <= 3.0 * sigma;
        parts.push(format!("{label}: {:.4} vs {truth:.4} (3σ {:.4})", est.estimate.point, 3.0 * sigma));
    }
    Outcome { pass, detail: parts.join(", ") }
}

/// Which arrows a search may use, decided from rectangle bounds directly.
enum Allowed {
    All,
    Rect(i64, i64, i64, i64),
}

impl Allowed {
    fn site(&self, s: Site) -> bool {
        match *self {
            Allowed::All => true,
            Allowed::Rect(x0, y0, x1, y1) => (x0..=x1).contains(&s.re()) && (y0..=y1).contains(&s.im()),
        }
    }
}

/// Earliest target time reachable from `source` by an explicit search over
/// infection segments: a segment starts when a site is entered and lasts to
/// its next death; every arrow leaving a live segment enters a new one.
fn reach_oracle(rep: &GraphicalRep, source: &[(Site, f64, f64)], target: &[(Site, f64, f64)], allowed: &Allowed) -> Option<f64> {
    let until = target.iter().map(|a| a.2).fold(f64::NEG_INFINITY, f64::max).min(rep.horizon());
    let mut deaths: HashMap<Site, Vec<f64>> = HashMap::new();
    let mut out: HashMap<Site, Vec<(f64, Site)>> = HashMap::new();
    for m in rep.marks() {
        let (x, y) = (rep.site(m.from as usize), rep.site(m.to as usize));
        match m.kind {
            MarkKind::Death => deaths.entry(x).or_default().push(m.t),
            MarkKind::Arrow => {
                if allowed.site(x) && allowed.site(y) {
                    out.entry(x).or_default().push((m.t, y));
                }
            }
        }
    }
    for v in deaths.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    let next_death = |s: Site, after: f64| {
        deaths.get(&s).and_then(|v| v.iter().copied().find(|&d| d > after)).unwrap_or(f64::INFINITY)
    };
    let mut segments: HashMap<Site, Vec<(f64, f64)>> = HashMap::new();
    let mut stack: Vec<(Site, f64, f64)> = Vec::new();
    for &(s, t0, t1) in source {
        stack.push((s, t0, next_death(s, t1)));
    }
    while let Some((s, e, d)) = stack.pop() {
        let known = segments.entry(s).or_default();
        if known.iter().any(|&(a, b)| a <= e && d <= b) {
            continue;
        }
        known.push((e, d));
        for &(t, y) in out.get(&s).map(|v| v.as_slice()).unwrap_or(&[]) {
            if t >= e && t < d && t <= until {
                if segments.get(&y).is_some_and(|v| v.iter().any(|&(a, b)| a <= t && t < b)) {
                    continue;
                }
                stack.push((y, t, next_death(y, t)));
            }
        }
    }
    let mut best: Option<f64> = None;
    for &(s, a, b) in target {
        for &(e, d) in segments.get(&s).map(|v| v.as_slice()).unwrap_or(&[]) {
            if e <= b && d > a {
                let t = e.max(a);
                if t <= until {
                    best = Some(best.map_or(t, |x: f64| x.min(t)));
                }
            }
        }
    }
    best
}

// 3. Path search against an independent segment search.
fn reachability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let horizon = 3.0;
    let (mut queries, mut agree, mut joined, mut time_agree) = (0u32, 0u32, 0u32, 0u32);
    let mut first_bad = None;
    for rep_no in 0..200u64 {
        let w = rng.random_range(1..=5i64);
        let h = rng.random_range(1..=3i64);
        let region = Rect::finite(0, 0, w - 1, h - 1);
        let lo = rng.random_range(0.2..1.5);
        let env = Environment::new(DistSpec::Uniform { lo, hi: lo + 1.5 }, rep_no).unwrap();
        let rep = GraphicalRep::sample(&env, &region, horizon, &StreamId::root(1030 + rep_no)).unwrap();
        let sites = region.sites().unwrap();
        for _ in 0..5 {
            let (constraint, allowed) = if rng.random_bool(0.5) {
                (Constraint::Unconstrained, Allowed::All)
            } else {
                let (x0, x1) = (rng.random_range(0..w), rng.random_range(0..w));
                let (y0, y1) = (rng.random_range(0..h), rng.random_range(0..h));
                let (x0, x1, y0, y1) = (x0.min(x1), x0.max(x1), y0.min(y1), y0.max(y1));
                (Constraint::rect(Rect::finite(x0, y0, x1, y1)), Allowed::Rect(x0, y0, x1, y1))
            };
            let inside: Vec<Site> = sites.iter().copied().filter(|&s| allowed.site(s)).collect();
            let mut source = SpaceTimeSet::new();
            for _ in 0..rng.random_range(1..=2) {
                let s = inside[rng.random_range(0..inside.len())];
                let t0 = rng.random_range(0.0..1.5);
                let t1 = if rng.random_bool(0.5) { t0 } else { t0 + rng.random_range(0.0..0.5) };
                source.push(s, t0, t1);
            }
            let mut target = SpaceTimeSet::new();
            for _ in 0..rng.random_range(1..=2) {
                let s = sites[rng.random_range(0..sites.len())];
                let a = rng.random_range(0.0..horizon);
                let b = if rng.random_bool(0.5) { a } else { (a + rng.random_range(0.0..1.0)).min(horizon) };
                target.push(s, a, b);
            }
            let got = is_joined(&rep, &source, &target, &constraint).unwrap();
            let want = reach_oracle(&rep, &source.atoms, &target.atoms, &allowed);
            queries += 1;
            if got.joined == want.is_some() {
                agree += 1;
            } else if first_bad.is_none() {
                first_bad = Some(format!("rep {rep_no}: library {:?}, search {want:?}", got.first_hit));
            }
            if got.first_hit == want {
                time_agree += 1;
            }
            joined += u32::from(want.is_some());
        }
    }
    Outcome {
        pass: agree == queries && queries == 1000,
        detail: format!(
            "{agree}/{queries} joined verdicts agree ({joined} joined), {time_agree}/{queries} first-hit times equal{}",
            first_bad.map(|b| format!("; first mismatch {b}")).unwrap_or_default()
        ),
    }
}

fn random_env(rng: &mut ChaCha8Rng) -> Environment {
    let lo = rng.random_range(0.0..2.0);
    Environment::new(DistSpec::Uniform { lo, hi: lo + rng.random_range(0.0..2.0) }, rng.random()).unwrap()
}

fn random_subset(rng: &mut ChaCha8Rng, sites: &[Site], p: f64) -> Vec<Site> {
    sites.iter().copied().filter(|_| rng.random_bool(p)).collect()
}

type E = ((i64, i64), (i64, i64));

/// Edge set of an edge region, spelled out from its corners and kind.
fn region_edges(r: &EdgeRegion) -> HashSet<E> {
    let (u, v) = r.corners();
    let (x0, x1) = (u.re().min(v.re()), u.re().max(v.re()));
    let (y0, y1) = (u.im().min(v.im()), u.im().max(v.im()));
    let mut out = HashSet::new();
    for x in x0..=x1 {
        for y in y0..=y1 {
            let (h_ok, v_ok) = match r.kind() {
                RegionKind::Wide => (x < x1, y < y1 && x != x0 && x != x1),
                RegionKind::Tall => (x < x1 && y != y0 && y != y1, y < y1),
            };
            if h_ok {
                out.insert(((x, y), (x + 1, y)));
            }
            if v_ok {
                out.insert(((x, y), (x, y + 1)));
            }
        }
    }
    out
}

// 4. Exact invariants, 10^3 realizations each.
fn invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut bad: Vec<String> = Vec::new();
    let reps = 1000u64;

    // sandwich and Φ/Θ emptiness
    let (mut sandwich, mut empty_match) = (0, 0);
    for i in 0..reps {
        let h = rng.random_range(1..=4i64);
        let w = rng.random_range(1..=6i64);
        let r = rng.random_range(0..=w.min(2));
        let spec = BoxSpec::new(h, w, r, rng.random_range(0.5..4.0)).unwrap();
        let env = random_env(&mut rng);
        let rep = GraphicalRep::sample(&env, &spec.rect(), spec.horizon, &StreamId::root(104_000 + i)).unwrap();
        let (p, t) = phi_theta_at(&rep, &spec, 0, 0).unwrap();
        let (u, total) = (p.union.len(), p.side_total());
        if u <= total && total <= u + 3 {
            sandwich += 1;
        }
        if [Side::L, Side::R, Side::UL, Side::UR].iter().all(|&d| p.get(d).is_empty() == t.get(d).is_empty()) {
            empty_match += 1;
        }
    }
    if sandwich != reps {
        bad.push(format!("sandwich {sandwich}/{reps}"));
    }
    if empty_match != reps {
        bad.push(format!("Φ/Θ emptiness {empty_match}/{reps}"));
    }

    // coupling containment, Richardson domination and monotonicity
    let (mut coupled, mut rich_dom, mut rich_mono) = (0, 0, 0);
    for i in 0..reps {
        let region = Rect::finite(0, 0, rng.random_range(1..=6), rng.random_range(0..=4));
        let sites = region.sites().unwrap();
        let env = random_env(&mut rng);
        let until = rng.random_range(0.5..5.0);
        let rep = GraphicalRep::sample(&env, &region, until, &StreamId::root(204_000 + i)).unwrap();
        let big = random_subset(&mut rng, &sites, 0.5);
        let small = random_subset(&mut rng, &big, 0.5);
        if coupling_check(&rep, &small, &big, until).unwrap() {
            coupled += 1;
        }
        let contact = evolve(&rep, &big, &Constraint::Unconstrained, until).unwrap();
        let rich_big = richardson_evolve(&rep, &big, until).unwrap();
        let rich_small = richardson_evolve(&rep, &small, until).unwrap();
        if dominated(&contact, &rich_big) {
            rich_dom += 1;
        }
        if dominated(&rich_small, &rich_big) {
            rich_mono += 1;
        }
    }
    for (name, k) in [("coupling", coupled), ("Richardson domination", rich_dom), ("Richardson monotonicity", rich_mono)] {
        if k != reps {
            bad.push(format!("{name} {k}/{reps}"));
        }
    }

    // block estimates are nonincreasing in N on shared realizations
    let spec = BoxSpec::new(2, 4, 1, 6.0).unwrap();
    let thresholds: Vec<i64> = (-1..=12).collect();
    let rows = estimate_block(&EnvMode::Annealed(DistSpec::Uniform { lo: 0.5, hi: 3.0 }), &spec, &thresholds, reps, &StreamId::root(304), 1).unwrap();
    let mut block_ok = true;
    for w in rows.windows(2) {
        if w[0].event == w[1].event && w[1].estimate.point > w[0].estimate.point {
            block_ok = false;
        }
    }
    if !block_ok {
        bad.push("block estimates increase in N".into());
    }

    // route plans never let two boxes share an edge
    let (mut plans, mut attempts, mut shared) = (0u32, 0u32, 0u32);
    while plans < 1000 && attempts < 10_000 {
        attempts += 1;
        let h = rng.random_range(2..=5i64);
        let r = rng.random_range(0..=h / 4);
        let m = rng.random_range(30..=40i64);
        let Ok(geom) = Geometry::new(h, r, m, rng.random_range(0.5..3.0)) else { continue };
        let o = Orientation::ALL[rng.random_range(0..4)];
        let c = 50 * h;
        let origin = Seed::horizontal(Site::at(c + rng.random_range(-5 * h..=5 * h), c + rng.random_range(-5 * h..=5 * h)), r, 0.0);
        let Ok(plan) = route_plan(&origin, o, rng.random_range(1..=2), &geom) else { continue };
        plans += 1;
        let mut owner: HashMap<E, usize> = HashMap::new();
        'boxes: for (i, b) in plan.boxes.iter().enumerate() {
            let mut mine = HashSet::new();
            for reg in &b.regions {
                mine.extend(region_edges(reg));
            }
            for e in mine {
                if owner.insert(e, i).is_some() {
                    shared += 1;
                    break 'boxes;
                }
            }
        }
    }
    if plans < 1000 || shared > 0 {
        bad.push(format!("route plans: {plans} built in {attempts} attempts, {shared} with a shared edge"));
    }

    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("sandwich, Φ/Θ emptiness, coupling, Richardson, block monotonicity over {reps} each; {plans} route plans disjoint ({attempts} origins drawn)")
        } else {
            bad.join("; ")
        },
    }
}

/// Opens a hop according to a rule; seeds advance by fixed times.
struct Stub {
    open: fn((i64, i64), Step) -> bool,
    calls: Vec<((i64, i64), Step)>,
}

impl HopRunner for Stub {
    fn hop(&mut self, from: (i64, i64), step: Step, seed: &Seed) -> Result<Option<CellSeeds>> {
        self.calls.push((from, step));
        if !(self.open)(from, step) {
            return Ok(None);
        }
        Ok(Some(CellSeeds {
            north: Seed { time: seed.time + 1.0, ..*seed },
            east: Seed { time: seed.time + 2.0, ..*seed },
        }))
    }
}

/// Moves a seed `n` squares in a fixed time per square, counting calls.
struct Walker {
    per_square: f64,
    calls: u32,
}

impl SeedRouter for Walker {
    fn route(&mut self, seed: &Seed, n: u32, o: Orientation) -> Result<Option<(Seed, Seed)>> {
        self.calls += 1;
        let k = i64::from(n);
        let center = Site::at(seed.center.re() + k * i64::from(o.re), seed.center.im() + k * i64::from(o.im));
        let out = Seed { center, time: seed.time + self.per_square * f64::from(n), ..*seed };
        Ok(Some((out, out)))
    }
}

// 5. Renormalization mechanics on stub grids.
fn renorm_stubs() -> Outcome {
    let origin = Seed::horizontal(Site::at(200, 60), 1, 0.0);
    let mut bad = Vec::new();
    for n in 1..=6u32 {
        let mut open = Stub { open: |_, _| true, calls: Vec::new() };
        let grid = renorm_grid_with(&mut open, &origin, n).unwrap();
        let k = i64::from(n);
        let mut want: Vec<(i64, i64)> = (0..=k).map(|j| (0, j)).collect();
        want.extend((1..=k).map(|m| (m, k)));
        if grid.route.as_ref() != Some(&want) {
            bad.push(format!("n={n}: all-open route {:?}", grid.route));
        }
        let mut closed = Stub { open: |_, _| false, calls: Vec::new() };
        let grid = renorm_grid_with(&mut closed, &origin, n).unwrap();
        if grid.route.is_some() || grid.open_count() != 1 {
            bad.push(format!("n={n}: closed grid has a route or opens {}", grid.open_count()));
        }
    }
    // both neighbours of (1, 1) open: it is entered from the left
    let mut both = Stub { open: |_, _| true, calls: Vec::new() };
    let grid = renorm_grid_with(&mut both, &origin, 1).unwrap();
    let c = grid.cell(1, 1).unwrap();
    if grid.cell(0, 1).unwrap().status != CellStatus::Open || grid.cell(1, 0).unwrap().status != CellStatus::Open || c.via != Some(Via::Left) {
        bad.push(format!("(1,1) entered via {:?}", c.via));
    }
    if both.calls.contains(&((1, 0), Step::North)) {
        bad.push("the hop from below was tried although the left neighbour is open".into());
    }
    let mut audited = 0;
    for n in 1..=8u32 {
        for j in 0..50 {
            let w_bar = 1.0 + f64::from(j % 3);
            let s = 300.0 * w_bar * f64::from(n) * f64::from(j) / 50.0;
            let (u, v) = g_steps(s, n, w_bar);
            let mut router = Walker { per_square: w_bar, calls: 0 };
            let start = Seed::horizontal(Site::at(0, 10_000), 1, s);
            let heading = if j % 2 == 0 { Heading::North } else { Heading::East };
            let g = g_route(&start, n, heading, Orientation::NE, w_bar, &mut router).unwrap();
            audited += 1;
            if u + v != 9 || ![54, 86].contains(&g.f_calls) || g.f_calls != 6 * u + 10 * v || router.calls != g.f_calls {
                bad.push(format!("n={n} s={s}: u={u} v={v} calls={} counted={}", g.f_calls, router.calls));
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("leftmost route, no route, left priority for n=1..6; {audited} g-routes with u+v=9 and 54 or 86 F-calls")
        } else {
            bad.join("; ")
        },
    }
}

// 6. Positive association of increasing box events.
fn fkg() -> Outcome {
    let spec = BoxSpec::new(4, 16, 1, BoxSpec::default_horizon(4, 16, 2.0)).unwrap();
    let mode = EnvMode::Annealed(DistSpec::Point(2.0));
    let above = |side, at| Event::PhiAbove { spec, at, side, k: 1 };
    let n = 1000;
    let near = fkg_covariance(&above(Side::L, (0, 0)), &above(Side::R, (0, 0)), &mode, n, &StreamId::root(106), 1).unwrap();
    let far = fkg_covariance(&above(Side::L, (0, 0)), &above(Side::R, (2 * spec.w + 1, 0)), &mode, n, &StreamId::root(206), 1).unwrap();
    let near_ok = near.estimate >= -3.0 * near.std_err;
    let far_ok = far.estimate.abs() <= 3.0 * far.std_err;
    Outcome {
        pass: near_ok && far_ok,
        detail: format!(
            "same box cov {:.4} (σ {:.4}, P {:.3}/{:.3}); disjoint boxes cov {:.4} (σ {:.4})",
            near.estimate, near.std_err, near.p_a, near.p_b, far.estimate, far.std_err
        ),
    }
}

// 7. Distance from the single-site process to the upper-invariant mixture.
fn complete_convergence() -> Outcome {
    let env = Environment::new(DistSpec::Uniform { lo: 1.5, hi: 2.5 }, 107).unwrap();
    let a = [Site::at(0, 1)];
    let window = Rect::finite(4, 0, 5, 2);
    let t_grid = [5.0, 10.0, 20.0, 40.0];
    let rep = cc_distance(&env, &a, &t_grid, &window, 40.0, 8, 2000, &StreamId::root(107), 1).unwrap();
    let d: Vec<f64> = rep.distances.iter().map(|m| m.distance).collect();
    let pass = rep.trend.nonincreasing() && d[3] <= d[0];
    Outcome {
        pass,
        detail: format!(
            "distances {:?}, noise floor {:.3}, Mann-Kendall S {} (z {:.2})",
            d.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            rep.distances[3].noise_floor,
            rep.trend.s,
            rep.trend.z
        ),
    }
}

// 8. Larger balls around x survive at least as often.
fn condition_b_monotone() -> Outcome {
    let env = Environment::new(DistSpec::Point(2.0), 108).unwrap();
    let n = 1000;
    let b = condition_b(&env, Site::at(0, 10), &[2, 4, 6], &[20.0], 8, n, &StreamId::root(108), 1).unwrap();
    let p: Vec<f64> = [2, 4, 6].iter().map(|&l| b.get(l, 20.0).unwrap().estimate.point).collect();
    let sd = |q: f64| (q * (1.0 - q) / n as f64).sqrt();
    let ok = p.windows(2).all(|w| w[1] >= w[0] - 3.0 * (sd(w[0]).powi(2) + sd(w[1]).powi(2)).sqrt());
    Outcome {
        pass: ok,
        detail: format!("P at l = 2, 4, 6: {:.4}, {:.4}, {:.4}", p[0], p[1], p[2]),
    }
}

// 9. Output does not depend on the thread count.
fn thread_invariance() -> Outcome {
    let runs: [(Command, &str); 4] = [
        (Command::Env, "spec = zero_or(3.0, 0.5)\nseed = 9\nregion = -6,0,6,5\n"),
        (Command::Blocks, "spec = uniform(1.0, 3.0)\nmode = annealed\nseed = 9\nh = 2\nw = 6\nbox_T = 8\ntrials = 400\n"),
        (Command::Renorm, "spec = point(20.0)\nseed = 9\nh = 4\nr = 1\nM = 30\nn = 1\ntrials = 6\n"),
        (Command::Cc, "spec = uniform(1.5, 2.5)\nseed = 9\nenvs = 2\ninitial = 0,1\nwindow = 2,0,3,2\nt_grid = 2,4\nburn = 6\nmargin = 4\ntrials = 200\n"),
    ];
    let mut bad = Vec::new();
    for (cmd, doc) in runs {
        let cfg = parse_config(doc).unwrap();
        let one = run_command(cmd, &cfg, 1).unwrap();
        let eight = run_command(cmd, &cfg, 8).unwrap();
        if one.files != eight.files || one.status != eight.status {
            bad.push(cmd.name().to_string());
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() { "env, blocks, renorm, cc byte-identical at 1 and 8 threads".into() } else { format!("differs: {}", bad.join(", ")) },
    }
}

// 10. Environment law and export fidelity.
fn environment_fidelity() -> Outcome {
    let env = Environment::new(DistSpec::ZeroOr { c: 3.0, p: 0.5 }, 110).unwrap();
    let window = Rect::finite(0, 0, 249, 249);
    let edges = window_edges(&window).unwrap();
    let edges = &edges[..100_000];
    let rates: Vec<f64> = edges.iter().map(|e| env.rate(e).unwrap()).collect();
    let zero = rates.iter().filter(|&&r| r == 0.0).count() as f64 / rates.len() as f64;
    let other_ok = rates.iter().all(|&r| r == 0.0 || r == 3.0);
    let small = Rect::finite(-20, 0, 20, 30);
    let doc = env.export(&small).unwrap();
    let back = Environment::import(&doc).unwrap();
    let exact = window_edges(&small).unwrap().iter().all(|e| env.rate(e).unwrap().to_bits() == back.rate(e).unwrap().to_bits());
    let again = back.export(&small).unwrap() == doc;
    let cont = Environment::new(DistSpec::Exponential { mean: 1.7 }, 210).unwrap();
    let cdoc = cont.export(&small).unwrap();
    let cback = Environment::import(&cdoc).unwrap();
    let cexact = window_edges(&small).unwrap().iter().all(|e| cont.rate(e).unwrap().to_bits() == cback.rate(e).unwrap().to_bits());
    Outcome {
        pass: (zero - 0.5).abs() <= 0.01 && other_ok && exact && again && cexact,
        detail: format!(
            "zero fraction {zero:.4} over {} edges; round trip bit-exact: {}, re-export identical: {again}",
            rates.len(),
            exact && cexact
        ),
    }
}

#[test]
fn acceptance() {
    type Check = fn() -> Outcome;
    let checks: [(&str, Check, Option<f64>); 10] = [
        ("pure death vs closed form", pure_death, Some(30.0)),
        ("two-site chain vs RK4", two_site_chain, None),
        ("path search vs segment search", reachability, None),
        ("exact invariants", invariants, None),
        ("renormalization stubs", renorm_stubs, Some(10.0)),
        ("FKG for box events", fkg, None),
        ("convergence trend", complete_convergence, Some(600.0)),
        ("condition (b) monotone in l", condition_b_monotone, None),
        ("thread invariance", thread_invariance, None),
        ("environment fidelity", environment_fidelity, None),
    ];
    let mut failed = Vec::new();
    for (i, (name, check, limit)) in checks.iter().enumerate() {
        let start = Instant::now();
        let mut out = check();
        let elapsed = start.elapsed();
        if let Some(secs) = limit {
            if elapsed.as_secs_f64() > *secs {
                out.pass = false;
                out.detail.push_str(&format!("; over the {secs}s budget"));
            }
        }
        report(i as u32 + 1, name, elapsed, &out);
        if !out.pass {
            failed.push(format!("{}: {}", i + 1, out.detail));
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
