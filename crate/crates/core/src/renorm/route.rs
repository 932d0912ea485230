use serde::{Deserialize, Serialize};

use super::{route_plan, run_route, Geometry, Orientation};
use crate::environment::Environment;
use crate::error::Result;
use crate::lattice::Seed;
use crate::stats::StreamId;

/// Which of the two produced seeds a step continues from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    F1,
    F2,
}

/// Source of route times: moves a seed `n` squares along `o` and returns the
/// seeds produced at times F₁ and F₂ (or `None` when the route fails).
/// `n = 0` must return the seed itself twice.
pub trait SeedRouter {
    fn route(&mut self, seed: &Seed, n: u32, o: Orientation) -> Result<Option<(Seed, Seed)>>;
}

/// Routes on an environment through [`route_plan`]; call `j` uses the stream
/// `stream.derive(j)`.
pub struct EnvSeedRouter<'a> {
    pub env: &'a Environment,
    pub geom: Geometry,
    pub stream: StreamId,
    pub calls: u64,
}

impl<'a> EnvSeedRouter<'a> {
    pub fn new(env: &'a Environment, geom: &Geometry, stream: &StreamId) -> Self {
        EnvSeedRouter {
            env,
            geom: *geom,
            stream: *stream,
            calls: 0,
        }
    }
}

impl SeedRouter for EnvSeedRouter<'_> {
    fn route(&mut self, seed: &Seed, n: u32, o: Orientation) -> Result<Option<(Seed, Seed)>> {
        if n == 0 {
            return Ok(Some((*seed, *seed)));
        }
        let s = self.stream.derive(self.calls);
        self.calls += 1;
        let plan = route_plan(seed, o, n, &self.geom)?;
        let out = run_route(self.env, &s, &plan)?;
        Ok(match (out.y1, out.y2) {
            (Some(a), Some(b)) if out.success => Some((a, b)),
            _ => None,
        })
    }
}

/// Direction of a G step: `North` is `G(·, ·, n, i)`, `East` is `G(·, ·, n, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
}

/// One line of the G algorithm: `t = F_which(t, n + dn, o)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FStep {
    pub which: Which,
    pub dn: i32,
    pub o: Orientation,
}

const fn step(which: Which, dn: i32, re: i8, im: i8) -> FStep {
    FStep {
        which,
        dn,
        o: Orientation { re, im },
    }
}

/// Steps 2) to 7), repeated `u` times.
pub const U_STEPS: [FStep; 6] = [
    step(Which::F2, 0, 1, 1),
    step(Which::F1, 0, 1, -1),
    step(Which::F1, 0, 1, 1),
    step(Which::F1, 0, -1, 1),
    step(Which::F2, -1, -1, -1),
    step(Which::F2, 1, -1, 1),
];

/// Steps 8) to 17), repeated `v` times.
pub const V_STEPS: [FStep; 10] = [
    step(Which::F2, 0, 1, 1),
    step(Which::F1, 0, 1, -1),
    step(Which::F2, 0, 1, 1),
    step(Which::F1, 0, 1, -1),
    step(Which::F1, 0, 1, 1),
    step(Which::F1, 0, -1, 1),
    step(Which::F2, -1, -1, -1),
    step(Which::F1, 0, -1, 1),
    step(Which::F2, 0, -1, -1),
    step(Which::F2, 1, -1, 1),
];

/// `(u, v)` for a start time `s`: with `s' = s mod 100W̄n`, `v = 8` when
/// `s' <= 37W̄n` and `0` otherwise, and `u = 9 - v`.
pub fn g_steps(s: f64, n: u32, w_bar: f64) -> (u32, u32) {
    let period = 100.0 * w_bar * f64::from(n);
    let s_mod = s - period * (s / period).floor();
    let v = if s_mod <= 37.0 * w_bar * f64::from(n) { 8 } else { 0 };
    (9 - v, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GRoute {
    pub u: u32,
    pub v: u32,
    /// F evaluations performed (all `6u + 10v` when the route succeeds).
    pub f_calls: u32,
    /// The produced seed; its time is `G`.
    pub seed: Option<Seed>,
}

impl GRoute {
    pub fn time(&self) -> Option<f64> {
        self.seed.map(|s| s.time)
    }
}

/// The G algorithm from the seed `(x × s)_r`. `frame` reflects every step
/// orientation (the identity is `1 + i`); `East` swaps the axes of each one.
pub fn g_route<R: SeedRouter>(
    start: &Seed,
    n: u32,
    heading: Heading,
    frame: Orientation,
    w_bar: f64,
    router: &mut R,
) -> Result<GRoute> {
    let (u, v) = g_steps(start.time, n, w_bar);
    let mut seed = *start;
    let mut calls = 0u32;
    let plan = std::iter::repeat_n(U_STEPS.iter(), u as usize)
        .flatten()
        .chain(std::iter::repeat_n(V_STEPS.iter(), v as usize).flatten());
    for st in plan {
        let o = match heading {
            Heading::North => st.o,
            Heading::East => st.o.swapped(),
        }
        .within(frame);
        let k = (n as i64 + i64::from(st.dn)).max(0) as u32;
        calls += 1;
        match router.route(&seed, k, o)? {
            Some((a, b)) => {
                seed = match st.which {
                    Which::F1 => a,
                    Which::F2 => b,
                }
            }
            None => {
                return Ok(GRoute {
                    u,
                    v,
                    f_calls: calls,
                    seed: None,
                })
            }
        }
    }
    Ok(GRoute {
        u,
        v,
        f_calls: calls,
        seed: Some(seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LRoute {
    pub m: u32,
    /// Super-squares on the priority route, `(0, 0)` first.
    pub route: Option<Vec<(i64, i64)>>,
    pub seed: Option<Seed>,
    pub g_calls: usize,
    /// Durations of the G steps along the route, in order.
    pub legs: Vec<f64>,
}

impl LRoute {
    pub fn time(&self) -> Option<f64> {
        self.seed.map(|s| s.time)
    }
}

/// G steps on the grid of super-squares of side `18(n + 1)`, `0..=m` in both
/// directions, with priority to the left neighbour as in the square grid.
pub fn l_route<R: SeedRouter>(start: &Seed, n: u32, m: u32, o: Orientation, w_bar: f64, router: &mut R) -> Result<LRoute> {
    let side = i64::from(m) + 1;
    let idx = |a: i64, b: i64| (b * side + a) as usize;
    // (seed, via-left?) per super-square.
    let mut cells: Vec<Option<(Seed, bool)>> = vec![None; (side * side) as usize];
    cells[0] = Some((*start, false));
    let mut g_calls = 0usize;
    for d in 1..=2 * (side - 1) {
        for a in (d - (side - 1)).max(0)..=d.min(side - 1) {
            let b = d - a;
            let left = (a > 0).then(|| cells[idx(a - 1, b)]).flatten();
            let below = (b > 0).then(|| cells[idx(a, b - 1)]).flatten();
            let (src, heading, via_left) = match (left, below) {
                (Some((s, _)), _) => (s, Heading::East, true),
                (None, Some((s, _))) => (s, Heading::North, false),
                _ => continue,
            };
            g_calls += 1;
            let g = g_route(&src, n, heading, o, w_bar, router)?;
            cells[idx(a, b)] = g.seed.map(|s| (s, via_left));
        }
    }
    let last = side - 1;
    let Some((end, _)) = cells[idx(last, last)] else {
        return Ok(LRoute {
            m,
            route: None,
            seed: None,
            g_calls,
            legs: Vec::new(),
        });
    };
    let mut route = vec![(last, last)];
    let (mut a, mut b) = (last, last);
    while (a, b) != (0, 0) {
        let (_, via_left) = cells[idx(a, b)].expect("route squares are open");
        if via_left {
            a -= 1;
        } else {
            b -= 1;
        }
        route.push((a, b));
    }
    route.reverse();
    let legs = route
        .windows(2)
        .map(|w| {
            let t0 = cells[idx(w[0].0, w[0].1)].expect("open").0.time;
            let t1 = cells[idx(w[1].0, w[1].1)].expect("open").0.time;
            t1 - t0
        })
        .collect();
    Ok(LRoute {
        m,
        route: Some(route),
        seed: Some(end),
        g_calls,
        legs,
    })
}
