use serde::{Deserialize, Serialize};

use super::{route_plan, Geometry, Orientation, PlacedBox, RoutePlan};
use crate::blocks::{seed_to_seed, SeedOutcome};
use crate::environment::{EnvMode, Environment};
use crate::error::Result;
use crate::graphical::{Constraint, GrowingRep};
use crate::lattice::Seed;
use crate::stats::{self, quantile_sorted, run_trials, EstimateWithCI, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailReason {
    /// The infection died out inside the box.
    DiedOut,
    /// Still alive when the box budget ran out.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteFailure {
    pub box_index: usize,
    pub hop: usize,
    pub reason: FailReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteOutcome {
    pub success: bool,
    /// Seed handed on northward, produced at time F₁.
    pub y1: Option<Seed>,
    /// Seed handed on eastward, produced at time F₂.
    pub y2: Option<Seed>,
    pub boxes_run: usize,
    pub failure: Option<RouteFailure>,
    /// Marks sampled across all boxes.
    pub marks: u64,
}

impl RouteOutcome {
    pub fn f1(&self) -> Option<f64> {
        self.y1.map(|s| s.time)
    }

    pub fn f2(&self) -> Option<f64> {
        self.y2.map(|s| s.time)
    }
}

/// Result of one box: a produced seed per target, or why not.
pub(crate) struct BoxRun {
    pub seeds: std::result::Result<Vec<Seed>, FailReason>,
    pub marks: u64,
}

/// Runs `src` through `b` on a fresh rep of the box. The rep starts with a
/// short horizon and doubles it while a target is still undecided; growing a
/// rep only appends marks, so the outcome equals that of a single rep on the
/// full budget.
pub(crate) fn run_box(env: &Environment, stream: &StreamId, b: &PlacedBox, src: &Seed, budget: f64) -> Result<BoxRun> {
    let local = Seed { time: 0.0, ..*src };
    let constraints: Vec<Constraint> = b.regions.iter().map(|r| Constraint::edges(*r)).collect();
    let mut horizon = (budget / 8.0).max(f64::MIN_POSITIVE);
    let mut grower = GrowingRep::new(env, &b.rect, stream)?;
    loop {
        let horizon_now = horizon.min(budget);
        let rep = grower.grow(horizon_now)?;
        let marks = rep.mark_count() as u64;
        let mut seeds = Vec::with_capacity(b.targets.len());
        let mut undecided = false;
        let mut died = false;
        for (t, c) in b.targets.iter().zip(&constraints) {
            match seed_to_seed(rep, &local, &t.line, c, horizon_now)? {
                SeedOutcome::Found { center, t: at } => seeds.push(Seed {
                    center,
                    r: src.r,
                    orientation: t.orientation,
                    time: src.time + at,
                }),
                SeedOutcome::DiedOut { .. } => {
                    died = true;
                    break;
                }
                SeedOutcome::Exhausted => undecided = true,
            }
        }
        if died {
            return Ok(BoxRun {
                seeds: Err(FailReason::DiedOut),
                marks,
            });
        }
        if !undecided {
            return Ok(BoxRun { seeds: Ok(seeds), marks });
        }
        if horizon_now >= budget {
            return Ok(BoxRun {
                seeds: Err(FailReason::Exhausted),
                marks,
            });
        }
        horizon *= 2.0;
    }
}

/// Runs a sequence of boxes, feeding each produced seed into the next box.
/// Box `i` draws its randomness from `stream_of(i)`.
pub(crate) fn run_boxes<S>(env: &Environment, boxes: &[PlacedBox], origin: &Seed, budget: f64, stream_of: S) -> Result<RouteOutcome>
where
    S: Fn(usize) -> StreamId,
{
    let mut seed = *origin;
    let mut marks = 0u64;
    for (i, b) in boxes.iter().enumerate() {
        let run = run_box(env, &stream_of(i), b, &seed, budget)?;
        marks += run.marks;
        let seeds = match run.seeds {
            Ok(s) => s,
            Err(reason) => {
                return Ok(RouteOutcome {
                    success: false,
                    y1: None,
                    y2: None,
                    boxes_run: i + 1,
                    failure: Some(RouteFailure {
                        box_index: i,
                        hop: b.hop,
                        reason,
                    }),
                    marks,
                })
            }
        };
        if i + 1 == boxes.len() {
            return Ok(RouteOutcome {
                success: true,
                y1: seeds.first().copied(),
                y2: seeds.get(1).copied().or(seeds.first().copied()),
                boxes_run: i + 1,
                failure: None,
                marks,
            });
        }
        seed = seeds[b.next.unwrap_or(0)];
    }
    Ok(RouteOutcome {
        success: true,
        y1: Some(seed),
        y2: Some(seed),
        boxes_run: 0,
        failure: None,
        marks,
    })
}

/// Executes the plan box by box. Each box samples only its own rectangle with
/// a stream derived from `(hop, box index)`.
pub fn run_route(env: &Environment, stream: &StreamId, plan: &RoutePlan) -> Result<RouteOutcome> {
    let mut within_hop = Vec::with_capacity(plan.boxes.len());
    let mut count = 0u64;
    for (i, b) in plan.boxes.iter().enumerate() {
        if i > 0 && plan.boxes[i - 1].hop != b.hop {
            count = 0;
        }
        within_hop.push(count);
        count += 1;
    }
    run_boxes(env, &plan.boxes, &plan.origin, plan.geom.budget, |i| {
        stream.derive(plan.boxes[i].hop as u64).derive(within_hop[i])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = stats::mean(&v);
        let sd = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary {
            count: n,
            mean,
            sd,
            min: v.first().copied().unwrap_or(f64::NAN),
            q10: quantile_sorted(&v, 0.1),
            q50: quantile_sorted(&v, 0.5),
            q90: quantile_sorted(&v, 0.9),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FTimeStats {
    pub n: u32,
    pub orientation: Orientation,
    pub trials: u64,
    pub boxes: usize,
    pub success: EstimateWithCI,
    pub f1: Summary,
    pub f2: Summary,
    /// Calibrated time scale: the mean of F₁ equals `1.5 Ŵ n`.
    pub w_hat: f64,
    /// `[7/6 Ŵn, 11/6 Ŵn]`.
    pub bracket: (f64, f64),
    /// Fraction of successful F₁ samples inside the bracket.
    pub in_bracket: f64,
    pub died_out: u64,
    pub exhausted: u64,
}

/// Empirical distribution of F₁ and F₂ over `trials` independent routes.
#[allow(clippy::too_many_arguments)]
pub fn f_time_stats(
    mode: &EnvMode,
    origin: &Seed,
    o: Orientation,
    n: u32,
    geom: &Geometry,
    trials: u64,
    stream: &StreamId,
    parallelism: usize,
) -> Result<FTimeStats> {
    let plan = route_plan(origin, o, n, geom)?;
    let outcomes: Vec<Result<RouteOutcome>> = run_trials(trials, stream, parallelism, |_, s| {
        let env = mode.env_for(&s);
        run_route(&env, &s.derive(1), &plan)
    });
    let mut f1 = Vec::new();
    let mut f2 = Vec::new();
    let (mut died, mut exhausted) = (0u64, 0u64);
    for out in outcomes {
        let out = out?;
        match (out.f1(), out.f2()) {
            (Some(a), Some(b)) if out.success => {
                f1.push(a - origin.time);
                f2.push(b - origin.time);
            }
            _ => match out.failure.map(|f| f.reason) {
                Some(FailReason::Exhausted) => exhausted += 1,
                _ => died += 1,
            },
        }
    }
    let s1 = Summary::of(&f1);
    let w_hat = s1.mean / (1.5 * f64::from(n));
    let bracket = (7.0 / 6.0 * w_hat * f64::from(n), 11.0 / 6.0 * w_hat * f64::from(n));
    let inside = f1.iter().filter(|&&t| t >= bracket.0 && t <= bracket.1).count();
    Ok(FTimeStats {
        n,
        orientation: o,
        trials,
        boxes: plan.boxes.len(),
        success: stats::wilson(f1.len() as u64, trials, stats::Z95),
        f1: s1,
        f2: Summary::of(&f2),
        w_hat,
        bracket,
        in_bracket: if f1.is_empty() { 0.0 } else { inside as f64 / f1.len() as f64 },
        died_out: died,
        exhausted,
    })
}
