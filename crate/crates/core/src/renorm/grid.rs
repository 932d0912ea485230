use serde::{Deserialize, Serialize};

use super::run::run_boxes;
use super::{cell_corner, hop_boxes, Geometry, Orientation, Step};
use crate::environment::Environment;
use crate::error::Result;
use crate::lattice::{Seed, Site};
use crate::stats::StreamId;

/// The two seeds an open square passes on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub north: Seed,
    pub east: Seed,
}

/// One attempt to join the seed of a square to two seeds in a neighbour.
pub trait HopRunner {
    fn hop(&mut self, from: (i64, i64), step: Step, seed: &Seed) -> Result<Option<CellSeeds>>;
}

/// Hops run on the environment. Every attempt draws from a stream derived
/// from the source square and direction only, so its outcome does not depend
/// on the order in which squares are explored.
pub struct EnvHopRunner<'a> {
    pub env: &'a Environment,
    pub stream: StreamId,
    pub geom: Geometry,
    pub orientation: Orientation,
    pub corner: Site,
}

impl<'a> EnvHopRunner<'a> {
    pub fn new(env: &'a Environment, stream: &StreamId, geom: &Geometry, o: Orientation, origin: Site) -> Self {
        EnvHopRunner {
            env,
            stream: *stream,
            geom: *geom,
            orientation: o,
            corner: cell_corner(origin, geom),
        }
    }

    pub fn stream_for(&self, from: (i64, i64), step: Step) -> StreamId {
        self.stream.derive_pair(from.0, from.1).derive(step as u64)
    }
}

impl HopRunner for EnvHopRunner<'_> {
    fn hop(&mut self, from: (i64, i64), step: Step, seed: &Seed) -> Result<Option<CellSeeds>> {
        let boxes = hop_boxes(&self.geom, self.orientation, self.corner, from, step, seed, 0)?;
        let s = self.stream_for(from, step);
        let out = run_boxes(self.env, &boxes, seed, self.geom.budget, |i| s.derive(i as u64))?;
        Ok(match (out.y1, out.y2) {
            (Some(north), Some(east)) if out.success => Some(CellSeeds { north, east }),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Open,
    Closed,
    /// Never attempted: no neighbour feeding it was open.
    Unexplored,
}

/// Which neighbour opened a square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Via {
    Origin,
    Left,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub m: i64,
    pub k: i64,
    pub status: CellStatus,
    pub via: Option<Via>,
    pub seeds: Option<CellSeeds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormGrid {
    pub n: u32,
    /// Row-major in `k`, then `m`: index `k * (n + 1) + m`.
    pub cells: Vec<Cell>,
    /// The priority route from `(0, 0)` to `(n, n)`, if that square is open.
    pub route: Option<Vec<(i64, i64)>>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub attempts: usize,
}

impl RenormGrid {
    pub fn cell(&self, m: i64, k: i64) -> Option<&Cell> {
        let side = i64::from(self.n) + 1;
        if (0..side).contains(&m) && (0..side).contains(&k) {
            self.cells.get((k * side + m) as usize)
        } else {
            None
        }
    }

    fn is_open(&self, m: i64, k: i64) -> bool {
        self.cell(m, k).is_some_and(|c| c.status == CellStatus::Open)
    }

    pub fn open_count(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Open).count()
    }
}

/// Oriented site percolation on `R_{m,k}`, `0 <= m, k <= n`, explored one
/// anti-diagonal at a time. A square opens from its left neighbour if that one
/// is open and its hop succeeds; only when the left neighbour is not open may
/// the square below open it.
pub fn renorm_grid_with<H: HopRunner>(runner: &mut H, origin: &Seed, n: u32) -> Result<RenormGrid> {
    let side = i64::from(n) + 1;
    let blank = |m, k| Cell {
        m,
        k,
        status: CellStatus::Unexplored,
        via: None,
        seeds: None,
    };
    let mut grid = RenormGrid {
        n,
        cells: (0..side * side).map(|i| blank(i % side, i / side)).collect(),
        route: None,
        f1: None,
        f2: None,
        attempts: 0,
    };
    let valid = origin.sites().is_ok();
    grid.cells[0] = Cell {
        m: 0,
        k: 0,
        status: if valid { CellStatus::Open } else { CellStatus::Closed },
        via: valid.then_some(Via::Origin),
        seeds: valid.then_some(CellSeeds {
            north: *origin,
            east: *origin,
        }),
    };
    for d in 1..=2 * (side - 1) {
        for m in (d - (side - 1)).max(0)..=d.min(side - 1) {
            let k = d - m;
            let (source, step, via) = if grid.is_open(m - 1, k) {
                ((m - 1, k), Step::East, Via::Left)
            } else if grid.is_open(m, k - 1) {
                ((m, k - 1), Step::North, Via::Below)
            } else {
                continue;
            };
            let from = grid.cell(source.0, source.1).and_then(|c| c.seeds).expect("open squares carry seeds");
            let seed = if step == Step::East { from.east } else { from.north };
            grid.attempts += 1;
            let idx = (k * side + m) as usize;
            grid.cells[idx] = match runner.hop(source, step, &seed)? {
                Some(seeds) => Cell {
                    m,
                    k,
                    status: CellStatus::Open,
                    via: Some(via),
                    seeds: Some(seeds),
                },
                None => Cell {
                    m,
                    k,
                    status: CellStatus::Closed,
                    via: None,
                    seeds: None,
                },
            };
        }
    }
    let last = side - 1;
    if grid.is_open(last, last) {
        let mut route = vec![(last, last)];
        let (mut m, mut k) = (last, last);
        while (m, k) != (0, 0) {
            match grid.cell(m, k).and_then(|c| c.via) {
                Some(Via::Left) => m -= 1,
                Some(Via::Below) => k -= 1,
                _ => break,
            }
            route.push((m, k));
        }
        route.reverse();
        let end = grid.cell(last, last).and_then(|c| c.seeds).expect("open");
        grid.f1 = Some(end.north.time);
        grid.f2 = Some(end.east.time);
        grid.route = Some(route);
    }
    Ok(grid)
}

/// The grid on an environment with per-square streams.
pub fn renorm_grid(env: &Environment, stream: &StreamId, origin: &Seed, n: u32, o: Orientation, geom: &Geometry) -> Result<RenormGrid> {
    geom.validate()?;
    let mut runner = EnvHopRunner::new(env, stream, geom, o, origin.center);
    renorm_grid_with(&mut runner, origin, n)
}
