//! The quenched random environment: one i.i.d. infection rate per undirected
//! edge, derived on demand from `(master seed, edge)` so that any window of
//! the infinite environment is reproducible without storage.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Edge, Rect, Site};
use crate::stats::{mix64, unit_f64};

/// Law `μ` of a single edge rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DistSpec {
    Point(f64),
    /// Rate `a` with probability `p`, otherwise `b`.
    TwoPoint { a: f64, b: f64, p: f64 },
    /// Rate `0` with probability `p`, otherwise `c`.
    ZeroOr { c: f64, p: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { mean: f64 },
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        let fin = |x: f64| x.is_finite();
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let ok = match *self {
            DistSpec::Point(c) => fin(c) && c >= 0.0,
            DistSpec::TwoPoint { a, b, p } => fin(a) && fin(b) && 0.0 < a && a < b && prob(p),
            DistSpec::ZeroOr { c, p } => fin(c) && c > 0.0 && prob(p),
            DistSpec::Uniform { lo, hi } => fin(lo) && fin(hi) && 0.0 <= lo && lo < hi,
            DistSpec::Exponential { mean } => fin(mean) && mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Spec(format!("invalid parameters in {self}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Point(c) => c,
            DistSpec::TwoPoint { a, b, p } => p * a + (1.0 - p) * b,
            DistSpec::ZeroOr { c, p } => (1.0 - p) * c,
            DistSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistSpec::Exponential { mean } => mean,
        }
    }

    /// Inverse CDF at `u ∈ [0, 1)`. Atoms are resolved by comparing `u` with
    /// the atom's probability, never by comparing rates.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            DistSpec::Point(c) => c,
            DistSpec::TwoPoint { a, b, p } => {
                if u < p {
                    a
                } else {
                    b
                }
            }
            DistSpec::ZeroOr { c, p } => {
                if u < p {
                    0.0
                } else {
                    c
                }
            }
            DistSpec::Uniform { lo, hi } => lo + (hi - lo) * u,
            DistSpec::Exponential { mean } => -mean * (-u).ln_1p(),
        }
    }

    /// Whether the law is continuous (no atoms).
    pub fn is_continuous(&self) -> bool {
        matches!(self, DistSpec::Uniform { .. } | DistSpec::Exponential { .. })
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistSpec::Point(c) => write!(f, "point({c:?})"),
            DistSpec::TwoPoint { a, b, p } => write!(f, "two_point({a:?},{b:?},{p:?})"),
            DistSpec::ZeroOr { c, p } => write!(f, "zero_or({c:?},{p:?})"),
            DistSpec::Uniform { lo, hi } => write!(f, "uniform({lo:?},{hi:?})"),
            DistSpec::Exponential { mean } => write!(f, "exponential({mean:?})"),
        }
    }
}

impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<DistSpec> {
        let bad = |why: &str| Error::Spec(format!("`{s}`: {why}"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| bad("expected name(args)"))?;
        let body = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| bad("missing `)`"))?;
        let args: Vec<f64> = body
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("arguments must be numbers"))?;
        let need = |k: usize| {
            if args.len() == k {
                Ok(())
            } else {
                Err(bad(&format!("expected {k} arguments")))
            }
        };
        let spec = match s[..open].trim() {
            "point" => {
                need(1)?;
                DistSpec::Point(args[0])
            }
            "two_point" => {
                need(3)?;
                DistSpec::TwoPoint {
                    a: args[0],
                    b: args[1],
                    p: args[2],
                }
            }
            "zero_or" => {
                need(2)?;
                DistSpec::ZeroOr {
                    c: args[0],
                    p: args[1],
                }
            }
            "uniform" => {
                need(2)?;
                DistSpec::Uniform {
                    lo: args[0],
                    hi: args[1],
                }
            }
            "exponential" => {
                need(1)?;
                DistSpec::Exponential { mean: args[0] }
            }
            other => return Err(bad(&format!("unknown distribution `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<DistSpec> for String {
    fn from(d: DistSpec) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for DistSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<DistSpec> {
        s.parse()
    }
}

#[derive(Debug, Clone)]
enum Source {
    Generated,
    Frozen {
        window: Rect,
        rates: Arc<HashMap<Edge, f64>>,
    },
}

/// `λ = (λ_e)`. Cheap to clone; immutable.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: DistSpec,
    seed: u64,
    source: Source,
}

pub fn make_env(spec: DistSpec, master_seed: u64) -> Result<Environment> {
    Environment::new(spec, master_seed)
}

impl Environment {
    pub fn new(spec: DistSpec, master_seed: u64) -> Result<Environment> {
        spec.validate()?;
        Ok(Environment {
            spec,
            seed: master_seed,
            source: Source::Generated,
        })
    }

    pub fn spec(&self) -> DistSpec {
        self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stable identifier for provenance in reports.
    pub fn id(&self) -> String {
        match &self.source {
            Source::Generated => format!("{}@{}", self.spec, self.seed),
            Source::Frozen { window, .. } => format!("{}@{}[{}]", self.spec, self.seed, window),
        }
    }

    /// The window of an imported environment, if any.
    pub fn window(&self) -> Option<Rect> {
        match &self.source {
            Source::Generated => None,
            Source::Frozen { window, .. } => Some(*window),
        }
    }

    pub fn mean_rate(&self) -> f64 {
        self.spec.mean()
    }

    fn generated_rate(&self, e: &Edge) -> f64 {
        let (x, _) = e.endpoints();
        let mut k = mix64(self.seed ^ 0x00E4_1A7E_5EED);
        k = mix64(k ^ x.re() as u64);
        k = mix64(k ^ x.im() as u64);
        k = mix64(k ^ u64::from(!e.is_horizontal()));
        self.spec.quantile(unit_f64(k))
    }

    pub fn rate(&self, e: &Edge) -> Result<f64> {
        match &self.source {
            Source::Generated => Ok(self.generated_rate(e)),
            Source::Frozen { window, rates } => rates.get(e).copied().ok_or_else(|| {
                Error::Window(format!("edge {e} is not inside the stored window {window}"))
            }),
        }
    }

    /// Rate between two sites; convenience over [`Environment::rate`].
    pub fn rate_between(&self, x: Site, y: Site) -> Result<f64> {
        self.rate(&Edge::new(x, y)?)
    }

    /// Text export of every edge with both endpoints inside `window`.
    pub fn export(&self, window: &Rect) -> Result<String> {
        let edges = window_edges(window)?;
        let mut out = String::new();
        out.push_str("dim=1\n");
        out.push_str(&format!("spec={}\n", self.spec));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("window={window}\n"));
        for e in edges {
            let (x, y) = e.endpoints();
            let r = self.rate(&e)?;
            out.push_str(&format!(
                "{} {} {} {} {:?}\n",
                x.re(),
                x.im(),
                y.re(),
                y.im(),
                r
            ));
        }
        Ok(out)
    }

    /// Inverse of [`Environment::export`]; the result answers only inside its window.
    pub fn import(doc: &str) -> Result<Environment> {
        let fmt_err = |line: usize, msg: String| Error::Format { line, msg };
        let mut dim = None;
        let mut spec = None;
        let mut seed = None;
        let mut window = None;
        let mut rates = HashMap::new();
        for (i, raw) in doc.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                match k.trim() {
                    "dim" => dim = Some(v.trim().to_string()),
                    "spec" => {
                        spec = Some(
                            v.parse::<DistSpec>()
                                .map_err(|e| fmt_err(ln, e.to_string()))?,
                        )
                    }
                    "seed" => {
                        seed = Some(
                            v.trim()
                                .parse::<u64>()
                                .map_err(|_| fmt_err(ln, format!("bad seed `{v}`")))?,
                        )
                    }
                    "window" => {
                        window = Some(
                            v.parse::<Rect>()
                                .map_err(|e| fmt_err(ln, e.to_string()))?,
                        )
                    }
                    other => return Err(fmt_err(ln, format!("unknown header `{other}`"))),
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(fmt_err(ln, format!("expected 5 fields, found {}", f.len())));
            }
            let c: Vec<i64> = f[..4]
                .iter()
                .map(|s| s.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| fmt_err(ln, "bad coordinate".into()))?;
            let rate: f64 = f[4]
                .parse()
                .map_err(|_| fmt_err(ln, format!("bad rate `{}`", f[4])))?;
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(fmt_err(ln, format!("rate {rate} is not a nonnegative number")));
            }
            let x = Site::new(c[0], c[1]).map_err(|e| fmt_err(ln, e.to_string()))?;
            let y = Site::new(c[2], c[3]).map_err(|e| fmt_err(ln, e.to_string()))?;
            let e = Edge::new(x, y).map_err(|e| fmt_err(ln, e.to_string()))?;
            if rates.insert(e, rate).is_some() {
                return Err(fmt_err(ln, format!("duplicate edge {e}")));
            }
        }
        let end = doc.lines().count();
        match dim.as_deref() {
            Some("1") => {}
            Some(d) => return Err(fmt_err(end, format!("dim={d} is not supported"))),
            None => return Err(fmt_err(end, "missing `dim` header".into())),
        }
        let spec = spec.ok_or_else(|| fmt_err(end, "missing `spec` header".into()))?;
        let seed = seed.ok_or_else(|| fmt_err(end, "missing `seed` header".into()))?;
        let window = window.ok_or_else(|| fmt_err(end, "missing `window` header".into()))?;
        let expected = window_edges(&window).map_err(|e| fmt_err(end, e.to_string()))?;
        if expected.len() != rates.len() || expected.iter().any(|e| !rates.contains_key(e)) {
            return Err(fmt_err(
                end,
                format!(
                    "window {window} has {} edges but the document lists {} matching ones",
                    expected.len(),
                    expected.iter().filter(|e| rates.contains_key(e)).count()
                ),
            ));
        }
        Ok(Environment {
            spec,
            seed,
            source: Source::Frozen {
                window,
                rates: Arc::new(rates),
            },
        })
    }
}

/// How trials obtain their environment: annealed runs draw a fresh one per
/// trial (averaging over `P^μ`), quenched runs share one fixed environment.
#[derive(Debug, Clone)]
pub enum EnvMode {
    Annealed(DistSpec),
    Quenched(Environment),
}

impl EnvMode {
    /// The environment for one trial. Annealed seeds come from the trial stream.
    pub fn env_for(&self, trial: &crate::stats::StreamId) -> Environment {
        match self {
            EnvMode::Annealed(spec) => Environment {
                spec: *spec,
                seed: trial.derive(0xE7).key(),
                source: Source::Generated,
            },
            EnvMode::Quenched(env) => env.clone(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnvMode::Annealed(_) => "annealed",
            EnvMode::Quenched(_) => "quenched",
        }
    }

    pub fn spec(&self) -> DistSpec {
        match self {
            EnvMode::Annealed(s) => *s,
            EnvMode::Quenched(e) => e.spec(),
        }
    }

    pub fn mean_rate(&self) -> f64 {
        self.spec().mean()
    }
}

/// Every edge with both endpoints in a finite window, lexicographically.
pub fn window_edges(window: &Rect) -> Result<Vec<Edge>> {
    let sites = window.sites()?;
    let mut edges = Vec::new();
    for s in sites {
        for (dx, dy) in [(1, 0), (0, 1)] {
            if let Ok(t) = s.offset(dx, dy) {
                if window.contains(t) {
                    edges.push(Edge::new(s, t)?);
                }
            }
        }
    }
    edges.sort();
    Ok(edges)
}
