//! `key = value` experiment documents.
//!
//! One key per line, `#` starts a comment. Unknown keys, repeated keys and
//! malformed values are all reported together. Every key has a documented
//! default (see [`KEYS`]) and the resolved values are echoed into reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::environment::DistSpec;
use crate::error::{Error, Result};
use crate::lattice::{Rect, Site};
use crate::renorm::{Orientation, DEFAULT_KAPPA};

/// Every key with its default and meaning. `auto` marks values derived from
/// other keys at run time.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("spec", "", "edge-rate distribution, e.g. point(2.0), zero_or(3.0,0.5), uniform(1.5,2.5)"),
    ("mode", "quenched", "quenched (one environment per master seed) or annealed (fresh per trial)"),
    ("seed", "1", "master seed"),
    ("d", "1", "dimension of the half-space; only 1 is implemented"),
    ("h", "4", "box height"),
    ("w", "16", "box half-width"),
    ("r", "1", "seed radius"),
    ("M", "30", "square spacing constant"),
    ("kappa", "1.25", "geometry slack factor"),
    ("T", "40", "horizon for simulate and survival"),
    ("box_T", "auto", "box horizon for blocks (auto: 10(h+w)/min(1, mean rate))"),
    ("budget", "auto", "per-box time budget for renorm (auto: 20h/mean rate)"),
    ("burn", "20", "burn-in for the upper invariant sampler"),
    ("t_grid", "5,10,20,40", "time grid"),
    ("l_grid", "2,4,6", "radii for condition (b)"),
    ("N_grid", "0,1,2,4,8", "thresholds for block events"),
    ("n", "4", "route length / grid size for renorm"),
    ("orientation", "1+i", "route orientation"),
    ("origin", "auto", "renorm origin site (auto: centre of the first square)"),
    ("initial", "0+0i", "initial sites, separated by `;`"),
    ("x", "0+0i", "target site for the conditions"),
    ("window", "0,0,2,1", "observation window x0,y0,x1,y1 (at most 12 sites)"),
    ("region", "-10,0,10,10", "finite region for env and simulate"),
    ("margin", "auto", "region margin (auto: ceil(mean rate * horizon) + 4, at most 40)"),
    ("envs", "5", "environments sampled by cc (master seeds seed, seed+1, ...)"),
    ("conditions", "false", "cc also estimates conditions (a) and (b)"),
    ("trials", "1000", "Monte Carlo trials"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Quenched,
    Annealed,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub spec: DistSpec,
    pub mode: ModeKind,
    pub seed: u64,
    pub h: i64,
    pub w: i64,
    pub r: i64,
    pub m: i64,
    pub kappa: f64,
    pub horizon: f64,
    pub box_horizon: Option<f64>,
    pub budget: Option<f64>,
    pub burn: f64,
    pub t_grid: Vec<f64>,
    pub l_grid: Vec<i64>,
    pub n_grid: Vec<i64>,
    pub n: u32,
    pub orientation: Orientation,
    pub origin: Option<Site>,
    pub initial: Vec<Site>,
    pub x: Site,
    pub window: Rect,
    pub region: Rect,
    pub margin: Option<i64>,
    pub envs: u64,
    pub conditions: bool,
    pub trials: u64,
    /// Resolved `key → value` text for every key, defaults included.
    pub echo: BTreeMap<String, String>,
}

/// Diagnostic for one key (line 0 when the key is missing).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: usize,
    pub key: String,
    pub msg: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}: {}", self.line, self.key, self.msg)
        } else {
            write!(f, "{}: {}", self.key, self.msg)
        }
    }
}

struct Reader {
    values: BTreeMap<String, (usize, String)>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn raw(&self, key: &str) -> (usize, String) {
        match self.values.get(key) {
            Some((l, v)) => (*l, v.clone()),
            None => {
                let d = KEYS.iter().find(|k| k.0 == key).expect("known key").1;
                (0, d.to_string())
            }
        }
    }

    fn issue(&mut self, line: usize, key: &str, msg: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line,
            key: key.to_string(),
            msg: msg.into(),
        });
    }

    /// Parses `key` (or its default); on failure records an issue and
    /// returns `fallback` so the remaining keys can still be checked.
    fn get<T>(&mut self, key: &str, fallback: T, parse: impl Fn(&str) -> std::result::Result<T, String>) -> T {
        let (line, v) = self.raw(key);
        match parse(&v) {
            Ok(x) => x,
            Err(msg) => {
                self.issue(line, key, msg);
                fallback
            }
        }
    }
}

fn num<T: FromStr>(what: &'static str) -> impl Fn(&str) -> std::result::Result<T, String> {
    move |v| v.parse::<T>().map_err(|_| format!("`{v}` is not {what}"))
}

fn list<T: FromStr>(what: &'static str, sep: char) -> impl Fn(&str) -> std::result::Result<Vec<T>, String> {
    move |v| {
        v.split(sep)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|_| format!("`{s}` is not {what}")))
            .collect()
    }
}

fn auto<T>(inner: impl Fn(&str) -> std::result::Result<T, String>) -> impl Fn(&str) -> std::result::Result<Option<T>, String> {
    move |v| if v == "auto" { Ok(None) } else { inner(v).map(Some) }
}

fn positive_f64(v: &str) -> std::result::Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{v}` must be a positive number")),
    }
}

fn nonnegative_f64(v: &str) -> std::result::Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{v}` must be a nonnegative number")),
    }
}

fn positive_count(v: &str) -> std::result::Result<u64, String> {
    match v.parse::<i64>() {
        Ok(x) if x > 0 => Ok(x as u64),
        Ok(x) => Err(format!("{x} must be at least 1")),
        Err(_) => Err(format!("`{v}` is not an integer")),
    }
}

fn show<T: fmt::Display>(xs: &[T], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

/// Parses and validates a document, returning every problem at once.
pub fn parse_config(doc: &str) -> std::result::Result<Config, Vec<ConfigIssue>> {
    let mut rd = Reader {
        values: BTreeMap::new(),
        issues: Vec::new(),
    };
    for (i, raw) in doc.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            rd.issue(i + 1, line, "expected `key = value`");
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.iter().any(|key| key.0 == k) {
            rd.issue(i + 1, k, "unknown key");
        } else if let Some((first, _)) = rd.values.get(k) {
            let msg = format!("repeated (first set on line {first})");
            rd.issue(i + 1, k, msg);
        } else {
            rd.values.insert(k.to_string(), (i + 1, v.to_string()));
        }
    }
    if !rd.values.contains_key("spec") {
        rd.issue(0, "spec", "required");
    }

    let spec = rd.get("spec", DistSpec::Point(0.0), |v| {
        if v.is_empty() {
            return Err("required".into());
        }
        v.parse::<DistSpec>().map_err(|e| e.to_string())
    });
    let mode = rd.get("mode", ModeKind::Quenched, |v| match v {
        "quenched" => Ok(ModeKind::Quenched),
        "annealed" => Ok(ModeKind::Annealed),
        _ => Err(format!("`{v}` is neither quenched nor annealed")),
    });
    let seed = rd.get("seed", 0, num::<u64>("a nonnegative integer"));
    let _d: i64 = rd.get("d", 1, |v| match v.parse::<i64>() {
        Ok(1) => Ok(1),
        Ok(d) => Err(format!("d={d} requested; only d=1 implemented")),
        Err(_) => Err(format!("`{v}` is not an integer")),
    });
    let h = rd.get("h", 1, num::<i64>("an integer"));
    let w = rd.get("w", 1, num::<i64>("an integer"));
    let r = rd.get("r", 0, num::<i64>("an integer"));
    let m = rd.get("M", 1, num::<i64>("an integer"));
    let kappa = rd.get("kappa", DEFAULT_KAPPA, positive_f64);
    let horizon = rd.get("T", 1.0, positive_f64);
    let box_horizon = rd.get("box_T", None, auto(positive_f64));
    let budget = rd.get("budget", None, auto(positive_f64));
    let burn = rd.get("burn", 0.0, nonnegative_f64);
    let t_grid = rd.get("t_grid", vec![], |v| {
        let ts: Vec<f64> = list::<f64>("a number", ',')(v)?;
        if ts.is_empty() || ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(format!("`{v}` must list nonnegative times"));
        }
        Ok(ts)
    });
    let l_grid = rd.get("l_grid", vec![], |v| {
        let ls: Vec<i64> = list::<i64>("an integer", ',')(v)?;
        if ls.iter().any(|l| *l < 0) {
            return Err("radii must be nonnegative".into());
        }
        Ok(ls)
    });
    let n_grid = rd.get("N_grid", vec![], |v| {
        let ns: Vec<i64> = list::<i64>("an integer", ',')(v)?;
        if ns.is_empty() {
            return Err("at least one threshold is needed".into());
        }
        Ok(ns)
    });
    let n = rd.get("n", 1, |v| positive_count(v).and_then(|x| u32::try_from(x).map_err(|_| "too large".into())));
    let orientation = rd.get("orientation", Orientation::NE, |v| v.parse().map_err(|e: Error| e.to_string()));
    let origin = rd.get("origin", None, auto(|v| v.parse::<Site>().map_err(|e| e.to_string())));
    let initial = rd.get("initial", vec![], |v| list::<Site>("a site", ';')(v));
    let x = rd.get("x", Site::ORIGIN, |v| v.parse::<Site>().map_err(|e| e.to_string()));
    let rect = |v: &str| -> std::result::Result<Rect, String> {
        let r = v.parse::<Rect>().map_err(|e| e.to_string())?;
        if !r.is_finite() || r.is_empty() {
            return Err(format!("`{v}` must be a finite nonempty rectangle"));
        }
        Ok(r)
    };
    let window = rd.get("window", Rect::finite(0, 0, 0, 0), |v| {
        let r = rect(v)?;
        match r.len() {
            Some(k) if k as usize <= crate::convergence::MAX_WINDOW => Ok(r),
            Some(k) => Err(format!("window has {k} sites; at most 12 are supported")),
            None => Err("window must be finite".into()),
        }
    });
    let region = rd.get("region", Rect::finite(0, 0, 0, 0), rect);
    let margin = rd.get("margin", None, auto(|v| match v.parse::<i64>() {
        Ok(m) if m >= 0 => Ok(m),
        _ => Err(format!("`{v}` must be a nonnegative integer")),
    }));
    let envs = rd.get("envs", 1, positive_count);
    let conditions = rd.get("conditions", false, |v| v.parse::<bool>().map_err(|_| format!("`{v}` is neither true nor false")));
    let trials = rd.get("trials", 1, positive_count);

    // cross-field checks, only when the fields themselves parsed
    if let Err(e) = spec.validate() {
        if rd.values.contains_key("spec") && !rd.issues.iter().any(|i| i.key == "spec") {
            let line = rd.raw("spec").0;
            rd.issue(line, "spec", e.to_string());
        }
    }
    if h < 1 {
        let line = rd.raw("h").0;
        rd.issue(line, "h", "must be at least 1");
    }
    if w < 1 {
        let line = rd.raw("w").0;
        rd.issue(line, "w", "must be at least 1");
    }
    if r < 0 || r > w {
        let line = rd.raw("r").0;
        rd.issue(line, "r", format!("must lie in 0..=w (w = {w})"));
    }
    if m < 1 {
        let line = rd.raw("M").0;
        rd.issue(line, "M", "must be at least 1");
    }

    if !rd.issues.is_empty() {
        rd.issues.sort_by_key(|i| (i.line, i.key.clone()));
        return Err(rd.issues);
    }
    let mut echo = BTreeMap::new();
    for (key, _, _) in KEYS {
        echo.insert(key.to_string(), rd.raw(key).1);
    }
    // normalized forms for the keys whose text can vary
    echo.insert("spec".into(), spec.to_string());
    echo.insert("t_grid".into(), show(&t_grid, ","));
    echo.insert("initial".into(), show(&initial, ";"));
    echo.insert("x".into(), x.to_string());
    echo.insert("window".into(), window.to_string());
    echo.insert("region".into(), region.to_string());
    echo.insert("orientation".into(), orientation.to_string());
    Ok(Config {
        spec,
        mode,
        seed,
        h,
        w,
        r,
        m,
        kappa,
        horizon,
        box_horizon,
        budget,
        burn,
        t_grid,
        l_grid,
        n_grid,
        n,
        orientation,
        origin,
        initial,
        x,
        window,
        region,
        margin,
        envs,
        conditions,
        trials,
        echo,
    })
}

/// [`parse_config`] with the issues folded into [`Error::Config`].
pub fn load_config(doc: &str) -> Result<Config> {
    parse_config(doc).map_err(|issues| Error::Config(issues.iter().map(|i| i.to_string()).collect()))
}

/// The schema as a commented document of defaults.
pub fn schema() -> String {
    let mut out = String::new();
    for (key, default, help) in KEYS {
        out.push_str(&format!("# {help}\n{key} = {default}\n"));
    }
    out
}
